use std::collections::BTreeMap;
use std::path::PathBuf;

use ccdownfold::ducc::Variant;
use ccdownfold::greens::Components;
use ccdownfold::{Error, Result};
use clap::Parser;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workflow {
    Ccsd,
    VerifySes,
    Downfold,
    Flow,
    Gf,
}

impl Workflow {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "ccsd" => Ok(Self::Ccsd),
            "verify-ses" => Ok(Self::VerifySes),
            "downfold" => Ok(Self::Downfold),
            "flow" => Ok(Self::Flow),
            "gf" => Ok(Self::Gf),
            _ => Err(Error::Usage(format!(
                "unknown workflow {s:?} (expected ccsd, verify-ses, downfold, flow or gf)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ccsd => "ccsd",
            Self::VerifySes => "verify-ses",
            Self::Downfold => "downfold",
            Self::Flow => "flow",
            Self::Gf => "gf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Fcidump(PathBuf),
    Pairing {
        levels: usize,
        spacing: f64,
        g: f64,
        n_electrons: usize,
    },
}

/// Command-line flags. Every value may also come from `--config`, a file of
/// `key = value` lines using the flag names without dashes.
#[derive(Debug, Parser)]
#[command(name = "ccdownfold", version, about = "Coupled-cluster downfolding workflows")]
pub struct Args {
    /// FCIDUMP integral file.
    #[arg(long)]
    input: Option<String>,
    /// Built-in model, `pairing:n,spacing,g[,nelec]`.
    #[arg(long)]
    model: Option<String>,
    /// ccsd | verify-ses | downfold | flow | gf
    #[arg(long)]
    workflow: Option<String>,
    /// Active occupied spatial orbitals, comma separated.
    #[arg(long = "active-occ")]
    active_occ: Option<String>,
    /// Active virtual spatial orbitals, comma separated.
    #[arg(long = "active-virt")]
    active_virt: Option<String>,
    /// DUCC variants, comma separated (A1,A3,A4,A6,A7).
    #[arg(long)]
    variant: Option<String>,
    #[arg(long = "omega-min", allow_hyphen_values = true)]
    omega_min: Option<String>,
    #[arg(long = "omega-max", allow_hyphen_values = true)]
    omega_max: Option<String>,
    #[arg(long = "omega-points")]
    omega_points: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    /// both | removal | addition
    #[arg(long)]
    components: Option<String>,
    /// Residual threshold of the CC solves.
    #[arg(long)]
    tol: Option<String>,
    /// CC excitation rank (flow: rank inside each algebra).
    #[arg(long)]
    rank: Option<String>,
    /// Highest operator rank of the coefficient export.
    #[arg(long = "max-rank")]
    max_rank: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Configuration file; its values win over flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

const KEYS: [&str; 15] = [
    "input",
    "model",
    "workflow",
    "active-occ",
    "active-virt",
    "variant",
    "omega-min",
    "omega-max",
    "omega-points",
    "eta",
    "components",
    "tol",
    "rank",
    "max-rank",
    "out",
];

impl Args {
    fn settings(&self) -> BTreeMap<String, String> {
        let values = [
            &self.input,
            &self.model,
            &self.workflow,
            &self.active_occ,
            &self.active_virt,
            &self.variant,
            &self.omega_min,
            &self.omega_max,
            &self.omega_points,
            &self.eta,
            &self.components,
            &self.tol,
            &self.rank,
            &self.max_rank,
            &self.out,
        ];
        KEYS.iter()
            .zip(values)
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("config line {}: expected key = value", n + 1)))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Format(format!("config line {}: unknown key {key:?}", n + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

/// Merge flags with the config file, which wins; returns the settings and
/// one warning per overridden flag.
pub fn merge(args: &Args) -> Result<(BTreeMap<String, String>, Vec<String>)> {
    let mut settings = args.settings();
    let mut warnings = Vec::new();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        for (key, value) in parse_config_file(&text)? {
            if let Some(flag) = settings.get(&key) {
                if *flag != value {
                    warnings.push(format!(
                        "config file sets {key} = {value}, overriding --{key} {flag}"
                    ));
                }
            }
            settings.insert(key, value);
        }
    }
    Ok((settings, warnings))
}

/// A validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Source,
    pub workflow: Workflow,
    pub active_occ: Option<Vec<usize>>,
    pub active_virt: Option<Vec<usize>>,
    pub variants: Vec<Variant>,
    pub omega: Option<(f64, f64, usize, f64)>,
    pub components: Components,
    pub tol: f64,
    pub rank: Option<usize>,
    pub max_rank: usize,
    pub out: PathBuf,
    /// The merged settings, echoed into the summary.
    pub settings: BTreeMap<String, String>,
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Usage(format!("--{key}: cannot parse {value:?}")))
}

fn list(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| number(key, v)).collect()
}

fn parse_model(spec: &str) -> Result<Source> {
    let bad = || Error::Usage(format!("--model {spec:?}: expected pairing:n,spacing,g[,nelec]"));
    let body = spec.strip_prefix("pairing:").ok_or_else(bad)?;
    let parts: Vec<&str> = body.split(',').map(str::trim).collect();
    if parts.len() != 3 && parts.len() != 4 {
        return Err(bad());
    }
    let levels: usize = parts[0].parse().map_err(|_| bad())?;
    let spacing: f64 = parts[1].parse().map_err(|_| bad())?;
    let g: f64 = parts[2].parse().map_err(|_| bad())?;
    let n_electrons: usize = match parts.get(3) {
        Some(v) => v.parse().map_err(|_| bad())?,
        None => levels,
    };
    if levels == 0 || levels > 32 {
        return Err(Error::Usage(format!("pairing model needs 1 to 32 levels, got {levels}")));
    }
    if n_electrons > 2 * levels {
        return Err(Error::Usage(format!(
            "{n_electrons} electrons do not fit in {levels} doubly degenerate levels"
        )));
    }
    Ok(Source::Pairing {
        levels,
        spacing,
        g,
        n_electrons,
    })
}

impl RunConfig {
    pub fn from_settings(settings: BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| settings.get(k).map(String::as_str);
        let source = match (get("input"), get("model")) {
            (Some(_), Some(_)) => return Err(Error::Usage("give either --input or --model, not both".into())),
            (Some(path), None) => Source::Fcidump(PathBuf::from(path)),
            (None, Some(model)) => parse_model(model)?,
            (None, None) => return Err(Error::Usage("no Hamiltonian given (use --input or --model)".into())),
        };
        let workflow = Workflow::parse(get("workflow").ok_or_else(|| Error::Usage("--workflow is required".into()))?)?;
        let active_occ = get("active-occ").map(|v| list("active-occ", v)).transpose()?;
        let active_virt = get("active-virt").map(|v| list("active-virt", v)).transpose()?;
        let variants = match get("variant") {
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<Variant>())
                .collect::<Result<Vec<_>>>()?,
            None => Variant::PRIMARY.to_vec(),
        };
        let omega = match (get("omega-min"), get("omega-max")) {
            (Some(lo), Some(hi)) => Some((
                number("omega-min", lo)?,
                number("omega-max", hi)?,
                get("omega-points").map(|v| number("omega-points", v)).transpose()?.unwrap_or(400),
                get("eta").map(|v| number("eta", v)).transpose()?.unwrap_or(0.01),
            )),
            (None, None) => None,
            _ => return Err(Error::Usage("--omega-min and --omega-max go together".into())),
        };
        let components = match get("components").unwrap_or("both") {
            "both" => Components::Both,
            "removal" => Components::Removal,
            "addition" => Components::Addition,
            other => return Err(Error::Usage(format!("unknown --components {other:?}"))),
        };
        let tol = get("tol").map(|v| number("tol", v)).transpose()?.unwrap_or(1e-10);
        if !(tol > 0.0) {
            return Err(Error::Usage(format!("--tol must be positive, got {tol}")));
        }
        let rank = get("rank").map(|v| number("rank", v)).transpose()?;
        if rank == Some(0) {
            return Err(Error::Usage("--rank must be at least 1".into()));
        }
        let max_rank = get("max-rank").map(|v| number("max-rank", v)).transpose()?.unwrap_or(2);
        let out = PathBuf::from(get("out").unwrap_or("."));
        match workflow {
            Workflow::Downfold if active_occ.is_none() || active_virt.is_none() => {
                return Err(Error::Usage("downfold needs --active-occ and --active-virt".into()));
            }
            Workflow::Gf if omega.is_none() => {
                return Err(Error::Usage("gf needs --omega-min and --omega-max".into()));
            }
            _ => {}
        }
        if active_occ.is_some() != active_virt.is_some() {
            return Err(Error::Usage("--active-occ and --active-virt go together".into()));
        }
        Ok(Self {
            source,
            workflow,
            active_occ,
            active_virt,
            variants,
            omega,
            components,
            tol,
            rank,
            max_rank,
            out,
            settings,
        })
    }
}
