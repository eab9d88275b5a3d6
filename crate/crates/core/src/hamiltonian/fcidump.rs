use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Spatial-orbital integrals in chemists' notation, as carried by an FCIDUMP.
///
/// `h_pq` is stored as a packed lower triangle and `(pq|rs)` with its full
/// 8-fold permutational symmetry folded away; accessors expand on the fly.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSet {
    pub n_spatial: usize,
    pub n_electrons: usize,
    pub ms2: i32,
    pub e_core: f64,
    /// `ORBSYM` labels. Parsed and kept, not used by any algorithm.
    pub orbsym: Vec<u32>,
    pub isym: Option<u32>,
    h_one: Vec<f64>,
    v_two: Vec<f64>,
}

#[inline]
fn pair_index(i: usize, j: usize) -> usize {
    let (a, b) = if i >= j { (i, j) } else { (j, i) };
    a * (a + 1) / 2 + b
}

impl IntegralSet {
    /// An all-zero integral set of the given shape.
    pub fn zeros(n_spatial: usize, n_electrons: usize, ms2: i32) -> Result<Self> {
        if n_spatial == 0 || n_electrons == 0 {
            return Err(Error::Format(
                "NORB and NELEC must both be at least 1".into(),
            ));
        }
        if ms2.unsigned_abs() as usize > n_electrons || (n_electrons as i32 - ms2) % 2 != 0 {
            return Err(Error::Format(format!(
                "MS2={ms2} is incompatible with NELEC={n_electrons}"
            )));
        }
        let npair = n_spatial * (n_spatial + 1) / 2;
        Ok(Self {
            n_spatial,
            n_electrons,
            ms2,
            e_core: 0.0,
            orbsym: Vec::new(),
            isym: None,
            h_one: vec![0.0; npair],
            v_two: vec![0.0; npair * (npair + 1) / 2],
        })
    }

    #[inline]
    pub fn h(&self, p: usize, q: usize) -> f64 {
        self.h_one[pair_index(p, q)]
    }

    /// `(pq|rs)` in chemists' notation.
    #[inline]
    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.v_two[pair_index(pair_index(p, q), pair_index(r, s))]
    }

    pub fn set_h(&mut self, p: usize, q: usize, value: f64) {
        let idx = pair_index(p, q);
        self.h_one[idx] = value;
    }

    pub fn set_eri(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        let idx = pair_index(pair_index(p, q), pair_index(r, s));
        self.v_two[idx] = value;
    }

    /// Every `(pq|rs)` written out, row-major over `n⁴` entries.
    pub fn eri_dense(&self) -> Vec<f64> {
        let n = self.n_spatial;
        let mut out = vec![0.0; n * n * n * n];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        out[((p * n + q) * n + r) * n + s] = self.eri(p, q, r, s);
                    }
                }
            }
        }
        out
    }

    /// Re-fold a dense `n⁴` array. Fails with a conflict error if the array
    /// breaks the 8-fold symmetry by more than `1e-12`.
    pub fn set_eri_dense(&mut self, dense: &[f64]) -> Result<()> {
        let n = self.n_spatial;
        if dense.len() != n * n * n * n {
            return Err(Error::Shape(format!(
                "expected {} two-electron entries, got {}",
                n * n * n * n,
                dense.len()
            )));
        }
        let mut seen = vec![false; self.v_two.len()];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let value = dense[((p * n + q) * n + r) * n + s];
                        let idx = pair_index(pair_index(p, q), pair_index(r, s));
                        if seen[idx] {
                            if (self.v_two[idx] - value).abs() > 1e-12 {
                                return Err(Error::Conflict(format!(
                                    "({} {}|{} {}) breaks permutational symmetry",
                                    p + 1,
                                    q + 1,
                                    r + 1,
                                    s + 1
                                )));
                            }
                        } else {
                            self.v_two[idx] = value;
                            seen[idx] = true;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Header of an FCIDUMP: `&FCI NORB=..,NELEC=..,MS2=..,ORBSYM=..,ISYM=.. &END`.
#[derive(Debug, Default)]
struct Header {
    values: HashMap<String, Vec<String>>,
}

impl Header {
    fn parse(text: &str) -> Self {
        let mut values: HashMap<String, Vec<String>> = HashMap::new();
        let mut current: Option<String> = None;
        for token in text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            if let Some((key, rest)) = token.split_once('=') {
                let key = key.trim().to_ascii_uppercase();
                let entry = values.entry(key.clone()).or_default();
                if !rest.is_empty() {
                    entry.push(rest.to_string());
                }
                current = Some(key);
            } else if let Some(key) = &current {
                values.get_mut(key).unwrap().push(token.to_string());
            }
        }
        Self { values }
    }

    fn usize_field(&self, key: &str) -> Result<Option<usize>> {
        match self.values.get(key).and_then(|v| v.first()) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Format(format!("{key}={raw} is not a non-negative integer"))),
        }
    }
}

fn parse_number(raw: &str) -> Option<f64> {
    raw.replace(['D', 'd'], "e").parse().ok()
}

/// Parse the text of an FCIDUMP file (Molpro convention, 1-based indices).
pub fn parse_fcidump(text: &str) -> Result<IntegralSet> {
    let start = text
        .find(|c: char| !c.is_whitespace())
        .ok_or_else(|| Error::Format("empty input".into()))?;
    let body = &text[start..];
    if !body.get(..4).is_some_and(|s| s.eq_ignore_ascii_case("&FCI")) {
        return Err(Error::Format("input does not start with an &FCI namelist".into()));
    }
    // The namelist ends at `&END` or a lone `/`.
    let upper = body.to_ascii_uppercase();
    let (header_end, rest_start) = match (upper.find("&END"), upper.find('/')) {
        (Some(e), Some(s)) if s < e => (s, s + 1),
        (Some(e), _) => (e, e + 4),
        (None, Some(s)) => (s, s + 1),
        (None, None) => return Err(Error::Format("unterminated &FCI namelist".into())),
    };
    let header = Header::parse(&body[4..header_end]);

    let n_spatial = header
        .usize_field("NORB")?
        .ok_or_else(|| Error::Format("missing NORB in &FCI header".into()))?;
    let n_electrons = header
        .usize_field("NELEC")?
        .ok_or_else(|| Error::Format("missing NELEC in &FCI header".into()))?;
    let ms2 = match header.values.get("MS2").and_then(|v| v.first()) {
        None => 0,
        Some(raw) => raw
            .parse::<i32>()
            .map_err(|_| Error::Format(format!("MS2={raw} is not an integer")))?,
    };

    let mut set = IntegralSet::zeros(n_spatial, n_electrons, ms2)?;
    if let Some(raw) = header.values.get("ORBSYM") {
        set.orbsym = raw
            .iter()
            .map(|s| s.parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format("ORBSYM entries must be integers".into()))?;
    }
    set.isym = header.usize_field("ISYM")?.map(|v| v as u32);

    let mut h_seen = vec![false; set.h_one.len()];
    let mut v_seen = vec![false; set.v_two.len()];
    let mut core_seen = false;

    for (lineno, line) in body[rest_start..].lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(Error::Format(format!(
                "integral line {}: expected `value i j k l`, got {:?}",
                lineno + 1,
                line.trim()
            )));
        }
        let value = parse_number(fields[0]).ok_or_else(|| {
            Error::Format(format!("integral line {}: bad value {:?}", lineno + 1, fields[0]))
        })?;
        let mut idx = [0usize; 4];
        for (slot, raw) in idx.iter_mut().zip(&fields[1..]) {
            let parsed: i64 = raw.parse().map_err(|_| {
                Error::Format(format!("integral line {}: bad index {:?}", lineno + 1, raw))
            })?;
            if parsed < 0 || parsed as usize > n_spatial {
                return Err(Error::Index(format!(
                    "integral line {}: index {parsed} outside [0, {n_spatial}]",
                    lineno + 1
                )));
            }
            *slot = parsed as usize;
        }
        let [i, j, k, l] = idx;
        let check = |seen: &mut bool, stored: &mut f64, what: String| -> Result<()> {
            if *seen && (*stored - value).abs() > 1e-12 {
                return Err(Error::Conflict(format!(
                    "{what} given as both {stored} and {value}"
                )));
            }
            *seen = true;
            *stored = value;
            Ok(())
        };
        match (i, j, k, l) {
            (0, 0, 0, 0) => check(&mut core_seen, &mut set.e_core, "core energy".into())?,
            (i, j, 0, 0) if i > 0 && j > 0 => {
                let p = pair_index(i - 1, j - 1);
                check(&mut h_seen[p], &mut set.h_one[p], format!("h({i},{j})"))?;
            }
            // Orbital energies (`e i 0 0 0`) are informational.
            (i, 0, 0, 0) if i > 0 => {}
            (i, j, k, l) if i > 0 && j > 0 && k > 0 && l > 0 => {
                let p = pair_index(pair_index(i - 1, j - 1), pair_index(k - 1, l - 1));
                check(&mut v_seen[p], &mut set.v_two[p], format!("({i} {j}|{k} {l})"))?;
            }
            _ => {
                return Err(Error::Format(format!(
                    "integral line {}: unsupported index pattern {i} {j} {k} {l}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(set)
}

pub fn read_fcidump(path: impl AsRef<Path>) -> Result<IntegralSet> {
    let text = std::fs::read_to_string(path)?;
    parse_fcidump(&text)
}
