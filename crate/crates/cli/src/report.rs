use std::fs;
use std::path::{Path, PathBuf};

use ccdownfold::{Error, Result};
use serde_json::{Map, Value};

/// Energies and frequencies are reported to 10 decimal places.
pub fn hartree(x: f64) -> Value {
    let r = (x * 1e10).round() / 1e10;
    // -0.0 and 0.0 must serialize identically.
    Value::from(if r == 0.0 { 0.0 } else { r })
}

/// Residuals and other small diagnostics keep full precision.
pub fn raw(x: f64) -> Value {
    Value::from(x)
}

pub fn fmt_hartree(x: f64) -> String {
    let s = format!("{x:.10}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

pub fn fmt_small(x: f64) -> String {
    format!("{x:.6e}")
}

/// Everything a workflow produces, held in memory until it succeeds.
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Map<String, Value>,
    pub files: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.results.insert(key.to_string(), value.into());
    }

    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

/// Writes artifacts into `dir`; on any failure removes what was written.
pub struct ArtifactWriter {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    pub fn rollback(self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Exit status for each error code; 1 is reserved for panics.
pub fn exit_code(err: &Error) -> i32 {
    match err.code() {
        "E_USAGE" => 2,
        "E_FORMAT" => 3,
        "E_INDEX" => 4,
        "E_CONFLICT" => 5,
        "E_EMPTY_SPACE" => 6,
        "E_NON_NILPOTENT" => 7,
        "E_SHAPE" => 8,
        "E_CONVERGENCE" => 9,
        "E_QUASI_DEGENERATE" => 10,
        "E_LINEAR_SOLVE" => 11,
        "E_CONTAMINATION" => 12,
        "E_NOT_SES" => 13,
        "E_NON_HERMITIAN" => 14,
        _ => 15,
    }
}

/// `ERROR <code>: <message>` on one line.
pub fn error_line(err: &Error) -> String {
    let msg = err.to_string().replace('\n', " ");
    format!("ERROR {}: {msg}", err.code())
}
