mod config;
mod report;
mod workflows;

use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use ccdownfold::{Error, Result};
use clap::error::ErrorKind;
use clap::Parser;
use serde_json::{json, Map, Value};

use config::{merge, Args, RunConfig};
use report::{error_line, exit_code, ArtifactWriter, Outcome};

fn summary(cfg: &RunConfig, outcome: &Outcome, wall_time: f64) -> String {
    let inputs: Map<String, Value> = cfg
        .settings
        .iter()
        .map(|(k, v)| (k.clone(), Value::from(v.clone())))
        .collect();
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut artifacts: Vec<&str> = outcome.files.iter().map(|(n, _)| n.as_str()).collect();
    artifacts.push("summary.json");
    let doc = json!({
        "program": "ccdownfold",
        "version": env!("CARGO_PKG_VERSION"),
        "library_version": ccdownfold::VERSION,
        "workflow": cfg.workflow.name(),
        "inputs": inputs,
        "warnings": outcome.warnings,
        "results": outcome.results,
        "artifacts": artifacts,
        "wall_time_s": wall_time,
        "timestamp": timestamp,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("JSON values are finite or null");
    text.push('\n');
    text
}

fn write_all(cfg: &RunConfig, outcome: &Outcome, started: Instant) -> Result<()> {
    let mut writer = ArtifactWriter::new(&cfg.out)?;
    let result = (|| {
        for (name, contents) in &outcome.files {
            writer.write(name, contents)?;
        }
        writer.write("summary.json", &summary(cfg, outcome, started.elapsed().as_secs_f64()))
    })();
    if result.is_err() {
        writer.rollback();
    }
    result
}

fn run(args: &Args) -> Result<()> {
    let started = Instant::now();
    let (settings, mut warnings) = merge(args)?;
    let cfg = RunConfig::from_settings(settings)?;
    let mut outcome = workflows::run(&cfg)?;
    warnings.append(&mut outcome.warnings);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    outcome.warnings = warnings;
    write_all(&cfg, &outcome, started)?;
    println!("{}: wrote {} files to {}", cfg.workflow.name(), outcome.files.len() + 1, cfg.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let err = Error::Usage(first.trim_start_matches("error: ").to_string());
            eprintln!("{}", error_line(&err));
            return ExitCode::from(exit_code(&err) as u8);
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_line(&err));
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
