//! Thin experiment CLI over the library.
//!
//! Usage: coordsketch <sample|fsum|fk|hoc|embed|regress|lra|congest|sweep>
//! [--config FILE] [--key value ...]
//!
//! Every flag maps onto the same key=value space as the config file; flags
//! override the file. Exits nonzero if validation fails or any trial
//! errored.

use coordsketch::experiment::{
    apply_pairs, run_experiment, validate, ExperimentConfig, ProtocolKind,
};
use std::collections::BTreeMap;
use std::process::ExitCode;
use std::str::FromStr;

const USAGE: &str = "usage: coordsketch <sample|fsum|fk|hoc|embed|regress|lra|congest|sweep> \
[--config FILE] [--n N] [--servers S] [--d D] [--k K] [--p P] [--eps E] [--delta D] \
[--delta-rounds R] [--t T] [--fn pow:K|huber:TAU] [--g product|sum|min] [--dist random|random-gaussian|file] \
[--files a,b,...] [--graph FILE] [--manifest FILE] [--out-dir DIR] [--grid WxH] \
[--seed S] [--trials T] [--jobs J] [--csv OUT] [--json OUT] [--sample-const C] \
[--sketch-const C] [--heavy-c C] [--sweep-servers 4,8,16] [--prg-seed FILE] [--truth] [--prg]";

fn parse_args(args: &[String]) -> Result<ExperimentConfig, Vec<String>> {
    if args.is_empty() {
        return Err(vec![USAGE.to_string()]);
    }
    let protocol = ProtocolKind::from_str(&args[0]).map_err(|e| vec![e, USAGE.to_string()])?;
    let mut pairs: BTreeMap<String, String> = BTreeMap::new();
    let mut config_path: Option<String> = None;
    let mut i = 1;
    let flags_without_value = ["truth", "prg"];
    while i < args.len() {
        let arg = &args[i];
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| vec![format!("unexpected argument '{arg}'"), USAGE.to_string()])?;
        if key == "config" {
            i += 1;
            config_path = Some(
                args.get(i)
                    .cloned()
                    .ok_or_else(|| vec!["--config needs a path".to_string()])?,
            );
        } else if flags_without_value.contains(&key) {
            pairs.insert(key.to_string(), "true".to_string());
        } else {
            i += 1;
            let value = args
                .get(i)
                .cloned()
                .ok_or_else(|| vec![format!("--{key} needs a value")])?;
            pairs.insert(key.to_string(), value);
        }
        i += 1;
    }

    let mut cfg = ExperimentConfig::default();
    if let Some(path) = config_path {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| vec![format!("cannot read config {path}: {e}")])?;
        let file_pairs = parse_config_pairs(&text)?;
        apply_pairs(&mut cfg, &file_pairs)?;
    }
    cfg.protocol = protocol;
    apply_pairs(&mut cfg, &pairs)?;
    validate(&cfg)?;
    Ok(cfg)
}

fn parse_config_pairs(text: &str) -> Result<BTreeMap<String, String>, Vec<String>> {
    let mut map = BTreeMap::new();
    let mut errors = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => errors.push(format!("config line {}: expected key = value", idx + 1)),
        }
    }
    if errors.is_empty() {
        Ok(map)
    } else {
        Err(errors)
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = match parse_args(&args) {
        Ok(cfg) => cfg,
        Err(errors) => {
            for e in errors {
                eprintln!("error: {e}");
            }
            return ExitCode::from(2);
        }
    };
    let table = match run_experiment(&cfg) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let csv = table.to_csv();
    if let Some(path) = &cfg.csv_out {
        if let Err(e) = std::fs::write(path, &csv) {
            eprintln!("error: cannot write {path}: {e}");
            return ExitCode::from(1);
        }
    }
    if let Some(path) = &cfg.json_out {
        if let Err(e) = std::fs::write(path, table.to_json()) {
            eprintln!("error: cannot write {path}: {e}");
            return ExitCode::from(1);
        }
    }
    if cfg.csv_out.is_none() && cfg.json_out.is_none() {
        print!("{csv}");
    }
    let errored = table
        .summary_value("errors")
        .and_then(|v| v.parse::<u64>().ok())
        .unwrap_or(0);
    if errored > 0 {
        eprintln!("{errored} trial(s) errored");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
