//! Flat key=value experiment configuration with command-line overrides.
//!
//! The format is one `key = value` pair per line, `#` comments; every CLI
//! flag maps onto the same keys, so a run is reproducible from either a
//! fixture file, the command line, or a mix (flags win).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    Sample,
    Fsum,
    Fk,
    Hoc,
    Embed,
    Regress,
    Lra,
    Congest,
    Sweep,
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sample" => Ok(Self::Sample),
            "fsum" => Ok(Self::Fsum),
            "fk" => Ok(Self::Fk),
            "hoc" => Ok(Self::Hoc),
            "embed" => Ok(Self::Embed),
            "regress" => Ok(Self::Regress),
            "lra" => Ok(Self::Lra),
            "congest" => Ok(Self::Congest),
            "sweep" => Ok(Self::Sweep),
            other => Err(format!("unknown protocol '{other}'")),
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Sample => "sample",
            Self::Fsum => "fsum",
            Self::Fk => "fk",
            Self::Hoc => "hoc",
            Self::Embed => "embed",
            Self::Regress => "regress",
            Self::Lra => "lra",
            Self::Congest => "congest",
            Self::Sweep => "sweep",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    RandomUniform,
    RandomGaussian,
    File,
}

impl FromStr for Generator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" | "random-uniform" => Ok(Self::RandomUniform),
            "random-gaussian" => Ok(Self::RandomGaussian),
            "file" => Ok(Self::File),
            other => Err(format!("unknown generator '{other}'")),
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub servers: usize,
    pub d: usize,
    pub k: f64,
    pub p: f64,
    pub eps: f64,
    pub delta: f64,
    /// Propagation radius for congest runs.
    pub delta_rounds: u32,
    /// Merge budget; 0 means "delta_rounds + 1".
    pub t: u32,
    pub fn_spec: String,
    pub g_spec: String,
    pub generator: Generator,
    pub seed: u64,
    pub trials: u32,
    pub jobs: usize,
    pub csv_out: Option<String>,
    pub json_out: Option<String>,
    pub sample_const: f64,
    pub sketch_const: f64,
    pub heavy_c: f64,
    /// Compute brute-force ground truth even for file inputs.
    pub truth: bool,
    /// Dataset / instance files for generator = file.
    pub files: Vec<String>,
    pub graph_file: Option<String>,
    pub manifest_file: Option<String>,
    pub out_dir: Option<String>,
    /// Server counts for the sweep protocol.
    pub sweep_servers: Vec<usize>,
    /// Use the PRG-backed exponential variates in fsum/fk.
    pub prg: bool,
    /// Raw little-endian seed-material file folded into PRG-backed runs.
    pub prg_seed_file: Option<String>,
    /// Grid dimensions for synthetic congest topologies.
    pub grid: (usize, usize),
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            protocol: ProtocolKind::Fk,
            n: 256,
            servers: 4,
            d: 8,
            k: 2.0,
            p: 2.0,
            eps: 0.2,
            delta: 0.01,
            delta_rounds: 2,
            t: 0,
            fn_spec: String::new(),
            g_spec: "product".into(),
            generator: Generator::RandomUniform,
            seed: 1,
            trials: 10,
            jobs: 1,
            csv_out: None,
            json_out: None,
            sample_const: 1.0,
            sketch_const: 1.0,
            heavy_c: 4.0,
            truth: false,
            files: Vec::new(),
            graph_file: None,
            manifest_file: None,
            out_dir: None,
            sweep_servers: vec![4, 8, 16],
            prg: false,
            prg_seed_file: None,
            grid: (5, 5),
        }
    }
}

/// Seeds are accepted in decimal or 0x-hex.
pub fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).map_err(|e| format!("bad hex seed '{s}': {e}"))
    } else {
        s.parse().map_err(|e| format!("bad seed '{s}': {e}"))
    }
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, Vec<String>> {
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
            None => errors.push(format!("line {}: expected key = value", idx + 1)),
        }
    }
    if errors.is_empty() {
        Ok(map)
    } else {
        Err(errors)
    }
}

/// Apply `key = value` pairs onto a config, collecting all violations.
pub fn apply_pairs(
    cfg: &mut ExperimentConfig,
    pairs: &BTreeMap<String, String>,
) -> Result<(), Vec<String>> {
    let mut errors = Vec::new();
    macro_rules! set {
        ($key:expr, $slot:expr, $parse:expr) => {
            if let Some(raw) = pairs.get($key) {
                match $parse(raw.as_str()) {
                    Ok(v) => $slot = v,
                    Err(e) => errors.push(format!("{}: {}", $key, e)),
                }
            }
        };
    }
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| e.to_string());
    let parse_u32 = |s: &str| s.parse::<u32>().map_err(|e| e.to_string());
    let parse_f64 = |s: &str| s.parse::<f64>().map_err(|e| e.to_string());
    let parse_bool = |s: &str| match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("expected true/false, got '{other}'")),
    };

    set!("protocol", cfg.protocol, ProtocolKind::from_str);
    set!("n", cfg.n, parse_usize);
    set!("servers", cfg.servers, parse_usize);
    set!("d", cfg.d, parse_usize);
    set!("k", cfg.k, parse_f64);
    set!("p", cfg.p, parse_f64);
    set!("eps", cfg.eps, parse_f64);
    set!("delta", cfg.delta, parse_f64);
    set!("delta-rounds", cfg.delta_rounds, parse_u32);
    set!("t", cfg.t, parse_u32);
    set!("seed", cfg.seed, parse_seed);
    set!("trials", cfg.trials, parse_u32);
    set!("jobs", cfg.jobs, parse_usize);
    set!("sample-const", cfg.sample_const, parse_f64);
    set!("sketch-const", cfg.sketch_const, parse_f64);
    set!("heavy-c", cfg.heavy_c, parse_f64);
    set!("truth", cfg.truth, parse_bool);
    set!("prg", cfg.prg, parse_bool);
    set!("dist", cfg.generator, Generator::from_str);
    set!("generator", cfg.generator, Generator::from_str);
    if let Some(v) = pairs.get("fn") {
        cfg.fn_spec = v.clone();
    }
    if let Some(v) = pairs.get("g") {
        cfg.g_spec = v.clone();
    }
    if let Some(v) = pairs.get("csv") {
        cfg.csv_out = Some(v.clone());
    }
    if let Some(v) = pairs.get("json") {
        cfg.json_out = Some(v.clone());
    }
    if let Some(v) = pairs.get("graph") {
        cfg.graph_file = Some(v.clone());
    }
    if let Some(v) = pairs.get("manifest") {
        cfg.manifest_file = Some(v.clone());
    }
    if let Some(v) = pairs.get("out-dir") {
        cfg.out_dir = Some(v.clone());
    }
    if let Some(v) = pairs.get("prg-seed") {
        cfg.prg_seed_file = Some(v.clone());
    }
    if let Some(v) = pairs.get("files") {
        cfg.files = v.split(',').map(|s| s.trim().to_string()).collect();
    }
    if let Some(v) = pairs.get("sweep-servers") {
        let mut list = Vec::new();
        for part in v.split(',') {
            match part.trim().parse::<usize>() {
                Ok(s) => list.push(s),
                Err(e) => errors.push(format!("sweep-servers: {e}")),
            }
        }
        if !list.is_empty() {
            cfg.sweep_servers = list;
        }
    }
    if let Some(v) = pairs.get("grid") {
        match v.split_once('x') {
            Some((w, h)) => match (w.trim().parse::<usize>(), h.trim().parse::<usize>()) {
                (Ok(w), Ok(h)) if w > 0 && h > 0 => cfg.grid = (w, h),
                _ => errors.push(format!("grid: expected WxH, got '{v}'")),
            },
            None => errors.push(format!("grid: expected WxH, got '{v}'")),
        }
    }
    for key in pairs.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            errors.push(format!("unknown key '{key}'"));
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

const KNOWN_KEYS: &[&str] = &[
    "protocol",
    "n",
    "servers",
    "d",
    "k",
    "p",
    "eps",
    "delta",
    "delta-rounds",
    "t",
    "seed",
    "trials",
    "jobs",
    "sample-const",
    "sketch-const",
    "heavy-c",
    "truth",
    "prg",
    "dist",
    "generator",
    "fn",
    "g",
    "csv",
    "json",
    "graph",
    "manifest",
    "out-dir",
    "prg-seed",
    "files",
    "sweep-servers",
    "grid",
];

/// Semantic validation: every violation reported at once.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), Vec<String>> {
    let mut errors = Vec::new();
    if cfg.n == 0 {
        errors.push("n must be positive".into());
    }
    if cfg.servers == 0 {
        errors.push("servers must be positive".into());
    }
    if !(cfg.eps > 0.0 && cfg.eps < 1.0) {
        errors.push(format!("eps out of range (0, 1): {}", cfg.eps));
    }
    if matches!(cfg.protocol, ProtocolKind::Sample) && cfg.eps >= 0.25 {
        errors.push(format!("eps out of range (0, 1/4) for sample: {}", cfg.eps));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        errors.push(format!("delta out of range (0, 1): {}", cfg.delta));
    }
    if cfg.trials == 0 {
        errors.push("trials must be positive".into());
    }
    if matches!(cfg.protocol, ProtocolKind::Fk | ProtocolKind::Sweep) && cfg.k < 1.0 {
        errors.push(format!("k must be >= 1 for fk, got {}", cfg.k));
    }
    if matches!(cfg.protocol, ProtocolKind::Hoc) {
        let k = cfg.k as usize;
        if cfg.k.fract() != 0.0 || k == 0 || k > cfg.n {
            errors.push(format!("hoc needs integer 1 <= k <= n, got k = {}", cfg.k));
        }
    }
    if matches!(cfg.protocol, ProtocolKind::Lra) {
        let k = cfg.k as usize;
        if cfg.k.fract() != 0.0 || k == 0 || k > cfg.d {
            errors.push(format!("lra needs integer 1 <= k <= d, got k = {}", cfg.k));
        }
    }
    if cfg.p < 1.0 {
        errors.push(format!("p must be >= 1, got {}", cfg.p));
    }
    if matches!(cfg.protocol, ProtocolKind::Congest) {
        let t = effective_budget(cfg);
        if t < cfg.delta_rounds + 1 {
            errors.push(format!(
                "merge budget t = {t} violates the t >= delta + 1 rule for delta = {}",
                cfg.delta_rounds
            ));
        }
        if cfg.delta_rounds >= 1 && cfg.eps >= 1.0 / cfg.delta_rounds as f64 {
            errors.push(format!(
                "eps {} must be below 1/delta = {} for congest",
                cfg.eps,
                1.0 / cfg.delta_rounds as f64
            ));
        }
    }
    if matches!(cfg.generator, Generator::File)
        && cfg.files.is_empty()
        && cfg.graph_file.is_none()
    {
        errors.push("generator = file requires files= or graph=".into());
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

pub fn effective_budget(cfg: &ExperimentConfig) -> u32 {
    if cfg.t == 0 {
        cfg.delta_rounds + 1
    } else {
        cfg.t
    }
}

/// Parse config text, apply it over defaults, and validate.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, Vec<String>> {
    let pairs = parse_kv(text)?;
    let mut cfg = ExperimentConfig::default();
    apply_pairs(&mut cfg, &pairs)?;
    validate(&cfg)?;
    Ok(cfg)
}
