//! `key = value` configuration files and their merge with command-line flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use strollr::SolverConfig;

use crate::CliError;

/// Optional settings from a config file or flags. `None` leaves the preset
/// value in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub iterations: Option<usize>,
    pub side: Option<usize>,
    pub match_count: Option<usize>,
    pub depth: Option<usize>,
    pub window: Option<usize>,
    pub stride: Option<usize>,
    pub gamma_fidelity: Option<f64>,
    pub gamma_sparse: Option<f64>,
    pub gamma_low_rank: Option<f64>,
    pub lambda: Option<f64>,
    pub theta: Option<f64>,
    pub threads: Option<usize>,
    pub deterministic: Option<bool>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub psi: Option<f64>,
    pub theta0: Option<f64>,
}

const KEYS: &[&str] = &[
    "iterations",
    "side",
    "match_count",
    "depth",
    "window",
    "stride",
    "gamma_fidelity",
    "gamma_sparse",
    "gamma_low_rank",
    "lambda",
    "theta",
    "threads",
    "deterministic",
    "seed",
    "delta",
    "psi",
    "theta0",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {value:?}")))
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<Overrides, CliError> {
    let mut seen = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
        let (key, value) = (key.trim().replace('-', "_"), value.trim().to_string());
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!(
                "config line {}: unknown key {key:?}",
                lineno + 1
            )));
        }
        seen.insert(key, value);
    }
    let mut o = Overrides::default();
    for (key, value) in &seen {
        let v = value.as_str();
        match key.as_str() {
            "iterations" => o.iterations = Some(parse(key, v)?),
            "side" => o.side = Some(parse(key, v)?),
            "match_count" => o.match_count = Some(parse(key, v)?),
            "depth" => o.depth = Some(parse(key, v)?),
            "window" => o.window = Some(parse(key, v)?),
            "stride" => o.stride = Some(parse(key, v)?),
            "gamma_fidelity" => o.gamma_fidelity = Some(parse(key, v)?),
            "gamma_sparse" => o.gamma_sparse = Some(parse(key, v)?),
            "gamma_low_rank" => o.gamma_low_rank = Some(parse(key, v)?),
            "lambda" => o.lambda = Some(parse(key, v)?),
            "theta" => o.theta = Some(parse(key, v)?),
            "threads" => o.threads = Some(parse(key, v)?),
            "deterministic" => o.deterministic = Some(parse(key, v)?),
            "seed" => o.seed = Some(parse(key, v)?),
            "delta" => o.delta = Some(parse(key, v)?),
            "psi" => o.psi = Some(parse(key, v)?),
            "theta0" => o.theta0 = Some(parse(key, v)?),
            _ => unreachable!("key checked above"),
        }
    }
    Ok(o)
}

pub fn read_config(path: &Path) -> Result<Overrides, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

impl Overrides {
    /// Fields set in `other` win.
    pub fn merged(self, other: Overrides) -> Overrides {
        Overrides {
            iterations: other.iterations.or(self.iterations),
            side: other.side.or(self.side),
            match_count: other.match_count.or(self.match_count),
            depth: other.depth.or(self.depth),
            window: other.window.or(self.window),
            stride: other.stride.or(self.stride),
            gamma_fidelity: other.gamma_fidelity.or(self.gamma_fidelity),
            gamma_sparse: other.gamma_sparse.or(self.gamma_sparse),
            gamma_low_rank: other.gamma_low_rank.or(self.gamma_low_rank),
            lambda: other.lambda.or(self.lambda),
            theta: other.theta.or(self.theta),
            threads: other.threads.or(self.threads),
            deterministic: other.deterministic.or(self.deterministic),
            seed: other.seed.or(self.seed),
            delta: other.delta.or(self.delta),
            psi: other.psi.or(self.psi),
            theta0: other.theta0.or(self.theta0),
        }
    }

    /// Applies the solver-level fields; backend-specific ones (`delta`,
    /// `psi`, `theta0`) are read by the subcommands.
    pub fn apply(&self, cfg: &mut SolverConfig) {
        let g = &mut cfg.geometry;
        if let Some(v) = self.side {
            g.side = v;
        }
        if let Some(v) = self.match_count {
            g.match_count = v;
        }
        if let Some(v) = self.depth {
            g.depth = v;
        }
        if let Some(v) = self.window {
            g.window = v;
        }
        if let Some(v) = self.stride {
            g.stride = v;
        }
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.gamma_fidelity {
            cfg.gamma_fidelity = v;
        }
        if let Some(v) = self.gamma_sparse {
            cfg.gamma_sparse = v;
        }
        if let Some(v) = self.gamma_low_rank {
            cfg.gamma_low_rank = v;
        }
        if self.lambda.is_some() {
            cfg.lambda = self.lambda;
        }
        if self.theta.is_some() {
            cfg.theta = self.theta;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if let Some(v) = self.deterministic {
            cfg.deterministic = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
    }
}
