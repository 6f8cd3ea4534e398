//! Flat `key = value` run manifest written next to every output.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};
use strollr::{IterationRecord, SolverConfig};

#[derive(Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `<output>.manifest`, unless an explicit path is given.
pub fn manifest_path(output: &Path, explicit: Option<&Path>) -> PathBuf {
    explicit.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest");
        PathBuf::from(s)
    })
}

impl Manifest {
    pub fn new(subcommand: &str) -> Self {
        let mut m = Manifest::default();
        m.set("subcommand", subcommand);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    #[cfg(test)]
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Records a file path and the SHA-256 of its current contents.
    pub fn file(&mut self, key: &str, path: &Path) {
        self.set(key, path.display());
        if let Ok(bytes) = std::fs::read(path) {
            self.set(&format!("{key}_sha256"), sha256_hex(&bytes));
        }
    }

    pub fn config(&mut self, cfg: &SolverConfig) {
        let g = &cfg.geometry;
        self.set("side", g.side);
        self.set("match_count", g.match_count);
        self.set("depth", g.depth);
        self.set("window", g.window);
        self.set("stride", g.stride);
        self.set("boundary", format!("{:?}", g.boundary).to_lowercase());
        self.set("iterations", cfg.iterations);
        self.set("gamma_fidelity", cfg.gamma_fidelity);
        self.set("gamma_sparse", cfg.gamma_sparse);
        self.set("gamma_low_rank", cfg.gamma_low_rank);
        self.set("lambda", cfg.lambda.map_or("schedule".to_string(), |v| v.to_string()));
        self.set("theta", cfg.theta.map_or("schedule".to_string(), |v| v.to_string()));
        self.set("threads", cfg.threads.map_or("auto".to_string(), |v| v.to_string()));
        self.set("deterministic", cfg.deterministic);
        self.set("seed", cfg.seed);
    }

    /// Per-step wall time summed over iterations, plus the final thresholds.
    pub fn records(&mut self, records: &[IterationRecord]) {
        let total =
            |f: fn(&IterationRecord) -> Duration| -> f64 { records.iter().map(f).sum::<Duration>().as_secs_f64() };
        self.set(
            "time_block_matching_s",
            format!("{:.3}", total(|r| r.times.block_matching)),
        );
        self.set("time_low_rank_s", format!("{:.3}", total(|r| r.times.low_rank)));
        self.set(
            "time_sparse_coding_s",
            format!("{:.3}", total(|r| r.times.sparse_coding)),
        );
        self.set("time_transform_s", format!("{:.3}", total(|r| r.times.transform)));
        self.set("time_image_s", format!("{:.3}", total(|r| r.times.image)));
        if let Some(last) = records.last() {
            self.set("final_lambda", last.thresholds.lambda);
            self.set("final_theta", last.thresholds.theta);
        }
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }
}
