use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// One pass/fail check. Hard gates decide the exit status; soft gates only
/// produce warnings.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub hard: bool,
    pub detail: String,
}

impl Gate {
    pub fn hard(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            hard: true,
            detail: detail.into(),
        }
    }

    pub fn soft(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            hard: false,
            ..Self::hard(name, passed, detail)
        }
    }
}

/// Output of one harness command: named CSV bodies plus gate outcomes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<(String, String)>,
    pub gates: Vec<Gate>,
    pub warnings: Vec<String>,
    /// Replications that errored, as `replication: message`.
    pub failures: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Report {
    pub fn new(command: &str, config_hash: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            config_hash: config_hash.into(),
            seed,
            ..Self::default()
        }
    }

    /// True when every hard gate passed.
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed || !g.hard)
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_str())
    }

    /// One JSON object describing the run; key order is fixed.
    pub fn manifest_line(&self) -> String {
        let files: Vec<_> = self
            .files
            .iter()
            .map(|(n, b)| json!({"name": n, "sha256": sha256_hex(b.as_bytes()), "bytes": b.len()}))
            .collect();
        let gates: Vec<_> = self
            .gates
            .iter()
            .map(|g| json!({"name": g.name, "passed": g.passed, "hard": g.hard, "detail": g.detail}))
            .collect();
        json!({
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "files": files,
            "gates": gates,
            "warnings": self.warnings,
            "failures": self.failures,
            "passed": self.passed(),
        })
        .to_string()
    }

    /// Writes every file into `dir` and appends the manifest line to
    /// `dir/manifest.jsonl`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, body) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            written.push(path);
        }
        let manifest = dir.join("manifest.jsonl");
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(&manifest)?;
        writeln!(f, "{}", self.manifest_line())?;
        written.push(manifest);
        Ok(written)
    }

    /// Human-readable gate listing.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} (config {}, seed {})", self.command, &self.config_hash[..12.min(self.config_hash.len())], self.seed);
        for g in &self.gates {
            let tag = match (g.passed, g.hard) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "WARN",
            };
            let _ = writeln!(out, "  {tag} {}: {}", g.name, g.detail);
        }
        for w in &self.warnings {
            let _ = writeln!(out, "  warning: {w}");
        }
        for f in &self.failures {
            let _ = writeln!(out, "  failed replication {f}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_gates_do_not_fail_report() {
        let mut r = Report::new("x", "abc", 1);
        r.gates.push(Gate::soft("s", false, ""));
        assert!(r.passed());
        r.gates.push(Gate::hard("h", false, ""));
        assert!(!r.passed());
        assert!(r.summary().contains("FAIL h"));
    }

    #[test]
    fn manifest_is_stable() {
        let mut r = Report::new("x", "abc", 1);
        r.files.push(("a.csv".into(), "a,b\n".into()));
        assert_eq!(r.manifest_line(), r.clone().manifest_line());
        assert!(r.manifest_line().contains("\"config_hash\":\"abc\""));
    }
}
