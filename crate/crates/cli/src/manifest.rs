//! Artifact bookkeeping and the run manifest.
//!
//! Every artifact is hashed as it is written. The manifest records the
//! effective config, versions, the artifact hashes and the checks; wall
//! clock times go to a separate runtimes file so the manifest itself is
//! byte-reproducible for a fixed config.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Mode};
use crate::CliError;

/// `manifest_<command>.json`; each command keeps its own manifest so
/// several commands can share an output directory.
pub fn manifest_file(mode: Mode) -> String {
    format!("manifest_{}.json", mode.name())
}

pub fn runtimes_file(mode: Mode) -> String {
    format!("runtimes_{}.json", mode.name())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: &'static str,
    pub config: &'a ExperimentConfig,
    pub artifacts: &'a [Artifact],
    pub checks: &'a [Check],
    pub passed: bool,
}

#[derive(Debug, Serialize)]
struct Runtimes<'a> {
    total_seconds: f64,
    steps: &'a [(String, f64)],
}

/// Collects artifacts, checks and timings for one command.
pub struct Session {
    dir: PathBuf,
    mode: Mode,
    started: Instant,
    artifacts: Vec<Artifact>,
    checks: Vec<Check>,
    steps: Vec<(String, f64)>,
}

impl Session {
    pub fn new(dir: &Path, mode: Mode) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            mode,
            started: Instant::now(),
            artifacts: Vec::new(),
            checks: Vec::new(),
            steps: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push(b'\n');
        self.write(name, &text)
    }

    /// Writes `rows` under `header` as RFC 4180 CSV.
    pub fn write_csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<PathBuf, CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, &bytes)
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    /// Runs `f` and records its wall time under `label`.
    pub fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.steps.push((label.to_string(), t.elapsed().as_secs_f64()));
        out
    }

    pub fn checks(&self) -> &[Check] {
        &self.checks
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Writes the manifest and the runtimes file.
    pub fn finish(self, config: &ExperimentConfig) -> Result<Outcome, CliError> {
        let passed = self.passed();
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            core_version: cfkmer_core::VERSION,
            command: self.mode.name(),
            config,
            artifacts: &self.artifacts,
            checks: &self.checks,
            passed,
        };
        let mut text = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        text.push(b'\n');
        let path = self.dir.join(manifest_file(self.mode));
        fs::write(&path, &text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let runtimes = Runtimes {
            total_seconds: self.started.elapsed().as_secs_f64(),
            steps: &self.steps,
        };
        let text = serde_json::to_vec_pretty(&runtimes).map_err(|e| CliError::Io(e.to_string()))?;
        let rpath = self.dir.join(runtimes_file(self.mode));
        fs::write(&rpath, text).map_err(|e| CliError::Io(format!("{}: {e}", rpath.display())))?;
        Ok(Outcome {
            passed,
            checks: self.checks,
            artifacts: self.artifacts,
            manifest: path,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
    pub manifest: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_and_checks() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Session::new(dir.path(), Mode::VerifyLemmas).unwrap();
        s.write("a.txt", b"abc").unwrap();
        s.write_csv("b.csv", &["x", "y"], [["1", "a,b"]]).unwrap();
        s.check("ok", true, "");
        let out = s.finish(&ExperimentConfig::default()).unwrap();
        assert!(out.passed);
        assert_eq!(
            out.artifacts[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let csv = fs::read_to_string(dir.path().join("b.csv")).unwrap();
        assert_eq!(csv, "x,y\n1,\"a,b\"\n");
        assert!(dir.path().join(runtimes_file(Mode::VerifyLemmas)).exists());
    }
}
