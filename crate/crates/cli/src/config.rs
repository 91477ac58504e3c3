//! Experiment configuration: one TOML file plus command-line overrides.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use cfkmer_core::excursion::MAX_STREAM_K;
use cfkmer_core::kmer::MAX_K;
use cfkmer_core::phylo::paper::{POINT_B, POINT_C};
use cfkmer_core::phylo::{build_paper_trees, parse_newick};
use cfkmer_core::tv::{ClassifierConfig, DEFAULT_CAP_BITS};
use cfkmer_core::{Backend, PaperTreePair, PaperTreeParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    TvExact,
    TvMc,
    AuditReductions,
    VerifyLemmas,
    Excursions,
    CltCheck,
    PlotData,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::TvExact => "tv-exact",
            Mode::TvMc => "tv-mc",
            Mode::AuditReductions => "audit-reductions",
            Mode::VerifyLemmas => "verify-lemmas",
            Mode::Excursions => "excursions",
            Mode::CltCheck => "clt-check",
            Mode::PlotData => "plot-data",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Must match the subcommand when given.
    pub mode: Option<Mode>,
    pub seed: u64,
    /// `None` picks rationals for small `m` and floats above.
    pub backend: Option<Backend>,
    pub tree: TreeConfig,
    pub model: ModelConfig,
    pub samples: SampleConfig,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
    pub tv: TvConfig,
    pub classifier: ClassifierConfig,
    pub plot: PlotConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: None,
            seed: 0,
            backend: None,
            tree: TreeConfig::default(),
            model: ModelConfig::default(),
            samples: SampleConfig::default(),
            output: OutputConfig::default(),
            verify: VerifyConfig::default(),
            tv: TvConfig::default(),
            classifier: ClassifierConfig::default(),
            plot: PlotConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeConfig {
    pub h: f64,
    pub s: f64,
    pub g: f64,
    pub a: f64,
    pub n: usize,
    pub x_depth: Option<f64>,
    /// Newick text replacing the built-in first tree. Internal nodes `Bp`
    /// and `Cp` must be labelled. Requires `newick_t2`.
    pub newick_t1: Option<String>,
    pub newick_t2: Option<String>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        let p = PaperTreeParams::default();
        Self {
            h: p.h,
            s: p.s,
            g: p.g,
            a: p.a,
            n: p.n,
            x_depth: p.x_depth,
            newick_t1: None,
            newick_t2: None,
        }
    }
}

impl TreeConfig {
    pub fn params(&self) -> PaperTreeParams {
        PaperTreeParams {
            h: self.h,
            s: self.s,
            g: self.g,
            a: self.a,
            n: self.n,
            x_depth: self.x_depth,
        }
    }

    pub fn build(&self) -> Result<PaperTreePair, CliError> {
        match (&self.newick_t1, &self.newick_t2) {
            (None, None) => build_paper_trees(self.params()).map_err(|e| CliError::Config(format!("tree: {e}"))),
            (Some(a), Some(b)) => {
                let pair = PaperTreePair {
                    t1: parse_tree("tree.newick_t1", a)?,
                    t2: parse_tree("tree.newick_t2", b)?,
                    params: self.params(),
                };
                check_labels(&pair)?;
                Ok(pair)
            }
            _ => Err(CliError::Config(
                "tree: newick_t1 and newick_t2 must be given together".into(),
            )),
        }
    }
}

fn parse_tree(key: &str, text: &str) -> Result<cfkmer_core::Tree, CliError> {
    parse_newick(text).map_err(|e| match e.offset() {
        Some(offset) => CliError::Config(format!("{key}: malformed Newick at byte offset {offset}: {e}")),
        None => CliError::Config(format!("{key}: {e}")),
    })
}

fn check_labels(pair: &PaperTreePair) -> Result<(), CliError> {
    let want: BTreeSet<String> = pair.leaf_labels().into_iter().collect();
    for (name, t) in [("newick_t1", &pair.t1), ("newick_t2", &pair.t2)] {
        let got: BTreeSet<String> = t.leaf_labels().into_iter().collect();
        if got != want {
            return Err(CliError::Config(format!(
                "tree.{name}: leaves {got:?} do not match the expected {want:?} (set tree.n to the leaf count)"
            )));
        }
        for p in [POINT_B, POINT_C] {
            t.resolve(p)
                .map_err(|e| CliError::Config(format!("tree.{name}: point {p}: {e}")))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub alpha: f64,
    pub k: usize,
    pub m: Option<usize>,
    /// Inclusive `[lo, hi]`; takes precedence over `m`.
    pub m_range: Option<[usize; 2]>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            k: 1,
            m: None,
            m_range: None,
        }
    }
}

impl ModelConfig {
    /// The sequence lengths to run, defaulting to `default` when neither
    /// `m` nor `m_range` is set.
    pub fn lengths(&self, default: &[usize]) -> Vec<usize> {
        match (self.m_range, self.m) {
            (Some([lo, hi]), _) => (lo..=hi).collect(),
            (None, Some(m)) => vec![m],
            (None, None) => default.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    /// Excursions per tree for moment estimation.
    pub excursions: u64,
    pub bootstrap: usize,
    /// Total simulated replicates for the classifier bound.
    pub mc: usize,
    /// Excursions feeding the lattice local CLT check on `tau`.
    pub local_clt: usize,
    /// Window sums per scale for the projection check.
    pub projection_replicates: usize,
    pub directions: usize,
    pub ells: Vec<usize>,
    /// Raw excursion rows written to CSV per tree.
    pub export_excursions: u64,
    /// Replicates written by `simulate`.
    pub replicates: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            excursions: 1_000_000,
            bootstrap: 1000,
            mc: 100_000,
            local_clt: 10_000_000,
            projection_replicates: 100_000,
            directions: 5,
            ells: vec![16, 64, 256],
            export_excursions: 0,
            replicates: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Exhaustive suites run for every block count `1..=max_mu`.
    pub max_mu: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { max_mu: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TvConfig {
    pub cap_bits: usize,
    /// Smallest accepted ratio between consecutive overlaps.
    pub min_ratio: f64,
    /// Overlap series baseline. Written when missing, compared otherwise.
    pub baseline: Option<PathBuf>,
    pub baseline_tolerance: f64,
}

impl Default for TvConfig {
    fn default() -> Self {
        Self {
            cap_bits: DEFAULT_CAP_BITS,
            min_ratio: 0.9,
            baseline: None,
            baseline_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotConfig {
    /// Series files to convert; empty means every known series in the
    /// output directory.
    pub inputs: Vec<PathBuf>,
}

impl Default for PlotConfig {
    fn default() -> Self {
        Self { inputs: Vec::new() }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Re-checks every precondition the lower layers rely on.
    pub fn validate(&self, mode: Mode) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(m) = self.mode {
            if m != mode {
                return bad(format!("config mode {} does not match command {}", m.name(), mode.name()));
            }
        }
        if mode == Mode::PlotData {
            return Ok(());
        }
        self.tree.build()?;
        let k = self.model.k;
        if !(self.model.alpha.is_finite() && self.model.alpha > 0.0) {
            return bad(format!("model.alpha must be positive, got {}", self.model.alpha));
        }
        if k == 0 || k > MAX_K {
            return bad(format!("model.k must be in 1..={MAX_K}, got {k}"));
        }
        if let Some([lo, hi]) = self.model.m_range {
            if lo == 0 || lo > hi {
                return bad(format!("model.m_range [{lo}, {hi}] must satisfy 1 <= lo <= hi"));
            }
        }
        if self.model.m == Some(0) {
            return bad("model.m must be positive".into());
        }
        match mode {
            Mode::Excursions | Mode::CltCheck if k > MAX_STREAM_K => {
                return bad(format!("excursion streams support k <= {MAX_STREAM_K}, got {k}"));
            }
            Mode::Excursions if self.samples.excursions < 2 => {
                return bad("samples.excursions must be at least 2".into());
            }
            Mode::CltCheck => {
                if self.samples.ells.is_empty() || self.samples.ells.contains(&0) {
                    return bad("samples.ells must be non-empty and positive".into());
                }
                if self.samples.directions == 0 || self.samples.projection_replicates < 2 {
                    return bad("samples.directions and samples.projection_replicates must be positive".into());
                }
            }
            Mode::TvMc if self.samples.mc < 4 => return bad("samples.mc must be at least 4".into()),
            Mode::TvMc if !(self.classifier.hash_bits >= 1 && self.classifier.hash_bits <= 63) => {
                return bad("classifier.hash_bits must be in 1..=63".into());
            }
            Mode::VerifyLemmas if self.verify.max_mu == 0 => return bad("verify.max_mu must be positive".into()),
            _ => {}
        }
        if !(self.tv.min_ratio.is_finite() && self.tv.baseline_tolerance >= 0.0) {
            return bad("tv.min_ratio and tv.baseline_tolerance must be finite and non-negative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let c = ExperimentConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml("sed = 3").is_err());
        assert!(ExperimentConfig::from_toml("[model]\nkk = 2").is_err());
    }

    #[test]
    fn lengths() {
        let mut m = ModelConfig::default();
        assert_eq!(m.lengths(&[4]), vec![4]);
        m.m = Some(7);
        assert_eq!(m.lengths(&[4]), vec![7]);
        m.m_range = Some([4, 6]);
        assert_eq!(m.lengths(&[4]), vec![4, 5, 6]);
    }

    #[test]
    fn mode_mismatch() {
        let c = ExperimentConfig::from_toml("mode = \"tv-mc\"").unwrap();
        assert!(c.validate(Mode::TvExact).is_err());
        assert!(c.validate(Mode::TvMc).is_ok());
    }

    #[test]
    fn newick_offset_reported() {
        let c = ExperimentConfig::from_toml("[tree]\nnewick_t1 = \"((A:1,B:1\"\nnewick_t2 = \"(A:1);\"").unwrap();
        let msg = c.validate(Mode::TvExact).unwrap_err().to_string();
        assert!(msg.contains("byte offset"), "{msg}");
    }
}
