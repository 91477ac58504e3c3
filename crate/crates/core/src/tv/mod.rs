//! Exact and Monte Carlo total variation between the laws a statistic has
//! under two trees.

mod audit;
mod enumerate;
mod mc;

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cf_sim::SimError;
use crate::numeric::Scalar;
use crate::phylo::PhyloError;

pub use audit::{
    markov_equality_check, overlap_floor_scan, reduction_chain_audit, Comparison, MarkovReport,
    OverlapRow, OverlapSeries, ReductionAudit,
};
pub use enumerate::{encode_outcome, exact_joint_distribution, exact_tv, StatQuery, DEFAULT_CAP_BITS};
pub use mc::{mc_tv_lower_bound, wilson_interval, ClassifierConfig, McEstimate};

#[derive(Debug, Error)]
pub enum TvError {
    #[error("enumeration needs {bits} bits, above the cap of {cap}")]
    CapExceeded { bits: usize, cap: usize },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("conditioning event has probability zero")]
    NullEvent,
    #[error(transparent)]
    Phylo(#[from] PhyloError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Rational,
    Float,
}

impl Backend {
    /// Rationals up to `m = 6`, floats above.
    pub fn default_for(m: usize) -> Self {
        if m <= 6 {
            Backend::Rational
        } else {
            Backend::Float
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rational" => Ok(Backend::Rational),
            "float" => Ok(Backend::Float),
            other => Err(format!("unknown backend '{other}', expected rational or float")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// The sequences themselves.
    Raw,
    /// Sliding-window k-mer counts.
    Counts,
    /// Counts plus the last `2k` sites.
    CountsWithLast,
    /// First and last block pairs with the full transition table.
    Z,
    /// First and last block pairs, `mu` and the restricted transitions.
    ZPrime,
}

impl Statistic {
    pub fn tag(self) -> u8 {
        match self {
            Statistic::Raw => 0,
            Statistic::Counts => 1,
            Statistic::CountsWithLast => 2,
            Statistic::Z => 3,
            Statistic::ZPrime => 4,
        }
    }
}

/// Law of an encoded outcome; see [`encode_outcome`] for the byte layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution<T> {
    pub outcomes: BTreeMap<Vec<u8>, T>,
}

impl<T: Scalar> FiniteDistribution<T> {
    pub fn new() -> Self {
        Self {
            outcomes: BTreeMap::new(),
        }
    }

    pub fn point_mass(outcome: Vec<u8>) -> Self {
        let mut outcomes = BTreeMap::new();
        outcomes.insert(outcome, T::one());
        Self { outcomes }
    }

    pub fn from_pairs<I: IntoIterator<Item = (Vec<u8>, T)>>(pairs: I) -> Self {
        let mut d = Self::new();
        for (k, v) in pairs {
            d.add(k, v);
        }
        d
    }

    pub fn add(&mut self, outcome: Vec<u8>, p: T) {
        match self.outcomes.get_mut(&outcome) {
            Some(v) => *v = v.add(&p),
            None => {
                self.outcomes.insert(outcome, p);
            }
        }
    }

    pub fn prob(&self, outcome: &[u8]) -> T {
        self.outcomes.get(outcome).cloned().unwrap_or_else(T::zero)
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn total(&self) -> T {
        self.outcomes.values().fold(T::zero(), |acc, v| acc.add(v))
    }

    /// Law of `g(outcome)`.
    pub fn map<F: Fn(&[u8]) -> Vec<u8>>(&self, g: F) -> Self {
        Self::from_pairs(self.outcomes.iter().map(|(k, v)| (g(k), v.clone())))
    }
}

impl<T: Scalar> Default for FiniteDistribution<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// A distance computed in some backend; `exact` is set for rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct TvValue {
    pub value: f64,
    pub exact: Option<BigRational>,
}

impl TvValue {
    /// `self <= other`, exactly when both are exact and within `1e-12`
    /// otherwise.
    pub fn le(&self, other: &TvValue) -> bool {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => a <= b,
            _ => self.value <= other.value + 1e-12,
        }
    }

    pub fn equals(&self, other: &TvValue) -> bool {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => a == b,
            _ => (self.value - other.value).abs() <= 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TVReport {
    /// `1/2 sum |p - q|`.
    pub tv: f64,
    /// `sum min(p, q)`.
    pub overlap: f64,
    /// `1 - overlap`, the second characterization of `tv`.
    pub one_minus_overlap: f64,
    /// Both characterizations agree: exactly for rationals, to `1e-12` for
    /// floats.
    pub characterizations_agree: bool,
    /// Size of `{x : p(x) >= q(x)}`.
    pub witness_size: usize,
    /// `p(B) - q(B)` on the witness set, another route to `tv`.
    pub witness_gap: f64,
    pub outcomes: usize,
    /// Exact value as `num/den` when computed with rationals.
    pub exact: Option<String>,
    #[serde(skip)]
    pub exact_value: Option<BigRational>,
}

impl TVReport {
    pub fn value(&self) -> TvValue {
        TvValue {
            value: self.tv,
            exact: self.exact_value.clone(),
        }
    }

    pub fn overlap_value(&self) -> TvValue {
        TvValue {
            value: self.overlap,
            exact: self.exact_value.as_ref().map(|t| BigRational::from_integer(1.into()) - t),
        }
    }
}

/// Total variation over the union of the two supports.
pub fn tv<T: Scalar + TvExact>(a: &FiniteDistribution<T>, b: &FiniteDistribution<T>) -> TVReport {
    let zero = T::zero();
    let mut abs_sum = T::zero();
    let mut overlap = T::zero();
    let mut gap = T::zero();
    let mut witness_size = 0;
    let mut outcomes = 0;
    let mut visit = |p: &T, q: &T| {
        outcomes += 1;
        if p >= q {
            let d = p.sub(q);
            abs_sum = abs_sum.add(&d);
            gap = gap.add(&d);
            overlap = overlap.add(q);
            witness_size += 1;
        } else {
            abs_sum = abs_sum.add(&q.sub(p));
            overlap = overlap.add(p);
        }
    };
    for (k, p) in &a.outcomes {
        visit(p, b.outcomes.get(k).unwrap_or(&zero));
    }
    for (k, q) in &b.outcomes {
        if !a.outcomes.contains_key(k) {
            visit(&zero, q);
        }
    }
    let half = abs_sum.half();
    let one_minus = T::one().sub(&overlap);
    let characterizations_agree = T::agree(&half, &one_minus);
    let exact_value = T::exact(&half);
    TVReport {
        tv: half.to_f64(),
        overlap: overlap.to_f64(),
        one_minus_overlap: one_minus.to_f64(),
        characterizations_agree,
        witness_size,
        witness_gap: gap.to_f64(),
        outcomes,
        exact: exact_value.as_ref().map(|r| r.to_string()),
        exact_value,
    }
}

/// Backend-specific equality of the two TV characterizations.
pub trait TvExact {
    fn agree(a: &Self, b: &Self) -> bool;
    fn exact(v: &Self) -> Option<BigRational>;
}

impl TvExact for f64 {
    fn agree(a: &Self, b: &Self) -> bool {
        (a - b).abs() <= 1e-12
    }
    fn exact(_: &Self) -> Option<BigRational> {
        None
    }
}

impl TvExact for BigRational {
    fn agree(a: &Self, b: &Self) -> bool {
        a == b
    }
    fn exact(v: &Self) -> Option<BigRational> {
        Some(v.clone())
    }
}
