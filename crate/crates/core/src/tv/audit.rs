use serde::Serialize;

use super::enumerate::{exact_tv, StatQuery};
use super::{Backend, Statistic, TVReport, TvError, TvValue};
use crate::cf_sim::event_e_probability;
use crate::phylo::paper::{LEAF_A, LEAF_B, LEAF_C, POINT_B, POINT_C, TRIPLE_POINTS};
use crate::phylo::PaperTreePair;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub name: String,
    pub lhs: f64,
    pub relation: &'static str,
    pub rhs: f64,
    pub holds: bool,
}

impl Comparison {
    fn le(name: &str, lhs: &TvValue, rhs: &TvValue) -> Self {
        Self {
            name: name.to_string(),
            lhs: lhs.value,
            relation: "<=",
            rhs: rhs.value,
            holds: lhs.le(rhs),
        }
    }

    fn eq(name: &str, lhs: &TvValue, rhs: &TvValue) -> Self {
        Self {
            name: name.to_string(),
            lhs: lhs.value,
            relation: "=",
            rhs: rhs.value,
            holds: lhs.equals(rhs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionAudit {
    pub k: usize,
    pub m: usize,
    /// `m` rounded up to a multiple of `k`; block statistics use this length.
    pub block_m: usize,
    pub backend: Backend,
    pub tv_leaf_counts: TVReport,
    pub tv_triple_counts: TVReport,
    pub tv_hat_f: TVReport,
    pub tv_z: TVReport,
    pub tv_zprime: TVReport,
    pub tv_zprime_conditioned: TVReport,
    /// Probability of the all-zero start under each tree.
    pub event_probability: [f64; 2],
    /// The chain of reductions from the leaves down to `Z'`.
    pub chain: Vec<Comparison>,
    /// Coarser statistic against the finer one it is a function of.
    pub data_processing: Vec<Comparison>,
}

impl ReductionAudit {
    pub fn passed(&self) -> bool {
        self.chain.iter().chain(&self.data_processing).all(|c| c.holds)
    }

    pub fn failures(&self) -> Vec<&Comparison> {
        self.chain.iter().chain(&self.data_processing).filter(|c| !c.holds).collect()
    }
}

/// Computes every distance in the reduction from leaf counts to the
/// restricted transition statistic and checks each step.
pub fn reduction_chain_audit(
    pair: &PaperTreePair,
    k: usize,
    m: usize,
    alpha: f64,
    backend: Backend,
    cap: usize,
) -> Result<ReductionAudit, TvError> {
    let block_m = m.div_ceil(k) * k;
    let leaves = pair.leaf_labels();
    let leaves: Vec<&str> = leaves.iter().map(String::as_str).collect();
    let run = |points: &[&str], stat: Statistic, len: usize, conditioned: bool| {
        let mut q = StatQuery::new(stat, len, k);
        q.conditioned = conditioned;
        exact_tv(&pair.t1, &pair.t2, points, q, alpha, backend, cap)
    };
    let leaf_raw = run(&leaves, Statistic::Raw, m, false)?;
    let tv_leaf_counts = run(&leaves, Statistic::Counts, m, false)?;
    let tv_triple_counts = run(&TRIPLE_POINTS, Statistic::Counts, m, false)?;
    let block_counts = if block_m == m {
        tv_triple_counts.clone()
    } else {
        run(&TRIPLE_POINTS, Statistic::Counts, block_m, false)?
    };
    let triple_raw = run(&TRIPLE_POINTS, Statistic::Raw, block_m, false)?;
    let tv_hat_f = run(&TRIPLE_POINTS, Statistic::CountsWithLast, block_m, false)?;
    let tv_z = run(&TRIPLE_POINTS, Statistic::Z, block_m, false)?;
    let tv_zprime = run(&TRIPLE_POINTS, Statistic::ZPrime, block_m, false)?;
    let tv_zprime_conditioned = run(&TRIPLE_POINTS, Statistic::ZPrime, block_m, true)?;

    let event_probability = [
        event_e_probability(&pair.t1, k, alpha)?,
        event_e_probability(&pair.t2, k, alpha)?,
    ];
    let c1 = event_probability[0].min(event_probability[1]);
    let scaled = TvValue {
        value: c1 * tv_zprime_conditioned.overlap,
        exact: None,
    };
    let unconditioned = TvValue {
        value: tv_zprime.overlap,
        exact: None,
    };

    let chain = vec![
        Comparison::le("leaf counts <= counts at A, Bp, Cp", &tv_leaf_counts.value(), &tv_triple_counts.value()),
        Comparison::le(
            "counts at length m <= counts with last 2k sites at the next multiple of k",
            &tv_triple_counts.value(),
            &tv_hat_f.value(),
        ),
        Comparison::le("counts with last 2k sites <= Z", &tv_hat_f.value(), &tv_z.value()),
        Comparison::le("Z <= Z'", &tv_z.value(), &tv_zprime.value()),
        Comparison::eq("Z = Z'", &tv_z.value(), &tv_zprime.value()),
        Comparison::le(
            "c1 * overlap of Z' given the all-zero start <= overlap of Z'",
            &scaled,
            &unconditioned,
        ),
    ];
    let data_processing = vec![
        Comparison::le("leaf counts <= leaf sequences", &tv_leaf_counts.value(), &leaf_raw.value()),
        Comparison::le("Z <= sequences at A, Bp, Cp", &tv_z.value(), &triple_raw.value()),
        Comparison::le("counts with last 2k sites <= Z", &tv_hat_f.value(), &tv_z.value()),
        Comparison::le("counts <= counts with last 2k sites", &block_counts.value(), &tv_hat_f.value()),
        Comparison::le("Z <= Z'", &tv_z.value(), &tv_zprime.value()),
        Comparison::le("Z' <= Z", &tv_zprime.value(), &tv_z.value()),
    ];
    Ok(ReductionAudit {
        k,
        m,
        block_m,
        backend,
        tv_leaf_counts,
        tv_triple_counts,
        tv_hat_f,
        tv_z,
        tv_zprime,
        tv_zprime_conditioned,
        event_probability,
        chain,
        data_processing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovReport {
    pub m: usize,
    pub k: usize,
    pub backend: Backend,
    /// Counts at the X leaves, C, B, Bp, Cp and A.
    pub tv_full: TVReport,
    /// Counts at Bp, Cp and A.
    pub tv_reduced: TVReport,
    /// Counts at the X leaves, C and B: equal laws are a hypothesis.
    pub tv_outer: TVReport,
    /// Counts at the X leaves, C, B, Bp and Cp: equal laws are a hypothesis.
    pub tv_outer_and_middle: TVReport,
    pub equality: Comparison,
}

impl MarkovReport {
    pub fn hypotheses_hold(&self) -> bool {
        self.tv_outer.value().equals(&zero()) && self.tv_outer_and_middle.value().equals(&zero())
    }

    pub fn passed(&self) -> bool {
        self.hypotheses_hold() && self.equality.holds
    }
}

fn zero() -> TvValue {
    TvValue {
        value: 0.0,
        exact: Some(num_rational::BigRational::from_integer(0.into())),
    }
}

/// Checks that dropping the outer counts does not change the distance when
/// they reach A only through Bp and Cp.
pub fn markov_equality_check(
    pair: &PaperTreePair,
    m: usize,
    k: usize,
    alpha: f64,
    backend: Backend,
    cap: usize,
) -> Result<MarkovReport, TvError> {
    let xs = pair.x_labels();
    let mut outer: Vec<&str> = xs.iter().map(String::as_str).collect();
    outer.extend([LEAF_C, LEAF_B]);
    let mut middle = outer.clone();
    middle.extend([POINT_B, POINT_C]);
    let mut full = middle.clone();
    full.push(LEAF_A);
    let reduced = [POINT_B, POINT_C, LEAF_A];
    let q = StatQuery::new(Statistic::Counts, m, k);
    let run = |points: &[&str]| exact_tv(&pair.t1, &pair.t2, points, q, alpha, backend, cap);
    let tv_full = run(&full)?;
    let tv_reduced = run(&reduced)?;
    let equality = Comparison::eq(
        "counts at all points = counts at Bp, Cp, A",
        &tv_full.value(),
        &tv_reduced.value(),
    );
    Ok(MarkovReport {
        m,
        k,
        backend,
        tv_outer: run(&outer)?,
        tv_outer_and_middle: run(&middle)?,
        tv_full,
        tv_reduced,
        equality,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapRow {
    pub m: usize,
    pub backend: Backend,
    pub tv: f64,
    pub overlap: f64,
    pub overlap_exact: Option<String>,
    pub witness_size: usize,
    pub characterizations_agree: bool,
    pub outcomes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapSeries {
    pub k: usize,
    pub rows: Vec<OverlapRow>,
    pub min_overlap: f64,
    /// Smallest `overlap(m+1) / overlap(m)` over consecutive rows.
    pub min_ratio: f64,
}

impl OverlapSeries {
    pub fn positive(&self) -> bool {
        self.rows.iter().all(|r| r.overlap > 0.0)
    }

    pub fn non_vanishing(&self, min_ratio: f64) -> bool {
        self.min_ratio >= min_ratio
    }
}

/// Exact overlap of the leaf count laws for each `m`. `backend` of `None`
/// picks [`Backend::default_for`] per `m`.
pub fn overlap_floor_scan(
    pair: &PaperTreePair,
    k: usize,
    alpha: f64,
    ms: &[usize],
    backend: Option<Backend>,
    cap: usize,
) -> Result<OverlapSeries, TvError> {
    let leaves = pair.leaf_labels();
    let leaves: Vec<&str> = leaves.iter().map(String::as_str).collect();
    let mut rows = Vec::with_capacity(ms.len());
    for &m in ms {
        let b = backend.unwrap_or_else(|| Backend::default_for(m));
        let r = exact_tv(&pair.t1, &pair.t2, &leaves, StatQuery::new(Statistic::Counts, m, k), alpha, b, cap)?;
        rows.push(OverlapRow {
            m,
            backend: b,
            tv: r.tv,
            overlap: r.overlap,
            overlap_exact: r.overlap_value().exact.map(|v| v.to_string()),
            witness_size: r.witness_size,
            characterizations_agree: r.characterizations_agree,
            outcomes: r.outcomes,
        });
    }
    let min_overlap = rows.iter().map(|r| r.overlap).fold(f64::INFINITY, f64::min);
    let min_ratio = rows
        .windows(2)
        .map(|w| w[1].overlap / w[0].overlap)
        .fold(f64::INFINITY, f64::min);
    Ok(OverlapSeries {
        k,
        rows,
        min_overlap,
        min_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phylo::{build_paper_trees, PaperTreeParams};

    fn pair() -> PaperTreePair {
        build_paper_trees(PaperTreeParams::default()).unwrap()
    }

    #[test]
    fn below_k_is_a_point_mass() {
        let s = overlap_floor_scan(&pair(), 3, 1.0, &[2], None, 24).unwrap();
        assert_eq!(s.rows[0].overlap_exact.as_deref(), Some("1"));
        assert_eq!(s.rows[0].outcomes, 1);
    }

    #[test]
    fn identical_trees_overlap_fully() {
        let p = pair();
        let same = PaperTreePair::identical(p.t1.clone(), p.params);
        let s = overlap_floor_scan(&same, 1, 1.0, &[2, 3, 4], Some(Backend::Rational), 24).unwrap();
        assert!(s.rows.iter().all(|r| r.overlap_exact.as_deref() == Some("1")));
    }

    #[test]
    fn small_audit_passes() {
        let a = reduction_chain_audit(&pair(), 1, 3, 1.0, Backend::Rational, 24).unwrap();
        assert!(a.passed(), "{:?}", a.failures());
        assert!(a.tv_leaf_counts.tv > 0.0);
    }

    #[test]
    fn audit_rounds_up_to_blocks() {
        let a = reduction_chain_audit(&pair(), 2, 5, 1.0, Backend::Float, 24).unwrap();
        assert_eq!(a.block_m, 6);
        assert!(a.passed(), "{:?}", a.failures());
    }

    #[test]
    fn markov_small() {
        let r = markov_equality_check(&pair(), 2, 1, 1.0, Backend::Rational, 24).unwrap();
        assert!(r.hypotheses_hold());
        assert!(r.passed(), "{:?}", r.equality);
    }
}
