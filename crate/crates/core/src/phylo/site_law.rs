use serde::Serialize;

use super::tree::{Location, NodeId, Tree};
use super::PhyloError;
use crate::numeric::Scalar;

/// Probability that a site differs between the two ends of an edge of
/// length `t` under flip rate `alpha`: `(1 - exp(-2 alpha t)) / 2`.
pub(crate) fn flip_prob(alpha: f64, t: f64) -> f64 {
    -0.5 * (-2.0 * alpha * t).exp_m1()
}

/// Joint law of one site's states at an ordered list of points.
///
/// Pattern index layout: point `j` of `p` contributes bit `p - 1 - j`, so the
/// first point is the most significant bit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteDistribution {
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
}

impl SiteDistribution {
    pub fn points(&self) -> usize {
        self.labels.len()
    }

    pub fn prob(&self, pattern: usize) -> f64 {
        self.probs[pattern]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Largest gap between a pattern and its complement.
    pub fn flip_asymmetry(&self) -> f64 {
        let mask = self.probs.len() - 1;
        (0..self.probs.len())
            .map(|i| (self.probs[i] - self.probs[i ^ mask]).abs())
            .fold(0.0, f64::max)
    }

    /// Law of the sub-tuple at `keep` (indices into the point list, in the
    /// order given).
    pub fn marginal(&self, keep: &[usize]) -> SiteDistribution {
        let p = self.points();
        let mut probs = vec![0.0; 1 << keep.len()];
        for (pattern, &pr) in self.probs.iter().enumerate() {
            let mut sub = 0;
            for &j in keep {
                sub = (sub << 1) | ((pattern >> (p - 1 - j)) & 1);
            }
            probs[sub] += pr;
        }
        SiteDistribution {
            labels: keep.iter().map(|&j| self.labels[j].clone()).collect(),
            probs,
        }
    }
}

pub fn site_column_distribution(
    tree: &Tree,
    points: &[&str],
    alpha: f64,
) -> Result<SiteDistribution, PhyloError> {
    let probs = site_column_law::<f64>(tree, points, alpha)?;
    Ok(SiteDistribution {
        labels: points.iter().map(|s| s.to_string()).collect(),
        probs,
    })
}

/// Column law in an arbitrary scalar type. Edge flip probabilities are
/// computed in `f64` and converted exactly, so the rational backend is exact
/// relative to those inputs.
pub fn site_column_law<T: Scalar>(
    tree: &Tree,
    points: &[&str],
    alpha: f64,
) -> Result<Vec<T>, PhyloError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(PhyloError::InvalidRate(alpha));
    }
    let locations: Vec<Location> = points
        .iter()
        .map(|l| tree.resolve(l))
        .collect::<Result<_, _>>()?;
    let (work, ids) = tree.materialize(&locations);
    let order = work.preorder();
    let flips: Vec<T> = work
        .nodes()
        .iter()
        .map(|n| T::from_f64(flip_prob(alpha, n.length)))
        .collect();
    let p = points.len();
    let mut out = Vec::with_capacity(1 << p);
    let mut evidence: Vec<Option<u8>> = vec![None; work.len()];
    let mut partial: Vec<[T; 2]> = vec![[T::zero(), T::zero()]; work.len()];
    for pattern in 0..(1usize << p) {
        evidence.iter_mut().for_each(|e| *e = None);
        let mut conflict = false;
        for (j, &id) in ids.iter().enumerate() {
            let bit = ((pattern >> (p - 1 - j)) & 1) as u8;
            match evidence[id] {
                Some(b) if b != bit => conflict = true,
                _ => evidence[id] = Some(bit),
            }
        }
        if conflict {
            out.push(T::zero());
            continue;
        }
        for &v in order.iter().rev() {
            let mut lik = [T::one(), T::one()];
            for &c in &work.nodes()[v].children {
                let pc = &flips[c];
                let stay = T::one().sub(pc);
                for (s, l) in lik.iter_mut().enumerate() {
                    let same = &partial[c][s];
                    let other = &partial[c][1 - s];
                    *l = l.mul(&stay.mul(same).add(&pc.mul(other)));
                }
            }
            if let Some(b) = evidence[v] {
                lik[1 - b as usize] = T::zero();
            }
            partial[v] = lik;
        }
        let root = &partial[work.root()];
        out.push(root[0].add(&root[1]).half());
    }
    Ok(out)
}

/// Node ids of the materialised tree; exposed for simulation.
pub(crate) fn materialized_points(
    tree: &Tree,
    points: &[&str],
) -> Result<(Tree, Vec<NodeId>), PhyloError> {
    let locations: Vec<Location> = points
        .iter()
        .map(|l| tree.resolve(l))
        .collect::<Result<_, _>>()?;
    Ok(tree.materialize(&locations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phylo::newick::parse_newick;
    use num_rational::BigRational;

    /// Brute-force oracle: enumerate every state assignment of every node.
    fn brute_force(tree: &Tree, points: &[&str], alpha: f64) -> Vec<f64> {
        let locs: Vec<Location> = points.iter().map(|l| tree.resolve(l).unwrap()).collect();
        let (t, ids) = tree.materialize(&locs);
        let n = t.len();
        let p = points.len();
        let mut out = vec![0.0; 1 << p];
        for states in 0u64..(1 << n) {
            let s = |v: usize| ((states >> v) & 1) as usize;
            let mut w = 0.5;
            for v in 0..n {
                if let Some(par) = t.nodes()[v].parent {
                    let q = flip_prob(alpha, t.nodes()[v].length);
                    w *= if s(v) == s(par) { 1.0 - q } else { q };
                }
            }
            let mut pattern = 0;
            for &id in &ids {
                pattern = (pattern << 1) | s(id);
            }
            out[pattern] += w;
        }
        out
    }

    #[test]
    fn single_leaf_is_uniform() {
        let t = parse_newick("(A:3.7,B:0.1);").unwrap();
        let d = site_column_distribution(&t, &["A"], 1.3).unwrap();
        assert!((d.probs[0] - 0.5).abs() < 1e-15 && (d.probs[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn root_leaf_disagreement_quarter() {
        let t = 0.5 * std::f64::consts::LN_2;
        let tree = parse_newick(&format!("(A:{t})R;")).unwrap();
        let d = site_column_distribution(&tree, &["R", "A"], 1.0).unwrap();
        assert!((d.probs[0b01] + d.probs[0b10] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_with_edge_points() {
        let mut t = parse_newick("((A:0.5,C:0.3)X:0.5,(B:1.0,D:0.2)Y:0.1)R;").unwrap();
        let a = t.node_by_label("A").unwrap();
        t.mark_point("P", Location::Edge { child: a, offset: 0.1 }).unwrap();
        let pts = ["P", "C", "Y", "D"];
        let d = site_column_distribution(&t, &pts, 0.7).unwrap();
        let want = brute_force(&t, &pts, 0.7);
        for (x, y) in d.probs.iter().zip(&want) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!((d.total() - 1.0).abs() < 1e-12);
        assert!(d.flip_asymmetry() < 1e-15);
    }

    #[test]
    fn repeated_point_is_consistent() {
        let t = parse_newick("(A:0.5,B:0.5)R;").unwrap();
        let d = site_column_distribution(&t, &["A", "A"], 1.0).unwrap();
        assert_eq!(d.probs[0b01], 0.0);
        assert_eq!(d.probs[0b10], 0.0);
        assert!((d.probs[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rational_law_sums_to_one_exactly() {
        let t = parse_newick("((A:0.5,C:0.3)X:0.5,B:1.0)R;").unwrap();
        let law = site_column_law::<BigRational>(&t, &["A", "B", "C"], 1.0).unwrap();
        let total = law.iter().fold(<BigRational as Scalar>::zero(), |acc, x| acc + x);
        assert_eq!(total, <BigRational as Scalar>::one());
        let float = site_column_law::<f64>(&t, &["A", "B", "C"], 1.0).unwrap();
        for (r, f) in law.iter().zip(&float) {
            assert!((r.to_f64() - f).abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_reorders() {
        let t = parse_newick("((A:0.5,C:0.3)X:0.5,B:1.0)R;").unwrap();
        let d = site_column_distribution(&t, &["A", "B", "C"], 1.0).unwrap();
        let m = d.marginal(&[2, 0]);
        let direct = site_column_distribution(&t, &["C", "A"], 1.0).unwrap();
        for (x, y) in m.probs.iter().zip(&direct.probs) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
