//! The pair of three-taxon trees (plus optional outgroup leaves) whose k-mer
//! laws are compared throughout the crate.
//!
//! Geometry, with `j = h - s - g/2` the depth of the junction J joining the
//! two cherries:
//!
//! ```text
//! root --(j)-- J --(g/2)-- Cp --(s)-- C
//!              |            \--(a)-- A        (T1)
//!              \--(g/2)-- Bp --(s)-- B
//! ```
//!
//! In T2 the pendant A hangs from Bp instead of Cp. Bp and Cp are labelled
//! nodes at depth `h - s`, on the B-C path. Leaves X4..Xn hang off a
//! caterpillar spine that subdivides the root edge.

use serde::{Deserialize, Serialize};

use super::tree::{NodeId, Tree, DIST_TOLERANCE};
use super::PhyloError;

pub const ROOT: &str = "root";
pub const LEAF_A: &str = "A";
pub const LEAF_B: &str = "B";
pub const LEAF_C: &str = "C";
pub const POINT_B: &str = "Bp";
pub const POINT_C: &str = "Cp";

/// The three points at which the reduced statistic is observed, in order.
pub const TRIPLE_POINTS: [&str; 3] = [LEAF_A, POINT_B, POINT_C];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WhichTree {
    T1,
    T2,
}

impl WhichTree {
    pub const BOTH: [WhichTree; 2] = [WhichTree::T1, WhichTree::T2];

    pub fn index(self) -> usize {
        match self {
            WhichTree::T1 => 1,
            WhichTree::T2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PaperTreeParams {
    /// Depth of B and C below the root.
    pub h: f64,
    /// Length from B (resp. C) up to Bp (resp. Cp).
    pub s: f64,
    /// Distance between Bp and Cp.
    pub g: f64,
    /// Pendant length of A.
    pub a: f64,
    /// Number of leaves.
    pub n: usize,
    /// Depth of the X leaves; `None` puts them at depth `h`.
    pub x_depth: Option<f64>,
}

impl Default for PaperTreeParams {
    fn default() -> Self {
        Self {
            h: 1.0,
            s: 0.3,
            g: 0.2,
            a: 0.2,
            n: 3,
            x_depth: None,
        }
    }
}

impl PaperTreeParams {
    pub fn validate(&self) -> Result<(), PhyloError> {
        let Self { h, s, g, a, n, .. } = *self;
        for (name, v) in [("h", h), ("s", s), ("g", g), ("a", a)] {
            if !v.is_finite() {
                return Err(PhyloError::Constraint(format!("{name} must be finite")));
            }
        }
        if s <= 0.0 {
            return Err(PhyloError::Constraint("0 < s".into()));
        }
        if g <= 0.0 {
            return Err(PhyloError::Constraint("0 < g".into()));
        }
        if a <= 0.0 {
            return Err(PhyloError::Constraint("0 < a".into()));
        }
        if a >= s + g {
            return Err(PhyloError::Constraint(format!(
                "a < s + g (a = {a}, s + g = {}): dist(A,C) would be >= dist(B,C)",
                s + g
            )));
        }
        if s + g > h {
            return Err(PhyloError::Constraint(format!(
                "s + g <= h (s + g = {}, h = {h})",
                s + g
            )));
        }
        if n < 3 {
            return Err(PhyloError::Constraint(format!("n >= 3 (n = {n})")));
        }
        if let Some(x) = self.x_depth {
            let junction = h - s - g / 2.0;
            if !(x.is_finite() && x > junction) {
                return Err(PhyloError::Constraint(format!(
                    "x_depth > depth of MRCA(A,B,C) (x_depth = {x}, MRCA depth = {junction})"
                )));
            }
        }
        Ok(())
    }

    pub fn junction_depth(&self) -> f64 {
        self.h - self.s - self.g / 2.0
    }
}

#[derive(Debug, Clone)]
pub struct PaperTreePair {
    pub t1: Tree,
    pub t2: Tree,
    pub params: PaperTreeParams,
}

impl PaperTreePair {
    pub fn tree(&self, which: WhichTree) -> &Tree {
        match which {
            WhichTree::T1 => &self.t1,
            WhichTree::T2 => &self.t2,
        }
    }

    /// Pair whose two trees are the same tree; used for identity checks.
    pub fn identical(tree: Tree, params: PaperTreeParams) -> Self {
        Self {
            t1: tree.clone(),
            t2: tree,
            params,
        }
    }

    pub fn x_labels(&self) -> Vec<String> {
        (4..=self.params.n).map(|i| format!("X{i}")).collect()
    }

    pub fn leaf_labels(&self) -> Vec<String> {
        let mut out = vec![LEAF_A.to_string(), LEAF_B.to_string(), LEAF_C.to_string()];
        out.extend(self.x_labels());
        out
    }
}

pub fn build_paper_trees(params: PaperTreeParams) -> Result<PaperTreePair, PhyloError> {
    params.validate()?;
    Ok(PaperTreePair {
        t1: build_one(&params, WhichTree::T1)?,
        t2: build_one(&params, WhichTree::T2)?,
        params,
    })
}

fn build_one(p: &PaperTreeParams, which: WhichTree) -> Result<Tree, PhyloError> {
    let mut t = Tree::new(Some(ROOT));
    let junction = p.junction_depth();
    let extra = p.n - 3;
    let mut attach: NodeId = t.root();
    if extra > 0 {
        let x_depth = p.x_depth.unwrap_or(p.h);
        let step = junction / extra as f64;
        for i in 0..extra {
            let depth = step * i as f64;
            t.add_child(attach, Some(&format!("X{}", i + 4)), x_depth - depth)?;
            if i + 1 < extra {
                attach = t.add_child(attach, None, step)?;
            }
        }
        let j = t.add_child(attach, Some("J"), step)?;
        attach_cherries(&mut t, j, p, which)?;
    } else {
        let j = t.add_child(attach, Some("J"), junction)?;
        attach_cherries(&mut t, j, p, which)?;
    }
    Ok(t)
}

fn attach_cherries(
    t: &mut Tree,
    j: NodeId,
    p: &PaperTreeParams,
    which: WhichTree,
) -> Result<(), PhyloError> {
    let cp = t.add_child(j, Some(POINT_C), p.g / 2.0)?;
    let bp = t.add_child(j, Some(POINT_B), p.g / 2.0)?;
    t.add_child(cp, Some(LEAF_C), p.s)?;
    t.add_child(bp, Some(LEAF_B), p.s)?;
    let host = match which {
        WhichTree::T1 => cp,
        WhichTree::T2 => bp,
    };
    t.add_child(host, Some(LEAF_A), p.a)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(ConstraintCheck {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= DIST_TOLERANCE
}

/// Re-measures every defining property of the pair. Label lookups that fail
/// are reported as failed checks.
pub fn validate_paper_constraints(pair: &PaperTreePair) -> ConstraintReport {
    let mut r = ConstraintReport::default();
    let d = |t: &Tree, u: &str, v: &str| t.dist(u, v).unwrap_or(f64::NAN);

    for which in WhichTree::BOTH {
        let t = pair.tree(which);
        let i = which.index();
        let rb = d(t, ROOT, LEAF_B);
        let rc = d(t, ROOT, LEAF_C);
        r.push(
            &format!("T{i}: dist(root,B) = dist(root,C)"),
            close(rb, rc),
            format!("{rb} vs {rc}"),
        );
        let rbp = d(t, ROOT, POINT_B);
        let rcp = d(t, ROOT, POINT_C);
        r.push(
            &format!("T{i}: dist(root,Bp) = dist(root,Cp)"),
            close(rbp, rcp),
            format!("{rbp} vs {rcp}"),
        );
        let bc = d(t, LEAF_B, LEAF_C);
        let on_path = d(t, LEAF_B, POINT_B) + d(t, POINT_B, POINT_C) + d(t, POINT_C, LEAF_C);
        r.push(
            &format!("T{i}: Bp and Cp lie on the B-C path"),
            close(on_path, bc),
            format!("B-Bp-Cp-C = {on_path}, B-C = {bc}"),
        );
        let near = match which {
            WhichTree::T1 => d(t, LEAF_A, LEAF_C),
            WhichTree::T2 => d(t, LEAF_A, LEAF_B),
        };
        r.push(
            &format!("T{i}: dist(A, sister) < dist(B,C)"),
            near < bc - DIST_TOLERANCE,
            format!("{near} vs {bc}"),
        );
        let expected = match which {
            WhichTree::T1 => "((A,C),B)",
            WhichTree::T2 => "((A,B),C)",
        };
        let topo = t
            .topology(&[LEAF_A, LEAF_B, LEAF_C])
            .unwrap_or_else(|e| e.to_string());
        r.push(
            &format!("T{i}: topology on {{A,B,C}} is {expected}"),
            topo == expected,
            topo,
        );
        let clade = t
            .mrca(&[LEAF_A, LEAF_B, LEAF_C])
            .map(|m| t.leaves_below(m))
            .unwrap_or_default();
        r.push(
            &format!("T{i}: MRCA(A,B,C) has no other leaves below it"),
            clade == [LEAF_A, LEAF_B, LEAF_C],
            format!("{clade:?}"),
        );
    }

    let ac = d(&pair.t1, LEAF_A, LEAF_C);
    let ab = d(&pair.t2, LEAF_A, LEAF_B);
    r.push(
        "dist_T1(A,C) = dist_T2(A,B)",
        close(ac, ab),
        format!("{ac} vs {ab}"),
    );

    let mut rest: Vec<String> = vec![LEAF_B.to_string(), LEAF_C.to_string()];
    rest.extend(pair.x_labels());
    let rest: Vec<&str> = rest.iter().map(String::as_str).collect();
    let forms: Vec<String> = [&pair.t1, &pair.t2]
        .iter()
        .map(|t| {
            t.restrict(&rest)
                .map(|x| x.canonical_form(Some(9)))
                .unwrap_or_else(|e| e.to_string())
        })
        .collect();
    r.push(
        "restrictions to {B,C,X...} coincide",
        forms[0] == forms[1],
        format!("{} vs {}", forms[0], forms[1]),
    );
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phylo::newick::{parse_newick, to_newick};

    #[test]
    fn default_pair_distances() {
        let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        assert!((pair.t1.dist("A", "C").unwrap() - 0.5).abs() < 1e-12);
        assert!((pair.t1.dist("B", "C").unwrap() - 0.8).abs() < 1e-12);
        assert!((pair.t1.dist("root", "B").unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(pair.t1.dist("root", "root").unwrap(), 0.0);
        let report = validate_paper_constraints(&pair);
        assert!(report.all_passed(), "{report:?}");
    }

    #[test]
    fn rejects_long_pendant() {
        let p = PaperTreeParams {
            a: 0.6,
            ..Default::default()
        };
        match build_paper_trees(p) {
            Err(PhyloError::Constraint(msg)) => assert!(msg.contains("a < s + g")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn topologies() {
        let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        assert_eq!(pair.t1.topology(&["A", "B", "C"]).unwrap(), "((A,C),B)");
        assert_eq!(pair.t2.topology(&["A", "B", "C"]).unwrap(), "((A,B),C)");
    }

    #[test]
    fn outgroup_leaves_sit_above_mrca() {
        for n in 4..8 {
            let p = PaperTreeParams {
                n,
                ..Default::default()
            };
            let pair = build_paper_trees(p).unwrap();
            assert_eq!(pair.t1.leaves().len(), n);
            let report = validate_paper_constraints(&pair);
            assert!(report.all_passed(), "n={n}: {report:?}");
            for x in pair.x_labels() {
                assert!((pair.t1.dist("root", &x).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn perturbed_root_distance_fails() {
        let mut pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        let c = pair.t1.node_by_label("C").unwrap();
        pair.t1.set_length(c, 0.35).unwrap();
        let report = validate_paper_constraints(&pair);
        let failed: Vec<_> = report.failures().map(|c| c.name.clone()).collect();
        assert!(failed.contains(&"T1: dist(root,B) = dist(root,C)".to_string()));
    }

    #[test]
    fn misplaced_pendant_fails_topology() {
        let mut pair = build_paper_trees(PaperTreeParams::default()).unwrap();
        pair.t1 = pair.t2.clone();
        let report = validate_paper_constraints(&pair);
        assert!(report
            .failures()
            .any(|c| c.name == "T1: topology on {A,B,C} is ((A,C),B)"));
    }

    #[test]
    fn newick_round_trip_of_t1() {
        let pair = build_paper_trees(PaperTreeParams {
            n: 5,
            ..Default::default()
        })
        .unwrap();
        let text = to_newick(&pair.t1);
        let back = parse_newick(&text).unwrap();
        assert_eq!(back.canonical_form(Some(12)), pair.t1.canonical_form(Some(12)));
        let labels = ["root", "A", "B", "C", "Bp", "Cp", "X4", "X5"];
        for u in labels {
            for v in labels {
                let a = pair.t1.dist(u, v).unwrap();
                let b = back.dist(u, v).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
