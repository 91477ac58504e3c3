use cfkmer_core::cf_sim::flip_probability;
use cfkmer_core::phylo::paper::TRIPLE_POINTS;
use cfkmer_core::phylo::site_column_distribution;
use cfkmer_core::{build_paper_trees, PaperTreeParams};

const ALPHA: f64 = 0.7;

#[test]
fn pair_mismatch_is_flip_over_distance() {
    let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
    for tree in [&pair.t1, &pair.t2] {
        let labels: Vec<String> = tree.leaf_labels().into_iter().chain(["Bp".to_string(), "Cp".to_string()]).collect();
        for u in &labels {
            for v in &labels {
                if u == v {
                    continue;
                }
                let law = site_column_distribution(tree, &[u, v], ALPHA).unwrap();
                let want = flip_probability(ALPHA, tree.dist(u, v).unwrap()).unwrap();
                assert!((law.prob(0b01) + law.prob(0b10) - want).abs() < 1e-13, "{u}-{v}");
            }
        }
    }
}

#[test]
fn laws_are_normalised_and_flip_symmetric() {
    let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
    for tree in [&pair.t1, &pair.t2] {
        let mut points: Vec<String> = tree.leaf_labels();
        points.extend(["Bp".to_string(), "Cp".to_string()]);
        let refs: Vec<&str> = points.iter().map(String::as_str).collect();
        let law = site_column_distribution(tree, &refs, ALPHA).unwrap();
        assert!((law.total() - 1.0).abs() < 1e-12);
        assert!(law.flip_asymmetry() < 1e-15);
        for j in 0..refs.len() {
            let one = law.marginal(&[j]);
            assert!((one.prob(0) - 0.5).abs() < 1e-12);
        }
    }
}

#[test]
fn triple_laws_differ_between_trees() {
    let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
    let a = site_column_distribution(&pair.t1, &TRIPLE_POINTS, 1.0).unwrap();
    let b = site_column_distribution(&pair.t2, &TRIPLE_POINTS, 1.0).unwrap();
    let gap = a.probs.iter().zip(&b.probs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap > 1e-3);
}
