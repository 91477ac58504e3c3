use cfkmer_core::cf_sim::flip_probability;
use cfkmer_core::{build_paper_trees, simulate_marked, PaperTreeParams, SimulationConfig};

const SITES: usize = 200_000;

#[test]
fn mismatch_rates_track_distances() {
    let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
    let points = ["A", "B", "C", "Bp", "Cp"];
    let seqs = simulate_marked(&pair.t1, &points, &SimulationConfig::new(1.0, SITES, 3)).unwrap();
    for (i, u) in points.iter().enumerate() {
        let ones = seqs[i].count_ones() as f64;
        let z = (ones - SITES as f64 / 2.0) / (SITES as f64 / 4.0).sqrt();
        assert!(z.abs() < 5.0, "{u}: {ones} ones");
        for (j, v) in points.iter().enumerate().skip(i + 1) {
            let p = flip_probability(1.0, pair.t1.dist(u, v).unwrap()).unwrap();
            let diff = seqs[i].iter().zip(seqs[j].iter()).filter(|(a, b)| a != b).count() as f64;
            let z = (diff - SITES as f64 * p) / (SITES as f64 * p * (1.0 - p)).sqrt();
            assert!(z.abs() < 5.0, "{u}-{v}: {diff} mismatches, rate {p}");
        }
    }
}

#[test]
fn seeds_and_replicates_control_output() {
    let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
    let cfg = SimulationConfig::new(1.0, 5_000, 9);
    let a = simulate_marked(&pair.t2, &["A", "B"], &cfg).unwrap();
    let b = simulate_marked(&pair.t2, &["A", "B"], &cfg).unwrap();
    assert_eq!(a, b);
    let c = simulate_marked(&pair.t2, &["A", "B"], &cfg.with_replicate(1)).unwrap();
    assert_ne!(a, c);
    let d = simulate_marked(&pair.t2, &["A", "B"], &SimulationConfig::new(1.0, 5_000, 10)).unwrap();
    assert_ne!(a, d);
}

#[test]
fn bad_inputs_rejected() {
    let pair = build_paper_trees(PaperTreeParams::default()).unwrap();
    assert!(simulate_marked(&pair.t1, &["A", "nowhere"], &SimulationConfig::new(1.0, 10, 0)).is_err());
    assert!(simulate_marked(&pair.t1, &["A"], &SimulationConfig::new(-1.0, 10, 0)).is_err());
}
