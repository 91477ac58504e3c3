//! One function per command. Each writes its artifacts through the session
//! and records the checks that decide the exit status.

use cfkmer_core::cf_sim::SequenceDump;
use cfkmer_core::excursion::{
    block_symmetry, clt_projection_check, compare_means, condition_a_probe, coordinate_labels,
    ellipsoid_diagnostics, lag1_correlation, local_clt_lattice_check, random_unit_directions,
    tail_hazard_check, write_excursions_csv, BootstrapConfig, ExcursionTable,
};
use cfkmer_core::kmer::{
    constraint_matrix, constraint_rank, exhaustive_suites, kmer_count_vector, write_count_vectors_csv,
};
use cfkmer_core::phylo::paper::{POINT_B, POINT_C};
use cfkmer_core::phylo::WhichTree;
use cfkmer_core::tv::{
    markov_equality_check, mc_tv_lower_bound, overlap_floor_scan, reduction_chain_audit, OverlapSeries,
};
use cfkmer_core::{
    simulate_marked, Backend, ExcursionSource, MomentEstimate, PaperTreePair, SimulationConfig,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Mode};
use crate::manifest::Session;
use crate::{plot, CliError};

/// Mean and symmetry comparisons are judged at this many standard errors.
const MEAN_TOLERANCE_SE: f64 = 3.0;
const LAG1_TOLERANCE_SE: f64 = 4.0;
const TAIL_TOLERANCE_SE: f64 = 4.0;
const KS_THRESHOLD: f64 = 0.05;
const MIN_COVERAGE: f64 = 0.99;
const ELLIPSOID_SAMPLES: usize = 10_000;

pub fn execute(mode: Mode, cfg: &ExperimentConfig, s: &mut Session) -> Result<(), CliError> {
    match mode {
        Mode::Simulate => simulate(cfg, s),
        Mode::TvExact => tv_exact(cfg, s),
        Mode::TvMc => tv_mc(cfg, s),
        Mode::AuditReductions => audit_reductions(cfg, s),
        Mode::VerifyLemmas => verify_lemmas(cfg, s),
        Mode::Excursions => excursions(cfg, s),
        Mode::CltCheck => clt_check(cfg, s),
        Mode::PlotData => plot::emit_plot_data(cfg, s),
    }
}

fn tag(w: WhichTree) -> &'static str {
    match w {
        WhichTree::T1 => "t1",
        WhichTree::T2 => "t2",
    }
}

fn simulate(cfg: &ExperimentConfig, s: &mut Session) -> Result<(), CliError> {
    let pair = cfg.tree.build()?;
    let k = cfg.model.k;
    let mut labels = pair.leaf_labels();
    labels.extend([POINT_B.to_string(), POINT_C.to_string()]);
    let points: Vec<&str> = labels.iter().map(String::as_str).collect();
    for m in cfg.model.lengths(&[1000]) {
        let mut bad_totals = 0;
        let mut ones = 0u64;
        for r in 0..cfg.samples.replicates {
            for w in WhichTree::BOTH {
                let sim = SimulationConfig::new(cfg.model.alpha, m, cfg.seed).with_replicate(r);
                let seqs = s.timed("simulate", || simulate_marked(pair.tree(w), &points, &sim))?;
                ones += seqs.iter().map(|q| q.count_ones() as u64).sum::<u64>();
                let mut rows = Vec::with_capacity(seqs.len());
                for (l, q) in labels.iter().zip(&seqs) {
                    let v = kmer_count_vector(q, k)?;
                    let want = (m + 1).saturating_sub(k) as u64;
                    bad_totals += (v.total() != want) as usize;
                    rows.push((l.clone(), v));
                }
                let stem = format!("{}_m{m}_r{r}", tag(w));
                let mut counts = Vec::new();
                write_count_vectors_csv(&mut counts, k, &rows)?;
                s.write(&format!("counts_{stem}.csv"), &counts)?;
                let dump = SequenceDump::new(k as u32, labels.clone(), seqs)?;
                let mut bin = Vec::new();
                dump.write_binary(&mut bin)?;
                let back = SequenceDump::read_binary(bin.as_slice())?;
                s.check(format!("sequence dump round trip {stem}"), back == dump, "");
                s.write(&format!("sequences_{stem}.bin"), &bin)?;
            }
        }
        s.check(
            format!("count vector totals m={m}"),
            bad_totals == 0,
            format!("{bad_totals} vectors with a total other than m - k + 1"),
        );
        // Every site is uniform at every point, so the share of ones is 1/2.
        let n = (m as u64 * cfg.samples.replicates * 2 * points.len() as u64) as f64;
        let z = (ones as f64 / n - 0.5) / (0.25 / n).sqrt();
        s.check(
            format!("uniform site marginals m={m}"),
            z.abs() <= 5.0 * (points.len() as f64).sqrt(),
            format!("share of ones {:.5}, z = {z:.2}", ones as f64 / n),
        );
    }
    Ok(())
}

/// Stored overlap series compared on later runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapBaseline {
    pub k: usize,
    pub alpha: f64,
    pub rows: Vec<(usize, f64)>,
}

impl OverlapBaseline {
    pub fn from_series(series: &OverlapSeries, alpha: f64) -> Self {
        Self {
            k: series.k,
            alpha,
            rows: series.rows.iter().map(|r| (r.m, r.overlap)).collect(),
        }
    }

    /// Largest deviation over the common `m`, or an error when the series
    /// do not line up.
    pub fn max_deviation(&self, other: &OverlapBaseline) -> Result<f64, String> {
        if self.k != other.k || self.alpha != other.alpha || self.rows.len() != other.rows.len() {
            return Err("baseline was recorded for a different k, alpha or m range".into());
        }
        let mut worst = 0.0f64;
        for (a, b) in self.rows.iter().zip(&other.rows) {
            if a.0 != b.0 {
                return Err(format!("baseline m = {} does not match m = {}", a.0, b.0));
            }
            worst = worst.max((a.1 - b.1).abs());
        }
        Ok(worst)
    }
}

fn tv_exact(cfg: &ExperimentConfig, s: &mut Session) -> Result<(), CliError> {
    let pair = cfg.tree.build()?;
    let ms = cfg.model.lengths(&[4, 5, 6, 7, 8]);
    let k = cfg.model.k;
    let series = s.timed("overlap scan", || {
        overlap_floor_scan(&pair, k, cfg.model.alpha, &ms, cfg.backend, cfg.tv.cap_bits)
    })?;
    s.write_json("tv_exact.json", &series)?;
    s.write_csv(
        "tv_series.csv",
        &["m", "tv", "overlap", "backend", "witness_size", "outcomes"],
        series.rows.iter().map(|r| {
            [
                r.m.to_string(),
                format!("{:.17e}", r.tv),
                format!("{:.17e}", r.overlap),
                format!("{:?}", r.backend).to_lowercase(),
                r.witness_size.to_string(),
                r.outcomes.to_string(),
            ]
        }),
    )?;
    s.check(
        "tv characterizations agree",
        series.rows.iter().all(|r| r.characterizations_agree),
        "",
    );
    s.check("overlap strictly positive", series.positive(), format!("min overlap {}", series.min_overlap));
    if series.rows.len() > 1 {
        s.check(
            "overlap non-vanishing",
            series.non_vanishing(cfg.tv.min_ratio),
            format!("min successive ratio {} (needs >= {})", series.min_ratio, cfg.tv.min_ratio),
        );
    }
    if let Some(path) = &cfg.tv.baseline {
        let current = OverlapBaseline::from_series(&series, cfg.model.alpha);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let stored: OverlapBaseline =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            match stored.max_deviation(&current) {
                Ok(dev) => s.check(
                    "overlap matches baseline",
                    dev <= cfg.tv.baseline_tolerance,
                    format!("max deviation {dev:e}"),
                ),
                Err(msg) => s.check("overlap matches baseline", false, msg),
            }
        } else {
            let text = serde_json::to_string_pretty(&current).map_err(|e| CliError::Io(e.to_string()))?;
            std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            s.check("overlap baseline recorded", true, path.display().to_string());
        }
    }
    Ok(())
}

fn tv_mc(cfg: &ExperimentConfig, s: &mut Session) -> Result<(), CliError> {
    let pair = cfg.tree.build()?;
    let k = cfg.model.k;
    let mut rows = Vec::new();
    for m in cfg.model.lengths(&[1000]) {
        let e = s.timed("classifier", || {
            mc_tv_lower_bound(&pair, k, m, cfg.model.alpha, cfg.samples.mc, cfg.seed, cfg.classifier)
        })?;
        s.check(
            format!("classifier does not separate the trees m={m}"),
            e.ci.1 < 1.0,
            format!("bound {:.4}, {:.0}% CI ({:.4}, {:.4})", e.bound, 100.0 * e.level, e.ci.0, e.ci.1),
        );
        rows.push(e);
    }
    s.write_json("tv_mc.json", &rows)?;
    s.write_csv(
        "tv_mc.csv",
        &["m", "bound", "ci_lo", "ci_hi", "accuracy", "holdout"],
        rows.iter().map(|e| {
            [
                e.m.to_string(),
                format!("{:.17e}", e.bound),
                format!("{:.17e}", e.ci.0),
                format!("{:.17e}", e.ci.1),
                format!("{:.17e}", e.accuracy),
                e.holdout.to_string(),
            ]
        }),
    )?;
    Ok(())
}

fn audit_reductions(cfg: &ExperimentConfig, s: &mut Session) -> Result<(), CliError> {
    let pair = cfg.tree.build()?;
    let k = cfg.model.k;
    let alpha = cfg.model.alpha;
    let cap = cfg.tv.cap_bits;
    let mut table = Vec::new();
    for m in cfg.model.lengths(&[4, 5, 6]) {
        let backend = cfg.backend.unwrap_or_else(|| Backend::default_for(m));
        let audit = s.timed(&format!("audit m={m}"), || reduction_chain_audit(&pair, k, m, alpha, backend, cap))?;
        let reports = [
            &audit.tv_leaf_counts,
            &audit.tv_triple_counts,
            &audit.tv_hat_f,
            &audit.tv_z,
            &audit.tv_zprime,
            &audit.tv_zprime_conditioned,
        ];
        s.check(
            format!("tv characterizations agree m={m}"),
            reports.iter().all(|r| r.characterizations_agree),
            "",
        );
        let failures: Vec<&str> = audit.failures().iter().map(|c| c.name.as_str()).collect();
        s.check(format!("reduction chain m={m}"), audit.passed(), failures.join("; "));
        for (group, list) in [("chain", &audit.chain), ("data-processing", &audit.data_processing)] {
            for c in list.iter() {
                table.push([
                    m.to_string(),
                    group.to_string(),
                    c.name.clone(),
                    format!("{:.17e}", c.lhs),
                    c.relation.to_string(),
                    format!("{:.17e}", c.rhs),
                    c.holds.to_string(),
                ]);
            }
        }
        s.write_json(&format!("audit_m{m}.json"), &audit)?;

        let points = pair.x_labels().len() + 5;
        if k == 1 && points * m <= cap {
            let markov = s.timed(&format!("markov m={m}"), || markov_equality_check(&pair, m, k, alpha, backend, cap))?;
            s.check(
                format!("outer counts carry no information m={m}"),
                markov.hypotheses_hold(),
                format!("tv outer {}, outer and middle {}", markov.tv_outer.tv, markov.tv_outer_and_middle.tv),
            );
            s.check(
                format!("Markov equality m={m}"),
                markov.equality.holds,
                format!("{} vs {}", markov.equality.lhs, markov.equality.rhs),
            );
            s.write_json(&format!("markov_m{m}.json"), &markov)?;
        }
    }
    s.write_csv("audit.csv", &["m", "group", "comparison", "lhs", "relation", "rhs", "holds"], table)?;
    Ok(())
}

fn verify_lemmas(cfg: &ExperimentConfig, s: &mut Session) -> Result<(), CliError> {
    let k = cfg.model.k;
    let reports = s.timed("exhaustive suites", || exhaustive_suites(k, cfg.verify.max_mu))
        .map_err(|e| CliError::Config(format!("verify: {e}")))?;
    for r in &reports {
        let mut detail = format!("{}/{} sequences", r.cases - r.failures, r.cases);
        if r.mutations > 0 {
            detail += &format!(", {}/{} mutations detected", r.mutations_detected, r.mutations);
        }
        if let Some(f) = &r.first_failure {
            detail += &format!(", first failure {f}");
        }
        s.check(format!("{} k={} mu={}", r.suite.name(), r.k, r.mu), r.passed(), detail);
    }
    let rank = constraint_rank(&constraint_matrix(k));
    s.check(
        format!("constraint rank k={k}"),
        rank == 1 << k,
        format!("rank {rank}, expected {}", 1u64 << k),
    );
    s.write_json("lemmas.json", &reports)?;
    s.write_csv(
        "lemmas.csv",
        &["suite", "k", "mu", "cases", "failures", "mutations", "mutations_detected"],
        reports.iter().map(|r| {
            [
                r.suite.name().to_string(),
                r.k.to_string(),
                r.mu.to_string(),
                r.cases.to_string(),
                r.failures.to_string(),
                r.mutations.to_string(),
                r.mutations_detected.to_string(),
            ]
        }),
    )?;
    Ok(())
}

/// Stream ids used by the excursion commands; distinct ids give
/// independent streams under one seed.
const STREAM_MOMENTS: u64 = 1;
const STREAM_LOCAL: u64 = 11;
const STREAM_PROJECTION: u64 = 21;

fn stream_id(base: u64, w: WhichTree) -> u64 {
    base + w.index() as u64 - 1
}

fn sources(pair: &PaperTreePair, cfg: &ExperimentConfig) -> Result<Vec<(WhichTree, ExcursionSource)>, CliError> {
    WhichTree::BOTH
        .into_iter()
        .map(|w| Ok((w, ExcursionSource::for_tree(pair.tree(w), cfg.model.k, cfg.model.alpha)?)))
        .collect()
}

fn moments_for(
    src: &ExcursionSource,
    cfg: &ExperimentConfig,
    w: WhichTree,
    bootstrap: bool,
) -> Result<(ExcursionTable, MomentEstimate), CliError> {
    let id = stream_id(STREAM_MOMENTS, w);
    let table = ExcursionTable::collect(src.dimension(), src.stream(cfg.seed, id), cfg.samples.excursions)?;
    let boot = (bootstrap && cfg.samples.bootstrap > 0).then(|| BootstrapConfig {
        resamples: cfg.samples.bootstrap,
        seed: cfg.seed.wrapping_add(id),
        level: 0.95,
    });
    let est = table.moments(boot)?;
    Ok((table, est))
}

fn excursions(cfg: &ExperimentConfig, s: &mut Session) -> Result<(), CliError> {
    let pair = cfg.tree.build()?;
    let k = cfg.model.k;
    let labels = coordinate_labels(k);
    let mut estimates = Vec::new();
    for (w, src) in sources(&pair, cfg)? {
        let t = tag(w);
        let (table, est) = s.timed(&format!("moments {t}"), || moments_for(&src, cfg, w, true))?;
        let probe = condition_a_probe(src.law(), &table)?;
        s.check(
            format!("unit-step witnesses observed {t}"),
            probe.passed(),
            format!(
                "smallest count {}",
                probe.rows.iter().map(|r| r.base_count.min(r.plus_count)).min().unwrap_or(0)
            ),
        );
        match est.lambda_min_ci {
            Some((lo, hi)) => s.check(
                format!("smallest covariance eigenvalue CI excludes 0 {t}"),
                lo > 0.0,
                format!("lambda_min {:.6}, CI ({lo:.6}, {hi:.6})", est.lambda_min),
            ),
            None => s.check(
                format!("covariance positive definite {t}"),
                est.lambda_min > 0.0,
                format!("lambda_min {:.6}", est.lambda_min),
            ),
        }
        let sym = block_symmetry(&est, k, MEAN_TOLERANCE_SE);
        let worst = sym.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
        s.check(
            format!("Bp and Cp block means agree {t}"),
            sym.iter().all(|r| r.passed),
            format!("max |z| {worst:.3}"),
        );
        s.write_csv(
            &format!("symmetry_{t}.csv"),
            &["coordinate_bp", "coordinate_cp", "label_bp", "label_cp", "diff", "se", "z"],
            sym.iter().map(|r| {
                [
                    r.coordinates.0.to_string(),
                    r.coordinates.1.to_string(),
                    labels[r.coordinates.0].clone(),
                    labels[r.coordinates.1].clone(),
                    format!("{:.17e}", r.diff),
                    format!("{:.17e}", r.se),
                    format!("{:.17e}", r.z),
                ]
            }),
        )?;
        s.write_json(&format!("moments_{t}.json"), &est)?;
        s.write_json(&format!("unit_steps_{t}.json"), &probe)?;
        if cfg.samples.export_excursions > 0 {
            let mut buf = Vec::new();
            let rows = src
                .stream(cfg.seed, stream_id(STREAM_MOMENTS, w))
                .take(cfg.samples.export_excursions as usize);
            write_excursions_csv(&mut buf, k, rows)?;
            s.write(&format!("excursions_{t}.csv"), &buf)?;
        }
        estimates.push(est);
    }
    let cmp = compare_means(&estimates[0], &estimates[1], MEAN_TOLERANCE_SE);
    let worst = cmp.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    s.check("excursion means agree across trees", cmp.passed, format!("max |z| {worst:.3}"));
    s.write_csv(
        "mean_comparison.csv",
        &["coordinate", "label", "mean_t1", "mean_t2", "combined_se", "z"],
        cmp.rows.iter().map(|r| {
            [
                r.coordinate.to_string(),
                labels[r.coordinate].clone(),
                format!("{:.17e}", r.mean_1),
                format!("{:.17e}", r.mean_2),
                format!("{:.17e}", r.combined_se),
                format!("{:.17e}", r.z),
            ]
        }),
    )?;
    Ok(())
}

fn clt_check(cfg: &ExperimentConfig, s: &mut Session) -> Result<(), CliError> {
    let pair = cfg.tree.build()?;
    let ells = &cfg.samples.ells;
    let top = *ells.iter().max().expect("validated non-empty");
    let mut estimates = Vec::new();
    for (w, src) in sources(&pair, cfg)? {
        let t = tag(w);
        let taus = s.timed(&format!("tau stream {t}"), || {
            let mut stream = src.stream(cfg.seed, stream_id(STREAM_LOCAL, w));
            let mut buf = vec![0u32; src.dimension()];
            (0..cfg.samples.local_clt)
                .map(|_| stream.next_into(&mut buf))
                .collect::<Result<Vec<u32>, _>>()
        })?;
        let local = s.timed(&format!("local clt {t}"), || local_clt_lattice_check(&taus, ells))?;
        let devs: Vec<String> = local.rows.iter().map(|r| format!("{:.5}", r.max_deviation)).collect();
        s.check(
            format!("local CLT deviation decreasing {t}"),
            local.monotone_decreasing(),
            format!("max deviations {}", devs.join(", ")),
        );
        s.check(
            format!("local CLT window coverage {t}"),
            local.coverage_ok(MIN_COVERAGE),
            format!("needs >= {MIN_COVERAGE}"),
        );
        let as_f64: Vec<f64> = taus.iter().map(|&v| v as f64).collect();
        let (r, se) = lag1_correlation(&as_f64);
        s.check(
            format!("consecutive excursion lengths uncorrelated {t}"),
            r.abs() <= LAG1_TOLERANCE_SE * se,
            format!("lag-1 correlation {r:.5}, SE {se:.5}"),
        );
        let tail = tail_hazard_check(&taus, TAIL_TOLERANCE_SE)?;
        s.check(format!("geometric tail of tau {t}"), tail.passed, format!("hazard z = {:.3}", tail.z));
        drop(as_f64);
        drop(taus);

        let (_, est) = s.timed(&format!("moments {t}"), || moments_for(&src, cfg, w, false))?;
        let dirs = random_unit_directions(src.dimension(), cfg.samples.directions, cfg.seed);
        let proj = s.timed(&format!("projections {t}"), || {
            clt_projection_check(
                src.stream(cfg.seed, stream_id(STREAM_PROJECTION, w)),
                &est,
                &dirs,
                ells,
                cfg.samples.projection_replicates,
            )
        })?;
        let ks_top: Vec<f64> = proj.rows.iter().filter(|r| r.ell == top).map(|r| r.ks).collect();
        s.check(
            format!("projected sums near normal at l={top} {t}"),
            ks_top.iter().all(|&d| d < KS_THRESHOLD),
            format!("KS {}", ks_top.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>().join(", ")),
        );
        s.write_csv(
            &format!("clt_local_{t}.csv"),
            &["ell", "windows", "max_deviation", "argmax", "coverage"],
            local.rows.iter().map(|r| {
                [
                    r.ell.to_string(),
                    r.windows.to_string(),
                    format!("{:.17e}", r.max_deviation),
                    r.argmax.to_string(),
                    format!("{:.17e}", r.coverage),
                ]
            }),
        )?;
        s.write_csv(
            &format!("clt_projection_{t}.csv"),
            &["direction", "ell", "replicates", "variance", "ks"],
            proj.rows.iter().map(|r| {
                [
                    r.direction.to_string(),
                    r.ell.to_string(),
                    r.replicates.to_string(),
                    format!("{:.17e}", r.variance),
                    format!("{:.17e}", r.ks),
                ]
            }),
        )?;
        s.write_json(&format!("clt_{t}.json"), &(&local, &proj, (r, se), &tail))?;
        estimates.push(est);
    }
    let ell = s.timed("ellipsoids", || {
        ellipsoid_diagnostics(&estimates[0], &estimates[1], top, None, ELLIPSOID_SAMPLES, cfg.seed)
    })?;
    s.check(
        format!("sampled ball points inside both ellipsoids l={top}"),
        ell.ball_inside_ellipsoids(),
        format!("{}/{}", ell.sampled_in_both, ell.sampled_points),
    );
    s.write_json("ellipsoids.json", &ell)?;
    Ok(())
}
