//! Long-format plot table `(experiment, x, y, ci_lo, ci_hi)` built from the
//! series files the other commands write.

use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::manifest::Session;
use crate::CliError;

pub const PLOT_FILE: &str = "plot_data.csv";

/// z for a two-sided 95% interval.
const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub experiment: String,
    pub x: String,
    pub y: f64,
    pub ci: Option<(f64, f64)>,
}

/// Series recognised by their header, in the order they are looked up in the
/// output directory.
const KNOWN: &[&str] = &[
    "tv_series.csv",
    "tv_mc.csv",
    "clt_local_t1.csv",
    "clt_local_t2.csv",
    "clt_projection_t1.csv",
    "clt_projection_t2.csv",
    "mean_comparison.csv",
];

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn parse(field: &str, path: &Path) -> Result<f64, CliError> {
    field
        .parse()
        .map_err(|_| CliError::Config(format!("{}: '{field}' is not a number", path.display())))
}

/// Converts one series file.
pub fn convert(path: &Path) -> Result<Vec<PlotRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = Vec::new();
    let name = stem(path);
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let row = |experiment: String, x: &str, y: f64, ci: Option<(f64, f64)>| PlotRow {
            experiment,
            x: x.to_string(),
            y,
            ci,
        };
        match h.as_slice() {
            ["m", "tv", "overlap", ..] => {
                out.push(row("overlap".into(), f(0), parse(f(2), path)?, None));
                out.push(row("tv".into(), f(0), parse(f(1), path)?, None));
            }
            ["m", "bound", "ci_lo", "ci_hi", ..] => {
                let ci = (parse(f(2), path)?, parse(f(3), path)?);
                out.push(row("mc-bound".into(), f(0), parse(f(1), path)?, Some(ci)));
            }
            ["ell", "windows", "max_deviation", ..] => {
                let exp = name.replace("clt_local", "local-clt-deviation").replace('_', "-");
                out.push(row(exp, f(0), parse(f(2), path)?, None));
            }
            ["direction", "ell", "replicates", "variance", "ks"] => {
                let exp = format!("{}-d{}", name.replace("clt_projection", "projection-ks").replace('_', "-"), f(0));
                out.push(row(exp, f(1), parse(f(4), path)?, None));
            }
            ["coordinate", "label", "mean_t1", "mean_t2", "combined_se", ..] => {
                let (m1, m2, se) = (parse(f(2), path)?, parse(f(3), path)?, parse(f(4), path)?);
                out.push(row("mean-t1".into(), f(1), m1, None));
                out.push(row("mean-t2".into(), f(1), m2, None));
                let d = m1 - m2;
                out.push(row("mean-difference".into(), f(1), d, Some((d - Z95 * se, d + Z95 * se))));
            }
            _ => {
                return Err(CliError::Config(format!(
                    "{}: unrecognised series header {}",
                    path.display(),
                    header.join(",")
                )))
            }
        }
    }
    Ok(out)
}

fn inputs(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    if !cfg.plot.inputs.is_empty() {
        for p in &cfg.plot.inputs {
            if !p.is_file() {
                return Err(CliError::Config(format!("missing series file {}", p.display())));
            }
        }
        return Ok(cfg.plot.inputs.clone());
    }
    let found: Vec<PathBuf> = KNOWN
        .iter()
        .map(|n| cfg.output.dir.join(n))
        .filter(|p| p.is_file())
        .collect();
    if found.is_empty() {
        return Err(CliError::Config(format!(
            "no series files found in {}",
            cfg.output.dir.display()
        )));
    }
    Ok(found)
}

pub fn emit_plot_data(cfg: &ExperimentConfig, s: &mut Session) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for p in inputs(cfg)? {
        let got = convert(&p)?;
        s.check(format!("parsed {}", p.display()), !got.is_empty(), format!("{} rows", got.len()));
        rows.extend(got);
    }
    let fmt = |v: f64| format!("{v:.17e}");
    s.write_csv(
        PLOT_FILE,
        &["experiment", "x", "y", "ci_lo", "ci_hi"],
        rows.iter().map(|r| {
            let (lo, hi) = r.ci.map_or((String::new(), String::new()), |(a, b)| (fmt(a), fmt(b)));
            [r.experiment.clone(), r.x.clone(), fmt(r.y), lo, hi]
        }),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_series_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tv_series.csv");
        std::fs::write(&p, "m,tv,overlap,backend\n4,0.25,0.75,rational\n").unwrap();
        let rows = convert(&p).unwrap();
        assert_eq!(rows[0], PlotRow { experiment: "overlap".into(), x: "4".into(), y: 0.75, ci: None });
        assert_eq!(rows[1].y, 0.25);
    }

    #[test]
    fn symmetry_rows_have_interval() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mean_comparison.csv");
        std::fs::write(&p, "coordinate,label,mean_t1,mean_t2,combined_se,z\n0,tau,8.0,7.5,0.25,2\n").unwrap();
        let rows = convert(&p).unwrap();
        assert_eq!(rows.len(), 3);
        let (lo, hi) = rows[2].ci.unwrap();
        assert!((rows[2].y - 0.5).abs() < 1e-12 && (hi - lo - 2.0 * Z95 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn unknown_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(convert(&p).is_err());
        assert!(convert(&dir.path().join("missing.csv")).is_err());
    }
}
