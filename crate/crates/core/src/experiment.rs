//! Batch harness: sample truth points, trace each with all three methods,
//! and emit per-point reports, plot data and summary statistics.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cr3bp::SystemConfig;
use crate::error::{Error, Result};
use crate::halo::{sample_truth_points, CatalogEntry, TruthPoint};
use crate::inverse::{Disposition, InverseSolver, MethodOutcome, MethodSet, Query, SolverSettings};
use crate::lp_series::build_coefficients;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub solver: SolverSettings,
    pub n_points: usize,
    pub seed: u64,
    /// Method whose answers go into the CSV report (1, 2 or 3).
    pub method: u8,
    pub out_dir: PathBuf,
    /// Fill the `wall_ms` column. Off by default so reruns are byte-identical.
    pub record_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            solver: SolverSettings::default(),
            n_points: 1000,
            seed: 1,
            method: 3,
            out_dir: PathBuf::from("out"),
            record_timing: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if !(1..=3).contains(&self.method) {
            return Err(Error::Config(format!("method must be 1, 2 or 3, got {}", self.method)));
        }
        self.system.validate()?;
        self.solver.validate()
    }
}

/// Truth and per-method outcomes for one traced point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub point_id: usize,
    pub truth: TruthPoint,
    pub methods: MethodSet,
    pub wall_ms: Option<f64>,
}

impl TraceReport {
    /// The CSV row for one method.
    pub fn row(&self, method: u8) -> CsvRow {
        let out = self.methods.get(method);
        let s = out.solution;
        let p = self.truth.position;
        CsvRow {
            point_id: self.point_id,
            true_az_km: self.truth.true_az_km,
            true_t: self.truth.true_t,
            x1: p.x,
            y1: p.y,
            z1: p.z,
            rec_az_km: s.map(|s| s.az_km),
            rec_t: s.map(|s| s.t),
            dx: s.map(|s| s.per_coordinate_errors.x),
            dy: s.map(|s| s.per_coordinate_errors.y),
            dz: s.map(|s| s.per_coordinate_errors.z),
            err_norm: s.map(|s| s.error_norm),
            disposition: out.disposition.label().to_string(),
            wall_ms: self.wall_ms,
        }
    }
}

/// One line of the trace CSV. Recovered fields are empty for unsolved
/// points; discarded points carry the rejected Method 1 answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub point_id: usize,
    pub true_az_km: f64,
    pub true_t: f64,
    pub x1: f64,
    pub y1: f64,
    pub z1: f64,
    pub rec_az_km: Option<f64>,
    pub rec_t: Option<f64>,
    pub dx: Option<f64>,
    pub dy: Option<f64>,
    pub dz: Option<f64>,
    pub err_norm: Option<f64>,
    pub disposition: String,
    pub wall_ms: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 14] = [
    "point_id",
    "true_az_km",
    "true_t",
    "x1",
    "y1",
    "z1",
    "rec_az_km",
    "rec_t",
    "dx",
    "dy",
    "dz",
    "err_norm",
    "disposition",
    "wall_ms",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

impl Quantiles {
    fn of(mut values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        Some(Self {
            p50: quantile(&values, 0.5),
            p90: quantile(&values, 0.9),
            max: values[values.len() - 1],
        })
    }
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: u8,
    pub solved: usize,
    pub discarded: usize,
    pub unsolved: usize,
    pub method1_accepted: usize,
    pub method2_refined: usize,
    pub method2_unique: usize,
    /// |Δx|, |Δy|, |Δz| and the error norm over accepted solutions.
    pub abs_dx: Option<Quantiles>,
    pub abs_dy: Option<Quantiles>,
    pub abs_dz: Option<Quantiles>,
    pub err_norm: Option<Quantiles>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_points: usize,
    pub seed: u64,
    pub corrector_rejections: usize,
    pub methods: Vec<MethodSummary>,
    /// Points Method 2 re-evaluated (Method 1 norm above the trigger).
    pub reevaluated: usize,
    /// Median |Δy| of Method 1 and of Method 2 over the re-evaluated points
    /// Method 2 solved; discarded points have no Method 2 answer.
    pub reevaluated_median_abs_dy_method1: Option<f64>,
    pub reevaluated_median_abs_dy_method2: Option<f64>,
}

impl Summary {
    pub fn method(&self, m: u8) -> &MethodSummary {
        &self.methods[(m - 1) as usize]
    }

    pub fn from_reports(reports: &[TraceReport], seed: u64, corrector_rejections: usize) -> Self {
        let methods = (1..=3u8).map(|m| summarize_method(reports, m)).collect();
        let reevaluated: Vec<&TraceReport> = reports
            .iter()
            .filter(|r| r.methods.method1.is_solved() && r.methods.method2.disposition != Disposition::Method1Accepted)
            .collect();
        let median_dy = |pick: fn(&TraceReport) -> &MethodOutcome| {
            let mut v: Vec<f64> = reevaluated
                .iter()
                .filter(|r| r.methods.method2.is_solved())
                .filter_map(|r| pick(r).solution.map(|s| s.per_coordinate_errors.y.abs()))
                .collect();
            v.sort_by(f64::total_cmp);
            (!v.is_empty()).then(|| quantile(&v, 0.5))
        };
        Self {
            n_points: reports.len(),
            seed,
            corrector_rejections,
            methods,
            reevaluated: reevaluated.len(),
            reevaluated_median_abs_dy_method1: median_dy(|r| &r.methods.method1),
            reevaluated_median_abs_dy_method2: median_dy(|r| &r.methods.method2),
        }
    }
}

fn summarize_method(reports: &[TraceReport], m: u8) -> MethodSummary {
    let mut s = MethodSummary {
        method: m,
        ..Default::default()
    };
    let mut errs: [Vec<f64>; 4] = Default::default();
    for r in reports {
        let out = r.methods.get(m);
        match out.disposition {
            Disposition::Unsolved => s.unsolved += 1,
            Disposition::Discarded => s.discarded += 1,
            d => {
                s.solved += 1;
                match d {
                    Disposition::Method1Accepted => s.method1_accepted += 1,
                    Disposition::Method2Refined => s.method2_refined += 1,
                    _ => s.method2_unique += 1,
                }
                let sol = out.solution.expect("solved outcome carries a solution");
                let e = sol.per_coordinate_errors;
                for (bucket, v) in errs.iter_mut().zip([e.x.abs(), e.y.abs(), e.z.abs(), sol.error_norm]) {
                    bucket.push(v);
                }
            }
        }
    }
    let [dx, dy, dz, norm] = errs;
    s.abs_dx = Quantiles::of(dx);
    s.abs_dy = Quantiles::of(dy);
    s.abs_dz = Quantiles::of(dz);
    s.err_norm = Quantiles::of(norm);
    s
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "points: {}  seed: {}  corrector rejections: {}",
            self.n_points, self.seed, self.corrector_rejections
        )?;
        for m in &self.methods {
            writeln!(
                f,
                "method {}: solved {:>5}  discarded {:>5}  unsolved {:>5}  (kept {}, refined {}, unique {})",
                m.method, m.solved, m.discarded, m.unsolved, m.method1_accepted, m.method2_refined, m.method2_unique
            )?;
            for (name, q) in [
                ("|dx|", m.abs_dx),
                ("|dy|", m.abs_dy),
                ("|dz|", m.abs_dz),
                ("norm", m.err_norm),
            ] {
                if let Some(q) = q {
                    writeln!(
                        f,
                        "    {name:<5} p50 {:.3e}  p90 {:.3e}  max {:.3e}",
                        q.p50, q.p90, q.max
                    )?;
                }
            }
        }
        write!(f, "re-evaluated by method 2: {}", self.reevaluated)?;
        if let (Some(a), Some(b)) = (
            self.reevaluated_median_abs_dy_method1,
            self.reevaluated_median_abs_dy_method2,
        ) {
            write!(f, "  median |dy| method 1 {a:.3e} -> method 2 {b:.3e}")?;
        }
        writeln!(f)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub reports: Vec<TraceReport>,
    pub catalog: Vec<CatalogEntry>,
    pub summary: Summary,
}

/// Sample `n_points` truth points and trace each. Per-point solver failures
/// are recorded as unsolved; only configuration and sampling errors abort.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let coeffs = build_coefficients(&config.system)?;
    let solver = InverseSolver::new(&coeffs, config.solver)?;
    let range = (config.solver.az_lo_km, config.solver.az_hi_km);
    let truth = sample_truth_points(config.n_points, config.seed, range, &config.system)?;

    let reports: Vec<TraceReport> = truth
        .points
        .par_iter()
        .enumerate()
        .map(|(point_id, p)| {
            let start = Instant::now();
            let methods = solver.trace(&Query { position: p.position }).unwrap_or_else(|e| {
                log::warn!("point {point_id}: {e}");
                let u = MethodOutcome::UNSOLVED;
                MethodSet {
                    method1: u,
                    method2: u,
                    method3: u,
                }
            });
            let wall_ms = config.record_timing.then(|| start.elapsed().as_secs_f64() * 1e3);
            TraceReport {
                point_id,
                truth: *p,
                methods,
                wall_ms,
            }
        })
        .collect();

    let summary = Summary::from_reports(&reports, config.seed, truth.failures.len());
    Ok(ExperimentOutput {
        reports,
        catalog: truth.catalog,
        summary,
    })
}

/// Write the per-point CSV for `method`.
pub fn emit_csv(reports: &[TraceReport], method: u8, path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::Config("no reports to write".into()));
    }
    let rows: Vec<CsvRow> = reports.iter().map(|r| r.row(method)).collect();
    write_rows(&rows, path)
}

pub fn write_rows(rows: &[CsvRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rows(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, e))?;
    let headers = r.headers().map_err(|e| Error::io(path, e))?;
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Parse(format!(
            "{}: unexpected header {:?}",
            path.display(),
            headers
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Parse(format!("{}: {e}", path.display()))))
        .collect()
}

/// Write the six scatter files `<prefix>_{x,y,z}_vs_{t,az}.csv`. Each row is
/// one method's answer for one point (accepted or discarded), with the error
/// in normalized units and in km.
pub fn emit_plot_data(reports: &[TraceReport], km_per_unit: f64, prefix: &Path) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::Config("no reports to write".into()));
    }
    let mut written = Vec::new();
    for (axis, coord) in [("x", 0usize), ("y", 1), ("z", 2)] {
        for abscissa in ["t", "az"] {
            let mut name = prefix.file_name().map(|s| s.to_os_string()).unwrap_or_default();
            name.push(format!("_{axis}_vs_{abscissa}.csv"));
            let path = prefix.with_file_name(name);
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = std::io::BufWriter::new(file);
            let mut run = || -> std::io::Result<()> {
                let head = if abscissa == "t" { "t" } else { "az_km" };
                writeln!(w, "method,point_id,{head},error,error_km,disposition")?;
                for m in 1..=3u8 {
                    for r in reports {
                        let out = r.methods.get(m);
                        let Some(s) = out.solution else { continue };
                        let x = if abscissa == "t" { s.t } else { s.az_km };
                        let e = s.per_coordinate_errors[coord];
                        writeln!(
                            w,
                            "{m},{},{x},{e},{},{}",
                            r.point_id,
                            e * km_per_unit,
                            out.disposition.label()
                        )?;
                    }
                }
                w.flush()
            };
            run().map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig {
            n_points: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            method: 4,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn empty_reports_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_csv(&[], 1, &dir.path().join("a.csv")).is_err());
        assert!(emit_plot_data(&[], 1.0, &dir.path().join("p")).is_err());
    }
}
