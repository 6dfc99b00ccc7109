//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p halotrace --test acceptance`. The 1,000-point
//! experiment dominates the runtime.

use std::time::{Duration, Instant};

use halotrace::cr3bp::{jacobi_integral, lagrange_points, potential_gradient, LagrangePoint, SystemConfig};
use halotrace::experiment::{
    emit_csv, read_rows, run_experiment, write_rows, ExperimentOutput, RunConfig, TraceReport,
};
use halotrace::halo::{differential_correct, richardson_guess};
use halotrace::integrate::{propagate_state, IntegratorOptions};
use halotrace::inverse::{Disposition, InverseSolver, Query, SolverSettings};
use halotrace::lp_series::{build_coefficients, Amplitude};

const MUS: [f64; 3] = [3.00348e-6, 0.01, 0.0121505856];

/// Largest series-vs-corrected-orbit error norm over one period at
/// Az = 100,000 km (Sun-Earth L2), frozen from the first run.
const SERIES_ERROR_BASELINE: f64 = 6.07e-5;
const BASELINE_SLACK: f64 = 1.05;

const EXPERIMENT_SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if took > limit {
        o.pass = false;
    }
    o.detail = format!(
        "{} ({:.1} s, limit {} s)",
        o.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    o
}

/// Root of `f` on `[a, b]` by plain bisection.
fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || b - a < 1e-16 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn criterion1() -> Outcome {
    timed(Duration::from_secs(1), || {
        let mut worst_grad = 0.0f64;
        let mut worst_oracle = 0.0f64;
        let mut triangular_exact = true;
        for mu in MUS {
            let pts = match lagrange_points(mu) {
                Ok(p) => p,
                Err(e) => return outcome(false, format!("mu = {mu}: {e}")),
            };
            let ux = |x: f64| potential_gradient(&nalgebra::Vector3::new(x, 0.0, 0.0), mu).unwrap().x;
            let eps = 1e-9;
            let oracle = [
                bisect(ux, -mu + eps, 1.0 - mu - eps),
                bisect(ux, 1.0 - mu + eps, 2.0),
                bisect(ux, -2.0, -mu - eps),
            ];
            for (p, want) in [LagrangePoint::L1, LagrangePoint::L2, LagrangePoint::L3]
                .into_iter()
                .zip(oracle)
            {
                worst_oracle = worst_oracle.max((pts.get(p).x - want).abs());
            }
            for p in LagrangePoint::ALL {
                let v = pts.get(p);
                worst_grad = worst_grad.max(potential_gradient(&v, mu).unwrap().norm());
            }
            let h = 3f64.sqrt() / 2.0;
            triangular_exact &= pts.get(LagrangePoint::L4) == nalgebra::Vector3::new(0.5 - mu, h, 0.0);
            triangular_exact &= pts.get(LagrangePoint::L5) == nalgebra::Vector3::new(0.5 - mu, -h, 0.0);
        }
        outcome(
            worst_grad < 1e-12 && worst_oracle < 1e-10 && triangular_exact,
            format!("max |grad U| {worst_grad:.2e}, max collinear offset from bisection {worst_oracle:.2e}, triangular exact: {triangular_exact}"),
        )
    })
}

fn criterion2() -> Outcome {
    timed(Duration::from_secs(10), || {
        let cfg = SystemConfig::default();
        let mu = cfg.mu;
        let c = build_coefficients(&cfg).unwrap();
        let orbit = match richardson_guess(1e5, &c).and_then(|g| differential_correct(&g, mu, 1e-12)) {
            Ok(o) => o,
            Err(e) => return outcome(false, format!("corrector: {e}")),
        };
        let opts = IntegratorOptions::with_tol(1e-12);
        let s0 = orbit.initial_state;
        let c0 = jacobi_integral(&s0, mu).unwrap();
        let period = orbit.period();
        let mut drift = 0.0f64;
        for i in 1..=50 {
            let s = propagate_state(&s0, mu, 0.0, period * i as f64 / 50.0, &opts).unwrap();
            drift = drift.max((jacobi_integral(&s, mu).unwrap() - c0).abs());
        }
        let end = propagate_state(&s0, mu, 0.0, period, &opts).unwrap();
        let back = propagate_state(&end, mu, period, 0.0, &opts).unwrap();
        let closure = (back.to_vector() - s0.to_vector()).norm();
        outcome(
            drift < 1e-10 && closure < 1e-8,
            format!("Jacobi drift {drift:.2e} (< 1e-10), forward-backward closure {closure:.2e} (< 1e-8)"),
        )
    })
}

fn criterion3() -> Outcome {
    timed(Duration::from_secs(30), || {
        let cfg = SystemConfig::default();
        let c = build_coefficients(&cfg).unwrap();
        let mut parts = Vec::new();
        let mut pass = true;
        for az in [50_000.0, 100_000.0, 300_000.0] {
            match richardson_guess(az, &c).and_then(|g| differential_correct(&g, cfg.mu, 1e-12)) {
                Ok(o) => {
                    let r = o.crossing_residual();
                    pass &= r < 1e-12 && o.iterations <= 15;
                    parts.push(format!("{az} km: {} it, residual {r:.1e}", o.iterations));
                }
                Err(e) => {
                    pass = false;
                    parts.push(format!("{az} km: {e}"));
                }
            }
        }
        outcome(pass, parts.join("; "))
    })
}

fn local_maxima(v: &[f64]) -> usize {
    v.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).count()
}

fn criterion4() -> Outcome {
    timed(Duration::from_secs(30), || {
        let cfg = SystemConfig::default();
        let c = build_coefficients(&cfg).unwrap();
        let amp = Amplitude::from_km(1e5, &c).unwrap();
        let orbit = differential_correct(&richardson_guess(1e5, &c).unwrap(), cfg.mu, 1e-12).unwrap();
        let opts = IntegratorOptions::with_tol(1e-12);
        let n = 400;
        let period = orbit.period();
        let mut norms = Vec::with_capacity(n);
        let mut max_abs = [0.0f64; 3];
        for i in 0..n {
            let t = period * i as f64 / n as f64;
            let s = orbit.trajectory.state_at(t, cfg.mu, &opts).unwrap();
            let d = c.eval(t, &amp) - s.position();
            for k in 0..3 {
                max_abs[k] = max_abs[k].max(d[k].abs());
            }
            norms.push(d.norm());
        }
        let peaks = local_maxima(&norms);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (first, second) = norms.split_at(n / 2);
        let grows = mean(second) > mean(first);
        let y_dominates = max_abs[1] > max_abs[0] && max_abs[1] > max_abs[2];
        let max_norm = norms.iter().cloned().fold(0.0, f64::max);
        let within = max_norm <= SERIES_ERROR_BASELINE * BASELINE_SLACK;
        outcome(
            peaks >= 2 && grows && y_dominates && within,
            format!(
                "{peaks} local maxima, mean error first/second half {:.2e}/{:.2e}, max |dx| {:.2e} |dy| {:.2e} |dz| {:.2e}, max norm {max_norm:.3e} (baseline {SERIES_ERROR_BASELINE:.2e})",
                mean(first),
                mean(second),
                max_abs[0],
                max_abs[1],
                max_abs[2]
            ),
        )
    })
}

/// 40 times spread evenly over `[0, T)` with `(1.3, 1.7)` removed.
fn roundtrip_times(period: f64) -> Vec<f64> {
    let allowed = 1.3 + (period - 1.7);
    (0..40)
        .map(|i| {
            let s = allowed * (i as f64 + 0.5) / 40.0;
            if s <= 1.3 {
                s
            } else {
                1.7 + (s - 1.3)
            }
        })
        .collect()
}

fn criterion5() -> Outcome {
    timed(Duration::from_secs(300), || {
        let cfg = SystemConfig::default();
        let c = build_coefficients(&cfg).unwrap();
        let solver = InverseSolver::new(&c, SolverSettings::default()).unwrap();
        let mut total = 0usize;
        let mut accepted = 0usize;
        let mut worst_norm = 0.0f64;
        let mut worst_rel = 0.0f64;
        let mut good = 0usize;
        let mut kept_above_norm = 0usize;
        let mut wrong_az = 0usize;
        for j in 0..40 {
            let az = 1e4 + (3e5 - 1e4) * j as f64 / 39.0;
            let amp = Amplitude::from_km(az, &c).unwrap();
            for t in roundtrip_times(amp.period()) {
                total += 1;
                let q = Query {
                    position: c.eval(t, &amp),
                };
                let out = solver.method2(&q).unwrap();
                if let Some(s) = out.accepted() {
                    accepted += 1;
                    let rel = (s.az_km - az).abs() / az;
                    worst_norm = worst_norm.max(s.error_norm);
                    worst_rel = worst_rel.max(rel);
                    if s.error_norm > 1e-4 {
                        kept_above_norm += 1;
                    }
                    if rel > 1e-3 {
                        wrong_az += 1;
                    }
                    if s.error_norm <= 1e-4 && rel <= 1e-3 {
                        good += 1;
                    }
                }
            }
        }
        let pct = |k: usize| 100.0 * k as f64 / total as f64;
        outcome(
            pct(accepted) >= 95.0 && good == accepted,
            format!(
                "accepted {accepted}/{total} ({:.1}%), within both bounds {good} ({:.1}%); norm > 1e-4: {kept_above_norm} (worst {worst_norm:.2e}); relative Az error > 1e-3: {wrong_az} (worst {worst_rel:.2e})",
                pct(accepted),
                pct(good)
            ),
        )
    })
}

fn experiment(n: usize) -> ExperimentOutput {
    let cfg = RunConfig {
        n_points: n,
        seed: EXPERIMENT_SEED,
        ..Default::default()
    };
    run_experiment(&cfg).expect("experiment runs")
}

/// Fraction of points without an accepted answer (unsolved or discarded).
fn unaccepted(reports: &[TraceReport], m: u8) -> usize {
    reports.iter().filter(|r| !r.methods.get(m).is_solved()).count()
}

fn criterion6(out: &ExperimentOutput, took: Duration) -> Outcome {
    let r = &out.reports;
    let n = r.len() as f64;
    let (u1, u2, u3) = (unaccepted(r, 1), unaccepted(r, 2), unaccepted(r, 3));
    let frac = |u: usize| 100.0 * u as f64 / n;
    let a = (frac(u1) - 8.5).abs() <= 5.0;
    let b = (frac(u2) - 15.6).abs() <= 5.0;
    let c = (frac(u3) - 10.9).abs() <= 5.0 && u3 < u2;
    let gains: Vec<&TraceReport> = r
        .iter()
        .filter(|x| x.methods.method3.disposition == Disposition::Method2Unique)
        .collect();
    let provenance = gains
        .iter()
        .all(|x| x.methods.method1.disposition == Disposition::Unsolved)
        && r.iter()
            .all(|x| !x.methods.method2.is_solved() || x.methods.method3 == x.methods.method2);
    let gain_scaled = gains.len() as f64 * 1000.0 / n;
    let d = provenance && (23.5..=70.5).contains(&gain_scaled);

    let smoke_start = Instant::now();
    let smoke = experiment(200);
    let smoke_took = smoke_start.elapsed();
    let smoke_ok = smoke.reports.len() == 200 && smoke_took < Duration::from_secs(300);

    outcome(
        a && b && c && d && smoke_ok && took < Duration::from_secs(1800),
        format!(
            "unaccepted M1 {:.1}% [{}], M2 {:.1}% [{}], M3 {:.1}% [{}], M3 gain {} from M1-unsolved only: {provenance} [{}]; n=1000 {:.1} s, 200-point smoke {:.1} s",
            frac(u1),
            ok(a),
            frac(u2),
            ok(b),
            frac(u3),
            ok(c),
            gains.len(),
            ok(d),
            took.as_secs_f64(),
            smoke_took.as_secs_f64()
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "out of range"
    }
}

/// Spearman rank correlation with average ranks for ties.
fn spearman(pairs: &[(f64, f64)]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (ra, rb) = (ranks(&a), ranks(&b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn criterion7(out: &ExperimentOutput) -> Outcome {
    let r = &out.reports;
    let in_gap = |t: f64| (1.4..1.6).contains(&t);
    let m1: Vec<_> = r.iter().filter_map(|x| x.methods.method1.accepted()).collect();
    let m2: Vec<_> = r.iter().filter_map(|x| x.methods.method2.accepted()).collect();
    let gap1 = m1.iter().filter(|s| in_gap(s.t)).count();
    let gap2 = m2.iter().filter(|s| in_gap(s.t)).count();
    // Bins of width 0.2 over [0, 3): expected count per bin if uniform.
    let per_bin = m1.len() as f64 / 15.0;
    let depleted = (gap1 as f64) < 0.25 * per_bin;
    let populated = gap2 >= 10 && gap2 > 2 * gap1;

    let s = &out.summary;
    let (dy1, dy2) = (
        s.reevaluated_median_abs_dy_method1.unwrap_or(f64::NAN),
        s.reevaluated_median_abs_dy_method2.unwrap_or(f64::NAN),
    );
    let dy_drop = dy2 <= 0.2 * dy1;

    let pairs: Vec<(f64, f64)> = m1.iter().map(|s| (s.az_km, s.per_coordinate_errors.z.abs())).collect();
    let rho = spearman(&pairs);
    let z_grows = rho > 0.0;

    outcome(
        depleted && populated && dy_drop && z_grows,
        format!(
            "M1 solutions with t in [1.4, 1.6): {gap1} (uniform ~{per_bin:.0}) [{}]; M2: {gap2} [{}]; re-evaluated median |dy| {dy1:.2e} -> {dy2:.2e} [{}]; Spearman(Az, M1 |dz|) {rho:.3} [{}]",
            ok(depleted),
            ok(populated),
            ok(dy_drop),
            ok(z_grows)
        ),
    )
}

fn criterion8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        n_points: 60,
        seed: 99,
        ..Default::default()
    };
    let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("run{i}.csv"))).collect();
    for p in &paths {
        let out = run_experiment(&cfg).unwrap();
        emit_csv(&out.reports, cfg.method, p).unwrap();
    }
    let a = std::fs::read(&paths[0]).unwrap();
    let b = std::fs::read(&paths[1]).unwrap();
    let identical = a == b;
    let rows = read_rows(&paths[0]).unwrap();
    let reprinted = dir.path().join("reprinted.csv");
    write_rows(&rows, &reprinted).unwrap();
    let parse_print = std::fs::read(&reprinted).unwrap() == a;
    outcome(
        identical && parse_print,
        format!(
            "reruns byte-identical: {identical}; parse-print identity: {parse_print} ({} rows)",
            rows.len()
        ),
    )
}

fn report(n: usize, o: &Outcome) -> bool {
    println!("criterion {n}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() {
    let mut results = vec![criterion1(), criterion2(), criterion3(), criterion4(), criterion5()];
    let start = Instant::now();
    let out = experiment(1000);
    let took = start.elapsed();
    results.push(criterion6(&out, took));
    results.push(criterion7(&out));
    results.push(criterion8());

    let mut failed = Vec::new();
    for (i, o) in results.iter().enumerate() {
        if !report(i + 1, o) {
            failed.push((i + 1).to_string());
        }
    }
    println!("{}/{} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failing: {}", failed.join(", "));
        std::process::exit(1);
    }
}
