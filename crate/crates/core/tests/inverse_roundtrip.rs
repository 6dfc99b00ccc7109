use std::f64::consts::PI;

use halotrace::cr3bp::SystemConfig;
use halotrace::inverse::{
    adjust_time, estimate_half_period, position_error_norm, refine_range, solve_time, x_of, Disposition, InverseSolver,
    Query, SolverSettings,
};
use halotrace::lp_series::{build_coefficients, eval_lp, lp_period, Amplitude, LpCoefficients};
use proptest::prelude::*;

fn coeffs() -> LpCoefficients {
    build_coefficients(&SystemConfig::default()).unwrap()
}

/// Times in the first half period, away from the turning points where the
/// inversion loses accuracy to the flat cosine.
fn interior_times(half: f64) -> impl Iterator<Item = f64> {
    (1..20).map(move |i| half * i as f64 / 20.0)
}

#[test]
fn solve_time_recovers_generating_time() {
    let c = coeffs();
    for az_km in [100.0, 1e3, 1e4, 1e5, 3e5, 7e5, 1e6] {
        let amp = Amplitude::from_km(az_km, &c).unwrap();
        let half = 0.5 * amp.period();
        for t_star in interior_times(half) {
            let z1 = c.eval(t_star, &amp).z;
            let ts = solve_time(z1, amp.az_nd, &c).unwrap();
            let best = ts.iter().map(|t| (t - t_star).abs()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10, "Az {az_km} t* {t_star}: {ts:?}");
            assert!(ts.iter().all(|&t| (0.0..=half + 1e-12).contains(&t)));
        }
    }
}

#[test]
fn x_of_matches_generated_x() {
    let c = coeffs();
    for az_km in [1e4, 1e5, 5e5] {
        let amp = Amplitude::from_km(az_km, &c).unwrap();
        for t_star in interior_times(0.5 * amp.period()) {
            let p = c.eval(t_star, &amp);
            let ts = solve_time(p.z, amp.az_nd, &c).unwrap();
            let best = ts
                .iter()
                .map(|&t| (x_of(t, amp.az_nd, &c).unwrap() - p.x).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10, "Az {az_km} t* {t_star}");
        }
    }
}

#[test]
fn x_of_even_about_zero_and_half_period() {
    let c = coeffs();
    let amp = Amplitude::from_km(1e5, &c).unwrap();
    let half = 0.5 * amp.period();
    for dt in [0.1, 0.4, 0.9] {
        let x = |t| x_of(t, amp.az_nd, &c).unwrap();
        assert!((x(dt) - x(-dt)).abs() < 1e-15);
        assert!((x(half + dt) - x(half - dt)).abs() < 1e-14);
    }
}

#[test]
fn x_mismatch_is_large_near_t_one_and_a_half() {
    // Method 1 relies on x alone; where the series x is flat in Az the
    // residual |x1 - g| stays large off the true amplitude.
    let c = coeffs();
    let amp = Amplitude::from_km(1e5, &c).unwrap();
    let near = c.eval(1.5, &amp);
    let off = Amplitude::from_km(1.2e5, &c).unwrap();
    let ts = solve_time(near.z, off.az_nd, &c).unwrap();
    let g = ts.iter().map(|&t| x_of(t, off.az_nd, &c).unwrap());
    let resid = g.map(|g| (near.x - g).abs()).fold(f64::INFINITY, f64::min);
    assert!(resid > 1e-7);
}

#[test]
fn half_period_matches_series_period() {
    let c = coeffs();
    for i in 0..=200 {
        let az_km = 100.0 + (1e6 - 100.0) * i as f64 / 200.0;
        let amp = Amplitude::from_km(az_km, &c).unwrap();
        let h = estimate_half_period(amp.az_nd, &c).unwrap();
        assert!((h - 0.5 * lp_period(amp.az_nd, &c).unwrap()).abs() < 1e-8, "Az {az_km}");
        assert!((h - PI / amp.omega).abs() < 1e-8);
    }
}

#[test]
fn second_half_roundtrip_through_adjust_time() {
    let c = coeffs();
    let amp = Amplitude::from_km(2e5, &c).unwrap();
    let half = 0.5 * amp.period();
    for t_star in interior_times(half).map(|t| t + half) {
        let p = c.eval(t_star, &amp);
        assert!(p.y > 0.0);
        let ts = solve_time(p.z, amp.az_nd, &c).unwrap();
        let best = ts
            .iter()
            .map(|&t| (adjust_time(t, p.y, half) - t_star).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(best < 1e-9, "t* {t_star}");
    }
}

#[test]
fn repeated_refinement_contracts_onto_target() {
    let s = SolverSettings::default();
    let target = 123_456.7;
    let mut range = (s.az_lo_km, s.az_hi_km);
    let n = s.grid_points_per_pass;
    for pass in 0..s.max_passes {
        let step = (range.1 - range.0) / (n - 1) as f64;
        let best = (0..n)
            .map(|i| range.0 + step * i as f64)
            .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
            .unwrap();
        let initial_step = (s.az_hi_km - s.az_lo_km) / (n - 1) as f64;
        assert!((best - target).abs() <= initial_step * s.shrink_factor.powi(-(pass as i32)));
        range = refine_range(best, range, &s);
        assert!(range.0 <= target && target <= range.1);
    }
}

#[test]
fn error_norm_is_recomputable() {
    let c = coeffs();
    let solver = InverseSolver::new(&c, SolverSettings::default()).unwrap();
    let amp = Amplitude::from_km(8e4, &c).unwrap();
    let q = Query {
        position: c.eval(0.8, &amp) + nalgebra::Vector3::new(2e-6, -3e-6, 1e-6),
    };
    let out = solver.trace(&q).unwrap();
    for m in 1..=3u8 {
        let Some(s) = out.get(m).solution else { continue };
        let az_nd = Amplitude::from_km(s.az_km, &c).unwrap().az_nd;
        let p2 = eval_lp(s.t, az_nd, &c).unwrap();
        assert!((position_error_norm(&p2, &q.position) - s.error_norm).abs() < 1e-15);
        assert!((s.per_coordinate_errors.norm() - s.error_norm).abs() < 1e-15);
    }
}

#[test]
fn queries_from_km() {
    let c = coeffs();
    let amp = Amplitude::from_km(1.5e5, &c).unwrap();
    let p = c.eval(0.5, &amp);
    let l = c.length_unit_km;
    let q = Query::from_km(p.x * l, p.y * l, p.z * l, l);
    assert!((q.position - p).norm() < 1e-15);
}

#[test]
fn non_finite_query_rejected() {
    let c = coeffs();
    let solver = InverseSolver::new(&c, SolverSettings::default()).unwrap();
    assert!(solver.method1(&Query::new(f64::NAN, 0.0, 0.0)).is_err());
}

#[test]
fn method2_keeps_good_method1_answers() {
    let c = coeffs();
    let solver = InverseSolver::new(&c, SolverSettings::default()).unwrap();
    let amp = Amplitude::from_km(5e4, &c).unwrap();
    let q = Query {
        position: c.eval(0.4, &amp),
    };
    let m1 = solver.method1(&q).unwrap();
    let m2 = solver.method2(&q).unwrap();
    assert_eq!(m1.disposition, Disposition::Method1Accepted);
    assert_eq!(m1, m2);
}

prop_compose! {
    /// A series point at a random time and amplitude, nudged off the orbit.
    fn near_series_point()(t in 0.0f64..3.0, az_km in 1.0e3f64..8.0e5,
                           dx in -1e-4f64..1e-4, dy in -1e-4f64..1e-4, dz in -1e-5f64..1e-5) -> Query {
        let c = coeffs();
        let amp = Amplitude::from_km(az_km, &c).unwrap();
        Query { position: c.eval(t % amp.period(), &amp) + nalgebra::Vector3::new(dx, dy, dz) }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_invariants(q in near_series_point()) {
        let c = coeffs();
        let solver = InverseSolver::new(&c, SolverSettings::default()).unwrap();
        let all = solver.trace(&q).unwrap();

        // Deterministic.
        prop_assert_eq!(solver.trace(&q).unwrap(), all);

        // Time domain: t in [0, T], and first half iff y1 <= 0.
        for m in 1..=3u8 {
            if let Some(s) = all.get(m).solution {
                let half = estimate_half_period(Amplitude::from_km(s.az_km, &c).unwrap().az_nd, &c).unwrap();
                prop_assert!(s.t >= 0.0 && s.t <= 2.0 * half + 1e-9);
                prop_assert_eq!(s.t <= half + 1e-12, q.position.y <= 0.0);
            }
        }

        // Refined answers never have a larger norm than the Method 1 answer.
        if all.method2.disposition == Disposition::Method2Refined {
            let m1 = all.method1.solution.unwrap();
            prop_assert!(all.method2.solution.unwrap().error_norm <= m1.error_norm);
            prop_assert!(all.method2.solution.unwrap().error_norm <= 1e-4);
        }

        // Method 3 extends Method 2 only on Method-1-unsolved queries.
        if all.method2.is_solved() {
            prop_assert_eq!(all.method3, all.method2);
        }
        if all.method3.disposition == Disposition::Method2Unique {
            prop_assert_eq!(all.method1.disposition, Disposition::Unsolved);
            prop_assert!(all.method3.solution.unwrap().error_norm <= 1e-4);
        }
        if all.method1.is_solved() {
            prop_assert!(all.method1.solution.unwrap().error_norm.is_finite());
        }
    }
}
