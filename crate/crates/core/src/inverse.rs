//! Map a rotating-frame position to the halo orbit `(t, Az)` it lies on.
//!
//! The z-series is a cubic in `c = cos(ωt)` once the multiple-angle terms are
//! expanded, so for a trial amplitude the time follows in closed form
//! (`t = f(z₁, Az)`) and the x-series evaluated there gives `g(z₁, Az)`.
//! The amplitude itself has no closed form and is found by a shrinking
//! grid search, either on `|x₁ - g|` (Method 1) or on the full position
//! error (Methods 2 and 3).

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubic;
use crate::error::{Error, Result};
use crate::lp_series::{Amplitude, LpCoefficients};

/// A point to be traced, in normalized barycentric rotating coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub position: Vector3<f64>,
}

impl Query {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self {
            position: Vector3::new(x, y, z),
        }
    }

    /// From barycentric coordinates in km.
    pub fn from_km(x_km: f64, y_km: f64, z_km: f64, length_unit_km: f64) -> Self {
        Self::new(x_km / length_unit_km, y_km / length_unit_km, z_km / length_unit_km)
    }

    fn validate(&self) -> Result<()> {
        if self.position.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("non-finite query {:?}", self.position)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Disposition {
    /// Method 1 answer, kept by Method 2 when its error norm is small enough.
    Method1Accepted,
    /// Method 1 answer replaced by the error-norm search.
    Method2Refined,
    /// Found by the error-norm search for a point Method 1 could not solve.
    Method2Unique,
    /// Method 1 answer that the error-norm search could not improve enough.
    Discarded,
    Unsolved,
}

impl Disposition {
    pub fn is_solved(self) -> bool {
        matches!(self, Self::Method1Accepted | Self::Method2Refined | Self::Method2Unique)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Method1Accepted => "method1_accepted",
            Self::Method2Refined => "method2_refined",
            Self::Method2Unique => "method2_unique",
            Self::Discarded => "discarded",
            Self::Unsolved => "unsolved",
        }
    }

    pub fn from_label(s: &str) -> Result<Self> {
        Ok(match s {
            "method1_accepted" => Self::Method1Accepted,
            "method2_refined" => Self::Method2Refined,
            "method2_unique" => Self::Method2Unique,
            "discarded" => Self::Discarded,
            "unsolved" => Self::Unsolved,
            other => return Err(Error::Parse(format!("unknown disposition '{other}'"))),
        })
    }
}

/// A recovered `(t, Az)` pair and how well it reproduces the query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaloSolution {
    pub t: f64,
    pub az_km: f64,
    pub error_norm: f64,
    /// Reconstructed minus queried position.
    pub per_coordinate_errors: Vector3<f64>,
    pub disposition: Disposition,
}

/// Result of one method on one query. `solution` is present for every
/// disposition except `Unsolved`; for `Discarded` it holds the rejected
/// Method 1 answer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub disposition: Disposition,
    pub solution: Option<HaloSolution>,
}

impl MethodOutcome {
    pub const UNSOLVED: MethodOutcome = MethodOutcome {
        disposition: Disposition::Unsolved,
        solution: None,
    };

    fn with(disposition: Disposition, mut solution: HaloSolution) -> Self {
        solution.disposition = disposition;
        Self {
            disposition,
            solution: Some(solution),
        }
    }

    pub fn is_solved(&self) -> bool {
        self.disposition.is_solved()
    }

    /// The accepted solution, if any (never a discarded one).
    pub fn accepted(&self) -> Option<&HaloSolution> {
        self.solution.as_ref().filter(|_| self.is_solved())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub az_lo_km: f64,
    pub az_hi_km: f64,
    pub grid_points_per_pass: usize,
    pub shrink_factor: f64,
    pub max_passes: usize,
    /// Acceptance bound on |x₁ - g(z₁, Az)| (Method 1).
    pub tol_x: f64,
    /// Error norm above which Method 2 re-evaluates a Method 1 answer.
    pub tol_norm_trigger: f64,
    /// Acceptance bound on the position error norm (Methods 2 and 3).
    pub tol_norm_accept: f64,
    /// Half-width of the window around π/2 searched for the half period.
    pub halfperiod_bracket_width: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            az_lo_km: 100.0,
            az_hi_km: 1.0e6,
            grid_points_per_pass: 512,
            shrink_factor: 10.0,
            max_passes: 8,
            tol_x: 1e-7,
            tol_norm_trigger: 1e-3,
            tol_norm_accept: 1e-4,
            halfperiod_bracket_width: 0.5,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.az_lo_km > 0.0 && self.az_lo_km < self.az_hi_km && self.az_hi_km.is_finite()) {
            return bad("need 0 < az_lo_km < az_hi_km");
        }
        if self.grid_points_per_pass < 2 {
            return bad("grid_points_per_pass must be at least 2");
        }
        if !(self.shrink_factor > 1.0) {
            return bad("shrink_factor must exceed 1");
        }
        if self.max_passes == 0 {
            return bad("max_passes must be positive");
        }
        if !(self.tol_x > 0.0 && self.tol_norm_trigger > 0.0 && self.tol_norm_accept > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.halfperiod_bracket_width > 0.0) {
            return bad("halfperiod_bracket_width must be positive");
        }
        Ok(())
    }
}

/// Candidate times in `[0, T/2]` at which the z-series reaches `z1`.
pub fn solve_time(z1: f64, az_nd: f64, coeffs: &LpCoefficients) -> Result<Vec<f64>> {
    let amp = Amplitude::from_nd(az_nd, coeffs)?;
    solve_time_amp(z1, &amp, coeffs)
}

pub(crate) fn solve_time_amp(z1: f64, amp: &Amplitude, coeffs: &LpCoefficients) -> Result<Vec<f64>> {
    let [w0, w1, w2, w3] = coeffs.z.harmonic_weights(amp.ax_nd, amp.az_nd);
    let target = z1 / coeffs.gamma;
    // cos2θ = 2c² - 1, cos3θ = 4c³ - 3c
    let roots = cubic::real_roots(4.0 * w3, 2.0 * w2, w1 - 3.0 * w3, w0 - w2 - target);
    let slack = 1e-9;
    let mut times: Vec<f64> = roots
        .into_iter()
        .filter(|c| c.abs() <= 1.0 + slack)
        .map(|c| c.clamp(-1.0, 1.0).acos() / amp.omega)
        .collect();
    if times.is_empty() {
        return Err(Error::NoTimeSolution { z1, az_nd: amp.az_nd });
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(times)
}

/// Barycentric x of the series at `t_choice`: `g(z₁, Az)` when `t_choice`
/// comes from [`solve_time`].
pub fn x_of(t_choice: f64, az_nd: f64, coeffs: &LpCoefficients) -> Result<f64> {
    let amp = Amplitude::from_nd(az_nd, coeffs)?;
    Ok(x_of_amp(t_choice, &amp, coeffs))
}

fn x_of_amp(t: f64, amp: &Amplitude, coeffs: &LpCoefficients) -> f64 {
    coeffs.offset + coeffs.gamma * coeffs.x.eval(amp.omega * t, amp.ax_nd, amp.az_nd)
}

fn y_of_amp(t: f64, amp: &Amplitude, coeffs: &LpCoefficients) -> f64 {
    coeffs.y.eval(amp.omega * t, amp.ax_nd, amp.az_nd)
}

const HALF_PERIOD_SCAN_STEP: f64 = 1e-3;

/// Half period from the zero of the series' y nearest π/2.
pub fn estimate_half_period(az_nd: f64, coeffs: &LpCoefficients) -> Result<f64> {
    estimate_half_period_with(az_nd, coeffs, SolverSettings::default().halfperiod_bracket_width)
}

pub fn estimate_half_period_with(az_nd: f64, coeffs: &LpCoefficients, width: f64) -> Result<f64> {
    let amp = Amplitude::from_nd(az_nd, coeffs)?;
    half_period_amp(&amp, coeffs, width)
}

pub(crate) fn half_period_amp(amp: &Amplitude, coeffs: &LpCoefficients, width: f64) -> Result<f64> {
    let y = |t: f64| y_of_amp(t, amp, coeffs);
    for w in [width, 2.0 * width] {
        if let Some((a, b)) = nearest_sign_change(&y, FRAC_PI_2, w) {
            return Ok(bisect(&y, a, b));
        }
    }
    Err(Error::NoHalfPeriod {
        center: FRAC_PI_2,
        width: 2.0 * width,
    })
}

/// Scan outward from `center`, alternating sides, for the closest interval
/// on which `f` changes sign.
fn nearest_sign_change(f: &dyn Fn(f64) -> f64, center: f64, width: f64) -> Option<(f64, f64)> {
    let steps = (width / HALF_PERIOD_SCAN_STEP).ceil() as usize;
    let f_center = f(center);
    if f_center == 0.0 {
        return Some((center, center));
    }
    let (mut right_prev, mut left_prev) = (f_center, f_center);
    for i in 1..=steps {
        let r = center + (i as f64 * HALF_PERIOD_SCAN_STEP).min(width);
        let l = center - (i as f64 * HALF_PERIOD_SCAN_STEP).min(width);
        let (fr, fl) = (f(r), f(l));
        let r0 = center + ((i - 1) as f64 * HALF_PERIOD_SCAN_STEP);
        let l0 = center - ((i - 1) as f64 * HALF_PERIOD_SCAN_STEP);
        if fr == 0.0 || fr.signum() != right_prev.signum() {
            return Some((r0, r));
        }
        if fl == 0.0 || fl.signum() != left_prev.signum() {
            return Some((l, l0));
        }
        right_prev = fr;
        left_prev = fl;
    }
    None
}

fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    while b - a > 1e-12 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Move a first-half time into the second half when `y1 > 0`.
pub fn adjust_time(t: f64, y1: f64, half_period: f64) -> f64 {
    if y1 <= 0.0 {
        t
    } else {
        2.0 * half_period - t
    }
}

/// Euclidean distance between two positions.
pub fn position_error_norm(p1: &Vector3<f64>, p2: &Vector3<f64>) -> f64 {
    (p1 - p2).norm()
}

/// Range for the next pass: centred on `best_az`, `shrink_factor` times
/// narrower, clipped to the configured bounds.
pub fn refine_range(best_az: f64, current: (f64, f64), settings: &SolverSettings) -> (f64, f64) {
    let half = 0.5 * (current.1 - current.0) / settings.shrink_factor;
    (
        (best_az - half).max(settings.az_lo_km),
        (best_az + half).min(settings.az_hi_km),
    )
}

/// Best grid value found by a search and whether it met the tolerance.
#[derive(Debug, Clone, Copy)]
struct SearchResult<P> {
    az_km: f64,
    objective: f64,
    payload: P,
    accepted: bool,
}

/// Shrinking-grid minimisation over `[az_lo, az_hi]`. The best value is kept
/// across passes; the search stops as soon as it falls under `tol`.
fn grid_search<P: Copy>(
    settings: &SolverSettings,
    tol: f64,
    objective: impl Fn(f64) -> Option<(f64, P)>,
) -> Option<SearchResult<P>> {
    let mut range = (settings.az_lo_km, settings.az_hi_km);
    let mut best: Option<SearchResult<P>> = None;
    let n = settings.grid_points_per_pass;
    for _pass in 0..settings.max_passes {
        let step = (range.1 - range.0) / (n - 1) as f64;
        for i in 0..n {
            let az = if i + 1 == n { range.1 } else { range.0 + step * i as f64 };
            if let Some((value, payload)) = objective(az) {
                if best.map_or(true, |b| value < b.objective) {
                    best = Some(SearchResult {
                        az_km: az,
                        objective: value,
                        payload,
                        accepted: false,
                    });
                }
            }
        }
        let b = best.as_mut()?;
        if b.objective <= tol {
            b.accepted = true;
            return best;
        }
        range = refine_range(b.az_km, range, settings);
    }
    best
}

/// Inverse-solver front end bound to one set of series constants.
#[derive(Debug, Clone, Copy)]
pub struct InverseSolver<'a> {
    pub coeffs: &'a LpCoefficients,
    pub settings: SolverSettings,
}

/// All three methods on one query; Method 3 reuses the work of 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSet {
    pub method1: MethodOutcome,
    pub method2: MethodOutcome,
    pub method3: MethodOutcome,
}

impl MethodSet {
    pub fn get(&self, method: u8) -> &MethodOutcome {
        match method {
            1 => &self.method1,
            2 => &self.method2,
            _ => &self.method3,
        }
    }
}

impl<'a> InverseSolver<'a> {
    pub fn new(coeffs: &'a LpCoefficients, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self { coeffs, settings })
    }

    fn amplitude(&self, az_km: f64) -> Option<Amplitude> {
        Amplitude::from_km(az_km, self.coeffs).ok()
    }

    /// Reconstruct the series position at `(t, Az)` and compare with the query.
    pub fn evaluate(&self, query: &Query, t: f64, az_km: f64) -> Result<HaloSolution> {
        let amp = Amplitude::from_km(az_km, self.coeffs)?;
        Ok(self.solution_at(query, t, &amp))
    }

    fn solution_at(&self, query: &Query, t: f64, amp: &Amplitude) -> HaloSolution {
        let p2 = self.coeffs.eval(t, amp);
        let d = p2 - query.position;
        HaloSolution {
            t,
            az_km: amp.az_km,
            error_norm: position_error_norm(&p2, &query.position),
            per_coordinate_errors: d,
            disposition: Disposition::Unsolved,
        }
    }

    /// Minimise |x₁ - g(z₁, Az)| over Az; among multiple time roots the one
    /// with the smallest |x₁ - g| is used.
    pub fn method1(&self, query: &Query) -> Result<MethodOutcome> {
        query.validate()?;
        let (x1, y1, z1) = (query.position.x, query.position.y, query.position.z);
        let found = grid_search(&self.settings, self.settings.tol_x, |az_km| {
            let amp = self.amplitude(az_km)?;
            let times = solve_time_amp(z1, &amp, self.coeffs).ok()?;
            times
                .into_iter()
                .map(|t| ((x1 - x_of_amp(t, &amp, self.coeffs)).abs(), t))
                .min_by(|a, b| a.0.total_cmp(&b.0))
        });
        let Some(found) = found.filter(|f| f.accepted) else {
            return Ok(MethodOutcome::UNSOLVED);
        };
        let amp = Amplitude::from_km(found.az_km, self.coeffs)?;
        let half = half_period_amp(&amp, self.coeffs, self.settings.halfperiod_bracket_width)?;
        let t = adjust_time(found.payload, y1, half);
        Ok(MethodOutcome::with(
            Disposition::Method1Accepted,
            self.solution_at(query, t, &amp),
        ))
    }

    /// Minimise the full position error norm over Az (the search used by
    /// Methods 2 and 3); among time roots the one with the smallest norm wins.
    pub fn norm_search(&self, query: &Query) -> Result<Option<HaloSolution>> {
        query.validate()?;
        let y1 = query.position.y;
        let z1 = query.position.z;
        let width = self.settings.halfperiod_bracket_width;
        let found = grid_search(&self.settings, self.settings.tol_norm_accept, |az_km| {
            let amp = self.amplitude(az_km)?;
            let times = solve_time_amp(z1, &amp, self.coeffs).ok()?;
            let half = half_period_amp(&amp, self.coeffs, width).ok()?;
            times
                .into_iter()
                .map(|t| {
                    let t = adjust_time(t, y1, half);
                    (position_error_norm(&self.coeffs.eval(t, &amp), &query.position), t)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
        });
        Ok(found.filter(|f| f.accepted).map(|f| {
            let amp = Amplitude::from_km(f.az_km, self.coeffs).expect("amplitude valid during search");
            self.solution_at(query, f.payload, &amp)
        }))
    }

    /// Method 1, re-evaluated by the norm search when its error norm exceeds
    /// the trigger tolerance.
    pub fn method2(&self, query: &Query) -> Result<MethodOutcome> {
        let m1 = self.method1(query)?;
        self.method2_from(query, &m1)
    }

    fn method2_from(&self, query: &Query, m1: &MethodOutcome) -> Result<MethodOutcome> {
        let Some(first) = m1.accepted() else {
            return Ok(MethodOutcome::UNSOLVED);
        };
        if first.error_norm <= self.settings.tol_norm_trigger {
            return Ok(*m1);
        }
        Ok(match self.norm_search(query)? {
            Some(s) if s.error_norm <= first.error_norm => MethodOutcome::with(Disposition::Method2Refined, s),
            _ => MethodOutcome::with(Disposition::Discarded, *first),
        })
    }

    /// Method 2, plus the norm search on queries Method 1 left unsolved.
    pub fn method3(&self, queries: &[Query]) -> Result<Vec<MethodOutcome>> {
        queries
            .par_iter()
            .map(|q| self.trace(q).map(|all| all.method3))
            .collect()
    }

    /// Run all three methods on one query.
    pub fn trace(&self, query: &Query) -> Result<MethodSet> {
        let method1 = self.method1(query)?;
        let method2 = self.method2_from(query, &method1)?;
        let method3 = if method1.is_solved() {
            method2
        } else {
            match self.norm_search(query)? {
                Some(s) => MethodOutcome::with(Disposition::Method2Unique, s),
                None => MethodOutcome::UNSOLVED,
            }
        };
        Ok(MethodSet {
            method1,
            method2,
            method3,
        })
    }
}
