//! Adaptive Dormand-Prince 5(4) integration with exact end-point hitting and
//! event location, plus the CR3BP-specific propagation entry points.

use nalgebra::{Matrix6, SVector};
use serde::{Deserialize, Serialize};

use crate::cr3bp::{self, State6};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on |h|; `None` leaves it to the span.
    pub max_step: Option<f64>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self::with_tol(1e-12)
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            max_steps: 5_000_000,
            max_step: None,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand-Prince step. Returns the fifth-order solution, its derivative
/// (first-same-as-last) and the embedded error estimate.
#[allow(clippy::type_complexity)]
fn dp_step<const N: usize, F>(
    f: &F,
    t: f64,
    y: &SVector<f64, N>,
    k1: &SVector<f64, N>,
    h: f64,
) -> Result<(SVector<f64, N>, SVector<f64, N>, SVector<f64, N>)>
where
    F: Fn(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let mut k: [SVector<f64, N>; 7] = [*k1; 7];
    for stage in 1..7 {
        let mut yi = *y;
        for (j, kj) in k.iter().enumerate().take(stage) {
            let a = A[stage][j];
            if a != 0.0 {
                yi.axpy(h * a, kj, 1.0);
            }
        }
        if stage == 6 {
            k[6] = f(t + h, &yi)?;
            let mut err = SVector::<f64, N>::zeros();
            for (e, kj) in E.iter().zip(k.iter()) {
                err.axpy(h * e, kj, 1.0);
            }
            return Ok((yi, k[6], err));
        }
        k[stage] = f(t + C[stage] * h, &yi)?;
    }
    unreachable!()
}

fn error_ratio<const N: usize>(
    err: &SVector<f64, N>,
    y0: &SVector<f64, N>,
    y1: &SVector<f64, N>,
    opts: &IntegratorOptions,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / N as f64).sqrt()
}

/// Outcome of a propagation: every accepted node, the last one exactly at the
/// requested end time (or at the located event).
#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<SVector<f64, N>>,
    pub event: bool,
}

impl<const N: usize> Solution<N> {
    pub fn last(&self) -> (f64, SVector<f64, N>) {
        (*self.times.last().unwrap(), *self.states.last().unwrap())
    }
}

/// Scalar event function evaluated on (t, y).
pub trait EventFn<const N: usize>: Fn(f64, &SVector<f64, N>) -> f64 {}
impl<const N: usize, G: Fn(f64, &SVector<f64, N>) -> f64> EventFn<N> for G {}

/// Integrate `f` from `(t0, y0)` to `t_end`. When `event` is given the run
/// stops at the first sign change of the event function, located to
/// roundoff by re-stepping from the last accepted node.
pub fn propagate<const N: usize, F>(
    f: &F,
    t0: f64,
    y0: SVector<f64, N>,
    t_end: f64,
    opts: &IntegratorOptions,
    event: Option<&dyn Fn(f64, &SVector<f64, N>) -> f64>,
    keep_nodes: bool,
) -> Result<Solution<N>>
where
    F: Fn(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let span = t_end - t0;
    let mut times = vec![t0];
    let mut states = vec![y0];
    if span == 0.0 {
        return Ok(Solution {
            times,
            states,
            event: false,
        });
    }
    let dir = span.signum();
    let h_cap = opts.max_step.unwrap_or(span.abs()).min(span.abs());
    let mut h = dir * (1e-3f64).min(h_cap);
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y)?;
    let mut g_prev = event.map(|g| g(t, &y));
    let mut steps = 0usize;

    loop {
        if steps >= opts.max_steps {
            return Err(Error::Convergence {
                what: "integrator step budget",
                iterations: steps,
                residual: (t_end - t).abs(),
            });
        }
        steps += 1;
        let remaining = t_end - t;
        let last = h.abs() >= remaining.abs();
        if last {
            h = remaining;
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) && !last {
            return Err(Error::StepUnderflow { t, h });
        }
        let (y_new, k_new, err) = match dp_step(f, t, &y, &k1, h) {
            Ok(v) => v,
            Err(e @ Error::Singularity { .. }) => {
                // Probe near a primary: shrink and retry until underflow.
                h *= 0.25;
                if h.abs() < 1e-14 * t.abs().max(1.0) {
                    return Err(e);
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let ratio = error_ratio(&err, &y, &y_new, opts);
        if !ratio.is_finite() || ratio > 1.0 {
            let shrink = if ratio.is_finite() {
                (0.9 * ratio.powf(-0.2)).max(0.2)
            } else {
                0.2
            };
            h *= shrink;
            if h.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, h });
            }
            continue;
        }

        let t_new = if last { t_end } else { t + h };
        if let (Some(g), Some(gp)) = (event, g_prev) {
            let g_new = g(t_new, &y_new);
            if gp != 0.0 && g_new.signum() != gp.signum() {
                let (te, ye) = locate_event(f, g, t, &y, &k1, t_new - t, gp, g_new)?;
                if keep_nodes || times.len() == 1 {
                    times.push(te);
                    states.push(ye);
                } else {
                    times[1] = te;
                    states[1] = ye;
                }
                return Ok(Solution {
                    times,
                    states,
                    event: true,
                });
            }
            g_prev = Some(g_new);
        }

        t = t_new;
        y = y_new;
        k1 = k_new;
        if keep_nodes || times.len() == 1 {
            times.push(t);
            states.push(y);
        } else {
            times[1] = t;
            states[1] = y;
        }
        if last {
            return Ok(Solution {
                times,
                states,
                event: false,
            });
        }
        let grow = if ratio == 0.0 {
            5.0
        } else {
            (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = dir * (h.abs() * grow).min(h_cap);
    }
}

/// Root of the event function inside one accepted step, found with the
/// Illinois variant of regula falsi on partial steps from the step start.
#[allow(clippy::too_many_arguments)]
fn locate_event<const N: usize, F>(
    f: &F,
    g: &dyn Fn(f64, &SVector<f64, N>) -> f64,
    t: f64,
    y: &SVector<f64, N>,
    k1: &SVector<f64, N>,
    h: f64,
    g0: f64,
    g1: f64,
) -> Result<(f64, SVector<f64, N>)>
where
    F: Fn(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let (mut a, mut ga) = (0.0, g0);
    let (mut b, mut gb) = (h, g1);
    let mut best = (b, dp_step(f, t, y, k1, b)?.0);
    let mut side = 0i8;
    for _ in 0..200 {
        let s = (a * gb - b * ga) / (gb - ga);
        let ys = dp_step(f, t, y, k1, s)?.0;
        let gs = g(t + s, &ys);
        best = (s, ys);
        if gs == 0.0 || (b - a).abs() <= 2.0 * f64::EPSILON * (t.abs() + h.abs()) {
            break;
        }
        if gs.signum() == gb.signum() {
            b = s;
            gb = gs;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = s;
            ga = gs;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
        if gs.abs() < 1e-15 {
            break;
        }
    }
    Ok((t + best.0, best.1))
}

/// Sampled trajectory in the rotating frame.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State6>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> Option<(f64, State6)> {
        Some((*self.times.first()?, *self.states.first()?))
    }

    pub fn last(&self) -> Option<(f64, State6)> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    /// Index of the last node at or before `t` (nodes ordered in time).
    pub fn node_before(&self, t: f64) -> usize {
        self.times.partition_point(|&ti| ti <= t).saturating_sub(1)
    }

    /// State at an arbitrary time, obtained by integrating from the nearest
    /// earlier node.
    pub fn state_at(&self, t: f64, mu: f64, opts: &IntegratorOptions) -> Result<State6> {
        let i = self.node_before(t);
        propagate_state(&self.states[i], mu, self.times[i], t, opts)
    }
}

fn cr3bp_rhs(mu: f64) -> impl Fn(f64, &SVector<f64, 6>) -> Result<SVector<f64, 6>> {
    move |_t, y| Ok(cr3bp::eom(&State6::from(*y), mu)?.to_vector())
}

/// Integrate the CR3BP equations over `[t_span.0, t_span.1]` keeping every
/// accepted step. Backward spans are allowed; nodes then run backwards in time.
pub fn integrate(state0: &State6, mu: f64, t_span: (f64, f64), tol: f64) -> Result<Trajectory> {
    integrate_with(state0, mu, t_span, &IntegratorOptions::with_tol(tol))
}

pub fn integrate_with(state0: &State6, mu: f64, t_span: (f64, f64), opts: &IntegratorOptions) -> Result<Trajectory> {
    validate_span(t_span, opts)?;
    let sol = propagate(&cr3bp_rhs(mu), t_span.0, state0.to_vector(), t_span.1, opts, None, true)?;
    Ok(Trajectory {
        times: sol.times,
        states: sol.states.into_iter().map(State6::from).collect(),
    })
}

fn validate_span(t_span: (f64, f64), opts: &IntegratorOptions) -> Result<()> {
    if !(t_span.0.is_finite() && t_span.1.is_finite()) {
        return Err(Error::Config(format!("non-finite time span {t_span:?}")));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::Config("integrator tolerances must be positive".into()));
    }
    Ok(())
}

/// Final state only.
pub fn propagate_state(state0: &State6, mu: f64, t0: f64, t1: f64, opts: &IntegratorOptions) -> Result<State6> {
    validate_span((t0, t1), opts)?;
    let sol = propagate(&cr3bp_rhs(mu), t0, state0.to_vector(), t1, opts, None, false)?;
    Ok(State6::from(sol.last().1))
}

fn variational_rhs(mu: f64) -> impl Fn(f64, &SVector<f64, 42>) -> Result<SVector<f64, 42>> {
    move |_t, y| {
        let s = State6::from_slice(&y.as_slice()[..6]);
        let d = cr3bp::eom(&s, mu)?;
        let h = cr3bp::potential_hessian(&s.position(), mu)?;
        let mut a = Matrix6::<f64>::zeros();
        a[(0, 3)] = 1.0;
        a[(1, 4)] = 1.0;
        a[(2, 5)] = 1.0;
        a.fixed_view_mut::<3, 3>(3, 0).copy_from(&h);
        a[(3, 4)] = 2.0;
        a[(4, 3)] = -2.0;
        let phi = Matrix6::from_column_slice(&y.as_slice()[6..]);
        let dphi = a * phi;
        let mut out = SVector::<f64, 42>::zeros();
        out.as_mut_slice()[..6].copy_from_slice(d.to_vector().as_slice());
        out.as_mut_slice()[6..].copy_from_slice(dphi.as_slice());
        Ok(out)
    }
}

/// Propagate state and state-transition matrix from `t0` until the first
/// crossing of the plane `y = 0` after departure, or fail at `t_max`.
pub fn propagate_to_xz_crossing(
    state0: &State6,
    mu: f64,
    t_max: f64,
    opts: &IntegratorOptions,
) -> Result<(f64, State6, Matrix6<f64>)> {
    let mut y0 = SVector::<f64, 42>::zeros();
    y0.as_mut_slice()[..6].copy_from_slice(state0.to_vector().as_slice());
    y0.as_mut_slice()[6..].copy_from_slice(Matrix6::<f64>::identity().as_slice());
    // A start on the plane has g = 0; the event then triggers on the first
    // sign change after the state leaves it.
    let rhs = variational_rhs(mu);
    let start_sign = cr3bp::eom(state0, mu)?.y.signum();
    let event = move |_t: f64, y: &SVector<f64, 42>| {
        if y[1] == 0.0 {
            start_sign
        } else {
            y[1]
        }
    };
    let sol = propagate(&rhs, 0.0, y0, t_max, opts, Some(&event), false)?;
    if !sol.event {
        return Err(Error::EventNotFound { t_end: t_max });
    }
    let (t, y) = sol.last();
    let state = State6::from_slice(&y.as_slice()[..6]);
    let phi = Matrix6::from_column_slice(&y.as_slice()[6..]);
    Ok((t, state, phi))
}
