//! Ground-truth halo orbits: Richardson initial guesses refined by a
//! perpendicular-crossing differential corrector, and random truth points
//! drawn from them.

use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix2, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cr3bp::{self, State6, SystemConfig};
use crate::error::{Error, Result};
use crate::integrate::{self, IntegratorOptions, Trajectory};
use crate::lp_series::{build_coefficients, Amplitude, LpCoefficients};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorSettings {
    /// Bound on |ẋ| and |ż| at the half-period crossing.
    pub tol: f64,
    pub max_iter: usize,
    pub integrator: IntegratorOptions,
    /// Longest time searched for the half-period crossing.
    pub max_half_period: f64,
}

impl Default for CorrectorSettings {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 25,
            integrator: IntegratorOptions::with_tol(1e-12),
            max_half_period: 2.0 * std::f64::consts::PI,
        }
    }
}

/// A corrected periodic orbit in perpendicular-crossing form
/// `(x0, 0, z0, 0, vy0, 0)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HaloOrbit {
    pub az_km: f64,
    pub initial_state: State6,
    pub half_period: f64,
    /// Final crossing state used for the convergence test.
    pub crossing_state: State6,
    pub iterations: usize,
    pub trajectory: Trajectory,
}

impl HaloOrbit {
    pub fn period(&self) -> f64 {
        2.0 * self.half_period
    }

    /// Largest of |y|, |ẋ|, |ż| at the half-period crossing.
    pub fn crossing_residual(&self) -> f64 {
        let s = &self.crossing_state;
        s.y.abs().max(s.vx.abs()).max(s.vz.abs())
    }
}

/// Series state at `t = 0` for the requested amplitude.
pub fn richardson_guess(az_km: f64, coeffs: &LpCoefficients) -> Result<State6> {
    let amp = Amplitude::from_km(az_km, coeffs)?;
    let mut s = coeffs.state(0.0, &amp);
    // Exact zeros by construction; the sine/derivative terms already vanish.
    s.y = 0.0;
    s.vx = 0.0;
    s.vz = 0.0;
    Ok(s)
}

/// Adjust `(x0, vy0)` with `z0` held fixed until the first return to the
/// `y = 0` plane is perpendicular.
pub fn differential_correct(guess: &State6, mu: f64, tol: f64) -> Result<HaloOrbit> {
    let settings = CorrectorSettings {
        tol,
        ..Default::default()
    };
    differential_correct_with(guess, mu, &settings, f64::NAN)
}

pub fn differential_correct_with(
    guess: &State6,
    mu: f64,
    settings: &CorrectorSettings,
    az_km: f64,
) -> Result<HaloOrbit> {
    if !guess.is_finite() {
        return Err(Error::Config("non-finite corrector guess".into()));
    }
    let mut state = State6::new(guess.x, 0.0, guess.z, 0.0, guess.vy, 0.0);
    let mut residual = f64::INFINITY;
    for iteration in 0..=settings.max_iter {
        let (t_half, cross, phi) =
            integrate::propagate_to_xz_crossing(&state, mu, settings.max_half_period, &settings.integrator)?;
        residual = cross.vx.abs().max(cross.vz.abs());
        if residual < settings.tol {
            let trajectory = integrate::integrate_with(&state, mu, (0.0, 2.0 * t_half), &settings.integrator)?;
            return Ok(HaloOrbit {
                az_km,
                initial_state: state,
                half_period: t_half,
                crossing_state: cross,
                iterations: iteration,
                trajectory,
            });
        }
        if iteration == settings.max_iter {
            break;
        }
        let acc = cr3bp::eom(&cross, mu)?;
        if cross.vy == 0.0 {
            break;
        }
        // Columns for (x0, vy0); the crossing time shifts to keep y = 0.
        let m = Matrix2::new(
            phi[(3, 0)] - acc.vx * phi[(1, 0)] / cross.vy,
            phi[(3, 4)] - acc.vx * phi[(1, 4)] / cross.vy,
            phi[(5, 0)] - acc.vz * phi[(1, 0)] / cross.vy,
            phi[(5, 4)] - acc.vz * phi[(1, 4)] / cross.vy,
        );
        let Some(inv) = m.try_inverse() else { break };
        let delta = -inv * Vector2::new(cross.vx, cross.vz);
        state.x += delta[0];
        state.vy += delta[1];
        if !state.is_finite() {
            break;
        }
    }
    Err(Error::Convergence {
        what: "halo differential corrector",
        iterations: settings.max_iter,
        residual,
    })
}

/// A random position on a corrected halo orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthPoint {
    pub position: Vector3<f64>,
    pub true_t: f64,
    pub true_az_km: f64,
    pub orbit_id: usize,
}

/// One row of the orbit catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub orbit_id: usize,
    pub az_km: f64,
    pub x0: f64,
    pub vy0: f64,
    pub z0: f64,
    pub half_period: f64,
}

impl CatalogEntry {
    pub fn from_orbit(orbit_id: usize, orbit: &HaloOrbit) -> Self {
        Self {
            orbit_id,
            az_km: orbit.az_km,
            x0: orbit.initial_state.x,
            vy0: orbit.initial_state.vy,
            z0: orbit.initial_state.z,
            half_period: orbit.half_period,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TruthSample {
    pub points: Vec<TruthPoint>,
    pub catalog: Vec<CatalogEntry>,
    /// Amplitudes whose corrector failed and were redrawn, by sample index.
    pub failures: Vec<(usize, f64)>,
}

const MAX_DRAWS_PER_SAMPLE: usize = 64;

/// Draw `n` orbits with `Az` uniform over `az_range_km`, correct each, and
/// take one point per orbit at a uniformly random time over its period.
///
/// Each sample index owns its own random stream, so the result does not
/// depend on scheduling.
pub fn sample_truth_points(n: usize, seed: u64, az_range_km: (f64, f64), config: &SystemConfig) -> Result<TruthSample> {
    sample_truth_points_with(n, seed, az_range_km, config, &CorrectorSettings::default())
}

pub fn sample_truth_points_with(
    n: usize,
    seed: u64,
    az_range_km: (f64, f64),
    config: &SystemConfig,
    settings: &CorrectorSettings,
) -> Result<TruthSample> {
    if n == 0 {
        return Err(Error::Config("number of truth points must be positive".into()));
    }
    let (lo, hi) = az_range_km;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Config(format!("invalid Az range [{lo}, {hi}] km")));
    }
    let coeffs = build_coefficients(config)?;
    let mu = config.mu;

    let per_index: Vec<Result<(TruthPoint, CatalogEntry, Vec<(usize, f64)>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut failed = Vec::new();
            for _ in 0..MAX_DRAWS_PER_SAMPLE {
                let az_km = rng.gen_range(lo..=hi);
                let u: f64 = rng.gen();
                let orbit =
                    richardson_guess(az_km, &coeffs).and_then(|g| differential_correct_with(&g, mu, settings, az_km));
                match orbit {
                    Ok(orbit) => {
                        let true_t = u * orbit.period();
                        let state = orbit.trajectory.state_at(true_t, mu, &settings.integrator)?;
                        let point = TruthPoint {
                            position: state.position(),
                            true_t,
                            true_az_km: az_km,
                            orbit_id: i,
                        };
                        return Ok((point, CatalogEntry::from_orbit(i, &orbit), failed));
                    }
                    Err(e) if e.is_numerical() => {
                        log::debug!("sample {i}: Az = {az_km} km rejected: {e}");
                        failed.push((i, az_km));
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Convergence {
                what: "truth orbit sampling",
                iterations: MAX_DRAWS_PER_SAMPLE,
                residual: f64::NAN,
            })
        })
        .collect();

    let mut out = TruthSample::default();
    for r in per_index {
        let (p, c, f) = r?;
        out.points.push(p);
        out.catalog.push(c);
        out.failures.extend(f);
    }
    if !out.failures.is_empty() {
        log::info!("{} orbit draws rejected by the corrector", out.failures.len());
    }
    Ok(out)
}

/// Write the orbit catalog as plain CSV.
pub fn write_catalog(entries: &[CatalogEntry], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e))?;
    for e in entries {
        w.serialize(e).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write a trajectory as `t,x,y,z,vx,vy,vz` rows.
pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut run = || -> std::io::Result<()> {
        writeln!(w, "t,x,y,z,vx,vy,vz")?;
        for (t, s) in traj.times.iter().zip(&traj.states) {
            writeln!(w, "{t},{},{},{},{},{},{}", s.x, s.y, s.z, s.vx, s.vy, s.vz)?;
        }
        w.flush()
    };
    run().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (SystemConfig, LpCoefficients) {
        let cfg = SystemConfig::default();
        (cfg, build_coefficients(&cfg).unwrap())
    }

    #[test]
    fn guess_is_in_crossing_form() {
        let (_, c) = setup();
        let g = richardson_guess(100_000.0, &c).unwrap();
        assert_eq!((g.y, g.vx, g.vz), (0.0, 0.0, 0.0));
        assert!(g.z > 0.0 && g.vy != 0.0);
    }

    #[test]
    fn corrects_sun_earth_halo() {
        let (cfg, c) = setup();
        let g = richardson_guess(100_000.0, &c).unwrap();
        let orbit = differential_correct(&g, cfg.mu, 1e-12).unwrap();
        assert!(orbit.crossing_residual() < 1e-12);
        assert_eq!(orbit.initial_state.z, g.z);
        let series_t = Amplitude::from_km(100_000.0, &c).unwrap().period();
        assert!((orbit.period() / series_t - 1.0).abs() < 0.05);

        // Fixed point: a corrected state needs no further corrections.
        let again = differential_correct(&orbit.initial_state, cfg.mu, 1e-12).unwrap();
        assert!(again.iterations <= 1);
        assert!((again.initial_state.to_vector() - orbit.initial_state.to_vector()).norm() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = SystemConfig::default();
        let a = sample_truth_points(4, 7, (100.0, 1.0e6), &cfg).unwrap();
        let b = sample_truth_points(4, 7, (100.0, 1.0e6), &cfg).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.catalog, b.catalog);
        let c = sample_truth_points(4, 8, (100.0, 1.0e6), &cfg).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn sampling_rejects_bad_input() {
        let cfg = SystemConfig::default();
        assert!(sample_truth_points(0, 1, (100.0, 1e6), &cfg).is_err());
        assert!(sample_truth_points(3, 1, (1e6, 100.0), &cfg).is_err());
    }
}
