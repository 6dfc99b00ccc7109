//! Normalized rotating-frame dynamics of the circular restricted three-body
//! problem.
//!
//! The larger primary sits at `(-mu, 0, 0)` and the smaller one at
//! `(1 - mu, 0, 0)`; distances are in units of the primaries' separation and
//! time is scaled so that the frame rotates at unit rate.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum distance to either primary before a position is treated as singular.
pub const SINGULARITY_RADIUS: f64 = 1e-12;

/// Sun-Earth mass ratio used when none is configured.
pub const SUN_EARTH_MU: f64 = 3.00348e-6;

/// One astronomical unit in km.
pub const AU_KM: f64 = 1.495978707e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LagrangePoint {
    L1,
    L2,
    L3,
    L4,
    L5,
}

impl LagrangePoint {
    pub const ALL: [LagrangePoint; 5] = [Self::L1, Self::L2, Self::L3, Self::L4, Self::L5];

    pub fn is_collinear(self) -> bool {
        matches!(self, Self::L1 | Self::L2 | Self::L3)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LagrangePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.index() + 1)
    }
}

impl FromStr for LagrangePoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().trim_start_matches('L') {
            "1" => Ok(Self::L1),
            "2" => Ok(Self::L2),
            "3" => Ok(Self::L3),
            "4" => Ok(Self::L4),
            "5" => Ok(Self::L5),
            _ => Err(Error::Config(format!("unknown Lagrange point '{s}'"))),
        }
    }
}

/// Halo family; Northern orbits have their dominant z excursion above the
/// plane of the primaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Northern,
    Southern,
}

impl Family {
    pub fn sign(self) -> f64 {
        match self {
            Family::Northern => 1.0,
            Family::Southern => -1.0,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Northern => f.write_str("northern"),
            Family::Southern => f.write_str("southern"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "northern" | "north" | "n" => Ok(Family::Northern),
            "southern" | "south" | "s" => Ok(Family::Southern),
            _ => Err(Error::Config(format!("unknown halo family '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub mu: f64,
    pub lagrange_point: LagrangePoint,
    /// Kilometres per normalized distance unit.
    pub length_unit_km: f64,
    pub family: Family,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            mu: SUN_EARTH_MU,
            lagrange_point: LagrangePoint::L2,
            length_unit_km: AU_KM,
            family: Family::Northern,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 0.5) {
            return Err(Error::Config(format!("mu must lie in (0, 0.5), got {}", self.mu)));
        }
        if !(self.length_unit_km > 0.0 && self.length_unit_km.is_finite()) {
            return Err(Error::Config(format!(
                "length unit must be positive, got {}",
                self.length_unit_km
            )));
        }
        Ok(())
    }
}

/// Position and velocity in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State6 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
}

impl State6 {
    pub fn new(x: f64, y: f64, z: f64, vx: f64, vy: f64, vz: f64) -> Self {
        Self { x, y, z, vx, vy, vz }
    }

    pub fn at_rest(pos: Vector3<f64>) -> Self {
        Self::new(pos.x, pos.y, pos.z, 0.0, 0.0, 0.0)
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn velocity(&self) -> Vector3<f64> {
        Vector3::new(self.vx, self.vy, self.vz)
    }

    pub fn to_vector(&self) -> SVector<f64, 6> {
        SVector::<f64, 6>::from([self.x, self.y, self.z, self.vx, self.vy, self.vz])
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|c| c.is_finite())
    }
}

impl From<SVector<f64, 6>> for State6 {
    fn from(v: SVector<f64, 6>) -> Self {
        Self::from_slice(v.as_slice())
    }
}

fn primary_distances(pos: &Vector3<f64>, mu: f64) -> Result<(f64, f64)> {
    let r1 = ((pos.x + mu).powi(2) + pos.y * pos.y + pos.z * pos.z).sqrt();
    let r2 = ((pos.x - 1.0 + mu).powi(2) + pos.y * pos.y + pos.z * pos.z).sqrt();
    if r1 < SINGULARITY_RADIUS || r2 < SINGULARITY_RADIUS || !(r1.is_finite() && r2.is_finite()) {
        return Err(Error::Singularity {
            x: pos.x,
            y: pos.y,
            z: pos.z,
            radius: SINGULARITY_RADIUS,
        });
    }
    Ok((r1, r2))
}

/// Effective potential `Ū = (x² + y²)/2 + (1 - μ)/r₁ + μ/r₂`.
pub fn effective_potential(pos: &Vector3<f64>, mu: f64) -> Result<f64> {
    let (r1, r2) = primary_distances(pos, mu)?;
    Ok(0.5 * (pos.x * pos.x + pos.y * pos.y) + (1.0 - mu) / r1 + mu / r2)
}

/// Gradient of the effective potential.
pub fn potential_gradient(pos: &Vector3<f64>, mu: f64) -> Result<Vector3<f64>> {
    let (r1, r2) = primary_distances(pos, mu)?;
    let k1 = (1.0 - mu) / (r1 * r1 * r1);
    let k2 = mu / (r2 * r2 * r2);
    Ok(Vector3::new(
        pos.x - k1 * (pos.x + mu) - k2 * (pos.x - 1.0 + mu),
        pos.y - k1 * pos.y - k2 * pos.y,
        -k1 * pos.z - k2 * pos.z,
    ))
}

/// Hessian of the effective potential, used by the variational equations.
pub fn potential_hessian(pos: &Vector3<f64>, mu: f64) -> Result<Matrix3<f64>> {
    let (r1, r2) = primary_distances(pos, mu)?;
    let r1_3 = r1 * r1 * r1;
    let r2_3 = r2 * r2 * r2;
    let r1_5 = r1_3 * r1 * r1;
    let r2_5 = r2_3 * r2 * r2;
    let d1 = Vector3::new(pos.x + mu, pos.y, pos.z);
    let d2 = Vector3::new(pos.x - 1.0 + mu, pos.y, pos.z);
    let diag = -(1.0 - mu) / r1_3 - mu / r2_3;
    let mut h = d1 * d1.transpose() * (3.0 * (1.0 - mu) / r1_5) + d2 * d2.transpose() * (3.0 * mu / r2_5);
    h[(0, 0)] += 1.0 + diag;
    h[(1, 1)] += 1.0 + diag;
    h[(2, 2)] += diag;
    Ok(h)
}

/// Time derivative of a rotating-frame state.
pub fn eom(state: &State6, mu: f64) -> Result<State6> {
    let g = potential_gradient(&state.position(), mu)?;
    Ok(State6::new(
        state.vx,
        state.vy,
        state.vz,
        g.x + 2.0 * state.vy,
        g.y - 2.0 * state.vx,
        g.z,
    ))
}

/// Jacobi-type integral `2Ū - |v|²`, conserved along trajectories.
pub fn jacobi_integral(state: &State6, mu: f64) -> Result<f64> {
    let u = effective_potential(&state.position(), mu)?;
    Ok(2.0 * u - state.velocity().norm_squared())
}

/// The five equilibrium points, indexed by [`LagrangePoint::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangePoints(pub [Vector3<f64>; 5]);

impl LagrangePoints {
    pub fn get(&self, point: LagrangePoint) -> Vector3<f64> {
        self.0[point.index()]
    }
}

const NEWTON_MAX_ITER: usize = 100;
const EQUILIBRIUM_TOL: f64 = 1e-12;

fn axial_gradient(x: f64, mu: f64) -> f64 {
    let d1 = x + mu;
    let d2 = x - 1.0 + mu;
    x - (1.0 - mu) * d1 / d1.abs().powi(3) - mu * d2 / d2.abs().powi(3)
}

fn axial_curvature(x: f64, mu: f64) -> f64 {
    let r1 = (x + mu).abs();
    let r2 = (x - 1.0 + mu).abs();
    1.0 + 2.0 * (1.0 - mu) / r1.powi(3) + 2.0 * mu / r2.powi(3)
}

/// Newton iteration on `∂Ū/∂x` along the axis, falling back to bisection
/// whenever a step leaves the bracket.
fn collinear_root(mut lo: f64, mut hi: f64, guess: f64, mu: f64) -> Result<f64> {
    let f_lo = axial_gradient(lo, mu);
    debug_assert!(f_lo * axial_gradient(hi, mu) < 0.0);
    let rising = f_lo < 0.0;
    let mut x = guess.clamp(lo, hi);
    for _ in 0..NEWTON_MAX_ITER {
        let f = axial_gradient(x, mu);
        if f == 0.0 {
            return Ok(x);
        }
        if (f < 0.0) == rising {
            lo = x;
        } else {
            hi = x;
        }
        let step = f / axial_curvature(x, mu);
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let moved = (next - x).abs();
        x = next;
        if moved <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
    }
    let residual = axial_gradient(x, mu).abs();
    if residual > EQUILIBRIUM_TOL {
        return Err(Error::Convergence {
            what: "collinear Lagrange point",
            iterations: NEWTON_MAX_ITER,
            residual,
        });
    }
    Ok(x)
}

/// Locate all five equilibrium points for mass ratio `mu`.
///
/// L1 lies between the primaries, L2 beyond the smaller primary and L3 beyond
/// the larger one; L4 leads the smaller primary (`y > 0`).
pub fn lagrange_points(mu: f64) -> Result<LagrangePoints> {
    if !(mu > 0.0 && mu < 0.5) {
        return Err(Error::Config(format!("mu must lie in (0, 0.5), got {mu}")));
    }
    let hill = (mu / 3.0).cbrt();
    let eps = 1e-9 * hill;
    let l1 = collinear_root(-mu + eps, 1.0 - mu - eps, 1.0 - mu - hill, mu)?;
    let l2 = collinear_root(1.0 - mu + eps, 2.0, 1.0 - mu + hill, mu)?;
    let l3 = collinear_root(-2.0, -mu - eps, -mu - (1.0 - 7.0 * mu / 12.0), mu)?;
    let h = 0.75f64.sqrt();
    Ok(LagrangePoints([
        Vector3::new(l1, 0.0, 0.0),
        Vector3::new(l2, 0.0, 0.0),
        Vector3::new(l3, 0.0, 0.0),
        Vector3::new(0.5 - mu, h, 0.0),
        Vector3::new(0.5 - mu, -h, 0.0),
    ]))
}
