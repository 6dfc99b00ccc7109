//! Third-order Lindstedt-Poincaré (Richardson) halo approximation about a
//! collinear libration point.
//!
//! Positions are written as trigonometric series in the phase `θ = ω t`,
//!
//! ```text
//! x = Σ x_ijk Ax^i Az^j cos(kθ)
//! y = Σ y_ijk Ax^i Az^j sin(kθ)
//! z = Σ z_ijk Ax^i Az^j cos(kθ)
//! ```
//!
//! in units of `γ`, the distance from the libration point to its nearest
//! primary, then shifted onto the barycentric frame. The phase origin is
//! the `y = 0` crossing on the far side of the libration point
//! (`x = +Ax` at leading order), so `y < 0` over the first half period for
//! both families. See `docs/coefficients.md` for the mapping between the
//! `x_ijk` names and the Richardson constants.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::cr3bp::{lagrange_points, Family, LagrangePoint, State6, SystemConfig};
use crate::error::{Error, Result};

/// One term `coeff · Ax^ax_pow · Az^az_pow · trig(harmonic · θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub ax_pow: i32,
    pub az_pow: i32,
    pub harmonic: i32,
    pub coeff: f64,
}

const fn term(ax_pow: i32, az_pow: i32, harmonic: i32, coeff: f64) -> SeriesTerm {
    SeriesTerm {
        ax_pow,
        az_pow,
        harmonic,
        coeff,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trig {
    Cos,
    Sin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSeries {
    pub trig: Trig,
    pub terms: Vec<SeriesTerm>,
}

impl CoordinateSeries {
    /// Coefficient of `Ax^i Az^j trig(kθ)`, zero when the term is absent.
    pub fn coeff(&self, i: i32, j: i32, k: i32) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.ax_pow == i && t.az_pow == j && t.harmonic == k)
            .map(|t| t.coeff)
            .sum()
    }

    pub fn eval(&self, theta: f64, ax: f64, az: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * ax.powi(t.ax_pow) * az.powi(t.az_pow) * self.basis(t.harmonic, theta))
            .sum()
    }

    /// Derivative with respect to θ.
    pub fn eval_dtheta(&self, theta: f64, ax: f64, az: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let k = t.harmonic as f64;
                let d = match self.trig {
                    Trig::Cos => -k * (k * theta).sin(),
                    Trig::Sin => k * (k * theta).cos(),
                };
                t.coeff * ax.powi(t.ax_pow) * az.powi(t.az_pow) * d
            })
            .sum()
    }

    /// Collapse to per-harmonic weights `w_k` at fixed amplitudes, so the
    /// coordinate is `Σ w_k trig(kθ)`.
    pub fn harmonic_weights(&self, ax: f64, az: f64) -> [f64; 4] {
        let mut w = [0.0; 4];
        for t in &self.terms {
            w[t.harmonic as usize] += t.coeff * ax.powi(t.ax_pow) * az.powi(t.az_pow);
        }
        w
    }

    fn basis(&self, k: i32, theta: f64) -> f64 {
        let arg = k as f64 * theta;
        match self.trig {
            Trig::Cos => arg.cos(),
            Trig::Sin => arg.sin(),
        }
    }
}

/// Constants of the third-order construction for one system and libration
/// point. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpCoefficients {
    pub mu: f64,
    pub point: LagrangePoint,
    pub family: Family,
    pub length_unit_km: f64,
    /// Barycentric x of the libration point, `‖L‖ - μ` with `‖L‖` measured
    /// from the larger primary.
    pub offset: f64,
    /// Distance from the libration point to its nearest primary.
    pub gamma: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub lambda: f64,
    pub k: f64,
    pub delta: f64,
    pub a21: f64,
    pub a22: f64,
    pub a23: f64,
    pub a24: f64,
    pub b21: f64,
    pub b22: f64,
    pub d21: f64,
    pub a31: f64,
    pub a32: f64,
    pub b31: f64,
    pub b32: f64,
    pub d31: f64,
    pub d32: f64,
    pub s1: f64,
    pub s2: f64,
    pub l1: f64,
    pub l2: f64,
    /// Family switch applied to the z-series (`z_011 = delta_n`).
    pub delta_n: f64,
    pub x: CoordinateSeries,
    pub y: CoordinateSeries,
    pub z: CoordinateSeries,
}

fn legendre_constant(n: i32, mu: f64, gamma: f64, point: LagrangePoint) -> f64 {
    let g3 = gamma.powi(3);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    match point {
        LagrangePoint::L1 => (mu + sign * (1.0 - mu) * (gamma / (1.0 - gamma)).powi(n + 1)) / g3,
        LagrangePoint::L2 => sign * (mu + (1.0 - mu) * (gamma / (1.0 + gamma)).powi(n + 1)) / g3,
        LagrangePoint::L3 => (1.0 - mu + mu * (gamma / (1.0 + gamma)).powi(n + 1)) / g3,
        LagrangePoint::L4 | LagrangePoint::L5 => unreachable!(),
    }
}

/// Build the series constants for `config`.
pub fn build_coefficients(config: &SystemConfig) -> Result<LpCoefficients> {
    config.validate()?;
    let point = config.lagrange_point;
    if !point.is_collinear() {
        return Err(Error::NotCollinear(point));
    }
    let mu = config.mu;
    let offset = lagrange_points(mu)?.get(point).x;
    let gamma = match point {
        LagrangePoint::L1 => 1.0 - mu - offset,
        LagrangePoint::L2 => offset - (1.0 - mu),
        _ => -mu - offset,
    };

    let c2 = legendre_constant(2, mu, gamma, point);
    let c3 = legendre_constant(3, mu, gamma, point);
    let c4 = legendre_constant(4, mu, gamma, point);

    let lambda2 = 0.5 * (2.0 - c2 + ((c2 - 2.0).powi(2) + 4.0 * (c2 - 1.0) * (1.0 + 2.0 * c2)).sqrt());
    let lambda = lambda2.sqrt();
    let delta = lambda2 - c2;
    let k = (lambda2 + 1.0 + 2.0 * c2) / (2.0 * lambda);
    let k2 = k * k;

    let d1 = 3.0 * lambda2 / k * (k * (6.0 * lambda2 - 1.0) - 2.0 * lambda);
    let d2 = 8.0 * lambda2 / k * (k * (11.0 * lambda2 - 1.0) - 2.0 * lambda);

    let a21 = 3.0 * c3 * (k2 - 2.0) / (4.0 * (1.0 + 2.0 * c2));
    let a22 = 3.0 * c3 / (4.0 * (1.0 + 2.0 * c2));
    let a23 = -3.0 * c3 * lambda / (4.0 * k * d1) * (3.0 * k2 * k * lambda - 6.0 * k * (k - lambda) + 4.0);
    let a24 = -3.0 * c3 * lambda / (4.0 * k * d1) * (2.0 + 3.0 * k * lambda);
    let b21 = -3.0 * c3 * lambda / (2.0 * d1) * (3.0 * k * lambda - 4.0);
    let b22 = 3.0 * c3 * lambda / d1;
    let d21 = -c3 / (2.0 * lambda2);

    let p = 9.0 * lambda2 + 1.0 - c2;
    let q = 9.0 * lambda2 + 1.0 + 2.0 * c2;
    let a31 = -9.0 * lambda / (4.0 * d2) * (4.0 * c3 * (k * a23 - b21) + k * c4 * (4.0 + k2))
        + p / (2.0 * d2) * (3.0 * c3 * (2.0 * a23 - k * b21) + c4 * (2.0 + 3.0 * k2));
    let a32 = -1.0 / d2
        * (9.0 * lambda / 4.0 * (4.0 * c3 * (k * a24 - b22) + k * c4)
            + 1.5 * p * (c3 * (k * b22 + d21 - 2.0 * a24) - c4));
    let b31 = 3.0 / (8.0 * d2)
        * (8.0 * lambda * (3.0 * c3 * (k * b21 - 2.0 * a23) - c4 * (2.0 + 3.0 * k2))
            + q * (4.0 * c3 * (k * a23 - b21) + k * c4 * (4.0 + k2)));
    let b32 = 1.0 / d2
        * (9.0 * lambda * (c3 * (k * b22 + d21 - 2.0 * a24) - c4)
            + 3.0 / 8.0 * q * (4.0 * c3 * (k * a24 - b22) + k * c4));
    let d31 = 3.0 / (64.0 * lambda2) * (4.0 * c3 * a24 + c4);
    let d32 = 3.0 / (64.0 * lambda2) * (4.0 * c3 * (a23 - d21) + c4 * (4.0 + k2));

    let sden = 2.0 * lambda * (lambda * (1.0 + k2) - 2.0 * k);
    let s1 = (1.5 * c3 * (2.0 * a21 * (k2 - 2.0) - a23 * (k2 + 2.0) - 2.0 * k * b21)
        - 3.0 / 8.0 * c4 * (3.0 * k2 * k2 - 8.0 * k2 + 8.0))
        / sden;
    let s2 = (1.5 * c3 * (2.0 * a22 * (k2 - 2.0) + a24 * (k2 + 2.0) + 2.0 * k * b22 + 5.0 * d21)
        + 3.0 / 8.0 * c4 * (12.0 - k2))
        / sden;
    let l1 = -1.5 * c3 * (2.0 * a21 + a23 + 5.0 * d21) - 3.0 / 8.0 * c4 * (12.0 - k2) + 2.0 * lambda2 * s1;
    let l2 = 1.5 * c3 * (a24 - 2.0 * a22) + 9.0 / 8.0 * c4 + 2.0 * lambda2 * s2;

    // The d21 term pushes the θ = 0 excursion outward when d21 > 0, so the
    // sign of d21 decides which crossing carries the dominant |z|.
    let delta_n = config.family.sign() * if d21 >= 0.0 { 1.0 } else { -1.0 };
    let s = delta_n;

    let x = CoordinateSeries {
        trig: Trig::Cos,
        terms: vec![
            term(2, 0, 0, a21),
            term(0, 2, 0, a22),
            term(1, 0, 1, 1.0),
            term(2, 0, 2, a23),
            term(0, 2, 2, -a24),
            term(3, 0, 3, -a31),
            term(1, 2, 3, a32),
        ],
    };
    let y = CoordinateSeries {
        trig: Trig::Sin,
        terms: vec![
            term(1, 0, 1, -k),
            term(2, 0, 2, b21),
            term(0, 2, 2, -b22),
            term(3, 0, 3, -b31),
            term(1, 2, 3, b32),
        ],
    };
    let z = CoordinateSeries {
        trig: Trig::Cos,
        terms: vec![
            term(1, 1, 0, 3.0 * s * d21),
            term(0, 1, 1, s),
            term(1, 1, 2, -s * d21),
            term(2, 1, 3, s * d32),
            term(0, 3, 3, -s * d31),
        ],
    };

    Ok(LpCoefficients {
        mu,
        point,
        family: config.family,
        length_unit_km: config.length_unit_km,
        offset,
        gamma,
        c2,
        c3,
        c4,
        lambda,
        k,
        delta,
        a21,
        a22,
        a23,
        a24,
        b21,
        b22,
        d21,
        a31,
        a32,
        b31,
        b32,
        d31,
        d32,
        s1,
        s2,
        l1,
        l2,
        delta_n,
        x,
        y,
        z,
    })
}

/// In-plane amplitude locked to `az_nd` by `l1 Ax² + l2 Az² + Δ = 0`.
pub fn in_plane_amplitude(az_nd: f64, l1: f64, l2: f64, delta: f64) -> Result<f64> {
    let radicand = -(delta + l2 * az_nd * az_nd) / l1;
    // Roundoff around the bifurcation boundary.
    let slack = 1e-14 * (delta.abs() + (l2 * az_nd * az_nd).abs()) / l1.abs();
    if radicand.is_finite() && radicand.abs() <= slack {
        Ok(0.0)
    } else if radicand.is_finite() && radicand > 0.0 {
        Ok(radicand.sqrt())
    } else {
        Err(Error::BelowBifurcation { az_nd })
    }
}

/// Out-of-plane amplitude together with its constrained in-plane partner and
/// the corrected frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitude {
    pub az_km: f64,
    pub az_nd: f64,
    pub ax_nd: f64,
    pub omega: f64,
}

impl Amplitude {
    pub fn from_km(az_km: f64, coeffs: &LpCoefficients) -> Result<Self> {
        Self::from_nd(az_km / coeffs.km_per_unit(), coeffs)
    }

    pub fn from_nd(az_nd: f64, coeffs: &LpCoefficients) -> Result<Self> {
        if !(az_nd >= 0.0 && az_nd.is_finite()) {
            return Err(Error::Config(format!("invalid amplitude {az_nd}")));
        }
        let ax_nd = amplitude_constraint(az_nd, coeffs)?;
        Ok(Self {
            az_km: az_nd * coeffs.km_per_unit(),
            az_nd,
            ax_nd,
            omega: coeffs.frequency(ax_nd, az_nd),
        })
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }
}

pub fn amplitude_constraint(az_nd: f64, coeffs: &LpCoefficients) -> Result<f64> {
    in_plane_amplitude(az_nd, coeffs.l1, coeffs.l2, coeffs.delta)
}

impl LpCoefficients {
    /// Kilometres per non-dimensional series amplitude unit (`γ · L`).
    pub fn km_per_unit(&self) -> f64 {
        self.gamma * self.length_unit_km
    }

    /// Corrected angular frequency in normalized time.
    pub fn frequency(&self, ax_nd: f64, az_nd: f64) -> f64 {
        self.lambda * (1.0 + self.s1 * ax_nd * ax_nd + self.s2 * az_nd * az_nd)
    }

    /// Series position in local γ units about the libration point.
    pub fn local_position(&self, t: f64, amp: &Amplitude) -> Vector3<f64> {
        let theta = amp.omega * t;
        Vector3::new(
            self.x.eval(theta, amp.ax_nd, amp.az_nd),
            self.y.eval(theta, amp.ax_nd, amp.az_nd),
            self.z.eval(theta, amp.ax_nd, amp.az_nd),
        )
    }

    pub fn to_barycentric(&self, local: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            self.offset + self.gamma * local.x,
            self.gamma * local.y,
            self.gamma * local.z,
        )
    }

    /// Barycentric rotating-frame position and velocity of the series.
    pub fn state(&self, t: f64, amp: &Amplitude) -> State6 {
        let p = self.eval(t, amp);
        let theta = amp.omega * t;
        let rate = amp.omega * self.gamma;
        State6::new(
            p.x,
            p.y,
            p.z,
            rate * self.x.eval_dtheta(theta, amp.ax_nd, amp.az_nd),
            rate * self.y.eval_dtheta(theta, amp.ax_nd, amp.az_nd),
            rate * self.z.eval_dtheta(theta, amp.ax_nd, amp.az_nd),
        )
    }

    /// Barycentric series position at normalized time `t`.
    pub fn eval(&self, t: f64, amp: &Amplitude) -> Vector3<f64> {
        self.to_barycentric(&self.local_position(t, amp))
    }

    /// Every constant as `(name, value)`, in a stable order.
    pub fn key_values(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = [
            ("mu", self.mu),
            ("offset", self.offset),
            ("gamma", self.gamma),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("lambda", self.lambda),
            ("k", self.k),
            ("delta", self.delta),
            ("a21", self.a21),
            ("a22", self.a22),
            ("a23", self.a23),
            ("a24", self.a24),
            ("b21", self.b21),
            ("b22", self.b22),
            ("d21", self.d21),
            ("a31", self.a31),
            ("a32", self.a32),
            ("b31", self.b31),
            ("b32", self.b32),
            ("d31", self.d31),
            ("d32", self.d32),
            ("s1", self.s1),
            ("s2", self.s2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("delta_n", self.delta_n),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        for (name, series) in [("x", &self.x), ("y", &self.y), ("z", &self.z)] {
            for t in &series.terms {
                out.push((format!("{name}{}{}{}", t.ax_pow, t.az_pow, t.harmonic), t.coeff));
            }
        }
        out
    }
}

/// Barycentric series position (free-function form).
pub fn eval_lp(t: f64, az_nd: f64, coeffs: &LpCoefficients) -> Result<Vector3<f64>> {
    Ok(coeffs.eval(t, &Amplitude::from_nd(az_nd, coeffs)?))
}

/// Series period `2π/ω`.
pub fn lp_period(az_nd: f64, coeffs: &LpCoefficients) -> Result<f64> {
    Ok(Amplitude::from_nd(az_nd, coeffs)?.period())
}
