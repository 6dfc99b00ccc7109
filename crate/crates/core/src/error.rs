use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("position ({x}, {y}, {z}) is within {radius:e} of a primary")]
    Singularity { x: f64, y: f64, z: f64, radius: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("{0:?} is not a collinear Lagrange point")]
    NotCollinear(crate::cr3bp::LagrangePoint),

    #[error("amplitude Az = {az_nd} (non-dimensional) is below the halo bifurcation threshold")]
    BelowBifurcation { az_nd: f64 },

    #[error("z = {z1} is not reachable on the series orbit with Az = {az_nd}")]
    NoTimeSolution { z1: f64, az_nd: f64 },

    #[error("no sign change of y found around t = {center} (half-width {width})")]
    NoHalfPeriod { center: f64, width: f64 },

    #[error("event not found before t = {t_end}")]
    EventNotFound { t_end: f64 },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed record: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }

    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::Config(_) | Error::NotCollinear(_) | Error::Io { .. } | Error::Parse(_)
        )
    }
}
