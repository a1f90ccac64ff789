use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("quadrature did not converge after {subdivisions} subdivisions (best estimate {estimate:e} +/- {error:e})")]
    QuadratureNonConvergence {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("pole at {pole} lies on or outside the integration interval [{a}, {b}]")]
    PoleOnBoundary { pole: f64, a: f64, b: f64 },

    #[error("residue estimate at pole {pole} is unstable (h: {coarse:e}, h/2: {fine:e})")]
    UnstableResidue { pole: f64, coarse: f64, fine: f64 },

    #[error("mechanical susceptibility is singular at omega = {omega}")]
    SingularSusceptibility { omega: f64 },

    #[error("effective-frequency radicand is non-positive ({radicand:e}); the bath shift overdamps the resonance")]
    OverdampedShift { radicand: f64 },

    #[error("no transduction: C(omega) vanishes at omega = {omega}")]
    NoTransduction { omega: f64 },

    #[error("operation requires a {expected} spectral density")]
    WrongBathKind { expected: &'static str },

    #[error("frequency {omega} lies outside the grid [{start}, {stop}]")]
    OutsideGrid { omega: f64, start: f64, stop: f64 },

    #[error("time-domain integration diverged at t = {time:e}")]
    Divergence { time: f64 },

    #[error("analysis window too short: {reason}")]
    WindowTooShort { reason: String },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
