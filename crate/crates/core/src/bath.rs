//! Mechanical-bath spectral densities and the quantities derived from them.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, RealSpectrum};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Coupling strengths quoted alongside the γ_eff = π×10⁻³ ω_m comparison
/// (ω_0 = 10 ω_m). They do not satisfy γ_eff = πJ(ω_m); use
/// [`calibrate_eta`] to get the values that do.
pub const QUOTED_ETA_SUB_OHMIC: f64 = 5.5e-3;
pub const QUOTED_ETA_OHMIC: f64 = 1.2e-2;
pub const QUOTED_ETA_SUPER_OHMIC: f64 = 6.1e-2;

/// Spectral density J(ω) of the mechanical bath. J vanishes for ω ≤ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralDensity {
    /// Flat bath, J = γ_m / π on ω > 0.
    Markovian { gamma_m: f64 },
    /// J = η ω (ω/ω_0)^(s-1) e^(-ω/ω_0).
    Ohmic { eta: f64, s: f64, omega_0: f64 },
    /// J = j_anchor (ω/omega_ref)^k on [omega_lo, omega_hi], zero elsewhere.
    /// `omega_ref` is the mechanical frequency, so `j_anchor` = J(ω_m).
    CutoffPowerLaw {
        j_anchor: f64,
        k: f64,
        omega_lo: f64,
        omega_hi: f64,
        omega_ref: f64,
    },
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0 (got {v})")))
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be >= 0 (got {v})")))
    }
}

impl SpectralDensity {
    pub fn markovian(gamma_m: f64) -> Result<Self> {
        let d = SpectralDensity::Markovian { gamma_m };
        d.validate()?;
        Ok(d)
    }

    pub fn ohmic(eta: f64, s: f64, omega_0: f64) -> Result<Self> {
        let d = SpectralDensity::Ohmic { eta, s, omega_0 };
        d.validate()?;
        Ok(d)
    }

    pub fn cutoff_power_law(j_anchor: f64, k: f64, omega_lo: f64, omega_hi: f64, omega_ref: f64) -> Result<Self> {
        let d = SpectralDensity::CutoffPowerLaw {
            j_anchor,
            k,
            omega_lo,
            omega_hi,
            omega_ref,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpectralDensity::Markovian { gamma_m } => non_negative("gamma_m", gamma_m),
            SpectralDensity::Ohmic { eta, s, omega_0 } => {
                positive("eta", eta)?;
                positive("s", s)?;
                positive("omega_0", omega_0)
            }
            SpectralDensity::CutoffPowerLaw {
                j_anchor,
                k,
                omega_lo,
                omega_hi,
                omega_ref,
            } => {
                non_negative("j_anchor", j_anchor)?;
                if !k.is_finite() {
                    return Err(Error::invalid("k", "must be finite"));
                }
                positive("omega_lo", omega_lo)?;
                positive("omega_ref", omega_ref)?;
                if !(omega_hi.is_finite() && omega_hi > omega_lo) {
                    return Err(Error::invalid(
                        "omega_hi",
                        format!("must exceed omega_lo ({omega_hi} <= {omega_lo})"),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn is_markovian(&self) -> bool {
        matches!(self, SpectralDensity::Markovian { .. })
    }

    /// Closed interval outside of which J vanishes; `hi` may be infinite.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            SpectralDensity::CutoffPowerLaw { omega_lo, omega_hi, .. } => (omega_lo, omega_hi),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        eval_density(self, omega)
    }
}

pub fn eval_density(d: &SpectralDensity, omega: f64) -> f64 {
    if !(omega > 0.0) {
        return 0.0;
    }
    match *d {
        SpectralDensity::Markovian { gamma_m } => gamma_m / PI,
        SpectralDensity::Ohmic { eta, s, omega_0 } => {
            let x = omega / omega_0;
            eta * omega * x.powf(s - 1.0) * (-x).exp()
        }
        SpectralDensity::CutoffPowerLaw {
            j_anchor,
            k,
            omega_lo,
            omega_hi,
            omega_ref,
        } => {
            if omega < omega_lo || omega > omega_hi {
                0.0
            } else {
                j_anchor * (omega / omega_ref).powf(k)
            }
        }
    }
}

/// A spectral density together with the mechanical frequency and bath
/// temperature.
///
/// `frequency_unit` is the number of rad/s represented by one unit of the
/// frequencies stored here. It only matters where physical constants enter
/// (the Bose factor and the mass-sensing input); with `omega_m = 1` and
/// `frequency_unit = 1e6` everything is expressed in units of a 10⁶ rad/s
/// mechanical frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathContext {
    pub density: SpectralDensity,
    pub temperature: f64,
    pub omega_m: f64,
    pub frequency_unit: f64,
}

impl BathContext {
    pub fn new(density: SpectralDensity, temperature: f64, omega_m: f64) -> Result<Self> {
        Self::with_unit(density, temperature, omega_m, 1.0)
    }

    pub fn with_unit(density: SpectralDensity, temperature: f64, omega_m: f64, frequency_unit: f64) -> Result<Self> {
        density.validate()?;
        non_negative("temperature", temperature)?;
        positive("omega_m", omega_m)?;
        positive("frequency_unit", frequency_unit)?;
        Ok(Self {
            density,
            temperature,
            omega_m,
            frequency_unit,
        })
    }

    /// Bose occupation at `omega` given in this context's units.
    pub fn occupation(&self, omega: f64) -> Result<f64> {
        n_th(omega * self.frequency_unit, self.temperature)
    }
}

pub fn gamma_eff(ctx: &BathContext) -> f64 {
    match ctx.density {
        SpectralDensity::Markovian { gamma_m } => gamma_m,
        d => PI * eval_density(&d, ctx.omega_m),
    }
}

/// η of an Ohmic-family density with exponent `s` and cutoff `omega_0`
/// such that πJ(ω_m) equals `target_gamma_eff`.
pub fn calibrate_eta(s: f64, omega_0: f64, target_gamma_eff: f64, omega_m: f64) -> Result<f64> {
    positive("s", s)?;
    positive("omega_0", omega_0)?;
    positive("target_gamma_eff", target_gamma_eff)?;
    positive("omega_m", omega_m)?;
    let x = omega_m / omega_0;
    Ok(target_gamma_eff / (PI * omega_m * x.powf(s - 1.0) * (-x).exp()))
}

/// Bose-Einstein occupation 1/(e^(ħω/k_BT) − 1) for ω in rad/s, T in kelvin.
pub fn n_th(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::invalid("omega", format!("must be > 0 (got {omega})")));
    }
    non_negative("temperature", temperature)?;
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (HBAR * omega / (K_B * temperature)).exp_m1())
}

/// S_ξξ(ω) for a structured bath: πJ(ω)(n(ω)+1) for ω > 0 and πJ(|ω|)n(|ω|)
/// for ω < 0. The Markovian bath has the frequency-independent γ_m n_th(ω_m).
pub fn thermal_noise(ctx: &BathContext, omega: f64) -> f64 {
    if let SpectralDensity::Markovian { gamma_m } = ctx.density {
        return gamma_m * ctx.occupation(ctx.omega_m).unwrap_or(0.0);
    }
    let w = omega.abs();
    let j = eval_density(&ctx.density, w);
    if w == 0.0 {
        return zero_frequency_noise(ctx);
    }
    if j == 0.0 {
        return 0.0;
    }
    let n = ctx.occupation(w).unwrap_or(0.0);
    if omega > 0.0 {
        PI * j * (n + 1.0)
    } else {
        PI * j * n
    }
}

/// lim_{ω→0} πJ(ω)n(ω); J(ω) n(ω) → J(ω) k_BT/(ħω) and only the Ohmic
/// family has weight reaching down to zero.
fn zero_frequency_noise(ctx: &BathContext) -> f64 {
    match ctx.density {
        SpectralDensity::Ohmic { eta, s, .. } if ctx.temperature > 0.0 => {
            let thermal = K_B * ctx.temperature / (HBAR * ctx.frequency_unit);
            if s > 1.0 {
                0.0
            } else if s == 1.0 {
                PI * eta * thermal
            } else {
                f64::INFINITY
            }
        }
        _ => 0.0,
    }
}

pub fn thermal_noise_spectrum(ctx: &BathContext, grid: &FrequencyGrid) -> RealSpectrum {
    RealSpectrum {
        grid: *grid,
        values: grid.samples().iter().map(|&w| thermal_noise(ctx, w)).collect(),
    }
}

pub fn markovian_thermal_noise(ctx: &BathContext) -> Result<f64> {
    match ctx.density {
        SpectralDensity::Markovian { gamma_m } => Ok(gamma_m * ctx.occupation(ctx.omega_m)?),
        _ => Err(Error::WrongBathKind { expected: "Markovian" }),
    }
}
