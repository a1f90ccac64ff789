//! Self-energy, susceptibilities and the dressed mechanical sensitivity.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;

use crate::bath::{eval_density, gamma_eff, BathContext, SpectralDensity};
use crate::error::{Error, Result};
use crate::grid::ComplexSpectrum;
use crate::quadrature::{integrate_finite, integrate_semi_infinite, principal_value, MIN_POLE_MARGIN};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance for the self-energy integrals. Downstream identities are checked
/// at 1e-10, so these sit a little below that.
const SIGMA_REL_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub omega_m: f64,
    /// Effective cavity detuning Δ'_c.
    pub detuning: f64,
    pub kappa: f64,
    /// Linearized coupling G = α g₀.
    pub coupling: Complex64,
    /// Homodyne phase θ.
    pub theta: f64,
}

impl SystemParams {
    pub fn new(omega_m: f64, detuning: f64, kappa: f64, coupling: Complex64, theta: f64) -> Result<Self> {
        let p = Self {
            omega_m,
            detuning,
            kappa,
            coupling,
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Real coupling, Δ'_c = ω_m and θ = 0.
    pub fn red_detuned(omega_m: f64, kappa: f64, coupling: f64) -> Result<Self> {
        Self::new(omega_m, omega_m, kappa, Complex64::new(coupling, 0.0), 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_m.is_finite() && self.omega_m > 0.0) {
            return Err(Error::invalid("omega_m", format!("must be > 0 (got {})", self.omega_m)));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::invalid("kappa", format!("must be > 0 (got {})", self.kappa)));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        if !(self.coupling.re.is_finite() && self.coupling.im.is_finite()) {
            return Err(Error::invalid("coupling", "must be finite"));
        }
        if !self.theta.is_finite() {
            return Err(Error::invalid("theta", "must be finite"));
        }
        Ok(())
    }

    pub fn with_coupling(mut self, g: Complex64) -> Self {
        self.coupling = g;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }
}

/// Σ(ω) = iγ_m ω / ω_m, so that ω_m Σ = iγ_m ω.
pub fn markovian_self_energy(gamma_m: f64, omega: f64, omega_m: f64) -> Complex64 {
    Complex64::new(0.0, gamma_m * omega / omega_m)
}

/// Self-energy of a structured bath,
///
/// Σ(ω) = 𝒫∫ dω' ω' J(ω') / (ω'² − ω²) + iπ[θ(ω)J(ω) − θ(−ω)J(−ω)]/2,
///
/// the Laplace transform of the memory kernel ∫dω' J(ω') sin ω't. Results are
/// memoized per (density, ω).
pub fn self_energy(ctx: &BathContext, omega: f64) -> Result<Complex64> {
    if ctx.density.is_markovian() {
        return Err(Error::WrongBathKind { expected: "structured" });
    }
    let key = cache_key(&ctx.density, omega);
    let cache = SIGMA_CACHE.get_or_init(Default::default);
    if let Some(v) = cache.read().ok().and_then(|m| m.get(&key).copied()) {
        return Ok(v);
    }
    let v = self_energy_uncached(ctx, omega)?;
    if let Ok(mut m) = cache.write() {
        if m.len() >= CACHE_CAPACITY {
            m.clear();
        }
        m.insert(key, v);
    }
    Ok(v)
}

type CacheKey = [u64; 7];
const CACHE_CAPACITY: usize = 1 << 22;
static SIGMA_CACHE: OnceLock<RwLock<HashMap<CacheKey, Complex64>>> = OnceLock::new();

fn cache_key(d: &SpectralDensity, omega: f64) -> CacheKey {
    let b = f64::to_bits;
    // Normalize -0.0 so that both zeros share an entry.
    let w = b(omega + 0.0);
    match *d {
        SpectralDensity::Markovian { gamma_m } => [0, b(gamma_m), 0, 0, 0, 0, w],
        SpectralDensity::Ohmic { eta, s, omega_0 } => [1, b(eta), b(s), b(omega_0), 0, 0, w],
        SpectralDensity::CutoffPowerLaw {
            j_anchor,
            k,
            omega_lo,
            omega_hi,
            omega_ref,
        } => [2, b(j_anchor), b(k), b(omega_lo), b(omega_hi), b(omega_ref), w],
    }
}

pub fn self_energy_uncached(ctx: &BathContext, omega: f64) -> Result<Complex64> {
    let d = ctx.density;
    if d.is_markovian() {
        return Err(Error::WrongBathKind { expected: "structured" });
    }
    if omega < 0.0 {
        return Ok(self_energy_uncached(ctx, -omega)?.conj());
    }
    let (lo, hi) = d.support();
    let j = |x: f64| eval_density(&d, x);

    if omega == 0.0 {
        let re = match d {
            SpectralDensity::Ohmic { omega_0, .. } => {
                integrate_semi_infinite(|x| j(x) / x, 0.0, omega_0, SIGMA_REL_TOL)?.value
            }
            _ => integrate_finite(|x| j(x) / x, lo, hi, SIGMA_REL_TOL)?.value,
        };
        return Ok(Complex64::new(re, 0.0));
    }

    // (x − ω)(x + ω) rather than x² − ω²: the difference of squares loses
    // digits next to the pole, and that noise stalls the adaptive quadrature.
    let g = move |x: f64| x * j(x) / ((x - omega) * (x + omega));
    let re = match d {
        SpectralDensity::Ohmic { omega_0, .. } => {
            let near = principal_value(g, omega, 0.0, 2.0 * omega, SIGMA_REL_TOL)?.value;
            let far = integrate_semi_infinite(g, 2.0 * omega, omega_0.max(omega), SIGMA_REL_TOL)?.value;
            near + far
        }
        _ => {
            // Hard band edges: the principal value diverges logarithmically,
            // to +∞ at the lower edge and −∞ at the upper one.
            // Within the principal-value margin of an edge the point is taken
            // to be the edge itself.
            let margin = 2.0 * MIN_POLE_MARGIN * (hi - lo);
            if (omega - lo).abs() <= margin {
                f64::INFINITY
            } else if (omega - hi).abs() <= margin {
                f64::NEG_INFINITY
            } else if omega > lo && omega < hi {
                principal_value(g, omega, lo, hi, SIGMA_REL_TOL)?.value
            } else {
                integrate_finite(g, lo, hi, SIGMA_REL_TOL)?.value
            }
        }
    };
    Ok(Complex64::new(re, 0.5 * PI * j(omega)))
}

/// Σ(ω) for any bath: the Markovian form for a flat bath, the structured form
/// otherwise.
pub fn bath_self_energy(ctx: &BathContext, omega: f64) -> Result<Complex64> {
    match ctx.density {
        SpectralDensity::Markovian { gamma_m } => Ok(markovian_self_energy(gamma_m, omega, ctx.omega_m)),
        _ => self_energy(ctx, omega),
    }
}

/// χ_m(ω) = −ω_m / [(ω² − ω_m²) + ω_m Σ(ω)].
pub fn chi_m(ctx: &BathContext, omega: f64) -> Result<Complex64> {
    let wm = ctx.omega_m;
    let den = (omega * omega - wm * wm) + wm * bath_self_energy(ctx, omega)?;
    if !(den.re.is_finite() && den.im.is_finite()) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if den == Complex64::new(0.0, 0.0) {
        return Err(Error::SingularSusceptibility { omega });
    }
    Ok(-wm / den)
}

pub fn chi_c(params: &SystemParams, omega: f64) -> Complex64 {
    1.0 / Complex64::new(0.5 * params.kappa, -(omega - params.detuning))
}

pub fn chi_c_prime(params: &SystemParams, omega: f64) -> Complex64 {
    1.0 / Complex64::new(0.5 * params.kappa, -(omega + params.detuning))
}

/// Optomechanically dressed sensitivity, χ_xm⁻¹ = χ_m⁻¹ − i|G|²(χ_c − χ'_c).
pub fn chi_xm(ctx: &BathContext, params: &SystemParams, omega: f64) -> Result<Complex64> {
    let m = chi_m(ctx, omega)?;
    if m == Complex64::new(0.0, 0.0) || params.coupling.norm_sqr() == 0.0 {
        return Ok(m);
    }
    let inv = 1.0 / m - I * params.coupling.norm_sqr() * (chi_c(params, omega) - chi_c_prime(params, omega));
    if inv == Complex64::new(0.0, 0.0) {
        return Err(Error::SingularSusceptibility { omega });
    }
    Ok(1.0 / inv)
}

/// Markovian reference sensitivity at ω_m with damping γ_eff of `ctx`,
/// χ_x0⁻¹ = −iγ_eff − i|G|²[χ_c(ω_m) − χ'_c(ω_m)].
pub fn chi_x0(ctx: &BathContext, params: &SystemParams) -> Result<Complex64> {
    let g = gamma_eff(ctx);
    if !(g > 0.0) {
        return Err(Error::invalid("gamma_eff", format!("must be > 0 (got {g})")));
    }
    let wm = ctx.omega_m;
    let inv = -I * g - I * params.coupling.norm_sqr() * (chi_c(params, wm) - chi_c_prime(params, wm));
    Ok(1.0 / inv)
}

/// ω_eff = sqrt(ω_m [ω_m − Re Σ(ω_m)]); ω_m itself for a Markovian bath.
pub fn effective_frequency(ctx: &BathContext) -> Result<f64> {
    if ctx.density.is_markovian() {
        return Ok(ctx.omega_m);
    }
    let wm = ctx.omega_m;
    let radicand = wm * (wm - self_energy(ctx, wm)?.re);
    if !(radicand.is_finite() && radicand > 0.0) {
        return Err(Error::OverdampedShift { radicand });
    }
    Ok(radicand.sqrt())
}

/// Frequency of maximum magnitude. The sampled maximum is refined with a
/// parabola through 1/|z|² at it and its two neighbours, which is exact for
/// a Lorentzian line. Boundary maxima are returned as is.
pub fn find_resonance(spectrum: &ComplexSpectrum) -> f64 {
    let grid = &spectrum.grid;
    let (w, _) = spectrum.magnitude().argmax();
    let i = ((w - grid.start()) / grid.spacing()).round() as usize;
    if i == 0 || i + 1 >= grid.len() {
        return grid.omega(i.min(grid.len() - 1));
    }
    let inv = |k: usize| 1.0 / spectrum.values[k].norm_sqr();
    let (ym, y0, yp) = (inv(i - 1), inv(i), inv(i + 1));
    let curv = ym - 2.0 * y0 + yp;
    if !(curv.is_finite() && curv > 0.0) {
        return grid.omega(i);
    }
    let shift = (0.5 * (ym - yp) / curv).clamp(-0.5, 0.5);
    grid.omega(i) + shift * grid.spacing()
}
