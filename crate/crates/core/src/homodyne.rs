//! Homodyne read-out coefficients and the force-referred added noise.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bath::{thermal_noise, BathContext};
use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, RealSpectrum};
use crate::response::{chi_m, SystemParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Output quadrature M_out(ω) = A a_in(ω) + B a_in†(−ω) + C [F(ω) + ξ(ω)].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneCoefficients {
    pub a_coef: Complex64,
    pub b_coef: Complex64,
    pub c_coef: Complex64,
    /// D = 2Δ'_c + iκ.
    pub d_aux: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrumResult {
    pub grid: FrequencyGrid,
    pub s_add: Vec<f64>,
    pub includes_thermal: bool,
}

impl NoiseSpectrumResult {
    pub fn spectrum(&self) -> RealSpectrum {
        RealSpectrum {
            grid: self.grid,
            values: self.s_add.clone(),
        }
    }
}

fn check_same_oscillator(ctx: &BathContext, params: &SystemParams) -> Result<()> {
    if ctx.omega_m != params.omega_m {
        return Err(Error::invalid(
            "omega_m",
            format!("bath ({}) and system ({}) disagree", ctx.omega_m, params.omega_m),
        ));
    }
    Ok(())
}

pub fn coefficients(ctx: &BathContext, params: &SystemParams, omega: f64) -> Result<HomodyneCoefficients> {
    check_same_oscillator(ctx, params)?;
    let m = chi_m(ctx, omega)?;
    let (kappa, delta, w) = (params.kappa, params.detuning, omega);
    let g = params.coupling;
    let gc = g.conj();
    let g2 = g.norm_sqr();
    let d = Complex64::new(2.0 * delta, kappa);
    let dc = d.conj();
    let (ep, em) = (Complex64::from_polar(1.0, params.theta), Complex64::from_polar(1.0, -params.theta));

    let den = std::f64::consts::SQRT_2
        * (4.0 * delta * (delta - 2.0 * g2 * m) + Complex64::new(kappa, -2.0 * w).powi(2));
    if den == Complex64::new(0.0, 0.0) {
        return Err(Error::SingularSusceptibility { omega });
    }
    let a = (4.0 * ep * kappa * gc * gc * m - I * em * (d * (4.0 * g2 * m - d) + 4.0 * w * w)) / den;
    let b = (4.0 * em * kappa * g * g * m + I * ep * (dc * (4.0 * g2 * m - dc) + 4.0 * w * w)) / den;
    let c = 2.0 * I * kappa.sqrt() * m * (ep * gc * (dc - 2.0 * w) - em * g * (d + 2.0 * w)) / den;
    Ok(HomodyneCoefficients {
        a_coef: a,
        b_coef: b,
        c_coef: c,
        d_aux: d,
    })
}

/// Cavity vacuum noise referred to the force input, (|A|² + |B|²) / (2|C|²).
pub fn cavity_noise(ctx: &BathContext, params: &SystemParams, omega: f64) -> Result<f64> {
    let k = coefficients(ctx, params, omega)?;
    let c2 = k.c_coef.norm_sqr();
    if c2 == 0.0 {
        return Err(Error::NoTransduction { omega });
    }
    Ok((k.a_coef.norm_sqr() + k.b_coef.norm_sqr()) / (2.0 * c2))
}

/// Unsymmetrized force noise S_FF(ω) = S_ξξ(ω)·[thermal] + (|A|² + |B|²)/(2|C|²).
pub fn s_ff(ctx: &BathContext, params: &SystemParams, omega: f64, include_thermal: bool) -> Result<f64> {
    let cavity = cavity_noise(ctx, params, omega)?;
    Ok(if include_thermal {
        thermal_noise(ctx, omega) + cavity
    } else {
        cavity
    })
}

/// The same quantity at θ = 0 written through P and Q:
/// S_ξξ + (|P|² + |Q|²) / (8κ |G*D* − GD − 2ω(G + G*)|²).
pub fn s_ff_theta0(ctx: &BathContext, params: &SystemParams, omega: f64, include_thermal: bool) -> Result<f64> {
    if params.theta != 0.0 {
        return Err(Error::invalid("theta", format!("must be 0 (got {})", params.theta)));
    }
    check_same_oscillator(ctx, params)?;
    let (p, q) = p_q(ctx, params, omega)?;
    let g = params.coupling;
    let d = Complex64::new(2.0 * params.detuning, params.kappa);
    let t = g.conj() * d.conj() - g * d - 2.0 * omega * (g + g.conj());
    let t2 = t.norm_sqr();
    if t2 == 0.0 || !(p.norm().is_finite() && q.norm().is_finite()) {
        return Err(Error::NoTransduction { omega });
    }
    let cavity = (p.norm_sqr() + q.norm_sqr()) / (8.0 * params.kappa * t2);
    Ok(if include_thermal {
        thermal_noise(ctx, omega) + cavity
    } else {
        cavity
    })
}

/// P(ω) = 4(κG*² − iD|G|²) + i(D² − 4ω²)/χ_m and
/// Q(ω) = 4(κG² + iD*|G|²) − i(D*² − 4ω²)/χ_m.
pub fn p_q(ctx: &BathContext, params: &SystemParams, omega: f64) -> Result<(Complex64, Complex64)> {
    let m = chi_m(ctx, omega)?;
    if m == Complex64::new(0.0, 0.0) {
        return Err(Error::NoTransduction { omega });
    }
    let g = params.coupling;
    let (gc, g2, kappa) = (g.conj(), g.norm_sqr(), params.kappa);
    let d = Complex64::new(2.0 * params.detuning, kappa);
    let dc = d.conj();
    let w2 = 4.0 * omega * omega;
    let p = 4.0 * (kappa * gc * gc - I * d * g2) + I * (d * d - w2) / m;
    let q = 4.0 * (kappa * g * g + I * dc * g2) - I * (dc * dc - w2) / m;
    Ok((p, q))
}

/// S(ω) = [S(ω) + S(−ω)] / 2.
pub fn symmetrize<F>(f: F) -> impl Fn(f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    move |w| Ok(0.5 * (f(w)? + f(-w)?))
}

pub fn s_add_at(ctx: &BathContext, params: &SystemParams, omega: f64, include_thermal: bool) -> Result<f64> {
    symmetrize(|w| s_ff(ctx, params, w, include_thermal))(omega)
}

pub fn s_add_theta0_at(ctx: &BathContext, params: &SystemParams, omega: f64, include_thermal: bool) -> Result<f64> {
    symmetrize(|w| s_ff_theta0(ctx, params, w, include_thermal))(omega)
}

fn over_grid<F>(grid: &FrequencyGrid, include_thermal: bool, f: F) -> Result<NoiseSpectrumResult>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    let s_add = grid.samples().into_par_iter().map(&f).collect::<Result<Vec<_>>>()?;
    Ok(NoiseSpectrumResult {
        grid: *grid,
        s_add,
        includes_thermal: include_thermal,
    })
}

pub fn s_add_general(
    ctx: &BathContext,
    params: &SystemParams,
    grid: &FrequencyGrid,
    include_thermal: bool,
) -> Result<NoiseSpectrumResult> {
    over_grid(grid, include_thermal, |w| s_add_at(ctx, params, w, include_thermal))
}

pub fn s_add_theta0(
    ctx: &BathContext,
    params: &SystemParams,
    grid: &FrequencyGrid,
    include_thermal: bool,
) -> Result<NoiseSpectrumResult> {
    over_grid(grid, include_thermal, |w| s_add_theta0_at(ctx, params, w, include_thermal))
}

/// Minimum of S_add over the grid, refined by a parabola through the
/// neighbouring samples. Points where S_add is undefined are skipped.
pub fn optimal_s_add_over_frequency(
    ctx: &BathContext,
    params: &SystemParams,
    grid: &FrequencyGrid,
    include_thermal: bool,
) -> Result<(f64, f64)> {
    let values: Vec<Result<f64>> = grid
        .samples()
        .into_par_iter()
        .map(|w| s_add_at(ctx, params, w, include_thermal))
        .collect();
    if let Some(Err(e)) = values.iter().find(|v| !matches!(v, Ok(_) | Err(Error::NoTransduction { .. }))) {
        return Err(e.clone());
    }
    let values: Vec<f64> = values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    if values.iter().all(|v| !v.is_finite()) {
        return Err(Error::NoTransduction { omega: grid.start() });
    }
    Ok(RealSpectrum { grid: *grid, values }.argmin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Coupling,
    Kappa,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// Geometric instead of linear spacing of the axis values.
    pub log_spacing: bool,
    /// Frequencies searched for the optimum at each axis value.
    pub grid: FrequencyGrid,
    pub include_thermal: bool,
}

impl SweepSpec {
    pub fn axis_values(&self) -> Result<Vec<f64>> {
        if self.points < 2 {
            return Err(Error::invalid("sweep.points", "at least 2 points are required"));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.start < self.stop) {
            return Err(Error::invalid("sweep.stop", "must exceed sweep.start"));
        }
        if self.axis != SweepAxis::Theta && self.start <= 0.0 {
            return Err(Error::invalid("sweep.start", "must be > 0 for this axis"));
        }
        let n = self.points - 1;
        Ok((0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                if i == n {
                    self.stop
                } else if self.log_spacing {
                    self.start * (self.stop / self.start).powf(t)
                } else {
                    self.start + t * (self.stop - self.start)
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    /// (argmin frequency, minimum S_add), or the error that prevented it.
    pub optimum: std::result::Result<(f64, f64), Error>,
}

/// Optimal S_add at each axis value, in axis order. Failed rows keep their
/// error and the sweep continues.
pub fn sweep(ctx: &BathContext, params: &SystemParams, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.log_spacing && spec.axis == SweepAxis::Theta {
        return Err(Error::invalid("sweep.log_spacing", "not available for the theta axis"));
    }
    let values = spec.axis_values()?;
    Ok(values
        .into_par_iter()
        .map(|x| {
            let p = match spec.axis {
                SweepAxis::Coupling => params.with_coupling(Complex64::new(x, 0.0)),
                SweepAxis::Kappa => params.with_kappa(x),
                SweepAxis::Theta => params.with_theta(x),
            };
            SweepRow {
                axis_value: x,
                optimum: optimal_s_add_over_frequency(ctx, &p, &spec.grid, spec.include_thermal),
            }
        })
        .collect())
}
