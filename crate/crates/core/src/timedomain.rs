//! Time-domain integration of the linearized mean-value equations with the
//! bath kept as a memory kernel. Used to cross-check the frequency-domain
//! susceptibilities.
//!
//! Equations (deterministic, noise operators dropped):
//!
//! ```text
//! ȧ = −(iΔ + κ/2) a + i G q
//! q̇ = ω_m p
//! ṗ = −ω_m q + ∫₀ᵗ f(t−τ) q(τ) dτ + G* a + G a* + F(t)
//! ```
//!
//! with f(t) = ∫₀^∞ J(ω) sin ωt dω. A Markovian bath replaces the convolution
//! by −γ_m p. In these conventions a drive F = Re[F₀ e^{−iωt}] produces
//! q = Re[χ_xm(ω) F₀ e^{−iωt}] in steady state.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::bath::{BathContext, SpectralDensity};
use crate::error::{Error, Result};
use crate::quadrature::integrate_finite;
use crate::response::SystemParams;

/// Samples of |f| below this fraction of the peak, with nothing larger
/// afterwards, are dropped from the end of the kernel table.
pub const KERNEL_TRUNCATION: f64 = 1e-8;
/// A trajectory whose state norm exceeds this multiple of the drive scale is
/// reported as diverged.
pub const DIVERGENCE_FACTOR: f64 = 1e12;
const KERNEL_REL_TOL: f64 = 1e-10;

/// f(t) tabulated on a uniform grid t_i = i·dt starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryKernel {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl MemoryKernel {
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Last tabulated time. Shorter than the requested horizon if the tail
    /// was truncated.
    pub fn horizon(&self) -> f64 {
        self.time(self.values.len().saturating_sub(1))
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.time(i), v))
    }

    /// Kernel value at sample `i`, zero past the truncated tail.
    pub fn at(&self, i: usize) -> f64 {
        self.values.get(i).copied().unwrap_or(0.0)
    }
}

/// f(t) = ∫₀^∞ J(ω) sin ωt dω, closed form for Ohmic baths:
/// η ω₀^{1−s} Γ(s+1) Im[(1/ω₀ − it)^{−(s+1)}].
pub fn ohmic_kernel(eta: f64, s: f64, omega_0: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let z = Complex64::new(1.0 / omega_0, -t).powf(-(s + 1.0));
    eta * omega_0.powf(1.0 - s) * gamma(s + 1.0) * z.im
}

/// F(t) = ∫₀ᵗ f(τ) dτ = ∫₀^∞ J(ω)(1 − cos ωt)/ω dω for an Ohmic bath:
/// η ω₀^{1−s} Γ(s) [ω₀^s − Re (1/ω₀ − it)^{−s}].
pub fn ohmic_kernel_integral(eta: f64, s: f64, omega_0: f64, t: f64) -> f64 {
    let z = Complex64::new(1.0 / omega_0, -t).powf(-s);
    eta * omega_0.powf(1.0 - s) * gamma(s) * (omega_0.powf(s) - z.re)
}

/// F(t) = ∫₀ᵗ f(τ) dτ for a structured bath.
pub fn kernel_integral(density: &SpectralDensity, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    match *density {
        SpectralDensity::Markovian { .. } => Err(Error::WrongBathKind {
            expected: "structured (non-Markovian)",
        }),
        SpectralDensity::Ohmic { eta, s, omega_0 } => Ok(ohmic_kernel_integral(eta, s, omega_0, t)),
        SpectralDensity::CutoffPowerLaw { omega_lo, omega_hi, .. } => {
            let r = integrate_finite(
                |w| {
                    let h = (0.5 * w * t).sin();
                    2.0 * density.eval(w) * h * h / w
                },
                omega_lo,
                omega_hi,
                KERNEL_REL_TOL,
            )?;
            Ok(r.value)
        }
    }
}

/// f(t) for a structured bath by direct quadrature over the support of J.
pub fn kernel_value(density: &SpectralDensity, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    match *density {
        SpectralDensity::Markovian { .. } => Err(Error::WrongBathKind {
            expected: "structured (non-Markovian)",
        }),
        SpectralDensity::Ohmic { eta, s, omega_0 } => Ok(ohmic_kernel(eta, s, omega_0, t)),
        SpectralDensity::CutoffPowerLaw { omega_lo, omega_hi, .. } => {
            let r = integrate_finite(|w| density.eval(w) * (w * t).sin(), omega_lo, omega_hi, KERNEL_REL_TOL)?;
            Ok(r.value)
        }
    }
}

/// Tabulates f on `[0, horizon]` with spacing `dt`, then drops the decayed tail.
pub fn build_kernel(ctx: &BathContext, dt: f64, horizon: f64) -> Result<MemoryKernel> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0 (got {dt})")));
    }
    if !(horizon.is_finite() && horizon > dt) {
        return Err(Error::invalid("horizon", format!("must exceed dt (got {horizon})")));
    }
    if ctx.density.is_markovian() {
        return Err(Error::WrongBathKind {
            expected: "structured (non-Markovian)",
        });
    }
    let n = (horizon / dt).ceil() as usize + 1;
    let mut values = (0..n)
        .into_par_iter()
        .map(|i| kernel_value(&ctx.density, i as f64 * dt))
        .collect::<Result<Vec<f64>>>()?;
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(last) = values.iter().rposition(|v| v.abs() >= KERNEL_TRUNCATION * peak) {
        values.truncate((last + 2).min(n));
    }
    Ok(MemoryKernel { dt, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectoryState {
    pub time: f64,
    pub q_m: f64,
    pub p_m: f64,
    pub a_re: f64,
    pub a_im: f64,
}

impl TrajectoryState {
    pub fn at_rest() -> Self {
        Self::default()
    }

    fn norm(&self) -> f64 {
        (self.q_m * self.q_m + self.p_m * self.p_m + self.a_re * self.a_re + self.a_im * self.a_im).sqrt()
    }

    fn is_finite(&self) -> bool {
        self.q_m.is_finite() && self.p_m.is_finite() && self.a_re.is_finite() && self.a_im.is_finite()
    }
}

#[derive(Debug, Clone, Copy)]
struct Deriv {
    q: f64,
    p: f64,
    a: Complex64,
}

#[derive(Debug, Clone, Copy)]
struct State {
    q: f64,
    p: f64,
    a: Complex64,
}

impl State {
    fn step(&self, k: &Deriv, h: f64) -> State {
        State {
            q: self.q + h * k.q,
            p: self.p + h * k.p,
            a: self.a + k.a * h,
        }
    }
}

#[derive(Debug, Clone)]
enum Memory {
    Local { gamma_m: f64 },
    // Kernel sampled at half steps and split by parity, each stored reversed
    // so the history sum is a forward dot product. Before reversal,
    // `reversed[e][d] = f((2d + e)·dt/2)`.
    //
    // `correction[e][n]` is F(t_n + e·dt/2) minus the sum of the trapezoid
    // weights used at that time, so that weight is carried by the current q
    // instead. The kernel spike at small lags, narrower than dt when ω₀ is
    // large, then only enters through f(u)·[q(t−u) − q(t)], which vanishes at
    // u = 0.
    Convolution {
        reversed: [Vec<f64>; 3],
        correction: [Vec<f64>; 3],
        kernel: MemoryKernel,
    },
}

/// Fixed-step RK4 integrator for one bath and parameter set. The kernel table
/// is built once, so several drives can be run against the same setup.
#[derive(Debug, Clone)]
pub struct MeanResponseSimulator {
    params: SystemParams,
    dt: f64,
    steps: usize,
    memory: Memory,
}

impl MeanResponseSimulator {
    pub fn new(ctx: &BathContext, params: &SystemParams, dt: f64, t_final: f64) -> Result<Self> {
        params.validate()?;
        if params.omega_m != ctx.omega_m {
            return Err(Error::invalid(
                "omega_m",
                format!("system ({}) and bath ({}) disagree", params.omega_m, ctx.omega_m),
            ));
        }
        let fastest = params.omega_m.max(params.detuning.abs()).max(params.kappa);
        let dt_max = 2.0 * std::f64::consts::PI / (50.0 * fastest);
        if !(dt.is_finite() && dt > 0.0 && dt <= dt_max) {
            return Err(Error::invalid("dt", format!("must be in (0, {dt_max:.6}] (got {dt})")));
        }
        if !(t_final.is_finite() && t_final > dt) {
            return Err(Error::invalid("t_final", format!("must exceed dt (got {t_final})")));
        }
        let steps = (t_final / dt).round() as usize;
        let memory = match ctx.density {
            SpectralDensity::Markovian { gamma_m } => Memory::Local { gamma_m },
            _ => {
                let kernel = build_kernel(ctx, 0.5 * dt, steps as f64 * dt + dt)?;
                let parity = |e: usize| -> Vec<f64> {
                    let mut v: Vec<f64> = (0..=steps).map(|d| kernel.at(2 * d + e)).collect();
                    while v.len() > 1 && v.last() == Some(&0.0) {
                        v.pop();
                    }
                    v.reverse();
                    v
                };
                let reversed = [parity(0), parity(1), parity(2)];
                let correction = [0, 1, 2].map(|e| {
                    let k = &reversed[e];
                    let kd = |d: usize| if d < k.len() { k[k.len() - 1 - d] } else { 0.0 };
                    let s = 0.5 * e as f64 * dt;
                    let mut cum = 0.0;
                    (0..=steps)
                        .map(|n| {
                            cum += kd(n);
                            let weights = dt * (cum - 0.5 * kd(n) - 0.5 * kd(0)) + 0.5 * s * kd(0);
                            (n, weights)
                        })
                        .collect::<Vec<_>>()
                        .into_par_iter()
                        .map(|(n, weights)| Ok(kernel_integral(&ctx.density, n as f64 * dt + s)? - weights))
                        .collect::<Result<Vec<f64>>>()
                });
                let [c0, c1, c2] = correction;
                Memory::Convolution {
                    reversed,
                    correction: [c0?, c1?, c2?],
                    kernel,
                }
            }
        };
        Ok(Self {
            params: *params,
            dt,
            steps,
            memory,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Kernel table at half-step spacing; `None` for a Markovian bath.
    pub fn kernel(&self) -> Option<&MemoryKernel> {
        match &self.memory {
            Memory::Local { .. } => None,
            Memory::Convolution { kernel, .. } => Some(kernel),
        }
    }

    /// `memory` is the history sum and the weight carried by the current q.
    fn derivative(&self, y: &State, memory: (f64, f64), drive: f64) -> Deriv {
        let p = &self.params;
        let g = p.coupling;
        let a = y.a;
        let da = -Complex64::new(0.5 * p.kappa, p.detuning) * a + Complex64::i() * g * y.q;
        // G* a + G a* is real.
        let radiation = 2.0 * (g.conj() * a).re;
        let damping = match self.memory {
            Memory::Local { gamma_m } => -gamma_m * y.p,
            Memory::Convolution { .. } => memory.0 + memory.1 * y.q,
        };
        Deriv {
            q: p.omega_m * y.p,
            p: -p.omega_m * y.q + damping + radiation + drive,
            a: da,
        }
    }

    /// Trapezoid rule for ∫₀^{t_n + e·dt/2} f(t−τ) q(τ) dτ over the stored
    /// history q_0..q_n. The last partial interval carries the stage value
    /// of q with weight f(0) = 0, so only stored samples enter.
    fn convolution(&self, history: &[f64], e: usize) -> (f64, f64) {
        let Memory::Convolution { reversed, correction, .. } = &self.memory else {
            return (0.0, 0.0);
        };
        let k = &reversed[e];
        let n = history.len() - 1;
        let len = k.len();
        let j0 = (n + 1).saturating_sub(len);
        let ks = &k[len - (n + 1 - j0)..];
        let full = dot(&history[j0..], ks);
        let kd = |d: usize| if d < len { k[len - 1 - d] } else { 0.0 };
        let edges = 0.5 * kd(n) * history[0] + 0.5 * kd(0) * history[n];
        let s = 0.5 * e as f64 * self.dt;
        let sum = self.dt * (full - edges) + 0.5 * s * kd(0) * history[n];
        (sum, correction[e][n])
    }

    /// Integrates from `initial` (its `time` is ignored; the run starts at 0).
    pub fn run<F>(&self, drive: F, initial: TrajectoryState) -> Result<Vec<TrajectoryState>>
    where
        F: Fn(f64) -> f64,
    {
        let dt = self.dt;
        let mut y = State {
            q: initial.q_m,
            p: initial.p_m,
            a: Complex64::new(initial.a_re, initial.a_im),
        };
        let mut out = Vec::with_capacity(self.steps + 1);
        let record = |t: f64, y: &State| TrajectoryState {
            time: t,
            q_m: y.q,
            p_m: y.p,
            a_re: y.a.re,
            a_im: y.a.im,
        };
        out.push(record(0.0, &y));
        let mut scale = 1.0f64.max(out[0].norm());
        let mut history = Vec::with_capacity(self.steps + 1);
        history.push(y.q);
        // I(t_n) equals I(t_{n-1} + dt) from the previous step.
        let mut conv_start = (0.0, 0.0);
        for n in 0..self.steps {
            let t = n as f64 * dt;
            let (f0, fh, f1) = (drive(t), drive(t + 0.5 * dt), drive(t + dt));
            scale = scale.max(f0.abs()).max(fh.abs()).max(f1.abs());
            let conv_half = self.convolution(&history, 1);
            let conv_end = self.convolution(&history, 2);
            let k1 = self.derivative(&y, conv_start, f0);
            let k2 = self.derivative(&y.step(&k1, 0.5 * dt), conv_half, fh);
            let k3 = self.derivative(&y.step(&k2, 0.5 * dt), conv_half, fh);
            let k4 = self.derivative(&y.step(&k3, dt), conv_end, f1);
            y = State {
                q: y.q + dt / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q),
                p: y.p + dt / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p),
                a: y.a + (k1.a + k2.a * 2.0 + k3.a * 2.0 + k4.a) * (dt / 6.0),
            };
            conv_start = conv_end;
            let t_next = (n + 1) as f64 * dt;
            let s = record(t_next, &y);
            if !s.is_finite() || s.norm() > DIVERGENCE_FACTOR * scale {
                return Err(Error::Divergence { time: t_next });
            }
            out.push(s);
            history.push(y.q);
        }
        Ok(out)
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    for (a, b) in xc.zip(yc) {
        for l in 0..4 {
            acc[l] += a[l] * b[l];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

/// Integrates from rest with a classical drive F(t).
pub fn simulate_mean_response<F>(
    ctx: &BathContext,
    params: &SystemParams,
    drive: F,
    dt: f64,
    t_final: f64,
) -> Result<Vec<TrajectoryState>>
where
    F: Fn(f64) -> f64,
{
    MeanResponseSimulator::new(ctx, params, dt, t_final)?.run(drive, TrajectoryState::at_rest())
}

/// Complex response of q_m to a unit drive cos(ωt), from a least-squares fit
/// of q_m = Re[χ e^{−iωt}] over the largest whole number of periods after
/// the first `settle_fraction` of the run. A response lagging the drive by φ
/// has arg χ = +φ.
pub fn extract_transfer(trajectory: &[TrajectoryState], drive_frequency: f64, settle_fraction: f64) -> Result<Complex64> {
    if !(drive_frequency.is_finite() && drive_frequency > 0.0) {
        return Err(Error::invalid("drive_frequency", format!("must be > 0 (got {drive_frequency})")));
    }
    if !(0.0..1.0).contains(&settle_fraction) {
        return Err(Error::invalid("settle_fraction", format!("must be in [0, 1) (got {settle_fraction})")));
    }
    let (Some(first), Some(last)) = (trajectory.first(), trajectory.last()) else {
        return Err(Error::WindowTooShort {
            reason: "empty trajectory".into(),
        });
    };
    let period = 2.0 * std::f64::consts::PI / drive_frequency;
    let t_end = last.time;
    let available = (t_end - first.time) * (1.0 - settle_fraction);
    let periods = (available / period * (1.0 + 1e-12)).floor();
    if periods < 20.0 {
        return Err(Error::WindowTooShort {
            reason: format!("{periods} drive periods after settling, need at least 20"),
        });
    }
    let t_start = t_end - periods * period;
    let (mut cc, mut cs, mut ss, mut qc, mut qs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for st in trajectory.iter().filter(|s| s.time >= t_start - 1e-9 * period) {
        let (s, c) = (drive_frequency * st.time).sin_cos();
        cc += c * c;
        cs += c * s;
        ss += s * s;
        qc += st.q_m * c;
        qs += st.q_m * s;
    }
    let det = cc * ss - cs * cs;
    if !(det > 0.0) {
        return Err(Error::WindowTooShort {
            reason: "too few samples per period".into(),
        });
    }
    Ok(Complex64::new((qc * ss - qs * cs) / det, (qs * cc - qc * cs) / det))
}

pub const TRAJECTORY_HEADER: &str = "time,q_m,p_m,a_re,a_im";

pub fn write_trajectory_csv<W: Write>(mut w: W, trajectory: &[TrajectoryState]) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in trajectory {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.time, s.q_m, s.p_m, s.a_re, s.a_im
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::calibrate_eta;
    use crate::quadrature::integrate_semi_infinite;
    use crate::response::chi_xm;
    use std::f64::consts::PI;

    fn ohmic(s: f64) -> BathContext {
        let eta = calibrate_eta(s, 10.0, PI * 1e-3, 1.0).unwrap();
        BathContext::new(SpectralDensity::ohmic(eta, s, 10.0).unwrap(), 0.0, 1.0).unwrap()
    }

    fn cutoff() -> BathContext {
        let d = SpectralDensity::cutoff_power_law(1e-3, -2.0, 0.9, 1.1, 1.0).unwrap();
        BathContext::new(d, 0.0, 1.0).unwrap()
    }

    fn markovian(gamma: f64) -> BathContext {
        BathContext::new(SpectralDensity::markovian(gamma).unwrap(), 0.0, 1.0).unwrap()
    }

    #[test]
    fn kernel_starts_at_zero() {
        for b in [ohmic(0.5), ohmic(1.0), ohmic(2.0), cutoff()] {
            let k = build_kernel(&b, 0.05, 10.0).unwrap();
            assert_eq!(k.values[0], 0.0);
            assert_eq!(k.time(4), 0.2);
        }
        assert!(matches!(build_kernel(&markovian(1e-3), 0.1, 10.0), Err(Error::WrongBathKind { .. })));
        assert!(build_kernel(&ohmic(1.0), 0.1, 0.05).is_err());
    }

    #[test]
    fn flat_band_kernel_matches_closed_form() {
        let (j, lo, hi) = (2e-3, 0.99, 1.01);
        let d = SpectralDensity::cutoff_power_law(j, 0.0, lo, hi, 1.0).unwrap();
        let b = BathContext::new(d, 0.0, 1.0).unwrap();
        let k = build_kernel(&b, 0.5, 2000.0).unwrap();
        for (t, v) in k.samples().skip(1).step_by(97) {
            let exact = j * ((lo * t).cos() - (hi * t).cos()) / t;
            assert!((v - exact).abs() < 1e-12 * j, "t = {t}: {v} vs {exact}");
        }
    }

    #[test]
    fn ohmic_closed_form_matches_quadrature() {
        for s in [0.5, 1.0, 2.0] {
            let b = ohmic(s);
            let SpectralDensity::Ohmic { eta, omega_0, .. } = b.density else { unreachable!() };
            for t in [0.01, 0.1, 0.37, 1.0, 2.5, 7.0] {
                let q = integrate_semi_infinite(|w| b.density.eval(w) * (w * t).sin(), 0.0, omega_0, 1e-12)
                    .unwrap()
                    .value;
                let c = ohmic_kernel(eta, s, omega_0, t);
                assert!((q - c).abs() <= 1e-9 * c.abs().max(1e-12), "s = {s}, t = {t}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn kernel_integral_matches_integrated_kernel() {
        for b in [ohmic(0.5), ohmic(2.0), cutoff()] {
            for t in [0.05, 0.3, 1.0, 4.0] {
                let q = integrate_finite(|u| kernel_value(&b.density, u).unwrap(), 0.0, t, 1e-11)
                    .unwrap()
                    .value;
                let c = kernel_integral(&b.density, t).unwrap();
                assert!((q - c).abs() <= 1e-8 * c.abs(), "{:?}, t = {t}: {q} vs {c}", b.density);
            }
        }
        assert_eq!(kernel_integral(&cutoff().density, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn ohmic_kernel_tail_is_truncated() {
        let k = build_kernel(&ohmic(1.0), 0.05, 5000.0).unwrap();
        assert!(k.horizon() < 500.0);
        let peak = k.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(k.values[k.values.len() - 1].abs() < KERNEL_TRUNCATION * peak);
        // The band-limited kernel decays like 1/t and keeps its full table.
        assert_eq!(build_kernel(&cutoff(), 0.5, 1000.0).unwrap().values.len(), 2001);
    }

    #[test]
    fn zero_drive_stays_at_rest() {
        let p = SystemParams::red_detuned(1.0, 0.1, 0.02).unwrap();
        for b in [markovian(1e-3), ohmic(1.0), cutoff()] {
            let traj = simulate_mean_response(&b, &p, |_| 0.0, 0.05, 50.0).unwrap();
            assert_eq!(traj.len(), 1001);
            assert!(traj.iter().all(|s| s.q_m == 0.0 && s.p_m == 0.0 && s.a_re == 0.0 && s.a_im == 0.0));
        }
    }

    #[test]
    fn rejects_coarse_step() {
        let p = SystemParams::red_detuned(1.0, 0.1, 0.02).unwrap();
        assert!(MeanResponseSimulator::new(&markovian(1e-3), &p, 0.2, 100.0).is_err());
        assert!(MeanResponseSimulator::new(&markovian(1e-3), &p, 0.1, 100.0).is_ok());
    }

    #[test]
    fn markovian_free_decay() {
        let gamma = 0.01;
        let p = SystemParams::red_detuned(1.0, 0.1, 0.0).unwrap();
        let sim = MeanResponseSimulator::new(&markovian(gamma), &p, 0.05, 400.0).unwrap();
        let start = TrajectoryState {
            q_m: 1.0,
            ..TrajectoryState::at_rest()
        };
        let traj = sim.run(|_| 0.0, start).unwrap();
        for s in traj.iter().step_by(400) {
            let amp = (s.q_m * s.q_m + s.p_m * s.p_m).sqrt();
            let envelope = (-0.5 * gamma * s.time).exp();
            assert!((amp / envelope - 1.0).abs() < gamma, "t = {}: {amp} vs {envelope}", s.time);
        }
    }

    #[test]
    fn transfer_of_synthetic_signal() {
        let w = 1.3;
        let traj: Vec<TrajectoryState> = (0..20000)
            .map(|i| {
                let t = i as f64 * 0.01;
                TrajectoryState {
                    time: t,
                    q_m: 3.0 * (w * t - PI / 4.0).cos(),
                    ..Default::default()
                }
            })
            .collect();
        let chi = extract_transfer(&traj, w, 0.1).unwrap();
        assert!((chi.norm() - 3.0).abs() < 1e-10);
        assert!((chi.arg() - PI / 4.0).abs() < 1e-10);
        let zero: Vec<TrajectoryState> = traj.iter().map(|s| TrajectoryState { q_m: 0.0, ..*s }).collect();
        assert_eq!(extract_transfer(&zero, w, 0.1).unwrap(), Complex64::new(0.0, 0.0));
        assert!(matches!(extract_transfer(&traj, w, 0.95), Err(Error::WindowTooShort { .. })));
    }

    #[test]
    fn markovian_resonant_transfer() {
        let gamma = 0.01;
        let p = SystemParams::red_detuned(1.0, 0.1, 0.0).unwrap();
        let traj = simulate_mean_response(&markovian(gamma), &p, f64::cos, 0.05, 4000.0).unwrap();
        let chi = extract_transfer(&traj, 1.0, 0.75).unwrap();
        let expected = Complex64::new(0.0, 1.0 / gamma);
        assert!((chi - expected).norm() < 1e-2 * expected.norm(), "{chi}");
    }

    #[test]
    fn causality() {
        let p = SystemParams::red_detuned(1.0, 0.1, 0.02).unwrap();
        let sim = MeanResponseSimulator::new(&cutoff(), &p, 0.1, 300.0).unwrap();
        let t0 = 150.0;
        let a = sim.run(|t| (0.97 * t).cos(), TrajectoryState::at_rest()).unwrap();
        let b = sim
            .run(|t| (0.97 * t).cos() + if t > t0 { 5.0 } else { 0.0 }, TrajectoryState::at_rest())
            .unwrap();
        let cut = a.iter().position(|s| s.time > t0).unwrap();
        assert_eq!(a[..cut], b[..cut]);
        assert_ne!(a[cut], b[cut]);
    }

    #[test]
    fn response_is_linear_in_drive() {
        let p = SystemParams::red_detuned(1.0, 0.1, 0.02).unwrap();
        let sim = MeanResponseSimulator::new(&ohmic(2.0), &p, 0.05, 3000.0).unwrap();
        let one = extract_transfer(&sim.run(|t| (0.95 * t).cos(), TrajectoryState::at_rest()).unwrap(), 0.95, 0.5).unwrap();
        let two = extract_transfer(&sim.run(|t| 2.0 * (0.95 * t).cos(), TrajectoryState::at_rest()).unwrap(), 0.95, 0.5)
            .unwrap();
        assert!((two - one * 2.0).norm() <= 1e-10 * two.norm());
    }

    #[test]
    fn matches_frequency_domain_and_converges() {
        let b = ohmic(1.0);
        let p = SystemParams::red_detuned(1.0, 0.1, 0.02).unwrap();
        let w = 0.99;
        let exact = chi_xm(&b, &p, w).unwrap();
        let errors: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&dt| {
                let traj = simulate_mean_response(&b, &p, |t| (w * t).cos(), dt, 3000.0).unwrap();
                (extract_transfer(&traj, w, 0.5).unwrap() - exact).norm() / exact.norm()
            })
            .collect();
        assert!(errors[2] < 1e-2, "{errors:?}");
        assert!(errors.windows(2).all(|e| e[1] < e[0]), "{errors:?}");
    }

    #[test]
    fn unstable_parameters_diverge() {
        let p = SystemParams::new(1.0, -1.0, 0.1, Complex64::new(0.2, 0.0), 0.0).unwrap();
        let r = simulate_mean_response(&markovian(1e-3), &p, f64::cos, 0.05, 2000.0);
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }

    #[test]
    fn csv_dump() {
        let traj = vec![TrajectoryState {
            time: 0.5,
            q_m: 1.0,
            ..Default::default()
        }];
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRAJECTORY_HEADER));
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(row, vec![0.5, 1.0, 0.0, 0.0, 0.0]);
    }
}
