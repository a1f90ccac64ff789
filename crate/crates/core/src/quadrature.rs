//! Adaptive Gauss–Kronrod quadrature on finite and semi-infinite intervals,
//! plus Cauchy principal values for integrands with one interior simple pole.
//!
//! Every routine takes its integrand as a plain `Fn(f64) -> f64`; integrands
//! carry no mutable state and may be shared across threads.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_SUBDIVISIONS: usize = 1 << 15;
/// Absolute error floor below which a result is always accepted.
pub const ABS_FLOOR: f64 = 1e-14;

// 21-point Kronrod abscissae (positive half, descending) with the embedded
// 10-point Gauss rule on the odd indices.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_810_605_224_850,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            abs_floor: ABS_FLOOR,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
        }
    }
}

impl QuadratureOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// QUADPACK-style error rescaling of the raw |Kronrod - Gauss| difference.
fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

fn gauss_kronrod_21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half;
    let err = (res_k - res_g) * half;
    let abs_value = res_abs * half.abs();
    (
        value,
        rescale_error(err, abs_value, res_asc * half.abs()),
        abs_value,
    )
}

/// Globally adaptive bisection on `[a, b]`. `a > b` is allowed and flips the sign.
pub fn integrate_finite_with<F>(f: F, a: f64, b: f64, opts: &QuadratureOptions) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("interval", format!("bounds must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    if a > b {
        let r = integrate_finite_with(f, b, a, opts)?;
        return Ok(QuadratureResult { value: -r.value, ..r });
    }

    let (value, error, abs_value) = gauss_kronrod_21(&f, a, b);
    let mut evaluations = 21;
    let mut total_value = value;
    let mut total_error = error;
    let mut total_abs = abs_value;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error, abs_value });
    // The last term is the roundoff limit set by cancellation in ∫|f|.
    let tolerance = |v: f64, abs: f64| {
        (opts.rel_tol * v.abs())
            .max(opts.abs_floor)
            .max(100.0 * f64::EPSILON * abs)
    };

    let mut subdivisions = 0;
    while total_error > tolerance(total_value, total_abs) {
        if subdivisions >= opts.max_subdivisions || !total_value.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                estimate: total_value,
                error: total_error,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in floating point.
            return Err(Error::QuadratureNonConvergence {
                estimate: total_value,
                error: total_error,
                subdivisions,
            });
        }
        let (v1, e1, m1) = gauss_kronrod_21(&f, worst.a, mid);
        let (v2, e2, m2) = gauss_kronrod_21(&f, mid, worst.b);
        evaluations += 42;
        subdivisions += 1;
        total_value += v1 + v2 - worst.value;
        total_error += e1 + e2 - worst.error;
        total_abs += m1 + m2 - worst.abs_value;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1, abs_value: m1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2, abs_value: m2 });

        // Re-sum periodically so the running totals do not drift.
        if subdivisions % 256 == 0 {
            total_value = heap.iter().map(|s| s.value).sum();
            total_error = heap.iter().map(|s| s.error).sum();
            total_abs = heap.iter().map(|s| s.abs_value).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error_estimate: f64 = heap.iter().map(|s| s.error).sum();
    Ok(QuadratureResult {
        value,
        error_estimate,
        evaluations,
    })
}

pub fn integrate_finite<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    integrate_finite_with(f, a, b, &QuadratureOptions::with_rel_tol(rel_tol))
}

/// ∫_a^∞ f(x) dx for integrands decaying at least like `exp(-x / decay_scale)`.
///
/// The tail is mapped onto `[0, 1)` with `x = a + L t / (1 - t)`, `L = decay_scale`,
/// and handed to the finite-interval routine; no truncation length is involved.
pub fn integrate_semi_infinite_with<F>(
    f: F,
    a: f64,
    decay_scale: f64,
    opts: &QuadratureOptions,
) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    if !(decay_scale > 0.0 && decay_scale.is_finite()) {
        return Err(Error::invalid("decay_scale", format!("must be positive, got {decay_scale}")));
    }
    let mapped = |t: f64| {
        let one_minus = 1.0 - t;
        let x = a + decay_scale * t / one_minus;
        if !x.is_finite() {
            return 0.0;
        }
        let v = f(x) * decay_scale / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_finite_with(mapped, 0.0, 1.0, opts)
}

pub fn integrate_semi_infinite<F>(f: F, a: f64, decay_scale: f64, rel_tol: f64) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    integrate_semi_infinite_with(f, a, decay_scale, &QuadratureOptions::with_rel_tol(rel_tol))
}

/// Offsets ±d around `pole` with both `pole + d` and `pole - d` exactly
/// representable, so terms odd about the pole cancel to rounding.
fn symmetric_offset(pole: f64, u: f64) -> f64 {
    (pole + u) - pole
}

/// Residue r = lim (x - p) f(x), from a symmetric difference refined once by
/// Richardson extrapolation.
fn estimate_residue<F: Fn(f64) -> f64>(f: &F, pole: f64, half_width: f64) -> Result<f64> {
    let sym = |h: f64| {
        let d = symmetric_offset(pole, h);
        0.5 * d * (f(pole + d) - f(pole - d))
    };
    let h = 1e-3 * half_width;
    let coarse = sym(h);
    let fine = sym(0.5 * h);
    let residue = (4.0 * fine - coarse) / 3.0;
    let scale = coarse.abs().max(fine.abs());
    // For a simple pole the even part h (f(p+h) + f(p-h)) / 2 shrinks like h;
    // growth under refinement exposes a higher-order singularity.
    let even = |h: f64| {
        let d = symmetric_offset(pole, h);
        0.5 * d * (f(pole + d) + f(pole - d))
    };
    let (even_coarse, even_fine) = (even(h), even(0.5 * h));
    let floor = 1e3 * f64::EPSILON * scale.max(1.0);
    let unstable = !residue.is_finite()
        || (coarse - fine).abs() > 1e-3 * scale + floor
        || even_fine.abs() > 1.5 * even_coarse.abs() + floor;
    if unstable {
        return Err(Error::UnstableResidue { pole, coarse, fine });
    }
    Ok(residue)
}

/// Smallest admissible pole distance from an endpoint, relative to b − a.
pub const MIN_POLE_MARGIN: f64 = 1e-9;

/// Cauchy principal value of ∫_a^b f(x) dx where `f` has a simple pole at `pole`.
///
/// The residue `r` is estimated numerically and `r / (x - pole)` is subtracted,
/// with `r ln((b - pole) / (pole - a))` added back analytically. Inside the
/// window symmetric about the pole the subtracted terms cancel pairwise, so that
/// part is integrated as `f(p + u) + f(p - u)` over `u ∈ (0, δ]`.
pub fn principal_value_with<F>(
    f: F,
    pole: f64,
    a: f64,
    b: f64,
    opts: &QuadratureOptions,
) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    // Closer than this to an endpoint the symmetric window is too narrow to
    // resolve in floating point.
    let margin = MIN_POLE_MARGIN * (b - a);
    if !(a + margin < pole && pole < b - margin) {
        return Err(Error::PoleOnBoundary { pole, a, b });
    }
    let left = pole - a;
    let right = b - pole;
    let delta = left.min(right);
    let residue = estimate_residue(&f, pole, delta)?;

    // The pair sum h(u) = f(p+u) + f(p-u) is smooth and even in u, but forming
    // it cancels two O(1/u) terms, so roundoff grows as u -> 0. Below u0 it is
    // replaced by the fit a + b u² through h(u0/2) and h(u0).
    let pair = |u: f64| {
        let d = symmetric_offset(pole, u);
        f(pole + d) + f(pole - d)
    };
    let u0 = 1e-3 * delta;
    let (h_half, h_full) = (pair(0.5 * u0), pair(u0));
    let b2 = (h_full - h_half) / (0.75 * u0 * u0);
    let head = (h_full - b2 * u0 * u0) * u0 + b2 * u0 * u0 * u0 / 3.0;
    let mut paired = integrate_finite_with(pair, u0, delta, opts)?;
    paired.value += head;
    paired.evaluations += 4;
    let subtracted = |x: f64| f(x) - residue / (x - pole);
    let side = if right > left {
        integrate_finite_with(subtracted, pole + delta, b, opts)?
    } else if left > right {
        integrate_finite_with(subtracted, a, pole - delta, opts)?
    } else {
        QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        }
    };

    Ok(QuadratureResult {
        value: paired.value + side.value + residue * (right / left).ln(),
        error_estimate: paired.error_estimate + side.error_estimate,
        evaluations: paired.evaluations + side.evaluations + 8,
    })
}

pub fn principal_value<F>(f: F, pole: f64, a: f64, b: f64, rel_tol: f64) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    principal_value_with(f, pole, a, b, &QuadratureOptions::with_rel_tol(rel_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    #[test]
    fn kronrod_weights_integrate_polynomials_exactly() {
        // 21-point Kronrod is exact through degree 31.
        for degree in 0..=31 {
            let (v, _, _) = gauss_kronrod_21(&|x: f64| x.powi(degree), -1.0, 1.0);
            let exact = if degree % 2 == 1 { 0.0 } else { 2.0 / (degree as f64 + 1.0) };
            assert!((v - exact).abs() < 1e-14, "degree {degree}: {v} vs {exact}");
        }
        let gauss_sum: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((gauss_sum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn finite_interval_references() {
        let r = integrate_finite(|x| x, 0.0, 1.0, 1e-10).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
        assert!(r.error_estimate >= 0.0);

        let r = integrate_finite(|x: f64| (-x).exp(), 0.0, 40.0, 1e-12).unwrap();
        assert!((r.value - (1.0 - (-40.0f64).exp())).abs() < 1e-12);
        assert!((r.value - 1.0).abs() < 1e-12);

        let r = integrate_finite(f64::sin, 0.0, 2.0 * PI, 1e-10).unwrap();
        assert!(r.value.abs() < 1e-13);
    }

    #[test]
    fn reversed_interval_flips_sign() {
        let r = integrate_finite(|x| x * x, 1.0, 0.0, 1e-10).unwrap();
        assert!((r.value + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn non_convergence_carries_best_estimate() {
        let opts = QuadratureOptions {
            rel_tol: 1e-14,
            abs_floor: 0.0,
            max_subdivisions: 4,
        };
        let err = integrate_finite_with(|x: f64| (50.0 * x).sin() / x.sqrt(), 1e-9, 1.0, &opts).unwrap_err();
        match err {
            Error::QuadratureNonConvergence { estimate, subdivisions, .. } => {
                assert!(estimate.is_finite());
                assert_eq!(subdivisions, 4);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn semi_infinite_gamma_moments() {
        for (k, expected) in [(0, 1.0), (1, 1.0), (2, 2.0)] {
            let r = integrate_semi_infinite(|x: f64| x.powi(k) * (-x).exp(), 0.0, 1.0, 1e-12).unwrap();
            assert!((r.value - expected).abs() < 1e-11, "k={k}: {}", r.value);
        }
    }

    #[test]
    fn principal_value_references() {
        let r = principal_value(|x| 1.0 / (x - 1.0), 1.0, 0.0, 2.0, 1e-10).unwrap();
        assert!(r.value.abs() < 1e-8);
        let r = principal_value(|x| 1.0 / (x - 1.0), 1.0, 0.0, 3.0, 1e-10).unwrap();
        assert!((r.value - LN_2).abs() < 1e-8);
        let r = principal_value(|x| x / x, 0.0, -1.0, 1.0, 1e-10).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn principal_value_rejects_boundary_pole() {
        assert!(matches!(
            principal_value(|x| 1.0 / x, 0.0, 0.0, 1.0, 1e-8),
            Err(Error::PoleOnBoundary { .. })
        ));
        assert!(matches!(
            principal_value(|x| 1.0 / (x - 2.0), 2.0, 0.0, 1.0, 1e-8),
            Err(Error::PoleOnBoundary { .. })
        ));
    }

    #[test]
    fn principal_value_rejects_double_pole() {
        let r = principal_value(|x| 1.0 / (x * x), 0.0, -1.0, 2.0, 1e-8);
        assert!(matches!(r, Err(Error::UnstableResidue { .. })), "{r:?}");
    }

    #[test]
    fn principal_value_with_smooth_numerator() {
        // PV ∫_0^2 e^x / (x - 1) dx = e (Ei(1) - Ei(-1)).
        let expected = std::f64::consts::E * (1.895_117_816_355_936_8 - (-0.219_383_934_395_520_27));
        let direct = principal_value(|x: f64| x.exp() / (x - 1.0), 1.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((direct.value - expected).abs() < 1e-9, "{} vs {expected}", direct.value);
    }
}
