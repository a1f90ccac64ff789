//! Output spectrum of the sensor under a white mass-loading input.

use rayon::prelude::*;

use crate::bath::BathContext;
use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, RealSpectrum};
use crate::homodyne::coefficients;
use crate::response::{effective_frequency, SystemParams};

/// Mass-loading input: `count` adsorbed units of `unit_mass` grams on a
/// resonator with mass responsivity `responsivity` (rad/s per gram).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenseConfig {
    pub responsivity: f64,
    pub unit_mass: f64,
    pub count: u64,
}

impl SenseConfig {
    pub fn new(responsivity: f64, unit_mass: f64, count: u64) -> Result<Self> {
        if !(responsivity.is_finite() && responsivity > 0.0) {
            return Err(Error::invalid("responsivity", format!("must be > 0 (got {responsivity})")));
        }
        if !(unit_mass.is_finite() && unit_mass > 0.0) {
            return Err(Error::invalid("unit_mass", format!("must be > 0 (got {unit_mass})")));
        }
        Ok(Self {
            responsivity,
            unit_mass,
            count,
        })
    }

    pub fn with_count(mut self, count: u64) -> Self {
        self.count = count;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SenseResult {
    pub spectrum: RealSpectrum,
    /// I_out, the output spectrum interpolated at the resonance.
    pub resonant_value: f64,
    pub resonance: f64,
}

/// S_in = N m ℛ, in rad/s.
pub fn s_in(cfg: &SenseConfig) -> f64 {
    cfg.count as f64 * cfg.unit_mass * cfg.responsivity
}

/// S_out(ω) = (|A|² + |B|²)/2 + S_in |C|², with S_in expressed in the
/// frequency units of `ctx`. I_out is read at ω_eff by cubic interpolation.
pub fn s_out(ctx: &BathContext, params: &SystemParams, cfg: &SenseConfig, grid: &FrequencyGrid) -> Result<SenseResult> {
    let input = s_in(cfg) / ctx.frequency_unit;
    let values = grid
        .samples()
        .into_par_iter()
        .map(|w| {
            let k = coefficients(ctx, params, w)?;
            Ok(0.5 * (k.a_coef.norm_sqr() + k.b_coef.norm_sqr()) + input * k.c_coef.norm_sqr())
        })
        .collect::<Result<Vec<f64>>>()?;
    let spectrum = RealSpectrum { grid: *grid, values };
    let resonance = effective_frequency(ctx)?;
    let resonant_value = spectrum.interpolate(resonance)?;
    Ok(SenseResult {
        spectrum,
        resonant_value,
        resonance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 0 when the responses have no variance.
    pub r_squared: f64,
}

/// Ordinary least squares of `responses` against `counts`.
pub fn fit_linear(counts: &[u64], responses: &[f64]) -> Result<LinearFit> {
    if counts.len() != responses.len() {
        return Err(Error::DegenerateFit(format!(
            "{} counts but {} responses",
            counts.len(),
            responses.len()
        )));
    }
    if counts.len() < 3 {
        return Err(Error::DegenerateFit("at least 3 points are required".into()));
    }
    let n = counts.len() as f64;
    let x: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = responses.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all counts are equal".into()));
    }
    let sxy: f64 = x.iter().zip(responses).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let syy: f64 = responses.iter().map(|yi| (yi - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        0.0
    } else {
        let ss_res: f64 = x
            .iter()
            .zip(responses)
            .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{calibrate_eta, SpectralDensity};
    use crate::homodyne::cavity_noise;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const CHROMOSOME_MASS: f64 = 2.7e-13;
    const RESPONSIVITY: f64 = 1e21;

    fn chromosomes(n: u64) -> SenseConfig {
        SenseConfig::new(RESPONSIVITY, CHROMOSOME_MASS, n).unwrap()
    }

    fn super_ohmic() -> BathContext {
        let eta = calibrate_eta(2.0, 10.0, PI * 1e-3, 1.0).unwrap();
        BathContext::with_unit(SpectralDensity::ohmic(eta, 2.0, 10.0).unwrap(), 0.0, 1.0, 1e6).unwrap()
    }

    fn markovian() -> BathContext {
        BathContext::with_unit(SpectralDensity::markovian(PI * 1e-3).unwrap(), 0.0, 1.0, 1e6).unwrap()
    }

    fn reference() -> SystemParams {
        SystemParams::red_detuned(1.0, 0.1, 0.02).unwrap()
    }

    #[test]
    fn input_power() {
        assert_eq!(s_in(&chromosomes(0)), 0.0);
        assert!((s_in(&chromosomes(1)) / 2.7e8 - 1.0).abs() < 1e-14);
        assert!((s_in(&chromosomes(2)) / 5.4e8 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        assert!(SenseConfig::new(0.0, 1.0, 1).is_err());
        assert!(SenseConfig::new(1.0, -1.0, 1).is_err());
    }

    #[test]
    fn empty_input_is_noise_floor() {
        let grid = FrequencyGrid::new(0.9, 1.1, 51).unwrap();
        let b = super_ohmic();
        let r = s_out(&b, &reference(), &chromosomes(0), &grid).unwrap();
        for (w, v) in grid.samples().into_iter().zip(&r.spectrum.values) {
            let k = coefficients(&b, &reference(), w).unwrap();
            let floor = 0.5 * (k.a_coef.norm_sqr() + k.b_coef.norm_sqr());
            assert_eq!(*v, floor);
            // S_out(N = 0) / |C|² is the cavity part of S_add.
            let ratio = v / k.c_coef.norm_sqr();
            assert!((ratio / cavity_noise(&b, &reference(), w).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resonant_value_is_interpolated_at_resonance() {
        let grid = FrequencyGrid::new(0.9, 1.1, 2001).unwrap();
        let b = markovian();
        let r = s_out(&b, &reference(), &chromosomes(1), &grid).unwrap();
        assert_eq!(r.resonance, 1.0);
        assert_eq!(r.resonant_value, r.spectrum.interpolate(1.0).unwrap());
        let narrow = FrequencyGrid::new(1.01, 1.1, 11).unwrap();
        assert!(matches!(s_out(&b, &reference(), &chromosomes(1), &narrow), Err(Error::OutsideGrid { .. })));
    }

    #[test]
    fn fit_examples() {
        let f = fit_linear(&[0, 1, 2, 3], &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert_eq!(f.r_squared, 1.0);
        let c = fit_linear(&[0, 1, 2], &[4.0, 4.0, 4.0]).unwrap();
        assert_eq!((c.slope, c.r_squared), (0.0, 0.0));
        assert!(fit_linear(&[2, 2, 2], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_linear(&[0, 1], &[1.0, 2.0]).is_err());
        assert!(fit_linear(&[0, 1, 2], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn resonant_response_is_linear_in_count() {
        let grid = FrequencyGrid::new(0.9, 1.0, 1001).unwrap();
        let b = super_ohmic();
        let counts = [0u64, 1, 2];
        let i: Vec<f64> = counts
            .iter()
            .map(|&n| s_out(&b, &reference(), &chromosomes(n), &grid).unwrap().resonant_value)
            .collect();
        assert!(fit_linear(&counts, &i).unwrap().r_squared > 0.999);
    }

    fn any_bath() -> impl Strategy<Value = BathContext> {
        prop_oneof![
            (1e-4..1e-2f64)
                .prop_map(|g| BathContext::with_unit(SpectralDensity::markovian(g).unwrap(), 0.0, 1.0, 1e6).unwrap()),
            (1e-4..1e-2f64, 0.3..3.0f64).prop_map(|(eta, s)| {
                BathContext::with_unit(SpectralDensity::ohmic(eta, s, 10.0).unwrap(), 0.0, 1.0, 1e6).unwrap()
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn output_is_affine_in_count(b in any_bath(), g in 1e-3..0.1f64, kappa in 0.02..0.5f64, n in 2u64..50) {
            let grid = FrequencyGrid::new(0.9, 1.1, 21).unwrap();
            let p = SystemParams::red_detuned(1.0, kappa, g).unwrap();
            let at = |k: u64| s_out(&b, &p, &chromosomes(k), &grid).unwrap().spectrum.values;
            let (s0, s1, sn) = (at(0), at(1), at(n));
            for i in 0..grid.len() {
                let expected = n as f64 * (s1[i] - s0[i]);
                prop_assert!(((sn[i] - s0[i]) - expected).abs() <= 1e-12 * expected.abs());
            }
        }

        #[test]
        fn resonant_response_increases_with_count(b in any_bath(), g in 1e-3..0.1f64, n in 0u64..20) {
            let grid = FrequencyGrid::new(0.8, 1.2, 41).unwrap();
            let p = SystemParams::red_detuned(1.0, 0.1, g).unwrap();
            let at = |k: u64| s_out(&b, &p, &chromosomes(k), &grid).unwrap().resonant_value;
            prop_assert!(at(n + 1) > at(n));
        }
    }
}
