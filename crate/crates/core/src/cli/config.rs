//! Run configuration: a TOML document with one `[system]` table, one or more
//! `[[bath]]` tables, an optional `[grid]` and exactly one job table
//! (`[spectrum]`, `[sweep]`, `[sense]` or `[validate]`).
//!
//! With `units = "omega_m"` (the default) every frequency and rate is given
//! in units of the mechanical frequency, and `system.omega_m_rad_s` fixes
//! what that unit is in rad/s. With `units = "rad_per_s"` frequencies are
//! absolute and `system.omega_m_rad_s` is also the mechanical frequency used
//! in the dynamics.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::{calibrate_eta, BathContext, SpectralDensity};
use crate::grid::FrequencyGrid;
use crate::homodyne::{SweepAxis, SweepSpec};
use crate::response::SystemParams;
use crate::sensing::SenseConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("{path} {reason}")]
    Field { path: String, reason: String },
}

fn field_err(path: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        path: path.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    OmegaM,
    RadPerS,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BathKind {
    Markovian,
    Ohmic,
    Cutoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Job {
    Spectrum,
    Sweep,
    Sense,
    Validate,
}

impl Job {
    pub fn name(self) -> &'static str {
        match self {
            Job::Spectrum => "spectrum",
            Job::Sweep => "sweep",
            Job::Sense => "sense",
            Job::Validate => "validate",
        }
    }
}

fn default_omega_m_rad_s() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default = "default_omega_m_rad_s")]
    pub omega_m_rad_s: f64,
    pub kappa: f64,
    pub coupling: f64,
    #[serde(default)]
    pub coupling_im: f64,
    /// Δ'_c; defaults to ω_m.
    pub detuning: Option<f64>,
    #[serde(default)]
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub label: Option<String>,
    pub kind: BathKind,
    /// Kelvin.
    pub temperature: f64,
    pub gamma_m: Option<f64>,
    /// Calibration target γ_eff = πJ(ω_m); replaces `eta` or `j_anchor`.
    pub gamma_eff: Option<f64>,
    pub eta: Option<f64>,
    pub s: Option<f64>,
    pub omega_0: Option<f64>,
    pub j_anchor: Option<f64>,
    pub k: Option<f64>,
    pub omega_lo: Option<f64>,
    pub omega_hi: Option<f64>,
    pub omega_ref: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumJob {
    /// Adds S_ξξ to S_add. Off by default: near ω_m the cavity term dominates
    /// at the bundled parameters.
    #[serde(default)]
    pub include_thermal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    Coupling,
    Kappa,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepJob {
    pub axis: AxisName,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub log_spacing: bool,
    #[serde(default)]
    pub include_thermal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SenseJob {
    /// Mass responsivity in rad/s per gram.
    pub responsivity: f64,
    /// Grams per adsorbed unit.
    pub unit_mass: f64,
    pub counts: Vec<u64>,
}

fn default_validate_points() -> usize {
    20
}
fn default_validate_span() -> f64 {
    0.1
}
fn default_settle() -> f64 {
    0.5
}
fn default_tolerance() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateJob {
    #[serde(default = "default_validate_points")]
    pub points: usize,
    /// Drive frequencies span [1 − span, 1 + span]·ω_eff.
    #[serde(default = "default_validate_span")]
    pub span: f64,
    /// Time step, in units of 1/ω_m (or seconds with `units = "rad_per_s"`).
    /// Defaults to 0.05/ω_m.
    pub dt: Option<f64>,
    /// Defaults to 4000/ω_m.
    pub t_final: Option<f64>,
    #[serde(default = "default_settle")]
    pub settle_fraction: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub units: Units,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub system: SystemConfig,
    pub bath: Vec<BathConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumJob>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepJob>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sense: Option<SenseJob>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateJob>,
}

/// A labelled bath ready for computation.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedBath {
    pub label: String,
    pub ctx: BathContext,
}

/// Everything a job needs, in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub job: Job,
    pub params: SystemParams,
    pub baths: Vec<NamedBath>,
    pub grid: Option<FrequencyGrid>,
}

impl RunConfig {
    pub fn job(&self) -> Job {
        // Exactly one body is present after `parse_config`.
        if self.spectrum.is_some() {
            Job::Spectrum
        } else if self.sweep.is_some() {
            Job::Sweep
        } else if self.sense.is_some() {
            Job::Sense
        } else {
            Job::Validate
        }
    }

    /// ω_m in internal units.
    pub fn omega_m(&self) -> f64 {
        match self.units {
            Units::OmegaM => 1.0,
            Units::RadPerS => self.system.omega_m_rad_s,
        }
    }

    /// rad/s per internal frequency unit.
    pub fn frequency_unit(&self) -> f64 {
        match self.units {
            Units::OmegaM => self.system.omega_m_rad_s,
            Units::RadPerS => 1.0,
        }
    }

    /// Rendered with every default filled in; parses back to the same config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let wm = self.omega_m();
        let s = &self.system;
        let coupling = Complex64::new(s.coupling, s.coupling_im);
        let params = SystemParams::new(wm, s.detuning.unwrap_or(wm), s.kappa, coupling, s.theta)
            .map_err(|e| field_err("system", e.to_string()))?;
        let baths = self
            .bath
            .iter()
            .enumerate()
            .map(|(i, b)| resolve_bath(b, i, wm, self.frequency_unit()))
            .collect::<Result<Vec<_>, _>>()?;
        let grid = self
            .grid
            .map(|g| FrequencyGrid::new(g.start, g.stop, g.points).map_err(|e| field_err("grid", e.to_string())))
            .transpose()?;
        Ok(Resolved {
            job: self.job(),
            params,
            baths,
            grid,
        })
    }

    pub fn sweep_spec(&self, grid: FrequencyGrid) -> Option<SweepSpec> {
        self.sweep.map(|j| SweepSpec {
            axis: match j.axis {
                AxisName::Coupling => SweepAxis::Coupling,
                AxisName::Kappa => SweepAxis::Kappa,
                AxisName::Theta => SweepAxis::Theta,
            },
            start: j.start,
            stop: j.stop,
            points: j.points,
            log_spacing: j.log_spacing,
            grid,
            include_thermal: j.include_thermal,
        })
    }

    pub fn sense_config(&self) -> Option<SenseConfig> {
        self.sense
            .as_ref()
            .map(|j| SenseConfig::new(j.responsivity, j.unit_mass, 0).expect("validated at parse time"))
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field_err(path, format!("must be > 0 (got {v})")))
    }
}

fn finite(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(field_err(path, "must be finite"))
    }
}

fn required(path: &str, v: Option<f64>) -> Result<f64, ConfigError> {
    v.ok_or_else(|| field_err(path, "is required"))
}

fn resolve_bath(b: &BathConfig, i: usize, wm: f64, unit: f64) -> Result<NamedBath, ConfigError> {
    let p = |name: &str| format!("bath[{i}].{name}");
    let unused = |names: &[(&str, Option<f64>)]| -> Result<(), ConfigError> {
        for (name, v) in names {
            if v.is_some() {
                return Err(field_err(p(name), format!("is not used by a {:?} bath", b.kind).to_lowercase()));
            }
        }
        Ok(())
    };
    let one_of = |a: (&str, Option<f64>), c: (&str, Option<f64>)| -> Result<(), ConfigError> {
        match (a.1, c.1) {
            (Some(_), Some(_)) => Err(field_err(p(a.0), format!("and {} are mutually exclusive", p(c.0)))),
            (None, None) => Err(field_err(p(a.0), format!("or {} is required", p(c.0)))),
            _ => Ok(()),
        }
    };
    if !(b.temperature.is_finite() && b.temperature >= 0.0) {
        return Err(field_err(p("temperature"), format!("must be >= 0 (got {})", b.temperature)));
    }
    for (name, v) in [
        ("gamma_m", b.gamma_m),
        ("gamma_eff", b.gamma_eff),
        ("eta", b.eta),
        ("s", b.s),
        ("omega_0", b.omega_0),
        ("j_anchor", b.j_anchor),
        ("omega_lo", b.omega_lo),
        ("omega_hi", b.omega_hi),
        ("omega_ref", b.omega_ref),
    ] {
        if let Some(v) = v {
            positive(&p(name), v)?;
        }
    }
    if let Some(k) = b.k {
        finite(&p("k"), k)?;
    }
    let density = match b.kind {
        BathKind::Markovian => {
            unused(&[
                ("eta", b.eta),
                ("s", b.s),
                ("omega_0", b.omega_0),
                ("j_anchor", b.j_anchor),
                ("k", b.k),
                ("omega_lo", b.omega_lo),
                ("omega_hi", b.omega_hi),
                ("omega_ref", b.omega_ref),
            ])?;
            one_of(("gamma_m", b.gamma_m), ("gamma_eff", b.gamma_eff))?;
            SpectralDensity::markovian(b.gamma_m.or(b.gamma_eff).unwrap_or_default())
        }
        BathKind::Ohmic => {
            unused(&[
                ("gamma_m", b.gamma_m),
                ("j_anchor", b.j_anchor),
                ("k", b.k),
                ("omega_lo", b.omega_lo),
                ("omega_hi", b.omega_hi),
                ("omega_ref", b.omega_ref),
            ])?;
            one_of(("eta", b.eta), ("gamma_eff", b.gamma_eff))?;
            let s = required(&p("s"), b.s)?;
            let omega_0 = required(&p("omega_0"), b.omega_0)?;
            let eta = match b.eta {
                Some(eta) => eta,
                None => calibrate_eta(s, omega_0, b.gamma_eff.unwrap_or_default(), wm)
                    .map_err(|e| field_err(p("gamma_eff"), e.to_string()))?,
            };
            SpectralDensity::ohmic(eta, s, omega_0)
        }
        BathKind::Cutoff => {
            unused(&[("gamma_m", b.gamma_m), ("eta", b.eta), ("s", b.s), ("omega_0", b.omega_0)])?;
            one_of(("j_anchor", b.j_anchor), ("gamma_eff", b.gamma_eff))?;
            let lo = required(&p("omega_lo"), b.omega_lo)?;
            let hi = required(&p("omega_hi"), b.omega_hi)?;
            if lo >= hi {
                return Err(field_err(p("omega_hi"), format!("must exceed {} ({lo})", p("omega_lo"))));
            }
            let k = b.k.unwrap_or(-2.0);
            let omega_ref = b.omega_ref.unwrap_or(wm);
            let j_anchor = match b.j_anchor {
                Some(j) => j,
                None => {
                    if !(lo..=hi).contains(&wm) {
                        return Err(field_err(p("gamma_eff"), "needs omega_m inside the band to calibrate"));
                    }
                    b.gamma_eff.unwrap_or_default() / PI / (wm / omega_ref).powf(k)
                }
            };
            SpectralDensity::cutoff_power_law(j_anchor, k, lo, hi, omega_ref)
        }
    }
    .map_err(|e| field_err(format!("bath[{i}]"), e.to_string()))?;
    let ctx = BathContext::with_unit(density, b.temperature, wm, unit).map_err(|e| field_err(format!("bath[{i}]"), e.to_string()))?;
    let label = b.label.clone().unwrap_or_else(|| default_label(&density));
    Ok(NamedBath { label, ctx })
}

fn default_label(d: &SpectralDensity) -> String {
    match *d {
        SpectralDensity::Markovian { .. } => "markovian".into(),
        SpectralDensity::Ohmic { s, .. } if s < 1.0 => format!("sub-ohmic-s{s}"),
        SpectralDensity::Ohmic { s, .. } if s > 1.0 => format!("super-ohmic-s{s}"),
        SpectralDensity::Ohmic { .. } => "ohmic".into(),
        SpectralDensity::CutoffPowerLaw { k, .. } => format!("cutoff-k{k}"),
    }
}

/// Parses and validates a configuration. Defaults are filled in, so the
/// returned value serializes to a complete record of the run.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let s = &cfg.system;
    positive("system.omega_m_rad_s", s.omega_m_rad_s)?;
    positive("system.kappa", s.kappa)?;
    finite("system.coupling", s.coupling)?;
    finite("system.coupling_im", s.coupling_im)?;
    finite("system.theta", s.theta)?;
    if let Some(d) = s.detuning {
        finite("system.detuning", d)?;
    }
    cfg.system.detuning = Some(s.detuning.unwrap_or(cfg.omega_m()));
    if cfg.bath.is_empty() {
        return Err(field_err("bath", "needs at least one [[bath]] table"));
    }

    let bodies = [
        cfg.spectrum.is_some(),
        cfg.sweep.is_some(),
        cfg.sense.is_some(),
        cfg.validate.is_some(),
    ];
    match bodies.iter().filter(|&&b| b).count() {
        1 => {}
        0 => return Err(field_err("config", "needs one job table: [spectrum], [sweep], [sense] or [validate]")),
        _ => return Err(field_err("config", "has more than one job table")),
    }
    let job = cfg.job();
    if job != Job::Validate && cfg.grid.is_none() {
        return Err(field_err("grid", format!("is required for the {} job", job.name())));
    }
    if let Some(g) = cfg.grid {
        finite("grid.start", g.start)?;
        finite("grid.stop", g.stop)?;
        if g.stop <= g.start {
            return Err(field_err("grid.stop", format!("must exceed grid.start ({})", g.start)));
        }
        if g.points < 2 {
            return Err(field_err("grid.points", "must be >= 2"));
        }
    }
    if let Some(j) = &cfg.sweep {
        finite("sweep.start", j.start)?;
        finite("sweep.stop", j.stop)?;
        if j.stop <= j.start {
            return Err(field_err("sweep.stop", format!("must exceed sweep.start ({})", j.start)));
        }
        if j.points < 2 {
            return Err(field_err("sweep.points", "must be >= 2"));
        }
        if j.axis != AxisName::Theta && j.start <= 0.0 {
            return Err(field_err("sweep.start", "must be > 0 for this axis"));
        }
        if j.axis == AxisName::Theta && j.log_spacing {
            return Err(field_err("sweep.log_spacing", "is not available for the theta axis"));
        }
    }
    if let Some(j) = &cfg.sense {
        positive("sense.responsivity", j.responsivity)?;
        positive("sense.unit_mass", j.unit_mass)?;
        if j.counts.is_empty() {
            return Err(field_err("sense.counts", "must not be empty"));
        }
    }
    if let Some(j) = &mut cfg.validate {
        let wm = match cfg.units {
            Units::OmegaM => 1.0,
            Units::RadPerS => cfg.system.omega_m_rad_s,
        };
        if j.points < 2 {
            return Err(field_err("validate.points", "must be >= 2"));
        }
        if !(j.span > 0.0 && j.span < 1.0) {
            return Err(field_err("validate.span", format!("must be in (0, 1) (got {})", j.span)));
        }
        if !(0.0..1.0).contains(&j.settle_fraction) {
            return Err(field_err("validate.settle_fraction", "must be in [0, 1)"));
        }
        positive("validate.tolerance", j.tolerance)?;
        let dt = j.dt.unwrap_or(0.05 / wm);
        let t_final = j.t_final.unwrap_or(4000.0 / wm);
        positive("validate.dt", dt)?;
        positive("validate.t_final", t_final)?;
        j.dt = Some(dt);
        j.t_final = Some(t_final);
    }
    cfg.resolve()?;
    Ok(cfg)
}
