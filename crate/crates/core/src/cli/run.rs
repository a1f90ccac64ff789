//! Job execution. Each job renders one or more CSV tables; writing them out
//! is left to the caller.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use super::config::{Job, NamedBath, RunConfig};
use crate::bath::{gamma_eff, thermal_noise};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::homodyne::{s_add_at, sweep};
use crate::response::{chi_x0, chi_xm, effective_frequency, SystemParams};
use crate::sensing::{fit_linear, s_out};
use crate::timedomain::{extract_transfer, MeanResponseSimulator, TrajectoryState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Inserted before the output file's extension, e.g. `summary` turns
    /// `run.csv` into `run.summary.csv`. `None` for the main table.
    pub suffix: Option<&'static str>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobOutput {
    pub tables: Vec<Table>,
    /// Human-readable summary for the terminal.
    pub report: String,
    /// False when a validate job exceeds its tolerance.
    pub passed: bool,
}

/// Fixed 17-significant-digit rendering; failed values become empty fields.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.16e}")
    }
}

fn header(cfg: &RunConfig, columns: &str, extra: &[String]) -> String {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut h = String::new();
    let _ = writeln!(h, "# optosense {VERSION}");
    let _ = writeln!(h, "# generated_unix_time = {stamp}");
    let _ = writeln!(h, "# job = {}", cfg.job().name());
    let _ = writeln!(h, "# frequency_unit_rad_per_s = {}", num(cfg.frequency_unit()));
    for line in extra {
        let _ = writeln!(h, "# {line}");
    }
    let _ = writeln!(h, "# config:");
    for line in cfg.to_toml().lines() {
        let _ = writeln!(h, "#   {line}");
    }
    let _ = writeln!(h, "{columns}");
    h
}

fn bath_lines(baths: &[NamedBath]) -> Vec<String> {
    baths
        .iter()
        .map(|b| {
            let w = effective_frequency(&b.ctx).map(num).unwrap_or_else(|e| format!("undefined ({e})"));
            format!(
                "bath {}: {:?}, gamma_eff = {}, omega_eff = {w}",
                b.label,
                b.ctx.density,
                num(gamma_eff(&b.ctx))
            )
        })
        .collect()
}

fn grid_of(grid: Option<FrequencyGrid>) -> Result<FrequencyGrid> {
    grid.ok_or_else(|| Error::invalid("grid", "is required for this job"))
}

/// Runs the job described by a parsed config.
pub fn execute(cfg: &RunConfig) -> Result<JobOutput> {
    let r = cfg.resolve().map_err(|e| Error::InvalidParameter {
        field: "config",
        reason: e.to_string(),
    })?;
    match r.job {
        Job::Spectrum => spectrum(cfg, &r.params, &r.baths, grid_of(r.grid)?),
        Job::Sweep => sweep_job(cfg, &r.params, &r.baths, grid_of(r.grid)?),
        Job::Sense => sense(cfg, &r.params, &r.baths, grid_of(r.grid)?),
        Job::Validate => validate(cfg, &r.params, &r.baths),
    }
}

fn spectrum(cfg: &RunConfig, params: &SystemParams, baths: &[NamedBath], grid: FrequencyGrid) -> Result<JobOutput> {
    let include_thermal = cfg.spectrum.unwrap_or_default().include_thermal;
    let mut body = String::new();
    let mut report = String::new();
    for b in baths {
        let reference = chi_x0(&b.ctx, params)?.norm();
        let rows = grid
            .samples()
            .into_par_iter()
            .map(|w| {
                let chi = chi_xm(&b.ctx, params, w)?;
                let s_add = match s_add_at(&b.ctx, params, w, include_thermal) {
                    Err(Error::NoTransduction { .. }) => f64::NAN,
                    other => other?,
                };
                Ok((w, chi, s_add, thermal_noise(&b.ctx, w)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut best = (f64::NAN, 0.0f64);
        for (w, chi, s_add, s_xixi) in rows {
            let ratio = chi.norm() / reference;
            if ratio > best.1 {
                best = (w, ratio);
            }
            let _ = writeln!(
                body,
                "{},{},{},{},{},{},{}",
                b.label,
                num(w),
                num(chi.re),
                num(chi.im),
                num(ratio),
                num(s_add),
                num(s_xixi)
            );
        }
        let _ = writeln!(report, "{}: max chi_ratio {:.6e} at omega = {:.6}", b.label, best.1, best.0);
    }
    let mut extra = bath_lines(baths);
    extra.push(format!("include_thermal = {include_thermal}"));
    let text = header(cfg, "bath,omega,chi_xm_re,chi_xm_im,chi_ratio,s_add,s_xixi", &extra) + &body;
    Ok(JobOutput {
        tables: vec![Table { suffix: None, text }],
        report,
        passed: true,
    })
}

fn sweep_job(cfg: &RunConfig, params: &SystemParams, baths: &[NamedBath], grid: FrequencyGrid) -> Result<JobOutput> {
    let spec = cfg
        .sweep_spec(grid)
        .ok_or_else(|| Error::invalid("sweep", "missing job table"))?;
    let mut body = String::new();
    let mut report = String::new();
    for b in baths {
        let rows = sweep(&b.ctx, params, &spec)?;
        let mut failed = 0;
        let mut best = (f64::NAN, f64::INFINITY);
        for row in rows {
            let (w, s) = match &row.optimum {
                Ok(o) => *o,
                Err(_) => {
                    failed += 1;
                    (f64::NAN, f64::NAN)
                }
            };
            if s < best.1 {
                best = (row.axis_value, s);
            }
            let _ = writeln!(body, "{},{},{},{}", b.label, num(row.axis_value), num(w), num(s));
        }
        let _ = writeln!(
            report,
            "{}: smallest s_add_opt {:.6e} at {:?} = {:.6e}{}",
            b.label,
            best.1,
            spec.axis,
            best.0,
            if failed > 0 { format!(" ({failed} rows failed)") } else { String::new() }
        );
    }
    let text = header(cfg, "bath,axis_value,omega_opt,s_add_opt", &bath_lines(baths)) + &body;
    Ok(JobOutput {
        tables: vec![Table { suffix: None, text }],
        report,
        passed: true,
    })
}

fn sense(cfg: &RunConfig, params: &SystemParams, baths: &[NamedBath], grid: FrequencyGrid) -> Result<JobOutput> {
    let job = cfg.sense.as_ref().ok_or_else(|| Error::invalid("sense", "missing job table"))?;
    let base = cfg.sense_config().ok_or_else(|| Error::invalid("sense", "missing job table"))?;
    let mut body = String::new();
    let mut summary = String::new();
    let mut fits = Vec::new();
    let mut report = String::new();
    for b in baths {
        let mut responses = Vec::with_capacity(job.counts.len());
        for &n in &job.counts {
            let r = s_out(&b.ctx, params, &base.with_count(n), &grid)?;
            for (w, v) in grid.samples().into_iter().zip(&r.spectrum.values) {
                let _ = writeln!(body, "{},{n},{},{}", b.label, num(w), num(*v));
            }
            let _ = writeln!(summary, "{},{n},{},{}", b.label, num(r.resonant_value), num(r.resonance));
            responses.push(r.resonant_value);
        }
        let line = match fit_linear(&job.counts, &responses) {
            Ok(f) => format!(
                "fit {}: slope = {}, intercept = {}, r_squared = {}",
                b.label,
                num(f.slope),
                num(f.intercept),
                num(f.r_squared)
            ),
            Err(e) => format!("fit {}: {e}", b.label),
        };
        let _ = writeln!(report, "{line}");
        fits.push(line);
    }
    let mut extra = bath_lines(baths);
    extra.push(format!(
        "s_in = count * unit_mass * responsivity / frequency_unit_rad_per_s (conversion factor {})",
        num(1.0 / cfg.frequency_unit())
    ));
    let main = header(cfg, "bath,n,omega,s_out", &extra) + &body;
    extra.extend(fits);
    let summary = header(cfg, "bath,n,i_out,omega_eff", &extra) + &summary;
    Ok(JobOutput {
        tables: vec![
            Table { suffix: None, text: main },
            Table {
                suffix: Some("summary"),
                text: summary,
            },
        ],
        report,
        passed: true,
    })
}

fn validate(cfg: &RunConfig, params: &SystemParams, baths: &[NamedBath]) -> Result<JobOutput> {
    let job = cfg.validate.ok_or_else(|| Error::invalid("validate", "missing job table"))?;
    let (dt, t_final) = (job.dt.unwrap_or(0.05), job.t_final.unwrap_or(4000.0));
    let mut body = String::new();
    let mut report = String::new();
    let mut worst = 0.0f64;
    for b in baths {
        let centre = effective_frequency(&b.ctx)?;
        let sim = MeanResponseSimulator::new(&b.ctx, params, dt, t_final)?;
        let n = job.points - 1;
        let freqs: Vec<f64> = (0..=n)
            .map(|i| centre * (1.0 - job.span + 2.0 * job.span * i as f64 / n as f64))
            .collect();
        let rows = freqs
            .par_iter()
            .map(|&w| {
                let exact = chi_xm(&b.ctx, params, w)?.norm();
                let traj = sim.run(|t| (w * t).cos(), TrajectoryState::at_rest())?;
                let oracle = extract_transfer(&traj, w, job.settle_fraction)?.norm();
                Ok((w, exact, oracle, (oracle - exact).abs() / exact))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut bath_worst = 0.0f64;
        for (w, exact, oracle, dev) in rows {
            bath_worst = bath_worst.max(dev);
            let _ = writeln!(body, "{},{},{},{},{}", b.label, num(w), num(exact), num(oracle), num(dev));
        }
        worst = worst.max(bath_worst);
        let _ = writeln!(report, "{}: max relative deviation {:.3e}", b.label, bath_worst);
    }
    let passed = worst <= job.tolerance;
    let _ = writeln!(
        report,
        "max relative deviation: {worst:.3e} (tolerance {:.1e}) {}",
        job.tolerance,
        if passed { "PASS" } else { "FAIL" }
    );
    let text = header(cfg, "bath,omega,chi_xm_abs,oracle_abs,rel_dev", &bath_lines(baths)) + &body;
    Ok(JobOutput {
        tables: vec![Table { suffix: None, text }],
        report,
        passed,
    })
}
