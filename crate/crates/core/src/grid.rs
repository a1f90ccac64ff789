use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform frequency grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    start: f64,
    stop: f64,
    points: usize,
}

impl FrequencyGrid {
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self> {
        if !start.is_finite() || !stop.is_finite() {
            return Err(Error::invalid("grid", "endpoints must be finite"));
        }
        if start >= stop {
            return Err(Error::invalid("grid", format!("start ({start}) must be < stop ({stop})")));
        }
        if points < 2 {
            return Err(Error::invalid("grid", "at least 2 points are required"));
        }
        Ok(Self { start, stop, points })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.stop - self.start) / (self.points - 1) as f64
    }

    pub fn omega(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.stop
        } else {
            self.start + i as f64 * self.spacing()
        }
    }

    pub fn samples(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.omega(i)).collect()
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.start && omega <= self.stop
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub grid: FrequencyGrid,
    pub values: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(
                "values",
                format!("{} values for a {}-point grid", values.len(), grid.len()),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn magnitude(&self) -> RealSpectrum {
        RealSpectrum {
            grid: self.grid,
            values: self.values.iter().map(|z| z.norm()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealSpectrum {
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
}

impl RealSpectrum {
    pub fn new(grid: FrequencyGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(
                "values",
                format!("{} values for a {}-point grid", values.len(), grid.len()),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Location and value of the largest sample, refined by a parabola through
    /// the neighbouring samples. Boundary maxima are returned unrefined.
    pub fn argmax(&self) -> (f64, f64) {
        let i = extreme_index(&self.values, |a, b| a > b);
        refine(&self.grid, &self.values, i)
    }

    pub fn argmin(&self) -> (f64, f64) {
        let i = extreme_index(&self.values, |a, b| a < b);
        refine(&self.grid, &self.values, i)
    }

    /// Four-point cubic (Lagrange) interpolation; linear on a two-point grid.
    pub fn interpolate(&self, omega: f64) -> Result<f64> {
        let g = &self.grid;
        if !g.contains(omega) {
            return Err(Error::OutsideGrid {
                omega,
                start: g.start(),
                stop: g.stop(),
            });
        }
        let n = g.len();
        let h = g.spacing();
        let pos = ((omega - g.start()) / h).clamp(0.0, (n - 1) as f64);
        if n < 4 {
            let i = (pos.floor() as usize).min(n - 2);
            let t = pos - i as f64;
            return Ok(self.values[i] * (1.0 - t) + self.values[i + 1] * t);
        }
        let i0 = (pos.floor() as usize).saturating_sub(1).min(n - 4);
        let t = pos - i0 as f64;
        let y = &self.values[i0..i0 + 4];
        let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
        let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
        let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
        let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
        Ok(l0 * y[0] + l1 * y[1] + l2 * y[2] + l3 * y[3])
    }

    /// Full width at half maximum of the tallest peak, with linear
    /// interpolation of the half-height crossings. `None` if the peak
    /// runs into either end of the grid before dropping to half height.
    pub fn fwhm(&self) -> Option<f64> {
        let v = &self.values;
        let i = extreme_index(v, |a, b| a > b);
        let half = v[i] / 2.0;
        let cross = |j: usize, k: usize| {
            let (x0, x1) = (self.grid.omega(j), self.grid.omega(k));
            x0 + (half - v[j]) / (v[k] - v[j]) * (x1 - x0)
        };
        let left = (0..i).rev().find(|&j| v[j] <= half).map(|j| cross(j, j + 1))?;
        let right = (i + 1..v.len()).find(|&j| v[j] <= half).map(|j| cross(j - 1, j))?;
        Some(right - left)
    }
}

/// Index of the best finite sample (0 if none is finite).
fn extreme_index(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| better(v, values[b])) {
            best = Some(i);
        }
    }
    best.unwrap_or(0)
}

fn refine(grid: &FrequencyGrid, y: &[f64], i: usize) -> (f64, f64) {
    if i == 0 || i + 1 == y.len() {
        return (grid.omega(i), y[i]);
    }
    let (ym, y0, yp) = (y[i - 1], y[i], y[i + 1]);
    let curv = ym - 2.0 * y0 + yp;
    if curv == 0.0 || !curv.is_finite() {
        return (grid.omega(i), y0);
    }
    let shift = (0.5 * (ym - yp) / curv).clamp(-0.5, 0.5);
    let value = y0 - 0.25 * (ym - yp) * shift;
    (grid.omega(i) + shift * grid.spacing(), value)
}
