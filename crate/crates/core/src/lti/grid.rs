use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Strictly increasing list of positive angular frequencies (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyGrid(Vec<f64>);

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::InvalidParameter("empty frequency grid".into()));
        }
        if omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter(
                "grid frequencies must be finite and positive".into(),
            ));
        }
        if omegas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "grid frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self(omegas))
    }

    /// Logarithmic grid from `lo` to `hi` rad/s (both included) with the given
    /// density. Points sit on the decade lattice `10^(k/ppd)`, so round
    /// frequencies such as 100 are hit exactly when they lie on it.
    pub fn logspace(lo: f64, hi: f64, points_per_decade: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || points_per_decade == 0 {
            return Err(Error::InvalidParameter(format!(
                "log grid needs 0 < lo < hi and a positive density (got {lo}, {hi}, {points_per_decade})"
            )));
        }
        let ppd = points_per_decade as f64;
        let k0 = (lo.log10() * ppd - 1e-9).ceil() as i64;
        let k1 = (hi.log10() * ppd + 1e-9).floor() as i64;
        let mut w: Vec<f64> = (k0..=k1).map(|k| 10f64.powf(k as f64 / ppd)).collect();
        if w.is_empty() {
            w = vec![lo, hi];
        }
        Self::new(w)
    }

    /// Same as [`FrequencyGrid::logspace`] with the bounds given in Hz. The
    /// lattice is laid out in Hz, so e.g. 100 Hz is an exact grid point.
    pub fn logspace_hz(lo_hz: f64, hi_hz: f64, points_per_decade: usize) -> Result<Self> {
        let hz = Self::logspace(lo_hz, hi_hz, points_per_decade)?;
        Self::new(hz.0.iter().map(|f| 2.0 * PI * f).collect())
    }

    /// `count` log-spaced points between `lo` and `hi` inclusive.
    pub fn log_points(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Self::new(vec![lo]);
        }
        let (a, b) = (lo.ln(), hi.ln());
        Self::new(
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect(),
        )
    }

    pub fn from_hz(hz: &[f64]) -> Result<Self> {
        Self::new(hz.iter().map(|f| 2.0 * PI * f).collect())
    }

    /// Inserts `factor - 1` log-spaced points in every interval. The original
    /// points are kept, so the result is a superset of `self`.
    pub fn refine(&self, factor: usize) -> Self {
        if factor <= 1 || self.0.len() < 2 {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.0.len() * factor);
        for pair in self.0.windows(2) {
            let (a, b) = (pair[0].ln(), pair[1].ln());
            for i in 0..factor {
                out.push((a + (b - a) * i as f64 / factor as f64).exp());
            }
        }
        out.push(*self.0.last().unwrap());
        // exp(ln(x)) can drift by an ulp; pin the original points back.
        for (i, w) in self.0.iter().enumerate() {
            out[i * factor] = *w;
        }
        Self(out)
    }

    pub fn omegas(&self) -> &[f64] {
        &self.0
    }

    pub fn hz(&self) -> Vec<f64> {
        self.0.iter().map(|w| w / (2.0 * PI)).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for FrequencyGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FrequencyGrid> for Vec<f64> {
    fn from(g: FrequencyGrid) -> Self {
        g.0
    }
}

/// Complex frequency response sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexResponse {
    pub grid: FrequencyGrid,
    pub values: Vec<Complex64>,
}

impl ComplexResponse {
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} grid points but {} response values",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn magnitude_db(&self) -> Vec<f64> {
        self.values.iter().map(|v| 20.0 * v.norm().log10()).collect()
    }

    /// Phase in degrees, unwrapped along the grid starting from the
    /// principal value at the first point.
    pub fn phase_deg(&self) -> Vec<f64> {
        unwrap_deg(self.values.iter().map(|v| v.arg().to_degrees()))
    }
}

/// Removes 360° jumps from a phase sequence.
pub fn unwrap_deg(phases: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for p in phases {
        match out.last() {
            None => out.push(p),
            Some(&prev) => {
                let mut q = p;
                while q - prev > 180.0 {
                    q -= 360.0;
                }
                while q - prev < -180.0 {
                    q += 360.0;
                }
                out.push(q);
            }
        }
    }
    out
}

/// Wraps an angle in radians to (-π, π].
pub fn wrap_pi(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}
