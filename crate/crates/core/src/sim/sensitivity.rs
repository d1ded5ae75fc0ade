//! Stepped-sine identification of the sensitivity functions.
//!
//! A sine is injected at the measurement noise input; with `Y` and `N` the
//! first harmonics of `y` and `n`, `T = -Y/N` and `S = (Y + N)/N`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{simulate, SimulationConfig, SineNoise, DEFAULT_STEP};
use crate::error::{Error, Result};
use crate::lti::{ComplexResponse, FrequencyGrid};
use crate::stability::{ClosedLoop, OUT_Y};

const NOISE_INPUT: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub freqs_hz: Vec<f64>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Time discarded before measuring, s.
    #[serde(default = "default_settle")]
    pub settle: f64,
    /// Measured periods; rounded up to an even count.
    #[serde(default = "default_cycles")]
    pub cycles: usize,
    /// Upper bound on the step; the actual step divides the period.
    #[serde(default = "default_step")]
    pub step: f64,
    /// Largest change between the two halves of the window still counted as
    /// settled.
    #[serde(default = "default_settle_tol")]
    pub settle_tolerance: f64,
}

fn default_amplitude() -> f64 {
    1e-6
}
fn default_settle() -> f64 {
    0.5
}
fn default_cycles() -> usize {
    10
}
fn default_step() -> f64 {
    DEFAULT_STEP
}
fn default_settle_tol() -> f64 {
    0.01
}

impl SweepSpec {
    pub fn new(freqs_hz: Vec<f64>) -> Self {
        Self {
            freqs_hz,
            amplitude: default_amplitude(),
            settle: default_settle(),
            cycles: default_cycles(),
            step: default_step(),
            settle_tolerance: default_settle_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs_hz.is_empty() || self.freqs_hz.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(Error::InvalidParameter("sweep needs positive frequencies".into()));
        }
        if !(self.amplitude > 0.0 && self.step > 0.0 && self.settle >= 0.0 && self.cycles > 0) {
            return Err(Error::InvalidParameter("sweep amplitude, step and cycles must be positive".into()));
        }
        if self.freqs_hz.iter().any(|f| 1.0 / f < 4.0 * self.step) {
            return Err(Error::InvalidParameter("sweep frequency above a quarter of the sample rate".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityPoint {
    pub freq_hz: f64,
    pub s: Complex64,
    pub t: Complex64,
    /// False when the response had not settled; such points are excluded
    /// from the responses.
    pub settled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityEstimate {
    pub points: Vec<SensitivityPoint>,
}

impl SensitivityEstimate {
    fn response(&self, pick: impl Fn(&SensitivityPoint) -> Complex64) -> Result<ComplexResponse> {
        let ok: Vec<&SensitivityPoint> = self.points.iter().filter(|p| p.settled).collect();
        let grid = FrequencyGrid::from_hz(&ok.iter().map(|p| p.freq_hz).collect::<Vec<_>>())?;
        Ok(ComplexResponse {
            grid,
            values: ok.into_iter().map(pick).collect(),
        })
    }

    pub fn s(&self) -> Result<ComplexResponse> {
        self.response(|p| p.s)
    }

    pub fn t(&self) -> Result<ComplexResponse> {
        self.response(|p| p.t)
    }
}

fn first_harmonic(x: &[f64], t: &[f64], omega: f64) -> Complex64 {
    let sum: Complex64 = x.iter().zip(t).map(|(&x, &t)| x * Complex64::from_polar(1.0, -omega * t)).sum();
    sum * (2.0 / x.len() as f64)
}

fn estimate_point(cl: &ClosedLoop, spec: &SweepSpec, freq_hz: f64) -> Result<SensitivityPoint> {
    let period = 1.0 / freq_hz;
    let per_cycle = (period / spec.step).ceil() as usize;
    let step = period / per_cycle as f64;
    let settle_cycles = (spec.settle * freq_hz).ceil() as usize;
    let cycles = spec.cycles.div_ceil(2) * 2;
    let mut cfg = SimulationConfig::new((settle_cycles + cycles) as f64 * period);
    cfg.step = step;
    cfg.noise = Some(SineNoise {
        amplitude: spec.amplitude,
        freq_hz,
    });
    let trace = simulate(cl, &cfg)?;
    let omega = 2.0 * std::f64::consts::PI * freq_hz;
    let start = settle_cycles * per_cycle;
    let end = start + cycles * per_cycle;
    let half = start + cycles / 2 * per_cycle;
    let n: Vec<f64> = trace.time.iter().map(|t| spec.amplitude * (omega * t).sin()).collect();
    let yn: Vec<f64> = trace.y.iter().zip(&n).map(|(y, n)| y + n).collect();
    let h = |x: &[f64], a: usize, b: usize| first_harmonic(&x[a..b], &trace.time[a..b], omega);
    let (hn, hy, hyn) = (h(&n, start, end), h(&trace.y, start, end), h(&yn, start, end));
    let drift = |x: &[f64], full: Complex64| {
        let d = (h(x, start, half) - h(x, half, end)).norm();
        d / full.norm().max(f64::MIN_POSITIVE)
    };
    let settled = drift(&trace.y, hy).max(drift(&yn, hyn)) <= spec.settle_tolerance;
    Ok(SensitivityPoint {
        freq_hz,
        s: hyn / hn,
        t: -hy / hn,
        settled,
    })
}

/// Runs one simulation per frequency, in parallel when enabled.
pub fn estimate_sensitivity(cl: &ClosedLoop, spec: &SweepSpec) -> Result<SensitivityEstimate> {
    spec.validate()?;
    #[cfg(feature = "parallel")]
    let points: Result<Vec<_>> = {
        use rayon::prelude::*;
        spec.freqs_hz.par_iter().map(|&f| estimate_point(cl, spec, f)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let points: Result<Vec<_>> = spec.freqs_hz.iter().map(|&f| estimate_point(cl, spec, f)).collect();
    Ok(SensitivityEstimate { points: points? })
}

/// `(S, T)` of the loop with resets ignored.
pub fn linear_sensitivity(cl: &ClosedLoop, omega: f64) -> Result<(Complex64, Complex64)> {
    let n = cl.n_states();
    let m = DMatrix::from_fn(n, n, |i, j| Complex64::new(-cl.a[(i, j)], if i == j { omega } else { 0.0 }));
    let b = cl.b.column(NOISE_INPUT).map(|v| Complex64::new(v, 0.0));
    let x = m.lu().solve(&b).ok_or(Error::SingularResolvent { omega })?;
    let y_over_n = cl.c.row(OUT_Y).map(|v| Complex64::new(v, 0.0)).dot(&x.transpose()) + cl.d[(OUT_Y, NOISE_INPUT)];
    Ok((Complex64::new(1.0, 0.0) + y_over_n, -y_over_n))
}
