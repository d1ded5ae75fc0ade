//! Scalar figures of merit computed from stored trace vectors.

use serde::{Deserialize, Serialize};

use super::SimulationTrace;
use crate::error::{Error, Result};

/// Fraction of the peak that counts as settled.
pub const SETTLING_FRACTION: f64 = 0.15;

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn avg_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Largest `|x|`, refined between samples by the parabola through the
/// largest sample and its neighbours.
pub fn peak_abs(x: &[f64]) -> f64 {
    let Some((k, &m)) = x.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())) else {
        return 0.0;
    };
    if k == 0 || k + 1 == x.len() {
        return m.abs();
    }
    let s = m.signum();
    let (a, b, c) = (s * x[k - 1], s * m, s * x[k + 1]);
    let curv = a - 2.0 * b + c;
    if curv >= 0.0 {
        return b;
    }
    b - (c - a).powi(2) / (8.0 * curv)
}

/// `10·log10(P_ref / P_test)`: positive when the test run is quieter.
pub fn noise_reduction_db(p_ref: f64, p_test: f64) -> Result<f64> {
    if !(p_ref > 0.0 && p_test > 0.0) {
        return Err(Error::InvalidParameter("powers must be positive".into()));
    }
    Ok(10.0 * (p_ref / p_test).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settling {
    /// Infinite when never settled.
    pub time: f64,
    pub settled: bool,
}

/// First instant after the peak of `|y|` from which `|y|` stays at or below
/// `fraction · peak`, linearly interpolated between samples.
pub fn settling_time(t: &[f64], y: &[f64], fraction: f64) -> Settling {
    let never = Settling {
        time: f64::INFINITY,
        settled: false,
    };
    let peak = peak_abs(y);
    if t.is_empty() || peak == 0.0 {
        return never;
    }
    let thr = fraction * peak;
    let Some(last) = y.iter().rposition(|v| v.abs() > thr) else {
        return Settling { time: t[0], settled: true };
    };
    if last + 1 >= y.len() {
        return never;
    }
    let (a, b) = (y[last].abs(), y[last + 1].abs());
    let frac = if a == b { 0.0 } else { (a - thr) / (a - b) };
    Settling {
        time: t[last] + frac * (t[last + 1] - t[last]),
        settled: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    /// RMS of `e` over the window, m.
    pub rms_error: f64,
    /// Mean of `y²` over the window.
    pub avg_power: f64,
    /// Peak of `|y|` over the whole run, m.
    pub peak: f64,
    /// `None` when `|y|` never stays below the threshold.
    pub settling_time: Option<f64>,
    pub events: usize,
}

impl Metrics {
    pub fn compute(trace: &SimulationTrace, window_start: f64) -> Self {
        let i0 = trace.time.partition_point(|&t| t < window_start);
        let s = settling_time(&trace.time, &trace.y, SETTLING_FRACTION);
        Self {
            rms_error: rms(&trace.e[i0..]),
            avg_power: avg_power(&trace.y[i0..]),
            peak: peak_abs(&trace.y),
            settling_time: s.settled.then_some(s.time),
            events: trace.events.len(),
        }
    }
}
