//! Fixed-step hybrid simulation of the reset loop.
//!
//! Flow is integrated with classical RK4. A sign change of the error inside a
//! step triggers a re-integration of that step in ten sub-steps, the first
//! crossing is located on the RK4 flow map and the reset states jump there.

mod kernel;
pub mod metrics;
pub mod reference;
pub mod scenarios;
pub mod sensitivity;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stability::ClosedLoop;

pub use kernel::simulate_from;
pub use metrics::{avg_power, noise_reduction_db, peak_abs, rms, settling_time, Metrics, Settling, SETTLING_FRACTION};
pub use reference::{feedforward, generate_reference, Feedforward, Kinematics, TriangleProfile, Trajectory};

/// The sample rate of the reference implementation, 20 kHz.
pub const DEFAULT_STEP: f64 = 5e-5;

fn default_step() -> f64 {
    DEFAULT_STEP
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineNoise {
    /// m.
    pub amplitude: f64,
    pub freq_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceShape {
    Pulse,
    Step,
}

/// Force added at the plant input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub shape: DisturbanceShape,
    pub amplitude: f64,
    pub onset: f64,
    /// Ignored for steps.
    #[serde(default)]
    pub width: f64,
}

impl Disturbance {
    /// Value just after (`left = false`) or just before `t`.
    fn at(&self, t: f64, left: bool) -> f64 {
        let after = |edge: f64| if left { t > edge } else { t >= edge };
        let on = match self.shape {
            DisturbanceShape::Step => after(self.onset),
            DisturbanceShape::Pulse => after(self.onset) && !after(self.onset + self.width),
        };
        if on {
            self.amplitude
        } else {
            0.0
        }
    }

    fn edges(&self) -> Vec<f64> {
        match self.shape {
            DisturbanceShape::Step => vec![self.onset],
            DisturbanceShape::Pulse => vec![self.onset, self.onset + self.width],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_step")]
    pub step: f64,
    pub duration: f64,
    #[serde(default)]
    pub reference: Option<TriangleProfile>,
    /// Needs a reference; the force is added to the controller output.
    #[serde(default)]
    pub feedforward: Option<Feedforward>,
    /// Injected at the measurement.
    #[serde(default)]
    pub noise: Option<SineNoise>,
    #[serde(default)]
    pub disturbance: Option<Disturbance>,
    /// Start of the window used for RMS and average power.
    #[serde(default)]
    pub window_start: f64,
}

impl SimulationConfig {
    pub fn new(duration: f64) -> Self {
        Self {
            step: DEFAULT_STEP,
            duration,
            reference: None,
            feedforward: None,
            noise: None,
            disturbance: None,
            window_start: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameter(format!("step {} must be positive", self.step)));
        }
        if self.duration.is_nan() || self.duration < 10.0 * self.step || !self.duration.is_finite() {
            return Err(Error::InvalidParameter("duration must cover at least 10 steps".into()));
        }
        if !(0.0..self.duration).contains(&self.window_start) {
            return Err(Error::InvalidParameter("window_start must lie inside the run".into()));
        }
        if self.feedforward.is_some() && self.reference.is_none() {
            return Err(Error::InvalidParameter("feedforward needs a reference".into()));
        }
        if let Some(r) = &self.reference {
            r.trajectory()?;
        }
        if let Some(n) = &self.noise {
            if !(n.freq_hz > 0.0 && n.amplitude.is_finite()) {
                return Err(Error::InvalidParameter("noise needs a positive frequency".into()));
            }
        }
        if let Some(d) = &self.disturbance {
            if !(d.onset >= 0.0 && d.width >= 0.0 && d.amplitude.is_finite()) {
                return Err(Error::InvalidParameter("disturbance needs onset, width >= 0".into()));
            }
        }
        Ok(())
    }

    /// Number of steps; the duration is rounded to the step.
    pub fn n_steps(&self) -> usize {
        (self.duration / self.step).round() as usize
    }

    /// Same run at another step.
    pub fn with_step(&self, step: f64) -> Self {
        Self { step, ..self.clone() }
    }
}

/// Exogenous inputs `[r, n, f]` as functions of time.
#[derive(Debug, Clone)]
pub(crate) struct Inputs {
    reference: Option<Trajectory>,
    feedforward: Option<Feedforward>,
    noise: Option<SineNoise>,
    disturbance: Option<Disturbance>,
}

impl Inputs {
    pub(crate) fn new(cfg: &SimulationConfig) -> Result<Self> {
        Ok(Self {
            reference: cfg.reference.as_ref().map(TriangleProfile::trajectory).transpose()?,
            feedforward: cfg.feedforward,
            noise: cfg.noise,
            disturbance: cfg.disturbance,
        })
    }

    pub(crate) fn at(&self, t: f64, left: bool) -> [f64; 3] {
        let (r, ff) = match &self.reference {
            Some(tr) => {
                let k = tr.at(t);
                (k.p, self.feedforward.map_or(0.0, |f| f.force(k.v, k.a)))
            }
            None => (0.0, 0.0),
        };
        let n = self
            .noise
            .map_or(0.0, |n| n.amplitude * (2.0 * std::f64::consts::PI * n.freq_hz * t).sin());
        let d = self.disturbance.map_or(0.0, |d| d.at(t, left));
        [r, n, ff + d]
    }

    /// Instants where an input is discontinuous.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.disturbance.map(|d| d.edges()).unwrap_or_default();
        b.sort_by(f64::total_cmp);
        b
    }
}

/// A simulated run. Samples sit on the uniform step grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub time: Vec<f64>,
    pub e: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// Reset instants, strictly increasing.
    pub events: Vec<f64>,
    /// Error at each reset instant, just before the jump.
    pub event_errors: Vec<f64>,
    pub metrics: Metrics,
    /// Loop state at the last sample.
    pub final_state: nalgebra::DVector<f64>,
}

impl SimulationTrace {
    /// Per-sample count of resets in `(t[k-1], t[k]]`.
    pub fn event_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.time.len()];
        let mut k = 0;
        for &te in &self.events {
            while k < self.time.len() && self.time[k] < te {
                k += 1;
            }
            if k < counts.len() {
                counts[k] += 1;
            }
        }
        counts
    }
}

/// Runs `cfg` on the loop from rest.
pub fn simulate(cl: &ClosedLoop, cfg: &SimulationConfig) -> Result<SimulationTrace> {
    simulate_from(cl, cfg, None)
}
