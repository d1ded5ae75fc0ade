//! Ready-made loops and runs on the positioning stage.

use crate::crone::{CroneDesignSpec, Generation};
use crate::design::{design_pipeline, CroneResetDesign, PipelineOptions};
use crate::error::Result;
use crate::plant::Plant;
use crate::reset::{convex_combine, ResetKind, ResetStrategy};
use crate::stability::{build_closed_loop, ClosedLoop};

use super::{Disturbance, DisturbanceShape, SimulationConfig, SineNoise, TriangleProfile};

/// Noise frequencies of the attenuation study, Hz.
pub const NOISE_FREQS_HZ: [f64; 8] = [300.0, 400.0, 500.0, 600.0, 700.0, 800.0, 900.0, 1000.0];

/// Pulse force giving a peak of about 530 nm with linear CRONE-1.
pub const PULSE_AMPLITUDE: f64 = 0.0914;
pub const PULSE_WIDTH: f64 = 5e-3;

/// Lag reset with `γ = p = 0.5`.
pub fn lag_reset() -> ResetStrategy {
    ResetStrategy {
        kind: ResetKind::Lag,
        gamma: 0.5,
        p: 0.5,
    }
}

/// Lag reset with `p = 1`: the linear CRONE controller.
pub fn linear() -> ResetStrategy {
    ResetStrategy { p: 1.0, ..lag_reset() }
}

/// A designed controller and its loop with the stage. Reset copies with zero
/// weight are pruned when `prune` is set.
#[derive(Debug, Clone)]
pub struct StageLoop {
    pub design: CroneResetDesign,
    pub closed_loop: ClosedLoop,
}

pub fn stage_loop(generation: Generation, strategy: ResetStrategy, plant: &Plant, prune: bool) -> Result<StageLoop> {
    let spec = CroneDesignSpec::reference(generation);
    let design = design_pipeline(&spec, &plant.zpk()?, strategy, &PipelineOptions::default())?;
    let hybrid = convex_combine(&design.model, prune)?;
    let closed_loop = build_closed_loop(&hybrid, &plant.realize()?)?;
    Ok(StageLoop { design, closed_loop })
}

/// Scanning motion: 100 µm stroke at 5 Hz with feedforward, three periods,
/// the first one excluded from the metrics.
pub fn tracking(plant: &Plant) -> SimulationConfig {
    let (m, c) = plant.feedforward_coefficients();
    let period = 0.2;
    SimulationConfig {
        reference: Some(TriangleProfile {
            amplitude: 1e-4,
            period,
            snap: 600.0,
        }),
        feedforward: Some(super::Feedforward { m, c }),
        window_start: period,
        ..SimulationConfig::new(3.0 * period)
    }
}

/// 5 s of sine noise; the first second is excluded from the metrics.
pub fn noise(freq_hz: f64) -> SimulationConfig {
    SimulationConfig {
        noise: Some(SineNoise {
            amplitude: 1e-6,
            freq_hz,
        }),
        window_start: 1.0,
        ..SimulationConfig::new(5.0)
    }
}

/// Rectangular force pulse at the plant input from `t = 0`.
pub fn pulse() -> SimulationConfig {
    SimulationConfig {
        disturbance: Some(Disturbance {
            shape: DisturbanceShape::Pulse,
            amplitude: PULSE_AMPLITUDE,
            onset: 0.0,
            width: PULSE_WIDTH,
        }),
        ..SimulationConfig::new(2.0)
    }
}
