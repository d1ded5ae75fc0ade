//! WebAssembly bindings for the browser demo. Every entry point takes and
//! returns JSON strings; the `*_json` functions are the plain Rust versions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use crone_reset::crone::CroneDesignSpec;
use crone_reset::design::{design_pipeline, CroneResetDesign, DesignReport, PipelineOptions};
use crone_reset::error::Error;
use crone_reset::lti::{ComplexResponse, FrequencyGrid};
use crone_reset::plant::Plant;
use crone_reset::reset::{convex_combine, ResetStrategy};
use crone_reset::sim::{scenarios, simulate, Metrics, SimulationConfig};
use crone_reset::stability::build_closed_loop;

/// Most samples returned to the page per trace.
const MAX_TRACE_POINTS: usize = 2000;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    #[serde(default)]
    pub plant: Plant,
    pub design: CroneDesignSpec,
    pub strategy: ResetStrategy,
    #[serde(default)]
    pub pipeline: PipelineOptions,
    /// Defaults to a 0.3 s force pulse.
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
}

impl DemoConfig {
    fn parse(json: &str) -> Result<Self, String> {
        let cfg: Self = serde_json::from_str(json).map_err(|e| e.to_string())?;
        cfg.plant.validate().map_err(msg)?;
        cfg.design.validate().map_err(msg)?;
        cfg.strategy.validate().map_err(msg)?;
        if let Some(sim) = &cfg.simulation {
            sim.validate().map_err(msg)?;
        }
        Ok(cfg)
    }

    fn run_design(&self) -> Result<CroneResetDesign, Error> {
        design_pipeline(&self.design, &self.plant.zpk()?, self.strategy, &self.pipeline)
    }
}

fn msg(e: Error) -> String {
    e.to_string()
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Design report; infeasible designs come back with `feasible: false`.
pub fn design_json(config: &str) -> Result<String, String> {
    let cfg = DemoConfig::parse(config)?;
    let report = match cfg.run_design() {
        Ok(d) => d.report(),
        Err(e @ Error::Infeasible { .. }) => DesignReport::infeasible(&cfg.design, cfg.strategy, &e),
        Err(e) => return Err(e.to_string()),
    };
    to_json(&report)
}

#[derive(Debug, Serialize)]
struct Curve {
    mag_db: Vec<f64>,
    phase_deg: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Bode {
    freq_hz: Vec<f64>,
    plant: Curve,
    linear: Curve,
    describing_function: Curve,
}

fn curve(grid: &FrequencyGrid, f: impl Fn(f64) -> crone_reset::error::Result<Complex64>) -> Result<Curve, String> {
    let values = grid.omegas().iter().map(|&w| f(w)).collect::<Result<Vec<_>, _>>().map_err(msg)?;
    let r = ComplexResponse::new(grid.clone(), values).map_err(msg)?;
    Ok(Curve {
        mag_db: r.magnitude_db(),
        phase_deg: r.phase_deg(),
    })
}

/// Plant, linear open loop and describing-function open loop from 1 Hz to
/// 10 kHz.
pub fn bode_json(config: &str, points_per_decade: usize) -> Result<String, String> {
    let cfg = DemoConfig::parse(config)?;
    let d = cfg.run_design().map_err(msg)?;
    let plant = cfg.plant.zpk().map_err(msg)?;
    let grid = FrequencyGrid::logspace_hz(1.0, 1e4, points_per_decade).map_err(msg)?;
    to_json(&Bode {
        freq_hz: grid.hz(),
        plant: curve(&grid, |w| plant.response_at(w))?,
        linear: curve(&grid, |w| d.linear.open_loop_approx(&plant, w))?,
        describing_function: curve(&grid, |w| d.open_loop_df(&plant, w))?,
    })
}

#[derive(Debug, Serialize)]
struct Trace {
    time: Vec<f64>,
    e: Vec<f64>,
    y: Vec<f64>,
    events: Vec<f64>,
    metrics: Metrics,
}

/// Closed-loop run, thinned to at most 2000 samples per signal.
pub fn simulate_json(config: &str) -> Result<String, String> {
    let cfg = DemoConfig::parse(config)?;
    let d = cfg.run_design().map_err(msg)?;
    let hybrid = convex_combine(&d.model, true).map_err(msg)?;
    let cl = build_closed_loop(&hybrid, &cfg.plant.realize().map_err(msg)?).map_err(msg)?;
    let sim = cfg.simulation.clone().unwrap_or(SimulationConfig {
        duration: 0.3,
        ..scenarios::pulse()
    });
    let trace = simulate(&cl, &sim).map_err(msg)?;
    let stride = trace.time.len().div_ceil(MAX_TRACE_POINTS).max(1);
    let thin = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<_>>();
    to_json(&Trace {
        time: thin(&trace.time),
        e: thin(&trace.e),
        y: thin(&trace.y),
        events: trace.events,
        metrics: trace.metrics,
    })
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn design(config: &str) -> Result<String, JsError> {
    js(design_json(config))
}

#[wasm_bindgen]
pub fn bode(config: &str, points_per_decade: usize) -> Result<String, JsError> {
    js(bode_json(config, points_per_decade))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(config: &str) -> Result<String, JsError> {
    js(simulate_json(config))
}
