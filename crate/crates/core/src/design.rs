//! The three-step reset design: linear CRONE synthesis, reset phase lead at
//! crossover, and slope retuning with gain renormalization.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::crone::{budget_phase, compute_nu_star, synthesize, CroneController, CroneDesignSpec, Generation};
use crate::df::{gdf_star_at, phase_lead};
use crate::error::{Error, Result};
use crate::lti::{wrap_pi, Zpk};
use crate::reset::{build, ResetControllerModel, ResetStrategy};

/// What `C₀` is normalized against after retuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Renormalization {
    /// Unit describing-function loop gain at crossover.
    #[default]
    DescribingFunction,
    /// Unit linear loop gain at crossover, ignoring the reset.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineOptions {
    pub renormalize: Renormalization,
    /// Largest accepted gap between the closed-form phase lead and the one
    /// read off the describing function, in degrees.
    pub phase_check_deg: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            renormalize: Renormalization::DescribingFunction,
            phase_check_deg: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CroneResetDesign {
    pub strategy: ResetStrategy,
    /// The step-one linear design.
    pub linear: CroneController,
    /// Phase lead at crossover, radians.
    pub phi_r: f64,
    /// The retuned controller, `ν*` and the renormalized `C₀`.
    pub controller: CroneController,
    pub model: ResetControllerModel,
}

impl CroneResetDesign {
    pub fn nu(&self) -> f64 {
        self.linear.nu
    }

    pub fn nu_star(&self) -> f64 {
        self.controller.nu
    }

    /// Describing-function open loop `G*_DF(jω) · G(jω)`.
    pub fn open_loop_df(&self, plant: &Zpk, omega: f64) -> Result<Complex64> {
        Ok(gdf_star_at(&self.model, omega)? * plant.response_at(omega)?)
    }

    pub fn report(&self) -> DesignReport {
        DesignReport {
            nu: Some(self.nu()),
            nu_star: Some(self.nu_star()),
            phi_r_deg: Some(self.phi_r.to_degrees()),
            c0: Some(self.controller.c0),
            feasible: true,
            reason: None,
            strategy: self.strategy,
            spec: self.linear.spec.clone(),
        }
    }
}

/// The plant as seen by the phase-margin target: generation 2 without
/// delay compensation shapes the loop on the delay-free plant.
pub fn shaping_plant(spec: &CroneDesignSpec, plant: &Zpk) -> Zpk {
    match spec.generation {
        Generation::Second if !spec.compensate_delay => Zpk { delay: 0.0, ..plant.clone() },
        _ => plant.clone(),
    }
}

/// Phase lead of the reset factor at crossover from its closed form, checked
/// against the describing function of the isolated reset factor.
pub fn crossover_phase_lead(spec: &CroneDesignSpec, strategy: &ResetStrategy, tolerance_deg: f64) -> Result<f64> {
    let w = spec.wcg();
    let analytic = phase_lead(strategy, w, spec);
    let iso = ResetControllerModel::isolated(spec, *strategy)?;
    let numeric = wrap_pi(gdf_star_at(&iso, w)?.arg() - iso.base.response_at(w)?.arg());
    if (analytic - numeric).abs().to_degrees() > tolerance_deg {
        return Err(Error::PhaseLeadMismatch {
            analytic_deg: analytic.to_degrees(),
            numeric_deg: numeric.to_degrees(),
        });
    }
    Ok(analytic)
}

pub fn design_pipeline(
    spec: &CroneDesignSpec,
    plant: &Zpk,
    strategy: ResetStrategy,
    options: &PipelineOptions,
) -> Result<CroneResetDesign> {
    strategy.validate()?;
    let linear = synthesize(spec, plant)?;
    let phi_r = crossover_phase_lead(spec, &strategy, options.phase_check_deg)?;
    let nu_star = compute_nu_star(spec, budget_phase(spec, plant), phi_r)?;

    let mut controller = linear.with_nu(nu_star);
    controller.c0 = crate::crone::normalize_gain(&controller, plant)?;
    let mut model = build(&controller, strategy)?;
    if options.renormalize == Renormalization::DescribingFunction && !strategy.is_linear() {
        let w = spec.wcg();
        let ratio = model.base.response_at(w)?.norm() / gdf_star_at(&model, w)?.norm();
        controller.c0 *= ratio;
        model = build(&controller, strategy)?;
    }
    Ok(CroneResetDesign {
        strategy,
        linear,
        phi_r,
        controller,
        model,
    })
}

/// Serializable design summary. Infeasible designs carry `feasible: false`
/// and the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignReport {
    pub nu: Option<f64>,
    pub nu_star: Option<f64>,
    pub phi_r_deg: Option<f64>,
    pub c0: Option<f64>,
    pub feasible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub strategy: ResetStrategy,
    pub spec: CroneDesignSpec,
}

impl DesignReport {
    pub fn infeasible(spec: &CroneDesignSpec, strategy: ResetStrategy, err: &Error) -> Self {
        let nu_star = match err {
            Error::Infeasible { nu, .. } => Some(*nu),
            _ => None,
        };
        Self {
            nu: None,
            nu_star,
            phi_r_deg: None,
            c0: None,
            feasible: false,
            reason: Some(err.to_string()),
            strategy,
            spec: spec.clone(),
        }
    }
}
