//! First and second generation CRONE controllers.
//!
//! Generation 1 shapes the controller directly,
//! `C = C₀ (1 + ω_I/s)^{n_I} ((1 + s/ω_b)/(1 + s/ω_h))^ν (1 + s/ω_F)^{-n_F}`.
//! Generation 2 shapes the open loop,
//! `β₀ = C₀ (1 + ω_I/s)^{n_I} ((1 + s/ω_h)/(1 + s/ω_b))^ν (1 + s/ω_F)^{-n_F}`,
//! and sets `C = G₀⁻¹ β₀`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{integral_action, low_pass, FactoredTransfer, Factor, StateSpaceModel, Zpk};

const HZ: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Generation {
    First,
    Second,
}

impl Generation {
    /// Admissible interval for the fractional order.
    pub fn order_range(self) -> (f64, f64) {
        match self {
            Generation::First => (0.0, 1.0),
            Generation::Second => (1.0, 2.0),
        }
    }
}

impl TryFrom<u8> for Generation {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Generation::First),
            2 => Ok(Generation::Second),
            _ => Err(format!("generation must be 1 or 2, got {v}")),
        }
    }
}

impl From<Generation> for u8 {
    fn from(g: Generation) -> u8 {
        match g {
            Generation::First => 1,
            Generation::Second => 2,
        }
    }
}

/// Design targets. Frequencies are in Hz and the margin in degrees, as
/// they appear in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CroneDesignSpec {
    pub generation: Generation,
    pub pm_deg: f64,
    pub wcg_hz: f64,
    pub wb_hz: f64,
    pub wh_hz: f64,
    pub wi_hz: f64,
    pub wf_hz: f64,
    pub ni: u32,
    pub nf: u32,
    #[serde(rename = "N")]
    pub n: usize,
    /// Generation 2 only: budget the uninverted plant delay into the
    /// fractional order.
    #[serde(default)]
    pub compensate_delay: bool,
}

impl CroneDesignSpec {
    /// The precision-stage design: 55° margin at 100 Hz, band 12.5–800 Hz.
    pub fn reference(generation: Generation) -> Self {
        let (ni, nf) = match generation {
            Generation::First => (1, 1),
            Generation::Second => (2, 3),
        };
        Self {
            generation,
            pm_deg: 55.0,
            wcg_hz: 100.0,
            wb_hz: 12.5,
            wh_hz: 800.0,
            wi_hz: 8.33,
            wf_hz: 1200.0,
            ni,
            nf,
            n: 4,
            compensate_delay: false,
        }
    }

    pub fn pm(&self) -> f64 {
        self.pm_deg.to_radians()
    }
    pub fn wcg(&self) -> f64 {
        self.wcg_hz * HZ
    }
    pub fn wb(&self) -> f64 {
        self.wb_hz * HZ
    }
    pub fn wh(&self) -> f64 {
        self.wh_hz * HZ
    }
    pub fn wi(&self) -> f64 {
        self.wi_hz * HZ
    }
    pub fn wf(&self) -> f64 {
        self.wf_hz * HZ
    }

    pub fn validate(&self) -> Result<()> {
        let freqs = [self.wcg_hz, self.wb_hz, self.wh_hz, self.wi_hz, self.wf_hz];
        if freqs.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::InvalidParameter("frequencies must be positive and finite".into()));
        }
        if !(self.pm_deg > 0.0 && self.pm_deg < 180.0) {
            return Err(Error::InvalidParameter(format!(
                "phase margin must lie in (0°, 180°), got {}°",
                self.pm_deg
            )));
        }
        if self.wb_hz >= self.wh_hz {
            return Err(Error::InvalidParameter("wb_hz must be below wh_hz".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("N must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Departures from `ω_I < ω_b < ω_cg < ω_h < ω_F`. These are legal
    /// but usually a typo.
    pub fn ordering_warnings(&self) -> Vec<String> {
        let chain = [
            ("wi_hz", self.wi_hz),
            ("wb_hz", self.wb_hz),
            ("wcg_hz", self.wcg_hz),
            ("wh_hz", self.wh_hz),
            ("wf_hz", self.wf_hz),
        ];
        chain
            .windows(2)
            .filter(|w| w[0].1 >= w[1].1)
            .map(|w| format!("{} = {} is not below {} = {}", w[0].0, w[0].1, w[1].0, w[1].1))
            .collect()
    }

    /// Phase of the integral action and low-pass factors at `ω_cg`.
    fn fixed_phase(&self) -> f64 {
        let w = self.wcg();
        -(self.ni as f64) * (FRAC_PI_2 - (w / self.wi()).atan()) - self.nf as f64 * (w / self.wf()).atan()
    }

    /// Phase of one unit of the fractional factor at `ω_cg`.
    fn unit_order_phase(&self) -> f64 {
        let w = self.wcg();
        let lead = (w / self.wb()).atan() - (w / self.wh()).atan();
        match self.generation {
            Generation::First => lead,
            Generation::Second => -lead,
        }
    }
}

/// Fractional order placing the open-loop phase at `-π + M_Φ` at crossover.
///
/// `plant_phase` is the phase at `ω_cg` of the plant part the controller does
/// not cancel: the whole plant for generation 1, and for generation 2 the
/// uninverted delay (or zero when it is ignored).
pub fn compute_nu(spec: &CroneDesignSpec, plant_phase: f64) -> Result<f64> {
    compute_nu_star(spec, plant_phase, 0.0)
}

/// [`compute_nu`] with `phase_lead` radians already supplied by reset.
pub fn compute_nu_star(spec: &CroneDesignSpec, plant_phase: f64, phase_lead: f64) -> Result<f64> {
    spec.validate()?;
    let needed = -PI + spec.pm() - plant_phase - phase_lead - spec.fixed_phase();
    let nu = needed / spec.unit_order_phase();
    let (lo, hi) = spec.generation.order_range();
    if !(lo..=hi).contains(&nu) {
        return Err(Error::Infeasible { nu, lo, hi });
    }
    Ok(nu)
}

/// Phase of the uncancelled plant part at crossover, see [`compute_nu`].
pub fn budget_phase(spec: &CroneDesignSpec, plant: &Zpk) -> f64 {
    match spec.generation {
        Generation::First => plant.phase_at(spec.wcg()),
        Generation::Second if spec.compensate_delay => -spec.wcg() * plant.delay,
        Generation::Second => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CroneController {
    pub spec: CroneDesignSpec,
    pub nu: f64,
    pub c0: f64,
    /// Rational plant inverse, generation 2 only.
    pub plant_inverse: Option<Zpk>,
}

impl CroneController {
    /// Integral action, fractional factor and low-pass, without `C₀`.
    pub fn shape(&self) -> FactoredTransfer {
        let s = &self.spec;
        let order = match s.generation {
            Generation::First => self.nu,
            Generation::Second => -self.nu,
        };
        FactoredTransfer::default()
            .with(Factor::Rational(integral_action(s.wi(), s.ni as i32)))
            .with(Factor::FractionalLead {
                order,
                low: s.wb(),
                high: s.wh(),
                cells: s.n,
            })
            .with(Factor::Rational(low_pass(s.wf(), s.nf as i32)))
    }

    /// `C₀` times [`Self::shape`]: the controller for generation 1 and the
    /// desired open loop β₀ for generation 2.
    pub fn beta0(&self) -> FactoredTransfer {
        self.shape().scaled(self.c0)
    }

    pub fn transfer(&self) -> FactoredTransfer {
        match &self.plant_inverse {
            Some(inv) => FactoredTransfer::new(vec![Factor::Rational(inv.clone())]).series(&self.beta0()),
            None => self.beta0(),
        }
    }

    pub fn with_nu(&self, nu: f64) -> Self {
        Self { nu, ..self.clone() }
    }

    pub fn with_c0(&self, c0: f64) -> Self {
        Self { c0, ..self.clone() }
    }

    /// Exact-fractional open loop `C(jω) G(jω)`.
    pub fn open_loop_exact(&self, plant: &Zpk, omega: f64) -> Result<Complex64> {
        Ok(self.transfer().exact_at(omega)? * plant.response_at(omega)?)
    }

    /// Open loop with the fractional factor replaced by its approximation.
    pub fn open_loop_approx(&self, plant: &Zpk, omega: f64) -> Result<Complex64> {
        Ok(self.transfer().approx_at(omega)? * plant.response_at(omega)?)
    }

    pub fn realize(&self) -> Result<StateSpaceModel> {
        self.transfer().to_zpk()?.realize(0)
    }
}

/// `C₀` making the exact-fractional loop gain (generation 1) or `|β₀|`
/// (generation 2) unity at crossover.
pub fn normalize_gain(controller: &CroneController, plant: &Zpk) -> Result<f64> {
    let w = controller.spec.wcg();
    let mut m = controller.shape().exact_at(w)?.norm();
    if controller.spec.generation == Generation::First {
        m *= plant.response_at(w)?.norm();
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::Normalization(format!("loop gain {m} at crossover")));
    }
    Ok(1.0 / m)
}

fn plant_inverse(plant: &Zpk) -> Result<Zpk> {
    if let Some(z) = plant.zeros.iter().find(|z| z.re >= 0.0) {
        return Err(Error::NonInvertiblePlant(format!("non-minimum-phase zero at {z}")));
    }
    if let Some(p) = plant.poles.iter().find(|p| p.re >= 0.0) {
        return Err(Error::NonInvertiblePlant(format!("pole at {p} is not strictly stable")));
    }
    plant.inverse_rational()
}

pub fn synthesize(spec: &CroneDesignSpec, plant: &Zpk) -> Result<CroneController> {
    spec.validate()?;
    let nu = compute_nu(spec, budget_phase(spec, plant))?;
    let plant_inverse = match spec.generation {
        Generation::First => None,
        Generation::Second => Some(plant_inverse(plant)?),
    };
    let mut c = CroneController {
        spec: spec.clone(),
        nu,
        c0: 1.0,
        plant_inverse,
    };
    c.c0 = normalize_gain(&c, plant)?;
    Ok(c)
}
