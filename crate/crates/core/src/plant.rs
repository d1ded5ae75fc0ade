//! The identified precision positioning stage,
//! `P(s) = k / (m s² + c s + s_k) · e^{-sτ}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{RationalTransfer, StateSpaceModel, Zpk};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Plant {
    pub gain: f64,
    pub mass: f64,
    pub damping: f64,
    pub stiffness: f64,
    pub delay: f64,
    /// Padé order used whenever the delay has to be realized.
    pub pade_order: usize,
}

impl Default for Plant {
    fn default() -> Self {
        Self::stage()
    }
}

impl Plant {
    /// The stage with a `0.9 s` damping term.
    pub fn stage() -> Self {
        Self {
            gain: 0.5474,
            mass: 0.5718,
            damping: 0.9,
            stiffness: 146.3,
            delay: 2.5e-4,
            pade_order: 1,
        }
    }

    /// The stage read with the alternative `0.95 s` damping term.
    pub fn stage_alt_damping() -> Self {
        Self {
            damping: 0.95,
            ..Self::stage()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.gain, self.mass, self.damping, self.stiffness, self.delay]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.mass <= 0.0 || self.gain == 0.0 || self.delay < 0.0 {
            return Err(Error::InvalidParameter(format!("invalid plant {self:?}")));
        }
        if self.delay > 0.0 && self.pade_order == 0 {
            return Err(Error::InvalidParameter("plant delay needs pade_order ≥ 1".into()));
        }
        Ok(())
    }

    pub fn transfer(&self) -> Result<RationalTransfer> {
        RationalTransfer::new(vec![self.gain], vec![self.mass, self.damping, self.stiffness])?
            .with_delay(self.delay)
    }

    /// Zero/pole/gain form including the exact delay.
    pub fn zpk(&self) -> Result<Zpk> {
        Ok(self.transfer()?.to_zpk())
    }

    pub fn response_at(&self, omega: f64) -> Result<Complex64> {
        self.transfer()?.response_at(omega)
    }

    /// Realization with the delay replaced by its Padé approximant.
    pub fn realize(&self) -> Result<StateSpaceModel> {
        self.validate()?;
        self.zpk()?.realize(self.pade_order)
    }

    /// Feedforward coefficients `(m, c)` in controller-output units, so that
    /// `m·a + c·v` cancels the inertial and viscous terms.
    pub fn feedforward_coefficients(&self) -> (f64, f64) {
        (self.mass / self.gain, self.damping / self.gain)
    }
}
