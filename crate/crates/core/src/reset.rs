//! Reset elements: splitting a controller into a first-order reset part Σ_r
//! and its linear complement Σ_nr, the partial-reset jump map and the
//! convex combination with the linear base.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::crone::{CroneController, CroneDesignSpec};
use crate::error::{Error, Result};
use crate::lti::{lead, Factor, StateSpaceModel, Zpk};

/// Which first-order factor of the controller is reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetKind {
    /// `ω_I / s`
    Integrator,
    /// `(1 + s/ω_h) / (1 + s/ω_b)`
    Lag,
    /// `1 / (1 + s/ω_b)`
    FirstOrderFilter,
    /// `(1 + s/ω_b) / (1 + s/ω_h)`. Not a recommended choice.
    LeadFilter,
    /// `1 / (1 + s/ω_h)`. Not a recommended choice.
    LeadPole,
}

impl ResetKind {
    pub const RECOMMENDED: [ResetKind; 3] = [ResetKind::Integrator, ResetKind::Lag, ResetKind::FirstOrderFilter];

    /// The reset factor Σ_r for a given design.
    pub fn factor(self, spec: &CroneDesignSpec) -> Result<Zpk> {
        let (wb, wh) = (spec.wb(), spec.wh());
        let real = |x: f64| Complex64::new(x, 0.0);
        Ok(match self {
            ResetKind::Integrator => {
                if spec.ni == 0 {
                    return Err(Error::Decomposition(
                        "integrator reset needs at least one integral action (ni ≥ 1)".into(),
                    ));
                }
                Zpk::new(vec![], vec![real(0.0)], spec.wi(), 0.0)
            }
            ResetKind::Lag => lead(wb, wh).inverse_rational()?,
            ResetKind::FirstOrderFilter => Zpk::new(vec![], vec![real(-wb)], wb, 0.0),
            ResetKind::LeadFilter => lead(wb, wh),
            ResetKind::LeadPole => Zpk::new(vec![], vec![real(-wh)], wh, 0.0),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetStrategy {
    pub kind: ResetKind,
    pub gamma: f64,
    pub p: f64,
}

impl ResetStrategy {
    pub fn new(kind: ResetKind, gamma: f64, p: f64) -> Result<Self> {
        let s = Self { kind, gamma, p };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("p", self.p)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// True when resetting cannot change anything.
    pub fn is_linear(&self) -> bool {
        self.gamma == 1.0 || self.p == 1.0
    }
}

/// Σ_r and Σ_nr in zero/pole/gain form, `C = Σ_nr Σ_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub sigma_r: Zpk,
    pub sigma_nr: Zpk,
}

/// Splits the (rationally approximated) controller into the reset factor
/// and everything else. Zeros and poles that match exactly cancel, so the
/// integer lead in the complement carries one more power than the
/// controller for lag reset.
pub fn decompose(controller: &CroneController, kind: ResetKind) -> Result<Decomposition> {
    let sigma_r = kind.factor(&controller.spec)?;
    let sigma_nr = controller
        .transfer()
        .with(Factor::Rational(sigma_r.inverse_rational()?))
        .to_zpk()?;
    if !sigma_nr.is_proper() {
        return Err(Error::Decomposition(format!(
            "{kind:?} reset leaves an improper complement ({} zeros, {} poles)",
            sigma_nr.zeros.len(),
            sigma_nr.poles.len()
        )));
    }
    Ok(Decomposition { sigma_r, sigma_nr })
}

/// One-state realization `ẋ = a x + r u`, `y = x + d u` of a first-order
/// reset factor.
pub fn realize_reset_factor(f: &Zpk) -> Result<StateSpaceModel> {
    if f.poles.len() != 1 || f.zeros.len() > 1 || f.poles[0].im != 0.0 {
        return Err(Error::Decomposition("reset factors are first order".into()));
    }
    let p = f.poles[0].re;
    let (d, r) = match f.zeros.first() {
        None => (0.0, f.gain),
        // k (s - z)/(s - p) = k + k (p - z)/(s - p)
        Some(z) => (f.gain, f.gain * (p - z.re)),
    };
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    StateSpaceModel::new(one(p), one(r), one(1.0), one(d))
}

/// Base linear realization `Σ_r` followed by `Σ_nr`, with the reset states
/// first, plus the strategy that governs the jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawResetModel", into = "RawResetModel")]
pub struct ResetControllerModel {
    pub strategy: ResetStrategy,
    pub base: StateSpaceModel,
    pub n_r: usize,
}

impl ResetControllerModel {
    pub fn n_nr(&self) -> usize {
        self.base.n_states() - self.n_r
    }

    /// `diag(γ I_{n_r}, I_{n_nr})`.
    pub fn a_rho(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.jump_diagonal())
    }

    pub fn jump_diagonal(&self) -> DVector<f64> {
        let n = self.base.n_states();
        DVector::from_fn(n, |i, _| if i < self.n_r { self.strategy.gamma } else { 1.0 })
    }

    /// The reset factor on its own, as a one-state reset model.
    pub fn isolated(spec: &CroneDesignSpec, strategy: ResetStrategy) -> Result<Self> {
        assemble(
            &realize_reset_factor(&strategy.kind.factor(spec)?)?,
            &StateSpaceModel::static_gain(1.0),
            strategy,
        )
    }

    pub fn with_strategy(&self, strategy: ResetStrategy) -> Self {
        Self {
            strategy,
            ..self.clone()
        }
    }
}

/// Blocks `A_R = [[A_r, 0], [B_nr C_r, A_nr]]`, `B_R = [B_r; B_nr D_r]`,
/// `C_R = [D_nr C_r, C_nr]`, `D_R = D_nr D_r`.
pub fn assemble(
    sigma_r: &StateSpaceModel,
    sigma_nr: &StateSpaceModel,
    strategy: ResetStrategy,
) -> Result<ResetControllerModel> {
    strategy.validate()?;
    if !sigma_r.is_siso() {
        return Err(Error::Dimension("reset factor must be SISO".into()));
    }
    Ok(ResetControllerModel {
        strategy,
        base: sigma_r.series(sigma_nr)?,
        n_r: sigma_r.n_states(),
    })
}

/// Decomposes, realizes and assembles in one go.
pub fn build(controller: &CroneController, strategy: ResetStrategy) -> Result<ResetControllerModel> {
    let d = decompose(controller, strategy.kind)?;
    assemble(&realize_reset_factor(&d.sigma_r)?, &d.sigma_nr.realize(0)?, strategy)
}

/// A linear system with jumps `x⁺ = diag(jump) x` on designated states,
/// triggered by zero crossings of its input.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridSystem {
    pub ss: StateSpaceModel,
    pub jump: DVector<f64>,
    pub reset_states: Vec<usize>,
}

impl HybridSystem {
    pub fn linear(ss: StateSpaceModel) -> Self {
        let n = ss.n_states();
        Self {
            ss,
            jump: DVector::from_element(n, 1.0),
            reset_states: Vec::new(),
        }
    }
}

/// Convex combination `p · linear + (1 − p) · reset` realized with two copies
/// of Σ_r: the first copy never resets, the second jumps by `γ`.
///
/// With `prune`, a copy whose weight is zero is dropped, so `p = 0` returns the
/// reset model unchanged and `p = 1` the plain linear base.
pub fn convex_combine(model: &ResetControllerModel, prune: bool) -> Result<HybridSystem> {
    let ResetStrategy { gamma, p, .. } = model.strategy;
    let nr = model.n_r;
    let base = &model.base;
    if prune && p == 0.0 {
        return Ok(HybridSystem {
            ss: base.clone(),
            jump: model.jump_diagonal(),
            reset_states: (0..nr).collect(),
        });
    }
    if prune && p == 1.0 {
        return Ok(HybridSystem::linear(base.clone()));
    }
    let nnr = model.n_nr();
    let n = 2 * nr + nnr;
    let m = base.n_inputs();
    let q = base.n_outputs();
    let ar = base.a.view((0, 0), (nr, nr));
    let a21 = base.a.view((nr, 0), (nnr, nr));
    let anr = base.a.view((nr, nr), (nnr, nnr));

    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (nr, nr)).copy_from(&ar);
    a.view_mut((nr, nr), (nr, nr)).copy_from(&ar);
    a.view_mut((2 * nr, 0), (nnr, nr)).copy_from(&(a21 * p));
    a.view_mut((2 * nr, nr), (nnr, nr)).copy_from(&(a21 * (1.0 - p)));
    a.view_mut((2 * nr, 2 * nr), (nnr, nnr)).copy_from(&anr);

    let mut b = DMatrix::zeros(n, m);
    let br = base.b.view((0, 0), (nr, m));
    b.view_mut((0, 0), (nr, m)).copy_from(&br);
    b.view_mut((nr, 0), (nr, m)).copy_from(&br);
    b.view_mut((2 * nr, 0), (nnr, m)).copy_from(&base.b.view((nr, 0), (nnr, m)));

    let mut c = DMatrix::zeros(q, n);
    let c1 = base.c.view((0, 0), (q, nr));
    c.view_mut((0, 0), (q, nr)).copy_from(&(c1 * p));
    c.view_mut((0, nr), (q, nr)).copy_from(&(c1 * (1.0 - p)));
    c.view_mut((0, 2 * nr), (q, nnr)).copy_from(&base.c.view((0, nr), (q, nnr)));

    let jump = DVector::from_fn(n, |i, _| if (nr..2 * nr).contains(&i) { gamma } else { 1.0 });
    Ok(HybridSystem {
        ss: StateSpaceModel::new(a, b, c, base.d.clone())?,
        jump,
        reset_states: (nr..2 * nr).collect(),
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResetModel {
    strategy: ResetStrategy,
    #[serde(flatten)]
    base: StateSpaceModel,
    reset_states: Vec<usize>,
}

impl TryFrom<RawResetModel> for ResetControllerModel {
    type Error = Error;
    fn try_from(raw: RawResetModel) -> Result<Self> {
        raw.strategy.validate()?;
        let n_r = raw.reset_states.len();
        if raw.reset_states.iter().enumerate().any(|(i, &s)| i != s) || n_r > raw.base.n_states() {
            return Err(Error::InvalidParameter(
                "reset_states must list the leading states 0, 1, …".into(),
            ));
        }
        Ok(Self {
            strategy: raw.strategy,
            base: raw.base,
            n_r,
        })
    }
}

impl From<ResetControllerModel> for RawResetModel {
    fn from(m: ResetControllerModel) -> Self {
        RawResetModel {
            strategy: m.strategy,
            reset_states: (0..m.n_r).collect(),
            base: m.base,
        }
    }
}
