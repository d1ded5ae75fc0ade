//! Sinusoidal-input describing functions of reset systems.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::crone::CroneDesignSpec;
use crate::error::{Error, Result};
use crate::lti::{wrap_pi, ComplexResponse, FrequencyGrid};
use crate::reset::{HybridSystem, ResetControllerModel, ResetKind, ResetStrategy};

/// Real matrix `Θ_D(ω)` of a reset system with flow matrix `a` and jump
/// matrix `a_rho`, evaluated as
/// `-(2ω²/π) Δ Δ_D⁻¹ (A_ρ - I) Λ⁻¹` with `Λ = ω²I + A²`,
/// `Δ = I + e^{(π/ω)A}` and `Δ_D = I + A_ρ e^{(π/ω)A}`. This form is
/// exactly zero for `A_ρ = I`.
pub fn theta_d(a: &DMatrix<f64>, a_rho: &DMatrix<f64>, omega: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    if a_rho == &eye {
        return Ok(DMatrix::zeros(n, n));
    }
    let lambda = &eye * (omega * omega) + a * a;
    let lambda_inv = lambda.try_inverse().ok_or(Error::DescribingFunction {
        omega,
        reason: "ω²I + A² is singular",
    })?;
    let e = (a * (PI / omega)).exp();
    let delta = &eye + &e;
    let delta_d = &eye + a_rho * &e;
    let delta_d_inv = delta_d.try_inverse().ok_or(Error::DescribingFunction {
        omega,
        reason: "I + A_ρ e^{πA/ω} is singular",
    })?;
    Ok(delta * delta_d_inv * (a_rho - &eye) * lambda_inv * (-2.0 * omega * omega / PI))
}

/// Describing function of the full reset system (no convex combination).
pub fn reset_df(model: &ResetControllerModel, omega: f64) -> Result<Complex64> {
    let ss = &model.base;
    let theta = theta_d(&ss.a, &model.a_rho(), omega)?;
    let n = ss.n_states();
    let m = DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(if i == j { 1.0 } else { 0.0 }, theta[(i, j)])
    });
    let b = ss.b.map(|v| Complex64::new(v, 0.0));
    let resolvent = DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(-ss.a[(i, j)], if i == j { omega } else { 0.0 })
    });
    let x = resolvent
        .lu()
        .solve(&(m * b))
        .ok_or(Error::SingularResolvent { omega })?;
    let y = ss.c.map(|v| Complex64::new(v, 0.0)) * x;
    Ok(y[(0, 0)] + ss.d[(0, 0)])
}

/// `p · G(jω) + (1 - p) · G_DF(jω)`.
pub fn gdf_star_at(model: &ResetControllerModel, omega: f64) -> Result<Complex64> {
    let p = model.strategy.p;
    let linear = model.base.response_at(omega)?;
    if p == 1.0 {
        return Ok(linear);
    }
    Ok(linear * p + reset_df(model, omega)? * (1.0 - p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfResult {
    pub response: ComplexResponse,
    /// `∠G*_DF - ∠G` in radians, wrapped to `(-π, π]`.
    pub phase_lead: Vec<f64>,
}

pub fn gdf_star(model: &ResetControllerModel, grid: &FrequencyGrid) -> Result<DfResult> {
    let mut values = Vec::with_capacity(grid.len());
    let mut lead = Vec::with_capacity(grid.len());
    for &w in grid.omegas() {
        let g = gdf_star_at(model, w)?;
        let base = model.base.response_at(w)?;
        values.push(g);
        lead.push(wrap_pi(g.arg() - base.arg()));
    }
    Ok(DfResult {
        response: ComplexResponse::new(grid.clone(), values)?,
        phase_lead: lead,
    })
}

/// Scalar `Θ_D` of a first-order element with pole `-b`.
pub fn theta_scalar(omega: f64, b: f64, gamma: f64) -> f64 {
    let e = (-PI * b / omega).exp();
    2.0 / PI * (1.0 + e) / (1.0 + (b / omega).powi(2)) * (1.0 - gamma) / (1.0 + gamma * e)
}

/// Closed-form phase lead of `(1 + s/a) / (1 + s/b)` under reset.
pub fn lead_lag_phase_lead(omega: f64, a: f64, b: f64, gamma: f64, p: f64) -> f64 {
    let t = (1.0 - p) * theta_scalar(omega, b, gamma) * (1.0 - b / a);
    (t / (1.0 + (omega / a).powi(2) + omega / a * t)).atan()
}

/// Phase lead in radians that the reset factor of `strategy` adds at `omega`.
pub fn phase_lead(strategy: &ResetStrategy, omega: f64, spec: &CroneDesignSpec) -> f64 {
    let ResetStrategy { kind, gamma, p } = *strategy;
    let (wb, wh) = (spec.wb(), spec.wh());
    match kind {
        ResetKind::Integrator => (4.0 / PI * (1.0 - p) * (1.0 - gamma) / (1.0 + gamma)).atan(),
        ResetKind::Lag => lead_lag_phase_lead(omega, wh, wb, gamma, p),
        ResetKind::LeadFilter => lead_lag_phase_lead(omega, wb, wh, gamma, p),
        ResetKind::FirstOrderFilter => ((1.0 - p) * theta_scalar(omega, wb, gamma)).atan(),
        ResetKind::LeadPole => ((1.0 - p) * theta_scalar(omega, wh, gamma)).atan(),
    }
}

/// First-harmonic gain of a hybrid system driven by `sin(ωt)`, measured in
/// the time domain.
///
/// Jumps are applied at the exact zero crossings `kπ/ω`. Between them the
/// state is the linear sinusoidal steady state plus a free response
/// `e^{A(t - t_k)} z_k`, which is propagated and integrated in closed form,
/// so no quadrature error enters. The run starts on the linear steady state
/// and lasts `cycles` periods; the second half is projected onto `sin`/`cos`
/// after removing the polynomial drift that marginally stable modes can
/// pick up during the transient.
pub fn numeric_first_harmonic(sys: &HybridSystem, omega: f64, cycles: usize) -> Result<Complex64> {
    if cycles < 4 {
        return Err(Error::InvalidParameter("the oracle needs at least 4 cycles".into()));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("ω must be positive, got {omega}")));
    }
    let ss = &sys.ss;
    let n = ss.n_states();
    let half = PI / omega;
    let period = 2.0 * half;
    let linear = ss.response_at(omega)?;
    let v = ss.resolvent_times_b(omega)?;
    let (v_re, v_im) = (
        DVector::from_fn(n, |i, _| v[(i, 0)].re),
        DVector::from_fn(n, |i, _| v[(i, 0)].im),
    );
    let steady = |t: f64| &v_re * (omega * t).sin() + &v_im * (omega * t).cos();

    let flow = (&ss.a * half).exp();
    // ∫₀^{π/ω} e^{Aτ} dτ from the exponential of [[A, I], [0, 0]]
    let mut aug = DMatrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&ss.a);
    aug.view_mut((0, n), (n, n)).fill_with_identity();
    let mean_kernel = (aug * half).exp().view((0, n), (n, n)).into_owned();
    // ∫₀^{π/ω} e^{Aτ} e^{-jωτ} dτ = -(A - jωI)⁻¹ (I + e^{Aπ/ω})
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(ss.a[(i, j)], if i == j { -omega } else { 0.0 })
    });
    let rhs = (DMatrix::<f64>::identity(n, n) + &flow).map(|x| Complex64::new(-x, 0.0));
    let fourier_kernel = shifted
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularResolvent { omega })?;
    let c = ss.c.row(0).into_owned();
    let c_cplx = c.map(|x| Complex64::new(x, 0.0));

    // per half cycle: ∫ C z e^{-jωt} dt and ∫ C z dt of the free response
    let halves = 2 * cycles;
    let mut fourier = Vec::with_capacity(halves);
    let mut means = Vec::with_capacity(halves);
    let mut z = DVector::<f64>::zeros(n);
    for k in 0..halves {
        let t0 = k as f64 * half;
        let zc = z.map(|x| Complex64::new(x, 0.0));
        let rot = Complex64::from_polar(1.0, -omega * t0);
        fourier.push(rot * (&c_cplx * &fourier_kernel * zc)[(0, 0)]);
        means.push((&c * &mean_kernel * &z)[(0, 0)]);
        let t1 = t0 + half;
        let xs = steady(t1);
        let x = (&xs + &flow * &z).component_mul(&sys.jump);
        z = x - xs;
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::OracleUnstable { drift: f64::INFINITY });
        }
    }

    // cycle mean j is μ + b·t̄_j + q·(t̄_j² + T²/12) for a drift b t + q t²
    let cycle_mean = |j: usize| (means[2 * j] + means[2 * j + 1]) / period;
    let (m1, m2, m3) = (cycle_mean(cycles - 3), cycle_mean(cycles - 2), cycle_mean(cycles - 1));
    let q = (m3 - 2.0 * m2 + m1) / (2.0 * period * period);
    let b = (m3 - m1) / (2.0 * period) - 2.0 * q * (cycles as f64 - 1.5) * period;

    let j = Complex64::new(0.0, 1.0);
    let harmonic = |cyc: usize| -> Complex64 {
        let (ta, tb) = (cyc as f64 * period, (cyc + 1) as f64 * period);
        let ramp = j * period / omega;
        let parabola = j * (tb * tb - ta * ta) / omega + 2.0 * period / (omega * omega);
        let free = fourier[2 * cyc] + fourier[2 * cyc + 1] - ramp * b - parabola * q;
        linear + j * 2.0 / period * free
    };
    let last = harmonic(cycles - 1);
    let prev = harmonic(cycles - 2);
    let drift = (last - prev).norm() / last.norm().max(f64::MIN_POSITIVE);
    if drift > 0.01 {
        return Err(Error::OracleUnstable { drift });
    }
    let start = cycles / 2;
    let total: Complex64 = (start..cycles).map(harmonic).sum();
    Ok(total / (cycles - start) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::StateSpaceModel;
    use crate::reset::{assemble, convex_combine};

    fn clegg(gamma: f64, p: f64) -> ResetControllerModel {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        let ss = StateSpaceModel::new(one(0.0), one(1.0), one(1.0), one(0.0)).unwrap();
        assemble(
            &ss,
            &StateSpaceModel::static_gain(1.0),
            ResetStrategy::new(ResetKind::Integrator, gamma, p).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn clegg_theta_is_four_over_pi() {
        let t = theta_d(&DMatrix::zeros(1, 1), &DMatrix::zeros(1, 1), 3.7).unwrap();
        assert!((t[(0, 0)] - 4.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn identity_jump_gives_zero_theta() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 2.0, -3.0]);
        let t = theta_d(&a, &DMatrix::identity(2, 2), 5.0).unwrap();
        assert_eq!(t.norm(), 0.0);
    }

    #[test]
    fn first_order_filter_theta() {
        let b = 40.0;
        let a = DMatrix::from_element(1, 1, -b);
        let t = theta_d(&a, &DMatrix::zeros(1, 1), b).unwrap()[(0, 0)];
        let expected = (1.0 + (-PI).exp()) / PI;
        assert!((t - expected).abs() < 1e-12);
        assert!((theta_scalar(b, b, 0.0) - expected).abs() < 1e-15);
        assert!((expected.atan().to_degrees() - 18.37).abs() < 0.05);
    }

    #[test]
    fn clegg_describing_function() {
        let g = gdf_star_at(&clegg(0.0, 0.0), 1.0).unwrap();
        assert!((g.arg().to_degrees() + 38.15).abs() < 0.01);
        assert!((g.norm() - (1.0 + 16.0 / (PI * PI)).sqrt()).abs() < 1e-12);
        let half = gdf_star_at(&clegg(0.5, 0.5), 2.0).unwrap();
        assert!((half.arg().to_degrees() + 90.0 - 11.98).abs() < 0.05);
    }

    #[test]
    fn clegg_oracle() {
        let h = convex_combine(&clegg(0.0, 0.0), true).unwrap();
        let g = numeric_first_harmonic(&h, 1.0, 8).unwrap();
        assert!((g.norm() - 1.618).abs() < 0.02 * 1.618);
        assert!((g.arg().to_degrees() + 38.15).abs() < 0.1);
    }

    #[test]
    fn linear_oracle_matches_response() {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        let ss = StateSpaceModel::new(one(-3.0), one(2.0), one(1.5), one(0.2)).unwrap();
        let g = numeric_first_harmonic(&HybridSystem::linear(ss.clone()), 4.0, 6).unwrap();
        let r = ss.response_at(4.0).unwrap();
        assert!((g - r).norm() / r.norm() < 1e-9);
    }

    #[test]
    fn integrator_phase_lead_formula() {
        let spec = CroneDesignSpec::reference(crate::crone::Generation::First);
        let s = ResetStrategy::new(ResetKind::Integrator, 0.0, 0.0).unwrap();
        assert!((phase_lead(&s, 1.0, &spec).to_degrees() - 51.85).abs() < 0.01);
        let s = ResetStrategy::new(ResetKind::Lag, 1.0, 0.0).unwrap();
        assert_eq!(phase_lead(&s, 100.0, &spec), 0.0);
    }
}
