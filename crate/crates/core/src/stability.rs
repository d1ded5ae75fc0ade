//! Closed-loop assembly and the H_β quadratic-stability certificate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{FrequencyGrid, StateSpaceModel};
use crate::reset::HybridSystem;

/// Unity-feedback loop of a hybrid controller and a strictly proper plant.
///
/// State `x = [x_c; x_p]`; exogenous inputs `w = [r, n, f]` are the
/// reference, measurement noise and a force added at the plant input. The
/// error is `e = r - n - y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Rows: `e`, `u`, `y`.
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub jump: DVector<f64>,
    pub reset_states: Vec<usize>,
    pub n_controller: usize,
    pub n_plant: usize,
}

pub const OUT_E: usize = 0;
pub const OUT_U: usize = 1;
pub const OUT_Y: usize = 2;

pub fn build_closed_loop(controller: &HybridSystem, plant: &StateSpaceModel) -> Result<ClosedLoop> {
    let k = &controller.ss;
    if !k.is_siso() || !plant.is_siso() {
        return Err(Error::Dimension("closed loop needs SISO controller and plant".into()));
    }
    if plant.d[(0, 0)] != 0.0 {
        return Err(Error::InvalidParameter("plant must be strictly proper".into()));
    }
    let (nc, np) = (k.n_states(), plant.n_states());
    let n = nc + np;
    let dc = k.d[(0, 0)];
    let cp = &plant.c;

    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (nc, nc)).copy_from(&k.a);
    a.view_mut((0, nc), (nc, np)).copy_from(&(-(&k.b * cp)));
    a.view_mut((nc, 0), (np, nc)).copy_from(&(&plant.b * &k.c));
    a.view_mut((nc, nc), (np, np)).copy_from(&(&plant.a - &plant.b * cp * dc));

    let mut b = DMatrix::zeros(n, 3);
    b.view_mut((0, 0), (nc, 1)).copy_from(&k.b);
    b.view_mut((0, 1), (nc, 1)).copy_from(&(-&k.b));
    b.view_mut((nc, 0), (np, 1)).copy_from(&(&plant.b * dc));
    b.view_mut((nc, 1), (np, 1)).copy_from(&(&plant.b * -dc));
    b.view_mut((nc, 2), (np, 1)).copy_from(&plant.b);

    let mut c = DMatrix::zeros(3, n);
    c.view_mut((OUT_E, nc), (1, np)).copy_from(&(-cp));
    c.view_mut((OUT_U, 0), (1, nc)).copy_from(&k.c);
    c.view_mut((OUT_U, nc), (1, np)).copy_from(&(-cp * dc));
    c.view_mut((OUT_Y, nc), (1, np)).copy_from(cp);
    let d = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, dc, -dc, 0.0, 0.0, 0.0, 0.0]);

    let mut jump = DVector::from_element(n, 1.0);
    jump.rows_mut(0, nc).copy_from(&controller.jump);
    Ok(ClosedLoop {
        a,
        b,
        c,
        d,
        jump,
        reset_states: controller.reset_states.clone(),
        n_controller: nc,
        n_plant: np,
    })
}

impl ClosedLoop {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.a.complex_eigenvalues().iter().copied().collect()
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_hurwitz(&self) -> bool {
        self.max_real_part() < 0.0
    }

    /// True when no reset can change the state.
    pub fn jumps_are_identity(&self) -> bool {
        self.reset_states.iter().all(|&i| self.jump[i] == 1.0)
    }

}

/// A candidate `(β, P_ρ)` and the smallest real part (or smallest Hermitian
/// eigenvalue) of `H_β(jω)` seen on the test grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HBetaCertificate {
    pub beta: Vec<f64>,
    pub p_rho: DMatrix<f64>,
    pub min_real_part: f64,
    /// `lim ω² Re H_β(jω)`, which must be positive as well.
    pub high_frequency: f64,
}

impl HBetaCertificate {
    pub fn is_valid(&self) -> bool {
        self.min_real_part > 0.0 && self.high_frequency > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HBetaOutcome {
    Certified(HBetaCertificate),
    /// No candidate passed; the best one seen is kept for the report.
    NotFound(HBetaCertificate),
}

impl HBetaOutcome {
    pub fn certificate(&self) -> Option<&HBetaCertificate> {
        match self {
            HBetaOutcome::Certified(c) => Some(c),
            HBetaOutcome::NotFound(_) => None,
        }
    }

    pub fn candidate(&self) -> &HBetaCertificate {
        match self {
            HBetaOutcome::Certified(c) | HBetaOutcome::NotFound(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchOptions {
    pub beta_max: f64,
    pub beta_points: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub p_points: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            beta_max: 10.0,
            beta_points: 41,
            p_min: 1e-3,
            p_max: 1e3,
            p_points: 25,
        }
    }
}

/// The default test grid: 2000 log-spaced points on `[1e-2, 1e6]` rad/s.
pub fn default_spr_grid() -> FrequencyGrid {
    FrequencyGrid::log_points(1e-2, 1e6, 2000).expect("valid grid")
}

/// `H_β(jω) = (β C_p + P_ρ E_Rᵀ)(jωI - A)⁻¹ E_R` split into the part
/// multiplying β and the part multiplying `P_ρ`, so a candidate is evaluated
/// without new solves. `E_R` selects the reset states; the loop's own state
/// order is used, which only permutes the rows of `(jωI - A)⁻¹ E_R` relative
/// to the plant / non-reset / reset ordering.
struct SprData {
    /// `C_p (jωI - A)⁻¹ E_R`, one `1 × n_r` row per grid point.
    beta_part: Vec<DMatrix<Complex64>>,
    /// `E_Rᵀ (jωI - A)⁻¹ E_R`, `n_r × n_r` per grid point.
    p_part: Vec<DMatrix<Complex64>>,
    /// `C_p A E_R` and `E_Rᵀ A E_R` for the high-frequency limit.
    hf_beta: DMatrix<f64>,
    hf_p: DMatrix<f64>,
}

impl SprData {
    fn new(cl: &ClosedLoop, grid: &FrequencyGrid) -> Result<Self> {
        let n = cl.n_states();
        let nr = cl.reset_states.len();
        let mut er = DMatrix::zeros(n, nr);
        for (j, &i) in cl.reset_states.iter().enumerate() {
            er[(i, j)] = 1.0;
        }
        let cp: DMatrix<f64> = cl.c.rows(OUT_Y, 1).into_owned();
        let er_c = er.map(|v| Complex64::new(v, 0.0));
        let cp_c = cp.map(|v| Complex64::new(v, 0.0));
        let mut beta_part = Vec::with_capacity(grid.len());
        let mut p_part = Vec::with_capacity(grid.len());
        // DC is always checked; A is Hurwitz so the solve is regular there
        for &w in std::iter::once(&0.0).chain(grid.omegas()) {
            let m = DMatrix::from_fn(n, n, |i, j| {
                Complex64::new(-cl.a[(i, j)], if i == j { w } else { 0.0 })
            });
            let x = m.lu().solve(&er_c).ok_or(Error::SingularResolvent { omega: w })?;
            beta_part.push(&cp_c * &x);
            p_part.push(er_c.transpose() * &x);
        }
        Ok(Self {
            beta_part,
            p_part,
            hf_beta: &cp * &cl.a * &er,
            hf_p: er.transpose() * &cl.a * &er,
        })
    }

    /// `(min over grid, min of the margin relative to |H|, high-frequency
    /// limit)` for one candidate.
    fn evaluate(&self, beta: &[f64], p: &DMatrix<f64>) -> (f64, f64, f64) {
        let nr = p.nrows();
        let b = DMatrix::from_fn(nr, 1, |i, _| Complex64::new(beta[i], 0.0));
        let pc = p.map(|v| Complex64::new(v, 0.0));
        let mut min = f64::INFINITY;
        let mut rel = f64::INFINITY;
        for (bp, pp) in self.beta_part.iter().zip(&self.p_part) {
            let h = &b * bp + &pc * pp;
            let v = hermitian_min(&h);
            min = min.min(v);
            let norm = h.norm();
            if norm > 0.0 {
                rel = rel.min(v / norm);
            }
        }
        let bm = DMatrix::from_fn(nr, 1, |i, _| beta[i]);
        let hf = -(&bm * &self.hf_beta + p * &self.hf_p);
        (min, rel, hermitian_min(&hf.map(|v| Complex64::new(v, 0.0))))
    }
}

/// Smallest eigenvalue of `(H + H*)/2`.
fn hermitian_min(h: &DMatrix<Complex64>) -> f64 {
    match h.nrows() {
        1 => h[(0, 0)].re,
        2 => {
            let a = h[(0, 0)].re;
            let d = h[(1, 1)].re;
            let off = (h[(0, 1)] + h[(1, 0)].conj()) * 0.5;
            let mean = 0.5 * (a + d);
            let rad = (0.25 * (a - d).powi(2) + off.norm_sqr()).sqrt();
            mean - rad
        }
        _ => {
            let herm = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
            let re = DMatrix::from_fn(2 * h.nrows(), 2 * h.nrows(), |i, j| {
                let n = h.nrows();
                let v = herm[(i % n, j % n)];
                match (i < n, j < n) {
                    (true, true) | (false, false) => v.re,
                    (true, false) => -v.im,
                    (false, true) => v.im,
                }
            });
            re.symmetric_eigenvalues().min()
        }
    }
}

fn candidates(opts: &SearchOptions, nr: usize, center: Option<(&[f64], &DMatrix<f64>)>) -> Vec<(Vec<f64>, DMatrix<f64>)> {
    let lin = |lo: f64, hi: f64, k: usize| -> Vec<f64> {
        if k == 1 {
            return vec![0.5 * (lo + hi)];
        }
        (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
    };
    let log = |lo: f64, hi: f64, k: usize| -> Vec<f64> {
        lin(lo.ln(), hi.ln(), k).into_iter().map(f64::exp).collect()
    };
    let beta_step = 2.0 * opts.beta_max / (opts.beta_points.max(2) - 1) as f64;
    let p_ratio = (opts.p_max / opts.p_min).powf(1.0 / (opts.p_points.max(2) - 1) as f64);
    let (betas, ps): (Vec<Vec<f64>>, Vec<f64>) = match center {
        None => {
            let (bk, pk) = if nr == 1 {
                (opts.beta_points, opts.p_points)
            } else {
                (opts.beta_points.min(11), opts.p_points.min(7))
            };
            (vec![lin(-opts.beta_max, opts.beta_max, bk); nr], log(opts.p_min, opts.p_max, pk))
        }
        Some((b0, p0)) => {
            let scale = p0[(0, 0)];
            (
                b0.iter().map(|&b| lin(b - beta_step, b + beta_step, 21)).collect(),
                log(scale / p_ratio, scale * p_ratio, 21),
            )
        }
    };
    let mut out = Vec::new();
    match nr {
        1 => {
            for b in &betas[0] {
                for &p in &ps {
                    out.push((vec![*b], DMatrix::from_element(1, 1, p)));
                }
            }
        }
        2 => {
            let rhos = [-0.8, -0.4, 0.0, 0.4, 0.8];
            for b0 in &betas[0] {
                for b1 in &betas[1] {
                    for &p1 in &ps {
                        for &p2 in &ps {
                            for rho in rhos {
                                let off = rho * (p1 * p2).sqrt();
                                out.push((vec![*b0, *b1], DMatrix::from_row_slice(2, 2, &[p1, off, off, p2])));
                            }
                        }
                    }
                }
            }
        }
        _ => {}
    }
    out
}

fn best_of(data: &SprData, cands: Vec<(Vec<f64>, DMatrix<f64>)>) -> Option<HBetaCertificate> {
    // H_β is homogeneous in (β, P_ρ), so candidates are ranked by the margin
    // relative to |H_β| rather than by the raw margin
    let eval = |(beta, p): (Vec<f64>, DMatrix<f64>)| {
        let (min, rel, hf) = data.evaluate(&beta, &p);
        let cert = HBetaCertificate {
            beta,
            p_rho: p,
            min_real_part: min,
            high_frequency: hf,
        };
        let score = if cert.is_valid() { 1.0 + rel } else { rel.min(0.0) + hf.min(0.0).tanh() };
        (score, cert)
    };
    #[cfg(feature = "parallel")]
    let all: Vec<(f64, HBetaCertificate)> = {
        use rayon::prelude::*;
        cands.into_par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let all: Vec<(f64, HBetaCertificate)> = cands.into_iter().map(eval).collect();
    all.into_iter()
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(_, c)| c)
}

/// Grid search for `(β, P_ρ)` making `H_β` strictly positive real on `grid`.
///
/// Refuses non-Hurwitz loops. A loop whose jumps are all identity is
/// certified without search (`β = 0`, `P_ρ = I`, infinite margin), since the
/// jump condition is then vacuous.
pub fn h_beta_search(cl: &ClosedLoop, grid: &FrequencyGrid, opts: &SearchOptions) -> Result<HBetaOutcome> {
    let max_real = cl.max_real_part();
    if max_real >= 0.0 {
        return Err(Error::NotHurwitz { max_real });
    }
    let nr = cl.reset_states.len();
    if cl.jumps_are_identity() {
        return Ok(HBetaOutcome::Certified(HBetaCertificate {
            beta: vec![0.0; nr],
            p_rho: DMatrix::identity(nr, nr),
            min_real_part: f64::INFINITY,
            high_frequency: f64::INFINITY,
        }));
    }
    if nr > 2 {
        return Err(Error::InvalidParameter(format!("H_β search supports at most 2 reset states, got {nr}")));
    }
    let data = SprData::new(cl, grid)?;
    let coarse = best_of(&data, candidates(opts, nr, None)).expect("non-empty grid");
    if coarse.is_valid() {
        return Ok(HBetaOutcome::Certified(coarse));
    }
    let fine = best_of(&data, candidates(opts, nr, Some((&coarse.beta, &coarse.p_rho)))).expect("non-empty grid");
    // the refined grid contains the coarse optimum, so it can only improve
    let best = fine;
    Ok(if best.is_valid() {
        HBetaOutcome::Certified(best)
    } else {
        HBetaOutcome::NotFound(best)
    })
}

/// Re-evaluates a candidate on another grid, e.g. a refined one.
pub fn recheck(cl: &ClosedLoop, cert: &HBetaCertificate, grid: &FrequencyGrid) -> Result<HBetaCertificate> {
    if cl.jumps_are_identity() {
        return Ok(cert.clone());
    }
    let data = SprData::new(cl, grid)?;
    let (min, _, hf) = data.evaluate(&cert.beta, &cert.p_rho);
    Ok(HBetaCertificate {
        min_real_part: min,
        high_frequency: hf,
        ..cert.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Certified,
    Uncertified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateReport {
    pub hurwitz: bool,
    pub beta: Vec<f64>,
    pub p_rho: Vec<Vec<f64>>,
    /// `null` when the certificate is vacuous (identity jumps).
    pub min_real_part: Option<f64>,
    pub grid_points: usize,
    pub verdict: Verdict,
}

/// Runs the flow test and, when it passes, the H_β search.
pub fn certify(cl: &ClosedLoop, grid: &FrequencyGrid, opts: &SearchOptions) -> Result<CertificateReport> {
    let nr = cl.reset_states.len();
    let outcome = match h_beta_search(cl, grid, opts) {
        Err(Error::NotHurwitz { .. }) => {
            return Ok(CertificateReport {
                hurwitz: false,
                beta: vec![],
                p_rho: vec![],
                min_real_part: None,
                grid_points: grid.len(),
                verdict: Verdict::Uncertified,
            })
        }
        other => other?,
    };
    let c = outcome.candidate();
    Ok(CertificateReport {
        hurwitz: true,
        beta: c.beta.clone(),
        p_rho: (0..nr).map(|i| (0..nr).map(|j| c.p_rho[(i, j)]).collect()).collect(),
        min_real_part: c.min_real_part.is_finite().then_some(c.min_real_part),
        grid_points: grid.len(),
        verdict: if outcome.certificate().is_some() {
            Verdict::Certified
        } else {
            Verdict::Uncertified
        },
    })
}
