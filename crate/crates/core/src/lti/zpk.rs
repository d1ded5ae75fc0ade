use nalgebra::DMatrix;
use num_complex::Complex64;

use super::poly;
use super::state_space::StateSpaceModel;
use super::transfer::{pade, RationalTransfer};
use crate::error::{Error, Result};

/// `k · Π(s - zᵢ) / Π(s - pᵢ) · e^{-sτ}`. Complex zeros and poles come in
/// conjugate pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Zpk {
    pub zeros: Vec<Complex64>,
    pub poles: Vec<Complex64>,
    pub gain: f64,
    pub delay: f64,
}

const REAL_TOL: f64 = 1e-10;

fn is_real(z: Complex64) -> bool {
    z.im.abs() <= REAL_TOL * z.re.abs().max(1.0)
}

impl Zpk {
    pub fn new(zeros: Vec<Complex64>, poles: Vec<Complex64>, gain: f64, delay: f64) -> Self {
        Self {
            zeros,
            poles,
            gain,
            delay,
        }
    }

    pub fn gain(k: f64) -> Self {
        Self::new(Vec::new(), Vec::new(), k, 0.0)
    }

    pub fn unity() -> Self {
        Self::gain(1.0)
    }

    pub fn relative_degree(&self) -> isize {
        self.poles.len() as isize - self.zeros.len() as isize
    }

    pub fn is_proper(&self) -> bool {
        self.relative_degree() >= 0
    }

    pub fn response_at(&self, omega: f64) -> Result<Complex64> {
        let s = Complex64::new(0.0, omega);
        let mut num = Complex64::new(self.gain, 0.0);
        for z in &self.zeros {
            num *= s - z;
        }
        let mut den = Complex64::new(1.0, 0.0);
        for p in &self.poles {
            den *= s - p;
        }
        if den == Complex64::new(0.0, 0.0) {
            return Err(Error::SingularResolvent { omega });
        }
        Ok(num / den * Complex64::from_polar(1.0, -omega * self.delay))
    }

    /// Phase in radians, continuous in `ω` (sum of per-root angles, no
    /// wrapping), including the delay's `-ωτ`.
    pub fn phase_at(&self, omega: f64) -> f64 {
        let s = Complex64::new(0.0, omega);
        let base = if self.gain < 0.0 { std::f64::consts::PI } else { 0.0 };
        let zs: f64 = self.zeros.iter().map(|z| (s - z).arg()).sum();
        let ps: f64 = self.poles.iter().map(|p| (s - p).arg()).sum();
        base + zs - ps - omega * self.delay
    }

    pub fn series(&self, other: &Zpk) -> Zpk {
        let mut zeros = self.zeros.clone();
        zeros.extend_from_slice(&other.zeros);
        let mut poles = self.poles.clone();
        poles.extend_from_slice(&other.poles);
        Zpk::new(zeros, poles, self.gain * other.gain, self.delay + other.delay)
    }

    /// Reciprocal of the rational part. The delay is dropped: a prediction
    /// cannot be realized.
    pub fn inverse_rational(&self) -> Result<Zpk> {
        if self.gain == 0.0 {
            return Err(Error::InvalidParameter("cannot invert a zero gain".into()));
        }
        Ok(Zpk::new(self.poles.clone(), self.zeros.clone(), 1.0 / self.gain, 0.0))
    }

    /// Removes zero/pole pairs that coincide to within a relative `1e-12`.
    pub fn cancel_coincident(&self) -> Zpk {
        let mut zeros = self.zeros.clone();
        let mut poles = Vec::with_capacity(self.poles.len());
        for &p in &self.poles {
            let hit = zeros
                .iter()
                .position(|z| (z - p).norm() <= 1e-12 * p.norm().max(1.0));
            match hit {
                Some(i) => {
                    zeros.swap_remove(i);
                }
                None => poles.push(p),
            }
        }
        Zpk::new(zeros, poles, self.gain, self.delay)
    }

    pub fn is_minimum_phase(&self) -> bool {
        self.zeros.iter().all(|z| z.re < 0.0)
    }

    pub fn to_transfer(&self) -> Result<RationalTransfer> {
        let num: Vec<f64> = poly::from_roots(&self.zeros)
            .into_iter()
            .map(|c| c * self.gain)
            .collect();
        RationalTransfer::new(num, poly::from_roots(&self.poles))?.with_delay(self.delay)
    }

    /// Cascade realization in first- and second-order sections. Each section
    /// is scaled to unit gain near its own corner frequency and the residual
    /// gain is spread evenly, so internal signals stay within a few decades
    /// of each other even for high-order controllers. A positive delay is
    /// replaced by a Padé approximant of order `delay_order`.
    pub fn realize(&self, delay_order: usize) -> Result<StateSpaceModel> {
        let mut full = Zpk::new(self.zeros.clone(), self.poles.clone(), self.gain, 0.0);
        if self.delay > 0.0 {
            if delay_order == 0 {
                return Err(Error::InvalidParameter(
                    "a delayed transfer needs a Padé order ≥ 1 to be realized".into(),
                ));
            }
            full = full.series(&pade(self.delay, delay_order).to_zpk());
        }
        if !full.is_proper() {
            return Err(Error::Improper {
                num: full.zeros.len(),
                den: full.poles.len(),
            });
        }
        let sections = full.sections()?;
        if sections.is_empty() {
            return Ok(StateSpaceModel::static_gain(full.gain));
        }

        let omega_ref = |s: &Section| {
            let mags: Vec<f64> = s
                .poles
                .iter()
                .chain(s.zeros.iter())
                .map(|r| r.norm())
                .filter(|m| *m > 0.0)
                .collect();
            if mags.is_empty() {
                1.0
            } else {
                (mags.iter().map(|m| m.ln()).sum::<f64>() / mags.len() as f64).exp()
            }
        };
        let mut scales = Vec::with_capacity(sections.len());
        let mut residual = full.gain;
        for s in &sections {
            let z = Zpk::new(s.zeros.clone(), s.poles.clone(), 1.0, 0.0);
            let m = z.response_at(omega_ref(s))?.norm();
            let scale = if m > 0.0 && m.is_finite() { 1.0 / m } else { 1.0 };
            scales.push(scale);
            residual /= scale;
        }
        let share = residual.abs().powf(1.0 / sections.len() as f64);
        let mut out: Option<StateSpaceModel> = None;
        for (i, s) in sections.iter().enumerate() {
            let mut k = scales[i] * share;
            if i == 0 && residual < 0.0 {
                k = -k;
            }
            let ss = realize_section(s, k)?;
            out = Some(match out {
                None => ss,
                Some(prev) => prev.series(&ss)?,
            });
        }
        Ok(out.unwrap())
    }

    fn sections(&self) -> Result<Vec<Section>> {
        let split = |roots: &[Complex64]| {
            let mut real: Vec<f64> = Vec::new();
            let mut cplx: Vec<Complex64> = Vec::new();
            for &r in roots {
                if is_real(r) {
                    real.push(r.re);
                } else if r.im > 0.0 {
                    cplx.push(r);
                }
            }
            real.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
            (real, cplx)
        };
        let (mut rz, cz) = split(&self.zeros);
        let (mut rp, mut cp) = split(&self.poles);
        let pair = |c: Complex64| vec![c, c.conj()];
        let mut out = Vec::new();

        for z in cz {
            let poles = if let Some(p) = cp.pop() {
                pair(p)
            } else if rp.len() >= 2 {
                // the two real poles closest in magnitude to the zero pair
                rp.sort_by(|a, b| {
                    (a.abs() - z.norm())
                        .abs()
                        .partial_cmp(&(b.abs() - z.norm()).abs())
                        .unwrap()
                });
                let two = vec![Complex64::new(rp.remove(0), 0.0), Complex64::new(rp.remove(0), 0.0)];
                rp.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
                two
            } else {
                return Err(Error::Improper {
                    num: self.zeros.len(),
                    den: self.poles.len(),
                });
            };
            out.push(Section {
                zeros: pair(z),
                poles,
            });
        }
        for p in cp {
            let take = rz.len().min(2);
            let zeros = rz.drain(..take).map(|z| Complex64::new(z, 0.0)).collect();
            out.push(Section {
                zeros,
                poles: pair(p),
            });
        }
        for p in rp {
            let zeros = if rz.is_empty() {
                Vec::new()
            } else {
                vec![Complex64::new(rz.remove(0), 0.0)]
            };
            out.push(Section {
                zeros,
                poles: vec![Complex64::new(p, 0.0)],
            });
        }
        if !rz.is_empty() {
            return Err(Error::Improper {
                num: self.zeros.len(),
                den: self.poles.len(),
            });
        }
        Ok(out)
    }
}

struct Section {
    zeros: Vec<Complex64>,
    poles: Vec<Complex64>,
}

/// Realizes `k · Π(s - z)/Π(s - p)` with one or two poles.
fn realize_section(s: &Section, k: f64) -> Result<StateSpaceModel> {
    let den = poly::from_roots(&s.poles);
    let mut num = vec![0.0; den.len() - s.zeros.len() - 1];
    num.extend(poly::from_roots(&s.zeros).into_iter().map(|c| c * k));
    let d = num[0];
    match den.len() {
        2 => {
            // H = d + r / (s - p)
            let p = -den[1];
            let r = num[1] + d * p;
            let b = if r == 0.0 { 1.0 } else { r.abs().sqrt() };
            StateSpaceModel::new(
                DMatrix::from_element(1, 1, p),
                DMatrix::from_element(1, 1, b),
                DMatrix::from_element(1, 1, r / b),
                DMatrix::from_element(1, 1, d),
            )
        }
        3 => {
            // H = d + (c1 s + c0) / (s² + a1 s + a0), controllable form with
            // the second state scaled by ω0 = √|a0|.
            let (a1, a0) = (den[1], den[2]);
            let (c1, c0) = (num[1] - d * a1, num[2] - d * a0);
            let w0 = if a0 == 0.0 { 1.0 } else { a0.abs().sqrt() };
            StateSpaceModel::new(
                DMatrix::from_row_slice(2, 2, &[-a1, -a0 / w0, w0, 0.0]),
                DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
                DMatrix::from_row_slice(1, 2, &[c1, c0 / w0]),
                DMatrix::from_element(1, 1, d),
            )
        }
        _ => unreachable!("sections carry one or two poles"),
    }
}
