use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly;
use super::state_space::StateSpaceModel;
use super::zpk::Zpk;
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Real-coefficient rational transfer function `N(s)/D(s) · e^{-sτ}`,
/// coefficients in descending powers of `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransfer", into = "RawTransfer")]
pub struct RationalTransfer {
    num: Vec<f64>,
    den: Vec<f64>,
    delay: f64,
}

impl RationalTransfer {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.is_empty() || den.is_empty() {
            return Err(Error::InvalidParameter("empty polynomial".into()));
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        let den = poly::trim(&den);
        if den == [0.0] {
            return Err(Error::InvalidParameter("zero denominator".into()));
        }
        Ok(Self {
            num: poly::trim(&num),
            den,
            delay: 0.0,
        })
    }

    pub fn with_delay(mut self, delay: f64) -> Result<Self> {
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(Error::InvalidParameter(format!("delay must be ≥ 0, got {delay}")));
        }
        self.delay = delay;
        Ok(self)
    }

    pub fn gain(k: f64) -> Self {
        Self {
            num: vec![k],
            den: vec![1.0],
            delay: 0.0,
        }
    }

    pub fn unity() -> Self {
        Self::gain(1.0)
    }

    /// Pure delay `e^{-sτ}`.
    pub fn delay_only(delay: f64) -> Result<Self> {
        Self::unity().with_delay(delay)
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// The same transfer without its delay factor.
    pub fn rational_part(&self) -> Self {
        Self {
            delay: 0.0,
            ..self.clone()
        }
    }

    pub fn is_proper(&self) -> bool {
        poly::degree(&self.num) <= poly::degree(&self.den)
    }

    pub fn response_at(&self, omega: f64) -> Result<Complex64> {
        let s = Complex64::new(0.0, omega);
        let d = poly::eval(&self.den, s);
        if d == Complex64::new(0.0, 0.0) {
            return Err(Error::SingularResolvent { omega });
        }
        let delay = Complex64::from_polar(1.0, -omega * self.delay);
        Ok(poly::eval(&self.num, s) / d * delay)
    }

    /// Product of the two transfers; delays add. No pole-zero cancellation.
    pub fn series(&self, other: &RationalTransfer) -> RationalTransfer {
        RationalTransfer {
            num: poly::mul(&self.num, &other.num),
            den: poly::mul(&self.den, &other.den),
            delay: self.delay + other.delay,
        }
    }

    pub fn poles(&self) -> Vec<Complex64> {
        poly::roots(&self.den)
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        if self.num == [0.0] {
            return Vec::new();
        }
        poly::roots(&self.num)
    }

    pub fn to_zpk(&self) -> Zpk {
        let num = &self.num;
        let den = &self.den;
        Zpk::new(self.zeros(), self.poles(), num[0] / den[0], self.delay)
    }

    /// Controllable canonical realization. A positive delay is replaced by a
    /// Padé approximant of order `delay_order` before realizing; a delay-free
    /// transfer ignores `delay_order`.
    pub fn realize(&self, delay_order: usize) -> Result<StateSpaceModel> {
        let tf = if self.delay > 0.0 {
            if delay_order == 0 {
                return Err(Error::InvalidParameter(
                    "a delayed transfer needs a Padé order ≥ 1 to be realized".into(),
                ));
            }
            self.rational_part().series(&pade(self.delay, delay_order))
        } else {
            self.clone()
        };
        tf.controllable_canonical()
    }

    fn controllable_canonical(&self) -> Result<StateSpaceModel> {
        let (nd, nn) = (poly::degree(&self.den), poly::degree(&self.num));
        if nn > nd {
            return Err(Error::Improper { num: nn, den: nd });
        }
        let lead = self.den[0];
        let den: Vec<f64> = self.den.iter().map(|c| c / lead).collect();
        let mut num = vec![0.0; nd + 1 - self.num.len()];
        num.extend(self.num.iter().map(|c| c / lead));
        let n = nd;
        let d = num[0];
        if n == 0 {
            return Ok(StateSpaceModel::static_gain(d));
        }
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            a[(0, j)] = -den[j + 1];
        }
        for i in 1..n {
            a[(i, i - 1)] = 1.0;
        }
        let mut b = DMatrix::zeros(n, 1);
        b[(0, 0)] = 1.0;
        let c = DMatrix::from_fn(1, n, |_, j| num[j + 1] - d * den[j + 1]);
        StateSpaceModel::new(a, b, c, DMatrix::from_element(1, 1, d))
    }
}

/// Padé approximant of `e^{-sτ}` of the given order.
pub fn pade(delay: f64, order: usize) -> RationalTransfer {
    let n = order;
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    let coeff = |k: usize| fact(2 * n - k) * fact(n) / (fact(2 * n) * fact(k) * fact(n - k));
    // descending powers: index i holds the coefficient of s^(n-i)
    let den: Vec<f64> = (0..=n).rev().map(|k| coeff(k) * delay.powi(k as i32)).collect();
    let num: Vec<f64> = (0..=n)
        .rev()
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * coeff(k) * delay.powi(k as i32)
        })
        .collect();
    RationalTransfer {
        num,
        den,
        delay: 0.0,
    }
}

#[derive(Serialize, Deserialize)]
struct RawTransfer {
    num: Vec<f64>,
    den: Vec<f64>,
    #[serde(default)]
    delay: f64,
}

impl TryFrom<RawTransfer> for RationalTransfer {
    type Error = Error;
    fn try_from(raw: RawTransfer) -> Result<Self> {
        RationalTransfer::new(raw.num, raw.den)?.with_delay(raw.delay)
    }
}

impl From<RationalTransfer> for RawTransfer {
    fn from(t: RationalTransfer) -> Self {
        RawTransfer {
            num: t.num,
            den: t.den,
            delay: t.delay,
        }
    }
}
