use num_complex::Complex64;

use super::fractional::{exact_fractional_lead, fractional_band_zpk};
use super::zpk::Zpk;
use crate::error::Result;

/// One multiplicative factor of a controller.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Rational(Zpk),
    /// `((1 + s/low) / (1 + s/high))^order`, approximated with `cells`
    /// zero/pole pairs when a rational form is needed.
    FractionalLead {
        order: f64,
        low: f64,
        high: f64,
        cells: usize,
    },
}

impl Factor {
    pub fn exact_at(&self, omega: f64) -> Result<Complex64> {
        match self {
            Factor::Rational(z) => z.response_at(omega),
            Factor::FractionalLead { order, low, high, .. } => {
                Ok(exact_fractional_lead(*order, *low, *high, omega))
            }
        }
    }

    pub fn to_zpk(&self) -> Result<Zpk> {
        match self {
            Factor::Rational(z) => Ok(z.clone()),
            Factor::FractionalLead {
                order,
                low,
                high,
                cells,
            } => fractional_band_zpk(*order, *low, *high, *cells),
        }
    }
}

/// `(1 + ω_I/s)^n`; negative `n` gives the reciprocal.
pub fn integral_action(wi: f64, n: i32) -> Zpk {
    let one = Zpk::new(
        vec![Complex64::new(-wi, 0.0)],
        vec![Complex64::new(0.0, 0.0)],
        1.0,
        0.0,
    );
    power(&one, n)
}

/// `(1 + s/ω_F)^{-n}`.
pub fn low_pass(wf: f64, n: i32) -> Zpk {
    let one = Zpk::new(Vec::new(), vec![Complex64::new(-wf, 0.0)], wf, 0.0);
    power(&one, n)
}

fn power(z: &Zpk, n: i32) -> Zpk {
    let base = if n < 0 {
        z.inverse_rational().expect("nonzero gain")
    } else {
        z.clone()
    };
    (0..n.unsigned_abs()).fold(Zpk::unity(), |acc, _| acc.series(&base))
}

/// Product of factors that keeps fractional powers exact until a rational
/// approximation is asked for.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FactoredTransfer {
    pub factors: Vec<Factor>,
}

impl FactoredTransfer {
    pub fn new(factors: Vec<Factor>) -> Self {
        Self { factors }
    }

    pub fn with(mut self, f: Factor) -> Self {
        self.factors.push(f);
        self
    }

    pub fn series(&self, other: &FactoredTransfer) -> FactoredTransfer {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        FactoredTransfer { factors }
    }

    pub fn scaled(&self, k: f64) -> FactoredTransfer {
        self.clone().with(Factor::Rational(Zpk::gain(k)))
    }

    pub fn exact_at(&self, omega: f64) -> Result<Complex64> {
        self.factors
            .iter()
            .try_fold(Complex64::new(1.0, 0.0), |acc, f| Ok(acc * f.exact_at(omega)?))
    }

    /// Rational form with fractional factors approximated and exactly
    /// coincident zeros and poles cancelled.
    pub fn to_zpk(&self) -> Result<Zpk> {
        let mut z = Zpk::unity();
        for f in &self.factors {
            z = z.series(&f.to_zpk()?);
        }
        Ok(z.cancel_coincident())
    }

    pub fn approx_at(&self, omega: f64) -> Result<Complex64> {
        self.to_zpk()?.response_at(omega)
    }
}
