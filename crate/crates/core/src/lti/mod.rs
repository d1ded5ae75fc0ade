//! Linear time-invariant building blocks.

mod factored;
mod fractional;
mod grid;
pub mod poly;
mod state_space;
mod transfer;
mod zpk;

use num_complex::Complex64;

pub use factored::{integral_action, low_pass, FactoredTransfer, Factor};
pub use fractional::{exact_fractional_lead, fractional_band_approx, fractional_band_zpk, lead};
pub use grid::{unwrap_deg, wrap_pi, ComplexResponse, FrequencyGrid};
pub use state_space::StateSpaceModel;
pub use transfer::{pade, RationalTransfer};
pub use zpk::Zpk;

use crate::error::Result;

/// Anything that can be evaluated at `s = jω`.
pub trait FrequencyResponse {
    fn response_at(&self, omega: f64) -> Result<Complex64>;
}

impl FrequencyResponse for RationalTransfer {
    fn response_at(&self, omega: f64) -> Result<Complex64> {
        RationalTransfer::response_at(self, omega)
    }
}

impl FrequencyResponse for StateSpaceModel {
    fn response_at(&self, omega: f64) -> Result<Complex64> {
        StateSpaceModel::response_at(self, omega)
    }
}

impl FrequencyResponse for Zpk {
    fn response_at(&self, omega: f64) -> Result<Complex64> {
        Zpk::response_at(self, omega)
    }
}

/// Exact (unapproximated) response of a factored transfer.
impl FrequencyResponse for FactoredTransfer {
    fn response_at(&self, omega: f64) -> Result<Complex64> {
        self.exact_at(omega)
    }
}

pub fn eval_response<M: FrequencyResponse + ?Sized>(model: &M, grid: &FrequencyGrid) -> Result<ComplexResponse> {
    let values = grid
        .omegas()
        .iter()
        .map(|&w| model.response_at(w))
        .collect::<Result<Vec<_>>>()?;
    ComplexResponse::new(grid.clone(), values)
}
