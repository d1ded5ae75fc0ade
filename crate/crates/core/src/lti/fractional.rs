use num_complex::Complex64;

use super::transfer::RationalTransfer;
use super::zpk::Zpk;
use crate::error::{Error, Result};

fn check_band(low: f64, high: f64, cells: usize) -> Result<()> {
    if !(low > 0.0 && high.is_finite() && low < high) {
        return Err(Error::InvalidParameter(format!(
            "fractional band needs 0 < ω_b < ω_h, got [{low}, {high}]"
        )));
    }
    if cells == 0 {
        return Err(Error::InvalidParameter("approximation order N must be ≥ 1".into()));
    }
    Ok(())
}

/// `((1 + s/ω_b) / (1 + s/ω_h))^ν` on the imaginary axis, principal branch.
pub fn exact_fractional_lead(order: f64, low: f64, high: f64, omega: f64) -> Complex64 {
    let mag = ((1.0 + (omega / low).powi(2)) / (1.0 + (omega / high).powi(2))).sqrt();
    let phase = (omega / low).atan() - (omega / high).atan();
    Complex64::from_polar(mag.powf(order), order * phase)
}

/// The integer-order lead `(1 + s/ω_b) / (1 + s/ω_h)`.
pub fn lead(low: f64, high: f64) -> Zpk {
    Zpk::new(
        vec![Complex64::new(-low, 0.0)],
        vec![Complex64::new(-high, 0.0)],
        high / low,
        0.0,
    )
}

/// Recursive zero/pole approximation of the fractional lead over the band
/// `[ω_b, ω_h]` with `cells` zero/pole pairs per unit of fractional order.
///
/// The integer part of `ν` is carried exactly as powers of the integer lead,
/// the remainder in `[0, 1)` is approximated, and a negative order yields the
/// reciprocal. The gain makes the magnitude exact at `√(ω_b ω_h)`.
pub fn fractional_band_zpk(order: f64, low: f64, high: f64, cells: usize) -> Result<Zpk> {
    check_band(low, high, cells)?;
    if !order.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite fractional order {order}")));
    }
    if order < 0.0 {
        return fractional_band_zpk(-order, low, high, cells)?.inverse_rational();
    }
    let whole = order.floor();
    let frac = order - whole;
    let mut out = Zpk::unity();
    for _ in 0..whole as usize {
        out = out.series(&lead(low, high));
    }
    if frac > 0.0 {
        let ratio = high / low;
        let alpha = ratio.powf(frac / cells as f64);
        let eta = ratio.powf((1.0 - frac) / cells as f64);
        let mut zeros = Vec::with_capacity(cells);
        let mut poles = Vec::with_capacity(cells);
        let mut z = low * eta.sqrt();
        for _ in 0..cells {
            let p = z * alpha;
            zeros.push(Complex64::new(-z, 0.0));
            poles.push(Complex64::new(-p, 0.0));
            z = p * eta;
        }
        let mut cell = Zpk::new(zeros, poles, 1.0, 0.0);
        let mid = (low * high).sqrt();
        let want = exact_fractional_lead(frac, low, high, mid).norm();
        cell.gain = want / cell.response_at(mid)?.norm();
        out = out.series(&cell);
    }
    Ok(out.cancel_coincident())
}

/// [`fractional_band_zpk`] as a polynomial transfer function.
pub fn fractional_band_approx(order: f64, low: f64, high: f64, cells: usize) -> Result<RationalTransfer> {
    fractional_band_zpk(order, low, high, cells)?.to_transfer()
}
