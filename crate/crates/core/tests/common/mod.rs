//! Oracles shared by the integration tests, written independently of the
//! library's own algorithms.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::time::Duration;

use num_complex::Complex64;

/// Clegg integrator describing function: `(1 + 4j/π) / (jω)`.
pub fn clegg_df(omega: f64) -> Complex64 {
    Complex64::new(1.0, 4.0 / PI) / Complex64::new(0.0, omega)
}

/// Evaluates a polynomial with highest-degree coefficient first.
pub fn horner(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// `‖a - b‖ / ‖b‖` in the root-mean-square sense.
pub fn rel_rms_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

pub fn rel_change(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// First harmonic of a reset element `ẋ = a x + b e`, `u = c x + d e`, jump
/// `x → γ x` at the zero crossings of `e = sin(ωt)`, obtained by brute-force
/// RK4 with many small steps per half period. The crossings fall exactly on
/// step boundaries.
pub fn brute_force_scalar_df(a: f64, b: f64, c: f64, d: f64, gamma: f64, omega: f64) -> Complex64 {
    let steps_per_half = 20_000;
    let half = PI / omega;
    let h = half / steps_per_half as f64;
    let f = |t: f64, x: f64| a * x + b * (omega * t).sin();
    let mut x = 0.0;
    let cycles = 40;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut n = 0usize;
    for k in 0..2 * cycles {
        for i in 0..steps_per_half {
            let t = k as f64 * half + i as f64 * h;
            if k >= cycles {
                let u = c * x + d * (omega * t).sin();
                acc += u * Complex64::from_polar(1.0, -omega * t);
                n += 1;
            }
            let k1 = f(t, x);
            let k2 = f(t + h / 2.0, x + h / 2.0 * k1);
            let k3 = f(t + h / 2.0, x + h / 2.0 * k2);
            let k4 = f(t + h, x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        x *= gamma;
    }
    acc * (2.0 / n as f64) / Complex64::new(0.0, -1.0)
}

/// Prints the one-line verdict of an acceptance criterion and fails the test
/// when it did not pass.
pub fn verdict(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration) {
    println!(
        "criterion {id:>2} {name}: {} ({detail}; {:.2} s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    assert!(pass, "criterion {id} {name} failed: {detail}");
}
