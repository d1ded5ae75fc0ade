//! Dense real polynomials in descending powers of `s`.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Drops leading zeros, keeping at least one coefficient.
pub fn trim(coeffs: &[f64]) -> Vec<f64> {
    let first = coeffs.iter().position(|&c| c != 0.0);
    match first {
        Some(i) => coeffs[i..].to_vec(),
        None => vec![0.0],
    }
}

pub fn degree(coeffs: &[f64]) -> usize {
    trim(coeffs).len() - 1
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn eval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Expands `Π (s - r)` into real coefficients. Complex roots must come in
/// conjugate pairs; the imaginary residue of the expansion is discarded.
pub fn from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (i, &c) in acc.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        acc = next;
    }
    acc.into_iter().map(|c| c.re).collect()
}

/// Roots from the eigenvalues of the companion matrix. Trailing zero
/// coefficients are peeled off as exact roots at the origin.
pub fn roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut c = trim(coeffs);
    let mut out = Vec::new();
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
        out.push(Complex64::new(0.0, 0.0));
    }
    let n = c.len() - 1;
    if n == 0 {
        return out;
    }
    let lead = c[0];
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        companion[(0, j)] = -c[j + 1] / lead;
    }
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    out.extend(companion.complex_eigenvalues().iter().copied());
    out
}
