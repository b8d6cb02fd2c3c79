//! Small helpers for lag polynomials written as coefficient vectors with the
//! constant term first: `[1, c1, c2, ...]` means `1 + c1 B + c2 B^2 + ...`.

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `(1 - B^step)^power`.
pub fn difference_operator(power: usize, step: usize) -> Vec<f64> {
    let mut base = vec![0.0; step + 1];
    base[0] = 1.0;
    base[step] = -1.0;
    (0..power).fold(vec![1.0], |acc, _| mul(&acc, &base))
}

/// `1 - a1 B - a2 B^2 ...` for AR coefficients spaced `step` lags apart.
pub fn ar_operator(coeffs: &[f64], step: usize) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len() * step + 1];
    out[0] = 1.0;
    for (i, c) in coeffs.iter().enumerate() {
        out[(i + 1) * step] = -c;
    }
    out
}

/// `1 + b1 B + b2 B^2 ...` for MA coefficients spaced `step` lags apart.
pub fn ma_operator(coeffs: &[f64], step: usize) -> Vec<f64> {
    let mut out = vec![0.0; coeffs.len() * step + 1];
    out[0] = 1.0;
    for (i, c) in coeffs.iter().enumerate() {
        out[(i + 1) * step] = *c;
    }
    out
}
