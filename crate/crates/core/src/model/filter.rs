//! Filter value reparameterization and Chebyshev interpolation weights.

use std::f64::consts::PI;

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`softplus`] for positive targets.
pub fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

/// High-pass values are prefix sums of `gamma`; low-pass values are prefix
/// differences from `gamma[0]`, floored at zero. Returns `(low, high)`.
pub fn reparam_filter_values(gamma: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (low_pass_values(gamma), high_pass_values(gamma))
}

pub fn high_pass_values(gamma: &[f64]) -> Vec<f64> {
    gamma
        .iter()
        .scan(0.0, |acc, &g| {
            *acc += g;
            Some(*acc)
        })
        .collect()
}

pub fn low_pass_values(gamma: &[f64]) -> Vec<f64> {
    low_pass_arguments(gamma).into_iter().map(|a| a.max(0.0)).collect()
}

/// Unclamped low-pass values `γ0 − Σ_{1..i} γj`.
pub(crate) fn low_pass_arguments(gamma: &[f64]) -> Vec<f64> {
    let Some(&g0) = gamma.first() else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(gamma.len());
    let mut acc = g0;
    out.push(acc);
    for &g in &gamma[1..] {
        acc -= g;
        out.push(acc);
    }
    out
}

/// Chebyshev nodes of order `k`, ascending.
pub fn chebyshev_nodes(k: usize) -> Vec<f64> {
    let m = (k + 1) as f64;
    (0..=k).map(|i| ((k - i) as f64 + 0.5) * PI / m).map(f64::cos).collect()
}

/// `T_0(t) ..= T_k(t)`.
pub fn chebyshev_values(k: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(1.0);
    if k >= 1 {
        out.push(t);
    }
    for j in 2..=k {
        out.push(2.0 * t * out[j - 1] - out[j - 2]);
    }
    out
}

/// Row-major `(K+1)×(K+1)` matrix `M` with `w = M·values`.
pub fn interpolation_matrix(k: usize) -> Vec<f64> {
    let m = k + 1;
    let nodes = chebyshev_nodes(k);
    let tvals: Vec<Vec<f64>> = nodes.iter().map(|&s| chebyshev_values(k, s)).collect();
    let mut mat = vec![0.0; m * m];
    for row in 0..m {
        let scale = if row == 0 { 1.0 } else { 2.0 } / m as f64;
        for (col, t) in tvals.iter().enumerate() {
            mat[row * m + col] = scale * t[row];
        }
    }
    mat
}

/// Chebyshev coefficients of the degree-K polynomial interpolating `values`
/// at the ascending Chebyshev nodes.
pub fn cheb_weights(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    if m == 0 {
        return Vec::new();
    }
    let mat = interpolation_matrix(m - 1);
    (0..m)
        .map(|r| (0..m).map(|c| mat[r * m + c] * values[c]).sum())
        .collect()
}

/// `Σ_k w_k T_k(t)` by Clenshaw's recurrence.
pub fn filter_response(weights: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &w in weights.iter().skip(1).rev() {
        let b0 = w + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    match weights.first() {
        Some(&w0) => w0 + t * b1 - b2,
        None => 0.0,
    }
}
