//! Lanczos (Gauss quadrature) estimates of `<e_s| exp(-beta H) |e_s>` for real
//! symmetric operators available only as a matrix-vector product.

use crate::error::{Error, Result};
use crate::hamiltonians::TransverseField;
use crate::operator::check_operator_cap;
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

/// Natural log of `<e_s| exp(-beta H) |e_s>`.
///
/// Stops when successive log-quadrature values agree to `tol`.
pub fn log_diag_exp(
    dim: usize,
    apply: &dyn Fn(&[f64], &mut [f64]),
    start: usize,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut v_prev = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    v[start] = 1.0;
    let mut w = vec![0.0; dim];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    for it in 0..max_iter {
        apply(&v, &mut w);
        if let Some(&b) = betas.last() {
            for k in 0..dim {
                w[k] -= b * v_prev[k];
            }
        }
        let a: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
        for k in 0..dim {
            w[k] -= a * v[k];
        }
        alphas.push(a);
        let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = alphas.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let breakdown = b <= 1e-12 * scale;
        if breakdown || it % 2 == 1 || it + 1 == max_iter {
            let val = log_quadrature(&alphas, &betas, beta);
            if breakdown || (val - last).abs() <= tol {
                return Ok(val);
            }
            last = val;
        }
        betas.push(b);
        std::mem::swap(&mut v_prev, &mut v);
        for k in 0..dim {
            v[k] = w[k] / b;
        }
    }
    Err(Error::NoConvergence(format!(
        "Lanczos quadrature did not reach tolerance {tol:.1e} in {max_iter} steps"
    )))
}

/// `ln (e_1^T exp(-beta T) e_1)` for the Jacobi matrix `T` with diagonal
/// `alphas` and off-diagonal `betas`.
///
/// Conjugating by a diagonal sign matrix makes the off-diagonals of `-beta T`
/// nonnegative; after a diagonal shift the exponential is a power series of a
/// nonnegative matrix, so scaling and squaring has no cancellation and the
/// corner entry keeps full relative accuracy.
pub fn log_quadrature(alphas: &[f64], betas: &[f64], beta: f64) -> f64 {
    let m = alphas.len();
    let diag: Vec<f64> = alphas.iter().map(|a| -beta * a).collect();
    let low = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let d: Vec<f64> = diag.iter().map(|x| x - low).collect();
    let off: Vec<f64> = betas.iter().take(m.saturating_sub(1)).map(|b| beta * b.abs()).collect();
    let norm = (0..m)
        .map(|i| d[i] + if i > 0 { off[i - 1] } else { 0.0 } + off.get(i).copied().unwrap_or(0.0))
        .fold(0.0f64, f64::max);
    // All terms of the series are entrywise nonnegative, so it is summed
    // directly with occasional rescaling.
    let mut term = vec![0.0; m];
    term[0] = 1.0;
    let mut sum = term.clone();
    let mut next = vec![0.0; m];
    let mut log_scale = 0.0;
    let mut k = 1usize;
    loop {
        for i in 0..m {
            let mut x = d[i] * term[i];
            if i > 0 {
                x += off[i - 1] * term[i - 1];
            }
            if i + 1 < m {
                x += off[i] * term[i + 1];
            }
            next[i] = x / k as f64;
        }
        std::mem::swap(&mut term, &mut next);
        let tmax = term.iter().cloned().fold(0.0f64, f64::max);
        let smax = sum.iter().cloned().fold(0.0f64, f64::max);
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
        if (k as f64 > norm && tmax <= 1e-17 * smax) || tmax == 0.0 {
            break;
        }
        if smax > 1e200 {
            for x in sum.iter_mut().chain(term.iter_mut()) {
                *x *= 1e-200;
            }
            log_scale += 200.0 * std::f64::consts::LN_10;
        }
        k += 1;
    }
    sum[0].ln() + log_scale + low
}

/// `log <x| e^{-beta H} |x>` for every basis state of a transverse-field model.
/// Small problems use a real symmetric eigendecomposition; larger ones run one
/// Lanczos quadrature per state.
pub fn transverse_log_diagonal(tf: &TransverseField, beta: f64) -> Result<Vec<f64>> {
    check_operator_cap(tf.n)?;
    let d = tf.dim();
    if tf.h == 0.0 {
        return Ok(tf.diag.iter().map(|e| -beta * e).collect());
    }
    if d <= 512 {
        let mut m = DMatrix::<f64>::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = tf.diag[i];
            for q in 0..tf.n {
                m[(i ^ (1 << q), i)] = -tf.h;
            }
        }
        let eig = SymmetricEigen::new(m);
        let low = eig.eigenvalues.min();
        let w: Vec<f64> = eig.eigenvalues.iter().map(|l| (-beta * (l - low)).exp()).collect();
        return Ok((0..d)
            .map(|i| {
                let s: f64 = (0..d).map(|k| eig.eigenvectors[(i, k)].powi(2) * w[k]).sum();
                s.ln() - beta * low
            })
            .collect());
    }
    let apply = |x: &[f64], y: &mut [f64]| tf.apply(x, y);
    (0..d)
        .into_par_iter()
        .map(|s| log_diag_exp(d, &apply, s, beta, 1e-11, 400))
        .collect()
}
