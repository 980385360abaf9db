//! Finite-difference derivatives and a few dense helpers.

use nalgebra::{DMatrix, DVector};

fn step(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

/// Central-difference gradient; falls back to one-sided differences where a
/// neighbour evaluates to a non-finite value.
pub(crate) fn gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> Vec<f64> {
    let f0 = f(x);
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step(x[i], 1e-6);
            probe[i] = x[i] + h;
            let fp = f(&probe);
            probe[i] = x[i] - h;
            let fm = f(&probe);
            probe[i] = x[i];
            match (fp.is_finite(), fm.is_finite()) {
                (true, true) => (fp - fm) / (2.0 * h),
                (true, false) => (fp - f0) / h,
                (false, true) => (f0 - fm) / h,
                (false, false) => 0.0,
            }
        })
        .collect()
}

/// Central second differences.
pub(crate) fn hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let f0 = f(x);
    let h: Vec<f64> = x.iter().map(|&v| step(v, 1e-4)).collect();
    let mut m = DMatrix::zeros(d, d);
    let mut p = x.to_vec();
    for i in 0..d {
        p[i] = x[i] + h[i];
        let fp = f(&p);
        p[i] = x[i] - h[i];
        let fm = f(&p);
        p[i] = x[i];
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                p[i] = x[i] + si * h[i];
                p[j] = x[j] + sj * h[j];
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Lower Cholesky factor of `(-H)^{-1}` when `-H` is positive definite.
pub(crate) fn laplace_factor(neg_hessian: DMatrix<f64>) -> Option<DMatrix<f64>> {
    if !neg_hessian.iter().all(|v| v.is_finite()) {
        return None;
    }
    let chol = neg_hessian.cholesky()?;
    let cov = chol.inverse();
    let cov = (&cov + cov.transpose()) * 0.5;
    cov.cholesky().map(|c| c.l())
}

/// Solves `(A + τI) p = g` for the smallest `τ ≥ 0` (from a geometric
/// ladder) that makes the shifted matrix positive definite.
pub(crate) fn regularized_solve(a: &DMatrix<f64>, g: &[f64]) -> Option<DVector<f64>> {
    let d = g.len();
    let rhs = DVector::from_column_slice(g);
    let scale = (0..d).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1e-12);
    let mut tau = 0.0;
    for _ in 0..40 {
        let shifted = a + DMatrix::identity(d, d) * tau;
        if let Some(ch) = shifted.cholesky() {
            let p = ch.solve(&rhs);
            if p.iter().all(|v| v.is_finite()) {
                return Some(p);
            }
        }
        tau = if tau == 0.0 { scale * 1e-10 } else { tau * 10.0 };
    }
    None
}

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
