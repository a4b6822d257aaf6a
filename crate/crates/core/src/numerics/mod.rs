//! Numerical building blocks shared by the physics modules.

pub mod ode;
pub mod quad;
pub mod series;
pub mod smooth;
pub mod special;

use crate::{Error, Result, C64};
use faer::prelude::*;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex_vector(n: usize, seed: u64) -> Vec<C64> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5))
        .collect()
}

pub fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius(m: &Mat<C64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn matvec(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); m.nrows()];
    for j in 0..m.ncols() {
        let vj = v[j];
        if vj == C64::new(0.0, 0.0) {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * vj;
        }
    }
    out
}

pub fn col_to_vec(m: &Mat<C64>, j: usize) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn vec_to_col(v: &[C64]) -> Mat<C64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// Least-squares solution of `a x ≈ b` via column-scaled QR. Returns the
/// solution and the ratio of extreme column-scaled singular values.
pub fn lstsq(a: &Mat<C64>, b: &[C64]) -> Result<(Vec<C64>, f64)> {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n {
        return Err(Error::IllConditioned(format!("{m} equations for {n} unknowns")));
    }
    let scales: Vec<f64> = (0..n)
        .map(|j| {
            let s = (0..m).map(|i| a[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let scaled = Mat::from_fn(m, n, |i, j| a[(i, j)] / scales[j]);
    let sv = scaled
        .singular_values()
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let cond = sv[sv.len() - 1] / sv[0];
    let rhs = vec_to_col(b);
    let x = scaled.qr().solve_lstsq(&rhs);
    Ok(((0..n).map(|j| x[(j, 0)] / scales[j]).collect(), cond))
}

/// Real least squares, same conventions as [`lstsq`].
pub fn lstsq_real(a: &Mat<f64>, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let ac = Mat::from_fn(a.nrows(), a.ncols(), |i, j| C64::new(a[(i, j)], 0.0));
    let bc: Vec<C64> = b.iter().map(|&v| C64::new(v, 0.0)).collect();
    let (x, cond) = lstsq(&ac, &bc)?;
    Ok((x.iter().map(|z| z.re).collect(), cond))
}

/// Radical-inverse (van der Corput) sequence in the given base.
pub fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Ordinary least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq_recovers_exact_polynomial() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let a = Mat::from_fn(20, 3, |i, j| C64::new(xs[i].powi(j as i32), 0.0));
        let b: Vec<C64> = xs.iter().map(|x| C64::new(1.0 - 2.0 * x, 3.0 * x * x)).collect();
        let (c, cond) = lstsq(&a, &b).unwrap();
        assert!((c[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((c[1] - C64::new(-2.0, 0.0)).norm() < 1e-12);
        assert!((c[2] - C64::new(0.0, 3.0)).norm() < 1e-12);
        assert!(cond > 1e-3);
    }

    #[test]
    fn halton_base_two() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(3, 2), 0.75);
        assert_eq!(halton(6, 3), 2.0 / 9.0);
    }
}
