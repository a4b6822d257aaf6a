use super::ScaledOperator;
use crate::numerics::{norm2, random_complex_vector, vec_to_col};
use crate::C64;
use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

/// Values at or above this are reported as singular.
pub const RESOLVENT_CAP: f64 = 1e12;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResolventNorm {
    pub value: f64,
    pub singular: bool,
}

impl ResolventNorm {
    fn capped(v: f64) -> Self {
        if v.is_finite() && v < RESOLVENT_CAP {
            Self { value: v, singular: false }
        } else {
            Self { value: RESOLVENT_CAP, singular: true }
        }
    }
}

fn dense_norm(m: &Mat<C64>) -> f64 {
    match m.singular_values() {
        Ok(s) => {
            let smin = s[s.len() - 1];
            if smin > 0.0 {
                1.0 / smin
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal `a`
/// and off-diagonal `b`.
fn top_ritz_value(a: &[f64], b: &[f64]) -> f64 {
    let k = a.len();
    let t = Mat::from_fn(k, k, |i, j| {
        if i == j {
            a[i]
        } else if i + 1 == j {
            b[i]
        } else if j + 1 == i {
            b[j]
        } else {
            0.0
        }
    });
    t.self_adjoint_eigenvalues(faer::Side::Lower)
        .map(|ev| ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .unwrap_or(f64::NAN)
}

/// `‖(A - z)⁻¹‖₂`, by Lanczos on `R*R` with full reorthogonalization and a
/// dense SVD fallback.
pub fn resolvent_norm(op: &ScaledOperator, z: C64) -> ResolventNorm {
    const MAX_STEPS: usize = 80;
    let n = op.dim();
    let mut m = op.matrix.clone();
    for i in 0..n {
        m[(i, i)] -= z;
    }
    let lu = m.partial_piv_lu();
    let apply = |v: &[C64]| -> Vec<C64> {
        let y = lu.solve(vec_to_col(v));
        let x = lu.solve_adjoint(y.as_ref());
        (0..n).map(|i| x[(i, 0)]).collect()
    };
    let mut q = random_complex_vector(n, 11);
    let nq = norm2(&q);
    q.iter_mut().for_each(|x| *x /= nq);
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut est = 0.0;
    for step in 0..MAX_STEPS.min(n) {
        let mut w = apply(&q);
        if !w.iter().all(|c| c.is_finite()) {
            return ResolventNorm::capped(dense_norm(&m));
        }
        let a: f64 = q.iter().zip(&w).map(|(qi, wi)| (qi.conj() * wi).re).sum();
        basis.push(q);
        alphas.push(a);
        // two passes of Gram-Schmidt keep the basis orthogonal to rounding
        for _ in 0..2 {
            for b in &basis {
                let c: C64 = b.iter().zip(&w).map(|(bi, wi)| bi.conj() * wi).sum();
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
            }
        }
        let new = top_ritz_value(&alphas, &betas).sqrt();
        if new >= RESOLVENT_CAP {
            return ResolventNorm::capped(new);
        }
        let beta = norm2(&w);
        if step > 0 && (new - est).abs() <= 1e-12 * new || beta <= 1e-14 * new * new {
            return ResolventNorm::capped(new);
        }
        est = new;
        betas.push(beta);
        q = w.into_iter().map(|c| c / beta).collect();
    }
    ResolventNorm::capped(est)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScanPoint {
    pub re: f64,
    pub im: f64,
    pub norm: f64,
    /// `‖R(z)‖ · Π|z - z_k|` over the supplied resonances.
    pub bound_product: f64,
    pub singular: bool,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Resolvent norms on a rectangular grid of `n_re × n_im` points.
pub fn resolvent_scan(
    op: &ScaledOperator,
    re_range: (f64, f64),
    im_range: (f64, f64),
    n_re: usize,
    n_im: usize,
    resonances: &[C64],
) -> Vec<ScanPoint> {
    let pts: Vec<C64> = linspace(im_range.0, im_range.1, n_im)
        .into_iter()
        .flat_map(|y| linspace(re_range.0, re_range.1, n_re).into_iter().map(move |x| C64::new(x, y)))
        .collect();
    pts.par_iter()
        .map(|&z| {
            let r = resolvent_norm(op, z);
            let prod: f64 = resonances.iter().map(|zk| (z - zk).norm()).product();
            ScanPoint {
                re: z.re,
                im: z.im,
                norm: r.value,
                bound_product: r.value * prod,
                singular: r.singular,
            }
        })
        .collect()
}

/// Exponent `K` with `sup = h^{-K}`.
pub fn fit_exponent(sup: f64, h: f64) -> f64 {
    -sup.ln() / h.ln()
}

#[cfg(test)]
mod tests {
    use super::super::{assemble_scaled, Discretization, Grid1D, Scaling};
    use super::*;
    use crate::model::Potential;

    #[test]
    fn selfadjoint_resolvent_is_inverse_distance() {
        let pot = Potential::sech2(1.0);
        let g = Grid1D::new(6.0, 120).unwrap();
        let op = assemble_scaled(&pot, &g, 0.2, 0.0, Scaling::Uniform, Discretization::Fd4).unwrap();
        let sa = Mat::from_fn(g.points, g.points, |i, j| op.matrix[(i, j)].re);
        let ev = sa.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let z = C64::new(ev[0] - 0.01, 0.0);
        let r = resolvent_norm(&op, z);
        assert!(!r.singular);
        assert!((r.value - 100.0).abs() < 1e-8 * 100.0, "{}", r.value);
        let z = C64::new(0.5 * (ev[3] + ev[4]), 0.02);
        let dist = ev.iter().map(|e| C64::new(e - z.re, -z.im).norm()).fold(f64::INFINITY, f64::min);
        assert!((resolvent_norm(&op, z).value * dist - 1.0).abs() < 1e-8);
    }

    #[test]
    fn eigenvalue_is_reported_singular() {
        let pot = Potential::sech2(1.0);
        let g = Grid1D::new(6.0, 60).unwrap();
        let op = assemble_scaled(&pot, &g, 0.2, 0.0, Scaling::Uniform, Discretization::Fd2).unwrap();
        let sa = Mat::from_fn(g.points, g.points, |i, j| op.matrix[(i, j)].re);
        let ev = sa.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let r = resolvent_norm(&op, C64::new(ev[2], 0.0));
        assert!(r.singular);
        assert_eq!(r.value, RESOLVENT_CAP);
    }

    #[test]
    fn exponent_fit() {
        assert!((fit_exponent(0.1f64.powf(-1.5), 0.1) - 1.5).abs() < 1e-12);
    }
}
