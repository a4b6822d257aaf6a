use super::ScaledOperator;
use crate::numerics::{frobenius, random_complex_vector};
use crate::{Error, Result, C64};
use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct RieszProjector {
    pub center: C64,
    pub radius: f64,
    pub n_quad: usize,
    pub matrix: Mat<C64>,
    /// `σ₂/σ₁`; small for a rank-one projector.
    pub rank_gap: f64,
    /// `‖Π² - Π‖_F / ‖Π‖_F`.
    pub idempotency_defect: f64,
    /// `‖WΠ - (WΠ)ᵀ‖_F / ‖Π‖_F` with `W = diag(z')`.
    pub symmetry_defect: f64,
    /// Change between `n_quad` and `2 n_quad` nodes, relative to `max(‖Π‖, 1)`.
    pub quadrature_change: f64,
}

fn nodes(center: C64, radius: f64, m: usize) -> Vec<(C64, C64)> {
    (0..m)
        .map(|j| {
            let e = C64::from_polar(1.0, 2.0 * PI * j as f64 / m as f64);
            (center + radius * e, e)
        })
        .collect()
}

fn scale(m: &Mat<C64>, c: C64) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * c)
}

fn spectral_norm(m: &Mat<C64>) -> f64 {
    m.singular_values().map(|s| s[0]).unwrap_or(f64::NAN)
}

/// Spectral radius of `R = (A - ζ)⁻¹`, i.e. the reciprocal distance from `ζ`
/// to the nearest eigenvalue. `‖R‖` itself is useless as a margin near a
/// barrier top, where the pseudospectrum is much wider than the spectrum.
fn spectral_radius_estimate(m: &Mat<C64>) -> f64 {
    let n = m.ncols();
    let start = random_complex_vector(n, 3);
    let mut v = Mat::from_fn(n, 1, |i, _| start[i]);
    let (burn, steps) = (20, 40);
    let mut log_growth = 0.0;
    for k in 0..burn + steps {
        let nv = frobenius(&v);
        v = scale(&v, C64::new(1.0 / nv, 0.0));
        v = m * &v;
        if k >= burn {
            log_growth += frobenius(&v).ln();
        }
    }
    (log_growth / steps as f64).exp()
}

fn shifted(op: &ScaledOperator, z: C64) -> Mat<C64> {
    let mut m = op.matrix.clone();
    for i in 0..op.dim() {
        m[(i, i)] -= z;
    }
    m
}

/// `Π = -(1/2πi) ∮ (A - ζ)⁻¹ dζ` on the circle `|ζ - center| = radius` by the
/// trapezoid rule, computed with `2 n_quad` nodes and checked against the
/// even-node subset.
pub fn riesz_projector(op: &ScaledOperator, center: C64, radius: f64, n_quad: usize) -> Result<RieszProjector> {
    let n = op.dim();
    let m = 2 * n_quad;
    let terms: Vec<(usize, Mat<C64>, f64)> = nodes(center, radius, m)
        .into_par_iter()
        .enumerate()
        .map(|(j, (zeta, e))| {
            let r = shifted(op, zeta).partial_piv_lu().inverse();
            let nr = spectral_radius_estimate(&r);
            (j, scale(&r, e), nr)
        })
        .collect();
    let mut full = Mat::<C64>::zeros(n, n);
    let mut half = Mat::<C64>::zeros(n, n);
    let mut node_norms = Vec::with_capacity(m);
    for (j, t, nr) in terms {
        full += &t;
        if j % 2 == 0 {
            half += &t;
        }
        node_norms.push(nr);
    }
    let full = scale(&full, C64::new(-radius / m as f64, 0.0));
    let half = scale(&half, C64::new(-radius / n_quad as f64, 0.0));
    if full.as_ref().has_nan() {
        return Err(Error::ContourTooClose { distance: 0.0, radius });
    }
    let pnorm = spectral_norm(&full).max(1.0);
    let distance = node_norms.iter().map(|nr| 1.0 / nr).fold(f64::INFINITY, f64::min);
    if distance < radius / 10.0 {
        return Err(Error::ContourTooClose { distance, radius });
    }
    let change = frobenius(&(&full - &half)) / pnorm;
    if change > 1e-6 {
        return Err(Error::QuadratureDivergence(change));
    }
    let sv = full.singular_values().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let rank_gap = if sv[0] > 0.0 { sv[1] / sv[0] } else { 0.0 };
    let fro = frobenius(&full).max(f64::MIN_POSITIVE);
    let idempotency_defect = frobenius(&(&full * &full - &full)) / fro;
    let wm = Mat::from_fn(n, n, |i, j| op.weights[i] * full[(i, j)]);
    let symmetry_defect = frobenius(&(&wm - wm.transpose())) / fro;
    Ok(RieszProjector {
        center,
        radius,
        n_quad,
        matrix: full,
        rank_gap,
        idempotency_defect,
        symmetry_defect,
        quadrature_change: change,
    })
}

/// `Π B` for a block of column vectors, using one factorization per node
/// instead of forming `Π`.
pub fn riesz_apply(op: &ScaledOperator, center: C64, radius: f64, n_quad: usize, block: &Mat<C64>) -> Result<Mat<C64>> {
    let m = 2 * n_quad;
    let terms: Vec<(usize, Mat<C64>)> = nodes(center, radius, m)
        .into_par_iter()
        .enumerate()
        .map(|(j, (zeta, e))| (j, scale(&shifted(op, zeta).partial_piv_lu().solve(block), e)))
        .collect();
    let mut full = Mat::<C64>::zeros(block.nrows(), block.ncols());
    let mut half = full.clone();
    for (j, t) in terms {
        full += &t;
        if j % 2 == 0 {
            half += &t;
        }
    }
    let full = scale(&full, C64::new(-radius / m as f64, 0.0));
    let half = scale(&half, C64::new(-radius / n_quad as f64, 0.0));
    let scale = frobenius(&full).max(frobenius(block)).max(1e-300);
    let change = frobenius(&(&full - &half)) / scale;
    if !change.is_finite() {
        return Err(Error::ContourTooClose { distance: 0.0, radius });
    }
    if change > 1e-6 {
        return Err(Error::QuadratureDivergence(change));
    }
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::super::{assemble_scaled, Discretization, Grid1D, Scaling};
    use super::*;
    use crate::model::Potential;

    fn oscillator() -> ScaledOperator {
        let pot = Potential::quadratic(1.0, &[2.0], vec![]);
        let g = Grid1D::new(5.0, 160).unwrap();
        assemble_scaled(&pot, &g, 0.2, 0.3, Scaling::Uniform, Discretization::Fourier).unwrap()
    }

    #[test]
    fn isolated_resonance_gives_rank_one_projector() {
        let op = oscillator();
        let p = riesz_projector(&op, C64::new(1.0, -0.2), 0.1, 32).unwrap();
        assert!(p.rank_gap < 1e-8, "{}", p.rank_gap);
        assert!(p.idempotency_defect < 1e-8);
        assert!(p.symmetry_defect < 1e-8);
        let tr: C64 = (0..op.dim()).map(|i| p.matrix[(i, i)]).sum();
        assert!((tr - 1.0).norm() < 1e-8);
    }

    #[test]
    fn empty_contour_gives_zero() {
        let op = oscillator();
        let p = riesz_projector(&op, C64::new(1.0, -0.4), 0.05, 32).unwrap();
        assert!(frobenius(&p.matrix) < 1e-10);
    }

    #[test]
    fn contour_through_resonance_is_rejected() {
        let op = oscillator();
        assert!(matches!(
            riesz_projector(&op, C64::new(1.0, -0.2), 0.4, 32),
            Err(Error::ContourTooClose { .. }) | Err(Error::QuadratureDivergence(_))
        ));
    }

    #[test]
    fn apply_matches_matrix() {
        let op = oscillator();
        let c = C64::new(1.0, -0.6);
        let p = riesz_projector(&op, c, 0.1, 32).unwrap();
        let b = Mat::from_fn(op.dim(), 2, |i, j| C64::new((i as f64 * 0.1 + j as f64).sin(), 0.2));
        let pb = riesz_apply(&op, c, 0.1, 32, &b).unwrap();
        let d = frobenius(&(&p.matrix * &b - &pb));
        assert!(d < 1e-9 * frobenius(&pb).max(1.0));
    }
}
