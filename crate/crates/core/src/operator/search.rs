use super::{assemble_scaled, Discretization, Grid1D, Scaling, ScaledOperator};
use crate::lattice::{MultiIndex, PseudoResonance};
use crate::model::Potential;
use crate::numerics::{matvec, norm2, random_complex_vector, vec_to_col};
use crate::{Error, Result, C64};
use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct ResonanceHit {
    pub z: C64,
    pub alpha: MultiIndex,
    #[serde(skip)]
    pub right_vector: Vec<C64>,
    /// `‖(A - z)v‖ / ‖v‖`.
    pub residual: f64,
    /// Distance from the pseudo-resonance that seeded the search.
    pub match_distance: f64,
    pub flagged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Hits further than this from their seed are flagged.
    pub flag_distance: f64,
    pub seed: u64,
}

impl SearchOptions {
    pub fn for_step(h: f64) -> Self {
        Self {
            tol: 1e-10,
            max_iter: 300,
            flag_distance: 0.5 * h,
            seed: 7,
        }
    }
}

fn shifted(a: &Mat<C64>, sigma: C64) -> Mat<C64> {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] -= sigma;
    }
    m
}

fn weighted_dot(w: &[C64], x: &[C64], y: &[C64]) -> C64 {
    w.iter().zip(x).zip(y).map(|((w, a), b)| w * a * b).sum()
}

fn residual(a: &Mat<C64>, z: C64, v: &[C64]) -> f64 {
    let av = matvec(a, v);
    let r: Vec<C64> = av.iter().zip(v).map(|(p, q)| p - z * q).collect();
    norm2(&r) / norm2(v)
}

/// Shift-invert iteration from `sigma`, followed by Rayleigh-quotient
/// refinement in the weighted bilinear form.
fn converge(op: &ScaledOperator, sigma: C64, opts: &SearchOptions) -> Result<(C64, Vec<C64>, f64)> {
    let a = &op.matrix;
    let n = op.dim();
    let w = &op.weights;
    let mut x = random_complex_vector(n, opts.seed);
    let mut z = sigma;
    let mut shift = sigma;
    let mut lu = shifted(a, shift).partial_piv_lu();
    let mut last = f64::INFINITY;
    let mut refined = 0;
    for it in 0..opts.max_iter {
        let y = lu.solve(vec_to_col(&x));
        let yv: Vec<C64> = (0..n).map(|i| y[(i, 0)]).collect();
        let den = weighted_dot(w, &yv, &yv);
        let num = weighted_dot(w, &yv, &x);
        let ny = norm2(&yv);
        if !ny.is_finite() || ny == 0.0 {
            return Err(Error::NoConvergence(format!("singular shift at {shift}")));
        }
        z = if den.norm() > 1e-300 { shift + num / den } else { shift + 1.0 / ny };
        x = yv.iter().map(|v| v / ny).collect();
        let res = residual(a, z, &x);
        let scale = z.norm().max(1.0);
        if res <= opts.tol * scale {
            return Ok((z, x, res));
        }
        // switch to Rayleigh-quotient shifts once the iterate has settled
        if (res < 1e-4 * scale && res < 0.5 * last && refined < 3) || (it > 20 && refined < 3 && res < 1e-2 * scale) {
            shift = z;
            lu = shifted(a, shift).partial_piv_lu();
            refined += 1;
        }
        last = res;
    }
    let res = residual(a, z, &x);
    if res <= 1e3 * opts.tol * z.norm().max(1.0) {
        return Ok((z, x, res));
    }
    Err(Error::NoConvergence(format!(
        "shift-invert from {sigma} stalled at residual {res:.3e}"
    )))
}

/// Resonances near each pseudo-resonance, one shift-invert search per seed.
/// Duplicate hits are merged, keeping the closer match.
pub fn find_resonances(
    op: &ScaledOperator,
    seeds: &[PseudoResonance],
    opts: &SearchOptions,
) -> Result<Vec<ResonanceHit>> {
    let angle = op.effective_angle();
    for s in seeds {
        if -s.z0.im >= s.z0.re * (2.0 * angle).tan() || 2.0 * angle >= std::f64::consts::FRAC_PI_2 && s.z0.re <= 0.0 {
            return Err(Error::SectorUncovered { re: s.z0.re, im: s.z0.im });
        }
    }
    let found: Vec<Result<ResonanceHit>> = seeds
        .par_iter()
        .map(|s| {
            let (z, v, res) = converge(op, s.z0, opts)?;
            let d = (z - s.z0).norm();
            Ok(ResonanceHit {
                z,
                alpha: s.alpha.clone(),
                right_vector: v,
                residual: res,
                match_distance: d,
                flagged: d > opts.flag_distance,
            })
        })
        .collect();
    let mut out: Vec<ResonanceHit> = Vec::new();
    for hit in found {
        let hit = hit?;
        let tol = 1e-8 * hit.z.norm().max(1.0);
        match out.iter_mut().find(|o| (o.z - hit.z).norm() <= tol) {
            Some(o) if hit.match_distance < o.match_distance => *o = hit,
            Some(_) => {}
            None => out.push(hit),
        }
    }
    Ok(out)
}

/// Full spectrum of the scaled matrix. Used as an independent check on
/// [`find_resonances`].
pub fn dense_eigenvalues(op: &ScaledOperator) -> Result<Vec<C64>> {
    op.matrix
        .eigenvalues()
        .map_err(|e| Error::Linalg(format!("{e:?}")))
}

/// Largest movement of the resonances found near `seeds` when the box
/// half-length and the number of points are both doubled.
#[allow(clippy::too_many_arguments)]
pub fn certify_box(
    pot: &Potential,
    grid: &Grid1D,
    h: f64,
    theta: f64,
    scaling: Scaling,
    disc: Discretization,
    seeds: &[PseudoResonance],
    opts: &SearchOptions,
) -> Result<f64> {
    let base = find_resonances(&assemble_scaled(pot, grid, h, theta, scaling, disc)?, seeds, opts)?;
    let big_grid = Grid1D::new(2.0 * grid.half_length, 2 * grid.points - 1)?;
    let big = find_resonances(&assemble_scaled(pot, &big_grid, h, theta, scaling, disc)?, seeds, opts)?;
    let mut worst: f64 = 0.0;
    for b in &base {
        let d = big.iter().map(|o| (o.z - b.z).norm()).fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    Ok(worst)
}
