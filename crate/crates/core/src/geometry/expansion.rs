use super::{Direction, Trajectory};
use crate::lattice::MuSequence;
use crate::numerics::lstsq_real;
use crate::{Error, Result};
use faer::Mat;
use serde::Serialize;

/// One level `γ_μ(t) e^{∓μt}` of an expandible expansion; `coefficients[m]`
/// multiplies `t^m`.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionTerm {
    pub mu: f64,
    pub degree: u32,
    pub coefficients: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticExpansion {
    pub side: Direction,
    pub terms: Vec<ExpansionTerm>,
    /// `(λ_j, spatial part of the μ = λ_j, t⁰ coefficient)`.
    pub g: Vec<(f64, Vec<f64>)>,
    pub lambda_star: Option<f64>,
    /// Largest pointwise relative misfit on the fit window.
    pub residual: f64,
    /// Levels dropped because the window could not separate them.
    pub dropped_terms: usize,
    pub window: (f64, f64),
}

impl AsymptoticExpansion {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let dim = self.terms.first().map_or(0, |k| k.coefficients[0].len());
        let sgn = self.sign();
        let mut out = vec![0.0; dim];
        for term in &self.terms {
            let e = (sgn * term.mu * t).exp();
            for (m, c) in term.coefficients.iter().enumerate() {
                let w = e * t.powi(m as i32);
                out.iter_mut().zip(c).for_each(|(o, c)| *o += w * c);
            }
        }
        out
    }

    fn sign(&self) -> f64 {
        match self.side {
            Direction::Stable => -1.0,
            Direction::Unstable => 1.0,
        }
    }

    pub fn term(&self, mu: f64) -> Option<&ExpansionTerm> {
        self.terms.iter().find(|t| (t.mu - mu).abs() <= 1e-9 * mu.max(1.0))
    }

    /// Spatial `g_λ` at the first Lyapunov exponent, for one-dimensional runs.
    pub fn g_scalar(&self, lambda: f64) -> Option<f64> {
        self.g
            .iter()
            .find(|(l, _)| (l - lambda).abs() <= 1e-9 * lambda)
            .map(|(_, v)| v[0])
    }
}

/// Polynomial degree carried by each level: products add degrees, and a
/// level that equals some `λ_j` while also being a nontrivial combination is
/// resonant and gains one more.
pub fn structural_degrees(values: &[f64], lambdas: &[f64]) -> Vec<u32> {
    let tol = 1e-9 * lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut deg = vec![0u32; values.len()];
    for k in 0..values.len() {
        if values[k] <= tol {
            continue;
        }
        let mut best: Option<u32> = None;
        for a in 1..k {
            for b in a..k {
                if (values[a] + values[b] - values[k]).abs() <= tol {
                    let d = deg[a] + deg[b];
                    best = Some(best.map_or(d, |x: u32| x.max(d)));
                }
            }
        }
        let resonant = best.is_some() && lambdas.iter().any(|l| (l - values[k]).abs() <= tol);
        deg[k] = best.unwrap_or(0) + u32::from(resonant);
    }
    deg
}

/// Least-squares fit of the truncated expandible model on the part of the
/// trajectory where `|γ| ∈ [1e-8, 1e-2]`.
pub fn fit_expansion(traj: &Trajectory, mu: &MuSequence, lambdas: &[f64]) -> Result<AsymptoticExpansion> {
    let side = traj.direction.unwrap_or(Direction::Stable);
    let sgn = if side == Direction::Stable { -1.0 } else { 1.0 };
    let window: Vec<usize> = (0..traj.times.len())
        .filter(|&i| {
            let r = traj.states[i].norm();
            (1e-8..=1e-2).contains(&r)
        })
        .collect();
    let degrees = structural_degrees(&mu.values, lambdas);
    let mut levels: Vec<(f64, u32)> = mu
        .values
        .iter()
        .zip(&degrees)
        .filter(|(v, _)| **v > 0.0)
        .map(|(v, d)| (*v, *d))
        .collect();
    let unknowns = |lv: &[(f64, u32)]| lv.iter().map(|(_, d)| *d as usize + 1).sum::<usize>();
    if window.len() < 2 * unknowns(&levels[..1.min(levels.len())]).max(1) + 4 {
        return Err(Error::WindowTooShort(window.len()));
    }
    let ts: Vec<f64> = window.iter().map(|&i| traj.times[i]).collect();
    let tc = ts.iter().sum::<f64>() / ts.len() as f64;
    let dim = traj.states[0].x.len() * 2;
    let data: Vec<Vec<f64>> = window.iter().map(|&i| traj.states[i].to_vec()).collect();
    let mut dropped = 0;
    loop {
        if levels.is_empty() {
            return Err(Error::IllConditioned("no separable level left in the fit window".into()));
        }
        let cols = unknowns(&levels);
        if ts.len() < cols + 4 {
            levels.pop();
            dropped += 1;
            continue;
        }
        // columns τ^m e^{∓μτ} with τ = t - tc keep the basis well scaled
        let a = Mat::from_fn(ts.len(), cols, |r, c| {
            let tau = ts[r] - tc;
            let mut k = c;
            for (m, d) in &levels {
                if k <= *d as usize {
                    return (sgn * m * tau).exp() * tau.powi(k as i32);
                }
                k -= *d as usize + 1;
            }
            unreachable!()
        });
        let mut coef_tau = Vec::with_capacity(dim);
        let mut cond = 1.0;
        for comp in 0..dim {
            let b: Vec<f64> = data.iter().map(|s| s[comp]).collect();
            let (x, c) = lstsq_real(&a, &b)?;
            cond = c;
            coef_tau.push(x);
        }
        if cond < 1e-13 && levels.len() > 1 {
            levels.pop();
            dropped += 1;
            continue;
        }
        // back to the absolute time origin
        let mut terms = Vec::with_capacity(levels.len());
        let mut offset = 0;
        for &(m, d) in &levels {
            let scale = (-sgn * m * tc).exp();
            let mut coefficients = vec![vec![0.0; dim]; d as usize + 1];
            for comp in 0..dim {
                for j in 0..=d as usize {
                    let mut s = 0.0;
                    for mm in j..=d as usize {
                        s += coef_tau[comp][offset + mm] * binomial(mm, j) * (-tc).powi((mm - j) as i32);
                    }
                    coefficients[j][comp] = scale * s;
                }
            }
            offset += d as usize + 1;
            terms.push(ExpansionTerm { mu: m, degree: d, coefficients });
        }
        let n = dim / 2;
        let g: Vec<(f64, Vec<f64>)> = lambdas
            .iter()
            .filter_map(|&l| {
                terms
                    .iter()
                    .find(|t| (t.mu - l).abs() <= 1e-9 * l)
                    .map(|t| (l, t.coefficients[0][..n].to_vec()))
            })
            .collect();
        let gmax = terms
            .iter()
            .flat_map(|t| t.coefficients[0][..n].iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let lambda_star = terms
            .iter()
            .find(|t| t.coefficients[0][..n].iter().any(|v| v.abs() > 1e-8 * gmax))
            .map(|t| t.mu);
        let mut exp = AsymptoticExpansion {
            side,
            terms,
            g,
            lambda_star,
            residual: 0.0,
            dropped_terms: dropped,
            window: (ts[0].min(ts[ts.len() - 1]), ts[0].max(ts[ts.len() - 1])),
        };
        exp.residual = ts
            .iter()
            .zip(&data)
            .map(|(&t, s)| {
                let m = exp.eval(t);
                let err = m.iter().zip(s).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                err / s.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max);
        return Ok(exp);
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
