//! Pseudo-resonance lattice `z_α⁰ = E0 - ih Σ(α_j + ½)λ_j` and the increasing
//! sequence of ℕ-combinations of the Lyapunov exponents.

use crate::model::BarrierData;
use crate::{Error, Result, C64};
use serde::Serialize;

pub type MultiIndex = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PseudoResonance {
    pub alpha: MultiIndex,
    pub z0: C64,
    pub decay_sum: f64,
    pub simple: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuSequence {
    pub values: Vec<f64>,
    pub cutoff: f64,
    tol: f64,
}

impl MuSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of `value` in the sequence, if present within the dedup tolerance.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        let i = self.values.partition_point(|&v| v < value - self.tol);
        (i < self.values.len() && (self.values[i] - value).abs() <= self.tol).then_some(i)
    }
}

pub fn decay_sum(alpha: &[u32], lambdas: &[f64]) -> f64 {
    alpha.iter().zip(lambdas).map(|(&a, l)| (a as f64 + 0.5) * l).sum()
}

pub fn lattice_point(e0: f64, alpha: &[u32], lambdas: &[f64], h: f64) -> C64 {
    C64::new(e0, -h * decay_sum(alpha, lambdas))
}

/// All `β ∈ ℕⁿ` with `Σ β_j λ_j ≤ bound`.
fn enumerate(lambdas: &[f64], bound: f64) -> Vec<(MultiIndex, f64)> {
    fn rec(lambdas: &[f64], j: usize, bound: f64, cur: &mut Vec<u32>, acc: f64, out: &mut Vec<(MultiIndex, f64)>) {
        if j == lambdas.len() {
            out.push((cur.clone(), acc));
            return;
        }
        let mut k = 0u32;
        loop {
            let s = acc + k as f64 * lambdas[j];
            if s > bound {
                break;
            }
            cur.push(k);
            rec(lambdas, j + 1, bound, cur, s, out);
            cur.pop();
            k += 1;
        }
    }
    let mut out = Vec::new();
    rec(lambdas, 0, bound, &mut Vec::new(), 0.0, &mut out);
    out
}

pub fn mu_sequence(lambdas: &[f64], cutoff: f64) -> MuSequence {
    assert!(!lambdas.is_empty() && lambdas.iter().all(|&l| l > 0.0));
    let l1 = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = 1e-10 * l1;
    let mut vals: Vec<f64> = enumerate(lambdas, cutoff + tol).into_iter().map(|(_, s)| s).collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    let mut values: Vec<f64> = Vec::with_capacity(vals.len());
    for v in vals {
        if values.last().is_none_or(|&last| v - last > tol) {
            values.push(v);
        }
    }
    MuSequence { values, cutoff, tol }
}

pub fn is_simple(alpha: &[u32], lambdas: &[f64], tol: f64) -> bool {
    let target = decay_sum(alpha, lambdas);
    let half: f64 = lambdas.iter().map(|l| 0.5 * l).sum();
    enumerate(lambdas, target - half + tol)
        .into_iter()
        .all(|(beta, s)| beta.as_slice() == alpha || (s + half - target).abs() >= tol)
}

/// Lattice points with `decay_sum < c`, ordered by decay sum.
pub fn pseudo_resonances(barrier: &BarrierData, h: f64, c: f64) -> Result<Vec<PseudoResonance>> {
    let lambdas = &barrier.lambdas;
    let tol = 1e-8 * lambdas[0];
    let half: f64 = lambdas.iter().map(|l| 0.5 * l).sum();
    let mut out = Vec::new();
    for (alpha, s) in enumerate(lambdas, c - half + tol) {
        let ds = s + half;
        if (ds - c).abs() <= tol {
            return Err(Error::ForbiddenRadius {
                c,
                alpha,
                decay_sum: ds,
            });
        }
        if ds < c {
            out.push(PseudoResonance {
                z0: lattice_point(barrier.e0, &alpha, lambdas, h),
                simple: is_simple(&alpha, lambdas, tol),
                alpha,
                decay_sum: ds,
            });
        }
    }
    out.sort_by(|a, b| a.decay_sum.total_cmp(&b.decay_sum).then(a.alpha.cmp(&b.alpha)));
    Ok(out)
}

pub fn lattice_json(points: &[PseudoResonance]) -> serde_json::Value {
    serde_json::Value::Array(
        points
            .iter()
            .map(|p| {
                serde_json::json!({
                    "alpha": p.alpha,
                    "re": p.z0.re,
                    "im": p.z0.im,
                    "decay_sum": p.decay_sum,
                    "simple": p.simple,
                })
            })
            .collect(),
    )
}
