use super::LinearizationData;
use crate::geometry::ExpansionTerm;
use crate::lattice::mu_sequence;
use crate::model::HomogeneousField;
use crate::{Error, Result};
use serde::Serialize;

/// Truncated expandible series: `polys[k][m]` multiplies `t^m e^{-μ_k t}`.
#[derive(Clone, Debug)]
struct ExpPoly {
    polys: Vec<Vec<f64>>,
}

/// Level bookkeeping: `sum[a][b]` is the index of `μ_a + μ_b` if it is kept.
struct Levels {
    values: Vec<f64>,
    sum: Vec<Vec<Option<usize>>>,
}

impl Levels {
    fn new(values: Vec<f64>) -> Self {
        let tol = 1e-9 * values.get(1).copied().unwrap_or(1.0);
        let find = |v: f64| values.iter().position(|w| (w - v).abs() <= tol);
        let sum = values
            .iter()
            .map(|a| values.iter().map(|b| find(a + b)).collect())
            .collect();
        Self { values, sum }
    }
}

impl ExpPoly {
    fn zero(k: usize) -> Self {
        Self { polys: vec![Vec::new(); k] }
    }

    fn one(k: usize) -> Self {
        let mut p = Self::zero(k);
        p.polys[0] = vec![1.0];
        p
    }

    fn mul(&self, other: &Self, lv: &Levels) -> Self {
        let mut out = Self::zero(self.polys.len());
        for (a, pa) in self.polys.iter().enumerate() {
            if pa.is_empty() {
                continue;
            }
            for (b, pb) in other.polys.iter().enumerate() {
                if pb.is_empty() {
                    continue;
                }
                let Some(c) = lv.sum[a][b] else { continue };
                let target = &mut out.polys[c];
                if target.len() < pa.len() + pb.len() - 1 {
                    target.resize(pa.len() + pb.len() - 1, 0.0);
                }
                for (i, x) in pa.iter().enumerate() {
                    for (j, y) in pb.iter().enumerate() {
                        target[i + j] += x * y;
                    }
                }
            }
        }
        out
    }

    fn add_scaled(&mut self, other: &Self, c: f64) {
        for (p, q) in self.polys.iter_mut().zip(&other.polys) {
            if p.len() < q.len() {
                p.resize(q.len(), 0.0);
            }
            p.iter_mut().zip(q).for_each(|(a, b)| *a += c * b);
        }
    }
}

/// `[G(γ)]` for the momentum components, as expandible series.
fn apply_field(field: &[HomogeneousField], xs: &[ExpPoly], lv: &Levels) -> Vec<ExpPoly> {
    let k = lv.values.len();
    let n = xs.len();
    let max_deg = field.iter().map(|f| f.degree).max().unwrap_or(0) as usize;
    let mut powers: Vec<Vec<ExpPoly>> = xs.iter().map(|x| vec![ExpPoly::one(k), x.clone()]).collect();
    for pj in powers.iter_mut() {
        while pj.len() <= max_deg {
            let next = pj[pj.len() - 1].mul(&pj[1], lv);
            pj.push(next);
        }
    }
    let mut out = vec![ExpPoly::zero(k); n];
    for f in field {
        for (i, comp) in f.xi_components.iter().enumerate() {
            for (exps, &c) in &comp.terms {
                if c == 0.0 {
                    continue;
                }
                let mut prod = ExpPoly::one(k);
                for (j, &e) in exps.iter().enumerate() {
                    if e > 0 {
                        prod = prod.mul(&powers[j][e as usize], lv);
                    }
                }
                out[i].add_scaled(&prod, c);
            }
        }
    }
    out
}

/// Formal solution of `∂_t γ = H_p(γ)` on the incoming manifold, truncated at
/// `μ ≤ N`, together with the symbolic residual series beyond `N`.
#[derive(Clone, Debug, Serialize)]
pub struct FormalCurve {
    pub lambdas: Vec<f64>,
    pub apex: Vec<f64>,
    pub truncation: f64,
    pub terms: Vec<ExpansionTerm>,
    pub prescribed: Vec<(f64, Vec<f64>)>,
    /// `ρ' - H_p(ρ)` expanded for `N < μ ≤` [`Self::residual_cutoff`].
    pub residual_terms: Vec<ExpansionTerm>,
    pub residual_cutoff: f64,
}

fn eval_terms(terms: &[ExpansionTerm], t: f64, dim: usize, derivative: bool) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for term in terms {
        let e = (-term.mu * t).exp();
        for (m, c) in term.coefficients.iter().enumerate() {
            let w = if derivative {
                let dm = if m > 0 { m as f64 * t.powi(m as i32 - 1) } else { 0.0 };
                (dm - term.mu * t.powi(m as i32)) * e
            } else {
                t.powi(m as i32) * e
            };
            out.iter_mut().zip(c).for_each(|(o, c)| *o += w * c);
        }
    }
    out
}

impl FormalCurve {
    pub fn dim(&self) -> usize {
        2 * self.lambdas.len()
    }

    /// `ρ_N(t)` relative to the apex.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        eval_terms(&self.terms, t, self.dim(), false)
    }

    pub fn derivative(&self, t: f64) -> Vec<f64> {
        eval_terms(&self.terms, t, self.dim(), true)
    }

    /// Symbolic residual `R(t) = ρ_N' - H_p(ρ_N)` and the size of its last
    /// retained level, a proxy for the truncation error of the expansion.
    pub fn residual(&self, t: f64) -> (Vec<f64>, f64) {
        let r = eval_terms(&self.residual_terms, t, self.dim(), false);
        // symmetric potentials leave every other level empty, so look at two
        let k = self.residual_terms.len();
        let last = self.residual_terms[k.saturating_sub(2)..]
            .iter()
            .map(|term| {
                let v = eval_terms(std::slice::from_ref(term), t, self.dim(), false);
                v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
            })
            .fold(0.0, f64::max);
        (r, last)
    }

    pub fn term(&self, mu: f64) -> Option<&ExpansionTerm> {
        self.terms.iter().find(|t| (t.mu - mu).abs() <= 1e-9 * mu.max(1.0))
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

/// Taylor order of the field needed to expand the residual up to `3N`.
pub fn required_taylor_order(lambdas: &[f64], n: f64) -> u32 {
    let l1 = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    ((3.0 * n / l1).floor() as u32).max(2)
}

/// Solves the level recursion `(F_p + μ)γ_m = (m+1)γ_{m+1} - R_m` for every
/// `μ ≤ n`. `prescribed` holds `(λ_j, γ_{λ_j,0})` pairs in the kernel of
/// `F_p + λ_j`; unprescribed kernel components are set to zero.
pub fn formal_curve(
    lin: &LinearizationData,
    apex: &[f64],
    field: &[HomogeneousField],
    prescribed: &[(f64, Vec<f64>)],
    n: f64,
) -> Result<FormalCurve> {
    let lmax = lin.lambdas.iter().cloned().fold(0.0, f64::max);
    if n <= lmax {
        return Err(Error::TruncationTooLow(format!("N={n} must exceed the largest exponent {lmax}")));
    }
    let dim = lin.dim();
    for (l, v) in prescribed {
        if !lin.is_eigenvalue(*l) || v.len() != dim {
            return Err(Error::PrescriptionNotInKernel(f64::INFINITY));
        }
        let mut res = LinearizationData::apply(&lin.fp, v);
        res.iter_mut().zip(v).for_each(|(r, x)| *r += l * x);
        let defect = res.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if defect > 1e-10 * scale {
            return Err(Error::PrescriptionNotInKernel(defect));
        }
    }
    let max_field_degree = field.iter().map(|f| f.degree).max().unwrap_or(1);
    let l1 = lin.lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let cutoff = (3.0 * n).min(max_field_degree as f64 * l1 + 1e-9).max(n);
    let seq = mu_sequence(&lin.lambdas, cutoff);
    let lv = Levels::new(seq.values.clone());
    let degrees = crate::geometry::structural_degrees(&seq.values, &lin.lambdas);
    let k = lv.values.len();
    let nvar = lin.n;
    let tol = 1e-9 * l1;

    // coefficient vectors γ_{μ,m} indexed [level][m][component]
    let mut gamma: Vec<Vec<Vec<f64>>> = vec![Vec::new(); k];
    let spatial = |gamma: &Vec<Vec<Vec<f64>>>| -> Vec<ExpPoly> {
        (0..nvar)
            .map(|j| ExpPoly {
                polys: gamma.iter().map(|c| c.iter().map(|v| v[j]).collect()).collect(),
            })
            .collect()
    };
    let level_residual = |gamma: &Vec<Vec<Vec<f64>>>, idx: usize| -> Vec<Vec<f64>> {
        let g = apply_field(field, &spatial(gamma), &lv);
        let len = g.iter().map(|p| p.polys[idx].len()).max().unwrap_or(0);
        (0..len)
            .map(|m| {
                let mut v = vec![0.0; dim];
                for (i, gi) in g.iter().enumerate() {
                    v[nvar + i] = gi.polys[idx].get(m).copied().unwrap_or(0.0);
                }
                v
            })
            .collect()
    };

    for idx in 1..k {
        let mu = lv.values[idx];
        if mu > n + tol {
            break;
        }
        let r = level_residual(&gamma, idx);
        let zero = vec![0.0; dim];
        let rm = |m: usize| r.get(m).cloned().unwrap_or_else(|| zero.clone());
        let resonant = lin.is_eigenvalue(mu);
        let top = degrees[idx] as usize;
        let mut coeffs = vec![vec![0.0; dim]; top + 2];
        if !resonant {
            for m in (0..=top.max(r.len().saturating_sub(1))).rev() {
                if m + 1 >= coeffs.len() {
                    coeffs.resize(m + 2, vec![0.0; dim]);
                }
                let next: Vec<f64> = coeffs[m + 1].iter().map(|v| (m + 1) as f64 * v).collect();
                let rhs: Vec<f64> = next.iter().zip(rm(m)).map(|(a, b)| a - b).collect();
                coeffs[m] = lin.solve_shifted(mu, &rhs);
            }
        } else {
            let p = lin.projector(mu);
            let kinv = lin.partial_inverse(mu);
            let top = top.max(r.len());
            coeffs.resize(top + 2, vec![0.0; dim]);
            for m in (0..=top).rev() {
                let next: Vec<f64> = coeffs[m + 1].iter().map(|v| (m + 1) as f64 * v).collect();
                let rhs: Vec<f64> = next.iter().zip(rm(m)).map(|(a, b)| a - b).collect();
                // K already annihilates the kernel, so K(1-Π) = K
                let image = LinearizationData::apply(&kinv, &rhs);
                let kernel = if m > 0 {
                    LinearizationData::apply(&p, &rm(m - 1)).iter().map(|v| v / m as f64).collect()
                } else {
                    prescribed
                        .iter()
                        .find(|(l, _)| (l - mu).abs() <= tol)
                        .map(|(_, v)| LinearizationData::apply(&p, v))
                        .unwrap_or_else(|| zero.clone())
                };
                coeffs[m] = image.iter().zip(&kernel).map(|(a, b)| a + b).collect();
            }
        }
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.iter().all(|v| *v == 0.0)) {
            coeffs.pop();
        }
        gamma[idx] = coeffs;
    }

    let kept = lv.values.iter().take_while(|&&m| m <= n + tol).count();
    let terms: Vec<ExpansionTerm> = (1..kept)
        .map(|i| ExpansionTerm {
            mu: lv.values[i],
            degree: gamma[i].len().saturating_sub(1) as u32,
            coefficients: gamma[i].clone(),
        })
        .collect();

    // R = ρ' - Fρ - G(ρ): levels ≤ N cancel by construction
    let g = apply_field(field, &spatial(&gamma), &lv);
    let residual_terms: Vec<ExpansionTerm> = (kept..k)
        .filter_map(|i| {
            let len = g.iter().map(|p| p.polys[i].len()).max().unwrap_or(0);
            if g.iter().all(|p| p.polys[i].iter().all(|v| *v == 0.0)) {
                return None;
            }
            let coefficients: Vec<Vec<f64>> = (0..len)
                .map(|m| {
                    let mut v = vec![0.0; dim];
                    for (c, gc) in g.iter().enumerate() {
                        v[nvar + c] = -gc.polys[i].get(m).copied().unwrap_or(0.0);
                    }
                    v
                })
                .collect();
            Some(ExpansionTerm {
                mu: lv.values[i],
                degree: len as u32 - 1,
                coefficients,
            })
        })
        .collect();
    Ok(FormalCurve {
        lambdas: lin.lambdas.clone(),
        apex: apex.to_vec(),
        truncation: n,
        terms,
        prescribed: prescribed.to_vec(),
        residual_terms,
        residual_cutoff: cutoff,
    })
}
