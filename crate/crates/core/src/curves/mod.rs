//! Hamiltonian curves on the incoming manifold with prescribed leading
//! asymptotics: linearization at the fixed point, the formal expandible
//! series, and its Picard refinement into a true trajectory.

mod formal;
mod picard;

pub use formal::{formal_curve, required_taylor_order, FormalCurve};
pub use picard::{lipschitz_bound, picard_refine, verify_prescription, PicardOptions, PrescriptionReport, RefinedCurve};

use crate::model::BarrierData;
use crate::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::Serialize;

/// `F_p = dH_p(0,0)` with its spectral data.
#[derive(Clone, Debug)]
pub struct LinearizationData {
    pub n: usize,
    pub fp: Mat<f64>,
    /// `λ_j` in coordinate order.
    pub lambdas: Vec<f64>,
    /// `-λ_n, …, -λ_1, λ_1, …, λ_n`.
    pub spectrum: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearizationReport {
    pub max_idempotency_defect: f64,
    /// `‖(F_p+λ)K_λ - 1‖` on the image, relative to `‖F_p+λ‖·‖K_λ‖` so that
    /// nearly equal exponents (large but correct `K_λ`) are not flagged.
    pub max_partial_inverse_defect: f64,
    pub ranks_complementary: bool,
}

fn rank(m: &Mat<f64>) -> usize {
    let s = m.singular_values().unwrap_or_default();
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&v| v > 1e-10 * top.max(1.0)).count()
}

fn identity(k: usize) -> Mat<f64> {
    Mat::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.0 })
}

impl LinearizationData {
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    fn shifted(&self, mu: f64) -> Mat<f64> {
        let mut m = self.fp.clone();
        for i in 0..self.dim() {
            m[(i, i)] += mu;
        }
        m
    }

    fn tol(&self) -> f64 {
        1e-9 * self.lambdas.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_eigenvalue(&self, mu: f64) -> bool {
        self.lambdas.iter().any(|l| (l - mu).abs() <= self.tol())
    }

    /// `(e_j, -λ_j/2 e_j)`, spanning `Ker(F_p + λ_j)` along axis `j`.
    pub fn kernel_vector(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        v[j] = 1.0;
        v[self.n + j] = -self.lambdas[j] / 2.0;
        v
    }

    /// Spectral projection onto the eigenspace of `-μ` (zero if `-μ` is not
    /// an eigenvalue).
    pub fn projector(&self, mu: f64) -> Mat<f64> {
        let d = self.dim();
        let mut p = Mat::<f64>::zeros(d, d);
        for (j, &l) in self.lambdas.iter().enumerate() {
            if (l - mu).abs() <= self.tol() {
                let v = self.kernel_vector(j);
                let mut w = vec![0.0; d];
                w[j] = 0.5;
                w[self.n + j] = -1.0 / l;
                for r in 0..d {
                    for c in 0..d {
                        p[(r, c)] += v[r] * w[c];
                    }
                }
            }
        }
        p
    }

    /// Inverse of `F_p + μ` on `Im(F_p + μ)`, extended by zero on the kernel.
    pub fn partial_inverse(&self, mu: f64) -> Mat<f64> {
        let p = self.projector(mu);
        let a = &self.shifted(mu) + &p;
        let rhs = &identity(self.dim()) - &p;
        a.partial_piv_lu().solve(&rhs)
    }

    /// `(F_p + μ)⁻¹ b` for `μ` outside the spectrum of `-F_p`.
    pub fn solve_shifted(&self, mu: f64, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.shifted(mu).partial_piv_lu().solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    pub fn apply(m: &Mat<f64>, v: &[f64]) -> Vec<f64> {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
    }

    /// Checks idempotency, the kernel/image splitting and the partial inverses.
    pub fn verify(&self) -> LinearizationReport {
        let d = self.dim();
        let mut idem: f64 = 0.0;
        let mut inv: f64 = 0.0;
        let mut ranks = true;
        for &l in &self.lambdas {
            let p = self.projector(l);
            idem = idem.max((&p * &p - &p).norm_max());
            let a = self.shifted(l);
            ranks &= rank(&p) + rank(&a) == d;
            let k = self.partial_inverse(l);
            let q = &identity(d) - &p;
            let scale = (a.norm_max() * k.norm_max()).max(1.0);
            inv = inv.max((&a * &k * &q - &q).norm_max() / scale);
        }
        LinearizationReport {
            max_idempotency_defect: idem,
            max_partial_inverse_defect: inv,
            ranks_complementary: ranks,
        }
    }
}

/// Linearization of `H_p` at the apex. The apex Hessian must be diagonal in
/// the given coordinates.
pub fn linearize(barrier: &BarrierData) -> Result<LinearizationData> {
    let lambdas = barrier
        .axis_lambdas
        .clone()
        .ok_or_else(|| Error::InvalidPotential("apex Hessian must be diagonal in the given coordinates".into()))?;
    let n = lambdas.len();
    let fp = Mat::from_fn(2 * n, 2 * n, |i, j| {
        if i < n && j == i + n {
            2.0
        } else if i >= n && j == i - n {
            lambdas[j] * lambdas[j] / 2.0
        } else {
            0.0
        }
    });
    let mut sorted = barrier.lambdas.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let spectrum = sorted.iter().rev().map(|l| -l).chain(sorted.iter().copied()).collect();
    let lin = LinearizationData { n, fp, lambdas, spectrum };
    let report = lin.verify();
    if report.max_idempotency_defect > 1e-12 || report.max_partial_inverse_defect > 1e-12 || !report.ranks_complementary {
        return Err(Error::IllConditioned(format!("linearization check failed: {report:?}")));
    }
    Ok(lin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{barrier_data, Potential};
    use proptest::prelude::*;

    #[test]
    fn one_dimensional_linearization() {
        let lin = linearize(&barrier_data(&Potential::sech2(1.0)).unwrap()).unwrap();
        assert_eq!(lin.fp[(0, 1)], 2.0);
        assert_eq!(lin.fp[(1, 0)], 2.0);
        assert_eq!(lin.kernel_vector(0), vec![1.0, -1.0]);
        let v = LinearizationData::apply(&lin.fp, &[1.0, -1.0]);
        assert_eq!(v, vec![-2.0, 2.0]);
        let p = lin.projector(2.0);
        assert!((LinearizationData::apply(&p, &[1.0, -1.0])[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn projectors_are_orthogonal_and_complementary() {
        let pot = Potential::quadratic(1.0, &[1.0, 2.0], vec![]);
        let lin = linearize(&barrier_data(&pot).unwrap()).unwrap();
        assert_eq!(lin.spectrum, vec![-2.0, -1.0, 1.0, 2.0]);
        let cross = &lin.projector(1.0) * &lin.projector(2.0);
        assert!(cross.norm_max() < 1e-12);
        let r = lin.verify();
        assert!(r.ranks_complementary);
        assert!(r.max_partial_inverse_defect < 1e-12);
        assert!(lin.projector(3.0).norm_max() == 0.0);
    }

    proptest! {
        #[test]
        fn splitting_holds_for_any_exponents(l1 in 0.2f64..4.0, l2 in 0.2f64..4.0, l3 in 0.2f64..4.0) {
            let pot = Potential::quadratic(1.0, &[l1, l2, l3], vec![]);
            let lin = linearize(&barrier_data(&pot).unwrap()).unwrap();
            let r = lin.verify();
            prop_assert!(r.ranks_complementary);
            prop_assert!(r.max_idempotency_defect <= 1e-12);
            prop_assert!(r.max_partial_inverse_defect <= 1e-12);
        }

        #[test]
        fn nearly_equal_exponents_linearize(l in 0.2f64..4.0, gap in 1e-8f64..1e-4) {
            let pot = Potential::quadratic(1.0, &[l, l + gap], vec![]);
            let lin = linearize(&barrier_data(&pot).unwrap()).unwrap();
            prop_assert!(lin.verify().max_partial_inverse_defect <= 1e-12);
        }
    }
}
