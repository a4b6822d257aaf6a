use super::SelfAdjointOperator;
use crate::numerics::smooth::BumpSpec;
use crate::{Error, Result, C64};
use faer::{Mat, Side};

/// Eigendecomposition of a real symmetric discretization, `A = V diag(λ) Vᵀ`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl SpectralDecomposition {
    pub fn new(op: &SelfAdjointOperator) -> Result<Self> {
        Self::from_matrix(&op.matrix)
    }

    pub fn from_matrix(m: &Mat<f64>) -> Result<Self> {
        let e = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))?;
        let values = (0..m.nrows()).map(|i| e.S()[i]).collect();
        Ok(Self {
            values,
            vectors: e.U().to_owned(),
        })
    }

    /// `f(A) v`.
    pub fn apply<F: Fn(f64) -> C64>(&self, f: F, v: &[C64]) -> Vec<C64> {
        let n = self.values.len();
        let u = &self.vectors;
        let coef: Vec<C64> = (0..n)
            .map(|k| {
                let c: C64 = (0..n).map(|i| v[i] * u[(i, k)]).sum();
                c * f(self.values[k])
            })
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (k, c) in coef.iter().enumerate() {
            if *c == C64::new(0.0, 0.0) {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += c * u[(i, k)];
            }
        }
        out
    }

    /// `f(A)` as a dense matrix.
    pub fn matrix<F: Fn(f64) -> f64>(&self, f: F) -> Mat<f64> {
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let scaled = Mat::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, k| self.vectors[(i, k)] * fv[k]);
        &scaled * self.vectors.transpose()
    }
}

/// `ψ(P)` for a smooth bump `ψ`.
pub fn functional_calculus(decomp: &SpectralDecomposition, psi: &BumpSpec) -> Mat<f64> {
    decomp.matrix(|l| psi.eval(l))
}
