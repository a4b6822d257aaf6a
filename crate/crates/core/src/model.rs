//! Model potentials, barrier data at the apex and the Hamiltonian vector field
//! of `p(x, ξ) = ξ² + V(x)`.

use crate::numerics::series::PowerSeries;
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Sech2Barrier,
    GaussianBarrier,
    AnisotropicGaussian,
    QuadraticModel,
    UserTable,
}

/// `coeff · Π x_j^{exponents_j}`, used to perturb the quadratic model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

/// Config-level description of a potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub family: Family,
    pub params: Vec<f64>,
    #[serde(default = "one")]
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub perturbation: Vec<Monomial>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug)]
struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    /// Natural cubic spline through the samples.
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let a = h0;
                let b = 2.0 * (h0 + h1);
                let r = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
                let denom = b - a * c[i - 1];
                c[i] = h1 / denom;
                d[i] = (r - a * d[i - 1]) / denom;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        Self { x, y, m }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] || t >= self.x[n - 1] {
            return if t == self.x[0] {
                self.y[0]
            } else if t == self.x[n - 1] {
                self.y[n - 1]
            } else {
                0.0
            };
        }
        let i = self.x.partition_point(|&v| v <= t).saturating_sub(1).min(n - 2);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

#[derive(Clone, Debug)]
pub struct Potential {
    pub family: Family,
    pub params: Vec<f64>,
    pub dimension: usize,
    /// Decay rate ρ in `|V| ≲ ⟨x⟩^{-ρ}`; infinite for exponential decay or
    /// compact support, zero for the non-decaying quadratic model.
    pub decay_exponent: f64,
    pub perturbation: Vec<Monomial>,
    table: Option<Spline>,
}

/// Phase-space point `(x, ξ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Self {
        assert_eq!(x.len(), xi.len());
        Self { x, xi }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.x.iter().chain(&self.xi).copied().collect()
    }

    pub fn from_slice(u: &[f64]) -> Self {
        let n = u.len() / 2;
        Self::new(u[..n].to_vec(), u[n..].to_vec())
    }

    pub fn norm(&self) -> f64 {
        self.x.iter().chain(&self.xi).map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BarrierData {
    pub e0: f64,
    pub apex: Vec<f64>,
    /// Lyapunov exponents sorted ascending.
    pub lambdas: Vec<f64>,
    /// Exponent attached to each coordinate axis when the Hessian is diagonal.
    pub axis_lambdas: Option<Vec<f64>>,
    pub hessian: Vec<Vec<f64>>,
}

impl Potential {
    pub fn sech2(e0: f64) -> Self {
        Self::from_spec(&PotentialSpec {
            family: Family::Sech2Barrier,
            params: vec![e0],
            dimension: 1,
            perturbation: vec![],
        })
        .expect("valid sech2 parameters")
    }

    pub fn gaussian(e0: f64, width: f64, dimension: usize) -> Self {
        Self::from_spec(&PotentialSpec {
            family: Family::GaussianBarrier,
            params: vec![e0, width],
            dimension,
            perturbation: vec![],
        })
        .expect("valid gaussian parameters")
    }

    /// `E0 · exp(-Σ a_j x_j²)`.
    pub fn anisotropic_gaussian(e0: f64, a: &[f64]) -> Self {
        let mut params = vec![e0];
        params.extend_from_slice(a);
        Self::from_spec(&PotentialSpec {
            family: Family::AnisotropicGaussian,
            params,
            dimension: a.len(),
            perturbation: vec![],
        })
        .expect("valid anisotropic gaussian parameters")
    }

    /// `E0 - Σ λ_j² x_j² / 4 + Σ perturbation`.
    pub fn quadratic(e0: f64, lambdas: &[f64], perturbation: Vec<Monomial>) -> Self {
        let mut params = vec![e0];
        params.extend_from_slice(lambdas);
        Self::from_spec(&PotentialSpec {
            family: Family::QuadraticModel,
            params,
            dimension: lambdas.len(),
            perturbation,
        })
        .expect("valid quadratic parameters")
    }

    /// One-dimensional tabulated potential, interpolated by a natural cubic
    /// spline and extended by zero outside the table.
    pub fn user_table(xs: &[f64], vs: &[f64]) -> Result<Self> {
        let mut params = Vec::with_capacity(2 * xs.len());
        for (x, v) in xs.iter().zip(vs) {
            params.push(*x);
            params.push(*v);
        }
        Self::from_spec(&PotentialSpec {
            family: Family::UserTable,
            params,
            dimension: 1,
            perturbation: vec![],
        })
    }

    pub fn from_spec(spec: &PotentialSpec) -> Result<Self> {
        let n = spec.dimension;
        let p = &spec.params;
        let bad = |m: &str| Err(Error::InvalidPotential(m.to_string()));
        if n == 0 {
            return bad("dimension must be at least 1");
        }
        if p.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        let mut table = None;
        let decay = match spec.family {
            Family::Sech2Barrier => {
                if n != 1 || p.is_empty() || p.len() > 2 {
                    return bad("sech2_barrier takes params [E0] or [E0, width] in one dimension");
                }
                if p.len() == 2 && p[1] <= 0.0 {
                    return bad("width must be positive");
                }
                f64::INFINITY
            }
            Family::GaussianBarrier => {
                if p.len() != 2 || p[1] <= 0.0 {
                    return bad("gaussian_barrier takes params [E0, width > 0]");
                }
                f64::INFINITY
            }
            Family::AnisotropicGaussian => {
                if p.len() != n + 1 || p[1..].iter().any(|&a| a <= 0.0) {
                    return bad("anisotropic_gaussian takes params [E0, a_1 > 0, ..., a_n > 0]");
                }
                f64::INFINITY
            }
            Family::QuadraticModel => {
                if p.len() != n + 1 || p[1..].iter().any(|&l| l <= 0.0) {
                    return bad("quadratic_model takes params [E0, lambda_1 > 0, ..., lambda_n > 0]");
                }
                for m in &spec.perturbation {
                    if m.exponents.len() != n || m.exponents.iter().sum::<u32>() < 3 {
                        return bad("perturbation monomials must have n exponents and degree >= 3");
                    }
                }
                0.0
            }
            Family::UserTable => {
                if n != 1 || p.len() < 8 || p.len() % 2 != 0 {
                    return bad("user_table takes params [x0, V0, x1, V1, ...] with at least 4 samples");
                }
                let xs: Vec<f64> = p.iter().step_by(2).copied().collect();
                let vs: Vec<f64> = p.iter().skip(1).step_by(2).copied().collect();
                if xs.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("table abscissae must be strictly increasing");
                }
                table = Some(Spline::new(xs, vs));
                f64::INFINITY
            }
        };
        if spec.family != Family::QuadraticModel && !spec.perturbation.is_empty() {
            return bad("perturbation is only available for quadratic_model");
        }
        Ok(Self {
            family: spec.family,
            params: p.clone(),
            dimension: n,
            decay_exponent: decay,
            perturbation: spec.perturbation.clone(),
            table,
        })
    }

    pub fn spec(&self) -> PotentialSpec {
        PotentialSpec {
            family: self.family,
            params: self.params.clone(),
            dimension: self.dimension,
            perturbation: self.perturbation.clone(),
        }
    }

    pub fn is_short_range(&self) -> bool {
        self.decay_exponent > 1.0
    }

    fn sech_width(&self) -> f64 {
        self.params.get(1).copied().unwrap_or(1.0)
    }

    /// Half-angle of the sector around the real axis in which the potential
    /// is evaluated at complex arguments.
    pub fn sector_half_angle(&self) -> f64 {
        match self.family {
            Family::Sech2Barrier => FRAC_PI_4 - 0.05,
            Family::GaussianBarrier | Family::AnisotropicGaussian | Family::QuadraticModel => f64::INFINITY,
            Family::UserTable => 0.0,
        }
    }

    fn table_length_scale(&self) -> f64 {
        let t = self.table.as_ref().expect("table family");
        0.5 * (t.x[t.x.len() - 1] - t.x[0])
    }

    fn gaussian_rates(&self) -> Vec<f64> {
        match self.family {
            Family::GaussianBarrier => vec![1.0 / (self.params[1] * self.params[1]); self.dimension],
            Family::AnisotropicGaussian => self.params[1..].to_vec(),
            _ => unreachable!(),
        }
    }

    fn perturbation_value<T>(&self, x: &[T]) -> T
    where
        T: Copy + std::ops::Mul<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + From<f64>,
    {
        let mut acc = T::from(0.0);
        for m in &self.perturbation {
            let mut term = T::from(m.coeff);
            for (xj, &k) in x.iter().zip(&m.exponents) {
                for _ in 0..k {
                    term = term * *xj;
                }
            }
            acc = acc + term;
        }
        acc
    }

    /// V at a complex point; real input takes a purely real code path.
    pub fn eval(&self, x: &[C64]) -> Result<C64> {
        assert_eq!(x.len(), self.dimension, "dimension mismatch");
        if x.iter().all(|z| z.im == 0.0) {
            let xr: Vec<f64> = x.iter().map(|z| z.re).collect();
            return Ok(C64::new(self.eval_real(&xr), 0.0));
        }
        let e0 = self.params[0];
        match self.family {
            Family::Sech2Barrier => {
                let w = self.sech_width();
                let u = x[0] / w;
                let k = ((u.im.abs() - FRAC_PI_2) / PI).round().max(0.0);
                let pole = C64::new(0.0, u.im.signum() * (FRAC_PI_2 + k * PI));
                if ((u - pole) * w).norm() < 1e-6 {
                    return Err(Error::PoleProximity {
                        re: x[0].re,
                        im: x[0].im,
                    });
                }
                self.check_sector(x)?;
                let v = if u.re >= 0.0 { u } else { -u };
                let e = (-2.0 * v).exp();
                Ok(e0 * 4.0 * e / ((1.0 + e) * (1.0 + e)))
            }
            Family::GaussianBarrier | Family::AnisotropicGaussian => {
                self.check_sector(x)?;
                let a = self.gaussian_rates();
                let q: C64 = x.iter().zip(&a).map(|(z, a)| z * z * *a).sum();
                Ok(e0 * (-q).exp())
            }
            Family::QuadraticModel => {
                let quad: C64 = x
                    .iter()
                    .zip(&self.params[1..])
                    .map(|(z, l)| z * z * (l * l / 4.0))
                    .sum();
                Ok(C64::new(e0, 0.0) - quad + self.perturbation_value(x))
            }
            Family::UserTable => Err(Error::SectorViolation {
                re: x[0].re,
                im: x[0].im,
            }),
        }
    }

    fn check_sector(&self, x: &[C64]) -> Result<()> {
        let delta = self.sector_half_angle();
        let re_norm = x.iter().map(|z| z.re * z.re).sum::<f64>();
        let im_norm = x.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
        if delta.is_finite() && im_norm > delta.tan() * (1.0 + re_norm).sqrt() {
            return Err(Error::SectorViolation {
                re: x[0].re,
                im: x[0].im,
            });
        }
        Ok(())
    }

    pub fn eval1(&self, z: C64) -> Result<C64> {
        self.eval(&[z])
    }

    pub fn eval_real(&self, x: &[f64]) -> f64 {
        let e0 = self.params[0];
        match self.family {
            Family::Sech2Barrier => {
                let t = (-2.0 * (x[0] / self.sech_width()).abs()).exp();
                e0 * 4.0 * t / ((1.0 + t) * (1.0 + t))
            }
            Family::GaussianBarrier | Family::AnisotropicGaussian => {
                let a = self.gaussian_rates();
                let q: f64 = x.iter().zip(&a).map(|(v, a)| a * v * v).sum();
                e0 * (-q).exp()
            }
            Family::QuadraticModel => {
                let quad: f64 = x.iter().zip(&self.params[1..]).map(|(v, l)| l * l * v * v / 4.0).sum();
                e0 - quad + self.perturbation_value(x)
            }
            Family::UserTable => self.table.as_ref().expect("table").eval(x[0]),
        }
    }

    /// `E0 - V(x)` evaluated without cancellation near the apex.
    pub fn depth(&self, e0: f64, x: &[f64]) -> f64 {
        let p0 = self.params[0];
        match self.family {
            Family::Sech2Barrier => {
                let th = (x[0] / self.sech_width()).tanh();
                (e0 - p0) + p0 * th * th
            }
            Family::GaussianBarrier | Family::AnisotropicGaussian => {
                let a = self.gaussian_rates();
                let q: f64 = x.iter().zip(&a).map(|(v, a)| a * v * v).sum();
                (e0 - p0) - p0 * (-q).exp_m1()
            }
            Family::QuadraticModel => {
                let quad: f64 = x.iter().zip(&self.params[1..]).map(|(v, l)| l * l * v * v / 4.0).sum();
                (e0 - p0) + quad - self.perturbation_value(x)
            }
            Family::UserTable => e0 - self.eval_real(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dimension;
        let e0 = self.params[0];
        match self.family {
            Family::Sech2Barrier => {
                let w = self.sech_width();
                let u = x[0] / w;
                let (th, s2) = (u.tanh(), sech2(u));
                vec![-2.0 * e0 / w * s2 * th]
            }
            Family::GaussianBarrier | Family::AnisotropicGaussian => {
                let a = self.gaussian_rates();
                let v = self.eval_real(x);
                (0..n).map(|j| -2.0 * a[j] * x[j] * v).collect()
            }
            Family::QuadraticModel => (0..n)
                .map(|j| {
                    let l = self.params[1 + j];
                    -l * l * x[j] / 2.0 + self.perturbation_derivative(x, &[j])
                })
                .collect(),
            Family::UserTable => {
                let eta = 1e-4 * self.table_length_scale();
                let f = |t: f64| self.eval_real(&[t]);
                let t = x[0];
                vec![(-f(t + 2.0 * eta) + 8.0 * f(t + eta) - 8.0 * f(t - eta) + f(t - 2.0 * eta)) / (12.0 * eta)]
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dimension;
        let e0 = self.params[0];
        match self.family {
            Family::Sech2Barrier => {
                let w = self.sech_width();
                let u = x[0] / w;
                let (th, s2) = (u.tanh(), sech2(u));
                vec![vec![e0 / (w * w) * s2 * (6.0 * th * th - 2.0)]]
            }
            Family::GaussianBarrier | Family::AnisotropicGaussian => {
                let a = self.gaussian_rates();
                let v = self.eval_real(x);
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| {
                                let d = if j == k { 2.0 * a[j] } else { 0.0 };
                                (4.0 * a[j] * a[k] * x[j] * x[k] - d) * v
                            })
                            .collect()
                    })
                    .collect()
            }
            Family::QuadraticModel => (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| {
                            let l = self.params[1 + j];
                            let d = if j == k { -l * l / 2.0 } else { 0.0 };
                            d + self.perturbation_derivative(x, &[j, k])
                        })
                        .collect()
                })
                .collect(),
            Family::UserTable => {
                let eta = 1e-4 * self.table_length_scale();
                let f = |t: f64| self.eval_real(&[t]);
                let t = x[0];
                let d2 = (-f(t + 2.0 * eta) + 16.0 * f(t + eta) - 30.0 * f(t) + 16.0 * f(t - eta)
                    - f(t - 2.0 * eta))
                    / (12.0 * eta * eta);
                vec![vec![d2]]
            }
        }
    }

    fn perturbation_derivative(&self, x: &[f64], axes: &[usize]) -> f64 {
        let mut acc = 0.0;
        for m in &self.perturbation {
            let mut e: Vec<i64> = m.exponents.iter().map(|&k| k as i64).collect();
            let mut c = m.coeff;
            for &j in axes {
                c *= e[j] as f64;
                e[j] -= 1;
            }
            if c == 0.0 {
                continue;
            }
            acc += c * x.iter().zip(&e).map(|(v, &k)| v.powi(k as i32)).product::<f64>();
        }
        acc
    }

    /// Taylor expansion of V about `center` up to total degree `degree`.
    pub fn taylor_series(&self, center: &[f64], degree: u32) -> Result<PowerSeries> {
        let n = self.dimension;
        let e0 = self.params[0];
        let shifted = |j: usize| {
            PowerSeries::variable(n, degree, j).add(&PowerSeries::constant(n, degree, center[j]))
        };
        match self.family {
            Family::Sech2Barrier => {
                let w = self.sech_width();
                let c = center[0] / w;
                // cosh(c + y) = cosh c · cosh y + sinh c · sinh y
                let y = PowerSeries::variable(1, degree, 0).scale(1.0 / w);
                let mut ch = vec![0.0; degree as usize + 1];
                let mut fact = 1.0;
                for (k, v) in ch.iter_mut().enumerate() {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    *v = if k % 2 == 0 { c.cosh() } else { c.sinh() } / fact;
                }
                let s = y.compose(&ch).recip();
                Ok(s.mul(&s).scale(e0))
            }
            Family::GaussianBarrier | Family::AnisotropicGaussian => {
                let a = self.gaussian_rates();
                let mut q = PowerSeries::zero(n, degree);
                for (j, aj) in a.iter().enumerate() {
                    let xj = shifted(j);
                    q = q.add(&xj.mul(&xj).scale(*aj));
                }
                Ok(q.scale(-1.0).exp().scale(e0))
            }
            Family::QuadraticModel => {
                let mut v = PowerSeries::constant(n, degree, e0);
                for j in 0..n {
                    let l = self.params[1 + j];
                    let xj = shifted(j);
                    v = v.add(&xj.mul(&xj).scale(-l * l / 4.0));
                }
                for m in &self.perturbation {
                    let mut term = PowerSeries::constant(n, degree, m.coeff);
                    for (j, &k) in m.exponents.iter().enumerate() {
                        for _ in 0..k {
                            term = term.mul(&shifted(j));
                        }
                    }
                    v = v.add(&term);
                }
                Ok(v)
            }
            Family::UserTable => {
                if degree > 2 {
                    return Err(Error::InvalidPotential(
                        "tabulated potentials provide Taylor data up to degree 2".into(),
                    ));
                }
                let mut s = PowerSeries::constant(1, degree, self.eval_real(center));
                s.add_term(vec![1], self.gradient(center)[0]);
                s.add_term(vec![2], self.hessian(center)[0][0] / 2.0);
                Ok(s)
            }
        }
    }
}

fn sech2(u: f64) -> f64 {
    let t = (-2.0 * u.abs()).exp();
    4.0 * t / ((1.0 + t) * (1.0 + t))
}

pub fn eval_potential(pot: &Potential, x: &[C64]) -> Result<C64> {
    pot.eval(x)
}

pub fn hamiltonian_field(pot: &Potential, p: &PhasePoint) -> Vec<f64> {
    let g = pot.gradient(&p.x);
    p.xi.iter().map(|v| 2.0 * v).chain(g.iter().map(|v| -v)).collect()
}

/// Locates the apex and reads off E0 and the Lyapunov exponents.
pub fn barrier_data(pot: &Potential) -> Result<BarrierData> {
    let n = pot.dimension;
    let apex = match pot.family {
        Family::UserTable => {
            let t = pot.table.as_ref().expect("table");
            let (i, _) = t
                .y
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty table");
            let mut x = t.x[i];
            for _ in 0..50 {
                let g = pot.gradient(&[x])[0];
                let h = pot.hessian(&[x])[0][0];
                if h >= 0.0 {
                    break;
                }
                let dx = g / h;
                x -= dx;
                if dx.abs() < 1e-13 {
                    break;
                }
            }
            vec![x]
        }
        _ => vec![0.0; n],
    };
    let e0 = pot.eval_real(&apex);
    let hessian = pot.hessian(&apex);
    let hm = faer::Mat::from_fn(n, n, |i, j| hessian[i][j]);
    let eig = hm
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    if let Some(&worst) = eig.iter().max_by(|a, b| a.total_cmp(b)) {
        if worst >= -1e-10 {
            return Err(Error::DegenerateMaximum(worst));
        }
    }
    let mut lambdas: Vec<f64> = eig.iter().map(|&e| (-2.0 * e).sqrt()).collect();
    lambdas.sort_by(|a, b| a.total_cmp(b));
    let scale = lambdas.iter().fold(0.0f64, |m, l| m.max(l * l));
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || hessian[i][j].abs() <= 1e-12 * scale));
    let axis_lambdas = diagonal.then(|| (0..n).map(|j| (-2.0 * hessian[j][j]).sqrt()).collect());
    Ok(BarrierData {
        e0,
        apex,
        lambdas,
        axis_lambdas,
        hessian,
    })
}

/// Homogeneous degree-`degree` part of the nonlinear Hamiltonian field at the
/// apex. Only the momentum components are nonzero; they are stored as
/// polynomials in the position variables relative to the apex.
#[derive(Clone, Debug)]
pub struct HomogeneousField {
    pub degree: u32,
    pub xi_components: Vec<PowerSeries>,
}

/// `G_2, ..., G_K`: the homogeneous parts of `H_p` beyond the linear part.
pub fn taylor_field(pot: &Potential, order: u32) -> Result<Vec<HomogeneousField>> {
    if order < 2 {
        return Err(Error::InvalidPotential("Taylor field order must be at least 2".into()));
    }
    let apex = barrier_data(pot)?.apex;
    let series = pot.taylor_series(&apex, order + 1)?;
    let grads: Vec<PowerSeries> = (0..pot.dimension).map(|j| series.derivative(j)).collect();
    Ok((2..=order)
        .map(|k| HomogeneousField {
            degree: k,
            xi_components: grads.iter().map(|g| g.homogeneous(k).scale(-1.0)).collect(),
        })
        .collect())
}
