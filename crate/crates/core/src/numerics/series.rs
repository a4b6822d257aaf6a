//! Truncated multivariate power series with real coefficients.

use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
pub struct PowerSeries {
    pub nvars: usize,
    pub max_degree: u32,
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl PowerSeries {
    pub fn zero(nvars: usize, max_degree: u32) -> Self {
        Self {
            nvars,
            max_degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, max_degree: u32, c: f64) -> Self {
        let mut s = Self::zero(nvars, max_degree);
        s.add_term(vec![0; nvars], c);
        s
    }

    pub fn variable(nvars: usize, max_degree: u32, j: usize) -> Self {
        let mut s = Self::zero(nvars, max_degree);
        let mut e = vec![0; nvars];
        e[j] = 1;
        s.add_term(e, 1.0);
        s
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        if exps.iter().sum::<u32>() > self.max_degree || c == 0.0 {
            return;
        }
        let entry = self.terms.entry(exps).or_insert(0.0);
        *entry += c;
    }

    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&vec![0; self.nvars])
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut s = self.clone();
        for (e, c) in &o.terms {
            s.add_term(e.clone(), *c);
        }
        s
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut s = self.clone();
        for c in s.terms.values_mut() {
            *c *= k;
        }
        s
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut s = Self::zero(self.nvars, self.max_degree.min(o.max_degree));
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                s.add_term(e, ca * cb);
            }
        }
        s
    }

    /// `Σ_k a_k s^k` for a series `s` without constant term.
    pub fn compose(&self, coeffs: &[f64]) -> Self {
        let mut out = Self::constant(self.nvars, self.max_degree, coeffs.first().copied().unwrap_or(0.0));
        let mut power = Self::constant(self.nvars, self.max_degree, 1.0);
        for &a in coeffs.iter().skip(1) {
            power = power.mul(self);
            if power.terms.is_empty() {
                break;
            }
            out = out.add(&power.scale(a));
        }
        out
    }

    pub fn exp(&self) -> Self {
        let c0 = self.constant_term();
        let mut rest = self.clone();
        rest.terms.remove(&vec![0; self.nvars]);
        let mut coeffs = vec![1.0];
        let mut f = 1.0;
        for k in 1..=self.max_degree as usize {
            f /= k as f64;
            coeffs.push(f);
        }
        rest.compose(&coeffs).scale(c0.exp())
    }

    pub fn recip(&self) -> Self {
        let c0 = self.constant_term();
        assert!(c0 != 0.0, "reciprocal of a series with zero constant term");
        let mut rest = self.scale(1.0 / c0);
        rest.terms.remove(&vec![0; self.nvars]);
        let coeffs: Vec<f64> = (0..=self.max_degree).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        rest.compose(&coeffs).scale(1.0 / c0)
    }

    pub fn derivative(&self, j: usize) -> Self {
        let mut s = Self::zero(self.nvars, self.max_degree.saturating_sub(1));
        for (e, c) in &self.terms {
            if e[j] > 0 {
                let mut d = e.clone();
                d[j] -= 1;
                s.add_term(d, c * e[j] as f64);
            }
        }
        s
    }

    pub fn homogeneous(&self, degree: u32) -> Self {
        let mut s = Self::zero(self.nvars, self.max_degree);
        for (e, c) in &self.terms {
            if e.iter().sum::<u32>() == degree {
                s.add_term(e.clone(), *c);
            }
        }
        s
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, xi)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sech_squared_coefficients() {
        let x = PowerSeries::variable(1, 8, 0);
        let cosh: Vec<f64> = (0..=8)
            .map(|k| if k % 2 == 0 { 1.0 / (1..=k).map(|i| i as f64).product::<f64>() } else { 0.0 })
            .collect();
        let sech = x.compose(&cosh).recip();
        let s2 = sech.mul(&sech);
        let expect = [1.0, 0.0, -1.0, 0.0, 2.0 / 3.0, 0.0, -17.0 / 45.0, 0.0, 62.0 / 315.0];
        for (k, e) in expect.iter().enumerate() {
            assert!((s2.coeff(&[k as u32]) - e).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn exp_of_sum_factorises() {
        let x = PowerSeries::variable(2, 6, 0);
        let y = PowerSeries::variable(2, 6, 1);
        let lhs = x.add(&y).exp();
        let rhs = x.exp().mul(&y.exp());
        for (e, c) in &lhs.terms {
            assert!((c - rhs.coeff(e)).abs() < 1e-14);
        }
    }
}
