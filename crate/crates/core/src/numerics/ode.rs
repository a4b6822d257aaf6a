//! Adaptive Dormand–Prince 5(4) integration with dense landing on output times.

use crate::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Clone, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on |step|; `f64::INFINITY` leaves it free.
    pub max_step: f64,
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            max_steps: 2_000_000,
            max_step: f64::INFINITY,
        }
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    /// Integrates `y' = f(t, y)` from `(t0, y0)` and returns the state at each
    /// entry of `t_out`, which must be monotone in the direction of travel.
    pub fn integrate<F>(&self, mut f: F, t0: f64, y0: &[f64], t_out: &[f64]) -> Result<Vec<Vec<f64>>>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let dim = y0.len();
        let mut out = Vec::with_capacity(t_out.len());
        if t_out.is_empty() {
            return Ok(out);
        }
        let dir = if t_out[t_out.len() - 1] >= t0 { 1.0 } else { -1.0 };
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k = vec![vec![0.0; dim]; 7];
        let mut ytmp = vec![0.0; dim];
        let mut ynew = vec![0.0; dim];
        f(t, &y, &mut k[0]);

        let span = (t_out[t_out.len() - 1] - t0).abs();
        let mut step = initial_step(&k[0], &y, self.rtol, self.atol, span).min(self.max_step);
        let mut steps = 0usize;

        for &target in t_out {
            if (target - t) * dir < 0.0 {
                return Err(Error::NoConvergence("output times are not monotone".into()));
            }
            while (target - t) * dir > 0.0 {
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::StepFailure(t));
                }
                let remaining = (target - t).abs();
                let landing = step >= remaining;
                let hs = if landing { remaining } else { step };
                if hs <= 1e-14 * t.abs().max(1.0) && !landing {
                    return Err(Error::StepFailure(t));
                }
                let hsd = hs * dir;
                for s in 1..7 {
                    for i in 0..dim {
                        let mut acc = y[i];
                        for (j, kj) in k.iter().enumerate().take(s) {
                            acc += hsd * A[s][j] * kj[i];
                        }
                        ytmp[i] = acc;
                    }
                    f(t + C[s] * hsd, &ytmp, &mut k[s]);
                }
                let mut err = 0.0;
                for i in 0..dim {
                    let mut y5 = y[i];
                    let mut y4 = y[i];
                    for s in 0..7 {
                        y5 += hsd * B5[s] * k[s][i];
                        y4 += hsd * B4[s] * k[s][i];
                    }
                    ynew[i] = y5;
                    let sc = self.atol + self.rtol * y[i].abs().max(y5.abs());
                    let e = (y5 - y4) / sc;
                    err += e * e;
                }
                err = (err / dim.max(1) as f64).sqrt();
                if !err.is_finite() {
                    step = hs * 0.2;
                    continue;
                }
                if err <= 1.0 {
                    t = if landing { target } else { t + hsd };
                    y.copy_from_slice(&ynew);
                    // FSAL: the last stage was evaluated at the accepted point.
                    let last = k[6].clone();
                    k[0].copy_from_slice(&last);
                    let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if !landing || hs >= step {
                        step = (hs * grow).min(self.max_step);
                    }
                } else {
                    step = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                }
            }
            out.push(y.clone());
        }
        Ok(out)
    }
}

fn initial_step(f0: &[f64], y0: &[f64], rtol: f64, atol: f64, span: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, fi) in y0.iter().zip(f0) {
        let sc = atol + rtol * yi.abs();
        d0 += (yi / sc).powi(2);
        d1 += (fi / sc).powi(2);
    }
    let n = y0.len().max(1) as f64;
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span.max(1e-12)).max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_phase() {
        let solver = Dopri5::new(1e-12, 1e-12);
        let ts: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let out = solver
            .integrate(|_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            }, 0.0, &[1.0, 0.0], &ts)
            .unwrap();
        for (t, y) in ts.iter().zip(&out) {
            assert!((y[0] - t.cos()).abs() < 1e-10, "t={t}");
            assert!((y[1] + t.sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn backward_integration() {
        let solver = Dopri5::new(1e-12, 1e-14);
        let out = solver
            .integrate(|_, y, dy| dy[0] = 2.0 * y[0], 0.0, &[1.0], &[-1.0, -3.0])
            .unwrap();
        assert!((out[0][0] - (-2.0f64).exp()).abs() < 1e-12);
        assert!((out[1][0] - (-6.0f64).exp()).abs() < 1e-13);
    }
}
