use super::{FormalCurve, LinearizationData};
use crate::geometry::{fit_expansion, flow, Direction, Trajectory};
use crate::lattice::mu_sequence;
use crate::model::{hamiltonian_field, PhasePoint, Potential};
use crate::numerics::{halton, quad};
use crate::{Error, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug)]
pub struct PicardOptions {
    /// Length of the output window `[T_N, T_N + span]`.
    pub span: f64,
    pub max_iter: usize,
    /// Stop once `sup e^{Nt}|r_{j+1} - r_j|` falls below this.
    pub tol: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { span: 10.0, max_iter: 60, tol: 1e-12 }
    }
}

/// `γ = ρ_N + r` on `[T_N, T_N + span]`, sampled on a uniform grid.
#[derive(Clone, Debug, Serialize)]
pub struct RefinedCurve {
    pub truncation: f64,
    pub t_n: f64,
    pub lipschitz: f64,
    pub apex: Vec<f64>,
    pub times: Vec<f64>,
    /// `ρ_N(t)` relative to the apex.
    pub formal: Vec<Vec<f64>>,
    pub correction: Vec<Vec<f64>>,
    /// `sup e^{Nt}|r_{j+1} - r_j|` per iteration.
    pub history: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `sup e^{Nt}|r|`.
    pub weighted_correction: f64,
    /// `sup e^{λ_max t}|r|`, small when `r = o(e^{-λ t})`.
    pub decay_ratio: f64,
    pub tail_bound: f64,
    /// `sup |∂_t γ - H_p(γ)|` with the derivative taken by finite differences.
    pub flow_residual: f64,
    /// Largest gap, relative to the distance from the apex, to an independent
    /// integration of `H_p` run backward from the end of the window.
    pub flow_deviation: f64,
    /// The Picard tolerance expressed in the same relative units,
    /// `10·tol·e^{-N T_N} / |γ(T_N)|`, floored at the integrator's 1e-11.
    pub flow_tolerance: f64,
}

impl RefinedCurve {
    /// Absolute phase-space position at sample `i`.
    pub fn point(&self, i: usize) -> PhasePoint {
        let n = self.apex.len();
        let mut v: Vec<f64> = self.formal[i].iter().zip(&self.correction[i]).map(|(a, b)| a + b).collect();
        v.iter_mut().take(n).zip(&self.apex).for_each(|(x, a)| *x += a);
        PhasePoint::from_slice(&v)
    }

    pub fn to_csv(&self) -> String {
        let n = self.apex.len();
        let mut s = String::from("t");
        for j in 0..n {
            s.push_str(&format!(",x{j}"));
        }
        for j in 0..n {
            s.push_str(&format!(",xi{j}"));
        }
        s.push_str(",correction_norm\n");
        for i in 0..self.times.len() {
            let p = self.point(i).to_vec();
            s.push_str(&format!("{:.10e}", self.times[i]));
            for v in p {
                s.push_str(&format!(",{v:.16e}"));
            }
            s.push_str(&format!(",{:.3e}\n", sup(&self.correction[i])));
        }
        s
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn spectral_norm_sym(h: &[Vec<f64>]) -> f64 {
    let n = h.len();
    let m = faer::Mat::from_fn(n, n, |i, j| h[i][j]);
    m.self_adjoint_eigenvalues(faer::Side::Lower)
        .map(|e| e.iter().fold(0.0f64, |a, v| a.max(v.abs())))
        .unwrap_or(f64::INFINITY)
}

/// `sup_{|u| ≤ 2} ‖dH_p(u)‖`, sampled on the ball around the apex.
pub fn lipschitz_bound(pot: &Potential, apex: &[f64]) -> f64 {
    let n = apex.len();
    let mut best: f64 = 2.0;
    let samples = if n == 1 { 801 } else { 4000 };
    for k in 0..samples {
        let x: Vec<f64> = if n == 1 {
            vec![apex[0] - 2.0 + 4.0 * k as f64 / (samples - 1) as f64]
        } else {
            const PRIMES: [usize; 6] = [2, 3, 5, 7, 11, 13];
            let u: Vec<f64> = (0..n).map(|j| 2.0 * halton(k + 1, PRIMES[j % 6]) - 1.0).collect();
            let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r > 1.0 {
                continue;
            }
            u.iter().zip(apex).map(|(v, a)| a + 2.0 * v).collect()
        };
        best = best.max(spectral_norm_sym(&pot.hessian(&x)));
    }
    best
}

/// `ρ' - H_p(ρ)`, taken from the symbolic series where its truncation error
/// is below the cancellation error of the direct difference.
fn residual(formal: &FormalCurve, pot: &Potential, t: f64) -> Vec<f64> {
    let n = formal.apex.len();
    let rho = formal.eval(t);
    let d = formal.derivative(t);
    let mut p = rho.clone();
    p.iter_mut().take(n).zip(&formal.apex).for_each(|(x, a)| *x += a);
    let h = hamiltonian_field(pot, &PhasePoint::from_slice(&p));
    let (sym, last) = formal.residual(t);
    let cancel = 1e-15 * (sup(&d) + sup(&h));
    if 10.0 * last < cancel {
        sym
    } else {
        d.iter().zip(&h).map(|(a, b)| a - b).collect()
    }
}

/// `H_p(ρ + r) - H_p(ρ)` written as `∫ dH_p(ρ + s r) r ds` so that it keeps
/// full relative accuracy when `r` is tiny.
fn field_increment(pot: &Potential, x: &[f64], r: &[f64], gl: &(Vec<f64>, Vec<f64>)) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; 2 * n];
    for j in 0..n {
        out[j] = 2.0 * r[n + j];
    }
    let (nodes, weights) = gl;
    for (s, w) in nodes.iter().zip(weights) {
        let s = 0.5 * (s + 1.0);
        let y: Vec<f64> = (0..n).map(|j| x[j] + s * r[j]).collect();
        let hess = pot.hessian(&y);
        for i in 0..n {
            let hv: f64 = (0..n).map(|j| hess[i][j] * r[j]).sum();
            out[n + i] -= 0.5 * w * hv;
        }
    }
    out
}

/// `I_i = ∫_{t_i}^{t_M} f` with six-point panel rules on a uniform grid.
fn integrate_backward(f: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    const FIRST: [f64; 6] = [475.0, 1427.0, -798.0, 482.0, -173.0, 27.0];
    const SECOND: [f64; 6] = [-27.0, 637.0, 1022.0, -258.0, 77.0, -11.0];
    const INNER: [f64; 6] = [11.0, -93.0, 802.0, 802.0, -93.0, 11.0];
    let m = f.len() - 1;
    let dim = f[0].len();
    let mut out = vec![vec![0.0; dim]; m + 1];
    for i in (0..m).rev() {
        // panel [t_i, t_{i+1}] from six neighbouring samples, mirrored at the ends
        let (w, base, rev): (&[f64; 6], usize, bool) = match i {
            0 => (&FIRST, 0, false),
            1 => (&SECOND, 0, false),
            _ if i == m - 1 => (&FIRST, m - 5, true),
            _ if i == m - 2 => (&SECOND, m - 5, true),
            _ => (&INNER, i - 2, false),
        };
        for c in 0..dim {
            let panel: f64 = (0..6)
                .map(|k| {
                    let wk = if rev { w[5 - k] } else { w[k] };
                    wk * f[base + k][c]
                })
                .sum();
            out[i][c] = out[i + 1][c] + dt / 1440.0 * panel;
        }
    }
    out
}

/// Refines the formal curve into a true trajectory by the fixed-point
/// iteration `r_{j+1}(t) = -∫_t^∞ (H_p(ρ + r_j) - H_p(ρ) - R) ds`.
pub fn picard_refine(formal: &FormalCurve, pot: &Potential, opts: &PicardOptions) -> Result<RefinedCurve> {
    let n_trunc = formal.truncation;
    let apex = &formal.apex;
    let nvar = apex.len();
    let c1 = lipschitz_bound(pot, apex);
    let lmax = formal.lambdas.iter().cloned().fold(0.0, f64::max);
    let need = (c1 + 1.0).max(2.0 * c1).max(lmax + 0.5);
    if n_trunc < need {
        return Err(Error::TruncationTooLow(format!(
            "N={n_trunc} is below max(C1+1, 2C1, λ+1/2)={need:.3} with C1={c1:.3}"
        )));
    }
    let reach = opts.span + 30.0 / n_trunc;
    // T_N: |R| ≤ e^{-Nt} and |ρ| ≤ 1 from here on
    let scan_dt = 0.05;
    let ok = |t: f64| {
        let rho = formal.eval(t);
        let r = residual(formal, pot, t);
        sup(&r) * (n_trunc * t).exp() <= 1.0 && rho.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1.0
    };
    let mut t_n = None;
    let mut t = -10.0;
    while t < 40.0 {
        let steps = (reach / scan_dt).ceil() as usize;
        if (0..=steps).all(|k| ok(t + k as f64 * scan_dt)) {
            t_n = Some(t);
            break;
        }
        t += scan_dt;
    }
    let t_n = t_n.ok_or_else(|| Error::NoConvergence("no admissible starting time T_N".into()))?;

    let dt = 0.02 / n_trunc;
    let m = (reach / dt).ceil() as usize;
    let times: Vec<f64> = (0..=m).map(|i| t_n + i as f64 * dt).collect();
    let window = times.iter().take_while(|&&s| s <= t_n + opts.span + 1e-12).count();
    let rho: Vec<Vec<f64>> = times.iter().map(|&s| formal.eval(s)).collect();
    let res: Vec<Vec<f64>> = times.iter().map(|&s| residual(formal, pot, s)).collect();
    let abs_x: Vec<Vec<f64>> = rho.iter().map(|r| (0..nvar).map(|j| apex[j] + r[j]).collect()).collect();
    let weight: Vec<f64> = times.iter().map(|s| (n_trunc * s).exp()).collect();
    let gl = quad::gauss_legendre(8);

    let dim = 2 * nvar;
    let mut r = vec![vec![0.0; dim]; m + 1];
    let mut history = Vec::new();
    let mut ratios = Vec::new();
    let mut converged = false;
    let mut tail_bound = 0.0;
    for j in 0..opts.max_iter {
        let f: Vec<Vec<f64>> = (0..=m)
            .map(|i| {
                let d = field_increment(pot, &abs_x[i], &r[i], &gl);
                d.iter().zip(&res[i]).map(|(a, b)| a - b).collect()
            })
            .collect();
        let integral = integrate_backward(&f, dt);
        let next: Vec<Vec<f64>> = integral.iter().map(|v| v.iter().map(|x| -x).collect()).collect();
        let diff = (0..window)
            .map(|i| weight[i] * sup(&next[i].iter().zip(&r[i]).map(|(a, b)| a - b).collect::<Vec<_>>()))
            .fold(0.0, f64::max);
        // the integrand decays at least like e^{-Ns} beyond the grid
        tail_bound = weight[window - 1] * sup(&f[m]) / n_trunc;
        r = next;
        if let Some(&prev) = history.last() {
            let ratio = diff / prev;
            ratios.push(ratio);
            if ratio > 0.5 && diff > opts.tol {
                return Err(Error::ContractionViolated(ratio, j));
            }
        }
        history.push(diff);
        if diff <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "Picard iteration stalled at {:.3e}",
            history.last().copied().unwrap_or(f64::NAN)
        )));
    }
    if tail_bound > opts.tol {
        return Err(Error::TailTruncationError(tail_bound));
    }

    let gamma: Vec<Vec<f64>> = (0..=m)
        .map(|i| {
            let mut v: Vec<f64> = rho[i].iter().zip(&r[i]).map(|(a, b)| a + b).collect();
            v.iter_mut().take(nvar).zip(apex).for_each(|(x, a)| *x += a);
            v
        })
        .collect();
    // sixth-order central differences against the field
    let mut flow_residual: f64 = 0.0;
    for i in 3..window.min(m - 2) {
        let h = hamiltonian_field(pot, &PhasePoint::from_slice(&gamma[i]));
        for c in 0..dim {
            let d = (-gamma[i - 3][c] + 9.0 * gamma[i - 2][c] - 45.0 * gamma[i - 1][c] + 45.0 * gamma[i + 1][c]
                - 9.0 * gamma[i + 2][c]
                + gamma[i + 3][c])
                / (60.0 * dt);
            flow_residual = flow_residual.max((d - h[c]).abs());
        }
    }
    // backward integration is stable along the incoming manifold
    let stride = 20;
    let mut idx: Vec<usize> = (0..window).rev().step_by(stride).collect();
    if *idx.last().unwrap() != 0 {
        idx.push(0);
    }
    let sample_t: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let check = flow(pot, &PhasePoint::from_slice(&gamma[idx[0]]), &sample_t, 1e-15)?;
    let flow_deviation = idx
        .iter()
        .zip(&check.states)
        .map(|(&i, p)| {
            let gap = sup(&p.to_vec().iter().zip(&gamma[i]).map(|(a, b)| a - b).collect::<Vec<_>>());
            let size = sup(&rho[i].iter().zip(&r[i]).map(|(a, b)| a + b).collect::<Vec<_>>());
            gap / size
        })
        .fold(0.0, f64::max);

    let gamma_rel = |i: usize| rho[i].iter().zip(&r[i]).map(|(a, b)| a + b).collect::<Vec<_>>();
    let weighted_correction = (0..window).map(|i| weight[i] * sup(&r[i])).fold(0.0, f64::max);
    let decay_ratio = (0..window)
        .map(|i| (lmax * times[i]).exp() * sup(&r[i]))
        .fold(0.0, f64::max);
    Ok(RefinedCurve {
        truncation: n_trunc,
        t_n,
        lipschitz: c1,
        apex: apex.clone(),
        times: times[..window].to_vec(),
        formal: rho[..window].to_vec(),
        correction: r[..window].to_vec(),
        history,
        ratios,
        weighted_correction,
        decay_ratio,
        tail_bound,
        flow_residual,
        flow_deviation,
        flow_tolerance: (10.0 * opts.tol * (-n_trunc * t_n).exp() / sup(&gamma_rel(0))).max(1e-11),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PrescriptionReport {
    /// `(λ_j, Π_{λ_j} γ_{λ_j,0})` recovered by refitting the refined curve.
    pub recovered: Vec<(f64, Vec<f64>)>,
    pub max_mismatch: f64,
    pub fit_residual: f64,
}

/// Refits the expandible model on the refined curve and compares the kernel
/// parts of the `t⁰` coefficients at each `λ_j` with the prescription
/// (zero where nothing was prescribed).
pub fn verify_prescription(
    refined: &RefinedCurve,
    formal: &FormalCurve,
    lin: &LinearizationData,
) -> Result<PrescriptionReport> {
    let nvar = refined.apex.len();
    let states: Vec<PhasePoint> = (0..refined.times.len())
        .map(|i| {
            let v: Vec<f64> = refined.formal[i].iter().zip(&refined.correction[i]).map(|(a, b)| a + b).collect();
            PhasePoint::from_slice(&v)
        })
        .collect();
    let traj = Trajectory {
        times: refined.times.clone(),
        states,
        energy: 0.0,
        direction: Some(Direction::Stable),
        anchor: refined.times[0],
        energy_drift: 0.0,
    };
    let l1 = lin.lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let cutoff = formal.truncation.min(6.0 * l1);
    let fit = fit_expansion(&traj, &mu_sequence(&lin.lambdas, cutoff), &lin.lambdas)?;
    let mut recovered = Vec::new();
    let mut worst: f64 = 0.0;
    let mut distinct = lin.lambdas.clone();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * *b);
    for l in distinct {
        let p = lin.projector(l);
        let got = fit
            .term(l)
            .map(|t| LinearizationData::apply(&p, &t.coefficients[0]))
            .unwrap_or_else(|| vec![0.0; 2 * nvar]);
        let want = formal
            .prescribed
            .iter()
            .find(|(m, _)| (m - l).abs() <= 1e-9 * l)
            .map(|(_, v)| LinearizationData::apply(&p, v))
            .unwrap_or_else(|| vec![0.0; 2 * nvar]);
        let scale = sup(&want).max(1.0);
        worst = worst.max(sup(&got.iter().zip(&want).map(|(a, b)| a - b).collect::<Vec<_>>()) / scale);
        recovered.push((l, got));
    }
    if worst > 1e-6 {
        return Err(Error::PrescriptionDrift(worst));
    }
    Ok(PrescriptionReport {
        recovered,
        max_mismatch: worst,
        fit_residual: fit.residual,
    })
}
