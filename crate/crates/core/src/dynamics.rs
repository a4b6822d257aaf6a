//! Cut-off propagation `χ e^{-itP/h} χ ψ(P)` against truncated sums over the
//! resonances in a strip of depth `μh`.

use crate::lattice::{is_simple, pseudo_resonances, MultiIndex};
use crate::model::{barrier_data, Potential};
use crate::numerics::linear_fit;
use crate::numerics::smooth::BumpSpec;
use crate::operator::{
    assemble_scaled, assemble_selfadjoint, find_resonances, riesz_apply, Discretization, Grid1D, Scaling,
    SearchOptions, SpectralDecomposition,
};
use crate::{Error, Result, C64};
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

/// `e^{-itP/h} u0`, applied spectrally.
pub fn evolve(decomp: &SpectralDecomposition, u0: &[C64], t: f64, h: f64) -> Vec<C64> {
    decomp.apply(|e| C64::from_polar(1.0, -t * e / h), u0)
}

/// One resonance of the strip together with `Π_z v` for each prepared state.
#[derive(Clone, Debug)]
pub struct ResonanceTerm {
    pub z: C64,
    pub alpha: MultiIndex,
    pub decay_sum: f64,
    /// Column `k` is `Π_z χψ(P)u_k` on the propagation grid.
    pub images: Mat<C64>,
    pub h: f64,
}

/// `Σ e^{-itz/h} χ Π_z v` for state `k`.
pub fn expansion_sum(terms: &[ResonanceTerm], lambdas: &[f64], chi: &[f64], t: f64, k: usize) -> Result<Vec<C64>> {
    let mut out = vec![C64::new(0.0, 0.0); chi.len()];
    for term in terms {
        if !is_simple(&term.alpha, lambdas, 1e-8) {
            return Err(Error::NonSimpleResonance(term.alpha.clone()));
        }
        let phase = (C64::new(0.0, -t) * term.z / term.h).exp();
        for (i, o) in out.iter_mut().enumerate() {
            *o += phase * chi[i] * term.images[(i, k)];
        }
    }
    Ok(out)
}

/// Inputs of a propagation run.
#[derive(Clone, Debug)]
pub struct PropagatorRun {
    pub h: f64,
    pub times: Vec<f64>,
    /// Spatial cutoff; must vanish outside the undistorted region.
    pub chi: BumpSpec,
    /// Spectral cutoff around `E0`.
    pub psi: BumpSpec,
    /// Initial vectors on `grid`.
    pub test_states: Vec<Vec<C64>>,
    /// Strip depth: resonances with decay sum below `mu` enter the sum.
    pub mu: f64,
    /// Long box for the Hermitian evolution.
    pub grid: Grid1D,
    /// Half length of the short box carrying the scaled operator; rounded to
    /// a node of `grid`.
    pub scaled_half_length: f64,
    pub theta: f64,
    pub r0: f64,
    pub width: f64,
    pub discretization: Discretization,
    pub n_quad: usize,
}

impl PropagatorRun {
    /// Defaults for a 1-D barrier at step `h`: `ε = 0.15 E0`, `χ` equal to 1
    /// on `|x| ≤ 1` and supported in `|x| ≤ 2`, a box long enough that waves
    /// reflected at its ends return to `supp χ` only after `t_max`. The box
    /// allows for twice the nominal speed, since `χ` spreads a small part of
    /// `ψ(P)u` to high energies.
    pub fn standard(pot: &Potential, h: f64, mu: f64, times: Vec<f64>) -> Result<Self> {
        let e0 = barrier_data(pot)?.e0;
        let eps = 0.15 * e0;
        let t_max = times.iter().cloned().fold(0.0, f64::max);
        let chi = BumpSpec::new(0.0, 1.0, 2.0);
        let speed = 2.0 * (e0 + eps).sqrt();
        let half_length = (chi.support + speed * t_max + 4.0).ceil();
        let dx = (0.05f64).min(h);
        let points = (2.0 * half_length / dx).round() as usize + 1;
        let grid = Grid1D::new(half_length, points)?;
        let states = coherent_states(&grid, h);
        Ok(Self {
            h,
            times,
            chi,
            psi: BumpSpec::new(e0, 0.5 * eps, eps),
            test_states: states,
            mu,
            grid,
            scaled_half_length: 7.0,
            theta: 0.5,
            r0: 3.0,
            width: 3.0,
            discretization: Discretization::Fourier,
            n_quad: 24,
        })
    }

    /// Earliest time a wave leaving `supp χ` at speed `2√(E0+ε)` can return
    /// after reflection at the box ends.
    pub fn recurrence_time(&self, e0: f64) -> f64 {
        let speed = 2.0 * (e0 + self.psi.support).sqrt();
        2.0 * (self.grid.half_length - self.chi.support) / speed
    }
}

/// Four Gaussian packets of width `√h` near the apex with momenta of either
/// sign.
pub fn coherent_states(grid: &Grid1D, h: f64) -> Vec<Vec<C64>> {
    let sigma = h.sqrt();
    [(0.0, 0.0), (-0.4, 0.6), (0.4, -0.6), (0.2, 0.3)]
        .iter()
        .map(|&(x0, p)| {
            grid.nodes()
                .iter()
                .map(|&x| C64::from_polar((-(x - x0) * (x - x0) / (2.0 * sigma * sigma)).exp(), p * x / h))
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorSample {
    pub t: f64,
    /// Maximum over test states of `‖χ(U(t) - Σ)v‖ / ‖u0‖`.
    pub error: f64,
    pub per_state: Vec<f64>,
    /// `‖χ U(t) v‖ / ‖u0‖`, maximised over states.
    pub lhs_norm: f64,
    pub sum_norm: f64,
    /// `e^{-μ_fit t} h^{-K_fit}` where a fit exists.
    pub bound: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionComparison {
    pub h: f64,
    pub mu: f64,
    pub resonances: Vec<(MultiIndex, [f64; 2])>,
    /// Decay rate `-Im z/h` of the first lattice point left out of the sum.
    pub first_excluded_rate: Option<f64>,
    pub error_curve: Vec<ErrorSample>,
    pub fitted_mu: Option<f64>,
    pub fitted_k: Option<f64>,
    /// `[t_start, t_end]` of the fitted regime.
    pub fit_window: Option<[f64; 2]>,
    pub onset_time: Option<f64>,
    pub floor: f64,
    pub recurrence_time: f64,
    pub warnings: Vec<String>,
}

impl ExpansionComparison {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,error,lhs_norm,sum_norm,bound\n");
        for e in &self.error_curve {
            let b = e.bound.map(|b| format!("{b:.12e}")).unwrap_or_default();
            s.push_str(&format!("{:.6},{:.12e},{:.12e},{:.12e},{}\n", e.t, e.error, e.lhs_norm, e.sum_norm, b));
        }
        s
    }

    /// Largest error over samples with `t` in `[a, b]`.
    pub fn max_error_in(&self, a: f64, b: f64) -> f64 {
        self.error_curve
            .iter()
            .filter(|e| e.t >= a && e.t <= b)
            .map(|e| e.error)
            .fold(0.0, f64::max)
    }

    pub fn error_at(&self, t: f64) -> Option<f64> {
        self.error_curve
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .map(|e| e.error)
    }
}

fn l2(v: &[C64], dx: f64) -> f64 {
    (v.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx).sqrt()
}

/// Resonances in the strip with `Π_z v` for each prepared state `v`, on the
/// scaled short box, mapped back onto the long grid.
fn strip_terms(pot: &Potential, run: &PropagatorRun, prepared: &[Vec<C64>], warnings: &mut Vec<String>) -> Result<(Vec<ResonanceTerm>, Option<f64>)> {
    let b = barrier_data(pot)?;
    let l1 = b.lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let seeds = match pseudo_resonances(&b, run.h, run.mu) {
        Ok(s) => s,
        Err(Error::ForbiddenRadius { alpha, decay_sum, .. }) => {
            warnings.push(format!(
                "strip depth {} equals the decay sum {decay_sum} of alpha={alpha:?}; that resonance is left out of the sum",
                run.mu
            ));
            pseudo_resonances(&b, run.h, run.mu - 1e-6 * l1)?
        }
        Err(e) => return Err(e),
    };
    let excluded = {
        let reach = run.mu + 2.0 * b.lambdas.iter().sum::<f64>() + 0.37 * l1;
        let wider = pseudo_resonances(&b, 1.0, reach).unwrap_or_default();
        wider.iter().map(|p| p.decay_sum).find(|&d| d >= run.mu - 1e-6 * l1)
    };
    if seeds.is_empty() {
        return Ok((Vec::new(), excluded));
    }
    let dx = run.grid.dx();
    let offset = ((run.grid.half_length - run.scaled_half_length) / dx).round() as usize;
    let small_points = run.grid.points - 2 * offset;
    let small = Grid1D::new(run.grid.half_length - offset as f64 * dx, small_points)?;
    let scaling = Scaling::Exterior { r0: run.r0, width: run.width };
    let op = assemble_scaled(pot, &small, run.h, run.theta, scaling, run.discretization)?;
    for (i, &x) in run.grid.nodes().iter().enumerate() {
        let outside = i < offset || i >= offset + small_points || x.abs() >= run.r0;
        if outside && run.chi.eval(x) != 0.0 {
            return Err(Error::Config(format!("chi must vanish outside the undistorted region |x| < {}", run.r0)));
        }
    }
    let hits = find_resonances(&op, &seeds, &SearchOptions::for_step(run.h))?;
    let block = Mat::from_fn(small_points, prepared.len(), |i, k| prepared[k][i + offset]);
    let mut terms = Vec::new();
    for hit in hits {
        // a quarter of the lattice spacing keeps neighbours well outside
        let radius = 0.25 * l1 * run.h;
        let image = riesz_apply(&op, hit.z, radius, run.n_quad, &block)?;
        let images = Mat::from_fn(run.grid.points, prepared.len(), |i, k| {
            if i >= offset && i < offset + small_points {
                image[(i - offset, k)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let decay_sum = seeds.iter().find(|s| s.alpha == hit.alpha).map(|s| s.decay_sum).unwrap_or(f64::NAN);
        terms.push(ResonanceTerm {
            z: hit.z,
            alpha: hit.alpha,
            decay_sum,
            images,
            h: run.h,
        });
    }
    Ok((terms, excluded))
}

/// Runs the Hermitian evolution and the resonance sum side by side and fits
/// the exponential regime of their difference.
pub fn compare_expansion(pot: &Potential, run: &PropagatorRun) -> Result<ExpansionComparison> {
    let b = barrier_data(pot)?;
    let mut warnings = Vec::new();
    let h = run.h;
    let grid = &run.grid;
    let dx = grid.dx();
    let nodes = grid.nodes();
    let op = assemble_selfadjoint(pot, grid, h, run.discretization)?;
    warnings.extend(op.warnings.iter().cloned());
    let decomp = SpectralDecomposition::new(&op)?;
    let chi: Vec<f64> = nodes.iter().map(|&x| run.chi.eval(x)).collect();
    let u_norms: Vec<f64> = run.test_states.iter().map(|u| l2(u, dx)).collect();
    // v = χψ(P)u
    let prepared: Vec<Vec<C64>> = run
        .test_states
        .iter()
        .map(|u| {
            decomp
                .apply(|e| C64::new(run.psi.eval(e), 0.0), u)
                .iter()
                .zip(&chi)
                .map(|(v, c)| v * c)
                .collect()
        })
        .collect();
    let (terms, excluded) = strip_terms(pot, run, &prepared, &mut warnings)?;
    let recurrence = run.recurrence_time(b.e0);
    let t_max = run.times.iter().cloned().fold(0.0, f64::max);
    if t_max > recurrence {
        warnings.push(format!(
            "times beyond {recurrence:.2} see waves reflected at the box ends (t_max = {t_max:.2})"
        ));
    }

    // Eigen-coefficients once per state; synthesis only on supp χ.
    let rows: Vec<usize> = (0..grid.points).filter(|&i| chi[i] != 0.0).collect();
    let n = grid.points;
    let u = &decomp.vectors;
    let coefs: Vec<Vec<C64>> = prepared
        .iter()
        .map(|v| (0..n).map(|k| (0..n).map(|i| v[i] * u[(i, k)]).sum()).collect())
        .collect();
    let lambdas = &b.lambdas;
    let samples: Vec<Result<ErrorSample>> = run
        .times
        .par_iter()
        .map(|&t| {
            let phases: Vec<C64> = decomp.values.iter().map(|&e| C64::from_polar(1.0, -t * e / h)).collect();
            let mut per_state = Vec::with_capacity(coefs.len());
            let (mut lhs_max, mut sum_max): (f64, f64) = (0.0, 0.0);
            for (s, c) in coefs.iter().enumerate() {
                let sum = expansion_sum(&terms, lambdas, &chi, t, s)?;
                let (mut diff2, mut lhs2, mut sum2) = (0.0, 0.0, 0.0);
                for &i in &rows {
                    let val: C64 = (0..n).map(|k| u[(i, k)] * c[k] * phases[k]).sum::<C64>() * chi[i];
                    diff2 += (val - sum[i]).norm_sqr();
                    lhs2 += val.norm_sqr();
                    sum2 += sum[i].norm_sqr();
                }
                let scale = 1.0 / u_norms[s];
                per_state.push((diff2 * dx).sqrt() * scale);
                lhs_max = lhs_max.max((lhs2 * dx).sqrt() * scale);
                sum_max = sum_max.max((sum2 * dx).sqrt() * scale);
            }
            Ok(ErrorSample {
                t,
                error: per_state.iter().cloned().fold(0.0, f64::max),
                per_state,
                lhs_norm: lhs_max,
                sum_norm: sum_max,
                bound: None,
            })
        })
        .collect();
    let mut error_curve = samples.into_iter().collect::<Result<Vec<_>>>()?;
    error_curve.sort_by(|a, b| a.t.total_cmp(&b.t));

    let onset_time = error_curve.iter().find(|e| e.error <= 0.05).map(|e| e.t);
    let l1 = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_fit = 2.0 * h.ln().abs() / l1;
    // The error levels off where the O(h^∞) part of χψ(P) takes over; the
    // exponential regime ends well above that plateau.
    let floor = error_curve
        .iter()
        .filter(|e| e.t >= t_fit && e.t <= recurrence)
        .map(|e| e.error)
        .fold(f64::INFINITY, f64::min);
    let (ts, ls): (Vec<f64>, Vec<f64>) = error_curve
        .iter()
        .filter(|e| e.t >= t_fit && e.t <= recurrence)
        .take_while(|e| e.error > 30.0 * floor)
        .map(|e| (e.t, e.error.ln()))
        .unzip();
    let mut out = ExpansionComparison {
        h,
        mu: run.mu,
        resonances: terms.iter().map(|t| (t.alpha.clone(), [t.z.re, t.z.im])).collect(),
        first_excluded_rate: excluded,
        error_curve,
        fitted_mu: None,
        fitted_k: None,
        fit_window: None,
        onset_time,
        floor,
        recurrence_time: recurrence,
        warnings,
    };
    if ts.len() < 5 {
        return Err(Error::NoExponentialRegime(format!(
            "{} samples above the floor after t = {t_fit:.3}; run: {}",
            ts.len(),
            serde_json::to_string(&out).unwrap_or_default()
        )));
    }
    let (slope, intercept) = linear_fit(&ts, &ls);
    let misfit = ts
        .iter()
        .zip(&ls)
        .map(|(t, l)| (l - (slope * t + intercept)).abs())
        .fold(0.0, f64::max);
    let span = ls.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ls.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(slope < 0.0) || misfit > 0.25 * span.max(1.0) {
        return Err(Error::NoExponentialRegime(format!(
            "log-error is not linear after t = {t_fit:.3} (slope {slope:.3}, misfit {misfit:.3}); run: {}",
            serde_json::to_string(&out).unwrap_or_default()
        )));
    }
    let mu_fit = -slope;
    let k_fit = intercept / h.ln().abs();
    for e in out.error_curve.iter_mut() {
        e.bound = Some((-mu_fit * e.t).exp() * h.powf(-k_fit));
    }
    out.fitted_mu = Some(mu_fit);
    out.fitted_k = Some(k_fit);
    out.fit_window = Some([ts[0], ts[ts.len() - 1]]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_decomp() -> (SpectralDecomposition, Grid1D) {
        let pot = Potential::sech2(1.0);
        let g = Grid1D::new(6.0, 120).unwrap();
        let op = assemble_selfadjoint(&pot, &g, 0.1, Discretization::Fourier).unwrap();
        (SpectralDecomposition::new(&op).unwrap(), g)
    }

    #[test]
    fn evolution_is_unitary() {
        let (d, g) = small_decomp();
        let u0 = &coherent_states(&g, 0.1)[1];
        let n0: f64 = u0.iter().map(|c| c.norm_sqr()).sum();
        for t in [0.3, 4.0, 25.0] {
            let u = evolve(&d, u0, t, 0.1);
            let n: f64 = u.iter().map(|c| c.norm_sqr()).sum();
            assert!((n / n0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvector_picks_up_its_phase() {
        let (d, g) = small_decomp();
        let k = 17;
        let v: Vec<C64> = (0..g.points).map(|i| C64::new(d.vectors[(i, k)], 0.0)).collect();
        let t = 2.7;
        let u = evolve(&d, &v, t, 0.1);
        let phase = C64::from_polar(1.0, -t * d.values[k] / 0.1);
        let err = u.iter().zip(&v).map(|(a, b)| (a - phase * b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn zero_time_is_identity() {
        let (d, g) = small_decomp();
        let u0 = &coherent_states(&g, 0.1)[2];
        let u = evolve(&d, u0, 0.0, 0.1);
        let err = u.iter().zip(u0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn empty_resonance_set_sums_to_zero() {
        let s = expansion_sum(&[], &[2.0], &[1.0; 5], 3.0, 0).unwrap();
        assert!(s.iter().all(|c| *c == C64::new(0.0, 0.0)));
    }

    #[test]
    fn degenerate_index_is_rejected() {
        let term = ResonanceTerm {
            z: C64::new(1.0, -0.3),
            alpha: vec![2, 0],
            decay_sum: 3.0,
            images: Mat::zeros(3, 1),
            h: 0.1,
        };
        let err = expansion_sum(&[term], &[1.0, 2.0], &[1.0; 3], 1.0, 0).unwrap_err();
        assert!(matches!(err, Error::NonSimpleResonance(_)));
    }
}
