//! Rank-one structure of the projector at a simple resonance: the resonant
//! state `f`, the constant `c` in `Π = c(·, f̄)f`, and the outgoing test.

use crate::geometry::GeneratingFunction;
use crate::lattice::MultiIndex;
use crate::model::Potential;
use crate::numerics::{lstsq, matvec, norm2, random_complex_vector};
use crate::operator::{RieszProjector, ScaledOperator};
use crate::{Error, Result, C64};
use faer::Mat;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Clone, Debug, Serialize)]
pub struct TaylorNormalization {
    pub window: f64,
    /// Fitted Taylor coefficients of `f e^{-iφ₊/h}` at the apex after
    /// normalization; entry `α` is 1.
    pub coefficients: Vec<C64>,
    /// Factor applied to the raw projector column.
    pub scale: C64,
    /// `sup |f e^{-iφ₊/h} - x^α|` on the window.
    pub window_deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonantState {
    /// Real parts of the contour nodes; exact positions where `undistorted`.
    pub x: Vec<f64>,
    pub samples: Vec<C64>,
    pub undistorted: Vec<bool>,
    pub h: f64,
    pub alpha: u32,
    /// Weighted Rayleigh quotient of `f`.
    pub z: C64,
    pub normalization: TaylorNormalization,
    /// `‖(A - z)f‖ / ‖f‖`.
    pub residual: f64,
    /// Index of the projector column that produced `f`.
    pub column: usize,
}

impl ResonantState {
    /// CSV rows `x, Re f, Im f, |f e^{-iφ₊/h}|` over the undistorted nodes.
    pub fn to_csv(&self, phi_plus: &GeneratingFunction) -> String {
        let mut s = String::from("x,re_f,im_f,abs_amplitude\n");
        for ((x, f), _) in self.x.iter().zip(&self.samples).zip(&self.undistorted).filter(|(_, u)| **u) {
            let amp = phi_plus
                .value(*x)
                .map(|p| (f * C64::from_polar(1.0, -p / self.h)).norm())
                .unwrap_or(f64::NAN);
            s.push_str(&format!("{x:.12e},{:.15e},{:.15e},{amp:.15e}\n", f.re, f.im));
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionConstant {
    pub c_num: C64,
    pub h: f64,
    pub alpha: u32,
    pub predicted: C64,
    pub modulus_ratio: f64,
    /// `arg(c_num / predicted)` in `(-π, π]`.
    pub phase_gap: f64,
    /// Largest `‖Πv - c(v, f̄)f‖ / ‖Πv‖` over the random probes.
    pub consistency: f64,
    /// Spread of the pointwise estimates `K(x,x)/f(x)²`, relative to `|c_num|`.
    pub spread: f64,
    pub samples_used: usize,
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// The closed-form leading constant: `h^{-|α|-n/2} e^{-iπ(|α|+n/2)/2}
/// (α! (2π)^{n/2})⁻¹ Π λ_j^{α_j+1/2}`.
pub fn predicted_constant(alpha: &MultiIndex, lambdas: &[f64], h: f64) -> C64 {
    let n = lambdas.len() as f64;
    let order: u32 = alpha.iter().sum();
    let afact: f64 = alpha.iter().map(|&a| factorial(a)).product();
    let prod: f64 = alpha
        .iter()
        .zip(lambdas)
        .map(|(&a, &l)| l.powf(f64::from(a) + 0.5))
        .product();
    let modulus = h.powf(-(f64::from(order)) - n / 2.0) * prod / (afact * (2.0 * PI).powf(n / 2.0));
    C64::from_polar(modulus, -PI / 2.0 * (f64::from(order) + n / 2.0))
}

fn window_nodes(op: &ScaledOperator, half_width: f64) -> Vec<usize> {
    (0..op.dim())
        .filter(|&i| op.undistorted(i) && op.contour[i].re.abs() <= half_width)
        .collect()
}

/// Rank-one factor of the projector, normalized so that the `α`-th Taylor
/// coefficient of `f e^{-iφ₊/h}` at the apex is 1 (fit of degree `α+2` on
/// `|x| ≤ h^{1/3}`).
pub fn extract_state(
    proj: &RieszProjector,
    op: &ScaledOperator,
    phi_plus: &GeneratingFunction,
    alpha: u32,
) -> Result<ResonantState> {
    if proj.rank_gap > 1e-6 {
        return Err(Error::RankDeficiency(proj.rank_gap));
    }
    let h = op.h;
    let n = op.dim();
    let col_norm = |j: usize| (0..n).map(|i| proj.matrix[(i, j)].norm_sqr()).sum::<f64>();
    let column = (0..n)
        .max_by(|&a, &b| col_norm(a).total_cmp(&col_norm(b)))
        .expect("non-empty grid");
    let raw: Vec<C64> = (0..n).map(|i| proj.matrix[(i, column)]).collect();

    let width = h.powf(1.0 / 3.0);
    let win = window_nodes(op, width);
    let degree = alpha as usize + 2;
    if win.len() < 2 * (degree + 1) {
        return Err(Error::WindowTooShort(win.len()));
    }
    let apex = phi_plus.apex;
    let mut rhs = Vec::with_capacity(win.len());
    for &i in &win {
        let x = op.contour[i].re;
        rhs.push(raw[i] * C64::from_polar(1.0, -phi_plus.value(x)? / h));
    }
    // monomials in (x - apex)/width keep the fit well scaled
    let a = Mat::from_fn(win.len(), degree + 1, |r, k| {
        C64::new(((op.contour[win[r]].re - apex) / width).powi(k as i32), 0.0)
    });
    let (coef, _) = lstsq(&a, &rhs)?;
    let lead = coef[alpha as usize];
    let window_size = rhs.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if lead.norm() < 1e-6 * window_size {
        return Err(Error::NormalizationDegenerate(format!(
            "coefficient of x^{alpha} is {:.3e} against window size {window_size:.3e}",
            lead.norm()
        )));
    }
    // x^α coefficient in unscaled units is lead / width^α
    let scale = C64::new(width.powi(alpha as i32), 0.0) / lead;
    let samples: Vec<C64> = raw.iter().map(|v| v * scale).collect();
    let coefficients: Vec<C64> = coef
        .iter()
        .enumerate()
        .map(|(k, c)| c * scale / width.powi(k as i32))
        .collect();
    let window_deviation = win
        .iter()
        .zip(&rhs)
        .map(|(&i, d)| (d * scale - (op.contour[i].re - apex).powi(alpha as i32)).norm())
        .fold(0.0, f64::max);

    let w = op.measure();
    let af = matvec(&op.matrix, &samples);
    let num: C64 = (0..n).map(|i| w[i] * samples[i] * af[i]).sum();
    let den: C64 = (0..n).map(|i| w[i] * samples[i] * samples[i]).sum();
    let z = num / den;
    let res: Vec<C64> = af.iter().zip(&samples).map(|(a, f)| a - z * f).collect();
    let residual = norm2(&res) / norm2(&samples);
    Ok(ResonantState {
        x: op.contour.iter().map(|c| c.re).collect(),
        samples,
        undistorted: (0..n).map(|i| op.undistorted(i)).collect(),
        h,
        alpha,
        z,
        normalization: TaylorNormalization {
            window: width,
            coefficients,
            scale,
            window_deviation,
        },
        residual,
        column,
    })
}

/// `c = K(x,x)/f(x)²` averaged over the nodes where `|f|` is in its top
/// decile, with `K` the kernel of `Π` in the weighted bilinear pairing.
pub fn extract_constant(
    proj: &RieszProjector,
    op: &ScaledOperator,
    state: &ResonantState,
    lambdas: &[f64],
) -> Result<ProjectionConstant> {
    let n = op.dim();
    let w = op.measure();
    let f = &state.samples;
    let mut mags: Vec<f64> = (0..n).filter(|&i| op.undistorted(i)).map(|i| f[i].norm()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let cut = mags[(mags.len() / 10).min(mags.len() - 1)];
    let picks: Vec<usize> = (0..n).filter(|&i| op.undistorted(i) && f[i].norm() >= cut).collect();
    let local: Vec<C64> = picks
        .iter()
        .map(|&i| proj.matrix[(i, i)] / (w[i] * f[i] * f[i]))
        .collect();
    let c_num = local.iter().sum::<C64>() / local.len() as f64;
    let spread = local.iter().map(|c| (c - c_num).norm()).fold(0.0, f64::max) / c_num.norm();

    let mut consistency: f64 = 0.0;
    for k in 0..8 {
        let v = random_complex_vector(n, 100 + k);
        let pv = matvec(&proj.matrix, &v);
        let pair: C64 = (0..n).map(|i| w[i] * v[i] * f[i]).sum();
        let diff: Vec<C64> = pv.iter().zip(f).map(|(p, fi)| p - c_num * pair * fi).collect();
        consistency = consistency.max(norm2(&diff) / norm2(&pv));
    }
    if consistency > 1e-4 {
        return Err(Error::InconsistentFactorization(consistency));
    }
    let predicted = predicted_constant(&vec![state.alpha], lambdas, state.h);
    let ratio = c_num / predicted;
    Ok(ProjectionConstant {
        c_num,
        h: state.h,
        alpha: state.alpha,
        predicted,
        modulus_ratio: ratio.norm(),
        phase_gap: ratio.arg(),
        consistency,
        spread,
        samples_used: picks.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OutgoingReport {
    pub radius: f64,
    /// `|b|² / (|a|² + |b|²)` per window, left then right.
    pub incoming_fraction: [f64; 2],
    pub outgoing_fraction: [f64; 2],
    /// Relative misfit of the two-branch model.
    pub fit_residual: [f64; 2],
}

/// WKB phase `∫_{x_c}^{x} √(z - V)` at complex energy, by Gauss-Legendre
/// on each sub-interval.
fn local_phase(pot: &Potential, z: C64, xc: f64, x: f64) -> C64 {
    let (nodes, weights) = crate::numerics::quad::gauss_legendre(12);
    let half = 0.5 * (x - xc);
    let mid = 0.5 * (x + xc);
    nodes
        .iter()
        .zip(&weights)
        .map(|(s, w)| {
            let y = mid + half * s;
            w * half * (z - pot.eval_real(&[y])).sqrt()
        })
        .sum()
}

/// Decomposes `f` on windows around `±radius` against the outgoing and
/// incoming WKB branches at energy `z`; outgoing means momentum pointing
/// away from the apex.
pub fn verify_outgoing(
    x: &[f64],
    f: &[C64],
    pot: &Potential,
    apex: f64,
    h: f64,
    z: C64,
    radius: f64,
) -> Result<OutgoingReport> {
    if pot.dimension != 1 {
        return Err(Error::DimensionUnsupported(pot.dimension));
    }
    let mut incoming = [0.0; 2];
    let mut outgoing = [0.0; 2];
    let mut misfit = [0.0; 2];
    for (k, side) in [-1.0f64, 1.0].into_iter().enumerate() {
        let xc = apex + side * radius;
        let depth = z.re - pot.eval_real(&[xc]);
        if depth <= 0.0 {
            return Err(Error::WindowInClassicallyForbiddenRegion(xc));
        }
        // three local wavelengths on either side of the window centre
        let half = 3.0 * 2.0 * PI * h / depth.sqrt();
        let idx: Vec<usize> = (0..x.len()).filter(|&i| (x[i] - xc).abs() <= half).collect();
        if idx.len() < 8 {
            return Err(Error::WindowTooShort(idx.len()));
        }
        for &i in &idx {
            if z.re - pot.eval_real(&[x[i]]) <= 0.0 {
                return Err(Error::WindowInClassicallyForbiddenRegion(x[i]));
            }
        }
        let basis: Vec<(C64, C64)> = idx
            .iter()
            .map(|&i| {
                let s = local_phase(pot, z, xc, x[i]);
                let amp = (z - pot.eval_real(&[x[i]])).powf(-0.25);
                let e = (C64::i() * s / h).exp();
                // away from the apex the phase must grow with side·x
                if side > 0.0 {
                    (amp * e, amp / e)
                } else {
                    (amp / e, amp * e)
                }
            })
            .collect();
        let a = Mat::from_fn(idx.len(), 2, |r, c| if c == 0 { basis[r].0 } else { basis[r].1 });
        let rhs: Vec<C64> = idx.iter().map(|&i| f[i]).collect();
        let (coef, _) = lstsq(&a, &rhs)?;
        let fit: Vec<C64> = basis.iter().zip(&rhs).map(|((o, i), r)| coef[0] * o + coef[1] * i - r).collect();
        let total = coef[0].norm_sqr() + coef[1].norm_sqr();
        incoming[k] = coef[1].norm_sqr() / total;
        outgoing[k] = coef[0].norm_sqr() / total;
        misfit[k] = norm2(&fit) / norm2(&rhs);
    }
    Ok(OutgoingReport {
        radius,
        incoming_fraction: incoming,
        outgoing_fraction: outgoing,
        fit_residual: misfit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{eikonal_phase, Branch};
    use crate::model::barrier_data;
    use crate::operator::{assemble_scaled, riesz_projector, Discretization, Grid1D, Scaling};

    #[test]
    fn predicted_constants() {
        let c = predicted_constant(&vec![0], &[2.0], 0.01);
        assert!((c.norm() - 10.0 / PI.sqrt()).abs() < 1e-12);
        assert!((c.arg() + PI / 4.0).abs() < 1e-12);
        let h: f64 = 0.05;
        let c = predicted_constant(&vec![1], &[2.0], h);
        assert!((c.norm() - h.powf(-1.5) * 2.0 / PI.sqrt()).abs() < 1e-9);
        assert!((c.arg() + 3.0 * PI / 4.0).abs() < 1e-12);
        let l2 = 2.0 * 2f64.sqrt();
        let c = predicted_constant(&vec![0, 0], &[2.0, l2], 0.1);
        assert!((c.norm() - 10.0 / (2.0 * PI) * (2.0 * l2).sqrt()).abs() < 1e-12);
        assert!((c.arg() + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn plane_wave_is_purely_outgoing() {
        let pot = Potential::gaussian(0.0, 1.0, 1);
        let h = 0.05;
        let x: Vec<f64> = (0..4001).map(|i| -4.0 + i as f64 * 0.002).collect();
        let f: Vec<C64> = x.iter().map(|&x| C64::from_polar(1.0, x.abs() / h)).collect();
        let r = verify_outgoing(&x, &f, &pot, 0.0, h, C64::new(1.0, 0.0), 2.0).unwrap();
        assert!(r.incoming_fraction.iter().all(|v| *v < 1e-20));
        let g: Vec<C64> = f.iter().map(|v| v.conj()).collect();
        let r = verify_outgoing(&x, &g, &pot, 0.0, h, C64::new(1.0, 0.0), 2.0).unwrap();
        assert!(r.outgoing_fraction.iter().all(|v| *v < 1e-20));
    }

    #[test]
    fn oscillator_ground_state_factorization() {
        // -h²∂² + 1 - x²: z_0 = 1 - ih with state e^{ix²/(2h)}, so
        // c = 1/∫e^{ix²/h} = e^{-iπ/4}/√(πh), the closed form with no O(h) term
        let pot = Potential::quadratic(1.0, &[2.0], vec![]);
        let h = 0.05;
        let g = Grid1D::new(6.0, 700).unwrap();
        let op = assemble_scaled(
            &pot,
            &g,
            h,
            0.6,
            Scaling::Exterior { r0: 2.5, width: 2.5 },
            Discretization::Fourier,
        )
        .unwrap();
        let b = barrier_data(&pot).unwrap();
        let phi = eikonal_phase(&b, &pot, Branch::Outgoing).unwrap();
        let p = riesz_projector(&op, C64::new(1.0, -h), 0.5 * h, 24).unwrap();
        let s = extract_state(&p, &op, &phi, 0).unwrap();
        assert!(s.residual < 1e-6, "{}", s.residual);
        assert!((s.z - C64::new(1.0, -h)).norm() < 1e-6, "{}", s.z);
        // the inverted oscillator's resonant state is exactly e^{ix²/(2h)}
        assert!(s.normalization.window_deviation < 1e-6, "{}", s.normalization.window_deviation);
        let c = extract_constant(&p, &op, &s, &b.lambdas).unwrap();
        assert!(c.consistency < 1e-6);
        assert!((c.modulus_ratio - 1.0).abs() < 1e-4, "{}", c.modulus_ratio);
        assert!(c.phase_gap.abs() < 1e-4, "{}", c.phase_gap);
        let wm = Mat::from_fn(op.dim(), op.dim(), |i, j| op.weights[i] * p.matrix[(i, j)]);
        let sym = crate::numerics::frobenius(&(&wm - wm.transpose())) / crate::numerics::frobenius(&p.matrix);
        assert!(sym < 1e-8);
    }
}
