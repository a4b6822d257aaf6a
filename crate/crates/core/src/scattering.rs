//! One-dimensional scattering at complex energy: Jost solutions matched to
//! WKB-corrected plane waves, residues of the amplitude at resonances, and the
//! semiclassical residue formula.

use crate::geometry::ScatteringGeometry;
use crate::model::{barrier_data, Potential};
use crate::numerics::ode::Dopri5;
use crate::numerics::{lstsq, quad};
use crate::{Error, Result, C64};
use faer::Mat;
use serde::Serialize;
use std::f64::consts::PI;

/// Relative size of `|V|` against `|z|` beyond the matching radius.
const TAIL_LEVEL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct ScatteringData1D {
    pub z: C64,
    pub h: f64,
    pub transmission: C64,
    /// Reflection of a wave incident from the left.
    pub reflection_left: C64,
    pub reflection_right: C64,
    pub matching_radius: f64,
    /// `|T_left - T_right| / |T|`: the two shooting directions must agree.
    pub reciprocity_defect: f64,
}

impl ScatteringData1D {
    /// `|T|² + |R|² - 1` for each incidence; only meaningful for real `z`.
    pub fn flux_defect(&self) -> f64 {
        let t2 = self.transmission.norm_sqr();
        (t2 + self.reflection_left.norm_sqr() - 1.0)
            .abs()
            .max((t2 + self.reflection_right.norm_sqr() - 1.0).abs())
    }

    /// `𝒜(ω, ω') = S(ω, ω') - δ_{ωω'}`, the amplitude `c(z,h)𝒯` with
    /// `c = -2πi` in one dimension. `ω'` is the incoming direction.
    pub fn amplitude(&self, omega: i8, omega_in: i8) -> C64 {
        let one = C64::new(1.0, 0.0);
        match (omega > 0, omega_in > 0) {
            (true, true) | (false, false) => self.transmission - one,
            (false, true) => self.reflection_left,
            (true, false) => self.reflection_right,
        }
    }
}

/// Integration ray `x = e^{iφ}s`. On it `kx = |k|s` for the free wave number
/// `k = √z/h`, so plane waves neither grow nor decay and the decomposition
/// at the far end keeps full accuracy off the real axis.
#[derive(Clone, Copy, Debug)]
struct Ray {
    rot: C64,
}

impl Ray {
    fn new(pot: &Potential, z: C64) -> Self {
        let phi = (-0.5 * z.arg()).clamp(-pot.sector_half_angle(), pot.sector_half_angle());
        Self {
            rot: C64::from_polar(1.0, phi),
        }
    }

    fn v(&self, pot: &Potential, s: f64) -> Result<C64> {
        if self.rot.im == 0.0 {
            Ok(C64::new(pot.eval_real(&[s]), 0.0))
        } else {
            pot.eval1(self.rot * s)
        }
    }
}

fn tail_is_small(pot: &Potential, ray: &Ray, z: C64, r: f64) -> Result<bool> {
    let level = TAIL_LEVEL * z.norm();
    for k in 0..160 {
        let s = r + 0.25 * k as f64;
        if ray.v(pot, s)?.norm() > level || ray.v(pot, -s)?.norm() > level {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Smallest `R` with `|V| ≤ 1e-10 |z|` beyond `|s| = R` on the integration
/// ray, probed on a 0.25 grid out to `R + 40`.
pub fn matching_radius(pot: &Potential, z: C64) -> Result<f64> {
    let ray = Ray::new(pot, z);
    let mut r = 0.25;
    while r < 1e3 {
        if tail_is_small(pot, &ray, z, r)? {
            return Ok(r);
        }
        r += 0.25;
    }
    Err(Error::MatchingRadiusTooSmall(r))
}

/// `e^{iφ}∫ V ds` over the ray beyond `s = ±r`.
fn tail_integral(pot: &Potential, ray: &Ray, r: f64, side: f64) -> C64 {
    let f = |s: f64| ray.v(pot, side * (r + s)).unwrap_or(C64::new(0.0, 0.0));
    ray.rot * quad::integrate(f, 0.0, 60.0, 1e-300, 1e-10)
}

/// Solution of `-h²u'' + (V - z)u = 0` along the ray from `s0` to `s1`, with
/// `u` and `du = du/ds` at `s0`; the state is carried as `(u, h du)`.
fn shoot(pot: &Potential, ray: &Ray, z: C64, h: f64, s0: f64, u: C64, du: C64, s1: f64) -> Result<(C64, C64)> {
    let w = du * h;
    let y0 = [u.re, u.im, w.re, w.im];
    let rot2 = ray.rot * ray.rot;
    let mut failure = None;
    let rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
        let v = ray.v(pot, s).unwrap_or_else(|e| {
            failure.get_or_insert(e);
            C64::new(0.0, 0.0)
        });
        let q = rot2 * (v - z) / h;
        let u = C64::new(y[0], y[1]);
        let w = C64::new(y[2], y[3]);
        let du = w / h;
        let dw = q * u;
        dy[0] = du.re;
        dy[1] = du.im;
        dy[2] = dw.re;
        dy[3] = dw.im;
    };
    let solver = Dopri5::new(1e-13, 1e-300).with_max_step(0.5 * h);
    let out = solver.integrate(rhs, s0, &y0, &[s1])?;
    if let Some(e) = failure {
        return Err(e);
    }
    let y = &out[0];
    Ok((C64::new(y[0], y[1]), C64::new(y[2], y[3]) / h))
}

/// Transmission and reflection amplitudes at complex energy `z`. Jost
/// solutions are started from WKB-corrected plane waves at `±R`, integrated
/// across the barrier, and decomposed by Wronskians on the far side.
pub fn transmission(pot: &Potential, z: C64, h: f64) -> Result<ScatteringData1D> {
    transmission_at(pot, z, h, None)
}

pub fn transmission_at(pot: &Potential, z: C64, h: f64, radius: Option<f64>) -> Result<ScatteringData1D> {
    if pot.dimension != 1 {
        return Err(Error::DimensionUnsupported(pot.dimension));
    }
    if !pot.is_short_range() {
        return Err(Error::LongRangeUnsupported(pot.decay_exponent));
    }
    if z.im.abs() > 5.0 * h {
        return Err(Error::StiffnessFailure(format!(
            "|Im z| = {:.3e} exceeds the operational bound 5h = {:.3e}",
            z.im.abs(),
            5.0 * h
        )));
    }
    if !(z.re > 0.0) {
        return Err(Error::StiffnessFailure(format!("Re z = {} must be positive", z.re)));
    }
    let ray = Ray::new(pot, z);
    let r = match radius {
        Some(r) if !tail_is_small(pot, &ray, z, r)? => return Err(Error::MatchingRadiusTooSmall(r)),
        Some(r) => r,
        None => matching_radius(pot, z)?,
    };
    let sz = z.sqrt();
    // wave number per unit s, and the local one √(z - V)/h at the ends
    let k = ray.rot * sz / h;
    let i = C64::new(0.0, 1.0);
    let p_at = |s: f64| -> Result<C64> { Ok(ray.rot * (z - ray.v(pot, s)?).sqrt() / h) };
    // first-order WKB phase beyond the ends: p - k ≈ -V/(2h√z) per unit x
    let tau_r = tail_integral(pot, &ray, r, 1.0) / (2.0 * h * sz);
    let tau_l = tail_integral(pot, &ray, r, -1.0) / (2.0 * h * sz);
    let (p_r, p_l) = (p_at(r)?, p_at(-r)?);
    // right end: e^{±i(ks + τ_R)}; left end: e^{±i(ks - τ_L)}
    let right_phase = k * r + tau_r;
    let left_phase = -k * r - tau_l;

    // Right-going Jost solution from +R, decomposed at -R.
    let out_right = (i * right_phase).exp();
    let (u, du) = shoot(pot, &ray, z, h, r, out_right, i * p_r * out_right, -r)?;
    let fp = (i * left_phase).exp();
    let fm = (-i * left_phase).exp();
    let a = fm * (i * p_l * u + du) / (2.0 * i * p_l);
    let b = fp * (i * p_l * u - du) / (2.0 * i * p_l);
    let t_from_right = 1.0 / a;
    let r_left = b / a;

    // Left-going Jost solution from -R, decomposed at +R.
    let out_left = (-i * left_phase).exp();
    let (u, du) = shoot(pot, &ray, z, h, -r, out_left, -i * p_l * out_left, r)?;
    let gp = (i * right_phase).exp();
    let gm = (-i * right_phase).exp();
    let a2 = gp * (i * p_r * u - du) / (2.0 * i * p_r);
    let b2 = gm * (i * p_r * u + du) / (2.0 * i * p_r);
    let t_from_left = 1.0 / a2;
    let r_right = b2 / a2;

    let reciprocity_defect = (t_from_right - t_from_left).norm() / t_from_right.norm().max(1e-300);
    Ok(ScatteringData1D {
        z,
        h,
        transmission: 0.5 * (t_from_right + t_from_left),
        reflection_left: r_left,
        reflection_right: r_right,
        matching_radius: r,
        reciprocity_defect,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidueMethod {
    ContourQuadrature,
    PoleFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidueRecord {
    pub alpha: u32,
    pub h: f64,
    /// Resonance supplied by the eigensolver.
    pub z_alpha: C64,
    /// Pole located by the rational fit.
    pub z_pole: C64,
    pub residue: C64,
    pub method: ResidueMethod,
    /// The same residue by the other method.
    pub cross_check: C64,
    pub disagreement: f64,
    pub predicted: Option<C64>,
    /// Amplitude entry `(ω, ω')`.
    pub entry: (i8, i8),
}

fn circle(center: C64, radius: f64, m: usize) -> Vec<(C64, C64)> {
    (0..m)
        .map(|j| {
            let e = C64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / m as f64);
            (center + radius * e, e)
        })
        .collect()
}

/// Residue of `𝒜(+,+)`, the forward entry, at `z_alpha`.
pub fn amplitude_residue(pot: &Potential, h: f64, z_alpha: C64, method: ResidueMethod) -> Result<ResidueRecord> {
    amplitude_residue_entry(pot, h, z_alpha, method, (1, 1))
}

/// Residue of `𝒜(ω, ω')` at `z_alpha` by trapezoidal quadrature on the
/// circle of radius `h/10` (32 nodes) and by a rational fit on a circle of
/// radius `h/6`; the two must agree to 1%.
pub fn amplitude_residue_entry(
    pot: &Potential,
    h: f64,
    z_alpha: C64,
    method: ResidueMethod,
    entry: (i8, i8),
) -> Result<ResidueRecord> {
    let amp = |z: C64| transmission(pot, z, h).map(|s| s.amplitude(entry.0, entry.1));
    let radius = 0.1 * h;
    let nodes = circle(z_alpha, radius, 32);
    let values = nodes.iter().map(|(z, _)| amp(*z)).collect::<Result<Vec<_>>>()?;
    // (1/2πi)∮ f dζ ≈ (r/m) Σ f(ζ_j) e^{iθ_j}
    let contour: C64 = values.iter().zip(&nodes).map(|(v, (_, e))| v * e).sum::<C64>() * (radius / 32.0);
    let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if contour.norm() < 1e-3 * radius * peak || peak == 0.0 {
        return Err(Error::PoleMissed);
    }

    // 𝒜(ζ)(ζ - p) = Σ q_k (ζ - z_α)^k, linear in (p, q) after moving p𝒜 over.
    let fit_nodes = circle(z_alpha, h / 6.0, 24);
    let fit_values = fit_nodes.iter().map(|(z, _)| amp(*z)).collect::<Result<Vec<_>>>()?;
    let degree = 4;
    let rows = fit_nodes.len();
    let scale = h / 6.0;
    let a = Mat::from_fn(rows, degree + 2, |r, c| {
        let d = (fit_nodes[r].0 - z_alpha) / scale;
        if c == 0 {
            fit_values[r]
        } else {
            d.powi(c as i32 - 1)
        }
    });
    let rhs: Vec<C64> = fit_nodes
        .iter()
        .zip(&fit_values)
        .map(|((z, _), v)| v * (z - z_alpha) / scale)
        .collect();
    let (sol, _) = lstsq(&a, &rhs)?;
    let p = sol[0];
    let fitted: C64 = (0..=degree).map(|k| sol[k + 1] * p.powi(k as i32)).sum::<C64>() * scale;
    let z_pole = z_alpha + p * scale;
    if (z_pole - z_alpha).norm() > radius {
        return Err(Error::PoleMissed);
    }
    let disagreement = (fitted - contour).norm() / contour.norm();
    if disagreement > 0.01 {
        return Err(Error::MethodDisagreement(disagreement));
    }
    let (residue, cross_check) = match method {
        ResidueMethod::ContourQuadrature => (contour, fitted),
        ResidueMethod::PoleFit => (fitted, contour),
    };
    let alpha = barrier_data(pot)
        .map(|b| ((-z_alpha.im / (h * b.lambdas[0])) - 0.5).round().max(0.0) as u32)
        .unwrap_or(0);
    Ok(ResidueRecord {
        alpha,
        h,
        z_alpha,
        z_pole,
        residue,
        method,
        cross_check,
        disagreement,
        predicted: None,
        entry,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PredictedResidue {
    pub value: C64,
    /// `b⁻b⁺` without the `h^{-α+½} e^{i(S⁻+S⁺)/h}` factor.
    pub leading: C64,
    /// Set when `(g⁻g⁺)^α = 0`, so the leading coefficient vanishes.
    pub leading_zero: bool,
}

/// Leading term of the residue of `𝒜` at `z_α` for a pair of connecting
/// curves in one dimension:
/// `b⁻b⁺ h^{-α+½} e^{i(S⁻+S⁺)/h}` with
/// `b⁻b⁺ = e^{-iπ(α-½)/2}/(√(2π) α!) E0^0 (λ⁻λ⁺)^{3/2} λ^{α-½}
///        e^{-i(ν⁻+ν⁺)π/2} (D⁻D⁺)^{-½} (g⁻g⁺)^α |g⁻||g⁺|`.
pub fn predicted_residue(alpha: u32, geom: &ScatteringGeometry, lambdas: &[f64], h: f64) -> Result<PredictedResidue> {
    if lambdas.len() != 1 {
        return Err(Error::DimensionUnsupported(lambdas.len()));
    }
    let lambda = lambdas[0];
    let a = alpha as f64;
    let factorial: f64 = (1..=alpha).map(|k| k as f64).product();
    let gg = (geom.g_minus * geom.g_plus).powi(alpha as i32);
    let modulus = (geom.lambda_star_minus * geom.lambda_star_plus).powf(1.5) * lambda.powf(a - 0.5)
        / ((2.0 * PI).sqrt() * factorial)
        / (geom.d_minus * geom.d_plus).sqrt()
        * gg
        * geom.g_minus.abs()
        * geom.g_plus.abs();
    let phase = -0.5 * PI * (a - 0.5) - 0.5 * PI * (geom.nu_minus + geom.nu_plus) as f64;
    let leading = C64::from_polar(1.0, phase) * modulus;
    let value = leading * h.powf(-a + 0.5) * C64::from_polar(1.0, (geom.s_minus + geom.s_plus) / h);
    Ok(PredictedResidue {
        value,
        leading,
        leading_zero: gg == 0.0,
    })
}

/// Fit of `arg r_h = (S⁻+S⁺)/h + φ0` over a sweep in `h`: returns `φ0` and the
/// largest wrapped deviation.
pub fn phase_fit(hs: &[f64], residues: &[C64], action: f64) -> (f64, f64) {
    let reduced: Vec<C64> = hs
        .iter()
        .zip(residues)
        .map(|(h, r)| C64::from_polar(1.0, r.arg() - action / h))
        .collect();
    let phi0 = reduced.iter().sum::<C64>().arg();
    let dev = reduced
        .iter()
        .map(|c| (c * C64::from_polar(1.0, -phi0)).arg().abs())
        .fold(0.0, f64::max);
    (phi0, dev)
}

/// Closed-form transmission of `-h²u'' + sech²(x) u = zu`:
/// `T = Γ(1+s-ik)Γ(-s-ik) / (Γ(1-ik)Γ(-ik))` with `k = √z/h`,
/// `s = -½ + iκ`, `κ = √(1/h² - ¼)`.
pub fn poschl_teller_transmission(z: C64, h: f64) -> C64 {
    use crate::numerics::special::ln_gamma;
    let k = z.sqrt() / h;
    let kappa = (1.0 / (h * h) - 0.25).sqrt();
    let s = C64::new(-0.5, kappa);
    let i = C64::new(0.0, 1.0);
    (ln_gamma(1.0 + s - i * k) + ln_gamma(-s - i * k) - ln_gamma(1.0 - i * k) - ln_gamma(-i * k)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_line_is_transparent() {
        let zero = Potential::sech2(0.0);
        let s = transmission(&zero, C64::new(0.8, -0.01), 0.1).unwrap();
        assert!((s.transmission - 1.0).norm() < 1e-10);
        assert!(s.reflection_left.norm() < 1e-10 && s.reflection_right.norm() < 1e-10);
    }

    #[test]
    fn real_energy_conserves_flux() {
        let pot = Potential::sech2(1.0);
        for e in [0.7, 1.0, 1.4] {
            let s = transmission(&pot, C64::new(e, 0.0), 0.1).unwrap();
            assert!(s.flux_defect() < 1e-8, "{e}: {}", s.flux_defect());
            assert!(s.reciprocity_defect < 1e-8);
        }
    }

    #[test]
    fn matches_closed_form_barrier() {
        let pot = Potential::sech2(1.0);
        for (z, h) in [(C64::new(0.95, 0.0), 0.1), (C64::new(1.02, -0.06), 0.05), (C64::new(0.99, -0.012), 0.025)] {
            let s = transmission(&pot, z, h).unwrap();
            let exact = poschl_teller_transmission(z, h);
            let err = (s.transmission - exact).norm() / exact.norm();
            assert!(err < 1e-6, "z={z} h={h}: {} vs {exact} ({err:.2e})", s.transmission);
        }
    }

    /// `Res_z T` at `z_n = h²k_n²`, `k_n = κ - i(n+½)`, where `Γ(1+s-ik)` has
    /// its pole: `2h²k_n · i(-1)^n/n! · Γ(-s-ik_n)/(Γ(1-ik_n)Γ(-ik_n))`.
    fn closed_form_residue(n: u32, h: f64) -> (C64, C64) {
        use crate::numerics::special::ln_gamma;
        let kappa = (1.0 / (h * h) - 0.25).sqrt();
        let s = C64::new(-0.5, kappa);
        let i = C64::new(0.0, 1.0);
        let k = C64::new(kappa, -(n as f64 + 0.5));
        let fact: f64 = (1..=n).map(f64::from).product();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let rest = (ln_gamma(-s - i * k) - ln_gamma(1.0 - i * k) - ln_gamma(-i * k)).exp();
        (h * h * k * k, 2.0 * h * h * k * i * sign / fact * rest)
    }

    #[test]
    fn residues_match_closed_form_poles() {
        let pot = Potential::sech2(1.0);
        let h = 0.1;
        for n in [0u32, 1] {
            let (z, exact) = closed_form_residue(n, h);
            for method in [ResidueMethod::ContourQuadrature, ResidueMethod::PoleFit] {
                let rec = amplitude_residue(&pot, h, z, method).unwrap();
                let err = (rec.residue - exact).norm() / exact.norm();
                assert!(err < 1e-6, "n={n} {method:?}: {} vs {exact} ({err:.2e})", rec.residue);
                assert!((rec.z_pole - z).norm() < 1e-8, "{}", rec.z_pole);
            }
        }
    }

    #[test]
    fn large_imaginary_part_is_refused() {
        let pot = Potential::sech2(1.0);
        let err = transmission(&pot, C64::new(1.0, -0.6), 0.1).unwrap_err();
        assert!(matches!(err, Error::StiffnessFailure(_)));
    }

    #[test]
    fn short_matching_radius_is_refused() {
        let pot = Potential::sech2(1.0);
        let err = transmission_at(&pot, C64::new(1.0, 0.0), 0.1, Some(3.0)).unwrap_err();
        assert!(matches!(err, Error::MatchingRadiusTooSmall(_)));
    }
}
