use super::{decay_radius, fit_expansion, Direction, Trajectory};
use crate::lattice::mu_sequence;
use crate::model::{barrier_data, Potential};
use crate::numerics::quad;
use crate::{Error, Result};
use serde::Serialize;

/// Scattering data of a pair of pinned connecting curves (one dimension).
#[derive(Clone, Debug, Serialize)]
pub struct ScatteringGeometry {
    pub s_minus: f64,
    pub s_plus: f64,
    pub d_minus: f64,
    pub d_plus: f64,
    pub nu_minus: i32,
    pub nu_plus: i32,
    /// Residual `x - 2√E0 ω t` at the far end of each curve.
    pub z_impact: [f64; 2],
    pub omega_in: f64,
    pub omega_out: f64,
    pub g_minus: f64,
    pub g_plus: f64,
    pub lambda_star_minus: f64,
    pub lambda_star_plus: f64,
    /// Estimated contribution of the action integrand beyond the decay radius.
    pub action_tail: f64,
}

/// `∫ x V'(x) ds` along the branch of `{p = E0}` between the apex and
/// `far_side · ∞`, written as an integral in `x` with `ds = dx / (2|ξ|)`.
/// Returns the action and a tail estimate.
pub fn action(pot: &Potential, e0: f64, apex: f64, far_side: f64) -> Result<(f64, f64)> {
    let barrier = barrier_data(pot)?;
    let r = decay_radius(pot, &barrier)?;
    let f = |u: f64| {
        let x = apex + far_side * u;
        let d = pot.depth(e0, &[x]);
        far_side * u * pot.gradient(&[x])[0] / (2.0 * d.sqrt())
    };
    let mut s = 0.0;
    let mut a = 0.0;
    // split at unit intervals so the adaptive rule resolves the apex region
    while a < r {
        let b = (a + 1.0).min(r);
        s += quad::integrate(f, a, b, 1e-15, 1e-13);
        a = b;
    }
    let tail = quad::integrate(f, r, 2.0 * r, 1e-30, 1e-6).abs();
    if tail > 1e-8 {
        return Err(Error::TailDivergence(tail));
    }
    Ok((s, tail))
}

/// `|ẋ(t)| e^{±λt}` along a pinned curve, whose limit at the fixed point is
/// the Maslov determinant in one dimension.
pub fn maslov_limit_sequence(traj: &Trajectory, lambda: f64) -> Vec<(f64, f64)> {
    let sgn = match traj.direction {
        Some(Direction::Unstable) => -1.0,
        _ => 1.0,
    };
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, p)| (t, (2.0 * p.xi[0]).abs() * (sgn * lambda * t).exp()))
        .collect()
}

/// Sign changes of `ẋ` along the curve; each marks a turning point of the
/// spatial projection.
fn caustic_count(traj: &Trajectory) -> i32 {
    let mut count = 0;
    let mut last = 0.0f64;
    for p in &traj.states {
        let v = p.xi[0];
        if v != 0.0 {
            if last != 0.0 && v.signum() != last.signum() {
                count += 1;
            }
            last = v;
        }
    }
    count
}

pub fn scattering_geometry(
    stable: &Trajectory,
    unstable: &Trajectory,
    pot: &Potential,
    e0: f64,
) -> Result<ScatteringGeometry> {
    if pot.dimension != 1 {
        return Err(Error::DimensionUnsupported(pot.dimension));
    }
    if !pot.is_short_range() {
        return Err(Error::LongRangeUnsupported(pot.decay_exponent));
    }
    if stable.direction != Some(Direction::Stable) || unstable.direction != Some(Direction::Unstable) {
        return Err(Error::InvalidPotential(
            "scattering geometry needs one stable and one unstable curve".into(),
        ));
    }
    let barrier = barrier_data(pot)?;
    let apex = barrier.apex[0];
    let lambda = barrier.lambdas[0];
    let mu = mu_sequence(&[lambda], 6.0 * lambda);
    let fit_minus = fit_expansion(stable, &mu, &[lambda])?;
    let fit_plus = fit_expansion(unstable, &mu, &[lambda])?;
    let g_minus = fit_minus.g_scalar(lambda).unwrap_or(0.0);
    let g_plus = fit_plus.g_scalar(lambda).unwrap_or(0.0);
    let ls_minus = fit_minus.lambda_star.unwrap_or(lambda);
    let ls_plus = fit_plus.lambda_star.unwrap_or(lambda);
    let side = |t: &Trajectory| {
        let far = t.states.last().expect("non-empty trajectory").x[0];
        (far - apex).signum()
    };
    let (side_in, side_out) = (side(stable), side(unstable));
    let (s_minus, tail_m) = action(pot, e0, apex, side_in)?;
    let (s_plus, tail_p) = action(pot, e0, apex, side_out)?;
    let c = 2.0 * e0.sqrt();
    let omega_in = -side_in;
    let omega_out = side_out;
    let impact = |t: &Trajectory, omega: f64| {
        let k = t.times.len() - 1;
        t.states[k].x[0] - apex - c * omega * t.times[k]
    };
    Ok(ScatteringGeometry {
        s_minus,
        s_plus,
        d_minus: ls_minus * g_minus.abs(),
        d_plus: ls_plus * g_plus.abs(),
        nu_minus: caustic_count(stable),
        nu_plus: caustic_count(unstable),
        z_impact: [impact(stable, omega_in), impact(unstable, omega_out)],
        omega_in,
        omega_out,
        g_minus,
        g_plus,
        lambda_star_minus: ls_minus,
        lambda_star_plus: ls_plus,
        action_tail: tail_m.max(tail_p),
    })
}

#[cfg(test)]
mod tests {
    use super::super::connecting_curve;
    use super::*;

    fn curves(pot: &Potential, dt: f64) -> (Trajectory, Trajectory) {
        let b = barrier_data(pot).unwrap();
        (
            connecting_curve(pot, &b, Direction::Stable, -1.0, 1e-8, dt, 1e-13).unwrap(),
            connecting_curve(pot, &b, Direction::Unstable, 1.0, 1e-8, dt, 1e-13).unwrap(),
        )
    }

    #[test]
    fn sech2_geometry_matches_closed_form() {
        let pot = Potential::sech2(1.0);
        let (st, un) = curves(&pot, 0.02);
        let g = scattering_geometry(&st, &un, &pot, 1.0).unwrap();
        let ln2 = 2f64.ln();
        assert!((g.s_minus + ln2).abs() < 1e-10, "{}", g.s_minus);
        assert!((g.s_minus - g.s_plus).abs() < 1e-10);
        assert!((g.g_minus + 0.5).abs() < 1e-7);
        assert!((g.g_plus - 0.5).abs() < 1e-7);
        assert!((g.d_minus - 1.0).abs() < 1e-6);
        assert!((g.d_plus - 1.0).abs() < 1e-6);
        assert_eq!((g.nu_minus, g.nu_plus), (0, 0));
        assert!(g.z_impact.iter().all(|z| z.abs() < 1e-6));
    }

    #[test]
    fn action_along_trajectory_agrees() {
        let pot = Potential::gaussian(1.0, 1.0, 1);
        let (st, _) = curves(&pot, 0.01);
        // Simpson rule on the sampled curve, an independent route to S⁻
        let f: Vec<f64> = st.states.iter().map(|p| p.x[0] * pot.gradient(&p.x)[0]).collect();
        let n = f.len() - 1;
        let h = st.times[1] - st.times[0];
        let m = n - n % 2;
        let mut s = f[0] + f[m];
        for (i, v) in f.iter().enumerate().take(m).skip(1) {
            s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        let along = -s * h / 3.0;
        let (direct, _) = action(&pot, 1.0, 0.0, -1.0).unwrap();
        // the trajectory stops 1e-8 from the apex, where the integrand is O(1e-16)
        assert!((along - direct).abs() < 1e-7, "{along} vs {direct}");
    }

    #[test]
    fn maslov_sequence_converges_to_fitted_value() {
        let pot = Potential::gaussian(1.0, 1.0, 1);
        let (st, un) = curves(&pot, 0.02);
        let g = scattering_geometry(&st, &un, &pot, 1.0).unwrap();
        let lambda = barrier_data(&pot).unwrap().lambdas[0];
        let seq = maslov_limit_sequence(&un, lambda);
        let near = seq.first().unwrap().1;
        assert!((near - g.d_plus).abs() < 1e-6 * g.d_plus);
        assert!((g.s_minus - g.s_plus).abs() < 1e-8);
    }

    #[test]
    fn geometry_is_window_independent() {
        let pot = Potential::sech2(1.0);
        let b = barrier_data(&pot).unwrap();
        let (st, un) = curves(&pot, 0.02);
        let a = scattering_geometry(&st, &un, &pot, 1.0).unwrap();
        let st2 = connecting_curve(&pot, &b, Direction::Stable, -1.0, 3e-8, 0.03, 1e-13).unwrap();
        let un2 = connecting_curve(&pot, &b, Direction::Unstable, 1.0, 3e-8, 0.03, 1e-13).unwrap();
        let c = scattering_geometry(&st2, &un2, &pot, 1.0).unwrap();
        assert!((a.g_minus - c.g_minus).abs() < 1e-8);
        assert!((a.d_plus - c.d_plus).abs() < 1e-8);
    }

    #[test]
    fn quadratic_model_is_long_range() {
        let pot = Potential::quadratic(1.0, &[2.0], vec![]);
        assert!(matches!(action(&pot, 1.0, 0.0, 1.0), Err(Error::LongRangeUnsupported(_))));
    }
}
