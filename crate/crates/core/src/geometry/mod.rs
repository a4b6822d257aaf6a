//! Classical geometry of the barrier top: eikonal phases, Hamiltonian
//! trajectories, their expandible asymptotics at the fixed point and the
//! scattering data of the curves connecting it to infinity.

mod connection;
mod expansion;

pub use connection::{action, maslov_limit_sequence, scattering_geometry, ScatteringGeometry};
pub use expansion::{fit_expansion, structural_degrees, AsymptoticExpansion, ExpansionTerm};

use crate::model::{hamiltonian_field, BarrierData, PhasePoint, Potential};
use crate::numerics::ode::Dopri5;
use crate::numerics::quad;
use crate::{Error, Result};
use serde::Serialize;

/// Which of the two generating functions `φ_±` (`φ_- = -φ_+`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Outgoing,
    Incoming,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Outgoing => 1.0,
            Branch::Incoming => -1.0,
        }
    }
}

/// Solution of `(φ')² + V = E0` through the apex whose graph is the outgoing
/// (or incoming) manifold.
#[derive(Clone, Debug)]
pub struct GeneratingFunction {
    pub branch: Branch,
    pub e0: f64,
    pub apex: f64,
    pub lambda: f64,
    pot: Potential,
}

impl GeneratingFunction {
    fn check(&self, x: f64) -> Result<f64> {
        let d = self.pot.depth(self.e0, &[x]);
        if d < 0.0 {
            return Err(Error::InvalidPotential(format!(
                "x = {x} is outside the classically allowed region {{V < E0}}"
            )));
        }
        Ok(d)
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        let d = self.check(x)?;
        Ok(self.branch.sign() * (x - self.apex).signum() * d.sqrt())
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let s = x - self.apex;
        if s == 0.0 {
            return Ok(0.0);
        }
        let (e0, a) = (self.e0, self.apex);
        let f = |u: f64| self.pot.depth(e0, &[a + u]).max(0.0).sqrt();
        let v = if s > 0.0 {
            quad::integrate(f, 0.0, s, 1e-15, 1e-13)
        } else {
            quad::integrate(f, s, 0.0, 1e-15, 1e-13)
        };
        Ok(self.branch.sign() * v)
    }

    /// `φ''` at the apex, `±λ/2`.
    pub fn apex_curvature(&self) -> f64 {
        self.branch.sign() * self.lambda / 2.0
    }

    /// `(φ')² + V - E0`.
    pub fn eikonal_residual(&self, x: f64) -> Result<f64> {
        let d = self.derivative(x)?;
        Ok(d * d + self.pot.eval_real(&[x]) - self.e0)
    }
}

pub fn eikonal_phase(barrier: &BarrierData, pot: &Potential, branch: Branch) -> Result<GeneratingFunction> {
    if pot.dimension != 1 {
        return Err(Error::DimensionUnsupported(pot.dimension));
    }
    Ok(GeneratingFunction {
        branch,
        e0: barrier.e0,
        apex: barrier.apex[0],
        lambda: barrier.lambdas[0],
        pot: pot.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Tends to the fixed point as `t → +∞`.
    Stable,
    /// Tends to the fixed point as `t → -∞`.
    Unstable,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub energy: f64,
    pub direction: Option<Direction>,
    /// Time assigned to the starting point by the free-asymptote pinning, or
    /// the plain start time for unpinned runs.
    pub anchor: f64,
    /// `sup |p(γ(t)) - p(γ(0))|`.
    pub energy_drift: f64,
}

impl Trajectory {
    pub fn shifted(&self, dt: f64) -> Self {
        let mut t = self.clone();
        t.times.iter_mut().for_each(|s| *s += dt);
        t.anchor += dt;
        t
    }

    /// CSV rows `t,x,xi,energy_drift` (one-dimensional runs).
    pub fn to_csv(&self, pot: &Potential) -> String {
        let mut s = String::from("t,x,xi,energy_drift\n");
        for (t, p) in self.times.iter().zip(&self.states) {
            let e = p.xi.iter().map(|v| v * v).sum::<f64>() + pot.eval_real(&p.x);
            s.push_str(&format!("{t:.12e},{:.15e},{:.15e},{:.3e}\n", p.x[0], p.xi[0], e - self.energy));
        }
        s
    }
}

fn energy(pot: &Potential, p: &PhasePoint) -> f64 {
    p.xi.iter().map(|v| v * v).sum::<f64>() + pot.eval_real(&p.x)
}

/// Integrates `H_p` from `start` at `times[0]` and samples it at `times`
/// (monotone, either direction). The tolerance is tightened until the energy
/// drift is below `tol`.
pub fn flow(pot: &Potential, start: &PhasePoint, times: &[f64], tol: f64) -> Result<Trajectory> {
    if times.is_empty() || !(tol > 0.0) {
        return Err(Error::StepFailure(0.0));
    }
    let n = pot.dimension;
    let e_start = energy(pot, start);
    let mut rtol = (tol * 1e-3).max(1e-14);
    for _ in 0..4 {
        let solver = Dopri5::new(rtol, rtol * 1e-6);
        let ys = solver.integrate(
            |_, y, dy| {
                let f = hamiltonian_field(pot, &PhasePoint::from_slice(y));
                dy.copy_from_slice(&f);
            },
            times[0],
            &start.to_vec(),
            times,
        )?;
        let states: Vec<PhasePoint> = ys.iter().map(|y| PhasePoint::from_slice(y)).collect();
        let drift = states.iter().map(|p| (energy(pot, p) - e_start).abs()).fold(0.0, f64::max);
        if drift <= tol || rtol <= 1e-14 {
            debug_assert_eq!(states[0].x.len(), n);
            return Ok(Trajectory {
                times: times.to_vec(),
                states,
                energy: e_start,
                direction: None,
                anchor: times[0],
                energy_drift: drift,
            });
        }
        rtol = (rtol * 1e-2).max(1e-14);
    }
    Err(Error::StepFailure(rtol))
}

/// Radius beyond which `|V| ≤ 1e-16 E0`, found by doubling.
pub fn decay_radius(pot: &Potential, barrier: &BarrierData) -> Result<f64> {
    if !pot.is_short_range() {
        return Err(Error::LongRangeUnsupported(pot.decay_exponent));
    }
    let a = barrier.apex[0];
    let mut r: f64 = 1.0;
    while r < 1e4 {
        if pot.eval_real(&[a + r]).abs() <= 1e-16 * barrier.e0 && pot.eval_real(&[a - r]).abs() <= 1e-16 * barrier.e0 {
            return Ok(r);
        }
        r *= 1.25;
    }
    Err(Error::TailDivergence(r))
}

/// `∫ [1/(2√(E0-V)) - 1/(2√E0)] ds` between `x` (on the `far_side` of the
/// apex) and infinity on that side.
fn pinning_integral(pot: &Potential, barrier: &BarrierData, x: f64, far_side: f64) -> Result<f64> {
    let e0 = barrier.e0;
    let a = barrier.apex[0];
    let g = |s: f64| {
        let d = pot.depth(e0, &[s]);
        0.5 / d.sqrt() - 0.5 / e0.sqrt()
    };
    let u0 = far_side * (x - a);
    if u0 <= 0.0 {
        return Err(Error::InvalidPotential("pinning point must lie on the far side of the apex".into()));
    }
    let r = decay_radius(pot, barrier)?;
    // logarithmic substitution absorbs the 1/u behaviour at the apex
    let mut total = 0.0;
    if u0 < 1.0 {
        total += quad::integrate(
            |v: f64| {
                let u = v.exp();
                g(a + far_side * u) * u
            },
            u0.ln(),
            0.0,
            1e-14,
            1e-13,
        );
    }
    let lo = u0.max(1.0);
    if lo < r {
        total += quad::integrate(|u: f64| g(a + far_side * u), lo, r, 1e-14, 1e-13);
    }
    Ok(total)
}

/// Curve of the transmission geometry through the apex, sampled every `dt`
/// from `delta` away from the apex out to the decay radius. The stable curve
/// arrives from `far_side · ∞`, the unstable one leaves towards it; the time
/// origin is fixed by `x(t) - 2√E0 ω t → 0` at the far end.
pub fn connecting_curve(
    pot: &Potential,
    barrier: &BarrierData,
    direction: Direction,
    far_side: f64,
    delta: f64,
    dt: f64,
    tol: f64,
) -> Result<Trajectory> {
    if pot.dimension != 1 {
        return Err(Error::DimensionUnsupported(pot.dimension));
    }
    let e0 = barrier.e0;
    let a = barrier.apex[0];
    let x0 = a + far_side * delta;
    let branch = match direction {
        Direction::Stable => Branch::Incoming,
        Direction::Unstable => Branch::Outgoing,
    };
    let phase = eikonal_phase(barrier, pot, branch)?;
    let xi0 = phase.derivative(x0)?;
    let r = decay_radius(pot, barrier)?;
    let c = 2.0 * e0.sqrt();
    let pin = pinning_integral(pot, barrier, x0, far_side)?;
    let far_pin = pinning_integral(pot, barrier, a + far_side * r, far_side)?;
    // t(x) along the curve, measured with the free-asymptote origin
    let (t0, t_far) = match direction {
        Direction::Stable => (-far_side * (x0 - a) / c + pin, -r / c + far_pin),
        Direction::Unstable => (far_side * (x0 - a) / c - pin, r / c - far_pin),
    };
    let steps = ((t_far - t0).abs() / dt).ceil().max(2.0) as usize;
    let times: Vec<f64> = (0..=steps).map(|k| t0 + (t_far - t0) * k as f64 / steps as f64).collect();
    let mut traj = flow(pot, &PhasePoint::new(vec![x0], vec![xi0]), &times, tol)?;
    traj.direction = Some(direction);
    traj.anchor = t0;
    traj.energy = e0;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::barrier_data;

    #[test]
    fn quadratic_phase_is_exact() {
        let pot = Potential::quadratic(1.0, &[2.0], vec![]);
        let b = barrier_data(&pot).unwrap();
        let phi = eikonal_phase(&b, &pot, Branch::Outgoing).unwrap();
        for &x in &[-0.7, 0.1, 0.5] {
            assert!((phi.value(x).unwrap() - x * x / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn sech2_phase_is_log_cosh() {
        let pot = Potential::sech2(1.0);
        let b = barrier_data(&pot).unwrap();
        let plus = eikonal_phase(&b, &pot, Branch::Outgoing).unwrap();
        let minus = eikonal_phase(&b, &pot, Branch::Incoming).unwrap();
        assert_eq!(plus.apex_curvature(), 1.0);
        for &x in &[-3.0, -0.2, 0.0, 1e-4, 0.9, 4.0] {
            let v = plus.value(x).unwrap();
            assert!((v - x.cosh().ln()).abs() < 1e-12, "x={x}");
            assert_eq!(v, -minus.value(x).unwrap());
            assert!(plus.eikonal_residual(x).unwrap().abs() < 1e-10);
        }
        assert_eq!(plus.value(0.0).unwrap(), 0.0);
    }

    #[test]
    fn two_dimensional_phase_is_unsupported() {
        let pot = Potential::gaussian(1.0, 1.0, 2);
        let b = barrier_data(&pot).unwrap();
        assert!(matches!(eikonal_phase(&b, &pot, Branch::Outgoing), Err(Error::DimensionUnsupported(2))));
    }

    #[test]
    fn free_flow() {
        let pot = Potential::gaussian(0.0, 1.0, 1);
        let t = flow(&pot, &PhasePoint::new(vec![0.0], vec![1.0]), &[0.0, 1.0, 2.0], 1e-10).unwrap();
        assert!((t.states[2].x[0] - 4.0).abs() < 1e-10);
        assert!((t.states[2].xi[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_flow_on_stable_manifold() {
        let pot = Potential::quadratic(1.0, &[2.0], vec![]);
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.25).collect();
        let t = flow(&pot, &PhasePoint::new(vec![0.3], vec![-0.3]), &times, 1e-11).unwrap();
        for (s, p) in times.iter().zip(&t.states) {
            assert!((p.x[0] - 0.3 * (-2.0 * s).exp()).abs() < 1e-10);
        }
        assert!(t.energy_drift <= 1e-11);
    }

    #[test]
    fn pinned_sech2_curves_are_explicit() {
        let pot = Potential::sech2(1.0);
        let b = barrier_data(&pot).unwrap();
        let st = connecting_curve(&pot, &b, Direction::Stable, -1.0, 1e-8, 0.05, 1e-12).unwrap();
        for (t, p) in st.times.iter().zip(&st.states) {
            let exact = -((-2.0 * t).exp() / 2.0).asinh();
            assert!((p.x[0] - exact).abs() < 1e-8 * (1.0 + exact.abs()), "t={t}");
        }
        let un = connecting_curve(&pot, &b, Direction::Unstable, 1.0, 1e-8, 0.05, 1e-12).unwrap();
        for (t, p) in un.times.iter().zip(&un.states) {
            let exact = ((2.0 * t).exp() / 2.0).asinh();
            assert!((p.x[0] - exact).abs() < 1e-8 * (1.0 + exact.abs()), "t={t}");
        }
        assert!(st.energy_drift < 1e-10);
    }

    #[test]
    fn stable_curve_is_graph_of_incoming_phase() {
        let pot = Potential::gaussian(1.0, 1.0, 1);
        let b = barrier_data(&pot).unwrap();
        let phi = eikonal_phase(&b, &pot, Branch::Incoming).unwrap();
        let st = connecting_curve(&pot, &b, Direction::Stable, -1.0, 1e-8, 0.05, 1e-12).unwrap();
        for p in st.states.iter().filter(|p| p.x[0].abs() <= 1e-3) {
            assert!((p.xi[0] - phi.derivative(p.x[0]).unwrap()).abs() <= 1e-6);
        }
    }
}
