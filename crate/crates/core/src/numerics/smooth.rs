//! C^∞ step and bump functions built from `exp(-1/t)`, with exact derivatives
//! up to third order carried by a small jet type.

use std::ops::{Add, Div, Mul, Sub};

/// Value and first three derivatives of a scalar function of one variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet(pub [f64; 4]);

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet([v, 0.0, 0.0, 0.0])
    }

    pub fn variable(v: f64) -> Self {
        Jet([v, 1.0, 0.0, 0.0])
    }

    pub fn value(self) -> f64 {
        self.0[0]
    }

    pub fn exp(self) -> Self {
        let [u, u1, u2, u3] = self.0;
        let e = u.exp();
        Jet([
            e,
            e * u1,
            e * (u2 + u1 * u1),
            e * (u3 + 3.0 * u1 * u2 + u1 * u1 * u1),
        ])
    }

    pub fn recip(self) -> Self {
        let [u, u1, u2, u3] = self.0;
        let r = 1.0 / u;
        let r2 = r * r;
        Jet([
            r,
            -u1 * r2,
            (2.0 * u1 * u1 * r - u2) * r2,
            (-u3 + 6.0 * u1 * u2 * r - 6.0 * u1 * u1 * u1 * r2) * r2,
        ])
    }

    pub fn scale(self, s: f64) -> Self {
        Jet(self.0.map(|v| v * s))
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let [a0, a1, a2, a3] = self.0;
        let [b0, b1, b2, b3] = o.0;
        Jet([
            a0 * b0,
            a1 * b0 + a0 * b1,
            a2 * b0 + 2.0 * a1 * b1 + a0 * b2,
            a3 * b0 + 3.0 * a2 * b1 + 3.0 * a1 * b2 + a0 * b3,
        ])
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

/// `exp(-1/t)` for `t > 0`, zero otherwise.
fn flat(t: Jet) -> Jet {
    if t.value() <= 0.0 {
        Jet::constant(0.0)
    } else {
        (t.recip().scale(-1.0)).exp()
    }
}

/// Smooth step: 0 for `u ≤ 0`, 1 for `u ≥ 1`.
pub fn step_jet(u: Jet) -> Jet {
    let v = u.value();
    if v <= 0.0 {
        return Jet::constant(0.0);
    }
    if v >= 1.0 {
        return Jet::constant(1.0);
    }
    let a = flat(u);
    let b = flat(Jet::constant(1.0) - u);
    a / (a + b)
}

pub fn step(u: f64) -> f64 {
    step_jet(Jet::constant(u)).value()
}

/// Bump equal to 1 on `|x - center| ≤ plateau` and 0 for `|x - center| ≥ support`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BumpSpec {
    pub center: f64,
    pub plateau: f64,
    pub support: f64,
}

impl BumpSpec {
    pub fn new(center: f64, plateau: f64, support: f64) -> Self {
        assert!(support > plateau && plateau >= 0.0, "bump needs 0 <= plateau < support");
        Self {
            center,
            plateau,
            support,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let d = (x - self.center).abs();
        step((self.support - d) / (self.support - self.plateau))
    }
}
