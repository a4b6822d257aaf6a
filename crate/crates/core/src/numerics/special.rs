//! Complex log-gamma (Lanczos, g = 7) with reflection for `Re z < ½`.

use crate::C64;
use std::f64::consts::PI;

const G: f64 = 7.0;
const COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(z)` on a branch continuous away from the non-positive real axis.
pub fn ln_gamma(z: C64) -> C64 {
    if z.re < 0.5 {
        // Γ(z)Γ(1-z) = π / sin(πz)
        let s = (C64::new(PI, 0.0) * z).sin();
        return C64::new(PI.ln(), 0.0) - s.ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = C64::new(COEF[0], 0.0);
    for (i, c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    C64::new(0.5 * (2.0 * PI).ln(), 0.0) + (z + 0.5) * t.ln() - t + x.ln()
}

pub fn gamma(z: C64) -> C64 {
    ln_gamma(z).exp()
}
