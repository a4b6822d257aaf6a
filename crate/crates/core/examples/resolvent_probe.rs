//! Resolvent norm of the scaled sech² operator over a strip below the barrier
//! top, and the exponent `K` in `sup ‖R(z)‖ Π|z - z_α| = h^{-K}`.

use barriertop::lattice::pseudo_resonances;
use barriertop::model::{barrier_data, Potential};
use barriertop::operator::{assemble_scaled, find_resonances, fit_exponent, resolvent_scan, Discretization, Grid1D, Scaling, SearchOptions};
use barriertop::C64;

fn main() -> barriertop::Result<()> {
    let pot = Potential::sech2(1.0);
    let b = barrier_data(&pot)?;
    let c = 1.5;
    for h in [0.1f64, 0.05] {
        let grid = Grid1D::new(7.0, (14.0 / (0.4 * h)).ceil() as usize + 1)?;
        let op = assemble_scaled(&pot, &grid, h, 0.5, Scaling::Exterior { r0: 3.5, width: 3.0 }, Discretization::Fourier)?;
        let hits = find_resonances(&op, &pseudo_resonances(&b, h, c)?, &SearchOptions::for_step(h))?;
        let zs: Vec<C64> = hits.iter().map(|x| x.z).collect();
        let scan = resolvent_scan(&op, (0.8, 1.2), (-c * h, 0.0), 20, 10, &zs);
        let top = scan.iter().max_by(|a, b| a.bound_product.total_cmp(&b.bound_product)).expect("non-empty scan");
        println!(
            "h={h}: sup bound product {:.3e} at {:.3}{:+.4}i, K_fit {:.3}; largest norm {:.3e}",
            top.bound_product,
            top.re,
            top.im,
            fit_exponent(top.bound_product, h),
            scan.iter().map(|p| p.norm).fold(0.0, f64::max)
        );
    }
    Ok(())
}
