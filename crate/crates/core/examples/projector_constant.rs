//! Rank-one projector at the first two barrier-top resonances of a sech²
//! barrier and the constant in `Π = c(·, f̄)f` against its closed form.

use barriertop::geometry::{eikonal_phase, Branch};
use barriertop::model::{barrier_data, Potential};
use barriertop::operator::{assemble_scaled, find_resonances, riesz_projector, Discretization, Grid1D, Scaling, SearchOptions};
use barriertop::lattice::pseudo_resonances;
use barriertop::projection::{extract_constant, extract_state, verify_outgoing};
use std::time::Instant;

fn main() -> barriertop::Result<()> {
    let pot = Potential::sech2(1.0);
    let b = barrier_data(&pot)?;
    let phi = eikonal_phase(&b, &pot, Branch::Outgoing)?;
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let h = args.first().copied().unwrap_or(0.02);
    let points = args.get(1).copied().unwrap_or(600.0) as usize;
    let t0 = Instant::now();
    let grid = Grid1D::new(7.0, points)?;
    let op = assemble_scaled(&pot, &grid, h, 0.5, Scaling::Exterior { r0: 3.5, width: 3.0 }, Discretization::Fourier)?;
    let seeds = pseudo_resonances(&b, h, 3.5)?;
    let hits = find_resonances(&op, &seeds, &SearchOptions::for_step(h))?;
    for hit in &hits {
        let alpha = hit.alpha[0];
        let proj = riesz_projector(&op, hit.z, 0.5 * h, 24)?;
        let state = extract_state(&proj, &op, &phi, alpha)?;
        let c = extract_constant(&proj, &op, &state, &b.lambdas)?;
        let out = verify_outgoing(&state.x, &state.samples, &pot, 0.0, h, state.z, 2.5)?;
        println!(
            "alpha={alpha} z={:.8} rank_gap={:.2e} idem={:.2e} sym={:.2e} residual={:.2e} |c|ratio={:.4} phase_gap={:+.4} consistency={:.2e} incoming={:.2e}",
            hit.z, proj.rank_gap, proj.idempotency_defect, proj.symmetry_defect, state.residual, c.modulus_ratio, c.phase_gap, c.consistency, out.incoming_fraction[0].max(out.incoming_fraction[1])
        );
    }
    println!("elapsed {:.1}s", t0.elapsed().as_secs_f64());
    Ok(())
}
