//! Classical picture at the top of a Gaussian barrier: the outgoing
//! generating function, the two connecting curves and their scattering data.

use barriertop::geometry::{connecting_curve, eikonal_phase, scattering_geometry, Branch, Direction};
use barriertop::model::{barrier_data, Potential, PotentialSpec};

fn main() -> barriertop::Result<()> {
    let spec: PotentialSpec = serde_json::from_str(r#"{"family": "gaussian_barrier", "params": [1.0, 1.0]}"#)?;
    let pot = Potential::from_spec(&spec)?;
    let b = barrier_data(&pot)?;
    println!("apex {:?}, E0 {}, lambda {:?}", b.apex, b.e0, b.lambdas);
    let phi = eikonal_phase(&b, &pot, Branch::Outgoing)?;
    for x in [-1.5, -0.5, 0.5, 1.5] {
        println!("  phi+({x:+}) = {:+.6}, eikonal residual {:.1e}", phi.value(x)?, phi.eikonal_residual(x)?);
    }
    let stable = connecting_curve(&pot, &b, Direction::Stable, -1.0, 1e-8, 0.02, 1e-13)?;
    let unstable = connecting_curve(&pot, &b, Direction::Unstable, 1.0, 1e-8, 0.02, 1e-13)?;
    println!(
        "stable curve: {} samples, energy drift {:.1e}; unstable curve: {} samples, energy drift {:.1e}",
        stable.times.len(),
        stable.energy_drift,
        unstable.times.len(),
        unstable.energy_drift
    );
    let geom = scattering_geometry(&stable, &unstable, &pot, b.e0)?;
    println!("{}", serde_json::to_string_pretty(&geom)?);
    let csv = unstable.to_csv(&pot);
    println!("first rows of the unstable curve:\n{}", csv.lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}
