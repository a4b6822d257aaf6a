//! Cut-off Schrödinger evolution on a sech² barrier compared with the sum
//! over resonances in the strip of depth `μh`.

use barriertop::dynamics::{compare_expansion, PropagatorRun};
use barriertop::model::Potential;
use std::time::Instant;

fn main() -> barriertop::Result<()> {
    let h: f64 = 0.05;
    let lh = h.ln().abs();
    let times: Vec<f64> = (1..=160).map(|k| k as f64 * 8.0 * lh / 160.0).collect();
    let pot = Potential::sech2(1.0);
    let mut run = PropagatorRun::standard(&pot, h, 3.0, times)?;
    if let Some(l) = std::env::args().nth(1).and_then(|a| a.parse::<f64>().ok()) {
        run.grid = barriertop::operator::Grid1D::new(l, (2.0 * l / 0.05) as usize + 1)?;
        run.test_states = barriertop::dynamics::coherent_states(&run.grid, h);
    }
    let start = Instant::now();
    let cmp = compare_expansion(&pot, &run);
    println!("grid {:?}, elapsed {:.1}s", run.grid, start.elapsed().as_secs_f64());
    let cmp = match cmp {
        Ok(c) => c,
        Err(e) => {
            println!("{e}");
            return Ok(());
        }
    };
    for w in &cmp.warnings {
        println!("warning: {w}");
    }
    println!("resonances {:?}", cmp.resonances);
    println!(
        "fitted mu {:?}, K {:?}, window {:?}, first excluded rate {:?}, onset {:?}",
        cmp.fitted_mu, cmp.fitted_k, cmp.fit_window, cmp.first_excluded_rate, cmp.onset_time
    );
    println!("error at 0.2|ln h|: {:.3e}", cmp.error_at(0.2 * lh).unwrap_or(f64::NAN));
    println!("max error on [3|ln h|, 8|ln h|]: {:.3e}", cmp.max_error_in(3.0 * lh, 8.0 * lh));
    for e in cmp.error_curve.iter().step_by(10) {
        println!("t={:7.3} err={:.3e} lhs={:.3e} sum={:.3e}", e.t, e.error, e.lhs_norm, e.sum_norm);
    }
    Ok(())
}
