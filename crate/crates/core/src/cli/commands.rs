use super::config::RunConfig;
use super::manifest::ArtifactSink;
use crate::curves::{formal_curve, linearize, picard_refine, required_taylor_order, verify_prescription, PicardOptions};
use crate::dynamics::{compare_expansion, PropagatorRun};
use crate::geometry::{connecting_curve, eikonal_phase, scattering_geometry, Branch, Direction};
use crate::lattice::{lattice_json, pseudo_resonances, PseudoResonance};
use crate::model::{taylor_field, BarrierData, Family, Potential};
use crate::numerics::linear_fit;
use crate::operator::{
    assemble_scaled, dense_eigenvalues, find_resonances, fit_exponent, resolvent_scan, riesz_projector, ResonanceHit, ScaledOperator,
    SearchOptions,
};
use crate::projection::{extract_constant, extract_state, verify_outgoing};
use crate::scattering::{amplitude_residue, phase_fit, poschl_teller_transmission, predicted_residue, transmission, ResidueMethod};
use crate::{Error, Result, C64};
use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;
use std::time::Instant;

/// Largest distance between a shift-invert resonance and the nearest
/// eigenvalue of the dense solve that the oracle accepts.
pub const ORACLE_TOLERANCE: f64 = 1e-8;

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub pot: Potential,
    pub barrier: BarrierData,
    pub oracle: bool,
    pub sink: ArtifactSink,
    /// Where the run currently is, used to give failures context.
    pub stage: String,
}

fn tag(h: f64) -> String {
    format!("h{h}")
}

fn alpha_label(alpha: &[u32]) -> String {
    alpha.iter().map(u32::to_string).collect::<Vec<_>>().join(";")
}

struct Solved {
    op: ScaledOperator,
    seeds: Vec<PseudoResonance>,
    hits: Vec<ResonanceHit>,
}

impl Context<'_> {
    fn enter(&mut self, stage: String) {
        self.stage = stage;
    }

    fn selected(&self, alpha: u32) -> bool {
        self.config.options.alphas.is_empty() || self.config.options.alphas.contains(&alpha)
    }

    fn solve(&mut self, h: f64) -> Result<Solved> {
        let cfg = self.config;
        let grid = cfg.grid.for_step(h)?;
        let op = assemble_scaled(&self.pot, &grid, h, cfg.scaling.theta, cfg.scaling.scaling(), cfg.discretization)?;
        for w in &op.warnings {
            self.sink.warn(&self.stage, w);
        }
        let seeds = pseudo_resonances(&self.barrier, h, cfg.strip.c)?;
        let hits = find_resonances(&op, &seeds, &SearchOptions::for_step(h))?;
        for hit in hits.iter().filter(|x| x.flagged) {
            self.sink.warn(
                &self.stage,
                format!("resonance alpha={} moved {:.3e} from its seed", alpha_label(&hit.alpha), hit.match_distance),
            );
        }
        if self.oracle {
            self.oracle_check(&op, &hits, h)?;
        }
        Ok(Solved { op, seeds, hits })
    }

    fn oracle_check(&mut self, op: &ScaledOperator, hits: &[ResonanceHit], h: f64) -> Result<()> {
        let dense = dense_eigenvalues(op)?;
        let mut csv = String::from("alpha,re_z,im_z,re_dense,im_dense,distance\n");
        let mut worst: f64 = 0.0;
        for hit in hits {
            let nearest = dense
                .iter()
                .min_by(|a, b| (*a - hit.z).norm().total_cmp(&(*b - hit.z).norm()))
                .copied()
                .unwrap_or(C64::new(f64::NAN, f64::NAN));
            let d = (nearest - hit.z).norm();
            worst = worst.max(d);
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{:e}",
                alpha_label(&hit.alpha),
                hit.z.re,
                hit.z.im,
                nearest.re,
                nearest.im,
                d
            );
        }
        self.sink.emit(&format!("oracle_{}.csv", tag(h)), "operator", "dense_eigenvalues", Some(h), &csv)?;
        if worst > ORACLE_TOLERANCE || worst.is_nan() {
            return Err(Error::OracleDisagreement(worst));
        }
        Ok(())
    }
}

fn resonance_csv(hits: &[ResonanceHit]) -> String {
    let mut s = String::from("alpha,re_z,im_z,residual,match_distance\n");
    for hit in hits {
        let _ = writeln!(
            s,
            "{},{},{},{:e},{:e}",
            alpha_label(&hit.alpha),
            hit.z.re,
            hit.z.im,
            hit.residual,
            hit.match_distance
        );
    }
    s
}

pub fn resonances(ctx: &mut Context) -> Result<()> {
    for &h in &ctx.config.h_list {
        ctx.enter(format!("resonances at h={h}"));
        let start = Instant::now();
        let solved = ctx.solve(h)?;
        ctx.sink
            .emit(&format!("resonances_{}.csv", tag(h)), "operator", "find_resonances", Some(h), &resonance_csv(&solved.hits))?;
        ctx.sink
            .emit_json(&format!("lattice_{}.json", tag(h)), "lattice", "pseudo_resonances", Some(h), &lattice_json(&solved.seeds))?;
        ctx.sink.time(ctx.stage.clone(), start.elapsed().as_secs_f64());
    }
    Ok(())
}

#[derive(Serialize)]
struct ProbeLevel {
    h: f64,
    sup_bound_product: f64,
    k_fit: f64,
    alpha_max: u32,
    singular_points: usize,
    resonances: Vec<[f64; 2]>,
}

pub fn probe_resolvent(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config;
    let (eps, c, e0) = (cfg.strip.epsilon, cfg.strip.c, ctx.barrier.e0);
    let mut levels = Vec::new();
    for &h in &cfg.h_list {
        ctx.enter(format!("probe-resolvent at h={h}"));
        let start = Instant::now();
        let solved = ctx.solve(h)?;
        let zs: Vec<C64> = solved.hits.iter().map(|x| x.z).collect();
        let scan = resolvent_scan(
            &solved.op,
            (e0 - eps, e0 + eps),
            (-c * h, 0.0),
            cfg.options.scan_re,
            cfg.options.scan_im,
            &zs,
        );
        let mut csv = String::from("re_z,im_z,norm,bound_product\n");
        for p in &scan {
            let _ = writeln!(csv, "{},{},{:e},{:e}", p.re, p.im, p.norm, p.bound_product);
        }
        let regular: Vec<f64> = scan.iter().filter(|p| !p.singular).map(|p| p.bound_product).collect();
        let sup = regular.iter().cloned().fold(0.0, f64::max);
        levels.push(ProbeLevel {
            h,
            sup_bound_product: sup,
            k_fit: fit_exponent(sup, h),
            alpha_max: solved.hits.iter().map(|x| x.alpha.iter().sum::<u32>()).max().unwrap_or(0),
            singular_points: scan.len() - regular.len(),
            resonances: zs.iter().map(|z| [z.re, z.im]).collect(),
        });
        ctx.sink.emit(&format!("resolvent_scan_{}.csv", tag(h)), "operator", "resolvent_scan", Some(h), &csv)?;
        ctx.sink.time(ctx.stage.clone(), start.elapsed().as_secs_f64());
    }
    let ks: Vec<f64> = levels.iter().map(|l| l.k_fit).collect();
    let kmax = ks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kmin = ks.iter().cloned().fold(f64::INFINITY, f64::min);
    let summary = json!({
        "levels": levels,
        "k_relative_variation": (kmax - kmin) / kmax.abs().max(kmin.abs()),
    });
    ctx.sink.emit_json("resolvent_summary.json", "operator", "fit_exponent", None, &summary)
}

pub fn project(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config;
    if ctx.pot.dimension != 1 {
        return Err(Error::DimensionUnsupported(ctx.pot.dimension));
    }
    let phi = eikonal_phase(&ctx.barrier, &ctx.pot, Branch::Outgoing)?;
    let apex = ctx.barrier.apex[0];
    for &h in &cfg.h_list {
        ctx.enter(format!("project at h={h}"));
        let start = Instant::now();
        let solved = ctx.solve(h)?;
        for hit in &solved.hits {
            let alpha = hit.alpha[0];
            if !ctx.selected(alpha) {
                continue;
            }
            ctx.enter(format!("project at h={h}, alpha={alpha}"));
            let proj = riesz_projector(&solved.op, hit.z, cfg.contour.radius_per_h * h, cfg.contour.n_quad)?;
            let state = extract_state(&proj, &solved.op, &phi, alpha)?;
            let constant = extract_constant(&proj, &solved.op, &state, &ctx.barrier.lambdas)?;
            let outgoing = verify_outgoing(&state.x, &state.samples, &ctx.pot, apex, h, state.z, cfg.options.outgoing_radius)?;
            let name = format!("{}_alpha{alpha}", tag(h));
            ctx.sink.emit(&format!("state_{name}.csv"), "projection", "extract_state", Some(h), &state.to_csv(&phi))?;
            let report = json!({
                "alpha": alpha,
                "h": h,
                "z": [hit.z.re, hit.z.im],
                "projector": {
                    "radius": proj.radius,
                    "n_quad": proj.n_quad,
                    "rank_gap": proj.rank_gap,
                    "idempotency_defect": proj.idempotency_defect,
                    "symmetry_defect": proj.symmetry_defect,
                    "quadrature_change": proj.quadrature_change,
                },
                "state_residual": state.residual,
                "normalization": state.normalization,
                "constant": constant,
                "outgoing": outgoing,
            });
            ctx.sink.emit_json(&format!("constant_{name}.json"), "projection", "extract_constant", Some(h), &report)?;
        }
        ctx.sink.time(format!("project at h={h}"), start.elapsed().as_secs_f64());
    }
    Ok(())
}

pub fn curves(ctx: &mut Context) -> Result<()> {
    let opts = &ctx.config.options;
    ctx.enter("curves".into());
    let start = Instant::now();
    let lin = linearize(&ctx.barrier)?;
    let field = taylor_field(&ctx.pot, required_taylor_order(&lin.lambdas, opts.truncation))?;
    let prescribed: Vec<(f64, Vec<f64>)> = opts.prescribed.iter().map(|p| (p.lambda, p.vector.clone())).collect();
    let formal = formal_curve(&lin, &ctx.barrier.apex, &field, &prescribed, opts.truncation)?;
    ctx.sink.emit("formal_curve.json", "curves", "formal_curve", None, &(formal.to_json()? + "\n"))?;
    let picard = PicardOptions { span: opts.span, max_iter: opts.picard_max_iter, tol: opts.picard_tol };
    let refined = picard_refine(&formal, &ctx.pot, &picard)?;
    ctx.sink.emit("refined_curve.csv", "curves", "picard_refine", None, &refined.to_csv())?;
    let check = verify_prescription(&refined, &formal, &lin)?;
    let degrees: Vec<_> = formal.terms.iter().map(|t| json!({"mu": t.mu, "degree": t.degree})).collect();
    let report = json!({
        "truncation": refined.truncation,
        "t_n": refined.t_n,
        "lipschitz": refined.lipschitz,
        "picard_history": refined.history,
        "picard_ratios": refined.ratios,
        "weighted_correction": refined.weighted_correction,
        "decay_ratio": refined.decay_ratio,
        "tail_bound": refined.tail_bound,
        "flow_residual": refined.flow_residual,
        "flow_deviation": refined.flow_deviation,
        "flow_tolerance": refined.flow_tolerance,
        "degrees": degrees,
        "prescription": check,
    });
    ctx.sink.emit_json("curve_report.json", "curves", "verify_prescription", None, &report)?;
    ctx.sink.time("curves", start.elapsed().as_secs_f64());
    Ok(())
}

pub fn propagate(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config;
    let mu = cfg
        .strip
        .mu
        .ok_or_else(|| Error::Config("propagate needs strip.mu".into()))?;
    for &h in &cfg.h_list {
        ctx.enter(format!("propagate at h={h}"));
        let start = Instant::now();
        let t_max = cfg.options.t_max_per_ln_h * h.ln().abs();
        let n = cfg.options.samples.max(1);
        let times: Vec<f64> = (1..=n).map(|k| k as f64 * t_max / n as f64).collect();
        let mut run = PropagatorRun::standard(&ctx.pot, h, mu, times)?;
        run.theta = cfg.scaling.theta;
        run.discretization = cfg.discretization;
        run.n_quad = cfg.contour.n_quad;
        let cmp = compare_expansion(&ctx.pot, &run)?;
        for w in &cmp.warnings {
            ctx.sink.warn(&ctx.stage.clone(), w);
        }
        ctx.sink.emit(&format!("error_curve_{}.csv", tag(h)), "dynamics", "compare_expansion", Some(h), &cmp.to_csv())?;
        let summary = json!({
            "h": h,
            "mu": mu,
            "resonances": cmp.resonances,
            "first_excluded_rate": cmp.first_excluded_rate,
            "fitted_mu": cmp.fitted_mu,
            "fitted_k": cmp.fitted_k,
            "fit_window": cmp.fit_window,
            "onset_time": cmp.onset_time,
            "floor": cmp.floor,
            "recurrence_time": cmp.recurrence_time,
            "grid": run.grid,
        });
        ctx.sink.emit_json(&format!("comparison_{}.json", tag(h)), "dynamics", "compare_expansion", Some(h), &summary)?;
        ctx.sink.time(ctx.stage.clone(), start.elapsed().as_secs_f64());
    }
    Ok(())
}

#[derive(Serialize)]
struct ResidueRow {
    alpha: u32,
    h: f64,
    residue_re: f64,
    residue_im: f64,
    predicted_re: f64,
    predicted_im: f64,
    slope_fit: Option<f64>,
    z_re: f64,
    z_im: f64,
    pole_shift: f64,
    method_disagreement: f64,
}

pub fn scatter(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config;
    ctx.enter("scatter geometry".into());
    let b = ctx.barrier.clone();
    let stable = connecting_curve(&ctx.pot, &b, Direction::Stable, -1.0, 1e-8, 0.02, 1e-13)?;
    let unstable = connecting_curve(&ctx.pot, &b, Direction::Unstable, 1.0, 1e-8, 0.02, 1e-13)?;
    let geom = scattering_geometry(&stable, &unstable, &ctx.pot, b.e0)?;
    ctx.sink.emit_json("scattering_geometry.json", "geometry", "scattering_geometry", None, &geom)?;
    let action = geom.s_minus + geom.s_plus;
    let closed_form = ctx.oracle && ctx.pot.spec().family == Family::Sech2Barrier && (b.e0 - 1.0).abs() < 1e-12;

    let mut rows: Vec<ResidueRow> = Vec::new();
    let mut residues: Vec<(u32, f64, C64)> = Vec::new();
    for &h in &cfg.h_list {
        ctx.enter(format!("scatter at h={h}"));
        let start = Instant::now();
        let solved = ctx.solve(h)?;
        for hit in &solved.hits {
            let alpha = hit.alpha[0];
            if !ctx.selected(alpha) {
                continue;
            }
            ctx.enter(format!("scatter at h={h}, alpha={alpha}"));
            let rec = amplitude_residue(&ctx.pot, h, hit.z, ResidueMethod::ContourQuadrature)?;
            let pred = predicted_residue(alpha, &geom, &b.lambdas, h)?;
            rows.push(ResidueRow {
                alpha,
                h,
                residue_re: rec.residue.re,
                residue_im: rec.residue.im,
                predicted_re: pred.value.re,
                predicted_im: pred.value.im,
                slope_fit: None,
                z_re: hit.z.re,
                z_im: hit.z.im,
                pole_shift: (rec.z_pole - hit.z).norm(),
                method_disagreement: rec.disagreement,
            });
            residues.push((alpha, h, rec.residue));
        }

        ctx.enter(format!("amplitude scan at h={h}"));
        let n = cfg.options.amplitude_points.max(2);
        let eps = cfg.strip.epsilon;
        let mut csv = String::from(if closed_form {
            "re_z,im_z,re_t,im_t,abs_t,re_r_left,im_r_left,re_r_right,im_r_right,closed_form_error\n"
        } else {
            "re_z,im_z,re_t,im_t,abs_t,re_r_left,im_r_left,re_r_right,im_r_right\n"
        });
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let z = C64::new(b.e0 - eps + 2.0 * eps * k as f64 / (n - 1) as f64, 0.0);
            let s = transmission(&ctx.pot, z, h)?;
            let t = s.transmission;
            let _ = write!(
                csv,
                "{},{},{},{},{:e},{},{},{},{}",
                z.re,
                z.im,
                t.re,
                t.im,
                t.norm(),
                s.reflection_left.re,
                s.reflection_left.im,
                s.reflection_right.re,
                s.reflection_right.im
            );
            if closed_form {
                let err = (t - poschl_teller_transmission(z, h)).norm();
                worst = worst.max(err);
                let _ = write!(csv, ",{err:e}");
            }
            csv.push('\n');
        }
        ctx.sink.emit(&format!("amplitude_scan_{}.csv", tag(h)), "scattering", "transmission", Some(h), &csv)?;
        if closed_form && worst > 1e-6 {
            ctx.sink.warn(&ctx.stage.clone(), format!("transmission differs from the closed form by {worst:.3e}"));
        }
        ctx.sink.time(format!("scatter at h={h}"), start.elapsed().as_secs_f64());
    }

    ctx.enter("scatter fits".into());
    let mut fits = Vec::new();
    let mut alphas: Vec<u32> = residues.iter().map(|r| r.0).collect();
    alphas.sort_unstable();
    alphas.dedup();
    for alpha in alphas {
        let (hs, rs): (Vec<f64>, Vec<C64>) = residues.iter().filter(|r| r.0 == alpha).map(|r| (r.1, r.2)).unzip();
        if hs.len() < 2 {
            continue;
        }
        let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let ly: Vec<f64> = rs.iter().map(|r| r.norm().ln()).collect();
        let (slope, _) = linear_fit(&lx, &ly);
        let (phi0, dev) = phase_fit(&hs, &rs, action);
        rows.iter_mut().filter(|r| r.alpha == alpha).for_each(|r| r.slope_fit = Some(slope));
        fits.push(json!({
            "alpha": alpha,
            "slope_fit": slope,
            "phase_offset": phi0,
            "max_phase_deviation": dev,
            "action": action,
        }));
    }
    ctx.sink.emit_json("residues.json", "scattering", "amplitude_residue", None, &rows)?;
    ctx.sink.emit_json("residue_fits.json", "scattering", "phase_fit", None, &fits)
}
