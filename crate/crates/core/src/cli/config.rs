use crate::lattice::pseudo_resonances;
use crate::model::{barrier_data, BarrierData, Potential, PotentialSpec};
use crate::operator::{Discretization, Grid1D, Scaling};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Everything a run needs. Unknown keys are rejected so that a typo cannot
/// silently fall back to a default.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    /// Semiclassical parameters, positive and strictly decreasing.
    #[serde(default)]
    pub h_list: Vec<f64>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub scaling: ScalingSpec,
    #[serde(default)]
    pub discretization: Discretization,
    #[serde(default)]
    pub strip: StripSpec,
    #[serde(default)]
    pub contour: ContourSpec,
    #[serde(default)]
    pub options: CommandOptions,
    /// Where the run writes; left out of the hashed config so that the same
    /// run in two directories has one hash.
    #[serde(default = "default_output", skip_serializing)]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub half_length: f64,
    /// Fixed number of nodes. When absent the spacing is `spacing_per_h · h`.
    pub points: Option<usize>,
    pub spacing_per_h: f64,
    pub min_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { half_length: 7.0, points: None, spacing_per_h: 0.4, min_points: 200 }
    }
}

impl GridSpec {
    pub fn for_step(&self, h: f64) -> Result<Grid1D> {
        let points = match self.points {
            Some(n) => n,
            None => ((2.0 * self.half_length / (self.spacing_per_h * h)).ceil() as usize + 1).max(self.min_points),
        };
        Grid1D::new(self.half_length, points)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingKind {
    Uniform,
    Exterior,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingSpec {
    pub kind: ScalingKind,
    pub theta: f64,
    pub r0: f64,
    pub width: f64,
}

impl Default for ScalingSpec {
    fn default() -> Self {
        Self { kind: ScalingKind::Exterior, theta: 0.5, r0: 3.5, width: 3.0 }
    }
}

impl ScalingSpec {
    pub fn scaling(&self) -> Scaling {
        match self.kind {
            ScalingKind::Uniform => Scaling::Uniform,
            ScalingKind::Exterior => Scaling::Exterior { r0: self.r0, width: self.width },
        }
    }
}

/// The spectral window `[E0 - ε, E0 + ε] - i[0, C h]`; `mu` is the strip
/// depth of the propagator expansion.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StripSpec {
    pub epsilon: f64,
    pub c: f64,
    pub mu: Option<f64>,
}

impl Default for StripSpec {
    fn default() -> Self {
        Self { epsilon: 0.2, c: 3.5, mu: None }
    }
}

/// Riesz contour: a circle of radius `radius_per_h · h` with `n_quad`
/// trapezoid nodes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContourSpec {
    pub radius_per_h: f64,
    pub n_quad: usize,
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self { radius_per_h: 0.5, n_quad: 24 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prescription {
    pub lambda: f64,
    pub vector: Vec<f64>,
}

/// Options read only by the command they concern.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandOptions {
    /// Restricts `project` and `scatter` to these indices; empty means all.
    pub alphas: Vec<u32>,
    pub scan_re: usize,
    pub scan_im: usize,
    pub outgoing_radius: f64,
    pub truncation: f64,
    pub prescribed: Vec<Prescription>,
    pub span: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Propagation times are `k · t_max_per_ln_h · |ln h| / samples`.
    pub t_max_per_ln_h: f64,
    pub samples: usize,
    pub amplitude_points: usize,
}

impl Default for CommandOptions {
    fn default() -> Self {
        Self {
            alphas: Vec::new(),
            scan_re: 40,
            scan_im: 20,
            outgoing_radius: 2.5,
            truncation: 8.0,
            prescribed: Vec::new(),
            span: 10.0,
            picard_tol: 1e-12,
            picard_max_iter: 60,
            t_max_per_ln_h: 8.0,
            samples: 160,
            amplitude_points: 41,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    /// Builds the potential and checks everything that does not need a
    /// numerical solve. `needs_h` is false for the purely classical commands.
    pub fn validate(&self, needs_h: bool) -> Result<(Potential, BarrierData)> {
        if needs_h && self.h_list.is_empty() {
            return Err(config_err("h_list is empty"));
        }
        if let Some(bad) = self.h_list.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return Err(config_err(format!("h_list entry {bad} is not positive")));
        }
        if self.h_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config_err("h_list must be strictly decreasing"));
        }
        let g = &self.grid;
        if !(g.half_length > 0.0 && g.spacing_per_h > 0.0) {
            return Err(config_err("grid half_length and spacing_per_h must be positive"));
        }
        let s = &self.scaling;
        if !(s.theta > 0.0 && s.theta < std::f64::consts::FRAC_PI_4) {
            return Err(config_err(format!("scaling theta={} must lie in (0, π/4)", s.theta)));
        }
        if s.kind == ScalingKind::Exterior && !(s.r0 >= 0.0 && s.width > 0.0 && s.r0 + s.width < g.half_length) {
            return Err(config_err(format!(
                "exterior scaling needs r0 >= 0, width > 0 and r0 + width < half_length (r0={}, width={}, L={})",
                s.r0, s.width, g.half_length
            )));
        }
        if !(self.strip.epsilon > 0.0 && self.strip.c > 0.0) {
            return Err(config_err("strip epsilon and c must be positive"));
        }
        if self.strip.mu.is_some_and(|m| m <= 0.0) {
            return Err(config_err("strip mu must be positive"));
        }
        if !(self.contour.radius_per_h > 0.0) || self.contour.n_quad < 4 {
            return Err(config_err("contour needs radius_per_h > 0 and n_quad >= 4"));
        }
        let pot = Potential::from_spec(&self.potential)?;
        let barrier = barrier_data(&pot)?;
        // the lattice depends on h only through the scale, so one check covers h_list
        pseudo_resonances(&barrier, 1.0, self.strip.c)?;
        Ok((pot, barrier))
    }
}
