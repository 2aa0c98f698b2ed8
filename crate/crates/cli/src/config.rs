//! Run configuration: one JSON document per run.

use serde::{Deserialize, Serialize};

use rydberg_dressing::gate::{GateOptions, GateSequence};
use rydberg_dressing::model::{ExcitationScheme, InteractionSpec};
use rydberg_dressing::optimize::{BlockadeScanSpec, LandscapeSpec, OptimizationProblem};
use rydberg_dressing::pulses::RampSchedule;
use rydberg_dressing::spectrum::Branch;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Task {
    Spectrum(SpectrumTask),
    Ramp(RampTask),
    Gate(GateTask),
    Optimize(OptimizeTask),
    Sweep(SweepTask),
    Forces(ForcesTask),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Spectrum(_) => "spectrum",
            Task::Ramp(_) => "ramp",
            Task::Gate(_) => "gate",
            Task::Optimize(_) => "optimize",
            Task::Sweep(_) => "sweep",
            Task::Forces(_) => "forces",
        }
    }
}

/// Either explicit values or an evenly spaced (optionally logarithmic) range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range(Range),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub log: bool,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Range(r) => {
                let map = |x: f64| if r.log { 10f64.powf(x) } else { x };
                let (a, b) = if r.log { (r.start.log10(), r.stop.log10()) } else { (r.start, r.stop) };
                match r.points {
                    0 => Vec::new(),
                    1 => vec![r.start],
                    n => (0..n).map(|k| map(a + (b - a) * k as f64 / (n - 1) as f64)).collect(),
                }
            }
        }
    }

    fn check(&self, what: &str, positive: bool) -> Result<(), String> {
        if let Grid::Range(r) = self {
            if r.log && !(r.start > 0.0 && r.stop > 0.0) {
                return Err(format!("{what}: logarithmic range needs positive ends"));
            }
        }
        for v in self.values() {
            if !v.is_finite() || (positive && v <= 0.0) {
                return Err(format!("{what}: bad grid value {v}"));
            }
        }
        Ok(())
    }
}

/// Dressed energies and populations on a `Delta/Omega` grid for several `Omega/|V|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumTask {
    /// Values of `Omega/|V|`.
    pub ratios: Grid,
    /// Values of `Delta/Omega`.
    pub detunings: Grid,
    #[serde(default = "one")]
    pub interaction_sign: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampTask {
    pub schedule: RampSchedule,
    pub scheme: ExcitationScheme,
    pub interaction: InteractionSpec,
    /// Two-atom basis label such as `"11"` or `"0r"`.
    #[serde(default = "default_initial")]
    pub initial: String,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub decay: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateTask {
    pub sequence: GateSequence,
    pub interaction: InteractionSpec,
    #[serde(default)]
    pub options: GateOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeTask {
    pub problem: OptimizationProblem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepTask {
    Landscape(LandscapeSpec),
    Blockade(BlockadeScanSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcesTask {
    #[serde(default = "one")]
    pub omega_eff: f64,
    #[serde(default)]
    pub delta_eff: f64,
    #[serde(default = "default_branch")]
    pub branch: Branch,
    /// Separations in units of the blockade radius.
    pub radii: Grid,
    /// Separations (units of the blockade radius) where both force methods are compared.
    #[serde(default = "default_force_points")]
    pub force_points: Grid,
}

fn one() -> f64 {
    1.0
}

fn default_initial() -> String {
    "11".into()
}

fn default_samples() -> usize {
    401
}

fn default_tol() -> f64 {
    rydberg_dressing::dynamics::DEFAULT_TOL
}

fn default_branch() -> Branch {
    Branch::Minus
}

fn default_force_points() -> Grid {
    Grid::Values(vec![0.5, 1.0, 2.0])
}

/// Parse a two-letter basis label into level indices.
pub fn basis_label(label: &str) -> Result<(usize, usize), String> {
    let level = |c: char| match c {
        '0' => Ok(0),
        '1' => Ok(1),
        'r' => Ok(2),
        _ => Err(format!("unknown level `{c}` in `{label}`")),
    };
    let chars: Vec<char> = label.chars().collect();
    if chars.len() != 2 {
        return Err(format!("basis label `{label}` must have two letters"));
    }
    Ok((level(chars[0])?, level(chars[1])?))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let err = |e: rydberg_dressing::Error| e.to_string();
        match &self.task {
            Task::Spectrum(t) => {
                t.ratios.check("ratios", true)?;
                t.detunings.check("detunings", false)?;
                if t.interaction_sign.abs() != 1.0 {
                    return Err("interaction_sign must be +1 or -1".into());
                }
            }
            Task::Ramp(t) => {
                t.schedule.validate().map_err(err)?;
                t.scheme.validate().map_err(err)?;
                basis_label(&t.initial)?;
                if t.samples < 2 {
                    return Err("samples must be at least 2".into());
                }
                if !(t.tol > 0.0) {
                    return Err("tol must be positive".into());
                }
            }
            Task::Gate(t) => {
                t.sequence.ramp_a.validate().map_err(err)?;
                if let Some(b) = &t.sequence.ramp_b {
                    b.validate().map_err(err)?;
                }
                t.sequence.scheme.validate().map_err(err)?;
                if !(t.options.tol > 0.0) {
                    return Err("options.tol must be positive".into());
                }
            }
            Task::Optimize(t) => t.problem.validate().map_err(err)?,
            Task::Sweep(SweepTask::Landscape(s)) => {
                if s.gamma_ratios.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return Err("gamma_ratios must be non-negative".into());
                }
                if s.powers.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err("powers must be positive".into());
                }
                for p in s.points() {
                    p.problem.validate().map_err(err)?;
                }
            }
            Task::Sweep(SweepTask::Blockade(s)) => {
                if s.ratios.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err("ratios must be positive".into());
                }
                for p in s.points() {
                    p.problem.validate().map_err(err)?;
                }
            }
            Task::Forces(t) => {
                if !(t.omega_eff > 0.0 && t.omega_eff.is_finite() && t.delta_eff.is_finite()) {
                    return Err("omega_eff must be positive and delta_eff finite".into());
                }
                t.radii.check("radii", true)?;
                t.force_points.check("force_points", true)?;
                if t.radii.values().windows(2).any(|w| w[1] <= w[0]) {
                    return Err("radii must be strictly increasing".into());
                }
            }
        }
        Ok(())
    }
}
