//! Fidelity maximization over ramp parameters, parameter scans and the
//! decay-limited fidelity bound.

pub mod nelder_mead;
pub mod scan;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::{spin_echo_gate, GateOptions, GateReport, GateSequence};
use crate::model::{ExcitationScheme, InteractionSpec, LightShiftConvention, OnePhoton, TwoPhoton};
use crate::pulses::{OnePhotonRamp, RampSchedule, TwoPhotonRamp, DEFAULT_TRUNCATION};
use nelder_mead::{minimize, SimplexOptions};

pub use scan::*;

pub const ONE_PHOTON_PARAMETERS: [&str; 5] = ["t_w", "plateau", "delta_min", "delta_max", "total"];
pub const TWO_PHOTON_PARAMETERS: [&str; 3] = ["t_stop", "t_w", "delta_1a"];
pub const MIN_BUDGET: usize = 50;

/// The ramp family and everything about it that is not optimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum RampFamily {
    OnePhoton {
        omega_max: f64,
        #[serde(default)]
        gamma_r: f64,
    },
    /// `Omega_ar = omega_ar_ratio * omega_1a_max`, `Delta_ar = -Delta_1a`.
    /// With `scaled_times`, `t_stop` and `t_w` are in units of `1/Omega_eff^max`.
    TwoPhoton {
        omega_1a_max: f64,
        omega_ar_ratio: f64,
        #[serde(default)]
        scaled_times: bool,
        #[serde(default)]
        gamma_a: f64,
        #[serde(default)]
        gamma_r: f64,
        #[serde(default)]
        convention: LightShiftConvention,
    },
}

impl RampFamily {
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            RampFamily::OnePhoton { .. } => &ONE_PHOTON_PARAMETERS,
            RampFamily::TwoPhoton { .. } => &TWO_PHOTON_PARAMETERS,
        }
    }
}

/// How the pair interaction is chosen for a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum InteractionRule {
    Fixed { interaction: InteractionSpec },
    /// `V = sign * Omega_eff^max / ratio`.
    BlockadeRatio {
        ratio: f64,
        #[serde(default = "positive")]
        sign: f64,
    },
}

fn positive() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bound {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Constraints {
    /// Largest boundary amplitude relative to the peak.
    pub truncation: f64,
    /// Smallest allowed `|V - 2 Delta_eff(t)|` along the ramp.
    pub anti_blockade_margin: f64,
    /// Cap on the `|r,r>` population along the `|11>` trajectory.
    pub max_p_rr: Option<f64>,
    /// Cap on `|Omega_1a / Delta_1a|` for two-photon candidates.
    pub elimination_threshold: Option<f64>,
    /// Added to the infidelity per unit of total Rydberg time, acting as a surrogate decay rate.
    pub rydberg_penalty: f64,
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints {
            truncation: DEFAULT_TRUNCATION,
            anti_blockade_margin: 0.0,
            max_p_rr: None,
            elimination_threshold: Some(crate::model::DEFAULT_ELIMINATION_THRESHOLD),
            rydberg_penalty: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationProblem {
    pub family: RampFamily,
    pub interaction: InteractionRule,
    pub free: Vec<Bound>,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    /// Starting points, each giving every free parameter by name.
    pub seeds: Vec<BTreeMap<String, f64>>,
    pub budget: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub decay: bool,
    #[serde(default)]
    pub constraints: Constraints,
}

fn default_tol() -> f64 {
    crate::dynamics::DEFAULT_TOL
}

/// A concrete gate built from one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub sequence: GateSequence,
    pub interaction: InteractionSpec,
    pub omega_eff_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub index: usize,
    /// Seed the evaluation descends from.
    pub start: usize,
    pub parameters: BTreeMap<String, f64>,
    /// Penalized infidelity when feasible; `2 + violation` otherwise.
    pub objective: f64,
    pub fidelity: Option<f64>,
    pub t_r: Option<f64>,
    pub max_p_rr: Option<f64>,
    pub feasible: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub parameters: BTreeMap<String, f64>,
    pub candidate: Candidate,
    pub report: GateReport,
    pub fidelity: f64,
    pub log: Vec<EvaluationRecord>,
}

/// Outcome of evaluating a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEvaluation {
    pub objective: f64,
    pub candidate: Option<Candidate>,
    pub report: Option<GateReport>,
    pub feasible: bool,
    pub error: Option<String>,
}

/// Gaussian tail length, in widths, that meets the truncation level.
pub fn tail_widths(truncation: f64) -> f64 {
    (2.0 * (1.0 / truncation).ln()).sqrt()
}

impl OptimizationProblem {
    pub fn validate(&self) -> Result<()> {
        let names = self.family.parameter_names();
        if self.budget < MIN_BUDGET {
            return Err(Error::Problem(format!("budget {} below the minimum {MIN_BUDGET}", self.budget)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Problem("tolerance must be positive".into()));
        }
        if !(self.constraints.rydberg_penalty >= 0.0 && self.constraints.rydberg_penalty.is_finite()) {
            return Err(Error::Problem("rydberg_penalty must be finite and non-negative".into()));
        }
        for b in &self.free {
            if !names.contains(&b.name.as_str()) {
                return Err(Error::Problem(format!("unknown free parameter `{}`", b.name)));
            }
            if !(b.lower.is_finite() && b.upper.is_finite() && b.lower < b.upper) {
                return Err(Error::Problem(format!("bad bounds for `{}`", b.name)));
            }
        }
        for name in names {
            let free = self.free.iter().filter(|b| b.name == *name).count();
            let fixed = self.fixed.contains_key(*name);
            if free + usize::from(fixed) != 1 {
                return Err(Error::Problem(format!("`{name}` must be either free or fixed, exactly once")));
            }
        }
        if let Some(extra) = self.fixed.keys().find(|k| !names.contains(&k.as_str())) {
            return Err(Error::Problem(format!("unknown fixed parameter `{extra}`")));
        }
        if self.seeds.is_empty() {
            return Err(Error::Problem("at least one seed is required".into()));
        }
        for seed in &self.seeds {
            for b in &self.free {
                match seed.get(&b.name) {
                    Some(v) if v.is_finite() => {}
                    _ => return Err(Error::Problem(format!("seed lacks free parameter `{}`", b.name))),
                }
            }
        }
        Ok(())
    }

    /// Free values -> unit cube.
    fn encode(&self, values: &BTreeMap<String, f64>) -> Vec<f64> {
        self.free.iter().map(|b| ((values[&b.name] - b.lower) / (b.upper - b.lower)).clamp(0.0, 1.0)).collect()
    }

    fn decode(&self, u: &[f64]) -> BTreeMap<String, f64> {
        let mut out = self.fixed.clone();
        for (b, x) in self.free.iter().zip(u) {
            out.insert(b.name.clone(), b.lower + x * (b.upper - b.lower));
        }
        out
    }

    fn free_only(&self, all: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
        self.free.iter().map(|b| (b.name.clone(), all[&b.name])).collect()
    }

    /// Gate and interaction for a full parameter assignment.
    pub fn build(&self, p: &BTreeMap<String, f64>) -> Result<Candidate> {
        let get = |k: &str| p.get(k).copied().ok_or_else(|| Error::Problem(format!("missing `{k}`")));
        let (ramp, scheme, omega_eff_max) = match self.family {
            RampFamily::OnePhoton { omega_max, gamma_r } => {
                let (t_w, plateau, total) = (get("t_w")?, get("plateau")?, get("total")?);
                let ramp = (total - plateau) / 2.0;
                if !(ramp > 0.0) || plateau < 0.0 {
                    return Err(Error::InvalidSchedule("total must exceed the plateau".into()));
                }
                let r = OnePhotonRamp::symmetric(omega_max, get("delta_min")?, get("delta_max")?, ramp, plateau, t_w);
                let s = ExcitationScheme::OnePhoton(OnePhoton { omega_1r: omega_max, delta_1r: 0.0, gamma_r });
                (RampSchedule::OnePhoton(r), s, omega_max.abs())
            }
            RampFamily::TwoPhoton { omega_1a_max, omega_ar_ratio, scaled_times, gamma_a, gamma_r, convention } => {
                let d = get("delta_1a")?;
                let omega_ar = omega_ar_ratio * omega_1a_max;
                let unit = if scaled_times { (2.0 * d / (omega_1a_max * omega_ar)).abs() } else { 1.0 };
                let (t_stop, t_w) = (get("t_stop")? * unit, get("t_w")? * unit);
                let duration = 2.0 * (t_stop + tail_widths(self.constraints.truncation) * 1.0001 * t_w);
                let r = TwoPhotonRamp { omega_1a_max, t_stop, t_w, duration };
                let s = ExcitationScheme::TwoPhoton(TwoPhoton {
                    omega_1a: omega_1a_max,
                    omega_ar,
                    delta_1a: d,
                    delta_ar: -d,
                    gamma_a,
                    gamma_r,
                    convention,
                });
                (RampSchedule::TwoPhoton(r), s, (omega_1a_max * omega_ar / (2.0 * d)).abs())
            }
        };
        ramp.validate()?;
        let interaction = match self.interaction {
            InteractionRule::Fixed { interaction } => interaction,
            InteractionRule::BlockadeRatio { ratio, sign } => InteractionSpec::direct(sign.signum() * omega_eff_max / ratio),
        };
        Ok(Candidate { sequence: GateSequence::symmetric(ramp, scheme), interaction, omega_eff_max })
    }

    /// Constraint violation measured before propagation (0 when satisfied).
    fn static_violation(&self, c: &Candidate) -> Result<f64> {
        let ramp = c.sequence.ramp_a;
        let mut violation = (ramp.truncation_level() / self.constraints.truncation - 1.0).max(0.0);
        if let (Some(th), ExcitationScheme::TwoPhoton(s)) = (self.constraints.elimination_threshold, c.sequence.scheme) {
            violation += ((s.omega_1a / s.delta_1a).abs() / th - 1.0).max(0.0);
        }
        let margin = self.constraints.anti_blockade_margin;
        if margin > 0.0 {
            violation += anti_blockade_deficit(&ramp, &c.sequence.scheme, &c.interaction, margin)? / margin;
        }
        Ok(violation)
    }

    /// Evaluate one full parameter assignment.
    pub fn evaluate(&self, p: &BTreeMap<String, f64>) -> PointEvaluation {
        let failed = |e: Error| PointEvaluation {
            objective: f64::INFINITY,
            candidate: None,
            report: None,
            feasible: false,
            error: Some(e.to_string()),
        };
        let c = match self.build(p) {
            Ok(c) => c,
            Err(e) => return failed(e),
        };
        let violation = match self.static_violation(&c) {
            Ok(v) => v,
            Err(e) => return failed(e),
        };
        if violation > 0.0 {
            return PointEvaluation { objective: 2.0 + violation, candidate: Some(c), report: None, feasible: false, error: None };
        }
        let opts = GateOptions { tol: self.tol, decay: self.decay, ..GateOptions::default() };
        match spin_echo_gate(&c.sequence, &c.interaction, &opts) {
            Ok(report) => {
                let rr_violation = self.constraints.max_p_rr.map_or(0.0, |cap| (report.max_p_rr / cap - 1.0).max(0.0));
                let feasible = rr_violation == 0.0;
                let objective = if feasible { 1.0 - report.fidelity + self.constraints.rydberg_penalty * report.t_r_total } else { 2.0 + rr_violation };
                PointEvaluation { objective, candidate: Some(c), report: Some(report), feasible, error: None }
            }
            Err(e) => failed(e),
        }
    }
}

/// Largest shortfall of `|V - 2 Delta_eff(t)|` below `margin` on a fine time grid.
pub fn anti_blockade_deficit(r: &RampSchedule, s: &ExcitationScheme, v: &InteractionSpec, margin: f64) -> Result<f64> {
    let (a, b) = r.support();
    let n = 400;
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        let t = a + (b - a) * k as f64 / n as f64;
        let p = r.effective_at(s, t)?;
        worst = worst.max(margin - (v.energy() - 2.0 * p.delta_eff).abs());
    }
    Ok(worst.max(0.0))
}

/// Multi-start bounded simplex search maximizing the echo-gate fidelity.
pub fn optimize_ramp(p: &OptimizationProblem) -> Result<OptimizationResult> {
    p.validate()?;
    let mut log: Vec<EvaluationRecord> = Vec::new();
    let per_seed = p.budget / p.seeds.len();
    let mut remainder = p.budget % p.seeds.len();
    let mut best: Option<(f64, BTreeMap<String, f64>)> = None;
    for (start, seed) in p.seeds.iter().enumerate() {
        let mut share = per_seed;
        if remainder > 0 {
            share += 1;
            remainder -= 1;
        }
        if share == 0 {
            continue;
        }
        let mut objective = |u: &[f64]| {
            let point = p.decode(u);
            let e = p.evaluate(&point);
            log.push(EvaluationRecord {
                index: log.len(),
                start,
                parameters: p.free_only(&point),
                objective: e.objective,
                fidelity: e.report.as_ref().map(|r| r.fidelity),
                t_r: e.report.as_ref().map(|r| r.t_r),
                max_p_rr: e.report.as_ref().map(|r| r.max_p_rr),
                feasible: e.feasible,
                error: e.error.clone(),
            });
            e.objective
        };
        let m = minimize(&mut objective, &p.encode(&{
            let mut all = p.fixed.clone();
            all.extend(seed.iter().map(|(k, v)| (k.clone(), *v)));
            all
        }), share, &SimplexOptions::default());
        if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
            best = Some((m.value, p.decode(&m.x)));
        }
    }
    let (value, point) = best.ok_or(Error::AllEvaluationsFailed(log.len()))?;
    if !value.is_finite() {
        return Err(Error::AllEvaluationsFailed(log.len()));
    }
    let e = p.evaluate(&point);
    let (Some(candidate), Some(report)) = (e.candidate, e.report) else {
        return Err(Error::AllEvaluationsFailed(log.len()));
    };
    log::info!("optimum F = {:.6} after {} evaluations", report.fidelity, log.len());
    Ok(OptimizationResult { parameters: p.free_only(&point), candidate, fidelity: report.fidelity, report, log })
}

/// Upper bound `1 - 4 pi / (|V| tau_r)` on the fidelity for Rydberg lifetime `tau_r`.
pub fn fidelity_bound(v: &InteractionSpec, tau_r: f64) -> Result<f64> {
    let vv = v.energy().abs();
    if !(tau_r > 0.0) || vv == 0.0 {
        return Err(Error::Domain("fidelity bound needs tau_r > 0 and V != 0".into()));
    }
    Ok(1.0 - 4.0 * std::f64::consts::PI / (vv * tau_r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn one_photon_problem(budget: usize) -> OptimizationProblem {
        let free = [("t_w", 1.0, 4.0), ("plateau", 0.0, 10.0), ("delta_min", -1.5, 0.0), ("delta_max", -10.0, -2.0), ("total", 15.0, 40.0)]
            .iter()
            .map(|&(n, l, u)| Bound { name: n.into(), lower: l, upper: u })
            .collect();
        let seed = [("t_w", 2.0), ("plateau", 4.0), ("delta_min", -0.4), ("delta_max", -6.0), ("total", 24.0)]
            .iter()
            .map(|&(n, v)| (n.to_string(), v))
            .collect();
        OptimizationProblem {
            family: RampFamily::OnePhoton { omega_max: 1.0, gamma_r: 0.0 },
            interaction: InteractionRule::Fixed { interaction: InteractionSpec::direct(10.0) },
            free,
            fixed: BTreeMap::new(),
            seeds: vec![seed],
            budget,
            tol: 1e-7,
            decay: false,
            constraints: Constraints::default(),
        }
    }

    #[test]
    fn bound_examples() {
        let two_pi = 2.0 * std::f64::consts::PI;
        let b = fidelity_bound(&InteractionSpec::direct(two_pi * 40e6), 150e-6).unwrap();
        assert_relative_eq!(1.0 - b, 4.0 * std::f64::consts::PI / (two_pi * 4e7 * 1.5e-4), max_relative = 1e-12);
        assert_relative_eq!(1.0 - b, 3.33e-4, max_relative = 1e-3);
        let b = fidelity_bound(&InteractionSpec::direct(two_pi * 1e9), 1e-3).unwrap();
        assert_relative_eq!(1.0 - b, 2e-6, max_relative = 1e-12);
        assert!(fidelity_bound(&InteractionSpec::direct(1.0), 1e6).unwrap() > fidelity_bound(&InteractionSpec::direct(1.0), 1e3).unwrap());
        assert!(fidelity_bound(&InteractionSpec::direct(0.0), 1.0).is_err());
    }

    #[test]
    fn problem_validation() {
        let p = one_photon_problem(60);
        assert!(p.validate().is_ok());
        assert!(OptimizationProblem { budget: 10, ..p.clone() }.validate().is_err());
        let mut q = p.clone();
        q.fixed.insert("t_w".into(), 1.0);
        assert!(q.validate().is_err());
        let mut q = p.clone();
        q.free[0].name = "bogus".into();
        assert!(q.validate().is_err());
        let mut q = p.clone();
        q.seeds[0].remove("total");
        assert!(q.validate().is_err());
    }

    #[test]
    fn truncation_violation_is_infeasible() {
        let p = one_photon_problem(60);
        let mut point: BTreeMap<String, f64> = p.seeds[0].clone();
        point.insert("t_w".into(), 4.0);
        let e = p.evaluate(&point);
        assert!(!e.feasible && e.objective > 2.0 && e.report.is_none());
    }

    #[test]
    fn optimizer_improves_and_is_reproducible() {
        let p = one_photon_problem(60);
        let seed_value = p.evaluate(&p.seeds[0]).objective;
        let r = optimize_ramp(&p).unwrap();
        assert_eq!(r.log.len(), 60);
        assert!(1.0 - r.fidelity <= seed_value);
        let mut all = p.fixed.clone();
        all.extend(r.parameters.clone());
        let again = p.evaluate(&all);
        assert!((again.objective - (1.0 - r.fidelity)).abs() <= 1e-12);
        let r2 = optimize_ramp(&p).unwrap();
        assert_eq!(r2.parameters, r.parameters);
    }

    #[test]
    fn blockade_ratio_rule_sets_interaction() {
        let mut p = one_photon_problem(60);
        p.interaction = InteractionRule::BlockadeRatio { ratio: 0.1, sign: -1.0 };
        let c = p.build(&p.seeds[0]).unwrap();
        assert_eq!(c.interaction.energy(), -10.0);
    }

    #[test]
    fn problem_json_round_trip() {
        let p = one_photon_problem(80);
        let json = serde_json::to_string(&p).unwrap();
        let back: OptimizationProblem = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }
}
