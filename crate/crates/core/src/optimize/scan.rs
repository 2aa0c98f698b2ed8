//! Parameter scans: the open-system fidelity landscape and the integrated
//! Rydberg population versus blockade strength.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{optimize_ramp, Bound, Constraints, InteractionRule, OptimizationProblem, OptimizationResult, RampFamily};
use crate::error::Result;
use crate::model::{EffectiveParams, InteractionSpec, LightShiftConvention};
use crate::pulses::{OnePhotonRamp, RampSchedule};
use crate::spectrum::{entangling_energy, Branch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed,
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub status: RowStatus,
    /// Grid coordinates.
    pub params: BTreeMap<String, f64>,
    /// Results at the optimum.
    pub metrics: BTreeMap<String, f64>,
    /// Optimized free parameters.
    pub optimum: BTreeMap<String, f64>,
    pub evaluations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: String,
    pub rows: Vec<SweepRow>,
    pub summary: BTreeMap<String, f64>,
}

/// A named work item: grid coordinates and the problem to optimize there.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub params: BTreeMap<String, f64>,
    pub problem: OptimizationProblem,
}

/// Optimize every point not in `skip`, in parallel, reporting each row to
/// `sink` as it completes. Rows are returned ordered by index.
pub fn run_points<S>(points: &[SweepPoint], skip: &BTreeSet<usize>, metrics: fn(&OptimizationResult) -> BTreeMap<String, f64>, sink: S) -> Vec<SweepRow>
where
    S: Fn(&SweepRow) + Sync,
{
    let mut rows: Vec<SweepRow> = points
        .par_iter()
        .filter(|p| !skip.contains(&p.index))
        .map(|p| {
            let row = match optimize_ramp(&p.problem) {
                Ok(r) => SweepRow {
                    index: p.index,
                    status: RowStatus::Ok,
                    params: p.params.clone(),
                    metrics: metrics(&r),
                    optimum: r.parameters.clone(),
                    evaluations: r.log.len(),
                    error: None,
                },
                Err(e) => SweepRow {
                    index: p.index,
                    status: RowStatus::Failed,
                    params: p.params.clone(),
                    metrics: BTreeMap::new(),
                    optimum: BTreeMap::new(),
                    evaluations: 0,
                    error: Some(e.to_string()),
                },
            };
            sink(&row);
            row
        })
        .collect();
    rows.sort_by_key(|r| r.index);
    rows
}

fn common_metrics(r: &OptimizationResult) -> BTreeMap<String, f64> {
    let v = r.candidate.interaction.energy().abs();
    let om = r.candidate.omega_eff_max;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut m = BTreeMap::new();
    m.insert("fidelity".into(), r.fidelity);
    m.insert("log10_infidelity".into(), (1.0 - r.fidelity).max(1e-300).log10());
    m.insert("t_r".into(), r.report.t_r);
    m.insert("t_r_total".into(), r.report.t_r_total);
    m.insert("t_r_rabi_periods".into(), r.report.t_r * om / two_pi);
    m.insert("t_r_pi_over_v".into(), r.report.t_r * v / std::f64::consts::PI);
    m.insert("max_p_rr".into(), r.report.max_p_rr);
    m.insert("leakage".into(), r.report.leakage);
    m.insert("omega_eff_max".into(), om);
    m.insert("v".into(), r.candidate.interaction.energy());
    if let Some(phi2) = r.report.phi2 {
        m.insert("phi2".into(), phi2);
    }
    m
}

/// Grid over `Gamma_a/Gamma_r` and `Omega_1a^max / (2 pi Gamma_r)` for the two-photon gate with decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSpec {
    pub gamma_ratios: Vec<f64>,
    pub powers: Vec<f64>,
    #[serde(default = "default_omega_ar_ratio")]
    pub omega_ar_ratio: f64,
    #[serde(default = "default_blockade_ratio")]
    pub blockade_ratio: f64,
    #[serde(default = "default_landscape_budget")]
    pub budget: usize,
    #[serde(default = "default_scan_tol")]
    pub tol: f64,
    #[serde(default)]
    pub convention: LightShiftConvention,
    /// Bounds for `t_stop`, `t_w` (units of `1/Omega_eff^max`) and `delta_1a` (units of `Omega_1a^max`).
    #[serde(default = "default_two_photon_bounds")]
    pub bounds: Vec<Bound>,
    #[serde(default = "default_two_photon_seeds")]
    pub seeds: Vec<BTreeMap<String, f64>>,
}

pub fn default_omega_ar_ratio() -> f64 {
    1.4
}

fn default_blockade_ratio() -> f64 {
    0.1
}

fn default_landscape_budget() -> usize {
    200
}

fn default_scan_tol() -> f64 {
    1e-8
}

fn bounds(list: &[(&str, f64, f64)]) -> Vec<Bound> {
    list.iter().map(|&(n, l, u)| Bound { name: n.into(), lower: l, upper: u }).collect()
}

fn point(list: &[(&str, f64)]) -> BTreeMap<String, f64> {
    list.iter().map(|&(n, v)| (n.to_string(), v)).collect()
}

pub fn default_two_photon_bounds() -> Vec<Bound> {
    bounds(&[("t_stop", 0.0, 40.0), ("t_w", 0.5, 12.0), ("delta_1a", 5.0, 60.0)])
}

pub fn default_two_photon_seeds() -> Vec<BTreeMap<String, f64>> {
    vec![
        point(&[("t_stop", 9.0), ("t_w", 3.0), ("delta_1a", 5.5)]),
        point(&[("t_stop", 5.0), ("t_w", 5.0), ("delta_1a", 8.0)]),
    ]
}

impl LandscapeSpec {
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for (i, &ga) in self.gamma_ratios.iter().enumerate() {
            for (j, &pw) in self.powers.iter().enumerate() {
                let gamma_r = 1.0 / (2.0 * std::f64::consts::PI * pw);
                let problem = OptimizationProblem {
                    family: RampFamily::TwoPhoton {
                        omega_1a_max: 1.0,
                        omega_ar_ratio: self.omega_ar_ratio,
                        scaled_times: true,
                        gamma_a: ga * gamma_r,
                        gamma_r,
                        convention: self.convention,
                    },
                    interaction: InteractionRule::BlockadeRatio { ratio: self.blockade_ratio, sign: 1.0 },
                    free: self.bounds.clone(),
                    fixed: BTreeMap::new(),
                    seeds: self.seeds.clone(),
                    budget: self.budget,
                    tol: self.tol,
                    decay: true,
                    constraints: Constraints::default(),
                };
                let params = point(&[("gamma_ratio", ga), ("power", pw), ("i", i as f64), ("j", j as f64)]);
                out.push(SweepPoint { index: i * self.powers.len() + j, params, problem });
            }
        }
        out
    }
}

/// Optimize `Delta_1a` and the ramp shape at every landscape grid point.
pub fn scan_fidelity_landscape<S: Fn(&SweepRow) + Sync>(spec: &LandscapeSpec, skip: &BTreeSet<usize>, sink: S) -> SweepResult {
    let rows = run_points(&spec.points(), skip, common_metrics, sink);
    let best = rows.iter().filter_map(|r| r.metrics.get("fidelity")).copied().fold(f64::NAN, f64::max);
    let mut summary = BTreeMap::new();
    summary.insert("best_fidelity".into(), best);
    SweepResult { kind: "landscape".into(), rows, summary }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    OnePhoton,
    TwoPhoton,
}

/// `t_r` of optimized passages versus `Omega_eff^max / |V|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockadeScanSpec {
    pub ratios: Vec<f64>,
    #[serde(default = "default_families")]
    pub families: Vec<FamilyKind>,
    #[serde(default = "default_rr_cap")]
    pub max_p_rr: f64,
    #[serde(default = "default_blockade_budget")]
    pub budget: usize,
    #[serde(default = "default_scan_tol")]
    pub tol: f64,
    /// Anti-blockade margin in units of `|V|`.
    #[serde(default = "default_margin")]
    pub anti_blockade_margin: f64,
    #[serde(default = "default_omega_ar_ratio")]
    pub omega_ar_ratio: f64,
    /// Rydberg-time penalty in units of `min(Omega_eff^max, |V|)`.
    #[serde(default = "default_scan_penalty")]
    pub rydberg_penalty: f64,
}

fn default_scan_penalty() -> f64 {
    3e-4
}

fn default_families() -> Vec<FamilyKind> {
    vec![FamilyKind::OnePhoton]
}

fn default_rr_cap() -> f64 {
    0.05
}

fn default_blockade_budget() -> usize {
    300
}

fn default_margin() -> f64 {
    0.1
}

/// Ramp-phase integral `int kappa dt` of a one-photon ramp on the `|1,1>`-continuous branch.
pub fn ramp_phase(ramp: &OnePhotonRamp, v: &InteractionSpec, samples: usize) -> f64 {
    let n = samples.max(2) & !1;
    let h = (ramp.t4 - ramp.t1) / n as f64;
    let kappa = |t: f64| {
        let (om, de) = ramp.evaluate(t);
        entangling_energy(&EffectiveParams::drive(om, de), v, Branch::Minus).kappa
    };
    let mut s = kappa(ramp.t1) + kappa(ramp.t4);
    for k in 1..n {
        s += kappa(ramp.t1 + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Plateau detuning at which the dressed `|r,r>` population equals `target`,
/// if the `Delta < 0` branch reaches it at all.
pub fn detuning_for_rr_population(v: &InteractionSpec, target: f64) -> Option<f64> {
    let p_rr = |d: f64| entangling_energy(&EffectiveParams::drive(1.0, d), v, Branch::Minus).populations[2];
    let (mut far, mut near) = (-10.0, -0.02);
    if p_rr(near) < target || p_rr(far) > target {
        return None;
    }
    for _ in 0..60 {
        let mid = 0.5 * (far + near);
        if p_rr(mid) > target {
            near = mid;
        } else {
            far = mid;
        }
    }
    Some(far)
}

/// Starting points for the one-photon family at `Omega_max = 1` and the
/// given interaction. The plateau is chosen so that `int kappa dt` reaches
/// `pi/2`. When the `|r,r>` population can reach `rr_cap` the plateau
/// detunings sit just below the cap; otherwise a fixed ladder close to
/// resonance is used.
pub fn one_photon_seeds(v: &InteractionSpec, rr_cap: f64) -> Vec<BTreeMap<String, f64>> {
    let tail = super::tail_widths(crate::pulses::DEFAULT_TRUNCATION) * 1.02;
    let near_cap: Vec<f64> = [0.85, 0.6].iter().filter_map(|f| detuning_for_rr_population(v, f * rr_cap)).collect();
    let ladder = if near_cap.is_empty() { vec![-0.3, -0.6, -1.0, -1.6, -2.5] } else { near_cap };
    let mut seeds = Vec::new();
    for delta_min in ladder {
        let plateau_state = entangling_energy(&EffectiveParams::drive(1.0, delta_min), v, Branch::Minus);
        if plateau_state.populations[2] > 0.9 * rr_cap || plateau_state.kappa <= 0.0 {
            continue;
        }
        for &t_w in &[1.5, 2.5] {
            let delta_max = (4.0 * delta_min).min(-5.0);
            let ramp = tail * t_w;
            let bare = OnePhotonRamp::symmetric(1.0, delta_min, delta_max, ramp, 0.0, t_w);
            let phase = ramp_phase(&bare, v, 200);
            let plateau = ((std::f64::consts::FRAC_PI_2 - phase) / plateau_state.kappa).max(0.0);
            seeds.push(point(&[
                ("t_w", t_w),
                ("plateau", plateau),
                ("delta_min", delta_min),
                ("delta_max", delta_max),
                ("total", 2.0 * ramp + plateau),
            ]));
        }
        if seeds.len() >= 4 {
            break;
        }
    }
    seeds
}

/// Bounds enclosing a set of one-photon seeds.
pub fn one_photon_bounds(seeds: &[BTreeMap<String, f64>]) -> Vec<Bound> {
    let max_of = |k: &str| seeds.iter().map(|s| s[k]).fold(0.0, f64::max);
    let plateau = max_of("plateau");
    let ramps = seeds.iter().map(|s| s["total"] - s["plateau"]).fold(0.0, f64::max);
    bounds(&[
        ("t_w", 0.5, 6.0),
        ("plateau", 0.0, 2.0 * plateau + 10.0),
        ("delta_min", -4.0, -0.02),
        ("delta_max", -20.0, -1.0),
        ("total", 4.0, 2.0 * plateau + 3.0 * ramps + 20.0),
    ])
}

impl BlockadeScanSpec {
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for (fi, family) in self.families.iter().enumerate() {
            for (i, &ratio) in self.ratios.iter().enumerate() {
                let index = fi * self.ratios.len() + i;
                let v = 1.0 / ratio;
                let constraints = Constraints {
                    max_p_rr: Some(self.max_p_rr),
                    anti_blockade_margin: self.anti_blockade_margin * v,
                    rydberg_penalty: self.rydberg_penalty * v.min(1.0),
                    ..Constraints::default()
                };
                let problem = match family {
                    FamilyKind::OnePhoton => {
                        let interaction = InteractionSpec::direct(v);
                        let mut seeds = one_photon_seeds(&interaction, self.max_p_rr);
                        if seeds.is_empty() {
                            seeds = one_photon_seeds(&interaction, 1.0);
                        }
                        OptimizationProblem {
                            family: RampFamily::OnePhoton { omega_max: 1.0, gamma_r: 0.0 },
                            interaction: InteractionRule::Fixed { interaction },
                            free: one_photon_bounds(&seeds),
                            fixed: BTreeMap::new(),
                            seeds,
                            budget: self.budget,
                            tol: self.tol,
                            decay: false,
                            constraints,
                        }
                    }
                    FamilyKind::TwoPhoton => OptimizationProblem {
                        family: RampFamily::TwoPhoton {
                            omega_1a_max: 1.0,
                            omega_ar_ratio: self.omega_ar_ratio,
                            scaled_times: true,
                            gamma_a: 0.0,
                            gamma_r: 0.0,
                            convention: LightShiftConvention::Differential,
                        },
                        interaction: InteractionRule::BlockadeRatio { ratio, sign: 1.0 },
                        free: default_two_photon_bounds(),
                        fixed: BTreeMap::new(),
                        seeds: default_two_photon_seeds(),
                        budget: self.budget,
                        tol: self.tol,
                        decay: false,
                        constraints,
                    },
                };
                let params = point(&[("ratio", ratio), ("family", fi as f64)]);
                out.push(SweepPoint { index, params, problem });
            }
        }
        out
    }
}

pub fn scan_tr_vs_blockade<S: Fn(&SweepRow) + Sync>(spec: &BlockadeScanSpec, skip: &BTreeSet<usize>, sink: S) -> SweepResult {
    let rows = run_points(&spec.points(), skip, common_metrics, sink);
    let mut summary = BTreeMap::new();
    if let Some(last) = rows
        .iter()
        .filter(|r| r.status == RowStatus::Ok && r.params.get("family") == Some(&0.0))
        .max_by(|a, b| a.params["ratio"].total_cmp(&b.params["ratio"]))
    {
        summary.insert("saturation_t_r_pi_over_v".into(), last.metrics["t_r_pi_over_v"]);
    }
    SweepResult { kind: "blockade".into(), rows, summary }
}

/// Whether a sequence of values decreases monotonically up to relative noise `slack`.
pub fn decreasing_within(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack))
}

/// Sanity check that the ramp built from a seed is a valid passage.
pub fn seed_schedule(seed: &BTreeMap<String, f64>) -> Result<RampSchedule> {
    let ramp = (seed["total"] - seed["plateau"]) / 2.0;
    let r = RampSchedule::OnePhoton(OnePhotonRamp::symmetric(1.0, seed["delta_min"], seed["delta_max"], ramp, seed["plateau"], seed["t_w"]));
    r.validate_passage(crate::pulses::DEFAULT_TRUNCATION)?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_valid_passages_with_quarter_phase() {
        let v = InteractionSpec::direct(10.0);
        let seeds = one_photon_seeds(&v, 0.05);
        assert!(!seeds.is_empty());
        for s in &seeds {
            let RampSchedule::OnePhoton(r) = seed_schedule(s).unwrap() else { unreachable!() };
            let phase = ramp_phase(&r, &v, 400);
            assert!((phase - std::f64::consts::FRAC_PI_2).abs() < 1e-2, "{phase}");
        }
    }

    #[test]
    fn weak_blockade_seeds_respect_cap() {
        let v = InteractionSpec::direct(0.01);
        let seeds = one_photon_seeds(&v, 0.05);
        assert!(!seeds.is_empty());
        for s in &seeds {
            let p = entangling_energy(&EffectiveParams::drive(1.0, s["delta_min"]), &v, Branch::Minus);
            assert!(p.populations[2] <= 0.045);
        }
        let d = detuning_for_rr_population(&v, 0.03).unwrap();
        let p = entangling_energy(&EffectiveParams::drive(1.0, d), &v, Branch::Minus);
        assert!((p.populations[2] - 0.03).abs() < 1e-9);
        assert!(detuning_for_rr_population(&InteractionSpec::direct(10.0), 0.05).is_none());
    }

    #[test]
    fn landscape_points_are_indexed_row_major() {
        let spec: LandscapeSpec = serde_json::from_str(r#"{"gamma_ratios": [0.1, 1.0], "powers": [1e3, 1e4, 1e5]}"#).unwrap();
        let pts = spec.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[4].index, 4);
        assert_eq!(pts[4].params["gamma_ratio"], 1.0);
        assert_eq!(pts[4].params["power"], 1e4);
        assert!(pts.iter().all(|p| p.problem.validate().is_ok()));
    }

    #[test]
    fn skipped_points_are_not_rerun() {
        let spec = BlockadeScanSpec {
            ratios: vec![0.1],
            families: vec![FamilyKind::OnePhoton],
            max_p_rr: 0.05,
            budget: 50,
            tol: 1e-6,
            anti_blockade_margin: 0.1,
            omega_ar_ratio: 1.4,
            rydberg_penalty: 3e-4,
        };
        let skip: BTreeSet<usize> = [0].into_iter().collect();
        let r = scan_tr_vs_blockade(&spec, &skip, |_| panic!("nothing should run"));
        assert!(r.rows.is_empty());
    }

    #[test]
    fn monotone_helper() {
        assert!(decreasing_within(&[3.0, 2.0, 2.05, 1.0], 0.05));
        assert!(!decreasing_within(&[3.0, 2.0, 2.5], 0.05));
    }
}
