//! Execution of each configured task.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::mpsc;

use anyhow::Result;
use rayon::prelude::*;

use rydberg_dressing::dynamics::{propagate_ramp, PropagateOptions, RampGenerator, Sampling, Trajectory};
use rydberg_dressing::forces::{adiabatic_pair_potential, blockade_radius, dressed_force, Dressing};
use rydberg_dressing::gate::spin_echo_gate;
use rydberg_dressing::model::{EffectiveParams, InteractionSpec, TwoAtomState};
use rydberg_dressing::optimize::{optimize_ramp, scan_fidelity_landscape, scan_tr_vs_blockade, RowStatus, SweepResult, SweepRow};
use rydberg_dressing::spectrum::{dressed_spectrum, entangling_energy, BlockKind, Branch};

use crate::config::{basis_label, ForcesTask, GateTask, OptimizeTask, RampTask, RunConfig, SpectrumTask, SweepTask, Task};
use crate::store::{self, Failure, Manifest, OutputDir, RowAppender, RunStatus};

/// Shortest round-trip text for a float; exponent form outside a readable range.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

struct Outcome {
    failures: Vec<Failure>,
    attempted: usize,
}

impl Outcome {
    fn clean() -> Self {
        Outcome { failures: Vec::new(), attempted: 0 }
    }

    fn status(&self) -> RunStatus {
        match self.failures.len() {
            0 => RunStatus::Complete,
            n if n >= self.attempted && self.attempted > 0 => RunStatus::Failed,
            _ => RunStatus::Partial,
        }
    }
}

pub fn run(cfg: &RunConfig, out: &Path, resume: bool) -> Result<Manifest> {
    let mut dir = OutputDir::create(out)?;
    let outcome = match &cfg.task {
        Task::Spectrum(t) => spectrum(t, &mut dir)?,
        Task::Ramp(t) => ramp(t, &mut dir)?,
        Task::Gate(t) => gate(t, &mut dir)?,
        Task::Optimize(t) => optimize(t, &mut dir)?,
        Task::Sweep(t) => sweep(t, &mut dir, resume)?,
        Task::Forces(t) => forces(t, &mut dir)?,
    };
    let status = outcome.status();
    dir.finish(cfg.task.name(), serde_json::to_value(cfg)?, outcome.failures, status)
}

fn spectrum(t: &SpectrumTask, dir: &mut OutputDir) -> Result<Outcome> {
    let ratios = t.ratios.values();
    let deltas = t.detunings.values();
    let grid: Vec<(f64, f64)> = ratios.iter().flat_map(|&r| deltas.iter().map(move |&d| (r, d))).collect();
    let rows: Vec<(Vec<String>, Vec<Vec<String>>)> = grid
        .par_iter()
        .map(|&(ratio, delta)| {
            let p = EffectiveParams::drive(1.0, delta);
            let v = InteractionSpec::direct(t.interaction_sign / ratio);
            let spec = dressed_spectrum(&p, &v);
            let sym = &spec.block(BlockKind::Symmetric).eigenvalues;
            let minus = entangling_energy(&p, &v, Branch::Minus);
            let plus = entangling_energy(&p, &v, Branch::Plus);
            let mut e = vec![num(ratio), num(delta)];
            e.extend(sym.iter().map(|&x| num(x)));
            e.extend([minus.e_ls1, plus.e_ls1, minus.kappa, plus.kappa].map(num));
            e.push(u8::from(minus.degenerate || plus.degenerate).to_string());
            let pops = [("minus", minus), ("plus", plus)]
                .iter()
                .map(|(name, r)| {
                    let mut row = vec![num(ratio), num(delta), name.to_string()];
                    row.extend(r.populations.map(num));
                    row
                })
                .collect();
            (e, pops)
        })
        .collect();
    let header = ["omega_over_v", "delta_over_omega", "e_sym_0", "e_sym_1", "e_sym_2", "e_ls1_minus", "e_ls1_plus", "kappa_minus", "kappa_plus", "degenerate"];
    let energies: Vec<Vec<String>> = rows.iter().map(|r| r.0.clone()).collect();
    dir.write_csv("energies.csv", &header.map(String::from), &energies)?;
    let pops: Vec<Vec<String>> = rows.into_iter().flat_map(|r| r.1).collect();
    let header = ["omega_over_v", "delta_over_omega", "branch", "p_11", "p_b", "p_rr"];
    dir.write_csv("populations.csv", &header.map(String::from), &pops)?;
    Ok(Outcome::clean())
}

fn trajectory_rows(traj: &Trajectory) -> Vec<Vec<String>> {
    traj.csv_rows().into_iter().map(|r| r.into_iter().map(num).collect()).collect()
}

fn ramp(t: &RampTask, dir: &mut OutputDir) -> Result<Outcome> {
    let (a, b) = basis_label(&t.initial).map_err(anyhow::Error::msg)?;
    let g = RampGenerator::new(t.schedule, t.scheme, t.interaction, t.decay)?;
    let opts = PropagateOptions { sampling: Sampling::Uniform(t.samples), ..PropagateOptions::with_tol(t.tol) };
    let traj = propagate_ramp(&g, &TwoAtomState::basis(a, b), &opts)?;
    dir.write_csv("trajectory.csv", &Trajectory::csv_header(), &trajectory_rows(&traj))?;
    let summary = serde_json::json!({
        "initial": t.initial,
        "window": t.schedule.support(),
        "rydberg_integral": traj.rydberg_integral,
        "final_norm": traj.norms.last(),
        "accepted_steps": traj.stats.accepted,
        "rejected_steps": traj.stats.rejected,
    });
    dir.write_json("summary.json", &summary)?;
    Ok(Outcome::clean())
}

fn gate(t: &GateTask, dir: &mut OutputDir) -> Result<Outcome> {
    let report = spin_echo_gate(&t.sequence, &t.interaction, &t.options)?;
    dir.write_json("gate_report.json", &report)?;
    Ok(Outcome::clean())
}

fn optimize(t: &OptimizeTask, dir: &mut OutputDir) -> Result<Outcome> {
    let result = optimize_ramp(&t.problem)?;
    let names: Vec<String> = t.problem.free.iter().map(|b| b.name.clone()).collect();
    let mut header = vec!["index".to_string(), "start".into()];
    header.extend(names.iter().cloned());
    header.extend(["objective", "fidelity", "t_r", "max_p_rr", "feasible", "error"].map(String::from));
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let rows: Vec<Vec<String>> = result
        .log
        .iter()
        .map(|e| {
            let mut row = vec![e.index.to_string(), e.start.to_string()];
            row.extend(names.iter().map(|n| num(e.parameters[n])));
            row.extend([num(e.objective), opt(e.fidelity), opt(e.t_r), opt(e.max_p_rr), u8::from(e.feasible).to_string(), e.error.clone().unwrap_or_default()]);
            row
        })
        .collect();
    dir.write_csv("evaluations.csv", &header, &rows)?;
    let optimum = serde_json::json!({
        "parameters": result.parameters,
        "candidate": result.candidate,
        "fidelity": result.fidelity,
        "evaluations": result.log.len(),
    });
    dir.write_json("optimum.json", &optimum)?;
    dir.write_json("gate_report.json", &result.report)?;
    Ok(Outcome::clean())
}

fn sweep_csv(rows: &[SweepRow]) -> (Vec<String>, Vec<Vec<String>>) {
    let collect = |f: fn(&SweepRow) -> &BTreeMap<String, f64>| rows.iter().flat_map(|r| f(r).keys().cloned()).collect::<BTreeSet<String>>();
    let params = collect(|r| &r.params);
    let metrics = collect(|r| &r.metrics);
    let optimum = collect(|r| &r.optimum);
    let mut header = vec!["index".to_string(), "status".into()];
    header.extend(params.iter().cloned());
    header.extend(metrics.iter().cloned());
    header.extend(optimum.iter().map(|k| format!("opt_{k}")));
    header.extend(["evaluations", "error"].map(String::from));
    let cell = |m: &BTreeMap<String, f64>, k: &String| m.get(k).copied().map(num).unwrap_or_default();
    let body = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.index.to_string(), if r.status == RowStatus::Ok { "ok".into() } else { "failed".into() }];
            row.extend(params.iter().map(|k| cell(&r.params, k)));
            row.extend(metrics.iter().map(|k| cell(&r.metrics, k)));
            row.extend(optimum.iter().map(|k| cell(&r.optimum, k)));
            row.extend([r.evaluations.to_string(), r.error.clone().unwrap_or_default()]);
            row
        })
        .collect();
    (header, body)
}

fn sweep(t: &SweepTask, dir: &mut OutputDir, resume: bool) -> Result<Outcome> {
    let store_path = dir.path(store::RESULTS);
    if !resume && store_path.exists() {
        std::fs::remove_file(&store_path)?;
    }
    let previous = store::load_rows(&store_path)?;
    let skip = store::completed(&previous);
    if !skip.is_empty() {
        log::info!("resuming: {} completed points", skip.len());
    }
    // Single writer: workers send finished rows, one thread appends them.
    let (tx, rx) = mpsc::channel::<SweepRow>();
    let mut appender = RowAppender::open(&store_path)?;
    let writer = std::thread::spawn(move || -> Result<()> {
        for row in rx {
            appender.append(&row)?;
        }
        Ok(())
    });
    let sink = move |row: &SweepRow| {
        let _ = tx.send(row.clone());
    };
    let fresh: SweepResult = match t {
        SweepTask::Landscape(s) => scan_fidelity_landscape(s, &skip, sink),
        SweepTask::Blockade(s) => scan_tr_vs_blockade(s, &skip, sink),
    };
    writer.join().map_err(|_| anyhow::anyhow!("result writer panicked"))??;

    let mut all = previous;
    for row in fresh.rows {
        all.insert(row.index, row);
    }
    store::canonicalize(&store_path, &all)?;
    dir.register(store::RESULTS);
    let rows: Vec<SweepRow> = all.into_values().collect();
    let (header, body) = sweep_csv(&rows);
    dir.write_csv("sweep.csv", &header, &body)?;
    let summary = match t {
        SweepTask::Landscape(s) => serde_json::json!({
            "kind": "landscape",
            "points": s.gamma_ratios.len() * s.powers.len(),
            "best_fidelity": best(&rows, "fidelity"),
        }),
        SweepTask::Blockade(s) => serde_json::json!({
            "kind": "blockade",
            "points": s.ratios.len() * s.families.len(),
            "saturation_t_r_pi_over_v": saturation(&rows),
        }),
    };
    dir.write_json("summary.json", &summary)?;
    let failures: Vec<Failure> = rows
        .iter()
        .filter(|r| r.status == RowStatus::Failed)
        .map(|r| Failure { point: r.index.to_string(), error: r.error.clone().unwrap_or_default() })
        .collect();
    Ok(Outcome { failures, attempted: rows.len() })
}

fn best(rows: &[SweepRow], key: &str) -> Option<f64> {
    rows.iter().filter_map(|r| r.metrics.get(key)).copied().reduce(f64::max)
}

fn saturation(rows: &[SweepRow]) -> Option<f64> {
    rows.iter()
        .filter(|r| r.status == RowStatus::Ok && r.params.get("family") == Some(&0.0))
        .max_by(|a, b| a.params["ratio"].total_cmp(&b.params["ratio"]))
        .and_then(|r| r.metrics.get("t_r_pi_over_v").copied())
}

fn forces(t: &ForcesTask, dir: &mut OutputDir) -> Result<Outcome> {
    // Lengths in units of the blockade radius: C6 = Omega_eff R_block^6 with R_block = 1.
    let c6 = t.omega_eff;
    debug_assert!((blockade_radius(c6, t.omega_eff)? - 1.0).abs() < 1e-12);
    let d = Dressing { omega_eff: t.omega_eff, delta_eff: t.delta_eff, branch: t.branch };
    let pts = adiabatic_pair_potential(&t.radii.values(), &d, c6)?;
    let rows: Vec<Vec<String>> = pts
        .iter()
        .map(|p| vec![num(p.r), num(p.kappa / t.omega_eff), num(p.dkappa_dr / t.omega_eff), num(p.v / t.omega_eff), num(p.p_rr), u8::from(p.flagged).to_string()])
        .collect();
    let header = ["r_over_block", "kappa_over_omega", "dkappa_dr", "v_over_omega", "p_rr", "flagged"];
    dir.write_csv("potential.csv", &header.map(String::from), &rows)?;

    let points = t.force_points.values();
    let results: Vec<_> = points.par_iter().map(|&r| (r, dressed_force(r, &d, c6))).collect();
    let mut failures = Vec::new();
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|(r, f)| match f {
            Ok(f) => vec![num(*r), num(f.finite_difference / t.omega_eff), num(f.eigenstate / t.omega_eff), num(f.relative_mismatch), String::new()],
            Err(e) => {
                failures.push(Failure { point: format!("r_over_block={}", num(*r)), error: e.to_string() });
                vec![num(*r), String::new(), String::new(), String::new(), e.to_string()]
            }
        })
        .collect();
    let header = ["r_over_block", "force_fd", "force_eigenstate", "relative_mismatch", "error"];
    dir.write_csv("forces.csv", &header.map(String::from), &rows)?;
    Ok(Outcome { failures, attempted: points.len() })
}
