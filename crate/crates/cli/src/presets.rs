//! Named starting configurations.

use std::collections::BTreeMap;

use rydberg_dressing::gate::{GateOptions, GateSequence};
use rydberg_dressing::model::{ExcitationScheme, InteractionSpec};
use rydberg_dressing::optimize::{
    one_photon_bounds, one_photon_seeds, BlockadeScanSpec, Constraints, FamilyKind, InteractionRule, LandscapeSpec, OptimizationProblem, RampFamily,
};
use rydberg_dressing::pulses::{OnePhotonRamp, RampSchedule};
use rydberg_dressing::spectrum::Branch;

use crate::config::{ForcesTask, GateTask, Grid, OptimizeTask, RampTask, Range, RunConfig, SpectrumTask, SweepTask, Task, SCHEMA_VERSION};

pub const NAMES: [&str; 7] = [
    "spectrum-regimes",
    "ramp-strong-blockade",
    "gate-strong-blockade",
    "optimize-strong-blockade",
    "sweep-landscape",
    "sweep-blockade",
    "forces-potential",
];

/// Optimized one-photon double ramp at `Omega_max = 1`, `V = 10`.
pub fn strong_blockade_ramp() -> RampSchedule {
    let (total, plateau) = (55.332305168276854, 7.070351757970762);
    RampSchedule::OnePhoton(OnePhotonRamp::symmetric(
        1.0,
        -0.33704190563393466,
        -4.407484288864948,
        (total - plateau) / 2.0,
        plateau,
        2.8338307204168856,
    ))
}

pub const STRONG_BLOCKADE_V: f64 = 10.0;

fn range(start: f64, stop: f64, points: usize, log: bool) -> Grid {
    Grid::Range(Range { start, stop, points, log })
}

pub fn strong_blockade_problem() -> OptimizationProblem {
    let interaction = InteractionSpec::direct(STRONG_BLOCKADE_V);
    let seeds = one_photon_seeds(&interaction, 0.01);
    OptimizationProblem {
        family: RampFamily::OnePhoton { omega_max: 1.0, gamma_r: 0.0 },
        interaction: InteractionRule::Fixed { interaction },
        free: one_photon_bounds(&seeds),
        fixed: BTreeMap::new(),
        seeds,
        budget: 400,
        tol: 1e-8,
        decay: false,
        constraints: Constraints { max_p_rr: Some(0.01), rydberg_penalty: 3e-4, ..Constraints::default() },
    }
}

pub fn preset(name: &str) -> Option<RunConfig> {
    let scheme = ExcitationScheme::one_photon(1.0, 0.0, 0.0);
    let interaction = InteractionSpec::direct(STRONG_BLOCKADE_V);
    let task = match name {
        "spectrum-regimes" => Task::Spectrum(SpectrumTask {
            ratios: Grid::Values(vec![0.1, 1.0, 10.0]),
            detunings: range(-5.0, 5.0, 201, false),
            interaction_sign: 1.0,
        }),
        "ramp-strong-blockade" => Task::Ramp(RampTask {
            schedule: strong_blockade_ramp(),
            scheme,
            interaction,
            initial: "11".into(),
            samples: 401,
            tol: 1e-9,
            decay: false,
        }),
        "gate-strong-blockade" => Task::Gate(GateTask {
            sequence: GateSequence::symmetric(strong_blockade_ramp(), scheme),
            interaction,
            options: GateOptions { tol: 1e-9, decay: false, ..GateOptions::default() },
        }),
        "optimize-strong-blockade" => Task::Optimize(OptimizeTask { problem: strong_blockade_problem() }),
        "sweep-landscape" => Task::Sweep(SweepTask::Landscape(LandscapeSpec {
            gamma_ratios: vec![0.01, 0.03, 0.1, 0.3, 1.0],
            powers: vec![1e3, 3e3, 1e4, 3e4, 1e5],
            ..serde_json::from_str(r#"{"gamma_ratios": [], "powers": []}"#).expect("defaults")
        })),
        "sweep-blockade" => Task::Sweep(SweepTask::Blockade(BlockadeScanSpec {
            ratios: vec![0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0],
            families: vec![FamilyKind::OnePhoton],
            ..serde_json::from_str(r#"{"ratios": []}"#).expect("defaults")
        })),
        "forces-potential" => Task::Forces(ForcesTask {
            omega_eff: 1.0,
            delta_eff: 0.0,
            branch: Branch::Minus,
            radii: range(0.1, 10.0, 201, true),
            force_points: Grid::Values(vec![0.5, 1.0, 2.0]),
        }),
        _ => return None,
    };
    Some(RunConfig { schema_version: SCHEMA_VERSION, task })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in NAMES {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(RunConfig::parse(&text).unwrap(), cfg, "{name}");
        }
        assert!(preset("nope").is_none());
    }
}
