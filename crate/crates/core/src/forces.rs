//! Adiabatic pair potentials and dressed forces for van der Waals interactions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pair, LR};
use crate::model::{EffectiveParams, InteractionSpec};
use crate::spectrum::{branch_state, entangling_energy, near_anti_blockade, Branch};

/// Relative agreement required between the two force evaluations.
pub const DEFAULT_FORCE_TOLERANCE: f64 = 1e-3;

/// Relative finite-difference step `h / R`.
pub const FD_STEP: f64 = 1e-4;

/// Isotropic `V(R) = C6 / R^6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPotentialModel {
    pub c6: f64,
}

impl PairPotentialModel {
    pub fn potential(&self, r: f64) -> f64 {
        self.c6 * r.powi(-6)
    }

    pub fn gradient(&self, r: f64) -> f64 {
        -6.0 * self.c6 * r.powi(-7)
    }

    pub fn interaction(&self, r: f64) -> InteractionSpec {
        InteractionSpec::VanDerWaals { c6: self.c6, r }
    }
}

/// Distance at which `C6 R^-6 = Omega_eff`.
pub fn blockade_radius(c6: f64, omega_eff: f64) -> Result<f64> {
    if !(c6 > 0.0 && omega_eff > 0.0) || !c6.is_finite() || !omega_eff.is_finite() {
        return Err(Error::Domain(format!("blockade radius needs C6 > 0 and Omega_eff > 0, got {c6}, {omega_eff}")));
    }
    Ok((c6 / omega_eff).powf(1.0 / 6.0))
}

/// Single-atom dressing shared by every point of a potential curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dressing {
    pub omega_eff: f64,
    pub delta_eff: f64,
    pub branch: Branch,
}

impl Dressing {
    fn params(&self) -> EffectiveParams {
        EffectiveParams::drive(self.omega_eff, self.delta_eff)
    }

    /// Whether `V` sits on a resolved anti-blockade resonance `V = 2 Delta_eff`.
    pub fn at_anti_blockade(&self, v: &InteractionSpec) -> bool {
        self.delta_eff.abs() > self.omega_eff.abs() && near_anti_blockade(&self.params(), v, self.omega_eff.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialPoint {
    pub r: f64,
    pub v: f64,
    pub kappa: f64,
    /// `d kappa / dR` from the eigenstate expectation.
    pub dkappa_dr: f64,
    pub p_rr: f64,
    /// Within `Omega_eff` of a resolved anti-blockade resonance, or on a degenerate branch.
    pub flagged: bool,
}

fn kappa_at(model: &PairPotentialModel, d: &Dressing, r: f64) -> f64 {
    if model.c6 == 0.0 {
        return 0.0;
    }
    entangling_energy(&d.params(), &model.interaction(r), d.branch).kappa
}

fn rr_weight(model: &PairPotentialModel, d: &Dressing, r: f64) -> f64 {
    branch_state(&d.params(), &model.interaction(r), d.branch)[pair(LR, LR)].norm_sqr()
}

fn point(model: &PairPotentialModel, d: &Dressing, r: f64) -> PotentialPoint {
    let v = model.interaction(r);
    let e = entangling_energy(&d.params(), &v, d.branch);
    let kappa = if model.c6 == 0.0 { 0.0 } else { e.kappa };
    let p_rr = rr_weight(model, d, r);
    let flagged = e.degenerate || d.at_anti_blockade(&v);
    PotentialPoint { r, v: v.energy(), kappa, dkappa_dr: p_rr * model.gradient(r), p_rr, flagged }
}

/// Entangling energy `kappa(R)` along a radial grid: the `R`-dependent part of
/// the adiabatic potential of the dressed `|1,1>` pair.
pub fn adiabatic_pair_potential(grid: &[f64], dressing: &Dressing, c6: f64) -> Result<Vec<PotentialPoint>> {
    if grid.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::Domain("radial grid must be positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("radial grid must be strictly increasing".into()));
    }
    let model = PairPotentialModel { c6 };
    Ok(grid.par_iter().map(|&r| point(&model, dressing, r)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedForce {
    pub r: f64,
    /// `-d kappa / dR` by Richardson-extrapolated central differences.
    pub finite_difference: f64,
    /// `-|c_rr|^2 dV/dR` in the dressed eigenstate.
    pub eigenstate: f64,
    pub relative_mismatch: f64,
}

/// Radial force on the dressed `|1,1>` pair.
pub fn dressed_force(r: f64, dressing: &Dressing, c6: f64) -> Result<DressedForce> {
    dressed_force_with(r, dressing, c6, DEFAULT_FORCE_TOLERANCE)
}

pub fn dressed_force_with(r: f64, dressing: &Dressing, c6: f64, tolerance: f64) -> Result<DressedForce> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("separation must be positive, got {r}")));
    }
    let model = PairPotentialModel { c6 };
    if dressing.at_anti_blockade(&model.interaction(r)) {
        return Err(Error::Domain(format!("R = {r} lies at the anti-blockade resonance")));
    }
    let h = FD_STEP * r;
    let central = |h: f64| (kappa_at(&model, dressing, r + h) - kappa_at(&model, dressing, r - h)) / (2.0 * h);
    let fd = -(4.0 * central(h / 2.0) - central(h)) / 3.0;
    let hf = -rr_weight(&model, dressing, r) * model.gradient(r);
    let scale = match blockade_radius(c6.abs(), dressing.omega_eff.abs()) {
        Ok(rb) => dressing.omega_eff.abs() / rb,
        Err(_) => 0.0,
    };
    let denom = fd.abs().max(hf.abs()).max(1e-9 * scale);
    let relative_mismatch = if denom == 0.0 { 0.0 } else { (fd - hf).abs() / denom };
    if relative_mismatch > tolerance {
        return Err(Error::ForceMismatch { r, fd, hf });
    }
    Ok(DressedForce { r, finite_difference: fd, eigenstate: hf, relative_mismatch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const RESONANT: Dressing = Dressing { omega_eff: 1.0, delta_eff: 0.0, branch: Branch::Minus };

    #[test]
    fn blockade_radius_examples() {
        assert_relative_eq!(blockade_radius(2.5, 2.5).unwrap(), 1.0, max_relative = 1e-15);
        let a = blockade_radius(3.0, 1.0).unwrap();
        assert_relative_eq!(blockade_radius(3.0, 64.0).unwrap(), a / 2.0, max_relative = 1e-14);
        let m = PairPotentialModel { c6: 7.0 };
        assert_relative_eq!(m.potential(blockade_radius(7.0, 0.3).unwrap()), 0.3, max_relative = 1e-13);
        assert!(blockade_radius(0.0, 1.0).is_err());
        assert!(blockade_radius(1.0, -1.0).is_err());
    }

    #[test]
    fn no_interaction_means_flat_potential() {
        let grid: Vec<f64> = (1..20).map(|k| 0.2 * k as f64).collect();
        let pts = adiabatic_pair_potential(&grid, &RESONANT, 0.0).unwrap();
        assert!(pts.iter().all(|p| p.kappa == 0.0 && p.dkappa_dr == 0.0));
    }

    #[test]
    fn grid_is_validated() {
        assert!(adiabatic_pair_potential(&[1.0, 0.5], &RESONANT, 1.0).is_err());
        assert!(adiabatic_pair_potential(&[0.0, 0.5], &RESONANT, 1.0).is_err());
        assert!(adiabatic_pair_potential(&[], &RESONANT, 1.0).unwrap().is_empty());
    }

    #[test]
    fn far_field_quarter_asymptote() {
        let rb = 1.0;
        let r = 4.0 * rb;
        let v = PairPotentialModel { c6: 1.0 };
        let p = adiabatic_pair_potential(&[r], &RESONANT, 1.0).unwrap()[0];
        assert!((p.kappa / (v.potential(r) / 4.0) - 1.0).abs() < 0.05);
        let f = dressed_force(r, &RESONANT, 1.0).unwrap();
        assert!((f.eigenstate / (1.5 * r.powi(-7)) - 1.0).abs() < 0.05);
    }

    #[test]
    fn anti_blockade_points_are_flagged() {
        let d = Dressing { omega_eff: 1.0, delta_eff: 5.0, branch: Branch::Minus };
        let r = 10f64.powf(-1.0 / 6.0);
        assert!(adiabatic_pair_potential(&[r], &d, 1.0).unwrap()[0].flagged);
        assert!(dressed_force(r, &d, 1.0).is_err());
    }

    #[test]
    fn transition_region_is_around_blockade_radius() {
        let grid: Vec<f64> = (0..=400).map(|k| 0.1 * 80f64.powf(k as f64 / 400.0)).collect();
        let pts = adiabatic_pair_potential(&grid, &RESONANT, 1.0).unwrap();
        let peak = pts.iter().map(|p| p.dkappa_dr.abs()).fold(0.0, f64::max);
        for p in pts.iter().filter(|p| p.dkappa_dr.abs() > 0.1 * peak) {
            assert!((0.5..=2.0).contains(&p.r), "{}", p.r);
        }
        // Monotone between the core and the far field.
        assert!(pts.windows(2).all(|w| w[1].kappa <= w[0].kappa + 1e-12));
    }

    proptest! {
        #[test]
        fn force_methods_agree(x in -0.5f64..0.5, delta in -0.8f64..0.8) {
            let r = 10f64.powf(x);
            let d = Dressing { omega_eff: 1.0, delta_eff: delta, branch: Branch::Minus };
            let f = dressed_force(r, &d, 1.0).unwrap();
            prop_assert!(f.relative_mismatch < 1e-3);
        }
    }
}
