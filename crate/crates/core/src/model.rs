//! Level schemes, atom-light Hamiltonians and decay generators.
//!
//! Units: hbar = 1 throughout. Every rate and energy is an angular frequency
//! measured in a user-chosen reference unit (typically the peak effective
//! Rabi frequency), and times are in the inverse of that unit.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, kron3, pair, Mat3, Mat9, Vec9, C64, I, L0, L1, LR, ONE, ZERO};

/// Default bound on `|Omega_1a / Delta_1a|` for trusting adiabatic elimination.
pub const DEFAULT_ELIMINATION_THRESHOLD: f64 = 0.2;

/// Direct ground-Rydberg coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnePhoton {
    pub omega_1r: f64,
    pub delta_1r: f64,
    #[serde(default)]
    pub gamma_r: f64,
}

/// How the two light shifts enter the effective two-photon detuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightShiftConvention {
    /// `Delta_eff = Delta_1a + Delta_ar + delta_1 - delta_r`, i.e. the
    /// detuning shifts by the energy shift of `|1>` minus that of `|r>`,
    /// where `delta_r = -Omega_ar^2 / (4 Delta_ar)` is the shift of `|r>`.
    #[default]
    Differential,
    /// `Delta_eff = Delta_1a + Delta_ar + (delta_1 + delta_r)` taken
    /// literally, with the scattering cross term `Omega_ar Omega_1a Gamma_a /
    /// (4 Delta_1a^2)`.
    Summed,
}

/// Ladder `|1> -> |a> -> |r>` through an off-resonant intermediate level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPhoton {
    pub omega_1a: f64,
    pub omega_ar: f64,
    pub delta_1a: f64,
    pub delta_ar: f64,
    #[serde(default)]
    pub gamma_a: f64,
    #[serde(default)]
    pub gamma_r: f64,
    #[serde(default)]
    pub convention: LightShiftConvention,
}

/// The laser coupling of one atom, shared by both atoms (symmetric drive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ExcitationScheme {
    OnePhoton(OnePhoton),
    TwoPhoton(TwoPhoton),
}

impl ExcitationScheme {
    pub fn one_photon(omega_1r: f64, delta_1r: f64, gamma_r: f64) -> Self {
        ExcitationScheme::OnePhoton(OnePhoton { omega_1r, delta_1r, gamma_r })
    }

    pub fn validate(&self) -> Result<()> {
        let (values, rates): (Vec<f64>, Vec<f64>) = match self {
            ExcitationScheme::OnePhoton(p) => (vec![p.omega_1r, p.delta_1r, p.gamma_r], vec![p.gamma_r]),
            ExcitationScheme::TwoPhoton(p) => (
                vec![p.omega_1a, p.omega_ar, p.delta_1a, p.delta_ar, p.gamma_a, p.gamma_r],
                vec![p.gamma_a, p.gamma_r],
            ),
        };
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("excitation parameters must be finite".into()));
        }
        if rates.iter().any(|&g| g < 0.0) {
            return Err(Error::Domain("decay rates must be non-negative".into()));
        }
        Ok(())
    }

    /// Whether the intermediate level may be eliminated. Always true for the
    /// one-photon scheme.
    pub fn elimination_valid(&self, threshold: f64) -> bool {
        match self {
            ExcitationScheme::OnePhoton(_) => true,
            ExcitationScheme::TwoPhoton(p) => (p.omega_1a / p.delta_1a).abs() < threshold,
        }
    }

    /// Parameters of the universal single-atom Hamiltonian.
    pub fn effective(&self) -> Result<EffectiveParams> {
        self.validate()?;
        match self {
            ExcitationScheme::OnePhoton(p) => Ok(EffectiveParams {
                omega_eff: p.omega_1r,
                delta_eff: p.delta_1r,
                gamma_r: p.gamma_r,
                ..EffectiveParams::default()
            }),
            ExcitationScheme::TwoPhoton(p) => adiabatic_elimination(p),
        }
    }
}

/// Effective single-atom couplings after (optional) elimination of `|a>`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub omega_eff: f64,
    pub delta_eff: f64,
    /// Light shift of `|1>` from the lower leg.
    pub shift_1: f64,
    /// Light shift of `|r>` from the upper leg.
    pub shift_r: f64,
    pub gamma_1: f64,
    pub gamma_r: f64,
    pub gamma_1r: f64,
}

impl EffectiveParams {
    /// Coherent drive only, no decay.
    pub fn drive(omega_eff: f64, delta_eff: f64) -> Self {
        EffectiveParams { omega_eff, delta_eff, ..Default::default() }
    }
}

/// Interaction energy of the doubly excited pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InteractionSpec {
    Direct { v: f64 },
    VanDerWaals { c6: f64, r: f64 },
}

impl InteractionSpec {
    pub fn direct(v: f64) -> Self {
        InteractionSpec::Direct { v }
    }

    pub fn energy(&self) -> f64 {
        match *self {
            InteractionSpec::Direct { v } => v,
            InteractionSpec::VanDerWaals { c6, r } => c6 * r.powi(-6),
        }
    }
}

/// Eliminate the intermediate level of a two-photon ladder.
///
/// Fails when either single-photon detuning vanishes. A warning is logged
/// when `|Omega_1a / Delta_1a|` exceeds the validity threshold.
pub fn adiabatic_elimination(p: &TwoPhoton) -> Result<EffectiveParams> {
    if (p.omega_1a / p.delta_1a).abs() >= DEFAULT_ELIMINATION_THRESHOLD {
        log::warn!(
            "adiabatic elimination strained: |Omega_1a/Delta_1a| = {:.3}",
            (p.omega_1a / p.delta_1a).abs()
        );
    }
    eliminate(p)
}

/// `adiabatic_elimination` without the validity warning, for pointwise use inside sweeps.
pub fn eliminate(p: &TwoPhoton) -> Result<EffectiveParams> {
    if p.delta_1a == 0.0 || p.delta_ar == 0.0 {
        return Err(Error::Domain("adiabatic elimination needs nonzero intermediate detunings".into()));
    }
    let omega_eff = p.omega_1a * p.omega_ar / (2.0 * p.delta_1a);
    let shift_1 = p.omega_1a.powi(2) / (4.0 * p.delta_1a);
    let shift_r = -p.omega_ar.powi(2) / (4.0 * p.delta_ar);
    let bare = p.delta_1a + p.delta_ar;
    let gamma_1 = p.omega_1a.powi(2) / (4.0 * p.delta_1a.powi(2)) * p.gamma_a;
    let gamma_r = p.omega_ar.powi(2) / (4.0 * p.delta_ar.powi(2)) * p.gamma_a + p.gamma_r;
    let (delta_eff, gamma_1r) = match p.convention {
        LightShiftConvention::Differential => (
            bare + shift_1 - shift_r,
            // Cross term of the two |a>-admixtures; rank one with gamma_1, gamma_r - Gamma_r.
            -p.omega_1a * p.omega_ar / (4.0 * p.delta_1a * p.delta_ar) * p.gamma_a,
        ),
        LightShiftConvention::Summed => (
            bare + (shift_1 + shift_r),
            p.omega_ar * p.omega_1a / (4.0 * p.delta_1a.powi(2)) * p.gamma_a,
        ),
    };
    Ok(EffectiveParams { omega_eff, delta_eff, shift_1, shift_r, gamma_1, gamma_r, gamma_1r })
}

/// Single-atom Hamiltonian on `{|0>, |1>, |r>}`; `|0>` is uncoupled.
pub fn single_atom_hamiltonian(p: &EffectiveParams) -> Mat3 {
    let mut h = Mat3::zeros();
    h[(LR, LR)] = c(-p.delta_eff);
    h[(LR, L1)] = c(0.5 * p.omega_eff);
    h[(L1, LR)] = c(0.5 * p.omega_eff);
    h
}

/// Two-atom Hamiltonian `H1 (x) 1 + 1 (x) H1 + V |r,r><r,r|`.
///
/// Restricted to `|1>`-containing states this is the bright/dark form with
/// `|b>` coupled to `|1,1>` and `|r,r>` by `sqrt(2) Omega_eff / 2`.
pub fn two_atom_hamiltonian(p: &EffectiveParams, v: &InteractionSpec) -> Mat9 {
    let h1 = single_atom_hamiltonian(p);
    let id = Mat3::identity();
    let mut h = kron3(&h1, &id) + kron3(&id, &h1);
    h[(pair(LR, LR), pair(LR, LR))] += c(v.energy());
    h
}

/// Perfect-blockade Hamiltonian on `{|1,1>, |b>}`.
pub fn perfect_blockade_hamiltonian(p: &EffectiveParams) -> Matrix2<C64> {
    let g = c(std::f64::consts::SQRT_2 * p.omega_eff / 2.0);
    Matrix2::new(ZERO, g, g, c(-p.delta_eff))
}

/// Per-atom `sum_mu L_mu^dag L_mu`.
pub fn jump_rate_operator(p: &EffectiveParams) -> Mat3 {
    let mut k = Mat3::zeros();
    k[(L1, L1)] = c(p.gamma_1);
    k[(LR, LR)] = c(p.gamma_r);
    k[(LR, L1)] = c(p.gamma_1r);
    k[(L1, LR)] = c(p.gamma_1r);
    k
}

/// Anti-Hermitian part `-(i/2) sum_mu L^dag L` summed over both atoms.
pub fn decay_generator(s: &ExcitationScheme) -> Result<Mat9> {
    Ok(decay_generator_from(&s.effective()?))
}

pub fn decay_generator_from(p: &EffectiveParams) -> Mat9 {
    let k = jump_rate_operator(p);
    let id = Mat3::identity();
    (kron3(&k, &id) + kron3(&id, &k)) * (-0.5 * I)
}

/// `H - (i/2) sum L^dag L` for the given scheme and interaction.
pub fn effective_hamiltonian(s: &ExcitationScheme, v: &InteractionSpec) -> Result<Mat9> {
    let p = s.effective()?;
    Ok(two_atom_hamiltonian(&p, v) + decay_generator_from(&p))
}

/// A pure two-atom state, possibly sub-normalized by decay.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoAtomState {
    pub amplitudes: Vec9,
    pub time: f64,
}

impl TwoAtomState {
    pub fn new(amplitudes: Vec9, time: f64) -> Self {
        TwoAtomState { amplitudes, time }
    }

    /// Product basis state `|a, b>` at t = 0.
    pub fn basis(a: usize, b: usize) -> Self {
        let mut v = Vec9::zeros();
        v[pair(a, b)] = ONE;
        TwoAtomState::new(v, 0.0)
    }

    /// `(|1,r> + |r,1>)/sqrt(2)`.
    pub fn bright() -> Self {
        TwoAtomState::new(bright_vector(), 0.0)
    }

    /// `(|1,r> - |r,1>)/sqrt(2)`.
    pub fn dark() -> Self {
        TwoAtomState::new(dark_vector(), 0.0)
    }

    pub fn norm_sqr(&self) -> f64 {
        crate::linalg::norm_sqr(&self.amplitudes)
    }

    pub fn bright_amplitude(&self) -> C64 {
        crate::linalg::inner(&bright_vector(), &self.amplitudes)
    }

    pub fn dark_amplitude(&self) -> C64 {
        crate::linalg::inner(&dark_vector(), &self.amplitudes)
    }

    /// Rydberg population of atom 1 and atom 2.
    pub fn rydberg_populations(&self) -> (f64, f64) {
        rydberg_populations(&self.amplitudes)
    }
}

pub fn bright_vector() -> Vec9 {
    let s = c(std::f64::consts::FRAC_1_SQRT_2);
    let mut v = Vec9::zeros();
    v[pair(L1, LR)] = s;
    v[pair(LR, L1)] = s;
    v
}

pub fn dark_vector() -> Vec9 {
    let s = c(std::f64::consts::FRAC_1_SQRT_2);
    let mut v = Vec9::zeros();
    v[pair(L1, LR)] = s;
    v[pair(LR, L1)] = -s;
    v
}

/// `(P_r^(1), P_r^(2))` for a two-atom amplitude vector.
pub fn rydberg_populations(psi: &Vec9) -> (f64, f64) {
    let mut p1 = 0.0;
    let mut p2 = 0.0;
    for a in [L0, L1, LR] {
        p1 += psi[pair(LR, a)].norm_sqr();
        p2 += psi[pair(a, LR)].norm_sqr();
    }
    (p1, p2)
}

/// Swap operator exchanging the two atoms.
pub fn swap_operator() -> Mat9 {
    Mat9::from_fn(|i, j| if i == pair(j % 3, j / 3) { ONE } else { ZERO })
}
