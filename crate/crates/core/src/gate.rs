//! Spin-echo gate assembly, phase extraction and the Mølmer–Sørensen fidelity.
//!
//! Computational basis order is `|00>, |01>, |10>, |11>` with `sigma_z|0> = +|0>`.

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate_ramp, PropagateOptions, RampGenerator};
use crate::error::{Error, Result};
use crate::linalg::{c, kron, pair, wrap_phase, C64, I, L0, L1, LR, ONE, ZERO};
use crate::model::{ExcitationScheme, InteractionSpec, TwoAtomState};
use crate::pulses::RampSchedule;

pub type Mat4 = Matrix4<C64>;

pub const DEFAULT_LEAKAGE_THRESHOLD: f64 = 1e-3;

/// Two-atom product indices of the computational states.
pub const COMPUTATIONAL: [usize; 4] = [pair(L0, L0), pair(L0, L1), pair(L1, L0), pair(L1, L1)];

pub fn pauli_x() -> nalgebra::Matrix2<C64> {
    nalgebra::Matrix2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> nalgebra::Matrix2<C64> {
    nalgebra::Matrix2::new(ZERO, -I, I, ZERO)
}

pub fn pauli_z() -> nalgebra::Matrix2<C64> {
    nalgebra::Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

fn kron2(a: &nalgebra::Matrix2<C64>, b: &nalgebra::Matrix2<C64>) -> Mat4 {
    let k = kron(&nalgebra::DMatrix::from_iterator(2, 2, a.iter().copied()), &nalgebra::DMatrix::from_iterator(2, 2, b.iter().copied()));
    Mat4::from_iterator(k.iter().copied())
}

/// `exp(-i theta X / 2)` on one qubit.
pub fn rx(theta: f64) -> nalgebra::Matrix2<C64> {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    nalgebra::Matrix2::new(c(co), -I * si, -I * si, c(co))
}

/// The same x rotation on both qubits.
pub fn rx_pair(theta: f64) -> Mat4 {
    kron2(&rx(theta), &rx(theta))
}

/// `U_MS = exp(-i pi/4 sigma_y sigma_y)`.
pub fn u_ms() -> Mat4 {
    let yy = kron2(&pauli_y(), &pauli_y());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Mat4::identity() * c(s) - yy * (I * s)
}

/// `U_kappa = exp(-i phi2 Z1 Z2 / 4) exp(-i phi1 (Z1 + Z2) / 2)`.
pub fn u_kappa(phi1: f64, phi2: f64) -> Mat4 {
    let z = [1.0, -1.0];
    Mat4::from_fn(|i, j| {
        if i != j {
            return ZERO;
        }
        let (z1, z2) = (z[i / 2], z[i % 2]);
        C64::from_polar(1.0, -phi2 * z1 * z2 / 4.0 - phi1 * (z1 + z2) / 2.0)
    })
}

/// `|Tr(U_MS^dagger M)|^2 / 16`.
pub fn ms_fidelity(m: &Mat4) -> f64 {
    (u_ms().adjoint() * m).trace().norm_sqr() / 16.0
}

/// `1 - min column norm^2`.
pub fn leakage(m: &Mat4) -> f64 {
    1.0 - (0..4).map(|j| m.column(j).norm_squared()).fold(f64::INFINITY, f64::min)
}

/// Single- and two-qubit phases `(phi1, phi2)` of a diagonal-dominant map.
///
/// `phi2` is reduced to `(-pi, pi]`; `phi1` is taken from the `|01>`
/// entry relative to `|00>` and reduced the same way.
pub fn extract_phases(m: &Mat4) -> Result<(f64, f64)> {
    extract_phases_with(m, DEFAULT_LEAKAGE_THRESHOLD)
}

pub fn extract_phases_with(m: &Mat4, threshold: f64) -> Result<(f64, f64)> {
    let l = leakage(m);
    if l > threshold {
        return Err(Error::Leakage { leakage: l, threshold });
    }
    let d = [m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(3, 3)]];
    let phi2 = wrap_phase(-(d[0] * d[3] / (d[1] * d[2])).arg());
    let phi1 = wrap_phase((d[1] / d[0]).arg() - phi2 / 2.0);
    Ok((phi1, phi2))
}

/// Ramp image of one computational state, its Rydberg integral and peak `P_rr`.
type Column = (nalgebra::Vector4<C64>, f64, f64);

/// Map of one adiabatic ramp on the computational subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct RampMap {
    pub map: Mat4,
    /// Integrated Rydberg population for the `|11>` input.
    pub t_r: f64,
    /// Integrated Rydberg population per computational input.
    pub t_r_columns: [f64; 4],
    /// Largest `|r,r>` population seen along the `|11>` trajectory.
    pub max_p_rr: f64,
    pub leakage: f64,
}

/// Propagate every computational basis state through one ramp.
pub fn ramp_unitary(
    r: &RampSchedule,
    s: &ExcitationScheme,
    v: &InteractionSpec,
    decay: bool,
    opts: &PropagateOptions,
) -> Result<RampMap> {
    let generator = RampGenerator::new(*r, *s, *v, decay)?;
    // |00> is inert: its column is exact.
    let columns: Vec<(usize, Result<Column>)> = (1..4)
        .into_par_iter()
        .map(|j| {
            let (a, b) = (COMPUTATIONAL[j] / 3, COMPUTATIONAL[j] % 3);
            let out = propagate_ramp(&generator, &TwoAtomState::basis(a, b), opts).map(|tr| {
                let psi = tr.final_state().amplitudes;
                let col = nalgebra::Vector4::from_fn(|i, _| psi[COMPUTATIONAL[i]]);
                let rr = pair(LR, LR);
                let max_rr = tr.states.iter().map(|p| p[rr].norm_sqr()).fold(0.0, f64::max);
                (col, tr.rydberg_integral, max_rr)
            });
            (j, out)
        })
        .collect();
    let mut map = Mat4::zeros();
    map[(0, 0)] = ONE;
    let mut t_r_columns = [0.0; 4];
    let mut max_p_rr = 0.0;
    for (j, out) in columns {
        let (col, tr, rr) = out?;
        map.set_column(j, &col);
        t_r_columns[j] = tr;
        if j == 3 {
            max_p_rr = rr;
        }
    }
    Ok(RampMap { map, t_r: t_r_columns[3], t_r_columns, max_p_rr, leakage: leakage(&map) })
}

/// Ideal echo sequence around two adiabatic ramps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSequence {
    pub ramp_a: RampSchedule,
    /// Defaults to `ramp_a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_b: Option<RampSchedule>,
    pub scheme: ExcitationScheme,
}

impl GateSequence {
    pub fn symmetric(ramp: RampSchedule, scheme: ExcitationScheme) -> Self {
        GateSequence { ramp_a: ramp, ramp_b: None, scheme }
    }
}

/// `Rx(pi/2) M_B Rx(pi) M_A Rx(pi/2)` on both qubits.
pub fn compose_echo(m_a: &Mat4, m_b: &Mat4) -> Mat4 {
    let half = rx_pair(std::f64::consts::FRAC_PI_2);
    half * m_b * rx_pair(std::f64::consts::PI) * m_a * half
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateOptions {
    pub tol: f64,
    pub leakage_threshold: f64,
    /// Include the anti-Hermitian decay terms of the scheme.
    pub decay: bool,
}

impl Default for GateOptions {
    fn default() -> Self {
        GateOptions { tol: crate::dynamics::DEFAULT_TOL, leakage_threshold: DEFAULT_LEAKAGE_THRESHOLD, decay: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    /// Realized map, row-major, entries as `[re, im]`.
    pub map: [[[f64; 2]; 4]; 4],
    pub fidelity: f64,
    /// Phases of ramp A; absent when leakage refuses extraction.
    pub phi1: Option<f64>,
    pub phi2: Option<f64>,
    /// Integrated Rydberg population of one ramp from `|11>`.
    pub t_r: f64,
    /// Sum over both ramps from `|11>`.
    pub t_r_total: f64,
    pub leakage: f64,
    pub max_p_rr: f64,
    pub leakage_flagged: bool,
    pub sequence: GateSequence,
}

impl GateReport {
    pub fn matrix(&self) -> Mat4 {
        Mat4::from_fn(|i, j| C64::new(self.map[i][j][0], self.map[i][j][1]))
    }
}

fn to_rows(m: &Mat4) -> [[[f64; 2]; 4]; 4] {
    let mut out = [[[0.0; 2]; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = [m[(i, j)].re, m[(i, j)].im];
        }
    }
    out
}

pub fn spin_echo_gate(seq: &GateSequence, v: &InteractionSpec, opts: &GateOptions) -> Result<GateReport> {
    let popts = PropagateOptions::with_tol(opts.tol);
    let a = ramp_unitary(&seq.ramp_a, &seq.scheme, v, opts.decay, &popts)?;
    let b = match seq.ramp_b {
        Some(rb) if rb != seq.ramp_a => ramp_unitary(&rb, &seq.scheme, v, opts.decay, &popts)?,
        _ => a.clone(),
    };
    let u = compose_echo(&a.map, &b.map);
    let phases = extract_phases_with(&a.map, opts.leakage_threshold).ok();
    let leak = a.leakage.max(b.leakage);
    if leak > opts.leakage_threshold {
        log::warn!("ramp leakage {leak:.3e} exceeds {:.1e}", opts.leakage_threshold);
    }
    Ok(GateReport {
        map: to_rows(&u),
        fidelity: ms_fidelity(&u),
        phi1: phases.map(|p| p.0),
        phi2: phases.map(|p| p.1),
        t_r: a.t_r,
        t_r_total: a.t_r + b.t_r,
        leakage: leak,
        max_p_rr: a.max_p_rr.max(b.max_p_rr),
        leakage_flagged: leak > opts.leakage_threshold,
        sequence: *seq,
    })
}

/// Concurrence `2|ad - bc|` of a normalized two-qubit pure state.
pub fn concurrence(psi: &nalgebra::Vector4<C64>) -> f64 {
    2.0 * (psi[0] * psi[3] - psi[1] * psi[2]).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OnePhoton;
    use crate::pulses::OnePhotonRamp;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn fidelity_examples() {
        assert_abs_diff_eq!(ms_fidelity(&u_ms()), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ms_fidelity(&Mat4::identity()), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ms_fidelity(&(u_ms() * C64::from_polar(1.0, 2.1))), 1.0, epsilon = 1e-15);
        // Oracle: U_MS = cos(pi/4) 1 - i sin(pi/4) YY built from explicit entries.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let yy = Mat4::new(ZERO, ZERO, ZERO, c(-1.0), ZERO, ZERO, ONE, ZERO, ZERO, ONE, ZERO, ZERO, c(-1.0), ZERO, ZERO, ZERO);
        assert!((u_ms() - (Mat4::identity() * c(s) - yy * (I * s))).camax() < 1e-15);
    }

    #[test]
    fn phase_round_trip() {
        let (p1, p2) = extract_phases(&u_kappa(0.3, 0.8)).unwrap();
        assert_abs_diff_eq!(p1, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p2, 0.8, epsilon = 1e-12);
        assert_eq!(extract_phases(&Mat4::identity()).unwrap(), (0.0, 0.0));
        let (p1, p2) = extract_phases(&(u_kappa(0.3, 0.8) * C64::from_polar(1.0, 1.234))).unwrap();
        assert_abs_diff_eq!(p1, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p2, 0.8, epsilon = 1e-12);
        let leaky = u_kappa(0.3, 0.8) * c(0.99);
        assert!(matches!(extract_phases(&leaky), Err(Error::Leakage { .. })));
    }

    #[test]
    fn echo_of_ideal_ramps_is_ms_gate() {
        for k in 0..64 {
            let phi1 = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
            let m = u_kappa(phi1, std::f64::consts::FRAC_PI_2);
            let f = ms_fidelity(&compose_echo(&m, &m));
            assert!((f - 1.0).abs() <= 1e-10, "phi1 = {phi1}: {f}");
        }
    }

    #[test]
    fn echo_of_identity_ramps() {
        let u = compose_echo(&Mat4::identity(), &Mat4::identity());
        // Four quarter turns about x on each qubit: Rx(2 pi) x Rx(2 pi) = 1.
        assert!((u - Mat4::identity()).camax() < 1e-15);
        assert_abs_diff_eq!(ms_fidelity(&u), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ms_gate_is_perfect_entangler() {
        let psi = u_ms() * nalgebra::Vector4::new(ONE, ZERO, ZERO, ZERO);
        assert_abs_diff_eq!(concurrence(&psi), 1.0, epsilon = 1e-10);
    }

    fn scheme(gamma: f64) -> ExcitationScheme {
        ExcitationScheme::OnePhoton(OnePhoton { omega_1r: 1.0, delta_1r: 0.0, gamma_r: gamma })
    }

    fn ramp() -> RampSchedule {
        RampSchedule::OnePhoton(OnePhotonRamp::symmetric(1.0, -0.3, -3.0, 20.0, 4.0, 4.4))
    }

    #[test]
    fn undriven_ramp_is_identity() {
        let r = RampSchedule::OnePhoton(OnePhotonRamp { omega_max: 0.0, ..OnePhotonRamp::symmetric(1.0, -0.3, -8.0, 10.0, 4.0, 2.2) });
        let m = ramp_unitary(&r, &scheme(0.0), &InteractionSpec::direct(30.0), false, &PropagateOptions::default()).unwrap();
        assert_eq!(m.map[(0, 0)], ONE);
        for j in 0..4 {
            assert_abs_diff_eq!(m.map[(j, j)].norm(), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(m.t_r, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dressed_ramp_is_unitary_and_diagonal() {
        let tol = 1e-9;
        let m = ramp_unitary(&ramp(), &scheme(0.0), &InteractionSpec::direct(30.0), false, &PropagateOptions::with_tol(tol)).unwrap();
        assert_eq!(m.map.column(0), nalgebra::Vector4::new(ONE, ZERO, ZERO, ZERO));
        assert!(m.leakage < 1e-2);
        let defect = (m.map.adjoint() * m.map - Mat4::identity()).camax();
        assert!(defect < 10.0 * tol + m.leakage, "{defect}");
        // Swap symmetry of the drive: |01> and |10> acquire equal phases.
        assert!((m.map[(1, 1)] - m.map[(2, 2)]).norm() < 1e-8);
    }

    #[test]
    fn decay_lowers_fidelity() {
        let seq = GateSequence::symmetric(ramp(), scheme(0.0));
        let v = InteractionSpec::direct(30.0);
        let closed = spin_echo_gate(&seq, &v, &GateOptions::default()).unwrap();
        let seq_decay = GateSequence::symmetric(ramp(), scheme(0.01));
        let open = spin_echo_gate(&seq_decay, &v, &GateOptions::default()).unwrap();
        assert!(open.fidelity <= closed.fidelity);
        assert!(closed.fidelity <= 1.0 && open.fidelity >= 0.0);
        let json = serde_json::to_string(&open).unwrap();
        let back: GateReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, open);
    }

    #[test]
    fn parallel_columns_match_sequential() {
        let v = InteractionSpec::direct(30.0);
        let opts = PropagateOptions::default();
        let par = ramp_unitary(&ramp(), &scheme(0.0), &v, false, &opts).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let seq = pool.install(|| ramp_unitary(&ramp(), &scheme(0.0), &v, false, &opts)).unwrap();
        assert_eq!(par, seq);
    }

    proptest! {
        #[test]
        fn fidelity_is_global_phase_invariant(alpha in -7.0f64..7.0, p1 in -3.0f64..3.0, p2 in -3.0f64..3.0) {
            let m = compose_echo(&u_kappa(p1, p2), &u_kappa(p1, p2));
            let f = ms_fidelity(&m);
            prop_assert!((ms_fidelity(&(m * C64::from_polar(1.0, alpha))) - f).abs() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        }

        #[test]
        fn phases_round_trip(p1 in -1.5f64..1.5, p2 in -3.0f64..3.0, alpha in -3.0f64..3.0) {
            let (a, b) = extract_phases(&(u_kappa(p1, p2) * C64::from_polar(1.0, alpha))).unwrap();
            prop_assert!((a - p1).abs() < 1e-10 && (b - p2).abs() < 1e-10);
        }
    }
}
