//! Dressed-state spectra, the entangling energy and its perturbative limits.
//!
//! The two-atom Hamiltonian is block diagonal in the symmetry basis
//!
//! | block        | states                    |
//! |--------------|---------------------------|
//! | `Ground`     | `|0,0>`                   |
//! | `SingleA`    | `|0,1>, |0,r>`            |
//! | `SingleB`    | `|1,0>, |r,0>`            |
//! | `Symmetric`  | `|1,1>, |b>, |r,r>`       |
//! | `Dark`       | `|d>`                     |
//!
//! Branch convention: `Branch::Minus` is the dressed `|1,1>` reached
//! adiabatically from large negative detuning, where `|1,1>` is the lowest
//! symmetric state; `Branch::Plus` starts from large positive detuning where
//! `|1,1>` is the highest. The symmetric block is tridiagonal, so without a
//! blockade the branches are the lowest and highest symmetric eigenvalues.
//! In the strong-blockade regime the `|r,r>` level is passed diabatically at
//! `Delta = V/2`, and the branch moves one eigenvalue inward once crossed.
//! The perfect-blockade closed form carries the same sign as the branch label.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::linalg::{c, eigh, kron, pair, Mat9, Vec9, C64, L0, L1, LR, ONE, ZERO};
use crate::model::{bright_vector, dark_vector, two_atom_hamiltonian, EffectiveParams, InteractionSpec};

/// Eigenvalue gap below which a branch is reported as degenerate.
pub const DEFAULT_GAP_THRESHOLD: f64 = 1e-6;
/// Default blockade-ratio cut for regime classification.
pub const DEFAULT_REGIME_RATIO: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Ground,
    SingleA,
    SingleB,
    Symmetric,
    Dark,
}

/// Columns of the unitary taking symmetry-basis coordinates to the product basis.
pub fn symmetry_basis() -> [(BlockKind, Vec<Vec9>); 5] {
    let unit = |i: usize| {
        let mut v = Vec9::zeros();
        v[i] = ONE;
        v
    };
    [
        (BlockKind::Ground, vec![unit(pair(L0, L0))]),
        (BlockKind::SingleA, vec![unit(pair(L0, L1)), unit(pair(L0, LR))]),
        (BlockKind::SingleB, vec![unit(pair(L1, L0)), unit(pair(LR, L0))]),
        (BlockKind::Symmetric, vec![unit(pair(L1, L1)), bright_vector(), unit(pair(LR, LR))]),
        (BlockKind::Dark, vec![dark_vector()]),
    ]
}

/// Restriction of `h` to the span of `basis`.
fn project(h: &Mat9, basis: &[Vec9]) -> DMatrix<C64> {
    let n = basis.len();
    DMatrix::from_fn(n, n, |i, j| (basis[i].adjoint() * h * basis[j])[(0, 0)])
}

#[derive(Debug, Clone)]
pub struct SpectrumBlock {
    pub kind: BlockKind,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors in block coordinates (columns).
    pub block_vectors: DMatrix<C64>,
    /// The same eigenvectors in the product basis.
    pub eigenvectors: Vec<Vec9>,
}

/// Full dressed spectrum, resolved by symmetry block.
#[derive(Debug, Clone)]
pub struct DressedSpectrum {
    pub blocks: Vec<SpectrumBlock>,
}

impl DressedSpectrum {
    pub fn block(&self, kind: BlockKind) -> &SpectrumBlock {
        self.blocks.iter().find(|b| b.kind == kind).expect("every block kind is present")
    }

    /// All nine eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.blocks.iter().flat_map(|b| b.eigenvalues.iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        all
    }

    /// `(block, index within block)` labels in the order of `eigenvectors()`.
    pub fn labels(&self) -> Vec<(BlockKind, usize)> {
        self.blocks.iter().flat_map(|b| (0..b.eigenvalues.len()).map(move |k| (b.kind, k))).collect()
    }

    pub fn eigenvectors(&self) -> Vec<Vec9> {
        self.blocks.iter().flat_map(|b| b.eigenvectors.iter().cloned()).collect()
    }
}

pub fn dressed_spectrum(p: &EffectiveParams, v: &InteractionSpec) -> DressedSpectrum {
    spectrum_of(&two_atom_hamiltonian(p, v))
}

/// Block-resolved spectrum of any symmetric-drive Hermitian two-atom operator.
pub fn spectrum_of(h: &Mat9) -> DressedSpectrum {
    let blocks = symmetry_basis()
        .into_iter()
        .map(|(kind, basis)| {
            let (eigenvalues, block_vectors) = eigh(&project(h, &basis));
            let eigenvectors = (0..basis.len())
                .map(|k| {
                    basis
                        .iter()
                        .enumerate()
                        .fold(Vec9::zeros(), |acc, (i, b)| acc + b * block_vectors[(i, k)])
                })
                .collect();
            SpectrumBlock { kind, eigenvalues, block_vectors, eigenvectors }
        })
        .collect();
    DressedSpectrum { blocks }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglingEnergyResult {
    pub kappa: f64,
    pub branch: Branch,
    /// `(P_11, P_b, P_rr)` of the dressed `|1~,1~>` state.
    pub populations: [f64; 3],
    /// Two-atom and one-atom light shifts entering `kappa`.
    pub e_ls2: f64,
    pub e_ls1: f64,
    /// Distance to the nearest other symmetric eigenvalue.
    pub gap: f64,
    pub degenerate: bool,
}

/// Index of the branch eigenvalue inside an ascending block.
///
/// `skip_crossing` marks a blockaded `|r,r>` level that the `|1,1>`-continuous
/// state has passed diabatically; the branch then sits one step inward.
fn branch_index(values: &[f64], vectors: &DMatrix<C64>, omega: f64, branch: Branch, skip_crossing: bool) -> usize {
    if omega == 0.0 {
        // No drive: the branch is the bare |1>-type state (first block coordinate).
        return (0..values.len())
            .max_by(|&a, &b| vectors[(0, a)].norm_sqr().total_cmp(&vectors[(0, b)].norm_sqr()))
            .unwrap_or(0);
    }
    let inward = usize::from(skip_crossing);
    match branch {
        Branch::Minus => inward,
        Branch::Plus => values.len() - 1 - inward,
    }
}

/// Whether the `|1,1>`-continuous state on `branch` has crossed the
/// `|r,r>` level at `Delta = V/2` while that level is blockaded.
fn crossed_blockaded_level(p: &EffectiveParams, v: &InteractionSpec, branch: Branch) -> bool {
    if classify_regime(p, v).regime != Regime::Strong {
        return false;
    }
    let half = v.energy() / 2.0;
    match branch {
        Branch::Minus => p.delta_eff > half,
        Branch::Plus => p.delta_eff < half,
    }
}

/// Exact entangling energy `kappa = E_LS^(2) - 2 E_LS^(1)` on `branch`.
pub fn entangling_energy(p: &EffectiveParams, v: &InteractionSpec, branch: Branch) -> EntanglingEnergyResult {
    entangling_energy_with_gap(p, v, branch, DEFAULT_GAP_THRESHOLD)
}

pub fn entangling_energy_with_gap(
    p: &EffectiveParams,
    v: &InteractionSpec,
    branch: Branch,
    gap_threshold: f64,
) -> EntanglingEnergyResult {
    let spec = dressed_spectrum(p, v);
    let (k2, k1) = branch_indices(&spec, p, v, branch);
    let sym = spec.block(BlockKind::Symmetric);
    let single = spec.block(BlockKind::SingleA);
    let e_ls2 = sym.eigenvalues[k2];
    let e_ls1 = single.eigenvalues[k1];
    let populations = [0, 1, 2].map(|i| sym.block_vectors[(i, k2)].norm_sqr());
    let gap = sym
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != k2)
        .map(|(_, e)| (e - e_ls2).abs())
        .fold(f64::INFINITY, f64::min);
    let kappa = if v.energy() == 0.0 { 0.0 } else { e_ls2 - 2.0 * e_ls1 };
    EntanglingEnergyResult { kappa, branch, populations, e_ls2, e_ls1, gap, degenerate: gap < gap_threshold }
}

/// Indices of the branch state in the symmetric and single-excitation blocks.
fn branch_indices(spec: &DressedSpectrum, p: &EffectiveParams, v: &InteractionSpec, branch: Branch) -> (usize, usize) {
    let sym = spec.block(BlockKind::Symmetric);
    let single = spec.block(BlockKind::SingleA);
    (
        branch_index(&sym.eigenvalues, &sym.block_vectors, p.omega_eff, branch, crossed_blockaded_level(p, v, branch)),
        branch_index(&single.eigenvalues, &single.block_vectors, p.omega_eff, branch, false),
    )
}

/// Dressed `|1~,1~>` (product basis) on `branch`.
pub fn branch_state(p: &EffectiveParams, v: &InteractionSpec, branch: Branch) -> Vec9 {
    let spec = dressed_spectrum(p, v);
    let (k2, _) = branch_indices(&spec, p, v, branch);
    spec.block(BlockKind::Symmetric).eigenvectors[k2]
}

/// Dressed `|0,1~>` (product basis) on `branch`.
pub fn single_branch_state(p: &EffectiveParams, v: &InteractionSpec, branch: Branch) -> Vec9 {
    let spec = dressed_spectrum(p, v);
    let (_, k1) = branch_indices(&spec, p, v, branch);
    spec.block(BlockKind::SingleA).eigenvectors[k1]
}

/// Closed-form entangling energy under a perfect blockade.
///
/// Without drive the `|1,1>`-continuous value is zero on either branch.
pub fn kappa_perfect_blockade(p: &EffectiveParams, branch: Branch) -> f64 {
    if p.omega_eff == 0.0 {
        return 0.0;
    }
    let (om2, de) = (p.omega_eff.powi(2), p.delta_eff);
    de / 2.0 + branch.sign() * 0.5 * ((2.0 * om2 + de * de).sqrt() - 2.0 * (om2 + de * de).sqrt())
}

/// Single-atom mixing angle with `tan(theta) = Omega / (-Delta)`, in `[0, pi]` for `Omega >= 0`.
pub fn mixing_angle(p: &EffectiveParams) -> f64 {
    p.omega_eff.atan2(-p.delta_eff)
}

/// Leading-order weak-blockade entangling energy `((1 +- cos theta)/2)^2 V`.
pub fn kappa_weak_asymptote(theta: f64, v: &InteractionSpec, branch: Branch) -> f64 {
    ((1.0 + branch.sign() * theta.cos()) / 2.0).powi(2) * v.energy()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Strong,
    Intermediate,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// Set when `V = 0` forced the weak classification.
    pub no_interaction: bool,
}

pub fn classify_regime(p: &EffectiveParams, v: &InteractionSpec) -> RegimeReport {
    classify_regime_with(p, v, DEFAULT_REGIME_RATIO)
}

pub fn classify_regime_with(p: &EffectiveParams, v: &InteractionSpec, ratio: f64) -> RegimeReport {
    let vv = v.energy().abs();
    if vv == 0.0 {
        return RegimeReport { regime: Regime::Weak, no_interaction: true };
    }
    let om = p.omega_eff.abs();
    let regime = if om <= ratio * vv {
        Regime::Strong
    } else if om >= vv / ratio {
        Regime::Weak
    } else {
        Regime::Intermediate
    };
    RegimeReport { regime, no_interaction: false }
}

/// Whether `V` lies within `margin` of the anti-blockade resonance `2 Delta_eff`.
pub fn near_anti_blockade(p: &EffectiveParams, v: &InteractionSpec, margin: f64) -> bool {
    (v.energy() - 2.0 * p.delta_eff).abs() < margin
}

/// Maximum deviations between numerical eigensystems and the pseudo-spin
/// closed forms of the drive, interaction and projected drive operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub drive: f64,
    pub interaction: f64,
    pub projected: f64,
}

impl TableReport {
    pub fn max_deviation(&self) -> f64 {
        self.drive.max(self.interaction).max(self.projected)
    }
}

/// Pseudo-spin operators on `{|1>, |r>}^2` with `|r> = up`, ordered
/// `|1,1>, |1,r>, |r,1>, |r,r>`.
struct PseudoSpin {
    sx: DMatrix<C64>,
    sz: DMatrix<C64>,
    id: DMatrix<C64>,
}

impl PseudoSpin {
    fn new() -> Self {
        let id2 = DMatrix::<C64>::identity(2, 2);
        let sx1 = DMatrix::from_row_slice(2, 2, &[ZERO, c(0.5), c(0.5), ZERO]);
        let sz1 = DMatrix::from_row_slice(2, 2, &[c(-0.5), ZERO, ZERO, c(0.5)]);
        PseudoSpin {
            sx: kron(&sx1, &id2) + kron(&id2, &sx1),
            sz: kron(&sz1, &id2) + kron(&id2, &sz1),
            id: DMatrix::identity(4, 4),
        }
    }
}

const PSEUDO_INDICES: [usize; 4] = [pair(L1, L1), pair(L1, LR), pair(LR, L1), pair(LR, LR)];

fn restrict_pseudo(h: &Mat9) -> DMatrix<C64> {
    DMatrix::from_fn(4, 4, |i, j| h[(PSEUDO_INDICES[i], PSEUDO_INDICES[j])])
}

fn residual(m: &DMatrix<C64>, e: f64, v: &nalgebra::DVector<C64>) -> f64 {
    (m * v - v * c(e)).camax()
}

fn max_sorted_diff(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Check the numerical eigensystems against the pseudo-spin closed forms.
pub fn table_oracles(p: &EffectiveParams, v: &InteractionSpec) -> TableReport {
    let ps = PseudoSpin::new();
    let (om, de) = (p.omega_eff, p.delta_eff);
    let vv = v.energy();
    let root = (om * om + de * de).sqrt();
    let theta = mixing_angle(p);
    let (ch, sh) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let up = nalgebra::DVector::from_vec(vec![c(sh), c(ch)]); // cos|r> + sin|1>
    let down = nalgebra::DVector::from_vec(vec![c(ch), c(-sh)]); // cos|1> - sin|r>
    let prod = |a: &nalgebra::DVector<C64>, b: &nalgebra::DVector<C64>| {
        nalgebra::DVector::from_fn(4, |i, _| a[i / 2] * b[i % 2])
    };

    // Drive: two-atom Hamiltonian without interaction, restricted to {1,r}^2.
    let drive = restrict_pseudo(&two_atom_hamiltonian(p, &InteractionSpec::direct(0.0)));
    let drive_spin = &ps.id * c(-de) - &ps.sz * c(de) + &ps.sx * c(om);
    let mixed = (prod(&up, &down) + prod(&down, &up)) * c(std::f64::consts::FRAC_1_SQRT_2);
    let rows = [(-de + root, prod(&up, &up)), (-de - root, prod(&down, &down)), (-de, mixed)];
    let mut drive_dev = (&drive - &drive_spin).camax();
    for (e, vec) in &rows {
        drive_dev = drive_dev.max(residual(&drive, *e, vec));
    }
    let (num_vals, _) = eigh(&drive);
    // The antisymmetric singlet (-Delta) completes the four-dimensional spectrum.
    drive_dev = drive_dev.max(max_sorted_diff(num_vals, vec![-de + root, -de - root, -de, -de]));

    // Interaction on the symmetric triplet: V |r,r><r,r| = V/2 (Sz^2 + Sz).
    let inter = restrict_pseudo(&two_atom_hamiltonian(&EffectiveParams::default(), v));
    let inter_spin = (&ps.sz * &ps.sz + &ps.sz) * c(vv / 2.0);
    let basis = symmetry_basis();
    let sym = &basis[3].1;
    let sym_inter = project(&two_atom_hamiltonian(&EffectiveParams::default(), v), sym);
    let mut inter_dev = (&inter - &inter_spin).camax();
    inter_dev = inter_dev.max(max_sorted_diff(eigh(&sym_inter).0, vec![vv, 0.0, 0.0]));
    let rr = nalgebra::DVector::from_vec(vec![ZERO, ZERO, ONE]);
    inter_dev = inter_dev.max(residual(&sym_inter, vv, &rr));

    // S_theta projected onto the interaction's zero-eigenvalue subspace {|1,1>, |b>}.
    let s_theta = &ps.sz * c(theta.cos()) + &ps.sx * c(theta.sin());
    let to4 = |v9: &Vec9| nalgebra::DVector::from_fn(4, |i, _| v9[PSEUDO_INDICES[i]]);
    let zero_space = [to4(&sym[0]), to4(&sym[1])];
    let proj = DMatrix::from_fn(2, 2, |i, j| (zero_space[i].adjoint() * &s_theta * &zero_space[j])[(0, 0)]);
    let (ct, st) = (theta.cos(), theta.sin());
    let expect_proj = DMatrix::from_row_slice(
        2,
        2,
        &[c(-ct), c(st / std::f64::consts::SQRT_2), c(st / std::f64::consts::SQRT_2), ZERO],
    );
    let big_theta = (std::f64::consts::SQRT_2 * om).atan2(-de);
    let (cb, sb) = ((big_theta / 2.0).cos(), (big_theta / 2.0).sin());
    let disc = (ct * ct + 2.0 * st * st).sqrt();
    // Coordinates (|1,1>, |b>).
    let upper = nalgebra::DVector::from_vec(vec![c(sb), c(cb)]);
    let lower = nalgebra::DVector::from_vec(vec![c(cb), c(-sb)]);
    let mut proj_dev = (&proj - &expect_proj).camax();
    proj_dev = proj_dev.max(residual(&proj, -0.5 * ct + 0.5 * disc, &upper));
    proj_dev = proj_dev.max(residual(&proj, -0.5 * ct - 0.5 * disc, &lower));
    proj_dev = proj_dev.max(max_sorted_diff(eigh(&proj).0, vec![-0.5 * ct + 0.5 * disc, -0.5 * ct - 0.5 * disc]));

    TableReport { drive: drive_dev, interaction: inter_dev, projected: proj_dev }
}

/// One point of a branch-tracked sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedPoint {
    pub kappa: f64,
    /// Symmetric-block eigenvalues, ascending.
    pub energies: [f64; 3],
    /// Index of the tracked state among `energies`.
    pub tracked: usize,
    /// `(P_11, P_b, P_rr)` of the tracked state.
    pub populations: [f64; 3],
    pub degenerate: bool,
    pub anti_blockade: bool,
}

/// Follow the dressed `|1,1>` state through a parameter sweep by maximal
/// eigenvector overlap with the previous point.
///
/// The seed is the `|1,1>`-dominant eigenvector at the first point; the
/// one-atom shift is tracked the same way from the `|1>`-dominant state.
pub fn track_branch(
    points: &[(EffectiveParams, InteractionSpec)],
    gap_threshold: f64,
    anti_blockade_margin: f64,
) -> Vec<TrackedPoint> {
    let mut out = Vec::with_capacity(points.len());
    let mut prev2: Option<nalgebra::DVector<C64>> = None;
    let mut prev1: Option<nalgebra::DVector<C64>> = None;
    for (p, v) in points {
        let spec = dressed_spectrum(p, v);
        let sym = spec.block(BlockKind::Symmetric);
        let single = spec.block(BlockKind::SingleA);
        let pick = |vectors: &DMatrix<C64>, prev: &Option<nalgebra::DVector<C64>>| -> usize {
            let score = |k: usize| match prev {
                Some(pv) => (pv.adjoint() * vectors.column(k))[(0, 0)].norm_sqr(),
                None => vectors[(0, k)].norm_sqr(),
            };
            (0..vectors.ncols()).max_by(|&a, &b| score(a).total_cmp(&score(b))).unwrap_or(0)
        };
        let k2 = pick(&sym.block_vectors, &prev2);
        let k1 = pick(&single.block_vectors, &prev1);
        prev2 = Some(sym.block_vectors.column(k2).into_owned());
        prev1 = Some(single.block_vectors.column(k1).into_owned());
        let e = &sym.eigenvalues;
        let gap = (0..3).filter(|&k| k != k2).map(|k| (e[k] - e[k2]).abs()).fold(f64::INFINITY, f64::min);
        let kappa = if v.energy() == 0.0 { 0.0 } else { e[k2] - 2.0 * single.eigenvalues[k1] };
        out.push(TrackedPoint {
            kappa,
            energies: [e[0], e[1], e[2]],
            tracked: k2,
            populations: [0, 1, 2].map(|i| sym.block_vectors[(i, k2)].norm_sqr()),
            degenerate: gap < gap_threshold,
            anti_blockade: near_anti_blockade(p, v, anti_blockade_margin),
        });
    }
    out
}

/// Characteristic-polynomial roots of a real symmetric 3x3 matrix
/// (trigonometric form), ascending. Independent of the dense solver.
pub fn symmetric_cubic_roots(m: &Matrix3<f64>) -> [f64; 3] {
    let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
    let q = m.trace() / 3.0;
    if p1 == 0.0 {
        let mut d = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        d.sort_by(f64::total_cmp);
        return d;
    }
    let p2 = (m[(0, 0)] - q).powi(2) + (m[(1, 1)] - q).powi(2) + (m[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (m - Matrix3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    let mut out = [e1, e2, e3];
    out.sort_by(f64::total_cmp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn drive(om: f64, de: f64) -> EffectiveParams {
        EffectiveParams::drive(om, de)
    }

    #[test]
    fn undriven_spectrum_is_bare() {
        let (de, vv) = (0.7, 3.0);
        let s = dressed_spectrum(&drive(0.0, de), &InteractionSpec::direct(vv));
        let mut expect = vec![0.0, 0.0, 0.0, 0.0, -de, -de, -de, -de, -2.0 * de + vv];
        expect.sort_by(f64::total_cmp);
        for (a, b) in s.eigenvalues().iter().zip(&expect) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn symmetric_block_matches_cubic_roots() {
        let (om, de, vv) = (1.0, 0.0, 10.0);
        let s = dressed_spectrum(&drive(om, de), &InteractionSpec::direct(vv));
        let g = std::f64::consts::SQRT_2 * om / 2.0;
        let m = Matrix3::new(0.0, g, 0.0, g, -de, g, 0.0, g, -2.0 * de + vv);
        let roots = symmetric_cubic_roots(&m);
        for (a, b) in s.block(BlockKind::Symmetric).eigenvalues.iter().zip(&roots) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn spectrum_blocks_cover_all_eigenvectors() {
        let s = dressed_spectrum(&drive(0.8, -0.3), &InteractionSpec::direct(4.0));
        let vecs = s.eigenvectors();
        assert_eq!(vecs.len(), 9);
        assert_eq!(s.labels().len(), 9);
        for (i, a) in vecs.iter().enumerate() {
            for (j, b) in vecs.iter().enumerate() {
                let ov = crate::linalg::inner(a, b).norm();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(ov, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_interaction_gives_zero_kappa() {
        for (om, de) in [(1.0, 0.0), (0.3, -2.0), (2.0, 1.5)] {
            for b in [Branch::Plus, Branch::Minus] {
                let r = entangling_energy(&drive(om, de), &InteractionSpec::direct(0.0), b);
                assert_eq!(r.kappa, 0.0);
                // The exact difference of light shifts also vanishes.
                assert_abs_diff_eq!(r.e_ls2 - 2.0 * r.e_ls1, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn weak_blockade_resonance_reaches_quarter() {
        let vv = 1.0;
        let r = entangling_energy(&drive(1e3, 0.0), &InteractionSpec::direct(vv), Branch::Minus);
        assert!((r.kappa - vv / 4.0).abs() <= 0.005 * vv / 4.0, "{}", r.kappa);
    }

    #[test]
    fn strong_blockade_resonance_value() {
        let expect = -(2.0 - std::f64::consts::SQRT_2) / 2.0;
        let r = entangling_energy(&drive(1.0, 0.0), &InteractionSpec::direct(1e3), Branch::Plus);
        assert!((r.kappa - expect).abs() <= 0.005 * expect.abs(), "{}", r.kappa);
        let r = entangling_energy(&drive(1.0, 0.0), &InteractionSpec::direct(1e3), Branch::Minus);
        assert!((r.kappa + expect).abs() <= 0.005 * expect.abs());
    }

    #[test]
    fn perfect_blockade_closed_form_values() {
        assert_eq!(kappa_perfect_blockade(&drive(0.0, 1.3), Branch::Plus), 0.0);
        assert_eq!(kappa_perfect_blockade(&drive(0.0, -1.3), Branch::Minus), 0.0);
        let k = (2.0 - std::f64::consts::SQRT_2) / 2.0;
        assert_abs_diff_eq!(kappa_perfect_blockade(&drive(1.0, 0.0), Branch::Plus), -k, epsilon = 1e-15);
        assert_abs_diff_eq!(kappa_perfect_blockade(&drive(1.0, 0.0), Branch::Minus), k, epsilon = 1e-15);
    }

    #[test]
    fn perfect_blockade_converges_with_blockade_strength() {
        let mut last = f64::INFINITY;
        for ratio in [1e-1, 1e-2, 1e-3] {
            let p = drive(1.0, 0.0);
            let exact = entangling_energy(&p, &InteractionSpec::direct(1.0 / ratio), Branch::Minus).kappa;
            let pb = kappa_perfect_blockade(&p, Branch::Minus);
            let err = ((exact - pb) / pb).abs();
            assert!(err <= 2.0 * ratio, "ratio {ratio}: {err}");
            assert!(err < last);
            last = err;
        }
    }

    #[test]
    fn weak_asymptote_values() {
        let v = InteractionSpec::direct(2.0);
        assert_abs_diff_eq!(kappa_weak_asymptote(std::f64::consts::FRAC_PI_2, &v, Branch::Plus), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(kappa_weak_asymptote(0.0, &v, Branch::Plus), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(kappa_weak_asymptote(0.0, &v, Branch::Minus), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn weak_asymptote_matches_exact() {
        let vv = 1.0;
        for branch in [Branch::Plus, Branch::Minus] {
            for k in 0..=20 {
                let theta = 0.2 + (std::f64::consts::PI - 0.4) * k as f64 / 20.0;
                let w = 100.0 * vv / theta.sin();
                let p = drive(w * theta.sin(), -w * theta.cos());
                let exact = entangling_energy(&p, &InteractionSpec::direct(vv), branch).kappa;
                let asym = kappa_weak_asymptote(theta, &InteractionSpec::direct(vv), branch);
                assert!((exact - asym).abs() <= 0.02 * asym.abs(), "{branch:?} theta={theta}: {exact} vs {asym}");
            }
        }
    }

    #[test]
    fn table_examples() {
        let p = drive(1.0, -1.0);
        let r = table_oracles(&p, &InteractionSpec::direct(3.0));
        assert!(r.max_deviation() < 1e-12, "{r:?}");
        // Eigenvalues from the closed form: -Delta +- sqrt(Omega^2 + Delta^2), -Delta.
        let (de, root) = (-1.0f64, 2f64.sqrt());
        assert_abs_diff_eq!(-de + root, 1.0 + 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(-de - root, 1.0 - 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(mixing_angle(&drive(0.0, -1.0)), 0.0, epsilon = 1e-15);
        let r = table_oracles(&drive(0.0, -1.0), &InteractionSpec::direct(3.0));
        assert!(r.max_deviation() < 1e-12);
        let ct = 0.0f64;
        let half = 0.5 * (ct * ct + 2.0).sqrt();
        assert_abs_diff_eq!(half, std::f64::consts::SQRT_2 / 2.0, epsilon = 1e-15);
        assert!(table_oracles(&drive(1.0, 0.0), &InteractionSpec::direct(1.0)).max_deviation() < 1e-12);
    }

    #[test]
    fn regime_classification() {
        let v = InteractionSpec::direct(10.0);
        assert_eq!(classify_regime(&drive(1.0, 0.0), &v).regime, Regime::Strong);
        assert_eq!(classify_regime(&drive(100.0, 0.0), &v).regime, Regime::Weak);
        assert_eq!(classify_regime(&drive(10.0, 0.0), &v).regime, Regime::Intermediate);
        let r = classify_regime(&drive(1.0, 0.0), &InteractionSpec::direct(0.0));
        assert_eq!(r.regime, Regime::Weak);
        assert!(r.no_interaction);
    }

    #[test]
    fn tracking_follows_eleven_state_far_detuned() {
        let v = InteractionSpec::direct(10.0);
        let pts: Vec<_> = (0..=200).map(|k| (drive(1.0, -20.0 + 0.1 * k as f64), v)).collect();
        let tr = track_branch(&pts, DEFAULT_GAP_THRESHOLD, 0.5);
        assert!(tr[0].populations[0] > 0.99);
        // Near resonance the tracked state is the lowest symmetric state.
        assert_eq!(tr[200].tracked, 0);
        for t in &tr {
            let s: f64 = t.populations.iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-10);
        }
    }

    proptest! {
        #[test]
        fn dark_eigenvalue_is_minus_delta(om in -4.0f64..4.0, de in -4.0f64..4.0, vv in -30.0f64..30.0) {
            let s = dressed_spectrum(&drive(om, de), &InteractionSpec::direct(vv));
            prop_assert!((s.block(BlockKind::Dark).eigenvalues[0] + de).abs() < 1e-12);
        }

        #[test]
        fn populations_sum_to_one(om in 0.01f64..4.0, de in -4.0f64..4.0, vv in -30.0f64..30.0) {
            for b in [Branch::Plus, Branch::Minus] {
                let r = entangling_energy(&drive(om, de), &InteractionSpec::direct(vv), b);
                prop_assert!((r.populations.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn large_detuning_keeps_bare_eleven(om in 0.01f64..1.0, vv in 0.5f64..30.0) {
            let r = entangling_energy(&drive(om, -100.0 * om.max(vv)), &InteractionSpec::direct(vv), Branch::Minus);
            prop_assert!(r.populations[0] > 0.999);
        }

        #[test]
        fn table_checks_hold(om in -3.0f64..3.0, de in -3.0f64..3.0, vv in -10.0f64..10.0) {
            prop_assert!(table_oracles(&drive(om, de), &InteractionSpec::direct(vv)).max_deviation() < 1e-10);
        }
    }
}
