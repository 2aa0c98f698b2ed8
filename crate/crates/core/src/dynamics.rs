//! Schrödinger propagation under (possibly non-Hermitian) two-atom generators.
//!
//! The integrator is the Dormand–Prince 5(4) pair with its fourth-order
//! continuous extension. Steps are accepted when the embedded error estimate
//! per unit time is below `tol`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat9, Vec9, C64, I};
use crate::model::{decay_generator_from, rydberg_populations, two_atom_hamiltonian, ExcitationScheme, InteractionSpec, TwoAtomState};
use crate::pulses::RampSchedule;

pub const DEFAULT_TOL: f64 = 1e-9;

/// A time-dependent effective Hamiltonian `H_eff(t)`.
pub trait Generator: Sync {
    fn at(&self, t: f64) -> Result<Mat9>;
}

impl<F: Fn(f64) -> Mat9 + Sync> Generator for F {
    fn at(&self, t: f64) -> Result<Mat9> {
        Ok(self(t))
    }
}

/// Two-atom generator driven by a ramp schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampGenerator {
    pub schedule: RampSchedule,
    pub scheme: ExcitationScheme,
    pub interaction: InteractionSpec,
    /// Include the anti-Hermitian decay part.
    pub decay: bool,
}

impl RampGenerator {
    pub fn new(schedule: RampSchedule, scheme: ExcitationScheme, interaction: InteractionSpec, decay: bool) -> Result<Self> {
        schedule.validate()?;
        scheme.validate()?;
        schedule.effective_at(&scheme, schedule.midpoint())?;
        Ok(RampGenerator { schedule, scheme, interaction, decay })
    }
}

impl Generator for RampGenerator {
    fn at(&self, t: f64) -> Result<Mat9> {
        let p = self.schedule.effective_at(&self.scheme, t)?;
        let h = two_atom_hamiltonian(&p, &self.interaction);
        Ok(if self.decay { h + decay_generator_from(&p) } else { h })
    }
}

/// Where the trajectory is sampled.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Sampling {
    /// Every accepted step.
    #[default]
    Steps,
    /// `n >= 2` evenly spaced points including both window ends.
    Uniform(usize),
    /// Explicit increasing times inside the window.
    Times(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagateOptions {
    pub tol: f64,
    pub sampling: Sampling,
    /// Upper bound on the step as a fraction of the window length.
    pub max_step_fraction: f64,
    pub max_steps: usize,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions { tol: DEFAULT_TOL, sampling: Sampling::Steps, max_step_fraction: 0.02, max_steps: 10_000_000 }
    }
}

impl PropagateOptions {
    pub fn with_tol(tol: f64) -> Self {
        PropagateOptions { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec9>,
    /// `||psi||^2` at each sample.
    pub norms: Vec<f64>,
    pub p_r1: Vec<f64>,
    pub p_r2: Vec<f64>,
    /// `int (P_r1 + P_r2) dt` over the window, from Gauss–Legendre quadrature
    /// of the dense output on every step.
    pub rydberg_integral: f64,
    pub stats: StepStats,
}

impl Trajectory {
    fn empty() -> Self {
        Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            norms: Vec::new(),
            p_r1: Vec::new(),
            p_r2: Vec::new(),
            rydberg_integral: 0.0,
            stats: StepStats::default(),
        }
    }

    /// Concatenate a trajectory that starts where this one ends.
    fn append(&mut self, part: Trajectory) {
        let skip = usize::from(!self.times.is_empty() && part.times.first() == self.times.last());
        self.times.extend(&part.times[skip..]);
        self.states.extend(&part.states[skip..]);
        self.norms.extend(&part.norms[skip..]);
        self.p_r1.extend(&part.p_r1[skip..]);
        self.p_r2.extend(&part.p_r2[skip..]);
        self.rydberg_integral += part.rydberg_integral;
        self.stats.accepted += part.stats.accepted;
        self.stats.rejected += part.stats.rejected;
        self.stats.evaluations += part.stats.evaluations;
    }

    /// Keep only samples at the given (increasing) times.
    fn retain_times(&mut self, ts: &[f64]) {
        let mut j = 0;
        let keep: Vec<bool> = self
            .times
            .iter()
            .map(|&t| {
                while j < ts.len() && ts[j] < t {
                    j += 1;
                }
                j < ts.len() && ts[j] == t
            })
            .collect();
        let filter = |v: &mut Vec<f64>| {
            let mut k = 0;
            v.retain(|_| (keep[k], k += 1).0);
        };
        filter(&mut self.times);
        filter(&mut self.norms);
        filter(&mut self.p_r1);
        filter(&mut self.p_r2);
        let mut k = 0;
        self.states.retain(|_| (keep[k], k += 1).0);
    }

    pub fn final_state(&self) -> TwoAtomState {
        TwoAtomState::new(*self.states.last().expect("trajectory has samples"), *self.times.last().expect("trajectory has samples"))
    }

    fn push(&mut self, t: f64, psi: Vec9) {
        let (a, b) = rydberg_populations(&psi);
        self.times.push(t);
        self.states.push(psi);
        self.norms.push(psi.norm_squared());
        self.p_r1.push(a);
        self.p_r2.push(b);
    }

    pub fn csv_header() -> Vec<String> {
        let labels = ["0", "1", "r"];
        let mut cols = vec!["t".to_string()];
        for a in labels {
            for b in labels {
                cols.push(format!("re_{a}{b}"));
                cols.push(format!("im_{a}{b}"));
            }
        }
        for a in labels {
            for b in labels {
                cols.push(format!("pop_{a}{b}"));
            }
        }
        cols.extend(["p_r1", "p_r2", "norm"].map(String::from));
        cols
    }

    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        (0..self.times.len())
            .map(|k| {
                let psi = &self.states[k];
                let mut row = vec![self.times[k]];
                row.extend(psi.iter().flat_map(|z| [z.re, z.im]));
                row.extend(psi.iter().map(|z| z.norm_sqr()));
                row.extend([self.p_r1[k], self.p_r2[k], self.norms[k]]);
                row
            })
            .collect()
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension of one accepted step.
struct Dense {
    t0: f64,
    h: f64,
    r: [Vec9; 5],
}

impl Dense {
    fn eval(&self, t: f64) -> Vec9 {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.r;
        r1 + (r2 + (r3 + (r4 + r5 * c64(s1)) * c64(s)) * c64(s1)) * c64(s)
    }
}

fn c64(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn rhs<G: Generator + ?Sized>(g: &G, t: f64, psi: &Vec9) -> Result<Vec9> {
    Ok(g.at(t)? * psi * (-I))
}

fn gauss_rydberg(d: &Dense) -> f64 {
    let off = (0.6f64).sqrt() / 2.0;
    [(0.5 - off, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + off, 5.0 / 18.0)]
        .iter()
        .map(|&(x, w)| {
            let (a, b) = rydberg_populations(&d.eval(d.t0 + x * d.h));
            w * (a + b)
        })
        .sum::<f64>()
        * d.h
}

/// Solve `i d psi/dt = H(t) psi` on `window`.
pub fn propagate<G: Generator + ?Sized>(
    g: &G,
    psi0: &TwoAtomState,
    window: (f64, f64),
    opts: &PropagateOptions,
) -> Result<Trajectory> {
    let (ta, tb) = window;
    if !(opts.tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    if !(tb > ta) || !ta.is_finite() || !tb.is_finite() {
        return Err(Error::Domain(format!("invalid window [{ta}, {tb}]")));
    }
    let requested: Vec<f64> = match &opts.sampling {
        Sampling::Steps => Vec::new(),
        Sampling::Uniform(n) => {
            let n = (*n).max(2);
            (0..n).map(|k| ta + (tb - ta) * k as f64 / (n - 1) as f64).collect()
        }
        Sampling::Times(ts) => {
            if ts.windows(2).any(|w| w[1] <= w[0]) || ts.iter().any(|&t| t < ta || t > tb) {
                return Err(Error::Domain("sample times must increase inside the window".into()));
            }
            ts.clone()
        }
    };
    let dense_sampling = !matches!(opts.sampling, Sampling::Steps);

    let mut traj = Trajectory::empty();
    let mut next_sample = 0;
    let mut y = psi0.amplitudes;
    let mut t = ta;
    if dense_sampling {
        while next_sample < requested.len() && requested[next_sample] <= ta {
            traj.push(requested[next_sample], y);
            next_sample += 1;
        }
    } else {
        traj.push(ta, y);
    }

    let span = tb - ta;
    let h_max = span * opts.max_step_fraction.clamp(1e-9, 1.0);
    let mut k1 = rhs(g, t, &y)?;
    traj.stats.evaluations += 1;
    let scale = k1.camax().max(g.at(t)?.camax()).max(1.0);
    let mut h = (0.01 * opts.tol.powf(0.2) / scale).min(h_max);

    while t < tb {
        if traj.stats.accepted + traj.stats.rejected >= opts.max_steps {
            return Err(Error::StepUnderflow { time: t, step: h });
        }
        let last = t + h >= tb;
        if last {
            h = tb - t;
        }
        let hc = c64(h);
        let k2 = rhs(g, t + C2 * h, &(y + k1 * c64(h * A21)))?;
        let k3 = rhs(g, t + C3 * h, &(y + (k1 * c64(A31) + k2 * c64(A32)) * hc))?;
        let k4 = rhs(g, t + C4 * h, &(y + (k1 * c64(A41) + k2 * c64(A42) + k3 * c64(A43)) * hc))?;
        let k5 = rhs(g, t + C5 * h, &(y + (k1 * c64(A51) + k2 * c64(A52) + k3 * c64(A53) + k4 * c64(A54)) * hc))?;
        let k6 = rhs(
            g,
            t + h,
            &(y + (k1 * c64(A61) + k2 * c64(A62) + k3 * c64(A63) + k4 * c64(A64) + k5 * c64(A65)) * hc),
        )?;
        let y1 = y + (k1 * c64(A71) + k3 * c64(A73) + k4 * c64(A74) + k5 * c64(A75) + k6 * c64(A76)) * hc;
        let t1 = if last { tb } else { t + h };
        let k7 = rhs(g, t1, &y1)?;
        traj.stats.evaluations += 6;

        if y1.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(t));
        }
        let err_vec = (k1 * c64(E1) + k3 * c64(E3) + k4 * c64(E4) + k5 * c64(E5) + k6 * c64(E6) + k7 * c64(E7)) * hc;
        let err = err_vec.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let ratio = err / (opts.tol * h);

        if ratio <= 1.0 {
            let diff = y1 - y;
            let bspl = k1 * hc - diff;
            let dense = Dense {
                t0: t,
                h,
                r: [
                    y,
                    diff,
                    bspl,
                    diff - k7 * hc - bspl,
                    (k1 * c64(D1) + k3 * c64(D3) + k4 * c64(D4) + k5 * c64(D5) + k6 * c64(D6) + k7 * c64(D7)) * hc,
                ],
            };
            traj.rydberg_integral += gauss_rydberg(&dense);
            if dense_sampling {
                while next_sample < requested.len() && requested[next_sample] <= t1 {
                    let ts = requested[next_sample];
                    let psi = if ts == t1 { y1 } else { dense.eval(ts) };
                    traj.push(ts, psi);
                    next_sample += 1;
                }
            } else {
                traj.push(t1, y1);
            }
            traj.stats.accepted += 1;
            t = t1;
            y = y1;
            k1 = k7;
        } else {
            traj.stats.rejected += 1;
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.25)).clamp(0.2, 5.0) };
        let factor = if ratio > 1.0 { factor.min(1.0) } else { factor };
        h = (h * factor).min(h_max);
        if h < 1e-14 * t.abs().max(1.0) && t < tb {
            return Err(Error::StepUnderflow { time: t, step: h });
        }
    }
    Ok(traj)
}

const GAUSS3: [(f64, f64); 3] = [(0.5 - 0.3872983346207417, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + 0.3872983346207417, 5.0 / 18.0)];

fn sample_times(sampling: &Sampling, window: (f64, f64)) -> Option<Vec<f64>> {
    match sampling {
        Sampling::Steps => None,
        Sampling::Uniform(n) => {
            let n = (*n).max(2);
            Some((0..n).map(|k| window.0 + (window.1 - window.0) * k as f64 / (n - 1) as f64).collect())
        }
        Sampling::Times(ts) => Some(ts.clone()),
    }
}

/// Exact propagation under a time-independent `H_eff` on `window`.
///
/// The state is advanced with `exp(-i H dt)` on steps short against
/// `1/||H||`; the Rydberg integral uses three-point Gauss–Legendre nodes
/// inside each step, also evaluated exactly.
pub fn propagate_constant(h: &Mat9, psi0: &TwoAtomState, window: (f64, f64), sampling: &Sampling) -> Result<Trajectory> {
    let (ta, tb) = window;
    if !(tb > ta) || !ta.is_finite() || !tb.is_finite() {
        return Err(Error::Domain(format!("invalid window [{ta}, {tb}]")));
    }
    let requested = sample_times(sampling, window);
    if let Some(ts) = &requested {
        if ts.windows(2).any(|w| w[1] <= w[0]) || ts.iter().any(|&t| t < ta || t > tb) {
            return Err(Error::Domain("sample times must increase inside the window".into()));
        }
    }
    let span = tb - ta;
    let n = ((span * h.norm() / 0.3).ceil() as usize).max(1);
    let dt = span / n as f64;
    let u = |tau: f64| (h * (-I * tau)).exp();
    let step = u(dt);
    let nodes = GAUSS3.map(|(x, w)| (u(x * dt), w));
    let mut traj = Trajectory::empty();
    let mut next = 0;
    let mut y = psi0.amplitudes;
    if requested.is_none() {
        traj.push(ta, y);
    }
    for k in 0..n {
        let t0 = ta + k as f64 * dt;
        let t1 = if k + 1 == n { tb } else { t0 + dt };
        let weighted: f64 = nodes
            .iter()
            .map(|(m, w)| {
                let (a, b) = rydberg_populations(&(m * y));
                w * (a + b)
            })
            .sum();
        traj.rydberg_integral += weighted * dt;
        let y1 = step * y;
        if y1.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(t0));
        }
        match &requested {
            None => traj.push(t1, y1),
            Some(ts) => {
                while next < ts.len() && ts[next] <= t1 {
                    let s = ts[next];
                    let psi = if s == t0 {
                        y
                    } else if s == t1 {
                        y1
                    } else {
                        u(s - t0) * y
                    };
                    traj.push(s, psi);
                    next += 1;
                }
            }
        }
        y = y1;
        traj.stats.accepted += 1;
    }
    Ok(traj)
}

/// Propagate through a ramp schedule: the constant plateau exactly, the
/// time-dependent flanks adaptively.
pub fn propagate_ramp(g: &RampGenerator, psi0: &TwoAtomState, opts: &PropagateOptions) -> Result<Trajectory> {
    let window = g.schedule.support();
    let Some((p0, p1)) = g.schedule.plateau() else {
        return propagate(g, psi0, window, opts);
    };
    let requested = sample_times(&opts.sampling, window);
    let mut traj = Trajectory::empty();
    let mut psi = psi0.clone();
    for (a, b, exact) in [(window.0, p0, false), (p0, p1, true), (p1, window.1, false)] {
        if b <= a {
            continue;
        }
        // Each segment also reports its end point, which seeds the next one.
        let sampling = match &requested {
            None => Sampling::Steps,
            Some(ts) => {
                let mut v: Vec<f64> = ts.iter().copied().filter(|&t| t >= a && t < b).collect();
                v.push(b);
                Sampling::Times(v)
            }
        };
        let part = if exact {
            propagate_constant(&g.at(0.5 * (a + b))?, &psi, (a, b), &sampling)?
        } else {
            propagate(g, &psi, (a, b), &PropagateOptions { sampling, ..opts.clone() })?
        };
        psi = part.final_state();
        traj.append(part);
    }
    if let Some(ts) = requested {
        traj.retain_times(&ts);
    }
    Ok(traj)
}

/// `t_r = int dt [P_r^(1) + P_r^(2)]` along the trajectory.
pub fn integrated_rydberg_population(traj: &Trajectory) -> f64 {
    traj.rydberg_integral
}

/// Composite Simpson (trapezoid on a leftover interval) over the stored
/// samples, used to cross-check the dense-output quadrature.
pub fn sampled_rydberg_integral(traj: &Trajectory) -> f64 {
    let f: Vec<f64> = traj.p_r1.iter().zip(&traj.p_r2).map(|(a, b)| a + b).collect();
    let t = &traj.times;
    let mut total = 0.0;
    let mut k = 0;
    while k + 2 < t.len() {
        let (h0, h1) = (t[k + 1] - t[k], t[k + 2] - t[k + 1]);
        let hs = h0 + h1;
        total += hs / 6.0
            * (f[k] * (2.0 - h1 / h0) + f[k + 1] * hs * hs / (h0 * h1) + f[k + 2] * (2.0 - h0 / h1));
        k += 2;
    }
    if k + 1 < t.len() {
        total += 0.5 * (t[k + 1] - t[k]) * (f[k] + f[k + 1]);
    }
    total
}

/// Relative disagreement of the sample quadrature when every second sample is dropped.
pub fn step_halving_discrepancy(traj: &Trajectory) -> f64 {
    let fine = sampled_rydberg_integral(traj);
    let coarse_idx: Vec<usize> = (0..traj.times.len()).step_by(2).chain(std::iter::once(traj.times.len() - 1)).collect();
    let mut idx = coarse_idx;
    idx.dedup();
    let coarse = Trajectory {
        times: idx.iter().map(|&k| traj.times[k]).collect(),
        states: Vec::new(),
        norms: Vec::new(),
        p_r1: idx.iter().map(|&k| traj.p_r1[k]).collect(),
        p_r2: idx.iter().map(|&k| traj.p_r2[k]).collect(),
        rydberg_integral: 0.0,
        stats: traj.stats,
    };
    let coarse = sampled_rydberg_integral(&coarse);
    if fine == 0.0 {
        coarse.abs()
    } else {
        ((coarse - fine) / fine).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityReport {
    pub times: Vec<f64>,
    /// `|<branch(t)|psi(t)>|^2 / ||psi||^2`.
    pub overlaps: Vec<f64>,
    pub score: f64,
}

/// Overlap of the trajectory with an instantaneous eigenstate supplied by `branch_at`.
pub fn adiabaticity_monitor<F>(traj: &Trajectory, branch_at: F) -> Result<AdiabaticityReport>
where
    F: Fn(f64) -> Result<Vec9>,
{
    let overlaps = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, psi)| {
            let phi = branch_at(t)?;
            Ok((phi.adjoint() * psi)[(0, 0)].norm_sqr() / (psi.norm_squared() * phi.norm_squared()))
        })
        .collect::<Result<Vec<f64>>>()?;
    let score = overlaps.iter().copied().fold(1.0, f64::min);
    Ok(AdiabaticityReport { times: traj.times.clone(), overlaps, score })
}
