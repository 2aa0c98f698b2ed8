//! Ramp schedules for one-photon and two-photon adiabatic passages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{eliminate, EffectiveParams, ExcitationScheme};

/// Largest boundary amplitude, relative to the peak, accepted for a
/// truncated adiabatic-passage schedule.
pub const DEFAULT_TRUNCATION: f64 = 1e-4;

/// Gaussian-rise/plateau/Gaussian-fall Rabi frequency with a piecewise-linear
/// detuning. `delta_min` and `delta_max` are signed; their magnitudes give
/// the closest and farthest detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnePhotonRamp {
    #[serde(default)]
    pub omega_min: f64,
    pub omega_max: f64,
    pub delta_min: f64,
    pub delta_max: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub t_w: f64,
}

/// Amplitude-only two-photon pulse on the lower leg, centred at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPhotonRamp {
    pub omega_1a_max: f64,
    pub t_stop: f64,
    pub t_w: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum RampSchedule {
    OnePhoton(OnePhotonRamp),
    TwoPhoton(TwoPhotonRamp),
}

fn gaussian(dt: f64, width: f64) -> f64 {
    (-dt * dt / (2.0 * width * width)).exp()
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + (b - a) * s
}

impl OnePhotonRamp {
    /// Symmetric schedule starting at `t = 0`: ramps of length `ramp`
    /// around a plateau of length `plateau`.
    pub fn symmetric(omega_max: f64, delta_min: f64, delta_max: f64, ramp: f64, plateau: f64, t_w: f64) -> Self {
        OnePhotonRamp {
            omega_min: 0.0,
            omega_max,
            delta_min,
            delta_max,
            t1: 0.0,
            t2: ramp,
            t3: ramp + plateau,
            t4: 2.0 * ramp + plateau,
            t_w,
        }
    }

    /// `(Omega_1r, Delta_1r)` at `t`, clamped to the boundary values outside `[t1, t4]`.
    pub fn evaluate(&self, t: f64) -> (f64, f64) {
        let t = t.clamp(self.t1, self.t4);
        let span = self.omega_max - self.omega_min;
        if t < self.t2 {
            let s = (t - self.t1) / (self.t2 - self.t1);
            (self.omega_min + span * gaussian(t - self.t2, self.t_w), lerp(self.delta_max, self.delta_min, s))
        } else if t <= self.t3 {
            (self.omega_max, self.delta_min)
        } else {
            let s = (t - self.t3) / (self.t4 - self.t3);
            (self.omega_min + span * gaussian(t - self.t3, self.t_w), lerp(self.delta_min, self.delta_max, s))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.omega_min, self.omega_max, self.delta_min, self.delta_max, self.t1, self.t2, self.t3, self.t4, self.t_w];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSchedule("non-finite ramp parameter".into()));
        }
        if !(self.t1 < self.t2 && self.t2 <= self.t3 && self.t3 < self.t4) {
            return Err(Error::InvalidSchedule(format!(
                "need t1 < t2 <= t3 < t4, got {} {} {} {}",
                self.t1, self.t2, self.t3, self.t4
            )));
        }
        if self.t_w <= 0.0 {
            return Err(Error::InvalidSchedule("Gaussian width must be positive".into()));
        }
        if !(self.omega_max >= self.omega_min && self.omega_min >= 0.0) {
            return Err(Error::InvalidSchedule("need omega_max >= omega_min >= 0".into()));
        }
        Ok(())
    }
}

impl TwoPhotonRamp {
    pub fn evaluate(&self, t: f64) -> f64 {
        let half = self.duration / 2.0;
        let t = t.clamp(-half, half);
        if t.abs() <= self.t_stop {
            self.omega_1a_max
        } else {
            self.omega_1a_max * gaussian(t.abs() - self.t_stop, self.t_w)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [self.omega_1a_max, self.t_stop, self.t_w, self.duration];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSchedule("non-finite ramp parameter".into()));
        }
        if self.t_w <= 0.0 {
            return Err(Error::InvalidSchedule("Gaussian width must be positive".into()));
        }
        if self.t_stop < 0.0 || self.duration < 2.0 * self.t_stop || self.duration <= 0.0 {
            return Err(Error::InvalidSchedule("need 0 <= 2 t_stop <= duration, duration > 0".into()));
        }
        if self.omega_1a_max < 0.0 {
            return Err(Error::InvalidSchedule("peak Rabi frequency must be non-negative".into()));
        }
        Ok(())
    }
}

const ONE_PHOTON_NAMES: [&str; 9] = ["omega_min", "omega_max", "delta_min", "delta_max", "t1", "t2", "t3", "t4", "t_w"];
const TWO_PHOTON_NAMES: [&str; 4] = ["omega_1a_max", "t_stop", "t_w", "duration"];

impl RampSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            RampSchedule::OnePhoton(r) => r.validate(),
            RampSchedule::TwoPhoton(r) => r.validate(),
        }
    }

    /// Structural checks plus the truncation requirement for adiabatic passages.
    pub fn validate_passage(&self, truncation: f64) -> Result<()> {
        self.validate()?;
        let level = self.truncation_level();
        if level > truncation {
            return Err(Error::InvalidSchedule(format!(
                "boundary amplitude {level:.3e} of peak exceeds truncation {truncation:.1e}"
            )));
        }
        Ok(())
    }

    /// Largest boundary Rabi frequency relative to the peak.
    pub fn truncation_level(&self) -> f64 {
        let (a, b) = self.support();
        let peak = self.peak_amplitude();
        if peak == 0.0 {
            return 0.0;
        }
        self.amplitude(a).max(self.amplitude(b)) / peak
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            RampSchedule::OnePhoton(r) => (r.t1, r.t4),
            RampSchedule::TwoPhoton(r) => (-r.duration / 2.0, r.duration / 2.0),
        }
    }

    /// Interval on which the drive is constant, if it has positive length.
    pub fn plateau(&self) -> Option<(f64, f64)> {
        let (a, b) = match self {
            RampSchedule::OnePhoton(r) => (r.t2, r.t3),
            RampSchedule::TwoPhoton(r) => (-r.t_stop, r.t_stop),
        };
        (b > a).then_some((a, b))
    }

    pub fn duration(&self) -> f64 {
        let (a, b) = self.support();
        b - a
    }

    pub fn midpoint(&self) -> f64 {
        let (a, b) = self.support();
        (a + b) / 2.0
    }

    pub fn peak_amplitude(&self) -> f64 {
        match self {
            RampSchedule::OnePhoton(r) => r.omega_max,
            RampSchedule::TwoPhoton(r) => r.omega_1a_max,
        }
    }

    /// The time-dependent laser amplitude (`Omega_1r` or `Omega_1a`).
    pub fn amplitude(&self, t: f64) -> f64 {
        match self {
            RampSchedule::OnePhoton(r) => r.evaluate(t).0,
            RampSchedule::TwoPhoton(r) => r.evaluate(t),
        }
    }

    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            RampSchedule::OnePhoton(_) => &ONE_PHOTON_NAMES,
            RampSchedule::TwoPhoton(_) => &TWO_PHOTON_NAMES,
        }
    }

    /// Parameters in serialization order.
    pub fn to_vector(&self) -> Vec<f64> {
        match self {
            RampSchedule::OnePhoton(r) => {
                vec![r.omega_min, r.omega_max, r.delta_min, r.delta_max, r.t1, r.t2, r.t3, r.t4, r.t_w]
            }
            RampSchedule::TwoPhoton(r) => vec![r.omega_1a_max, r.t_stop, r.t_w, r.duration],
        }
    }

    /// Same variant with parameters taken from `x` (serialization order).
    pub fn with_vector(&self, x: &[f64]) -> Result<Self> {
        if x.len() != self.parameter_names().len() {
            return Err(Error::InvalidSchedule(format!(
                "expected {} parameters, got {}",
                self.parameter_names().len(),
                x.len()
            )));
        }
        let out = match self {
            RampSchedule::OnePhoton(_) => RampSchedule::OnePhoton(OnePhotonRamp {
                omega_min: x[0],
                omega_max: x[1],
                delta_min: x[2],
                delta_max: x[3],
                t1: x[4],
                t2: x[5],
                t3: x[6],
                t4: x[7],
                t_w: x[8],
            }),
            RampSchedule::TwoPhoton(_) => {
                RampSchedule::TwoPhoton(TwoPhotonRamp { omega_1a_max: x[0], t_stop: x[1], t_w: x[2], duration: x[3] })
            }
        };
        out.validate()?;
        Ok(out)
    }

    /// Effective single-atom couplings at time `t` for the given scheme.
    ///
    /// The scheme supplies decay rates and, for two photons, the fixed upper
    /// leg and detunings; its lower-leg or direct Rabi frequency is replaced.
    pub fn effective_at(&self, scheme: &ExcitationScheme, t: f64) -> Result<EffectiveParams> {
        match (self, scheme) {
            (RampSchedule::OnePhoton(r), ExcitationScheme::OnePhoton(s)) => {
                let (omega_eff, delta_eff) = r.evaluate(t);
                Ok(EffectiveParams { omega_eff, delta_eff, gamma_r: s.gamma_r, ..EffectiveParams::default() })
            }
            (RampSchedule::TwoPhoton(r), ExcitationScheme::TwoPhoton(s)) => {
                eliminate(&crate::model::TwoPhoton { omega_1a: r.evaluate(t), ..*s })
            }
            _ => Err(Error::InvalidSchedule("ramp and excitation scheme variants differ".into())),
        }
    }
}

/// `(t, Omega_eff(t), Delta_eff(t))` on `samples` evenly spaced points of the support.
pub fn effective_sweep(r: &RampSchedule, s: &ExcitationScheme, samples: usize) -> Result<Vec<(f64, EffectiveParams)>> {
    if !matches!(r, RampSchedule::TwoPhoton(_)) {
        return Err(Error::InvalidSchedule("effective sweep needs a two-photon ramp".into()));
    }
    r.validate()?;
    s.validate()?;
    // Warn once, at peak power, instead of at every sample.
    if let ExcitationScheme::TwoPhoton(p) = s {
        crate::model::adiabatic_elimination(&crate::model::TwoPhoton { omega_1a: r.peak_amplitude(), ..*p })?;
    }
    let (a, b) = r.support();
    let n = samples.max(2);
    (0..n)
        .map(|k| {
            let t = a + (b - a) * k as f64 / (n - 1) as f64;
            r.effective_at(s, t).map(|p| (t, p))
        })
        .collect()
}
