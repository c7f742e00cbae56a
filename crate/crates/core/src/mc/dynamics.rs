//! Three-state emitter dynamics {ground, excited, shelf} under continuous
//! off-resonant pumping.

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{EmitterId, PhotonRecord};
use crate::error::{Error, Result};
use crate::model::{AutocorrParams, EmitterModel};

/// Rates of the generative emitter model.
///
/// ground → excited at `pump_rate`; excited → (photon) at `gamma`, after which
/// the emitter lands in the shelf with `shelf_prob`, otherwise in ground;
/// shelf → ground at `1/shelf_lifetime`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionDynamics {
    pub pump_rate: f64,
    pub gamma: f64,
    pub shelf_prob: f64,
    pub shelf_lifetime: f64,
}

impl EmissionDynamics {
    /// `pump_rate == 0` is accepted and describes a dark emitter.
    pub fn validate(&self) -> Result<()> {
        if !(self.pump_rate.is_finite() && self.pump_rate >= 0.0) {
            return Err(Error::Config(format!("pump_rate = {} must be >= 0", self.pump_rate)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Config(format!(
                "gamma = {} must be > 0 (zero decay makes the excited state absorbing)",
                self.gamma
            )));
        }
        if !(0.0..1.0).contains(&self.shelf_prob) {
            return Err(Error::Config(format!(
                "shelf_prob = {} must lie in [0, 1)",
                self.shelf_prob
            )));
        }
        if !(self.shelf_lifetime.is_finite() && self.shelf_lifetime > 0.0) {
            return Err(Error::Config(format!(
                "shelf_lifetime = {} must be finite and > 0 (otherwise the shelf is absorbing)",
                self.shelf_lifetime
            )));
        }
        Ok(())
    }

    pub fn is_dark(&self) -> bool {
        self.pump_rate == 0.0
    }

    fn shelf_rate(&self) -> f64 {
        1.0 / self.shelf_lifetime
    }

    /// Stationary (ground, excited, shelf) populations.
    pub fn stationary(&self) -> [f64; 3] {
        let (r, g, s, k) = (self.pump_rate, self.gamma, self.shelf_prob, self.shelf_rate());
        let e = r / (r + g + r * g * s / k);
        let shelf = g * s * e / k;
        [1.0 - e - shelf, e, shelf]
    }

    /// Photon emission rate in steady state, `γ·p_e`.
    pub fn emission_rate(&self) -> f64 {
        self.gamma * self.stationary()[1]
    }

    /// Exact map onto the three-level autocorrelation form.
    ///
    /// Eliminating the ground population leaves a 2×2 linear system for
    /// (excited, shelf) with eigenvalues λ₁ < λ₂ < 0; starting from the
    /// post-emission state (excited = 0, shelf = shelf_prob) gives
    /// `g(τ) = 1 + c₁e^{λ₁τ} + c₂e^{λ₂τ}` with `c₁ + c₂ = −1`, i.e.
    /// `a = c₂`, `τ₁ = −1/λ₁`, `τ₂ = −1/λ₂`.
    pub fn autocorr_params(&self) -> Result<AutocorrParams> {
        self.validate()?;
        if self.is_dark() {
            return Err(Error::Config("dark emitter has no autocorrelation".into()));
        }
        let (r, g, s, k) = (self.pump_rate, self.gamma, self.shelf_prob, self.shelf_rate());
        let trace = -(r + g + k);
        let det = (r + g) * k + r * g * s;
        let disc = trace * trace - 4.0 * det;
        if disc < 0.0 {
            return Err(Error::Validity(
                "dynamics give an oscillating autocorrelation that the three-level form cannot represent"
                    .into(),
            ));
        }
        let sq = disc.sqrt();
        let l_fast = 0.5 * (trace - sq);
        let l_slow = 0.5 * (trace + sq);
        let e_inf = self.stationary()[1];
        let slope = r * (1.0 - s);
        if (l_fast - l_slow).abs() < 1e-12 * l_fast.abs() {
            return Err(Error::Validity("degenerate eigenvalues".into()));
        }
        // alpha_f + alpha_s = -e_inf ; l_f alpha_f + l_s alpha_s = slope
        let alpha_s = (slope + l_fast * e_inf) / (l_slow - l_fast);
        let a = alpha_s / e_inf;
        let a = if a.abs() < 1e-12 { 0.0 } else { a };
        AutocorrParams::new(a, -1.0 / l_fast, -1.0 / l_slow).map_err(|_| {
            Error::Validity(format!(
                "dynamics imply a negative bunching amplitude ({a:.3e}) outside the three-level form"
            ))
        })
    }

    fn mixing_time(&self) -> f64 {
        let fast = 1.0 / (self.pump_rate + self.gamma);
        let slow = if self.shelf_prob > 0.0 {
            self.shelf_lifetime.max(fast)
        } else {
            fast
        };
        15.0 * slow
    }
}

/// Per-photon spectral label drawn at emission.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Spectral {
    pub f_selected: f64,
    cauchy: Option<Cauchy<f64>>,
    pub purity: f64,
    pub impurity_detuning: f64,
}

impl Spectral {
    pub fn new(em: &EmitterModel, impurity_detuning: f64) -> Result<Self> {
        let cauchy = if em.sd_fwhm > 0.0 {
            Some(
                Cauchy::new(em.f_ex, 0.5 * em.sd_fwhm)
                    .map_err(|e| Error::domain(format!("spectral diffusion: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            f_selected: em.f_ex,
            cauchy,
            purity: em.spin_purity,
            impurity_detuning,
        })
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, bool) {
        let selected = self.purity >= 1.0 || rng.random::<f64>() < self.purity;
        if selected {
            let f = match &self.cauchy {
                Some(c) => c.sample(rng),
                None => self.f_selected,
            };
            (f, true)
        } else {
            (self.f_selected + self.impurity_detuning, false)
        }
    }
}

/// Exact event-by-event simulation of every emitted photon over
/// `[0, duration)`, starting from the stationary state.
///
/// Each photon carries a centre frequency `f_ex` + Lorentzian(sd_fwhm) draw.
pub fn simulate_emitter_stream(
    em: &EmitterModel,
    dyn_: &EmissionDynamics,
    duration: f64,
    seed: u64,
) -> Result<Vec<PhotonRecord>> {
    let mut rng = super::rng_for(seed, 0);
    simulate_emitter_stream_with(em, dyn_, duration, EmitterId::One, &mut rng)
}

pub(crate) fn simulate_emitter_stream_with<R: Rng + ?Sized>(
    em: &EmitterModel,
    dyn_: &EmissionDynamics,
    duration: f64,
    id: EmitterId,
    rng: &mut R,
) -> Result<Vec<PhotonRecord>> {
    em.validate()?;
    dyn_.validate()?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::domain(format!("duration = {duration} must be > 0")));
    }
    if dyn_.is_dark() {
        return Ok(Vec::new());
    }
    let spectral = Spectral::new(em, super::DEFAULT_IMPURITY_DETUNING)?;
    let k = dyn_.shelf_rate();
    let pi = dyn_.stationary();
    let u: f64 = rng.random();
    let mut state = if u < pi[0] {
        0u8
    } else if u < pi[0] + pi[1] {
        1
    } else {
        2
    };
    let mut t = 0.0;
    let mut out = Vec::with_capacity((dyn_.emission_rate() * duration * 1.05) as usize + 16);
    loop {
        let rate = match state {
            0 => dyn_.pump_rate,
            1 => dyn_.gamma,
            _ => k,
        };
        let dt: f64 = rng.sample::<f64, _>(Exp1) / rate;
        t += dt;
        if t >= duration {
            break;
        }
        state = match state {
            0 => 1,
            1 => {
                let (f, selected) = spectral.draw(rng);
                out.push(PhotonRecord {
                    emit_time: t,
                    center_freq: f,
                    emitter_id: id,
                    selected_line: selected,
                });
                if dyn_.shelf_prob > 0.0 && rng.random::<f64>() < dyn_.shelf_prob {
                    2
                } else {
                    0
                }
            }
            _ => 0,
        };
    }
    Ok(out)
}

/// Samples the sub-stream of photons that survive a collection efficiency
/// `eta ≪ 1` without simulating the lost emissions.
///
/// After a collected photon the emitter restarts in ground (or in the shelf
/// with `shelf_prob`); the next collected photon is the first event of a
/// Poisson process with intensity `eta·γ·p_e(t | start)`. `p_e` is tabulated
/// up to a mixing time past which it equals the stationary value, so most
/// draws cost one exponential variate. Conditioning on "no collected photon
/// yet" shifts the populations by O(eta), which is neglected.
#[derive(Debug, Clone)]
pub struct CollectedStreamSampler {
    eta: f64,
    shelf_prob: f64,
    /// Collected-photon rate in steady state.
    rate: f64,
    dt: f64,
    /// Cumulative unscaled hazard `γ∫p_e` from ground and from shelf.
    cum_from_ground: Vec<f64>,
    cum_from_shelf: Vec<f64>,
    t_mix: f64,
}

impl CollectedStreamSampler {
    pub fn new(dyn_: &EmissionDynamics, eta: f64) -> Result<Self> {
        dyn_.validate()?;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Config(format!("collection efficiency {eta} must lie in (0, 1]")));
        }
        if dyn_.is_dark() {
            return Err(Error::Config("dark emitter has no collected stream".into()));
        }
        let rate_scale = dyn_.pump_rate + dyn_.gamma + dyn_.shelf_rate();
        let dt = 0.01 / rate_scale;
        let t_mix = dyn_.mixing_time();
        let steps = (t_mix / dt).ceil() as usize;
        let cum_from_ground = cumulative_hazard(dyn_, [1.0, 0.0, 0.0], dt, steps);
        let cum_from_shelf = cumulative_hazard(dyn_, [0.0, 0.0, 1.0], dt, steps);
        Ok(Self {
            eta,
            shelf_prob: dyn_.shelf_prob,
            rate: eta * dyn_.emission_rate(),
            dt,
            t_mix: steps as f64 * dt,
            cum_from_ground,
            cum_from_shelf,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn collection_efficiency(&self) -> f64 {
        self.eta
    }

    #[inline]
    fn next_interval<R: Rng + ?Sized>(&self, rng: &mut R, from_shelf: bool) -> f64 {
        let target = rng.sample::<f64, _>(Exp1) / self.eta;
        let table = if from_shelf {
            &self.cum_from_shelf
        } else {
            &self.cum_from_ground
        };
        let tail = *table.last().expect("non-empty table");
        if target >= tail {
            return self.t_mix + (target - tail) * self.eta / self.rate;
        }
        // First index with cum >= target.
        let i = table.partition_point(|&c| c < target);
        if i == 0 {
            return 0.0;
        }
        let (c0, c1) = (table[i - 1], table[i]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        ((i - 1) as f64 + frac) * self.dt
    }

    /// Collected photons over `[0, duration)`, stationary start.
    pub(crate) fn sample<R: Rng + ?Sized>(
        &self,
        duration: f64,
        id: EmitterId,
        spectral: &Spectral,
        rng: &mut R,
        out: &mut Vec<PhotonRecord>,
    ) {
        let mut t = rng.sample::<f64, _>(Exp1) / self.rate;
        while t < duration {
            let (f, selected) = spectral.draw(rng);
            out.push(PhotonRecord {
                emit_time: t,
                center_freq: f,
                emitter_id: id,
                selected_line: selected,
            });
            let from_shelf = self.shelf_prob > 0.0 && rng.random::<f64>() < self.shelf_prob;
            t += self.next_interval(rng, from_shelf);
        }
    }
}

/// RK4 integration of the master equation from `p0`, accumulating
/// `γ∫p_e dt` with the trapezoid rule.
fn cumulative_hazard(dyn_: &EmissionDynamics, p0: [f64; 3], dt: f64, steps: usize) -> Vec<f64> {
    let (r, g, s, k) = (dyn_.pump_rate, dyn_.gamma, dyn_.shelf_prob, dyn_.shelf_rate());
    let deriv = |p: [f64; 3]| -> [f64; 3] {
        [
            -r * p[0] + g * (1.0 - s) * p[1] + k * p[2],
            r * p[0] - g * p[1],
            g * s * p[1] - k * p[2],
        ]
    };
    let add = |p: [f64; 3], d: [f64; 3], h: f64| [p[0] + h * d[0], p[1] + h * d[1], p[2] + h * d[2]];
    let mut p = p0;
    let mut cum = Vec::with_capacity(steps + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for _ in 0..steps {
        let k1 = deriv(p);
        let k2 = deriv(add(p, k1, 0.5 * dt));
        let k3 = deriv(add(p, k2, 0.5 * dt));
        let k4 = deriv(add(p, k3, dt));
        let next = [
            p[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            p[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            p[2] + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        ];
        acc += 0.5 * dt * g * (p[1] + next[1]);
        cum.push(acc);
        p = next;
    }
    cum
}
