//! Additive information-sharing noise on the pull (`xi`) and push (`zeta`)
//! channels.

use crate::report::ValidationReport;
use crate::rng::{keyed, StreamTag};
use crate::schedules::ScheduleSet;
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Pull,
    Push,
}

impl Channel {
    fn tag(self) -> StreamTag {
        match self {
            Channel::Pull => StreamTag::Pull,
            Channel::Push => StreamTag::Push,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
}

/// Zero-mean Gaussian with per-coordinate variance `sigma2 * k^growth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma2: f64,
    pub growth: f64,
    pub channel: Channel,
    pub dim: usize,
}

impl NoiseModel {
    pub fn gaussian(channel: Channel, sigma2: f64, growth: f64, dim: usize) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) || !(growth >= 0.0 && growth.is_finite()) {
            return Err(Error::InvalidConfiguration(format!(
                "{channel:?} noise needs sigma2 >= 0 and growth >= 0, got {sigma2}, {growth}"
            )));
        }
        Ok(Self {
            kind: NoiseKind::Gaussian,
            sigma2,
            growth,
            channel,
            dim,
        })
    }

    pub fn silent(channel: Channel, dim: usize) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            sigma2: 0.0,
            growth: 0.0,
            channel,
            dim,
        }
    }

    pub fn is_silent(&self) -> bool {
        self.sigma2 == 0.0
    }

    pub fn variance(&self, k: u64) -> f64 {
        self.sigma2 * (k.max(1) as f64).powf(self.growth)
    }

    /// Noise attached to `agent`'s message at iteration `k`; a pure function
    /// of `(seed, channel, agent, k)`.
    pub fn draw_into(&self, seed: u64, agent: usize, k: u64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        if self.is_silent() {
            out.fill(0.0);
            return;
        }
        let sd = self.variance(k).sqrt();
        let mut rng = keyed(seed, self.channel.tag(), agent as u64, k);
        for o in out.iter_mut() {
            *o = sd * rng.sample::<f64, _>(StandardNormal);
        }
    }

    pub fn draw(&self, seed: u64, agent: usize, k: u64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.draw_into(seed, agent, k, &mut out);
        out
    }
}

/// Square-summability of the injected noise for power-law schedules and
/// variances: `2 e_beta - q_pull > 1` and `2 e_eta - q_push > 1`.
pub fn validate_assumption3(pull: &NoiseModel, push: &NoiseModel, sched: &ScheduleSet) -> Result<ValidationReport> {
    if pull.channel != Channel::Pull || push.channel != Channel::Push {
        return Err(Error::InvalidInput("expected (pull, push) noise models".into()));
    }
    sched.beta.check()?;
    sched.eta.check()?;
    let mut r = ValidationReport::new("noise summability");
    for (name, factor_e, model) in [("beta", sched.beta.e, pull), ("eta", sched.eta.e, push)] {
        let expo = 2.0 * factor_e - model.growth;
        let label = format!("sum {name}^2 E|{:?} noise|^2 < inf", model.channel).to_lowercase();
        if model.is_silent() {
            r.push(label, true, "noise disabled");
        } else {
            r.push(
                label,
                expo > 1.0,
                format!(
                    "2 e_{name} - q = 2*{factor_e} - {} = {expo:.6} (needs > 1)",
                    model.growth
                ),
            );
        }
    }
    Ok(r)
}
