//! Step sizes and mixing factors.
//!
//! Every sequence is a capped power law `min(1, a / (c + k^e))`. The
//! convergence hypotheses on these sequences reduce to inequalities between
//! the asymptotic exponents, which is what the validators check.

use crate::report::ValidationReport;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawSchedule {
    pub a: f64,
    #[serde(default)]
    pub c: f64,
    pub e: f64,
}

impl PowerLawSchedule {
    pub fn new(a: f64, c: f64, e: f64) -> Result<Self> {
        let s = Self { a, c, e };
        s.check()?;
        Ok(s)
    }

    /// `a / k^e`.
    pub fn pure(a: f64, e: f64) -> Result<Self> {
        Self::new(a, 0.0, e)
    }

    /// `a / (c + k^e)`.
    pub fn offset(a: f64, c: f64, e: f64) -> Result<Self> {
        Self::new(a, c, e)
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(value, 0.0, 0.0)
    }

    pub fn check(&self) -> Result<()> {
        let ok = self.a.is_finite()
            && self.a > 0.0
            && self.c.is_finite()
            && self.c >= 0.0
            && self.e.is_finite()
            && self.e >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::UnsupportedConfiguration(format!(
                "schedule {self:?} is not a power law a/(c + k^e) with a > 0, c >= 0, e >= 0"
            )))
        }
    }

    pub fn is_pure(&self) -> bool {
        self.c == 0.0
    }

    /// Value at iteration `k >= 1`, capped at 1.
    pub fn eval(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        let k = k.max(1) as f64;
        (self.a / (self.c + k.powf(self.e))).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSet {
    pub alpha: PowerLawSchedule,
    pub beta: PowerLawSchedule,
    pub eta: PowerLawSchedule,
    pub gamma: f64,
}

impl ScheduleSet {
    /// Ridge benchmark parameters: `gamma = 0.8`, `beta_k = 0.1/(1+k^0.6)`,
    /// `alpha_k = 0.1/(1+k^0.9)`. `eta_k` is not given for the benchmark and
    /// defaults to the same form as `beta_k`.
    pub fn benchmark_default() -> Self {
        Self {
            alpha: PowerLawSchedule { a: 0.1, c: 1.0, e: 0.9 },
            beta: PowerLawSchedule { a: 0.1, c: 1.0, e: 0.6 },
            eta: PowerLawSchedule { a: 0.1, c: 1.0, e: 0.6 },
            gamma: 0.8,
        }
    }

    /// Constant factors with `eta = 1`; this turns VRA-GT into R-Push-Pull.
    pub fn r_push_pull(gamma: f64, beta: f64, alpha: f64) -> Result<Self> {
        let s = Self {
            alpha: PowerLawSchedule::constant(alpha)?,
            beta: PowerLawSchedule::constant(beta)?,
            eta: PowerLawSchedule::constant(1.0)?,
            gamma,
        };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        self.alpha.check()?;
        self.beta.check()?;
        self.eta.check()?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfiguration(format!(
                "gamma = {} not in (0, 1]",
                self.gamma
            )));
        }
        Ok(())
    }
}

fn in_half_open(x: f64, lo: f64, hi: f64) -> bool {
    x > lo && x <= hi
}

fn in_open(x: f64, lo: f64, hi: f64) -> bool {
    x > lo && x < hi
}

/// Exponent form of the almost-sure convergence hypotheses:
/// `sum beta = inf`, `sum beta^2 < inf` (same for eta), `sum alpha = inf`,
/// `sum alpha^2/beta < inf`, `alpha/beta -> 0`, and `gamma < 1`.
pub fn validate_theorem2(s: &ScheduleSet) -> Result<ValidationReport> {
    s.alpha.check()?;
    s.beta.check()?;
    s.eta.check()?;
    let (ea, eb, ee) = (s.alpha.e, s.beta.e, s.eta.e);
    let mut r = ValidationReport::new("almost-sure convergence schedule conditions");
    r.push(
        "e_beta in (1/2, 1]",
        in_half_open(eb, 0.5, 1.0),
        format!("e_beta = {eb}"),
    );
    r.push("e_eta in (1/2, 1]", in_half_open(ee, 0.5, 1.0), format!("e_eta = {ee}"));
    r.push("sum alpha = inf (e_alpha <= 1)", ea <= 1.0, format!("e_alpha = {ea}"));
    r.push(
        "sum alpha^2/beta < inf (2 e_alpha - e_beta > 1)",
        2.0 * ea - eb > 1.0,
        format!("2 e_alpha - e_beta = {:.6}", 2.0 * ea - eb),
    );
    r.push(
        "lim alpha/beta = 0 (e_alpha > e_beta)",
        ea > eb,
        format!("e_alpha - e_beta = {:.6}", ea - eb),
    );
    r.push(
        "gamma < 1",
        s.gamma > 0.0 && s.gamma < 1.0,
        format!("gamma = {}", s.gamma),
    );
    Ok(r)
}

/// `min{2 e_beta - e_alpha, e_beta + e_eta - e_alpha}`.
pub fn predicted_rate(e_alpha: f64, e_beta: f64, e_eta: f64) -> f64 {
    (2.0 * e_beta - e_alpha).min(e_beta + e_eta - e_alpha)
}

/// Exponent form of the mean-square rate hypotheses. Returns the predicted
/// decay exponent when every condition holds. Offset schedules are judged by
/// their asymptotic exponent.
pub fn validate_theorem3(s: &ScheduleSet) -> Result<(ValidationReport, Option<f64>)> {
    s.alpha.check()?;
    s.beta.check()?;
    s.eta.check()?;
    let (ea, eb, ee) = (s.alpha.e, s.beta.e, s.eta.e);
    let mut r = ValidationReport::new("mean-square rate schedule conditions");
    r.push("e_eta in (1/2, 1)", in_open(ee, 0.5, 1.0), format!("e_eta = {ee}"));
    r.push("e_beta in (1/2, 1)", in_open(eb, 0.5, 1.0), format!("e_beta = {eb}"));
    r.push("e_alpha in (1/2, 1)", in_open(ea, 0.5, 1.0), format!("e_alpha = {ea}"));
    r.push(
        "e_alpha > (1 + e_beta)/2",
        ea > 0.5 * (1.0 + eb),
        format!("e_alpha = {ea}, (1 + e_beta)/2 = {:.6}", 0.5 * (1.0 + eb)),
    );
    let amps = [s.alpha.a, s.beta.a, s.eta.a];
    r.push(
        "amplitudes in (0, 1]",
        amps.iter().all(|&a| in_half_open(a, 0.0, 1.0)),
        format!("a_alpha = {}, a_beta = {}, a_eta = {}", amps[0], amps[1], amps[2]),
    );
    r.push(
        "gamma < 1",
        s.gamma > 0.0 && s.gamma < 1.0,
        format!("gamma = {}", s.gamma),
    );
    let rate = predicted_rate(ea, eb, ee);
    let pass = r.passed();
    r.push(
        "predicted rate exponent",
        true,
        format!("min(2 e_beta - e_alpha, e_beta + e_eta - e_alpha) = {rate:.6}"),
    );
    Ok((r, pass.then_some(rate)))
}

/// `e_eta = e_beta = 1 - 5 eps / 8`, `e_alpha = 1 - eps / 4`; rate `1 - eps`.
pub fn epsilon_family(eps: f64) -> Result<ScheduleSet> {
    let eb = 1.0 - 5.0 * eps / 8.0;
    Ok(ScheduleSet {
        alpha: PowerLawSchedule::pure(1.0, 1.0 - eps / 4.0)?,
        beta: PowerLawSchedule::pure(1.0, eb)?,
        eta: PowerLawSchedule::pure(1.0, eb)?,
        gamma: 0.8,
    })
}
