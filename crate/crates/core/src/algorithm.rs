//! The VRA-GT iteration.
//!
//! Each agent keeps three rows: the decision estimate `x_i`, the
//! cumulative-gradient tracker `s_i` and the aggregation tracker `z_i`. One
//! round runs, in order,
//!
//! ```text
//! s_i <- (1 - gamma) s_i + gamma z_i + grad f_i(x_i)
//! x_i <- (1 - beta_k) x_i + beta_k (sum_j R_ij x_j + sum_{j in N_in} R_ij xi_j) - alpha_k (s_i' - s_i)
//! z_i <- eta_k (sum_j C_ij (s_j' - (1 - eta_k) s_j) / eta_k + sum_{j in N_in} zeta_j) + (1 - eta_k) z_i
//! ```
//!
//! where primes denote the freshly advanced `s`. With `eta_k = 1` and
//! constant `beta_k` this is R-Push-Pull.

use crate::graph::{EigenPair, WeightPair};
use crate::noise::{Channel, NoiseModel};
use crate::problems::Objective;
use crate::rng::{keyed, StreamTag};
use crate::schedules::{PowerLawSchedule, ScheduleSet};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// Magnitude beyond which an iterate is treated as divergent.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Sparse row view of a [`WeightPair`] for the per-agent updates.
#[derive(Debug, Clone)]
pub struct Topology {
    n: usize,
    /// Nonzero `R_ij`, diagonal included.
    r_rows: Vec<Vec<(usize, f64)>>,
    /// Nonzero `C_ij`, diagonal included.
    c_rows: Vec<Vec<(usize, f64)>>,
    /// Off-diagonal `j` with `C_ij > 0`.
    c_in: Vec<Vec<usize>>,
    c_gamma: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl Topology {
    pub fn new(w: &WeightPair, gamma: f64) -> Self {
        let n = w.n();
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<(usize, f64)>> {
            (0..n)
                .map(|i| (0..n).filter(|&j| m[(i, j)] > 0.0).map(|j| (j, m[(i, j)])).collect())
                .collect()
        };
        let c_rows = rows(w.c());
        let c_in = c_rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().map(|&(j, _)| j).filter(|&j| j != i).collect())
            .collect();
        Self {
            n,
            r_rows: rows(w.r()),
            c_rows,
            c_in,
            c_gamma: w.c_mixed(gamma),
            c: w.c().clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `C m`.
    pub fn push_mix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.c * m
    }
}

/// Per-agent iterates, each an `n x d` matrix with one row per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub x: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub z: DMatrix<f64>,
    /// `s` before the latest `step_s`, so `y_k = s - s_prev`.
    pub s_prev: DMatrix<f64>,
    pub k: u64,
}

impl NetworkState {
    /// Starts at `k = 1` with `s_1 = z_1 = 0`.
    pub fn new(x: DMatrix<f64>) -> Self {
        let (n, d) = x.shape();
        Self {
            x,
            s: DMatrix::zeros(n, d),
            z: DMatrix::zeros(n, d),
            s_prev: DMatrix::zeros(n, d),
            k: 1,
        }
    }

    /// `x_1` rows i.i.d. uniform on `[0, 1]^d`, keyed by `seed`.
    pub fn uniform(n: usize, d: usize, seed: u64) -> Self {
        let mut x = DMatrix::zeros(n, d);
        for i in 0..n {
            let mut rng = keyed(seed, StreamTag::Init, i as u64, 0);
            for c in 0..d {
                x[(i, c)] = rng.random::<f64>();
            }
        }
        Self::new(x)
    }

    /// `y_k = s_{k+1} - s_k`, valid right after [`step_s`].
    pub fn y(&self) -> DMatrix<f64> {
        &self.s - &self.s_prev
    }
}

fn guard(m: &DMatrix<f64>, k: u64) -> Result<()> {
    if m.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_BOUND) {
        Ok(())
    } else {
        Err(Error::Divergence { k })
    }
}

fn check_shape(what: &str, m: &DMatrix<f64>, shape: (usize, usize)) -> Result<()> {
    if m.shape() == shape {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} has shape {:?}, expected {shape:?}",
            m.shape()
        )))
    }
}

/// `s <- (1 - gamma) s + gamma z + g`; the old `s` moves to `s_prev`.
pub fn step_s(state: &mut NetworkState, grads: &DMatrix<f64>, gamma: f64) -> Result<()> {
    check_shape("gradient matrix", grads, state.s.shape())?;
    guard(grads, state.k)?;
    let next = &state.s * (1.0 - gamma) + &state.z * gamma + grads;
    guard(&next, state.k)?;
    state.s_prev = std::mem::replace(&mut state.s, next);
    Ok(())
}

/// Pull step. Row `j` of `pull_noise` is the perturbation `xi_j` that agent `j`
/// attaches to its broadcast `x_j`; receivers weight it by `R_ij`.
pub fn step_x(
    state: &mut NetworkState,
    topo: &Topology,
    beta: f64,
    alpha: f64,
    pull_noise: &DMatrix<f64>,
) -> Result<()> {
    check_shape("pull noise", pull_noise, state.x.shape())?;
    let (n, d) = state.x.shape();
    let mut next = DMatrix::zeros(n, d);
    for i in 0..n {
        for c in 0..d {
            let mut pulled = 0.0;
            for &(j, w) in &topo.r_rows[i] {
                pulled += if j == i {
                    w * state.x[(j, c)]
                } else {
                    w * (state.x[(j, c)] + pull_noise[(j, c)])
                };
            }
            let y = state.s[(i, c)] - state.s_prev[(i, c)];
            next[(i, c)] = (1.0 - beta) * state.x[(i, c)] + beta * pulled - alpha * y;
        }
    }
    guard(&next, state.k)?;
    state.x = next;
    Ok(())
}

/// Variance-reduced aggregation. Agent `j` pushes
/// `C_ij (s_j' - (1 - eta) s_j) / eta + zeta_j` to each out-neighbor `i`; the
/// self term is noiseless.
pub fn step_z(state: &mut NetworkState, topo: &Topology, eta: f64, push_noise: &DMatrix<f64>) -> Result<()> {
    check_shape("push noise", push_noise, state.z.shape())?;
    let next = vra_update(topo, &state.z, &state.s, &state.s_prev, eta, push_noise)?;
    guard(&next, state.k)?;
    state.z = next;
    Ok(())
}

/// One aggregation round in message form; shared by [`step_z`] and
/// [`vra_probe`].
fn vra_update(
    topo: &Topology,
    z: &DMatrix<f64>,
    s_next: &DMatrix<f64>,
    s_cur: &DMatrix<f64>,
    eta: f64,
    push_noise: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidConfiguration(format!("eta_k = {eta} not in (0, 1]")));
    }
    let (n, d) = z.shape();
    let mut next = DMatrix::zeros(n, d);
    for i in 0..n {
        for c in 0..d {
            let mut received = 0.0;
            for &(j, w) in &topo.c_rows[i] {
                received += w * (s_next[(j, c)] - (1.0 - eta) * s_cur[(j, c)]) / eta;
            }
            for &j in &topo.c_in[i] {
                received += push_noise[(j, c)];
            }
            next[(i, c)] = eta * received + (1.0 - eta) * z[(i, c)];
        }
    }
    Ok(next)
}

/// `u^T x / n`.
pub fn weighted_average(x: &DMatrix<f64>, u: &DVector<f64>) -> DVector<f64> {
    (x.tr_mul(u)) / x.nrows() as f64
}

/// Squared Frobenius distance of every row from `x_star`.
pub fn optimality_gap(x: &DMatrix<f64>, x_star: &[f64]) -> f64 {
    x.row_iter()
        .map(|row| row.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum()
}

/// `||x - 1 xbar||^2` with `xbar = u^T x / n`.
pub fn consensus_error(x: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    let xbar = weighted_average(x, u);
    x.row_iter()
        .map(|row| row.iter().zip(xbar.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum()
}

fn column_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub k: u64,
    /// `sum_j ||x_j - x*||^2`.
    pub opt_gap: f64,
    /// `||x - 1 xbar||^2`.
    pub consensus: f64,
    /// `||z - C s||^2`.
    pub tracking: f64,
    /// `||1^T (s_{k+1} - s_k) - gamma 1^T (z_k - C s_k) - 1^T g_k||`.
    pub conservation_residual: f64,
}

impl TrajectoryRow {
    pub fn composite(&self) -> f64 {
        self.opt_gap + self.consensus
    }
}

/// Extra per-checkpoint quantities that need the noise-free tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub k: u64,
    /// `||y_k - y'_k||`.
    pub tracker_gap: f64,
    /// `||1^T y'_k - 1^T g_k||`.
    pub tracker_sum_residual: f64,
    /// `||y'_k - v ybar'_k||^2 + ||x_k - 1 xbar_k||^2 + ||xbar_k - x*||^2`
    /// in plain norms, unit weight on the last term.
    pub composite_v: f64,
    /// `||g_k||`, the scale of the conservation check.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub diagnostics: Vec<DiagnosticRow>,
    pub final_state: NetworkState,
}

#[derive(Debug, Clone)]
pub enum InitialPoint {
    /// Rows i.i.d. uniform on `[0, 1]^d` from the run seed.
    Uniform,
    Given(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub schedules: ScheduleSet,
    pub pull: NoiseModel,
    pub push: NoiseModel,
    pub iterations: u64,
    pub record_every: u64,
    pub seed: u64,
    pub diagnostics: bool,
    pub init: InitialPoint,
}

impl RunConfig {
    pub fn noiseless(schedules: ScheduleSet, dim: usize, iterations: u64) -> Self {
        Self {
            schedules,
            pull: NoiseModel::silent(Channel::Pull, dim),
            push: NoiseModel::silent(Channel::Push, dim),
            iterations,
            record_every: 10,
            seed: 0,
            diagnostics: false,
            init: InitialPoint::Uniform,
        }
    }
}

/// `k = 1`, every decade, multiples of `stride`, and the final iteration.
pub fn is_checkpoint(k: u64, stride: u64, last: u64) -> bool {
    if k == 1 || k == last || (stride > 0 && k.is_multiple_of(stride)) {
        return true;
    }
    let mut p = 10;
    while p < k {
        p *= 10;
    }
    p == k
}

fn fill_noise(model: &NoiseModel, seed: u64, k: u64, out: &mut DMatrix<f64>) {
    if model.is_silent() {
        out.fill(0.0);
        return;
    }
    let mut buf = vec![0.0; out.ncols()];
    for j in 0..out.nrows() {
        model.draw_into(seed, j, k, &mut buf);
        for (c, v) in buf.iter().enumerate() {
            out[(j, c)] = *v;
        }
    }
}

/// Runs VRA-GT for `cfg.iterations` rounds and records metrics at the
/// checkpoints of [`is_checkpoint`].
pub fn run(problem: &dyn Objective, w: &WeightPair, e: &EigenPair, cfg: &RunConfig) -> Result<Trajectory> {
    cfg.schedules.check()?;
    let n = w.n();
    let d = problem.dim();
    if problem.agents() != n {
        return Err(Error::InvalidInput(format!(
            "objective has {} agents, network has {n}",
            problem.agents()
        )));
    }
    if cfg.pull.dim != d || cfg.push.dim != d {
        return Err(Error::InvalidInput(
            "noise dimension differs from decision dimension".into(),
        ));
    }
    let x_star = problem
        .optimum()
        .ok_or_else(|| Error::InvalidInput("objective has no known optimum for metrics".into()))?
        .to_vec();
    let mut state = match &cfg.init {
        InitialPoint::Uniform => NetworkState::uniform(n, d, cfg.seed),
        InitialPoint::Given(x) => {
            check_shape("initial point", x, (n, d))?;
            NetworkState::new(x.clone())
        }
    };
    let topo = Topology::new(w, cfg.schedules.gamma);
    let gamma = cfg.schedules.gamma;

    let mut grads = DMatrix::zeros(n, d);
    let mut xi = DMatrix::zeros(n, d);
    let mut zeta = DMatrix::zeros(n, d);
    let mut gbuf = vec![0.0; d];
    let mut xbuf = vec![0.0; d];
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut y_prime: Option<DMatrix<f64>> = None;
    let mut g_prev: Option<DMatrix<f64>> = None;

    for k in 1..=cfg.iterations {
        state.k = k;
        for i in 0..n {
            xbuf.iter_mut().zip(state.x.row(i).iter()).for_each(|(b, v)| *b = *v);
            problem.grad_into(i, &xbuf, &mut gbuf);
            for c in 0..d {
                grads[(i, c)] = gbuf[c];
            }
        }
        let record = is_checkpoint(k, cfg.record_every, cfg.iterations);
        let pre = record.then(|| {
            let cs = topo.push_mix(&state.s);
            let phi = &state.z - &cs;
            (
                optimality_gap(&state.x, &x_star),
                consensus_error(&state.x, &e.u),
                phi.norm_squared(),
                column_sums(&phi) * gamma,
            )
        });
        let xbar = record.then(|| weighted_average(&state.x, &e.u));

        step_s(&mut state, &grads, gamma)?;

        if cfg.diagnostics {
            let yp = match (y_prime.take(), g_prev.take()) {
                (Some(yp), Some(gp)) => &topo.c_gamma * yp + &grads - gp,
                _ => grads.clone(),
            };
            if record {
                let y = state.y();
                let g_sum = column_sums(&grads);
                let yp_sum = column_sums(&yp);
                let ybar = &yp_sum / n as f64;
                let spread = &yp - &e.v * ybar.transpose();
                let xbar = xbar.as_ref().expect("recorded");
                let dist: f64 = xbar.iter().zip(&x_star).map(|(a, b)| (a - b) * (a - b)).sum();
                diagnostics.push(DiagnosticRow {
                    k,
                    tracker_gap: (y - &yp).norm(),
                    tracker_sum_residual: (yp_sum - &g_sum).norm(),
                    composite_v: spread.norm_squared() + consensus_error(&state.x, &e.u) + dist,
                    grad_norm: grads.norm(),
                });
            }
            y_prime = Some(yp);
            g_prev = Some(grads.clone());
        }

        if let Some((opt_gap, consensus, tracking, gamma_phi_sum)) = pre {
            let ds = column_sums(&state.y());
            let residual = (ds - gamma_phi_sum - column_sums(&grads)).norm();
            rows.push(TrajectoryRow {
                k,
                opt_gap,
                consensus,
                tracking,
                conservation_residual: residual,
            });
        }

        fill_noise(&cfg.pull, cfg.seed, k, &mut xi);
        step_x(
            &mut state,
            &topo,
            cfg.schedules.beta.eval(k),
            cfg.schedules.alpha.eval(k),
            &xi,
        )?;
        fill_noise(&cfg.push, cfg.seed, k + 1, &mut zeta);
        step_z(&mut state, &topo, cfg.schedules.eta.eval(k), &zeta)?;
    }
    state.k = cfg.iterations + 1;
    Ok(Trajectory {
        rows,
        diagnostics,
        final_state: state,
    })
}

/// R-Push-Pull: VRA-GT with `eta_k = 1`, `beta_k = beta`, `alpha_k = alpha`.
/// The schedules in `cfg` are replaced.
pub fn run_r_push_pull(
    problem: &dyn Objective,
    w: &WeightPair,
    e: &EigenPair,
    gamma: f64,
    beta: f64,
    alpha: f64,
    cfg: &RunConfig,
) -> Result<Trajectory> {
    let cfg = RunConfig {
        schedules: ScheduleSet::r_push_pull(gamma, beta, alpha)?,
        ..cfg.clone()
    };
    run(problem, w, e, &cfg)
}

/// Drives the aggregation recursion alone with an exogenous Gaussian random
/// walk `s_{k+1} = s_k + walk_sd * N(0, I)`, starting from `s_1 = z_1 = 0`.
/// Returns `||z_k - C s_k||^2` for `k = 1..=iterations`.
pub fn vra_probe(
    w: &WeightPair,
    eta: &PowerLawSchedule,
    push: &NoiseModel,
    walk_sd: f64,
    iterations: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let topo = Topology::new(w, 1.0);
    let (n, d) = (w.n(), push.dim);
    let mut s = DMatrix::zeros(n, d);
    let mut z = DMatrix::zeros(n, d);
    let mut zeta = DMatrix::zeros(n, d);
    let mut out = Vec::with_capacity(iterations as usize);
    for k in 1..=iterations {
        out.push((&z - topo.push_mix(&s)).norm_squared());
        let mut s_next = s.clone();
        for i in 0..n {
            let mut rng = keyed(seed, StreamTag::Exogenous, i as u64, k);
            for c in 0..d {
                s_next[(i, c)] += walk_sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        fill_noise(push, seed, k + 1, &mut zeta);
        z = vra_update(&topo, &z, &s_next, &s, eta.eval(k), &zeta)?;
        s = s_next;
    }
    Ok(out)
}
