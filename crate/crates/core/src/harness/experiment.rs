//! Builds networks and problems from a config, validates them, and runs seeds
//! in parallel.

use super::config::{Algorithm, ExperimentConfig, GraphSpec, ProblemSpec};
use super::output::{aggregate, aggregate_csv, diagnostics_csv, trajectory_csv, AggregateRow};
use crate::algorithm::{run, InitialPoint, RunConfig, Trajectory};
use crate::graph::{
    build_weights, check_assumption2, contraction_check, perron_vectors, ring_plus_random, Digraph, EigenPair,
    WeightPair, EIGEN_MAX_ITER, EIGEN_TOL,
};
use crate::noise::{validate_assumption3, Channel, NoiseModel};
use crate::problems::{generate_ridge, RidgeInstance, RidgeProblem};
use crate::report::ValidationReport;
use crate::rng::derive_seed;
use crate::schedules::{validate_theorem2, validate_theorem3, ScheduleSet};
use crate::{Error, Result};
use rayon::prelude::*;
use serde_json::json;
use std::path::Path;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub graph: Digraph,
    pub weights: WeightPair,
    eigen: std::result::Result<EigenPair, String>,
    pub problem: RidgeProblem,
    pub pull: NoiseModel,
    pub push: NoiseModel,
}

impl Experiment {
    pub fn build(config: ExperimentConfig) -> Result<Self> {
        config.check()?;
        let graph = match &config.graph {
            GraphSpec::File { file } => Digraph::read(file)?,
            GraphSpec::RingPlusRandom { n, p, seed } => ring_plus_random(*n, *p, *seed)?,
        };
        let instance = match &config.problem {
            ProblemSpec::File { file } => RidgeInstance::read(file)?,
            ProblemSpec::Ridge { d1, d, r, bounds, seed } => generate_ridge(graph.n(), *d1, *d, *r, *bounds, *seed)?,
        };
        if instance.n() != graph.n() {
            return Err(Error::InvalidConfiguration(format!(
                "problem has {} agents, graph has {}",
                instance.n(),
                graph.n()
            )));
        }
        let problem = RidgeProblem::new(instance)?;
        let d = problem.instance.dim();
        let nz = config.noise;
        let pull = NoiseModel::gaussian(Channel::Pull, nz.sigma2_pull, nz.growth_pull, d)?;
        let push = NoiseModel::gaussian(Channel::Push, nz.sigma2_push, nz.growth_push, d)?;
        let weights = build_weights(&graph);
        let eigen = perron_vectors(&weights, EIGEN_TOL, EIGEN_MAX_ITER).map_err(|e| e.to_string());
        Ok(Self {
            config,
            graph,
            weights,
            eigen,
            problem,
            pull,
            push,
        })
    }

    pub fn eigen(&self) -> Result<&EigenPair> {
        self.eigen.as_ref().map_err(|msg| Error::NumericalFailure {
            what: msg.clone(),
            residual: f64::NAN,
        })
    }

    /// Schedules actually used by the selected algorithm.
    pub fn schedules(&self) -> Result<ScheduleSet> {
        match self.config.algorithm {
            Algorithm::VraGt => Ok(self.config.sched),
            Algorithm::RPushPull => {
                let r = self.config.r_push_pull;
                ScheduleSet::r_push_pull(r.gamma, r.beta, r.alpha)
            }
        }
    }

    /// Every validator that applies to this configuration.
    pub fn validate(&self) -> Result<Vec<ValidationReport>> {
        let mut reports = vec![
            check_assumption2(&self.graph, &self.graph)?.to_report(),
            self.weights.stochasticity_report(),
        ];
        let sched = self.schedules()?;
        let mut spectral = ValidationReport::new("Perron vectors and contraction");
        match &self.eigen {
            Ok(e) => {
                spectral.push(
                    "Perron vectors converged",
                    true,
                    format!(
                        "residuals {:.2e}, {:.2e} after {} sweeps",
                        e.residual_u, e.residual_v, e.iterations
                    ),
                );
                spectral.push("u^T v > 0", e.uv() > 0.0, format!("u^T v = {:.6}", e.uv()));
                let radii = contraction_check(&self.weights, sched.gamma, e);
                spectral.push(
                    "rho(C_gamma - v 1^T/n) < 1",
                    radii.push_contractive(),
                    format!("{:.12}", radii.push),
                );
                spectral.push(
                    "rho(R - 1 u^T/n) < 1",
                    radii.pull_contractive(),
                    format!("{:.12}", radii.pull),
                );
            }
            Err(msg) => spectral.push("Perron vectors converged", false, msg.clone()),
        }
        reports.push(spectral);
        if self.config.algorithm == Algorithm::VraGt {
            reports.push(validate_theorem2(&sched)?);
            let (mut rate, predicted) = validate_theorem3(&sched)?;
            if let Some(p) = predicted {
                rate.title = format!("{} (predicted rate k^-{p:.4})", rate.title);
            }
            reports.push(rate);
            reports.push(validate_assumption3(&self.pull, &self.push, &sched)?);
        }
        Ok(reports)
    }

    pub fn run_config(&self, seed_value: u64) -> Result<RunConfig> {
        Ok(RunConfig {
            schedules: self.schedules()?,
            pull: self.pull,
            push: self.push,
            iterations: self.config.iterations,
            record_every: self.config.record_every,
            seed: derive_seed(self.config.seed, seed_value),
            diagnostics: self.config.diagnostics,
            init: InitialPoint::Uniform,
        })
    }

    pub fn run_seed(&self, seed_value: u64) -> Result<Trajectory> {
        run(
            &self.problem,
            &self.weights,
            self.eigen()?,
            &self.run_config(seed_value)?,
        )
    }

    /// All configured seeds, in seed order. Results do not depend on the
    /// size of the current rayon pool.
    pub fn run_all(&self) -> Result<Vec<(u64, Trajectory)>> {
        self.config
            .seeds
            .values()
            .into_par_iter()
            .map(|s| self.run_seed(s).map(|t| (s, t)))
            .collect()
    }
}

pub fn aggregate_runs(runs: &[(u64, Trajectory)]) -> Result<Vec<AggregateRow>> {
    let views: Vec<&[_]> = runs.iter().map(|(_, t)| t.rows.as_slice()).collect();
    aggregate(&views)
}

/// Writes `seed_<s>.csv` per run, `aggregate.csv`, optional diagnostics and
/// `meta.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    exp: &Experiment,
    runs: &[(u64, Trajectory)],
    reports: &[ValidationReport],
    warnings: &[String],
    wall: Duration,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (s, t) in runs {
        std::fs::write(dir.join(format!("seed_{s}.csv")), trajectory_csv(&t.rows))?;
        if !t.diagnostics.is_empty() {
            std::fs::write(
                dir.join(format!("seed_{s}_diagnostics.csv")),
                diagnostics_csv(&t.diagnostics),
            )?;
        }
    }
    std::fs::write(dir.join("aggregate.csv"), aggregate_csv(&aggregate_runs(runs)?))?;
    let meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": exp.config.to_value(),
        "effective_schedules": exp.schedules()?,
        "eta_default_note": "eta_k is not part of the benchmark parameter list; the default mirrors beta_k",
        "x_star": exp.problem.x_star.as_slice(),
        "lipschitz": exp.problem.lipschitz,
        "strong_convexity": exp.problem.strong_convexity,
        "seeds": runs.iter().map(|(s, _)| *s).collect::<Vec<_>>(),
        "validation": reports,
        "forced": !warnings.is_empty(),
        "warnings": warnings,
        "wall_time_secs": wall.as_secs_f64(),
    });
    std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}
