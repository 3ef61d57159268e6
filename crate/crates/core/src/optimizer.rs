//! Sequential optimization loop.
//!
//! Steps `1..=n_init` sample uniformly; later steps take the TPE proposal. In
//! conventional mode every trial is scored by its raw `f`. In adaptive mode the
//! score is `f - lambda_t * var`, with the variance taken over the trailing
//! window of clipped-importance-weighted observations.

use std::iter;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kde::DEFAULT_FLOOR_WEIGHT;
use crate::objective::{
    build_g_model, lagrangian_score, lambda_schedule, population_variance, windowed_variance,
    ScheduleState, DEFAULT_EPSILON, DEFAULT_WINDOW,
};
use crate::space::{Config, ParamSpace};
use crate::tpe::{propose_next, History, TrialFlags, TrialRecord, DEFAULT_K, DEFAULT_N_CANDIDATES};

pub const DEFAULT_N_INIT: usize = 20;
pub const DEFAULT_BUDGET: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Maximize `f` alone.
    Conventional,
    /// Maximize the variance-penalized score.
    Adaptive,
}

/// Penalty schedule of adaptive mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Cosine,
    /// `lambda_t = 0` at every step; the variance is still computed.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub budget: usize,
    pub mode: Mode,
    pub k: f64,
    pub epsilon: f64,
    pub window: usize,
    pub n_init: usize,
    pub n_candidates: usize,
    pub floor_weight: f64,
    pub schedule: Schedule,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            mode: Mode::Adaptive,
            k: DEFAULT_K,
            epsilon: DEFAULT_EPSILON,
            window: DEFAULT_WINDOW,
            n_init: DEFAULT_N_INIT,
            n_candidates: DEFAULT_N_CANDIDATES,
            floor_weight: DEFAULT_FLOOR_WEIGHT,
            schedule: Schedule::Cosine,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_init < 2 || self.n_init >= self.budget {
            return fail(format!(
                "need 2 <= n_init < budget, got n_init={} budget={}",
                self.n_init, self.budget
            ));
        }
        if !(self.k > 0.0 && self.k < 1.0) {
            return fail(format!("k must lie in (0, 1), got {}", self.k));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return fail(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if self.window < 2 {
            return fail(format!("window must be >= 2, got {}", self.window));
        }
        if self.n_candidates == 0 {
            return fail("n_candidates must be >= 1".into());
        }
        if !(self.floor_weight > 0.0 && self.floor_weight <= 1.0) {
            return fail(format!(
                "floor_weight must lie in (0, 1], got {}",
                self.floor_weight
            ));
        }
        Ok(())
    }

    fn lambda(&self, t: usize) -> Result<f64> {
        match (self.mode, self.schedule) {
            (Mode::Conventional, _) | (Mode::Adaptive, Schedule::Zero) => Ok(0.0),
            (Mode::Adaptive, Schedule::Cosine) => lambda_schedule(t, self.budget),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub f: f64,
    pub degenerate: bool,
}

/// The function under optimization. Only its value is observed.
pub trait Blackbox {
    fn evaluate(&mut self, config: &Config) -> Result<Evaluation>;
}

impl<F> Blackbox for F
where
    F: FnMut(&Config) -> Result<f64>,
{
    fn evaluate(&mut self, config: &Config) -> Result<Evaluation> {
        self(config).map(|f| Evaluation {
            f,
            degenerate: false,
        })
    }
}

/// Runs exactly `opt.budget` trials and returns the full history.
pub fn run<B: Blackbox + ?Sized>(
    opt: &OptimizerConfig,
    space: &ParamSpace,
    blackbox: &mut B,
) -> Result<History> {
    opt.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let log_uniform = space.log_uniform_density();
    let mut history = History::new();

    for t in 1..=opt.budget {
        let (config, log_q) = if t <= opt.n_init {
            (space.sample_uniform(&mut rng), log_uniform)
        } else {
            let p = propose_next(
                &history,
                space,
                opt.k,
                opt.n_candidates,
                opt.floor_weight,
                &mut rng,
            )?;
            (p.config, p.log_density)
        };

        let (f_value, flags) = match blackbox.evaluate(&config) {
            Ok(e) if e.f.is_finite() => (
                e.f,
                TrialFlags {
                    failed: false,
                    degenerate: e.degenerate,
                },
            ),
            // failures and non-finite scores consume budget as zero observations
            _ => (
                0.0,
                TrialFlags {
                    failed: true,
                    degenerate: false,
                },
            ),
        };

        let lambda = opt.lambda(t)?;
        let mut record = TrialRecord {
            step: t,
            config,
            f_value,
            j_score: f_value,
            log_proposal_density: log_q,
            lambda_used: lambda,
            flags,
        };
        if opt.mode == Mode::Adaptive && !history.is_empty() {
            let g = build_g_model(history.iter().chain(iter::once(&record)), opt.k, space)?;
            let state = ScheduleState::new(opt.budget, t, opt.epsilon, opt.window)?;
            let stats = windowed_variance(&history, &g, &state, &record)?;
            record.j_score = lagrangian_score(f_value, stats.variance, lambda);
        }
        history.push(record)?;
    }
    Ok(history)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub f: f64,
    pub j_score: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub max_f: f64,
    pub mean_f: f64,
    /// Population variance of every observed `f`.
    pub variance_f: f64,
    pub best_config: Config,
    pub best_step: usize,
    pub trajectory: Vec<TrajectoryPoint>,
}

pub fn summarize(history: &History) -> Result<RunSummary> {
    let best = history
        .iter()
        .reduce(|best, t| if t.f_value > best.f_value { t } else { best })
        .ok_or(Error::InsufficientHistory { needed: 1, got: 0 })?;
    let fs: Vec<f64> = history.iter().map(|t| t.f_value).collect();
    Ok(RunSummary {
        max_f: best.f_value,
        mean_f: fs.iter().sum::<f64>() / fs.len() as f64,
        variance_f: population_variance(&fs),
        best_config: best.config.clone(),
        best_step: best.step,
        trajectory: history
            .iter()
            .map(|t| TrajectoryPoint {
                step: t.step,
                f: t.f_value,
                j_score: t.j_score,
                lambda: t.lambda_used,
            })
            .collect(),
    })
}

/// Running maximum of `f` after each step.
pub fn best_so_far(history: &History) -> Vec<f64> {
    history
        .iter()
        .scan(f64::NEG_INFINITY, |best, t| {
            *best = best.max(t.f_value);
            Some(*best)
        })
        .collect()
}
