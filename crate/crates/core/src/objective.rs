//! Variance-penalized objective score.
//!
//! Each trial is scored as `J = f - lambda_t * var_W`, where `lambda_t` ramps from
//! 0 to 1 along a half-cosine over the budget and `var_W` is the population
//! variance of clipped-importance-weighted `f` values over the trailing window
//! that ends at the trial. The weight of trial `i` is
//! `clip(g(x_i) / q(x_i), 1 - eps, 1 + eps)` with `q` the density the trial was
//! drawn from and `g` a Parzen model of the best configurations seen so far.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kde::{KdeModel, DEFAULT_FLOOR_WEIGHT};
use crate::space::ParamSpace;
use crate::tpe::{rank_desc, top_count, History, TrialRecord};

pub const DEFAULT_EPSILON: f64 = 0.2;
pub const DEFAULT_WINDOW: usize = 20;

/// Budget, current step, clip radius and variance window of a scoring call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleState {
    pub budget: usize,
    pub step: usize,
    pub epsilon: f64,
    pub window: usize,
}

impl ScheduleState {
    pub fn new(budget: usize, step: usize, epsilon: f64, window: usize) -> Result<Self> {
        if budget == 0 || step == 0 {
            return Err(Error::InvalidArgument(
                "budget and step must be positive".into(),
            ));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        if window < 2 {
            return Err(Error::InvalidArgument(format!(
                "window must be >= 2, got {window}"
            )));
        }
        Ok(Self {
            budget,
            step,
            epsilon,
            window,
        })
    }

    pub fn lambda(&self) -> f64 {
        cosine_ramp(self.step, self.budget)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
    /// `w_i * f_i` over the window, oldest first.
    pub weighted_values: Vec<f64>,
    pub variance: f64,
}

/// `(1 - cos(min(t pi / eta, pi))) / 2`.
pub fn lambda_schedule(t: usize, eta: usize) -> Result<f64> {
    if t == 0 || eta == 0 {
        return Err(Error::InvalidArgument(format!(
            "schedule needs t >= 1 and eta >= 1, got t={t}, eta={eta}"
        )));
    }
    Ok(cosine_ramp(t, eta))
}

fn cosine_ramp(t: usize, eta: usize) -> f64 {
    if t >= eta {
        // cos(pi) is exactly -1 in f64, but skip the division for t > eta anyway
        return 1.0;
    }
    let angle = (t as f64 * PI / eta as f64).min(PI);
    (1.0 - angle.cos()) / 2.0
}

/// `clip(g / q, 1 - eps, 1 + eps)`.
pub fn importance_weight(g_density: f64, q_density: f64, epsilon: f64) -> Result<f64> {
    if !(g_density > 0.0 && q_density > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "densities must be positive, got g={g_density}, q={q_density}"
        )));
    }
    check_epsilon(epsilon)?;
    Ok(clip(g_density / q_density, epsilon))
}

/// [`importance_weight`] from log densities, for densities outside `f64` range.
pub fn importance_weight_log(log_g: f64, log_q: f64, epsilon: f64) -> Result<f64> {
    if log_g.is_nan() || log_q.is_nan() || log_g == f64::NEG_INFINITY || log_q == f64::NEG_INFINITY
    {
        return Err(Error::InvalidArgument(format!(
            "densities must be positive, got ln g={log_g}, ln q={log_q}"
        )));
    }
    check_epsilon(epsilon)?;
    Ok(clip((log_g - log_q).exp(), epsilon))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "epsilon must be >= 0, got {epsilon}"
        )))
    }
}

fn clip(ratio: f64, epsilon: f64) -> f64 {
    ratio.clamp(1.0 - epsilon, 1.0 + epsilon)
}

/// Population variance; zero for fewer than two values.
pub fn population_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Variance of clipped-weighted `f` over the last `W - 1` trials of `history`
/// followed by `current`.
pub fn windowed_variance(
    history: &History,
    g_model: &KdeModel,
    state: &ScheduleState,
    current: &TrialRecord,
) -> Result<WindowStats> {
    let keep = state.window.saturating_sub(1).min(history.len());
    let trials = &history.trials()[history.len() - keep..];
    let weighted_values = trials
        .iter()
        .chain(std::iter::once(current))
        .map(|t| {
            let log_g = g_model.log_density(&t.config)?;
            let w = importance_weight_log(log_g, t.log_proposal_density, state.epsilon)?;
            Ok(w * t.f_value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let variance = population_variance(&weighted_values);
    Ok(WindowStats {
        weighted_values,
        variance,
    })
}

/// `J = f - lambda * variance`.
pub fn lagrangian_score(f_value: f64, variance: f64, lambda_t: f64) -> f64 {
    f_value - lambda_t * variance
}

/// Parzen model of the top `max(2, ceil(k n))` trials ranked by raw `f`.
pub fn build_g_model<'a, I>(trials: I, k: f64, space: &ParamSpace) -> Result<KdeModel>
where
    I: IntoIterator<Item = &'a TrialRecord>,
{
    let trials: Vec<&TrialRecord> = trials.into_iter().collect();
    if trials.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            got: trials.len(),
        });
    }
    let order = rank_desc(&trials, |t| t.f_value);
    let top = top_count(trials.len(), k);
    KdeModel::fit(
        order[..top].iter().map(|&i| &trials[i].config),
        space,
        DEFAULT_FLOOR_WEIGHT,
    )
}
