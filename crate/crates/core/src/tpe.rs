//! Tree-structured Parzen Estimator surrogate.
//!
//! The history is split at the `k`-quantile of objective scores into a good and a
//! bad group, each modeled by a [`KdeModel`]. Candidates are drawn from the good
//! model and ranked by the density ratio `good(x) / bad(x)`.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kde::KdeModel;
use crate::space::{Config, ParamSpace};

pub const DEFAULT_K: f64 = 0.15;
pub const DEFAULT_N_CANDIDATES: usize = 64;

/// Smallest good group; a single-point KDE would be degenerate.
pub const MIN_GOOD: usize = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialFlags {
    /// The black box failed and `f_value` holds the zero sentinel.
    pub failed: bool,
    /// The black box reported a degenerate (zero-volatility) score.
    pub degenerate: bool,
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub step: usize,
    pub config: Config,
    pub f_value: f64,
    pub j_score: f64,
    /// ln of the density the config was drawn from, recorded at proposal time.
    pub log_proposal_density: f64,
    pub lambda_used: f64,
    pub flags: TrialFlags,
}

impl TrialRecord {
    pub fn proposal_density(&self) -> f64 {
        self.log_proposal_density.exp()
    }
}

/// Append-only, step-ordered trial history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    trials: Vec<TrialRecord>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a trial; its step must be exactly one past the last.
    pub fn push(&mut self, trial: TrialRecord) -> Result<()> {
        let expected = self.trials.len() + 1;
        if trial.step != expected {
            return Err(Error::InvalidArgument(format!(
                "trial step {} does not follow {}",
                trial.step,
                expected - 1
            )));
        }
        if !(trial.log_proposal_density.is_finite()) {
            return Err(Error::InvalidArgument(
                "proposal density must be positive and finite".into(),
            ));
        }
        self.trials.push(trial);
        Ok(())
    }

    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TrialRecord> {
        self.trials.iter()
    }

    pub fn last(&self) -> Option<&TrialRecord> {
        self.trials.last()
    }
}

impl<'a> IntoIterator for &'a History {
    type Item = &'a TrialRecord;
    type IntoIter = std::slice::Iter<'a, TrialRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.trials.iter()
    }
}

/// Number of members in the top group for `n` observations: `max(2, ceil(k n))`.
pub fn top_count(n: usize, k: f64) -> usize {
    ((k * n as f64).ceil() as usize).max(MIN_GOOD).min(n)
}

/// Indices of `trials` ordered best-first by `key`, ties broken by lower step.
pub(crate) fn rank_desc<T, F>(trials: &[&T], key: F) -> Vec<usize>
where
    F: Fn(&T) -> f64,
{
    let mut order: Vec<usize> = (0..trials.len()).collect();
    // stable sort keeps input (step) order among equal keys
    order.sort_by(|&a, &b| {
        key(trials[b])
            .partial_cmp(&key(trials[a]))
            .unwrap_or(Ordering::Equal)
    });
    order
}

fn check_k(k: f64) -> Result<()> {
    if k > 0.0 && k < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "k must lie in (0, 1), got {k}"
        )))
    }
}

/// Splits the history into the top `max(2, ceil(k n))` trials by `j_score` and the rest.
pub fn split_history(history: &History, k: f64) -> Result<(Vec<&TrialRecord>, Vec<&TrialRecord>)> {
    check_k(k)?;
    let n = history.len();
    if n < MIN_GOOD {
        return Err(Error::InsufficientHistory {
            needed: MIN_GOOD,
            got: n,
        });
    }
    let trials: Vec<&TrialRecord> = history.iter().collect();
    let order = rank_desc(&trials, |t| t.j_score);
    let n_good = top_count(n, k);
    let mut good: Vec<&TrialRecord> = order[..n_good].iter().map(|&i| trials[i]).collect();
    let mut bad: Vec<&TrialRecord> = order[n_good..].iter().map(|&i| trials[i]).collect();
    good.sort_by_key(|t| t.step);
    bad.sort_by_key(|t| t.step);
    Ok((good, bad))
}

/// `alpha(x) = good(x) / bad(x)`.
pub fn acquisition(good: &KdeModel, bad: &KdeModel, config: &Config) -> Result<f64> {
    log_acquisition(good, bad, config).map(f64::exp)
}

/// `ln good(x) - ln bad(x)`; same argmax as [`acquisition`] without overflow.
pub fn log_acquisition(good: &KdeModel, bad: &KdeModel, config: &Config) -> Result<f64> {
    if good.space() != bad.space() {
        return Err(Error::SpaceMismatch);
    }
    Ok(good.log_density(config)? - bad.log_density(config)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub config: Config,
    /// ln of the good-model density at `config`.
    pub log_density: f64,
}

impl Proposal {
    pub fn density(&self) -> f64 {
        self.log_density.exp()
    }
}

/// Draws `n_candidates` configs from the good model and returns the one maximizing
/// the acquisition, together with its density under the good model.
pub fn propose_next<R: Rng + ?Sized>(
    history: &History,
    space: &ParamSpace,
    k: f64,
    n_candidates: usize,
    floor_weight: f64,
    rng: &mut R,
) -> Result<Proposal> {
    if n_candidates == 0 {
        return Err(Error::InvalidArgument("n_candidates must be >= 1".into()));
    }
    let (good, bad) = split_history(history, k)?;
    let good_model = KdeModel::fit(good.iter().map(|t| &t.config), space, floor_weight)?;
    // With only two observations both land in the good group; the uniform
    // density stands in for the empty bad group.
    let bad_model = if bad.is_empty() {
        None
    } else {
        Some(KdeModel::fit(
            bad.iter().map(|t| &t.config),
            space,
            floor_weight,
        )?)
    };
    let uniform = space.log_uniform_density();

    let mut best: Option<(f64, Proposal)> = None;
    for _ in 0..n_candidates {
        let config = good_model.sample(rng);
        let log_good = good_model.log_density_unchecked(&config);
        let log_bad = bad_model
            .as_ref()
            .map_or(uniform, |m| m.log_density_unchecked(&config));
        let score = log_good - log_bad;
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((
                score,
                Proposal {
                    config,
                    log_density: log_good,
                },
            ));
        }
    }
    Ok(best.expect("n_candidates >= 1").1)
}
