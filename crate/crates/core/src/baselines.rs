//! Comparison methods with the same loop contract as [`optimizer::run`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::optimizer::{self, Blackbox, Mode, OptimizerConfig};
use crate::space::ParamSpace;
use crate::tpe::{History, TrialFlags, TrialRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    RandomSearch,
    /// TPE scored by raw `f` only.
    TpeConventional,
}

pub fn run_baseline<B: Blackbox + ?Sized>(
    kind: BaselineKind,
    opt: &OptimizerConfig,
    space: &ParamSpace,
    blackbox: &mut B,
) -> Result<History> {
    match kind {
        BaselineKind::TpeConventional => {
            let conventional = OptimizerConfig {
                mode: Mode::Conventional,
                ..opt.clone()
            };
            optimizer::run(&conventional, space, blackbox)
        }
        BaselineKind::RandomSearch => random_search(opt, space, blackbox),
    }
}

fn random_search<B: Blackbox + ?Sized>(
    opt: &OptimizerConfig,
    space: &ParamSpace,
    blackbox: &mut B,
) -> Result<History> {
    opt.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let log_uniform = space.log_uniform_density();
    let mut history = History::new();
    for step in 1..=opt.budget {
        let config = space.sample_uniform(&mut rng);
        let (f_value, flags) = match blackbox.evaluate(&config) {
            Ok(e) if e.f.is_finite() => (
                e.f,
                TrialFlags {
                    failed: false,
                    degenerate: e.degenerate,
                },
            ),
            _ => (
                0.0,
                TrialFlags {
                    failed: true,
                    degenerate: false,
                },
            ),
        };
        history.push(TrialRecord {
            step,
            config,
            f_value,
            j_score: f_value,
            log_proposal_density: log_uniform,
            lambda_used: 0.0,
            flags,
        })?;
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{best_so_far, summarize};
    use crate::space::{Config, ParamDomain};

    fn square() -> ParamSpace {
        ParamSpace::new(vec![
            ParamDomain::continuous("x1", 0.0, 1.0),
            ParamDomain::continuous("x2", 0.0, 1.0),
        ])
        .unwrap()
    }

    fn quadratic(c: &Config) -> Result<f64> {
        Ok(-(c[0].as_f64() - 0.3).powi(2) - (c[1].as_f64() - 0.7).powi(2))
    }

    fn opt(budget: usize, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            budget,
            seed,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn random_search_is_uniform_and_unpenalized() {
        let space = square();
        let h = run_baseline(
            BaselineKind::RandomSearch,
            &opt(50, 3),
            &space,
            &mut quadratic,
        )
        .unwrap();
        assert_eq!(h.len(), 50);
        assert!(h.iter().all(|t| t.lambda_used == 0.0
            && t.j_score == t.f_value
            && t.log_proposal_density == space.log_uniform_density()));
        let best = best_so_far(&h);
        assert!(best.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn tpe_conventional_delegates() {
        let space = square();
        let cfg = opt(40, 8);
        let a = run_baseline(BaselineKind::TpeConventional, &cfg, &space, &mut quadratic).unwrap();
        let b = optimizer::run(
            &OptimizerConfig {
                mode: Mode::Conventional,
                ..cfg
            },
            &space,
            &mut quadratic,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tpe_beats_random_on_median() {
        let space = square();
        let median = |kind| {
            let mut best: Vec<f64> = (0..5)
                .map(|seed| {
                    let h = run_baseline(kind, &opt(200, seed), &space, &mut quadratic).unwrap();
                    summarize(&h).unwrap().max_f
                })
                .collect();
            best.sort_by(f64::total_cmp);
            best[2]
        };
        assert!(median(BaselineKind::TpeConventional) >= median(BaselineKind::RandomSearch));
    }
}
