//! Synthetic black-box portfolio models.
//!
//! [`evaluate`] is the whole black box: scenario generation, strategy backtest
//! and annualized Sharpe ratio, deterministic in its inputs.

pub mod market;
pub mod metrics;
pub mod strategy;

pub use market::{generate_scenario, PriceSeries, Regime, ScenarioKind, ScenarioSpec};
pub use metrics::{sharpe_annualized, SharpeRatio};
pub use strategy::{run_strategy, StrategyKind, StrategySpec};

use crate::error::Result;
use crate::optimizer::{Blackbox, Evaluation};
use crate::space::{Config, ParamSpace};

pub fn evaluate(
    strategy: &StrategySpec,
    scenario: &ScenarioSpec,
    params: &Config,
) -> Result<SharpeRatio> {
    let prices = generate_scenario(scenario)?;
    let returns = run_strategy(strategy, params, &prices)?;
    sharpe_annualized(&returns)
}

/// [`evaluate`] with the scenario's price paths generated once up front.
#[derive(Debug, Clone)]
pub struct PortfolioBlackbox {
    strategy: StrategySpec,
    space: ParamSpace,
    prices: PriceSeries,
}

impl PortfolioBlackbox {
    pub fn new(strategy: StrategySpec, scenario: &ScenarioSpec) -> Result<Self> {
        let prices = generate_scenario(scenario)?;
        let space = strategy.param_space();
        Ok(Self {
            strategy,
            space,
            prices,
        })
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn prices(&self) -> &PriceSeries {
        &self.prices
    }

    pub fn sharpe(&self, params: &Config) -> Result<SharpeRatio> {
        let returns = run_strategy(&self.strategy, params, &self.prices)?;
        sharpe_annualized(&returns)
    }
}

impl Blackbox for PortfolioBlackbox {
    fn evaluate(&mut self, config: &Config) -> Result<Evaluation> {
        let s = self.sharpe(config)?;
        Ok(Evaluation {
            f: s.value,
            degenerate: s.degenerate,
        })
    }
}
