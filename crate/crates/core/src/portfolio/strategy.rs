//! Rule-based trading strategies used as black boxes.
//!
//! Assets are split round-robin into parameter groups; every group carries its
//! own copy of the strategy parameters, and one global categorical picks
//! long-only or long/short trading. Positions for day `t` are computed from
//! closes up to day `t - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::portfolio::market::PriceSeries;
use crate::space::{Config, ParamDomain, ParamSpace, Value};

pub const DEFAULT_GROUPS: usize = 5;
/// 5 basis points per unit of turnover.
pub const DEFAULT_COST: f64 = 0.0005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Fast/slow moving-average crossover.
    TrendFollowing,
    /// Fades the z-score of price against its rolling mean.
    MeanReversion,
    /// Trades only when momentum and an RSI guard agree.
    ThresholdHybrid,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::TrendFollowing,
        StrategyKind::MeanReversion,
        StrategyKind::ThresholdHybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::TrendFollowing => "trend_following",
            StrategyKind::MeanReversion => "mean_reversion",
            StrategyKind::ThresholdHybrid => "threshold_hybrid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn group_domains(self) -> Vec<ParamDomain> {
        match self {
            StrategyKind::TrendFollowing => vec![
                ParamDomain::integer("fast_window", 1, 30),
                ParamDomain::integer("slow_window", 2, 120),
                ParamDomain::continuous("band", 0.0, 0.05),
                ParamDomain::continuous("size", 0.0, 1.0),
                ParamDomain::continuous("stop_loss", 0.02, 0.30),
            ],
            StrategyKind::MeanReversion => vec![
                ParamDomain::integer("lookback", 5, 120),
                ParamDomain::continuous("z_scale", 0.5, 3.0),
                ParamDomain::continuous("deadband", 0.0, 1.5),
                ParamDomain::continuous("size", 0.0, 1.0),
                ParamDomain::continuous("stop_loss", 0.02, 0.30),
            ],
            StrategyKind::ThresholdHybrid => vec![
                ParamDomain::integer("momentum_window", 2, 60),
                ParamDomain::continuous("momentum_threshold", 0.0, 0.15),
                ParamDomain::integer("rsi_window", 2, 30),
                ParamDomain::continuous("rsi_level", 50.0, 95.0),
                ParamDomain::continuous("size", 0.0, 1.0),
                ParamDomain::continuous("stop_loss", 0.02, 0.30),
            ],
        }
    }
}

/// A strategy family together with its parameter layout and trading cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub n_groups: usize,
    /// Cost per unit change of position weight.
    pub transaction_cost: f64,
}

impl StrategySpec {
    pub fn preset(kind: StrategyKind) -> Self {
        Self {
            kind,
            n_groups: DEFAULT_GROUPS,
            transaction_cost: DEFAULT_COST,
        }
    }

    pub fn params_per_group(&self) -> usize {
        self.kind.group_domains().len()
    }

    /// `n_groups * params_per_group` group parameters followed by `direction`.
    pub fn param_space(&self) -> ParamSpace {
        let mut domains = Vec::new();
        for g in 0..self.n_groups {
            for d in self.kind.group_domains() {
                domains.push(ParamDomain {
                    name: format!("g{g}.{}", d.name),
                    kind: d.kind,
                });
            }
        }
        domains.push(ParamDomain::categorical(
            "direction",
            ["long_only", "long_short"],
        ));
        ParamSpace::new(domains).expect("strategy schema is valid")
    }
}

struct Prefix {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Prefix {
    fn new(xs: &[f64]) -> Self {
        let mut sum = vec![0.0; xs.len() + 1];
        let mut sum_sq = vec![0.0; xs.len() + 1];
        for (i, x) in xs.iter().enumerate() {
            sum[i + 1] = sum[i] + x;
            sum_sq[i + 1] = sum_sq[i] + x * x;
        }
        Self { sum, sum_sq }
    }

    /// Mean of `xs[end - len..end]`.
    fn mean(&self, end: usize, len: usize) -> f64 {
        (self.sum[end] - self.sum[end - len]) / len as f64
    }

    fn std(&self, end: usize, len: usize) -> f64 {
        let mean = self.mean(end, len);
        let sq = (self.sum_sq[end] - self.sum_sq[end - len]) / len as f64;
        (sq - mean * mean).max(0.0).sqrt()
    }
}

/// Per-asset signal generator: given the number of closes visible, a raw target in `[-1, 1]`.
enum Signal {
    Trend {
        fast: usize,
        slow: usize,
        band: f64,
        prefix: Prefix,
    },
    Reversion {
        lookback: usize,
        z_scale: f64,
        deadband: f64,
        prefix: Prefix,
    },
    Hybrid {
        momentum_window: usize,
        momentum_threshold: f64,
        rsi_window: usize,
        rsi_level: f64,
        gains: Vec<f64>,
        losses: Vec<f64>,
    },
}

impl Signal {
    /// `seen` closes (days `0..seen`) are available.
    fn target(&self, prices: &[f64], seen: usize) -> f64 {
        let last = prices[seen - 1];
        match self {
            Signal::Trend {
                fast,
                slow,
                band,
                prefix,
            } => {
                if seen < (*fast).max(*slow) {
                    return 0.0;
                }
                let fast_ma = prefix.mean(seen, *fast);
                let slow_ma = prefix.mean(seen, *slow);
                if fast_ma > slow_ma * (1.0 + band) {
                    1.0
                } else if fast_ma < slow_ma * (1.0 - band) {
                    -1.0
                } else {
                    0.0
                }
            }
            Signal::Reversion {
                lookback,
                z_scale,
                deadband,
                prefix,
            } => {
                if seen < *lookback {
                    return 0.0;
                }
                let std = prefix.std(seen, *lookback);
                if std <= 1e-12 * last {
                    return 0.0;
                }
                let z = (last - prefix.mean(seen, *lookback)) / std;
                if z.abs() < *deadband {
                    0.0
                } else {
                    (-z / z_scale).clamp(-1.0, 1.0)
                }
            }
            Signal::Hybrid {
                momentum_window,
                momentum_threshold,
                rsi_window,
                rsi_level,
                gains,
                losses,
            } => {
                if seen <= *momentum_window || seen <= *rsi_window {
                    return 0.0;
                }
                let momentum = last / prices[seen - 1 - momentum_window] - 1.0;
                // gains/losses are prefix sums over daily changes
                let up = gains[seen - 1] - gains[seen - 1 - rsi_window];
                let down = losses[seen - 1] - losses[seen - 1 - rsi_window];
                let rsi = if up + down <= 0.0 {
                    50.0
                } else {
                    100.0 * up / (up + down)
                };
                if momentum > *momentum_threshold && rsi < *rsi_level {
                    1.0
                } else if momentum < -momentum_threshold && rsi > 100.0 - rsi_level {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

struct GroupParams<'a> {
    values: &'a [Value],
}

impl GroupParams<'_> {
    fn int(&self, i: usize) -> usize {
        match self.values[i] {
            Value::Int(v) => v.max(1) as usize,
            other => other.as_f64().max(1.0) as usize,
        }
    }

    fn real(&self, i: usize) -> f64 {
        self.values[i].as_f64()
    }
}

fn build_signal(kind: StrategyKind, p: &GroupParams<'_>, prices: &[f64]) -> (Signal, f64, f64) {
    match kind {
        StrategyKind::TrendFollowing => (
            Signal::Trend {
                fast: p.int(0),
                slow: p.int(1),
                band: p.real(2),
                prefix: Prefix::new(prices),
            },
            p.real(3),
            p.real(4),
        ),
        StrategyKind::MeanReversion => (
            Signal::Reversion {
                lookback: p.int(0),
                z_scale: p.real(1),
                deadband: p.real(2),
                prefix: Prefix::new(prices),
            },
            p.real(3),
            p.real(4),
        ),
        StrategyKind::ThresholdHybrid => {
            let mut gains = vec![0.0; prices.len()];
            let mut losses = vec![0.0; prices.len()];
            for t in 1..prices.len() {
                let change = prices[t] - prices[t - 1];
                gains[t] = gains[t - 1] + change.max(0.0);
                losses[t] = losses[t - 1] + (-change).max(0.0);
            }
            (
                Signal::Hybrid {
                    momentum_window: p.int(0),
                    momentum_threshold: p.real(1),
                    rsi_window: p.int(2),
                    rsi_level: p.real(3),
                    gains,
                    losses,
                },
                p.real(4),
                p.real(5),
            )
        }
    }
}

/// Daily position weights of one asset; entry `t - 1` is held over day `t`.
fn asset_weights(
    signal: &Signal,
    prices: &[f64],
    size: f64,
    stop_loss: f64,
    long_only: bool,
    n_assets: usize,
) -> Vec<f64> {
    let mut weights = Vec::with_capacity(prices.len() - 1);
    let mut position = 0.0f64;
    let mut entry_price = 0.0;
    // after a stop-out, stay flat until the raw signal changes side
    let mut stopped_side: Option<f64> = None;
    for seen in 1..prices.len() {
        let last = prices[seen - 1];
        if position != 0.0 {
            let move_since_entry = last / entry_price - 1.0;
            if move_since_entry * position.signum() <= -stop_loss {
                stopped_side = Some(position.signum());
                position = 0.0;
            }
        }
        let mut target = signal.target(prices, seen);
        if long_only {
            target = target.max(0.0);
        }
        if let Some(side) = stopped_side {
            if target != 0.0 && target.signum() == side {
                target = 0.0;
            } else {
                stopped_side = None;
            }
        }
        if target != 0.0 && (position == 0.0 || target.signum() != position.signum()) {
            entry_price = last;
        }
        position = target;
        weights.push(position * size / n_assets as f64);
    }
    weights
}

/// Daily portfolio returns net of transaction costs; length `n_days - 1`.
pub fn run_strategy(
    spec: &StrategySpec,
    params: &Config,
    prices: &PriceSeries,
) -> Result<Vec<f64>> {
    let space = spec.param_space();
    space.check(params)?;
    if spec.n_groups == 0 || spec.transaction_cost.is_nan() || spec.transaction_cost < 0.0 {
        return Err(Error::InvalidArgument(
            "strategy needs >= 1 group and a non-negative cost".into(),
        ));
    }
    let per_group = spec.params_per_group();
    let values = params.values();
    let long_only = values[values.len() - 1] == Value::Choice(0);

    let n_assets = prices.n_assets();
    let mut portfolio = vec![0.0; prices.n_days() - 1];
    for asset in 0..n_assets {
        let group = asset % spec.n_groups;
        let p = GroupParams {
            values: &values[group * per_group..(group + 1) * per_group],
        };
        let series = prices.asset(asset);
        let (signal, size, stop_loss) = build_signal(spec.kind, &p, series);
        let weights = asset_weights(&signal, series, size, stop_loss, long_only, n_assets);
        let mut held = 0.0;
        for (t, w) in weights.iter().enumerate() {
            let asset_return = series[t + 1] / series[t] - 1.0;
            portfolio[t] += w * asset_return - spec.transaction_cost * (w - held).abs();
            held = *w;
        }
    }
    Ok(portfolio)
}
