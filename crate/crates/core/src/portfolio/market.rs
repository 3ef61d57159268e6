//! Regime-switching geometric Brownian motion market generator.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// About one year with frequent regime changes.
    HighVolatility,
    /// About three years of low volatility and steady drift.
    StableBull,
    /// About five years of sideways movement.
    RangeBoundLong,
    /// About four years of sideways movement.
    RangeBoundShort,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::HighVolatility,
        ScenarioKind::StableBull,
        ScenarioKind::RangeBoundLong,
        ScenarioKind::RangeBoundShort,
    ];

    /// Nominal horizon in trading days.
    pub fn horizon(self) -> usize {
        match self {
            ScenarioKind::HighVolatility => 252,
            ScenarioKind::StableBull => 756,
            ScenarioKind::RangeBoundLong => 1260,
            ScenarioKind::RangeBoundShort => 1008,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::HighVolatility => "high_volatility",
            ScenarioKind::StableBull => "stable_bull",
            ScenarioKind::RangeBoundLong => "range_bound_long",
            ScenarioKind::RangeBoundShort => "range_bound_short",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Annualized drift and volatility of one market regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub drift: f64,
    pub vol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub n_assets: usize,
    pub n_days: usize,
    pub seed: u64,
    pub regimes: Vec<Regime>,
    /// Expected regime switches per year.
    pub switch_intensity: f64,
    /// Annualized pull of log price toward its starting level.
    pub mean_reversion: f64,
    /// Pairwise correlation of daily shocks through a common market factor.
    pub correlation: f64,
    /// Standard deviation of per-asset annualized drift offsets.
    pub drift_dispersion: f64,
    pub initial_price: f64,
}

impl ScenarioSpec {
    pub fn preset(kind: ScenarioKind, seed: u64) -> Self {
        let r = |drift, vol| Regime { drift, vol };
        let (regimes, switch_intensity, mean_reversion, drift_dispersion) = match kind {
            ScenarioKind::HighVolatility => (
                vec![r(0.90, 0.30), r(-0.70, 0.45), r(0.10, 0.60)],
                8.0,
                0.0,
                0.30,
            ),
            ScenarioKind::StableBull => (vec![r(0.10, 0.10), r(0.14, 0.13)], 1.0, 0.0, 0.03),
            ScenarioKind::RangeBoundLong | ScenarioKind::RangeBoundShort => {
                (vec![r(0.0, 0.15), r(0.0, 0.25)], 2.0, 1.5, 0.02)
            }
        };
        Self {
            kind,
            n_assets: 10,
            n_days: kind.horizon(),
            seed,
            regimes,
            switch_intensity,
            mean_reversion,
            correlation: 0.3,
            drift_dispersion,
            initial_price: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nominal = self.kind.horizon() as f64;
        let days = self.n_days as f64;
        if days < 0.9 * nominal || days > 1.1 * nominal {
            return Err(Error::InvalidArgument(format!(
                "{} horizon must be within 10% of {} days, got {}",
                self.kind.name(),
                self.kind.horizon(),
                self.n_days
            )));
        }
        if self.n_assets == 0 {
            return Err(Error::InvalidArgument("n_assets must be >= 1".into()));
        }
        if self.regimes.is_empty()
            || self
                .regimes
                .iter()
                .any(|r| !r.drift.is_finite() || !(r.vol >= 0.0 && r.vol.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "regimes need finite drift and non-negative volatility".into(),
            ));
        }
        if !(self.switch_intensity >= 0.0
            && self.mean_reversion >= 0.0
            && (0.0..=1.0).contains(&self.correlation)
            && self.drift_dispersion >= 0.0
            && self.initial_price > 0.0)
        {
            return Err(Error::InvalidArgument(
                "scenario parameters out of range".into(),
            ));
        }
        Ok(())
    }
}

/// Daily close prices, one row per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    prices: Vec<Vec<f64>>,
}

impl PriceSeries {
    pub fn new(prices: Vec<Vec<f64>>) -> Result<Self> {
        let n_days = prices.first().map_or(0, Vec::len);
        if prices.is_empty() || n_days < 2 {
            return Err(Error::InvalidArgument(
                "price series needs at least one asset and two days".into(),
            ));
        }
        if prices.iter().any(|row| row.len() != n_days) {
            return Err(Error::InvalidArgument("ragged price matrix".into()));
        }
        if prices
            .iter()
            .flatten()
            .any(|p| !(*p > 0.0 && p.is_finite()))
        {
            return Err(Error::InvalidArgument("prices must be positive".into()));
        }
        Ok(Self { prices })
    }

    pub fn n_assets(&self) -> usize {
        self.prices.len()
    }

    pub fn n_days(&self) -> usize {
        self.prices[0].len()
    }

    pub fn asset(&self, i: usize) -> &[f64] {
        &self.prices[i]
    }

    /// Simple daily returns of asset `i`; entry `t - 1` is the return into day `t`.
    pub fn returns(&self, i: usize) -> Vec<f64> {
        self.prices[i]
            .windows(2)
            .map(|w| w[1] / w[0] - 1.0)
            .collect()
    }

    /// One row per day, one column per asset.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let header: Vec<String> = (0..self.n_assets()).map(|i| format!("asset_{i}")).collect();
        out.write_record(&header).map_err(csv_io)?;
        for t in 0..self.n_days() {
            out.write_record(self.prices.iter().map(|row| row[t].to_string()))
                .map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn generate_scenario(spec: &ScenarioSpec) -> Result<PriceSeries> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dt = 1.0 / TRADING_DAYS;

    let offsets: Vec<f64> = (0..spec.n_assets)
        .map(|_| spec.drift_dispersion * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut regime = rng.random_range(0..spec.regimes.len());
    // inter-arrival times in trading days
    let arrivals = (spec.switch_intensity > 0.0 && spec.regimes.len() > 1)
        .then(|| Exp::new(spec.switch_intensity / TRADING_DAYS).expect("positive rate"));
    let mut next_switch = arrivals.map_or(f64::INFINITY, |d| d.sample(&mut rng));

    let loading = spec.correlation.sqrt();
    let idiosyncratic = (1.0 - spec.correlation).sqrt();
    let log_p0 = spec.initial_price.ln();
    let mut log_prices = vec![log_p0; spec.n_assets];
    let mut prices = vec![Vec::with_capacity(spec.n_days); spec.n_assets];
    for row in prices.iter_mut() {
        row.push(spec.initial_price);
    }

    for t in 1..spec.n_days {
        while (t as f64) >= next_switch {
            if let Some(d) = arrivals {
                let shift = rng.random_range(1..spec.regimes.len());
                regime = (regime + shift) % spec.regimes.len();
                next_switch += d.sample(&mut rng);
            }
        }
        let Regime { drift, vol } = spec.regimes[regime];
        let market: f64 = rng.sample(StandardNormal);
        for (i, log_p) in log_prices.iter_mut().enumerate() {
            let own: f64 = rng.sample(StandardNormal);
            let shock = loading * market + idiosyncratic * own;
            let mu = drift + offsets[i];
            let pull = spec.mean_reversion * (*log_p - log_p0);
            *log_p += (mu - 0.5 * vol * vol - pull) * dt + vol * dt.sqrt() * shock;
            prices[i].push(log_p.exp());
        }
    }
    PriceSeries::new(prices)
}
