use crate::error::{Error, Result};
use crate::portfolio::market::TRADING_DAYS;

/// Daily standard deviations below this are treated as zero volatility.
pub const MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpeRatio {
    pub value: f64,
    /// Set when the return series had (numerically) zero volatility; `value` is then 0.
    pub degenerate: bool,
}

/// `sqrt(252) * mean / sample_std` of daily returns.
pub fn sharpe_annualized(returns: &[f64]) -> Result<SharpeRatio> {
    if returns.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "Sharpe ratio needs at least 2 returns, got {}",
            returns.len()
        )));
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    if std.is_nan() || std < MIN_STD {
        return Ok(SharpeRatio {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(SharpeRatio {
        value: TRADING_DAYS.sqrt() * mean / std,
        degenerate: false,
    })
}
