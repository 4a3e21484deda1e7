//! Performance statistics over daily return series and equity curves.
//!
//! Conventions shared by every function here: 252 trading days per year,
//! zero risk-free rate, sample (n-1) standard deviation for Sharpe and the
//! annualized deviation, and population-style downside deviation over all
//! days for Sortino. Returns and drawdowns are reported in percent; ratios
//! are unitless. Degenerate inputs raise typed errors instead of silently
//! producing 0 or infinity, so comparison tables can render them as absent.

use chrono::NaiveDate;
use thiserror::Error;

/// Trading days per year used by every annualization.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty series")]
    EmptySeries,
    #[error("degenerate series: {0}")]
    DegenerateSeries(&'static str),
    #[error("no return below the minimum acceptable return; downside deviation undefined")]
    NoDownside,
    #[error("turnover needs at least two weight vectors, got {0}")]
    TooFewRebalances(usize),
}

/// Annualized compound return in percent:
/// `((prod(1 + r))^(252 / T) - 1) * 100`.
pub fn annualized_return(daily: &[f64]) -> Result<f64, MetricsError> {
    if daily.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let compounded: f64 = daily.iter().map(|r| 1.0 + r).product();
    if compounded <= 0.0 {
        return Err(MetricsError::DegenerateSeries("non-positive compounded value"));
    }
    Ok((compounded.powf(TRADING_DAYS_PER_YEAR / daily.len() as f64) - 1.0) * 100.0)
}

/// Annualized Sharpe ratio at zero risk-free rate:
/// `mean / sample_stdev * sqrt(252)`.
pub fn sharpe(daily: &[f64]) -> Result<f64, MetricsError> {
    if daily.len() < 2 {
        return Err(MetricsError::EmptySeries);
    }
    let sd = sample_stdev(daily);
    if sd == 0.0 {
        return Err(MetricsError::DegenerateSeries("zero return deviation"));
    }
    Ok(mean(daily) / sd * TRADING_DAYS_PER_YEAR.sqrt())
}

/// Annualized Sortino ratio against a minimum acceptable daily return:
/// `(mean - mar) / downside_dev * sqrt(252)`, where the downside deviation
/// averages squared shortfalls over **all** days.
pub fn sortino(daily: &[f64], mar: f64) -> Result<f64, MetricsError> {
    if daily.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    if !daily.iter().any(|r| *r < mar) {
        return Err(MetricsError::NoDownside);
    }
    let shortfall_sq = daily
        .iter()
        .map(|r| (r - mar).min(0.0).powi(2))
        .sum::<f64>()
        / daily.len() as f64;
    Ok((mean(daily) - mar) / shortfall_sq.sqrt() * TRADING_DAYS_PER_YEAR.sqrt())
}

/// Annualized standard deviation: `sample_stdev * sqrt(252)`.
pub fn annualized_stdev(daily: &[f64]) -> Result<f64, MetricsError> {
    if daily.len() < 2 {
        return Err(MetricsError::EmptySeries);
    }
    Ok(sample_stdev(daily) * TRADING_DAYS_PER_YEAR.sqrt())
}

/// Maximum drawdown in percent (a non-positive number): the worst
/// peak-to-trough decline `(v_t / running_max_t - 1) * 100`, in one pass.
pub fn max_drawdown(curve: &[f64]) -> Result<f64, MetricsError> {
    if curve.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let mut peak = curve[0];
    let mut worst = 0.0f64;
    for v in curve {
        if *v > peak {
            peak = *v;
        }
        worst = worst.min(v / peak - 1.0);
    }
    Ok(worst * 100.0)
}

/// Mean L1 distance between consecutive weight vectors.
pub fn turnover(weights: &[Vec<f64>]) -> Result<f64, MetricsError> {
    if weights.len() < 2 {
        return Err(MetricsError::TooFewRebalances(weights.len()));
    }
    let total: f64 = weights
        .windows(2)
        .map(|pair| {
            pair[0]
                .iter()
                .zip(&pair[1])
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        })
        .sum();
    Ok(total / (weights.len() - 1) as f64)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_stdev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Dated equity curve; starts at 1.0 in every backtest.
#[derive(Debug, Clone, PartialEq)]
pub struct EquityCurve {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl EquityCurve {
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("equity curves are never empty")
    }
}

/// One comparison-table row. Sharpe and Sortino are absent when the series
/// is degenerate for them (zero deviation / no downside day).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub annual_return: f64,
    pub sharpe: Option<f64>,
    pub stdev: f64,
    pub mdd: f64,
    pub sortino: Option<f64>,
}

impl MetricRow {
    /// Computes every column from a daily return series and its curve.
    /// Degenerate Sharpe/Sortino become `None`; other errors propagate.
    pub fn from_series(daily: &[f64], curve: &[f64]) -> Result<MetricRow, MetricsError> {
        let sharpe = match sharpe(daily) {
            Ok(v) => Some(v),
            Err(MetricsError::DegenerateSeries(_)) => None,
            Err(e) => return Err(e),
        };
        let sortino = match sortino(daily, 0.0) {
            Ok(v) => Some(v),
            Err(MetricsError::NoDownside) => None,
            Err(e) => return Err(e),
        };
        Ok(MetricRow {
            annual_return: annualized_return(daily)?,
            sharpe,
            stdev: annualized_stdev(daily)?,
            mdd: max_drawdown(curve)?,
            sortino,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn annualized_return_compounds_exactly() {
        // 252 days of +0.1%: one year of compounding, so the annualized
        // value is just the cumulative growth.
        let daily = vec![0.001; 252];
        let got = annualized_return(&daily).unwrap();
        let want = ((252.0 * 1.001f64.ln()).exp() - 1.0) * 100.0;
        assert!((got - want).abs() < 1e-9 * want.abs(), "got {got}, want {want}");
        // Length-invariance: the same constant daily return annualizes
        // identically over any horizon.
        let longer = vec![0.001; 504];
        let l = annualized_return(&longer).unwrap();
        assert!((l - got).abs() < 1e-9 * got.abs());
    }

    #[test]
    fn sharpe_hand_example() {
        // mean 0.02, sample stdev 0.01 -> 2 * sqrt(252).
        let got = sharpe(&[0.01, 0.02, 0.03]).unwrap();
        let want = 2.0 * 252f64.sqrt();
        assert!((got - want).abs() < 1e-12 * want, "got {got}");
    }

    #[test]
    fn sortino_hand_example() {
        // [0.02, -0.01], MAR 0: mean 0.005, downside dev over all days
        // sqrt(0.0001 / 2).
        let got = sortino(&[0.02, -0.01], 0.0).unwrap();
        let want = 0.005 / (0.0001f64 / 2.0).sqrt() * 252f64.sqrt();
        assert!((got - want).abs() < 1e-12 * want, "got {got}, want {want}");
    }

    #[test]
    fn stdev_uses_the_sample_denominator() {
        let got = annualized_stdev(&[0.01, -0.01, 0.01, -0.01]).unwrap();
        let want = (0.0004f64 / 3.0).sqrt() * 252f64.sqrt();
        assert!((got - want).abs() < 1e-15 * want);
    }

    #[test]
    fn drawdown_hand_example_and_edges() {
        let dd = max_drawdown(&[1.0, 0.8, 0.9]).unwrap();
        assert!((dd + 20.0).abs() < 1e-12, "got {dd}");
        assert_eq!(max_drawdown(&[1.0, 1.1, 1.25]).unwrap(), 0.0, "monotone curve");
        // A flat prefix at the starting value changes nothing.
        let base = [1.0, 1.2, 0.9, 1.3, 1.0];
        let padded = [1.0, 1.0, 1.0, 1.2, 0.9, 1.3, 1.0];
        assert_eq!(max_drawdown(&base).unwrap(), max_drawdown(&padded).unwrap());
    }

    #[test]
    fn turnover_hand_examples() {
        let flip = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(turnover(&flip).unwrap(), 2.0);
        let hold = vec![vec![0.5, 0.5]; 4];
        assert_eq!(turnover(&hold).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_inputs_raise_typed_errors() {
        assert_eq!(annualized_return(&[]), Err(MetricsError::EmptySeries));
        assert!(matches!(
            sharpe(&[0.0, 0.0, 0.0]),
            Err(MetricsError::DegenerateSeries(_))
        ));
        assert_eq!(sortino(&[0.01, 0.02], 0.0), Err(MetricsError::NoDownside));
        assert_eq!(
            turnover(&[vec![1.0]]),
            Err(MetricsError::TooFewRebalances(1))
        );
        assert!(matches!(
            annualized_return(&[-1.5]),
            Err(MetricsError::DegenerateSeries(_))
        ));
    }

    #[test]
    fn metric_row_maps_degeneracy_to_absent_columns() {
        let flat = vec![0.0; 10];
        let curve = vec![1.0; 11];
        let row = MetricRow::from_series(&flat, &curve).unwrap();
        assert_eq!(row.annual_return, 0.0);
        assert_eq!(row.sharpe, None);
        assert_eq!(row.sortino, None);
        assert_eq!(row.mdd, 0.0);
        assert_eq!(row.stdev, 0.0);
    }

    /// Reference O(T^2) drawdown: worst decline over every (peak, trough)
    /// pair with the peak first.
    fn brute_force_mdd(curve: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..curve.len() {
            for j in i..curve.len() {
                worst = worst.min(curve[j] / curve[i] - 1.0);
            }
        }
        worst * 100.0
    }

    #[test]
    fn drawdown_matches_brute_force_on_random_curves() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let n = rng.gen_range(1..60);
            let mut v = 1.0;
            let curve: Vec<f64> = (0..n)
                .map(|_| {
                    v *= 1.0 + rng.gen_range(-0.05..0.05);
                    v
                })
                .collect();
            let fast = max_drawdown(&curve).unwrap();
            let slow = brute_force_mdd(&curve);
            assert!(
                (fast - slow).abs() <= 1e-12 * (1.0 + slow.abs()),
                "fast {fast} vs brute force {slow}"
            );
        }
    }

    proptest! {
        #[test]
        fn sharpe_is_scale_invariant(scale in 0.1f64..10.0, base in -0.01f64..0.01) {
            let daily = vec![base + 0.004, base - 0.003, base + 0.001, base - 0.002];
            let scaled: Vec<f64> = daily.iter().map(|r| r * scale).collect();
            let a = sharpe(&daily).unwrap();
            let b = sharpe(&scaled).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }

        #[test]
        fn drawdown_is_never_positive_and_beats_no_pair(
            steps in proptest::collection::vec(-0.2f64..0.25, 1..40)
        ) {
            let mut v = 1.0;
            let curve: Vec<f64> = steps.iter().map(|s| { v *= 1.0 + s; v }).collect();
            let mdd = max_drawdown(&curve).unwrap();
            prop_assert!(mdd <= 0.0);
            prop_assert!((mdd - brute_force_mdd(&curve)).abs() < 1e-9);
        }
    }
}
