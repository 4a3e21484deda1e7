//! Monthly-rebalanced backtesting over a price panel.
//!
//! A strategy sets portfolio weights on the first trading day of each
//! calendar month (and on the backtest's first day); between rebalances the
//! weights drift with realized asset returns. Model strategies read only the
//! feature window ending the day before a decision takes effect, so no
//! rebalance ever sees the move it is about to earn. Equity compounds from
//! 1.0 with no transaction costs.

use std::fmt::Write as _;
use std::path::Path;

use chrono::Datelike;

use crate::baselines::{self, BaselineError};
use crate::data::{daily_returns, AssetPanel, DataError, WindowSet};
use crate::metrics::{EquityCurve, MetricRow, MetricsError};
use crate::nn::{self, LayerSpec, NnError, OutputHead, ParamVector};

/// Errors produced while running or comparing backtests.
#[derive(Debug, thiserror::Error)]
pub enum BacktestError {
    /// Equity reached zero or below; the portfolio cannot continue.
    #[error("portfolio was wiped out on {date}")]
    PortfolioWipedOut { date: chrono::NaiveDate },
    /// The requested range or a rebalance decision falls outside the data.
    #[error("backtest range [{start}, {end}) is unusable: {reason}")]
    ScheduleOutOfRange { start: usize, end: usize, reason: String },
    /// The strategy could not produce weights.
    #[error("strategy failed: {0}")]
    StrategyFailure(String),
    /// Results over different date ranges cannot share a comparison table.
    #[error("cannot compare results over different ranges: {0}")]
    MismatchedRanges(String),
    /// An index strategy names an asset the panel does not contain.
    #[error("panel has no asset named {0:?}")]
    UnknownAsset(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// A portfolio construction rule evaluated at every rebalance.
#[derive(Debug, Clone)]
pub enum Strategy {
    /// A trained policy network. Softmax heads emit weights directly;
    /// softplus heads emit Dirichlet concentrations whose mean is used.
    Model { name: String, policy: LayerSpec, params: ParamVector },
    /// Equal weight across every asset.
    EqualWeight,
    /// 60% equities, 40% bonds, split equally within each side.
    SixtyForty,
    /// The fixed five-class risk-balanced allocation.
    AllWeather,
    /// Buy and hold a single asset.
    Index { asset: String },
}

impl Strategy {
    /// Identifier used in report rows and output file names.
    pub fn name(&self) -> String {
        match self {
            Strategy::Model { name, .. } => name.clone(),
            Strategy::EqualWeight => "equal_weight".into(),
            Strategy::SixtyForty => "sixty_forty".into(),
            Strategy::AllWeather => "all_weather".into(),
            Strategy::Index { asset } => format!("index_{asset}"),
        }
    }

    /// Target weights for the rebalance on panel day `t`.
    fn weights_at(
        &self,
        t: usize,
        panel: &AssetPanel,
        windows: Option<&WindowSet>,
    ) -> Result<Vec<f64>, BacktestError> {
        match self {
            Strategy::Model { name, policy, params } => {
                let windows = windows.ok_or_else(|| {
                    BacktestError::StrategyFailure(format!(
                        "model strategy {name:?} needs feature windows"
                    ))
                })?;
                let window = windows.get(t).ok_or_else(|| BacktestError::ScheduleOutOfRange {
                    start: t,
                    end: t,
                    reason: format!(
                        "no feature window covers the rebalance on day {t}; windows span \
                         [{}, {}]",
                        windows.first_decision(),
                        windows.last_decision()
                    ),
                })?;
                let (out, _) = nn::forward(policy, params, &window.tensor)?;
                match policy.head {
                    OutputHead::Softmax => Ok(out),
                    OutputHead::Softplus => {
                        let alpha: Vec<f64> = out.iter().map(|v| v + 1.0).collect();
                        let total: f64 = alpha.iter().sum();
                        Ok(alpha.iter().map(|a| a / total).collect())
                    }
                    OutputHead::Identity => Err(BacktestError::StrategyFailure(format!(
                        "model strategy {name:?} has an identity head, which does not map to \
                         portfolio weights"
                    ))),
                }
            }
            Strategy::EqualWeight => Ok(baselines::equal_weight(&panel.assets)?),
            Strategy::SixtyForty => Ok(baselines::sixty_forty(&panel.assets)?),
            Strategy::AllWeather => Ok(baselines::all_weather(&panel.assets)?),
            Strategy::Index { asset } => {
                let idx = panel
                    .assets
                    .iter()
                    .position(|a| a.id == *asset)
                    .ok_or_else(|| BacktestError::UnknownAsset(asset.clone()))?;
                let mut w = vec![0.0; panel.n_assets()];
                w[idx] = 1.0;
                Ok(w)
            }
        }
    }
}

/// Panel-day indices of every rebalance in `[start, end)`: the first day of
/// the range plus the first trading day of each later calendar month. The
/// final day of the range is never included because a rebalance there would
/// have no move left to earn.
pub fn rebalance_schedule(
    panel: &AssetPanel,
    start: usize,
    end: usize,
) -> Result<Vec<usize>, BacktestError> {
    if start >= end || end > panel.n_days() {
        return Err(BacktestError::ScheduleOutOfRange {
            start,
            end,
            reason: format!("panel has {} days", panel.n_days()),
        });
    }
    let mut schedule = vec![start];
    for t in (start + 1)..end.saturating_sub(1) {
        let prev = panel.dates[t - 1];
        let cur = panel.dates[t];
        if (cur.year(), cur.month()) != (prev.year(), prev.month()) {
            schedule.push(t);
        }
    }
    Ok(schedule)
}

/// Weights after one day of market drift: each position grows with its
/// asset's return and the vector renormalizes to sum to one.
pub fn drift_weights(weights: &[f64], asset_returns: &[f64]) -> Result<Vec<f64>, BacktestError> {
    let grown: Vec<f64> = weights.iter().zip(asset_returns).map(|(w, r)| w * (1.0 + r)).collect();
    let total: f64 = grown.iter().sum();
    if !(total > 0.0) {
        return Err(BacktestError::StrategyFailure(format!(
            "drifted weights sum to {total}; the position has no remaining value"
        )));
    }
    Ok(grown.iter().map(|g| g / total).collect())
}

/// Everything a finished backtest produced: the equity curve, the daily
/// portfolio returns behind it, the weights held at each day's close, and
/// where the rebalances happened.
#[derive(Debug, Clone)]
pub struct BacktestResult {
    pub name: String,
    /// First panel day of the range.
    pub start: usize,
    pub equity: EquityCurve,
    /// Portfolio return of each day after the first.
    pub daily: Vec<f64>,
    /// Weights held at the close of each day in the range.
    pub held: Vec<Vec<f64>>,
    /// Panel-day indices where the strategy set fresh weights.
    pub rebalances: Vec<usize>,
    /// Mean one-way turnover per rebalance after the first: half the L1
    /// distance between the fresh targets and the weights that had drifted
    /// into the rebalance. The simulation charges no transaction costs, so
    /// this is the honesty check on how much trading a strategy's numbers
    /// assume is free.
    pub mean_turnover: f64,
}

impl BacktestResult {
    /// Summary metrics of the run.
    pub fn metric_row(&self) -> Result<MetricRow, MetricsError> {
        MetricRow::from_series(&self.daily, &self.equity.values)
    }
}

/// Runs `strategy` over panel days `[start, end)`.
///
/// Day `start` sets the initial weights; every later day earns the move from
/// the previous close with the weights held overnight, then either drifts
/// them or, on a schedule day, replaces them with fresh targets. Model
/// strategies deciding on day `t` read the feature window whose last row is
/// day `t - 1`.
pub fn run_backtest(
    panel: &AssetPanel,
    windows: Option<&WindowSet>,
    strategy: &Strategy,
    start: usize,
    end: usize,
) -> Result<BacktestResult, BacktestError> {
    let schedule = rebalance_schedule(panel, start, end)?;
    if end - start < 2 {
        return Err(BacktestError::ScheduleOutOfRange {
            start,
            end,
            reason: "a backtest needs at least two days".into(),
        });
    }
    let returns = daily_returns(panel)?;

    let mut weights = strategy.weights_at(start, panel, windows)?;
    let mut equity = vec![1.0];
    let mut daily = Vec::with_capacity(end - start - 1);
    let mut held = vec![weights.clone()];
    let mut turnovers = Vec::new();
    let mut next_rebalance = 1; // schedule[0] == start is already applied.

    for t in (start + 1)..end {
        let row = &returns.values[t - 1];
        let r: f64 = weights.iter().zip(row).map(|(w, x)| w * x).sum();
        let value = equity.last().unwrap() * (1.0 + r);
        if !(value > 0.0) {
            return Err(BacktestError::PortfolioWipedOut { date: panel.dates[t] });
        }
        daily.push(r);
        equity.push(value);

        let drifted = drift_weights(&weights, row)?;
        if next_rebalance < schedule.len() && schedule[next_rebalance] == t {
            weights = strategy.weights_at(t, panel, windows)?;
            next_rebalance += 1;
            let traded: f64 =
                weights.iter().zip(&drifted).map(|(a, b)| (a - b).abs()).sum();
            turnovers.push(0.5 * traded);
        } else {
            weights = drifted;
        }
        held.push(weights.clone());
    }

    let mean_turnover = if turnovers.is_empty() {
        0.0
    } else {
        turnovers.iter().sum::<f64>() / turnovers.len() as f64
    };
    Ok(BacktestResult {
        name: strategy.name(),
        start,
        equity: EquityCurve { dates: panel.dates[start..end].to_vec(), values: equity },
        daily,
        held,
        rebalances: schedule,
        mean_turnover,
    })
}

/// Summary rows for a set of results, all over the same date range.
#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub rows: Vec<(String, MetricRow)>,
}

impl ComparisonTable {
    /// Pinned CSV header of the comparison report.
    pub const CSV_HEADER: &'static str =
        "Model,Annual Return,Sharpe Ratio,Standard Deviation,MDD,Sortino";

    /// Renders the table as CSV; degenerate Sharpe/Sortino cells read `NA`.
    pub fn to_csv_string(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (name, m) in &self.rows {
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{}",
                m.annual_return,
                opt(m.sharpe),
                m.stdev,
                m.mdd,
                opt(m.sortino)
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv_string())
    }
}

/// Builds the comparison table for already-run results, requiring every
/// result to cover the same dates.
pub fn compare_results(results: &[BacktestResult]) -> Result<ComparisonTable, BacktestError> {
    if let Some(first) = results.first() {
        for r in &results[1..] {
            if r.equity.dates != first.equity.dates {
                return Err(BacktestError::MismatchedRanges(format!(
                    "{} covers {} to {} but {} covers {} to {}",
                    first.name,
                    first.equity.dates.first().unwrap(),
                    first.equity.dates.last().unwrap(),
                    r.name,
                    r.equity.dates.first().unwrap(),
                    r.equity.dates.last().unwrap(),
                )));
            }
        }
    }
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push((r.name.clone(), r.metric_row()?));
    }
    Ok(ComparisonTable { rows })
}

/// Runs every strategy over the same range and tabulates the outcomes.
pub fn compare_strategies(
    panel: &AssetPanel,
    windows: Option<&WindowSet>,
    strategies: &[Strategy],
    start: usize,
    end: usize,
) -> Result<(Vec<BacktestResult>, ComparisonTable), BacktestError> {
    let results: Vec<BacktestResult> = strategies
        .iter()
        .map(|s| run_backtest(panel, windows, s, start, end))
        .collect::<Result<_, _>>()?;
    let table = compare_results(&results)?;
    Ok((results, table))
}

/// Aggregates a weight vector by asset class, in report order.
pub fn class_proportions(
    panel: &AssetPanel,
    weights: &[f64],
) -> Vec<(crate::data::AssetClass, f64)> {
    crate::data::AssetClass::ALL
        .iter()
        .map(|class| {
            let total = panel
                .assets
                .iter()
                .zip(weights)
                .filter(|(a, _)| a.class == *class)
                .map(|(_, w)| w)
                .sum();
            (*class, total)
        })
        .collect()
}

/// Writes `date,value` rows of the equity curve.
pub fn write_equity_csv(path: &Path, result: &BacktestResult) -> std::io::Result<()> {
    let mut out = String::from("date,value\n");
    for (d, v) in result.equity.dates.iter().zip(&result.equity.values) {
        let _ = writeln!(out, "{d},{v}");
    }
    std::fs::write(path, out)
}

/// Writes `date,asset,weight` rows of the weights held at each close.
pub fn write_weights_csv(
    path: &Path,
    panel: &AssetPanel,
    result: &BacktestResult,
) -> std::io::Result<()> {
    let mut out = String::from("date,asset,weight\n");
    for (d, held) in result.equity.dates.iter().zip(&result.held) {
        for (asset, w) in panel.assets.iter().zip(held) {
            let _ = writeln!(out, "{d},{},{w}", asset.id);
        }
    }
    std::fs::write(path, out)
}

/// Writes `date,class,weight` rows aggregating held weights by asset class.
pub fn write_classes_csv(
    path: &Path,
    panel: &AssetPanel,
    result: &BacktestResult,
) -> std::io::Result<()> {
    let mut out = String::from("date,class,weight\n");
    for (d, held) in result.equity.dates.iter().zip(&result.held) {
        for (class, w) in class_proportions(panel, held) {
            let _ = writeln!(out, "{d},{},{w}", class.name());
        }
    }
    std::fs::write(path, out)
}
