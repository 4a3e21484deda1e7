//! Price panels, daily returns, and policy feature windows.
//!
//! A panel is a strictly aligned grid: every asset has a close for every
//! trading date. Panels come from CSV files or from the seeded synthetic
//! generator; everything downstream (returns, feature windows, backtests)
//! is derived from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::rng;

/// Errors raised while loading, generating, or slicing panels.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("asset {asset} is misaligned at date {date}: every asset must cover every date")]
    MisalignedDates { asset: String, date: NaiveDate },
    #[error("non-positive close for {asset} at {date}")]
    NonPositivePrice { asset: String, date: NaiveDate },
    #[error("unknown asset class for {0}")]
    UnknownAssetClass(String),
    #[error("panel has {have} dates but at least {need} are required")]
    PanelTooShort { have: usize, need: usize },
    #[error("invalid date range: {0}")]
    InvalidRange(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

/// Broad asset class used by the fixed-weight baselines and class reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AssetClass {
    Equity,
    BondIntermediate,
    BondLong,
    Commodity,
    Gold,
}

impl AssetClass {
    /// All classes, in the order used by class-weight reports.
    pub const ALL: [AssetClass; 5] = [
        AssetClass::Equity,
        AssetClass::BondLong,
        AssetClass::BondIntermediate,
        AssetClass::Gold,
        AssetClass::Commodity,
    ];

    pub fn parse(s: &str) -> Option<AssetClass> {
        match s {
            "equity" => Some(AssetClass::Equity),
            "bond_intermediate" => Some(AssetClass::BondIntermediate),
            "bond_long" => Some(AssetClass::BondLong),
            "commodity" => Some(AssetClass::Commodity),
            "gold" => Some(AssetClass::Gold),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AssetClass::Equity => "equity",
            AssetClass::BondIntermediate => "bond_intermediate",
            AssetClass::BondLong => "bond_long",
            AssetClass::Commodity => "commodity",
            AssetClass::Gold => "gold",
        }
    }
}

impl fmt::Display for AssetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A tradable instrument: identifier plus class tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Asset {
    pub id: String,
    pub class: AssetClass,
}

/// Aligned close-price grid: `close[t][i]` is asset `i` on date `t`.
///
/// Volumes are optional per asset; when present they cover every date.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetPanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<Asset>,
    pub close: Vec<Vec<f64>>,
    pub volume: Vec<Option<Vec<f64>>>,
}

impl AssetPanel {
    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Index of `date` in the panel, if it is a trading date.
    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }
}

/// Daily simple returns: `values[t][i] = close[t+1][i] / close[t][i] - 1`.
///
/// Row `t` is dated `dates[t]`, the panel date of the later close, so the
/// matrix starts one day after the panel does.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<Vec<f64>>,
}

impl ReturnsMatrix {
    pub fn n_assets(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

/// Computes daily simple returns from a panel.
pub fn daily_returns(panel: &AssetPanel) -> Result<ReturnsMatrix, DataError> {
    if panel.n_days() < 2 {
        return Err(DataError::PanelTooShort {
            have: panel.n_days(),
            need: 2,
        });
    }
    let values = (0..panel.n_days() - 1)
        .map(|t| {
            (0..panel.n_assets())
                .map(|i| panel.close[t + 1][i] / panel.close[t][i] - 1.0)
                .collect()
        })
        .collect();
    Ok(ReturnsMatrix {
        dates: panel.dates[1..].to_vec(),
        values,
    })
}

/// What a policy sees when it allocates at decision index `decision`:
/// a `window_length x n_assets x n_features` tensor, flattened row-major,
/// built only from closes strictly before the decision date.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub decision: usize,
    pub window_length: usize,
    pub n_assets: usize,
    pub n_features: usize,
    pub tensor: Vec<f64>,
}

impl FeatureWindow {
    pub fn len(&self) -> usize {
        self.tensor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensor.is_empty()
    }

    pub fn at(&self, row: usize, asset: usize, feature: usize) -> f64 {
        self.tensor[(row * self.n_assets + asset) * self.n_features + feature]
    }
}

/// Feature windows for every decision index of one panel.
#[derive(Debug, Clone)]
pub struct WindowSet {
    pub window_length: usize,
    pub windows: Vec<FeatureWindow>,
}

impl WindowSet {
    /// First valid decision index.
    pub fn first_decision(&self) -> usize {
        self.window_length
    }

    /// Last valid decision index.
    pub fn last_decision(&self) -> usize {
        self.window_length + self.windows.len() - 1
    }

    /// Window for decision index `t`, if `t` is in range.
    pub fn get(&self, t: usize) -> Option<&FeatureWindow> {
        t.checked_sub(self.window_length)
            .and_then(|k| self.windows.get(k))
    }

    /// Flattened input size each window feeds to a network.
    pub fn input_size(&self) -> usize {
        self.windows.first().map_or(0, FeatureWindow::len)
    }
}

/// Builds one feature window per decision index from `window_length` to
/// `T - 2`.
///
/// Row `j` of the window at decision `t` describes day `d = t - window_length
/// + j`: the daily return realized on `d` (zero for day 0, which has no prior
/// close) and, when `use_volume` is set, the volume z-score of day `d` within
/// the window (zero for assets without volume or with constant volume).
pub fn build_windows(
    panel: &AssetPanel,
    window_length: usize,
    use_volume: bool,
) -> Result<WindowSet, DataError> {
    if window_length == 0 {
        return Err(DataError::InvalidSpec("window_length must be >= 1".into()));
    }
    let t_total = panel.n_days();
    if t_total < window_length + 2 {
        return Err(DataError::PanelTooShort {
            have: t_total,
            need: window_length + 2,
        });
    }
    let n = panel.n_assets();
    let nf = if use_volume { 2 } else { 1 };
    let returns = daily_returns(panel)?;

    let mut windows = Vec::with_capacity(t_total - 1 - window_length);
    for t in window_length..=t_total - 2 {
        let mut tensor = vec![0.0; window_length * n * nf];
        // Volume statistics over the window's days, per asset.
        let vol_stats: Vec<Option<(f64, f64)>> = if use_volume {
            (0..n)
                .map(|i| {
                    panel.volume[i].as_ref().map(|v| {
                        let days = &v[t - window_length..t];
                        let mean = days.iter().sum::<f64>() / days.len() as f64;
                        let var = days.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
                            / days.len() as f64;
                        (mean, var.sqrt())
                    })
                })
                .collect()
        } else {
            Vec::new()
        };
        for j in 0..window_length {
            let d = t - window_length + j;
            for i in 0..n {
                let base = (j * n + i) * nf;
                // Return realized on day d; day 0 has no prior close.
                tensor[base] = if d >= 1 { returns.values[d - 1][i] } else { 0.0 };
                if use_volume {
                    tensor[base + 1] = match &vol_stats[i] {
                        Some((mean, sd)) if *sd > 0.0 => {
                            (panel.volume[i].as_ref().unwrap()[d] - mean) / sd
                        }
                        _ => 0.0,
                    };
                }
            }
        }
        windows.push(FeatureWindow {
            decision: t,
            window_length,
            n_assets: n,
            n_features: nf,
            tensor,
        });
    }
    Ok(WindowSet {
        window_length,
        windows,
    })
}

/// Splits a panel into disjoint train and test sub-panels.
///
/// Train covers dates up to and including `train_end`; test covers dates from
/// `test_start` on. Dates strictly between the two belong to neither panel.
pub fn split_panel(
    panel: &AssetPanel,
    train_end: NaiveDate,
    test_start: NaiveDate,
) -> Result<(AssetPanel, AssetPanel), DataError> {
    if train_end >= test_start {
        return Err(DataError::InvalidRange(format!(
            "train_end {train_end} must precede test_start {test_start}"
        )));
    }
    let (first, last) = match (panel.dates.first(), panel.dates.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(DataError::PanelTooShort { have: 0, need: 2 }),
    };
    if train_end < first || test_start > last {
        return Err(DataError::InvalidRange(format!(
            "split dates must lie within the panel range {first}..={last}"
        )));
    }
    let cut = panel.dates.partition_point(|d| *d <= train_end);
    let start = panel.dates.partition_point(|d| *d < test_start);
    Ok((slice_panel(panel, 0, cut)?, slice_panel(panel, start, panel.n_days())?))
}

/// The sub-panel covering panel days `[from, to)`, with assets unchanged.
pub fn slice_panel(panel: &AssetPanel, from: usize, to: usize) -> Result<AssetPanel, DataError> {
    if from >= to || to > panel.n_days() {
        return Err(DataError::InvalidRange(format!(
            "slice [{from}, {to}) of a {}-day panel",
            panel.n_days()
        )));
    }
    Ok(AssetPanel {
        dates: panel.dates[from..to].to_vec(),
        assets: panel.assets.clone(),
        close: panel.close[from..to].to_vec(),
        volume: panel
            .volume
            .iter()
            .map(|v| v.as_ref().map(|v| v[from..to].to_vec()))
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// CSV input and output
// ---------------------------------------------------------------------------

const PANEL_HEADER: &str = "date,asset,close,volume";
const CLASS_HEADER: &str = "asset,class";

/// Loads an `asset,class` map.
pub fn load_class_map(path: &Path) -> Result<BTreeMap<String, AssetClass>, DataError> {
    let text = read_file(path)?;
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let row = raw.trim_end_matches('\r');
        if idx == 0 {
            if row != CLASS_HEADER {
                return Err(DataError::ParseError {
                    line,
                    message: format!("expected header '{CLASS_HEADER}'"),
                });
            }
            continue;
        }
        if row.is_empty() {
            continue;
        }
        let mut parts = row.split(',');
        let (asset, class) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(c), None) if !a.is_empty() => (a, c),
            _ => {
                return Err(DataError::ParseError {
                    line,
                    message: "expected 'asset,class'".into(),
                })
            }
        };
        let class = AssetClass::parse(class)
            .ok_or_else(|| DataError::UnknownAssetClass(asset.to_string()))?;
        map.insert(asset.to_string(), class);
    }
    Ok(map)
}

/// Loads a `date,asset,close,volume` panel, enforcing strict alignment:
/// every asset must have exactly one row per date.
pub fn load_panel_csv(
    path: &Path,
    class_map: &BTreeMap<String, AssetClass>,
) -> Result<AssetPanel, DataError> {
    let text = read_file(path)?;
    // (asset -> date -> (close, volume)), in file order of first appearance.
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, BTreeMap<NaiveDate, (f64, Option<f64>)>> = BTreeMap::new();
    let mut all_dates: BTreeSet<NaiveDate> = BTreeSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let row = raw.trim_end_matches('\r');
        if idx == 0 {
            if row != PANEL_HEADER {
                return Err(DataError::ParseError {
                    line,
                    message: format!("expected header '{PANEL_HEADER}'"),
                });
            }
            continue;
        }
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 4 {
            return Err(DataError::ParseError {
                line,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d").map_err(|_| {
            DataError::ParseError {
                line,
                message: format!("bad date '{}'", fields[0]),
            }
        })?;
        let asset = fields[1];
        if asset.is_empty() {
            return Err(DataError::ParseError {
                line,
                message: "empty asset id".into(),
            });
        }
        let close: f64 = parse_number(fields[2], line, "close")?;
        if !(close > 0.0) {
            return Err(DataError::NonPositivePrice {
                asset: asset.to_string(),
                date,
            });
        }
        let volume = if fields[3].is_empty() {
            None
        } else {
            let v: f64 = parse_number(fields[3], line, "volume")?;
            if v < 0.0 {
                return Err(DataError::ParseError {
                    line,
                    message: format!("negative volume '{}'", fields[3]),
                });
            }
            Some(v)
        };
        if !rows.contains_key(asset) {
            order.push(asset.to_string());
        }
        let per_asset = rows.entry(asset.to_string()).or_default();
        if per_asset.insert(date, (close, volume)).is_some() {
            return Err(DataError::ParseError {
                line,
                message: format!("duplicate row for {asset} at {date}"),
            });
        }
        all_dates.insert(date);
    }

    if order.is_empty() || all_dates.is_empty() {
        return Err(DataError::PanelTooShort { have: 0, need: 2 });
    }

    // Alignment: each asset's date set must equal the union of all dates.
    for asset in &order {
        let have = &rows[asset];
        for date in &all_dates {
            if !have.contains_key(date) {
                return Err(DataError::MisalignedDates {
                    asset: asset.clone(),
                    date: *date,
                });
            }
        }
    }

    let assets: Vec<Asset> = order
        .iter()
        .map(|id| {
            class_map
                .get(id)
                .map(|class| Asset {
                    id: id.clone(),
                    class: *class,
                })
                .ok_or_else(|| DataError::UnknownAssetClass(id.clone()))
        })
        .collect::<Result<_, _>>()?;
    let dates: Vec<NaiveDate> = all_dates.into_iter().collect();
    let close: Vec<Vec<f64>> = dates
        .iter()
        .map(|d| order.iter().map(|a| rows[a][d].0).collect())
        .collect();
    let volume: Vec<Option<Vec<f64>>> = order
        .iter()
        .map(|a| {
            // Keep a volume series only when every date carries one.
            let vals: Option<Vec<f64>> = dates.iter().map(|d| rows[a][d].1).collect();
            vals
        })
        .collect();

    Ok(AssetPanel {
        dates,
        assets,
        close,
        volume,
    })
}

/// Writes a panel back to `date,asset,close,volume` CSV.
///
/// Values use the shortest decimal text that round-trips, so a written panel
/// reloads to exactly the same numbers.
pub fn write_panel_csv(panel: &AssetPanel, path: &Path) -> Result<(), DataError> {
    let mut out = String::from(PANEL_HEADER);
    out.push('\n');
    for (t, date) in panel.dates.iter().enumerate() {
        for (i, asset) in panel.assets.iter().enumerate() {
            let vol = match &panel.volume[i] {
                Some(v) => format!("{}", v[t]),
                None => String::new(),
            };
            out.push_str(&format!("{date},{},{},{vol}\n", asset.id, panel.close[t][i]));
        }
    }
    std::fs::write(path, out).map_err(|e| DataError::ParseError {
        line: 0,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

/// Writes the matching `asset,class` map for a panel.
pub fn write_class_map(panel: &AssetPanel, path: &Path) -> Result<(), DataError> {
    let mut out = String::from(CLASS_HEADER);
    out.push('\n');
    for asset in &panel.assets {
        out.push_str(&format!("{},{}\n", asset.id, asset.class));
    }
    std::fs::write(path, out).map_err(|e| DataError::ParseError {
        line: 0,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

fn read_file(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path)
        .map_err(|_| DataError::FileNotFound(path.display().to_string()))
}

fn parse_number(s: &str, line: usize, what: &str) -> Result<f64, DataError> {
    let v: f64 = s.parse().map_err(|_| DataError::ParseError {
        line,
        message: format!("bad {what} '{s}'"),
    })?;
    if !v.is_finite() {
        return Err(DataError::ParseError {
            line,
            message: format!("non-finite {what} '{s}'"),
        });
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Synthetic panels
// ---------------------------------------------------------------------------

/// A regime scales drift and volatility from `start_day` until the next
/// regime begins (or the panel ends).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    pub start_day: usize,
    pub drift_mult: f64,
    pub vol_mult: f64,
}

/// Recipe for a seeded geometric-Brownian panel with piecewise regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_assets: usize,
    pub n_days: usize,
    /// Per-asset daily log-price drift.
    pub drift: Vec<f64>,
    /// Per-asset daily log-price volatility.
    pub vol: Vec<f64>,
    pub classes: Vec<AssetClass>,
    pub regimes: Vec<Regime>,
    pub seed: u64,
    /// Calendar date of the first row; later rows step over weekdays.
    pub start: NaiveDate,
}

impl SyntheticSpec {
    /// Uniform spec: every asset shares one drift, volatility, and class.
    pub fn uniform(n_assets: usize, n_days: usize, drift: f64, vol: f64, seed: u64) -> Self {
        SyntheticSpec {
            n_assets,
            n_days,
            drift: vec![drift; n_assets],
            vol: vec![vol; n_assets],
            classes: vec![AssetClass::Equity; n_assets],
            regimes: Vec::new(),
            seed,
            start: default_start(),
        }
    }
}

/// First trading date used by synthetic panels (a Monday).
pub fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 3).unwrap()
}

/// Generates a synthetic panel: `close[0] = 100` per asset, then
/// `close[t+1] = close[t] * exp(drift * dm + vol * vm * z)` with `z` standard
/// normal and `(dm, vm)` the multipliers of the regime active at step `t`.
///
/// The same spec (seed included) always yields a bitwise-identical panel.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<AssetPanel, DataError> {
    if spec.n_assets == 0 {
        return Err(DataError::InvalidSpec("n_assets must be >= 1".into()));
    }
    if spec.n_days < 2 {
        return Err(DataError::InvalidSpec("n_days must be >= 2".into()));
    }
    for (name, v) in [("drift", &spec.drift), ("vol", &spec.vol)] {
        if v.len() != spec.n_assets {
            return Err(DataError::InvalidSpec(format!(
                "{name} has {} entries for {} assets",
                v.len(),
                spec.n_assets
            )));
        }
    }
    if spec.classes.len() != spec.n_assets {
        return Err(DataError::InvalidSpec(format!(
            "classes has {} entries for {} assets",
            spec.classes.len(),
            spec.n_assets
        )));
    }
    if spec.vol.iter().any(|v| *v < 0.0) {
        return Err(DataError::InvalidSpec("volatility must be >= 0".into()));
    }
    for pair in spec.regimes.windows(2) {
        if pair[1].start_day <= pair[0].start_day {
            return Err(DataError::InvalidSpec(
                "regimes must have strictly increasing start days".into(),
            ));
        }
    }

    let mut rng = rng::stream(spec.seed, "data");
    let mut log_close: Vec<Vec<f64>> = vec![vec![0.0; spec.n_assets]];
    for t in 0..spec.n_days - 1 {
        let (dm, vm) = regime_at(&spec.regimes, t);
        let prev = &log_close[t];
        let next: Vec<f64> = (0..spec.n_assets)
            .map(|i| {
                let z: f64 = rng.sample(StandardNormal);
                prev[i] + spec.drift[i] * dm + spec.vol[i] * vm * z
            })
            .collect();
        log_close.push(next);
    }
    let close: Vec<Vec<f64>> = log_close
        .iter()
        .map(|row| row.iter().map(|lp| 100.0 * lp.exp()).collect())
        .collect();

    let assets = (0..spec.n_assets)
        .map(|i| Asset {
            id: format!("asset{i}"),
            class: spec.classes[i],
        })
        .collect();
    Ok(AssetPanel {
        dates: weekday_sequence(spec.start, spec.n_days),
        assets,
        close,
        volume: vec![None; spec.n_assets],
    })
}

fn regime_at(regimes: &[Regime], step: usize) -> (f64, f64) {
    let mut active = (1.0, 1.0);
    for r in regimes {
        if step >= r.start_day {
            active = (r.drift_mult, r.vol_mult);
        } else {
            break;
        }
    }
    active
}

/// `n` consecutive weekdays starting at `start` (shifted forward off a
/// weekend if necessary).
pub fn weekday_sequence(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut dates = Vec::with_capacity(n);
    let mut d = start;
    while dates.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            dates.push(d);
        }
        d = d.succ_opt().expect("date overflow");
    }
    dates
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_panel(closes: &[&[f64]]) -> AssetPanel {
        let n = closes[0].len();
        AssetPanel {
            dates: weekday_sequence(default_start(), closes.len()),
            assets: (0..n)
                .map(|i| Asset {
                    id: format!("asset{i}"),
                    class: AssetClass::Equity,
                })
                .collect(),
            close: closes.iter().map(|r| r.to_vec()).collect(),
            volume: vec![None; n],
        }
    }

    #[test]
    fn daily_returns_hand_example() {
        let panel = tiny_panel(&[&[100.0], &[110.0], &[99.0]]);
        let r = daily_returns(&panel).unwrap();
        assert_eq!(r.values.len(), 2);
        assert!((r.values[0][0] - 0.10).abs() < 1e-12, "up day: {}", r.values[0][0]);
        assert!((r.values[1][0] + 0.10).abs() < 1e-12, "down day: {}", r.values[1][0]);
        assert_eq!(r.dates[0], panel.dates[1]);
    }

    #[test]
    fn daily_returns_needs_two_days() {
        let panel = tiny_panel(&[&[100.0]]);
        assert!(matches!(
            daily_returns(&panel),
            Err(DataError::PanelTooShort { .. })
        ));
    }

    #[test]
    fn window_count_matches_index_arithmetic() {
        let spec = SyntheticSpec::uniform(2, 10, 0.001, 0.01, 3);
        let panel = generate_synthetic(&spec).unwrap();
        let ws = build_windows(&panel, 5, false).unwrap();
        assert_eq!(ws.windows.len(), 4, "decision indices 5..=8");
        assert_eq!(ws.first_decision(), 5);
        assert_eq!(ws.last_decision(), 8);
        assert_eq!(ws.get(5).unwrap().decision, 5);
        assert!(ws.get(4).is_none());
        assert!(ws.get(9).is_none());
    }

    #[test]
    fn constant_panel_gives_zero_features() {
        let row: &[f64] = &[50.0, 80.0];
        let panel = tiny_panel(&vec![row; 12]);
        let ws = build_windows(&panel, 4, false).unwrap();
        for w in &ws.windows {
            assert!(w.tensor.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn windows_never_use_the_decision_day_or_later() {
        let spec = SyntheticSpec::uniform(3, 40, 0.0005, 0.01, 11);
        let base = generate_synthetic(&spec).unwrap();
        let ws = build_windows(&base, 6, false).unwrap();
        for t in [7usize, 20, 38] {
            let mut bumped = base.clone();
            for day in t..bumped.n_days() {
                for i in 0..bumped.n_assets() {
                    bumped.close[day][i] *= 1.5;
                }
            }
            let ws2 = build_windows(&bumped, 6, false).unwrap();
            for (a, b) in ws.windows.iter().zip(&ws2.windows) {
                if a.decision <= t {
                    assert_eq!(a.tensor, b.tensor, "window at {} must ignore close[{t}..]", a.decision);
                }
            }
        }
    }

    #[test]
    fn volume_zscores_are_window_local() {
        let flat: &[f64] = &[100.0];
        let mut panel = tiny_panel(&vec![flat; 8]);
        panel.volume[0] = Some(vec![10.0, 10.0, 10.0, 40.0, 10.0, 10.0, 10.0, 10.0]);
        let ws = build_windows(&panel, 3, true).unwrap();
        let w = ws.get(4).unwrap(); // days 1..=3, volumes [10, 10, 40]
        assert_eq!(w.n_features, 2);
        let mean = 20.0;
        let sd = 200.0f64.sqrt();
        assert!((w.at(2, 0, 1) - (40.0 - mean) / sd).abs() < 1e-12);
        assert!((w.at(0, 0, 1) - (10.0 - mean) / sd).abs() < 1e-12);
        // Constant-volume window (days 0..=2) -> zero z-scores.
        let w_const = ws.get(3).unwrap();
        assert!(w_const.tensor.iter().skip(1).step_by(2).all(|z| *z == 0.0));
    }

    #[test]
    fn synthetic_is_bitwise_deterministic() {
        let spec = SyntheticSpec::uniform(4, 64, 0.0002, 0.012, 99);
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        for t in 0..a.n_days() {
            for i in 0..a.n_assets() {
                assert_eq!(a.close[t][i].to_bits(), b.close[t][i].to_bits());
            }
        }
        let other = generate_synthetic(&SyntheticSpec { seed: 100, ..spec }).unwrap();
        assert_ne!(a.close, other.close, "different seeds must differ");
    }

    #[test]
    fn zero_vol_path_is_a_pure_exponential() {
        let spec = SyntheticSpec::uniform(1, 253, 0.001, 0.0, 5);
        let panel = generate_synthetic(&spec).unwrap();
        let expect = 100.0 * (0.001f64 * 252.0).exp();
        let got = panel.close[252][0];
        assert!(
            (got - expect).abs() <= 1e-10 * expect,
            "zero-noise close after 252 steps: got {got}, want {expect}"
        );
        assert_eq!(panel.close[0][0], 100.0);
    }

    #[test]
    fn regimes_scale_the_active_steps() {
        let mut spec = SyntheticSpec::uniform(1, 30, 0.01, 0.0, 1);
        spec.regimes = vec![
            Regime { start_day: 10, drift_mult: -2.0, vol_mult: 1.0 },
            Regime { start_day: 20, drift_mult: 1.0, vol_mult: 1.0 },
        ];
        let panel = generate_synthetic(&spec).unwrap();
        let log_step = |t: usize| (panel.close[t + 1][0] / panel.close[t][0]).ln();
        assert!((log_step(5) - 0.01).abs() < 1e-12);
        assert!((log_step(12) + 0.02).abs() < 1e-12, "crash regime step");
        assert!((log_step(25) - 0.01).abs() < 1e-12, "recovery step");
    }

    #[test]
    fn regimes_must_be_sorted() {
        let mut spec = SyntheticSpec::uniform(1, 30, 0.01, 0.0, 1);
        spec.regimes = vec![
            Regime { start_day: 20, drift_mult: 1.0, vol_mult: 1.0 },
            Regime { start_day: 10, drift_mult: 1.0, vol_mult: 1.0 },
        ];
        assert!(matches!(
            generate_synthetic(&spec),
            Err(DataError::InvalidSpec(_))
        ));
    }

    #[test]
    fn csv_round_trip_preserves_every_number() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = SyntheticSpec::uniform(3, 20, 0.0007, 0.015, 42);
        spec.classes = vec![AssetClass::Equity, AssetClass::BondLong, AssetClass::Gold];
        let mut panel = generate_synthetic(&spec).unwrap();
        panel.volume[1] = Some((0..20).map(|t| 1000.0 + t as f64 * 3.5).collect());

        let data_path = dir.path().join("panel.csv");
        let map_path = dir.path().join("classes.csv");
        write_panel_csv(&panel, &data_path).unwrap();
        write_class_map(&panel, &map_path).unwrap();
        let map = load_class_map(&map_path).unwrap();
        let back = load_panel_csv(&data_path, &map).unwrap();
        assert_eq!(back, panel);
    }

    #[test]
    fn misaligned_panel_names_the_gap() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "date,asset,close,volume\n\
             2020-01-01,aaa,100,\n2020-01-01,bbb,50,\n\
             2020-01-02,aaa,101,\n",
        )
        .unwrap();
        let map = BTreeMap::from([
            ("aaa".to_string(), AssetClass::Equity),
            ("bbb".to_string(), AssetClass::BondLong),
        ]);
        match load_panel_csv(&path, &map) {
            Err(DataError::MisalignedDates { asset, date }) => {
                assert_eq!(asset, "bbb");
                assert_eq!(date, NaiveDate::from_ymd_opt(2020, 1, 2).unwrap());
            }
            other => panic!("expected misalignment, got {other:?}"),
        }
    }

    #[test]
    fn bad_rows_are_rejected_with_context() {
        let dir = tempfile::tempdir().unwrap();
        let map = BTreeMap::from([("aaa".to_string(), AssetClass::Equity)]);

        let neg = dir.path().join("neg.csv");
        std::fs::write(&neg, "date,asset,close,volume\n2020-01-01,aaa,-3,\n").unwrap();
        assert!(matches!(
            load_panel_csv(&neg, &map),
            Err(DataError::NonPositivePrice { .. })
        ));

        let garbled = dir.path().join("garbled.csv");
        std::fs::write(&garbled, "date,asset,close,volume\n2020-01-01,aaa,abc,\n").unwrap();
        match load_panel_csv(&garbled, &map) {
            Err(DataError::ParseError { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        let unknown = dir.path().join("unknown.csv");
        std::fs::write(&unknown, "date,asset,close,volume\n2020-01-01,zzz,10,\n").unwrap();
        assert!(matches!(
            load_panel_csv(&unknown, &map),
            Err(DataError::UnknownAssetClass(a)) if a == "zzz"
        ));

        assert!(matches!(
            load_panel_csv(Path::new("/nonexistent/=absent=.csv"), &map),
            Err(DataError::FileNotFound(_))
        ));
    }

    #[test]
    fn split_leaves_gap_days_in_neither_panel() {
        let spec = SyntheticSpec::uniform(2, 30, 0.0, 0.01, 8);
        let panel = generate_synthetic(&spec).unwrap();
        let train_end = panel.dates[9];
        let test_start = panel.dates[14];
        let (train, test) = split_panel(&panel, train_end, test_start).unwrap();
        assert_eq!(train.n_days(), 10);
        assert_eq!(test.n_days(), 16);
        for d in &panel.dates[10..14] {
            assert!(train.date_index(*d).is_none());
            assert!(test.date_index(*d).is_none());
        }
        assert!(matches!(
            split_panel(&panel, train_end, train_end),
            Err(DataError::InvalidRange(_))
        ));
    }

    #[test]
    fn slice_panel_keeps_rows_aligned() {
        let mut spec = SyntheticSpec::uniform(2, 20, 0.0, 0.01, 8);
        spec.classes = vec![AssetClass::Equity, AssetClass::Gold];
        let panel = generate_synthetic(&spec).unwrap();
        let sub = slice_panel(&panel, 5, 12).unwrap();
        assert_eq!(sub.n_days(), 7);
        assert_eq!(sub.dates, panel.dates[5..12]);
        assert_eq!(sub.close, panel.close[5..12]);
        assert_eq!(sub.assets, panel.assets);
        assert!(slice_panel(&panel, 12, 12).is_err());
        assert!(slice_panel(&panel, 0, 21).is_err());
    }
}
