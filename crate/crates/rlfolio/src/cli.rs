//! Command-line pipeline: config → data → training → backtest → reports.
//!
//! Five subcommands cover the workflow:
//!
//! * `train` — fit the configured model; writes `checkpoint_<name>.txt` and
//!   `trainlog_<name>.csv`.
//! * `backtest` — run one strategy over the test range; writes
//!   `equity_<name>.csv`, `weights_<name>.csv`, `classes_<name>.csv`, and a
//!   one-row `comparison.csv`.
//! * `compare` — several configs over one shared panel and test range;
//!   trainable models are trained in-process; writes `comparison.csv` and a
//!   merged `equity_merged.csv` for plotting.
//! * `sweep` — one reward-clip run per `lower:upper` bound pair, identically
//!   seeded; per-cell logs and checkpoints plus the merged comparison.
//! * `synth` — emit the configured synthetic panel as `panel.csv` plus its
//!   `classes.csv` asset-class map.
//!
//! Every command exits 0 exactly when all of its output files were written;
//! any failure prints an error and exits nonzero. Identical config, seed,
//! and inputs yield byte-identical outputs.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::algo::{
    train_actor_critic, train_actor_only, train_ppo, train_reward_clip, AlgoError, ClipSpec,
    MarketData, TrainLog,
};
use crate::backtest::{
    compare_results, run_backtest, write_classes_csv, write_equity_csv, write_weights_csv,
    BacktestError, BacktestResult, Strategy,
};
use crate::config::{resolve_range, ConfigError, DataSource, ModelChoice, RunConfig};
use crate::data::{
    build_windows, daily_returns, slice_panel, write_class_map, write_panel_csv, AssetPanel,
    DataError,
};
use crate::nn::{self, LayerSpec, NnError, OutputHead, ParamVector};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("model {0:?} is not trainable; train expects actor_only, actor_critic, ppo, or reward_clip")]
    NotTrainable(String),
    #[error("model {0:?} is trained from data; pass --checkpoint with its checkpoint file")]
    MissingCheckpoint(String),
    #[error(
        "checkpoint does not fit the config: the config implies layer sizes {expected:?} but \
         the checkpoint holds {found:?}"
    )]
    CheckpointMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("sweep requires model = reward_clip, but the config selects {0:?}")]
    NotSweepable(String),
    #[error("synth requires data = synthetic, but the config reads a CSV panel")]
    NotSynthetic,
    #[error("invalid sweep grid: {0}")]
    Grid(String),
    #[error("configs disagree: {0}")]
    MismatchedRanges(String),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Algo(#[from] AlgoError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
}

/// Portfolio training and backtesting over daily close panels.
#[derive(Debug, Parser)]
#[command(name = "rlfolio", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the configured model and write its checkpoint and epoch log.
    Train {
        /// Run configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if absent).
        #[arg(long)]
        out: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Backtest the configured strategy over its test range.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint file; required when the model is trainable.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train and backtest several configs over one shared panel and range.
    Compare {
        /// One config file per strategy; they must share data and test range.
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override every config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one reward-clip model per bound pair and compare them.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Bound pairs `lower:upper`, comma-separated; leave a side empty
        /// for no bound there (`-0.4:0.4,-0.4:,:0.4`).
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the configured synthetic panel and its class map as CSVs.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Executes a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config, out, seed } => cmd_train(&config, &out, seed),
        Command::Backtest { config, checkpoint, out, seed } => {
            cmd_backtest(&config, checkpoint.as_deref(), &out, seed)
        }
        Command::Compare { configs, out, seed } => cmd_compare(&configs, &out, seed),
        Command::Sweep { config, grid, out, seed } => cmd_sweep(&config, &grid, &out, seed),
        Command::Synth { config, out, seed } => cmd_synth(&config, &out, seed),
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })
}

fn io_at<T>(path: &Path, result: std::io::Result<T>) -> Result<T, CliError> {
    result.map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// A model fitted in-process, ready to back-test or persist.
struct TrainedModel {
    name: String,
    policy: LayerSpec,
    params: ParamVector,
    log: TrainLog,
}

/// Head used by each trainable model's policy network.
fn policy_head(model: &ModelChoice) -> OutputHead {
    match model {
        ModelChoice::ActorOnly | ModelChoice::RewardClip => OutputHead::Softmax,
        _ => OutputHead::Softplus,
    }
}

/// Layer widths implied by a config: window inputs, hidden stack, one output
/// per asset.
fn policy_sizes(cfg: &RunConfig, input_size: usize, n_assets: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(cfg.hidden.len() + 2);
    sizes.push(input_size);
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(n_assets);
    sizes
}

/// Trains the configured model on its training date range. The training
/// panel is sliced off before windows are built, so nothing after
/// `train.end` can leak into parameters.
fn train_model(cfg: &RunConfig, panel: &AssetPanel) -> Result<TrainedModel, CliError> {
    if !cfg.model.is_trainable() {
        return Err(CliError::NotTrainable(cfg.model.name()));
    }
    let (lo, hi) = resolve_range(panel, cfg.train_start, cfg.train_end)?;
    let train_panel = slice_panel(panel, lo, hi)?;
    let windows = build_windows(&train_panel, cfg.window_length, cfg.use_volume)?;
    let returns = daily_returns(&train_panel)?;
    let data = MarketData::new(&windows, &returns);
    let policy = LayerSpec::new(
        policy_sizes(cfg, windows.input_size(), train_panel.n_assets()),
        policy_head(&cfg.model),
    );

    let (params, log) = match &cfg.model {
        ModelChoice::ActorOnly => {
            train_actor_only(&data, &policy, &cfg.actor_config(), cfg.seed)?
        }
        ModelChoice::RewardClip => {
            train_reward_clip(&data, &policy, &cfg.clip, &cfg.actor_config(), cfg.seed)?
        }
        ModelChoice::ActorCritic => {
            let (params, _heads, log) =
                train_actor_critic(&data, &policy, &cfg.actor_critic_config(), cfg.seed)?;
            (params, log)
        }
        ModelChoice::Ppo => {
            let (params, _heads, log) = train_ppo(&data, &policy, &cfg.ppo_config(), cfg.seed)?;
            (params, log)
        }
        other => return Err(CliError::NotTrainable(other.name())),
    };
    Ok(TrainedModel { name: cfg.model.name(), policy, params, log })
}

/// Persists a trained model's checkpoint and epoch log under `out`.
fn write_training_outputs(out: &Path, trained: &TrainedModel) -> Result<(), CliError> {
    let checkpoint = out.join(format!("checkpoint_{}.txt", trained.name));
    nn::save_checkpoint(&checkpoint, &trained.policy, &trained.params)?;
    println!("wrote {}", checkpoint.display());
    let log_path = out.join(format!("trainlog_{}.csv", trained.name));
    io_at(&log_path, trained.log.write_csv(&log_path))?;
    println!("wrote {}", log_path.display());
    if let Some(last) = trained.log.records.last() {
        println!(
            "trained {}: {} epochs, final objective {:.6}",
            trained.name,
            trained.log.records.len(),
            last.objective
        );
    }
    Ok(())
}

fn cmd_train(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let cfg = load_config(config, seed)?;
    let panel = cfg.panel()?;
    let trained = train_model(&cfg, &panel)?;
    ensure_dir(out)?;
    write_training_outputs(out, &trained)
}

/// Resolves the configured strategy for backtesting, loading the checkpoint
/// when the model is trained.
fn strategy_from_config(
    cfg: &RunConfig,
    input_size: usize,
    n_assets: usize,
    checkpoint: Option<&Path>,
) -> Result<Strategy, CliError> {
    if !cfg.model.is_trainable() {
        return Ok(match &cfg.model {
            ModelChoice::EqualWeight => Strategy::EqualWeight,
            ModelChoice::SixtyForty => Strategy::SixtyForty,
            ModelChoice::AllWeather => Strategy::AllWeather,
            ModelChoice::Index(a) => Strategy::Index { asset: a.clone() },
            trained => unreachable!("{trained:?} is trainable"),
        });
    }
    let path = checkpoint.ok_or_else(|| CliError::MissingCheckpoint(cfg.model.name()))?;
    let (sizes, params) = nn::load_checkpoint(path)?;
    let expected = policy_sizes(cfg, input_size, n_assets);
    if sizes != expected {
        return Err(CliError::CheckpointMismatch { expected, found: sizes });
    }
    Ok(Strategy::Model {
        name: cfg.model.name(),
        policy: LayerSpec::new(sizes, policy_head(&cfg.model)),
        params,
    })
}

/// Runs one strategy over the config's test range against the full panel
/// (feature windows may look back before `test.start`; decisions never look
/// forward).
fn backtest_strategy(
    cfg: &RunConfig,
    panel: &AssetPanel,
    strategy: &Strategy,
) -> Result<BacktestResult, CliError> {
    let (lo, hi) = resolve_range(panel, cfg.test_start, cfg.test_end)?;
    let windows;
    let windows_ref = if matches!(strategy, Strategy::Model { .. }) {
        windows = build_windows(panel, cfg.window_length, cfg.use_volume)?;
        Some(&windows)
    } else {
        None
    };
    Ok(run_backtest(panel, windows_ref, strategy, lo, hi)?)
}

/// Writes the full per-strategy report set plus the comparison table.
fn write_backtest_outputs(
    out: &Path,
    panel: &AssetPanel,
    results: &[BacktestResult],
) -> Result<(), CliError> {
    for r in results {
        let equity = out.join(format!("equity_{}.csv", r.name));
        io_at(&equity, write_equity_csv(&equity, r))?;
        println!("wrote {}", equity.display());
        let weights = out.join(format!("weights_{}.csv", r.name));
        io_at(&weights, write_weights_csv(&weights, panel, r))?;
        println!("wrote {}", weights.display());
        let classes = out.join(format!("classes_{}.csv", r.name));
        io_at(&classes, write_classes_csv(&classes, panel, r))?;
        println!("wrote {}", classes.display());
    }
    write_comparison_outputs(out, results)
}

/// Writes `comparison.csv` and the merged equity file, then prints the
/// summary with the turnover honesty diagnostic (the simulation charges no
/// transaction costs).
fn write_comparison_outputs(out: &Path, results: &[BacktestResult]) -> Result<(), CliError> {
    let table = compare_results(results)?;
    let comparison = out.join("comparison.csv");
    io_at(&comparison, table.write_csv(&comparison))?;
    println!("wrote {}", comparison.display());

    let merged = out.join("equity_merged.csv");
    io_at(&merged, write_merged_equity(&merged, results))?;
    println!("wrote {}", merged.display());

    for r in results {
        println!(
            "{}: final equity {:.4} over {} days, mean rebalance turnover {:.4} (costless)",
            r.name,
            r.equity.final_value(),
            r.equity.values.len(),
            r.mean_turnover
        );
    }
    Ok(())
}

/// `date,<name>,...` equity columns for plotting several strategies at once.
fn write_merged_equity(path: &Path, results: &[BacktestResult]) -> std::io::Result<()> {
    use std::fmt::Write as _;
    let mut out = String::from("date");
    for r in results {
        let _ = write!(out, ",{}", r.name);
    }
    out.push('\n');
    if let Some(first) = results.first() {
        for (i, date) in first.equity.dates.iter().enumerate() {
            let _ = write!(out, "{date}");
            for r in results {
                let _ = write!(out, ",{}", r.equity.values[i]);
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out)
}

fn cmd_backtest(
    config: &Path,
    checkpoint: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let cfg = load_config(config, seed)?;
    let panel = cfg.panel()?;
    let channels = if cfg.use_volume { 2 } else { 1 };
    let windows_input = cfg.window_length * panel.n_assets() * channels;
    let strategy = strategy_from_config(&cfg, windows_input, panel.n_assets(), checkpoint)?;
    let result = backtest_strategy(&cfg, &panel, &strategy)?;
    ensure_dir(out)?;
    write_backtest_outputs(out, &panel, std::slice::from_ref(&result))
}

fn cmd_compare(configs: &[PathBuf], out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let parsed: Vec<RunConfig> =
        configs.iter().map(|p| load_config(p, seed)).collect::<Result<_, _>>()?;
    let panel = parsed[0].panel()?;
    for (path, cfg) in configs.iter().zip(&parsed).skip(1) {
        if cfg.panel()? != panel {
            return Err(CliError::MismatchedRanges(format!(
                "{} describes a different price panel than {}",
                path.display(),
                configs[0].display()
            )));
        }
    }
    let range = resolve_range(&panel, parsed[0].test_start, parsed[0].test_end)?;
    for (path, cfg) in configs.iter().zip(&parsed).skip(1) {
        let r = resolve_range(&panel, cfg.test_start, cfg.test_end)?;
        if r != range {
            return Err(CliError::MismatchedRanges(format!(
                "test range of {} is days [{}, {}) but {} uses [{}, {})",
                path.display(),
                r.0,
                r.1,
                configs[0].display(),
                range.0,
                range.1
            )));
        }
    }
    let mut names: Vec<String> = parsed.iter().map(|c| c.model.name()).collect();
    names.sort();
    names.dedup();
    if names.len() != parsed.len() {
        return Err(CliError::MismatchedRanges(
            "two configs select the same model; rows would be ambiguous".into(),
        ));
    }

    ensure_dir(out)?;
    let mut results = Vec::with_capacity(parsed.len());
    for cfg in &parsed {
        let strategy = if cfg.model.is_trainable() {
            let trained = train_model(cfg, &panel)?;
            write_training_outputs(out, &trained)?;
            Strategy::Model { name: trained.name, policy: trained.policy, params: trained.params }
        } else {
            strategy_from_config(cfg, 0, panel.n_assets(), None)?
        };
        results.push(backtest_strategy(cfg, &panel, &strategy)?);
    }
    write_comparison_outputs(out, &results)
}

/// Parses the sweep grid: comma-separated `lower:upper` cells, either side
/// empty for an open bound, clamp mode taken from the config.
fn parse_grid(grid: &str, cfg: &RunConfig) -> Result<Vec<ClipSpec>, CliError> {
    let mut specs = Vec::new();
    for cell in grid.split(',').map(str::trim).filter(|c| !c.is_empty()) {
        let (lo, hi) = cell.split_once(':').ok_or_else(|| {
            CliError::Grid(format!("cell {cell:?} is not of the form 'lower:upper'"))
        })?;
        let parse_bound = |s: &str| -> Result<Option<f64>, CliError> {
            let s = s.trim();
            if s.is_empty() || s == "none" {
                return Ok(None);
            }
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(CliError::Grid(format!("bad bound {s:?} in cell {cell:?}"))),
            }
        };
        let spec =
            ClipSpec { lower: parse_bound(lo)?, upper: parse_bound(hi)?, mode: cfg.clip.mode };
        spec.validate()?;
        specs.push(spec);
    }
    if specs.is_empty() {
        return Err(CliError::Grid("the grid has no cells".into()));
    }
    let mut labels: Vec<String> = specs.iter().map(ClipSpec::label).collect();
    labels.sort();
    labels.dedup();
    if labels.len() != specs.len() {
        return Err(CliError::Grid("two grid cells have identical bounds".into()));
    }
    Ok(specs)
}

fn cmd_sweep(config: &Path, grid: &str, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let cfg = load_config(config, seed)?;
    if cfg.model != ModelChoice::RewardClip {
        return Err(CliError::NotSweepable(cfg.model.name()));
    }
    let specs = parse_grid(grid, &cfg)?;
    let panel = cfg.panel()?;

    let mut results = Vec::with_capacity(specs.len());
    ensure_dir(out)?;
    for spec in &specs {
        // Every cell trains from the same seed; the bounds are the only
        // difference between runs.
        let cell_cfg = RunConfig { clip: spec.clone(), ..cfg.clone() };
        let mut trained = train_model(&cell_cfg, &panel)?;
        trained.name = spec.label();
        write_training_outputs(out, &trained)?;
        let strategy =
            Strategy::Model { name: trained.name, policy: trained.policy, params: trained.params };
        results.push(backtest_strategy(&cell_cfg, &panel, &strategy)?);
    }
    write_comparison_outputs(out, &results)
}

fn cmd_synth(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let cfg = load_config(config, seed)?;
    if !matches!(cfg.data, DataSource::Synthetic(_)) {
        return Err(CliError::NotSynthetic);
    }
    let panel = cfg.panel()?;
    ensure_dir(out)?;
    let panel_path = out.join("panel.csv");
    write_panel_csv(&panel, &panel_path)?;
    println!("wrote {}", panel_path.display());
    let classes_path = out.join("classes.csv");
    write_class_map(&panel, &classes_path)?;
    println!("wrote {}", classes_path.display());
    Ok(())
}
