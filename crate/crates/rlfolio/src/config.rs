//! Flat `key = value` run configuration.
//!
//! A config file is plain text: one `key = value` pair per line, `#` at the
//! start of a line for comments, blank lines ignored. Keys are dotted
//! (`ppo.epsilon = 0.2`). Three keys are mandatory — `data`, `model`, and
//! `seed` — and every other key has a documented default. Unknown keys,
//! duplicate keys, and keys for a data source that is not selected are hard
//! errors: a config that parses is a config whose every line took effect.
//!
//! ## Key reference
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `data` | — | `csv` or `synthetic` |
//! | `csv.prices` | — | price panel CSV (`date,asset,close,volume`) |
//! | `csv.classes` | — | asset-class map CSV (`asset,class`) |
//! | `synth.assets` | `5` | number of synthetic assets |
//! | `synth.days` | `756` | trading days to generate |
//! | `synth.drift` | `0.0002` | daily log drift; scalar or per-asset list |
//! | `synth.vol` | `0.01` | daily log volatility; scalar or list |
//! | `synth.classes` | `equity` | class per asset; scalar or list |
//! | `synth.regimes` | none | `start:drift_mult:vol_mult` triples, `;`-separated |
//! | `synth.start` | `2000-01-03` | calendar date of the first row |
//! | `synth.seed` | derived | panel seed; defaults to a stream of `seed` |
//! | `model` | — | `actor_only`, `actor_critic`, `ppo`, `reward_clip`, `equal_weight`, `sixty_forty`, `all_weather`, or `index:<asset>` |
//! | `window_length` | `40` | feature window days |
//! | `use_volume` | `false` | include the volume channel |
//! | `nn.hidden` | `32` | policy hidden widths, comma list or `none` |
//! | `train.epochs` | `200` | training epochs (policy-gradient trainers) |
//! | `train.episodes` | `4` | episodes per epoch |
//! | `train.episode_length` | `252` | days per episode |
//! | `train.action_period` | `21` | days each action is held |
//! | `train.learning_rate` | `0.001` | actor Adam step size |
//! | `train.start` / `train.end` | whole panel | training date range (inclusive) |
//! | `mixing` | `1.0,0.2,0.05` | return, Sharpe, concentration-penalty weights |
//! | `gamma` | `0.99` | critic discount (actor-critic and PPO) |
//! | `critic.learning_rate` | `0.001` | critic Adam step size |
//! | `critic.hidden` | `32` | critic hidden widths, comma list or `none` |
//! | `ppo.iterations` | `50` | outer collect/update iterations |
//! | `ppo.actors` | `4` | episodes collected per iteration |
//! | `ppo.horizon` | `8` | decisions per episode |
//! | `ppo.epsilon` | `0.2` | surrogate ratio clip radius |
//! | `ppo.c1` | `0.5` | value-loss coefficient |
//! | `ppo.c2` | `0.01` | entropy-bonus coefficient |
//! | `ppo.epochs` | `4` | passes over each collected batch |
//! | `ppo.minibatch` | `64` | steps per gradient update |
//! | `ppo.normalize_advantages` | `true` | standardize advantages per batch |
//! | `clip.lower` / `clip.upper` | none | reward-clip bounds; `none` or a float |
//! | `clip.mode` | `value` | clamp `value`s or day-over-day `ratio`s |
//! | `test.start` / `test.end` | whole panel | backtest date range (inclusive) |
//! | `seed` | — | master seed; every random stream derives from it |
//!
//! Hyperparameter keys for models other than the selected one are accepted
//! and ignored (they have no effect on the run), so one file can describe a
//! whole family of runs that differ only in `model`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::RngCore;

use crate::algo::{ActorConfig, ActorCriticConfig, ClipMode, ClipSpec, PpoConfig};
use crate::data::{
    default_start, generate_synthetic, load_class_map, load_panel_csv, AssetClass, AssetPanel,
    DataError, Regime, SyntheticSpec,
};

/// Errors raised while reading or applying a config file.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key(s): {0}")]
    UnknownKeys(String),
    #[error("config line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("missing mandatory config key {0:?}")]
    MissingKey(&'static str),
    #[error("config key {key:?}: {message}")]
    InvalidValue { key: String, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Where the price panel comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { prices: PathBuf, classes: PathBuf },
    Synthetic(SynthSource),
}

/// Synthetic-panel knobs as written in the config; [`RunConfig::panel`]
/// expands them into a full generation spec.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSource {
    pub assets: usize,
    pub days: usize,
    pub drift: Vec<f64>,
    pub vol: Vec<f64>,
    pub classes: Vec<AssetClass>,
    pub regimes: Vec<Regime>,
    pub start: NaiveDate,
    /// Explicit panel seed; when absent the panel seed is drawn from the
    /// master seed's `"data"` stream.
    pub seed: Option<u64>,
}

/// The strategy a run trains and/or backtests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelChoice {
    ActorOnly,
    ActorCritic,
    Ppo,
    RewardClip,
    EqualWeight,
    SixtyForty,
    AllWeather,
    Index(String),
}

impl ModelChoice {
    pub fn parse(s: &str) -> Option<ModelChoice> {
        match s {
            "actor_only" => Some(ModelChoice::ActorOnly),
            "actor_critic" => Some(ModelChoice::ActorCritic),
            "ppo" => Some(ModelChoice::Ppo),
            "reward_clip" => Some(ModelChoice::RewardClip),
            "equal_weight" => Some(ModelChoice::EqualWeight),
            "sixty_forty" => Some(ModelChoice::SixtyForty),
            "all_weather" => Some(ModelChoice::AllWeather),
            _ => s.strip_prefix("index:").map(|a| ModelChoice::Index(a.to_string())),
        }
    }

    /// Name used for output files and report rows.
    pub fn name(&self) -> String {
        match self {
            ModelChoice::ActorOnly => "actor_only".into(),
            ModelChoice::ActorCritic => "actor_critic".into(),
            ModelChoice::Ppo => "ppo".into(),
            ModelChoice::RewardClip => "reward_clip".into(),
            ModelChoice::EqualWeight => "equal_weight".into(),
            ModelChoice::SixtyForty => "sixty_forty".into(),
            ModelChoice::AllWeather => "all_weather".into(),
            ModelChoice::Index(a) => format!("index_{a}"),
        }
    }

    /// Whether the model has parameters to fit (and so needs a checkpoint).
    pub fn is_trainable(&self) -> bool {
        matches!(
            self,
            ModelChoice::ActorOnly
                | ModelChoice::ActorCritic
                | ModelChoice::Ppo
                | ModelChoice::RewardClip
        )
    }
}

/// A fully parsed run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub model: ModelChoice,
    pub window_length: usize,
    pub use_volume: bool,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub episodes: usize,
    pub episode_length: usize,
    pub action_period: usize,
    pub learning_rate: f64,
    pub train_start: Option<NaiveDate>,
    pub train_end: Option<NaiveDate>,
    pub mixing: [f64; 3],
    pub gamma: f64,
    pub critic_learning_rate: f64,
    pub critic_hidden: Vec<usize>,
    pub ppo_iterations: usize,
    pub ppo_actors: usize,
    pub ppo_horizon: usize,
    pub ppo_epsilon: f64,
    pub ppo_c1: f64,
    pub ppo_c2: f64,
    pub ppo_epochs: usize,
    pub ppo_minibatch: usize,
    pub ppo_normalize_advantages: bool,
    pub clip: ClipSpec,
    pub test_start: Option<NaiveDate>,
    pub test_end: Option<NaiveDate>,
    pub seed: u64,
}

impl RunConfig {
    /// Reads and parses a config file.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        RunConfig::parse(&text)
    }

    /// Parses config text. Every line must be blank, a `#` comment, or a
    /// `key = value` pair whose key this module documents.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut pairs: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected 'key = value', found {trimmed:?}"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line, message: "empty key".into() });
            }
            if pairs.contains_key(&key) {
                return Err(ConfigError::DuplicateKey { line, key });
            }
            pairs.insert(key, (line, value.trim().to_string()));
        }
        let mut p = Pairs(pairs);

        let data = match p.take("data")?.ok_or(ConfigError::MissingKey("data"))?.as_str() {
            "csv" => {
                let prices = p.take("csv.prices")?.ok_or(ConfigError::MissingKey("csv.prices"))?;
                let classes =
                    p.take("csv.classes")?.ok_or(ConfigError::MissingKey("csv.classes"))?;
                DataSource::Csv { prices: prices.into(), classes: classes.into() }
            }
            "synthetic" => {
                let assets = p.usize("synth.assets", 5)?;
                DataSource::Synthetic(SynthSource {
                    assets,
                    days: p.usize("synth.days", 756)?,
                    drift: p.f64_list("synth.drift", assets, 0.0002)?,
                    vol: p.f64_list("synth.vol", assets, 0.01)?,
                    classes: p.class_list("synth.classes", assets)?,
                    regimes: p.regimes("synth.regimes")?,
                    start: p.date("synth.start")?.unwrap_or_else(default_start),
                    seed: p.opt_u64("synth.seed")?,
                })
            }
            other => {
                return Err(ConfigError::InvalidValue {
                    key: "data".into(),
                    message: format!("expected 'csv' or 'synthetic', found {other:?}"),
                })
            }
        };

        let model_text = p.take("model")?.ok_or(ConfigError::MissingKey("model"))?;
        let model = ModelChoice::parse(&model_text).ok_or_else(|| ConfigError::InvalidValue {
            key: "model".into(),
            message: format!(
                "unknown model {model_text:?}; expected actor_only, actor_critic, ppo, \
                 reward_clip, equal_weight, sixty_forty, all_weather, or index:<asset>"
            ),
        })?;

        let clip = ClipSpec {
            lower: p.opt_f64("clip.lower")?,
            upper: p.opt_f64("clip.upper")?,
            mode: match p.take("clip.mode")?.as_deref() {
                None | Some("value") => ClipMode::Value,
                Some("ratio") => ClipMode::Ratio,
                Some(other) => {
                    return Err(ConfigError::InvalidValue {
                        key: "clip.mode".into(),
                        message: format!("expected 'value' or 'ratio', found {other:?}"),
                    })
                }
            },
        };

        let config = RunConfig {
            data,
            model,
            window_length: p.usize("window_length", 40)?,
            use_volume: p.bool("use_volume", false)?,
            hidden: p.usize_list("nn.hidden", vec![32])?,
            epochs: p.usize("train.epochs", 200)?,
            episodes: p.usize("train.episodes", 4)?,
            episode_length: p.usize("train.episode_length", 252)?,
            action_period: p.usize("train.action_period", 21)?,
            learning_rate: p.f64("train.learning_rate", 1e-3)?,
            train_start: p.date("train.start")?,
            train_end: p.date("train.end")?,
            mixing: p.mixing("mixing")?,
            gamma: p.f64("gamma", 0.99)?,
            critic_learning_rate: p.f64("critic.learning_rate", 1e-3)?,
            critic_hidden: p.usize_list("critic.hidden", vec![32])?,
            ppo_iterations: p.usize("ppo.iterations", 50)?,
            ppo_actors: p.usize("ppo.actors", 4)?,
            ppo_horizon: p.usize("ppo.horizon", 8)?,
            ppo_epsilon: p.f64("ppo.epsilon", 0.2)?,
            ppo_c1: p.f64("ppo.c1", 0.5)?,
            ppo_c2: p.f64("ppo.c2", 0.01)?,
            ppo_epochs: p.usize("ppo.epochs", 4)?,
            ppo_minibatch: p.usize("ppo.minibatch", 64)?,
            ppo_normalize_advantages: p.bool("ppo.normalize_advantages", true)?,
            clip,
            test_start: p.date("test.start")?,
            test_end: p.date("test.end")?,
            seed: p.opt_u64("seed")?.ok_or(ConfigError::MissingKey("seed"))?,
        };

        if !p.0.is_empty() {
            let listing = p
                .0
                .iter()
                .map(|(k, (line, _))| format!("{k:?} (line {line})"))
                .collect::<Vec<_>>()
                .join(", ");
            return Err(ConfigError::UnknownKeys(listing));
        }
        Ok(config)
    }

    /// Builds the price panel this config describes. Synthetic panels are
    /// seeded from `synth.seed` when given, otherwise from the master seed's
    /// `"data"` stream — so two runs that share a config share a panel.
    pub fn panel(&self) -> Result<AssetPanel, ConfigError> {
        match &self.data {
            DataSource::Csv { prices, classes } => {
                let map = load_class_map(classes)?;
                Ok(load_panel_csv(prices, &map)?)
            }
            DataSource::Synthetic(s) => {
                let seed = s
                    .seed
                    .unwrap_or_else(|| crate::rng::stream(self.seed, "data").next_u64());
                Ok(generate_synthetic(&SyntheticSpec {
                    n_assets: s.assets,
                    n_days: s.days,
                    drift: s.drift.clone(),
                    vol: s.vol.clone(),
                    classes: s.classes.clone(),
                    regimes: s.regimes.clone(),
                    seed,
                    start: s.start,
                })?)
            }
        }
    }

    pub fn actor_config(&self) -> ActorConfig {
        ActorConfig {
            epochs: self.epochs,
            episodes_per_epoch: self.episodes,
            episode_length: self.episode_length,
            action_period: self.action_period,
            mixing: self.mixing,
            learning_rate: self.learning_rate,
        }
    }

    pub fn actor_critic_config(&self) -> ActorCriticConfig {
        ActorCriticConfig {
            epochs: self.epochs,
            episodes_per_epoch: self.episodes,
            episode_length: self.episode_length,
            action_period: self.action_period,
            gamma: self.gamma,
            mixing: self.mixing,
            actor_lr: self.learning_rate,
            critic_lr: self.critic_learning_rate,
            critic_hidden: self.critic_hidden.clone(),
        }
    }

    pub fn ppo_config(&self) -> PpoConfig {
        PpoConfig {
            iterations: self.ppo_iterations,
            actors: self.ppo_actors,
            horizon: self.ppo_horizon,
            action_period: self.action_period,
            epsilon: self.ppo_epsilon,
            c1: self.ppo_c1,
            c2: self.ppo_c2,
            epochs: self.ppo_epochs,
            minibatch: self.ppo_minibatch,
            gamma: self.gamma,
            mixing: self.mixing,
            learning_rate: self.learning_rate,
            critic_hidden: self.critic_hidden.clone(),
            normalize_advantages: self.ppo_normalize_advantages,
        }
    }
}

/// Panel-day indices `[start, end)` for an inclusive date range: `start` maps
/// to the first trading day on or after it, `end` to just past the last
/// trading day on or before it. `None` bounds take the whole panel.
pub fn resolve_range(
    panel: &AssetPanel,
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
) -> Result<(usize, usize), ConfigError> {
    let lo = match start {
        Some(d) => panel.dates.partition_point(|x| *x < d),
        None => 0,
    };
    let hi = match end {
        Some(d) => panel.dates.partition_point(|x| *x <= d),
        None => panel.n_days(),
    };
    if lo >= hi {
        return Err(ConfigError::InvalidValue {
            key: "date range".into(),
            message: format!(
                "no trading days between {} and {} (panel covers {} to {})",
                start.map_or("panel start".into(), |d| d.to_string()),
                end.map_or("panel end".into(), |d| d.to_string()),
                panel.dates.first().unwrap(),
                panel.dates.last().unwrap(),
            ),
        });
    }
    Ok((lo, hi))
}

/// Key/value pairs not yet claimed by the parser.
struct Pairs(BTreeMap<String, (usize, String)>);

impl Pairs {
    fn take(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        Ok(self.0.remove(key).map(|(_, v)| v))
    }

    fn invalid<T>(key: &str, message: String) -> Result<T, ConfigError> {
        Err(ConfigError::InvalidValue { key: key.into(), message })
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.take(key)? {
            None => Ok(default),
            Some(v) => match v.parse() {
                Ok(n) => Ok(n),
                Err(_) => Self::invalid(key, format!("expected a non-negative integer, found {v:?}")),
            },
        }
    }

    fn opt_u64(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.take(key)? {
            None => Ok(None),
            Some(v) => match v.parse() {
                Ok(n) => Ok(Some(n)),
                Err(_) => Self::invalid(key, format!("expected an integer seed, found {v:?}")),
            },
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.opt_f64_required(key)? {
            None => Ok(default),
            Some(v) => Ok(v),
        }
    }

    /// A float, `none`, or absent — used for the optional clip bounds.
    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key)? {
            None => Ok(None),
            Some(v) if v == "none" => Ok(None),
            Some(v) => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Some(x)),
                _ => Self::invalid(key, format!("expected a finite number or 'none', found {v:?}")),
            },
        }
    }

    fn opt_f64_required(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key)? {
            None => Ok(None),
            Some(v) => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Some(x)),
                _ => Self::invalid(key, format!("expected a finite number, found {v:?}")),
            },
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.take(key)?.as_deref() {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Self::invalid(key, format!("expected 'true' or 'false', found {v:?}")),
        }
    }

    fn date(&mut self, key: &str) -> Result<Option<NaiveDate>, ConfigError> {
        match self.take(key)? {
            None => Ok(None),
            Some(v) => match NaiveDate::parse_from_str(&v, "%Y-%m-%d") {
                Ok(d) => Ok(Some(d)),
                Err(_) => Self::invalid(key, format!("expected a YYYY-MM-DD date, found {v:?}")),
            },
        }
    }

    /// A comma list of floats, broadcast to `n` when a single value is given.
    fn f64_list(&mut self, key: &str, n: usize, default: f64) -> Result<Vec<f64>, ConfigError> {
        let Some(v) = self.take(key)? else {
            return Ok(vec![default; n]);
        };
        let parts: Vec<f64> = v
            .split(',')
            .map(|p| {
                p.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or(())
            })
            .collect::<Result<_, _>>()
            .map_err(|()| ConfigError::InvalidValue {
                key: key.into(),
                message: format!("expected comma-separated numbers, found {v:?}"),
            })?;
        Self::broadcast(key, parts, n)
    }

    /// A comma list of asset classes, broadcast like [`Pairs::f64_list`].
    fn class_list(&mut self, key: &str, n: usize) -> Result<Vec<AssetClass>, ConfigError> {
        let Some(v) = self.take(key)? else {
            return Ok(vec![AssetClass::Equity; n]);
        };
        let parts: Vec<AssetClass> = v
            .split(',')
            .map(|p| AssetClass::parse(p.trim()).ok_or(p))
            .collect::<Result<_, _>>()
            .map_err(|p| ConfigError::InvalidValue {
                key: key.into(),
                message: format!(
                    "unknown asset class {:?}; expected equity, bond_long, bond_intermediate, \
                     gold, or commodity",
                    p.trim()
                ),
            })?;
        Self::broadcast(key, parts, n)
    }

    fn broadcast<T: Clone>(key: &str, parts: Vec<T>, n: usize) -> Result<Vec<T>, ConfigError> {
        if parts.len() == n {
            Ok(parts)
        } else if parts.len() == 1 {
            Ok(vec![parts[0].clone(); n])
        } else {
            Self::invalid(key, format!("expected 1 or {n} entries, found {}", parts.len()))
        }
    }

    /// Comma list of layer widths; `none` means no hidden layers.
    fn usize_list(&mut self, key: &str, default: Vec<usize>) -> Result<Vec<usize>, ConfigError> {
        match self.take(key)? {
            None => Ok(default),
            Some(v) if v == "none" => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|p| {
                    p.trim().parse::<usize>().ok().filter(|w| *w > 0).ok_or_else(|| {
                        ConfigError::InvalidValue {
                            key: key.into(),
                            message: format!(
                                "expected comma-separated positive widths or 'none', found {v:?}"
                            ),
                        }
                    })
                })
                .collect(),
        }
    }

    /// Exactly three comma-separated reward-mixing weights.
    fn mixing(&mut self, key: &str) -> Result<[f64; 3], ConfigError> {
        let Some(v) = self.take(key)? else {
            return Ok([1.0, 0.2, 0.05]);
        };
        let parts: Vec<f64> = v
            .split(',')
            .map(|p| p.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or(()))
            .collect::<Result<_, _>>()
            .map_err(|()| ConfigError::InvalidValue {
                key: key.into(),
                message: format!("expected three comma-separated numbers, found {v:?}"),
            })?;
        match <[f64; 3]>::try_from(parts) {
            Ok(m) => Ok(m),
            Err(parts) => Self::invalid(
                key,
                format!("expected exactly three weights, found {}", parts.len()),
            ),
        }
    }

    /// `start:drift_mult:vol_mult` triples separated by `;`.
    fn regimes(&mut self, key: &str) -> Result<Vec<Regime>, ConfigError> {
        let Some(v) = self.take(key)? else {
            return Ok(Vec::new());
        };
        v.split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|triple| {
                let parts: Vec<&str> = triple.split(':').map(str::trim).collect();
                let bad = || ConfigError::InvalidValue {
                    key: key.into(),
                    message: format!(
                        "expected 'start_day:drift_mult:vol_mult', found {:?}",
                        triple.trim()
                    ),
                };
                if parts.len() != 3 {
                    return Err(bad());
                }
                Ok(Regime {
                    start_day: parts[0].parse().map_err(|_| bad())?,
                    drift_mult: parts[1].parse().map_err(|_| bad())?,
                    vol_mult: parts[2].parse().map_err(|_| bad())?,
                })
            })
            .collect()
    }
}
