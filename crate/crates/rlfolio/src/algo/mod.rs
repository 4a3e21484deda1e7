//! Training algorithms for the allocation policies.
//!
//! Four trainers share this module's common machinery:
//!
//! * [`actor::train_actor_only`] — deterministic rollouts, exact gradients of
//!   the mixed reward through the softmax policy head.
//! * [`actor::train_reward_clip`] — the same optimizer with per-day rewards
//!   clamped by a [`ClipSpec`] before aggregation.
//! * [`critic::train_actor_critic`] — stochastic Dirichlet rollouts scored by
//!   decomposed value heads; the actor ascends a score-function gradient
//!   weighted by the summed per-head advantage.
//! * [`ppo::train_ppo`] — clipped-ratio surrogate with value and entropy
//!   terms, optimized over minibatches for several epochs per batch.
//!
//! Every trainer produces a [`TrainLog`] with one row per optimization epoch
//! (for PPO, per outer iteration) so runs can be compared across policies and
//! replayed deterministically from a seed.

pub mod actor;
pub mod critic;
pub mod ppo;

pub use actor::{train_actor_only, train_reward_clip, ActorConfig};
pub use critic::{critic_loss, critic_targets, train_actor_critic, ActorCriticConfig, CriticHeads};
pub use ppo::{ppo_full_loss, ppo_surrogate, train_ppo, PpoConfig, PpoStep};

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;

use crate::data::{ReturnsMatrix, WindowSet};
use crate::env::EnvError;
use crate::nn::NnError;

/// Number of reward components tracked by the decomposed critics
/// (return, risk-adjusted return, concentration penalty).
pub const N_REWARD_COMPONENTS: usize = 3;

/// When a ratio-mode clip would divide by a prior-day reward smaller than
/// this in magnitude, the day falls back to clamping the raw value instead.
pub const RATIO_GUARD: f64 = 1e-8;

/// Errors produced by the training algorithms.
#[derive(Debug, thiserror::Error)]
pub enum AlgoError {
    /// A clip range whose lower bound does not sit strictly below its upper bound.
    #[error("clip lower bound {lower} must be strictly below upper bound {upper}")]
    RangeOutOfBounds { lower: f64, upper: f64 },
    /// A hyperparameter combination that cannot be trained with.
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    /// Episode construction or rollout failure.
    #[error(transparent)]
    Env(#[from] EnvError),
    /// Network evaluation failure.
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Whether a [`ClipSpec`] clamps the per-day reward itself or the ratio of
/// consecutive per-day rewards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipMode {
    /// Clamp each day's portfolio reward directly.
    Value,
    /// Clamp the ratio of today's reward to yesterday's; days where the
    /// previous reward is within [`RATIO_GUARD`] of zero clamp the raw value.
    Ratio,
}

/// An optional two-sided clamp applied to per-day rewards during training.
///
/// Either bound may be absent; with both absent the clamp is the identity and
/// training is bit-for-bit the unclipped optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipSpec {
    /// Inclusive lower bound, if any.
    pub lower: Option<f64>,
    /// Inclusive upper bound, if any.
    pub upper: Option<f64>,
    /// What quantity the bounds apply to.
    pub mode: ClipMode,
}

impl ClipSpec {
    /// A spec with no bounds: applying it never changes a value.
    pub fn none() -> Self {
        ClipSpec { lower: None, upper: None, mode: ClipMode::Value }
    }

    /// A value-mode spec with the given bounds.
    pub fn value(lower: Option<f64>, upper: Option<f64>) -> Self {
        ClipSpec { lower, upper, mode: ClipMode::Value }
    }

    /// Checks that present bounds are finite and ordered.
    pub fn validate(&self) -> Result<(), AlgoError> {
        for b in [self.lower, self.upper].into_iter().flatten() {
            if !b.is_finite() {
                return Err(AlgoError::InvalidConfig(format!("clip bound {b} is not finite")));
            }
        }
        if let (Some(lo), Some(hi)) = (self.lower, self.upper) {
            if lo >= hi {
                return Err(AlgoError::RangeOutOfBounds { lower: lo, upper: hi });
            }
        }
        Ok(())
    }

    /// True when at least one bound is set.
    pub fn is_active(&self) -> bool {
        self.lower.is_some() || self.upper.is_some()
    }

    /// Clamps `v` by whichever bounds are present.
    pub fn apply(&self, v: f64) -> f64 {
        let mut x = v;
        if let Some(lo) = self.lower {
            x = x.max(lo);
        }
        if let Some(hi) = self.upper {
            x = x.min(hi);
        }
        x
    }

    /// Clamps `v` and reports whether the value passed through unchanged
    /// (i.e. whether a gradient flows through this day).
    pub(crate) fn apply_with_mask(&self, v: f64) -> (f64, bool) {
        let c = self.apply(v);
        (c, c == v)
    }

    /// Display label for this bound pair: `RC_-0.4`, `RC_0.4`, `RC_-0.4_0.4`,
    /// or `RC_unbounded` when no bound is set.
    pub fn label(&self) -> String {
        let mut s = String::from("RC");
        if let Some(lo) = self.lower {
            let _ = write!(s, "_{lo}");
        }
        if let Some(hi) = self.upper {
            let _ = write!(s, "_{hi}");
        }
        if !self.is_active() {
            s.push_str("_unbounded");
        }
        s
    }
}

/// Clamps a reward by the bounds present in `clip`.
pub fn reward_clip(value: f64, clip: &ClipSpec) -> f64 {
    clip.apply(value)
}

/// One row of a [`TrainLog`]: the epoch's mean objective, its reward
/// components, the gradient norm of the applied update, and wall-clock time.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub return_comp: f64,
    pub sharpe_comp: f64,
    pub antibias_comp: f64,
    pub grad_norm: f64,
    /// Wall-clock seconds spent on the epoch. Excluded from
    /// [`TrainLog::same_results`] because it varies run to run.
    pub seconds: f64,
}

/// Per-epoch training history, exportable as CSV.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    /// CSV header used by [`TrainLog::to_csv_string`].
    pub const CSV_HEADER: &'static str =
        "epoch,objective,return_comp,sharpe_comp,antibias_comp,grad_norm,seconds";

    /// Renders the log as CSV with full round-trip float formatting.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.epoch, r.objective, r.return_comp, r.sharpe_comp, r.antibias_comp, r.grad_norm, r.seconds
            );
        }
        out
    }

    /// Writes the CSV rendering to `path`.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv_string().as_bytes())
    }

    /// True when every numeric column except wall-clock `seconds` matches
    /// exactly. Two runs of the same seeded training must satisfy this.
    pub fn same_results(&self, other: &TrainLog) -> bool {
        self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.objective == b.objective
                    && a.return_comp == b.return_comp
                    && a.sharpe_comp == b.sharpe_comp
                    && a.antibias_comp == b.antibias_comp
                    && a.grad_norm == b.grad_norm
            })
    }
}

/// Borrowed view of the training inputs: feature windows aligned with the
/// daily returns they were built from.
#[derive(Clone, Copy)]
pub struct MarketData<'a> {
    pub windows: &'a WindowSet,
    pub returns: &'a ReturnsMatrix,
}

impl<'a> MarketData<'a> {
    pub fn new(windows: &'a WindowSet, returns: &'a ReturnsMatrix) -> Self {
        MarketData { windows, returns }
    }

    /// Number of trading days in the underlying panel.
    pub fn panel_days(&self) -> usize {
        self.returns.values.len() + 1
    }

    /// Inclusive range of valid episode start indices for the given episode
    /// shape, or an error when the data cannot host even one episode.
    pub fn valid_start_range(
        &self,
        episode_length: usize,
        action_period: usize,
    ) -> Result<(usize, usize), AlgoError> {
        if episode_length == 0 || action_period == 0 {
            return Err(AlgoError::InvalidConfig(
                "episode length and action period must be positive".into(),
            ));
        }
        let lo = self.windows.first_decision();
        let by_days = self.panel_days().checked_sub(episode_length);
        let last_step_offset = action_period * ((episode_length - 1) / action_period);
        let by_windows = self.windows.last_decision().checked_sub(last_step_offset);
        match (by_days, by_windows) {
            (Some(a), Some(b)) => {
                let hi = a.min(b);
                if hi < lo {
                    Err(AlgoError::InvalidConfig(format!(
                        "panel of {} days with window coverage up to day {} cannot host a \
                         {episode_length}-day episode",
                        self.panel_days(),
                        self.windows.last_decision(),
                    )))
                } else {
                    Ok((lo, hi))
                }
            }
            _ => Err(AlgoError::InvalidConfig(format!(
                "panel of {} days is too short for a {episode_length}-day episode",
                self.panel_days(),
            ))),
        }
    }

    /// Draws a uniformly random valid episode start.
    pub fn sample_start<R: Rng>(
        &self,
        episode_length: usize,
        action_period: usize,
        rng: &mut R,
    ) -> Result<usize, AlgoError> {
        let (lo, hi) = self.valid_start_range(episode_length, action_period)?;
        Ok(rng.gen_range(lo..=hi))
    }
}
