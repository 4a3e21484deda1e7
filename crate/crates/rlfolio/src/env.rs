//! Episode rollouts over a panel and the decomposed episode reward.
//!
//! An episode walks a contiguous span of panel days. Every `action_period`
//! days the policy looks at that day's feature window and produces a weight
//! vector, which is then held constant (no drift) until the next decision.
//! Day `d` of the episode earns the close-to-close return realized on `d`,
//! so a decision made at `d` only ever sees closes from strictly earlier
//! days.
//!
//! The reward is decomposed into three components — mean daily return,
//! annualized Sharpe, and a concentration penalty (normalized weight
//! entropy) — that are mixed into one scalar for actor-style training and
//! kept separate for the per-component value heads.

use rand::Rng;
use thiserror::Error;

use crate::data::{ReturnsMatrix, WindowSet};
use crate::dirichlet;
use crate::metrics;
use crate::nn::{self, LayerSpec, NnError, OutputHead, ParamVector};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode length {length} and action period {period} are inconsistent (need length >= period >= 1)")]
    EpisodeTooShort { length: usize, period: usize },
    #[error("episode [{start}, {end}) does not fit the panel: {reason}")]
    DataTooShort {
        start: usize,
        end: usize,
        reason: String,
    },
    #[error("Dirichlet concentration must be positive")]
    DegenerateConcentration,
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Where an episode sits in the panel and how often it re-decides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeSpec {
    /// Panel index of the first episode day.
    pub start: usize,
    /// Number of days covered.
    pub length: usize,
    /// Days between decisions; the first decision is on `start`.
    pub action_period: usize,
}

impl EpisodeSpec {
    /// Number of decisions in the episode (the last one may govern a short
    /// tail period).
    pub fn n_steps(&self) -> usize {
        self.length.div_ceil(self.action_period)
    }

    /// Which step owns episode day offset `j`.
    pub fn step_of(&self, j: usize) -> usize {
        j / self.action_period
    }

    /// Episode day offsets governed by step `s`.
    pub fn days_of(&self, s: usize) -> std::ops::Range<usize> {
        let lo = s * self.action_period;
        lo..((s + 1) * self.action_period).min(self.length)
    }
}

/// Episode-level reward decomposition. `sharpe` is forced to zero (and
/// flagged) when the return series has no deviation to divide by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardComponents {
    /// Arithmetic mean of the daily portfolio returns.
    pub ret: f64,
    /// Annualized Sharpe of the daily portfolio returns.
    pub sharpe: f64,
    /// Mean normalized weight entropy in `[0, 1]`; 1 rewards even spreads.
    pub antibias: f64,
    pub sharpe_degenerate: bool,
}

impl RewardComponents {
    pub fn as_array(&self) -> [f64; 3] {
        [self.ret, self.sharpe, self.antibias]
    }
}

/// Mixing weights for (return, sharpe, antibias).
pub type Mixing = [f64; 3];

/// Weighted sum of the three components.
pub fn aggregate_reward(c: &RewardComponents, mixing: &Mixing) -> f64 {
    mixing[0] * c.ret + mixing[1] * c.sharpe + mixing[2] * c.antibias
}

/// One finished episode: the decisions made and the returns they earned.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub spec: EpisodeSpec,
    /// Panel index of each decision.
    pub decision_indices: Vec<usize>,
    /// Weight vector chosen at each decision.
    pub weights: Vec<Vec<f64>>,
    /// Portfolio return of each episode day (`spec.length` entries).
    pub daily_returns: Vec<f64>,
    /// Reward components of each step's holding period.
    pub step_components: Vec<RewardComponents>,
    /// Log-density of each sampled action (stochastic rollouts only).
    pub log_densities: Option<Vec<f64>>,
    /// Dirichlet concentrations behind each action (stochastic only).
    pub alphas: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.decision_indices.len()
    }
}

/// Checks that an episode fits the available windows and returns.
pub fn validate_episode(
    spec: &EpisodeSpec,
    windows: &WindowSet,
    returns: &ReturnsMatrix,
) -> Result<(), EnvError> {
    if spec.action_period == 0 || spec.length < spec.action_period {
        return Err(EnvError::EpisodeTooShort {
            length: spec.length,
            period: spec.action_period,
        });
    }
    let end = spec.start + spec.length;
    if spec.start < windows.first_decision() {
        return Err(EnvError::DataTooShort {
            start: spec.start,
            end,
            reason: format!(
                "first decision {} precedes the first feature window {}",
                spec.start,
                windows.first_decision()
            ),
        });
    }
    // Day start+length-1 earns the return row start+length-2.
    if end - 1 > returns.values.len() {
        return Err(EnvError::DataTooShort {
            start: spec.start,
            end,
            reason: format!(
                "episode needs return rows through {} but only {} exist",
                end - 2,
                returns.values.len()
            ),
        });
    }
    let last_decision = spec.start + spec.action_period * ((spec.length - 1) / spec.action_period);
    if last_decision > windows.last_decision() {
        return Err(EnvError::DataTooShort {
            start: spec.start,
            end,
            reason: format!(
                "decision at {last_decision} exceeds the last feature window {}",
                windows.last_decision()
            ),
        });
    }
    Ok(())
}

/// Rolls out the deterministic policy: weights are the softmax output on
/// each decision day's window.
pub fn rollout_deterministic(
    windows: &WindowSet,
    returns: &ReturnsMatrix,
    policy: &LayerSpec,
    params: &ParamVector,
    spec: &EpisodeSpec,
) -> Result<Trajectory, EnvError> {
    debug_assert_eq!(policy.head, OutputHead::Softmax);
    rollout_with(windows, returns, spec, |window| {
        let (out, _) = nn::forward(policy, params, &window.tensor)?;
        Ok((out, None, None))
    })
}

/// Rolls out the stochastic policy: the network's softplus output plus one
/// gives Dirichlet concentrations, the action is a sampled weight vector,
/// and its exact log-density is recorded.
pub fn rollout_stochastic<R: Rng>(
    windows: &WindowSet,
    returns: &ReturnsMatrix,
    policy: &LayerSpec,
    params: &ParamVector,
    spec: &EpisodeSpec,
    rng: &mut R,
) -> Result<Trajectory, EnvError> {
    debug_assert_eq!(policy.head, OutputHead::Softplus);
    rollout_with(windows, returns, spec, |window| {
        let (out, _) = nn::forward(policy, params, &window.tensor)?;
        let alpha: Vec<f64> = out.iter().map(|v| v + 1.0).collect();
        if alpha.iter().any(|a| !(*a > 0.0)) {
            return Err(EnvError::DegenerateConcentration);
        }
        let w = dirichlet::sample(&alpha, rng);
        let logp = dirichlet::log_pdf(&alpha, &w);
        Ok((w, Some(logp), Some(alpha)))
    })
}

/// Shared rollout loop; `act` maps a window to (weights, log-density, alpha).
fn rollout_with<F>(
    windows: &WindowSet,
    returns: &ReturnsMatrix,
    spec: &EpisodeSpec,
    mut act: F,
) -> Result<Trajectory, EnvError>
where
    F: FnMut(&crate::data::FeatureWindow) -> Result<(Vec<f64>, Option<f64>, Option<Vec<f64>>), EnvError>,
{
    validate_episode(spec, windows, returns)?;
    let n_steps = spec.n_steps();
    let mut decision_indices = Vec::with_capacity(n_steps);
    let mut weights = Vec::with_capacity(n_steps);
    let mut log_densities = Vec::new();
    let mut alphas = Vec::new();
    let mut daily = Vec::with_capacity(spec.length);

    for s in 0..n_steps {
        let t = spec.start + s * spec.action_period;
        let window = windows.get(t).expect("validated decision index");
        let (w, logp, alpha) = act(window)?;
        decision_indices.push(t);
        if let Some(lp) = logp {
            log_densities.push(lp);
        }
        if let Some(a) = alpha {
            alphas.push(a);
        }
        for j in spec.days_of(s) {
            let day = spec.start + j;
            // Return realized on `day`: row day-1 of the returns matrix.
            let row = &returns.values[day - 1];
            daily.push(w.iter().zip(row).map(|(w, r)| w * r).sum());
        }
        weights.push(w);
    }

    let step_components = (0..n_steps)
        .map(|s| step_reward_components(&daily[spec.days_of(s)], &weights[s]))
        .collect();
    Ok(Trajectory {
        spec: *spec,
        decision_indices,
        weights,
        daily_returns: daily,
        step_components,
        log_densities: (!log_densities.is_empty()).then_some(log_densities),
        alphas: (!alphas.is_empty()).then_some(alphas),
    })
}

/// Episode-level reward components of a trajectory.
pub fn compute_reward_components(traj: &Trajectory) -> RewardComponents {
    components_of_series(&traj.daily_returns, &traj.weights)
}

/// Episode-level reward components of an arbitrary daily reward series and
/// the per-step weight vectors that produced it. Trainers that transform the
/// daily series before aggregation reuse this so logged objectives stay
/// directly comparable with [`compute_reward_components`].
pub fn components_of_series(daily: &[f64], weights: &[Vec<f64>]) -> RewardComponents {
    let ret = mean(daily);
    let (sharpe, sharpe_degenerate) = sharpe_or_zero(daily);
    let antibias = mean(
        &weights
            .iter()
            .map(|w| normalized_entropy(w))
            .collect::<Vec<_>>(),
    );
    RewardComponents {
        ret,
        sharpe,
        antibias,
        sharpe_degenerate,
    }
}

/// Reward components of a single holding period.
fn step_reward_components(days: &[f64], weights: &[f64]) -> RewardComponents {
    let (sharpe, sharpe_degenerate) = sharpe_or_zero(days);
    RewardComponents {
        ret: mean(days),
        sharpe,
        antibias: normalized_entropy(weights),
        sharpe_degenerate,
    }
}

fn sharpe_or_zero(days: &[f64]) -> (f64, bool) {
    match metrics::sharpe(days) {
        Ok(v) => (v, false),
        Err(_) => (0.0, true),
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Shannon entropy of a weight vector, with `0 ln 0 = 0`.
pub fn weight_entropy(w: &[f64]) -> f64 {
    -w.iter()
        .filter(|x| **x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
}

/// Entropy scaled into `[0, 1]` by the maximum `ln N`; zero for a single
/// asset, where concentration is the only option.
pub fn normalized_entropy(w: &[f64]) -> f64 {
    if w.len() < 2 {
        return 0.0;
    }
    weight_entropy(w) / (w.len() as f64).ln()
}
