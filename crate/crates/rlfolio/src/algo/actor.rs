//! Deterministic-policy trainers: the plain actor and its reward-clipping
//! variant.
//!
//! Both optimize the same mixed objective — mean daily portfolio return,
//! annualized risk-adjusted return, and a concentration penalty — by exact
//! gradient ascent through the softmax policy. The reward-clipping variant
//! clamps each day's reward (or the ratio of consecutive rewards) before
//! aggregation; days where the clamp binds contribute no gradient. With no
//! bounds the clamp is the identity, so [`train_actor_only`] simply runs the
//! shared core with an empty [`ClipSpec`] and the two trainers produce
//! bit-identical results.

use std::time::Instant;

use crate::data::ReturnsMatrix;
use crate::env::{self, EpisodeSpec, Mixing, RewardComponents};
use crate::metrics::TRADING_DAYS_PER_YEAR;
use crate::nn::{self, AdamState, Gradient, LayerSpec, OutputHead, ParamVector, Tape};
use crate::rng;

use super::{AlgoError, ClipMode, ClipSpec, EpochRecord, MarketData, TrainLog, RATIO_GUARD};

/// Hyperparameters shared by the deterministic-policy trainers.
#[derive(Debug, Clone)]
pub struct ActorConfig {
    /// Optimization epochs; each applies one Adam step.
    pub epochs: usize,
    /// Episodes sampled per epoch; their gradients are averaged.
    pub episodes_per_epoch: usize,
    /// Days per episode.
    pub episode_length: usize,
    /// Days each decision's weights are held.
    pub action_period: usize,
    /// Reward mixing coefficients (return, risk-adjusted, concentration).
    pub mixing: Mixing,
    pub learning_rate: f64,
}

impl Default for ActorConfig {
    fn default() -> Self {
        ActorConfig {
            epochs: 200,
            episodes_per_epoch: 4,
            episode_length: 252,
            action_period: 21,
            mixing: [1.0, 0.2, 0.05],
            learning_rate: 1e-3,
        }
    }
}

impl ActorConfig {
    fn validate(&self) -> Result<(), AlgoError> {
        if self.epochs == 0 || self.episodes_per_epoch == 0 {
            return Err(AlgoError::InvalidConfig(
                "epochs and episodes per epoch must be positive".into(),
            ));
        }
        if self.action_period == 0 || self.episode_length < self.action_period {
            return Err(AlgoError::InvalidConfig(format!(
                "episode length {} must be at least the action period {}",
                self.episode_length, self.action_period
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(AlgoError::InvalidConfig(format!(
                "learning rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        if self.mixing.iter().any(|m| !m.is_finite()) {
            return Err(AlgoError::InvalidConfig("mixing coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// How each day's clipped reward depends on the raw daily rewards.
enum DayChain {
    /// Clamped raw value; `pass` is false when the clamp bound.
    Value { pass: bool },
    /// Clamped ratio against the previous day's raw reward `prev`.
    Ratio { pass: bool, prev: f64 },
}

/// A rolled-out episode evaluated under a clip: per-step weights and tapes,
/// the raw daily reward series, and its clipped counterpart.
struct SeriesEval {
    weights: Vec<Vec<f64>>,
    tapes: Vec<Tape>,
    raw: Vec<f64>,
    clipped: Vec<f64>,
    chains: Vec<DayChain>,
}

fn eval_series(
    data: &MarketData,
    policy: &LayerSpec,
    params: &ParamVector,
    episode: &EpisodeSpec,
    clip: &ClipSpec,
) -> Result<SeriesEval, AlgoError> {
    env::validate_episode(episode, data.windows, data.returns)?;
    let n_steps = episode.n_steps();
    let mut weights = Vec::with_capacity(n_steps);
    let mut tapes = Vec::with_capacity(n_steps);
    for s in 0..n_steps {
        let t = episode.start + s * episode.action_period;
        let window = data.windows.get(t).expect("validated decision index");
        let (out, tape) = nn::forward(policy, params, &window.tensor)?;
        weights.push(out);
        tapes.push(tape);
    }

    let mut raw = Vec::with_capacity(episode.length);
    for j in 0..episode.length {
        let row = day_returns(data.returns, episode, j);
        let w = &weights[episode.step_of(j)];
        raw.push(w.iter().zip(row).map(|(w, r)| w * r).sum::<f64>());
    }

    let mut clipped = Vec::with_capacity(episode.length);
    let mut chains = Vec::with_capacity(episode.length);
    for j in 0..episode.length {
        if clip.mode == ClipMode::Ratio && j >= 1 && raw[j - 1].abs() >= RATIO_GUARD {
            let (c, pass) = clip.apply_with_mask(raw[j] / raw[j - 1]);
            clipped.push(c);
            chains.push(DayChain::Ratio { pass, prev: raw[j - 1] });
        } else {
            let (c, pass) = clip.apply_with_mask(raw[j]);
            clipped.push(c);
            chains.push(DayChain::Value { pass });
        }
    }

    Ok(SeriesEval { weights, tapes, raw, clipped, chains })
}

/// Returns row earned by episode day `j` (the move from the previous close).
fn day_returns<'a>(returns: &'a ReturnsMatrix, episode: &EpisodeSpec, j: usize) -> &'a [f64] {
    &returns.values[episode.start + j - 1]
}

/// Evaluates the clipped mixed objective of one episode under the current
/// parameters, without gradients. Used by finite-difference checks.
pub fn actor_objective(
    data: &MarketData,
    policy: &LayerSpec,
    params: &ParamVector,
    episode: &EpisodeSpec,
    clip: &ClipSpec,
    mixing: &Mixing,
) -> Result<f64, AlgoError> {
    let ev = eval_series(data, policy, params, episode, clip)?;
    let comps = env::components_of_series(&ev.clipped, &ev.weights);
    Ok(env::aggregate_reward(&comps, mixing))
}

/// Evaluates one episode's clipped mixed objective together with its exact
/// gradient with respect to the policy parameters.
///
/// The chain runs objective → clipped day rewards (clamped days contribute
/// nothing) → raw day rewards → decision weights → softmax policy backprop.
pub fn actor_objective_grad(
    data: &MarketData,
    policy: &LayerSpec,
    params: &ParamVector,
    episode: &EpisodeSpec,
    clip: &ClipSpec,
    mixing: &Mixing,
) -> Result<(f64, RewardComponents, Gradient), AlgoError> {
    let ev = eval_series(data, policy, params, episode, clip)?;
    let comps = env::components_of_series(&ev.clipped, &ev.weights);
    let objective = env::aggregate_reward(&comps, mixing);

    let len = episode.length;
    let l = len as f64;
    let n_steps = episode.n_steps();
    let n_assets = ev.weights[0].len();

    // Objective sensitivity to each clipped day reward: the return component
    // contributes 1/len per day; the annualized risk-adjusted component
    // differentiates mean/stdev with the sample variance convention.
    let mut d_clip = vec![mixing[0] / l; len];
    if mixing[1] != 0.0 && !comps.sharpe_degenerate {
        let m = comps.ret;
        let var = ev.clipped.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / (l - 1.0);
        let sd = var.sqrt();
        let ann = TRADING_DAYS_PER_YEAR.sqrt();
        for (d, c) in d_clip.iter_mut().zip(&ev.clipped) {
            *d += mixing[1] * ann * (1.0 / (l * sd) - m * (c - m) / ((l - 1.0) * sd * sd * sd));
        }
    }

    // Chain through the clamp onto the raw day rewards. A ratio day j
    // couples two raw rewards: d(raw_j/raw_{j-1}) spreads onto both.
    let mut d_raw = vec![0.0; len];
    for j in 0..len {
        match ev.chains[j] {
            DayChain::Value { pass } => {
                if pass {
                    d_raw[j] += d_clip[j];
                }
            }
            DayChain::Ratio { pass, prev } => {
                if pass {
                    d_raw[j] += d_clip[j] / prev;
                    d_raw[j - 1] -= d_clip[j] * ev.raw[j] / (prev * prev);
                }
            }
        }
    }

    // Per-step weight gradients: raw day rewards are linear in the weights
    // (coefficients are that day's asset returns), and the concentration
    // term differentiates the normalized entropy of the step's weights.
    let mut grad = Gradient::zeros(params.len());
    let ln_n = (n_assets as f64).ln();
    for s in 0..n_steps {
        let mut g = vec![0.0; n_assets];
        for j in episode.days_of(s) {
            let row = day_returns(data.returns, episode, j);
            for (gi, r) in g.iter_mut().zip(row) {
                *gi += d_raw[j] * r;
            }
        }
        if mixing[2] != 0.0 && n_assets >= 2 {
            let scale = mixing[2] / (n_steps as f64 * ln_n);
            for (gi, w) in g.iter_mut().zip(&ev.weights[s]) {
                if *w > 0.0 {
                    *gi -= scale * (w.ln() + 1.0);
                }
            }
        }
        grad.add_scaled(&nn::backward(policy, params, &ev.tapes[s], &g)?, 1.0);
    }

    Ok((objective, comps, grad))
}

fn train_clipped_actor(
    data: &MarketData,
    policy: &LayerSpec,
    clip: &ClipSpec,
    cfg: &ActorConfig,
    seed: u64,
) -> Result<(ParamVector, TrainLog), AlgoError> {
    clip.validate()?;
    cfg.validate()?;
    if policy.head != OutputHead::Softmax {
        return Err(AlgoError::InvalidConfig(
            "deterministic actor policies require a softmax output head".into(),
        ));
    }
    data.valid_start_range(cfg.episode_length, cfg.action_period)?;

    let mut params = nn::init_params(policy, &mut rng::stream(seed, "init"));
    let mut adam = AdamState::new(params.len(), cfg.learning_rate);
    let mut roll = rng::stream(seed, "rollout");
    let mut log = TrainLog::default();

    for epoch in 0..cfg.epochs {
        let t0 = Instant::now();
        let mut grad = Gradient::zeros(params.len());
        let (mut obj, mut ret, mut sharpe, mut antibias) = (0.0, 0.0, 0.0, 0.0);
        let e = cfg.episodes_per_epoch as f64;
        for _ in 0..cfg.episodes_per_epoch {
            let start = data.sample_start(cfg.episode_length, cfg.action_period, &mut roll)?;
            let episode = EpisodeSpec {
                start,
                length: cfg.episode_length,
                action_period: cfg.action_period,
            };
            let (j, comps, g) =
                actor_objective_grad(data, policy, &params, &episode, clip, &cfg.mixing)?;
            obj += j;
            ret += comps.ret;
            sharpe += comps.sharpe;
            antibias += comps.antibias;
            grad.add_scaled(&g, 1.0 / e);
        }
        nn::adam_step(&mut params, &grad, &mut adam, true)?;
        log.records.push(EpochRecord {
            epoch,
            objective: obj / e,
            return_comp: ret / e,
            sharpe_comp: sharpe / e,
            antibias_comp: antibias / e,
            grad_norm: grad.l2_norm(),
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    Ok((params, log))
}

/// Trains the plain deterministic actor by gradient ascent on the mixed
/// reward. Equivalent to [`train_reward_clip`] with no bounds.
pub fn train_actor_only(
    data: &MarketData,
    policy: &LayerSpec,
    cfg: &ActorConfig,
    seed: u64,
) -> Result<(ParamVector, TrainLog), AlgoError> {
    train_clipped_actor(data, policy, &ClipSpec::none(), cfg, seed)
}

/// Trains the reward-clipping variant: identical to the plain actor except
/// that each day's reward is clamped by `clip` before aggregation.
pub fn train_reward_clip(
    data: &MarketData,
    policy: &LayerSpec,
    clip: &ClipSpec,
    cfg: &ActorConfig,
    seed: u64,
) -> Result<(ParamVector, TrainLog), AlgoError> {
    train_clipped_actor(data, policy, clip, cfg, seed)
}
