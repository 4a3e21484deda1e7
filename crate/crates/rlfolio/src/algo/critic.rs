//! Actor-critic training with decomposed value heads.
//!
//! Instead of one monolithic state value, a separate head regresses each
//! reward component (return, risk-adjusted return, concentration). Targets
//! are one-step bootstraps, the critic loss sums squared head errors, and
//! the actor's advantage is the sum of per-head advantages — which equals
//! the monolithic advantage because both sides are linear in the components.

use std::time::Instant;

use rand::Rng;

use crate::data::WindowSet;
use crate::dirichlet;
use crate::env::{
    self, compute_reward_components, rollout_stochastic, EpisodeSpec, Mixing, Trajectory,
};
use crate::nn::{self, AdamState, Gradient, LayerSpec, OutputHead, ParamVector, Tape};
use crate::rng;

use super::{AlgoError, EpochRecord, MarketData, TrainLog, N_REWARD_COMPONENTS};

/// One value network per reward component, sharing a single architecture.
#[derive(Debug, Clone)]
pub struct CriticHeads {
    /// Architecture of every head: identity output of size one.
    pub spec: LayerSpec,
    /// Per-component parameter vectors.
    pub params: Vec<ParamVector>,
}

impl CriticHeads {
    /// Initializes `n_components` heads with independent random parameters.
    pub fn init<R: Rng>(
        input_size: usize,
        hidden: &[usize],
        n_components: usize,
        rng: &mut R,
    ) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input_size);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let spec = LayerSpec::new(sizes, OutputHead::Identity);
        let params = (0..n_components).map(|_| nn::init_params(&spec, rng)).collect();
        CriticHeads { spec, params }
    }

    pub fn n_components(&self) -> usize {
        self.params.len()
    }

    /// Value estimate of head `k` for a state input.
    pub fn value(&self, k: usize, input: &[f64]) -> Result<f64, AlgoError> {
        Ok(self.forward(k, input)?.0)
    }

    /// Value estimates of every head for a state input.
    pub fn values(&self, input: &[f64]) -> Result<Vec<f64>, AlgoError> {
        (0..self.n_components()).map(|k| self.value(k, input)).collect()
    }

    fn forward(&self, k: usize, input: &[f64]) -> Result<(f64, Tape), AlgoError> {
        let (out, tape) = nn::forward(&self.spec, &self.params[k], input)?;
        Ok((out[0], tape))
    }
}

/// One-step bootstrapped regression targets for every head and step of a
/// trajectory: the step's reward component plus `gamma` times the next
/// state's value estimate, with no bootstrap after the final step.
pub fn critic_targets(
    traj: &Trajectory,
    heads: &CriticHeads,
    gamma: f64,
    windows: &WindowSet,
) -> Result<Vec<Vec<f64>>, AlgoError> {
    if heads.n_components() != N_REWARD_COMPONENTS {
        return Err(AlgoError::InvalidConfig(format!(
            "expected {N_REWARD_COMPONENTS} critic heads, found {}",
            heads.n_components()
        )));
    }
    let n_steps = traj.n_steps();
    let mut targets = Vec::with_capacity(n_steps);
    for s in 0..n_steps {
        let rewards = traj.step_components[s].as_array();
        let mut row = rewards.to_vec();
        if s + 1 < n_steps {
            let next = windows
                .get(traj.decision_indices[s + 1])
                .expect("trajectory decisions lie within the window set");
            for (y, k) in row.iter_mut().zip(0..N_REWARD_COMPONENTS) {
                *y += gamma * heads.value(k, &next.tensor)?;
            }
        }
        targets.push(row);
    }
    Ok(targets)
}

/// Mean over steps of the summed squared per-head regression error.
pub fn critic_loss(
    heads: &CriticHeads,
    inputs: &[&[f64]],
    targets: &[Vec<f64>],
) -> Result<f64, AlgoError> {
    Ok(critic_loss_grads(heads, inputs, targets)?.0)
}

/// Critic loss plus its descent gradient for each head.
fn critic_loss_grads(
    heads: &CriticHeads,
    inputs: &[&[f64]],
    targets: &[Vec<f64>],
) -> Result<(f64, Vec<Gradient>), AlgoError> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(AlgoError::InvalidConfig(format!(
            "critic regression needs matching non-empty inputs and targets, got {} and {}",
            inputs.len(),
            targets.len()
        )));
    }
    let n = inputs.len() as f64;
    let mut loss = 0.0;
    let mut grads: Vec<Gradient> =
        heads.params.iter().map(|p| Gradient::zeros(p.len())).collect();
    for (input, target) in inputs.iter().zip(targets) {
        if target.len() != heads.n_components() {
            return Err(AlgoError::InvalidConfig(format!(
                "target row has {} components for {} heads",
                target.len(),
                heads.n_components()
            )));
        }
        for (k, y) in target.iter().enumerate() {
            let (v, tape) = heads.forward(k, input)?;
            let err = v - y;
            loss += err * err / n;
            let g = nn::backward(&heads.spec, &heads.params[k], &tape, &[2.0 * err / n])?;
            grads[k].add_scaled(&g, 1.0);
        }
    }
    Ok((loss, grads))
}

/// Summed per-head advantage of every step: the decomposed equivalent of a
/// monolithic TD error.
pub fn advantages(
    traj: &Trajectory,
    heads: &CriticHeads,
    targets: &[Vec<f64>],
    windows: &WindowSet,
) -> Result<Vec<f64>, AlgoError> {
    let mut out = Vec::with_capacity(traj.n_steps());
    for (s, target) in targets.iter().enumerate() {
        let window = windows
            .get(traj.decision_indices[s])
            .expect("trajectory decisions lie within the window set");
        let values = heads.values(&window.tensor)?;
        out.push(target.iter().zip(&values).map(|(y, v)| y - v).sum());
    }
    Ok(out)
}

/// Hyperparameters for decomposed actor-critic training.
#[derive(Debug, Clone)]
pub struct ActorCriticConfig {
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub episode_length: usize,
    pub action_period: usize,
    /// Discount on the bootstrapped next-state value.
    pub gamma: f64,
    /// Reward mixing used for the logged objective.
    pub mixing: Mixing,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Hidden sizes of every value head.
    pub critic_hidden: Vec<usize>,
}

impl Default for ActorCriticConfig {
    fn default() -> Self {
        ActorCriticConfig {
            epochs: 200,
            episodes_per_epoch: 4,
            episode_length: 252,
            action_period: 21,
            gamma: 0.99,
            mixing: [1.0, 0.2, 0.05],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            critic_hidden: vec![32],
        }
    }
}

impl ActorCriticConfig {
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
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(AlgoError::InvalidConfig(format!(
                "discount {} must lie in [0, 1]",
                self.gamma
            )));
        }
        for lr in [self.actor_lr, self.critic_lr] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(AlgoError::InvalidConfig(format!(
                    "learning rate {lr} must be positive and finite"
                )));
            }
        }
        Ok(())
    }
}

/// Trains a stochastic Dirichlet policy against decomposed value heads.
///
/// Each epoch collects episodes with the current policy, regresses every
/// head toward its bootstrapped component target, and ascends the actor
/// along the score-function gradient weighted by the summed advantage.
pub fn train_actor_critic(
    data: &MarketData,
    policy: &LayerSpec,
    cfg: &ActorCriticConfig,
    seed: u64,
) -> Result<(ParamVector, CriticHeads, TrainLog), AlgoError> {
    cfg.validate()?;
    if policy.head != OutputHead::Softplus {
        return Err(AlgoError::InvalidConfig(
            "stochastic policies require a softplus output head".into(),
        ));
    }
    data.valid_start_range(cfg.episode_length, cfg.action_period)?;

    let mut params = nn::init_params(policy, &mut rng::stream(seed, "init"));
    let mut heads = CriticHeads::init(
        data.windows.input_size(),
        &cfg.critic_hidden,
        N_REWARD_COMPONENTS,
        &mut rng::stream(seed, "critic-init"),
    );
    let mut adam_actor = AdamState::new(params.len(), cfg.actor_lr);
    let mut adam_heads: Vec<AdamState> = heads
        .params
        .iter()
        .map(|p| AdamState::new(p.len(), cfg.critic_lr))
        .collect();
    let mut roll = rng::stream(seed, "rollout");
    let mut log = TrainLog::default();

    for epoch in 0..cfg.epochs {
        let t0 = Instant::now();
        let e = cfg.episodes_per_epoch as f64;

        let mut trajs = Vec::with_capacity(cfg.episodes_per_epoch);
        for _ in 0..cfg.episodes_per_epoch {
            let start = data.sample_start(cfg.episode_length, cfg.action_period, &mut roll)?;
            let episode = EpisodeSpec {
                start,
                length: cfg.episode_length,
                action_period: cfg.action_period,
            };
            trajs.push(rollout_stochastic(
                data.windows,
                data.returns,
                policy,
                &params,
                &episode,
                &mut roll,
            )?);
        }

        // Targets and advantages use the heads as they stood when the
        // trajectories were collected.
        let mut actor_grad = Gradient::zeros(params.len());
        let mut batch_inputs: Vec<&[f64]> = Vec::new();
        let mut batch_targets: Vec<Vec<f64>> = Vec::new();
        let (mut obj, mut ret, mut sharpe, mut antibias) = (0.0, 0.0, 0.0, 0.0);

        for traj in &trajs {
            let targets = critic_targets(traj, &heads, cfg.gamma, data.windows)?;
            let advs = advantages(traj, &heads, &targets, data.windows)?;
            let logps = traj
                .log_densities
                .as_ref()
                .expect("stochastic rollouts record log densities");
            debug_assert_eq!(logps.len(), traj.n_steps());

            for s in 0..traj.n_steps() {
                let window = data
                    .windows
                    .get(traj.decision_indices[s])
                    .expect("trajectory decisions lie within the window set");
                let (out, tape) = nn::forward(policy, &params, &window.tensor)?;
                let alpha: Vec<f64> = out.iter().map(|v| v + 1.0).collect();
                let dlogp = dirichlet::log_pdf_grad_alpha(&alpha, &traj.weights[s]);
                let out_grad: Vec<f64> = dlogp.iter().map(|d| advs[s] * d / e).collect();
                actor_grad.add_scaled(&nn::backward(policy, &params, &tape, &out_grad)?, 1.0);

                batch_inputs.push(&window.tensor);
                batch_targets.push(targets[s].clone());
            }

            let comps = compute_reward_components(traj);
            obj += env::aggregate_reward(&comps, &cfg.mixing);
            ret += comps.ret;
            sharpe += comps.sharpe;
            antibias += comps.antibias;
        }

        let (_, head_grads) = critic_loss_grads(&heads, &batch_inputs, &batch_targets)?;
        for (k, hg) in head_grads.iter().enumerate() {
            nn::adam_step(&mut heads.params[k], hg, &mut adam_heads[k], false)?;
        }
        nn::adam_step(&mut params, &actor_grad, &mut adam_actor, true)?;

        log.records.push(EpochRecord {
            epoch,
            objective: obj / e,
            return_comp: ret / e,
            sharpe_comp: sharpe / e,
            antibias_comp: antibias / e,
            grad_norm: actor_grad.l2_norm(),
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    Ok((params, heads, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_windows, daily_returns, generate_synthetic, SyntheticSpec};

    struct Fixture {
        returns: crate::data::ReturnsMatrix,
        windows: crate::data::WindowSet,
    }

    fn fixture(seed: u64) -> Fixture {
        let spec = SyntheticSpec::uniform(3, 70, 0.0002, 0.012, seed);
        let panel = generate_synthetic(&spec).unwrap();
        let returns = daily_returns(&panel).unwrap();
        let windows = build_windows(&panel, 4, false).unwrap();
        Fixture { returns, windows }
    }

    fn sample_trajectory(fx: &Fixture) -> (LayerSpec, ParamVector, Trajectory) {
        let policy = LayerSpec::new(vec![fx.windows.input_size(), 6, 3], OutputHead::Softplus);
        let params = nn::init_params(&policy, &mut rng::stream(8, "init"));
        let episode = EpisodeSpec { start: 10, length: 12, action_period: 4 };
        let mut roll = rng::stream(8, "rollout");
        let traj =
            rollout_stochastic(&fx.windows, &fx.returns, &policy, &params, &episode, &mut roll)
                .unwrap();
        (policy, params, traj)
    }

    #[test]
    fn gamma_zero_targets_equal_step_rewards_exactly() {
        let fx = fixture(31);
        let (_, _, traj) = sample_trajectory(&fx);
        let heads = CriticHeads::init(fx.windows.input_size(), &[8], 3, &mut rng::stream(1, "c"));
        let targets = critic_targets(&traj, &heads, 0.0, &fx.windows).unwrap();
        for (s, row) in targets.iter().enumerate() {
            let expected = traj.step_components[s].as_array();
            assert_eq!(row.as_slice(), expected.as_slice(), "step {s}");
        }
    }

    #[test]
    fn targets_bootstrap_with_discounted_next_value() {
        let fx = fixture(32);
        let (_, _, traj) = sample_trajectory(&fx);
        let heads = CriticHeads::init(fx.windows.input_size(), &[8], 3, &mut rng::stream(2, "c"));
        let gamma = 0.9;
        let targets = critic_targets(&traj, &heads, gamma, &fx.windows).unwrap();

        let n = traj.n_steps();
        assert!(n >= 2, "fixture must produce a multi-step trajectory");
        for s in 0..n {
            let rewards = traj.step_components[s].as_array();
            for k in 0..3 {
                let expected = if s + 1 < n {
                    let next = fx.windows.get(traj.decision_indices[s + 1]).unwrap();
                    rewards[k] + gamma * heads.value(k, &next.tensor).unwrap()
                } else {
                    rewards[k]
                };
                assert_eq!(targets[s][k], expected, "step {s} head {k}");
            }
        }
    }

    #[test]
    fn summed_targets_match_a_monolithic_target() {
        let fx = fixture(33);
        let (_, _, traj) = sample_trajectory(&fx);
        let heads = CriticHeads::init(fx.windows.input_size(), &[8], 3, &mut rng::stream(3, "c"));
        let gamma = 0.97;
        let targets = critic_targets(&traj, &heads, gamma, &fx.windows).unwrap();

        for s in 0..traj.n_steps() {
            let summed: f64 = targets[s].iter().sum();
            let reward_sum: f64 = traj.step_components[s].as_array().iter().sum();
            let mono = if s + 1 < traj.n_steps() {
                let next = fx.windows.get(traj.decision_indices[s + 1]).unwrap();
                let value_sum: f64 = heads.values(&next.tensor).unwrap().iter().sum();
                reward_sum + gamma * value_sum
            } else {
                reward_sum
            };
            assert!(
                (summed - mono).abs() < 1e-12,
                "step {s}: decomposed sum {summed} vs monolithic {mono}"
            );
        }
    }

    #[test]
    fn single_component_loss_equals_monolithic_regression() {
        let fx = fixture(34);
        let heads =
            CriticHeads::init(fx.windows.input_size(), &[6], 1, &mut rng::stream(4, "c"));
        let w1 = fx.windows.get(5).unwrap();
        let w2 = fx.windows.get(9).unwrap();
        let inputs: Vec<&[f64]> = vec![&w1.tensor, &w2.tensor];
        let targets = vec![vec![0.25], vec![-0.5]];

        let decomposed = critic_loss(&heads, &inputs, &targets).unwrap();
        let mut mono = 0.0;
        for (input, target) in inputs.iter().zip(&targets) {
            let (out, _) = nn::forward(&heads.spec, &heads.params[0], input).unwrap();
            let err = out[0] - target[0];
            mono += err * err / inputs.len() as f64;
        }
        assert_eq!(decomposed, mono, "single-component loss must equal a plain regression");
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let fx = fixture(35);
        let mut heads =
            CriticHeads::init(fx.windows.input_size(), &[5], 2, &mut rng::stream(5, "c"));
        let w1 = fx.windows.get(6).unwrap();
        let w2 = fx.windows.get(11).unwrap();
        let inputs: Vec<&[f64]> = vec![&w1.tensor, &w2.tensor];
        let targets = vec![vec![0.1, -0.2], vec![0.4, 0.05]];

        let (_, grads) = critic_loss_grads(&heads, &inputs, &targets).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            for i in 0..heads.params[k].len() {
                let orig = heads.params[k].values[i];
                heads.params[k].values[i] = orig + h;
                let hi = critic_loss(&heads, &inputs, &targets).unwrap();
                heads.params[k].values[i] = orig - h;
                let lo = critic_loss(&heads, &inputs, &targets).unwrap();
                heads.params[k].values[i] = orig;
                let numeric = (hi - lo) / (2.0 * h);
                let a = grads[k].values[i];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
                assert!(err < 1e-5, "head {k} param {i}: analytic {a}, numeric {numeric}");
            }
        }
    }

    #[test]
    fn score_function_plumbing_matches_log_density_finite_differences() {
        // The actor update ascends adv * d/dtheta ln pi(a|s); validate the
        // log-density gradient through the softplus head against finite
        // differences for a fixed sampled action.
        let fx = fixture(36);
        let (policy, params, traj) = sample_trajectory(&fx);
        let window = fx.windows.get(traj.decision_indices[0]).unwrap();
        let action = &traj.weights[0];

        let logp = |p: &ParamVector| {
            let (out, _) = nn::forward(&policy, p, &window.tensor).unwrap();
            let alpha: Vec<f64> = out.iter().map(|v| v + 1.0).collect();
            dirichlet::log_pdf(&alpha, action)
        };
        let (out, tape) = nn::forward(&policy, &params, &window.tensor).unwrap();
        let alpha: Vec<f64> = out.iter().map(|v| v + 1.0).collect();
        let dlogp = dirichlet::log_pdf_grad_alpha(&alpha, action);
        let analytic = nn::backward(&policy, &params, &tape, &dlogp).unwrap();

        let mut probe = params.clone();
        let h = 1e-5;
        for i in 0..params.len() {
            let orig = probe.values[i];
            probe.values[i] = orig + h;
            let hi = logp(&probe);
            probe.values[i] = orig - h;
            let lo = logp(&probe);
            probe.values[i] = orig;
            let numeric = (hi - lo) / (2.0 * h);
            let a = analytic.values[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            assert!(err < 1e-4, "param {i}: analytic {a}, numeric {numeric}");
        }
    }

    #[test]
    fn actor_critic_training_is_deterministic() {
        let fx = fixture(37);
        let data = MarketData::new(&fx.windows, &fx.returns);
        let policy = LayerSpec::new(vec![fx.windows.input_size(), 6, 3], OutputHead::Softplus);
        let cfg = ActorCriticConfig {
            epochs: 4,
            episodes_per_epoch: 2,
            episode_length: 16,
            action_period: 4,
            critic_hidden: vec![6],
            ..ActorCriticConfig::default()
        };
        let (p1, h1, l1) = train_actor_critic(&data, &policy, &cfg, 99).unwrap();
        let (p2, h2, l2) = train_actor_critic(&data, &policy, &cfg, 99).unwrap();
        assert_eq!(p1.values, p2.values);
        for (a, b) in h1.params.iter().zip(&h2.params) {
            assert_eq!(a.values, b.values);
        }
        assert!(l1.same_results(&l2));
        assert_eq!(l1.records.len(), 4);
    }
}
