//! Proximal policy optimization with a clipped probability-ratio surrogate.
//!
//! Each iteration snapshots the policy, collects a batch of stochastic
//! trajectories with it, scores every decision against the decomposed value
//! heads, and then optimizes the clipped surrogate plus value and entropy
//! terms for several epochs of shuffled minibatches. Ratios are computed
//! against the exact Dirichlet log-densities recorded at collection time.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::dirichlet;
use crate::env::{self, compute_reward_components, rollout_stochastic, EnvError, EpisodeSpec, Mixing};
use crate::nn::{self, AdamState, Gradient, LayerSpec, OutputHead, ParamVector};
use crate::rng;

use super::critic::{advantages, critic_targets, CriticHeads};
use super::{AlgoError, EpochRecord, MarketData, TrainLog, N_REWARD_COMPONENTS};

/// Hyperparameters for PPO training.
#[derive(Debug, Clone)]
pub struct PpoConfig {
    /// Outer iterations: one batch collection plus optimization each.
    pub iterations: usize,
    /// Trajectories collected per iteration.
    pub actors: usize,
    /// Decision steps per trajectory.
    pub horizon: usize,
    /// Days each decision's weights are held.
    pub action_period: usize,
    /// Ratio clip half-width.
    pub epsilon: f64,
    /// Value-loss coefficient.
    pub c1: f64,
    /// Entropy-bonus coefficient.
    pub c2: f64,
    /// Optimization epochs over each collected batch.
    pub epochs: usize,
    /// Steps per minibatch.
    pub minibatch: usize,
    /// Discount on bootstrapped values.
    pub gamma: f64,
    /// Reward mixing used for the logged objective.
    pub mixing: Mixing,
    pub learning_rate: f64,
    /// Hidden sizes of every value head.
    pub critic_hidden: Vec<usize>,
    /// Standardize advantages across each collected batch.
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            iterations: 50,
            actors: 4,
            horizon: 8,
            action_period: 21,
            epsilon: 0.2,
            c1: 0.5,
            c2: 0.01,
            epochs: 4,
            minibatch: 64,
            gamma: 0.99,
            mixing: [1.0, 0.2, 0.05],
            learning_rate: 1e-3,
            critic_hidden: vec![32],
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    fn validate(&self) -> Result<(), AlgoError> {
        for (name, v) in [
            ("iterations", self.iterations),
            ("actors", self.actors),
            ("horizon", self.horizon),
            ("action period", self.action_period),
            ("epochs", self.epochs),
            ("minibatch", self.minibatch),
        ] {
            if v == 0 {
                return Err(AlgoError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(AlgoError::InvalidConfig(format!(
                "clip width {} must be positive and finite",
                self.epsilon
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(AlgoError::InvalidConfig(format!(
                "discount {} must lie in [0, 1]",
                self.gamma
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(AlgoError::InvalidConfig(format!(
                "learning rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        if self.c1 < 0.0 || self.c2 < 0.0 {
            return Err(AlgoError::InvalidConfig(
                "value and entropy coefficients must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Days per collected trajectory.
    pub fn episode_length(&self) -> usize {
        self.horizon * self.action_period
    }
}

/// One decision from a collected batch, frozen for optimization: the state
/// input, the sampled action, its log-density under the collection policy,
/// the (possibly normalized) advantage, and per-head regression targets.
#[derive(Debug, Clone)]
pub struct PpoStep {
    pub input: Vec<f64>,
    pub action: Vec<f64>,
    pub logp_old: f64,
    pub advantage: f64,
    pub targets: Vec<f64>,
}

/// The clipped surrogate for one decision: the minimum of the raw and
/// clamped importance-weighted advantages.
pub fn ppo_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Full PPO objective over a minibatch — surrogate minus weighted value loss
/// plus weighted entropy — with ascent gradients for the policy and every
/// value head.
///
/// The surrogate's gradient flows only through decisions where the raw
/// importance-weighted advantage attains the minimum; clamped decisions
/// contribute nothing, which is what bounds the policy update.
pub fn ppo_full_loss(
    steps: &[PpoStep],
    policy: &LayerSpec,
    params: &ParamVector,
    heads: &CriticHeads,
    epsilon: f64,
    c1: f64,
    c2: f64,
) -> Result<(f64, Gradient, Vec<Gradient>), AlgoError> {
    if steps.is_empty() {
        return Err(AlgoError::InvalidConfig("cannot evaluate an empty minibatch".into()));
    }
    let b = steps.len() as f64;
    let mut total = 0.0;
    let mut actor_grad = Gradient::zeros(params.len());
    let mut head_grads: Vec<Gradient> =
        heads.params.iter().map(|p| Gradient::zeros(p.len())).collect();

    for step in steps {
        if step.targets.len() != heads.n_components() {
            return Err(AlgoError::InvalidConfig(format!(
                "step carries {} targets for {} heads",
                step.targets.len(),
                heads.n_components()
            )));
        }
        let (out, tape) = nn::forward(policy, params, &step.input)?;
        let alpha: Vec<f64> = out.iter().map(|v| v + 1.0).collect();
        if alpha.iter().any(|a| !(*a > 0.0)) {
            return Err(AlgoError::Env(EnvError::DegenerateConcentration));
        }
        let logp_new = dirichlet::log_pdf(&alpha, &step.action);
        let ratio = (logp_new - step.logp_old).exp();
        let surrogate = ppo_surrogate(ratio, step.advantage, epsilon);
        let entropy = dirichlet::entropy(&alpha);

        let mut value_loss = 0.0;
        for (k, y) in step.targets.iter().enumerate() {
            let (v, vtape) = nn::forward(&heads.spec, &heads.params[k], &step.input)?;
            let err = v[0] - y;
            value_loss += err * err;
            // Ascent direction on -c1 * (v - y)^2.
            let g = nn::backward(&heads.spec, &heads.params[k], &vtape, &[-2.0 * c1 * err / b])?;
            head_grads[k].add_scaled(&g, 1.0);
        }

        total += (surrogate - c1 * value_loss + c2 * entropy) / b;

        let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
        let unclipped_active = ratio * step.advantage <= clipped * step.advantage;
        let d_logp = if unclipped_active { step.advantage * ratio } else { 0.0 };
        let dlogp_alpha = dirichlet::log_pdf_grad_alpha(&alpha, &step.action);
        let dent_alpha = dirichlet::entropy_grad_alpha(&alpha);
        let out_grad: Vec<f64> = dlogp_alpha
            .iter()
            .zip(&dent_alpha)
            .map(|(dl, de)| (d_logp * dl + c2 * de) / b)
            .collect();
        actor_grad.add_scaled(&nn::backward(policy, params, &tape, &out_grad)?, 1.0);
    }

    Ok((total, actor_grad, head_grads))
}

/// Trains a stochastic Dirichlet policy with clipped-ratio updates.
pub fn train_ppo(
    data: &MarketData,
    policy: &LayerSpec,
    cfg: &PpoConfig,
    seed: u64,
) -> Result<(ParamVector, CriticHeads, TrainLog), AlgoError> {
    cfg.validate()?;
    if policy.head != OutputHead::Softplus {
        return Err(AlgoError::InvalidConfig(
            "stochastic policies require a softplus output head".into(),
        ));
    }
    let episode_length = cfg.episode_length();
    data.valid_start_range(episode_length, cfg.action_period)?;

    let mut params = nn::init_params(policy, &mut rng::stream(seed, "init"));
    let mut heads = CriticHeads::init(
        data.windows.input_size(),
        &cfg.critic_hidden,
        N_REWARD_COMPONENTS,
        &mut rng::stream(seed, "critic-init"),
    );
    let mut adam_actor = AdamState::new(params.len(), cfg.learning_rate);
    let mut adam_heads: Vec<AdamState> = heads
        .params
        .iter()
        .map(|p| AdamState::new(p.len(), cfg.learning_rate))
        .collect();
    let mut roll = rng::stream(seed, "rollout");
    let mut shuffle_rng = rng::stream(seed, "shuffle");
    let mut log = TrainLog::default();

    for iteration in 0..cfg.iterations {
        let t0 = Instant::now();

        // Collect a batch with the current (old) policy.
        let mut trajs = Vec::with_capacity(cfg.actors);
        for _ in 0..cfg.actors {
            let start = data.sample_start(episode_length, cfg.action_period, &mut roll)?;
            let episode = EpisodeSpec {
                start,
                length: episode_length,
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

        // Freeze targets, advantages, and old log-densities for the batch.
        let mut steps = Vec::new();
        let (mut obj, mut ret, mut sharpe, mut antibias) = (0.0, 0.0, 0.0, 0.0);
        for traj in &trajs {
            let targets = critic_targets(traj, &heads, cfg.gamma, data.windows)?;
            let advs = advantages(traj, &heads, &targets, data.windows)?;
            let logps = traj
                .log_densities
                .as_ref()
                .expect("stochastic rollouts record log densities");
            for s in 0..traj.n_steps() {
                let window = data
                    .windows
                    .get(traj.decision_indices[s])
                    .expect("trajectory decisions lie within the window set");
                steps.push(PpoStep {
                    input: window.tensor.clone(),
                    action: traj.weights[s].clone(),
                    logp_old: logps[s],
                    advantage: advs[s],
                    targets: targets[s].clone(),
                });
            }
            let comps = compute_reward_components(traj);
            obj += env::aggregate_reward(&comps, &cfg.mixing);
            ret += comps.ret;
            sharpe += comps.sharpe;
            antibias += comps.antibias;
        }

        if cfg.normalize_advantages && steps.len() >= 2 {
            let n = steps.len() as f64;
            let mean = steps.iter().map(|s| s.advantage).sum::<f64>() / n;
            let var =
                steps.iter().map(|s| (s.advantage - mean) * (s.advantage - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 1e-12 {
                for s in &mut steps {
                    s.advantage = (s.advantage - mean) / sd;
                }
            }
        }

        // Optimize the surrogate for several epochs of shuffled minibatches.
        let mut grad_norm_sum = 0.0;
        let mut n_updates = 0usize;
        for _ in 0..cfg.epochs {
            let mut order: Vec<usize> = (0..steps.len()).collect();
            order.shuffle(&mut shuffle_rng);
            for chunk in order.chunks(cfg.minibatch) {
                let minibatch: Vec<PpoStep> = chunk.iter().map(|&i| steps[i].clone()).collect();
                let (_, actor_grad, head_grads) = ppo_full_loss(
                    &minibatch,
                    policy,
                    &params,
                    &heads,
                    cfg.epsilon,
                    cfg.c1,
                    cfg.c2,
                )?;
                nn::adam_step(&mut params, &actor_grad, &mut adam_actor, true)?;
                for (k, hg) in head_grads.iter().enumerate() {
                    nn::adam_step(&mut heads.params[k], hg, &mut adam_heads[k], true)?;
                }
                grad_norm_sum += actor_grad.l2_norm();
                n_updates += 1;
            }
        }

        let a = cfg.actors as f64;
        log.records.push(EpochRecord {
            epoch: iteration,
            objective: obj / a,
            return_comp: ret / a,
            sharpe_comp: sharpe / a,
            antibias_comp: antibias / a,
            grad_norm: grad_norm_sum / n_updates as f64,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    Ok((params, heads, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_windows, daily_returns, generate_synthetic, SyntheticSpec};

    #[test]
    fn surrogate_matches_hand_examples() {
        // Positive advantage, ratio already inside the band: unclipped.
        assert_eq!(ppo_surrogate(1.2, 1.0, 0.2), 1.2);
        // Negative advantage, ratio below the band: the clamp binds and the
        // objective is the more pessimistic clipped value.
        assert_eq!(ppo_surrogate(0.5, -1.0, 0.2), -0.8);
        // Positive advantage, ratio above the band: clipped at 1 + eps.
        assert_eq!(ppo_surrogate(1.5, 2.0, 0.2), 2.4);
    }

    #[test]
    fn surrogate_with_huge_epsilon_is_plain_importance_weighting() {
        for &ratio in &[0.01, 0.5, 1.0, 1.7, 25.0] {
            for &adv in &[-2.0, -0.3, 0.0, 0.4, 3.0] {
                let s = ppo_surrogate(ratio, adv, 1e18);
                assert_eq!(s, ratio * adv, "ratio {ratio}, advantage {adv}");
            }
        }
    }

    #[test]
    fn surrogate_gradient_vanishes_outside_the_band() {
        let h = 1e-6;
        let d_at = |r: f64, a: f64| {
            (ppo_surrogate(r + h, a, 0.2) - ppo_surrogate(r - h, a, 0.2)) / (2.0 * h)
        };
        // Beyond 1 + eps with positive advantage: flat.
        assert_eq!(d_at(1.5, 1.0), 0.0);
        // Below 1 - eps with negative advantage: flat.
        assert_eq!(d_at(0.5, -1.0), 0.0);
        // Inside the band the slope is the advantage.
        assert!((d_at(1.1, 1.0) - 1.0).abs() < 1e-9);
        assert!((d_at(0.9, -2.0) + 2.0).abs() < 1e-9);
    }

    struct Fixture {
        returns: crate::data::ReturnsMatrix,
        windows: crate::data::WindowSet,
    }

    fn fixture(seed: u64) -> Fixture {
        let spec = SyntheticSpec::uniform(3, 90, 0.0002, 0.012, seed);
        let panel = generate_synthetic(&spec).unwrap();
        let returns = daily_returns(&panel).unwrap();
        let windows = build_windows(&panel, 4, false).unwrap();
        Fixture { returns, windows }
    }

    /// Builds frozen steps by rolling a collection policy, then returns a
    /// different evaluation parameter vector so ratios differ from one.
    fn frozen_batch(fx: &Fixture) -> (LayerSpec, ParamVector, CriticHeads, Vec<PpoStep>) {
        let policy = LayerSpec::new(vec![fx.windows.input_size(), 5, 3], OutputHead::Softplus);
        let collect_params = nn::init_params(&policy, &mut rng::stream(40, "init"));
        let heads =
            CriticHeads::init(fx.windows.input_size(), &[4], 3, &mut rng::stream(41, "c"));
        let episode = EpisodeSpec { start: 8, length: 12, action_period: 3 };
        let mut roll = rng::stream(42, "rollout");
        let traj = rollout_stochastic(
            &fx.windows,
            &fx.returns,
            &policy,
            &collect_params,
            &episode,
            &mut roll,
        )
        .unwrap();
        let logps = traj.log_densities.as_ref().unwrap();
        // Regression targets near the current values and O(1) advantages keep
        // the loss magnitude moderate, so finite differences stay accurate.
        let mut tr = rng::stream(44, "targets");
        let steps: Vec<PpoStep> = (0..traj.n_steps())
            .map(|s| {
                let input = fx.windows.get(traj.decision_indices[s]).unwrap().tensor.clone();
                let values = heads.values(&input).unwrap();
                PpoStep {
                    action: traj.weights[s].clone(),
                    logp_old: logps[s],
                    advantage: rand::Rng::gen_range(&mut tr, -1.0..1.0),
                    targets: values
                        .iter()
                        .map(|v| v + rand::Rng::gen_range(&mut tr, -0.5..0.5))
                        .collect(),
                    input,
                }
            })
            .collect();

        // Evaluate at perturbed parameters so the ratios are not all one.
        let mut eval_params = collect_params.clone();
        let mut prng = rng::stream(43, "perturb");
        for v in &mut eval_params.values {
            *v += 0.05 * rand::Rng::gen_range(&mut prng, -1.0..1.0);
        }
        (policy, eval_params, heads, steps)
    }

    #[test]
    fn full_loss_gradient_matches_finite_differences() {
        let fx = fixture(44);
        let (policy, params, mut heads, steps) = frozen_batch(&fx);
        let (epsilon, c1, c2) = (0.2, 0.7, 0.05);

        // The surrogate is non-differentiable exactly at the clip boundary;
        // confirm the fixture sits clear of it so finite differences apply.
        for step in &steps {
            let (out, _) = nn::forward(&policy, &params, &step.input).unwrap();
            let alpha: Vec<f64> = out.iter().map(|v| v + 1.0).collect();
            let ratio = (dirichlet::log_pdf(&alpha, &step.action) - step.logp_old).exp();
            assert!(
                (ratio - (1.0 - epsilon)).abs() > 1e-3 && (ratio - (1.0 + epsilon)).abs() > 1e-3,
                "fixture ratio {ratio} sits too close to the clip boundary"
            );
        }

        let (_, actor_grad, head_grads) =
            ppo_full_loss(&steps, &policy, &params, &heads, epsilon, c1, c2).unwrap();

        let h = 1e-5;
        let mut probe = params.clone();
        for i in 0..probe.len() {
            let orig = probe.values[i];
            probe.values[i] = orig + h;
            let hi = ppo_full_loss(&steps, &policy, &probe, &heads, epsilon, c1, c2).unwrap().0;
            probe.values[i] = orig - h;
            let lo = ppo_full_loss(&steps, &policy, &probe, &heads, epsilon, c1, c2).unwrap().0;
            probe.values[i] = orig;
            let numeric = (hi - lo) / (2.0 * h);
            let a = actor_grad.values[i];
            // Central differences on an O(1) loss bottom out near 1e-10
            // absolute accuracy, so coordinates below 3e-6 are held to that
            // absolute precision rather than a meaningless relative one.
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(3e-6);
            assert!(err < 1e-4, "actor param {i}: analytic {a}, numeric {numeric}, err {err}");
        }
        for k in 0..heads.n_components() {
            for i in 0..heads.params[k].len() {
                let orig = heads.params[k].values[i];
                heads.params[k].values[i] = orig + h;
                let hi =
                    ppo_full_loss(&steps, &policy, &params, &heads, epsilon, c1, c2).unwrap().0;
                heads.params[k].values[i] = orig - h;
                let lo =
                    ppo_full_loss(&steps, &policy, &params, &heads, epsilon, c1, c2).unwrap().0;
                heads.params[k].values[i] = orig;
                let numeric = (hi - lo) / (2.0 * h);
                let a = head_grads[k].values[i];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(3e-6);
                assert!(err < 1e-4, "head {k} param {i}: analytic {a}, numeric {numeric}");
            }
        }
    }

    #[test]
    fn unbounded_loss_without_value_terms_is_importance_weighting() {
        let fx = fixture(45);
        let (policy, params, heads, steps) = frozen_batch(&fx);
        let (loss, _, _) = ppo_full_loss(&steps, &policy, &params, &heads, 1e18, 0.0, 0.0).unwrap();

        let b = steps.len() as f64;
        let mut manual = 0.0;
        for step in &steps {
            let (out, _) = nn::forward(&policy, &params, &step.input).unwrap();
            let alpha: Vec<f64> = out.iter().map(|v| v + 1.0).collect();
            let ratio = (dirichlet::log_pdf(&alpha, &step.action) - step.logp_old).exp();
            manual += ratio * step.advantage / b;
        }
        assert_eq!(loss, manual, "with no clip and no value/entropy terms the objectives match");
    }

    #[test]
    fn ppo_training_is_deterministic() {
        let fx = fixture(46);
        let data = MarketData::new(&fx.windows, &fx.returns);
        let policy = LayerSpec::new(vec![fx.windows.input_size(), 5, 3], OutputHead::Softplus);
        let cfg = PpoConfig {
            iterations: 3,
            actors: 2,
            horizon: 4,
            action_period: 3,
            minibatch: 4,
            epochs: 2,
            critic_hidden: vec![4],
            ..PpoConfig::default()
        };
        let (p1, h1, l1) = train_ppo(&data, &policy, &cfg, 7).unwrap();
        let (p2, h2, l2) = train_ppo(&data, &policy, &cfg, 7).unwrap();
        assert_eq!(p1.values, p2.values);
        for (a, b) in h1.params.iter().zip(&h2.params) {
            assert_eq!(a.values, b.values);
        }
        assert!(l1.same_results(&l2));
        assert_eq!(l1.records.len(), 3);
    }
}
