//! Training and backtesting engine for reinforcement-learning portfolio
//! allocation.
//!
//! The crate is organized as a pipeline:
//!
//! * [`data`] — price panels (CSV or synthetic), daily returns, and the
//!   feature windows that policies observe.
//! * [`nn`] — a small fully-connected network with exact reverse-mode
//!   gradients and an Adam optimizer; deterministic checkpoints.
//! * [`dirichlet`] — Dirichlet sampling, log-density, and entropy used by
//!   the stochastic policy head.
//! * [`env`] — episode rollouts over a panel and the decomposed reward
//!   (return / Sharpe / concentration-penalty components).
//! * [`algo`] — the four trainers: actor-only gradient ascent, a
//!   reward-clipping variant, actor-critic with per-component value heads,
//!   and PPO with a clipped surrogate.
//! * [`metrics`] — annualized performance statistics over daily returns and
//!   equity curves.
//! * [`baselines`] — fixed-weight reference allocations.
//! * [`backtest`] — monthly-rebalanced simulation with intra-period weight
//!   drift, plus CSV report exports.
//! * [`config`] / [`cli`] — flat `key = value` run configuration and the
//!   `train` / `backtest` / `compare` / `sweep` / `synth` commands.
//!
//! All randomness flows from a single seed through named sub-streams (see
//! [`rng`]), so identical configuration yields bitwise-identical results.

pub mod algo;
pub mod backtest;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod data;
pub mod dirichlet;
pub mod env;
pub mod metrics;
pub mod nn;
pub mod rng;
