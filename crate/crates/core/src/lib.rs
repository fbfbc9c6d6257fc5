//! Reinforcement learning assembled from lenses, parametrised optics and
//! iteration contexts.
//!
//! - [`dist`]: finite-support probability distributions.
//! - [`optic`]: lenses, stochastic mixed optics, the continuation functor.
//! - [`para`]: externally parametrised lenses.
//! - [`iteration`]: iteration data, streams, environment combs.
//! - [`mdp`]: MDPs, policies, environment catalog.
//! - [`bellman`]: Bellman optics, sample targets, value tables.
//! - [`algorithms`]: dynamic programming and learners built from model
//!   lenses, update rules and environment combs, plus direct oracles.
//! - [`approx`]: Q-networks, softmax policies, actor-critic.

pub mod algorithms;
pub mod approx;
pub mod bellman;
pub mod dist;
pub mod error;
pub mod iteration;
pub mod mdp;
pub mod optic;
pub mod para;
pub mod rng;

pub use dist::FiniteDist;
pub use error::{Error, Result};
pub use rng::RngState;
