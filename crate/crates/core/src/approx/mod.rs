//! Function approximation: Q-networks trained by semi-gradient TD, softmax
//! policies and actor-critic, on a small reverse-mode gradient tape.
//!
//! The learners reuse the tabular wiring. Parameters become a
//! [`ParamVector`], the model's backward pass returns a gradient instead of
//! a table entry, and the update rule is a gradient step.

mod learn;
mod net;
mod tape;

pub use learn::{
    actor_critic_train, actor_critic_update, dqn_train, full_gradient_q_update, semi_gradient, semi_gradient_q_update,
    sgd_step, softmax_policy, td_target, AcConfig, AcDirection, AcParams, ActorCritic, DqnConfig, NetSample,
    TargetRule,
};
pub use net::{Activation, Architecture, Block, Features, Init, ParamVector, QNetwork, INIT_STREAM};
pub use tape::{finite_difference, grad, Tape, Var};
