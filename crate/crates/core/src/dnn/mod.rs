//! Fully connected Q-network baseline trained from replayed transitions.
//!
//! Each agent owns one network per objective (plus lagged target copies and
//! Adam state) and a single replay buffer; both objectives draw their own
//! minibatch from it every slot.

pub mod adam;
pub mod agent;
pub mod mlp;
pub mod replay;

pub use adam::{AdamConfig, AdamState};
pub use agent::{td_targets, DnnAgent, DnnAgentParams, QNetwork};
pub use mlp::{td_loss_and_grad, Dense, Grads, Mlp};
pub use replay::{ReplayBuffer, StoredTransition};
