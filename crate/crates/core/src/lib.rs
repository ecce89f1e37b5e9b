//! Logical neural networks as action constraints for a text-game Q-learner.
//!
//! * [`logic`]: weighted Łukasiewicz logic graph with bounds inference,
//!   contradiction measurement and contradiction-loss training.
//! * [`rules`]: the `a & ~b -> c` rule language.
//! * [`world`]: the coin-collector text game.
//! * [`grounding`]: observation text to truth values.
//! * [`agent`]: the Q-learning agent.
//! * [`constraint`]: shield and guide action selection.
//! * [`harness`]: experiment driver, comparison and reporting.

pub mod agent;
pub mod constraint;
pub mod grounding;
pub mod harness;
pub mod logic;
pub mod rules;
pub mod world;
