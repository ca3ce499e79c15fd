//! Joint modeling of document topics and globally ordered sentence intents.
//!
//! Every sentence carries an intent drawn from a per-document bag arranged by
//! a generalized Mallows permutation; every token is either an intent word or
//! a topic word. Inference is collapsed Gibbs sampling.

pub mod corpus;
pub mod math;
pub mod permutation;
pub mod model;
pub mod sampler;
pub mod supervised;
pub mod eval;
pub mod cli;
