//! Explanation-driven black-box adversarial attacks via feature substitution.
//!
//! The pipeline: train a small classifier, compute Shapley-value
//! explanations, select one "golden" sample per class offline, then craft
//! adversarial inputs by substituting a victim's most important features
//! with the golden sample's — spending a constant number of online queries
//! per attacked sample. The same substitution doubles as a backdoor trigger
//! when the attacker can poison training data, and a MAD/Gram activation
//! detector measures how visible the perturbations are to a defense.

pub mod attack;
pub mod core;
pub mod data;
pub mod defense;
pub mod error;
pub mod explainer;
pub mod model;

pub use error::{Result, XsubError};
