//! Simulation and analysis of card authorization as online learning under
//! impaired feedback.
//!
//! Labels reach the learner late ([`model::DelayModel`]), sometimes never
//! ([`model::censor`]), sometimes flipped ([`model::CorruptionChannel`]), and
//! never for declined transactions ([`model::observation_gate`]). The
//! [`harness`] runs learners from [`learners`] against worlds from
//! [`environments`] and accounts regret against the best fixed policy;
//! [`analysis`] evaluates the closed-form regret floors and indices.

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod environments;
pub mod error;
pub mod harness;
pub mod learners;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
