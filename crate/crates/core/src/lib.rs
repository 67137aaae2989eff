//! Contextual UCB value targeting for conversational BEV interventions.
//!
//! A bandit picks which pair of BEV-related values to emphasise for each
//! demographic context, a wizard turns the chosen values into a one-sentence
//! intervention, and virtual participants (a synthetic persona or a remote
//! chat-completion model) report their preference before and after. The
//! [`stats`] module compares the resulting preference distributions against a
//! reference survey.

pub mod bandit;
pub mod demographics;
pub mod error;
pub mod experiment;
pub mod export;
pub mod participants;
pub mod rng;
pub mod stats;
pub mod wizard;

pub use bandit::{
    normalize_reward, ucb_score, BanditContext, BanditState, Policy, UcbTable, ValueCatalog,
    ValuePairArm,
};
pub use demographics::{Demographics, DemographicProfile};
pub use error::{Error, Result};
pub use experiment::{RunConfig, TrialRecord};
pub use participants::{ChatBackend, ChatMessage, ParticipantSession, PreferenceReading, Role};
pub use stats::{Domain, Histogram};
pub use wizard::{InterventionCatalog, WizardRequest};
