//! Medical order extraction from doctor-patient dialogue.
//!
//! The crate is organised around a few pieces that can be used separately:
//!
//! - [`transcript`]: encounter records, turn rendering and dataset loading;
//! - [`orders`]: the order schema and deterministic clean-up;
//! - [`gateway`]: chat-completion backends (HTTP, replay, scripted) with retry;
//! - [`strategies`]: one-shot, ReAct and agentic extraction, selectable by name;
//! - [`metrics`]: ROUGE-1, strict type F1 and provenance F1 scoring.

pub mod gateway;
pub mod metrics;
pub mod orders;
pub mod strategies;
pub mod transcript;
