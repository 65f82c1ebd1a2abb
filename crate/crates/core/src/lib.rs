//! Deterministic simulator of a digital ecosystem.
//!
//! Users submit requests to their local habitat, where a population of
//! agent-sequences evolves a response. Delivered responses migrate along
//! probabilistic habitat connections that strengthen or decay with the
//! success of the migrants, and ecology-style measurements (succession,
//! species abundance, species-area) are taken over the resulting trace and
//! snapshot.

pub mod analysis;
pub mod config;
pub mod ecology;
pub mod error;
pub mod evolve;
pub mod model;
pub mod network;
pub mod rng;
pub mod sim;
pub mod userbase;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use sim::Ecosystem;
