//! Secure x-vector speaker embedding extraction over secret-shared
//! fixed-point arithmetic.
//!
//! Two backends share one engine: two-party additive sharing with Beaver
//! triples and three-party replicated sharing. All correlated randomness
//! comes from a trusted dealer ahead of the online phase.

pub mod engine;
pub mod error;
pub mod preprocessing;
pub mod ring_fixed;
pub mod runner;
pub mod sharing;
pub mod transport;
pub mod xvector;

pub use engine::{Engine, EngineConfig, Scheme, Secret, TruncMode};
pub use error::{Error, Result};
pub use ring_fixed::{FixedPointConfig, RingElement};
