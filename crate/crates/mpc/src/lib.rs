//! Replicated (2,3) secret sharing among three simulated servers.
//!
//! A [`Session`] drives the three servers in lockstep over a [`Transport`],
//! counting rounds and bytes. Boolean ([`BoolShareVec`]) and arithmetic
//! ([`ArithShareVec`]) share vectors are immutable values; every gate is
//! vectorized over all lanes of its inputs.

mod circuits;
pub mod error;
mod party;
pub mod prf;
mod session;
mod share;
pub mod transport;

pub use error::{MpcError, Result};
pub use party::PartyId;
pub use session::{PartyRuntime, RevealTo, Session};
pub use share::{width_mask, ArithShareVec, BoolShareVec, ReplicatedPair, SecretBit};
pub use transport::{Endpoint, InProcTransport, Metrics, Transport};

/// Default lane width.
pub const WORD_BITS: u32 = 64;
