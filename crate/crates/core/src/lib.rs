//! Deniable instant messaging: wire formats, clients, a piggybacking
//! store-and-forward server, a deterministic simulator that records what a
//! network adversary sees, and the interaction-recipe toolchain.

pub mod error;
pub mod wire;
pub mod client;
pub mod recipes;
pub mod server;
pub mod sim;

/// Milliseconds since scenario start.
pub type SimTime = u64;
