//! Fast Byzantine consensus: protocol engine, deterministic simulator, adversaries and
//! trace checker.

pub mod checker;
pub mod crypto;
pub mod encoding;
pub mod engine;
pub mod fuzz;
pub mod lower_bound;
pub mod quorum;
pub mod replica;
pub mod scenario;
pub mod sim;
pub mod sync;
pub mod time;
pub mod trace;
pub mod types;
