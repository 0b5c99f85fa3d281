//! Simulated asynchronous message-passing system with crash failures,
//! implementing the register substrate via majority-quorum replication,
//! plus the convoy-effect queueing model and scenario files.

pub mod convoy;
pub mod scenario;
pub mod sim;

pub use sim::{NetConfig, NetShm, Netsim, SimReport};
