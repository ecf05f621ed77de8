//! Consensus-free, Byzantine-tolerant, quasi-anonymous asset transfer.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod account;
pub mod agreement;
pub mod anonymity;
pub mod crypto;
pub mod encoding;
pub mod history;
pub mod predicate;
pub mod setup;
pub mod sim;
pub mod transfer;
pub mod wire;

/// Zero-based process index.
pub type ProcessId = u32;
