//! Simulator and analysis toolkit for Rowhammer induced by network traffic.
//!
//! The pipeline runs from link bandwidth to packets, from packets to kernel
//! memory accesses ([`attack`]), through the last-level cache ([`cache`]) and
//! the memory controller's page policy ([`memctrl`]) into per-window row
//! activation counts ([`dram`]), which a threshold model turns into bit flips.
//! [`exploit`] estimates what a random flip buys an attacker, and
//! [`classifier`] recovers the page policy from access timings.

pub mod attack;
pub mod cache;
pub mod classifier;
pub mod cli;
pub mod config;
pub mod dram;
pub mod error;
pub mod exploit;
pub mod memctrl;
pub mod report;

pub use error::{Error, Result};
