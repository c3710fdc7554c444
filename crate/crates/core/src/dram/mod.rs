//! DRAM organization, address mapping, activation accounting, disturbance
//! thresholds and target-row-refresh.

mod collisions;
mod flips;
mod geometry;
mod ledger;
mod mapping;
mod trr;

pub use collisions::{bank_collision_probability, collisions_for, BankHistogram};
pub use flips::{evaluate_flips, DistanceThreshold, Flip, FlipEvaluator, FlipModel};
pub use geometry::{BankId, DramGeometry, DramLocation};
pub use ledger::{ActivationLedger, WindowCounts, DEFAULT_WINDOW_NS};
pub use mapping::{AddressMapping, MappingSpec};
pub use trr::{apply_trr, TrrConfig};
