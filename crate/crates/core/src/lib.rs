//! Local-time statistics and empirical processes sampled along lattice
//! sequences.

pub mod conditions;
pub mod empirical;
pub mod experiment;
pub mod fields;
pub mod ledger;
pub mod rng;
pub mod rotation;
pub mod site;
pub mod sources;
pub mod spectral;

pub use ledger::{LocalTimeLedger, Snapshot};
pub use site::LatticeSite;
