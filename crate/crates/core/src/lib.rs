//! Battery-assisted LOCC toolkit.
//!
//! Pure bipartite states are represented by their squared Schmidt
//! coefficients. A transformation between two states with the help of an
//! entanglement battery is described by a conditional distribution
//! `P(i, w | j)` over an initial index `i`, a final index `j` and a work value
//! `w` (bits of entanglement deposited into the battery). This crate decides
//! whether such a distribution exists, builds explicit witnesses, lifts them
//! to doubly stochastic matrices on a finite battery, and evaluates the
//! fluctuation identities those distributions satisfy.
//!
//! All logarithms are base 2.

pub mod battery;
pub mod error;
pub mod lift;
pub mod numeric;
pub mod protocols;
pub mod schmidt;
pub mod simplex;
pub mod theorems;
pub mod transfer;

pub use battery::{BatteryAmplitudes, BatteryConfig};
pub use error::{Error, Result};
pub use lift::{BoundaryStates, CompletedBistochastic, LiftedTransfer};
pub use schmidt::{PureEnsemble, SchmidtVector};
pub use theorems::TheoremReport;
pub use transfer::{TransferMatrix, WorkDistribution, WorkGrid};
