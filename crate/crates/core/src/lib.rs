//! Best-case optimal stopping under rectangular multiple priors on finite
//! event trees.
//!
//! The engine computes the robust Snell envelope `R` and its strict
//! counterpart `R⁺` by backward induction, extracts optimal stopping rules and
//! maximising priors, and splits `R` into a universal martingale part and an
//! increasing part. A brute-force oracle recomputes the values from their
//! definition for cross-checking, and [`pricing`] applies the machinery to an
//! American knock-in barrier put with drift ambiguity.

pub mod decomposition;
pub mod error;
pub mod filtration;
pub mod fixtures;
pub mod oracle;
pub mod pricing;
pub mod priors;
pub mod random;
pub mod snell;

pub use decomposition::{universal_decompose, Decomposition, Diagnostics, PremiseReport};
pub use error::{Error, Result};
pub use filtration::{AdaptedFamily, EventTree, Label, NodeIdx, NodeRecord, StoppingRule};
pub use oracle::{crosscheck, BruteForce, CrosscheckReport};
pub use pricing::{price, BarrierDirection, CrrParams, PriceReport};
pub use priors::{DensityProcess, PriorMode, PriorSet, Selection};
pub use snell::{solve, SnellSolution};
