//! Staffing many-server service systems under delay-probability targets.
//!
//! The crate evaluates the Erlang-C delay probability (exact, continuous,
//! Halfin-Whitt and the JVLZ bounds) and solves square-root staffing models
//! for single- and multi-station systems, with deterministic or scenario-based
//! arrival rates. A discrete-event M/M/n simulator is included as an
//! independent check on the formulas.

pub mod cost;
pub mod erlang;
pub mod error;
pub mod frontier;
pub mod io;
pub mod multi_det;
pub mod normal;
pub mod quadrature;
pub mod scenario;
pub mod search;
pub mod sim;
pub mod stoch_multi;
pub mod stoch_single;

pub use erlang::{
    erlang_c_continuous, erlang_c_exact, erlang_c_sqrt, halfin_whitt, jvlz_bounds, BoundPair,
    DelayModel, DelayProbability, HwQuantities, QueueParams,
};
pub use error::{Result, StaffingError};
