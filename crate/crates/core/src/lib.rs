//! Sequence-domain simulation and dynamic equivalencing of PMSG wind farms
//! under asymmetrical grid faults.
//!
//! The crate is organised bottom-up:
//!
//! * [`phasor`]: phasors, symmetrical components, dq orientation
//! * [`pmsg`]: one turbine (power curve, current references, DC link, recovery ramp)
//! * [`clustering`]: critical powers and the three response clusters
//! * [`network`]: radial collector feeders and terminal-voltage solvers
//! * [`aggregation`]: capacity-weighted and multi-segment recovery equivalents
//! * [`grid`]: Thevenin grid, fault interconnection, outer PCC-voltage loop
//! * [`sim`]: fixed-step simulation, traces, metrics and model comparison
//! * [`io`]: farm and scenario files

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod clustering;
pub mod error;
pub mod grid;
pub mod io;
pub mod network;
pub mod phasor;
pub mod pmsg;
pub mod sim;

pub use error::{Error, Result};
pub use phasor::{DqPair, Phasor, SequenceSet};
