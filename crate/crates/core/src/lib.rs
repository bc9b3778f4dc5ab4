//! Simulation and verification of spreading for `u_t = Δu + f(u)` started
//! from indicator data `1_U` on unbounded supports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod frontspeed;
pub mod geometry;
pub mod levelsets;
pub mod numerics;
pub mod preview;
pub mod reaction;
pub mod solver;
pub mod suite;

pub use error::{Error, FormatError, Result};
pub use reaction::{InvasionVerdict, ReactionClass, ReactionKind, ReactionTerm};
