//! Risk-aware rendezvous planning between an aerial vehicle and a ground
//! vehicle on a known road.
//!
//! The planner learns how the driver deviates from historical traffic speed
//! ([`behavior`]), predicts where the driver will be, and solves a compact
//! waypoint optimal control problem ([`ocp`]) that keeps an abort branch
//! feasible at all times. When the decision window closes, a downside-energy
//! check ([`risk`]) decides between continuing to the rendezvous and aborting.
//! [`mission`] runs that loop and [`sim`] provides the ground-truth world used
//! to exercise it.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behavior;
pub mod config;
pub mod energy;
pub mod error;
pub mod mission;
pub mod ocp;
pub mod path;
pub mod risk;
pub mod sim;
pub mod trace;

pub use error::{RdvError, Result};
