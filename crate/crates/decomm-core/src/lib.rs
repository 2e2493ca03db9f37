//! Planning for two agents that act on independent local processes and can
//! exchange their states at a cost.
//!
//! The crate is `no_std` with `alloc`. Enable the `std` feature for
//! `std::error::Error` on [`Error`].

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod domains;
pub mod error;
pub mod lgo;
pub mod mmdp;
pub mod model;
pub mod msbpi;
pub mod myopic;
pub mod options;
pub mod value;

pub use error::{Error, Result};
pub use model::{Action, AgentModel, DecMdpCom, FactoredState, GoalPredicate, JointKey, Local, Rewards, Violation};
pub use value::ValueTable;
