//! File formats, Monte-Carlo simulation, table reproduction and the command
//! line for the `decomm-core` planners.

pub mod cli;
pub mod export;
pub mod format;
pub mod reproduce;
pub mod sim;
pub mod stats;
pub mod toy;
