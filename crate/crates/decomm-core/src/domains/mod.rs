//! The production and meeting scenarios and the strategies compared on them.

pub mod meeting;
pub mod production;

pub use meeting::{build_meeting, subgoal_strategy, GridConfig, MeetingPolicy};
pub use production::{build_production, Production, ProductionConfig, ProductionOption, ProductionState};

use crate::lgo::LgoMechanism;
use crate::msbpi::GeneralMechanism;
use crate::myopic::CommPolicy;

/// How the agents act and when they exchange information.
#[derive(Debug, Clone)]
pub enum Strategy {
    NoCommunication,
    /// Exchange after every step at no cost.
    Ideal,
    /// Same behaviour as `Ideal`, paying for every exchange.
    AlwaysCommunicate,
    /// Exchange when an agent enters the region of radius `p * d / 2`
    /// around the meeting point.
    SubGoals(f64),
    MyopicGreedy(CommPolicy),
    Lgo(LgoMechanism),
    General(GeneralMechanism),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::NoCommunication => "no-comm",
            Strategy::Ideal => "ideal",
            Strategy::AlwaysCommunicate => "always",
            Strategy::SubGoals(_) => "subgoals",
            Strategy::MyopicGreedy(_) => "myopic",
            Strategy::Lgo(_) => "lgo",
            Strategy::General(_) => "general",
        }
    }
}
