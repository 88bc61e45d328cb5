//! Long-run payoffs, partner checks and rare-mutation evolution for
//! reactive-n strategies in the infinitely repeated prisoner's dilemma.

pub mod error;
pub mod game;
pub mod history;
pub mod strategy;

pub use error::{Error, Result};
pub use game::{donation_game, stage_payoff, validate_pd, Action, GameParams};
pub use history::{history_from_index, history_index, History};
pub use strategy::{
    counting_to_reactive, embed, enumerate_deterministic_self_reactive, is_nice, parse_strategy, random_strategy,
    CountingN, MemoryN, ReactiveN, SelfReactiveN, Space, Strategy,
};
pub mod cli;
pub mod cycle;
pub mod equilibrium;
pub mod evolution;
pub mod output;
pub mod payoff;
