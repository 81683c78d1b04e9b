//! Non-cooperative energy-efficient power control games for uplink CDMA.
//!
//! Users choose transmit powers (and, in the extended games, carriers or
//! rates) to maximize reliable bits delivered per joule. The crate provides
//! the efficiency functions and target-SIR solver, the receiver SIR models
//! (matched filter, decorrelator, MMSE, plus their large-system limits),
//! best responses for each objective, a best-response dynamics engine with
//! Nash verification, the multicarrier game, and the delay-constrained
//! power/rate game.

pub mod delayqos;
pub mod dynamics;
pub mod efficiency;
pub mod error;
pub mod games;
pub mod multicarrier;
pub mod receivers;
pub mod system;

pub use dynamics::{EquilibriumReport, Game, GameState, Schedule, Status};
pub use efficiency::EfficiencyModel;
pub use error::{Error, Result};
pub use games::{Objective, PowerGame};
pub use receivers::ReceiverKind;
pub use system::{SystemParams, UserProfile};
