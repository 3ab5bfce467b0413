//! Multi-dimensional auctions for crowdsourced mobile video streaming.
//!
//! Nearby users pool their cellular links: whenever a user's link frees up
//! it auctions its next `K` segment downloads among its neighbours (itself
//! included). Bids carry both a bitrate and a price, so the auction picks
//! who receives each segment, at which bitrate, and what they pay.
//!
//! - [`model`]: utility, cost, and welfare of a downloading operation
//! - [`somd`]: single-segment second-score auction
//! - [`momd`]: multi-segment Vickrey-score auction and brute-force oracles
//! - [`strategy`]: optimal bids, the participation filter, baseline ABR rules
//! - [`engine`]: trace-driven discrete-event simulator and experiment runner
//! - [`io`]: trace/config parsing, synthetic traces, result emission

pub mod engine;
pub mod error;
pub mod io;
pub mod model;
pub mod momd;
pub mod somd;
pub mod strategy;

pub use error::{AuctionError, IoError, ModelError, SimError};
pub use model::{BitrateLadder, CostModel, UserId, UserProfile, UserState};
