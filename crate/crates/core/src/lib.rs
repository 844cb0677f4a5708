//! Frameless ALOHA random access with successive interference cancellation
//! over a Rayleigh-faded channel with capture.
//!
//! * [`capture`]: SNR sampling, the SINR capture rule and the capture
//!   probability tables used by the asymptotic solver.
//! * [`density_evolution`]: and-or tree fixed point for the asymptotic
//!   resolution probability and throughput.
//! * [`simulator`]: finite-N Monte-Carlo contention with slot-by-slot SIC
//!   and adaptive termination.
//! * [`sweep`]: grid search over the access and termination parameters.
//! * [`io`]: capture-table cache, CSV and JSON output.

pub mod capture;
pub mod cli;
pub mod density_evolution;
pub mod error;
pub mod io;
pub mod model;
pub mod simulator;
pub mod sweep;

pub use capture::{CaptureTable, ChannelParams};
pub use error::{Error, Result};
pub use model::{SnrMode, SystemParams};
pub use simulator::{Receiver, Reception, RunStats, TerminationCause};
