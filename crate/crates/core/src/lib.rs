//! Repeated balls-into-bins: the original process, the Tetris auxiliary
//! process and their coupling, an exact rational oracle for tiny instances,
//! analytic bound calculators and a seeded Monte Carlo harness.

pub mod bounds;
pub mod configuration;
pub mod coupling;
pub mod error;
pub mod harness;
pub mod ledger;
pub mod metrics;
pub mod oracle;
pub mod process;
pub mod rng;
pub mod tetris;
pub mod topology;

pub use configuration::{Configuration, LoadStats};
pub use error::{Error, Result};
pub use ledger::{select_ball, BallId, BallLedger, Strategy};
pub use process::{run, step, DestinationDraws, Process, RoundRecord, Tracking, Trajectory};
pub use topology::{Topology, TopologySpec};
