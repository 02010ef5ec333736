//! Slotted simulator and policy optimizer for multi-access edge computing
//! task offloading.
//!
//! Every mobile device (MD) keeps a transmission queue that feeds per-server
//! computing queues on the edge servers (ESs). Each slot a policy chooses
//! transmit powers, associations, core allocations and optional inter-server
//! migrations; the dynamics then advance the communication-computing tandem
//! queues by one slot.
//!
//! ```text
//!   arrivals ──▶ Q_i (MD) ──uplink r_i──▶ K_ij (ES j) ──cores c_ij──▶ done
//!                   │                         ▲   │
//!                   └──▶ local queue          │   └──backhaul──▶ K_ij'
//! ```
//!
//! Modules map onto the moving parts:
//!
//! - [`config`] and [`geometry`]: scenario description, validation and placement.
//! - [`model`]: per-slot state, actions and the task ledger.
//! - [`dynamics`] and [`sim`]: the one-slot step and the horizon loop.
//! - [`policies`]: per-slot decision makers.
//! - [`multihop`]: backhaul migration planning and in-transit delivery.
//! - [`mdp`]: exact MDP construction, value iteration and a brute-force oracle.
//! - [`metrics`], [`report`]: run summaries, confidence intervals and CSV output.
//! - [`sweep`]: arrival-rate sweeps and bundled presets, parallel over cells.

pub mod config;
pub mod dynamics;
pub mod exec;
pub mod geometry;
pub mod mdp;
pub mod metrics;
pub mod model;
pub mod multihop;
pub mod policies;
pub mod report;
pub mod rng;
pub mod sim;
pub mod sweep;

pub use config::{ConfigError, ScenarioConfig, ValidatedConfig};
pub use dynamics::{step, SlotRecord, StepError};
pub use metrics::{compare_runs, summarize, ComparisonRow, RunSummary};
pub use model::{Action, SystemState, TaskEntry, TaskLocation};
pub use policies::{Policy, PolicyId};
pub use sim::{run_trajectory, run_trajectory_with, RunOptions, RunOutput};
