//! Single-arm wire harnessing control stack.
//!
//! A wire anchored at a fix-point is stretched and twisted by a single
//! gripper: twisting raises the capstan friction limit of the grip, setting
//! the tension the wire sustains while it pays out, and stretching moves the
//! wire along planned clamp waypoints. The crate provides:
//!
//! - [`types`] / [`lift`] — planar domain types, fix-point frames, and the
//!   degree-2 polynomial observable lift;
//! - [`sim`] — a quasi-static wire/gripper simulator with hybrid slack/taut
//!   tension and twist-dependent grip slip, plus scripted data collection;
//! - [`koopman`] — geometric data augmentation and closed-form least-squares
//!   identification of lifted linear dynamics;
//! - [`mpc`] — the receding-horizon tracking controller in lift space and
//!   the two baselines (no-twist PI, raw-state linear MPC);
//! - [`planner`] — clamp-centric waypoint generation and merging;
//! - [`executive`] — episode orchestration: the control loop, insertion
//!   primitives, fix-point switching, and outcome adjudication;
//! - [`io`] — CSV/JSON artifacts with embedded config hashes.
//!
//! See the crate examples for runnable entry points covering each
//! capability, and the `wire-harness` binary for the pipeline CLI.

pub mod error;
pub mod executive;
pub mod io;
pub mod koopman;
pub mod lift;
pub mod mpc;
pub mod planner;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
