//! Fault detection and diagnosis for robot swarms via antibody population
//! dynamics, together with the deterministic foraging simulator used to
//! exercise it.
//!
//! The crate is organised around the data flow of one experiment:
//!
//! * [`robot`] models the physical robot: differential-drive kinematics,
//!   degradation coefficients, power budget, and the sensing handshake.
//! * [`behavior`] provides the foraging controllers (GPF and LPF), the two
//!   arena layouts, and ad-hoc network connectivity.
//! * [`sim`] advances the world on a fixed 6 Hz clock and records an
//!   [`log::ExperimentLog`].
//! * [`matching`] is the paratope matching kernel; [`repertoire`] manages
//!   behavioural windows and the antibody repertoires built from them;
//!   [`dynamics`] runs the population updates, detection, diagnosis, and
//!   the order-escalation training that produces labelled repertoires.
//! * [`metrics`] computes detection quality and foraging summaries from
//!   recorded logs.
//!
//! Everything is deterministic: a scenario configuration plus a seed fully
//! determines the experiment log, byte for byte.

pub mod behavior;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod log;
pub mod matching;
pub mod metrics;
pub mod repertoire;
pub mod rng;
pub mod robot;
pub mod sim;

pub use error::Error;
