//! Grid traffic microsimulation and cooperative multi-agent Q-learning for
//! traffic signal control.
//!
//! The crate is organized bottom-up:
//! - [`sim`]: deterministic IDM microsimulator on an `m x n` signalized grid;
//! - [`agent_io`]: local observations, rewards, PageRank weights and the
//!   global state;
//! - [`neural`]: dense and GRU networks with hand-written backpropagation,
//!   Adam and soft target updates;
//! - [`algorithms`]: QCOMBO and the IDQN, IAC, VDN, QMIX and COMA baselines;
//! - [`harness`]: configuration, training/evaluation schedule, reference
//!   policies, transfer and CSV output.

pub mod agent_io;
pub mod algorithms;
pub mod error;
pub mod harness;
pub mod neural;
pub mod sim;

pub use error::{Error, Result};
