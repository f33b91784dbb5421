//! Self-organizing ad-hoc communication networks built by learning agents.
//!
//! Agents are points in a square (or cube) world. Each one controls a single
//! quantity, its transmission radius, and two agents are linked when each lies
//! inside the other's (possibly attenuated) range. A Hamiltonian cost over the
//! resulting graph rewards a moderate degree and short links while charging
//! for radio energy. Agents learn to grow or shrink their radius with an
//! online deep Q-network trained on the exact Hamiltonian change of each move.
//!
//! Module map:
//!
//! - [`geometry`]: positions, distances, mobility, Manhattan obstacles.
//! - [`topology`]: adjacency construction, degrees, giant component, metrics.
//! - [`hamiltonian`]: the cost function and its incremental forms.
//! - [`neuralnet`]: the 3-32-32-2 value network with Adam.
//! - [`dqn`]: observations, epsilon-greedy policy, TD targets, pretraining.
//! - [`strategies`]: base, smart and cooperative per-step policies.
//! - [`harness`]: scenarios, ensembles, sweeps and file outputs.

pub mod dqn;
pub mod error;
pub mod geometry;
pub mod hamiltonian;
pub mod harness;
pub mod neuralnet;
pub mod strategies;
pub mod topology;
pub mod world;

pub use error::{Error, Result};
