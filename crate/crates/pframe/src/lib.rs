//! Sparse Pauli-frame simulation of dynamic Clifford circuits.
//!
//! Frames are phase-free and stored only for shots that have seen a fault.
//! Noise sites are drawn with geometric skips, and protocol trees route shots
//! between circuits according to their measurement records.

pub mod circuit;
pub mod exec;
pub mod gate;
pub mod noise;
pub mod pauli;
pub mod sample;
pub mod store;
pub mod tree;
pub mod validate;

pub use circuit::{BitRef, Circuit, Decode, DecodeTarget, Expr, Instr, NodeId};
pub use exec::{execute, execute_detailed, execute_sequential, run_single, ExecError, ExecOptions, Injection, SingleOptions, Tally};
pub use gate::{Basis, CliffordAction, Gate};
pub use noise::{MultiChannelParams, NoiseChannel, NoiseModel, ScemParams};
pub use pauli::{Letter, PauliFrame, Qubit};
pub use store::{Record, ShotState, ShotStore};
pub use tree::{Edge, IdealDecode, LogicalCheck, Next, ProtocolTree, Terminal};
pub use validate::{validate_tree, ValidationReport};
