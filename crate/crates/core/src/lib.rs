//! Boolean circuit workbench.
//!
//! Circuits over {AND, OR, NOT}, the gate-elimination rewrite system, an
//! exact circuit-complexity oracle for small functions, Y-tree
//! decomposition of simple-extension circuits, splice codes, the
//! simple-extension solver and the BPIS reduction.

pub mod acceptance;
pub mod bpis;
pub mod canon;
pub mod circuit;
pub mod oracle;
pub mod rewrite;
pub mod sig;
pub mod solver;
pub mod splice;
pub mod tt;
pub mod xor;
pub mod ytree;

pub use circuit::{Circuit, Gate, GateId, GateKind, SizeMeasure, VarRef};
pub use tt::{PartialTruthTable, Permutation, TruthTable};
