//! Linear transport flows on directed metric networks.
//!
//! The crate models a network as a finite simple directed graph whose edges
//! are copies of the unit interval, parametrized against the flow direction
//! (tail at 1, head at 0). On top of that it provides:
//!
//! - structural matrices of the network (incidence, adjacency, line-graph
//!   adjacency) with exact integer entries,
//! - discretized `L¹` edge functions and the embed/cut-off operators between
//!   networks of different sizes,
//! - the transport semigroup (exact shift evaluator for unit velocities and
//!   a first-order upwind stepper for general velocities),
//! - the closed-form resolvent of the flow generator together with
//!   pseudoresolvent and power-bound diagnostics,
//! - growing graph sequences, their direct limits, and a harness measuring
//!   resolvent- and semigroup-approximation errors along the sequence.
//!
//! The crate is `no_std` (with `alloc`); all IO lives in the companion CLI
//! crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod flow;
pub mod graph;
pub mod grid;
pub mod matrices;
pub mod resolvent;
pub mod rng;
pub mod sparse;
pub mod tk;

pub use flow::{evolve_exact, evolve_upwind, in_domain, semigroup_law_check, Evolver, FlowSystem};
pub use graph::{ladder_sequence, DirectLimit, DirectedGraph, GraphHomomorphism, GraphSequence};
pub use grid::{ApproxPair, GridFunction};
pub use matrices::{BoundaryOperator, NetworkMatrices, VelocityProfile};
pub use resolvent::{
    apply_r_lambda, hille_yosida_bound, pseudoresolvent_defect, ResolventOperator,
};
pub use sparse::SparseMatrix;
pub use tk::{ConvergenceReport, TkExperiment};

pub use num_complex::Complex64;
