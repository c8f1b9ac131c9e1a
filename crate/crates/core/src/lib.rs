//! Network zero-sum extensive form games.
//!
//! Two-player game trees sit on the edges of a graph of agents. Each agent's strategy
//! space is a treeplex in sequence form; the whole network reduces to one bilinear
//! form `xᵀRx` over the product treeplex, which optimistic gradient ascent solves.
//!
//! The crate is `no_std` with `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod efg;
pub mod error;
mod lcp;
pub mod library;
pub mod linalg;
mod lp;
pub mod network;
pub mod oga;
pub mod polytope;
pub mod sequence_form;

pub use diagnostics::{
    fit_loglog, fit_rates, fit_semilog, lyapunov, nash_gap, run_diagnosed, symmetric_gap,
    DiagnosticsConfig, DiagnosticsRecord, FitKind, Lyapunov, Metrics, NashGap, RateFit,
};
pub use efg::{
    expected_payoff, validate_game_tree, validate_perfect_recall, BehavioralPlan, GameTree, Node,
    Owner, Seat, TreeBuilder, ValidationReport,
};
pub use error::{Error, Result};
pub use library::{
    kuhn_poker, matching_pennies, network_of, random_network_efg, PayoffMode, Topology,
};
pub use network::{
    assemble, validate_consistency, validate_description, Edge, NetworkDescription, NetworkGame,
    ZeroSumMode, ZeroSumReport,
};
pub use oga::{
    default_step_size, run, step, step_per_agent, Form, Initial, SolverConfig, SolverState,
    Trajectory,
};
pub use polytope::{
    best_response, best_response_lp, distance_to_ne_set, project, solve_symmetric_ne,
    EquilibriumSet, QPSolution,
};
pub use sequence_form::{
    behavioral_to_sequence, build_edge_payoff_matrix, compile_treeplex, sequence_to_behavioral,
    PayoffMatrix, ProductTreeplex, SequenceStrategy, Treeplex,
};
