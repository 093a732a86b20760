//! Causal games, mechanised structural causal models, and agent discovery.
//!
//! The library represents finite structural causal games exactly (rational
//! arithmetic throughout), solves them for equilibrium behaviour, and infers
//! game structure — which variables are decisions and utilities, and which
//! agent owns them — purely from interventional queries.
//!
//! Modules, bottom-up:
//! - [`prob`]: domains, exact distributions, CPTs, deterministic enumeration.
//! - [`scm`]: object-level DAG semantics and exact joint distributions.
//! - [`game`]: causal games, expected utility, equilibrium selection.
//! - [`oracle`]: mechanised games behind the interventional-query interface.
//! - [`graphops`]: d-separation, s-reachability, mechanism identification.
//! - [`discovery`]: leave-one-out discovery, edge labelling, agency
//!   identification.
//! - [`model`]: the model file format.
//! - [`dot`]: Graphviz export.
//! - [`fixtures`]: the embedded example models.

pub mod discovery;
pub mod dot;
pub mod fixtures;
pub mod game;
pub mod graphops;
pub mod model;
pub mod oracle;
pub mod prob;
pub mod scm;

pub use game::{CausalGame, GameGraph, Kind, PolicyProfile, SolveOptions};
pub use graphops::MechanisedGraph;
pub use oracle::{GroundTruthOracle, InterventionOracle, MechanisedCausalGame, OracleQuery};
pub use prob::{Cpt, Dist, Domain, Rational, Var};
pub use scm::{Intervention, JointDist, ObjectGraph};
