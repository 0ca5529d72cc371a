//! Fixed points of graph-monotone nonexpansive mappings by the Mann
//! iteration, with auditors that check the order-theoretic and metric
//! properties of each run.
//!
//! The edge relation is a cone order on `R^d` ([`order_graph`]), the domain
//! is a box or ball in an `l_p` space ([`normed_space`]), and operators come
//! from a small library of maps that are monotone and 1-Lipschitz on edges
//! ([`operators`]). [`mann_engine`] runs and records the iteration and
//! [`diagnostics`] audits recorded trajectories.

pub mod corpus;
pub mod diagnostics;
pub mod error;
pub mod export;
pub mod mann_engine;
pub mod normed_space;
pub mod operators;
pub mod order_graph;
pub mod vector;

pub use error::{Error, Result};
pub use mann_engine::{
    mann_step, run, sample_comparable_start, verify_trajectory, RunOptions, Schedule, ScheduleKind, StartEdge, StopReason,
    Trajectory,
};
pub use normed_space::{ConvexBody, Exponent, ModulusEstimate, NormSpace};
pub use operators::{FixedPointSet, OperatorKind, OperatorSpec, PiecewiseLinear};
pub use order_graph::{AuditReport, AuditStatus, ConeRelation, Direction, EdgeRelation};
