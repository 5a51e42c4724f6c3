//! Solver and verifier for robust consumption-investment problems under
//! CRRA and CARA utilities with time-varying confidence sets of Lévy
//! triplets.
//!
//! The market model postulates, for each time segment, a convex hull of
//! candidate Lévy triplets (drift, covariance, finite-activity jump
//! measure). The solver computes, cell by cell, a saddle point of the local
//! kernel over `admissible investments × hull`, assembles the optimal
//! consumption in closed form, and reports the worst-case market model and
//! the value function. An independent verification layer re-derives every
//! closed form by backward ODE integration, HJB bounds and seeded
//! Monte-Carlo simulation of the wealth dynamics.

pub mod kernels;
pub mod market;
pub mod metric;
pub mod numeric;
pub mod policy;
pub mod report;
pub mod saddle;
pub mod sim;
pub mod spec_file;

pub use nalgebra::{DMatrix, DVector};

pub use kernels::{CaraPolicy, CrraPolicy, PolicyPath, TripletPath};
pub use market::{
    ConfidenceSet, DiscreteLevyMeasure, JumpAtom, LevyTriplet, MarketSpec, TimeGrid, Utility,
};
pub use policy::{SaddleSolution, solve_market};
pub use saddle::{SaddleSkeleton, SolverConfig};
pub use sim::{ObjectiveEstimate, PathBundle};
