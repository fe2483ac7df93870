//! Multi-channel homodyne metrology with single-mode squeezed-coherent probes.
//!
//! A probe with `N = N_S + N_D` photons enters one port of an `M`-mode passive
//! network `U_phi`; every output port is read by a homodyne detector. The
//! crate computes the Gaussian outcome statistics in closed form, the exact
//! and asymptotic Fisher information for `phi`, and runs seeded
//! maximum-likelihood experiments against the Cramér-Rao bound.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dual;
pub mod error;
pub mod estimator;
pub mod fisher;
pub mod gaussian;
pub mod linalg;
pub mod network;

pub use error::{Error, Result};
pub use estimator::{
    crb_experiment, heisenberg_variance_sweep, mle_estimate, mle_score, sample_outcomes,
    CrbReport, EstimationResult, MleSettings, OutcomeBatch, SweepRow, VarianceSweep,
};
pub use fisher::{
    asymptotic_fisher, determinant_expansion, fisher_information, heisenberg_schedule,
    mc_fisher_oracle, rho, slope_experiment, zeta, AsymptoticCoefficients, FisherBreakdown,
    PhasePolicy, PhaseSchedule, QuadratureSign,
};
pub use gaussian::{GaussianModel, ProbeSpec};
pub use linalg::{ComplexMatrix, RealMatrix};
pub use network::{ChannelDecomposition, NetworkSpec, ParametrizedNetwork};
