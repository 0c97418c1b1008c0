//! Coherent quantum observers for linear quantum plants.
//!
//! The plant is a linear system in quadrature form, `dx = Ax dt + B dw`,
//! `dy = Cx dt + D dw`. This crate checks physical realizability, synthesises
//! mean-tracking and covariance-matrix-tracking observers, propagates joint
//! first and second moments, and evaluates Gaussian tracking metrics.
//!
//! Everything is generic over the scalar type; `f64` aliases are provided.

pub mod error;
pub mod gaussian;
pub mod moments;
pub mod quadrature;
pub mod realizability;
pub mod scalar;
pub mod synthesis;

pub use error::{Error, Result};
pub use gaussian::{
    covariance_error_norm, gaussian_fidelity_single_mode, partial_transpose, ppt_nu_minus, symplectic_eigenvalues,
    GaussianState,
};
pub use moments::{
    build_joint_system, integrate_joint_moments, solve_sylvester, steady_state_covariance, theorem1_limit,
    IntegrationOptions, JointSystem, MomentState, Theorem1Limit, Trajectory,
};
pub use quadrature::{gamma_matrix, is_hurwitz, permutation_matrix, symplectic_form, HurwitzCheck, QuadratureSystem};
pub use realizability::{
    abcd_from_slh, check_physical_realizability, detectability_check, recover_slh, RealizabilityReport, SlhParams,
};
pub use scalar::Scalar;
pub use synthesis::{
    cmt_design, cmt_synthesize, derive_observer_output, gain_grid_search, mt_design, mt_synthesize, validate_gain,
    CmtDesign, ObserverModel, SynthesisMode, SynthesisOptions, SynthesisReport, Verdict,
};

pub type QuadratureSystemF64 = QuadratureSystem<f64>;
pub type SlhParamsF64 = SlhParams<f64>;
pub type ObserverModelF64 = ObserverModel<f64>;
pub type SynthesisReportF64 = SynthesisReport<f64>;
pub type JointSystemF64 = JointSystem<f64>;
pub type MomentStateF64 = MomentState<f64>;
pub type GaussianStateF64 = GaussianState<f64>;
