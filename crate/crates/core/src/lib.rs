//! Slice-sampling laboratory for rotationally invariant targets.
//!
//! * [`targets`]: radial potentials and the `‖x‖^{-α}` factorizations.
//! * [`levelset`]: level intervals, the generalized level-set function `ℓ`,
//!   `Λ_k` membership and the canonical comparator construction.
//! * [`samplers`]: the X-chain and auxiliary T-chain in `(ln t, r)` coordinates.
//! * [`operator`]: discretization of the T-chain kernel from `ℓ` alone and
//!   spectral-gap certification.
//! * [`diagnostics`]: autocorrelation and integrated autocorrelation time.

// `!(a < b)` is used deliberately so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod levelset;
pub mod numerics;
pub mod operator;
pub mod samplers;
pub mod targets;

pub use diagnostics::{
    autocorr, iat, iat_bound_from_gap, ks_one_sample, ks_two_sample, AcfSeries, IatEstimate,
    TruncationRule,
};
pub use error::{Result, SliceError};
pub use levelset::{
    canonical_inverse_phi, canonical_potential, ell_eval, lambda_k_check, level_interval,
    mode_radius, AnalyticLevelSet, LambdaCheck, LevelInterval, LevelSetFunction, LogLevel,
    MembershipReport, ProbeGrid, RadialLevelSet, Violation,
};
pub use operator::{
    adjointness_check, certify_gap, discretize_pt, duality_gap_compare, spectral_gap,
    stationary_weights, transition_probability, AdjointnessReport, DiscreteKernel, DualityReport,
    GapEstimate, TGrid,
};
pub use samplers::{
    chain_rng, default_init_radius, run_t_chain, run_x_chain, run_x_chain_full, sample_direction,
    sample_radial_stationary, t_update, x_update_radius, ChainState, LevelStationarySampler,
    RadialSliceSampler, StationaryRadialSampler, Trace, TraceMeta,
};
pub use targets::{
    log_h, log_surface_area, surface_area, AlphaMode, BuiltinTarget, RadialFactorization,
    RadialTarget,
};
