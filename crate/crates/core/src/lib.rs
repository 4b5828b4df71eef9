//! Numerical laboratory for the pilot-wave (de Broglie–Bohm) dynamics of two
//! entangled two-particle systems:
//!
//! * a 1-D plane-wave pair `ψ ∝ a·e^{ipΔ/ħ} + b·e^{−ipΔ/ħ}` with `Δ = x₁ − x₂`,
//!   box-normalized on `|pΔ/ħ| < (2N+1)π/2`;
//! * a 3-D pair emitted by two point-like slits at `(0, ±a, 0)`.
//!
//! The crate evaluates the wave functions and their phases, derives guidance
//! velocities in closed form (with finite-difference oracles), integrates
//! trajectories with an adaptive Dormand–Prince pair, analyses first
//! integrals and constraint roots, and runs equivariance experiments on
//! sampled ensembles.

pub mod constraints;
pub mod dynamics;
pub mod equilibrium;
pub mod guidance;
pub mod io;
pub mod model;
pub mod numerics;
pub mod wavefunction;

pub use constraints::{
    count_roots, crossing_time_map, first_integral_literal, mirror_residual, uniqueness_report,
    ConstraintError, CrossingTimeMap, DerivedIntegral, FirstIntegralForm, RootReport,
    UniquenessVerdict,
};
pub use dynamics::{
    conserved_residual, integrate_trajectory, DynamicsError, EventKind, EventSpec,
    IntegratorSettings, Termination, Trajectory,
};
pub use equilibrium::{
    compare_distribution, evolve_ensemble, qeh_report, sample_initial, DistributionComparison,
    Ensemble, EquilibriumError, PlaneDensity, QehReport,
};
pub use guidance::{
    numeric_velocity, relative_velocity_plane, velocity_plane, velocity_twoslit, BoxBoundary,
    PlaneField, TwoSlitField, VelocityField, VelocityVector,
};
pub use model::{
    validate_plane_params, validate_twoslit_params, Configuration, DomainBox, ParamError,
    PhysicalConstants, PlanePairConfig, PlanePairParams, SystemKind, TwoSlitConfig,
    TwoSlitParams,
};
pub use wavefunction::{
    phase_plane, phase_twoslit, prob_density_plane, psi_plane, psi_twoslit, slit_distances,
    EvalError, SlitDistances,
};
