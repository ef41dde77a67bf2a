//! Numerical laboratory for cohomogeneity-one Ricci solitons, Einstein
//! metrics and m-quasi-Einstein metrics with two isotropy summands.
//!
//! * [`config`]: parameter sets, presets, cone solutions and trapping roots.
//! * [`dynamics`]: vector fields, conservation laws, loci and functionals.
//! * [`integrator`]: Dormand-Prince integration with events and seeding.
//! * [`analysis`]: asymptotics, rotation counts, symmetric and matched
//!   sphere solutions, metric reconstruction.

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod integrator;

pub use config::{
    classify_cone_stability, cone_solutions, d_hat, lift_quasi, omega_hat_roots, omega_tilde_roots,
    resolve_preset, Branch, CircleBundleParams, ConeSolution, ConeStability, Factor, MultiWarpedParams,
    Preset, PresetName, QuasiParams, StabilityKind, TwoSummandsParams,
};
pub use dynamics::{Functionals, HatState, Locus, PhaseState, ProfileMode, ProfileState};
pub use error::{AnalysisError, ConfigError, DomainExit, IntegrateError, SeedError};
pub use integrator::{
    integrate, seed_profile, seed_unstable, Event, EventKind, IntegrationControls, OdeSystem, ShootSpec,
    Termination, Trajectory,
};
