//! Damage models for lumber duration-of-load (DOL) and rate-of-loading (ROL)
//! analysis.
//!
//! Wood weakens under sustained and repeated stress. This crate implements
//! three models of that process and the statistical machinery to fit them to
//! failure-time data from ramp (R), constant (C), and ramp-constant-ramp (RCR)
//! load tests:
//!
//! * [`us`] — the exponential accumulated damage model with lognormal
//!   short-term strength, closed-form failure times, and an iteratively
//!   reweighted nonlinear least squares fitter.
//! * [`canadian`] — the threshold accumulated damage model with five lognormal
//!   random effects, implicit failure-time solutions, and ABC-MCMC fitting.
//! * [`gamma_process`] — a gamma-process degradation model with a broken
//!   power-law shape function, closed-form censored likelihood, MCMC, and
//!   BIC breakpoint selection.
//!
//! Supporting modules: [`profile`] (load profiles and duration-above-threshold
//! functionals), [`numerics`] (root finding, incomplete gamma, normal order
//! statistics, KDE, an ODE damage integrator used as an oracle), [`gof`]
//! (simulation-based goodness of fit and model comparison), [`reliability`]
//! (stochastic residential loads and phi-beta curves), and [`data`]
//! (dataset schema, ingestion, synthetic generation).
//!
//! All times are hours and all stresses MPa unless a unit tag says otherwise.

pub mod canadian;
pub mod data;
pub mod error;
pub mod gamma_process;
pub mod gof;
pub mod model;
pub mod numerics;
pub mod profile;
pub mod reliability;
pub mod us;

pub use error::{CoreError, Result};
pub use profile::Profile;

/// Reference short-term loading rate, MPa per hour (roughly one-minute tests).
pub const K_S: f64 = 2678.0;

/// Fixed time constant: damage rates are per hour.
pub const MU_HOURS: f64 = 1.0;
