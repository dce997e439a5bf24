//! Shared numerical kernels.
//!
//! Everything here is a pure function of its inputs: safe to call from any
//! thread. The damage-model modules build on these; the ODE integrator in
//! [`ode`] doubles as the oracle against which their closed-form and implicit
//! failure-time solutions are verified.

pub mod gamma;
pub mod kde;
pub mod normal;
pub mod ode;
pub mod optim;
pub mod orderstats;
pub mod quantile;
pub mod roots;

mod dct;

pub use gamma::{
    gamma_cdf, inv_reg_lower_gamma_shape, ln_gamma, ln_reg_lower_gamma, lower_incomplete_gamma,
    reg_lower_gamma, reg_upper_gamma,
};
pub use kde::{kde_log_density, BandwidthRule, KdeConfig, KdeResult};
pub use normal::{ln_normal_cdf, normal_cdf, normal_pdf, normal_quantile};
pub use ode::{integrate_damage_ode, OdeConfig, OdeOutcome};
pub use optim::{least_squares, LmConfig, LmResult};
pub use orderstats::{expected_normal_order_stats, OrderStatMode};
pub use quantile::{quantile_sorted, quantiles};
pub use roots::{find_root, RootConfig};
