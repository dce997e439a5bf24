//! The threshold accumulated damage model
//! `mu d alpha/dt = [a tau_s (tau/tau_s - sigma0)+]^b + [c tau_s (tau/tau_s - sigma0)+]^n alpha`
//! with five lognormal random effects per specimen.
//!
//! Failure times are implicit: with the integrating factor
//! `H(t) = exp(-U(t))`, ramp loading from damage `alpha0` satisfies
//! `exp(-U) - alpha0 = D gamma(s, U)` where `s = (b+1)/(n+1)`, `U` is a
//! power-law clock in the load ratio, and `D` collects the effects. The
//! solvers here work in `U` (or `ln U`) where that equation is monotone, and
//! keep every coefficient in log space: draws from the fitted hyperparameters
//! produce quantities like `(a tau_s)^b` that are far outside f64 range.

pub mod abc;

use rand::prelude::*;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DatasetManifest, FailureRecord, Outcome};
use crate::error::{CoreError, Result};
use crate::numerics::gamma::{ln_gamma, ln_reg_lower_gamma};
use crate::numerics::roots::{find_root, RootConfig};
use crate::profile::{ConstantProfile, Profile, RcrProfile};
use crate::{K_S, MU_HOURS};

/// Lognormal location/scale pairs for the five random effects
/// (the threshold uses `sigma0 = eta/(1+eta)` with `eta` lognormal).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanadianHyperParams {
    pub mu_a: f64,
    pub sigma_a: f64,
    pub mu_b: f64,
    pub sigma_b: f64,
    pub mu_c: f64,
    pub sigma_c: f64,
    pub mu_n: f64,
    pub sigma_n: f64,
    pub mu_sigma0: f64,
    pub sigma_sigma0: f64,
}

/// Parameter order used for vectors, chains, and files.
pub const HYPER_NAMES: [&str; 10] = [
    "mu_a", "sigma_a", "mu_b", "sigma_b", "mu_c", "sigma_c", "mu_n", "sigma_n", "mu_sigma0",
    "sigma_sigma0",
];

impl CanadianHyperParams {
    pub fn to_array(&self) -> [f64; 10] {
        [
            self.mu_a,
            self.sigma_a,
            self.mu_b,
            self.sigma_b,
            self.mu_c,
            self.sigma_c,
            self.mu_n,
            self.sigma_n,
            self.mu_sigma0,
            self.sigma_sigma0,
        ]
    }

    pub fn from_array(v: &[f64; 10]) -> Self {
        Self {
            mu_a: v[0],
            sigma_a: v[1],
            mu_b: v[2],
            sigma_b: v[3],
            mu_c: v[4],
            sigma_c: v[5],
            mu_n: v[6],
            sigma_n: v[7],
            mu_sigma0: v[8],
            sigma_sigma0: v[9],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.to_array();
        for (i, v) in a.iter().enumerate() {
            if !v.is_finite() {
                return Err(CoreError::Config(format!("hyperparameter {} not finite", HYPER_NAMES[i])));
            }
        }
        for i in [1usize, 3, 5, 7, 9] {
            if !(a[i] > 0.0) {
                return Err(CoreError::Config(format!(
                    "hyperparameter {} must be positive, got {}",
                    HYPER_NAMES[i], a[i]
                )));
            }
        }
        Ok(())
    }
}

/// One specimen's realized effects with the derived short-term strength.
#[derive(Debug, Clone, Copy)]
pub struct CanadianRandomEffects {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub n: f64,
    pub sigma0: f64,
    /// Short-term strength, MPa (`k_s * t_s`).
    pub tau_s: f64,
    /// Ramp failure time at the reference rate, hours.
    pub t_s: f64,
}

/// Effects before the strength solve.
#[derive(Debug, Clone, Copy)]
pub struct RawEffects {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub n: f64,
    pub sigma0: f64,
}

impl RawEffects {
    fn validate(&self) -> Result<()> {
        let ok = self.a > 0.0
            && self.b > 0.0
            && self.c > 0.0
            && self.n > 0.0
            && self.sigma0 > 0.0
            && self.sigma0 < 1.0
            && [self.a, self.b, self.c, self.n].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(CoreError::Domain(format!("invalid effects {self:?}")))
        }
    }

    fn s_gamma(&self) -> f64 {
        (self.b + 1.0) / (self.n + 1.0)
    }
}

/// `ln gamma(s, u)` (lower incomplete, non-regularized) in log space.
fn ln_lower_gamma(s: f64, u: f64) -> Result<f64> {
    Ok(ln_gamma(s) + ln_reg_lower_gamma(s, u)?)
}

/// Monotone failure-time equation under a ramp at rate `k` starting from
/// damage `alpha0`: find `U > 0` with `exp(-U) - alpha0 = exp(ln_d) gamma(s, U)`.
fn solve_ramp_u(s: f64, ln_d: f64, alpha0: f64) -> Result<f64> {
    if !(alpha0 < 1.0) || alpha0 < 0.0 {
        return Err(CoreError::Domain(format!("ramp solve needs damage in [0,1), got {alpha0}")));
    }
    if !ln_d.is_finite() || !s.is_finite() || s <= 0.0 {
        return Err(CoreError::Numeric(format!("degenerate ramp equation: s={s}, ln_d={ln_d}")));
    }
    // Initial guess from the small-U tail gamma(s,U) ~ U^s / s.
    let target = (1.0 - alpha0).ln();
    let x0 = ((target - ln_d + s.ln()) / s).clamp(-600.0, 20.0);

    if alpha0 < 1e-290 {
        // Pure log form: root of ln_d + ln gamma(s, U) + U = 0.
        let g = |x: f64| -> f64 {
            let u = x.exp();
            match ln_lower_gamma(s, u) {
                Ok(lg) => ln_d + lg + u,
                Err(_) => f64::NAN,
            }
        };
        let (mut lo, mut hi) = (x0 - 2.0, x0 + 2.0);
        let mut g_lo = g(lo);
        let mut g_hi = g(hi);
        let mut tries = 0;
        while g_lo > 0.0 && tries < 400 {
            lo -= 4.0;
            g_lo = g(lo);
            tries += 1;
        }
        tries = 0;
        while g_hi < 0.0 && tries < 400 {
            hi += 4.0;
            g_hi = g(hi);
            tries += 1;
        }
        let x = find_root(g, lo, hi, &RootConfig { abs_tol: 1e-14, rel_tol: 1e-14, max_iters: 300 })?;
        return Ok(x.exp());
    }

    // Linear form; alpha0 keeps everything representable.
    let g = |x: f64| -> f64 {
        let u = x.exp();
        let lg = match ln_lower_gamma(s, u) {
            Ok(v) => v,
            Err(_) => return f64::NAN,
        };
        let rhs = (ln_d + lg).exp();
        rhs + alpha0 - (-u).exp()
    };
    // The root lies at or below both the damage-free solution and the
    // amplification bound U = -ln(alpha0).
    let x_amp = (-alpha0.ln()).ln();
    let mut hi = x0.min(x_amp) + 1.0;
    let mut lo = hi - 4.0;
    let mut g_lo = g(lo);
    let mut g_hi = g(hi);
    let mut tries = 0;
    while g_lo > 0.0 && tries < 400 {
        hi = lo;
        lo -= 4.0;
        g_lo = g(lo);
        tries += 1;
    }
    tries = 0;
    while g_hi < 0.0 && tries < 400 {
        lo = hi;
        hi += 4.0;
        g_hi = g(hi);
        tries += 1;
    }
    let x = find_root(g, lo, hi, &RootConfig { abs_tol: 1e-14, rel_tol: 1e-14, max_iters: 300 })?;
    Ok(x.exp())
}

/// Solver quantities for a specimen at ramp rate `k`, with `tau_s` known.
struct RampEquation {
    s: f64,
    ln_d: f64,
    /// ln K_c: `U = K_c ((k t / tau_s) - sigma0)^{n+1}`.
    ln_kc: f64,
}

impl RampEquation {
    fn new(e: &CanadianRandomEffects, k: f64) -> RampEquation {
        let raw = RawEffects { a: e.a, b: e.b, c: e.c, n: e.n, sigma0: e.sigma0 };
        let s = raw.s_gamma();
        let ln_atau = (e.a).ln() + e.tau_s.ln();
        let ln_ctau = (e.c).ln() + e.tau_s.ln();
        let ln_rate_term = (MU_HOURS * k * (e.n + 1.0) / e.tau_s).ln();
        let ln_d = e.b * ln_atau - e.n * s * ln_ctau + (s - 1.0) * ln_rate_term;
        let ln_kc = e.n * ln_ctau - ln_rate_term;
        RampEquation { s, ln_d, ln_kc }
    }

    /// `U` at load ratio progress `y = (k t / tau_s - sigma0)+`.
    fn u_at(&self, e: &CanadianRandomEffects, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            (self.ln_kc + (e.n + 1.0) * y.ln()).exp()
        }
    }

    /// Time (from ramp start) at which the clock reads `U`.
    fn t_of_u(&self, e: &CanadianRandomEffects, k: f64, u: f64) -> f64 {
        let y = ((u.ln() - self.ln_kc) / (e.n + 1.0)).exp();
        (e.tau_s / k) * (e.sigma0 + y)
    }

    /// Damage at ramp time `t` starting from `alpha0`.
    fn alpha_at(&self, e: &CanadianRandomEffects, k: f64, t: f64, alpha0: f64) -> Result<f64> {
        let y = (k * t / e.tau_s - e.sigma0).max(0.0);
        let u = self.u_at(e, y);
        if u == 0.0 {
            return Ok(alpha0);
        }
        let lg = ln_lower_gamma(self.s, u)?;
        Ok(u.exp() * (alpha0 + (self.ln_d + lg).exp()))
    }

    fn failure_time(&self, e: &CanadianRandomEffects, k: f64, alpha0: f64) -> Result<f64> {
        let u = solve_ramp_u(self.s, self.ln_d, alpha0)?;
        Ok(self.t_of_u(e, k, u))
    }
}

/// Solves the reference-rate ramp equation for the short-term strength.
///
/// Returns `(tau_s, t_s)`. The coefficient `D` is scale-free in `T`, so the
/// equation is solved once for the integrating-factor exponent `v*` and the
/// strength recovered in closed form.
pub fn solve_short_term_strength(raw: &RawEffects) -> Result<(f64, f64)> {
    solve_short_term_strength_at(raw, K_S)
}

/// Strength solve at an arbitrary reference rate (exposed for scale tests).
pub fn solve_short_term_strength_at(raw: &RawEffects, k_ref: f64) -> Result<(f64, f64)> {
    raw.validate()?;
    let s = raw.s_gamma();
    let ln_ak = (raw.a * k_ref * MU_HOURS * (raw.n + 1.0)).ln();
    let ln_ck = (raw.c * k_ref * MU_HOURS * (raw.n + 1.0)).ln();
    let ln_d = raw.b * ln_ak - raw.n * s * ln_ck;
    let v_star = solve_ramp_u(s, ln_d, 0.0)?;
    // v* = (c k T)^n T (1-sigma0)^{n+1} / (mu (n+1)).
    let ln_ts = (v_star.ln() + (MU_HOURS * (raw.n + 1.0)).ln()
        - raw.n * (raw.c * k_ref).ln()
        - (raw.n + 1.0) * (1.0 - raw.sigma0).ln())
        / (raw.n + 1.0);
    let t_s = ln_ts.exp();
    if !t_s.is_finite() || t_s <= 0.0 {
        return Err(CoreError::Numeric(format!("strength solve produced t_s = {t_s}")));
    }
    Ok((k_ref * t_s, t_s))
}

/// Draws one specimen's effects and solves its strength. A strength-solve
/// failure surfaces as an error so the caller can resample and count it.
pub fn sample_random_effects(
    h: &CanadianHyperParams,
    rng: &mut impl Rng,
) -> Result<CanadianRandomEffects> {
    h.validate()?;
    let z: [f64; 5] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let a = (h.mu_a + h.sigma_a * z[0]).exp();
    let b = (h.mu_b + h.sigma_b * z[1]).exp();
    let c = (h.mu_c + h.sigma_c * z[2]).exp();
    let n = (h.mu_n + h.sigma_n * z[3]).exp();
    let eta = (h.mu_sigma0 + h.sigma_sigma0 * z[4]).exp();
    let sigma0 = eta / (1.0 + eta);
    let raw = RawEffects { a, b, c, n, sigma0 };
    let (tau_s, t_s) = solve_short_term_strength(&raw)?;
    Ok(CanadianRandomEffects { a, b, c, n, sigma0, tau_s, t_s })
}

/// Outcome of the constant-load phases for one specimen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CanadianConstantOutcome {
    RampPhase(f64),
    ConstantPhase(f64),
    Survived { alpha_t1: f64 },
}

fn check_reference_rate(k: f64) -> Result<()> {
    if ((k - K_S) / K_S).abs() > 1e-9 {
        return Err(CoreError::Config(format!(
            "constant/RCR solutions assume the reference ramp rate {K_S} MPa/h, got {k}"
        )));
    }
    Ok(())
}

/// expm1(x)/x with the right limit at zero.
fn em1x(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

/// Propagates damage through a constant stress `tau` held for `span` hours.
///
/// Returns the failure time offset within the span (if damage reaches 1)
/// and otherwise the damage at the end. This is the exact solution of the
/// linear ODE `mu alpha' = C1 + C2 alpha` with both coefficients kept in
/// log space; it backs the constant-load test solution and the segmentwise
/// propagation over stochastic load histories.
pub fn canadian_hold_step(
    e: &CanadianRandomEffects,
    tau: f64,
    alpha0: f64,
    span: f64,
) -> (Option<f64>, f64) {
    if alpha0 >= 1.0 {
        return (Some(0.0), alpha0);
    }
    let y = tau / e.tau_s - e.sigma0;
    if y <= 0.0 || span <= 0.0 {
        return (None, alpha0);
    }
    let ln_c1 = e.b * (e.a * e.tau_s * y).ln() - MU_HOURS.ln();
    let ln_c2 = e.n * (e.c * e.tau_s * y).ln() - MU_HOURS.ln();
    let m = ln_c1.max(ln_c2);
    if m < -650.0 {
        // Both rates negligible over any physical horizon.
        return (None, alpha0);
    }
    // Time for alpha to reach 1: (1/C2) ln(1 + C2 (1-alpha0) / (C2 alpha0 + C1)),
    // evaluated with both coefficients scaled by e^{-m}.
    let c1s = (ln_c1 - m).exp();
    let c2s = (ln_c2 - m).exp();
    let t_fail = if c2s < 1e-290 {
        ((-alpha0).ln_1p() - ln_c1).exp()
    } else {
        let r = c2s * (1.0 - alpha0) / (c2s * alpha0 + c1s);
        r.ln_1p() * (-m).exp() / c2s
    };
    if t_fail <= span {
        (Some(t_fail), 1.0)
    } else {
        let c2_span = (ln_c2 + span.ln()).exp();
        let grown = if alpha0 > 0.0 { (alpha0.ln() + c2_span).exp() } else { 0.0 };
        let forced = (ln_c1 + span.ln()).exp() * em1x(c2_span);
        (None, grown + forced)
    }
}

/// Failure time under a constant-load profile (initial ramp at the
/// reference rate), or the damage carried to `T1`.
pub fn canadian_failure_time_constant(
    e: &CanadianRandomEffects,
    profile: &ConstantProfile,
) -> Result<CanadianConstantOutcome> {
    check_reference_rate(profile.k)?;
    let t0 = profile.t0();
    if t0 >= e.t_s {
        return Ok(CanadianConstantOutcome::RampPhase(e.t_s));
    }
    let eq = RampEquation::new(e, profile.k);
    let alpha_t0 = eq.alpha_at(e, profile.k, t0, 0.0)?;
    if alpha_t0 >= 1.0 {
        // Numerical edge of the t0 ~ t_s boundary.
        return Ok(CanadianConstantOutcome::RampPhase(e.t_s));
    }
    match canadian_hold_step(e, profile.tau_c, alpha_t0, profile.t1 - t0) {
        (Some(t_fail), _) => Ok(CanadianConstantOutcome::ConstantPhase(t0 + t_fail)),
        (None, alpha_t1) => Ok(CanadianConstantOutcome::Survived { alpha_t1 }),
    }
}

/// Reload time (from `T1`) for a constant-load survivor carrying damage
/// `alpha_t1`, reloaded at the reference rate.
pub fn canadian_rcr_reload_time(e: &CanadianRandomEffects, alpha_t1: f64) -> Result<f64> {
    let eq = RampEquation::new(e, K_S);
    eq.failure_time(e, K_S, alpha_t1)
}

/// Absolute failure time under a full RCR profile for a survivor with
/// damage `alpha_t1` at `T1`.
pub fn canadian_failure_time_rcr(
    e: &CanadianRandomEffects,
    alpha_t1: f64,
    profile: &RcrProfile,
) -> Result<f64> {
    check_reference_rate(profile.constant.k)?;
    check_reference_rate(profile.reload_k)?;
    if !(alpha_t1 < 1.0) {
        return Err(CoreError::Domain(format!(
            "RCR solve needs a surviving specimen (damage < 1), got {alpha_t1}"
        )));
    }
    Ok(profile.constant.t1 + canadian_rcr_reload_time(e, alpha_t1)?)
}

/// Ramp failure time at an arbitrary loading rate.
pub fn canadian_failure_time_ramp_rate(e: &CanadianRandomEffects, k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(CoreError::Domain(format!("ramp rate must be positive, got {k}")));
    }
    if ((k - K_S) / K_S).abs() < 1e-12 {
        return Ok(e.t_s);
    }
    let eq = RampEquation::new(e, k);
    eq.failure_time(e, k, 0.0)
}

/// Damage at time `t` of a reference-rate ramp starting from `alpha0`
/// (used by the reliability propagation and the oracle tests).
pub fn canadian_ramp_damage(
    e: &CanadianRandomEffects,
    k: f64,
    t: f64,
    alpha0: f64,
) -> Result<f64> {
    let eq = RampEquation::new(e, k);
    eq.alpha_at(e, k, t, alpha0)
}

/// Simulates a full dataset: one independent effects draw per specimen,
/// routed through the matching solver. `size_override` replaces every
/// group's sample size when given.
pub fn canadian_simulate_dataset(
    h: &CanadianHyperParams,
    manifest: &DatasetManifest,
    size_override: Option<usize>,
    seed: u64,
) -> Result<Vec<FailureRecord>> {
    h.validate()?;
    manifest.validate()?;
    let mut out = Vec::new();
    for g in &manifest.groups {
        let n = size_override.unwrap_or(g.size);
        out.extend(canadian_simulate_group(h, &g.profile, g.id, n, seed)?);
    }
    Ok(out)
}

/// Simulates one group's specimens in parallel (counter-derived streams).
pub fn canadian_simulate_group(
    h: &CanadianHyperParams,
    profile: &Profile,
    group: u32,
    n: usize,
    seed: u64,
) -> Result<Vec<FailureRecord>> {
    if n == 0 {
        return Err(CoreError::Config("simulation needs n >= 1".into()));
    }
    (0..n).into_par_iter().map(|i| simulate_one(h, profile, group, i, seed)).collect()
}

fn simulate_one(
    h: &CanadianHyperParams,
    profile: &Profile,
    group: u32,
    idx: usize,
    seed: u64,
) -> Result<FailureRecord> {
    let mut rng = crate::model::derive_rng(seed, group as u64, idx as u64);
    let mut effects = None;
    for _ in 0..100 {
        match sample_random_effects(h, &mut rng) {
            Ok(e) => {
                effects = Some(e);
                break;
            }
            Err(_) => continue,
        }
    }
    let e = effects.ok_or_else(|| {
        CoreError::Numeric(format!(
            "strength solve failed 100 times in a row for group {group}; hyperparameters degenerate"
        ))
    })?;
    let specimen = format!("g{group}-s{idx:05}");
    let (outcome, time) = match profile {
        Profile::Ramp(r) => (Outcome::FailedRamp, Some(canadian_failure_time_ramp_rate(&e, r.k)?)),
        Profile::Constant(c) => match canadian_failure_time_constant(&e, c)? {
            CanadianConstantOutcome::RampPhase(t) => (Outcome::FailedRamp, Some(t)),
            CanadianConstantOutcome::ConstantPhase(t) => (Outcome::FailedConstant, Some(t)),
            CanadianConstantOutcome::Survived { .. } => (Outcome::Censored, None),
        },
        Profile::Rcr(r) => match canadian_failure_time_constant(&e, &r.constant)? {
            CanadianConstantOutcome::RampPhase(t) => (Outcome::FailedRamp, Some(t)),
            CanadianConstantOutcome::ConstantPhase(t) => (Outcome::FailedConstant, Some(t)),
            CanadianConstantOutcome::Survived { alpha_t1 } => {
                (Outcome::FailedRcr, Some(canadian_failure_time_rcr(&e, alpha_t1, r)?))
            }
        },
        Profile::Piecewise(_) => {
            return Err(CoreError::Config(
                "canadian_simulate_dataset handles test profiles only".into(),
            ))
        }
    };
    Ok(FailureRecord { specimen, group, outcome, time_hours: time })
}

/// Solves for the `mu_a` that anchors the median-effects short-term strength
/// at `target_strength` (MPa), holding the other hyperparameters fixed.
///
/// Strength is strictly decreasing in `a`, so the solution is unique.
pub fn anchor_mu_a(h: &CanadianHyperParams, target_strength: f64) -> Result<f64> {
    let median_strength = |mu_a: f64| -> f64 {
        let eta = h.mu_sigma0.exp();
        let raw = RawEffects {
            a: mu_a.exp(),
            b: h.mu_b.exp(),
            c: h.mu_c.exp(),
            n: h.mu_n.exp(),
            sigma0: eta / (1.0 + eta),
        };
        match solve_short_term_strength(&raw) {
            Ok((tau_s, _)) => tau_s,
            Err(_) => f64::NAN,
        }
    };
    find_root(|mu_a| median_strength(mu_a).ln() - target_strength.ln(), -30.0, 20.0, &RootConfig::default())
}

/// The reference hyperparameter configuration bundled with the toolkit:
/// shape parameters follow the published posterior summaries, with `mu_a`
/// anchored so the median short-term strength sits at 44.6 MPa.
pub fn reference_hyper_params() -> CanadianHyperParams {
    CanadianHyperParams {
        mu_a: -2.667141258603,
        sigma_a: 0.41,
        mu_b: 3.66,
        sigma_b: 0.09,
        mu_c: -46.4,
        sigma_c: 0.21,
        mu_n: -1.89,
        sigma_n: 0.33,
        mu_sigma0: 0.39,
        sigma_sigma0: 0.15,
    }
}
