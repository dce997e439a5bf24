//! The exponential accumulated damage model (`d alpha/dt = exp(-A + B tau/tau_s)`)
//! with lognormal short-term strength `tau_s = tau_M exp(w Z)`.
//!
//! Failure times under ramp, constant, and ramp-constant-ramp loads have
//! closed forms, all computed in log space so that weak specimens (large
//! `B tau / tau_s`) do not overflow. Fitting is the iteratively reweighted
//! nonlinear least squares procedure on log failure-time residuals, with the
//! per-specimen `Z` replaced by its expected normal order statistic.

use rayon::prelude::*;

use crate::data::{DatasetManifest, FailureRecord, Outcome};
use crate::error::{CoreError, Result};
use crate::numerics::optim::{invert_dense, least_squares, LmConfig};
use crate::numerics::orderstats::{expected_normal_order_stats, OrderStatMode};
use crate::profile::{ConstantProfile, Profile, RcrProfile};
use crate::K_S;

/// Model parameters. `tau_m` is the sample median short-term strength,
/// fixed from data rather than estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsParams {
    pub a: f64,
    pub b: f64,
    pub w: f64,
    pub tau_m: f64,
}

impl UsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0) || !(self.w > 0.0) || !(self.tau_m > 0.0) {
            return Err(CoreError::Config(format!(
                "US params need b > 0, w > 0, tau_m > 0: got {self:?}"
            )));
        }
        Ok(())
    }

    /// `B' = B / tau_M`, the stress coefficient per MPa.
    pub fn b_prime(&self) -> f64 {
        self.b / self.tau_m
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// ln(e^x - 1) for x > 0 without overflow.
fn ln_expm1(x: f64) -> f64 {
    if x > 36.0 {
        x
    } else {
        x.exp_m1().ln()
    }
}

/// Ramp failure time `T_f = [e^{wZ}/(B'k)] ln(1 + B'k e^A / e^{wZ})`.
pub fn us_failure_time_ramp(p: &UsParams, z: f64, k: f64) -> Result<f64> {
    p.validate()?;
    if !(k > 0.0) {
        return Err(CoreError::Domain(format!("ramp rate must be positive, got {k}")));
    }
    let phi = p.b_prime() * k / (p.w * z).exp();
    Ok(softplus(p.a + phi.ln()) / phi)
}

/// Damage at ramp time `t` under rate `k` (ln scale).
fn ln_alpha_ramp(p: &UsParams, z: f64, k: f64, t: f64) -> f64 {
    let phi = p.b_prime() * k / (p.w * z).exp();
    -p.a - phi.ln() + ln_expm1(phi * t)
}

/// Outcome of a constant-load test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UsConstantOutcome {
    /// Damage reached 1 during the initial ramp, before `T0`.
    RampPhase(f64),
    /// Failure during the hold, in `(T0, T1]`.
    ConstantPhase(f64),
    /// Survived to `T1` with this much damage.
    Survived { alpha_t1: f64 },
}

/// Failure time under a constant-load profile, routed across the three
/// possible phases.
pub fn us_failure_time_constant(
    p: &UsParams,
    z: f64,
    profile: &ConstantProfile,
) -> Result<UsConstantOutcome> {
    p.validate()?;
    let e_w = (p.w * z).exp();
    let t0 = profile.t0();
    let x_c = p.b_prime() * profile.tau_c / e_w;
    let ln_alpha_t0 = ln_alpha_ramp(p, z, profile.k, t0);
    if ln_alpha_t0 >= 0.0 {
        return Ok(UsConstantOutcome::RampPhase(us_failure_time_ramp(p, z, profile.k)?));
    }
    let alpha_t0 = ln_alpha_t0.exp();
    // Constant-phase rate is e^{-A + x_c} per hour.
    let ln_remaining = (-alpha_t0).ln_1p() + p.a - x_c;
    if ln_remaining > 700.0 {
        // Effectively zero damage rate at the hold level.
        return Ok(UsConstantOutcome::Survived { alpha_t1: alpha_t0 });
    }
    let t_f = t0 + ln_remaining.exp();
    if t_f <= profile.t1 {
        Ok(UsConstantOutcome::ConstantPhase(t_f))
    } else {
        let rate = (-p.a + x_c).exp();
        Ok(UsConstantOutcome::Survived { alpha_t1: alpha_t0 + (profile.t1 - t0) * rate })
    }
}

/// Reload time (measured from `T1`) for a survivor with damage `alpha_t1`.
pub fn us_rcr_reload_time(p: &UsParams, z: f64, reload_k: f64, alpha_t1: f64) -> Result<f64> {
    p.validate()?;
    if !(alpha_t1 < 1.0) || alpha_t1 < 0.0 {
        return Err(CoreError::Domain(format!(
            "RCR reload needs damage in [0, 1), got {alpha_t1}"
        )));
    }
    let phi = p.b_prime() * reload_k / (p.w * z).exp();
    Ok(softplus(p.a + phi.ln() + (-alpha_t1).ln_1p()) / phi)
}

/// Absolute failure time under a full RCR profile. Errors if the specimen
/// would not have survived the constant phase.
pub fn us_failure_time_rcr(p: &UsParams, z: f64, profile: &RcrProfile) -> Result<f64> {
    match us_failure_time_constant(p, z, &profile.constant)? {
        UsConstantOutcome::Survived { alpha_t1 } => {
            Ok(profile.constant.t1 + us_rcr_reload_time(p, z, profile.reload_k, alpha_t1)?)
        }
        _ => Err(CoreError::Domain(
            "RCR failure time requested for a specimen that fails before T1".into(),
        )),
    }
}

/// Simulates `n` specimens through the closed forms. Each specimen draws an
/// independent `Z` from its own counter-derived stream, so results are
/// deterministic for a seed regardless of parallel scheduling.
pub fn us_simulate(
    p: &UsParams,
    profile: &Profile,
    group: u32,
    n: usize,
    seed: u64,
) -> Result<Vec<FailureRecord>> {
    p.validate()?;
    if n == 0 {
        return Err(CoreError::Config("simulation needs n >= 1".into()));
    }
    let p = *p;
    let profile = profile.clone();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let z = crate::model::standard_normal_draw(seed, group, i as u64);
            let specimen = format!("g{group}-s{i:05}");
            let (outcome, time) = match &profile {
                Profile::Ramp(r) => {
                    (Outcome::FailedRamp, Some(us_failure_time_ramp(&p, z, r.k)?))
                }
                Profile::Constant(c) => match us_failure_time_constant(&p, z, c)? {
                    UsConstantOutcome::RampPhase(t) => (Outcome::FailedRamp, Some(t)),
                    UsConstantOutcome::ConstantPhase(t) => (Outcome::FailedConstant, Some(t)),
                    UsConstantOutcome::Survived { .. } => (Outcome::Censored, None),
                },
                Profile::Rcr(r) => match us_failure_time_constant(&p, z, &r.constant)? {
                    UsConstantOutcome::RampPhase(t) => (Outcome::FailedRamp, Some(t)),
                    UsConstantOutcome::ConstantPhase(t) => (Outcome::FailedConstant, Some(t)),
                    UsConstantOutcome::Survived { alpha_t1 } => (
                        Outcome::FailedRcr,
                        Some(r.constant.t1 + us_rcr_reload_time(&p, z, r.reload_k, alpha_t1)?),
                    ),
                },
                Profile::Piecewise(_) => {
                    return Err(CoreError::Config(
                        "us_simulate handles test profiles only; use the reliability module for piecewise loads".into(),
                    ))
                }
            };
            Ok(FailureRecord { specimen, group, outcome, time_hours: time })
        })
        .collect()
}

/// Fit configuration.
#[derive(Debug, Clone)]
pub struct UsFitConfig {
    /// Relative parameter-change threshold across reweighting iterations.
    pub tol: f64,
    pub max_outer: usize,
    /// Whether RCR residuals get the same `1/(B' tau_c)` weight as the
    /// constant-load data. Off by default: the reload phase is ramp-like.
    pub weight_rcr: bool,
    pub order_mode: OrderStatMode,
    pub lm: LmConfig,
    /// Starting point `[A, B, w]`; a data-scaled default is used when `None`.
    pub init: Option<[f64; 3]>,
    /// Outer iterations during which the exclusion mask may change before
    /// freezing.
    pub mask_update_iters: usize,
}

impl Default for UsFitConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_outer: 200,
            weight_rcr: false,
            order_mode: OrderStatMode::Exact,
            lm: LmConfig { max_iters: 60, ..Default::default() },
            init: None,
            mask_update_iters: 3,
        }
    }
}

/// Fit result: estimates, standard errors, and bookkeeping.
#[derive(Debug, Clone)]
pub struct UsFitResult {
    pub params: UsParams,
    /// Standard errors for (A, B, w) from the final weighted Jacobian.
    pub se: [f64; 3],
    pub iterations: usize,
    pub excluded: Vec<String>,
    /// `[before, after]` weighted objective for each reweighting iteration.
    /// Weights change between iterations, so only within-iteration pairs are
    /// comparable; each solve must not increase its own objective.
    pub objective_trace: Vec<[f64; 2]>,
    pub converged: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Scenario {
    Ramp { k: f64 },
    Constant { k: f64, tau_c: f64 },
    Rcr { k: f64, tau_c: f64, t1: f64, reload_k: f64 },
}

struct Item {
    record_idx: usize,
    z: f64,
    scenario: Scenario,
    /// ln T_f (ramp/constant) or ln (T_f - T1) (RCR).
    observed_log: f64,
}

/// Log model prediction for one item; NaN when the order-statistic
/// substitution makes the scenario impossible (negative log argument).
fn ln_model(p: &UsParams, it: &Item) -> f64 {
    match it.scenario {
        Scenario::Ramp { k } => match us_failure_time_ramp(p, it.z, k) {
            Ok(t) => t.ln(),
            Err(_) => f64::NAN,
        },
        Scenario::Constant { k, tau_c } => {
            // Raw constant-load equation; the point is excluded only when it
            // would take the log of a nonpositive value.
            let e_w = (p.w * it.z).exp();
            let x_c = p.b_prime() * tau_c / e_w;
            let alpha_t0 = ln_alpha_ramp(p, it.z, k, tau_c / k).exp();
            let t = tau_c / k + (1.0 - alpha_t0) * (p.a - x_c).exp();
            if t.is_finite() && t > 0.0 {
                t.ln()
            } else {
                f64::NAN
            }
        }
        Scenario::Rcr { k, tau_c, t1, reload_k } => {
            let profile = ConstantProfile { k, tau_c, t1 };
            match us_failure_time_constant(p, it.z, &profile) {
                Ok(UsConstantOutcome::Survived { alpha_t1 }) => {
                    match us_rcr_reload_time(p, it.z, reload_k, alpha_t1) {
                        Ok(t) => t.ln(),
                        Err(_) => f64::NAN,
                    }
                }
                // Predicted damage at T1 >= 1: the RCR equation would take
                // the log of a negative value. Excluded, as in the source
                // procedure.
                _ => f64::NAN,
            }
        }
    }
}

/// Median short-term strength from the reference-rate ramp group.
pub fn compute_tau_m(records: &[FailureRecord], manifest: &DatasetManifest) -> Result<f64> {
    let reference = manifest
        .groups
        .iter()
        .filter_map(|g| match &g.profile {
            Profile::Ramp(r) => Some((g.id, r.k)),
            _ => None,
        })
        .min_by(|a, b| {
            ((a.1 - K_S).abs()).partial_cmp(&(b.1 - K_S).abs()).unwrap()
        })
        .ok_or_else(|| CoreError::Data("no ramp group to anchor tau_M".into()))?;
    let strengths: Vec<f64> = records
        .iter()
        .filter(|r| r.group == reference.0 && r.outcome == Outcome::FailedRamp)
        .filter_map(|r| r.time_hours.map(|t| t * reference.1))
        .collect();
    if strengths.is_empty() {
        return Err(CoreError::Data(format!(
            "reference ramp group {} has no failures",
            reference.0
        )));
    }
    crate::numerics::quantile::quantiles(&strengths, &[0.5]).map(|v| v[0])
}

fn scenario_for(profile: &Profile, outcome: Outcome) -> Result<Option<Scenario>> {
    Ok(match (profile, outcome) {
        (_, Outcome::Censored) => None,
        (Profile::Ramp(r), Outcome::FailedRamp) => Some(Scenario::Ramp { k: r.k }),
        (Profile::Constant(c), Outcome::FailedRamp) => Some(Scenario::Ramp { k: c.k }),
        (Profile::Rcr(r), Outcome::FailedRamp) => Some(Scenario::Ramp { k: r.constant.k }),
        (Profile::Constant(c), Outcome::FailedConstant) => {
            Some(Scenario::Constant { k: c.k, tau_c: c.tau_c })
        }
        (Profile::Rcr(r), Outcome::FailedConstant) => {
            Some(Scenario::Constant { k: r.constant.k, tau_c: r.constant.tau_c })
        }
        (Profile::Rcr(r), Outcome::FailedRcr) => Some(Scenario::Rcr {
            k: r.constant.k,
            tau_c: r.constant.tau_c,
            t1: r.constant.t1,
            reload_k: r.reload_k,
        }),
        (p, o) => {
            return Err(CoreError::Data(format!(
                "outcome {} is inconsistent with profile {p:?}",
                o.as_str()
            )))
        }
    })
}

/// Iteratively reweighted NLS fit of (A, B, w) on log failure-time residuals.
///
/// Per-record `Z` values are expected normal order statistics by failure-time
/// rank within each group (censored records keep their input order at the
/// top ranks). Constant-load residuals carry weight `1/(B' tau_c)` recomputed
/// from the current estimate each outer iteration. Records whose scenario
/// becomes impossible under the substitution (a negative log argument) are
/// dropped from the solve and reported.
pub fn us_nls_fit(
    records: &[FailureRecord],
    manifest: &DatasetManifest,
    tau_m: f64,
    cfg: &UsFitConfig,
) -> Result<UsFitResult> {
    if !(tau_m > 0.0) {
        return Err(CoreError::Config(format!("tau_m must be positive, got {tau_m}")));
    }
    let mut items: Vec<Item> = Vec::new();
    let mut censored_ids: Vec<String> = Vec::new();
    let mut ref_log_strengths: Vec<f64> = Vec::new();

    for gspec in &manifest.groups {
        let mut group_records: Vec<(usize, &FailureRecord)> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.group == gspec.id)
            .collect();
        if group_records.is_empty() {
            continue;
        }
        // Failures in time order, censored records after, stable on ties.
        group_records.sort_by(|a, b| {
            let ta = a.1.time_hours.unwrap_or(f64::INFINITY);
            let tb = b.1.time_hours.unwrap_or(f64::INFINITY);
            ta.partial_cmp(&tb).unwrap().then(a.0.cmp(&b.0))
        });
        let n_g = group_records.len();
        let zs = expected_normal_order_stats(n_g, cfg.order_mode)?;
        for (rank, (idx, rec)) in group_records.iter().enumerate() {
            let Some(scenario) = scenario_for(&gspec.profile, rec.outcome)? else {
                censored_ids.push(rec.specimen.clone());
                continue;
            };
            let t = rec.time_hours.ok_or_else(|| {
                CoreError::Data(format!("record {} lacks a failure time", rec.specimen))
            })?;
            let observed_log = match scenario {
                Scenario::Rcr { t1, .. } => {
                    if t <= t1 {
                        return Err(CoreError::Data(format!(
                            "RCR record {} has time before T1",
                            rec.specimen
                        )));
                    }
                    (t - t1).ln()
                }
                _ => t.ln(),
            };
            if let (Scenario::Ramp { k }, true) =
                (scenario, (gspec.profile == Profile::Ramp(crate::profile::RampProfile { k: K_S })))
            {
                ref_log_strengths.push((k * t).ln());
            }
            items.push(Item { record_idx: *idx, z: zs[rank], scenario, observed_log });
        }
    }

    if items.len() < 3 {
        return Err(CoreError::Data(format!(
            "US fit needs at least 3 usable records, got {}",
            items.len()
        )));
    }

    let init = cfg.init.unwrap_or_else(|| {
        let w0 = if ref_log_strengths.len() >= 3 {
            let m = ref_log_strengths.iter().sum::<f64>() / ref_log_strengths.len() as f64;
            (ref_log_strengths.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
                / ref_log_strengths.len() as f64)
                .sqrt()
                .clamp(0.05, 1.5)
        } else {
            0.4
        };
        [55.0, 1.7 * tau_m, w0]
    });

    let mut theta = init;
    let mut trace: Vec<[f64; 2]> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut excluded_mask = vec![false; items.len()];

    for outer in 0..cfg.max_outer {
        iterations = outer + 1;
        let p_cur = UsParams { a: theta[0], b: theta[1], w: theta[2], tau_m };
        p_cur.validate().map_err(|_| CoreError::Fit {
            message: format!("parameters left the valid region: {theta:?}"),
            trace: trace.iter().map(|p| p[1]).collect(),
        })?;
        let b_prime = p_cur.b_prime();

        // Fixed weights for this outer iteration. The exclusion mask is
        // re-examined only during the first few iterations and then frozen:
        // letting it co-adapt with the parameters creates a ratchet
        // (excluding a boundary record frees the fit to drift and exclude
        // more) that inflates the estimator's variance.
        let weights: Vec<f64> = items
            .iter()
            .map(|it| match it.scenario {
                Scenario::Constant { tau_c, .. } => 1.0 / (b_prime * tau_c),
                Scenario::Rcr { tau_c, .. } if cfg.weight_rcr => 1.0 / (b_prime * tau_c),
                _ => 1.0,
            })
            .collect();
        if outer < cfg.mask_update_iters {
            for (mask, it) in excluded_mask.iter_mut().zip(&items) {
                *mask = !ln_model(&p_cur, it).is_finite();
            }
        }
        let active: Vec<usize> =
            (0..items.len()).filter(|&i| !excluded_mask[i]).collect();
        if active.len() < 3 {
            return Err(CoreError::Fit {
                message: "fewer than 3 records remain after exclusions".into(),
                trace: trace.iter().map(|p| p[1]).collect(),
            });
        }

        let residual = |x: &[f64]| -> Vec<f64> {
            let p = UsParams { a: x[0], b: x[1], w: x[2], tau_m };
            if p.validate().is_err() {
                return vec![f64::NAN; active.len()];
            }
            active
                .par_iter()
                .map(|&i| {
                    let m = ln_model(&p, &items[i]);
                    weights[i] * (items[i].observed_log - m)
                })
                .collect()
        };

        let obj_before: f64 = residual(&theta).iter().map(|r| r * r).sum();
        let lm = least_squares(residual, &theta, &cfg.lm)?;
        trace.push([obj_before, lm.objective]);
        let rel_change = lm
            .params
            .iter()
            .zip(&theta)
            .map(|(n, o)| (n - o).abs() / o.abs().max(1.0))
            .fold(0.0f64, f64::max);
        theta = [lm.params[0], lm.params[1], lm.params[2]];
        if rel_change < cfg.tol {
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(CoreError::Fit {
            message: format!("reweighted NLS did not converge in {} iterations", cfg.max_outer),
            trace: trace.iter().map(|p| p[1]).collect(),
        });
    }

    // Final solve artifacts for standard errors (mask stays frozen; any
    // record that became infeasible at the final point is dropped so the
    // Jacobian is finite).
    let p_final = UsParams { a: theta[0], b: theta[1], w: theta[2], tau_m };
    let b_prime = p_final.b_prime();
    let weights: Vec<f64> = items
        .iter()
        .map(|it| match it.scenario {
            Scenario::Constant { tau_c, .. } => 1.0 / (b_prime * tau_c),
            Scenario::Rcr { tau_c, .. } if cfg.weight_rcr => 1.0 / (b_prime * tau_c),
            _ => 1.0,
        })
        .collect();
    for (mask, it) in excluded_mask.iter_mut().zip(&items) {
        *mask = *mask || !ln_model(&p_final, it).is_finite();
    }
    let active: Vec<usize> = (0..items.len()).filter(|&i| !excluded_mask[i]).collect();

    // A group whose records are all excluded cannot constrain the fit.
    for gspec in &manifest.groups {
        let total = items.iter().filter(|it| records[it.record_idx].group == gspec.id).count();
        let kept = active
            .iter()
            .filter(|&&i| records[items[i].record_idx].group == gspec.id)
            .count();
        if total > 0 && kept == 0 {
            return Err(CoreError::Data(format!(
                "group {}: every record was excluded by the order-statistic substitution",
                gspec.id
            )));
        }
    }

    let residual = |x: &[f64]| -> Vec<f64> {
        let p = UsParams { a: x[0], b: x[1], w: x[2], tau_m };
        if p.validate().is_err() {
            return vec![f64::NAN; active.len()];
        }
        active
            .iter()
            .map(|&i| {
                let m = ln_model(&p, &items[i]);
                weights[i] * (items[i].observed_log - m)
            })
            .collect()
    };
    let lm = least_squares(residual, &theta, &LmConfig { max_iters: 5, ..cfg.lm })?;
    let dof = (lm.n_residuals as f64 - 3.0).max(1.0);
    let sigma2 = lm.objective / dof;
    let cov = invert_dense(&lm.jtj)
        .map_err(|_| CoreError::Numeric("singular J^T J in standard-error computation".into()))?;
    let mut se = [0.0; 3];
    for (j, item) in se.iter_mut().enumerate() {
        let v = sigma2 * cov[j][j];
        if !(v > 0.0) || !v.is_finite() {
            return Err(CoreError::Numeric(format!(
                "nonpositive variance for parameter {j}: {v}"
            )));
        }
        *item = v.sqrt();
    }

    let mut excluded = censored_ids;
    excluded.extend(
        excluded_mask
            .iter()
            .zip(&items)
            .filter(|(m, _)| **m)
            .map(|(_, it)| records[it.record_idx].specimen.clone()),
    );

    Ok(UsFitResult {
        params: UsParams { a: theta[0], b: theta[1], w: theta[2], tau_m },
        se,
        iterations,
        excluded,
        objective_trace: trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ode::{integrate_damage_ode, OdeConfig, OdeOutcome};
    use crate::profile::Profile;

    fn paper_params() -> UsParams {
        UsParams { a: 68.46, b: 79.65, w: 0.4259, tau_m: 44.60 }
    }

    fn ode_rate(p: &UsParams, z: f64, profile: &Profile) -> impl Fn(f64, f64) -> f64 {
        let p = *p;
        let profile = profile.clone();
        move |t, _| {
            let tau = profile.load_at(t).unwrap_or(0.0);
            (-p.a + p.b_prime() * tau / (p.w * z).exp()).exp()
        }
    }

    #[test]
    fn ramp_reference_failure_time() {
        let p = paper_params();
        let t = us_failure_time_ramp(&p, 0.0, K_S).unwrap();
        assert!((t - 0.01609).abs() < 5e-5, "t = {t}");
        let strength = t * K_S;
        assert!((strength - 43.1).abs() < 0.1, "strength = {strength}");
    }

    #[test]
    fn ramp_matches_ode_oracle() {
        let p = paper_params();
        for &z in &[-2.0, -0.5, 0.0, 1.0, 2.5] {
            let t_closed = us_failure_time_ramp(&p, z, K_S).unwrap();
            let profile = Profile::ramp(K_S).unwrap();
            let out = integrate_damage_ode(
                ode_rate(&p, z, &profile),
                t_closed * 10.0,
                &OdeConfig::default(),
            )
            .unwrap();
            match out {
                OdeOutcome::Failed { time } => {
                    assert!(
                        (time - t_closed).abs() / t_closed < 1e-7,
                        "z={z}: closed {t_closed} vs ode {time}"
                    );
                }
                _ => panic!("oracle survived"),
            }
        }
    }

    #[test]
    fn strength_increases_with_rate_and_with_z() {
        let p = paper_params();
        let s = |z: f64, k: f64| us_failure_time_ramp(&p, z, k).unwrap() * k;
        assert!(s(0.0, 1500.0 * K_S) > s(0.0, K_S));
        assert!(s(1.0, K_S) > s(0.0, K_S));
        assert!(s(0.0, K_S) > s(-1.0, K_S));
    }

    #[test]
    fn large_a_strength_monotone() {
        let p200 = UsParams { a: 200.0, ..paper_params() };
        let p201 = UsParams { a: 201.0, ..paper_params() };
        let s200 = us_failure_time_ramp(&p200, 0.0, K_S).unwrap() * K_S;
        let s201 = us_failure_time_ramp(&p201, 0.0, K_S).unwrap() * K_S;
        assert!(s201 > s200);
        assert!(s200.is_finite());
    }

    #[test]
    fn constant_outcome_classes() {
        let p = paper_params();
        let profile = ConstantProfile { k: K_S, tau_c: 20.68, t1: 2190.0 };
        // Strong piece survives.
        match us_failure_time_constant(&p, 3.0, &profile).unwrap() {
            UsConstantOutcome::Survived { alpha_t1 } => assert!(alpha_t1 < 1.0),
            other => panic!("expected survival, got {other:?}"),
        }
        // Weak piece fails on the initial ramp.
        match us_failure_time_constant(&p, -3.5, &profile).unwrap() {
            UsConstantOutcome::RampPhase(t) => assert!(t < profile.t0()),
            other => panic!("expected ramp failure, got {other:?}"),
        }
    }

    #[test]
    fn constant_classification_matches_ode() {
        let p = paper_params();
        let profile = ConstantProfile { k: K_S, tau_c: 31.02, t1: 8760.0 };
        let prof = Profile::constant(K_S, 31.02, 8760.0).unwrap();
        for &z in &[-2.0, -1.2, -0.8, 0.0, 1.0] {
            let closed = us_failure_time_constant(&p, z, &profile).unwrap();
            let out =
                integrate_damage_ode(ode_rate(&p, z, &prof), 8760.0, &OdeConfig::default())
                    .unwrap();
            match (closed, out) {
                (UsConstantOutcome::RampPhase(tc), OdeOutcome::Failed { time }) => {
                    assert!((tc - time).abs() / time < 1e-6, "z={z}");
                    assert!(time <= profile.t0() * (1.0 + 1e-9));
                }
                (UsConstantOutcome::ConstantPhase(tc), OdeOutcome::Failed { time }) => {
                    assert!((tc - time).abs() / time < 1e-6, "z={z}: {tc} vs {time}");
                }
                (UsConstantOutcome::Survived { alpha_t1 }, OdeOutcome::Survived { alpha_end }) => {
                    assert!((alpha_t1 - alpha_end).abs() < 1e-8, "z={z}");
                }
                (c, o) => panic!("class mismatch at z={z}: {c:?} vs {o:?}"),
            }
        }
    }

    #[test]
    fn rcr_reduces_to_ramp_without_damage() {
        let p = paper_params();
        let t_rcr = us_rcr_reload_time(&p, 0.3, K_S, 0.0).unwrap();
        let t_ramp = us_failure_time_ramp(&p, 0.3, K_S).unwrap();
        assert!((t_rcr - t_ramp).abs() < 1e-15);
    }

    #[test]
    fn rcr_tends_to_zero_as_damage_tends_to_one() {
        // The approach to zero is logarithmic in (1 - alpha), so at f64
        // resolution the reload time shrinks to roughly half the undamaged
        // ramp time; the trend is what the solution must exhibit.
        let p = paper_params();
        let t0 = us_rcr_reload_time(&p, 0.0, K_S, 0.0).unwrap();
        let mut prev = f64::INFINITY;
        for &a in &[0.0, 0.5, 0.9, 0.99, 0.999_999, 1.0 - f64::EPSILON] {
            let t = us_rcr_reload_time(&p, 0.0, K_S, a).unwrap();
            assert!(t < prev);
            prev = t;
        }
        assert!(prev < 0.55 * t0, "limit {prev} vs undamaged {t0}");
        assert!(us_rcr_reload_time(&p, 0.0, K_S, 1.0).is_err());
    }

    #[test]
    fn rcr_with_prior_damage_matches_restarted_ode() {
        let p = paper_params();
        let z = 0.0;
        let alpha0 = 0.5;
        let t_closed = us_rcr_reload_time(&p, z, K_S, alpha0).unwrap();
        // Restart the ODE at alpha = 0.5 under a fresh ramp.
        let rate = |t: f64, _: f64| (-p.a + p.b_prime() * K_S * t / (p.w * z).exp()).exp();
        let scaled = |t: f64, a: f64| rate(t, a) / (1.0 - alpha0);
        let out = integrate_damage_ode(scaled, t_closed * 10.0, &OdeConfig::default()).unwrap();
        match out {
            OdeOutcome::Failed { time } => {
                assert!((time - t_closed).abs() / t_closed < 1e-7, "{time} vs {t_closed}");
            }
            _ => panic!("oracle survived"),
        }
    }

    #[test]
    fn simulate_deterministic_and_classed() {
        let p = paper_params();
        let profile = Profile::rcr(K_S, 20.68, 4.0 * 8760.0, K_S).unwrap();
        let a = us_simulate(&p, &profile, 7, 1, 42).unwrap();
        let b = us_simulate(&p, &profile, 7, 1, 42).unwrap();
        assert_eq!(a, b);
        // Group-7 shape: all three failure classes appear.
        let sim = us_simulate(&p, &profile, 7, 2000, 9).unwrap();
        let ramp = sim.iter().filter(|r| r.outcome == Outcome::FailedRamp).count();
        let cons = sim.iter().filter(|r| r.outcome == Outcome::FailedConstant).count();
        let rcr = sim.iter().filter(|r| r.outcome == Outcome::FailedRcr).count();
        assert!(ramp > 0 && cons > 0 && rcr > 0, "ramp={ramp} cons={cons} rcr={rcr}");
    }

    #[test]
    fn single_ramp_group_recovers_w() {
        use crate::data::{DatasetManifest, GroupSpec};
        let truth = paper_params();
        let manifest = DatasetManifest {
            name: "ramp-only".into(),
            note: String::new(),
            groups: vec![GroupSpec { id: 3, size: 139, profile: Profile::ramp(K_S).unwrap() }],
        };
        let records = us_simulate(&truth, &manifest.groups[0].profile, 3, 139, 7).unwrap();
        let tau_m = compute_tau_m(&records, &manifest).unwrap();
        let fit = us_nls_fit(&records, &manifest, tau_m, &UsFitConfig::default()).unwrap();
        assert!(fit.converged);
        // w should match the lognormal MLE of the strengths within 5%.
        let lns: Vec<f64> = records
            .iter()
            .map(|r| (r.time_hours.unwrap() * K_S).ln())
            .collect();
        let mean = lns.iter().sum::<f64>() / lns.len() as f64;
        let sd = (lns.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / lns.len() as f64)
            .sqrt();
        assert!(
            (fit.params.w - sd).abs() / sd < 0.05,
            "w = {}, lognormal MLE = {sd}",
            fit.params.w
        );
    }

    #[test]
    fn objective_trace_non_increasing() {
        // Each reweighting iteration's solve must not increase its own
        // weighted objective (the across-iteration sequence is not
        // comparable because the weights themselves move).
        let truth = paper_params();
        let manifest = crate::data::default_manifest();
        let mut records = Vec::new();
        for g in &manifest.groups {
            records.extend(
                us_simulate(&truth, &g.profile, g.id, (g.size / 4).max(20), 11).unwrap(),
            );
        }
        let tau_m = compute_tau_m(&records, &manifest).unwrap();
        let fit = us_nls_fit(&records, &manifest, tau_m, &UsFitConfig::default()).unwrap();
        assert!(!fit.objective_trace.is_empty());
        for pair in &fit.objective_trace {
            assert!(
                pair[1] <= pair[0] + 1e-12,
                "a solve increased its objective: {:?}",
                fit.objective_trace
            );
        }
        // The reweighting settles: the last two after-values nearly agree.
        let k = fit.objective_trace.len();
        if k >= 2 {
            let a = fit.objective_trace[k - 2][1];
            let b = fit.objective_trace[k - 1][1];
            assert!((a - b).abs() / a.max(1e-9) < 1e-3, "trace tail unstable: {a} vs {b}");
        }
    }
}
