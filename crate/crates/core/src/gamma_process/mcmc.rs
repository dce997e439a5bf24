//! Random-walk Metropolis sampling of the gamma-process posterior under
//! uniform priors, and BIC-driven selection of the number of power-law
//! breakpoints.

use rand::prelude::*;
use rand_distr::StandardNormal;

use crate::data::{DatasetManifest, FailureRecord};
use crate::error::{CoreError, Result};
use crate::gamma_process::{gp_log_likelihood, BrokenPowerLaw, GammaProcessParams, DEFAULT_DELTA_TAU};

/// Uniform prior ranges. Positive parameters are sampled on the log scale,
/// and the prior is uniform over these boxes in those coordinates; the
/// threshold stays linear because zero is inside its plausible range.
#[derive(Debug, Clone)]
pub struct GpPriorBox {
    pub ln_u: (f64, f64),
    pub tau_star: (f64, f64),
    pub ln_xi: (f64, f64),
    /// Shared box for every power exponent (log scale).
    pub ln_power: (f64, f64),
    /// Shared box for every breakpoint time (log scale); ordering is
    /// enforced by rejection.
    pub ln_time: (f64, f64),
}

impl GpPriorBox {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("ln_u", self.ln_u),
            ("tau_star", self.tau_star),
            ("ln_xi", self.ln_xi),
            ("ln_power", self.ln_power),
            ("ln_time", self.ln_time),
        ] {
            if !(hi > lo) {
                return Err(CoreError::Config(format!("degenerate prior box for {name}")));
            }
        }
        if self.tau_star.0 < 0.0 {
            return Err(CoreError::Config("tau_star prior cannot go negative".into()));
        }
        Ok(())
    }
}

/// Data-driven default box: breakpoint times span the observed failure
/// times; the threshold stays below the smallest observed failure load.
pub fn default_gp_prior(records: &[FailureRecord], manifest: &DatasetManifest) -> Result<GpPriorBox> {
    let mut t_lo = f64::INFINITY;
    let mut t_hi: f64 = 0.0;
    let mut min_fail_load = f64::INFINITY;
    for r in records {
        if let Some(t) = r.time_hours {
            t_lo = t_lo.min(t);
            t_hi = t_hi.max(t);
            if let Some(g) = manifest.group(r.group) {
                let load = g.profile.load_at(t)?;
                if load > 0.0 {
                    min_fail_load = min_fail_load.min(load);
                }
            }
        }
    }
    if !t_lo.is_finite() || t_hi <= 0.0 {
        return Err(CoreError::Data("no failure times to anchor the prior".into()));
    }
    Ok(GpPriorBox {
        ln_u: ((1e-4f64).ln(), (20.0f64).ln()),
        tau_star: (0.0, (0.8 * min_fail_load).max(1e-3)),
        ln_xi: ((5e-3f64).ln(), (20.0f64).ln()),
        ln_power: ((1e-9f64).ln(), (5.0f64).ln()),
        ln_time: ((t_lo * 0.25).ln(), (t_hi * 4.0).ln()),
    })
}

/// Sampler settings.
#[derive(Debug, Clone)]
pub struct GpMcmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub proposal_scale_frac: f64,
    pub adapt: bool,
    pub delta_tau: f64,
    pub init: Option<GammaProcessParams>,
}

impl Default for GpMcmcConfig {
    fn default() -> Self {
        Self {
            iterations: 6_000,
            burn_in: 1_500,
            thin: 10,
            proposal_scale_frac: 0.04,
            adapt: true,
            delta_tau: DEFAULT_DELTA_TAU,
            init: None,
        }
    }
}

/// Posterior sample set for a fixed breakpoint count.
#[derive(Debug, Clone)]
pub struct GpMcmcResult {
    pub samples: Vec<GammaProcessParams>,
    pub log_likelihoods: Vec<f64>,
    /// Index of the best retained sample.
    pub map_index: usize,
    /// Best parameters seen anywhere after burn-in (used for BIC).
    pub map_params: GammaProcessParams,
    pub map_log_likelihood: f64,
    pub acceptance_rate: f64,
}

struct StateSpace {
    n_breakpoints: usize,
}

impl StateSpace {
    fn dim(&self) -> usize {
        4 + 2 * self.n_breakpoints
    }

    fn to_params(&self, x: &[f64], delta_tau: f64) -> Result<GammaProcessParams> {
        let b = self.n_breakpoints;
        let powers: Vec<f64> = (0..=b).map(|i| x[3 + i].exp()).collect();
        let times: Vec<f64> = (0..b).map(|i| x[4 + b + i].exp()).collect();
        Ok(GammaProcessParams {
            u: x[0].exp(),
            tau_star: x[1],
            xi: x[2].exp(),
            law: BrokenPowerLaw::new(times, powers)?,
            delta_tau,
        })
    }

    fn from_params(&self, p: &GammaProcessParams) -> Vec<f64> {
        let mut x = vec![p.u.ln(), p.tau_star, p.xi.ln()];
        x.extend(p.law.powers.iter().map(|a| a.max(1e-12).ln()));
        x.extend(p.law.breakpoints.iter().map(|t| t.ln()));
        x
    }

    fn in_prior(&self, x: &[f64], prior: &GpPriorBox) -> bool {
        let b = self.n_breakpoints;
        if x[0] < prior.ln_u.0 || x[0] > prior.ln_u.1 {
            return false;
        }
        if x[1] < prior.tau_star.0 || x[1] > prior.tau_star.1 {
            return false;
        }
        if x[2] < prior.ln_xi.0 || x[2] > prior.ln_xi.1 {
            return false;
        }
        for i in 0..=b {
            if x[3 + i] < prior.ln_power.0 || x[3 + i] > prior.ln_power.1 {
                return false;
            }
        }
        for i in 0..b {
            let v = x[4 + b + i];
            if v < prior.ln_time.0 || v > prior.ln_time.1 {
                return false;
            }
            if i > 0 && v <= x[4 + b + i - 1] {
                return false; // ordering by rejection
            }
        }
        true
    }
}

fn default_init(
    space: &StateSpace,
    prior: &GpPriorBox,
    records: &[FailureRecord],
    delta_tau: f64,
) -> Result<GammaProcessParams> {
    let b = space.n_breakpoints;
    let mut times: Vec<f64> = records.iter().filter_map(|r| r.time_hours).collect();
    times.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let bp: Vec<f64> = (0..b)
        .map(|i| {
            let p = (i as f64 + 1.0) / (b as f64 + 1.0);
            let q = crate::numerics::quantile::quantile_sorted(&times, p.clamp(0.05, 0.95))
                .unwrap_or(1.0);
            q.clamp((prior.ln_time.0 + 0.1).exp(), (prior.ln_time.1 - 0.1).exp())
        })
        .collect();
    let mut bp_sorted = bp;
    bp_sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    // Nudge ties apart.
    for i in 1..bp_sorted.len() {
        if bp_sorted[i] <= bp_sorted[i - 1] {
            bp_sorted[i] = bp_sorted[i - 1] * 1.5;
        }
    }
    let powers = vec![0.05f64.clamp(prior.ln_power.0.exp(), prior.ln_power.1.exp()); b + 1];
    Ok(GammaProcessParams {
        u: 0.1f64.clamp(prior.ln_u.0.exp(), prior.ln_u.1.exp()),
        tau_star: prior.tau_star.0 + 0.05 * (prior.tau_star.1 - prior.tau_star.0),
        xi: 0.3f64.clamp(prior.ln_xi.0.exp(), prior.ln_xi.1.exp()),
        law: BrokenPowerLaw::new(bp_sorted, powers)?,
        delta_tau,
    })
}

/// Random-walk Metropolis over `(ln u, tau*, ln xi, ln powers, ln times)`.
pub fn gp_mcmc_fit(
    records: &[FailureRecord],
    manifest: &DatasetManifest,
    n_breakpoints: usize,
    prior: &GpPriorBox,
    cfg: &GpMcmcConfig,
    seed: u64,
) -> Result<GpMcmcResult> {
    prior.validate()?;
    if cfg.iterations == 0 || cfg.burn_in >= cfg.iterations {
        return Err(CoreError::Config("need iterations > burn_in".into()));
    }
    let space = StateSpace { n_breakpoints };
    let init = match &cfg.init {
        Some(p) => p.clone(),
        None => default_init(&space, prior, records, cfg.delta_tau)?,
    };
    let mut x = space.from_params(&init);
    if !space.in_prior(&x, prior) {
        return Err(CoreError::Config("initial point lies outside the prior box".into()));
    }
    let mut ll = gp_log_likelihood(&space.to_params(&x, cfg.delta_tau)?, records, manifest)?.total;
    if !ll.is_finite() {
        return Err(CoreError::Config(format!(
            "non-finite log-likelihood at initialization (params {:?}); \
             check the prior box against the data range",
            init
        )));
    }

    let dim = space.dim();
    let widths: Vec<f64> = {
        let b = n_breakpoints;
        let mut w = vec![
            prior.ln_u.1 - prior.ln_u.0,
            prior.tau_star.1 - prior.tau_star.0,
            prior.ln_xi.1 - prior.ln_xi.0,
        ];
        w.extend(std::iter::repeat_n(prior.ln_power.1 - prior.ln_power.0, b + 1));
        w.extend(std::iter::repeat_n(prior.ln_time.1 - prior.ln_time.0, b));
        w
    };
    let mut global = 1.0f64;
    let mut rng = crate::model::derive_rng(seed, 0x6A3A, n_breakpoints as u64);

    let mut samples = Vec::new();
    let mut lls = Vec::new();
    let mut map_params = space.to_params(&x, cfg.delta_tau)?;
    let mut map_ll = ll;
    let mut window = (0usize, 0usize);
    let mut accepted_post = 0usize;
    let mut post_n = 0usize;

    for iter in 0..cfg.iterations {
        let prop: Vec<f64> = (0..dim)
            .map(|j| x[j] + global * cfg.proposal_scale_frac * widths[j] * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut accept = false;
        if space.in_prior(&prop, prior) {
            let params = space.to_params(&prop, cfg.delta_tau)?;
            let ll_prop = gp_log_likelihood(&params, records, manifest)?.total;
            if ll_prop.is_finite() {
                let logu: f64 = rng.random::<f64>().max(1e-300).ln();
                if ll_prop - ll > logu {
                    x = prop;
                    ll = ll_prop;
                    accept = true;
                }
            }
        }
        if iter < cfg.burn_in {
            if cfg.adapt {
                window.0 += accept as usize;
                window.1 += 1;
                if window.1 == 40 {
                    let rate = window.0 as f64 / window.1 as f64;
                    global = (global * ((rate - 0.234) * 1.2).exp()).clamp(1e-3, 30.0);
                    window = (0, 0);
                }
            }
        } else {
            accepted_post += accept as usize;
            post_n += 1;
            if ll > map_ll {
                map_ll = ll;
                map_params = space.to_params(&x, cfg.delta_tau)?;
            }
            if (iter - cfg.burn_in) % cfg.thin.max(1) == 0 {
                samples.push(space.to_params(&x, cfg.delta_tau)?);
                lls.push(ll);
            }
        }
    }

    let map_index = lls
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(GpMcmcResult {
        samples,
        log_likelihoods: lls,
        map_index,
        map_params,
        map_log_likelihood: map_ll,
        acceptance_rate: if post_n > 0 { accepted_post as f64 / post_n as f64 } else { 0.0 },
    })
}

/// BIC table and the selected fit.
#[derive(Debug)]
pub struct GpFitResult {
    /// `(breakpoint count, BIC)` for every count evaluated.
    pub bics: Vec<(usize, f64)>,
    pub selected_breakpoints: usize,
    pub fit: GpMcmcResult,
}

/// Fits 0, 1, 2, ... breakpoints, stopping one past the first count whose
/// BIC fails to improve, and returns the count with the smallest BIC.
///
/// `BIC = -2 max LL + p ln N` with `p = 4 + 2B` parameters and `N` records,
/// using the highest log-likelihood seen among the MCMC samples.
pub fn gp_bic_select(
    records: &[FailureRecord],
    manifest: &DatasetManifest,
    max_breakpoints: usize,
    prior: &GpPriorBox,
    cfg: &GpMcmcConfig,
    seed: u64,
) -> Result<GpFitResult> {
    let n = records.len() as f64;
    if records.is_empty() {
        return Err(CoreError::Data("BIC selection needs records".into()));
    }
    let mut bics: Vec<(usize, f64)> = Vec::new();
    let mut fits: Vec<GpMcmcResult> = Vec::new();
    for b in 0..=max_breakpoints {
        let fit = gp_mcmc_fit(records, manifest, b, prior, cfg, seed)?;
        let p = 4.0 + 2.0 * b as f64;
        let bic = -2.0 * fit.map_log_likelihood + p * n.ln();
        bics.push((b, bic));
        fits.push(fit);
        if b > 0 && bics[b].1 > bics[b - 1].1 {
            break;
        }
    }
    let (selected, _) = bics
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .copied()
        .expect("at least one fit");
    let fit = fits.swap_remove(selected);
    Ok(GpFitResult { bics, selected_breakpoints: selected, fit })
}
