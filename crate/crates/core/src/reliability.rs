//! Long-term reliability under stochastic residential loads: dead plus
//! sustained and extraordinary live components drive a piecewise-constant
//! 50-year stress history; Monte Carlo failure probabilities map to the
//! reliability index `beta = -Phi^{-1}(p_f)` over a sweep of performance
//! factors, with uncertainty bands from parameter-sample sets.

use rand::prelude::*;
use rand_distr::{Exp, Gamma as GammaDist, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canadian::{canadian_hold_step, sample_random_effects};
use crate::error::{CoreError, Result};
use crate::gamma_process::EtaEvaluator;
use crate::model::ModelHandle;
use crate::numerics::normal::normal_quantile;
use crate::profile::Profile;
use crate::us::UsParams;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormalSpec {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GammaSpec {
    pub shape: f64,
    pub scale: f64,
}

/// Stochastic load-model settings (times in hours, stresses in MPa).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadModelConfig {
    /// Characteristic strength multiplied by the performance factor.
    pub r_o: f64,
    /// Dead-to-live load ratio.
    pub gamma_ratio: f64,
    pub alpha_d: f64,
    pub alpha_l: f64,
    pub horizon_hours: f64,
    pub dead: NormalSpec,
    pub sustained_mean_duration_hours: f64,
    pub sustained_size: GammaSpec,
    pub extraordinary_mean_duration_hours: f64,
    pub extraordinary_size: GammaSpec,
    pub extraordinary_mean_interarrival_hours: f64,
}

impl Default for LoadModelConfig {
    fn default() -> Self {
        Self {
            r_o: 20.68,
            gamma_ratio: 0.25,
            alpha_d: 1.25,
            alpha_l: 1.5,
            horizon_hours: 50.0 * 8760.0,
            dead: NormalSpec { mean: 1.05, sd: 0.1 },
            sustained_mean_duration_hours: 10.0 * 8760.0,
            sustained_size: GammaSpec { shape: 3.122, scale: 0.0481 },
            extraordinary_mean_duration_hours: 2.0 * 168.0,
            extraordinary_size: GammaSpec { shape: 0.826, scale: 0.1023 },
            extraordinary_mean_interarrival_hours: 8760.0,
        }
    }
}

impl LoadModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.r_o,
            self.horizon_hours,
            self.dead.sd,
            self.sustained_mean_duration_hours,
            self.sustained_size.shape,
            self.sustained_size.scale,
            self.extraordinary_mean_duration_hours,
            self.extraordinary_size.shape,
            self.extraordinary_size.scale,
            self.extraordinary_mean_interarrival_hours,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(CoreError::Config("load model scales and means must be positive".into()));
        }
        if !(self.gamma_ratio > 0.0) || !(self.alpha_d > 0.0) || !(self.alpha_l > 0.0) {
            return Err(CoreError::Config("load combination factors must be positive".into()));
        }
        Ok(())
    }

    /// `phi R_o / (gamma alpha_d + alpha_l)`: stress per unit of
    /// standardized load.
    pub fn stress_scale(&self, phi: f64) -> f64 {
        phi * self.r_o / (self.gamma_ratio * self.alpha_d + self.alpha_l)
    }
}

/// One sampled 50-year profile plus its event count.
pub struct SampledLoad {
    pub profile: Profile,
    pub extraordinary_events: usize,
}

/// Draws one stochastic load history.
///
/// The dead load is fixed for the lifetime; sustained live-load periods tile
/// the horizon; extraordinary events renew from each start and overlapping
/// events add. All changes land on exact breakpoints, and the draw sequence
/// does not depend on `phi`, so a shared RNG gives common random numbers
/// across the sweep.
pub fn sample_load_profile(
    cfg: &LoadModelConfig,
    phi: f64,
    rng: &mut impl Rng,
) -> Result<SampledLoad> {
    cfg.validate()?;
    if !(phi > 0.0) {
        return Err(CoreError::Config(format!("phi must be positive, got {phi}")));
    }
    let horizon = cfg.horizon_hours;
    let dead: f64 = rng
        .sample::<f64, _>(Normal::new(cfg.dead.mean, cfg.dead.sd).expect("valid dead spec"))
        .max(0.0);

    let sus_dur = Exp::new(1.0 / cfg.sustained_mean_duration_hours).expect("rate > 0");
    let sus_size =
        GammaDist::new(cfg.sustained_size.shape, cfg.sustained_size.scale).expect("valid gamma");
    let mut sustained: Vec<(f64, f64)> = Vec::new(); // (start, level)
    let mut t = 0.0;
    while t < horizon {
        let size: f64 = rng.sample(sus_size);
        sustained.push((t, size));
        t += rng.sample::<f64, _>(sus_dur);
    }

    let ext_gap = Exp::new(1.0 / cfg.extraordinary_mean_interarrival_hours).expect("rate > 0");
    let ext_dur = Exp::new(1.0 / cfg.extraordinary_mean_duration_hours).expect("rate > 0");
    let ext_size = GammaDist::new(cfg.extraordinary_size.shape, cfg.extraordinary_size.scale)
        .expect("valid gamma");
    let mut events: Vec<(f64, f64, f64)> = Vec::new(); // (start, end, size)
    let mut s = 0.0;
    loop {
        s += rng.sample::<f64, _>(ext_gap);
        if s >= horizon {
            break;
        }
        let dur: f64 = rng.sample(ext_dur);
        let size: f64 = rng.sample(ext_size);
        events.push((s, (s + dur).min(horizon), size));
    }

    let mut breaks: Vec<f64> = vec![0.0];
    breaks.extend(sustained.iter().map(|&(start, _)| start));
    for &(a, b, _) in &events {
        breaks.push(a);
        breaks.push(b);
    }
    breaks.retain(|&b| b < horizon);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();

    let scale = cfg.stress_scale(phi);
    let values: Vec<f64> = breaks
        .iter()
        .map(|&bt| {
            let sus = sustained
                .iter()
                .rev()
                .find(|&&(start, _)| start <= bt)
                .map(|&(_, lvl)| lvl)
                .unwrap_or(0.0);
            let ext: f64 = events
                .iter()
                .filter(|&&(a, b, _)| a <= bt && bt < b)
                .map(|&(_, _, sz)| sz)
                .sum();
            (scale * (cfg.gamma_ratio * dead + sus + ext)).max(0.0)
        })
        .collect();
    Ok(SampledLoad {
        profile: Profile::piecewise(breaks, values, horizon)?,
        extraordinary_events: events.len(),
    })
}

/// Mean extraordinary-event count over `n` sampled profiles.
pub fn mean_extraordinary_events(cfg: &LoadModelConfig, n: usize, seed: u64) -> Result<f64> {
    let total: usize = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::model::derive_rng(seed, 0xE11A, i as u64);
            sample_load_profile(cfg, 1.0, &mut rng).map(|s| s.extraordinary_events)
        })
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum();
    Ok(total as f64 / n as f64)
}

/// How the gamma process turns per-profile survival into a failure tally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaTally {
    /// One uniform draw per profile against `1 - S(horizon)` (unbiased, the
    /// default).
    #[default]
    Bernoulli,
    /// Accumulate `1 - S(horizon)` directly (variance-reduced).
    Expectation,
}

fn piecewise_segments(profile: &Profile) -> Result<Vec<(f64, f64)>> {
    // (duration, level) pairs through the horizon.
    match profile {
        Profile::Piecewise(p) => {
            let mut segs = Vec::with_capacity(p.breakpoints.len());
            for (j, &v) in p.values.iter().enumerate() {
                let start = p.breakpoints[j];
                let end =
                    if j + 1 < p.breakpoints.len() { p.breakpoints[j + 1] } else { p.horizon };
                if end > start {
                    segs.push((end - start, v));
                }
            }
            Ok(segs)
        }
        _ => Err(CoreError::Config("expected a piecewise profile".into())),
    }
}

fn us_fails(p: &UsParams, z: f64, segments: &[(f64, f64)]) -> bool {
    let e_w = (p.w * z).exp();
    let bp = p.b_prime();
    let mut alpha = 0.0f64;
    for &(dur, tau) in segments {
        let rate = (-p.a + bp * tau / e_w).exp();
        alpha += rate * dur;
        if alpha >= 1.0 {
            return true;
        }
    }
    false
}

/// Failure-probability estimate for one model at one performance factor.
///
/// Accumulated damage models propagate damage segment by segment with the
/// constant-load closed forms; the gamma process evaluates survival at the
/// horizon. Trials use counter-derived streams: trial `i` sees the same
/// profile shape and specimen draws at every `phi`.
pub fn prob_failure(
    handle: &ModelHandle,
    cfg: &LoadModelConfig,
    phi: f64,
    n_r: usize,
    seed: u64,
    tally: GammaTally,
) -> Result<f64> {
    cfg.validate()?;
    if n_r == 0 {
        return Err(CoreError::Config("n_r must be positive".into()));
    }
    let contributions: Result<Vec<f64>> = (0..n_r)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::model::derive_rng(seed, 0xE11A, i as u64);
            let load = sample_load_profile(cfg, phi, &mut rng)?;
            match handle {
                ModelHandle::Us(p) => {
                    let z: f64 = rng.sample(StandardNormal);
                    let segments = piecewise_segments(&load.profile)?;
                    Ok(us_fails(p, z, &segments) as u8 as f64)
                }
                ModelHandle::Canadian(h) => {
                    let mut effects = None;
                    for _ in 0..100 {
                        if let Ok(e) = sample_random_effects(h, &mut rng) {
                            effects = Some(e);
                            break;
                        }
                    }
                    let e = effects.ok_or_else(|| {
                        CoreError::Numeric("strength solve failed repeatedly".into())
                    })?;
                    let segments = piecewise_segments(&load.profile)?;
                    let mut alpha = 0.0f64;
                    let mut failed = false;
                    for &(dur, tau) in &segments {
                        let (fail_after, alpha_end) = canadian_hold_step(&e, tau, alpha, dur);
                        if fail_after.is_some() {
                            failed = true;
                            break;
                        }
                        alpha = alpha_end;
                    }
                    Ok(failed as u8 as f64)
                }
                ModelHandle::Gamma(p) => {
                    let u: f64 = rng.random();
                    let eval = EtaEvaluator::new(p, &load.profile, cfg.horizon_hours)?;
                    let pf = 1.0 - eval.survival(cfg.horizon_hours)?;
                    Ok(match tally {
                        GammaTally::Bernoulli => (u < pf) as u8 as f64,
                        GammaTally::Expectation => pf,
                    })
                }
            }
        })
        .collect();
    Ok(contributions?.iter().sum::<f64>() / n_r as f64)
}

/// `beta = -Phi^{-1}(p_f)`.
pub fn beta_index(p_f: f64) -> Result<f64> {
    Ok(-normal_quantile(p_f)?)
}

/// Reliability curve over a `phi` grid.
#[derive(Debug, Clone, Serialize)]
pub struct ReliabilityCurve {
    pub phis: Vec<f64>,
    pub beta: Vec<f64>,
    pub beta_lo: Vec<f64>,
    pub beta_hi: Vec<f64>,
    pub n_r: usize,
}

/// Default sweep: 0.5 to 1.5 in steps of 0.05.
pub fn default_phi_grid() -> Vec<f64> {
    (0..=20).map(|i| 0.5 + 0.05 * i as f64).collect()
}

fn beta_clamped(p: f64, n_r: usize) -> Result<f64> {
    // Monte Carlo zeros/ones get a half-count continuity floor.
    let floor = 0.5 / n_r as f64;
    beta_index(p.clamp(floor, 1.0 - floor))
}

/// Point curve plus 95% parameter-uncertainty bands.
///
/// `samples` is the parameter-sample set for the bands (posterior samples,
/// or normal draws for the US model): `None` collapses the band onto the
/// point estimate; an empty set is a configuration error. Common random
/// numbers are used across `phi` values and samples.
pub fn phi_beta_curve(
    point: &ModelHandle,
    samples: Option<&[ModelHandle]>,
    cfg: &LoadModelConfig,
    phis: &[f64],
    n_r: usize,
    seed: u64,
    tally: GammaTally,
) -> Result<ReliabilityCurve> {
    if phis.is_empty() {
        return Err(CoreError::Config("phi grid is empty".into()));
    }
    if let Some(s) = samples {
        if s.is_empty() {
            return Err(CoreError::Config(
                "band computation requested with an empty parameter-sample set".into(),
            ));
        }
    }
    let mut beta = Vec::with_capacity(phis.len());
    let mut beta_lo = Vec::with_capacity(phis.len());
    let mut beta_hi = Vec::with_capacity(phis.len());
    for &phi in phis {
        let p = prob_failure(point, cfg, phi, n_r, seed, tally)?;
        let b = beta_clamped(p, n_r)?;
        let (mut lo, mut hi) = (b, b);
        if let Some(sample_set) = samples {
            let betas: Vec<f64> = sample_set
                .iter()
                .map(|h| {
                    let ps = prob_failure(h, cfg, phi, n_r, seed, tally)?;
                    beta_clamped(ps, n_r)
                })
                .collect::<Result<Vec<_>>>()?;
            let qs = crate::numerics::quantile::quantiles(&betas, &[0.025, 0.975])?;
            // The band always covers the point estimate.
            lo = qs[0].min(b);
            hi = qs[1].max(b);
        }
        beta.push(b);
        beta_lo.push(lo);
        beta_hi.push(hi);
    }
    Ok(ReliabilityCurve { phis: phis.to_vec(), beta, beta_lo, beta_hi, n_r })
}

/// Normal parameter draws around the US estimates for its uncertainty band.
pub fn us_normal_param_draws(
    params: &UsParams,
    se: &crate::model::UsStandardErrors,
    count: usize,
    seed: u64,
) -> Vec<ModelHandle> {
    (0..count)
        .map(|i| {
            let mut rng = crate::model::derive_rng(seed, 0x05B4, i as u64);
            // Redraw on the rare invalid (nonpositive) parameter set.
            for _ in 0..100 {
                let cand = UsParams {
                    a: params.a + se.a * rng.sample::<f64, _>(StandardNormal),
                    b: params.b + se.b * rng.sample::<f64, _>(StandardNormal),
                    w: params.w + se.w * rng.sample::<f64, _>(StandardNormal),
                    tau_m: params.tau_m,
                };
                if cand.validate().is_ok() {
                    return ModelHandle::Us(cand);
                }
            }
            ModelHandle::Us(*params)
        })
        .collect()
}
