//! Simulation-based goodness of fit: QQ data on the load-at-failure scale,
//! KDE-approximated log-likelihoods, and BIC model comparison.

use serde::Serialize;

use crate::data::{DatasetManifest, FailureRecord, GroupSpec, Outcome};
use crate::error::{CoreError, Result};
use crate::model::ModelHandle;
use crate::numerics::kde::{kde_log_density, KdeConfig};
use crate::numerics::quantile::quantiles;
use crate::profile::Profile;

/// Simulated samples for every group of the design, in manifest order.
pub fn simulate_for_gof(
    handle: &ModelHandle,
    manifest: &DatasetManifest,
    n_per_group: usize,
    seed: u64,
) -> Result<Vec<Vec<FailureRecord>>> {
    manifest.validate()?;
    manifest
        .groups
        .iter()
        .map(|g| handle.simulate_group(&g.profile, g.id, n_per_group, seed))
        .collect()
}

/// Load carried at the moment of failure; `None` for censored records.
pub fn load_at_failure(rec: &FailureRecord, profile: &Profile) -> Result<Option<f64>> {
    let Some(t) = rec.time_hours else { return Ok(None) };
    Ok(match (rec.outcome, profile) {
        (Outcome::Censored, _) => None,
        (Outcome::FailedRamp, Profile::Ramp(p)) => Some(p.k * t),
        (Outcome::FailedRamp, Profile::Constant(c)) => Some(c.k * t),
        (Outcome::FailedRamp, Profile::Rcr(r)) => Some(r.constant.k * t),
        (Outcome::FailedConstant, Profile::Constant(c)) => Some(c.tau_c),
        (Outcome::FailedConstant, Profile::Rcr(r)) => Some(r.constant.tau_c),
        (Outcome::FailedRcr, Profile::Rcr(r)) => Some(r.reload_k * (t - r.constant.t1)),
        (o, p) => {
            return Err(CoreError::Data(format!(
                "outcome {} inconsistent with profile {p:?}",
                o.as_str()
            )))
        }
    })
}

/// Paired observed/simulated quantiles of load-at-failure for one group.
#[derive(Debug, Clone, Serialize)]
pub struct QqData {
    pub group: u32,
    pub probs: Vec<f64>,
    pub observed_mpa: Vec<f64>,
    pub simulated_mpa: Vec<f64>,
}

/// QQ pairing at the observed sample's plotting positions `(i - 0.5)/n`.
pub fn qq_data(
    observed: &[FailureRecord],
    simulated: &[FailureRecord],
    group: &GroupSpec,
) -> Result<QqData> {
    let mut obs: Vec<f64> = observed
        .iter()
        .filter(|r| r.group == group.id)
        .filter_map(|r| load_at_failure(r, &group.profile).transpose())
        .collect::<Result<Vec<_>>>()?;
    obs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if obs.is_empty() {
        return Err(CoreError::Data(format!("group {} has no observed failures", group.id)));
    }
    let sim: Vec<f64> = simulated
        .iter()
        .filter(|r| r.group == group.id)
        .filter_map(|r| load_at_failure(r, &group.profile).transpose())
        .collect::<Result<Vec<_>>>()?;
    if sim.is_empty() {
        return Err(CoreError::Data(format!("group {} has no simulated failures", group.id)));
    }
    let n = obs.len();
    let probs: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
    let simulated_mpa = quantiles(&sim, &probs)?;
    Ok(QqData { group: group.id, probs, observed_mpa: obs, simulated_mpa })
}

/// KDE-approximated log-likelihood of the observed data under a model.
#[derive(Debug, Clone)]
pub struct ApproxLogLik {
    pub total: f64,
    pub per_group: Vec<(u32, f64)>,
    pub n_sim_per_group: usize,
    pub warnings: Vec<String>,
}

/// Approximates the observed-data log-likelihood by simulating
/// `n_sim_per_group` failure times per group and smoothing them with a KDE
/// on the log-time scale.
///
/// Constant-load groups decompose into the discrete survive-to-`T1` split
/// (binomial terms at the simulated survival rate) and conditional KDE
/// densities: pre-`T1` failures on `ln t`, reload failures on `ln(t - T1)`,
/// each with the log-transform Jacobian.
pub fn approx_log_likelihood(
    observed: &[FailureRecord],
    handle: &ModelHandle,
    manifest: &DatasetManifest,
    n_sim_per_group: usize,
    kde_cfg: &KdeConfig,
    seed: u64,
) -> Result<ApproxLogLik> {
    manifest.validate()?;
    let mut warnings = Vec::new();
    if n_sim_per_group < 10_000 {
        warnings.push(format!(
            "simulated sample size {n_sim_per_group} per group is below 10000; \
             the approximation may be coarse"
        ));
    }
    let mut per_group = Vec::new();
    let mut total = 0.0;
    for g in &manifest.groups {
        let obs: Vec<&FailureRecord> = observed.iter().filter(|r| r.group == g.id).collect();
        if obs.is_empty() {
            continue;
        }
        let sim = handle.simulate_group(&g.profile, g.id, n_sim_per_group, seed)?;
        let ll = match &g.profile {
            Profile::Ramp(_) => {
                let sim_logs: Vec<f64> = sim
                    .iter()
                    .filter_map(|r| r.time_hours.map(f64::ln))
                    .collect();
                let queries: Vec<f64> = obs
                    .iter()
                    .map(|r| {
                        r.time_hours.map(f64::ln).ok_or_else(|| {
                            CoreError::Data(format!("record {} lacks a time", r.specimen))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let lds = kde_log_density(&sim_logs, &queries, kde_cfg)?;
                lds.iter().zip(&queries).map(|(ld, lq)| ld - lq).sum::<f64>()
            }
            Profile::Constant(_) | Profile::Rcr(_) => {
                let t1 = match &g.profile {
                    Profile::Constant(c) => c.t1,
                    Profile::Rcr(r) => r.constant.t1,
                    _ => unreachable!(),
                };
                let n_sim = sim.len() as f64;
                let sim_pre: Vec<f64> = sim
                    .iter()
                    .filter(|r| {
                        matches!(r.outcome, Outcome::FailedRamp | Outcome::FailedConstant)
                    })
                    .filter_map(|r| r.time_hours.map(f64::ln))
                    .collect();
                let sim_rcr: Vec<f64> = sim
                    .iter()
                    .filter(|r| r.outcome == Outcome::FailedRcr)
                    .filter_map(|r| r.time_hours.map(|t| (t - t1).ln()))
                    .collect();
                let surv = (n_sim - sim_pre.len() as f64) / n_sim;
                let p_surv = surv.clamp(0.5 / n_sim, 1.0 - 0.5 / n_sim);

                let mut group_ll = 0.0;
                let mut pre_queries = Vec::new();
                let mut rcr_queries = Vec::new();
                for r in &obs {
                    match r.outcome {
                        Outcome::Censored => group_ll += p_surv.ln(),
                        Outcome::FailedRamp | Outcome::FailedConstant => {
                            group_ll += (1.0 - p_surv).ln();
                            pre_queries.push(r.time_hours.unwrap().ln());
                        }
                        Outcome::FailedRcr => {
                            group_ll += p_surv.ln();
                            rcr_queries.push((r.time_hours.unwrap() - t1).ln());
                        }
                    }
                }
                for (class, sims, queries) in [
                    ("pre-T1", &sim_pre, &pre_queries),
                    ("reload", &sim_rcr, &rcr_queries),
                ] {
                    if queries.is_empty() {
                        continue;
                    }
                    if sims.len() >= 100 {
                        let lds = kde_log_density(sims, queries, kde_cfg)?;
                        group_ll +=
                            lds.iter().zip(queries).map(|(ld, lq)| ld - lq).sum::<f64>();
                    } else {
                        // The model puts almost no mass where the data have
                        // failures; charge a resolution-floor probability.
                        warnings.push(format!(
                            "group {}: only {} simulated {class} failures for {} observed; \
                             floor density used",
                            g.id,
                            sims.len(),
                            queries.len()
                        ));
                        group_ll += queries.len() as f64 * (0.5 / n_sim).ln();
                    }
                }
                group_ll
            }
            Profile::Piecewise(_) => {
                return Err(CoreError::Config(
                    "approximate likelihood is defined for test profiles only".into(),
                ))
            }
        };
        per_group.push((g.id, ll));
        total += ll;
    }
    Ok(ApproxLogLik { total, per_group, n_sim_per_group, warnings })
}

/// One model's entry in a comparison.
#[derive(Debug, Clone, Serialize)]
pub struct ModelFitSummary {
    pub model: String,
    pub log_likelihood: f64,
    pub param_count: usize,
    pub bic: f64,
}

/// BIC table with pairwise parameter-compensated likelihood ratios.
#[derive(Debug, Clone, Serialize)]
pub struct ModelComparison {
    pub n_records: usize,
    pub models: Vec<ModelFitSummary>,
    /// `ratios[i][j] = exp((BIC_j - BIC_i)/2)`: how strongly model `i` is
    /// preferred over model `j` after compensating for parameter counts.
    pub ratios: Vec<Vec<f64>>,
}

/// Compares models by `BIC = -2 LL + p ln N`.
pub fn compare_models(entries: &[(String, f64, usize)], n_records: usize) -> Result<ModelComparison> {
    if entries.is_empty() {
        return Err(CoreError::Config("nothing to compare".into()));
    }
    if n_records == 0 {
        return Err(CoreError::Config("record count must be positive".into()));
    }
    let n = n_records as f64;
    let models: Vec<ModelFitSummary> = entries
        .iter()
        .map(|(name, ll, p)| ModelFitSummary {
            model: name.clone(),
            log_likelihood: *ll,
            param_count: *p,
            bic: -2.0 * ll + (*p as f64) * n.ln(),
        })
        .collect();
    let ratios = models
        .iter()
        .map(|a| models.iter().map(|b| ((b.bic - a.bic) / 2.0).exp()).collect())
        .collect();
    Ok(ModelComparison { n_records, models, ratios })
}
