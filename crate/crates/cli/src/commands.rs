//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde::Serialize;

use dol_core::canadian::abc::{abc_mcmc_fit, default_prior_box, AbcConfig};
use dol_core::data::{ingest_csv, DatasetManifest};
use dol_core::error::{CoreError, Result};
use dol_core::gamma_process::mcmc::{default_gp_prior, gp_bic_select, GpMcmcConfig};
use dol_core::gof::{approx_log_likelihood, compare_models, qq_data};
use dol_core::model::{
    generate_synthetic, load_params, load_us_with_se, ModelHandle, UsParamsFile,
    UsStandardErrors,
};
use dol_core::numerics::kde::KdeConfig;
use dol_core::numerics::quantile::quantiles;
use dol_core::reliability::{
    phi_beta_curve, us_normal_param_draws, GammaTally, LoadModelConfig,
};
use dol_core::us::{compute_tau_m, us_nls_fit, UsFitConfig};

use crate::output;

pub struct FitArgs {
    pub model: String,
    pub data: PathBuf,
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub delta: Option<f64>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    pub iters: Option<usize>,
    pub max_breakpoints: Option<usize>,
    pub ll_sims: Option<usize>,
}

#[derive(Serialize)]
struct UsFitReport {
    a: f64,
    b: f64,
    w: f64,
    tau_m: f64,
    se_a: f64,
    se_b: f64,
    se_w: f64,
    iterations: usize,
    converged: bool,
    excluded: Vec<String>,
    /// `[before, after]` weighted objective per reweighting iteration.
    objective_trace: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct CanadianFitReport {
    acceptance_rate: f64,
    n_samples: usize,
    strength_solve_rejections: u64,
    point_estimate: dol_core::canadian::CanadianHyperParams,
    point_estimate_rule: String,
    ci_lo: Vec<f64>,
    ci_hi: Vec<f64>,
}

#[derive(Serialize)]
struct GammaFitReport {
    selected_breakpoints: usize,
    acceptance_rate: f64,
    n_samples: usize,
    max_log_likelihood: f64,
    bics: Vec<(usize, f64)>,
}

pub fn fit(args: FitArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let report = ingest_csv(&args.data, &manifest)?;
    std::fs::create_dir_all(&args.out)?;
    match args.model.as_str() {
        "us" => {
            let tau_m = compute_tau_m(&report.records, &manifest)?;
            let fit = us_nls_fit(&report.records, &manifest, tau_m, &UsFitConfig::default())?;
            let fit_report = UsFitReport {
                a: fit.params.a,
                b: fit.params.b,
                w: fit.params.w,
                tau_m,
                se_a: fit.se[0],
                se_b: fit.se[1],
                se_w: fit.se[2],
                iterations: fit.iterations,
                converged: fit.converged,
                excluded: fit.excluded.clone(),
                objective_trace: fit.objective_trace.clone(),
            };
            write_toml(&args.out.join("us_fit.toml"), &fit_report)?;
            let params_file = UsParamsFile {
                a: fit.params.a,
                b: fit.params.b,
                w: fit.params.w,
                tau_m,
                se: Some(UsStandardErrors { a: fit.se[0], b: fit.se[1], w: fit.se[2] }),
            };
            write_toml(&args.out.join("us_params.toml"), &params_file)?;
            Ok(())
        }
        "canadian" => {
            let iterations = args.iters.unwrap_or(20_000);
            let cfg = AbcConfig {
                delta: args.delta.unwrap_or(2.0),
                iterations,
                burn_in: args.burnin.unwrap_or(iterations / 4),
                thin: args.thin.unwrap_or(30),
                ll_sims_per_group: args.ll_sims.unwrap_or(0),
                ..Default::default()
            };
            let prior = default_prior_box();
            let run = abc_mcmc_fit(&report.records, &manifest, &cfg, &prior, args.seed)?;
            output::write_canadian_chain(
                &args.out.join("chain.txt"),
                &run,
                cfg.delta,
                cfg.burn_in,
                cfg.thin,
                args.seed,
            )?;
            // Point estimate: the max approximate-likelihood sample when the
            // likelihoods were computed, otherwise componentwise medians.
            let (point, rule) = if run.log_likelihoods.iter().any(|v| v.is_finite()) {
                (run.samples[run.map_index], "max approximate log-likelihood".to_string())
            } else {
                let mut med = [0.0; 10];
                for (j, item) in med.iter_mut().enumerate() {
                    let col: Vec<f64> = run.samples.iter().map(|s| s.to_array()[j]).collect();
                    *item = quantiles(&col, &[0.5])?[0];
                }
                (
                    dol_core::canadian::CanadianHyperParams::from_array(&med),
                    "componentwise posterior median".to_string(),
                )
            };
            let mut ci_lo = Vec::with_capacity(10);
            let mut ci_hi = Vec::with_capacity(10);
            for j in 0..10 {
                let col: Vec<f64> = run.samples.iter().map(|s| s.to_array()[j]).collect();
                let qs = quantiles(&col, &[0.025, 0.975])?;
                ci_lo.push(qs[0]);
                ci_hi.push(qs[1]);
            }
            write_toml(&args.out.join("canadian_params.toml"), &point)?;
            write_toml(
                &args.out.join("canadian_fit.toml"),
                &CanadianFitReport {
                    acceptance_rate: run.acceptance_rate,
                    n_samples: run.samples.len(),
                    strength_solve_rejections: run.strength_solve_rejections,
                    point_estimate: point,
                    point_estimate_rule: rule,
                    ci_lo,
                    ci_hi,
                },
            )?;
            Ok(())
        }
        "gamma" => {
            let iterations = args.iters.unwrap_or(6_000);
            let cfg = GpMcmcConfig {
                iterations,
                burn_in: args.burnin.unwrap_or(iterations / 4),
                thin: args.thin.unwrap_or(10),
                ..Default::default()
            };
            let prior = default_gp_prior(&report.records, &manifest)?;
            let sel = gp_bic_select(
                &report.records,
                &manifest,
                args.max_breakpoints.unwrap_or(3),
                &prior,
                &cfg,
                args.seed,
            )?;
            output::write_gamma_chain(
                &args.out.join("gamma_chain.txt"),
                &sel.fit,
                sel.selected_breakpoints,
                args.seed,
            )?;
            output::write_bic_table(
                &args.out.join("bic.txt"),
                &sel.bics,
                sel.selected_breakpoints,
            )?;
            write_toml(&args.out.join("gamma_params.toml"), &sel.fit.map_params)?;
            write_toml(
                &args.out.join("gamma_fit.toml"),
                &GammaFitReport {
                    selected_breakpoints: sel.selected_breakpoints,
                    acceptance_rate: sel.fit.acceptance_rate,
                    n_samples: sel.fit.samples.len(),
                    max_log_likelihood: sel.fit.map_log_likelihood,
                    bics: sel.bics.clone(),
                },
            )?;
            Ok(())
        }
        other => Err(CoreError::Config(format!(
            "unknown model {other:?} (expected us, canadian, or gamma)"
        ))),
    }
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value)
        .map_err(|e| CoreError::Config(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn simulate(
    model: &str,
    params: &Path,
    manifest: &Path,
    n: usize,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let handle = load_params(model, params)?;
    let manifest = DatasetManifest::load(manifest)?;
    let records = handle.simulate_design(&manifest, Some(n), seed)?;
    dol_core::data::write_csv(&records, out)
}

#[derive(Serialize)]
struct LoglikReport {
    model: String,
    approx_log_likelihood: f64,
    n_records: usize,
    param_count: usize,
    n_sim_per_group: usize,
    per_group: Vec<(u32, f64)>,
    warnings: Vec<String>,
}

fn param_count(handle: &ModelHandle) -> usize {
    match handle {
        ModelHandle::Us(_) => 3,
        ModelHandle::Canadian(_) => 10,
        ModelHandle::Gamma(p) => 4 + 2 * p.law.breakpoints.len(),
    }
}

pub fn gof(
    model: &str,
    params: &Path,
    data: &Path,
    manifest: &Path,
    out: &Path,
    n_sim: usize,
    seed: u64,
) -> Result<()> {
    let handle = load_params(model, params)?;
    let manifest = DatasetManifest::load(manifest)?;
    let report = ingest_csv(data, &manifest)?;
    std::fs::create_dir_all(out)?;
    for group in &manifest.groups {
        let sim = handle.simulate_group(&group.profile, group.id, n_sim, seed)?;
        let qq = qq_data(&report.records, &sim, group)?;
        output::write_qq_csv(&out.join(format!("qq_group_{}.csv", group.id)), &qq)?;
    }
    let ll = approx_log_likelihood(
        &report.records,
        &handle,
        &manifest,
        n_sim,
        &KdeConfig::default(),
        seed,
    )?;
    write_toml(
        &out.join("loglik.toml"),
        &LoglikReport {
            model: handle.name().to_string(),
            approx_log_likelihood: ll.total,
            n_records: report.records.len(),
            param_count: param_count(&handle),
            n_sim_per_group: ll.n_sim_per_group,
            per_group: ll.per_group.clone(),
            warnings: ll.warnings.clone(),
        },
    )?;
    Ok(())
}

#[derive(serde::Deserialize)]
struct LoglikIn {
    model: String,
    approx_log_likelihood: f64,
    n_records: usize,
    param_count: usize,
}

pub fn compare(results: &[PathBuf], out: &Path) -> Result<()> {
    let mut entries = Vec::new();
    let mut n_records: Option<usize> = None;
    for dir in results {
        let path = dir.join("loglik.toml");
        let text = std::fs::read_to_string(&path)?;
        let ll: LoglikIn = toml::from_str(&text)
            .map_err(|e| CoreError::Data(format!("{}: {e}", path.display())))?;
        match n_records {
            None => n_records = Some(ll.n_records),
            Some(n) if n != ll.n_records => {
                return Err(CoreError::Data(format!(
                    "record counts differ across results: {n} vs {} in {}",
                    ll.n_records,
                    path.display()
                )))
            }
            _ => {}
        }
        entries.push((ll.model, ll.approx_log_likelihood, ll.param_count));
    }
    let cmp = compare_models(&entries, n_records.unwrap_or(0))?;
    output::write_comparison(out, &cmp)
}

pub struct ReliabilityArgs {
    pub model: String,
    pub params: PathBuf,
    pub param_samples: Option<PathBuf>,
    pub phi_min: f64,
    pub phi_max: f64,
    pub phi_step: f64,
    pub nr: usize,
    pub load_config: Option<PathBuf>,
    pub band_samples: usize,
    pub out: PathBuf,
    pub seed: u64,
}

fn subsample<T: Clone>(items: Vec<T>, cap: usize) -> Vec<T> {
    if items.len() <= cap || cap == 0 {
        return items;
    }
    let step = items.len() as f64 / cap as f64;
    (0..cap).map(|i| items[(i as f64 * step) as usize].clone()).collect()
}

pub fn reliability(args: ReliabilityArgs) -> Result<()> {
    if !(args.phi_step > 0.0) || !(args.phi_max >= args.phi_min) || !(args.phi_min > 0.0) {
        return Err(CoreError::Config("need phi_min > 0, phi_max >= phi_min, phi_step > 0".into()));
    }
    let load_cfg = match &args.load_config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str::<LoadModelConfig>(&text)
                .map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))?
        }
        None => LoadModelConfig::default(),
    };
    let mut phis = Vec::new();
    let mut phi = args.phi_min;
    while phi <= args.phi_max + 1e-12 {
        phis.push(phi);
        phi += args.phi_step;
    }

    let (point, samples): (ModelHandle, Option<Vec<ModelHandle>>) = match args.model.as_str() {
        "us" => {
            let (p, se) = load_us_with_se(&args.params)?;
            if args.param_samples.is_some() {
                return Err(CoreError::Config(
                    "the US band comes from the standard errors in the params file; \
                     --param-samples applies to canadian/gamma chains"
                        .into(),
                ));
            }
            let samples = se.map(|se| {
                us_normal_param_draws(&p, &se, args.band_samples.max(1), args.seed)
            });
            (ModelHandle::Us(p), samples)
        }
        "canadian" => {
            let point = load_params("canadian", &args.params)?;
            let samples = match &args.param_samples {
                Some(path) => Some(subsample(
                    output::read_canadian_chain(path)?
                        .into_iter()
                        .map(ModelHandle::Canadian)
                        .collect(),
                    args.band_samples,
                )),
                None => None,
            };
            (point, samples)
        }
        "gamma" => {
            let point = load_params("gamma", &args.params)?;
            let samples = match &args.param_samples {
                Some(path) => Some(subsample(
                    output::read_gamma_chain(path)?
                        .into_iter()
                        .map(ModelHandle::Gamma)
                        .collect(),
                    args.band_samples,
                )),
                None => None,
            };
            (point, samples)
        }
        other => {
            return Err(CoreError::Config(format!(
                "unknown model {other:?} (expected us, canadian, or gamma)"
            )))
        }
    };

    let curve = phi_beta_curve(
        &point,
        samples.as_deref(),
        &load_cfg,
        &phis,
        args.nr,
        args.seed,
        GammaTally::Bernoulli,
    )?;
    output::write_curve_csv(&args.out, &curve)
}

pub fn synth(model: &str, params: &Path, manifest: &Path, out: &Path, seed: u64) -> Result<()> {
    let handle = load_params(model, params)?;
    let manifest = DatasetManifest::load(manifest)?;
    generate_synthetic(&handle, &manifest, seed, out)?;
    Ok(())
}
