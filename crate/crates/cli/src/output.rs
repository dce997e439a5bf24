//! Deterministic text writers for chain files, tables, and curves.

use std::io::Write;
use std::path::Path;

use dol_core::canadian::abc::AbcResult;
use dol_core::canadian::HYPER_NAMES;
use dol_core::error::Result;
use dol_core::gamma_process::mcmc::GpMcmcResult;
use dol_core::gamma_process::GammaProcessParams;
use dol_core::gof::{ModelComparison, QqData};
use dol_core::reliability::ReliabilityCurve;

pub fn write_canadian_chain(
    path: &Path,
    run: &AbcResult,
    delta: f64,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "# canadian ABC-MCMC chain")?;
    writeln!(f, "# delta = {delta}")?;
    writeln!(f, "# burn_in = {burn_in}")?;
    writeln!(f, "# thinning = {thin}")?;
    writeln!(f, "# seed = {seed}")?;
    writeln!(f, "# acceptance_rate = {}", run.acceptance_rate)?;
    writeln!(f, "# columns: {} approx_loglik", HYPER_NAMES.join(" "))?;
    for (s, ll) in run.samples.iter().zip(&run.log_likelihoods) {
        let vals = s.to_array();
        let mut line = String::new();
        for v in vals {
            line.push_str(&format!("{v} "));
        }
        line.push_str(&format!("{ll}"));
        writeln!(f, "{line}")?;
    }
    Ok(())
}

pub fn write_gamma_chain(path: &Path, run: &GpMcmcResult, breakpoints: usize, seed: u64) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "# gamma-process MCMC chain")?;
    writeln!(f, "# breakpoints = {breakpoints}")?;
    writeln!(f, "# seed = {seed}")?;
    writeln!(f, "# acceptance_rate = {}", run.acceptance_rate)?;
    let mut cols = vec!["u".to_string(), "tau_star".into(), "xi".into()];
    for i in 0..=breakpoints {
        cols.push(format!("a{}", i + 1));
    }
    for i in 0..breakpoints {
        cols.push(format!("t{}", i + 1));
    }
    cols.push("loglik".into());
    writeln!(f, "# columns: {}", cols.join(" "))?;
    for (s, ll) in run.samples.iter().zip(&run.log_likelihoods) {
        let mut line = format!("{} {} {}", s.u, s.tau_star, s.xi);
        for a in &s.law.powers {
            line.push_str(&format!(" {a}"));
        }
        for t in &s.law.breakpoints {
            line.push_str(&format!(" {t}"));
        }
        line.push_str(&format!(" {ll}"));
        writeln!(f, "{line}")?;
    }
    Ok(())
}

/// Parses the canadian chain format back into hyperparameter samples.
pub fn read_canadian_chain(path: &Path) -> Result<Vec<dol_core::canadian::CanadianHyperParams>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| {
                dol_core::CoreError::Data(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
        if vals.len() < 10 {
            return Err(dol_core::CoreError::Data(format!(
                "{}:{}: expected at least 10 values, got {}",
                path.display(),
                i + 1,
                vals.len()
            )));
        }
        let mut arr = [0.0; 10];
        arr.copy_from_slice(&vals[..10]);
        out.push(dol_core::canadian::CanadianHyperParams::from_array(&arr));
    }
    Ok(out)
}

/// Parses the gamma chain format (breakpoint count inferred per line).
pub fn read_gamma_chain(path: &Path) -> Result<Vec<GammaProcessParams>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| {
                dol_core::CoreError::Data(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
        // columns: u tau* xi, B+1 powers, B times, loglik => 2B + 5 values.
        if vals.len() < 5 || (vals.len() - 5) % 2 != 0 {
            return Err(dol_core::CoreError::Data(format!(
                "{}:{}: malformed gamma chain row ({} values)",
                path.display(),
                i + 1,
                vals.len()
            )));
        }
        let b = (vals.len() - 5) / 2;
        let powers = vals[3..4 + b].to_vec();
        let times = vals[4 + b..4 + 2 * b].to_vec();
        out.push(GammaProcessParams {
            u: vals[0],
            tau_star: vals[1],
            xi: vals[2],
            law: dol_core::gamma_process::BrokenPowerLaw::new(times, powers)?,
            delta_tau: dol_core::gamma_process::DEFAULT_DELTA_TAU,
        });
    }
    Ok(out)
}

pub fn write_bic_table(path: &Path, bics: &[(usize, f64)], selected: usize) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "breakpoints\tbic\tselected")?;
    for (b, bic) in bics {
        writeln!(f, "{b}\t{bic}\t{}", if *b == selected { 1 } else { 0 })?;
    }
    Ok(())
}

pub fn write_qq_csv(path: &Path, qq: &QqData) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "p,observed_MPa,simulated_MPa")?;
    for i in 0..qq.probs.len() {
        writeln!(f, "{},{},{}", qq.probs[i], qq.observed_mpa[i], qq.simulated_mpa[i])?;
    }
    Ok(())
}

pub fn write_curve_csv(path: &Path, curve: &ReliabilityCurve) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "phi,beta,beta_lo,beta_hi")?;
    for i in 0..curve.phis.len() {
        writeln!(
            f,
            "{},{},{},{}",
            curve.phis[i], curve.beta[i], curve.beta_lo[i], curve.beta_hi[i]
        )?;
    }
    Ok(())
}

pub fn write_comparison(path: &Path, cmp: &ModelComparison) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "n_records\t{}", cmp.n_records)?;
    writeln!(f, "model\tlog_likelihood\tparams\tbic")?;
    for m in &cmp.models {
        writeln!(f, "{}\t{}\t{}\t{}", m.model, m.log_likelihood, m.param_count, m.bic)?;
    }
    writeln!(f, "# adjusted likelihood ratios: row preferred over column by exp((BIC_col - BIC_row)/2)")?;
    let names: Vec<&str> = cmp.models.iter().map(|m| m.model.as_str()).collect();
    writeln!(f, "ratio\t{}", names.join("\t"))?;
    for (i, row) in cmp.ratios.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|r| format!("{r:.6e}")).collect();
        writeln!(f, "{}\t{}", names[i], cells.join("\t"))?;
    }
    Ok(())
}
