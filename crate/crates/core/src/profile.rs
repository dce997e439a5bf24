//! Load profiles: the deterministic test shapes (ramp, constant,
//! ramp-constant-ramp) and piecewise-constant stochastic profiles, plus the
//! duration-above-threshold functionals the gamma process is built on.
//!
//! All profiles are immutable after construction and can be shared freely
//! across threads. Times are hours, stresses MPa.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// Time units accepted wherever a duration carries an explicit tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Seconds,
    Minutes,
    Hours,
    Days,
    Weeks,
    Months,
    Years,
}

impl TimeUnit {
    /// Conversion factor to hours. Months are fixed at 730 h, years at
    /// 8760 h, weeks at 168 h.
    pub fn to_hours(self) -> f64 {
        match self {
            TimeUnit::Seconds => 1.0 / 3600.0,
            TimeUnit::Minutes => 1.0 / 60.0,
            TimeUnit::Hours => 1.0,
            TimeUnit::Days => 24.0,
            TimeUnit::Weeks => 168.0,
            TimeUnit::Months => 730.0,
            TimeUnit::Years => 8760.0,
        }
    }

    pub fn parse(tag: &str) -> Result<TimeUnit> {
        match tag.trim().to_ascii_lowercase().as_str() {
            "s" | "sec" | "secs" | "second" | "seconds" => Ok(TimeUnit::Seconds),
            "min" | "mins" | "minute" | "minutes" => Ok(TimeUnit::Minutes),
            "h" | "hr" | "hrs" | "hour" | "hours" => Ok(TimeUnit::Hours),
            "d" | "day" | "days" => Ok(TimeUnit::Days),
            "w" | "wk" | "week" | "weeks" => Ok(TimeUnit::Weeks),
            "mo" | "month" | "months" => Ok(TimeUnit::Months),
            "y" | "yr" | "yrs" | "year" | "years" => Ok(TimeUnit::Years),
            other => Err(CoreError::Data(format!("unknown time unit tag: {other:?}"))),
        }
    }
}

/// A duration in a config file: either plain hours or `{ value, unit }`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DurationSpec {
    Hours(f64),
    Tagged { value: f64, unit: TimeUnit },
}

impl DurationSpec {
    pub fn hours(self) -> f64 {
        match self {
            DurationSpec::Hours(h) => h,
            DurationSpec::Tagged { value, unit } => value * unit.to_hours(),
        }
    }
}

/// Ramp load: `tau(t) = k t` until failure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampProfile {
    /// Loading rate, MPa per hour.
    pub k: f64,
}

/// Constant load: ramp at rate `k` to `tau_c`, hold until `t1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantProfile {
    pub k: f64,
    pub tau_c: f64,
    /// End of the constant-load phase, hours.
    pub t1: f64,
}

impl ConstantProfile {
    /// Time at which the initial ramp reaches `tau_c`.
    pub fn t0(&self) -> f64 {
        self.tau_c / self.k
    }
}

/// Ramp-constant-ramp: survivors of the constant phase are reloaded at
/// `reload_k` starting immediately at `t1` (`tau(t) = reload_k (t - t1)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcrProfile {
    pub constant: ConstantProfile,
    pub reload_k: f64,
}

/// Right-continuous step function: value `values[j]` on
/// `[breakpoints[j], breakpoints[j+1])`, last value through the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseProfile {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub horizon: f64,
}

/// Any applied-stress history.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Ramp(RampProfile),
    Constant(ConstantProfile),
    Rcr(RcrProfile),
    Piecewise(PiecewiseProfile),
}

impl Profile {
    pub fn ramp(k: f64) -> Result<Profile> {
        if !(k > 0.0) {
            return Err(CoreError::Config(format!("ramp rate must be positive, got {k}")));
        }
        Ok(Profile::Ramp(RampProfile { k }))
    }

    pub fn constant(k: f64, tau_c: f64, t1: f64) -> Result<Profile> {
        if !(k > 0.0) || !(tau_c > 0.0) {
            return Err(CoreError::Config(format!(
                "constant profile needs k > 0 and tau_c > 0, got k={k} tau_c={tau_c}"
            )));
        }
        let p = ConstantProfile { k, tau_c, t1 };
        if !(t1 > p.t0()) {
            return Err(CoreError::Config(format!(
                "constant profile needs T1 > T0 = tau_c/k, got T1={t1} T0={}",
                p.t0()
            )));
        }
        Ok(Profile::Constant(p))
    }

    pub fn rcr(k: f64, tau_c: f64, t1: f64, reload_k: f64) -> Result<Profile> {
        let c = match Profile::constant(k, tau_c, t1)? {
            Profile::Constant(c) => c,
            _ => unreachable!(),
        };
        if !(reload_k > 0.0) {
            return Err(CoreError::Config(format!("reload rate must be positive, got {reload_k}")));
        }
        Ok(Profile::Rcr(RcrProfile { constant: c, reload_k }))
    }

    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>, horizon: f64) -> Result<Profile> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(CoreError::Config(
                "piecewise profile needs equally many breakpoints and values".into(),
            ));
        }
        if breakpoints[0] < 0.0 {
            return Err(CoreError::Config("piecewise breakpoints must start at t >= 0".into()));
        }
        for w in breakpoints.windows(2) {
            if !(w[1] > w[0]) {
                return Err(CoreError::Config("piecewise breakpoints must be strictly increasing".into()));
            }
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(CoreError::Config("piecewise values must be finite and >= 0".into()));
        }
        if horizon < *breakpoints.last().unwrap() {
            return Err(CoreError::Config("piecewise horizon must reach the last breakpoint".into()));
        }
        Ok(Profile::Piecewise(PiecewiseProfile { breakpoints, values, horizon }))
    }

    fn check_time(t: f64) -> Result<()> {
        if t < 0.0 || !t.is_finite() {
            return Err(CoreError::Domain(format!("time must be finite and >= 0, got {t}")));
        }
        Ok(())
    }

    /// Applied stress at time `t`.
    pub fn load_at(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok(match self {
            Profile::Ramp(p) => p.k * t,
            Profile::Constant(p) => {
                if t <= p.t0() {
                    p.k * t
                } else {
                    p.tau_c
                }
            }
            Profile::Rcr(p) => {
                let c = &p.constant;
                if t <= c.t0() {
                    c.k * t
                } else if t <= c.t1 {
                    c.tau_c
                } else {
                    p.reload_k * (t - c.t1)
                }
            }
            Profile::Piecewise(p) => {
                if t < p.breakpoints[0] {
                    0.0
                } else {
                    let idx = match p
                        .breakpoints
                        .binary_search_by(|b| b.partial_cmp(&t).unwrap())
                    {
                        Ok(i) => i,
                        Err(i) => i - 1,
                    };
                    p.values[idx]
                }
            }
        })
    }

    /// Lebesgue measure of `{ s <= t : tau(s) >= tau_i }`.
    pub fn duration_above(&self, tau_i: f64, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        if tau_i < 0.0 || !tau_i.is_finite() {
            return Err(CoreError::Domain(format!("threshold must be finite and >= 0, got {tau_i}")));
        }
        if tau_i == 0.0 {
            return Ok(t);
        }
        Ok(match self {
            Profile::Ramp(p) => (t - tau_i / p.k).max(0.0),
            Profile::Constant(p) => {
                if tau_i > p.tau_c {
                    0.0
                } else {
                    (t.min(p.t1) - tau_i / p.k).max(0.0)
                }
            }
            Profile::Rcr(p) => {
                let c = &p.constant;
                let reload = (t - (c.t1 + tau_i / p.reload_k)).max(0.0);
                if tau_i > c.tau_c {
                    reload
                } else {
                    (t.min(c.t1) - tau_i / c.k).max(0.0) + reload
                }
            }
            Profile::Piecewise(p) => {
                let mut total = 0.0;
                for (j, &v) in p.values.iter().enumerate() {
                    if v < tau_i {
                        continue;
                    }
                    let start = p.breakpoints[j];
                    let end = if j + 1 < p.breakpoints.len() {
                        p.breakpoints[j + 1]
                    } else {
                        f64::INFINITY
                    };
                    total += (t.min(end) - start).max(0.0);
                }
                total
            }
        })
    }

    /// Largest stress over `[0, t]`.
    pub fn max_load(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok(match self {
            Profile::Ramp(p) => p.k * t,
            Profile::Constant(p) => p.tau_c.min(p.k * t),
            Profile::Rcr(p) => {
                let c = &p.constant;
                let base = c.tau_c.min(c.k * t);
                if t > c.t1 {
                    base.max(p.reload_k * (t - c.t1))
                } else {
                    base
                }
            }
            Profile::Piecewise(p) => {
                let mut m: f64 = 0.0;
                for (j, &v) in p.values.iter().enumerate() {
                    if p.breakpoints[j] <= t {
                        m = m.max(v);
                    }
                }
                m
            }
        })
    }

    /// Distinct plateau stress levels (used to build exact load ladders).
    pub fn plateau_levels(&self) -> Vec<f64> {
        match self {
            Profile::Ramp(_) => Vec::new(),
            Profile::Constant(p) => vec![p.tau_c],
            Profile::Rcr(p) => vec![p.constant.tau_c],
            Profile::Piecewise(p) => {
                let mut v: Vec<f64> = p.values.iter().copied().filter(|&x| x > 0.0).collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v.dedup();
                v
            }
        }
    }

    /// Censoring horizon for simulation: end of the constant phase for C
    /// profiles, the configured horizon for piecewise ones, unbounded for
    /// profiles that ramp without limit.
    pub fn censor_horizon(&self) -> Option<f64> {
        match self {
            Profile::Ramp(_) => None,
            Profile::Constant(p) => Some(p.t1),
            Profile::Rcr(_) => None,
            Profile::Piecewise(p) => Some(p.horizon),
        }
    }
}

/// Flat serialization of a profile for structured text configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileConfig {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_c: Option<f64>,
    #[serde(rename = "T1_hours", skip_serializing_if = "Option::is_none")]
    pub t1_hours: Option<f64>,
    #[serde(rename = "T1", default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<DurationSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reload_k: Option<f64>,
    /// Pairs `[t_hours, tau_mpa]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon_hours: Option<f64>,
}

impl Profile {
    pub fn to_config(&self) -> ProfileConfig {
        let empty = ProfileConfig {
            kind: String::new(),
            k: None,
            tau_c: None,
            t1_hours: None,
            t1: None,
            reload_k: None,
            breakpoints: None,
            horizon_hours: None,
        };
        match self {
            Profile::Ramp(p) => ProfileConfig { kind: "ramp".into(), k: Some(p.k), ..empty },
            Profile::Constant(p) => ProfileConfig {
                kind: "constant".into(),
                k: Some(p.k),
                tau_c: Some(p.tau_c),
                t1_hours: Some(p.t1),
                ..empty
            },
            Profile::Rcr(p) => ProfileConfig {
                kind: "rcr".into(),
                k: Some(p.constant.k),
                tau_c: Some(p.constant.tau_c),
                t1_hours: Some(p.constant.t1),
                reload_k: Some(p.reload_k),
                ..empty
            },
            Profile::Piecewise(p) => ProfileConfig {
                kind: "piecewise".into(),
                breakpoints: Some(
                    p.breakpoints.iter().zip(&p.values).map(|(&t, &v)| [t, v]).collect(),
                ),
                horizon_hours: Some(p.horizon),
                ..empty
            },
        }
    }

    pub fn from_config(cfg: &ProfileConfig) -> Result<Profile> {
        let t1_of = |cfg: &ProfileConfig| -> Result<f64> {
            cfg.t1_hours
                .or_else(|| cfg.t1.map(|d| d.hours()))
                .ok_or_else(|| CoreError::Config("profile needs T1_hours or T1 {value, unit}".into()))
        };
        match cfg.kind.as_str() {
            "ramp" => Profile::ramp(cfg.k.ok_or_else(|| CoreError::Config("ramp needs k".into()))?),
            "constant" => Profile::constant(
                cfg.k.ok_or_else(|| CoreError::Config("constant needs k".into()))?,
                cfg.tau_c.ok_or_else(|| CoreError::Config("constant needs tau_c".into()))?,
                t1_of(cfg)?,
            ),
            "rcr" => {
                let k = cfg.k.ok_or_else(|| CoreError::Config("rcr needs k".into()))?;
                Profile::rcr(
                    k,
                    cfg.tau_c.ok_or_else(|| CoreError::Config("rcr needs tau_c".into()))?,
                    t1_of(cfg)?,
                    cfg.reload_k.unwrap_or(k),
                )
            }
            "piecewise" => {
                let bp = cfg
                    .breakpoints
                    .as_ref()
                    .ok_or_else(|| CoreError::Config("piecewise needs breakpoints".into()))?;
                let horizon = cfg
                    .horizon_hours
                    .ok_or_else(|| CoreError::Config("piecewise needs horizon_hours".into()))?;
                Profile::piecewise(
                    bp.iter().map(|p| p[0]).collect(),
                    bp.iter().map(|p| p[1]).collect(),
                    horizon,
                )
            }
            other => Err(CoreError::Config(format!("unknown profile type {other:?}"))),
        }
    }
}
