//! Dataset schema: failure records, the experiment manifest, CSV ingestion
//! with validation, and CSV output.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::profile::{Profile, ProfileConfig, TimeUnit};
use crate::K_S;

/// How a specimen's test ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Broke while the load was first ramping up.
    FailedRamp,
    /// Broke during the constant-load hold.
    FailedConstant,
    /// Survived the hold and broke in the final ramp.
    FailedRcr,
    /// Survived the whole test.
    Censored,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::FailedRamp => "failed_ramp",
            Outcome::FailedConstant => "failed_constant",
            Outcome::FailedRcr => "failed_rcr",
            Outcome::Censored => "censored",
        }
    }

    pub fn parse(s: &str) -> Result<Outcome> {
        match s.trim() {
            "failed_ramp" => Ok(Outcome::FailedRamp),
            "failed_constant" => Ok(Outcome::FailedConstant),
            "failed_rcr" => Ok(Outcome::FailedRcr),
            "censored" => Ok(Outcome::Censored),
            other => Err(CoreError::Data(format!("unknown outcome {other:?}"))),
        }
    }
}

/// One specimen's result.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureRecord {
    pub specimen: String,
    pub group: u32,
    pub outcome: Outcome,
    /// Failure time in hours; `None` for censored records.
    pub time_hours: Option<f64>,
}

/// One experimental group: a load profile applied to `size` specimens.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    pub id: u32,
    pub size: usize,
    pub profile: Profile,
}

/// The experimental design.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub name: String,
    pub note: String,
    pub groups: Vec<GroupSpec>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for g in &self.groups {
            if !seen.insert(g.id) {
                return Err(CoreError::Config(format!("duplicate group id {}", g.id)));
            }
            if g.size == 0 {
                return Err(CoreError::Config(format!("group {} has size 0", g.id)));
            }
        }
        if self.groups.is_empty() {
            return Err(CoreError::Config("manifest has no groups".into()));
        }
        Ok(())
    }

    pub fn group(&self, id: u32) -> Option<&GroupSpec> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn total_size(&self) -> usize {
        self.groups.iter().map(|g| g.size).sum()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    dataset: ManifestHeader,
    #[serde(rename = "groups")]
    groups: Vec<GroupFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestHeader {
    name: String,
    #[serde(default)]
    note: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct GroupFile {
    id: u32,
    size: usize,
    profile: ProfileConfig,
}

impl DatasetManifest {
    pub fn to_toml(&self) -> Result<String> {
        let file = ManifestFile {
            dataset: ManifestHeader { name: self.name.clone(), note: self.note.clone() },
            groups: self
                .groups
                .iter()
                .map(|g| GroupFile { id: g.id, size: g.size, profile: g.profile.to_config() })
                .collect(),
        };
        toml::to_string(&file).map_err(|e| CoreError::Config(format!("manifest serialize: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<DatasetManifest> {
        let file: ManifestFile =
            toml::from_str(text).map_err(|e| CoreError::Config(format!("manifest parse: {e}")))?;
        let mut groups = Vec::with_capacity(file.groups.len());
        for g in file.groups {
            groups.push(GroupSpec { id: g.id, size: g.size, profile: Profile::from_config(&g.profile)? });
        }
        let m = DatasetManifest { name: file.dataset.name, note: file.dataset.note, groups };
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<DatasetManifest> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }
}

/// The ten-group design the bundled datasets follow: five ramp rates and
/// five constant-load/RCR settings.
pub fn default_manifest() -> DatasetManifest {
    let ramp_rates = [1.667e-3, 0.0333, 1.0, 30.0, 1500.0];
    let ramp_sizes = [140usize, 139, 139, 139, 140];
    let mut groups = Vec::new();
    for (i, (&r, &n)) in ramp_rates.iter().zip(&ramp_sizes).enumerate() {
        groups.push(GroupSpec {
            id: i as u32 + 1,
            size: n,
            profile: Profile::ramp(r * K_S).expect("valid rate"),
        });
    }
    let month = TimeUnit::Months.to_hours();
    let year = TimeUnit::Years.to_hours();
    let constant = [
        (20.68, 3.0 * month, 300usize),
        (20.68, 4.0 * year, 198),
        (31.02, 3.0 * month, 98),
        (31.02, 1.0 * year, 300),
        (31.02, 4.0 * year, 101),
    ];
    for (i, &(tau_c, t1, n)) in constant.iter().enumerate() {
        groups.push(GroupSpec {
            id: i as u32 + 6,
            size: n,
            profile: Profile::rcr(K_S, tau_c, t1, K_S).expect("valid profile"),
        });
    }
    DatasetManifest {
        name: "hemlock-dol-design".into(),
        note: "ten-group ramp / constant / RCR design; synthetic stand-in data".into(),
        groups,
    }
}

/// Ingestion result: validated records plus per-group counts.
#[derive(Debug)]
pub struct IngestReport {
    pub records: Vec<FailureRecord>,
    pub group_counts: BTreeMap<u32, usize>,
}

fn validate_time(rec: &FailureRecord, profile: &Profile) -> std::result::Result<(), String> {
    let t = rec.time_hours;
    let need_time = |t: Option<f64>| -> std::result::Result<f64, String> {
        match t {
            Some(v) if v.is_finite() && v > 0.0 => Ok(v),
            Some(v) => Err(format!("failure time must be finite and positive, got {v}")),
            None => Err("failure outcome requires a time".into()),
        }
    };
    match (rec.outcome, profile) {
        (Outcome::Censored, _) => Ok(()),
        (Outcome::FailedRamp, Profile::Ramp(_)) => need_time(t).map(|_| ()),
        (Outcome::FailedRamp, Profile::Constant(c)) => {
            let v = need_time(t)?;
            if v > c.t0() {
                return Err(format!("failed_ramp time {v} exceeds T0 = {}", c.t0()));
            }
            Ok(())
        }
        (Outcome::FailedRamp, Profile::Rcr(r)) => {
            let v = need_time(t)?;
            if v > r.constant.t0() {
                return Err(format!("failed_ramp time {v} exceeds T0 = {}", r.constant.t0()));
            }
            Ok(())
        }
        (Outcome::FailedConstant, Profile::Constant(c)) => {
            let v = need_time(t)?;
            if v <= c.t0() || v > c.t1 {
                return Err(format!(
                    "failed_constant time {v} outside (T0, T1] = ({}, {}]",
                    c.t0(),
                    c.t1
                ));
            }
            Ok(())
        }
        (Outcome::FailedConstant, Profile::Rcr(r)) => {
            let v = need_time(t)?;
            if v <= r.constant.t0() || v > r.constant.t1 {
                return Err(format!(
                    "failed_constant time {v} outside (T0, T1] = ({}, {}]",
                    r.constant.t0(),
                    r.constant.t1
                ));
            }
            Ok(())
        }
        (Outcome::FailedRcr, Profile::Rcr(r)) => {
            let v = need_time(t)?;
            if v <= r.constant.t1 {
                return Err(format!("failed_rcr time {v} must exceed T1 = {}", r.constant.t1));
            }
            Ok(())
        }
        (oc, _) => Err(format!("outcome {} inconsistent with the group profile", oc.as_str())),
    }
}

/// Reads and validates a dataset CSV against the manifest.
///
/// The schema is `specimen_id,group,outcome,time,time_unit`; times convert
/// to hours on ingest. All validation failures are reported together, each
/// with its row number.
pub fn ingest_csv(path: &Path, manifest: &DatasetManifest) -> Result<IngestReport> {
    manifest.validate()?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    {
        let headers = reader.headers().map_err(|e| CoreError::Data(format!("csv header: {e}")))?;
        let expect = ["specimen_id", "group", "outcome", "time", "time_unit"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expect {
            return Err(CoreError::Data(format!(
                "csv header mismatch: expected {expect:?}, got {got:?}"
            )));
        }
    }
    let mut errors: Vec<String> = Vec::new();
    let mut records = Vec::new();
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();

    for (i, row) in reader.records().enumerate() {
        let rownum = i + 2; // 1-based with header
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                errors.push(format!("row {rownum}: unreadable ({e})"));
                continue;
            }
        };
        if row.len() != 5 {
            errors.push(format!("row {rownum}: expected 5 fields, got {}", row.len()));
            continue;
        }
        let specimen = row[0].to_string();
        if specimen.is_empty() {
            errors.push(format!("row {rownum}: empty specimen_id"));
            continue;
        }
        if !seen_ids.insert(specimen.clone()) {
            errors.push(format!("row {rownum}: duplicate specimen id {specimen:?}"));
            continue;
        }
        let group: u32 = match row[1].parse() {
            Ok(g) => g,
            Err(_) => {
                errors.push(format!("row {rownum}: bad group {:?}", &row[1]));
                continue;
            }
        };
        let spec = match manifest.group(group) {
            Some(s) => s,
            None => {
                errors.push(format!("row {rownum}: group {group} not in manifest"));
                continue;
            }
        };
        let outcome = match Outcome::parse(&row[2]) {
            Ok(o) => o,
            Err(_) => {
                errors.push(format!("row {rownum}: unknown outcome {:?}", &row[2]));
                continue;
            }
        };
        let time_hours = if row[3].is_empty() {
            None
        } else {
            let value: f64 = match row[3].parse() {
                Ok(v) => v,
                Err(_) => {
                    errors.push(format!("row {rownum}: bad time {:?}", &row[3]));
                    continue;
                }
            };
            let unit = match TimeUnit::parse(&row[4]) {
                Ok(u) => u,
                Err(_) => {
                    errors.push(format!("row {rownum}: unknown time unit {:?}", &row[4]));
                    continue;
                }
            };
            Some(value * unit.to_hours())
        };
        let rec = FailureRecord { specimen, group, outcome, time_hours };
        if let Err(msg) = validate_time(&rec, &spec.profile) {
            errors.push(format!("row {rownum}: {msg}"));
            continue;
        }
        *counts.entry(group).or_insert(0) += 1;
        records.push(rec);
    }

    if !errors.is_empty() {
        return Err(CoreError::Data(format!(
            "{} validation error(s):\n  {}",
            errors.len(),
            errors.join("\n  ")
        )));
    }
    Ok(IngestReport { records, group_counts: counts })
}

/// Writes records as CSV with times in hours (full round-trip precision).
pub fn write_csv(records: &[FailureRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["specimen_id", "group", "outcome", "time", "time_unit"])
        .map_err(|e| CoreError::Data(format!("csv write: {e}")))?;
    for r in records {
        let time = r.time_hours.map(|t| format!("{t}")).unwrap_or_default();
        let unit = if r.time_hours.is_some() { "hours" } else { "" };
        w.write_record([
            r.specimen.as_str(),
            &r.group.to_string(),
            r.outcome.as_str(),
            &time,
            unit,
        ])
        .map_err(|e| CoreError::Data(format!("csv write: {e}")))?;
    }
    w.flush()?;
    Ok(())
}
