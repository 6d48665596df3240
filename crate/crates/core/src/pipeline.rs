//! Batch front end: log ingestion, per-group fitting, structured reports,
//! and plot-ready CSV export.
//!
//! A run groups observations by `(arch, paradigm, dataset, split)`, reduces
//! each group to its best checkpoint per scale, fits the joint law (or a
//! marginal when one axis is constant), pairs ID/OOD groups for loss-to-loss
//! fits, and derives allocation analytics when a compute model is supplied.
//! One bad group never aborts the others; the summary index enumerates every
//! group with its status. Identical manifests and inputs produce
//! byte-identical report trees.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::allocate::{self, Allocation, ContourGrid, CrossoverScan};
use crate::error::{Error, Result};
use crate::fit::{self, FitConfig, FitReport};
use crate::model::{
    Axis, ComputeModel, FrontierLaw, JointLaw, LossToLossLaw, MarginalLaw, Observation, Split,
};
use crate::transfer::{self, LossPair};

/// Exact header of the observation log schema, comma-separated, UTF-8,
/// '.' decimal. `macs_fwd` may be left empty.
pub const CSV_HEADER: [&str; 10] = [
    "arch",
    "paradigm",
    "dataset",
    "split",
    "n_params",
    "n_samples",
    "step",
    "loss",
    "batch_size",
    "macs_fwd",
];

/// Kappa floor applied to loss-to-loss fits by the `kappa_floor` profile.
pub const PROFILE_KAPPA_FLOOR: f64 = 0.05;

/// A row that failed validation, with its location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub column: Option<String>,
    pub message: String,
}

/// Parsed observations plus the rows that had to be rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestResult {
    pub observations: Vec<Observation>,
    pub row_errors: Vec<RowError>,
}

fn schema_error(path: &Path, message: String) -> Error {
    Error::Schema {
        path: path.display().to_string(),
        message,
    }
}

/// Reads an observation log, validating every row.
///
/// A wrong header is a hard schema error; invalid rows (non-positive loss,
/// zero counts, duplicate keys, unparsable fields) are collected as
/// [`RowError`]s with line numbers while the remaining rows are returned.
pub fn ingest_csv(path: &Path) -> Result<IngestResult> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{}: {e}", path.display()),
            )),
            _ => Error::Csv(e),
        })?;

    let headers = reader.headers()?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != CSV_HEADER {
        return Err(schema_error(
            path,
            format!(
                "expected header '{}', got '{}'",
                CSV_HEADER.join(","),
                got.join(",")
            ),
        ));
    }

    let mut observations = Vec::new();
    let mut row_errors = Vec::new();
    let mut seen_keys = std::collections::BTreeSet::new();

    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                row_errors.push(RowError {
                    line,
                    column: None,
                    message: format!("unparsable record: {e}"),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&record) {
            Ok(obs) => {
                let key = (
                    obs.arch.clone(),
                    obs.paradigm.clone(),
                    obs.dataset.clone(),
                    obs.split,
                    obs.n_params,
                    obs.n_samples,
                    obs.step,
                );
                if !seen_keys.insert(key) {
                    row_errors.push(RowError {
                        line,
                        column: None,
                        message: format!(
                            "duplicate key ({}, {}, {}, {}, {}, {}, {})",
                            obs.arch,
                            obs.paradigm,
                            obs.dataset,
                            obs.split,
                            obs.n_params,
                            obs.n_samples,
                            obs.step
                        ),
                    });
                } else {
                    observations.push(obs);
                }
            }
            Err((column, message)) => {
                row_errors.push(RowError {
                    line,
                    column: Some(column),
                    message,
                });
            }
        }
    }
    Ok(IngestResult {
        observations,
        row_errors,
    })
}

type FieldError = (String, String);
type FieldResult<T> = std::result::Result<T, FieldError>;

fn field(record: &csv::StringRecord, idx: usize) -> FieldResult<&str> {
    record
        .get(idx)
        .ok_or_else(|| (CSV_HEADER[idx].to_string(), "missing field".to_string()))
}

fn parse_count(record: &csv::StringRecord, idx: usize, min: u64) -> FieldResult<u64> {
    let raw = field(record, idx)?;
    let value: u64 = raw.trim().parse().map_err(|_| {
        (
            CSV_HEADER[idx].to_string(),
            format!("'{raw}' is not a non-negative integer"),
        )
    })?;
    if value < min {
        return Err((
            CSV_HEADER[idx].to_string(),
            format!("must be >= {min}, got {value}"),
        ));
    }
    Ok(value)
}

fn parse_row(record: &csv::StringRecord) -> FieldResult<Observation> {
    let arch = field(record, 0)?.trim().to_string();
    let paradigm = field(record, 1)?.trim().to_string();
    let dataset = field(record, 2)?.trim().to_string();
    let split_raw = field(record, 3)?.trim();
    let split: Split = split_raw.parse().map_err(|_| {
        (
            "split".to_string(),
            format!("'{split_raw}' is not 'ID' or 'OOD'"),
        )
    })?;
    let n_params = parse_count(record, 4, 1)?;
    let n_samples = parse_count(record, 5, 1)?;
    let step = parse_count(record, 6, 0)?;
    let loss_raw = field(record, 7)?;
    let loss: f64 = loss_raw
        .trim()
        .parse()
        .map_err(|_| ("loss".to_string(), format!("'{loss_raw}' is not a number")))?;
    if !(loss.is_finite() && loss > 0.0) {
        return Err(("loss".to_string(), format!("must be positive, got {loss}")));
    }
    let batch_size = parse_count(record, 8, 1)?;
    let macs_raw = field(record, 9)?.trim();
    let macs_fwd = if macs_raw.is_empty() {
        None
    } else {
        let m: f64 = macs_raw.parse().map_err(|_| {
            (
                "macs_fwd".to_string(),
                format!("'{macs_raw}' is not a number"),
            )
        })?;
        if !(m.is_finite() && m > 0.0) {
            return Err(("macs_fwd".to_string(), format!("must be positive, got {m}")));
        }
        Some(m)
    };
    Ok(Observation {
        arch,
        paradigm,
        dataset,
        split,
        n_params,
        n_samples,
        step,
        loss,
        batch_size,
        macs_fwd,
    })
}

/// Optional named behavior bundles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Default,
    /// Pins shallow loss-to-loss exponents at [`PROFILE_KAPPA_FLOOR`].
    KappaFloor,
}

/// Loss-to-loss controls. Floors default to the paired groups' fitted
/// floors; explicit values represent floors estimated upstream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossToLossOptions {
    pub e_id: Option<f64>,
    pub e_ood: Option<f64>,
    pub kappa_floor: Option<f64>,
}

/// Everything a batch run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub input_paths: Vec<PathBuf>,
    #[serde(default)]
    pub fit_config: FitConfig,
    #[serde(default)]
    pub compute_model: Option<ComputeModel>,
    #[serde(default)]
    pub profile: Profile,
    #[serde(default)]
    pub loss_to_loss: LossToLossOptions,
    pub output_dir: PathBuf,
    #[serde(default = "default_contour_resolution")]
    pub contour_resolution: (usize, usize),
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
}

fn default_contour_resolution() -> (usize, usize) {
    (24, 24)
}

fn default_curve_points() -> usize {
    25
}

impl RunManifest {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_paths.is_empty() {
            return Err(Error::Manifest(
                "at least one input path is required".into(),
            ));
        }
        self.fit_config.validate()?;
        if let Some(cm) = &self.compute_model {
            cm.validate()?;
        }
        if self.contour_resolution.0 < 2 || self.contour_resolution.1 < 2 {
            return Err(Error::Manifest(
                "contour_resolution must be >= 2 per axis".into(),
            ));
        }
        if self.curve_points < 2 {
            return Err(Error::Manifest("curve_points must be >= 2".into()));
        }
        Ok(())
    }

    fn kappa_floor(&self) -> Option<f64> {
        self.loss_to_loss.kappa_floor.or(match self.profile {
            Profile::Default => None,
            Profile::KappaFloor => Some(PROFILE_KAPPA_FLOOR),
        })
    }
}

/// Identity of one fitted group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub arch: String,
    pub paradigm: String,
    pub dataset: String,
    pub split: Split,
}

impl GroupKey {
    fn of(obs: &Observation) -> Self {
        GroupKey {
            arch: obs.arch.clone(),
            paradigm: obs.paradigm.clone(),
            dataset: obs.dataset.clone(),
            split: obs.split,
        }
    }

    /// Filesystem-safe file stem for this group's report.
    pub fn slug(&self) -> String {
        let sanitize = |s: &str| -> String {
            s.chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() {
                        c.to_ascii_lowercase()
                    } else {
                        '-'
                    }
                })
                .collect()
        };
        format!(
            "{}_{}_{}_{}",
            sanitize(&self.arch),
            sanitize(&self.paradigm),
            sanitize(&self.dataset),
            match self.split {
                Split::Id => "id",
                Split::Ood => "ood",
            }
        )
    }
}

/// One reduced observation: the best checkpoint of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedPoint {
    pub n_params: u64,
    pub n_samples: u64,
    pub loss: f64,
}

/// The law family fitted to a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FittedLaw {
    Joint(FitReport<JointLaw>),
    Marginal(FitReport<MarginalLaw>),
}

impl FittedLaw {
    /// Fitted irreducible loss floor.
    pub fn floor(&self) -> f64 {
        match self {
            FittedLaw::Joint(report) => report.params.e,
            FittedLaw::Marginal(report) => report.params.e,
        }
    }
}

/// Allocation analytics derived from a joint fit and a compute model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub exponent_n: f64,
    pub exponent_d: f64,
    pub gamma: f64,
    /// Largest compute budget observed in the group's logs.
    pub reference_budget: f64,
    pub reference: Allocation,
    /// `(compute, optimal loss)` samples of the optimal-loss curve.
    pub curve: Vec<(f64, f64)>,
    pub contour: ContourGrid,
}

/// Structured per-group report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: GroupKey,
    pub n_observations: usize,
    pub n_reduced: usize,
    pub reduced_points: Vec<ReducedPoint>,
    pub fit: FittedLaw,
    /// Present on OOD groups that were paired with an ID group.
    pub loss_to_loss: Option<FitReport<LossToLossLaw>>,
    /// `(l_id, l_ood)` pairs fed to the loss-to-loss fit.
    pub loss_pairs: Option<Vec<(f64, f64)>>,
    /// Why loss-to-loss analysis was not produced, when applicable.
    pub loss_to_loss_skipped: Option<String>,
    pub allocation: Option<AllocationReport>,
    pub allocation_skipped: Option<String>,
}

/// Standalone frontier-fit report (from the `frontier` command).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierReport {
    pub fit: FitReport<FrontierLaw>,
    pub points: Vec<(f64, f64)>,
}

/// Standalone crossover report (from the `crossover` command).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverReport {
    pub curve_a: MarginalLaw,
    pub curve_b: MarginalLaw,
    pub x_range: (f64, f64),
    pub scan: CrossoverScan,
}

/// Any report file this crate writes, tagged for dispatch on re-load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "report_type", rename_all = "snake_case")]
pub enum ReportFile {
    Group(Box<GroupReport>),
    Frontier(FrontierReport),
    Crossover(CrossoverReport),
}

impl ReportFile {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: GroupKey,
    pub status: GroupStatus,
    pub reason: Option<String>,
    /// Report file name relative to the output directory.
    pub report_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileIngestSummary {
    pub path: String,
    pub n_rows: usize,
    pub row_errors: Vec<RowError>,
}

/// Index over every group of a run, written last as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub profile: Profile,
    pub inputs: Vec<FileIngestSummary>,
    pub groups: Vec<GroupSummary>,
    pub n_ok: usize,
    pub n_skipped: usize,
    pub n_failed: usize,
}

impl PipelineSummary {
    pub fn any_failed(&self) -> bool {
        self.n_failed > 0
    }
}

/// Serializes a value as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Renders observations in the ingest schema. Losses use shortest
/// round-trip formatting, so written values parse back bit-exactly.
pub fn observations_to_csv(observations: &[Observation]) -> String {
    let mut text = String::new();
    text.push_str(&CSV_HEADER.join(","));
    text.push('\n');
    for o in observations {
        let macs = o.macs_fwd.map(|m| m.to_string()).unwrap_or_default();
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{}",
            o.arch,
            o.paradigm,
            o.dataset,
            o.split,
            o.n_params,
            o.n_samples,
            o.step,
            o.loss,
            o.batch_size,
            macs
        );
    }
    text
}

/// Writes observations as an ingestible CSV log.
pub fn write_observations_csv(path: &Path, observations: &[Observation]) -> Result<()> {
    fs::write(path, observations_to_csv(observations))?;
    Ok(())
}

enum GroupOutcome {
    Report(Box<GroupReport>),
    Skipped(String),
    Failed(String),
}

fn classify_fit_error(err: Error) -> GroupOutcome {
    match err {
        Error::InsufficientData(msg)
        | Error::DegenerateFit(msg)
        | Error::DegenerateStatistic(msg) => GroupOutcome::Skipped(msg),
        other => GroupOutcome::Failed(other.to_string()),
    }
}

fn fit_group(key: &GroupKey, observations: &[Observation], manifest: &RunManifest) -> GroupOutcome {
    let reduced = fit::reduce_best_per_scale(observations);
    let points: Vec<ReducedPoint> = reduced
        .iter()
        .map(|o| ReducedPoint {
            n_params: o.n_params,
            n_samples: o.n_samples,
            loss: o.loss,
        })
        .collect();

    let mut n_values: Vec<u64> = points.iter().map(|p| p.n_params).collect();
    n_values.sort_unstable();
    n_values.dedup();
    let mut d_values: Vec<u64> = points.iter().map(|p| p.n_samples).collect();
    d_values.sort_unstable();
    d_values.dedup();

    let cfg = &manifest.fit_config;
    let fitted = if points.len() >= 5 && n_values.len() >= 3 && d_values.len() >= 3 {
        let triples: Vec<(f64, f64, f64)> = points
            .iter()
            .map(|p| (p.n_params as f64, p.n_samples as f64, p.loss))
            .collect();
        match fit::fit_joint(&triples, cfg) {
            Ok(report) => FittedLaw::Joint(report),
            Err(e) => return classify_fit_error(e),
        }
    } else if d_values.len() == 1 && n_values.len() >= 4 {
        let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.n_params as f64, p.loss)).collect();
        match fit::fit_marginal(&pairs, Axis::Params, cfg) {
            Ok(report) => FittedLaw::Marginal(report),
            Err(e) => return classify_fit_error(e),
        }
    } else if n_values.len() == 1 && d_values.len() >= 4 {
        let pairs: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (p.n_samples as f64, p.loss))
            .collect();
        match fit::fit_marginal(&pairs, Axis::Data, cfg) {
            Ok(report) => FittedLaw::Marginal(report),
            Err(e) => return classify_fit_error(e),
        }
    } else {
        return GroupOutcome::Skipped(format!(
            "insufficient points or variation: {} reduced points, {} model sizes, {} data sizes",
            points.len(),
            n_values.len(),
            d_values.len()
        ));
    };

    let (allocation, allocation_skipped) = match (&manifest.compute_model, &fitted) {
        (Some(cm), FittedLaw::Joint(report)) => {
            match allocation_analytics(cm, &report.params, &points, manifest) {
                Ok(a) => (Some(a), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
        (Some(_), FittedLaw::Marginal(_)) => (
            None,
            Some("allocation analytics require a joint fit".to_string()),
        ),
        (None, _) => (None, None),
    };

    GroupOutcome::Report(Box::new(GroupReport {
        group: key.clone(),
        n_observations: observations.len(),
        n_reduced: points.len(),
        reduced_points: points,
        fit: fitted,
        loss_to_loss: None,
        loss_pairs: None,
        loss_to_loss_skipped: None,
        allocation,
        allocation_skipped,
    }))
}

fn allocation_analytics(
    cm: &ComputeModel,
    law: &JointLaw,
    points: &[ReducedPoint],
    manifest: &RunManifest,
) -> Result<AllocationReport> {
    if law.alpha == 0.0 || law.beta == 0.0 {
        return Err(Error::Domain(
            "allocation analytics require strictly positive fitted exponents".into(),
        ));
    }
    let kappa = cm.kappa_const();
    let budgets: Vec<f64> = points
        .iter()
        .map(|p| cm.compute_for(p.n_params as f64, p.n_samples as f64))
        .collect::<Result<_>>()?;
    let c_max = budgets.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let c_min = budgets.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_range = (c_min / 10.0, c_max * 10.0);

    let (exponent_n, exponent_d, gamma) = allocate::allocation_exponents(law.alpha, law.beta)?;
    let reference = allocate::optimal_allocation(law, c_max, kappa)?;

    let curve_budgets: Vec<f64> = {
        let ln_lo = c_range.0.ln();
        let ln_hi = c_range.1.ln();
        (0..manifest.curve_points)
            .map(|i| {
                (ln_lo + (ln_hi - ln_lo) * i as f64 / (manifest.curve_points - 1) as f64).exp()
            })
            .collect()
    };
    let curve = allocate::optimal_loss_curve(law, kappa, &curve_budgets)?;

    let n_min = points.iter().map(|p| p.n_params).min().unwrap_or(1) as f64;
    let n_max = points.iter().map(|p| p.n_params).max().unwrap_or(1) as f64;
    let contour = allocate::iso_loss_grid(
        law,
        cm,
        c_range,
        (n_min / 10.0, n_max * 10.0),
        manifest.contour_resolution,
    )?;

    Ok(AllocationReport {
        exponent_n,
        exponent_d,
        gamma,
        reference_budget: c_max,
        reference,
        curve,
        contour,
    })
}

/// Pairs each OOD group with the unique ID group of its `(arch, paradigm)`
/// combination and fits the loss-to-loss law on checkpoints matched by
/// `(n_params, n_samples)`.
fn attach_loss_to_loss(reports: &mut BTreeMap<GroupKey, GroupOutcome>, manifest: &RunManifest) {
    struct IdPartner {
        floor: f64,
        points: Vec<ReducedPoint>,
    }
    // Collect fitted ID groups per (arch, paradigm) combination.
    let mut id_partners: BTreeMap<(String, String), Vec<IdPartner>> = BTreeMap::new();
    for (key, outcome) in reports.iter() {
        if key.split != Split::Id {
            continue;
        }
        if let GroupOutcome::Report(report) = outcome {
            id_partners
                .entry((key.arch.clone(), key.paradigm.clone()))
                .or_default()
                .push(IdPartner {
                    floor: report.fit.floor(),
                    points: report.reduced_points.clone(),
                });
        }
    }

    for (key, outcome) in reports.iter_mut() {
        if key.split != Split::Ood {
            continue;
        }
        let GroupOutcome::Report(report) = outcome else {
            continue;
        };
        let combo = (key.arch.clone(), key.paradigm.clone());
        let partners = match id_partners.get(&combo) {
            None => {
                report.loss_to_loss_skipped =
                    Some("no fitted ID group for this arch/paradigm".into());
                continue;
            }
            Some(p) if p.len() > 1 => {
                report.loss_to_loss_skipped = Some(format!(
                    "ambiguous pairing: {} fitted ID groups for this arch/paradigm",
                    p.len()
                ));
                continue;
            }
            Some(p) => p,
        };
        let partner = &partners[0];
        let id_losses: BTreeMap<(u64, u64), f64> = partner
            .points
            .iter()
            .map(|p| ((p.n_params, p.n_samples), p.loss))
            .collect();

        let mut pairs = Vec::new();
        for p in &report.reduced_points {
            if let Some(&l_id) = id_losses.get(&(p.n_params, p.n_samples)) {
                pairs.push(LossPair {
                    l_id,
                    l_ood: p.loss,
                    n_params: p.n_params,
                    n_samples: p.n_samples,
                });
            }
        }
        let e_id = manifest.loss_to_loss.e_id.unwrap_or(partner.floor);
        let e_ood = manifest.loss_to_loss.e_ood.unwrap_or(report.fit.floor());
        match transfer::fit_loss_to_loss(&pairs, e_id, e_ood, manifest.kappa_floor()) {
            Ok(l2l) => {
                report.loss_pairs = Some(pairs.iter().map(|p| (p.l_id, p.l_ood)).collect());
                report.loss_to_loss = Some(l2l);
            }
            Err(e) => {
                report.loss_to_loss_skipped = Some(e.to_string());
            }
        }
    }
}

/// Runs the full batch pipeline and writes one report per group plus
/// `summary.json` into the manifest's output directory.
pub fn run_pipeline(manifest: &RunManifest) -> Result<PipelineSummary> {
    manifest.validate()?;
    fs::create_dir_all(&manifest.output_dir)?;

    let mut inputs = Vec::new();
    let mut all_observations = Vec::new();
    for path in &manifest.input_paths {
        let result = ingest_csv(path)?;
        inputs.push(FileIngestSummary {
            path: path.display().to_string(),
            n_rows: result.observations.len(),
            row_errors: result.row_errors,
        });
        all_observations.extend(result.observations);
    }

    let mut grouped: BTreeMap<GroupKey, Vec<Observation>> = BTreeMap::new();
    for obs in all_observations {
        grouped.entry(GroupKey::of(&obs)).or_default().push(obs);
    }

    let mut outcomes: BTreeMap<GroupKey, GroupOutcome> = BTreeMap::new();
    for (key, observations) in &grouped {
        let outcome = fit_group(key, observations, manifest);
        outcomes.insert(key.clone(), outcome);
    }
    attach_loss_to_loss(&mut outcomes, manifest);

    let mut groups = Vec::new();
    let (mut n_ok, mut n_skipped, mut n_failed) = (0, 0, 0);
    // Sanitized group slugs can collide (tags differing only in
    // punctuation); disambiguate deterministically.
    let mut used_names = std::collections::BTreeSet::new();
    for (key, outcome) in &outcomes {
        match outcome {
            GroupOutcome::Report(report) => {
                let mut file_name = format!("{}.json", key.slug());
                let mut suffix = 2;
                while !used_names.insert(file_name.clone()) {
                    file_name = format!("{}-{suffix}.json", key.slug());
                    suffix += 1;
                }
                write_json(
                    &manifest.output_dir.join(&file_name),
                    &ReportFile::Group(report.clone()),
                )?;
                n_ok += 1;
                groups.push(GroupSummary {
                    group: key.clone(),
                    status: GroupStatus::Ok,
                    reason: None,
                    report_path: Some(file_name),
                });
            }
            GroupOutcome::Skipped(reason) => {
                n_skipped += 1;
                groups.push(GroupSummary {
                    group: key.clone(),
                    status: GroupStatus::Skipped,
                    reason: Some(reason.clone()),
                    report_path: None,
                });
            }
            GroupOutcome::Failed(reason) => {
                n_failed += 1;
                groups.push(GroupSummary {
                    group: key.clone(),
                    status: GroupStatus::Failed,
                    reason: Some(reason.clone()),
                    report_path: None,
                });
            }
        }
    }

    let summary = PipelineSummary {
        profile: manifest.profile,
        inputs,
        groups,
        n_ok,
        n_skipped,
        n_failed,
    };
    write_json(&manifest.output_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Plot-data export
// ---------------------------------------------------------------------------

/// Which plot-ready view of a report to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    ScalingCurve,
    LossToLoss,
    Contour,
    Frontier,
    Crossover,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaling_curve" => Ok(PlotKind::ScalingCurve),
            "loss_to_loss" => Ok(PlotKind::LossToLoss),
            "contour" => Ok(PlotKind::Contour),
            "frontier" => Ok(PlotKind::Frontier),
            "crossover" => Ok(PlotKind::Crossover),
            other => Err(Error::Domain(format!("unknown plot kind '{other}'"))),
        }
    }
}

/// Fixed-width float formatting: 10 significant digits, scientific notation,
/// `nan` for infeasible sentinels. Keeps exports byte-identical across runs.
fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{:.9e}", x)
    }
}

fn log_samples(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let ln_lo = lo.ln();
    let ln_hi = hi.ln();
    (0..count)
        .map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Writes one long-format CSV (one row per plotted point) for the requested
/// analytic. Errors name the analytic when the report does not contain it.
pub fn export_plotdata(
    report: &ReportFile,
    kind: PlotKind,
    resolution: usize,
    out: &Path,
) -> Result<()> {
    if resolution < 2 {
        return Err(Error::Domain("resolution must be >= 2".into()));
    }
    let text = match (report, kind) {
        (ReportFile::Group(group), PlotKind::ScalingCurve) => scaling_curve_csv(group, resolution)?,
        (ReportFile::Group(group), PlotKind::LossToLoss) => loss_to_loss_csv(group, resolution)?,
        (ReportFile::Group(group), PlotKind::Contour) => contour_csv(group)?,
        (ReportFile::Frontier(frontier), PlotKind::Frontier) => frontier_csv(frontier, resolution),
        (ReportFile::Crossover(crossover), PlotKind::Crossover) => {
            crossover_csv(crossover, resolution)
        }
        (_, kind) => {
            return Err(Error::MissingAnalytic(format!("{kind:?}").to_lowercase()));
        }
    };
    fs::write(out, text)?;
    Ok(())
}

fn scaling_curve_csv(group: &GroupReport, resolution: usize) -> Result<String> {
    let FittedLaw::Marginal(report) = &group.fit else {
        return Err(Error::MissingAnalytic(
            "scaling_curve (single-axis fit)".into(),
        ));
    };
    let law = report.params;
    let xs: Vec<f64> = group
        .reduced_points
        .iter()
        .map(|p| match law.axis {
            Axis::Params => p.n_params as f64,
            Axis::Data => p.n_samples as f64,
        })
        .collect();
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);

    let mut text = String::from("series,x,loss\n");
    for x in log_samples(lo, hi, resolution) {
        let _ = writeln!(text, "fit,{},{}", fmt_num(x), fmt_num(law.eval_raw(x)));
    }
    for (x, p) in xs.iter().zip(&group.reduced_points) {
        let _ = writeln!(text, "obs,{},{}", fmt_num(*x), fmt_num(p.loss));
    }
    Ok(text)
}

fn loss_to_loss_csv(group: &GroupReport, resolution: usize) -> Result<String> {
    let (Some(report), Some(pairs)) = (&group.loss_to_loss, &group.loss_pairs) else {
        return Err(Error::MissingAnalytic("loss_to_loss".into()));
    };
    let law = report.params;
    let excesses: Vec<f64> = pairs
        .iter()
        .map(|&(l_id, _)| l_id - law.e_id)
        .filter(|&dx| dx > 0.0)
        .collect();
    let lo = excesses.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = excesses.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);

    let mut text = String::from("series,l_id,l_ood\n");
    for dx in log_samples(lo, hi, resolution) {
        let l_id = law.e_id + dx;
        let l_ood = transfer::predict_ood(&law, l_id)?;
        let _ = writeln!(text, "fit,{},{}", fmt_num(l_id), fmt_num(l_ood));
    }
    for &(l_id, l_ood) in pairs {
        let _ = writeln!(text, "obs,{},{}", fmt_num(l_id), fmt_num(l_ood));
    }
    Ok(text)
}

fn contour_csv(group: &GroupReport) -> Result<String> {
    let Some(allocation) = &group.allocation else {
        return Err(Error::MissingAnalytic("contour".into()));
    };
    Ok(contour_grid_csv(&allocation.contour))
}

/// Long-format CSV of an iso-loss grid: one row per cell, with the
/// per-column optimal model size flagged.
pub fn contour_grid_csv(grid: &ContourGrid) -> String {
    let mut text = String::from("compute,n_params,loss,is_optimal_path\n");
    for (i, &c) in grid.compute_axis.iter().enumerate() {
        let best_n = grid
            .optimal_path
            .iter()
            .find(|(pc, _)| *pc == c)
            .map(|&(_, n)| n);
        for (j, &n) in grid.n_axis.iter().enumerate() {
            let on_path = best_n == Some(n);
            let _ = writeln!(
                text,
                "{},{},{},{}",
                fmt_num(c),
                fmt_num(n),
                fmt_num(grid.loss_matrix[i][j]),
                u8::from(on_path)
            );
        }
    }
    text
}

fn frontier_csv(frontier: &FrontierReport, resolution: usize) -> String {
    let law = frontier.fit.params;
    let lo = frontier
        .points
        .iter()
        .map(|p| p.0)
        .fold(f64::INFINITY, f64::min);
    let hi = frontier
        .points
        .iter()
        .map(|p| p.0)
        .fold(f64::MIN_POSITIVE, f64::max);
    let mut text = String::from("series,compute,loss\n");
    for c in log_samples(lo, hi, resolution) {
        let _ = writeln!(text, "fit,{},{}", fmt_num(c), fmt_num(law.eval_raw(c)));
    }
    for &(c, loss) in &frontier.points {
        let _ = writeln!(text, "obs,{},{}", fmt_num(c), fmt_num(loss));
    }
    text
}

fn crossover_csv(report: &CrossoverReport, resolution: usize) -> String {
    let mut text = String::from("x,loss_a,loss_b,is_root\n");
    for x in log_samples(report.x_range.0, report.x_range.1, resolution) {
        let _ = writeln!(
            text,
            "{},{},{},0",
            fmt_num(x),
            fmt_num(report.curve_a.eval_raw(x)),
            fmt_num(report.curve_b.eval_raw(x))
        );
    }
    for &root in &report.scan.roots {
        let _ = writeln!(
            text,
            "{},{},{},1",
            fmt_num(root),
            fmt_num(report.curve_a.eval_raw(root)),
            fmt_num(report.curve_b.eval_raw(root))
        );
    }
    text
}
