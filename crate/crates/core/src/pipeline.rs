//! Two-tier orchestration: tier-1 training per snapshot, tier-2 SOM over the
//! tier-1 predictions, accuracy scoring, reports and rendered maps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_samples, filter_high_re, fit_and_apply_normalizer, SampleSet};
use crate::field::{self, FlowSnapshot, Grid3};
use crate::mlp::{self, MlpModel, StopReason, TrainConfig, TrainTrace};
use crate::nsops::local_re_feature;
use crate::som::{self, FeaturePeak, SomConfig};
use crate::{Error, Result};

/// Tolerances the report always brackets validation accuracy with.
pub const BRACKET_TAUS: [f64; 3] = [0.05, 0.10, 0.25];

/// Headline accuracy of the original two-tier study, reported for comparison only.
pub const REFERENCE_ACCURACY: f64 = 0.67;

/// Number of feature peaks kept per snapshot.
pub const PEAK_COUNT: usize = 5;

/// Input dimension of the SOM: predicted `(u, v, w)` plus the local Re feature.
pub const SOM_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Tg,
    Abc,
    Rand,
}

/// Synthetic snapshot on an `n³` grid over the `[0, 2π)³` box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_re")]
    pub re: f64,
    #[serde(default = "default_pr")]
    pub pr: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "one")]
    pub c: f64,
}

fn default_n() -> usize {
    16
}
fn default_re() -> f64 {
    100.0
}
fn default_pr() -> f64 {
    0.7
}
fn one() -> f64 {
    1.0
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind) -> Self {
        Self {
            kind,
            n: default_n(),
            re: default_re(),
            pr: default_pr(),
            seed: 0,
            amplitude: 1.0,
            a: 1.0,
            b: 1.0,
            c: 1.0,
        }
    }

    pub fn generate(&self) -> Result<FlowSnapshot> {
        let grid = Grid3::cube(self.n)?;
        match self.kind {
            GeneratorKind::Tg => field::taylor_green_snapshot(grid, self.re, self.pr),
            GeneratorKind::Abc => field::abc_snapshot(grid, self.a, self.b, self.c, self.re, self.pr),
            GeneratorKind::Rand => {
                field::random_solenoidal_snapshot(grid, self.seed, self.amplitude, self.re, self.pr)
            }
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            GeneratorKind::Tg => format!("tg(n={}, re={}, pr={})", self.n, self.re, self.pr),
            GeneratorKind::Abc => format!(
                "abc(n={}, a={}, b={}, c={}, re={}, pr={})",
                self.n, self.a, self.b, self.c, self.re, self.pr
            ),
            GeneratorKind::Rand => format!(
                "rand(n={}, seed={}, amplitude={}, re={}, pr={})",
                self.n, self.seed, self.amplitude, self.re, self.pr
            ),
        }
    }
}

/// A snapshot file path or a generator spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnapshotSource {
    Path(PathBuf),
    Generator(GeneratorSpec),
}

impl SnapshotSource {
    pub fn label(&self) -> String {
        match self {
            SnapshotSource::Path(p) => p.display().to_string(),
            SnapshotSource::Generator(g) => g.label(),
        }
    }

    pub fn load(&self) -> Result<FlowSnapshot> {
        match self {
            SnapshotSource::Path(p) => field::load_snapshot(p),
            SnapshotSource::Generator(g) => g.generate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetOptions {
    pub seed: u64,
    pub keep_fraction: f64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            keep_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccuracyOptions {
    pub tau: f64,
}

impl Default for AccuracyOptions {
    fn default() -> Self {
        Self { tau: 0.10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub snapshots: Vec<SnapshotSource>,
    #[serde(default)]
    pub dataset: DatasetOptions,
    #[serde(default)]
    pub mlp: TrainConfig,
    #[serde(default)]
    pub som: SomConfig,
    #[serde(default)]
    pub accuracy: AccuracyOptions,
}

impl PipelineConfig {
    pub fn new(snapshots: Vec<SnapshotSource>) -> Self {
        Self {
            snapshots,
            dataset: DatasetOptions::default(),
            mlp: TrainConfig::default(),
            som: SomConfig::default(),
            accuracy: AccuracyOptions::default(),
        }
    }

    /// Six seeded random solenoidal 16³ snapshots with every other option at
    /// its default.
    pub fn reproduction() -> Self {
        Self::new(
            (1..=6)
                .map(|seed| {
                    SnapshotSource::Generator(GeneratorSpec {
                        seed,
                        ..GeneratorSpec::new(GeneratorKind::Rand)
                    })
                })
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.snapshots.is_empty() {
            return Err(Error::InvalidArgument("config lists no snapshots".into()));
        }
        if !(self.accuracy.tau > 0.0 && self.accuracy.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "accuracy tau = {}, must be positive",
                self.accuracy.tau
            )));
        }
        let q = self.dataset.keep_fraction;
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "keep_fraction = {q}, must lie in (0, 1]"
            )));
        }
        self.mlp.validate()?;
        self.som.validate()
    }

    /// Read a JSON config; relative snapshot paths resolve against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for s in &mut cfg.snapshots {
            if let SnapshotSource::Path(p) = s {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }
}

/// Fraction of samples with `‖pred − target‖₂ ≤ tau·(‖target‖₂ + 1e-8)`.
pub fn accuracy_within_tol(predictions: &[Vec<f64>], targets: &[Vec<f64>], tau: f64) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set is undefined".into()));
    }
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau = {tau}, must be positive")));
    }
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let mut hits = 0usize;
    for (p, t) in predictions.iter().zip(targets) {
        if p.len() != t.len() {
            return Err(Error::DimensionMismatch {
                expected: t.len(),
                got: p.len(),
            });
        }
        let err = norm(&mut p.iter().zip(t).map(|(a, b)| a - b));
        let scale = norm(&mut t.iter().copied());
        if err <= tau * (scale + 1e-8) {
            hits += 1;
        }
    }
    Ok(hits as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauAccuracy {
    pub tau: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotReport {
    pub source: String,
    pub sizes: PartitionSizes,
    pub stop_reason: StopReason,
    pub final_mu: f64,
    pub epochs_run: usize,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
    /// Validation accuracy at each of [`BRACKET_TAUS`].
    pub validation_brackets: Vec<TauAccuracy>,
    pub hit_map: Vec<Vec<u64>>,
    pub plane_x: Vec<Vec<f64>>,
    pub plane_y: Vec<Vec<f64>>,
    pub plane_z: Vec<Vec<f64>>,
    pub peaks: Vec<FeaturePeak>,
    pub quantization_error_start: f64,
    pub quantization_error_end: f64,
    pub trace: TrainTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub tau: f64,
    pub snapshots: Vec<SnapshotReport>,
    pub mean_validation_accuracy: f64,
    /// Mean validation accuracy over snapshots at each of [`BRACKET_TAUS`].
    pub mean_validation_brackets: Vec<TauAccuracy>,
    pub reference_accuracy: f64,
}

/// Everything a snapshot run produces, including the trained model.
#[derive(Debug, Clone)]
pub struct SnapshotRun {
    pub report: SnapshotReport,
    pub model: MlpModel,
    pub set: SampleSet,
}

fn stage<T>(stage: &'static str, snapshot: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage,
        snapshot: snapshot.to_string(),
        source: Box::new(e),
    })
}

fn select(rows: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| rows[i].clone()).collect()
}

/// Tier 1 then tier 2 on one snapshot.
pub fn run_snapshot(snapshot: &FlowSnapshot, label: &str, cfg: &PipelineConfig) -> Result<SnapshotRun> {
    let feature = local_re_feature(snapshot);
    let set = stage("dataset", label, SampleSet::new(build_samples(snapshot), cfg.dataset.seed))?;
    let set = if cfg.dataset.keep_fraction < 1.0 {
        stage("filter", label, filter_high_re(&set, &feature, cfg.dataset.keep_fraction))?
    } else {
        set
    };
    let set = stage("normalize", label, fit_and_apply_normalizer(&set))?;
    let (model, trace) = stage("train_mlp", label, mlp::train_mlp(&set, &cfg.mlp))?;

    let predictions: Vec<Vec<f64>> = set
        .samples
        .par_iter()
        .map(|s| model.forward(&s.input))
        .collect::<Result<_>>()?;
    let targets: Vec<Vec<f64>> = set.samples.iter().map(|s| s.target.to_vec()).collect();
    let part = &set.partition;
    let (val_p, val_t) = (select(&predictions, &part.validation), select(&targets, &part.validation));
    let (test_p, test_t) = (select(&predictions, &part.test), select(&targets, &part.test));
    let tau = cfg.accuracy.tau;
    let validation_accuracy = stage("accuracy", label, accuracy_within_tol(&val_p, &val_t, tau))?;
    let test_accuracy = stage("accuracy", label, accuracy_within_tol(&test_p, &test_t, tau))?;
    let validation_brackets = BRACKET_TAUS
        .iter()
        .map(|&t| {
            accuracy_within_tol(&val_p, &val_t, t).map(|accuracy| TauAccuracy { tau: t, accuracy })
        })
        .collect::<Result<Vec<_>>>()?;

    let som_data: Vec<Vec<f64>> = set
        .samples
        .iter()
        .zip(&predictions)
        .map(|(s, p)| vec![p[0], p[1], p[2], feature.data[s.node]])
        .collect();
    let features: Vec<f64> = set.samples.iter().map(|s| feature.data[s.node]).collect();
    let sc = &cfg.som;
    let lattice = stage("init_som", label, som::init_som(sc.rows, sc.cols, SOM_DIM, &som_data, sc.seed))?;
    let qe_start = som::quantization_error(&lattice, &som_data);
    let lattice = stage("train_som", label, som::train_som(&lattice, &som_data, sc))?;
    let qe_end = som::quantization_error(&lattice, &som_data);
    let plane = |c| stage("component_plane", label, som::component_plane(&lattice, c));
    let peaks = stage(
        "feature_peaks",
        label,
        som::feature_peaks(&lattice, &som_data, &features, PEAK_COUNT),
    )?;

    let (train, validation, test) = part.sizes();
    let report = SnapshotReport {
        source: label.to_string(),
        sizes: PartitionSizes {
            train,
            validation,
            test,
        },
        stop_reason: trace.stop_reason,
        final_mu: trace.final_mu().unwrap_or(cfg.mlp.mu0),
        epochs_run: trace.epochs_run(),
        validation_accuracy,
        test_accuracy,
        validation_brackets,
        hit_map: som::hit_map(&lattice, &som_data),
        plane_x: plane(0)?,
        plane_y: plane(1)?,
        plane_z: plane(2)?,
        peaks,
        quantization_error_start: qe_start,
        quantization_error_end: qe_end,
        trace,
    };
    Ok(SnapshotRun { report, model, set })
}

/// Run every configured snapshot (concurrently; results keep config order)
/// and aggregate the report.
pub fn run_two_tier_full(cfg: &PipelineConfig) -> Result<(PipelineReport, Vec<SnapshotRun>)> {
    cfg.validate()?;
    let runs: Vec<SnapshotRun> = cfg
        .snapshots
        .par_iter()
        .map(|src| {
            let label = src.label();
            let snap = stage("load", &label, src.load())?;
            run_snapshot(&snap, &label, cfg)
        })
        .collect::<Result<_>>()?;

    let n = runs.len() as f64;
    let mean_validation_accuracy = runs.iter().map(|r| r.report.validation_accuracy).sum::<f64>() / n;
    let mean_validation_brackets = BRACKET_TAUS
        .iter()
        .enumerate()
        .map(|(i, &tau)| TauAccuracy {
            tau,
            accuracy: runs.iter().map(|r| r.report.validation_brackets[i].accuracy).sum::<f64>() / n,
        })
        .collect();
    let report = PipelineReport {
        tau: cfg.accuracy.tau,
        snapshots: runs.iter().map(|r| r.report.clone()).collect(),
        mean_validation_accuracy,
        mean_validation_brackets,
        reference_accuracy: REFERENCE_ACCURACY,
    };
    Ok((report, runs))
}

pub fn run_two_tier(cfg: &PipelineConfig) -> Result<PipelineReport> {
    run_two_tier_full(cfg).map(|(r, _)| r)
}

/// Suffix used for per-snapshot output files: none for the first snapshot,
/// `_<i>` after that.
fn suffix(i: usize) -> String {
    if i == 0 {
        String::new()
    } else {
        format!("_{i}")
    }
}

/// Write `report.json`, PGM/CSV maps and the tier-1 model of every snapshot.
pub fn write_outputs(report: &PipelineReport, runs: &[SnapshotRun], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_report(report, dir.join("report.json"))?;
    for (i, snap) in report.snapshots.iter().enumerate() {
        let sfx = suffix(i);
        let hits: Vec<Vec<f64>> = snap
            .hit_map
            .iter()
            .map(|r| r.iter().map(|&h| h as f64).collect())
            .collect();
        render_pgm(&hits, dir.join(format!("hitmap{sfx}.pgm")))?;
        write_csv(&hits, dir.join(format!("hitmap{sfx}.csv")))?;
        for (axis, plane) in [("x", &snap.plane_x), ("y", &snap.plane_y), ("z", &snap.plane_z)] {
            render_pgm(plane, dir.join(format!("plane_{axis}{sfx}.pgm")))?;
            write_csv(plane, dir.join(format!("plane_{axis}{sfx}.csv")))?;
        }
    }
    for (i, run) in runs.iter().enumerate() {
        mlp::save_model(
            &run.model,
            run.set.normalizer.as_ref(),
            dir.join(format!("model{}.mlp", suffix(i))),
        )?;
    }
    Ok(())
}

/// ASCII PGM (`P2`, maxval 255) with min → 0 and max → 255; a constant
/// matrix renders all zeros.
pub fn format_pgm(matrix: &[Vec<f64>]) -> Result<String> {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("cannot render an empty matrix".into()));
    }
    if matrix.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidArgument("matrix rows have different lengths".into()));
    }
    if matrix.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let lo = matrix.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = matrix.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P2\n{cols} {rows}\n255\n");
    for row in matrix {
        let px: Vec<String> = row
            .iter()
            .map(|&x| {
                let v = if hi > lo {
                    (255.0 * (x - lo) / (hi - lo)).round()
                } else {
                    0.0
                };
                (v as u8).to_string()
            })
            .collect();
        out.push_str(&px.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn render_pgm(matrix: &[Vec<f64>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = format_pgm(matrix)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Row-major CSV, one matrix row per line.
pub fn write_csv(matrix: &[Vec<f64>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for row in matrix {
        for (i, x) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{x}");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(path, no + 1, format!("bad value `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 0, "empty matrix"));
    }
    Ok(rows)
}

pub fn write_report(report: &PipelineReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(report).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<PipelineReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
