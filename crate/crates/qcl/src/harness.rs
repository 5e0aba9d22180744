//! Batch orchestration: configuration, seeded execution, and persistence.
//!
//! Every run derives its randomness from (master_seed, run_id, purpose)
//! substreams, so output bytes are identical for any worker count. Each
//! command writes its tables plus a manifest listing every file with a
//! SHA-256 content hash.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    histogram_from, pairwise_distances, r_histogram, split_by_r, straight_shot_search,
    EigenRelationSample, PairMode, RunRecord, SearchOutcome, SearchSettings,
};
use crate::critical::{saddle_scan, SaddleScan};
use crate::dynamics::{ControlField, TimeGrid};
use crate::error::{Error, Result};
use crate::flow::{
    adjust_to_level, dmorph_flow, euclidean_distance, generate_random_field, path_length, ratio_r,
    FlowConfig, FlowDirection, FlowTrajectory,
};
use crate::landscape::{Functional, LandscapeEvaluator};
use crate::rng::{run_seed, substream};
use crate::system::{build_preset, load_system_file, LandscapeObjective, PresetTag, QuantumSystem};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "QCL_WORKERS";

/// Lowercase hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn default_horizon() -> f64 {
    10.0
}
fn default_n_points() -> usize {
    1001
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSection {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_n_points")]
    pub n_points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            horizon: default_horizon(),
            n_points: default_n_points(),
        }
    }
}

fn default_fraction() -> f64 {
    0.01
}
fn default_step_tol() -> f64 {
    3e-5
}
fn default_max_steps() -> usize {
    100_000
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowSection {
    /// Climb orientation; omitted means the objective's natural direction.
    #[serde(default)]
    pub direction: Option<FlowDirection>,
    #[serde(default = "default_fraction")]
    pub j_start_fraction: f64,
    #[serde(default = "default_fraction")]
    pub j_end_fraction: f64,
    #[serde(default = "default_step_tol")]
    pub rel_step_tolerance: f64,
    /// Absolute level tolerance; omitted derives 1e-6 × range.
    #[serde(default)]
    pub level_tolerance: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_s_steps: usize,
    #[serde(default = "default_true")]
    pub record_every_step: bool,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            direction: None,
            j_start_fraction: default_fraction(),
            j_end_fraction: default_fraction(),
            rel_step_tolerance: default_step_tol(),
            level_tolerance: None,
            max_s_steps: default_max_steps(),
            record_every_step: true,
        }
    }
}

fn default_n_runs() -> usize {
    100
}
fn default_master_seed() -> u64 {
    2024
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BatchSection {
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    /// 0 = library default (or the QCL_WORKERS environment override).
    #[serde(default)]
    pub workers: usize,
}

impl Default for BatchSection {
    fn default() -> Self {
        BatchSection {
            n_runs: default_n_runs(),
            master_seed: default_master_seed(),
            workers: 0,
        }
    }
}

fn default_stride() -> usize {
    10
}
fn default_r_bin() -> f64 {
    0.02
}
fn default_dist_bin() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisSection {
    #[serde(default)]
    pub saddle_scan: bool,
    #[serde(default = "default_stride")]
    pub eigen_stride: usize,
    /// Split size; omitted means n_runs / 4.
    #[serde(default)]
    pub split_k: Option<usize>,
    #[serde(default = "default_r_bin")]
    pub r_bin_width: f64,
    #[serde(default = "default_dist_bin")]
    pub distance_bin_width: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            saddle_scan: false,
            eigen_stride: default_stride(),
            split_k: None,
            r_bin_width: default_r_bin(),
            distance_bin_width: default_dist_bin(),
        }
    }
}

fn default_budget() -> usize {
    2000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSection {
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Ansatz modes for the search; omitted uses the run modes.
    #[serde(default)]
    pub modes: Option<usize>,
    #[serde(default)]
    pub target_r: Option<f64>,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            budget: default_budget(),
            modes: None,
            target_r: None,
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("qcl-out")
}

/// Top-level experiment description; JSON on disk, all fields optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub preset: Option<String>,
    /// Custom system JSON (alternative to `preset`).
    #[serde(default)]
    pub system_file: Option<PathBuf>,
    #[serde(default = "default_master_seed")]
    pub dipole_sign_seed: u64,
    #[serde(default)]
    pub grid: GridSection,
    /// Ansatz modes M; omitted uses the preset default (60 for 8-level,
    /// 20 otherwise).
    #[serde(default)]
    pub field_modes: Option<usize>,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub batch: BatchSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default = "default_out_dir")]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            preset: Some("ensemble8_r1o1".to_string()),
            system_file: None,
            dipole_sign_seed: default_master_seed(),
            grid: GridSection::default(),
            field_modes: None,
            flow: FlowSection::default(),
            batch: BatchSection::default(),
            analysis: AnalysisSection::default(),
            search: SearchSection::default(),
            output_dir: default_out_dir(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn preset_tag(&self) -> Result<Option<PresetTag>> {
        self.preset.as_deref().map(str::parse).transpose()
    }
}

/// A config resolved into concrete objects.
pub struct Resolved {
    pub system: QuantumSystem,
    pub objective: LandscapeObjective,
    pub grid: TimeGrid,
    pub modes: usize,
    pub flow: FlowConfig,
}

/// Expands the config and checks every structural invariant; collected
/// violations come back as a single configuration error.
pub fn resolve(config: &ExperimentConfig) -> Result<Resolved> {
    let (system, objective) = match (config.preset_tag()?, &config.system_file) {
        (Some(tag), None) => build_preset(tag, config.dipole_sign_seed),
        (None, Some(path)) => load_system_file(path)?,
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give either preset or system_file, not both".into(),
            ))
        }
        (None, None) => {
            return Err(Error::Config(
                "config needs a preset or a system_file".into(),
            ))
        }
    };
    let violations = crate::system::validate(&system, &objective);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::Config(format!(
            "invalid system: {}",
            list.join("; ")
        )));
    }
    let grid = TimeGrid::new(config.grid.horizon, config.grid.n_points)?;
    let modes = config
        .field_modes
        .or_else(|| {
            config
                .preset_tag()
                .ok()
                .flatten()
                .map(|t| t.default_modes())
        })
        .unwrap_or(20);
    let direction = config
        .flow
        .direction
        .unwrap_or_else(|| FlowDirection::natural(objective.direction()));
    let flow = FlowConfig {
        direction,
        j_start_fraction: config.flow.j_start_fraction,
        j_end_fraction: config.flow.j_end_fraction,
        rel_step_tolerance: config.flow.rel_step_tolerance,
        level_tolerance: config.flow.level_tolerance,
        max_s_steps: config.flow.max_s_steps,
        record_every_step: config.flow.record_every_step,
    };
    flow.validate()?;
    Ok(Resolved {
        system,
        objective,
        grid,
        modes,
        flow,
    })
}

/// Runs `f` on a dedicated pool of `workers` threads (0 = current pool).
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    let n = if workers > 0 {
        workers
    } else {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0)
    };
    if n == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f)
    }
}

// ---------------------------------------------------------------------------
// Output plumbing.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Collects written files and their hashes for the closing manifest.
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, contents)?;
        self.entries.push(ManifestEntry {
            path: name.to_string(),
            bytes: contents.len(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    /// Writes `manifest.json` and returns its path.
    pub fn finish(
        self,
        command: &str,
        config: &ExperimentConfig,
        stats: serde_json::Value,
    ) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            config: &'a ExperimentConfig,
            stats: serde_json::Value,
            outputs: &'a [ManifestEntry],
        }
        let manifest = Manifest {
            command,
            config,
            stats,
            outputs: &self.entries,
        };
        let path = self.root.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }
}

fn csv_row(values: &[f64]) -> String {
    let mut line = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        let _ = write!(line, "{v}");
    }
    line
}

fn fields_csv(fields: &[&ControlField]) -> String {
    let mut out = String::new();
    for f in fields {
        out.push_str(&csv_row(&f.values));
        out.push('\n');
    }
    out
}

fn histogram_csv(bins: &[crate::analysis::HistBin]) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for b in bins {
        let _ = writeln!(out, "{},{},{}", b.lo, b.hi, b.count);
    }
    out
}

fn records_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("run_id,seed,r_value,d_pl,d_el,j_start,j_end,n_steps\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.run_id, r.seed, r.r_value, r.d_pl, r.d_el, r.j_start, r.j_end, r.n_steps
        );
    }
    out
}

fn trajectory_csv(traj: &FlowTrajectory) -> String {
    let mut out = String::from("step,s,j,grad_norm\n");
    for i in 0..traj.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            i, traj.s_values[i], traj.j_values[i], traj.grad_norms[i]
        );
    }
    out
}

fn saddle_csv(scan: &SaddleScan) -> String {
    let mut out = String::from("s,j,grad_norm");
    for j in &scan.submanifold_j_values {
        let _ = write!(out, ",D_{j}");
    }
    out.push('\n');
    for i in 0..scan.s_values.len() {
        let _ = write!(
            out,
            "{},{},{}",
            scan.s_values[i], scan.j_values[i], scan.grad_norms[i]
        );
        for d in &scan.distances[i] {
            let _ = write!(out, ",{d}");
        }
        out.push('\n');
    }
    out
}

fn eigen_csv(samples: &[EigenRelationSample]) -> String {
    let mut out = String::from("s,rayleigh,rho_ratio,nearest_eig_gap,spectrum_min,spectrum_max\n");
    for p in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.s,
            p.rayleigh,
            p.rho_ratio,
            p.nearest_eig_gap,
            p.hessian_spectrum.first().unwrap(),
            p.hessian_spectrum.last().unwrap()
        );
    }
    out
}

fn spectrum_csv(samples: &[EigenRelationSample]) -> String {
    let mut out = String::new();
    for p in samples {
        let mut row = vec![p.s];
        row.extend(&p.hessian_spectrum);
        out.push_str(&csv_row(&row));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Pipeline pieces.

/// One complete run: generate a seeded random field, adjust it to J^I,
/// and climb to J^F.
pub fn execute_run(
    resolved: &Resolved,
    run_id: u64,
    seed: u64,
) -> Result<(RunRecord, FlowTrajectory)> {
    let mut field_rng = substream(seed, 0, "field");
    let field = generate_random_field(resolved.grid, resolved.modes, &mut field_rng)?;
    let mut ev = LandscapeEvaluator::new(&resolved.system, &resolved.objective)?;
    let (j_i, _) = resolved.flow.levels(ev.j_range());
    let start = adjust_to_level(&mut ev, &field, j_i, &resolved.flow)?;
    let traj = dmorph_flow(&mut ev, &start, &resolved.flow)?;
    let d_pl = path_length(&traj);
    let d_el = euclidean_distance(traj.initial_field(), traj.final_field())?;
    let record = RunRecord {
        run_id,
        seed,
        r_value: ratio_r(&traj)?,
        d_pl,
        d_el,
        j_start: traj.j_values[0],
        j_end: *traj.j_values.last().unwrap(),
        n_steps: traj.len() - 1,
        initial_field: traj.initial_field().clone(),
        final_field: traj.final_field().clone(),
    };
    Ok((record, traj))
}

#[derive(Debug)]
pub struct BatchReport {
    pub records: Vec<RunRecord>,
    pub mean_r: f64,
    pub manifest_path: PathBuf,
}

/// Seeded batch: n_runs independent climbs, R statistics, splits, and
/// pairwise-distance histograms, all persisted with a manifest.
pub fn run_batch(config: &ExperimentConfig) -> Result<BatchReport> {
    let resolved = resolve(config)?;
    let n_runs = config.batch.n_runs;
    if n_runs == 0 {
        return Err(Error::Config("n_runs must be at least 1".into()));
    }
    let master = config.batch.master_seed;
    let results: Vec<Result<RunRecord>> = with_workers(config.batch.workers, || {
        (0..n_runs as u64)
            .into_par_iter()
            .map(|run_id| {
                let seed = run_seed(master, run_id);
                execute_run(&resolved, run_id, seed)
                    .map(|(record, _)| record)
                    .map_err(|e| Error::Config(format!("run {run_id} (seed {seed}) failed: {e}")))
            })
            .collect()
    });
    let mut records = Vec::with_capacity(n_runs);
    for r in results {
        records.push(r?);
    }

    let mut out = OutputDir::create(&config.output_dir)?;
    out.write("config.json", &serde_json::to_string_pretty(config)?)?;
    out.write("records.csv", &records_csv(&records))?;
    let initial: Vec<&ControlField> = records.iter().map(|r| &r.initial_field).collect();
    let final_: Vec<&ControlField> = records.iter().map(|r| &r.final_field).collect();
    out.write("initial_fields.csv", &fields_csv(&initial))?;
    out.write("final_fields.csv", &fields_csv(&final_))?;

    let hist = r_histogram(&records, config.analysis.r_bin_width);
    out.write("r_histogram.csv", &histogram_csv(&hist.bins))?;

    let k = config
        .analysis
        .split_k
        .unwrap_or(n_runs / 4)
        .min(n_runs / 2);
    let mut split_stats = serde_json::Map::new();
    if k >= 1 {
        let (low, high) = split_by_r(&records, k)?;
        let split_csv = |set: &[RunRecord]| {
            let mut s = String::from("run_id,r_value\n");
            for r in set {
                let _ = writeln!(s, "{},{}", r.run_id, r.r_value);
            }
            s
        };
        out.write("split_low.csv", &split_csv(&low))?;
        out.write("split_high.csv", &split_csv(&high))?;
        for (name, set) in [("low", &low), ("high", &high)] {
            let init: Vec<ControlField> = set.iter().map(|r| r.initial_field.clone()).collect();
            let fin: Vec<ControlField> = set.iter().map(|r| r.final_field.clone()).collect();
            let cases = [
                (
                    "init_init",
                    pairwise_distances(&init, &fin, PairMode::WithinA)?,
                ),
                (
                    "final_final",
                    pairwise_distances(&init, &fin, PairMode::WithinB)?,
                ),
                (
                    "init_final",
                    pairwise_distances(&init, &fin, PairMode::Cross { matched: false })?,
                ),
            ];
            for (suffix, dists) in cases {
                let bins = histogram_from(0.0, config.analysis.distance_bin_width, &dists);
                out.write(&format!("dist_{name}_{suffix}.csv"), &histogram_csv(&bins))?;
                let mean = dists.iter().sum::<f64>() / dists.len().max(1) as f64;
                split_stats.insert(
                    format!("mean_dist_{name}_{suffix}"),
                    serde_json::json!(mean),
                );
            }
        }
        split_stats.insert("split_k".into(), serde_json::json!(k));
        split_stats.insert(
            "threshold_low".into(),
            serde_json::json!(low.last().map(|r| r.r_value)),
        );
        split_stats.insert(
            "threshold_high".into(),
            serde_json::json!(high.first().map(|r| r.r_value)),
        );
    }

    let stats = serde_json::json!({
        "n_runs": n_runs,
        "master_seed": master,
        "mean_r": hist.mean,
        "median_r": hist.median,
        "max_r": hist.max,
        "splits": split_stats,
    });
    let manifest_path = out.finish("batch", config, stats)?;
    Ok(BatchReport {
        mean_r: hist.mean,
        records,
        manifest_path,
    })
}

#[derive(Debug)]
pub struct SingleReport {
    pub record: RunRecord,
    pub scan: Option<SaddleScan>,
    pub manifest_path: PathBuf,
}

/// One fully recorded trajectory, optionally with the critical-manifold
/// distance table.
pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<SingleReport> {
    let mut resolved = resolve(config)?;
    resolved.flow.record_every_step = true;
    let (record, traj) = with_workers(config.batch.workers, || execute_run(&resolved, 0, seed))?;
    let mut out = OutputDir::create(&config.output_dir)?;
    out.write("config.json", &serde_json::to_string_pretty(config)?)?;
    out.write("trajectory.csv", &trajectory_csv(&traj))?;
    let field_refs: Vec<&ControlField> = traj.fields.iter().collect();
    out.write("trajectory_fields.csv", &fields_csv(&field_refs))?;
    let scan = if config.analysis.saddle_scan {
        let scan = with_workers(config.batch.workers, || {
            saddle_scan(&traj, &resolved.system, &resolved.objective)
        })?;
        out.write("saddle_scan.csv", &saddle_csv(&scan))?;
        Some(scan)
    } else {
        None
    };
    let stats = serde_json::json!({
        "seed": seed,
        "r_value": record.r_value,
        "d_pl": record.d_pl,
        "d_el": record.d_el,
        "j_start": record.j_start,
        "j_end": record.j_end,
        "n_steps": record.n_steps,
    });
    let manifest_path = out.finish("single", config, stats)?;
    Ok(SingleReport {
        record,
        scan,
        manifest_path,
    })
}

/// Where the eigen-relation trajectory starts from.
pub enum EigenSource {
    Seed(u64),
    FieldFile(PathBuf),
}

#[derive(Debug)]
pub struct EigenReport {
    pub samples: Vec<EigenRelationSample>,
    pub r_value: f64,
    pub manifest_path: PathBuf,
}

/// Runs a flow and scans the Hessian-gradient eigen-relation along it.
pub fn run_eigen_relation(config: &ExperimentConfig, source: EigenSource) -> Result<EigenReport> {
    let mut resolved = resolve(config)?;
    resolved.flow.record_every_step = true;
    if resolved.system.n_levels > 4 {
        eprintln!(
            "warning: eigen-relation scan builds {0}x{0} Hessians per sample; \
             N = {1} will be slow",
            resolved.grid.n_points, resolved.system.n_levels
        );
    }
    let field = match &source {
        EigenSource::Seed(seed) => {
            let mut rng = substream(*seed, 0, "field");
            generate_random_field(resolved.grid, resolved.modes, &mut rng)?
        }
        EigenSource::FieldFile(path) => {
            let text = std::fs::read_to_string(path)?;
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .ok_or_else(|| Error::Config("field file is empty".into()))?;
            let values: std::result::Result<Vec<f64>, _> =
                first.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let values = values.map_err(|e| Error::Config(format!("bad field file: {e}")))?;
            ControlField::new(resolved.grid, values)?
        }
    };
    let (record_traj, samples) = with_workers(config.batch.workers, || -> Result<_> {
        let mut ev = LandscapeEvaluator::new(&resolved.system, &resolved.objective)?;
        let (j_i, _) = resolved.flow.levels(ev.j_range());
        let start = adjust_to_level(&mut ev, &field, j_i, &resolved.flow)?;
        let traj = dmorph_flow(&mut ev, &start, &resolved.flow)?;
        let samples = crate::analysis::eigen_relation_scan(
            &resolved.system,
            &resolved.objective,
            &traj,
            config.analysis.eigen_stride.max(1),
        )?;
        Ok((traj, samples))
    })?;
    let r_value = ratio_r(&record_traj)?;
    let mut out = OutputDir::create(&config.output_dir)?;
    out.write("config.json", &serde_json::to_string_pretty(config)?)?;
    out.write("trajectory.csv", &trajectory_csv(&record_traj))?;
    out.write("eigen_relation.csv", &eigen_csv(&samples))?;
    out.write("eigen_spectrum.csv", &spectrum_csv(&samples))?;
    let stats = serde_json::json!({
        "r_value": r_value,
        "stride": config.analysis.eigen_stride,
        "scanned_samples": samples.len(),
        "trajectory_samples": record_traj.len(),
    });
    let manifest_path = out.finish("eigen", config, stats)?;
    Ok(EigenReport {
        samples,
        r_value,
        manifest_path,
    })
}

#[derive(Debug)]
pub struct SearchReport {
    pub outcome: SearchOutcome,
    pub manifest_path: PathBuf,
}

/// Straight-shot search over the field ansatz parameters; persists the
/// best field and its full-tolerance R.
pub fn run_straight_search(config: &ExperimentConfig, budget: usize) -> Result<SearchReport> {
    let resolved = resolve(config)?;
    let settings = SearchSettings {
        grid: resolved.grid,
        modes: config.search.modes.unwrap_or(resolved.modes),
        budget,
        seed: config.batch.master_seed,
        flow: resolved.flow,
        target_r: config.search.target_r,
    };
    let outcome = with_workers(config.batch.workers, || {
        straight_shot_search(&resolved.system, &resolved.objective, &settings)
    })?;
    let mut out = OutputDir::create(&config.output_dir)?;
    out.write("config.json", &serde_json::to_string_pretty(config)?)?;
    out.write(
        "best_field.csv",
        &format!("{}\n", csv_row(&outcome.best_field.values)),
    )?;
    let stats = serde_json::json!({
        "best_r": outcome.best_r,
        "best_r_search": outcome.best_r_search,
        "evaluations": outcome.evaluations,
        "budget": budget,
        "seed": config.batch.master_seed,
        "modes": settings.modes,
    });
    out.write("search_report.json", &serde_json::to_string_pretty(&stats)?)?;
    let manifest_path = out.finish("search", config, stats)?;
    Ok(SearchReport {
        outcome,
        manifest_path,
    })
}
