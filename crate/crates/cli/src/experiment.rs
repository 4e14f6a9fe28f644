//! The experiment pipeline: point-vortex ODE, safety radius, cutoffs, blob
//! runs, diagnostics, output files and the run manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use vortexloc::blob::{
    make_initial_cloud, run, write_snapshot_csv, BlobTrajectory, EventKind, FieldMode, InitialProfile, ParticleCloud,
    RegularizedField, SnapshotManifest, SNAPSHOT_HEADER,
};
use vortexloc::diagnostics::{
    check_gronwall, diagnose, distribution_check, evenly_spaced, measure, measure_force_bounds,
    write_diagnostics_csv, SweepResult, DIAGNOSTICS_HEADER,
};
use vortexloc::geometry::DomainModel;
use vortexloc::pointvortex::{integrate, select_rho0, OdeSolution};
use vortexloc::{Error, Vec2};

use crate::config::{ConfigError, ExperimentConfig, Scenario};

/// Relative `output_dir` values are resolved against this directory when set.
pub const OUTPUT_ROOT_ENV: &str = "VORTEXLOC_OUTPUT_ROOT";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const SNAPSHOT_INDEX_FILE: &str = "snapshots.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SWEEP_FILE: &str = "sweep.json";
pub const EVENTS_HEADER: &str = "time,particle,blob,kind";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Validate,
    Ode,
    Rho0,
    Cutoffs,
    Blob,
    Diagnostics,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Validate => "validate",
            Stage::Ode => "ode",
            Stage::Rho0 => "rho0",
            Stage::Cutoffs => "cutoffs",
            Stage::Blob => "blob",
            Stage::Diagnostics => "diagnostics",
            Stage::Write => "write",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("stage validate: {0}")]
    Config(#[from] ConfigError),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Error,
    },
}

impl RunError {
    pub fn stage(&self) -> Stage {
        match self {
            RunError::Config(_) => Stage::Validate,
            RunError::Stage { stage, .. } => *stage,
        }
    }

    /// 2 for invalid input, 3 for a numerical halt, 4 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Stage { source, stage } => match source {
                Error::Io(_) => 4,
                Error::Config(_) | Error::Parse(_) => 2,
                _ if *stage == Stage::Validate => 2,
                _ => 3,
            },
        }
    }
}

fn at(stage: Stage) -> impl Fn(Error) -> RunError {
    move |source| RunError::Stage { stage, source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the run's output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub epsilon: f64,
    pub dir: String,
    pub mode: FieldMode,
    pub n_particles: usize,
    pub steps: usize,
    pub records: usize,
    /// Per blob: `max_t |m(t) - z(t)|`.
    pub sup_center_err: Vec<f64>,
    /// Per blob: `max_t` support radius.
    pub max_support_radius: Vec<f64>,
    pub initial_inertia: Vec<f64>,
    pub force_sup: f64,
    pub force_lipschitz: f64,
    pub gronwall_violations: Vec<usize>,
    pub gronwall_first_violation: Vec<Option<f64>>,
    pub gronwall_max_ratio: Vec<f64>,
    pub exit_events: usize,
    pub band_events: usize,
    pub circulation_initial: Vec<f64>,
    pub circulation_final: Vec<f64>,
    pub distribution_discrepancy: f64,
    pub min_clearance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub status: RunStatus,
    pub failed_stage: Option<Stage>,
    pub error: Option<String>,
    pub config: ExperimentConfig,
    /// The effective configuration in its text form.
    pub config_text: String,
    pub output_dir: PathBuf,
    pub rho0: Option<f64>,
    /// Largest measured `|F|` over all members.
    pub force_sup: Option<f64>,
    /// Largest measured Lipschitz quotient of `F` over all members.
    pub force_lipschitz: Option<f64>,
    pub members: Vec<MemberSummary>,
    pub sweep: Option<SweepResult>,
    pub wall_time_seconds: f64,
    pub csv_headers: BTreeMap<String, String>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn read(path: &Path) -> vortexloc::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn output(&self, path: &str) -> Option<&OutputFile> {
        self.outputs.iter().find(|o| o.path == path)
    }
}

/// Resolves `dir` against [`OUTPUT_ROOT_ENV`] when it is relative and the variable is set.
pub fn resolve_output_dir(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() && !root.is_empty() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

fn write_output(root: &Path, rel: &str, bytes: &[u8]) -> vortexloc::Result<OutputFile> {
    let path = root.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&path, bytes)?;
    Ok(OutputFile { path: rel.to_string(), sha256: hex::encode(Sha256::digest(bytes)), bytes: bytes.len() as u64 })
}

fn join_rel(dir: &str, file: &str) -> String {
    if dir.is_empty() {
        file.to_string()
    } else {
        format!("{dir}/{file}")
    }
}

/// Runs the configured experiment and writes `manifest.json` into the output directory.
///
/// On failure after validation the manifest is still written, marked partial,
/// listing whatever outputs were completed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest, RunError> {
    cfg.validate()?;
    let started = Instant::now();
    let out_dir = resolve_output_dir(&cfg.output_dir);
    fs::create_dir_all(&out_dir).map_err(|e| at(Stage::Write)(e.into()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| at(Stage::Validate)(Error::Config(format!("cannot start {} workers: {e}", cfg.workers))))?;

    let mut manifest = RunManifest {
        format_version: FORMAT_VERSION,
        status: RunStatus::Complete,
        failed_stage: None,
        error: None,
        config: cfg.clone(),
        config_text: cfg.serialize(),
        output_dir: out_dir.clone(),
        rho0: None,
        force_sup: None,
        force_lipschitz: None,
        members: Vec::new(),
        sweep: None,
        wall_time_seconds: 0.0,
        csv_headers: csv_headers(),
        outputs: Vec::new(),
    };
    let result = pool.install(|| pipeline(cfg, &out_dir, &mut manifest));
    manifest.outputs.sort_by(|a, b| a.path.cmp(&b.path));
    manifest.wall_time_seconds = started.elapsed().as_secs_f64();
    if let Err(e) = &result {
        manifest.status = RunStatus::Partial;
        manifest.failed_stage = Some(e.stage());
        manifest.error = Some(e.to_string());
    }
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(out_dir.join(MANIFEST_FILE), text).map_err(|e| at(Stage::Write)(e.into()))?;
    result.map(|_| manifest)
}

fn csv_headers() -> BTreeMap<String, String> {
    BTreeMap::from([
        (TRAJECTORY_FILE.to_string(), "t,z1x,z1y,...,zkx,zky,W".to_string()),
        (DIAGNOSTICS_FILE.to_string(), DIAGNOSTICS_HEADER.to_string()),
        (EVENTS_FILE.to_string(), EVENTS_HEADER.to_string()),
        ("snapshots/*.csv".to_string(), SNAPSHOT_HEADER.to_string()),
    ])
}

fn pipeline(cfg: &ExperimentConfig, out_dir: &Path, manifest: &mut RunManifest) -> Result<(), RunError> {
    let domain = cfg.domain.build().map_err(at(Stage::Validate))?;
    let vortices = cfg.vortex_config().map_err(at(Stage::Validate))?;

    info!("integrating {} point vortices to T = {}", vortices.count(), cfg.t_end);
    let ode = integrate(&domain, &vortices, cfg.t_end, cfg.dt).map_err(at(Stage::Ode))?;
    let mut buf = Vec::new();
    ode.write_csv(&mut buf).map_err(at(Stage::Write))?;
    manifest.outputs.push(write_output(out_dir, TRAJECTORY_FILE, &buf).map_err(at(Stage::Write))?);
    if !cfg.scenario.has_blobs() {
        return Ok(());
    }

    let rho0 = select_rho0(&ode, &domain).map_err(at(Stage::Rho0))?;
    manifest.rho0 = Some(rho0);
    info!("safety radius rho0 = {rho0}");
    let mode = cfg.mode.unwrap_or(FieldMode::SingleBlob);
    let field = RegularizedField::new(&domain, rho0, mode).map_err(at(Stage::Cutoffs))?;

    let eps_list = cfg.blob_epsilons();
    let sweep = cfg.scenario == Scenario::Sweep;
    let results: Vec<Result<(MemberSummary, Vec<OutputFile>), RunError>> = eps_list
        .par_iter()
        .map(|&eps| {
            let dir = if sweep { format!("eps_{eps}") } else { String::new() };
            run_member(cfg, &domain, &field, &ode, eps, &dir, out_dir)
        })
        .collect();

    let mut first_err = None;
    for r in results {
        match r {
            Ok((summary, files)) => {
                manifest.members.push(summary);
                manifest.outputs.extend(files);
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    manifest.force_sup = manifest.members.iter().map(|m| m.force_sup).reduce(f64::max);
    manifest.force_lipschitz = manifest.members.iter().map(|m| m.force_lipschitz).reduce(f64::max);
    if let Some(e) = first_err {
        return Err(e);
    }

    if sweep {
        let result = SweepResult::new(
            manifest.members.iter().map(|m| m.epsilon).collect(),
            manifest.members.iter().map(|m| m.sup_center_err[0]).collect(),
            manifest.members.iter().map(|m| m.max_support_radius[0]).collect(),
        )
        .map_err(at(Stage::Diagnostics))?;
        let text = serde_json::to_string_pretty(&result).expect("sweep serializes");
        manifest.outputs.push(write_output(out_dir, SWEEP_FILE, text.as_bytes()).map_err(at(Stage::Write))?);
        manifest.sweep = Some(result);
    }
    Ok(())
}

fn initial_cloud(cfg: &ExperimentConfig, domain: &DomainModel, eps: f64) -> vortexloc::Result<ParticleCloud> {
    let n_target = cfg.n_target.unwrap_or(crate::config::DEFAULT_N_TARGET);
    let clouds = cfg
        .vortices
        .iter()
        .map(|v| make_initial_cloud(domain, Vec2::new(v.x, v.y), eps, v.a, n_target, InitialProfile::Uniform))
        .collect::<vortexloc::Result<Vec<_>>>()?;
    ParticleCloud::merge(clouds)
}

fn run_member(
    cfg: &ExperimentConfig,
    domain: &DomainModel,
    field: &RegularizedField,
    ode: &OdeSolution,
    eps: f64,
    dir: &str,
    out_dir: &Path,
) -> Result<(MemberSummary, Vec<OutputFile>), RunError> {
    let cloud0 = initial_cloud(cfg, domain, eps).map_err(at(Stage::Blob))?;
    info!("epsilon = {eps}: {} particles, {} mode", cloud0.len(), field.mode);
    let traj = run(field, &cloud0, cfg.t_end, cfg.dt, cfg.record_every).map_err(at(Stage::Blob))?;

    let diag = diagnose(&traj, domain, Some(ode)).map_err(at(Stage::Diagnostics))?;
    let samples = cfg.lipschitz_samples.unwrap_or(crate::config::DEFAULT_LIPSCHITZ_SAMPLES);
    let bounds = measure_force_bounds(field, &traj, samples).map_err(at(Stage::Diagnostics))?;
    let final_cloud = traj.final_cloud().ok_or_else(|| at(Stage::Diagnostics)(Error::InsufficientData("empty run".into())))?;
    let discrepancy = distribution_check(&cloud0, &final_cloud).map_err(at(Stage::Diagnostics))?;
    let blobs = cloud0.blob_count();

    let mut summary = MemberSummary {
        epsilon: eps,
        dir: dir.to_string(),
        mode: field.mode,
        n_particles: cloud0.len(),
        steps: traj.steps,
        records: traj.len(),
        sup_center_err: vec![0.0; blobs],
        max_support_radius: vec![0.0; blobs],
        initial_inertia: Vec::with_capacity(blobs),
        force_sup: bounds.sup,
        force_lipschitz: bounds.lipschitz,
        gronwall_violations: Vec::with_capacity(blobs),
        gronwall_first_violation: Vec::with_capacity(blobs),
        gronwall_max_ratio: Vec::with_capacity(blobs),
        exit_events: traj.count_events(EventKind::ExitedDomain),
        band_events: traj.count_events(EventKind::EnteredBand),
        circulation_initial: (0..blobs).map(|b| cloud0.total_weight(b)).collect(),
        circulation_final: (0..blobs).map(|b| final_cloud.total_weight(b)).collect(),
        distribution_discrepancy: discrepancy,
        min_clearance: diag.iter().map(|d| d.boundary_clearance).fold(f64::INFINITY, f64::min),
    };
    for d in &diag {
        summary.sup_center_err[d.blob] = summary.sup_center_err[d.blob].max(d.dist_to_ode);
        summary.max_support_radius[d.blob] = summary.max_support_radius[d.blob].max(d.support_radius);
    }
    for b in 0..blobs {
        summary.initial_inertia.push(measure(&cloud0, b).map_err(at(Stage::Diagnostics))?.inertia);
        let report = check_gronwall(&traj, b, bounds.lipschitz).map_err(at(Stage::Diagnostics))?;
        summary.gronwall_violations.push(report.violations());
        summary.gronwall_first_violation.push(report.first_violation);
        summary.gronwall_max_ratio.push(report.max_ratio);
    }

    let files = write_member(cfg, field, &traj, &diag, &summary, dir, out_dir).map_err(at(Stage::Write))?;
    Ok((summary, files))
}

fn write_member(
    cfg: &ExperimentConfig,
    field: &RegularizedField,
    traj: &BlobTrajectory,
    diag: &[vortexloc::diagnostics::BlobDiagnostics],
    summary: &MemberSummary,
    dir: &str,
    out_dir: &Path,
) -> vortexloc::Result<Vec<OutputFile>> {
    let mut files = Vec::new();
    let mut buf = Vec::new();
    write_diagnostics_csv(diag, &mut buf)?;
    files.push(write_output(out_dir, &join_rel(dir, DIAGNOSTICS_FILE), &buf)?);

    let mut events = format!("{EVENTS_HEADER}\n");
    for e in &traj.events {
        let kind = match e.kind {
            EventKind::ExitedDomain => "exited_domain",
            EventKind::EnteredBand => "entered_band",
        };
        events.push_str(&format!("{},{},{},{}\n", e.time, e.particle, e.blob, kind));
    }
    files.push(write_output(out_dir, &join_rel(dir, EVENTS_FILE), events.as_bytes())?);

    let picks = evenly_spaced(traj.len(), cfg.snapshot_count.unwrap_or(crate::config::DEFAULT_SNAPSHOTS));
    let mut index = SnapshotManifest {
        epsilon: summary.epsilon,
        n_particles: summary.n_particles,
        dt: traj.dt,
        mode: field.mode,
        rho0: field.rho0(),
        times: Vec::with_capacity(picks.len()),
        files: Vec::with_capacity(picks.len()),
    };
    for k in picks {
        let name = format!("snapshots/snapshot_{k:06}.csv");
        let mut buf = Vec::new();
        write_snapshot_csv(&traj.cloud_at(k), &mut buf)?;
        files.push(write_output(out_dir, &join_rel(dir, &name), &buf)?);
        index.times.push(traj.times[k]);
        index.files.push(name);
    }
    let text = serde_json::to_string_pretty(&index).expect("snapshot index serializes");
    files.push(write_output(out_dir, &join_rel(dir, SNAPSHOT_INDEX_FILE), text.as_bytes())?);
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    files.push(write_output(out_dir, &join_rel(dir, SUMMARY_FILE), text.as_bytes())?);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str, dir: &Path) -> ExperimentConfig {
        ExperimentConfig::parse(&format!("{text}\noutput_dir = {}\n", dir.display())).unwrap()
    }

    #[test]
    fn point_vortex_run_closes_its_orbit() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config("scenario = PointVortexOnly\nvortices = 0.5,0,1\nT = 30", tmp.path());
        let m = run_experiment(&cfg).unwrap();
        assert_eq!(m.status, RunStatus::Complete);
        assert_eq!(m.outputs.len(), 1);
        let text = fs::read_to_string(tmp.path().join(TRAJECTORY_FILE)).unwrap();
        let t_orbit = 3.0 * std::f64::consts::PI.powi(2);
        let row = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
            .min_by(|a, b| (a[0] - t_orbit).abs().total_cmp(&(b[0] - t_orbit).abs()))
            .unwrap();
        // nearest recorded time is within dt/2 of the period; the orbit speed is 1/(3π)
        let drift = (Vec2::new(row[1], row[2]) - Vec2::new(0.5, 0.0)).norm();
        assert!(drift < 1e-5 + 0.5e-3 / (3.0 * std::f64::consts::PI), "{drift}");
        assert!(tmp.path().join(MANIFEST_FILE).exists());
    }

    #[test]
    fn blob_run_writes_digested_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(
            "scenario = SingleBlob\nvortices = 0.5,0,1\nT = 0.1\ndt = 0.01\nepsilon = 0.1\nn_target = 64\nrecord_every = 2",
            tmp.path(),
        );
        let m = run_experiment(&cfg).unwrap();
        assert!((m.rho0.unwrap() - 0.45).abs() < 1e-8);
        let s = &m.members[0];
        assert_eq!(s.exit_events + s.band_events, 0);
        assert_eq!(s.circulation_initial, s.circulation_final);
        for f in &m.outputs {
            let bytes = fs::read(tmp.path().join(&f.path)).unwrap();
            assert_eq!(hex::encode(Sha256::digest(&bytes)), f.sha256);
        }
        assert!(m.output("diagnostics.csv").is_some());
        assert!(m.output("snapshots.json").is_some());
        let again = run_experiment(&cfg).unwrap();
        assert_eq!(again.outputs, m.outputs);
    }

    #[test]
    fn halted_run_is_flagged_partial() {
        let tmp = tempfile::tempdir().unwrap();
        // dt = 0.5 makes the halt threshold wider than the distance to the boundary
        let cfg = config("scenario = PointVortexOnly\nvortices = 0.9,0,1\nT = 20\ndt = 0.5", tmp.path());
        let err = run_experiment(&cfg).unwrap_err();
        assert_eq!(err.stage(), Stage::Ode);
        assert_eq!(err.exit_code(), 3);
        let m = RunManifest::read(&tmp.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(m.status, RunStatus::Partial);
        assert_eq!(m.failed_stage, Some(Stage::Ode));
    }

    #[test]
    fn output_root_override_applies_to_relative_paths_only() {
        let abs = Path::new("/tmp/x");
        assert_eq!(resolve_output_dir(abs), abs);
    }
}
