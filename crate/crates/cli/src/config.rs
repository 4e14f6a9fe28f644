//! Flat `key = value` experiment configuration.
//!
//! One entry per line, `#` starts a comment. Keys:
//!
//! | key                 | scenarios          | value                                      | default        |
//! |---------------------|--------------------|--------------------------------------------|----------------|
//! | `scenario`          | all                | `PointVortexOnly`, `SingleBlob`, `KBlob`, `Sweep` | required |
//! | `domain`            | all                | see [`DomainSpec`]                         | `unit_disk`    |
//! | `vortices`          | all                | `x,y,a; x,y,a; ...`                        | required       |
//! | `T`                 | all                | horizon, > 0                               | required       |
//! | `dt`                | all                | step, > 0                                  | `0.001`        |
//! | `epsilon`           | SingleBlob, KBlob  | blob radius                                | required       |
//! | `epsilons`          | Sweep              | strictly decreasing list `e1, e2, ...`     | required       |
//! | `n_target`          | blob scenarios     | particles per blob, ≥ 16                   | `4000`         |
//! | `mode`              | blob scenarios     | `SingleBlob`, `ExactGreen` (`KBlob` for KBlob) | by scenario |
//! | `record_every`      | all                | steps between recorded states              | `10`           |
//! | `snapshot_count`    | blob scenarios     | particle snapshots written per run         | `6`            |
//! | `lipschitz_samples` | blob scenarios     | snapshots used to measure the force bounds | `50`           |
//! | `output_dir`        | all                | output directory                           | `out`          |
//! | `seed`              | all                | seed for randomized sampling               | `0`            |
//! | `workers`           | all                | worker threads                             | `1`            |
//!
//! Every effective value, defaults included, is written back by [`ExperimentConfig::serialize`]
//! and echoed into the run manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use vortexloc::blob::FieldMode;
use vortexloc::geometry::{DiskRotation, DomainModel, MobiusAutomorphism, QuadraticMap, ScaledDisk};
use vortexloc::num_complex::Complex64;
use vortexloc::pointvortex::VortexConfig;
use vortexloc::Vec2;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("key '{0}' given more than once")]
    Duplicate(String),
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("missing required key '{0}'")]
    Missing(&'static str),
    #[error("key '{key}': {msg}")]
    Invalid { key: &'static str, msg: String },
}

fn invalid(key: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    PointVortexOnly,
    SingleBlob,
    KBlob,
    Sweep,
}

impl Scenario {
    pub fn has_blobs(self) -> bool {
        self != Scenario::PointVortexOnly
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::PointVortexOnly => "PointVortexOnly",
            Scenario::SingleBlob => "SingleBlob",
            Scenario::KBlob => "KBlob",
            Scenario::Sweep => "Sweep",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "PointVortexOnly" => Ok(Scenario::PointVortexOnly),
            "SingleBlob" => Ok(Scenario::SingleBlob),
            "KBlob" => Ok(Scenario::KBlob),
            "Sweep" => Ok(Scenario::Sweep),
            other => Err(format!("unknown scenario '{other}'")),
        }
    }
}

/// Domain selection.
///
/// - `unit_disk`
/// - `rotated_disk(angle)`: the unit disk seen through a rotation
/// - `mobius(re, im)`: the unit disk seen through the automorphism moving `re + i im` to 0
/// - `scaled_disk(cx, cy, r)`
/// - `quadratic(re, im)`: image of the unit disk under `z + a z²`, `0 < |a| < 1/2`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainSpec {
    UnitDisk,
    RotatedDisk { angle: f64 },
    Mobius { re: f64, im: f64 },
    ScaledDisk { cx: f64, cy: f64, r: f64 },
    Quadratic { re: f64, im: f64 },
}

impl DomainSpec {
    pub fn build(&self) -> vortexloc::Result<DomainModel> {
        Ok(match *self {
            DomainSpec::UnitDisk => DomainModel::unit_disk(),
            DomainSpec::RotatedDisk { angle } => DomainModel::pullback(Arc::new(DiskRotation { angle })),
            DomainSpec::Mobius { re, im } => {
                DomainModel::pullback(Arc::new(MobiusAutomorphism::new(Complex64::new(re, im))?))
            }
            DomainSpec::ScaledDisk { cx, cy, r } => DomainModel::pullback(Arc::new(ScaledDisk::new(Vec2::new(cx, cy), r)?)),
            DomainSpec::Quadratic { re, im } => DomainModel::pullback(Arc::new(QuadraticMap::new(Complex64::new(re, im))?)),
        })
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DomainSpec::UnitDisk => write!(f, "unit_disk"),
            DomainSpec::RotatedDisk { angle } => write!(f, "rotated_disk({angle})"),
            DomainSpec::Mobius { re, im } => write!(f, "mobius({re}, {im})"),
            DomainSpec::ScaledDisk { cx, cy, r } => write!(f, "scaled_disk({cx}, {cy}, {r})"),
            DomainSpec::Quadratic { re, im } => write!(f, "quadratic({re}, {im})"),
        }
    }
}

impl FromStr for DomainSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let inner = s[open + 1..].strip_suffix(')').ok_or_else(|| format!("missing ')' in '{s}'"))?;
                (s[..open].trim(), parse_floats(inner)?)
            }
            None => (s, Vec::new()),
        };
        let want = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("domain '{name}' takes {n} arguments, got {}", args.len()))
            }
        };
        match name {
            "unit_disk" => want(0).map(|_| DomainSpec::UnitDisk),
            "rotated_disk" => want(1).map(|_| DomainSpec::RotatedDisk { angle: args[0] }),
            "mobius" => want(2).map(|_| DomainSpec::Mobius { re: args[0], im: args[1] }),
            "scaled_disk" => want(3).map(|_| DomainSpec::ScaledDisk { cx: args[0], cy: args[1], r: args[2] }),
            "quadratic" => want(2).map(|_| DomainSpec::Quadratic { re: args[0], im: args[1] }),
            other => Err(format!("unknown domain '{other}'")),
        }
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexSpec {
    pub x: f64,
    pub y: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub domain: DomainSpec,
    pub vortices: Vec<VortexSpec>,
    pub t_end: f64,
    pub dt: f64,
    pub epsilon: Option<f64>,
    pub epsilons: Option<Vec<f64>>,
    pub n_target: Option<usize>,
    pub mode: Option<FieldMode>,
    pub record_every: usize,
    pub snapshot_count: Option<usize>,
    pub lipschitz_samples: Option<usize>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub workers: usize,
}

const KEYS: [&str; 15] = [
    "scenario",
    "domain",
    "vortices",
    "T",
    "dt",
    "epsilon",
    "epsilons",
    "n_target",
    "mode",
    "record_every",
    "snapshot_count",
    "lipschitz_samples",
    "output_dir",
    "seed",
    "workers",
];

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_N_TARGET: usize = 4000;
pub const DEFAULT_RECORD_EVERY: usize = 10;
pub const DEFAULT_SNAPSHOTS: usize = 6;
pub const DEFAULT_LIPSCHITZ_SAMPLES: usize = 50;

impl ExperimentConfig {
    /// Parses and validates a configuration text.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let entries = read_entries(text)?;
        let cfg = Self::from_entries(entries)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_entries(mut e: BTreeMap<String, (usize, String)>) -> Result<Self, ConfigError> {
        let mut take = |key: &'static str| e.remove(key);
        let scenario: Scenario = parse_required(take("scenario"), "scenario")?;
        let domain = parse_optional(take("domain"), "domain")?.unwrap_or(DomainSpec::UnitDisk);
        let vortices = match take("vortices") {
            Some((_, v)) => parse_vortices(&v)?,
            None => return Err(ConfigError::Missing("vortices")),
        };
        let t_end = parse_required(take("T"), "T")?;
        let dt = parse_optional(take("dt"), "dt")?.unwrap_or(DEFAULT_DT);
        let epsilon = parse_optional(take("epsilon"), "epsilon")?;
        let epsilons = match take("epsilons") {
            Some((_, v)) => Some(parse_floats(&v).map_err(|m| invalid("epsilons", m))?),
            None => None,
        };
        let n_target = parse_optional(take("n_target"), "n_target")?;
        let mode = parse_optional(take("mode"), "mode")?;
        let record_every = parse_optional(take("record_every"), "record_every")?.unwrap_or(DEFAULT_RECORD_EVERY);
        let snapshot_count = parse_optional(take("snapshot_count"), "snapshot_count")?;
        let lipschitz_samples = parse_optional(take("lipschitz_samples"), "lipschitz_samples")?;
        let output_dir = take("output_dir").map(|(_, v)| PathBuf::from(v)).unwrap_or_else(|| PathBuf::from("out"));
        let seed = parse_optional(take("seed"), "seed")?.unwrap_or(0);
        let workers = parse_optional(take("workers"), "workers")?.unwrap_or(1);
        if let Some(key) = e.keys().next() {
            return Err(ConfigError::UnknownKey(key.clone()));
        }

        let blobs = scenario.has_blobs();
        let fill = |v: Option<usize>, d: usize| if blobs { v.or(Some(d)) } else { v };
        let mode = match (scenario, mode) {
            (Scenario::SingleBlob | Scenario::Sweep, None) => Some(FieldMode::SingleBlob),
            (Scenario::KBlob, None) => Some(FieldMode::KBlob),
            (_, m) => m,
        };
        Ok(ExperimentConfig {
            scenario,
            domain,
            vortices,
            t_end,
            dt,
            epsilon,
            epsilons,
            n_target: fill(n_target, DEFAULT_N_TARGET),
            mode,
            record_every,
            snapshot_count: fill(snapshot_count, DEFAULT_SNAPSHOTS),
            lipschitz_samples: fill(lipschitz_samples, DEFAULT_LIPSCHITZ_SAMPLES),
            output_dir,
            seed,
            workers,
        })
    }

    /// Checks every value and the scenario-specific key set.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |key: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, format!("must be positive and finite, got {v}")))
            }
        };
        positive("T", self.t_end)?;
        positive("dt", self.dt)?;
        if self.dt > self.t_end {
            return Err(invalid("dt", format!("step {} exceeds the horizon {}", self.dt, self.t_end)));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(invalid("workers", "must be at least 1"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(invalid("output_dir", "must not be empty"));
        }
        if self.vortices.is_empty() {
            return Err(invalid("vortices", "at least one vortex is required"));
        }
        let domain = self.domain.build().map_err(|e| invalid("domain", e.to_string()))?;
        let ode = self.vortex_config().map_err(|e| invalid("vortices", e.to_string()))?;
        ode.validate_in(&domain).map_err(|e| invalid("vortices", e.to_string()))?;

        let blobs = self.scenario.has_blobs();
        let forbid = |key: &'static str, present: bool| {
            if present {
                Err(invalid(key, format!("not used by scenario {}", self.scenario)))
            } else {
                Ok(())
            }
        };
        if !blobs {
            forbid("epsilon", self.epsilon.is_some())?;
            forbid("epsilons", self.epsilons.is_some())?;
            forbid("n_target", self.n_target.is_some())?;
            forbid("mode", self.mode.is_some())?;
            forbid("snapshot_count", self.snapshot_count.is_some())?;
            forbid("lipschitz_samples", self.lipschitz_samples.is_some())?;
            return Ok(());
        }

        match self.scenario {
            Scenario::Sweep => {
                forbid("epsilon", self.epsilon.is_some())?;
                let eps = self.epsilons.as_ref().ok_or(ConfigError::Missing("epsilons"))?;
                if eps.is_empty() {
                    return Err(invalid("epsilons", "list is empty"));
                }
                if eps.windows(2).any(|w| !(w[0] > w[1])) {
                    return Err(invalid("epsilons", "must be strictly decreasing"));
                }
            }
            _ => {
                forbid("epsilons", self.epsilons.is_some())?;
                self.epsilon.ok_or(ConfigError::Missing("epsilon"))?;
            }
        }
        for eps in self.blob_epsilons() {
            positive(if self.scenario == Scenario::Sweep { "epsilons" } else { "epsilon" }, eps)?;
            for v in &self.vortices {
                let clearance = domain.dist_to_boundary(Vec2::new(v.x, v.y));
                if clearance <= eps {
                    return Err(invalid(
                        "vortices",
                        format!("blob of radius {eps} at ({}, {}) overlaps the boundary", v.x, v.y),
                    ));
                }
            }
        }
        if self.vortices.len() != 1 && self.scenario != Scenario::KBlob {
            return Err(invalid("vortices", format!("scenario {} takes exactly one vortex", self.scenario)));
        }
        let mode = self.mode.ok_or(ConfigError::Missing("mode"))?;
        match (self.scenario, mode) {
            (Scenario::KBlob, FieldMode::KBlob) => {}
            (Scenario::KBlob, m) => return Err(invalid("mode", format!("scenario KBlob requires mode KBlob, got {m}"))),
            (_, FieldMode::KBlob) => return Err(invalid("mode", "mode KBlob requires scenario KBlob")),
            _ => {}
        }
        if self.n_target.is_some_and(|n| n < 16) {
            return Err(invalid("n_target", "must be at least 16"));
        }
        if self.snapshot_count.is_some_and(|n| n == 0) {
            return Err(invalid("snapshot_count", "must be at least 1"));
        }
        if self.lipschitz_samples.is_some_and(|n| n == 0) {
            return Err(invalid("lipschitz_samples", "must be at least 1"));
        }
        Ok(())
    }

    pub fn vortex_config(&self) -> vortexloc::Result<VortexConfig> {
        VortexConfig::new(
            self.vortices.iter().map(|v| Vec2::new(v.x, v.y)).collect(),
            self.vortices.iter().map(|v| v.a).collect(),
        )
    }

    /// The blob radii this configuration runs, in order.
    pub fn blob_epsilons(&self) -> Vec<f64> {
        match (self.epsilon, &self.epsilons) {
            (_, Some(list)) => list.clone(),
            (Some(e), None) => vec![e],
            (None, None) => Vec::new(),
        }
    }

    /// Writes every effective value in the configuration format.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("scenario", self.scenario.to_string());
        put("domain", self.domain.to_string());
        put(
            "vortices",
            self.vortices.iter().map(|v| format!("{},{},{}", v.x, v.y, v.a)).collect::<Vec<_>>().join("; "),
        );
        put("T", self.t_end.to_string());
        put("dt", self.dt.to_string());
        if let Some(e) = self.epsilon {
            put("epsilon", e.to_string());
        }
        if let Some(list) = &self.epsilons {
            put("epsilons", list.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", "));
        }
        if let Some(n) = self.n_target {
            put("n_target", n.to_string());
        }
        if let Some(m) = self.mode {
            put("mode", m.to_string());
        }
        put("record_every", self.record_every.to_string());
        if let Some(n) = self.snapshot_count {
            put("snapshot_count", n.to_string());
        }
        if let Some(n) = self.lipschitz_samples {
            put("lipschitz_samples", n.to_string());
        }
        put("output_dir", self.output_dir.display().to_string());
        put("seed", self.seed.to_string());
        put("workers", self.workers.to_string());
        out
    }
}

fn read_entries(text: &str) -> Result<BTreeMap<String, (usize, String)>, ConfigError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: n + 1, msg: format!("expected 'key = value', got '{line}'") })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        if v.is_empty() {
            return Err(ConfigError::Syntax { line: n + 1, msg: format!("key '{k}' has no value") });
        }
        if map.insert(k.to_string(), (n + 1, v.to_string())).is_some() {
            return Err(ConfigError::Duplicate(k.to_string()));
        }
    }
    Ok(map)
}

fn parse_optional<T: FromStr>(entry: Option<(usize, String)>, key: &'static str) -> Result<Option<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    entry.map(|(_, v)| v.parse::<T>().map_err(|e| invalid(key, format!("'{v}': {e}")))).transpose()
}

fn parse_required<T: FromStr>(entry: Option<(usize, String)>, key: &'static str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    parse_optional(entry, key)?.ok_or(ConfigError::Missing(key))
}

fn parse_vortices(s: &str) -> Result<Vec<VortexSpec>, ConfigError> {
    s.split(';')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let v = parse_floats(t).map_err(|m| invalid("vortices", m))?;
            match v[..] {
                [x, y, a] => Ok(VortexSpec { x, y, a }),
                _ => Err(invalid("vortices", format!("'{t}' must be 'x,y,a'"))),
            }
        })
        .collect()
}
