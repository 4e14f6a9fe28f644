//! Particle discretization of concentrated vorticity and its evolution under
//! the boundary-regularized velocity field.
//!
//! The velocity at `x` induced by particles `(p_j, w_j)` is
//!
//! ```text
//! v(x) = J∇ₓ Σ w_j Γ(x, p_j) - F(x),    F(x) = J∇ₓ[θ(x) Σ w_j χ(p_j) h(x, p_j)]
//! ```
//!
//! In [`FieldMode::ExactGreen`] the cutoffs are replaced by one, which gives
//! the plain Green-function velocity `J∇ₓ Σ w_j G(x, p_j)`.

use std::io::{BufRead, Write};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::{build_cutoffs, CutoffPair, SmoothedLog};
use crate::geometry::{rotate_cw, DomainModel, INV_2PI};
use crate::kernel::{self, KernelSpec, PairSums, Sources, Targets, NO_SKIP};
use crate::sum::KahanVec2;
use crate::{Error, Point2, Result, Vec2};

/// Pairs closer than this are treated as coincident.
pub const SINGULAR_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialProfile {
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleCloud {
    pub positions: Vec<Point2>,
    pub weights: Vec<f64>,
    pub blob_id: Vec<usize>,
    pub epsilon: f64,
    pub vorticity_values: Vec<f64>,
}

impl ParticleCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn blob_count(&self) -> usize {
        self.blob_id.iter().max().map_or(0, |m| m + 1)
    }

    /// Indices of the particles belonging to `blob`, ascending.
    pub fn members(&self, blob: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.blob_id[i] == blob).collect()
    }

    /// Concatenates single-blob clouds, numbering blobs in the given order.
    pub fn merge(clouds: Vec<ParticleCloud>) -> Result<ParticleCloud> {
        let first = clouds.first().ok_or_else(|| Error::Structure("no clouds to merge".into()))?;
        let epsilon = first.epsilon;
        let mut out = ParticleCloud {
            positions: Vec::new(),
            weights: Vec::new(),
            blob_id: Vec::new(),
            epsilon,
            vorticity_values: Vec::new(),
        };
        for (b, c) in clouds.into_iter().enumerate() {
            if c.epsilon != epsilon {
                return Err(Error::Structure(format!("blob {b} has epsilon {} but blob 0 has {epsilon}", c.epsilon)));
            }
            out.blob_id.extend(std::iter::repeat_n(b, c.len()));
            out.positions.extend(c.positions);
            out.weights.extend(c.weights);
            out.vorticity_values.extend(c.vorticity_values);
        }
        Ok(out)
    }

    pub fn total_weight(&self, blob: usize) -> f64 {
        crate::sum::KahanSum::sum_iter(self.members(blob).into_iter().map(|i| self.weights[i]))
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.len();
        if self.weights.len() != n || self.blob_id.len() != n || self.vorticity_values.len() != n {
            return Err(Error::Structure("particle arrays have different lengths".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Structure(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Lays particles on the cell centers of a square grid restricted to `B_eps(z0)`.
///
/// The cell size `eps·sqrt(π / n_target)` puts about `n_target` cells in the
/// disk. The grid is centered on `z0`, so the cloud is symmetric about it.
pub fn make_initial_cloud(
    domain: &DomainModel,
    z0: Point2,
    eps: f64,
    a: f64,
    n_target: usize,
    profile: InitialProfile,
) -> Result<ParticleCloud> {
    if n_target < 16 {
        return Err(Error::config(format!("n_target must be at least 16, got {n_target}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config(format!("epsilon must be positive, got {eps}")));
    }
    if !(a.is_finite() && a != 0.0) {
        return Err(Error::config(format!("blob strength must be finite and nonzero, got {a}")));
    }
    if !z0.is_finite() || !domain.contains(z0) {
        return Err(Error::OutsideDomain { x: z0.x, y: z0.y });
    }
    let clearance = domain.dist_to_boundary(z0);
    if clearance <= eps {
        return Err(Error::config(format!(
            "blob of radius {eps} at ({}, {}) overlaps the boundary (clearance {clearance})",
            z0.x, z0.y
        )));
    }
    let InitialProfile::Uniform = profile;
    let cell = eps * (std::f64::consts::PI / n_target as f64).sqrt();
    let omega0 = a / (std::f64::consts::PI * eps * eps);
    let m = (eps / cell).ceil() as i64 + 1;
    let mut offsets = Vec::new();
    for j in -m..=m {
        for i in -m..=m {
            let off = Vec2::new(i as f64 * cell, j as f64 * cell);
            if off.norm_sq() < eps * eps {
                offsets.push(off);
            }
        }
    }
    let raw = omega0 * cell * cell;
    let total = raw * offsets.len() as f64;
    let weight = raw * (a / total);
    let n = offsets.len();
    Ok(ParticleCloud {
        positions: offsets.into_iter().map(|o| z0 + o).collect(),
        weights: vec![weight; n],
        blob_id: vec![0; n],
        epsilon: eps,
        vorticity_values: vec![omega0; n],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldMode {
    /// Exact Γ kernel between particles, cutoff boundary force.
    SingleBlob,
    /// Exact Γ inside a blob, smoothed logarithm across blobs, cutoff boundary force.
    KBlob,
    /// Full Green function, no cutoffs; all particles must stay in `D`.
    ExactGreen,
}

impl std::fmt::Display for FieldMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FieldMode::SingleBlob => "SingleBlob",
            FieldMode::KBlob => "KBlob",
            FieldMode::ExactGreen => "ExactGreen",
        })
    }
}

impl std::str::FromStr for FieldMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SingleBlob" => Ok(FieldMode::SingleBlob),
            "KBlob" => Ok(FieldMode::KBlob),
            "ExactGreen" => Ok(FieldMode::ExactGreen),
            other => Err(Error::Parse(format!("unknown field mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegularizedField {
    pub domain: DomainModel,
    pub cutoffs: CutoffPair,
    pub smoothed: SmoothedLog,
    pub mode: FieldMode,
}

impl RegularizedField {
    pub fn new(domain: &DomainModel, rho0: f64, mode: FieldMode) -> Result<Self> {
        Ok(Self {
            domain: domain.clone(),
            cutoffs: build_cutoffs(domain, rho0)?,
            smoothed: SmoothedLog::new(rho0)?,
            mode,
        })
    }

    pub fn rho0(&self) -> f64 {
        self.cutoffs.rho0()
    }

    fn inter_blob_c2(&self) -> f64 {
        match self.mode {
            FieldMode::KBlob => self.smoothed.cut_radius_sq(),
            _ => 0.0,
        }
    }

    fn chi(&self, p: Point2) -> f64 {
        match self.mode {
            FieldMode::ExactGreen => 1.0,
            _ => self.cutoffs.eval_chi(p),
        }
    }

    fn theta_with_grad(&self, x: Point2) -> (f64, Vec2) {
        match self.mode {
            FieldMode::ExactGreen => (1.0, Vec2::ZERO),
            _ => self.cutoffs.theta_with_grad(x),
        }
    }
}

/// Source arrays for one configuration of the cloud.
struct Prepared {
    sources: Sources,
    chi_w: Vec<f64>,
}

fn prepare(field: &RegularizedField, cloud: &ParticleCloud, positions: &[Point2]) -> Result<Prepared> {
    if field.mode == FieldMode::ExactGreen {
        if let Some(p) = positions.iter().find(|p| !field.domain.contains(**p)) {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
    }
    let n = positions.len();
    let disk = field.domain.is_unit_disk();
    let mut s = Sources {
        x: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        gamma_w: cloud.weights.clone(),
        blob: cloud.blob_id.iter().map(|&b| b as u64).collect(),
        r2: Vec::with_capacity(n),
        boundary_w: Vec::with_capacity(n),
    };
    let chi_w: Vec<f64> = positions.iter().zip(&cloud.weights).map(|(p, w)| w * field.chi(*p)).collect();
    for (p, cw) in positions.iter().zip(&chi_w) {
        s.x.push(p.x);
        s.y.push(p.y);
        let r2 = p.norm_sq();
        s.r2.push(r2);
        s.boundary_w.push(if disk { cw * r2 } else { 0.0 });
    }
    Ok(Prepared { sources: s, chi_w })
}

struct Query<'a> {
    points: &'a [Point2],
    ids: Vec<u64>,
    blobs: Vec<u64>,
    c2: f64,
}

/// Evaluates the Γ sum and the boundary force at every query point.
fn field_sums(
    field: &RegularizedField,
    positions: &[Point2],
    prep: &Prepared,
    q: &Query<'_>,
    with_gamma: bool,
) -> Result<(Vec<Vec2>, Vec<Vec2>)> {
    let disk = field.domain.is_unit_disk();
    let xs: Vec<f64> = q.points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = q.points.iter().map(|p| p.y).collect();
    let targets = Targets { x: &xs, y: &ys, id: &q.ids, blob: &q.blobs };
    let spec = KernelSpec { gamma: with_gamma, disk_boundary: disk, inter_blob_c2: q.c2 };
    let sums: Vec<PairSums> = kernel::evaluate(targets, &prep.sources, spec);

    if with_gamma {
        if let Some((i, s)) = sums
            .iter()
            .enumerate()
            .filter(|(_, s)| s.min_r2 < SINGULAR_DISTANCE * SINGULAR_DISTANCE)
            .min_by(|a, b| a.1.min_r2.total_cmp(&b.1.min_r2))
        {
            let _ = i;
            return Err(Error::Singularity { what: "particle pair", distance: s.min_r2.sqrt() });
        }
    }

    let forces: Vec<Vec2> = q
        .points
        .par_iter()
        .zip(sums.par_iter())
        .map(|(x, s)| {
            let (theta, grad_theta) = field.theta_with_grad(*x);
            if theta == 0.0 && grad_theta == Vec2::ZERO {
                return Vec2::ZERO;
            }
            let grad_h_sum = if disk {
                Vec2::new(s.boundary[0], s.boundary[1]) * (-INV_2PI)
            } else {
                let mut acc = KahanVec2::new();
                for (p, cw) in positions.iter().zip(&prep.chi_w) {
                    if *cw != 0.0 {
                        acc.add(field.domain.grad_x_regular_part_extended(*x, *p) * *cw);
                    }
                }
                acc.value()
            };
            let mut grad = grad_h_sum * theta;
            if grad_theta != Vec2::ZERO {
                let mut h_sum = crate::sum::KahanSum::new();
                for (p, cw) in positions.iter().zip(&prep.chi_w) {
                    if *cw != 0.0 {
                        h_sum.add(field.domain.regular_part_extended(*x, *p) * *cw);
                    }
                }
                grad += grad_theta * h_sum.value();
            }
            rotate_cw(grad)
        })
        .collect();

    let gammas = sums.iter().map(|s| Vec2::new(s.gamma[0], s.gamma[1]) * (-INV_2PI)).collect();
    Ok((gammas, forces))
}

/// `∇ₓ Σ w Γ` and `F` combined into the velocity.
fn combine(grad_gamma: Vec2, force: Vec2) -> Vec2 {
    rotate_cw(grad_gamma) - force
}

fn particle_query<'a>(field: &RegularizedField, cloud: &ParticleCloud, positions: &'a [Point2]) -> Query<'a> {
    Query {
        points: positions,
        ids: (0..positions.len() as u64).collect(),
        blobs: cloud.blob_id.iter().map(|&b| b as u64).collect(),
        c2: field.inter_blob_c2(),
    }
}

fn check_positions(positions: &[Point2]) -> Result<()> {
    if positions.iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("particle position"))
    }
}

/// Velocity at an arbitrary point. With `skip = Some(i)` the point is treated
/// as particle `i` (self term dropped, blob membership of `i` used for the
/// inter-blob rule); with `None` every pair uses the exact Γ kernel.
pub fn velocity_at(field: &RegularizedField, cloud: &ParticleCloud, x: Point2, skip: Option<usize>) -> Result<Vec2> {
    match skip {
        Some(i) => {
            let blob = *cloud.blob_id.get(i).ok_or_else(|| Error::Structure(format!("no particle {i}")))?;
            velocity_with(field, cloud, x, i as u64, blob as u64, field.inter_blob_c2())
        }
        None => velocity_with(field, cloud, x, NO_SKIP, 0, 0.0),
    }
}

/// Velocity at `x` seen by a member of `blob`: the smoothed kernel applies to
/// particles of the other blobs in [`FieldMode::KBlob`].
pub fn velocity_for_blob(field: &RegularizedField, cloud: &ParticleCloud, x: Point2, blob: usize) -> Result<Vec2> {
    velocity_with(field, cloud, x, NO_SKIP, blob as u64, field.inter_blob_c2())
}

fn velocity_with(field: &RegularizedField, cloud: &ParticleCloud, x: Point2, id: u64, blob: u64, c2: f64) -> Result<Vec2> {
    cloud.check_shape()?;
    if !x.is_finite() {
        return Err(Error::NonFinite("query point"));
    }
    let prep = prepare(field, cloud, &cloud.positions)?;
    let points = [x];
    let q = Query { points: &points, ids: vec![id], blobs: vec![blob], c2 };
    let (g, f) = field_sums(field, &cloud.positions, &prep, &q, true)?;
    Ok(combine(g[0], f[0]))
}

/// The boundary force `F` alone.
pub fn boundary_force(field: &RegularizedField, cloud: &ParticleCloud, x: Point2) -> Vec2 {
    boundary_forces(field, cloud, &[x]).pop().unwrap_or(Vec2::ZERO)
}

/// [`boundary_force`] at many points in one pass over the sources.
pub fn boundary_forces(field: &RegularizedField, cloud: &ParticleCloud, points: &[Point2]) -> Vec<Vec2> {
    let Ok(prep) = prepare(field, cloud, &cloud.positions) else {
        // outside D in ExactGreen mode: no boundary correction is defined there
        return vec![Vec2::ZERO; points.len()];
    };
    let q = Query { points, ids: vec![NO_SKIP; points.len()], blobs: vec![0; points.len()], c2: 0.0 };
    match field_sums(field, &cloud.positions, &prep, &q, false) {
        Ok((_, f)) => f,
        Err(_) => vec![Vec2::ZERO; points.len()],
    }
}

/// Velocity of every particle with its self term skipped.
pub fn particle_velocities(field: &RegularizedField, cloud: &ParticleCloud, positions: &[Point2]) -> Result<Vec<Vec2>> {
    check_positions(positions)?;
    let prep = prepare(field, cloud, positions)?;
    let q = particle_query(field, cloud, positions);
    let (g, f) = field_sums(field, positions, &prep, &q, true)?;
    Ok(g.into_iter().zip(f).map(|(g, f)| combine(g, f)).collect())
}

/// Only the particle-particle part `J∇ₓ Σ_{j≠i} w_j Γ(p_i, p_j)` per particle.
pub fn gamma_velocities(cloud: &ParticleCloud) -> Result<Vec<Vec2>> {
    cloud.check_shape()?;
    let n = cloud.len();
    let sources = Sources {
        x: cloud.positions.iter().map(|p| p.x).collect(),
        y: cloud.positions.iter().map(|p| p.y).collect(),
        gamma_w: cloud.weights.clone(),
        blob: vec![0; n],
        r2: vec![0.0; n],
        boundary_w: vec![0.0; n],
    };
    let ids: Vec<u64> = (0..n as u64).collect();
    let blobs = vec![0u64; n];
    let t = Targets { x: &sources.x, y: &sources.y, id: &ids, blob: &blobs };
    let sums = kernel::evaluate(t, &sources, KernelSpec { gamma: true, disk_boundary: false, inter_blob_c2: 0.0 });
    if let Some(s) = sums.iter().find(|s| s.min_r2 < SINGULAR_DISTANCE * SINGULAR_DISTANCE) {
        return Err(Error::Singularity { what: "particle pair", distance: s.min_r2.sqrt() });
    }
    Ok(sums.iter().map(|s| rotate_cw(Vec2::new(s.gamma[0], s.gamma[1]) * (-INV_2PI))).collect())
}

fn axpy(base: &[Point2], k: &[Vec2], h: f64) -> Vec<Point2> {
    base.iter().zip(k).map(|(p, v)| *p + *v * h).collect()
}

/// One RK4 step of every particle. Weights are carried unchanged.
///
/// A negative `dt` integrates backwards.
pub fn step(field: &RegularizedField, cloud: &ParticleCloud, dt: f64) -> Result<ParticleCloud> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(Error::config(format!("dt must be finite and nonzero, got {dt}")));
    }
    cloud.check_shape()?;
    let p = &cloud.positions;
    let k1 = particle_velocities(field, cloud, p)?;
    let k2 = particle_velocities(field, cloud, &axpy(p, &k1, 0.5 * dt))?;
    let k3 = particle_velocities(field, cloud, &axpy(p, &k2, 0.5 * dt))?;
    let k4 = particle_velocities(field, cloud, &axpy(p, &k3, dt))?;
    let next: Vec<Point2> =
        (0..p.len()).map(|i| p[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0)).collect();
    check_positions(&next)?;
    Ok(ParticleCloud { positions: next, ..cloud.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    /// The particle left `D`.
    ExitedDomain,
    /// The particle came closer than `ρ0/3` to the boundary.
    EnteredBand,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobEvent {
    pub time: f64,
    pub particle: usize,
    pub blob: usize,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub struct BlobTrajectory {
    /// Cloud at `t = 0`; later snapshots share its weights and blob ids.
    pub template: ParticleCloud,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<Point2>>,
    pub events: Vec<BlobEvent>,
    pub dt: f64,
    pub steps: usize,
}

impl BlobTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn cloud_at(&self, k: usize) -> ParticleCloud {
        ParticleCloud { positions: self.snapshots[k].clone(), ..self.template.clone() }
    }

    pub fn final_cloud(&self) -> Option<ParticleCloud> {
        (!self.is_empty()).then(|| self.cloud_at(self.len() - 1))
    }

    pub fn count_events(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct ParticleState {
    outside: bool,
    in_band: bool,
}

fn classify(field: &RegularizedField, p: Point2) -> ParticleState {
    if !field.domain.contains(p) {
        return ParticleState { outside: true, in_band: true };
    }
    ParticleState { outside: false, in_band: field.domain.dist_to_boundary(p) < field.rho0() / 3.0 }
}

fn record_transitions(
    field: &RegularizedField,
    cloud: &ParticleCloud,
    time: f64,
    states: &mut [ParticleState],
    events: &mut Vec<BlobEvent>,
) {
    let next: Vec<ParticleState> = cloud.positions.par_iter().map(|p| classify(field, *p)).collect();
    for (i, (old, new)) in states.iter_mut().zip(next).enumerate() {
        let blob = cloud.blob_id[i];
        if new.outside && !old.outside {
            events.push(BlobEvent { time, particle: i, blob, kind: EventKind::ExitedDomain });
        }
        if new.in_band && !old.in_band {
            events.push(BlobEvent { time, particle: i, blob, kind: EventKind::EnteredBand });
        }
        *old = new;
    }
}

/// Smallest distance between two particles, by direct search.
pub fn min_pair_distance(positions: &[Point2]) -> f64 {
    positions
        .par_iter()
        .enumerate()
        .map(|(i, p)| positions[i + 1..].iter().map(|q| (*p - *q).norm_sq()).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min)
        .sqrt()
}

/// Repeated [`step`] to `t_end`, keeping every `record_every`-th state and the final one.
pub fn run(
    field: &RegularizedField,
    cloud0: &ParticleCloud,
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<BlobTrajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::config(format!("T must be positive, got {t_end}")));
    }
    if record_every == 0 {
        return Err(Error::config("record_every must be at least 1"));
    }
    cloud0.check_shape()?;
    check_positions(&cloud0.positions)?;
    let min_dist = min_pair_distance(&cloud0.positions);
    if cloud0.len() > 1 && dt > min_dist * min_dist * std::f64::consts::PI {
        warn!("dt = {dt} exceeds the stability heuristic (min pair distance {min_dist:.3e})²·π");
    }

    let n_steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let mut states = vec![ParticleState::default(); cloud0.len()];
    let mut events = Vec::new();
    record_transitions(field, cloud0, 0.0, &mut states, &mut events);

    let mut times = vec![0.0];
    let mut snapshots = vec![cloud0.positions.clone()];
    let mut cloud = cloud0.clone();
    let mut t = 0.0;
    for k in 1..=n_steps {
        let h = if k == n_steps { t_end - t } else { dt };
        cloud = step(field, &cloud, h).map_err(|e| match e {
            Error::OutsideDomain { .. } | Error::Singularity { .. } | Error::NonFinite(_) => {
                Error::Halted { time: t, reason: e.to_string() }
            }
            other => other,
        })?;
        t = if k == n_steps { t_end } else { k as f64 * dt };
        record_transitions(field, &cloud, t, &mut states, &mut events);
        if k % record_every == 0 || k == n_steps {
            times.push(t);
            snapshots.push(cloud.positions.clone());
        }
    }
    Ok(BlobTrajectory { template: cloud0.clone(), times, snapshots, events, dt, steps: n_steps })
}

/// Snapshot header: one row per particle.
pub const SNAPSHOT_HEADER: &str = "blob_id,x,y,weight";

pub fn write_snapshot_csv<W: Write>(cloud: &ParticleCloud, mut out: W) -> Result<()> {
    writeln!(out, "{SNAPSHOT_HEADER}")?;
    for i in 0..cloud.len() {
        let p = cloud.positions[i];
        writeln!(out, "{},{},{},{}", cloud.blob_id[i], p.x, p.y, cloud.weights[i])?;
    }
    Ok(())
}

/// Reads rows written by [`write_snapshot_csv`] as `(blob_id, position, weight)`.
pub fn read_snapshot_csv<R: BufRead>(input: R) -> Result<Vec<(usize, Point2, f64)>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != SNAPSHOT_HEADER {
        return Err(Error::Parse(format!("unexpected snapshot header '{header}'")));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse(format!("snapshot row {}: '{line}'", n + 2));
        if f.len() != 4 {
            return Err(bad());
        }
        let blob = f[0].trim().parse().map_err(|_| bad())?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        rows.push((blob, Vec2::new(num(f[1])?, num(f[2])?), num(f[3])?));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub epsilon: f64,
    pub n_particles: usize,
    pub dt: f64,
    pub mode: FieldMode,
    pub rho0: f64,
    pub times: Vec<f64>,
    pub files: Vec<String>,
}
