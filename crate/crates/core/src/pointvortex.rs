//! Kirchhoff-Routh point-vortex dynamics.
//!
//! A single vortex moves by `dz/dt = -J∇H(z)`. For `k` vortices
//!
//! ```text
//! dz_i/dt = Σ_{j≠i} a_j J∇ₓG(z_i, z_j) - a_i J∇ₓh(z_i, z_i)
//! ```
//!
//! where `∇ₓ` acts on the first argument; with `k = 1`, `a = 1` this is the
//! single-vortex equation because `∇ₓh(z, z) = ∇H(z)` for symmetric `h`.
//!
//! The conserved Hamiltonian is
//! `W = Σ_{i<j} a_i a_j G(z_i, z_j) - Σ_i a_i² H(z_i)`, normalized so that
//! `a_i dz_i/dt = J∇_{z_i} W`. Single-vortex runs record `H(z)` instead.

use std::io::Write;

use crate::geometry::{grad_x_gamma, rotate_cw, DomainModel};
use crate::{Error, Point2, Result, Vec2};

/// Positions and signed circulations of `k ≥ 1` point vortices.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexConfig {
    positions: Vec<Point2>,
    strengths: Vec<f64>,
}

impl VortexConfig {
    pub fn new(positions: Vec<Point2>, strengths: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::config("at least one vortex is required"));
        }
        if positions.len() != strengths.len() {
            return Err(Error::config("positions and strengths differ in length"));
        }
        if positions.iter().any(|p| !p.is_finite()) || strengths.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("vortex configuration"));
        }
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                if positions[i] == positions[j] {
                    return Err(Error::config(format!("vortices {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { positions, strengths })
    }

    pub fn single(z: Point2) -> Result<Self> {
        Self::new(vec![z], vec![1.0])
    }

    pub fn count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Point2] {
        &self.positions
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    /// Checks that every vortex is interior to `domain`.
    pub fn validate_in(&self, domain: &DomainModel) -> Result<()> {
        for p in &self.positions {
            if !domain.contains(*p) {
                return Err(Error::OutsideDomain { x: p.x, y: p.y });
            }
        }
        Ok(())
    }

    pub fn with_positions(&self, positions: Vec<Point2>) -> Self {
        Self { positions, strengths: self.strengths.clone() }
    }

    /// Same positions with every strength negated (time-reversed dynamics).
    pub fn negated(&self) -> Self {
        Self { positions: self.positions.clone(), strengths: self.strengths.iter().map(|a| -a).collect() }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { positions: self.positions.clone(), strengths: self.strengths.iter().map(|a| a * lambda).collect() }
    }

    /// Smallest pairwise separation, `∞` for a single vortex.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.positions.len() {
            for j in i + 1..self.positions.len() {
                best = best.min((self.positions[i] - self.positions[j]).norm());
            }
        }
        best
    }
}

/// Time series of vortex configurations from a fixed-step integration.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<VortexConfig>,
    /// `H(z)` for one vortex, `W` for several; empty for [`integrate_center`].
    pub hamiltonian_series: Vec<f64>,
}

impl OdeSolution {
    pub fn final_state(&self) -> &VortexConfig {
        self.states.last().expect("solutions always hold the initial state")
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Position of vortex `i` at time `t`, linear between recorded states.
    pub fn position_at(&self, i: usize, t: f64) -> Result<Point2> {
        let first = self.times[0];
        let last = self.duration();
        let slack = 1e-9 * (1.0 + last.abs());
        if t < first - slack || t > last + slack {
            return Err(Error::InsufficientData(format!("t = {t} lies outside [{first}, {last}]")));
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return Ok(self.states[0].positions[i]);
        }
        if k >= self.times.len() {
            return Ok(self.final_state().positions[i]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let s = (t - t0) / (t1 - t0);
        let (p0, p1) = (self.states[k - 1].positions[i], self.states[k].positions[i]);
        Ok(p0 + (p1 - p0) * s)
    }

    /// CSV with columns `t, z1x, z1y, ..., zkx, zky, W`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let k = self.states.first().map_or(0, VortexConfig::count);
        let mut header = String::from("t");
        for i in 1..=k {
            header.push_str(&format!(",z{i}x,z{i}y"));
        }
        header.push_str(",W");
        writeln!(out, "{header}")?;
        for (n, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            write!(out, "{t}")?;
            for p in &s.positions {
                write!(out, ",{},{}", p.x, p.y)?;
            }
            match self.hamiltonian_series.get(n) {
                Some(w) => writeln!(out, ",{w}")?,
                None => writeln!(out, ",")?,
            }
        }
        Ok(())
    }
}

/// `-J∇H(z)`.
pub fn kr_velocity_single(domain: &DomainModel, z: Point2) -> Result<Vec2> {
    Ok(-rotate_cw(domain.grad_robin(z)?))
}

/// Velocity of vortex `i` in a `k`-vortex configuration.
pub fn kr_velocity_k(domain: &DomainModel, cfg: &VortexConfig, i: usize) -> Result<Vec2> {
    if i >= cfg.count() {
        return Err(Error::config(format!("vortex index {i} out of range")));
    }
    let zi = cfg.positions[i];
    let mut grad = domain.grad_x_regular_part(zi, zi)? * (-cfg.strengths[i]);
    for (j, (&zj, &aj)) in cfg.positions.iter().zip(&cfg.strengths).enumerate() {
        if j == i {
            continue;
        }
        if zj == zi {
            return Err(Error::Singularity { what: "coincident point vortices", distance: 0.0 });
        }
        let grad_g = grad_x_gamma(zi, zj)? - domain.grad_x_regular_part(zi, zj)?;
        grad += grad_g * aj;
    }
    Ok(rotate_cw(grad))
}

fn velocities(domain: &DomainModel, cfg: &VortexConfig) -> Result<Vec<Vec2>> {
    (0..cfg.count()).map(|i| kr_velocity_k(domain, cfg, i)).collect()
}

/// `H(z)` for a single vortex, the Kirchhoff-Routh Hamiltonian `W` otherwise.
pub fn hamiltonian(domain: &DomainModel, cfg: &VortexConfig) -> Result<f64> {
    if cfg.count() == 1 {
        return domain.robin(cfg.positions[0]);
    }
    let mut w = 0.0;
    for i in 0..cfg.count() {
        let (zi, ai) = (cfg.positions[i], cfg.strengths[i]);
        w -= ai * ai * domain.robin(zi)?;
        for j in i + 1..cfg.count() {
            w += ai * cfg.strengths[j] * domain.green(zi, cfg.positions[j])?.g;
        }
    }
    Ok(w)
}

/// Step count and step size so the last step lands exactly on `t_end`.
fn schedule(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::config(format!("integration horizon must be positive, got {t_end}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!("time step must be positive, got {dt}")));
    }
    let n = (t_end / dt - 1e-9).ceil().max(1.0);
    Ok(n as usize)
}

fn time_of(step: usize, n_steps: usize, t_end: f64, dt: f64) -> f64 {
    if step == n_steps {
        t_end
    } else {
        step as f64 * dt
    }
}

fn axpy(base: &[Point2], k: &[Vec2], h: f64) -> Vec<Point2> {
    base.iter().zip(k).map(|(p, v)| *p + *v * h).collect()
}

/// Classical RK4 for the Kirchhoff-Routh system with fixed step `dt`.
///
/// Halts with [`Error::Halted`] when a vortex comes within
/// `2·dt·(max speed so far)` of the boundary or of another vortex.
pub fn integrate(domain: &DomainModel, cfg0: &VortexConfig, t_end: f64, dt: f64) -> Result<OdeSolution> {
    cfg0.validate_in(domain)?;
    let n_steps = schedule(t_end, dt)?;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut energy = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    states.push(cfg0.clone());
    energy.push(hamiltonian(domain, cfg0)?);

    let mut max_speed: f64 = 0.0;
    let mut cfg = cfg0.clone();
    for step in 1..=n_steps {
        let t0 = times[step - 1];
        let t1 = time_of(step, n_steps, t_end, dt);
        let h = t1 - t0;
        let p = cfg.positions.clone();
        let stage = |pos: Vec<Point2>| -> Result<Vec<Vec2>> { velocities(domain, &cfg.with_positions(pos)) };
        let k1 = stage(p.clone()).map_err(|e| halt_from(e, t0))?;
        max_speed = k1.iter().fold(max_speed, |m, v| m.max(v.norm()));
        check_clearance(domain, &cfg, 2.0 * dt * max_speed, t0)?;
        let k2 = stage(axpy(&p, &k1, 0.5 * h)).map_err(|e| halt_from(e, t0))?;
        let k3 = stage(axpy(&p, &k2, 0.5 * h)).map_err(|e| halt_from(e, t0))?;
        let k4 = stage(axpy(&p, &k3, h)).map_err(|e| halt_from(e, t0))?;
        let next: Vec<Point2> = (0..p.len())
            .map(|i| p[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0))
            .collect();
        cfg = cfg.with_positions(next);
        check_clearance(domain, &cfg, 2.0 * dt * max_speed, t1)?;
        times.push(t1);
        energy.push(hamiltonian(domain, &cfg).map_err(|e| halt_from(e, t1))?);
        states.push(cfg.clone());
    }
    Ok(OdeSolution { times, states, hamiltonian_series: energy })
}

fn halt_from(e: Error, time: f64) -> Error {
    match e {
        Error::OutsideDomain { .. } | Error::Singularity { .. } => Error::Halted { time, reason: e.to_string() },
        other => other,
    }
}

fn check_clearance(domain: &DomainModel, cfg: &VortexConfig, threshold: f64, time: f64) -> Result<()> {
    for (i, p) in cfg.positions.iter().enumerate() {
        if !domain.contains(*p) || domain.dist_to_boundary(*p) <= threshold {
            return Err(Error::Halted { time, reason: format!("vortex {i} reached the boundary layer") });
        }
        for (j, q) in cfg.positions.iter().enumerate().skip(i + 1) {
            if (*p - *q).norm() <= threshold {
                return Err(Error::Halted { time, reason: format!("vortices {i} and {j} nearly collided") });
            }
        }
    }
    Ok(())
}

/// Safety radius: 0.9 × the smallest clearance (boundary or other vortex)
/// over every recorded state of the solution.
pub fn select_rho0(sol: &OdeSolution, domain: &DomainModel) -> Result<f64> {
    let mut clearance = f64::INFINITY;
    for state in &sol.states {
        for p in &state.positions {
            clearance = clearance.min(domain.dist_to_boundary(*p));
        }
        clearance = clearance.min(state.min_separation());
    }
    if !(clearance > 1e-9) || !clearance.is_finite() {
        return Err(Error::config(format!("trajectory clearance {clearance} admits no safety radius")));
    }
    Ok(0.9 * clearance)
}

/// RK4 for `dz/dt = -F(t, z)` with a caller-supplied force field.
pub fn integrate_center<F>(force: F, z0: Point2, t_end: f64, dt: f64) -> Result<OdeSolution>
where
    F: Fn(f64, Point2) -> Vec2,
{
    if !z0.is_finite() {
        return Err(Error::NonFinite("center start"));
    }
    let n_steps = schedule(t_end, dt)?;
    let rhs = |t: f64, z: Point2| -force(t, z);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut z = z0;
    times.push(0.0);
    states.push(VortexConfig { positions: vec![z], strengths: vec![1.0] });
    for step in 1..=n_steps {
        let t0 = times[step - 1];
        let t1 = time_of(step, n_steps, t_end, dt);
        let h = t1 - t0;
        let k1 = rhs(t0, z);
        let k2 = rhs(t0 + 0.5 * h, z + k1 * (0.5 * h));
        let k3 = rhs(t0 + 0.5 * h, z + k2 * (0.5 * h));
        let k4 = rhs(t1, z + k3 * h);
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !z.is_finite() {
            return Err(Error::Halted { time: t1, reason: "center position became non-finite".into() });
        }
        times.push(t1);
        states.push(VortexConfig { positions: vec![z], strengths: vec![1.0] });
    }
    Ok(OdeSolution { times, states, hamiltonian_series: Vec::new() })
}
