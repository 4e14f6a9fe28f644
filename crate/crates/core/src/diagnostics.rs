//! Localization observables of particle clouds and convergence fits.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blob::{boundary_forces, BlobTrajectory, ParticleCloud, RegularizedField};
use crate::geometry::DomainModel;
use crate::pointvortex::OdeSolution;
use crate::sum::{KahanSum, KahanVec2};
use crate::{Error, Point2, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobMeasure {
    pub center: Point2,
    pub inertia: f64,
    pub support_radius: f64,
    pub total_weight: f64,
}

/// Center of vorticity, moment of inertia about it, and the largest particle
/// distance from it, for the particles of `blob`.
///
/// The center is normalized by the blob's total weight.
pub fn measure(cloud: &ParticleCloud, blob: usize) -> Result<BlobMeasure> {
    let members = cloud.members(blob);
    let total = KahanSum::sum_iter(members.iter().map(|&i| cloud.weights[i]));
    if members.is_empty() || total == 0.0 || !total.is_finite() {
        return Err(Error::UndefinedCenter { blob });
    }
    let moment = KahanVec2::sum_iter(members.iter().map(|&i| cloud.positions[i] * cloud.weights[i]));
    let center = moment / total;
    let inertia = KahanSum::sum_iter(members.iter().map(|&i| cloud.weights[i] * (cloud.positions[i] - center).norm_sq()));
    let support_radius = members.iter().map(|&i| (cloud.positions[i] - center).norm()).fold(0.0, f64::max);
    Ok(BlobMeasure { center, inertia, support_radius, total_weight: total })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobDiagnostics {
    pub t: f64,
    pub blob: usize,
    pub center: Point2,
    pub inertia: f64,
    pub support_radius: f64,
    /// `|center - z(t)|`, NaN when no reference trajectory was supplied.
    pub dist_to_ode: f64,
    /// Smallest boundary distance over the blob's particles (0 once one has left).
    pub boundary_clearance: f64,
}

/// Per snapshot and per blob diagnostics; blob `i` is compared with vortex `i`.
pub fn diagnose(traj: &BlobTrajectory, domain: &DomainModel, ode: Option<&OdeSolution>) -> Result<Vec<BlobDiagnostics>> {
    let blobs = traj.template.blob_count();
    let dists = match ode {
        Some(sol) => Some(compare_to_ode(traj, sol)?),
        None => None,
    };
    let rows: Vec<Result<Vec<BlobDiagnostics>>> = (0..traj.len())
        .into_par_iter()
        .map(|k| {
            let cloud = traj.cloud_at(k);
            (0..blobs)
                .map(|b| {
                    let m = measure(&cloud, b)?;
                    let clearance = cloud
                        .members(b)
                        .into_iter()
                        .map(|i| domain.dist_to_boundary(cloud.positions[i]))
                        .fold(f64::INFINITY, f64::min);
                    Ok(BlobDiagnostics {
                        t: traj.times[k],
                        blob: b,
                        center: m.center,
                        inertia: m.inertia,
                        support_radius: m.support_radius,
                        dist_to_ode: dists.as_ref().map_or(f64::NAN, |d| d[b][k]),
                        boundary_clearance: clearance,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(traj.len() * blobs);
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// `|m(t) - z(t)|` for every blob (outer index) at every snapshot (inner index).
///
/// The reference trajectory is linearly interpolated to the snapshot times.
pub fn compare_to_ode(traj: &BlobTrajectory, ode: &OdeSolution) -> Result<Vec<Vec<f64>>> {
    let blobs = traj.template.blob_count();
    let vortices = ode.states.first().map_or(0, |s| s.count());
    if blobs > vortices {
        return Err(Error::Structure(format!("{blobs} blobs but only {vortices} reference vortices")));
    }
    let (t0, t1) = match (ode.times.first(), ode.times.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::InsufficientData("empty reference trajectory".into())),
    };
    let slack = 1e-9 * t1.abs().max(1.0);
    if traj.times.iter().any(|t| *t < t0 - slack || *t > t1 + slack) {
        return Err(Error::InsufficientData(format!(
            "blob times outside the reference range [{t0}, {t1}]"
        )));
    }
    (0..blobs)
        .map(|b| {
            (0..traj.len())
                .map(|k| {
                    let t = traj.times[k].clamp(t0, t1);
                    let m = measure(&traj.cloud_at(k), b)?;
                    Ok((m.center - ode.position_at(b, t)?).norm())
                })
                .collect()
        })
        .collect()
}

pub const DIAGNOSTICS_HEADER: &str = "t,blob,mx,my,I,R_supp,dist_ode,clearance";

pub fn write_diagnostics_csv<W: Write>(rows: &[BlobDiagnostics], mut out: W) -> Result<()> {
    writeln!(out, "{DIAGNOSTICS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.t, r.blob, r.center.x, r.center.y, r.inertia, r.support_radius, r.dist_to_ode, r.boundary_clearance
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    CenterError,
    SupportRadius,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub epsilons: Vec<f64>,
    pub sup_center_err: Vec<f64>,
    pub max_support_radius: Vec<f64>,
    pub fitted_center_slope: Option<f64>,
    pub fitted_support_slope: Option<f64>,
}

impl SweepResult {
    /// Builds the summary; slopes are fitted when three or more ε are present.
    pub fn new(epsilons: Vec<f64>, sup_center_err: Vec<f64>, max_support_radius: Vec<f64>) -> Result<Self> {
        if epsilons.len() != sup_center_err.len() || epsilons.len() != max_support_radius.len() {
            return Err(Error::Structure("sweep columns have different lengths".into()));
        }
        if epsilons.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::config("sweep epsilons must be strictly decreasing"));
        }
        let mut s = SweepResult {
            epsilons,
            sup_center_err,
            max_support_radius,
            fitted_center_slope: None,
            fitted_support_slope: None,
        };
        if s.epsilons.len() >= 3 {
            s.fitted_center_slope = fit_exponent(&s, Observable::CenterError).ok();
            s.fitted_support_slope = fit_exponent(&s, Observable::SupportRadius).ok();
        }
        Ok(s)
    }

    /// Ratio of consecutive observable values, larger ε over smaller ε.
    pub fn reduction_factors(&self, obs: Observable) -> Vec<f64> {
        self.column(obs).windows(2).map(|w| w[0] / w[1]).collect()
    }

    fn column(&self, obs: Observable) -> &[f64] {
        match obs {
            Observable::CenterError => &self.sup_center_err,
            Observable::SupportRadius => &self.max_support_radius,
        }
    }
}

/// Least-squares slope of `ln(obs)` against `ln(ε)`.
pub fn fit_exponent(sweep: &SweepResult, obs: Observable) -> Result<f64> {
    if sweep.epsilons.len() < 3 {
        return Err(Error::InsufficientData(format!("{} sweep points, need 3", sweep.epsilons.len())));
    }
    log_log_slope(&sweep.epsilons, sweep.column(obs))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InsufficientData("need two or more matched points".into()));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InsufficientData(format!("log-log fit needs positive values, got {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all x values coincide".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceBounds {
    /// Largest `|F|` at a particle.
    pub sup: f64,
    /// Largest `|F(p_i) - F(p_j)| / |p_i - p_j|` over particle pairs.
    pub lipschitz: f64,
}

/// Empirical bound and Lipschitz constant of the boundary force, maximized
/// over at most `max_snapshots` evenly spaced snapshots of `traj`.
pub fn measure_force_bounds(field: &RegularizedField, traj: &BlobTrajectory, max_snapshots: usize) -> Result<ForceBounds> {
    if traj.is_empty() {
        return Err(Error::InsufficientData("empty trajectory".into()));
    }
    let picks = evenly_spaced(traj.len(), max_snapshots.max(1));
    let mut out = ForceBounds { sup: 0.0, lipschitz: 0.0 };
    for k in picks {
        let b = cloud_force_bounds(field, &traj.cloud_at(k));
        out.sup = out.sup.max(b.sup);
        out.lipschitz = out.lipschitz.max(b.lipschitz);
    }
    Ok(out)
}

/// [`ForceBounds`] for a single cloud.
pub fn cloud_force_bounds(field: &RegularizedField, cloud: &ParticleCloud) -> ForceBounds {
    let p = &cloud.positions;
    let f = boundary_forces(field, cloud, p);
    let sup = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let lipschitz = (0..p.len())
        .into_par_iter()
        .map(|i| {
            let mut m: f64 = 0.0;
            for j in i + 1..p.len() {
                let d = (p[i] - p[j]).norm();
                if d > 0.0 {
                    m = m.max((f[i] - f[j]).norm() / d);
                }
            }
            m
        })
        .reduce(|| 0.0, f64::max);
    ForceBounds { sup, lipschitz }
}

/// Indices `0..n` thinned to at most `k` evenly spaced ones, always keeping both ends.
pub fn evenly_spaced(n: usize, k: usize) -> Vec<usize> {
    if n <= k || n < 2 {
        return (0..n).collect();
    }
    if k < 2 {
        return vec![n - 1];
    }
    let mut v: Vec<usize> = (0..k).map(|i| ((i * (n - 1)) as f64 / (k - 1) as f64).round() as usize).collect();
    v.dedup();
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub lipschitz: f64,
    pub times: Vec<f64>,
    pub inertia: Vec<f64>,
    pub within: Vec<bool>,
    pub first_violation: Option<f64>,
    /// Largest `I(t) / (I(0) e^{2Lt})`.
    pub max_ratio: f64,
}

impl GronwallReport {
    pub fn violations(&self) -> usize {
        self.within.iter().filter(|ok| !**ok).count()
    }
}

/// Checks `I(t) ≤ I(0)·e^{2·L·t}` at every snapshot of `blob`.
///
/// A relative slack of `1e-12` absorbs rounding in the inertia sums.
pub fn check_gronwall(traj: &BlobTrajectory, blob: usize, lipschitz: f64) -> Result<GronwallReport> {
    if traj.is_empty() {
        return Err(Error::InsufficientData("empty trajectory".into()));
    }
    let inertia: Vec<f64> = (0..traj.len())
        .into_par_iter()
        .map(|k| measure(&traj.cloud_at(k), blob).map(|m| m.inertia))
        .collect::<Result<_>>()?;
    let i0 = inertia[0];
    let mut report = GronwallReport {
        lipschitz,
        times: traj.times.clone(),
        inertia: inertia.clone(),
        within: Vec::with_capacity(traj.len()),
        first_violation: None,
        max_ratio: 0.0,
    };
    for (t, i) in traj.times.iter().zip(&inertia) {
        let envelope = i0 * (2.0 * lipschitz * t).exp();
        let ok = *i <= envelope * (1.0 + 1e-12);
        if !ok && report.first_violation.is_none() {
            report.first_violation = Some(*t);
        }
        report.within.push(ok);
        report.max_ratio = report.max_ratio.max(if envelope > 0.0 { i / envelope } else { f64::INFINITY });
    }
    Ok(report)
}

/// Largest difference between the sorted `(weight, vorticity)` multisets of
/// the two clouds, blob by blob.
pub fn distribution_check(before: &ParticleCloud, after: &ParticleCloud) -> Result<f64> {
    if before.len() != after.len()
        || before.blob_id != after.blob_id
        || before.weights.len() != before.len()
        || after.weights.len() != after.len()
        || before.vorticity_values.len() != before.len()
        || after.vorticity_values.len() != after.len()
    {
        return Err(Error::Structure("clouds differ in particle count or blob layout".into()));
    }
    let sorted = |c: &ParticleCloud, b: usize| {
        let mut v: Vec<(f64, f64)> = c.members(b).into_iter().map(|i| (c.weights[i], c.vorticity_values[i])).collect();
        v.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        v
    };
    let mut worst: f64 = 0.0;
    for b in 0..before.blob_count() {
        for (x, y) in sorted(before, b).into_iter().zip(sorted(after, b)) {
            worst = worst.max((x.0 - y.0).abs()).max((x.1 - y.1).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blob::{make_initial_cloud, run, FieldMode, InitialProfile};
    use crate::Vec2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(eps: f64, n: usize) -> ParticleCloud {
        make_initial_cloud(&DomainModel::UnitDisk, Vec2::new(0.5, 0.0), eps, 1.0, n, InitialProfile::Uniform).unwrap()
    }

    #[test]
    fn fresh_cloud_measures() {
        let eps = 0.1;
        let m = measure(&cloud(eps, 10_000), 0).unwrap();
        assert!((m.center - Vec2::new(0.5, 0.0)).norm() < 1e-12);
        assert!(m.support_radius <= eps);
        assert!((m.inertia / (0.5 * eps * eps) - 1.0).abs() < 0.01, "{}", m.inertia);
        assert!(m.inertia <= 4.0 * eps * eps);
        assert!(m.inertia <= m.total_weight.abs() * m.support_radius * m.support_radius);
    }

    #[test]
    fn measure_is_translation_equivariant() {
        let c = cloud(0.1, 500);
        let shift = Vec2::new(-0.25, 0.125);
        let mut moved = c.clone();
        moved.positions.iter_mut().for_each(|p| *p += shift);
        let (a, b) = (measure(&c, 0).unwrap(), measure(&moved, 0).unwrap());
        assert!((b.center - a.center - shift).norm() < 1e-14);
        assert!((a.inertia - b.inertia).abs() < 1e-15);
        assert!((a.support_radius - b.support_radius).abs() < 1e-14);
    }

    #[test]
    fn zero_weight_has_no_center() {
        let mut c = cloud(0.1, 50);
        c.weights.iter_mut().for_each(|w| *w = 0.0);
        assert!(matches!(measure(&c, 0), Err(Error::UndefinedCenter { blob: 0 })));
        assert!(matches!(measure(&cloud(0.1, 50), 3), Err(Error::UndefinedCenter { blob: 3 })));
    }

    fn sweep(eps: &[f64], mut obs: impl FnMut(f64) -> f64) -> SweepResult {
        let ys: Vec<f64> = eps.iter().map(|e| obs(*e)).collect();
        SweepResult::new(eps.to_vec(), ys.clone(), ys).unwrap()
    }

    #[test]
    fn exponent_of_exact_power_laws() {
        let eps = [0.2, 0.1, 0.05];
        let s = sweep(&eps, |e| e);
        assert!((fit_exponent(&s, Observable::CenterError).unwrap() - 1.0).abs() < 1e-12);
        let s = sweep(&eps, |e| 3.0 * e.powf(1.0 / 3.0));
        assert!((fit_exponent(&s, Observable::SupportRadius).unwrap() - 1.0 / 3.0).abs() < 1e-10);
        assert!((s.fitted_support_slope.unwrap() - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn exponent_is_robust_to_small_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eps = [0.2, 0.1, 0.05, 0.025];
        let s = sweep(&eps, |e| e * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)));
        let slope = fit_exponent(&s, Observable::CenterError).unwrap();
        assert!((0.95..=1.05).contains(&slope), "{slope}");
    }

    #[test]
    fn exponent_preconditions() {
        let s = SweepResult::new(vec![0.2, 0.1], vec![1.0, 0.5], vec![1.0, 0.5]).unwrap();
        assert!(s.fitted_center_slope.is_none());
        assert!(fit_exponent(&s, Observable::CenterError).is_err());
        let s = SweepResult::new(vec![0.2, 0.1, 0.05], vec![1.0, 0.0, 0.5], vec![1.0, 0.5, 0.2]).unwrap();
        assert!(fit_exponent(&s, Observable::CenterError).is_err());
        assert!(SweepResult::new(vec![0.1, 0.2, 0.05], vec![1.0; 3], vec![1.0; 3]).is_err());
    }

    #[test]
    fn distribution_check_detects_perturbation() {
        let c = cloud(0.1, 100);
        let mut shuffled = c.clone();
        shuffled.positions.reverse();
        assert_eq!(distribution_check(&c, &shuffled).unwrap(), 0.0);
        let mut bad = c.clone();
        bad.weights[7] *= 1.001;
        assert!(distribution_check(&c, &bad).unwrap() > 0.0);
        let mut short = c.clone();
        short.positions.pop();
        short.weights.pop();
        short.blob_id.pop();
        short.vorticity_values.pop();
        assert!(distribution_check(&c, &short).is_err());
    }

    #[test]
    fn gronwall_envelope_starts_at_initial_inertia() {
        let d = DomainModel::UnitDisk;
        let field = RegularizedField::new(&d, 0.9, FieldMode::SingleBlob).unwrap();
        let c = make_initial_cloud(&d, Vec2::ZERO, 0.1, 1.0, 100, InitialProfile::Uniform).unwrap();
        let traj = run(&field, &c, 0.5, 1e-2, 5).unwrap();
        let l = measure_force_bounds(&field, &traj, 10).unwrap();
        // a centered blob feels almost no boundary force
        assert!(l.sup < 1e-6);
        let r = check_gronwall(&traj, 0, l.lipschitz).unwrap();
        assert!(r.within[0]);
        for i in &r.inertia {
            assert!((i / r.inertia[0] - 1.0).abs() < 0.1);
        }
        assert_eq!(check_gronwall(&traj, 0, 1.0).unwrap().violations(), 0);
    }

    #[test]
    fn gronwall_reports_first_violation() {
        let d = DomainModel::UnitDisk;
        let c = make_initial_cloud(&d, Vec2::ZERO, 0.1, 1.0, 50, InitialProfile::Uniform).unwrap();
        let spread: Vec<Point2> = c.positions.iter().map(|p| *p * 1.5).collect();
        let traj = BlobTrajectory {
            template: c.clone(),
            times: vec![0.0, 1.0, 2.0],
            snapshots: vec![c.positions.clone(), c.positions.clone(), spread],
            events: Vec::new(),
            dt: 1.0,
            steps: 2,
        };
        let r = check_gronwall(&traj, 0, 0.1).unwrap();
        assert_eq!(r.within, vec![true, true, false]);
        assert_eq!(r.first_violation, Some(2.0));
        assert_eq!(check_gronwall(&traj, 0, 1.0).unwrap().violations(), 0);
    }

    #[test]
    fn evenly_spaced_keeps_ends() {
        assert_eq!(evenly_spaced(5, 10), vec![0, 1, 2, 3, 4]);
        let v = evenly_spaced(101, 5);
        assert_eq!(v, vec![0, 25, 50, 75, 100]);
        assert_eq!(evenly_spaced(0, 3), Vec::<usize>::new());
    }

    #[test]
    fn diagnostics_csv_layout() {
        let row = BlobDiagnostics {
            t: 0.5,
            blob: 1,
            center: Vec2::new(0.25, -0.5),
            inertia: 1e-3,
            support_radius: 0.1,
            dist_to_ode: 2e-4,
            boundary_clearance: 0.4,
        };
        let mut buf = Vec::new();
        write_diagnostics_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,blob,mx,my,I,R_supp,dist_ode,clearance\n0.5,1,0.25,-0.5,0.001,0.1,0.0002,0.4\n");
    }
}
