use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vortexloc::blob::{
    boundary_force, boundary_forces, gamma_velocities, make_initial_cloud, run, step, velocity_at, EventKind,
    FieldMode, InitialProfile, ParticleCloud, RegularizedField,
};
use vortexloc::diagnostics::{distribution_check, measure};
use vortexloc::geometry::{rotate_cw, DomainModel};
use vortexloc::pointvortex::{integrate, integrate_center, VortexConfig};
use vortexloc::sum::KahanVec2;
use vortexloc::{Point2, Vec2};

fn disk() -> DomainModel {
    DomainModel::UnitDisk
}

fn cloud(z0: Point2, eps: f64, n: usize) -> ParticleCloud {
    make_initial_cloud(&disk(), z0, eps, 1.0, n, InitialProfile::Uniform).unwrap()
}

fn random_cloud(n: usize, seed: u64) -> ParticleCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n);
    while positions.len() < n {
        let p = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if p.norm_sq() < 0.81 {
            positions.push(p);
        }
    }
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) / n as f64).collect();
    ParticleCloud { positions, weights: weights.clone(), blob_id: vec![0; n], epsilon: 0.1, vorticity_values: weights }
}

fn momentum_rate(c: &ParticleCloud) -> Vec2 {
    let v = gamma_velocities(c).unwrap();
    KahanVec2::sum_iter(v.iter().zip(&c.weights).map(|(v, w)| *v * *w))
}

#[test]
fn pair_interactions_cancel_in_the_momentum_rate() {
    for seed in 0..3 {
        let m = momentum_rate(&random_cloud(2000, seed));
        assert!(m.norm() < 1e-12, "seed {seed}: {m:?}");
    }
    let m = momentum_rate(&cloud(Vec2::new(0.5, 0.0), 0.1, 2000));
    assert!(m.norm() < 1e-12, "{m:?}");
}

#[test]
fn momentum_rate_equals_minus_weighted_boundary_force() {
    let d = disk();
    let field = RegularizedField::new(&d, 0.45, FieldMode::SingleBlob).unwrap();
    let c = cloud(Vec2::new(0.5, 0.0), 0.1, 400);
    let dt = 1e-3;
    let next = step(&field, &c, dt).unwrap();
    let moment = |c: &ParticleCloud| KahanVec2::sum_iter(c.positions.iter().zip(&c.weights).map(|(p, w)| *p * *w));
    let rate = (moment(&next) - moment(&c)) / dt;
    let f = boundary_forces(&field, &c, &c.positions);
    let expect = -KahanVec2::sum_iter(f.iter().zip(&c.weights).map(|(f, w)| *f * *w));
    // first-order difference quotient over one step
    assert!((rate - expect).norm() < 1e-3 * expect.norm(), "{rate:?} {expect:?}");
}

#[test]
fn cutoff_and_exact_modes_coincide_in_the_plateau() {
    let d = disk();
    let c = cloud(Vec2::new(0.5, 0.0), 0.1, 300);
    let a = RegularizedField::new(&d, 0.45, FieldMode::SingleBlob).unwrap();
    let b = RegularizedField::new(&d, 0.45, FieldMode::ExactGreen).unwrap();
    let ta = run(&a, &c, 0.5, 1e-2, 10).unwrap();
    let tb = run(&b, &c, 0.5, 1e-2, 10).unwrap();
    assert_eq!(ta.snapshots, tb.snapshots);
}

#[test]
fn concentrated_blob_force_approaches_robin_gradient() {
    let d = disk();
    let z0 = Vec2::new(0.5, 0.0);
    let field = RegularizedField::new(&d, 0.45, FieldMode::SingleBlob).unwrap();
    let c = cloud(z0, 1e-3, 200);
    let f = boundary_force(&field, &c, z0);
    let want = rotate_cw(d.grad_x_regular_part(z0, z0).unwrap());
    assert!((f - want).norm() < 1e-3, "{f:?} vs {want:?}");
    assert!((want - rotate_cw(d.grad_robin(z0).unwrap())).norm() < 1e-12);
}

#[test]
fn boundary_force_bound_does_not_grow_as_blobs_shrink() {
    let d = disk();
    let field = RegularizedField::new(&d, 0.45, FieldMode::SingleBlob).unwrap();
    let probes: Vec<Point2> =
        (0..400).map(|k| Vec2::new(0.99 * ((k % 20) as f64 / 20.0), 0.0).rotated(k as f64 * 0.37)).collect();
    let sups: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|eps| {
            let c = cloud(Vec2::new(0.5, 0.0), *eps, 400);
            boundary_forces(&field, &c, &probes).iter().map(|v| v.norm()).fold(0.0, f64::max)
        })
        .collect();
    let l1 = sups[0] * 1.5;
    assert!(sups.iter().all(|s| *s <= l1 && s.is_finite()), "{sups:?}");
}

#[test]
fn centered_blob_stays_put() {
    let d = disk();
    let field = RegularizedField::new(&d, 0.9, FieldMode::SingleBlob).unwrap();
    let c = make_initial_cloud(&d, Vec2::ZERO, 0.1, 1.0, 300, InitialProfile::Uniform).unwrap();
    let traj = run(&field, &c, 5.0, 1e-2, 50).unwrap();
    for k in 0..traj.len() {
        let m = measure(&traj.cloud_at(k), 0).unwrap();
        assert!(m.center.norm() < 5e-4, "t = {}: {:?}", traj.times[k], m.center);
    }
    assert!(traj.events.is_empty());
}

#[test]
fn circulation_and_distribution_are_constant() {
    let d = disk();
    let field = RegularizedField::new(&d, 0.45, FieldMode::SingleBlob).unwrap();
    let c = cloud(Vec2::new(0.5, 0.0), 0.1, 200);
    let traj = run(&field, &c, 0.3, 1e-2, 3).unwrap();
    for k in 0..traj.len() {
        let ck = traj.cloud_at(k);
        assert_eq!(ck.weights, c.weights);
        assert_eq!(distribution_check(&c, &ck).unwrap(), 0.0);
    }
    assert_eq!(traj.count_events(EventKind::ExitedDomain), 0);
}

#[test]
fn point_vortex_velocity_matches_single_particle_field() {
    let d = disk();
    let field = RegularizedField::new(&d, 0.45, FieldMode::ExactGreen).unwrap();
    let z = Vec2::new(0.3, -0.2);
    let c = ParticleCloud { positions: vec![z], weights: vec![1.0], blob_id: vec![0], epsilon: 0.1, vorticity_values: vec![1.0] };
    let v = velocity_at(&field, &c, z, Some(0)).unwrap();
    let ode = VortexConfig::single(z).unwrap();
    let w = vortexloc::pointvortex::kr_velocity_k(&d, &ode, 0).unwrap();
    assert!((v - w).norm() < 1e-15);
}

#[test]
fn center_equation_with_blob_force_follows_point_vortex() {
    let d = disk();
    let z0 = Vec2::new(0.5, 0.0);
    let (t_end, dt) = (1.0, 1e-2);
    let field = RegularizedField::new(&d, 0.45, FieldMode::SingleBlob).unwrap();
    let traj = run(&field, &cloud(z0, 0.05, 200), t_end, dt, 1).unwrap();
    let cloud_at = |t: f64| {
        let k = ((t / dt).floor() as usize).min(traj.len() - 2);
        let s = (t - traj.times[k]) / (traj.times[k + 1] - traj.times[k]);
        let mut c = traj.cloud_at(k);
        for (p, q) in c.positions.iter_mut().zip(&traj.snapshots[k + 1]) {
            *p = *p * (1.0 - s) + *q * s;
        }
        c
    };
    let center = integrate_center(|t, x| boundary_force(&field, &cloud_at(t), x), z0, t_end, dt).unwrap();
    let ode = integrate(&d, &VortexConfig::single(z0).unwrap(), t_end, dt).unwrap();
    for (k, t) in center.times.iter().enumerate() {
        let gap = (center.states[k].positions()[0] - ode.position_at(0, *t).unwrap()).norm();
        assert!(gap < 0.05, "t = {t}: {gap}");
    }
}

#[test]
fn two_blobs_keep_their_circulation() {
    let d = disk();
    let a = make_initial_cloud(&d, Vec2::new(-0.4, 0.0), 0.05, 0.5, 100, InitialProfile::Uniform).unwrap();
    let b = make_initial_cloud(&d, Vec2::new(0.4, 0.0), 0.05, 0.5, 100, InitialProfile::Uniform).unwrap();
    let c = ParticleCloud::merge(vec![a, b]).unwrap();
    let field = RegularizedField::new(&d, 0.45, FieldMode::KBlob).unwrap();
    let traj = run(&field, &c, 0.2, 1e-2, 5).unwrap();
    let fin = traj.final_cloud().unwrap();
    for blob in 0..2 {
        assert_eq!(fin.total_weight(blob), c.total_weight(blob));
    }
    assert_eq!(distribution_check(&c, &fin).unwrap(), 0.0);
}
