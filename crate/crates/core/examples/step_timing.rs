//! Times RK4 steps of a single blob: `cargo run --release --example step_timing -- [n_target] [steps]`.

use std::time::Instant;

use vortexloc::blob::{make_initial_cloud, step, FieldMode, InitialProfile, RegularizedField};
use vortexloc::geometry::DomainModel;
use vortexloc::Vec2;

fn main() -> vortexloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_target: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(4000);
    let steps: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let domain = DomainModel::UnitDisk;
    let field = RegularizedField::new(&domain, 0.45, FieldMode::SingleBlob)?;
    let mut cloud = make_initial_cloud(&domain, Vec2::new(0.5, 0.0), 0.1, 1.0, n_target, InitialProfile::Uniform)?;
    let start = Instant::now();
    for _ in 0..steps {
        cloud = step(&field, &cloud, 1e-3)?;
    }
    let per_step = start.elapsed().as_secs_f64() / steps as f64;
    println!(
        "N = {}, {:.3} ms per step, {:.2} ns per pair evaluation",
        cloud.len(),
        per_step * 1e3,
        per_step * 1e9 / (4.0 * (cloud.len() * cloud.len()) as f64)
    );
    Ok(())
}
