//! Direct O(N²) pair sums for the particle velocity field.
//!
//! Targets are processed in blocks of [`LANES`]; inside a block every lane
//! walks the sources in ascending index order with its own Kahan accumulator,
//! so a target's result never depends on how blocks are spread over threads.
//! The block body is plain array code that LLVM vectorizes across lanes; the
//! AVX entry points only widen the vectors, they do not change the arithmetic
//! (no FMA contraction happens in Rust), so every code path is bit-identical.
//!
//! Per pair `(x, p)` the sums are
//!
//! ```text
//! gamma    += w · (x - p) / d,     d = |x - p|², or max(|x - p|², c²) across blobs
//! boundary += b · u / |u|²,        u = |p|² x - p,  b = w χ(p) |p|²
//! ```
//!
//! where the second is `-2π ∇ₓh(x, p)` for the unit disk. When both are
//! needed a single division `1 / (d |u|²)` serves both quotients.

use rayon::prelude::*;

pub(crate) const LANES: usize = 8;
const TARGETS_PER_TASK: usize = 8 * LANES;

/// Sentinel target id that never matches a source index.
pub(crate) const NO_SKIP: u64 = u64::MAX;

#[derive(Debug, Default, Clone)]
pub(crate) struct Sources {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub gamma_w: Vec<f64>,
    pub blob: Vec<u64>,
    pub r2: Vec<f64>,
    pub boundary_w: Vec<f64>,
}

impl Sources {
    pub fn len(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Targets<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub id: &'a [u64],
    pub blob: &'a [u64],
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct PairSums {
    pub gamma: [f64; 2],
    pub boundary: [f64; 2],
    /// Smallest squared distance to a non-skipped source.
    pub min_r2: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct KernelSpec {
    pub gamma: bool,
    pub disk_boundary: bool,
    /// Squared cut radius applied to pairs from different blobs (0 disables).
    pub inter_blob_c2: f64,
}

type BlockFn = fn(&Targets<'_>, usize, &Sources, f64, &mut [PairSums]);

pub(crate) fn evaluate(targets: Targets<'_>, sources: &Sources, spec: KernelSpec) -> Vec<PairSums> {
    let n = targets.x.len();
    let mut out = vec![PairSums::default(); n];
    if n == 0 {
        return out;
    }
    let block = select_block(spec);
    let c2 = spec.inter_blob_c2;
    out.par_chunks_mut(TARGETS_PER_TASK).enumerate().for_each(|(task, chunk)| {
        let base = task * TARGETS_PER_TASK;
        for (b, sub) in chunk.chunks_mut(LANES).enumerate() {
            block(&targets, base + b * LANES, sources, c2, sub);
        }
    });
    out
}

fn select_block(spec: KernelSpec) -> BlockFn {
    match (spec.gamma, spec.disk_boundary) {
        (true, true) => dispatch::<true, true>(),
        (true, false) => dispatch::<true, false>(),
        (false, true) => dispatch::<false, true>(),
        (false, false) => |_, _, _, _, out| out.iter_mut().for_each(|o| *o = PairSums::default()),
    }
}

fn dispatch<const G: bool, const B: bool>() -> BlockFn {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx512f") {
            return |t, s, src, c2, out| unsafe { block_avx512::<G, B>(t, s, src, c2, out) };
        }
        if std::is_x86_feature_detected!("avx2") {
            return |t, s, src, c2, out| unsafe { block_avx2::<G, B>(t, s, src, c2, out) };
        }
    }
    block_portable::<G, B>
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn block_avx512<const G: bool, const B: bool>(
    t: &Targets<'_>,
    start: usize,
    src: &Sources,
    c2: f64,
    out: &mut [PairSums],
) {
    block_body::<G, B>(t, start, src, c2, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn block_avx2<const G: bool, const B: bool>(
    t: &Targets<'_>,
    start: usize,
    src: &Sources,
    c2: f64,
    out: &mut [PairSums],
) {
    block_body::<G, B>(t, start, src, c2, out)
}

fn block_portable<const G: bool, const B: bool>(
    t: &Targets<'_>,
    start: usize,
    src: &Sources,
    c2: f64,
    out: &mut [PairSums],
) {
    block_body::<G, B>(t, start, src, c2, out)
}

#[inline(always)]
fn kahan(sum: &mut f64, comp: &mut f64, value: f64) {
    let y = value - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}

#[inline(always)]
fn block_body<const G: bool, const B: bool>(
    t: &Targets<'_>,
    start: usize,
    src: &Sources,
    c2: f64,
    out: &mut [PairSums],
) {
    let live = out.len();
    // Pad short blocks by repeating the last live target; padded lanes are discarded.
    let mut tx = [0.0; LANES];
    let mut ty = [0.0; LANES];
    let mut tid = [NO_SKIP; LANES];
    let mut tblob = [0u64; LANES];
    for l in 0..LANES {
        let i = start + l.min(live - 1);
        tx[l] = t.x[i];
        ty[l] = t.y[i];
        tid[l] = t.id[i];
        tblob[l] = t.blob[i];
    }

    let mut gx = [0.0; LANES];
    let mut gxc = [0.0; LANES];
    let mut gy = [0.0; LANES];
    let mut gyc = [0.0; LANES];
    let mut bx = [0.0; LANES];
    let mut bxc = [0.0; LANES];
    let mut by = [0.0; LANES];
    let mut byc = [0.0; LANES];
    let mut min_r2 = [f64::INFINITY; LANES];

    let n = src.len();
    let (sx, sy, sw, sb, sr2, sbw) =
        (&src.x[..n], &src.y[..n], &src.gamma_w[..n], &src.blob[..n], &src.r2[..n], &src.boundary_w[..n]);

    for j in 0..n {
        // hoisted so the lane loop broadcasts instead of gathering
        let (px, py, w_j, blob_j, r2_j, bw_j) = (sx[j], sy[j], sw[j], sb[j], sr2[j], sbw[j]);
        let jj = j as u64;
        for l in 0..LANES {
            let dx = tx[l] - px;
            let dy = ty[l] - py;
            if G {
                let r2 = dx * dx + dy * dy;
                let is_self = tid[l] == jj;
                let d = if tblob[l] == blob_j || r2 > c2 { r2 } else { c2 };
                let d = if is_self { 1.0 } else { d };
                let w = if is_self { 0.0 } else { w_j };
                min_r2[l] = if is_self || r2 >= min_r2[l] { min_r2[l] } else { r2 };
                if B {
                    let ux = tx[l] * r2_j - px;
                    let uy = ty[l] * r2_j - py;
                    let q = ux * ux + uy * uy;
                    let ok = q > 0.0;
                    let q = if ok { q } else { 1.0 };
                    let bw = if ok { bw_j } else { 0.0 };
                    let inv = 1.0 / (d * q);
                    let kg = w * (q * inv);
                    let kb = bw * (d * inv);
                    kahan(&mut gx[l], &mut gxc[l], dx * kg);
                    kahan(&mut gy[l], &mut gyc[l], dy * kg);
                    kahan(&mut bx[l], &mut bxc[l], ux * kb);
                    kahan(&mut by[l], &mut byc[l], uy * kb);
                } else {
                    let kg = w / d;
                    kahan(&mut gx[l], &mut gxc[l], dx * kg);
                    kahan(&mut gy[l], &mut gyc[l], dy * kg);
                }
            } else if B {
                let ux = tx[l] * r2_j - px;
                let uy = ty[l] * r2_j - py;
                let q = ux * ux + uy * uy;
                let ok = q > 0.0;
                let q = if ok { q } else { 1.0 };
                let bw = if ok { bw_j } else { 0.0 };
                let kb = bw / q;
                kahan(&mut bx[l], &mut bxc[l], ux * kb);
                kahan(&mut by[l], &mut byc[l], uy * kb);
            }
        }
    }

    for (l, o) in out.iter_mut().enumerate() {
        *o = PairSums { gamma: [gx[l], gy[l]], boundary: [bx[l], by[l]], min_r2: min_r2[l] };
    }
}
