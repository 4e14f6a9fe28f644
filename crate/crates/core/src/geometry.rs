//! Bounded planar domains and their Dirichlet Green functions.
//!
//! The Green function of `-Δ` splits as `G(x, y) = Γ(x, y) - h(x, y)` with
//! `Γ(x, y) = -ln|x - y| / 2π`. The unit disk uses the Kelvin image closed form
//!
//! ```text
//! h(x, y) = -(1/4π) ln(1 - 2 x·y + |x|²|y|²)
//! ```
//!
//! which is symmetric and has no removable singularity at `y = 0`. Other simply
//! connected domains are handled through a user-supplied conformal map `f` from
//! the unit disk onto the domain, with `G_D(x, y) = G_disk(f⁻¹x, f⁻¹y)`.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use num_complex::Complex64;

use crate::{Error, Point2, Result, Vec2};

pub(crate) const INV_2PI: f64 = 0.5 / PI;
const INV_4PI: f64 = 0.25 / PI;

/// Boundary samples used for distance queries on mapped domains.
pub const PULLBACK_BOUNDARY_SAMPLES: usize = 4096;

/// Below this separation the mapped regular part switches to a first-order
/// expansion of `ln|(g(x) - g(y)) / (x - y)|` to avoid cancellation.
const NEAR_DIAGONAL: f64 = 1e-6;

/// Clockwise rotation through π/2: `J(v1, v2) = (v2, -v1)`.
#[inline]
pub fn rotate_cw(v: Vec2) -> Vec2 {
    Vec2::new(v.y, -v.x)
}

/// Free-space kernel `Γ(x, y) = -ln|x - y| / 2π`.
pub fn gamma(x: Point2, y: Point2) -> Result<f64> {
    check_finite(x, "gamma argument")?;
    check_finite(y, "gamma argument")?;
    let r = (x - y).norm();
    if r == 0.0 {
        return Err(Error::Singularity { what: "Γ at coincident points", distance: 0.0 });
    }
    Ok(-INV_2PI * r.ln())
}

/// `∇ₓΓ(x, y) = -(x - y) / (2π|x - y|²)`.
pub fn grad_x_gamma(x: Point2, y: Point2) -> Result<Vec2> {
    check_finite(x, "gamma argument")?;
    check_finite(y, "gamma argument")?;
    let d = x - y;
    let r2 = d.norm_sq();
    if r2 == 0.0 {
        return Err(Error::Singularity { what: "∇Γ at coincident points", distance: 0.0 });
    }
    Ok(d * (-INV_2PI / r2))
}

/// A holomorphic bijection from the open unit disk onto a domain.
///
/// Implementors supply the inverse map and its first two complex derivatives
/// analytically; nothing in the crate differentiates these numerically.
pub trait ConformalMap: Debug + Send + Sync {
    /// Disk to domain.
    fn forward(&self, z: Complex64) -> Complex64;
    /// Domain to disk.
    fn inverse(&self, w: Complex64) -> Complex64;
    /// Complex derivative of [`ConformalMap::inverse`].
    fn inverse_derivative(&self, w: Complex64) -> Complex64;
    /// Second complex derivative of [`ConformalMap::inverse`].
    fn inverse_second_derivative(&self, w: Complex64) -> Complex64;
    /// Short human-readable description, echoed in manifests.
    fn describe(&self) -> String;
}

/// Rotation of the unit disk onto itself.
#[derive(Debug, Clone, Copy)]
pub struct DiskRotation {
    pub angle: f64,
}

impl ConformalMap for DiskRotation {
    fn forward(&self, z: Complex64) -> Complex64 {
        z * Complex64::from_polar(1.0, self.angle)
    }
    fn inverse(&self, w: Complex64) -> Complex64 {
        w * Complex64::from_polar(1.0, -self.angle)
    }
    fn inverse_derivative(&self, _w: Complex64) -> Complex64 {
        Complex64::from_polar(1.0, -self.angle)
    }
    fn inverse_second_derivative(&self, _w: Complex64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn describe(&self) -> String {
        format!("disk rotation by {}", self.angle)
    }
}

/// Möbius automorphism `f(z) = (z + a) / (1 + ā z)` of the unit disk, `|a| < 1`.
#[derive(Debug, Clone, Copy)]
pub struct MobiusAutomorphism {
    a: Complex64,
}

impl MobiusAutomorphism {
    pub fn new(a: Complex64) -> Result<Self> {
        if !(a.norm() < 1.0) {
            return Err(Error::config("Möbius parameter must satisfy |a| < 1"));
        }
        Ok(Self { a })
    }
}

impl ConformalMap for MobiusAutomorphism {
    fn forward(&self, z: Complex64) -> Complex64 {
        (z + self.a) / (1.0 + self.a.conj() * z)
    }
    fn inverse(&self, w: Complex64) -> Complex64 {
        (w - self.a) / (1.0 - self.a.conj() * w)
    }
    fn inverse_derivative(&self, w: Complex64) -> Complex64 {
        let den = 1.0 - self.a.conj() * w;
        (1.0 - self.a.norm_sqr()) / (den * den)
    }
    fn inverse_second_derivative(&self, w: Complex64) -> Complex64 {
        let den = 1.0 - self.a.conj() * w;
        2.0 * self.a.conj() * (1.0 - self.a.norm_sqr()) / (den * den * den)
    }
    fn describe(&self) -> String {
        format!("Möbius automorphism a = ({}, {})", self.a.re, self.a.im)
    }
}

/// Disk of arbitrary center and radius, `f(z) = c + R z`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledDisk {
    center: Complex64,
    radius: f64,
}

impl ScaledDisk {
    pub fn new(center: Point2, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(Error::config("disk radius must be positive and finite"));
        }
        Ok(Self { center: Complex64::new(center.x, center.y), radius })
    }
}

impl ConformalMap for ScaledDisk {
    fn forward(&self, z: Complex64) -> Complex64 {
        self.center + z * self.radius
    }
    fn inverse(&self, w: Complex64) -> Complex64 {
        (w - self.center) / self.radius
    }
    fn inverse_derivative(&self, _w: Complex64) -> Complex64 {
        Complex64::new(1.0 / self.radius, 0.0)
    }
    fn inverse_second_derivative(&self, _w: Complex64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn describe(&self) -> String {
        format!("disk center ({}, {}) radius {}", self.center.re, self.center.im, self.radius)
    }
}

/// Limaçon-type domain `f(z) = z + a z²`, univalent on the disk for `0 < |a| < 1/2`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticMap {
    a: Complex64,
}

impl QuadraticMap {
    pub fn new(a: Complex64) -> Result<Self> {
        let m = a.norm();
        if !(m > 0.0 && m < 0.5) {
            return Err(Error::config("quadratic map needs 0 < |a| < 1/2"));
        }
        Ok(Self { a })
    }
}

impl ConformalMap for QuadraticMap {
    fn forward(&self, z: Complex64) -> Complex64 {
        z + self.a * z * z
    }
    fn inverse(&self, w: Complex64) -> Complex64 {
        // 2w / (1 + sqrt(1 + 4aw)) avoids cancellation for small |a w|.
        2.0 * w / (1.0 + (1.0 + 4.0 * self.a * w).sqrt())
    }
    fn inverse_derivative(&self, w: Complex64) -> Complex64 {
        1.0 / (1.0 + 4.0 * self.a * w).sqrt()
    }
    fn inverse_second_derivative(&self, w: Complex64) -> Complex64 {
        let s = 1.0 + 4.0 * self.a * w;
        -2.0 * self.a / (s * s.sqrt())
    }
    fn describe(&self) -> String {
        format!("quadratic map a = ({}, {})", self.a.re, self.a.im)
    }
}

/// Mapped domain plus a cached boundary polygon for distance queries.
#[derive(Debug, Clone)]
pub struct Pullback {
    map: Arc<dyn ConformalMap>,
    boundary: Arc<Vec<Point2>>,
}

impl Pullback {
    pub fn map(&self) -> &dyn ConformalMap {
        self.map.as_ref()
    }

    fn boundary_point(&self, phi: f64) -> Point2 {
        from_c(self.map.forward(Complex64::from_polar(1.0, phi)))
    }

    /// Nearest boundary point: best polygon vertex, then golden-section
    /// refinement in the disk angle over the two adjacent sample intervals.
    fn nearest_boundary(&self, x: Point2) -> Point2 {
        let n = self.boundary.len();
        let (k, _) = self
            .boundary
            .iter()
            .enumerate()
            .map(|(k, b)| (k, (x - *b).norm_sq()))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        let step = 2.0 * PI / n as f64;
        let (mut lo, mut hi) = ((k as f64 - 1.0) * step, (k as f64 + 1.0) * step);
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let f = |t: f64| (x - self.boundary_point(t)).norm_sq();
        let mut c = hi - inv_phi * (hi - lo);
        let mut d = lo + inv_phi * (hi - lo);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..60 {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - inv_phi * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + inv_phi * (hi - lo);
                fd = f(d);
            }
        }
        let refined = self.boundary_point(0.5 * (lo + hi));
        if (x - refined).norm_sq() <= (x - self.boundary[k]).norm_sq() {
            refined
        } else {
            self.boundary[k]
        }
    }
}

/// A bounded simply connected planar domain.
#[derive(Debug, Clone)]
pub enum DomainModel {
    UnitDisk,
    ConformalPullback(Pullback),
}

/// Green function pieces at one `(x, y)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenEval {
    pub gamma: f64,
    pub h: f64,
    pub g: f64,
    pub grad_x_gamma: Vec2,
    pub grad_x_h: Vec2,
}

impl DomainModel {
    pub fn unit_disk() -> Self {
        DomainModel::UnitDisk
    }

    pub fn pullback(map: Arc<dyn ConformalMap>) -> Self {
        let boundary = (0..PULLBACK_BOUNDARY_SAMPLES)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / PULLBACK_BOUNDARY_SAMPLES as f64;
                from_c(map.forward(Complex64::from_polar(1.0, phi)))
            })
            .collect();
        DomainModel::ConformalPullback(Pullback { map, boundary: Arc::new(boundary) })
    }

    pub fn is_unit_disk(&self) -> bool {
        matches!(self, DomainModel::UnitDisk)
    }

    pub fn describe(&self) -> String {
        match self {
            DomainModel::UnitDisk => "unit disk".to_string(),
            DomainModel::ConformalPullback(p) => p.map.describe(),
        }
    }

    /// Open-set membership test.
    pub fn contains(&self, x: Point2) -> bool {
        if !x.is_finite() {
            return false;
        }
        match self {
            DomainModel::UnitDisk => x.norm_sq() < 1.0,
            DomainModel::ConformalPullback(p) => {
                let w = to_c(x);
                let z = p.map.inverse(w);
                z.norm_sqr() < 1.0 - 1e-12 && (p.map.forward(z) - w).norm() <= 1e-9 * (1.0 + x.norm())
            }
        }
    }

    /// `n` points of `∂D`, equally spaced in the disk angle.
    pub fn boundary_sampler(&self, n: usize) -> Vec<Point2> {
        (0..n)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / n as f64;
                match self {
                    DomainModel::UnitDisk => {
                        let p = Vec2::new(phi.cos(), phi.sin());
                        // keep the sample out of the open disk despite rounding
                        if p.norm_sq() < 1.0 {
                            p * (1.0 + f64::EPSILON)
                        } else {
                            p
                        }
                    }
                    DomainModel::ConformalPullback(pb) => pb.boundary_point(phi),
                }
            })
            .collect()
    }

    /// Distance to `∂D`; zero on or outside the boundary.
    ///
    /// Mapped domains search a 4096-vertex boundary polygon and refine the
    /// closest vertex by golden-section search on the exact boundary curve,
    /// which resolves the distance to roughly 1e-12 for smooth maps.
    pub fn dist_to_boundary(&self, x: Point2) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        match self {
            DomainModel::UnitDisk => (1.0 - x.norm()).max(0.0),
            DomainModel::ConformalPullback(p) => (x - p.nearest_boundary(x)).norm(),
        }
    }

    /// Gradient of [`DomainModel::dist_to_boundary`] for interior points; zero
    /// where the distance is not differentiable (disk center, exterior).
    pub fn grad_dist_to_boundary(&self, x: Point2) -> Vec2 {
        if !self.contains(x) {
            return Vec2::ZERO;
        }
        match self {
            DomainModel::UnitDisk => {
                let r = x.norm();
                if r == 0.0 {
                    Vec2::ZERO
                } else {
                    x * (-1.0 / r)
                }
            }
            DomainModel::ConformalPullback(p) => {
                let d = x - p.nearest_boundary(x);
                let n = d.norm();
                if n == 0.0 {
                    Vec2::ZERO
                } else {
                    d / n
                }
            }
        }
    }

    /// Largest distance to the boundary (exact for the disk, sampled otherwise).
    pub fn inradius(&self) -> f64 {
        match self {
            DomainModel::UnitDisk => 1.0,
            DomainModel::ConformalPullback(p) => {
                let mut best: f64 = 0.0;
                for i in 0..16 {
                    let r = 0.9 * i as f64 / 15.0;
                    for k in 0..32 {
                        let phi = 2.0 * PI * k as f64 / 32.0;
                        let x = from_c(p.map.forward(Complex64::from_polar(r, phi)));
                        best = best.max(self.dist_to_boundary(x));
                    }
                }
                best
            }
        }
    }

    fn check_interior(&self, x: Point2) -> Result<()> {
        check_finite(x, "domain point")?;
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { x: x.x, y: x.y })
        }
    }

    /// Regular part `h(x, y)` of the Green function.
    pub fn regular_part(&self, x: Point2, y: Point2) -> Result<f64> {
        self.check_interior(x)?;
        self.check_interior(y)?;
        Ok(self.regular_part_unchecked(x, y))
    }

    /// `∇ₓh(x, y)`.
    pub fn grad_x_regular_part(&self, x: Point2, y: Point2) -> Result<Vec2> {
        self.check_interior(x)?;
        self.check_interior(y)?;
        Ok(self.grad_x_regular_part_unchecked(x, y))
    }

    /// All Green function pieces at `(x, y)`, `x ≠ y`.
    pub fn green(&self, x: Point2, y: Point2) -> Result<GreenEval> {
        self.check_interior(x)?;
        self.check_interior(y)?;
        let gamma = gamma(x, y)?;
        let grad_x_gamma = grad_x_gamma(x, y)?;
        let h = self.regular_part_unchecked(x, y);
        let grad_x_h = self.grad_x_regular_part_unchecked(x, y);
        Ok(GreenEval { gamma, h, g: gamma - h, grad_x_gamma, grad_x_h })
    }

    /// Kirchhoff-Routh function `H(x) = h(x, x) / 2`.
    pub fn robin(&self, x: Point2) -> Result<f64> {
        self.check_interior(x)?;
        Ok(match self {
            DomainModel::UnitDisk => disk_robin(x),
            DomainModel::ConformalPullback(p) => {
                let w = to_c(x);
                let z = from_c(p.map.inverse(w));
                INV_4PI * p.map.inverse_derivative(w).norm().ln() + disk_robin(z)
            }
        })
    }

    /// `∇H(x)`, analytic for every domain kind.
    pub fn grad_robin(&self, x: Point2) -> Result<Vec2> {
        self.check_interior(x)?;
        Ok(match self {
            DomainModel::UnitDisk => disk_grad_robin(x),
            DomainModel::ConformalPullback(p) => {
                let w = to_c(x);
                let z = p.map.inverse(w);
                let d1 = p.map.inverse_derivative(w);
                let d2 = p.map.inverse_second_derivative(w);
                let log_term = (d2 / d1).conj() * INV_4PI;
                let chain = d1.conj() * to_c(disk_grad_robin(from_c(z)));
                from_c(log_term + chain)
            }
        })
    }

    /// `h` without interior checks; callers guarantee both points lie in `D`.
    pub(crate) fn regular_part_unchecked(&self, x: Point2, y: Point2) -> f64 {
        match self {
            DomainModel::UnitDisk => disk_h(x, y),
            DomainModel::ConformalPullback(p) => {
                let (wx, wy) = (to_c(x), to_c(y));
                let (zx, zy) = (p.map.inverse(wx), p.map.inverse(wy));
                let diff = wx - wy;
                let log_ratio = if diff.norm() < NEAR_DIAGONAL * (1.0 + x.norm()) {
                    let q = p.map.inverse_derivative(wy) + 0.5 * p.map.inverse_second_derivative(wy) * diff;
                    q.norm().ln()
                } else {
                    ((zx - zy) / diff).norm().ln()
                };
                INV_2PI * log_ratio + disk_h(from_c(zx), from_c(zy))
            }
        }
    }

    pub(crate) fn grad_x_regular_part_unchecked(&self, x: Point2, y: Point2) -> Vec2 {
        match self {
            DomainModel::UnitDisk => disk_grad_x_h(x, y),
            DomainModel::ConformalPullback(p) => {
                let (wx, wy) = (to_c(x), to_c(y));
                let (zx, zy) = (p.map.inverse(wx), p.map.inverse(wy));
                let d1x = p.map.inverse_derivative(wx);
                let diff = wx - wy;
                // ∇ₓ ln|q(x)| with q(x) = (g(x) - g(y)) / (x - y) equals conj(q'/q).
                let log_grad = if diff.norm() < NEAR_DIAGONAL * (1.0 + x.norm()) {
                    let d1y = p.map.inverse_derivative(wy);
                    let d2y = p.map.inverse_second_derivative(wy);
                    let q = d1y + 0.5 * d2y * diff;
                    (0.5 * d2y / q).conj()
                } else {
                    (d1x / (zx - zy) - 1.0 / diff).conj()
                };
                let chain = d1x.conj() * to_c(disk_grad_x_h(from_c(zx), from_c(zy)));
                from_c(log_grad * INV_2PI + chain)
            }
        }
    }

    /// `h` extended by zero outside `D × D`.
    pub(crate) fn regular_part_extended(&self, x: Point2, y: Point2) -> f64 {
        if self.contains(x) && self.contains(y) {
            self.regular_part_unchecked(x, y)
        } else {
            0.0
        }
    }

    /// `∇ₓh` extended by zero outside `D × D`.
    pub(crate) fn grad_x_regular_part_extended(&self, x: Point2, y: Point2) -> Vec2 {
        if self.contains(x) && self.contains(y) {
            self.grad_x_regular_part_unchecked(x, y)
        } else {
            Vec2::ZERO
        }
    }
}

#[inline]
fn disk_q(x: Point2, y: Point2) -> f64 {
    1.0 - 2.0 * x.dot(y) + x.norm_sq() * y.norm_sq()
}

#[inline]
fn disk_h(x: Point2, y: Point2) -> f64 {
    -INV_4PI * disk_q(x, y).ln()
}

/// `∇ₓh = (y - |y|²x) / (2π Q)` for the unit disk.
#[inline]
fn disk_grad_x_h(x: Point2, y: Point2) -> Vec2 {
    (y - x * y.norm_sq()) * (INV_2PI / disk_q(x, y))
}

#[inline]
fn disk_robin(x: Point2) -> f64 {
    -INV_4PI * (-x.norm_sq()).ln_1p()
}

#[inline]
fn disk_grad_robin(x: Point2) -> Vec2 {
    x * (INV_2PI / (1.0 - x.norm_sq()))
}

#[inline]
fn to_c(v: Vec2) -> Complex64 {
    Complex64::new(v.x, v.y)
}

#[inline]
fn from_c(c: Complex64) -> Vec2 {
    Vec2::new(c.re, c.im)
}

fn check_finite(x: Point2, what: &'static str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_interior(rng: &mut ChaCha8Rng, rmax: f64) -> Point2 {
        loop {
            let p = Vec2::new(rng.gen_range(-rmax..rmax), rng.gen_range(-rmax..rmax));
            if p.norm() < rmax {
                return p;
            }
        }
    }

    #[test]
    fn gamma_examples() {
        let o = Vec2::ZERO;
        assert_eq!(gamma(o, Vec2::new(1.0, 0.0)).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((gamma(o, Vec2::new(e, 0.0)).unwrap() + INV_2PI).abs() < 1e-15);
        // -ln(0.5)/(2π) = 0.11031780007632579...
        assert!((gamma(o, Vec2::new(0.5, 0.0)).unwrap() - 0.110_317_800_076_325_79).abs() < 1e-15);
        assert!(matches!(gamma(o, o), Err(Error::Singularity { .. })));
    }

    #[test]
    fn disk_regular_part_examples() {
        let d = DomainModel::UnitDisk;
        assert_eq!(d.regular_part(Vec2::ZERO, Vec2::ZERO).unwrap(), 0.0);
        for s in [1e-2, 1e-4, 1e-6] {
            let v = d.regular_part(Vec2::ZERO, Vec2::new(s, 0.0)).unwrap();
            assert!(v.abs() < 1e-300 + s, "h(0, y) does not vanish: {v}");
        }
        let x = Vec2::new(0.5, 0.0);
        // -(1/2π) ln 0.75 = 0.0457860...
        let h = d.regular_part(x, x).unwrap();
        assert!((h - 0.045_786_023_869_621_7).abs() < 1e-12, "{h}");
        let a = Vec2::new(0.3, 0.1);
        let b = Vec2::new(-0.2, 0.4);
        assert!((d.regular_part(a, b).unwrap() - d.regular_part(b, a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn disk_regular_part_pins_boundary_values() {
        // h(x, y_b) = Γ(x, y_b) on the boundary makes G vanish there.
        let d = DomainModel::UnitDisk;
        let x = Vec2::new(0.5, 0.0);
        for yb in d.boundary_sampler(64) {
            let yb = yb * (1.0 - 1e-12);
            let g = gamma(x, yb).unwrap() - d.regular_part_unchecked(x, yb);
            assert!(g.abs() < 1e-10, "{g}");
        }
    }

    #[test]
    fn robin_examples() {
        let d = DomainModel::UnitDisk;
        assert_eq!(d.robin(Vec2::ZERO).unwrap(), 0.0);
        let x = Vec2::new(0.5, 0.0);
        let h = d.robin(x).unwrap();
        assert!((h - 0.022_893_011_934_810_85).abs() < 1e-12);
        assert!((h - 0.5 * d.regular_part(x, x).unwrap()).abs() < 1e-15);
        let mut prev = f64::NEG_INFINITY;
        for r in [0.0, 0.5, 0.9, 0.99, 0.999_999] {
            let v = d.robin(Vec2::new(r, 0.0)).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(prev > 1.0);
        assert!(matches!(d.robin(Vec2::new(1.0, 0.0)), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn grad_robin_examples() {
        let d = DomainModel::UnitDisk;
        assert_eq!(d.grad_robin(Vec2::ZERO).unwrap(), Vec2::ZERO);
        let g = d.grad_robin(Vec2::new(0.5, 0.0)).unwrap();
        assert!((g.x - 1.0 / (3.0 * PI)).abs() < 1e-15 && g.y == 0.0);
        let x = Vec2::new(0.31, -0.22);
        for angle in [0.3, 1.7, -2.4] {
            let lhs = d.grad_robin(x.rotated(angle)).unwrap();
            let rhs = d.grad_robin(x).unwrap().rotated(angle);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn rotate_cw_examples() {
        assert_eq!(rotate_cw(Vec2::new(1.0, 0.0)), Vec2::new(0.0, -1.0));
        assert_eq!(rotate_cw(Vec2::ZERO), Vec2::ZERO);
        assert_eq!(rotate_cw(rotate_cw(Vec2::new(3.0, 4.0))), Vec2::new(-3.0, -4.0));
    }

    #[test]
    fn dist_to_boundary_examples() {
        let d = DomainModel::UnitDisk;
        assert_eq!(d.dist_to_boundary(Vec2::ZERO), 1.0);
        assert_eq!(d.dist_to_boundary(Vec2::new(0.5, 0.0)), 0.5);
        assert!((d.dist_to_boundary(Vec2::new(0.0, 0.99)) - 0.01).abs() < 1e-15);
        assert_eq!(d.dist_to_boundary(Vec2::new(2.0, 0.0)), 0.0);
    }

    #[test]
    fn boundary_samples_are_outside_and_on_the_curve() {
        let disk = DomainModel::UnitDisk;
        for b in disk.boundary_sampler(256) {
            assert!(!disk.contains(b));
            assert!((b.norm() - 1.0).abs() <= 1e-10);
        }
        let lima = DomainModel::pullback(Arc::new(QuadraticMap::new(Complex64::new(0.3, 0.1)).unwrap()));
        for b in lima.boundary_sampler(97) {
            assert!(!lima.contains(b));
        }
    }

    #[test]
    fn harmonic_in_x() {
        let d = DomainModel::UnitDisk;
        let step = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = random_interior(&mut rng, 0.7);
            let y = random_interior(&mut rng, 0.9);
            let h = |p: Point2| d.regular_part_unchecked(p, y);
            let lap = (h(x + Vec2::new(step, 0.0)) + h(x - Vec2::new(step, 0.0)) + h(x + Vec2::new(0.0, step))
                + h(x - Vec2::new(0.0, step))
                - 4.0 * h(x))
                / (step * step);
            assert!(lap.abs() < 1e-3, "laplacian {lap}");
        }
    }

    #[test]
    fn grad_x_h_matches_finite_differences() {
        let d = DomainModel::UnitDisk;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let step = 1e-6;
        for _ in 0..100 {
            let x = random_interior(&mut rng, 0.8);
            let y = random_interior(&mut rng, 0.8);
            let g = d.grad_x_regular_part(x, y).unwrap();
            let fx = (d.regular_part_unchecked(x + Vec2::new(step, 0.0), y)
                - d.regular_part_unchecked(x - Vec2::new(step, 0.0), y))
                / (2.0 * step);
            let fy = (d.regular_part_unchecked(x + Vec2::new(0.0, step), y)
                - d.regular_part_unchecked(x - Vec2::new(0.0, step), y))
                / (2.0 * step);
            assert!((g - Vec2::new(fx, fy)).norm() < 1e-8 * (1.0 + g.norm()));
        }
    }

    #[test]
    fn diagonal_gradient_of_h_is_grad_robin() {
        let d = DomainModel::UnitDisk;
        let z = Vec2::new(0.4, -0.3);
        let a = d.grad_x_regular_part(z, z).unwrap();
        let b = d.grad_robin(z).unwrap();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn green_eval_is_consistent() {
        let d = DomainModel::UnitDisk;
        let x = Vec2::new(0.2, 0.3);
        let y = Vec2::new(-0.5, 0.1);
        let e = d.green(x, y).unwrap();
        assert_eq!(e.g, e.gamma - e.h);
        let f = d.green(y, x).unwrap();
        assert!((e.g - f.g).abs() < 1e-12);
        assert!(matches!(d.green(x, x), Err(Error::Singularity { .. })));
        assert!(matches!(d.green(x, Vec2::new(1.5, 0.0)), Err(Error::OutsideDomain { .. })));
    }

    fn assert_pullback_matches_disk(map: Arc<dyn ConformalMap>) {
        let disk = DomainModel::UnitDisk;
        let mapped = DomainModel::pullback(map);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let x = random_interior(&mut rng, 0.8);
            let y = random_interior(&mut rng, 0.8);
            let hd = disk.regular_part(x, y).unwrap();
            let hm = mapped.regular_part(x, y).unwrap();
            assert!((hd - hm).abs() < 1e-11, "{hd} vs {hm}");
            let gd = disk.grad_x_regular_part(x, y).unwrap();
            let gm = mapped.grad_x_regular_part(x, y).unwrap();
            assert!((gd - gm).norm() < 1e-10);
            assert!((disk.robin(x).unwrap() - mapped.robin(x).unwrap()).abs() < 1e-12);
            assert!((disk.grad_robin(x).unwrap() - mapped.grad_robin(x).unwrap()).norm() < 1e-11);
            assert!((disk.dist_to_boundary(x) - mapped.dist_to_boundary(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn disk_automorphisms_reproduce_the_disk() {
        assert_pullback_matches_disk(Arc::new(DiskRotation { angle: 0.7 }));
        assert_pullback_matches_disk(Arc::new(MobiusAutomorphism::new(Complex64::new(0.3, -0.2)).unwrap()));
    }

    #[test]
    fn scaled_disk_has_closed_form_robin() {
        let c = Vec2::new(0.4, -1.0);
        let r = 2.5;
        let d = DomainModel::pullback(Arc::new(ScaledDisk::new(c, r).unwrap()));
        let x = Vec2::new(1.1, -0.2);
        let s = (x - c).norm_sq() / (r * r);
        let expected = -INV_4PI * (r.ln() + (1.0 - s).ln());
        assert!((d.robin(x).unwrap() - expected).abs() < 1e-13);
        assert!((d.dist_to_boundary(x) - (r - (x - c).norm())).abs() < 1e-9);
    }

    #[test]
    fn mapped_domain_roundtrip_and_green_properties() {
        let map = Arc::new(QuadraticMap::new(Complex64::new(0.25, 0.05)).unwrap());
        let d = DomainModel::pullback(map.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..32 {
            let z = random_interior(&mut rng, 0.9);
            let w = map.forward(to_c(z));
            assert!((map.inverse(w) - to_c(z)).norm() < 1e-10);
        }
        // boundary vanishing, symmetry, gradient consistency on a non-disk domain
        let xs: Vec<Point2> = (0..8).map(|_| from_c(map.forward(to_c(random_interior(&mut rng, 0.6))))).collect();
        for &x in &xs {
            for b in d.boundary_sampler(64) {
                let inside = from_c(map.forward(map.inverse(to_c(b)) * (1.0 - 1e-7)));
                let g = d.green(x, inside).unwrap().g;
                assert!(g.abs() < 1e-5, "G at boundary {g}");
            }
            for &y in &xs {
                if x != y {
                    let a = d.green(x, y).unwrap().g;
                    let b = d.green(y, x).unwrap().g;
                    assert!((a - b).abs() < 1e-11);
                }
            }
            let step = 1e-6;
            let g = d.grad_robin(x).unwrap();
            let fx = (d.robin(x + Vec2::new(step, 0.0)).unwrap() - d.robin(x - Vec2::new(step, 0.0)).unwrap())
                / (2.0 * step);
            let fy = (d.robin(x + Vec2::new(0.0, step)).unwrap() - d.robin(x - Vec2::new(0.0, step)).unwrap())
                / (2.0 * step);
            assert!((g - Vec2::new(fx, fy)).norm() < 1e-7 * (1.0 + g.norm()));
            // near-diagonal branch agrees with the diagonal Robin gradient
            let near = d.grad_x_regular_part(x, x + Vec2::new(1e-9, 0.0)).unwrap();
            assert!((near - g).norm() < 1e-6);
        }
    }
}
