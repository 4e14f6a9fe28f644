//! Smooth cutoffs near the boundary and the smoothed logarithm.
//!
//! Both cutoffs are functions of the distance to the boundary composed with
//! the quintic smoothstep `s(t) = 6t⁵ - 15t⁴ + 10t³`, which is C² with
//! vanishing first and second derivatives at both ends of the band.
//!
//! | field | zero for                  | one for           |
//! |-------|---------------------------|-------------------|
//! | `θ`   | `dist ≤ ρ0/3`, outside D  | `dist ≥ ρ0/2`     |
//! | `χ`   | `dist ≤ ρ0/20`, outside D | `dist ≥ ρ0/10`    |

use crate::geometry::DomainModel;
use crate::{Error, Point2, Result, Vec2};

/// Quintic smoothstep on `[0, 1]`, clamped outside.
#[inline]
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }
}

/// Derivative of [`smoothstep`].
#[inline]
pub fn smoothstep_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let u = t * (t - 1.0);
        30.0 * u * u
    }
}

#[derive(Debug, Clone, Copy)]
struct Band {
    start: f64,
    width: f64,
}

impl Band {
    #[inline]
    fn value(self, dist: f64) -> f64 {
        smoothstep((dist - self.start) / self.width)
    }

    #[inline]
    fn slope(self, dist: f64) -> f64 {
        smoothstep_derivative((dist - self.start) / self.width) / self.width
    }
}

/// The cutoff functions `θ` and `χ` for a given safety radius `ρ0`.
#[derive(Debug, Clone)]
pub struct CutoffPair {
    rho0: f64,
    domain: DomainModel,
    theta: Band,
    chi: Band,
}

/// Builds `θ` and `χ` for `domain` and safety radius `rho0`.
pub fn build_cutoffs(domain: &DomainModel, rho0: f64) -> Result<CutoffPair> {
    if !(rho0 > 0.0 && rho0.is_finite()) {
        return Err(Error::config(format!("rho0 must be positive and finite, got {rho0}")));
    }
    if rho0 / 3.0 >= domain.inradius() {
        return Err(Error::config(format!(
            "rho0 = {rho0} leaves no points farther than rho0/3 from the boundary"
        )));
    }
    Ok(CutoffPair {
        rho0,
        domain: domain.clone(),
        theta: Band { start: rho0 / 3.0, width: rho0 / 2.0 - rho0 / 3.0 },
        chi: Band { start: rho0 / 20.0, width: rho0 / 10.0 - rho0 / 20.0 },
    })
}

impl CutoffPair {
    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn domain(&self) -> &DomainModel {
        &self.domain
    }

    pub fn eval_theta(&self, x: Point2) -> f64 {
        if !self.domain.contains(x) {
            return 0.0;
        }
        self.theta.value(self.domain.dist_to_boundary(x))
    }

    pub fn eval_chi(&self, x: Point2) -> f64 {
        if !self.domain.contains(x) {
            return 0.0;
        }
        self.chi.value(self.domain.dist_to_boundary(x))
    }

    /// Analytic gradient of `θ` by the chain rule through the smoothstep.
    pub fn grad_theta(&self, x: Point2) -> Vec2 {
        self.theta_with_grad(x).1
    }

    /// `θ(x)` and `∇θ(x)` sharing one distance evaluation.
    pub fn theta_with_grad(&self, x: Point2) -> (f64, Vec2) {
        if !self.domain.contains(x) {
            return (0.0, Vec2::ZERO);
        }
        let d = self.domain.dist_to_boundary(x);
        let slope = self.theta.slope(d);
        let grad = if slope == 0.0 { Vec2::ZERO } else { self.domain.grad_dist_to_boundary(x) * slope };
        (self.theta.value(d), grad)
    }
}

/// `ln^{ρ0}(r)`: equal to `ln r` for `r ≥ ρ0/100`, continued below by the
/// quadratic `ln c + (r² - c²) / (2c²)` which matches value and slope at `c`.
#[derive(Debug, Clone, Copy)]
pub struct SmoothedLog {
    rho0: f64,
    cut_radius: f64,
}

impl SmoothedLog {
    pub fn new(rho0: f64) -> Result<Self> {
        if !(rho0 > 0.0 && rho0.is_finite()) {
            return Err(Error::config(format!("rho0 must be positive and finite, got {rho0}")));
        }
        Ok(Self { rho0, cut_radius: rho0 / 100.0 })
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn cut_radius(&self) -> f64 {
        self.cut_radius
    }

    pub fn value(&self, r: f64) -> f64 {
        let c = self.cut_radius;
        if r >= c {
            r.ln()
        } else {
            c.ln() + (r * r - c * c) / (2.0 * c * c)
        }
    }

    /// `d/dr ln^{ρ0}(r)`.
    pub fn derivative(&self, r: f64) -> f64 {
        let c = self.cut_radius;
        if r >= c {
            1.0 / r
        } else {
            r / (c * c)
        }
    }

    /// `∇ₓ ln^{ρ0}|x| = x / max(|x|², c²)`; the kernel stores the squared cut radius.
    #[inline]
    pub fn cut_radius_sq(&self) -> f64 {
        self.cut_radius * self.cut_radius
    }
}

/// Free-function form of [`SmoothedLog::value`].
pub fn smoothed_log(s: &SmoothedLog, r: f64) -> f64 {
    s.value(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn at_distance(d: f64) -> Point2 {
        Vec2::new(1.0 - d, 0.0)
    }

    #[test]
    fn theta_examples() {
        let c = build_cutoffs(&DomainModel::UnitDisk, 0.3).unwrap();
        assert_eq!(c.eval_theta(Vec2::ZERO), 1.0);
        assert_eq!(c.eval_theta(at_distance(0.05)), 0.0);
        assert!((c.eval_theta(at_distance(0.125)) - 0.5).abs() < 1e-12);
        assert!((6.0 * 0.5f64.powi(5) - 15.0 * 0.5f64.powi(4) + 10.0 * 0.5f64.powi(3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn support_and_plateaus() {
        let c = build_cutoffs(&DomainModel::UnitDisk, 0.3).unwrap();
        for k in 0..=1000 {
            let d = k as f64 / 1000.0;
            let x = at_distance(d).rotated(k as f64);
            let (t, ch) = (c.eval_theta(x), c.eval_chi(x));
            assert!((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&ch));
            if d >= 0.15 {
                assert_eq!(t, 1.0);
            }
            if d < 0.0999 {
                assert_eq!(t, 0.0);
            }
            if d >= 0.03 {
                assert_eq!(ch, 1.0);
            }
        }
        let outside = Vec2::new(1.2, 0.3);
        assert_eq!(c.eval_theta(outside), 0.0);
        assert_eq!(c.eval_chi(outside), 0.0);
        assert_eq!(c.grad_theta(outside), Vec2::ZERO);
        assert_eq!(c.grad_theta(Vec2::ZERO), Vec2::ZERO);
    }

    #[test]
    fn rejects_oversized_rho0() {
        assert!(matches!(build_cutoffs(&DomainModel::UnitDisk, 3.0), Err(Error::Config(_))));
        assert!(matches!(build_cutoffs(&DomainModel::UnitDisk, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn grad_theta_matches_finite_differences_in_band() {
        let c = build_cutoffs(&DomainModel::UnitDisk, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let step = 1e-7;
        for _ in 0..50 {
            let d = rng.gen_range(0.102..0.148);
            let x = at_distance(d).rotated(rng.gen_range(0.0..6.28));
            let g = c.grad_theta(x);
            let fx = (c.eval_theta(x + Vec2::new(step, 0.0)) - c.eval_theta(x - Vec2::new(step, 0.0))) / (2.0 * step);
            let fy = (c.eval_theta(x + Vec2::new(0.0, step)) - c.eval_theta(x - Vec2::new(0.0, step))) / (2.0 * step);
            let rel = (g - Vec2::new(fx, fy)).norm() / g.norm();
            assert!(rel < 1e-6, "relative gradient error {rel}");
        }
    }

    #[test]
    fn theta_is_rotation_invariant() {
        let c = build_cutoffs(&DomainModel::UnitDisk, 0.4).unwrap();
        let x = Vec2::new(0.83, 0.02);
        for a in [0.1, 1.0, 2.5, -3.0] {
            assert!((c.eval_theta(x.rotated(a)) - c.eval_theta(x)).abs() < 1e-12);
            assert!((c.eval_chi(x.rotated(a)) - c.eval_chi(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_is_c2_across_band_edges() {
        // the one-sided second difference at a band edge shrinks linearly with the step
        let c = build_cutoffs(&DomainModel::UnitDisk, 0.3).unwrap();
        for edge in [0.1, 0.15] {
            let second = |h: f64| {
                (c.eval_theta(at_distance(edge + h)) - 2.0 * c.eval_theta(at_distance(edge))
                    + c.eval_theta(at_distance(edge - h)))
                    / (h * h)
            };
            let (coarse, fine) = (second(1e-4).abs(), second(1e-5).abs());
            assert!(fine < 0.2 * coarse && fine < 1.0, "{coarse} {fine}");
        }
    }

    #[test]
    fn smoothed_log_examples() {
        let s = SmoothedLog::new(1.0).unwrap();
        assert_eq!(smoothed_log(&s, 0.01), 0.01f64.ln());
        assert_eq!(smoothed_log(&s, 0.02), 0.02f64.ln());
        assert!((smoothed_log(&s, 0.0) - (0.01f64.ln() - 0.5)).abs() < 1e-14);
        assert!((smoothed_log(&s, 0.0) + 5.105_170_185_988_091).abs() < 1e-12);
    }

    #[test]
    fn smoothed_log_is_c1_and_monotone() {
        let s = SmoothedLog::new(0.45).unwrap();
        let c = s.cut_radius();
        let h = 1e-9 * c;
        let left = (s.value(c) - s.value(c - h)) / h;
        let right = (s.value(c + h) - s.value(c)) / h;
        assert!((left - right).abs() * c < 1e-5);
        assert!((s.derivative(c - 1e-300) - s.derivative(c)).abs() * c < 1e-10);
        let mut prev = s.value(0.0);
        for k in 1..2000 {
            let v = s.value(k as f64 * c / 500.0);
            assert!(v >= prev);
            prev = v;
        }
    }
}
