//! Compensated summation.
//!
//! All reductions that feed trajectories or digests go through these
//! accumulators in a fixed order so results are bit-stable.

use crate::Vec2;

/// Kahan accumulator for `f64`.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }

    pub fn sum_iter<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc.value()
    }
}

/// Component-wise Kahan accumulator for planar vectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanVec2 {
    x: KahanSum,
    y: KahanSum,
}

impl KahanVec2 {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: Vec2) {
        self.x.add(v.x);
        self.y.add(v.y);
    }

    #[inline]
    pub fn value(&self) -> Vec2 {
        Vec2::new(self.x.value(), self.y.value())
    }

    pub fn sum_iter<I: IntoIterator<Item = Vec2>>(iter: I) -> Vec2 {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc.value()
    }
}
