//! Shared geometric primitives.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Axis-aligned box, used for map bounds and sample filtering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    /// Cube of half-width `half` centered on `center`.
    pub fn centered(center: Vector3<f64>, half: f64) -> Self {
        let h = Vector3::repeat(half);
        Self {
            min: center - h,
            max: center + h,
        }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> Vector3<f64> {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    /// True when every side has strictly positive length.
    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.max[i] > self.min[i] && self.min[i].is_finite() && self.max[i].is_finite())
    }
}
