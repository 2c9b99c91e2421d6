//! Planar vectors and degree-based angle helpers.
//!
//! Every angle crossing a public boundary is in degrees. Headings are
//! normalized to `[0, 360)`; signed differences are wrapped to `(-180, 180]`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// A 2-vector in the array frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `deg`, counterclockwise from +x.
    pub fn from_heading(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Direction in degrees, `[0, 360)`. `None` for the zero vector.
    pub fn heading(self) -> Option<f64> {
        if self.x == 0.0 && self.y == 0.0 {
            None
        } else {
            Some(normalize_deg(self.y.atan2(self.x).to_degrees()))
        }
    }

    pub fn rotated(self, deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Self {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl std::iter::Sum for Vec2 {
    fn sum<I: Iterator<Item = Vec2>>(iter: I) -> Vec2 {
        iter.fold(Vec2::ZERO, |a, b| a + b)
    }
}

/// Map any finite angle onto `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Signed angular difference wrapped to `(-180, 180]`.
pub fn wrap_deg(deg: f64) -> f64 {
    let r = normalize_deg(deg);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Unsigned angular distance in `[0, 180]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    wrap_deg(a - b).abs()
}

/// Weighted circular mean of `(angle_deg, weight)` pairs.
///
/// Returns `None` when the weighted resultant vanishes (no defined mean).
pub fn circular_mean<I>(angles: I) -> Option<f64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let resultant: Vec2 = angles
        .into_iter()
        .map(|(a, w)| Vec2::from_heading(a) * w)
        .sum();
    if resultant.norm() <= 1e-12 {
        None
    } else {
        resultant.heading()
    }
}
