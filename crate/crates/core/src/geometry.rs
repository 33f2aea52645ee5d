use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Vec2::new(r * c, r * s)
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

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Counter-clockwise rotation by a quarter turn.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        self * (1.0 / self.norm())
    }

    /// Polar angle in (-π, π].
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotated(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Circumcenter of the triangle `(a, b, c)`.
pub fn circumcenter(a: Vec2, b: Vec2, c: Vec2) -> Vec2 {
    // Work relative to `a` to limit cancellation.
    let ab = b - a;
    let ac = c - a;
    let d = 2.0 * ab.cross(ac);
    let ab2 = ab.norm_sq();
    let ac2 = ac.norm_sq();
    let ux = (ac.y * ab2 - ab.y * ac2) / d;
    let uy = (ab.x * ac2 - ac.x * ab2) / d;
    a + Vec2::new(ux, uy)
}

/// Signed area, positive for counter-clockwise vertex order.
pub fn signed_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * (b - a).cross(c - a)
}

/// Interior angles at `a`, `b`, `c`.
pub fn triangle_angles(a: Vec2, b: Vec2, c: Vec2) -> [f64; 3] {
    let angle_at = |p: Vec2, q: Vec2, r: Vec2| {
        let u = q - p;
        let v = r - p;
        u.cross(v).abs().atan2(u.dot(v))
    };
    [angle_at(a, b, c), angle_at(b, c, a), angle_at(c, a, b)]
}

/// Barycentric coordinates of `p` with respect to `(a, b, c)`.
pub fn barycentric(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> [f64; 3] {
    let total = signed_area(a, b, c);
    [
        signed_area(p, b, c) / total,
        signed_area(a, p, c) / total,
        signed_area(a, b, p) / total,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circumcenter_is_equidistant() {
        let (a, b, c) = (Vec2::new(0.1, 0.2), Vec2::new(1.3, -0.4), Vec2::new(0.7, 0.9));
        let o = circumcenter(a, b, c);
        let ra = o.distance(a);
        assert!((o.distance(b) - ra).abs() < 1e-14);
        assert!((o.distance(c) - ra).abs() < 1e-14);
    }

    #[test]
    fn angles_sum_to_pi() {
        let angles = triangle_angles(Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.3, 1.1));
        let sum: f64 = angles.iter().sum();
        assert!((sum - std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn barycentric_reproduces_point() {
        let (a, b, c) = (Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0));
        let w = barycentric(Vec2::new(0.25, 0.5), a, b, c);
        assert!((w[0] - 0.25).abs() < 1e-15);
        assert!((w[1] - 0.25).abs() < 1e-15);
        assert!((w[2] - 0.5).abs() < 1e-15);
    }
}
