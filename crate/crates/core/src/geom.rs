//! Planar kinematics of constant-velocity agents and the collision-prediction
//! (CP) parameters derived from their relative motion.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vector in the plane, in meters (or m/s for velocities).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// The vector rotated by +90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
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

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Position and velocity of one agent, or of one agent relative to another.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    pub velocity: Vec2,
}

impl AgentState {
    pub const fn new(position: Vec2, velocity: Vec2) -> Self {
        Self { position, velocity }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    /// Position after moving for `t` seconds at constant velocity.
    pub fn position_at(&self, t: f64) -> Vec2 {
        self.position + self.velocity * t
    }

    /// State of `other` as seen from `self`.
    pub fn relative_to(&self, other: &AgentState) -> AgentState {
        AgentState::new(
            other.position - self.position,
            other.velocity - self.velocity,
        )
    }
}

/// Collision-prediction parameters of a pair: minimum passing distance `d_m`,
/// time of minimum distance `t_m` (negative when receding) and relative speed `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpParams {
    pub d_m: f64,
    pub t_m: f64,
    pub v: f64,
}

impl CpParams {
    pub fn is_finite(&self) -> bool {
        self.d_m.is_finite() && self.t_m.is_finite() && self.v.is_finite()
    }

    /// Noise-free pair distance at time `t`.
    pub fn distance_at(&self, t: f64) -> f64 {
        (self.d_m * self.d_m + self.v * self.v * (self.t_m - t).powi(2)).sqrt()
    }
}

/// Agents are discs of equal radius; contact happens at center distance `2r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyGeometry {
    pub radius: f64,
}

impl BodyGeometry {
    pub fn new(radius: f64) -> Result<Self> {
        if radius > 0.0 && radius.is_finite() {
            Ok(Self { radius })
        } else {
            Err(Error::Config(format!(
                "body radius must be positive, got {radius}"
            )))
        }
    }

    pub fn contact_distance(&self) -> f64 {
        2.0 * self.radius
    }
}

/// CP parameters of a relative state (position and velocity of B relative to A).
pub fn cp_params(rel: &AgentState) -> Result<CpParams> {
    let x = rel.position;
    let v = rel.velocity;
    let v_sq = v.norm_sq();
    if v_sq == 0.0 {
        return Err(Error::ZeroRelativeSpeed);
    }
    let speed = v_sq.sqrt();
    let xv = x.dot(v);
    let t_m = -xv / v_sq;
    // |x|^2 |v|^2 - (x.v)^2 equals (x cross v)^2; the cross product avoids the
    // cancellation when the miss distance is small next to |x|.
    Ok(CpParams {
        d_m: x.cross(v).abs() / speed,
        t_m,
        v: speed,
    })
}

/// Time of first contact for discs of radius `r`.
pub fn collision_time(cp: &CpParams, body: &BodyGeometry) -> Result<f64> {
    let contact = body.contact_distance();
    if cp.t_m <= 0.0 || cp.d_m >= contact || cp.v <= 0.0 {
        return Err(Error::NoCollision {
            d_m: cp.d_m,
            t_m: cp.t_m,
            contact,
        });
    }
    Ok(cp.t_m - (contact * contact - cp.d_m * cp.d_m).sqrt() / cp.v)
}

/// Brute-force minimum of the pair distance over the grid `0, dt, 2dt, ..., horizon`.
///
/// Returns `(d_min, t_at_min)`; the first grid point wins ties.
pub fn min_distance_oracle(a: &AgentState, b: &AgentState, horizon: f64, dt: f64) -> (f64, f64) {
    assert!(horizon > 0.0 && dt > 0.0, "horizon and dt must be positive");
    let rel = a.relative_to(b);
    let steps = (horizon / dt).floor() as usize;
    let mut best = (rel.position.norm(), 0.0);
    for k in 1..=steps {
        let t = k as f64 * dt;
        let d = rel.position_at(t).norm();
        if d < best.0 {
            best = (d, t);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(x: (f64, f64), v: (f64, f64)) -> AgentState {
        AgentState::new(Vec2::new(x.0, x.1), Vec2::new(v.0, v.1))
    }

    #[test]
    fn head_on() {
        let cp = cp_params(&rel((-10.0, 0.0), (1.0, 0.0))).unwrap();
        assert_eq!(cp.d_m, 0.0);
        assert_eq!(cp.t_m, 10.0);
        assert_eq!(cp.v, 1.0);
    }

    #[test]
    fn offset_pass() {
        let cp = cp_params(&rel((-5.0, 2.0), (1.0, 0.0))).unwrap();
        assert!((cp.d_m - 2.0).abs() < 1e-12);
        assert!((cp.t_m - 5.0).abs() < 1e-12);
        assert_eq!(cp.v, 1.0);
    }

    #[test]
    fn zero_speed_is_an_error() {
        assert!(matches!(
            cp_params(&rel((3.0, 4.0), (0.0, 0.0))),
            Err(Error::ZeroRelativeSpeed)
        ));
    }

    #[test]
    fn collision_time_cases() {
        let body = BodyGeometry::new(0.17).unwrap();
        let cp = CpParams {
            d_m: 0.0,
            t_m: 10.0,
            v: 1.0,
        };
        assert!((collision_time(&cp, &body).unwrap() - 9.66).abs() < 1e-12);

        let r = 0.4;
        let tangent = CpParams {
            d_m: 2.0 * r,
            t_m: 5.0,
            v: 1.0,
        };
        let body_r = BodyGeometry::new(r).unwrap();
        // d_m == 2r is a touch, not a collision, by the strict inequality.
        assert!(collision_time(&tangent, &body_r).is_err());
        let almost = CpParams {
            d_m: 2.0 * r - 1e-12,
            ..tangent
        };
        assert!((collision_time(&almost, &body_r).unwrap() - 5.0).abs() < 1e-5);

        let miss = CpParams {
            d_m: 1.0,
            t_m: 5.0,
            v: 1.0,
        };
        assert!(matches!(
            collision_time(&miss, &body),
            Err(Error::NoCollision { .. })
        ));
        let behind = CpParams {
            d_m: 0.0,
            t_m: -1.0,
            v: 1.0,
        };
        assert!(collision_time(&behind, &body).is_err());
    }

    #[test]
    fn collision_time_non_increasing_in_radius() {
        let cp = CpParams {
            d_m: 0.05,
            t_m: 3.0,
            v: 0.7,
        };
        let mut last = f64::INFINITY;
        for k in 1..40 {
            let tc = collision_time(&cp, &BodyGeometry::new(0.03 * k as f64).unwrap()).unwrap();
            assert!(tc <= last);
            last = tc;
        }
    }

    #[test]
    fn oracle_head_on_and_identical() {
        let a = AgentState::default();
        let b = rel((-10.0, 0.0), (1.0, 0.0));
        let (d, t) = min_distance_oracle(&a, &b, 20.0, 1e-3);
        assert!(d < 1e-9);
        assert!((t - 10.0).abs() < 1e-6);
        let (d, t) = min_distance_oracle(&b, &b, 5.0, 0.1);
        assert_eq!((d, t), (0.0, 0.0));
    }
}
