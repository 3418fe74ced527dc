//! Arena geometry and the instantaneous behavioral variables.
//!
//! Angles cross the public surface in degrees. Internally everything is
//! radians; conversion happens at the function boundary.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Plain 2-vector in the tank-centered frame.
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

    /// Unit vector pointing along `angle` (radians).
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Polar angle in radians, `atan2(y, x)`.
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Vec2, t: f64) -> Vec2 {
        Vec2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
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
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Circular tank and sampling constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArenaSpec {
    /// Tank radius in cm.
    pub radius: f64,
    /// Body length in cm.
    pub body_length: f64,
    /// Timestep of the uniformly sampled trajectories in s.
    pub dt: f64,
}

impl Default for ArenaSpec {
    fn default() -> Self {
        Self {
            radius: 25.0,
            body_length: 3.5,
            dt: 0.12,
        }
    }
}

impl ArenaSpec {
    pub fn new(radius: f64, body_length: f64, dt: f64) -> Result<Self, GeometryError> {
        let spec = Self {
            radius,
            body_length,
            dt,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (name, value) in [
            ("radius", self.radius),
            ("body_length", self.body_length),
            ("dt", self.dt),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::InvalidArena { name, value });
            }
        }
        Ok(())
    }

    /// Distance to the wall, `R - |u|`.
    pub fn wall_distance(&self, u: Vec2) -> f64 {
        self.radius - u.norm()
    }

    pub fn contains(&self, u: Vec2) -> bool {
        u.norm() <= self.radius
    }
}

/// State of one agent at one timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub wall_distance: f64,
}

impl AgentState {
    pub fn new(arena: &ArenaSpec, position: Vec2, velocity: Vec2) -> Self {
        Self {
            position,
            velocity,
            wall_distance: arena.wall_distance(position),
        }
    }
}

/// Focal agent, neighbor, and their separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemState {
    pub focal: AgentState,
    pub neighbor: AgentState,
    pub distance: f64,
}

impl SystemState {
    pub fn new(focal: AgentState, neighbor: AgentState) -> Self {
        Self {
            focal,
            neighbor,
            distance: (focal.position - neighbor.position).norm(),
        }
    }

    /// Same instant seen from the neighbor.
    pub fn swapped(&self) -> Self {
        Self {
            focal: self.neighbor,
            neighbor: self.focal,
            distance: self.distance,
        }
    }
}

/// Which of the two agents in a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairIndex {
    I,
    J,
}

/// The six instantaneous variables for a focal agent plus its leadership flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstantObservables {
    pub speed: f64,
    pub wall_distance: f64,
    pub incidence: f64,
    pub heading: f64,
    pub distance: f64,
    pub relative_heading: f64,
    pub viewing_angle: f64,
    pub leader: bool,
}

impl InstantObservables {
    /// Observables of `state.focal` relative to `state.neighbor`.
    pub fn from_state(state: &SystemState) -> Result<Self, GeometryError> {
        let f = &state.focal;
        let n = &state.neighbor;
        let heading_i = heading(f.velocity)?;
        let heading_j = heading(n.velocity)?;
        let psi_ij = viewing_angle(f.position, heading_i, n.position)?;
        let psi_ji = viewing_angle(n.position, heading_j, f.position)?;
        Ok(Self {
            speed: f.velocity.norm(),
            wall_distance: f.wall_distance,
            incidence: incidence_angle(f.position, f.velocity)?,
            heading: heading_i,
            distance: state.distance,
            relative_heading: wrap_angle(heading_j - heading_i)?,
            viewing_angle: psi_ij,
            leader: geometric_leader(psi_ij, psi_ji) == PairIndex::I,
        })
    }
}

/// Wraps degrees into `(-180, 180]`.
pub fn wrap_angle(raw: f64) -> Result<f64, GeometryError> {
    if !raw.is_finite() {
        return Err(GeometryError::NonFinite(raw));
    }
    Ok(wrap_deg(raw))
}

pub(crate) fn wrap_deg(raw: f64) -> f64 {
    let mut w = raw % 360.0;
    if w <= -180.0 {
        w += 360.0;
    } else if w > 180.0 {
        w -= 360.0;
    }
    w
}

/// Heading of a velocity vector in degrees.
pub fn heading(v: Vec2) -> Result<f64, GeometryError> {
    if !v.is_finite() {
        return Err(GeometryError::NonFinite(v.x + v.y));
    }
    if v.norm_sq() == 0.0 {
        return Err(GeometryError::UndefinedHeading);
    }
    Ok(wrap_deg(v.angle().to_degrees()))
}

/// Angle between the velocity and the outward wall normal at `u`, in degrees.
///
/// `+-90` means motion parallel to the wall; `0` means heading straight at it.
pub fn incidence_angle(u: Vec2, v: Vec2) -> Result<f64, GeometryError> {
    if u.norm_sq() == 0.0 {
        return Err(GeometryError::UndefinedNormal);
    }
    let phi = heading(v)?;
    Ok(wrap_deg(phi - u.angle().to_degrees()))
}

/// Bearing of `u_j` as seen by an agent at `u_i` heading along `heading_i` (degrees).
pub fn viewing_angle(u_i: Vec2, heading_i: f64, u_j: Vec2) -> Result<f64, GeometryError> {
    let rel = u_j - u_i;
    if rel.norm_sq() == 0.0 {
        return Err(GeometryError::DegeneratePair);
    }
    if !heading_i.is_finite() || !rel.is_finite() {
        return Err(GeometryError::NonFinite(heading_i));
    }
    Ok(wrap_deg(rel.angle().to_degrees() - heading_i))
}

/// Geometric leader of a pair: the one that must turn more to face the other.
/// Ties go to `I`, the lower index.
pub fn geometric_leader(psi_ij: f64, psi_ji: f64) -> PairIndex {
    if psi_ji.abs() > psi_ij.abs() {
        PairIndex::J
    } else {
        PairIndex::I
    }
}
