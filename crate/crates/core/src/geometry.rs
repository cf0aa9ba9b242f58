//! Planar vectors, interaction graphs and the single-integrator ensemble.
//!
//! Every robot obeys `ẋ_i = u_i`; [`euler_step`] advances the whole team by
//! one forward-Euler step.

use std::collections::VecDeque;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default integrator step in seconds.
pub const DEFAULT_DT: f64 = 0.01;

/// A point or displacement in the plane, in meters.
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

    /// Checked constructor that refuses NaN or infinite components.
    pub fn try_new(x: f64, y: f64) -> Result<Self> {
        let v = Vec2 { x, y };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { what: "vector" })
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > f64::EPSILON).then(|| self * (1.0 / n))
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Componentwise clamp onto the box `[lo, hi]`.
    pub fn clamp(self, lo: Vec2, hi: Vec2) -> Vec2 {
        Vec2::new(self.x.clamp(lo.x, hi.x), self.y.clamp(lo.y, hi.y))
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

/// A planar rotation angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationAngle(f64);

impl RotationAngle {
    pub fn new(radians: f64) -> Result<Self> {
        if radians.is_finite() {
            Ok(RotationAngle(radians))
        } else {
            Err(Error::NonFinite {
                what: "rotation angle",
            })
        }
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

/// Rotates `v` counter-clockwise by `angle`.
pub fn rotate(v: Vec2, angle: RotationAngle) -> Vec2 {
    let (s, c) = angle.0.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// The working area, `[-1.6, 1.6] x [-1, 1]` meters by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub min: Vec2,
    pub max: Vec2,
}

impl Default for Arena {
    fn default() -> Self {
        Arena {
            min: Vec2::new(-1.6, -1.0),
            max: Vec2::new(1.6, 1.0),
        }
    }
}

impl Arena {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        Vec2::new(
            rng.random_range(self.min.x..=self.max.x),
            rng.random_range(self.min.y..=self.max.y),
        )
    }
}

/// Positions of every robot plus the simulation clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    positions: Vec<Vec2>,
    time: f64,
}

impl EnsembleState {
    pub fn new(positions: Vec<Vec2>) -> Result<Self> {
        Self::at_time(positions, 0.0)
    }

    pub fn at_time(positions: Vec<Vec2>, time: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::TooFewRobots { min: 1, got: 0 });
        }
        if !positions.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFinite { what: "positions" });
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::NonFinite { what: "time" });
        }
        Ok(EnsembleState { positions, time })
    }

    /// `n` robots drawn uniformly over the arena.
    pub fn random<R: Rng + ?Sized>(n: usize, arena: &Arena, rng: &mut R) -> Result<Self> {
        let positions = (0..n).map(|_| arena.sample(rng)).collect();
        Self::new(positions)
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().all(|p| p.is_finite())
    }

    /// Same clock, shifted positions. Used by tests and examples.
    pub fn translated(&self, offset: Vec2) -> EnsembleState {
        EnsembleState {
            positions: self.positions.iter().map(|&p| p + offset).collect(),
            time: self.time,
        }
    }
}

/// Arithmetic mean of the robot positions.
pub fn centroid(state: &EnsembleState) -> Vec2 {
    let sum = state
        .positions
        .iter()
        .fold(Vec2::ZERO, |acc, &p| acc + p);
    sum * (1.0 / state.len() as f64)
}

/// One forward-Euler step of `ẋ_i = u_i`.
pub fn euler_step(state: &EnsembleState, controls: &[Vec2], dt: f64) -> Result<EnsembleState> {
    if controls.len() != state.len() {
        return Err(Error::RobotCountMismatch {
            expected: state.len(),
            got: controls.len(),
        });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::config("dt", "must be finite and positive"));
    }
    if !controls.iter().all(|u| u.is_finite()) {
        return Err(Error::NonFinite { what: "controls" });
    }
    let positions = state
        .positions
        .iter()
        .zip(controls)
        .map(|(&p, &u)| p + u * dt)
        .collect();
    Ok(EnsembleState {
        positions,
        time: state.time + dt,
    })
}

/// Undirected interaction graph over robots `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionGraph {
    n: usize,
    /// Each undirected edge once, stored as `(i, j)` with `i < j`.
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl InteractionGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut canonical: Vec<(usize, usize)> = Vec::new();
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a robot outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at robot {a}")));
            }
            let e = (a.min(b), a.max(b));
            if canonical.contains(&e) {
                continue;
            }
            canonical.push(e);
            adjacency[e.0].push(e.1);
            adjacency[e.1].push(e.0);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(InteractionGraph {
            n,
            edges: canonical,
            adjacency,
        })
    }

    pub fn empty(n: usize) -> Self {
        InteractionGraph {
            n,
            edges: Vec::new(),
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i))).expect("path edges are valid")
    }

    /// Cycle `0 - 1 - ... - (n-1) - 0`. Degenerates to a single edge for `n = 2`.
    pub fn cycle(n: usize) -> Self {
        let edges = (0..n).map(|i| (i, (i + 1) % n)).filter(|(a, b)| a != b);
        Self::new(n, edges).expect("cycle edges are valid")
    }

    /// Star with `center` joined to every other robot.
    pub fn star(n: usize, center: usize) -> Result<Self> {
        Self::new(n, (0..n).filter(|&j| j != center).map(|j| (center, j)))
    }

    pub fn robot_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_edge(&self, a: usize, b: usize) -> bool {
        a < self.n && self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Neighbors of robot `i`, sorted ascending.
    pub fn neighbors(&self, i: usize) -> Result<&[usize]> {
        self.adjacency
            .get(i)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange {
                index: i,
                len: self.n,
            })
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        self.neighbors(i).map(<[usize]>::len)
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
