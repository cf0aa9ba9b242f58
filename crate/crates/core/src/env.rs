//! The two missions: convoy protection around a drifting target, and
//! transporting a box that only moves while a robot is in contact with it.
//!
//! Each mission supplies its own dynamics, the reward collected at switching
//! times, a discretization of its state onto a finite index set, and the
//! tuning cost whose gradient drives the behavior parameters.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::behavior::{BehaviorParams, BehaviorSpec};
use crate::error::{Error, Result};
use crate::geometry::{centroid, Arena, EnsembleState, Vec2};
use crate::learning::ParamGradient;

/// Index of a discretized mission state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(pub usize);

impl Observation {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A tuning cost value together with its parameter gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningCost {
    pub value: f64,
    pub grad: ParamGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvoyEnv {
    /// Target position.
    pub z: Vec2,
    /// Nominal target velocity, m/s.
    pub v_z: Vec2,
    /// Standard deviation of the velocity disturbance, m/s.
    pub sigma: f64,
    /// Desired robot-to-target distance.
    pub delta: f64,
    pub bins: usize,
    pub bin_width: f64,
    /// Whether the robots' tuning cost may use `delta`.
    pub delta_known: bool,
    pub arena: Arena,
}

impl Default for ConvoyEnv {
    fn default() -> Self {
        ConvoyEnv {
            z: Vec2::new(-0.9, -0.45),
            v_z: Vec2::new(0.03, 0.015),
            sigma: 0.01,
            delta: 0.5,
            bins: 10,
            bin_width: 0.3,
            delta_known: true,
            arena: Arena::default(),
        }
    }
}

impl ConvoyEnv {
    pub fn validate(&self) -> Result<()> {
        if !(self.z.is_finite() && self.v_z.is_finite()) {
            return Err(Error::config("convoy.z", "target state must be finite"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::config("convoy.sigma", "must be finite and non-negative"));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::config("convoy.delta", "must be finite and positive"));
        }
        if self.bins < 2 {
            return Err(Error::config("convoy.bins", "need at least 2 bins"));
        }
        if !(self.bin_width.is_finite() && self.bin_width > 0.0) {
            return Err(Error::config("convoy.bin_width", "must be finite and positive"));
        }
        Ok(())
    }

    /// Advances the target by `dt` with a Gaussian velocity disturbance,
    /// reflecting off the arena walls.
    pub fn step<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> ConvoyEnv {
        let noise = if self.sigma > 0.0 {
            Vec2::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * self.sigma
        } else {
            Vec2::ZERO
        };
        let mut z = self.z + (self.v_z + noise) * dt;
        let mut v = self.v_z;
        let (lo, hi) = (self.arena.min, self.arena.max);
        if z.x < lo.x || z.x > hi.x {
            z.x = reflect(z.x, lo.x, hi.x);
            v.x = -v.x;
        }
        if z.y < lo.y || z.y > hi.y {
            z.y = reflect(z.y, lo.y, hi.y);
            v.y = -v.y;
        }
        ConvoyEnv {
            z,
            v_z: v,
            ..self.clone()
        }
    }

    /// Bin of the centroid-to-target distance; the last bin absorbs overflow.
    pub fn observe(&self, x: &EnsembleState) -> Observation {
        let d = centroid(x).distance(self.z);
        self.bin_of(d)
    }

    pub fn bin_of(&self, distance: f64) -> Observation {
        let raw = (distance / self.bin_width).floor();
        let s = if raw.is_finite() && raw >= 0.0 {
            (raw as usize).min(self.bins - 1)
        } else {
            self.bins - 1
        };
        Observation(s)
    }

    /// `-‖z - x̄‖² - (1/N) Σ_i (‖x_i - z‖ - Δ)²`
    pub fn reward(&self, x: &EnsembleState) -> f64 {
        let pos = x.positions();
        let containment: f64 = pos
            .iter()
            .map(|&xi| (xi.distance(self.z) - self.delta).powi(2))
            .sum::<f64>()
            / pos.len() as f64;
        -(self.z - centroid(x)).norm_squared() - containment
    }

    pub fn state_count(&self) -> usize {
        self.bins
    }

    pub fn discretization_id(&self) -> String {
        format!(
            "convoy/centroid-distance/bins={}/width={}",
            self.bins, self.bin_width
        )
    }

    /// `‖φ - z‖² + (scale(θ) - Δ)²`, the second term only when Δ is known.
    pub fn tuning_cost(&self, spec: &BehaviorSpec, p: &BehaviorParams) -> TuningCost {
        let offset = p.phi - self.z;
        let mut value = offset.norm_squared();
        let mut grad = ParamGradient {
            theta: 0.0,
            phi: offset * 2.0,
        };
        if self.delta_known {
            let miss = spec.scale(p.theta) - self.delta;
            value += miss * miss;
            grad.theta = 2.0 * miss * spec.scale_derivative();
        }
        TuningCost { value, grad }
    }
}

/// Folds `v` back into `[lo, hi]` as if bouncing off the ends.
fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    if width <= 0.0 {
        return lo;
    }
    let period = 2.0 * width;
    let t = (v - lo).rem_euclid(period);
    if t <= width {
        lo + t
    } else {
        hi - (t - width)
    }
}

/// How the box follows the robots once one of them is within reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxCoupling {
    /// The box is displaced by the centroid's displacement.
    #[default]
    Displacement,
    /// The box jumps to the centroid.
    Teleport,
}

/// Target for `φ` while a robot is in contact with the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportWaypoint {
    /// Shift the group by the box's remaining error, `x̄ + (goal - e)`.
    /// The box rides with the centroid, so this drives it straight at the goal
    /// whichever side the robots arrived from.
    #[default]
    GroupShift,
    /// A point `push_offset` past the box toward the goal. Only transports
    /// the box when the robots happen to arrive from behind it.
    AheadOfBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxEnv {
    /// Box position.
    pub e: Vec2,
    pub goal: Vec2,
    /// Contact distance.
    pub rho: f64,
    /// Reward penalty per switch.
    pub kappa: f64,
    pub nx: usize,
    pub ny: usize,
    pub goal_tol: f64,
    /// Where the group is steered once it touches the box.
    pub transport: TransportWaypoint,
    /// Distance beyond the box used by [`TransportWaypoint::AheadOfBox`].
    pub push_offset: f64,
    /// Characteristic behavior size the tuning cost pulls `scale(θ)` toward,
    /// so a robot stays within reach while the group moves. `None` leaves θ
    /// untuned.
    pub contact_scale: Option<f64>,
    pub coupling: BoxCoupling,
    pub arena: Arena,
}

impl Default for BoxEnv {
    fn default() -> Self {
        BoxEnv {
            e: Vec2::new(0.9, 0.5),
            goal: Vec2::ZERO,
            rho: 0.2,
            kappa: 0.1,
            nx: 8,
            ny: 5,
            goal_tol: 0.05,
            transport: TransportWaypoint::GroupShift,
            push_offset: 0.2,
            contact_scale: Some(0.1),
            coupling: BoxCoupling::Displacement,
            arena: Arena::default(),
        }
    }
}

impl BoxEnv {
    pub fn validate(&self) -> Result<()> {
        if !(self.e.is_finite() && self.goal.is_finite()) {
            return Err(Error::config("box.e", "box and goal must be finite"));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::config("box.rho", "must be finite and positive"));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::config("box.kappa", "must be finite and non-negative"));
        }
        if self.nx == 0 || self.ny == 0 || self.nx * self.ny < 2 {
            return Err(Error::config("box.nx", "grid needs at least 2 cells"));
        }
        if !(self.goal_tol.is_finite() && self.goal_tol > 0.0) {
            return Err(Error::config("box.goal_tol", "must be finite and positive"));
        }
        if !(self.push_offset.is_finite() && self.push_offset >= 0.0) {
            return Err(Error::config("box.push_offset", "must be finite and non-negative"));
        }
        if let Some(c) = self.contact_scale {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::config("box.contact_scale", "must be finite and positive"));
            }
        }
        Ok(())
    }

    fn in_contact(&self, x: &EnsembleState) -> bool {
        x.positions()
            .iter()
            .map(|p| p.distance(self.e))
            .fold(f64::INFINITY, f64::min)
            <= self.rho
    }

    /// Moves the box with the robots if the closest robot (before the step)
    /// is within `rho`; otherwise the box stays put.
    pub fn step(&self, x_before: &EnsembleState, x_after: &EnsembleState) -> BoxEnv {
        if !self.in_contact(x_before) {
            return self.clone();
        }
        let e = match self.coupling {
            BoxCoupling::Displacement => self.e + (centroid(x_after) - centroid(x_before)),
            BoxCoupling::Teleport => centroid(x_after),
        };
        BoxEnv { e, ..self.clone() }
    }

    /// Row-major grid cell of the box over the arena, clamped at the borders.
    pub fn observe(&self) -> Observation {
        let a = &self.arena;
        let cell = |v: f64, lo: f64, span: f64, n: usize| {
            let raw = ((v - lo) / span * n as f64).floor();
            if raw.is_nan() || raw < 0.0 {
                0
            } else {
                (raw as usize).min(n - 1)
            }
        };
        let ix = cell(self.e.x, a.min.x, a.width(), self.nx);
        let iy = cell(self.e.y, a.min.y, a.height(), self.ny);
        Observation(iy * self.nx + ix)
    }

    /// `-(κ + ‖e - goal‖)`
    pub fn reward(&self) -> f64 {
        -(self.kappa + self.e.distance(self.goal))
    }

    pub fn is_delivered(&self) -> bool {
        self.e.distance(self.goal) <= self.goal_tol
    }

    pub fn state_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn discretization_id(&self) -> String {
        let a = &self.arena;
        format!(
            "box/grid={}x{}/arena=[{},{}]x[{},{}]",
            self.nx, self.ny, a.min.x, a.max.x, a.min.y, a.max.y
        )
    }

    /// Where the leader or cycle center should head: the box itself until a
    /// robot touches it, then the configured transport waypoint, clamped to
    /// the behavior's goal space.
    pub fn waypoint(&self, x: &EnsembleState, spec: &BehaviorSpec) -> Vec2 {
        if !self.in_contact(x) {
            return self.e;
        }
        let q = match self.transport {
            TransportWaypoint::GroupShift => centroid(x) + (self.goal - self.e),
            TransportWaypoint::AheadOfBox => {
                let toward_goal = (self.goal - self.e).normalized().unwrap_or(Vec2::ZERO);
                self.e + toward_goal * self.push_offset
            }
        };
        spec.space().clamp_phi(q)
    }

    /// `‖φ - q‖²` with `q` the current [`waypoint`](Self::waypoint), plus
    /// `(scale(θ) - contact_scale)²` when a contact scale is set.
    pub fn tuning_cost(&self, x: &EnsembleState, spec: &BehaviorSpec, p: &BehaviorParams) -> TuningCost {
        let offset = p.phi - self.waypoint(x, spec);
        let mut value = offset.norm_squared();
        let mut grad = ParamGradient {
            theta: 0.0,
            phi: offset * 2.0,
        };
        if let Some(target) = self.contact_scale {
            let miss = spec.scale(p.theta) - target;
            value += miss * miss;
            grad.theta = 2.0 * miss * spec.scale_derivative();
        }
        TuningCost { value, grad }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionKind {
    Convoy,
    Box,
}

impl std::fmt::Display for MissionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MissionKind::Convoy => "convoy",
            MissionKind::Box => "box",
        })
    }
}

/// Mission state advanced alongside the robots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Mission {
    Convoy(ConvoyEnv),
    Box(BoxEnv),
}

impl Mission {
    pub fn kind(&self) -> MissionKind {
        match self {
            Mission::Convoy(_) => MissionKind::Convoy,
            Mission::Box(_) => MissionKind::Box,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Mission::Convoy(c) => c.validate(),
            Mission::Box(b) => b.validate(),
        }
    }

    /// One integrator step of the mission dynamics.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        x_before: &EnsembleState,
        x_after: &EnsembleState,
        dt: f64,
        rng: &mut R,
    ) {
        match self {
            Mission::Convoy(c) => *c = c.step(dt, rng),
            Mission::Box(b) => *b = b.step(x_before, x_after),
        }
    }

    pub fn observe(&self, x: &EnsembleState) -> Observation {
        match self {
            Mission::Convoy(c) => c.observe(x),
            Mission::Box(b) => b.observe(),
        }
    }

    pub fn reward(&self, x: &EnsembleState) -> f64 {
        match self {
            Mission::Convoy(c) => c.reward(x),
            Mission::Box(b) => b.reward(),
        }
    }

    pub fn state_count(&self) -> usize {
        match self {
            Mission::Convoy(c) => c.state_count(),
            Mission::Box(b) => b.state_count(),
        }
    }

    pub fn discretization_id(&self) -> String {
        match self {
            Mission::Convoy(c) => c.discretization_id(),
            Mission::Box(b) => b.discretization_id(),
        }
    }

    /// True once the mission is accomplished and the episode may stop early.
    pub fn is_complete(&self) -> bool {
        match self {
            Mission::Convoy(_) => false,
            Mission::Box(b) => b.is_delivered(),
        }
    }

    pub fn tuning_cost(&self, spec: &BehaviorSpec, x: &EnsembleState, p: &BehaviorParams) -> TuningCost {
        match self {
            Mission::Convoy(c) => c.tuning_cost(spec, p),
            Mission::Box(b) => b.tuning_cost(x, spec, p),
        }
    }
}

/// Free-function form of [`Mission::tuning_cost`].
pub fn tuning_cost(
    mission: &Mission,
    spec: &BehaviorSpec,
    x: &EnsembleState,
    p: &BehaviorParams,
) -> TuningCost {
    mission.tuning_cost(spec, x, p)
}
