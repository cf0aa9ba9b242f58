//! The behavior library: weighted-consensus controllers, their energy
//! functions, interaction graphs and parameter spaces.
//!
//! A behavior bundles an edge-weight rule, a state-feedback term, an
//! interaction graph and the feasible sets for its two parameters: the
//! scalar `theta` (shape scale, separation or chord length) and the planar
//! `phi` (goal or cycle center).
//!
//! Four behaviors are gradient flows: their controller is exactly `-∂E/∂x_i`
//! of [`energy`]. Cyclic pursuit is not symmetric, so its [`energy`] is a
//! distance-to-circle surrogate used only by the interrupt condition.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotate, EnsembleState, InteractionGraph, RotationAngle, Vec2};

/// Number of behaviors in the default library.
pub const LIBRARY_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorId {
    StaticFormation,
    FormationWithLeader,
    CyclicPursuit,
    LeaderFollower,
    TriangulationCoverage,
}

impl BehaviorId {
    pub const ALL: [BehaviorId; LIBRARY_SIZE] = [
        BehaviorId::StaticFormation,
        BehaviorId::FormationWithLeader,
        BehaviorId::CyclicPursuit,
        BehaviorId::LeaderFollower,
        BehaviorId::TriangulationCoverage,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<BehaviorId> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            BehaviorId::StaticFormation => "static_formation",
            BehaviorId::FormationWithLeader => "formation_with_leader",
            BehaviorId::CyclicPursuit => "cyclic_pursuit",
            BehaviorId::LeaderFollower => "leader_follower",
            BehaviorId::TriangulationCoverage => "triangulation_coverage",
        }
    }

    /// True when the controller is the negative gradient of [`energy`].
    pub fn is_gradient_flow(self) -> bool {
        self != BehaviorId::CyclicPursuit
    }

    pub fn has_leader(self) -> bool {
        matches!(
            self,
            BehaviorId::FormationWithLeader | BehaviorId::LeaderFollower
        )
    }

    /// Uses per-edge desired separations scaled by `theta`.
    pub fn uses_separations(self) -> bool {
        matches!(
            self,
            BehaviorId::StaticFormation | BehaviorId::FormationWithLeader
        )
    }
}

impl fmt::Display for BehaviorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Feasible sets `Θ = [theta_lo, theta_hi]` and `Φ = [phi_lo, phi_hi]` (per axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub phi_lo: Vec2,
    pub phi_hi: Vec2,
}

impl Default for ParamSpace {
    fn default() -> Self {
        ParamSpace {
            theta_lo: 0.05,
            theta_hi: 1.1,
            phi_lo: Vec2::new(-1.0, -1.0),
            phi_hi: Vec2::new(1.0, 1.0),
        }
    }
}

impl ParamSpace {
    pub fn new(theta_lo: f64, theta_hi: f64, phi_lo: Vec2, phi_hi: Vec2) -> Result<Self> {
        let space = ParamSpace {
            theta_lo,
            theta_hi,
            phi_lo,
            phi_hi,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.theta_lo, self.theta_hi].iter().all(|v| v.is_finite())
            && self.phi_lo.is_finite()
            && self.phi_hi.is_finite();
        if !finite {
            return Err(Error::NonFinite {
                what: "parameter space bounds",
            });
        }
        if self.theta_lo > self.theta_hi {
            return Err(Error::config("theta", "lower bound exceeds upper bound"));
        }
        if self.phi_lo.x > self.phi_hi.x || self.phi_lo.y > self.phi_hi.y {
            return Err(Error::config("phi", "lower bound exceeds upper bound"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &BehaviorParams) -> bool {
        (self.theta_lo..=self.theta_hi).contains(&p.theta)
            && (self.phi_lo.x..=self.phi_hi.x).contains(&p.phi.x)
            && (self.phi_lo.y..=self.phi_hi.y).contains(&p.phi.y)
    }

    /// Uniform draw from `Θ x Φ`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BehaviorParams {
        BehaviorParams {
            theta: rng.random_range(self.theta_lo..=self.theta_hi),
            phi: Vec2::new(
                rng.random_range(self.phi_lo.x..=self.phi_hi.x),
                rng.random_range(self.phi_lo.y..=self.phi_hi.y),
            ),
        }
    }

    pub fn clamp_phi(&self, phi: Vec2) -> Vec2 {
        phi.clamp(self.phi_lo, self.phi_hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorParams {
    pub theta: f64,
    pub phi: Vec2,
}

impl BehaviorParams {
    pub fn new(theta: f64, phi: Vec2) -> Self {
        BehaviorParams { theta, phi }
    }
}

/// Componentwise clamp onto the parameter space.
pub fn project(p: BehaviorParams, space: &ParamSpace) -> BehaviorParams {
    BehaviorParams {
        theta: p.theta.clamp(space.theta_lo, space.theta_hi),
        phi: space.clamp_phi(p.phi),
    }
}

/// One library entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSpec {
    id: BehaviorId,
    graph: InteractionGraph,
    space: ParamSpace,
    leader: Option<usize>,
    /// Unscaled desired separation per graph edge, aligned with `graph.edges()`.
    separations: Option<Vec<f64>>,
}

impl BehaviorSpec {
    pub fn new(
        id: BehaviorId,
        graph: InteractionGraph,
        space: ParamSpace,
        leader: Option<usize>,
        separations: Option<Vec<f64>>,
    ) -> Result<Self> {
        space.validate()?;
        let n = graph.robot_count();
        if n == 0 {
            return Err(Error::TooFewRobots { min: 1, got: 0 });
        }
        match (id.has_leader(), leader) {
            (true, None) => {
                return Err(Error::InvalidGraph(format!("{id} requires a leader")));
            }
            (false, Some(_)) => {
                return Err(Error::InvalidGraph(format!("{id} takes no leader")));
            }
            (true, Some(l)) if l >= n => {
                return Err(Error::IndexOutOfRange { index: l, len: n });
            }
            _ => {}
        }
        match (id.uses_separations(), &separations) {
            (true, None) => {
                return Err(Error::InvalidGraph(format!(
                    "{id} requires per-edge separations"
                )));
            }
            (false, Some(_)) => {
                return Err(Error::InvalidGraph(format!(
                    "{id} takes no per-edge separations"
                )));
            }
            (true, Some(d)) => {
                if d.len() != graph.edge_count() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} separations for {} edges",
                        d.len(),
                        graph.edge_count()
                    )));
                }
                if !d.iter().all(|v| v.is_finite() && *v > 0.0) {
                    return Err(Error::InvalidGraph(
                        "separations must be finite and positive".into(),
                    ));
                }
            }
            _ => {}
        }
        if id == BehaviorId::CyclicPursuit && n < 2 {
            return Err(Error::TooFewRobots { min: 2, got: n });
        }
        Ok(BehaviorSpec {
            id,
            graph,
            space,
            leader,
            separations,
        })
    }

    pub fn id(&self) -> BehaviorId {
        self.id
    }

    pub fn graph(&self) -> &InteractionGraph {
        &self.graph
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn leader(&self) -> Option<usize> {
        self.leader
    }

    pub fn separations(&self) -> Option<&[f64]> {
        self.separations.as_deref()
    }

    pub fn robot_count(&self) -> usize {
        self.graph.robot_count()
    }

    /// Same behavior with a different parameter space.
    pub fn with_space(mut self, space: ParamSpace) -> Result<Self> {
        space.validate()?;
        self.space = space;
        Ok(self)
    }

    /// Desired length of edge `k` under shape parameter `theta`.
    fn desired_length(&self, k: usize, theta: f64) -> f64 {
        match &self.separations {
            Some(d) => theta * d[k],
            None => theta,
        }
    }

    /// The characteristic length matched against a mission distance: the
    /// circle radius for cyclic pursuit, `theta` itself otherwise.
    pub fn scale(&self, theta: f64) -> f64 {
        match self.id {
            BehaviorId::CyclicPursuit => theta / chord_factor(self.robot_count()),
            _ => theta,
        }
    }

    /// `d scale / d theta`.
    pub fn scale_derivative(&self) -> f64 {
        match self.id {
            BehaviorId::CyclicPursuit => 1.0 / chord_factor(self.robot_count()),
            _ => 1.0,
        }
    }

    fn check(&self, x: &EnsembleState, p: &BehaviorParams) -> Result<()> {
        if x.len() != self.robot_count() {
            return Err(Error::RobotCountMismatch {
                expected: self.robot_count(),
                got: x.len(),
            });
        }
        if !self.space.contains(p) {
            return Err(Error::InfeasibleParams {
                theta: p.theta,
                phi_x: p.phi.x,
                phi_y: p.phi.y,
            });
        }
        Ok(())
    }
}

/// `2 sin(π/n)`: ratio between the side of a regular n-gon and its circumradius.
fn chord_factor(n: usize) -> f64 {
    2.0 * (PI / n as f64).sin()
}

/// Chord length `theta = 2 r sin(π/n)` of `n` robots evenly spaced on a circle of radius `r`.
pub fn radius_to_theta(r: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewRobots { min: 2, got: n });
    }
    Ok(r * chord_factor(n))
}

/// Inverse of [`radius_to_theta`].
pub fn theta_to_radius(theta: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewRobots { min: 2, got: n });
    }
    Ok(theta / chord_factor(n))
}

/// Rotation applied to the pursuit vector: `π/n`, which turns the chord
/// towards the predecessor into the tangent of the circle.
pub fn pursuit_angle(n: usize) -> RotationAngle {
    RotationAngle::new(PI / n as f64).expect("finite angle")
}

/// Control input of every robot.
pub fn control(spec: &BehaviorSpec, x: &EnsembleState, p: &BehaviorParams) -> Result<Vec<Vec2>> {
    spec.check(x, p)?;
    let pos = x.positions();
    let mut u = vec![Vec2::ZERO; pos.len()];

    if spec.id == BehaviorId::CyclicPursuit {
        let n = pos.len();
        let angle = pursuit_angle(n);
        let radius = spec.scale(p.theta);
        for (i, ui) in u.iter_mut().enumerate() {
            let pred = (i + n - 1) % n;
            if spec.graph.contains_edge(i, pred) {
                *ui += rotate(pos[pred] - pos[i], angle);
            }
            // Goal attraction plus a radial offset that parks the robot on the
            // circle of radius r(theta) instead of at its center.
            *ui += p.phi - pos[i];
            if let Some(outward) = (pos[i] - p.phi).normalized() {
                *ui += outward * radius;
            }
        }
        return Ok(u);
    }

    for (k, &(i, j)) in spec.graph.edges().iter().enumerate() {
        let d = spec.desired_length(k, p.theta);
        let diff = pos[j] - pos[i];
        let w = diff.norm_squared() - d * d;
        u[i] += diff * w;
        u[j] -= diff * w;
    }
    if let Some(l) = spec.leader {
        u[l] += p.phi - pos[l];
    }
    Ok(u)
}

/// Energy of the ensemble under `spec`; non-negative, zero exactly at the
/// behavior's goal configuration.
///
/// # Panics
///
/// If `x` does not have the behavior's robot count.
pub fn energy(spec: &BehaviorSpec, x: &EnsembleState, p: &BehaviorParams) -> f64 {
    let pos = x.positions();
    assert_eq!(pos.len(), spec.robot_count(), "robot count mismatch");

    if spec.id == BehaviorId::CyclicPursuit {
        let r = spec.scale(p.theta);
        let sum: f64 = pos
            .iter()
            .map(|&xi| {
                let e = xi.distance(p.phi) - r;
                e * e
            })
            .sum();
        return sum / pos.len() as f64;
    }

    let mut e = 0.0;
    for (k, &(i, j)) in spec.graph.edges().iter().enumerate() {
        let d = spec.desired_length(k, p.theta);
        let gap = pos[i].distance(pos[j]).powi(2) - d * d;
        e += 0.25 * gap * gap;
    }
    if let Some(l) = spec.leader {
        e += 0.5 * (p.phi - pos[l]).norm_squared();
    }
    e
}

/// Fan triangulation of the regular n-gon: the cycle plus diagonals from robot 0.
fn formation_graph(n: usize) -> (InteractionGraph, Vec<f64>) {
    let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    edges.extend((2..n.saturating_sub(1)).map(|k| (0, k)));
    let graph = InteractionGraph::new(n, edges.into_iter().filter(|(a, b)| a != b))
        .expect("formation edges are valid");
    // Unit-side regular n-gon: robots k apart along the cycle sit
    // sin(πk/n) / sin(π/n) apart.
    let separations = graph
        .edges()
        .iter()
        .map(|&(i, j)| {
            let k = (j - i).min(n - (j - i));
            (PI * k as f64 / n as f64).sin() / (PI / n as f64).sin()
        })
        .collect();
    (graph, separations)
}

/// Strip of equilateral triangles: `i ~ i+1` and `i ~ i+2`.
fn triangulation_graph(n: usize) -> InteractionGraph {
    let edges = (0..n).flat_map(|i| [(i, i + 1), (i, i + 2)]);
    InteractionGraph::new(n, edges.filter(|&(_, j)| j < n)).expect("strip edges are valid")
}

/// The five standard behaviors for a team of `n` robots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorLibrary {
    specs: Vec<BehaviorSpec>,
}

impl BehaviorLibrary {
    pub fn new(specs: Vec<BehaviorSpec>) -> Result<Self> {
        let Some(first) = specs.first() else {
            return Err(Error::DimensionMismatch("empty behavior library".into()));
        };
        let n = first.robot_count();
        if let Some(bad) = specs.iter().find(|s| s.robot_count() != n) {
            return Err(Error::RobotCountMismatch {
                expected: n,
                got: bad.robot_count(),
            });
        }
        Ok(BehaviorLibrary { specs })
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn robot_count(&self) -> usize {
        self.specs[0].robot_count()
    }

    pub fn get(&self, index: usize) -> Result<&BehaviorSpec> {
        self.specs.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.specs.len(),
        })
    }

    pub fn by_id(&self, id: BehaviorId) -> Option<&BehaviorSpec> {
        self.specs.iter().find(|s| s.id == id)
    }

    pub fn position(&self, id: BehaviorId) -> Option<usize> {
        self.specs.iter().position(|s| s.id == id)
    }

    pub fn specs(&self) -> &[BehaviorSpec] {
        &self.specs
    }

    pub fn ids(&self) -> Vec<BehaviorId> {
        self.specs.iter().map(|s| s.id).collect()
    }
}

/// The default library with `Θ = [0.05, 1.1]`, `Φ = [-1, 1]²`.
pub fn default_library(n: usize) -> Result<BehaviorLibrary> {
    library_with_space(n, ParamSpace::default())
}

pub fn library_with_space(n: usize, space: ParamSpace) -> Result<BehaviorLibrary> {
    if n < 2 {
        return Err(Error::TooFewRobots { min: 2, got: n });
    }
    let (formation, separations) = formation_graph(n);
    let specs = vec![
        BehaviorSpec::new(
            BehaviorId::StaticFormation,
            formation.clone(),
            space,
            None,
            Some(separations.clone()),
        )?,
        BehaviorSpec::new(
            BehaviorId::FormationWithLeader,
            formation,
            space,
            Some(0),
            Some(separations),
        )?,
        BehaviorSpec::new(
            BehaviorId::CyclicPursuit,
            InteractionGraph::cycle(n),
            space,
            None,
            None,
        )?,
        BehaviorSpec::new(
            BehaviorId::LeaderFollower,
            InteractionGraph::path(n),
            space,
            Some(0),
            None,
        )?,
        BehaviorSpec::new(
            BehaviorId::TriangulationCoverage,
            triangulation_graph(n),
            space,
            None,
            None,
        )?,
    ];
    BehaviorLibrary::new(specs)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::Arena;

    fn state(points: &[(f64, f64)]) -> EnsembleState {
        EnsembleState::new(points.iter().map(|&(x, y)| Vec2::new(x, y)).collect()).unwrap()
    }

    fn pair_spec(id: BehaviorId) -> BehaviorSpec {
        let g = InteractionGraph::path(2);
        let leader = id.has_leader().then_some(1);
        let seps = id.uses_separations().then(|| vec![1.0]);
        BehaviorSpec::new(id, g, ParamSpace::default(), leader, seps).unwrap()
    }

    /// Central finite-difference gradient of the energy with respect to every
    /// coordinate.
    fn fd_energy_gradient(spec: &BehaviorSpec, x: &EnsembleState, p: &BehaviorParams, h: f64) -> Vec<Vec2> {
        let base = x.positions().to_vec();
        let eval = |pts: Vec<Vec2>| energy(spec, &EnsembleState::new(pts).unwrap(), p);
        (0..base.len())
            .map(|i| {
                let mut g = [0.0; 2];
                for (axis, slot) in g.iter_mut().enumerate() {
                    let mut plus = base.clone();
                    let mut minus = base.clone();
                    if axis == 0 {
                        plus[i].x += h;
                        minus[i].x -= h;
                    } else {
                        plus[i].y += h;
                        minus[i].y -= h;
                    }
                    *slot = (eval(plus) - eval(minus)) / (2.0 * h);
                }
                Vec2::new(g[0], g[1])
            })
            .collect()
    }

    #[test]
    fn static_formation_at_desired_distance_is_at_rest() {
        let spec = pair_spec(BehaviorId::StaticFormation);
        let x = state(&[(0.0, 0.0), (1.0, 0.0)]);
        let p = BehaviorParams::new(1.0, Vec2::ZERO);
        assert_eq!(control(&spec, &x, &p).unwrap(), vec![Vec2::ZERO; 2]);
        assert_eq!(energy(&spec, &x, &p), 0.0);
    }

    #[test]
    fn leader_follower_direct_substitution() {
        let spec = pair_spec(BehaviorId::LeaderFollower);
        let x = state(&[(0.0, 0.0), (2.0, 0.0)]);
        let p = BehaviorParams::new(1.0, Vec2::ZERO);
        let u = control(&spec, &x, &p).unwrap();
        assert_eq!(u[0], Vec2::new(6.0, 0.0));
    }

    #[test]
    fn leader_follower_goal_manifold_has_zero_energy() {
        let spec = default_library(5).unwrap().by_id(BehaviorId::LeaderFollower).unwrap().clone();
        let theta = 0.3;
        let phi = Vec2::new(0.2, -0.1);
        let x = EnsembleState::new((0..5).map(|k| phi + Vec2::new(theta * k as f64, 0.0)).collect()).unwrap();
        let p = BehaviorParams::new(theta, phi);
        assert!(energy(&spec, &x, &p) < 1e-28);
    }

    #[test]
    fn cyclic_pursuit_lone_robot_moves_to_its_circle() {
        let spec = BehaviorSpec::new(
            BehaviorId::CyclicPursuit,
            InteractionGraph::empty(2),
            ParamSpace::default(),
            None,
            None,
        )
        .unwrap();
        let x = state(&[(1.0, 0.0), (0.0, 1.0)]);
        let p = BehaviorParams::new(0.5, Vec2::ZERO);
        let u = control(&spec, &x, &p).unwrap();
        // Goal attraction (-1, 0) plus the radial offset r(theta) = 0.25 for n = 2.
        let r = theta_to_radius(0.5, 2).unwrap();
        assert!((r - 0.25).abs() < 1e-15);
        assert!((u[0] - Vec2::new(-1.0 + r, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cyclic_pursuit_ring_has_zero_energy_and_tangent_motion() {
        let lib = default_library(5).unwrap();
        let spec = lib.by_id(BehaviorId::CyclicPursuit).unwrap();
        let phi = Vec2::new(0.1, -0.2);
        let theta = 0.6;
        let r = theta_to_radius(theta, 5).unwrap();
        let x = EnsembleState::new(
            (0..5)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / 5.0;
                    phi + Vec2::new(a.cos(), a.sin()) * r
                })
                .collect(),
        )
        .unwrap();
        let p = BehaviorParams::new(theta, phi);
        assert!(energy(spec, &x, &p) < 1e-28);
        let u = control(spec, &x, &p).unwrap();
        for (xi, ui) in x.positions().iter().zip(&u) {
            assert!(ui.dot(*xi - phi).abs() < 1e-12, "radial component");
            assert!((ui.norm() - theta).abs() < 1e-12, "speed equals chord");
        }
    }

    #[test]
    fn radius_theta_map() {
        let theta = 0.7;
        let r = theta / (2.0 * (PI / 4.0).sin());
        assert!((radius_to_theta(r, 4).unwrap() - theta).abs() < 1e-12);
        assert!((theta_to_radius(radius_to_theta(0.3, 4).unwrap(), 4).unwrap() - 0.3).abs() < 1e-12);
        // 2 * 0.5 * sin(π/5) = sin(36°)
        assert!((radius_to_theta(0.5, 5).unwrap() - 0.587_785_252_292_473_1).abs() < 1e-12);
        assert!((radius_to_theta(1.0, 6).unwrap() - 1.0).abs() < 1e-12);
        assert!(radius_to_theta(1.0, 1).is_err());
        assert!(theta_to_radius(1.0, 0).is_err());
    }

    #[test]
    fn project_examples() {
        let space = ParamSpace::default();
        let p = project(BehaviorParams::new(0.01, Vec2::ZERO), &space);
        assert_eq!(p.theta, 0.05);
        let p = project(BehaviorParams::new(0.5, Vec2::new(1.5, -2.0)), &space);
        assert_eq!(p.phi, Vec2::new(1.0, -1.0));
        let feasible = BehaviorParams::new(0.3, Vec2::new(0.2, -0.7));
        assert_eq!(project(feasible, &space), feasible);
    }

    #[test]
    fn control_rejects_infeasible_params_and_mismatch() {
        let lib = default_library(5).unwrap();
        let spec = lib.get(0).unwrap();
        let x = EnsembleState::random(5, &Arena::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let bad = BehaviorParams::new(2.0, Vec2::ZERO);
        assert!(matches!(control(spec, &x, &bad), Err(Error::InfeasibleParams { .. })));
        let x4 = state(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
        let ok = BehaviorParams::new(0.5, Vec2::ZERO);
        assert!(matches!(control(spec, &x4, &ok), Err(Error::RobotCountMismatch { .. })));
    }

    #[test]
    fn default_library_shape() {
        let lib = default_library(5).unwrap();
        assert_eq!(lib.len(), 5);
        let mut ids = lib.ids();
        ids.dedup();
        assert_eq!(ids, BehaviorId::ALL.to_vec());
        for spec in lib.specs() {
            assert_eq!(spec.robot_count(), 5);
            assert!(spec.graph().is_connected(), "{} graph disconnected", spec.id());
            assert_eq!(spec.leader().is_some(), spec.id().has_leader());
        }
        let cp = lib.by_id(BehaviorId::CyclicPursuit).unwrap().graph();
        assert_eq!(cp.edge_count(), 5);
        assert!((0..5).all(|i| cp.degree(i).unwrap() == 2));
        assert!(default_library(1).is_err());
    }

    #[test]
    fn library_graphs_connected_by_bfs_for_other_sizes() {
        for n in 2..9 {
            let lib = default_library(n).unwrap();
            for spec in lib.specs() {
                let g = spec.graph();
                let mut seen = vec![false; n];
                let mut stack = vec![0];
                seen[0] = true;
                while let Some(i) = stack.pop() {
                    for &j in g.neighbors(i).unwrap() {
                        if !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
                assert!(seen.iter().all(|&s| s), "n = {n}, {}", spec.id());
            }
        }
    }

    #[test]
    fn formation_separations_are_regular_pentagon() {
        let lib = default_library(5).unwrap();
        let spec = lib.by_id(BehaviorId::StaticFormation).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        for (&(i, j), &d) in spec.graph().edges().iter().zip(spec.separations().unwrap()) {
            let k = (j - i).min(5 - (j - i));
            let expected = if k == 1 { 1.0 } else { golden };
            assert!((d - expected).abs() < 1e-12, "edge ({i}, {j})");
        }
        // A regular pentagon of side theta is an equilibrium.
        let theta = 0.4;
        let r = theta_to_radius(theta, 5).unwrap();
        let x = EnsembleState::new(
            (0..5)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / 5.0;
                    Vec2::new(a.cos(), a.sin()) * r
                })
                .collect(),
        )
        .unwrap();
        assert!(energy(spec, &x, &BehaviorParams::new(theta, Vec2::ZERO)) < 1e-28);
    }

    #[test]
    fn consensus_only_controls_sum_to_zero() {
        let lib = default_library(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for id in [BehaviorId::StaticFormation, BehaviorId::TriangulationCoverage] {
            let spec = lib.by_id(id).unwrap();
            for _ in 0..50 {
                let x = EnsembleState::random(5, &Arena::default(), &mut rng).unwrap();
                let p = spec.space().sample(&mut rng);
                let sum = control(spec, &x, &p).unwrap().into_iter().fold(Vec2::ZERO, |a, b| a + b);
                assert!(sum.norm() < 1e-9, "{id}: {sum:?}");
            }
        }
    }

    #[test]
    fn gradient_flow_controls_match_fd_energy_gradient() {
        let lib = default_library(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in lib.specs().iter().filter(|s| s.id().is_gradient_flow()) {
            for _ in 0..100 {
                let x = EnsembleState::random(5, &Arena::default(), &mut rng).unwrap();
                let p = spec.space().sample(&mut rng);
                let u = control(spec, &x, &p).unwrap();
                let g = fd_energy_gradient(spec, &x, &p, 1e-5);
                for (ui, gi) in u.iter().zip(&g) {
                    for (a, b) in [(ui.x, -gi.x), (ui.y, -gi.y)] {
                        let rel = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
                        assert!(rel <= 1e-5, "{}: {a} vs {b}", spec.id());
                    }
                }
            }
        }
    }

    #[test]
    fn energy_is_non_negative() {
        let lib = default_library(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for spec in lib.specs() {
            for _ in 0..200 {
                let x = EnsembleState::random(5, &Arena::default(), &mut rng).unwrap();
                let p = spec.space().sample(&mut rng);
                assert!(energy(spec, &x, &p) >= 0.0);
            }
        }
    }

    fn params() -> impl Strategy<Value = BehaviorParams> {
        (-1.0..2.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(t, x, y)| BehaviorParams::new(t, Vec2::new(x, y)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn project_is_idempotent_and_non_expansive(a in params(), b in params()) {
            let space = ParamSpace::default();
            let pa = project(a, &space);
            let pb = project(b, &space);
            prop_assert_eq!(project(pa, &space), pa);
            prop_assert!(space.contains(&pa));
            let dist = |u: BehaviorParams, v: BehaviorParams| {
                ((u.theta - v.theta).powi(2) + (u.phi - v.phi).norm_squared()).sqrt()
            };
            prop_assert!(dist(pa, pb) <= dist(a, b) + 1e-15);
        }

        #[test]
        fn consensus_controls_are_translation_invariant(
            seed in 0u64..1000,
            dx in -5.0..5.0f64,
            dy in -5.0..5.0f64,
        ) {
            let lib = default_library(5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = EnsembleState::random(5, &Arena::default(), &mut rng).unwrap();
            let shifted = x.translated(Vec2::new(dx, dy));
            for id in [BehaviorId::StaticFormation, BehaviorId::TriangulationCoverage] {
                let spec = lib.by_id(id).unwrap();
                let p = spec.space().sample(&mut rng);
                let u = control(spec, &x, &p).unwrap();
                let v = control(spec, &shifted, &p).unwrap();
                for (a, b) in u.iter().zip(&v) {
                    prop_assert!((*a - *b).norm() <= 1e-12 * (1.0 + a.norm()));
                }
            }
        }
    }
}
