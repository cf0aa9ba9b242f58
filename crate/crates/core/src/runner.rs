//! Episode execution: dwells under the interrupt condition, behavior
//! switching, Q-updates and reward accounting, plus the two baselines.
//!
//! Rewards are collected after each dwell, so an episode with `K` dwells logs
//! `K` events; event `k` spans `[tau, tau_end]` and the `tau` sequence starts
//! at zero and never decreases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::{
    control, energy, project, radius_to_theta, BehaviorId, BehaviorLibrary, BehaviorParams,
};
use crate::env::{Mission, Observation};
use crate::error::{Error, Result};
use crate::geometry::{euler_step, Arena, EnsembleState, DEFAULT_DT};
use crate::learning::{
    explore_rate, ogd_step, q_update, q_update_terminal, select_epsilon_greedy, select_greedy,
    LearningConfig, ParamMemory, QTable,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Interrupt threshold on the behavior energy.
    pub eps_energy: f64,
    /// Longest allowed dwell, seconds.
    pub dwell_max: f64,
    /// The energy interrupt is only honored after this much dwell time.
    pub min_dwell: f64,
    /// Mission horizon, seconds.
    pub t_f: f64,
    pub dt: f64,
    pub episodes: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    /// Resample the per-behavior parameter memory at each training episode.
    pub reset_param_memory: bool,
    /// Disable online tuning everywhere (parameters stay at their dwell-entry values).
    pub freeze_params: bool,
    /// Record every k-th integrator state in the episode log; 0 disables.
    pub trajectory_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            eps_energy: 0.05,
            dwell_max: 20.0,
            min_dwell: 2.0,
            t_f: 60.0,
            dt: DEFAULT_DT,
            episodes: 200,
            eval_episodes: 50,
            seed: 0,
            reset_param_memory: true,
            freeze_params: false,
            trajectory_every: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.eps_energy) {
            return Err(Error::config("run.eps_energy", "must be finite and positive"));
        }
        if !positive(self.dt) {
            return Err(Error::config("run.dt", "must be finite and positive"));
        }
        if !positive(self.dwell_max) || self.dt >= self.dwell_max {
            return Err(Error::config("run.dwell_max", "must exceed dt"));
        }
        if !positive(self.t_f) || self.dwell_max > self.t_f {
            return Err(Error::config("run.t_f", "must be at least dwell_max"));
        }
        if !positive(self.min_dwell) || self.min_dwell > self.dwell_max {
            return Err(Error::config("run.min_dwell", "must lie in (0, dwell_max]"));
        }
        if self.episodes == 0 {
            return Err(Error::config("run.episodes", "must be at least 1"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("run.eval_episodes", "must be at least 1"));
        }
        Ok(())
    }

    fn half_step(&self) -> f64 {
        0.5 * self.dt
    }
}

/// Why a dwell ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interrupt {
    EnergyThreshold,
    DwellTimeout,
    HorizonEnd,
}

/// One dwell and the reward collected at its end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    /// Dwell start time.
    pub tau: f64,
    /// Dwell end time, i.e. the next switching time.
    pub tau_end: f64,
    pub behavior: BehaviorId,
    /// Position of the behavior in the library.
    pub behavior_index: usize,
    pub params_in: BehaviorParams,
    pub params_out: BehaviorParams,
    pub s: Observation,
    pub s_next: Observation,
    pub reward: f64,
    /// Behavior energy at the exit state under `params_out`.
    pub energy_out: f64,
    pub interrupted_by: Interrupt,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub events: Vec<SwitchEvent>,
    pub trajectory: Vec<EnsembleState>,
    pub total_reward: f64,
}

impl EpisodeLog {
    fn push(&mut self, event: SwitchEvent) {
        self.total_reward += event.reward;
        self.events.push(event);
    }

    /// Checks the switching rules: energy exits are genuine, and the dwell
    /// times tile `[0, t_f]` in order.
    pub fn check_legality(&self, cfg: &RunConfig) -> std::result::Result<(), String> {
        let tol = cfg.half_step();
        let mut prev_end = 0.0;
        for (k, e) in self.events.iter().enumerate() {
            if e.interrupted_by == Interrupt::EnergyThreshold && e.energy_out > cfg.eps_energy {
                return Err(format!(
                    "event {k}: energy exit with E = {} > {}",
                    e.energy_out, cfg.eps_energy
                ));
            }
            if e.tau != prev_end || e.tau_end < e.tau || e.tau_end > cfg.t_f + tol {
                return Err(format!(
                    "event {k}: times [{}, {}] out of order after {prev_end}",
                    e.tau, e.tau_end
                ));
            }
            prev_end = e.tau_end;
        }
        Ok(())
    }
}

/// Immutable context shared by every episode of an experiment.
#[derive(Debug, Clone)]
pub struct MissionSetup {
    pub library: BehaviorLibrary,
    pub run: RunConfig,
    pub learning: LearningConfig,
    /// Mission state at the start of each episode.
    pub mission: Mission,
    /// Region the robots start in.
    pub arena: Arena,
}

impl MissionSetup {
    pub fn robot_count(&self) -> usize {
        self.library.robot_count()
    }

    /// Fails unless `q` is `S x M` for this mission and library.
    pub fn check_table(&self, q: &QTable) -> Result<()> {
        let (s, m) = (self.mission.state_count(), self.library.len());
        if q.states() != s || q.behaviors() != m {
            return Err(Error::DimensionMismatch(format!(
                "Q-table is {}x{}, mission and library need {s}x{m}",
                q.states(),
                q.behaviors()
            )));
        }
        Ok(())
    }

    pub fn initial_table(&self, seed: u64) -> QTable {
        let mut rng = stream(seed, Phase::Init, 0, Stream::Policy);
        QTable::random(self.mission.state_count(), self.library.len(), &mut rng)
    }
}

/// Which part of an experiment an RNG stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init = 0,
    Train = 1,
    Eval = 2,
}

/// Purpose of an RNG stream within an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Robot start positions and mission noise. Shared by every evaluation
    /// mode so comparisons are paired.
    World = 0,
    /// Behavior selection and random parameters.
    Policy = 1,
    /// Parameter-memory initialization.
    Params = 2,
}

/// Independent, reproducible generator for one (phase, episode, purpose).
pub fn stream(seed: u64, phase: Phase, episode: usize, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = ((phase as u64) << 56) | ((episode as u64 & 0xFFFF_FFFF_FFFF) << 4) | purpose as u64;
    rng.set_stream(id);
    rng
}

/// Result of one dwell.
#[derive(Debug, Clone, PartialEq)]
pub struct DwellOutcome {
    pub tau: f64,
    pub tau_end: f64,
    pub params_in: BehaviorParams,
    pub params_out: BehaviorParams,
    pub energy_out: f64,
    pub interrupted_by: Interrupt,
}

/// Runs behavior `m` from `x` until its energy drops to `eps_energy` (after
/// `min_dwell`), the dwell reaches `dwell_max`, or the mission reaches `t_f`.
/// The robots, the mission and (unless frozen) the behavior's parameters all
/// advance every integrator step; the final parameters are written back to
/// `mem`.
pub fn run_dwell<R: Rng + ?Sized>(
    setup: &MissionSetup,
    m: usize,
    mem: &mut ParamMemory,
    x: &mut EnsembleState,
    mission: &mut Mission,
    rng: &mut R,
) -> Result<DwellOutcome> {
    dwell(setup, m, mem, x, mission, rng, !setup.run.freeze_params, None)
}

#[allow(clippy::too_many_arguments)]
fn dwell<R: Rng + ?Sized>(
    setup: &MissionSetup,
    m: usize,
    mem: &mut ParamMemory,
    x: &mut EnsembleState,
    mission: &mut Mission,
    rng: &mut R,
    tune: bool,
    mut trajectory: Option<&mut Vec<EnsembleState>>,
) -> Result<DwellOutcome> {
    let cfg = &setup.run;
    let spec = setup.library.get(m)?;
    let half = cfg.half_step();
    let tau = x.time();
    let params_in = mem.get(m)?;
    let mut p = params_in;
    let every = cfg.trajectory_every;

    let (interrupted_by, energy_out) = loop {
        let t = x.time();
        let elapsed = t - tau;
        let e = energy(spec, x, &p);
        if !e.is_finite() {
            return Err(Error::NonFiniteState {
                time: t,
                behavior: spec.id().name(),
            });
        }
        if t >= cfg.t_f - half {
            break (Interrupt::HorizonEnd, e);
        }
        if elapsed >= cfg.min_dwell - half && e <= cfg.eps_energy {
            break (Interrupt::EnergyThreshold, e);
        }
        if elapsed >= cfg.dwell_max - half {
            break (Interrupt::DwellTimeout, e);
        }

        let u = control(spec, x, &p)?;
        let next = euler_step(x, &u, cfg.dt).map_err(|err| match err {
            Error::NonFinite { .. } => Error::NonFiniteState {
                time: t,
                behavior: spec.id().name(),
            },
            other => other,
        })?;
        if !next.is_finite() {
            return Err(Error::NonFiniteState {
                time: next.time(),
                behavior: spec.id().name(),
            });
        }
        mission.step(x, &next, cfg.dt, rng);
        if tune {
            let cost = mission.tuning_cost(spec, &next, &p);
            p = ogd_step(p, cost.grad, cfg.dt, &setup.learning, spec.space())?;
        }
        *x = next;
        if let Some(traj) = trajectory.as_deref_mut() {
            let step = (x.time() / cfg.dt).round() as usize;
            if every > 0 && step.is_multiple_of(every) {
                traj.push(x.clone());
            }
        }
    };

    mem.set(m, p, spec.space())?;
    Ok(DwellOutcome {
        tau,
        tau_end: x.time(),
        params_in,
        params_out: p,
        energy_out,
        interrupted_by,
    })
}

/// The per-switch decision made by a policy.
struct Choice {
    m: usize,
    tune: bool,
}

/// Runs one episode from fresh robot positions and the configured mission
/// start, asking `choose` for a behavior at each switch and handing every
/// completed event (with a terminal flag) to `learn`.
fn drive<W, C, L>(
    setup: &MissionSetup,
    mem: &mut ParamMemory,
    world: &mut W,
    mut choose: C,
    mut learn: L,
) -> Result<EpisodeLog>
where
    W: Rng + ?Sized,
    C: FnMut(Observation, &Mission, &mut ParamMemory) -> Result<Choice>,
    L: FnMut(&SwitchEvent, bool) -> Result<()>,
{
    let cfg = &setup.run;
    let half = cfg.half_step();
    let mut x = EnsembleState::random(setup.robot_count(), &setup.arena, world)?;
    let mut mission = setup.mission.clone();
    let mut log = EpisodeLog::default();
    let mut trajectory = Vec::new();
    if cfg.trajectory_every > 0 {
        trajectory.push(x.clone());
    }

    while x.time() < cfg.t_f - half && !mission.is_complete() {
        let s = mission.observe(&x);
        let choice = choose(s, &mission, mem)?;
        let out = dwell(
            setup,
            choice.m,
            mem,
            &mut x,
            &mut mission,
            world,
            choice.tune && !cfg.freeze_params,
            (cfg.trajectory_every > 0).then_some(&mut trajectory),
        )?;
        let event = SwitchEvent {
            tau: out.tau,
            tau_end: out.tau_end,
            behavior: setup.library.get(choice.m)?.id(),
            behavior_index: choice.m,
            params_in: out.params_in,
            params_out: out.params_out,
            s,
            s_next: mission.observe(&x),
            reward: mission.reward(&x),
            energy_out: out.energy_out,
            interrupted_by: out.interrupted_by,
        };
        let terminal = x.time() >= cfg.t_f - half || mission.is_complete();
        learn(&event, terminal)?;
        log.push(event);
    }
    log.trajectory = trajectory;
    Ok(log)
}

/// One training episode: ε-greedy selection with a decaying explore rate and
/// a Q-update after every dwell. The caller owns the parameter memory so it
/// can persist across episodes.
pub fn run_episode_train(
    setup: &MissionSetup,
    q: &mut QTable,
    mem: &mut ParamMemory,
    episode: usize,
    seed: u64,
) -> Result<EpisodeLog> {
    setup.check_table(q)?;
    let mut world = stream(seed, Phase::Train, episode, Stream::World);
    let mut policy = stream(seed, Phase::Train, episode, Stream::Policy);
    let eps = explore_rate(&setup.learning, episode);
    let table = std::cell::RefCell::new(q);
    drive(
        setup,
        mem,
        &mut world,
        |s, _, _| {
            let m = select_epsilon_greedy(&table.borrow(), s.index(), eps, &mut policy)?;
            Ok(Choice { m, tune: true })
        },
        |e, terminal| {
            let q = &mut *table.borrow_mut();
            let (s, m) = (e.s.index(), e.behavior_index);
            if terminal {
                q_update_terminal(q, s, m, e.reward, &setup.learning)?;
            } else {
                q_update(q, s, m, e.reward, e.s_next.index(), &setup.learning)?;
            }
            Ok(())
        },
    )
}

/// Full training run: seeded table initialization, then `run.episodes`
/// episodes. `on_episode` sees each finished log in order.
pub fn train<F>(setup: &MissionSetup, seed: u64, mut on_episode: F) -> Result<QTable>
where
    F: FnMut(usize, &EpisodeLog),
{
    let mut q = setup.initial_table(seed);
    let mut mem = ParamMemory::sample(&setup.library, &mut stream(seed, Phase::Init, 0, Stream::Params));
    for episode in 0..setup.run.episodes {
        if setup.run.reset_param_memory {
            let mut rng = stream(seed, Phase::Train, episode, Stream::Params);
            mem = ParamMemory::sample(&setup.library, &mut rng);
        }
        let log = run_episode_train(setup, &mut q, &mut mem, episode, seed)?;
        on_episode(episode, &log);
    }
    Ok(q)
}

/// Greedy rollout of a trained table. Parameters are still tuned online;
/// the table is never modified.
pub fn run_episode_eval(setup: &MissionSetup, q: &QTable, episode: usize, seed: u64) -> Result<EpisodeLog> {
    setup.check_table(q)?;
    let mut world = stream(seed, Phase::Eval, episode, Stream::World);
    let mut mem = ParamMemory::sample(&setup.library, &mut stream(seed, Phase::Eval, episode, Stream::Params));
    drive(
        setup,
        &mut mem,
        &mut world,
        |s, _, _| {
            Ok(Choice {
                m: select_greedy(q, s.index())?,
                tune: true,
            })
        },
        |_, _| Ok(()),
    )
}

/// Cyclic pursuit centered on the target with radius `delta` at every
/// switch, with parameters held fixed.
pub fn run_adhoc_convoy(setup: &MissionSetup, episode: usize, seed: u64) -> Result<EpisodeLog> {
    let Mission::Convoy(convoy) = &setup.mission else {
        return Err(Error::Unsupported(format!(
            "the ad-hoc baseline needs the convoy mission, not {}",
            setup.mission.kind()
        )));
    };
    let m = setup
        .library
        .position(BehaviorId::CyclicPursuit)
        .ok_or_else(|| Error::Unsupported("the library has no cyclic pursuit behavior".into()))?;
    let theta = radius_to_theta(convoy.delta, setup.robot_count())?;
    let space = *setup.library.get(m)?.space();
    let mut world = stream(seed, Phase::Eval, episode, Stream::World);
    let mut mem = ParamMemory::sample(&setup.library, &mut stream(seed, Phase::Eval, episode, Stream::Params));
    drive(
        setup,
        &mut mem,
        &mut world,
        |_, mission, mem| {
            let Mission::Convoy(c) = mission else {
                unreachable!("mission kind is fixed for an episode")
            };
            let p = BehaviorParams::new(theta, c.z);
            mem.set(m, project(p, &space), &space)?;
            Ok(Choice { m, tune: false })
        },
        |_, _| Ok(()),
    )
}

/// Behavior and parameters drawn uniformly at every switch, held fixed
/// through the dwell.
pub fn run_random_baseline(setup: &MissionSetup, episode: usize, seed: u64) -> Result<EpisodeLog> {
    let mut world = stream(seed, Phase::Eval, episode, Stream::World);
    let mut policy = stream(seed, Phase::Eval, episode, Stream::Policy);
    let mut mem = ParamMemory::sample(&setup.library, &mut stream(seed, Phase::Eval, episode, Stream::Params));
    let lib = &setup.library;
    drive(
        setup,
        &mut mem,
        &mut world,
        |_, _, mem| {
            let m = policy.random_range(0..lib.len());
            let space = lib.get(m)?.space();
            mem.set(m, space.sample(&mut policy), space)?;
            Ok(Choice { m, tune: false })
        },
        |_, _| Ok(()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::default_library;
    use crate::env::{BoxEnv, ConvoyEnv};
    use crate::geometry::Vec2;

    fn setup(mission: Mission) -> MissionSetup {
        MissionSetup {
            library: default_library(5).unwrap(),
            run: RunConfig::default(),
            learning: LearningConfig::default(),
            mission,
            arena: Arena::default(),
        }
    }

    fn convoy_setup() -> MissionSetup {
        setup(Mission::Convoy(ConvoyEnv::default()))
    }

    fn short(mut s: MissionSetup, t_f: f64, dwell_max: f64) -> MissionSetup {
        s.run.t_f = t_f;
        s.run.dwell_max = dwell_max;
        s.run.min_dwell = s.run.min_dwell.min(dwell_max);
        s
    }

    #[test]
    fn run_config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        let bad = RunConfig {
            dt: 0.5,
            dwell_max: 0.5,
            min_dwell: 0.5,
            ..RunConfig::default()
        };
        let err = bad.validate().unwrap_err().to_string();
        assert!(err.contains("run.dwell_max"), "{err}");
        let bad = RunConfig {
            t_f: 10.0,
            ..RunConfig::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("run.t_f"));
        let bad = RunConfig {
            min_dwell: 0.0,
            ..RunConfig::default()
        };
        assert!(bad.validate().unwrap_err().to_string().contains("run.min_dwell"));
    }

    #[test]
    fn dwell_returns_immediately_when_already_converged() {
        let mut s = convoy_setup();
        s.run.min_dwell = 0.0;
        let m = s.library.position(BehaviorId::StaticFormation).unwrap();
        let mut mem = ParamMemory::sample(&s.library, &mut stream(1, Phase::Init, 0, Stream::Params));
        let mut x = EnsembleState::at_time(vec![Vec2::ZERO; 5], 3.0).unwrap();
        // Tiny theta: every edge is almost at its rest length.
        mem.set(m, BehaviorParams::new(0.05, Vec2::ZERO), s.library.get(m).unwrap().space())
            .unwrap();
        let mut mission = s.mission.clone();
        let mut rng = stream(1, Phase::Init, 0, Stream::World);
        let out = run_dwell(&s, m, &mut mem, &mut x, &mut mission, &mut rng).unwrap();
        assert_eq!(out.interrupted_by, Interrupt::EnergyThreshold);
        assert_eq!(out.tau, 3.0);
        assert_eq!(out.tau_end, 3.0);
    }

    #[test]
    fn stalled_behavior_times_out() {
        let mut s = convoy_setup();
        s.run.dwell_max = 2.0;
        s.run.freeze_params = true;
        let m = s.library.position(BehaviorId::LeaderFollower).unwrap();
        let space = *s.library.get(m).unwrap().space();
        let mut mem = ParamMemory::sample(&s.library, &mut stream(1, Phase::Init, 0, Stream::Params));
        mem.set(m, BehaviorParams::new(1.1, Vec2::new(0.3, 0.2)), &space).unwrap();
        // All robots on the leader's goal: zero control, energy stuck high.
        let mut x = EnsembleState::new(vec![Vec2::new(0.3, 0.2); 5]).unwrap();
        let mut mission = s.mission.clone();
        let mut rng = stream(1, Phase::Init, 0, Stream::World);
        let out = run_dwell(&s, m, &mut mem, &mut x, &mut mission, &mut rng).unwrap();
        assert_eq!(out.interrupted_by, Interrupt::DwellTimeout);
        assert!((out.tau_end - 2.0).abs() <= s.run.dt);
        assert!(out.energy_out > s.run.eps_energy);
    }

    #[test]
    fn static_formation_dwell_exits_on_energy() {
        let mut s = convoy_setup();
        s.run.freeze_params = true;
        s.run.dwell_max = 60.0;
        let m = s.library.position(BehaviorId::StaticFormation).unwrap();
        for seed in 0..5 {
            let mut world = stream(seed, Phase::Train, 0, Stream::World);
            let mut mem = ParamMemory::sample(&s.library, &mut world);
            let mut x = EnsembleState::random(5, &s.arena, &mut world).unwrap();
            let mut mission = s.mission.clone();
            let out = run_dwell(&s, m, &mut mem, &mut x, &mut mission, &mut world).unwrap();
            assert_eq!(out.interrupted_by, Interrupt::EnergyThreshold, "seed {seed}");
            assert!(out.energy_out <= s.run.eps_energy);
        }
    }

    #[test]
    fn gradient_flow_energy_is_monotone_with_frozen_params() {
        let s = convoy_setup();
        let mut rng = stream(5, Phase::Init, 0, Stream::World);
        for spec in s.library.specs().iter().filter(|sp| sp.id().is_gradient_flow()) {
            for _ in 0..5 {
                let p = spec.space().sample(&mut rng);
                let mut x = EnsembleState::random(5, &s.arena, &mut rng).unwrap();
                let mut e = energy(spec, &x, &p);
                for _ in 0..2000 {
                    let u = control(spec, &x, &p).unwrap();
                    x = euler_step(&x, &u, s.run.dt).unwrap();
                    let next = energy(spec, &x, &p);
                    assert!(next <= e + 1e-9, "{}: {e} -> {next}", spec.id());
                    e = next;
                }
            }
        }
    }

    #[test]
    fn single_dwell_when_horizon_equals_timeout() {
        let mut s = short(convoy_setup(), 3.0, 3.0);
        s.run.eps_energy = 1e-12;
        let mut q = s.initial_table(3);
        let mut mem = ParamMemory::sample(&s.library, &mut stream(3, Phase::Init, 0, Stream::Params));
        let log = run_episode_train(&s, &mut q, &mut mem, 0, 3).unwrap();
        assert_eq!(log.events.len(), 1);
        assert_eq!(log.events[0].interrupted_by, Interrupt::HorizonEnd);
    }

    #[test]
    fn training_is_deterministic_and_in_range() {
        let mut s = short(convoy_setup(), 10.0, 2.0);
        s.run.min_dwell = 0.5;
        s.run.episodes = 3;
        let run = |s: &MissionSetup| {
            let mut logs = Vec::new();
            let q = train(s, 42, |_, log| logs.push(log.clone())).unwrap();
            (q, logs)
        };
        let (q1, logs1) = run(&s);
        let (q2, logs2) = run(&s);
        assert_eq!(q1, q2);
        assert_eq!(logs1, logs2);
        for log in &logs1 {
            assert!(log.check_legality(&s.run).is_ok());
            assert_eq!(log.total_reward, log.events.iter().map(|e| e.reward).sum::<f64>());
            assert_eq!(log.events[0].tau, 0.0);
            for e in &log.events {
                assert!(e.s.index() < 10 && e.s_next.index() < 10);
                assert!(e.behavior_index < 5);
                assert!(s.library.get(e.behavior_index).unwrap().space().contains(&e.params_out));
            }
        }
    }

    #[test]
    fn eval_on_zero_table_always_picks_first_behavior() {
        let s = short(convoy_setup(), 10.0, 2.0);
        let q = QTable::zeros(10, 5);
        let before = q.clone();
        let log = run_episode_eval(&s, &q, 0, 9).unwrap();
        assert!(log.events.iter().all(|e| e.behavior_index == 0));
        assert_eq!(q, before);
        assert_eq!(log.total_reward, log.events.iter().map(|e| e.reward).sum::<f64>());
    }

    #[test]
    fn eval_rejects_mismatched_table() {
        let s = convoy_setup();
        let err = run_episode_eval(&s, &QTable::zeros(40, 5), 0, 0).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn adhoc_uses_cyclic_pursuit_at_fixed_radius() {
        let s = short(convoy_setup(), 10.0, 2.0);
        let theta = radius_to_theta(0.5, 5).unwrap();
        let log = run_adhoc_convoy(&s, 0, 2).unwrap();
        assert!(!log.events.is_empty());
        for e in &log.events {
            assert_eq!(e.behavior, BehaviorId::CyclicPursuit);
            assert_eq!(e.params_in.theta, theta);
            assert_eq!(e.params_out, e.params_in);
        }
        let b = setup(Mission::Box(BoxEnv::default()));
        assert!(matches!(run_adhoc_convoy(&b, 0, 2), Err(Error::Unsupported(_))));
    }

    #[test]
    fn adhoc_ring_reaches_target_distance() {
        let mut s = short(convoy_setup(), 30.0, 20.0);
        s.mission = Mission::Convoy(ConvoyEnv {
            z: Vec2::ZERO,
            v_z: Vec2::ZERO,
            sigma: 0.0,
            ..ConvoyEnv::default()
        });
        s.run.trajectory_every = 100;
        let log = run_adhoc_convoy(&s, 0, 11).unwrap();
        let last = log.trajectory.last().unwrap();
        for p in last.positions() {
            assert!((p.norm() - 0.5).abs() <= 0.05, "{p:?}");
        }
    }

    #[test]
    fn random_baseline_is_uniform_and_reproducible() {
        let mut s = short(convoy_setup(), 1.0, 0.1);
        s.run.min_dwell = 0.1;
        let mut counts = [0usize; 5];
        let mut total = 0;
        let mut episode = 0;
        while total < 10_000 {
            let log = run_random_baseline(&s, episode, 5).unwrap();
            for e in &log.events {
                counts[e.behavior_index] += 1;
                let space = s.library.get(e.behavior_index).unwrap().space();
                assert!(space.contains(&e.params_in) && e.params_in == e.params_out);
            }
            total += log.events.len();
            episode += 1;
        }
        let p = 0.2;
        let sd = (total as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - total as f64 * p).abs() <= 3.0 * sd, "{counts:?}");
        }
        assert_eq!(run_random_baseline(&s, 3, 5).unwrap(), run_random_baseline(&s, 3, 5).unwrap());
    }

    #[test]
    fn box_episode_stops_on_delivery() {
        let mut s = setup(Mission::Box(BoxEnv {
            e: Vec2::new(0.01, 0.0),
            ..BoxEnv::default()
        }));
        s.run.t_f = 20.0;
        let log = run_episode_eval(&s, &QTable::zeros(40, 5), 0, 0).unwrap();
        assert!(log.events.is_empty());
    }

    #[test]
    fn streams_are_independent() {
        let mut a = stream(1, Phase::Eval, 0, Stream::World);
        let mut b = stream(1, Phase::Eval, 0, Stream::Policy);
        let mut c = stream(1, Phase::Eval, 1, Stream::World);
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert!(x != y && x != z && y != z);
    }
}
