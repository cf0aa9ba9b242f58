//! Experiment commands: configuration, training and evaluation runs, and the
//! files they leave behind.
//!
//! A training run directory holds `config.json`, `qtable.json`,
//! `rewards.csv` and `manifest.json`. It is assembled in a sibling staging
//! directory and renamed into place at the end, so a failed run leaves
//! nothing behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior::{library_with_space, BehaviorId, ParamSpace};
use crate::env::{BoxEnv, ConvoyEnv, Mission, MissionKind};
use crate::error::{Error, Result};
use crate::learning::{LearningConfig, QTable};
use crate::runner::{
    run_adhoc_convoy, run_episode_eval, run_random_baseline, train, EpisodeLog, MissionSetup,
    RunConfig,
};

pub const CONFIG_FILE: &str = "config.json";
pub const QTABLE_FILE: &str = "qtable.json";
pub const REWARDS_FILE: &str = "rewards.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const COMPARE_FILE: &str = "compare.csv";
pub const COMPARE_SUMMARY_FILE: &str = "compare-summary.json";

/// Everything a run needs, as one JSON document. Omitted fields take their
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mission: MissionKind,
    /// Number of robots.
    pub robots: usize,
    pub run: RunConfig,
    pub learning: LearningConfig,
    /// Feasible parameter space shared by every behavior.
    pub library: ParamSpace,
    pub convoy: ConvoyEnv,
    #[serde(rename = "box")]
    pub box_env: BoxEnv,
    /// Directory the run writes into.
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mission: MissionKind::Convoy,
            robots: 5,
            run: RunConfig::default(),
            learning: LearningConfig::default(),
            library: ParamSpace::default(),
            convoy: ConvoyEnv::default(),
            box_env: BoxEnv::default(),
            out_dir: PathBuf::from("runs/latest"),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn for_mission(mission: MissionKind) -> Self {
        ExperimentConfig {
            mission,
            ..ExperimentConfig::default()
        }
    }

    /// Reads, applies overrides, and validates.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.run.seed = seed;
        }
        if let Some(out) = &overrides.out {
            self.out_dir = out.clone();
        }
    }

    /// Checks every range constraint, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.robots < 2 {
            return Err(Error::config("robots", "need at least 2 robots"));
        }
        self.run.validate()?;
        self.learning.validate()?;
        self.library.validate().map_err(|e| match e {
            Error::InvalidConfig { field, reason } => Error::config(format!("library.{field}"), reason),
            other => other,
        })?;
        let arena = match self.mission {
            MissionKind::Convoy => {
                self.convoy.validate()?;
                self.convoy.arena
            }
            MissionKind::Box => {
                self.box_env.validate()?;
                self.box_env.arena
            }
        };
        if !(arena.min.is_finite() && arena.max.is_finite())
            || arena.width() <= 0.0
            || arena.height() <= 0.0
        {
            return Err(Error::config(
                format!("{}.arena", self.mission),
                "must be a finite box with positive width and height",
            ));
        }
        Ok(())
    }

    pub fn mission_state(&self) -> Mission {
        match self.mission {
            MissionKind::Convoy => Mission::Convoy(self.convoy.clone()),
            MissionKind::Box => Mission::Box(self.box_env.clone()),
        }
    }

    pub fn setup(&self) -> Result<MissionSetup> {
        self.validate()?;
        let mission = self.mission_state();
        let arena = match &mission {
            Mission::Convoy(c) => c.arena,
            Mission::Box(b) => b.arena,
        };
        Ok(MissionSetup {
            library: library_with_space(self.robots, self.library)?,
            run: self.run.clone(),
            learning: self.learning,
            mission,
            arena,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Persisted Q-table with what it was trained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QTableFile {
    pub states: usize,
    pub behaviors: usize,
    pub behavior_ids: Vec<BehaviorId>,
    pub discretization: String,
    pub values: Vec<Vec<f64>>,
}

impl QTableFile {
    pub fn new(q: &QTable, setup: &MissionSetup) -> Self {
        QTableFile {
            states: q.states(),
            behaviors: q.behaviors(),
            behavior_ids: setup.library.ids(),
            discretization: setup.mission.discretization_id(),
            values: q.rows().map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn table(&self) -> Result<QTable> {
        QTable::from_rows(self.values.clone())
    }

    /// Fails unless this table was trained for the same states, behaviors
    /// and discretization as `setup`.
    pub fn check_compatible(&self, setup: &MissionSetup) -> Result<()> {
        let states = setup.mission.state_count();
        if self.states != states {
            return Err(Error::DimensionMismatch(format!(
                "Q-table has {} states, the configured mission has {states}",
                self.states
            )));
        }
        let ids = setup.library.ids();
        if self.behaviors != ids.len() || self.behavior_ids != ids {
            return Err(Error::DimensionMismatch(format!(
                "Q-table behaviors {:?} do not match the library {:?}",
                self.behavior_ids, ids
            )));
        }
        let disc = setup.mission.discretization_id();
        if self.discretization != disc {
            return Err(Error::DimensionMismatch(format!(
                "Q-table discretization `{}` does not match `{disc}`",
                self.discretization
            )));
        }
        Ok(())
    }
}

pub fn save_qtable(path: &Path, q: &QTable, setup: &MissionSetup) -> Result<()> {
    let file = QTableFile::new(q, setup);
    write_atomic(path, serde_json::to_string_pretty(&file)?.as_bytes())
}

/// Loads and checks internal consistency: the header dimensions must match
/// the value rows and the behavior list.
pub fn load_qtable(path: &Path) -> Result<QTableFile> {
    let malformed = |reason: String| Error::MalformedQTable {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: QTableFile = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    if file.values.len() != file.states {
        return Err(malformed(format!(
            "header says {} states but there are {} rows",
            file.states,
            file.values.len()
        )));
    }
    if file.behavior_ids.len() != file.behaviors {
        return Err(malformed(format!(
            "header says {} behaviors but lists {} ids",
            file.behaviors,
            file.behavior_ids.len()
        )));
    }
    if let Some(row) = file.values.iter().position(|r| r.len() != file.behaviors) {
        return Err(malformed(format!(
            "header says {} behaviors but row {row} has {} values",
            file.behaviors,
            file.values[row].len()
        )));
    }
    if file.states == 0 || file.behaviors == 0 {
        return Err(malformed("empty table".into()));
    }
    if file.values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(malformed("non-finite value".into()));
    }
    Ok(file)
}

/// Writes `bytes` to a temporary sibling, then renames over `path`.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub version: String,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    /// Total reward of every training episode, in order.
    pub rewards: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct RewardRow {
    episode: usize,
    total_reward: f64,
    switches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub table: QTable,
    pub rewards: Vec<f64>,
}

/// Trains with the config at `config_path` and writes a run directory.
pub fn cmd_train(config_path: &Path, overrides: &Overrides) -> Result<TrainOutcome> {
    let cfg = ExperimentConfig::load(config_path, overrides)?;
    train_config(&cfg)
}

/// [`cmd_train`] for an in-memory config.
pub fn train_config(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    let setup = cfg.setup()?;
    let run_dir = cfg.out_dir.clone();
    if run_dir.exists() {
        return Err(Error::config(
            "out_dir",
            format!("{} already exists; choose a new output directory", run_dir.display()),
        ));
    }
    let started = unix_seconds();

    let mut rows = Vec::with_capacity(cfg.run.episodes);
    let table = train(&setup, cfg.run.seed, |episode, log| {
        rows.push(RewardRow {
            episode,
            total_reward: log.total_reward,
            switches: log.events.len(),
        });
    })?;
    let rewards: Vec<f64> = rows.iter().map(|r| r.total_reward).collect();

    let mut staging = run_dir.as_os_str().to_owned();
    staging.push(".staging");
    let staging = PathBuf::from(staging);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    let result = (|| {
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        fs::write(staging.join(CONFIG_FILE), cfg.to_json()?)
            .map_err(|e| Error::io(staging.join(CONFIG_FILE), e))?;
        save_qtable(&staging.join(QTABLE_FILE), &table, &setup)?;
        write_csv(&staging.join(REWARDS_FILE), &rows)?;
        let manifest = RunManifest {
            config: cfg.clone(),
            seed: cfg.run.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_s: started,
            finished_unix_s: unix_seconds(),
            rewards: rewards.clone(),
        };
        fs::write(staging.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)
            .map_err(|e| Error::io(staging.join(MANIFEST_FILE), e))?;
        fs::rename(&staging, &run_dir).map_err(|e| Error::io(&run_dir, e))
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result?;
    Ok(TrainOutcome {
        run_dir,
        table,
        rewards,
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Which policy an evaluation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Trained,
    Random,
    Adhoc,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Trained => "trained",
            EvalMode::Random => "random",
            EvalMode::Adhoc => "adhoc",
        }
    }
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trained" => Ok(EvalMode::Trained),
            "random" => Ok(EvalMode::Random),
            "adhoc" => Ok(EvalMode::Adhoc),
            other => Err(Error::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// Runs `run.eval_episodes` episodes of `mode` in parallel. Episode `k` of
/// every mode starts from the same robot positions and sees the same mission
/// noise. Logs come back in episode order.
pub fn evaluate(setup: &MissionSetup, q: Option<&QTable>, mode: EvalMode, seed: u64) -> Result<Vec<EpisodeLog>> {
    check_mode(setup, q, mode)?;
    (0..setup.run.eval_episodes)
        .into_par_iter()
        .map(|episode| match mode {
            EvalMode::Trained => run_episode_eval(setup, q.expect("checked above"), episode, seed),
            EvalMode::Random => run_random_baseline(setup, episode, seed),
            EvalMode::Adhoc => run_adhoc_convoy(setup, episode, seed),
        })
        .collect()
}

fn check_mode(setup: &MissionSetup, q: Option<&QTable>, mode: EvalMode) -> Result<()> {
    match mode {
        EvalMode::Trained => {
            let q = q.ok_or_else(|| Error::config("qtable", "trained mode needs a Q-table"))?;
            setup.check_table(q)
        }
        EvalMode::Adhoc if setup.mission.kind() != MissionKind::Convoy => Err(Error::Unsupported(
            format!("adhoc mode is only defined for the convoy mission, not {}", setup.mission.kind()),
        )),
        _ => Ok(()),
    }
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Summary {
            episodes: n,
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub mission: MissionKind,
    pub seed: u64,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub report: EvalReport,
    pub rewards: Vec<f64>,
}

fn load_checked_table(path: &Path, setup: &MissionSetup) -> Result<QTable> {
    let file = load_qtable(path)?;
    file.check_compatible(setup)?;
    file.table()
}

/// Evaluates one mode and writes `eval-<mode>.csv` and
/// `eval-<mode>-summary.json` into the output directory. Nothing is written
/// if the table does not fit the config or the mode does not fit the mission.
pub fn cmd_eval(
    config_path: &Path,
    qtable_path: Option<&Path>,
    mode: EvalMode,
    overrides: &Overrides,
) -> Result<EvalOutcome> {
    let cfg = ExperimentConfig::load(config_path, overrides)?;
    let setup = cfg.setup()?;
    let q = match (mode, qtable_path) {
        (EvalMode::Trained, None) => {
            return Err(Error::config("qtable", "trained mode needs --qtable"));
        }
        (_, Some(path)) => Some(load_checked_table(path, &setup)?),
        (_, None) => None,
    };
    let seed = cfg.run.seed;
    let logs = evaluate(&setup, q.as_ref(), mode, seed)?;
    let rewards: Vec<f64> = logs.iter().map(|l| l.total_reward).collect();
    let report = EvalReport {
        mode,
        mission: cfg.mission,
        seed,
        summary: Summary::of(&rewards),
    };

    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv_path = out.join(format!("eval-{mode}.csv"));
    let rows: Vec<RewardRow> = logs
        .iter()
        .enumerate()
        .map(|(episode, l)| RewardRow {
            episode,
            total_reward: l.total_reward,
            switches: l.events.len(),
        })
        .collect();
    let mut staged = csv_path.as_os_str().to_owned();
    staged.push(".partial");
    let staged = PathBuf::from(staged);
    write_csv(&staged, &rows)?;
    fs::rename(&staged, &csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let summary_path = out.join(format!("eval-{mode}-summary.json"));
    write_atomic(&summary_path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok(EvalOutcome {
        csv_path,
        summary_path,
        report,
        rewards,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub mission: MissionKind,
    pub seed: u64,
    pub trained: Summary,
    pub random: Summary,
    pub adhoc: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOutcome {
    pub csv_path: PathBuf,
    pub report: CompareReport,
    /// `(mode, per-episode totals)` in column order.
    pub columns: Vec<(EvalMode, Vec<f64>)>,
}

/// The modes compared for a mission: adhoc exists only for the convoy.
pub fn compare_modes(mission: MissionKind) -> &'static [EvalMode] {
    match mission {
        MissionKind::Convoy => &[EvalMode::Trained, EvalMode::Random, EvalMode::Adhoc],
        MissionKind::Box => &[EvalMode::Trained, EvalMode::Random],
    }
}

/// Runs every applicable mode on the same episode seeds and writes one CSV
/// with a column per mode, plus a summary.
pub fn cmd_compare(config_path: &Path, qtable_path: &Path, overrides: &Overrides) -> Result<CompareOutcome> {
    let cfg = ExperimentConfig::load(config_path, overrides)?;
    let setup = cfg.setup()?;
    let q = load_checked_table(qtable_path, &setup)?;
    let seed = cfg.run.seed;
    let mut columns = Vec::new();
    for &mode in compare_modes(cfg.mission) {
        let logs = evaluate(&setup, Some(&q), mode, seed)?;
        columns.push((mode, logs.iter().map(|l| l.total_reward).collect::<Vec<_>>()));
    }

    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv_path = out.join(COMPARE_FILE);
    let mut staged = csv_path.as_os_str().to_owned();
    staged.push(".partial");
    let staged = PathBuf::from(staged);
    {
        let mut w = csv::Writer::from_path(&staged)?;
        let mut header = vec!["episode".to_string()];
        header.extend(columns.iter().map(|(m, _)| m.name().to_string()));
        w.write_record(&header)?;
        for episode in 0..setup.run.eval_episodes {
            let mut record = vec![episode.to_string()];
            record.extend(columns.iter().map(|(_, v)| format_float(v[episode])));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io(&staged, e))?;
    }
    fs::rename(&staged, &csv_path).map_err(|e| Error::io(&csv_path, e))?;

    let summary = |mode: EvalMode| {
        columns
            .iter()
            .find(|(m, _)| *m == mode)
            .map(|(_, v)| Summary::of(v))
    };
    let report = CompareReport {
        mission: cfg.mission,
        seed,
        trained: summary(EvalMode::Trained).expect("always compared"),
        random: summary(EvalMode::Random).expect("always compared"),
        adhoc: summary(EvalMode::Adhoc),
    };
    write_atomic(
        &out.join(COMPARE_SUMMARY_FILE),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    Ok(CompareOutcome {
        csv_path,
        report,
        columns,
    })
}

/// Shortest decimal that parses back to the same `f64`.
fn format_float(v: f64) -> String {
    let s = format!("{v:?}");
    debug_assert_eq!(s.parse::<f64>().ok(), Some(v));
    s
}
