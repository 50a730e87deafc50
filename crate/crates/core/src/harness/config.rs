//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment. Keys are camelCase and unknown
//! keys are rejected. Absent keys take the defaults of the selected preset;
//! naming only a `system` selects that system's preset.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dynamics::{
    Acrobot, AcrobotParams, DiffDrive, DiffDriveParams, NullSpace, NullSpaceParams, SystemModel,
};
use crate::error::{Error, Result};
use crate::learning::default_group_radius;
use crate::planner::{BiasSchedule, PlannerConfig, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    DiffDrive,
    Acrobot,
    NullSpace,
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::DiffDrive => "diffdrive",
            SystemKind::Acrobot => "acrobot",
            SystemKind::NullSpace => "nullspace",
        }
    }

    /// The system with its default parameters.
    pub fn build(self) -> Box<dyn SystemModel> {
        match self {
            SystemKind::DiffDrive => Box::new(
                DiffDrive::new(DiffDriveParams::default()).expect("default parameters are valid"),
            ),
            SystemKind::Acrobot => Box::new(
                Acrobot::new(AcrobotParams::default()).expect("default parameters are valid"),
            ),
            SystemKind::NullSpace => Box::new(
                NullSpace::new(NullSpaceParams::default()).expect("default parameters are valid"),
            ),
        }
    }

    pub fn default_preset(self) -> Preset {
        match self {
            SystemKind::DiffDrive => Preset::DiffDrivePaper,
            SystemKind::Acrobot => Preset::AcrobotPaper,
            SystemKind::NullSpace => Preset::NullSpaceDefault,
        }
    }
}

impl FromStr for SystemKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "diffdrive" => Ok(SystemKind::DiffDrive),
            "acrobot" => Ok(SystemKind::Acrobot),
            "nullspace" => Ok(SystemKind::NullSpace),
            _ => Err(format!(
                "unknown system {s:?} (expected diffdrive, acrobot or nullspace)"
            )),
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    DiffDrivePaper,
    AcrobotPaper,
    NullSpaceDefault,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::DiffDrivePaper => "diffdrive-paper",
            Preset::AcrobotPaper => "acrobot-paper",
            Preset::NullSpaceDefault => "nullspace-default",
        }
    }

    pub fn system(self) -> SystemKind {
        match self {
            Preset::DiffDrivePaper => SystemKind::DiffDrive,
            Preset::AcrobotPaper => SystemKind::Acrobot,
            Preset::NullSpaceDefault => SystemKind::NullSpace,
        }
    }

    pub fn config(self) -> ExperimentConfig {
        let system = self.system();
        let model = system.build();
        let mut planner = PlannerConfig::for_system(model.as_ref());
        match self {
            Preset::DiffDrivePaper => {
                planner.schedule = BiasSchedule {
                    goal_bias: 0.01,
                    quality_bias_initial: 0.0,
                    quality_bias_increment: 0.003,
                    quality_bias_interval: 10,
                    quality_bias_max: 0.5,
                    rand_action_share: 0.5,
                };
                planner.termination = Termination {
                    max_iterations: None,
                    max_episodes: Some(300),
                    max_wall_seconds: None,
                };
            }
            Preset::AcrobotPaper => {
                planner.schedule = BiasSchedule {
                    goal_bias: 0.05,
                    quality_bias_initial: 0.0,
                    quality_bias_increment: 0.01,
                    quality_bias_interval: 200,
                    quality_bias_max: 0.5,
                    rand_action_share: 0.9,
                };
                planner.termination = Termination {
                    max_iterations: Some(20_000),
                    max_episodes: None,
                    max_wall_seconds: None,
                };
            }
            Preset::NullSpaceDefault => {
                planner.schedule = BiasSchedule {
                    goal_bias: 0.10,
                    quality_bias_initial: 0.0,
                    quality_bias_increment: 0.02,
                    quality_bias_interval: 200,
                    quality_bias_max: 0.5,
                    rand_action_share: 0.9,
                };
                // Goal events are frequent here, so each retrain stays small.
                planner.net.max_train_batch = 256;
                planner.termination = Termination {
                    max_iterations: Some(20_000),
                    max_episodes: None,
                    max_wall_seconds: None,
                };
            }
        }
        ExperimentConfig {
            preset: self,
            system,
            method: Method::Qrrt,
            planner,
            group_radius: None,
            seeds: vec![0],
            output_dir: PathBuf::from("out"),
            emit_tree_dump: false,
            emit_checkpoints: false,
            label: String::new(),
            workers: 1,
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "diffdrive-paper" => Ok(Preset::DiffDrivePaper),
            "acrobot-paper" => Ok(Preset::AcrobotPaper),
            "nullspace-default" => Ok(Preset::NullSpaceDefault),
            _ => Err(format!("unknown preset {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Qrrt,
    Baseline,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Qrrt => "qrrt",
            Method::Baseline => "baseline",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "qrrt" => Ok(Method::Qrrt),
            "baseline" => Ok(Method::Baseline),
            _ => Err(format!("unknown method {s:?} (expected qrrt or baseline)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub system: SystemKind,
    pub method: Method,
    /// Planner settings; its seed is replaced per run.
    pub planner: PlannerConfig,
    /// `None` scales the radius to the system.
    pub group_radius: Option<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub emit_tree_dump: bool,
    pub emit_checkpoints: bool,
    pub label: String,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Preset::DiffDrivePaper.config()
    }
}

/// Every accepted key, in emission order.
pub const KEYS: &[&str] = &[
    "preset",
    "system",
    "method",
    "label",
    "seeds",
    "outputDir",
    "workers",
    "emitTreeDump",
    "emitCheckpoints",
    "goalBias",
    "qualityBiasInitial",
    "qualityBiasIncrement",
    "qualityBiasInterval",
    "qualityBiasMax",
    "randActionShare",
    "eta",
    "gamma",
    "goalReward",
    "groupRadius",
    "hiddenLayers",
    "learningRate",
    "epochs",
    "batchSize",
    "replayCapacity",
    "maxTrainBatch",
    "maxIterations",
    "maxEpisodes",
    "maxWallSeconds",
    "greedyMaxSteps",
    "greedySequence",
    "recordWallTime",
];

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| Error::value(key, format!("{raw:?}: {e}")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::value(
            key,
            format!("expected true or false, got {raw:?}"),
        )),
    }
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|p| parse_value(key, p.trim())).collect()
}

fn parse_optional<T: FromStr>(key: &str, raw: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    if raw == "none" {
        Ok(None)
    } else {
        parse_value(key, raw).map(Some)
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn optional<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// Splits config text into `(line, key, value)` entries.
fn entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line: line_no,
            message: format!("expected `key = value`, got {content:?}"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::ConfigSyntax {
                line: line_no,
                message: "empty key".into(),
            });
        }
        if !KEYS.contains(&key) {
            return Err(Error::UnknownKey(key.to_string()));
        }
        if out.iter().any(|(_, k, _)| k == key) {
            return Err(Error::ConfigSyntax {
                line: line_no,
                message: format!("duplicate key {key:?}"),
            });
        }
        out.push((line_no, key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parses `text`, then applies `key=value` overrides on top.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut all = entries(text)?;
        for o in overrides {
            let (key, value) = o.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("override {o:?} is not key=value"))
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::UnknownKey(key.to_string()));
            }
            all.retain(|(_, k, _)| k != key);
            all.push((0, key.to_string(), value.trim().to_string()));
        }
        let lookup = |key: &str| {
            all.iter()
                .find(|(_, k, _)| k == key)
                .map(|(_, _, v)| v.as_str())
        };

        let system: Option<SystemKind> = lookup("system")
            .map(|v| parse_value("system", v))
            .transpose()?;
        let preset: Option<Preset> = lookup("preset")
            .map(|v| parse_value("preset", v))
            .transpose()?;
        let preset = match (preset, system) {
            (Some(p), Some(s)) if p.system() != s => {
                return Err(Error::value(
                    "system",
                    format!("{s} conflicts with preset {}", p.as_str()),
                ));
            }
            (Some(p), _) => p,
            (None, Some(s)) => s.default_preset(),
            (None, None) => Preset::DiffDrivePaper,
        };
        let mut cfg = preset.config();
        for (_, key, value) in &all {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_overrides(path, &[])
    }

    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_with_overrides(&text, overrides)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let p = &mut self.planner;
        match key {
            "preset" | "system" => {}
            "method" => self.method = parse_value(key, v)?,
            "label" => self.label = v.to_string(),
            "seeds" => self.seeds = parse_list(key, v)?,
            "outputDir" => self.output_dir = PathBuf::from(v),
            "workers" => self.workers = parse_value(key, v)?,
            "emitTreeDump" => self.emit_tree_dump = parse_bool(key, v)?,
            "emitCheckpoints" => self.emit_checkpoints = parse_bool(key, v)?,
            "goalBias" => p.schedule.goal_bias = parse_value(key, v)?,
            "qualityBiasInitial" => p.schedule.quality_bias_initial = parse_value(key, v)?,
            "qualityBiasIncrement" => p.schedule.quality_bias_increment = parse_value(key, v)?,
            "qualityBiasInterval" => p.schedule.quality_bias_interval = parse_value(key, v)?,
            "qualityBiasMax" => p.schedule.quality_bias_max = parse_value(key, v)?,
            "randActionShare" => p.schedule.rand_action_share = parse_value(key, v)?,
            "eta" => p.learn.eta = parse_value(key, v)?,
            "gamma" => p.learn.gamma = parse_value(key, v)?,
            "goalReward" => p.learn.goal_reward = parse_value(key, v)?,
            "groupRadius" => {
                self.group_radius = if v == "auto" {
                    None
                } else {
                    Some(parse_value(key, v)?)
                }
            }
            "hiddenLayers" => p.net.hidden = parse_list(key, v)?,
            "learningRate" => p.net.train.learning_rate = parse_value(key, v)?,
            "epochs" => p.net.train.epochs = parse_value(key, v)?,
            "batchSize" => p.net.train.batch_size = parse_value(key, v)?,
            "replayCapacity" => p.net.replay_capacity = parse_value(key, v)?,
            "maxTrainBatch" => p.net.max_train_batch = parse_value(key, v)?,
            "maxIterations" => p.termination.max_iterations = parse_optional(key, v)?,
            "maxEpisodes" => p.termination.max_episodes = parse_optional(key, v)?,
            "maxWallSeconds" => p.termination.max_wall_seconds = parse_optional(key, v)?,
            "greedyMaxSteps" => p.greedy_max_steps = parse_value(key, v)?,
            "greedySequence" => p.greedy_sequence = parse_value(key, v)?,
            "recordWallTime" => p.record_wall_time = parse_bool(key, v)?,
            _ => return Err(Error::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::value("seeds", "at least one seed is required"));
        }
        if self.workers == 0 {
            return Err(Error::value("workers", "must be at least 1"));
        }
        if let Some(r) = self.group_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::value(
                    "groupRadius",
                    format!("must be positive, got {r}"),
                ));
            }
        }
        self.planner_for(self.seeds[0]).validate()
    }

    pub fn build_system(&self) -> Box<dyn SystemModel> {
        self.system.build()
    }

    /// Planner settings for one seed, with the group radius resolved.
    pub fn planner_for(&self, seed: u64) -> PlannerConfig {
        let mut p = self.planner.clone();
        p.seed = seed;
        p.learn.group_radius = match self.group_radius {
            Some(r) => r,
            None => default_group_radius(self.system.build().as_ref()),
        };
        p
    }

    /// Every effective setting as config text that parses back to `self`.
    pub fn emit(&self) -> String {
        let p = &self.planner;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("preset", self.preset.as_str().into());
        put("system", self.system.as_str().into());
        put("method", self.method.as_str().into());
        put("label", self.label.clone());
        put("seeds", join(&self.seeds));
        put("outputDir", self.output_dir.display().to_string());
        put("workers", self.workers.to_string());
        put("emitTreeDump", self.emit_tree_dump.to_string());
        put("emitCheckpoints", self.emit_checkpoints.to_string());
        put("goalBias", p.schedule.goal_bias.to_string());
        put(
            "qualityBiasInitial",
            p.schedule.quality_bias_initial.to_string(),
        );
        put(
            "qualityBiasIncrement",
            p.schedule.quality_bias_increment.to_string(),
        );
        put(
            "qualityBiasInterval",
            p.schedule.quality_bias_interval.to_string(),
        );
        put("qualityBiasMax", p.schedule.quality_bias_max.to_string());
        put("randActionShare", p.schedule.rand_action_share.to_string());
        put("eta", p.learn.eta.to_string());
        put("gamma", p.learn.gamma.to_string());
        put("goalReward", p.learn.goal_reward.to_string());
        put(
            "groupRadius",
            optional(self.group_radius).replace("none", "auto"),
        );
        put("hiddenLayers", join(&p.net.hidden));
        put("learningRate", p.net.train.learning_rate.to_string());
        put("epochs", p.net.train.epochs.to_string());
        put("batchSize", p.net.train.batch_size.to_string());
        put("replayCapacity", p.net.replay_capacity.to_string());
        put("maxTrainBatch", p.net.max_train_batch.to_string());
        put("maxIterations", optional(p.termination.max_iterations));
        put("maxEpisodes", optional(p.termination.max_episodes));
        put("maxWallSeconds", optional(p.termination.max_wall_seconds));
        put("greedyMaxSteps", p.greedy_max_steps.to_string());
        put("greedySequence", p.greedy_sequence.to_string());
        put("recordWallTime", p.record_wall_time.to_string());
        out
    }
}
