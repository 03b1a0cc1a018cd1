//! Planner interface, the built-in planner registry and the default population.

mod human;
mod idm;
mod kinematic;
mod pdm;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::BicycleState;
use crate::scene::{EgoStatus, HistoryEntry, Scene, Trajectory, SIM_DT};
use crate::sim::{initial_ego_state, replay_frame, AgentSnapshot};

pub use human::{HumanNoise, PerturbedHumanPlanner};
pub use idm::{IdmParams, IdmPlanner, LateralProfile, RouteAgent, RouteFrames};
pub use kinematic::{ConstantAccelerationPlanner, ConstantVelocityPlanner, SpeedSource};
pub use pdm::{generate_proposals, pdm_progress_upper_bound, select_proposal, PdmConfig, PdmLitePlanner, Proposal};

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("unknown planner '{0}'")]
    Unknown(String),
    #[error("invalid parameters for planner '{name}': {message}")]
    Params { name: String, message: String },
    #[error("duplicate planner name '{0}' in population")]
    Duplicate(String),
    #[error("cannot read population file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed population file: {0}")]
    Parse(String),
}

/// What a planner sees at one query tick.
///
/// Observations are privileged: exact agent boxes, the map and, through
/// `scene`, the recorded future used by replay-derived planners.
#[derive(Debug, Clone)]
pub struct Observation<'a> {
    pub scene: &'a Scene,
    pub tick: usize,
    /// Absolute simulation time (s).
    pub time: f64,
    /// Planning horizon requested from the planner (s).
    pub horizon: f64,
    pub ego_status: EgoStatus,
    pub ego_state: BicycleState,
    pub ego_history: Vec<HistoryEntry>,
    pub agents: Vec<AgentSnapshot>,
    /// Per agent: true if it follows its recorded track.
    pub replayed: Vec<bool>,
}

impl<'a> Observation<'a> {
    /// Observation at t = 0 with every agent replaying its track.
    pub fn initial(scene: &'a Scene, horizon: f64) -> Self {
        Self {
            scene,
            tick: 0,
            time: 0.0,
            horizon,
            ego_status: scene.ego_init,
            ego_state: initial_ego_state(scene),
            ego_history: scene.ego_history.clone(),
            agents: replay_frame(scene, 0),
            replayed: vec![true; scene.agent_tracks.len()],
        }
    }

    pub fn horizon_ticks(&self) -> usize {
        (self.horizon / SIM_DT).round() as usize
    }

    /// Predicted agent frames for the next `ticks` ticks (index 0 is now).
    /// Replaying agents follow their tracks; the others keep speed and heading.
    pub fn forecast(&self, ticks: usize) -> Vec<Vec<AgentSnapshot>> {
        (0..=ticks)
            .map(|j| {
                self.agents
                    .iter()
                    .map(|a| {
                        if self.replayed.get(a.agent).copied().unwrap_or(true) {
                            let track = &self.scene.agent_tracks[a.agent];
                            let k = self.tick + j;
                            AgentSnapshot { bbox: track.box_at(k), speed: track.state_at(k).speed, ..*a }
                        } else {
                            a.projected(j as f64 * SIM_DT)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    ConstantVelocity,
    ConstantAcceleration,
    Idm,
    PdmLite,
    PerturbedHuman,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 5] =
        [Self::ConstantVelocity, Self::ConstantAcceleration, Self::Idm, Self::PdmLite, Self::PerturbedHuman];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ConstantVelocity => "constant_velocity",
            Self::ConstantAcceleration => "constant_acceleration",
            Self::Idm => "idm",
            Self::PdmLite => "pdm_lite",
            Self::PerturbedHuman => "perturbed_human",
        }
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A trajectory planner. `plan` must be deterministic in the observation
/// and the planner's own state.
pub trait Planner: Send + Sync {
    fn name(&self) -> &str;
    fn kind(&self) -> PlannerKind;
    fn plan(&mut self, obs: &Observation) -> Trajectory;
    fn clone_box(&self) -> Box<dyn Planner>;
}

impl Clone for Box<dyn Planner> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Population entry: display name, registry key and parameter object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSpec {
    pub name: String,
    pub planner: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl PlannerSpec {
    pub fn new(name: impl Into<String>, planner: &str, params: serde_json::Value) -> Self {
        Self { name: name.into(), planner: planner.to_string(), params }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Population {
    pub planners: Vec<PlannerSpec>,
}

pub type PlannerFactory = fn(&str, &serde_json::Value) -> Result<Box<dyn Planner>, PlannerError>;

/// Parses a parameter object, treating `null` as "all defaults".
pub(crate) fn parse_params<T: serde::de::DeserializeOwned + Default>(name: &str, params: &serde_json::Value) -> Result<T, PlannerError> {
    if params.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(params.clone()).map_err(|e| PlannerError::Params { name: name.to_string(), message: e.to_string() })
}

/// Maps planner keys to constructors.
#[derive(Clone, Default)]
pub struct PlannerRegistry {
    factories: BTreeMap<String, PlannerFactory>,
}

impl PlannerRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("constant_velocity", kinematic::build_constant_velocity);
        r.register("constant_acceleration", kinematic::build_constant_acceleration);
        r.register("idm", idm::build_idm);
        r.register("pdm_lite", pdm::build_pdm_lite);
        r.register("perturbed_human", human::build_perturbed_human);
        r.register("human_replay", human::build_human_replay);
        r
    }

    pub fn register(&mut self, key: &str, factory: PlannerFactory) {
        self.factories.insert(key.to_string(), factory);
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.factories.contains_key(key)
    }

    pub fn build(&self, spec: &PlannerSpec) -> Result<Box<dyn Planner>, PlannerError> {
        let factory = self.factories.get(&spec.planner).ok_or_else(|| PlannerError::Unknown(spec.planner.clone()))?;
        factory(&spec.name, &spec.params)
    }

    /// Builds a planner from its registry key with default parameters.
    pub fn build_default(&self, key: &str) -> Result<Box<dyn Planner>, PlannerError> {
        self.build(&PlannerSpec::new(key, key, serde_json::Value::Null))
    }

    pub fn build_population(&self, population: &Population) -> Result<Vec<Box<dyn Planner>>, PlannerError> {
        let mut seen = std::collections::HashSet::new();
        for spec in &population.planners {
            if !self.contains(&spec.planner) {
                return Err(PlannerError::Unknown(spec.planner.clone()));
            }
            if !seen.insert(spec.name.as_str()) {
                return Err(PlannerError::Duplicate(spec.name.clone()));
            }
        }
        population.planners.iter().map(|s| self.build(s)).collect()
    }
}

pub fn population_from_json(text: &str) -> Result<Population, PlannerError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| PlannerError::Parse(format!("{}: {}", e.path(), e.inner())))
}

pub fn load_population(path: impl AsRef<Path>) -> Result<Population, PlannerError> {
    let p = path.as_ref();
    let text = std::fs::read_to_string(p).map_err(|source| PlannerError::Io { path: p.display().to_string(), source })?;
    population_from_json(&text)
}

/// Perturbation levels of the default population: (lateral σ, lag ticks, speed scale).
pub const DEFAULT_HUMAN_LEVELS: [(f64, u32, f64); 12] = [
    (0.0, 0, 1.0),
    (0.25, 0, 1.0),
    (0.5, 0, 1.0),
    (1.0, 0, 1.0),
    (1.5, 0, 1.0),
    (0.0, 5, 1.0),
    (0.0, 10, 1.0),
    (0.0, 0, 0.9),
    (0.0, 0, 0.8),
    (0.0, 0, 1.15),
    (0.75, 5, 0.9),
    (2.0, 0, 1.2),
];

/// The 42-planner study population.
pub fn default_population() -> Population {
    use serde_json::json;
    let mut planners = vec![
        PlannerSpec::new("cv_current", "constant_velocity", json!({"speed_source": "current"})),
        PlannerSpec::new("cv_history", "constant_velocity", json!({"speed_source": "history"})),
    ];
    for a in [-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0] {
        planners.push(PlannerSpec::new(format!("ca_{a:+}"), "constant_acceleration", json!({ "acceleration": a })));
    }
    for t in [1.0, 1.5, 2.5] {
        for (frac, b) in [(1.0, 2.0), (0.8, 2.0), (0.6, 2.0), (1.0, 1.0), (1.0, 3.0)] {
            planners.push(PlannerSpec::new(
                format!("idm_T{t}_v{frac}_b{b}"),
                "idm",
                json!({"time_headway": t, "v0_fraction": frac, "comfortable_decel": b}),
            ));
        }
    }
    let all_speeds = [0.2, 0.4, 0.6, 0.8, 1.0];
    let pdm_variants: [(&str, Vec<f64>, Vec<f64>); 5] = [
        ("pdm_full", all_speeds.to_vec(), vec![-1.0, 0.0, 1.0]),
        ("pdm_center", all_speeds.to_vec(), vec![0.0]),
        ("pdm_fast", vec![0.6, 0.8, 1.0], vec![-1.0, 0.0, 1.0]),
        ("pdm_slow", vec![0.2, 0.4, 0.6], vec![-1.0, 0.0, 1.0]),
        ("pdm_limit", vec![1.0], vec![-1.0, 0.0, 1.0]),
    ];
    for (name, speeds, offsets) in pdm_variants {
        planners.push(PlannerSpec::new(name, "pdm_lite", json!({"speed_fractions": speeds, "lateral_offsets": offsets})));
    }
    for (i, (sigma, lag, scale)) in DEFAULT_HUMAN_LEVELS.iter().enumerate() {
        planners.push(PlannerSpec::new(
            format!("human_l{i:02}"),
            "perturbed_human",
            json!({"lateral_sigma": sigma, "lag_ticks": lag, "speed_scale": scale}),
        ));
    }
    Population { planners }
}
