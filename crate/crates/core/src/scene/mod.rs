//! Scene data model, JSON scene files and navigation-command derivation.

mod generator;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{GeomError, OrientedBox, Point2, Polygon, Polyline, Pose2D};

pub use generator::{generate_scenarios, Archetype, GeneratorConfig};

pub const SCHEMA_VERSION: &str = "1";
/// Spacing of trajectory poses.
pub const TRAJECTORY_INTERVAL: f64 = 0.5;
/// Simulation tick.
pub const SIM_DT: f64 = 0.1;
pub const SIM_HZ: f64 = 10.0;
/// Current frame plus three past frames at 2 Hz.
pub const HISTORY_LEN: usize = 4;
pub const HISTORY_INTERVAL: f64 = 0.5;

/// Heading change beyond which the route counts as a turn.
pub const NAV_TURN_THRESHOLD: f64 = 15.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("unsupported schema_version {found:?} (expected {SCHEMA_VERSION:?})")]
    SchemaVersion { found: String },
    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant { invariant: &'static str, detail: String },
    #[error("geometry: {0}")]
    Geom(#[from] GeomError),
}

fn violated(invariant: &'static str, detail: impl Into<String>) -> SceneError {
    SceneError::Invariant { invariant, detail: detail.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavigationCommand {
    Left,
    Straight,
    Right,
}

impl NavigationCommand {
    pub fn one_hot(self) -> [f64; 3] {
        match self {
            NavigationCommand::Left => [1.0, 0.0, 0.0],
            NavigationCommand::Straight => [0.0, 1.0, 0.0],
            NavigationCommand::Right => [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoStatus {
    pub pose: Pose2D,
    pub velocity: f64,
    pub acceleration: f64,
    pub navigation_command: NavigationCommand,
}

/// One past (or current) ego frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub pose: Pose2D,
    pub velocity: f64,
    pub acceleration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentCategory {
    Vehicle,
    Pedestrian,
    Bicycle,
    StaticObject,
}

impl AgentCategory {
    pub fn is_road_user(self) -> bool {
        !matches!(self, AgentCategory::StaticObject)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub pose: Pose2D,
    pub speed: f64,
}

/// Background agent sampled at 10 Hz from t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrack {
    pub agent_id: String,
    pub category: AgentCategory,
    pub half_length: f64,
    pub half_width: f64,
    pub states: Vec<AgentState>,
}

impl AgentTrack {
    /// State at `tick`, holding the last sample past the end of the track.
    pub fn state_at(&self, tick: usize) -> AgentState {
        self.states[tick.min(self.states.len() - 1)]
    }

    pub fn box_at(&self, tick: usize) -> OrientedBox {
        OrientedBox { center: self.state_at(tick).pose, half_length: self.half_length, half_width: self.half_width }
    }

    /// Number of seconds the track covers.
    pub fn duration(&self) -> f64 {
        (self.states.len() - 1) as f64 * SIM_DT
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMap {
    pub drivable_area: Vec<Polygon>,
    pub route_centerline: Polyline,
    pub speed_limit: f64,
}

impl SceneMap {
    pub fn is_drivable(&self, p: Point2) -> bool {
        self.drivable_area.iter().any(|poly| poly.contains(p))
    }
}

/// Sequence of poses at 0.5 s spacing following `origin`.
///
/// `origin` is the pose at `start_time` (absolute simulation seconds);
/// `poses[k]` is the pose at `start_time + 0.5 * (k + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(default)]
    pub start_time: f64,
    pub origin: Pose2D,
    pub horizon: f64,
    pub poses: Vec<Pose2D>,
}

impl Trajectory {
    pub fn new(start_time: f64, origin: Pose2D, poses: Vec<Pose2D>) -> Self {
        let horizon = poses.len() as f64 * TRAJECTORY_INTERVAL;
        Self { start_time, origin, horizon, poses }
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.poses.len()).map(move |k| self.start_time + k as f64 * TRAJECTORY_INTERVAL)
    }

    /// Origin followed by every future pose.
    pub fn knots(&self) -> impl Iterator<Item = Pose2D> + '_ {
        std::iter::once(self.origin).chain(self.poses.iter().copied())
    }

    /// Keeps the first `horizon` seconds.
    pub fn truncated(&self, horizon: f64) -> Trajectory {
        let n = pose_count(horizon).min(self.poses.len());
        Trajectory::new(self.start_time, self.origin, self.poses[..n].to_vec())
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(violated("trajectory.horizon", format!("horizon {} must be positive", self.horizon)));
        }
        let expected = pose_count(self.horizon);
        if (expected as f64 * TRAJECTORY_INTERVAL - self.horizon).abs() > 1e-9 || self.poses.len() != expected {
            return Err(violated(
                "trajectory.poses",
                format!("horizon {} s needs {} poses at 0.5 s spacing, got {}", self.horizon, expected, self.poses.len()),
            ));
        }
        if !self.start_time.is_finite() || !self.origin.is_finite() || self.poses.iter().any(|p| !p.is_finite()) {
            return Err(violated("trajectory.finite", "non-finite pose or start_time"));
        }
        Ok(())
    }
}

/// Number of 0.5 s poses covering `horizon`.
pub fn pose_count(horizon: f64) -> usize {
    (horizon / TRAJECTORY_INTERVAL).round() as usize
}

/// Optional full-rate recording of the human ego, used by replay-derived planners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoLogState {
    pub pose: Pose2D,
    pub velocity: f64,
    pub acceleration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub schema_version: String,
    pub scene_id: String,
    pub map: SceneMap,
    pub ego_init: EgoStatus,
    /// Oldest first; the last entry is the current frame.
    pub ego_history: Vec<HistoryEntry>,
    pub human_trajectory: Trajectory,
    pub agent_tracks: Vec<AgentTrack>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_log: Option<Vec<EgoLogState>>,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SceneError::SchemaVersion { found: self.schema_version.clone() });
        }
        if self.ego_history.len() != HISTORY_LEN {
            return Err(violated(
                "ego_history",
                format!("expected {HISTORY_LEN} entries (current + 3 past), got {}", self.ego_history.len()),
            ));
        }
        let e = &self.ego_init;
        if !e.pose.is_finite() || !e.velocity.is_finite() || !e.acceleration.is_finite() {
            return Err(violated("ego_init", "non-finite ego status"));
        }
        if !(self.map.speed_limit.is_finite() && self.map.speed_limit > 0.0) {
            return Err(violated("map.speed_limit", format!("speed limit {} must be positive", self.map.speed_limit)));
        }
        for poly in &self.map.drivable_area {
            poly.validate()?;
        }
        self.human_trajectory.validate()?;
        if self.human_trajectory.start_time != 0.0 {
            return Err(violated("human_trajectory.start_time", "human trajectory must start at t = 0"));
        }
        let d = self.human_trajectory.origin.position().distance(e.pose.position());
        if d > 1e-6 {
            return Err(violated("human_trajectory.origin", format!("origin is {d} m away from ego_init.pose")));
        }
        let mut ids = std::collections::HashSet::new();
        for t in &self.agent_tracks {
            if !ids.insert(t.agent_id.as_str()) {
                return Err(violated("agent_tracks.agent_id", format!("duplicate agent id {}", t.agent_id)));
            }
            let ok = |v: f64| v.is_finite() && v > 0.0;
            if !ok(t.half_length) || !ok(t.half_width) {
                return Err(violated("agent_tracks.extents", format!("agent {} has non-positive extents", t.agent_id)));
            }
            if t.states.is_empty() {
                return Err(violated("agent_tracks.states", format!("agent {} has no states", t.agent_id)));
            }
            if t.states.iter().any(|s| !s.pose.is_finite() || !s.speed.is_finite()) {
                return Err(violated("agent_tracks.states", format!("agent {} has non-finite states", t.agent_id)));
            }
        }
        if let Some(log) = &self.human_log {
            if log.is_empty() {
                return Err(violated("human_log", "log present but empty"));
            }
        }
        Ok(())
    }

    /// Shortest agent-track coverage in seconds (infinite when there are no agents).
    pub fn agent_coverage(&self) -> f64 {
        self.agent_tracks.iter().map(AgentTrack::duration).fold(f64::INFINITY, f64::min)
    }

    pub fn human_log_state(&self, tick: usize) -> Option<EgoLogState> {
        let log = self.human_log.as_ref()?;
        if tick < log.len() {
            return Some(log[tick]);
        }
        let last = *log.last()?;
        let extra = (tick - (log.len() - 1)) as f64 * SIM_DT * last.velocity.max(0.0);
        Some(EgoLogState { pose: last.pose.advance(extra), velocity: last.velocity, acceleration: 0.0 })
    }

    /// Human pose at absolute time `t` on the 0.5 s grid.
    pub fn human_pose_at(&self, t: f64) -> Pose2D {
        let tick = (t / SIM_DT).round().max(0.0) as usize;
        if let Some(s) = self.human_log_state(tick) {
            return s.pose;
        }
        let k = (t / TRAJECTORY_INTERVAL).round().max(0.0) as usize;
        let traj = &self.human_trajectory;
        if k == 0 {
            traj.origin
        } else if k <= traj.poses.len() {
            traj.poses[k - 1]
        } else {
            let last = *traj.poses.last().unwrap_or(&traj.origin);
            let prev = if traj.poses.len() >= 2 { traj.poses[traj.poses.len() - 2] } else { traj.origin };
            let step = last.position().distance(prev.position());
            last.advance(step * (k - traj.poses.len()) as f64)
        }
    }

    /// Human future over `horizon` seconds from t = 0.
    pub fn human_trajectory_for(&self, horizon: f64) -> Trajectory {
        let n = pose_count(horizon);
        if n <= self.human_trajectory.poses.len() {
            return self.human_trajectory.truncated(horizon);
        }
        let poses = (1..=n).map(|k| self.human_pose_at(k as f64 * TRAJECTORY_INTERVAL)).collect();
        Trajectory::new(0.0, self.human_trajectory.origin, poses)
    }
}

pub fn scene_from_json(text: &str) -> Result<Scene, SceneError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| SceneError::Parse { path: "<document>".into(), message: e.to_string() })?;
    match value.get("schema_version") {
        Some(serde_json::Value::String(v)) if v == SCHEMA_VERSION => {}
        Some(serde_json::Value::String(v)) => return Err(SceneError::SchemaVersion { found: v.clone() }),
        Some(other) => return Err(SceneError::SchemaVersion { found: other.to_string() }),
        None => return Err(SceneError::Parse { path: "schema_version".into(), message: "missing field".into() }),
    }
    let scene: Scene = serde_path_to_error::deserialize(value)
        .map_err(|e| SceneError::Parse { path: e.path().to_string(), message: e.inner().to_string() })?;
    scene.validate()?;
    Ok(scene)
}

pub fn scene_to_json(scene: &Scene) -> String {
    serde_json::to_string_pretty(scene).expect("scene serialization is infallible")
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io { path: path.display().to_string(), source })?;
    scene_from_json(&text)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<(), SceneError> {
    let path = path.as_ref();
    std::fs::write(path, scene_to_json(scene)).map_err(|source| SceneError::Io { path: path.display().to_string(), source })
}

/// Lookahead distance used for goal classification.
pub fn navigation_lookahead(speed: f64) -> f64 {
    (4.0 * speed.abs()).max(20.0)
}

/// Classifies the route's heading change over `lookahead` metres past the
/// ego's projection. Lookaheads past the end of the route are clamped.
pub fn derive_navigation_command(route: &Polyline, ego_pose: &Pose2D, lookahead: f64) -> NavigationCommand {
    let s0 = route.project(ego_pose.position()).arc_length;
    let s1 = (s0 + lookahead).min(route.length());
    let turn = route.turning_between(s0, s1);
    if turn > NAV_TURN_THRESHOLD {
        NavigationCommand::Left
    } else if turn < -NAV_TURN_THRESHOLD {
        NavigationCommand::Right
    } else {
        NavigationCommand::Straight
    }
}
