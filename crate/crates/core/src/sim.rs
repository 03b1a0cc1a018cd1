//! Non-reactive rollout and the closed-loop mini-simulator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{BicycleState, ReferencePath, Tracker};
use crate::geom::{OrientedBox, Point2, Polyline, Pose2D};
use crate::planners::{IdmParams, Observation, Planner};
use crate::scene::{
    derive_navigation_command, navigation_lookahead, AgentCategory, EgoStatus, HistoryEntry, Scene, Trajectory, HISTORY_INTERVAL,
    HISTORY_LEN, SIM_DT, SIM_HZ,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("trajectory covers {got} s but the rollout needs {needed} s")]
    TrajectoryTooShort { needed: f64, got: f64 },
    #[error("agent tracks cover {got} s but the rollout needs {needed} s")]
    TracksTooShort { needed: f64, got: f64 },
    #[error("invalid closed-loop config: {0}")]
    Config(String),
    #[error("invalid horizon {0} s")]
    Horizon(f64),
}

/// One background agent at one tick. `agent` indexes `Scene::agent_tracks`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub agent: usize,
    pub category: AgentCategory,
    pub bbox: OrientedBox,
    pub speed: f64,
}

impl AgentSnapshot {
    pub fn velocity(&self) -> Point2 {
        self.bbox.center.direction().scale(self.speed)
    }

    /// Constant speed and heading extrapolation by `dt` seconds.
    pub fn projected(&self, dt: f64) -> AgentSnapshot {
        AgentSnapshot { bbox: OrientedBox { center: self.bbox.center.advance(self.speed * dt), ..self.bbox }, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationLog {
    pub scene_id: String,
    pub duration: f64,
    pub frequency: f64,
    pub agent_ids: Vec<String>,
    pub ego_states: Vec<BicycleState>,
    pub agent_states: Vec<Vec<AgentSnapshot>>,
}

impl SimulationLog {
    pub fn tick_count(&self) -> usize {
        self.ego_states.len()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let expected = ticks_for(self.duration) + 1;
        if self.ego_states.len() != expected || self.agent_states.len() != expected {
            return Err(SimError::Config(format!(
                "log has {} ego / {} agent frames, expected {expected}",
                self.ego_states.len(),
                self.agent_states.len()
            )));
        }
        Ok(())
    }
}

fn ticks_for(duration: f64) -> usize {
    (duration * SIM_HZ).round() as usize
}

/// Agent snapshots taken verbatim from the recorded tracks.
pub fn replay_frame(scene: &Scene, tick: usize) -> Vec<AgentSnapshot> {
    scene
        .agent_tracks
        .iter()
        .enumerate()
        .map(|(i, t)| AgentSnapshot { agent: i, category: t.category, bbox: t.box_at(tick), speed: t.state_at(tick).speed })
        .collect()
}

/// Simulated ego state at t = 0. Steering starts centred.
pub fn initial_ego_state(scene: &Scene) -> BicycleState {
    BicycleState::at_pose(scene.ego_init.pose, scene.ego_init.velocity, 0.0)
}

fn agent_ids(scene: &Scene) -> Vec<String> {
    scene.agent_tracks.iter().map(|t| t.agent_id.clone()).collect()
}

/// Tracks `trajectory` for `horizon` seconds while agents replay their tracks.
pub fn rollout_nonreactive(scene: &Scene, trajectory: &Trajectory, horizon: f64) -> Result<SimulationLog, SimError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(SimError::Horizon(horizon));
    }
    let covered = trajectory.start_time + trajectory.horizon;
    if covered + 1e-9 < horizon || trajectory.poses.len() < crate::scene::pose_count(horizon) {
        return Err(SimError::TrajectoryTooShort { needed: horizon, got: trajectory.horizon });
    }
    let coverage = scene.agent_coverage();
    if coverage + 1e-9 < horizon {
        return Err(SimError::TracksTooShort { needed: horizon, got: coverage });
    }
    let ticks = ticks_for(horizon);
    let path = ReferencePath::new(trajectory);
    let ego_states = Tracker::standard().track(initial_ego_state(scene), &path, 0.0, ticks);
    let agent_states = (0..=ticks).map(|k| replay_frame(scene, k)).collect();
    Ok(SimulationLog {
        scene_id: scene.scene_id.clone(),
        duration: horizon,
        frequency: SIM_HZ,
        agent_ids: agent_ids(scene),
        ego_states,
        agent_states,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundMode {
    #[default]
    Replay,
    ReactiveIdm,
}

impl std::str::FromStr for BackgroundMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "replay" => Ok(Self::Replay),
            "reactive_idm" => Ok(Self::ReactiveIdm),
            other => Err(format!("unknown background mode '{other}' (expected replay or reactive_idm)")),
        }
    }
}

impl std::fmt::Display for BackgroundMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Replay => "replay",
            Self::ReactiveIdm => "reactive_idm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopConfig {
    pub duration: f64,
    pub frequency: f64,
    pub background: BackgroundMode,
    /// Horizon requested from the planner at every replan.
    pub plan_horizon: f64,
}

impl Default for ClosedLoopConfig {
    fn default() -> Self {
        Self { duration: 15.0, frequency: 10.0, background: BackgroundMode::Replay, plan_horizon: 4.0 }
    }
}

impl ClosedLoopConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let integral = |x: f64| x.is_finite() && (x - x.round()).abs() < 1e-9 && x.round() >= 1.0;
        if !(self.duration > 0.0) || !integral(self.duration * self.frequency) || !integral(self.duration * SIM_HZ) {
            return Err(SimError::Config(format!("duration {} s at {} Hz is not a whole number of replans", self.duration, self.frequency)));
        }
        if !(self.frequency > 0.0) || !integral(SIM_HZ / self.frequency) {
            return Err(SimError::Config(format!("frequency {} Hz must divide {SIM_HZ} Hz", self.frequency)));
        }
        if !(self.plan_horizon > 0.0) || !integral(self.plan_horizon * 2.0) {
            return Err(SimError::Config(format!("plan horizon {} s must be a positive multiple of 0.5 s", self.plan_horizon)));
        }
        Ok(())
    }

    pub fn ticks(&self) -> usize {
        ticks_for(self.duration)
    }

    pub fn replan_interval(&self) -> usize {
        (SIM_HZ / self.frequency).round() as usize
    }
}

/// Longitudinal IDM follower riding on its recorded path.
#[derive(Debug, Clone)]
struct ReactiveAgent {
    path: Polyline,
    s: f64,
    v: f64,
    v0: f64,
}

const REACTIVE_MIN_SPEED: f64 = 0.5;
/// Lateral clearance defining the leader corridor (m).
pub const LEADER_CORRIDOR: f64 = 1.5;

struct World<'a> {
    scene: &'a Scene,
    mode: BackgroundMode,
    reactive: Vec<Option<ReactiveAgent>>,
    current: Vec<AgentSnapshot>,
}

impl<'a> World<'a> {
    fn new(scene: &'a Scene, mode: BackgroundMode) -> Self {
        let reactive = scene
            .agent_tracks
            .iter()
            .map(|t| {
                if mode != BackgroundMode::ReactiveIdm || t.category != AgentCategory::Vehicle {
                    return None;
                }
                let v0 = t.states.iter().map(|s| s.speed).fold(0.0, f64::max);
                if v0 < REACTIVE_MIN_SPEED {
                    return None;
                }
                let path = Polyline::new_dedup(t.states.iter().map(|s| s.pose.position())).ok()?;
                Some(ReactiveAgent { path, s: 0.0, v: t.states[0].speed.max(0.0), v0 })
            })
            .collect();
        Self { scene, mode, reactive, current: replay_frame(scene, 0) }
    }

    fn replayed(&self) -> Vec<bool> {
        self.reactive.iter().map(Option::is_none).collect()
    }

    /// Advances every agent to `next_tick` using the world state at the current tick.
    fn advance(&mut self, next_tick: usize, ego: &BicycleState, ego_half_length: f64, ego_half_width: f64) {
        let replay = replay_frame(self.scene, next_tick);
        if self.mode == BackgroundMode::Replay {
            self.current = replay;
            return;
        }
        let ego_box = OrientedBox { center: ego.pose(), half_length: ego_half_length, half_width: ego_half_width };
        let params = IdmParams::default();
        let mut next = replay;
        let updates: Vec<Option<(f64, f64)>> = self
            .reactive
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let r = r.as_ref()?;
                let me = &self.current[i];
                let mut leader: Option<(f64, f64)> = None;
                let candidates = self
                    .current
                    .iter()
                    .filter(|o| o.agent != i)
                    .map(|o| (o.bbox, o.velocity()))
                    .chain(std::iter::once((ego_box, ego.pose().direction().scale(ego.velocity))));
                for (bbox, vel) in candidates {
                    if let Some((gap, speed)) = leader_gap(&r.path, r.s, me.bbox.half_length, &bbox, vel) {
                        if leader.is_none_or(|(g, _)| gap < g) {
                            leader = Some((gap, speed));
                        }
                    }
                }
                let a = params.acceleration(r.v, r.v0, leader);
                let v = (r.v + a * SIM_DT).clamp(0.0, r.v0.max(r.v));
                Some((r.s + v * SIM_DT, v))
            })
            .collect();
        for (i, u) in updates.into_iter().enumerate() {
            if let (Some((s, v)), Some(r)) = (u, self.reactive[i].as_mut()) {
                r.s = s;
                r.v = v;
                next[i].bbox.center = r.path.pose_at_extended(s);
                next[i].speed = v;
            }
        }
        self.current = next;
    }
}

/// Bumper gap and along-path speed of `other` if it leads a follower at
/// arc length `s` on `path` within the lateral corridor.
pub fn leader_gap(path: &Polyline, s: f64, half_length: f64, other: &OrientedBox, velocity: Point2) -> Option<(f64, f64)> {
    let (s_other, lateral) = path.frenet(other.center.position());
    let along_heading = path.heading_at(s_other);
    let rel = other.center.heading - along_heading;
    let (sin, cos) = rel.sin_cos();
    let half_along = other.half_length * cos.abs() + other.half_width * sin.abs();
    let half_across = other.half_length * sin.abs() + other.half_width * cos.abs();
    if s_other <= s || lateral.abs() - half_across > LEADER_CORRIDOR {
        return None;
    }
    let gap = s_other - half_along - (s + half_length);
    let speed = velocity.dot(Pose2D::new(0.0, 0.0, along_heading).direction());
    Some((gap, speed))
}

fn status_for(scene: &Scene, state: &BicycleState, acceleration: f64) -> EgoStatus {
    let pose = state.pose();
    EgoStatus {
        pose,
        velocity: state.velocity,
        acceleration,
        navigation_command: derive_navigation_command(&scene.map.route_centerline, &pose, navigation_lookahead(state.velocity)),
    }
}

/// History at 2 Hz ending at `tick`; samples before t = 0 come from the scene.
fn history_at(scene: &Scene, tick: usize, states: &[BicycleState], accels: &[f64]) -> Vec<HistoryEntry> {
    let step = (HISTORY_INTERVAL * SIM_HZ).round() as i64;
    (0..HISTORY_LEN as i64)
        .map(|j| {
            let back = (HISTORY_LEN as i64 - 1 - j) * step;
            let t = tick as i64 - back;
            if t >= 0 {
                let s = states[t as usize];
                HistoryEntry { pose: s.pose(), velocity: s.velocity, acceleration: accels[t as usize] }
            } else {
                let idx = (HISTORY_LEN as i64 - 1 + (t as f64 / step as f64).round() as i64).clamp(0, HISTORY_LEN as i64 - 1);
                scene.ego_history[idx as usize]
            }
        })
        .collect()
}

/// Receding-horizon simulation: the planner is queried every `10/f` ticks
/// and the tracker follows the newest plan in between.
pub fn run_closed_loop(scene: &Scene, planner: &mut dyn Planner, config: &ClosedLoopConfig) -> Result<SimulationLog, SimError> {
    config.validate()?;
    if config.background == BackgroundMode::Replay {
        let coverage = scene.agent_coverage();
        if coverage + 1e-9 < config.duration {
            return Err(SimError::TracksTooShort { needed: config.duration, got: coverage });
        }
    }
    let tracker = Tracker::standard();
    let ticks = config.ticks();
    let every = config.replan_interval();
    let mut world = World::new(scene, config.background);
    let replayed = world.replayed();
    let mut ego = initial_ego_state(scene);
    let mut ego_states = Vec::with_capacity(ticks + 1);
    let mut agent_states = Vec::with_capacity(ticks + 1);
    let mut accels = Vec::with_capacity(ticks + 1);
    ego_states.push(ego);
    agent_states.push(world.current.clone());
    accels.push(scene.ego_init.acceleration);
    let mut path: Option<ReferencePath> = None;
    for k in 0..ticks {
        let t = k as f64 * SIM_DT;
        if k % every == 0 || path.is_none() {
            let obs = Observation {
                scene,
                tick: k,
                time: t,
                horizon: config.plan_horizon,
                ego_status: if k == 0 { scene.ego_init } else { status_for(scene, &ego, accels[k]) },
                ego_state: ego,
                ego_history: if k == 0 { scene.ego_history.clone() } else { history_at(scene, k, &ego_states, &accels) },
                agents: world.current.clone(),
                replayed: replayed.clone(),
            };
            path = Some(ReferencePath::new(&planner.plan(&obs)));
        }
        let u = tracker.control(&ego, path.as_ref().expect("plan set above"), t);
        let (applied, _) = u.clamped(&tracker.params);
        world.advance(k + 1, &ego, tracker.params.half_length(), tracker.params.half_width());
        ego = tracker.step(&ego, u);
        ego_states.push(ego);
        agent_states.push(world.current.clone());
        accels.push(applied.acceleration);
    }
    Ok(SimulationLog {
        scene_id: scene.scene_id.clone(),
        duration: config.duration,
        frequency: SIM_HZ,
        agent_ids: agent_ids(scene),
        ego_states,
        agent_states,
    })
}
