//! Hand-built scenes and logs shared by the integration tests.
#![allow(dead_code)]

use navcore::dynamics::BicycleState;
use navcore::geom::{OrientedBox, Point2, Polygon, Polyline, Pose2D};
use navcore::scene::{
    AgentCategory, AgentState, AgentTrack, EgoStatus, HistoryEntry, NavigationCommand, Scene, SceneMap, Trajectory, SCHEMA_VERSION,
};
use navcore::sim::{AgentSnapshot, SimulationLog};

/// Ticks in a 15 s track plus the initial state.
pub const TRACK_TICKS: usize = 151;

pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
    Polygon::new(vec![Point2::new(x0, y0), Point2::new(x1, y0), Point2::new(x1, y1), Point2::new(x0, y1)], vec![]).unwrap()
}

pub fn static_track(id: &str, category: AgentCategory, pose: Pose2D, half_length: f64, half_width: f64) -> AgentTrack {
    AgentTrack {
        agent_id: id.into(),
        category,
        half_length,
        half_width,
        states: vec![AgentState { pose, speed: 0.0 }; TRACK_TICKS],
    }
}

/// Constant speed and heading from `start`.
pub fn moving_track(id: &str, category: AgentCategory, start: Pose2D, speed: f64) -> AgentTrack {
    AgentTrack {
        agent_id: id.into(),
        category,
        half_length: 2.3,
        half_width: 0.95,
        states: (0..TRACK_TICKS).map(|k| AgentState { pose: start.advance(speed * k as f64 * 0.1), speed }).collect(),
    }
}

/// Straight eastbound road from x = -30 to x = `length`, `width` wide, centred on y = 0.
/// Ego at the origin heading east at `speed`; the human drives on at constant speed.
pub fn corridor_scene(id: &str, length: f64, width: f64, speed_limit: f64, speed: f64, agents: Vec<AgentTrack>) -> Scene {
    let origin = Pose2D::new(0.0, 0.0, 0.0);
    let ego_history = (0..4)
        .map(|k| {
            let back = (3 - k) as f64 * 0.5 * speed;
            HistoryEntry { pose: Pose2D::new(-back, 0.0, 0.0), velocity: speed, acceleration: 0.0 }
        })
        .collect();
    let poses = (1..=8).map(|k| origin.advance(speed * 0.5 * k as f64)).collect();
    Scene {
        schema_version: SCHEMA_VERSION.into(),
        scene_id: id.into(),
        map: SceneMap {
            drivable_area: vec![rect(-30.0, -width / 2.0, length, width / 2.0)],
            route_centerline: Polyline::new(vec![Point2::new(0.0, 0.0), Point2::new(length, 0.0)]).unwrap(),
            speed_limit,
        },
        ego_init: EgoStatus { pose: origin, velocity: speed, acceleration: 0.0, navigation_command: NavigationCommand::Straight },
        ego_history,
        human_trajectory: Trajectory::new(0.0, origin, poses),
        agent_tracks: agents,
        human_log: None,
    }
}

pub fn state(x: f64, y: f64, heading: f64, velocity: f64) -> BicycleState {
    BicycleState { x, y, heading, velocity, steering_angle: 0.0 }
}

pub fn snapshot(agent: usize, category: AgentCategory, pose: Pose2D, half_length: f64, half_width: f64, speed: f64) -> AgentSnapshot {
    AgentSnapshot { agent, category, bbox: OrientedBox { center: pose, half_length, half_width }, speed }
}

/// A log over `ego` with the given per-tick agent frames (empty frames when `agents` is empty).
pub fn log_from(ego: Vec<BicycleState>, agents: Vec<Vec<AgentSnapshot>>, agent_ids: Vec<String>) -> SimulationLog {
    let n = ego.len();
    let agent_states = if agents.is_empty() { vec![Vec::new(); n] } else { agents };
    SimulationLog { scene_id: "hand".into(), duration: (n - 1) as f64 * 0.1, frequency: 10.0, agent_ids, ego_states: ego, agent_states }
}

/// Ego driving straight east from x0 at constant speed for `ticks` steps.
pub fn straight_states(x0: f64, speed: f64, ticks: usize) -> Vec<BicycleState> {
    (0..=ticks).map(|k| state(x0 + speed * 0.1 * k as f64, 0.0, 0.0, speed)).collect()
}

pub mod oracles;
