//! Synthetic scenario generator.
//!
//! Every scene is built in a local frame (ego at the origin heading +x, route
//! starting 40 m behind), the human drive is produced by an IDM expert whose
//! reference is tracked with the production tracker, then the whole scene is
//! moved by a random rigid transform.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    derive_navigation_command, navigation_lookahead, AgentCategory, AgentState, AgentTrack, EgoLogState, EgoStatus, HistoryEntry, Scene,
    SceneError, SceneMap, Trajectory, HISTORY_INTERVAL, HISTORY_LEN, SCHEMA_VERSION, SIM_DT,
};
use crate::dynamics::VehicleParameters;
use crate::geom::{normalize_angle, OrientedBox, Point2, Polygon, Polyline, Pose2D};
use crate::planners::{IdmParams, LateralProfile, RouteFrames};
use crate::sim::AgentSnapshot;

/// Recorded future in ticks: 15 s closed loop plus a 4 s plan and margin.
const RECORD_TICKS: usize = 230;
const ROUTE_BEHIND: f64 = 40.0;
const ROUTE_AHEAD: f64 = 420.0;
const RIGHT_EDGE: f64 = -2.5;
const LEFT_EDGE_SINGLE: f64 = 2.5;
const LEFT_EDGE_DOUBLE: f64 = 6.0;
const LEFT_LANE: f64 = 3.5;
const CURVE_LAT_ACCEL: f64 = 2.5;
const TURN_RAMP: f64 = 10.0;
const TURN_STEP: f64 = 1.0;
/// Lateral distance past the centreline at which a pedestrian no longer blocks the ego.
const PEDESTRIAN_CLEARANCE: f64 = 2.5;
const EXPERT_BRAKE: f64 = 4.0;
const EXPERT_JERK: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    StraightFollow,
    LeadBrake,
    LeftTurn,
    RightTurn,
    CrossingPedestrian,
    LaneBlockage,
    MergeGap,
}

impl Archetype {
    pub const ALL: [Archetype; 7] = [
        Self::StraightFollow,
        Self::LeadBrake,
        Self::LeftTurn,
        Self::RightTurn,
        Self::CrossingPedestrian,
        Self::LaneBlockage,
        Self::MergeGap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::StraightFollow => "straight_follow",
            Self::LeadBrake => "lead_brake",
            Self::LeftTurn => "left_turn",
            Self::RightTurn => "right_turn",
            Self::CrossingPedestrian => "crossing_pedestrian",
            Self::LaneBlockage => "lane_blockage",
            Self::MergeGap => "merge_gap",
        }
    }
}

impl std::str::FromStr for Archetype {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| format!("unknown archetype '{s}'"))
    }
}

impl std::fmt::Display for Archetype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub count: usize,
    /// Archetype mixture; must sum to 1.
    pub weights: BTreeMap<Archetype, f64>,
}

impl GeneratorConfig {
    pub fn uniform(count: usize) -> Self {
        let w = 1.0 / Archetype::ALL.len() as f64;
        Self { count, weights: Archetype::ALL.iter().map(|a| (*a, w)).collect() }
    }

    pub fn only(count: usize, archetype: Archetype) -> Self {
        Self { count, weights: BTreeMap::from([(archetype, 1.0)]) }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |detail: String| SceneError::Invariant { invariant: "generator.weights", detail };
        if self.count == 0 {
            return Err(SceneError::Invariant { invariant: "generator.count", detail: "count must be at least 1".into() });
        }
        if self.weights.values().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(bad("weights must be finite and nonnegative".into()));
        }
        let total: f64 = self.weights.values().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(bad(format!("weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    /// Exact per-archetype counts by largest remainder.
    pub fn quotas(&self) -> Vec<(Archetype, usize)> {
        let mut rows: Vec<(Archetype, usize, f64)> = self
            .weights
            .iter()
            .map(|(a, w)| {
                let exact = w * self.count as f64;
                (*a, exact.floor() as usize, exact - exact.floor())
            })
            .collect();
        let assigned: usize = rows.iter().map(|r| r.1).sum();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by(|&i, &j| rows[j].2.total_cmp(&rows[i].2).then(i.cmp(&j)));
        for &i in order.iter().cycle().take(self.count.saturating_sub(assigned)) {
            rows[i].1 += 1;
        }
        rows.into_iter().map(|(a, n, _)| (a, n)).collect()
    }
}

/// Generates `config.count` scenes; identical inputs give identical scenes.
pub fn generate_scenarios(config: &GeneratorConfig, seed: u64) -> Result<Vec<Scene>, SceneError> {
    config.validate()?;
    let mut plan: Vec<Archetype> = config.quotas().into_iter().flat_map(|(a, n)| std::iter::repeat_n(a, n)).collect();
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    plan.shuffle(&mut master);
    plan.iter()
        .enumerate()
        .map(|(i, a)| {
            let scene_seed = seed ^ (i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
            let scene = build_scene(*a, format!("{}_{seed}_{i:05}", a.as_str()), &mut rng);
            scene.validate()?;
            Ok(scene)
        })
        .collect()
}

struct Road {
    line: Polyline,
    /// `(s_start, s_end, signed curvature)` of each arc.
    arcs: Vec<(f64, f64, f64)>,
    left_edge: f64,
}

impl Road {
    fn new(turn: Option<(f64, f64, f64)>, left_edge: f64) -> Road {
        let mut pts = vec![Point2::new(-ROUTE_BEHIND, 0.0)];
        let mut arcs = Vec::new();
        match turn {
            None => pts.push(Point2::new(ROUTE_AHEAD, 0.0)),
            Some((sign, radius, start)) => {
                // Linear curvature ramps into and out of a constant arc, 90 degrees in total.
                pts.push(Point2::new(start, 0.0));
                let k_max = radius.recip();
                let arc_len = std::f64::consts::FRAC_PI_2 * radius + TURN_RAMP;
                let kappa = |u: f64| k_max * (u / TURN_RAMP).min((arc_len - u) / TURN_RAMP).clamp(0.0, 1.0);
                let steps = (arc_len / TURN_STEP).ceil() as usize;
                let ds = arc_len / steps as f64;
                let (mut p, mut heading) = (Point2::new(start, 0.0), 0.0);
                for i in 0..steps {
                    let u = i as f64 * ds;
                    let mid = heading + 0.5 * sign * kappa(u + 0.25 * ds) * ds;
                    p = p + Point2::new(mid.cos(), mid.sin()).scale(ds);
                    heading += sign * 0.5 * (kappa(u) + kappa(u + ds)) * ds;
                    pts.push(p);
                }
                let s0 = ROUTE_BEHIND + start;
                arcs.push((s0, s0 + arc_len, sign * k_max));
                let remaining = ROUTE_AHEAD - start - arc_len;
                pts.push(Point2::new(p.x + remaining * heading.cos(), p.y + remaining * heading.sin()));
            }
        }
        Road { line: Polyline::new(pts).expect("distinct route vertices"), arcs, left_edge }
    }

    fn drivable(&self) -> Polygon {
        let left = self.line.offset(self.left_edge).expect("left edge");
        let right = self.line.offset(RIGHT_EDGE).expect("right edge");
        let mut ring: Vec<Point2> = left.points().to_vec();
        ring.extend(right.points().iter().rev().copied());
        Polygon::new(ring, Vec::new()).expect("corridor polygon")
    }

    /// Speed the expert may carry at arc length `s` given the curves ahead.
    fn curve_cap(&self, s: f64) -> f64 {
        let mut cap = f64::INFINITY;
        for &(start, end, k) in &self.arcs {
            if s <= end {
                let v_curve = (CURVE_LAT_ACCEL / k.abs()).sqrt();
                let d = (start - s).max(0.0);
                cap = cap.min((v_curve * v_curve + 2.0 * 1.5 * d).sqrt());
            }
        }
        cap
    }
}

fn ego_s() -> f64 {
    ROUTE_BEHIND
}

/// Track of a vehicle riding the road at `lateral(t)` with station `station(t)`.
fn road_track(
    id: &str,
    category: AgentCategory,
    extents: (f64, f64),
    road: &Road,
    station: impl Fn(f64) -> f64,
    lateral: impl Fn(f64) -> f64,
) -> AgentTrack {
    let pose_at = |t: f64| {
        let s = station(t);
        let base = road.line.pose_at_extended(s);
        let d = lateral(t);
        let n = Point2::new(-base.heading.sin(), base.heading.cos());
        (base.position() + n.scale(d), base.heading)
    };
    let positions: Vec<(Point2, f64)> = (0..=RECORD_TICKS).map(|k| pose_at(k as f64 * SIM_DT)).collect();
    let states = (0..=RECORD_TICKS)
        .map(|k| {
            let (p, base_heading) = positions[k];
            let (a, b) = if k < RECORD_TICKS { (positions[k].0, positions[k + 1].0) } else { (positions[k - 1].0, positions[k].0) };
            let d = b - a;
            let speed = d.norm() / SIM_DT;
            let heading = if speed > 0.05 { d.y.atan2(d.x) } else { base_heading };
            AgentState { pose: Pose2D::new(p.x, p.y, heading), speed }
        })
        .collect();
    AgentTrack { agent_id: id.to_string(), category, half_length: extents.0, half_width: extents.1, states }
}

fn car_extents(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (rng.gen_range(2.1..2.5), rng.gen_range(0.9..1.0))
}

/// Station of a vehicle starting at `s0` with speed `v` that brakes at
/// `decel` from `t_brake` until it stops.
fn braking_station(s0: f64, v: f64, t_brake: f64, decel: f64) -> impl Fn(f64) -> f64 {
    move |t: f64| {
        if t <= t_brake {
            s0 + v * t
        } else {
            let tau = (t - t_brake).min(v / decel);
            s0 + v * t_brake + v * tau - 0.5 * decel * tau * tau
        }
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Speed-capped, jerk-limited IDM `(station, speed)` of the expert at every tick.
fn expert_stations(road: &Road, frames: &RouteFrames, profile: &LateralProfile, v0: f64, v_init: f64) -> Vec<(f64, f64)> {
    let idm = IdmParams { time_headway: 1.2, ..IdmParams::default() };
    let half_length = VehicleParameters::default().half_length();
    let (mut s, mut v, mut a_prev) = (ego_s(), v_init, 0.0);
    let mut out = vec![(s, v)];
    for k in 0..RECORD_TICKS {
        let leader = frames.leader(k, s, half_length, profile);
        let v_target = v0.min(road.curve_cap(s + v));
        let a_idm = idm.acceleration(v, v_target, leader).clamp(-EXPERT_BRAKE, idm.max_accel);
        let a = a_idm.clamp(a_prev - EXPERT_JERK * SIM_DT, a_prev + EXPERT_JERK * SIM_DT);
        v = (v + a * SIM_DT).max(0.0);
        a_prev = if v == 0.0 { 0.0 } else { a };
        s += v * SIM_DT;
        out.push((s, v));
    }
    out
}

fn build_scene(archetype: Archetype, scene_id: String, rng: &mut ChaCha8Rng) -> Scene {
    let limit: f64 = rng.gen_range(8.0..13.0);
    let two_lane = match archetype {
        Archetype::LaneBlockage | Archetype::MergeGap => true,
        _ => rng.gen_bool(0.5),
    };
    let left_edge = if two_lane { LEFT_EDGE_DOUBLE } else { LEFT_EDGE_SINGLE };
    let turn = match archetype {
        Archetype::LeftTurn | Archetype::RightTurn => {
            let sign = if archetype == Archetype::LeftTurn { 1.0 } else { -1.0 };
            Some((sign, rng.gen_range(12.0..22.0), rng.gen_range(3.0..10.0)))
        }
        _ => None,
    };
    let road = Road::new(turn, left_edge);
    let se = ego_s();
    let mut v_init = limit * rng.gen_range(0.8..1.0);
    let mut v0 = limit * rng.gen_range(0.9..1.0);
    let mut tracks = Vec::new();
    let mut profile = LateralProfile { s_start: se, start_offset: 0.0, target_offset: 0.0, blend: 10.0 };
    let mut allow_follower = true;
    let mut yield_window: Option<(f64, f64)> = None;

    match archetype {
        Archetype::StraightFollow => {
            let gap = rng.gen_range(12.0..40.0);
            let v_lead = limit * rng.gen_range(0.5..0.85);
            let ext = car_extents(rng);
            let s0 = se + 2.32 + gap + ext.0;
            tracks.push(road_track("lead", AgentCategory::Vehicle, ext, &road, move |t| s0 + v_lead * t, |_| 0.0));
        }
        Archetype::LeadBrake => {
            let gap = rng.gen_range(18.0..30.0);
            let ext = car_extents(rng);
            let s0 = se + 2.32 + gap + ext.0;
            let st = braking_station(s0, v_init, rng.gen_range(0.5..2.5), rng.gen_range(2.5..4.5));
            tracks.push(road_track("lead", AgentCategory::Vehicle, ext, &road, st, |_| 0.0));
        }
        Archetype::LeftTurn | Archetype::RightTurn => {
            let (_, radius, _) = turn.expect("turn archetype");
            let v_curve = (CURVE_LAT_ACCEL * radius).sqrt();
            v_init = v_init.min(v_curve + rng.gen_range(0.5..2.0));
        }
        Archetype::CrossingPedestrian => {
            let dist = v_init * v_init / 4.0 + rng.gen_range(8.0..18.0);
            let walk = rng.gen_range(1.0..1.8);
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let start_lat = side * (left_edge.max(-RIGHT_EDGE) + rng.gen_range(1.0..2.5));
            let to_corridor = start_lat.abs() - 2.5;
            let t_enter = (dist / v_init - rng.gen_range(0.5..2.0)).max(0.2);
            let t_start = (t_enter - to_corridor / walk).max(0.0);
            let sp = se + dist;
            let base = road.line.pose_at(sp);
            let t_clear = t_start + (start_lat.abs() + PEDESTRIAN_CLEARANCE) / walk;
            yield_window = Some((0.0, t_clear));
            let n = Point2::new(-base.heading.sin(), base.heading.cos());
            let states = (0..=RECORD_TICKS)
                .map(|k| {
                    let t = k as f64 * SIM_DT;
                    let lat = start_lat - side * walk * (t - t_start).max(0.0);
                    let p = base.position() + n.scale(lat);
                    let heading = normalize_angle(base.heading - side * std::f64::consts::FRAC_PI_2);
                    AgentState { pose: Pose2D::new(p.x, p.y, heading), speed: if t >= t_start { walk } else { 0.0 } }
                })
                .collect();
            tracks.push(AgentTrack {
                agent_id: "pedestrian".into(),
                category: AgentCategory::Pedestrian,
                half_length: 0.3,
                half_width: 0.3,
                states,
            });
        }
        Archetype::LaneBlockage => {
            v_init = limit * rng.gen_range(0.5..0.7);
            v0 = v_init;
            let blend = (4.0 * v_init).max(16.0);
            let shift_start = se + rng.gen_range(0.0..1.0);
            let sb = shift_start + 0.85 * blend + rng.gen_range(0.0..2.0);
            let ext = (rng.gen_range(1.0..2.4), rng.gen_range(0.8..1.1));
            tracks.push(road_track("blockage", AgentCategory::StaticObject, ext, &road, move |_| sb, |_| 0.0));
            profile = LateralProfile { s_start: shift_start, start_offset: 0.0, target_offset: LEFT_LANE, blend };
            allow_follower = false;
        }
        Archetype::MergeGap => {
            let ahead = rng.gen_range(8.0..20.0);
            let v_m = (v_init - rng.gen_range(0.5..2.0)).max(2.0);
            let t_m = rng.gen_range(0.3..1.5);
            let dur = rng.gen_range(2.5..4.0);
            let ext = car_extents(rng);
            let s0 = se + 2.32 + ahead + ext.0;
            yield_window = Some((t_m, f64::INFINITY));
            tracks.push(road_track(
                "merger",
                AgentCategory::Vehicle,
                ext,
                &road,
                move |t| s0 + v_m * t,
                move |t| LEFT_LANE * (1.0 - smoothstep((t - t_m) / dur)),
            ));
        }
    }

    let forecast = snapshots(&tracks);
    // Within the window the expert sees the agent already on the centreline.
    let mut expert_view = forecast.clone();
    if let Some((from, to)) = yield_window {
        for (k, frame) in expert_view.iter_mut().enumerate() {
            let t = k as f64 * SIM_DT;
            if (from..=to).contains(&t) {
                for a in frame.iter_mut().filter(|a| a.agent == 0) {
                    let (st, _) = road.line.frenet(a.bbox.center.position());
                    let spot = road.line.pose_at(st);
                    a.bbox.center = Pose2D::new(spot.x, spot.y, a.bbox.center.heading);
                }
            }
        }
    }
    let frames = RouteFrames::new(&road.line, &expert_view);
    let stations = expert_stations(&road, &frames, &profile, v0, v_init);
    let plan: Vec<EgoLogState> = stations
        .iter()
        .enumerate()
        .map(|(k, &(st, v))| {
            let a = if k < RECORD_TICKS { (stations[k + 1].1 - v) / SIM_DT } else { 0.0 };
            EgoLogState { pose: profile.pose(&road.line, st), velocity: v * profile.slope(st).hypot(1.0), acceleration: a }
        })
        .collect();

    if allow_follower && rng.gen_bool(0.4) {
        let gap = rng.gen_range(6.0..14.0);
        let ext = car_extents(rng);
        let mut all = forecast.clone();
        for (k, frame) in all.iter_mut().enumerate() {
            let ego = plan[k];
            frame.push(AgentSnapshot {
                agent: tracks.len(),
                category: AgentCategory::Vehicle,
                bbox: OrientedBox { center: ego.pose, half_length: 2.32, half_width: 0.95 },
                speed: ego.velocity,
            });
        }
        let follower_frames = RouteFrames::new(&road.line, &all);
        let idm = IdmParams { time_headway: rng.gen_range(0.8..1.4), ..IdmParams::default() };
        let mut s = se - 2.32 - gap - ext.0;
        let mut v = v_init;
        let flat = LateralProfile { s_start: s, start_offset: 0.0, target_offset: 0.0, blend: 10.0 };
        let mut st = vec![s];
        for k in 0..RECORD_TICKS {
            let leader = follower_frames.leader(k, s, ext.0, &flat);
            let a = idm.acceleration(v, v0.max(v_init), leader).max(-8.0);
            v = (v + a * SIM_DT).max(0.0);
            s += v * SIM_DT;
            st.push(s);
        }
        tracks.push(road_track("follower", AgentCategory::Vehicle, ext, &road, move |t| st[((t / SIM_DT).round() as usize).min(RECORD_TICKS)], |_| 0.0));
    }

    let human_log = plan;
    let history: Vec<HistoryEntry> = (0..HISTORY_LEN)
        .map(|j| {
            let back = (HISTORY_LEN - 1 - j) as f64 * HISTORY_INTERVAL * v_init;
            HistoryEntry { pose: road.line.pose_at_extended(se - back), velocity: v_init, acceleration: 0.0 }
        })
        .collect();

    let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let shift = Point2::new(rng.gen_range(-200.0..200.0), rng.gen_range(-200.0..200.0));
    let xf = Rigid { theta, shift };

    let route = Polyline::new(road.line.points().iter().map(|p| xf.point(*p)).collect()).expect("rigid image of route");
    let drivable = road.drivable();
    let drivable = Polygon::new(drivable.exterior.iter().map(|p| xf.point(*p)).collect(), Vec::new()).expect("rigid image of corridor");
    for t in &mut tracks {
        for s in &mut t.states {
            s.pose = xf.pose(s.pose);
        }
    }
    let human_log: Vec<EgoLogState> = human_log.into_iter().map(|s| EgoLogState { pose: xf.pose(s.pose), ..s }).collect();
    let history: Vec<HistoryEntry> = history.into_iter().map(|h| HistoryEntry { pose: xf.pose(h.pose), ..h }).collect();
    let ego_pose = human_log[0].pose;
    let human_trajectory = Trajectory::new(0.0, ego_pose, (1..=8).map(|k| human_log[5 * k].pose).collect());
    let navigation_command = derive_navigation_command(&route, &ego_pose, navigation_lookahead(v_init));

    Scene {
        schema_version: SCHEMA_VERSION.to_string(),
        scene_id,
        map: SceneMap { drivable_area: vec![drivable], route_centerline: route, speed_limit: limit },
        ego_init: EgoStatus { pose: ego_pose, velocity: v_init, acceleration: 0.0, navigation_command },
        ego_history: history,
        human_trajectory,
        agent_tracks: tracks,
        human_log: Some(human_log),
    }
}

fn snapshots(tracks: &[AgentTrack]) -> Vec<Vec<AgentSnapshot>> {
    (0..=RECORD_TICKS)
        .map(|k| {
            tracks
                .iter()
                .enumerate()
                .map(|(i, t)| AgentSnapshot { agent: i, category: t.category, bbox: t.box_at(k), speed: t.state_at(k).speed })
                .collect()
        })
        .collect()
}

struct Rigid {
    theta: f64,
    shift: Point2,
}

impl Rigid {
    fn point(&self, p: Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        Point2::new(c * p.x - s * p.y + self.shift.x, s * p.x + c * p.y + self.shift.y)
    }

    fn pose(&self, p: Pose2D) -> Pose2D {
        let q = self.point(p.position());
        Pose2D::new(q.x, q.y, p.heading + self.theta)
    }
}
