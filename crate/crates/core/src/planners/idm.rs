use serde::{Deserialize, Serialize};

use super::{parse_params, Observation, Planner, PlannerError, PlannerKind};
use crate::dynamics::VehicleParameters;
use crate::geom::{Point2, Polyline, Pose2D};
use crate::scene::{pose_count, Trajectory, SIM_DT, TRAJECTORY_INTERVAL};
use crate::sim::{AgentSnapshot, LEADER_CORRIDOR};

/// Intelligent Driver Model parameters. `v0_fraction` scales the speed limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmParams {
    pub v0_fraction: f64,
    pub time_headway: f64,
    pub min_gap: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub exponent: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self { v0_fraction: 1.0, time_headway: 1.5, min_gap: 2.0, max_accel: 1.5, comfortable_decel: 2.0, exponent: 4.0 }
    }
}

impl IdmParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [self.v0_fraction, self.max_accel, self.comfortable_decel, self.exponent];
        if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err("v0_fraction, max_accel, comfortable_decel and exponent must be positive".into());
        }
        if !(self.time_headway.is_finite() && self.time_headway >= 0.0 && self.min_gap.is_finite() && self.min_gap >= 0.0) {
            return Err("time_headway and min_gap must be nonnegative".into());
        }
        Ok(())
    }

    /// Desired gap `s* = s0 + max(0, vT + vΔv / (2√(ab)))`.
    pub fn desired_gap(&self, v: f64, dv: f64) -> f64 {
        let dynamic = v * self.time_headway + v * dv / (2.0 * (self.max_accel * self.comfortable_decel).sqrt());
        self.min_gap + dynamic.max(0.0)
    }

    /// IDM acceleration at speed `v` toward `v0`; `leader` is `(gap, leader speed)`.
    pub fn acceleration(&self, v: f64, v0: f64, leader: Option<(f64, f64)>) -> f64 {
        let free = 1.0 - (v.max(0.0) / v0).powf(self.exponent);
        match leader {
            None => self.max_accel * free,
            Some((gap, leader_speed)) => {
                let ratio = self.desired_gap(v, v - leader_speed) / gap.max(1e-3);
                self.max_accel * (free - ratio * ratio)
            }
        }
    }
}

/// An agent expressed in route coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteAgent {
    pub s: f64,
    pub lateral: f64,
    pub half_along: f64,
    pub half_across: f64,
    pub speed_along: f64,
}

const ROUTE_RELEVANCE: f64 = 30.0;

/// Forecast frames projected once onto the route for repeated leader queries.
#[derive(Debug, Clone)]
pub struct RouteFrames {
    frames: Vec<Vec<RouteAgent>>,
}

impl RouteFrames {
    pub fn new(route: &Polyline, forecast: &[Vec<AgentSnapshot>]) -> Self {
        let frames = forecast
            .iter()
            .map(|frame| {
                frame
                    .iter()
                    .filter_map(|a| {
                        let (s, lateral) = route.frenet(a.bbox.center.position());
                        if lateral.abs() > ROUTE_RELEVANCE {
                            return None;
                        }
                        let h = route.heading_at(s);
                        let (sin, cos) = (a.bbox.center.heading - h).sin_cos();
                        Some(RouteAgent {
                            s,
                            lateral,
                            half_along: a.bbox.half_length * cos.abs() + a.bbox.half_width * sin.abs(),
                            half_across: a.bbox.half_length * sin.abs() + a.bbox.half_width * cos.abs(),
                            speed_along: a.speed * cos,
                        })
                    })
                    .collect()
            })
            .collect();
        Self { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Nearest agent ahead of an ego centred at `s` whose footprint comes
    /// within the corridor around the lateral profile. Returns `(gap, speed)`.
    pub fn leader(&self, frame: usize, s: f64, half_length: f64, profile: &LateralProfile) -> Option<(f64, f64)> {
        let agents = &self.frames[frame.min(self.frames.len() - 1)];
        let mut best: Option<(f64, f64)> = None;
        for a in agents {
            if a.s <= s || (a.lateral - profile.offset(a.s)).abs() - a.half_across > LEADER_CORRIDOR {
                continue;
            }
            let gap = a.s - a.half_along - (s + half_length);
            if best.is_none_or(|(g, _)| gap < g) {
                best = Some((gap, a.speed_along));
            }
        }
        best
    }
}

/// Smooth lateral transition from `start_offset` to `target_offset` over `blend` metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralProfile {
    pub s_start: f64,
    pub start_offset: f64,
    pub target_offset: f64,
    pub blend: f64,
}

impl LateralProfile {
    pub fn new(s_start: f64, start_offset: f64, target_offset: f64, speed: f64) -> Self {
        Self { s_start, start_offset, target_offset, blend: (2.0 * speed).max(8.0) }
    }

    fn phase(&self, s: f64) -> f64 {
        ((s - self.s_start) / self.blend).clamp(0.0, 1.0)
    }

    pub fn offset(&self, s: f64) -> f64 {
        let x = self.phase(s);
        let w = x * x * (3.0 - 2.0 * x);
        self.start_offset + (self.target_offset - self.start_offset) * w
    }

    /// d(offset)/ds.
    pub fn slope(&self, s: f64) -> f64 {
        let x = self.phase(s);
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        (self.target_offset - self.start_offset) * 6.0 * x * (1.0 - x) / self.blend
    }

    pub fn pose(&self, route: &Polyline, s: f64) -> Pose2D {
        let base = route.pose_at_extended(s);
        let d = self.offset(s);
        let n = Point2::new(-base.heading.sin(), base.heading.cos());
        let p = base.position() + n.scale(d);
        Pose2D::new(p.x, p.y, base.heading + self.slope(s).atan())
    }
}

/// Arc length per 0.1 s tick (index 0 = start) of an IDM follower on the route.
#[allow(clippy::too_many_arguments)]
pub fn idm_stations(
    frames: &RouteFrames,
    profile: &LateralProfile,
    params: &IdmParams,
    v0: f64,
    s_start: f64,
    v_start: f64,
    ticks: usize,
    half_length: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(ticks + 1);
    let (mut s, mut v) = (s_start, v_start.max(0.0));
    let v_cap = v0.max(v);
    out.push(s);
    for k in 0..ticks {
        let leader = frames.leader(k, s, half_length, profile);
        let a = params.acceleration(v, v0, leader);
        v = (v + a * SIM_DT).clamp(0.0, v_cap);
        s += v * SIM_DT;
        out.push(s);
    }
    out
}

/// Ego route coordinates and the projected forecast shared by route-following planners.
pub(super) struct RouteContext {
    pub s: f64,
    pub lateral: f64,
    pub speed: f64,
    pub frames: RouteFrames,
}

impl RouteContext {
    pub fn new(obs: &Observation, forecast: &[Vec<AgentSnapshot>]) -> Self {
        let route = &obs.scene.map.route_centerline;
        let (s, lateral) = route.frenet(obs.ego_status.pose.position());
        let frames = RouteFrames::new(route, forecast);
        Self { s, lateral, speed: obs.ego_status.velocity.max(0.0), frames }
    }
}

/// Route-following trajectory at `target_offset` with IDM speed control toward `v0`.
pub(super) fn idm_route_trajectory(obs: &Observation, ctx: &RouteContext, params: &IdmParams, v0: f64, target_offset: f64) -> Trajectory {
    let route = &obs.scene.map.route_centerline;
    let profile = LateralProfile::new(ctx.s, ctx.lateral, target_offset, ctx.speed);
    let ticks = obs.horizon_ticks();
    let half_length = VehicleParameters::default().half_length();
    let stations = idm_stations(&ctx.frames, &profile, params, v0, ctx.s, ctx.speed, ticks, half_length);
    let stride = (TRAJECTORY_INTERVAL / SIM_DT).round() as usize;
    let poses = (1..=pose_count(obs.horizon)).map(|k| profile.pose(route, stations[(k * stride).min(ticks)])).collect();
    Trajectory::new(obs.time, obs.ego_status.pose, poses)
}

#[derive(Debug, Clone)]
pub struct IdmPlanner {
    name: String,
    params: IdmParams,
}

impl IdmPlanner {
    pub fn new(name: impl Into<String>, params: IdmParams) -> Self {
        Self { name: name.into(), params }
    }

    pub fn params(&self) -> &IdmParams {
        &self.params
    }
}

impl Planner for IdmPlanner {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> PlannerKind {
        PlannerKind::Idm
    }

    fn plan(&mut self, obs: &Observation) -> Trajectory {
        let ctx = RouteContext::new(obs, &obs.forecast(obs.horizon_ticks()));
        let v0 = obs.scene.map.speed_limit * self.params.v0_fraction;
        idm_route_trajectory(obs, &ctx, &self.params, v0, 0.0)
    }

    fn clone_box(&self) -> Box<dyn Planner> {
        Box::new(self.clone())
    }
}

pub(super) fn build_idm(name: &str, params: &serde_json::Value) -> Result<Box<dyn Planner>, PlannerError> {
    let p: IdmParams = parse_params(name, params)?;
    p.validate().map_err(|message| PlannerError::Params { name: name.to_string(), message })?;
    Ok(Box::new(IdmPlanner::new(name, p)))
}
