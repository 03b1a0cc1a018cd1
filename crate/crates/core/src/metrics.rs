//! PDM score subscores and aggregation, plus the open-loop (OLS) and
//! closed-loop (CLS) scores used by the alignment study.
//!
//! Subscore functions operate on plain state sequences so that the
//! proposal search in `planners` can reuse them on candidate rollouts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{BicycleState, VehicleParameters};
use crate::geom::{normalize_angle, OrientedBox, Polyline};
use crate::planners::pdm_progress_upper_bound;
use crate::scene::{Scene, SceneMap, Trajectory, SIM_DT};
use crate::sim::{rollout_nonreactive, AgentSnapshot, SimError, SimulationLog};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("invalid metric config: {0}")]
    Config(String),
    #[error("trajectories differ in horizon or sampling ({planned} vs {human} poses)")]
    HorizonMismatch { planned: usize, human: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortThresholds {
    pub min_lon_accel: f64,
    pub max_lon_accel: f64,
    pub max_abs_lat_accel: f64,
    pub max_abs_jerk: f64,
    pub max_abs_lon_jerk: f64,
    pub max_abs_yaw_rate: f64,
    pub max_abs_yaw_accel: f64,
}

impl Default for ComfortThresholds {
    fn default() -> Self {
        Self {
            min_lon_accel: -4.05,
            max_lon_accel: 2.40,
            max_abs_lat_accel: 4.89,
            max_abs_jerk: 8.37,
            max_abs_lon_jerk: 4.13,
            max_abs_yaw_rate: 0.95,
            max_abs_yaw_accel: 1.93,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsThresholds {
    pub ade: f64,
    pub fde: f64,
    pub average_heading: f64,
    pub final_heading: f64,
    pub miss_distance: f64,
}

impl Default for OlsThresholds {
    fn default() -> Self {
        Self { ade: 8.0, fde: 8.0, average_heading: 0.8, final_heading: 0.8, miss_distance: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub weight_ep: f64,
    pub weight_ttc: f64,
    pub weight_comfort: f64,
    pub horizon: f64,
    pub ttc_threshold: f64,
    pub ttc_step: f64,
    pub progress_discard: f64,
    pub static_speed: f64,
    pub comfort: ComfortThresholds,
    pub ols: OlsThresholds,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            weight_ep: 5.0,
            weight_ttc: 5.0,
            weight_comfort: 2.0,
            horizon: 4.0,
            ttc_threshold: 1.0,
            ttc_step: 0.1,
            progress_discard: 5.0,
            static_speed: 0.05,
            comfort: ComfortThresholds::default(),
            ols: OlsThresholds::default(),
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        let w = [self.weight_ep, self.weight_ttc, self.weight_comfort];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(MetricError::Config(format!("weights {w:?} must be nonnegative and not all zero")));
        }
        let half_steps = self.horizon * 2.0;
        if !(2.0..=8.0).contains(&self.horizon) || (half_steps - half_steps.round()).abs() > 1e-9 {
            return Err(MetricError::Config(format!("horizon {} s must be a multiple of 0.5 s in [2, 8]", self.horizon)));
        }
        if !(self.ttc_threshold >= 0.0 && self.ttc_step > 0.0) {
            return Err(MetricError::Config("ttc threshold must be nonnegative and the step positive".into()));
        }
        Ok(())
    }

    pub fn with_weights(self, ep: f64, ttc: f64, comfort: f64) -> Self {
        Self { weight_ep: ep, weight_ttc: ttc, weight_comfort: comfort, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubScores {
    pub nc: f64,
    pub dac: f64,
    pub ep: f64,
    pub ttc: f64,
    pub comfort: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdmScore {
    pub subscores: SubScores,
    pub pdms: f64,
}

pub fn aggregate_pdms(sub: SubScores, cfg: &MetricConfig) -> PdmScore {
    let total = cfg.weight_ep + cfg.weight_ttc + cfg.weight_comfort;
    let weighted = (cfg.weight_ep * sub.ep + cfg.weight_ttc * sub.ttc + cfg.weight_comfort * sub.comfort) / total;
    PdmScore { subscores: sub, pdms: sub.nc * sub.dac * weighted }
}

pub fn ego_box(state: &BicycleState, params: &VehicleParameters) -> OrientedBox {
    OrientedBox { center: state.pose(), half_length: params.half_length(), half_width: params.half_width() }
}

/// Whether a contact between the ego and `agent` is attributed to the ego.
pub fn is_at_fault(ego: &BicycleState, agent: &AgentSnapshot, cfg: &MetricConfig) -> bool {
    if ego.velocity.abs() < cfg.static_speed {
        return false;
    }
    let dir = ego.pose().direction();
    let rel = agent.bbox.center.position() - ego.pose().position();
    let behind = rel.dot(dir) < 0.0;
    let closing_from_behind = agent.velocity().dot(dir) > ego.velocity;
    !(behind && closing_from_behind)
}

fn nc_value(categories: impl Iterator<Item = bool>) -> f64 {
    let mut nc: f64 = 1.0;
    for road_user in categories {
        nc = nc.min(if road_user { 0.0 } else { 0.5 });
    }
    nc
}

/// No-at-fault-collision subscore over aligned ego and agent sequences.
pub fn no_at_fault_collision(ego: &[BicycleState], agents: &[Vec<AgentSnapshot>], params: &VehicleParameters, cfg: &MetricConfig) -> f64 {
    let n_agents = agents.first().map_or(0, Vec::len);
    let mut touched = vec![false; n_agents];
    let mut faults = Vec::new();
    let ego_radius = params.half_length().hypot(params.half_width());
    for (state, frame) in ego.iter().zip(agents) {
        let eb = ego_box(state, params);
        for a in frame {
            if touched[a.agent] {
                continue;
            }
            let reach = ego_radius + a.bbox.bounding_radius();
            if eb.center.position().distance(a.bbox.center.position()) > reach {
                continue;
            }
            if eb.intersects(&a.bbox) {
                touched[a.agent] = true;
                if is_at_fault(state, a, cfg) {
                    faults.push(a.category.is_road_user());
                }
            }
        }
    }
    nc_value(faults.into_iter())
}

pub fn drivable_area_compliance(ego: &[BicycleState], map: &SceneMap, params: &VehicleParameters) -> f64 {
    let ok = ego.iter().all(|s| ego_box(s, params).corners().iter().all(|c| map.is_drivable(*c)));
    if ok {
        1.0
    } else {
        0.0
    }
}

/// Time-to-collision subscore: 0 if constant-velocity projections of the ego
/// and any road user overlap within the threshold at any tick.
pub fn time_to_collision(ego: &[BicycleState], agents: &[Vec<AgentSnapshot>], params: &VehicleParameters, cfg: &MetricConfig) -> f64 {
    let steps = (cfg.ttc_threshold / cfg.ttc_step).round() as usize;
    let ego_radius = params.half_length().hypot(params.half_width());
    for (state, frame) in ego.iter().zip(agents) {
        if state.velocity.abs() < cfg.static_speed {
            continue;
        }
        for a in frame.iter().filter(|a| a.category.is_road_user()) {
            let reach = ego_radius + a.bbox.bounding_radius() + (state.velocity.abs() + a.speed.abs()) * cfg.ttc_threshold;
            if state.pose().position().distance(a.bbox.center.position()) > reach {
                continue;
            }
            for j in 0..=steps {
                let dt = j as f64 * cfg.ttc_step;
                let pose = state.pose().advance(state.velocity * dt);
                let ego_proj = BicycleState::at_pose(pose, state.velocity, state.steering_angle);
                let agent_proj = a.projected(dt);
                if ego_box(&ego_proj, params).intersects(&agent_proj.bbox) && is_at_fault(&ego_proj, &agent_proj, cfg) {
                    return 0.0;
                }
            }
        }
    }
    1.0
}

/// Finite-difference derivative: central inside, one-sided at the ends.
pub fn differentiate(xs: &[f64], dt: f64) -> Vec<f64> {
    let n = xs.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (xs[1] - xs[0]) / dt
            } else if i == n - 1 {
                (xs[n - 1] - xs[n - 2]) / dt
            } else {
                (xs[i + 1] - xs[i - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

/// Kinematic signals used by the comfort check.
#[derive(Debug, Clone, PartialEq)]
pub struct ComfortSignals {
    pub lon_accel: Vec<f64>,
    pub lat_accel: Vec<f64>,
    pub jerk: Vec<f64>,
    pub lon_jerk: Vec<f64>,
    pub yaw_rate: Vec<f64>,
    pub yaw_accel: Vec<f64>,
}

pub fn comfort_signals(ego: &[BicycleState], dt: f64) -> ComfortSignals {
    let v: Vec<f64> = ego.iter().map(|s| s.velocity).collect();
    let mut yaw = Vec::with_capacity(ego.len());
    for s in ego {
        let h = match yaw.last() {
            Some(&prev) => prev + normalize_angle(s.heading - prev),
            None => s.heading,
        };
        yaw.push(h);
    }
    let lon_accel = differentiate(&v, dt);
    let yaw_rate = differentiate(&yaw, dt);
    let lat_accel: Vec<f64> = v.iter().zip(&yaw_rate).map(|(v, w)| v * w).collect();
    let yaw_accel = differentiate(&yaw_rate, dt);
    let lon_jerk = differentiate(&lon_accel, dt);
    let lat_jerk = differentiate(&lat_accel, dt);
    let jerk = lon_jerk.iter().zip(&lat_jerk).map(|(a, b)| a.hypot(*b)).collect();
    ComfortSignals { lon_accel, lat_accel, jerk, lon_jerk, yaw_rate, yaw_accel }
}

pub fn comfort(ego: &[BicycleState], cfg: &MetricConfig) -> f64 {
    let s = comfort_signals(ego, SIM_DT);
    let t = &cfg.comfort;
    let within = |xs: &[f64], lo: f64, hi: f64| xs.iter().all(|x| (lo..=hi).contains(x));
    let ok = within(&s.lon_accel, t.min_lon_accel, t.max_lon_accel)
        && within(&s.lat_accel, -t.max_abs_lat_accel, t.max_abs_lat_accel)
        && within(&s.jerk, -t.max_abs_jerk, t.max_abs_jerk)
        && within(&s.lon_jerk, -t.max_abs_lon_jerk, t.max_abs_lon_jerk)
        && within(&s.yaw_rate, -t.max_abs_yaw_rate, t.max_abs_yaw_rate)
        && within(&s.yaw_accel, -t.max_abs_yaw_accel, t.max_abs_yaw_accel);
    if ok {
        1.0
    } else {
        0.0
    }
}

/// Route progress between the first and last states (m).
pub fn route_progress(ego: &[BicycleState], route: &Polyline) -> f64 {
    match (ego.first(), ego.last()) {
        (Some(a), Some(b)) => route.project(b.pose().position()).arc_length - route.project(a.pose().position()).arc_length,
        _ => 0.0,
    }
}

pub fn ego_progress_ratio(progress: f64, upper_bound: f64, cfg: &MetricConfig) -> f64 {
    if upper_bound < cfg.progress_discard {
        return 1.0;
    }
    (progress / upper_bound).clamp(0.0, 1.0)
}

pub fn score_no_at_fault_collision(log: &SimulationLog, cfg: &MetricConfig) -> f64 {
    no_at_fault_collision(&log.ego_states, &log.agent_states, &VehicleParameters::default(), cfg)
}

pub fn score_drivable_area_compliance(log: &SimulationLog, scene: &Scene) -> f64 {
    drivable_area_compliance(&log.ego_states, &scene.map, &VehicleParameters::default())
}

pub fn score_time_to_collision(log: &SimulationLog, cfg: &MetricConfig) -> f64 {
    time_to_collision(&log.ego_states, &log.agent_states, &VehicleParameters::default(), cfg)
}

pub fn score_comfort(log: &SimulationLog, cfg: &MetricConfig) -> f64 {
    comfort(&log.ego_states, cfg)
}

pub fn score_ego_progress(log: &SimulationLog, scene: &Scene, upper_bound: f64, cfg: &MetricConfig) -> f64 {
    ego_progress_ratio(route_progress(&log.ego_states, &scene.map.route_centerline), upper_bound, cfg)
}

/// All five subscores of a log against a precomputed progress upper bound.
pub fn score_log(log: &SimulationLog, scene: &Scene, upper_bound: f64, cfg: &MetricConfig) -> PdmScore {
    let sub = SubScores {
        nc: score_no_at_fault_collision(log, cfg),
        dac: score_drivable_area_compliance(log, scene),
        ep: score_ego_progress(log, scene, upper_bound, cfg),
        ttc: score_time_to_collision(log, cfg),
        comfort: score_comfort(log, cfg),
    };
    aggregate_pdms(sub, cfg)
}

pub fn evaluate_scene(scene: &Scene, trajectory: &Trajectory, cfg: &MetricConfig) -> Result<PdmScore, MetricError> {
    let bound = pdm_progress_upper_bound(scene, cfg.horizon);
    evaluate_scene_with_bound(scene, trajectory, cfg, bound)
}

/// As [`evaluate_scene`] with the progress upper bound supplied by the caller.
pub fn evaluate_scene_with_bound(scene: &Scene, trajectory: &Trajectory, cfg: &MetricConfig, upper_bound: f64) -> Result<PdmScore, MetricError> {
    cfg.validate()?;
    let log = rollout_nonreactive(scene, trajectory, cfg.horizon)?;
    Ok(score_log(&log, scene, upper_bound, cfg))
}

/// Displacement and heading error components of the open-loop score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsBreakdown {
    pub ade: f64,
    pub fde: f64,
    pub average_heading_error: f64,
    pub final_heading_error: f64,
    pub miss: bool,
    pub ols: f64,
}

pub fn ols_breakdown(planned: &Trajectory, human: &Trajectory, cfg: &MetricConfig) -> Result<OlsBreakdown, MetricError> {
    let n = planned.poses.len();
    if n == 0 || n != human.poses.len() || (planned.horizon - human.horizon).abs() > 1e-9 {
        return Err(MetricError::HorizonMismatch { planned: n, human: human.poses.len() });
    }
    let disp: Vec<f64> = planned.poses.iter().zip(&human.poses).map(|(p, h)| p.position().distance(h.position())).collect();
    let head: Vec<f64> = planned.poses.iter().zip(&human.poses).map(|(p, h)| normalize_angle(p.heading - h.heading).abs()).collect();
    let ade = disp.iter().sum::<f64>() / n as f64;
    let fde = disp[n - 1];
    let ahe = head.iter().sum::<f64>() / n as f64;
    let fhe = head[n - 1];
    let t = &cfg.ols;
    let miss = disp.iter().any(|d| *d > t.miss_distance);
    let sub = |e: f64, th: f64| (1.0 - e / th).max(0.0);
    let mean = (sub(ade, t.ade) + sub(fde, t.fde) + sub(ahe, t.average_heading) + sub(fhe, t.final_heading)) / 4.0;
    let ols = if miss { 0.0 } else { mean };
    Ok(OlsBreakdown { ade, fde, average_heading_error: ahe, final_heading_error: fhe, miss, ols })
}

pub fn compute_ols(planned: &Trajectory, human: &Trajectory, cfg: &MetricConfig) -> Result<f64, MetricError> {
    Ok(ols_breakdown(planned, human, cfg)?.ols)
}

/// Closed-loop score: PDMS subscores over the whole log, with the progress
/// upper bound recomputed for the log duration.
pub fn compute_cls(log: &SimulationLog, scene: &Scene, cfg: &MetricConfig) -> f64 {
    let bound = pdm_progress_upper_bound(scene, log.duration);
    compute_cls_with_bound(log, scene, cfg, bound)
}

pub fn compute_cls_with_bound(log: &SimulationLog, scene: &Scene, cfg: &MetricConfig, upper_bound: f64) -> f64 {
    score_log(log, scene, upper_bound, cfg).pdms
}

/// One row of a per-scene metric report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scene_id: String,
    pub nc: f64,
    pub dac: f64,
    pub ep: f64,
    pub ttc: f64,
    pub comfort: f64,
    pub pdms: f64,
    pub ols: Option<f64>,
    pub cls: Option<f64>,
}

impl MetricRow {
    pub fn new(scene_id: &str, score: &PdmScore, ols: Option<f64>, cls: Option<f64>) -> Self {
        let s = score.subscores;
        Self { scene_id: scene_id.to_string(), nc: s.nc, dac: s.dac, ep: s.ep, ttc: s.ttc, comfort: s.comfort, pdms: score.pdms, ols, cls }
    }
}
