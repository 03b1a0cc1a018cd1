use serde::{Deserialize, Serialize};

use super::{parse_params, Observation, Planner, PlannerError, PlannerKind};
use crate::geom::Pose2D;
use crate::scene::{pose_count, Trajectory, HISTORY_INTERVAL, TRAJECTORY_INTERVAL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpeedSource {
    /// Reported ego speed.
    #[default]
    Current,
    /// Mean speed over the history window.
    History,
}

fn straight_plan(obs: &Observation, distance: impl Fn(f64) -> f64) -> Trajectory {
    let origin: Pose2D = obs.ego_status.pose;
    let poses = (1..=pose_count(obs.horizon)).map(|k| origin.advance(distance(k as f64 * TRAJECTORY_INTERVAL))).collect();
    Trajectory::new(obs.time, origin, poses)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantVelocityParams {
    pub speed_source: SpeedSource,
}

#[derive(Debug, Clone)]
pub struct ConstantVelocityPlanner {
    name: String,
    params: ConstantVelocityParams,
}

impl ConstantVelocityPlanner {
    pub fn new(name: impl Into<String>, speed_source: SpeedSource) -> Self {
        Self { name: name.into(), params: ConstantVelocityParams { speed_source } }
    }

    pub fn speed(&self, obs: &Observation) -> f64 {
        match self.params.speed_source {
            SpeedSource::Current => obs.ego_status.velocity,
            SpeedSource::History => {
                let h = &obs.ego_history;
                match (h.first(), h.last()) {
                    (Some(a), Some(b)) if h.len() > 1 => {
                        a.pose.position().distance(b.pose.position()) / ((h.len() - 1) as f64 * HISTORY_INTERVAL)
                    }
                    _ => obs.ego_status.velocity,
                }
            }
        }
    }
}

impl Planner for ConstantVelocityPlanner {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> PlannerKind {
        PlannerKind::ConstantVelocity
    }

    fn plan(&mut self, obs: &Observation) -> Trajectory {
        let v = self.speed(obs);
        straight_plan(obs, |t| v * t)
    }

    fn clone_box(&self) -> Box<dyn Planner> {
        Box::new(self.clone())
    }
}

pub(super) fn build_constant_velocity(name: &str, params: &serde_json::Value) -> Result<Box<dyn Planner>, PlannerError> {
    let p: ConstantVelocityParams = parse_params(name, params)?;
    Ok(Box::new(ConstantVelocityPlanner { name: name.to_string(), params: p }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantAccelerationParams {
    pub acceleration: f64,
}

#[derive(Debug, Clone)]
pub struct ConstantAccelerationPlanner {
    name: String,
    acceleration: f64,
}

impl ConstantAccelerationPlanner {
    pub fn new(name: impl Into<String>, acceleration: f64) -> Self {
        Self { name: name.into(), acceleration }
    }
}

/// Distance covered after `t` seconds from speed `v` under constant `a`,
/// stopping rather than reversing.
pub fn constant_acceleration_distance(v: f64, a: f64, t: f64) -> f64 {
    let v = v.max(0.0);
    if a < 0.0 {
        let t_stop = v / -a;
        if t >= t_stop {
            return v * t_stop + 0.5 * a * t_stop * t_stop;
        }
    }
    v * t + 0.5 * a * t * t
}

impl Planner for ConstantAccelerationPlanner {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> PlannerKind {
        PlannerKind::ConstantAcceleration
    }

    fn plan(&mut self, obs: &Observation) -> Trajectory {
        let (v, a) = (obs.ego_status.velocity, self.acceleration);
        straight_plan(obs, |t| constant_acceleration_distance(v, a, t))
    }

    fn clone_box(&self) -> Box<dyn Planner> {
        Box::new(self.clone())
    }
}

pub(super) fn build_constant_acceleration(name: &str, params: &serde_json::Value) -> Result<Box<dyn Planner>, PlannerError> {
    let p: ConstantAccelerationParams = parse_params(name, params)?;
    if !p.acceleration.is_finite() {
        return Err(PlannerError::Params { name: name.to_string(), message: "acceleration must be finite".into() });
    }
    Ok(Box::new(ConstantAccelerationPlanner::new(name, p.acceleration)))
}
