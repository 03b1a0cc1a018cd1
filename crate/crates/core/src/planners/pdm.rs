//! Proposal-search planner and the progress upper bound used by EP.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::idm::{idm_route_trajectory, IdmParams, RouteContext};
use super::{parse_params, Observation, Planner, PlannerError, PlannerKind};
use crate::dynamics::{ReferencePath, Tracker};
use crate::metrics::{
    aggregate_pdms, comfort, drivable_area_compliance, ego_progress_ratio, no_at_fault_collision, route_progress, time_to_collision,
    MetricConfig, PdmScore, SubScores,
};
use crate::scene::{Scene, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdmConfig {
    /// Target speeds as fractions of the speed limit.
    pub speed_fractions: Vec<f64>,
    /// Lateral offsets from the route centreline (m, left positive).
    pub lateral_offsets: Vec<f64>,
    #[serde(default)]
    pub idm: IdmParams,
}

impl Default for PdmConfig {
    fn default() -> Self {
        Self { speed_fractions: vec![0.2, 0.4, 0.6, 0.8, 1.0], lateral_offsets: vec![-1.0, 0.0, 1.0], idm: IdmParams::default() }
    }
}

impl PdmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.speed_fractions.is_empty() || self.lateral_offsets.is_empty() {
            return Err("proposal grid must not be empty".into());
        }
        if self.speed_fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) || self.lateral_offsets.iter().any(|o| !o.is_finite()) {
            return Err("speed fractions must be positive and offsets finite".into());
        }
        self.idm.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub speed_fraction: f64,
    pub lateral_offset: f64,
    pub trajectory: Trajectory,
    /// Route progress of the tracked rollout (m).
    pub progress: f64,
    pub score: PdmScore,
}

/// Rolls out and scores every (speed, offset) proposal, speed-major.
pub fn generate_proposals(obs: &Observation, cfg: &PdmConfig, metric: &MetricConfig) -> Vec<Proposal> {
    let ticks = obs.horizon_ticks();
    let forecast = obs.forecast(ticks);
    let ctx = RouteContext::new(obs, &forecast);
    let tracker = Tracker::standard();
    let map = &obs.scene.map;
    let mut rolled = Vec::with_capacity(cfg.speed_fractions.len() * cfg.lateral_offsets.len());
    for &fraction in &cfg.speed_fractions {
        for &offset in &cfg.lateral_offsets {
            let trajectory = idm_route_trajectory(obs, &ctx, &cfg.idm, map.speed_limit * fraction, offset);
            let states = tracker.track(obs.ego_state, &ReferencePath::new(&trajectory), obs.time, ticks);
            let partial = SubScores {
                nc: no_at_fault_collision(&states, &forecast, &tracker.params, metric),
                dac: drivable_area_compliance(&states, map, &tracker.params),
                ep: 0.0,
                ttc: time_to_collision(&states, &forecast, &tracker.params, metric),
                comfort: comfort(&states, metric),
            };
            let progress = route_progress(&states, &map.route_centerline);
            rolled.push((fraction, offset, trajectory, progress, partial));
        }
    }
    let best_progress = rolled.iter().map(|r| r.3).fold(f64::NEG_INFINITY, f64::max);
    rolled
        .into_iter()
        .map(|(speed_fraction, lateral_offset, trajectory, progress, mut sub)| {
            sub.ep = ego_progress_ratio(progress, best_progress, metric);
            Proposal { speed_fraction, lateral_offset, trajectory, progress, score: aggregate_pdms(sub, metric) }
        })
        .collect()
}

/// Ranking: higher score, then more progress, then smaller |offset|, then lower speed.
pub fn compare_proposals(a: &Proposal, b: &Proposal) -> Ordering {
    b.score
        .pdms
        .total_cmp(&a.score.pdms)
        .then(b.progress.total_cmp(&a.progress))
        .then(a.lateral_offset.abs().total_cmp(&b.lateral_offset.abs()))
        .then(a.speed_fraction.total_cmp(&b.speed_fraction))
}

/// Index of the best proposal (first wins on a complete tie).
pub fn select_proposal(proposals: &[Proposal]) -> Option<usize> {
    (0..proposals.len()).reduce(|best, i| if compare_proposals(&proposals[i], &proposals[best]) == Ordering::Less { i } else { best })
}

/// Largest route progress achieved without collision or leaving the
/// drivable area over `horizon` seconds from the scene start; 0 if none.
pub fn pdm_progress_upper_bound(scene: &Scene, horizon: f64) -> f64 {
    let obs = Observation::initial(scene, horizon);
    generate_proposals(&obs, &PdmConfig::default(), &MetricConfig::default())
        .iter()
        .filter(|p| p.score.subscores.nc == 1.0 && p.score.subscores.dac == 1.0)
        .map(|p| p.progress)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct PdmLitePlanner {
    name: String,
    config: PdmConfig,
    metric: MetricConfig,
}

impl PdmLitePlanner {
    pub fn new(name: impl Into<String>, config: PdmConfig) -> Self {
        Self { name: name.into(), config, metric: MetricConfig::default() }
    }

    pub fn config(&self) -> &PdmConfig {
        &self.config
    }
}

impl Planner for PdmLitePlanner {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> PlannerKind {
        PlannerKind::PdmLite
    }

    fn plan(&mut self, obs: &Observation) -> Trajectory {
        let mut proposals = generate_proposals(obs, &self.config, &self.metric);
        let best = select_proposal(&proposals).expect("validated grid is non-empty");
        proposals.swap_remove(best).trajectory
    }

    fn clone_box(&self) -> Box<dyn Planner> {
        Box::new(self.clone())
    }
}

pub(super) fn build_pdm_lite(name: &str, params: &serde_json::Value) -> Result<Box<dyn Planner>, PlannerError> {
    let cfg: PdmConfig = parse_params(name, params)?;
    cfg.validate().map_err(|message| PlannerError::Params { name: name.to_string(), message })?;
    Ok(Box::new(PdmLitePlanner::new(name, cfg)))
}
