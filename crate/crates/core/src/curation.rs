//! Removal of trivial and noisy scenes from a generated corpus.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{evaluate_scene_with_bound, MetricConfig, MetricError};
use crate::planners::{pdm_progress_upper_bound, ConstantVelocityPlanner, Observation, Planner, SpeedSource};
use crate::scene::Scene;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("no scenes to filter")]
    Empty,
    #[error("threshold {name} must be finite, got {value}")]
    Threshold { name: &'static str, value: f64 },
    #[error("scene {scene_id}: {source}")]
    Metric {
        scene_id: String,
        #[source]
        source: MetricError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Scenes where constant velocity scores above this are trivial.
    pub cv_threshold: f64,
    /// Scenes where the human scores below this are noisy.
    pub human_threshold: f64,
    pub metric: MetricConfig,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { cv_threshold: 0.8, human_threshold: 0.8, metric: MetricConfig::default() }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        for (name, value) in [("cv_threshold", self.cv_threshold), ("human_threshold", self.human_threshold)] {
            if !value.is_finite() {
                return Err(CurationError::Threshold { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    Trivial,
    Noisy,
    None,
}

impl RemovalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Trivial => "trivial",
            Self::Noisy => "noisy",
            Self::None => "none",
        }
    }
}

/// Trivial is checked first; both comparisons are strict.
pub fn classify(cv_pdms: f64, human_pdms: f64, cv_threshold: f64, human_threshold: f64) -> RemovalReason {
    if cv_pdms > cv_threshold {
        RemovalReason::Trivial
    } else if human_pdms < human_threshold {
        RemovalReason::Noisy
    } else {
        RemovalReason::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFilterRow {
    pub scene_id: String,
    pub cv_pdms: f64,
    pub human_pdms: f64,
    pub kept: bool,
    pub removal_reason: RemovalReason,
    /// Human endpoint in the initial ego frame (m).
    pub endpoint_longitudinal: f64,
    pub endpoint_lateral: f64,
}

/// Fixed-width histogram; values outside the range land in the edge bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lower: f64,
    pub bin_width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(lower: f64, bin_width: f64, bins: usize) -> Self {
        Self { lower, bin_width, counts: vec![0; bins] }
    }

    pub fn add(&mut self, x: f64) {
        let n = self.counts.len();
        let i = ((x - self.lower) / self.bin_width).floor();
        let i = if i.is_nan() || i < 0.0 { 0 } else { (i as usize).min(n - 1) };
        self.counts[i] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointDistribution {
    pub longitudinal: Histogram,
    pub lateral: Histogram,
}

impl EndpointDistribution {
    fn from_rows<'a>(rows: impl Iterator<Item = &'a SceneFilterRow>) -> Self {
        let mut longitudinal = Histogram::new(0.0, 5.0, 16);
        let mut lateral = Histogram::new(-10.0, 1.0, 20);
        for r in rows {
            longitudinal.add(r.endpoint_longitudinal);
            lateral.add(r.endpoint_lateral);
        }
        Self { longitudinal, lateral }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub total: usize,
    pub kept: usize,
    pub trivial: usize,
    pub noisy: usize,
    pub mean_cv_pdms_before: f64,
    pub mean_human_pdms_before: f64,
    /// `None` when nothing was kept.
    pub mean_cv_pdms_after: Option<f64>,
    pub mean_human_pdms_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub cv_threshold: f64,
    pub human_threshold: f64,
    /// Ordered by scene id.
    pub rows: Vec<SceneFilterRow>,
    pub summary: FilterSummary,
    pub endpoints_before: EndpointDistribution,
    pub endpoints_after: EndpointDistribution,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl FilterReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scene_id,cv_pdms,human_pdms,kept,removal_reason,endpoint_longitudinal,endpoint_lateral\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.scene_id,
                r.cv_pdms,
                r.human_pdms,
                r.kept,
                r.removal_reason.as_str(),
                r.endpoint_longitudinal,
                r.endpoint_lateral
            );
        }
        out
    }

    fn assemble(mut rows: Vec<SceneFilterRow>, cfg: &FilterConfig) -> Self {
        rows.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
        let kept: Vec<&SceneFilterRow> = rows.iter().filter(|r| r.kept).collect();
        let count = |reason| rows.iter().filter(|r| r.removal_reason == reason).count();
        let summary = FilterSummary {
            total: rows.len(),
            kept: kept.len(),
            trivial: count(RemovalReason::Trivial),
            noisy: count(RemovalReason::Noisy),
            mean_cv_pdms_before: mean(rows.iter().map(|r| r.cv_pdms)).unwrap_or(0.0),
            mean_human_pdms_before: mean(rows.iter().map(|r| r.human_pdms)).unwrap_or(0.0),
            mean_cv_pdms_after: mean(kept.iter().map(|r| r.cv_pdms)),
            mean_human_pdms_after: mean(kept.iter().map(|r| r.human_pdms)),
        };
        let endpoints_before = EndpointDistribution::from_rows(rows.iter());
        let endpoints_after = EndpointDistribution::from_rows(kept.into_iter());
        Self { cv_threshold: cfg.cv_threshold, human_threshold: cfg.human_threshold, rows, summary, endpoints_before, endpoints_after }
    }
}

/// PDMS of the constant-velocity probe and of the human trajectory, sharing one upper bound.
pub fn probe_scene(scene: &Scene, metric: &MetricConfig) -> Result<(f64, f64), MetricError> {
    metric.validate()?;
    let bound = pdm_progress_upper_bound(scene, metric.horizon);
    let mut cv = ConstantVelocityPlanner::new("constant_velocity", SpeedSource::Current);
    let cv_traj = cv.plan(&Observation::initial(scene, metric.horizon));
    let cv_pdms = evaluate_scene_with_bound(scene, &cv_traj, metric, bound)?.pdms;
    let human = scene.human_trajectory_for(metric.horizon);
    let human_pdms = evaluate_scene_with_bound(scene, &human, metric, bound)?.pdms;
    Ok((cv_pdms, human_pdms))
}

fn endpoint(scene: &Scene) -> (f64, f64) {
    let traj = &scene.human_trajectory;
    let end = traj.poses.last().copied().unwrap_or(traj.origin);
    let local = scene.ego_init.pose.to_local(end.position());
    (local.x, local.y)
}

/// Filters with precomputed `(cv_pdms, human_pdms)` per scene.
pub fn filter_with_scores(scenes: &[Scene], scores: &[(f64, f64)], cfg: &FilterConfig) -> Result<(Vec<Scene>, FilterReport), CurationError> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(CurationError::Empty);
    }
    assert_eq!(scenes.len(), scores.len(), "one score pair per scene");
    let mut kept = Vec::new();
    let mut rows = Vec::with_capacity(scenes.len());
    for (scene, &(cv_pdms, human_pdms)) in scenes.iter().zip(scores) {
        let removal_reason = classify(cv_pdms, human_pdms, cfg.cv_threshold, cfg.human_threshold);
        let is_kept = removal_reason == RemovalReason::None;
        if is_kept {
            kept.push(scene.clone());
        }
        let (lon, lat) = endpoint(scene);
        rows.push(SceneFilterRow {
            scene_id: scene.scene_id.clone(),
            cv_pdms,
            human_pdms,
            kept: is_kept,
            removal_reason,
            endpoint_longitudinal: lon,
            endpoint_lateral: lat,
        });
    }
    Ok((kept, FilterReport::assemble(rows, cfg)))
}

/// Kept scenes in input order and the report. Probes run in parallel on the current rayon pool.
pub fn filter_scenes(scenes: &[Scene], cfg: &FilterConfig) -> Result<(Vec<Scene>, FilterReport), CurationError> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(CurationError::Empty);
    }
    let scores = scenes
        .par_iter()
        .map(|s| probe_scene(s, &cfg.metric).map_err(|source| CurationError::Metric { scene_id: s.scene_id.clone(), source }))
        .collect::<Result<Vec<_>, _>>()?;
    filter_with_scores(scenes, &scores, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_examples() {
        assert_eq!(classify(0.9, 1.0, 0.8, 0.8), RemovalReason::Trivial);
        assert_eq!(classify(0.3, 0.7, 0.8, 0.8), RemovalReason::Noisy);
        assert_eq!(classify(0.3, 0.95, 0.8, 0.8), RemovalReason::None);
    }

    #[test]
    fn thresholds_are_strict() {
        assert_eq!(classify(0.8, 0.8, 0.8, 0.8), RemovalReason::None);
        assert_eq!(classify(0.9, 0.1, 0.8, 0.8), RemovalReason::Trivial);
    }

    #[test]
    fn histogram_clamps_to_edges() {
        let mut h = Histogram::new(0.0, 1.0, 3);
        for x in [-5.0, 0.5, 1.0, 2.9, 40.0] {
            h.add(x);
        }
        assert_eq!(h.counts, vec![2, 1, 2]);
        assert_eq!(h.total(), 5);
    }

    #[test]
    fn rejects_non_finite_threshold() {
        let cfg = FilterConfig { cv_threshold: f64::NAN, ..FilterConfig::default() };
        assert!(matches!(cfg.validate(), Err(CurationError::Threshold { .. })));
    }
}
