//! Correlation statistics and the open-loop versus closed-loop study.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{compute_cls_with_bound, compute_ols, evaluate_scene_with_bound, MetricConfig, MetricError};
use crate::planners::{pdm_progress_upper_bound, Observation, Planner, PlannerKind};
use crate::scene::Scene;
use crate::sim::{run_closed_loop, BackgroundMode, ClosedLoopConfig, SimError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite sample")]
    NonFinite,
    #[error("zero variance; correlation undefined")]
    ZeroVariance,
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<(), StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(StatsError::TooFewSamples(xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Product-moment correlation, clamped to [-1, 1] against rounding.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check_pair(xs, ys)?;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check_pair(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<LinearFit, StatsError> {
    check_pair(xs, ys)?;
    let (mx, my) = (mean(xs), mean(ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(LinearFit { slope, intercept: my - slope * mx })
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid study config: {0}")]
    Config(String),
    #[error("need at least 3 planners, got {0}")]
    TooFewPlanners(usize),
    #[error("no scenes")]
    NoScenes,
    #[error("planner {planner} on scene {scene_id}: {message}")]
    Evaluation { planner: String, scene_id: String, message: String },
    #[error("{what}: {source}")]
    Statistics {
        what: String,
        #[source]
        source: StatsError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Closed-loop duration d (s).
    pub duration: f64,
    /// Replanning frequency f (Hz).
    pub frequency: f64,
    /// PDMS and OLS horizon h (s).
    pub horizon: f64,
    pub background: BackgroundMode,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { duration: 15.0, frequency: 10.0, horizon: 4.0, background: BackgroundMode::Replay }
    }
}

impl StudyConfig {
    pub fn closed_loop(&self) -> ClosedLoopConfig {
        ClosedLoopConfig { duration: self.duration, frequency: self.frequency, background: self.background, ..ClosedLoopConfig::default() }
    }

    pub fn metric(&self) -> MetricConfig {
        MetricConfig { horizon: self.horizon, ..MetricConfig::default() }
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        self.closed_loop().validate().map_err(|e| StudyError::Config(e.to_string()))?;
        self.metric().validate().map_err(|e| StudyError::Config(e.to_string()))
    }
}

/// Per-scene scores of one planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneScores {
    pub ols: f64,
    pub pdms: f64,
    pub cls: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerRecord {
    pub name: String,
    pub kind: PlannerKind,
    pub ols: f64,
    pub pdms: f64,
    pub cls: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub pearson: f64,
    pub spearman: f64,
}

impl Coefficients {
    pub fn between(xs: &[f64], ys: &[f64]) -> Result<Self, StatsError> {
        Ok(Self { pearson: pearson(xs, ys)?, spearman: spearman(xs, ys)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallCorrelation {
    pub ols_cls: Coefficients,
    pub pdms_cls: Coefficients,
    pub ols_trend: LinearFit,
    pub pdms_trend: LinearFit,
}

/// Correlation within one planner type over pooled (planner, scene) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeCorrelation {
    pub kind: PlannerKind,
    pub planners: usize,
    pub samples: usize,
    pub ols_cls: Option<Coefficients>,
    pub pdms_cls: Option<Coefficients>,
    /// Why a coefficient is missing.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub config: StudyConfig,
    pub scene_count: usize,
    pub records: Vec<PlannerRecord>,
    pub overall: OverallCorrelation,
    pub per_type: Vec<TypeCorrelation>,
    /// `scores[p][s]` for planner `p` on scene `s`.
    pub scores: Vec<Vec<SceneScores>>,
}

impl StudyTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("planner,kind,ols,pdms,cls\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{},{}", r.name, r.kind.as_str(), r.ols, r.pdms, r.cls);
        }
        out
    }
}

/// Progress upper bounds shared by every planner on a scene.
#[derive(Debug, Clone, Copy)]
struct SceneBounds {
    open_loop: f64,
    closed_loop: f64,
}

fn evaluate_pair(
    scene: &Scene,
    bounds: SceneBounds,
    mut open_loop: Box<dyn Planner>,
    mut closed_loop: Box<dyn Planner>,
    cfg: &StudyConfig,
) -> Result<SceneScores, StudyError> {
    let name = open_loop.name().to_string();
    let fail = |message: String| StudyError::Evaluation { planner: name.clone(), scene_id: scene.scene_id.clone(), message };
    let metric = cfg.metric();
    let plan = open_loop.plan(&Observation::initial(scene, cfg.horizon));
    let pdms = evaluate_scene_with_bound(scene, &plan, &metric, bounds.open_loop).map_err(|e: MetricError| fail(e.to_string()))?.pdms;
    let ols = compute_ols(&plan, &scene.human_trajectory_for(cfg.horizon), &metric).map_err(|e| fail(e.to_string()))?;
    let log = run_closed_loop(scene, closed_loop.as_mut(), &cfg.closed_loop()).map_err(|e: SimError| fail(e.to_string()))?;
    let cls = compute_cls_with_bound(&log, scene, &metric, bounds.closed_loop);
    Ok(SceneScores { ols, pdms, cls })
}

fn stat<T>(what: impl Into<String>, r: Result<T, StatsError>) -> Result<T, StudyError> {
    r.map_err(|source| StudyError::Statistics { what: what.into(), source })
}

/// Scores every planner on every scene, open-loop and closed-loop, and
/// correlates per-planner means. Runs on the current rayon pool.
pub fn correlation_study(scenes: &[Scene], population: &[Box<dyn Planner>], cfg: &StudyConfig) -> Result<StudyTable, StudyError> {
    cfg.validate()?;
    if population.len() < 3 {
        return Err(StudyError::TooFewPlanners(population.len()));
    }
    if scenes.is_empty() {
        return Err(StudyError::NoScenes);
    }
    let bounds: Vec<SceneBounds> = scenes
        .par_iter()
        .map(|s| SceneBounds {
            open_loop: pdm_progress_upper_bound(s, cfg.horizon),
            closed_loop: pdm_progress_upper_bound(s, cfg.duration),
        })
        .collect();
    let tasks: Vec<(usize, Box<dyn Planner>, Box<dyn Planner>)> = population
        .iter()
        .flat_map(|p| (0..scenes.len()).map(move |s| (s, p.clone_box(), p.clone_box())))
        .collect();
    let flat = tasks
        .into_par_iter()
        .map(|(s, ol, cl)| evaluate_pair(&scenes[s], bounds[s], ol, cl, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let scores: Vec<Vec<SceneScores>> = flat.chunks(scenes.len()).map(<[SceneScores]>::to_vec).collect();

    let n = scenes.len() as f64;
    let records: Vec<PlannerRecord> = population
        .iter()
        .zip(&scores)
        .map(|(p, row)| PlannerRecord {
            name: p.name().to_string(),
            kind: p.kind(),
            ols: row.iter().map(|s| s.ols).sum::<f64>() / n,
            pdms: row.iter().map(|s| s.pdms).sum::<f64>() / n,
            cls: row.iter().map(|s| s.cls).sum::<f64>() / n,
        })
        .collect();
    let ols: Vec<f64> = records.iter().map(|r| r.ols).collect();
    let pdms: Vec<f64> = records.iter().map(|r| r.pdms).collect();
    let cls: Vec<f64> = records.iter().map(|r| r.cls).collect();
    let overall = OverallCorrelation {
        ols_cls: stat("ols vs cls", Coefficients::between(&ols, &cls))?,
        pdms_cls: stat("pdms vs cls", Coefficients::between(&pdms, &cls))?,
        ols_trend: stat("ols trend", least_squares(&ols, &cls))?,
        pdms_trend: stat("pdms trend", least_squares(&pdms, &cls))?,
    };

    let per_type = PlannerKind::ALL
        .iter()
        .filter_map(|&kind| {
            let members: Vec<usize> = (0..population.len()).filter(|&i| population[i].kind() == kind).collect();
            if members.is_empty() {
                return None;
            }
            let pooled: Vec<SceneScores> = members.iter().flat_map(|&i| scores[i].iter().copied()).collect();
            let o: Vec<f64> = pooled.iter().map(|s| s.ols).collect();
            let p: Vec<f64> = pooled.iter().map(|s| s.pdms).collect();
            let c: Vec<f64> = pooled.iter().map(|s| s.cls).collect();
            let ols_cls = Coefficients::between(&o, &c);
            let pdms_cls = Coefficients::between(&p, &c);
            let note = match (&ols_cls, &pdms_cls) {
                (Err(e), _) => Some(format!("ols: {e}")),
                (_, Err(e)) => Some(format!("pdms: {e}")),
                _ => None,
            };
            Some(TypeCorrelation { kind, planners: members.len(), samples: pooled.len(), ols_cls: ols_cls.ok(), pdms_cls: pdms_cls.ok(), note })
        })
        .collect();

    Ok(StudyTable { config: *cfg, scene_count: scenes.len(), records, overall, per_type, scores })
}
