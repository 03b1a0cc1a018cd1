//! Throughput and determinism of batch scene evaluation.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{
    evaluate_scene_with_bound, score_comfort, score_drivable_area_compliance, score_ego_progress, score_no_at_fault_collision,
    score_time_to_collision, MetricConfig, MetricError, MetricRow,
};
use crate::planners::{pdm_progress_upper_bound, Observation, Planner};
use crate::scene::Scene;
use crate::sim::rollout_nonreactive;

/// Smallest corpus a benchmark is reported over.
pub const MIN_BENCH_SCENES: usize = 500;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("benchmark needs at least {MIN_BENCH_SCENES} scenes, got {0}")]
    TooFewScenes(usize),
    #[error("jobs must be at least 1")]
    Jobs,
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("scene {scene_id}: {source}")]
    Metric {
        scene_id: String,
        #[source]
        source: MetricError,
    },
    #[error("serial and parallel reports differ at scene {0}")]
    Mismatch(String),
}

/// Plans with a fresh clone of `planner` on every scene and scores the plan.
/// Runs on the current rayon pool; row order follows `scenes`.
pub fn evaluate_corpus(scenes: &[Scene], planner: &dyn Planner, cfg: &MetricConfig) -> Result<Vec<MetricRow>, BenchError> {
    let planners: Vec<Box<dyn Planner>> = scenes.iter().map(|_| planner.clone_box()).collect();
    scenes
        .par_iter()
        .zip(planners)
        .map(|(scene, mut p)| {
            let traj = p.plan(&Observation::initial(scene, cfg.horizon));
            let bound = pdm_progress_upper_bound(scene, cfg.horizon);
            evaluate_scene_with_bound(scene, &traj, cfg, bound)
                .map(|score| MetricRow::new(&scene.scene_id, &score, None, None))
                .map_err(|source| BenchError::Metric { scene_id: scene.scene_id.clone(), source })
        })
        .collect()
}

fn rows_bit_identical(a: &MetricRow, b: &MetricRow) -> bool {
    let bits = |r: &MetricRow| [r.nc, r.dac, r.ep, r.ttc, r.comfort, r.pdms].map(f64::to_bits);
    a.scene_id == b.scene_id && bits(a) == bits(b) && a.ols.map(f64::to_bits) == b.ols.map(f64::to_bits) && a.cls.map(f64::to_bits) == b.cls.map(f64::to_bits)
}

/// Fraction of serial evaluation time spent in each stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct StageShare {
    pub upper_bound: f64,
    pub rollout: f64,
    pub nc: f64,
    pub dac: f64,
    pub ep: f64,
    pub ttc: f64,
    pub comfort: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub scenes: usize,
    pub jobs: usize,
    pub serial_seconds: f64,
    pub parallel_seconds: f64,
    pub serial_scenes_per_second: f64,
    pub parallel_scenes_per_second: f64,
    pub bit_identical: bool,
    /// Peak resident set size in KiB, where the platform reports it.
    pub peak_rss_kib: Option<u64>,
    pub stage_share: StageShare,
}

/// Peak resident memory from `/proc/self/status`.
pub fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn timed<T>(acc: &mut Duration, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    *acc += t.elapsed();
    out
}

fn stage_share(scenes: &[Scene], planner: &dyn Planner, cfg: &MetricConfig) -> Result<StageShare, BenchError> {
    let mut d = [Duration::ZERO; 7];
    for scene in scenes {
        let traj = planner.clone_box().plan(&Observation::initial(scene, cfg.horizon));
        let bound = timed(&mut d[0], || pdm_progress_upper_bound(scene, cfg.horizon));
        let log = timed(&mut d[1], || rollout_nonreactive(scene, &traj, cfg.horizon))
            .map_err(|e| BenchError::Metric { scene_id: scene.scene_id.clone(), source: e.into() })?;
        timed(&mut d[2], || score_no_at_fault_collision(&log, cfg));
        timed(&mut d[3], || score_drivable_area_compliance(&log, scene));
        timed(&mut d[4], || score_ego_progress(&log, scene, bound, cfg));
        timed(&mut d[5], || score_time_to_collision(&log, cfg));
        timed(&mut d[6], || score_comfort(&log, cfg));
    }
    let total: f64 = d.iter().map(Duration::as_secs_f64).sum::<f64>().max(f64::MIN_POSITIVE);
    let s = d.map(|x| x.as_secs_f64() / total);
    Ok(StageShare { upper_bound: s[0], rollout: s[1], nc: s[2], dac: s[3], ep: s[4], ttc: s[5], comfort: s[6] })
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, BenchError> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| BenchError::Pool(e.to_string()))
}

/// Evaluates the corpus once on one thread and once on `jobs` threads and
/// requires the two reports to match bit for bit.
pub fn run_bench(scenes: &[Scene], planner: &dyn Planner, jobs: usize, cfg: &MetricConfig) -> Result<BenchResult, BenchError> {
    if scenes.len() < MIN_BENCH_SCENES {
        return Err(BenchError::TooFewScenes(scenes.len()));
    }
    if jobs == 0 {
        return Err(BenchError::Jobs);
    }
    let t = Instant::now();
    let serial = pool(1)?.install(|| evaluate_corpus(scenes, planner, cfg))?;
    let serial_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let parallel = pool(jobs)?.install(|| evaluate_corpus(scenes, planner, cfg))?;
    let parallel_seconds = t.elapsed().as_secs_f64();
    if let Some((a, _)) = serial.iter().zip(&parallel).find(|(a, b)| !rows_bit_identical(a, b)) {
        return Err(BenchError::Mismatch(a.scene_id.clone()));
    }
    let stage_share = stage_share(scenes, planner, cfg)?;
    let n = scenes.len() as f64;
    Ok(BenchResult {
        scenes: scenes.len(),
        jobs,
        serial_seconds,
        parallel_seconds,
        serial_scenes_per_second: n / serial_seconds.max(f64::MIN_POSITIVE),
        parallel_scenes_per_second: n / parallel_seconds.max(f64::MIN_POSITIVE),
        bit_identical: true,
        peak_rss_kib: peak_rss_kib(),
        stage_share,
    })
}
