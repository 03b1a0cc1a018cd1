use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use navcore::analysis::{correlation_study, StudyConfig, StudyError};
use navcore::bench::{run_bench, BenchError};
use navcore::curation::{filter_scenes, CurationError, FilterConfig};
use navcore::metrics::{compute_cls, compute_ols, evaluate_scene_with_bound, MetricConfig, MetricRow};
use navcore::planners::{
    default_population, load_population, pdm_progress_upper_bound, Observation, Planner, PlannerRegistry,
};
use navcore::scene::{generate_scenarios, scene_to_json, Archetype, GeneratorConfig, Scene, Trajectory};
use navcore::sim::{rollout_nonreactive, run_closed_loop, ClosedLoopConfig, SimulationLog};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{data, internal, usage, CliError};
use crate::io::{absolute, load_scene_set, manifest_beside, Run, SplitManifest, MANIFEST_FILE, SPLIT_FILE};
use crate::svg;
use crate::{BenchArgs, CorrelateArgs, EvaluateArgs, FilterArgs, GenerateArgs, JobsArg, RenderArgs, RolloutArgs, RolloutMode};

pub const SEED_ENV: &str = "NAVCORE_SEED";

fn effective_seed(flag: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

fn resolve_jobs(arg: &JobsArg) -> Result<usize, CliError> {
    match arg.jobs {
        Some(0) => Err(usage("--jobs must be at least 1")),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(internal)?;
    Ok(pool.install(f))
}

fn load_metric_config(run: &mut Run, path: Option<&Path>) -> Result<MetricConfig, CliError> {
    let cfg = match path {
        Some(p) => run.read_json::<MetricConfig>(p)?,
        None => MetricConfig::default(),
    };
    cfg.validate().map_err(data)?;
    Ok(cfg)
}

fn parse_archetypes(spec: &str) -> Result<BTreeMap<Archetype, f64>, CliError> {
    let mut weights = BTreeMap::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, w) = part.split_once('=').ok_or_else(|| usage(format!("archetype weight '{part}' is not name=weight")))?;
        let archetype: Archetype = name.trim().parse().map_err(usage)?;
        let w: f64 = w.trim().parse().map_err(|_| usage(format!("weight '{w}' for {name} is not a number")))?;
        if weights.insert(archetype, w).is_some() {
            return Err(usage(format!("archetype {name} given twice")));
        }
    }
    if weights.is_empty() {
        return Err(usage("--archetypes names no archetype"));
    }
    Ok(weights)
}

pub fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let seed = effective_seed(args.seed)?;
    let weights = match &args.archetypes {
        Some(spec) => parse_archetypes(spec)?,
        None => GeneratorConfig::uniform(args.count).weights,
    };
    let config = GeneratorConfig { count: args.count, weights };
    config.validate().map_err(usage)?;
    let mut run = Run::new("generate", json!({ "count": args.count, "seed": seed, "weights": &config.weights, "out_dir": &args.out_dir }));
    let scenes = generate_scenarios(&config, seed).map_err(internal)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| data(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let mut names = Vec::with_capacity(scenes.len());
    for scene in &scenes {
        let name = format!("{}.json", scene.scene_id);
        run.output(args.out_dir.join(&name), scene_to_json(scene));
        names.push(name);
    }
    run.output_json(args.out_dir.join(SPLIT_FILE), &SplitManifest { scenes: names });
    run.finish(&args.out_dir.join(MANIFEST_FILE))?;
    println!("generated {} scenes in {}", scenes.len(), args.out_dir.display());
    Ok(())
}

/// Where plans come from during `evaluate`.
enum PlanSource {
    Planner(Box<dyn Planner>),
    Trajectories(BTreeMap<String, Trajectory>),
}

impl PlanSource {
    fn label(&self, arg: &str) -> String {
        match self {
            Self::Planner(p) => p.name().to_string(),
            Self::Trajectories(_) => arg.to_string(),
        }
    }
}

/// A registry key with default parameters, or a named entry of the default population.
fn resolve_planner(name: &str) -> Result<Box<dyn Planner>, CliError> {
    let registry = PlannerRegistry::with_builtins();
    if registry.contains(name) {
        return registry.build_default(name).map_err(internal);
    }
    let population = default_population();
    match population.planners.iter().find(|s| s.name == name) {
        Some(spec) => registry.build(spec).map_err(internal),
        None => {
            let keys: Vec<&str> = registry.keys().collect();
            Err(usage(format!("unknown planner '{name}' (registry keys: {}; or a default population name)", keys.join(", "))))
        }
    }
}

fn looks_like_file(arg: &str) -> bool {
    Path::new(arg).is_file() || arg.ends_with(".json")
}

#[derive(Debug, Serialize)]
struct Aggregate {
    nc: f64,
    dac: f64,
    ep: f64,
    ttc: f64,
    comfort: f64,
    pdms: f64,
    ols: Option<f64>,
    cls: Option<f64>,
}

#[derive(Debug, Serialize)]
struct EvaluationReport {
    planner: String,
    horizon: f64,
    scene_count: usize,
    rows: Vec<MetricRow>,
    mean: Aggregate,
}

fn mean_of(rows: &[MetricRow], f: impl Fn(&MetricRow) -> f64) -> f64 {
    rows.iter().map(f).sum::<f64>() / rows.len() as f64
}

fn mean_opt(rows: &[MetricRow], f: impl Fn(&MetricRow) -> Option<f64>) -> Option<f64> {
    let xs: Option<Vec<f64>> = rows.iter().map(f).collect();
    xs.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

fn rows_csv(rows: &[MetricRow]) -> String {
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let mut out = String::from("scene_id,nc,dac,ep,ttc,comfort,pdms,ols,cls\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{},{},{},{}", r.scene_id, r.nc, r.dac, r.ep, r.ttc, r.comfort, r.pdms, opt(r.ols), opt(r.cls));
    }
    out
}

fn evaluate_one(scene: &Scene, source: &PlanSource, metric: &MetricConfig, closed_loop: bool) -> Result<MetricRow, CliError> {
    let h = metric.horizon;
    let fail = |e: &dyn std::fmt::Display| data(format!("scene {}: {e}", scene.scene_id));
    let plan = match source {
        PlanSource::Planner(p) => p.clone_box().plan(&Observation::initial(scene, h)),
        PlanSource::Trajectories(map) => map.get(&scene.scene_id).expect("checked before evaluation").truncated(h),
    };
    let bound = pdm_progress_upper_bound(scene, h);
    let score = evaluate_scene_with_bound(scene, &plan, metric, bound).map_err(|e| fail(&e))?;
    let ols = compute_ols(&plan, &scene.human_trajectory_for(h), metric).map_err(|e| fail(&e))?;
    let cls = match (source, closed_loop) {
        (PlanSource::Planner(p), true) => {
            let mut planner = p.clone_box();
            let log = run_closed_loop(scene, planner.as_mut(), &ClosedLoopConfig::default()).map_err(|e| fail(&e))?;
            Some(compute_cls(&log, scene, metric))
        }
        _ => None,
    };
    Ok(MetricRow::new(&scene.scene_id, &score, Some(ols), cls))
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let jobs = resolve_jobs(&args.jobs)?;
    let mut run = Run::new(
        "evaluate",
        json!({
            "scenes": &args.scenes, "planner": &args.planner, "metric_config": &args.metric_config,
            "closed_loop": args.closed_loop, "out": &args.out, "jobs": jobs,
        }),
    );
    let metric = load_metric_config(&mut run, args.metric_config.as_deref())?;
    let set = load_scene_set(&mut run, &args.scenes)?;
    let source = if looks_like_file(&args.planner) {
        let path = PathBuf::from(&args.planner);
        let map: BTreeMap<String, Trajectory> = run.read_json(&path)?;
        for (id, traj) in &map {
            traj.validate().map_err(|e| data(format!("trajectory for scene '{id}' in {}: {e}", path.display())))?;
        }
        if let Some(missing) = set.scenes.iter().find(|s| !map.contains_key(&s.scene_id)) {
            return Err(data(format!("no trajectory for scene '{}' in {}", missing.scene_id, path.display())));
        }
        if args.closed_loop {
            return Err(usage("--closed-loop needs a planner, not a trajectory file"));
        }
        PlanSource::Trajectories(map)
    } else {
        PlanSource::Planner(resolve_planner(&args.planner)?)
    };
    let rows = with_pool(jobs, || {
        set.scenes.par_iter().map(|s| evaluate_one(s, &source, &metric, args.closed_loop)).collect::<Result<Vec<_>, _>>()
    })??;
    let report = EvaluationReport {
        planner: source.label(&args.planner),
        horizon: metric.horizon,
        scene_count: rows.len(),
        mean: Aggregate {
            nc: mean_of(&rows, |r| r.nc),
            dac: mean_of(&rows, |r| r.dac),
            ep: mean_of(&rows, |r| r.ep),
            ttc: mean_of(&rows, |r| r.ttc),
            comfort: mean_of(&rows, |r| r.comfort),
            pdms: mean_of(&rows, |r| r.pdms),
            ols: mean_opt(&rows, |r| r.ols),
            cls: mean_opt(&rows, |r| r.cls),
        },
        rows,
    };
    run.output_json(&args.out, &report);
    run.output(args.out.with_extension("csv"), rows_csv(&report.rows));
    run.finish(&manifest_beside(&args.out))?;
    println!("{}: {} scenes, mean pdms {:.4}", report.planner, report.scene_count, report.mean.pdms);
    Ok(())
}

pub fn filter(args: FilterArgs) -> Result<(), CliError> {
    let jobs = resolve_jobs(&args.jobs)?;
    let mut run = Run::new(
        "filter",
        json!({
            "scenes": &args.scenes, "cv_threshold": args.cv_threshold, "human_threshold": args.human_threshold,
            "metric_config": &args.metric_config, "out": &args.out, "jobs": jobs,
        }),
    );
    let metric = load_metric_config(&mut run, args.metric_config.as_deref())?;
    let cfg = FilterConfig { cv_threshold: args.cv_threshold, human_threshold: args.human_threshold, metric };
    cfg.validate().map_err(usage)?;
    let set = load_scene_set(&mut run, &args.scenes)?;
    let (kept, report) = with_pool(jobs, || filter_scenes(&set.scenes, &cfg))?.map_err(|e| match e {
        CurationError::Empty => data(e),
        CurationError::Threshold { .. } => usage(e),
        CurationError::Metric { .. } => data(e),
    })?;
    let kept_paths = kept
        .iter()
        .map(|s| set.path_of(&s.scene_id).map(|p| absolute(p).display().to_string()).ok_or_else(|| internal("kept scene has no source file")))
        .collect::<Result<Vec<_>, _>>()?;
    run.output_json(args.out.join("filter_report.json"), &report);
    run.output(args.out.join("filter_report.csv"), report.to_csv());
    run.output_json(args.out.join("kept.json"), &SplitManifest { scenes: kept_paths });
    run.finish(&args.out.join(MANIFEST_FILE))?;
    let s = &report.summary;
    println!("kept {} of {} scenes ({} trivial, {} noisy)", s.kept, s.total, s.trivial, s.noisy);
    Ok(())
}

fn study_error(e: StudyError) -> CliError {
    match e {
        StudyError::Config(_) => usage(e),
        StudyError::TooFewPlanners(_) | StudyError::NoScenes => data(e),
        StudyError::Evaluation { .. } => data(e),
        StudyError::Statistics { .. } => data(e),
    }
}

pub fn correlate(args: CorrelateArgs) -> Result<(), CliError> {
    let jobs = resolve_jobs(&args.jobs)?;
    let cfg = StudyConfig { duration: args.duration, frequency: args.frequency, horizon: args.horizon, background: args.background };
    cfg.validate().map_err(study_error)?;
    let mut run = Run::new(
        "correlate",
        json!({ "scenes": &args.scenes, "population": &args.population, "study": cfg, "out": &args.out, "jobs": jobs }),
    );
    let population = match &args.population {
        Some(p) => {
            run.read(p)?;
            load_population(p).map_err(data)?
        }
        None => default_population(),
    };
    let planners = PlannerRegistry::with_builtins().build_population(&population).map_err(data)?;
    let set = load_scene_set(&mut run, &args.scenes)?;
    let table = with_pool(jobs, || correlation_study(&set.scenes, &planners, &cfg))?.map_err(study_error)?;
    run.output_json(args.out.join("study.json"), &table);
    run.output(args.out.join("study.csv"), table.to_csv());
    run.output(args.out.join("scatter.svg"), svg::render_scatter(&table));
    run.finish(&args.out.join(MANIFEST_FILE))?;
    let o = &table.overall;
    println!(
        "{} planners x {} scenes: pdms-cls pearson {:.3} spearman {:.3}; ols-cls pearson {:.3} spearman {:.3}",
        table.records.len(),
        table.scene_count,
        o.pdms_cls.pearson,
        o.pdms_cls.spearman,
        o.ols_cls.pearson,
        o.ols_cls.spearman
    );
    Ok(())
}

fn load_one_scene(run: &mut Run, path: &Path) -> Result<Scene, CliError> {
    let text = run.read(path)?;
    navcore::scene::scene_from_json(&text).map_err(|e| data(format!("{}: {e}", path.display())))
}

pub fn render(args: RenderArgs) -> Result<(), CliError> {
    let mut run = Run::new("render", json!({ "scene": &args.scene, "log": &args.log, "ticks": &args.ticks, "out": &args.out }));
    let scene = load_one_scene(&mut run, &args.scene)?;
    let svg = match &args.log {
        None => {
            if args.ticks.is_some() {
                return Err(usage("--ticks needs --log"));
            }
            svg::render_scene(&scene, None)
        }
        Some(path) => {
            let log: SimulationLog = run.read_json(path)?;
            check_log(&scene, &log)?;
            let n = log.tick_count();
            let ticks = match &args.ticks {
                Some(t) => t.clone(),
                None => {
                    let mut t = vec![0, n / 2, n - 1];
                    t.dedup();
                    t
                }
            };
            if let Some(bad) = ticks.iter().find(|&&t| t >= n) {
                return Err(data(format!("tick {bad} is beyond the log (last tick {})", n - 1)));
            }
            svg::render_scene(&scene, Some((&log, &ticks)))
        }
    };
    run.output(&args.out, svg);
    run.finish(&manifest_beside(&args.out))
}

fn check_log(scene: &Scene, log: &SimulationLog) -> Result<(), CliError> {
    if log.scene_id != scene.scene_id {
        return Err(data(format!("log is for scene '{}', not '{}'", log.scene_id, scene.scene_id)));
    }
    log.validate().map_err(data)?;
    let ids: HashMap<&str, usize> = scene.agent_tracks.iter().enumerate().map(|(i, t)| (t.agent_id.as_str(), i)).collect();
    if log.agent_ids.len() != scene.agent_tracks.len() || log.agent_ids.iter().any(|id| !ids.contains_key(id.as_str())) {
        return Err(data(format!("log agents do not match the agents of scene '{}'", scene.scene_id)));
    }
    if log.agent_states.iter().flatten().any(|a| a.agent >= scene.agent_tracks.len()) {
        return Err(data("log references an agent index outside the scene"));
    }
    Ok(())
}

pub fn rollout(args: RolloutArgs) -> Result<(), CliError> {
    let cl = ClosedLoopConfig { duration: args.duration, frequency: args.frequency, background: args.background, plan_horizon: args.horizon };
    let mut run = Run::new("rollout", json!({ "scene": &args.scene, "planner": &args.planner, "mode": args.mode, "closed_loop": cl, "out": &args.out }));
    let scene = load_one_scene(&mut run, &args.scene)?;
    let mut planner = resolve_planner(&args.planner)?;
    let log = match args.mode {
        RolloutMode::Open => {
            MetricConfig { horizon: args.horizon, ..MetricConfig::default() }.validate().map_err(usage)?;
            let plan = planner.plan(&Observation::initial(&scene, args.horizon));
            rollout_nonreactive(&scene, &plan, args.horizon).map_err(data)?
        }
        RolloutMode::Closed => {
            cl.validate().map_err(usage)?;
            run_closed_loop(&scene, planner.as_mut(), &cl).map_err(data)?
        }
    };
    run.output_json(&args.out, &log);
    run.finish(&manifest_beside(&args.out))?;
    println!("wrote {} ticks for scene {}", log.tick_count(), scene.scene_id);
    Ok(())
}

pub fn bench(args: BenchArgs) -> Result<(), CliError> {
    let jobs = resolve_jobs(&args.jobs)?;
    let seed = effective_seed(args.seed)?;
    let mut run = Run::new(
        "bench",
        json!({
            "scenes": &args.scenes, "count": args.count, "seed": seed, "planner": &args.planner,
            "metric_config": &args.metric_config, "jobs": jobs, "out": &args.out,
        }),
    );
    let metric = load_metric_config(&mut run, args.metric_config.as_deref())?;
    let scenes = match &args.scenes {
        Some(p) => load_scene_set(&mut run, p)?.scenes,
        None => {
            let config = GeneratorConfig::uniform(args.count);
            config.validate().map_err(usage)?;
            generate_scenarios(&config, seed).map_err(internal)?
        }
    };
    let planner = resolve_planner(&args.planner)?;
    let result = run_bench(&scenes, planner.as_ref(), jobs, &metric).map_err(|e| match e {
        BenchError::TooFewScenes(_) => data(e),
        BenchError::Jobs => usage(e),
        BenchError::Metric { .. } => data(e),
        BenchError::Pool(_) | BenchError::Mismatch(_) => internal(e),
    })?;
    run.output_json(&args.out, &result);
    run.finish(&manifest_beside(&args.out))?;
    println!(
        "{} scenes: {:.1} scenes/s serial, {:.1} scenes/s with {} jobs, bit-identical",
        result.scenes, result.serial_scenes_per_second, result.parallel_scenes_per_second, result.jobs
    );
    Ok(())
}
