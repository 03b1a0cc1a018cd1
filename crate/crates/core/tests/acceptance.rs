//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::oracles::{box_truth, pdms_definition, pearson_definition, sampled_polyline_distance, sampling_oracle, spearman_definition, BoxTruth};
use common::{snapshot, state, straight_states};
use nalgebra::DMatrix;
use navcore::analysis::{correlation_study, pearson, spearman, StatsError, StudyConfig};
use navcore::bench::evaluate_corpus;
use navcore::curation::{filter_scenes, FilterConfig};
use navcore::dynamics::{bicycle_step, dare_residual, lateral_system, solve_dare, BicycleState, ControlInput, ReferencePath, Tracker, TrackerConfig, VehicleParameters};
use navcore::geom::{normalize_angle, obb_intersects, project_onto_polyline, OrientedBox, Point2, Polyline, Pose2D};
use navcore::metrics::{
    aggregate_pdms, drivable_area_compliance, ego_progress_ratio, no_at_fault_collision, time_to_collision, MetricConfig, SubScores,
};
use navcore::planners::{default_population, Observation, PlannerKind, PlannerRegistry};
use navcore::scene::{generate_scenarios, AgentCategory, GeneratorConfig, Scene, SceneMap, Trajectory};
use navcore::sim::{rollout_nonreactive, BackgroundMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scenes per configuration in the ablation grid.
const GRID_SCENES: usize = 50;
/// Worker threads for the parallel half of the determinism check.
const PARALLEL_JOBS: usize = 4;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn scenes(n: usize, seed: u64) -> Vec<Scene> {
    generate_scenarios(&GeneratorConfig::uniform(n), seed).expect("scene generation")
}

fn pdms_oracle() -> Outcome {
    let mut r = rng(1);
    let cfg = MetricConfig::default();
    let pick = |r: &mut ChaCha8Rng, choices: &[f64]| choices[r.gen_range(0..choices.len())];
    for i in 0..1000 {
        let unit = |r: &mut ChaCha8Rng| if r.gen_bool(0.2) { pick(r, &[0.0, 1.0]) } else { r.gen::<f64>() };
        let sub = SubScores {
            nc: pick(&mut r, &[0.0, 0.5, 1.0]),
            dac: pick(&mut r, &[0.0, 1.0]),
            ep: unit(&mut r),
            ttc: pick(&mut r, &[0.0, 1.0]),
            comfort: pick(&mut r, &[0.0, 1.0]),
        };
        let got = aggregate_pdms(sub, &cfg).pdms;
        let want = pdms_definition(sub.nc, sub.dac, sub.ep, sub.ttc, sub.comfort);
        check(got.to_bits() == want.to_bits(), || format!("tuple {i} {sub:?}: {got} != {want}"))?;
        check(sub.nc * sub.dac != 0.0 || got == 0.0, || format!("tuple {i} {sub:?}: penalty not dominant"))?;
    }
    Ok("1000 tuples bitwise equal".into())
}

fn determinism() -> Outcome {
    let corpus = scenes(100, 2);
    let cfg = MetricConfig::default();
    let planner = PlannerRegistry::with_builtins().build_default("pdm_lite").map_err(|e| e.to_string())?;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        let rows = pool.install(|| evaluate_corpus(&corpus, planner.as_ref(), &cfg)).expect("evaluation");
        serde_json::to_string(&rows).expect("serialize")
    };
    let reports = [run(1), run(1), run(PARALLEL_JOBS), run(PARALLEL_JOBS)];
    check(reports.iter().all(|r| r == &reports[0]), || "reports differ between runs".into())?;
    Ok(format!("100 scenes, jobs 1 and {PARALLEL_JOBS}, {} report bytes identical", reports[0].len()))
}

fn random_box(r: &mut ChaCha8Rng) -> OrientedBox {
    let pose = Pose2D::new(r.gen_range(-6.0..6.0), r.gen_range(-6.0..6.0), normalize_angle(r.gen_range(-PI..PI)));
    OrientedBox::new(pose, r.gen_range(0.1..3.0), r.gen_range(0.1..2.0)).expect("valid box")
}

fn random_polyline(r: &mut ChaCha8Rng) -> Polyline {
    let mut heading: f64 = r.gen_range(-PI..PI);
    let mut p = Point2::new(r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0));
    let mut pts = vec![p];
    for _ in 0..r.gen_range(1..8) {
        heading += r.gen_range(-1.5..1.5);
        let len = r.gen_range(0.5..6.0);
        p = Point2::new(p.x + len * heading.cos(), p.y + len * heading.sin());
        pts.push(p);
    }
    Polyline::new(pts).expect("valid polyline")
}

fn geometry() -> Outcome {
    let mut r = rng(3);
    let mut tangent = 0;
    for i in 0..10_000 {
        let (a, b) = (random_box(&mut r), random_box(&mut r));
        let truth = box_truth(&a, &b, 1e-6);
        if truth == BoxTruth::NearTangent {
            tangent += 1;
            continue;
        }
        let fast = obb_intersects(&a, &b);
        check(fast == sampling_oracle(&a, &b), || format!("pair {i}: sat {fast} disagrees with sampling"))?;
        check(fast == (truth == BoxTruth::Overlap), || format!("pair {i}: sat {fast} disagrees with clipping"))?;
    }
    for i in 0..100 {
        let line = random_polyline(&mut r);
        let q = Point2::new(r.gen_range(-20.0..20.0), r.gen_range(-20.0..20.0));
        let (s, _) = project_onto_polyline(&line, q);
        let reported = line.point_at(s).distance(q);
        let sampled = sampled_polyline_distance(&line, q, 100_000);
        check(reported <= sampled + 1e-9, || format!("polyline {i}: {reported} > sampled {sampled}"))?;
    }
    Ok(format!("10000 box pairs ({tangent} near tangency skipped), 100 projections"))
}

fn circle_error(dt: f64) -> f64 {
    let params = VehicleParameters::default();
    let delta: f64 = 0.2;
    let expected = params.wheelbase / delta.tan();
    let steps = (2.0 * PI * expected / (5.0 * dt)).ceil() as usize;
    let mut s = BicycleState { x: 0.0, y: 0.0, heading: 0.0, velocity: 5.0, steering_angle: delta };
    let mut pts = vec![Point2::new(0.0, 0.0)];
    for _ in 0..steps {
        s = bicycle_step(&s, ControlInput::default(), dt, &params).state;
        pts.push(Point2::new(s.x, s.y));
    }
    let (a, b, c) = (pts[0], pts[steps / 3], pts[2 * steps / 3]);
    let area2 = ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs();
    let radius = a.distance(b) * b.distance(c) * c.distance(a) / (2.0 * area2);
    (radius - expected).abs() / expected
}

fn dynamics() -> Outcome {
    let (coarse, fine) = (circle_error(0.1), circle_error(0.001));
    check(coarse < 0.01, || format!("dt 0.1 radius error {coarse}"))?;
    check(fine < 1e-4, || format!("dt 0.001 radius error {fine}"))?;

    let one = DMatrix::from_element(1, 1, 1.0);
    let golden = solve_dare(&one, &one, &one, &one).map_err(|e| e.to_string())?[(0, 0)];
    check((golden - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-9, || format!("scalar solution {golden}"))?;

    let cfg = TrackerConfig::default();
    let params = VehicleParameters::default();
    let q = DMatrix::from_row_slice(2, 2, &[cfg.lateral_weight, 0.0, 0.0, cfg.heading_weight]);
    let rw = DMatrix::from_element(1, 1, cfg.steering_weight);
    let mut worst: f64 = 0.0;
    for v in 1..=40 {
        let (a, b) = lateral_system(v as f64, 0.1, params.wheelbase);
        let p = solve_dare(&a, &b, &q, &rw).map_err(|e| e.to_string())?;
        worst = worst.max(dare_residual(&p, &a, &b, &q, &rw).map_err(|e| e.to_string())?);
    }
    check(worst < 1e-9, || format!("production residual {worst}"))?;

    let origin = Pose2D::new(0.0, 0.0, 0.0);
    let path = ReferencePath::new(&Trajectory::new(0.0, origin, (1..=16).map(|k| origin.advance(5.0 * k as f64)).collect()));
    let start = BicycleState { x: 0.0, y: 0.5, heading: 0.0, velocity: 10.0, steering_angle: 0.0 };
    let states = Tracker::standard().track(start, &path, 0.0, 30);
    let err = states[30].y.abs();
    check(err < 0.05, || format!("lateral error after 3 s {err}"))?;
    Ok(format!("radius errors {coarse:.2e}/{fine:.2e}, residual {worst:.1e}, lateral error {err:.4} m"))
}

fn subscores() -> Outcome {
    let p = VehicleParameters::default();
    let cfg = MetricConfig::default();
    let frames = |category, hl, hw, speed, pose: &dyn Fn(usize) -> Pose2D| -> Vec<Vec<_>> {
        (0..=40).map(|k| vec![snapshot(0, category, pose(k), hl, hw, speed)]).collect()
    };

    let hit_from_behind = frames(AgentCategory::Vehicle, 2.3, 0.95, 5.0, &|k| Pose2D::new(-15.0 + 0.5 * k as f64, 0.0, 0.0));
    let nc_static_ego = no_at_fault_collision(&straight_states(0.0, 0.0, 40), &hit_from_behind, &p, &cfg);
    check(nc_static_ego == 1.0, || format!("static ego nc {nc_static_ego}"))?;

    let object = frames(AgentCategory::StaticObject, 0.4, 0.4, 0.0, &|_| Pose2D::new(12.0, 0.0, 0.0));
    let nc_object = no_at_fault_collision(&straight_states(0.0, 5.0, 40), &object, &p, &cfg);
    check(nc_object == 0.5, || format!("static object nc {nc_object}"))?;

    let clipped = ego_progress_ratio(12.0, 10.0, &cfg);
    check(clipped == 1.0, || format!("progress clip {clipped}"))?;
    let discarded = ego_progress_ratio(0.0, 4.0, &cfg);
    check(discarded == 1.0, || format!("small upper bound ep {discarded}"))?;

    let map = SceneMap {
        drivable_area: vec![common::rect(-30.0, -5.0, 200.0, 5.0)],
        route_centerline: Polyline::new(vec![Point2::new(0.0, 0.0), Point2::new(200.0, 0.0)]).expect("route"),
        speed_limit: 15.0,
    };
    let mut breach = straight_states(0.0, 10.0, 40);
    breach[17].y = 5.0 - p.half_width() + 0.2;
    let dac = drivable_area_compliance(&breach, &map, &p);
    check(dac == 0.0, || format!("corner breach dac {dac}"))?;

    // Oncoming car, 5 m bumper gap closing at 10 m/s: contact in 0.5 s.
    let gap = 5.0;
    let oncoming_x = p.half_length() + gap + 2.3;
    let agents = vec![vec![snapshot(0, AgentCategory::Vehicle, Pose2D::new(oncoming_x, 0.0, PI), 2.3, 0.95, 5.0)]];
    let ttc = time_to_collision(&[state(0.0, 0.0, 0.0, 5.0)], &agents, &p, &cfg);
    check(ttc == 0.0, || format!("head-on ttc {ttc}"))?;
    Ok("six behavioural examples reproduced".into())
}

fn filtering() -> Outcome {
    let corpus = scenes(500, 6);
    let cfg = FilterConfig::default();
    let (kept, report) = filter_scenes(&corpus, &cfg).map_err(|e| e.to_string())?;
    for row in report.rows.iter().filter(|r| r.kept) {
        check(row.cv_pdms <= cfg.cv_threshold && row.human_pdms >= cfg.human_threshold, || format!("kept row violates thresholds: {row:?}"))?;
    }
    let (again, _) = filter_scenes(&kept, &cfg).map_err(|e| e.to_string())?;
    check(again == kept, || format!("second pass kept {} of {}", again.len(), kept.len()))?;
    let s = &report.summary;
    if s.trivial > 0 {
        let after = s.mean_cv_pdms_after.ok_or("no scenes kept")?;
        check(after < s.mean_cv_pdms_before, || format!("mean cv pdms {:.3} -> {after:.3}", s.mean_cv_pdms_before))?;
    }
    Ok(format!(
        "kept {} of {} (trivial {}, noisy {}); mean cv pdms {:.3} -> {:.3}",
        s.kept,
        s.total,
        s.trivial,
        s.noisy,
        s.mean_cv_pdms_before,
        s.mean_cv_pdms_after.unwrap_or(f64::NAN)
    ))
}

fn default_planners() -> Vec<Box<dyn navcore::planners::Planner>> {
    PlannerRegistry::with_builtins().build_population(&default_population()).expect("default population")
}

fn correlation() -> Outcome {
    let table = correlation_study(&scenes(100, 7), &default_planners(), &StudyConfig::default()).map_err(|e| e.to_string())?;
    let o = &table.overall;
    check(o.pdms_cls.spearman > o.ols_cls.spearman, || format!("spearman pdms {} <= ols {}", o.pdms_cls.spearman, o.ols_cls.spearman))?;
    check(o.pdms_cls.pearson > o.ols_cls.pearson, || format!("pearson pdms {} <= ols {}", o.pdms_cls.pearson, o.ols_cls.pearson))?;
    let kinds = [PlannerKind::ConstantVelocity, PlannerKind::ConstantAcceleration, PlannerKind::Idm, PlannerKind::PdmLite, PlannerKind::PerturbedHuman];
    let mut per_type = Vec::new();
    for kind in kinds {
        let row = table.per_type.iter().find(|t| t.kind == kind).ok_or_else(|| format!("no row for {kind:?}"))?;
        let rho = row.pdms_cls.map(|c| c.spearman).ok_or_else(|| format!("{kind:?}: {:?}", row.note))?;
        check(rho > 0.0, || format!("{kind:?} spearman(pdms, cls) = {rho}"))?;
        per_type.push(format!("{rho:.2}"));
    }
    Ok(format!(
        "spearman pdms {:.3} vs ols {:.3}, pearson pdms {:.3} vs ols {:.3}, per type [{}]",
        o.pdms_cls.spearman,
        o.ols_cls.spearman,
        o.pdms_cls.pearson,
        o.ols_cls.pearson,
        per_type.join(", ")
    ))
}

fn ablation_grid() -> Outcome {
    let corpus = scenes(GRID_SCENES, 8);
    let planners = default_planners();
    let mut runs = 0;
    for duration in [4.0, 15.0] {
        for frequency in [2.0, 10.0] {
            for horizon in [2.0, 4.0, 8.0] {
                for background in [BackgroundMode::Replay, BackgroundMode::ReactiveIdm] {
                    let cfg = StudyConfig { duration, frequency, horizon, background };
                    let table = correlation_study(&corpus, &planners, &cfg).map_err(|e| format!("{cfg:?}: {e}"))?;
                    let o = &table.overall;
                    let coeffs = [o.ols_cls.pearson, o.ols_cls.spearman, o.pdms_cls.pearson, o.pdms_cls.spearman];
                    check(coeffs.iter().all(|c| c.is_finite()), || format!("{cfg:?}: {coeffs:?}"))?;
                    runs += 1;
                }
            }
        }
    }
    Ok(format!("{runs} configurations on {GRID_SCENES} scenes, all coefficients finite"))
}

fn non_reactivity() -> Outcome {
    let cfg = MetricConfig::default();
    let cv = PlannerRegistry::with_builtins().build_default("constant_velocity").map_err(|e| e.to_string())?;
    let mut compared = 0;
    for scene in scenes(50, 9) {
        let other = cv.clone().plan(&Observation::initial(&scene, cfg.horizon));
        let stand = Trajectory::new(0.0, scene.ego_init.pose, vec![scene.ego_init.pose; other.poses.len()]);
        let a = rollout_nonreactive(&scene, &other, cfg.horizon).map_err(|e| e.to_string())?;
        let b = rollout_nonreactive(&scene, &stand, cfg.horizon).map_err(|e| e.to_string())?;
        check(a.ego_states != b.ego_states || scene.ego_init.velocity == 0.0, || format!("{}: plans did not differ", scene.scene_id))?;
        let bits = |log: &navcore::sim::SimulationLog| serde_json::to_string(&log.agent_states).expect("serialize");
        check(bits(&a) == bits(&b), || format!("{}: background streams differ", scene.scene_id))?;
        compared += 1;
    }
    Ok(format!("{compared} scenes, agent streams identical across two plans"))
}

fn statistics_oracle() -> Outcome {
    let mut r = rng(10);
    let (mut checked, mut degenerate) = (0, 0);
    for i in 0..1000 {
        let n = r.gen_range(3..12);
        let tied = i % 2 == 0;
        let draw = |r: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| if tied { r.gen_range(0..4) as f64 } else { r.gen_range(-10.0..10.0) }).collect()
        };
        let (xs, ys) = (draw(&mut r), draw(&mut r));
        match (pearson(&xs, &ys), spearman(&xs, &ys)) {
            (Ok(p), Ok(s)) => {
                let (pd, sd) = (pearson_definition(&xs, &ys), spearman_definition(&xs, &ys));
                check((p - pd).abs() < 1e-12, || format!("vector {i}: pearson {p} vs {pd}"))?;
                check((s - sd).abs() < 1e-12, || format!("vector {i}: spearman {s} vs {sd}"))?;
                checked += 1;
            }
            (Err(StatsError::ZeroVariance), Err(StatsError::ZeroVariance)) => degenerate += 1,
            other => return Err(format!("vector {i}: unexpected {other:?}")),
        }
    }
    Ok(format!("{checked} vector pairs matched, {degenerate} constant inputs rejected"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("pdms aggregation oracle", pdms_oracle),
        ("evaluation determinism", determinism),
        ("geometry oracles", geometry),
        ("dynamics", dynamics),
        ("subscore examples", subscores),
        ("scene filtering", filtering),
        ("correlation study", correlation),
        ("ablation grid", ablation_grid),
        ("non-reactive background", non_reactivity),
        ("correlation statistics oracle", statistics_oracle),
    ];
    let mut failed = 0;
    let mut total = Duration::ZERO;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        total += took;
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({:.1}s): {detail}", i + 1, took.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({:.1}s): {detail}", i + 1, took.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {:.1}s", criteria.len() - failed, total.as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
