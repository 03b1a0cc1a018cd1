mod common;

use navcore::curation::{classify, filter_scenes, filter_with_scores, probe_scene, CurationError, FilterConfig, RemovalReason};
use navcore::metrics::MetricConfig;
use navcore::scene::{generate_scenarios, GeneratorConfig, Scene};
use proptest::prelude::*;

fn placeholder_scenes(n: usize) -> Vec<Scene> {
    (0..n).map(|i| common::corridor_scene(&format!("s{i:03}"), 200.0, 7.0, 15.0, 8.0, vec![])).collect()
}

#[test]
fn classification_examples() {
    assert_eq!(classify(0.9, 1.0, 0.8, 0.8), RemovalReason::Trivial);
    assert_eq!(classify(0.3, 0.7, 0.8, 0.8), RemovalReason::Noisy);
    assert_eq!(classify(0.3, 0.95, 0.8, 0.8), RemovalReason::None);
    assert_eq!(classify(0.9, 0.1, 0.8, 0.8), RemovalReason::Trivial, "trivial is checked first");
    assert_eq!(classify(0.8, 0.8, 0.8, 0.8), RemovalReason::None, "both comparisons are strict");
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(matches!(filter_scenes(&[], &FilterConfig::default()), Err(CurationError::Empty)));
    let cfg = FilterConfig { cv_threshold: f64::NAN, ..FilterConfig::default() };
    assert!(matches!(filter_with_scores(&placeholder_scenes(1), &[(0.0, 1.0)], &cfg), Err(CurationError::Threshold { .. })));
}

fn corpus() -> Vec<Scene> {
    generate_scenarios(&GeneratorConfig::uniform(35), 4).unwrap()
}

#[test]
fn filtering_generated_scenes_is_idempotent_and_lowers_cv() {
    let scenes = corpus();
    let cfg = FilterConfig::default();
    let (kept, report) = filter_scenes(&scenes, &cfg).unwrap();
    let s = &report.summary;
    assert_eq!(s.total, 35);
    assert_eq!(s.kept + s.trivial + s.noisy, s.total);
    assert!(s.trivial > 0 && s.kept > 0, "{s:?}");
    assert!(s.mean_cv_pdms_after.unwrap() < s.mean_cv_pdms_before);
    for row in &report.rows {
        assert_eq!(row.kept, row.removal_reason == RemovalReason::None);
        if row.kept {
            assert!(row.cv_pdms <= 0.8 && row.human_pdms >= 0.8);
        }
    }
    let ids: Vec<&str> = report.rows.iter().map(|r| r.scene_id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);

    let (again, second) = filter_scenes(&kept, &cfg).unwrap();
    assert_eq!(again, kept);
    assert_eq!(second.summary.kept, kept.len());
    assert_eq!(report.endpoints_before.longitudinal.total(), 35);
    assert_eq!(report.endpoints_after.lateral.total(), kept.len());
}

#[test]
fn unreachable_cv_threshold_removes_nothing_as_trivial() {
    let cfg = FilterConfig { cv_threshold: 1.01, ..FilterConfig::default() };
    let (_, report) = filter_scenes(&corpus(), &cfg).unwrap();
    assert_eq!(report.summary.trivial, 0);
}

#[test]
fn probe_matches_report_rows() {
    let scenes = corpus();
    let (_, report) = filter_scenes(&scenes[..5], &FilterConfig::default()).unwrap();
    for scene in &scenes[..5] {
        let (cv, human) = probe_scene(scene, &MetricConfig::default()).unwrap();
        let row = report.rows.iter().find(|r| r.scene_id == scene.scene_id).unwrap();
        assert_eq!((row.cv_pdms, row.human_pdms), (cv, human));
    }
}

#[test]
fn csv_has_one_line_per_scene() {
    let (_, report) = filter_with_scores(&placeholder_scenes(3), &[(0.9, 1.0), (0.1, 0.2), (0.1, 0.9)], &FilterConfig::default()).unwrap();
    let csv = report.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("s000,0.9,1,false,trivial"));
    assert!(lines[2].contains(",noisy,"));
    assert!(lines[3].contains(",true,none,"));
}

proptest! {
    #[test]
    fn filter_invariants_hold_for_any_scores(
        scores in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 1..30),
        cv_t in 0.0..=1.0f64,
        human_t in 0.0..=1.0f64,
    ) {
        let scenes = placeholder_scenes(scores.len());
        let cfg = FilterConfig { cv_threshold: cv_t, human_threshold: human_t, ..FilterConfig::default() };
        let (kept, report) = filter_with_scores(&scenes, &scores, &cfg).unwrap();
        prop_assert_eq!(kept.len(), report.summary.kept);
        for row in &report.rows {
            prop_assert_eq!(row.kept, row.removal_reason == RemovalReason::None);
            if row.kept {
                prop_assert!(row.cv_pdms <= cv_t && row.human_pdms >= human_t);
            }
        }
        let kept_scores: Vec<(f64, f64)> =
            report.rows.iter().filter(|r| r.kept).map(|r| (r.cv_pdms, r.human_pdms)).collect();
        if !kept.is_empty() {
            let (_, again) = filter_with_scores(&kept, &kept_scores, &cfg).unwrap();
            prop_assert_eq!(again.summary.kept, kept.len());
        }
        // Without noisy removals every dropped scene scores above every kept one.
        let s = &report.summary;
        if s.trivial > 0 && s.noisy == 0 && s.kept > 0 {
            prop_assert!(s.mean_cv_pdms_after.unwrap() < s.mean_cv_pdms_before);
        }
    }
}
