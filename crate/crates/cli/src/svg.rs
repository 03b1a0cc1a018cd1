//! Static SVG renders of scenes, rollouts and study scatter plots.
//!
//! Numbers are printed with fixed precision so identical inputs give identical bytes.

use std::fmt::Write as _;

use navcore::analysis::{LinearFit, StudyTable};
use navcore::dynamics::VehicleParameters;
use navcore::geom::{OrientedBox, Point2};
use navcore::metrics::ego_box;
use navcore::planners::PlannerKind;
use navcore::scene::{AgentCategory, Scene};
use navcore::sim::SimulationLog;

const WIDTH: f64 = 900.0;
const MARGIN: f64 = 20.0;

/// World-to-pixel mapping with y pointing up in the world.
struct View {
    min_x: f64,
    max_y: f64,
    scale: f64,
    height: f64,
}

impl View {
    fn fit(points: impl Iterator<Item = Point2>) -> Self {
        let (mut lo, mut hi) = (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in points {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if !lo.x.is_finite() {
            lo = Point2::new(-10.0, -10.0);
            hi = Point2::new(10.0, 10.0);
        }
        let span_x = (hi.x - lo.x).max(1.0);
        let span_y = (hi.y - lo.y).max(1.0);
        let scale = (WIDTH - 2.0 * MARGIN) / span_x;
        Self { min_x: lo.x, max_y: hi.y, scale, height: (span_y * scale + 2.0 * MARGIN).ceil() }
    }

    fn px(&self, p: Point2) -> (f64, f64) {
        (MARGIN + (p.x - self.min_x) * self.scale, MARGIN + (self.max_y - p.y) * self.scale)
    }

    fn points(&self, pts: impl IntoIterator<Item = Point2>) -> String {
        let mut out = String::new();
        for (i, p) in pts.into_iter().enumerate() {
            let (x, y) = self.px(p);
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x:.2},{y:.2}");
        }
        out
    }

    fn ring_path(&self, ring: &[Point2], out: &mut String) {
        for (i, p) in ring.iter().enumerate() {
            let (x, y) = self.px(*p);
            let _ = write!(out, "{}{x:.2} {y:.2} ", if i == 0 { 'M' } else { 'L' });
        }
        out.push_str("Z ");
    }
}

fn category_color(c: AgentCategory) -> &'static str {
    match c {
        AgentCategory::Vehicle => "#4c72b0",
        AgentCategory::Pedestrian => "#dd8452",
        AgentCategory::Bicycle => "#55a868",
        AgentCategory::StaticObject => "#8c8c8c",
    }
}

fn draw_box(view: &View, b: &OrientedBox, fill: &str, opacity: f64, out: &mut String) {
    let _ = writeln!(
        out,
        r##"  <polygon points="{}" fill="{fill}" fill-opacity="{opacity:.2}" stroke="#222" stroke-width="0.8"/>"##,
        view.points(b.corners())
    );
}

/// Drivable area and route, plus agents and the ego path when a log is given.
///
/// `ticks` must already be checked against the log length.
pub fn render_scene(scene: &Scene, log: Option<(&SimulationLog, &[usize])>) -> String {
    let params = VehicleParameters::default();
    let map_points = scene.map.drivable_area.iter().flat_map(|p| p.exterior.iter().copied());
    let ego_points = log.into_iter().flat_map(|(l, _)| l.ego_states.iter().map(|s| Point2::new(s.x, s.y)));
    let view = View::fit(map_points.chain(scene.map.route_centerline.points().iter().copied()).chain(ego_points));

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#,
        w = WIDTH,
        h = view.height
    );
    let _ = writeln!(out, r##"  <rect width="100%" height="100%" fill="#ffffff"/>"##);
    for poly in &scene.map.drivable_area {
        let mut d = String::new();
        view.ring_path(&poly.exterior, &mut d);
        for hole in &poly.holes {
            view.ring_path(hole, &mut d);
        }
        let _ = writeln!(out, r##"  <path d="{}" fill="#dcdcdc" fill-rule="evenodd" stroke="#b0b0b0"/>"##, d.trim_end());
    }
    let _ = writeln!(
        out,
        r##"  <polyline points="{}" fill="none" stroke="#3b7dd8" stroke-width="1.5" stroke-dasharray="6 4"/>"##,
        view.points(scene.map.route_centerline.points().iter().copied())
    );

    if let Some((log, ticks)) = log {
        let n = ticks.len().max(1) as f64;
        for (j, &t) in ticks.iter().enumerate() {
            let opacity = 0.25 + 0.6 * (j + 1) as f64 / n;
            for a in &log.agent_states[t] {
                draw_box(&view, &a.bbox, category_color(a.category), opacity, &mut out);
            }
            draw_box(&view, &ego_box(&log.ego_states[t], &params), "#c44e52", opacity, &mut out);
        }
        let _ = writeln!(
            out,
            r##"  <polyline points="{}" fill="none" stroke="#c44e52" stroke-width="2"/>"##,
            view.points(log.ego_states.iter().map(|s| Point2::new(s.x, s.y)))
        );
    }
    out.push_str("</svg>\n");
    out
}

fn kind_color(k: PlannerKind) -> &'static str {
    match k {
        PlannerKind::ConstantVelocity => "#4c72b0",
        PlannerKind::ConstantAcceleration => "#dd8452",
        PlannerKind::Idm => "#55a868",
        PlannerKind::PdmLite => "#c44e52",
        PlannerKind::PerturbedHuman => "#8172b3",
    }
}

const PANEL: f64 = 360.0;
const PAD: f64 = 50.0;

fn panel(out: &mut String, x0: f64, title: &str, xlabel: &str, points: &[(f64, f64, PlannerKind)], fit: &LinearFit) {
    let px = |x: f64| x0 + PAD + x.clamp(0.0, 1.0) * PANEL;
    let py = |y: f64| PAD + (1.0 - y.clamp(0.0, 1.0)) * PANEL;
    let _ = writeln!(out, r##"  <rect x="{:.2}" y="{PAD:.2}" width="{PANEL:.2}" height="{PANEL:.2}" fill="none" stroke="#444"/>"##, x0 + PAD);
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let _ = writeln!(out, r##"  <text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{v:.2}</text>"##, px(v), PAD + PANEL + 14.0);
        let _ = writeln!(out, r##"  <text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{v:.2}</text>"##, x0 + PAD - 4.0, py(v) + 3.0);
    }
    let _ = writeln!(out, r##"  <text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{title}</text>"##, x0 + PAD + PANEL / 2.0, PAD - 12.0);
    let _ = writeln!(out, r##"  <text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{xlabel}</text>"##, x0 + PAD + PANEL / 2.0, PAD + PANEL + 32.0);
    let _ = writeln!(
        out,
        r##"  <text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">CLS</text>"##,
        x0 + 16.0,
        PAD + PANEL / 2.0,
        x0 + 16.0,
        PAD + PANEL / 2.0
    );
    let (ya, yb) = (fit.intercept, fit.intercept + fit.slope);
    let _ = writeln!(
        out,
        r##"  <line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#666" stroke-dasharray="4 3"/>"##,
        px(0.0),
        py(ya),
        px(1.0),
        py(yb)
    );
    for &(x, y, k) in points {
        let _ = writeln!(out, r##"  <circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}" fill-opacity="0.85"/>"##, px(x), py(y), kind_color(k));
    }
}

/// Two panels: per-planner OLS against CLS and PDMS against CLS.
pub fn render_scatter(table: &StudyTable) -> String {
    let width = 2.0 * (PANEL + 2.0 * PAD);
    let height = PANEL + 2.0 * PAD + 40.0;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#);
    let _ = writeln!(out, r##"  <rect width="100%" height="100%" fill="#ffffff"/>"##);
    let ols: Vec<_> = table.records.iter().map(|r| (r.ols, r.cls, r.kind)).collect();
    let pdms: Vec<_> = table.records.iter().map(|r| (r.pdms, r.cls, r.kind)).collect();
    let o = &table.overall;
    let t1 = format!("OLS vs CLS (r={:.3}, rho={:.3})", o.ols_cls.pearson, o.ols_cls.spearman);
    let t2 = format!("PDMS vs CLS (r={:.3}, rho={:.3})", o.pdms_cls.pearson, o.pdms_cls.spearman);
    panel(&mut out, 0.0, &t1, "OLS", &ols, &o.ols_trend);
    panel(&mut out, PANEL + 2.0 * PAD, &t2, "PDMS", &pdms, &o.pdms_trend);
    for (i, k) in PlannerKind::ALL.iter().enumerate() {
        let x = PAD + i as f64 * 140.0;
        let y = height - 14.0;
        let _ = writeln!(out, r##"  <circle cx="{x:.2}" cy="{:.2}" r="4" fill="{}"/>"##, y - 4.0, kind_color(*k));
        let _ = writeln!(out, r##"  <text x="{:.2}" y="{y:.2}" font-size="11">{}</text>"##, x + 8.0, k.as_str());
    }
    out.push_str("</svg>\n");
    out
}
