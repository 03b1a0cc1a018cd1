//! 2D geometry primitives: poses, oriented boxes, polygons and polylines.
//!
//! Containment and intersection are closed (boundary-inclusive).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
    #[error("box extents must be positive and finite (half_length={0}, half_width={1})")]
    BadExtents(f64, f64),
    #[error("polygon ring needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon ring is self-intersecting")]
    SelfIntersecting,
    #[error("polyline needs at least 2 vertices, got {0}")]
    PolylineTooShort(usize),
    #[error("polyline vertices {0} and {1} coincide")]
    DuplicateVertex(usize, usize),
}

/// Wraps an angle into (-π, π]. Angles already in range are returned untouched.
pub fn normalize_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut r = theta.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    if r <= -PI {
        r += TAU;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn scale(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Point2::new(x, y)
    }
}

/// Planar pose. `heading` lives in (-π, π] when built through [`Pose2D::new`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: normalize_angle(heading) }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn direction(&self) -> Point2 {
        Point2::new(self.heading.cos(), self.heading.sin())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }

    /// Expresses `p` in this pose's frame: (longitudinal, lateral-left).
    pub fn to_local(&self, p: Point2) -> Point2 {
        let d = p - self.position();
        let (s, c) = self.heading.sin_cos();
        Point2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    pub fn advance(&self, distance: f64) -> Pose2D {
        let (s, c) = self.heading.sin_cos();
        Pose2D { x: self.x + distance * c, y: self.y + distance * s, heading: self.heading }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Pose2D,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedBox {
    pub fn new(center: Pose2D, half_length: f64, half_width: f64) -> Result<Self, GeomError> {
        let b = Self { center, half_length, half_width };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if !self.center.is_finite() {
            return Err(GeomError::NonFinite("box center"));
        }
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.half_length) || !ok(self.half_width) {
            return Err(GeomError::BadExtents(self.half_length, self.half_width));
        }
        Ok(())
    }

    /// Corners in counter-clockwise order starting at front-left.
    pub fn corners(&self) -> [Point2; 4] {
        let (s, c) = self.center.heading.sin_cos();
        let f = Point2::new(c * self.half_length, s * self.half_length);
        let l = Point2::new(-s * self.half_width, c * self.half_width);
        let o = self.center.position();
        [o + f + l, o - f + l, o - f - l, o + f - l]
    }

    pub fn bounding_radius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }

    /// Closed containment of a point.
    pub fn contains(&self, p: Point2) -> bool {
        let local = self.center.to_local(p);
        local.x.abs() <= self.half_length && local.y.abs() <= self.half_width
    }

    /// Separating-axis test on the four edge normals. Touching boxes intersect.
    pub fn intersects(&self, other: &OrientedBox) -> bool {
        let d = other.center.position() - self.center.position();
        let reach = self.bounding_radius() + other.bounding_radius();
        if d.dot(d) > reach * reach {
            return false;
        }
        let (sa, ca) = self.center.heading.sin_cos();
        let (sb, cb) = other.center.heading.sin_cos();
        let axes_a = [Point2::new(ca, sa), Point2::new(-sa, ca)];
        let axes_b = [Point2::new(cb, sb), Point2::new(-sb, cb)];
        let ext_a = [self.half_length, self.half_width];
        let ext_b = [other.half_length, other.half_width];
        for axis in axes_a.iter().chain(axes_b.iter()) {
            let ra = ext_a[0] * axes_a[0].dot(*axis).abs() + ext_a[1] * axes_a[1].dot(*axis).abs();
            let rb = ext_b[0] * axes_b[0].dot(*axis).abs() + ext_b[1] * axes_b[1].dot(*axis).abs();
            if d.dot(*axis).abs() > ra + rb {
                return false;
            }
        }
        true
    }
}

/// Free-function form of [`OrientedBox::intersects`].
pub fn obb_intersects(a: &OrientedBox, b: &OrientedBox) -> bool {
    a.intersects(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Vec<Point2>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub holes: Vec<Vec<Point2>>,
}

impl Polygon {
    pub fn new(exterior: Vec<Point2>, holes: Vec<Vec<Point2>>) -> Result<Self, GeomError> {
        let p = Self { exterior, holes };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        validate_ring(&self.exterior)?;
        for h in &self.holes {
            validate_ring(h)?;
        }
        Ok(())
    }

    /// Closed containment: boundary points count as inside, hole interiors as outside.
    pub fn contains(&self, p: Point2) -> bool {
        if !ring_contains(&self.exterior, p) {
            return false;
        }
        self.holes.iter().all(|h| !ring_contains_open(h, p))
    }

    pub fn bounds(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.exterior {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }
}

pub fn polygon_contains(poly: &Polygon, p: Point2) -> bool {
    poly.contains(p)
}

const BOUNDARY_EPS: f64 = 1e-9;

fn ring_edges(ring: &[Point2]) -> impl Iterator<Item = (Point2, Point2)> + '_ {
    let n = ring.len();
    (0..n).map(move |i| (ring[i], ring[(i + 1) % n]))
}

fn on_segment(p: Point2, a: Point2, b: Point2) -> bool {
    if p.x < a.x.min(b.x) - BOUNDARY_EPS
        || p.x > a.x.max(b.x) + BOUNDARY_EPS
        || p.y < a.y.min(b.y) - BOUNDARY_EPS
        || p.y > a.y.max(b.y) + BOUNDARY_EPS
    {
        return false;
    }
    segment_distance_sq(p, a, b) <= BOUNDARY_EPS * BOUNDARY_EPS
}

fn segment_distance_sq(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let d = p - (a + ab.scale(t));
    d.dot(d)
}

#[derive(PartialEq)]
enum RingSide {
    Inside,
    Boundary,
    Outside,
}

fn ring_side(ring: &[Point2], p: Point2) -> RingSide {
    let mut inside = false;
    for (a, b) in ring_edges(ring) {
        if on_segment(p, a, b) {
            return RingSide::Boundary;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    if inside {
        RingSide::Inside
    } else {
        RingSide::Outside
    }
}

fn ring_contains(ring: &[Point2], p: Point2) -> bool {
    ring_side(ring, p) != RingSide::Outside
}

// Holes exclude only their open interior, so a point on a hole edge stays inside the polygon.
fn ring_contains_open(ring: &[Point2], p: Point2) -> bool {
    ring_side(ring, p) == RingSide::Inside
}

fn validate_ring(ring: &[Point2]) -> Result<(), GeomError> {
    if ring.len() < 3 {
        return Err(GeomError::TooFewVertices(ring.len()));
    }
    if ring.iter().any(|v| !v.is_finite()) {
        return Err(GeomError::NonFinite("polygon vertex"));
    }
    let n = ring.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Err(GeomError::SelfIntersecting);
            }
        }
    }
    Ok(())
}

fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let orient = |p: Point2, q: Point2, r: Point2| (q - p).cross(r - p);
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub arc_length: f64,
    /// Positive to the left of the travel direction.
    pub lateral: f64,
    pub distance: f64,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolylineRepr", into = "PolylineRepr")]
pub struct Polyline {
    points: Vec<Point2>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolylineRepr {
    points: Vec<Point2>,
}

impl TryFrom<PolylineRepr> for Polyline {
    type Error = GeomError;
    fn try_from(r: PolylineRepr) -> Result<Self, GeomError> {
        Polyline::new(r.points)
    }
}

impl From<Polyline> for PolylineRepr {
    fn from(p: Polyline) -> Self {
        PolylineRepr { points: p.points }
    }
}

impl Polyline {
    pub fn new(points: Vec<Point2>) -> Result<Self, GeomError> {
        if points.len() < 2 {
            return Err(GeomError::PolylineTooShort(points.len()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(GeomError::NonFinite("polyline vertex"));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for i in 1..points.len() {
            let d = points[i].distance(points[i - 1]);
            if d == 0.0 {
                return Err(GeomError::DuplicateVertex(i - 1, i));
            }
            cumulative.push(cumulative[i - 1] + d);
        }
        Ok(Self { points, cumulative })
    }

    /// Builds a polyline, silently dropping consecutive duplicate vertices.
    pub fn new_dedup(points: impl IntoIterator<Item = Point2>) -> Result<Self, GeomError> {
        let mut pts: Vec<Point2> = Vec::new();
        for p in points {
            if pts.last().is_none_or(|q| q.distance(p) > 1e-9) {
                pts.push(p);
            }
        }
        Self::new(pts)
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("polyline has >= 2 vertices")
    }

    fn segment_at(&self, s: f64) -> usize {
        let n = self.points.len();
        match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Point at arc length `s`, clamped to the polyline.
    pub fn point_at(&self, s: f64) -> Point2 {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let (a, b) = (self.points[i], self.points[i + 1]);
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        a + (b - a).scale((s - self.cumulative[i]) / seg)
    }

    /// Tangent heading of the segment containing `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        let i = self.segment_at(s.clamp(0.0, self.length()));
        let d = self.points[i + 1] - self.points[i];
        d.y.atan2(d.x)
    }

    pub fn pose_at(&self, s: f64) -> Pose2D {
        let p = self.point_at(s);
        Pose2D::new(p.x, p.y, self.heading_at(s))
    }

    /// Pose at arc length `s`, extended straight past either end.
    pub fn pose_at_extended(&self, s: f64) -> Pose2D {
        if s < 0.0 {
            self.pose_at(0.0).advance(s)
        } else if s > self.length() {
            self.pose_at(self.length()).advance(s - self.length())
        } else {
            self.pose_at(s)
        }
    }

    /// Signed heading change accumulated between arc lengths `s0` and `s1` (s0 <= s1).
    pub fn turning_between(&self, s0: f64, s1: f64) -> f64 {
        let (s0, s1) = (s0.clamp(0.0, self.length()), s1.clamp(0.0, self.length()));
        let (i0, i1) = (self.segment_at(s0), self.segment_at(s1));
        let mut total = 0.0;
        let seg_heading = |i: usize| {
            let d = self.points[i + 1] - self.points[i];
            d.y.atan2(d.x)
        };
        for i in i0..i1 {
            total += normalize_angle(seg_heading(i + 1) - seg_heading(i));
        }
        total
    }

    /// Globally nearest projection (scans every segment).
    pub fn project(&self, p: Point2) -> Projection {
        let mut best = Projection { arc_length: 0.0, lateral: 0.0, distance: f64::INFINITY, segment: 0 };
        for i in 0..self.points.len() - 1 {
            let (a, b) = (self.points[i], self.points[i + 1]);
            let ab = b - a;
            let len = self.cumulative[i + 1] - self.cumulative[i];
            let t = ((p - a).dot(ab) / (len * len)).clamp(0.0, 1.0);
            let d = p - (a + ab.scale(t));
            let dist_sq = d.dot(d);
            if dist_sq < best.distance {
                let side = ab.cross(p - a).signum();
                best = Projection { arc_length: self.cumulative[i] + t * len, lateral: side, distance: dist_sq, segment: i };
            }
        }
        best.distance = best.distance.sqrt();
        best.lateral *= best.distance;
        best
    }

    /// `(arc length, signed lateral)` of `p`, continuing the first and last
    /// segments straight so that points beyond either end get coordinates
    /// outside `[0, length]`.
    pub fn frenet(&self, p: Point2) -> (f64, f64) {
        let pr = self.project(p);
        if pr.arc_length <= 0.0 {
            let local = self.pose_at(0.0).to_local(p);
            if local.x < 0.0 {
                return (local.x, local.y);
            }
        } else if pr.arc_length >= self.length() {
            let local = self.pose_at(self.length()).to_local(p);
            if local.x > 0.0 {
                return (self.length() + local.x, local.y);
            }
        }
        (pr.arc_length, pr.lateral)
    }

    /// Lateral offset copy (positive = left). Only valid while the offset is
    /// smaller than the local radius of curvature.
    pub fn offset(&self, lateral: f64) -> Result<Polyline, GeomError> {
        let n = self.points.len();
        let normals: Vec<Point2> = (0..n - 1)
            .map(|i| {
                let d = (self.points[i + 1] - self.points[i]).scale(1.0 / (self.cumulative[i + 1] - self.cumulative[i]));
                Point2::new(-d.y, d.x)
            })
            .collect();
        let pts = (0..n).map(|i| {
            let nrm = if i == 0 {
                normals[0]
            } else if i == n - 1 {
                normals[n - 2]
            } else {
                let m = normals[i - 1] + normals[i];
                let cos_half = m.norm() / 2.0;
                m.scale(1.0 / (m.norm() * cos_half.max(0.2)))
            };
            self.points[i] + nrm.scale(lateral)
        });
        Polyline::new_dedup(pts)
    }
}

/// Free-function projection returning (arc_length, signed lateral offset).
pub fn project_onto_polyline(line: &Polyline, p: Point2) -> (f64, f64) {
    let pr = line.project(p);
    (pr.arc_length, pr.lateral)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polygon {
        Polygon::new(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn normalize_wraps_into_half_open_interval() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(7.0) - (7.0 - TAU)).abs() < 1e-12);
        let x = normalize_angle(-11.3);
        assert_eq!(normalize_angle(x), x);
    }

    #[test]
    fn identical_boxes_intersect() {
        let b = OrientedBox::new(Pose2D::new(0.0, 0.0, 0.0), 0.5, 0.5).unwrap();
        assert!(b.intersects(&b));
    }

    #[test]
    fn far_boxes_do_not_intersect() {
        let a = OrientedBox::new(Pose2D::new(0.0, 0.0, 0.0), 1.0, 0.5).unwrap();
        let b = OrientedBox::new(Pose2D::new(10.0, 0.0, 0.0), 1.0, 0.5).unwrap();
        assert!(!a.intersects(&b));
    }

    #[test]
    fn touching_boxes_intersect() {
        let a = OrientedBox::new(Pose2D::new(0.0, 0.0, 0.0), 1.0, 1.0).unwrap();
        let b = OrientedBox::new(Pose2D::new(2.0, 0.0, 0.0), 1.0, 1.0).unwrap();
        assert!(a.intersects(&b));
    }

    #[test]
    fn rejects_bad_extents() {
        assert!(OrientedBox::new(Pose2D::default(), 0.0, 1.0).is_err());
        assert!(OrientedBox::new(Pose2D::default(), 1.0, f64::NAN).is_err());
    }

    #[test]
    fn square_containment() {
        let sq = unit_square();
        assert!(sq.contains(Point2::new(0.5, 0.5)));
        assert!(!sq.contains(Point2::new(10.0, 10.0)));
        assert!(sq.contains(Point2::new(1.0, 0.5)));
        assert!(sq.contains(Point2::new(1.0, 1.0)));
    }

    #[test]
    fn holes_exclude_interior_only() {
        let hole = vec![Point2::new(0.25, 0.25), Point2::new(0.75, 0.25), Point2::new(0.75, 0.75), Point2::new(0.25, 0.75)];
        let p = Polygon::new(unit_square().exterior, vec![hole]).unwrap();
        assert!(!p.contains(Point2::new(0.5, 0.5)));
        assert!(p.contains(Point2::new(0.25, 0.5)));
        assert!(p.contains(Point2::new(0.1, 0.5)));
    }

    #[test]
    fn bowtie_is_rejected() {
        let r = Polygon::new(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
            vec![],
        );
        assert_eq!(r.unwrap_err(), GeomError::SelfIntersecting);
    }

    #[test]
    fn projection_basics() {
        let line = Polyline::new(vec![Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)]).unwrap();
        assert_eq!(project_onto_polyline(&line, Point2::new(0.0, 0.0)), (0.0, 0.0));
        let (s, d) = project_onto_polyline(&line, Point2::new(3.0, 2.0));
        assert!((s - 3.0).abs() < 1e-12 && (d - 2.0).abs() < 1e-12);
        let (s, d) = project_onto_polyline(&line, Point2::new(3.0, -2.0));
        assert!((s - 3.0).abs() < 1e-12 && (d + 2.0).abs() < 1e-12);
    }

    #[test]
    fn projection_on_l_shape_near_corner() {
        let line = Polyline::new(vec![Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), Point2::new(10.0, 10.0)]).unwrap();
        let q = Point2::new(11.0, -1.0);
        let pr = line.project(q);
        // brute force over 1e5 samples
        let n = 100_000;
        let best = (0..=n)
            .map(|i| line.point_at(line.length() * i as f64 / n as f64).distance(q))
            .fold(f64::INFINITY, f64::min);
        assert!(pr.distance <= best + 1e-9);
        assert!((pr.arc_length - 10.0).abs() < 1e-9);
        assert!(pr.lateral < 0.0);
    }

    #[test]
    fn duplicate_vertices_rejected() {
        let r = Polyline::new(vec![Point2::new(0.0, 0.0), Point2::new(0.0, 0.0)]);
        assert_eq!(r.unwrap_err(), GeomError::DuplicateVertex(0, 1));
        let ok = Polyline::new_dedup([Point2::new(0.0, 0.0), Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)]).unwrap();
        assert_eq!(ok.points().len(), 2);
    }

    #[test]
    fn arc_table_matches_vertex_distances() {
        let line = Polyline::new(vec![Point2::new(0.0, 0.0), Point2::new(3.0, 4.0), Point2::new(3.0, 10.0)]).unwrap();
        assert_eq!(line.cumulative(), &[0.0, 5.0, 11.0]);
        let p = line.point_at(8.0);
        assert!((p.x - 3.0).abs() < 1e-12 && (p.y - 7.0).abs() < 1e-12);
    }

    #[test]
    fn turning_accumulates_signed_heading_change() {
        let line = Polyline::new(vec![Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), Point2::new(10.0, 10.0)]).unwrap();
        assert!((line.turning_between(0.0, 20.0) - PI / 2.0).abs() < 1e-12);
        assert_eq!(line.turning_between(0.0, 5.0), 0.0);
    }

    #[test]
    fn polyline_serde_rebuilds_arc_table() {
        let line = Polyline::new(vec![Point2::new(0.0, 0.0), Point2::new(3.0, 4.0)]).unwrap();
        let s = serde_json::to_string(&line).unwrap();
        let back: Polyline = serde_json::from_str(&s).unwrap();
        assert_eq!(back, line);
        assert!(serde_json::from_str::<Polyline>(r#"{"points":[{"x":0,"y":0}]}"#).is_err());
    }
}
