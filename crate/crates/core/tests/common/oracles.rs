//! Reference implementations written independently of the library code.

use navcore::geom::{OrientedBox, Point2, Polyline};

fn rotate(p: (f64, f64), heading: f64) -> (f64, f64) {
    let (s, c) = heading.sin_cos();
    (c * p.0 - s * p.1, s * p.0 + c * p.1)
}

fn inverse_rotate(p: (f64, f64), heading: f64) -> (f64, f64) {
    rotate(p, -heading)
}

/// Closed containment by rotating the point into the box frame.
pub fn in_box(b: &OrientedBox, p: Point2) -> bool {
    let (lx, ly) = inverse_rotate((p.x - b.center.x, p.y - b.center.y), b.center.heading);
    lx.abs() <= b.half_length && ly.abs() <= b.half_width
}

/// Counter-clockwise corners.
pub fn box_corners(b: &OrientedBox) -> Vec<Point2> {
    [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        .iter()
        .map(|(sx, sy)| {
            let (x, y) = rotate((sx * b.half_length, sy * b.half_width), b.center.heading);
            Point2::new(b.center.x + x, b.center.y + y)
        })
        .collect()
}

/// `n × n` grid over each box (edges included) tested against the other box.
pub fn sampled_overlap(a: &OrientedBox, b: &OrientedBox, n: usize) -> bool {
    let hits = |from: &OrientedBox, into: &OrientedBox| {
        (0..n).any(|i| {
            (0..n).any(|j| {
                let u = -from.half_length + 2.0 * from.half_length * i as f64 / (n - 1) as f64;
                let v = -from.half_width + 2.0 * from.half_width * j as f64 / (n - 1) as f64;
                let (x, y) = rotate((u, v), from.center.heading);
                in_box(into, Point2::new(from.center.x + x, from.center.y + y))
            })
        })
    };
    hits(a, b) || hits(b, a)
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Sutherland-Hodgman clip of `subject` by the convex counter-clockwise `clip`.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        let (c0, c1) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        if input.is_empty() {
            break;
        }
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (dp, dq) = (cross(c0, c1, p), cross(c0, c1, q));
            if dp >= 0.0 {
                out.push(p);
            }
            if (dp >= 0.0) != (dq >= 0.0) {
                let t = dp / (dp - dq);
                out.push(Point2::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)));
            }
        }
    }
    out
}

pub fn area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].x * poly[(i + 1) % n].y - poly[(i + 1) % n].x * poly[i].y).sum::<f64>() / 2.0
}

pub fn perimeter(poly: &[Point2]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| ((poly[(i + 1) % n].x - poly[i].x).powi(2) + (poly[(i + 1) % n].y - poly[i].y).powi(2)).sqrt()).sum()
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((p.x - a.x - t * dx).powi(2) + (p.y - a.y - t * dy).powi(2)).sqrt()
}

/// Distance between two non-crossing segments.
fn segment_distance(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    point_segment_distance(a, c, d).min(point_segment_distance(b, c, d)).min(point_segment_distance(c, a, b)).min(point_segment_distance(d, a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxTruth {
    Overlap,
    Disjoint,
    /// Separation or penetration below the tolerance.
    NearTangent,
}

/// Ground truth from the exact overlap region, or the exact gap when there is none.
pub fn box_truth(a: &OrientedBox, b: &OrientedBox, tol: f64) -> BoxTruth {
    let (ca, cb) = (box_corners(a), box_corners(b));
    let overlap = clip_convex(&ca, &cb);
    if overlap.len() >= 3 {
        let thickness = area(&overlap).abs() / perimeter(&overlap).max(f64::MIN_POSITIVE);
        if thickness > tol {
            return BoxTruth::Overlap;
        }
        return BoxTruth::NearTangent;
    }
    let mut gap = f64::INFINITY;
    for i in 0..4 {
        for j in 0..4 {
            gap = gap.min(segment_distance(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4]));
        }
    }
    if gap > tol {
        BoxTruth::Disjoint
    } else {
        BoxTruth::NearTangent
    }
}

/// Point-sampling oracle: the grid, plus the centroid of the exact overlap region.
pub fn sampling_oracle(a: &OrientedBox, b: &OrientedBox) -> bool {
    if sampled_overlap(a, b, 100) {
        return true;
    }
    let overlap = clip_convex(&box_corners(a), &box_corners(b));
    if overlap.len() < 3 {
        return false;
    }
    let n = overlap.len() as f64;
    let c = Point2::new(overlap.iter().map(|p| p.x).sum::<f64>() / n, overlap.iter().map(|p| p.y).sum::<f64>() / n);
    in_box(a, c) && in_box(b, c)
}

/// Even-odd ray casting along +x.
pub fn ray_cast(ring: &[Point2], p: Point2) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if x > p.x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Smallest distance from `p` to `samples` points spread uniformly by arc length over `line`.
pub fn sampled_polyline_distance(line: &Polyline, p: Point2, samples: usize) -> f64 {
    let pts = line.points();
    let cum: Vec<f64> = std::iter::once(0.0)
        .chain(pts.windows(2).scan(0.0, |acc, w| {
            *acc += ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt();
            Some(*acc)
        }))
        .collect();
    let total = *cum.last().unwrap();
    let mut seg = 0;
    let mut best = f64::INFINITY;
    for k in 0..samples {
        let s = total * k as f64 / (samples - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let t = ((s - cum[seg]) / (cum[seg + 1] - cum[seg])).clamp(0.0, 1.0);
        let q = Point2::new(pts[seg].x + t * (pts[seg + 1].x - pts[seg].x), pts[seg].y + t * (pts[seg + 1].y - pts[seg].y));
        best = best.min(((q.x - p.x).powi(2) + (q.y - p.y).powi(2)).sqrt());
    }
    best
}

/// Product-moment correlation straight from the definition.
pub fn pearson_definition(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Ranks by counting: rank = 1 + #smaller + (#equal - 1) / 2.
pub fn brute_force_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_definition(x: &[f64], y: &[f64]) -> f64 {
    pearson_definition(&brute_force_ranks(x), &brute_force_ranks(y))
}

/// Default-weight PDMS written out directly.
pub fn pdms_definition(nc: f64, dac: f64, ep: f64, ttc: f64, comfort: f64) -> f64 {
    nc * dac * ((5.0 * ep + 5.0 * ttc + 2.0 * comfort) / 12.0)
}
