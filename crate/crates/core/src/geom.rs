//! Small geometric aliases and helpers shared across stages.

use nalgebra::{Vector2, Vector3};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Total length of an open polyline.
pub fn polyline_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Cumulative arc length at each vertex, starting at 0.
pub fn cumulative_length(points: &[Vec2]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(points.len());
    let mut s = 0.0;
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            s += (p - points[i - 1]).norm();
        }
        acc.push(s);
    }
    acc
}

/// Resamples a polyline at `n >= 2` arc-length-uniform positions.
pub fn resample_polyline(points: &[Vec2], n: usize) -> Vec<Vec2> {
    assert!(n >= 2 && !points.is_empty());
    if points.len() == 1 {
        return vec![points[0]; n];
    }
    let cum = cumulative_length(points);
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let s = total * k as f64 / (n - 1) as f64;
        while seg + 2 < points.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let u = if len > 0.0 {
            ((s - cum[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(points[seg] + (points[seg + 1] - points[seg]) * u);
    }
    out
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let u = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * u)).norm()
}

/// Distance from `p` to the nearest point of a polyline.
pub fn point_polyline_distance(p: Vec2, poly: &[Vec2]) -> f64 {
    match poly.len() {
        0 => f64::INFINITY,
        1 => (p - poly[0]).norm(),
        _ => poly
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Axis-aligned bounding box `(min, max)` of a point set.
pub fn bounds2(points: impl IntoIterator<Item = Vec2>) -> Option<(Vec2, Vec2)> {
    let mut it = points.into_iter();
    let first = it.next()?;
    let (mut lo, mut hi) = (first, first);
    for p in it {
        lo = lo.inf(&p);
        hi = hi.sup(&p);
    }
    Some((lo, hi))
}
