//! Skeleton tracing and curvature based corner splitting.

use serde::{Deserialize, Serialize};

use crate::contours::{ContourFamily, ContourImage};
use crate::geom::Vec2;
use crate::simplify::morph::{Mask, RING};

/// Ordered pixel-center coordinates. Closed polylines do not repeat their
/// first point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterPolyline {
    pub points: Vec<Vec2>,
    pub closed: bool,
}

impl RasterPolyline {
    pub fn open(points: Vec<Vec2>) -> Self {
        Self { points, closed: false }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        let mut l = crate::geom::polyline_length(&self.points);
        if self.closed && self.points.len() > 2 {
            l += (self.points[0] - self.points[self.points.len() - 1]).norm();
        }
        l
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct CornerParams {
    /// Round-corner threshold factor, in percent of the mean absolute
    /// curvature over the region of support.
    pub split_ratio: f64,
    pub smoothing_sigma: f64,
}

impl Default for CornerParams {
    fn default() -> Self {
        Self { split_ratio: 160.0, smoothing_sigma: 3.0 }
    }
}

fn center(x: i64, y: i64) -> Vec2 {
    Vec2::new(x as f64 + 0.5, y as f64 + 0.5)
}

/// Traces a binary skeleton (intensity >= 0.5) into polylines.
///
/// Traces start at endpoints in raster order, then at unvisited pixels next
/// to junctions, then around remaining loops. A junction pixel (three or
/// more neighbours) ends every trace that reaches it and belongs to the
/// first one. Leftover junction pixels are appended to an adjacent polyline
/// end. Isolated single pixels are dropped.
pub fn trace_contours(img: &ContourImage) -> Vec<RasterPolyline> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let m = Mask::from_vec(w, h, img.mask(0.4999));
    let idx = |x: i64, y: i64| y as usize * w + x as usize;
    let deg: Vec<usize> = (0..w * h)
        .map(|i| {
            let (x, y) = m.xy(i);
            if m.data[i] { m.neighbors(x, y) } else { 0 }
        })
        .collect();
    let mut visited = vec![false; w * h];
    let mut out: Vec<RasterPolyline> = Vec::new();

    // follows the skeleton from `start`, preferring 4-neighbours
    let trace = |start: usize, visited: &mut Vec<bool>| -> Vec<(i64, i64)> {
        let mut path = vec![m.xy(start)];
        visited[start] = true;
        if deg[start] >= 3 {
            return path;
        }
        loop {
            let (x, y) = *path.last().unwrap();
            let mut best: Option<(i64, i64)> = None;
            let mut junction: Option<(i64, i64)> = None;
            for k in [0, 2, 4, 6, 1, 3, 5, 7] {
                let (dx, dy) = RING[k];
                let (nx, ny) = (x + dx, y + dy);
                if !m.get(nx, ny) || visited[idx(nx, ny)] {
                    continue;
                }
                if deg[idx(nx, ny)] >= 3 {
                    junction.get_or_insert((nx, ny));
                } else {
                    best.get_or_insert((nx, ny));
                }
            }
            match (junction, best) {
                (Some(j), _) => {
                    visited[idx(j.0, j.1)] = true;
                    path.push(j);
                    return path;
                }
                (None, Some(b)) => {
                    visited[idx(b.0, b.1)] = true;
                    path.push(b);
                }
                (None, None) => return path,
            }
        }
    };

    let to_poly = |path: Vec<(i64, i64)>, closed: bool| RasterPolyline {
        points: path.into_iter().map(|(x, y)| center(x, y)).collect(),
        closed,
    };

    for i in 0..w * h {
        if m.data[i] && !visited[i] && deg[i] == 1 {
            let p = trace(i, &mut visited);
            if p.len() >= 2 {
                out.push(to_poly(p, false));
            } else {
                visited[i] = false;
            }
        }
    }
    for j in 0..w * h {
        if !(m.data[j] && deg[j] >= 3) {
            continue;
        }
        let (x, y) = m.xy(j);
        for (dx, dy) in RING {
            let (nx, ny) = (x + dx, y + dy);
            if m.get(nx, ny) && !visited[idx(nx, ny)] && deg[idx(nx, ny)] < 3 {
                let p = trace(idx(nx, ny), &mut visited);
                if p.len() >= 2 {
                    out.push(to_poly(p, false));
                } else {
                    visited[idx(nx, ny)] = false;
                }
            }
        }
    }
    for i in 0..w * h {
        if m.data[i] && !visited[i] && deg[i] == 2 {
            let p = trace(i, &mut visited);
            if p.len() < 2 {
                visited[i] = false;
                continue;
            }
            let (a, b) = (p[0], p[p.len() - 1]);
            let closed = p.len() >= 4 && (a.0 - b.0).abs() <= 1 && (a.1 - b.1).abs() <= 1;
            out.push(to_poly(p, closed));
        }
    }
    // leftover pixels (junction clusters, short stubs): attach to an adjacent
    // open polyline end, else start a polyline from them
    for i in 0..w * h {
        if !m.data[i] || visited[i] {
            continue;
        }
        let c = {
            let (x, y) = m.xy(i);
            center(x, y)
        };
        let adjacent = |p: Vec2| (p - c).amax() <= 1.0 + 1e-9;
        let mut attached = false;
        for poly in out.iter_mut().filter(|p| !p.closed) {
            if adjacent(*poly.points.last().unwrap()) {
                poly.points.push(c);
                attached = true;
            } else if adjacent(poly.points[0]) {
                poly.points.insert(0, c);
                attached = true;
            }
            if attached {
                break;
            }
        }
        if attached {
            visited[i] = true;
            continue;
        }
        let p = trace(i, &mut visited);
        if p.len() >= 2 {
            out.push(to_poly(p, false));
        } else {
            log::debug!("dropping isolated skeleton pixel {:?}", m.xy(i));
        }
    }
    out
}

fn smooth(points: &[Vec2], closed: bool, sigma: f64) -> Vec<Vec2> {
    let n = points.len();
    if sigma <= 0.0 || n < 3 {
        return points.to_vec();
    }
    let r = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    (0..n as i64)
        .map(|i| {
            let mut acc = Vec2::zeros();
            let mut wsum = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let j = i + k as i64 - r;
                let j = if closed {
                    j.rem_euclid(n as i64)
                } else if j < 0 || j >= n as i64 {
                    continue;
                } else {
                    j
                };
                acc += points[j as usize] * *w;
                wsum += w;
            }
            acc / wsum
        })
        .collect()
}

/// Signed curvature (1/px) per point, from finite differences of the
/// unwrapped tangent angle of the Gaussian-smoothed sequence. Polylines
/// with fewer than 5 points get all zeros.
pub fn local_curvature(poly: &RasterPolyline, params: &CornerParams) -> Vec<f64> {
    let n = poly.points.len();
    if n < 5 {
        return vec![0.0; n];
    }
    let closed = poly.closed;
    let s = smooth(&poly.points, closed, params.smoothing_sigma);
    let at = |i: i64| -> usize {
        if closed {
            i.rem_euclid(n as i64) as usize
        } else {
            i.clamp(0, n as i64 - 1) as usize
        }
    };
    // tangent angle of segment i -> i+1
    let segs = if closed { n } else { n - 1 };
    let mut angle = Vec::with_capacity(segs);
    let mut seglen = Vec::with_capacity(segs);
    for i in 0..segs {
        let d = s[at(i as i64 + 1)] - s[i];
        angle.push(d.y.atan2(d.x));
        seglen.push(d.norm());
    }
    let wrap = |a: f64| {
        let t = std::f64::consts::TAU;
        a - t * ((a + std::f64::consts::PI) / t).floor()
    };
    (0..n)
        .map(|i| {
            // turning between the segments entering and leaving point i
            let (a, b) = if closed {
                ((i + segs - 1) % segs, i)
            } else if i == 0 {
                (0, 1.min(segs - 1))
            } else if i == n - 1 {
                (segs - 2, segs - 1)
            } else {
                (i - 1, i)
            };
            let ds = 0.5 * (seglen[a] + seglen[b]);
            if ds < 1e-12 || a == b {
                0.0
            } else {
                wrap(angle[b] - angle[a]) / ds
            }
        })
        .collect()
}

/// Corner indices, sorted. Candidates are local maxima of |curvature|
/// (middle of a plateau); each is kept when it reaches
/// `(splitRatio / 100) / (L + 1) * sum |k|` over its region of support of
/// `L` points between the nearest minima on either side.
pub fn detect_corners(poly: &RasterPolyline, params: &CornerParams) -> Vec<usize> {
    let k = local_curvature(poly, params);
    detect_corners_from(&k, poly.closed, params.split_ratio)
}

const CANDIDATE_FLOOR: f64 = 1e-3;

pub fn detect_corners_from(curv: &[f64], closed: bool, split_ratio: f64) -> Vec<usize> {
    let n = curv.len();
    if n < 3 {
        return Vec::new();
    }
    let a: Vec<f64> = curv.iter().map(|v| v.abs()).collect();
    let step = |i: usize, fwd: bool| -> Option<usize> {
        if closed {
            Some(if fwd { (i + 1) % n } else { (i + n - 1) % n })
        } else if fwd {
            (i + 1 < n).then_some(i + 1)
        } else {
            i.checked_sub(1)
        }
    };
    let mut corners = Vec::new();
    let mut i = if closed { 0 } else { 1 };
    let last = if closed { n } else { n - 1 };
    while i < last {
        if a[i] <= CANDIDATE_FLOOR {
            i += 1;
            continue;
        }
        // extent of the plateau of equal values starting at i
        let mut j = i;
        while j + 1 < last && a[j + 1] == a[i] {
            j += 1;
        }
        if closed && j - i + 1 >= n {
            break;
        }
        let before = step(i, false).map(|p| a[p]);
        let after = step(j, true).map(|p| a[p]);
        let is_max = before.is_none_or(|b| b < a[i]) && after.is_none_or(|f| f < a[i]);
        if is_max {
            let cand = (i + j) / 2;
            // region of support: descend to the nearest minimum each side
            let mut l = 0;
            let mut sum = a[cand];
            let mut p = cand;
            while let Some(q) = step(p, false) {
                if a[q] > a[p] || l + 1 >= n {
                    break;
                }
                l += 1;
                sum += a[q];
                p = q;
            }
            let mut r = 0;
            let mut p = cand;
            while let Some(q) = step(p, true) {
                if a[q] > a[p] || l + r + 1 >= n {
                    break;
                }
                r += 1;
                sum += a[q];
                p = q;
            }
            let threshold = split_ratio / 100.0 / (l + r + 1) as f64 * sum;
            if a[cand] >= threshold && (closed || (cand > 0 && cand < n - 1)) {
                corners.push(cand);
            }
        }
        i = j + 1;
    }
    corners.sort_unstable();
    corners.dedup();
    corners
}

/// Splits at corner points, which end one piece and start the next. A
/// closed polyline with `k >= 1` corners yields `k` open pieces.
pub fn split_at_corners(poly: &RasterPolyline, corners: &[usize]) -> Vec<RasterPolyline> {
    let n = poly.points.len();
    if poly.closed {
        if corners.is_empty() {
            return vec![poly.clone()];
        }
        let k = corners.len();
        return (0..k)
            .map(|c| {
                let (a, b) = (corners[c], corners[(c + 1) % k]);
                let len = if b > a { b - a } else { b + n - a };
                RasterPolyline::open((0..=len).map(|t| poly.points[(a + t) % n]).collect())
            })
            .collect();
    }
    let mut cuts: Vec<usize> = corners.iter().copied().filter(|&c| c > 0 && c + 1 < n).collect();
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0;
    for c in cuts.into_iter().chain(std::iter::once(n - 1)) {
        out.push(RasterPolyline::open(poly.points[start..=c].to_vec()));
        start = c;
    }
    out
}

/// A split polyline, remembering which trace it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedPiece {
    pub trace: usize,
    pub polyline: RasterPolyline,
}

/// Trace, detect corners and split every polyline of a skeleton image.
pub fn vectorize(img: &ContourImage, params: &CornerParams) -> (Vec<RasterPolyline>, Vec<TracedPiece>) {
    let traces = trace_contours(img);
    let pieces = traces
        .iter()
        .enumerate()
        .flat_map(|(t, poly)| {
            let corners = detect_corners(poly, params);
            split_at_corners(poly, &corners)
                .into_iter()
                .map(move |polyline| TracedPiece { trace: t, polyline })
        })
        .collect();
    (traces, pieces)
}

/// Majority family of the tagged pixels a polyline passes through, ties
/// broken OC, SC, AR; untagged polylines count as OC.
pub fn polyline_family(img: &ContourImage, poly: &RasterPolyline) -> ContourFamily {
    let mut counts = [0usize; 3];
    for p in &poly.points {
        let (x, y) = (p.x.floor() as i64, p.y.floor() as i64);
        if x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 {
            continue;
        }
        let t = img.tags()[y as usize * img.width() as usize + x as usize];
        for (k, fam) in ContourFamily::ALL.iter().enumerate() {
            if t & fam.bit() != 0 {
                counts[k] += 1;
            }
        }
    }
    let best = (0..3).fold(0, |b, k| if counts[k] > counts[b] { k } else { b });
    ContourFamily::ALL[best]
}

/// JSON export: an array of `{points, closed}`.
pub fn polylines_to_json(polys: &[RasterPolyline]) -> serde_json::Result<String> {
    serde_json::to_string(polys)
}

pub fn polylines_from_json(s: &str) -> serde_json::Result<Vec<RasterPolyline>> {
    serde_json::from_str(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_of(pixels: &[(i64, i64)], w: u32, h: u32) -> ContourImage {
        let mut img = ContourImage::new(w, h);
        for &(x, y) in pixels {
            img.set(x as u32, y as u32, 1.0);
        }
        img
    }

    fn square(side: usize) -> RasterPolyline {
        let s = side as f64;
        let mut pts = Vec::new();
        for i in 0..side {
            pts.push(Vec2::new(i as f64, 0.0));
        }
        for i in 0..side {
            pts.push(Vec2::new(s, i as f64));
        }
        for i in 0..side {
            pts.push(Vec2::new(s - i as f64, s));
        }
        for i in 0..side {
            pts.push(Vec2::new(0.0, s - i as f64));
        }
        RasterPolyline { points: pts, closed: true }
    }

    fn circle(r: f64) -> RasterPolyline {
        let n = (std::f64::consts::TAU * r).round() as usize;
        let pts = (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                Vec2::new(r * t.cos(), r * t.sin())
            })
            .collect();
        RasterPolyline { points: pts, closed: true }
    }

    #[test]
    fn straight_line_traces_to_one_polyline() {
        let px: Vec<_> = (0..100).map(|x| (x + 5, 10)).collect();
        let t = trace_contours(&image_of(&px, 120, 20));
        assert_eq!(t.len(), 1);
        assert!(!t[0].closed);
        assert!((98..=102).contains(&t[0].len()));
    }

    #[test]
    fn pixel_circle_traces_closed() {
        let mut img = ContourImage::new(100, 100);
        for k in 0..2000 {
            let a = std::f64::consts::TAU * k as f64 / 2000.0;
            img.set((50.0 + 30.0 * a.cos()) as u32, (50.0 + 30.0 * a.sin()) as u32, 1.0);
        }
        let m = Mask::from_vec(100, 100, img.mask(0.5));
        let thin = crate::simplify::morph::thin(&m, crate::par::Execution::Sequential);
        let t = trace_contours(&ContourImage::from_mask(100, 100, &thin.data));
        assert_eq!(t.len(), 1);
        assert!(t[0].closed);
    }

    #[test]
    fn t_shape_gives_three_polylines() {
        let mut px: Vec<_> = (10..50).map(|x| (x, 10)).collect();
        px.extend((11..40).map(|y| (30, y)));
        let t = trace_contours(&image_of(&px, 60, 50));
        assert_eq!(t.len(), 3);
        let total: usize = t.iter().map(|p| p.len()).sum();
        assert_eq!(total, px.len());
        // every polyline ends at or beside the junction pixel
        let j = Vec2::new(30.5, 10.5);
        for p in &t {
            let near = |q: &Vec2| (q - j).amax() <= 1.0;
            assert!(near(&p.points[0]) || near(p.points.last().unwrap()));
        }
    }

    #[test]
    fn curvature_of_line_and_circle() {
        let line = RasterPolyline::open((0..50).map(|i| Vec2::new(i as f64, 0.5 * i as f64)).collect());
        assert!(local_curvature(&line, &CornerParams::default()).iter().all(|k| k.abs() < 1e-3));
        let c = circle(50.0);
        let k = local_curvature(&c, &CornerParams::default());
        assert!(k.iter().all(|k| (k.abs() - 0.02).abs() < 0.002), "{:?}", &k[..5]);
    }

    #[test]
    fn right_angle_peak_at_bend() {
        let mut pts: Vec<Vec2> = (0..30).map(|i| Vec2::new(i as f64, 0.0)).collect();
        pts.extend((1..30).map(|i| Vec2::new(29.0, i as f64)));
        let k = local_curvature(&RasterPolyline::open(pts), &CornerParams::default());
        let argmax = (0..k.len()).max_by(|&a, &b| k[a].abs().total_cmp(&k[b].abs())).unwrap();
        assert_eq!(argmax, 29);
    }

    #[test]
    fn square_and_circle_corners() {
        let p = CornerParams::default();
        let sq = square(40);
        assert_eq!(detect_corners(&sq, &p), vec![0, 40, 80, 120]);
        assert!(detect_corners(&circle(40.0), &p).is_empty());
        let line = RasterPolyline::open((0..60).map(|i| Vec2::new(i as f64, 3.0)).collect());
        assert!(detect_corners(&line, &p).is_empty());
    }

    #[test]
    fn split_arithmetic() {
        let open = RasterPolyline::open((0..100).map(|i| Vec2::new(i as f64, 0.0)).collect());
        assert_eq!(split_at_corners(&open, &[]), vec![open.clone()]);
        let parts = split_at_corners(&open, &[40]);
        assert_eq!(parts.iter().map(|p| p.len()).collect::<Vec<_>>(), vec![41, 60]);
        let sq = square(10);
        let sides = split_at_corners(&sq, &[0, 10, 20, 30]);
        assert_eq!(sides.len(), 4);
        assert!(sides.iter().all(|s| !s.closed && s.len() == 11));
    }

    #[test]
    fn json_shape() {
        let s = polylines_to_json(&[RasterPolyline::open(vec![Vec2::new(1.0, 2.0), Vec2::new(3.0, 4.0)])]).unwrap();
        assert_eq!(s, r#"[{"points":[[1.0,2.0],[3.0,4.0]],"closed":false}]"#);
        assert_eq!(polylines_from_json(&s).unwrap()[0].len(), 2);
    }
}
