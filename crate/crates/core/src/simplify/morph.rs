//! Binary raster morphology on row-major masks.

use crate::par::{self, Execution};

/// 8-neighbour offsets in clockwise order starting north:
/// N, NE, E, SE, S, SW, W, NW.
pub const RING: [(i64, i64); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width * height);
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.data[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: i64, y: i64, v: bool) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.data[y as usize * self.width + x as usize] = v;
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn xy(&self, idx: usize) -> (i64, i64) {
        ((idx % self.width) as i64, (idx / self.width) as i64)
    }

    /// The 8 neighbours of `(x, y)` in [`RING`] order.
    pub fn ring(&self, x: i64, y: i64) -> [bool; 8] {
        RING.map(|(dx, dy)| self.get(x + dx, y + dy))
    }

    pub fn neighbors(&self, x: i64, y: i64) -> usize {
        self.ring(x, y).iter().filter(|&&b| b).count()
    }

    /// 8-connected component labels (0 = background, components numbered
    /// from 1 in raster order of their first pixel) and their sizes.
    pub fn components(&self) -> (Vec<u32>, Vec<usize>) {
        let mut labels = vec![0u32; self.data.len()];
        let mut sizes = vec![0usize];
        let mut stack = Vec::new();
        for start in 0..self.data.len() {
            if !self.data[start] || labels[start] != 0 {
                continue;
            }
            let id = sizes.len() as u32;
            let mut size = 0;
            labels[start] = id;
            stack.push(start);
            while let Some(i) = stack.pop() {
                size += 1;
                let (x, y) = self.xy(i);
                for (dx, dy) in RING {
                    let (nx, ny) = (x + dx, y + dy);
                    if self.get(nx, ny) {
                        let j = ny as usize * self.width + nx as usize;
                        if labels[j] == 0 {
                            labels[j] = id;
                            stack.push(j);
                        }
                    }
                }
            }
            sizes.push(size);
        }
        (labels, sizes)
    }

    pub fn component_count(&self) -> usize {
        self.components().1.len() - 1
    }

    /// Pixels within Chebyshev distance `r`.
    pub fn dilate(&self, r: i64) -> Mask {
        let mut out = Mask::new(self.width, self.height);
        for (i, _) in self.data.iter().enumerate().filter(|(_, &b)| b) {
            let (x, y) = self.xy(i);
            for dy in -r..=r {
                for dx in -r..=r {
                    out.set(x + dx, y + dy, true);
                }
            }
        }
        out
    }
}

/// Separable Gaussian blur, kernel truncated at 3 sigma.
pub fn gaussian_blur(src: &[f32], width: usize, height: usize, sigma: f64, exec: Execution) -> Vec<f32> {
    if sigma <= 0.0 || width == 0 || height == 0 {
        return src.to_vec();
    }
    let r = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
    let mut tmp = vec![0f32; src.len()];
    par::for_each_row(exec, &mut tmp, width, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let sx = x as i64 + k as i64 - r;
                if sx >= 0 && (sx as usize) < width {
                    acc += w * src[y * width + sx as usize] as f64;
                }
            }
            *out = acc as f32;
        }
    });
    let mut dst = vec![0f32; src.len()];
    par::for_each_row(exec, &mut dst, width, |y, row| {
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let sy = y as i64 + k as i64 - r;
                if sy >= 0 && (sy as usize) < height {
                    acc += w * tmp[sy as usize * width + x] as f64;
                }
            }
            *out = acc as f32;
        }
    });
    dst
}

/// Number of 0 -> 1 transitions around the ring (Zhang-Suen `A(p)`).
fn transitions(r: &[bool; 8]) -> usize {
    (0..8).filter(|&k| !r[k] && r[(k + 1) % 8]).count()
}

/// Zhang-Suen thinning followed by staircase removal, leaving 1-px wide
/// 8-connected skeletons with the input topology.
pub fn thin(mask: &Mask, exec: Execution) -> Mask {
    let mut m = mask.clone();
    loop {
        let mut changed = false;
        for step in 0..2 {
            let w = m.width;
            let rows = par::map_range(exec, m.height, |y| {
                let mut del = Vec::new();
                for x in 0..w {
                    let (xi, yi) = (x as i64, y as i64);
                    if !m.get(xi, yi) {
                        continue;
                    }
                    let r = m.ring(xi, yi);
                    let b = r.iter().filter(|&&v| v).count();
                    if !(2..=6).contains(&b) || transitions(&r) != 1 {
                        continue;
                    }
                    let (n, e, s, wv) = (r[0], r[2], r[4], r[6]);
                    let ok = if step == 0 {
                        !(n && e && s) && !(e && s && wv)
                    } else {
                        !(n && e && wv) && !(n && s && wv)
                    };
                    if ok {
                        del.push(y * w + x);
                    }
                }
                del
            });
            for idx in rows.into_iter().flatten() {
                m.data[idx] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    remove_staircases(&mut m);
    regrow_ends(&mut m, mask);
    m
}

/// Thinning eats into line ends; extend each endpoint along its local
/// direction while it stays inside the original region.
fn regrow_ends(m: &mut Mask, region: &Mask) {
    let ends: Vec<usize> = (0..m.data.len())
        .filter(|&i| {
            let (x, y) = m.xy(i);
            m.data[i] && m.neighbors(x, y) == 1
        })
        .collect();
    for e in ends {
        // walk back a few pixels for a direction estimate
        let mut trail = vec![m.xy(e)];
        while trail.len() < 4 {
            let (x, y) = *trail.last().unwrap();
            let next = RING
                .iter()
                .map(|(dx, dy)| (x + dx, y + dy))
                .find(|&(nx, ny)| m.get(nx, ny) && !trail.contains(&(nx, ny)));
            match next {
                Some(p) if m.neighbors(p.0, p.1) <= 2 => trail.push(p),
                _ => break,
            }
        }
        if trail.len() < 3 {
            continue;
        }
        let (ex, ey) = trail[0];
        let (bx, by) = *trail.last().unwrap();
        let (dx, dy) = ((ex - bx) as f64, (ey - by) as f64);
        let len = dx.hypot(dy);
        let (dx, dy) = (dx / len, dy / len);
        let (mut tip, mut prev) = ((ex, ey), trail[1]);
        for step in 1.. {
            let p = (
                (ex as f64 + dx * step as f64).round() as i64,
                (ey as f64 + dy * step as f64).round() as i64,
            );
            if p == tip {
                continue;
            }
            if !region.get(p.0, p.1) || m.get(p.0, p.1) || (p.0 - tip.0).abs() > 1 || (p.1 - tip.1).abs() > 1 {
                break;
            }
            let touches_other = RING.iter().any(|(ox, oy)| {
                let q = (p.0 + ox, p.1 + oy);
                q != tip && q != prev && m.get(q.0, q.1)
            });
            if touches_other {
                break;
            }
            m.set(p.0, p.1, true);
            prev = tip;
            tip = p;
        }
    }
}

/// Deletes corner pixels of 4-connected staircases when their neighbours
/// stay connected without them.
fn remove_staircases(m: &mut Mask) {
    for idx in 0..m.data.len() {
        if !m.data[idx] {
            continue;
        }
        let (x, y) = m.xy(idx);
        let r = m.ring(x, y);
        let (n, e, s, w) = (r[0], r[2], r[4], r[6]);
        let corner = (n && e && !s && !w) || (e && s && !n && !w) || (s && w && !n && !e) || (w && n && !s && !e);
        if corner && ring_groups(&r) == 1 {
            m.data[idx] = false;
        }
    }
}

/// Number of 8-connected groups formed by the set neighbours themselves.
pub fn ring_groups(r: &[bool; 8]) -> usize {
    let mut seen = [false; 8];
    let mut groups = 0;
    for start in 0..8 {
        if !r[start] || seen[start] {
            continue;
        }
        groups += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(k) = stack.pop() {
            let (kx, ky) = RING[k];
            for j in 0..8 {
                let (jx, jy) = RING[j];
                if r[j] && !seen[j] && (kx - jx).abs() <= 1 && (ky - jy).abs() <= 1 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    groups
}

/// Removes skeleton branches that run from an endpoint to a junction in
/// fewer than `max_len` pixels. A junction pixel left as a one-pixel bump
/// is removed too when that keeps its neighbours connected.
pub fn prune_spurs(m: &mut Mask, max_len: usize) {
    if max_len == 0 {
        return;
    }
    let idx = |m: &Mask, x: i64, y: i64| y as usize * m.width + x as usize;
    let endpoints: Vec<usize> = (0..m.data.len())
        .filter(|&i| {
            let (x, y) = m.xy(i);
            m.data[i] && m.neighbors(x, y) == 1
        })
        .collect();
    let mut removals = Vec::new();
    let mut junctions = Vec::new();
    for &e in &endpoints {
        let mut path = vec![e];
        let mut cur = e;
        loop {
            let (x, y) = m.xy(cur);
            let cand: Vec<usize> = RING
                .iter()
                .filter(|(dx, dy)| m.get(x + dx, y + dy))
                .map(|(dx, dy)| idx(m, x + dx, y + dy))
                .filter(|j| !path.contains(j))
                .collect();
            if cand.is_empty() {
                break;
            }
            let junction = cand.iter().find(|&&j| {
                let (jx, jy) = m.xy(j);
                m.neighbors(jx, jy) >= 3
            });
            if let Some(&j) = junction {
                if path.len() < max_len {
                    removals.extend(path.iter().copied());
                    junctions.push(j);
                }
                break;
            }
            if cand.len() > 1 || path.len() >= max_len {
                break;
            }
            cur = cand[0];
            path.push(cur);
        }
    }
    for i in removals {
        m.data[i] = false;
    }
    for j in junctions {
        let (x, y) = m.xy(j);
        if m.data[j] && m.neighbors(x, y) >= 2 && ring_groups(&m.ring(x, y)) == 1 {
            m.data[j] = false;
        }
    }
}

/// Pixels on the digital segment from `a` to `b` (Bresenham).
pub fn line_pixels(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x0, mut y0) = a;
    let dx = (b.0 - x0).abs();
    let dy = -(b.1 - y0).abs();
    let sx = if x0 < b.0 { 1 } else { -1 };
    let sy = if y0 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::new();
    loop {
        out.push((x0, y0));
        if x0 == b.0 && y0 == b.1 {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// Joins endpoints of different components lying within `radius`, closest
/// pairs first. Returns the number of bridges drawn.
pub fn bridge_gaps(m: &mut Mask, radius: f64) -> usize {
    if radius <= 0.0 {
        return 0;
    }
    let (labels, sizes) = m.components();
    let endpoints: Vec<(i64, i64)> = (0..m.data.len())
        .filter(|&i| m.data[i])
        .map(|i| m.xy(i))
        .filter(|&(x, y)| m.neighbors(x, y) <= 1)
        .collect();
    let mut pairs = Vec::new();
    for i in 0..endpoints.len() {
        for j in i + 1..endpoints.len() {
            let (a, b) = (endpoints[i], endpoints[j]);
            let d = (((a.0 - b.0).pow(2) + (a.1 - b.1).pow(2)) as f64).sqrt();
            if d <= radius {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    // union-find over component labels
    let mut parent: Vec<usize> = (0..sizes.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let label = |p: (i64, i64)| labels[p.1 as usize * m.width + p.0 as usize] as usize;
    let mut used = vec![false; endpoints.len()];
    let mut bridges = Vec::new();
    for (_, i, j) in pairs {
        if used[i] || used[j] {
            continue;
        }
        let (ra, rb) = (find(&mut parent, label(endpoints[i])), find(&mut parent, label(endpoints[j])));
        if ra == rb {
            continue;
        }
        parent[ra] = rb;
        used[i] = true;
        used[j] = true;
        bridges.push((endpoints[i], endpoints[j]));
    }
    for &(a, b) in &bridges {
        for (x, y) in line_pixels(a, b) {
            m.set(x, y, true);
        }
    }
    bridges.len()
}

/// Clears components with fewer than `min_area` pixels.
pub fn remove_small_components(m: &mut Mask, min_area: usize) {
    let (labels, sizes) = m.components();
    for (i, &l) in labels.iter().enumerate() {
        if l != 0 && sizes[l as usize] < min_area {
            m.data[i] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Mask {
        let mut m = Mask::new(w, h);
        for y in y0..y1 {
            for x in x0..x1 {
                m.set(x as i64, y as i64, true);
            }
        }
        m
    }

    fn no_2x2_blocks(m: &Mask) -> bool {
        (0..m.height as i64).all(|y| {
            (0..m.width as i64).all(|x| !(m.get(x, y) && m.get(x + 1, y) && m.get(x, y + 1) && m.get(x + 1, y + 1)))
        })
    }

    #[test]
    fn thick_bar_thins_to_line() {
        let m = rect(60, 20, 5, 8, 55, 11);
        let t = thin(&m, Execution::Sequential);
        assert_eq!(t.component_count(), 1);
        assert!(no_2x2_blocks(&t));
        assert!((t.count() as i64 - 50).abs() <= 2, "{}", t.count());
    }

    #[test]
    fn thinning_keeps_ring_topology() {
        let mut m = rect(40, 40, 5, 5, 35, 35);
        for y in 10..30 {
            for x in 10..30 {
                m.set(x, y, false);
            }
        }
        let t = thin(&m, Execution::Parallel);
        assert_eq!(t.component_count(), 1);
        assert!(no_2x2_blocks(&t));
        // the hole survives: background is still split in two
        let mut bg: Vec<bool> = t.data.iter().map(|b| !b).collect();
        let mut regions = 0;
        for start in 0..bg.len() {
            if !bg[start] {
                continue;
            }
            regions += 1;
            let mut stack = vec![start];
            bg[start] = false;
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % 40) as i64, (i / 40) as i64);
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let (nx, ny) = (x + dx, y + dy);
                    if (0..40).contains(&nx) && (0..40).contains(&ny) && bg[(ny * 40 + nx) as usize] {
                        bg[(ny * 40 + nx) as usize] = false;
                        stack.push((ny * 40 + nx) as usize);
                    }
                }
            }
        }
        assert_eq!(regions, 2);
    }

    #[test]
    fn spur_is_pruned() {
        let mut m = rect(50, 30, 5, 15, 45, 16);
        for y in 10..15 {
            m.set(25, y, true);
        }
        prune_spurs(&mut m, 8);
        assert_eq!(m.count(), 40);
    }

    #[test]
    fn gap_is_bridged() {
        let mut m = rect(60, 10, 5, 5, 25, 6);
        for x in 28..50 {
            m.set(x, 5, true);
        }
        assert_eq!(bridge_gaps(&mut m, 5.0), 1);
        assert_eq!(m.component_count(), 1);
    }

    #[test]
    fn blur_preserves_mass_in_the_interior() {
        let mut src = vec![0f32; 31 * 31];
        src[15 * 31 + 15] = 1.0;
        let out = gaussian_blur(&src, 31, 31, 1.5, Execution::Parallel);
        let sum: f32 = out.iter().sum();
        assert!((sum - 1.0).abs() < 1e-5);
        assert_eq!(out, gaussian_blur(&src, 31, 31, 1.5, Execution::Sequential));
    }
}
