//! Clamped uniform cubic B-splines on `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::geom::Vec2;

pub const DEGREE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BSplineCurve {
    pub control_points: Vec<Vec2>,
    pub degree: usize,
    pub knots: Vec<f64>,
}

/// `m + 4` knots: four zeros, `m - 4` uniform interior knots, four ones.
pub fn clamped_uniform_knots(m: usize) -> Vec<f64> {
    assert!(m > DEGREE, "need at least 4 control points");
    let spans = m - DEGREE;
    let mut k = vec![0.0; DEGREE + 1];
    k.extend((1..spans).map(|i| i as f64 / spans as f64));
    k.extend(std::iter::repeat_n(1.0, DEGREE + 1));
    k
}

/// Basis values and derivatives at one parameter: the four non-zero
/// functions start at index `first`.
#[derive(Debug, Clone, Copy)]
pub struct BasisEval {
    pub first: usize,
    pub n: [[f64; 4]; 3],
}

impl BSplineCurve {
    pub fn new(control_points: Vec<Vec2>) -> Self {
        let knots = clamped_uniform_knots(control_points.len());
        Self { control_points, degree: DEGREE, knots }
    }

    pub fn len(&self) -> usize {
        self.control_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.control_points.is_empty()
    }

    pub fn spans(&self) -> usize {
        self.len() - DEGREE
    }

    /// Knot span index `s` with `knots[s] <= t < knots[s + 1]`.
    fn span(&self, t: f64) -> usize {
        let m = self.len();
        if t >= self.knots[m] {
            return m - 1;
        }
        if t <= self.knots[DEGREE] {
            return DEGREE;
        }
        let mut lo = DEGREE;
        let mut hi = m;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Non-zero basis functions and their first two derivatives.
    pub fn basis(&self, t: f64) -> BasisEval {
        let t = t.clamp(0.0, 1.0);
        let s = self.span(t);
        let u = &self.knots;
        let p = DEGREE;
        // triangular table of basis values (ndu) per the standard algorithm
        let mut ndu = [[0.0f64; 4]; 4];
        let mut left = [0.0; 4];
        let mut right = [0.0; 4];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = t - u[s + 1 - j];
            right[j] = u[s + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = [[0.0; 4]; 3];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = [[0.0f64; 4]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=2usize {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = p as f64;
        for row in ders.iter_mut().skip(1) {
            for v in row.iter_mut() {
                *v *= fac;
            }
            fac *= (p - 1) as f64;
        }
        BasisEval { first: s - p, n: ders }
    }

    fn combine(&self, b: &BasisEval, order: usize) -> Vec2 {
        (0..4).fold(Vec2::zeros(), |acc, j| acc + self.control_points[b.first + j] * b.n[order][j])
    }

    pub fn eval(&self, t: f64) -> Vec2 {
        self.combine(&self.basis(t), 0)
    }

    /// Point, first and second derivative.
    pub fn eval_all(&self, t: f64) -> [Vec2; 3] {
        let b = self.basis(t);
        [self.combine(&b, 0), self.combine(&b, 1), self.combine(&b, 2)]
    }

    /// Polyline through `n` uniformly spaced parameters.
    pub fn polyline(&self, n: usize) -> Vec<Vec2> {
        (0..n).map(|i| self.eval(i as f64 / (n - 1).max(1) as f64)).collect()
    }

    /// Arc length from Gauss-Legendre quadrature on every knot span.
    pub fn arc_length(&self) -> f64 {
        let spans = self.spans();
        let mut total = 0.0;
        for s in 0..spans {
            let (a, b) = (s as f64 / spans as f64, (s + 1) as f64 / spans as f64);
            total += gauss_legendre(a, b, 16, |t| self.eval_all(t)[1].norm());
        }
        total
    }

    /// Closest parameter to `x` and the squared distance there.
    pub fn foot_point(&self, x: Vec2) -> (f64, f64) {
        self.refine_foot(&self.foot_grid(), x)
    }

    /// [`Self::foot_point`] for many points, sharing the coarse search grid.
    pub fn foot_points(&self, xs: &[Vec2]) -> Vec<(f64, f64)> {
        let grid = self.foot_grid();
        xs.iter().map(|&x| self.refine_foot(&grid, x)).collect()
    }

    fn foot_grid(&self) -> Vec<Vec2> {
        let samples = 16 * self.spans();
        (0..=samples).map(|i| self.eval(i as f64 / samples as f64)).collect()
    }

    /// Newton refinement from every local minimum of the distance over the
    /// grid; the best refined point wins.
    fn refine_foot(&self, grid: &[Vec2], x: Vec2) -> (f64, f64) {
        let samples = grid.len() - 1;
        let mut best = (0.0, f64::INFINITY);
        let dist = |t: f64| (self.eval(t) - x).norm_squared();
        let vals: Vec<f64> = grid.iter().map(|p| (p - x).norm_squared()).collect();
        let h = 1.0 / samples as f64;
        for i in 0..=samples {
            let l = if i > 0 { vals[i - 1] } else { f64::INFINITY };
            let r = if i < samples { vals[i + 1] } else { f64::INFINITY };
            if !(vals[i] <= l && vals[i] <= r) {
                continue;
            }
            let t0 = i as f64 * h;
            let (lo, hi) = ((t0 - h).max(0.0), (t0 + h).min(1.0));
            let mut t = t0;
            for _ in 0..50 {
                let [c, d1, d2] = self.eval_all(t);
                let r = c - x;
                let g = r.dot(&d1);
                let hss = d1.dot(&d1) + r.dot(&d2);
                let step = if hss > 0.0 { g / hss } else { g.signum() * h * 0.1 };
                let next = (t - step).clamp(lo, hi);
                if (next - t).abs() < 1e-15 {
                    t = next;
                    break;
                }
                t = next;
            }
            let d = dist(t);
            if d < best.1 {
                best = (t, d);
            }
        }
        best
    }
}

/// Gauss-Legendre quadrature with `n` in {4, 16} nodes.
pub fn gauss_legendre(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights): (&[f64], &[f64]) = match n {
        4 => (&GL4_X, &GL4_W),
        _ => (&GL16_X, &GL16_W),
    };
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * (f(mid + half * x) + f(mid - half * x));
    }
    acc * half
}

// positive half of the symmetric node sets
const GL4_X: [f64; 2] = [0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GL4_W: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
const GL16_X: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003,
    0.865_631_202_387_831_8,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL16_W: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_533_9,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_09,
];

/// Gram matrices `M[i][j] = integral of N_i^(d) N_j^(d)` over `[0, 1]` for
/// derivative orders 1 and 2.
pub fn derivative_gram(m: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let curve = BSplineCurve::new(vec![Vec2::zeros(); m]);
    let spans = curve.spans();
    let mut g1 = vec![vec![0.0; m]; m];
    let mut g2 = vec![vec![0.0; m]; m];
    for s in 0..spans {
        let (a, b) = (s as f64 / spans as f64, (s + 1) as f64 / spans as f64);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w) in GL4_X.iter().zip(&GL4_W) {
            for t in [mid + half * x, mid - half * x] {
                let be = curve.basis(t);
                for i in 0..4 {
                    for j in 0..4 {
                        g1[be.first + i][be.first + j] += w * half * be.n[1][i] * be.n[1][j];
                        g2[be.first + i][be.first + j] += w * half * be.n[2][i] * be.n[2][j];
                    }
                }
            }
        }
    }
    (g1, g2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_curve() -> BSplineCurve {
        BSplineCurve::new(
            [(0.0, 0.0), (10.0, 25.0), (30.0, -5.0), (45.0, 20.0), (60.0, 0.0), (80.0, 10.0)]
                .iter()
                .map(|&(x, y)| Vec2::new(x, y))
                .collect(),
        )
    }

    #[test]
    fn knots_are_clamped() {
        assert_eq!(clamped_uniform_knots(4), vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(clamped_uniform_knots(6)[4..6], [1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn partition_of_unity_and_end_interpolation() {
        let c = sample_curve();
        for i in 0..=100 {
            let b = c.basis(i as f64 / 100.0);
            assert!((b.n[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(b.n[1].iter().sum::<f64>().abs() < 1e-9);
            assert!(b.n[2].iter().sum::<f64>().abs() < 1e-8);
        }
        assert!((c.eval(0.0) - c.control_points[0]).norm() < 1e-12);
        assert!((c.eval(1.0) - c.control_points[5]).norm() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let c = sample_curve();
        let h = 1e-6;
        for &t in &[0.05, 0.3, 0.5, 0.77, 0.95] {
            let [_, d1, d2] = c.eval_all(t);
            let fd1 = (c.eval(t + h) - c.eval(t - h)) / (2.0 * h);
            let fd2 = (c.eval_all(t + h)[1] - c.eval_all(t - h)[1]) / (2.0 * h);
            assert!((d1 - fd1).norm() < 1e-5 * d1.norm().max(1.0));
            assert!((d2 - fd2).norm() < 1e-4 * d2.norm().max(1.0));
        }
    }

    #[test]
    fn foot_point_of_curve_point() {
        let c = sample_curve();
        for &t in &[0.0, 0.21, 0.5, 0.93, 1.0] {
            let (tf, d2) = c.foot_point(c.eval(t));
            assert!(d2 < 1e-18, "{d2}");
            assert!((tf - t).abs() < 1e-6);
        }
    }

    #[test]
    fn straight_line_arc_length() {
        let c = BSplineCurve::new((0..5).map(|i| Vec2::new(25.0 * i as f64, 0.0)).collect());
        assert!((c.arc_length() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn gram_of_linear_parameterization() {
        // with collinear, evenly spaced control points C'(t) is not constant
        // for clamped knots, but the gram matrix still gives the exact integral
        let c = sample_curve();
        let (g1, _) = derivative_gram(c.len());
        let mut quad = 0.0;
        for i in 0..c.len() {
            for j in 0..c.len() {
                quad += g1[i][j] * c.control_points[i].dot(&c.control_points[j]);
            }
        }
        let direct: f64 = (0..c.spans())
            .map(|s| {
                let (a, b) = (s as f64 / 3.0, (s + 1) as f64 / 3.0);
                gauss_legendre(a, b, 16, |t| c.eval_all(t)[1].norm_squared())
            })
            .sum();
        assert!((quad - direct).abs() < 1e-8 * direct);
    }
}
