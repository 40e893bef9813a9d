//! Angle of contingence at turning points, and recovery of a drawn
//! stroke's centreline from the canvas.

use serde::{Deserialize, Serialize};

use super::{CanvasRaster, SimError};
use crate::contours::ContourImage;
use crate::geom::Vec2;
use crate::par::Execution;
use crate::simplify::morph::{prune_spurs, thin, Mask};
use crate::vectorize::trace_contours;

pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TurningPointMetric {
    pub indices: Vec<usize>,
    /// Degrees, per turning point.
    pub theta: Vec<f64>,
    pub reference: Vec<f64>,
    /// Turning points whose window was collinear.
    pub flagged: Vec<bool>,
    pub mean_abs_error: f64,
}

/// Interior angle at `k` between the chords to the samples `window` steps
/// back and ahead, in degrees. A straight window reads 180 and is flagged.
pub fn angle_of_contingence(samples: &[Vec2], k: usize, window: usize) -> Result<(f64, bool), SimError> {
    if window == 0 || k < window || k + window >= samples.len() {
        return Err(SimError::TurningPoint(k));
    }
    let a = samples[k - window] - samples[k];
    let b = samples[k + window] - samples[k];
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(SimError::TurningPoint(k));
    }
    let cos = (a.dot(&b) / (na * nb)).clamp(-1.0, 1.0);
    let theta = cos.acos().to_degrees();
    let flagged = 180.0 - theta < 1e-6;
    Ok((if flagged { 180.0 } else { theta }, flagged))
}

pub fn turning_point_metric(samples: &[Vec2], indices: &[usize], reference: &[f64], window: usize) -> Result<TurningPointMetric, SimError> {
    assert_eq!(indices.len(), reference.len());
    let mut theta = Vec::with_capacity(indices.len());
    let mut flagged = Vec::with_capacity(indices.len());
    for &k in indices {
        let (t, f) = angle_of_contingence(samples, k, window)?;
        theta.push(t);
        flagged.push(f);
    }
    let mean_abs_error = if theta.is_empty() {
        0.0
    } else {
        theta.iter().zip(reference).map(|(t, r)| (t - r).abs()).sum::<f64>() / theta.len() as f64
    };
    Ok(TurningPointMetric { indices: indices.to_vec(), theta, reference: reference.to_vec(), flagged, mean_abs_error })
}

/// Index of the sample nearest to each of `points`.
pub fn nearest_indices(samples: &[Vec2], points: &[Vec2]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            (0..samples.len())
                .min_by(|&a, &b| (samples[a] - p).norm_squared().total_cmp(&(samples[b] - p).norm_squared()))
                .unwrap_or(0)
        })
        .collect()
}

/// Inked pixels (density above this) belong to a stroke.
const INK: f32 = 0.05;
/// Blobs smaller than this many pixels are specks, not strokes.
const SPECK: usize = 20;

/// Skeleton of the single stroke on `canvas` as robot-frame points, ordered
/// to start at the end nearest `start` when given.
pub fn extract_drawn_centerline(canvas: &CanvasRaster, start: Option<Vec2>) -> Result<Vec<Vec2>, SimError> {
    let mut mask = Mask::from_vec(canvas.width, canvas.height, canvas.density.iter().map(|&d| d > INK).collect());
    let (labels, sizes) = mask.components();
    let strokes = sizes.iter().filter(|&&s| s >= SPECK).count();
    match strokes {
        0 => return Err(SimError::EmptyCanvas),
        1 => {}
        n => return Err(SimError::MultipleStrokes(n)),
    }
    for (i, v) in mask.data.iter_mut().enumerate() {
        if *v && sizes[labels[i] as usize] < SPECK {
            *v = false;
        }
    }
    let area = mask.count();
    let mut skel = thin(&mask, Execution::Sequential);
    // spurs reach at most about half the stroke width
    let half_width = (area as f64 / skel.count().max(1) as f64).ceil() as usize;
    prune_spurs(&mut skel, half_width.max(3));
    let img = ContourImage::from_mask(canvas.width as u32, canvas.height as u32, &skel.data);
    let longest = trace_contours(&img)
        .into_iter()
        .max_by(|a, b| a.length().total_cmp(&b.length()))
        .ok_or(SimError::EmptyCanvas)?;
    let mut pts: Vec<Vec2> = longest.points.iter().map(|p| canvas.to_mm(p.x, p.y)).collect();
    if let (Some(s), Some(first), Some(last)) = (start, pts.first().copied(), pts.last().copied()) {
        if (last - s).norm() < (first - s).norm() {
            pts.reverse();
        }
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_angle_and_straight() {
        let pts: Vec<Vec2> = (0..6).map(|i| Vec2::new(i as f64, 0.0)).chain((1..6).map(|i| Vec2::new(5.0, i as f64))).collect();
        let (t, f) = angle_of_contingence(&pts, 5, 5).unwrap();
        assert!((t - 90.0).abs() < 1e-9 && !f);
        let line: Vec<Vec2> = (0..11).map(|i| Vec2::new(i as f64, 2.0 * i as f64)).collect();
        assert_eq!(angle_of_contingence(&line, 5, 5).unwrap(), (180.0, true));
        assert!(angle_of_contingence(&line, 2, 5).is_err());
    }

    fn canvas_with(rects: &[(usize, usize, usize, usize)]) -> CanvasRaster {
        let (w, h) = (200, 100);
        let mut density = vec![0.0; w * h];
        for &(x0, y0, x1, y1) in rects {
            for y in y0..y1 {
                for x in x0..x1 {
                    density[y * w + x] = 1.0;
                }
            }
        }
        CanvasRaster { px_per_mm: 10.0, origin: [0.0, 0.0], width: w, height: h, density }
    }

    #[test]
    fn straight_centerline() {
        let c = canvas_with(&[(20, 40, 180, 52)]);
        let line = extract_drawn_centerline(&c, Some(Vec2::new(5.0, 19.0))).unwrap();
        assert!(line.len() > 100);
        // columns run along robot y; all points share robot x within 1 px
        let x0 = line[0].x;
        assert!(line.iter().all(|p| (p.x - x0).abs() <= 0.1 + 1e-9));
        assert!(line.last().unwrap().y < line[0].y);
    }

    #[test]
    fn rejects_empty_and_double() {
        assert!(matches!(extract_drawn_centerline(&canvas_with(&[]), None), Err(SimError::EmptyCanvas)));
        let two = canvas_with(&[(10, 10, 90, 20), (10, 60, 90, 70)]);
        assert!(matches!(extract_drawn_centerline(&two, None), Err(SimError::MultipleStrokes(2))));
    }
}
