//! The editable stroke document: contour candidates, selected strokes and
//! an undoable op log.
//!
//! Every mutation goes through [`StrokeDocument::apply`], which appends the
//! op to the log. The current state is always the result of replaying the
//! log over the initial state, which is how [`StrokeDocument::undo`] works.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contours::{ContourFamily, ContourImage, Viewpoint};
use crate::geom::{bounds2, Vec2};
use crate::vectorize::{detect_corners, polyline_family, split_at_corners, trace_contours, CornerParams, RasterPolyline};

pub const DEFAULT_MERGE_RADIUS: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrokeSource {
    Picked,
    Inserted,
    Merged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StyleHint {
    Noutan,
    Kasure,
    #[default]
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EditableStroke {
    pub id: u64,
    pub points: Vec<Vec2>,
    pub source: StrokeSource,
    pub style_hint: StyleHint,
    /// Candidate this stroke was picked from, while it still exists.
    pub candidate: Option<usize>,
    /// A picked stroke whose candidate vanished after a resplit.
    pub stale: bool,
}

/// An unsplit trace of the skeleton with its contour family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub polyline: RasterPolyline,
    pub family: ContourFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Candidate {
    pub polyline: RasterPolyline,
    pub family: ContourFamily,
    pub trace: usize,
    /// Piece of the outside occluding contour.
    pub outer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DocParams {
    /// Corner split ratio.
    pub mu: f64,
    pub smoothing_sigma: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for DocParams {
    fn default() -> Self {
        Self { mu: 160.0, smoothing_sigma: 3.0, t_min: 4.0, t_max: 25.0 }
    }
}

impl DocParams {
    pub fn corner_params(&self) -> CornerParams {
        CornerParams { split_ratio: self.mu, smoothing_sigma: self.smoothing_sigma }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase")]
pub enum EditOp {
    Pick { candidate: usize },
    Delete { id: u64 },
    Merge { a: u64, b: u64 },
    Insert { points: Vec<Vec2> },
    #[serde(rename_all = "camelCase")]
    Resplit { mu: f64 },
    #[serde(rename_all = "camelCase")]
    SetThickness { t_min: f64, t_max: f64 },
    SetStyle { id: u64, style: StyleHint },
    /// Picks every unpicked candidate at least `minLength` px long.
    #[serde(rename_all = "camelCase")]
    PickAll { min_length: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum EditError {
    #[error("no candidate {0}")]
    UnknownCandidate(usize),
    #[error("no stroke with id {0}")]
    UnknownStroke(u64),
    #[error("closest endpoints are {distance:.1} px apart, merge radius is {radius} px")]
    TooFar { distance: f64, radius: f64 },
    #[error("cannot merge a stroke with itself")]
    SelfMerge,
    #[error("a stroke needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("point ({0:.1}, {1:.1}) is outside the {2}x{3} image")]
    OutOfBounds(f64, f64, u32, u32),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("document history does not replay to its state")]
    Corrupt,
}

/// What [`StrokeDocument::apply`] did.
#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    Changed,
    /// Valid request that leaves the document unchanged; not logged.
    Unchanged(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DocState {
    pub params: DocParams,
    pub candidates: Vec<Candidate>,
    pub selected: Vec<EditableStroke>,
    pub next_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StrokeDocument {
    pub view_ref: Viewpoint,
    pub model_ref: String,
    pub width: u32,
    pub height: u32,
    pub merge_radius: f64,
    pub traces: Vec<Trace>,
    pub outer_trace: Option<usize>,
    initial: DocState,
    state: DocState,
    log: Vec<EditOp>,
}

fn split_traces(traces: &[Trace], outer: Option<usize>, params: &DocParams) -> Vec<Candidate> {
    let cp = params.corner_params();
    traces
        .iter()
        .enumerate()
        .flat_map(|(t, tr)| {
            let corners = detect_corners(&tr.polyline, &cp);
            split_at_corners(&tr.polyline, &corners).into_iter().map(move |polyline| Candidate {
                polyline,
                family: tr.family,
                trace: t,
                outer: Some(t) == outer,
            })
        })
        .collect()
}

fn bbox_area(points: &[Vec2]) -> f64 {
    bounds2(points.iter().copied()).map_or(0.0, |(lo, hi)| (hi.x - lo.x) * (hi.y - lo.y))
}

impl StrokeDocument {
    /// Builds a document from traced polylines; the pieces of the outside
    /// occluding contour (the OC trace with the largest bounding box) start
    /// out selected.
    pub fn new(
        view_ref: Viewpoint,
        model_ref: impl Into<String>,
        width: u32,
        height: u32,
        traces: Vec<Trace>,
        params: DocParams,
    ) -> Result<Self, EditError> {
        validate_params(&params)?;
        let outer_trace = traces
            .iter()
            .enumerate()
            .filter(|(_, t)| t.family == ContourFamily::Oc)
            .map(|(i, t)| (i, bbox_area(&t.polyline.points)))
            .fold(None, |best: Option<(usize, f64)>, (i, a)| match best {
                Some((_, b)) if b >= a => best,
                _ => Some((i, a)),
            })
            .map(|(i, _)| i);
        let candidates = split_traces(&traces, outer_trace, &params);
        let mut state = DocState { params, candidates, selected: Vec::new(), next_id: 1 };
        for c in 0..state.candidates.len() {
            if state.candidates[c].outer {
                pick(&mut state, c);
            }
        }
        Ok(Self {
            view_ref,
            model_ref: model_ref.into(),
            width,
            height,
            merge_radius: DEFAULT_MERGE_RADIUS,
            traces,
            outer_trace,
            initial: state.clone(),
            state,
            log: Vec::new(),
        })
    }

    /// Traces a simplified skeleton image, tagging each trace with the
    /// majority family of its pixels.
    pub fn from_skeleton(
        img: &ContourImage,
        view_ref: Viewpoint,
        model_ref: impl Into<String>,
        params: DocParams,
    ) -> Result<Self, EditError> {
        let traces = trace_contours(img)
            .into_iter()
            .map(|polyline| Trace { family: polyline_family(img, &polyline), polyline })
            .collect();
        Self::new(view_ref, model_ref, img.width(), img.height(), traces, params)
    }

    pub fn params(&self) -> &DocParams {
        &self.state.params
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.state.candidates
    }

    pub fn selected(&self) -> &[EditableStroke] {
        &self.state.selected
    }

    pub fn stroke(&self, id: u64) -> Option<&EditableStroke> {
        self.state.selected.iter().find(|s| s.id == id)
    }

    pub fn state(&self) -> &DocState {
        &self.state
    }

    pub fn log(&self) -> &[EditOp] {
        &self.log
    }

    /// Number of logged ops; doubles as a revision number.
    pub fn revision(&self) -> u64 {
        self.log.len() as u64
    }

    pub fn apply(&mut self, op: EditOp) -> Result<Applied, EditError> {
        let ctx = Ctx { width: self.width, height: self.height, merge_radius: self.merge_radius, traces: &self.traces, outer: self.outer_trace };
        let out = apply_op(&mut self.state, &op, &ctx)?;
        if out == Applied::Changed {
            self.log.push(op);
        } else if let Applied::Unchanged(msg) = &out {
            log::warn!("{msg}");
        }
        Ok(out)
    }

    /// Drops the last op and rebuilds the state from the log.
    pub fn undo(&mut self) -> Result<(), EditError> {
        if self.log.pop().is_none() {
            return Err(EditError::NothingToUndo);
        }
        self.state = self.replay()?;
        Ok(())
    }

    /// State obtained by replaying the log over the initial state.
    pub fn replay(&self) -> Result<DocState, EditError> {
        let ctx = Ctx { width: self.width, height: self.height, merge_radius: self.merge_radius, traces: &self.traces, outer: self.outer_trace };
        let mut s = self.initial.clone();
        for op in &self.log {
            apply_op(&mut s, op, &ctx)?;
        }
        Ok(s)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// Parses a document and checks that its log replays to its state.
    pub fn from_json(s: &str) -> Result<Self, DocumentLoadError> {
        let doc: Self = serde_json::from_str(s)?;
        if doc.replay()? != doc.state {
            return Err(EditError::Corrupt.into());
        }
        Ok(doc)
    }
}

#[derive(Debug, Error)]
pub enum DocumentLoadError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Edit(#[from] EditError),
}

struct Ctx<'a> {
    width: u32,
    height: u32,
    merge_radius: f64,
    traces: &'a [Trace],
    outer: Option<usize>,
}

fn validate_params(p: &DocParams) -> Result<(), EditError> {
    if !(p.mu > 0.0) {
        return Err(EditError::InvalidParam(format!("mu must be positive, got {}", p.mu)));
    }
    if !(p.t_min > 0.0 && p.t_min <= p.t_max) {
        return Err(EditError::InvalidParam(format!("need 0 < tMin <= tMax, got {} and {}", p.t_min, p.t_max)));
    }
    Ok(())
}

fn is_picked(s: &DocState, c: usize) -> bool {
    s.selected.iter().any(|st| st.candidate == Some(c))
}

fn pick(s: &mut DocState, c: usize) {
    let id = s.next_id;
    s.next_id += 1;
    s.selected.push(EditableStroke {
        id,
        points: closed_path(&s.candidates[c].polyline),
        source: StrokeSource::Picked,
        style_hint: StyleHint::Plain,
        candidate: Some(c),
        stale: false,
    });
}

fn position(s: &DocState, id: u64) -> Result<usize, EditError> {
    s.selected.iter().position(|st| st.id == id).ok_or(EditError::UnknownStroke(id))
}

/// Points of a candidate as a stroke path; closed candidates repeat their
/// first point so the drawn stroke closes.
fn closed_path(p: &RasterPolyline) -> Vec<Vec2> {
    let mut pts = p.points.clone();
    if p.closed && pts.len() > 2 {
        pts.push(pts[0]);
    }
    pts
}

fn apply_op(s: &mut DocState, op: &EditOp, ctx: &Ctx) -> Result<Applied, EditError> {
    match op {
        EditOp::Pick { candidate } => {
            let c = *candidate;
            if c >= s.candidates.len() {
                return Err(EditError::UnknownCandidate(c));
            }
            if is_picked(s, c) {
                return Ok(Applied::Unchanged(format!("candidate {c} is already picked")));
            }
            pick(s, c);
        }
        EditOp::PickAll { min_length } => {
            let todo: Vec<usize> = (0..s.candidates.len())
                .filter(|&c| !is_picked(s, c) && s.candidates[c].polyline.length() >= *min_length)
                .collect();
            if todo.is_empty() {
                return Ok(Applied::Unchanged("no candidate left to pick".into()));
            }
            for c in todo {
                pick(s, c);
            }
        }
        EditOp::Delete { id } => {
            let i = position(s, *id)?;
            s.selected.remove(i);
        }
        EditOp::Merge { a, b } => {
            if a == b {
                return Err(EditError::SelfMerge);
            }
            let (ia, ib) = (position(s, *a)?, position(s, *b)?);
            let (pa, pb) = (&s.selected[ia].points, &s.selected[ib].points);
            let (a0, a1, b0, b1) = (pa[0], pa[pa.len() - 1], pb[0], pb[pb.len() - 1]);
            // (distance, reverse a, reverse b)
            let options = [
                ((a1 - b0).norm(), false, false),
                ((a1 - b1).norm(), false, true),
                ((a0 - b0).norm(), true, false),
                ((a0 - b1).norm(), true, true),
            ];
            let best = options.iter().fold(options[0], |m, o| if o.0 < m.0 { *o } else { m });
            if best.0 > ctx.merge_radius {
                return Err(EditError::TooFar { distance: best.0, radius: ctx.merge_radius });
            }
            let mut pts = pa.clone();
            if best.1 {
                pts.reverse();
            }
            let mut tail = pb.clone();
            if best.2 {
                tail.reverse();
            }
            pts.extend(tail);
            let id = s.next_id;
            s.next_id += 1;
            let merged = EditableStroke {
                id,
                points: pts,
                source: StrokeSource::Merged,
                style_hint: s.selected[ia].style_hint,
                candidate: None,
                stale: false,
            };
            let at = ia.min(ib);
            s.selected.remove(ia.max(ib));
            s.selected[at] = merged;
        }
        EditOp::Insert { points } => {
            if points.len() < 2 {
                return Err(EditError::TooFewPoints(points.len()));
            }
            if let Some(p) = points.iter().find(|p| {
                !(p.x >= 0.0 && p.y >= 0.0 && p.x <= ctx.width as f64 && p.y <= ctx.height as f64)
            }) {
                return Err(EditError::OutOfBounds(p.x, p.y, ctx.width, ctx.height));
            }
            let id = s.next_id;
            s.next_id += 1;
            s.selected.push(EditableStroke {
                id,
                points: points.clone(),
                source: StrokeSource::Inserted,
                style_hint: StyleHint::Plain,
                candidate: None,
                stale: false,
            });
        }
        EditOp::Resplit { mu } => {
            let params = DocParams { mu: *mu, ..s.params.clone() };
            validate_params(&params)?;
            let candidates = split_traces(ctx.traces, ctx.outer, &params);
            for st in s.selected.iter_mut().filter(|st| st.source == StrokeSource::Picked) {
                let found = candidates.iter().position(|c| closed_path(&c.polyline) == st.points);
                st.candidate = found;
                st.stale = found.is_none();
            }
            s.params = params;
            s.candidates = candidates;
        }
        EditOp::SetThickness { t_min, t_max } => {
            let params = DocParams { t_min: *t_min, t_max: *t_max, ..s.params.clone() };
            validate_params(&params)?;
            s.params = params;
        }
        EditOp::SetStyle { id, style } => {
            let i = position(s, *id)?;
            s.selected[i].style_hint = *style;
        }
    }
    Ok(Applied::Changed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;

    fn view() -> Viewpoint {
        Viewpoint::new(Vec3::new(0.0, 0.0, 5.0), Vec3::zeros(), Vec3::y(), 40.0, 200, 200)
    }

    fn line(x0: f64, y0: f64, x1: f64, y1: f64, n: usize) -> RasterPolyline {
        RasterPolyline::open(
            (0..n)
                .map(|i| {
                    let t = i as f64 / (n - 1) as f64;
                    Vec2::new(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t)
                })
                .collect(),
        )
    }

    fn square_loop(lo: f64, hi: f64) -> RasterPolyline {
        let mut pts = Vec::new();
        let n = (hi - lo) as usize;
        for i in 0..n {
            pts.push(Vec2::new(lo + i as f64, lo));
        }
        for i in 0..n {
            pts.push(Vec2::new(hi, lo + i as f64));
        }
        for i in 0..n {
            pts.push(Vec2::new(hi - i as f64, hi));
        }
        for i in 0..n {
            pts.push(Vec2::new(lo, hi - i as f64));
        }
        RasterPolyline { points: pts, closed: true }
    }

    fn doc() -> StrokeDocument {
        let traces = vec![
            Trace { polyline: square_loop(20.0, 180.0), family: ContourFamily::Oc },
            Trace { polyline: line(50.0, 60.0, 90.0, 60.0, 41), family: ContourFamily::Sc },
            Trace { polyline: line(100.0, 60.0, 140.0, 60.0, 41), family: ContourFamily::Ar },
            Trace { polyline: square_loop(70.0, 90.0), family: ContourFamily::Oc },
        ];
        StrokeDocument::new(view(), "mesh.obj", 200, 200, traces, DocParams::default()).unwrap()
    }

    fn candidate_of(d: &StrokeDocument, trace: usize) -> usize {
        d.candidates().iter().position(|c| c.trace == trace).unwrap()
    }

    #[test]
    fn outer_contour_is_preselected() {
        let d = doc();
        assert_eq!(d.outer_trace, Some(0));
        let outer = d.candidates().iter().filter(|c| c.outer).count();
        assert_eq!(outer, 4);
        assert_eq!(d.selected().len(), 4);
        assert!(d.log().is_empty());
    }

    #[test]
    fn pick_is_idempotent() {
        let mut d = doc();
        let c = candidate_of(&d, 1);
        assert_eq!(d.apply(EditOp::Pick { candidate: c }).unwrap(), Applied::Changed);
        let before = d.clone();
        assert!(matches!(d.apply(EditOp::Pick { candidate: c }).unwrap(), Applied::Unchanged(_)));
        assert_eq!(d, before);
        assert_eq!(d.apply(EditOp::Pick { candidate: 999 }), Err(EditError::UnknownCandidate(999)));
    }

    #[test]
    fn delete_and_undo() {
        let mut d = doc();
        let before = d.clone();
        let id = d.selected()[0].id;
        d.apply(EditOp::Delete { id }).unwrap();
        assert_eq!(d.selected().len(), 3);
        assert!(d.selected().iter().all(|s| s.id != id));
        d.undo().unwrap();
        assert_eq!(d, before);
        assert_eq!(d.apply(EditOp::Delete { id: 777 }), Err(EditError::UnknownStroke(777)));
    }

    #[test]
    fn merge_orders_and_rejects() {
        let mut d = doc();
        let (c1, c2) = (candidate_of(&d, 1), candidate_of(&d, 2));
        d.apply(EditOp::Pick { candidate: c1 }).unwrap();
        d.apply(EditOp::Pick { candidate: c2 }).unwrap();
        let n = d.selected().len();
        let (a, b) = (d.selected()[n - 2].id, d.selected()[n - 1].id);
        // 10 px apart: within the radius
        let mut ab = d.clone();
        ab.apply(EditOp::Merge { a, b }).unwrap();
        let mut ba = d.clone();
        ba.apply(EditOp::Merge { a: b, b: a }).unwrap();
        let pab = &ab.selected().last().unwrap().points;
        let mut pba = ba.selected().last().unwrap().points.clone();
        assert_eq!(pab.len(), 82);
        pba.reverse();
        assert_eq!(pab, &pba);
        assert_eq!(ab.selected().last().unwrap().source, StrokeSource::Merged);

        let mut far = d.clone();
        far.apply(EditOp::Insert { points: vec![Vec2::new(100.0, 190.0), Vec2::new(120.0, 190.0)] }).unwrap();
        let ins = far.selected().last().unwrap().id;
        match far.apply(EditOp::Merge { a, b: ins }) {
            Err(EditError::TooFar { distance, .. }) => assert!(distance > 15.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn insert_validation_and_extension() {
        let mut d = doc();
        let before = d.clone();
        assert_eq!(d.apply(EditOp::Insert { points: vec![Vec2::new(1.0, 1.0)] }), Err(EditError::TooFewPoints(1)));
        assert!(matches!(
            d.apply(EditOp::Insert { points: vec![Vec2::new(1.0, 1.0), Vec2::new(500.0, 1.0)] }),
            Err(EditError::OutOfBounds(..))
        ));
        d.apply(EditOp::Insert { points: (0..5).map(|i| Vec2::new(10.0 + i as f64, 5.0)).collect() }).unwrap();
        d.undo().unwrap();
        assert_eq!(d, before);
        // extend a picked line, then merge into one long stroke
        let c = candidate_of(&d, 1);
        d.apply(EditOp::Pick { candidate: c }).unwrap();
        let picked = d.selected().last().unwrap().clone();
        d.apply(EditOp::Insert { points: vec![Vec2::new(91.0, 60.0), Vec2::new(96.0, 60.0), Vec2::new(99.0, 62.0)] })
            .unwrap();
        let ins = d.selected().last().unwrap().id;
        d.apply(EditOp::Merge { a: picked.id, b: ins }).unwrap();
        let merged = d.selected().iter().find(|s| s.source == StrokeSource::Merged).unwrap();
        assert_eq!(merged.points.len(), 44);
        assert!(crate::geom::polyline_length(&merged.points) > 48.0);
    }

    #[test]
    fn resplit_keeps_inserted_and_flags_stale() {
        let mut d = doc();
        let count = d.candidates().len();
        d.apply(EditOp::Resplit { mu: 160.0 }).unwrap();
        assert_eq!(d.candidates().len(), count);
        assert!(d.selected().iter().all(|s| !s.stale));
        d.apply(EditOp::Insert { points: vec![Vec2::new(5.0, 5.0), Vec2::new(9.0, 9.0)] }).unwrap();
        let inserted = d.selected().last().unwrap().clone();
        d.apply(EditOp::Resplit { mu: 1e6 }).unwrap();
        assert!(d.candidates().len() <= count);
        assert_eq!(d.selected().last().unwrap(), &inserted);
        // the outer square is now a single closed candidate
        assert!(d.selected().iter().filter(|s| s.source == StrokeSource::Picked).all(|s| s.stale));
        assert!(d.apply(EditOp::Resplit { mu: 0.0 }).is_err());
    }

    #[test]
    fn log_replays_and_json_round_trips() {
        let mut d = doc();
        d.apply(EditOp::PickAll { min_length: 10.0 }).unwrap();
        d.apply(EditOp::SetThickness { t_min: 3.0, t_max: 20.0 }).unwrap();
        let id = d.selected()[2].id;
        d.apply(EditOp::SetStyle { id, style: StyleHint::Noutan }).unwrap();
        d.apply(EditOp::Delete { id: d.selected()[0].id }).unwrap();
        assert_eq!(d.replay().unwrap(), *d.state());
        let s1 = d.to_json().unwrap();
        let back = StrokeDocument::from_json(&s1).unwrap();
        assert_eq!(back.to_json().unwrap(), s1);
        assert!(d.apply(EditOp::SetThickness { t_min: 9.0, t_max: 2.0 }).is_err());
    }

    #[test]
    fn op_json_shape() {
        let s = serde_json::to_string(&EditOp::Merge { a: 1, b: 2 }).unwrap();
        assert_eq!(s, r#"{"op":"merge","a":1,"b":2}"#);
        let op: EditOp = serde_json::from_str(r#"{"op":"setThickness","tMin":2,"tMax":9}"#).unwrap();
        assert_eq!(op, EditOp::SetThickness { t_min: 2.0, t_max: 9.0 });
    }
}
