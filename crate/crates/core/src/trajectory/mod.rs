//! Robot programs: brush preparation and strokes compiled into task-space
//! segments with trapezoidal timing and per-waypoint joint solutions.
//!
//! The JSON-lines format holds one [`Segment`] per line:
//!
//! * `kind`: `travel`, `descend`, `draw`, `lift`, `dip` or `scrape`
//! * `pen`: `draw` only for `draw` segments, else `travel`
//! * `waypoints`: `[x, y, z]` in mm, robot frame; the first equals the
//!   previous segment's last
//! * `joints`: one [`JointPose`] (degrees) per waypoint
//! * `speed`: requested cruise speed, mm/s
//! * `profile`: [`TrapezoidProfile`] over the polyline length, or `null`
//! * `dwell`: seconds held at the lowest waypoint (dips)
//! * `action`: the [`BrushAction`] a preparation segment realizes
//! * `strokeId`: stroke a segment belongs to

pub mod kinematics;
pub mod profile;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kinematics::{ArmModel, JointPose, DRAW_SPEED_RANGE};
pub use profile::TrapezoidProfile;

use crate::geom::{Vec2, Vec3};
use crate::mapping::{MappedStroke, WorkspaceFrame};
use crate::styles::{BrushAction, InkStone, StrokeStyle};

/// Length of the outward drag of a scrape, mm.
pub const SCRAPE_LENGTH: f64 = 5.0;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("arm model: {0}")]
    Arm(String),
    #[error("point ({:.2}, {:.2}, {:.2}) at distance {distance:.3} mm is outside the reach {:.1}..{:.1} mm", point[0], point[1], point[2], reach[0], reach[1])]
    Unreachable { point: [f64; 3], distance: f64, reach: [f64; 2] },
    #[error("{joint} angle {angle:.3} deg is outside its limits")]
    JointLimit { joint: &'static str, angle: f64 },
    #[error("{} waypoint(s) are not reachable, first: {}", .0.len(), .0[0])]
    Infeasible(Vec<WaypointFailure>),
    #[error("no style plan for stroke {0}")]
    MissingStyle(u64),
    #[error("stroke {0} has no samples")]
    EmptyStroke(u64),
    #[error("program line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("segment {0} does not start where the previous one ended")]
    Discontinuous(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WaypointFailure {
    pub segment: usize,
    pub waypoint: usize,
    pub point: [f64; 3],
    pub reason: String,
}

impl std::fmt::Display for WaypointFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "segment {} waypoint {}: {}", self.segment, self.waypoint, self.reason)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Travel,
    Descend,
    Draw,
    Lift,
    Dip,
    Scrape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenState {
    Travel,
    Draw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Segment {
    pub kind: SegmentKind,
    pub pen: PenState,
    pub waypoints: Vec<[f64; 3]>,
    pub joints: Vec<JointPose>,
    pub speed: f64,
    pub profile: Option<TrapezoidProfile>,
    pub dwell: f64,
    pub action: Option<BrushAction>,
    pub stroke_id: Option<u64>,
}

impl Segment {
    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| (Vec3::from(w[1]) - Vec3::from(w[0])).norm()).sum()
    }

    pub fn duration(&self) -> f64 {
        self.profile.map_or(0.0, |p| p.duration()) + self.dwell
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotProgram {
    pub segments: Vec<Segment>,
}

impl RobotProgram {
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    pub fn check_continuity(&self) -> Result<(), TrajectoryError> {
        for (i, w) in self.segments.windows(2).enumerate() {
            let (a, b) = (w[0].waypoints.last(), w[1].waypoints.first());
            if let (Some(a), Some(b)) = (a, b) {
                if (Vec3::from(*a) - Vec3::from(*b)).norm() > 1e-9 {
                    return Err(TrajectoryError::Discontinuous(i + 1));
                }
            }
        }
        Ok(())
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> Result<(), TrajectoryError> {
        for s in &self.segments {
            serde_json::to_writer(&mut out, s).map_err(|e| TrajectoryError::Parse { line: 0, source: e })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<Self, TrajectoryError> {
        let mut segments = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            segments.push(serde_json::from_str(&line).map_err(|e| TrajectoryError::Parse { line: i + 1, source: e })?);
        }
        Ok(Self { segments })
    }
}

/// Builds segments from task-space waypoints, solving IK as it goes.
struct Compiler<'a> {
    arm: &'a ArmModel,
    frame: &'a WorkspaceFrame,
    segments: Vec<Segment>,
    failures: Vec<WaypointFailure>,
    pos: Vec3,
    pose: Option<JointPose>,
}

impl Compiler<'_> {
    fn push(&mut self, kind: SegmentKind, mut pts: Vec<Vec3>, dwell: f64, action: Option<BrushAction>, stroke_id: Option<u64>) {
        pts.insert(0, self.pos);
        let seg_index = self.segments.len();
        let mut joints = Vec::with_capacity(pts.len());
        for (k, p) in pts.iter().enumerate() {
            match self.arm.inverse(*p, self.pose.as_ref()) {
                Ok(j) => {
                    self.pose = Some(j);
                    joints.push(j);
                }
                Err(e) => {
                    self.failures.push(WaypointFailure { segment: seg_index, waypoint: k, point: [p.x, p.y, p.z], reason: e.to_string() });
                    joints.push(self.pose.unwrap_or(JointPose::from_array([0.0; 4])));
                }
            }
        }
        let speed = if kind == SegmentKind::Draw { self.arm.draw_speed } else { self.arm.travel_speed };
        let waypoints: Vec<[f64; 3]> = pts.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut seg = Segment {
            kind,
            pen: if kind == SegmentKind::Draw { PenState::Draw } else { PenState::Travel },
            waypoints,
            joints,
            speed,
            profile: None,
            dwell,
            action,
            stroke_id,
        };
        seg.profile = TrapezoidProfile::plan(seg.length(), speed, self.arm.a_max);
        self.pos = *pts.last().unwrap();
        self.segments.push(seg);
    }

    fn safe(&self, xy: Vec2) -> Vec3 {
        Vec3::new(xy.x, xy.y, self.frame.safe_height)
    }

    fn travel_to(&mut self, xy: Vec2, action: Option<BrushAction>, stroke: Option<u64>) {
        let mut pts = Vec::new();
        if (self.pos.z - self.frame.safe_height).abs() > 1e-12 {
            pts.push(self.safe(self.pos.xy()));
        }
        pts.push(self.safe(xy));
        self.push(SegmentKind::Travel, pts, 0.0, action, stroke);
    }

    fn action(&mut self, a: BrushAction, stroke: Option<u64>) {
        let here = self.pos.xy();
        match a {
            BrushAction::Translate { target } => self.travel_to(Vec2::from(target), Some(a), stroke),
            BrushAction::Dip { dip_duration, dip_depth, .. } => {
                let bottom = Vec3::new(here.x, here.y, self.frame.paper_z - dip_depth);
                self.push(SegmentKind::Dip, vec![bottom, self.safe(here)], dip_duration, Some(a), stroke);
            }
            BrushAction::Scrape => {
                let stone = nearest_stone(self.frame, here);
                let out = (here - stone).try_normalize(1e-12).unwrap_or(Vec2::new(1.0, 0.0));
                let end = here + out * SCRAPE_LENGTH;
                let z = self.frame.paper_z;
                let pts = vec![Vec3::new(here.x, here.y, z), Vec3::new(end.x, end.y, z), self.safe(end)];
                self.push(SegmentKind::Scrape, pts, 0.0, Some(a), stroke);
            }
        }
    }
}

fn nearest_stone(frame: &WorkspaceFrame, p: Vec2) -> Vec2 {
    let (l, t) = (Vec2::from(frame.ink_stones.light), Vec2::from(frame.ink_stones.thick));
    if (p - l).norm() <= (p - t).norm() { l } else { t }
}

/// Which stone a dip at `p` goes into.
pub fn stone_at(frame: &WorkspaceFrame, p: Vec2) -> InkStone {
    if nearest_stone(frame, p) == Vec2::from(frame.ink_stones.light) { InkStone::Light } else { InkStone::Thick }
}

/// Compiles strokes in order, each preceded by its style's preparation.
/// The arm starts above the frame center.
pub fn compile_program(
    strokes: &[MappedStroke],
    styles: &[StrokeStyle],
    arm: &ArmModel,
    frame: &WorkspaceFrame,
) -> Result<RobotProgram, TrajectoryError> {
    arm.validate()?;
    let start = Vec3::new(frame.center[0], frame.center[1], frame.safe_height);
    let mut c = Compiler { arm, frame, segments: Vec::new(), failures: Vec::new(), pos: start, pose: None };
    c.pose = arm.inverse(start, None).ok();
    for s in strokes {
        let style = styles.iter().find(|st| st.stroke_id == s.stroke_id).ok_or(TrajectoryError::MissingStyle(s.stroke_id))?;
        let (first, last) = match (s.points.first(), s.points.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => return Err(TrajectoryError::EmptyStroke(s.stroke_id)),
        };
        let id = Some(s.stroke_id);
        for a in &style.actions {
            c.action(*a, id);
        }
        let z = |descent: f64| frame.paper_z - descent;
        c.travel_to(Vec2::new(first.x, first.y), None, id);
        c.push(SegmentKind::Descend, vec![Vec3::new(first.x, first.y, z(first.descent))], 0.0, None, id);
        let draw: Vec<Vec3> = s.points[1..].iter().map(|p| Vec3::new(p.x, p.y, z(p.descent))).collect();
        c.push(SegmentKind::Draw, draw, 0.0, None, id);
        c.push(SegmentKind::Lift, vec![c.safe(Vec2::new(last.x, last.y))], 0.0, None, id);
    }
    if !c.failures.is_empty() {
        return Err(TrajectoryError::Infeasible(c.failures));
    }
    Ok(RobotProgram { segments: c.segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::editor::StyleHint;
    use crate::mapping::MappedPoint;
    use crate::styles::{brush_actions, StyleKind, StyleParams};

    fn stroke(id: u64, pts: &[(f64, f64)], hint: StyleHint) -> MappedStroke {
        MappedStroke {
            stroke_id: id,
            style_hint: hint,
            points: pts.iter().map(|&(x, y)| MappedPoint { x, y, thickness: 5.0, descent: 4.5, clamped: false }).collect(),
        }
    }

    fn style_for(s: &MappedStroke, frame: &WorkspaceFrame, kind: StyleKind, with_prep: bool) -> StrokeStyle {
        let params = StyleParams::default();
        StrokeStyle {
            stroke_id: s.stroke_id,
            kind,
            params,
            actions: if with_prep { brush_actions(kind, frame, &params) } else { vec![] },
            noutan: 0.0,
            kasure: crate::styles::Dryness { value: 0.0, dry: false },
        }
    }

    #[test]
    fn minimal_program() {
        let f = WorkspaceFrame::default();
        let s = stroke(1, &[(200.0, 0.0), (220.0, 10.0)], StyleHint::Plain);
        let st = style_for(&s, &f, StyleKind::Plain, false);
        let p = compile_program(&[s], &[st], &ArmModel::default(), &f).unwrap();
        let kinds: Vec<SegmentKind> = p.segments.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, vec![SegmentKind::Travel, SegmentKind::Descend, SegmentKind::Draw, SegmentKind::Lift]);
        p.check_continuity().unwrap();
        let draw = &p.segments[2];
        assert_eq!(draw.waypoints, vec![[200.0, 0.0, -44.5], [220.0, 10.0, -44.5]]);
        let arm = ArmModel::default();
        for s in &p.segments {
            for (w, j) in s.waypoints.iter().zip(&s.joints) {
                assert!((arm.forward(j) - Vec3::from(*w)).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn noutan_prep_and_two_strokes() {
        let f = WorkspaceFrame::default();
        let a = stroke(1, &[(200.0, 0.0), (220.0, 10.0), (230.0, 30.0)], StyleHint::Noutan);
        let b = stroke(2, &[(190.0, -20.0), (180.0, -40.0)], StyleHint::Plain);
        let styles = vec![style_for(&a, &f, StyleKind::Noutan, true), style_for(&b, &f, StyleKind::Plain, false)];
        let p = compile_program(&[a, b], &styles, &ArmModel::default(), &f).unwrap();
        p.check_continuity().unwrap();
        let prep = p.segments.iter().take_while(|s| s.action.is_some()).count();
        assert_eq!(prep, 18);
        assert_eq!(p.segments.iter().filter(|s| s.kind == SegmentKind::Lift).count(), 2);
        assert_eq!(p.segments.iter().filter(|s| s.kind == SegmentKind::Descend).count(), 2);
        for s in p.segments.iter().filter(|s| s.kind == SegmentKind::Travel) {
            assert!(s.waypoints[1..].iter().all(|w| w[2] == f.safe_height));
        }
    }

    #[test]
    fn jsonl_is_stable() {
        let f = WorkspaceFrame::default();
        let s = stroke(4, &[(200.0, 0.0), (210.5, 3.25), (222.125, 11.0)], StyleHint::Noutan);
        let st = style_for(&s, &f, StyleKind::Noutan, true);
        let p = compile_program(&[s], &[st], &ArmModel::default(), &f).unwrap();
        let text = p.to_jsonl();
        let back = RobotProgram::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn unreachable_waypoints_are_listed() {
        let f = WorkspaceFrame::default();
        let s = stroke(1, &[(200.0, 0.0), (400.0, 0.0)], StyleHint::Plain);
        let st = style_for(&s, &f, StyleKind::Plain, false);
        match compile_program(&[s], &[st], &ArmModel::default(), &f) {
            Err(TrajectoryError::Infeasible(list)) => assert!(list.iter().all(|w| w.point[0] == 400.0)),
            other => panic!("{other:?}"),
        }
    }
}
