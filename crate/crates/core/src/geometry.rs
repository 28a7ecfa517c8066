//! Coordinate frames, trajectories and the road/hazard-centric transforms.
//!
//! Conventions: `x` is lateral (positive to the left of the travel
//! direction), `y` is longitudinal (positive forward). Headings are measured
//! from the `+y` axis and increase towards `+x`, so a vehicle travelling
//! along the road has heading equal to the road heading.
//!
//! A road with heading `ρ` has travel direction `d = (sin ρ, cos ρ)` and left
//! normal `l = (cos ρ, -sin ρ)`. The hazard-centric frame places the hazard
//! centre at the origin with `d` as `+y` and `l` as `+x`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("expected a {expected:?} trajectory, got {actual:?}")]
    WrongFrameKind { expected: FrameKind, actual: FrameKind },
    #[error("trajectory needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("timestamps must strictly increase (frame {0})")]
    NonIncreasingTime(usize),
    #[error("lateral offset {x} is outside road limits [{right}, {left}]")]
    OffRoad { x: f64, right: f64, left: f64 },
    #[error("invalid hazard: {0}")]
    InvalidHazard(String),
    #[error("invalid road: {0}")]
    InvalidRoad(String),
    #[error("unknown scenario label `{0}`")]
    UnknownLabel(String),
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// One ego-state sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
}

impl Frame {
    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameKind {
    World,
    HazardCentric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    frames: Vec<Frame>,
    kind: FrameKind,
}

impl Trajectory {
    pub fn new(frames: Vec<Frame>, kind: FrameKind) -> Result<Self, GeometryError> {
        if frames.len() < 2 {
            return Err(GeometryError::TooFewFrames(frames.len()));
        }
        if let Some(i) = frames.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(GeometryError::NonIncreasingTime(i + 1));
        }
        Ok(Self { frames, kind })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    /// Keeps frames matching `keep`. Fails if fewer than two survive.
    pub fn retain(&self, keep: impl Fn(&Frame) -> bool) -> Result<Self, GeometryError> {
        let frames: Vec<Frame> = self.frames.iter().copied().filter(|f| keep(f)).collect();
        Self::new(frames, self.kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Moderate,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosenessClass {
    Near,
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Traffic {
    Unidirectional,
    Bidirectional,
}

/// A parked vehicle occluding part of the road side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardDescriptor {
    /// Centre in world coordinates, `[x, y]`.
    pub center: [f64; 2],
    /// Extent along the road.
    pub length: f64,
    /// Extent across the road.
    pub width: f64,
    pub size_class: SizeClass,
    pub closeness_class: ClosenessClass,
}

impl HazardDescriptor {
    pub fn new(
        center: [f64; 2],
        length: f64,
        width: f64,
        size_class: SizeClass,
        closeness_class: ClosenessClass,
    ) -> Result<Self, GeometryError> {
        if !(length > 0.0 && width > 0.0) {
            return Err(GeometryError::InvalidHazard(format!(
                "length {length} and width {width} must be positive"
            )));
        }
        Ok(Self { center, length, width, size_class, closeness_class })
    }

    /// Longitudinal extent `[start, end]`.
    pub fn y_extent(&self) -> (f64, f64) {
        (self.center[1] - self.length / 2.0, self.center[1] + self.length / 2.0)
    }

    /// Lateral extent `[right, left]`.
    pub fn x_extent(&self) -> (f64, f64) {
        (self.center[0] - self.width / 2.0, self.center[0] + self.width / 2.0)
    }
}

/// Lateral layout of a straight road. `x = 0` is the ego lane centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadSpec {
    pub lane_width: f64,
    pub sub_lane_width: f64,
    pub traffic: Traffic,
    pub left_limit: f64,
    pub right_limit: f64,
}

impl RoadSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.sub_lane_width > 0.0) {
            return Err(GeometryError::InvalidRoad("sub_lane_width must be positive".into()));
        }
        if !(self.lane_width > 0.0) {
            return Err(GeometryError::InvalidRoad("lane_width must be positive".into()));
        }
        if !(self.left_limit > self.right_limit) {
            return Err(GeometryError::InvalidRoad("left_limit must exceed right_limit".into()));
        }
        Ok(())
    }

    pub fn with_traffic(mut self, traffic: Traffic) -> Self {
        self.traffic = traffic;
        self
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.right_limit && x <= self.left_limit
    }

    /// Left bound the ego may use. On bidirectional roads this is the
    /// centre line (own lane's left edge); otherwise the drivable surface.
    pub fn left_allowance(&self) -> f64 {
        match self.traffic {
            Traffic::Unidirectional => self.left_limit,
            Traffic::Bidirectional => (self.lane_width / 2.0).min(self.left_limit),
        }
    }

    pub fn sub_lane_index(&self, x_offset: f64) -> Result<i64, GeometryError> {
        sub_lane_index(x_offset, self)
    }
}

impl Default for RoadSpec {
    /// Two 3.5 m lanes, ego in the right one.
    fn default() -> Self {
        Self {
            lane_width: 3.5,
            sub_lane_width: 0.2,
            traffic: Traffic::Unidirectional,
            left_limit: 5.25,
            right_limit: -1.75,
        }
    }
}

/// Index of the 0.2 m-style strip containing `x_offset`, counted from the
/// right limit.
pub fn sub_lane_index(x_offset: f64, road: &RoadSpec) -> Result<i64, GeometryError> {
    if !road.contains(x_offset) {
        return Err(GeometryError::OffRoad {
            x: x_offset,
            right: road.right_limit,
            left: road.left_limit,
        });
    }
    Ok(((x_offset - road.right_limit) / road.sub_lane_width).floor() as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScenarioLabel {
    pub size: SizeClass,
    pub closeness: ClosenessClass,
    pub traffic: Traffic,
}

impl ScenarioLabel {
    pub const fn new(size: SizeClass, closeness: ClosenessClass, traffic: Traffic) -> Self {
        Self { size, closeness, traffic }
    }

    pub fn all() -> [ScenarioLabel; 8] {
        use ClosenessClass::*;
        use SizeClass::*;
        use Traffic::*;
        let mut out = [ScenarioLabel::new(Moderate, Near, Unidirectional); 8];
        let mut i = 0;
        for traffic in [Unidirectional, Bidirectional] {
            for size in [Moderate, Large] {
                for closeness in [Near, Far] {
                    out[i] = ScenarioLabel::new(size, closeness, traffic);
                    i += 1;
                }
            }
        }
        out
    }
}

impl fmt::Display for ScenarioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let size = match self.size {
            SizeClass::Moderate => "moderate",
            SizeClass::Large => "large",
        };
        let close = match self.closeness {
            ClosenessClass::Near => "near",
            ClosenessClass::Far => "far",
        };
        let traffic = match self.traffic {
            Traffic::Unidirectional => "uni",
            Traffic::Bidirectional => "bi",
        };
        write!(f, "{size}-{close}-{traffic}")
    }
}

impl FromStr for ScenarioLabel {
    type Err = GeometryError;

    /// Parses `size-closeness-traffic`, e.g. `large-near-uni`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        let parts: Vec<&str> = lower.split(['-', '_', '/']).collect();
        let bad = || GeometryError::UnknownLabel(s.to_string());
        if parts.len() != 3 {
            return Err(bad());
        }
        let size = match parts[0] {
            "moderate" | "van" | "small" => SizeClass::Moderate,
            "large" | "truck" => SizeClass::Large,
            _ => return Err(bad()),
        };
        let closeness = match parts[1] {
            "near" | "close" => ClosenessClass::Near,
            "far" => ClosenessClass::Far,
            _ => return Err(bad()),
        };
        let traffic = match parts[2] {
            "uni" | "unidirectional" => Traffic::Unidirectional,
            "bi" | "bidirectional" => Traffic::Bidirectional,
            _ => return Err(bad()),
        };
        Ok(Self { size, closeness, traffic })
    }
}

fn road_axes(road_heading: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = road_heading.sin_cos();
    // (left normal, travel direction)
    ([c, -s], [s, c])
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Expresses a world point in the frame centred on `origin` with the road
/// direction as `+y`.
pub fn point_to_hazard_centric(p: [f64; 2], origin: [f64; 2], road_heading: f64) -> [f64; 2] {
    let (l, d) = road_axes(road_heading);
    let rel = [p[0] - origin[0], p[1] - origin[1]];
    [dot(l, rel), dot(d, rel)]
}

pub fn point_from_hazard_centric(p: [f64; 2], origin: [f64; 2], road_heading: f64) -> [f64; 2] {
    let (l, d) = road_axes(road_heading);
    [
        origin[0] + p[0] * l[0] + p[1] * d[0],
        origin[1] + p[0] * l[1] + p[1] * d[1],
    ]
}

fn transform_frame(f: &Frame, origin: [f64; 2], road_heading: f64, forward: bool) -> Frame {
    let (l, d) = road_axes(road_heading);
    if forward {
        let [x, y] = point_to_hazard_centric([f.x, f.y], origin, road_heading);
        Frame {
            t: f.t,
            x,
            y,
            heading: wrap_angle(f.heading - road_heading),
            vx: dot(l, [f.vx, f.vy]),
            vy: dot(d, [f.vx, f.vy]),
        }
    } else {
        let [x, y] = point_from_hazard_centric([f.x, f.y], origin, road_heading);
        Frame {
            t: f.t,
            x,
            y,
            heading: wrap_angle(f.heading + road_heading),
            vx: f.vx * l[0] + f.vy * d[0],
            vy: f.vx * l[1] + f.vy * d[1],
        }
    }
}

pub fn to_hazard_centric(
    traj: &Trajectory,
    hazard: &HazardDescriptor,
    road_heading: f64,
) -> Result<Trajectory, GeometryError> {
    if traj.kind != FrameKind::World {
        return Err(GeometryError::WrongFrameKind {
            expected: FrameKind::World,
            actual: traj.kind,
        });
    }
    let frames = traj
        .frames
        .iter()
        .map(|f| transform_frame(f, hazard.center, road_heading, true))
        .collect();
    Ok(Trajectory { frames, kind: FrameKind::HazardCentric })
}

pub fn from_hazard_centric(
    traj: &Trajectory,
    hazard: &HazardDescriptor,
    road_heading: f64,
) -> Result<Trajectory, GeometryError> {
    if traj.kind != FrameKind::HazardCentric {
        return Err(GeometryError::WrongFrameKind {
            expected: FrameKind::HazardCentric,
            actual: traj.kind,
        });
    }
    let frames = traj
        .frames
        .iter()
        .map(|f| transform_frame(f, hazard.center, road_heading, false))
        .collect();
    Ok(Trajectory { frames, kind: FrameKind::World })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hazard_at(x: f64, y: f64) -> HazardDescriptor {
        HazardDescriptor::new([x, y], 5.0, 2.0, SizeClass::Moderate, ClosenessClass::Near).unwrap()
    }

    fn world(frames: Vec<Frame>) -> Trajectory {
        Trajectory::new(frames, FrameKind::World).unwrap()
    }

    fn frame(t: f64, x: f64, y: f64, heading: f64) -> Frame {
        Frame { t, x, y, heading, vx: 0.0, vy: 10.0 }
    }

    #[test]
    fn translation_only() {
        let traj = world(vec![frame(0.0, 5.0, 0.0, 0.0), frame(1.0, 5.0, 1.0, 0.0)]);
        let hc = to_hazard_centric(&traj, &hazard_at(5.0, 10.0), 0.0).unwrap();
        assert_eq!(hc.kind(), FrameKind::HazardCentric);
        assert_abs_diff_eq!(hc.frames()[0].x, 0.0);
        assert_abs_diff_eq!(hc.frames()[0].y, -10.0);
        let back = from_hazard_centric(&hc, &hazard_at(5.0, 10.0), 0.0).unwrap();
        assert_abs_diff_eq!(back.frames()[0].x, 5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(back.frames()[0].y, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn rotated_road() {
        let traj = world(vec![frame(0.0, 0.0, 0.0, 0.0), frame(1.0, 1.0, 0.0, 0.0)]);
        let hc = to_hazard_centric(&traj, &hazard_at(10.0, 0.0), PI / 2.0).unwrap();
        let f = hc.frames()[0];
        assert_abs_diff_eq!(f.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.y, -10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.heading, -PI / 2.0, epsilon = 1e-12);
        // world +y is to the right of +x travel
        assert_abs_diff_eq!(f.vx, -10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.vy, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn wrong_kind_rejected() {
        let traj = world(vec![frame(0.0, 0.0, 0.0, 0.0), frame(1.0, 0.0, 1.0, 0.0)]);
        let h = hazard_at(0.0, 0.0);
        let hc = to_hazard_centric(&traj, &h, 0.0).unwrap();
        assert!(matches!(
            to_hazard_centric(&hc, &h, 0.0),
            Err(GeometryError::WrongFrameKind { .. })
        ));
        assert!(matches!(
            from_hazard_centric(&traj, &h, 0.0),
            Err(GeometryError::WrongFrameKind { .. })
        ));
    }

    #[test]
    fn identity_hazard_is_identity() {
        let traj = Trajectory::new(
            vec![frame(0.0, 1.5, -3.0, 0.1), frame(1.0, 1.25, 2.0, -0.2)],
            FrameKind::HazardCentric,
        )
        .unwrap();
        let w = from_hazard_centric(&traj, &hazard_at(0.0, 0.0), 0.0).unwrap();
        for (a, b) in traj.frames().iter().zip(w.frames()) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.y, b.y);
        }
    }

    #[test]
    fn two_hazard_frames_differ_by_center_offset() {
        let p = [1.0, 7.0];
        let a = point_to_hazard_centric(p, [-2.0, 3.0], 0.0);
        let b = point_to_hazard_centric(p, [0.5, 40.0], 0.0);
        assert_abs_diff_eq!(a[0] - b[0], 0.5 - -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1] - b[1], 40.0 - 3.0, epsilon = 1e-12);
    }

    #[test]
    fn sub_lane_examples() {
        let road = RoadSpec::default();
        assert_eq!(sub_lane_index(road.right_limit, &road).unwrap(), 0);
        assert_eq!(sub_lane_index(0.0, &road).unwrap(), 8);
        assert!(matches!(
            sub_lane_index(road.left_limit + 0.01, &road),
            Err(GeometryError::OffRoad { .. })
        ));
    }

    #[test]
    fn trajectory_invariants() {
        assert!(matches!(
            Trajectory::new(vec![frame(0.0, 0.0, 0.0, 0.0)], FrameKind::World),
            Err(GeometryError::TooFewFrames(1))
        ));
        assert!(matches!(
            Trajectory::new(
                vec![frame(1.0, 0.0, 0.0, 0.0), frame(1.0, 0.0, 1.0, 0.0)],
                FrameKind::World
            ),
            Err(GeometryError::NonIncreasingTime(1))
        ));
    }

    #[test]
    fn labels_round_trip_and_count() {
        let all = ScenarioLabel::all();
        let mut set = std::collections::BTreeSet::new();
        for l in all {
            assert_eq!(l.to_string().parse::<ScenarioLabel>().unwrap(), l);
            set.insert(l);
        }
        assert_eq!(set.len(), 8);
        assert!("huge-near-uni".parse::<ScenarioLabel>().is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip_and_rigidity(
            pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0, -3.0f64..3.0, -20.0f64..20.0, -20.0f64..20.0), 2..20),
            hx in -20.0f64..20.0, hy in -20.0f64..20.0, rho in -PI..PI,
        ) {
            let frames: Vec<Frame> = pts.iter().enumerate()
                .map(|(i, &(x, y, h, vx, vy))| Frame { t: i as f64, x, y, heading: h, vx, vy })
                .collect();
            let traj = world(frames);
            let h = hazard_at(hx, hy);
            let hc = to_hazard_centric(&traj, &h, rho).unwrap();
            let back = from_hazard_centric(&hc, &h, rho).unwrap();
            for (a, b) in traj.frames().iter().zip(back.frames()) {
                prop_assert!((a.x - b.x).abs() < 1e-9);
                prop_assert!((a.y - b.y).abs() < 1e-9);
                prop_assert!((a.vx - b.vx).abs() < 1e-9);
                prop_assert!((a.vy - b.vy).abs() < 1e-9);
                prop_assert!(wrap_angle(a.heading - b.heading).abs() < 1e-12);
            }
            let w = traj.frames();
            let c = hc.frames();
            for i in 0..w.len() {
                for j in (i + 1)..w.len() {
                    let dw = (w[i].x - w[j].x).hypot(w[i].y - w[j].y);
                    let dc = (c[i].x - c[j].x).hypot(c[i].y - c[j].y);
                    prop_assert!((dw - dc).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn sub_lane_monotone(a in -1.75f64..5.25, b in -1.75f64..5.25) {
            let road = RoadSpec::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(sub_lane_index(lo, &road).unwrap() <= sub_lane_index(hi, &road).unwrap());
        }
    }
}
