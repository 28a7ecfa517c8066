//! Lateral and speed envelopes from scenario models.
//!
//! Longitudinal and lateral positions in an envelope are road-frame
//! coordinates: the world frame rotated so the road runs along `+y`. With
//! a zero road heading they coincide with world coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    point_to_hazard_centric, GeometryError, HazardDescriptor, RoadSpec, Traffic,
};
use crate::keyframe::{KeyframeError, ScenarioModel};
use crate::numerics::{fit_natural_cubic, merge_at_junction, CubicSpline, Knot, NumericsError};

pub const ENVELOPE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstraintError {
    #[error("speed must be non-negative, got {0}")]
    NegativeSpeed(f64),
    #[error("model is for {model:?} traffic but the road is {road:?}")]
    ModelRoadMismatch { model: Traffic, road: Traffic },
    #[error("ego lateral position {x} is off the road [{right}, {left}]")]
    OffRoadEgo { x: f64, right: f64, left: f64 },
    #[error("ego is {distance} m before the onset distance and pre-onset output is disabled")]
    BehaviorInactive { distance: f64 },
    #[error("hazard {0} comes before the previous hazard")]
    OrderViolation(usize),
    #[error("hazards {0} and {1} overlap too deeply to combine")]
    UnsupportedOverlap(usize, usize),
    #[error("got {models} models for {hazards} hazards")]
    CountMismatch { models: usize, hazards: usize },
    #[error("no hazards given")]
    NoHazards,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Model(#[from] KeyframeError),
}

/// Envelope generation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub t_horizon: f64,
    pub horizon_floor: f64,
    pub grid_spacing: f64,
    /// Seconds of travel after a hazard's box end during which its
    /// behaviour is still active.
    pub release_time: f64,
    pub clearance: f64,
    #[serde(default)]
    pub road_heading: f64,
    /// Emit output when the ego is still before the onset distance; points
    /// ahead of the first key-frame then hold its band.
    #[serde(default = "yes")]
    pub allow_pre_onset: bool,
}

fn yes() -> bool {
    true
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            t_horizon: 5.0,
            horizon_floor: 10.0,
            grid_spacing: 0.5,
            release_time: 2.0,
            clearance: 0.3,
            road_heading: 0.0,
            allow_pre_onset: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub sub_lane: i64,
}

impl EgoState {
    /// Ego with its sub-lane derived from the road-frame lateral position.
    pub fn new(
        x: f64,
        y: f64,
        heading: f64,
        speed: f64,
        road: &RoadSpec,
        road_heading: f64,
    ) -> Result<Self, ConstraintError> {
        if !(speed >= 0.0) {
            return Err(ConstraintError::NegativeSpeed(speed));
        }
        let lat = road_point([x, y], road_heading)[0];
        let sub_lane = road.sub_lane_index(lat).map_err(|_| ConstraintError::OffRoadEgo {
            x: lat,
            right: road.right_limit,
            left: road.left_limit,
        })?;
        Ok(Self { x, y, heading, speed, sub_lane })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub y: f64,
    pub lateral_min: f64,
    pub lateral_max: f64,
    /// Model mean path, clamped to the drivable band.
    pub lateral_mean: f64,
    pub sub_lane_min: i64,
    pub sub_lane_max: i64,
    pub speed_min: f64,
    pub speed_max: f64,
}

/// Where two interacting hazards' models were stitched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub first: usize,
    pub second: usize,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintEnvelope {
    pub format_version: u32,
    pub road_heading: f64,
    pub horizon_m: f64,
    pub road: RoadSpec,
    pub hazards: Vec<HazardDescriptor>,
    pub grid: Vec<EnvelopePoint>,
    pub junctions: Vec<Junction>,
}

impl ConstraintEnvelope {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("y,lat_min,lat_max,sublane_min,sublane_max,v_min,v_max\n");
        for p in &self.grid {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p.y, p.lateral_min, p.lateral_max, p.sub_lane_min, p.sub_lane_max, p.speed_min,
                p.speed_max
            ));
        }
        out
    }
}

pub fn distance_horizon(speed: f64, t_horizon: f64, floor: f64) -> Result<f64, ConstraintError> {
    if !(speed >= 0.0) {
        return Err(ConstraintError::NegativeSpeed(speed));
    }
    Ok((speed * t_horizon).max(floor))
}

fn road_point(p: [f64; 2], road_heading: f64) -> [f64; 2] {
    point_to_hazard_centric(p, [0.0, 0.0], road_heading)
}

/// Junction between consecutive hazards as a `y` in the second hazard's
/// hazard-centric frame: the first box's end when the boxes are disjoint,
/// the midpoint of the centres when they overlap.
pub fn adapted_d_thresh(
    h1: &HazardDescriptor,
    h2: &HazardDescriptor,
    road_heading: f64,
) -> Result<f64, ConstraintError> {
    let y1 = road_point(h1.center, road_heading)[1];
    let y2 = road_point(h2.center, road_heading)[1];
    if y1 > y2 {
        return Err(ConstraintError::OrderViolation(1));
    }
    let end1 = y1 + h1.length / 2.0;
    let start2 = y2 - h2.length / 2.0;
    let junction = if end1 <= start2 { end1 } else { (y1 + y2) / 2.0 };
    Ok(junction - y2)
}

/// Whether the second hazard's onset falls inside the first hazard's
/// active stretch (box end plus `release_time` of travel).
pub fn is_interacting(
    h1: &HazardDescriptor,
    h2: &HazardDescriptor,
    model2_d_thresh: f64,
    ego_speed: f64,
    release_time: f64,
    road_heading: f64,
) -> bool {
    let y1 = road_point(h1.center, road_heading)[1];
    let y2 = road_point(h2.center, road_heading)[1];
    y2 - model2_d_thresh < y1 + h1.length / 2.0 + release_time * ego_speed
}

/// The four boundary curves over road-frame `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCurves {
    pub lat_hi: CubicSpline,
    pub lat_lo: CubicSpline,
    pub v_hi: CubicSpline,
    pub v_lo: CubicSpline,
}

impl BoundaryCurves {
    fn fit(k: &KnotSets) -> Result<Self, NumericsError> {
        Ok(Self {
            lat_hi: fit_natural_cubic(&k.lat_hi)?,
            lat_lo: fit_natural_cubic(&k.lat_lo)?,
            v_hi: fit_natural_cubic(&k.v_hi)?,
            v_lo: fit_natural_cubic(&k.v_lo)?,
        })
    }

    pub fn span(&self) -> (f64, f64) {
        self.lat_hi.domain()
    }
}

#[derive(Debug, Clone)]
struct KnotSets {
    lat_hi: Vec<Knot>,
    lat_lo: Vec<Knot>,
    v_hi: Vec<Knot>,
    v_lo: Vec<Knot>,
}

impl KnotSets {
    /// Model knots moved into road-frame coordinates around `hazard`.
    fn of(model: &ScenarioModel, hazard: &HazardDescriptor, road_heading: f64) -> Self {
        let [hx, hy] = road_point(hazard.center, road_heading);
        let shift = |ks: Vec<Knot>, dv: f64| -> Vec<Knot> {
            ks.into_iter().map(|k| Knot::new(k.y + hy, k.value + dv)).collect()
        };
        Self {
            lat_hi: shift(model.lateral_knots(1.0), hx),
            lat_lo: shift(model.lateral_knots(-1.0), hx),
            v_hi: shift(model.speed_knots(1.0), 0.0),
            v_lo: shift(model.speed_knots(-1.0), 0.0),
        }
    }

    fn merged(&self, next: &KnotSets, junction: f64) -> Result<Self, NumericsError> {
        Ok(Self {
            lat_hi: merge_at_junction(&self.lat_hi, &next.lat_hi, junction)?,
            lat_lo: merge_at_junction(&self.lat_lo, &next.lat_lo, junction)?,
            v_hi: merge_at_junction(&self.v_hi, &next.v_hi, junction)?,
            v_lo: merge_at_junction(&self.v_lo, &next.v_lo, junction)?,
        })
    }
}

fn check_model(model: &ScenarioModel, road: &RoadSpec) -> Result<(), ConstraintError> {
    model.validate()?;
    if model.label.traffic != road.traffic {
        return Err(ConstraintError::ModelRoadMismatch {
            model: model.label.traffic,
            road: road.traffic,
        });
    }
    Ok(())
}

fn check_ego(ego: &EgoState, road: &RoadSpec, road_heading: f64) -> Result<[f64; 2], ConstraintError> {
    if !(ego.speed >= 0.0) {
        return Err(ConstraintError::NegativeSpeed(ego.speed));
    }
    let p = road_point([ego.x, ego.y], road_heading);
    if !road.contains(p[0]) {
        return Err(ConstraintError::OffRoadEgo {
            x: p[0],
            right: road.right_limit,
            left: road.left_limit,
        });
    }
    Ok(p)
}

fn grid(start: f64, horizon: f64, spacing: f64) -> Vec<f64> {
    let n = (horizon / spacing + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * spacing).collect()
}

/// Turns spline values into bounded grid points. `groups[g]` is used from
/// the start of its span on; before the first span the first group holds.
fn evaluate(
    ys: &[f64],
    groups: &[BoundaryCurves],
    hazards: &[HazardDescriptor],
    road: &RoadSpec,
    cfg: &GenerationConfig,
) -> Result<Vec<EnvelopePoint>, ConstraintError> {
    let hazard_road: Vec<[f64; 2]> =
        hazards.iter().map(|h| road_point(h.center, cfg.road_heading)).collect();
    let lo_limit = road.right_limit;
    let hi_limit = road.left_allowance();
    let mut out = Vec::with_capacity(ys.len());
    for &y in ys {
        let g = groups.iter().rposition(|b| b.span().0 <= y).unwrap_or(0);
        let b = &groups[g];
        let (l1, l2) = (b.lat_hi.eval_clamped(y), b.lat_lo.eval_clamped(y));
        let (v1, v2) = (b.v_hi.eval_clamped(y), b.v_lo.eval_clamped(y));
        let mean = (l1 + l2) / 2.0;
        let mut lat_min = l1.min(l2);
        let mut lat_max = l1.max(l2);

        for (h, c) in hazards.iter().zip(&hazard_road) {
            let inside = (y - c[1]).abs() <= h.length / 2.0;
            if !inside {
                continue;
            }
            let reach = h.width / 2.0 + cfg.clearance;
            // hazard to the right of the lane centre pushes the right bound
            if c[0] < 0.0 {
                lat_min = lat_min.max(c[0] + reach);
                lat_max = lat_max.max(lat_min);
            } else {
                lat_max = lat_max.min(c[0] - reach);
                lat_min = lat_min.min(lat_max);
            }
        }

        let lat_min = lat_min.clamp(lo_limit, hi_limit);
        let lat_max = lat_max.clamp(lo_limit, hi_limit);
        let speed_min = v1.min(v2).max(0.0);
        let speed_max = v1.max(v2).max(0.0);
        out.push(EnvelopePoint {
            y,
            lateral_min: lat_min,
            lateral_max: lat_max,
            lateral_mean: mean.clamp(lo_limit, hi_limit),
            sub_lane_min: road.sub_lane_index(lat_min)?,
            sub_lane_max: road.sub_lane_index(lat_max)?,
            speed_min,
            speed_max,
        });
    }
    Ok(out)
}

pub fn generate_single(
    model: &ScenarioModel,
    ego: &EgoState,
    hazard: &HazardDescriptor,
    road: &RoadSpec,
    cfg: &GenerationConfig,
) -> Result<ConstraintEnvelope, ConstraintError> {
    road.validate()?;
    check_model(model, road)?;
    let ego_road = check_ego(ego, road, cfg.road_heading)?;
    let hazard_y = road_point(hazard.center, cfg.road_heading)[1];
    let ego_hc_y = ego_road[1] - hazard_y;
    if !cfg.allow_pre_onset && ego_hc_y < -model.d_thresh {
        return Err(ConstraintError::BehaviorInactive { distance: -model.d_thresh - ego_hc_y });
    }
    let horizon = distance_horizon(ego.speed, cfg.t_horizon, cfg.horizon_floor)?;
    let bounds = BoundaryCurves::fit(&KnotSets::of(model, hazard, cfg.road_heading))?;
    let ys = grid(ego_road[1], horizon, cfg.grid_spacing);
    let points = evaluate(&ys, &[bounds], std::slice::from_ref(hazard), road, cfg)?;
    Ok(ConstraintEnvelope {
        format_version: ENVELOPE_FORMAT_VERSION,
        road_heading: cfg.road_heading,
        horizon_m: horizon,
        road: *road,
        hazards: vec![*hazard],
        grid: points,
        junctions: Vec::new(),
    })
}

/// Boundary curves for hazards met in order: one set per run of
/// interacting hazards, stitched at each adapted onset.
pub fn boundary_curves(
    models: &[ScenarioModel],
    hazards: &[HazardDescriptor],
    ego_speed: f64,
    cfg: &GenerationConfig,
) -> Result<(Vec<BoundaryCurves>, Vec<Junction>), ConstraintError> {
    if hazards.is_empty() {
        return Err(ConstraintError::NoHazards);
    }
    if models.len() != hazards.len() {
        return Err(ConstraintError::CountMismatch { models: models.len(), hazards: hazards.len() });
    }
    let rh = cfg.road_heading;
    let mut junctions = Vec::new();
    let mut groups = Vec::new();
    let mut current = KnotSets::of(&models[0], &hazards[0], rh);
    for i in 1..hazards.len() {
        let next = KnotSets::of(&models[i], &hazards[i], rh);
        let (a, b) = (&hazards[i - 1], &hazards[i]);
        if is_interacting(a, b, models[i].d_thresh, ego_speed, cfg.release_time, rh) {
            let y = adapted_d_thresh(a, b, rh)? + road_point(b.center, rh)[1];
            current = current.merged(&next, y)?;
            junctions.push(Junction { first: i - 1, second: i, y });
        } else {
            groups.push(BoundaryCurves::fit(&current)?);
            current = next;
        }
    }
    groups.push(BoundaryCurves::fit(&current)?);
    Ok((groups, junctions))
}

fn contains_point(h: &HazardDescriptor, p: [f64; 2], road_heading: f64) -> bool {
    let c = road_point(h.center, road_heading);
    (p[0] - c[0]).abs() <= h.width / 2.0 && (p[1] - c[1]).abs() <= h.length / 2.0
}

/// Envelope for hazards met in order. Hazards whose behaviours interact are
/// stitched into one spline per boundary at their adapted onset; the rest
/// are handled as single hazards.
pub fn generate_multi(
    models: &[ScenarioModel],
    ego: &EgoState,
    hazards: &[HazardDescriptor],
    road: &RoadSpec,
    cfg: &GenerationConfig,
) -> Result<ConstraintEnvelope, ConstraintError> {
    if hazards.is_empty() {
        return Err(ConstraintError::NoHazards);
    }
    if models.len() != hazards.len() {
        return Err(ConstraintError::CountMismatch { models: models.len(), hazards: hazards.len() });
    }
    if hazards.len() == 1 {
        return generate_single(&models[0], ego, &hazards[0], road, cfg);
    }
    road.validate()?;
    for m in models {
        check_model(m, road)?;
    }
    let ego_road = check_ego(ego, road, cfg.road_heading)?;
    let rh = cfg.road_heading;
    for i in 1..hazards.len() {
        let (a, b) = (&hazards[i - 1], &hazards[i]);
        if road_point(a.center, rh)[1] > road_point(b.center, rh)[1] {
            return Err(ConstraintError::OrderViolation(i));
        }
        let a_c = road_point(a.center, rh);
        let b_c = road_point(b.center, rh);
        if contains_point(a, b_c, rh) || contains_point(b, a_c, rh) {
            return Err(ConstraintError::UnsupportedOverlap(i - 1, i));
        }
    }

    let (groups, junctions) = boundary_curves(models, hazards, ego.speed, cfg)?;

    let horizon = distance_horizon(ego.speed, cfg.t_horizon, cfg.horizon_floor)?;
    let ys = grid(ego_road[1], horizon, cfg.grid_spacing);
    let points = evaluate(&ys, &groups, hazards, road, cfg)?;
    Ok(ConstraintEnvelope {
        format_version: ENVELOPE_FORMAT_VERSION,
        road_heading: rh,
        horizon_m: horizon,
        road: *road,
        hazards: hazards.to_vec(),
        grid: points,
        junctions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ClosenessClass, ScenarioLabel, SizeClass};
    use crate::keyframe::{ClusteredKeyFrame, MODEL_FORMAT_VERSION};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hazard(x: f64, y: f64, length: f64) -> HazardDescriptor {
        HazardDescriptor::new([x, y], length, 2.5, SizeClass::Large, ClosenessClass::Near).unwrap()
    }

    fn kf(y: f64, lat: f64, ls: f64, v: f64, vs: f64) -> ClusteredKeyFrame {
        ClusteredKeyFrame {
            y_mu: y,
            lateral_mu: lat,
            lateral_sigma: ls,
            speed_mu: v,
            speed_sigma: vs,
            support: 5,
        }
    }

    /// Keyframes in hazard-centric lateral, hazard at x = -2.5.
    fn model(traffic: Traffic, sigma: f64) -> ScenarioModel {
        ScenarioModel {
            format_version: MODEL_FORMAT_VERSION,
            label: ScenarioLabel {
                size: SizeClass::Large,
                closeness: ClosenessClass::Near,
                traffic,
            },
            d_thresh: 36.0,
            epsilon: 0.1,
            n_demos: 5,
            keyframes: vec![
                kf(-36.0, 2.5, sigma, 10.0, 0.4),
                kf(-12.0, 3.1, sigma, 8.5, 0.5),
                kf(-1.0, 3.9, sigma, 7.5, 0.5),
                kf(6.0, 3.9, sigma, 8.0, 0.4),
                kf(30.0, 3.9, sigma, 10.0, 0.3),
            ],
        }
    }

    fn ego(y: f64, speed: f64) -> EgoState {
        EgoState::new(0.0, y, 0.0, speed, &RoadSpec::default(), 0.0).unwrap()
    }

    #[test]
    fn horizon() {
        assert_eq!(distance_horizon(10.0, 5.0, 10.0).unwrap(), 50.0);
        assert_eq!(distance_horizon(0.0, 5.0, 10.0).unwrap(), 10.0);
        assert_abs_diff_eq!(distance_horizon(7.2, 5.0, 10.0).unwrap(), 36.0, epsilon = 1e-12);
        assert!(matches!(distance_horizon(-1.0, 5.0, 10.0), Err(ConstraintError::NegativeSpeed(_))));
    }

    #[test]
    fn band_at_keyframe() {
        let road = RoadSpec::default();
        let h = hazard(-2.5, 40.0, 8.0);
        let env = generate_single(&model(Traffic::Unidirectional, 0.2), &ego(0.0, 10.0), &h, &road,
            &GenerationConfig::default()).unwrap();
        assert_eq!(env.grid.len(), 101);
        assert_eq!(env.horizon_m, 50.0);
        // key-frame at hazard-centric -12 is world y 28
        let p = env.grid.iter().find(|p| p.y == 28.0).unwrap();
        assert_abs_diff_eq!((p.lateral_min + p.lateral_max) / 2.0, 3.1 - 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.lateral_max - p.lateral_min, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(p.speed_min, 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.speed_max, 9.0, epsilon = 1e-12);
        // held constant before the first key-frame
        assert_abs_diff_eq!(env.grid[0].lateral_min, -0.2, epsilon = 1e-12);
        assert_eq!(env.grid[0].sub_lane_min, 7);
    }

    #[test]
    fn zero_sigma_collapses_band() {
        let road = RoadSpec::default();
        let mut m = model(Traffic::Unidirectional, 0.0);
        for k in &mut m.keyframes {
            k.speed_sigma = 0.0;
        }
        let env = generate_single(&m, &ego(10.0, 8.0), &hazard(-2.5, 40.0, 8.0), &road,
            &GenerationConfig::default()).unwrap();
        for p in &env.grid {
            assert_eq!(p.lateral_min, p.lateral_max);
            assert_eq!(p.speed_min, p.speed_max);
        }
    }

    #[test]
    fn bidirectional_clamped_to_own_lane() {
        let road = RoadSpec::default().with_traffic(Traffic::Bidirectional);
        let env = generate_single(&model(Traffic::Bidirectional, 1.0), &ego(0.0, 10.0),
            &hazard(-2.5, 40.0, 8.0), &road, &GenerationConfig::default()).unwrap();
        let max = env.grid.iter().map(|p| p.lateral_max).fold(f64::MIN, f64::max);
        assert_eq!(max, 1.75);
        assert!(env.grid.iter().all(|p| p.lateral_min <= p.lateral_max));
    }

    #[test]
    fn mismatch_and_off_road() {
        let road = RoadSpec::default().with_traffic(Traffic::Bidirectional);
        let h = hazard(-2.5, 40.0, 8.0);
        let cfg = GenerationConfig::default();
        assert!(matches!(
            generate_single(&model(Traffic::Unidirectional, 0.2), &ego(0.0, 10.0), &h, &road, &cfg),
            Err(ConstraintError::ModelRoadMismatch { .. })
        ));
        let off = EgoState { x: 9.0, y: 0.0, heading: 0.0, speed: 5.0, sub_lane: 0 };
        assert!(matches!(
            generate_single(&model(Traffic::Bidirectional, 0.2), &off, &h, &road, &cfg),
            Err(ConstraintError::OffRoadEgo { .. })
        ));
        let strict = GenerationConfig { allow_pre_onset: false, ..cfg };
        assert!(matches!(
            generate_single(&model(Traffic::Bidirectional, 0.2), &ego(-10.0, 5.0), &h, &road, &strict),
            Err(ConstraintError::BehaviorInactive { .. })
        ));
    }

    #[test]
    fn clearance_enforced() {
        let road = RoadSpec::default();
        // mean passes through the hazard's clearance zone
        let mut m = model(Traffic::Unidirectional, 0.1);
        for k in &mut m.keyframes {
            k.lateral_mu = 1.0;
        }
        let h = hazard(-2.5, 40.0, 8.0);
        let env = generate_single(&m, &ego(0.0, 10.0), &h, &road, &GenerationConfig::default()).unwrap();
        for p in env.grid.iter().filter(|p| (p.y - 40.0).abs() <= 4.0) {
            assert!(p.lateral_min >= -2.5 + 1.25 + 0.3 - 1e-12);
            assert!(p.lateral_min <= p.lateral_max);
        }
    }

    #[test]
    fn adapted_threshold() {
        let h1 = hazard(-2.5, 0.0, 8.0);
        assert_eq!(adapted_d_thresh(&h1, &hazard(-2.5, 30.0, 8.0), 0.0).unwrap(), -26.0);
        assert_eq!(adapted_d_thresh(&h1, &hazard(-2.5, 6.0, 8.0), 0.0).unwrap(), -3.0);
        assert_eq!(adapted_d_thresh(&h1, &h1, 0.0).unwrap(), 0.0);
        assert!(matches!(
            adapted_d_thresh(&hazard(-2.5, 6.0, 8.0), &h1, 0.0),
            Err(ConstraintError::OrderViolation(_))
        ));
    }

    #[test]
    fn interaction() {
        let h1 = hazard(-2.5, 0.0, 8.0);
        assert!(!is_interacting(&h1, &hazard(-2.5, 204.0, 8.0), 37.0, 10.0, 2.0, 0.0));
        assert!(is_interacting(&h1, &hazard(-2.5, 24.0, 8.0), 37.0, 10.0, 2.0, 0.0));
        // box end 4 plus 2 s at 10 m/s; y2 - d2 = 24 exactly
        assert!(!is_interacting(&h1, &hazard(-2.5, 61.0, 8.0), 37.0, 10.0, 2.0, 0.0));
        assert!(is_interacting(&h1, &hazard(-2.5, 60.999, 8.0), 37.0, 10.0, 2.0, 0.0));
    }

    #[test]
    fn multi_with_one_hazard_is_single() {
        let road = RoadSpec::default();
        let m = model(Traffic::Unidirectional, 0.3);
        let h = hazard(-2.5, 40.0, 8.0);
        let cfg = GenerationConfig::default();
        let e = ego(3.0, 9.0);
        assert_eq!(
            generate_multi(std::slice::from_ref(&m), &e, &[h], &road, &cfg).unwrap(),
            generate_single(&m, &e, &h, &road, &cfg).unwrap()
        );
    }

    #[test]
    fn two_hazards_match_hand_merge() {
        let road = RoadSpec::default();
        let m = model(Traffic::Unidirectional, 0.3);
        let (h1, h2) = (hazard(-2.5, 40.0, 8.0), hazard(-2.5, 78.0, 8.0));
        let cfg = GenerationConfig { t_horizon: 12.0, ..GenerationConfig::default() };
        let env = generate_multi(&[m.clone(), m.clone()], &ego(0.0, 10.0), &[h1, h2], &road, &cfg).unwrap();
        assert_eq!(env.junctions.len(), 1);
        let j = env.junctions[0].y;
        assert_eq!(j, 44.0);

        // oracle: knots written out by hand in world coordinates
        let kfs = &m.keyframes;
        let mut upper: Vec<Knot> = kfs
            .iter()
            .map(|k| Knot::new(k.y_mu + 40.0, k.lateral_mu + 0.3 - 2.5))
            .filter(|k| k.y < 44.0)
            .collect();
        upper.extend(
            kfs.iter()
                .map(|k| Knot::new(k.y_mu + 78.0, k.lateral_mu + 0.3 - 2.5))
                .filter(|k| k.y >= 44.0),
        );
        let s = fit_natural_cubic(&upper).unwrap();
        for p in env.grid.iter().filter(|p| p.y >= upper[0].y && p.y <= upper.last().unwrap().y) {
            let clear = [40.0, 78.0].iter().any(|c| (p.y - c).abs() <= 4.0);
            if !clear {
                assert_abs_diff_eq!(p.lateral_max, s.eval(p.y).unwrap().min(5.25), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn isolated_hazards_match_singles() {
        let road = RoadSpec::default();
        let m = model(Traffic::Unidirectional, 0.3);
        let (h1, h2) = (hazard(-2.5, 40.0, 8.0), hazard(-2.5, 400.0, 8.0));
        let cfg = GenerationConfig::default();
        let e = ego(0.0, 10.0);
        let multi = generate_multi(&[m.clone(), m.clone()], &e, &[h1, h2], &road, &cfg).unwrap();
        let single = generate_single(&m, &e, &h1, &road, &cfg).unwrap();
        assert!(multi.junctions.is_empty());
        assert_eq!(multi.grid, single.grid);
    }

    #[test]
    fn deep_overlap_rejected() {
        let road = RoadSpec::default();
        let m = model(Traffic::Unidirectional, 0.3);
        let cfg = GenerationConfig::default();
        let r = generate_multi(&[m.clone(), m], &ego(0.0, 10.0),
            &[hazard(-2.5, 40.0, 8.0), hazard(-2.5, 42.0, 8.0)], &road, &cfg);
        assert!(matches!(r, Err(ConstraintError::UnsupportedOverlap(0, 1))));
    }

    proptest! {
        #[test]
        fn bands_valid(sig in prop::collection::vec(0.0f64..2.0, 5),
                       ego_y in -20.0f64..60.0, speed in 0.0f64..20.0, bi in any::<bool>()) {
            let traffic = if bi { Traffic::Bidirectional } else { Traffic::Unidirectional };
            let road = RoadSpec::default().with_traffic(traffic);
            let mut m = model(traffic, 0.0);
            for (k, s) in m.keyframes.iter_mut().zip(&sig) {
                k.lateral_sigma = *s;
                k.speed_sigma = *s;
            }
            let h = hazard(-2.5, 40.0, 8.0);
            let env = generate_single(&m, &ego(ego_y, speed), &h, &road, &GenerationConfig::default()).unwrap();
            for p in &env.grid {
                prop_assert!(p.lateral_min <= p.lateral_max);
                prop_assert!(0.0 <= p.speed_min && p.speed_min <= p.speed_max);
                prop_assert!(p.lateral_min >= road.right_limit && p.lateral_max <= road.left_limit);
                prop_assert!(p.sub_lane_min <= p.sub_lane_max);
            }
        }
    }
}
