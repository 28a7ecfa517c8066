//! Key-frame extraction, DTW alignment across demonstrations, clustering
//! into mean/deviation key-frames, onset-distance estimation and training
//! of per-scenario models.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    point_to_hazard_centric, to_hazard_centric, FrameKind, GeometryError, HazardDescriptor,
    RoadSpec, ScenarioLabel, Trajectory,
};
use crate::numerics::{dtw_align, fit_natural_cubic, max_error_point, Knot, NumericsError};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Default extraction threshold, half a sub-lane.
pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KeyframeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("longitudinal position stops increasing at frame {0}")]
    NonMonotoneY(usize),
    #[error("trajectory too short ({0} frames)")]
    TooShort(usize),
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("need at least 2 demonstrations, got {0}")]
    TooFewDemos(usize),
    #[error("demonstration {0} has fewer than 2 key-frames")]
    TooFewKeyframes(usize),
    #[error("empty key-frame group {0}")]
    EmptyGroup(usize),
    #[error("no demonstration deviates from its lane")]
    NoBehaviorDetected,
    #[error("need at least 2 usable demonstrations, got {usable} (rejected off-road: {rejected:?})")]
    InsufficientDemos { usable: usize, rejected: Vec<usize> },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyFrame {
    pub y: f64,
    pub lateral: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteredKeyFrame {
    pub y_mu: f64,
    pub lateral_mu: f64,
    pub lateral_sigma: f64,
    pub speed_mu: f64,
    pub speed_sigma: f64,
    pub support: usize,
}

/// Trained behaviour of one scenario: onset distance plus the ordered
/// key-frame statistics, all in the hazard-centric frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioModel {
    pub format_version: u32,
    pub label: ScenarioLabel,
    pub d_thresh: f64,
    pub epsilon: f64,
    pub n_demos: usize,
    pub keyframes: Vec<ClusteredKeyFrame>,
}

impl ScenarioModel {
    pub fn validate(&self) -> Result<(), KeyframeError> {
        let bad = |m: String| Err(KeyframeError::InvalidModel(m));
        if self.format_version != MODEL_FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        if !(self.d_thresh > 0.0 && self.d_thresh.is_finite()) {
            return bad(format!("d_thresh must be positive, got {}", self.d_thresh));
        }
        if self.keyframes.len() < 2 {
            return bad("a model needs at least 2 key-frames".into());
        }
        for (i, k) in self.keyframes.iter().enumerate() {
            let finite = [k.y_mu, k.lateral_mu, k.lateral_sigma, k.speed_mu, k.speed_sigma]
                .iter()
                .all(|v| v.is_finite());
            if !finite || k.lateral_sigma < 0.0 || k.speed_sigma < 0.0 || k.support == 0 {
                return bad(format!("key-frame {i} has invalid statistics"));
            }
        }
        if let Some(i) = self.keyframes.windows(2).position(|w| w[1].y_mu <= w[0].y_mu) {
            return bad(format!("key-frame {} does not advance along the road", i + 1));
        }
        Ok(())
    }

    /// Knots `(y_mu, lateral_mu + sign·lateral_sigma)`.
    pub fn lateral_knots(&self, sign: f64) -> Vec<Knot> {
        self.keyframes
            .iter()
            .map(|k| Knot::new(k.y_mu, k.lateral_mu + sign * k.lateral_sigma))
            .collect()
    }

    pub fn speed_knots(&self, sign: f64) -> Vec<Knot> {
        self.keyframes
            .iter()
            .map(|k| Knot::new(k.y_mu, k.speed_mu + sign * k.speed_sigma))
            .collect()
    }
}

fn check_monotone(traj: &Trajectory) -> Result<(), KeyframeError> {
    if traj.len() < 2 {
        return Err(KeyframeError::TooShort(traj.len()));
    }
    if let Some(i) = traj.frames().windows(2).position(|w| w[1].y <= w[0].y) {
        return Err(KeyframeError::NonMonotoneY(i + 1));
    }
    Ok(())
}

/// Outcome of a traced extraction: chosen sample indices (sorted) and the
/// max reconstruction error measured at every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub indices: Vec<usize>,
    pub error_history: Vec<f64>,
}

/// Grows the knot set from the two endpoints by repeatedly adding the
/// sample the current spline misses the most, until every sample is within
/// `epsilon`. Drives on the lateral channel.
pub fn extract_keyframe_indices(traj: &Trajectory, epsilon: f64) -> Result<Extraction, KeyframeError> {
    if !(epsilon > 0.0) {
        return Err(KeyframeError::InvalidEpsilon(epsilon));
    }
    if traj.kind() != FrameKind::HazardCentric {
        return Err(GeometryError::WrongFrameKind {
            expected: FrameKind::HazardCentric,
            actual: traj.kind(),
        }
        .into());
    }
    check_monotone(traj)?;
    let channel: Vec<(f64, f64)> = traj.frames().iter().map(|f| (f.y, f.x)).collect();
    let mut indices = vec![0, channel.len() - 1];
    let mut error_history = Vec::new();
    loop {
        let knots: Vec<Knot> = indices.iter().map(|&i| channel[i].into()).collect();
        let spline = fit_natural_cubic(&knots)?;
        let (worst, err) = max_error_point(&spline, &channel)?;
        error_history.push(err);
        if err < epsilon {
            break;
        }
        match indices.binary_search(&worst) {
            Ok(_) => break,
            Err(pos) => indices.insert(pos, worst),
        }
    }
    Ok(Extraction { indices, error_history })
}

pub fn extract_keyframes(traj: &Trajectory, epsilon: f64) -> Result<Vec<KeyFrame>, KeyframeError> {
    let ex = extract_keyframe_indices(traj, epsilon)?;
    let frames = traj.frames();
    Ok(ex
        .indices
        .iter()
        .map(|&i| KeyFrame { y: frames[i].y, lateral: frames[i].x, speed: frames[i].speed() })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupMember {
    pub demo: usize,
    pub index: usize,
    pub keyframe: KeyFrame,
}

/// Key-frames of every demonstration grouped under the reference
/// demonstration's key-frame indices.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedGroups {
    pub reference: usize,
    pub groups: Vec<Vec<GroupMember>>,
}

/// Demo with the median key-frame count (lower median; earliest on ties).
pub fn reference_demo(counts: &[usize]) -> usize {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let median = sorted[(sorted.len() - 1) / 2];
    counts.iter().position(|&c| c == median).unwrap_or(0)
}

pub fn align_demonstrations(demos: &[Vec<KeyFrame>]) -> Result<AlignedGroups, KeyframeError> {
    if demos.len() < 2 {
        return Err(KeyframeError::TooFewDemos(demos.len()));
    }
    if let Some(i) = demos.iter().position(|d| d.len() < 2) {
        return Err(KeyframeError::TooFewKeyframes(i));
    }
    let counts: Vec<usize> = demos.iter().map(Vec::len).collect();
    let reference = reference_demo(&counts);
    let ref_lateral: Vec<f64> = demos[reference].iter().map(|k| k.lateral).collect();

    let mut groups: Vec<Vec<GroupMember>> = vec![Vec::new(); ref_lateral.len()];
    for (d, kfs) in demos.iter().enumerate() {
        if d == reference {
            for (j, k) in kfs.iter().enumerate() {
                groups[j].push(GroupMember { demo: d, index: j, keyframe: *k });
            }
            continue;
        }
        let lateral: Vec<f64> = kfs.iter().map(|k| k.lateral).collect();
        let (path, _) = dtw_align(&lateral, &ref_lateral)?;
        for &(i, j) in path.pairs() {
            groups[j].push(GroupMember { demo: d, index: i, keyframe: kfs[i] });
        }
    }
    Ok(AlignedGroups { reference, groups })
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and sample deviation per group. A demonstration that DTW matched
/// several times into one group contributes the average of those matches,
/// so `support` counts demonstrations. The first and last groups only take
/// each demonstration's own first and last key-frame.
pub fn cluster_keyframes(aligned: &AlignedGroups) -> Result<Vec<ClusteredKeyFrame>, KeyframeError> {
    let mut last_index: BTreeMap<usize, usize> = BTreeMap::new();
    for m in aligned.groups.iter().flatten() {
        let e = last_index.entry(m.demo).or_insert(0);
        *e = (*e).max(m.index);
    }
    let n_groups = aligned.groups.len();
    let mut out = Vec::with_capacity(n_groups);
    for (g, group) in aligned.groups.iter().enumerate() {
        if group.is_empty() {
            return Err(KeyframeError::EmptyGroup(g));
        }
        let mut per_demo: BTreeMap<usize, (f64, f64, f64, usize)> = BTreeMap::new();
        for m in group {
            if (g == 0 && m.index != 0) || (g + 1 == n_groups && m.index != last_index[&m.demo]) {
                continue;
            }
            let e = per_demo.entry(m.demo).or_insert((0.0, 0.0, 0.0, 0));
            e.0 += m.keyframe.y;
            e.1 += m.keyframe.lateral;
            e.2 += m.keyframe.speed;
            e.3 += 1;
        }
        let reps: Vec<(f64, f64, f64)> = per_demo
            .values()
            .map(|&(y, l, s, c)| {
                let c = c as f64;
                (y / c, l / c, s / c)
            })
            .collect();
        let ys: Vec<f64> = reps.iter().map(|r| r.0).collect();
        let lats: Vec<f64> = reps.iter().map(|r| r.1).collect();
        let speeds: Vec<f64> = reps.iter().map(|r| r.2).collect();
        let (y_mu, _) = mean_and_sd(&ys);
        let (lateral_mu, lateral_sigma) = mean_and_sd(&lats);
        let (speed_mu, speed_sigma) = mean_and_sd(&speeds);
        out.push(ClusteredKeyFrame {
            y_mu,
            lateral_mu,
            lateral_sigma,
            speed_mu,
            speed_sigma,
            support: reps.len(),
        });
    }
    out.sort_by(|a, b| a.y_mu.total_cmp(&b.y_mu));
    Ok(out)
}

/// Detects where a demonstration leaves its lane: the first frame whose
/// lateral deviation exceeds `deviation` and stays above it for at least
/// `persistence` metres of travel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsetDetector {
    pub deviation: f64,
    pub persistence: f64,
}

impl Default for OnsetDetector {
    fn default() -> Self {
        Self { deviation: 0.1, persistence: 1.0 }
    }
}

impl OnsetDetector {
    /// Hazard-centric `y` of the onset, if any.
    pub fn onset_y(&self, traj: &Trajectory, lane_center_x: f64) -> Option<f64> {
        let frames = traj.frames();
        let mut run_start: Option<usize> = None;
        for (i, f) in frames.iter().enumerate() {
            if (f.x - lane_center_x).abs() > self.deviation {
                let start = *run_start.get_or_insert(i);
                if f.y - frames[start].y >= self.persistence {
                    return Some(frames[start].y);
                }
            } else {
                run_start = None;
            }
        }
        None
    }
}

/// Mean onset distance over the demonstrations that show one.
/// `lane_center_x` is the ego lane centre in hazard-centric coordinates.
pub fn estimate_d_thresh(
    demos: &[Trajectory],
    lane_center_x: f64,
    detector: &OnsetDetector,
) -> Result<f64, KeyframeError> {
    let onsets: Vec<f64> = demos
        .iter()
        .filter_map(|d| detector.onset_y(d, lane_center_x))
        .map(|y| -y)
        .collect();
    if onsets.is_empty() {
        return Err(KeyframeError::NoBehaviorDetected);
    }
    Ok(onsets.iter().sum::<f64>() / onsets.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingOptions {
    pub epsilon: f64,
    pub road_heading: f64,
    pub onset: OnsetDetector,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON, road_heading: 0.0, onset: OnsetDetector::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub model: ScenarioModel,
    /// Input indices excluded for leaving the road.
    pub rejected: Vec<usize>,
}

/// Lateral road coordinate of a world point.
fn road_lateral(p: [f64; 2], road_heading: f64) -> f64 {
    point_to_hazard_centric(p, [0.0, 0.0], road_heading)[0]
}

pub fn train_scenario_model(
    demos: &[Trajectory],
    hazard: &HazardDescriptor,
    road: &RoadSpec,
    label: ScenarioLabel,
    options: &TrainingOptions,
) -> Result<TrainingOutcome, KeyframeError> {
    road.validate()?;
    if !(options.epsilon > 0.0) {
        return Err(KeyframeError::InvalidEpsilon(options.epsilon));
    }
    let mut rejected = Vec::new();
    let mut usable = Vec::new();
    for (i, d) in demos.iter().enumerate() {
        let on_road = d
            .frames()
            .iter()
            .all(|f| road.contains(road_lateral([f.x, f.y], options.road_heading)));
        if on_road {
            usable.push(to_hazard_centric(d, hazard, options.road_heading)?);
        } else {
            rejected.push(i);
        }
    }
    if usable.len() < 2 {
        return Err(KeyframeError::InsufficientDemos { usable: usable.len(), rejected });
    }

    let lane_center_x = -road_lateral(hazard.center, options.road_heading);
    let d_thresh = estimate_d_thresh(&usable, lane_center_x, &options.onset)?;

    let mut per_demo = Vec::with_capacity(usable.len());
    for d in &usable {
        let active = d.retain(|f| f.y >= -d_thresh).map_err(|_| KeyframeError::TooShort(0))?;
        per_demo.push(extract_keyframes(&active, options.epsilon)?);
    }
    let aligned = align_demonstrations(&per_demo)?;
    let keyframes = cluster_keyframes(&aligned)?;

    let model = ScenarioModel {
        format_version: MODEL_FORMAT_VERSION,
        label,
        d_thresh,
        epsilon: options.epsilon,
        n_demos: usable.len(),
        keyframes,
    };
    model.validate()?;
    Ok(TrainingOutcome { model, rejected })
}
