//! Synthetic demonstrations standing in for recorded human drives.
//!
//! Each demonstration follows a driver profile: straight driving, a lateral
//! bump built from a natural cubic spline (onset, maximum-curvature point,
//! peak alongside the hazard, then hold or return), a matching slowdown,
//! and white lateral noise. Populations draw profiles around a calibration
//! row. All randomness comes from ChaCha20 keyed by a 64-bit seed, with
//! normals from Box-Muller, so outputs are reproducible across platforms.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    from_hazard_centric, point_to_hazard_centric, ClosenessClass, Frame, FrameKind, GeometryError,
    HazardDescriptor, RoadSpec, ScenarioLabel, SizeClass, Traffic, Trajectory,
};
use crate::numerics::{fit_natural_cubic, CubicSpline, Knot, NumericsError};

pub const CALIBRATION_FORMAT_VERSION: u32 = 1;
pub const BUILTIN_CALIBRATION: &str = include_str!("../data/calibration.toml");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemogenError {
    #[error("infeasible profile: {0}")]
    InfeasibleProfile(String),
    #[error("population needs at least 2 demonstrations, got {0}")]
    PopulationTooSmall(usize),
    #[error("style mix must lie in [0, 1], got {0}")]
    InvalidStyleMix(f64),
    #[error("calibration: {0}")]
    Calibration(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnBehavior {
    ReturnToLane,
    HoldLane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverStyle {
    GoalOriented,
    SafetyOriented,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverProfile {
    pub d_thresh: f64,
    pub peak_deviation: f64,
    pub curvature_point: f64,
    pub return_behavior: ReturnBehavior,
    pub approach_speed: f64,
    pub slowdown_factor: f64,
    pub lateral_noise_sigma: f64,
    pub d_thresh_jitter_sigma: f64,
    pub style: DriverStyle,
}

/// Table variable a calibration row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Small,
    Large,
    Near,
    Far,
}

impl Factor {
    pub fn of_size(size: SizeClass) -> Self {
        match size {
            SizeClass::Moderate => Factor::Small,
            SizeClass::Large => Factor::Large,
        }
    }

    pub fn of_closeness(closeness: ClosenessClass) -> Self {
        match closeness {
            ClosenessClass::Near => Factor::Near,
            ClosenessClass::Far => Factor::Far,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub traffic: Traffic,
    pub variable: Factor,
    pub d_thresh: f64,
    pub curvature_point: f64,
    #[serde(default)]
    pub censored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCalibration {
    pub label: ScenarioLabel,
    pub d_thresh_mu: f64,
    pub curvature_point_mu: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub format_version: u32,
    pub rows: Vec<CalibrationRow>,
}

impl CalibrationTable {
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN_CALIBRATION).expect("built-in calibration parses")
    }

    pub fn from_toml(text: &str) -> Result<Self, DemogenError> {
        let table: CalibrationTable =
            toml::from_str(text).map_err(|e| DemogenError::Calibration(e.to_string()))?;
        if table.format_version != CALIBRATION_FORMAT_VERSION {
            return Err(DemogenError::Calibration(format!(
                "unsupported format_version {}",
                table.format_version
            )));
        }
        for traffic in [Traffic::Unidirectional, Traffic::Bidirectional] {
            for f in [Factor::Small, Factor::Large, Factor::Near, Factor::Far] {
                let n = table.rows.iter().filter(|r| r.traffic == traffic && r.variable == f).count();
                if n != 1 {
                    return Err(DemogenError::Calibration(format!(
                        "expected one row for {traffic:?}/{f:?}, found {n}"
                    )));
                }
            }
        }
        Ok(table)
    }

    pub fn row(&self, traffic: Traffic, variable: Factor) -> &CalibrationRow {
        self.rows
            .iter()
            .find(|r| r.traffic == traffic && r.variable == variable)
            .expect("validated table has every row")
    }

    /// One table row as a calibration for `label`.
    pub fn marginal(&self, label: ScenarioLabel, variable: Factor) -> ScenarioCalibration {
        let r = self.row(label.traffic, variable);
        ScenarioCalibration {
            label,
            d_thresh_mu: r.d_thresh,
            curvature_point_mu: r.curvature_point,
            censored: r.censored,
        }
    }

    /// Full-factorial cell: average of the size row and the closeness row
    /// under the label's traffic condition.
    pub fn composite(&self, label: ScenarioLabel) -> ScenarioCalibration {
        let s = self.row(label.traffic, Factor::of_size(label.size));
        let c = self.row(label.traffic, Factor::of_closeness(label.closeness));
        ScenarioCalibration {
            label,
            d_thresh_mu: (s.d_thresh + c.d_thresh) / 2.0,
            curvature_point_mu: (s.curvature_point + c.curvature_point) / 2.0,
            censored: s.censored || c.censored,
        }
    }
}

pub fn default_calibration(label: ScenarioLabel) -> ScenarioCalibration {
    CalibrationTable::builtin().composite(label)
}

/// Hazard footprints and placement relative to the road edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardGeometry {
    pub moderate_length: f64,
    pub moderate_width: f64,
    pub large_length: f64,
    pub large_width: f64,
    pub near_on_road_fraction: f64,
    pub far_curb_gap: f64,
}

impl HazardGeometry {
    /// Hazard parked on the right edge of `road`, centred at `center_y`.
    pub fn hazard_for(
        &self,
        label: ScenarioLabel,
        road: &RoadSpec,
        center_y: f64,
    ) -> HazardDescriptor {
        let (length, width) = match label.size {
            SizeClass::Moderate => (self.moderate_length, self.moderate_width),
            SizeClass::Large => (self.large_length, self.large_width),
        };
        let inner_edge = match label.closeness {
            ClosenessClass::Near => road.right_limit + self.near_on_road_fraction * width,
            ClosenessClass::Far => road.right_limit - self.far_curb_gap,
        };
        HazardDescriptor {
            center: [inner_edge - width / 2.0, center_y],
            length,
            width,
            size_class: label.size,
            closeness_class: label.closeness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub d_thresh_jitter_sigma: f64,
    pub curvature_jitter_sigma: f64,
    pub peak_jitter_sigma: f64,
    pub lateral_noise_sigma: f64,
    pub approach_speed: f64,
    pub approach_speed_jitter_sigma: f64,
    pub slowdown_factor: f64,
    pub slowdown_jitter_sigma: f64,
    pub safety_peak_offset: f64,
    pub safety_onset_offset: f64,
    pub safety_slowdown_offset: f64,
    pub peak_unidirectional_near: f64,
    pub peak_unidirectional_far: f64,
    pub peak_bidirectional_near: f64,
    pub peak_bidirectional_far: f64,
    pub peak_large_extra: f64,
    #[serde(default)]
    pub stratified: bool,
}

impl PopulationConfig {
    pub fn base_peak(&self, label: ScenarioLabel) -> f64 {
        let base = match (label.traffic, label.closeness) {
            (Traffic::Unidirectional, ClosenessClass::Near) => self.peak_unidirectional_near,
            (Traffic::Unidirectional, ClosenessClass::Far) => self.peak_unidirectional_far,
            (Traffic::Bidirectional, ClosenessClass::Near) => self.peak_bidirectional_near,
            (Traffic::Bidirectional, ClosenessClass::Far) => self.peak_bidirectional_far,
        };
        match label.size {
            SizeClass::Large => base + self.peak_large_extra,
            SizeClass::Moderate => base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub sample_spacing: f64,
    pub approach_length: f64,
    pub exit_length: f64,
    pub return_length: f64,
    pub speed_recovery_length: f64,
    pub onset_threshold: f64,
    pub min_ramp_length: f64,
    pub feasibility_margin: f64,
    /// Spread of the lateral position drivers settle at after returning.
    pub return_offset_sigma: f64,
    pub unidirectional_return: ReturnBehavior,
    pub bidirectional_return: ReturnBehavior,
}

impl GeneratorConfig {
    pub fn return_behavior(&self, traffic: Traffic) -> ReturnBehavior {
        match traffic {
            Traffic::Unidirectional => self.unidirectional_return,
            Traffic::Bidirectional => self.bidirectional_return,
        }
    }
}

/// SplitMix64 output number `counter` for `seed`; used to derive per-demo
/// seeds from a master seed.
pub fn derive_seed(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded ChaCha20 stream producing uniforms and standard normals.
pub struct DemoRng(ChaCha20Rng);

impl DemoRng {
    /// Key = little-endian `seed` followed by 24 zero bytes; `stream`
    /// selects the ChaCha stream id.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(stream);
        Self(rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Box-Muller, cosine branch only.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// A generated drive plus the onset distance actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDemo {
    pub trajectory: Trajectory,
    pub onset_d_thresh: f64,
}

/// Noise-free lateral offset from the lane centre, as a function of
/// hazard-centric `y`.
#[derive(Debug, Clone)]
pub struct LateralShape {
    start: f64,
    floor: f64,
    peak: f64,
    spline: CubicSpline,
}

impl LateralShape {
    /// The spline starts a short lead before the onset so that it crosses
    /// `onset_threshold` exactly at `-d_thresh`, passes the peak at the
    /// curvature point, holds it past the hazard, then holds or returns to
    /// `settle`.
    pub fn new(
        profile: &DriverProfile,
        d_thresh: f64,
        hazard_half_length: f64,
        settle: f64,
        cfg: &GeneratorConfig,
    ) -> Result<Self, DemogenError> {
        let peak = profile.peak_deviation;
        if !(peak > cfg.onset_threshold) {
            return Err(DemogenError::InfeasibleProfile(format!(
                "peak deviation {peak} does not exceed the onset threshold {}",
                cfg.onset_threshold
            )));
        }
        if !(d_thresh > cfg.min_ramp_length) {
            return Err(DemogenError::InfeasibleProfile(format!(
                "onset distance {d_thresh} is shorter than the minimum ramp"
            )));
        }
        let curve = profile.curvature_point.clamp(-d_thresh + cfg.min_ramp_length, 0.0);
        let ramp = curve + d_thresh;
        let lead = cfg.onset_threshold * ramp / peak;
        let plateau_end = (curve + 1.0).max(hazard_half_length);
        let end = plateau_end.max(0.0) + cfg.exit_length + cfg.return_length;
        let settle = settle.min(peak);
        let mut knots = vec![
            Knot::new(-d_thresh - lead, 0.0),
            Knot::new(-d_thresh, cfg.onset_threshold),
            Knot::new(curve, peak),
            Knot::new(plateau_end, peak),
        ];
        match profile.return_behavior {
            ReturnBehavior::ReturnToLane => {
                knots.push(Knot::new(plateau_end + cfg.return_length, settle));
                knots.push(Knot::new(end, settle));
            }
            ReturnBehavior::HoldLane => knots.push(Knot::new(end, peak)),
        }
        let spline = fit_natural_cubic(&knots)?;
        let floor = match profile.return_behavior {
            ReturnBehavior::ReturnToLane => settle.min(0.0),
            ReturnBehavior::HoldLane => 0.0,
        };
        Ok(Self { start: -d_thresh - lead, floor, peak, spline })
    }

    pub fn lateral(&self, y: f64) -> f64 {
        if y <= self.start {
            return 0.0;
        }
        // the undershoot floor only applies once the peak is behind
        let lo = if y > 0.0 { self.floor } else { 0.0 };
        self.spline.eval_clamped(y).clamp(lo, self.peak)
    }

    pub fn slope(&self, y: f64) -> f64 {
        let v = self.lateral(y);
        let (lo, hi) = self.spline.domain();
        let floor = if y > 0.0 { self.floor } else { 0.0 };
        if y <= lo || y >= hi || v <= floor || v >= self.peak {
            return 0.0;
        }
        self.spline.derivative(y, 1).unwrap_or(0.0)
    }

    pub fn start(&self) -> f64 {
        self.start
    }
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn check_profile(profile: &DriverProfile) -> Result<(), DemogenError> {
    let sigmas_ok = profile.lateral_noise_sigma >= 0.0 && profile.d_thresh_jitter_sigma >= 0.0;
    if !sigmas_ok {
        return Err(DemogenError::InfeasibleProfile("noise magnitudes must be non-negative".into()));
    }
    if !(profile.slowdown_factor > 0.0 && profile.slowdown_factor <= 1.0) {
        return Err(DemogenError::InfeasibleProfile(format!(
            "slowdown factor {} outside (0, 1]",
            profile.slowdown_factor
        )));
    }
    if !(profile.approach_speed > 0.0) {
        return Err(DemogenError::InfeasibleProfile("approach speed must be positive".into()));
    }
    Ok(())
}

/// Lateral road coordinate of the hazard centre.
fn hazard_lateral(hazard: &HazardDescriptor, road_heading: f64) -> f64 {
    point_to_hazard_centric(hazard.center, [0.0, 0.0], road_heading)[0]
}

/// Generates one world-frame demonstration. Deterministic in `seed`.
pub fn generate_demo(
    profile: &DriverProfile,
    hazard: &HazardDescriptor,
    road: &RoadSpec,
    road_heading: f64,
    seed: u64,
    cfg: &GeneratorConfig,
) -> Result<SyntheticDemo, DemogenError> {
    check_profile(profile)?;
    road.validate()?;
    let allowance = road.left_allowance();
    if profile.peak_deviation > allowance {
        return Err(DemogenError::InfeasibleProfile(format!(
            "peak deviation {} exceeds the lateral allowance {allowance}",
            profile.peak_deviation
        )));
    }

    let mut rng = DemoRng::new(seed, 1);
    let d_thresh = profile.d_thresh + profile.d_thresh_jitter_sigma * rng.normal();
    let settle = cfg.return_offset_sigma * rng.normal();
    let shape = LateralShape::new(profile, d_thresh, hazard.length / 2.0, settle, cfg)?;
    let hazard_x = hazard_lateral(hazard, road_heading);

    let y_start = shape.start() - cfg.approach_length;
    let y_end = (hazard.length / 2.0).max(0.0) + cfg.exit_length;
    let count = ((y_end - y_start) / cfg.sample_spacing).floor() as usize + 1;
    let slow_start = shape.start();
    let slow_end = cfg.speed_recovery_length;
    let base_speed = profile.approach_speed;
    let drop = 1.0 - profile.slowdown_factor;

    let mut frames = Vec::with_capacity(count);
    let mut t = 0.0;
    for k in 0..count {
        // integer-step sampling keeps positions exact multiples of the spacing
        let y = y_start + k as f64 * cfg.sample_spacing;
        let noise = profile.lateral_noise_sigma * rng.normal();
        let lateral = (shape.lateral(y) + noise).clamp(road.right_limit, road.left_limit);
        let weight = if y < 0.0 {
            smoothstep(slow_start, 0.0, y)
        } else {
            1.0 - smoothstep(0.0, slow_end, y)
        };
        let speed = base_speed * (1.0 - drop * weight);
        let heading = shape.slope(y).atan();
        let (sin_h, cos_h) = heading.sin_cos();
        if k > 0 {
            t += cfg.sample_spacing / (speed * cos_h);
        }
        frames.push(Frame {
            t,
            x: lateral - hazard_x,
            y,
            heading,
            vx: speed * sin_h,
            vy: speed * cos_h,
        });
    }
    let hc = Trajectory::new(frames, FrameKind::HazardCentric)?;
    let trajectory = from_hazard_centric(&hc, hazard, road_heading)?;
    Ok(SyntheticDemo { trajectory, onset_d_thresh: d_thresh })
}

/// Profiles, per-demo seeds and drives of a generated population.
#[derive(Debug, Clone)]
pub struct Population {
    pub calibration: ScenarioCalibration,
    pub hazard: HazardDescriptor,
    pub master_seed: u64,
    pub profiles: Vec<DriverProfile>,
    pub seeds: Vec<u64>,
    pub demos: Vec<SyntheticDemo>,
}

/// Whether demo `i` of `n` is safety-oriented. Spreads `floor(n·mix)`
/// safety demos evenly over the indices.
pub fn is_safety_oriented(i: usize, style_mix: f64) -> bool {
    let before = (i as f64 * style_mix).floor();
    let after = ((i + 1) as f64 * style_mix).floor();
    after > before
}

/// Standard normal draws per driver for peak, curvature point, approach
/// speed and slowdown. Stratified draws place one driver in each of `n`
/// equal-probability slices of every jitter, in shuffled order.
pub fn profile_normals(n: usize, master_seed: u64, stratified: bool) -> Vec<[f64; 4]> {
    if !stratified {
        return (0..n)
            .map(|i| {
                let mut rng = DemoRng::new(derive_seed(master_seed, i as u64), 0);
                std::array::from_fn(|_| rng.normal())
            })
            .collect();
    }
    let unit = Normal::standard();
    let mut out = vec![[0.0; 4]; n];
    for j in 0..4 {
        let mut rng = DemoRng::new(master_seed, 2 + j as u64);
        let mut slots: Vec<usize> = (0..n).collect();
        for k in (1..n).rev() {
            let pick = (rng.uniform() * (k + 1) as f64) as usize;
            slots.swap(k, pick.min(k));
        }
        for (row, slot) in out.iter_mut().zip(slots) {
            let within = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
            row[j] = unit.inverse_cdf((slot as f64 + within) / n as f64);
        }
    }
    out
}

/// Profile around `calibration` for standard normal draws `z`.
pub fn draw_profile(
    calibration: &ScenarioCalibration,
    style: DriverStyle,
    style_mix: f64,
    z: &[f64; 4],
    pop: &PopulationConfig,
    gen: &GeneratorConfig,
    road: &RoadSpec,
) -> DriverProfile {
    // +(1 - mix) for safety, -mix for goal: zero mean over an exact split
    let shift = match style {
        DriverStyle::SafetyOriented => 1.0 - style_mix,
        DriverStyle::GoalOriented => -style_mix,
    };
    let label = calibration.label;
    let max_peak = road.left_allowance() - gen.feasibility_margin;
    let min_peak = gen.onset_threshold + 0.1;
    let peak = pop.base_peak(label) + pop.peak_jitter_sigma * z[0] + pop.safety_peak_offset * shift;
    let slowdown = pop.slowdown_factor
        + pop.slowdown_jitter_sigma * z[3]
        + pop.safety_slowdown_offset * shift;
    DriverProfile {
        d_thresh: calibration.d_thresh_mu + pop.safety_onset_offset * shift,
        peak_deviation: peak.clamp(min_peak, max_peak.max(min_peak)),
        curvature_point: calibration.curvature_point_mu + pop.curvature_jitter_sigma * z[1],
        return_behavior: gen.return_behavior(label.traffic),
        approach_speed: (pop.approach_speed + pop.approach_speed_jitter_sigma * z[2]).max(1.0),
        slowdown_factor: slowdown.clamp(0.3, 1.0),
        lateral_noise_sigma: pop.lateral_noise_sigma,
        d_thresh_jitter_sigma: pop.d_thresh_jitter_sigma,
        style,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn generate_population(
    n: usize,
    calibration: &ScenarioCalibration,
    hazard: &HazardDescriptor,
    road: &RoadSpec,
    road_heading: f64,
    master_seed: u64,
    style_mix: f64,
    pop: &PopulationConfig,
    gen: &GeneratorConfig,
) -> Result<Population, DemogenError> {
    if n < 2 {
        return Err(DemogenError::PopulationTooSmall(n));
    }
    if !(0.0..=1.0).contains(&style_mix) {
        return Err(DemogenError::InvalidStyleMix(style_mix));
    }
    let draws = profile_normals(n, master_seed, pop.stratified);
    let mut profiles = Vec::with_capacity(n);
    let mut seeds = Vec::with_capacity(n);
    let mut demos = Vec::with_capacity(n);
    for i in 0..n {
        let seed = derive_seed(master_seed, i as u64);
        let style = if is_safety_oriented(i, style_mix) {
            DriverStyle::SafetyOriented
        } else {
            DriverStyle::GoalOriented
        };
        let profile = draw_profile(calibration, style, style_mix, &draws[i], pop, gen, road);
        demos.push(generate_demo(&profile, hazard, road, road_heading, seed, gen)?);
        profiles.push(profile);
        seeds.push(seed);
    }
    Ok(Population {
        calibration: *calibration,
        hazard: *hazard,
        master_seed,
        profiles,
        seeds,
        demos,
    })
}
