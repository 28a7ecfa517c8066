//! Python bindings for hazard-lfd.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ::hazard_lfd::analysis::{paired_t_test, significance_report, wilcoxon_signed_rank, PopulationSample};
use ::hazard_lfd::config::Defaults;
use ::hazard_lfd::constraints::{generate_multi, ConstraintEnvelope, EgoState};
use ::hazard_lfd::demogen::{generate_population, Factor};
use ::hazard_lfd::geometry::{
    point_from_hazard_centric, Frame, FrameKind, HazardDescriptor, ScenarioLabel, Trajectory as CoreTrajectory,
};
use ::hazard_lfd::io::{envelope_from_json, model_from_json, read_trajectory_csv, to_json, write_trajectory_csv};
use ::hazard_lfd::keyframe::{extract_keyframe_indices, train_scenario_model, ScenarioModel as CoreModel};
use ::hazard_lfd::numerics::{dtw_align, fit_natural_cubic, Knot};
use ::hazard_lfd::plot::{envelope_svg, model_svg};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn defaults(config: Option<&str>) -> PyResult<Defaults> {
    Defaults::from_overrides(config).map_err(err)
}

fn label(s: &str) -> PyResult<ScenarioLabel> {
    s.parse().map_err(err)
}

/// Time-ordered frames `(t, x, y, heading, vx, vy)` in world coordinates.
#[pyclass(module = "hazard_lfd", skip_from_py_object)]
#[derive(Clone)]
pub struct Trajectory {
    inner: CoreTrajectory,
}

#[pymethods]
impl Trajectory {
    #[new]
    fn new(rows: Vec<(f64, f64, f64, f64, f64, f64)>) -> PyResult<Self> {
        let frames = rows
            .into_iter()
            .map(|(t, x, y, heading, vx, vy)| Frame { t, x, y, heading, vx, vy })
            .collect();
        Ok(Self { inner: CoreTrajectory::new(frames, FrameKind::World).map_err(err)? })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(Self { inner: read_trajectory_csv(text, FrameKind::World).map_err(err)? })
    }

    fn to_csv(&self) -> String {
        write_trajectory_csv(&self.inner)
    }

    fn rows(&self) -> Vec<(f64, f64, f64, f64, f64, f64)> {
        self.inner.frames().iter().map(|f| (f.t, f.x, f.y, f.heading, f.vx, f.vy)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A parked vehicle beside the road.
#[pyclass(module = "hazard_lfd", skip_from_py_object)]
#[derive(Clone)]
pub struct Hazard {
    inner: HazardDescriptor,
}

#[pymethods]
impl Hazard {
    #[new]
    fn new(x: f64, y: f64, length: f64, width: f64, scenario: &str) -> PyResult<Self> {
        let l = label(scenario)?;
        let inner = HazardDescriptor::new([x, y], length, width, l.size, l.closeness).map_err(err)?;
        Ok(Self { inner })
    }

    /// Default footprint for `scenario`, centred at road position `y`.
    #[staticmethod]
    #[pyo3(signature = (scenario, y, config=None))]
    fn default(scenario: &str, y: f64, config: Option<&str>) -> PyResult<Self> {
        let d = defaults(config)?;
        let l = label(scenario)?;
        let road = d.road.with_traffic(l.traffic);
        let mut inner = d.hazards.hazard_for(l, &road, y);
        inner.center = point_from_hazard_centric(inner.center, [0.0, 0.0], d.generation.road_heading);
        Ok(Self { inner })
    }

    #[getter]
    fn center(&self) -> (f64, f64) {
        (self.inner.center[0], self.inner.center[1])
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length
    }

    #[getter]
    fn width(&self) -> f64 {
        self.inner.width
    }

    fn __repr__(&self) -> String {
        let [x, y] = self.inner.center;
        format!("Hazard(x={x}, y={y}, length={}, width={})", self.inner.length, self.inner.width)
    }
}

/// Trained key-frame statistics for one scenario.
#[pyclass(module = "hazard_lfd", skip_from_py_object)]
#[derive(Clone)]
pub struct ScenarioModel {
    inner: CoreModel,
}

#[pymethods]
impl ScenarioModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: model_from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        to_json(&self.inner)
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label.to_string()
    }

    #[getter]
    fn d_thresh(&self) -> f64 {
        self.inner.d_thresh
    }

    #[getter]
    fn n_demos(&self) -> usize {
        self.inner.n_demos
    }

    /// `(y_mu, lateral_mu, lateral_sigma, speed_mu, speed_sigma, support)`
    /// per key-frame.
    fn keyframes(&self) -> Vec<(f64, f64, f64, f64, f64, usize)> {
        self.inner
            .keyframes
            .iter()
            .map(|k| (k.y_mu, k.lateral_mu, k.lateral_sigma, k.speed_mu, k.speed_sigma, k.support))
            .collect()
    }

    fn to_svg(&self) -> PyResult<String> {
        model_svg(&self.inner).map_err(err)
    }
}

/// Lateral and speed bounds over a longitudinal grid.
#[pyclass(module = "hazard_lfd", skip_from_py_object)]
#[derive(Clone)]
pub struct Envelope {
    inner: ConstraintEnvelope,
}

#[pymethods]
impl Envelope {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: envelope_from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        to_json(&self.inner)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn to_svg(&self) -> String {
        envelope_svg(&self.inner)
    }

    /// `(y, lateral_min, lateral_max, speed_min, speed_max)` per grid point.
    fn grid(&self) -> Vec<(f64, f64, f64, f64, f64)> {
        self.inner
            .grid
            .iter()
            .map(|p| (p.y, p.lateral_min, p.lateral_max, p.speed_min, p.speed_max))
            .collect()
    }

    fn junctions(&self) -> Vec<(usize, usize, f64)> {
        self.inner.junctions.iter().map(|j| (j.first, j.second, j.y)).collect()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon_m
    }
}

/// Synthetic drivers for one scenario.
#[pyclass(module = "hazard_lfd", skip_from_py_object)]
pub struct Population {
    label: ScenarioLabel,
    hazard: HazardDescriptor,
    road_heading: f64,
    d_thresh: f64,
    demos: Vec<CoreTrajectory>,
    onsets: Vec<f64>,
    seeds: Vec<u64>,
}

#[pymethods]
impl Population {
    fn demos(&self) -> Vec<Trajectory> {
        self.demos.iter().map(|t| Trajectory { inner: t.clone() }).collect()
    }

    fn onsets(&self) -> Vec<f64> {
        self.onsets.clone()
    }

    fn seeds(&self) -> Vec<u64> {
        self.seeds.clone()
    }

    #[getter]
    fn hazard(&self) -> Hazard {
        Hazard { inner: self.hazard }
    }

    #[getter]
    fn label(&self) -> String {
        self.label.to_string()
    }

    fn __len__(&self) -> usize {
        self.demos.len()
    }
}

impl Population {
    fn sample(&self) -> PopulationSample {
        PopulationSample {
            label: self.label,
            hazard: self.hazard,
            road_heading: self.road_heading,
            d_thresh: self.d_thresh,
            demos: self.demos.clone(),
        }
    }
}

/// Generates `n` demonstrations of `scenario` with the hazard at `y = 0`.
#[pyfunction]
#[pyo3(signature = (scenario, n, seed, style_mix=0.5, factor=None, config=None))]
fn simulate(
    scenario: &str,
    n: usize,
    seed: u64,
    style_mix: f64,
    factor: Option<&str>,
    config: Option<&str>,
) -> PyResult<Population> {
    let d = defaults(config)?;
    let l = label(scenario)?;
    let cal = match factor {
        None => d.calibration.composite(l),
        Some(f) => {
            let f = match f {
                "small" | "moderate" => Factor::Small,
                "large" => Factor::Large,
                "near" => Factor::Near,
                "far" => Factor::Far,
                other => return Err(err(format!("unknown factor `{other}`"))),
            };
            d.calibration.marginal(l, f)
        }
    };
    let road = d.road.with_traffic(l.traffic);
    let rh = d.generation.road_heading;
    let mut hazard = d.hazards.hazard_for(l, &road, 0.0);
    hazard.center = point_from_hazard_centric(hazard.center, [0.0, 0.0], rh);
    let pop = generate_population(n, &cal, &hazard, &road, rh, seed, style_mix, &d.population, &d.generator)
        .map_err(err)?;
    Ok(Population {
        label: l,
        hazard,
        road_heading: rh,
        d_thresh: cal.d_thresh_mu,
        onsets: pop.demos.iter().map(|x| x.onset_d_thresh).collect(),
        demos: pop.demos.into_iter().map(|x| x.trajectory).collect(),
        seeds: pop.seeds,
    })
}

/// Trains a model; returns it with the indices of demos rejected for
/// leaving the road.
#[pyfunction]
#[pyo3(signature = (demos, scenario, hazard, config=None))]
fn train(
    demos: Vec<PyRef<'_, Trajectory>>,
    scenario: &str,
    hazard: PyRef<'_, Hazard>,
    config: Option<&str>,
) -> PyResult<(ScenarioModel, Vec<usize>)> {
    let d = defaults(config)?;
    let l = label(scenario)?;
    let road = d.road.with_traffic(l.traffic);
    let trajs: Vec<CoreTrajectory> = demos.iter().map(|t| t.inner.clone()).collect();
    let out = train_scenario_model(&trajs, &hazard.inner, &road, l, &d.training.options(d.generation.road_heading))
        .map_err(err)?;
    Ok((ScenarioModel { inner: out.model }, out.rejected))
}

/// Envelope for the ego `(x, y, heading, speed)` and hazards in travel
/// order, one model each.
#[pyfunction]
#[pyo3(signature = (models, hazards, ego, config=None))]
fn generate(
    models: Vec<PyRef<'_, ScenarioModel>>,
    hazards: Vec<PyRef<'_, Hazard>>,
    ego: (f64, f64, f64, f64),
    config: Option<&str>,
) -> PyResult<Envelope> {
    let d = defaults(config)?;
    if models.is_empty() {
        return Err(err("need at least one model"));
    }
    let ms: Vec<CoreModel> = models.iter().map(|m| m.inner.clone()).collect();
    let hs: Vec<HazardDescriptor> = hazards.iter().map(|h| h.inner).collect();
    let road = d.road.with_traffic(ms[0].label.traffic);
    let cfg = d.generation;
    let e = EgoState::new(ego.0, ego.1, ego.2, ego.3, &road, cfg.road_heading).map_err(err)?;
    Ok(Envelope { inner: generate_multi(&ms, &e, &hs, &road, &cfg).map_err(err)? })
}

/// Significance report between two populations paired by index, as CSV.
#[pyfunction]
#[pyo3(signature = (a, b, config=None))]
fn compare(a: PyRef<'_, Population>, b: PyRef<'_, Population>, config: Option<&str>) -> PyResult<String> {
    let d = defaults(config)?;
    let road = d.road.with_traffic(a.label.traffic);
    let r = significance_report(&a.sample(), &b.sample(), &road).map_err(err)?;
    Ok(r.to_csv())
}

/// `(t, p)` of the paired t-test.
#[pyfunction]
fn paired_t(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = paired_t_test(&a, &b).map_err(err)?;
    Ok((r.statistic, r.p_value))
}

/// `(W, p)` of the Wilcoxon signed-rank test.
#[pyfunction]
fn wilcoxon(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = wilcoxon_signed_rank(&a, &b).map_err(err)?;
    Ok((r.statistic, r.p_value))
}

/// Natural cubic spline through `knots`, evaluated at `ys`.
#[pyfunction]
fn spline_eval(knots: Vec<(f64, f64)>, ys: Vec<f64>) -> PyResult<Vec<f64>> {
    let ks: Vec<Knot> = knots.into_iter().map(Knot::from).collect();
    let s = fit_natural_cubic(&ks).map_err(err)?;
    ys.into_iter().map(|y| s.eval(y).map_err(err)).collect()
}

/// Warp path and total cost.
#[pyfunction]
fn dtw(a: Vec<f64>, b: Vec<f64>) -> PyResult<(Vec<(usize, usize)>, f64)> {
    let (path, cost) = dtw_align(&a, &b).map_err(err)?;
    Ok((path.pairs().to_vec(), cost))
}

/// Key-frame sample indices of a lateral channel `(y, x)`.
#[pyfunction]
#[pyo3(signature = (points, epsilon=0.1))]
fn keyframe_indices(points: Vec<(f64, f64)>, epsilon: f64) -> PyResult<Vec<usize>> {
    let frames = points
        .into_iter()
        .enumerate()
        .map(|(i, (y, x))| Frame { t: i as f64, x, y, heading: 0.0, vx: 0.0, vy: 0.0 })
        .collect();
    let t = CoreTrajectory::new(frames, FrameKind::HazardCentric).map_err(err)?;
    Ok(extract_keyframe_indices(&t, epsilon).map_err(err)?.indices)
}

#[pymodule]
fn hazard_lfd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Trajectory>()?;
    m.add_class::<Hazard>()?;
    m.add_class::<ScenarioModel>()?;
    m.add_class::<Envelope>()?;
    m.add_class::<Population>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(paired_t, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon, m)?)?;
    m.add_function(wrap_pyfunction!(spline_eval, m)?)?;
    m.add_function(wrap_pyfunction!(dtw, m)?)?;
    m.add_function(wrap_pyfunction!(keyframe_indices, m)?)?;
    Ok(())
}
