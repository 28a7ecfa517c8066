//! Binned speed and sub-lane measures and paired significance tests.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::geometry::{
    point_to_hazard_centric, to_hazard_centric, FrameKind, GeometryError, HazardDescriptor,
    RoadSpec, ScenarioLabel, Trajectory,
};

pub const BIN_WIDTH: f64 = 0.5;
pub const ALPHA: f64 = 0.05;
/// Largest pair count for which the exact Wilcoxon distribution is used.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("no frames remain after the onset distance")]
    EmptyAfterThreshold,
    #[error("samples have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("all differences are identical; the t statistic is undefined")]
    DegenerateSample,
    #[error("all differences are zero")]
    AllZeroDifferences,
    #[error("populations {0} and {1} were recorded under different traffic")]
    CrossTrafficComparison(ScenarioLabel, ScenarioLabel),
    #[error("expected a {expected:?} trajectory")]
    WrongFrameKind { expected: FrameKind },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub start: f64,
    pub mean_value: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedSeries {
    pub bins: Vec<Bin>,
}

impl BinnedSeries {
    fn from_samples(samples: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut acc: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
        for (y, v) in samples {
            let e = acc.entry((y / BIN_WIDTH).floor() as i64).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
        let bins = acc
            .into_iter()
            .map(|(k, (sum, n))| Bin {
                start: k as f64 * BIN_WIDTH,
                mean_value: sum / n as f64,
                sample_count: n,
            })
            .collect();
        Self { bins }
    }

    pub fn total_samples(&self) -> usize {
        self.bins.iter().map(|b| b.sample_count).sum()
    }

    /// Average of the per-bin means.
    pub fn mean_of_bins(&self) -> f64 {
        self.bins.iter().map(|b| b.mean_value).sum::<f64>() / self.bins.len() as f64
    }
}

/// Speed and sub-lane series over 0.5 m bins of hazard-centric `y`, from
/// `-d_thresh` on. `hazard_lateral` is the hazard centre's road-frame
/// lateral position, needed to place frames in sub-lanes.
pub fn bin_measures(
    traj: &Trajectory,
    road: &RoadSpec,
    d_thresh: f64,
    hazard_lateral: f64,
) -> Result<(BinnedSeries, BinnedSeries), AnalysisError> {
    if traj.kind() != FrameKind::HazardCentric {
        return Err(AnalysisError::WrongFrameKind { expected: FrameKind::HazardCentric });
    }
    let active: Vec<_> = traj.frames().iter().filter(|f| f.y >= -d_thresh).collect();
    if active.is_empty() {
        return Err(AnalysisError::EmptyAfterThreshold);
    }
    let mut lanes = Vec::with_capacity(active.len());
    for f in &active {
        lanes.push((f.y, road.sub_lane_index(f.x + hazard_lateral)? as f64));
    }
    let speed = BinnedSeries::from_samples(active.iter().map(|f| (f.y, f.speed())));
    Ok((speed, BinnedSeries::from_samples(lanes.into_iter())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    PairedT,
    WilcoxonSignedRank,
    WilcoxonExact,
}

impl TestMethod {
    pub fn name(self) -> &'static str {
        match self {
            TestMethod::PairedT => "paired_t",
            TestMethod::WilcoxonSignedRank => "wilcoxon_normal",
            TestMethod::WilcoxonExact => "wilcoxon_exact",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub method: TestMethod,
}

fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TestResult, AnalysisError> {
    let d = differences(a, b)?;
    let n = d.len();
    if n < 2 {
        return Err(AnalysisError::TooFewPairs(n));
    }
    if d.iter().all(|&x| x == d[0]) {
        return Err(AnalysisError::DegenerateSample);
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let t = mean / (var.sqrt() / nf.sqrt());
    Ok(TestResult {
        statistic: t,
        p_value: student_t_two_sided(t, nf - 1.0),
        n,
        method: TestMethod::PairedT,
    })
}

/// Mid-ranks of `|d|`, doubled so that tied ranks stay integral.
fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&i, &j| abs[i].total_cmp(&abs[j]));
    let mut ranks = vec![0u64; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean; doubled that is i + j + 2
        for &k in &order[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        i = j + 1;
    }
    ranks
}

/// Number of sign assignments whose doubled positive-rank sum equals each
/// total, over all `2^n` assignments.
fn signed_rank_counts(ranks: &[u64]) -> Vec<f64> {
    let total: u64 = ranks.iter().sum();
    let mut counts = vec![0.0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult, AnalysisError> {
    let d: Vec<f64> = differences(a, b)?.into_iter().filter(|&x| x != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Err(AnalysisError::AllZeroDifferences);
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let plus2: u64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let total2: u64 = ranks.iter().sum();
    let w2 = plus2.min(total2 - plus2);
    let w = w2 as f64 / 2.0;

    if n <= WILCOXON_EXACT_MAX_N {
        let counts = signed_rank_counts(&ranks);
        let tail: f64 = counts[..=w2 as usize].iter().sum();
        let p = (2.0 * tail / 2f64.powi(n as i32)).min(1.0);
        return Ok(TestResult { statistic: w, p_value: p, n, method: TestMethod::WilcoxonExact });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut ties = 0.0;
    let mut sorted = ranks.clone();
    sorted.sort_unstable();
    for g in sorted.chunk_by(|x, y| x == y) {
        let t = g.len() as f64;
        ties += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let p = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(TestResult { statistic: w, p_value: p, n, method: TestMethod::WilcoxonSignedRank })
}

/// Demonstrations of one scenario with what is needed to bin them.
#[derive(Debug, Clone)]
pub struct PopulationSample {
    pub label: ScenarioLabel,
    pub hazard: HazardDescriptor,
    pub road_heading: f64,
    pub d_thresh: f64,
    /// World-frame drives; index `i` is paired with index `i` of the other
    /// population.
    pub demos: Vec<Trajectory>,
}

/// Per-demo bin-averaged `(speed, sub-lane)`.
pub fn demo_scalars(
    pop: &PopulationSample,
    road: &RoadSpec,
) -> Result<Vec<(f64, f64)>, AnalysisError> {
    let hazard_lateral = point_to_hazard_centric(pop.hazard.center, [0.0, 0.0], pop.road_heading)[0];
    pop.demos
        .iter()
        .map(|d| {
            let hc = to_hazard_centric(d, &pop.hazard, pop.road_heading)?;
            let (speed, lane) = bin_measures(&hc, road, pop.d_thresh, hazard_lateral)?;
            Ok((speed.mean_of_bins(), lane.mean_of_bins()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub contrast: String,
    pub variable: String,
    pub test: TestMethod,
    pub statistic: f64,
    pub p: f64,
    pub n: usize,
    pub significant: bool,
    /// Set when the test could not be computed; reported as `p = 1`.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub rows: Vec<ReportRow>,
}

/// Which factors differ between two labels, e.g. `"closeness"`.
pub fn contrast_factors(a: ScenarioLabel, b: ScenarioLabel) -> String {
    let mut parts = Vec::new();
    if a.size != b.size {
        parts.push("size");
    }
    if a.closeness != b.closeness {
        parts.push("closeness");
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join("+")
    }
}

fn row(contrast: &str, variable: &str, method: TestMethod, r: Result<TestResult, AnalysisError>, n: usize) -> ReportRow {
    match r {
        Ok(t) => ReportRow {
            contrast: contrast.into(),
            variable: variable.into(),
            test: t.method,
            statistic: t.statistic,
            p: t.p_value,
            n: t.n,
            significant: t.p_value < ALPHA,
            note: None,
        },
        Err(e) => ReportRow {
            contrast: contrast.into(),
            variable: variable.into(),
            test: method,
            statistic: 0.0,
            p: 1.0,
            n,
            significant: false,
            note: Some(e.to_string()),
        },
    }
}

/// Both tests on both measures for populations paired by demo index.
pub fn significance_report(
    a: &PopulationSample,
    b: &PopulationSample,
    road: &RoadSpec,
) -> Result<SignificanceReport, AnalysisError> {
    if a.label.traffic != b.label.traffic {
        return Err(AnalysisError::CrossTrafficComparison(a.label, b.label));
    }
    if a.demos.len() != b.demos.len() {
        return Err(AnalysisError::LengthMismatch(a.demos.len(), b.demos.len()));
    }
    let sa = demo_scalars(a, road)?;
    let sb = demo_scalars(b, road)?;
    let contrast = format!("{} vs {} ({})", a.label, b.label, contrast_factors(a.label, b.label));
    let n = sa.len();
    let mut rows = Vec::new();
    for (variable, pick) in [("speed", 0usize), ("sub_lane", 1)] {
        let va: Vec<f64> = sa.iter().map(|p| if pick == 0 { p.0 } else { p.1 }).collect();
        let vb: Vec<f64> = sb.iter().map(|p| if pick == 0 { p.0 } else { p.1 }).collect();
        rows.push(row(&contrast, variable, TestMethod::PairedT, paired_t_test(&va, &vb), n));
        let exact = if n <= WILCOXON_EXACT_MAX_N {
            TestMethod::WilcoxonExact
        } else {
            TestMethod::WilcoxonSignedRank
        };
        rows.push(row(&contrast, variable, exact, wilcoxon_signed_rank(&va, &vb), n));
    }
    Ok(SignificanceReport { rows })
}

impl SignificanceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("contrast,variable,test,statistic,p,n,significant\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "\"{}\",{},{},{},{},{},{}",
                r.contrast.replace('"', "\"\""),
                r.variable,
                r.test.name(),
                r.statistic,
                r.p,
                r.n,
                r.significant
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let verdict = if r.significant { "significant" } else { "not significant" };
            let _ = write!(
                out,
                "{:<44} {:<9} {:<16} stat={:>10.4} p={:.4} n={} {}",
                r.contrast,
                r.variable,
                r.test.name(),
                r.statistic,
                r.p,
                r.n,
                verdict
            );
            if let Some(note) = &r.note {
                let _ = write!(out, " ({note})");
            }
            out.push('\n');
        }
        out
    }

    pub fn any_significant(&self) -> bool {
        self.rows.iter().any(|r| r.significant)
    }
}
