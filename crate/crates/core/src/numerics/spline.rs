use serde::{Deserialize, Serialize};

use super::NumericsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub y: f64,
    pub value: f64,
}

impl Knot {
    pub const fn new(y: f64, value: f64) -> Self {
        Self { y, value }
    }
}

impl From<(f64, f64)> for Knot {
    fn from((y, value): (f64, f64)) -> Self {
        Self { y, value }
    }
}

/// Natural cubic spline. Segment `i` on `[y_i, y_{i+1}]` is
/// `a + b·dy + c·dy² + d·dy³` with `dy = y - y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    knots: Vec<Knot>,
    coeffs: Vec<[f64; 4]>,
}

impl CubicSpline {
    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    /// Per-segment `[a, b, c, d]`.
    pub fn coefficients(&self) -> &[[f64; 4]] {
        &self.coeffs
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0].y, self.knots[self.knots.len() - 1].y)
    }

    pub fn segment_count(&self) -> usize {
        self.coeffs.len()
    }

    /// Index of the segment holding `y` (the last segment owns the right end).
    pub fn segment_of(&self, y: f64) -> usize {
        let idx = self.knots.partition_point(|k| k.y <= y);
        idx.saturating_sub(1).min(self.coeffs.len() - 1)
    }

    pub fn eval(&self, y: f64) -> Result<f64, NumericsError> {
        let (lo, hi) = self.domain();
        if !(y >= lo && y <= hi) {
            return Err(NumericsError::OutOfDomain { y, lo, hi });
        }
        if y == hi {
            return Ok(self.knots[self.knots.len() - 1].value);
        }
        Ok(self.eval_segment(self.segment_of(y), y))
    }

    /// Evaluates with `y` clamped into the domain, holding the end values.
    pub fn eval_clamped(&self, y: f64) -> f64 {
        let (lo, hi) = self.domain();
        if y <= lo {
            self.knots[0].value
        } else if y >= hi {
            self.knots[self.knots.len() - 1].value
        } else {
            self.eval_segment(self.segment_of(y), y)
        }
    }

    /// Evaluates segment `seg`'s polynomial at `y` (no domain check, so
    /// the polynomial may be extended past its own interval).
    pub fn eval_segment(&self, seg: usize, y: f64) -> f64 {
        let [a, b, c, d] = self.coeffs[seg];
        let dy = y - self.knots[seg].y;
        a + dy * (b + dy * (c + dy * d))
    }

    /// `order`-th derivative (0..=3) of segment `seg`'s polynomial at `y`.
    pub fn segment_derivative(&self, seg: usize, y: f64, order: u8) -> f64 {
        let [a, b, c, d] = self.coeffs[seg];
        let dy = y - self.knots[seg].y;
        match order {
            0 => a + dy * (b + dy * (c + dy * d)),
            1 => b + dy * (2.0 * c + 3.0 * d * dy),
            2 => 2.0 * c + 6.0 * d * dy,
            3 => 6.0 * d,
            _ => 0.0,
        }
    }

    pub fn derivative(&self, y: f64, order: u8) -> Result<f64, NumericsError> {
        let (lo, hi) = self.domain();
        if !(y >= lo && y <= hi) {
            return Err(NumericsError::OutOfDomain { y, lo, hi });
        }
        Ok(self.segment_derivative(self.segment_of(y), y, order))
    }
}

fn check_knots(knots: &[Knot]) -> Result<(), NumericsError> {
    if knots.len() < 2 {
        return Err(NumericsError::TooFewKnots(knots.len()));
    }
    if let Some(i) = knots.iter().position(|k| !k.y.is_finite() || !k.value.is_finite()) {
        return Err(NumericsError::NonFinite(i));
    }
    for (i, w) in knots.windows(2).enumerate() {
        if w[1].y == w[0].y {
            return Err(NumericsError::DuplicateAbscissa(w[0].y));
        }
        if w[1].y < w[0].y {
            return Err(NumericsError::UnsortedKnots(i + 1));
        }
    }
    Ok(())
}

/// Fits the natural cubic spline (zero second derivative at both ends)
/// through `knots`, which must have strictly increasing `y`.
pub fn fit_natural_cubic(knots: &[Knot]) -> Result<CubicSpline, NumericsError> {
    check_knots(knots)?;
    let n = knots.len();
    let h: Vec<f64> = knots.windows(2).map(|w| w[1].y - w[0].y).collect();
    let slope: Vec<f64> = knots
        .windows(2)
        .zip(&h)
        .map(|(w, h)| (w[1].value - w[0].value) / h)
        .collect();

    // Second derivatives at the knots; the end values stay zero.
    let mut m = vec![0.0; n];
    if n > 2 {
        // Thomas algorithm on the interior system.
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            rhs[i] = 6.0 * (slope[i + 1] - slope[i]);
        }
        for i in 1..k {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * h[i];
            rhs[i] -= w * rhs[i - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
        }
    }

    let coeffs = (0..n - 1)
        .map(|i| {
            [
                knots[i].value,
                slope[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0,
                m[i] / 2.0,
                (m[i + 1] - m[i]) / (6.0 * h[i]),
            ]
        })
        .collect();
    Ok(CubicSpline { knots: knots.to_vec(), coeffs })
}

/// Sample index with the largest `|value - S(y)|` and that error; ties go to
/// the smallest index.
pub fn max_error_point(
    spline: &CubicSpline,
    channel: &[(f64, f64)],
) -> Result<(usize, f64), NumericsError> {
    if channel.is_empty() {
        return Err(NumericsError::EmptyChannel);
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &(y, v)) in channel.iter().enumerate() {
        let err = (v - spline.eval(y)?).abs();
        if err > best.1 {
            best = (i, err);
        }
    }
    Ok(best)
}

/// Knots of `a` strictly before `junction_y` followed by knots of `b` at or
/// after it. On an abscissa collision the `b` knot wins.
pub fn merge_at_junction(
    knots_a: &[Knot],
    knots_b: &[Knot],
    junction_y: f64,
) -> Result<Vec<Knot>, NumericsError> {
    let left: Vec<Knot> = knots_a.iter().copied().filter(|k| k.y < junction_y).collect();
    let right: Vec<Knot> = knots_b.iter().copied().filter(|k| k.y >= junction_y).collect();
    if left.is_empty() {
        return Err(NumericsError::EmptySide("a"));
    }
    if right.is_empty() {
        return Err(NumericsError::EmptySide("b"));
    }
    let mut merged: Vec<Knot> = left;
    merged.extend(right);
    merged.sort_by(|p, q| p.y.total_cmp(&q.y));
    let mut out: Vec<Knot> = Vec::with_capacity(merged.len());
    for k in merged {
        match out.last_mut() {
            // right-side knots come later in the sorted order
            Some(last) if last.y == k.y => *last = k,
            _ => out.push(k),
        }
    }
    Ok(out)
}

/// One natural spline over the `a` knots before the junction and the `b`
/// knots from the junction on.
pub fn piecewise_combine(
    knots_a: &[Knot],
    knots_b: &[Knot],
    junction_y: f64,
) -> Result<CubicSpline, NumericsError> {
    fit_natural_cubic(&merge_at_junction(knots_a, knots_b, junction_y)?)
}
