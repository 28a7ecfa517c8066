//! Natural cubic splines, max-error search, DTW and spline stitching.

mod dtw;
mod spline;

use thiserror::Error;

pub use dtw::{dtw_align, dtw_align_by, WarpPath};
pub use spline::{
    fit_natural_cubic, max_error_point, merge_at_junction, piecewise_combine, CubicSpline, Knot,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("a spline needs at least 2 knots, got {0}")]
    TooFewKnots(usize),
    #[error("duplicate knot abscissa {0}")]
    DuplicateAbscissa(f64),
    #[error("knot {0} is out of order")]
    UnsortedKnots(usize),
    #[error("knot {0} is not finite")]
    NonFinite(usize),
    #[error("{y} is outside the spline domain [{lo}, {hi}]")]
    OutOfDomain { y: f64, lo: f64, hi: f64 },
    #[error("empty channel")]
    EmptyChannel,
    #[error("empty sequence")]
    EmptySequence,
    #[error("knot set {0} contributes nothing on its side of the junction")]
    EmptySide(&'static str),
}
