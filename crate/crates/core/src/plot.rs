//! Standalone SVG renderings of envelopes and models.
//!
//! Output depends only on the input document: fixed canvas, fixed number
//! formatting, no timestamps.

use std::fmt::Write as _;

use crate::constraints::ConstraintEnvelope;
use crate::keyframe::ScenarioModel;
use crate::numerics::{fit_natural_cubic, CubicSpline, NumericsError};

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 40.0;

/// Maps road coordinates onto the canvas: `y` runs left to right, lateral
/// positions grow upwards.
struct Canvas {
    y0: f64,
    y1: f64,
    l0: f64,
    l1: f64,
    body: String,
}

impl Canvas {
    fn new(y0: f64, y1: f64, l0: f64, l1: f64) -> Self {
        let (y1, l1) = (y1.max(y0 + 1e-6), l1.max(l0 + 1e-6));
        Self { y0, y1, l0, l1, body: String::new() }
    }

    fn px(&self, y: f64) -> f64 {
        MARGIN + (y - self.y0) / (self.y1 - self.y0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, lateral: f64) -> f64 {
        HEIGHT - MARGIN - (lateral - self.l0) / (self.l1 - self.l0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn polyline(&mut self, pts: &[(f64, f64)], class: &str) {
        let coords: Vec<String> =
            pts.iter().map(|&(y, l)| format!("{:.2},{:.2}", self.px(y), self.py(l))).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline class="{class}" fill="none" points="{}"/>"#,
            coords.join(" ")
        );
    }

    fn hline(&mut self, lateral: f64, class: &str) {
        let (a, b) = (self.y0, self.y1);
        self.polyline(&[(a, lateral), (b, lateral)], class);
    }

    fn rect(&mut self, y0: f64, y1: f64, l0: f64, l1: f64, class: &str) {
        let (x, w) = (self.px(y0), self.px(y1) - self.px(y0));
        let (top, h) = (self.py(l1), self.py(l0) - self.py(l1));
        let _ = writeln!(
            self.body,
            r#"<rect class="{class}" x="{x:.2}" y="{top:.2}" width="{w:.2}" height="{h:.2}"/>"#
        );
    }

    fn text(&mut self, y: f64, lateral: f64, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            self.px(y),
            self.py(lateral),
            escape(s)
        );
    }

    fn finish(self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        out.push_str(
            "<style>\
.road{stroke:#444;stroke-width:2}\
.lane{stroke:#999;stroke-dasharray:8 6}\
.bound{stroke:#c0392b;stroke-width:2}\
.mean{stroke:#2471a3;stroke-width:1.5;stroke-dasharray:4 3}\
.hazard{fill:#f5b041;stroke:#935116}\
text{font-family:monospace;font-size:12px}\
</style>\n",
        );
        let _ = writeln!(out, "<title>{}</title>", escape(title));
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn envelope_svg(env: &ConstraintEnvelope) -> String {
    let road = env.road;
    let y0 = env.grid.first().map_or(0.0, |p| p.y);
    let y1 = env.grid.last().map_or(1.0, |p| p.y);
    let mut c = Canvas::new(y0, y1, road.right_limit - 0.5, road.left_limit + 0.5);
    c.hline(road.right_limit, "road");
    c.hline(road.left_limit, "road");
    c.hline(road.lane_width / 2.0, "lane");
    for h in &env.hazards {
        let (a, b) = h.y_extent();
        let (l, r) = h.x_extent();
        c.rect(a.max(y0), b.min(y1).max(a.max(y0)), l, r, "hazard");
    }
    let lo: Vec<(f64, f64)> = env.grid.iter().map(|p| (p.y, p.lateral_min)).collect();
    let hi: Vec<(f64, f64)> = env.grid.iter().map(|p| (p.y, p.lateral_max)).collect();
    let mean: Vec<(f64, f64)> = env.grid.iter().map(|p| (p.y, p.lateral_mean)).collect();
    c.polyline(&lo, "bound");
    c.polyline(&hi, "bound");
    c.polyline(&mean, "mean");
    c.text(y0, road.left_limit + 0.3, &format!("horizon {:.1} m", env.horizon_m));
    c.finish("constraint envelope")
}

fn sample(s: &CubicSpline, n: usize) -> Vec<(f64, f64)> {
    let (a, b) = s.domain();
    (0..=n)
        .map(|i| {
            let y = a + (b - a) * i as f64 / n as f64;
            (y, s.eval_clamped(y))
        })
        .collect()
}

/// Model bands in hazard-centric coordinates; the hazard sits at `y = 0`.
pub fn model_svg(model: &ScenarioModel) -> Result<String, NumericsError> {
    let hi = fit_natural_cubic(&model.lateral_knots(1.0))?;
    let lo = fit_natural_cubic(&model.lateral_knots(-1.0))?;
    let mean = fit_natural_cubic(&model.lateral_knots(0.0))?;
    let (y0, y1) = hi.domain();
    let pts = [sample(&hi, 400), sample(&lo, 400), sample(&mean, 400)];
    let (mut l0, mut l1) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in pts.iter().flatten() {
        l0 = l0.min(p.1);
        l1 = l1.max(p.1);
    }
    let pad = 0.1 * (l1 - l0).max(1.0);
    let mut c = Canvas::new(y0.min(-model.d_thresh), y1, l0 - pad, l1 + pad);
    c.polyline(&[(0.0, l0 - pad), (0.0, l1 + pad)], "lane");
    c.polyline(&pts[0], "bound");
    c.polyline(&pts[1], "bound");
    c.polyline(&pts[2], "mean");
    c.text(y0.min(-model.d_thresh), l1, &format!("{} d_thresh {:.2} m", model.label, model.d_thresh));
    Ok(c.finish(&format!("scenario model {}", model.label)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{EnvelopePoint, ENVELOPE_FORMAT_VERSION};
    use crate::geometry::{ClosenessClass, HazardDescriptor, RoadSpec, SizeClass};

    fn env(hazards: usize) -> ConstraintEnvelope {
        let grid = (0..20)
            .map(|i| EnvelopePoint {
                y: i as f64 * 0.5,
                lateral_min: -0.5,
                lateral_max: 0.5,
                lateral_mean: 0.0,
                sub_lane_min: 6,
                sub_lane_max: 11,
                speed_min: 8.0,
                speed_max: 9.0,
            })
            .collect();
        let h = |y| {
            HazardDescriptor::new([-2.5, y], 2.0, 2.0, SizeClass::Moderate, ClosenessClass::Near).unwrap()
        };
        ConstraintEnvelope {
            format_version: ENVELOPE_FORMAT_VERSION,
            road_heading: 0.0,
            horizon_m: 10.0,
            road: RoadSpec::default(),
            hazards: (0..hazards).map(|i| h(2.0 + 3.0 * i as f64)).collect(),
            grid,
            junctions: vec![],
        }
    }

    #[test]
    fn shapes_counted() {
        let one = envelope_svg(&env(1));
        assert_eq!(one.matches(r#"class="bound""#).count(), 2);
        assert_eq!(one.matches("<rect").count(), 1);
        assert_eq!(envelope_svg(&env(3)).matches("<rect").count(), 3);
        assert_eq!(one, envelope_svg(&env(1)));
        assert!(one.starts_with("<svg"));
    }
}
