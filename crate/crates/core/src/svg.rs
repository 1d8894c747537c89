//! Minimal SVG rendering of measures in the upper half-plane.
//!
//! Output is a plain string built with fixed-precision formatting, so the same
//! measure always produces the same bytes.

use std::fmt::Write;

use crate::measure::{Measure, Point};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 24.0;

/// A reference ray drawn dashed, e.g. a predicted optimal branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GuideRay {
    pub angle: f64,
    pub length: f64,
}

struct Frame {
    scale: f64,
    ox: f64,
    oy: f64,
}

impl Frame {
    fn fit(points: &[Point]) -> Self {
        let (mut xmin, mut xmax, mut ymax) = (0.0f64, 0.0f64, 0.0f64);
        for p in points {
            xmin = xmin.min(p[0]);
            xmax = xmax.max(p[0]);
            ymax = ymax.max(p[1]);
        }
        let span_x = (xmax - xmin).max(1e-9);
        let span_y = ymax.max(1e-9);
        let scale = ((WIDTH - 2.0 * MARGIN) / span_x).min((HEIGHT - 2.0 * MARGIN) / span_y);
        let ox = MARGIN + 0.5 * (WIDTH - 2.0 * MARGIN - scale * span_x) - scale * xmin;
        Self { scale, ox, oy: HEIGHT - MARGIN }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        (self.ox + self.scale * p[0], self.oy - self.scale * p[1])
    }
}

/// Draw every density piece as a stroke whose width grows with the density,
/// atoms as discs, the guide rays dashed, and an arrow toward the light.
pub fn render_measure(measure: &Measure, theta0: f64, guides: &[GuideRay]) -> String {
    let mut pts: Vec<Point> = vec![[0.0, 0.0]];
    for s in measure.segments() {
        pts.push(s.a);
        pts.push(s.b);
    }
    pts.extend(measure.atoms().iter().map(|a| a.pos));
    pts.extend(guides.iter().map(|g| [g.length * g.angle.cos(), g.length * g.angle.sin()]));
    let frame = Frame::fit(&pts);

    let max_density = measure.segments().iter().flat_map(|s| s.pieces.iter().map(|p| p.density)).fold(0.0, f64::max);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let (x0, y0) = frame.map([0.0, 0.0]);
    let _ = writeln!(
        out,
        r##"<line x1="{:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="#999999" stroke-width="0.5"/>"##,
        MARGIN,
        WIDTH - MARGIN
    );

    for g in guides {
        let (x1, y1) = frame.map([g.length * g.angle.cos(), g.length * g.angle.sin()]);
        let _ = writeln!(
            out,
            r##"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="#d62728" stroke-width="1" stroke-dasharray="6 4"/>"##
        );
    }

    for s in measure.segments() {
        for p in &s.pieces {
            if p.density <= 0.0 {
                continue;
            }
            let at = |t: f64| [s.a[0] + t * (s.b[0] - s.a[0]), s.a[1] + t * (s.b[1] - s.a[1])];
            let (xa, ya) = frame.map(at(p.t0));
            let (xb, yb) = frame.map(at(p.t1));
            // Square-root scaling keeps thin tails visible next to a thick base.
            let w = 0.5 + 7.5 * (p.density / max_density).sqrt();
            let _ = writeln!(
                out,
                r##"<line x1="{xa:.2}" y1="{ya:.2}" x2="{xb:.2}" y2="{yb:.2}" stroke="#2ca02c" stroke-width="{w:.2}" stroke-linecap="butt"/>"##
            );
        }
    }

    for a in measure.atoms() {
        if a.mass > 0.0 {
            let (x, y) = frame.map(a.pos);
            let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="#1f77b4"/>"##);
        }
    }

    // Light arrow in the top-right corner, pointing along n.
    let (cx, cy) = (WIDTH - 3.0 * MARGIN, 2.0 * MARGIN);
    let (dx, dy) = (30.0 * theta0.cos(), -30.0 * theta0.sin());
    let _ = writeln!(
        out,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#ff7f0e" stroke-width="2"/>"##,
        cx - 0.5 * dx,
        cy - 0.5 * dy,
        cx + 0.5 * dx,
        cy + 0.5 * dy
    );
    let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#ff7f0e"/>"##, cx + 0.5 * dx, cy + 0.5 * dy);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Segment;

    #[test]
    fn renders_every_piece_and_guide() {
        let m = Measure::new(
            vec![Segment::uniform([0.0, 0.0], [1.0, 0.0], 1.0), Segment::uniform([0.0, 0.0], [-1.0, 1.0], 2.0)],
            Vec::new(),
        )
        .unwrap();
        let svg = render_measure(&m, 0.7, &[GuideRay { angle: 0.0, length: 1.0 }]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("#2ca02c").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
        assert_eq!(svg, render_measure(&m, 0.7, &[GuideRay { angle: 0.0, length: 1.0 }]));
    }

    #[test]
    fn empty_measure_still_renders() {
        let svg = render_measure(&Measure::empty(), 0.5, &[]);
        assert!(svg.contains("</svg>"));
        assert!(!svg.contains("NaN"));
    }
}
