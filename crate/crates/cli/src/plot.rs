//! Static SVG scatter plot of a 2-D projection, one marker per story.

use std::fmt::Write;

use storytopics::corpus::DomainLabel;
use storytopics::project::Projection2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Circle,
    Cross,
    Diamond,
    Plus,
    Square,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Circle => "circle",
            Shape::Cross => "cross",
            Shape::Diamond => "diamond",
            Shape::Plus => "plus",
            Shape::Square => "square",
        }
    }
}

/// Legend order and the fixed color / marker per domain.
pub const STYLES: [(DomainLabel, &str, &str, Shape); 5] = [
    (DomainLabel::Health, "purple", "#800080", Shape::Circle),
    (DomainLabel::Entertainment, "beige", "#c8ad7f", Shape::Cross),
    (DomainLabel::Energy, "teal", "#008080", Shape::Diamond),
    (DomainLabel::Safety, "cherry", "#d2042d", Shape::Plus),
    (DomainLabel::Other, "orange", "#ffa500", Shape::Square),
];

pub fn style(label: DomainLabel) -> (&'static str, Shape) {
    let s = STYLES.iter().find(|s| s.0 == label).expect("every domain has a style");
    (s.2, s.3)
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 700.0;
const MARGIN: f64 = 40.0;
const LEGEND_WIDTH: f64 = 160.0;
const R: f64 = 4.0;

fn marker(out: &mut String, class: &str, label: DomainLabel, x: f64, y: f64, extra: &str) {
    let (color, shape) = style(label);
    let common = format!(
        r#"class="{class} {}" data-domain="{}" fill="none" stroke="{color}" stroke-width="1.3"{extra}"#,
        shape.name(),
        label.name()
    );
    let _ = match shape {
        Shape::Circle => writeln!(out, r#"<circle {common} cx="{x:.2}" cy="{y:.2}" r="{R}"/>"#),
        Shape::Square => writeln!(
            out,
            r#"<rect {common} x="{:.2}" y="{:.2}" width="{}" height="{}"/>"#,
            x - R,
            y - R,
            2.0 * R,
            2.0 * R
        ),
        Shape::Diamond => writeln!(
            out,
            r#"<polygon {common} points="{x:.2},{:.2} {:.2},{y:.2} {x:.2},{:.2} {:.2},{y:.2}"/>"#,
            y - R,
            x + R,
            y + R,
            x - R
        ),
        Shape::Cross => writeln!(
            out,
            r#"<path {common} d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}"/>"#,
            x - R,
            y - R,
            x + R,
            y + R,
            x - R,
            y + R,
            x + R,
            y - R
        ),
        Shape::Plus => writeln!(
            out,
            r#"<path {common} d="M{:.2},{y:.2}L{:.2},{y:.2}M{x:.2},{:.2}L{x:.2},{:.2}"/>"#,
            x - R,
            x + R,
            y - R,
            y + R
        ),
    };
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders the projection. Story markers carry class `marker`; legend
/// swatches carry class `legend-marker`.
pub fn render_svg(projection: &Projection2D, title: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{:.1}" font-family="sans-serif" font-size="14">{}</text>"#,
        MARGIN * 0.6,
        escape(title)
    );

    let plot_w = WIDTH - 2.0 * MARGIN - LEGEND_WIDTH;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##
    );

    let finite: Vec<&[f64; 2]> = projection.coords.iter().filter(|c| c[0].is_finite() && c[1].is_finite()).collect();
    if !finite.is_empty() {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for c in &finite {
            x0 = x0.min(c[0]);
            x1 = x1.max(c[0]);
            y0 = y0.min(c[1]);
            y1 = y1.max(c[1]);
        }
        let span_x = (x1 - x0).max(1e-12);
        let span_y = (y1 - y0).max(1e-12);
        let pad = 2.0 * R;
        let sx = |x: f64| MARGIN + pad + (x - x0) / span_x * (plot_w - 2.0 * pad);
        // SVG y grows downward
        let sy = |y: f64| MARGIN + pad + (y1 - y) / span_y * (plot_h - 2.0 * pad);
        let _ = writeln!(out, r#"<g id="points">"#);
        for ((c, &label), id) in projection.coords.iter().zip(&projection.labels).zip(&projection.story_ids) {
            if !(c[0].is_finite() && c[1].is_finite()) {
                continue;
            }
            marker(&mut out, "marker", label, sx(c[0]), sy(c[1]), &format!(r#" data-story="{id}""#));
        }
        let _ = writeln!(out, "</g>");
    }

    let lx = WIDTH - MARGIN - LEGEND_WIDTH + 20.0;
    let _ = writeln!(out, r#"<g id="legend" font-family="sans-serif" font-size="12">"#);
    for (i, (label, color_name, _, _)) in STYLES.iter().enumerate() {
        let y = MARGIN + 20.0 + 22.0 * i as f64;
        marker(&mut out, "legend-marker", *label, lx, y, "");
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" data-color="{color_name}">{}</text>"#,
            lx + 12.0,
            y + 4.0,
            label.name()
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}
