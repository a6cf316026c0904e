//! SVG overlays of fitted splines and data points.

use std::fmt::Write as _;

use crate::bezier::{de_casteljau, SplineCoefficients};
use crate::data::Dataset;

/// Fewest curve samples drawn per interval.
pub const MIN_SAMPLES_PER_INTERVAL: usize = 200;

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub width: f64,
    pub height: f64,
    pub samples_per_interval: usize,
    /// Abscissa range of an additional magnified panel.
    pub magnify: Option<(f64, f64)>,
    pub title: String,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            width: 900.0,
            height: 420.0,
            samples_per_interval: MIN_SAMPLES_PER_INTERVAL,
            magnify: None,
            title: String::new(),
        }
    }
}

/// `(x, s(x))` at `samples` uniform points per interval (at least
/// [`MIN_SAMPLES_PER_INTERVAL`]), knots included once.
pub fn sample_curve(s: &SplineCoefficients, samples: usize) -> Vec<(f64, f64)> {
    let samples = samples.max(MIN_SAMPLES_PER_INTERVAL);
    let knots = s.partition().knots();
    let widths = s.partition().widths();
    let mut out = Vec::with_capacity(s.pieces() * samples + 1);
    for i in 0..s.pieces() {
        let b = s.piece_coeffs(i);
        let last = if i + 1 == s.pieces() {
            samples
        } else {
            samples - 1
        };
        for j in 0..=last {
            let t = j as f64 / samples as f64;
            out.push((knots[i] + t * widths[i], de_casteljau(b, t)));
        }
    }
    out
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    top: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.top + (1.0 - (y - self.y0) / (self.y1 - self.y0)) * self.h
    }
}

fn y_range<'a>(points: impl Iterator<Item = &'a (f64, f64)>, x0: f64, x1: f64) -> (f64, f64) {
    let (lo, hi) = points
        .filter(|p| p.0 >= x0 && p.0 <= x1)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.08).max(1e-12);
    (lo - pad, hi + pad)
}

fn panel(
    svg: &mut String,
    frame: &Frame,
    dataset: &Dataset,
    curves: &[(String, Vec<(f64, f64)>)],
    label: &str,
) {
    let _ = writeln!(
        svg,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        frame.left, frame.top, frame.w, frame.h
    );
    if frame.y0 < 0.0 && frame.y1 > 0.0 {
        let y = frame.py(0.0);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
            frame.left,
            frame.left + frame.w
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">{label}</text>"#,
        frame.left + 4.0,
        frame.top + 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="10" font-family="sans-serif">{:.4e}</text>"#,
        frame.left - 2.0,
        frame.top + frame.h + 12.0,
        frame.y0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="10" font-family="sans-serif">{:.4e}</text>"#,
        frame.left - 2.0,
        frame.top - 3.0,
        frame.y1
    );
    let _ = writeln!(
        svg,
        r#"<clipPath id="clip{1:.0}"><rect x="{0:.2}" y="{1:.2}" width="{2:.2}" height="{3:.2}"/></clipPath>"#,
        frame.left, frame.top, frame.w, frame.h
    );
    for (k, (name, pts)) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        for (j, &(x, y)) in pts
            .iter()
            .filter(|p| p.0 >= frame.x0 && p.0 <= frame.x1)
            .enumerate()
        {
            let _ = write!(
                d,
                "{}{:.3},{:.3} ",
                if j == 0 { "M" } else { "L" },
                frame.px(x),
                frame.py(y)
            );
        }
        let _ = writeln!(
            svg,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.4" clip-path="url(#clip{:.0})"><title>{name}</title></path>"#,
            frame.top
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" font-family="sans-serif" fill="{color}">{name}</text>"#,
            frame.left + frame.w - 150.0,
            frame.top + 16.0 + 14.0 * k as f64
        );
    }
    for (&x, &y) in dataset.x().iter().zip(dataset.y()) {
        if x >= frame.x0 && x <= frame.x1 && y >= frame.y0 && y <= frame.y1 {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.3}" cy="{:.3}" r="2.5" fill="black"/>"#,
                frame.px(x),
                frame.py(y)
            );
        }
    }
}

/// Renders data points and fitted splines; with `options.magnify` set a
/// second panel shows that abscissa range with its own vertical scale.
pub fn render_svg(
    dataset: &Dataset,
    fits: &[(&str, &SplineCoefficients)],
    options: &PlotOptions,
) -> String {
    let curves: Vec<(String, Vec<(f64, f64)>)> = fits
        .iter()
        .map(|(name, s)| {
            (
                name.to_string(),
                sample_curve(s, options.samples_per_interval),
            )
        })
        .collect();
    let x0 = dataset.x()[0];
    let x1 = *dataset.x().last().unwrap();
    let x1 = if x1 > x0 { x1 } else { x0 + 1.0 };
    let data_pts: Vec<(f64, f64)> = dataset
        .x()
        .iter()
        .copied()
        .zip(dataset.y().iter().copied())
        .collect();
    let (ya, yb) = y_range(
        curves
            .iter()
            .flat_map(|c| c.1.iter())
            .chain(data_pts.iter()),
        x0,
        x1,
    );

    let margin = 60.0;
    let panel_h = options.height - 2.0 * margin;
    let panels = if options.magnify.is_some() { 2.0 } else { 1.0 };
    let total_h = options.height * panels;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        options.width, total_h, options.width, total_h
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !options.title.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{margin}" y="24" font-size="15" font-family="sans-serif">{}</text>"#,
            options.title
        );
    }
    let main = Frame {
        x0,
        x1,
        y0: ya,
        y1: yb,
        left: margin,
        top: margin,
        w: options.width - 2.0 * margin,
        h: panel_h,
    };
    panel(&mut svg, &main, dataset, &curves, "");

    if let Some((m0, m1)) = options.magnify {
        let (za, zb) = y_range(
            curves
                .iter()
                .flat_map(|c| c.1.iter())
                .chain(data_pts.iter()),
            m0,
            m1,
        );
        let zoom = Frame {
            x0: m0,
            x1: m1,
            y0: za,
            y1: zb,
            left: margin,
            top: options.height + margin,
            w: options.width - 2.0 * margin,
            h: panel_h,
        };
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#888" stroke-dasharray="2 2"/>"##,
            main.px(m0),
            main.top,
            main.px(m1) - main.px(m0),
            main.h
        );
        panel(
            &mut svg,
            &zoom,
            dataset,
            &curves,
            &format!("x ∈ [{m0}, {m1}]"),
        );
    }
    svg.push_str("</svg>\n");
    svg
}
