//! SVG line plots of spectra (index against eigenvalue).

use std::fmt::Write as _;

use crate::error::{Error, Result};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub width: f64,
    pub height: f64,
    /// Stretch every series to the length of the longest one, so spectra of
    /// different dimension share one x range.
    pub rescaled: bool,
    pub log_y: bool,
    pub title: Option<String>,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            width: 800.0,
            height: 500.0,
            rescaled: false,
            log_y: false,
            title: None,
        }
    }
}

/// x coordinates of a series of length `len`: `1..=len`, or when
/// `common_width` is given, `k * common_width / len` for `k = 1..=len`.
pub fn series_x(len: usize, common_width: Option<usize>) -> Vec<f64> {
    match common_width {
        None => (1..=len).map(|k| k as f64).collect(),
        Some(w) => (1..=len).map(|k| k as f64 * w as f64 / len as f64).collect(),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..=TICKS).map(|k| lo + (hi - lo) * k as f64 / TICKS as f64).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

/// Render the series as one SVG document.
pub fn render_svg(series: &[PlotSeries], opts: &PlotOptions) -> Result<String> {
    if series.is_empty() {
        return Err(Error::BadParams("nothing to plot".into()));
    }
    if let Some(s) = series.iter().find(|s| s.values.is_empty()) {
        return Err(Error::BadParams(format!("series {:?} is empty", s.label)));
    }
    let longest = series.iter().map(|s| s.values.len()).max().unwrap_or(1);
    let common = opts.rescaled.then_some(longest);
    let xs: Vec<Vec<f64>> = series.iter().map(|s| series_x(s.values.len(), common)).collect();

    let transform = |v: f64| {
        if opts.log_y {
            v.max(f64::MIN_POSITIVE).log10()
        } else {
            v
        }
    };
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|s| s.values.iter().map(|&v| transform(v)))
        .collect();
    let (mut y_lo, mut y_hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !opts.log_y {
        y_lo = y_lo.min(0.0);
    }
    if y_hi - y_lo <= 0.0 {
        y_hi = y_lo + 1.0;
    }
    let x_hi = xs.iter().flatten().fold(1.0f64, |m, &v| m.max(v));
    let x_lo = 0.0;

    let plot_w = opts.width - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = opts.height - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = opts.width,
        h = opts.height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(title) = &opts.title {
        let _ = writeln!(
            svg,
            r#"<text class="title" x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
            opts.width / 2.0,
            escape(title)
        );
    }

    let (x0, y0, x1, y1) = (px(x_lo), py(y_lo), px(x_hi), py(y_hi));
    let _ = writeln!(svg, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(svg, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/>"#);
    let _ = writeln!(svg, "</g>");
    for t in ticks(x_lo, x_hi) {
        let x = px(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(y_lo, y_hi) {
        let y = py(t);
        let label = if opts.log_y {
            tick_label(10f64.powf(t))
        } else {
            tick_label(t)
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="xlabel" x="{:.2}" y="{:.2}" text-anchor="middle">index</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        opts.height - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text class="ylabel" x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">eigenvalue</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    for (k, (s, x)) in series.iter().zip(&xs).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = x
            .iter()
            .zip(&s.values)
            .map(|(&xi, &v)| format!("{:.2},{:.2}", px(xi), py(transform(v))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(&s.label),
            points.join(" ")
        );
        let ly = MARGIN_TOP + 10.0 + 16.0 * k as f64;
        let lx = opts.width - MARGIN_RIGHT - 160.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text class="legend" x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
