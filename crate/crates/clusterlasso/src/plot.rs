//! Standalone SVG line plots, written by hand so the output is deterministic
//! and free of external references. One polyline per series, a fixed color
//! palette, a legend, and two labeled axes; nothing else.

use thiserror::Error;

use crate::lasso::LassoPath;
use crate::modelsel::{bic_display_transform, BicTable};

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("nothing to plot: every series is empty")]
    Empty,
    #[error("plot area {width}x{height} is too small to draw in")]
    InvalidSize { width: u32, height: u32 },
}

/// A named polyline.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Canvas geometry and axis labels.
#[derive(Debug, Clone)]
pub struct PlotConfig {
    pub width: u32,
    pub height: u32,
    pub x_label: String,
    pub y_label: String,
    /// Draw the x axis decreasing left-to-right (penalty paths read this way).
    pub x_descending: bool,
}

impl Default for PlotConfig {
    fn default() -> Self {
        Self {
            width: 800,
            height: 500,
            x_label: String::new(),
            y_label: String::new(),
            x_descending: false,
        }
    }
}

const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 45.0;

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#ad494a",
];

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.02 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Render the series as a complete SVG document.
pub fn render_svg(series: &[Series], cfg: &PlotConfig) -> Result<String, PlotError> {
    let w = cfg.width as f64;
    let h = cfg.height as f64;
    let pw = w - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = h - MARGIN_TOP - MARGIN_BOTTOM;
    if pw < 10.0 || ph < 10.0 {
        return Err(PlotError::InvalidSize {
            width: cfg.width,
            height: cfg.height,
        });
    }
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(PlotError::Empty);
    }

    let (x_lo, x_hi) = padded_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_lo, y_hi) = padded_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));

    let x_px = |x: f64| {
        let frac = (x - x_lo) / (x_hi - x_lo);
        let frac = if cfg.x_descending { 1.0 - frac } else { frac };
        MARGIN_LEFT + frac * pw
    };
    let y_px = |y: f64| MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n",
        cfg.width, cfg.height
    ));
    svg.push_str(&format!(
        "  <rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        cfg.width, cfg.height
    ));

    // axes
    let x0 = MARGIN_LEFT;
    let x1 = MARGIN_LEFT + pw;
    let y0 = MARGIN_TOP + ph;
    let y1 = MARGIN_TOP;
    svg.push_str(&format!(
        "  <line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y0:.2}\" stroke=\"#333333\"/>\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x0:.2}\" y2=\"{y1:.2}\" stroke=\"#333333\"/>\n"
    ));

    // extreme tick labels; the left x tick shows whichever end of the domain
    // is drawn there
    let (x_left, x_right) = if cfg.x_descending {
        (x_hi, x_lo)
    } else {
        (x_lo, x_hi)
    };
    svg.push_str(&format!(
        "  <text x=\"{x0:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#333333\" text-anchor=\"middle\">{}</text>\n",
        y0 + 16.0,
        xml_escape(&format!("{x_left}"))
    ));
    svg.push_str(&format!(
        "  <text x=\"{x1:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#333333\" text-anchor=\"middle\">{}</text>\n",
        y0 + 16.0,
        xml_escape(&format!("{x_right}"))
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{y0:.2}\" font-size=\"11\" fill=\"#333333\" text-anchor=\"end\">{}</text>\n",
        x0 - 6.0,
        xml_escape(&format!("{y_lo}"))
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#333333\" text-anchor=\"end\">{}</text>\n",
        x0 - 6.0,
        y1 + 10.0,
        xml_escape(&format!("{y_hi}"))
    ));

    // axis labels
    if !cfg.x_label.is_empty() {
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" fill=\"#000000\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_LEFT + pw / 2.0,
            h - 8.0,
            xml_escape(&cfg.x_label)
        ));
    }
    if !cfg.y_label.is_empty() {
        svg.push_str(&format!(
            "  <text x=\"14\" y=\"{:.2}\" font-size=\"13\" fill=\"#000000\" text-anchor=\"middle\" transform=\"rotate(-90 14 {0:.2})\">{1}</text>\n",
            MARGIN_TOP + ph / 2.0,
            xml_escape(&cfg.y_label)
        ));
    }

    // polylines
    for (i, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", x_px(x), y_px(y)))
            .collect();
        svg.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            color,
            pts.join(" ")
        ));
    }

    // legend
    let lx = MARGIN_LEFT + pw + 14.0;
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = MARGIN_TOP + 8.0 + i as f64 * 18.0;
        if ly > h - MARGIN_BOTTOM {
            break;
        }
        svg.push_str(&format!(
            "  <rect x=\"{lx:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
            ly - 10.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{ly:.2}\" font-size=\"12\" fill=\"#000000\">{}</text>\n",
            lx + 17.0,
            xml_escape(&s.name)
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// One series per feature: penalty on x, coefficient on y.
pub fn path_series(path: &LassoPath, names: &[String]) -> Vec<Series> {
    assert_eq!(names.len(), path.n_features(), "one name per feature");
    names
        .iter()
        .enumerate()
        .map(|(j, name)| Series {
            name: name.clone(),
            points: path
                .lambdas()
                .iter()
                .enumerate()
                .map(|(i, &l)| (l, path.coefs()[(i, j)]))
                .collect(),
        })
        .collect()
}

/// A single series of the transformed BIC curve against K.
pub fn bic_series(table: &BicTable) -> Vec<Series> {
    let display = bic_display_transform(table);
    vec![Series {
        name: "BIC".to_string(),
        points: table
            .rows
            .iter()
            .zip(display)
            .map(|(row, d)| (row.k as f64, d))
            .collect(),
    }]
}
