//! Dependency-free SVG rendering: line plots (optionally log-x) and
//! heatmap panels. Output is deterministic — coordinates are formatted with
//! fixed precision — so rendered files are diffable and tests can parse the
//! path data.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 18.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 48.0;

const SERIES_COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One line series.
pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= lo || !hi.is_finite() || !lo.is_finite() {
        return vec![lo];
    }
    let span = hi - lo;
    let raw = span / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    } * mag;
    let first = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = first;
    while t <= hi + 1e-12 * span {
        ticks.push(t);
        t += step;
    }
    ticks
}

/// Render line series into an SVG document.
pub fn line_plot(series: &[Series<'_>], title: &str, x_label: &str, y_label: &str, log_x: bool) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.x.len() != s.y.len() || s.x.is_empty()) {
        return Err(Error::Contract("line plot needs non-empty, equal-length series".into()));
    }
    let xt = |v: f64| -> Result<f64> {
        if log_x {
            if v <= 0.0 {
                return Err(Error::Contract(format!("log-x plot got non-positive x {v}")));
            }
            Ok(v.log10())
        } else {
            Ok(v)
        }
    };
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        for (&x, &y) in s.x.iter().zip(s.y) {
            if log_x && x <= 0.0 {
                continue; // drop the zero-frequency bin on log axes
            }
            let tx = xt(x)?;
            xmin = xmin.min(tx);
            xmax = xmax.max(tx);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !xmin.is_finite() || !ymin.is_finite() {
        return Err(Error::Contract("no plottable points".into()));
    }
    if ymax == ymin {
        ymax = ymin + 1.0;
    }
    if xmax == xmin {
        xmax = xmin + 1.0;
    }
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |v: f64| MARGIN_L + (v - xmin) / (xmax - xmin) * plot_w;
    let sy = |v: f64| MARGIN_T + (1.0 - (v - ymin) / (ymax - ymin)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );

    // axes box
    let _ = writeln!(
        svg,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>",
        fmt(MARGIN_L),
        fmt(MARGIN_T),
        fmt(plot_w),
        fmt(plot_h)
    );
    for t in nice_ticks(xmin, xmax, 6) {
        let x = sx(t);
        let label = if log_x { format!("{:.3}", 10f64.powf(t)) } else { format!("{t:.3}") };
        let _ = writeln!(
            svg,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333\"/>",
            fmt(x),
            fmt(MARGIN_T + plot_h),
            fmt(MARGIN_T + plot_h + 5.0)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            fmt(x),
            fmt(MARGIN_T + plot_h + 17.0),
            label
        );
    }
    for t in nice_ticks(ymin, ymax, 6) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"#333\"/>",
            fmt(MARGIN_L - 5.0),
            fmt(MARGIN_L),
            fmt(y)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            fmt(MARGIN_L - 8.0),
            fmt(y + 3.0),
            format_compact(t)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );

    for (k, s) in series.iter().enumerate() {
        let color = SERIES_COLORS[k % SERIES_COLORS.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for (&x, &y) in s.x.iter().zip(s.y) {
            if log_x && x <= 0.0 {
                continue;
            }
            let cmd = if pen_down { 'L' } else { 'M' };
            let _ = write!(d, "{}{} {} ", cmd, fmt(sx(xt(x)?)), fmt(sy(y)));
            pen_down = true;
        }
        let _ = writeln!(
            svg,
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            d.trim_end()
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>",
            fmt(MARGIN_L + 8.0),
            fmt(MARGIN_T + 16.0 + 14.0 * k as f64),
            escape(s.label)
        );
    }
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

/// Diverging blue-white-red colormap over [-max_abs, max_abs].
fn diverging_color(v: f64, max_abs: f64) -> String {
    let t = if max_abs > 0.0 { (v / max_abs).clamp(-1.0, 1.0) } else { 0.0 };
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

/// Render matrix panels as heatmaps (one panel per matrix, e.g. one POD mode
/// reshaped to its grid, or a latent-by-mode ranking matrix).
pub fn heatmap_panels(panels: &[(String, Matrix)], title: &str) -> Result<String> {
    if panels.is_empty() {
        return Err(Error::Contract("heatmap needs at least one panel".into()));
    }
    let per_row = panels.len().min(3);
    let rows = panels.len().div_ceil(per_row);
    let panel_w = 200.0;
    let panel_h = 180.0;
    let pad = 24.0;
    let total_w = per_row as f64 * (panel_w + pad) + pad;
    let total_h = rows as f64 * (panel_h + pad + 18.0) + pad + 24.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total_w}\" height=\"{total_h}\" viewBox=\"0 0 {total_w} {total_h}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{total_w}\" height=\"{total_h}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        total_w / 2.0,
        escape(title)
    );
    for (idx, (label, m)) in panels.iter().enumerate() {
        let col = idx % per_row;
        let row = idx / per_row;
        let x0 = pad + col as f64 * (panel_w + pad);
        let y0 = 28.0 + pad + row as f64 * (panel_h + pad + 18.0);
        let max_abs = m.max_abs();
        let cw = panel_w / m.cols() as f64;
        let ch = panel_h / m.rows() as f64;
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let _ = writeln!(
                    svg,
                    "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
                    fmt(x0 + j as f64 * cw),
                    fmt(y0 + i as f64 * ch),
                    fmt(cw + 0.35),
                    fmt(ch + 0.35),
                    diverging_color(m.get(i, j), max_abs)
                );
            }
        }
        let _ = writeln!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"{panel_w}\" height=\"{panel_h}\" fill=\"none\" stroke=\"#333\"/>",
            fmt(x0),
            fmt(y0)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            fmt(x0 + panel_w / 2.0),
            fmt(y0 + panel_h + 14.0),
            escape(label)
        );
    }
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

fn format_compact(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_contains_one_path_per_series() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y1 = vec![0.0, 1.0, 0.5, 2.0];
        let y2 = vec![2.0, 1.0, 1.5, 0.0];
        let svg = line_plot(
            &[
                Series { label: "a", x: &x, y: &y1 },
                Series { label: "b", x: &x, y: &y2 },
            ],
            "title",
            "x",
            "y",
            false,
        )
        .unwrap();
        let paths = svg.matches("<path d=\"M").count();
        assert_eq!(paths, 2);
        // four points per series: one M plus three L commands
        let first_path = svg.split("<path d=\"").nth(1).unwrap();
        let d = first_path.split('"').next().unwrap();
        assert_eq!(d.matches('L').count(), 3, "{d}");
    }

    #[test]
    fn log_x_drops_nonpositive_bins() {
        let x = vec![0.0, 0.001, 0.01, 0.1];
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let svg = line_plot(&[Series { label: "psd", x: &x, y: &y }], "t", "St", "psd", true).unwrap();
        let d = svg.split("<path d=\"").nth(1).unwrap().split('"').next().unwrap();
        // one M and two L: the zero-frequency sample is dropped
        assert_eq!(d.matches('L').count(), 2, "{d}");
    }

    #[test]
    fn rendering_is_deterministic() {
        let x = vec![0.0, 1.0];
        let y = vec![0.3, 0.7];
        let a = line_plot(&[Series { label: "s", x: &x, y: &y }], "p", "x", "y", false).unwrap();
        let b = line_plot(&[Series { label: "s", x: &x, y: &y }], "p", "x", "y", false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let m = Matrix::from_fn(3, 4, |i, j| (i as f64) - (j as f64));
        let svg = heatmap_panels(&[("mode 1".into(), m)], "modes").unwrap();
        let rects = svg.matches("<rect").count();
        // 12 cells + background + panel frame
        assert_eq!(rects, 12 + 2);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(line_plot(&[], "t", "x", "y", false).is_err());
        assert!(heatmap_panels(&[], "t").is_err());
    }
}
