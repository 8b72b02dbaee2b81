//! Minimal self-contained line plots.

use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const DASHES: [&str; 4] = ["", "6,3", "2,2", "8,3,2,3"];

/// Stroke attributes for the `i`-th series; unique for the first 24.
fn stroke(i: usize) -> String {
    let color = COLORS[i % COLORS.len()];
    let dash = DASHES[(i / COLORS.len()) % DASHES.len()];
    if dash.is_empty() {
        format!("stroke=\"{color}\"")
    } else {
        format!("stroke=\"{color}\" stroke-dasharray=\"{dash}\"")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str, log_y: bool, series: Vec<Series>) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_y,
            series,
        }
    }

    fn y_of(&self, y: f64) -> Option<f64> {
        match (self.log_y, y.is_finite()) {
            (_, false) => None,
            (true, _) if y <= 0.0 => None,
            (true, _) => Some(y.log10()),
            (false, _) => Some(y),
        }
    }

    /// Renders the plot. Points that cannot be drawn (non-finite, or
    /// nonpositive on a log axis) break the line.
    pub fn render(&self) -> String {
        let visible = || {
            self.series
                .iter()
                .flat_map(|s| s.points.iter())
                .filter(|(x, y)| x.is_finite() && self.y_of(*y).is_some())
        };
        let xr = range(visible().map(|p| p.0)).unwrap_or((0.0, 1.0));
        let yr = range(visible().filter_map(|p| self.y_of(p.1))).unwrap_or((0.0, 1.0));
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - xr.0) / (xr.1 - xr.0) * pw;
        let sy = |y: f64| TOP + ph - (y - yr.0) / (yr.1 - yr.0) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"11\">"
        );
        let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>"
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = xr.0 + f * (xr.1 - xr.0);
            let yv = yr.0 + f * (yr.1 - yr.0);
            let ylabel = if self.log_y { format!("1e{yv:.1}") } else { format!("{yv:.3e}") };
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{xv:.3}</text>",
                sx(xv),
                TOP + ph + 16.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{ylabel}</text>",
                LEFT - 4.0,
                sy(yv) + 4.0
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            "<text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">{}</text>",
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );
        for (i, s) in self.series.iter().enumerate() {
            let mut segments: Vec<Vec<String>> = vec![Vec::new()];
            for &(x, y) in &s.points {
                match self.y_of(y) {
                    Some(y) if x.is_finite() => segments
                        .last_mut()
                        .expect("nonempty")
                        .push(format!("{:.2},{:.2}", sx(x), sy(y))),
                    _ => segments.push(Vec::new()),
                }
            }
            for seg in segments.iter().filter(|s| !s.is_empty()) {
                let _ = writeln!(
                    out,
                    "<polyline fill=\"none\" stroke-width=\"1.5\" {} points=\"{}\"/>",
                    stroke(i),
                    seg.join(" ")
                );
            }
            let ly = TOP + 12.0 + 16.0 * i as f64;
            let lx = WIDTH - RIGHT + 10.0;
            let _ = writeln!(
                out,
                "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke-width=\"1.5\" {}/>",
                lx + 24.0,
                stroke(i)
            );
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
                lx + 30.0,
                ly + 4.0,
                escape(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Writes `plot` to `path`.
pub fn emit_svg(plot: &Plot, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, plot.render())
}
