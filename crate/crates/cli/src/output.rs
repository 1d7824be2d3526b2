//! CSV and SVG emission for sweep results.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use qest_core::estimation::SweepResult;
use thiserror::Error;

pub const CSV_HEADER: &str = "theta_deg,cost_classical,cost_coherent";

#[derive(Debug, Error)]
#[error("cannot write {}: {source}", .path.display())]
pub struct IoError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

/// One line per row in grid order; floats use Rust's shortest round-trip
/// formatting and the coherent column is empty when it was not computed.
pub fn render_csv(result: &SweepResult) -> String {
    let mut out = String::with_capacity(32 * (result.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        let _ = write!(out, "{},{},", row.theta_deg, row.cost_classical);
        if let Some(c) = row.cost_coherent {
            let _ = write!(out, "{c}");
        }
        out.push('\n');
    }
    out
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    let pad = if span > 0.0 { 0.05 * span } else { 0.05 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn polyline(&self, pts: &[(f64, f64)], style: &str) -> String {
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
        format!("<polyline fill=\"none\" stroke-width=\"2\" {style} points=\"{}\"/>\n", coords.join(" "))
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Fixed 800×600 plot: classical cost solid, coherent cost dashed.
pub fn render_svg(result: &SweepResult) -> String {
    let axes = Axes {
        x: padded_range(result.rows.iter().map(|r| r.theta_deg)),
        y: padded_range(result.rows.iter().flat_map(|r| std::iter::once(r.cost_classical).chain(r.cost_coherent))),
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(s, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        "<rect x=\"{x0}\" y=\"{y0}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        x1 - x0,
        y1 - y0
    );
    for i in 0..TICKS {
        let t = i as f64 / (TICKS - 1) as f64;
        let xv = axes.x.0 + t * (axes.x.1 - axes.x.0);
        let yv = axes.y.0 + t * (axes.y.1 - axes.y.0);
        let (px, py) = (axes.px(xv), axes.py(yv));
        let _ = writeln!(s, "<line x1=\"{px:.2}\" y1=\"{y1}\" x2=\"{px:.2}\" y2=\"{}\" stroke=\"black\"/>", y1 + 5.0);
        let _ = writeln!(
            s,
            "<text x=\"{px:.2}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            y1 + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(s, "<line x1=\"{}\" y1=\"{py:.2}\" x2=\"{x0}\" y2=\"{py:.2}\" stroke=\"black\"/>", x0 - 5.0);
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
            x0 - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">theta (deg)</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        "<text x=\"20\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.2})\">cost</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    let classical: Vec<(f64, f64)> = result.rows.iter().map(|r| (r.theta_deg, r.cost_classical)).collect();
    s.push_str(&axes.polyline(&classical, "class=\"classical\" stroke=\"#1f77b4\""));
    let coherent: Vec<(f64, f64)> =
        result.rows.iter().filter_map(|r| r.cost_coherent.map(|c| (r.theta_deg, c))).collect();
    if !coherent.is_empty() {
        s.push_str(&axes.polyline(&coherent, "class=\"coherent\" stroke=\"#d62728\" stroke-dasharray=\"8 5\""));
    }
    s.push_str("</svg>\n");
    s
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    let wrap = |source| IoError { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    tmp.write_all(contents).map_err(wrap)?;
    tmp.as_file().sync_all().map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

pub fn write_outputs(result: &SweepResult, csv: Option<&Path>, svg: Option<&Path>) -> Result<(), IoError> {
    if let Some(p) = csv {
        write_atomic(p, render_csv(result).as_bytes())?;
    }
    if let Some(p) = svg {
        write_atomic(p, render_svg(result).as_bytes())?;
    }
    Ok(())
}
