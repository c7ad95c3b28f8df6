//! CSV, JSON and SVG emitters. Floats are printed in shortest round-trip
//! form so that reloading reproduces every bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

pub fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("cannot write {}: {e}", path.display()))
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_error(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvariantViolation(format!("report serialisation failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Header row plus one line per record.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// `path` with its extension replaced, for companion files.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

const W: f64 = 800.0;
const H: f64 = 600.0;
const MARGIN: f64 = 60.0;

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(points: &[(f64, f64)]) -> Frame {
        let span = |f: fn(&(f64, f64)) -> f64| {
            let (lo, hi) = points
                .iter()
                .map(f)
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        };
        Frame { x: span(|p| p.0), y: span(|p| p.1) }
    }

    fn map(&self, p: (f64, f64)) -> (f64, f64) {
        let sx = (p.0 - self.x.0) / (self.x.1 - self.x.0);
        let sy = (p.1 - self.y.0) / (self.y.1 - self.y.0);
        (MARGIN + sx * (W - 2.0 * MARGIN), H - MARGIN - sy * (H - 2.0 * MARGIN))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame_svg(f: &Frame, title: &str, xlabel: &str, ylabel: &str, body: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 800 600" width="800" height="600">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="800" height="600" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="400" y="30" text-anchor="middle" font-size="16">{}</text>"#, escape(title));
    let _ = writeln!(s, r#"<text x="400" y="585" text-anchor="middle" font-size="14">{}</text>"#, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="18" y="300" text-anchor="middle" font-size="14" transform="rotate(-90 18 300)">{}</text>"#,
        escape(ylabel)
    );
    let ticks = [
        (MARGIN, H - MARGIN + 18.0, "start", f.x.0),
        (W - MARGIN, H - MARGIN + 18.0, "end", f.x.1),
        (MARGIN - 6.0, H - MARGIN, "end", f.y.0),
        (MARGIN - 6.0, MARGIN + 4.0, "end", f.y.1),
    ];
    for (x, y, anchor, v) in ticks {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="11">{v:.4}</text>"#);
    }
    s.push_str(body);
    s.push_str("</svg>\n");
    s
}

/// A single polyline through `points`; non-finite points are dropped.
pub fn svg_polyline(points: &[(f64, f64)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let f = Frame::fit(points);
    let coords: Vec<String> = points
        .iter()
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .map(|&p| {
            let (x, y) = f.map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let body = format!(
        "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        coords.join(" ")
    );
    frame_svg(&f, title, xlabel, ylabel, &body)
}

pub fn svg_scatter(points: &[(f64, f64)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let f = Frame::fit(points);
    let mut body = String::new();
    for &p in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        let (x, y) = f.map(p);
        let _ = writeln!(body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="firebrick"/>"#);
    }
    frame_svg(&f, title, xlabel, ylabel, &body)
}
