//! Minimal SVG charts: scatter, line and grouped bar plots.
//!
//! Output depends only on the inputs, so repeated runs give identical files.

use std::fmt::Write;

/// Group colors, assigned in label order.
pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Cross,
    Diamond,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub marker: Marker,
    pub size: f64,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Data range widened by 5% on each side; a degenerate range becomes ±0.5.
pub fn padded_range(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.into_iter().filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str, x_ticks: bool) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        out,
        r##"<rect x="{x0}" y="{y1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        x1 - x0,
        y0 - y1
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let vy = frame.y.0 + t * (frame.y.1 - frame.y.0);
        let py = frame.py(vy);
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{py:.1}" x2="{x0}" y2="{py:.1}" stroke="#444"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            x0 - 4.0,
            x0 - 6.0,
            py + 4.0,
            tick_label(vy)
        );
        if x_ticks {
            let vx = frame.x.0 + t * (frame.x.1 - frame.x.0);
            let px = frame.px(vx);
            let _ = writeln!(
                out,
                r##"<line x1="{px:.1}" y1="{y0}" x2="{px:.1}" y2="{:.1}" stroke="#444"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
                y0 + 4.0,
                y0 + 17.0,
                tick_label(vx)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn marker(out: &mut String, m: Marker, x: f64, y: f64, size: f64, color: &str) {
    match m {
        Marker::Circle => {
            let _ = writeln!(
                out,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="{size:.1}" fill="{color}" fill-opacity="0.7"/>"#
            );
        }
        Marker::Cross => {
            let _ = writeln!(
                out,
                r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="{color}" stroke-width="2.5"/>"#,
                x - size,
                y - size,
                x + size,
                y + size,
                x - size,
                y + size,
                x + size,
                y - size
            );
        }
        Marker::Diamond => {
            let _ = writeln!(
                out,
                r#"<path d="M{x:.2} {:.2}L{:.2} {y:.2}L{x:.2} {:.2}L{:.2} {y:.2}Z" fill="{color}" stroke="black"/>"#,
                y - size,
                x + size,
                y + size,
                x - size
            );
        }
    }
}

fn legend(out: &mut String, entries: &[(String, &str, Marker)]) {
    let x = WIDTH - RIGHT + 12.0;
    for (i, (name, color, m)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        marker(out, *m, x + 5.0, y - 4.0, 5.0, color);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{y:.1}">{}</text>"#, x + 16.0, escape(name));
    }
}

pub fn scatter(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let frame = Frame {
        x: padded_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0))),
        y: padded_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1))),
    };
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &frame, x_label, y_label, true);
    for s in series {
        for &(x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            marker(&mut out, s.marker, frame.px(x), frame.py(y), s.size, s.color);
        }
    }
    let entries: Vec<_> = series.iter().map(|s| (s.name.clone(), s.color, s.marker)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

/// One polyline per series over categorical x positions.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, categories: &[String], series: &[(String, Vec<f64>)]) -> String {
    let frame = Frame {
        x: (-0.5, categories.len().max(1) as f64 - 0.5),
        y: padded_range(series.iter().flat_map(|(_, v)| v.iter().copied())),
    };
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &frame, x_label, y_label, false);
    category_ticks(&mut out, &frame, categories);
    for (i, (_, values)) in series.iter().enumerate() {
        let c = color(i);
        let mut path = String::new();
        for (j, v) in values.iter().enumerate().filter(|(_, v)| v.is_finite()) {
            let cmd = if path.is_empty() { 'M' } else { 'L' };
            let _ = write!(path, "{cmd}{:.2} {:.2}", frame.px(j as f64), frame.py(*v));
        }
        if !path.is_empty() {
            let _ = writeln!(out, r#"<path d="{path}" fill="none" stroke="{c}" stroke-width="2"/>"#);
        }
        for (j, v) in values.iter().enumerate().filter(|(_, v)| v.is_finite()) {
            marker(&mut out, Marker::Circle, frame.px(j as f64), frame.py(*v), 3.5, c);
        }
    }
    let entries: Vec<_> = series.iter().enumerate().map(|(i, (n, _))| (n.clone(), color(i), Marker::Circle)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

/// Grouped bars: one group per category, one bar per series.
pub fn bar_chart(title: &str, x_label: &str, y_label: &str, categories: &[String], series: &[(String, Vec<f64>)]) -> String {
    let (lo, hi) = padded_range(
        series
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .chain(std::iter::once(0.0)),
    );
    let frame = Frame {
        x: (-0.5, categories.len().max(1) as f64 - 0.5),
        y: (lo, hi),
    };
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &frame, x_label, y_label, false);
    category_ticks(&mut out, &frame, categories);
    let slot = (frame.px(1.0) - frame.px(0.0)) * 0.8;
    let bar = slot / series.len().max(1) as f64;
    let base = frame.py(0.0);
    for (i, (_, values)) in series.iter().enumerate() {
        for (j, v) in values.iter().enumerate().filter(|(_, v)| v.is_finite()) {
            let x = frame.px(j as f64) - slot / 2.0 + bar * i as f64;
            let y = frame.py(*v);
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{:.2}" width="{bar:.2}" height="{:.2}" fill="{}"/>"#,
                y.min(base),
                (y - base).abs(),
                color(i)
            );
        }
    }
    let _ = writeln!(
        out,
        r##"<line x1="{LEFT}" y1="{base:.2}" x2="{:.1}" y2="{base:.2}" stroke="#444"/>"##,
        WIDTH - RIGHT
    );
    let entries: Vec<_> = series.iter().enumerate().map(|(i, (n, _))| (n.clone(), color(i), Marker::Circle)).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

fn category_ticks(out: &mut String, frame: &Frame, categories: &[String]) {
    let y0 = HEIGHT - BOTTOM;
    for (j, c) in categories.iter().enumerate() {
        let px = frame.px(j as f64);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.1}" y1="{y0}" x2="{px:.1}" y2="{:.1}" stroke="#444"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            y0 + 4.0,
            y0 + 17.0,
            escape(c)
        );
    }
}
