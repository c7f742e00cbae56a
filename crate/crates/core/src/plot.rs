//! Minimal self-contained SVG line/point plots with error bars.
//!
//! Output depends only on the data, so identical inputs give identical
//! files.

use std::fmt::Write as _;

const W: f64 = 760.0;
const H: f64 = 480.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 58.0;

pub const PALETTE: [&str; 6] = ["#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d68910", "#555555"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Points,
    Line,
    Dashed,
    Bars,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub yerr: Option<Vec<f64>>,
    pub style: Style,
    pub color: String,
}

impl Series {
    pub fn new(label: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>, style: Style, color: &str) -> Self {
        Self {
            label: label.into(),
            xs,
            ys,
            yerr: None,
            style,
            color: color.into(),
        }
    }

    pub fn with_errors(mut self, yerr: Vec<f64>) -> Self {
        self.yerr = Some(yerr);
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Horizontal reference lines with labels.
    pub hlines: Vec<(f64, String)>,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

impl Figure {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    pub fn add(&mut self, s: Series) -> &mut Self {
        self.series.push(s);
        self
    }

    fn data_range(&self) -> ((f64, f64), (f64, f64)) {
        let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
        let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.series {
            for (i, (&x, &y)) in s.xs.iter().zip(&s.ys).enumerate() {
                if !(x.is_finite() && y.is_finite()) {
                    continue;
                }
                if let Some((lo, hi)) = self.x_range {
                    if x < lo || x > hi {
                        continue;
                    }
                }
                let e = s.yerr.as_ref().map_or(0.0, |e| e[i]).max(0.0);
                xr = (xr.0.min(x), xr.1.max(x));
                yr = (yr.0.min(y - e), yr.1.max(y + e));
            }
        }
        for (y, _) in &self.hlines {
            yr = (yr.0.min(*y), yr.1.max(*y));
        }
        if !xr.0.is_finite() {
            xr = (0.0, 1.0);
        }
        if !yr.0.is_finite() {
            yr = (0.0, 1.0);
        }
        let pad = |(a, b): (f64, f64), frac: f64| {
            if b > a {
                (a - frac * (b - a), b + frac * (b - a))
            } else {
                (a - 0.5, b + 0.5)
            }
        };
        (
            self.x_range.unwrap_or(xr),
            self.y_range.unwrap_or_else(|| pad(yr, 0.05)),
        )
    }

    pub fn to_svg(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.data_range();
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;
        let inside = |x: f64, y: f64| x >= x0 && x <= x1 && y >= y0 && y <= y1;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="Helvetica, Arial, sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            W / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath></defs>"#);

        for t in ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5"/>"##, TOP + ph);
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                TOP + ph + 16.0,
                fmt_tick(t)
            );
        }
        for t in ticks(y0, y1) {
            let y = sy(t);
            let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##, LEFT + pw);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 14.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            esc(&self.y_label)
        );

        let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
        for (y, label) in &self.hlines {
            let yy = sy(*y);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#777" stroke-dasharray="6 4"/>"##,
                LEFT + pw
            );
            let _ = writeln!(
                s,
                r##"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="#555">{}</text>"##,
                LEFT + pw - 4.0,
                yy - 4.0,
                esc(label)
            );
        }
        for ser in &self.series {
            let pts: Vec<(usize, f64, f64)> = ser
                .xs
                .iter()
                .zip(&ser.ys)
                .enumerate()
                .filter(|(_, (x, y))| x.is_finite() && y.is_finite() && **x >= x0 && **x <= x1)
                .map(|(i, (x, y))| (i, *x, *y))
                .collect();
            match ser.style {
                Style::Line | Style::Dashed => {
                    let mut d = String::new();
                    for (k, (_, x, y)) in pts.iter().enumerate() {
                        let _ = write!(d, "{}{:.2},{:.2}", if k == 0 { "M" } else { " L" }, sx(*x), sy(*y));
                    }
                    let dash = if ser.style == Style::Dashed { r#" stroke-dasharray="5 3""# } else { "" };
                    let _ = writeln!(
                        s,
                        r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.6"{dash}/>"#,
                        ser.color
                    );
                }
                Style::Points => {
                    for (i, x, y) in &pts {
                        if let Some(e) = ser.yerr.as_ref().map(|e| e[*i]).filter(|e| *e > 0.0) {
                            let _ = writeln!(
                                s,
                                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-opacity="0.6"/>"#,
                                sx(*x),
                                sy(y - e),
                                sx(*x),
                                sy(y + e),
                                ser.color
                            );
                        }
                        if inside(*x, *y) {
                            let _ = writeln!(
                                s,
                                r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{}"/>"#,
                                sx(*x),
                                sy(*y),
                                ser.color
                            );
                        }
                    }
                }
                Style::Bars => {
                    let n = pts.len().max(1) as f64;
                    let bw = 0.6 * pw / n;
                    let base = sy(0.0_f64.clamp(y0, y1));
                    for (_, x, y) in &pts {
                        let top = sy(*y);
                        let _ = writeln!(
                            s,
                            r#"<rect x="{:.2}" y="{:.2}" width="{bw:.2}" height="{:.2}" fill="{}" fill-opacity="0.8"/>"#,
                            sx(*x) - bw / 2.0,
                            top.min(base),
                            (base - top).abs(),
                            ser.color
                        );
                    }
                }
            }
        }
        let _ = writeln!(s, "</g>");

        let mut ly = TOP + 14.0;
        for ser in self.series.iter().filter(|s| !s.label.is_empty()) {
            let lx = LEFT + 12.0;
            match ser.style {
                Style::Points => {
                    let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, lx + 9.0, ly - 4.0, ser.color);
                }
                _ => {
                    let dash = if ser.style == Style::Dashed { r#" stroke-dasharray="5 3""# } else { "" };
                    let _ = writeln!(
                        s,
                        r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"{dash}/>"#,
                        ly - 4.0,
                        lx + 18.0,
                        ly - 4.0,
                        ser.color
                    );
                }
            }
            let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 24.0, esc(&ser.label));
            ly += 16.0;
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Roughly six ticks at 1-2-5 multiples of a power of ten.
pub fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return vec![lo];
    }
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(t: f64) -> String {
    if t == 0.0 {
        return "0".into();
    }
    let a = t.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{t:.1e}");
    }
    let s = format!("{t:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
