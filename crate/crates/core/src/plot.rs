//! Minimal SVG charts: line overlays, correlogram stems and stacked
//! decomposition panels. Output is plain text with fixed number formatting,
//! so identical inputs give identical files.

use std::fmt::Write;

use chrono::NaiveDate;

use crate::diagnostics::{CorrelogramResult, Decomposition};
use crate::series::TimeSeries;

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f"];

#[derive(Debug, Clone)]
pub struct Line {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub dashed: bool,
}

impl Line {
    pub fn new(label: &str, xs: Vec<f64>, ys: Vec<f64>) -> Self {
        Line {
            label: label.to_string(),
            xs,
            ys,
            dashed: false,
        }
    }

    /// A series plotted against its dates (x = days since 1970-01-01).
    pub fn from_series(label: &str, series: &TimeSeries) -> Self {
        Line::new(label, series.dates().iter().map(|d| day_number(*d)).collect(), series.values().to_vec())
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Linear,
    Log,
    Dates,
}

#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_axis: XAxis,
    pub lines: Vec<Line>,
}

pub fn day_number(d: NaiveDate) -> f64 {
    (d - NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()).num_days() as f64
}

fn date_label(x: f64) -> String {
    let d = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + chrono::Duration::days(x.round() as i64);
    d.format("%Y-%m").to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Up to `count + 1` evenly spaced ticks covering [lo, hi].
fn ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect()
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn new(top: f64, height: f64, (xmin, xmax): (f64, f64), (ymin, ymax): (f64, f64)) -> Self {
        let pad = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
        let (xmin, xmax) = pad(xmin, xmax);
        let (ymin, ymax) = pad(ymin, ymax);
        Frame {
            x0: MARGIN_LEFT,
            y0: top,
            w: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            h: height,
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xmin) / (self.xmax - self.xmin) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.ymin) / (self.ymax - self.ymin) * self.h
    }

    fn axes(&self, out: &mut String, x_axis: XAxis, y_label: &str, x_label: Option<&str>) {
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
            self.x0, self.y0, self.w, self.h
        );
        for y in ticks(self.ymin, self.ymax, 5) {
            let py = self.py(y);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"##,
                self.x0,
                self.x0 + self.w,
                self.x0 - 6.0,
                py + 4.0,
                fmt_num(y)
            );
        }
        for x in ticks(self.xmin, self.xmax, 6) {
            let px = self.px(x);
            let label = match x_axis {
                XAxis::Linear => fmt_num(x),
                XAxis::Log => fmt_num(10f64.powf(x)),
                XAxis::Dates => date_label(x),
            };
            let _ = writeln!(
                out,
                r##"<text x="{px:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
                self.y0 + self.h + 16.0,
                escape(&label)
            );
        }
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"##,
            self.x0 - 50.0,
            self.y0 + self.h / 2.0,
            self.x0 - 50.0,
            self.y0 + self.h / 2.0,
            escape(y_label)
        );
        if let Some(xl) = x_label {
            let _ = writeln!(
                out,
                r##"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"##,
                self.x0 + self.w / 2.0,
                self.y0 + self.h + 36.0,
                escape(xl)
            );
        }
    }

    fn polyline(&self, out: &mut String, xs: &[f64], ys: &[f64], color: &str, dashed: bool) {
        let mut pts = String::new();
        for (x, y) in xs.iter().zip(ys) {
            if x.is_finite() && y.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", self.px(*x), self.py(*y));
            }
        }
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            pts.trim_end()
        );
    }
}

fn header(out: &mut String, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn bounds<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
}

impl LineChart {
    pub fn new(title: &str, x_label: &str, y_label: &str, x_axis: XAxis) -> Self {
        LineChart {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            x_axis,
            lines: Vec::new(),
        }
    }

    pub fn line(mut self, line: Line) -> Self {
        self.lines.push(line);
        self
    }

    pub fn render(&self) -> String {
        let tx = |x: f64| if self.x_axis == XAxis::Log { x.log10() } else { x };
        let lines: Vec<(Vec<f64>, &Line)> = self.lines.iter().map(|l| (l.xs.iter().map(|x| tx(*x)).collect(), l)).collect();
        let xb = bounds(lines.iter().flat_map(|(xs, _)| xs.iter()));
        let yb = bounds(self.lines.iter().flat_map(|l| l.ys.iter()));
        let (xb, yb) = if xb.0.is_finite() { (xb, yb) } else { ((0.0, 1.0), (0.0, 1.0)) };
        let height = PANEL_HEIGHT + MARGIN_TOP + MARGIN_BOTTOM;
        let mut out = String::new();
        header(&mut out, height, &self.title);
        let frame = Frame::new(MARGIN_TOP, PANEL_HEIGHT, xb, yb);
        frame.axes(&mut out, self.x_axis, &self.y_label, Some(&self.x_label));
        for (i, (xs, line)) in lines.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            frame.polyline(&mut out, xs, &line.ys, color, line.dashed);
            let ly = MARGIN_TOP + 14.0 + 18.0 * i as f64;
            let lx = frame.x0 + frame.w + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&line.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// ACF/PACF stems with the ±band lines.
pub fn correlogram_chart(title: &str, result: &CorrelogramResult) -> String {
    let lags: Vec<f64> = result.lags.iter().map(|l| *l as f64).collect();
    let (lo, hi) = bounds(result.coefficients.iter().chain([&result.band, &(-result.band)]));
    let height = PANEL_HEIGHT + MARGIN_TOP + MARGIN_BOTTOM;
    let mut out = String::new();
    header(&mut out, height, title);
    let xb = (-0.5, lags.last().copied().unwrap_or(0.0) + 0.5);
    let frame = Frame::new(MARGIN_TOP, PANEL_HEIGHT, xb, (lo.min(-1.0 * result.band).min(0.0), hi.max(1.0)));
    frame.axes(&mut out, XAxis::Linear, "correlation", Some("lag"));
    let zero = frame.py(0.0);
    for (x, c) in lags.iter().zip(&result.coefficients) {
        let px = frame.px(*x);
        let _ = writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{zero:.2}" x2="{px:.2}" y2="{:.2}" stroke="#1f77b4" stroke-width="2"/><circle cx="{px:.2}" cy="{:.2}" r="3" fill="#1f77b4"/>"##,
            frame.py(*c),
            frame.py(*c)
        );
    }
    for b in [result.band, -result.band] {
        let py = frame.py(b);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#d62728" stroke-dasharray="5 4"/>"##,
            frame.x0,
            frame.x0 + frame.w
        );
    }
    let _ = writeln!(
        out,
        r##"<line x1="{:.2}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#333"/>"##,
        frame.x0,
        frame.x0 + frame.w
    );
    out.push_str("</svg>\n");
    out
}

/// Observed, trend, seasonal and residual in four stacked panels.
pub fn decomposition_chart(title: &str, d: &Decomposition) -> String {
    let xs: Vec<f64> = d.dates.iter().map(|x| day_number(*x)).collect();
    let undefined = |v: &Vec<Option<f64>>| v.iter().map(|x| x.unwrap_or(f64::NAN)).collect::<Vec<f64>>();
    let panels: [(&str, Vec<f64>); 4] = [
        ("observed", d.observed.clone()),
        ("trend", undefined(&d.trend)),
        ("seasonal", d.seasonal.clone()),
        ("residual", undefined(&d.residual)),
    ];
    let panel_h = 170.0;
    let gap = 30.0;
    let height = MARGIN_TOP + 4.0 * (panel_h + gap) + MARGIN_BOTTOM;
    let mut out = String::new();
    header(&mut out, height, title);
    let xb = bounds(xs.iter());
    for (i, (name, ys)) in panels.iter().enumerate() {
        let top = MARGIN_TOP + i as f64 * (panel_h + gap);
        let frame = Frame::new(top, panel_h, xb, bounds(ys.iter()));
        let x_label = if i == 3 { Some("date") } else { None };
        frame.axes(&mut out, XAxis::Dates, name, x_label);
        // split at undefined points so edges stay blank
        let mut start = 0;
        while start < ys.len() {
            while start < ys.len() && !ys[start].is_finite() {
                start += 1;
            }
            let mut end = start;
            while end < ys.len() && ys[end].is_finite() {
                end += 1;
            }
            if end > start {
                frame.polyline(&mut out, &xs[start..end], &ys[start..end], PALETTE[i], false);
            }
            start = end;
        }
    }
    out.push_str("</svg>\n");
    out
}
