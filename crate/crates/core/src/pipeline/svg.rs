//! Self-contained SVG figures and the CSV files that back them.
//!
//! Every figure is rendered from a [`FigureData`] value. The same value is
//! written as CSV, and [`FigureData::from_csv`] reads it back exactly, so a
//! figure can always be regenerated from its CSV.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::evaluation::PrCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 96.0;
const TICKS: usize = 6;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FigureSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl FigureSpec {
    pub fn new(
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
    ) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    Boxplot,
    Scatter,
    Bar,
    Curves,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub severity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FigureData {
    /// Named groups of values; empty groups are not drawn.
    Boxplot(Vec<(String, Vec<f64>)>),
    /// Points coloured by severity, drawn with the `y = x` reference line.
    Scatter(Vec<ScatterPoint>),
    Bar(Vec<(String, f64)>),
    /// Named polylines.
    Curves(Vec<(String, Vec<(f64, f64)>)>),
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Data(format!("figure csv line {line}: `{field}` is not a number")))
}

impl FigureData {
    pub fn kind(&self) -> FigureKind {
        match self {
            FigureData::Boxplot(_) => FigureKind::Boxplot,
            FigureData::Scatter(_) => FigureKind::Scatter,
            FigureData::Bar(_) => FigureKind::Bar,
            FigureData::Curves(_) => FigureKind::Curves,
        }
    }

    fn header(kind: FigureKind) -> [&'static str; 3] {
        match kind {
            FigureKind::Boxplot => ["group", "value", ""],
            FigureKind::Scatter => ["x", "y", "severity"],
            FigureKind::Bar => ["label", "value", ""],
            FigureKind::Curves => ["series", "x", "y"],
        }
    }

    /// Plotted numbers in long format.
    pub fn to_csv(&self) -> Result<String> {
        let header: Vec<&str> = Self::header(self.kind())
            .into_iter()
            .filter(|h| !h.is_empty())
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut rows: Vec<Vec<String>> = Vec::new();
        match self {
            FigureData::Boxplot(groups) => {
                for (name, values) in groups {
                    rows.extend(values.iter().map(|&v| vec![name.clone(), num(v)]));
                }
            }
            FigureData::Scatter(points) => {
                rows.extend(
                    points
                        .iter()
                        .map(|p| vec![num(p.x), num(p.y), num(p.severity)]),
                );
            }
            FigureData::Bar(bars) => {
                rows.extend(bars.iter().map(|(l, v)| vec![l.clone(), num(*v)]))
            }
            FigureData::Curves(series) => {
                for (name, pts) in series {
                    rows.extend(pts.iter().map(|&(x, y)| vec![name.clone(), num(x), num(y)]));
                }
            }
        }
        let csv_err = |e: csv::Error| Error::Data(format!("figure csv: {e}"));
        w.write_record(&header).map_err(csv_err)?;
        for r in rows {
            w.write_record(&r).map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Data(format!("figure csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_csv(kind: FigureKind, text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let want: Vec<&str> = Self::header(kind)
            .into_iter()
            .filter(|h| !h.is_empty())
            .collect();
        let got = r
            .headers()
            .map_err(|e| Error::Data(format!("figure csv: {e}")))?;
        if got.iter().collect::<Vec<_>>() != want {
            return Err(Error::Data(format!(
                "figure csv header {:?}, expected {:?}",
                got, want
            )));
        }
        let mut records = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Data(format!("figure csv: {e}")))?;
            records.push((i + 2, rec));
        }
        fn grouped<T>(items: Vec<(String, T)>) -> Vec<(String, Vec<T>)> {
            let mut out: Vec<(String, Vec<T>)> = Vec::new();
            for (name, v) in items {
                match out.last_mut() {
                    Some((last, vs)) if *last == name => vs.push(v),
                    _ => out.push((name, vec![v])),
                }
            }
            out
        }
        Ok(match kind {
            FigureKind::Boxplot => FigureData::Boxplot(grouped(
                records
                    .iter()
                    .map(|(l, r)| Ok((r[0].to_string(), parse_f64(&r[1], *l)?)))
                    .collect::<Result<Vec<_>>>()?,
            )),
            FigureKind::Scatter => FigureData::Scatter(
                records
                    .iter()
                    .map(|(l, r)| {
                        Ok(ScatterPoint {
                            x: parse_f64(&r[0], *l)?,
                            y: parse_f64(&r[1], *l)?,
                            severity: parse_f64(&r[2], *l)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            FigureKind::Bar => FigureData::Bar(
                records
                    .iter()
                    .map(|(l, r)| Ok((r[0].to_string(), parse_f64(&r[1], *l)?)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            FigureKind::Curves => FigureData::Curves(grouped(
                records
                    .iter()
                    .map(|(l, r)| {
                        Ok((
                            r[0].to_string(),
                            (parse_f64(&r[1], *l)?, parse_f64(&r[2], *l)?),
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?,
            )),
        })
    }
}

/// Tukey box: quartiles by linear interpolation, whiskers at the most
/// extreme values within 1.5 IQR of the box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v
        .iter()
        .copied()
        .filter(|x| (lo_fence..=hi_fence).contains(x))
        .collect();
    Some(BoxStats {
        q1,
        median,
        q3,
        lower_whisker: inside.first().copied().unwrap_or(median).min(q1),
        upper_whisker: inside.last().copied().unwrap_or(median).max(q3),
        outliers: v
            .into_iter()
            .filter(|x| !(lo_fence..=hi_fence).contains(x))
            .collect(),
    })
}

/// PR operating points `(recall, precision)` in order of decreasing
/// threshold, starting at recall 0; repeated points are dropped.
pub fn pr_points(curve: &PrCurve) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for k in (0..curve.thresholds.len()).rev() {
        if curve.predicted[k] == 0 {
            continue;
        }
        let p = (curve.recall[k], curve.precision[k]);
        if pts.is_empty() {
            pts.push((0.0, p.1));
        }
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    pts
}

#[derive(Debug, Clone, Copy)]
struct Range {
    min: f64,
    max: f64,
}

impl Range {
    fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.into_iter().filter(|v| v.is_finite()) {
            min = min.min(v);
            max = max.max(v);
        }
        if !min.is_finite() {
            return Self { min: 0.0, max: 1.0 };
        }
        if min == max {
            let pad = if min == 0.0 { 0.5 } else { 0.1 * min.abs() };
            return Self {
                min: min - pad,
                max: max + pad,
            };
        }
        let pad = 0.05 * (max - min);
        Self {
            min: min - pad,
            max: max + pad,
        }
    }

    fn including(self, v: f64) -> Self {
        Self {
            min: self.min.min(v),
            max: self.max.max(v),
        }
    }

    fn frac(self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    fn ticks(self) -> Vec<f64> {
        (0..TICKS)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (TICKS - 1) as f64)
            .collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Linear blend through three colours for severities normalized to `[0, 1]`.
fn severity_colour(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 3] = [
        (68.0, 1.0, 84.0),
        (33.0, 145.0, 140.0),
        (253.0, 231.0, 37.0),
    ];
    let t = t.clamp(0.0, 1.0) * 2.0;
    let i = (t.floor() as usize).min(1);
    let f = t - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(spec: &FigureSpec) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(
            out,
            r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&spec.title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
            HEIGHT - 8.0,
            escape(&spec.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + (HEIGHT - TOP - BOTTOM) / 2.0,
            TOP + (HEIGHT - TOP - BOTTOM) / 2.0,
            escape(&spec.y_label)
        );
        Self { out }
    }

    fn px(x: f64) -> f64 {
        LEFT + x * (WIDTH - LEFT - RIGHT)
    }

    fn py(y: f64) -> f64 {
        HEIGHT - BOTTOM - y * (HEIGHT - TOP - BOTTOM)
    }

    fn frame(&mut self) {
        let _ = writeln!(
            self.out,
            r##"<rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
            WIDTH - LEFT - RIGHT,
            HEIGHT - TOP - BOTTOM
        );
    }

    fn y_axis(&mut self, r: Range) {
        for t in r.ticks() {
            let y = Self::py(r.frac(t));
            let _ = writeln!(
                self.out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT - 4.0,
                LEFT - 6.0,
                y + 4.0,
                tick_label(t)
            );
        }
    }

    fn x_axis(&mut self, r: Range) {
        let base = HEIGHT - BOTTOM;
        for t in r.ticks() {
            let x = Self::px(r.frac(t));
            let _ = writeln!(
                self.out,
                r##"<line x1="{x:.2}" y1="{base:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                base + 4.0,
                base + 16.0,
                tick_label(t)
            );
        }
    }

    fn category_labels(&mut self, labels: &[&str]) {
        let slot = 1.0 / labels.len().max(1) as f64;
        let base = HEIGHT - BOTTOM + 12.0;
        let size = if labels.len() > 12 { 9 } else { 11 };
        for (i, l) in labels.iter().enumerate() {
            let x = Self::px((i as f64 + 0.5) * slot);
            let _ = writeln!(
                self.out,
                r#"<text x="{x:.2}" y="{base:.2}" font-size="{size}" text-anchor="end" transform="rotate(-45 {x:.2} {base:.2})">{}</text>"#,
                escape(l)
            );
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn boxplot(c: &mut Canvas, groups: &[(String, Vec<f64>)]) {
    let groups: Vec<&(String, Vec<f64>)> = groups.iter().filter(|(_, v)| !v.is_empty()).collect();
    let r = Range::of(groups.iter().flat_map(|(_, v)| v.iter().copied()));
    c.frame();
    c.y_axis(r);
    let slot = 1.0 / groups.len().max(1) as f64;
    let half = 0.3 * slot * (WIDTH - LEFT - RIGHT);
    for (i, (_, values)) in groups.iter().enumerate() {
        let s = box_stats(values).expect("group is nonempty");
        let x = Canvas::px((i as f64 + 0.5) * slot);
        let y = |v: f64| Canvas::py(r.frac(v));
        let _ = writeln!(
            c.out,
            r##"<line class="whisker" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><line class="whisker" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/>"##,
            y(s.lower_whisker),
            y(s.q1),
            y(s.q3),
            y(s.upper_whisker)
        );
        let _ = writeln!(
            c.out,
            r##"<rect class="box" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#333"/>"##,
            x - half,
            y(s.q3),
            2.0 * half,
            y(s.q1) - y(s.q3)
        );
        let _ = writeln!(
            c.out,
            r##"<line class="median" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d62728" stroke-width="2"/>"##,
            x - half,
            y(s.median),
            x + half,
            y(s.median)
        );
        for o in &s.outliers {
            let _ = writeln!(
                c.out,
                r##"<circle class="outlier" cx="{x:.2}" cy="{:.2}" r="2" fill="none" stroke="#333"/>"##,
                y(*o)
            );
        }
    }
    let labels: Vec<&str> = groups.iter().map(|(n, _)| n.as_str()).collect();
    c.category_labels(&labels);
}

fn scatter(c: &mut Canvas, points: &[ScatterPoint]) {
    let r = Range::of(points.iter().flat_map(|p| [p.x, p.y]));
    c.frame();
    c.x_axis(r);
    c.y_axis(r);
    let _ = writeln!(
        c.out,
        r##"<line class="reference" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#000" stroke-dasharray="5,4"/>"##,
        Canvas::px(0.0),
        Canvas::py(0.0),
        Canvas::px(1.0),
        Canvas::py(1.0)
    );
    let sev = Range::of(points.iter().map(|p| p.severity));
    let (smin, smax) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.severity), b.max(p.severity))
        });
    for p in points {
        let t = if smax > smin {
            (p.severity - smin) / (smax - smin)
        } else {
            sev.frac(p.severity)
        };
        let _ = writeln!(
            c.out,
            r##"<circle class="marker" cx="{:.2}" cy="{:.2}" r="3.5" fill="{}" stroke="#222" stroke-width="0.5"/>"##,
            Canvas::px(r.frac(p.x)),
            Canvas::py(r.frac(p.y)),
            severity_colour(t)
        );
    }
    if smin.is_finite() {
        let y = HEIGHT - BOTTOM + 40.0;
        for (i, (label, t)) in [(tick_label(smin), 0.0), (tick_label(smax), 1.0)]
            .iter()
            .enumerate()
        {
            let x = LEFT + 160.0 * i as f64;
            let _ = writeln!(
                c.out,
                r#"<rect x="{x:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{y:.2}">severity {label}</text>"#,
                y - 9.0,
                severity_colour(*t),
                x + 14.0
            );
        }
    }
}

fn bar(c: &mut Canvas, bars: &[(String, f64)]) {
    let r = Range::of(bars.iter().map(|b| b.1)).including(0.0);
    c.frame();
    c.y_axis(r);
    let slot = 1.0 / bars.len().max(1) as f64;
    let half = 0.35 * slot * (WIDTH - LEFT - RIGHT);
    let zero = Canvas::py(r.frac(0.0));
    for (i, (_, v)) in bars.iter().enumerate() {
        let x = Canvas::px((i as f64 + 0.5) * slot);
        let y = Canvas::py(r.frac(*v));
        let _ = writeln!(
            c.out,
            r##"<rect class="bar" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"##,
            x - half,
            y.min(zero),
            2.0 * half,
            (zero - y).abs(),
            PALETTE[0]
        );
    }
    let labels: Vec<&str> = bars.iter().map(|(n, _)| n.as_str()).collect();
    c.category_labels(&labels);
}

fn curves(c: &mut Canvas, series: &[(String, Vec<(f64, f64)>)]) {
    let xs = Range::of(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
    let ys = Range::of(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));
    let unit = |r: Range| {
        if r.min >= -0.05 && r.max <= 1.05 {
            Range { min: 0.0, max: 1.0 }
        } else {
            r
        }
    };
    let (xs, ys) = (unit(xs), unit(ys));
    c.frame();
    c.x_axis(xs);
    c.y_axis(ys);
    for (i, (name, pts)) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                format!(
                    "{:.2},{:.2}",
                    Canvas::px(xs.frac(x)),
                    Canvas::py(ys.frac(y))
                )
            })
            .collect();
        let _ = writeln!(
            c.out,
            r#"<polyline class="curve" points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        let ly = HEIGHT - BOTTOM + 36.0 + 14.0 * (i / 3) as f64;
        let lx = LEFT + 180.0 * (i % 3) as f64;
        let _ = writeln!(
            c.out,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-width="2"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            lx + 16.0,
            ly - 4.0,
            lx + 20.0,
            escape(name)
        );
    }
}

/// Render `data` with one of the four templates.
pub fn emit_svg(spec: &FigureSpec, data: &FigureData) -> String {
    let mut c = Canvas::new(spec);
    match data {
        FigureData::Boxplot(g) => boxplot(&mut c, g),
        FigureData::Scatter(p) => scatter(&mut c, p),
        FigureData::Bar(b) => bar(&mut c, b),
        FigureData::Curves(s) => curves(&mut c, s),
    }
    c.finish()
}
