//! Minimal deterministic SVG charts.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn header(out: &mut String, title: &str, width: f64, height: f64) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        width / 2.0,
        esc(title)
    );
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        self.x0 + (v - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn y(&self, v: f64) -> f64 {
        self.y0 + self.h - (v - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>",
            self.x0, self.y0, self.w, self.h
        );
        for k in 0..=4 {
            let f = f64::from(k) / 4.0;
            let xv = self.xr.0 + f * (self.xr.1 - self.xr.0);
            let yv = self.yr.0 + f * (self.yr.1 - self.yr.0);
            let (px, py) = (self.x(xv), self.y(yv));
            let _ = writeln!(
                out,
                "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#ddd\"/>\
                 <text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
                self.y0,
                self.y0 + self.h,
                self.y0 + self.h + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                out,
                "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" stroke=\"#ddd\"/>\
                 <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
                self.x0,
                self.x0 + self.w,
                self.x0 - 6.0,
                py + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            self.x0 + self.w / 2.0,
            self.y0 + self.h + 36.0,
            esc(xlabel)
        );
        let (lx, ly) = (self.x0 - 55.0, self.y0 + self.h / 2.0);
        let _ = writeln!(
            out,
            "<text x=\"{lx:.2}\" y=\"{ly:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 {lx:.2} {ly:.2})\">{}</text>",
            esc(ylabel)
        );
    }
}

pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title, W, H);
    let f = Frame {
        x0: LEFT,
        y0: TOP,
        w: W - LEFT - RIGHT,
        h: H - TOP - BOTTOM,
        xr: range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0))),
        yr: range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1))),
    };
    f.axes(&mut out, xlabel, ylabel);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|p| format!("{:.2},{:.2}", f.x(p.0), f.y(p.1)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            pts.join(" ")
        );
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            W - RIGHT - 150.0,
            W - RIGHT - 130.0,
            W - RIGHT - 124.0,
            ly + 4.0,
            esc(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One histogram panel per `(label, values)`, sharing the bin edges.
pub fn histogram_panels(title: &str, xlabel: &str, panels: &[(String, Vec<f64>)], bins: usize) -> String {
    let n = panels.len().max(1) as f64;
    let pw = 300.0;
    let width = LEFT + n * (pw + 30.0);
    let mut out = String::new();
    header(&mut out, title, width, H);
    let hi = panels
        .iter()
        .flat_map(|p| p.1.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let hi = if hi > 0.0 { hi } else { 1.0 };
    let counts: Vec<Vec<usize>> = panels
        .iter()
        .map(|(_, vals)| {
            let mut c = vec![0usize; bins];
            for v in vals.iter().filter(|v| v.is_finite()) {
                let b = ((v / hi) * bins as f64).floor() as usize;
                c[b.min(bins - 1)] += 1;
            }
            c
        })
        .collect();
    let cmax = counts.iter().flatten().copied().max().unwrap_or(1).max(1) as f64;
    for (k, ((label, _), c)) in panels.iter().zip(&counts).enumerate() {
        let f = Frame {
            x0: LEFT + k as f64 * (pw + 30.0),
            y0: TOP + 20.0,
            w: pw,
            h: H - TOP - BOTTOM - 20.0,
            xr: (0.0, hi),
            yr: (0.0, cmax),
        };
        f.axes(&mut out, xlabel, "count");
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            f.x0 + pw / 2.0,
            TOP + 12.0,
            esc(label)
        );
        let bw = hi / bins as f64;
        for (b, &cnt) in c.iter().enumerate().filter(|(_, &cnt)| cnt > 0) {
            let (x1, x2) = (f.x(b as f64 * bw), f.x((b + 1) as f64 * bw));
            let y = f.y(cnt as f64);
            let _ = writeln!(
                out,
                "<rect x=\"{x1:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\" stroke=\"white\"/>",
                x2 - x1,
                f.y0 + f.h - y,
                PALETTE[k % PALETTE.len()]
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
