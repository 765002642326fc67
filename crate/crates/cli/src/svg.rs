//! Minimal static SVG charts: line charts and grouped histograms.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 60.0;
const GRID: &str = "#ddd";
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Sample {
    pub label: String,
    pub values: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

/// Axis range snapped to a 1-2-5 tick step, with about five ticks.
#[derive(Debug, Clone, PartialEq)]
struct Axis {
    lo: f64,
    hi: f64,
    step: f64,
}

impl Axis {
    fn fit(lo: f64, hi: f64) -> Self {
        let (lo, hi) = if !(lo.is_finite() && hi.is_finite()) {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else if lo == 0.0 {
            (0.0, 1.0)
        } else {
            (lo - lo.abs() * 0.1, hi + hi.abs() * 0.1)
        };
        let raw = (hi - lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        Self {
            lo: (lo / step).floor() * step,
            hi: (hi / step).ceil() * step,
            step,
        }
    }

    fn ticks(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step).round() as usize;
        (0..=n).map(|k| self.lo + k as f64 * self.step).collect()
    }

    fn label(&self, v: f64) -> String {
        if v.abs() < self.step * 1e-9 {
            "0".into()
        } else if self.step < 1e-3 || self.step >= 1e5 {
            format!("{v:.1e}")
        } else if self.step >= 1.0 {
            format!("{v:.0}")
        } else {
            let decimals = (-self.step.log10()).ceil() as usize;
            format!("{v:.decimals$}")
        }
    }
}

struct Frame {
    x: Axis,
    y: Axis,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.lo) / (self.x.hi - self.x.lo) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.lo) / (self.y.hi - self.y.lo) * (HEIGHT - TOP - BOTTOM)
    }

    fn header(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text class="title" x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (HEIGHT - BOTTOM, TOP);
        out.push_str("<g class=\"axes\" stroke=\"black\">\n");
        let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#);
        let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
        for t in self.x.ticks() {
            let x = self.px(t);
            let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}"/>"#, y0 + 5.0);
            let _ = writeln!(
                out,
                r#"<text class="tick" x="{x:.2}" y="{}" text-anchor="middle" stroke="none">{}</text>"#,
                y0 + 19.0,
                self.x.label(t)
            );
        }
        for t in self.y.ticks() {
            let y = self.py(t);
            let _ = writeln!(out, r#"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="{GRID}"/>"#);
            let _ = writeln!(
                out,
                r#"<text class="tick" x="{}" y="{:.2}" text-anchor="end" stroke="none">{}</text>"#,
                x0 - 8.0,
                y + 4.0,
                self.y.label(t)
            );
        }
        out.push_str("</g>\n");
        let _ = writeln!(
            out,
            r#"<text class="x-label" x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 16.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            r#"<text class="y-label" transform="translate(20 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }
}

fn legend(out: &mut String, labels: &[&str]) {
    out.push_str("<g class=\"legend\">\n");
    for (i, label) in labels.iter().enumerate() {
        let y = TOP + 12.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT - 190.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/>"#,
            x + 24.0,
            color(i)
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, x + 30.0, y + 4.0, escape(label));
    }
    out.push_str("</g>\n");
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, lines: &[Line]) -> String {
    let all = || lines.iter().flat_map(|l| l.points.iter());
    let (xl, xh) = bounds(all().map(|p| p.0));
    let (yl, yh) = bounds(all().map(|p| p.1));
    let frame = Frame {
        x: Axis::fit(xl, xh),
        y: Axis::fit(yl.min(0.0), yh),
    };
    let mut out = String::new();
    frame.header(&mut out, title, x_label, y_label);
    for (i, line) in lines.iter().enumerate() {
        let points: Vec<String> = line
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            escape(&line.label),
            color(i),
            points.join(" ")
        );
    }
    legend(&mut out, &lines.iter().map(|l| l.label.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Bin counts over `[0, hi]`; values at or past `hi` land in the last bin.
fn bin_counts(values: &[f64], hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &v in values.iter().filter(|v| v.is_finite()) {
        let k = ((v / hi) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize;
        counts[k] += 1;
    }
    counts
}

pub fn histogram(title: &str, x_label: &str, y_label: &str, samples: &[Sample], bins: usize) -> String {
    let (_, max) = bounds(samples.iter().flat_map(|s| s.values.iter().copied()));
    let x = Axis::fit(0.0, max);
    let counts: Vec<Vec<usize>> = samples.iter().map(|s| bin_counts(&s.values, x.hi, bins)).collect();
    let top = counts.iter().flatten().copied().max().unwrap_or(0) as f64;
    let frame = Frame {
        x,
        y: Axis::fit(0.0, top),
    };
    let mut out = String::new();
    frame.header(&mut out, title, x_label, y_label);
    let bin = (frame.x.hi - frame.x.lo) / bins as f64;
    let group = frame.px(bin) - frame.px(0.0);
    let bar = group / samples.len().max(1) as f64;
    for (i, (sample, counts)) in samples.iter().zip(&counts).enumerate() {
        let _ = writeln!(
            out,
            r#"<g class="series" data-label="{}" fill="{}" fill-opacity="0.8">"#,
            escape(&sample.label),
            color(i)
        );
        for (k, &c) in counts.iter().enumerate().filter(|(_, c)| **c > 0) {
            let x0 = frame.px(k as f64 * bin) + i as f64 * bar;
            let y = frame.py(c as f64);
            let _ = writeln!(
                out,
                r#"<rect x="{x0:.2}" y="{y:.2}" width="{bar:.2}" height="{:.2}"/>"#,
                frame.py(0.0) - y
            );
        }
        out.push_str("</g>\n");
    }
    legend(&mut out, &samples.iter().map(|s| s.label.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}
