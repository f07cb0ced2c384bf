//! Minimal SVG emission: trajectories over stratum overlays and log-log
//! rate plots. Output is deterministic text.

use crate::geometry::Point;
use crate::stratification::Stratification;
use crate::stratum::StratumKind;
use crate::verify::rates::RateReport;
use std::fmt::Write as _;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 40.0;
const MAX_POINTS: usize = 4000;

struct Frame {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let w = SIZE - 2.0 * MARGIN;
        let sx = MARGIN + (x - self.lo[0]) / (self.hi[0] - self.lo[0]) * w;
        let sy = SIZE - MARGIN - (y - self.lo[1]) / (self.hi[1] - self.lo[1]) * w;
        (sx, sy)
    }

    fn polyline(&self, pts: &[(f64, f64)], style: &str) -> String {
        let mut s = String::from("<polyline fill=\"none\" ");
        s.push_str(style);
        s.push_str(" points=\"");
        for (i, &(x, y)) in pts.iter().enumerate() {
            let (a, b) = self.map(x, y);
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{a:.2},{b:.2}");
        }
        s.push_str("\"/>\n");
        s
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <title>{}</title>\n\
         <rect x=\"0\" y=\"0\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>\n",
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn axes(frame: &Frame, xlabel: &str, ylabel: &str) -> String {
    let (x0, y0) = frame.map(frame.lo[0], frame.lo[1]);
    let (x1, y1) = frame.map(frame.hi[0], frame.hi[1]);
    format!(
        "<rect x=\"{x0:.2}\" y=\"{y1:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>\n\
         <text x=\"{x0:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n\
         <text x=\"4\" y=\"{:.2}\" font-size=\"11\">{}</text>\n",
        x1 - x0,
        y0 - y1,
        y0 + 16.0,
        format_tick(frame.lo[0]),
        x1,
        y0 + 16.0,
        format_tick(frame.hi[0]),
        y1 + 4.0,
        format_tick(frame.hi[1]),
    ) + &format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"4\" y=\"{:.2}\" font-size=\"11\">{}</text>\n\
         <text x=\"4\" y=\"{:.2}\" font-size=\"12\">{}</text>\n",
        (x0 + x1) / 2.0,
        SIZE - 8.0,
        escape(xlabel),
        y0,
        format_tick(frame.lo[1]),
        MARGIN - 12.0,
        escape(ylabel),
    )
}

fn format_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v}")
    }
}

fn thin(points: &[Point]) -> Vec<&Point> {
    let stride = points.len().div_ceil(MAX_POINTS).max(1);
    let mut out: Vec<&Point> = points.iter().step_by(stride).collect();
    if let Some(last) = points.last() {
        if !std::ptr::eq(*out.last().expect("nonempty"), last) {
            out.push(last);
        }
    }
    out
}

/// Parameter range of `anchor + t dir` inside the box, intersected with `(lo, hi)`.
fn clip_line(
    anchor: &Point,
    dir: &Point,
    lo: &[f64],
    hi: &[f64],
    t_lo: f64,
    t_hi: f64,
) -> Option<(f64, f64)> {
    let (mut a, mut b) = (t_lo, t_hi);
    for i in 0..anchor.dim() {
        if dir[i].abs() < 1e-15 {
            if anchor[i] < lo[i] || anchor[i] > hi[i] {
                return None;
            }
            continue;
        }
        let t1 = (lo[i] - anchor[i]) / dir[i];
        let t2 = (hi[i] - anchor[i]) / dir[i];
        a = a.max(t1.min(t2));
        b = b.min(t1.max(t2));
    }
    (a < b).then_some((a, b))
}

/// Trajectory over the lower-dimensional strata, axes fixed to the domain.
/// One-dimensional problems are drawn as `x_k` against `k`.
pub fn trajectory_svg(strat: &Stratification, iterates: &[Point], title: &str) -> String {
    let dom = strat.domain();
    let mut s = header(title);
    match strat.ambient_dim() {
        1 => {
            let n = iterates.len().max(2) as f64;
            let frame = Frame {
                lo: [1.0, dom.lo[0]],
                hi: [n, dom.hi[0]],
            };
            s += &axes(&frame, "k", "x");
            for st in strat.strata() {
                if let StratumKind::Point { at } = &st.kind {
                    s += &frame.polyline(
                        &[(1.0, at[0]), (n, at[0])],
                        "stroke=\"#999\" stroke-dasharray=\"4 3\"",
                    );
                }
            }
            let pts: Vec<(f64, f64)> = iterates
                .iter()
                .enumerate()
                .step_by(iterates.len().div_ceil(MAX_POINTS).max(1))
                .map(|(i, p)| ((i + 1) as f64, p[0]))
                .collect();
            s += &frame.polyline(&pts, "stroke=\"#c03\" stroke-width=\"1\"");
        }
        _ => {
            let frame = Frame {
                lo: [dom.lo[0], dom.lo[1]],
                hi: [dom.hi[0], dom.hi[1]],
            };
            s += &axes(&frame, "x", "y");
            let (lo, hi) = (&dom.lo[..2], &dom.hi[..2]);
            for st in strat.strata() {
                match &st.kind {
                    StratumKind::Point { at } => {
                        let (cx, cy) = frame.map(at[0], at[1]);
                        let _ = writeln!(
                            s,
                            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3\" fill=\"#333\"/>"
                        );
                    }
                    StratumKind::Affine {
                        anchor,
                        basis,
                        bounds,
                    } if basis.len() == 1 && anchor.dim() == 2 => {
                        if let Some((a, b)) = clip_line(
                            anchor,
                            &basis[0],
                            lo,
                            hi,
                            bounds[0].lo_f(),
                            bounds[0].hi_f(),
                        ) {
                            let p = anchor.add_scaled(a, &basis[0]);
                            let q = anchor.add_scaled(b, &basis[0]);
                            s += &frame.polyline(
                                &[(p[0], p[1]), (q[0], q[1])],
                                "stroke=\"#36c\" stroke-width=\"1.5\"",
                            );
                        }
                    }
                    StratumKind::CircleArc {
                        center,
                        radius,
                        arc,
                    } => {
                        let [a, b] = arc.unwrap_or([-std::f64::consts::PI, std::f64::consts::PI]);
                        let pts: Vec<(f64, f64)> = (0..=128)
                            .map(|i| {
                                let t = a + (b - a) * i as f64 / 128.0;
                                (center[0] + radius * t.cos(), center[1] + radius * t.sin())
                            })
                            .collect();
                        s += &frame.polyline(&pts, "stroke=\"#36c\" stroke-width=\"1.5\"");
                    }
                    _ => {}
                }
            }
            let pts: Vec<(f64, f64)> = thin(iterates).iter().map(|p| (p[0], p[1])).collect();
            s += &frame.polyline(&pts, "stroke=\"#c03\" stroke-width=\"1\"");
            if let Some(p) = iterates.first() {
                let (cx, cy) = frame.map(p[0], p[1]);
                let _ = writeln!(
                    s,
                    "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"none\" stroke=\"#c03\"/>"
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Log-log plot of the mean squared gradient against `K`.
pub fn rates_svg(report: &RateReport) -> String {
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.mean_grad_sq > 0.0)
        .map(|r| ((r.k as f64).log10(), r.mean_grad_sq.log10()))
        .collect();
    let mut s = header(&format!("rates for {}", report.function));
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo - 0.1 * (hi - lo), hi + 0.1 * (hi - lo))
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let frame = Frame {
        lo: [x0, y0],
        hi: [x1, y1],
    };
    s += &axes(&frame, "log10 K", "log10 mean grad_sq");
    s += &frame.polyline(&pts, "stroke=\"#c03\" stroke-width=\"1.5\"");
    for &(x, y) in &pts {
        let (cx, cy) = frame.map(x, y);
        let _ = writeln!(
            s,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3\" fill=\"#c03\"/>"
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"20\" font-size=\"12\">fitted slope {}, predicted {:.4}</text>",
        MARGIN,
        report
            .fitted_slope
            .map_or("n/a".to_string(), |v| format!("{v:.4}")),
        report.predicted_slope
    );
    s.push_str("</svg>\n");
    s
}

/// Several series against the index `k`, on shared linear axes.
pub fn series_svg(title: &str, series: &[(&str, &[f64])]) -> String {
    let mut s = header(title);
    let n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let hi = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let frame = Frame {
        lo: [1.0, 0.0],
        hi: [(n.max(2)) as f64, if hi > 0.0 { hi * 1.05 } else { 1.0 }],
    };
    s += &axes(&frame, "k", "partial sum");
    let colors = ["#c03", "#36c", "#393"];
    for (i, (name, v)) in series.iter().enumerate() {
        let stride = v.len().div_ceil(MAX_POINTS).max(1);
        let pts: Vec<(f64, f64)> = v
            .iter()
            .enumerate()
            .step_by(stride)
            .map(|(k, y)| ((k + 1) as f64, *y))
            .collect();
        let color = colors[i % colors.len()];
        s += &frame.polyline(&pts, &format!("stroke=\"{color}\" stroke-width=\"1.5\""));
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"{color}\">{}</text>",
            MARGIN + 8.0,
            MARGIN + 16.0 * (i as f64 + 1.0),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
