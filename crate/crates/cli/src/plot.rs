//! Static SVG rendering of trace files.
//!
//! The trajectory panel draws exactly two `<path>` elements, the dashed
//! reference and the solid actual track; the three error strips are
//! `<polyline>` elements. Everything else is axis furniture.

use std::fmt::Write as _;
use std::path::Path;

use omniform::sim::trace::ScenarioTrace;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 620.0;
const MARGIN: f64 = 46.0;
/// Curves are thinned to roughly this many vertices to keep files small.
const MAX_POINTS: usize = 1500;

struct Rect {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

/// Maps a data range onto a pixel interval with a small padding band.
struct Axis {
    lo: f64,
    hi: f64,
    pix_lo: f64,
    pix_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, pix_lo: f64, pix_hi: f64) -> Self {
        let span = (hi - lo).max(1e-9);
        let pad = span * 0.06;
        Self {
            lo: lo - pad,
            hi: hi + pad,
            pix_lo,
            pix_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.pix_lo + (v - self.lo) / (self.hi - self.lo) * (self.pix_hi - self.pix_lo)
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

fn thinned(n: usize) -> impl Iterator<Item = usize> {
    let stride = n.div_ceil(MAX_POINTS).max(1);
    (0..n).step_by(stride).chain(if n > 0 && (n - 1) % stride != 0 {
        Some(n - 1)
    } else {
        None
    })
}

fn path_data(points: &[(f64, f64)]) -> String {
    let mut d = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        let _ = write!(d, "{}{x:.2} {y:.2}", if i == 0 { "M" } else { " L" });
    }
    d
}

fn polyline_points(points: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:.2},{y:.2}");
    }
    s
}

fn frame(out: &mut String, r: &Rect) {
    let _ = writeln!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
         fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>",
        r.x, r.y, r.w, r.h
    );
}

fn label(out: &mut String, x: f64, y: f64, anchor: &str, size: f64, text: &str) {
    let _ = writeln!(
        out,
        "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\" \
         font-family=\"sans-serif\" font-size=\"{size}\" fill=\"#222\">{text}</text>"
    );
}

/// Renders the standard two-panel figure for one trace.
pub fn render_svg(trace: &ScenarioTrace) -> String {
    let rows = trace.rows();
    let n = rows.len();

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // trajectory panel, equal aspect
    let panel = Rect {
        x: MARGIN,
        y: MARGIN,
        w: 530.0,
        h: HEIGHT - 2.0 * MARGIN,
    };
    frame(&mut out, &panel);
    let (x_lo, x_hi) = min_max(rows.iter().flat_map(|r| [r.structure.x, r.reference.x]));
    let (y_lo, y_hi) = min_max(rows.iter().flat_map(|r| [r.structure.y, r.reference.y]));
    let span = (x_hi - x_lo).max(y_hi - y_lo).max(1e-6) * 1.12;
    let cx = (x_lo + x_hi) / 2.0;
    let cy = (y_lo + y_hi) / 2.0;
    let side = panel.w.min(panel.h);
    let plot = Rect {
        x: panel.x + (panel.w - side) / 2.0,
        y: panel.y + (panel.h - side) / 2.0,
        w: side,
        h: side,
    };
    let ax = Axis {
        lo: cx - span / 2.0,
        hi: cx + span / 2.0,
        pix_lo: plot.x,
        pix_hi: plot.x + plot.w,
    };
    // pixel y grows downward
    let ay = Axis {
        lo: cy - span / 2.0,
        hi: cy + span / 2.0,
        pix_lo: plot.y + plot.h,
        pix_hi: plot.y,
    };

    let reference: Vec<(f64, f64)> = thinned(n)
        .map(|i| (ax.map(rows[i].reference.x), ay.map(rows[i].reference.y)))
        .collect();
    let actual: Vec<(f64, f64)> = thinned(n)
        .map(|i| (ax.map(rows[i].structure.x), ay.map(rows[i].structure.y)))
        .collect();
    let _ = writeln!(
        out,
        "<path d=\"{}\" fill=\"none\" stroke=\"#888\" stroke-width=\"1.5\" \
         stroke-dasharray=\"6 4\"/>",
        path_data(&reference)
    );
    let _ = writeln!(
        out,
        "<path d=\"{}\" fill=\"none\" stroke=\"#0b62a4\" stroke-width=\"1.8\"/>",
        path_data(&actual)
    );
    if let Some(first) = rows.first() {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"#0b62a4\"/>",
            ax.map(first.structure.x),
            ay.map(first.structure.y)
        );
    }
    label(
        &mut out,
        panel.x + panel.w / 2.0,
        panel.y - 12.0,
        "middle",
        14.0,
        "trajectory [m]",
    );
    label(
        &mut out,
        panel.x,
        panel.y + panel.h + 18.0,
        "start",
        11.0,
        &format!(
            "x {:.3} .. {:.3}, y {:.3} .. {:.3}",
            ax.lo, ax.hi, ay.lo, ay.hi
        ),
    );
    // legend drawn with plain lines so curve elements stay countable
    let lx = panel.x + 12.0;
    let ly = panel.y + 16.0;
    let _ = writeln!(
        out,
        "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"#888\" \
         stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>",
        lx + 28.0
    );
    label(&mut out, lx + 34.0, ly + 4.0, "start", 11.0, "reference");
    let _ = writeln!(
        out,
        "<line x1=\"{lx}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#0b62a4\" stroke-width=\"1.8\"/>",
        ly + 16.0,
        lx + 28.0,
        ly + 16.0
    );
    label(&mut out, lx + 34.0, ly + 20.0, "start", 11.0, "actual");

    // error strips against time
    let strip_x = panel.x + panel.w + 40.0;
    let strip_w = WIDTH - strip_x - MARGIN / 2.0;
    let strip_h = (HEIGHT - 2.0 * MARGIN - 2.0 * 24.0) / 3.0;
    let (t_lo, t_hi) = min_max(rows.iter().map(|r| r.t));
    let series: [(&str, Vec<f64>); 3] = [
        ("e_x [m]", rows.iter().map(|r| r.error.ex).collect()),
        ("e_y [m]", rows.iter().map(|r| r.error.ey).collect()),
        ("e_theta [rad]", rows.iter().map(|r| r.error.etheta).collect()),
    ];
    for (k, (name, values)) in series.iter().enumerate() {
        let top = MARGIN + k as f64 * (strip_h + 24.0);
        let strip = Rect {
            x: strip_x,
            y: top,
            w: strip_w,
            h: strip_h,
        };
        frame(&mut out, &strip);
        let (e_lo, e_hi) = min_max(values.iter().copied());
        let at = Axis::new(t_lo, t_hi, strip.x, strip.x + strip.w);
        let ae = Axis::new(e_lo.min(0.0), e_hi.max(0.0), strip.y + strip.h, strip.y);
        let zero_y = ae.map(0.0);
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{zero_y:.2}\" x2=\"{:.2}\" y2=\"{zero_y:.2}\" \
             stroke=\"#ccc\" stroke-width=\"1\"/>",
            strip.x,
            strip.x + strip.w
        );
        let points: Vec<(f64, f64)> = thinned(n)
            .map(|i| (at.map(rows[i].t), ae.map(values[i])))
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#b5341f\" stroke-width=\"1.4\"/>",
            polyline_points(&points)
        );
        label(&mut out, strip.x, top - 6.0, "start", 12.0, name);
        label(
            &mut out,
            strip.x + strip.w,
            top + strip.h + 14.0,
            "end",
            10.0,
            &format!("{:.3} .. {:.3}", ae.lo, ae.hi),
        );
    }
    label(
        &mut out,
        strip_x + strip_w / 2.0,
        HEIGHT - 10.0,
        "middle",
        11.0,
        &format!("t = {t_lo:.2} .. {t_hi:.2} s"),
    );

    out.push_str("</svg>\n");
    out
}

pub fn write_svg(path: &Path, trace: &ScenarioTrace) -> std::io::Result<()> {
    std::fs::write(path, render_svg(trace))
}
