//! Static SVG rendering of a sweep: precision curves on a log scale above
//! stacked optimal-weight profiles.

use std::fmt::Write;

use crate::sweep::SweepResult;

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 300.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

struct Axes {
    x0: f64,
    x1: f64,
    top: f64,
    height: f64,
}

impl Axes {
    fn px(&self, t: f64) -> f64 {
        MARGIN + t * (WIDTH - 2.0 * MARGIN)
    }

    fn x(&self, eta: f64) -> f64 {
        let span = if self.x1 > self.x0 { self.x1 - self.x0 } else { 1.0 };
        self.px((eta - self.x0) / span)
    }

    /// `t = 0` is the bottom edge.
    fn y(&self, t: f64) -> f64 {
        self.top + (1.0 - t) * self.height
    }

    fn frame(&self, out: &mut String, label: &str) {
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            MARGIN,
            self.top,
            WIDTH - 2.0 * MARGIN,
            self.height
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            self.top + self.height + 32.0,
            escape(label)
        );
        for i in 0..=4 {
            let eta = self.x0 + (self.x1 - self.x0) * i as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{:.2}</text>"#,
                self.x(eta),
                self.top + self.height + 14.0,
                eta
            );
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Polyline path through the defined points, broken at gaps.
fn path(points: impl Iterator<Item = Option<(f64, f64)>>) -> String {
    let mut d = String::new();
    let mut pen_down = false;
    for p in points {
        match p {
            Some((x, y)) => {
                let _ = write!(d, "{}{x:.2},{y:.2} ", if pen_down { 'L' } else { 'M' });
                pen_down = true;
            }
            None => pen_down = false,
        }
    }
    d.trim_end().to_string()
}

pub fn render_svg(sweep: &SweepResult) -> String {
    let grid = &sweep.eta_grid;
    let (x0, x1) = (grid.first().copied().unwrap_or(0.0), grid.last().copied().unwrap_or(1.0));
    let mut out = String::new();
    let height = 2.0 * PANEL_HEIGHT + 3.0 * MARGIN;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(
        out,
        "<title>N = {} {} sweep ({} {})</title>",
        sweep.n_photons,
        sweep.mode,
        escape(&sweep.provenance.tool),
        escape(&sweep.provenance.version)
    );
    let _ = writeln!(out, "<desc>{}</desc>", escape(&sweep.provenance.command_line));

    // precision panel, log10 scale
    let values = sweep.columns.iter().flat_map(|c| c.delta_phi.iter().flatten()).filter(|v| **v > 0.0);
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.log10()), hi.max(v.log10())));
    let (lo, hi) = if lo < hi { (lo.floor(), hi.ceil()) } else { (-1.0, 1.0) };
    let top = Axes { x0, x1, top: MARGIN, height: PANEL_HEIGHT };
    let _ = writeln!(out, r#"<g class="panel" id="precision">"#);
    top.frame(&mut out, "transmissivity");
    let mut decade = lo;
    while decade <= hi {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">1e{}</text>"#,
            MARGIN - 4.0,
            top.y((decade - lo) / (hi - lo)),
            decade as i32
        );
        decade += 1.0;
    }
    for (c, column) in sweep.columns.iter().enumerate() {
        let colour = PALETTE[c % PALETTE.len()];
        let d = path(grid.iter().zip(&column.delta_phi).map(|(eta, v)| {
            v.filter(|v| *v > 0.0).map(|v| (top.x(*eta), top.y((v.log10() - lo) / (hi - lo))))
        }));
        let _ = writeln!(
            out,
            r#"<g class="series" data-name="{}" data-metric="{}"><path d="{d}" fill="none" stroke="{colour}" stroke-width="1.5"/></g>"#,
            escape(&column.name),
            escape(&column.metric)
        );
        let _ = writeln!(
            out,
            r#"<text class="legend" x="{:.2}" y="{:.2}" font-size="10" fill="{colour}">{}</text>"#,
            WIDTH - MARGIN + 4.0,
            MARGIN + 12.0 * (c + 1) as f64,
            escape(&column.name)
        );
    }
    let _ = writeln!(out, "</g>");

    // stacked weights x_0 (bottom) .. x_N (top)
    let bottom = Axes { x0, x1, top: 2.0 * MARGIN + PANEL_HEIGHT, height: PANEL_HEIGHT };
    let _ = writeln!(out, r#"<g class="panel" id="weights">"#);
    bottom.frame(&mut out, "transmissivity");
    let rows: Vec<(f64, &Vec<f64>)> =
        grid.iter().zip(&sweep.weights).filter_map(|(eta, w)| w.as_ref().map(|w| (*eta, w))).collect();
    for k in 0..=sweep.n_photons {
        let lower: Vec<(f64, f64)> = rows.iter().map(|(eta, w)| (*eta, w[..k].iter().sum())).collect();
        let upper: Vec<(f64, f64)> = rows.iter().map(|(eta, w)| (*eta, w[..=k].iter().sum())).collect();
        let mut points = String::new();
        for (eta, s) in upper.iter().chain(lower.iter().rev()) {
            let _ = write!(points, "{:.2},{:.2} ", bottom.x(*eta), bottom.y(s.clamp(0.0, 1.0)));
        }
        let _ = writeln!(
            out,
            r#"<polygon class="weight" data-k="{k}" points="{}" fill="{}" fill-opacity="0.8" stroke="none"/>"#,
            points.trim_end(),
            PALETTE[k % PALETTE.len()]
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}
