//! Static SVG rendering of the front and of single frames.

use std::fmt::Write;

use super::{FrameData, ParetoFront};

const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

struct Panel {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

struct Bounds {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Bounds {
    fn of(series: &[(&[f64], &[f64])]) -> Self {
        let mut b = Bounds {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for (xs, ys) in series {
            for (&x, &y) in xs.iter().zip(ys.iter()) {
                if x.is_finite() && y.is_finite() {
                    b.x0 = b.x0.min(x);
                    b.x1 = b.x1.max(x);
                    b.y0 = b.y0.min(y);
                    b.y1 = b.y1.max(y);
                }
            }
        }
        if !b.x0.is_finite() {
            b = Bounds {
                x0: 0.0,
                x1: 1.0,
                y0: 0.0,
                y1: 1.0,
            };
        }
        let pad = |lo: &mut f64, hi: &mut f64| {
            let span = (*hi - *lo).max(1e-9);
            *lo -= 0.05 * span;
            *hi += 0.05 * span;
        };
        pad(&mut b.x0, &mut b.x1);
        pad(&mut b.y0, &mut b.y1);
        b
    }
}

impl Panel {
    fn map(&self, b: &Bounds, x: f64, y: f64) -> (f64, f64) {
        (
            self.x + (x - b.x0) / (b.x1 - b.x0) * self.w,
            self.y + self.h - (y - b.y0) / (b.y1 - b.y0) * self.h,
        )
    }

    fn frame(&self, out: &mut String, b: &Bounds, title: &str, xlabel: &str) {
        let _ = writeln!(
            out,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
            self.x, self.y, self.w, self.h
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{title}</text>"#,
            self.x + self.w / 2.0,
            self.y - 8.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{xlabel}</text>"#,
            self.x + self.w / 2.0,
            self.y + self.h + 30.0
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = b.x0 + f * (b.x1 - b.x0);
            let yv = b.y0 + f * (b.y1 - b.y0);
            let (px, _) = self.map(b, xv, b.y0);
            let (_, py) = self.map(b, b.x0, yv);
            let _ = writeln!(
                out,
                r#"<text x="{px:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
                self.y + self.h + 14.0,
                tick(xv)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
                self.x - 4.0,
                py + 3.0,
                tick(yv)
            );
        }
    }

    fn polyline(&self, out: &mut String, b: &Bounds, xs: &[f64], ys: &[f64], color: &str) {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| {
                let (px, py) = self.map(b, x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
    }

    fn dot(&self, out: &mut String, b: &Bounds, x: f64, y: f64, r: f64, color: &str) {
        let (px, py) = self.map(b, x, y);
        let _ = writeln!(
            out,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="{r}" fill="{color}"/>"#
        );
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn front_panel(out: &mut String, panel: &Panel, front: &[(f64, f64)], current: Option<(f64, f64)>) {
    let xs: Vec<f64> = front.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = front.iter().map(|p| p.1).collect();
    let b = Bounds::of(&[(&xs, &ys)]);
    panel.frame(out, &b, "Pareto front", "phi1 (energy)");
    panel.polyline(out, &b, &xs, &ys, "#999");
    for p in front {
        panel.dot(out, &b, p.0, p.1, 2.0, COLORS[0]);
    }
    if let Some(c) = current {
        panel.dot(out, &b, c.0, c.1, 5.0, COLORS[1]);
    }
}

/// The front in the `(phi1, phi2)` plane.
pub fn front_svg(front: &ParetoFront) -> String {
    let pts: Vec<(f64, f64)> = front.points.iter().map(|p| (p.phi1, p.phi2)).collect();
    let mut body = String::new();
    let panel = Panel {
        x: 70.0,
        y: 40.0,
        w: 480.0,
        h: 380.0,
    };
    front_panel(&mut body, &panel, &pts, None);
    document(600.0, 480.0, &body)
}

/// Four panels: the front with the current point, `u`, the states and
/// `eta / alpha`.
pub fn frame_svg(frame: &FrameData) -> String {
    let mut body = String::new();
    let _ = writeln!(
        body,
        r#"<text x="500" y="20" font-size="15" text-anchor="middle">alpha = {}</text>"#,
        frame.alpha
    );
    let (w, h) = (380.0, 250.0);
    let cells = [(70.0, 60.0), (570.0, 60.0), (70.0, 380.0), (570.0, 380.0)];
    let panels: Vec<Panel> = cells.iter().map(|&(x, y)| Panel { x, y, w, h }).collect();

    front_panel(&mut body, &panels[0], &frame.front, Some(frame.current));

    let b = Bounds::of(&[(&frame.t, &frame.u)]);
    panels[1].frame(&mut body, &b, "control u", "t");
    panels[1].polyline(&mut body, &b, &frame.t, &frame.u, COLORS[0]);

    let b = Bounds::of(&[(&frame.t, &frame.x1), (&frame.t, &frame.x2)]);
    panels[2].frame(&mut body, &b, "states x1 (blue), x2 (red)", "t");
    panels[2].polyline(&mut body, &b, &frame.t, &frame.x1, COLORS[0]);
    panels[2].polyline(&mut body, &b, &frame.t, &frame.x2, COLORS[1]);

    let ones = vec![1.0; frame.t.len()];
    let minus: Vec<f64> = ones.iter().map(|v| -v).collect();
    let b = Bounds::of(&[
        (&frame.t, &ones),
        (&frame.t, &minus),
        (&frame.t, &frame.eta_over_alpha),
    ]);
    let title = if frame.eta_undefined {
        "eta / alpha (undefined, alpha = 0)"
    } else {
        "eta / alpha"
    };
    panels[3].frame(&mut body, &b, title, "t");
    panels[3].polyline(&mut body, &b, &frame.t, &ones, "#bbb");
    panels[3].polyline(&mut body, &b, &frame.t, &minus, "#bbb");
    panels[3].polyline(&mut body, &b, &frame.t, &frame.eta_over_alpha, COLORS[2]);

    document(1000.0, 700.0, &body)
}
