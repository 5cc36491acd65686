//! Static SVG rendering of a menu over a binary outcome space.
//!
//! The horizontal axis is the probability of the second outcome. Output is a
//! pure function of its inputs, so identical inputs give identical bytes.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{Menu, ProblemInstance};

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;

/// Points `(x, y)` of the lower convex hull of `points`, left to right.
pub fn lower_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-12);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Breakpoints of `max_k (a_k + b_k·x)` on `[0, 1]`.
fn upper_envelope(lines: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let eval = |x: f64| lines.iter().map(|(a, b)| a + b * x).fold(f64::NEG_INFINITY, f64::max);
    let mut xs = vec![0.0, 1.0];
    for (i, (a1, b1)) in lines.iter().enumerate() {
        for (a2, b2) in &lines[i + 1..] {
            if (b1 - b2).abs() > 1e-12 {
                let x = (a2 - a1) / (b1 - b2);
                if x > 0.0 && x < 1.0 {
                    xs.push(x);
                }
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    xs.into_iter().map(|x| (x, eval(x))).collect()
}

struct Frame {
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn sx(&self, x: f64) -> f64 {
        MARGIN + x * (WIDTH - 2.0 * MARGIN)
    }
    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

/// Renders pieces, their envelope, the cost curve (when any action costs
/// something or there are several actions) and markers at every belief.
pub fn render_svg(inst: &ProblemInstance, menu: &Menu) -> Result<String> {
    if inst.n_outcomes() != 2 || menu.dim() != 2 {
        return Err(Error::Precondition("plotting requires binary outcome".into()));
    }
    // line form: value at x is a + b·x
    let lines: Vec<(f64, f64)> = menu
        .pieces()
        .iter()
        .map(|h| {
            let a = h.at_corner(0);
            (a, h.at_corner(1) - a)
        })
        .collect();
    let envelope = upper_envelope(&lines);
    let eval_g = |x: f64| lines.iter().map(|(a, b)| a + b * x).fold(f64::NEG_INFINITY, f64::max);

    let show_costs = inst.n_actions() > 1 || inst.costs().iter().any(|c| *c != 0.0);
    let cost_points: Vec<(f64, f64)> =
        (0..inst.n_actions()).map(|a| (inst.marginal(a)[1], inst.costs()[a])).collect();
    let cost_curve = if show_costs { lower_hull(&cost_points) } else { Vec::new() };

    let mut ys: Vec<f64> = vec![0.0];
    ys.extend(lines.iter().flat_map(|(a, b)| [*a, a + b]));
    ys.extend(cost_points.iter().filter(|_| show_costs).map(|p| p.1));
    let y_lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let mut y_hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if y_hi - y_lo < 1e-9 {
        y_hi = y_lo + 1.0;
    }
    let frame = Frame { y_lo, y_hi: y_hi + 0.05 * (y_hi - y_lo) };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = WIDTH,
        h = HEIGHT
    );
    s.push_str(
        "<style>.axis{stroke:#000;stroke-width:1}.piece{stroke:#9ab;stroke-width:1}\
.envelope{fill:none;stroke:#1f4fbf;stroke-width:2}.cost{fill:none;stroke:#c33;stroke-width:1.5;stroke-dasharray:4 3}\
.conditional{fill:#1f4fbf}.marginal{fill:#c33}text{font:11px sans-serif}</style>\n",
    );
    let (x0, x1) = (frame.sx(0.0), frame.sx(1.0));
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
        num(x0),
        num(frame.sy(y_lo)),
        num(x1),
        num(frame.sy(y_lo))
    );
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
        num(x0),
        num(frame.sy(y_lo)),
        num(x0),
        num(frame.sy(frame.y_hi))
    );
    let labels = inst.outcomes().labels();
    let _ = writeln!(s, r#"<text x="{}" y="{}">P({})</text>"#, num(x1 - 30.0), num(HEIGHT - 10.0), labels[1]);
    let _ = writeln!(s, r#"<text x="{}" y="{}">0</text>"#, num(x0 - 3.0), num(HEIGHT - MARGIN + 14.0));
    let _ = writeln!(s, r#"<text x="{}" y="{}">1</text>"#, num(x1 - 3.0), num(HEIGHT - MARGIN + 14.0));
    let _ = writeln!(s, r#"<text x="4" y="{}">{}</text>"#, num(frame.sy(y_hi) + 4.0), num(y_hi));

    for (a, b) in &lines {
        let _ = writeln!(
            s,
            r#"<line class="piece" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
            num(x0),
            num(frame.sy(*a)),
            num(x1),
            num(frame.sy(a + b))
        );
    }
    let poly = |pts: &[(f64, f64)]| -> String {
        pts.iter().map(|(x, y)| format!("{},{}", num(frame.sx(*x)), num(frame.sy(*y)))).collect::<Vec<_>>().join(" ")
    };
    let _ = writeln!(s, r#"<polyline class="envelope" points="{}"/>"#, poly(&envelope));
    if !cost_curve.is_empty() {
        let _ = writeln!(s, r#"<polyline class="cost" points="{}"/>"#, poly(&cost_curve));
    }

    let mut seen: Vec<(String, String)> = Vec::new();
    let mut marker = |s: &mut String, class: &str, x: f64| {
        let key = (class.to_string(), num(x));
        if seen.contains(&key) {
            return;
        }
        seen.push(key);
        let _ = writeln!(
            s,
            r#"<circle class="{class}" cx="{}" cy="{}" r="3"/>"#,
            num(frame.sx(x)),
            num(frame.sy(eval_g(x)))
        );
    };
    for a in 0..inst.n_actions() {
        for sig in 0..inst.n_signals() {
            marker(&mut s, "conditional", inst.conditional(a, sig)[1]);
        }
    }
    for a in 0..inst.n_actions() {
        marker(&mut s, "marginal", inst.marginal(a)[1]);
    }
    s.push_str("</svg>\n");
    Ok(s)
}
