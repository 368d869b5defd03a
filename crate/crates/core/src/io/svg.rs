use std::fmt::Write;

use crate::hopf::Characteristic;

const COLORS: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

/// One `<polyline>` per leaf with class `family-i`, drawn in `(x, t)` or,
/// with `mapped`, in `(x̃, t̃)`. Time points up.
pub fn web_svg(curves: &[Characteristic], mapped: bool, width: f64, height: f64) -> String {
    let pts = |c: &Characteristic| -> Vec<[f64; 2]> {
        if mapped {
            c.mapped.clone().unwrap_or_default()
        } else {
            c.points.clone()
        }
    };
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for c in curves {
        for p in pts(c) {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
    }
    let margin = 20.0;
    let span = |d: usize| if hi[d] > lo[d] { hi[d] - lo[d] } else { 1.0 };
    let sx = (width - 2.0 * margin) / span(0);
    let sy = (height - 2.0 * margin) / span(1);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    out.push_str("<style>\npolyline { fill: none; stroke-width: 1.2; }\n");
    let families = curves.iter().map(|c| c.family).max().unwrap_or(0);
    for f in 1..=families {
        let _ = writeln!(
            out,
            ".family-{f} {{ stroke: {}; }}",
            COLORS[(f - 1) % COLORS.len()]
        );
    }
    out.push_str("</style>\n");
    let _ = writeln!(
        out,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    for c in curves {
        let p = pts(c);
        if p.len() < 2 {
            continue;
        }
        let coords: Vec<String> = p
            .iter()
            .map(|q| {
                let x = margin + (q[0] - lo[0]) * sx;
                let y = height - margin - (q[1] - lo[1]) * sy;
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="family-{}" points="{}"/>"#,
            c.family,
            coords.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}
