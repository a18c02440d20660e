//! SVG rendering of tilings with the affine-modified lozenges: flat path
//! steps are unit squares, rising steps are sheared parallelograms, and the
//! weighted (horizontal) lozenges span two columns around their slice line.

use boxedpp::oracle::Tiling;
use boxedpp::weights::HexagonDims;

const COLOR_FLAT: &str = "#4878cf";
const COLOR_RISE: &str = "#6acc65";
const COLOR_HORIZ: &str = "#d65f5f";

pub fn render_tiling(tiling: &Tiling, dims: &HexagonDims, scale: f64) -> String {
    let t_max = dims.t_max();
    let height = (dims.s() + dims.n()) as f64;
    let width = t_max as f64;
    let margin = 1.0;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" width=\"{}\" height=\"{}\">\n",
        width + 2.0 * margin,
        height + 2.0 * margin,
        (width + 2.0 * margin) * scale,
        (height + 2.0 * margin) * scale,
    ));
    let y = |v: f64| height + margin - v; // flip the vertical axis
    let poly = |out: &mut String, pts: &[(f64, f64)], fill: &str| {
        let coords: Vec<String> = pts
            .iter()
            .map(|&(a, b)| format!("{:.3},{:.3}", a + margin, y(b)))
            .collect();
        out.push_str(&format!(
            "<polygon points=\"{}\" fill=\"{}\" stroke=\"black\" stroke-width=\"0.02\"/>\n",
            coords.join(" "),
            fill
        ));
    };
    // path ribbons
    for t in 0..t_max {
        let cur = &tiling.slices[t as usize];
        let nxt = &tiling.slices[t as usize + 1];
        for i in 0..cur.len() {
            let (x, x1) = (cur[i] as f64, nxt[i] as f64);
            let t0 = t as f64;
            let pts = [
                (t0, x),
                (t0 + 1.0, x1),
                (t0 + 1.0, x1 + 1.0),
                (t0, x + 1.0),
            ];
            poly(
                &mut out,
                &pts,
                if nxt[i] == cur[i] { COLOR_FLAT } else { COLOR_RISE },
            );
        }
    }
    // horizontal lozenges at holes
    for (t, x) in tiling.holes_s(dims, dims.s()) {
        let (t0, x0) = (t as f64, x as f64);
        let pts = [
            (t0 - 1.0, x0),
            (t0, x0),
            (t0 + 1.0, x0 + 1.0),
            (t0, x0 + 1.0),
        ];
        poly(&mut out, &pts, COLOR_HORIZ);
    }
    out.push_str("</svg>\n");
    out
}

/// Hexagon outline with an overlaid boundary polyline (scaled coordinates).
pub fn render_boundary(
    sides: &[((f64, f64), (f64, f64)); 6],
    points: &[(f64, f64)],
    loops: &[usize],
    scale: f64,
) -> String {
    let height = sides.iter().map(|s| s.0 .1.max(s.1 .1)).fold(0.0f64, f64::max);
    let width = sides.iter().map(|s| s.0 .0.max(s.1 .0)).fold(0.0f64, f64::max);
    let margin = 0.1 * width.max(height);
    let y = |v: f64| height + margin - v;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" width=\"{}\" height=\"{}\">\n",
        width + 2.0 * margin,
        height + 2.0 * margin,
        (width + 2.0 * margin) * scale,
        (height + 2.0 * margin) * scale,
    ));
    for s in sides {
        out.push_str(&format!(
            "<line x1=\"{:.4}\" y1=\"{:.4}\" x2=\"{:.4}\" y2=\"{:.4}\" stroke=\"black\" stroke-width=\"0.01\"/>\n",
            s.0 .0 + margin,
            y(s.0 .1),
            s.1 .0 + margin,
            y(s.1 .1)
        ));
    }
    for w in loops.windows(2) {
        let coords: Vec<String> = points[w[0]..w[1]]
            .iter()
            .map(|&(a, b)| format!("{:.4},{:.4}", a + margin, y(b)))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#d65f5f\" stroke-width=\"0.015\"/>\n",
            coords.join(" ")
        ));
    }
    out.push_str("</svg>\n");
    out
}
