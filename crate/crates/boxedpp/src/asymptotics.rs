//! Bulk-limit formulas: the quadratic first-integral polynomial Q(u, v), the
//! local complex slope z, lozenge proportions, the density angle phi with
//! the arc-kernel prefactor c, the limit kernel, and the frozen-boundary
//! tracer.
//!
//! All quantities live in scaled coordinates (capital-letter sides divided
//! by the mesh): the box is described by positive reals (N, T, S) and the
//! weight by q-scale parameters. The trigonometric family enters through
//! de-phased real factors, exactly as at finite size.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Scaled weight family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaledWeight {
    /// q-Racah / q-Hahn scale: base q-scale and kappa^2 (0 for q-Hahn;
    /// a Racah-type configuration uses kappa_sq = q^{2K}).
    Real { q: f64, kappa_sq: f64 },
    /// Trigonometric scale: q = e^{i alpha}, kappa = e^{i beta} with alpha,
    /// beta the scaled angles.
    Trig { alpha: f64, beta: f64 },
}

/// Scaled hexagon with its weight scale.
#[derive(Debug, Clone, Copy)]
pub struct ScaledGeometry {
    pub n: f64,
    pub t: f64,
    pub s: f64,
    pub weight: ScaledWeight,
}

impl ScaledGeometry {
    pub fn new(n: f64, t: f64, s: f64, weight: ScaledWeight) -> Result<Self> {
        if !(n > 0.0 && t > 0.0 && s > 0.0 && s < t) {
            return Err(Error::Structural(format!(
                "scaled geometry requires N > 0 and 0 < S < T (got N={n}, T={t}, S={s})"
            )));
        }
        if let ScaledWeight::Real { q, .. } = weight {
            if q <= 0.0 || q == 1.0 {
                return Err(Error::InadmissibleParameters("scaled q must be positive, != 1".into()));
            }
        }
        Ok(ScaledGeometry { n, t, s, weight })
    }

    /// 1 - q^m (de-phased).
    fn omq(&self, m: f64) -> f64 {
        match self.weight {
            ScaledWeight::Real { q, .. } => 1.0 - q.powf(m),
            ScaledWeight::Trig { alpha, .. } => -2.0 * (alpha * m / 2.0).sin(),
        }
    }

    /// 1 - kappa^2 q^m (de-phased).
    fn omk(&self, m: f64) -> f64 {
        match self.weight {
            ScaledWeight::Real { q, kappa_sq } => 1.0 - kappa_sq * q.powf(m),
            ScaledWeight::Trig { alpha, beta } => -2.0 * (beta + alpha * m / 2.0).sin(),
        }
    }

    /// q^m (de-phased; 1 in the trigonometric family).
    fn qpow(&self, m: f64) -> f64 {
        match self.weight {
            ScaledWeight::Real { q, .. } => q.powf(m),
            ScaledWeight::Trig { .. } => 1.0,
        }
    }

    /// Interior test for the scaled hexagon (open region).
    pub fn contains(&self, tt: f64, xx: f64) -> bool {
        self.interior_margin(tt, xx) > 0.0
    }

    /// Distance to the closest hexagon side (negative outside), measured in
    /// the coordinate max-norm.
    pub fn interior_margin(&self, tt: f64, xx: f64) -> f64 {
        let lo = 0f64.max(tt + self.s - self.t);
        let hi = (tt + self.n).min(self.s + self.n);
        let mt = tt.min(self.t - tt);
        let mx = (xx - lo).min(hi - xx);
        mt.min(mx)
    }

    /// The six sides of the scaled hexagon as segments ((t1,x1), (t2,x2)).
    pub fn sides(&self) -> [((f64, f64), (f64, f64)); 6] {
        let (n, t, s) = (self.n, self.t, self.s);
        [
            ((0.0, 0.0), (0.0, n)),                     // left
            ((0.0, n), (s, s + n)),                     // top-left
            ((s, s + n), (t, s + n)),                   // top-right
            ((t, s + n), (t, s)),                       // right
            ((t - s, 0.0), (t, s)),                     // bottom-right
            ((0.0, 0.0), (t - s, 0.0)),                 // bottom-left
        ]
    }
}

/// Degree-2 polynomial Q(u, v) of the first integrals (real scale only).
#[derive(Debug, Clone, Copy)]
pub struct QPoly {
    pub c_uu: f64,
    pub c_vv: f64,
    pub c_uv: f64,
    pub c_u: f64,
    pub c_v: f64,
    pub c_1: f64,
}

/// Construct Q(u, v) for the real-scale families.
pub fn q_polynomial(geom: &ScaledGeometry) -> Result<QPoly> {
    let (q, k2) = match geom.weight {
        ScaledWeight::Real { q, kappa_sq } => (q, kappa_sq),
        ScaledWeight::Trig { .. } => {
            return Err(Error::Domain(
                "Q(u, v) with real coefficients requires the real-scale family".into(),
            ))
        }
    };
    let (n, t, s) = (geom.n, geom.t, geom.s);
    let qp = |e: f64| q.powf(e);
    Ok(QPoly {
        c_uu: 1.0,
        c_vv: qp(t - s - n)
            + k2 * (1.0 + qp(-s + n + t) + qp(-2.0 * s + t) + qp(-s - n) - qp(-s) - qp(-s + t))
            + k2 * k2 * qp(-s + n),
        c_uv: qp(t - s) + qp(-n) + k2 * (qp(n) + qp(-s)),
        c_v: -(qp(t) + qp(t - s - n) + k2 * (1.0 + qp(n - s + t))),
        c_u: -(1.0 + qp(t)),
        c_1: qp(t),
    })
}

/// Local slope data at a scaled point.
#[derive(Debug, Clone, Copy)]
pub struct LocalSlope {
    pub t: f64,
    pub x: f64,
    /// None when frozen (the z-roots are real).
    pub z: Option<Complex64>,
    pub phi: f64,
    pub c: f64,
    pub a_prod: f64,
    pub b_prod: f64,
}

impl LocalSlope {
    pub fn is_liquid(&self) -> bool {
        self.z.is_some()
    }
}

/// Solve Q(u(z), v(z)) = 0 for the upper-half-plane root (real families).
pub fn local_z(geom: &ScaledGeometry, tt: f64, xx: f64) -> Result<Option<Complex64>> {
    if !geom.contains(tt, xx) {
        return Err(Error::Structural(format!("({tt}, {xx}) outside the scaled hexagon")));
    }
    let (q, k2) = match geom.weight {
        ScaledWeight::Real { q, kappa_sq } => (q, kappa_sq),
        ScaledWeight::Trig { .. } => {
            // reconstruct from the arccos form, which is phase-free
            let slope = phi_and_c(geom, tt, xx)?;
            return Ok(slope.z);
        }
    };
    let poly = q_polynomial(geom)?;
    // u = (u1 z + u0)/(d1 z + d0), v = (v1 z + v0)/(d1 z + d0)
    let u1 = q.powf(tt);
    let u0 = -k2 * q.powf(-geom.s + 2.0 * xx);
    let v1 = -q.powf(xx);
    let v0 = q.powf(xx);
    let d1 = -k2 * q.powf(-geom.s + 2.0 * xx - tt);
    let d0 = 1.0;
    // expand Q(u, v) (d1 z + d0)^2 into A2 z^2 + A1 z + A0
    let quad = |p1: f64, p0: f64, r1: f64, r0: f64| (p1 * r1, p1 * r0 + p0 * r1, p0 * r0);
    let mut a2 = 0.0;
    let mut a1 = 0.0;
    let mut a0 = 0.0;
    for (coef, (w2, w1, w0)) in [
        (poly.c_uu, quad(u1, u0, u1, u0)),
        (poly.c_vv, quad(v1, v0, v1, v0)),
        (poly.c_uv, quad(u1, u0, v1, v0)),
        (poly.c_u, quad(u1, u0, d1, d0)),
        (poly.c_v, quad(v1, v0, d1, d0)),
        (poly.c_1, quad(d1, d0, d1, d0)),
    ] {
        a2 += coef * w2;
        a1 += coef * w1;
        a0 += coef * w0;
    }
    if a2.abs() < 1e-30 * (a1.abs() + a0.abs()).max(1.0) {
        return Err(Error::BoundaryOfValidity(format!(
            "degenerate quadratic at ({tt}, {xx})"
        )));
    }
    let disc = a1 * a1 - 4.0 * a2 * a0;
    if disc >= 0.0 {
        return Ok(None); // real roots: frozen
    }
    let im = (-disc).sqrt() / (2.0 * a2);
    let re = -a1 / (2.0 * a2);
    let z = Complex64::new(re, im.abs());
    Ok(Some(z))
}

/// The arccos argument pieces A, B and the E-sum of the bulk theorem at a
/// scaled point (all de-phased real).
fn arc_pieces(geom: &ScaledGeometry, tt: f64, xx: f64) -> (f64, f64, f64) {
    let (n, t, s) = (geom.n, geom.t, geom.s);
    let a = geom.omq(xx - s - n)
        * geom.omk(xx - t)
        * geom.omq(xx - tt - n)
        * geom.omk(xx - tt - s);
    let b = geom.qpow(-2.0 * n - t)
        * geom.omq(xx)
        * geom.omk(xx - tt + n)
        * geom.omq(xx - tt - s + t)
        * geom.omk(xx - s + n);
    let e0 = geom.qpow(-n) * geom.omq(n) * geom.omq(-t - n) * geom.omk(-tt - s + 2.0 * xx).powi(2);
    (a, b, e0)
}

/// Density angle phi (clamped to {0, pi} outside [-1, 1]), the kernel
/// prefactor c, and the two products A, B.
pub fn phi_and_c(geom: &ScaledGeometry, tt: f64, xx: f64) -> Result<LocalSlope> {
    if !geom.contains(tt, xx) {
        return Err(Error::Structural(format!("({tt}, {xx}) outside the scaled hexagon")));
    }
    let (n, t, s) = (geom.n, geom.t, geom.s);
    let (a, b, e0) = arc_pieces(geom, tt, xx);
    let ab = a * b;
    let c2 = geom.qpow(t - 2.0 * tt)
        * geom.omq(xx - s - n)
        * geom.omq(xx)
        * geom.omk(xx + n - s)
        * geom.omk(xx - t)
        / (geom.omq(xx + t - tt - s) * geom.omq(xx - tt - n) * geom.omk(xx + n - tt) * geom.omk(xx - tt - s));
    let c = c2.abs().sqrt();
    let phi = if ab <= 0.0 {
        // clamp by the sign of the arccos numerator
        let num = e0 + a + b;
        if num >= 0.0 {
            0.0
        } else {
            std::f64::consts::PI
        }
    } else {
        let arg = (e0 + a + b) / (2.0 * ab.sqrt());
        arg.clamp(-1.0, 1.0).acos()
    };
    let liquid = ab > 0.0 && {
        let arg = (e0 + a + b) / (2.0 * ab.sqrt());
        arg > -1.0 && arg < 1.0
    };
    let z = if liquid {
        // z = -c e^{-i phi} lands in the upper half-plane with the sign
        // conventions of the de-phased products
        Some(-Complex64::from_polar(c, -phi))
    } else {
        None
    };
    let _ = (n,);
    Ok(LocalSlope { t: tt, x: xx, z, phi, c, a_prod: a, b_prod: b })
}

/// Angles of the triangle (0, 1, z) divided by pi: the lozenge proportions.
/// z in the closed upper half-plane; degenerate z returns the frozen triple
/// with a single 1.
pub fn slope_from_z(z: Complex64) -> (f64, f64, f64) {
    use std::f64::consts::PI;
    if z.im <= 0.0 {
        // frozen: one proportion is 1
        let x = z.re;
        if x < 0.0 {
            return (0.0, 1.0, 0.0);
        } else if x > 1.0 {
            return (1.0, 0.0, 0.0);
        }
        return (0.0, 0.0, 1.0);
    }
    let p1 = z.arg() / PI;
    let p2 = (1.0 - z).conj().arg().abs() / PI;
    let p3 = 1.0 - p1 - p2;
    (p1, p2, p3)
}

/// Limit kernel of the bulk theorem:
/// K(dx, dt) = (1/2 pi i) * integral over the unit-circle arc from
/// e^{-i phi} to e^{i phi} of (1 + c w)^{dt} w^{dx - 1} dw,
/// right arc for dt <= 0, left arc for dt > 0.
pub fn bulk_kernel(dx: i64, dt: i64, slope: &LocalSlope) -> Complex64 {
    use std::f64::consts::PI;
    let phi = slope.phi;
    let c = slope.c;
    if dt == 0 {
        let v = if dx == 0 { phi / PI } else { (phi * dx as f64).sin() / (PI * dx as f64) };
        return Complex64::new(v, 0.0);
    }
    // parametrize w = e^{i theta}; right arc theta in [-phi, phi],
    // left arc theta in [phi, 2 pi - phi]
    let (th0, th1) = if dt <= 0 { (-phi, phi) } else { (phi, 2.0 * PI - phi) };
    let f = |theta: f64| -> Complex64 {
        let w = Complex64::from_polar(1.0, theta);
        let base = Complex64::new(1.0, 0.0) + c * w;
        let pw = if dt >= 0 {
            base.powi(dt as i32)
        } else {
            base.powi(dt as i32)
        };
        pw * Complex64::from_polar(1.0, theta * dx as f64)
    };
    // composite Simpson with panel count scaled by |dt| and the arc length
    let arc = th1 - th0;
    let mut npanels =
        (512.0_f64).max(32.0 * (dt.abs() as f64 + dx.unsigned_abs() as f64 + 1.0) * (arc + 1.0)) as usize;
    if npanels % 2 == 1 {
        npanels += 1;
    }
    let h = arc / npanels as f64;
    let mut acc = f(th0) + f(th1);
    for k in 1..npanels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(th0 + k as f64 * h);
    }
    acc * h / 3.0 / (2.0 * PI)
}

/// One traced boundary with diagnostics.
#[derive(Debug, Clone)]
pub struct FrozenBoundary {
    /// Ordered points of the traced curve(s) as (t, x) pairs, loops
    /// concatenated.
    pub points: Vec<(f64, f64)>,
    /// Loop boundaries: points[loops[i]..loops[i+1]] is one closed polyline.
    pub loops: Vec<usize>,
    /// Detected self-intersections (nodes).
    pub nodes: Vec<(f64, f64)>,
    /// Min distance from the curve to each hexagon side.
    pub tangency: [f64; 6],
}

/// The discriminant-sign function whose zero set is the frozen boundary:
/// G = 4 A B - (E0 + A + B)^2, positive in the liquid region.
pub fn liquid_indicator(geom: &ScaledGeometry, tt: f64, xx: f64) -> f64 {
    let (a, b, e0) = arc_pieces(geom, tt, xx);
    4.0 * a * b - (e0 + a + b) * (e0 + a + b)
}

/// Trace the frozen boundary on a grid of the given resolution using
/// marching squares with bisection polish along crossing edges.
pub fn frozen_boundary(geom: &ScaledGeometry, resolution: usize) -> Result<FrozenBoundary> {
    if resolution < 8 {
        return Err(Error::Structural("resolution must be at least 8".into()));
    }
    let nx = resolution;
    let g = |tt: f64, xx: f64| liquid_indicator(geom, tt, xx);
    let t_span = geom.t;
    let x_span = geom.s + geom.n;
    let ht = t_span / nx as f64;
    let hx = x_span / nx as f64;
    // collect crossing segments per cell
    let mut segments: Vec<((f64, f64), (f64, f64))> = Vec::new();
    let mut saddle_cells: Vec<(f64, f64)> = Vec::new();
    let val = |i: usize, j: usize| -> f64 {
        let tt = i as f64 * ht;
        let xx = j as f64 * hx;
        if geom.contains(tt, xx) { g(tt, xx) } else { -1.0 }
    };
    let cross = |p0: (f64, f64), v0: f64, p1: (f64, f64), v1: f64| -> (f64, f64) {
        // bisection polish on the segment
        let (mut a, mut fa, mut b) = (p0, v0, p1);
        let mut fb = v1;
        for _ in 0..60 {
            let m = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
            let fm = if geom.contains(m.0, m.1) { g(m.0, m.1) } else { -1.0 };
            if (fm > 0.0) == (fa > 0.0) {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
        }
        let _ = fb;
        ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0)
    };
    for i in 0..nx {
        for j in 0..nx {
            let p = [
                (i, j),
                (i + 1, j),
                (i + 1, j + 1),
                (i, j + 1),
            ];
            let vals = [val(p[0].0, p[0].1), val(p[1].0, p[1].1), val(p[2].0, p[2].1), val(p[3].0, p[3].1)];
            let pts: Vec<(f64, f64)> = (0..4)
                .filter_map(|k| {
                    let (v0, v1) = (vals[k], vals[(k + 1) % 4]);
                    if (v0 > 0.0) != (v1 > 0.0) {
                        let q0 = (p[k].0 as f64 * ht, p[k].1 as f64 * hx);
                        let q1 = (p[(k + 1) % 4].0 as f64 * ht, p[(k + 1) % 4].1 as f64 * hx);
                        Some(cross(q0, v0, q1, v1))
                    } else {
                        None
                    }
                })
                .collect();
            if pts.len() == 2 {
                segments.push((pts[0], pts[1]));
            } else if pts.len() == 4 {
                // ambiguous saddle cell: two branches pass through one cell.
                // At the tracer's resolution this is exactly where the curve
                // self-intersects; record the cell center as a node
                // candidate and split the branches by the center sign.
                let ctr = ((i as f64 + 0.5) * ht, (j as f64 + 0.5) * hx);
                saddle_cells.push(ctr);
                let vc = if geom.contains(ctr.0, ctr.1) { g(ctr.0, ctr.1) } else { -1.0 };
                if vc > 0.0 {
                    segments.push((pts[0], pts[1]));
                    segments.push((pts[2], pts[3]));
                } else {
                    segments.push((pts[1], pts[2]));
                    segments.push((pts[3], pts[0]));
                }
            }
        }
    }
    if segments.is_empty() {
        return Err(Error::TracerFailed { message: "no boundary crossings found".into(), partial: vec![] });
    }
    // chain segments into loops
    let tol = (ht + hx) * 1e-6;
    let mut unused: Vec<((f64, f64), (f64, f64))> = segments.clone();
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut loops: Vec<usize> = vec![0];
    while let Some(seed) = unused.pop() {
        let mut path = vec![seed.0, seed.1];
        loop {
            let tail = *path.last().unwrap();
            let mut found = None;
            for (idx, seg) in unused.iter().enumerate() {
                if dist(seg.0, tail) < tol {
                    found = Some((idx, seg.1));
                    break;
                }
                if dist(seg.1, tail) < tol {
                    found = Some((idx, seg.0));
                    break;
                }
            }
            match found {
                Some((idx, next)) => {
                    unused.swap_remove(idx);
                    path.push(next);
                    if dist(next, path[0]) < tol {
                        break;
                    }
                }
                None => {
                    if dist(tail, path[0]) > 10.0 * (ht + hx) {
                        return Err(Error::TracerFailed {
                            message: "boundary curve did not close".into(),
                            partial: path,
                        });
                    }
                    break;
                }
            }
        }
        points.extend_from_slice(&path);
        loops.push(points.len());
    }
    // tangency residuals
    let sides = geom.sides();
    let mut tangency = [f64::INFINITY; 6];
    for &pt in &points {
        for (k, side) in sides.iter().enumerate() {
            tangency[k] = tangency[k].min(point_segment_distance(pt, side.0, side.1));
        }
    }
    // node detection, clustered: saddle cells (two branches through one
    // cell), explicit segment crossings, and pinches at hexagon vertices
    // (the curve of a smooth tangent-to-the-sides boundary stays a positive
    // distance from every vertex; passing through one is a node).
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    let merge_radius = 6.0 * (ht + hx);
    for &ctr in &saddle_cells {
        if !nodes.iter().any(|&n| dist(n, ctr) < merge_radius) {
            nodes.push(ctr);
        }
    }
    for i in 0..segments.len() {
        for j in i + 1..segments.len() {
            let (a, b) = segments[i];
            let (c, d) = segments[j];
            if dist(a, c) < tol || dist(a, d) < tol || dist(b, c) < tol || dist(b, d) < tol {
                continue;
            }
            if let Some(p) = segment_intersection(a, b, c, d) {
                if !nodes.iter().any(|&n| dist(n, p) < merge_radius) {
                    nodes.push(p);
                }
            }
        }
    }
    let vertices = [
        (0.0, 0.0),
        (0.0, geom.n),
        (geom.s, geom.s + geom.n),
        (geom.t, geom.s + geom.n),
        (geom.t, geom.s),
        (geom.t - geom.s, 0.0),
    ];
    // a pinch at a vertex: the liquid region reaches arbitrarily close to
    // it, while a smooth tangent-to-the-sides boundary keeps a fixed
    // clearance from every vertex. Resolution-independent probe on a small
    // arc around each vertex.
    let r0 = 0.004 * t_span.max(x_span);
    for &v in &vertices {
        let pinch = (0..720).any(|k| {
            let th = std::f64::consts::PI * 2.0 * k as f64 / 720.0;
            let p = (v.0 + r0 * th.cos(), v.1 + r0 * th.sin());
            geom.contains(p.0, p.1) && g(p.0, p.1) > 0.0
        });
        if pinch && !nodes.iter().any(|&n| dist(n, v) < merge_radius) {
            nodes.push(v);
        }
    }
    Ok(FrozenBoundary { points, loops, nodes, tangency })
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2
    };
    let t = t.clamp(0.0, 1.0);
    dist(p, (a.0 + t * vx, a.1 + t * vy))
}

fn segment_intersection(
    a: (f64, f64),
    b: (f64, f64),
    c: (f64, f64),
    d: (f64, f64),
) -> Option<(f64, f64)> {
    let r = (b.0 - a.0, b.1 - a.1);
    let s = (d.0 - c.0, d.1 - c.1);
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom.abs() < 1e-18 {
        return None;
    }
    let t = ((c.0 - a.0) * s.1 - (c.1 - a.1) * s.0) / denom;
    let u = ((c.0 - a.0) * r.1 - (c.1 - a.1) * r.0) / denom;
    if t > 1e-9 && t < 1.0 - 1e-9 && u > 1e-9 && u < 1.0 - 1e-9 {
        Some((a.0 + t * r.0, a.1 + t * r.1))
    } else {
        None
    }
}

/// CSV of the boundary polyline: rows "t,x".
pub fn boundary_csv(boundary: &FrozenBoundary) -> String {
    let mut out = String::from("t,x\n");
    for w in boundary.loops.windows(2) {
        for &(t, x) in &boundary.points[w[0]..w[1]] {
            out.push_str(&format!("{t:.9},{x:.9}\n"));
        }
        out.push('\n');
    }
    out
}

/// CSV density map: rows (t, x, p1, p2, p3, phi) over an interior grid.
pub fn density_csv(geom: &ScaledGeometry, grid: usize) -> Result<String> {
    let mut out = String::from("t,x,p1,p2,p3,phi\n");
    for i in 1..grid {
        for j in 1..grid {
            let tt = geom.t * i as f64 / grid as f64;
            let xx = (geom.s + geom.n) * j as f64 / grid as f64;
            if !geom.contains(tt, xx) {
                continue;
            }
            let slope = phi_and_c(geom, tt, xx)?;
            let (p1, p2, p3) = match slope.z {
                Some(z) => slope_from_z(z),
                None => slope_from_z(Complex64::new(if slope.phi == 0.0 { 2.0 } else { 0.5 }, 0.0)),
            };
            out.push_str(&format!(
                "{tt:.6},{xx:.6},{p1:.9},{p2:.9},{p3:.9},{:.9}\n",
                slope.phi
            ));
        }
    }
    Ok(out)
}
