//! Elliptic lozenge and cube weights, the explicit inverse Kasteleyn matrix
//! W on parallelograms, the trapezoid weight-sum formulas, and the elliptic
//! MacMahon identity with its zeta-degeneration.
//!
//! Triangles are labeled (i, j) with j stored doubled (j2 = 2j); valid
//! labels satisfy i + j2 even. White (i, j2) is adjacent to black (i, j2)
//! (horizontal lozenge, carrying the weight) and to blacks (i+1, j2 -+ 1)
//! (weight 1).

use crate::error::{Error, Result};
use crate::numerics::{theta_p, EllipticNome};
use std::collections::HashMap;

/// Parameter pack u1 u2 u3 = 1 with the gauge C(i) = 1.
#[derive(Debug, Clone, Copy)]
pub struct EllipticCtx {
    pub p: EllipticNome,
    pub q: f64,
    pub u1: f64,
    pub u2: f64,
}

impl EllipticCtx {
    pub fn new(p: f64, q: f64, u1: f64, u2: f64) -> Result<Self> {
        let p = EllipticNome::new(p)?;
        if q == 0.0 || u1 == 0.0 || u2 == 0.0 {
            return Err(Error::DegenerateParameters("q, u1, u2 must be nonzero".into()));
        }
        Ok(EllipticCtx { p, q, u1, u2 })
    }

    pub fn u3(&self) -> f64 {
        1.0 / (self.u1 * self.u2)
    }

    fn th(&self, x: f64) -> Result<f64> {
        theta_p(x, self.p)
    }

    /// theta_p(x; q)_k
    fn thpoch(&self, x: f64, k: i64) -> Result<f64> {
        let mut prod = 1.0;
        let mut arg = x;
        for _ in 0..k {
            prod *= self.th(arg)?;
            arg *= self.q;
        }
        Ok(prod)
    }

    fn qi(&self, e: i64) -> f64 {
        self.q.powi(e as i32)
    }
}

/// Horizontal-lozenge weight w(i, j) with C(i) = 1 (doubled j).
pub fn elliptic_lozenge_weight(ctx: &EllipticCtx, i: i64, j2: i64) -> Result<f64> {
    if (i + j2) % 2 != 0 {
        return Err(Error::Structural(format!("label ({i}, {j2}/2) off the triangle lattice")));
    }
    let num = ctx.th(ctx.qi(j2 - 1) * ctx.u1 * ctx.u2)?;
    let a = (j2 - 3 * i) / 2;
    let b = (j2 + 3 * i) / 2;
    let den = ctx.th(ctx.qi(a - 1) * ctx.u1)?
        * ctx.th(ctx.qi(a) * ctx.u1)?
        * ctx.th(ctx.qi(b - 1) * ctx.u2)?
        * ctx.th(ctx.qi(b) * ctx.u2)?;
    if den == 0.0 {
        return Err(Error::DegenerateParameters(format!("theta pole at (i, j2) = ({i}, {j2})")));
    }
    let pref = (ctx.u1 * ctx.u2).abs().sqrt() * ctx.q.powf((j2 - 1) as f64 / 2.0);
    Ok(pref * num / den)
}

/// Weight of the unit cube with corner (x, y, z) (the ratio of the two
/// tilings of a unit hexagon).
pub fn cube_weight(ctx: &EllipticCtx, x: i64, y: i64, z: i64) -> Result<f64> {
    let u3 = ctx.u3();
    let num = ctx.th(ctx.qi(y + z - 2 * x - 1) * ctx.u1)?
        * ctx.th(ctx.qi(x + z - 2 * y - 1) * ctx.u2)?
        * ctx.th(ctx.qi(x + y - 2 * z - 1) * u3)?;
    let den = ctx.th(ctx.qi(y + z - 2 * x + 1) * ctx.u1)?
        * ctx.th(ctx.qi(x + z - 2 * y + 1) * ctx.u2)?
        * ctx.th(ctx.qi(x + y - 2 * z + 1) * u3)?;
    if den == 0.0 {
        return Err(Error::DegenerateParameters("theta pole in cube weight".into()));
    }
    Ok(ctx.q.powi(3) * num / den)
}

/// Closed-form inverse-transpose Kasteleyn entry W((i0, j0), (i1, j1)) on
/// any enclosing parallelogram (the value is parallelogram-independent).
/// First label white, second black, j's doubled.
pub fn kasteleyn_inverse_w(
    ctx: &EllipticCtx,
    white: (i64, i64),
    black: (i64, i64),
) -> Result<f64> {
    let (i0, j02) = white;
    let (i1, j12) = black;
    if (i0 + j02) % 2 != 0 || (i1 + j12) % 2 != 0 {
        return Err(Error::Structural("label off the triangle lattice".into()));
    }
    if i0 >= i1 {
        return Ok(0.0);
    }
    // d = j0 + i0/2 - j1 - i1/2
    let d = (j02 + i0 - j12 - i1) / 2;
    if d < 0 {
        return Ok(0.0);
    }
    let l = i1 - i0 - 1;
    let sign_exp = (j02 - j12 + i1 - i0) / 2 - 1;
    let sign = if sign_exp % 2 == 0 { 1.0 } else { -1.0 };
    let uu = ctx.u1 * ctx.u2;
    let pref = uu.powf(l as f64 / 2.0)
        * ctx.q.powf(l as f64 * (i1 - i0 + 2 * j12 - 2) as f64 / 4.0);
    let num = ctx.thpoch(ctx.qi(d + 1), l)?
        * ctx.thpoch(ctx.qi((j02 + i0) / 2 + (j12 - i1) / 2) * uu, l)?;
    let den = ctx.thpoch(ctx.q, l)?
        * ctx.thpoch(ctx.qi((j02 - i0) / 2 - i1) * ctx.u1, l)?
        * ctx.thpoch(ctx.qi((j12 - 3 * i1) / 2 + 1) * ctx.u1, l)?
        * ctx.thpoch(ctx.qi((j12 + i1) / 2 + i0) * ctx.u2, l)?
        * ctx.thpoch(ctx.qi((j02 + 3 * i0) / 2 + 1) * ctx.u2, l)?;
    if den == 0.0 {
        return Err(Error::DegenerateParameters("theta degeneracy in W".into()));
    }
    Ok(sign * pref * num / den)
}

/// Max residual of the three-term inverse identity
/// W(a, (i1,j1)) w(i1,j1) + W(a, (i1+1, j1-1/2)) + W(a, (i1+1, j1+1/2))
/// = delta_{a, (i1,j1)} over a block of labels.
pub fn w_inverse_identity_residual(ctx: &EllipticCtx, span: i64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i0 in 0..span {
        for j02h in -span..=span {
            let j02 = 2 * j02h + (i0 % 2);
            if (i0 + j02) % 2 != 0 {
                continue;
            }
            for i1 in 0..span {
                for j12h in -span..=span {
                    let j12 = 2 * j12h + (i1 % 2);
                    if (i1 + j12) % 2 != 0 {
                        continue;
                    }
                    let a = (i0, j02);
                    let t1 = kasteleyn_inverse_w(ctx, a, (i1, j12))?
                        * elliptic_lozenge_weight(ctx, i1, j12)?;
                    let t2 = kasteleyn_inverse_w(ctx, a, (i1 + 1, j12 - 1))?;
                    let t3 = kasteleyn_inverse_w(ctx, a, (i1 + 1, j12 + 1))?;
                    let expect = if a == (i1, j12) { 1.0 } else { 0.0 };
                    let scale = t1.abs().max(t2.abs()).max(t3.abs()).max(1.0);
                    worst = worst.max((t1 + t2 + t3 - expect).abs() / scale);
                }
            }
        }
    }
    Ok(worst)
}

/// Parallelogram x0 <= i <= x1, y0 <= j + i/2 <= y1 (y-bounds on (j2+i)/2).
#[derive(Debug, Clone, Copy)]
pub struct Parallelogram {
    pub x0: i64,
    pub x1: i64,
    pub y0: i64,
    pub y1: i64,
}

impl Parallelogram {
    /// White (right-pointing) triangles occupy columns x0..x1; the matching
    /// black (left-pointing) triangles occupy columns x0+1..x1+1 with the
    /// same diagonal levels. With this split the restriction of the weight
    /// matrix to the parallelogram is square and exactly invertible.
    pub fn white_labels(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for i in self.x0..=self.x1 {
            for h in self.y0..=self.y1 {
                out.push((i, 2 * h - i));
            }
        }
        out
    }

    pub fn black_labels(&self) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for i in self.x0 + 1..=self.x1 + 1 {
            for h in self.y0..=self.y1 {
                out.push((i, 2 * h - i));
            }
        }
        out
    }

    pub fn contains_white(&self, label: (i64, i64)) -> bool {
        let (i, j2) = label;
        i >= self.x0 && i <= self.x1 && (j2 + i) >= 2 * self.y0 && (j2 + i) <= 2 * self.y1
    }

    pub fn contains_black(&self, label: (i64, i64)) -> bool {
        let (i, j2) = label;
        i >= self.x0 + 1 && i <= self.x1 + 1 && (j2 + i) >= 2 * self.y0 && (j2 + i) <= 2 * self.y1
    }
}

/// Kasteleyn matrix of the parallelogram (rows: whites, cols: blacks), used
/// to check W against a numerical inverse.
pub fn parallelogram_kasteleyn(
    ctx: &EllipticCtx,
    pg: &Parallelogram,
) -> Result<(Vec<(i64, i64)>, Vec<(i64, i64)>, Vec<Vec<f64>>)> {
    let whites = pg.white_labels();
    let blacks = pg.black_labels();
    let idx: HashMap<(i64, i64), usize> =
        blacks.iter().enumerate().map(|(k, &l)| (l, k)).collect();
    let n = whites.len();
    let mut m = vec![vec![0.0; n]; n];
    for (r, &(i, j2)) in whites.iter().enumerate() {
        if let Some(&c) = idx.get(&(i, j2)) {
            m[r][c] = elliptic_lozenge_weight(ctx, i, j2)?;
        }
        for dj in [-1i64, 1] {
            if let Some(&c) = idx.get(&(i + 1, j2 + dj)) {
                m[r][c] = 1.0;
            }
        }
    }
    Ok((whites, blacks, m))
}

/// Sum of matching weights of the parallelogram with the given white and
/// black triangles removed (brute-force dimer enumeration).
pub fn matching_weight_sum(
    ctx: &EllipticCtx,
    pg: &Parallelogram,
    removed_whites: &[(i64, i64)],
    removed_blacks: &[(i64, i64)],
) -> Result<f64> {
    for w in removed_whites {
        if !pg.contains_white(*w) {
            return Err(Error::Structural(format!("removed white {w:?} outside parallelogram")));
        }
    }
    for b in removed_blacks {
        if !pg.contains_black(*b) {
            return Err(Error::Structural(format!("removed black {b:?} outside parallelogram")));
        }
    }
    let mut whites: Vec<(i64, i64)> = pg
        .white_labels()
        .into_iter()
        .filter(|l| !removed_whites.contains(l))
        .collect();
    // deterministic order: sweep left to right, bottom to top
    whites.sort();
    let blacks: Vec<(i64, i64)> = pg
        .black_labels()
        .into_iter()
        .filter(|l| !removed_blacks.contains(l))
        .collect();
    let black_idx: HashMap<(i64, i64), usize> =
        blacks.iter().enumerate().map(|(k, &l)| (l, k)).collect();
    let mut used = vec![false; blacks.len()];
    let mut total = 0.0;
    fn rec(
        ctx: &EllipticCtx,
        whites: &[(i64, i64)],
        k: usize,
        black_idx: &HashMap<(i64, i64), usize>,
        used: &mut Vec<bool>,
        weight: f64,
        total: &mut f64,
    ) -> Result<()> {
        if k == whites.len() {
            *total += weight;
            return Ok(());
        }
        let (i, j2) = whites[k];
        // horizontal dimer
        if let Some(&c) = black_idx.get(&(i, j2)) {
            if !used[c] {
                used[c] = true;
                let w = elliptic_lozenge_weight(ctx, i, j2)?;
                rec(ctx, whites, k + 1, black_idx, used, weight * w, total)?;
                used[c] = false;
            }
        }
        for dj in [-1i64, 1] {
            if let Some(&c) = black_idx.get(&(i + 1, j2 + dj)) {
                if !used[c] {
                    used[c] = true;
                    rec(ctx, whites, k + 1, black_idx, used, weight, total)?;
                    used[c] = false;
                }
            }
        }
        Ok(())
    }
    rec(ctx, &whites, 0, &black_idx, &mut used, 1.0, &mut total)?;
    Ok(total)
}

/// Which trapezoid a weight-sum formula describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrapezoidSide {
    Left,
    Right,
}

/// Geometry of the trapezoid lemmas: anchored at (i0, j0), depth I to the
/// cut line; the right form also carries the hexagon sides (a, b, c).
#[derive(Debug, Clone, Copy)]
pub struct TrapezoidGeometry {
    pub i0: i64,
    /// doubled j0
    pub j02: i64,
    pub depth: i64,
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

/// Closed-form total weight of trapezoid tilings with holes {x_k} on the cut
/// line, up to a hole-independent constant.
pub fn trapezoid_weight_sum(
    ctx: &EllipticCtx,
    side: TrapezoidSide,
    geom: &TrapezoidGeometry,
    holes: &[i64],
) -> Result<f64> {
    let c = holes.len() as i64;
    let uu = ctx.u1 * ctx.u2;
    let i0 = geom.i0;
    let j02 = geom.j02;
    let big_i = geom.depth;
    // univariate factor
    let mut out = 1.0;
    match side {
        TrapezoidSide::Left => {
            for &x in holes {
                let sign = if x % 2 == 0 { 1.0 } else { -1.0 };
                let num = ctx.thpoch(ctx.qi(big_i + 1), x)?
                    * ctx.thpoch(ctx.qi(big_i - (j02 - 3 * i0) / 2) / ctx.u1, x)?
                    * ctx.thpoch(ctx.qi(-big_i + 2 - (j02 + 3 * i0) / 2) / ctx.u2, x)?
                    * ctx.thpoch(ctx.qi(big_i + 1 - j02) / uu, x)?;
                let den = ctx.thpoch(ctx.q, x)?
                    * ctx.thpoch(ctx.qi(2 * big_i - (j02 - 3 * i0) / 2) / ctx.u1, x)?
                    * ctx.thpoch(ctx.qi(2 - (j02 + 3 * i0) / 2) / ctx.u2, x)?
                    * ctx.thpoch(ctx.qi(1 - j02) / uu, x)?;
                if den == 0.0 {
                    return Err(Error::DegenerateParameters("theta degeneracy in trapezoid sum".into()));
                }
                out *= sign * num / den;
            }
            // cross terms
            for (k, &xk) in holes.iter().enumerate() {
                for &xl in &holes[k + 1..] {
                    out *= ctx.qi(-xk)
                        * ctx.th(ctx.qi(xk - xl))?
                        * ctx.th(ctx.qi(xk + xl + big_i - j02 + 1) / uu)?;
                }
            }
            for &x in holes {
                let den = ctx.thpoch(ctx.qi(1 - big_i + (j02 - 3 * i0) / 2 - x) * ctx.u1, c - 1)?
                    * ctx.thpoch(ctx.qi(x - (j02 + 3 * i0) / 2 + 2) / ctx.u2, c - 1)?;
                if den == 0.0 {
                    return Err(Error::DegenerateParameters("theta degeneracy in trapezoid sum".into()));
                }
                out /= den;
            }
        }
        TrapezoidSide::Right => {
            let (a, b, cc) = (geom.a, geom.b, geom.c);
            for &x in holes {
                let sign = if x % 2 == 0 { 1.0 } else { -1.0 };
                let num = ctx.thpoch(ctx.qi(1 - b - cc), x)?
                    * ctx.thpoch(ctx.qi(2 * big_i - (j02 - 3 * i0) / 2 + 2) / ctx.u1, x)?
                    * ctx.thpoch(ctx.qi(-a + cc - (j02 + 3 * i0) / 2) / ctx.u2, x)?
                    * ctx.thpoch(ctx.qi(-j02 + a + b + 1) / uu, x)?;
                let den = ctx.thpoch(ctx.qi(big_i - a - b + 1), x)?
                    * ctx.thpoch(ctx.qi(big_i + 2 - (j02 - 3 * i0) / 2 + a - cc) / ctx.u1, x)?
                    * ctx.thpoch(ctx.qi(-big_i - (j02 + 3 * i0) / 2) / ctx.u2, x)?
                    * ctx.thpoch(ctx.qi(big_i - j02 + b + cc + 1) / uu, x)?;
                if den == 0.0 {
                    return Err(Error::DegenerateParameters("theta degeneracy in trapezoid sum".into()));
                }
                out *= sign * num / den;
            }
            for (k, &xk) in holes.iter().enumerate() {
                for &xl in &holes[k + 1..] {
                    out *= ctx.qi(-xk)
                        * ctx.th(ctx.qi(xk - xl))?
                        * ctx.th(ctx.qi(xk + xl + big_i - j02 + 1) / uu)?;
                }
            }
            for &x in holes {
                let den = ctx
                    .thpoch(ctx.qi(x + big_i - (j02 - 3 * i0) / 2 + 2 + a - cc) / ctx.u1, c - 1)?
                    * ctx.thpoch(ctx.qi((j02 + 3 * i0) / 2 + a + 1 - cc - x) * ctx.u2, c - 1)?;
                if den == 0.0 {
                    return Err(Error::DegenerateParameters("theta degeneracy in trapezoid sum".into()));
                }
                out /= den;
            }
        }
    }
    Ok(out)
}

/// Determinant route for the left trapezoid: det[W((i0-k, j0-k/2+1),
/// (i0+I, j0-I/2-x_l))], an independent evaluation of the same weight sum.
pub fn trapezoid_det_left(ctx: &EllipticCtx, geom: &TrapezoidGeometry, holes: &[i64]) -> Result<f64> {
    let c = holes.len();
    let m = crate::linalg::Matrix::<f64>::from_fn(c, |k, l| {
        let k = k as i64 + 1;
        kasteleyn_inverse_w(
            ctx,
            (geom.i0 - k, geom.j02 - k + 2),
            (geom.i0 + geom.depth, geom.j02 - geom.depth - 2 * holes[l]),
        )
        .unwrap_or(f64::NAN)
    });
    if m.data.iter().any(|v| v.is_nan()) {
        return Err(Error::DegenerateParameters("W entry failed in trapezoid determinant".into()));
    }
    Ok(m.det())
}

/// A plane partition in the a x b x c box: weakly decreasing heights.
#[derive(Debug, Clone)]
pub struct PlanePartition {
    pub a: usize,
    pub b: usize,
    pub heights: Vec<Vec<i64>>,
}

impl PlanePartition {
    pub fn volume(&self) -> i64 {
        self.heights.iter().flatten().sum()
    }
}

/// Visit all plane partitions in the a x b x c box.
pub fn for_each_plane_partition(a: usize, b: usize, c: i64, f: &mut impl FnMut(&PlanePartition)) {
    let mut heights = vec![vec![0i64; b]; a];
    fn rec(
        a: usize,
        b: usize,
        c: i64,
        pos: usize,
        heights: &mut Vec<Vec<i64>>,
        f: &mut impl FnMut(&PlanePartition),
    ) {
        if pos == a * b {
            f(&PlanePartition { a, b, heights: heights.clone() });
            return;
        }
        let (i, j) = (pos / b, pos % b);
        let cap_up = if i > 0 { heights[i - 1][j] } else { c };
        let cap_left = if j > 0 { heights[i][j - 1] } else { c };
        for h in 0..=cap_up.min(cap_left) {
            heights[i][j] = h;
            rec(a, b, c, pos + 1, heights, f);
        }
        heights[i][j] = 0;
    }
    rec(a, b, c, 0, &mut heights, f);
}

/// Elliptic MacMahon identity: returns (lhs, rhs, relative error).
pub fn macmahon_check(ctx: &EllipticCtx, a: usize, b: usize, c: i64) -> Result<(f64, f64, f64)> {
    let mut lhs = 0.0;
    let mut err: Option<Error> = None;
    for_each_plane_partition(a, b, c, &mut |pp| {
        if err.is_some() {
            return;
        }
        let mut term = 1.0;
        for (i, row) in pp.heights.iter().enumerate() {
            for (j, &h) in row.iter().enumerate() {
                for k in 1..=h {
                    match cube_weight(ctx, i as i64 + 1, j as i64 + 1, k) {
                        Ok(w) => term *= w,
                        Err(e) => {
                            err = Some(e);
                            return;
                        }
                    }
                }
            }
        }
        lhs += term;
    });
    if let Some(e) = err {
        return Err(e);
    }
    let u3 = ctx.u3();
    let mut rhs = ctx.q.powi((a as i32) * (b as i32) * (c as i32));
    for i in 1..=a as i64 {
        for j in 1..=b as i64 {
            for k in 1..=c {
                let num = ctx.th(ctx.qi(i + j + k - 1))?
                    * ctx.th(ctx.qi(j + k - i - 1) * ctx.u1)?
                    * ctx.th(ctx.qi(i + k - j - 1) * ctx.u2)?
                    * ctx.th(ctx.qi(i + j - k - 1) * u3)?;
                let den = ctx.th(ctx.qi(i + j + k - 2))?
                    * ctx.th(ctx.qi(j + k - i) * ctx.u1)?
                    * ctx.th(ctx.qi(i + k - j) * ctx.u2)?
                    * ctx.th(ctx.qi(i + j - k) * u3)?;
                if den == 0.0 {
                    return Err(Error::DegenerateParameters("theta pole in MacMahon product".into()));
                }
                rhs *= num / den;
            }
        }
    }
    let rel = (lhs - rhs).abs() / rhs.abs().max(1e-300);
    Ok((lhs, rhs, rel))
}

/// zeta-degeneration of the elliptic MacMahon identity:
/// sum_Pi q^{|Pi|} prod_{ij} (zeta^2 - q^{i+j-2 Pi_ij - 2})
///                          / (zeta^2 - q^{i+j-c-2})
///   = prod_{ij} (1 - q^{i+j+c-1}) / (1 - q^{i+j-1}).
pub fn macmahon_zeta_check(q: f64, zeta: f64, a: usize, b: usize, c: i64) -> Result<(f64, f64, f64)> {
    let z2 = zeta * zeta;
    let qi = |e: i64| q.powi(e as i32);
    let mut lhs = 0.0;
    for_each_plane_partition(a, b, c, &mut |pp| {
        let mut term = qi(pp.volume());
        for (i, row) in pp.heights.iter().enumerate() {
            for (j, &h) in row.iter().enumerate() {
                let (i, j) = (i as i64 + 1, j as i64 + 1);
                term *= (z2 - qi(i + j - 2 * h - 2)) / (z2 - qi(i + j - c - 2));
            }
        }
        lhs += term;
    });
    let mut rhs = 1.0;
    for i in 1..=a as i64 {
        for j in 1..=b as i64 {
            rhs *= (1.0 - qi(i + j + c - 1)) / (1.0 - qi(i + j - 1));
        }
    }
    let rel = (lhs - rhs).abs() / rhs.abs().max(1e-300);
    Ok((lhs, rhs, rel))
}

/// Plain-text identity report row.
pub fn report_row(identity: &str, params: &str, lhs: f64, rhs: f64, rel: f64) -> String {
    format!("{identity:<22} {params:<40} lhs={lhs:.10e} rhs={rhs:.10e} rel_err={rel:.3e}\n")
}
