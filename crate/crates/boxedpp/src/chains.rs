//! One-dimensional slice distributions, the four size/time-changing
//! stochastic matrix families, their two-diagonal determinantal form, and the
//! commutation identities.

use crate::error::{Error, Result};
use crate::numerics::{normalize_log_weights, LogSigned};
use crate::oracle::{slice_configs, Slice};
use crate::weights::{HexagonDims, WeightParams};

/// mu_{t,S}(x), the family's quadratic lattice variable.
pub fn mu(params: &WeightParams, t: i64, s: i64, x: i64) -> Result<f64> {
    Ok(params.scalars()?.mu(t, s, x))
}

/// Slice weight w_{t,S}(x) of the one-dimensional distribution, as a signed
/// log-domain value. For admissible parameters the sign is uniform over the
/// slice; [`slice_weights`] strips it.
pub fn slice_weight_w(t: i64, x: i64, dims: &HexagonDims, params: &WeightParams) -> Result<LogSigned> {
    slice_weight_w_s(t, x, dims, dims.s(), params)
}

pub fn slice_weight_w_s(
    t: i64,
    x: i64,
    dims: &HexagonDims,
    s: i64,
    params: &WeightParams,
) -> Result<LogSigned> {
    let sc = params.scalars()?;
    let n = dims.n();
    let t_max = dims.t_max();
    let (lo, hi) = dims.section_s(s, t);
    if x < lo || x > hi {
        return Err(Error::Structural(format!("x = {x} outside section [{lo}, {hi}]")));
    }
    let sign = if (t + s) % 2 == 0 { LogSigned::one() } else { LogSigned::one().neg() };
    let mut w = sign * sc.qpow_half_ls(2 * x * (2 * n + t_max - 1)) * sc.omk_ls(2 * x - t - s + 1);
    for i in 1..=x {
        w = w / sc.omq_ls(i);
    }
    for i in 1..=(t_max - s - t + x) {
        w = w / sc.omq_ls(i);
    }
    for i in 1..=(t + n - x - 1) {
        w = w / sc.omq_ls(-i);
    }
    for i in 1..=(s + n - x - 1) {
        w = w / sc.omq_ls(-i);
    }
    for i in 0..(t_max + n - t) {
        let f = sc.omk_ls(x - t_max + 1 + i);
        if f.is_zero() {
            return Err(Error::DegenerateParameters("Pochhammer factor vanishes in w".into()));
        }
        w = w / f;
    }
    for i in 0..(n + t) {
        let f = sc.omk_ls(x - t - s + 1 + i);
        if f.is_zero() {
            return Err(Error::DegenerateParameters("Pochhammer factor vanishes in w".into()));
        }
        w = w / f;
    }
    Ok(w)
}

/// Slice weights over the whole section, normalized to the positive
/// representative (uniform sign asserted).
pub fn slice_weights(t: i64, dims: &HexagonDims, s: i64, params: &WeightParams) -> Result<Vec<f64>> {
    let (lo, hi) = dims.section_s(s, t);
    let ws: Result<Vec<LogSigned>> =
        (lo..=hi).map(|x| slice_weight_w_s(t, x, dims, s, params)).collect();
    let ws = ws?;
    let sign = ws.iter().find(|w| w.sign != 0).map(|w| w.sign).unwrap_or(1);
    let mut out = Vec::with_capacity(ws.len());
    for w in &ws {
        if w.sign != 0 && w.sign != sign {
            return Err(Error::InadmissibleParameters(
                "slice weight changes sign across the section".into(),
            ));
        }
        out.push(w.abs().value());
    }
    Ok(out)
}

/// Positive slice weights in log-domain (no exponentiation), same sign
/// normalization as [`slice_weights`].
pub fn slice_weights_ls(
    t: i64,
    dims: &HexagonDims,
    s: i64,
    params: &WeightParams,
) -> Result<Vec<LogSigned>> {
    let (lo, hi) = dims.section_s(s, t);
    let ws: Result<Vec<LogSigned>> =
        (lo..=hi).map(|x| slice_weight_w_s(t, x, dims, s, params)).collect();
    let ws = ws?;
    let sign = ws.iter().find(|w| w.sign != 0).map(|w| w.sign).unwrap_or(1);
    if ws.iter().any(|w| w.sign != 0 && w.sign != sign) {
        return Err(Error::InadmissibleParameters(
            "slice weight changes sign across the section".into(),
        ));
    }
    Ok(ws.iter().map(|w| w.abs()).collect())
}

/// One-dimensional law of X(t): probabilities proportional to
/// prod_{i<j} (mu(x_i) - mu(x_j))^2 prod_i w_{t,S}(x_i).
#[derive(Debug, Clone)]
pub struct SliceMeasure {
    pub t: i64,
    pub configs: Vec<Slice>,
    pub probs: Vec<f64>,
}

impl SliceMeasure {
    pub fn prob_of(&self, config: &Slice) -> f64 {
        self.configs
            .iter()
            .position(|c| c == config)
            .map(|i| self.probs[i])
            .unwrap_or(0.0)
    }
}

pub fn slice_measure(dims: &HexagonDims, params: &WeightParams, t: i64) -> Result<SliceMeasure> {
    slice_measure_s(dims, params, dims.s(), t)
}

pub fn slice_measure_s(
    dims: &HexagonDims,
    params: &WeightParams,
    s: i64,
    t: i64,
) -> Result<SliceMeasure> {
    let sc = params.scalars()?;
    let configs = slice_configs(dims, s, t);
    let (lo, _) = dims.section_s(s, t);
    let wls = slice_weights_ls(t, dims, s, params)?;
    let mut weights = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let mut w = LogSigned::one();
        for (i, &xi) in cfg.iter().enumerate() {
            for &xj in &cfg[i + 1..] {
                let d = sc.mu(t, s, xi as i64) - sc.mu(t, s, xj as i64);
                w *= LogSigned::from_f64(d * d);
            }
            w *= wls[(xi as i64 - lo) as usize];
        }
        weights.push(w);
    }
    let probs = normalize_log_weights(&weights)?;
    Ok(SliceMeasure { t, configs, probs })
}

/// The four stochastic matrix families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    /// t -> t + 1 (offsets 0/+1)
    TPlus,
    /// t -> t - 1 (offsets -1/0)
    TMinus,
    /// S -> S + 1 (offsets 0/+1)
    SPlus,
    /// S -> S - 1 (offsets -1/0)
    SMinus,
}

impl TransitionKind {
    pub fn is_up(self) -> bool {
        matches!(self, TransitionKind::TPlus | TransitionKind::SPlus)
    }
}

/// w1/w0 factors of the four families ("move" and "stay" weights).
/// De-phased per family; an x-independent constant is immaterial because all
/// rows are normalized by explicit summation.
pub(crate) fn stay_move_weights(
    kind: TransitionKind,
    x: i64,
    t: i64,
    s: i64,
    dims: &HexagonDims,
    params: &WeightParams,
) -> Result<(f64, f64)> {
    let sc = params.scalars()?;
    let n = dims.n();
    let t_max = dims.t_max();
    let denom = sc.omk(2 * x - t - s + 1);
    if denom == 0.0 {
        return Err(Error::DegenerateParameters(format!(
            "vanishing denominator 1 - k^2 q^(2x-t-S+1) at x = {x}"
        )));
    }
    let (w_stay, w_move) = match kind {
        TransitionKind::TPlus => (
            -sc.omq(x + t_max - t - s) * sc.omk(x + n - t) / denom,
            sc.qpow_half(2 * (t_max + n - 1 - t)) * sc.omq(x - s - n + 1) * sc.omk(x - t_max + 1)
                / denom,
        ),
        TransitionKind::SPlus => (
            -sc.omq(x + t_max - t - s) * sc.omk(x + n - s) / denom,
            sc.qpow_half(2 * (t_max + n - 1 - s)) * sc.omq(x - t - n + 1) * sc.omk(x - t_max + 1)
                / denom,
        ),
        TransitionKind::TMinus => (
            -sc.omq(x - t - n + 1) * sc.omk(x - s - t + 1) / denom,
            sc.qpow_half(-2 * (t + n - 1)) * sc.omq(x) * sc.omk(x + n - s) / denom,
        ),
        TransitionKind::SMinus => (
            -sc.omq(x - s - n + 1) * sc.omk(x - s - t + 1) / denom,
            sc.qpow_half(-2 * (s + n - 1)) * sc.omq(x) * sc.omk(x + n - t) / denom,
        ),
    };
    Ok((w_stay, w_move))
}

/// Entry of the two-diagonal matrix U for the given family; nonzero only for
/// y = x (stay) and y = x +- 1 (move, sign per family).
pub fn u_entry(
    kind: TransitionKind,
    x: i64,
    y: i64,
    t: i64,
    s: i64,
    dims: &HexagonDims,
    params: &WeightParams,
) -> Result<f64> {
    let (w_stay, w_move) = stay_move_weights(kind, x, t, s, dims, params)?;
    // paper sign convention: the t+/S+ matrices carry an extra global minus
    // relative to the stay/move weights, the t-/S- matrices do not
    let flip = if kind.is_up() { -1.0 } else { 1.0 };
    let move_to = if kind.is_up() { x + 1 } else { x - 1 };
    Ok(if y == x {
        flip * w_stay
    } else if y == move_to {
        flip * w_move
    } else {
        0.0
    })
}

/// Target (t, S) indices of a transition applied at (t, S).
pub fn target_ts(kind: TransitionKind, t: i64, s: i64) -> (i64, i64) {
    match kind {
        TransitionKind::TPlus => (t + 1, s),
        TransitionKind::TMinus => (t - 1, s),
        TransitionKind::SPlus => (t, s + 1),
        TransitionKind::SMinus => (t, s - 1),
    }
}

/// A normalized transition row: all reachable targets with probabilities.
#[derive(Debug, Clone)]
pub struct TransitionRow {
    pub source: Slice,
    pub kind: TransitionKind,
    pub targets: Vec<(Slice, f64)>,
}

/// Enumerate admissible targets by block structure: offsets are forced
/// outside blocks of consecutive entries and a block of size l splits in
/// l + 1 nondecreasing offset patterns.
fn enumerate_targets(
    x: &Slice,
    up: bool,
    lo: i64,
    hi: i64,
) -> Vec<Slice> {
    // blocks of consecutive values
    let n = x.len();
    let mut blocks: Vec<(usize, usize)> = Vec::new(); // (start, len)
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[j] == x[j - 1] + 1 {
            j += 1;
        }
        blocks.push((i, j - i));
        i = j;
    }
    let mut out: Vec<Slice> = vec![Vec::with_capacity(n)];
    for &(start, len) in &blocks {
        let mut next: Vec<Slice> = Vec::new();
        for prefix in &out {
            // split point k: first k entries take the low option, rest high
            for k in 0..=len {
                let mut cand = prefix.clone();
                let mut ok = true;
                for idx in 0..len {
                    let low = if up { 0 } else { -1 };
                    let off = if idx < k { low } else { low + 1 };
                    let y = x[start + idx] as i64 + off;
                    if y < lo || y > hi {
                        ok = false;
                        break;
                    }
                    if let Some(&prev) = cand.last() {
                        if y <= prev as i64 {
                            ok = false;
                            break;
                        }
                    }
                    cand.push(y as i32);
                }
                if ok {
                    next.push(cand);
                }
            }
        }
        out = next;
    }
    out
}

/// Build the normalized transition row from configuration X at (t, dims.S).
pub fn transition_row(
    kind: TransitionKind,
    x: &Slice,
    t: i64,
    dims: &HexagonDims,
    params: &WeightParams,
) -> Result<TransitionRow> {
    transition_row_s(kind, x, t, dims.s(), dims, params)
}

pub fn transition_row_s(
    kind: TransitionKind,
    x: &Slice,
    t: i64,
    s: i64,
    dims: &HexagonDims,
    params: &WeightParams,
) -> Result<TransitionRow> {
    let (tt, ts) = target_ts(kind, t, s);
    if tt < 0 || tt > dims.t_max() || ts < 0 || ts > dims.t_max() {
        return Err(Error::Structural(format!("target slice (t={tt}, S={ts}) out of range")));
    }
    let sc = params.scalars()?;
    let (lo, hi) = dims.section_s(ts, tt);
    let targets = enumerate_targets(x, kind.is_up(), lo, hi);
    if targets.is_empty() {
        return Err(Error::Structural("no admissible target configuration".into()));
    }
    let n = x.len();
    let mut weights: Vec<LogSigned> = Vec::with_capacity(targets.len());
    for y in &targets {
        let mut w = LogSigned::one();
        // product of stay/move weights
        for i in 0..n {
            let (w_stay, w_move) = stay_move_weights(kind, x[i] as i64, t, s, dims, params)?;
            let moved = y[i] != x[i];
            w *= LogSigned::from_f64(if moved { w_move } else { w_stay });
        }
        // Vandermonde ratio in mu at the target slice (source Vandermonde is
        // row-constant and cancels in the normalization)
        for i in 0..n {
            for j in i + 1..n {
                let d = sc.mu(tt, ts, y[i] as i64) - sc.mu(tt, ts, y[j] as i64);
                w *= LogSigned::from_f64(d);
            }
        }
        weights.push(w);
    }
    let probs = normalize_log_weights(&weights)?;
    let targets = targets.into_iter().zip(probs).collect();
    Ok(TransitionRow { source: x.clone(), kind, targets })
}

/// Dense U matrix over the section ranges (rows: section at (t,S), columns:
/// section at the target).
pub fn u_matrix(
    kind: TransitionKind,
    t: i64,
    s: i64,
    dims: &HexagonDims,
    params: &WeightParams,
) -> Result<(Vec<Vec<f64>>, (i64, i64), (i64, i64))> {
    let rows = dims.section_s(s, t);
    let (tt, ts) = target_ts(kind, t, s);
    let cols = dims.section_s(ts, tt);
    let mut m = vec![vec![0.0; (cols.1 - cols.0 + 1) as usize]; (rows.1 - rows.0 + 1) as usize];
    for x in rows.0..=rows.1 {
        for y in cols.0..=cols.1 {
            m[(x - rows.0) as usize][(y - cols.0) as usize] =
                u_entry(kind, x, y, t, s, dims, params)?;
        }
    }
    Ok((m, rows, cols))
}

fn matmul_ranged(
    a: &(Vec<Vec<f64>>, (i64, i64), (i64, i64)),
    b: &(Vec<Vec<f64>>, (i64, i64), (i64, i64)),
) -> (Vec<Vec<f64>>, (i64, i64), (i64, i64)) {
    let (am, ar, ac) = a;
    let (bm, br, bc) = b;
    let lo = ac.0.max(br.0);
    let hi = ac.1.min(br.1);
    let mut out = vec![vec![0.0; (bc.1 - bc.0 + 1) as usize]; (ar.1 - ar.0 + 1) as usize];
    for i in 0..out.len() {
        for k in lo..=hi {
            let av = am[i][(k - ac.0) as usize];
            if av == 0.0 {
                continue;
            }
            let bk = &bm[(k - br.0) as usize];
            for j in 0..bk.len() {
                out[i][j] += av * bk[j];
            }
        }
    }
    (out, *ar, *bc)
}

/// Max relative residual of the four U-matrix commutation identities at
/// (t, S), together with the tridiagonal closed form of the t+/S- product.
pub fn commutation_check(dims: &HexagonDims, params: &WeightParams, t: i64, s: i64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    fn check(
        lhs: &(Vec<Vec<f64>>, (i64, i64), (i64, i64)),
        rhs: &(Vec<Vec<f64>>, (i64, i64), (i64, i64)),
    ) -> f64 {
        let scale = lhs
            .0
            .iter()
            .flatten()
            .chain(rhs.0.iter().flatten())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        assert_eq!(lhs.1, rhs.1);
        assert_eq!(lhs.2, rhs.2);
        let mut out: f64 = 0.0;
        for (ra, rb) in lhs.0.iter().zip(rhs.0.iter()) {
            for (va, vb) in ra.iter().zip(rb.iter()) {
                out = out.max((va - vb).abs() / scale);
            }
        }
        out
    }

    use TransitionKind::*;
    // U^{S,t}_{t+} U^{S,t+1}_{S-} = U^{S,t}_{S-} U^{S-1,t}_{t+}
    if s >= 1 && t + 1 <= dims.t_max() {
        let lhs = matmul_ranged(&u_matrix(TPlus, t, s, dims, params)?, &u_matrix(SMinus, t + 1, s, dims, params)?);
        let rhs = matmul_ranged(&u_matrix(SMinus, t, s, dims, params)?, &u_matrix(TPlus, t, s - 1, dims, params)?);
        worst = worst.max(check(&lhs, &rhs));

        // tridiagonal closed form of the product
        let sc = params.scalars()?;
        let n = dims.n();
        let t_max = dims.t_max();
        let (m, rows, cols) = lhs;
        for x in rows.0..=rows.1 {
            let dd = |m2: i64| sc.omk(m2);
            let u1 = sc.qpow_half(2 * (t_max + n - 1 - t))
                * sc.omq(x - s - n + 1)
                * sc.omq(x - s - n + 2)
                * sc.omk(x - s - t + 1)
                * sc.omk(x - t_max + 1)
                / (dd(2 * x - t - s + 2) * dd(2 * x - t - s + 1));
            let u0 = -sc.omq(x - s - n + 1) * sc.omk(x + n - t) / dd(2 * x - t - s + 1)
                * (sc.qpow_half(2 * (t_max - s - t)) * sc.omq(x + 1) * sc.omk(x - t_max + 1)
                    / dd(2 * x - t - s + 2)
                    + sc.omq(x + t_max - t - s) * sc.omk(x - s - t) / dd(2 * x - t - s));
            let um1 = sc.qpow_half(-2 * (s + n - 1))
                * sc.omq(x + t_max - t - s)
                * sc.omq(x)
                * sc.omk(x + n - t)
                * sc.omk(x + n - t - 1)
                / (dd(2 * x - t - s + 1) * dd(2 * x - t - s));
            let scale = u1.abs().max(u0.abs()).max(um1.abs()).max(1.0);
            for (y, expect) in [(x + 1, u1), (x, u0), (x - 1, um1)] {
                if y < cols.0 || y > cols.1 {
                    continue;
                }
                let got = m[(x - rows.0) as usize][(y - cols.0) as usize];
                worst = worst.max((got - expect).abs() / scale);
            }
        }
    }
    // U^{S,t}_{t-} U^{S,t-1}_{S-} = U^{S,t}_{S-} U^{S-1,t}_{t-}
    if s >= 1 && t >= 1 {
        let lhs = matmul_ranged(&u_matrix(TMinus, t, s, dims, params)?, &u_matrix(SMinus, t - 1, s, dims, params)?);
        let rhs = matmul_ranged(&u_matrix(SMinus, t, s, dims, params)?, &u_matrix(TMinus, t, s - 1, dims, params)?);
        worst = worst.max(check(&lhs, &rhs));
    }
    // U^{S,t}_{t+} U^{S,t+1}_{S+} = U^{S,t}_{S+} U^{S+1,t}_{t+}
    if s + 1 <= dims.t_max() && t + 1 <= dims.t_max() {
        let lhs = matmul_ranged(&u_matrix(TPlus, t, s, dims, params)?, &u_matrix(SPlus, t + 1, s, dims, params)?);
        let rhs = matmul_ranged(&u_matrix(SPlus, t, s, dims, params)?, &u_matrix(TPlus, t, s + 1, dims, params)?);
        worst = worst.max(check(&lhs, &rhs));
    }
    // U^{S,t}_{t-} U^{S,t-1}_{S+} = U^{S,t}_{S+} U^{S+1,t}_{t-}
    if s + 1 <= dims.t_max() && t >= 1 {
        let lhs = matmul_ranged(&u_matrix(TMinus, t, s, dims, params)?, &u_matrix(SPlus, t - 1, s, dims, params)?);
        let rhs = matmul_ranged(&u_matrix(SPlus, t, s, dims, params)?, &u_matrix(TMinus, t, s + 1, dims, params)?);
        worst = worst.max(check(&lhs, &rhs));
    }
    Ok(worst)
}

/// Max entrywise deviation of P-level commutation
/// P_{t+} P_{S-} = P_{S-} P_{t+} on the full configuration spaces.
pub fn p_commutation_check(dims: &HexagonDims, params: &WeightParams, t: i64, s: i64) -> Result<f64> {
    use TransitionKind::*;
    let mut worst: f64 = 0.0;
    let combos: [(TransitionKind, TransitionKind); 4] =
        [(TPlus, SMinus), (TMinus, SMinus), (TPlus, SPlus), (TMinus, SPlus)];
    for (kt, ks) in combos {
        let (t1, _) = target_ts(kt, t, s);
        let (_, s1) = target_ts(ks, t, s);
        if t1 < 0 || t1 > dims.t_max() || s1 < 0 || s1 > dims.t_max() {
            continue;
        }
        let sources = slice_configs(dims, s, t);
        for x in &sources {
            // path 1: kt at (t, s), then ks at (t1, s)
            let mut acc1: std::collections::HashMap<Slice, f64> = std::collections::HashMap::new();
            for (z, p1) in transition_row_s(kt, x, t, s, dims, params)?.targets {
                for (y, p2) in transition_row_s(ks, &z, t1, s, dims, params)?.targets {
                    *acc1.entry(y).or_insert(0.0) += p1 * p2;
                }
            }
            // path 2: ks at (t, s), then kt at (t, s1)
            let mut acc2: std::collections::HashMap<Slice, f64> = std::collections::HashMap::new();
            for (z, p1) in transition_row_s(ks, x, t, s, dims, params)?.targets {
                for (y, p2) in transition_row_s(kt, &z, t, s1, dims, params)?.targets {
                    *acc2.entry(y).or_insert(0.0) += p1 * p2;
                }
            }
            for key in acc1.keys().chain(acc2.keys()) {
                let a = acc1.get(key).copied().unwrap_or(0.0);
                let b = acc2.get(key).copied().unwrap_or(0.0);
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::ExactDistribution;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn families_for(dims: &HexagonDims, rng: &mut ChaCha8Rng) -> Vec<WeightParams> {
        let q: f64 = rng.gen_range(0.5..0.95);
        let n = dims.n() as f64;
        let t = dims.t_max() as f64;
        vec![
            WeightParams::Hahn,
            WeightParams::QHahn { q },
            WeightParams::QRacah { q, kappa_sq: -rng.gen_range(0.3..2.0) },
            WeightParams::QRacah { q, kappa_sq: q.powf(t - 1.0) * rng.gen_range(0.2..0.8) },
            WeightParams::Racah { k: (t - 1.0) / 2.0 + rng.gen_range(0.5..2.0) },
            WeightParams::QRacahTrig {
                alpha: 0.9 * std::f64::consts::PI / (t - 1.0 + 2.0 * n),
                beta: 0.55 * std::f64::consts::PI * (t - 1.0) / (t - 1.0 + 2.0 * n)
                    + rng.gen_range(0.0..0.05),
            },
        ]
    }

    #[test]
    fn mu_basics() {
        let p = WeightParams::QRacah { q: 0.5, kappa_sq: -1.0 };
        assert!((mu(&p, 0, 0, 0).unwrap() - 0.5).abs() < 1e-15);
        // kappa^2 = 0 reduces to q^{-x}
        let p0 = WeightParams::QHahn { q: 0.5 };
        assert!((mu(&p0, 3, 1, 2).unwrap() - 4.0).abs() < 1e-12);
        // monotone in x for kappa^2 < 0, q < 1
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let q: f64 = rng.gen_range(0.2..0.95);
            let k2: f64 = -rng.gen_range(0.1..3.0);
            let p = WeightParams::QRacah { q, kappa_sq: k2 };
            let (t, s) = (rng.gen_range(0..5), rng.gen_range(0..5));
            let mut prev = f64::NEG_INFINITY;
            for x in 0..8 {
                let v = mu(&p, t, s, x).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn slice_measure_matches_oracle_marginals() {
        let dims = HexagonDims::new(2, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for params in families_for(&dims, &mut rng) {
            let d = ExactDistribution::new(&dims, &params, 1 << 20).unwrap();
            for t in 0..=dims.t_max() {
                let marg = d.marginal(t);
                let sm = slice_measure(&dims, &params, t).unwrap();
                let mut tv = 0.0;
                for (cfg, p) in sm.configs.iter().zip(&sm.probs) {
                    tv += (marg.get(cfg).copied().unwrap_or(0.0) - p).abs();
                }
                assert!(tv / 2.0 < 1e-10, "family {params:?} t={t}: tv = {tv}");
            }
        }
    }

    #[test]
    fn single_particle_weight_matches_marginal() {
        // N = 1: rho is proportional to w alone (empty Vandermonde)
        let dims = HexagonDims::new(1, 2, 1).unwrap();
        let params = WeightParams::QRacah { q: 0.6, kappa_sq: -0.8 };
        let d = ExactDistribution::new(&dims, &params, 1000).unwrap();
        for t in 0..=dims.t_max() {
            let (lo, _) = dims.section(t);
            let ws = slice_weights(t, &dims, dims.s(), &params).unwrap();
            let total: f64 = ws.iter().sum();
            let marg = d.marginal(t);
            for (i, w) in ws.iter().enumerate() {
                let cfg = vec![lo as i32 + i as i32];
                let m = marg.get(&cfg).copied().unwrap_or(0.0);
                assert!((w / total - m).abs() < 1e-12, "t={t} x={i}");
            }
        }
    }

    #[test]
    fn rows_are_normalized_and_nonnegative() {
        let dims = HexagonDims::new(2, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for params in families_for(&dims, &mut rng) {
            for t in 0..dims.t_max() {
                for cfg in slice_configs(&dims, dims.s(), t) {
                    let row = transition_row(TransitionKind::TPlus, &cfg, t, &dims, &params).unwrap();
                    let sum: f64 = row.targets.iter().map(|(_, p)| p).sum();
                    assert!((sum - 1.0).abs() < 1e-12);
                    for (_, p) in &row.targets {
                        assert!(*p >= 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn unique_target_at_final_step() {
        let dims = HexagonDims::new(2, 2, 2).unwrap();
        let params = WeightParams::QHahn { q: 0.5 };
        let t = dims.t_max() - 1;
        for cfg in slice_configs(&dims, dims.s(), t) {
            let row = transition_row(TransitionKind::TPlus, &cfg, t, &dims, &params).unwrap();
            assert_eq!(row.targets.len(), 1);
            assert!((row.targets[0].1 - 1.0).abs() < 1e-15);
            assert_eq!(row.targets[0].0, vec![2, 3]);
        }
    }

    #[test]
    fn measure_preservation_all_kinds() {
        let dims = HexagonDims::new(2, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for params in families_for(&dims, &mut rng) {
            let s = dims.s();
            for t in 0..=dims.t_max() {
                for kind in [
                    TransitionKind::TPlus,
                    TransitionKind::TMinus,
                    TransitionKind::SPlus,
                    TransitionKind::SMinus,
                ] {
                    let (tt, ts) = target_ts(kind, t, s);
                    if tt < 0 || tt > dims.t_max() || ts < 0 || ts > dims.t_max() {
                        continue;
                    }
                    let src = slice_measure_s(&dims, &params, s, t).unwrap();
                    let dst = slice_measure_s(&dims, &params, ts, tt).unwrap();
                    let mut push: HashMap<Slice, f64> = HashMap::new();
                    for (cfg, p) in src.configs.iter().zip(&src.probs) {
                        for (y, pp) in transition_row_s(kind, cfg, t, s, &dims, &params)
                            .unwrap()
                            .targets
                        {
                            *push.entry(y).or_insert(0.0) += p * pp;
                        }
                    }
                    let mut tv = 0.0;
                    for (cfg, p) in dst.configs.iter().zip(&dst.probs) {
                        tv += (push.get(cfg).copied().unwrap_or(0.0) - p).abs();
                    }
                    assert!(tv / 2.0 < 1e-10, "{params:?} kind {kind:?} t={t}: tv={tv}");
                }
            }
        }
    }

    #[test]
    fn s_t_symmetry_of_transitions() {
        // rho_{S,t} = rho_{t,S} and P_{S+} at (S,t) equals P_{t+} at (t,S)
        // after swapping the roles of S and t.
        let dims = HexagonDims::new(2, 3, 2).unwrap(); // N=2, T=5, S=2
        let params = WeightParams::QRacah { q: 0.75, kappa_sq: -1.1 };
        let t = 3;
        let s = dims.s();
        // swapped box: S' = t, slice t' = s
        for cfg in slice_configs(&dims, s, t) {
            let row_s = transition_row_s(TransitionKind::SPlus, &cfg, t, s, &dims, &params).unwrap();
            let row_t = transition_row_s(TransitionKind::TPlus, &cfg, s, t, &dims, &params).unwrap();
            assert_eq!(row_s.targets.len(), row_t.targets.len());
            for ((y1, p1), (y2, p2)) in row_s.targets.iter().zip(row_t.targets.iter()) {
                assert_eq!(y1, y2);
                assert!((p1 - p2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn det_minor_reconstruction() {
        // transition probabilities proportional to Vandermonde ratio times
        // det[U(x_i, y_j)]
        use crate::linalg::Matrix;
        let dims = HexagonDims::new(2, 2, 2).unwrap();
        let params = WeightParams::QRacah { q: 0.8, kappa_sq: -1.0 };
        let sc = params.scalars().unwrap();
        let s = dims.s();
        for t in 0..dims.t_max() {
            for cfg in slice_configs(&dims, s, t) {
                let row = transition_row(TransitionKind::TPlus, &cfg, t, &dims, &params).unwrap();
                let mut dets: Vec<f64> = Vec::new();
                for (y, _) in &row.targets {
                    let n = cfg.len();
                    let m = Matrix::<f64>::from_fn(n, |i, j| {
                        u_entry(
                            TransitionKind::TPlus,
                            cfg[i] as i64,
                            y[j] as i64,
                            t,
                            s,
                            &dims,
                            &params,
                        )
                        .unwrap()
                    });
                    let mut v = m.det();
                    for i in 0..n {
                        for j in i + 1..n {
                            v *= sc.mu(t + 1, s, y[i] as i64) - sc.mu(t + 1, s, y[j] as i64);
                        }
                    }
                    dets.push(v.abs());
                }
                let total: f64 = dets.iter().sum();
                for (d, (_, p)) in dets.iter().zip(&row.targets) {
                    assert!((d / total - p).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn u_zero_pattern() {
        let dims = HexagonDims::new(2, 2, 2).unwrap();
        let params = WeightParams::QRacah { q: 0.8, kappa_sq: -1.0 };
        for y in -2..5i64 {
            let v = u_entry(TransitionKind::TPlus, 1, y, 1, 2, &dims, &params).unwrap();
            if y != 1 && y != 2 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn commutation_residuals_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for dims in [HexagonDims::new(2, 2, 2).unwrap(), HexagonDims::new(3, 2, 2).unwrap()] {
            for params in families_for(&dims, &mut rng) {
                for t in 1..dims.t_max() {
                    let r = commutation_check(&dims, &params, t, dims.s()).unwrap();
                    assert!(r < 1e-11, "{params:?} t={t}: residual {r}");
                }
            }
        }
    }

    #[test]
    fn p_level_commutation() {
        let dims = HexagonDims::new(2, 2, 2).unwrap();
        let params = WeightParams::QRacah { q: 0.8, kappa_sq: -1.0 };
        for t in 1..dims.t_max() {
            let r = p_commutation_check(&dims, &params, t, dims.s()).unwrap();
            assert!(r < 1e-10, "t={t}: {r}");
        }
    }

    #[test]
    fn cotransition_detailed_balance() {
        // rho_{S,t}(X) P_{t-}(X, Y) = rho_{S,t-1}(Y) P_{t+}(Y, X)
        let dims = HexagonDims::new(2, 2, 2).unwrap();
        let params = WeightParams::QRacah { q: 0.7, kappa_sq: -1.4 };
        let s = dims.s();
        for t in 1..=dims.t_max() {
            let rho_t = slice_measure_s(&dims, &params, s, t).unwrap();
            let rho_tm = slice_measure_s(&dims, &params, s, t - 1).unwrap();
            for (x, px) in rho_t.configs.iter().zip(&rho_t.probs) {
                for (y, pxy) in transition_row_s(TransitionKind::TMinus, x, t, s, &dims, &params)
                    .unwrap()
                    .targets
                {
                    let py = rho_tm.prob_of(&y);
                    let back = transition_row_s(TransitionKind::TPlus, &y, t - 1, s, &dims, &params)
                        .unwrap()
                        .targets
                        .iter()
                        .find(|(z, _)| z == x)
                        .map(|(_, p)| *p)
                        .unwrap_or(0.0);
                    assert!(
                        (px * pxy - py * back).abs() < 1e-12,
                        "t={t} x={x:?} y={y:?}"
                    );
                }
            }
        }
    }
}
