//! Brute-force ground truth: exhaustive enumeration of the tiling set,
//! exact distributions, joint correlations, and the one-slice partial weight
//! sums L_t, C_t, R_t.

use crate::error::{Error, Result};
use crate::numerics::{normalize_log_weights, LogSigned};
use crate::weights::{tiling_weight_s, HexagonDims, WeightParams};
use std::collections::HashMap;

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// One vertical slice: strictly increasing particle positions.
pub type Slice = Vec<i32>;

/// Full tiling as the sequence of slices X(0), ..., X(T).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tiling {
    pub slices: Vec<Slice>,
}

impl Tiling {
    /// The slicewise-lowest tiling (every slice hugs the bottom of its
    /// section); always valid.
    pub fn minimal(dims: &HexagonDims) -> Tiling {
        let n = dims.n();
        let slices = (0..=dims.t_max())
            .map(|t| {
                let (lo, _) = dims.section(t);
                (lo..lo + n).map(|x| x as i32).collect()
            })
            .collect();
        Tiling { slices }
    }

    /// Validate boundary slices, section membership, monotonicity and
    /// interlacing for the box with parameter S.
    pub fn validate_s(&self, dims: &HexagonDims, s: i64) -> Result<()> {
        let n = dims.n() as usize;
        let t_max = dims.t_max();
        if self.slices.len() as i64 != t_max + 1 {
            return Err(Error::Structural(format!(
                "expected {} slices, got {}",
                t_max + 1,
                self.slices.len()
            )));
        }
        for (t, slice) in self.slices.iter().enumerate() {
            let t = t as i64;
            if slice.len() != n {
                return Err(Error::Structural(format!("slice {t} has {} points", slice.len())));
            }
            let (lo, hi) = dims.section_s(s, t);
            for (i, &x) in slice.iter().enumerate() {
                if (x as i64) < lo || (x as i64) > hi {
                    return Err(Error::Structural(format!("slice {t} point {x} outside [{lo}, {hi}]")));
                }
                if i > 0 && slice[i - 1] >= x {
                    return Err(Error::Structural(format!("slice {t} not strictly increasing")));
                }
            }
            if t > 0 {
                let prev = &self.slices[t as usize - 1];
                for i in 0..n {
                    let d = slice[i] - prev[i];
                    if d != 0 && d != 1 {
                        return Err(Error::Structural(format!(
                            "interlacing violated between slices {} and {t} at index {i}",
                            t - 1
                        )));
                    }
                }
            }
        }
        let first: Slice = (0..n as i32).collect();
        let last: Slice = (0..n as i32).map(|i| i + s as i32).collect();
        if self.slices[0] != first || self.slices[t_max as usize] != last {
            return Err(Error::Structural("boundary slices do not match (0..N-1), (S..S+N-1)".into()));
        }
        Ok(())
    }

    pub fn validate(&self, dims: &HexagonDims) -> Result<()> {
        self.validate_s(dims, dims.s())
    }

    /// Line format: one line per slice, space-separated x-coordinates,
    /// newline-terminated.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for slice in &self.slices {
            let strs: Vec<String> = slice.iter().map(|x| x.to_string()).collect();
            out.push_str(&strs.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_lines(text: &str) -> Result<Tiling> {
        let mut slices = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let slice: std::result::Result<Slice, _> =
                line.split_whitespace().map(|w| w.parse::<i32>()).collect();
            slices.push(slice.map_err(|e| Error::Io(format!("bad tiling line: {e}")))?);
        }
        if slices.is_empty() {
            return Err(Error::Io("empty tiling text".into()));
        }
        Ok(Tiling { slices })
    }

    pub fn key(&self) -> Vec<i32> {
        self.slices.iter().flatten().copied().collect()
    }

    /// Hole positions (t, x) of all horizontal lozenges, for box parameter S.
    pub fn holes_s(&self, dims: &HexagonDims, s: i64) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        for (t, slice) in self.slices.iter().enumerate() {
            let t = t as i64;
            let (lo, hi) = dims.section_s(s, t);
            let mut idx = 0usize;
            for x in lo..=hi {
                if idx < slice.len() && slice[idx] as i64 == x {
                    idx += 1;
                } else {
                    out.push((t, x));
                }
            }
        }
        out
    }
}

/// All strictly increasing N-tuples in the section of the line t.
pub fn slice_configs(dims: &HexagonDims, s: i64, t: i64) -> Vec<Slice> {
    let (lo, hi) = dims.section_s(s, t);
    let n = dims.n() as usize;
    let mut out = Vec::new();
    let mut cur: Slice = Vec::with_capacity(n);
    fn rec(lo: i32, hi: i32, n: usize, start: i32, cur: &mut Slice, out: &mut Vec<Slice>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        let remaining = (n - cur.len()) as i32;
        for x in start..=hi - remaining + 1 {
            cur.push(x);
            rec(lo, hi, n, x + 1, cur, out);
            cur.pop();
        }
    }
    rec(lo as i32, hi as i32, n, lo as i32, &mut cur, &mut out);
    out
}

/// Successor slices under interlacing (offsets 0/1), clipped to the section
/// of t + 1.
fn successors(dims: &HexagonDims, s: i64, t: i64, slice: &Slice) -> Vec<Slice> {
    let (lo, hi) = dims.section_s(s, t + 1);
    let n = slice.len();
    let mut out = Vec::new();
    let mut cur: Slice = Vec::with_capacity(n);
    fn rec(slice: &[i32], lo: i64, hi: i64, i: usize, cur: &mut Slice, out: &mut Vec<Slice>) {
        if i == slice.len() {
            out.push(cur.clone());
            return;
        }
        for d in 0..=1 {
            let y = slice[i] + d;
            if (y as i64) < lo || (y as i64) > hi {
                continue;
            }
            if let Some(&prev) = cur.last() {
                if y <= prev {
                    continue;
                }
            }
            cur.push(y);
            rec(slice, lo, hi, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(slice, lo, hi, 0, &mut cur, &mut out);
    out
}

/// Exact number of tilings by dynamic programming over slices.
pub fn count_tilings(dims: &HexagonDims) -> u128 {
    count_tilings_s(dims, dims.s())
}

pub fn count_tilings_s(dims: &HexagonDims, s: i64) -> u128 {
    let t_max = dims.t_max();
    let mut counts: HashMap<Slice, u128> = HashMap::new();
    let start: Slice = (0..dims.n() as i32).collect();
    counts.insert(start, 1);
    for t in 0..t_max {
        let mut next: HashMap<Slice, u128> = HashMap::new();
        for (slice, c) in &counts {
            for succ in successors(dims, s, t, slice) {
                *next.entry(succ).or_insert(0) += c;
            }
        }
        counts = next;
    }
    let end: Slice = (0..dims.n() as i32).map(|i| i + s as i32).collect();
    counts.get(&end).copied().unwrap_or(0)
}

/// MacMahon's product formula for the number of plane partitions in an
/// a x b x c box, evaluated exactly.
pub fn macmahon_count(a: u32, b: u32, c: u32) -> u128 {
    // prod_{i<=a, j<=b} (i + j + c - 1) / (i + j - 1)
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 1..=a as u128 {
        for j in 1..=b as u128 {
            num *= i + j + c as u128 - 1;
            den *= i + j - 1;
        }
    }
    num / den
}

/// Visit every tiling exactly once (depth-first over slices).
pub fn for_each_tiling(dims: &HexagonDims, mut f: impl FnMut(&Tiling)) {
    for_each_tiling_s(dims, dims.s(), &mut f)
}

pub fn for_each_tiling_s(dims: &HexagonDims, s: i64, f: &mut impl FnMut(&Tiling)) {
    let t_max = dims.t_max();
    let start: Slice = (0..dims.n() as i32).collect();
    let end: Slice = (0..dims.n() as i32).map(|i| i + s as i32).collect();
    let mut stack: Vec<Slice> = vec![start];
    fn rec(
        dims: &HexagonDims,
        s: i64,
        t: i64,
        t_max: i64,
        end: &Slice,
        stack: &mut Vec<Slice>,
        f: &mut impl FnMut(&Tiling),
    ) {
        if t == t_max {
            if stack.last().unwrap() == end {
                let tiling = Tiling { slices: stack.clone() };
                f(&tiling);
            }
            return;
        }
        let cur = stack.last().unwrap().clone();
        for succ in successors(dims, s, t, &cur) {
            stack.push(succ);
            rec(dims, s, t + 1, t_max, end, stack, f);
            stack.pop();
        }
    }
    rec(dims, s, 0, t_max, &end, &mut stack, f);
}

/// Materialize all tilings, guarded by the enumeration cap.
pub fn enumerate_tilings(dims: &HexagonDims, cap: u128) -> Result<Vec<Tiling>> {
    let count = count_tilings(dims);
    if count > cap {
        return Err(Error::TooLarge(format!(
            "{count} tilings exceed the enumeration cap {cap}"
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    for_each_tiling(dims, |t| out.push(t.clone()));
    Ok(out)
}

/// The exact probability measure on tilings for the given weight family.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub dims: HexagonDims,
    pub tilings: Vec<Tiling>,
    pub probs: Vec<f64>,
    index: HashMap<Vec<i32>, usize>,
}

impl ExactDistribution {
    pub fn new(dims: &HexagonDims, params: &WeightParams, cap: u128) -> Result<Self> {
        Self::new_s(dims, params, dims.s(), cap)
    }

    /// Distribution on the box with parameter S (same N, T).
    pub fn new_s(dims: &HexagonDims, params: &WeightParams, s: i64, cap: u128) -> Result<Self> {
        let count = count_tilings_s(dims, s);
        if count > cap {
            return Err(Error::TooLarge(format!(
                "{count} tilings exceed the enumeration cap {cap}"
            )));
        }
        let mut tilings = Vec::with_capacity(count as usize);
        for_each_tiling_s(dims, s, &mut |t: &Tiling| tilings.push(t.clone()));
        let weights: Result<Vec<LogSigned>> = tilings
            .iter()
            .map(|t| tiling_weight_s(t, params, dims, s))
            .collect();
        let probs = normalize_log_weights(&weights?)?;
        let index = tilings
            .iter()
            .enumerate()
            .map(|(i, t)| (t.key(), i))
            .collect();
        Ok(ExactDistribution { dims: *dims, tilings, probs, index })
    }

    pub fn prob_of(&self, tiling: &Tiling) -> f64 {
        self.index.get(&tiling.key()).map(|&i| self.probs[i]).unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.tilings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tilings.is_empty()
    }

    /// Marginal law of the slice X(t).
    pub fn marginal(&self, t: i64) -> HashMap<Slice, f64> {
        let mut out: HashMap<Slice, f64> = HashMap::new();
        for (tiling, &p) in self.tilings.iter().zip(&self.probs) {
            *out.entry(tiling.slices[t as usize].clone()).or_insert(0.0) += p;
        }
        out
    }

    /// P(every (t_i, x_i) is occupied by a particle).
    pub fn point_correlation(&self, points: &[(i64, i64)]) -> f64 {
        let mut acc = 0.0;
        'outer: for (tiling, &p) in self.tilings.iter().zip(&self.probs) {
            for &(t, x) in points {
                if !tiling.slices[t as usize].iter().any(|&v| v as i64 == x) {
                    continue 'outer;
                }
            }
            acc += p;
        }
        acc
    }

    /// P(every (t_i, x_i) is a hole).
    pub fn hole_correlation(&self, points: &[(i64, i64)]) -> f64 {
        let mut acc = 0.0;
        'outer: for (tiling, &p) in self.tilings.iter().zip(&self.probs) {
            for &(t, x) in points {
                if tiling.slices[t as usize].iter().any(|&v| v as i64 == x) {
                    continue 'outer;
                }
            }
            acc += p;
        }
        acc
    }
}

/// Closed-form partial weight sums (L_t, C_t, R_t) for the q-Racah
/// families, up to configuration-independent constants.
pub fn partial_weight_sums(
    dims: &HexagonDims,
    params: &WeightParams,
    t: i64,
    config: &Slice,
) -> Result<(LogSigned, LogSigned, LogSigned)> {
    match params {
        WeightParams::QHahn { .. } | WeightParams::QRacah { .. } => {}
        _ => {
            return Err(Error::Domain(
                "partial weight sums are stated for the q-Racah/q-Hahn weights".into(),
            ))
        }
    }
    let sc = params.scalars()?;
    let n = dims.n();
    let t_max = dims.t_max();
    let s = dims.s();
    let (lo, hi) = dims.section(t);
    for (i, &x) in config.iter().enumerate() {
        if (x as i64) < lo || (x as i64) > hi || (i > 0 && config[i - 1] >= x) {
            return Err(Error::Structural("configuration outside the section".into()));
        }
    }

    // Vandermonde in mu
    let mut vdm = LogSigned::one();
    for i in 0..config.len() {
        for j in i + 1..config.len() {
            let d = sc.mu(t, s, config[i] as i64) - sc.mu(t, s, config[j] as i64);
            if d == 0.0 {
                return Err(Error::DegenerateParameters(
                    "two equal mu values in the configuration".into(),
                ));
            }
            vdm *= LogSigned::from_f64(d);
        }
    }

    let mut l = vdm;
    let mut r = vdm;
    let mut c = LogSigned::one();
    for &xi in config {
        let x = xi as i64;
        // L factor: q^{x(t+N-1)} (1 - k^2 q^{2x-S-t+1}) /
        //   [(q^{-1};q^{-1})_{t+N-1-x} (q;q)_x (k^2 q^{x-t-S+1};q)_{t+N}]
        let mut fl = sc.qpow_half_ls(2 * x * (t + n - 1)) * sc.omk_ls(2 * x - s - t + 1);
        for i in 1..=(t + n - 1 - x) {
            fl = fl / sc.omq_ls(-i);
        }
        for i in 1..=x {
            fl = fl / sc.omq_ls(i);
        }
        for i in 0..(t + n) {
            fl = fl / sc.omk_ls(x - t - s + 1 + i);
        }
        l *= fl;

        // R factor: (1 - k^2 q^{2x-S-t+1}) q^{x(T-t+N-1)} /
        //   [(q^{-1};q^{-1})_{S+N-1-x} (q;q)_{x+T-t-S} (k^2 q^{x-T+1};q)_{N+T-t}]
        let mut fr = sc.omk_ls(2 * x - s - t + 1) * sc.qpow_half_ls(2 * x * (t_max - t + n - 1));
        for i in 1..=(s + n - 1 - x) {
            fr = fr / sc.omq_ls(-i);
        }
        for i in 1..=(x + t_max - t - s) {
            fr = fr / sc.omq_ls(i);
        }
        for i in 0..(n + t_max - t) {
            fr = fr / sc.omk_ls(x - t_max + 1 + i);
        }
        r *= fr;

        // C factor: q^x / (1 - k^2 q^{2x-S-t+1})
        let denom = sc.omk_ls(2 * x - s - t + 1);
        if denom.is_zero() {
            return Err(Error::DegenerateParameters("pole in the C_t factor".into()));
        }
        c *= sc.qpow_half_ls(2 * x) / denom;
    }
    Ok((l, c, r))
}
