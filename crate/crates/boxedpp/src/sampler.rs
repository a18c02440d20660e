//! Perfect sampling through the S -> S +- 1 Markov chains: jump
//! distributions, the block-splitting sequential update, full-tiling
//! sampling from the empty box, and the top-path projection.

use crate::error::{Error, Result};
use crate::numerics::LogSigned;
use crate::oracle::{Slice, Tiling};
use crate::weights::{HexagonDims, WeightParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Direction of the size change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepDirection {
    /// S -> S + 1 (distribution D)
    Up,
    /// S -> S - 1 (distribution D-hat)
    Down,
}

/// Sequential update order over slices. The alternative direction updates
/// from t = T down to 0; both preserve the measures but define different
/// couplings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateOrder {
    #[default]
    Forward,
    Backward,
}

/// Distribution on {0, ..., n} whose probabilities are the running products
/// of the per-site ratios p (up) or p-hat (down).
#[derive(Debug, Clone)]
pub struct JumpDistribution {
    pub x: i64,
    pub t: i64,
    pub s: i64,
    pub probs: Vec<f64>,
}

impl JumpDistribution {
    pub fn sample(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.probs.len() - 1
    }
}

/// Jump ratio as a numerator/denominator pair; a vanishing numerator kills
/// the upper tail, a vanishing denominator kills the lower tail (boundary
/// forcing).
enum Ratio {
    Zero,
    Infinite,
    Finite(LogSigned),
}

/// Single ratio p(x, t, q, kappa, S, T) of the S -> S+1 jump law.
fn p_ratio_up(x: i64, t: i64, s: i64, dims: &HexagonDims, params: &WeightParams) -> Result<Ratio> {
    let sc = params.scalars()?;
    let t_max = dims.t_max();
    // plain f64 is exact about zeros and much cheaper; fall back to the
    // log-domain path when a magnitude leaves the safe range
    let num = sc.omq(x + t_max - t - s - 1) * sc.omk(x - s - t - 1) * sc.omk(2 * x - t - s + 1);
    let den = sc.qpow_half(2 * (t_max - t - s - 1))
        * sc.omq(x + 1)
        * sc.omk(x - t_max + 1)
        * sc.omk(2 * x - t - s - 1);
    if in_safe_range(num) && in_safe_range(den) {
        return Ratio::classify_f64(num, den, x, t);
    }
    let num = sc.omq_ls(x + t_max - t - s - 1)
        * sc.omk_ls(x - s - t - 1)
        * sc.omk_ls(2 * x - t - s + 1);
    let den = sc.qpow_half_ls(2 * (t_max - t - s - 1))
        * sc.omq_ls(x + 1)
        * sc.omk_ls(x - t_max + 1)
        * sc.omk_ls(2 * x - t - s - 1);
    Ratio::classify(num, den, x, t)
}

/// Single ratio p-hat(x, t, q, kappa, S, T, N) of the S -> S-1 jump law.
fn p_ratio_down(x: i64, t: i64, s: i64, dims: &HexagonDims, params: &WeightParams) -> Result<Ratio> {
    let sc = params.scalars()?;
    let n = dims.n();
    let num = sc.qpow_half(2 * (t + 1 - s))
        * sc.omq(x - t - n - 1)
        * sc.omk(x + n - t - 1)
        * sc.omk(2 * x - t - s + 1);
    let den = sc.omq(x - s - n + 1) * sc.omk(x + n - s + 1) * sc.omk(2 * x - t - s - 1);
    if in_safe_range(num) && in_safe_range(den) {
        return Ratio::classify_f64(num, den, x, t);
    }
    let num = sc.qpow_half_ls(2 * (t + 1 - s))
        * sc.omq_ls(x - t - n - 1)
        * sc.omk_ls(x + n - t - 1)
        * sc.omk_ls(2 * x - t - s + 1);
    let den = sc.omq_ls(x - s - n + 1) * sc.omk_ls(x + n - s + 1) * sc.omk_ls(2 * x - t - s - 1);
    Ratio::classify(num, den, x, t)
}

fn in_safe_range(v: f64) -> bool {
    v == 0.0 || (v.abs() > 1e-120 && v.abs() < 1e120)
}

impl Ratio {
    fn classify(num: LogSigned, den: LogSigned, x: i64, t: i64) -> Result<Ratio> {
        match (num.is_zero(), den.is_zero()) {
            (true, true) => Err(Error::DegenerateParameters(format!(
                "jump ratio 0/0 at x = {x}, t = {t}"
            ))),
            (true, false) => Ok(Ratio::Zero),
            (false, true) => Ok(Ratio::Infinite),
            (false, false) => Ok(Ratio::Finite(num / den)),
        }
    }

    fn classify_f64(num: f64, den: f64, x: i64, t: i64) -> Result<Ratio> {
        match (num == 0.0, den == 0.0) {
            (true, true) => Err(Error::DegenerateParameters(format!(
                "jump ratio 0/0 at x = {x}, t = {t}"
            ))),
            (true, false) => Ok(Ratio::Zero),
            (false, true) => Ok(Ratio::Infinite),
            (false, false) => Ok(Ratio::Finite(LogSigned::from_f64(num / den))),
        }
    }
}

fn jump_generic(
    dir: StepDirection,
    x: i64,
    t: i64,
    s: i64,
    n: usize,
    dims: &HexagonDims,
    params: &WeightParams,
) -> Result<JumpDistribution> {
    let mut ratios: Vec<Ratio> = Vec::with_capacity(n);
    for k in 1..=n as i64 {
        ratios.push(match dir {
            StepDirection::Up => p_ratio_up(x + k - 1, t, s, dims, params)?,
            StepDirection::Down => p_ratio_down(x + k - 1, t, s, dims, params)?,
        });
    }
    // an infinite ratio at index k forces all mass to outcomes >= k
    let start = ratios
        .iter()
        .rposition(|r| matches!(r, Ratio::Infinite))
        .map(|i| i + 1)
        .unwrap_or(0);
    let mut lps: Vec<Option<LogSigned>> = vec![None; n + 1];
    lps[start] = Some(LogSigned::one());
    let mut cur = LogSigned::one();
    for k in start + 1..=n {
        match ratios[k - 1] {
            Ratio::Zero => break,
            Ratio::Infinite => unreachable!(),
            Ratio::Finite(r) => {
                if r.sign < 0 {
                    return Err(Error::InadmissibleParameters(format!(
                        "negative jump ratio at x = {}, t = {t}",
                        x + k as i64 - 1
                    )));
                }
                cur = cur * r;
                lps[k] = Some(cur);
            }
        }
    }
    let max_ln = lps
        .iter()
        .flatten()
        .map(|l| l.ln_abs)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = lps
        .iter()
        .map(|l| match l {
            Some(v) => (v.ln_abs - max_ln).exp(),
            None => 0.0,
        })
        .collect();
    let total: f64 = probs.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::DegenerateParameters("jump distribution does not normalize".into()));
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(JumpDistribution { x, t, s, probs })
}

/// Jump distribution D(x, t, S; n) of the S -> S+1 step.
pub fn jump_d(x: i64, t: i64, s: i64, n: usize, dims: &HexagonDims, params: &WeightParams) -> Result<JumpDistribution> {
    jump_generic(StepDirection::Up, x, t, s, n, dims, params)
}

/// Jump distribution D-hat(x, t, S; n) of the S -> S-1 step.
pub fn jump_dhat(x: i64, t: i64, s: i64, n: usize, dims: &HexagonDims, params: &WeightParams) -> Result<JumpDistribution> {
    jump_generic(StepDirection::Down, x, t, s, n, dims, params)
}

/// Memo for jump distributions, keyed by (direction, x, t, S, support).
#[derive(Default)]
pub struct JumpCache {
    map: std::collections::HashMap<(bool, i64, i64, i64, usize), std::rc::Rc<JumpDistribution>>,
}

impl JumpCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(
        &mut self,
        dir: StepDirection,
        x: i64,
        t: i64,
        s: i64,
        n: usize,
        dims: &HexagonDims,
        params: &WeightParams,
    ) -> Result<std::rc::Rc<JumpDistribution>> {
        let key = (dir == StepDirection::Up, x, t, s, n);
        if let Some(d) = self.map.get(&key) {
            return Ok(d.clone());
        }
        let d = std::rc::Rc::new(jump_generic(dir, x, t, s, n, dims, params)?);
        self.map.insert(key, d.clone());
        Ok(d)
    }
}

/// Audit record of one block draw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub s: i64,
    pub t: i64,
    pub block_start: i64,
    pub block_len: usize,
    pub xi: usize,
}

/// Sampler state: the current tiling, its box parameter S, and the
/// deterministic generator.
#[derive(Debug, Clone)]
pub struct SamplerState {
    pub dims: HexagonDims,
    pub params: WeightParams,
    pub s: i64,
    pub current: Tiling,
    pub rng: ChaCha8Rng,
    pub order: UpdateOrder,
}

impl SamplerState {
    /// Start at the unique tiling of the a x (b+c) x 0 box.
    pub fn new(dims: &HexagonDims, params: &WeightParams, seed: u64) -> Result<SamplerState> {
        crate::weights::positivity_case(params, dims)?;
        let empty = dims.with_c(0)?;
        let current = Tiling::minimal(&empty);
        Ok(SamplerState {
            dims: *dims,
            params: *params,
            s: 0,
            current,
            rng: <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed),
            order: UpdateOrder::Forward,
        })
    }

    pub fn with_order(mut self, order: UpdateOrder) -> SamplerState {
        self.order = order;
        self
    }

    /// One S -> S +- 1 step; draws are consumed in slice order, then block
    /// order (lowest block first).
    pub fn step(&mut self, dir: StepDirection) -> Result<()> {
        self.step_traced(dir).map(|_| ())
    }

    /// Same as [`Self::step`], returning the audit trace of block draws.
    pub fn step_traced(&mut self, dir: StepDirection) -> Result<Vec<TraceEntry>> {
        let target = match dir {
            StepDirection::Up => self.s + 1,
            StepDirection::Down => self.s - 1,
        };
        if target < 0 || target > self.dims.t_max() {
            return Err(Error::Structural(format!("step to S = {target} leaves [0, T]")));
        }
        let mut trace = Vec::new();
        let rng = &mut self.rng;
        let next = step_s_with(
            &self.current,
            dir,
            self.order,
            self.s,
            &self.dims,
            &self.params,
            &mut |d: &JumpDistribution| d.sample(rng.gen::<f64>()),
            Some(&mut trace),
        )?;
        self.current = next;
        self.s = target;
        Ok(trace)
    }
}

/// Apply one S -> S +- 1 update to `tiling` (an element of Omega(N, T, s)),
/// drawing block splits through `draw`. `trace` optionally records the draws.
#[allow(clippy::too_many_arguments)]
pub fn step_s_with(
    tiling: &Tiling,
    dir: StepDirection,
    order: UpdateOrder,
    s: i64,
    dims: &HexagonDims,
    params: &WeightParams,
    draw: &mut dyn FnMut(&JumpDistribution) -> usize,
    trace: Option<&mut Vec<TraceEntry>>,
) -> Result<Tiling> {
    let mut cache = JumpCache::new();
    step_s_cached(tiling, dir, order, s, dims, params, draw, trace, &mut cache)
}

/// [`step_s_with`] with an external jump-distribution memo (exact
/// push-forwards revisit the same blocks many times).
#[allow(clippy::too_many_arguments)]
pub fn step_s_cached(
    tiling: &Tiling,
    dir: StepDirection,
    order: UpdateOrder,
    s: i64,
    dims: &HexagonDims,
    params: &WeightParams,
    draw: &mut dyn FnMut(&JumpDistribution) -> usize,
    mut trace: Option<&mut Vec<TraceEntry>>,
    cache: &mut JumpCache,
) -> Result<Tiling> {
    match order {
        UpdateOrder::Forward => {
            step_s_forward(tiling, dir, s, dims, params, draw, trace.as_deref_mut(), cache)
        }
        UpdateOrder::Backward => {
            // conjugate by the 180-degree rotation of the hexagon; the memo
            // is keyed for one parameter set, so the rotated run gets a
            // fresh one
            let _ = cache;
            let rotated = rotate_tiling(tiling, dims, s);
            let rparams = params.rotated(dims)?;
            let mut rcache = JumpCache::new();
            let out = step_s_forward(
                &rotated,
                dir,
                s,
                dims,
                &rparams,
                draw,
                trace.as_deref_mut(),
                &mut rcache,
            )?;
            let target = if dir == StepDirection::Up { s + 1 } else { s - 1 };
            Ok(rotate_tiling(&out, dims, target))
        }
    }
}

/// 180-degree rotation: (t, x) -> (T - t, S + N - 1 - x).
pub fn rotate_tiling(tiling: &Tiling, dims: &HexagonDims, s: i64) -> Tiling {
    let c = s + dims.n() - 1;
    let t_max = dims.t_max() as usize;
    let slices = (0..=t_max)
        .map(|t| {
            let mut v: Slice = tiling.slices[t_max - t]
                .iter()
                .map(|&x| (c - x as i64) as i32)
                .collect();
            v.sort_unstable();
            v
        })
        .collect();
    Tiling { slices }
}

#[allow(clippy::too_many_arguments)]
fn step_s_forward(
    tiling: &Tiling,
    dir: StepDirection,
    s: i64,
    dims: &HexagonDims,
    params: &WeightParams,
    draw: &mut dyn FnMut(&JumpDistribution) -> usize,
    mut trace: Option<&mut Vec<TraceEntry>>,
    cache: &mut JumpCache,
) -> Result<Tiling> {
    let n = dims.n() as usize;
    let t_max = dims.t_max();
    let target_s = match dir {
        StepDirection::Up => s + 1,
        StepDirection::Down => s - 1,
    };
    let mut out: Vec<Slice> = Vec::with_capacity(t_max as usize + 1);
    out.push((0..n as i32).collect());
    for t in 0..t_max {
        let xs = &tiling.slices[t as usize + 1];
        let ys = &out[t as usize];
        let (lo, hi) = dims.section_s(target_s, t + 1);
        let mut z: Vec<i64> = vec![i64::MIN; n];
        // classify offsets; ties go to blocks
        let mut ties: Vec<usize> = Vec::new();
        for i in 0..n {
            let d = xs[i] as i64 - ys[i] as i64;
            match (dir, d) {
                (StepDirection::Up, 1) => z[i] = xs[i] as i64,
                (StepDirection::Up, -1) => z[i] = ys[i] as i64,
                (StepDirection::Up, 0) => ties.push(i),
                (StepDirection::Down, 0) => z[i] = xs[i] as i64,
                (StepDirection::Down, 2) => z[i] = ys[i] as i64 + 1,
                (StepDirection::Down, 1) => ties.push(i),
                _ => {
                    return Err(Error::Structural(format!(
                        "offset {d} impossible at slice {} index {i}",
                        t + 1
                    )))
                }
            }
        }
        // maximal blocks of consecutive x-values among the tied indices
        let mut b = 0usize;
        while b < ties.len() {
            let mut e = b + 1;
            while e < ties.len()
                && ties[e] == ties[e - 1] + 1
                && xs[ties[e]] == xs[ties[e - 1]] + 1
            {
                e += 1;
            }
            let k = xs[ties[b]] as i64;
            let l = e - b;
            let dist = cache.get(dir, k, t, s, l, dims, params)?;
            let xi = draw(&dist);
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(TraceEntry { s, t, block_start: k, block_len: l, xi });
            }
            for (j, &i) in ties[b..e].iter().enumerate() {
                z[i] = match dir {
                    // first xi members keep the low option, the rest move up
                    StepDirection::Up => xs[i] as i64 + if j < xi { 0 } else { 1 },
                    StepDirection::Down => xs[i] as i64 + if j < xi { -1 } else { 0 },
                };
            }
            b = e;
        }
        // structural guarantees
        for i in 0..n {
            if z[i] < lo || z[i] > hi {
                return Err(Error::Structural(format!(
                    "updated point {} escapes section [{lo}, {hi}] at slice {}",
                    z[i],
                    t + 1
                )));
            }
            if i > 0 && z[i] <= z[i - 1] {
                return Err(Error::Structural(format!("collision at slice {}", t + 1)));
            }
        }
        out.push(z.iter().map(|&v| v as i32).collect());
    }
    Ok(Tiling { slices: out })
}

/// Draw one exact sample of Omega(N, T, S) by S up-steps from the empty box.
pub fn sample_tiling(dims: &HexagonDims, params: &WeightParams, seed: u64) -> Result<Tiling> {
    let mut state = SamplerState::new(dims, params, seed)?;
    for _ in 0..dims.s() {
        state.step(StepDirection::Up)?;
    }
    Ok(state.current)
}

/// Top-path coordinates u_t, t = 1..T: the t-th hole of slice t counted
/// upward from x = 0 (sites outside the box count as holes). At S = 0 this
/// is N, N+1, ...; at S = T it is 0, 1, 2, ....
pub fn top_path(tiling: &Tiling, dims: &HexagonDims) -> Vec<i64> {
    let t_max = dims.t_max();
    let mut out = Vec::with_capacity(t_max as usize);
    for t in 1..=t_max {
        let slice = &tiling.slices[t as usize];
        let mut holes_seen = 0i64;
        let mut idx = 0usize;
        let mut x = 0i64;
        loop {
            if idx < slice.len() && slice[idx] as i64 == x {
                idx += 1;
            } else {
                holes_seen += 1;
                if holes_seen == t {
                    out.push(x);
                    break;
                }
            }
            x += 1;
        }
    }
    out
}

/// Top paths of a history of S -> S+1 states (index k holds the path at S = k).
pub fn extract_top_path(history: &[Tiling], dims: &HexagonDims) -> Vec<Vec<i64>> {
    history.iter().map(|t| top_path(t, dims)).collect()
}

/// Exact push-forward of a distribution on tilings through one step:
/// enumerate all block-draw combinations with their probabilities.
pub fn step_outcomes(
    tiling: &Tiling,
    dir: StepDirection,
    order: UpdateOrder,
    s: i64,
    dims: &HexagonDims,
    params: &WeightParams,
) -> Result<Vec<(Tiling, f64)>> {
    step_outcomes_cached(tiling, dir, order, s, dims, params, &mut JumpCache::new())
}

/// [`step_outcomes`] with a shared jump-distribution memo.
pub fn step_outcomes_cached(
    tiling: &Tiling,
    dir: StepDirection,
    order: UpdateOrder,
    s: i64,
    dims: &HexagonDims,
    params: &WeightParams,
    cache: &mut JumpCache,
) -> Result<Vec<(Tiling, f64)>> {
    // depth-first over the draws: run the sequential update with a scripted
    // drawer, advancing the script like an odometer over the
    // positive-probability choices. Probabilities are re-read from the memo
    // through (x, t, support) keys recorded during the run.
    let mut outcomes: Vec<(Tiling, f64)> = Vec::new();
    let mut script: Vec<usize> = Vec::new();
    loop {
        let mut taken: Vec<(usize, std::rc::Rc<JumpDistribution>)> = Vec::new();
        let mut pos = 0usize;
        let result = {
            let script_ref = &script;
            let taken_ref = &mut taken;
            let pos_ref = &mut pos;
            let shared_map: std::cell::RefCell<
                std::collections::HashMap<(i64, i64, usize), std::rc::Rc<JumpDistribution>>,
            > = std::cell::RefCell::new(std::collections::HashMap::new());
            step_s_cached(
                tiling,
                dir,
                order,
                s,
                dims,
                params,
                &mut |d: &JumpDistribution| {
                    let key = (d.x, d.t, d.probs.len());
                    let shared = shared_map
                        .borrow_mut()
                        .entry(key)
                        .or_insert_with(|| std::rc::Rc::new(d.clone()))
                        .clone();
                    let choice = if *pos_ref < script_ref.len() {
                        script_ref[*pos_ref]
                    } else {
                        shared.probs.iter().position(|&p| p > 0.0).unwrap_or(0)
                    };
                    taken_ref.push((choice, shared));
                    *pos_ref += 1;
                    choice
                },
                None,
                cache,
            )?
        };
        let prob: f64 = taken.iter().map(|(c, d)| d.probs[*c]).product();
        if prob > 0.0 {
            outcomes.push((result, prob));
        }
        // advance to the next positive-probability script
        script = taken.iter().map(|(c, _)| *c).collect();
        let mut level = script.len();
        'advance: loop {
            if level == 0 {
                return Ok(outcomes);
            }
            level -= 1;
            let probs = &taken[level].1.probs;
            let mut next = script[level] + 1;
            while next < probs.len() {
                if probs[next] > 0.0 {
                    script.truncate(level + 1);
                    script[level] = next;
                    break 'advance;
                }
                next += 1;
            }
        }
    }
}
