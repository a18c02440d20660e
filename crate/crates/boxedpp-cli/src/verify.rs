//! Verification battery run by `boxedpp verify`: oracle-scale checks of the
//! chain distributions, transitions, sampler preservation, kernel
//! correlations, and the elliptic identities; one pass/fail line per check.

use boxedpp::chains::{self, TransitionKind};
use boxedpp::elliptic::{macmahon_check, macmahon_zeta_check, EllipticCtx};
use boxedpp::kernel::{kasteleyn_inverse_residual, KernelCtx};
use boxedpp::oracle::{self, ExactDistribution};
use boxedpp::sampler::{self, StepDirection, UpdateOrder};
use boxedpp::weights::{positivity_case, HexagonDims, WeightParams};
use std::collections::HashMap;

pub struct Report {
    pub text: String,
    pub failures: usize,
}

const ORACLE_CAP_ENV: &str = "BOXED_PP_ORACLE_CAP";

fn oracle_cap() -> u128 {
    std::env::var(ORACLE_CAP_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(oracle::DEFAULT_ENUMERATION_CAP)
}

struct Battery {
    text: String,
    failures: usize,
}

impl Battery {
    fn check(&mut self, name: &str, result: Result<f64, String>, tol: f64) {
        match result {
            Ok(v) if v <= tol => {
                self.text.push_str(&format!("PASS {name}: {v:.3e} <= {tol:.1e}\n"));
            }
            Ok(v) => {
                self.failures += 1;
                self.text.push_str(&format!("FAIL {name}: {v:.3e} > {tol:.1e}\n"));
            }
            Err(e) => {
                self.failures += 1;
                self.text.push_str(&format!("FAIL {name}: {e}\n"));
            }
        }
    }
}

pub fn run_battery(params: &WeightParams, dims: &HexagonDims, settings: u32) -> Result<Report, String> {
    let mut b = Battery { text: String::new(), failures: 0 };
    let cap = oracle_cap();

    // parameter admissibility gate
    if let Err(e) = positivity_case(params, dims) {
        return Err(format!("inadmissible parameters: {e}"));
    }
    b.text.push_str(&format!("params {params:?} on {}x{}x{} box\n", dims.a, dims.b, dims.c));

    if !matches!(params, WeightParams::Elliptic { .. }) {
        // counting
        b.check(
            "counting matches the product formula",
            Ok((oracle::count_tilings(dims) as i128 - oracle::macmahon_count(dims.a, dims.b, dims.c) as i128).unsigned_abs() as f64),
            0.0,
        );

        let d = ExactDistribution::new(dims, params, cap).map_err(|e| e.to_string())?;

        // one-dimensional law
        let mut worst: f64 = 0.0;
        for t in 0..=dims.t_max() {
            let marg = d.marginal(t);
            let sm = chains::slice_measure(dims, params, t).map_err(|e| e.to_string())?;
            let tv: f64 = sm
                .configs
                .iter()
                .zip(&sm.probs)
                .map(|(cfg, p)| (marg.get(cfg).copied().unwrap_or(0.0) - p).abs())
                .sum();
            worst = worst.max(tv / 2.0);
        }
        b.check("one-dimensional law vs oracle (TV)", Ok(worst), 1e-10);

        // transition measure preservation
        let mut worst: f64 = 0.0;
        for t in 0..=dims.t_max() {
            for kind in [TransitionKind::TPlus, TransitionKind::TMinus, TransitionKind::SPlus, TransitionKind::SMinus] {
                let (tt, ts) = chains::target_ts(kind, t, dims.s());
                if tt < 0 || tt > dims.t_max() || ts < 0 || ts > dims.t_max() {
                    continue;
                }
                let src = chains::slice_measure_s(dims, params, dims.s(), t).map_err(|e| e.to_string())?;
                let dst = chains::slice_measure_s(dims, params, ts, tt).map_err(|e| e.to_string())?;
                let mut push: HashMap<Vec<i32>, f64> = HashMap::new();
                for (cfg, p) in src.configs.iter().zip(&src.probs) {
                    for (y, pp) in chains::transition_row_s(kind, cfg, t, dims.s(), dims, params)
                        .map_err(|e| e.to_string())?
                        .targets
                    {
                        *push.entry(y).or_insert(0.0) += p * pp;
                    }
                }
                let tv: f64 = dst
                    .configs
                    .iter()
                    .zip(&dst.probs)
                    .map(|(cfg, p)| (push.get(cfg).copied().unwrap_or(0.0) - p).abs())
                    .sum();
                worst = worst.max(tv / 2.0);
            }
        }
        b.check("transition preservation (TV)", Ok(worst), 1e-10);

        // commutation
        let mut worst: f64 = 0.0;
        for t in 1..dims.t_max() {
            worst = worst.max(
                chains::commutation_check(dims, params, t, dims.s()).map_err(|e| e.to_string())?,
            );
        }
        b.check("U-matrix commutation", Ok(worst), 1e-11);

        // sampler push-forward (up step)
        if dims.s() >= 1 {
            let s = dims.s() - 1;
            let src = ExactDistribution::new_s(dims, params, s, cap).map_err(|e| e.to_string())?;
            let dst = ExactDistribution::new_s(dims, params, s + 1, cap).map_err(|e| e.to_string())?;
            let mut push: HashMap<Vec<i32>, f64> = HashMap::new();
            for (x, &px) in src.tilings.iter().zip(&src.probs) {
                for (y, py) in
                    sampler::step_outcomes(x, StepDirection::Up, UpdateOrder::Forward, s, dims, params)
                        .map_err(|e| e.to_string())?
                {
                    *push.entry(y.key()).or_insert(0.0) += px * py;
                }
            }
            let tv: f64 = dst
                .tilings
                .iter()
                .zip(&dst.probs)
                .map(|(t, p)| (push.get(&t.key()).copied().unwrap_or(0.0) - p).abs())
                .sum();
            b.check("sampler push-forward preservation (TV)", Ok(tv / 2.0), 1e-10);
        }

        // kernel correlations (q-families only)
        if matches!(
            params,
            WeightParams::QHahn { .. }
                | WeightParams::QRacah { .. }
                | WeightParams::QRacahTrig { .. }
                | WeightParams::Hahn
                | WeightParams::Racah { .. }
        ) {
            match KernelCtx::new(dims, params) {
                Ok(ctx) => {
                    let mut worst: f64 = 0.0;
                    for t in 0..=dims.t_max() {
                        let (lo, hi) = dims.section(t);
                        for x in lo..=hi {
                            let kr = ctx.correlation(&[(t, x)]);
                            let or = d.point_correlation(&[(t, x)]);
                            worst = worst.max((kr - or).abs());
                        }
                    }
                    b.check("kernel rho1 vs oracle", Ok(worst), 1e-8);
                    if matches!(params, WeightParams::QHahn { .. } | WeightParams::QRacah { .. }) {
                        b.check(
                            "inverse Kasteleyn identity",
                            kasteleyn_inverse_residual(&ctx).map_err(|e| e.to_string()),
                            1e-9,
                        );
                    }
                }
                Err(e) => b.check("kernel construction", Err(e.to_string()), 0.0),
            }
        }
        let _ = settings;
    } else if let WeightParams::Elliptic { p, q, u1, u2 } = *params {
        let ctx = EllipticCtx::new(p, q, u1, u2).map_err(|e| e.to_string())?;
        let (a, bb, c) = (dims.a as usize, dims.b as usize, dims.c as i64);
        let (lhs, rhs, rel) = macmahon_check(&ctx, a, bb, c).map_err(|e| e.to_string())?;
        b.text.push_str(&format!("  elliptic identity: lhs={lhs:.10e} rhs={rhs:.10e}\n"));
        b.check("elliptic product identity", Ok(rel), 1e-10);
        let (_, _, rel) = macmahon_zeta_check(0.7, 3.0, a, bb, c).map_err(|e| e.to_string())?;
        b.check("zeta-degenerate identity", Ok(rel), 1e-10);
    }

    Ok(Report { text: b.text, failures: b.failures })
}
