//! Command-line front door wiring the library to files: exact sampling,
//! SVG rendering, the verification battery, frozen-boundary tracing, and
//! density maps.

mod svg;
mod verify;

use boxedpp::asymptotics::{self, ScaledGeometry, ScaledWeight};
use boxedpp::kernel::KernelCtx;
use boxedpp::oracle::Tiling;
use boxedpp::sampler;
use boxedpp::weights::{parse_config_str, positivity_case, HexagonDims, WeightParams};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "boxedpp", about = "Exact sampling and analysis of boxed plane partitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct ParamArgs {
    /// Config file with key = value lines (flags take precedence)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Weight family: hahn | racah | qhahn | qracah | trig | elliptic
    #[arg(long)]
    family: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    q: Option<f64>,
    #[arg(long = "kappa-sq", allow_negative_numbers = true)]
    kappa_sq: Option<f64>,
    /// Racah parameter K
    #[arg(long = "K", allow_negative_numbers = true)]
    k: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Elliptic nome p
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    u1: Option<f64>,
    #[arg(long)]
    u2: Option<f64>,
    #[arg(long)]
    a: Option<u32>,
    #[arg(long)]
    b: Option<u32>,
    #[arg(long)]
    c: Option<u32>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<(WeightParams, HexagonDims), String> {
        // precedence: flags > config file > defaults
        let mut family = self.family.clone();
        let mut q = self.q;
        let mut kappa_sq = self.kappa_sq;
        let mut k = self.k;
        let mut alpha = self.alpha;
        let mut beta = self.beta;
        let mut p = self.p;
        let mut u1 = self.u1;
        let mut u2 = self.u2;
        let (mut a, mut b, mut c) = (self.a, self.b, self.c);
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
            let (params, dims, _) = parse_config_str(&text).map_err(|e| e.to_string())?;
            if family.is_none() {
                family = Some(
                    match params {
                        WeightParams::Hahn => "hahn",
                        WeightParams::Racah { .. } => "racah",
                        WeightParams::QHahn { .. } => "qhahn",
                        WeightParams::QRacah { .. } => "qracah",
                        WeightParams::QRacahTrig { .. } => "trig",
                        WeightParams::Elliptic { .. } => "elliptic",
                    }
                    .to_string(),
                );
            }
            match params {
                WeightParams::Racah { k: kv } => k = k.or(Some(kv)),
                WeightParams::QHahn { q: qv } => q = q.or(Some(qv)),
                WeightParams::QRacah { q: qv, kappa_sq: kv } => {
                    q = q.or(Some(qv));
                    kappa_sq = kappa_sq.or(Some(kv));
                }
                WeightParams::QRacahTrig { alpha: av, beta: bv } => {
                    alpha = alpha.or(Some(av));
                    beta = beta.or(Some(bv));
                }
                WeightParams::Elliptic { p: pv, q: qv, u1: u1v, u2: u2v } => {
                    p = p.or(Some(pv));
                    q = q.or(Some(qv));
                    u1 = u1.or(Some(u1v));
                    u2 = u2.or(Some(u2v));
                }
                WeightParams::Hahn => {}
            }
            a = a.or(Some(dims.a));
            b = b.or(Some(dims.b));
            c = c.or(Some(dims.c));
        }
        let family = family.unwrap_or_else(|| "hahn".to_string());
        let need = |v: Option<f64>, name: &str| v.ok_or(format!("missing --{name}"));
        let params = match family.as_str() {
            "hahn" => WeightParams::Hahn,
            "racah" => WeightParams::Racah { k: need(k, "K")? },
            "qhahn" | "q-hahn" => WeightParams::QHahn { q: need(q, "q")? },
            "qracah" | "q-racah" => WeightParams::QRacah {
                q: need(q, "q")?,
                kappa_sq: need(kappa_sq, "kappa-sq")?,
            },
            "trig" | "qracah-trig" => WeightParams::QRacahTrig {
                alpha: need(alpha, "alpha")?,
                beta: need(beta, "beta")?,
            },
            "elliptic" => WeightParams::Elliptic {
                p: need(p, "p")?,
                q: need(q, "q")?,
                u1: need(u1, "u1")?,
                u2: need(u2, "u2")?,
            },
            other => return Err(format!("unknown family '{other}'")),
        };
        let dims = HexagonDims::new(
            a.ok_or("missing --a")?,
            b.ok_or("missing --b")?,
            c.ok_or("missing --c")?,
        )
        .map_err(|e| e.to_string())?;
        Ok((params, dims))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw exact samples and write them in the tiling line format
    Sample {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        samples: u64,
        /// Output path (directory gets one file per sample; single sample may
        /// be a file path); defaults to stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write an SVG rendering next to each sample
        #[arg(long)]
        svg: bool,
        /// Write a per-step block/draw trace next to each sample
        #[arg(long)]
        trace: bool,
    },
    /// Render a tiling file (line format) as SVG
    Render {
        #[command(flatten)]
        params: ParamArgs,
        /// Tiling file in the line format
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification battery at oracle scale
    Verify {
        #[command(flatten)]
        params: ParamArgs,
        /// Random parameter settings per family in the battery
        #[arg(long, default_value_t = 2)]
        settings: u32,
    },
    /// Trace the frozen boundary of the scaled hexagon
    Boundary {
        #[command(flatten)]
        params: ParamArgs,
        /// Grid resolution of the tracer
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write an SVG overlay of the boundary on the hexagon
        #[arg(long)]
        svg: bool,
    },
    /// Density maps: finite-size kernel density or scaled proportions
    Density {
        #[command(flatten)]
        params: ParamArgs,
        /// Emit the scaled (p1, p2, p3, phi) map instead of the finite-size
        /// kernel density
        #[arg(long)]
        scaled: bool,
        /// Grid resolution of the scaled map
        #[arg(long, default_value_t = 50)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn scaled_geometry(params: &WeightParams, dims: &HexagonDims) -> Result<ScaledGeometry, String> {
    // mesh 1/N keeps the scaled box at (1, T/N, S/N); the base is read as
    // q = qs^(1/N)
    let eps = 1.0 / dims.n() as f64;
    let weight = match *params {
        WeightParams::QHahn { q } => ScaledWeight::Real { q: q.powf(1.0 / eps), kappa_sq: 0.0 },
        WeightParams::QRacah { q, kappa_sq } => {
            ScaledWeight::Real { q: q.powf(1.0 / eps), kappa_sq }
        }
        WeightParams::QRacahTrig { alpha, beta } => {
            ScaledWeight::Trig { alpha: alpha / eps, beta }
        }
        WeightParams::Racah { k } => {
            // Racah-scale surrogate: kappa^2 = qs^(2 K / N) with a reference
            // base near one
            let qs = 0.9f64;
            ScaledWeight::Real { q: qs, kappa_sq: qs.powf(2.0 * k * eps) }
        }
        _ => return Err("boundary/density require an orthogonal-polynomial family".to_string()),
    };
    ScaledGeometry::new(
        1.0,
        dims.t_max() as f64 * eps,
        dims.s() as f64 * eps,
        weight,
    )
    .map_err(|e| e.to_string())
}

fn write_or_print(out: &Option<PathBuf>, name: &str, content: &str) -> Result<(), String> {
    match out {
        Some(path) => {
            let target = if path.is_dir() { path.join(name) } else { path.clone() };
            std::fs::write(&target, content).map_err(|e| e.to_string())?;
            eprintln!("wrote {}", target.display());
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Sample { params, seed, samples, out, svg: with_svg, trace } => {
            let (params, dims) = params.resolve()?;
            positivity_case(&params, &dims).map_err(|e| e.to_string())?;
            for idx in 0..samples {
                let sample_seed = seed.wrapping_add(idx);
                let (tiling, trace_log) =
                    sample_with_trace(&dims, &params, sample_seed, trace).map_err(|e| e.to_string())?;
                let base = format!("sample_{sample_seed:08}");
                write_or_print(&out, &format!("{base}.txt"), &tiling.to_lines())?;
                if with_svg {
                    let svg_text = svg::render_tiling(&tiling, &dims, 12.0);
                    write_or_print(&out, &format!("{base}.svg"), &svg_text)?;
                }
                if trace {
                    write_or_print(&out, &format!("{base}.trace"), &trace_log)?;
                }
            }
            Ok(())
        }
        Command::Render { params, input, out } => {
            let (_, dims) = params.resolve()?;
            let text = std::fs::read_to_string(&input).map_err(|e| e.to_string())?;
            let tiling = Tiling::from_lines(&text).map_err(|e| e.to_string())?;
            tiling.validate(&dims).map_err(|e| e.to_string())?;
            let svg_text = svg::render_tiling(&tiling, &dims, 12.0);
            write_or_print(&out, "tiling.svg", &svg_text)
        }
        Command::Verify { params, settings } => {
            let (params, dims) = params.resolve()?;
            let report = verify::run_battery(&params, &dims, settings)?;
            print!("{}", report.text);
            if report.failures == 0 {
                Ok(())
            } else {
                Err(format!("{} verification check(s) failed", report.failures))
            }
        }
        Command::Boundary { params, grid, out, svg: with_svg } => {
            let (params, dims) = params.resolve()?;
            let geom = scaled_geometry(&params, &dims)?;
            match asymptotics::frozen_boundary(&geom, grid) {
                Ok(boundary) => {
                    let csv = asymptotics::boundary_csv(&boundary);
                    write_or_print(&out, "boundary.csv", &csv)?;
                    eprintln!(
                        "boundary: {} loop(s), {} node(s); side tangency residuals: {:?}",
                        boundary.loops.len() - 1,
                        boundary.nodes.len(),
                        boundary.tangency
                    );
                    if !boundary.nodes.is_empty() {
                        eprintln!("nodes at: {:?}", boundary.nodes);
                    }
                    if with_svg {
                        let svg_text = svg::render_boundary(
                            &geom.sides(),
                            &boundary.points,
                            &boundary.loops,
                            250.0,
                        );
                        write_or_print(&out, "boundary.svg", &svg_text)?;
                    }
                    Ok(())
                }
                Err(boxedpp::Error::TracerFailed { message, partial }) => {
                    let mut csv = String::from("t,x\n");
                    for (t, x) in &partial {
                        csv.push_str(&format!("{t:.9},{x:.9}\n"));
                    }
                    write_or_print(&out, "boundary_partial.csv", &csv)?;
                    Err(format!("tracer failed: {message} (partial trace written)"))
                }
                Err(e) => Err(e.to_string()),
            }
        }
        Command::Density { params, scaled, grid, out } => {
            let (params, dims) = params.resolve()?;
            if scaled {
                let geom = scaled_geometry(&params, &dims)?;
                let csv = asymptotics::density_csv(&geom, grid).map_err(|e| e.to_string())?;
                write_or_print(&out, "density_scaled.csv", &csv)
            } else {
                let ctx = KernelCtx::new(&dims, &params).map_err(|e| e.to_string())?;
                let csv = boxedpp::kernel::density_csv(&ctx);
                write_or_print(&out, "density.csv", &csv)
            }
        }
    }
}

fn sample_with_trace(
    dims: &HexagonDims,
    params: &WeightParams,
    seed: u64,
    want_trace: bool,
) -> boxedpp::Result<(Tiling, String)> {
    let mut state = sampler::SamplerState::new(dims, params, seed)?;
    let mut log = String::new();
    for _ in 0..dims.s() {
        let entries = state.step_traced(sampler::StepDirection::Up)?;
        if want_trace {
            for e in entries {
                log.push_str(&format!(
                    "S={} t={} block=({},{}) xi={}\n",
                    e.s, e.t, e.block_start, e.block_len, e.xi
                ));
            }
        }
    }
    Ok((state.current, log))
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
