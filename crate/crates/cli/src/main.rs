//! Command-line driver: parameter reduction, codimension-two search, cycle
//! solving and region growing, bifurcation-set scans, slice diagrams, the
//! reduction-accuracy check, and basin scans.

mod config;
mod spec;

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bcn_core::atlas::{
    basin_scan, write_cells_csv, write_cells_pgm, write_scan_outputs, write_slice_outputs,
    FamilySpec, ScanAxis, ScanBudgets, ScanConfig, ScanParam, SliceConfig, SliceLine,
};
use bcn_core::classify::Budgets2d;
use bcn_core::cycles::{grow_region, solve_cycle, Itinerary, ParamAxis, ParamGrid};
use bcn_core::maps::{NormalFormParams, ParamCoord};
use bcn_core::reduction::{
    closed_form_m2, closed_form_m3_delta_l_zero, locate_reduced_target, period3_saddle_frame,
    reduced_params_generic, NewtonOptions, ReductionSpec,
};
use bcn_core::return_map::verify_theorem1_scaling;
use bcn_core::saddle_data;

use config::{require, resolve, resolve_or, FileConfig};
use spec::{Interval, KvList, RangeSpec, ScalarOrRange};

#[derive(Parser)]
#[command(name = "bcn", version, about = "Bifurcation analysis of the border-collision normal form and its one-dimensional reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the reduced parameters (eta, nu, sigma) at a parameter point.
    ParamsReduce(ParamsReduceArgs),
    /// Newton search for a point where eta = nu = 0 in two free parameters.
    LocateCodim2(LocateArgs),
    /// Solve an S-cycle, or grow its stability region over a grid.
    Cycle(CycleArgs),
    /// Bifurcation set of the planar family over two parameter ranges.
    Scan2d(Scan2dArgs),
    /// Bifurcation set of the reduced family over (eta, nu).
    Scan1d(Scan1dArgs),
    /// One-parameter bifurcation diagram along a slice line.
    Slice(SliceArgs),
    /// Sample the reduction accuracy along a ray into a codimension-two
    /// point and fit the decay exponents.
    VerifyReduction(VerifyArgs),
    /// Classify a grid of initial conditions at one parameter point.
    Basin(BasinArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Flat key=value config file; flags override file entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct BudgetArgs {
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    max_period: Option<usize>,
    #[arg(long)]
    boxcount_len: Option<usize>,
    #[arg(long)]
    n_boxes: Option<usize>,
    #[arg(long)]
    gcd_orbit_len: Option<usize>,
    #[arg(long)]
    gcd_refs: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    gcd_eps: Option<f64>,
    #[arg(long)]
    rho_iters: Option<usize>,
    #[arg(long)]
    compute_rho: bool,
    #[arg(long)]
    coarse: Option<usize>,
    #[arg(long)]
    orbit_budget: Option<usize>,
    #[arg(long)]
    escape_radius: Option<f64>,
}

impl BudgetArgs {
    fn resolve(&self, cfg: &FileConfig) -> Result<ScanBudgets> {
        let d = ScanBudgets::default();
        Ok(ScanBudgets {
            burn_in: resolve_or(self.burn_in, cfg, "burn_in", d.burn_in)?,
            max_period: resolve_or(self.max_period, cfg, "max_period", d.max_period)?,
            recurrence_tol: d.recurrence_tol,
            escape_radius: resolve_or(self.escape_radius, cfg, "escape_radius", d.escape_radius)?,
            gcd_epsilon: resolve_or(self.gcd_eps, cfg, "gcd_eps", d.gcd_epsilon)?,
            gcd_n_refs: resolve_or(self.gcd_refs, cfg, "gcd_refs", d.gcd_n_refs)?,
            gcd_orbit_len: resolve_or(self.gcd_orbit_len, cfg, "gcd_orbit_len", d.gcd_orbit_len)?,
            n_boxes: resolve_or(self.n_boxes, cfg, "n_boxes", d.n_boxes)?,
            boxcount_len: resolve_or(self.boxcount_len, cfg, "boxcount_len", d.boxcount_len)?,
            rho_iters: resolve_or(self.rho_iters, cfg, "rho_iters", d.rho_iters)?,
            compute_rho: self.compute_rho || cfg.get("compute_rho")?.unwrap_or(false),
            coarse: resolve_or(self.coarse, cfg, "coarse", d.coarse)?,
            orbit_budget: resolve_or(self.orbit_budget, cfg, "orbit_budget", d.orbit_budget)?,
        })
    }
}

#[derive(Args, Clone)]
struct ParamsReduceArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long = "tauL", allow_hyphen_values = true)]
    tau_l: Option<f64>,
    #[arg(long = "deltaL", allow_hyphen_values = true)]
    delta_l: Option<f64>,
    #[arg(long = "tauR", allow_hyphen_values = true)]
    tau_r: Option<f64>,
    #[arg(long = "deltaR", allow_hyphen_values = true)]
    delta_r: Option<f64>,
    /// Right-half-plane steps per return for the fixed-point saddle.
    #[arg(long)]
    m: Option<u32>,
    /// Use the period-three (RLR) saddle frame instead.
    #[arg(long)]
    period3: bool,
}

fn fixed_params(
    cfg: &FileConfig,
    tau_l: Option<f64>,
    delta_l: Option<f64>,
    tau_r: Option<f64>,
    delta_r: Option<f64>,
) -> Result<NormalFormParams> {
    Ok(NormalFormParams::new(
        require(tau_l, cfg, "tauL")?,
        require(delta_l, cfg, "deltaL")?,
        require(tau_r, cfg, "tauR")?,
        require(delta_r, cfg, "deltaR")?,
    ))
}

fn cmd_params_reduce(args: ParamsReduceArgs) -> Result<()> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let params = fixed_params(&cfg, args.tau_l, args.delta_l, args.tau_r, args.delta_r)?;
    if args.period3 || cfg.get("period3")?.unwrap_or(false) {
        let frame = period3_saddle_frame(&params)?;
        println!("eta={}", frame.eta);
        println!("nu={}", frame.nu);
        println!("sigma={}", frame.sigma);
        println!("lambda={}", frame.lambda);
        println!("nu_prime={}", frame.nu_prime);
        return Ok(());
    }
    let m = resolve_or(args.m, &cfg, "m", 2)?;
    // The closed forms are exact where they apply; elsewhere iterate.
    let (eta, nu) = if m == 2 {
        closed_form_m2(&params)?
    } else if m == 3 && params.delta_l == 0.0 {
        closed_form_m3_delta_l_zero(&params)?
    } else {
        let (rp, _) = reduced_params_generic(&params, ReductionSpec::FixedPointSaddle { m })?;
        (rp.eta, rp.nu)
    };
    let sd = saddle_data(&params)?;
    let c = if sd.lambda > 0.0 { -sd.lambda.ln() / sd.sigma.ln() } else { f64::INFINITY };
    println!("eta={eta}");
    println!("nu={nu}");
    println!("sigma={}", sd.sigma);
    println!("lambda={}", sd.lambda);
    println!("epsilon={}", eta.abs().max(nu.abs()));
    println!("c={c}");
    Ok(())
}

#[derive(Args, Clone)]
struct LocateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Fixed coordinates, e.g. tauL=2,deltaL=0.75.
    #[arg(long, allow_hyphen_values = true)]
    fix: Option<KvList>,
    /// Initial guess for the two free coordinates, e.g. deltaR=1.4,tauR=-0.45.
    #[arg(long, allow_hyphen_values = true)]
    guess: Option<KvList>,
    /// Target (eta, nu); defaults to the codimension-two point (0, 0).
    #[arg(long, allow_hyphen_values = true)]
    target: Option<KvList>,
    #[arg(long)]
    m: Option<u32>,
}

fn cmd_locate(args: LocateArgs) -> Result<()> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let fix = require(args.fix, &cfg, "fix")?;
    let guess = require(args.guess, &cfg, "guess")?;
    let m = resolve_or(args.m, &cfg, "m", 2)?;
    let mut base = NormalFormParams::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    for (key, value) in &fix.0 {
        base = base.with(ParamCoord::parse(key)?, *value);
    }
    let [(k1, g1), (k2, g2)] = guess.exactly_two()?;
    let free = [ParamCoord::parse(&k1)?, ParamCoord::parse(&k2)?];
    let mut target = [0.0, 0.0];
    if let Some(t) = args.target {
        for (key, value) in &t.0 {
            match key.as_str() {
                "eta" => target[0] = *value,
                "nu" => target[1] = *value,
                other => bail!("target keys are eta and nu, got `{other}`"),
            }
        }
    }
    let found =
        locate_reduced_target(&base, free, m, [g1, g2], target, NewtonOptions::default())?;
    let (rp, _) = reduced_params_generic(&found, ReductionSpec::FixedPointSaddle { m })?;
    println!("tauL={}", found.tau_l);
    println!("deltaL={}", found.delta_l);
    println!("tauR={}", found.tau_r);
    println!("deltaR={}", found.delta_r);
    println!("eta={}", rp.eta);
    println!("nu={}", rp.nu);
    println!(
        "residual={}",
        (rp.eta - target[0]).abs().max((rp.nu - target[1]).abs())
    );
    Ok(())
}

#[derive(Args, Clone)]
struct CycleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Itinerary, e.g. L8R2 or LLLLLLLLRR.
    #[arg(long)]
    word: Option<String>,
    /// Scalar fixes the parameter; min:max:cells makes it a grid axis.
    #[arg(long = "tauL", allow_hyphen_values = true)]
    tau_l: Option<ScalarOrRange>,
    #[arg(long = "deltaL", allow_hyphen_values = true)]
    delta_l: Option<ScalarOrRange>,
    #[arg(long = "tauR", allow_hyphen_values = true)]
    tau_r: Option<ScalarOrRange>,
    #[arg(long = "deltaR", allow_hyphen_values = true)]
    delta_r: Option<ScalarOrRange>,
    /// Seed parameter point(s) for region growing, e.g. deltaR=1.43,tauR=-0.48.
    #[arg(long, allow_hyphen_values = true)]
    seed_at: Vec<KvList>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn scalar_or_range(
    cfg: &FileConfig,
    flag: Option<ScalarOrRange>,
    key: &str,
) -> Result<ScalarOrRange> {
    require(flag, cfg, key)
}

fn cmd_cycle(args: CycleArgs) -> Result<()> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let word: String = require(args.word, &cfg, "word")?;
    let itin = Itinerary::parse(&word)?;
    let values = [
        (ParamCoord::TauL, scalar_or_range(&cfg, args.tau_l, "tauL")?),
        (ParamCoord::DeltaL, scalar_or_range(&cfg, args.delta_l, "deltaL")?),
        (ParamCoord::TauR, scalar_or_range(&cfg, args.tau_r, "tauR")?),
        (ParamCoord::DeltaR, scalar_or_range(&cfg, args.delta_r, "deltaR")?),
    ];
    let mut base = NormalFormParams::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    let mut axes: Vec<(ParamCoord, RangeSpec)> = Vec::new();
    for (coord, value) in values {
        match value {
            ScalarOrRange::Scalar(v) => base = base.with(coord, v),
            ScalarOrRange::Range(r) => axes.push((coord, r)),
        }
    }
    match axes.len() {
        0 => {
            let sol = solve_cycle(&base, &itin)?;
            println!("word={itin} period={}", itin.len());
            for (i, p) in sol.points.iter().enumerate() {
                println!("point[{i}]=({}, {})", p.x, p.y);
            }
            for mu in &sol.multipliers {
                println!("multiplier={}+{}i |mu|={}", mu.re, mu.im, mu.norm());
            }
            println!("admissible={} stable={}", sol.admissible, sol.stable);
            Ok(())
        }
        2 => {
            let grid = ParamGrid {
                base,
                axis1: ParamAxis {
                    coord: axes[0].0,
                    min: axes[0].1.min,
                    max: axes[0].1.max,
                    n_cells: axes[0].1.n,
                },
                axis2: ParamAxis {
                    coord: axes[1].0,
                    min: axes[1].1.min,
                    max: axes[1].1.max,
                    n_cells: axes[1].1.n,
                },
            };
            let mut seeds = Vec::new();
            for kv in &args.seed_at {
                let mut cell = (grid.axis1.n_cells / 2, grid.axis2.n_cells / 2);
                for (key, value) in &kv.0 {
                    let coord = ParamCoord::parse(key)?;
                    if coord == grid.axis1.coord {
                        cell.0 = grid.axis1.cell_of(*value);
                    } else if coord == grid.axis2.coord {
                        cell.1 = grid.axis2.cell_of(*value);
                    } else {
                        bail!("seed key {key} is not a grid axis");
                    }
                }
                seeds.push(cell);
            }
            if seeds.is_empty() {
                seeds.push((grid.axis1.n_cells / 2, grid.axis2.n_cells / 2));
            }
            let mask = grow_region(&grid, &itin, &seeds);
            let out = args.out.context("region growing needs --out")?;
            std::fs::create_dir_all(&out)?;
            let mut csv = String::from("axis1,axis2,stable\n");
            for j in 0..grid.axis2.n_cells {
                for i in 0..grid.axis1.n_cells {
                    csv.push_str(&format!(
                        "{},{},{}\n",
                        grid.axis1.center(i),
                        grid.axis2.center(j),
                        mask.get(i, j) as u8
                    ));
                }
            }
            std::fs::write(out.join("mask.csv"), csv)?;
            let meta = serde_json::json!({
                "config": {
                    "word": itin.to_string(),
                    "base": base,
                    "axis1": {"param": grid.axis1.coord.name(), "min": grid.axis1.min,
                              "max": grid.axis1.max, "n_cells": grid.axis1.n_cells},
                    "axis2": {"param": grid.axis2.coord.name(), "min": grid.axis2.min,
                              "max": grid.axis2.max, "n_cells": grid.axis2.n_cells},
                    "seeds": seeds,
                },
                "seed": serde_json::Value::Null,
                "resolution": [grid.axis1.n_cells, grid.axis2.n_cells],
                "runtime_seconds": serde_json::Value::Null,
                "version": env!("CARGO_PKG_VERSION"),
            });
            std::fs::write(out.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
            println!("cells={} stable_cells={}", mask.cells.len(), mask.count());
            Ok(())
        }
        n => bail!("exactly zero or two parameters may be ranges, got {n}"),
    }
}

#[derive(Args, Clone)]
struct Scan2dArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    budgets: BudgetArgs,
    #[arg(long = "tauL", allow_hyphen_values = true)]
    tau_l: Option<ScalarOrRange>,
    #[arg(long = "deltaL", allow_hyphen_values = true)]
    delta_l: Option<ScalarOrRange>,
    #[arg(long = "tauR", allow_hyphen_values = true)]
    tau_r: Option<ScalarOrRange>,
    #[arg(long = "deltaR", allow_hyphen_values = true)]
    delta_r: Option<ScalarOrRange>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_scan_2d(args: Scan2dArgs) -> Result<()> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let values = [
        (ScanParam::TauL, scalar_or_range(&cfg, args.tau_l, "tauL")?),
        (ScanParam::DeltaL, scalar_or_range(&cfg, args.delta_l, "deltaL")?),
        (ScanParam::TauR, scalar_or_range(&cfg, args.tau_r, "tauR")?),
        (ScanParam::DeltaR, scalar_or_range(&cfg, args.delta_r, "deltaR")?),
    ];
    let mut base = NormalFormParams::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    let mut axes = Vec::new();
    for (param, value) in values {
        match value {
            ScalarOrRange::Scalar(v) => match param {
                ScanParam::TauL => base.tau_l = v,
                ScanParam::DeltaL => base.delta_l = v,
                ScanParam::TauR => base.tau_r = v,
                ScanParam::DeltaR => base.delta_r = v,
                _ => unreachable!(),
            },
            ScalarOrRange::Range(r) => {
                axes.push(ScanAxis { param, min: r.min, max: r.max, n_cells: r.n })
            }
        }
    }
    if axes.len() != 2 {
        bail!("exactly two of tauL, deltaL, tauR, deltaR must be ranges");
    }
    let config = ScanConfig {
        family: FamilySpec::TwoD { base, m: resolve_or(args.m, &cfg, "m", 2)? },
        axis1: axes[0],
        axis2: axes[1],
        budgets: args.budgets.resolve(&cfg)?,
        seed: resolve_or(args.seed, &cfg, "seed", 0)?,
        n_workers: resolve_or(args.workers, &cfg, "workers", 0)?,
    };
    let result = bcn_core::atlas::scan(&config)?;
    let out = require(args.out, &cfg, "out")?;
    write_scan_outputs(&out, &result)?;
    println!(
        "cells={} runtime_seconds={} out={}",
        result.cells.len(),
        result.runtime_seconds,
        out.display()
    );
    Ok(())
}

#[derive(Args, Clone)]
struct Scan1dArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    budgets: BudgetArgs,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<RangeSpec>,
    #[arg(long, allow_hyphen_values = true)]
    nu: Option<RangeSpec>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_scan_1d(args: Scan1dArgs) -> Result<()> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let eta = require(args.eta, &cfg, "eta")?;
    let nu = require(args.nu, &cfg, "nu")?;
    let config = ScanConfig {
        family: FamilySpec::OneD { sigma: require(args.sigma, &cfg, "sigma")? },
        axis1: ScanAxis { param: ScanParam::Eta, min: eta.min, max: eta.max, n_cells: eta.n },
        axis2: ScanAxis { param: ScanParam::Nu, min: nu.min, max: nu.max, n_cells: nu.n },
        budgets: args.budgets.resolve(&cfg)?,
        seed: resolve_or(args.seed, &cfg, "seed", 0)?,
        n_workers: resolve_or(args.workers, &cfg, "workers", 0)?,
    };
    let result = bcn_core::atlas::scan(&config)?;
    let out = require(args.out, &cfg, "out")?;
    write_scan_outputs(&out, &result)?;
    println!(
        "cells={} runtime_seconds={} out={}",
        result.cells.len(),
        result.runtime_seconds,
        out.display()
    );
    Ok(())
}

#[derive(Args, Clone)]
struct SliceArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    budgets: BudgetArgs,
    /// 1d or 2d.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Slope nu/eta for a reduced-family ray slice.
    #[arg(long, allow_hyphen_values = true)]
    ratio: Option<f64>,
    /// eta range lo:hi for a ratio slice.
    #[arg(long)]
    eta_range: Option<Interval>,
    /// Segment start, e.g. deltaR=1.43,tauR=-0.49 (2d) or eta=0.03,nu=0.05 (1d).
    #[arg(long, allow_hyphen_values = true)]
    from: Option<KvList>,
    /// Segment end, same keys as --from.
    #[arg(long, allow_hyphen_values = true)]
    to: Option<KvList>,
    #[arg(long = "tauL", allow_hyphen_values = true)]
    tau_l: Option<f64>,
    #[arg(long = "deltaL", allow_hyphen_values = true)]
    delta_l: Option<f64>,
    #[arg(long = "tauR", allow_hyphen_values = true)]
    tau_r: Option<f64>,
    #[arg(long = "deltaR", allow_hyphen_values = true)]
    delta_r: Option<f64>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    support: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn scan_param_of(key: &str) -> Result<ScanParam> {
    Ok(match key {
        "tauL" => ScanParam::TauL,
        "deltaL" => ScanParam::DeltaL,
        "tauR" => ScanParam::TauR,
        "deltaR" => ScanParam::DeltaR,
        "eta" => ScanParam::Eta,
        "nu" => ScanParam::Nu,
        other => bail!("unknown parameter `{other}`"),
    })
}

fn segment_line(from: &KvList, to: &KvList) -> Result<SliceLine> {
    let [(ka, va), (kb, vb)] = from.exactly_two()?;
    let [(ka2, va2), (kb2, vb2)] = to.exactly_two()?;
    if ka != ka2 || kb != kb2 {
        bail!("--from and --to must use the same keys in the same order");
    }
    Ok(SliceLine::Segment {
        axes: (scan_param_of(&ka)?, scan_param_of(&kb)?),
        from: (va, vb),
        to: (va2, vb2),
    })
}

fn cmd_slice(args: SliceArgs) -> Result<()> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let family: String = resolve_or(args.family.clone(), &cfg, "family", "1d".into())?;
    let (family, line) = match family.as_str() {
        "1d" => {
            let sigma = require(args.sigma, &cfg, "sigma")?;
            let line = if let (Some(from), Some(to)) = (&args.from, &args.to) {
                segment_line(from, to)?
            } else {
                let ratio = require(args.ratio, &cfg, "ratio")?;
                let range: Interval = require(args.eta_range, &cfg, "eta_range")?;
                SliceLine::Ratio { nu_over_eta: ratio, eta_min: range.lo, eta_max: range.hi }
            };
            (FamilySpec::OneD { sigma }, line)
        }
        "2d" => {
            let base = fixed_params_partial(
                &cfg,
                args.tau_l,
                args.delta_l,
                args.tau_r,
                args.delta_r,
            )?;
            let from = require(args.from.clone(), &cfg, "from")?;
            let to = require(args.to.clone(), &cfg, "to")?;
            (
                FamilySpec::TwoD { base, m: resolve_or(args.m, &cfg, "m", 2)? },
                segment_line(&from, &to)?,
            )
        }
        other => bail!("family must be 1d or 2d, got `{other}`"),
    };
    let config = SliceConfig {
        family,
        line,
        n_points: resolve_or(args.points, &cfg, "points", 200)?,
        budgets: args.budgets.resolve(&cfg)?,
        seed: resolve_or(args.seed, &cfg, "seed", 0)?,
        max_support: resolve_or(args.support, &cfg, "support", 200)?,
        n_workers: resolve_or(args.workers, &cfg, "workers", 0)?,
    };
    let result = bcn_core::atlas::slice_diagram(&config)?;
    let out = require(args.out, &cfg, "out")?;
    write_slice_outputs(&out, &result)?;
    println!("points={} out={}", result.points.len(), out.display());
    Ok(())
}

/// Like `fixed_params` but missing coordinates stay NaN (they may be slice
/// axes).
fn fixed_params_partial(
    cfg: &FileConfig,
    tau_l: Option<f64>,
    delta_l: Option<f64>,
    tau_r: Option<f64>,
    delta_r: Option<f64>,
) -> Result<NormalFormParams> {
    Ok(NormalFormParams::new(
        resolve(tau_l, cfg, "tauL")?.unwrap_or(f64::NAN),
        resolve(delta_l, cfg, "deltaL")?.unwrap_or(f64::NAN),
        resolve(tau_r, cfg, "tauR")?.unwrap_or(f64::NAN),
        resolve(delta_r, cfg, "deltaR")?.unwrap_or(f64::NAN),
    ))
}

#[derive(Args, Clone)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long = "tauL", allow_hyphen_values = true)]
    tau_l: Option<f64>,
    #[arg(long = "deltaL", allow_hyphen_values = true)]
    delta_l: Option<f64>,
    #[arg(long = "tauR", allow_hyphen_values = true)]
    tau_r: Option<f64>,
    #[arg(long = "deltaR", allow_hyphen_values = true)]
    delta_r: Option<f64>,
    /// Codimension-two target point in the two ray coordinates.
    #[arg(long, allow_hyphen_values = true)]
    target: Option<KvList>,
    /// Ray direction in the same two coordinates.
    #[arg(long, allow_hyphen_values = true)]
    dir: Option<KvList>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    factor: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let base =
        fixed_params_partial(&cfg, args.tau_l, args.delta_l, args.tau_r, args.delta_r)?;
    let target = require(args.target, &cfg, "target")?;
    let dir = require(args.dir, &cfg, "dir")?;
    let [(kt1, vt1), (kt2, vt2)] = target.exactly_two()?;
    let [(kd1, vd1), (kd2, vd2)] = dir.exactly_two()?;
    if kt1 != kd1 || kt2 != kd2 {
        bail!("--target and --dir must use the same keys in the same order");
    }
    let c1 = ParamCoord::parse(&kt1)?;
    let c2 = ParamCoord::parse(&kt2)?;
    let anchor = base.with(c1, vt1).with(c2, vt2);
    let m = resolve_or(args.m, &cfg, "m", 2)?;
    let n_points = resolve_or(args.points, &cfg, "points", 6)?;
    let t0 = resolve_or(args.t0, &cfg, "t0", 1.0)?;
    let factor = resolve_or(args.factor, &cfg, "factor", 0.5)?;
    let samples = resolve_or(args.samples, &cfg, "samples", 100_000)?;
    let seed = resolve_or(args.seed, &cfg, "seed", 0)?;
    let ray = bcn_core::return_map::geometric_ray(
        &anchor,
        (c1, vd1),
        (c2, vd2),
        t0,
        factor,
        n_points,
    );
    let fit = verify_theorem1_scaling(&ray, m, samples, seed)?;
    println!("point epsilon fraction_outside sup_error");
    for (i, p) in fit.points.iter().enumerate() {
        println!("{i} {} {} {}", p.epsilon, p.fraction_outside, p.sup_error);
    }
    println!("c_expected={}", fit.c_expected);
    match fit.error_slope {
        Some(s) => println!("error_slope={s}"),
        None => println!("error_slope=exact"),
    }
    println!("fraction_slope={}", fit.fraction_slope);
    if let Some(out) = args.out {
        std::fs::create_dir_all(&out)?;
        let mut csv = String::from("epsilon,fraction_outside,sup_error\n");
        for p in &fit.points {
            csv.push_str(&format!("{},{},{}\n", p.epsilon, p.fraction_outside, p.sup_error));
        }
        std::fs::write(out.join("ray.csv"), csv)?;
    }
    Ok(())
}

#[derive(Args, Clone)]
struct BasinArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    budgets: BudgetArgs,
    #[arg(long = "tauL", allow_hyphen_values = true)]
    tau_l: Option<f64>,
    #[arg(long = "deltaL", allow_hyphen_values = true)]
    delta_l: Option<f64>,
    #[arg(long = "tauR", allow_hyphen_values = true)]
    tau_r: Option<f64>,
    #[arg(long = "deltaR", allow_hyphen_values = true)]
    delta_r: Option<f64>,
    /// Initial-condition grid in x, min:max:cells.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<RangeSpec>,
    /// Initial-condition grid in y, min:max:cells.
    #[arg(long, allow_hyphen_values = true)]
    y: Option<RangeSpec>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_basin(args: BasinArgs) -> Result<()> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let params = fixed_params(&cfg, args.tau_l, args.delta_l, args.tau_r, args.delta_r)?;
    let x = require(args.x, &cfg, "x")?;
    let y = require(args.y, &cfg, "y")?;
    let scan_budgets = args.budgets.resolve(&cfg)?;
    let budgets = Budgets2d {
        burn_in: scan_budgets.burn_in,
        max_period: scan_budgets.max_period,
        recurrence_tol: scan_budgets.recurrence_tol,
        escape_radius: scan_budgets.escape_radius,
        gcd: bcn_core::classify::GcdConfig {
            epsilon: scan_budgets.gcd_epsilon,
            n_refs: scan_budgets.gcd_n_refs,
            orbit_len: scan_budgets.gcd_orbit_len,
            burn_in: scan_budgets.burn_in,
        },
    };
    let workers = resolve_or(args.workers, &cfg, "workers", 0)?;
    let cells = basin_scan(
        &params,
        (x.min, x.max, x.n),
        (y.min, y.max, y.n),
        &budgets,
        workers,
    )?;
    let out = require(args.out, &cfg, "out")?;
    std::fs::create_dir_all(&out)?;
    let mut csv = std::io::BufWriter::new(std::fs::File::create(out.join("grid.csv"))?);
    write_cells_csv(&mut csv, &cells)?;
    let mut pgm = std::io::BufWriter::new(std::fs::File::create(out.join("grid.pgm"))?);
    write_cells_pgm(&mut pgm, x.n, y.n, &cells)?;
    let meta = serde_json::json!({
        "config": {"params": params, "x": [x.min, x.max, x.n], "y": [y.min, y.max, y.n]},
        "seed": serde_json::Value::Null,
        "resolution": [x.n, y.n],
        "runtime_seconds": serde_json::Value::Null,
        "version": env!("CARGO_PKG_VERSION"),
    });
    std::fs::write(out.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    println!("cells={} out={}", cells.len(), out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::ParamsReduce(args) => cmd_params_reduce(args),
        Command::LocateCodim2(args) => cmd_locate(args),
        Command::Cycle(args) => cmd_cycle(args),
        Command::Scan2d(args) => cmd_scan_2d(args),
        Command::Scan1d(args) => cmd_scan_1d(args),
        Command::Slice(args) => cmd_slice(args),
        Command::VerifyReduction(args) => cmd_verify(args),
        Command::Basin(args) => cmd_basin(args),
    }
}

// Silences a false unused warning: `anyhow!` is used inside spec.rs parsers.
use anyhow as _;
