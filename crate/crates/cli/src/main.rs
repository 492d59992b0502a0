//! `critineq` command line: constants, ground states and verification runs
//! with JSON/CSV reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use critineq::constants::{certified_c1, default_q_grid, trudinger_alpha_threshold, ConstantsReport, GNParams};
use critineq::discretization::{Field, PeriodicGrid};
use critineq::ground_state::{solve, solve_line, Method, SolverConfig, VariationalProblem};
use critineq::rational_line::RationalLine;
use critineq::group_model::{GroupDescriptor, GroupName};
use critineq::heisenberg::{empirical_gn_ratio_h1, gaussian_family, HeisenbergGrid};
use critineq::spectral::SpectralOperator;
use critineq::verifier::{
    gn_q_grid, verify_bgw, verify_bw_set, verify_gn, verify_holder, verify_trudinger, TestFamily, VerificationReport,
};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "critineq", version, about = "Critical GN / Trudinger / BGW constants and numerical checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form constants for (p, q, group).
    Constants(ConstantsArgs),
    /// Least-energy ground state on a periodic box or on the line.
    GroundState(GroundStateArgs),
    /// Empirical verification of one inequality.
    #[command(subcommand)]
    Verify(Verify),
    /// Summarise previously written reports.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct Output {
    /// JSON report path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV dump of the per-sample ratios.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Worker threads; defaults to CRITINEQ_WORKERS or the core count.
    #[arg(long, env = "CRITINEQ_WORKERS")]
    workers: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Problem {
    #[arg(long, default_value = "euclidean2")]
    group: String,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 4.0)]
    q: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct GridArgs {
    /// Points per axis.
    #[arg(long = "N", default_value_t = 128)]
    n: usize,
    /// Box side length.
    #[arg(long = "L", default_value_t = 20.0)]
    l: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ConstantsArgs {
    #[command(flatten)]
    problem: Problem,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, Clone, Serialize)]
struct GroundStateArgs {
    #[command(flatten)]
    problem: Problem,
    #[command(flatten)]
    grid: GridArgs,
    /// Solve even when p > Q/γ; the result is flagged.
    #[arg(long)]
    beyond_hypothesis: bool,
    /// `periodic` (box of side L) or `line` (rational basis on ℝ; euclidean1, p = 2 only).
    #[arg(long, default_value = "periodic", value_parser = ["periodic", "line"])]
    basis: String,
    /// Map scale of the rational basis.
    #[arg(long, default_value_t = 1.0)]
    map_scale: f64,
    #[arg(long, value_parser = parse_method, default_value = "auto")]
    #[serde(skip)]
    method: Method,
    #[arg(long)]
    tol_pde: Option<f64>,
    /// Raw field dump (little-endian f64 plus JSON sidecar).
    #[arg(long)]
    field_out: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    match s {
        "auto" => Ok(Method::Auto),
        "petviashvili" => Ok(Method::Petviashvili),
        "cg" | "conjugate-gradient" => Ok(Method::ConjugateGradient),
        _ => Err(format!("unknown method {s:?} (auto, petviashvili, cg)")),
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct FamilyArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    count: usize,
    /// Smallest scale (cutoff index, width or radius).
    #[arg(long, default_value_t = 2.0)]
    scale_min: f64,
    #[arg(long, default_value_t = 16.0)]
    scale_max: f64,
}

#[derive(Subcommand, Debug)]
enum Verify {
    /// Critical GN ratios against the certified C₁ (heisenberg1: plateau rule).
    Gn {
        #[command(flatten)]
        problem: Problem,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        output: Output,
    },
    /// Trudinger inequality at α (or a fraction of the convergence threshold).
    Trudinger {
        #[command(flatten)]
        problem: Problem,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        alpha_fraction: f64,
        #[command(flatten)]
        output: Output,
    },
    /// BGW plateau check on a frequency-doubling family.
    Bgw {
        #[command(flatten)]
        problem: Problem,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        a: f64,
        #[arg(long = "q-param", default_value_t = 2.0)]
        q_param: f64,
        #[arg(long, default_value_t = 3)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 2.0)]
        k0: f64,
        #[arg(long, default_value_t = 1.0)]
        decay: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Set estimate over origin-centred balls.
    Bw {
        #[command(flatten)]
        problem: Problem,
        #[command(flatten)]
        grid: GridArgs,
        /// gaussian or bump.
        #[arg(long, default_value = "gaussian")]
        profile: String,
        #[arg(long, default_value_t = 1.0)]
        width: f64,
        #[arg(long, default_value_t = 1e-6)]
        measure_min: f64,
        #[arg(long, default_value_t = 10.0)]
        measure_max: f64,
        #[arg(long, default_value_t = 29)]
        radii: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Hölder seminorm of Riesz potentials, stable under pair doubling.
    Holder {
        #[command(flatten)]
        problem: Problem,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 50_000)]
        pairs: usize,
        #[arg(long, default_value_t = 0.05)]
        stability: f64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args, Debug, Clone)]
struct ReportArgs {
    /// Report files written by earlier runs.
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    output: Output,
}

/// Outcome of a subcommand: the JSON body, the ratios for CSV and whether
/// the check passed.
struct Outcome {
    command: &'static str,
    config: Value,
    result: Value,
    ratios: Vec<f64>,
    pass: bool,
}

fn group(name: &str) -> Result<GroupDescriptor> {
    let parsed: GroupName = name.parse()?;
    if let GroupName::Graded(_) = parsed {
        bail!("graded groups need explicit weights and are not available from the command line");
    }
    Ok(GroupDescriptor::from_name(parsed))
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p > 1.0) {
        bail!("requires p > 1, got p = {p}");
    }
    if !(q > p) {
        bail!("requires q > p, got p = {p}, q = {q}");
    }
    Ok(())
}

fn sphere(g: &GroupDescriptor) -> Result<f64> {
    Ok(g.default_sphere_measure()?.value)
}

fn c1_for(g: &GroupDescriptor, p: f64) -> Result<f64> {
    Ok(certified_c1(p, g.homogeneous_dimension, sphere(g)?, &default_q_grid(p))?.value)
}

fn euclidean_op(g: &GroupDescriptor, grid: &GridArgs) -> Result<SpectralOperator<f64>> {
    if !matches!(g.name, GroupName::Euclidean(_)) {
        bail!("this check runs on euclidean groups, got {}", g.name);
    }
    Ok(SpectralOperator::laplacian(&PeriodicGrid::cube(g.dimension(), grid.l, grid.n)?))
}

fn report_outcome(command: &'static str, config: Value, r: VerificationReport) -> Result<Outcome> {
    Ok(Outcome { command, config, ratios: r.ratios.clone(), pass: r.pass, result: serde_json::to_value(r)? })
}

fn constants(args: &ConstantsArgs) -> Result<Outcome> {
    let g = group(&args.problem.group)?;
    check_pq(args.problem.p, args.problem.q)?;
    let params = GNParams::new(args.problem.p, args.problem.q, g.homogeneous_dimension, sphere(&g)?)?;
    let report = ConstantsReport::compute(&params, &format!("{:?}", g.quasi_norm).to_lowercase(), &default_q_grid(params.p))?;
    Ok(Outcome {
        command: "constants",
        config: json!({ "problem": args.problem, "group": g }),
        result: serde_json::to_value(report)?,
        ratios: Vec::new(),
        pass: true,
    })
}

fn ground_state(args: &GroundStateArgs) -> Result<Outcome> {
    let g = group(&args.problem.group)?;
    let (p, q) = (args.problem.p, args.problem.q);
    check_pq(p, q)?;
    let limit = g.homogeneous_dimension / g.gamma;
    if p > limit && !args.beyond_hypothesis {
        bail!("requires p <= Q/γ = {limit}, got p = {p} (pass --beyond-hypothesis to solve anyway)");
    }
    if args.basis == "line" {
        return ground_state_line(args);
    }
    let grid = PeriodicGrid::cube(g.dimension(), args.grid.l, args.grid.n)?;
    let prob = if args.beyond_hypothesis {
        VariationalProblem::beyond_hypothesis(g.clone(), &grid, p, q)?
    } else {
        VariationalProblem::new(g.clone(), &grid, p, q)?
    };
    let mut cfg = SolverConfig::for_p(p);
    cfg.method = args.method;
    if let Some(t) = args.tol_pde {
        cfg.tol_pde = t;
    }
    let result = solve(&prob, &cfg)?;
    if let Some(path) = &args.field_out {
        result.phi().write_binary(path)?;
    }
    let pass = result.identities_within_tolerance;
    Ok(Outcome {
        command: "ground-state",
        config: json!({ "problem": args.problem, "grid": args.grid, "beyond_hypothesis": args.beyond_hypothesis, "solver": cfg }),
        result: serde_json::to_value(&result)?,
        ratios: Vec::new(),
        pass,
    })
}

fn ground_state_line(args: &GroundStateArgs) -> Result<Outcome> {
    let (p, q) = (args.problem.p, args.problem.q);
    if args.problem.group != "euclidean1" || p != 2.0 {
        bail!("the line basis supports euclidean1 with p = 2 only");
    }
    if args.field_out.is_some() {
        bail!("--field-out needs the periodic basis");
    }
    let line = RationalLine::new(args.grid.n, args.map_scale)?;
    let mut cfg = SolverConfig::for_p(p);
    cfg.tol_pde = args.tol_pde.unwrap_or(1e-12);
    let ls = solve_line(q, &line, &cfg)?;
    let pass = ls.result.identities_within_tolerance;
    Ok(Outcome {
        command: "ground-state",
        config: json!({ "problem": args.problem, "basis": "line", "N": args.grid.n, "map_scale": args.map_scale, "beyond_hypothesis": args.beyond_hypothesis, "solver": cfg }),
        result: serde_json::to_value(&ls.result)?,
        ratios: Vec::new(),
        pass,
    })
}

fn verify(v: &Verify) -> Result<Outcome> {
    match v {
        Verify::Gn { problem, grid, family, .. } => {
            let g = group(&problem.group)?;
            check_pq(problem.p, problem.q)?;
            let config = json!({ "problem": problem, "grid": grid, "family": family });
            if g.name == GroupName::Heisenberg1 {
                if problem.p != 2.0 {
                    bail!("the Heisenberg model supports p = 2 only, got p = {}", problem.p);
                }
                let hg = HeisenbergGrid::uniform(grid.l / 2.0, 1.0, grid.n)?;
                let fam = gaussian_family(&hg, family.count, family.scale_min, family.scale_max)?;
                return report_outcome("verify gn", config, empirical_gn_ratio_h1(&hg, &fam, problem.q)?);
            }
            let op = euclidean_op(&g, grid)?;
            let fam = TestFamily::band_limited(family.seed, family.count, family.scale_min, family.scale_max).generate(&op)?;
            let r = verify_gn(&op, problem.p, g.homogeneous_dimension, &fam, c1_for(&g, problem.p)?, &gn_q_grid(problem.p))?;
            report_outcome("verify gn", config, r)
        }
        Verify::Trudinger { problem, grid, family, alpha, alpha_fraction, .. } => {
            let g = group(&problem.group)?;
            let op = euclidean_op(&g, grid)?;
            let c1 = c1_for(&g, problem.p)?;
            let alpha = alpha.unwrap_or(alpha_fraction * trudinger_alpha_threshold(c1, problem.p));
            let fam = TestFamily::gaussians(family.seed, family.count, family.scale_min, family.scale_max).generate(&op)?;
            let r = verify_trudinger(&op, problem.p, g.homogeneous_dimension, &fam, alpha, c1)?;
            report_outcome("verify trudinger", json!({ "problem": problem, "grid": grid, "family": family, "alpha": alpha }), r)
        }
        Verify::Bgw { problem, grid, a, q_param, seed, count, k0, decay, .. } => {
            let g = group(&problem.group)?;
            let big_q = g.homogeneous_dimension;
            if *a <= big_q / q_param {
                bail!("requires a > Q/q, got a = {a}, Q/q = {}", big_q / q_param);
            }
            let op = euclidean_op(&g, grid)?;
            let fam = TestFamily::frequency_doubling(*seed, *count, *k0).with_decay(*decay).coherent(true).generate(&op)?;
            let r = verify_bgw(&op, problem.p, big_q, *a, *q_param, &fam)?;
            let config = json!({ "problem": problem, "grid": grid, "a": a, "q_param": q_param, "seed": seed, "count": count, "k0": k0, "decay": decay });
            report_outcome("verify bgw", config, r)
        }
        Verify::Bw { problem, grid, profile, width, measure_min, measure_max, radii, .. } => {
            let g = group(&problem.group)?;
            let op = euclidean_op(&g, grid)?;
            let w = *width;
            let f = match profile.as_str() {
                "gaussian" => Field::from_fn(op.grid().clone(), move |x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>() / (w * w)).exp())?,
                "bump" => Field::from_fn(op.grid().clone(), move |x: &[f64]| {
                    let r2 = x.iter().map(|v| v * v).sum::<f64>() / (w * w);
                    if r2 < 1.0 { (1.0 - 1.0 / (1.0 - r2)).exp() } else { 0.0 }
                })?,
                other => bail!("unknown profile {other:?} (gaussian, bump)"),
            };
            let ball = g.unit_ball_volume(critineq::group_model::DEFAULT_SPHERE_LEVEL);
            let n = g.dimension() as f64;
            let rs: Vec<f64> = (0..*radii)
                .map(|i| {
                    let t = if *radii > 1 { i as f64 / (*radii - 1) as f64 } else { 0.0 };
                    let m = (measure_min.ln() + t * (measure_max.ln() - measure_min.ln())).exp();
                    (m / ball).powf(1.0 / n)
                })
                .collect();
            let fam = TestFamily::gaussians(0, 1, w, w);
            let r = verify_bw_set(&op, problem.p, g.homogeneous_dimension, c1_for(&g, problem.p)?, &f, &rs, &fam)?;
            let config = json!({ "problem": problem, "grid": grid, "profile": profile, "width": width, "measure_min": measure_min, "measure_max": measure_max, "radii": radii });
            report_outcome("verify bw", config, r)
        }
        Verify::Holder { problem, grid, family, lambda, pairs, stability, .. } => {
            let g = group(&problem.group)?;
            let op = euclidean_op(&g, grid)?;
            let fam = TestFamily::band_limited(family.seed, family.count, family.scale_min, family.scale_max)
                .mean_zero(true)
                .generate(&op)?;
            let r = verify_holder(&op, problem.p, g.homogeneous_dimension, *lambda, &fam, *pairs, family.seed, *stability)?;
            let config = json!({ "problem": problem, "grid": grid, "family": family, "lambda": lambda, "pairs": pairs, "stability": stability });
            report_outcome("verify holder", config, r)
        }
    }
}

fn report(args: &ReportArgs) -> Result<Outcome> {
    if args.inputs.is_empty() {
        bail!("no report files given");
    }
    let mut rows = Vec::new();
    let mut all = true;
    for path in &args.inputs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if doc["schema_version"] != json!(SCHEMA_VERSION) {
            bail!("{} has schema version {}, expected {SCHEMA_VERSION}", path.display(), doc["schema_version"]);
        }
        let pass = doc["pass"].as_bool().unwrap_or(false);
        all &= pass;
        rows.push(json!({
            "file": path.display().to_string(),
            "command": doc["command"],
            "pass": pass,
            "max": doc["result"]["max"],
            "reference": doc["result"]["reference"],
        }));
    }
    Ok(Outcome { command: "report", config: json!({}), result: json!({ "reports": rows }), ratios: Vec::new(), pass: all })
}

fn write_outputs(outcome: &Outcome, output: &Output) -> Result<()> {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": outcome.command,
        "config": outcome.config,
        "pass": outcome.pass,
        "result": outcome.result,
    });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    match &output.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    if let Some(path) = &output.csv {
        write_csv(path, &outcome.ratios)?;
    }
    Ok(())
}

fn write_csv(path: &Path, ratios: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["index", "ratio"])?;
    for (i, r) in ratios.iter().enumerate() {
        w.write_record([i.to_string(), format!("{r:e}")])?;
    }
    w.flush()?;
    Ok(())
}

fn output_of(cmd: &Command) -> &Output {
    match cmd {
        Command::Constants(a) => &a.output,
        Command::GroundState(a) => &a.output,
        Command::Report(a) => &a.output,
        Command::Verify(v) => match v {
            Verify::Gn { output, .. }
            | Verify::Trudinger { output, .. }
            | Verify::Bgw { output, .. }
            | Verify::Bw { output, .. }
            | Verify::Holder { output, .. } => output,
        },
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let output = output_of(&cli.command);
    if let Some(n) = output.workers {
        if n == 0 {
            bail!("worker count must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    let outcome = match &cli.command {
        Command::Constants(a) => constants(a)?,
        Command::GroundState(a) => ground_state(a)?,
        Command::Verify(v) => verify(v)?,
        Command::Report(a) => report(a)?,
    };
    write_outputs(&outcome, output)?;
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
