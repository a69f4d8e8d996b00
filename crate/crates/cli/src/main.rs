//! `tvoc`: solve, verify and sweep the energy / total-variation control
//! problem for the double integrator.
//!
//! Exit status: 0 on success, 1 when a solver fails or a result does not
//! verify (a `diagnostic.json` is written), 2 on invalid input.

mod alphas;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tvoc_core::analytic::{self, check_optimality, OptimalityReport, StructuralSolution};
use tvoc_core::oracle::{self, DiscretizedProblem, LqptvData, OracleSolution, SolverSettings};
use tvoc_core::pareto::{self, FRAME_POINTS};
use tvoc_core::{BoundaryConditions, Error, Weight};

/// Checker tolerance for analytic solutions.
const CHECK_TOL: f64 = 1e-9;
/// Samples in CSV exports of analytic solutions.
const CSV_POINTS: usize = 401;

#[derive(Debug, Parser)]
#[command(
    name = "tvoc",
    version,
    about = "Minimum-energy / total-variation control of the double integrator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Boundary conditions `s0,sf,v0,vf`.
    #[arg(
        long,
        global = true,
        default_value = "0,0,1,0",
        allow_hyphen_values = true
    )]
    bc: BoundaryConditions,

    /// Weight of the total variation (`inf` accepted).
    #[arg(long, global = true)]
    alpha: Option<Weight>,

    /// Weight list for `pareto`: a file, `log:min:max:count`, a comma list or `default`.
    #[arg(long, global = true)]
    alphas: Option<String>,

    /// Grid intervals for the oracle.
    #[arg(long = "n", global = true, default_value_t = 2000)]
    n_steps: usize,

    /// KKT tolerance for the oracle.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,

    #[arg(long, global = true, default_value_t = 50_000)]
    max_iter: usize,

    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write solutions even when the optimality check fails.
    #[arg(long, global = true)]
    allow_unverified: bool,

    /// LQPTV problem file (JSON) for `lqptv`.
    #[arg(long, global = true)]
    problem: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Minimum-energy solution (zero weight).
    Energy,
    /// Structural solution for one weight, with its optimality report.
    Tv,
    /// Infinite-weight limit of the running instance.
    Asymptotic,
    /// Analytic solution against the direct-transcription oracle.
    Verify,
    /// Weighted-sum sweep: front, diagnostics and frame data.
    Pareto,
    /// Direct-transcription solve of the double integrator.
    Oracle,
    /// Direct-transcription solve of an LQPTV problem file.
    Lqptv,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Energy => "energy",
            Command::Tv => "tv",
            Command::Asymptotic => "asymptotic",
            Command::Verify => "verify",
            Command::Pareto => "pareto",
            Command::Oracle => "oracle",
            Command::Lqptv => "lqptv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
struct RunConfig {
    command: Command,
    bc: BoundaryConditions,
    alpha: Option<Weight>,
    alphas: Option<String>,
    n_steps: usize,
    tol: f64,
    max_iter: usize,
    output_dir: PathBuf,
    format: Format,
    allow_unverified: bool,
    problem: Option<PathBuf>,
}

enum Failure {
    /// Bad flags or input files.
    Input(String),
    /// Solver failure or unverified result, with diagnostic content.
    Solver(String, Value),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_)
            | Error::Domain(_)
            | Error::WeightDomain(_)
            | Error::Unsupported(_)
            | Error::Json(_)
            | Error::Csv(_) => Failure::Input(e.to_string()),
            Error::NotConverged {
                iterations,
                residual,
                ref best,
            } => {
                let best = serde_json::to_value(best.as_ref()).unwrap_or(Value::Null);
                Failure::Solver(
                    e.to_string(),
                    json!({"iterations": iterations, "kkt_residual": residual, "best_iterate": best}),
                )
            }
            Error::NoStructuralSolution {
                best_residual,
                ref reason,
            } => Failure::Solver(
                e.to_string(),
                json!({"best_residual": best_residual, "reason": reason}),
            ),
            Error::Infeasible { gap } => {
                Failure::Solver(e.to_string(), json!({"terminal_gap": gap}))
            }
            Error::Io(_) => Failure::Solver(e.to_string(), Value::Null),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match validate(cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(msg, detail)) => {
            eprintln!("error: {msg}");
            let diag = json!({"command": config.command.name(), "error": msg, "detail": detail});
            match write_json(&config.output_dir.join("diagnostic.json"), &diag) {
                Ok(()) => eprintln!(
                    "diagnostic written to {}",
                    config.output_dir.join("diagnostic.json").display()
                ),
                Err(Failure::Input(m) | Failure::Solver(m, _)) => {
                    eprintln!("could not write diagnostic: {m}")
                }
            }
            ExitCode::from(1)
        }
    }
}

fn validate(cli: Cli) -> Result<RunConfig, String> {
    if cli.tol.is_nan() || cli.tol <= 0.0 {
        return Err(format!("--tol must be positive, got {}", cli.tol));
    }
    if cli.n_steps < 2 {
        return Err(format!("--n must be at least 2, got {}", cli.n_steps));
    }
    if cli.max_iter == 0 {
        return Err("--max-iter must be positive".into());
    }
    Ok(RunConfig {
        command: cli.command,
        bc: cli.bc,
        alpha: cli.alpha,
        alphas: cli.alphas,
        n_steps: cli.n_steps,
        tol: cli.tol,
        max_iter: cli.max_iter,
        output_dir: cli.out,
        format: cli.format,
        allow_unverified: cli.allow_unverified,
        problem: cli.problem,
    })
}

/// `TVOC_THREADS` caps the sweep's thread pool.
fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("TVOC_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("TVOC_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(c: &RunConfig) -> Outcome {
    fs::create_dir_all(&c.output_dir)
        .map_err(|e| Failure::Input(format!("{}: {e}", c.output_dir.display())))?;
    match c.command {
        Command::Energy => {
            let sol = analytic::solve_min_energy(c.bc);
            emit_structural(c, "energy", &sol)
        }
        Command::Tv => {
            let alpha = require_alpha(c)?;
            let sol = analytic::solve(c.bc, alpha)?;
            emit_structural(c, "tv", &sol)
        }
        Command::Asymptotic => {
            if !c.bc.is_particular() {
                return Err(Failure::Input(
                    "the asymptotic solution exists only for bc = 0,0,1,0".into(),
                ));
            }
            emit_structural(c, "asymptotic", &analytic::asymptotic_solution())
        }
        Command::Verify => verify(c),
        Command::Pareto => run_pareto(c),
        Command::Oracle => {
            let alpha = require_alpha(c)?;
            let dp = oracle::discretize(c.bc, alpha, c.n_steps)?;
            let sol = oracle::solve(&dp, c.tol, c.max_iter)?;
            emit_oracle(c, "oracle", &dp, &sol)
        }
        Command::Lqptv => {
            let path = c
                .problem
                .as_ref()
                .ok_or_else(|| Failure::Input("lqptv needs --problem <file>".into()))?;
            let mut data = LqptvData::load(path)
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            if let Some(alpha) = c.alpha {
                data.alpha = alpha;
            }
            let dp = DiscretizedProblem::from_lqptv(&data)?;
            let sol = oracle::solve_lqptv(&dp, c.tol, c.max_iter)?;
            emit_oracle(c, "lqptv", &dp, &sol)
        }
    }
}

fn require_alpha(c: &RunConfig) -> Result<Weight, Failure> {
    c.alpha
        .ok_or_else(|| Failure::Input(format!("{} needs --alpha", c.command.name())))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text)
        .map_err(|e| Failure::Solver(format!("{}: {e}", path.display()), Value::Null))
}

fn write_json(path: &Path, value: &Value) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_text(path, &text)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> tvoc_core::Result<()>) -> Result<String, Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

fn gate(c: &RunConfig, what: &str, report: &OptimalityReport) -> Outcome {
    if report.passed || c.allow_unverified {
        return Ok(());
    }
    Err(Failure::Solver(
        format!(
            "{what} failed the optimality check ({}); rerun with --allow-unverified to write it anyway",
            report.failed_checks().join(", ")
        ),
        to_value(report),
    ))
}

fn emit_structural(c: &RunConfig, stem: &str, sol: &StructuralSolution) -> Outcome {
    let report = check_optimality(sol, CHECK_TOL);
    gate(c, "solution", &report)?;
    let path = c.output_dir.join(format!("{stem}.{}", extension(c.format)));
    match c.format {
        Format::Json => {
            let doc = json!({
                "command": stem,
                "bc": c.bc.to_string(),
                "alpha": sol.alpha,
                "solution": sol,
                "objective": sol.objective(),
                "optimality": report,
            });
            write_json(&path, &doc)?;
        }
        Format::Csv => {
            let text = csv_bytes(|buf| write_structural_csv(buf, sol))?;
            write_text(&path, &text)?;
        }
        Format::Svg => {
            let front = pareto::ParetoFront {
                instance: sol.bc,
                points: vec![pareto::ParetoPoint {
                    alpha: sol.alpha,
                    phi1: sol.phi1,
                    phi2: sol.phi2,
                    solution_ref: 0,
                }],
                failed: Vec::new(),
                solutions: vec![sol.clone()],
            };
            let frame = &pareto::frames(&front)?[0];
            write_text(&path, &pareto::frame_svg(frame))?;
        }
    }
    println!(
        "{stem}: phi1 = {}, phi2 = {}, optimality {} -> {}",
        sol.phi1,
        sol.phi2,
        if report.passed { "passed" } else { "FAILED" },
        path.display()
    );
    Ok(())
}

fn write_structural_csv(buf: &mut Vec<u8>, sol: &StructuralSolution) -> tvoc_core::Result<()> {
    use std::io::Write;
    writeln!(buf, "t,u,x1,x2,eta")?;
    for i in 0..CSV_POINTS {
        let t = i as f64 / (CSV_POINTS - 1) as f64;
        writeln!(
            buf,
            "{t},{},{},{},{}",
            sol.u.value(t),
            sol.x1.value(t),
            sol.x2.value(t),
            sol.eta.value(t)
        )?;
    }
    Ok(())
}

fn extension(f: Format) -> &'static str {
    match f {
        Format::Json => "json",
        Format::Csv => "csv",
        Format::Svg => "svg",
    }
}

fn emit_oracle(
    c: &RunConfig,
    stem: &str,
    dp: &DiscretizedProblem,
    sol: &OracleSolution,
) -> Outcome {
    let report = oracle::residual_report(sol, dp);
    match c.format {
        Format::Csv => {
            let text = csv_bytes(|buf| sol.write_csv(buf))?;
            write_text(&c.output_dir.join(format!("{stem}.csv")), &text)?;
        }
        Format::Json | Format::Svg => {
            let doc = json!({"command": stem, "solution": sol, "residuals": report.residuals});
            write_json(&c.output_dir.join(format!("{stem}.json")), &doc)?;
        }
    }
    println!(
        "{stem}: objective = {}, tv = {}, kkt = {:.3e}, iterations = {}",
        sol.objective, sol.tv_part, sol.kkt_residual, sol.iterations
    );
    Ok(())
}

fn verify(c: &RunConfig) -> Outcome {
    let alpha = require_alpha(c)?;
    if alpha.is_infinite() {
        return Err(Failure::Input("verify needs a finite --alpha".into()));
    }
    let sol = analytic::solve(c.bc, alpha)?;
    let report = check_optimality(&sol, CHECK_TOL);
    let dp = oracle::discretize(c.bc, alpha, c.n_steps)?;
    let settings = SolverSettings::with_tol(c.tol, c.max_iter);
    let num = oracle::solve_with(&dp, &settings)?;
    let residuals = oracle::residual_report(&num, &dp);

    let h = dp.dt();
    let control_gap = (0..dp.n_steps())
        .map(|k| (num.controls[k][0] - sol.u.value((k as f64 + 0.5) * h)).abs())
        .fold(0.0, f64::max);
    let eta_gap = residuals
        .eta
        .iter()
        .zip(&residuals.eta_times)
        .map(|(e, &t)| (e[0] - sol.eta.value(t)).abs())
        .fold(0.0, f64::max);
    let analytic_objective = sol.objective().expect("finite weight");
    let objective_gap =
        (num.objective - analytic_objective).abs() / analytic_objective.abs().max(1.0);

    let rows: Vec<(&str, f64)> = vec![
        ("objective_analytic", analytic_objective),
        ("objective_oracle", num.objective),
        ("objective_gap_relative", objective_gap),
        ("control_linf_gap", control_gap),
        ("eta_linf_gap", eta_gap),
        ("phi1_analytic", sol.phi1),
        ("energy_oracle", num.energy_part),
        ("phi2_analytic", sol.phi2),
        ("tv_oracle", num.tv_part),
        ("oracle_kkt", num.kkt_residual),
    ];
    println!("verify bc={} alpha={} N={}", c.bc, alpha, c.n_steps);
    for (k, v) in &rows {
        println!("  {k:<24} {v:.6e}");
    }
    println!(
        "  analytic optimality      {}",
        if report.passed { "passed" } else { "FAILED" }
    );

    let path = c.output_dir.join(format!(
        "verify.{}",
        if c.format == Format::Csv {
            "csv"
        } else {
            "json"
        }
    ));
    if c.format == Format::Csv {
        let mut text = String::from("quantity,value\n");
        for (k, v) in &rows {
            text.push_str(&format!("{k},{v}\n"));
        }
        write_text(&path, &text)?;
    } else {
        let table: serde_json::Map<String, Value> = rows
            .iter()
            .map(|(k, v)| (k.to_string(), json!(v)))
            .collect();
        let doc = json!({
            "command": "verify",
            "bc": c.bc.to_string(),
            "alpha": alpha,
            "n_steps": c.n_steps,
            "comparison": table,
            "oracle_residuals": residuals.residuals,
            "analytic_optimality": report,
        });
        write_json(&path, &doc)?;
    }
    gate(c, "analytic solution", &report)
}

fn run_pareto(c: &RunConfig) -> Outcome {
    let alphas = match &c.alphas {
        Some(arg) => alphas::parse(arg).map_err(Failure::Input)?,
        None => {
            let mut v = pareto::default_alphas();
            if !c.bc.is_particular() {
                v.retain(|w| !w.is_infinite());
            }
            v
        }
    };
    let front = pareto::sweep(c.bc, &alphas)?;
    let diagnostics = pareto::diagnose(&front);
    let reports: Vec<Value> = front
        .points
        .iter()
        .map(|p| json!({"alpha": p.alpha, "optimality": check_optimality(front.solution(p), CHECK_TOL)}))
        .collect();

    let dir = &c.output_dir;
    write_text(
        &dir.join("front.csv"),
        &csv_bytes(|buf| front.write_csv(buf))?,
    )?;
    let doc = json!({
        "command": "pareto",
        "front": front,
        "diagnostics": diagnostics,
        "optimality": reports,
    });
    write_json(&dir.join("front.json"), &doc)?;

    let frames = if front.points.is_empty() {
        Vec::new()
    } else {
        pareto::frames(&front)?
    };
    write_json(
        &dir.join("frames.json"),
        &json!({"grid_points": FRAME_POINTS, "frames": frames}),
    )?;
    if c.format == Format::Svg {
        write_text(&dir.join("front.svg"), &pareto::front_svg(&front))?;
        let frame_dir = dir.join("frames");
        fs::create_dir_all(&frame_dir).map_err(|e| Failure::Solver(e.to_string(), Value::Null))?;
        for f in &frames {
            write_text(
                &frame_dir.join(format!("frame_{:03}.svg", f.index)),
                &pareto::frame_svg(f),
            )?;
        }
    }
    println!(
        "pareto: {} points, {} failed, shape checks {}",
        front.points.len(),
        front.failed.len(),
        if diagnostics.all_ok() {
            "passed"
        } else {
            "FAILED"
        }
    );
    if !front.failed.is_empty() && !c.allow_unverified {
        let failed: Vec<Value> = front.failed.iter().map(to_value).collect();
        return Err(Failure::Solver(
            format!(
                "{} weights failed; rerun with --allow-unverified to accept a partial front",
                front.failed.len()
            ),
            Value::Array(failed),
        ));
    }
    Ok(())
}
