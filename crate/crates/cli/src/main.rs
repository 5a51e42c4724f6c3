//! Command-line front end: parse market specs, run the
//! check/solve/evaluate/simulate/verify/report pipeline, and write tabular
//! outputs.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 validation failure,
//! 3 solver failure, 4 verification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robust_merton::kernels::TripletPath;
use robust_merton::DVector;
use robust_merton::market::{
    check_nondegeneracy, check_sharpe_cara, check_sharpe_crra, jump_support_union, MarketSpec,
    Utility,
};
use robust_merton::policy::{
    self, cara_value_path, consumption_range_check, crra_value_path, hjb_bounds,
    optimal_consumption_crra, optimal_excess_consumption_cara, q_schedule, solve_ode_cara,
    solve_riccati_crra, ConsumptionPlan, PolicyError, SaddleSolution,
};
use robust_merton::report::{
    fmt_f64, parse_cell_rows, parse_summary, render_cell_rows, render_check_rows, render_summary,
    render_verdicts, write_atomic, CellRow, CheckRow, OutputFormat, SummaryRecord, VerdictRow,
};
use robust_merton::saddle::{self, SolverConfig, SolverError, UtilityContext};
use robust_merton::sim::{verify_martingale_equality, verify_objective_saddle, PathBundle};
use robust_merton::spec_file::load_market_spec;

#[derive(Parser)]
#[command(
    name = "robust-merton",
    about = "Robust consumption-investment: assumption checks, saddle solving and verification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Market spec file (TOML)
    #[arg(long)]
    spec: PathBuf,
    /// Output format for tables
    #[arg(long, default_value = "csv")]
    format: String,
    /// Override the spec's grid step
    #[arg(long)]
    step: Option<f64>,
    /// Solver outer tolerance
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Clone)]
struct McArgs {
    /// Monte-Carlo path count
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Antithetic variates on the Gaussian stream
    #[arg(long, default_value_t = false)]
    antithetic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the market spec against the standing assumptions
    Check {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory for the check report (stdout only if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for the saddle policy and worst-case measure
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory for solution tables
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute values from stored solution tables
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory holding cells.* and summary.*
        #[arg(long)]
        solution: PathBuf,
    },
    /// Monte-Carlo objective estimate at the stored optimum
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        solution: PathBuf,
        #[command(flatten)]
        mc: McArgs,
        /// Directory for the estimate record (stdout only if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full verification battery: certificates, ranges, ODE cross-checks,
    /// HJB bounds, martingale equality and objective-saddle perturbations
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        solution: PathBuf,
        #[command(flatten)]
        mc: McArgs,
        /// Directory for the verdict table (stdout only if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge solution tables into one report in the requested format
    Report {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum CliError {
    Usage(String),
    Parse(String),
    Validation(String),
    Solver(String),
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Verification(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Parse(m)
            | CliError::Validation(m)
            | CliError::Solver(m)
            | CliError::Verification(m) => m,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::AssumptionFailed { .. } => CliError::Validation(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        CliError::Verification(e.to_string())
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("ROBUST_MERTON_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Check { common, out } => cmd_check(&common, out.as_deref()),
        Command::Solve { common, out } => cmd_solve(&common, &out),
        Command::Evaluate { common, solution } => cmd_evaluate(&common, &solution),
        Command::Simulate { common, solution, mc, out } => {
            cmd_simulate(&common, &solution, &mc, out.as_deref())
        }
        Command::Verify { common, solution, mc, out } => {
            cmd_verify(&common, &solution, &mc, out.as_deref())
        }
        Command::Report { common, solution, out } => cmd_report(&common, &solution, &out),
    }
}

fn parse_format(common: &CommonArgs) -> Result<OutputFormat, CliError> {
    common.format.parse::<OutputFormat>().map_err(CliError::Usage)
}

fn load_spec(common: &CommonArgs) -> Result<MarketSpec, CliError> {
    load_market_spec(&common.spec, common.step).map_err(|e| CliError::Parse(e.to_string()))
}

fn solver_config(common: &CommonArgs) -> SolverConfig {
    let mut cfg = SolverConfig::default();
    if let Some(tol) = common.tol {
        cfg.outer_tol = tol;
    }
    cfg
}

fn utility_name(utility: &Utility) -> String {
    match utility {
        Utility::LogCrra => "crra-log".into(),
        Utility::PowerCrra { exponent } => format!("crra-power(p={exponent})"),
        Utility::Cara { risk_aversion } => format!("cara(a={risk_aversion})"),
    }
}

fn run_checks(spec: &MarketSpec) -> (Vec<CheckRow>, bool) {
    let mut rows = Vec::new();
    let mut all_pass = true;
    for (seg, set) in spec.segments.iter().enumerate() {
        let support = jump_support_union(set);
        let jump_free = support.is_empty();
        let (kappa_nd, kappa_bound, support_ok) = if jump_free {
            (0.0, 0.0, true)
        } else {
            match check_nondegeneracy(&support) {
                Ok(report) => (report.kappa_nd, report.kappa_bound, true),
                Err(_) => (0.0, 0.0, false),
            }
        };
        let sharpe = match spec.utility {
            Utility::PowerCrra { exponent } => check_sharpe_crra(set, exponent, 11),
            Utility::LogCrra => check_sharpe_crra(set, 0.0, 11),
            Utility::Cara { .. } => {
                let t = spec.grid.breakpoints()[seg];
                check_sharpe_cara(set, t, spec.grid.horizon(), 11)
            }
        };
        let pass = support_ok && sharpe.pass;
        all_pass &= pass;
        rows.push(CheckRow {
            segment: seg,
            kappa: set.kappa(),
            jump_free,
            kappa_nd,
            kappa_bound,
            sharpe_bound_sq: sharpe.bound_sq,
            sharpe_worst_sq: sharpe.worst_sq,
            sharpe_worst_at: sharpe.worst_at,
            pass,
        });
    }
    (rows, all_pass)
}

fn cmd_check(common: &CommonArgs, out: Option<&Path>) -> Result<(), CliError> {
    let format = parse_format(common)?;
    let spec = load_spec(common)?;
    let (rows, all_pass) = run_checks(&spec);
    let rendered = render_check_rows(&rows, format);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(e.to_string()))?;
        let path = dir.join(format!("checks.{}", format.extension()));
        write_atomic(&path, &rendered).map_err(|e| CliError::Usage(e.to_string()))?;
        println!("wrote {}", path.display());
    } else {
        print!("{rendered}");
    }
    for row in &rows {
        println!(
            "segment {}: kappa={} sharpe {} <= {} : {}",
            row.segment,
            fmt_f64(row.kappa),
            fmt_f64(row.sharpe_worst_sq),
            fmt_f64(row.sharpe_bound_sq),
            if row.pass { "pass" } else { "FAIL" }
        );
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Validation("assumption checks failed".into()))
    }
}

fn solution_tables(spec: &MarketSpec, solution: &SaddleSolution) -> (Vec<CellRow>, SummaryRecord) {
    let consumption = solution.consumption.cell_values();
    let rows: Vec<CellRow> = spec
        .grid
        .cells()
        .iter()
        .map(|cell| CellRow {
            cell: cell.index,
            t_start: cell.start,
            t_end: cell.end,
            invest: solution.investment[cell.index].iter().cloned().collect(),
            weights: solution.triplets.cells()[cell.index].weights.clone(),
            kernel: solution.kernel[cell.index],
            consumption: consumption[cell.index],
            certificate: solution.certificates[cell.index],
        })
        .collect();
    let summary = SummaryRecord {
        utility: utility_name(&spec.utility),
        horizon: spec.grid.horizon(),
        initial_wealth: spec.initial_wealth,
        metric_exponent: spec.metric_exponent,
        cells: rows.len(),
        kernel_min: solution.kernel.iter().cloned().fold(f64::INFINITY, f64::min),
        kernel_max: solution.kernel.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        max_certificate: solution.certificates.iter().cloned().fold(0.0, f64::max),
        global_value: solution.global_value,
        value_function: solution.value_at_w0,
    };
    (rows, summary)
}

fn cmd_solve(common: &CommonArgs, out: &Path) -> Result<(), CliError> {
    let format = parse_format(common)?;
    let spec = load_spec(common)?;
    let (_, all_pass) = run_checks(&spec);
    if !all_pass {
        return Err(CliError::Validation(
            "assumption checks failed; run `check` for details".into(),
        ));
    }
    let solution = policy::solve_market(&spec, &solver_config(common)).map_err(|e| match e {
        PolicyError::Solver(s) => CliError::from(s),
        other => CliError::Solver(other.to_string()),
    })?;
    let (rows, summary) = solution_tables(&spec, &solution);
    std::fs::create_dir_all(out).map_err(|e| CliError::Usage(e.to_string()))?;
    let cells_path = out.join(format!("cells.{}", format.extension()));
    let summary_path = out.join(format!("summary.{}", format.extension()));
    write_atomic(&cells_path, &render_cell_rows(&rows, format))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    write_atomic(&summary_path, &render_summary(&summary, format))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    println!("wrote {}", cells_path.display());
    println!("wrote {}", summary_path.display());
    println!(
        "global value {}  u(w0={}) = {}",
        fmt_f64(summary.global_value),
        fmt_f64(summary.initial_wealth),
        fmt_f64(summary.value_function)
    );
    Ok(())
}

/// Stored solution artifacts, re-parsed.
struct StoredSolution {
    rows: Vec<CellRow>,
    summary: SummaryRecord,
    format: OutputFormat,
}

fn load_solution(dir: &Path) -> Result<StoredSolution, CliError> {
    for format in [OutputFormat::Csv, OutputFormat::JsonLines] {
        let cells = dir.join(format!("cells.{}", format.extension()));
        let summary = dir.join(format!("summary.{}", format.extension()));
        if cells.exists() && summary.exists() {
            let rows = parse_cell_rows(
                &std::fs::read_to_string(&cells).map_err(|e| CliError::Parse(e.to_string()))?,
                format,
            )
            .map_err(CliError::Parse)?;
            let summary = parse_summary(
                &std::fs::read_to_string(&summary).map_err(|e| CliError::Parse(e.to_string()))?,
                format,
            )
            .map_err(CliError::Parse)?;
            return Ok(StoredSolution { rows, summary, format });
        }
    }
    Err(CliError::Parse(format!(
        "no cells.csv/summary.csv or cells.jsonl/summary.jsonl under {}",
        dir.display()
    )))
}

/// Rebuilds the in-memory solution (schedules, triplet path, values) from
/// stored tables, re-deriving consumption and values from the kernel path.
fn rebuild_solution(
    spec: &MarketSpec,
    stored: &StoredSolution,
) -> Result<SaddleSolution, CliError> {
    let grid = &spec.grid;
    if stored.rows.len() != grid.num_cells() {
        return Err(CliError::Validation(format!(
            "solution has {} cells, spec grid has {}",
            stored.rows.len(),
            grid.num_cells()
        )));
    }
    let kernel: Vec<f64> = stored.rows.iter().map(|r| r.kernel).collect();
    let weights: Vec<Vec<f64>> = stored.rows.iter().map(|r| r.weights.clone()).collect();
    let triplets = TripletPath::from_weights(&spec.segments, grid, &weights)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let investment = stored
        .rows
        .iter()
        .map(|r| DVector::from_vec(r.invest.clone()))
        .collect();
    let consumption = match spec.utility {
        Utility::Cara { .. } => ConsumptionPlan::Cara(
            optimal_excess_consumption_cara(&kernel, grid).map_err(CliError::from)?,
        ),
        _ => {
            let p = spec.utility.crra_exponent().unwrap();
            ConsumptionPlan::Crra(
                optimal_consumption_crra(&kernel, p, grid).map_err(CliError::from)?,
            )
        }
    };
    let global_value = policy::global_value(&kernel, &spec.utility, grid)?;
    let value_at_w0 =
        policy::value_function(spec.initial_wealth, global_value, &spec.utility, grid.horizon())?;
    Ok(SaddleSolution {
        investment,
        triplets,
        kernel,
        certificates: stored.rows.iter().map(|r| r.certificate).collect(),
        consumption,
        global_value,
        value_at_w0,
    })
}

fn cmd_evaluate(common: &CommonArgs, solution_dir: &Path) -> Result<(), CliError> {
    let spec = load_spec(common)?;
    let stored = load_solution(solution_dir)?;
    let solution = rebuild_solution(&spec, &stored)?;
    println!(
        "recomputed global value {}  u(w0) = {}",
        fmt_f64(solution.global_value),
        fmt_f64(solution.value_at_w0)
    );
    let dv = (solution.global_value - stored.summary.global_value).abs();
    let du = (solution.value_at_w0 - stored.summary.value_function).abs();
    if dv > 1e-9 || du > 1e-9 {
        return Err(CliError::Verification(format!(
            "stored summary disagrees with recomputation: Δglobal={dv} Δvalue={du}"
        )));
    }
    println!("stored summary confirmed");
    Ok(())
}

fn cmd_simulate(
    common: &CommonArgs,
    solution_dir: &Path,
    mc: &McArgs,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let format = parse_format(common)?;
    let spec = load_spec(common)?;
    let stored = load_solution(solution_dir)?;
    let solution = rebuild_solution(&spec, &stored)?;
    let bundle = PathBundle { paths: mc.paths, seed: mc.seed, antithetic: mc.antithetic };
    let policy_path = robust_merton::sim::solution_policy(&solution, &spec);
    let estimate =
        robust_merton::sim::estimate_objective(&policy_path, &solution.triplets, &spec, &bundle)
            .map_err(|e| CliError::Verification(e.to_string()))?;
    let line = match format {
        OutputFormat::Csv => format!(
            "mean,std_error,paths,seed,step\n{},{},{},{},{}\n",
            fmt_f64(estimate.mean),
            fmt_f64(estimate.std_error),
            estimate.paths,
            estimate.seed,
            fmt_f64(spec.grid.step()),
        ),
        OutputFormat::JsonLines => format!(
            "{{\"mean\":{},\"std_error\":{},\"paths\":{},\"seed\":{},\"step\":{}}}\n",
            fmt_f64(estimate.mean),
            fmt_f64(estimate.std_error),
            estimate.paths,
            estimate.seed,
            fmt_f64(spec.grid.step()),
        ),
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(e.to_string()))?;
        let path = dir.join(format!("estimate.{}", format.extension()));
        write_atomic(&path, &line).map_err(|e| CliError::Usage(e.to_string()))?;
        println!("wrote {}", path.display());
    }
    println!(
        "objective estimate {} ± {} (paths {}, seed {})",
        fmt_f64(estimate.mean),
        fmt_f64(estimate.std_error),
        estimate.paths,
        estimate.seed
    );
    Ok(())
}

fn min_segment_length(spec: &MarketSpec) -> f64 {
    spec.grid
        .breakpoints()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

fn cmd_verify(
    common: &CommonArgs,
    solution_dir: &Path,
    mc: &McArgs,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let format = parse_format(common)?;
    let spec = load_spec(common)?;
    let stored = load_solution(solution_dir)?;
    let solution = rebuild_solution(&spec, &stored)?;
    let grid = &spec.grid;
    let mut verdicts: Vec<VerdictRow> = Vec::new();
    let mut push = |check: &str, pass: bool, detail: String| {
        println!("{}: {} ({detail})", check, if pass { "pass" } else { "FAIL" });
        verdicts.push(VerdictRow { check: check.into(), pass, detail });
    };

    // 1. stored consumption against the recomputed optimal schedule
    {
        let recomputed = solution.consumption.cell_values();
        let max_gap = stored
            .rows
            .iter()
            .zip(recomputed.iter())
            .map(|(r, c)| (r.consumption - c).abs())
            .fold(0.0f64, f64::max);
        push("consumption-recompute", max_gap <= 1e-9, format!("max gap {max_gap}"));
        if let Some(p) = spec.utility.crra_exponent() {
            let sampled: Vec<(f64, f64)> = grid
                .cells()
                .iter()
                .zip(stored.rows.iter())
                .map(|(cell, r)| (cell.mid(), r.consumption))
                .collect();
            let range = consumption_range_check(&sampled, &solution.kernel, p, true);
            push(
                "consumption-range",
                range.is_ok(),
                range.err().map(|e| e.to_string()).unwrap_or_else(|| "within bracket".into()),
            );
        } else {
            let negative = solution.consumption.cell_values().iter().any(|d| *d < -1e-12);
            push(
                "excess-nonnegative",
                !negative,
                "D* >= 0 at every cell".into(),
            );
        }
    }

    // 2. saddle certificates re-sampled at the stored (x*, θ*)
    {
        let cfg = solver_config(common);
        let mut worst: f64 = 0.0;
        let mut failed_cell = None;
        for (cell, row) in grid.cells().iter().zip(stored.rows.iter()) {
            let set = spec.segment_set(cell.segment);
            let x = DVector::from_vec(row.invest.clone());
            let cert = match spec.utility {
                Utility::Cara { risk_aversion } => {
                    let ctx = UtilityContext::Cara {
                        a: risk_aversion,
                        q: q_schedule(cell.mid(), grid.horizon()),
                    };
                    saddle::recertify(set, &ctx, &x, &row.weights, row.kernel, &cfg, cell.index)
                }
                _ => {
                    let p = spec.utility.crra_exponent().unwrap();
                    let support = jump_support_union(set);
                    let region = robust_merton::market::admissible_region(
                        &support,
                        robust_merton::market::RegionMargin::N(cfg.margin_n),
                        spec.dim(),
                    )
                    .map_err(|e| CliError::Validation(e.to_string()))?;
                    let ctx = UtilityContext::Crra { p, region: &region };
                    saddle::recertify(set, &ctx, &x, &row.weights, row.kernel, &cfg, cell.index)
                }
            };
            match cert {
                Ok(c) => {
                    if c > worst {
                        worst = c;
                    }
                    if c > cfg.cert_tol && failed_cell.is_none() {
                        failed_cell = Some(cell.index);
                    }
                }
                Err(e) => {
                    failed_cell = Some(cell.index);
                    worst = f64::INFINITY;
                    let _ = e;
                    break;
                }
            }
        }
        push(
            "saddle-certificate",
            failed_cell.is_none(),
            match failed_cell {
                None => format!("max violation {worst}"),
                Some(c) => format!("cell {c} violation {worst}"),
            },
        );
    }

    // 3. backward ODE cross-checks of the closed-form schedules
    {
        let step = 1e-3 * min_segment_length(&spec);
        match &solution.consumption {
            ConsumptionPlan::Crra(schedule) => {
                if let Some(p) = spec.utility.crra_exponent() {
                    if p == 0.0 {
                        let exact = grid
                            .cells()
                            .iter()
                            .map(|c| (c.start, q_schedule(c.start, grid.horizon())))
                            .all(|(t, q)| (schedule.at(t) - q).abs() == 0.0);
                        push("ode-cross-check", exact, "log branch, c* = q exactly".into());
                    } else {
                        match solve_riccati_crra(&solution.kernel, p, grid, step) {
                            Ok(path) => {
                                let sup = path
                                    .samples
                                    .iter()
                                    .map(|(t, c)| (c - schedule.at(*t)).abs())
                                    .fold(0.0f64, f64::max);
                                push("ode-cross-check", sup <= 1e-6, format!("sup gap {sup}"));
                            }
                            Err(e) => push("ode-cross-check", false, e.to_string()),
                        }
                    }
                }
            }
            ConsumptionPlan::Cara(schedule) => match solve_ode_cara(&solution.kernel, grid, step) {
                Ok(path) => {
                    let sup = path
                        .samples
                        .iter()
                        .map(|(t, d)| (d - schedule.at(*t)).abs())
                        .fold(0.0f64, f64::max);
                    push("ode-cross-check", sup <= 1e-6, format!("sup gap {sup}"));
                }
                Err(e) => push("ode-cross-check", false, e.to_string()),
            },
        }
    }

    // 4. HJB bounds and containment (power CRRA and CARA only)
    {
        let kernel_min = solution.kernel.iter().cloned().fold(f64::INFINITY, f64::min);
        let kernel_max = solution.kernel.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        match hjb_bounds(kernel_min, kernel_max, &spec.utility, grid.horizon()) {
            Ok(bounds) => {
                let times: Vec<f64> = grid.cells().iter().map(|c| c.start).chain([grid.horizon()]).collect();
                let values = match &solution.consumption {
                    ConsumptionPlan::Crra(s) => {
                        crra_value_path(s, spec.utility.crra_exponent().unwrap(), &times)
                    }
                    ConsumptionPlan::Cara(s) => {
                        let Utility::Cara { risk_aversion } = spec.utility else { unreachable!() };
                        cara_value_path(s, risk_aversion, &times)
                    }
                };
                let pairs: Vec<(f64, f64)> = times.iter().cloned().zip(values).collect();
                let contained =
                    policy::check_hjb_containment(&pairs, &bounds, &spec.utility);
                let v0_gap = (pairs[0].1 - solution.global_value).abs();
                push(
                    "hjb-containment",
                    contained.is_ok() && v0_gap <= 1e-6,
                    format!(
                        "V in [{}, {}], |V(0) - G*| = {v0_gap}",
                        fmt_f64(bounds.v_min),
                        fmt_f64(bounds.v_max)
                    ),
                );
            }
            Err(PolicyError::UnsupportedUtility) => {
                push("hjb-containment", true, "not applicable to the log family".into());
            }
            Err(e) => push("hjb-containment", false, e.to_string()),
        }
    }

    // 5. martingale equality and 6. objective saddle (Monte Carlo)
    {
        let bundle = PathBundle { paths: mc.paths, seed: mc.seed, antithetic: mc.antithetic };
        match verify_martingale_equality(&solution, &spec, &bundle) {
            Ok(report) => push(
                "martingale-equality",
                report.pass,
                format!(
                    "mc {} ± {} vs closed form {} (z = {})",
                    fmt_f64(report.estimate.mean),
                    fmt_f64(report.estimate.std_error),
                    fmt_f64(report.target),
                    fmt_f64(report.z_score)
                ),
            ),
            Err(e) => push("martingale-equality", false, e.to_string()),
        }
        match verify_objective_saddle(&solution, &spec, &bundle) {
            Ok(report) => {
                for row in &report.rows {
                    push(
                        &format!("objective-saddle [{}]", row.label),
                        row.pass,
                        format!("mean {} margin {}", fmt_f64(row.mean), fmt_f64(row.margin)),
                    );
                }
            }
            Err(e) => push("objective-saddle", false, e.to_string()),
        }
    }

    let all_pass = verdicts.iter().all(|v| v.pass);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(e.to_string()))?;
        let path = dir.join(format!("verdicts.{}", format.extension()));
        write_atomic(&path, &render_verdicts(&verdicts, format))
            .map_err(|e| CliError::Usage(e.to_string()))?;
        println!("wrote {}", path.display());
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Verification("one or more verification checks failed".into()))
    }
}

fn cmd_report(common: &CommonArgs, solution_dir: &Path, out: &Path) -> Result<(), CliError> {
    let format = parse_format(common)?;
    let stored = load_solution(solution_dir)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Usage(e.to_string()))?;
    let cells_path = out.join(format!("cells.{}", format.extension()));
    let summary_path = out.join(format!("summary.{}", format.extension()));
    write_atomic(&cells_path, &render_cell_rows(&stored.rows, format))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    write_atomic(&summary_path, &render_summary(&stored.summary, format))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    println!("wrote {}", cells_path.display());
    println!("wrote {}", summary_path.display());
    let _ = stored.format;
    Ok(())
}
