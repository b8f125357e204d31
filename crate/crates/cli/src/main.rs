use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use entroprel::io::{
    emit_component_failure, emit_failure_table, emit_multipliers, emit_reliability_curve,
    emit_stress_vs_failure, load_scenario, LoadedScenario, MultipliersDocument, Residuals,
    TableFormat,
};
use entroprel::validation::{nested_search, DOMINANCE_TOLERANCE};
use entroprel::{
    check_validity, entropy_reliability_report, estimate_multipliers, failure_matrix,
    identify_weakest_component, objective_terms, reliability_curve, ConvergenceReason, GridSpec,
    Interval, MultiplierPair, OptimizerRun, Scenario,
};
use log::LevelFilter;

const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "entroprel", version)]
#[command(about = "Maximum-entropy failure probabilities and series-system reliability")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the multipliers and write tables for the solution
    Solve {
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Emit tables for given multipliers without optimizing
    #[command(allow_negative_numbers = true)]
    Evaluate {
        scenario: PathBuf,
        #[arg(long)]
        lambda1: f64,
        #[arg(long)]
        lambda2: f64,
        /// Also write the output files into this directory
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Expected charging time and stress-level count for the charging block
    ChargingTime { scenario: PathBuf },
    /// Grid-search the objective and compare against the optimizer
    #[command(allow_negative_numbers = true)]
    Oracle {
        scenario: PathBuf,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        /// Refinement rounds after the coarse scan
        #[arg(long, default_value_t = 4)]
        rounds: usize,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        lambda1_range: Option<Vec<f64>>,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        lambda2_range: Option<Vec<f64>>,
    },
    /// Full pipeline plus plot-ready CSVs
    Report {
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn init_logging() {
    let level = match std::env::var("ENTROPREL_LOG").as_deref() {
        Ok("quiet") => LevelFilter::Off,
        Ok("info") => LevelFilter::Info,
        Ok("trace") => LevelFilter::Trace,
        _ => LevelFilter::Warn,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn load(path: &Path) -> anyhow::Result<LoadedScenario> {
    load_scenario(path).with_context(|| format!("loading {}", path.display()))
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Solve { scenario, out } => solve(&load(&scenario)?, &out),
        Command::Evaluate {
            scenario,
            lambda1,
            lambda2,
            out,
            format,
        } => evaluate(
            &load(&scenario)?,
            MultiplierPair::new(lambda1, lambda2),
            out.as_deref(),
            format,
        ),
        Command::ChargingTime { scenario } => charging_time(&load(&scenario)?),
        Command::Oracle {
            scenario,
            steps,
            rounds,
            lambda1_range,
            lambda2_range,
        } => oracle(
            &load(&scenario)?,
            steps,
            rounds,
            lambda1_range,
            lambda2_range,
        ),
        Command::Report { scenario, out } => report(&load(&scenario)?, &out),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn multipliers_document(
    scenario: &Scenario,
    loaded: &LoadedScenario,
    multipliers: MultiplierPair,
    run: Option<&OptimizerRun>,
) -> MultipliersDocument {
    let terms = objective_terms(multipliers, scenario, &loaded.options);
    MultipliersDocument {
        lambda1: multipliers.lambda1,
        lambda2: multipliers.lambda2,
        objective: terms.total(),
        residuals: Residuals {
            f1: terms.f1,
            f2: terms.f2,
            pf_residual: terms.pf_residual,
            loss_residual: terms.loss_residual,
            penalty_total: terms.penalty_total(),
        },
        convergence_reason: run.map(|r| r.convergence_reason),
        iterations: run.map(|r| r.iterations),
        validity: check_validity(scenario, multipliers),
    }
}

/// Writes every table for `multipliers`. Reliability tables are skipped with
/// a warning when the matrix is not a valid probability table.
fn write_solution(
    loaded: &LoadedScenario,
    multipliers: MultiplierPair,
    run: Option<&OptimizerRun>,
    out: &Path,
    plots: bool,
) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let scenario = &loaded.scenario;
    let matrix = failure_matrix(scenario, multipliers);
    let doc = multipliers_document(scenario, loaded, multipliers, run);
    write(out, "multipliers.json", &emit_multipliers(&doc))?;
    write(
        out,
        "failure_table.csv",
        &emit_failure_table(scenario, &matrix, TableFormat::Csv),
    )?;
    write(
        out,
        "failure_table.json",
        &emit_failure_table(scenario, &matrix, TableFormat::Json),
    )?;
    match reliability_curve(scenario, &matrix) {
        Ok(curve) => {
            let weakest = identify_weakest_component(scenario, &matrix)?;
            write(
                out,
                "reliability_curve.csv",
                &emit_reliability_curve(&curve),
            )?;
            write(
                out,
                "component_failure.csv",
                &emit_component_failure(&curve, &weakest),
            )?;
        }
        Err(e) => log::warn!("reliability tables skipped: {e}"),
    }
    if plots {
        write(
            out,
            "stress_vs_failure.csv",
            &emit_stress_vs_failure(scenario, &matrix),
        )?;
        if let Ok(points) = entropy_reliability_report(scenario, std::slice::from_ref(&matrix)) {
            let mut csv = String::from("entropy_nats,network_failure_exact,stress_level,R_j\n");
            for p in &points {
                for (j, r) in p.reliability.iter().enumerate() {
                    csv.push_str(&format!(
                        "{:.6},{:.6},{j},{r:.6}\n",
                        p.entropy_nats, p.network_failure_exact
                    ));
                }
            }
            write(out, "entropy_reliability.csv", &csv)?;
        }
    }
    Ok(())
}

fn print_summary(loaded: &LoadedScenario, multipliers: MultiplierPair) -> bool {
    let scenario = &loaded.scenario;
    let validity = check_validity(scenario, multipliers);
    println!("lambda1 = {:.6}", multipliers.lambda1);
    println!("lambda2 = {:.6}", multipliers.lambda2);
    let terms = objective_terms(multipliers, scenario, &loaded.options);
    println!(
        "F1 = {:.6} (target {}), F2 = {:.6} (target {}), objective = {:.6}",
        terms.f1,
        scenario.pf_target(),
        terms.f2,
        scenario.loss_target(),
        terms.total()
    );
    for (label, ok) in validity.checks() {
        println!("{label}: {}", if ok { "True" } else { "False" });
    }
    validity.overall_valid
}

fn solve(loaded: &LoadedScenario, out: &Path) -> anyhow::Result<u8> {
    let run = estimate_multipliers(&loaded.scenario, &loaded.options)?;
    println!(
        "stopped after {} iterations: {}",
        run.iterations, run.convergence_reason
    );
    let valid = print_summary(loaded, run.final_multipliers);
    write_solution(loaded, run.final_multipliers, Some(&run), out, false)?;
    Ok(outcome(run.convergence_reason, valid))
}

fn outcome(reason: ConvergenceReason, valid: bool) -> u8 {
    if reason == ConvergenceReason::MaxIterations {
        eprintln!("optimizer did not converge within the iteration limit");
        EXIT_NOT_CONVERGED
    } else if !valid {
        eprintln!("multipliers violate the validity conditions");
        EXIT_INVALID
    } else {
        0
    }
}

fn evaluate(
    loaded: &LoadedScenario,
    multipliers: MultiplierPair,
    out: Option<&Path>,
    format: Format,
) -> anyhow::Result<u8> {
    let scenario = &loaded.scenario;
    let matrix = failure_matrix(scenario, multipliers);
    let format = match format {
        Format::Csv => TableFormat::Csv,
        Format::Json => TableFormat::Json,
    };
    print!("{}", emit_failure_table(scenario, &matrix, format));
    if let Some(out) = out {
        write_solution(loaded, multipliers, None, out, false)?;
    }
    if check_validity(scenario, multipliers).overall_valid {
        Ok(0)
    } else {
        eprintln!("multipliers violate the validity conditions");
        Ok(EXIT_INVALID)
    }
}

fn charging_time(loaded: &LoadedScenario) -> anyhow::Result<u8> {
    let Some(session) = &loaded.charging else {
        bail!("scenario has no charging block");
    };
    let summary = session.summarize()?;
    println!("energy_needed_kwh = {:.3}", summary.energy_kwh);
    println!("expected_hours = {:.3}", summary.expected_h);
    println!("actual_hours = {:.3}", session.actual_duration_h);
    println!("stress_levels = {}", summary.stress_levels);
    if summary.stress_levels != loaded.scenario.level_count() {
        log::warn!(
            "session implies {} stress levels but the stress matrix has {}",
            summary.stress_levels,
            loaded.scenario.level_count()
        );
    }
    Ok(0)
}

fn range(v: Option<Vec<f64>>, default: Interval) -> anyhow::Result<Interval> {
    match v.as_deref() {
        None => Ok(default),
        Some([lo, hi]) => Ok(Interval::new(*lo, *hi)?),
        Some(_) => bail!("a range takes exactly two values"),
    }
}

fn oracle(
    loaded: &LoadedScenario,
    steps: usize,
    rounds: usize,
    lambda1_range: Option<Vec<f64>>,
    lambda2_range: Option<Vec<f64>>,
) -> anyhow::Result<u8> {
    let scenario = &loaded.scenario;
    let options = &loaded.options;
    let default = GridSpec::default_for(scenario, options, steps)?;
    let grid = GridSpec::new(
        range(lambda1_range, default.lambda1_range())?,
        range(lambda2_range, default.lambda2_range())?,
        steps,
        options,
    )?;
    let run = estimate_multipliers(scenario, options)?;
    let scans = nested_search(scenario, options, &grid, rounds, 41)?;
    for (k, scan) in scans.iter().enumerate() {
        println!(
            "grid round {k}: lambda = ({:.6}, {:.6}) objective = {:.9} spacing = {:.3e}",
            scan.best.lambda1, scan.best.lambda2, scan.objective, scan.spacing
        );
    }
    let best = scans.last().expect("at least the coarse scan");
    println!(
        "optimizer:    lambda = ({:.6}, {:.6}) objective = {:.9} ({} iterations, {})",
        run.final_multipliers.lambda1,
        run.final_multipliers.lambda2,
        run.final_objective,
        run.iterations,
        run.convergence_reason
    );
    let gap = run.final_objective - best.objective;
    let dominated = gap > DOMINANCE_TOLERANCE;
    println!(
        "optimizer - grid = {gap:.3e}: {}",
        if dominated {
            "DOMINATED"
        } else {
            "not dominated"
        }
    );
    Ok(if dominated { EXIT_NOT_CONVERGED } else { 0 })
}

fn report(loaded: &LoadedScenario, out: &Path) -> anyhow::Result<u8> {
    let run = estimate_multipliers(&loaded.scenario, &loaded.options)?;
    let valid = print_summary(loaded, run.final_multipliers);
    write_solution(loaded, run.final_multipliers, Some(&run), out, true)?;
    let matrix = failure_matrix(&loaded.scenario, run.final_multipliers);
    if let Ok(curve) = reliability_curve(&loaded.scenario, &matrix) {
        println!(
            "network failure: exact {:.6}, linearized {:.6}; entropy {:.6} nats",
            curve.network_failure_exact, curve.network_failure_linear, curve.entropy_nats
        );
        println!(
            "weakest component: {}",
            loaded.scenario.components()[curve.weakest_component].name
        );
    }
    Ok(outcome(run.convergence_reason, valid))
}
