use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use weaktomo::harness::{
    compare_schemes, demo_phase_detection, measure, reconstruct_records, reconstruct_table,
    run_experiment_with, simulate_records, write_comparison_csv, DataMode, ExperimentConfig,
    PhaseReport, Workers,
};
use weaktomo::pointer::{open_input, open_output, read_records_csv, write_records_csv};
use weaktomo::qcore::{DensityMatrix, OrthonormalBasis};
use weaktomo::schemes::SchemeRegistry;
use weaktomo::weakval::{check_sum_rules, weak_value_table, SumRuleReport, WeakValueTable};
use weaktomo::Error;

/// Weak-measurement state tomography.
///
/// Exit status: 0 on success, 1 on a domain error (reported as JSON
/// `{"error": code, "message": text}` on standard error), 2 on a usage or
/// configuration error. `WEAKTOMO_THREADS` caps the worker count.
#[derive(Parser)]
#[command(name = "weaktomo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the true state, both bases and the exact weak-value table.
    Gen(Common),
    /// Write sampled pointer records as CSV (gzip when OUT ends in .gz).
    Simulate(Common),
    /// Reconstruct from a table or records file, or from a fresh run.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Weak-value table (.json) or pointer records (.csv, .csv.gz).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Check the sum rules of a table; the exact projector table by default.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Weak-value table (.json) to check.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Largest accepted deviation.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Phase detection through a large imaginary weak value.
    DemoPhase(Demo),
    /// Monte Carlo comparison of schemes over a shot grid, as CSV.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated scheme names; every registered scheme by default.
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<String>,
        /// Comma-separated shot counts.
        #[arg(long, value_delimiter = ',', default_values_t = [10_000u64, 100_000])]
        shot_grid: Vec<u64>,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted `key=value` override, applied before parsing. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Use exact weak values.
    #[arg(long, conflicts_with = "sampled")]
    exact: bool,
    /// Estimate weak values from sampled pointer readouts.
    #[arg(long)]
    sampled: bool,
    /// Overrides the config shot count.
    #[arg(long)]
    shots: Option<u64>,
    /// Suppress the wall-time line on standard error.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct Demo {
    /// Relative phase θ in (0, π].
    #[arg(long, default_value_t = 0.1)]
    theta: f64,
    /// Coupling strength.
    #[arg(long, default_value_t = 0.01)]
    g: f64,
    /// Pointer momentum spread Δp.
    #[arg(long, default_value_t = 0.5)]
    dp: f64,
    /// Exact weak value only (default).
    #[arg(long, conflicts_with = "sampled")]
    exact: bool,
    /// Add a sampled estimate.
    #[arg(long)]
    sampled: bool,
    /// Shots of the sampled estimate.
    #[arg(long, default_value_t = 10_000_000)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

enum Failure {
    Usage(Error),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let (result, quiet) = match Workers::from_env() {
        Ok(workers) => {
            let quiet = cli.command.quiet();
            (workers.install(|| dispatch(cli.command)), quiet)
        }
        Err(e) => (Err(Failure::Usage(e)), true),
    };
    match result {
        Ok(()) => {
            if !quiet {
                eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Domain(e)) => {
            report(&e);
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            report(&e);
            eprintln!("see `weaktomo --help`");
            ExitCode::from(2)
        }
    }
}

fn report(e: &Error) {
    let body = serde_json::json!({ "error": e.code(), "message": e.to_string() });
    eprintln!("{body}");
}

impl Command {
    fn quiet(&self) -> bool {
        match self {
            Command::Gen(c) | Command::Simulate(c) => c.quiet,
            Command::Reconstruct { common, .. }
            | Command::Verify { common, .. }
            | Command::Compare { common, .. } => common.quiet,
            Command::DemoPhase(d) => d.quiet,
        }
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Gen(c) => gen(&c),
        Command::Simulate(c) => simulate(&c),
        Command::Reconstruct { common, input } => reconstruct(&common, input.as_deref()),
        Command::Verify { common, input, tol } => verify(&common, input.as_deref(), tol),
        Command::DemoPhase(d) => demo(&d),
        Command::Compare {
            common,
            schemes,
            shot_grid,
        } => compare(&common, schemes, &shot_grid),
    }
}

/// Loads the config; every failure here is a usage error.
fn load(c: &Common) -> std::result::Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(&c.config).map_err(|e| {
        Failure::Usage(Error::Config(format!("cannot read {}: {e}", c.config.display())))
    })?;
    let mut overrides = c.overrides.clone();
    if let Some(seed) = c.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(shots) = c.shots {
        overrides.push(format!("shots={shots}"));
    }
    if c.exact {
        overrides.push("data_mode=exact".into());
    }
    if c.sampled {
        overrides.push("data_mode=sampled".into());
    }
    ExperimentConfig::from_json_with_overrides(&text, &overrides).map_err(|e| match e {
        Error::Json(e) => Failure::Usage(Error::Config(e.to_string())),
        e => Failure::Usage(e),
    })
}

fn sink(out: Option<&Path>) -> weaktomo::Result<Box<dyn Write>> {
    match out {
        Some(path) => open_output(path),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Outcome {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    writeln!(w).map_err(Error::from)?;
    w.flush().map_err(Error::from)?;
    Ok(())
}

#[derive(Serialize)]
struct Generated {
    config: ExperimentConfig,
    state: DensityMatrix,
    basis_a: OrthonormalBasis,
    basis_b: OrthonormalBasis,
    /// Post-selection basis of the scheme's plan.
    post_basis: OrthonormalBasis,
    table: WeakValueTable,
}

fn gen(c: &Common) -> Outcome {
    let mut cfg = load(c)?;
    cfg.data_mode = DataMode::Exact;
    let truth = cfg.true_state()?;
    let setup = cfg.setup()?;
    let plan = SchemeRegistry::builtin().get(&cfg.scheme)?.plan(&setup)?;
    let table = measure(&cfg, &truth, &plan)?;
    write_json(
        c.out.as_deref(),
        &Generated {
            state: truth.to_density(),
            basis_a: setup.basis_a,
            basis_b: setup.basis_b,
            post_basis: plan.post,
            table,
            config: cfg,
        },
    )
}

fn simulate(c: &Common) -> Outcome {
    let mut cfg = load(c)?;
    cfg.data_mode = DataMode::Sampled;
    cfg.validate().map_err(Failure::Usage)?;
    let (sampler, _) = simulate_records(&cfg)?;
    write_records_csv(sink(c.out.as_deref())?, sampler.records())?;
    Ok(())
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads a bare table, or the `table` field of a `gen` or `reconstruct`
/// output.
fn read_table(path: &Path) -> weaktomo::Result<WeakValueTable> {
    let value: serde_json::Value = serde_json::from_reader(open_input(path)?)?;
    let value = match value.get("table") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(value).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn reconstruct(c: &Common, input: Option<&Path>) -> Outcome {
    let cfg = load(c)?;
    let registry = SchemeRegistry::builtin();
    let bundle = match input {
        None => run_experiment_with(&registry, &cfg)?,
        Some(path) if is_json(path) => reconstruct_table(&registry, &cfg, read_table(path)?)?,
        Some(path) => {
            let mut bad = None;
            let records = read_records_csv(open_input(path)?).map_while(|r| match r {
                Ok(r) => Some(r),
                Err(e) => {
                    bad = Some(e);
                    None
                }
            });
            let bundle = reconstruct_records(&registry, &cfg, records);
            if let Some(e) = bad {
                return Err(e.into());
            }
            bundle?
        }
    };
    write_json(c.out.as_deref(), &bundle)
}

#[derive(Serialize)]
struct Verification {
    tolerance: f64,
    #[serde(flatten)]
    report: SumRuleReport,
    max_deviation: f64,
    pass: bool,
}

fn verify(c: &Common, input: Option<&Path>, tol: f64) -> Outcome {
    let cfg = load(c)?;
    let rho = cfg.true_state()?.to_density();
    let setup = cfg.setup()?;
    let table = match input {
        Some(path) => read_table(path)?,
        None => weak_value_table(&rho, &setup.basis_a, &setup.basis_b)?,
    };
    // the diagonal rule needs one column per measured basis projector
    let reference = (table.n_obs() == cfg.dim).then_some((&rho, &setup.basis_a));
    let report = check_sum_rules(&table, reference)?;
    let max_deviation = report.max_deviation();
    let pass = max_deviation <= tol;
    write_json(
        c.out.as_deref(),
        &Verification {
            tolerance: tol,
            report,
            max_deviation,
            pass,
        },
    )?;
    if !pass {
        return Err(Error::VerificationFailed(format!(
            "sum-rule deviation {max_deviation:e} exceeds {tol:e}"
        ))
        .into());
    }
    Ok(())
}

/// Six significant digits.
fn sig(x: f64) -> String {
    let rounded = format!("{x:.5e}");
    match rounded.parse::<f64>() {
        Ok(v) if v == 0.0 || (1e-4..1e6).contains(&v.abs()) => v.to_string(),
        _ => rounded,
    }
}

fn print_report(r: &PhaseReport) {
    let w = r.W_exact;
    println!("theta = {}", sig(r.theta));
    println!("W = {} {} {}i", sig(w.re), if w.im < 0.0 { "-" } else { "+" }, sig(w.im.abs()));
    println!("Im W = {}", sig(w.im));
    println!("P(post) = {}", sig(r.postselect_probability));
    println!("dq = {}", sig(r.dq));
    println!("dp = {}", sig(r.dp_shift));
    println!("dp (exact evolution) = {}", sig(r.dp_shift_exact_evolution));
    println!(
        "dp (leading order) = {}, rel diff {}",
        sig(r.leading_order_dp),
        sig(r.leading_order_rel_diff)
    );
    if let Some(s) = &r.sampled {
        println!("shots = {}, post-selected = {}", s.shots, s.postselected);
        println!(
            "Im W (sampled) = {} +/- {}",
            sig(s.w_estimate.im),
            sig(s.w_stderr.im)
        );
    }
    println!("theta estimate = {}, rel error {}", sig(r.theta_estimate), sig(r.theta_rel_error));
    if let Some(p) = r.predicted_rel_error {
        println!("predicted rel error = {}", sig(p));
    }
    if r.warning {
        println!("warning: predicted relative error exceeds 100%, raise shots or g");
    }
}

fn demo(d: &Demo) -> Outcome {
    let shots = d.sampled.then_some(d.shots);
    let r = demo_phase_detection(d.theta, d.g, d.dp, shots, d.seed)?;
    print_report(&r);
    if let Some(path) = &d.out {
        write_json(Some(path), &r)?;
    }
    Ok(())
}

fn compare(c: &Common, schemes: Vec<String>, shot_grid: &[u64]) -> Outcome {
    let mut cfg = load(c)?;
    if !c.exact {
        cfg.data_mode = DataMode::Sampled;
    }
    let registry = SchemeRegistry::builtin();
    let schemes = if schemes.is_empty() {
        registry.names().map(String::from).collect()
    } else {
        schemes
    };
    for s in &schemes {
        registry.get(s).map_err(Failure::Usage)?;
    }
    let rows = compare_schemes(&registry, &cfg, &schemes, shot_grid)?;
    write_comparison_csv(sink(c.out.as_deref())?, &rows)?;
    Ok(())
}
