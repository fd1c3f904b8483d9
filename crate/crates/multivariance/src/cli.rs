//! Command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use multivariance_core::independence::{
    combined_test, conservative_test, consistent_test, monte_carlo_test, resampling_test_with, PValueMethod,
    StatisticEvaluator,
};
use multivariance_core::measures::compute;
use multivariance_core::psi::parse_psi_list;
use multivariance_core::simulate::{generate, power_csv, PowerConfig, PowerTest, Transform};
use multivariance_core::structure::{detect, to_dot, Decision, DetectionOptions, Mode, NodeLabel};
use multivariance_core::{Dataset, Error, MeasureKind, Psi, Result, RngState, Scenario, ScenarioKind, StatKind};

use crate::ingest::{ingest_csv, write_csv, GroupSpec};
use crate::parallel::power_study_parallel;
use crate::report::{report_json, to_json, Metadata};

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "MULTIVARIANCE_SEED";

#[derive(Debug, Parser)]
#[command(name = "multivariance", version, about = "Distance multivariance measures, independence tests and dependence structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute a sample measure and print it as JSON.
    Compute(ComputeArgs),
    /// Run an independence test and print the outcome as JSON.
    Test(TestArgs),
    /// Detect the dependence structure and write it as DOT or JSON.
    Structure(StructureArgs),
    /// Write samples of a benchmark scenario as CSV.
    Simulate(SimulateArgs),
    /// Estimate rejection rates over repeated samples; prints a CSV table.
    Power(PowerArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Column groups, e.g. `x:1-2,y:3` (1-based, inclusive). Default: one group per column.
    #[arg(long, default_value = "")]
    groups: String,
    /// Distance function: `euclid:a`, `expbnd:a:d` or `log`; a comma list gives one per variable.
    #[arg(long, default_value = "euclid:1")]
    psi: String,
}

#[derive(Debug, Args)]
struct SeedArgs {
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ComputeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// multi, total, m2, m3, m:K, totm:K, lambda:L, rcor, mcor, mcor2 or totmcor_lb.
    #[arg(long, default_value = "multi")]
    kind: String,
    /// Use raw instead of normalized matrices.
    #[arg(long)]
    raw: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TestMethod {
    Conservative,
    Resampling,
    Montecarlo,
    Consistent,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    seed: SeedArgs,
    /// multi, total, m2, m3, m:K, lambda:L or comb.
    #[arg(long, default_value = "multi")]
    kind: String,
    #[arg(long, value_enum, default_value = "conservative")]
    method: TestMethod,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Replicates for resampling and Monte Carlo.
    #[arg(long = "L", default_value_t = 300)]
    replicates: usize,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long = "C", default_value_t = 2.0)]
    c: f64,
    /// Scenario whose marginals feed the Monte Carlo test.
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Clustered,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DecisionArg {
    Conservative,
    Resampling,
    Consistent,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LabelArg {
    Statistic,
    Order,
    PValue,
}

#[derive(Debug, Args)]
struct StructureArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long, value_enum, default_value = "clustered")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "conservative")]
    decision: DecisionArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long = "L", default_value_t = 300)]
    replicates: usize,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long = "C", default_value_t = 2.0)]
    c: f64,
    #[arg(long, value_enum, default_value = "statistic")]
    label: LabelArg,
    /// Output file; `.json` selects JSON, anything else DOT. Default: DOT on stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// e.g. coins:2, tetrahedron, perturbed:2:0.5:normal, mvnormal:15:const:0.1, independent:6:coins:2.
    #[arg(long)]
    scenario: String,
    /// Variable dimensions, e.g. `5,5,5`. Default: one variable per column.
    #[arg(long)]
    layout: Option<String>,
    /// ln_square or arctan, applied to every column.
    #[arg(long)]
    transform: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long = "N")]
    samples: usize,
    /// Output CSV; default stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PowerMethodArg {
    Conservative,
    Resampling,
}

#[derive(Debug, Args)]
struct PowerArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    seed: SeedArgs,
    /// multi, total, m2, m3, m:K, lambda:L or comb.
    #[arg(long, default_value = "multi")]
    test: String,
    #[arg(long, value_enum, default_value = "resampling")]
    method: PowerMethodArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long = "L", default_value_t = 300)]
    replicates: usize,
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    /// Comma-separated sample sizes.
    #[arg(long = "Ns", value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Reuse one resampling distribution per sample size.
    #[arg(long)]
    shared_null: bool,
    #[arg(long, default_value = "euclid:1")]
    psi: String,
    /// Worker threads; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output CSV; default stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_f64(text: &str, what: &str) -> Result<f64> {
    text.parse().map_err(|_| Error::Usage(format!("invalid {what} '{text}'")))
}

fn parse_usize(text: &str, what: &str) -> Result<usize> {
    text.parse().map_err(|_| Error::Usage(format!("invalid {what} '{text}'")))
}

/// `None` stands for the combined test.
fn parse_stat_kind(text: &str) -> Result<Option<StatKind>> {
    Ok(Some(match text {
        "multi" => StatKind::Multi,
        "total" => StatKind::Total,
        "m2" => StatKind::M(2),
        "m3" => StatKind::M(3),
        "comb" | "combined" => return Ok(None),
        _ => match text.split_once(':') {
            Some(("m", k)) => StatKind::M(parse_usize(k, "order")?),
            Some(("lambda", l)) => StatKind::LambdaTotal(parse_f64(l, "lambda")?),
            _ => return Err(Error::Usage(format!("unknown statistic '{text}'"))),
        },
    }))
}

fn parse_measure_kind(text: &str) -> Result<MeasureKind> {
    Ok(match text {
        "multi" => MeasureKind::Multivariance,
        "total" => MeasureKind::Total,
        "m2" => MeasureKind::MMulti(2),
        "m3" => MeasureKind::MMulti(3),
        "rcor" => MeasureKind::Multicorrelation,
        "mcor" => MeasureKind::UnnormalizedMulticorrelation,
        "mcor2" => MeasureKind::Mcor2,
        "totmcor_lb" => MeasureKind::TotMcorLb,
        _ => match text.split_once(':') {
            Some(("m", k)) => MeasureKind::MMulti(parse_usize(k, "order")?),
            Some(("totm", k)) => MeasureKind::TotalM(parse_usize(k, "order")?),
            Some(("lambda", l)) => MeasureKind::LambdaTotal(parse_f64(l, "lambda")?),
            _ => return Err(Error::Usage(format!("unknown measure '{text}'"))),
        },
    })
}

fn load(args: &DataArgs) -> Result<(Dataset, Vec<Psi>)> {
    let spec: GroupSpec = args.groups.parse()?;
    let data = ingest_csv(&args.input, &spec)?;
    let psis = parse_psi_list(&args.psi)?;
    Ok((data, psis))
}

fn scenario(args: &ScenarioArgs) -> Result<Scenario> {
    let mut sc = Scenario::new(args.scenario.parse::<ScenarioKind>()?);
    if let Some(layout) = &args.layout {
        sc.groups = layout
            .split(',')
            .map(|d| parse_usize(d.trim(), "group dimension"))
            .collect::<Result<_>>()?;
    }
    if let Some(t) = &args.transform {
        sc.transform = Some(t.parse::<Transform>()?);
    }
    sc.validate()?;
    Ok(sc)
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| Error::Data(format!("cannot write output: {e}"));
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Data(format!("cannot write {}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(io),
    }
}

fn emit<T: Serialize>(meta: &Metadata, result: &T, out: &mut dyn Write) -> Result<()> {
    let mut text = report_json(meta, result);
    text.push('\n');
    write_output(None, &text, out)
}

fn run_compute(args: &ComputeArgs, out: &mut dyn Write) -> Result<()> {
    let (data, psis) = load(&args.data)?;
    let kind = parse_measure_kind(&args.kind)?;
    let value = compute(&data, &psis, kind, !args.raw)?;
    emit(&Metadata::new(&data, &psis, None), &value, out)
}

fn run_test(args: &TestArgs, out: &mut dyn Write) -> Result<()> {
    let (data, psis) = load(&args.data)?;
    let seed = args.seed.seed;
    let mut rng = RngState::new(seed);
    let meta = Metadata::new(&data, &psis, Some(seed));
    let Some(kind) = parse_stat_kind(&args.kind)? else {
        let method = match args.method {
            TestMethod::Conservative => PValueMethod::Conservative,
            TestMethod::Resampling => PValueMethod::Resampling { replicates: args.replicates },
            _ => return Err(Error::Usage("the combined test supports conservative and resampling methods".into())),
        };
        let outcome = combined_test(&data, &psis, args.alpha, method, &mut rng)?;
        return emit(&meta, &outcome, out);
    };
    let eval = StatisticEvaluator::new(&data, &psis, kind)?;
    let mut outcome = match args.method {
        TestMethod::Conservative => conservative_test(kind, eval.observed(), args.alpha)?,
        TestMethod::Resampling => resampling_test_with(&eval, args.replicates, args.alpha, &mut rng)?,
        TestMethod::Montecarlo => {
            let text = args
                .scenario
                .as_deref()
                .ok_or_else(|| Error::Usage("the Monte Carlo test needs --scenario".into()))?;
            let sc = scenario(&ScenarioArgs { scenario: text.to_string(), layout: None, transform: None })?;
            monte_carlo_test(&sc, &data, &psis, kind, args.replicates, args.alpha, &mut rng)?
        }
        TestMethod::Consistent => consistent_test(kind, eval.observed(), data.samples(), args.beta, args.c)?,
    };
    if matches!(args.method, TestMethod::Conservative | TestMethod::Consistent) {
        outcome.notes.extend(eval.notes().iter().cloned());
    }
    emit(&meta, &outcome, out)
}

fn run_structure(args: &StructureArgs, out: &mut dyn Write) -> Result<()> {
    let (data, psis) = load(&args.data)?;
    let decision = match args.decision {
        DecisionArg::Conservative => Decision::Conservative { alpha: args.alpha },
        DecisionArg::Resampling => Decision::Resampling { alpha: args.alpha, replicates: args.replicates },
        DecisionArg::Consistent => Decision::Consistent { beta: args.beta, c: args.c },
    };
    let mode = match args.mode {
        ModeArg::Full => Mode::Full,
        ModeArg::Clustered => Mode::Clustered,
    };
    let mut options = DetectionOptions::new(mode, decision);
    options.label = match args.label {
        LabelArg::Statistic => NodeLabel::Statistic,
        LabelArg::Order => NodeLabel::Order,
        LabelArg::PValue => NodeLabel::PValue,
    };
    let seed = args.seed.seed;
    let graph = detect(&data, &psis, &options, &mut RngState::new(seed))?;
    for w in &graph.metadata.warnings {
        eprintln!("warning: {w}");
    }
    let json = args.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "json"));
    let text = if json { to_json(&graph, &Metadata::new(&data, &psis, Some(seed))) + "\n" } else { to_dot(&graph) };
    write_output(args.out.as_deref(), &text, out)
}

fn run_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let sc = scenario(&args.scenario)?;
    let data = generate(&sc, args.samples, &mut RngState::new(args.seed.seed))?;
    let mut buf = Vec::new();
    write_csv(&data, &mut buf)?;
    write_output(args.out.as_deref(), &String::from_utf8(buf).expect("CSV is UTF-8"), out)
}

fn run_power(args: &PowerArgs, out: &mut dyn Write) -> Result<()> {
    let sc = scenario(&args.scenario)?;
    let test = match parse_stat_kind(&args.test)? {
        Some(kind) => PowerTest::Single(kind),
        None => PowerTest::Combined,
    };
    let method = match args.method {
        PowerMethodArg::Conservative => PValueMethod::Conservative,
        PowerMethodArg::Resampling => PValueMethod::Resampling { replicates: args.replicates },
    };
    let config = PowerConfig { test, method, alpha: args.alpha, psis: parse_psi_list(&args.psi)? };
    let rows = power_study_parallel(&sc, &config, &args.sizes, args.runs, args.seed.seed, args.shared_null, args.workers)?;
    write_output(args.out.as_deref(), &power_csv(&rows), out)
}

/// Exit status for an error: 2 for data problems, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Data(_) => 2,
        _ => 1,
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit status: 0 on success, 1 on usage errors, 2 on data errors.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Compute(a) => run_compute(a, out),
        Command::Test(a) => run_test(a, out),
        Command::Structure(a) => run_structure(a, out),
        Command::Simulate(a) => run_simulate(a, out),
        Command::Power(a) => run_power(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
