use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use curstat::boot::{
    confidence_band, default_c_grid, resolve_bandwidths, AutoBandwidth, BandwidthRate, BandwidthRule, BiasRule,
    CiRequest, Method, SubsampleConfig,
};
use curstat::csreg::{bootstrap_sse_ci, read_regression_csv, SearchConfig};
use curstat::exec::with_workers;
use curstat::kernel::Boundary;
use curstat::smle::KnownTruth;
use curstat::sim::{run_coverage_experiment, run_regression_experiment, TruthModel};
use curstat::{read_sample_csv, CurrentStatusSample, Error, Grid, RngSpec, Support};

const LONG_HELP: &str = "\
Full-size recipe (--long): N = 5000 runs, B = 1000 resamples. For the uniform
model at n = 1000 with h = 2 n^(-1/5) this takes hours on one core:

    curstat simulate --model uniform2 --n 1000 --grid 0.5,1,1.5 --bandwidth 0.50238 --long

Add --method senxu for the smooth-bootstrap MLE intervals, or --model
exp_trunc2 --bias true --grid 0.2,0.5,1 for the bias-corrected comparison.";

#[derive(Parser, Debug)]
#[command(name = "curstat", version, about = "Confidence intervals for current status data")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pointwise confidence band for the distribution function.
    Ci(CiArgs),
    /// Subsampling choice of the bandwidth constant per grid point.
    Bandwidth(BandwidthArgs),
    /// Coverage and length experiment on a simulation model.
    #[command(after_long_help = LONG_HELP)]
    Simulate(SimulateArgs),
    /// Score estimator and bootstrap interval for the regression slope.
    Regress(RegressArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Output CSV file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Master seed.
    #[arg(long, env = "CURSTAT_SEED")]
    seed: Option<u64>,
    /// Worker threads; the output does not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    /// Evaluation points, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "grid_range")]
    grid: Option<Vec<f64>>,
    /// Regular grid `lo:hi:step`.
    #[arg(long)]
    grid_range: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct SelectionArgs {
    /// Rate of the selected bandwidth `c n^-r`.
    #[arg(long, value_enum, default_value_t = RateArg::Fifth)]
    rate: RateArg,
    /// Candidate constants, comma separated.
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
    /// Subsample size m.
    #[arg(long)]
    m: Option<usize>,
    /// Subsamples per candidate.
    #[arg(long, default_value_t = 500)]
    b_sub: usize,
    /// Pilot constant; defaults to the support length.
    #[arg(long)]
    c0: Option<f64>,
}

#[derive(Args, Debug)]
struct CiArgs {
    /// CSV with `time,status[,count]` columns.
    input: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Bootstrap replicates.
    #[arg(short = 'B', long = "replicates", default_value_t = 1000)]
    b: usize,
    /// studentized, wald1, wald2, wald3, senxu or smooth_smle.
    #[arg(long, default_value = "studentized")]
    method: String,
    /// `auto` or a fixed bandwidth.
    #[arg(long, default_value = "auto")]
    bandwidth: String,
    #[command(flatten)]
    selection: SelectionArgs,
    #[arg(long, value_enum, default_value_t = BiasArg::None)]
    bias: BiasArg,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Reflect)]
    boundary: BoundaryArg,
    /// Support `lo,hi`; defaults to the range of the times.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    support: Option<(f64, f64)>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct BandwidthArgs {
    input: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Reflect)]
    boundary: BoundaryArg,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    support: Option<(f64, f64)>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// uniform2 or exp_trunc2.
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Simulation runs N.
    #[arg(short = 'N', long = "runs", default_value_t = 500)]
    runs: usize,
    #[arg(short = 'B', long = "replicates", default_value_t = 500)]
    b: usize,
    /// Full-size recipe: N = 5000 and B = 1000.
    #[arg(long)]
    long: bool,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// studentized, wald1, wald2, wald3, senxu or smooth_smle.
    #[arg(long, default_value = "studentized")]
    method: String,
    #[arg(long, default_value = "auto")]
    bandwidth: String,
    #[command(flatten)]
    selection: SelectionArgs,
    /// `true` uses the model's exact bias.
    #[arg(long, value_enum, default_value_t = BiasArg::None)]
    bias: BiasArg,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Reflect)]
    boundary: BoundaryArg,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct RegressArgs {
    /// CSV with `time,covariate,status` columns, or a model name with
    /// `--simulate`.
    input: PathBuf,
    #[arg(short = 'B', long = "replicates", default_value_t = 1000)]
    b: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Interval `lo,hi` of the coarse pilot scan.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    search: Option<(f64, f64)>,
    /// Truncation of the score.
    #[arg(long, default_value_t = 0.001)]
    epsilon: f64,
    /// Run a Monte Carlo experiment on the named regression model instead.
    #[arg(long)]
    simulate: bool,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(short = 'N', long = "runs", default_value_t = 200)]
    runs: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum RateArg {
    /// c n^(-1/5)
    #[value(alias = "standard")]
    Fifth,
    /// c n^(-1/4)
    Quarter,
    /// (c/3) n^(-1/5)
    Third,
}

impl From<RateArg> for BandwidthRate {
    fn from(r: RateArg) -> Self {
        match r {
            RateArg::Fifth => BandwidthRate::Standard,
            RateArg::Quarter => BandwidthRate::Quarter,
            RateArg::Third => BandwidthRate::Third,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum BiasArg {
    None,
    Direct,
    Subsample,
    True,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum BoundaryArg {
    Reflect,
    Off,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Reflect => Boundary::Reflect,
            BoundaryArg::Off => Boundary::Off,
        }
    }
}

enum Failure {
    Input(String),
    Estimator(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::DegenerateWindow { .. }
            | Error::SingularDesign { .. }
            | Error::UnstableFit { .. }
            | Error::DegenerateDiagram
            | Error::ExperimentFailed { .. } => Failure::Estimator(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn input_error<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Input(msg.into()))
}

fn parse_pair(text: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = text.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{text}`"))?;
    let lo = a.trim().parse::<f64>().map_err(|e| format!("`{a}`: {e}"))?;
    let hi = b.trim().parse::<f64>().map_err(|e| format!("`{b}`: {e}"))?;
    Ok((lo, hi))
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos() as u64).unwrap_or(0)
    })
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Input(format!("cannot open {}: {e}", path.display())))
}

fn sink(output: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match output {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Input(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn build_grid(args: &GridArgs, support: Support) -> CliResult<Grid> {
    if let Some(points) = &args.grid {
        return Ok(Grid::new(points.clone())?);
    }
    if let Some(spec) = &args.grid_range {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Failure::Input(format!("cannot parse grid range `{spec}`")))?;
        let [lo, hi, step] = parts[..] else {
            return input_error(format!("grid range `{spec}` must be lo:hi:step"));
        };
        return Ok(Grid::regular(lo, hi, step)?);
    }
    let l = support.length();
    Ok(Grid::new((1..20).map(|k| support.lo + l * k as f64 / 20.0).collect())?)
}

fn load_sample(input: &Path, support: &Option<(f64, f64)>) -> CliResult<CurrentStatusSample> {
    let sample = read_sample_csv(open(input)?)?;
    Ok(match *support {
        Some((lo, hi)) => sample.with_support(Support::new(lo, hi)?)?,
        None => sample,
    })
}

fn subsample(sel: &SelectionArgs) -> SubsampleConfig {
    SubsampleConfig { m: sel.m, b_sub: sel.b_sub, c0: sel.c0, with_replacement: false }
}

fn bandwidth_rule(text: &str, sel: &SelectionArgs) -> CliResult<BandwidthRule> {
    if text == "auto" {
        return Ok(BandwidthRule::Auto(AutoBandwidth {
            c_grid: sel.c_grid.clone(),
            rate: sel.rate.into(),
            subsample: subsample(sel),
        }));
    }
    match text.parse::<f64>() {
        Ok(h) => Ok(BandwidthRule::Fixed(h)),
        Err(_) => input_error(format!("bandwidth `{text}` is neither `auto` nor a number")),
    }
}

fn bias_rule(bias: BiasArg, sel: &SelectionArgs, model: Option<TruthModel>) -> CliResult<BiasRule> {
    Ok(match bias {
        BiasArg::None => BiasRule::None,
        BiasArg::Direct => BiasRule::Direct(subsample(sel)),
        BiasArg::Subsample => BiasRule::Subsample(subsample(sel)),
        BiasArg::True => match model {
            Some(m) => BiasRule::TrueBeta(m),
            None => return input_error("--bias true needs a simulation model"),
        },
    })
}

fn describe_rule(rule: &BandwidthRule) -> String {
    match rule {
        BandwidthRule::Fixed(h) => format!("fixed:{h}"),
        BandwidthRule::Auto(a) => format!(
            "auto:{} c_grid={} m={} b_sub={} c0={}",
            a.rate.tag(),
            a.c_grid.as_ref().map_or("default".into(), |g| join(g)),
            a.subsample.m.map_or("default".into(), |m| m.to_string()),
            a.subsample.b_sub,
            a.subsample.c0.map_or("default".into(), |c| c.to_string())
        ),
    }
}

fn describe_bias(rule: &BiasRule) -> &'static str {
    match rule {
        BiasRule::None => "none",
        BiasRule::TrueBeta(_) => "true",
        BiasRule::Direct(_) => "direct",
        BiasRule::Subsample(_) => "subsample",
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn boundary_tag(b: Boundary) -> &'static str {
    match b {
        Boundary::Reflect => "reflect",
        Boundary::Off => "off",
    }
}

fn cmd_ci(args: CiArgs) -> CliResult<()> {
    let seed = resolve_seed(args.common.seed);
    let sample = load_sample(&args.input, &args.support)?;
    let support = sample.support();
    let mut req = CiRequest::new(build_grid(&args.grid, support)?);
    req.alpha = args.alpha;
    req.b = args.b;
    req.method = args.method.parse::<Method>()?;
    req.bandwidth = bandwidth_rule(&args.bandwidth, &args.selection)?;
    req.bias = bias_rule(args.bias, &args.selection, None)?;
    req.boundary = args.boundary.into();
    req.workers = args.common.workers;
    req.validate(&sample)?;

    let band = confidence_band(&sample, &req, &RngSpec::new(seed))?;
    let mut out = sink(&args.common.output)?;
    writeln!(
        out,
        "# curstat ci input={} n={} support={};{} method={} alpha={} B={} bandwidth={} bias={} boundary={} seed={}",
        args.input.display(),
        sample.n(),
        support.lo,
        support.hi,
        req.method,
        req.alpha,
        req.b,
        describe_rule(&req.bandwidth),
        describe_bias(&req.bias),
        boundary_tag(req.boundary),
        seed
    )?;
    band.write_csv(&mut out)?;
    out.flush()?;
    if args.common.output.is_some() {
        let widest = band.points.iter().map(|p| p.length()).fold(0.0, f64::max);
        let discarded: usize = band.points.iter().map(|p| p.discarded).sum();
        println!(
            "{} points, n = {}, method {}, widest interval {widest:.6}, discarded replicates {discarded}",
            band.points.len(),
            sample.n(),
            req.method
        );
    }
    Ok(())
}

fn cmd_bandwidth(args: BandwidthArgs) -> CliResult<()> {
    let seed = resolve_seed(args.common.seed);
    let sample = load_sample(&args.input, &args.support)?;
    let support = sample.support();
    let mut req = CiRequest::new(build_grid(&args.grid, support)?);
    req.bandwidth = bandwidth_rule("auto", &args.selection)?;
    req.boundary = args.boundary.into();
    req.workers = args.common.workers;
    req.validate(&sample)?;
    subsample(&args.selection).resolve_m(sample.n())?;

    let chosen = with_workers(req.workers, || resolve_bandwidths(&sample, &req, &RngSpec::new(seed)))??;
    let c_grid = args.selection.c_grid.clone().unwrap_or_else(|| default_c_grid(support));
    let mut out = sink(&args.common.output)?;
    writeln!(
        out,
        "# curstat bandwidth input={} n={} support={};{} bandwidth={} boundary={} c_grid={} seed={}",
        args.input.display(),
        sample.n(),
        support.lo,
        support.hi,
        describe_rule(&req.bandwidth),
        boundary_tag(req.boundary),
        join(&c_grid),
        seed
    )?;
    writeln!(out, "t,c_opt,flag")?;
    for (t, c) in req.grid.points().iter().zip(&chosen) {
        writeln!(out, "{},{},{}", t, c.c_opt.unwrap_or(f64::NAN), u8::from(c.flagged))?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let seed = resolve_seed(args.common.seed);
    let model: TruthModel = args.model.parse()?;
    if model.is_regression() {
        return input_error(format!("{model} is a regression model; use `curstat regress --simulate`"));
    }
    let (runs, b) = if args.long { (5000, 1000) } else { (args.runs, args.b) };
    let mut req = CiRequest::new(build_grid(&args.grid, model_support(model))?);
    req.alpha = args.alpha;
    req.b = b;
    req.method = args.method.parse::<Method>()?;
    req.bandwidth = bandwidth_rule(&args.bandwidth, &args.selection)?;
    req.bias = bias_rule(args.bias, &args.selection, Some(model))?;
    req.boundary = args.boundary.into();
    req.workers = args.common.workers;

    let report = run_coverage_experiment(model, args.n, runs, &req, seed)?;
    let mut out = sink(&args.common.output)?;
    writeln!(
        out,
        "# curstat simulate model={} n={} N={} B={} alpha={} method={} bandwidth={} bias={} boundary={} seed={}",
        model,
        args.n,
        runs,
        b,
        req.alpha,
        req.method,
        describe_rule(&req.bandwidth),
        describe_bias(&req.bias),
        boundary_tag(req.boundary),
        seed
    )?;
    report.write_csv(&mut out)?;
    out.flush()?;
    eprintln!("{} runs ({} failed) in {:.1}s", runs, report.failed, report.wall_time);
    Ok(())
}

fn model_support(model: TruthModel) -> Support {
    model.support()
}

fn search_config(search: &Option<(f64, f64)>) -> CliResult<SearchConfig> {
    Ok(match *search {
        Some((lo, hi)) if lo < hi => SearchConfig::with_interval(lo, hi),
        Some((lo, hi)) => return input_error(format!("search interval {lo};{hi} is empty")),
        None => SearchConfig::default(),
    })
}

fn cmd_regress(args: RegressArgs) -> CliResult<()> {
    let seed = resolve_seed(args.common.seed);
    let search = search_config(&args.search)?;
    let mut out = sink(&args.common.output)?;
    if args.simulate {
        let model: TruthModel = args.input.to_string_lossy().parse()?;
        let report =
            run_regression_experiment(model, args.n, args.runs, args.b, &search, args.alpha, seed, args.common.workers)?;
        writeln!(
            out,
            "# curstat regress simulate model={} search={};{} epsilon=0.001 seed={}",
            model, search.interval.0, search.interval.1, seed
        )?;
        report.write_csv(&mut out)?;
        out.flush()?;
        return Ok(());
    }
    let sample = read_regression_csv(open(&args.input)?)?.with_epsilon(args.epsilon)?;
    let ci = bootstrap_sse_ci(&sample, &search, args.b, args.alpha, &RngSpec::new(seed), args.common.workers)?;
    let mut header = String::new();
    write!(
        header,
        "# curstat regress input={} n={} B={} alpha={} epsilon={} search={};{} grid={} seed={}",
        args.input.display(),
        sample.n(),
        args.b,
        args.alpha,
        args.epsilon,
        search.interval.0,
        search.interval.1,
        search.grid_size,
        seed
    )
    .expect("writing to a string");
    writeln!(out, "{header}")?;
    writeln!(out, "beta_hat,lower,upper,no_crossing_count")?;
    writeln!(out, "{},{},{},{}", ci.fit.beta_hat, ci.lower, ci.upper, ci.no_crossing)?;
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ci(a) => cmd_ci(a),
        Command::Bandwidth(a) => cmd_bandwidth(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Regress(a) => cmd_regress(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Estimator(msg)) => {
            eprintln!("estimator failure: {msg}");
            ExitCode::from(3)
        }
    }
}
