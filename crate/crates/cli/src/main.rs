//! `corround`: batch driver for the rounding, LP, set-cover and simulation
//! experiments.
//!
//! Exit codes: 0 success, 2 usage, 3 input or I/O, 4 size cap, 5 solver,
//! 6 invariant or bound violation.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use corround::bench::{doubling_items, max_fit_deviation, sweep};
use corround::experiment::{mean_se, policy_stats, replay, run_campaign, CampaignConfig, ExperimentError};
use corround::fulfillment::{
    scale, solve_dlp, Dispatcher, FulfillmentError, FulfillmentInstance, Policy, REPORT_HEADER,
};
use corround::instance_gen::{generate, GeneratorConfig, GeneratorError};
use corround::optimal::{solve_optimal_alpha_capped, OptimalLpError, DEFAULT_FC_CAP};
use corround::rounding::io::{parse_matrix, summary_line, write_marginal_csv, write_usage_csv};
use corround::rounding::{
    check_bounds, guarantee, guarantee_dilate, guarantee_force_open, guarantee_js, mc_estimate,
    select_scheme, Scheme,
};
use corround::set_cover::{
    estimate_cover, hard_instance, marginals_from_fractional_cover, FractionalCover, SetCoverError,
    SetCoverInstance,
};

#[derive(Parser)]
#[command(name = "corround", version, about = "Correlated rounding experiments")]
struct Cli {
    /// Base seed for all random streams.
    #[arg(long, global = true, env = "CORROUND_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo check of a rounding scheme on a marginal matrix.
    Round(RoundArgs),
    /// Solve the instance-optimal rounding LP.
    LpOptimal(LpArgs),
    /// Round a fractional set cover.
    Cover(CoverArgs),
    /// Generate a fulfillment instance as JSON.
    GenInstance(GenArgs),
    /// Run a simulation campaign.
    Simulate(SimArgs),
    /// Time the rounding schemes over growing instances.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RoundArgs {
    /// Matrix file: `q K` then `q` rows of `K` probabilities.
    instance: PathBuf,
    #[arg(long, default_value = "dilate", value_parser = str::parse::<Scheme>)]
    scheme: Scheme,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    /// Marginal report CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// FC usage report CSV.
    #[arg(long)]
    usage_out: Option<PathBuf>,
}

#[derive(Args)]
struct LpArgs {
    instance: PathBuf,
    /// Solution file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest FC count accepted.
    #[arg(long, default_value_t = DEFAULT_FC_CAP)]
    cap: usize,
}

#[derive(Args)]
struct CoverArgs {
    /// Set-cover file: `q K` then one `cost n e_1 .. e_n` line per set.
    #[arg(long, requires = "weights", conflicts_with = "hard")]
    instance: Option<PathBuf>,
    /// Fractional weights, one per set.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Built-in instance with every `d`-subset of `K` sets, as `d,K`.
    #[arg(long, value_parser = parse_pair)]
    hard: Option<(usize, usize)>,
    #[arg(long, default_value = "dilate", value_parser = str::parse::<Scheme>)]
    scheme: Scheme,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Per-set usage CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Generator config, TOML or JSON. Defaults to the small network.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Largest order size for the default config.
    #[arg(long, default_value_t = 5)]
    n_max: usize,
    #[arg(long)]
    scale: Option<f64>,
    /// Instance JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// Campaign config, TOML or JSON.
    #[arg(long, required_unless_present = "instance", conflicts_with = "instance")]
    config: Option<PathBuf>,
    /// A single instance JSON instead of a generated campaign.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Replications for `--instance`.
    #[arg(long, default_value_t = 30)]
    replications: usize,
    #[arg(long, value_delimiter = ',', value_parser = str::parse::<Policy>)]
    policies: Option<Vec<Policy>>,
    #[arg(long)]
    scale: Option<f64>,
    /// Per-replication CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-policy aggregate CSV.
    #[arg(long)]
    aggregate_out: Option<PathBuf>,
    /// Write zero wall times so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 10)]
    fcs: usize,
    /// Item counts; defaults to 10, 20, ..., 1280.
    #[arg(long, value_delimiter = ',')]
    items: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', default_value = "dilate,force-open", value_parser = str::parse::<Scheme>)]
    schemes: Vec<Scheme>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected `d,K`")?;
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("`{t}` is not a count"));
    Ok((num(a)?, num(b)?))
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(String),
    Cap(String),
    Solver(String),
    Invariant(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Input(_) => 3,
            Failure::Cap(_) => 4,
            Failure::Solver(_) => 5,
            Failure::Invariant(_) => 6,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m)
            | Failure::Input(m)
            | Failure::Cap(m)
            | Failure::Solver(m)
            | Failure::Invariant(m) => f.write_str(m),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<OptimalLpError> for Failure {
    fn from(e: OptimalLpError) -> Self {
        let msg = e.to_string();
        match e {
            OptimalLpError::CapExceeded { .. } => Failure::Cap(msg),
            OptimalLpError::Solver(_) | OptimalLpError::Status(_) => Failure::Solver(msg),
            OptimalLpError::Parse { .. } => Failure::Input(msg),
            OptimalLpError::DegenerateSubset { .. } | OptimalLpError::Invariant(_) => Failure::Invariant(msg),
        }
    }
}

impl From<SetCoverError> for Failure {
    fn from(e: SetCoverError) -> Self {
        let msg = e.to_string();
        match e {
            SetCoverError::CapExceeded { .. } => Failure::Cap(msg),
            SetCoverError::BadSparsity { .. } => Failure::Usage(msg),
            _ => Failure::Input(msg),
        }
    }
}

impl From<FulfillmentError> for Failure {
    fn from(e: FulfillmentError) -> Self {
        let msg = e.to_string();
        match e {
            FulfillmentError::Solver(_) | FulfillmentError::Status(_) => Failure::Solver(msg),
            FulfillmentError::Invariant(_) => Failure::Invariant(msg),
            FulfillmentError::BadScale(_) | FulfillmentError::UnknownPolicy(_) => Failure::Usage(msg),
            _ => Failure::Input(msg),
        }
    }
}

impl From<GeneratorError> for Failure {
    fn from(e: GeneratorError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(m) => Failure::Input(format!("invalid campaign config: {m}")),
            ExperimentError::Generator { instance, source } => {
                Failure::Input(format!("instance {instance}: {source}"))
            }
            ExperimentError::Fulfillment { instance, source } => match Failure::from(source) {
                Failure::Solver(m) => Failure::Solver(format!("instance {instance}: {m}")),
                Failure::Invariant(m) => Failure::Invariant(format!("instance {instance}: {m}")),
                other => Failure::Input(format!("instance {instance}: {other}")),
            },
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    let mut w = sink(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn cmd_round(args: RoundArgs, seed: u64) -> Result<(), Failure> {
    let text = read(&args.instance)?;
    let m = parse_matrix(&text).map_err(|e| Failure::Input(format!("{}: {e}", args.instance.display())))?;
    if args.samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    let est = mc_estimate(&m, args.scheme, args.samples, seed);
    write_marginal_csv(&m, &est, sink(args.out.as_deref())?)?;
    if let Some(p) = &args.usage_out {
        write_usage_csv(&m, &est, sink(Some(p))?)?;
    }
    eprintln!("{} seed={seed}", summary_line(&m, &est));
    if check_bounds(&m, &est).passed() {
        Ok(())
    } else {
        Err(Failure::Invariant("empirical estimate violates the scheme's bounds".into()))
    }
}

fn cmd_lp_optimal(args: LpArgs) -> Result<(), Failure> {
    let text = read(&args.instance)?;
    let m = parse_matrix(&text).map_err(|e| Failure::Input(format!("{}: {e}", args.instance.display())))?;
    let sol = solve_optimal_alpha_capped(&m, args.cap)?;
    if let Some(p) = &args.out {
        emit(Some(p), &sol.to_text())?;
    }
    let choice = select_scheme(&m);
    println!("alpha {:.9}", sol.alpha);
    println!("dilate_guarantee {:.9}", guarantee_dilate(m.items()));
    println!("force_open_guarantee {:.9}", guarantee_force_open(&m));
    println!("reported_bound {:.9}", guarantee_js(m.items()));
    println!("selected {} {:.9}", choice.scheme, choice.ratio);
    Ok(())
}

fn cmd_cover(args: CoverArgs, seed: u64) -> Result<(), Failure> {
    let (sc, y) = match (&args.hard, &args.instance, &args.weights) {
        (Some((d, k)), _, _) => hard_instance(*d, *k)?,
        (None, Some(inst), Some(w)) => {
            let sc = SetCoverInstance::parse(&read(inst)?)
                .map_err(|e| Failure::Input(format!("{}: {e}", inst.display())))?;
            let y = FractionalCover::parse(&read(w)?)
                .map_err(|e| Failure::Input(format!("{}: {e}", w.display())))?;
            (sc, y)
        }
        _ => return Err(Failure::Usage("give --instance with --weights, or --hard d,K".into())),
    };
    if args.samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    let m = marginals_from_fractional_cover(&sc, &y)?;
    let est = estimate_cover(&sc, &y, args.scheme, args.samples, seed)?;
    let ratio = guarantee(args.scheme, &m);

    let mut out = String::from("set,y,usage,bound,ratio\n");
    for (k, (&yk, &uk)) in y.0.iter().zip(&est.usage).enumerate() {
        let r = if yk > 0.0 { uk / yk } else { 0.0 };
        out.push_str(&format!("{k},{yk},{uk},{},{r}\n", ratio * yk));
    }
    emit(args.out.as_deref(), &out)?;
    eprintln!(
        "scheme={} samples={} infeasible={} mean_sets={:.4} fractional_cost={:.4} average_ratio={:.4} guarantee={:.4} seed={seed}",
        args.scheme,
        est.samples,
        est.infeasible,
        est.mean_sets,
        y.total_cost(&sc),
        est.average_ratio(&y),
        ratio
    );
    if let Some((d, k)) = args.hard {
        eprintln!("witness_bound={:.4}", d as f64 * (1.0 - d as f64 / k as f64));
    }
    if est.infeasible > 0 {
        return Err(Failure::Invariant(format!("{} draws were not covers", est.infeasible)));
    }
    Ok(())
}

fn cmd_gen(args: GenArgs, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(p) => GeneratorConfig::parse(&read(p)?).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => GeneratorConfig::small_network(args.n_max, 0),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let generated = generate(&cfg)?;
    let inst = match args.scale {
        Some(theta) => scale(&generated.instance, theta)?.instance,
        None => generated.instance,
    };
    let mut json = inst.to_json();
    json.push('\n');
    emit(args.out.as_deref(), &json)?;
    eprintln!(
        "order_types={} items={} fcs={} regions={} horizon={} orphans={} seed={}",
        inst.orders.len(),
        inst.items,
        inst.fcs,
        inst.regions,
        inst.horizon,
        generated.orphans.len(),
        cfg.seed
    );
    Ok(())
}

fn cmd_simulate(args: SimArgs, seed: Option<u64>) -> Result<(), Failure> {
    if args.replications == 0 {
        return Err(Failure::Usage("--replications must be at least 1".into()));
    }
    if let Some(p) = &args.instance {
        return simulate_instance(&args, p, seed.unwrap_or(0));
    }
    let path = args.config.as_ref().expect("clap requires --config");
    let mut cfg = CampaignConfig::parse(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(p) = &args.policies {
        cfg.policies = p.clone();
    }
    if let Some(theta) = args.scale {
        cfg.scale = theta;
    }
    if args.no_timing {
        cfg.record_timing = false;
    }
    let result = run_campaign(&cfg)?;
    emit(args.out.as_deref(), &result.rows_csv())?;
    if let Some(p) = &args.aggregate_out {
        emit(Some(p), &result.aggregate_csv())?;
    }
    eprint!("{}", result.table());
    Ok(())
}

fn simulate_instance(args: &SimArgs, path: &Path, seed: u64) -> Result<(), Failure> {
    let mut inst = FulfillmentInstance::from_json(&read(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    if let Some(theta) = args.scale {
        inst = scale(&inst, theta)?.instance;
    }
    let policies = args.policies.clone().unwrap_or_else(|| Policy::ALL.to_vec());
    let plan = solve_dlp(&inst)?;
    let dispatcher = Dispatcher::new(&inst, &plan)?;
    let reports = replay(&dispatcher, seed, args.replications, &policies, !args.no_timing);

    let mut rows = String::from(REPORT_HEADER);
    rows.push('\n');
    for r in &reports {
        rows.push_str(&r.csv_row());
        rows.push('\n');
    }
    emit(args.out.as_deref(), &rows)?;

    let stats = policy_stats(0, plan.objective, &reports, &policies);
    let mut agg = String::from("policy,dlp,mean_cost,se_cost,loss_pct,fcs_per_order,runtime_ms\n");
    for s in &stats {
        agg.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3}\n",
            s.policy, s.dlp, s.mean_cost, s.se_cost, s.loss_pct, s.fcs_per_order, s.wall_ms
        ));
    }
    if let Some(p) = &args.aggregate_out {
        emit(Some(p), &agg)?;
    }
    let losses: Vec<f64> = stats.iter().map(|s| s.loss_pct).collect();
    log::info!("mean loss over policies {:.3}%", mean_se(&losses).0);
    eprint!("{agg}");
    Ok(())
}

fn cmd_bench(args: BenchArgs, seed: u64) -> Result<(), Failure> {
    if args.fcs == 0 {
        return Err(Failure::Usage("--fcs must be positive".into()));
    }
    let items = args.items.clone().unwrap_or_else(doubling_items);
    if items.is_empty() || items.contains(&0) {
        return Err(Failure::Usage("--items must be positive".into()));
    }
    let mut out = String::from("scheme,items,fcs,ns_per_call\n");
    for &scheme in &args.schemes {
        let points = sweep(scheme, &items, args.fcs, seed);
        for p in &points {
            out.push_str(&format!("{},{},{},{:.1}\n", p.scheme, p.items, p.fcs, p.ns_per_call));
        }
        eprintln!("{scheme}: max deviation from linear fit {:.3}x", max_fit_deviation(&points));
    }
    emit(args.out.as_deref(), &out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let seed = cli.seed;
    let result = match cli.command {
        Command::Round(a) => cmd_round(a, seed.unwrap_or(0)),
        Command::LpOptimal(a) => cmd_lp_optimal(a),
        Command::Cover(a) => cmd_cover(a, seed.unwrap_or(0)),
        Command::GenInstance(a) => cmd_gen(a, seed),
        Command::Simulate(a) => cmd_simulate(a, seed),
        Command::Bench(a) => cmd_bench(a, seed.unwrap_or(0)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
