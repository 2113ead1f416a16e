use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mccs_core::analytics::{annualize, satisfied_rate, AnnualReport};
use mccs_core::config::Config;
use mccs_core::domain::{CostBreakdown, DemandScenario};
use mccs_core::io::{ingest_file, read_scenarios, write_pool, write_scenarios};
use mccs_core::mpc::{simulate, write_trace_csv, ForecastMode, SimSpec};
use mccs_core::operation::{solve_operation, write_gantt_csv, write_schedule_json, OperationProblem};
use mccs_core::parallel::Execution;
use mccs_core::planning::{grid_search, solve_planning, write_heatmap_csv};
use mccs_core::stochastic::seeded;
use mccs_core::sweep::{run_sweep, write_sweep_csv, SweepIndex};
use mccs_core::Error;

#[derive(Parser)]
#[command(name = "mccs", version, about = "Size, schedule and simulate mixed fixed/robotic EV charging stations")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML parameter file; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    mip_gap: Option<f64>,
    /// Seconds per solve.
    #[arg(long, global = true)]
    time_limit: Option<f64>,
    /// Solve cells and replicas one at a time.
    #[arg(long, global = true)]
    sequential: bool,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Read a session CSV into a session pool file.
    Ingest {
        input: PathBuf,
        #[arg(short, long, default_value = "pool.json")]
        output: PathBuf,
    },
    /// Draw the weekday and weekend planning scenarios from the session pool.
    Sample {
        #[arg(short, long, default_value = "scenarios.json")]
        output: PathBuf,
    },
    /// Schedule one scenario for a given station.
    Operate(OperateArgs),
    /// Choose the charger counts minimising daily TCO.
    Plan {
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(short, long, default_value = "plan.json")]
        output: PathBuf,
    },
    /// Solve every (M, N) cell and write the TCO heatmap.
    Gridsearch {
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long)]
        m_max: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(short, long, default_value = "heatmap.csv")]
        output: PathBuf,
    },
    /// Re-plan while one sensitivity index moves.
    Sweep {
        #[arg(long, value_enum)]
        index: IndexArg,
        /// Comma-separated settings; a standard range when omitted.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(short, long, default_value = "sweep.csv")]
        output: PathBuf,
    },
    /// Run the rolling-horizon controller on sampled demand.
    MpcSim(MpcArgs),
}

#[derive(Args)]
struct OperateArgs {
    /// Scenario JSON (one scenario or a list); a weekday draw when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Which scenario of the file to use.
    #[arg(long, default_value_t = 0)]
    which: usize,
    #[arg(long)]
    fc: Option<usize>,
    #[arg(long)]
    rc: Option<usize>,
    #[arg(long, default_value = "schedule.json")]
    schedule: PathBuf,
    #[arg(long, default_value = "gantt.csv")]
    gantt: PathBuf,
}

#[derive(Args)]
struct MpcArgs {
    #[arg(long, default_value_t = 1)]
    weeks: usize,
    /// Simulate this many days instead of whole weeks.
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    fc: Option<usize>,
    #[arg(long)]
    rc: Option<usize>,
    #[arg(long, value_enum, default_value = "naive")]
    forecast: ForecastArg,
    /// Drivers stay exactly when a charger or queue slot is free.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, default_value = "mpc_trace.csv")]
    trace: PathBuf,
    #[arg(long, default_value = "mpc_report.json")]
    report: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum IndexArg {
    Rci,
    Csi,
    Poi,
    Dgi,
}

impl From<IndexArg> for SweepIndex {
    fn from(i: IndexArg) -> Self {
        match i {
            IndexArg::Rci => SweepIndex::Rci,
            IndexArg::Csi => SweepIndex::Csi,
            IndexArg::Poi => SweepIndex::Poi,
            IndexArg::Dgi => SweepIndex::Dgi,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ForecastArg {
    None,
    Naive,
    Complete,
}

impl From<ForecastArg> for ForecastMode {
    fn from(f: ForecastArg) -> Self {
        match f {
            ForecastArg::None => ForecastMode::None,
            ForecastArg::Naive => ForecastMode::Naive,
            ForecastArg::Complete => ForecastMode::Complete,
        }
    }
}

/// Daily costs in dollars.
#[derive(Serialize)]
struct CostReport {
    tou: f64,
    fee: f64,
    demand: f64,
    switching: f64,
    disappointment: f64,
    opex: f64,
    capex: f64,
    tco: f64,
}

impl From<&CostBreakdown> for CostReport {
    fn from(c: &CostBreakdown) -> Self {
        let d = c.in_dollars();
        Self {
            tou: d.tou,
            fee: d.fee,
            demand: d.demand,
            switching: d.switching,
            disappointment: d.disappointment,
            opex: d.opex,
            capex: d.capex,
            tco: d.tco,
        }
    }
}

#[derive(Serialize)]
struct OperateReport {
    scenario: String,
    fc: usize,
    rc: usize,
    sessions: usize,
    satisfied_rate: Option<f64>,
    gap: f64,
    wall_time: f64,
    daily_usd: CostReport,
}

#[derive(Serialize)]
struct MpcReport {
    days: f64,
    fc: usize,
    rc: usize,
    arrivals: usize,
    balked: usize,
    fallback_steps: usize,
    satisfied_rate: Option<f64>,
    daily_usd: CostReport,
    annual: AnnualReport,
}

fn load_config(g: &Global) -> anyhow::Result<Config> {
    let mut cfg = match &g.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(gap) = g.mip_gap {
        cfg.solver.mip_gap = gap;
        cfg.mpc.mip_gap = gap;
    }
    if let Some(limit) = g.time_limit {
        cfg.solver.time_limit = limit;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).map_err(Error::from).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn execution(g: &Global) -> Execution {
    if g.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn planning_scenarios(cfg: &Config, file: Option<&Path>) -> anyhow::Result<Vec<DemandScenario>> {
    match file {
        Some(path) => Ok(read_scenarios(path)?),
        None => {
            let mut rng = seeded(cfg.seed);
            let pool = cfg.session_pool(&mut rng)?;
            Ok(cfg.scenarios(&pool, &mut rng)?)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    let cfg = load_config(g)?;
    let out = io::stdout();
    let mut out = out.lock();
    match cli.command {
        Command::Ingest { input, output } => {
            let pool = ingest_file(&input, &cfg.time_grid()?)?;
            write_pool(&pool, create(&output)?)?;
            writeln!(out, "{} sessions over {} days -> {}", pool.len(), pool.days.len(), output.display())?;
        }
        Command::Sample { output } => {
            let scenarios = planning_scenarios(&cfg, None)?;
            write_scenarios(&scenarios, create(&output)?)?;
            writeln!(out, "{} scenarios -> {}", scenarios.len(), output.display())?;
        }
        Command::Operate(args) => operate(&cfg, &args, &mut out)?,
        Command::Plan { scenarios, output } => {
            let problem = cfg.planning_problem(planning_scenarios(&cfg, scenarios.as_deref())?)?;
            let plan = solve_planning(&problem, &cfg.solve_options())?;
            serde_json::to_writer_pretty(create(&output)?, &plan).map_err(Error::from)?;
            writeln!(
                out,
                "M = {}, N = {}, TCO ${:.2}/day (OPEX ${:.2}, CAPEX ${:.2}), SR {:.3}, gap {:.4} -> {}",
                plan.m,
                plan.n,
                plan.tco / 100.0,
                plan.opex / 100.0,
                plan.capex / 100.0,
                plan.satisfied_rate,
                plan.gap,
                output.display()
            )?;
        }
        Command::Gridsearch {
            scenarios,
            m_max,
            n_max,
            output,
        } => {
            let problem = cfg.planning_problem(planning_scenarios(&cfg, scenarios.as_deref())?)?;
            let m_max = m_max.unwrap_or(problem.m_max);
            let n_max = n_max.unwrap_or(problem.n_max);
            let result = grid_search(&problem, 0..=m_max, 0..=n_max, &cfg.solve_options(), execution(g))?;
            write_heatmap_csv(&result, create(&output)?)?;
            let min_sr = problem.enforce_sr.then_some(problem.tariff.sr_requirement);
            match result.best(min_sr) {
                Some(c) => writeln!(
                    out,
                    "best cell M = {}, N = {}, TCO ${:.2}/day -> {}",
                    c.m,
                    c.n,
                    c.tco.unwrap_or(f64::NAN) / 100.0,
                    output.display()
                )?,
                None => bail!(Error::Solver("no grid cell was solved".into())),
            }
        }
        Command::Sweep { index, values, output } => {
            let index = SweepIndex::from(index);
            let values = values.unwrap_or_else(|| index.default_settings());
            let points = run_sweep(&cfg, index, &values, execution(g))?;
            write_sweep_csv(index, &points, create(&output)?)?;
            writeln!(out, "{} settings -> {}", points.len(), output.display())?;
        }
        Command::MpcSim(args) => mpc_sim(&cfg, &args, &mut out)?,
    }
    Ok(())
}

fn operate(cfg: &Config, args: &OperateArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let scenario = match &args.scenario {
        Some(path) => {
            let mut all = read_scenarios(path)?;
            if args.which >= all.len() {
                bail!(Error::Data(format!("{} holds {} scenarios", path.display(), all.len())));
            }
            all.swap_remove(args.which)
        }
        None => planning_scenarios(cfg, None)?.swap_remove(0),
    };
    let grid = cfg.time_grid()?;
    scenario.validate(grid.step_count()).map_err(Error::from)?;
    let scenario = scenario.clipped(&grid, cfg.station.efficiency);
    let fc = args.fc.unwrap_or(cfg.station.fc_count);
    let rc = args.rc.unwrap_or(cfg.station.rc_count);
    let station = cfg.station(fc, rc)?;
    let tariff = cfg.tariff()?;
    let mut options = cfg.operation_options();
    if args.scenario.is_some() {
        // sessions in a scenario file carry their own tolerances
        options.tolerance = None;
    }
    let problem = OperationProblem {
        scenario: &scenario,
        grid: &grid,
        station: &station,
        tariff: &tariff,
        options: &options,
    };
    let outcome = solve_operation(&problem, &cfg.solve_options())?;
    write_schedule_json(&outcome.schedule, create(&args.schedule)?)?;
    write_gantt_csv(&outcome.schedule, &scenario, create(&args.gantt)?)?;
    let costs = outcome.costs.with_capex(tariff.capex_cents_per_day(fc, rc));
    let report = OperateReport {
        scenario: scenario.label.clone(),
        fc,
        rc,
        sessions: scenario.len(),
        satisfied_rate: satisfied_rate(&outcome.schedule, &scenario, tariff.sr_threshold).ok(),
        gap: outcome.gap,
        wall_time: outcome.wall_time,
        daily_usd: CostReport::from(&costs),
    };
    serde_json::to_writer_pretty(&mut *out, &report).map_err(Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn mpc_sim(cfg: &Config, args: &MpcArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let fc = args.fc.unwrap_or(cfg.station.fc_count);
    let rc = args.rc.unwrap_or(cfg.station.rc_count);
    let spec = SimSpec {
        days: args.days.unwrap_or(7 * args.weeks),
        seed: cfg.seed,
        fc_count: fc,
        rc_count: rc,
        forecast: args.forecast.into(),
        deterministic_stay: args.deterministic,
    };
    let sim = simulate(cfg, &spec)?;
    let run = &sim.run;
    write_trace_csv(run, create(&args.trace)?)?;
    let daily = run.daily_costs();
    let station = cfg.station(fc, rc)?;
    let report = MpcReport {
        days: run.days,
        fc,
        rc,
        arrivals: sim.trace.len(),
        balked: run.balked(),
        fallback_steps: run.fallback_steps(),
        satisfied_rate: satisfied_rate(&run.schedule, &run.instance.scenario, cfg.tariff.sr_threshold).ok(),
        daily_usd: CostReport::from(&daily),
        annual: annualize(&daily, &station, &cfg.tariff()?),
    };
    serde_json::to_writer_pretty(create(&args.report)?, &report).map_err(Error::from)?;
    writeln!(
        out,
        "{} days, {} arrivals ({} balked), TCO ${:.2}/day -> {}, {}",
        report.days,
        report.arrivals,
        report.balked,
        report.daily_usd.tco,
        args.trace.display(),
        args.report.display()
    )?;
    Ok(())
}

/// Exit code for a failure class: configuration 2, data 3, solver 4.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Config(_)) => 2,
        Some(Error::Solver(_) | Error::Milp(_)) => 4,
        Some(_) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
