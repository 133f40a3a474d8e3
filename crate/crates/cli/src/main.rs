use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use impasse_core::impasse::theorem2_check;
use impasse_core::simulator::SimOptions;
use impasse_lab::commands::{self, Analyses, RunConfig, Theorem2Json};
use impasse_lab::error::{CliError, EXIT_NUMERICAL, EXIT_OK};
use impasse_lab::{parse_case, Strictness};

#[derive(Parser)]
#[command(name = "impasse-lab", version, about = "Impasse-surface studies of DAE power-system cases")]
struct Cli {
    /// Warn about unknown keys in the case file instead of rejecting it.
    #[arg(long, global = true)]
    lenient: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CaseArg {
    /// JSON case file.
    #[arg(long)]
    case: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate scenarios and write trajectory.csv, summary.json and plots.
    Simulate {
        #[command(flatten)]
        case: CaseArg,
        /// Scenario name; repeat for several, or `all`. Several scenarios run
        /// in parallel, each into its own subdirectory of --out.
        #[arg(long, required = true)]
        scenario: Vec<String>,
        #[arg(long, default_value_t = SimOptions::default().dt)]
        dt: f64,
        /// Step during and shortly after a fault (defaults to min(dt, 1e-3)).
        #[arg(long)]
        dt_fine: Option<f64>,
        #[arg(long, default_value_t = SimOptions::default().horizon)]
        horizon: f64,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated: ivs, sigma_min, eig, theorem2, sensitivity, none.
        #[arg(long, default_value = "ivs,sigma_min,eig")]
        analyses: String,
        #[arg(long, default_value_t = 8)]
        monitor_bus: usize,
    },
    /// Check the structural immunity conditions on the case.
    CheckTheorem2 {
        #[command(flatten)]
        case: CaseArg,
    },
    /// Per-bus shunt sensitivity of sigma_min(Y1) at the initial equilibrium.
    Sensitivity {
        #[command(flatten)]
        case: CaseArg,
        /// Scenario whose t = 0 events set up the equilibrium.
        #[arg(long)]
        scenario: Option<String>,
        /// Buses to report (default: every bus with a load).
        #[arg(long, value_delimiter = ',')]
        bus: Vec<usize>,
        #[arg(long, default_value_t = commands::SENSITIVITY_STEP)]
        h: f64,
    },
    /// Check the determinant identity between J_alg and Y' on random states.
    Lemma1Verify {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long, default_value_t = 50)]
        states: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Sweep a shunt at one bus and report t_hit against b0.
    Scan {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 8)]
        bus: usize,
        #[arg(long, default_value_t = -0.3, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 13)]
        points: usize,
        #[arg(long, default_value_t = SimOptions::default().horizon)]
        horizon: f64,
        #[arg(long, default_value_t = SimOptions::default().dt)]
        dt: f64,
        /// CSV output (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    let mode = if cli.lenient { Strictness::Lenient } else { Strictness::Strict };
    match cli.command {
        Command::Simulate { case, scenario, dt, dt_fine, horizon, out, analyses, monitor_bus } => {
            let (file, net) = parse_case(&case.case, mode)?;
            let names: Vec<String> = if scenario.iter().any(|s| s == "all") {
                file.scenario_names().into_iter().map(String::from).collect()
            } else {
                scenario
            };
            let scenarios = names.iter().map(|n| file.scenario(n)).collect::<Result<Vec<_>, _>>()?;
            let config = RunConfig {
                scenario: names.join(","),
                horizon,
                dt,
                dt_fine: dt_fine.unwrap_or(dt.min(SimOptions::default().dt_fine)),
                out,
                analyses: Analyses::parse(&analyses)?,
                monitor_bus,
            };
            let results = if let [single] = scenarios.as_slice() {
                vec![commands::run(&net, single, &RunConfig { scenario: single.name.clone(), ..config })]
            } else {
                commands::run_batch(&net, &scenarios, &config)?
            };
            let mut code = EXIT_OK;
            for (name, r) in names.iter().zip(results) {
                match r {
                    Ok((_, s)) => println!(
                        "{name}: {} at t = {:.4} s, t_hit {:?}, I_vs first crossing {:?}, shed {:?}",
                        s.termination, s.t_end, s.t_hit, s.ivs_first_crossing, s.shed_time
                    ),
                    Err(e) => {
                        eprintln!("{name}: {e}");
                        code = code.max(e.exit_code());
                    }
                }
            }
            Ok(code)
        }
        Command::CheckTheorem2 { case } => {
            let (_, net) = parse_case(&case.case, mode)?;
            println!("{}", json(&Theorem2Json::from(&theorem2_check(&net))));
            Ok(EXIT_OK)
        }
        Command::Sensitivity { case, scenario, bus, h } => {
            let (file, net) = parse_case(&case.case, mode)?;
            let sc = match scenario {
                Some(n) => file.scenario(&n)?,
                None => impasse_core::simulator::Scenario::new("base", vec![]),
            };
            let buses = if bus.is_empty() { commands::load_buses(&net) } else { bus };
            let rows = commands::sensitivity_table(&net, &sc, &buses, h)?;
            commands::write_sensitivity(&rows, std::io::stdout().lock())
                .map_err(|e| CliError::Write { path: "<stdout>".into(), source: e.into() })?;
            if rows.iter().any(|r| r.formula > 0.0) {
                eprintln!("warning: positive sensitivity entry");
            }
            Ok(EXIT_OK)
        }
        Command::Lemma1Verify { case, states, seed } => {
            let (_, net) = parse_case(&case.case, mode)?;
            let s = commands::lemma1_verify(&net, states, seed)?;
            println!("{}", json(&s));
            let ok = s.passed(1e-10, 1e-8);
            println!("{}", if ok { "PASS" } else { "FAIL" });
            Ok(if ok { EXIT_OK } else { EXIT_NUMERICAL })
        }
        Command::Scan { case, scenario, bus, from, to, points, horizon, dt, out } => {
            let (file, net) = parse_case(&case.case, mode)?;
            let sc = file.scenario(&scenario)?;
            let options = SimOptions { horizon, dt, dt_fine: dt.min(SimOptions::default().dt_fine), ..SimOptions::default() };
            let pts = commands::scan(&net, &sc, bus, &commands::linspace(from, to, points), &options)?;
            let write_err = |e: csv::Error| CliError::Write { path: out.clone().unwrap_or("<stdout>".into()), source: e.into() };
            match &out {
                Some(p) => {
                    let f = std::fs::File::create(p).map_err(|source| CliError::Write { path: p.clone(), source })?;
                    commands::write_scan(&pts, f).map_err(write_err)?;
                }
                None => commands::write_scan(&pts, std::io::stdout().lock()).map_err(write_err)?,
            }
            if !commands::non_increasing(&pts) {
                eprintln!("note: t_hit is not non-increasing in b0 over this range");
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
