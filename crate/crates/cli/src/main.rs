use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use wfeq_core::clustering::{boundary_surface, u_pos_samples, write_boundary_csv};
use wfeq_core::grid::{iterate_pcc_voltage, pcc::cluster_farm};
use wfeq_core::io::{cluster_rows, desk_farm, load_scenario, voltage_rows, write_rows, LoadedScenario};
use wfeq_core::network::solve_terminal_voltages;
use wfeq_core::pmsg::{ControlRegistry, PmsgParams};
use wfeq_core::sim::{compare_models, simulate};
use wfeq_core::{Error, Phasor, SequenceSet};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "wfeq", version, about = "Wind-farm equivalencing under asymmetrical faults")]
struct Cli {
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory. Falls back to the scenario's output_dir, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the scenario farm with a seeded 20-turbine test farm.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sigma1: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct PccArgs {
    /// PCC positive-sequence magnitude.
    #[arg(long)]
    u_pos: Option<f64>,
    /// PCC negative-sequence magnitude.
    #[arg(long)]
    u_neg: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-turbine critical powers and cluster labels.
    Cluster {
        #[command(flatten)]
        common: Common,
        /// Without PCC voltages the outer PCC iteration supplies them.
        #[command(flatten)]
        pcc: PccArgs,
    },
    /// Critical wind speeds over a sweep of positive-sequence voltage.
    Boundaries {
        #[arg(long, default_value = "unbalance")]
        strategy: String,
        #[arg(long)]
        u_neg: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Turbine parameters as JSON (defaults otherwise).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Terminal voltages for given PCC voltages.
    SolveVoltages {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pcc: PccArgs,
    },
    /// Three-machine equivalent via the outer PCC iteration.
    Equivalize {
        #[command(flatten)]
        common: Common,
    },
    /// Run one farm model and write its trace.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "dm")]
        model: String,
    },
    /// Run dm, tm and sm and score the equivalents.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Run the three models on separate threads.
        #[arg(long)]
        parallel: bool,
    },
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn prepare(common: &Common) -> Result<(LoadedScenario, Option<PathBuf>), Failure> {
    let mut loaded = load_scenario(&common.scenario)?;
    let s = &mut loaded.scenario;
    if let Some(seed) = common.seed {
        s.farm = desk_farm(seed);
    }
    if let Some(v) = common.sigma1 {
        s.sigma1 = v;
    }
    if let Some(v) = common.sigma2 {
        s.sigma2 = v;
    }
    if let Some(v) = common.step {
        s.step = v;
    }
    s.validate()?;
    let out = common.out.clone().or_else(|| loaded.output_dir.clone());
    Ok((loaded, out))
}

/// Writes to `dir/name`, or to stdout without a directory.
fn emit(dir: Option<&Path>, name: &str, body: &[u8]) -> Result<(), Failure> {
    match dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            fs::write(d.join(name), body)?;
            log::info!("wrote {}", d.join(name).display());
        }
        None => std::io::stdout().write_all(body)?,
    }
    Ok(())
}

fn explicit_pcc(pcc: &PccArgs) -> Option<SequenceSet> {
    if pcc.u_pos.is_none() && pcc.u_neg.is_none() {
        return None;
    }
    Some(SequenceSet::pn(
        Phasor::new(pcc.u_pos.unwrap_or(1.0), 0.0),
        Phasor::new(pcc.u_neg.unwrap_or(0.0), 0.0),
    ))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Cluster { common, pcc } => {
            let (loaded, out) = prepare(&common)?;
            let s = &loaded.scenario;
            let u_pcc = match explicit_pcc(&pcc) {
                Some(u) => u,
                None => iterate_pcc_voltage(s, s.sigma2, s.max_outer)?.0.u_pcc,
            };
            let (sol, assignments) = cluster_farm(s, &u_pcc)?;
            let mut buf = Vec::new();
            write_rows(&mut buf, &cluster_rows(&s.farm, &sol, &assignments))?;
            emit(out.as_deref(), "clusters.csv", &buf)
        }
        Command::Boundaries {
            strategy,
            u_neg,
            points,
            params,
            out,
        } => {
            let control = ControlRegistry::default().get(&strategy)?;
            let params: PmsgParams = match params {
                Some(p) => {
                    let text = fs::read_to_string(&p)?;
                    let params: PmsgParams = serde_json::from_str(&text).map_err(|e| Error::Parse {
                        location: format!("{}:{}:{}", p.display(), e.line(), e.column()),
                        message: e.to_string(),
                    })?;
                    params.validate()?;
                    params
                }
                None => PmsgParams::default(),
            };
            if points == 0 {
                return Err(Error::validation("points", "need at least one sample").into());
            }
            let surface = boundary_surface(control.as_ref(), u_neg, &u_pos_samples(u_neg, points), &params)?;
            let mut buf = Vec::new();
            write_boundary_csv(&mut buf, &surface)?;
            emit(out.as_deref(), "boundaries.csv", &buf)
        }
        Command::SolveVoltages { common, pcc } => {
            let (loaded, out) = prepare(&common)?;
            let s = &loaded.scenario;
            let u_pcc = explicit_pcc(&pcc).unwrap_or_else(|| SequenceSet::pn(Phasor::new(1.0, 0.0), Phasor::new(0.0, 0.0)));
            let control = s.control()?;
            let sol = solve_terminal_voltages(&s.farm, &u_pcc, control.as_ref(), &s.solver_options())?;
            log::info!("terminal voltages converged in {} iterations", sol.iterations);
            let mut buf = Vec::new();
            write_rows(&mut buf, &voltage_rows(&s.farm, &sol))?;
            emit(out.as_deref(), "voltages.csv", &buf)
        }
        Command::Equivalize { common } => {
            let (loaded, out) = prepare(&common)?;
            let s = &loaded.scenario;
            let (result, eq) = iterate_pcc_voltage(s, s.sigma2, s.max_outer)?;
            let doc = json!({ "pcc": result, "equivalent": eq });
            let mut body = serde_json::to_string_pretty(&doc).expect("json");
            body.push('\n');
            emit(out.as_deref(), "equivalent.json", body.as_bytes())?;
            if let Some(d) = out.as_deref() {
                let mut buf = Vec::new();
                result.write_history_csv(&mut buf)?;
                emit(Some(d), "pcc_history.csv", &buf)?;
            }
            Ok(())
        }
        Command::Simulate { common, model } => {
            let (loaded, out) = prepare(&common)?;
            let trace = simulate(&model, &loaded.scenario)?;
            let mut buf = Vec::new();
            trace.write_csv(&mut buf)?;
            emit(out.as_deref(), &format!("trace_{model}.csv"), &buf)
        }
        Command::Compare { common, parallel } => {
            let (loaded, out) = prepare(&common)?;
            let (mut report, traces) = compare_models(&loaded.scenario, parallel)?;
            if let Some(d) = out.as_deref() {
                for (name, trace) in &traces {
                    let file = format!("trace_{name}.csv");
                    let mut buf = Vec::new();
                    trace.write_csv(&mut buf)?;
                    emit(Some(d), &file, &buf)?;
                    if let Some(m) = report.models.iter_mut().find(|m| &m.model == name) {
                        m.trace_file = Some(file);
                    }
                }
            }
            let mut body = report.to_json();
            body.push('\n');
            emit(out.as_deref(), "report.json", body.as_bytes())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INPUT })
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
