//! `edgebench`: run scenarios, sweep arrival rates, solve MDP policies.
//!
//! Exit codes: 0 success, 2 input file not found or unreadable, 3 malformed
//! input, 4 MDP instance too large, 5 runtime failure, 64 usage error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use edgebench_core::config::{validate_config, ConfigError, ScenarioConfig};
use edgebench_core::exec::{init_thread_pool, threads_from_env, ExecMode};
use edgebench_core::mdp::{solve, MdpError, MdpSpec, SolvedPolicyError};
use edgebench_core::metrics::compare_runs;
use edgebench_core::policies::{build_policy, PolicyError, PolicyId};
use edgebench_core::report::{write_summary_csv, write_sweep_csv, write_trace_csv};
use edgebench_core::sim::{run_trajectory_with, RunError, RunOptions};
use edgebench_core::sweep::{preset, run_sweep, SweepError, SweepSpec, PRESET_NAMES};

#[derive(Parser)]
#[command(name = "edgebench", version, about = "Slotted MEC offloading simulator and policy optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and print its summary row.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Replace the scenario's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the summary CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a per-slot trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run an arrival-rate sweep from a sweep file or a bundled preset.
    Sweep {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        sweep: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Output CSV path; defaults to `<out_dir>/sweep.csv` or stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the seed list with seeds 1..=N.
        #[arg(long)]
        seeds: Option<u64>,
        /// Override the horizon of every cell.
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Solve the truncated MDP of a scenario and save the policy.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        q_max: u32,
        #[arg(long)]
        k_max: u32,
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the bundled sweep presets.
    Presets,
}

#[derive(Debug)]
enum Failure {
    NotFound(String),
    Malformed(String),
    TooLarge(String),
    Runtime(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::NotFound(_) => 2,
            Failure::Malformed(_) => 3,
            Failure::TooLarge(_) => 4,
            Failure::Runtime(_) => 5,
            Failure::Usage(_) => 64,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::NotFound(m) | Failure::Malformed(m) | Failure::TooLarge(m) | Failure::Runtime(m) | Failure::Usage(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::NotFound(e.to_string()),
            _ => Failure::Malformed(e.to_string()),
        }
    }
}

impl From<SolvedPolicyError> for Failure {
    fn from(e: SolvedPolicyError) -> Self {
        match e {
            SolvedPolicyError::Io { .. } => Failure::NotFound(e.to_string()),
            _ => Failure::Malformed(e.to_string()),
        }
    }
}

impl From<PolicyError> for Failure {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Solved(inner) => inner.into(),
            other => Failure::Malformed(other.to_string()),
        }
    }
}

impl From<MdpError> for Failure {
    fn from(e: MdpError) -> Self {
        match e {
            MdpError::Config(c) => c.into(),
            MdpError::StateSpaceTooLarge { .. } | MdpError::ActionSpaceTooLarge { .. } | MdpError::ModelTooLarge { .. } => {
                Failure::TooLarge(e.to_string())
            }
            MdpError::Unsupported(_) => Failure::Malformed(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Policy(p) => p.into(),
            RunError::Step(s) => Failure::Runtime(s.to_string()),
        }
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Config(c) => c.into(),
            SweepError::Invalid(_) => Failure::Malformed(e.to_string()),
            SweepError::UnknownPreset(_) => Failure::Usage(format!("{e}; available: {}", PRESET_NAMES.join(", "))),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Runtime(format!("cannot write `{}`: {e}", path.display()))
}

fn csv_failure(e: edgebench_core::report::CsvError) -> Failure {
    Failure::Runtime(format!("cannot write CSV: {e}"))
}

/// Opens `path` for writing, or stdout when absent.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            }
            let f = File::create(p).map_err(|e| io_failure(p, e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn cmd_run(scenario: &Path, seed: Option<u64>, out: Option<&Path>, trace: Option<&Path>) -> Result<(), Failure> {
    let mut cfg = ScenarioConfig::load(scenario)?;
    if let Some(s) = seed {
        cfg.rng_seed = s;
    }
    let cfg = validate_config(cfg)?;
    let policy = build_policy(PolicyId::from_config(&cfg)?, &cfg)?;
    let opts = RunOptions {
        record_slots: trace.is_some(),
        ..Default::default()
    };
    let result = run_trajectory_with(&cfg, policy.as_ref(), &opts)?;
    write_summary_csv(sink(out)?, std::slice::from_ref(&result.summary)).map_err(csv_failure)?;
    if let Some(path) = trace {
        write_trace_csv(sink(Some(path))?, &result.records, &cfg).map_err(csv_failure)?;
    }
    Ok(())
}

fn cmd_sweep(
    sweep: Option<&Path>,
    preset_name: Option<&str>,
    out: Option<&Path>,
    seeds: Option<u64>,
    horizon: Option<u64>,
) -> Result<(), Failure> {
    let mut plan = match (sweep, preset_name) {
        (Some(path), _) => SweepSpec::load(path)?,
        (None, Some(name)) => preset(name)?.plan,
        (None, None) => return Err(Failure::Usage("one of --sweep or --preset is required".into())),
    };
    if let Some(n) = seeds {
        plan.seeds = (1..=n).collect();
    }
    if horizon.is_some() {
        plan.horizon = horizon;
    }
    plan.check()?;
    let rows = run_sweep(&plan, ExecMode::default());
    let target = out
        .map(Path::to_path_buf)
        .or_else(|| plan.out_dir.as_ref().map(|d| d.join("sweep.csv")));
    write_sweep_csv(sink(target.as_deref())?, &rows).map_err(csv_failure)?;

    let runs: Vec<_> = rows.iter().filter_map(|r| r.result.as_ref().ok().cloned()).collect();
    let failed = rows.len() - runs.len();
    if let Ok(table) = compare_runs(&runs) {
        eprintln!("{:<14} {:>8} {:>5} {:>18} {:>16}", "policy", "lambda", "runs", "throughput", "completion");
        for r in table {
            eprintln!(
                "{:<14} {:>8} {:>5} {:>10.3} ± {:<6.3} {:>8.3} ± {:<6.3}",
                r.policy,
                r.lambda_multiplier,
                r.runs,
                r.throughput.mean,
                r.throughput.half_width,
                r.completion_ratio.mean,
                r.completion_ratio.half_width
            );
        }
    }
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see the error column", rows.len());
    }
    Ok(())
}

fn cmd_solve(scenario: &Path, q_max: u32, k_max: u32, gamma: f64, epsilon: f64, out: &Path) -> Result<(), Failure> {
    let base = ScenarioConfig::load(scenario)?;
    let mut spec = MdpSpec::new(base, q_max, k_max);
    spec.gamma = gamma;
    spec.epsilon = epsilon;
    let solved = solve(&spec)?;
    solved.save(out)?;
    println!(
        "states {} actions {} iterations {} residual {:e} -> {}",
        solved.states().len(),
        solved.actions().len(),
        solved.iterations(),
        solved.residual(),
        out.display()
    );
    Ok(())
}

fn cmd_presets() -> Result<(), Failure> {
    for name in PRESET_NAMES {
        let p = preset(name)?;
        println!("{:<16} {} cells  {}", p.name, p.plan.num_cells(), p.description);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = threads_from_env() {
        init_thread_pool(n);
    }
    let result = match &cli.command {
        Command::Run { scenario, seed, out, trace } => cmd_run(scenario, *seed, out.as_deref(), trace.as_deref()),
        Command::Sweep { sweep, preset, out, seeds, horizon } => {
            cmd_sweep(sweep.as_deref(), preset.as_deref(), out.as_deref(), *seeds, *horizon)
        }
        Command::Solve { scenario, q_max, k_max, gamma, epsilon, out } => {
            cmd_solve(scenario, *q_max, *k_max, *gamma, *epsilon, out)
        }
        Command::Presets => cmd_presets(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("edgebench: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
