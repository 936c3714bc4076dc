use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use star_secrecy::experiment::run_trial;
use star_secrecy::optimizer::OptimizerSettings;
use star_secrecy::scenario::Scenario;
use star_secrecy_cli::{
    aggregate, figure_jobs, parse_protocols, parse_values, run_sweep, write_aggregate, write_csv, write_outputs,
    Error, ResultRow, Result, Sidecar, SweepSpec, SweepVar,
};

const NATS_TO_BITS: f64 = std::f64::consts::LOG2_E;

#[derive(Parser)]
#[command(name = "star-secrecy", version, about = "Secrecy-rate experiments for STAR-RIS wiretap channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML); defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Protocol, or a comma-separated list for sweeps: es, ms, ts, ris, none.
    #[arg(long, global = true)]
    protocol: Option<String>,
    /// Number of surface elements.
    #[arg(long, global = true)]
    m: Option<usize>,
    /// Energy requirement at both Eves.
    #[arg(long, global = true)]
    e: Option<f64>,
    /// Transmit power.
    #[arg(long = "p-s", global = true)]
    p_s: Option<f64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Display rates in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,
    /// Write wall_s as 0 so repeated runs give identical files.
    #[arg(long, global = true)]
    no_wall_time: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a single channel realization and report it.
    Run {
        /// Trial index selecting the channel realization.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Sweep one parameter over a grid of values.
    Sweep {
        /// Swept variable: m, e or p_s.
        #[arg(long = "var")]
        var: String,
        /// Comma-separated, strictly increasing values.
        #[arg(long)]
        values: String,
    },
    /// Produce the data behind one of the result figures (2, 3, 4 or 5).
    Figure { id: u32 },
    /// Mean and standard error per (protocol, value) group of a results CSV.
    Aggregate { input: PathBuf },
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        let mut s = match &self.config {
            Some(path) => Scenario::load(path)?,
            None => Scenario::default(),
        };
        if let Some(p) = &self.protocol {
            let list = parse_protocols(p)?;
            s.protocol = list[0];
        }
        if let Some(m) = self.m {
            s.num_elements = m;
        }
        if let Some(e) = self.e {
            s = s.with_energy(e);
        }
        if let Some(p_s) = self.p_s {
            s.transmit_power = p_s;
        }
        if let Some(t) = self.trials {
            s.trials = t;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s.validate()?;
        Ok(s)
    }

    fn rate_scale(&self) -> f64 {
        if self.bits {
            NATS_TO_BITS
        } else {
            1.0
        }
    }

    fn unit(&self) -> &'static str {
        if self.bits {
            "bits/s/Hz"
        } else {
            "nats/s/Hz"
        }
    }
}

fn sidecar<'a>(
    command: &'a str,
    scenario: &'a Scenario,
    settings: &'a OptimizerSettings,
    spec: Option<&'a SweepSpec>,
    wall_time: bool,
) -> Sidecar<'a> {
    Sidecar {
        sweep: spec,
        wall_time_recorded: wall_time,
        ..Sidecar::new(command, scenario, settings)
    }
}

fn cmd_run(common: &Common, trial: u64) -> Result<ExitCode> {
    let scenario = common.scenario()?;
    let settings = OptimizerSettings::default();
    let outcome = run_trial(&scenario, &settings, trial)?;
    let r = &outcome.result;
    let m = &r.metrics;
    let k = common.rate_scale();
    let unit = common.unit();
    eprintln!(
        "protocol {}  M {}  P_s {}  E_r {}  E_t {}  seed {}  trial {}",
        scenario.protocol,
        scenario.num_elements,
        scenario.transmit_power,
        scenario.energy_r,
        scenario.energy_t,
        scenario.seed,
        trial
    );
    eprintln!("feasible        {}", r.feasible);
    eprintln!("converged       {}", r.converged);
    eprintln!("secrecy rate    {:.6} {unit}  (r {:.6}, t {:.6})", m.rate_sum * k, m.rate_r * k, m.rate_t * k);
    eprintln!("energy          Eve_r {:.6}  Eve_t {:.6}", m.energy_eve_r, m.energy_eve_t);
    eprintln!("relaxed bound   {:.6}  rank gap {:.3e}", r.sdr_bound, r.rank_gap);
    eprintln!("iterations      I_c {}  I_d {}", r.iterations_ic, r.iterations_id);
    eprintln!("wall time       {:.3} s", outcome.wall_s);

    let wall = if common.no_wall_time { 0.0 } else { outcome.wall_s };
    let row = ResultRow::from_result(scenario.protocol, "trial", &trial.to_string(), trial, r, wall);
    match &common.out {
        Some(dir) => {
            let car = sidecar("run", &scenario, &settings, None, !common.no_wall_time);
            write_outputs(dir, "run", &[row], &car)?;
        }
        None => write_csv(std::io::stdout().lock(), &[row])?,
    }
    Ok(if r.feasible { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_sweep(common: &Common, var: &str, values: &str) -> Result<ExitCode> {
    let base = common.scenario()?;
    let settings = OptimizerSettings::default();
    let protocols = match &common.protocol {
        Some(p) => parse_protocols(p)?,
        None => vec![base.protocol],
    };
    let spec = SweepSpec {
        variable: var.parse::<SweepVar>()?,
        values: parse_values(values)?,
        protocols,
        trials: base.trials,
        seed: base.seed,
    };
    spec.validate()?;
    let rows = run_sweep(&base, &spec, &settings, !common.no_wall_time)?;
    match &common.out {
        Some(dir) => {
            let car = sidecar("sweep", &base, &settings, Some(&spec), !common.no_wall_time);
            write_outputs(dir, "sweep", &rows, &car)?;
        }
        None => write_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_figure(common: &Common, id: u32) -> Result<ExitCode> {
    let base = common.scenario()?;
    let settings = OptimizerSettings::default();
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let jobs = figure_jobs(id, &base, base.trials, base.seed)?;
    for job in &jobs {
        log::info!("figure {id}: {} ({} runs)", job.name, job.spec.num_runs());
        let rows = run_sweep(&job.base, &job.spec, &settings, !common.no_wall_time)?;
        let command = format!("figure {id}");
        let car = sidecar(&command, &job.base, &settings, Some(&job.spec), !common.no_wall_time);
        write_outputs(&dir, &job.name, &rows, &car)?;
        eprintln!("wrote {}", dir.join(format!("{}.csv", job.name)).display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_aggregate(common: &Common, input: &Path) -> Result<ExitCode> {
    let file = std::fs::File::open(input).map_err(|source| Error::Io {
        path: input.display().to_string(),
        source,
    })?;
    let stats = aggregate(file)?;
    let scale = common.rate_scale();
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| Error::Io { path, source }
    };
    match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(io(dir))?;
            let path = dir.join("aggregate.csv");
            let file = std::fs::File::create(&path).map_err(io(&path))?;
            write_aggregate(std::io::BufWriter::new(file), &stats, scale).map_err(io(&path))?;
        }
        None => write_aggregate(std::io::stdout().lock(), &stats, scale).map_err(io(Path::new("<stdout>")))?,
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.common.jobs {
        if jobs == 0 {
            return Err(Error::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Run { trial } => cmd_run(&cli.common, *trial),
        Command::Sweep { var, values } => cmd_sweep(&cli.common, var, values),
        Command::Figure { id } => cmd_figure(&cli.common, *id),
        Command::Aggregate { input } => cmd_aggregate(&cli.common, input),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STAR_SECRECY_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
