//! Experiment plumbing behind the `star-secrecy` binary: sweep
//! specifications, result rows, CSV/JSON output, figure grids and
//! aggregation.
//!
//! Rows are always emitted in (protocol, value, trial) order no matter how
//! the worker pool schedules the runs.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use star_secrecy::experiment::run_trial;
use star_secrecy::optimizer::{OptResult, OptimizerSettings};
use star_secrecy::scenario::{Protocol, Scenario, PRNG_NAME};

/// Exact CSV header of every results file.
pub const CSV_HEADER: &str = "protocol,sweep_var,sweep_value,trial,rate_sum,rate_r,rate_t,energy_r,energy_t,feasible,ic,id,wall_s";

/// Header of the `aggregate` output.
pub const AGGREGATE_HEADER: &str =
    "protocol,sweep_var,sweep_value,n,n_feasible,rate_mean,rate_stderr,energy_r_mean,energy_t_mean";

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] star_secrecy::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Formats a float with 9 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

/// Quantity varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    /// Number of surface elements.
    M,
    /// Energy requirement, applied to both Eves.
    E,
    /// Transmit power.
    PS,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::M => "m",
            SweepVar::E => "e",
            SweepVar::PS => "p_s",
        }
    }

    pub fn format_value(self, v: f64) -> String {
        match self {
            SweepVar::M => format!("{}", v as usize),
            _ => fmt_float(v),
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "m" => Ok(SweepVar::M),
            "e" => Ok(SweepVar::E),
            "p_s" | "ps" => Ok(SweepVar::PS),
            _ => Err(Error::Usage(format!("unknown sweep variable '{s}' (expected m, e or p_s)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub variable: SweepVar,
    pub values: Vec<f64>,
    pub protocols: Vec<Protocol>,
    pub trials: usize,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Usage("sweep needs at least one value".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Usage("sweep values must be strictly increasing".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("sweep values must be finite".into()));
        }
        if self.variable == SweepVar::M && self.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(Error::Usage("m values must be positive integers".into()));
        }
        if self.protocols.is_empty() {
            return Err(Error::Usage("sweep needs at least one protocol".into()));
        }
        if self.trials < 1 {
            return Err(Error::Usage("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// Scenario for one grid point.
    pub fn scenario(&self, base: &Scenario, protocol: Protocol, value: f64) -> Scenario {
        let s = Scenario {
            trials: self.trials,
            seed: self.seed,
            ..base.clone()
        }
        .with_protocol(protocol);
        match self.variable {
            SweepVar::M => s.with_elements(value as usize),
            SweepVar::E => s.with_energy(value),
            SweepVar::PS => s.with_power(value),
        }
    }

    pub fn num_runs(&self) -> usize {
        self.protocols.len() * self.values.len() * self.trials
    }
}

/// One optimization run, as written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub protocol: Protocol,
    pub sweep_var: String,
    pub sweep_value: String,
    pub trial: u64,
    pub rate_sum: f64,
    pub rate_r: f64,
    pub rate_t: f64,
    pub energy_r: f64,
    pub energy_t: f64,
    pub feasible: bool,
    pub ic: usize,
    pub id: usize,
    pub wall_s: f64,
}

impl ResultRow {
    pub fn from_result(
        protocol: Protocol,
        var: &str,
        value: &str,
        trial: u64,
        result: &OptResult,
        wall_s: f64,
    ) -> Self {
        let m = &result.metrics;
        Self {
            protocol,
            sweep_var: var.to_string(),
            sweep_value: value.to_string(),
            trial,
            rate_sum: m.rate_sum,
            rate_r: m.rate_r,
            rate_t: m.rate_t,
            energy_r: m.energy_eve_r,
            energy_t: m.energy_eve_t,
            feasible: result.feasible,
            ic: result.iterations_ic,
            id: result.iterations_id,
            wall_s,
        }
    }

    /// Row for a run that returned an error.
    pub fn failed(protocol: Protocol, var: &str, value: &str, trial: u64, wall_s: f64) -> Self {
        Self {
            protocol,
            sweep_var: var.to_string(),
            sweep_value: value.to_string(),
            trial,
            rate_sum: 0.0,
            rate_r: 0.0,
            rate_t: 0.0,
            energy_r: 0.0,
            energy_t: 0.0,
            feasible: false,
            ic: 0,
            id: 0,
            wall_s,
        }
    }

    fn fields(&self) -> [String; 13] {
        [
            self.protocol.to_string(),
            self.sweep_var.clone(),
            self.sweep_value.clone(),
            self.trial.to_string(),
            fmt_float(self.rate_sum),
            fmt_float(self.rate_r),
            fmt_float(self.rate_t),
            fmt_float(self.energy_r),
            fmt_float(self.energy_t),
            self.feasible.to_string(),
            self.ic.to_string(),
            self.id.to_string(),
            fmt_float(self.wall_s),
        ]
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Provenance written next to every CSV.
#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub version: &'static str,
    pub prng: &'static str,
    pub command: &'a str,
    pub scenario: &'a Scenario,
    pub settings: &'a OptimizerSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<&'a SweepSpec>,
    pub wall_time_recorded: bool,
}

impl<'a> Sidecar<'a> {
    pub fn new(command: &'a str, scenario: &'a Scenario, settings: &'a OptimizerSettings) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            prng: PRNG_NAME,
            command,
            scenario,
            settings,
            sweep: None,
            wall_time_recorded: true,
        }
    }
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`.
pub fn write_outputs(dir: &Path, stem: &str, rows: &[ResultRow], sidecar: &Sidecar<'_>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let file = std::fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_csv(std::io::BufWriter::new(file), rows)?;
    let json_path = dir.join(format!("{stem}.json"));
    let mut text = serde_json::to_string_pretty(sidecar)?;
    text.push('\n');
    std::fs::write(&json_path, text).map_err(io_err(&json_path))?;
    log::info!("wrote {} rows to {}", rows.len(), csv_path.display());
    Ok(())
}

/// Runs every (protocol, value, trial) combination of `spec` on the current
/// rayon pool. Failed runs become infeasible rows and are logged.
pub fn run_sweep(base: &Scenario, spec: &SweepSpec, settings: &OptimizerSettings, wall_time: bool) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let mut jobs = Vec::with_capacity(spec.num_runs());
    for &protocol in &spec.protocols {
        for &value in &spec.values {
            let scenario = spec.scenario(base, protocol, value);
            scenario.validate()?;
            for trial in 0..spec.trials as u64 {
                jobs.push((protocol, value, trial, scenario.clone()));
            }
        }
    }
    let var = spec.variable.as_str();
    let rows = jobs
        .into_par_iter()
        .map(|(protocol, value, trial, scenario)| {
            let label = spec.variable.format_value(value);
            let start = Instant::now();
            let outcome = run_trial(&scenario, settings, trial);
            let wall = if wall_time { start.elapsed().as_secs_f64() } else { 0.0 };
            match outcome {
                Ok(o) => ResultRow::from_result(protocol, var, &label, trial, &o.result, wall),
                Err(e) => {
                    log::error!("{protocol} {var}={label} trial {trial}: {e}");
                    ResultRow::failed(protocol, var, &label, trial, wall)
                }
            }
        })
        .collect();
    Ok(rows)
}

/// One CSV produced by a figure.
#[derive(Debug, Clone)]
pub struct FigureJob {
    /// File stem, e.g. `fig2_e1.4`.
    pub name: String,
    pub base: Scenario,
    pub spec: SweepSpec,
}

fn float_range(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + step * i as f64).collect()
}

fn label(x: f64) -> String {
    format!("{x}")
}

/// Parameter grids of the four result figures.
pub fn figure_jobs(id: u32, base: &Scenario, trials: usize, seed: u64) -> Result<Vec<FigureJob>> {
    use Protocol::*;
    let m_grid = float_range(10.0, 5.0, 7);
    let spec = |variable, values: Vec<f64>, protocols: Vec<Protocol>| SweepSpec {
        variable,
        values,
        protocols,
        trials,
        seed,
    };
    let jobs = match id {
        2 => [0.1, 1.4]
            .into_iter()
            .map(|e| FigureJob {
                name: format!("fig2_e{}", label(e)),
                base: base.clone().with_energy(e),
                spec: spec(SweepVar::M, m_grid.clone(), vec![Es, Ms, Ts, Ris]),
            })
            .collect(),
        3 => {
            let e_grid: Vec<f64> = (0..16).map(|i| i as f64 / 10.0).collect();
            [10, 30]
                .into_iter()
                .map(|m| FigureJob {
                    name: format!("fig3_m{m}"),
                    base: base.clone().with_elements(m),
                    spec: spec(SweepVar::E, e_grid.clone(), vec![Es, Ms, Ts]),
                })
                .collect()
        }
        4 => [10, 30]
            .into_iter()
            .map(|m| FigureJob {
                name: format!("fig4_m{m}"),
                base: base.clone().with_elements(m).with_energy(0.1),
                spec: spec(SweepVar::PS, float_range(5.0, 5.0, 8), vec![Es, Ris, NoSurface]),
            })
            .collect(),
        5 => {
            let mut jobs = Vec::new();
            for e in [0.05, 0.12] {
                for p_s in [20.0, 40.0] {
                    jobs.push(FigureJob {
                        name: format!("fig5_e{}_ps{}", label(e), label(p_s)),
                        base: base.clone().with_energy(e).with_power(p_s),
                        spec: spec(SweepVar::M, m_grid.clone(), vec![Es]),
                    });
                }
            }
            jobs
        }
        _ => return Err(Error::Usage(format!("unknown figure {id} (expected 2, 3, 4 or 5)"))),
    };
    Ok(jobs)
}

/// Per-group summary of a results file.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub protocol: String,
    pub sweep_var: String,
    pub sweep_value: String,
    pub n: usize,
    pub n_feasible: usize,
    /// Mean over all rows; infeasible rows count as zero rate.
    pub rate_mean: f64,
    pub rate_stderr: f64,
    /// Energy means over feasible rows only.
    pub energy_r_mean: f64,
    pub energy_t_mean: f64,
}

#[derive(Debug, serde::Deserialize)]
struct RawRow {
    protocol: String,
    sweep_var: String,
    sweep_value: String,
    rate_sum: f64,
    energy_r: f64,
    energy_t: f64,
    feasible: bool,
}

/// Groups rows by (protocol, sweep_var, sweep_value) in order of first
/// appearance.
pub fn aggregate<R: Read>(input: R) -> Result<Vec<GroupStats>> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Usage(format!("unexpected header: {}", header.join(","))));
    }
    let mut keys: Vec<(String, String, String)> = Vec::new();
    let mut groups: Vec<Vec<RawRow>> = Vec::new();
    for row in reader.deserialize() {
        let row: RawRow = row?;
        let key = (row.protocol.clone(), row.sweep_var.clone(), row.sweep_value.clone());
        match keys.iter().position(|k| *k == key) {
            Some(i) => groups[i].push(row),
            None => {
                keys.push(key);
                groups.push(vec![row]);
            }
        }
    }
    Ok(keys
        .into_iter()
        .zip(groups)
        .map(|((protocol, sweep_var, sweep_value), rows)| {
            let n = rows.len();
            let rates: Vec<f64> = rows.iter().map(|r| if r.feasible { r.rate_sum } else { 0.0 }).collect();
            let mean = rates.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            let feasible: Vec<&RawRow> = rows.iter().filter(|r| r.feasible).collect();
            let nf = feasible.len();
            let emean = |f: fn(&RawRow) -> f64| {
                if nf == 0 {
                    f64::NAN
                } else {
                    feasible.iter().map(|r| f(r)).sum::<f64>() / nf as f64
                }
            };
            GroupStats {
                protocol,
                sweep_var,
                sweep_value,
                n,
                n_feasible: nf,
                rate_mean: mean,
                rate_stderr: stderr,
                energy_r_mean: emean(|r| r.energy_r),
                energy_t_mean: emean(|r| r.energy_t),
            }
        })
        .collect())
}

/// Writes aggregate statistics; `rate_scale` converts nats to the display
/// unit.
pub fn write_aggregate<W: Write>(mut out: W, stats: &[GroupStats], rate_scale: f64) -> std::io::Result<()> {
    writeln!(out, "{AGGREGATE_HEADER}")?;
    for g in stats {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            g.protocol,
            g.sweep_var,
            g.sweep_value,
            g.n,
            g.n_feasible,
            fmt_float(g.rate_mean * rate_scale),
            fmt_float(g.rate_stderr * rate_scale),
            fmt_float(g.energy_r_mean),
            fmt_float(g.energy_t_mean),
        )?;
    }
    Ok(())
}

/// Parses a comma-separated protocol list.
pub fn parse_protocols(s: &str) -> Result<Vec<Protocol>> {
    s.split(',')
        .map(|p| p.trim().parse::<Protocol>().map_err(Error::from))
        .collect()
}

/// Parses a comma-separated list of numbers.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("bad sweep value '{v}'")))
        })
        .collect()
}
