//! Secrecy-rate maximization over surface configurations.
//!
//! Every protocol follows the same pipeline: lift the per-side quadratic
//! forms ([`lifted`]), run a Dinkelbach loop over semidefinite relaxations,
//! extract a rank-one configuration ([`extract`]) and re-evaluate the true
//! metrics with [`crate::model`]. Joint problems (ES, MS) live in [`joint`],
//! decoupled per-side problems (TS, RIS) in [`side`].

pub mod extract;
pub mod joint;
pub mod lifted;
pub mod oracle;
pub mod side;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{harvested_energy, secrecy_rate, PerformanceMetrics, TarcConfig};
use crate::scenario::{ChannelSet, Protocol, Scenario, Side};
use crate::sdp::{self, HermitianSdp, SdpSettings, SdpSolution, SdpStatus};

pub use extract::{extract_rank_one, Extraction};
pub use joint::{solve_es, solve_ms};
pub use lifted::{build_lifted, dinkelbach_update, LiftedData, SideData};
pub use oracle::{brute_force_oracle, OracleResult};
pub use side::{solve_baseline, solve_ts, solve_ts_fixed_lambda};

/// Tolerance on harvested energy when deciding whether a configuration
/// meets its requirement.
pub const ENERGY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerSettings {
    /// Dinkelbach stopping accuracy on `|F|`.
    pub eps1: f64,
    /// Stopping accuracy on the MS binary violation.
    pub eps2: f64,
    /// Initial MS penalty weight.
    pub eta0: f64,
    /// MS penalty growth factor.
    pub omega: f64,
    pub max_dinkelbach: usize,
    pub max_penalty_outer: usize,
    /// Resolution of the TS time-share search.
    pub lambda_grid_step: f64,
    pub randomization_samples: usize,
    /// Second-to-first eigenvalue ratio below which a relaxed solution is
    /// treated as rank one.
    pub rank_one_ratio: f64,
    pub sdp: SdpSettings,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            eps1: 1e-4,
            eps2: 1e-4,
            eta0: 1e-2,
            omega: 10.0,
            max_dinkelbach: 50,
            max_penalty_outer: 30,
            lambda_grid_step: 0.01,
            randomization_samples: 1000,
            rank_one_ratio: 1e-6,
            sdp: SdpSettings::default(),
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.eps1 > 0.0 && self.eps2 > 0.0) {
            return bad("eps1 and eps2 must be positive");
        }
        if !(self.omega > 1.0) {
            return bad("omega must exceed 1");
        }
        if !(self.eta0 > 0.0) {
            return bad("eta0 must be positive");
        }
        if !(self.lambda_grid_step > 0.0 && self.lambda_grid_step <= 0.5) {
            return bad("lambda_grid_step must lie in (0, 0.5]");
        }
        if self.max_dinkelbach == 0 || self.max_penalty_outer == 0 {
            return bad("iteration caps must be positive");
        }
        Ok(())
    }
}

/// Current Dinkelbach ratio estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinkelbachState {
    pub gamma_r: f64,
    pub gamma_t: f64,
    pub iteration: usize,
    /// Value of the parametric objective at the current iterate.
    pub objective: f64,
}

impl DinkelbachState {
    /// Ratios at the zero configuration, where only the direct links count.
    pub fn initial(lifted: &LiftedData, sigma2: f64) -> Self {
        let m = lifted.dim() - 1;
        let mut q = DMatrix::from_element(m + 1, m + 1, Complex64::new(0.0, 0.0));
        q[(m, m)] = Complex64::new(1.0, 0.0);
        let (gamma_r, gamma_t) = dinkelbach_update(lifted, &q, &q, sigma2);
        Self {
            gamma_r,
            gamma_t,
            iteration: 0,
            objective: f64::NAN,
        }
    }

    pub fn gamma(&self, side: Side) -> f64 {
        match side {
            Side::Reflect => self.gamma_r,
            Side::Transmit => self.gamma_t,
        }
    }
}

/// One entry of the iteration trace: the ratios computed from an iterate and
/// the parametric objective that iterate attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaStep {
    pub gamma_r: f64,
    pub gamma_t: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub config: TarcConfig,
    /// Sum-of-ratios surrogate at the relaxed solution; `-inf` when the
    /// relaxation is infeasible.
    pub sdr_bound: f64,
    pub metrics: PerformanceMetrics,
    pub feasible: bool,
    /// Whether every iterative loop met its stopping rule.
    pub converged: bool,
    pub gamma_trace: Vec<GammaStep>,
    /// Dinkelbach iterations (summed over penalty rounds for MS).
    pub iterations_ic: usize,
    /// Penalty outer rounds (MS only).
    pub iterations_id: usize,
    /// `(sdr_bound - surrogate at config) / |sdr_bound|`.
    pub rank_gap: f64,
}

impl OptResult {
    /// Result for an unreachable energy requirement.
    pub(crate) fn infeasible(channels: &ChannelSet, scenario: &Scenario, trace: Vec<GammaStep>) -> Self {
        let config = TarcConfig::zero(channels.num_elements());
        let mut metrics = evaluate(channels, scenario, &config);
        metrics.rate_r = 0.0;
        metrics.rate_t = 0.0;
        metrics.rate_sum = 0.0;
        Self {
            config,
            sdr_bound: f64::NEG_INFINITY,
            metrics,
            feasible: false,
            converged: false,
            iterations_ic: trace.len(),
            gamma_trace: trace,
            iterations_id: 0,
            rank_gap: f64::NAN,
        }
    }

    /// Fills metrics and the feasibility flag from `config`. Infeasible
    /// configurations report zero rate.
    pub(crate) fn finish(
        channels: &ChannelSet,
        scenario: &Scenario,
        config: TarcConfig,
        extracted_feasible: bool,
        sdr_bound: f64,
        surrogate: f64,
    ) -> Self {
        let mut metrics = evaluate(channels, scenario, &config);
        let feasible = extracted_feasible && meets_energy(&metrics, scenario);
        if !feasible {
            metrics.rate_r = 0.0;
            metrics.rate_t = 0.0;
            metrics.rate_sum = 0.0;
        }
        Self {
            config,
            sdr_bound,
            metrics,
            feasible,
            converged: true,
            gamma_trace: vec![],
            iterations_ic: 0,
            iterations_id: 0,
            rank_gap: relative_gap(sdr_bound, surrogate),
        }
    }
}

pub(crate) fn relative_gap(bound: f64, value: f64) -> f64 {
    if bound.is_finite() {
        (bound - value) / bound.abs().max(f64::MIN_POSITIVE)
    } else {
        f64::NAN
    }
}

pub(crate) fn evaluate(channels: &ChannelSet, scenario: &Scenario, config: &TarcConfig) -> PerformanceMetrics {
    secrecy_rate(channels, config, scenario.transmit_power, scenario.noise_power)
}

pub(crate) fn meets_energy(metrics: &PerformanceMetrics, scenario: &Scenario) -> bool {
    metrics.energy_eve_r >= scenario.energy_r - ENERGY_TOL && metrics.energy_eve_t >= scenario.energy_t - ENERGY_TOL
}

pub(crate) fn energy_requirement(scenario: &Scenario, side: Side) -> f64 {
    match side {
        Side::Reflect => scenario.energy_r,
        Side::Transmit => scenario.energy_t,
    }
}

/// Energy harvested from the direct link alone.
pub(crate) fn direct_energy(channels: &ChannelSet, scenario: &Scenario, side: Side) -> f64 {
    harvested_energy(channels, &TarcConfig::zero(channels.num_elements()), side, scenario.transmit_power)
}

/// What an SDP solve produced, from the optimizer's point of view.
pub(crate) enum Relaxation {
    Solved(SdpSolution),
    Infeasible,
}

/// Solves `problem`, accepting non-optimal exits whose primal iterate is
/// still feasible to a loose tolerance.
pub(crate) fn solve_relaxation(problem: &HermitianSdp, settings: &SdpSettings) -> Result<Relaxation> {
    let sol = sdp::solve(problem, settings)?;
    log::trace!("sdp {:?} in {} iterations", sol.status, sol.iterations);
    match sol.status {
        SdpStatus::Optimal => Ok(Relaxation::Solved(sol)),
        SdpStatus::Infeasible => Ok(Relaxation::Infeasible),
        SdpStatus::MaxIters | SdpStatus::NumericalFailure => {
            if sol.primal_residual <= 1e-6 && sol.objective_value.is_finite() {
                log::debug!(
                    "accepting {:?} exit after {} iterations (gap {:e})",
                    sol.status,
                    sol.iterations,
                    sol.duality_gap
                );
                Ok(Relaxation::Solved(sol))
            } else {
                log::warn!("relaxation failed with {:?}; treating as infeasible", sol.status);
                Ok(Relaxation::Infeasible)
            }
        }
    }
}

/// Runs the optimizer selected by `scenario.protocol`.
pub fn optimize<R: Rng + ?Sized>(
    channels: &ChannelSet,
    scenario: &Scenario,
    settings: &OptimizerSettings,
    rng: &mut R,
) -> Result<OptResult> {
    scenario.validate()?;
    settings.validate()?;
    if channels.num_elements() != scenario.num_elements {
        return Err(Error::Dimension {
            expected: scenario.num_elements,
            got: channels.num_elements(),
        });
    }
    match scenario.protocol {
        Protocol::Es => solve_es(channels, scenario, settings, rng),
        Protocol::Ms => solve_ms(channels, scenario, settings, rng),
        Protocol::Ts => solve_ts(channels, scenario, settings, rng),
        Protocol::Ris | Protocol::NoSurface => solve_baseline(channels, scenario, settings, scenario.protocol, rng),
    }
}
