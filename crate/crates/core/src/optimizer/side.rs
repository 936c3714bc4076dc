//! Decoupled per-side problems: time switching and the baselines.
//!
//! With unit-modulus elements each side carries its own relaxation
//!
//! ```text
//! max  sigma2 + tr(W_B Q) - gamma (sigma2 + tr(G_E Q))
//! s.t. tr(G_E Q) >= E,   Q_ii = 1,   Q PSD
//! ```
//!
//! The time share only scales a side's objective, so the maximizer does not
//! depend on it. Each side is solved once and the share is chosen afterwards
//! by a grid search over the extracted rates.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use super::extract::extract_rank_one;
use super::lifted::{build_lifted, phases_from_vector, trace_product, LiftedData, SideData};
use super::{
    direct_energy, energy_requirement, evaluate, solve_relaxation, DinkelbachState, GammaStep, OptResult,
    OptimizerSettings, Relaxation,
};
use crate::error::Result;
use crate::model::{clamped_rate, TarcConfig};
use crate::scenario::{ChannelSet, Protocol, Scenario, Side};
use crate::sdp::{HermitianCoeff, HermitianSdp, LinearConstraint, LinearTerm};

const LAMBDA_TIE_TOL: f64 = 1e-12;

/// Relaxed optimum of one side.
#[derive(Debug, Clone)]
pub struct SideRelaxation {
    pub q: DMatrix<Complex64>,
    /// Ratio at `q`.
    pub gamma: f64,
    /// `(gamma computed from iterate j, F at iterate j)`.
    pub trace: Vec<(f64, f64)>,
    pub converged: bool,
}

fn side_problem(side: SideData<'_>, gamma: f64, energy: f64) -> HermitianSdp {
    let n = side.w_b.nrows();
    let obj = side.w_b - side.g_e * Complex64::new(gamma, 0.0);
    let mut p = HermitianSdp::new(vec![n], vec![])
        .with_objective(LinearTerm::block(0, HermitianCoeff::Dense(obj)));
    for i in 0..n {
        p = p.with_equality(LinearConstraint::new(LinearTerm::block(0, HermitianCoeff::diag_entry(i)), 1.0));
    }
    if energy > 0.0 {
        p = p.with_inequality(LinearConstraint::new(
            LinearTerm::block(0, HermitianCoeff::Dense(side.g_e.clone())),
            energy,
        ));
    }
    p
}

/// Dinkelbach iteration on a single side with unit-modulus elements.
/// Returns `None` when the energy requirement cannot be met.
pub fn side_dinkelbach(
    side: SideData<'_>,
    gamma0: f64,
    energy: f64,
    sigma2: f64,
    settings: &OptimizerSettings,
) -> Result<Option<SideRelaxation>> {
    let mut gamma = gamma0;
    let mut trace = Vec::new();
    let mut current: Option<DMatrix<Complex64>> = None;
    let mut converged = false;
    for _ in 0..settings.max_dinkelbach {
        let problem = side_problem(side, gamma, energy);
        let sol = match solve_relaxation(&problem, &settings.sdp)? {
            Relaxation::Solved(sol) => sol,
            Relaxation::Infeasible if current.is_none() => return Ok(None),
            Relaxation::Infeasible => break,
        };
        let q = sol.block_values.into_iter().next().expect("one block");
        let f = sol.objective_value + sigma2 * (1.0 - gamma);
        gamma = side.ratio(&q, sigma2);
        trace.push((gamma, f));
        current = Some(q);
        if f.abs() <= settings.eps1 {
            converged = true;
            break;
        }
    }
    let q = current.expect("at least one solved iterate");
    Ok(Some(SideRelaxation {
        gamma: side.ratio(&q, sigma2),
        q,
        trace,
        converged,
    }))
}

/// Both sides of the time-switching problem, before the share is chosen.
struct TsSides {
    phases: [Vec<f64>; 2],
    /// Unweighted per-side secrecy rates at the extracted configuration.
    rates: [f64; 2],
    relaxed: [SideRelaxation; 2],
    /// Side ratios at the extracted configuration.
    extracted_ratio: [f64; 2],
    feasible: bool,
}

fn solve_ts_sides<R: Rng + ?Sized>(
    channels: &ChannelSet,
    scenario: &Scenario,
    settings: &OptimizerSettings,
    lifted: &LiftedData,
    rng: &mut R,
) -> Result<Option<TsSides>> {
    let sigma2 = scenario.noise_power;
    let init = DinkelbachState::initial(lifted, sigma2);
    let mut relaxed = Vec::with_capacity(2);
    for side in Side::BOTH {
        match side_dinkelbach(
            lifted.side(side),
            init.gamma(side),
            energy_requirement(scenario, side),
            sigma2,
            settings,
        )? {
            Some(r) => relaxed.push(r),
            None => return Ok(None),
        }
    }
    let mut phases: [Vec<f64>; 2] = Default::default();
    let mut ratios = [0.0; 2];
    let mut feasible = true;
    for side in Side::BOTH {
        let k = side.index();
        let ex = extract_rank_one(
            &relaxed[k].q,
            None,
            lifted.side(side),
            energy_requirement(scenario, side),
            sigma2,
            settings,
            rng,
        )?;
        feasible &= ex.feasible;
        ratios[k] = ex.ratio;
        phases[k] = phases_from_vector(&ex.q);
    }
    // full-share rates, from which any split follows linearly
    let full = evaluate(
        channels,
        scenario,
        &TarcConfig::time_switching(phases[0].clone(), phases[1].clone(), 1.0),
    );
    let rates = Side::BOTH.map(|s| clamped_rate(full.snr_bob(s), full.snr_eve(s)));
    let relaxed: [SideRelaxation; 2] = relaxed.try_into().expect("two sides");
    Ok(Some(TsSides {
        phases,
        rates,
        relaxed,
        extracted_ratio: ratios,
        feasible,
    }))
}

fn merge_traces(a: &[(f64, f64)], b: &[(f64, f64)], lambda_r: f64) -> Vec<GammaStep> {
    let len = a.len().max(b.len());
    (0..len)
        .map(|j| {
            let (gr, fr) = a[j.min(a.len() - 1)];
            let (gt, ft) = b[j.min(b.len() - 1)];
            GammaStep {
                gamma_r: gr,
                gamma_t: gt,
                objective: lambda_r * fr + (1.0 - lambda_r) * ft,
            }
        })
        .collect()
}

fn ts_result(
    channels: &ChannelSet,
    scenario: &Scenario,
    sides: &TsSides,
    lambda_r: f64,
    bound: f64,
) -> OptResult {
    let config = TarcConfig::time_switching(sides.phases[0].clone(), sides.phases[1].clone(), lambda_r);
    let weights = [lambda_r, 1.0 - lambda_r];
    let surrogate = weights[0] * sides.extracted_ratio[0] + weights[1] * sides.extracted_ratio[1];
    let mut out = OptResult::finish(channels, scenario, config, sides.feasible, bound, surrogate);
    out.gamma_trace = merge_traces(&sides.relaxed[0].trace, &sides.relaxed[1].trace, lambda_r);
    out.iterations_ic = out.gamma_trace.len();
    out.converged = sides.relaxed.iter().all(|r| r.converged);
    out
}

/// Time switching at a fixed reflect share `lambda_r`.
pub fn solve_ts_fixed_lambda<R: Rng + ?Sized>(
    channels: &ChannelSet,
    scenario: &Scenario,
    settings: &OptimizerSettings,
    lambda_r: f64,
    rng: &mut R,
) -> Result<OptResult> {
    if !(0.0..=1.0).contains(&lambda_r) {
        return Err(crate::error::Error::Config(format!("lambda_r = {lambda_r} outside [0, 1]")));
    }
    let lifted = build_lifted(channels, scenario.transmit_power);
    match solve_ts_sides(channels, scenario, settings, &lifted, rng)? {
        Some(sides) => {
            let bound = lambda_r * sides.relaxed[0].gamma + (1.0 - lambda_r) * sides.relaxed[1].gamma;
            Ok(ts_result(channels, scenario, &sides, lambda_r, bound))
        }
        None => Ok(OptResult::infeasible(channels, scenario, vec![])),
    }
}

/// Time switching with the share chosen on a uniform grid; the smallest
/// `lambda_r` wins ties.
pub fn solve_ts<R: Rng + ?Sized>(
    channels: &ChannelSet,
    scenario: &Scenario,
    settings: &OptimizerSettings,
    rng: &mut R,
) -> Result<OptResult> {
    let lifted = build_lifted(channels, scenario.transmit_power);
    let Some(sides) = solve_ts_sides(channels, scenario, settings, &lifted, rng)? else {
        return Ok(OptResult::infeasible(channels, scenario, vec![]));
    };
    let steps = (1.0 / settings.lambda_grid_step).round() as usize;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=steps {
        let lambda_r = (i as f64 * settings.lambda_grid_step).min(1.0);
        let rate = lambda_r * sides.rates[0] + (1.0 - lambda_r) * sides.rates[1];
        // rates equal up to round-off count as ties
        if rate > best.0 + LAMBDA_TIE_TOL * best.0.abs().max(1.0) {
            best = (rate, lambda_r);
        }
    }
    // the share is a decision variable too, so the relaxed optimum is the
    // better endpoint of the linear surrogate
    let bound = sides.relaxed[0].gamma.max(sides.relaxed[1].gamma);
    Ok(ts_result(channels, scenario, &sides, best.1, bound))
}

/// Conventional reflect-only surface or no surface at all.
pub fn solve_baseline<R: Rng + ?Sized>(
    channels: &ChannelSet,
    scenario: &Scenario,
    settings: &OptimizerSettings,
    kind: Protocol,
    rng: &mut R,
) -> Result<OptResult> {
    let m = channels.num_elements();
    let sigma2 = scenario.noise_power;
    let lifted = build_lifted(channels, scenario.transmit_power);
    let init = DinkelbachState::initial(&lifted, sigma2);
    let direct_ok =
        |side: Side| direct_energy(channels, scenario, side) >= energy_requirement(scenario, side) - super::ENERGY_TOL;
    match kind {
        Protocol::Ris => {
            if !direct_ok(Side::Transmit) {
                return Ok(OptResult::infeasible(channels, scenario, vec![]));
            }
            let Some(relaxed) = side_dinkelbach(lifted.side(Side::Reflect), init.gamma_r, scenario.energy_r, sigma2, settings)?
            else {
                return Ok(OptResult::infeasible(channels, scenario, vec![]));
            };
            let ex = extract_rank_one(
                &relaxed.q,
                None,
                lifted.side(Side::Reflect),
                scenario.energy_r,
                sigma2,
                settings,
                rng,
            )?;
            let config = TarcConfig::reflect_only(phases_from_vector(&ex.q));
            let bound = relaxed.gamma + init.gamma_t;
            let mut out = OptResult::finish(channels, scenario, config, ex.feasible, bound, ex.ratio + init.gamma_t);
            out.gamma_trace = relaxed
                .trace
                .iter()
                .map(|&(g, f)| GammaStep {
                    gamma_r: g,
                    gamma_t: init.gamma_t,
                    objective: f,
                })
                .collect();
            out.iterations_ic = out.gamma_trace.len();
            out.converged = relaxed.converged;
            Ok(out)
        }
        _ => {
            let feasible = direct_ok(Side::Reflect) && direct_ok(Side::Transmit);
            let bound = init.gamma_r + init.gamma_t;
            Ok(OptResult::finish(channels, scenario, TarcConfig::zero(m), feasible, bound, bound))
        }
    }
}

/// `tr(G_E Q)`, the relaxed harvested energy.
pub fn relaxed_energy(side: SideData<'_>, q: &DMatrix<Complex64>) -> f64 {
    trace_product(side.g_e, q)
}
