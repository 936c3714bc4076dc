//! Joint relaxation over both sides: energy splitting and mode selection.
//!
//! Variables are the two lifted blocks `Q_r`, `Q_t` of size `M + 1` and the
//! reflect shares `beta` (the transmit share is `1 - beta`):
//!
//! ```text
//! max  sum_k sigma2 + tr(W_B^k Q_k) - gamma_k (sigma2 + tr(G_E^k Q_k))
//! s.t. Q_r[m][m] = beta_m,  Q_t[m][m] = 1 - beta_m,  Q_k[M][M] = 1
//!      tr(G_E^k Q_k) >= E_k,  0 <= beta_m <= 1,  Q_k PSD
//! ```
//!
//! Mode selection adds `-eta * sum_m sum_k [b_k^2 + (1 - 2 b_k) beta_k]`,
//! the linearization of `beta - beta^2` at the previous shares `b`, and
//! grows `eta` between rounds until the shares are binary.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use super::extract::extract_rank_one;
use super::lifted::{build_lifted, phases_from_vector, trace_product, LiftedData};
use super::{
    energy_requirement, solve_relaxation, DinkelbachState, GammaStep, OptResult, OptimizerSettings, Relaxation,
};
use crate::error::Result;
use crate::model::TarcConfig;
use crate::scenario::{ChannelSet, Scenario, Side};
use crate::sdp::{HermitianCoeff, HermitianSdp, LinearConstraint, LinearTerm};

/// Penalty data for one mode-selection round.
#[derive(Debug, Clone, Copy)]
pub struct Penalty<'a> {
    /// Linearization points for the reflect shares.
    pub points: &'a [f64],
    pub eta: f64,
}

/// Relaxed iterate of the joint problem.
#[derive(Debug, Clone)]
pub struct JointRelaxation {
    pub q: [DMatrix<Complex64>; 2],
    pub beta_r: Vec<f64>,
    pub state: DinkelbachState,
    pub converged: bool,
}

impl JointRelaxation {
    /// Sum of side ratios at the relaxed blocks.
    pub fn surrogate(&self) -> f64 {
        self.state.gamma_r + self.state.gamma_t
    }
}

/// Sides whose term enters the objective. A side left out keeps all of its
/// constraints.
pub type ActiveSides = [bool; 2];

pub const BOTH_ACTIVE: ActiveSides = [true, true];

/// The full objective first, then each single-side objective.
const VARIANTS: [ActiveSides; 3] = [BOTH_ACTIVE, [true, false], [false, true]];
const MS_STALL_TOL: f64 = 1e-9;

/// Builds the joint relaxation for fixed ratio estimates.
pub fn joint_problem(
    lifted: &LiftedData,
    scenario: &Scenario,
    gamma: [f64; 2],
    active: ActiveSides,
    penalty: Option<Penalty<'_>>,
) -> HermitianSdp {
    let n = lifted.dim();
    let m = n - 1;
    let one = Complex64::new(1.0, 0.0);
    let mut objective = LinearTerm::default();
    for side in Side::BOTH {
        let k = side.index();
        if !active[k] {
            continue;
        }
        let coeff = &lifted.w_b[k] - &lifted.g_e[k] * Complex64::new(gamma[k], 0.0);
        objective = objective.with_block(k, HermitianCoeff::Dense(coeff));
    }
    if let Some(p) = penalty {
        for (j, &b) in p.points.iter().enumerate() {
            // (1 - 2 b_r) beta_r + (1 - 2 b_t)(1 - beta_r) with b_t = 1 - b_r
            objective = objective.with_scalar(j, -p.eta * 2.0 * (1.0 - 2.0 * b));
        }
    }
    let mut problem = HermitianSdp::new(vec![n, n], vec![(0.0, 1.0); m]).with_objective(objective);
    for j in 0..m {
        problem = problem
            .with_equality(LinearConstraint::new(
                LinearTerm::block(0, HermitianCoeff::diag_entry(j)).with_scalar(j, -1.0),
                0.0,
            ))
            .with_equality(LinearConstraint::new(
                LinearTerm::block(1, HermitianCoeff::diag_entry(j)).with_scalar(j, 1.0),
                1.0,
            ));
    }
    for k in 0..2 {
        problem = problem.with_equality(LinearConstraint::new(
            LinearTerm::block(k, HermitianCoeff::Sparse(vec![(m, m, one)])),
            1.0,
        ));
    }
    for side in Side::BOTH {
        let e = energy_requirement(scenario, side);
        if e > 0.0 {
            problem = problem.with_inequality(LinearConstraint::new(
                LinearTerm::block(side.index(), HermitianCoeff::Dense(lifted.g_e[side.index()].clone())),
                e,
            ));
        }
    }
    problem
}

/// `sum_k sigma2 + tr(W_B^k Q_k) - gamma_k (sigma2 + tr(G_E^k Q_k))`.
fn parametric_objective(
    lifted: &LiftedData,
    q: &[DMatrix<Complex64>; 2],
    gamma: [f64; 2],
    active: ActiveSides,
    sigma2: f64,
) -> f64 {
    (0..2)
        .filter(|&k| active[k])
        .map(|k| sigma2 + trace_product(&lifted.w_b[k], &q[k]) - gamma[k] * (sigma2 + trace_product(&lifted.g_e[k], &q[k])))
        .sum()
}

/// Dinkelbach loop on the joint relaxation starting from `state`. Appends
/// one trace entry per solved iterate. Returns `None` when the very first
/// relaxation is infeasible.
pub fn joint_dinkelbach(
    lifted: &LiftedData,
    scenario: &Scenario,
    settings: &OptimizerSettings,
    state: DinkelbachState,
    active: ActiveSides,
    penalty: Option<Penalty<'_>>,
    trace: &mut Vec<GammaStep>,
) -> Result<Option<JointRelaxation>> {
    let sigma2 = scenario.noise_power;
    let mut gamma = [state.gamma_r, state.gamma_t];
    let mut current: Option<JointRelaxation> = None;
    for j in 0..settings.max_dinkelbach {
        let problem = joint_problem(lifted, scenario, gamma, active, penalty);
        let sol = match solve_relaxation(&problem, &settings.sdp)? {
            Relaxation::Solved(sol) => sol,
            Relaxation::Infeasible => break,
        };
        let mut blocks = sol.block_values.into_iter();
        let q = [blocks.next().expect("block r"), blocks.next().expect("block t")];
        let f = parametric_objective(lifted, &q, gamma, active, sigma2);
        let (gr, gt) = super::dinkelbach_update(lifted, &q[0], &q[1], sigma2);
        trace.push(GammaStep {
            gamma_r: gr,
            gamma_t: gt,
            objective: f,
        });
        gamma = [gr, gt];
        let converged = f.abs() <= settings.eps1;
        current = Some(JointRelaxation {
            q,
            beta_r: sol.scalar_values.iter().map(|b| b.clamp(0.0, 1.0)).collect(),
            state: DinkelbachState {
                gamma_r: gr,
                gamma_t: gt,
                iteration: state.iteration + j + 1,
                objective: f,
            },
            converged,
        });
        if converged {
            break;
        }
    }
    Ok(current)
}

/// Extracts both sides at fixed shares. Returns the result together with
/// the sum of side ratios at the extracted configuration.
#[allow(clippy::too_many_arguments)]
fn finish_joint<R: Rng + ?Sized>(
    channels: &ChannelSet,
    scenario: &Scenario,
    settings: &OptimizerSettings,
    lifted: &LiftedData,
    relaxed: &JointRelaxation,
    beta_r: &[f64],
    make: impl FnOnce(Vec<f64>, Vec<f64>) -> TarcConfig,
    rng: &mut R,
) -> Result<(OptResult, f64)> {
    let beta_t: Vec<f64> = beta_r.iter().map(|b| 1.0 - b).collect();
    let mut phases: [Vec<f64>; 2] = Default::default();
    let mut surrogate = 0.0;
    let mut feasible = true;
    for (side, shares) in [(Side::Reflect, beta_r), (Side::Transmit, beta_t.as_slice())] {
        let k = side.index();
        let ex = extract_rank_one(
            &relaxed.q[k],
            Some(shares),
            lifted.side(side),
            energy_requirement(scenario, side),
            scenario.noise_power,
            settings,
            rng,
        )?;
        feasible &= ex.feasible;
        surrogate += ex.ratio;
        phases[k] = phases_from_vector(&ex.q);
    }
    let [phi_r, phi_t] = phases;
    let out = OptResult::finish(
        channels,
        scenario,
        make(phi_r, phi_t),
        feasible,
        relaxed.surrogate(),
        surrogate,
    );
    Ok((out, surrogate))
}

/// Keeps the better of two candidates: feasible first, then higher rate.
/// Earlier candidates win ties.
fn better(current: Option<(OptResult, f64)>, next: (OptResult, f64)) -> (OptResult, f64) {
    match current {
        None => next,
        Some(cur) => {
            let a = &cur.0;
            let b = &next.0;
            let wins = (b.feasible && !a.feasible)
                || (b.feasible == a.feasible
                    && b.metrics.rate_sum > a.metrics.rate_sum + 1e-12 * a.metrics.rate_sum.abs().max(1.0));
            if wins {
                next
            } else {
                cur
            }
        }
    }
}

/// Solves every objective variant and keeps the best extracted result. The
/// reported bound is `bound`, or the full variant's relaxed value when `None`.
fn best_variant<R: Rng + ?Sized>(
    channels: &ChannelSet,
    scenario: &Scenario,
    bound: Option<f64>,
    rng: &mut R,
    mut solve: impl FnMut(ActiveSides, &mut R) -> Result<Variant>,
) -> Result<OptResult> {
    let mut best: Option<(OptResult, f64)> = None;
    let mut full_bound = f64::NEG_INFINITY;
    for active in VARIANTS {
        match solve(active, rng)? {
            Variant::Infeasible(trace) => return Ok(OptResult::infeasible(channels, scenario, trace)),
            Variant::Solved { result, surrogate, relaxed_bound } => {
                if active == BOTH_ACTIVE {
                    full_bound = relaxed_bound;
                }
                best = Some(better(best, (result, surrogate)));
            }
        }
    }
    let (mut out, surrogate) = best.expect("at least one variant");
    let bound = bound.unwrap_or(full_bound);
    out.sdr_bound = bound;
    out.rank_gap = super::relative_gap(bound, surrogate);
    Ok(out)
}

/// Outcome of one objective variant.
enum Variant {
    /// The constraints cannot be met; identical for every variant.
    Infeasible(Vec<GammaStep>),
    Solved {
        result: OptResult,
        surrogate: f64,
        relaxed_bound: f64,
    },
}

/// Energy splitting.
///
/// Because each side's rate is clamped at zero, giving up one side entirely
/// can beat any balanced split. Besides the full objective, the problem is
/// therefore also solved with each single side's term, and the configuration
/// with the highest extracted rate is reported.
pub fn solve_es<R: Rng + ?Sized>(
    channels: &ChannelSet,
    scenario: &Scenario,
    settings: &OptimizerSettings,
    rng: &mut R,
) -> Result<OptResult> {
    let lifted = build_lifted(channels, scenario.transmit_power);
    let init = DinkelbachState::initial(&lifted, scenario.noise_power);
    best_variant(channels, scenario, None, rng, |active, rng| {
        let mut trace = Vec::new();
        let Some(relaxed) = joint_dinkelbach(&lifted, scenario, settings, init, active, None, &mut trace)? else {
            return Ok(Variant::Infeasible(trace));
        };
        let beta_r = relaxed.beta_r.clone();
        let (mut result, surrogate) = finish_joint(
            channels,
            scenario,
            settings,
            &lifted,
            &relaxed,
            &beta_r,
            |phi_r, phi_t| TarcConfig::energy_splitting(beta_r.clone(), phi_r, phi_t),
            rng,
        )?;
        result.converged = relaxed.converged;
        result.iterations_ic = trace.len();
        result.gamma_trace = trace;
        Ok(Variant::Solved {
            result,
            surrogate,
            relaxed_bound: relaxed.surrogate(),
        })
    })
}

/// `sum_m sum_k beta_k - beta_k^2` with `beta_t = 1 - beta_r`.
pub fn binary_violation(beta_r: &[f64]) -> f64 {
    beta_r.iter().map(|b| 2.0 * (b - b * b)).sum()
}

/// Mode selection via the growing linearized penalty, over the same
/// objective variants as [`solve_es`].
pub fn solve_ms<R: Rng + ?Sized>(
    channels: &ChannelSet,
    scenario: &Scenario,
    settings: &OptimizerSettings,
    rng: &mut R,
) -> Result<OptResult> {
    let m = channels.num_elements();
    let lifted = build_lifted(channels, scenario.transmit_power);
    let init = DinkelbachState::initial(&lifted, scenario.noise_power);
    // the relaxation proper: binary shares relaxed to [0, 1], no penalty
    let mut trace = Vec::new();
    let Some(relaxed) = joint_dinkelbach(&lifted, scenario, settings, init, BOTH_ACTIVE, None, &mut trace)? else {
        return Ok(OptResult::infeasible(channels, scenario, trace));
    };
    best_variant(channels, scenario, Some(relaxed.surrogate()), rng, |active, rng| {
        let mut state = init;
        let mut trace = Vec::new();
        let mut points = vec![0.5; m];
        let mut eta = settings.eta0;
        let mut last: Option<JointRelaxation> = None;
        let mut rounds = 0;
        let mut binary = false;
        let mut inner_converged = true;
        for d in 1..=settings.max_penalty_outer {
            let penalty = Penalty { points: &points, eta };
            let Some(relaxed) = joint_dinkelbach(&lifted, scenario, settings, state, active, Some(penalty), &mut trace)?
            else {
                break;
            };
            rounds = d;
            inner_converged &= relaxed.converged;
            state = relaxed.state;
            let moved = points.iter().zip(&relaxed.beta_r).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            points.clone_from(&relaxed.beta_r);
            eta *= settings.omega;
            let violation = binary_violation(&relaxed.beta_r);
            last = Some(relaxed);
            log::debug!("penalty round {d}: violation {violation:e}");
            if violation <= settings.eps2 {
                binary = true;
                break;
            }
            if d > 1 && moved <= MS_STALL_TOL {
                log::debug!("penalty stalled at violation {violation:e}");
                break;
            }
        }
        let Some(relaxed) = last else {
            return Ok(Variant::Infeasible(trace));
        };
        let reflect: Vec<bool> = relaxed.beta_r.iter().map(|&b| b >= 0.5).collect();
        let beta_r: Vec<f64> = reflect.iter().map(|&r| if r { 1.0 } else { 0.0 }).collect();
        let (mut result, surrogate) = finish_joint(
            channels,
            scenario,
            settings,
            &lifted,
            &relaxed,
            &beta_r,
            |phi_r, phi_t| TarcConfig::mode_selection(&reflect, phi_r, phi_t),
            rng,
        )?;
        result.converged = binary && inner_converged;
        result.iterations_ic = trace.len();
        result.iterations_id = rounds;
        result.gamma_trace = trace;
        Ok(Variant::Solved {
            result,
            surrogate,
            relaxed_bound: relaxed.surrogate(),
        })
    })
}
