//! Exhaustive grid search over configurations, for verification on tiny
//! surfaces.
//!
//! Phases take `phase_points` uniformly spaced values in `[0, 2pi)`. Shares
//! take `beta_points` uniformly spaced values in `[0, 1]` for ES and `{0, 1}`
//! for MS; TS reuses `beta_points` as the number of time-share grid values.
//! Once the shares are fixed the two sides decouple, so each side's phases
//! are searched on their own.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::{energy_requirement, ENERGY_TOL};
use crate::error::{Error, Result};
use crate::model::{clamped_rate, effective_gain, secrecy_rate, PerformanceMetrics, TarcConfig};
use crate::scenario::{ChannelSet, Protocol, Scenario, Side};

/// Largest surface the oracle accepts.
pub const MAX_ORACLE_ELEMENTS: usize = 3;

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Best energy-feasible configuration by secrecy rate (zero
    /// configuration when nothing is feasible).
    pub config: TarcConfig,
    pub metrics: PerformanceMetrics,
    pub feasible: bool,
    /// Largest sum of side ratios over energy-feasible grid points
    /// (time-share weighted for TS); `-inf` when nothing is feasible.
    pub best_surrogate: f64,
    /// Number of per-side configurations evaluated.
    pub evaluations: usize,
}

/// Best phases on one side for fixed shares.
#[derive(Debug, Clone)]
struct SideBest {
    rate: f64,
    phases: Vec<f64>,
    ratio: f64,
}

fn grid(points: usize, upper: f64, closed: bool) -> Vec<f64> {
    let denom = if closed { (points - 1).max(1) } else { points } as f64;
    (0..points).map(|i| upper * i as f64 / denom).collect()
}

/// Calls `f` with every vector of `len` entries drawn from `values`.
fn for_each_tuple(values: &[f64], len: usize, mut f: impl FnMut(&[f64])) {
    let mut idx = vec![0usize; len];
    let mut cur: Vec<f64> = vec![values[0]; len];
    loop {
        f(&cur);
        let mut pos = 0;
        loop {
            if pos == len {
                return;
            }
            idx[pos] += 1;
            if idx[pos] < values.len() {
                cur[pos] = values[idx[pos]];
                break;
            }
            idx[pos] = 0;
            cur[pos] = values[0];
            pos += 1;
        }
    }
}

fn search_side(
    channels: &ChannelSet,
    scenario: &Scenario,
    side: Side,
    shares: &[f64],
    phases: &[f64],
    evaluations: &mut usize,
) -> Option<SideBest> {
    let (h, f) = channels.bob(side);
    let (v, g) = channels.eve(side);
    let p_s = scenario.transmit_power;
    let sigma2 = scenario.noise_power;
    let need = energy_requirement(scenario, side);
    let mut best: Option<SideBest> = None;
    let mut best_ratio = f64::NEG_INFINITY;
    for_each_tuple(phases, shares.len(), |phi| {
        *evaluations += 1;
        let diag: Vec<Complex64> = shares.iter().zip(phi).map(|(&b, &p)| Complex64::from_polar(b.sqrt(), p)).collect();
        let bob = effective_gain(h, &diag, &channels.h_as, f).expect("matching dimensions").norm_sqr() * p_s;
        let eve = effective_gain(v, &diag, &channels.h_as, g).expect("matching dimensions").norm_sqr() * p_s;
        if eve < need - ENERGY_TOL {
            return;
        }
        let ratio = (sigma2 + bob) / (sigma2 + eve);
        best_ratio = best_ratio.max(ratio);
        let rate = clamped_rate(bob / sigma2, eve / sigma2);
        if best.as_ref().is_none_or(|b| rate > b.rate) {
            best = Some(SideBest {
                rate,
                phases: phi.to_vec(),
                ratio,
            });
        }
    });
    best.map(|b| SideBest { ratio: best_ratio, ..b })
}

/// Exhaustive search for the protocol in `scenario`.
pub fn brute_force_oracle(
    channels: &ChannelSet,
    scenario: &Scenario,
    phase_points: usize,
    beta_points: usize,
) -> Result<OracleResult> {
    let m = channels.num_elements();
    if m > MAX_ORACLE_ELEMENTS {
        return Err(Error::OracleTooLarge {
            max: MAX_ORACLE_ELEMENTS,
            got: m,
        });
    }
    if phase_points == 0 || beta_points < 2 {
        return Err(Error::Config("oracle needs phase_points >= 1 and beta_points >= 2".into()));
    }
    let phases = grid(phase_points, TAU, false);
    let mut evaluations = 0;
    let sigma2 = scenario.noise_power;
    let p_s = scenario.transmit_power;

    let share_sets: Vec<Vec<f64>> = match scenario.protocol {
        Protocol::Es => {
            let mut sets = Vec::new();
            for_each_tuple(&grid(beta_points, 1.0, true), m, |b| sets.push(b.to_vec()));
            sets
        }
        Protocol::Ms => {
            let mut sets = Vec::new();
            for_each_tuple(&[0.0, 1.0], m, |b| sets.push(b.to_vec()));
            sets
        }
        _ => vec![vec![1.0; m]],
    };

    let mut best: Option<(f64, TarcConfig)> = None;
    let mut best_surrogate = f64::NEG_INFINITY;
    let mut consider = |rate: f64, surrogate: f64, config: TarcConfig| {
        best_surrogate = best_surrogate.max(surrogate);
        if best.as_ref().is_none_or(|(r, _)| rate > *r) {
            best = Some((rate, config));
        }
    };

    match scenario.protocol {
        Protocol::Es | Protocol::Ms => {
            for beta_r in &share_sets {
                let beta_t: Vec<f64> = beta_r.iter().map(|b| 1.0 - b).collect();
                let r = search_side(channels, scenario, Side::Reflect, beta_r, &phases, &mut evaluations);
                let t = search_side(channels, scenario, Side::Transmit, &beta_t, &phases, &mut evaluations);
                if let (Some(r), Some(t)) = (r, t) {
                    let mut config = TarcConfig::energy_splitting(beta_r.clone(), r.phases, t.phases);
                    config.protocol = scenario.protocol;
                    consider(r.rate + t.rate, r.ratio + t.ratio, config);
                }
            }
        }
        Protocol::Ts => {
            let ones = vec![1.0; m];
            let r = search_side(channels, scenario, Side::Reflect, &ones, &phases, &mut evaluations);
            let t = search_side(channels, scenario, Side::Transmit, &ones, &phases, &mut evaluations);
            if let (Some(r), Some(t)) = (r, t) {
                for lambda_r in grid(beta_points, 1.0, true) {
                    let lambda_t = 1.0 - lambda_r;
                    consider(
                        lambda_r * r.rate + lambda_t * t.rate,
                        lambda_r * r.ratio + lambda_t * t.ratio,
                        TarcConfig::time_switching(r.phases.clone(), t.phases.clone(), lambda_r),
                    );
                }
            }
        }
        Protocol::Ris => {
            let r = search_side(channels, scenario, Side::Reflect, &vec![1.0; m], &phases, &mut evaluations);
            let t = search_side(channels, scenario, Side::Transmit, &vec![0.0; m], &[0.0], &mut evaluations);
            if let (Some(r), Some(t)) = (r, t) {
                consider(r.rate + t.rate, r.ratio + t.ratio, TarcConfig::reflect_only(r.phases));
            }
        }
        Protocol::NoSurface => {
            let zeros = vec![0.0; m];
            let r = search_side(channels, scenario, Side::Reflect, &zeros, &[0.0], &mut evaluations);
            let t = search_side(channels, scenario, Side::Transmit, &zeros, &[0.0], &mut evaluations);
            if let (Some(r), Some(t)) = (r, t) {
                consider(r.rate + t.rate, r.ratio + t.ratio, TarcConfig::zero(m));
            }
        }
    }

    let feasible = best.is_some();
    let config = best.map_or_else(|| TarcConfig::zero(m), |(_, c)| c);
    let metrics = secrecy_rate(channels, &config, p_s, sigma2);
    Ok(OracleResult {
        config,
        metrics,
        feasible,
        best_surrogate,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate_channels;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tuple_enumeration_visits_everything_once() {
        let mut seen = Vec::new();
        for_each_tuple(&[0.0, 1.0, 2.0], 2, |t| seen.push((t[0] as usize, t[1] as usize)));
        assert_eq!(seen.len(), 9);
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 9);
    }

    #[test]
    fn single_element_es_count() {
        let s = Scenario::default().with_elements(1).with_energy(0.0);
        let ch = generate_channels(&s, &mut s.trial_rng(0)).unwrap();
        let r = brute_force_oracle(&ch, &s, 16, 11).unwrap();
        // 11 shares x 2 sides x 16 phases
        assert_eq!(r.evaluations, 352);
        assert!(r.evaluations <= 16 * 16 * 11);
        assert!(r.feasible);
    }

    #[test]
    fn too_many_elements_rejected() {
        let s = Scenario::default().with_elements(4);
        let ch = ChannelSet::zeros(4);
        assert!(matches!(
            brute_force_oracle(&ch, &s, 4, 2),
            Err(Error::OracleTooLarge { max: 3, got: 4 })
        ));
    }

    #[test]
    fn aligns_surface_path_with_direct_path() {
        // Eve silent, no energy requirement: the best reflect phase makes
        // conj(h) e^{j phi} H point along f.
        let mut ch = ChannelSet::zeros(1);
        ch.h_as = vec![Complex64::from_polar(1.0, 0.3)];
        ch.h_r = vec![Complex64::from_polar(1.0, 1.1)];
        ch.f_r = Complex64::from_polar(1.0, 2.0);
        ch.h_t = vec![c(1.0, 0.0)];
        ch.f_t = c(1.0, 0.0);
        let s = Scenario::default().with_elements(1).with_energy(0.0).with_protocol(Protocol::Ts);
        let r = brute_force_oracle(&ch, &s, 64, 2).unwrap();
        let want = (2.0f64 - (0.3 - 1.1)).rem_euclid(TAU);
        let d = (r.config.phi_r[0] - want).rem_euclid(TAU);
        assert!(d.min(TAU - d) <= TAU / 64.0 / 2.0 + 1e-12, "{} vs {}", r.config.phi_r[0], want);
    }

    #[test]
    fn infeasible_when_energy_unreachable() {
        let s = Scenario::default().with_elements(2).with_energy(100.0);
        let ch = generate_channels(&s, &mut s.trial_rng(1)).unwrap();
        let r = brute_force_oracle(&ch, &s, 4, 3).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.best_surrogate, f64::NEG_INFINITY);
    }
}
