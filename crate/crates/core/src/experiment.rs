//! Monte-Carlo trials.
//!
//! Trial `i` draws its channels and every randomization sample from
//! `scenario.trial_rng(i)`, so its outcome depends only on `(seed, i)` and
//! never on scheduling. Channels are drawn first, which makes the
//! realization for a given trial identical across protocols and energy
//! requirements.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::Result;
use crate::optimizer::{optimize, OptResult, OptimizerSettings};
use crate::scenario::{generate_channels, ChannelSet, Scenario};

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: u64,
    pub result: OptResult,
    pub wall_s: f64,
}

/// Channels of trial `trial`.
pub fn trial_channels(scenario: &Scenario, trial: u64) -> Result<ChannelSet> {
    generate_channels(scenario, &mut scenario.trial_rng(trial))
}

pub fn run_trial(scenario: &Scenario, settings: &OptimizerSettings, trial: u64) -> Result<TrialOutcome> {
    let start = Instant::now();
    let mut rng = scenario.trial_rng(trial);
    let channels = generate_channels(scenario, &mut rng)?;
    let result = optimize(&channels, scenario, settings, &mut rng)?;
    Ok(TrialOutcome {
        trial,
        result,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs trials `0..scenario.trials` on the current rayon pool; results come
/// back in trial order.
pub fn run_trials(scenario: &Scenario, settings: &OptimizerSettings) -> Vec<Result<TrialOutcome>> {
    (0..scenario.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(scenario, settings, i))
        .collect()
}

/// Mean secrecy rate over successful trials.
pub fn mean_rate(outcomes: &[TrialOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().map(|o| o.result.metrics.rate_sum).sum::<f64>() / outcomes.len() as f64
}
