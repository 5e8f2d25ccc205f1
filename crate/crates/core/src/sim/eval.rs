//! Batch rollouts over randomized layouts.

use super::layout::{randomize_layout, TaskTemplate};
use super::scene::{SimConfig, SimEnvironment};
use super::SimError;
use crate::oog::Plan;
use crate::par::{map_range, Parallelism};
use crate::policy::{run_policy, Outcome, OutcomeClass, PolicyConfig, Trace, TraceRecord};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write;

pub const EVAL_FORMAT: &str = "oog-eval";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub trials: usize,
    pub seed: u64,
    /// Run trials concurrently.
    pub parallelism: Parallelism,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { trials: 20, seed: 0, parallelism: Parallelism::default() }
    }
}

/// Seed of trial `i`, independent of how many trials run and in what order.
pub fn trial_seed(base: u64, i: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(i as u64);
    rng.next_u64()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub outcome: Outcome,
    /// Why the episode stopped early, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Lay out a scene from `seed`, then run the policy in it to completion.
pub fn run_trial(
    plan: &Plan,
    template: &TaskTemplate,
    sim: &SimConfig,
    policy: &PolicyConfig,
    seed: u64,
) -> Result<Trace, SimError> {
    let scene = randomize_layout(template, seed)?;
    // observation noise must not share a stream with the layout
    let mut env = SimEnvironment::new(scene, template.goal.clone(), *sim, plan.epsilon_contact, seed ^ 0x5eed_0b5e);
    Ok(run_policy(plan, &mut env, policy)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub noise: f64,
    pub trials: Vec<TrialResult>,
    pub counts: BTreeMap<OutcomeClass, usize>,
    pub success_rate: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> Vec<u8> {
        crate::io::to_json(EVAL_FORMAT, self)
    }

    /// Outcome counts as an aligned text table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task {}  noise {:.4} m  trials {}", self.task, self.noise, self.trials.len());
        for class in [
            OutcomeClass::Success,
            OutcomeClass::MissedTracking,
            OutcomeClass::MissedGrasp,
            OutcomeClass::UnsatisfiedContact,
        ] {
            let n = self.counts.get(&class).copied().unwrap_or(0);
            let _ = writeln!(out, "  {:<20} {n:>5}", class.as_str());
        }
        let _ = writeln!(out, "  {:<20} {:>5.1}%", "success rate", 100.0 * self.success_rate);
        out
    }
}

/// Run `cfg.trials` independent episodes on layouts drawn from `template`.
pub fn evaluate(
    plan: &Plan,
    template: &TaskTemplate,
    sim: &SimConfig,
    policy: &PolicyConfig,
    cfg: &EvalConfig,
) -> Result<EvalReport, SimError> {
    template.validate()?;
    sim.validate()?;
    policy.validate()?;
    let results = map_range(cfg.parallelism, cfg.trials, |i| {
        let seed = trial_seed(cfg.seed, i);
        run_trial(plan, template, sim, policy, seed).map(|trace| TrialResult {
            trial: i,
            seed,
            outcome: trace.outcome,
            failure: trace.records.iter().rev().find_map(|r| match r {
                TraceRecord::Failure { reason } => Some(reason.clone()),
                _ => None,
            }),
        })
    });
    let trials = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut counts = BTreeMap::new();
    for t in &trials {
        *counts.entry(t.outcome.class).or_insert(0) += 1;
    }
    let successes = counts.get(&OutcomeClass::Success).copied().unwrap_or(0);
    let success_rate = if trials.is_empty() { 0.0 } else { successes as f64 / trials.len() as f64 };
    Ok(EvalReport { task: template.name.clone(), noise: sim.noise, trials, counts, success_rate })
}
