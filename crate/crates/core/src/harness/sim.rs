//! The round loop.

use serde::{Deserialize, Serialize};

use super::config::{Scenario, ScenarioConfig};
use crate::environments::{analytic_policy_loss, draw_transaction};
use crate::error::{Error, Result};
use crate::learners::{make_baseline, Learner};
use crate::model::{
    censor, corrupt_label, expected_loss, observation_gate, sample_delay, ActionKind, ObservationEvent,
};
use crate::rng::{run_key, Purpose, Streams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub round: u64,
    pub cumulative_regret: f64,
}

/// Empirical impairment rates of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedRates {
    pub gamma_hat: f64,
    pub delta_hat: f64,
    /// `None` when no label was eligible to mature.
    pub maturity_hat: Option<f64>,
    /// Sum of the delays of delivered labels.
    pub delay_hat: f64,
    pub q_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub horizon: u64,
    pub regret_trajectory: Vec<Checkpoint>,
    pub realized_rates: RealizedRates,
    pub final_weights: Vec<f64>,
    pub matured_count: u64,
    pub suppressed_count: u64,
    pub censored_count: u64,
    pub expired_count: u64,
    pub comparator: usize,
    pub comparator_loss: f64,
}

impl RunResult {
    pub fn final_regret(&self) -> f64 {
        self.regret_trajectory.last().map_or(0.0, |c| c.cumulative_regret)
    }
}

pub fn measure_realized_rates(result: &RunResult) -> RealizedRates {
    compute_rates(
        result.horizon,
        result.matured_count,
        result.suppressed_count,
        result.censored_count,
        result.expired_count,
        result.realized_rates.delay_hat,
    )
}

fn compute_rates(horizon: u64, matured: u64, suppressed: u64, censored: u64, expired: u64, delay: f64) -> RealizedRates {
    let t = horizon as f64;
    let eligible = matured + expired;
    RealizedRates {
        gamma_hat: censored as f64 / t,
        delta_hat: suppressed as f64 / t,
        maturity_hat: (eligible > 0).then(|| matured as f64 / eligible as f64),
        delay_hat: delay,
        q_hat: matured as f64 / t,
    }
}

pub fn run_simulation(config: &ScenarioConfig, seed: u64) -> Result<RunResult> {
    let scenario = config.scenario()?;
    let learner = make_baseline(config.learner.kind, &config.baseline_params(&scenario))?;
    simulate(config, &scenario, learner, seed)
}

/// Run a prepared learner through `scenario`.
pub fn simulate(config: &ScenarioConfig, scenario: &Scenario, mut learner: Learner, seed: u64) -> Result<RunResult> {
    let Scenario {
        env,
        class,
        comparator,
        comparator_loss,
    } = scenario;
    let best = class
        .policies()
        .iter()
        .map(|p| analytic_policy_loss(env, p))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if (analytic_policy_loss(env, class.get(*comparator))? - best).abs() > 1e-12 {
        return Err(Error::config("comparator is not the best policy in the class"));
    }

    // Per-cell expected losses for each action, and the comparator's.
    let table: Vec<[f64; 3]> = (0..env.num_cells)
        .map(|c| {
            let mut row = [0.0; 3];
            for a in ActionKind::ALL {
                row[a.index()] = expected_loss(c, a, env.fraud_prob[c], &env.losses)?;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let reference: Vec<f64> = (0..env.num_cells)
        .map(|c| table[c][class.get(*comparator).action_of_cell[c].index()])
        .collect();

    let horizon = config.horizon;
    let streams = Streams::new(run_key(config.master_seed, seed));
    let mut regret = 0.0;
    let mut trajectory = Vec::with_capacity((horizon / config.report_every + 1) as usize);
    let (mut matured, mut suppressed, mut censored, mut expired) = (0u64, 0u64, 0u64, 0u64);
    let mut delay_total = 0.0;

    let deliver = |learner: &mut Learner, round: u64, delay_total: &mut f64| -> Result<()> {
        for event in learner.state.pending.pop_matured(round) {
            *delay_total += (event.maturity_round - event.issued_round) as f64;
            let channel = env.issuer(event.context_cell).channel;
            learner.ingest(&event, &channel, class, &env.losses)?;
        }
        Ok(())
    };

    for t in 1..=horizon {
        deliver(&mut learner, t, &mut delay_total)?;

        let tx = draw_transaction(env, &mut streams.at(t, Purpose::Context));
        let probs = learner.action_probs(class, tx.cell);
        let (action, propensity) = learner.select(class, tx.cell, &mut streams.at(t, Purpose::Policy));
        learner.state.rounds_seen += 1;

        let mixture: f64 = probs.iter().zip(&table[tx.cell]).map(|(p, l)| p * l).sum();
        regret += mixture - reference[tx.cell];
        if t % config.report_every == 0 || t == horizon {
            trajectory.push(Checkpoint {
                round: t,
                cumulative_regret: regret,
            });
        }

        if !action.reveals_outcome() {
            suppressed += 1;
            continue;
        }
        let issuer = env.issuer(tx.cell);
        let is_censored = censor(issuer.gamma, &mut streams.at(t, Purpose::Censor));
        if is_censored {
            censored += 1;
            continue;
        }
        let delay = sample_delay(&issuer.delay, &mut streams.at(t, Purpose::Delay));
        if !observation_gate(action, is_censored, delay, horizon - t) {
            expired += 1;
            continue;
        }
        matured += 1;
        let label = corrupt_label(&issuer.channel, tx.latent, &mut streams.at(t, Purpose::Corrupt));
        learner.state.pending.push(ObservationEvent {
            issued_round: t,
            maturity_round: t + delay,
            context_cell: tx.cell,
            action_taken: action,
            corrupted_label: label,
            propensity,
            reveal_propensity: 1.0 - probs[ActionKind::Decline.index()],
        });
    }
    // Labels maturing at the horizon still count as delivered.
    deliver(&mut learner, horizon, &mut delay_total)?;
    assert!(learner.state.pending.is_empty(), "undelivered labels at the horizon");
    assert_eq!(
        matured + suppressed + censored + expired,
        horizon,
        "every round must end in exactly one gate outcome"
    );

    Ok(RunResult {
        seed,
        horizon,
        regret_trajectory: trajectory,
        realized_rates: compute_rates(horizon, matured, suppressed, censored, expired, delay_total),
        final_weights: learner.weights(),
        matured_count: matured,
        suppressed_count: suppressed,
        censored_count: censored,
        expired_count: expired,
        comparator: *comparator,
        comparator_loss: *comparator_loss,
    })
}
