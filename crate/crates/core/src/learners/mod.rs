//! Finite policy classes and online learners that only ever see impaired
//! observations.
//!
//! The main learner runs exponential weights over the policy class. Each
//! matured label is debiased through the inverse of its issuer's corruption
//! channel, turned into a loss estimate for every policy at the event's cell
//! (the latent outcome determines the loss of all three actions), and
//! importance-weighted by the probability that the learner's action at issue
//! time was outcome-revealing.

mod policy;

pub use policy::{enumerate_policy_class, sample_policy_class, PolicyClass, PolicyTable};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environments::{analytic_policy_loss, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::model::{
    debias_label, loss_given_label, ActionKind, CorruptionChannel, EventQueue, LossSpec,
    ObservationEvent, NUM_ACTIONS,
};

/// Bound on the per-event multiplicative-weights exponent.
pub const EXPONENT_CLIP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    ExpWeights,
    Greedy,
    UniformRandom,
    StaticOracle,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::ExpWeights => "exp-weights",
            LearnerKind::Greedy => "greedy",
            LearnerKind::UniformRandom => "uniform-random",
            LearnerKind::StaticOracle => "static-oracle",
        }
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp-weights" => Ok(LearnerKind::ExpWeights),
            "greedy" => Ok(LearnerKind::Greedy),
            "uniform-random" => Ok(LearnerKind::UniformRandom),
            "static-oracle" => Ok(LearnerKind::StaticOracle),
            other => Err(Error::config(format!("unknown learner kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnerState {
    pub log_weights: Vec<f64>,
    pub learning_rate: f64,
    pub exploration_rate: f64,
    pub pending: EventQueue,
    pub rounds_seen: u64,
    label_sum: Vec<f64>,
    label_count: Vec<u64>,
}

impl LearnerState {
    pub fn new(num_policies: usize, learning_rate: f64, exploration_rate: f64) -> Self {
        LearnerState {
            log_weights: vec![0.0; num_policies],
            learning_rate,
            exploration_rate,
            pending: EventQueue::new(),
            rounds_seen: 0,
            label_sum: Vec::new(),
            label_count: Vec::new(),
        }
    }

    /// Normalized policy weights.
    pub fn weights(&self) -> Vec<f64> {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = self.log_weights.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    /// Mean of the debiased labels ingested at `cell`, if any.
    pub fn implied_fraud_rate(&self, cell: usize) -> Option<f64> {
        match self.label_count.get(cell) {
            Some(&n) if n > 0 => Some(self.label_sum[cell] / n as f64),
            _ => None,
        }
    }

    pub fn labels_seen(&self, cell: usize) -> u64 {
        self.label_count.get(cell).copied().unwrap_or(0)
    }

    fn record_label(&mut self, cell: usize, estimate: f64) {
        if self.label_sum.len() <= cell {
            self.label_sum.resize(cell + 1, 0.0);
            self.label_count.resize(cell + 1, 0);
        }
        self.label_sum[cell] += estimate;
        self.label_count[cell] += 1;
    }
}

/// Default step size: sqrt(ln N / (K T)).
pub fn default_learning_rate(num_policies: usize, horizon: u64) -> f64 {
    ((num_policies as f64).ln() / (NUM_ACTIONS as f64 * horizon.max(1) as f64)).sqrt()
}

/// Apply decline-to-approve exploration to a base action distribution.
fn with_override(mut probs: [f64; NUM_ACTIONS], xi: f64) -> [f64; NUM_ACTIONS] {
    let moved = xi * probs[ActionKind::Decline.index()];
    probs[ActionKind::Decline.index()] -= moved;
    probs[ActionKind::Approve.index()] += moved;
    probs
}

fn mixture_probs(weights: &[f64], class: &PolicyClass, cell: usize) -> [f64; NUM_ACTIONS] {
    let mut probs = [0.0; NUM_ACTIONS];
    for (w, a) in weights.iter().zip(class.actions_at(cell)) {
        probs[a.index()] += w;
    }
    probs
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

fn maybe_explore<R: Rng + ?Sized>(action: ActionKind, xi: f64, rng: &mut R) -> ActionKind {
    if action == ActionKind::Decline && xi > 0.0 && rng.gen::<f64>() < xi {
        ActionKind::Approve
    } else {
        action
    }
}

/// Exponential-weights draw at `cell`: sample a policy from the normalized
/// weights, take its action, then turn a decline into an approve with
/// probability `exploration_rate`. Returns the action and its exact marginal
/// probability under that whole procedure.
pub fn select_action<R: Rng + ?Sized>(
    state: &LearnerState,
    class: &PolicyClass,
    cell: usize,
    rng: &mut R,
) -> (ActionKind, f64) {
    let weights = state.weights();
    let probs = with_override(mixture_probs(&weights, class, cell), state.exploration_rate);
    let drawn = class.get(sample_index(&weights, rng)).action_of_cell[cell];
    let action = maybe_explore(drawn, state.exploration_rate, rng);
    (action, probs[action.index()])
}

/// Importance-weighted, debiased loss estimate of every policy for one event.
pub fn loss_estimates(
    event: &ObservationEvent,
    channel: &CorruptionChannel,
    class: &PolicyClass,
    losses: &LossSpec,
) -> Result<Vec<f64>> {
    if !(event.propensity > 0.0) || !(event.reveal_propensity > 0.0) {
        return Err(Error::Estimator(format!(
            "event issued at round {} has zero propensity",
            event.issued_round
        )));
    }
    let y = debias_label(channel, event.corrupted_label)?;
    let cell = event.context_cell;
    Ok(class
        .actions_at(cell)
        .map(|a| loss_given_label(cell, a, y, losses) / event.reveal_propensity)
        .collect())
}

/// Multiplicative-weights update from one matured event.
pub fn ingest_observation(
    state: &mut LearnerState,
    event: &ObservationEvent,
    channel: &CorruptionChannel,
    class: &PolicyClass,
    losses: &LossSpec,
) -> Result<()> {
    let estimates = loss_estimates(event, channel, class, losses)?;
    state.record_label(event.context_cell, debias_label(channel, event.corrupted_label)?);
    for (w, l) in state.log_weights.iter_mut().zip(estimates) {
        *w -= (state.learning_rate * l).clamp(-EXPONENT_CLIP, EXPONENT_CLIP);
    }
    let max = state.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for w in &mut state.log_weights {
        *w -= max;
    }
    Ok(())
}

/// Best policy in the class by analytic per-round loss; ties go to the
/// lowest index.
pub fn oracle_best_policy(env: &EnvironmentSpec, class: &PolicyClass) -> Result<(usize, f64)> {
    let mut best = (0, f64::INFINITY);
    for (i, p) in class.policies().iter().enumerate() {
        let l = analytic_policy_loss(env, p)?;
        if l < best.1 {
            best = (i, l);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    pub num_policies: usize,
    pub horizon: u64,
    pub learning_rate: Option<f64>,
    pub exploration: f64,
    /// Required for the static oracle.
    pub oracle_index: Option<usize>,
}

/// A learner state plus the behavior that drives it.
#[derive(Debug, Clone)]
pub struct Learner {
    pub kind: LearnerKind,
    pub state: LearnerState,
    oracle_index: usize,
}

pub fn make_baseline(kind: LearnerKind, params: &BaselineParams) -> Result<Learner> {
    if params.num_policies == 0 {
        return Err(Error::config("learner needs a non-empty policy class"));
    }
    if !(0.0..=1.0).contains(&params.exploration) {
        return Err(Error::config(format!(
            "exploration rate must lie in [0, 1], got {}",
            params.exploration
        )));
    }
    let learning_rate = match params.learning_rate {
        Some(lr) if lr > 0.0 && lr.is_finite() => lr,
        Some(lr) => return Err(Error::config(format!("learning rate must be positive, got {lr}"))),
        None => default_learning_rate(params.num_policies, params.horizon),
    };
    let oracle_index = match (kind, params.oracle_index) {
        (LearnerKind::StaticOracle, None) => {
            return Err(Error::config("static-oracle learner needs the oracle policy index"))
        }
        (_, Some(i)) if i >= params.num_policies => {
            return Err(Error::config(format!("oracle index {i} out of range")))
        }
        (_, i) => i.unwrap_or(0),
    };
    let exploration = if kind == LearnerKind::StaticOracle {
        0.0
    } else {
        params.exploration
    };
    Ok(Learner {
        kind,
        state: LearnerState::new(params.num_policies, learning_rate, exploration),
        oracle_index,
    })
}

impl Learner {
    fn deterministic_policy(&self) -> Option<usize> {
        match self.kind {
            LearnerKind::Greedy => Some(
                // lowest index among the maxima
                self.state
                    .log_weights
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &w)| if w > best.1 { (i, w) } else { best })
                    .0,
            ),
            LearnerKind::StaticOracle => Some(self.oracle_index),
            LearnerKind::ExpWeights | LearnerKind::UniformRandom => None,
        }
    }

    /// Exact action distribution the learner will use at `cell`.
    pub fn action_probs(&self, class: &PolicyClass, cell: usize) -> [f64; NUM_ACTIONS] {
        let base = match self.deterministic_policy() {
            Some(i) => {
                let mut p = [0.0; NUM_ACTIONS];
                p[class.get(i).action_of_cell[cell].index()] = 1.0;
                p
            }
            None => mixture_probs(&self.state.weights(), class, cell),
        };
        with_override(base, self.state.exploration_rate)
    }

    pub fn select<R: Rng + ?Sized>(&self, class: &PolicyClass, cell: usize, rng: &mut R) -> (ActionKind, f64) {
        match self.deterministic_policy() {
            Some(i) => {
                let drawn = class.get(i).action_of_cell[cell];
                let action = maybe_explore(drawn, self.state.exploration_rate, rng);
                (action, self.action_probs(class, cell)[action.index()])
            }
            None => select_action(&self.state, class, cell, rng),
        }
    }

    pub fn ingest(
        &mut self,
        event: &ObservationEvent,
        channel: &CorruptionChannel,
        class: &PolicyClass,
        losses: &LossSpec,
    ) -> Result<()> {
        match self.kind {
            LearnerKind::ExpWeights | LearnerKind::Greedy => {
                ingest_observation(&mut self.state, event, channel, class, losses)
            }
            LearnerKind::UniformRandom | LearnerKind::StaticOracle => Ok(()),
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        match self.deterministic_policy() {
            Some(i) if self.kind == LearnerKind::StaticOracle => {
                let mut w = vec![0.0; self.state.log_weights.len()];
                w[i] = 1.0;
                w
            }
            _ => self.state.weights(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::single_issuer;
    use crate::model::DelayModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn approve_decline() -> PolicyClass {
        PolicyClass::new(vec![
            PolicyTable::constant(1, ActionKind::Approve),
            PolicyTable::constant(1, ActionKind::Decline),
        ])
        .unwrap()
    }

    fn event(cell: usize, label: bool, action: ActionKind, propensity: f64, reveal: f64) -> ObservationEvent {
        ObservationEvent {
            issued_round: 1,
            maturity_round: 1,
            context_cell: cell,
            action_taken: action,
            corrupted_label: label,
            propensity,
            reveal_propensity: reveal,
        }
    }

    #[test]
    fn symmetric_mixture_propensity() {
        let class = approve_decline();
        let state = LearnerState::new(2, 0.1, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (_, p) = select_action(&state, &class, 0, &mut rng);
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn exploration_shifts_propensity() {
        let class = approve_decline();
        let state = LearnerState::new(2, 0.1, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut approvals = 0;
        for _ in 0..n {
            let (a, p) = select_action(&state, &class, 0, &mut rng);
            match a {
                ActionKind::Approve => {
                    approvals += 1;
                    assert!((p - 0.55).abs() < 1e-12);
                }
                ActionKind::Decline => assert!((p - 0.45).abs() < 1e-12),
                ActionKind::Challenge => unreachable!(),
            }
        }
        let f = approvals as f64 / n as f64;
        assert!((f - 0.55).abs() < 4.0 / (n as f64).sqrt(), "{f}");
    }

    #[test]
    fn degenerate_mixture_is_certain() {
        let class = enumerate_policy_class(2, 9).unwrap();
        let mut state = LearnerState::new(class.size(), 0.1, 0.0);
        for (i, w) in state.log_weights.iter_mut().enumerate() {
            if i != 1 {
                *w = f64::NEG_INFINITY;
            }
        }
        assert_eq!(class.get(1), &PolicyTable::constant(2, ActionKind::Challenge));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(select_action(&state, &class, 1, &mut rng), (ActionKind::Challenge, 1.0));
    }

    #[test]
    fn fraud_label_penalizes_approval() {
        let class = approve_decline();
        let mut state = LearnerState::new(2, 0.1, 0.0);
        let before = state.log_weights[0] - state.log_weights[1];
        ingest_observation(
            &mut state,
            &event(0, true, ActionKind::Approve, 0.5, 0.5),
            &CorruptionChannel::IDENTITY,
            &class,
            &LossSpec::defaults(1),
        )
        .unwrap();
        assert!(state.log_weights[0] - state.log_weights[1] < before);
    }

    #[test]
    fn zero_propensity_is_rejected() {
        let class = approve_decline();
        let mut state = LearnerState::new(2, 0.1, 0.0);
        let err = ingest_observation(
            &mut state,
            &event(0, true, ActionKind::Approve, 0.0, 0.0),
            &CorruptionChannel::IDENTITY,
            &class,
            &LossSpec::defaults(1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Estimator(_)));
    }

    #[test]
    fn no_events_leave_weights_unchanged() {
        let state = LearnerState::new(4, 0.1, 0.0);
        assert_eq!(state.weights(), vec![0.25; 4]);
        assert_eq!(state.implied_fraud_rate(0), None);
    }

    #[test]
    fn implied_fraud_rate_is_consistent() {
        let ch = CorruptionChannel::new(0.2, 0.1).unwrap();
        let class = approve_decline();
        let losses = LossSpec::defaults(1);
        let mut state = LearnerState::new(2, 0.001, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 10_000;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let latent = rng.gen::<f64>() < 0.3;
            let observed = crate::model::corrupt_label(&ch, latent, &mut rng);
            values.push(debias_label(&ch, observed).unwrap());
            ingest_observation(&mut state, &event(0, observed, ActionKind::Approve, 1.0, 1.0), &ch, &class, &losses)
                .unwrap();
        }
        let mean = state.implied_fraud_rate(0).unwrap();
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 0.3).abs() < 3.0 * se, "{mean} (se {se})");
    }

    /// Exhaustive expectation over (action, latent, corrupted label) on one cell.
    #[test]
    fn estimates_are_unbiased() {
        let class = enumerate_policy_class(1, 3).unwrap();
        let losses = LossSpec::uniform(1, 0.9, 0.3, 0.5);
        for &(p, xi) in &[(0.3, 0.0), (0.8, 0.05), (0.05, 0.5)] {
            for &(e10, e01) in &[(0.0, 0.0), (0.2, 0.1), (0.35, 0.25)] {
                let ch = CorruptionChannel::new(e10, e01).unwrap();
                let mut state = LearnerState::new(3, 0.1, xi);
                state.log_weights = vec![0.3, -0.2, 0.1];
                let learner = Learner { kind: LearnerKind::ExpWeights, state, oracle_index: 0 };
                let probs = learner.action_probs(&class, 0);
                let reveal = 1.0 - probs[ActionKind::Decline.index()];
                let mut expected = [0.0; 3];
                for a in ActionKind::ALL.into_iter().filter(|a| a.reveals_outcome()) {
                    for (latent, p_latent) in [(true, p), (false, 1.0 - p)] {
                        let p_one = if latent { 1.0 - e10 } else { e01 };
                        for (obs, p_obs) in [(true, p_one), (false, 1.0 - p_one)] {
                            let ev = event(0, obs, a, probs[a.index()], reveal);
                            let est = loss_estimates(&ev, &ch, &class, &losses).unwrap();
                            for k in 0..3 {
                                expected[k] += probs[a.index()] * p_latent * p_obs * est[k];
                            }
                        }
                    }
                }
                for k in 0..3 {
                    let truth = crate::model::expected_loss(0, class.get(k).action_of_cell[0], p, &losses).unwrap();
                    assert!((expected[k] - truth).abs() < 1e-12, "policy {k}: {} vs {truth}", expected[k]);
                }
            }
        }
    }

    #[test]
    fn log_weights_stay_finite() {
        let class = approve_decline();
        let losses = LossSpec::defaults(1);
        let ch = CorruptionChannel::new(0.3, 0.3).unwrap();
        let mut state = LearnerState::new(2, 0.5, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1_000_000 {
            let ev = event(0, rng.gen(), ActionKind::Approve, 0.5, 0.5);
            ingest_observation(&mut state, &ev, &ch, &class, &losses).unwrap();
        }
        assert!(state.log_weights.iter().all(|w| w.is_finite()));
        assert!((state.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_examples() {
        let class = enumerate_policy_class(2, 3).unwrap();
        let issuer = single_issuer(0.0, CorruptionChannel::IDENTITY, DelayModel::default());
        let fraud = EnvironmentSpec::homogeneous(vec![1.0, 1.0], issuer.clone()).unwrap();
        let (i, l) = oracle_best_policy(&fraud, &class).unwrap();
        assert_eq!(class.get(i), &PolicyTable::constant(2, ActionKind::Decline));
        assert_eq!(l, 0.0);
        let clean = EnvironmentSpec::homogeneous(vec![0.0, 0.0], issuer).unwrap();
        let (i, l) = oracle_best_policy(&clean, &class).unwrap();
        assert_eq!(class.get(i), &PolicyTable::constant(2, ActionKind::Approve));
        assert_eq!(l, 0.0);
    }

    #[test]
    fn oracle_finds_favored_packing_policy() {
        let base = EnvironmentSpec::homogeneous(
            vec![0.4; 4],
            single_issuer(0.0, CorruptionChannel::IDENTITY, DelayModel::default()),
        )
        .unwrap();
        let family = crate::environments::build_packing_family(8, 0.05, &base).unwrap();
        for (j, env) in family.environments.iter().enumerate() {
            assert_eq!(oracle_best_policy(env, &family.class).unwrap().0, j);
        }
    }

    fn params(n: usize) -> BaselineParams {
        BaselineParams {
            num_policies: n,
            horizon: 1000,
            learning_rate: None,
            exploration: 0.0,
            oracle_index: None,
        }
    }

    #[test]
    fn uniform_random_selects_every_policy_equally() {
        let learner = make_baseline(LearnerKind::UniformRandom, &params(9)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let weights = learner.weights();
        let n = 100_000;
        let mut counts = [0usize; 9];
        for _ in 0..n {
            counts[sample_index(&weights, &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 9.0).abs() < 0.01);
        }
    }

    #[test]
    fn greedy_starts_with_lowest_index() {
        let class = enumerate_policy_class(2, 9).unwrap();
        let learner = make_baseline(LearnerKind::Greedy, &params(9)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for cell in 0..2 {
            let (a, p) = learner.select(&class, cell, &mut rng);
            assert_eq!(a, class.get(0).action_of_cell[cell]);
            assert_eq!(p, 1.0);
        }
    }

    #[test]
    fn baseline_validation() {
        assert!(make_baseline(LearnerKind::StaticOracle, &params(3)).is_err());
        let mut p = params(3);
        p.exploration = 1.5;
        assert!(make_baseline(LearnerKind::ExpWeights, &p).is_err());
        let mut p = params(3);
        p.learning_rate = Some(-1.0);
        assert!(make_baseline(LearnerKind::ExpWeights, &p).is_err());
        assert!("nope".parse::<LearnerKind>().is_err());
        assert_eq!("static-oracle".parse::<LearnerKind>().unwrap(), LearnerKind::StaticOracle);
        let lr = make_baseline(LearnerKind::ExpWeights, &params(8)).unwrap().state.learning_rate;
        assert!((lr - (8f64.ln() / 3000.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reported_propensities_match_frequencies() {
        let class = enumerate_policy_class(3, 12).unwrap();
        let n = 100_000;
        for kind in [LearnerKind::ExpWeights, LearnerKind::Greedy, LearnerKind::UniformRandom] {
            let mut p = params(class.size());
            p.exploration = 0.2;
            let mut learner = make_baseline(kind, &p).unwrap();
            learner.state.log_weights = (0..class.size()).map(|i| -0.15 * i as f64).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(10);
            for cell in 0..3 {
                let probs = learner.action_probs(&class, cell);
                let mut counts = [0usize; 3];
                for _ in 0..n {
                    let (a, prop) = learner.select(&class, cell, &mut rng);
                    assert!((prop - probs[a.index()]).abs() < 1e-12);
                    counts[a.index()] += 1;
                }
                for a in 0..3 {
                    let f = counts[a] as f64 / n as f64;
                    assert!((f - probs[a]).abs() < 4.0 / (n as f64).sqrt(), "{kind:?} cell {cell}");
                }
            }
        }
    }
}
