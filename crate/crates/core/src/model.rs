//! Domain types for the authorization problem and the four feedback
//! impairments: delay, issuer censorship, label corruption and
//! counterfactual suppression of declined transactions.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of authorization actions.
pub const NUM_ACTIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Approve,
    Challenge,
    Decline,
}

impl ActionKind {
    pub const ALL: [ActionKind; NUM_ACTIONS] =
        [ActionKind::Approve, ActionKind::Challenge, ActionKind::Decline];

    pub fn index(self) -> usize {
        match self {
            ActionKind::Approve => 0,
            ActionKind::Challenge => 1,
            ActionKind::Decline => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Approve => "approve",
            ActionKind::Challenge => "challenge",
            ActionKind::Decline => "decline",
        }
    }

    /// Whether taking this action lets the transaction's outcome surface later.
    pub fn reveals_outcome(self) -> bool {
        self != ActionKind::Decline
    }
}

/// Per-cell loss components: missed fraud, challenge friction, false decline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub fn_loss: Vec<f64>,
    pub ch_loss: Vec<f64>,
    pub fp_loss: Vec<f64>,
}

impl LossSpec {
    pub const DEFAULT_FN: f64 = 1.0;
    pub const DEFAULT_CH: f64 = 0.2;
    pub const DEFAULT_FP: f64 = 0.4;

    pub fn uniform(num_cells: usize, fn_loss: f64, ch_loss: f64, fp_loss: f64) -> Self {
        LossSpec {
            fn_loss: vec![fn_loss; num_cells],
            ch_loss: vec![ch_loss; num_cells],
            fp_loss: vec![fp_loss; num_cells],
        }
    }

    pub fn defaults(num_cells: usize) -> Self {
        Self::uniform(num_cells, Self::DEFAULT_FN, Self::DEFAULT_CH, Self::DEFAULT_FP)
    }

    pub fn num_cells(&self) -> usize {
        self.fn_loss.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.fn_loss.len();
        if self.ch_loss.len() != n || self.fp_loss.len() != n {
            return Err(Error::config("loss components must have one entry per cell"));
        }
        let all = self.fn_loss.iter().chain(&self.ch_loss).chain(&self.fp_loss);
        if all.into_iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::config("loss components must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Class-conditional binary label noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel")]
pub struct CorruptionChannel {
    /// P(observed clean | fraud).
    pub eps10: f64,
    /// P(observed fraud | clean).
    pub eps01: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    eps10: f64,
    eps01: f64,
}

impl TryFrom<RawChannel> for CorruptionChannel {
    type Error = Error;

    fn try_from(raw: RawChannel) -> Result<Self> {
        CorruptionChannel::new(raw.eps10, raw.eps01)
    }
}

impl CorruptionChannel {
    pub const IDENTITY: CorruptionChannel = CorruptionChannel { eps10: 0.0, eps01: 0.0 };

    pub fn new(eps10: f64, eps01: f64) -> Result<Self> {
        if !(eps10 >= 0.0 && eps01 >= 0.0) {
            return Err(Error::config(format!(
                "corruption rates must be nonnegative, got ({eps10}, {eps01})"
            )));
        }
        if !(eps10 + eps01 < 1.0) {
            return Err(Error::config(format!(
                "corruption rates must sum below 1, got {}",
                eps10 + eps01
            )));
        }
        Ok(CorruptionChannel { eps10, eps01 })
    }

    /// Channel with total flip mass `eps_sum` split evenly between directions.
    pub fn symmetric(eps_sum: f64) -> Result<Self> {
        Self::new(eps_sum / 2.0, eps_sum / 2.0)
    }

    pub fn eps_sum(&self) -> f64 {
        self.eps10 + self.eps01
    }

    pub fn signal_strength(&self) -> f64 {
        signal_strength(self)
    }

    /// P(observed label = 1) when the latent label is Bernoulli(`p`).
    pub fn output_mean(&self, p: f64) -> f64 {
        self.eps01 + self.signal_strength() * p
    }
}

/// Finite label-arrival lag. Permanent non-arrival is censorship, never delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayModel {
    Constant { lag: u64 },
    /// Failures before the first success, support {0, 1, 2, ...}.
    Geometric { rate: f64 },
    /// `(lag, probability)` pairs summing to 1.
    Table { entries: Vec<(u64, f64)> },
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel::Constant { lag: 0 }
    }
}

impl DelayModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            DelayModel::Constant { .. } => Ok(()),
            DelayModel::Geometric { rate } => {
                if *rate > 0.0 && *rate <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!("geometric rate must lie in (0, 1], got {rate}")))
                }
            }
            DelayModel::Table { entries } => {
                if entries.is_empty() {
                    return Err(Error::config("delay table must not be empty"));
                }
                if entries.iter().any(|(_, p)| !(0.0..=1.0).contains(p)) {
                    return Err(Error::config("delay table probabilities must lie in [0, 1]"));
                }
                let total: f64 = entries.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::config(format!(
                        "delay table probabilities must sum to 1, got {total}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Expected lag.
    pub fn mean(&self) -> f64 {
        match self {
            DelayModel::Constant { lag } => *lag as f64,
            DelayModel::Geometric { rate } => (1.0 - rate) / rate,
            DelayModel::Table { entries } => entries.iter().map(|(l, p)| *l as f64 * p).sum(),
        }
    }

    /// Table model that matures within `window` with probability `m` and
    /// one round later otherwise.
    pub fn with_maturity_at(window: u64, m: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::config(format!("maturity must lie in [0, 1], got {m}")));
        }
        let model = DelayModel::Table {
            entries: vec![(0, m), (window + 1, 1.0 - m)],
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IssuerProfile {
    pub issuer_id: usize,
    /// Probability that a label is permanently unreported.
    pub gamma: f64,
    pub channel: CorruptionChannel,
    #[serde(default)]
    pub delay: DelayModel,
    pub volume_share: f64,
}

impl IssuerProfile {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!(
                "issuer {}: gamma must lie in [0, 1], got {}",
                self.issuer_id, self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.volume_share) {
            return Err(Error::config(format!(
                "issuer {}: volume share must lie in [0, 1]",
                self.issuer_id
            )));
        }
        self.delay.validate()
    }
}

/// A label travelling through the delay pipeline toward the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationEvent {
    pub issued_round: u64,
    pub maturity_round: u64,
    pub context_cell: usize,
    pub action_taken: ActionKind,
    pub corrupted_label: bool,
    /// Probability with which `action_taken` was chosen.
    pub propensity: f64,
    /// Probability that the chosen action was outcome-revealing (not a decline).
    pub reveal_propensity: f64,
}

/// Expected loss of `action` in `cell` over the latent outcome.
pub fn expected_loss(cell: usize, action: ActionKind, fraud_prob: f64, losses: &LossSpec) -> Result<f64> {
    if cell >= losses.num_cells() {
        return Err(Error::domain(format!(
            "cell {cell} out of range for {} cells",
            losses.num_cells()
        )));
    }
    if !(0.0..=1.0).contains(&fraud_prob) {
        return Err(Error::domain(format!("fraud probability {fraud_prob} outside [0, 1]")));
    }
    Ok(loss_given_label(cell, action, fraud_prob, losses))
}

/// Loss of `action` in `cell` when the fraud indicator equals `y`. Linear in
/// `y`, so it accepts expectations and debiased estimates as well as labels.
pub(crate) fn loss_given_label(cell: usize, action: ActionKind, y: f64, losses: &LossSpec) -> f64 {
    match action {
        ActionKind::Approve => y * losses.fn_loss[cell],
        ActionKind::Challenge => losses.ch_loss[cell],
        ActionKind::Decline => (1.0 - y) * losses.fp_loss[cell],
    }
}

pub fn corrupt_label<R: Rng + ?Sized>(channel: &CorruptionChannel, latent: bool, rng: &mut R) -> bool {
    let u: f64 = rng.gen();
    if latent {
        u >= channel.eps10
    } else {
        u < channel.eps01
    }
}

pub fn signal_strength(channel: &CorruptionChannel) -> f64 {
    1.0 - channel.eps10 - channel.eps01
}

/// Unbiased inverse of the corruption channel: E[debias(corrupt(y))] = y.
pub fn debias_label(channel: &CorruptionChannel, observed: bool) -> Result<f64> {
    let s = signal_strength(channel);
    if !(s > 0.0) {
        return Err(Error::degenerate("corruption channel has zero signal strength"));
    }
    let obs = if observed { 1.0 } else { 0.0 };
    Ok((obs - channel.eps01) / s)
}

pub fn sample_delay<R: Rng + ?Sized>(model: &DelayModel, rng: &mut R) -> u64 {
    match model {
        DelayModel::Constant { lag } => *lag,
        DelayModel::Geometric { rate } => {
            if *rate >= 1.0 {
                return 0;
            }
            // inverse CDF: P(lag >= k) = (1 - rate)^k
            let u: f64 = rng.gen();
            let k = ((1.0 - u).ln() / (1.0 - rate).ln()).floor();
            if k.is_finite() && k >= 0.0 {
                k as u64
            } else {
                0
            }
        }
        DelayModel::Table { entries } => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for &(lag, p) in entries {
                acc += p;
                if u < acc {
                    return lag;
                }
            }
            // rounding slack: fall back to the last lag with positive mass
            entries
                .iter()
                .rev()
                .find(|(_, p)| *p > 0.0)
                .map_or(entries[entries.len() - 1].0, |(lag, _)| *lag)
        }
    }
}

/// P(lag <= window).
pub fn maturity_prob(model: &DelayModel, window: u64) -> f64 {
    match model {
        DelayModel::Constant { lag } => {
            if *lag <= window {
                1.0
            } else {
                0.0
            }
        }
        DelayModel::Geometric { rate } => {
            let exponent = i32::try_from(window.saturating_add(1)).unwrap_or(i32::MAX);
            1.0 - (1.0 - rate).powi(exponent)
        }
        DelayModel::Table { entries } => {
            let m: f64 = entries.iter().filter(|(l, _)| *l <= window).map(|(_, p)| p).sum();
            m.min(1.0)
        }
    }
}

/// Returns true when the label is permanently censored.
pub fn censor<R: Rng + ?Sized>(gamma: f64, rng: &mut R) -> bool {
    let u: f64 = rng.gen();
    u < gamma
}

pub fn observation_gate(action: ActionKind, censored: bool, delay: u64, rounds_remaining: u64) -> bool {
    action.reveals_outcome() && !censored && delay <= rounds_remaining
}

#[derive(Debug, Clone)]
struct Pending(ObservationEvent);

impl Pending {
    fn key(&self) -> (u64, u64) {
        (self.0.maturity_round, self.0.issued_round)
    }
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Pending observations ordered by (maturity round, issued round).
#[derive(Debug, Clone, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Pending>>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: ObservationEvent) {
        assert!(
            event.maturity_round >= event.issued_round,
            "event matures before it was issued"
        );
        self.heap.push(Reverse(Pending(event)));
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Remove every event with `maturity_round <= round`, ordered by
    /// maturity round and then by issued round.
    pub fn pop_matured(&mut self, round: u64) -> Vec<ObservationEvent> {
        let mut out = Vec::new();
        while let Some(Reverse(top)) = self.heap.peek() {
            if top.0.maturity_round > round {
                break;
            }
            let Reverse(Pending(event)) = self.heap.pop().expect("peeked");
            assert!(event.maturity_round <= round, "premature delivery");
            out.push(event);
        }
        out
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn delay_model() -> impl Strategy<Value = DelayModel> {
        prop_oneof![
            (0u64..50).prop_map(|lag| DelayModel::Constant { lag }),
            (0.01f64..=1.0).prop_map(|rate| DelayModel::Geometric { rate }),
            prop::collection::vec((0u64..80, 0.01f64..1.0), 1..6).prop_map(|raw| {
                let total: f64 = raw.iter().map(|(_, w)| w).sum();
                DelayModel::Table {
                    entries: raw.into_iter().map(|(l, w)| (l, w / total)).collect(),
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn maturity_is_monotone(model in delay_model()) {
            let mut prev = 0.0;
            for w in 0..100u64 {
                let m = maturity_prob(&model, w);
                prop_assert!((0.0..=1.0).contains(&m));
                prop_assert!(m + 1e-15 >= prev);
                prev = m;
            }
        }

        #[test]
        fn expected_loss_is_bounded(
            fnl in 0.0f64..=1.0, ch in 0.0f64..=1.0, fp in 0.0f64..=1.0, p in 0.0f64..=1.0
        ) {
            let l = LossSpec::uniform(1, fnl, ch, fp);
            for a in ActionKind::ALL {
                let v = expected_loss(0, a, p, &l).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
