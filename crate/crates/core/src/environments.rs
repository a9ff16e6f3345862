//! Ground-truth worlds: cell-level fraud probabilities, context weights,
//! issuer routing, and the hard families used to make learning
//! information-limited.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{PolicyClass, PolicyTable};
use crate::model::{
    expected_loss, loss_given_label, maturity_prob, ActionKind, CorruptionChannel, DelayModel,
    IssuerProfile, LossSpec,
};

const WEIGHT_TOLERANCE: f64 = 1e-9;
/// Slack applied to per-cell margins so the family gap survives rounding.
const MARGIN_SLACK: f64 = 1e-9;
const MAX_HARD_CELLS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub num_cells: usize,
    /// P(fraud | cell).
    pub fraud_prob: Vec<f64>,
    pub cell_weights: Vec<f64>,
    /// Index into `network` for each cell.
    pub issuer_of_cell: Vec<usize>,
    pub losses: LossSpec,
    pub network: Vec<IssuerProfile>,
}

impl EnvironmentSpec {
    /// Uniform context weights, default losses, one issuer with full share.
    pub fn homogeneous(fraud_prob: Vec<f64>, issuer: IssuerProfile) -> Result<Self> {
        let n = fraud_prob.len();
        if n == 0 {
            return Err(Error::Construction("environment needs at least one cell".into()));
        }
        let env = EnvironmentSpec {
            num_cells: n,
            fraud_prob,
            cell_weights: vec![1.0 / n as f64; n],
            issuer_of_cell: vec![0; n],
            losses: LossSpec::defaults(n),
            network: vec![IssuerProfile {
                issuer_id: 0,
                volume_share: 1.0,
                ..issuer
            }],
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_cells;
        if n == 0 {
            return Err(Error::config("environment needs at least one cell"));
        }
        if self.fraud_prob.len() != n || self.cell_weights.len() != n || self.issuer_of_cell.len() != n {
            return Err(Error::config("per-cell vectors must have num_cells entries"));
        }
        if self.losses.num_cells() != n {
            return Err(Error::config("loss spec must have num_cells entries"));
        }
        self.losses.validate()?;
        if self.fraud_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config("fraud probabilities must lie in [0, 1]"));
        }
        if self.cell_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::config("cell weights must be nonnegative"));
        }
        let total: f64 = self.cell_weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::config(format!("cell weights must sum to 1, got {total}")));
        }
        if let Some(bad) = self.issuer_of_cell.iter().find(|&&i| i >= self.network.len()) {
            return Err(Error::config(format!("cell references missing issuer {bad}")));
        }
        for issuer in &self.network {
            issuer.validate()?;
        }
        Ok(())
    }

    pub fn issuer(&self, cell: usize) -> &IssuerProfile {
        &self.network[self.issuer_of_cell[cell]]
    }

    /// Share-weighted censorship probability.
    pub fn mean_gamma(&self) -> f64 {
        self.weighted(|c| self.issuer(c).gamma)
    }

    /// Share-weighted corruption rates `(eps10, eps01)`.
    pub fn mean_corruption(&self) -> (f64, f64) {
        (
            self.weighted(|c| self.issuer(c).channel.eps10),
            self.weighted(|c| self.issuer(c).channel.eps01),
        )
    }

    /// Share-weighted expected lag.
    pub fn mean_delay(&self) -> f64 {
        self.weighted(|c| self.issuer(c).delay.mean())
    }

    /// Average over rounds 1..=horizon and cells of P(lag <= horizon - t).
    pub fn mean_maturity(&self, horizon: u64) -> f64 {
        if horizon == 0 {
            return 1.0;
        }
        self.weighted(|c| {
            let delay = &self.issuer(c).delay;
            let sum: f64 = (1..=horizon).map(|t| maturity_prob(delay, horizon - t)).sum();
            sum / horizon as f64
        })
    }

    fn weighted(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.num_cells).map(|c| self.cell_weights[c] * f(c)).sum()
    }
}

/// `N` environments sharing a context distribution, environment `j` making
/// policy `favored_policy[j]` of `class` optimal by at least `gap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingFamily {
    pub environments: Vec<EnvironmentSpec>,
    pub favored_policy: Vec<usize>,
    pub gap: f64,
    pub class: PolicyClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastSlowPartition {
    pub fast_cells: Vec<usize>,
    pub slow_cells: Vec<usize>,
    pub m_fast: f64,
    pub m_slow: f64,
    /// Observation window at which the maturity probabilities hold.
    pub window: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transaction {
    pub cell: usize,
    pub issuer: usize,
    pub latent: bool,
}

pub fn build_packing_family(num_policies: usize, gap: f64, base: &EnvironmentSpec) -> Result<PackingFamily> {
    let all: Vec<usize> = (0..base.num_cells).collect();
    build_packing_family_on(num_policies, gap, base, &all)
}

/// Packing family whose policies differ only on `hard_cells`. Every policy
/// approves or declines on a hard cell; elsewhere all policies share the
/// base-optimal action and fraud probabilities stay at the template's.
pub fn build_packing_family_on(
    num_policies: usize,
    gap: f64,
    base: &EnvironmentSpec,
    hard_cells: &[usize],
) -> Result<PackingFamily> {
    base.validate()?;
    if num_policies == 0 {
        return Err(Error::Construction("packing family needs at least one policy".into()));
    }
    if !(gap > 0.0) {
        return Err(Error::Construction(format!("gap must be positive, got {gap}")));
    }
    let hard: BTreeSet<usize> = hard_cells.iter().copied().collect();
    if hard.is_empty() || hard.len() != hard_cells.len() {
        return Err(Error::Construction("hard cells must be non-empty and distinct".into()));
    }
    if hard.iter().any(|&c| c >= base.num_cells) {
        return Err(Error::Construction("hard cell out of range".into()));
    }
    if hard.len() > MAX_HARD_CELLS {
        return Err(Error::Construction(format!(
            "at most {MAX_HARD_CELLS} discriminating cells are supported"
        )));
    }
    let hard: Vec<usize> = hard.into_iter().collect();
    if num_policies as u64 > 1u64 << hard.len() {
        return Err(Error::Construction(format!(
            "{num_policies} policies exceed the 2^{} approve/decline tables on the hard cells",
            hard.len()
        )));
    }

    let (codes, distance) = binary_code(hard.len(), num_policies);

    let shared: Vec<ActionKind> = (0..base.num_cells)
        .map(|c| best_action(c, base.fraud_prob[c], &base.losses))
        .collect();
    let policies: Vec<PolicyTable> = codes
        .iter()
        .map(|&code| {
            let mut actions = shared.clone();
            for (bit, &cell) in hard.iter().enumerate() {
                actions[cell] = if code >> bit & 1 == 1 {
                    ActionKind::Decline
                } else {
                    ActionKind::Approve
                };
            }
            PolicyTable::new(actions)
        })
        .collect();
    let class = PolicyClass::new(policies)?;

    let mut environments = Vec::with_capacity(num_policies);
    for j in 0..num_policies {
        let mut env = base.clone();
        for &cell in &hard {
            let w = base.cell_weights[cell];
            if !(w > 0.0) {
                return Err(Error::Construction(format!("hard cell {cell} has zero weight")));
            }
            let margin = gap / (w * distance as f64) * (1.0 + MARGIN_SLACK);
            let action = class.get(j).action_of_cell[cell];
            let (lo, hi) = feasible_interval(cell, action, margin, &base.losses).ok_or_else(|| {
                Error::Construction(format!(
                    "gap {gap} infeasible: no fraud probability makes {} better by {margin:.4} in cell {cell}",
                    action.name()
                ))
            })?;
            env.fraud_prob[cell] = base.fraud_prob[cell].clamp(lo, hi);
        }
        environments.push(env);
    }

    let family = PackingFamily {
        environments,
        favored_policy: (0..num_policies).collect(),
        gap,
        class,
    };
    verify_packing(&family)?;
    Ok(family)
}

/// Largest-distance greedy lexicographic binary code with at least `count`
/// words; returns the first `count` words and the code distance.
fn binary_code(bits: usize, count: usize) -> (Vec<u64>, usize) {
    for distance in (1..=bits).rev() {
        let mut words: Vec<u64> = Vec::new();
        for w in 0..(1u64 << bits) {
            if words.iter().all(|&v| (v ^ w).count_ones() as usize >= distance) {
                words.push(w);
                if words.len() == count {
                    return (words, distance);
                }
            }
        }
    }
    unreachable!("distance 1 admits every word")
}

fn best_action(cell: usize, p: f64, losses: &LossSpec) -> ActionKind {
    let mut best = ActionKind::Approve;
    let mut best_loss = f64::INFINITY;
    for a in ActionKind::ALL {
        let l = loss_given_label(cell, a, p, losses);
        if l < best_loss {
            best = a;
            best_loss = l;
        }
    }
    best
}

/// Fraud probabilities in [0, 1] at which `action` beats both alternatives
/// in `cell` by at least `margin`.
fn feasible_interval(cell: usize, action: ActionKind, margin: f64, losses: &LossSpec) -> Option<(f64, f64)> {
    // every loss is affine in p: l(p) = l(0) + (l(1) - l(0)) p
    let affine = |a: ActionKind| {
        let at0 = loss_given_label(cell, a, 0.0, losses);
        let at1 = loss_given_label(cell, a, 1.0, losses);
        (at0, at1 - at0)
    };
    let (a0, a1) = affine(action);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for other in ActionKind::ALL.into_iter().filter(|&b| b != action) {
        let (b0, b1) = affine(other);
        // (a0 - b0) + (a1 - b1) p + margin <= 0
        let c0 = a0 - b0 + margin;
        let c1 = a1 - b1;
        if c1.abs() < 1e-15 {
            if c0 > 0.0 {
                return None;
            }
        } else if c1 > 0.0 {
            hi = hi.min(-c0 / c1);
        } else {
            lo = lo.max(-c0 / c1);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

fn verify_packing(family: &PackingFamily) -> Result<()> {
    for (j, env) in family.environments.iter().enumerate() {
        let losses: Vec<f64> = family
            .class
            .policies()
            .iter()
            .map(|p| analytic_policy_loss(env, p))
            .collect::<Result<_>>()?;
        let favored = family.favored_policy[j];
        for (k, &l) in losses.iter().enumerate() {
            if k != favored && losses[favored] + family.gap > l + 1e-12 {
                return Err(Error::Construction(format!(
                    "environment {j}: policy {k} within the gap of the favored policy"
                )));
            }
        }
    }
    Ok(())
}

/// Environment with `cells_per_issuer` cells per issuer, cell weights
/// realizing the issuers' volume shares.
pub fn build_hetero_network(
    profiles: &[IssuerProfile],
    cells_per_issuer: usize,
    fraud_prob: f64,
) -> Result<EnvironmentSpec> {
    if profiles.is_empty() {
        return Err(Error::Construction("issuer network must not be empty".into()));
    }
    if cells_per_issuer == 0 {
        return Err(Error::Construction("cells_per_issuer must be at least 1".into()));
    }
    let total: f64 = profiles.iter().map(|p| p.volume_share).sum();
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::config(format!("volume shares must sum to 1, got {total}")));
    }
    let num_cells = profiles.len() * cells_per_issuer;
    let mut cell_weights = Vec::with_capacity(num_cells);
    let mut issuer_of_cell = Vec::with_capacity(num_cells);
    for (i, p) in profiles.iter().enumerate() {
        for _ in 0..cells_per_issuer {
            cell_weights.push(p.volume_share / cells_per_issuer as f64);
            issuer_of_cell.push(i);
        }
    }
    let network = profiles
        .iter()
        .enumerate()
        .map(|(i, p)| IssuerProfile { issuer_id: i, ..p.clone() })
        .collect();
    let env = EnvironmentSpec {
        num_cells,
        fraud_prob: vec![fraud_prob; num_cells],
        cell_weights,
        issuer_of_cell,
        losses: LossSpec::defaults(num_cells),
        network,
    };
    env.validate()?;
    Ok(env)
}

/// Packing family over a fast/slow maturity split. Fast cells route through
/// an issuer maturing with probability `m_fast` within the window, slow cells
/// through one maturing with `m_slow`; both inherit censorship and corruption
/// from the template's first issuer. The discriminating cells are the first
/// `round(hard_mass * |slow|)` slow cells plus the first
/// `round((1 - hard_mass) * |fast|)` fast cells.
pub fn build_fast_slow(
    partition: &FastSlowPartition,
    hard_mass: f64,
    base: &EnvironmentSpec,
    num_policies: usize,
    gap: f64,
) -> Result<PackingFamily> {
    if !(0.0..=1.0).contains(&hard_mass) {
        return Err(Error::Construction(format!("hard_mass must lie in [0, 1], got {hard_mass}")));
    }
    let fast: BTreeSet<usize> = partition.fast_cells.iter().copied().collect();
    let slow: BTreeSet<usize> = partition.slow_cells.iter().copied().collect();
    let n = base.num_cells;
    if fast.len() != partition.fast_cells.len()
        || slow.len() != partition.slow_cells.len()
        || !fast.is_disjoint(&slow)
        || fast.len() + slow.len() != n
        || fast.iter().chain(&slow).any(|&c| c >= n)
    {
        return Err(Error::Construction(
            "fast and slow cells must be disjoint and cover every base cell".into(),
        ));
    }
    if !(partition.m_fast >= partition.m_slow) {
        return Err(Error::Construction("m_fast must not be below m_slow".into()));
    }
    let template = base
        .network
        .first()
        .ok_or_else(|| Error::Construction("base environment has no issuer".into()))?;

    let mut env = base.clone();
    let share = |cells: &BTreeSet<usize>| cells.iter().map(|&c| base.cell_weights[c]).sum::<f64>();
    let issuer = |id: usize, m: f64, volume_share: f64| -> Result<IssuerProfile> {
        Ok(IssuerProfile {
            issuer_id: id,
            gamma: template.gamma,
            channel: template.channel,
            delay: DelayModel::with_maturity_at(partition.window, m)?,
            volume_share,
        })
    };
    env.network = vec![
        issuer(0, partition.m_fast, share(&fast))?,
        issuer(1, partition.m_slow, share(&slow))?,
    ];
    for c in 0..n {
        env.issuer_of_cell[c] = usize::from(slow.contains(&c));
    }

    let take_slow = (hard_mass * slow.len() as f64).round() as usize;
    let take_fast = ((1.0 - hard_mass) * fast.len() as f64).round() as usize;
    let hard: Vec<usize> = slow
        .iter()
        .take(take_slow)
        .chain(fast.iter().take(take_fast))
        .copied()
        .collect();
    if hard.is_empty() {
        return Err(Error::Construction("no discriminating cells selected".into()));
    }
    build_packing_family_on(num_policies, gap, &env, &hard)
}

pub fn draw_transaction<R: Rng + ?Sized>(env: &EnvironmentSpec, rng: &mut R) -> Transaction {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut cell = env.num_cells - 1;
    for (c, w) in env.cell_weights.iter().enumerate() {
        acc += w;
        if u < acc {
            cell = c;
            break;
        }
    }
    let latent = rng.gen::<f64>() < env.fraud_prob[cell];
    Transaction {
        cell,
        issuer: env.issuer_of_cell[cell],
        latent,
    }
}

/// Per-round expected loss of `policy` under the context distribution.
pub fn analytic_policy_loss(env: &EnvironmentSpec, policy: &PolicyTable) -> Result<f64> {
    if policy.num_cells() != env.num_cells {
        return Err(Error::domain(format!(
            "policy covers {} cells, environment has {}",
            policy.num_cells(),
            env.num_cells
        )));
    }
    (0..env.num_cells).try_fold(0.0, |acc, c| {
        let l = expected_loss(c, policy.action(c)?, env.fraud_prob[c], &env.losses)?;
        Ok(acc + env.cell_weights[c] * l)
    })
}

/// Issuer profile with the given impairments and a full volume share.
pub fn single_issuer(gamma: f64, channel: CorruptionChannel, delay: DelayModel) -> IssuerProfile {
    IssuerProfile {
        issuer_id: 0,
        gamma,
        channel,
        delay,
        volume_share: 1.0,
    }
}
