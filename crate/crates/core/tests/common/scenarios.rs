use ifl_core::harness::config::{
    EnvironmentConfig, IssuerImpairments, LearnerConfig, PolicyClassConfig, ScenarioConfig,
};
use ifl_core::learners::{LearnerKind, PolicyClass, PolicyTable};
use ifl_core::model::{ActionKind, CorruptionChannel, DelayModel};

pub fn seeds(n: u64) -> Vec<u64> {
    (1..=n).collect()
}

/// Packing world: `num_policies` tables over `num_cells` equally likely cells.
pub fn packing(
    num_cells: usize,
    num_policies: usize,
    target: usize,
    horizon: u64,
    issuer: IssuerImpairments,
    kind: LearnerKind,
) -> ScenarioConfig {
    ScenarioConfig {
        horizon,
        environment: EnvironmentConfig::Packing {
            num_cells,
            num_policies,
            gap: 0.05,
            base_fraud_prob: 0.4,
            target,
            issuer,
            losses: Default::default(),
        },
        policy_class: PolicyClassConfig::Companion,
        learner: LearnerConfig {
            kind,
            learning_rate: None,
            exploration: 0.0,
        },
        seeds: seeds(20),
        report_every: 1000,
        master_seed: 2024,
        analysis: Default::default(),
    }
}

pub fn impairments(gamma: f64, eps_sum: f64, delay: DelayModel) -> IssuerImpairments {
    IssuerImpairments {
        gamma,
        channel: CorruptionChannel::symmetric(eps_sum).unwrap(),
        delay,
    }
}

pub fn clean() -> IssuerImpairments {
    impairments(0.0, 0.0, DelayModel::Constant { lag: 0 })
}

/// Single-policy world that always takes `action`, played by the static oracle.
pub fn fixed_action(action: ActionKind, num_cells: usize, horizon: u64, issuer: IssuerImpairments) -> ScenarioConfig {
    let class = PolicyClass::new(vec![PolicyTable::constant(num_cells, action)]).unwrap();
    ScenarioConfig {
        policy_class: PolicyClassConfig::Explicit { policies: class },
        learner: LearnerConfig {
            kind: LearnerKind::StaticOracle,
            learning_rate: None,
            exploration: 0.0,
        },
        ..packing(num_cells, 2, 0, horizon, issuer, LearnerKind::StaticOracle)
    }
}
