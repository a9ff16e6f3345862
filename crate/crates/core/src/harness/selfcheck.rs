//! A fast invariant suite runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{EnvironmentConfig, IssuerImpairments, LearnerConfig, PolicyClassConfig, ScenarioConfig};
use super::sim::run_simulation;
use crate::analysis::{
    jensen_gap, regret_floor, tv_attenuation, variance_penalty, FloorParams, IssuerSummary,
};
use crate::environments::{analytic_policy_loss, build_packing_family, single_issuer, EnvironmentSpec};
use crate::learners::LearnerKind;
use crate::model::{debias_label, CorruptionChannel, DelayModel};

pub struct CheckOutcome {
    pub name: &'static str,
    pub result: std::result::Result<(), String>,
}

type Check = fn() -> std::result::Result<(), String>;

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5e1f)
}

fn random_channel(rng: &mut ChaCha8Rng) -> CorruptionChannel {
    let a = rng.gen_range(0.0..0.45);
    let b = rng.gen_range(0.0..0.45);
    CorruptionChannel::new(a, b).expect("sum below one")
}

fn worked_floor() -> std::result::Result<(), String> {
    let f = regret_floor(&FloorParams::unimpaired(3, 10_000, 0.0, 16f64.ln())).map_err(|e| e.to_string())?;
    ensure((f - (30_000.0 * 16f64.ln()).sqrt()).abs() < 1e-9, format!("worked floor {f}"))
}

fn multiplicativity() -> std::result::Result<(), String> {
    let base = FloorParams::unimpaired(3, 5000, 100.0, 3.0);
    let l0 = regret_floor(&base).map_err(|e| e.to_string())?;
    for (a, b) in [(0.1, 0.2), (0.5, 0.0), (0.9, 0.9)] {
        let l = regret_floor(&FloorParams { gamma_bar: a, delta_bar: b, ..base.clone() }).map_err(|e| e.to_string())?;
        let want = 1.0 / ((1.0 - a) * (1.0 - b)).sqrt();
        ensure(((l / l0) - want).abs() <= 1e-12 * want, format!("ratio at ({a}, {b})"))?;
    }
    Ok(())
}

fn convexity() -> std::result::Result<(), String> {
    let mut r = rng();
    for _ in 0..200 {
        let n = r.gen_range(1..6);
        let q: Vec<f64> = (0..n).map(|_| r.gen_range(0.01..=1.0)).collect();
        let mut alphas: Vec<f64> = (0..n).map(|_| r.gen_range(0.01..1.0)).collect();
        let total: f64 = alphas.iter().sum();
        alphas.iter_mut().for_each(|a| *a /= total);
        let g = jensen_gap(&q, &alphas).map_err(|e| e.to_string())?;
        ensure(g.gap >= -1e-12, format!("negative Jensen gap {}", g.gap))?;
        let issuers: Vec<IssuerSummary> = alphas
            .iter()
            .map(|&alpha| IssuerSummary {
                alpha,
                gamma: r.gen_range(0.0..0.9),
                delta: r.gen_range(0.0..0.9),
                eps_sum: r.gen_range(0.0..0.9),
            })
            .collect();
        let v = variance_penalty(&issuers).map_err(|e| e.to_string())?;
        ensure(v >= -1e-12, format!("negative variance penalty {v}"))?;
    }
    Ok(())
}

fn tv_identity() -> std::result::Result<(), String> {
    let mut r = rng();
    for _ in 0..200 {
        let ch = random_channel(&mut r);
        let (p, q) = (r.gen::<f64>(), r.gen::<f64>());
        let (clean, corrupted) = tv_attenuation(p, q, &ch);
        ensure((corrupted - ch.signal_strength() * clean).abs() <= 1e-12, "TV identity")?;
    }
    Ok(())
}

fn debias_exact() -> std::result::Result<(), String> {
    let mut r = rng();
    for _ in 0..50 {
        let ch = random_channel(&mut r);
        for latent in [false, true] {
            let p_one = if latent { 1.0 - ch.eps10 } else { ch.eps01 };
            let one = debias_label(&ch, true).map_err(|e| e.to_string())?;
            let zero = debias_label(&ch, false).map_err(|e| e.to_string())?;
            let mean = p_one * one + (1.0 - p_one) * zero;
            ensure((mean - f64::from(u8::from(latent))).abs() < 1e-12, "debiased mean")?;
        }
    }
    Ok(())
}

fn packing_soundness() -> std::result::Result<(), String> {
    let base = EnvironmentSpec::homogeneous(vec![0.4; 4], single_issuer(0.0, CorruptionChannel::IDENTITY, DelayModel::default()))
        .map_err(|e| e.to_string())?;
    let fam = build_packing_family(8, 0.05, &base).map_err(|e| e.to_string())?;
    for (j, env) in fam.environments.iter().enumerate() {
        let fav = fam.favored_policy[j];
        let best = analytic_policy_loss(env, fam.class.get(fav)).map_err(|e| e.to_string())?;
        for (k, p) in fam.class.policies().iter().enumerate() {
            if k != fav {
                let l = analytic_policy_loss(env, p).map_err(|e| e.to_string())?;
                ensure(l - best >= 0.05 - 1e-12, format!("environment {j}: policy {k} within the gap"))?;
            }
        }
    }
    Ok(())
}

fn scenario(kind: LearnerKind, gamma: f64) -> ScenarioConfig {
    ScenarioConfig {
        horizon: 2000,
        environment: EnvironmentConfig::Packing {
            num_cells: 4,
            num_policies: 8,
            gap: 0.05,
            base_fraud_prob: 0.4,
            target: 5,
            issuer: IssuerImpairments {
                gamma,
                channel: CorruptionChannel::new(0.1, 0.05).expect("valid"),
                delay: DelayModel::Geometric { rate: 0.1 },
            },
            losses: Default::default(),
        },
        policy_class: PolicyClassConfig::Companion,
        learner: LearnerConfig { kind, learning_rate: None, exploration: 0.0 },
        seeds: vec![1],
        report_every: 100,
        master_seed: 7,
        analysis: Default::default(),
    }
}

fn simulation_invariants() -> std::result::Result<(), String> {
    let oracle = run_simulation(&scenario(LearnerKind::StaticOracle, 0.2), 3).map_err(|e| e.to_string())?;
    ensure(
        oracle.regret_trajectory.iter().all(|c| c.cumulative_regret == 0.0),
        "static oracle has nonzero regret",
    )?;
    let a = run_simulation(&scenario(LearnerKind::ExpWeights, 0.2), 3).map_err(|e| e.to_string())?;
    let b = run_simulation(&scenario(LearnerKind::ExpWeights, 0.2), 3).map_err(|e| e.to_string())?;
    ensure(a == b, "identical seeds gave different runs")?;
    ensure(
        a.matured_count + a.suppressed_count + a.censored_count + a.expired_count == a.horizon,
        "conservation",
    )?;
    let blind = run_simulation(&scenario(LearnerKind::ExpWeights, 1.0), 3).map_err(|e| e.to_string())?;
    let uniform = run_simulation(&scenario(LearnerKind::UniformRandom, 1.0), 3).map_err(|e| e.to_string())?;
    ensure(blind.matured_count == 0, "labels matured under full censorship")?;
    ensure(
        (blind.final_regret() - uniform.final_regret()).abs() <= 1e-9 * uniform.final_regret().abs().max(1.0),
        "uninformed learner differs from uniform random",
    )
}

const CHECKS: [(&str, Check); 7] = [
    ("worked floor value", worked_floor),
    ("floor multiplicativity", multiplicativity),
    ("jensen gap and variance penalty nonnegative", convexity),
    ("tv attenuation identity", tv_identity),
    ("debiased label unbiased", debias_exact),
    ("packing family soundness", packing_soundness),
    ("simulation invariants", simulation_invariants),
];

pub fn run_selfcheck() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|&(name, check)| CheckOutcome { name, result: check() })
        .collect()
}
