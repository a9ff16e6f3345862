//! Closed-form evaluators: regret floors, effective observable fractions,
//! impairment indices, Jensen gaps, heterogeneity penalties, marginal
//! sensitivities and corruption-channel attenuation.
//!
//! The universal constants `c` and `c'` are uncalibrated inputs, so every
//! floor here is a shape, not a level. `log_N` is a natural logarithm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CorruptionChannel;

const SHARE_TOLERANCE: f64 = 1e-9;
const FD_STEP: f64 = 1e-6;
const FD_AGREEMENT: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorParams {
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "T")]
    pub t: u64,
    /// Cumulative finite delay.
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "log_N")]
    pub log_n: f64,
    pub gamma_bar: f64,
    pub delta_bar: f64,
    pub eps10: f64,
    pub eps01: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_bar: Option<f64>,
    #[serde(default = "one")]
    pub c: f64,
}

fn one() -> f64 {
    1.0
}

impl FloorParams {
    /// Unimpaired parameters with `c = 1`.
    pub fn unimpaired(k: u32, t: u64, d: f64, log_n: f64) -> Self {
        FloorParams {
            k,
            t,
            d,
            log_n,
            gamma_bar: 0.0,
            delta_bar: 0.0,
            eps10: 0.0,
            eps01: 0.0,
            m_bar: None,
            c: 1.0,
        }
    }

    pub fn eps_sum(&self) -> f64 {
        self.eps10 + self.eps01
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.t == 0 {
            return Err(Error::config("K and T must be at least 1"));
        }
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return Err(Error::config(format!("D must be finite and nonnegative, got {}", self.d)));
        }
        if !(self.log_n > 0.0 && self.log_n.is_finite()) {
            return Err(Error::config(format!("log_N must be positive, got {}", self.log_n)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config(format!("c must be positive, got {}", self.c)));
        }
        for (name, v) in [
            ("gamma_bar", self.gamma_bar),
            ("delta_bar", self.delta_bar),
            ("eps10", self.eps10),
            ("eps01", self.eps01),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.gamma_bar >= 1.0 || self.delta_bar >= 1.0 || self.eps_sum() >= 1.0 {
            return Err(Error::degenerate("an impairment factor of the floor denominator is zero"));
        }
        if let Some(m) = self.m_bar {
            if !(m > 0.0 && m <= 1.0) {
                return Err(Error::degenerate(format!("m_bar must lie in (0, 1], got {m}")));
            }
        }
        Ok(())
    }
}

fn floor_formula(p: &FloorParams, gamma: f64, delta: f64, eps_sum: f64, log_n: f64, m: f64) -> f64 {
    let numerator = (f64::from(p.k) * p.t as f64 + p.d) * log_n;
    let denominator = (1.0 - gamma) * (1.0 - delta) * m * (1.0 - eps_sum).powi(2);
    p.c * (numerator / denominator).sqrt()
}

/// `c sqrt((K T + D) log N / ((1 - gamma)(1 - delta)(1 - eps10 - eps01)^2))`.
pub fn regret_floor(p: &FloorParams) -> Result<f64> {
    p.validate()?;
    Ok(floor_formula(p, p.gamma_bar, p.delta_bar, p.eps_sum(), p.log_n, 1.0))
}

/// The floor with the average maturity probability `m_bar` as an extra
/// denominator factor.
pub fn regret_floor_with_maturity(p: &FloorParams) -> Result<f64> {
    let m = p
        .m_bar
        .ok_or_else(|| Error::config("m_bar is required for the maturity-explicit floor"))?;
    p.validate()?;
    Ok(floor_formula(p, p.gamma_bar, p.delta_bar, p.eps_sum(), p.log_n, m))
}

/// Coarse average observable fraction; corruption enters to the first power.
pub fn average_q(gamma_bar: f64, delta_bar: f64, m_bar: f64, eps10: f64, eps01: f64) -> f64 {
    (1.0 - gamma_bar) * (1.0 - delta_bar) * m_bar * (1.0 - eps10 - eps01)
}

/// Conditional observation probability; corruption enters squared.
pub fn conditional_q(m: f64, gamma: f64, delta: f64, eps_sum: f64) -> f64 {
    m * (1.0 - gamma) * (1.0 - delta) * (1.0 - eps_sum).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenGap {
    pub mean_inverse: f64,
    pub inverse_mean: f64,
    pub gap: f64,
}

/// `E[1/q] - 1/E[q]` under `weights`.
pub fn jensen_gap(q_values: &[f64], weights: &[f64]) -> Result<JensenGap> {
    if q_values.is_empty() || q_values.len() != weights.len() {
        return Err(Error::config("q values and weights must be non-empty and of equal length"));
    }
    check_shares(weights.iter().copied())?;
    if let Some(q) = q_values.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
        return Err(Error::domain(format!("q = {q} outside (0, 1]; 1/q undefined")));
    }
    let mean_inverse: f64 = q_values.iter().zip(weights).map(|(q, w)| w / q).sum();
    let mean: f64 = q_values.iter().zip(weights).map(|(q, w)| w * q).sum();
    let inverse_mean = 1.0 / mean;
    Ok(JensenGap {
        mean_inverse,
        inverse_mean,
        gap: mean_inverse - inverse_mean,
    })
}

/// `1 / ((1 - gamma)(1 - delta)(1 - eps)^2)`.
pub fn impairment_index(gamma: f64, delta: f64, eps_sum: f64) -> Result<f64> {
    let denominator = (1.0 - gamma) * (1.0 - delta) * (1.0 - eps_sum).powi(2);
    if !(1.0 - gamma > 0.0 && 1.0 - delta > 0.0 && 1.0 - eps_sum > 0.0) {
        return Err(Error::degenerate(format!(
            "impairment index undefined at (gamma={gamma}, delta={delta}, eps={eps_sum})"
        )));
    }
    Ok(1.0 / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IssuerSummary {
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub eps_sum: f64,
}

impl IssuerSummary {
    pub fn index(&self) -> Result<f64> {
        impairment_index(self.gamma, self.delta, self.eps_sum)
    }
}

fn check_shares(shares: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for a in shares {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::config(format!("share {a} outside [0, 1]")));
        }
        total += a;
    }
    if (total - 1.0).abs() > SHARE_TOLERANCE {
        return Err(Error::config(format!("shares must sum to 1, got {total}")));
    }
    Ok(())
}

/// `sum_i alpha_i eta_i`.
pub fn weighted_index(issuers: &[IssuerSummary]) -> Result<f64> {
    if issuers.is_empty() {
        return Err(Error::config("issuer list must not be empty"));
    }
    check_shares(issuers.iter().map(|i| i.alpha))?;
    issuers.iter().try_fold(0.0, |acc, i| Ok(acc + i.alpha * i.index()?))
}

/// `c' sqrt((K T + D) log N sum_i alpha_i eta_i)`.
pub fn hetero_floor(issuers: &[IssuerSummary], k: u32, t: u64, d: f64, log_n: f64, c_prime: f64) -> Result<f64> {
    let weighted = weighted_index(issuers)?;
    let scale = FloorParams {
        c: c_prime,
        ..FloorParams::unimpaired(k, t, d, log_n)
    };
    scale.validate()?;
    Ok(c_prime * ((f64::from(k) * t as f64 + d) * log_n * weighted).sqrt())
}

/// `sum_i alpha_i eta(params_i) - eta(sum_i alpha_i params_i)`.
pub fn variance_penalty(issuers: &[IssuerSummary]) -> Result<f64> {
    let weighted = weighted_index(issuers)?;
    let mean = |f: fn(&IssuerSummary) -> f64| issuers.iter().map(|i| i.alpha * f(i)).sum::<f64>();
    let at_mean = impairment_index(mean(|i| i.gamma), mean(|i| i.delta), mean(|i| i.eps_sum))?;
    Ok(weighted - at_mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub parameter: String,
    pub partial: f64,
    pub finite_difference: f64,
}

/// Closed-form partial derivatives of the floor in `log_N`, `gamma_bar`,
/// `delta_bar` and the corruption sum, each checked against a central
/// difference.
pub fn marginal_sensitivities(p: &FloorParams) -> Result<Vec<Sensitivity>> {
    let floor = regret_floor(p)?;
    let (g, dl, e, ln) = (p.gamma_bar, p.delta_bar, p.eps_sum(), p.log_n);
    if ln <= FD_STEP || 1.0 - g <= FD_STEP || 1.0 - dl <= FD_STEP || 1.0 - e <= FD_STEP {
        return Err(Error::Boundary(
            "parameters within one finite-difference step of the domain boundary".into(),
        ));
    }
    let f = |g: f64, dl: f64, e: f64, ln: f64| floor_formula(p, g, dl, e, ln, 1.0);
    let central = |plus: f64, minus: f64| (plus - minus) / (2.0 * FD_STEP);
    let h = FD_STEP;
    let rows = [
        ("log_N", floor / (2.0 * ln), central(f(g, dl, e, ln + h), f(g, dl, e, ln - h))),
        ("gamma_bar", floor / (2.0 * (1.0 - g)), central(f(g + h, dl, e, ln), f(g - h, dl, e, ln))),
        ("delta_bar", floor / (2.0 * (1.0 - dl)), central(f(g, dl + h, e, ln), f(g, dl - h, e, ln))),
        ("eps_sum", floor / (1.0 - e), central(f(g, dl, e + h, ln), f(g, dl, e - h, ln))),
    ];
    rows.into_iter()
        .map(|(name, partial, fd)| {
            if (partial - fd).abs() > FD_AGREEMENT * partial.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::Boundary(format!(
                    "{name}: closed form {partial} disagrees with finite difference {fd}"
                )));
            }
            Ok(Sensitivity {
                parameter: name.to_string(),
                partial,
                finite_difference: fd,
            })
        })
        .collect()
}

/// Impairments of the slowest-maturing sub-population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlowRegion {
    /// Raw number of slow cells.
    pub cells: u64,
    #[serde(rename = "K")]
    pub k: u32,
    pub t_slow: u64,
    pub d_slow: f64,
    pub m_slow: f64,
    pub gamma: f64,
    pub delta: f64,
    pub eps_sum: f64,
}

/// `c sqrt(cells (K T_slow + D_slow) log N / (m_slow (1-gamma)(1-delta)(1-eps)^2))`.
pub fn slow_region_floor(slow: &SlowRegion, log_n: f64, c: f64) -> Result<f64> {
    if !(slow.m_slow > 0.0) {
        return Err(Error::degenerate("m_slow must be positive"));
    }
    let eta = impairment_index(slow.gamma, slow.delta, slow.eps_sum)?;
    let numerator = slow.cells as f64 * (f64::from(slow.k) * slow.t_slow as f64 + slow.d_slow) * log_n;
    Ok(c * (numerator * eta / slow.m_slow).sqrt())
}

fn bernoulli_tv(a: f64, b: f64) -> f64 {
    0.5 * ((a - b).abs() + ((1.0 - a) - (1.0 - b)).abs())
}

/// Total variation between Bernoulli(`p`) and Bernoulli(`q`) before and
/// after the corruption channel.
pub fn tv_attenuation(p: f64, q: f64, channel: &CorruptionChannel) -> (f64, f64) {
    (
        bernoulli_tv(p, q),
        bernoulli_tv(channel.output_mean(p), channel.output_mean(q)),
    )
}

/// Pearson chi-square divergence of Bernoulli(`p`) from Bernoulli(`q`).
pub fn bernoulli_chi_square(p: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("reference probability {q} must lie in (0, 1)")));
    }
    Ok((p - q).powi(2) / (q * (1.0 - q)))
}

/// Chi-square divergence before and after the corruption channel.
pub fn chi_square_attenuation(p: f64, q: f64, channel: &CorruptionChannel) -> Result<(f64, f64)> {
    Ok((
        bernoulli_chi_square(p, q)?,
        bernoulli_chi_square(channel.output_mean(p), channel.output_mean(q))?,
    ))
}
