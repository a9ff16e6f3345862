//! Analysis reports behind the `bound`, `statics` and `hetero` commands.
//! Every value is a floor *shape*: the universal constants are inputs, not
//! calibrated quantities.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    average_q, conditional_q, hetero_floor, jensen_gap, marginal_sensitivities, regret_floor,
    regret_floor_with_maturity, variance_penalty, weighted_index, FloorParams, IssuerSummary, JensenGap,
    Sensitivity,
};
use crate::error::Result;

/// Render rows as a left-aligned text table with a header rule.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub floor: f64,
    /// Present when `m_bar` was supplied.
    pub floor_with_maturity: Option<f64>,
    pub q_bar: Option<f64>,
}

pub fn bound_report(p: &FloorParams) -> Result<BoundReport> {
    let floor = regret_floor(p)?;
    let (floor_with_maturity, q_bar) = match p.m_bar {
        Some(m) => (
            Some(regret_floor_with_maturity(p)?),
            Some(average_q(p.gamma_bar, p.delta_bar, m, p.eps10, p.eps01)),
        ),
        None => (None, None),
    };
    Ok(BoundReport {
        floor,
        floor_with_maturity,
        q_bar,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| v.to_string())
}

impl BoundReport {
    pub fn to_text(&self) -> String {
        text_table(
            &["quantity", "value"],
            &[
                vec!["floor shape".into(), self.floor.to_string()],
                vec!["floor shape with maturity".into(), opt(self.floor_with_maturity)],
                vec!["q_bar".into(), opt(self.q_bar)],
            ],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticsReport {
    pub floor: f64,
    /// Sorted by partial derivative, largest first.
    pub ranked: Vec<Sensitivity>,
}

pub fn statics_report(p: &FloorParams) -> Result<StaticsReport> {
    let mut ranked = marginal_sensitivities(p)?;
    ranked.sort_by(|a, b| b.partial.total_cmp(&a.partial).then_with(|| a.parameter.cmp(&b.parameter)));
    Ok(StaticsReport {
        floor: regret_floor(p)?,
        ranked,
    })
}

impl StaticsReport {
    pub fn to_text(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .ranked
            .iter()
            .enumerate()
            .map(|(i, s)| {
                vec![
                    (i + 1).to_string(),
                    s.parameter.clone(),
                    s.partial.to_string(),
                    s.finite_difference.to_string(),
                ]
            })
            .collect();
        format!(
            "floor shape: {}\n{}",
            self.floor,
            text_table(&["rank", "parameter", "partial", "finite_difference"], &rows)
        )
    }
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkIssuer {
    #[serde(default)]
    pub issuer_id: Option<u64>,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default)]
    pub delta: f64,
    pub eps_sum: f64,
    /// Maturity probability used for the conditional observation rate.
    #[serde(default = "unit")]
    pub maturity: f64,
}

impl NetworkIssuer {
    fn summary(&self) -> IssuerSummary {
        IssuerSummary {
            alpha: self.alpha,
            gamma: self.gamma,
            delta: self.delta,
            eps_sum: self.eps_sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub issuers: Vec<NetworkIssuer>,
    #[serde(rename = "K")]
    pub k: u32,
    #[serde(rename = "T")]
    pub t: u64,
    #[serde(rename = "D", default)]
    pub d: f64,
    #[serde(rename = "log_N")]
    pub log_n: f64,
    #[serde(default = "unit")]
    pub c_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssuerLine {
    pub issuer_id: u64,
    pub alpha: f64,
    pub eta: f64,
    pub conditional_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroReport {
    pub issuers: Vec<IssuerLine>,
    pub weighted_index: f64,
    pub floor: f64,
    pub variance_penalty: f64,
    pub jensen: JensenGap,
}

pub fn hetero_report(net: &NetworkFile) -> Result<HeteroReport> {
    let summaries: Vec<IssuerSummary> = net.issuers.iter().map(NetworkIssuer::summary).collect();
    let weighted = weighted_index(&summaries)?;
    let issuers = net
        .issuers
        .iter()
        .enumerate()
        .map(|(i, iss)| {
            Ok(IssuerLine {
                issuer_id: iss.issuer_id.unwrap_or(i as u64),
                alpha: iss.alpha,
                eta: iss.summary().index()?,
                conditional_q: conditional_q(iss.maturity, iss.gamma, iss.delta, iss.eps_sum),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let qs: Vec<f64> = issuers.iter().map(|l| l.conditional_q).collect();
    let alphas: Vec<f64> = issuers.iter().map(|l| l.alpha).collect();
    Ok(HeteroReport {
        weighted_index: weighted,
        floor: hetero_floor(&summaries, net.k, net.t, net.d, net.log_n, net.c_prime)?,
        variance_penalty: variance_penalty(&summaries)?,
        jensen: jensen_gap(&qs, &alphas)?,
        issuers,
    })
}

impl HeteroReport {
    pub fn to_text(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .issuers
            .iter()
            .map(|l| {
                vec![
                    l.issuer_id.to_string(),
                    l.alpha.to_string(),
                    l.eta.to_string(),
                    l.conditional_q.to_string(),
                ]
            })
            .collect();
        let summary = text_table(
            &["quantity", "value"],
            &[
                vec!["weighted index".into(), self.weighted_index.to_string()],
                vec!["floor shape".into(), self.floor.to_string()],
                vec!["variance penalty".into(), self.variance_penalty.to_string()],
                vec!["E[1/q]".into(), self.jensen.mean_inverse.to_string()],
                vec!["1/E[q]".into(), self.jensen.inverse_mean.to_string()],
                vec!["jensen gap".into(), self.jensen.gap.to_string()],
            ],
        );
        format!(
            "{}\n{}",
            text_table(&["issuer", "alpha", "eta", "conditional_q"], &rows),
            summary
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_matches_worked_example() {
        let p = FloorParams::unimpaired(3, 10_000, 0.0, 16f64.ln());
        let r = bound_report(&p).unwrap();
        assert!((r.floor - 288.4054).abs() < 1e-4);
        assert!(r.to_text().contains("288.405"));
        assert_eq!(r.q_bar, None);
    }

    #[test]
    fn statics_are_ranked() {
        let p = FloorParams {
            gamma_bar: 0.3,
            eps10: 0.1,
            eps01: 0.1,
            ..FloorParams::unimpaired(3, 1000, 0.0, 2.0)
        };
        let r = statics_report(&p).unwrap();
        assert_eq!(r.ranked.len(), 4);
        assert!(r.ranked.windows(2).all(|w| w[0].partial >= w[1].partial));
    }

    #[test]
    fn hetero_two_issuer_example() {
        let net = NetworkFile {
            issuers: vec![
                NetworkIssuer { issuer_id: None, alpha: 0.5, gamma: 0.0, delta: 0.0, eps_sum: 0.0, maturity: 1.0 },
                NetworkIssuer { issuer_id: None, alpha: 0.5, gamma: 0.5, delta: 0.5, eps_sum: 0.5, maturity: 1.0 },
            ],
            k: 3,
            t: 1000,
            d: 0.0,
            log_n: 1.0,
            c_prime: 1.0,
        };
        let r = hetero_report(&net).unwrap();
        assert!((r.weighted_index - 8.5).abs() < 1e-12);
        assert!(r.variance_penalty > 0.0);
        assert!(r.jensen.gap > 0.0);
        assert_eq!(r.issuers[1].issuer_id, 1);
        assert!(r.to_text().contains("variance penalty"));
    }

    #[test]
    fn tables_align() {
        let t = text_table(&["a", "bbb"], &[vec!["long".into(), "x".into()]]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "a     bbb");
        assert_eq!(lines[2], "long  x");
    }
}
