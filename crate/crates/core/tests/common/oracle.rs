//! Plain arithmetic reference formulas, written against the model
//! definitions and sharing no code with the library.

pub fn floor(c: f64, k: f64, t: f64, d: f64, log_n: f64, gamma: f64, delta: f64, e10: f64, e01: f64) -> f64 {
    let s = 1.0 - e10 - e01;
    c * ((k * t + d) * log_n / ((1.0 - gamma) * (1.0 - delta) * s * s)).sqrt()
}

pub fn floor_maturity(
    c: f64,
    k: f64,
    t: f64,
    d: f64,
    log_n: f64,
    gamma: f64,
    delta: f64,
    m: f64,
    e10: f64,
    e01: f64,
) -> f64 {
    floor(c, k, t, d, log_n, gamma, delta, e10, e01) / m.sqrt()
}

pub fn q_bar(gamma: f64, delta: f64, m: f64, e10: f64, e01: f64) -> f64 {
    (1.0 - gamma) * (1.0 - delta) * m * (1.0 - e10 - e01)
}

pub fn q_cond(m: f64, gamma: f64, delta: f64, eps: f64) -> f64 {
    m * (1.0 - gamma) * (1.0 - delta) * (1.0 - eps) * (1.0 - eps)
}

pub fn eta(gamma: f64, delta: f64, eps: f64) -> f64 {
    1.0 / ((1.0 - gamma) * (1.0 - delta) * (1.0 - eps) * (1.0 - eps))
}

/// `issuers`: (alpha, gamma, delta, eps).
pub fn hetero(issuers: &[(f64, f64, f64, f64)], c: f64, k: f64, t: f64, d: f64, log_n: f64) -> f64 {
    let mut acc = 0.0;
    for &(a, g, dl, e) in issuers {
        acc += a * eta(g, dl, e);
    }
    c * ((k * t + d) * log_n * acc).sqrt()
}

pub fn slow(cells: f64, k: f64, t: f64, d: f64, m: f64, gamma: f64, delta: f64, eps: f64, log_n: f64, c: f64) -> f64 {
    c * (cells * (k * t + d) * log_n * eta(gamma, delta, eps) / m).sqrt()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}
