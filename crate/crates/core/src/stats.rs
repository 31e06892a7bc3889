//! Goodness-of-fit helpers used by the statistical checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Pearson chi-square of observed counts against `n * probs`, pooling bins
/// with expectation below `min_expected` into one cell.
pub fn chi_square_gof(counts: &[u64], probs: &[f64], min_expected: f64) -> Result<TestOutcome> {
    if counts.len() != probs.len() {
        return Err(Error::invalid("counts and probabilities differ in length"));
    }
    let n: u64 = counts.iter().sum();
    let n = n as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let e = n * p;
        if e <= 0.0 {
            if c > 0 {
                return Err(Error::invalid("count in a bin with zero probability"));
            }
            continue;
        }
        if e < min_expected {
            pooled_obs += c as f64;
            pooled_exp += e;
            continue;
        }
        stat += (c as f64 - e).powi(2) / e;
        cells += 1;
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    if cells < 2 {
        return Err(Error::invalid("chi-square needs at least two cells"));
    }
    let dof = (cells - 1) as f64;
    let dist = ChiSquared::new(dof).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(TestOutcome {
        statistic: stat,
        dof,
        p_value: dist.sf(stat),
    })
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestOutcome> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS test needs non-empty samples"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    Ok(TestOutcome {
        statistic: d,
        dof: en * en,
        p_value: kolmogorov_q(lambda),
    })
}

/// `Q_KS(x) = 2 sum (-1)^(k-1) exp(-2 k^2 x^2)`.
fn kolmogorov_q(x: f64) -> f64 {
    if x < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = sign * (-2.0 * (k * k) as f64 * x * x).exp();
        sum += term;
        if term.abs() < 1e-14 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
