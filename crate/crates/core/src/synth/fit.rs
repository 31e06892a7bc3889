//! Period estimators for wrapped phase data.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Least-squares line `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("linear fit needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("linear fit needs distinct abscissae"));
    }
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

/// Remove 2 pi jumps from a phase sequence.
pub fn unwrap(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i > 0 {
            let step = p - phases[i - 1];
            if step > PI {
                offset -= TAU;
            } else if step < -PI {
                offset += TAU;
            }
        }
        out.push(p + offset);
    }
    out
}

/// Delay `tau` maximising the coherence `|sum exp(i (phi_k - 2 pi f_k tau))|`
/// over `[-max_tau_s, max_tau_s]`.
///
/// Works on sparse, noisy, wrapped samples where unwrapping is not possible.
/// A linear phase slope `2 pi f tau` has RF period `1 / |tau|`.
pub fn fit_phase_slope_delay(freqs_hz: &[f64], phases: &[f64], max_tau_s: f64) -> Result<f64> {
    if freqs_hz.len() != phases.len() || freqs_hz.len() < 3 {
        return Err(Error::invalid("delay fit needs at least three paired samples"));
    }
    let f0 = freqs_hz.iter().sum::<f64>() / freqs_hz.len() as f64;
    let (lo, hi) = freqs_hz
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &f| (a.min(f), b.max(f)));
    let span = hi - lo;
    if !(span > 0.0 && max_tau_s > 0.0) {
        return Err(Error::invalid("delay fit needs a frequency spread and a positive search range"));
    }
    let rel: Vec<f64> = freqs_hz.iter().map(|f| f - f0).collect();
    let coherence = |tau: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (df, &p) in rel.iter().zip(phases) {
            let a = p - TAU * df * tau;
            re += a.cos();
            im += a.sin();
        }
        re.hypot(im)
    };
    let step = 1.0 / (8.0 * span);
    let n = (max_tau_s / step).ceil() as i64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in -n..=n {
        let tau = k as f64 * step;
        let c = coherence(tau);
        if c > best.0 {
            best = (c, tau);
        }
    }
    // golden-section refinement inside the winning grid cell
    let (mut a, mut b) = (best.1 - step, best.1 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if coherence(c) > coherence(d) {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasecal::wrap;
    use approx::assert_abs_diff_eq;

    #[test]
    fn line_and_unwrap() {
        let (a, b) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 2.0, epsilon = 1e-12);
        let raw: Vec<f64> = (0..100).map(|i| wrap(0.3 * i as f64)).collect();
        let u = unwrap(&raw);
        assert_abs_diff_eq!(u[99] - u[0], 0.3 * 99.0, epsilon = 1e-9);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn recovers_delay_from_sparse_samples() {
        let tau = 82e-9;
        let freqs: Vec<f64> = (0..200).map(|i| 1398e6 + (i as f64 * 7919.0 * 3.7) % 53e6).collect();
        let phases: Vec<f64> = freqs.iter().map(|f| wrap(0.4 + TAU * (f - 1425e6) * tau)).collect();
        let fit = fit_phase_slope_delay(&freqs, &phases, 1e-6).unwrap();
        assert_abs_diff_eq!(fit, tau, epsilon = 1e-11);
    }
}
