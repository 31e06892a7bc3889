//! Phase arithmetic for East-West cross-element phase measurements.
//!
//! Every phase handed out by this crate is wrapped into `[-pi, pi)`. The
//! instrumental path delay `tau_int` imprints a linear-in-frequency phase on
//! each single-pulse measurement, which wraps into a sawtooth over RF
//! frequency with period `1 / |tau_int|`. For a pulse pair separated by
//! `delta_f`, the differenced measurement carries `-2 pi delta_f tau_int`,
//! which [`correct_pair_phase`] adds back.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ceiling for the delay-uncertainty term of the phase-noise budget.
pub const DEFAULT_TAU_RESIDUAL_CAP: f64 = 0.1;

/// Wrap a phase into `[-pi, pi)`.
///
/// Values already inside the interval are returned unchanged, so the
/// operation is exactly idempotent. Non-finite input propagates as NaN; use
/// [`wrap_phase`] when the input is untrusted.
#[inline]
pub fn wrap(phi: f64) -> f64 {
    if (-PI..PI).contains(&phi) {
        return phi;
    }
    let mut r = phi - TAU * ((phi + PI) / TAU).floor();
    if r >= PI {
        r -= TAU;
    } else if r < -PI {
        r += TAU;
    }
    r
}

/// Checked variant of [`wrap`].
pub fn wrap_phase(phi: f64) -> Result<f64> {
    if !phi.is_finite() {
        return Err(Error::invalid(format!("phase must be finite, got {phi}")));
    }
    Ok(wrap(phi))
}

/// Remove the instrumental delay from a measured pair phase difference:
/// `wrap(measured + 2 pi delta_f tau_int)`.
#[inline]
pub fn correct_pair_phase(measured: f64, delta_f: f64, tau_int: f64) -> f64 {
    wrap(measured + TAU * delta_f * tau_int)
}

/// `wrap(phase_at_reference + 2 pi (rf - reference) tau)`.
///
/// With `tau == 0` this is the constant `wrap(phase_at_reference)`.
#[inline]
pub fn sawtooth_ew_phase(
    rf_frequency: f64,
    tau: f64,
    phase_at_reference: f64,
    reference_frequency: f64,
) -> f64 {
    wrap(phase_at_reference + TAU * (rf_frequency - reference_frequency) * tau)
}

/// RF frequency period of the sawtooth, `None` when there is no delay.
pub fn sawtooth_period_hz(tau: f64) -> Option<f64> {
    (tau != 0.0 && tau.is_finite()).then(|| 1.0 / tau.abs())
}

/// Phase the instrumental delay adds to a single-pulse East-West
/// measurement at `rf_frequency`.
///
/// Sign convention: the measurement carries `-2 pi (f - f_ref) tau_int`, so
/// that differencing two pulses and applying [`correct_pair_phase`] with the
/// same `tau_int` cancels it exactly.
#[inline]
pub fn instrumental_phase(
    rf_frequency: f64,
    tau_int: f64,
    reference_frequency: f64,
    phase_offset: f64,
) -> f64 {
    sawtooth_ew_phase(rf_frequency, -tau_int, phase_offset, reference_frequency)
}

/// Three uncorrelated contributions to the corrected pair-phase noise and
/// their root-sum-square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoiseBudget {
    pub ra_bin_term: f64,
    pub snr_term: f64,
    pub tau_residual_term: f64,
    pub rss: f64,
}

impl PhaseNoiseBudget {
    pub fn from_terms(ra_bin_term: f64, snr_term: f64, tau_residual_term: f64) -> Result<Self> {
        for (name, v) in [
            ("ra_bin_term", ra_bin_term),
            ("snr_term", snr_term),
            ("tau_residual_term", tau_residual_term),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let rss = (ra_bin_term * ra_bin_term
            + snr_term * snr_term
            + tau_residual_term * tau_residual_term)
            .sqrt();
        Ok(Self {
            ra_bin_term,
            snr_term,
            tau_residual_term,
            rss,
        })
    }
}

/// Analytic pair-phase noise budget.
///
/// * RA quantisation: `pi / bins_per_alias_period`
/// * SNR: `atan(snr_linear^-1/2)`
/// * delay uncertainty: `min(2 pi delta_f tau_uncertainty, tau_residual_cap)`
pub fn phase_noise_budget(
    bins_per_alias_period: f64,
    snr_linear: f64,
    delta_f: f64,
    tau_uncertainty: f64,
    tau_residual_cap: f64,
) -> Result<PhaseNoiseBudget> {
    for (name, v) in [
        ("bins_per_alias_period", bins_per_alias_period),
        ("snr_linear", snr_linear),
        ("delta_f", delta_f),
        ("tau_uncertainty", tau_uncertainty),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(format!("{name} must be finite and > 0, got {v}")));
        }
    }
    if !(tau_residual_cap.is_finite() && tau_residual_cap >= 0.0) {
        return Err(Error::invalid(format!(
            "tau_residual_cap must be finite and >= 0, got {tau_residual_cap}"
        )));
    }
    let ra_bin_term = PI / bins_per_alias_period;
    let snr_term = snr_linear.powf(-0.5).atan();
    let tau_residual_term = (TAU * delta_f * tau_uncertainty).min(tau_residual_cap);
    PhaseNoiseBudget::from_terms(ra_bin_term, snr_term, tau_residual_term)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_phase(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(wrap_phase(1.5 * PI).unwrap(), -0.5 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_phase(-3.6066).unwrap(), -3.6066 + TAU, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_phase(-3.6066).unwrap(), 2.6766, epsilon = 1e-4);
        assert_eq!(wrap(PI), -PI);
        assert_eq!(wrap(-PI), -PI);
    }

    #[test]
    fn wrap_rejects_non_finite() {
        for bad in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            let err = wrap_phase(bad).unwrap_err();
            assert_eq!(err.class(), "invalid-input");
        }
    }

    #[test]
    fn correction_examples() {
        assert!(correct_pair_phase(0.0, 1.0, -82e-9).abs() < 1e-6);
        let c = correct_pair_phase(0.0, 7e6, -82e-9);
        assert_abs_diff_eq!(c, TAU * 7e6 * -82e-9 + TAU, epsilon = 1e-12);
        assert_abs_diff_eq!(c, 2.6766, epsilon = 1e-4);
        let measured = -TAU * 7e6 * -82e-9;
        assert_abs_diff_eq!(measured, 3.6066, epsilon = 1e-4);
        assert_abs_diff_eq!(correct_pair_phase(measured, 7e6, -82e-9), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sawtooth_examples() {
        let tau = -82e-9;
        let period = sawtooth_period_hz(tau).unwrap();
        assert_abs_diff_eq!(period, 12.195_122e6, epsilon = 1.0);
        assert_eq!(sawtooth_ew_phase(1425e6, tau, 0.3, 1425e6), 0.3);
        let a = sawtooth_ew_phase(1410e6, tau, 0.3, 1425e6);
        let b = sawtooth_ew_phase(1410e6 + period, tau, 0.3, 1425e6);
        assert_abs_diff_eq!(wrap(a - b), 0.0, epsilon = 1e-6);
        assert_eq!(sawtooth_ew_phase(1410e6, 0.0, 0.3, 1425e6), 0.3);
        assert!(sawtooth_period_hz(0.0).is_none());
    }

    #[test]
    fn budget_terms() {
        let b = phase_noise_budget(15.6, 10.0, 7e6, 1e-9, DEFAULT_TAU_RESIDUAL_CAP).unwrap();
        assert_abs_diff_eq!(b.ra_bin_term, 0.2014, epsilon = 1e-4);
        assert_abs_diff_eq!(b.snr_term, 0.3063, epsilon = 1e-4);
        assert_abs_diff_eq!(b.tau_residual_term, TAU * 7e6 * 1e-9, epsilon = 1e-12);
        let capped = phase_noise_budget(15.6, 10.0, 7e6, 1e-8, DEFAULT_TAU_RESIDUAL_CAP).unwrap();
        assert_eq!(capped.tau_residual_term, 0.1);

        let rounded = PhaseNoiseBudget::from_terms(0.2, 0.3, 0.1).unwrap();
        assert_abs_diff_eq!(rounded.rss, 0.3742, epsilon = 1e-4);
        assert!(PhaseNoiseBudget::from_terms(-0.1, 0.3, 0.1).is_err());
        assert!(phase_noise_budget(0.0, 10.0, 7e6, 1e-9, 0.1).is_err());
    }

    #[test]
    fn instrumental_phase_cancels_under_correction() {
        let tau = -82e-9;
        let f1 = 1400.123e6;
        let df = 3.3e6;
        let true_pair = 0.25;
        let p1 = instrumental_phase(f1, tau, 1425e6, 0.07);
        let p2 = wrap(instrumental_phase(f1 + df, tau, 1425e6, 0.07) + true_pair);
        let corrected = correct_pair_phase(wrap(p2 - p1), df, tau);
        assert_abs_diff_eq!(corrected, true_pair, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent_and_congruent(x in -1e4f64..1e4) {
            let w = wrap(x);
            prop_assert!((-PI..PI).contains(&w));
            prop_assert_eq!(wrap(w), w);
            let k = ((x - w) / TAU).round();
            prop_assert!((x - w - k * TAU).abs() < 1e-9);
        }

        #[test]
        fn zero_offset_correction_is_wrap(m in -50.0f64..50.0, tau in -1e-6f64..1e-6) {
            prop_assert_eq!(correct_pair_phase(m, 0.0, tau), wrap(m));
        }

        #[test]
        fn sawtooth_round_trip(
            truth in -PI..PI,
            f1 in 1398e6f64..1444e6,
            df in 1.0f64..7e6,
            tau in -200e-9f64..200e-9,
        ) {
            let m1 = instrumental_phase(f1, tau, 1425e6, 0.0);
            let m2 = wrap(instrumental_phase(f1 + df, tau, 1425e6, 0.0) + truth);
            let c = correct_pair_phase(wrap(m2 - m1), df, tau);
            prop_assert!(wrap(c - truth).abs() < 1e-9);
        }

        #[test]
        fn rss_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, d in 0.0f64..0.5) {
            let base = PhaseNoiseBudget::from_terms(a, b, c).unwrap().rss;
            prop_assert!(PhaseNoiseBudget::from_terms(a + d, b, c).unwrap().rss >= base);
            prop_assert!(PhaseNoiseBudget::from_terms(a, b + d, c).unwrap().rss >= base);
            prop_assert!(PhaseNoiseBudget::from_terms(a, b, c + d).unwrap().rss >= base);
        }
    }
}
