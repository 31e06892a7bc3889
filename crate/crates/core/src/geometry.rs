//! Meridian-transit East-West baseline geometry.
//!
//! All angles that enter trigonometry are radians; declinations and azimuths
//! are stored in degrees because that is how they are configured. Hour angle
//! is supplied by the caller (see [`crate::sky`]).

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasecal::wrap;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// RA hours per radian of hour angle.
pub const RA_HOURS_PER_RADIAN: f64 = 24.0 / TAU;

/// Half-width, in bins, of the search window placed around each alias offset.
pub const ALIAS_HALF_WINDOW_BINS: i64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineGeometry {
    /// Baseline length in wavelengths at `reference_frequency_hz`.
    pub baseline_wavelengths: f64,
    pub reference_frequency_hz: f64,
    pub baseline_azimuth_deg: f64,
    pub declination_deg: f64,
    /// Instrument East-West differential delay.
    pub tau_int_s: f64,
    /// Fringe period at 0 deg declination to use instead of the computed one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fringe_period_override_hours: Option<f64>,
}

impl Default for BaselineGeometry {
    fn default() -> Self {
        Self {
            baseline_wavelengths: 33.0,
            reference_frequency_hz: 1425e6,
            baseline_azimuth_deg: 180.0,
            declination_deg: -4.3,
            tau_int_s: -82e-9,
            fringe_period_override_hours: None,
        }
    }
}

impl BaselineGeometry {
    pub fn new(
        baseline_wavelengths: f64,
        reference_frequency_hz: f64,
        declination_deg: f64,
        tau_int_s: f64,
    ) -> Result<Self> {
        let g = Self {
            baseline_wavelengths,
            reference_frequency_hz,
            declination_deg,
            tau_int_s,
            ..Self::default()
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.baseline_wavelengths.is_finite() && self.baseline_wavelengths > 0.0) {
            return Err(Error::invalid("baseline_wavelengths must be > 0"));
        }
        if !(self.reference_frequency_hz.is_finite() && self.reference_frequency_hz > 0.0) {
            return Err(Error::invalid("reference_frequency_hz must be > 0"));
        }
        if !(-90.0..=90.0).contains(&self.declination_deg) {
            return Err(Error::invalid("declination_deg must lie in [-90, 90]"));
        }
        if !self.tau_int_s.is_finite() {
            return Err(Error::invalid("tau_int_s must be finite"));
        }
        if !self.baseline_azimuth_deg.is_finite() {
            return Err(Error::invalid("baseline_azimuth_deg must be finite"));
        }
        if let Some(p) = self.fringe_period_override_hours {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::invalid("fringe_period_override_hours must be > 0"));
            }
        }
        Ok(())
    }

    pub fn with_declination(mut self, declination_deg: f64) -> Self {
        self.declination_deg = declination_deg;
        self
    }

    pub fn with_tau_int(mut self, tau_int_s: f64) -> Self {
        self.tau_int_s = tau_int_s;
        self
    }

    pub fn baseline_m(&self) -> f64 {
        self.baseline_wavelengths * SPEED_OF_LIGHT / self.reference_frequency_hz
    }

    /// `(B / c) sin(H) cos(dec)` in seconds.
    pub fn geometric_delay(&self, hour_angle: f64) -> f64 {
        // B / c reduces to B_lambda / f_ref.
        (self.baseline_wavelengths / self.reference_frequency_hz)
            * hour_angle.sin()
            * self.declination_deg.to_radians().cos()
    }

    /// Geometric cross-element phase at `rf_frequency`, wrapped.
    pub fn expected_ew_phase(&self, rf_frequency: f64, hour_angle: f64) -> f64 {
        wrap(TAU * rf_frequency * self.geometric_delay(hour_angle))
    }

    /// Fringe period from the baseline length alone, ignoring any override.
    pub fn computed_fringe_period_ra_hours(&self) -> Result<f64> {
        let cos_dec = self.cos_dec_checked()?;
        Ok(RA_HOURS_PER_RADIAN / (self.baseline_wavelengths * cos_dec))
    }

    /// RA fringe period at this declination, honouring the configured
    /// zero-declination override when present.
    pub fn fringe_period_ra_hours(&self) -> Result<f64> {
        let cos_dec = self.cos_dec_checked()?;
        match self.fringe_period_override_hours {
            Some(p0) => Ok(p0 / cos_dec),
            None => Ok(RA_HOURS_PER_RADIAN / (self.baseline_wavelengths * cos_dec)),
        }
    }

    pub fn alias_bin_offsets(&self, ra_bin_width_hours: f64) -> Result<AliasWindows> {
        if !(ra_bin_width_hours.is_finite() && ra_bin_width_hours > 0.0) {
            return Err(Error::invalid("ra_bin_width_hours must be > 0"));
        }
        let bins_per_period = self.fringe_period_ra_hours()? / ra_bin_width_hours;
        let n = (bins_per_period.round() as i64).max(1);
        Ok(AliasWindows {
            bins_per_period,
            offsets: [-n, n],
            half_window: ALIAS_HALF_WINDOW_BINS,
        })
    }

    fn cos_dec_checked(&self) -> Result<f64> {
        if self.declination_deg.abs() >= 90.0 {
            return Err(Error::DegenerateGeometry(format!(
                "no fringe at declination {} deg",
                self.declination_deg
            )));
        }
        Ok(self.declination_deg.to_radians().cos())
    }
}

/// Alias offsets, in RA bins, at plus and minus one fringe period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasWindows {
    pub bins_per_period: f64,
    pub offsets: [i64; 2],
    pub half_window: i64,
}

impl AliasWindows {
    /// Whether a signed bin offset from the primary falls in any alias window.
    pub fn contains_offset(&self, offset: i64) -> bool {
        self.offsets
            .iter()
            .any(|&o| (offset - o).abs() <= self.half_window)
    }

    /// Bins of the window centred on `offset`, wrapped onto `n_bins`.
    pub fn window_bins(&self, primary: usize, offset: i64, n_bins: usize) -> Vec<usize> {
        let n = n_bins as i64;
        (offset - self.half_window..=offset + self.half_window)
            .map(|k| (primary as i64 + k).rem_euclid(n) as usize)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkyDirection {
    pub ra_hours: f64,
    pub dec_degrees: f64,
}

impl SkyDirection {
    pub fn new(ra_hours: f64, dec_degrees: f64) -> Self {
        Self {
            ra_hours: ra_hours.rem_euclid(24.0),
            dec_degrees,
        }
    }

    /// Great-circle separation in degrees.
    pub fn separation_deg(&self, other: &SkyDirection) -> f64 {
        let (ra1, d1) = (self.ra_hours * PI / 12.0, self.dec_degrees.to_radians());
        let (ra2, d2) = (other.ra_hours * PI / 12.0, other.dec_degrees.to_radians());
        // haversine, stable at small separations
        let h = ((d2 - d1) / 2.0).sin().powi(2)
            + d1.cos() * d2.cos() * ((ra2 - ra1) / 2.0).sin().powi(2);
        (2.0 * h.sqrt().min(1.0).asin()).to_degrees()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn reference_at_equator() -> BaselineGeometry {
        BaselineGeometry::default().with_declination(0.0)
    }

    const HALF_BIN_RAD: f64 = 0.00375 * TAU / 24.0;

    #[test]
    fn delay_examples() {
        let g = reference_at_equator();
        assert_eq!(g.geometric_delay(0.0), 0.0);
        assert_abs_diff_eq!(HALF_BIN_RAD, 0.0009817, epsilon = 1e-7);
        assert_abs_diff_eq!(g.geometric_delay(HALF_BIN_RAD), 2.273e-11, epsilon = 0.002e-11);
        let pole = g.with_declination(90.0);
        for h in [-1.0, 0.01, 0.5, 2.0] {
            // cos(90 deg) is 6e-17 in floating point
            assert!(pole.geometric_delay(h).abs() < 1e-23);
        }
    }

    #[test]
    fn ew_phase_examples() {
        let g = reference_at_equator();
        assert_eq!(g.expected_ew_phase(1425e6, 0.0), 0.0);
        let edge = g.expected_ew_phase(1425e6, HALF_BIN_RAD);
        // 2 pi * 33 * sin(0.00098175)
        assert_abs_diff_eq!(edge, TAU * 33.0 * HALF_BIN_RAD.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(edge, 0.2036, epsilon = 1e-4);
        assert_abs_diff_eq!(g.expected_ew_phase(1425e6, -HALF_BIN_RAD), -edge, epsilon = 1e-12);
    }

    #[test]
    fn ew_phase_is_periodic_in_sine_of_hour_angle() {
        let g = reference_at_equator().with_declination(-4.3);
        let step = 1.0 / (g.baseline_wavelengths * g.declination_deg.to_radians().cos());
        for h in [-0.05f64, -0.01, 0.0, 0.003, 0.02] {
            let h2 = h.sin() + step;
            let h2 = h2.asin();
            let a = g.expected_ew_phase(g.reference_frequency_hz, h);
            let b = g.expected_ew_phase(g.reference_frequency_hz, h2);
            assert!(wrap(a - b).abs() < 1e-9, "h={h}: {a} vs {b}");
        }
    }

    #[test]
    fn ew_phase_near_meridian_repeats_after_one_fringe() {
        let g = reference_at_equator();
        let period_rad = g.computed_fringe_period_ra_hours().unwrap() / RA_HOURS_PER_RADIAN;
        // sin(H) ~ H; residual is 2 pi B_lambda (H^3 / 6) at most
        for h in [-0.01, -0.001, 0.0, 0.001] {
            let a = g.expected_ew_phase(g.reference_frequency_hz, h);
            let b = g.expected_ew_phase(g.reference_frequency_hz, h + period_rad);
            let bound = TAU * 33.0 * (h.abs() + period_rad).powi(3) / 6.0 * 3.0 + 1e-9;
            assert!(wrap(a - b).abs() < bound, "h={h}");
        }
    }

    #[test]
    fn fringe_period_examples() {
        let g = reference_at_equator();
        assert_abs_diff_eq!(g.fringe_period_ra_hours().unwrap(), 0.11575, epsilon = 1e-5);
        let g43 = g.with_declination(-4.3);
        assert_abs_diff_eq!(g43.fringe_period_ra_hours().unwrap(), 0.11608, epsilon = 1e-5);
        let long = BaselineGeometry { baseline_wavelengths: 1e12, ..g };
        assert!(long.fringe_period_ra_hours().unwrap() < 1e-11);
        let pole = g.with_declination(90.0);
        assert_eq!(pole.fringe_period_ra_hours().unwrap_err().class(), "degenerate-geometry");
        assert!(g.with_declination(-90.0).fringe_period_ra_hours().is_err());
    }

    #[test]
    fn override_is_scaled_by_declination() {
        let g = BaselineGeometry {
            fringe_period_override_hours: Some(0.1168),
            ..reference_at_equator()
        };
        assert_eq!(g.fringe_period_ra_hours().unwrap(), 0.1168);
        assert_abs_diff_eq!(g.computed_fringe_period_ra_hours().unwrap(), 0.11575, epsilon = 1e-5);
    }

    #[test]
    fn alias_offsets() {
        let g = BaselineGeometry {
            fringe_period_override_hours: Some(0.1168),
            ..reference_at_equator()
        };
        let w = g.alias_bin_offsets(0.0075).unwrap();
        assert_abs_diff_eq!(w.bins_per_period, 15.57, epsilon = 0.01);
        assert_eq!(w.offsets, [-16, 16]);
        // observed alias spacings, in bins
        for spacing_hours in [0.105, 0.120] {
            let bins = (spacing_hours / 0.0075_f64).round() as i64;
            assert!(w.contains_offset(bins));
            assert!(w.contains_offset(-bins));
        }
        assert!(!w.contains_offset(0));
        assert!(!w.contains_offset(10));

        let unit = BaselineGeometry {
            fringe_period_override_hours: Some(0.0075),
            ..reference_at_equator()
        };
        assert_eq!(unit.alias_bin_offsets(0.0075).unwrap().offsets, [-1, 1]);
        assert!(g.alias_bin_offsets(0.0).is_err());
    }

    #[test]
    fn window_bins_wrap() {
        let w = AliasWindows {
            bins_per_period: 15.57,
            offsets: [-16, 16],
            half_window: 2,
        };
        assert_eq!(w.window_bins(3199, 16, 3200), vec![13, 14, 15, 16, 17]);
        assert_eq!(w.window_bins(1, -16, 3200), vec![3183, 3184, 3185, 3186, 3187]);
    }

    #[test]
    fn validation() {
        assert!(BaselineGeometry::new(33.0, 1425e6, 0.0, -82e-9).is_ok());
        assert!(BaselineGeometry::new(0.0, 1425e6, 0.0, -82e-9).is_err());
        assert!(BaselineGeometry::new(33.0, -1.0, 0.0, -82e-9).is_err());
        assert!(BaselineGeometry::new(33.0, 1425e6, 91.0, -82e-9).is_err());
        assert!(BaselineGeometry::new(33.0, 1425e6, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn sky_direction_wraps() {
        assert_abs_diff_eq!(SkyDirection::new(25.5, 0.0).ra_hours, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(SkyDirection::new(-1.0, 0.0).ra_hours, 23.0, epsilon = 1e-12);
        let a = SkyDirection::new(0.0, 0.0);
        assert_abs_diff_eq!(a.separation_deg(&SkyDirection::new(1.0, 0.0)), 15.0, epsilon = 1e-9);
        assert_abs_diff_eq!(a.separation_deg(&SkyDirection::new(0.0, -5.3)), 5.3, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn delay_is_odd(h in -1.5f64..1.5, dec in -89.0f64..89.0) {
            let g = reference_at_equator().with_declination(dec);
            prop_assert_eq!(g.geometric_delay(-h), -g.geometric_delay(h));
        }

        #[test]
        fn pair_geometric_phase_is_small_inside_a_bin(
            df in 0.0f64..7e6,
            h in -HALF_BIN_RAD..HALF_BIN_RAD,
            dec in -60.0f64..60.0,
        ) {
            let g = reference_at_equator().with_declination(dec);
            prop_assert!((TAU * df * g.geometric_delay(h)).abs() < 1.1e-3);
        }

        #[test]
        fn fringe_period_increases_with_abs_dec(a in 0.0f64..89.0, b in 0.0f64..89.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let g = reference_at_equator();
            let pa = g.with_declination(a).fringe_period_ra_hours().unwrap();
            let pb = g.with_declination(-b).fringe_period_ra_hours().unwrap();
            prop_assert_eq!(a < b, pa < pb);
        }
    }
}
