//! Sidereal time and RA binning for a meridian-pointed drift scan.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasecal::wrap;

/// Solar seconds elapsed while local sidereal time advances one hour.
pub const SOLAR_SECONDS_PER_SIDEREAL_HOUR: f64 = 86_164.090_5 / 24.0;

/// Default RA bin width (3200 bins per 24 h).
pub const DEFAULT_RA_BIN_WIDTH_HOURS: f64 = 0.0075;

/// Local sidereal time in hours, `[0, 24)`, from the linear GMST relation.
pub fn local_sidereal_time_hours(mjd: f64, longitude_deg: f64) -> f64 {
    let days_since_j2000 = mjd - 51_544.5;
    let gmst = 18.697_374_558 + 24.065_709_824_419_08 * days_since_j2000;
    (gmst + longitude_deg / 15.0).rem_euclid(24.0)
}

/// Hour angle in radians, wrapped into `[-pi, pi)`.
pub fn hour_angle_rad(lst_hours: f64, ra_hours: f64) -> f64 {
    wrap((lst_hours - ra_hours) * PI / 12.0)
}

/// Fixed-width RA bins covering 24 hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaBinning {
    pub bin_width_hours: f64,
    pub n_bins: usize,
}

impl Default for RaBinning {
    fn default() -> Self {
        Self::new(DEFAULT_RA_BIN_WIDTH_HOURS).expect("default bin width is valid")
    }
}

impl RaBinning {
    pub fn new(bin_width_hours: f64) -> Result<Self> {
        if !(bin_width_hours.is_finite() && bin_width_hours > 0.0 && bin_width_hours <= 24.0) {
            return Err(Error::invalid(format!(
                "RA bin width must be in (0, 24] hours, got {bin_width_hours}"
            )));
        }
        let n_bins = (24.0 / bin_width_hours).round() as usize;
        Ok(Self {
            bin_width_hours,
            n_bins: n_bins.max(1),
        })
    }

    pub fn bin_of_ra(&self, ra_hours: f64) -> usize {
        let ra = ra_hours.rem_euclid(24.0);
        // nudge so that values printed as exact bin edges land in the upper bin
        let idx = (ra / self.bin_width_hours + 1e-9).floor() as usize;
        idx.min(self.n_bins - 1)
    }

    pub fn bin_start_hours(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width_hours
    }

    pub fn bin_center_hours(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.bin_width_hours
    }

    /// Signed bin offset `to - from` on the circle, in `[-n/2, n/2)`.
    pub fn offset(&self, from: usize, to: usize) -> i64 {
        let n = self.n_bins as i64;
        let d = (to as i64 - from as i64).rem_euclid(n);
        if d >= n / 2 {
            d - n
        } else {
            d
        }
    }

    pub fn shift(&self, bin: usize, offset: i64) -> usize {
        (bin as i64 + offset).rem_euclid(self.n_bins as i64) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bin_examples() {
        let b = RaBinning::default();
        assert_eq!(b.n_bins, 3200);
        assert_eq!(b.bin_of_ra(5.1675), 689);
        assert_eq!(b.bin_of_ra(0.0), 0);
        assert_eq!(b.bin_of_ra(23.99999), 3199);
        assert_eq!(b.bin_of_ra(24.0), 0);
        assert_eq!(b.bin_of_ra(8.8425), 1179);
        assert_eq!(b.bin_of_ra(5.25), 700);
    }

    #[test]
    fn offsets_are_circular() {
        let b = RaBinning::default();
        assert_eq!(b.offset(3199, 0), 1);
        assert_eq!(b.offset(0, 3199), -1);
        assert_eq!(b.shift(3199, 16), 15);
        assert_eq!(b.shift(3, -16), 3187);
    }

    #[test]
    fn sidereal_rate() {
        let a = local_sidereal_time_hours(60_500.0, 0.0);
        let b = local_sidereal_time_hours(60_500.0 + SOLAR_SECONDS_PER_SIDEREAL_HOUR / 86_400.0, 0.0);
        assert_abs_diff_eq!((b - a).rem_euclid(24.0), 1.0, epsilon = 1e-6);
        let east = local_sidereal_time_hours(60_500.0, 15.0);
        assert_abs_diff_eq!((east - a).rem_euclid(24.0), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn hour_angle_wraps() {
        assert_abs_diff_eq!(hour_angle_rad(1.0, 23.0), 2.0 * PI / 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hour_angle_rad(5.0, 5.0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_width() {
        assert!(RaBinning::new(0.0).is_err());
        assert!(RaBinning::new(-1.0).is_err());
    }
}
