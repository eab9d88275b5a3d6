use crate::error::{Error, Result};

use super::GreensResult;

/// Default height floor for [`find_peaks`].
pub const PEAK_FLOOR: f64 = 1e-3;

/// Evenly spaced real frequencies (Hartree) with broadening `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_points: usize,
    pub eta: f64,
}

impl FrequencyGrid {
    pub fn new(omega_min: f64, omega_max: f64, n_points: usize, eta: f64) -> Result<Self> {
        if !(omega_min < omega_max) || n_points < 2 || !(eta > 0.0) {
            return Err(Error::Usage(format!(
                "invalid frequency grid [{omega_min}, {omega_max}] with {n_points} points and eta {eta}"
            )));
        }
        Ok(Self {
            omega_min,
            omega_max,
            n_points,
            eta,
        })
    }

    pub fn spacing(&self) -> f64 {
        (self.omega_max - self.omega_min) / (self.n_points - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_points).map(|i| self.omega_min + i as f64 * h).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub omega: f64,
    pub height: f64,
}

/// Strict local maxima of `values` above `floor`, refined by a parabola
/// through the three surrounding points.
pub fn find_peaks_in(omega: &[f64], values: &[f64], floor: f64) -> Vec<Peak> {
    let mut out = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if b > a && b > c && b > floor {
            let curvature = a - 2.0 * b + c;
            let delta = if curvature != 0.0 { 0.5 * (a - c) / curvature } else { 0.0 };
            let h = omega[i + 1] - omega[i];
            out.push(Peak {
                omega: omega[i] + delta * h,
                height: b - 0.25 * (a - c) * delta,
            });
        }
    }
    out
}

/// Peaks of the spectral function of `result` above [`PEAK_FLOOR`].
pub fn find_peaks(result: &GreensResult) -> Vec<Peak> {
    find_peaks_in(&result.grid.points(), &result.spectral, PEAK_FLOOR)
}
