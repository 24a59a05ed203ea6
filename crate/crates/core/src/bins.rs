//! 72-bin circular encoding and the circular Gaussian training target.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_degrees, NUM_BINS};

fn check_bin(bin: usize) -> Result<()> {
    if bin < NUM_BINS {
        Ok(())
    } else {
        Err(Error::BinOutOfRange(bin as i64))
    }
}

/// Wraparound distance between two bins, `min(|i-j|, 72-|i-j|)`.
pub fn circular_bin_distance(i: usize, j: usize) -> Result<usize> {
    check_bin(i)?;
    check_bin(j)?;
    let d = i.abs_diff(j);
    Ok(d.min(NUM_BINS - d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTargetParams {
    sigma: f64,
}

impl GaussianTargetParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(Self { sigma })
        } else {
            Err(Error::InvalidArgument(format!(
                "sigma must be positive and finite, got {sigma}"
            )))
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Target value at bin distance `d`.
    pub fn value_at_distance(&self, d: usize) -> f64 {
        let d = d as f64;
        (-(d * d) / (2.0 * self.sigma * self.sigma)).exp() / ((2.0 * PI).sqrt() * self.sigma)
    }

    /// Peak value `1 / (sqrt(2 pi) sigma)`.
    pub fn peak(&self) -> f64 {
        1.0 / ((2.0 * PI).sqrt() * self.sigma)
    }
}

impl Default for GaussianTargetParams {
    fn default() -> Self {
        Self { sigma: 4.0 }
    }
}

/// The circular Gaussian target over the 72 bins. Not renormalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetDist72 {
    pub values: [f64; NUM_BINS],
}

impl TargetDist72 {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn target_distribution(l_gt: usize, params: GaussianTargetParams) -> Result<TargetDist72> {
    check_bin(l_gt)?;
    let mut values = [0.0; NUM_BINS];
    for (i, v) in values.iter_mut().enumerate() {
        let d = i.abs_diff(l_gt).min(NUM_BINS - i.abs_diff(l_gt));
        *v = params.value_at_distance(d);
    }
    Ok(TargetDist72 { values })
}

/// Circular absolute difference of two angles in degrees, in `[0, 180]`.
pub fn angular_error(pred_deg: f64, gt_deg: f64) -> f64 {
    // Wrapping each angle first keeps the result exactly symmetric in its arguments.
    let delta = (wrap_degrees(pred_deg) - wrap_degrees(gt_deg)).abs();
    delta.min(360.0 - delta)
}

/// Camera point of view relative to the person.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quadrant {
    Front,
    Back,
    Left,
    Right,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::Front, Quadrant::Back, Quadrant::Left, Quadrant::Right];

    /// Front `[135,225)`, Left `[45,135)`, Right `[225,315)`, Back the rest.
    pub fn of(theta_deg: f64) -> Quadrant {
        let t = wrap_degrees(theta_deg);
        if (135.0..225.0).contains(&t) {
            Quadrant::Front
        } else if (45.0..135.0).contains(&t) {
            Quadrant::Left
        } else if (225.0..315.0).contains(&t) {
            Quadrant::Right
        } else {
            Quadrant::Back
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Quadrant::Front => "Front",
            Quadrant::Back => "Back",
            Quadrant::Left => "Left",
            Quadrant::Right => "Right",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn quadrant_breakdown(gts: &[f64]) -> Vec<Quadrant> {
    gts.iter().map(|&g| Quadrant::of(g)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_distance_examples() {
        assert_eq!(circular_bin_distance(0, 71).unwrap(), 1);
        assert_eq!(circular_bin_distance(10, 46).unwrap(), 36);
        for k in 0..NUM_BINS {
            assert_eq!(circular_bin_distance(k, k).unwrap(), 0);
        }
        assert!(matches!(circular_bin_distance(72, 0), Err(Error::BinOutOfRange(72))));
    }

    #[test]
    fn target_examples() {
        let p = GaussianTargetParams::new(4.0).unwrap();
        let t = target_distribution(10, p).unwrap();
        assert_eq!(t.values[10], 1.0 / ((2.0 * PI).sqrt() * 4.0));
        let expected = 0.099_735_570_100_358_18 * (-0.5f64).exp();
        assert!((t.values[14] - expected).abs() < 1e-15);
        assert!((t.values[6] - expected).abs() < 1e-15);

        let t0 = target_distribution(0, p).unwrap();
        assert_eq!(t0.values[1], t0.values[71]);
        assert!(target_distribution(72, p).is_err());
    }

    #[test]
    fn sigma_must_be_positive() {
        assert!(GaussianTargetParams::new(0.0).is_err());
        assert!(GaussianTargetParams::new(-1.0).is_err());
        assert!(GaussianTargetParams::new(f64::NAN).is_err());
    }

    #[test]
    fn angular_error_examples() {
        assert_eq!(angular_error(359.0, 1.0), 2.0);
        assert_eq!(angular_error(90.0, 270.0), 180.0);
        assert_eq!(angular_error(123.4, 123.4), 0.0);
        assert_eq!(angular_error(-10.0, 10.0), 20.0);
    }

    #[test]
    fn quadrants() {
        assert_eq!(Quadrant::of(180.0), Quadrant::Front);
        assert_eq!(Quadrant::of(0.0), Quadrant::Back);
        assert_eq!(Quadrant::of(100.0), Quadrant::Left);
        assert_eq!(Quadrant::of(270.0), Quadrant::Right);
        assert_eq!(Quadrant::of(135.0), Quadrant::Front);
        assert_eq!(Quadrant::of(225.0), Quadrant::Right);
        assert_eq!(Quadrant::of(315.0), Quadrant::Back);
        assert_eq!(Quadrant::of(45.0), Quadrant::Left);
        assert_eq!(Quadrant::of(44.999), Quadrant::Back);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.5; 4]), 0);
    }
}
