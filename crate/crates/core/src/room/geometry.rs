use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outer-mic radius of the seven-element array, in metres.
pub const CIRCULAR_ARRAY_RADIUS: f64 = 0.0425;

/// Microphone positions in metres relative to the array centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    mic_positions: Vec<[f64; 3]>,
}

impl ArrayGeometry {
    pub fn new(mic_positions: Vec<[f64; 3]>) -> Result<Self> {
        if mic_positions.is_empty() {
            return Err(Error::Geometry(
                "array needs at least one microphone".into(),
            ));
        }
        for (i, a) in mic_positions.iter().enumerate() {
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Geometry(format!(
                    "mic {i} has a non-finite coordinate"
                )));
            }
            for b in &mic_positions[i + 1..] {
                if distance(a, b) < 1e-9 {
                    return Err(Error::Geometry(format!("duplicate microphone at {a:?}")));
                }
            }
        }
        Ok(ArrayGeometry { mic_positions })
    }

    /// Centre mic (index 0) plus six mics on a 42.5 mm circle at 0°, 60°, ... 300°.
    pub fn circular_seven() -> Self {
        Self::circular(6, CIRCULAR_ARRAY_RADIUS, true)
    }

    pub fn circular(outer: usize, radius: f64, with_center: bool) -> Self {
        let mut mics = Vec::with_capacity(outer + 1);
        if with_center {
            mics.push([0.0, 0.0, 0.0]);
        }
        for k in 0..outer {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / outer as f64;
            mics.push([radius * phi.cos(), radius * phi.sin(), 0.0]);
        }
        ArrayGeometry {
            mic_positions: mics,
        }
    }

    pub fn num_mics(&self) -> usize {
        self.mic_positions.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.mic_positions
    }

    /// Largest mic distance from the array centre.
    pub fn radius(&self) -> f64 {
        self.mic_positions
            .iter()
            .map(|p| distance(p, &[0.0; 3]))
            .fold(0.0, f64::max)
    }

    /// Same mic order, every position rotated about the z axis.
    pub fn rotated(&self, degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        ArrayGeometry {
            mic_positions: self
                .mic_positions
                .iter()
                .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]])
                .collect(),
        }
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Horizontal-plane azimuth of `to` seen from `from`, in [0, 360) degrees.
pub fn azimuth_deg(from: &[f64; 3], to: &[f64; 3]) -> f64 {
    (to[1] - from[1])
        .atan2(to[0] - from[0])
        .to_degrees()
        .rem_euclid(360.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_mic_layout() {
        let g = ArrayGeometry::circular_seven();
        assert_eq!(g.num_mics(), 7);
        assert_eq!(g.positions()[0], [0.0; 3]);
        for p in &g.positions()[1..] {
            assert!((distance(p, &[0.0; 3]) - 0.0425).abs() < 1e-15);
        }
        assert!((azimuth_deg(&[0.0; 3], &g.positions()[2]) - 60.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_mics_rejected() {
        assert!(ArrayGeometry::new(vec![[0.0; 3], [0.0; 3]]).is_err());
        assert!(ArrayGeometry::new(vec![]).is_err());
    }
}
