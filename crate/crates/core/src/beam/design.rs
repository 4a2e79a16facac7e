//! Frequency-wise constrained least-squares fit of a fixed beam to a
//! second-order differential target pattern.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::steering::{response, steering_vector};
use crate::error::{Error, Result};
use crate::linalg::{cdot, cholesky_solve, CMatrix};
use crate::room::{ArrayGeometry, SPEED_OF_SOUND};

/// Second-order pattern `a0 + a1 cos(t) + a2 cos(t)^2`, unity at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPattern {
    /// `(5 cos^2 + 2 cos - 1) / 6`; nulls near 73° and 134°, rear lobe -9.5 dB.
    Hypercardioid,
    /// Maximum front-to-back power ratio; nulls near 104° and 144°, rear -24 dB.
    Supercardioid,
    /// `((1 + cos) / 2)^2`; double null at 180°.
    Cardioid,
    Custom([f64; 3]),
}

impl TargetPattern {
    pub fn coefficients(self) -> [f64; 3] {
        match self {
            TargetPattern::Hypercardioid => [-1.0 / 6.0, 2.0 / 6.0, 5.0 / 6.0],
            TargetPattern::Supercardioid => [0.088_553_97, 0.468_624_00, 0.442_822_03],
            TargetPattern::Cardioid => [0.25, 0.5, 0.25],
            TargetPattern::Custom(a) => a,
        }
    }

    /// Pattern value at `offset_deg` from the look direction.
    pub fn eval(self, offset_deg: f64) -> f64 {
        let [a0, a1, a2] = self.coefficients();
        let c = offset_deg.to_radians().cos();
        a0 + a1 * c + a2 * c * c
    }

    /// Angles in [0, 180] where the pattern crosses zero.
    pub fn nulls_deg(self) -> Vec<f64> {
        let [a0, a1, a2] = self.coefficients();
        let mut roots = Vec::new();
        if a2.abs() < 1e-15 {
            if a1.abs() > 1e-15 {
                roots.push(-a0 / a1);
            }
        } else {
            let disc = a1 * a1 - 4.0 * a2 * a0;
            if disc >= 0.0 {
                roots.push((-a1 + disc.sqrt()) / (2.0 * a2));
                roots.push((-a1 - disc.sqrt()) / (2.0 * a2));
            }
        }
        let mut out: Vec<f64> = roots
            .into_iter()
            .filter(|c| (-1.0..=1.0).contains(c))
            .map(|c| c.acos().to_degrees())
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    pub target: TargetPattern,
    /// Spacing of the angular fitting grid.
    pub angle_step_deg: f64,
    /// Minimum white-noise gain, in dB, at every design frequency.
    pub wng_floor_db: f64,
    pub speed_of_sound: f64,
}

impl Default for DesignParams {
    fn default() -> Self {
        DesignParams {
            target: TargetPattern::Supercardioid,
            angle_step_deg: 5.0,
            wng_floor_db: -15.0,
            speed_of_sound: SPEED_OF_SOUND,
        }
    }
}

/// `count` log-spaced frequencies from `lo` to `hi` Hz inclusive.
pub fn log_frequency_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|k| lo * (ratio * k as f64).exp()).collect()
}

/// White-noise gain in dB of a weight vector that is distortionless toward
/// `look`: `|wᴴd|^2 / ||w||^2`.
pub fn white_noise_gain_db(weights: &[Complex64], look: &[Complex64]) -> f64 {
    let num = response(weights, look).norm_sqr();
    let den: f64 = weights.iter().map(|w| w.norm_sqr()).sum();
    10.0 * (num / den).log10()
}

struct FitProblem {
    gram: CMatrix,
    cross: Vec<Complex64>,
    look: Vec<Complex64>,
}

impl FitProblem {
    fn new(geometry: &ArrayGeometry, look_deg: f64, freq: f64, params: &DesignParams) -> Self {
        let m = geometry.num_mics();
        let mut gram = CMatrix::zeros(m);
        let mut cross = vec![Complex64::new(0.0, 0.0); m];
        let steps = (360.0 / params.angle_step_deg).round() as usize;
        for j in 0..steps {
            let theta = j as f64 * params.angle_step_deg;
            let d = steering_vector(geometry, theta, freq, params.speed_of_sound);
            gram.add_outer(&d, 1.0);
            let b = params.target.eval(theta - look_deg);
            for (c, x) in cross.iter_mut().zip(&d) {
                *c += x * b;
            }
        }
        FitProblem {
            gram,
            cross,
            look: steering_vector(geometry, look_deg, freq, params.speed_of_sound),
        }
    }

    /// Constrained minimiser of `sum |wᴴd - b|^2 + loading ||w||^2` with `wᴴd_look = 1`.
    fn solve(&self, loading: f64) -> Result<Vec<Complex64>> {
        let mut q = self.gram.clone();
        q.add_diagonal(loading);
        let l = q
            .cholesky(1e-13)
            .map_err(|e| Error::Design(format!("normal equations ill-conditioned: {e}")))?;
        let w0 = cholesky_solve(&l, &self.cross);
        let u = cholesky_solve(&l, &self.look);
        let denom = cdot(&self.look, &u);
        if denom.norm() < 1e-300 {
            return Err(Error::Design("look direction unreachable".into()));
        }
        let scale = (Complex64::new(1.0, 0.0) - cdot(&self.look, &w0)) / denom;
        Ok(w0.iter().zip(&u).map(|(a, b)| a + b * scale).collect())
    }
}

/// Designs one beam: per frequency, the weights minimise the squared
/// deviation from `params.target` rotated to `look_deg` over the angular grid,
/// subject to unit response at the look direction. Diagonal loading is the
/// smallest (to bisection precision) that meets the white-noise-gain floor.
///
/// Returns F rows of M weights.
pub fn design_beam(
    geometry: &ArrayGeometry,
    look_deg: f64,
    f_grid: &[f64],
    params: &DesignParams,
) -> Result<Vec<Vec<Complex64>>> {
    if !(params.angle_step_deg > 0.0) || (360.0 / params.angle_step_deg).fract().abs() > 1e-9 {
        return Err(Error::Design(format!(
            "angle step {} does not divide 360",
            params.angle_step_deg
        )));
    }
    let floor = params.wng_floor_db;
    f_grid
        .iter()
        .map(|&f| {
            if !(f > 0.0) {
                return Err(Error::Design(format!(
                    "design frequency {f} must be positive"
                )));
            }
            let problem = FitProblem::new(geometry, look_deg, f, params);
            let scale = problem.gram.trace().re / geometry.num_mics() as f64;
            let meets = |w: &[Complex64]| white_noise_gain_db(w, &problem.look) >= floor;
            let (mut lo, mut hi) = (-10.0f64, 4.0f64);
            let w = problem.solve(scale * 10f64.powf(lo))?;
            if meets(&w) {
                return Ok(w);
            }
            let mut best = problem.solve(scale * 10f64.powf(hi))?;
            if !meets(&best) {
                return Err(Error::Design(format!(
                    "white-noise gain floor {floor} dB unreachable at {f:.1} Hz"
                )));
            }
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                let w = problem.solve(scale * 10f64.powf(mid))?;
                if meets(&w) {
                    hi = mid;
                    best = w;
                } else {
                    lo = mid;
                }
            }
            Ok(best)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_shapes() {
        for t in [
            TargetPattern::Hypercardioid,
            TargetPattern::Supercardioid,
            TargetPattern::Cardioid,
        ] {
            assert!((t.eval(0.0) - 1.0).abs() < 1e-7, "{t:?}");
        }
        let hyper = TargetPattern::Hypercardioid.nulls_deg();
        assert_eq!(hyper.len(), 2);
        assert!(
            (hyper[0] - 73.15).abs() < 0.05 && (hyper[1] - 133.62).abs() < 0.05,
            "{hyper:?}"
        );
        assert!(TargetPattern::Supercardioid.eval(180.0).abs() < 0.07);
        assert_eq!(TargetPattern::Cardioid.nulls_deg(), vec![180.0]);
    }

    #[test]
    fn grid_endpoints() {
        let g = log_frequency_grid(100.0, 3900.0, 64);
        assert_eq!(g.len(), 64);
        assert!((g[0] - 100.0).abs() < 1e-9 && (g[63] - 3900.0).abs() < 1e-9);
    }

    #[test]
    fn distortionless_and_wng_floor() {
        let geom = ArrayGeometry::circular_seven();
        let grid = log_frequency_grid(100.0, 3900.0, 16);
        let params = DesignParams::default();
        let w = design_beam(&geom, 40.0, &grid, &params).unwrap();
        for (wf, f) in w.iter().zip(&grid) {
            let d = steering_vector(&geom, 40.0, *f, params.speed_of_sound);
            assert!((response(wf, &d) - Complex64::new(1.0, 0.0)).norm() < 1e-6);
            assert!(white_noise_gain_db(wf, &d) >= -15.0 - 1e-9);
        }
    }

    #[test]
    fn unreachable_floor_is_a_design_error() {
        let geom = ArrayGeometry::circular_seven();
        let params = DesignParams {
            wng_floor_db: 20.0,
            ..DesignParams::default()
        };
        assert!(matches!(
            design_beam(&geom, 0.0, &[1000.0], &params),
            Err(Error::Design(_))
        ));
    }
}
