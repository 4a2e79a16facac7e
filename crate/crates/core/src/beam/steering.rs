use std::f64::consts::PI;

use num_complex::Complex64;

use crate::room::ArrayGeometry;

/// Far-field plane-wave gains for a talker at `azimuth_deg` (elevation 0).
///
/// Element `m` is `exp(-j 2 pi f tau_m)` with `tau_m = -(u . p_m) / c`, where
/// `u` points from the array toward the talker. A mic at the origin gets 1.
pub fn steering_vector(
    geometry: &ArrayGeometry,
    azimuth_deg: f64,
    freq_hz: f64,
    c: f64,
) -> Vec<Complex64> {
    let (s, co) = azimuth_deg.to_radians().sin_cos();
    geometry
        .positions()
        .iter()
        .map(|p| {
            let tau = -(co * p[0] + s * p[1]) / c;
            Complex64::from_polar(1.0, -2.0 * PI * freq_hz * tau)
        })
        .collect()
}

/// `wᴴ d`.
pub fn response(weights: &[Complex64], steering: &[Complex64]) -> Complex64 {
    weights
        .iter()
        .zip(steering)
        .map(|(w, d)| w.conj() * d)
        .sum()
}
