//! Shoebox image-source room impulse responses.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::geometry::{distance, ArrayGeometry};
use crate::error::{Error, Result};

/// Half-width of the windowed-sinc fractional delay kernel (81 taps).
pub const SINC_HALF_WIDTH: usize = 40;

pub const DEFAULT_IMAGE_ORDER: usize = 6;
pub const DEFAULT_RIR_LEN: usize = 4096;
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Shoebox room with one uniform absorption coefficient on all six walls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Length, width, height in metres.
    pub dims: [f64; 3],
    pub absorption: f64,
    pub array_center: [f64; 3],
    pub source_positions: Vec<[f64; 3]>,
    pub max_image_order: usize,
    pub speed_of_sound: f64,
}

impl RoomSpec {
    /// Pressure reflection coefficient of every wall.
    pub fn reflection(&self) -> f64 {
        (1.0 - self.absorption).max(0.0).sqrt()
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        p.iter().zip(&self.dims).all(|(x, d)| *x > 0.0 && x < d)
    }

    pub fn mic_positions(&self, geometry: &ArrayGeometry) -> Vec<[f64; 3]> {
        geometry
            .positions()
            .iter()
            .map(|p| {
                [
                    self.array_center[0] + p[0],
                    self.array_center[1] + p[1],
                    self.array_center[2] + p[2],
                ]
            })
            .collect()
    }

    pub fn validate(&self, geometry: &ArrayGeometry) -> Result<()> {
        if self.dims.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::Geometry(format!(
                "invalid room dimensions {:?}",
                self.dims
            )));
        }
        if !(self.absorption > 0.0 && self.absorption <= 1.0) {
            return Err(Error::Geometry(format!(
                "absorption {} outside (0, 1]",
                self.absorption
            )));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(Error::Geometry("speed of sound must be positive".into()));
        }
        if self.source_positions.is_empty() {
            return Err(Error::Geometry("room has no sources".into()));
        }
        for (i, s) in self.source_positions.iter().enumerate() {
            if !self.contains(s) {
                return Err(Error::Geometry(format!(
                    "source {i} at {s:?} is outside the room"
                )));
            }
        }
        for m in self.mic_positions(geometry) {
            if !self.contains(&m) {
                return Err(Error::Geometry(format!(
                    "microphone at {m:?} is outside the room"
                )));
            }
        }
        Ok(())
    }
}

/// Position of image `index` along one axis of length `len`, and its
/// reflection count. Even indices translate the source, odd ones mirror it.
fn image_coordinate(index: i64, source: f64, len: f64) -> f64 {
    let shift = index as f64 * len;
    if index.rem_euclid(2) == 0 {
        shift + source
    } else {
        shift + len - source
    }
}

/// 81-tap Hann-windowed sinc centred on `delay` samples, scaled by `gain`,
/// accumulated into `out`. Taps outside the buffer are dropped.
pub fn add_fractional_impulse(out: &mut [f64], delay: f64, gain: f64) {
    let half = SINC_HALF_WIDTH as f64;
    let lo = (delay - half).ceil().max(0.0) as usize;
    let hi = (delay + half).floor();
    if hi < 0.0 {
        return;
    }
    let hi = (hi as usize).min(out.len().saturating_sub(1));
    for n in lo..=hi {
        let x = n as f64 - delay;
        let sinc = if x.abs() < 1e-12 {
            1.0
        } else {
            (PI * x).sin() / (PI * x)
        };
        let window = 0.5 * (1.0 + (PI * x / half).cos());
        out[n] += gain * sinc * window;
    }
}

/// Multichannel impulse response from source `source_index` to every mic of
/// `geometry` placed at the room's array centre. Returns M rows of `rir_len`.
///
/// Images are indexed by an integer triple with each component bounded by
/// `max_image_order`, so `(2 * order + 1)^3` images are summed. An image with
/// `n` wall reflections at distance `d` contributes `r^n / (4 pi d)` at delay
/// `d / c * fs`, with `r = sqrt(1 - absorption)`.
pub fn image_method_rir(
    room: &RoomSpec,
    source_index: usize,
    geometry: &ArrayGeometry,
    rir_len: usize,
    sample_rate: u32,
) -> Result<Vec<Vec<f64>>> {
    room.validate(geometry)?;
    let src = *room.source_positions.get(source_index).ok_or_else(|| {
        Error::Geometry(format!(
            "source index {source_index} out of range for {} sources",
            room.source_positions.len()
        ))
    })?;
    let fs = sample_rate as f64;
    let mics = room.mic_positions(geometry);
    for m in &mics {
        let direct = distance(&src, m) / room.speed_of_sound * fs;
        if direct.round() as usize >= rir_len {
            return Err(Error::Length(format!(
                "rir length {rir_len} does not reach the direct-path delay of {direct:.1} samples"
            )));
        }
    }
    let r = room.reflection();
    let order = room.max_image_order as i64;
    let mut out = vec![vec![0.0; rir_len]; mics.len()];
    for i in -order..=order {
        let x = image_coordinate(i, src[0], room.dims[0]);
        for j in -order..=order {
            let y = image_coordinate(j, src[1], room.dims[1]);
            for k in -order..=order {
                let z = image_coordinate(k, src[2], room.dims[2]);
                let reflections = (i.abs() + j.abs() + k.abs()) as i32;
                let strength = r.powi(reflections);
                if strength == 0.0 {
                    continue;
                }
                let image = [x, y, z];
                for (row, mic) in out.iter_mut().zip(&mics) {
                    let d = distance(&image, mic);
                    add_fractional_impulse(
                        row,
                        d / room.speed_of_sound * fs,
                        strength / (4.0 * PI * d),
                    );
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_mic() -> ArrayGeometry {
        ArrayGeometry::new(vec![[0.0; 3]]).unwrap()
    }

    fn room(absorption: f64, order: usize) -> RoomSpec {
        RoomSpec {
            dims: [8.0, 6.0, 3.0],
            absorption,
            array_center: [1.0, 2.0, 1.5],
            source_positions: vec![[4.43, 2.0, 1.5]],
            max_image_order: order,
            speed_of_sound: 343.0,
        }
    }

    #[test]
    fn direct_path_tap() {
        let rir = image_method_rir(&room(0.3, 0), 0, &single_mic(), 256, 8000).unwrap();
        let want = 1.0 / (4.0 * PI * 3.43);
        assert!((rir[0][80] - want).abs() < 1e-12);
        // Integer delay: the sinc vanishes on every other sample.
        for (n, v) in rir[0].iter().enumerate() {
            if n != 80 {
                assert!(v.abs() < 1e-15, "tap {n} = {v}");
            }
        }
    }

    #[test]
    fn full_absorption_leaves_direct_path() {
        let direct = image_method_rir(&room(1.0, 0), 0, &single_mic(), 512, 8000).unwrap();
        let full = image_method_rir(&room(1.0, 3), 0, &single_mic(), 512, 8000).unwrap();
        assert_eq!(direct, full);
    }

    #[test]
    fn image_coordinates() {
        assert_eq!(image_coordinate(0, 1.0, 8.0), 1.0);
        assert_eq!(image_coordinate(1, 1.0, 8.0), 15.0);
        assert_eq!(image_coordinate(-1, 1.0, 8.0), -1.0);
        assert_eq!(image_coordinate(2, 1.0, 8.0), 17.0);
        assert_eq!(image_coordinate(-2, 1.0, 8.0), -15.0);
    }

    #[test]
    fn errors() {
        let mut bad = room(0.3, 1);
        bad.source_positions[0] = [9.0, 1.0, 1.0];
        assert!(matches!(
            image_method_rir(&bad, 0, &single_mic(), 512, 8000),
            Err(Error::Geometry(_))
        ));
        assert!(matches!(
            image_method_rir(&room(0.3, 1), 0, &single_mic(), 50, 8000),
            Err(Error::Length(_))
        ));
    }

    #[test]
    fn energy_non_increasing_in_absorption() {
        let g = ArrayGeometry::circular_seven();
        let e = |a| -> f64 {
            image_method_rir(&room(a, 4), 0, &g, 4096, 8000)
                .unwrap()
                .iter()
                .flatten()
                .map(|v| v * v)
                .sum()
        };
        assert!(e(0.2) >= e(0.5));
        assert!(e(0.5) >= e(1.0));
    }
}
