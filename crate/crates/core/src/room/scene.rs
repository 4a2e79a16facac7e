//! Randomised room and speaker placement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{azimuth_deg, distance, ArrayGeometry};
use super::rir::{RoomSpec, DEFAULT_IMAGE_ORDER, SPEED_OF_SOUND};
use crate::error::{Error, Result};

/// Total draws allowed before scene sampling gives up.
pub const MAX_SCENE_DRAWS: usize = 10_000;

/// Sampling ranges and placement constraints for [`sample_scene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRanges {
    pub length: (f64, f64),
    pub width: (f64, f64),
    pub height: (f64, f64),
    pub absorption: (f64, f64),
    /// Height ranges of the array centre and of talkers.
    pub array_height: (f64, f64),
    pub source_height: (f64, f64),
    /// Clearance from every wall.
    pub wall_margin: f64,
    /// Minimum horizontal talker distance from the array centre.
    pub min_source_distance: f64,
    /// At most `max_in_sector` talkers may share any window this wide.
    pub sector_deg: f64,
    pub max_in_sector: usize,
    /// Optional minimum pairwise azimuth separation.
    pub min_separation_deg: Option<f64>,
    pub max_image_order: usize,
}

impl Default for SceneRanges {
    fn default() -> Self {
        SceneRanges {
            length: (1.0, 10.0),
            width: (1.0, 10.0),
            height: (2.5, 4.0),
            absorption: (0.2, 0.5),
            array_height: (1.0, 1.6),
            source_height: (1.2, 1.8),
            wall_margin: 0.3,
            min_source_distance: 0.3,
            sector_deg: 30.0,
            max_in_sector: 2,
            min_separation_deg: None,
            max_image_order: DEFAULT_IMAGE_ORDER,
        }
    }
}

/// A sampled room with talker azimuths seen from the array centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub room: RoomSpec,
    pub azimuths_deg: Vec<f64>,
}

/// Circular distance between two azimuths in degrees.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// True when some window of `sector_deg` degrees holds more than
/// `max_in_sector` of the azimuths.
pub fn violates_sector_rule(azimuths: &[f64], sector_deg: f64, max_in_sector: usize) -> bool {
    let n = azimuths.len();
    if n <= max_in_sector {
        return false;
    }
    let mut sorted: Vec<f64> = azimuths.iter().map(|a| a.rem_euclid(360.0)).collect();
    sorted.sort_by(f64::total_cmp);
    (0..n).any(|i| {
        let last = sorted[(i + max_in_sector) % n];
        (last - sorted[i]).rem_euclid(360.0) <= sector_deg
    })
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Draws a room, an array position and `num_speakers` talker positions.
/// Talkers are placed one at a time; a draw that would break the sector rule
/// or the separation/distance constraints is redrawn.
pub fn sample_scene(
    seed: u64,
    num_speakers: usize,
    geometry: &ArrayGeometry,
    ranges: &SceneRanges,
) -> Result<Scene> {
    if num_speakers == 0 {
        return Err(Error::Sampling("need at least one speaker".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = 0;
    loop {
        let dims = [
            uniform(&mut rng, ranges.length),
            uniform(&mut rng, ranges.width),
            uniform(&mut rng, ranges.height),
        ];
        let absorption = uniform(&mut rng, ranges.absorption);
        let margin = ranges.wall_margin + geometry.radius();
        if dims[0] <= 2.0 * margin || dims[1] <= 2.0 * margin {
            return Err(Error::Sampling(format!(
                "room {dims:?} too small for the array"
            )));
        }
        let center = [
            uniform(&mut rng, (margin, dims[0] - margin)),
            uniform(&mut rng, (margin, dims[1] - margin)),
            uniform(&mut rng, ranges.array_height),
        ];
        if let Some((positions, azimuths_deg)) =
            place_talkers(&mut rng, &mut draws, num_speakers, dims, center, ranges)
        {
            return Ok(Scene {
                room: RoomSpec {
                    dims,
                    absorption,
                    array_center: center,
                    source_positions: positions,
                    max_image_order: ranges.max_image_order,
                    speed_of_sound: SPEED_OF_SOUND,
                },
                azimuths_deg,
            });
        }
        if draws >= MAX_SCENE_DRAWS {
            return Err(Error::Sampling(format!(
                "no valid placement for {num_speakers} speakers after {MAX_SCENE_DRAWS} draws"
            )));
        }
    }
}

/// Draws per room before the room itself is redrawn.
const DRAWS_PER_ROOM: usize = 500;

fn place_talkers(
    rng: &mut ChaCha8Rng,
    draws: &mut usize,
    num_speakers: usize,
    dims: [f64; 3],
    center: [f64; 3],
    ranges: &SceneRanges,
) -> Option<(Vec<[f64; 3]>, Vec<f64>)> {
    let m = ranges.wall_margin;
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(num_speakers);
    let mut azimuths: Vec<f64> = Vec::with_capacity(num_speakers);
    let mut local = 0;
    while positions.len() < num_speakers {
        if *draws >= MAX_SCENE_DRAWS || local >= DRAWS_PER_ROOM {
            return None;
        }
        *draws += 1;
        local += 1;
        let p = [
            uniform(rng, (m, dims[0] - m)),
            uniform(rng, (m, dims[1] - m)),
            uniform(rng, ranges.source_height),
        ];
        let flat = [p[0], p[1], center[2]];
        if distance(&flat, &center) < ranges.min_source_distance {
            continue;
        }
        let az = azimuth_deg(&center, &p);
        if let Some(sep) = ranges.min_separation_deg {
            if azimuths.iter().any(|a| angular_distance(*a, az) < sep) {
                continue;
            }
        }
        let mut trial = azimuths.clone();
        trial.push(az);
        if violates_sector_rule(&trial, ranges.sector_deg, ranges.max_in_sector) {
            continue;
        }
        positions.push(p);
        azimuths.push(az);
    }
    Some((positions, azimuths))
}
