use std::f64::consts::PI;

use beamsep::beam::{
    default_frequency_grid, design_bank, design_beam, BeamformerBank, DesignParams, TargetPattern,
};
use beamsep::dsp::{MultichannelWave, StftConfig};
use beamsep::room::ArrayGeometry;
use num_complex::Complex64;

/// Independent re-derivation of the beam response: plane-wave phase from
/// the path-length difference, then `sum conj(w) d`.
fn direct_response(
    weights: &[Complex64],
    mics: &[[f64; 3]],
    az_deg: f64,
    f: f64,
    c: f64,
) -> Complex64 {
    let az = az_deg * PI / 180.0;
    let mut acc = Complex64::new(0.0, 0.0);
    for (w, p) in weights.iter().zip(mics) {
        // A mic displaced toward the talker hears it earlier by (u . p) / c.
        let lead = (az.cos() * p[0] + az.sin() * p[1]) / c;
        acc += w.conj() * Complex64::new(0.0, 2.0 * PI * f * lead).exp();
    }
    acc
}

fn default_bank() -> BeamformerBank {
    design_bank(
        &ArrayGeometry::circular_seven(),
        12,
        &default_frequency_grid(),
        &DesignParams::default(),
    )
    .unwrap()
}

#[test]
fn hypercardioid_null_depth_at_1khz() {
    let g = ArrayGeometry::circular_seven();
    let params = DesignParams {
        target: TargetPattern::Hypercardioid,
        ..DesignParams::default()
    };
    let w = design_beam(&g, 0.0, &[1000.0], &params).unwrap();
    // Sweep on a 1° grid and find the deepest point near each target null.
    let pattern: Vec<f64> = (0..360)
        .map(|a| {
            20.0 * direct_response(&w[0], g.positions(), a as f64, 1000.0, 343.0)
                .norm()
                .log10()
        })
        .collect();
    for null in TargetPattern::Hypercardioid.nulls_deg() {
        for side in [null, 360.0 - null] {
            let lo = (side - 5.0).round() as usize;
            let deepest = (lo..=lo + 10)
                .map(|a| pattern[a % 360])
                .fold(f64::MAX, f64::min);
            println!("hypercardioid null near {side:.1}°: {deepest:.1} dB");
            assert!(deepest <= -30.0, "null near {side} only {deepest} dB");
        }
    }
}

#[test]
fn bank_looks_and_distortionless() {
    let bank = default_bank();
    let looks: Vec<f64> = (0..12).map(|b| 30.0 * b as f64).collect();
    assert_eq!(bank.look_azimuths_deg, looks);
    for b in 0..12 {
        for fi in 0..bank.f_grid.len() {
            let r = bank.response(b, fi, looks[b]);
            assert!((r - Complex64::new(1.0, 0.0)).norm() <= 1e-6);
            let wng = beamsep::beam::white_noise_gain_db(
                &bank.weights[b][fi],
                &beamsep::beam::steering_vector(&bank.geometry, looks[b], bank.f_grid[fi], 343.0),
            );
            assert!(wng >= -15.0 - 1e-9);
        }
    }
    let two = design_bank(
        &ArrayGeometry::circular_seven(),
        2,
        &[500.0, 1000.0],
        &DesignParams::default(),
    )
    .unwrap();
    assert_eq!(two.look_azimuths_deg, vec![0.0, 180.0]);
    assert!(design_bank(
        &ArrayGeometry::circular_seven(),
        1,
        &[500.0],
        &DesignParams::default()
    )
    .is_err());
}

#[test]
fn beampattern_matches_direct_evaluation() {
    let bank = default_bank();
    let angles: Vec<f64> = (0..360).map(f64::from).collect();
    for b in [0, 5, 11] {
        let fi = bank.nearest_design_index(1500.0);
        let f = bank.f_grid[fi];
        let got = bank.beampattern(b, 1500.0, &angles);
        for (a, g) in angles.iter().zip(&got) {
            let want = (20.0
                * direct_response(
                    &bank.weights[b][fi],
                    bank.geometry.positions(),
                    *a,
                    f,
                    343.0,
                )
                .norm()
                .log10())
            .max(-80.0);
            assert!((g - want).abs() <= 1e-9, "beam {b} at {a}: {g} vs {want}");
        }
        assert!(bank.beampattern(b, 1500.0, &[bank.look_azimuths_deg[b]])[0].abs() < 1e-6);
        let wrapped = bank.beampattern(b, 1500.0, &[33.0 + 360.0, 33.0 - 720.0]);
        let base = bank.beampattern(b, 1500.0, &[33.0])[0];
        assert!(wrapped.iter().all(|v| (v - base).abs() < 1e-9));
    }
}

#[test]
fn rotated_look_equals_rotated_array() {
    let g = ArrayGeometry::circular_seven();
    let grid = [300.0, 1000.0, 2500.0];
    let params = DesignParams::default();
    let rotated = design_beam(&g, 60.0, &grid, &params).unwrap();
    // Turning the look by 60° is the same as turning the array by -60° and
    // reading the pattern 60° earlier.
    let turned = g.rotated(-60.0);
    let on_rotated_array = design_beam(&turned, 0.0, &grid, &params).unwrap();
    for (fi, f) in grid.iter().enumerate() {
        for a in (0..360).step_by(7) {
            let a = a as f64;
            let p1 = direct_response(&rotated[fi], g.positions(), a, *f, 343.0).norm();
            let p2 = direct_response(
                &on_rotated_array[fi],
                turned.positions(),
                a - 60.0,
                *f,
                343.0,
            )
            .norm();
            assert!((p1 - p2).abs() <= 1e-6, "{f} Hz {a}°: {p1} vs {p2}");
        }
    }
}

#[test]
fn bank_rotation_consistency() {
    let bank = default_bank();
    for k in [2usize, 4, 6, 8, 10] {
        for fi in [10, 30, 50] {
            for a in (0..360).step_by(10) {
                let a = a as f64;
                let rotated = bank.response(k, fi, a).norm();
                let base = bank.response(0, fi, a - 30.0 * k as f64).norm();
                assert!(
                    (rotated - base).abs() <= 1e-3 * base.max(1e-3),
                    "beam {k} fi {fi} az {a}"
                );
            }
        }
    }
}

fn tone_from(az_deg: f64, f: f64, g: &ArrayGeometry, len: usize, fs: f64) -> Vec<Vec<f64>> {
    let az = az_deg.to_radians();
    g.positions()
        .iter()
        .map(|p| {
            let lead = (az.cos() * p[0] + az.sin() * p[1]) / 343.0;
            (0..len)
                .map(|n| (2.0 * PI * f * (n as f64 / fs + lead)).sin())
                .collect()
        })
        .collect()
}

fn energy(spec: &beamsep::dsp::ComplexSpectrogram) -> f64 {
    spec.bins().iter().map(|c| c.norm_sqr()).sum()
}

#[test]
fn identity_bank_passes_input() {
    let x: Vec<f64> = (0..1024)
        .map(|i| ((i * 13 % 29) as f64 - 14.0) / 14.0)
        .collect();
    let wave = MultichannelWave::mono(x.clone(), 8000).unwrap();
    let out = BeamformerBank::identity_mono()
        .apply(&wave, StftConfig::default())
        .unwrap();
    let direct = beamsep::dsp::stft(&x, StftConfig::default(), 8000).unwrap();
    assert_eq!(out[0], direct);
}

#[test]
fn channel_mismatch_is_a_shape_error() {
    let wave = MultichannelWave::new(vec![vec![0.0; 512]; 3], 8000).unwrap();
    assert!(matches!(
        default_bank().apply(&wave, StftConfig::default()),
        Err(beamsep::Error::Shape(_))
    ));
}

#[test]
fn look_direction_tone_is_undistorted() {
    let bank = default_bank();
    let g = &bank.geometry;
    let f = bank.f_grid[bank.nearest_design_index(1000.0)];
    for b in [0, 3, 7] {
        let look = bank.look_azimuths_deg[b];
        let wave = MultichannelWave::new(tone_from(look, f, g, 4096, 8000.0), 8000).unwrap();
        let beams = bank.apply(&wave, StftConfig::default()).unwrap();
        let centre = beamsep::dsp::stft(wave.channel(0), StftConfig::default(), 8000).unwrap();
        let ratio_db = 10.0 * (energy(&beams[b]) / energy(&centre)).log10();
        println!("beam {b}: look-direction tone gain {ratio_db:.3} dB");
        assert!(ratio_db.abs() < 0.5);
    }
}

#[test]
fn opposite_talkers_separate_by_ten_db() {
    let bank = default_bank();
    let g = &bank.geometry;
    let cfg = StftConfig::default();
    for az_a in [0.0, 30.0, 75.0, 130.0] {
        let az_b = az_a + 180.0;
        let a = MultichannelWave::new(tone_from(az_a, 1000.0, g, 4096, 8000.0), 8000).unwrap();
        let b = MultichannelWave::new(tone_from(az_b, 1000.0, g, 4096, 8000.0), 8000).unwrap();
        let ya = bank.apply(&a, cfg).unwrap();
        let yb = bank.apply(&b, cfg).unwrap();
        let best = (0..12)
            .map(|k| 10.0 * (energy(&ya[k]) / energy(&yb[k])).log10())
            .fold(f64::MIN, f64::max);
        // Both talkers have equal level at the centre mic, so the input ratio is 0 dB.
        println!("talker at {az_a}°: best-beam target-to-interferer gain {best:.1} dB");
        assert!(best >= 10.0);
    }
}

#[test]
fn bank_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.json");
    let bank = design_bank(
        &ArrayGeometry::circular_seven(),
        4,
        &[500.0, 2000.0],
        &DesignParams::default(),
    )
    .unwrap();
    bank.save(&path).unwrap();
    assert_eq!(BeamformerBank::load(&path).unwrap(), bank);
    std::fs::write(&path, "{\"format\":\"other\"}").unwrap();
    assert!(matches!(
        BeamformerBank::load(&path),
        Err(beamsep::Error::Format(_))
    ));
}
