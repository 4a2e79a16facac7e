mod common;

use beamsep::beam::{default_frequency_grid, design_bank, DesignParams};
use beamsep::dsp::{istft, pad_signal, stft, unpad_signal, MultichannelWave, StftConfig};
use beamsep::metrics::*;
use beamsep::room::*;
use common::*;

const FS: u32 = 8000;

/// Anechoic renderings of independent noise sources at the given azimuths,
/// 1.5 m from the array centre.
fn anechoic(azimuths: &[f64], len: usize, seed: u64) -> (Vec<MultichannelWave>, ArrayGeometry) {
    let geometry = ArrayGeometry::circular_seven();
    let centre = [4.0, 4.0, 1.5];
    let sources: Vec<[f64; 3]> = azimuths
        .iter()
        .map(|a| {
            let t = a.to_radians();
            [centre[0] + 1.5 * t.cos(), centre[1] + 1.5 * t.sin(), 1.5]
        })
        .collect();
    let room = RoomSpec {
        dims: [8.0, 8.0, 3.0],
        absorption: 1.0,
        array_center: centre,
        source_positions: sources,
        max_image_order: 0,
        speed_of_sound: SPEED_OF_SOUND,
    };
    let mut r = rng(seed);
    let images = (0..azimuths.len())
        .map(|c| {
            let dry = uniform(&mut r, len, 1.0);
            let rir = image_method_rir(&room, c, &geometry, 256, FS).unwrap();
            render_source(&dry, &rir, FS).unwrap()
        })
        .collect();
    (images, geometry)
}

fn sum(waves: &[MultichannelWave]) -> MultichannelWave {
    let mut acc = waves[0].channels().to_vec();
    for w in &waves[1..] {
        for (a, ch) in acc.iter_mut().zip(w.channels()) {
            a.iter_mut().zip(ch).for_each(|(x, y)| *x += y);
        }
    }
    MultichannelWave::new(acc, FS).unwrap()
}

#[test]
fn best_beams_point_at_opposite_talkers() {
    let azimuths = [40.0, 220.0];
    let (images, geometry) = anechoic(&azimuths, 8000, 1);
    let mix = sum(&images);
    let cfg = StftConfig::default();
    let pad = cfg.edge_padding();
    let bank = design_bank(
        &geometry,
        12,
        &default_frequency_grid(),
        &DesignParams::default(),
    )
    .unwrap();
    let beams: Vec<Vec<f64>> = bank
        .apply(&mix.padded(pad), cfg)
        .unwrap()
        .iter()
        .map(|b| unpad_signal(&istft(b).unwrap(), pad, mix.len()))
        .collect();
    let refs: Vec<Vec<f64>> = images
        .iter()
        .map(|i| i.channel(REFERENCE_MIC).to_vec())
        .collect();
    let chosen = mbbf_oracle(&beams, &refs, SdrMeasure::BSS_EVAL).unwrap();
    assert_ne!(chosen[0], chosen[1]);
    for (c, &b) in chosen.iter().enumerate() {
        assert!(angular_distance(bank.look_azimuths_deg[b], azimuths[c]) <= 30.0);
    }
    // One beam only: everyone gets beam 0.
    assert_eq!(
        mbbf_oracle(&beams[..1], &refs, SdrMeasure::BSS_EVAL).unwrap(),
        vec![0, 0]
    );
}

#[test]
fn oracle_mvdr_suppresses_the_interferer_by_twenty_db() {
    let azimuths = [0.0, 110.0];
    let (images, geometry) = anechoic(&azimuths, 16000, 2);
    let cfg = StftConfig::default();
    let specs: Vec<_> = images.iter().map(|i| i.stft(cfg).unwrap()).collect();
    // Target 0; everything else is interference. Feeding the interference in
    // as the "mixture" leaves only what leaks through the weights.
    let interference = vec![specs[1].clone(), specs[0].clone()];
    let leak = oracle_mvdr(&specs[1], &interference, &geometry, &azimuths).unwrap();
    let bin = (1000.0 / (FS as f64 / cfg.frame_len as f64)).round() as usize;
    let power = |s: &beamsep::dsp::ComplexSpectrogram| -> f64 {
        (0..s.num_frames()).map(|t| s.get(t, bin).norm_sqr()).sum()
    };
    let before = power(&specs[1][REFERENCE_MIC]);
    let after = power(&leak[0]);
    let reduction = 10.0 * (before / after).log10();
    assert!(reduction >= 20.0, "reduction {reduction:.1} dB");
}

#[test]
fn perfect_outputs_hit_the_cap_and_mixture_copies_gain_nothing() {
    let mut r = rng(3);
    let a = uniform(&mut r, 3000, 1.0);
    let b = uniform(&mut r, 3000, 1.0);
    let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + 0.5 * y).collect();
    let refs = vec![a.clone(), b.clone()];
    for measure in [SdrMeasure::SCALE_INVARIANT, SdrMeasure::BSS_EVAL] {
        let rep = evaluate_mixture_with(measure, &refs, &refs, &mix).unwrap();
        for c in 0..2 {
            assert_eq!(rep.output_sdr[c], SDR_CAP_DB);
            assert_eq!(rep.improvement[c], rep.output_sdr[c] - rep.input_sdr[c]);
        }
        let copies =
            evaluate_mixture_with(measure, &[mix.clone(), mix.clone()], &refs, &mix).unwrap();
        assert!(copies.improvement.iter().all(|i| i.abs() < 1e-9));
    }
}

#[test]
fn two_talker_sdr_matches_hand_projection() {
    let mut r = rng(4);
    let s = uniform(&mut r, 2000, 1.0);
    let n = uniform(&mut r, 2000, 1.0);
    let est: Vec<f64> = s.iter().zip(&n).map(|(x, y)| 0.8 * x + 0.3 * y).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let alpha = dot(&est, &s) / dot(&s, &s);
    let target: Vec<f64> = s.iter().map(|x| alpha * x).collect();
    let err: Vec<f64> = est.iter().zip(&target).map(|(e, t)| e - t).collect();
    let expected = 10.0 * (dot(&target, &target) / dot(&err, &err)).log10();
    assert!((sdr(&est, &s).unwrap() - expected).abs() < 1e-9);
}

#[test]
fn single_beam_mbirm_reduces_to_irm() {
    let mut r = rng(5);
    let cfg = StftConfig::default();
    let pad = cfg.edge_padding();
    let a = pad_signal(&uniform(&mut r, 2000, 1.0), pad);
    let b = pad_signal(&uniform(&mut r, 2000, 0.5), pad);
    let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let s = |x: &[f64]| stft(x, cfg, FS).unwrap();
    let refs = vec![s(&a), s(&b)];
    let irm = irm_baseline(&s(&mix), &refs).unwrap();
    let source_beams = vec![vec![refs[0].clone()], vec![refs[1].clone()]];
    let mbirm = mbirm_baseline(&[s(&mix)], &source_beams, &[0, 0]).unwrap();
    assert_eq!(irm, mbirm);
    let masks = irm_masks(&refs).unwrap();
    let (ma, mb) = (refs[0].magnitudes(), refs[1].magnitudes());
    for i in (0..masks[0].len()).filter(|&i| ma[i] + mb[i] > IRM_FLOOR) {
        assert!((masks[0][i] + masks[1][i] - 1.0).abs() < 1e-12);
    }
}
