//! Parsers must turn every malformed input into a typed error instead of panicking.

use std::panic::{catch_unwind, AssertUnwindSafe};

use egoloc::formats::*;
use egoloc::{decode_wav, encode_wav, parse_config, WavFormat};
use egoloc_core::eval::{GroundTruth, Submission};
use egoloc_core::pipeline::PipelineConfig;
use egoloc_core::{ArrayGeometry, Direction, MultichannelRecording};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MUTATIONS: usize = 100_000;

const TOKENS: &[&[u8]] = &[
    b",",
    b"\n",
    b"\r\n",
    b"\"",
    b"-",
    b".",
    b"e308",
    b"nan",
    b"inf",
    b"-1",
    b"0",
    b"99999999999999999999",
    b"[",
    b"]",
    b"=",
    b"#",
    b"type",
    b"\xff\xfe",
    b"\x00",
    b"data",
    b"fmt ",
    b"RIFF",
    b"\xfe\xff",
];

fn mutate(seed: &[u8], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut out = seed.to_vec();
    for _ in 0..rng.gen_range(1..=4) {
        let len = out.len();
        let pos = if len == 0 { 0 } else { rng.gen_range(0..len) };
        match rng.gen_range(0..7) {
            0 if len > 0 => out[pos] ^= 1 << rng.gen_range(0..8),
            1 if len > 0 => out[pos] = rng.gen(),
            2 => {
                let tok = TOKENS[rng.gen_range(0..TOKENS.len())];
                out.splice(pos..pos, tok.iter().copied());
            }
            3 if len > 0 => {
                let end = (pos + rng.gen_range(1..16)).min(len);
                out.drain(pos..end);
            }
            4 => out.truncate(pos),
            5 if len > 0 => {
                let end = (pos + rng.gen_range(1..32)).min(len);
                let chunk = out[pos..end].to_vec();
                let at = rng.gen_range(0..=out.len());
                out.splice(at..at, chunk);
            }
            _ if len >= 4 => {
                // Overwrite a 32-bit field with an extreme value, as in a corrupted header size.
                let v: u32 = [0, 1, u32::MAX, 0x8000_0000, rng.gen()][rng.gen_range(0..5)];
                let p = pos.min(len - 4);
                out[p..p + 4].copy_from_slice(&v.to_le_bytes());
            }
            _ => out.push(rng.gen()),
        }
    }
    out
}

type Parser = fn(&[u8]) -> bool;

fn text(bytes: &[u8]) -> std::borrow::Cow<'_, str> {
    String::from_utf8_lossy(bytes)
}

fn seeds() -> Vec<(&'static str, Vec<u8>, Parser)> {
    let rec = MultichannelRecording::new(
        (0..8).map(|c| (0..64).map(|t| ((t * (c + 1)) as f64 * 0.01).sin()).collect()).collect(),
        44100.0,
    )
    .unwrap();
    let d = Direction::new(12.5, -3.25).unwrap();
    let gt_static = GroundTruth::Static([("rec1".to_string(), d), ("rec2".to_string(), d)].into());
    let gt_flight =
        GroundTruth::Flight([("rec1".to_string(), (0..15).map(|k| (0.25 + k as f64 * 0.25, d)).collect())].into());
    let bank = egoloc_core::sim::TaskGenerator::new(egoloc_core::sim::TaskConfig::new(
        egoloc_core::sim::TaskKind::Static,
        1,
        (0.0, 0.0),
        1,
    ))
    .unwrap()
    .template_bank(16)
    .unwrap();
    let config = "band_hz = [300.0, 4000.0]\n[noise]\ntype = \"vad\"\npercentile = 0.2\n[[enhance]]\ntype = \"mwf\"\nmu = 1.0\n[method]\ntype = \"srp-nonlin\"\ngamma = 0.5\n[tracking]\ntype = \"kalman\"\n";
    assert!(parse_config(config).is_ok());
    let _ = PipelineConfig::default();
    vec![
        ("wav float32", encode_wav(&rec, WavFormat::Float32).unwrap(), |b| decode_wav(b).is_ok()),
        ("wav pcm16", encode_wav(&rec, WavFormat::Pcm16).unwrap(), |b| decode_wav(b).is_ok()),
        ("ground truth static", format_ground_truth(&gt_static).into_bytes(), |b| parse_ground_truth(&text(b)).is_ok()),
        ("ground truth flight", format_ground_truth(&gt_flight).into_bytes(), |b| parse_ground_truth(&text(b)).is_ok()),
        ("submission", format_submission(&Submission::from_truth(&gt_flight), &["x".into()]).into_bytes(), |b| {
            parse_submission(&text(b)).is_ok()
        }),
        (
            "motor speeds",
            format_motor_speeds(&[("rec1".to_string(), [5000.0, 5100.0, 5200.0, 5300.0])].into()).into_bytes(),
            |b| parse_motor_speeds(&text(b)).is_ok(),
        ),
        ("geometry", format_geometry(&ArrayGeometry::default_cube()).into_bytes(), |b| {
            parse_geometry(&text(b)).is_ok()
        }),
        ("trajectory", b"time_s,azimuth_deg,elevation_deg,confidence\n0.1,1,2,0.5\n0.2,3,4,0.6\n".to_vec(), |b| {
            parse_trajectory(&text(b)).is_ok()
        }),
        ("spectrum", format_spectrum(&[d, d], &[0.5, egoloc_core::spectrum::MASKED]).into_bytes(), |b| {
            parse_spectrum(&text(b)).is_ok()
        }),
        ("templates", serde_json::to_vec(&bank).unwrap(), |b| parse_template_bank(&text(b)).is_ok()),
        ("config", config.as_bytes().to_vec(), |b| parse_config(&text(b)).is_ok()),
    ]
}

#[test]
fn parsers_never_panic_on_mutated_input() {
    let seeds = seeds();
    for (name, seed, parse) in &seeds {
        assert!(parse(seed), "seed for {name} must parse");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut rejected = 0usize;
    for i in 0..MUTATIONS {
        let (name, seed, parse) = &seeds[i % seeds.len()];
        let input = mutate(seed, &mut rng);
        match catch_unwind(AssertUnwindSafe(|| parse(&input))) {
            Ok(ok) => rejected += usize::from(!ok),
            Err(_) => panic!("{name} parser panicked on mutation {i}: {:?}", String::from_utf8_lossy(&input)),
        }
    }
    // The mutations must actually exercise the error paths.
    assert!(rejected > MUTATIONS / 4, "only {rejected} of {MUTATIONS} mutations were rejected");
}
