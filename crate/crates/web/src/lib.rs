//! WebAssembly bindings for the browser demo. Every function takes plain
//! numbers or strings and returns a JSON document, so the page needs no
//! generated type glue beyond `wasm-bindgen`'s string passing.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use scorealign::dp_align::{align, AlignmentParams};
use scorealign::features::FeaturePair;
use scorealign::filterbank::{band_edges, design_bandpass, BandpassCoefficients};
use scorealign::score::{parse_json, ScoreSequence};
use scorealign::synth_eval::{evaluate, synthesize, EvalReport, SynthOptions, TempoMap};
use scorealign::{pipeline, AlignmentResult, FilterbankConfig};

const DEMO_RATE: u32 = 22050;

#[derive(Serialize)]
struct Response {
    pitch: u8,
    lo_hz: f64,
    hi_hz: f64,
    center_hz: f64,
    freqs_hz: Vec<f64>,
    gain_db: Vec<f64>,
}

#[derive(Serialize)]
struct Heatmaps {
    frame_rate: f64,
    num_frames: usize,
    pitches: Vec<u8>,
    /// Row-major, one row per pitch.
    onsets: Vec<f64>,
    spec: Vec<f64>,
    truth_s: Vec<f64>,
}

#[derive(Serialize)]
struct AlignDemo {
    alignment: AlignmentResult,
    truth_s: Vec<f64>,
    report: EvalReport,
}

fn fail(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn json(value: &impl Serialize) -> String {
    serde_json::to_string(value).expect("demo payloads serialize")
}

/// Magnitude response of one band on a log-frequency grid spanning an
/// octave either side of its center.
#[wasm_bindgen]
pub fn band_response(pitch: u8, sample_rate: f64, points: usize) -> Result<String, JsValue> {
    if !(21..=108).contains(&pitch) {
        return Err(fail(format!("pitch {pitch} outside 21..=108")));
    }
    let (lo, hi) = band_edges(pitch);
    let c = design_bandpass(lo, hi, sample_rate).map_err(fail)?;
    let peak = BandpassCoefficients::warped_center_hz(lo, hi, sample_rate);
    let (f_lo, f_hi) = (c.center_hz / 2.0, (c.center_hz * 2.0).min(0.499 * sample_rate));
    let n = points.max(2);
    let freqs_hz: Vec<f64> = (0..n)
        .map(|i| f_lo * (f_hi / f_lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    let gain_db = freqs_hz
        .iter()
        .map(|&f| 20.0 * c.magnitude_at(f, sample_rate).log10())
        .collect();
    Ok(json(&Response {
        pitch,
        lo_hz: lo,
        hi_hz: hi,
        center_hz: peak,
        freqs_hz,
        gain_db,
    }))
}

fn render(
    score_json: &str,
    tempo_map: &str,
    noise: f64,
    seed: u32,
) -> Result<(ScoreSequence, FeaturePair, Vec<f64>), JsValue> {
    let score = parse_json(score_json).map_err(fail)?;
    let tempo: TempoMap = tempo_map.parse().map_err(fail)?;
    let opts = SynthOptions {
        sample_rate: DEMO_RATE,
        noise_level: noise,
        seed: seed.into(),
        lead_in: 0.5,
        ..Default::default()
    };
    let (audio, truth) = synthesize(&score, &tempo, &opts).map_err(fail)?;
    let features =
        pipeline::features_from_audio(&audio, &FilterbankConfig::default(), &Default::default()).map_err(fail)?;
    Ok((score, features, truth))
}

/// Synthesizes the score and returns both activation matrices.
#[wasm_bindgen]
pub fn feature_heatmaps(score_json: &str, tempo_map: &str, noise: f64, seed: u32) -> Result<String, JsValue> {
    let (_, f, truth_s) = render(score_json, tempo_map, noise, seed)?;
    Ok(json(&Heatmaps {
        frame_rate: f.frame_rate(),
        num_frames: f.num_frames(),
        pitches: f.band_pitches().to_vec(),
        onsets: f.onsets.values().to_vec(),
        spec: f.spec.values().to_vec(),
        truth_s,
    }))
}

/// Synthesizes the score, aligns it back and scores the result.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn align_synthetic(
    score_json: &str,
    tempo_map: &str,
    noise: f64,
    seed: u32,
    w_onset: f64,
    w_stretch: f64,
    w_spec: f64,
    bp_init: f64,
) -> Result<String, JsValue> {
    let (score, features, truth_s) = render(score_json, tempo_map, noise, seed)?;
    let params = AlignmentParams {
        w_onset,
        w_stretch,
        w_spec,
        bp_init,
        ..Default::default()
    };
    let alignment = align(&score, &features, &params).map_err(fail)?;
    let report = evaluate(&alignment.times(), &truth_s).map_err(fail)?;
    Ok(json(&AlignDemo {
        alignment,
        truth_s,
        report,
    }))
}
