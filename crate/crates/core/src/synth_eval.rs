//! Synthetic performances with known onset times, and the error statistics
//! used to score an alignment against them.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioBuffer;
use crate::filterbank::center_frequency;
use crate::score::ScoreSequence;

/// Error thresholds (ms) reported by [`evaluate`].
pub const THRESHOLDS_MS: [u32; 4] = [50, 100, 200, 500];

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("invalid tempo map: {0}")]
    InvalidTempoMap(String),
    #[error("beat {beat} precedes the tempo map start {start}")]
    BeatBeforeMap { beat: f64, start: f64 },
    #[error("prediction has {predicted} onsets but ground truth has {truth}")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("nothing to evaluate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempoSegment {
    pub from_beat: f64,
    pub bpm: f64,
}

/// Piecewise-constant tempo curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TempoMap {
    segments: Vec<TempoSegment>,
}

impl TempoMap {
    pub fn new(segments: Vec<TempoSegment>) -> Result<Self, EvalError> {
        if segments.is_empty() {
            return Err(EvalError::InvalidTempoMap("no segments".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.bpm > 0.0 && s.bpm.is_finite()) {
                return Err(EvalError::InvalidTempoMap(format!("segment {i} has tempo {}", s.bpm)));
            }
            if !s.from_beat.is_finite() {
                return Err(EvalError::InvalidTempoMap(format!(
                    "segment {i} starts at a non-finite beat"
                )));
            }
            if i > 0 && s.from_beat <= segments[i - 1].from_beat {
                return Err(EvalError::InvalidTempoMap(format!(
                    "segment beats not strictly increasing at segment {i} ({} after {})",
                    s.from_beat,
                    segments[i - 1].from_beat
                )));
            }
        }
        Ok(Self { segments })
    }

    pub fn constant(bpm: f64, from_beat: f64) -> Result<Self, EvalError> {
        Self::new(vec![TempoSegment { from_beat, bpm }])
    }

    pub fn segments(&self) -> &[TempoSegment] {
        &self.segments
    }

    pub fn start(&self) -> f64 {
        self.segments[0].from_beat
    }

    /// Seconds elapsed from the map start to `beat`.
    pub fn beat_to_seconds(&self, beat: f64) -> Result<f64, EvalError> {
        if beat < self.start() {
            return Err(EvalError::BeatBeforeMap {
                beat,
                start: self.start(),
            });
        }
        let mut secs = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let end = self.segments.get(i + 1).map_or(f64::INFINITY, |s| s.from_beat);
            if beat <= end {
                return Ok(secs + (beat - seg.from_beat) * 60.0 / seg.bpm);
            }
            secs += (end - seg.from_beat) * 60.0 / seg.bpm;
        }
        unreachable!("last segment is unbounded")
    }
}

/// Parses `beat:bpm` pairs separated by commas, e.g. `0:120,8:96`.
impl std::str::FromStr for TempoMap {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let segments = s
            .split(',')
            .map(|pair| {
                let bad = || EvalError::InvalidTempoMap(format!("entry `{}` is not beat:bpm", pair.trim()));
                let (beat, bpm) = pair.split_once(':').ok_or_else(bad)?;
                Ok(TempoSegment {
                    from_beat: beat.trim().parse().map_err(|_| bad())?,
                    bpm: bpm.trim().parse().map_err(|_| bad())?,
                })
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        Self::new(segments)
    }
}

pub fn beat_to_seconds(beat: f64, tempo_map: &TempoMap) -> Result<f64, EvalError> {
    tempo_map.beat_to_seconds(beat)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub sample_rate: u32,
    /// White-noise RMS relative to the signal peak.
    pub noise_level: f64,
    pub seed: u64,
    /// Silence before the first chord, in seconds.
    pub lead_in: f64,
    /// Length of the last chord, in seconds.
    pub tail: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            sample_rate: 44100,
            noise_level: 0.0,
            seed: 0,
            lead_in: 0.0,
            tail: 1.0,
        }
    }
}

const HARMONIC_AMPS: [f64; 4] = [1.0, 0.5, 0.25, 0.125];
const ATTACK_S: f64 = 0.005;
const DECAY_TAU_S: f64 = 0.4;
const PEAK: f64 = 0.9;

/// Renders `score` as decaying harmonic tones and returns the audio with the
/// ground-truth onset time (seconds) of every chord.
pub fn synthesize(
    score: &ScoreSequence,
    tempo_map: &TempoMap,
    opts: &SynthOptions,
) -> Result<(AudioBuffer, Vec<f64>), EvalError> {
    let origin = tempo_map.start();
    if score.onsets()[0].beat < origin {
        return Err(EvalError::BeatBeforeMap {
            beat: score.onsets()[0].beat,
            start: origin,
        });
    }
    let truth: Vec<f64> = score
        .beats()
        .map(|b| tempo_map.beat_to_seconds(b).map(|t| t + opts.lead_in))
        .collect::<Result<_, _>>()?;

    let sr = opts.sample_rate as f64;
    let end_s = truth.last().unwrap() + opts.tail;
    let len = (end_s * sr).ceil() as usize;
    let mut out = vec![0.0; len];

    for (i, onset) in score.onsets().iter().enumerate() {
        let start = (truth[i] * sr).round() as usize;
        let stop = truth.get(i + 1).map_or(len, |t| (t * sr).round() as usize).min(len);
        for &pitch in &onset.pitches {
            let f0 = center_frequency(pitch);
            for (n, sample) in out[start..stop].iter_mut().enumerate() {
                let t = n as f64 / sr;
                let env = (t / ATTACK_S).min(1.0) * (-t / DECAY_TAU_S).exp();
                let tone: f64 = HARMONIC_AMPS
                    .iter()
                    .enumerate()
                    .filter(|(h, _)| f0 * (*h as f64 + 1.0) < sr / 2.0)
                    .map(|(h, a)| a * (2.0 * PI * f0 * (h as f64 + 1.0) * t).sin())
                    .sum();
                *sample += env * tone;
            }
        }
    }

    let peak = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if opts.noise_level > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let sigma = opts.noise_level * peak;
        for x in out.iter_mut() {
            let g: f64 = StandardNormal.sample(&mut rng);
            *x += sigma * g;
        }
    }
    let peak = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|x| *x *= PEAK / peak);
    }
    let audio = AudioBuffer::new(out, opts.sample_rate).expect("synthesized samples are finite");
    Ok((audio, truth))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_ms: f64,
    pub median_ms: f64,
    /// Percentage of onsets with absolute error strictly below each threshold.
    pub pct_below: BTreeMap<u32, f64>,
    pub errors_ms: Vec<f64>,
}

impl EvalReport {
    pub fn pct_below(&self, threshold_ms: u32) -> f64 {
        self.pct_below[&threshold_ms]
    }

    /// Human-readable table, one statistic per line.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "onsets      {:>8}\nmean (ms)   {:>8.1}\nmedian (ms) {:>8.1}\n",
            self.errors_ms.len(),
            self.mean_ms,
            self.median_ms
        );
        for (t, p) in &self.pct_below {
            s.push_str(&format!("{:<12}{:>8.1}\n", format!("< {t} ms (%)"), p));
        }
        s
    }
}

/// Absolute onset errors of `predicted` against `ground_truth` (both in
/// seconds, positionally matched).
pub fn evaluate(predicted: &[f64], ground_truth: &[f64]) -> Result<EvalReport, EvalError> {
    if predicted.len() != ground_truth.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            truth: ground_truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(EvalError::Empty);
    }
    let errors_ms: Vec<f64> = predicted
        .iter()
        .zip(ground_truth)
        .map(|(p, t)| (p - t).abs() * 1000.0)
        .collect();
    let n = errors_ms.len();
    let mean_ms = errors_ms.iter().sum::<f64>() / n as f64;
    let mut sorted = errors_ms.clone();
    sorted.sort_by(f64::total_cmp);
    let median_ms = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let pct_below = THRESHOLDS_MS
        .iter()
        .map(|&t| {
            let count = errors_ms.iter().filter(|&&e| e < t as f64).count();
            (t, 100.0 * count as f64 / n as f64)
        })
        .collect();
    Ok(EvalReport {
        mean_ms,
        median_ms,
        pct_below,
        errors_ms,
    })
}
