//! Pitch-centred IIR filterbank.
//!
//! One second-order Butterworth bandpass per key of an equal-tempered
//! instrument, band edges at the quarter tones between neighbouring keys.
//! Each band is filtered causally and reduced to a frame sequence by taking
//! the maximum absolute value inside each analysis window.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioBuffer;

#[derive(Debug, Error, PartialEq)]
pub enum FilterbankError {
    #[error("invalid filterbank configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "band for MIDI pitch {pitch} has its upper edge at {edge_hz:.1} Hz, \
         at or above the Nyquist frequency {nyquist_hz:.1} Hz"
    )]
    AboveNyquist { pitch: u8, edge_hz: f64, nyquist_hz: f64 },
    #[error("invalid band edges: lo={lo} Hz, hi={hi} Hz, sample rate {sample_rate} Hz")]
    InvalidEdges { lo: f64, hi: f64, sample_rate: f64 },
    #[error("audio buffer is empty")]
    EmptyAudio,
    #[error("audio is shorter than one frame ({samples} samples, hop {hop})")]
    TooShort { samples: usize, hop: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterbankConfig {
    pub num_bands: usize,
    pub midi_low: u8,
    pub reference_pitch: u8,
    pub reference_freq: f64,
    pub frame_rate: f64,
    /// Analysis window length as a multiple of the hop size.
    pub window_factor: usize,
}

impl Default for FilterbankConfig {
    fn default() -> Self {
        Self {
            num_bands: 88,
            midi_low: 21,
            reference_pitch: 69,
            reference_freq: 440.0,
            frame_rate: 50.0,
            window_factor: 1,
        }
    }
}

impl FilterbankConfig {
    pub fn validate(&self) -> Result<(), FilterbankError> {
        let bad = |m: &str| Err(FilterbankError::InvalidConfig(m.to_string()));
        if self.num_bands == 0 {
            return bad("num_bands must be at least 1");
        }
        if self.midi_low as usize + self.num_bands - 1 > 127 {
            return bad("highest band exceeds MIDI pitch 127");
        }
        if self.reference_pitch > 127 {
            return bad("reference_pitch must be a MIDI pitch");
        }
        if !(self.reference_freq > 0.0 && self.reference_freq.is_finite()) {
            return bad("reference_freq must be positive");
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad("frame_rate must be positive");
        }
        if self.window_factor == 0 {
            return bad("window_factor must be at least 1");
        }
        Ok(())
    }

    pub fn midi_high(&self) -> u8 {
        self.midi_low + (self.num_bands - 1) as u8
    }

    pub fn band_pitches(&self) -> Vec<u8> {
        (self.midi_low..=self.midi_high()).collect()
    }

    /// Equal-tempered frequency of `midi_pitch` under this tuning.
    pub fn center_frequency(&self, midi_pitch: u8) -> f64 {
        self.reference_freq * 2f64.powf((midi_pitch as f64 - self.reference_pitch as f64) / 12.0)
    }

    /// Quarter-tone band limits around `midi_pitch`.
    pub fn band_edges(&self, midi_pitch: u8) -> (f64, f64) {
        let fc = self.center_frequency(midi_pitch);
        let q = 2f64.powf(1.0 / 24.0);
        (fc / q, fc * q)
    }

    pub fn hop(&self, sample_rate: u32) -> usize {
        ((sample_rate as f64 / self.frame_rate).round() as usize).max(1)
    }

    pub fn effective_frame_rate(&self, sample_rate: u32) -> f64 {
        sample_rate as f64 / self.hop(sample_rate) as f64
    }
}

/// Frequency of `midi_pitch` in 12-TET with A4 = 440 Hz.
pub fn center_frequency(midi_pitch: u8) -> f64 {
    FilterbankConfig::default().center_frequency(midi_pitch)
}

/// Quarter-tone band edges around `midi_pitch` in 12-TET with A4 = 440 Hz.
pub fn band_edges(midi_pitch: u8) -> (f64, f64) {
    FilterbankConfig::default().band_edges(midi_pitch)
}

/// One biquad section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandpassCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
    pub center_hz: f64,
}

impl BandpassCoefficients {
    /// Pole magnitudes of `z^2 + a1 z + a2`.
    pub fn pole_magnitudes(&self) -> [f64; 2] {
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc < 0.0 {
            // complex conjugate pair, |z|^2 = a2
            let r = self.a2.sqrt();
            [r, r]
        } else {
            let s = disc.sqrt();
            [((-self.a1 + s) / 2.0).abs(), ((-self.a1 - s) / 2.0).abs()]
        }
    }

    pub fn is_stable(&self) -> bool {
        self.pole_magnitudes().iter().all(|&m| m < 1.0)
    }

    /// |H(e^{jw})| at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num_re = self.b0 + self.b1 * c1 + self.b2 * c2;
        let num_im = self.b1 * s1 + self.b2 * s2;
        let den_re = 1.0 + self.a1 * c1 + self.a2 * c2;
        let den_im = self.a1 * s1 + self.a2 * s2;
        (num_re.hypot(num_im)) / (den_re.hypot(den_im))
    }

    /// Digital frequency of the response peak: the image of the analog
    /// centre `sqrt(W_lo * W_hi)` under the bilinear map.
    pub fn warped_center_hz(lo: f64, hi: f64, sample_rate: f64) -> f64 {
        let t = ((PI * lo / sample_rate).tan() * (PI * hi / sample_rate).tan()).sqrt();
        sample_rate / PI * t.atan()
    }

    /// Runs the section over `input` from zero state (transposed direct form II).
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(input.len());
        let (mut s1, mut s2) = (0.0, 0.0);
        for &x in input {
            let y = self.b0 * x + s1;
            s1 = self.b1 * x - self.a1 * y + s2;
            s2 = self.b2 * x - self.a2 * y;
            out.push(y);
        }
        out
    }
}

/// Second-order Butterworth bandpass from a first-order lowpass prototype,
/// discretized by the bilinear transform with both edges pre-warped.
pub fn design_bandpass(lo: f64, hi: f64, sample_rate: f64) -> Result<BandpassCoefficients, FilterbankError> {
    if !(lo > 0.0 && lo < hi && hi < sample_rate / 2.0) {
        return Err(FilterbankError::InvalidEdges { lo, hi, sample_rate });
    }
    let k = 2.0 * sample_rate;
    let w_lo = k * (PI * lo / sample_rate).tan();
    let w_hi = k * (PI * hi / sample_rate).tan();
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;
    let k_sq = k * k;

    // H(s) = bw s / (s^2 + bw s + w0^2),  s = k (z - 1) / (z + 1)
    let a0 = k_sq + bw * k + w0_sq;
    let gain = bw * k / a0;
    Ok(BandpassCoefficients {
        b0: gain,
        b1: 0.0,
        b2: -gain,
        a1: 2.0 * (w0_sq - k_sq) / a0,
        a2: (k_sq - bw * k + w0_sq) / a0,
        center_hz: (lo * hi).sqrt(),
    })
}

/// Designs every band of `config` for `sample_rate`.
pub fn design_filterbank(
    config: &FilterbankConfig,
    sample_rate: u32,
) -> Result<Vec<BandpassCoefficients>, FilterbankError> {
    config.validate()?;
    let fs = sample_rate as f64;
    config
        .band_pitches()
        .into_iter()
        .map(|pitch| {
            let (lo, hi) = config.band_edges(pitch);
            if hi >= fs / 2.0 {
                return Err(FilterbankError::AboveNyquist {
                    pitch,
                    edge_hz: hi,
                    nyquist_hz: fs / 2.0,
                });
            }
            let mut c = design_bandpass(lo, hi, fs)?;
            c.center_hz = config.center_frequency(pitch);
            Ok(c)
        })
        .collect()
}

/// Non-negative band × frame matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    values: Vec<f64>,
    num_frames: usize,
    frame_rate: f64,
    band_pitches: Vec<u8>,
}

impl Spectrogram {
    /// Builds a spectrogram from rows (one per band).
    ///
    /// Panics if rows differ in length or if a value is negative or not finite.
    pub fn from_rows(rows: Vec<Vec<f64>>, frame_rate: f64, band_pitches: Vec<u8>) -> Self {
        assert_eq!(rows.len(), band_pitches.len(), "one pitch label per row");
        let num_frames = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * num_frames);
        for row in rows {
            assert_eq!(row.len(), num_frames, "ragged spectrogram rows");
            values.extend(row);
        }
        assert!(
            values.iter().all(|v| v.is_finite() && *v >= 0.0),
            "spectrogram values must be finite and non-negative"
        );
        Self {
            values,
            num_frames,
            frame_rate,
            band_pitches,
        }
    }

    pub fn zeros(num_frames: usize, frame_rate: f64, band_pitches: Vec<u8>) -> Self {
        let values = vec![0.0; num_frames * band_pitches.len()];
        Self {
            values,
            num_frames,
            frame_rate,
            band_pitches,
        }
    }

    pub fn num_bands(&self) -> usize {
        self.band_pitches.len()
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn band_pitches(&self) -> &[u8] {
        &self.band_pitches
    }

    pub fn row(&self, band: usize) -> &[f64] {
        &self.values[band * self.num_frames..(band + 1) * self.num_frames]
    }

    pub(crate) fn row_mut(&mut self, band: usize) -> &mut [f64] {
        &mut self.values[band * self.num_frames..(band + 1) * self.num_frames]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.num_bands()).map(move |b| self.row(b))
    }

    pub fn get(&self, band: usize, frame: usize) -> f64 {
        self.values[band * self.num_frames + frame]
    }

    /// Row index holding `midi_pitch`, if the pitch is covered.
    pub fn band_of_pitch(&self, midi_pitch: u8) -> Option<usize> {
        let first = *self.band_pitches.first()?;
        let idx = midi_pitch.checked_sub(first)? as usize;
        (self.band_pitches.get(idx) == Some(&midi_pitch)).then_some(idx)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.num_frames == 0 || self.band_pitches.is_empty()
    }

    pub fn same_shape(&self, other: &Spectrogram) -> bool {
        self.num_frames == other.num_frames && self.band_pitches == other.band_pitches
    }

    /// Scales every entry by `factor` (must be non-negative).
    pub fn scaled(&self, factor: f64) -> Spectrogram {
        assert!(factor >= 0.0);
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

fn frame_maxima(filtered: &[f64], hop: usize, window: usize, num_frames: usize) -> Vec<f64> {
    (0..num_frames)
        .map(|t| {
            let start = t * hop;
            let end = (start + window).min(filtered.len());
            filtered[start..end].iter().fold(0.0f64, |m, x| m.max(x.abs()))
        })
        .collect()
}

/// Filters `audio` through every band and reduces each band to frames by
/// window-wise maximum of the absolute filter output.
pub fn compute_spectrogram(audio: &AudioBuffer, config: &FilterbankConfig) -> Result<Spectrogram, FilterbankError> {
    if audio.is_empty() {
        return Err(FilterbankError::EmptyAudio);
    }
    let bank = design_filterbank(config, audio.sample_rate())?;
    let hop = config.hop(audio.sample_rate());
    let window = hop * config.window_factor;
    let num_frames = audio.len() / hop;
    if num_frames == 0 {
        return Err(FilterbankError::TooShort {
            samples: audio.len(),
            hop,
        });
    }
    let samples = audio.samples();
    let band_row = |c: &BandpassCoefficients| frame_maxima(&c.filter(samples), hop, window, num_frames);

    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        bank.par_iter().map(band_row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<f64>> = bank.iter().map(band_row).collect();

    Ok(Spectrogram::from_rows(
        rows,
        config.effective_frame_rate(audio.sample_rate()),
        config.band_pitches(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    #[test]
    fn center_frequencies() {
        assert_eq!(center_frequency(69), 440.0);
        assert_close(center_frequency(21), 27.5, 1e-12);
        // 440 * 2^(-9/12) evaluated separately
        assert_close(center_frequency(60), 261.625_565_300_598_6, 1e-3);
    }

    #[test]
    fn quarter_tone_edges() {
        let (lo, hi) = band_edges(69);
        assert_close(lo, 427.474, 1e-2);
        assert_close(hi, 452.893, 1e-2);
        let (lo, hi) = band_edges(60);
        assert_close((lo * hi).sqrt(), 261.6256, 1e-3);
        // 4186.009 * 2^(1/24)
        assert_close(band_edges(108).1, 4308.668, 1e-2);
        for p in 0..=127u8 {
            let (lo, hi) = band_edges(p);
            let fc = center_frequency(p);
            assert!(lo < fc && fc < hi);
        }
    }

    #[test]
    fn matches_reference_bilinear_coefficients() {
        // scipy.signal.butter(1, [lo, hi], btype="band", fs=fs)
        let cases = [
            (
                440.0,
                44100.0,
                0.001807520854316663,
                -1.992463384023788,
                0.9963849582913669,
            ),
            (
                27.5,
                48000.0,
                0.00010396825729881986,
                -1.999779106707123,
                0.9997920634854022,
            ),
            (
                4186.009044809578,
                22050.0,
                0.03331967891620019,
                -0.7130344633895495,
                0.9333606421675993,
            ),
        ];
        for (fc, fs, b0, a1, a2) in cases {
            let q = 2f64.powf(1.0 / 24.0);
            let c = design_bandpass(fc / q, fc * q, fs).unwrap();
            assert_close(c.b0, b0, 1e-12);
            assert_eq!(c.b1, 0.0);
            assert_close(c.b2, -b0, 1e-12);
            assert_close(c.a1, a1, 1e-12);
            assert_close(c.a2, a2, 1e-12);
        }
    }

    #[test]
    fn a4_band_response() {
        let (lo, hi) = (427.474, 452.893);
        let c = design_bandpass(lo, hi, 44100.0).unwrap();
        let peak = c.magnitude_at(BandpassCoefficients::warped_center_hz(lo, hi, 44100.0), 44100.0);
        assert!(db(c.magnitude_at(440.0, 44100.0) / peak).abs() < 1.0);
        assert_close(db(c.magnitude_at(lo, 44100.0) / peak), -3.0, 1.0);
        assert_close(db(c.magnitude_at(hi, 44100.0) / peak), -3.0, 1.0);
        assert!(c.magnitude_at(0.0, 44100.0) < 1e-12);
        assert!(c.magnitude_at(22050.0, 44100.0) < 1e-12);
        assert!(c.is_stable());
    }

    #[test]
    fn digital_response_equals_prewarped_analog_response() {
        // independent route: evaluate the analog prototype at K tan(w/2)
        let (lo, hi, fs) = (100.0, 140.0, 8000.0);
        let c = design_bandpass(lo, hi, fs).unwrap();
        let k = 2.0 * fs;
        let wl = k * (PI * lo / fs).tan();
        let wh = k * (PI * hi / fs).tan();
        for f in [10.0, 50.0, 99.0, 118.0, 140.0, 400.0, 3000.0] {
            let omega = k * (PI * f / fs).tan();
            let analog = (wh - wl) * omega / ((wl * wh - omega * omega).powi(2) + ((wh - wl) * omega).powi(2)).sqrt();
            assert_close(c.magnitude_at(f, fs), analog, 1e-9);
        }
    }

    #[test]
    fn rejects_invalid_edges() {
        assert!(design_bandpass(0.0, 10.0, 100.0).is_err());
        assert!(design_bandpass(20.0, 10.0, 100.0).is_err());
        assert!(design_bandpass(10.0, 50.0, 100.0).is_err());
    }

    #[test]
    fn default_bank_stable_at_common_rates() {
        for sr in [22050, 44100, 48000] {
            let bank = design_filterbank(&FilterbankConfig::default(), sr).unwrap();
            assert_eq!(bank.len(), 88);
            assert!(bank.iter().all(BandpassCoefficients::is_stable), "sr {sr}");
        }
    }

    #[test]
    fn band_at_nyquist_is_an_error() {
        let err = design_filterbank(&FilterbankConfig::default(), 8000).unwrap_err();
        assert!(matches!(err, FilterbankError::AboveNyquist { .. }));
    }

    #[test]
    fn silence_gives_zero_frames() {
        let audio = AudioBuffer::new(vec![0.0; 44100], 44100).unwrap();
        let s = compute_spectrogram(&audio, &FilterbankConfig::default()).unwrap();
        assert_eq!(s.num_frames(), 50);
        assert_eq!(s.num_bands(), 88);
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hop_at_48k() {
        let cfg = FilterbankConfig::default();
        assert_eq!(cfg.hop(48000), 960);
        let audio = AudioBuffer::new(vec![0.0; 48000], 48000).unwrap();
        assert_eq!(compute_spectrogram(&audio, &cfg).unwrap().num_frames(), 50);
    }

    #[test]
    fn sine_440_peaks_in_a4_row() {
        let sr = 44100;
        let samples: Vec<f64> = (0..2 * sr)
            .map(|n| (2.0 * PI * 440.0 * n as f64 / sr as f64).sin())
            .collect();
        let audio = AudioBuffer::new(samples, sr as u32).unwrap();
        let s = compute_spectrogram(&audio, &FilterbankConfig::default()).unwrap();
        let a4 = s.band_of_pitch(69).unwrap();
        // steady state: second half
        let steady = |band: usize| s.row(band)[50..].iter().sum::<f64>() / 50.0;
        let a4_level = steady(a4);
        for band in 0..s.num_bands() {
            if band != a4 {
                assert!(steady(band) < a4_level, "band {band} louder than A4");
            }
        }
        assert!(a4_level > 10.0 * steady(s.band_of_pitch(57).unwrap()));
        assert!(a4_level > 10.0 * steady(s.band_of_pitch(81).unwrap()));
    }

    #[test]
    fn band_lookup() {
        let s = Spectrogram::zeros(3, 50.0, (21..=108).collect());
        assert_eq!(s.band_of_pitch(21), Some(0));
        assert_eq!(s.band_of_pitch(108), Some(87));
        assert_eq!(s.band_of_pitch(20), None);
        assert_eq!(s.band_of_pitch(109), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_bank() -> FilterbankConfig {
            FilterbankConfig {
                num_bands: 12,
                midi_low: 60,
                frame_rate: 100.0,
                ..Default::default()
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn spectrogram_is_positively_homogeneous(
                samples in prop::collection::vec(-1.0f64..1.0, 400..1200),
                alpha in 0.01f64..50.0,
            ) {
                let cfg = small_bank();
                let base = compute_spectrogram(&AudioBuffer::new(samples.clone(), 8000).unwrap(), &cfg).unwrap();
                let scaled_in: Vec<f64> = samples.iter().map(|x| alpha * x).collect();
                let out = compute_spectrogram(&AudioBuffer::new(scaled_in, 8000).unwrap(), &cfg).unwrap();
                for (a, b) in out.values().iter().zip(base.values()) {
                    prop_assert!((a - alpha * b).abs() <= 1e-12 * (1.0 + alpha * b));
                }
            }

            #[test]
            fn power_of_two_scaling_is_exact(samples in prop::collection::vec(-1.0f64..1.0, 400..800), k in -4i32..5) {
                let cfg = small_bank();
                let alpha = 2f64.powi(k);
                let base = compute_spectrogram(&AudioBuffer::new(samples.clone(), 8000).unwrap(), &cfg).unwrap();
                let scaled_in: Vec<f64> = samples.iter().map(|x| alpha * x).collect();
                let out = compute_spectrogram(&AudioBuffer::new(scaled_in, 8000).unwrap(), &cfg).unwrap();
                prop_assert_eq!(out, base.scaled(alpha));
            }

            #[test]
            fn window_max_ignores_order_within_window(
                filtered in prop::collection::vec(-1.0f64..1.0, 40),
                frame in 0usize..4,
                seed in any::<u64>(),
            ) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let before = frame_maxima(&filtered, 10, 10, 4);
                let mut shuffled = filtered.clone();
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                shuffled[frame * 10..frame * 10 + 10].shuffle(&mut rng);
                prop_assert_eq!(frame_maxima(&shuffled, 10, 10, 4), before);
            }
        }
    }
}
