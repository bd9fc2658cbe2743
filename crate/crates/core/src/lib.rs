//! Audio-to-score alignment.
//!
//! The pipeline turns a recording into two pitch-wise activation matrices
//! (onsets and sustained spectral energy) through an 88-band IIR filterbank,
//! then places every chord of a symbolic score on an audio frame with a
//! dynamic program that tracks a beat period along each path.
//!
//! ```no_run
//! use scorealign::{audio_io, score, pipeline, dp_align::AlignmentParams};
//!
//! let audio = audio_io::load_wav("take.wav")?;
//! let chords = score::load_score("piece.mid", 0)?;
//! let features = pipeline::features_from_audio(&audio, &Default::default(), &Default::default())?;
//! let result = scorealign::dp_align::align(&chords, &features, &AlignmentParams::default())?;
//! for e in &result.entries {
//!     println!("beat {} at {:.3} s", e.beat, e.time_s);
//! }
//! # Ok::<(), scorealign::Error>(())
//! ```

pub mod audio_io;
pub mod dp_align;
pub mod export;
pub mod features;
pub mod filterbank;
pub mod score;
pub mod synth_eval;

pub use audio_io::{AudioBuffer, AudioError};
pub use dp_align::{align, AlignError, AlignmentParams, AlignmentResult};
pub use features::FeaturePair;
pub use filterbank::{FilterbankConfig, FilterbankError, Spectrogram};
pub use score::{ScoreError, ScoreSequence};
pub use synth_eval::EvalError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Filterbank(#[from] FilterbankError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Csv(#[from] export::CsvError),
}

pub mod pipeline {
    use crate::audio_io::AudioBuffer;
    use crate::dp_align::{self, AlignmentParams, AlignmentResult};
    use crate::features::{self, FeatureConfig, FeaturePair};
    use crate::filterbank::{self, FilterbankConfig, Spectrogram};
    use crate::score::ScoreSequence;
    use crate::Error;

    pub fn raw_spectrogram(audio: &AudioBuffer, config: &FilterbankConfig) -> Result<Spectrogram, Error> {
        Ok(filterbank::compute_spectrogram(audio, config)?)
    }

    pub fn features_from_audio(
        audio: &AudioBuffer,
        fb: &FilterbankConfig,
        fc: &FeatureConfig,
    ) -> Result<FeaturePair, Error> {
        let raw = filterbank::compute_spectrogram(audio, fb)?;
        Ok(features::extract_features_with(&raw, fc))
    }

    /// Filterbank, features and alignment in one call.
    pub fn align_audio(
        audio: &AudioBuffer,
        score: &ScoreSequence,
        fb: &FilterbankConfig,
        fc: &FeatureConfig,
        params: &AlignmentParams,
    ) -> Result<AlignmentResult, Error> {
        fb.validate()?;
        score.check_pitch_range(fb.midi_low, fb.midi_high())?;
        let features = features_from_audio(audio, fb, fc)?;
        Ok(dp_align::align(score, &features, params)?)
    }
}
