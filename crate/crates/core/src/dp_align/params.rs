use serde::{Deserialize, Serialize};

use super::AlignError;

/// How per-pitch onset and sustain costs of a chord are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PitchAggregation {
    /// Average the onset and sustain costs over the chord's pitches.
    #[default]
    Mean,
    /// Relax once per pitch and keep the cheapest, i.e. the chord is explained
    /// by its best-matching pitch.
    Min,
}

impl std::str::FromStr for PitchAggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Self::Mean),
            "min" => Ok(Self::Min),
            other => Err(format!("unknown pitch aggregation `{other}` (expected mean or min)")),
        }
    }
}

/// Tuning knobs of the aligner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentParams {
    /// Smallest allowed ratio of observed to predicted inter-onset frames.
    pub stretch_min: f64,
    /// Largest allowed ratio of observed to predicted inter-onset frames.
    pub stretch_max: f64,
    pub w_onset: f64,
    pub w_stretch: f64,
    pub w_spec: f64,
    /// Beat period (frames per beat) assumed before the first observation.
    pub bp_init: f64,
    /// Weight of the previous beat period in the exponential update.
    pub bp_alpha: f64,
    pub bp_min: f64,
    pub bp_max: f64,
    /// Number of frames after a candidate onset that must keep spectral energy.
    pub sustain_frames: usize,
    /// Cells costlier than the row minimum plus this offset are discarded.
    pub reset_threshold: Option<f64>,
    pub pitch_aggregation: PitchAggregation,
    /// Seconds from the start of the audio in which the first chord is searched.
    pub initial_window: f64,
    pub max_window_frames: Option<usize>,
}

impl Default for AlignmentParams {
    fn default() -> Self {
        Self {
            stretch_min: 1.0 / 3.0,
            stretch_max: 3.0,
            w_onset: 1.0,
            w_stretch: 1.0,
            w_spec: 1.0,
            bp_init: 25.0,
            bp_alpha: 0.5,
            bp_min: 5.0,
            bp_max: 250.0,
            sustain_frames: 3,
            reset_threshold: None,
            pitch_aggregation: PitchAggregation::Mean,
            initial_window: 5.0,
            max_window_frames: None,
        }
    }
}

impl AlignmentParams {
    pub fn validate(&self) -> Result<(), AlignError> {
        let fail = |msg: String| Err(AlignError::InvalidParams(msg));
        if !(self.stretch_min > 0.0 && self.stretch_min < 1.0) {
            return fail(format!("stretch_min must lie in (0, 1), got {}", self.stretch_min));
        }
        if !(self.stretch_max > 1.0 && self.stretch_max.is_finite()) {
            return fail(format!("stretch_max must be finite and > 1, got {}", self.stretch_max));
        }
        for (name, w) in [
            ("w_onset", self.w_onset),
            ("w_stretch", self.w_stretch),
            ("w_spec", self.w_spec),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return fail(format!("{name} must be a finite non-negative weight, got {w}"));
            }
        }
        if !(self.bp_min >= 1.0 && self.bp_min <= self.bp_max && self.bp_max.is_finite()) {
            return fail(format!("invalid beat-period bounds ({}, {})", self.bp_min, self.bp_max));
        }
        if !(self.bp_init >= self.bp_min && self.bp_init <= self.bp_max) {
            return fail(format!(
                "bp_init {} outside beat-period bounds ({}, {})",
                self.bp_init, self.bp_min, self.bp_max
            ));
        }
        if !(0.0..=1.0).contains(&self.bp_alpha) {
            return fail(format!("bp_alpha must lie in [0, 1], got {}", self.bp_alpha));
        }
        if self.sustain_frames == 0 {
            return fail("sustain_frames must be at least 1".into());
        }
        if let Some(t) = self.reset_threshold {
            if t.is_nan() || t < 0.0 {
                return fail(format!("reset_threshold must be non-negative, got {t}"));
            }
        }
        if !(self.initial_window >= 0.0 && self.initial_window.is_finite()) {
            return fail(format!(
                "initial_window must be non-negative, got {}",
                self.initial_window
            ));
        }
        if self.max_window_frames == Some(0) {
            return fail("max_window_frames must be at least 1".into());
        }
        Ok(())
    }

    pub fn weight_sum(&self) -> f64 {
        self.w_onset + self.w_stretch + self.w_spec
    }
}
