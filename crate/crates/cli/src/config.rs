//! Tuning knobs shared by `align` and `features`, settable from flags or a
//! `key=value` file. Flags win over the file.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use clap::Args;
use scorealign::dp_align::{AlignmentParams, PitchAggregation};
use scorealign::features::FeatureConfig;
use scorealign::FilterbankConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Args)]
pub struct Tuning {
    /// Nominal feature frame rate in Hz.
    #[arg(long)]
    pub frame_rate: Option<f64>,
    /// Analysis window length in hops.
    #[arg(long)]
    pub window_factor: Option<usize>,
    /// Superflux difference lag in frames.
    #[arg(long)]
    pub onset_lag: Option<usize>,
    #[arg(long)]
    pub stretch_min: Option<f64>,
    #[arg(long)]
    pub stretch_max: Option<f64>,
    #[arg(long)]
    pub w_onset: Option<f64>,
    #[arg(long)]
    pub w_spec: Option<f64>,
    #[arg(long)]
    pub w_stretch: Option<f64>,
    /// Initial beat period in frames per beat.
    #[arg(long)]
    pub bp_init: Option<f64>,
    #[arg(long)]
    pub bp_alpha: Option<f64>,
    #[arg(long)]
    pub bp_min: Option<f64>,
    #[arg(long)]
    pub bp_max: Option<f64>,
    #[arg(long)]
    pub sustain_frames: Option<usize>,
    /// Discard cells costlier than the row minimum plus this value.
    #[arg(long)]
    pub reset_threshold: Option<f64>,
    /// Chord cost aggregation over pitches: mean or min.
    #[arg(long)]
    pub pitch_aggregation: Option<PitchAggregation>,
    /// Seconds from the start in which the first chord may be placed.
    #[arg(long)]
    pub initial_window: Option<f64>,
    #[arg(long)]
    pub max_window_frames: Option<usize>,
}

fn parse<T: FromStr>(key: &str, value: &str, line: usize) -> Result<Option<T>, CliError> {
    value
        .parse()
        .map(Some)
        .map_err(|_| CliError::Config(format!("config line {line}: invalid value `{value}` for `{key}`")))
}

impl Tuning {
    /// Reads a `key=value` file; keys are the flag names with `-` or `_`.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        let mut t = Tuning::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let n = idx + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {n}: expected key=value")))?;
            let key = key.trim().replace('-', "_");
            let v = value.trim();
            match key.as_str() {
                "frame_rate" => t.frame_rate = parse(&key, v, n)?,
                "window_factor" => t.window_factor = parse(&key, v, n)?,
                "onset_lag" => t.onset_lag = parse(&key, v, n)?,
                "stretch_min" => t.stretch_min = parse(&key, v, n)?,
                "stretch_max" => t.stretch_max = parse(&key, v, n)?,
                "w_onset" => t.w_onset = parse(&key, v, n)?,
                "w_spec" => t.w_spec = parse(&key, v, n)?,
                "w_stretch" => t.w_stretch = parse(&key, v, n)?,
                "bp_init" => t.bp_init = parse(&key, v, n)?,
                "bp_alpha" => t.bp_alpha = parse(&key, v, n)?,
                "bp_min" => t.bp_min = parse(&key, v, n)?,
                "bp_max" => t.bp_max = parse(&key, v, n)?,
                "sustain_frames" => t.sustain_frames = parse(&key, v, n)?,
                "reset_threshold" => t.reset_threshold = parse(&key, v, n)?,
                "pitch_aggregation" => t.pitch_aggregation = parse(&key, v, n)?,
                "initial_window" => t.initial_window = parse(&key, v, n)?,
                "max_window_frames" => t.max_window_frames = parse(&key, v, n)?,
                _ => return Err(CliError::Config(format!("config line {n}: unknown key `{key}`"))),
            }
        }
        Ok(t)
    }

    /// Fields set here take precedence over `base`.
    pub fn over(self, base: Tuning) -> Tuning {
        Tuning {
            frame_rate: self.frame_rate.or(base.frame_rate),
            window_factor: self.window_factor.or(base.window_factor),
            onset_lag: self.onset_lag.or(base.onset_lag),
            stretch_min: self.stretch_min.or(base.stretch_min),
            stretch_max: self.stretch_max.or(base.stretch_max),
            w_onset: self.w_onset.or(base.w_onset),
            w_spec: self.w_spec.or(base.w_spec),
            w_stretch: self.w_stretch.or(base.w_stretch),
            bp_init: self.bp_init.or(base.bp_init),
            bp_alpha: self.bp_alpha.or(base.bp_alpha),
            bp_min: self.bp_min.or(base.bp_min),
            bp_max: self.bp_max.or(base.bp_max),
            sustain_frames: self.sustain_frames.or(base.sustain_frames),
            reset_threshold: self.reset_threshold.or(base.reset_threshold),
            pitch_aggregation: self.pitch_aggregation.or(base.pitch_aggregation),
            initial_window: self.initial_window.or(base.initial_window),
            max_window_frames: self.max_window_frames.or(base.max_window_frames),
        }
    }

    pub fn filterbank(&self) -> FilterbankConfig {
        let d = FilterbankConfig::default();
        FilterbankConfig {
            frame_rate: self.frame_rate.unwrap_or(d.frame_rate),
            window_factor: self.window_factor.unwrap_or(d.window_factor),
            ..d
        }
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            onset_lag: self.onset_lag.unwrap_or(FeatureConfig::default().onset_lag),
        }
    }

    pub fn alignment(&self) -> AlignmentParams {
        let d = AlignmentParams::default();
        AlignmentParams {
            stretch_min: self.stretch_min.unwrap_or(d.stretch_min),
            stretch_max: self.stretch_max.unwrap_or(d.stretch_max),
            w_onset: self.w_onset.unwrap_or(d.w_onset),
            w_stretch: self.w_stretch.unwrap_or(d.w_stretch),
            w_spec: self.w_spec.unwrap_or(d.w_spec),
            bp_init: self.bp_init.unwrap_or(d.bp_init),
            bp_alpha: self.bp_alpha.unwrap_or(d.bp_alpha),
            bp_min: self.bp_min.unwrap_or(d.bp_min),
            bp_max: self.bp_max.unwrap_or(d.bp_max),
            sustain_frames: self.sustain_frames.unwrap_or(d.sustain_frames),
            reset_threshold: self.reset_threshold.or(d.reset_threshold),
            pitch_aggregation: self.pitch_aggregation.unwrap_or(d.pitch_aggregation),
            initial_window: self.initial_window.unwrap_or(d.initial_window),
            max_window_frames: self.max_window_frames.or(d.max_window_frames),
        }
    }
}
