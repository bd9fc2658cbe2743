//! Local cost terms and beat-period bookkeeping of the aligner.

use std::ops::Range;

use serde::Serialize;

use super::params::{AlignmentParams, PitchAggregation};
use crate::features::FeaturePair;

// Absorbs rounding in products such as 3 * 25 * 0.04 before ceil/floor.
const WINDOW_EPS: f64 = 1e-9;

/// Frames that may host the next chord when the current chord sits at frame
/// `j` with beat period `bp` and the chords are `delta_score` beats apart.
///
/// Returns a half-open range, possibly empty, clipped to `0..num_frames`.
pub fn compute_frame_window(
    j: usize,
    bp: f64,
    delta_score: f64,
    params: &AlignmentParams,
    num_frames: usize,
) -> Range<usize> {
    let predicted = bp * delta_score;
    let lo_offset = ((params.stretch_min * predicted - WINDOW_EPS).ceil().max(1.0)) as usize;
    let mut hi_offset = (params.stretch_max * predicted + WINDOW_EPS).floor().max(0.0) as usize;
    if let Some(cap) = params.max_window_frames {
        hi_offset = hi_offset.min(cap);
    }
    let start = (j + lo_offset).min(num_frames);
    let end = (j + hi_offset + 1).min(num_frames).max(start);
    start..end
}

/// Window searched for the first chord: `[0, initial_window * frame_rate]`.
pub fn initial_frame_window(params: &AlignmentParams, frame_rate: f64, num_frames: usize) -> Range<usize> {
    let last = (params.initial_window * frame_rate + WINDOW_EPS).floor() as usize;
    0..(last + 1).min(num_frames)
}

/// Log-ratio deviation of an observed inter-onset gap from the beat-period
/// prediction, scaled so that a gap of `stretch_max` times the prediction costs 1.
pub fn stretch_cost(delta_frames: usize, bp: f64, delta_score: f64, params: &AlignmentParams) -> f64 {
    let ratio = delta_frames as f64 / (bp * delta_score);
    (ratio.log2().abs() / params.stretch_max.log2()).clamp(0.0, 1.0)
}

/// Exponentially smoothed beat period after observing `delta_frames` for
/// `delta_score` beats.
pub fn update_beat_period(delta_frames: usize, delta_score: f64, bp: f64, params: &AlignmentParams) -> f64 {
    let observed = delta_frames as f64 / delta_score;
    (params.bp_alpha * bp + (1.0 - params.bp_alpha) * observed).clamp(params.bp_min, params.bp_max)
}

/// Masks entries costlier than `min(row) + threshold`; identity when no threshold is set.
pub fn prune_row(row: &mut [f64], reset_threshold: Option<f64>) {
    let Some(threshold) = reset_threshold else { return };
    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return;
    }
    let cutoff = min + threshold;
    for c in row.iter_mut() {
        if *c > cutoff {
            *c = f64::INFINITY;
        }
    }
}

/// Weighted onset and sustain cost of matching one pitch at a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PitchCost {
    /// `1 - onsets[p, frame]`.
    pub onset: f64,
    /// `1 - min_k spec[p, frame + k]`, `k = 1..=sustain_frames`, clamped at the last frame.
    pub spec: f64,
}

pub fn pitch_cost(features: &FeaturePair, band: usize, frame: usize, sustain_frames: usize) -> PitchCost {
    let last = features.num_frames() - 1;
    let spec_row = features.spec.row(band);
    let sustained = (1..=sustain_frames)
        .map(|k| spec_row[(frame + k).min(last)])
        .fold(f64::INFINITY, f64::min);
    PitchCost {
        onset: 1.0 - features.onsets.get(band, frame),
        spec: 1.0 - sustained,
    }
}

/// Chord-level cost candidates for one target frame, already weighted:
/// `(w_onset * C_on, w_spec * C_sp)`. Mean aggregation yields one candidate;
/// min aggregation yields one per pitch, and the relaxation keeps the cheapest.
pub(crate) fn chord_candidates(
    features: &FeaturePair,
    bands: &[usize],
    frame: usize,
    params: &AlignmentParams,
    out: &mut Vec<(f64, f64)>,
) {
    out.clear();
    let costs = bands
        .iter()
        .map(|&b| pitch_cost(features, b, frame, params.sustain_frames));
    match params.pitch_aggregation {
        PitchAggregation::Mean => {
            let n = bands.len() as f64;
            let (on, sp) = costs.fold((0.0, 0.0), |(on, sp), c| (on + c.onset, sp + c.spec));
            out.push((params.w_onset * (on / n), params.w_spec * (sp / n)));
        }
        PitchAggregation::Min => {
            out.extend(costs.map(|c| (params.w_onset * c.onset, params.w_spec * c.spec)));
        }
    }
}

/// Breakdown of one transition's cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionCost {
    /// Unweighted onset component, in `[0, 1]`.
    pub onset: f64,
    /// Unweighted stretch component, in `[0, 1]`.
    pub stretch: f64,
    /// Unweighted sustain component, in `[0, 1]`.
    pub spec: f64,
    /// Weighted sum of the three components (excluding the accumulated cost).
    pub total: f64,
}

/// Local cost of placing a chord with pitch bands `bands` at frame `to` after
/// the previous chord at frame `from`. `delta_score = None` marks the first
/// chord, whose stretch term is zero.
pub fn transition_cost(
    features: &FeaturePair,
    bands: &[usize],
    from: usize,
    to: usize,
    bp: f64,
    delta_score: Option<f64>,
    params: &AlignmentParams,
) -> TransitionCost {
    let stretch = match delta_score {
        Some(ds) => stretch_cost(to - from, bp, ds, params),
        None => 0.0,
    };
    let mut cands = Vec::new();
    chord_candidates(features, bands, to, params, &mut cands);
    let costs: Vec<PitchCost> = bands
        .iter()
        .map(|&b| pitch_cost(features, b, to, params.sustain_frames))
        .collect();
    let (best, &(won, wsp)) = cands
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 .0 + a.1 .1).total_cmp(&(b.1 .0 + b.1 .1)))
        .expect("chord has at least one pitch");
    let (onset, spec) = match params.pitch_aggregation {
        PitchAggregation::Mean => {
            let n = costs.len() as f64;
            (
                costs.iter().map(|c| c.onset).sum::<f64>() / n,
                costs.iter().map(|c| c.spec).sum::<f64>() / n,
            )
        }
        PitchAggregation::Min => (costs[best].onset, costs[best].spec),
    };
    TransitionCost {
        onset,
        stretch,
        spec,
        total: won + params.w_stretch * stretch + wsp,
    }
}
