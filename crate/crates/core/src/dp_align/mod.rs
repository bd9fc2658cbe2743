//! Score-to-audio alignment by dynamic programming over
//! (score chord × audio frame).
//!
//! Row 0 of the cost table is a virtual start state at frame 0. Row `i >= 1`
//! holds the accumulated cost of placing score chord `i - 1` at each frame.
//! Every reachable cell also carries the backpointer to its best predecessor
//! frame and a beat-period estimate (frames per beat) smoothed along that
//! predecessor chain. Transitions from a cell are restricted to a window
//! derived from the cell's beat period and the score distance to the next
//! chord. Rows are optionally pruned to a beam above their minimum.
//!
//! Only the reachable span of each row is stored, so memory follows the
//! search band instead of `chords × frames`.

mod cost;
mod params;

pub use cost::{
    compute_frame_window, initial_frame_window, pitch_cost, prune_row, stretch_cost, transition_cost,
    update_beat_period, PitchCost, TransitionCost,
};
pub use params::{AlignmentParams, PitchAggregation};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeaturePair;
use crate::score::ScoreSequence;

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("invalid alignment parameters: {0}")]
    InvalidParams(String),
    #[error("feature matrices are empty")]
    EmptyFeatures,
    #[error("score onset {score_index} contains pitch {pitch}, outside the feature band range {lo}..={hi}")]
    PitchOutOfRange {
        score_index: usize,
        pitch: u8,
        lo: u8,
        hi: u8,
    },
    #[error("no feasible path: score onset {score_index} cannot be placed in the audio")]
    NoFeasiblePath { score_index: usize },
}

/// One row of the DP tables, covering frames `offset..offset + len`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpRow {
    offset: usize,
    cost: Vec<f64>,
    back: Vec<u32>,
    beat_period: Vec<f64>,
}

const NO_BACK: u32 = u32::MAX;

impl DpRow {
    fn unreachable(offset: usize, len: usize, bp_init: f64) -> Self {
        Self {
            offset,
            cost: vec![f64::INFINITY; len],
            back: vec![NO_BACK; len],
            beat_period: vec![bp_init; len],
        }
    }

    /// Frame span stored for this row.
    pub fn span(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.cost.len()
    }

    fn finite_cells(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.cost
            .iter()
            .zip(&self.beat_period)
            .enumerate()
            .filter(|(_, (c, _))| c.is_finite())
            .map(|(k, (&c, &bp))| (self.offset + k, c, bp))
    }

    /// Smallest cost and the smallest frame attaining it.
    fn argmin(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (k, &c) in self.cost.iter().enumerate() {
            if c.is_finite() && best.is_none_or(|(_, b)| c < b) {
                best = Some((self.offset + k, c));
            }
        }
        best
    }

    /// Drops leading and trailing unreachable cells.
    fn trim(&mut self) {
        let Some(first) = self.cost.iter().position(|c| c.is_finite()) else {
            self.cost.clear();
            self.back.clear();
            self.beat_period.clear();
            return;
        };
        let last = self.cost.iter().rposition(|c| c.is_finite()).unwrap();
        self.cost.truncate(last + 1);
        self.back.truncate(last + 1);
        self.beat_period.truncate(last + 1);
        self.cost.drain(..first);
        self.back.drain(..first);
        self.beat_period.drain(..first);
        self.offset += first;
    }
}

/// Accumulated cost `D`, backpointers `B` and beat periods `BP` of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DpState {
    rows: Vec<DpRow>,
    num_frames: usize,
    bp_init: f64,
}

impl DpState {
    /// Number of rows, i.e. score chords plus the virtual start row.
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn row(&self, i: usize) -> &DpRow {
        &self.rows[i]
    }

    fn cell(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.rows[i];
        j.checked_sub(row.offset).filter(|&k| k < row.cost.len())
    }

    /// `D[i, j]`; `+inf` for unreachable cells.
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cell(i, j).map_or(f64::INFINITY, |k| self.rows[i].cost[k])
    }

    /// `B[i, j]`: predecessor frame in row `i - 1`, if the cell is reachable.
    pub fn back(&self, i: usize, j: usize) -> Option<usize> {
        self.cell(i, j)
            .map(|k| self.rows[i].back[k])
            .filter(|&b| b != NO_BACK && self.cost(i, j).is_finite())
            .map(|b| b as usize)
    }

    /// `BP[i, j]`, frames per beat.
    pub fn beat_period(&self, i: usize, j: usize) -> f64 {
        self.cell(i, j).map_or(self.bp_init, |k| self.rows[i].beat_period[k])
    }

    /// Number of reachable cells in row `i`.
    pub fn reachable(&self, i: usize) -> usize {
        self.rows[i].cost.iter().filter(|c| c.is_finite()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentEntry {
    pub score_index: usize,
    pub beat: f64,
    pub pitches: Vec<u8>,
    pub frame: usize,
    pub time_s: f64,
    /// Accumulated path cost up to and including this chord.
    pub cumulative_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub entries: Vec<AlignmentEntry>,
    pub total_cost: f64,
    pub effective_frame_rate: f64,
}

impl AlignmentResult {
    pub fn frames(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.frame).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.time_s).collect()
    }
}

fn chord_bands(score: &ScoreSequence, features: &FeaturePair) -> Result<Vec<Vec<usize>>, AlignError> {
    let pitches = features.band_pitches();
    let (lo, hi) = (pitches[0], *pitches.last().unwrap());
    score
        .onsets()
        .iter()
        .enumerate()
        .map(|(score_index, onset)| {
            onset
                .pitches
                .iter()
                .map(|&p| {
                    features.spec.band_of_pitch(p).ok_or(AlignError::PitchOutOfRange {
                        score_index,
                        pitch: p,
                        lo,
                        hi,
                    })
                })
                .collect()
        })
        .collect()
}

/// Fills the DP tables for `score` against `features`.
pub fn run_dp(score: &ScoreSequence, features: &FeaturePair, params: &AlignmentParams) -> Result<DpState, AlignError> {
    params.validate()?;
    if features.spec.is_empty() {
        return Err(AlignError::EmptyFeatures);
    }
    let bands = chord_bands(score, features)?;
    let n = features.num_frames();
    let onsets = score.onsets();

    let mut start = DpRow::unreachable(0, 1, params.bp_init);
    start.cost[0] = 0.0;
    let mut rows = vec![start];
    let mut cands = Vec::new();
    let mut cand_table: Vec<(f64, f64)> = Vec::new();

    for (i, target_bands) in bands.iter().enumerate() {
        let prev = rows.last().unwrap();
        // None for the first chord: no score distance, no stretch, bp fixed
        let delta_score = (i > 0).then(|| onsets[i].beat - onsets[i - 1].beat);
        let window = |j: usize, bp: f64| match delta_score {
            Some(ds) => compute_frame_window(j, bp, ds, params, n),
            None => initial_frame_window(params, features.frame_rate(), n),
        };

        let (mut lo, mut hi) = (usize::MAX, 0);
        for (j, _, bp) in prev.finite_cells() {
            let w = window(j, bp);
            if !w.is_empty() {
                lo = lo.min(w.start);
                hi = hi.max(w.end);
            }
        }
        if lo >= hi {
            return Err(AlignError::NoFeasiblePath { score_index: i });
        }

        // weighted chord costs per target frame, `stride` candidates each
        let stride = match params.pitch_aggregation {
            PitchAggregation::Mean => 1,
            PitchAggregation::Min => target_bands.len(),
        };
        cand_table.clear();
        for frame in lo..hi {
            cost::chord_candidates(features, target_bands, frame, params, &mut cands);
            cand_table.extend_from_slice(&cands);
        }

        let mut next = DpRow::unreachable(lo, hi - lo, params.bp_init);
        for (j, d, bp) in prev.finite_cells() {
            for target in window(j, bp) {
                let stretch = match delta_score {
                    Some(ds) => stretch_cost(target - j, bp, ds, params),
                    None => 0.0,
                };
                let k = target - lo;
                let mut best = f64::INFINITY;
                for &(onset_term, spec_term) in &cand_table[k * stride..(k + 1) * stride] {
                    let c = d + onset_term + params.w_stretch * stretch + spec_term;
                    if c < best {
                        best = c;
                    }
                }
                if best < next.cost[k] {
                    next.cost[k] = best;
                    next.back[k] = j as u32;
                    next.beat_period[k] = match delta_score {
                        Some(ds) => update_beat_period(target - j, ds, bp, params),
                        None => params.bp_init,
                    };
                }
            }
        }
        prune_row(&mut next.cost, params.reset_threshold);
        next.trim();
        rows.push(next);
    }

    Ok(DpState {
        rows,
        num_frames: n,
        bp_init: params.bp_init,
    })
}

/// Reads the alignment off the backpointers, starting from the cheapest
/// (earliest on ties) cell of the last row.
pub fn backtrack(
    state: &DpState,
    score: &ScoreSequence,
    effective_frame_rate: f64,
) -> Result<AlignmentResult, AlignError> {
    let last = state.num_rows() - 1;
    let (mut frame, total_cost) = state.rows[last].argmin().ok_or(AlignError::NoFeasiblePath {
        score_index: last.saturating_sub(1),
    })?;

    let mut entries = Vec::with_capacity(last);
    for i in (1..=last).rev() {
        let onset = &score.onsets()[i - 1];
        entries.push(AlignmentEntry {
            score_index: i - 1,
            beat: onset.beat,
            pitches: onset.pitches.iter().copied().collect(),
            frame,
            time_s: frame as f64 / effective_frame_rate,
            cumulative_cost: state.cost(i, frame),
        });
        frame = state
            .back(i, frame)
            .expect("every reachable cell below the start row has a predecessor");
    }
    entries.reverse();
    Ok(AlignmentResult {
        entries,
        total_cost,
        effective_frame_rate,
    })
}

/// Aligns `score` to `features`, returning one audio frame per score chord.
pub fn align(
    score: &ScoreSequence,
    features: &FeaturePair,
    params: &AlignmentParams,
) -> Result<AlignmentResult, AlignError> {
    let state = run_dp(score, features, params)?;
    backtrack(&state, score, features.frame_rate())
}
