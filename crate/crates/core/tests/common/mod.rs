//! Test-only helpers: an exhaustive path-enumeration oracle for the aligner
//! and random instance generators.

#![allow(dead_code, clippy::too_many_arguments)]

use rand::Rng;
use scorealign::dp_align::{AlignmentParams, PitchAggregation};
use scorealign::features::FeaturePair;
use scorealign::filterbank::Spectrogram;
use scorealign::score::{ScoreOnset, ScoreSequence};

/// Best complete path found by enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePath {
    pub cost: f64,
    pub frames: Vec<usize>,
}

/// Exhaustively enumerates every monotone path that respects the
/// beat-period windows, carrying each path's own beat period, and returns
/// the cheapest (earliest frames on ties). The arithmetic mirrors the
/// aligner's summation order so equal paths give bit-identical costs.
/// Weighted `(onset, spec)` terms of chord `i` at frame `t`: one entry for
/// mean aggregation, one per pitch for min aggregation.
pub fn chord_terms(score: &ScoreSequence, f: &FeaturePair, p: &AlignmentParams, i: usize, t: usize) -> Vec<(f64, f64)> {
    let n = f.num_frames();
    let low = f.band_pitches()[0];
    let per_pitch: Vec<(f64, f64)> = score.onsets()[i]
        .pitches
        .iter()
        .map(|&pitch| {
            let b = (pitch - low) as usize;
            let on = 1.0 - f.onsets.row(b)[t];
            let mut sus = f64::INFINITY;
            for k in 1..=p.sustain_frames {
                sus = sus.min(f.spec.row(b)[(t + k).min(n - 1)]);
            }
            (on, 1.0 - sus)
        })
        .collect();
    match p.pitch_aggregation {
        PitchAggregation::Mean => {
            let mut on = 0.0;
            let mut sp = 0.0;
            for &(a, b) in &per_pitch {
                on += a;
                sp += b;
            }
            let m = per_pitch.len() as f64;
            vec![(p.w_onset * (on / m), p.w_spec * (sp / m))]
        }
        PitchAggregation::Min => per_pitch.iter().map(|&(a, b)| (p.w_onset * a, p.w_spec * b)).collect(),
    }
}

fn step(
    score: &ScoreSequence,
    f: &FeaturePair,
    p: &AlignmentParams,
    acc: f64,
    i: usize,
    t: usize,
    stretch: f64,
) -> f64 {
    chord_terms(score, f, p, i, t)
        .into_iter()
        .map(|(on, sp)| acc + on + p.w_stretch * stretch + sp)
        .fold(f64::INFINITY, |a, b| if b < a { b } else { a })
}

fn window(
    score: &ScoreSequence,
    f: &FeaturePair,
    p: &AlignmentParams,
    i: usize,
    prev: usize,
    bp: f64,
) -> (usize, usize) {
    let n = f.num_frames();
    if i == 0 {
        let last = (p.initial_window * f.frame_rate() + 1e-9).floor() as usize;
        return (0, (last + 1).min(n));
    }
    let ds = score.onsets()[i].beat - score.onsets()[i - 1].beat;
    let lo_off = ((p.stretch_min * bp * ds - 1e-9).ceil()).max(1.0) as usize;
    let mut hi_off = (p.stretch_max * bp * ds + 1e-9).floor() as usize;
    if let Some(cap) = p.max_window_frames {
        hi_off = hi_off.min(cap);
    }
    ((prev + lo_off).min(n), (prev + hi_off + 1).min(n))
}

/// Cost and updated beat period after placing chord `i` at `t`.
fn advance(
    score: &ScoreSequence,
    f: &FeaturePair,
    p: &AlignmentParams,
    i: usize,
    prev: usize,
    bp: f64,
    acc: f64,
    t: usize,
) -> (f64, f64) {
    if i == 0 {
        return (step(score, f, p, acc, 0, t, 0.0), p.bp_init);
    }
    let ds = score.onsets()[i].beat - score.onsets()[i - 1].beat;
    let df = (t - prev) as f64;
    let stretch = ((df / (bp * ds)).log2().abs() / p.stretch_max.log2()).clamp(0.0, 1.0);
    let nbp = (p.bp_alpha * bp + (1.0 - p.bp_alpha) * (df / ds)).clamp(p.bp_min, p.bp_max);
    (step(score, f, p, acc, i, t, stretch), nbp)
}

/// Cost of one explicit path, or `None` if it leaves a window.
pub fn path_cost(score: &ScoreSequence, f: &FeaturePair, p: &AlignmentParams, frames: &[usize]) -> Option<f64> {
    let (mut prev, mut bp, mut acc) = (0, p.bp_init, 0.0);
    for (i, &t) in frames.iter().enumerate() {
        let (lo, hi) = window(score, f, p, i, prev, bp);
        if !(lo..hi).contains(&t) {
            return None;
        }
        (acc, bp) = advance(score, f, p, i, prev, bp, acc, t);
        prev = t;
    }
    Some(acc)
}

/// Exhaustively enumerates every monotone path that respects the
/// beat-period windows, carrying each path's own beat period, and returns
/// the cheapest (earliest frames on ties). The arithmetic mirrors the
/// aligner's summation order so equal paths give bit-identical costs.
pub fn brute_force(score: &ScoreSequence, f: &FeaturePair, p: &AlignmentParams) -> Option<OraclePath> {
    fn rec(
        i: usize,
        prev: usize,
        bp: f64,
        acc: f64,
        frames: &mut Vec<usize>,
        best: &mut Option<OraclePath>,
        ctx: &dyn Fn(usize, usize, f64, f64, usize) -> Option<(f64, f64)>,
        m: usize,
        window: &dyn Fn(usize, usize, f64) -> (usize, usize),
    ) {
        if i == m {
            let better = match best {
                None => true,
                Some(b) => acc < b.cost || (acc == b.cost && frames < &mut b.frames),
            };
            if better {
                *best = Some(OraclePath {
                    cost: acc,
                    frames: frames.clone(),
                });
            }
            return;
        }
        let (lo, hi) = window(i, prev, bp);
        for t in lo..hi {
            if let Some((c, nbp)) = ctx(i, prev, bp, acc, t) {
                frames.push(t);
                rec(i + 1, t, nbp, c, frames, best, ctx, m, window);
                frames.pop();
            }
        }
    }

    let window = |i: usize, prev: usize, bp: f64| window(score, f, p, i, prev, bp);
    let ctx = |i: usize, prev: usize, bp: f64, acc: f64, t: usize| Some(advance(score, f, p, i, prev, bp, acc, t));

    let mut best = None;
    rec(
        0,
        0,
        p.bp_init,
        0.0,
        &mut Vec::new(),
        &mut best,
        &ctx,
        score.len(),
        &window,
    );
    best
}

pub fn random_features<R: Rng>(rng: &mut R, bands: u8, n: usize, low_pitch: u8) -> FeaturePair {
    let pitches: Vec<u8> = (low_pitch..low_pitch + bands).collect();
    let mut mat = || {
        let rows = (0..bands).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect();
        Spectrogram::from_rows(rows, 50.0, pitches.clone())
    };
    let onsets = mat();
    let spec = mat();
    FeaturePair::new(onsets, spec)
}

pub fn random_score<R: Rng>(rng: &mut R, m: usize, low_pitch: u8, bands: u8) -> ScoreSequence {
    let steps = [0.25, 0.5, 1.0, 1.5, 2.0];
    let mut beat = 0.0;
    let onsets = (0..m)
        .map(|i| {
            if i > 0 {
                beat += steps[rng.gen_range(0..steps.len())];
            }
            let size = rng.gen_range(1..=3.min(bands as usize));
            let pitches: Vec<u8> = (0..size).map(|_| low_pitch + rng.gen_range(0..bands)).collect();
            ScoreOnset::new(beat, pitches)
        })
        .collect();
    ScoreSequence::new(onsets).unwrap()
}

pub fn random_params<R: Rng>(rng: &mut R) -> AlignmentParams {
    let bp_min = rng.gen_range(1.0..3.0);
    let bp_max = rng.gen_range(6.0..12.0);
    AlignmentParams {
        stretch_min: rng.gen_range(0.1..0.9),
        stretch_max: rng.gen_range(1.2..4.0),
        w_onset: rng.gen_range(0.0..2.0),
        w_stretch: rng.gen_range(0.0..2.0),
        w_spec: rng.gen_range(0.0..2.0),
        bp_init: rng.gen_range(bp_min..bp_max),
        bp_alpha: rng.gen_range(0.0..=1.0),
        bp_min,
        bp_max,
        sustain_frames: rng.gen_range(1..=4),
        reset_threshold: None,
        pitch_aggregation: if rng.gen_bool(0.5) {
            PitchAggregation::Mean
        } else {
            PitchAggregation::Min
        },
        initial_window: rng.gen_range(0.02..0.3),
        max_window_frames: None,
    }
}

pub struct SyntheticPiece {
    pub score: ScoreSequence,
    pub tempo: scorealign::synth_eval::TempoMap,
}

/// Random piece: 20-50 chords of 1-4 notes from MIDI 36..=96, piecewise
/// tempo within 60-180 BPM changing by at most 25% between segments.
pub fn synthetic_piece<R: Rng>(rng: &mut R) -> SyntheticPiece {
    use scorealign::synth_eval::{TempoMap, TempoSegment};
    let steps = [0.5, 1.0, 1.0, 1.5, 2.0];
    let m = rng.gen_range(20..=50);
    let mut beat = 0.0;
    let onsets = (0..m)
        .map(|i| {
            if i > 0 {
                beat += steps[rng.gen_range(0..steps.len())];
            }
            let size = rng.gen_range(1..=4);
            let pitches: Vec<u8> = (0..size).map(|_| rng.gen_range(36..=96)).collect();
            ScoreOnset::new(beat, pitches)
        })
        .collect();
    let score = ScoreSequence::new(onsets).unwrap();

    let mut segments = Vec::new();
    let mut bpm: f64 = rng.gen_range(60.0..180.0);
    let mut from = 0.0;
    while from <= beat {
        segments.push(TempoSegment { from_beat: from, bpm });
        from += rng.gen_range(4..=12) as f64;
        bpm = (bpm * rng.gen_range(0.75..1.25)).clamp(60.0, 180.0);
    }
    SyntheticPiece {
        score,
        tempo: TempoMap::new(segments).unwrap(),
    }
}
