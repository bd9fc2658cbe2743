//! Score representation: an ordered list of chords, each a beat position
//! and the set of MIDI pitches notated there.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use midly::{Format, Header, MetaMessage, MidiMessage, Smf, Timing, TrackEvent, TrackEventKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("cannot read score {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed MIDI file: {0}")]
    Midi(String),
    #[error("SMPTE time division is not supported; a pulses-per-quarter-note division is required")]
    SmpteDivision,
    #[error("MIDI file contains no note-on events")]
    NoNotes,
    #[error("malformed JSON score: {0}")]
    Json(String),
    #[error("score is empty")]
    Empty,
    #[error("beats not strictly increasing at onset {index}: {prev} then {beat}")]
    NonIncreasingBeats { index: usize, prev: f64, beat: f64 },
    #[error("onset {index} has a non-finite beat")]
    NonFiniteBeat { index: usize },
    #[error("onset {index} has an empty pitch set")]
    EmptyPitchSet { index: usize },
    #[error("onset {index} has pitch {pitch} outside the range {lo}..={hi}")]
    PitchOutOfRange { index: usize, pitch: i64, lo: u8, hi: u8 },
    #[error("unrecognized score file extension for {0} (expected .mid, .midi or .json)")]
    UnknownExtension(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOnset {
    pub beat: f64,
    pub pitches: BTreeSet<u8>,
}

impl ScoreOnset {
    pub fn new(beat: f64, pitches: impl IntoIterator<Item = u8>) -> Self {
        Self {
            beat,
            pitches: pitches.into_iter().collect(),
        }
    }
}

/// Validated chord sequence: strictly increasing beats, non-empty pitch sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSequence {
    onsets: Vec<ScoreOnset>,
}

impl ScoreSequence {
    pub fn new(onsets: Vec<ScoreOnset>) -> Result<Self, ScoreError> {
        if onsets.is_empty() {
            return Err(ScoreError::Empty);
        }
        for (index, onset) in onsets.iter().enumerate() {
            if !onset.beat.is_finite() {
                return Err(ScoreError::NonFiniteBeat { index });
            }
            if onset.pitches.is_empty() {
                return Err(ScoreError::EmptyPitchSet { index });
            }
            if let Some(&pitch) = onset.pitches.iter().find(|&&p| p > 127) {
                return Err(ScoreError::PitchOutOfRange {
                    index,
                    pitch: pitch as i64,
                    lo: 0,
                    hi: 127,
                });
            }
            if index > 0 && onset.beat <= onsets[index - 1].beat {
                return Err(ScoreError::NonIncreasingBeats {
                    index,
                    prev: onsets[index - 1].beat,
                    beat: onset.beat,
                });
            }
        }
        Ok(Self { onsets })
    }

    pub fn onsets(&self) -> &[ScoreOnset] {
        &self.onsets
    }

    pub fn len(&self) -> usize {
        self.onsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onsets.is_empty()
    }

    pub fn beats(&self) -> impl Iterator<Item = f64> + '_ {
        self.onsets.iter().map(|o| o.beat)
    }

    /// Checks that every pitch lies within `lo..=hi` (e.g. a filterbank's range).
    pub fn check_pitch_range(&self, lo: u8, hi: u8) -> Result<(), ScoreError> {
        for (index, onset) in self.onsets.iter().enumerate() {
            if let Some(&pitch) = onset.pitches.iter().find(|&&p| p < lo || p > hi) {
                return Err(ScoreError::PitchOutOfRange {
                    index,
                    pitch: pitch as i64,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// Encodes the chords as a format-0 MIDI file, one quarter note per beat.
    ///
    /// Beats are rounded to the nearest tick.
    pub fn to_midi_bytes(&self, ppq: u16) -> Vec<u8> {
        let origin = self.onsets[0].beat.min(0.0);
        let ticks: Vec<u64> = self
            .onsets
            .iter()
            .map(|o| ((o.beat - origin) * ppq as f64).round() as u64)
            .collect();

        // (tick, on?, key); note-offs sort before note-ons at the same tick
        let mut events: Vec<(u64, bool, u8)> = Vec::new();
        for (i, onset) in self.onsets.iter().enumerate() {
            let end = ticks.get(i + 1).copied().unwrap_or(ticks[i] + ppq as u64);
            for &p in &onset.pitches {
                events.push((ticks[i], true, p));
                events.push((end.max(ticks[i] + 1), false, p));
            }
        }
        events.sort_by_key(|&(t, on, k)| (t, on, k));

        let mut track: Vec<TrackEvent<'static>> = Vec::with_capacity(events.len() + 1);
        let mut now = 0u64;
        for (t, on, key) in events {
            let message = if on {
                MidiMessage::NoteOn {
                    key: key.into(),
                    vel: 80.into(),
                }
            } else {
                MidiMessage::NoteOff {
                    key: key.into(),
                    vel: 0.into(),
                }
            };
            track.push(TrackEvent {
                delta: ((t - now) as u32).into(),
                kind: TrackEventKind::Midi {
                    channel: 0.into(),
                    message,
                },
            });
            now = t;
        }
        track.push(TrackEvent {
            delta: 0.into(),
            kind: TrackEventKind::Meta(MetaMessage::EndOfTrack),
        });

        let mut smf = Smf::new(Header::new(Format::SingleTrack, Timing::Metrical(ppq.into())));
        smf.tracks.push(track);
        let mut out = Vec::new();
        smf.write_std(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

/// Parses an in-memory standard MIDI file, grouping note-ons into chords.
///
/// A note-on joins the current chord if its tick is within `chord_tolerance`
/// of the chord's first note-on; otherwise it starts a new chord.
pub fn parse_midi(bytes: &[u8], chord_tolerance: u64) -> Result<ScoreSequence, ScoreError> {
    let smf = Smf::parse(bytes).map_err(|e| ScoreError::Midi(e.to_string()))?;
    let ppq = match smf.header.timing {
        Timing::Metrical(ppq) if ppq.as_int() > 0 => ppq.as_int() as f64,
        Timing::Metrical(_) => return Err(ScoreError::Midi("zero ticks per quarter note".into())),
        Timing::Timecode(..) => return Err(ScoreError::SmpteDivision),
    };

    let mut notes: Vec<(u64, u8)> = Vec::new();
    for track in &smf.tracks {
        let mut tick = 0u64;
        for event in track {
            tick += event.delta.as_int() as u64;
            if let TrackEventKind::Midi {
                message: MidiMessage::NoteOn { key, vel },
                ..
            } = event.kind
            {
                if vel.as_int() > 0 {
                    notes.push((tick, key.as_int()));
                }
            }
        }
    }
    if notes.is_empty() {
        return Err(ScoreError::NoNotes);
    }
    notes.sort_unstable();

    let mut chords: Vec<(u64, BTreeSet<u8>)> = Vec::new();
    for (tick, key) in notes {
        match chords.last_mut() {
            Some((first, pitches)) if tick - *first <= chord_tolerance => {
                pitches.insert(key);
            }
            _ => chords.push((tick, BTreeSet::from([key]))),
        }
    }
    ScoreSequence::new(
        chords
            .into_iter()
            .map(|(tick, pitches)| ScoreOnset {
                beat: tick as f64 / ppq,
                pitches,
            })
            .collect(),
    )
}

pub fn from_midi(path: impl AsRef<Path>, chord_tolerance: u64) -> Result<ScoreSequence, ScoreError> {
    parse_midi(&read(path.as_ref())?, chord_tolerance)
}

#[derive(Deserialize)]
struct JsonOnset {
    beat: f64,
    pitches: Vec<i64>,
}

/// Parses the JSON chord list `[{"beat": 0, "pitches": [60, 64]}, ...]`.
pub fn parse_json(text: &str) -> Result<ScoreSequence, ScoreError> {
    let raw: Vec<JsonOnset> = serde_json::from_str(text).map_err(|e| ScoreError::Json(e.to_string()))?;
    let mut onsets = Vec::with_capacity(raw.len());
    for (index, o) in raw.into_iter().enumerate() {
        let mut pitches = BTreeSet::new();
        for p in o.pitches {
            let pitch = u8::try_from(p)
                .ok()
                .filter(|&p| p <= 127)
                .ok_or(ScoreError::PitchOutOfRange {
                    index,
                    pitch: p,
                    lo: 0,
                    hi: 127,
                })?;
            pitches.insert(pitch);
        }
        onsets.push(ScoreOnset { beat: o.beat, pitches });
    }
    ScoreSequence::new(onsets)
}

pub fn from_json(path: impl AsRef<Path>) -> Result<ScoreSequence, ScoreError> {
    let bytes = read(path.as_ref())?;
    parse_json(&String::from_utf8_lossy(&bytes))
}

pub fn to_json(score: &ScoreSequence) -> String {
    let items: Vec<serde_json::Value> = score
        .onsets()
        .iter()
        .map(|o| serde_json::json!({ "beat": o.beat, "pitches": o.pitches }))
        .collect();
    serde_json::to_string(&items).expect("score serializes")
}

/// Loads a score, choosing the parser from the file extension.
pub fn load_score(path: impl AsRef<Path>, chord_tolerance: u64) -> Result<ScoreSequence, ScoreError> {
    let path = path.as_ref();
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("mid" | "midi" | "smf") => from_midi(path, chord_tolerance),
        Some("json") => from_json(path),
        _ => Err(ScoreError::UnknownExtension(path.display().to_string())),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, ScoreError> {
    fs::read(path).map_err(|source| ScoreError::Unreadable {
        path: path.display().to_string(),
        source,
    })
}
