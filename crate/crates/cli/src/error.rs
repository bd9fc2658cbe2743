use std::fmt;
use std::process::ExitCode;

use scorealign::{AlignError, AudioError, EvalError, FilterbankError, ScoreError};

/// Failure of a subcommand, tagged with the stage that raised it.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Score(String),
    Config(String),
    Infeasible(String),
    Eval(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Io(_) => 3,
            CliError::Score(_) => 4,
            CliError::Config(_) => 5,
            CliError::Infeasible(_) => 6,
            CliError::Eval(_) => 7,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Score(m) => write!(f, "score error: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Infeasible(m) => write!(f, "alignment error: {m}"),
            CliError::Eval(m) => write!(f, "evaluation error: {m}"),
        }
    }
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        match e {
            AudioError::InvalidBuffer(_) => CliError::Config(e.to_string()),
            _ => CliError::Io(format!("audio: {e}")),
        }
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::Unreadable { .. } => CliError::Io(e.to_string()),
            ScoreError::PitchOutOfRange { .. } => CliError::Config(e.to_string()),
            _ => CliError::Score(e.to_string()),
        }
    }
}

impl From<FilterbankError> for CliError {
    fn from(e: FilterbankError) -> Self {
        match e {
            FilterbankError::EmptyAudio | FilterbankError::TooShort { .. } => CliError::Io(format!("audio: {e}")),
            _ => CliError::Config(format!("filterbank: {e}")),
        }
    }
}

impl From<AlignError> for CliError {
    fn from(e: AlignError) -> Self {
        match e {
            AlignError::NoFeasiblePath { .. } => CliError::Infeasible(e.to_string()),
            AlignError::EmptyFeatures => CliError::Io(format!("features: {e}")),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidTempoMap(_) | EvalError::BeatBeforeMap { .. } => CliError::Config(e.to_string()),
            _ => CliError::Eval(e.to_string()),
        }
    }
}

impl From<scorealign::Error> for CliError {
    fn from(e: scorealign::Error) -> Self {
        use scorealign::Error as E;
        match e {
            E::Audio(e) => e.into(),
            E::Filterbank(e) => e.into(),
            E::Score(e) => e.into(),
            E::Align(e) => e.into(),
            E::Eval(e) => e.into(),
            E::Csv(e) => CliError::Io(e.to_string()),
        }
    }
}
