mod config;
mod error;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use scorealign::audio_io::{self, SampleFormat};
use scorealign::export::{self, Precision};
use scorealign::features::{extract_features_with, FeaturePair};
use scorealign::synth_eval::{evaluate, synthesize, SynthOptions, TempoMap};
use scorealign::{dp_align, filterbank, score, Spectrogram};

use config::Tuning;
use error::CliError;

#[derive(Parser)]
#[command(name = "scorealign", version, about = "Align piano recordings to symbolic scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Place every score chord on an audio frame.
    Align(AlignArgs),
    /// Export a filterbank or activation matrix as CSV.
    Features(FeaturesArgs),
    /// Render a score to WAV with a ground-truth onset CSV.
    Synth(SynthArgs),
    /// Compare an alignment CSV against ground truth.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Feature {
    Raw,
    Spec,
    Onsets,
}

#[derive(clap::Args)]
struct AlignArgs {
    /// Recording (WAV).
    #[arg(long, required_unless_present = "onsets", conflicts_with_all = ["onsets", "spec"])]
    audio: Option<PathBuf>,
    /// Onset activation CSV from `features --feature onsets`, used instead of audio.
    #[arg(long, requires = "spec")]
    onsets: Option<PathBuf>,
    /// Spectral activation CSV from `features --feature spec`.
    #[arg(long, requires = "onsets")]
    spec: Option<PathBuf>,
    /// Score (.mid, .midi or .json).
    #[arg(long)]
    score: PathBuf,
    /// MIDI ticks within which note-ons form one chord.
    #[arg(long, default_value_t = 0)]
    chord_tolerance: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// `key=value` tuning file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(clap::Args)]
struct FeaturesArgs {
    #[arg(long)]
    audio: PathBuf,
    #[arg(long, value_enum, default_value = "spec")]
    feature: Feature,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write shortest round-trip numbers instead of six significant digits.
    #[arg(long)]
    full_precision: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    score: PathBuf,
    #[arg(long, default_value_t = 0)]
    chord_tolerance: u64,
    /// Output WAV.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth CSV; defaults to the WAV path with a .csv extension.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Constant tempo in beats per minute.
    #[arg(long, default_value_t = 120.0, conflicts_with = "tempo_map")]
    bpm: f64,
    /// Piecewise tempo as `beat:bpm` pairs, e.g. `0:120,8:96`.
    #[arg(long)]
    tempo_map: Option<String>,
    #[arg(long, default_value_t = 44100)]
    sample_rate: u32,
    /// Noise RMS relative to the signal peak.
    #[arg(long, default_value_t = 0.0)]
    noise_level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds of silence before the first chord.
    #[arg(long, default_value_t = 0.0)]
    lead_in: f64,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Alignment CSV written by `align`.
    #[arg(long)]
    alignment: PathBuf,
    /// Ground-truth CSV written by `synth`.
    #[arg(long)]
    truth: PathBuf,
    /// Also write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Align(a) => cmd_align(a),
        Command::Features(a) => cmd_features(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scorealign: {e}");
            e.exit_code()
        }
    }
}

fn require_files<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<(), CliError> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::Io(format!("no such file: {}", p.display())));
        }
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn tuning(flags: Tuning, file: Option<&Path>) -> Result<Tuning, CliError> {
    Ok(match file {
        Some(p) => flags.over(Tuning::from_file(p)?),
        None => flags,
    })
}

fn dumped_matrix(path: &Path, frame_rate: f64) -> Result<Spectrogram, CliError> {
    export::spectrogram_from_csv(&read_text(path)?, frame_rate)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn cmd_align(a: AlignArgs) -> Result<(), CliError> {
    let inputs = [
        Some(&a.score),
        a.audio.as_ref(),
        a.onsets.as_ref(),
        a.spec.as_ref(),
        a.config.as_ref(),
    ];
    require_files(inputs.into_iter().flatten().map(PathBuf::as_path))?;
    let t = tuning(a.tuning, a.config.as_deref())?;
    let fb = t.filterbank();
    fb.validate()?;
    let params = t.alignment();
    params.validate()?;
    let chords = score::load_score(&a.score, a.chord_tolerance)?;

    let features = match (&a.audio, &a.onsets, &a.spec) {
        (Some(audio), _, _) => {
            chords.check_pitch_range(fb.midi_low, fb.midi_high())?;
            let audio = audio_io::load_wav(audio)?;
            let raw = filterbank::compute_spectrogram(&audio, &fb)?;
            extract_features_with(&raw, &t.features())
        }
        (None, Some(onsets), Some(spec)) => {
            let onsets = dumped_matrix(onsets, fb.frame_rate)?;
            let spec = dumped_matrix(spec, fb.frame_rate)?;
            if !onsets.same_shape(&spec) || onsets.band_pitches() != spec.band_pitches() {
                return Err(CliError::Io("onset and spectral dumps differ in shape".into()));
            }
            FeaturePair::new(onsets, spec)
        }
        _ => unreachable!("clap enforces either --audio or both dumps"),
    };

    let result = dp_align::align(&chords, &features, &params)?;
    let text = match a.format {
        Format::Csv => export::alignment_to_csv(&result),
        Format::Json => export::alignment_to_json(&result) + "\n",
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_features(a: FeaturesArgs) -> Result<(), CliError> {
    require_files(
        [Some(&a.audio), a.config.as_ref()]
            .into_iter()
            .flatten()
            .map(PathBuf::as_path),
    )?;
    let t = tuning(a.tuning, a.config.as_deref())?;
    let audio = audio_io::load_wav(&a.audio)?;
    let raw = filterbank::compute_spectrogram(&audio, &t.filterbank())?;
    let matrix = match a.feature {
        Feature::Raw => raw,
        Feature::Spec => extract_features_with(&raw, &t.features()).spec,
        Feature::Onsets => extract_features_with(&raw, &t.features()).onsets,
    };
    let precision = if a.full_precision {
        Precision::Full
    } else {
        Precision::SixDigits
    };
    emit(a.out.as_deref(), &export::spectrogram_to_csv(&matrix, precision))
}

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    require_files([a.score.as_path()])?;
    let chords = score::load_score(&a.score, a.chord_tolerance)?;
    let first_beat = chords.onsets()[0].beat;
    let tempo = match &a.tempo_map {
        Some(spec) => spec.parse::<TempoMap>()?,
        None => TempoMap::constant(a.bpm, first_beat)?,
    };
    let opts = SynthOptions {
        sample_rate: a.sample_rate,
        noise_level: a.noise_level,
        seed: a.seed,
        lead_in: a.lead_in,
        ..Default::default()
    };
    let (audio, truth) = synthesize(&chords, &tempo, &opts)?;
    audio_io::write_wav(&a.out, &[audio.samples()], audio.sample_rate(), SampleFormat::Int16)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", a.out.display())))?;
    let truth_path = a.truth.unwrap_or_else(|| a.out.with_extension("csv"));
    let beats: Vec<f64> = chords.beats().collect();
    emit(Some(&truth_path), &export::truth_to_csv(&beats, &truth))
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    require_files([a.alignment.as_path(), a.truth.as_path()])?;
    let predicted = export::alignment_from_csv(&read_text(&a.alignment)?)
        .map_err(|e| CliError::Io(format!("{}: {e}", a.alignment.display())))?;
    let (_, truth) = export::truth_from_csv(&read_text(&a.truth)?)
        .map_err(|e| CliError::Io(format!("{}: {e}", a.truth.display())))?;
    let times: Vec<f64> = predicted.iter().map(|e| e.time_s).collect();
    let report = evaluate(&times, &truth)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    print!("{}", report.to_text());
    println!("{json}");
    if let Some(out) = &a.out {
        emit(Some(out), &(json + "\n"))?;
    }
    Ok(())
}
