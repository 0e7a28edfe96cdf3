//! Command-line front end: synthesize recordings, extract heart rate,
//! sweep window/stride grids, validate against a reference series, and
//! evaluate the analytical energy model.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 data.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ushr::config::{DiffAxis, NumericMode, RunConfig};
use ushr::container::{
    read_recording, write_recording, PositionLabel, RecordingHeader, SampleFormat,
};
use ushr::model::{eval_energy, EnergyModel};
use ushr::pipeline::{Frame, Pipeline};
use ushr::series::{align, HrSeries, SeriesError};
use ushr::stats::{bland_altman, pearson};
use ushr::sweep::{run_sweep, sweep_to_csv, SweepError, TruthRecording};
use ushr::synth::{
    generate_recording, scale_to_counts, simulate_acquisition, EnvelopeParams, PulseShape,
    SynthConfig,
};

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure {
            code: 2,
            msg: msg.into(),
        }
    }
    fn io(msg: impl Into<String>) -> Self {
        Failure {
            code: 3,
            msg: msg.into(),
        }
    }
    fn data(msg: impl Into<String>) -> Self {
        Failure {
            code: 4,
            msg: msg.into(),
        }
    }
}

impl From<ushr::pipeline::PipelineError> for Failure {
    fn from(e: ushr::pipeline::PipelineError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<ushr::config::ConfigError> for Failure {
    fn from(e: ushr::config::ConfigError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<ushr::synth::SynthError> for Failure {
    fn from(e: ushr::synth::SynthError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<ushr::container::ContainerError> for Failure {
    fn from(e: ushr::container::ContainerError) -> Self {
        Failure::io(e.to_string())
    }
}

impl From<SeriesError> for Failure {
    fn from(e: SeriesError) -> Self {
        match e {
            SeriesError::Io(m) => Failure::io(m),
            other => Failure::data(other.to_string()),
        }
    }
}

impl From<ushr::stats::StatsError> for Failure {
    fn from(e: ushr::stats::StatsError) -> Self {
        Failure::data(e.to_string())
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::EmptyGrid => Failure::usage(e.to_string()),
            SweepError::NoEstimates { .. } => Failure::data(e.to_string()),
            SweepError::Pipeline(p) => p.into(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ushr",
    about = "Ultrasound heart-rate extraction toolkit",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a recording with a known heart rate
    Synth(SynthArgs),
    /// Extract a heart-rate series from a recording
    Extract(ExtractArgs),
    /// Evaluate accuracy and resource models over a window/stride grid
    Sweep(SweepArgs),
    /// Compare an estimate series against a reference series
    Validate(ValidateArgs),
    /// Evaluate the average-power model
    Energy(EnergyArgs),
}

/// Acquisition/pipeline parameters shared by several subcommands; values
/// from `--config` are used unless overridden by an explicit flag.
#[derive(Args, Clone, Default)]
struct CommonConfig {
    /// Key-value config file (one `key = value` per line)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Window length in seconds
    #[arg(long, value_name = "S")]
    window: Option<f64>,
    /// Stride between estimates in seconds
    #[arg(long, value_name = "S")]
    stride: Option<f64>,
    /// Numeric mode: float | fixed
    #[arg(long, value_name = "MODE")]
    mode: Option<NumericMode>,
    /// Differentiation axis: slow | fast
    #[arg(long, value_name = "AXIS")]
    diff_axis: Option<DiffAxis>,
}

impl CommonConfig {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
                RunConfig::from_kv_str(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(w) = self.window {
            cfg.pipe.window_s = w;
        }
        if let Some(s) = self.stride {
            cfg.pipe.stride_s = s;
        }
        if let Some(m) = self.mode {
            cfg.pipe.numeric_mode = m;
        }
        if let Some(d) = self.diff_axis {
            cfg.pipe.diff_axis = d;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// True heart rate in bpm
    #[arg(long)]
    hr: f64,
    /// Recording length in seconds
    #[arg(long, default_value_t = 60.0)]
    duration: f64,
    /// Noise seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// RF signal-to-noise ratio in dB (inf disables noise)
    #[arg(long, default_value_t = f64::INFINITY)]
    snr_db: f64,
    /// Wall-motion amplitude in meters
    #[arg(long, default_value_t = 1.5e-4)]
    wall_amp: f64,
    /// Wall-motion waveform: sine | raised-cosine
    #[arg(long, default_value = "raised-cosine")]
    waveform: String,
    /// Harmonics of the raised-cosine waveform
    #[arg(long, default_value_t = 3)]
    harmonics: u32,
    /// Write raw high-rate RF frames (f32) instead of the enveloped,
    /// decimated, quantized ADC stream (i16)
    #[arg(long)]
    raw: bool,
    /// Wrist position label stored in the header
    #[arg(long, value_name = "POS")]
    position: Option<String>,
    #[command(flatten)]
    common: CommonConfig,
    /// Output recording path
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    /// Input recording
    #[arg(short, long, value_name = "FILE")]
    input: PathBuf,
    /// Output CSV path (stdout if omitted)
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Emit only estimates computed on a full window
    #[arg(long)]
    full_only: bool,
    #[command(flatten)]
    common: CommonConfig,
}

#[derive(Args)]
struct SweepArgs {
    /// Input recordings (repeatable); headers must carry truth_bpm
    #[arg(short, long = "input", value_name = "FILE", required = true)]
    inputs: Vec<PathBuf>,
    /// Comma-separated window lengths in seconds
    #[arg(long, value_delimiter = ',', required = true)]
    windows: Vec<f64>,
    /// Comma-separated strides in seconds
    #[arg(long, value_delimiter = ',', required = true)]
    strides: Vec<f64>,
    #[command(flatten)]
    energy: EnergyParams,
    #[command(flatten)]
    common: CommonConfig,
    /// Output CSV path (stdout if omitted)
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Estimate series CSV
    #[arg(long, value_name = "FILE")]
    est: PathBuf,
    /// Reference series CSV
    #[arg(long = "ref", value_name = "FILE")]
    reference: PathBuf,
    /// Pairing tolerance in seconds
    #[arg(long, default_value_t = 1.0)]
    max_dt: f64,
    /// Output JSON path (stdout always gets a copy)
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

/// Energy-model coefficients. In `sweep`, stride and PRF come from the
/// grid cell and the recording; the standalone `energy` command takes
/// them as flags.
#[derive(Args, Clone, Copy)]
struct EnergyParams {
    /// Energy per DSP event, J
    #[arg(long, default_value_t = 1.21e-3)]
    e_dsp: f64,
    /// Energy per pulse acquisition, J
    #[arg(long, default_value_t = 0.0)]
    e_pulse: f64,
    /// Sleep floor, W
    #[arg(long, default_value_t = 0.0)]
    p_sleep: f64,
}

#[derive(Args, Clone, Copy)]
struct EnergyArgs {
    #[command(flatten)]
    params: EnergyParams,
    /// Stride between DSP events, s
    #[arg(long, default_value_t = 2.0)]
    stride: f64,
    /// Pulse repetition frequency, Hz
    #[arg(long, default_value_t = 25.0)]
    prf: f64,
}

impl EnergyArgs {
    fn model(&self) -> EnergyModel {
        EnergyModel {
            e_dsp_j: self.params.e_dsp,
            e_pulse_j: self.params.e_pulse,
            p_sleep_w: self.params.p_sleep,
            stride_s: self.stride,
            prf_hz: self.prf,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Energy(args) => cmd_energy(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_synth(args: SynthArgs) -> Result<(), Failure> {
    let cfg = args.common.resolve()?;
    let acq = cfg.acq;
    let pulse_shape = match args.waveform.as_str() {
        "sine" => PulseShape::Sine,
        "raised-cosine" => PulseShape::RaisedCosineHarmonics(args.harmonics),
        other => return Err(Failure::usage(format!("unknown waveform `{other}`"))),
    };
    let position = match args.position.as_deref() {
        None => None,
        Some("lateral") => Some(PositionLabel::Lateral),
        Some("central") => Some(PositionLabel::Central),
        Some("medial") => Some(PositionLabel::Medial),
        Some(other) => return Err(Failure::usage(format!("unknown position `{other}`"))),
    };
    let synth = SynthConfig {
        hr_bpm: args.hr,
        wall_amp_m: args.wall_amp,
        pulse_shape,
        snr_db: args.snr_db,
        duration_s: args.duration,
        seed: args.seed,
        ..Default::default()
    };

    let (frames, truth_bpm, fs_hz, sample_format) = if args.raw {
        let (raw, truth) = generate_recording(&synth, &acq)?;
        let frames: Vec<Frame> = raw
            .iter()
            .map(|f| scale_to_counts(f, acq.adc_bits))
            .collect();
        (frames, truth, synth.fs_sim_hz, SampleFormat::F32le)
    } else {
        let (frames, truth) = simulate_acquisition(&synth, &acq, &EnvelopeParams::default())?;
        (frames, truth, acq.fs_hz, SampleFormat::I16le)
    };

    let header = RecordingHeader {
        prf_hz: acq.prf_hz,
        fs_hz,
        samples_per_frame: frames[0].samples.len() as u32,
        n_frames: frames.len() as u32,
        sample_format,
        truth_bpm: Some(truth_bpm),
        position_label: position,
    };
    write_recording(&args.output, &header, &frames)?;
    println!("truth_bpm = {truth_bpm}");
    Ok(())
}

fn load_recording(path: &Path, cfg: &RunConfig) -> Result<(TruthRecording, RecordingHeader, ushr::config::AcquisitionConfig), Failure> {
    let (header, frames) = read_recording(path)?;
    let acq = ushr::config::AcquisitionConfig {
        prf_hz: header.prf_hz,
        fs_hz: header.fs_hz,
        samples_per_frame: header.samples_per_frame as usize,
        adc_bits: cfg.acq.adc_bits,
    };
    let truth_bpm = header.truth_bpm.unwrap_or(f64::NAN);
    Ok((TruthRecording { frames, truth_bpm }, header, acq))
}

fn cmd_extract(args: ExtractArgs) -> Result<(), Failure> {
    let cfg = args.common.resolve()?;
    let (rec, _, acq) = load_recording(&args.input, &cfg)?;
    let mut pipeline = Pipeline::new(acq, cfg.pipe.clone())?;
    let estimates = pipeline.stream(rec.frames.into_iter())?;
    let points: Vec<(f64, f64)> = estimates
        .iter()
        .filter(|e| !args.full_only || e.window_fill >= 1.0)
        .map(|e| (e.timestamp_s, e.bpm))
        .collect();
    let series = HrSeries::new(points).map_err(|e| Failure::data(e.to_string()))?;
    match &args.output {
        Some(path) => series.write_csv(path)?,
        None => print!("{}", series.to_csv_string()),
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let cfg = args.common.resolve()?;
    let mut recordings = Vec::new();
    let mut acq = cfg.acq.clone();
    for path in &args.inputs {
        let (rec, header, rec_acq) = load_recording(path, &cfg)?;
        if header.truth_bpm.is_none() {
            return Err(Failure::data(format!(
                "{}: header carries no truth_bpm; sweep needs ground truth",
                path.display()
            )));
        }
        acq = rec_acq;
        recordings.push(rec);
    }
    let energy = EnergyModel {
        e_dsp_j: args.energy.e_dsp,
        e_pulse_j: args.energy.e_pulse,
        p_sleep_w: args.energy.p_sleep,
        ..Default::default()
    };
    let cells = run_sweep(
        &recordings,
        &acq,
        &cfg.pipe,
        &args.windows,
        &args.strides,
        &energy,
    )?;
    let csv = sweep_to_csv(&cells);
    match &args.output {
        Some(path) => fs::write(path, csv).map_err(|e| Failure::io(e.to_string()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let est = HrSeries::read_csv(&args.est)?;
    let reference = HrSeries::read_csv(&args.reference)?;
    let aligned = align(&est, &reference, args.max_dt)?;
    // Surface an undefined correlation as a data error before reporting.
    pearson(&aligned.pairs)?;
    let stats = bland_altman(&aligned.pairs)?;
    let json = serde_json::to_string_pretty(&stats)
        .map_err(|e| Failure::data(e.to_string()))?;
    if let Some(path) = &args.output {
        fs::write(path, &json).map_err(|e| Failure::io(e.to_string()))?;
    }
    println!("{json}");
    if aligned.dropped > 0 {
        eprintln!("note: {} estimates had no reference within tolerance", aligned.dropped);
    }
    Ok(())
}

fn cmd_energy(args: EnergyArgs) -> Result<(), Failure> {
    let p = eval_energy(&args.model());
    println!("p_avg_w = {p}");
    Ok(())
}
