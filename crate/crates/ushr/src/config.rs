//! Acquisition and algorithm parameters, their validation, and the sizes
//! derived from them.
//!
//! Every other module takes a [`DerivedSizes`] rather than re-deriving
//! buffer lengths, so the arithmetic here is the single source of truth
//! for window/stride frame counts, FFT lengths and the heart-rate band
//! bin range.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Hard cap on FFT lengths supported by the fixed-point kernels.
pub const MAX_NFFT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parameter {name} must be positive (got {value})")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("adc_bits must be in 1..=16 (got {0})")]
    AdcBitsOutOfRange(u32),
    #[error("samples_per_frame must be at least 2 (got {0})")]
    FrameTooShort(usize),
    #[error("echo window of {window_s} s does not fit within one pulse repetition interval of {pri_s} s")]
    EchoExceedsPulseInterval { window_s: f64, pri_s: f64 },
    #[error("window of {n_pulses} frames is too short: {reason}")]
    WindowTooShort { n_pulses: usize, reason: &'static str },
    #[error("window of {n_pulses} frames needs an FFT longer than {MAX_NFFT}")]
    WindowTooLong { n_pulses: usize },
    #[error("heart-rate band [{lo_hz}, {hi_hz}] Hz is invalid: {reason}")]
    BandOutOfRange {
        lo_hz: f64,
        hi_hz: f64,
        reason: &'static str,
    },
    #[error("bin {bin} out of range (nfft_slow = {nfft_slow})")]
    IndexOutOfRange { bin: usize, nfft_slow: usize },
    #[error("config line {line}: {msg}")]
    InvalidConfigText { line: usize, msg: String },
}

/// Axis along which the M-mode matrix is differentiated before the 2D FFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffAxis {
    /// Across pulses (the pulse-repetition-time axis). This computes
    /// inter-pulse tissue velocity, which carries the heartbeat.
    #[default]
    SlowTime,
    /// Within one echo (the fast-time sample axis).
    FastTime,
}

impl fmt::Display for DiffAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffAxis::SlowTime => write!(f, "slow_time"),
            DiffAxis::FastTime => write!(f, "fast_time"),
        }
    }
}

impl FromStr for DiffAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "slow_time" | "slow" => Ok(DiffAxis::SlowTime),
            "fast_time" | "fast" => Ok(DiffAxis::FastTime),
            other => Err(format!("unknown diff axis `{other}`")),
        }
    }
}

/// Arithmetic used by the DSP pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NumericMode {
    /// Double-precision reference path.
    #[default]
    Float,
    /// Saturating q1.15 fixed-point path mirroring the embedded kernels.
    FixedQ15,
}

impl fmt::Display for NumericMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericMode::Float => write!(f, "float"),
            NumericMode::FixedQ15 => write!(f, "fixed_q15"),
        }
    }
}

impl FromStr for NumericMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "float" => Ok(NumericMode::Float),
            "fixed_q15" | "fixed" => Ok(NumericMode::FixedQ15),
            other => Err(format!("unknown numeric mode `{other}`")),
        }
    }
}

/// Pulse-echo acquisition parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionConfig {
    /// Pulse repetition frequency: echoes per second (slow-time rate).
    pub prf_hz: f64,
    /// Fast-time sample rate within one echo, samples/s.
    pub fs_hz: f64,
    /// Samples digitized per echo.
    pub samples_per_frame: usize,
    /// ADC resolution in bits; counts are signed, adc_bits wide.
    pub adc_bits: u32,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            prf_hz: 25.0,
            fs_hz: 4_000_000.0,
            samples_per_frame: 50,
            adc_bits: 12,
        }
    }
}

/// Heart-rate extraction algorithm parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Length of the M-mode window used per estimate, seconds.
    pub window_s: f64,
    /// Interval between estimates, seconds.
    pub stride_s: f64,
    /// Lower edge of the heart-rate search band, Hz.
    pub band_lo_hz: f64,
    /// Upper edge of the heart-rate search band, Hz.
    pub band_hi_hz: f64,
    pub diff_axis: DiffAxis,
    pub numeric_mode: NumericMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_s: 20.0,
            stride_s: 2.0,
            band_lo_hz: 0.5,
            band_hi_hz: 2.0,
            diff_axis: DiffAxis::default(),
            numeric_mode: NumericMode::default(),
        }
    }
}

/// Buffer and transform sizes derived from a validated config pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedSizes {
    /// Frames per window.
    pub n_pulses: usize,
    /// Frames per stride.
    pub n_stride: usize,
    /// Fast-time FFT length (next power of two >= samples_per_frame).
    pub nfft_fast: usize,
    /// Slow-time FFT length (next power of two >= n_pulses).
    pub nfft_slow: usize,
    /// First slow-time bin inside the heart-rate band (inclusive).
    pub band_bin_lo: usize,
    /// Last slow-time bin inside the heart-rate band (inclusive).
    pub band_bin_hi: usize,
    /// band_bin_hi - band_bin_lo + 1.
    pub n_band_bins: usize,
    // prf_hz / nfft_slow; private so it cannot drift from the fields above.
    bin_width: f64,
}

impl DerivedSizes {
    /// Slow-time frequency resolution, Hz per bin.
    pub fn bin_width_hz(&self) -> f64 {
        self.bin_width
    }

    /// Number of retained fast-time spectrum bins per row.
    pub fn n_fast_bins(&self) -> usize {
        self.nfft_fast / 2 + 1
    }

    fn new(
        n_pulses: usize,
        n_stride: usize,
        nfft_fast: usize,
        nfft_slow: usize,
        band_bin_lo: usize,
        band_bin_hi: usize,
        bin_width: f64,
    ) -> Self {
        Self {
            n_pulses,
            n_stride,
            nfft_fast,
            nfft_slow,
            band_bin_lo,
            band_bin_hi,
            n_band_bins: band_bin_hi - band_bin_lo + 1,
            bin_width,
        }
    }
}

/// Validate an acquisition/pipeline config pair and derive all sizes.
pub fn validate_config(
    acq: &AcquisitionConfig,
    pipe: &PipelineConfig,
) -> Result<DerivedSizes, ConfigError> {
    fn positive(name: &'static str, value: f64) -> Result<(), ConfigError> {
        if value > 0.0 && value.is_finite() {
            Ok(())
        } else {
            Err(ConfigError::NonPositiveParameter { name, value })
        }
    }

    positive("prf_hz", acq.prf_hz)?;
    positive("fs_hz", acq.fs_hz)?;
    if acq.samples_per_frame < 2 {
        return Err(ConfigError::FrameTooShort(acq.samples_per_frame));
    }
    if !(1..=16).contains(&acq.adc_bits) {
        return Err(ConfigError::AdcBitsOutOfRange(acq.adc_bits));
    }
    let depth_window_s = acq.samples_per_frame as f64 / acq.fs_hz;
    if depth_window_s * acq.prf_hz >= 1.0 {
        return Err(ConfigError::EchoExceedsPulseInterval {
            window_s: depth_window_s,
            pri_s: 1.0 / acq.prf_hz,
        });
    }

    positive("window_s", pipe.window_s)?;
    positive("stride_s", pipe.stride_s)?;
    positive("band_lo_hz", pipe.band_lo_hz)?;
    positive("band_hi_hz", pipe.band_hi_hz)?;
    if pipe.stride_s > pipe.window_s {
        return Err(ConfigError::WindowTooShort {
            n_pulses: (pipe.window_s * acq.prf_hz).round() as usize,
            reason: "stride exceeds window",
        });
    }

    let n_pulses = (pipe.window_s * acq.prf_hz).round() as usize;
    if n_pulses < 4 {
        return Err(ConfigError::WindowTooShort {
            n_pulses,
            reason: "fewer than 4 frames per window",
        });
    }
    let n_stride = ((pipe.stride_s * acq.prf_hz).round() as usize).max(1);

    let nfft_fast = acq.samples_per_frame.next_power_of_two();
    let nfft_slow = n_pulses.next_power_of_two();
    if nfft_slow > MAX_NFFT || nfft_fast > MAX_NFFT {
        return Err(ConfigError::WindowTooLong { n_pulses });
    }

    let nyquist = acq.prf_hz / 2.0;
    if pipe.band_lo_hz >= pipe.band_hi_hz {
        return Err(ConfigError::BandOutOfRange {
            lo_hz: pipe.band_lo_hz,
            hi_hz: pipe.band_hi_hz,
            reason: "lower edge not below upper edge",
        });
    }
    if pipe.band_hi_hz > nyquist {
        return Err(ConfigError::BandOutOfRange {
            lo_hz: pipe.band_lo_hz,
            hi_hz: pipe.band_hi_hz,
            reason: "upper edge above slow-time Nyquist",
        });
    }

    // ceil/floor so the searched bins never extend past the requested band.
    let band_bin_lo = (pipe.band_lo_hz * nfft_slow as f64 / acq.prf_hz).ceil() as usize;
    let band_bin_hi = (pipe.band_hi_hz * nfft_slow as f64 / acq.prf_hz).floor() as usize;
    if band_bin_lo > band_bin_hi {
        return Err(ConfigError::BandOutOfRange {
            lo_hz: pipe.band_lo_hz,
            hi_hz: pipe.band_hi_hz,
            reason: "no slow-time bin falls inside the band",
        });
    }

    Ok(DerivedSizes::new(
        n_pulses,
        n_stride,
        nfft_fast,
        nfft_slow,
        band_bin_lo,
        band_bin_hi,
        acq.prf_hz / nfft_slow as f64,
    ))
}

/// Convert a slow-time bin index to beats per minute.
pub fn bin_to_bpm(bin: usize, sizes: &DerivedSizes) -> Result<f64, ConfigError> {
    if bin >= sizes.nfft_slow {
        return Err(ConfigError::IndexOutOfRange {
            bin,
            nfft_slow: sizes.nfft_slow,
        });
    }
    Ok(bin as f64 * sizes.bin_width_hz() * 60.0)
}

/// An acquisition/pipeline pair, the unit the CLI loads from `--config`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub acq: AcquisitionConfig,
    pub pipe: PipelineConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<DerivedSizes, ConfigError> {
        validate_config(&self.acq, &self.pipe)
    }

    /// Serialize as the flat `key = value` text format.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("prf_hz", self.acq.prf_hz.to_string());
        push("fs_hz", self.acq.fs_hz.to_string());
        push("samples_per_frame", self.acq.samples_per_frame.to_string());
        push("adc_bits", self.acq.adc_bits.to_string());
        push("window_s", self.pipe.window_s.to_string());
        push("stride_s", self.pipe.stride_s.to_string());
        push("band_lo_hz", self.pipe.band_lo_hz.to_string());
        push("band_hi_hz", self.pipe.band_hi_hz.to_string());
        push("diff_axis", self.pipe.diff_axis.to_string());
        push("numeric_mode", self.pipe.numeric_mode.to_string());
        out
    }

    /// Parse the flat `key = value` format. Keys not present keep their
    /// defaults; unknown or repeated keys are rejected.
    pub fn from_kv_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::InvalidConfigText {
                line: line_no,
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if seen.contains(&key) {
                return Err(ConfigError::InvalidConfigText {
                    line: line_no,
                    msg: format!("duplicate key `{key}`"),
                });
            }

            fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
                v.parse().map_err(|_| ConfigError::InvalidConfigText {
                    line,
                    msg: format!("invalid value `{v}` for `{key}`"),
                })
            }

            match key {
                "prf_hz" => cfg.acq.prf_hz = num(line_no, key, value)?,
                "fs_hz" => cfg.acq.fs_hz = num(line_no, key, value)?,
                "samples_per_frame" => cfg.acq.samples_per_frame = num(line_no, key, value)?,
                "adc_bits" => cfg.acq.adc_bits = num(line_no, key, value)?,
                "window_s" => cfg.pipe.window_s = num(line_no, key, value)?,
                "stride_s" => cfg.pipe.stride_s = num(line_no, key, value)?,
                "band_lo_hz" => cfg.pipe.band_lo_hz = num(line_no, key, value)?,
                "band_hi_hz" => cfg.pipe.band_hi_hz = num(line_no, key, value)?,
                "diff_axis" => {
                    cfg.pipe.diff_axis = value.parse().map_err(|msg| {
                        ConfigError::InvalidConfigText { line: line_no, msg }
                    })?
                }
                "numeric_mode" => {
                    cfg.pipe.numeric_mode = value.parse().map_err(|msg| {
                        ConfigError::InvalidConfigText { line: line_no, msg }
                    })?
                }
                other => {
                    return Err(ConfigError::InvalidConfigText {
                        line: line_no,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
            seen.push(key);
        }
        Ok(cfg)
    }
}
