//! Streaming heart-rate extractor: FIFO window of cached fast-time
//! spectra, slow-time differentiation, per-column slow-time FFT,
//! band-limited magnitude accumulation and peak detection.
//!
//! Each pushed frame is transformed once and its half-spectrum cached in
//! the collection buffer; a DSP pass differentiates the cached rows
//! (valid by linearity of the DFT) instead of re-transforming raw
//! samples, so sliding the window never recomputes a spectrum.
//!
//! The pipeline runs in one of two numeric modes sharing the same
//! structure: double precision, or saturating q1.15 mirroring the
//! embedded kernel chain (expand, subtract, rfft, cfft, magnitude,
//! accumulate, max).

use rustfft::num_complex::Complex64;
use thiserror::Error;

use crate::config::{
    bin_to_bpm, validate_config, AcquisitionConfig, ConfigError, DerivedSizes, DiffAxis,
    NumericMode, PipelineConfig,
};
use crate::fxp::{
    add_sat, argmax, cfft_float, cfft_q15, cmplx_mag, rfft_float, rfft_q15, shift_sat,
    shift_sat_complex, sub_sat, sub_sat_complex, ComplexQ15, FxpError, Q15,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("frame has {got} samples, expected {expected}")]
    FrameLengthMismatch { expected: usize, got: usize },
    #[error("collection buffer holds {fill} rows, need at least 2")]
    InsufficientFill { fill: usize },
    #[error(transparent)]
    Kernel(#[from] FxpError),
}

/// One A-mode echo: `samples` are in ADC-count units of a signed,
/// `adc_bits`-wide converter (fractional values are allowed and are
/// quantized by the fixed-point path). Timestamps must increase by one
/// pulse-repetition interval per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub samples: Vec<f64>,
    pub timestamp_s: f64,
}

enum Rows {
    Float(Vec<Vec<Complex64>>),
    Fixed(Vec<Vec<ComplexQ15>>),
}

/// Circular store of per-frame fast-time half-spectra.
pub struct CollectionBuffer {
    rows: Rows,
    head: usize,
    fill: usize,
    capacity: usize,
    row_len: usize,
}

impl CollectionBuffer {
    fn new(sizes: &DerivedSizes, mode: NumericMode) -> Self {
        let capacity = sizes.n_pulses;
        let row_len = sizes.n_fast_bins();
        let rows = match mode {
            NumericMode::Float => {
                Rows::Float(vec![vec![Complex64::new(0.0, 0.0); row_len]; capacity])
            }
            NumericMode::FixedQ15 => Rows::Fixed(vec![vec![ComplexQ15::ZERO; row_len]; capacity]),
        };
        Self {
            rows,
            head: 0,
            fill: 0,
            capacity,
            row_len,
        }
    }

    pub fn fill(&self) -> usize {
        self.fill
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn head(&self) -> usize {
        self.head
    }

    /// Index of the i-th stored row in chronological order.
    fn chrono_index(&self, i: usize) -> usize {
        if self.fill < self.capacity {
            i
        } else {
            (self.head + i) % self.capacity
        }
    }

    fn clear(&mut self) {
        self.head = 0;
        self.fill = 0;
        match &mut self.rows {
            Rows::Float(rows) => rows
                .iter_mut()
                .for_each(|r| r.fill(Complex64::new(0.0, 0.0))),
            Rows::Fixed(rows) => rows.iter_mut().for_each(|r| r.fill(ComplexQ15::ZERO)),
        }
    }
}

/// One heart-rate reading with the band spectrum it was picked from.
#[derive(Debug, Clone, PartialEq)]
pub struct HrEstimate {
    pub bpm: f64,
    /// Absolute slow-time bin of the detected peak.
    pub peak_bin: usize,
    /// Accumulated band magnitudes, `band_bin_lo..=band_bin_hi`. Units
    /// depend on the numeric mode; only the shape is comparable across
    /// modes.
    pub band_spectrum: Vec<f64>,
    /// Fraction of the window that held data, 1.0 once the FIFO is full.
    pub window_fill: f64,
    /// Timestamp of the newest frame in the window.
    pub timestamp_s: f64,
}

impl HrEstimate {
    /// Peak magnitude; zero signals a degenerate (silent) spectrum and the
    /// bpm value then merely marks the low band edge.
    pub fn peak_value(&self) -> f64 {
        self.band_spectrum.iter().copied().fold(0.0f64, f64::max)
    }
}

/// Streaming extractor instance. Single-owner mutable state: one producer
/// pushes frames and runs the DSP; run independent instances for
/// parallelism across recordings.
pub struct Pipeline {
    acq: AcquisitionConfig,
    cfg: PipelineConfig,
    sizes: DerivedSizes,
    buffer: CollectionBuffer,
    pushed: u64,
    last_timestamp_s: f64,
}

impl Pipeline {
    pub fn new(acq: AcquisitionConfig, cfg: PipelineConfig) -> Result<Self, PipelineError> {
        let sizes = validate_config(&acq, &cfg)?;
        let buffer = CollectionBuffer::new(&sizes, cfg.numeric_mode);
        Ok(Self {
            acq,
            cfg,
            sizes,
            buffer,
            pushed: 0,
            last_timestamp_s: 0.0,
        })
    }

    pub fn sizes(&self) -> &DerivedSizes {
        &self.sizes
    }

    pub fn buffer(&self) -> &CollectionBuffer {
        &self.buffer
    }

    pub fn frames_pushed(&self) -> u64 {
        self.pushed
    }

    /// Transform one frame to its fast-time half-spectrum and store it,
    /// overwriting the oldest row once the window is full.
    pub fn push_frame(&mut self, frame: &Frame) -> Result<(), PipelineError> {
        if frame.samples.len() != self.acq.samples_per_frame {
            return Err(PipelineError::FrameLengthMismatch {
                expected: self.acq.samples_per_frame,
                got: frame.samples.len(),
            });
        }

        let head = self.buffer.head;
        match &mut self.buffer.rows {
            Rows::Float(rows) => {
                let scale = 1.0 / f64::from(1u32 << (self.acq.adc_bits - 1));
                let mut x: Vec<f64> = frame.samples.iter().map(|&v| v * scale).collect();
                if self.cfg.diff_axis == DiffAxis::FastTime {
                    x = x.windows(2).map(|w| w[1] - w[0]).collect();
                }
                rows[head] = rfft_float(&x, self.sizes.nfft_fast)?;
            }
            Rows::Fixed(rows) => {
                let half_scale = f64::from(1u32 << (self.acq.adc_bits - 1));
                let counts: Vec<Q15> = frame
                    .samples
                    .iter()
                    .map(|&v| Q15(v.round().clamp(-half_scale, half_scale - 1.0) as i16))
                    .collect();
                let mut x = shift_sat(&counts, 16 - self.acq.adc_bits as i32)?;
                if self.cfg.diff_axis == DiffAxis::FastTime {
                    x = sub_sat(&x[1..], &x[..x.len() - 1])?;
                }
                rows[head] = rfft_q15(&x, self.sizes.nfft_fast)?;
            }
        }

        self.buffer.head = (head + 1) % self.buffer.capacity;
        self.buffer.fill = (self.buffer.fill + 1).min(self.buffer.capacity);
        self.pushed += 1;
        self.last_timestamp_s = frame.timestamp_s;
        Ok(())
    }

    /// Run the window-sized DSP pass on the current buffer contents.
    pub fn run_dsp(&self) -> Result<HrEstimate, PipelineError> {
        let fill = self.buffer.fill;
        if fill < 2 {
            return Err(PipelineError::InsufficientFill { fill });
        }
        let sizes = &self.sizes;
        let n_band = sizes.n_band_bins;
        let band = sizes.band_bin_lo..=sizes.band_bin_hi;

        let (peak_idx, band_spectrum) = match &self.buffer.rows {
            Rows::Float(rows) => {
                let diffed = self.slow_time_rows_float(rows, fill);
                let mut acc = vec![0.0f64; n_band];
                let mut column = vec![Complex64::new(0.0, 0.0); sizes.nfft_slow];
                for c in 0..self.buffer.row_len {
                    column.fill(Complex64::new(0.0, 0.0));
                    for (t, row) in diffed.iter().enumerate() {
                        column[t] = row[c];
                    }
                    cfft_float(&mut column, sizes.nfft_slow)?;
                    for (a, z) in acc.iter_mut().zip(&column[band.clone()]) {
                        *a += z.norm();
                    }
                }
                (float_argmax(&acc), acc)
            }
            Rows::Fixed(rows) => {
                let mut diffed = self.slow_time_rows_fixed(rows, fill)?;
                // Block scaling: the differentiated rows are far below full
                // scale (differencing removed the static echo energy), so
                // boost them into the upper bits before the column FFT
                // halves them back down. The common gain cancels in the
                // peak search.
                let boost = headroom_shift(&diffed);
                if boost > 0 {
                    for row in &mut diffed {
                        *row = shift_sat_complex(row, boost)?;
                    }
                }
                let mut acc = vec![Q15::ZERO; n_band];
                let mut column = vec![ComplexQ15::ZERO; sizes.nfft_slow];
                for c in 0..self.buffer.row_len {
                    column.fill(ComplexQ15::ZERO);
                    for (t, row) in diffed.iter().enumerate() {
                        column[t] = row[c];
                    }
                    cfft_q15(&mut column, sizes.nfft_slow)?;
                    let mags = cmplx_mag(&column[band.clone()]);
                    acc = add_sat(&acc, &mags)?;
                }
                let (idx, _) = argmax(&acc)?;
                (idx, acc.iter().map(|q| q.to_f64()).collect())
            }
        };

        let peak_bin = sizes.band_bin_lo + peak_idx;
        Ok(HrEstimate {
            bpm: bin_to_bpm(peak_bin, sizes)?,
            peak_bin,
            band_spectrum,
            window_fill: fill as f64 / self.buffer.capacity as f64,
            timestamp_s: self.last_timestamp_s,
        })
    }

    // Chronological slow-time rows entering the column FFTs. On the
    // slow-time axis this is the first difference of the cached spectra
    // (fill - 1 rows); on the fast-time axis frames were differentiated
    // before caching, so the rows pass through unchanged.
    fn slow_time_rows_float(&self, rows: &[Vec<Complex64>], fill: usize) -> Vec<Vec<Complex64>> {
        match self.cfg.diff_axis {
            DiffAxis::SlowTime => (1..fill)
                .map(|i| {
                    let cur = &rows[self.buffer.chrono_index(i)];
                    let prev = &rows[self.buffer.chrono_index(i - 1)];
                    cur.iter().zip(prev).map(|(a, b)| a - b).collect()
                })
                .collect(),
            DiffAxis::FastTime => (0..fill)
                .map(|i| rows[self.buffer.chrono_index(i)].clone())
                .collect(),
        }
    }

    fn slow_time_rows_fixed(
        &self,
        rows: &[Vec<ComplexQ15>],
        fill: usize,
    ) -> Result<Vec<Vec<ComplexQ15>>, FxpError> {
        match self.cfg.diff_axis {
            DiffAxis::SlowTime => (1..fill)
                .map(|i| {
                    let cur = &rows[self.buffer.chrono_index(i)];
                    let prev = &rows[self.buffer.chrono_index(i - 1)];
                    sub_sat_complex(cur, prev)
                })
                .collect(),
            DiffAxis::FastTime => Ok((0..fill)
                .map(|i| rows[self.buffer.chrono_index(i)].clone())
                .collect()),
        }
    }

    /// Push every frame, emitting one estimate per stride once at least
    /// two frames are buffered. Estimates produced before the window has
    /// filled carry `window_fill < 1`.
    pub fn stream<I>(&mut self, frames: I) -> Result<Vec<HrEstimate>, PipelineError>
    where
        I: IntoIterator<Item = Frame>,
    {
        let mut out = Vec::new();
        for frame in frames {
            self.push_frame(&frame)?;
            if self.pushed % self.sizes.n_stride as u64 == 0 && self.buffer.fill >= 2 {
                out.push(self.run_dsp()?);
            }
        }
        Ok(out)
    }

    /// Empty the window and restart stride counting.
    pub fn reset(&mut self) {
        self.buffer.clear();
        self.pushed = 0;
        self.last_timestamp_s = 0.0;
    }
}

// Largest left shift that keeps every component at or below 8192,
// leaving two bits of headroom above the data and room for the
// saturating accumulation downstream.
fn headroom_shift(rows: &[Vec<ComplexQ15>]) -> i32 {
    let max = rows
        .iter()
        .flat_map(|r| r.iter())
        .map(|z| i32::from(z.re.0).abs().max(i32::from(z.im.0).abs()))
        .max()
        .unwrap_or(0);
    if max == 0 {
        return 0;
    }
    let mut shift = 0;
    while shift < 15 && (max << (shift + 1)) <= 8192 {
        shift += 1;
    }
    shift
}

fn float_argmax(vals: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in vals.iter().enumerate().skip(1) {
        if v > vals[best] {
            best = i;
        }
    }
    best
}
