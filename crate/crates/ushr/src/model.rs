//! Analytical resource and energy models for the embedded target.
//!
//! Memory follows the three-buffer map of the firmware: the collection
//! buffer of cached half-spectra, the FFT scratch buffer, and the band
//! accumulation buffer. The operation count tallies the window-sized DSP
//! work per estimate (differences, column FFT butterflies, magnitudes,
//! accumulation, peak scan); per-frame fast-time transforms amortize at
//! acquisition time regardless of stride, so they are not part of it and
//! the count is stride-invariant by construction.

use crate::config::{DerivedSizes, NumericMode};

/// Memory footprint and per-estimate operation tally for one config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceModel {
    /// 2 for q1.15, 4 for f32.
    pub bytes_per_sample: usize,
    /// n_pulses rows of (nfft_fast/2 + 1) complex bins.
    pub collection_bytes: usize,
    /// One complex slow-time line: 2 * nfft_slow values.
    pub fft_scratch_bytes: usize,
    /// One magnitude per band bin.
    pub accumulation_bytes: usize,
    pub total_bytes: usize,
    pub dsp_op_count: u64,
}

impl ResourceModel {
    pub fn for_config(sizes: &DerivedSizes, mode: NumericMode) -> Self {
        let bps = match mode {
            NumericMode::FixedQ15 => 2,
            NumericMode::Float => 4,
        };
        let fast_bins = sizes.n_fast_bins();
        let collection_bytes = sizes.n_pulses * 2 * fast_bins * bps;
        let fft_scratch_bytes = 2 * sizes.nfft_slow * bps;
        let accumulation_bytes = sizes.n_band_bins * bps;

        let butterflies =
            (sizes.nfft_slow as u64 / 2) * sizes.nfft_slow.trailing_zeros() as u64;
        let dsp_op_count = 2 * fast_bins as u64 * (sizes.n_pulses as u64 - 1)
            + fast_bins as u64 * butterflies
            + 2 * fast_bins as u64 * sizes.n_band_bins as u64
            + sizes.n_band_bins as u64;

        Self {
            bytes_per_sample: bps,
            collection_bytes,
            fft_scratch_bytes,
            accumulation_bytes,
            total_bytes: collection_bytes + fft_scratch_bytes + accumulation_bytes,
            dsp_op_count,
        }
    }
}

/// Duty-cycle power model: a sleep floor, per-pulse acquisition energy at
/// the PRF, and one DSP event per stride.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    /// Energy of one DSP event, J.
    pub e_dsp_j: f64,
    /// Energy of one pulse acquisition (pulse, envelope, ADC), J.
    pub e_pulse_j: f64,
    /// Sleep-mode floor, W.
    pub p_sleep_w: f64,
    pub stride_s: f64,
    pub prf_hz: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            e_dsp_j: 1.21e-3,
            e_pulse_j: 0.0,
            p_sleep_w: 0.0,
            stride_s: 2.0,
            prf_hz: 25.0,
        }
    }
}

/// Average power: p_sleep + prf * e_pulse + e_dsp / stride.
pub fn eval_energy(m: &EnergyModel) -> f64 {
    m.p_sleep_w + m.prf_hz * m.e_pulse_j + m.e_dsp_j / m.stride_s
}
