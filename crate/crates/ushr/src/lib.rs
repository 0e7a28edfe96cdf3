//! Heart-rate extraction from single-channel pulse-echo ultrasound.
//!
//! The library covers the full desk-scale system: a streaming M-mode
//! pipeline (slow-time differentiation, 2D FFT, band-limited frequency
//! accumulation, peak detection) in both double-precision and saturating
//! q1.15 fixed-point arithmetic, a pulse-echo signal synthesizer with a
//! pulsating-artery scatterer model, a digital twin of the analog envelope
//! front-end, a binary recording container, agreement statistics
//! (Pearson, Bland-Altman), and analytical memory/energy models for the
//! embedded target.
//!
//! Typical flow: synthesize or load a recording, stream its frames through
//! [`pipeline::Pipeline`], then compare the estimates against a reference
//! series with [`stats`].

pub mod config;
pub mod container;
pub mod fxp;
pub mod model;
pub mod pipeline;
pub mod series;
pub mod stats;
pub mod sweep;
pub mod synth;

pub use config::{
    AcquisitionConfig, DerivedSizes, DiffAxis, NumericMode, PipelineConfig, RunConfig,
};
pub use pipeline::{Frame, HrEstimate, Pipeline};
