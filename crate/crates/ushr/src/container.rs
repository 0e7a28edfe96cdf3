//! Binary recording container: a fixed-width little-endian header
//! followed by raw samples.
//!
//! Layout, in order: 8-byte magic `USHR0001`, prf_hz (f64), fs_hz (f64),
//! samples_per_frame (u32), n_frames (u32), sample_format (u8: 0 = i16le,
//! 1 = f32le), truth_bpm (u8 presence flag + f64), position_label (u8:
//! 0 = none, 1 = lateral, 2 = central, 3 = medial), then
//! n_frames * samples_per_frame samples. Frame timestamps are not stored;
//! they are reconstructed as p / prf_hz on read.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::pipeline::Frame;

pub const MAGIC: &[u8; 8] = b"USHR0001";

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("bad magic, not a recording container")]
    BadMagic,
    #[error("file ends before the declared payload")]
    TruncatedFile,
    #[error("format violation: {0}")]
    FormatMismatch(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    I16le,
    F32le,
}

impl SampleFormat {
    fn code(self) -> u8 {
        match self {
            SampleFormat::I16le => 0,
            SampleFormat::F32le => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self, ContainerError> {
        match code {
            0 => Ok(SampleFormat::I16le),
            1 => Ok(SampleFormat::F32le),
            other => Err(ContainerError::FormatMismatch(format!(
                "unknown sample format code {other}"
            ))),
        }
    }

    pub fn bytes_per_sample(self) -> usize {
        match self {
            SampleFormat::I16le => 2,
            SampleFormat::F32le => 4,
        }
    }
}

/// Transducer placement on the wrist, when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionLabel {
    Lateral,
    Central,
    Medial,
}

impl PositionLabel {
    fn code(this: Option<Self>) -> u8 {
        match this {
            None => 0,
            Some(PositionLabel::Lateral) => 1,
            Some(PositionLabel::Central) => 2,
            Some(PositionLabel::Medial) => 3,
        }
    }

    fn from_code(code: u8) -> Result<Option<Self>, ContainerError> {
        match code {
            0 => Ok(None),
            1 => Ok(Some(PositionLabel::Lateral)),
            2 => Ok(Some(PositionLabel::Central)),
            3 => Ok(Some(PositionLabel::Medial)),
            other => Err(ContainerError::FormatMismatch(format!(
                "unknown position label code {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordingHeader {
    pub prf_hz: f64,
    pub fs_hz: f64,
    pub samples_per_frame: u32,
    pub n_frames: u32,
    pub sample_format: SampleFormat,
    pub truth_bpm: Option<f64>,
    pub position_label: Option<PositionLabel>,
}

impl RecordingHeader {
    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(43);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.prf_hz.to_le_bytes());
        out.extend_from_slice(&self.fs_hz.to_le_bytes());
        out.extend_from_slice(&self.samples_per_frame.to_le_bytes());
        out.extend_from_slice(&self.n_frames.to_le_bytes());
        out.push(self.sample_format.code());
        match self.truth_bpm {
            Some(bpm) => {
                out.push(1);
                out.extend_from_slice(&bpm.to_le_bytes());
            }
            None => {
                out.push(0);
                out.extend_from_slice(&0f64.to_le_bytes());
            }
        }
        out.push(PositionLabel::code(self.position_label));
        out
    }
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8]) -> Result<(), ContainerError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            ContainerError::TruncatedFile
        } else {
            ContainerError::Io(e)
        }
    })
}

/// Write a recording to any byte sink.
pub fn write_recording_to(
    w: &mut impl Write,
    header: &RecordingHeader,
    frames: &[Frame],
) -> Result<(), ContainerError> {
    if frames.len() != header.n_frames as usize {
        return Err(ContainerError::FormatMismatch(format!(
            "header declares {} frames, got {}",
            header.n_frames,
            frames.len()
        )));
    }
    if !(header.prf_hz > 0.0) || !(header.fs_hz > 0.0) {
        return Err(ContainerError::FormatMismatch(
            "prf_hz and fs_hz must be positive".into(),
        ));
    }
    w.write_all(&header.encode())?;
    let spf = header.samples_per_frame as usize;
    for (p, frame) in frames.iter().enumerate() {
        if frame.samples.len() != spf {
            return Err(ContainerError::FormatMismatch(format!(
                "frame {p} has {} samples, header declares {spf}",
                frame.samples.len()
            )));
        }
        match header.sample_format {
            SampleFormat::I16le => {
                for &v in &frame.samples {
                    if v.fract() != 0.0 || !(-32768.0..=32767.0).contains(&v) {
                        return Err(ContainerError::FormatMismatch(format!(
                            "sample {v} not representable as i16"
                        )));
                    }
                    w.write_all(&(v as i16).to_le_bytes())?;
                }
            }
            SampleFormat::F32le => {
                // Narrowing to f32 is part of the format contract.
                for &v in &frame.samples {
                    w.write_all(&(v as f32).to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

/// Read a recording from any byte source. Allocation grows with the bytes
/// actually present, so truncated or hostile headers fail cheaply.
pub fn read_recording_from(
    r: &mut impl Read,
) -> Result<(RecordingHeader, Vec<Frame>), ContainerError> {
    let mut magic = [0u8; 8];
    read_exact_or_truncated(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(ContainerError::BadMagic);
    }

    let mut f64buf = [0u8; 8];
    let mut u32buf = [0u8; 4];
    let mut byte = [0u8; 1];

    read_exact_or_truncated(r, &mut f64buf)?;
    let prf_hz = f64::from_le_bytes(f64buf);
    read_exact_or_truncated(r, &mut f64buf)?;
    let fs_hz = f64::from_le_bytes(f64buf);
    read_exact_or_truncated(r, &mut u32buf)?;
    let samples_per_frame = u32::from_le_bytes(u32buf);
    read_exact_or_truncated(r, &mut u32buf)?;
    let n_frames = u32::from_le_bytes(u32buf);
    read_exact_or_truncated(r, &mut byte)?;
    let sample_format = SampleFormat::from_code(byte[0])?;
    read_exact_or_truncated(r, &mut byte)?;
    let truth_flag = byte[0];
    read_exact_or_truncated(r, &mut f64buf)?;
    let truth_bpm = match truth_flag {
        0 => None,
        1 => Some(f64::from_le_bytes(f64buf)),
        other => {
            return Err(ContainerError::FormatMismatch(format!(
                "bad truth_bpm presence flag {other}"
            )))
        }
    };
    read_exact_or_truncated(r, &mut byte)?;
    let position_label = PositionLabel::from_code(byte[0])?;

    if !(prf_hz > 0.0 && prf_hz.is_finite()) || !(fs_hz > 0.0 && fs_hz.is_finite()) {
        return Err(ContainerError::FormatMismatch(
            "prf_hz and fs_hz must be positive".into(),
        ));
    }
    if samples_per_frame == 0 {
        return Err(ContainerError::FormatMismatch(
            "samples_per_frame must be nonzero".into(),
        ));
    }

    let header = RecordingHeader {
        prf_hz,
        fs_hz,
        samples_per_frame,
        n_frames,
        sample_format,
        truth_bpm,
        position_label,
    };

    let spf = samples_per_frame as usize;
    let bps = sample_format.bytes_per_sample();
    let mut frames = Vec::new();
    let mut raw: Vec<u8> = Vec::new();
    let mut chunk = [0u8; 16384];
    for p in 0..n_frames as usize {
        let need = spf * bps;
        raw.clear();
        while raw.len() < need {
            let want = (need - raw.len()).min(chunk.len());
            let got = r.read(&mut chunk[..want])?;
            if got == 0 {
                return Err(ContainerError::TruncatedFile);
            }
            raw.extend_from_slice(&chunk[..got]);
        }
        let samples: Vec<f64> = match sample_format {
            SampleFormat::I16le => raw
                .chunks_exact(2)
                .map(|b| f64::from(i16::from_le_bytes([b[0], b[1]])))
                .collect(),
            SampleFormat::F32le => raw
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
                .collect(),
        };
        frames.push(Frame {
            samples,
            timestamp_s: p as f64 / prf_hz,
        });
    }
    Ok((header, frames))
}

pub fn write_recording(
    path: impl AsRef<Path>,
    header: &RecordingHeader,
    frames: &[Frame],
) -> Result<(), ContainerError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_recording_to(&mut w, header, frames)?;
    w.flush()?;
    Ok(())
}

pub fn read_recording(
    path: impl AsRef<Path>,
) -> Result<(RecordingHeader, Vec<Frame>), ContainerError> {
    let mut r = BufReader::new(File::open(path)?);
    read_recording_from(&mut r)
}
