//! Window/stride grid evaluation: accuracy against ground truth plus the
//! modeled memory, operation count and average power for every cell.

use thiserror::Error;

use crate::config::{AcquisitionConfig, PipelineConfig};
use crate::model::{eval_energy, EnergyModel, ResourceModel};
use crate::pipeline::{Frame, Pipeline, PipelineError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("no recording produced a full-window estimate for window {window_s} s")]
    NoEstimates { window_s: f64 },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// One recording with its true heart rate.
pub struct TruthRecording {
    pub frames: Vec<Frame>,
    pub truth_bpm: f64,
}

/// One grid cell result, in grid order (windows outer, strides inner).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub window_s: f64,
    pub stride_s: f64,
    pub n_estimates: usize,
    pub mean_err_bpm: f64,
    pub sd_err_bpm: f64,
    pub total_bytes: usize,
    pub dsp_op_count: u64,
    pub p_avg_w: f64,
}

/// Stream every recording through every (window, stride) cell. Accuracy
/// uses full-window estimates only, pooled across recordings; errors are
/// estimate minus truth.
pub fn run_sweep(
    recordings: &[TruthRecording],
    acq: &AcquisitionConfig,
    base: &PipelineConfig,
    windows_s: &[f64],
    strides_s: &[f64],
    energy: &EnergyModel,
) -> Result<Vec<SweepCell>, SweepError> {
    if windows_s.is_empty() || strides_s.is_empty() || recordings.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    let mut cells = Vec::with_capacity(windows_s.len() * strides_s.len());
    for &window_s in windows_s {
        for &stride_s in strides_s {
            let cfg = PipelineConfig {
                window_s,
                stride_s,
                ..base.clone()
            };
            let mut errors = Vec::new();
            for rec in recordings {
                let mut pipeline = Pipeline::new(acq.clone(), cfg.clone())?;
                for est in pipeline.stream(rec.frames.iter().cloned())? {
                    if est.window_fill >= 1.0 {
                        errors.push(est.bpm - rec.truth_bpm);
                    }
                }
            }
            if errors.is_empty() {
                return Err(SweepError::NoEstimates { window_s });
            }
            let n = errors.len() as f64;
            let mean = errors.iter().sum::<f64>() / n;
            let sd = if errors.len() > 1 {
                (errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let sizes = crate::config::validate_config(acq, &cfg).map_err(PipelineError::from)?;
            let resources = ResourceModel::for_config(&sizes, cfg.numeric_mode);
            let p_avg = eval_energy(&EnergyModel {
                stride_s,
                prf_hz: acq.prf_hz,
                ..*energy
            });
            cells.push(SweepCell {
                window_s,
                stride_s,
                n_estimates: errors.len(),
                mean_err_bpm: mean,
                sd_err_bpm: sd,
                total_bytes: resources.total_bytes,
                dsp_op_count: resources.dsp_op_count,
                p_avg_w: p_avg,
            });
        }
    }
    Ok(cells)
}

/// CSV rendering of a sweep, one row per cell.
pub fn sweep_to_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from(
        "window_s,stride_s,n_estimates,mean_err_bpm,sd_err_bpm,total_bytes,dsp_op_count,p_avg_w\n",
    );
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.window_s,
            c.stride_s,
            c.n_estimates,
            c.mean_err_bpm,
            c.sd_err_bpm,
            c.total_bytes,
            c.dsp_op_count,
            c.p_avg_w
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::NumericMode;

    fn toy_recordings() -> Vec<TruthRecording> {
        // Slow-time tone at 1.2 Hz painted directly onto the frames; enough
        // for the sweep plumbing without the full synthesizer.
        let frames: Vec<Frame> = (0..750)
            .map(|p| {
                let t = p as f64 / 25.0;
                let v = 900.0 * (2.0 * std::f64::consts::PI * 1.2 * t).sin();
                Frame {
                    samples: (0..50).map(|i| if i == 20 { v } else { 0.0 }).collect(),
                    timestamp_s: t,
                }
            })
            .collect();
        vec![TruthRecording {
            frames,
            truth_bpm: 72.0,
        }]
    }

    #[test]
    fn sweep_reports_grid_in_order() {
        let recs = toy_recordings();
        let acq = AcquisitionConfig::default();
        let base = PipelineConfig {
            numeric_mode: NumericMode::Float,
            ..Default::default()
        };
        let cells = run_sweep(
            &recs,
            &acq,
            &base,
            &[10.0, 20.0],
            &[2.0, 5.0],
            &EnergyModel::default(),
        )
        .unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!(
            cells
                .iter()
                .map(|c| (c.window_s, c.stride_s))
                .collect::<Vec<_>>(),
            vec![(10.0, 2.0), (10.0, 5.0), (20.0, 2.0), (20.0, 5.0)]
        );
        for c in &cells {
            assert!(c.n_estimates > 0);
            assert!(c.mean_err_bpm.abs() < 3.0, "mean err {}", c.mean_err_bpm);
        }
        // Memory and op count depend on the window only.
        assert_eq!(cells[0].total_bytes, cells[1].total_bytes);
        assert_eq!(cells[0].dsp_op_count, cells[1].dsp_op_count);
        assert!(cells[2].dsp_op_count > cells[0].dsp_op_count);
        // Power drops with stride.
        assert!(cells[1].p_avg_w < cells[0].p_avg_w);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let recs = toy_recordings();
        let acq = AcquisitionConfig::default();
        let base = PipelineConfig::default();
        assert!(matches!(
            run_sweep(&recs, &acq, &base, &[], &[2.0], &EnergyModel::default()),
            Err(SweepError::EmptyGrid)
        ));
    }

    #[test]
    fn csv_has_one_row_per_cell() {
        let recs = toy_recordings();
        let acq = AcquisitionConfig::default();
        let base = PipelineConfig::default();
        let cells = run_sweep(
            &recs,
            &acq,
            &base,
            &[10.0],
            &[2.0, 5.0],
            &EnergyModel::default(),
        )
        .unwrap();
        let csv = sweep_to_csv(&cells);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("window_s,"));
    }
}
