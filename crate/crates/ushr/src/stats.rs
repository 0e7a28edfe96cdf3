//! Agreement statistics between two heart-rate series: Pearson
//! correlation and Bland-Altman bias with 1.96-sigma limits of agreement.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("need at least {need} samples, got {n}")]
    TooFewSamples { n: usize, need: usize },
    #[error("a series has zero variance; correlation is undefined")]
    DegenerateVariance,
}

/// The six agreement figures reported for a method comparison. Serialized
/// as a flat JSON object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgreementStats {
    pub n: usize,
    pub pearson_r: f64,
    pub mean_err_bpm: f64,
    pub sd_err_bpm: f64,
    pub loa_lo_bpm: f64,
    pub loa_hi_bpm: f64,
}

/// Sample Pearson correlation coefficient of (x, y) pairs.
pub fn pearson(pairs: &[(f64, f64)]) -> Result<f64, StatsError> {
    let n = pairs.len();
    if n < 3 {
        return Err(StatsError::TooFewSamples { n, need: 3 });
    }
    let nf = n as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in pairs {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Bland-Altman statistics of (estimate, reference) pairs: bias and
/// sample SD (n-1 denominator) of estimate - reference, with limits of
/// agreement at bias +/- 1.96 SD. `pearson_r` is filled when defined and
/// NaN otherwise.
pub fn bland_altman(pairs: &[(f64, f64)]) -> Result<AgreementStats, StatsError> {
    let n = pairs.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { n, need: 2 });
    }
    let nf = n as f64;
    let errors: Vec<f64> = pairs.iter().map(|&(est, re)| est - re).collect();
    let mean = errors.iter().sum::<f64>() / nf;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    Ok(AgreementStats {
        n,
        pearson_r: pearson(pairs).unwrap_or(f64::NAN),
        mean_err_bpm: mean,
        sd_err_bpm: sd,
        loa_lo_bpm: mean - 1.96 * sd,
        loa_hi_bpm: mean + 1.96 * sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pearson_of_affine_relations() {
        let up: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert!((pearson(&up).unwrap() - 1.0).abs() < 1e-12);
        let down: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, -(i as f64))).collect();
        assert!((pearson(&down).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_hand_computed_example() {
        // x = [1,2,3], y = [2,1,3]: sxy = 1, sxx = syy = 2, r = 0.5.
        let pairs = [(1.0, 2.0), (2.0, 1.0), (3.0, 3.0)];
        assert!((pearson(&pairs).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn pearson_degenerate_inputs() {
        assert!(matches!(
            pearson(&[(1.0, 1.0), (2.0, 2.0)]),
            Err(StatsError::TooFewSamples { n: 2, need: 3 })
        ));
        assert!(matches!(
            pearson(&[(1.0, 5.0), (1.0, 6.0), (1.0, 7.0)]),
            Err(StatsError::DegenerateVariance)
        ));
    }

    #[test]
    fn bland_altman_identical_series() {
        let pairs: Vec<(f64, f64)> = (0..5).map(|i| (60.0 + i as f64, 60.0 + i as f64)).collect();
        let s = bland_altman(&pairs).unwrap();
        assert_eq!(s.mean_err_bpm, 0.0);
        assert_eq!(s.sd_err_bpm, 0.0);
        assert_eq!(s.loa_lo_bpm, 0.0);
        assert_eq!(s.loa_hi_bpm, 0.0);
        assert!((s.pearson_r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bland_altman_constant_offset() {
        let pairs: Vec<(f64, f64)> = (0..5).map(|i| (62.0 + i as f64, 60.0 + i as f64)).collect();
        let s = bland_altman(&pairs).unwrap();
        assert!((s.mean_err_bpm - 2.0).abs() < 1e-12);
        assert_eq!(s.sd_err_bpm, 0.0);
    }

    #[test]
    fn bland_altman_hand_computed_limits() {
        // Errors {-1, 0, 1}: mean 0, sample SD 1, limits +/- 1.96.
        let pairs = [(59.0, 60.0), (70.0, 70.0), (81.0, 80.0)];
        let s = bland_altman(&pairs).unwrap();
        assert!(s.mean_err_bpm.abs() <= 1e-12);
        assert!((s.sd_err_bpm - 1.0).abs() <= 1e-12);
        assert!((s.loa_lo_bpm + 1.96).abs() <= 1e-12);
        assert!((s.loa_hi_bpm - 1.96).abs() <= 1e-12);
        assert_eq!(s.n, 3);
    }

    #[test]
    fn bland_altman_needs_two() {
        assert!(matches!(
            bland_altman(&[(60.0, 60.0)]),
            Err(StatsError::TooFewSamples { n: 1, need: 2 })
        ));
    }

    #[test]
    fn stats_serialize_to_flat_json() {
        let s = bland_altman(&[(59.0, 60.0), (70.0, 70.0), (81.0, 80.0)]).unwrap();
        let json = serde_json::to_value(&s).unwrap();
        let obj = json.as_object().unwrap();
        for key in [
            "n",
            "pearson_r",
            "mean_err_bpm",
            "sd_err_bpm",
            "loa_lo_bpm",
            "loa_hi_bpm",
        ] {
            assert!(obj.contains_key(key), "missing {key}");
        }
        assert_eq!(obj.len(), 6);
    }

    proptest! {
        // Pearson is invariant under positive affine transforms of either series.
        #[test]
        fn pearson_affine_invariance(
            base in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 3..20),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let transformed: Vec<(f64, f64)> = base.iter().map(|&(x, y)| (a * x + b, y)).collect();
            match (pearson(&base), pearson(&transformed)) {
                (Ok(r1), Ok(r2)) => prop_assert!((r1 - r2).abs() <= 1e-9),
                (Err(_), Err(_)) => {}
                (r1, r2) => return Err(TestCaseError::fail(format!("{r1:?} vs {r2:?}"))),
            }
        }

        // Shifting the estimates shifts the bias and leaves the SD alone.
        #[test]
        fn bland_altman_translation_equivariance(
            base in proptest::collection::vec((40.0f64..180.0, 40.0f64..180.0), 2..20),
            c in -10.0f64..10.0,
        ) {
            let shifted: Vec<(f64, f64)> = base.iter().map(|&(e, r)| (e + c, r)).collect();
            let s0 = bland_altman(&base).unwrap();
            let s1 = bland_altman(&shifted).unwrap();
            prop_assert!((s1.mean_err_bpm - s0.mean_err_bpm - c).abs() <= 1e-9);
            prop_assert!((s1.sd_err_bpm - s0.sd_err_bpm).abs() <= 1e-9);
        }
    }
}
