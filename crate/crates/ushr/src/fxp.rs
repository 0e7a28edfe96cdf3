//! Saturating q1.15 kernels mirroring the embedded DSP calls, their
//! double-precision reference counterparts, and a brute-force DFT oracle.
//!
//! Fixed-point FFTs use per-stage halving, so the forward transform is
//! scaled by 1/nfft overall and can never overflow regardless of input.
//! All narrowing operations round half away from zero. The complex
//! magnitude is reported as |z|/2 so that |z| up to sqrt(2) stays
//! representable; downstream peak picking is scale-invariant, so the
//! factor is harmless.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FxpError {
    #[error("FFT length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("buffer length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("shift of {0} bits exceeds the 15-bit limit")]
    ShiftTooLarge(i32),
    #[error("operation requires a non-empty buffer")]
    EmptyBuffer,
}

/// One q1.15 sample: value = raw / 32768, range [-1, 1 - 2^-15].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Q15(pub i16);

impl Q15 {
    pub const ZERO: Q15 = Q15(0);
    pub const MAX: Q15 = Q15(i16::MAX);
    pub const MIN: Q15 = Q15(i16::MIN);

    /// Saturating conversion from a real value in [-1, 1).
    pub fn from_f64(v: f64) -> Q15 {
        Q15(sat16((v * 32768.0).round() as i64))
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.0) / 32768.0
    }

    pub fn raw(self) -> i16 {
        self.0
    }
}

/// One complex q1.15 sample; buffers of these are the (re, im) interleaved
/// layout the embedded kernels operate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ComplexQ15 {
    pub re: Q15,
    pub im: Q15,
}

impl ComplexQ15 {
    pub const ZERO: ComplexQ15 = ComplexQ15 {
        re: Q15::ZERO,
        im: Q15::ZERO,
    };

    pub fn new(re: i16, im: i16) -> Self {
        Self {
            re: Q15(re),
            im: Q15(im),
        }
    }

    pub fn to_complex64(self) -> Complex64 {
        Complex64::new(f64::from(self.re.0), f64::from(self.im.0))
    }
}

fn sat16(v: i64) -> i16 {
    v.clamp(i64::from(i16::MIN), i64::from(i16::MAX)) as i16
}

/// Arithmetic right shift rounding half away from zero.
fn rhaz_shr(v: i64, bits: u32) -> i64 {
    if bits == 0 {
        return v;
    }
    let bias = 1i64 << (bits - 1);
    if v >= 0 {
        (v + bias) >> bits
    } else {
        -((-v + bias) >> bits)
    }
}

/// Multiply each element by 2^bits with saturation; negative shifts are
/// plain arithmetic right shifts.
pub fn shift_sat(buf: &[Q15], bits: i32) -> Result<Vec<Q15>, FxpError> {
    if bits.abs() > 15 {
        return Err(FxpError::ShiftTooLarge(bits));
    }
    Ok(buf
        .iter()
        .map(|&x| {
            if bits >= 0 {
                Q15(sat16(i64::from(x.0) << bits))
            } else {
                Q15(x.0 >> (-bits))
            }
        })
        .collect())
}

/// Element-wise saturating a - b.
pub fn sub_sat(a: &[Q15], b: &[Q15]) -> Result<Vec<Q15>, FxpError> {
    if a.len() != b.len() {
        return Err(FxpError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| Q15(sat16(i64::from(x.0) - i64::from(y.0))))
        .collect())
}

/// Element-wise saturating a + b.
pub fn add_sat(a: &[Q15], b: &[Q15]) -> Result<Vec<Q15>, FxpError> {
    if a.len() != b.len() {
        return Err(FxpError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| Q15(sat16(i64::from(x.0) + i64::from(y.0))))
        .collect())
}

/// Component-wise saturating shift, as [`shift_sat`] behaves on an
/// interleaved complex buffer.
pub fn shift_sat_complex(buf: &[ComplexQ15], bits: i32) -> Result<Vec<ComplexQ15>, FxpError> {
    if bits.abs() > 15 {
        return Err(FxpError::ShiftTooLarge(bits));
    }
    let one = |v: i16| -> i16 {
        if bits >= 0 {
            sat16(i64::from(v) << bits)
        } else {
            v >> (-bits)
        }
    };
    Ok(buf
        .iter()
        .map(|&z| ComplexQ15 {
            re: Q15(one(z.re.0)),
            im: Q15(one(z.im.0)),
        })
        .collect())
}

/// Component-wise saturating complex subtraction, as arm_sub_q15 behaves
/// on an interleaved buffer.
pub fn sub_sat_complex(a: &[ComplexQ15], b: &[ComplexQ15]) -> Result<Vec<ComplexQ15>, FxpError> {
    if a.len() != b.len() {
        return Err(FxpError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| ComplexQ15 {
            re: Q15(sat16(i64::from(x.re.0) - i64::from(y.re.0))),
            im: Q15(sat16(i64::from(x.im.0) - i64::from(y.im.0))),
        })
        .collect())
}

fn twiddles(n: usize) -> Vec<(i16, i16)> {
    (0..n / 2)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            (
                (32767.0 * theta.cos()).round() as i16,
                (-32767.0 * theta.sin()).round() as i16,
            )
        })
        .collect()
}

fn bit_reverse_permute(buf: &mut [ComplexQ15]) {
    let n = buf.len();
    let shift = (n.leading_zeros() + 1) % usize::BITS;
    for i in 0..n {
        let j = i.reverse_bits() >> shift;
        if j > i {
            buf.swap(i, j);
        }
    }
}

// (w * x) >> 15 with rounding, computed wide; components may exceed i16.
fn cmul_wide(w: (i16, i16), x: ComplexQ15) -> (i64, i64) {
    let (wr, wi) = (i64::from(w.0), i64::from(w.1));
    let (xr, xi) = (i64::from(x.re.0), i64::from(x.im.0));
    (
        rhaz_shr(wr * xr - wi * xi, 15),
        rhaz_shr(wr * xi + wi * xr, 15),
    )
}

/// In-place complex DFT with 1/nfft scaling (one halving per stage).
pub fn cfft_q15(buf: &mut [ComplexQ15], nfft: usize) -> Result<(), FxpError> {
    if !nfft.is_power_of_two() {
        return Err(FxpError::NotPowerOfTwo(nfft));
    }
    if buf.len() != nfft {
        return Err(FxpError::LengthMismatch {
            a: buf.len(),
            b: nfft,
        });
    }
    if nfft == 1 {
        return Ok(());
    }
    bit_reverse_permute(buf);
    let tw = twiddles(nfft);

    let mut m = 2;
    while m <= nfft {
        let half = m / 2;
        let step = nfft / m;
        for base in (0..nfft).step_by(m) {
            for j in 0..half {
                let w = tw[j * step];
                let t = cmul_wide(w, buf[base + j + half]);
                let u = buf[base + j];
                let (ur, ui) = (i64::from(u.re.0), i64::from(u.im.0));
                buf[base + j] = ComplexQ15 {
                    re: Q15(sat16(rhaz_shr(ur + t.0, 1))),
                    im: Q15(sat16(rhaz_shr(ui + t.1, 1))),
                };
                buf[base + j + half] = ComplexQ15 {
                    re: Q15(sat16(rhaz_shr(ur - t.0, 1))),
                    im: Q15(sat16(rhaz_shr(ui - t.1, 1))),
                };
            }
        }
        m *= 2;
    }
    Ok(())
}

/// Real-input DFT: zero-pads to nfft and returns the nfft/2 + 1
/// non-redundant bins, scaled by 1/nfft.
pub fn rfft_q15(buf: &[Q15], nfft: usize) -> Result<Vec<ComplexQ15>, FxpError> {
    if !nfft.is_power_of_two() {
        return Err(FxpError::NotPowerOfTwo(nfft));
    }
    if buf.len() > nfft {
        return Err(FxpError::LengthMismatch {
            a: buf.len(),
            b: nfft,
        });
    }
    let mut work = vec![ComplexQ15::ZERO; nfft];
    for (dst, &src) in work.iter_mut().zip(buf) {
        dst.re = src;
    }
    cfft_q15(&mut work, nfft)?;
    work.truncate(nfft / 2 + 1);
    Ok(work)
}

/// Element-wise |z| / 2, computed wide, rounded half away from zero.
pub fn cmplx_mag(buf: &[ComplexQ15]) -> Vec<Q15> {
    buf.iter()
        .map(|z| {
            let re = i64::from(z.re.0);
            let im = i64::from(z.im.0);
            // re^2 + im^2 <= 2^31 is exact in f64, and sqrt is correctly
            // rounded, so this matches the mathematical value.
            let mag = ((re * re + im * im) as f64).sqrt();
            Q15(sat16((mag / 2.0).round() as i64))
        })
        .collect()
}

/// Lowest index attaining the maximum value, and that value.
pub fn argmax(buf: &[Q15]) -> Result<(usize, Q15), FxpError> {
    if buf.is_empty() {
        return Err(FxpError::EmptyBuffer);
    }
    let mut best = (0usize, buf[0]);
    for (i, &v) in buf.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok(best)
}

/// Direct O(n^2) DFT in double precision, unscaled. This is the
/// verification oracle for both FFT paths and is never called by them.
pub fn dft_oracle(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &xi) in x.iter().enumerate() {
                let theta = -2.0 * std::f64::consts::PI * (k * i % n) as f64 / n as f64;
                acc += xi * Complex64::new(theta.cos(), theta.sin());
            }
            acc
        })
        .collect()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_forward(buf: &mut [Complex64]) {
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(buf.len());
        fft.process(buf);
    });
}

/// Double-precision counterpart of [`rfft_q15`]: same zero padding, bin
/// count and 1/nfft scaling.
pub fn rfft_float(buf: &[f64], nfft: usize) -> Result<Vec<Complex64>, FxpError> {
    if !nfft.is_power_of_two() {
        return Err(FxpError::NotPowerOfTwo(nfft));
    }
    if buf.len() > nfft {
        return Err(FxpError::LengthMismatch {
            a: buf.len(),
            b: nfft,
        });
    }
    let mut work = vec![Complex64::new(0.0, 0.0); nfft];
    for (dst, &src) in work.iter_mut().zip(buf) {
        dst.re = src;
    }
    fft_forward(&mut work);
    let scale = 1.0 / nfft as f64;
    work.truncate(nfft / 2 + 1);
    for v in &mut work {
        *v *= scale;
    }
    Ok(work)
}

/// Double-precision counterpart of [`cfft_q15`] (in place, 1/nfft scaling).
pub fn cfft_float(buf: &mut [Complex64], nfft: usize) -> Result<(), FxpError> {
    if !nfft.is_power_of_two() {
        return Err(FxpError::NotPowerOfTwo(nfft));
    }
    if buf.len() != nfft {
        return Err(FxpError::LengthMismatch {
            a: buf.len(),
            b: nfft,
        });
    }
    fft_forward(buf);
    let scale = 1.0 / nfft as f64;
    for v in buf {
        *v *= scale;
    }
    Ok(())
}
