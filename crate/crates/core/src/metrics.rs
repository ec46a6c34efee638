//! Reconstruction quality measures that ignore the ambiguities of
//! autocorrelation data: global translation, 180 degree flip and scale.

use rustfft::num_complex::Complex64;

use crate::correlation::{autocorrelate, DiskMask};
use crate::error::{Error, Result};
use crate::fft::{to_complex, with_fft2};
use crate::grid::{Autocorrelation, Grid, Image};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Registration {
    /// `||a*T(recon) - truth|| / ||truth||` at the best alignment.
    pub error: f64,
    pub flipped: bool,
    /// Cyclic shift `(dx, dy)` applied to the (possibly flipped) reconstruction.
    pub shift: (isize, isize),
    /// Optimal nonnegative scale `a`.
    pub scale: f64,
}

/// Relative tolerance under which two candidate alignments count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

fn signed(d: usize, n: usize) -> isize {
    if d > n / 2 {
        d as isize - n as isize
    } else {
        d as isize
    }
}

/// `c[d] = sum_n t[n - d] * truth[n]` for every cyclic shift `d`.
fn cyclic_cross_correlation(t: &Grid, truth_spectrum: &[Complex64]) -> Vec<f64> {
    let n = t.side();
    let mut buf = to_complex(t.data());
    with_fft2(n, |fft| {
        fft.forward(&mut buf);
        for (a, b) in buf.iter_mut().zip(truth_spectrum) {
            *a = a.conj() * b;
        }
        fft.inverse(&mut buf);
    });
    buf.iter().map(|v| v.re).collect()
}

/// Direct evaluation of the scaled residual for one alignment.
fn aligned_error(t: &Grid, truth: &Grid, truth_norm_sq: f64) -> (f64, f64) {
    let dot: f64 = t.data().iter().zip(truth.data()).map(|(a, b)| a * b).sum();
    let t_norm_sq = t.sum_sq();
    let alpha = if t_norm_sq > 0.0 {
        (dot / t_norm_sq).max(0.0)
    } else {
        0.0
    };
    let residual: f64 = t
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (alpha * a - b).powi(2))
        .sum();
    ((residual / truth_norm_sq).sqrt(), alpha)
}

/// Scale-, translation- and twin-invariant relative error.
///
/// Candidates are the identity and the 180 degree flip of `recon`, each under
/// every cyclic shift. The best shift per candidate is located through an FFT
/// cross-correlation; near-ties prefer the smallest `|dx| + |dy|`, then the
/// identity. The reported error is recomputed directly at the chosen
/// alignment, so exact copies score exactly zero.
pub fn registration_invariant_error(recon: &Image, truth: &Image) -> Result<Registration> {
    if recon.side() != truth.side() {
        return Err(Error::Dimension(format!(
            "reconstruction is {0}x{0}, truth is {1}x{1}",
            recon.side(),
            truth.side()
        )));
    }
    let truth_norm_sq = truth.sum_sq();
    if truth_norm_sq == 0.0 {
        return Err(Error::Undefined("ground truth is identically zero".into()));
    }
    let n = truth.side();
    let mut truth_spectrum = to_complex(truth.data());
    with_fft2(n, |fft| fft.forward(&mut truth_spectrum));

    // (estimated squared error, |dx|+|dy|, flipped, dy, dx)
    let mut best: Option<(f64, usize, bool, isize, isize)> = None;
    for flipped in [false, true] {
        let t = if flipped {
            recon.grid().flip180()
        } else {
            recon.grid().clone()
        };
        let t_norm_sq = t.sum_sq();
        let corr = if t_norm_sq > 0.0 {
            cyclic_cross_correlation(&t, &truth_spectrum)
        } else {
            vec![0.0; n * n]
        };
        for (i, &c) in corr.iter().enumerate() {
            let est = if c > 0.0 {
                (1.0 - c * c / (t_norm_sq * truth_norm_sq)).max(0.0)
            } else {
                1.0
            };
            let (dy, dx) = (signed(i / n, n), signed(i % n, n));
            let dist = dy.unsigned_abs() + dx.unsigned_abs();
            let better = match best {
                None => true,
                Some((e, d, f, _, _)) => {
                    if est < e - TIE_TOLERANCE {
                        true
                    } else if est <= e + TIE_TOLERANCE {
                        (dist, flipped) < (d, f)
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((est, dist, flipped, dy, dx));
            }
        }
    }
    let (_, _, flipped, dy, dx) = best.expect("at least one candidate");
    let base = if flipped {
        recon.grid().flip180()
    } else {
        recon.grid().clone()
    };
    let aligned = base.roll(dy, dx);
    let (error, scale) = aligned_error(&aligned, truth.grid(), truth_norm_sq);
    Ok(Registration {
        error,
        flipped,
        shift: (dx, dy),
        scale,
    })
}

/// Mean `|autocorrelate(recon) - truth_ac|` over the kept pixels of `mask`
/// (all pixels when `mask` is `None`).
pub fn autocorrelation_l1_error(
    recon: &Image,
    truth_ac: &Autocorrelation,
    mask: Option<&DiskMask>,
) -> Result<f64> {
    if recon.side() != truth_ac.side() {
        return Err(Error::Dimension(format!(
            "reconstruction is {0}x{0}, autocorrelation is {1}x{1}",
            recon.side(),
            truth_ac.side()
        )));
    }
    let ac = autocorrelate(recon);
    let side = ac.side();
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in 0..side {
        for c in 0..side {
            if mask.map_or(true, |m| m.keeps(side, r, c)) {
                sum += (ac.get(r, c) - truth_ac.get(r, c)).abs();
                count += 1;
            }
        }
    }
    Ok(sum / count as f64)
}
