//! l1 loss measured in the autocorrelation domain.

use rustfft::num_complex::Complex64;

use crate::correlation::{autocorrelate, DiskMask};
use crate::error::{Error, Result};
use crate::fft::with_fft2;
use crate::grid::{Autocorrelation, Grid, Image};

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    /// `dloss/dpred`, same grid as the prediction.
    pub gradient: Grid,
    /// Whether only the pixels kept by the mask were counted.
    pub masked_region_only: bool,
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `sum_k g[k] * (pred[m + k] + pred[m - k])` for lag weights `g` laid out on
/// the centered autocorrelation window.
pub(crate) fn autocorrelation_vjp(pred: &Grid, lag_weights: &Grid) -> Grid {
    let w = pred.side();
    let n = 2 * w;
    let half = (w / 2) as isize;
    let mut g_hat = vec![Complex64::default(); n * n];
    for r in 0..w {
        for c in 0..w {
            let v = lag_weights.get(r, c);
            if v != 0.0 {
                let dy = (r as isize - half).rem_euclid(n as isize) as usize;
                let dx = (c as isize - half).rem_euclid(n as isize) as usize;
                g_hat[dy * n + dx] = Complex64::new(v, 0.0);
            }
        }
    }
    let mut p_hat = vec![Complex64::default(); n * n];
    for r in 0..w {
        for c in 0..w {
            p_hat[r * n + c] = Complex64::new(pred.get(r, c), 0.0);
        }
    }
    with_fft2(n, |fft| {
        fft.forward(&mut g_hat);
        fft.forward(&mut p_hat);
        for (p, g) in p_hat.iter_mut().zip(&g_hat) {
            *p *= 2.0 * g.re;
        }
        fft.inverse(&mut p_hat);
    });
    Grid::from_fn(w, |r, c| p_hat[r * n + c].re)
}

/// Mean absolute difference between `autocorrelate(pred)` and `target_ac`.
///
/// With `region_only`, only pixels kept by `mask` are counted (a missing mask
/// counts everything). The gradient back-propagates
/// `G = sign(A - target) / count` through the autocorrelation, with
/// `sign(0) = 0`.
pub fn autocorr_l1_loss(
    pred: &Image,
    target_ac: &Autocorrelation,
    mask: Option<&DiskMask>,
    region_only: bool,
) -> Result<LossReport> {
    let side = pred.side();
    if target_ac.side() != side {
        return Err(Error::Dimension(format!(
            "prediction is {side}x{side}, target is {0}x{0}",
            target_ac.side()
        )));
    }
    let ac = autocorrelate(pred);
    let counted = |r: usize, c: usize| !region_only || mask.map_or(true, |m| m.keeps(side, r, c));
    let mut count = 0usize;
    let mut sum = 0.0;
    let mut weights = Grid::zeros(side);
    for r in 0..side {
        for c in 0..side {
            if counted(r, c) {
                let d = ac.get(r, c) - target_ac.get(r, c);
                sum += d.abs();
                count += 1;
                weights.set(r, c, sign(d));
            }
        }
    }
    let scale = 1.0 / count as f64;
    for v in weights.data_mut() {
        *v *= scale;
    }
    let gradient = if weights.data().iter().all(|v| *v == 0.0) {
        Grid::zeros(side)
    } else {
        autocorrelation_vjp(pred.grid(), &weights)
    };
    Ok(LossReport {
        loss: sum * scale,
        gradient,
        masked_region_only: region_only && mask.is_some(),
    })
}
