//! Linear autocorrelation, Fourier moduli and disk erosion masks.
//!
//! Autocorrelations are computed on a `2W`x`2W` zero-padded grid, so they are
//! linear rather than circular, and cropped to a `W`x`W` window whose center
//! `(W/2, W/2)` holds the zero lag. Objects whose support fits in the centered
//! `W/2`x`W/2` box are represented without loss.

use std::cmp::Ordering;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{to_complex, with_fft2};
use crate::grid::{Autocorrelation, FourierModulus, Grid, Image};

/// Linear autocorrelation of `img` on its own canvas.
///
/// The result is exactly centrosymmetric and exactly invariant under
/// translations and 180 degree flips of the input: the transform always runs
/// on a canonical placement (bounding box at the origin, orientation chosen by
/// lexicographic order). Lags that lie outside the support extent are
/// structurally zero and are written as exact zeros.
pub fn autocorrelate(img: &Image) -> Autocorrelation {
    let w = img.side();
    let center = w / 2;
    let mut out = Grid::zeros(w);
    let Some(bb) = img.bounding_box() else {
        return Autocorrelation::with_truncation(out, false);
    };
    let (h, bw) = (bb.height(), bb.width());

    let mut patch: Vec<f64> = Vec::with_capacity(h * bw);
    for r in bb.row0..=bb.row1 {
        patch.extend_from_slice(&img.data()[r * w + bb.col0..=r * w + bb.col1]);
    }
    let flipped: Vec<f64> = patch.iter().rev().copied().collect();
    let canonical = match lexicographic(&flipped, &patch) {
        Ordering::Less => flipped,
        _ => patch,
    };

    let n = 2 * w;
    let mut buf = vec![Complex64::default(); n * n];
    for r in 0..h {
        for c in 0..bw {
            buf[r * n + c] = Complex64::new(canonical[r * bw + c], 0.0);
        }
    }
    let raw = with_fft2(n, |fft| {
        fft.forward(&mut buf);
        for v in buf.iter_mut() {
            *v = Complex64::new(v.norm_sqr(), 0.0);
        }
        fft.inverse(&mut buf);
        buf
    });
    let at = |dy: isize, dx: isize| {
        let r = dy.rem_euclid(n as isize) as usize;
        let c = dx.rem_euclid(n as isize) as usize;
        raw[r * n + c].re
    };

    let half = center as isize;
    let (max_dy, max_dx) = (h as isize - 1, bw as isize - 1);
    for dy in -half..half {
        for dx in -half..half {
            if dy.abs() > max_dy || dx.abs() > max_dx {
                continue;
            }
            // Pairs of lags that both live in the window get the same value.
            let value = if -dy < half && -dx < half {
                0.5 * (at(dy, dx) + at(-dy, -dx))
            } else {
                at(dy, dx)
            };
            out.set((half + dy) as usize, (half + dx) as usize, value);
        }
    }
    let truncated = h > center || bw > center;
    Autocorrelation::with_truncation(out, truncated)
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Fourier modulus `|F(o)|` on the padded grid, derived from `F(o*o) = |F(o)|^2`.
///
/// The window is embedded with its zero lag at the origin of a `2W`x`2W`
/// grid. Negative real parts (masked inputs) are clamped to zero before the
/// square root.
pub fn modulus_from_autocorrelation(ac: &Autocorrelation) -> FourierModulus {
    let w = ac.side();
    let n = 2 * w;
    let half = (w / 2) as isize;
    let mut buf = vec![Complex64::default(); n * n];
    for r in 0..w {
        for c in 0..w {
            let dy = (r as isize - half).rem_euclid(n as isize) as usize;
            let dx = (c as isize - half).rem_euclid(n as isize) as usize;
            buf[dy * n + dx] = Complex64::new(ac.get(r, c), 0.0);
        }
    }
    with_fft2(n, |fft| fft.forward(&mut buf));
    let data = buf.iter().map(|v| v.re.max(0.0).sqrt()).collect();
    FourierModulus::from_grid(Grid::from_vec(n, data).expect("padded shape"))
        .expect("clamped values are nonnegative")
}

/// `|DFT|` of a grid zero-padded (top-left placement) to side `padded`.
pub fn padded_spectrum_magnitude(grid: &Grid, padded: usize) -> Result<Grid> {
    if padded < grid.side() {
        return Err(Error::Dimension(format!(
            "cannot pad a {0}x{0} grid into {padded}x{padded}",
            grid.side()
        )));
    }
    let mut buf = vec![Complex64::default(); padded * padded];
    for r in 0..grid.side() {
        for c in 0..grid.side() {
            buf[r * padded + c] = Complex64::new(grid.get(r, c), 0.0);
        }
    }
    with_fft2(padded, |fft| fft.forward(&mut buf));
    Grid::from_vec(padded, buf.iter().map(|v| v.norm()).collect())
}

/// Inverse transform of a squared modulus, returned with the zero lag at the
/// grid center (same convention as [`Autocorrelation`]).
pub fn autocorrelation_from_modulus(modulus: &FourierModulus) -> Grid {
    let n = modulus.side();
    let mut buf = to_complex(&modulus.data().iter().map(|m| m * m).collect::<Vec<_>>());
    with_fft2(n, |fft| fft.inverse(&mut buf));
    let half = n / 2;
    Grid::from_fn(n, |r, c| buf[((r + half) % n) * n + (c + half) % n].re)
}

/// Erosion disk `D(r_m)` centered on the zero lag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiskMask {
    radius_px: f64,
}

impl DiskMask {
    pub fn new(radius_px: f64) -> Result<Self> {
        if !(radius_px >= 0.0) || !radius_px.is_finite() {
            return Err(Error::InvalidValue(format!(
                "mask radius must be finite and nonnegative, got {radius_px}"
            )));
        }
        Ok(Self { radius_px })
    }

    pub fn radius_px(&self) -> f64 {
        self.radius_px
    }

    /// A pixel is kept iff its distance to the center is at most the radius.
    #[inline]
    pub fn keeps(&self, side: usize, row: usize, col: usize) -> bool {
        let c = (side / 2) as f64;
        let (dy, dx) = (row as f64 - c, col as f64 - c);
        // Compare distances, not squares, so a radius taken from a lag's own
        // distance keeps that lag.
        dy.hypot(dx) <= self.radius_px
    }

    pub fn kept_count(&self, side: usize) -> usize {
        (0..side)
            .flat_map(|r| (0..side).map(move |c| (r, c)))
            .filter(|&(r, c)| self.keeps(side, r, c))
            .count()
    }

    /// Smallest radius that keeps every pixel of a `side`x`side` grid.
    pub fn covering(side: usize) -> Self {
        let half = (side / 2) as f64;
        Self {
            radius_px: half.hypot(half),
        }
    }
}

/// Zeroes every pixel outside the disk; kept pixels are copied bit for bit.
pub fn apply_disk_mask(ac: &Autocorrelation, mask: &DiskMask) -> Autocorrelation {
    let side = ac.side();
    let grid = Grid::from_fn(side, |r, c| {
        if mask.keeps(side, r, c) {
            ac.get(r, c)
        } else {
            0.0
        }
    });
    Autocorrelation::with_truncation(grid, ac.truncated())
}

/// `max_k |a[c+k] - a[c-k]| / max|a|` over lags where both ends are in the window.
pub fn centrosymmetry_residual(grid: &Grid) -> f64 {
    let scale = grid.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let side = grid.side() as isize;
    let c = grid.center() as isize;
    let mut worst: f64 = 0.0;
    for r in 0..side {
        for col in 0..side {
            let (mr, mc) = (2 * c - r, 2 * c - col);
            if (0..side).contains(&mr) && (0..side).contains(&mc) {
                let d = grid.get(r as usize, col as usize) - grid.get(mr as usize, mc as usize);
                worst = worst.max(d.abs());
            }
        }
    }
    worst / scale
}
