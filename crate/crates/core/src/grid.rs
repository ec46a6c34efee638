//! Square real grids and the typed views built on them.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Row-major square grid of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    side: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            data: vec![0.0; side * side],
        }
    }

    pub fn from_vec(side: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != side * side {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {side}x{side} grid",
                data.len()
            )));
        }
        Ok(Self { side, data })
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(side * side);
        for r in 0..side {
            for c in 0..side {
                data.push(f(r, c));
            }
        }
        Self { side, data }
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    /// Index pair `(side/2, side/2)`.
    #[inline]
    pub fn center(&self) -> usize {
        self.side / 2
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.side + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.side + col] = value;
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Point reflection about the canvas center: `out[r][c] = in[side-1-r][side-1-c]`.
    pub fn flip180(&self) -> Self {
        let mut data = self.data.clone();
        data.reverse();
        Self {
            side: self.side,
            data,
        }
    }

    /// Cyclic shift: `out[r][c] = in[r - dy][c - dx]` (indices modulo side).
    pub fn roll(&self, dy: isize, dx: isize) -> Self {
        let n = self.side as isize;
        Self::from_fn(self.side, |r, c| {
            let sr = (r as isize - dy).rem_euclid(n) as usize;
            let sc = (c as isize - dx).rem_euclid(n) as usize;
            self.get(sr, sc)
        })
    }

    /// Non-cyclic shift; `None` if any nonzero pixel would leave the grid.
    pub fn shift(&self, dy: isize, dx: isize) -> Option<Self> {
        if let Some(bb) = self.bounding_box() {
            let n = self.side as isize;
            let inside = |lo: usize, hi: usize, d: isize| lo as isize + d >= 0 && hi as isize + d < n;
            if !inside(bb.row0, bb.row1, dy) || !inside(bb.col0, bb.col1, dx) {
                return None;
            }
        }
        Some(self.roll(dy, dx))
    }

    /// Inclusive bounding box of the nonzero pixels.
    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let mut bb: Option<BoundingBox> = None;
        for r in 0..self.side {
            for c in 0..self.side {
                if self.get(r, c) != 0.0 {
                    let b = bb.get_or_insert(BoundingBox {
                        row0: r,
                        row1: r,
                        col0: c,
                        col1: c,
                    });
                    b.row0 = b.row0.min(r);
                    b.row1 = b.row1.max(r);
                    b.col0 = b.col0.min(c);
                    b.col1 = b.col1.max(c);
                }
            }
        }
        bb
    }

    /// Centered `size`x`size` window of a larger grid.
    pub fn crop_centered(&self, size: usize) -> Self {
        let off = self.center() - size / 2;
        Self::from_fn(size, |r, c| self.get(r + off, c + off))
    }

    /// Embeds this grid centered inside a zero grid of side `size`.
    pub fn embed_centered(&self, size: usize) -> Self {
        let off = size / 2 - self.center();
        let mut out = Self::zeros(size);
        for r in 0..self.side {
            for c in 0..self.side {
                out.set(r + off, c + off, self.get(r, c));
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Grid) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundingBox {
    pub row0: usize,
    pub row1: usize,
    pub col0: usize,
    pub col1: usize,
}

impl BoundingBox {
    pub fn height(&self) -> usize {
        self.row1 - self.row0 + 1
    }

    pub fn width(&self) -> usize {
        self.col1 - self.col0 + 1
    }
}

fn check_even_side(side: usize) -> Result<()> {
    if side == 0 || side % 2 != 0 {
        return Err(Error::Dimension(format!(
            "canvas side must be even and positive, got {side}"
        )));
    }
    Ok(())
}

/// Nonnegative intensity image on an even square canvas.
#[derive(Clone, Debug, PartialEq)]
pub struct Image(Grid);

impl Image {
    pub fn new(side: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_grid(Grid::from_vec(side, data)?)
    }

    pub fn from_grid(grid: Grid) -> Result<Self> {
        check_even_side(grid.side())?;
        if let Some(v) = grid.data().iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidValue(format!(
                "image intensities must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self(grid))
    }

    /// Clamps negatives (and non-finite values) to zero before wrapping.
    pub fn from_grid_clamped(mut grid: Grid) -> Result<Self> {
        for v in grid.data_mut() {
            if !v.is_finite() || *v < 0.0 {
                *v = 0.0;
            }
        }
        Self::from_grid(grid)
    }

    pub fn zeros(side: usize) -> Result<Self> {
        Self::from_grid(Grid::zeros(side))
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }

    pub fn flip180(&self) -> Self {
        Self(self.0.flip180())
    }

    pub fn roll(&self, dy: isize, dx: isize) -> Self {
        Self(self.0.roll(dy, dx))
    }

    pub fn shift(&self, dy: isize, dx: isize) -> Option<Self> {
        self.0.shift(dy, dx).map(Self)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_grid(Grid::from_vec(
            self.side(),
            self.data().iter().map(|v| v * factor).collect(),
        )?)
    }
}

impl Deref for Image {
    type Target = Grid;

    fn deref(&self) -> &Grid {
        &self.0
    }
}

/// Autocorrelation on a centered grid: lag `(0, 0)` lives at `(side/2, side/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Autocorrelation {
    grid: Grid,
    truncated: bool,
}

impl Autocorrelation {
    pub fn from_grid(grid: Grid) -> Result<Self> {
        check_even_side(grid.side())?;
        Ok(Self {
            grid,
            truncated: false,
        })
    }

    pub(crate) fn with_truncation(grid: Grid, truncated: bool) -> Self {
        Self { grid, truncated }
    }

    /// Set when the source image support exceeded the centered half-size box
    /// and lags beyond the window were dropped.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }

    /// Value at lag `(dy, dx)`.
    pub fn lag(&self, dy: isize, dx: isize) -> f64 {
        let c = self.grid.center() as isize;
        self.grid.get((c + dy) as usize, (c + dx) as usize)
    }

    /// Value at the zero lag, which is also the maximum for any genuine autocorrelation.
    pub fn peak(&self) -> f64 {
        self.lag(0, 0)
    }

    /// Copy divided by its maximum; an all-zero grid is returned unchanged.
    pub fn normalized(&self) -> (Self, f64) {
        let max = self.grid.max();
        if max > 0.0 {
            let data = self.grid.data().iter().map(|v| v / max).collect();
            let grid = Grid::from_vec(self.side(), data).expect("same shape");
            (
                Self {
                    grid,
                    truncated: self.truncated,
                },
                max,
            )
        } else {
            (self.clone(), 0.0)
        }
    }
}

impl Deref for Autocorrelation {
    type Target = Grid;

    fn deref(&self) -> &Grid {
        &self.grid
    }
}

/// Fourier modulus on the padded grid (twice the canvas side).
#[derive(Clone, Debug, PartialEq)]
pub struct FourierModulus(Grid);

impl FourierModulus {
    pub fn from_grid(grid: Grid) -> Result<Self> {
        check_even_side(grid.side())?;
        if let Some(v) = grid.data().iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidValue(format!(
                "Fourier modulus must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self(grid))
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    /// Side of the object canvas this modulus was derived from.
    pub fn canvas_side(&self) -> usize {
        self.0.side() / 2
    }
}

impl Deref for FourierModulus {
    type Target = Grid;

    fn deref(&self) -> &Grid {
        &self.0
    }
}
