//! Synthetic image/autocorrelation scenes built from glyphs.

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::container::DatasetWriter;
use super::mnist::{DigitGlyph, SourceSplit};
use crate::correlation::autocorrelate;
use crate::error::{Error, Result};
use crate::grid::{Autocorrelation, Grid, Image};
use crate::seed::{derive_seed, derive_stream, rng};

pub const MAX_PLACEMENT_ATTEMPTS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub canvas_px: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub pair_fraction: f64,
    pub master_seed: u64,
    pub margin_px: usize,
    /// Glyph magnification before rotation (1.0 keeps the native 28 px).
    pub glyph_scale: f64,
}

impl SynthConfig {
    /// 128 px canvas, 200000 training and 10000 validation scenes.
    pub fn large() -> Self {
        Self {
            canvas_px: 128,
            n_train: 200_000,
            n_val: 10_000,
            pair_fraction: 0.5,
            master_seed: 0,
            margin_px: 1,
            glyph_scale: 1.0,
        }
    }

    /// The large profile shrunk by two: 64 px canvas, half-size glyphs, 2000/200 scenes.
    pub fn desk() -> Self {
        Self {
            canvas_px: 64,
            n_train: 2000,
            n_val: 200,
            glyph_scale: 0.5,
            ..Self::large()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.canvas_px < 8 || self.canvas_px % 4 != 0 {
            return Err(Error::Config(format!(
                "canvas must be a multiple of 4 and at least 8, got {}",
                self.canvas_px
            )));
        }
        if self.n_train == 0 || self.n_val == 0 {
            return Err(Error::Config("n_train and n_val must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.pair_fraction) {
            return Err(Error::Config(format!(
                "pair_fraction {} outside [0, 1]",
                self.pair_fraction
            )));
        }
        if !(self.glyph_scale > 0.0 && self.glyph_scale.is_finite()) {
            return Err(Error::Config("glyph_scale must be positive".into()));
        }
        if 2 * self.margin_px >= self.canvas_px / 2 {
            return Err(Error::Config("margin leaves no room in the safe box".into()));
        }
        Ok(())
    }

    /// Half-open range of rows/cols available for glyph placement: the
    /// centered `W/2` box minus the margin.
    pub fn placement_range(&self) -> (usize, usize) {
        let w = self.canvas_px;
        (w / 4 + self.margin_px, 3 * w / 4 - self.margin_px)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMode {
    Single,
    Pair,
}

impl SampleMode {
    pub fn code(self) -> u8 {
        match self {
            SampleMode::Single => 0,
            SampleMode::Pair => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(SampleMode::Single),
            1 => Ok(SampleMode::Pair),
            other => Err(Error::Format(format!("unknown sample mode {other}"))),
        }
    }

    pub fn digit_count(self) -> usize {
        match self {
            SampleMode::Single => 1,
            SampleMode::Pair => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DigitMeta {
    pub label: u8,
    pub source_split: SourceSplit,
    pub source_index: u32,
    pub rotation_rad: f64,
    /// Canvas position `(x, y)` of the top-left corner of the glyph's bounding box.
    pub offset: (i16, i16),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleMeta {
    pub mode: SampleMode,
    pub digits: Vec<DigitMeta>,
    pub sample_seed: u64,
}

/// A rendered scene and its full autocorrelation. Both grids hold values
/// that are exactly representable in `f32`, matching the on-disk container.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSample {
    pub image: Image,
    pub ac: Autocorrelation,
    pub meta: SampleMeta,
}

pub(crate) fn round_to_f32(grid: &Grid) -> Grid {
    Grid::from_vec(
        grid.side(),
        grid.data().iter().map(|&v| f64::from(v as f32)).collect(),
    )
    .expect("same shape")
}

/// Tight tile holding a rotated (and scaled) glyph.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Tile {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

fn bilinear(glyph: &DigitGlyph, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (y0, x0) = (y0 as isize, x0 as isize);
    let at = |r: isize, c: isize| {
        if r < 0 || c < 0 || r >= glyph.rows as isize || c >= glyph.cols as isize {
            0.0
        } else {
            glyph.get(r as usize, c as usize)
        }
    };
    at(y0, x0) * (1.0 - fy) * (1.0 - fx)
        + at(y0, x0 + 1) * (1.0 - fy) * fx
        + at(y0 + 1, x0) * fy * (1.0 - fx)
        + at(y0 + 1, x0 + 1) * fy * fx
}

/// Rotates `glyph` by `angle` (counterclockwise on screen) about its center
/// with bilinear interpolation, after scaling by `scale`. When shrinking,
/// each output pixel averages `ceil(1/scale)^2` bilinear samples. The result
/// is cropped to its nonzero bounding box; `None` for a blank glyph.
pub(crate) fn rotate_glyph(glyph: &DigitGlyph, angle: f64, scale: f64) -> Option<Tile> {
    let extent = scale * ((glyph.rows * glyph.rows + glyph.cols * glyph.cols) as f64).sqrt();
    let side = extent.ceil() as usize + 2;
    let out_center = (side as f64 - 1.0) / 2.0;
    let (src_cy, src_cx) = ((glyph.rows as f64 - 1.0) / 2.0, (glyph.cols as f64 - 1.0) / 2.0);
    let (sin, cos) = angle.sin_cos();
    let sub = (1.0 / scale).ceil().max(1.0) as usize;
    let mut data = vec![0.0; side * side];
    for r in 0..side {
        for c in 0..side {
            let mut acc = 0.0;
            for a in 0..sub {
                for b in 0..sub {
                    let dy = r as f64 + (a as f64 + 0.5) / sub as f64 - 0.5 - out_center;
                    let dx = c as f64 + (b as f64 + 0.5) / sub as f64 - 0.5 - out_center;
                    let sx = (cos * dx - sin * dy) / scale + src_cx;
                    let sy = (sin * dx + cos * dy) / scale + src_cy;
                    acc += bilinear(glyph, sy, sx);
                }
            }
            data[r * side + c] = (acc / (sub * sub) as f64).clamp(0.0, 1.0);
        }
    }
    let grid = Grid::from_vec(side, data).expect("square tile");
    let bb = grid.bounding_box()?;
    let mut tile = Vec::with_capacity(bb.height() * bb.width());
    for r in bb.row0..=bb.row1 {
        for c in bb.col0..=bb.col1 {
            tile.push(grid.get(r, c));
        }
    }
    Some(Tile {
        rows: bb.height(),
        cols: bb.width(),
        data: tile,
    })
}

fn disjoint(a: (usize, usize, &Tile), b: (usize, usize, &Tile)) -> bool {
    let (ay, ax, at) = a;
    let (by, bx, bt) = b;
    ay + at.rows <= by || by + bt.rows <= ay || ax + at.cols <= bx || bx + bt.cols <= ax
}

/// Rotates, places and composes the given glyphs, drawing angles and
/// placements from `rng`.
pub(crate) fn render_scene(
    glyphs: &[&DigitGlyph],
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    sample_seed: u64,
) -> Result<DatasetSample> {
    let mode = match glyphs.len() {
        1 => SampleMode::Single,
        2 => SampleMode::Pair,
        n => return Err(Error::Degenerate(format!("scenes hold one or two glyphs, got {n}"))),
    };
    let (lo, hi) = cfg.placement_range();
    let avail = hi - lo;
    let mut tiles = Vec::with_capacity(glyphs.len());
    let mut angles = Vec::with_capacity(glyphs.len());
    for glyph in glyphs {
        let angle = rng.gen_range(-FRAC_PI_4..=FRAC_PI_4);
        let tile = rotate_glyph(glyph, angle, cfg.glyph_scale).ok_or_else(|| {
            Error::Degenerate(format!("glyph {} is blank", glyph.source_index))
        })?;
        if tile.rows > avail || tile.cols > avail {
            return Err(Error::Degenerate(format!(
                "rotated glyph {}x{} does not fit the {avail} px placement box",
                tile.rows, tile.cols
            )));
        }
        tiles.push(tile);
        angles.push(angle);
    }

    let mut placed: Option<Vec<(usize, usize)>> = None;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let spots: Vec<(usize, usize)> = tiles
            .iter()
            .map(|t| {
                (
                    lo + rng.gen_range(0..=avail - t.rows),
                    lo + rng.gen_range(0..=avail - t.cols),
                )
            })
            .collect();
        let ok = spots.len() < 2
            || disjoint(
                (spots[0].0, spots[0].1, &tiles[0]),
                (spots[1].0, spots[1].1, &tiles[1]),
            );
        if ok {
            placed = Some(spots);
            break;
        }
    }
    let spots = placed.ok_or_else(|| {
        Error::Degenerate(format!(
            "no disjoint placement found in {MAX_PLACEMENT_ATTEMPTS} attempts"
        ))
    })?;

    let w = cfg.canvas_px;
    let mut canvas = Grid::zeros(w);
    for (tile, &(y, x)) in tiles.iter().zip(&spots) {
        for r in 0..tile.rows {
            for c in 0..tile.cols {
                let v = tile.data[r * tile.cols + c];
                if v > canvas.get(y + r, x + c) {
                    canvas.set(y + r, x + c, v);
                }
            }
        }
    }
    let image = Image::from_grid(round_to_f32(&canvas))?;
    let ac = autocorrelate(&image);
    let ac = Autocorrelation::with_truncation(round_to_f32(ac.grid()), ac.truncated());
    let digits = glyphs
        .iter()
        .zip(&angles)
        .zip(&spots)
        .map(|((g, &angle), &(y, x))| DigitMeta {
            label: g.label,
            source_split: g.source_split,
            source_index: g.source_index,
            rotation_rad: angle,
            offset: (x as i16, y as i16),
        })
        .collect();
    Ok(DatasetSample {
        image,
        ac,
        meta: SampleMeta {
            mode,
            digits,
            sample_seed,
        },
    })
}

/// Renders one scene; glyphs, angles in `[-pi/4, pi/4]` and placements are
/// all drawn from `sample_seed`.
pub fn render_sample(
    pool: &[DigitGlyph],
    mode: SampleMode,
    sample_seed: u64,
    cfg: &SynthConfig,
) -> Result<DatasetSample> {
    if pool.is_empty() {
        return Err(Error::Degenerate("glyph pool is empty".into()));
    }
    let mut rng = rng(sample_seed);
    let chosen: Vec<&DigitGlyph> = (0..mode.digit_count())
        .map(|_| &pool[rng.gen_range(0..pool.len())])
        .collect();
    render_scene(&chosen, &mut rng, cfg, sample_seed)
}

/// Which split is allowed in the training and validation files.
fn check_pool(pool: &[DigitGlyph], expected: SourceSplit, name: &str) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::Degenerate(format!("{name} glyph pool is empty")));
    }
    if let Some(g) = pool.iter().find(|g| g.source_split != expected) {
        return Err(Error::Provenance(format!(
            "{name} pool contains glyph {} from the {:?} split",
            g.source_index, g.source_split
        )));
    }
    Ok(())
}

/// Samples `0..n` of one file in storage order: the first `round(n *
/// pair_fraction)` local indices are pairs, the remainder singles, and the
/// order is shuffled by a seeded permutation. Sample seeds come from the
/// global index `base + local`.
fn file_plan(cfg: &SynthConfig, n: usize, base: usize, tag: &str) -> Vec<(SampleMode, u64)> {
    let n_pair = (n as f64 * cfg.pair_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(derive_stream(cfg.master_seed, tag)));
    order
        .into_iter()
        .map(|local| {
            let mode = if local < n_pair {
                SampleMode::Pair
            } else {
                SampleMode::Single
            };
            (mode, derive_seed(cfg.master_seed, (base + local) as u64))
        })
        .collect()
}

const CHUNK: usize = 256;

fn render_plan(pool: &[DigitGlyph], plan: &[(SampleMode, u64)], cfg: &SynthConfig) -> Result<Vec<DatasetSample>> {
    plan.par_iter()
        .map(|&(mode, seed)| render_sample(pool, mode, seed, cfg))
        .collect()
}

/// In-memory training and validation sets, identical to what
/// [`build_dataset`] writes.
pub fn generate_datasets(
    cfg: &SynthConfig,
    train_glyphs: &[DigitGlyph],
    val_glyphs: &[DigitGlyph],
) -> Result<(Vec<DatasetSample>, Vec<DatasetSample>)> {
    cfg.validate()?;
    check_pool(train_glyphs, SourceSplit::Train, "training")?;
    check_pool(val_glyphs, SourceSplit::Test, "validation")?;
    let train = render_plan(train_glyphs, &file_plan(cfg, cfg.n_train, 0, "train-order"), cfg)?;
    let val = render_plan(
        val_glyphs,
        &file_plan(cfg, cfg.n_val, cfg.n_train, "val-order"),
        cfg,
    )?;
    Ok((train, val))
}

fn write_file(path: &Path, pool: &[DigitGlyph], plan: &[(SampleMode, u64)], cfg: &SynthConfig) -> Result<()> {
    let mut writer = DatasetWriter::create(path, cfg.canvas_px, plan.len() as u64)?;
    for chunk in plan.chunks(CHUNK) {
        for sample in render_plan(pool, chunk, cfg)? {
            writer.write_sample(&sample)?;
        }
    }
    writer.finish()
}

/// Writes the training file from `train_glyphs` only and the validation file
/// from `val_glyphs` only.
pub fn build_dataset(
    cfg: &SynthConfig,
    train_glyphs: &[DigitGlyph],
    val_glyphs: &[DigitGlyph],
    train_path: &Path,
    val_path: &Path,
) -> Result<()> {
    cfg.validate()?;
    check_pool(train_glyphs, SourceSplit::Train, "training")?;
    check_pool(val_glyphs, SourceSplit::Test, "validation")?;
    write_file(
        train_path,
        train_glyphs,
        &file_plan(cfg, cfg.n_train, 0, "train-order"),
        cfg,
    )?;
    write_file(
        val_path,
        val_glyphs,
        &file_plan(cfg, cfg.n_val, cfg.n_train, "val-order"),
        cfg,
    )
}

/// Scenes built from caller-supplied glyphs (letters, drawings): consecutive
/// glyphs form pairs, an odd one out becomes a single. Scene `i` uses
/// `derive_seed(seed, i)` for its angles and placement.
pub fn render_out_of_distribution(
    glyphs: &[DigitGlyph],
    cfg: &SynthConfig,
    seed: u64,
) -> Result<Vec<DatasetSample>> {
    glyphs
        .chunks(2)
        .enumerate()
        .map(|(i, scene)| {
            let sample_seed = derive_seed(seed, i as u64);
            let refs: Vec<&DigitGlyph> = scene.iter().collect();
            render_scene(&refs, &mut rng(sample_seed), cfg, sample_seed)
        })
        .collect()
}

pub fn export_out_of_distribution(
    glyphs: &[DigitGlyph],
    cfg: &SynthConfig,
    seed: u64,
    path: &Path,
) -> Result<()> {
    let samples = render_out_of_distribution(glyphs, cfg, seed)?;
    let mut writer = DatasetWriter::create(path, cfg.canvas_px, samples.len() as u64)?;
    for s in &samples {
        writer.write_sample(s)?;
    }
    writer.finish()
}
