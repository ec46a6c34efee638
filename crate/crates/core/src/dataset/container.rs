//! `PRDS` dataset container (little-endian).
//!
//! ```text
//! magic "PRDS" | version u32 = 1 | sample_count u64 | canvas u16
//! per sample:
//!   sample_seed u64 | mode u8 | digit_count u8
//!   per digit: label u8 | source_split u8 | source_index u32 | rotation f64 | offset_x i16 | offset_y i16
//!   image f32[W*W] | ac f32[W*W]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::mnist::SourceSplit;
use super::synth::{DatasetSample, DigitMeta, SampleMeta, SampleMode};
use crate::error::{Error, Result};
use crate::grid::{Autocorrelation, Grid, Image};
use crate::io::read_exact;

pub const PRDS_MAGIC: &[u8; 4] = b"PRDS";
pub const PRDS_VERSION: u32 = 1;

pub struct DatasetWriter<W: Write> {
    out: W,
    canvas: usize,
    declared: u64,
    written: u64,
}

impl DatasetWriter<BufWriter<File>> {
    pub fn create(path: &Path, canvas: usize, count: u64) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), canvas, count)
    }
}

impl<W: Write> DatasetWriter<W> {
    pub fn new(mut out: W, canvas: usize, count: u64) -> Result<Self> {
        let canvas16 = u16::try_from(canvas)
            .map_err(|_| Error::Dimension(format!("canvas {canvas} does not fit in u16")))?;
        out.write_all(PRDS_MAGIC)?;
        out.write_all(&PRDS_VERSION.to_le_bytes())?;
        out.write_all(&count.to_le_bytes())?;
        out.write_all(&canvas16.to_le_bytes())?;
        Ok(Self {
            out,
            canvas,
            declared: count,
            written: 0,
        })
    }

    pub fn write_sample(&mut self, sample: &DatasetSample) -> Result<()> {
        if sample.image.side() != self.canvas || sample.ac.side() != self.canvas {
            return Err(Error::Dimension(format!(
                "sample grid does not match the {} px canvas",
                self.canvas
            )));
        }
        if self.written == self.declared {
            return Err(Error::Consistency("more samples than declared".into()));
        }
        let meta = &sample.meta;
        let out = &mut self.out;
        out.write_all(&meta.sample_seed.to_le_bytes())?;
        out.write_all(&[meta.mode.code(), meta.digits.len() as u8])?;
        for d in &meta.digits {
            out.write_all(&[d.label, d.source_split.code()])?;
            out.write_all(&d.source_index.to_le_bytes())?;
            out.write_all(&d.rotation_rad.to_le_bytes())?;
            out.write_all(&d.offset.0.to_le_bytes())?;
            out.write_all(&d.offset.1.to_le_bytes())?;
        }
        for grid in [sample.image.grid(), sample.ac.grid()] {
            let bytes: Vec<u8> = grid
                .data()
                .iter()
                .flat_map(|&v| (v as f32).to_le_bytes())
                .collect();
            out.write_all(&bytes)?;
        }
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.declared {
            return Err(Error::Consistency(format!(
                "declared {} samples but wrote {}",
                self.declared, self.written
            )));
        }
        self.out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub canvas: usize,
    pub samples: Vec<DatasetSample>,
}

fn take<const N: usize, R: Read>(input: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(input, &mut buf, what)?;
    Ok(buf)
}

fn read_grid<R: Read>(input: &mut R, side: usize, what: &str) -> Result<Grid> {
    let mut bytes = vec![0u8; side * side * 4];
    read_exact(input, &mut bytes, what)?;
    Grid::from_vec(
        side,
        bytes
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
            .collect(),
    )
}

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    read_samples(input, None)
}

/// The first `limit` samples (fewer if the file is shorter); the rest of the
/// file is not read.
pub fn read_dataset_head<R: Read>(input: R, limit: usize) -> Result<Dataset> {
    read_samples(input, Some(limit))
}

fn read_samples<R: Read>(mut input: R, limit: Option<usize>) -> Result<Dataset> {
    let magic = take::<4, _>(&mut input, "dataset magic")?;
    if &magic != PRDS_MAGIC {
        return Err(Error::Format(format!("bad dataset magic {magic:?}")));
    }
    let version = u32::from_le_bytes(take(&mut input, "dataset version")?);
    if version != PRDS_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let count = u64::from_le_bytes(take(&mut input, "sample count")?);
    let canvas = u16::from_le_bytes(take(&mut input, "canvas size")?) as usize;
    let wanted = limit.map_or(count, |l| count.min(l as u64));
    let mut samples = Vec::with_capacity(wanted.min(1 << 20) as usize);
    for i in 0..wanted {
        let what = format!("sample {i}");
        let sample_seed = u64::from_le_bytes(take(&mut input, &what)?);
        let [mode, digit_count] = take::<2, _>(&mut input, &what)?;
        let mode = SampleMode::from_code(mode)?;
        let mut digits = Vec::with_capacity(digit_count as usize);
        for _ in 0..digit_count {
            let [label, split] = take::<2, _>(&mut input, &what)?;
            digits.push(DigitMeta {
                label,
                source_split: SourceSplit::from_code(split)?,
                source_index: u32::from_le_bytes(take(&mut input, &what)?),
                rotation_rad: f64::from_le_bytes(take(&mut input, &what)?),
                offset: (
                    i16::from_le_bytes(take(&mut input, &what)?),
                    i16::from_le_bytes(take(&mut input, &what)?),
                ),
            });
        }
        let image = Image::from_grid(read_grid(&mut input, canvas, &what)?)?;
        let ac = Autocorrelation::from_grid(read_grid(&mut input, canvas, &what)?)?;
        samples.push(DatasetSample {
            image,
            ac,
            meta: SampleMeta {
                mode,
                digits,
                sample_seed,
            },
        });
    }
    let mut trailing = [0u8; 1];
    if limit.is_none() && input.read(&mut trailing)? != 0 {
        return Err(Error::Consistency("trailing bytes after the last sample".into()));
    }
    Ok(Dataset { canvas, samples })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn load_dataset_head(path: &Path, limit: usize) -> Result<Dataset> {
    read_dataset_head(BufReader::new(File::open(path)?), limit)
}

pub fn write_dataset<W: Write>(out: W, canvas: usize, samples: &[DatasetSample]) -> Result<()> {
    let mut writer = DatasetWriter::new(out, canvas, samples.len() as u64)?;
    for s in samples {
        writer.write_sample(s)?;
    }
    writer.finish()
}

pub fn save_dataset(path: &Path, canvas: usize, samples: &[DatasetSample]) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), canvas, samples)
}
