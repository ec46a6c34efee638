//! Grid file formats: the `PRGF` binary container and 8-bit PGM (P5).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const PRGF_MAGIC: &[u8; 4] = b"PRGF";
pub const PRGF_VERSION: u32 = 1;

pub fn write_prgf<W: Write>(mut out: W, grid: &Grid) -> Result<()> {
    let side = u16::try_from(grid.side())
        .map_err(|_| Error::Dimension(format!("side {} does not fit in u16", grid.side())))?;
    out.write_all(PRGF_MAGIC)?;
    out.write_all(&PRGF_VERSION.to_le_bytes())?;
    out.write_all(&side.to_le_bytes())?;
    out.write_all(&side.to_le_bytes())?;
    for v in grid.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_prgf<R: Read>(mut input: R) -> Result<Grid> {
    let mut magic = [0u8; 4];
    read_exact(&mut input, &mut magic, "PRGF magic")?;
    if &magic != PRGF_MAGIC {
        return Err(Error::Format(format!("bad grid magic {magic:?}")));
    }
    let mut word = [0u8; 4];
    read_exact(&mut input, &mut word, "PRGF version")?;
    let version = u32::from_le_bytes(word);
    if version != PRGF_VERSION {
        return Err(Error::Format(format!("unsupported grid version {version}")));
    }
    let mut half = [0u8; 2];
    read_exact(&mut input, &mut half, "PRGF width")?;
    let width = u16::from_le_bytes(half) as usize;
    read_exact(&mut input, &mut half, "PRGF height")?;
    let height = u16::from_le_bytes(half) as usize;
    if width != height {
        return Err(Error::Dimension(format!(
            "only square grids are supported, got {width}x{height}"
        )));
    }
    let mut bytes = vec![0u8; width * height * 8];
    read_exact(&mut input, &mut bytes, "PRGF payload")?;
    let data = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Grid::from_vec(width, data)
}

pub fn save_prgf(path: &Path, grid: &Grid) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_prgf(&mut out, grid)?;
    out.flush()?;
    Ok(())
}

pub fn load_prgf(path: &Path) -> Result<Grid> {
    read_prgf(BufReader::new(File::open(path)?))
}

pub(crate) fn read_exact<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Length(format!("truncated while reading {what}")),
        _ => Error::Io(e),
    })
}

/// Linear map `v -> (v - min) * scale` onto `[0, 255]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgmScale {
    pub min: f64,
    pub scale: f64,
}

impl PgmScale {
    pub fn fit(grid: &Grid) -> Self {
        let (min, max) = (grid.min(), grid.max());
        let scale = if max > min { 255.0 / (max - min) } else { 0.0 };
        Self { min, scale }
    }

    fn byte(&self, v: f64) -> u8 {
        ((v - self.min) * self.scale).round().clamp(0.0, 255.0) as u8
    }
}

pub fn write_pgm<W: Write>(mut out: W, grid: &Grid) -> Result<PgmScale> {
    let scale = PgmScale::fit(grid);
    let side = grid.side();
    write!(
        out,
        "P5\n# phaseret min={:e} scale={:e}\n{side} {side}\n255\n",
        scale.min, scale.scale
    )?;
    let bytes: Vec<u8> = grid.data().iter().map(|&v| scale.byte(v)).collect();
    out.write_all(&bytes)?;
    Ok(scale)
}

pub fn save_pgm(path: &Path, grid: &Grid) -> Result<PgmScale> {
    let mut out = BufWriter::new(File::create(path)?);
    let scale = write_pgm(&mut out, grid)?;
    out.flush()?;
    Ok(scale)
}

/// Rectangular 8-bit raster read from a P5 file, values mapped to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

pub fn read_pgm<R: BufRead>(mut input: R) -> Result<Raster> {
    let mut header_fields = Vec::new();
    let mut line = String::new();
    while header_fields.len() < 4 {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::Length("truncated PGM header".into()));
        }
        let content = line.split('#').next().unwrap_or("");
        header_fields.extend(content.split_whitespace().map(str::to_owned));
    }
    if header_fields[0] != "P5" {
        return Err(Error::Format(format!("not a binary PGM: {}", header_fields[0])));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM header field {s:?}")))
    };
    let (cols, rows, maxval) = (
        parse(&header_fields[1])?,
        parse(&header_fields[2])?,
        parse(&header_fields[3])?,
    );
    if maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("only 8-bit PGM is supported (maxval {maxval})")));
    }
    let mut bytes = vec![0u8; rows * cols];
    read_exact(&mut input, &mut bytes, "PGM pixels")?;
    let data = bytes.iter().map(|&b| f64::from(b) / maxval as f64).collect();
    Ok(Raster { rows, cols, data })
}

pub fn load_pgm(path: &Path) -> Result<Raster> {
    read_pgm(BufReader::new(File::open(path)?))
}

/// Writes panels as a mosaic: `rows` of equally sized grids, separated by a
/// one-pixel gap. Every panel is normalized on its own and its scale is
/// recorded in a comment line `# panel <row> <col> min=<m> scale=<s>`.
pub fn write_pgm_mosaic<W: Write>(mut out: W, rows: &[Vec<Grid>]) -> Result<()> {
    let side = rows
        .iter()
        .flatten()
        .map(Grid::side)
        .next()
        .ok_or_else(|| Error::Dimension("empty mosaic".into()))?;
    if rows.iter().flatten().any(|g| g.side() != side) {
        return Err(Error::Dimension("mosaic panels must share one size".into()));
    }
    let ncols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let gap = 1;
    let width = ncols * side + (ncols.saturating_sub(1)) * gap;
    let height = rows.len() * side + (rows.len().saturating_sub(1)) * gap;
    let mut pixels = vec![0u8; width * height];
    writeln!(out, "P5")?;
    for (ri, row) in rows.iter().enumerate() {
        for (ci, panel) in row.iter().enumerate() {
            let scale = PgmScale::fit(panel);
            writeln!(
                out,
                "# panel {ri} {ci} min={:e} scale={:e}",
                scale.min, scale.scale
            )?;
            let (y0, x0) = (ri * (side + gap), ci * (side + gap));
            for r in 0..side {
                for c in 0..side {
                    pixels[(y0 + r) * width + x0 + c] = scale.byte(panel.get(r, c));
                }
            }
        }
    }
    write!(out, "{width} {height}\n255\n")?;
    out.write_all(&pixels)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prgf_layout() {
        let g = Grid::from_fn(2, |r, c| (r * 2 + c) as f64 - 0.5);
        let mut bytes = Vec::new();
        write_prgf(&mut bytes, &g).unwrap();
        assert_eq!(&bytes[..4], b"PRGF");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[2, 0, 2, 0]);
        assert_eq!(bytes.len(), 12 + 4 * 8);
        assert_eq!(&bytes[12..20], &(-0.5f64).to_le_bytes());
        assert_eq!(read_prgf(bytes.as_slice()).unwrap(), g);
        assert!(matches!(read_prgf(&bytes[..20]), Err(Error::Length(_))));
        bytes[0] = b'X';
        assert!(matches!(read_prgf(bytes.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn pgm_scaling_and_read_back() {
        let g = Grid::from_vec(2, vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        let mut bytes = Vec::new();
        let scale = write_pgm(&mut bytes, &g).unwrap();
        assert_eq!(scale.min, 1.0);
        assert!((scale.scale - 63.75).abs() < 1e-12);
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.contains("# phaseret min="));
        let raster = read_pgm(bytes.as_slice()).unwrap();
        assert_eq!((raster.rows, raster.cols), (2, 2));
        assert_eq!(raster.data[0], 0.0);
        assert_eq!(raster.data[3], 1.0);
    }

    #[test]
    fn mosaic_records_every_panel() {
        let a = Grid::from_fn(4, |r, _| r as f64);
        let b = Grid::zeros(4);
        let mut bytes = Vec::new();
        write_pgm_mosaic(&mut bytes, &[vec![a.clone(), b], vec![a]]).unwrap();
        let text = String::from_utf8_lossy(&bytes);
        assert_eq!(text.matches("# panel").count(), 3);
        let raster = read_pgm(bytes.as_slice()).unwrap();
        assert_eq!((raster.rows, raster.cols), (9, 9));
    }
}
