//! `PRCK` checkpoint container.
//!
//! Layout (little-endian): magic, version `u32`, canvas `u32`, layer count
//! `u32`, one descriptor per layer (`u8` tag then kernel, in, out, stride as
//! `u32` and relu as `u8` for convolutions), then weights and biases of every
//! convolution as `f32` in spec order, then epoch `u32`, mask radius `i32`
//! (`-1` without mask), the master seed `u64` from which every shuffle stream
//! is derived, the validation loss `f64`, the loss target `u8`, and an
//! optional trailing copy of the momentum buffers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::{NetParams, Tensors};
use super::spec::{ConvSpec, Layer, NetSpec};
use crate::error::{Error, Result};
use crate::io::read_exact;

pub const PRCK_MAGIC: &[u8; 4] = b"PRCK";
pub const PRCK_VERSION: u32 = 1;

const TAG_CONV: u8 = 0;
const TAG_UPSAMPLE: u8 = 1;

/// What the loss compares against once a mask is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossTarget {
    /// Masked ground truth, counted on the kept pixels only.
    Masked,
    /// Unmasked ground truth over the whole window.
    Full,
}

impl LossTarget {
    pub fn code(self) -> u8 {
        match self {
            Self::Masked => 0,
            Self::Full => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Self::Masked),
            1 => Ok(Self::Full),
            _ => Err(Error::Format(format!("unknown loss target {code}"))),
        }
    }
}

/// Trained network snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub canvas: usize,
    pub spec: NetSpec,
    pub params: NetParams<f32>,
    /// Number of epochs completed.
    pub epoch: u32,
    /// Mask radius of the last completed epoch.
    pub radius_px: Option<u32>,
    pub seed: u64,
    pub val_loss: f64,
    pub loss_target: LossTarget,
}

impl Checkpoint {
    /// `full` for the unmasked stage, `r<radius>` otherwise.
    pub fn label(&self) -> String {
        match self.radius_px {
            None => "full".into(),
            Some(r) => format!("r{r}"),
        }
    }

    pub fn write<W: Write>(&self, mut out: W, with_velocity: bool) -> Result<()> {
        self.params.check(&self.spec)?;
        out.write_all(PRCK_MAGIC)?;
        out.write_all(&PRCK_VERSION.to_le_bytes())?;
        out.write_all(&u32_of(self.canvas)?.to_le_bytes())?;
        out.write_all(&u32_of(self.spec.layers.len())?.to_le_bytes())?;
        for layer in &self.spec.layers {
            match layer {
                Layer::Conv(c) => {
                    out.write_all(&[TAG_CONV])?;
                    for v in [c.kernel, c.in_ch, c.out_ch, c.stride] {
                        out.write_all(&u32_of(v)?.to_le_bytes())?;
                    }
                    out.write_all(&[u8::from(c.relu)])?;
                }
                Layer::Upsample2 => out.write_all(&[TAG_UPSAMPLE])?,
            }
        }
        write_tensors(&mut out, &self.params.values)?;
        out.write_all(&self.epoch.to_le_bytes())?;
        let radius = match self.radius_px {
            None => -1i32,
            Some(r) => i32::try_from(r).map_err(|_| Error::InvalidValue(format!("radius {r} too large")))?,
        };
        out.write_all(&radius.to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&self.val_loss.to_le_bytes())?;
        out.write_all(&[self.loss_target.code(), u8::from(with_velocity)])?;
        if with_velocity {
            write_tensors(&mut out, &self.params.velocity)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut input, &mut magic, "checkpoint magic")?;
        if &magic != PRCK_MAGIC {
            return Err(Error::Format(format!("bad checkpoint magic {magic:?}")));
        }
        let version = read_u32(&mut input, "checkpoint version")?;
        if version != PRCK_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let canvas = read_u32(&mut input, "canvas")? as usize;
        let n_layers = read_u32(&mut input, "layer count")? as usize;
        if n_layers > 1024 {
            return Err(Error::Format(format!("implausible layer count {n_layers}")));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            match read_u8(&mut input, "layer tag")? {
                TAG_CONV => {
                    let mut v = [0usize; 4];
                    for x in v.iter_mut() {
                        *x = read_u32(&mut input, "layer descriptor")? as usize;
                    }
                    let relu = match read_u8(&mut input, "activation")? {
                        0 => false,
                        1 => true,
                        other => return Err(Error::Format(format!("bad activation flag {other}"))),
                    };
                    layers.push(Layer::Conv(ConvSpec {
                        kernel: v[0],
                        in_ch: v[1],
                        out_ch: v[2],
                        stride: v[3],
                        relu,
                    }));
                }
                TAG_UPSAMPLE => layers.push(Layer::Upsample2),
                other => return Err(Error::Format(format!("unknown layer tag {other}"))),
            }
        }
        let spec = NetSpec { layers };
        spec.validate(canvas)?;
        let values = read_tensors(&mut input, &spec)?;
        let epoch = read_u32(&mut input, "epoch")?;
        let mut word = [0u8; 4];
        read_exact(&mut input, &mut word, "radius")?;
        let radius_px = match i32::from_le_bytes(word) {
            -1 => None,
            r if r >= 0 => Some(r as u32),
            r => return Err(Error::Format(format!("bad radius {r}"))),
        };
        let mut long = [0u8; 8];
        read_exact(&mut input, &mut long, "seed")?;
        let seed = u64::from_le_bytes(long);
        read_exact(&mut input, &mut long, "validation loss")?;
        let val_loss = f64::from_le_bytes(long);
        let loss_target = LossTarget::from_code(read_u8(&mut input, "loss target")?)?;
        let velocity = match read_u8(&mut input, "velocity flag")? {
            0 => Tensors::zeros(&spec),
            1 => read_tensors(&mut input, &spec)?,
            other => return Err(Error::Format(format!("bad velocity flag {other}"))),
        };
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        let params = NetParams { values, velocity };
        if !params.values.all_finite() || !params.velocity.all_finite() {
            return Err(Error::InvalidValue("checkpoint holds non-finite parameters".into()));
        }
        Ok(Self {
            canvas,
            spec,
            params,
            epoch,
            radius_px,
            seed,
            val_loss,
            loss_target,
        })
    }

    pub fn save(&self, path: &Path, with_velocity: bool) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write(&mut out, with_velocity)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

fn u32_of(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidValue(format!("{v} does not fit in u32")))
}

fn read_u8<R: Read>(input: &mut R, what: &str) -> Result<u8> {
    let mut b = [0u8; 1];
    read_exact(input, &mut b, what)?;
    Ok(b[0])
}

fn read_u32<R: Read>(input: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn write_tensors<W: Write>(out: &mut W, t: &Tensors<f32>) -> Result<()> {
    for (w, b) in t.weights.iter().zip(&t.biases) {
        for v in w.iter().chain(b) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_tensors<R: Read>(input: &mut R, spec: &NetSpec) -> Result<Tensors<f32>> {
    let mut t = Tensors::zeros(spec);
    for (w, b) in t.weights.iter_mut().zip(t.biases.iter_mut()) {
        let mut bytes = vec![0u8; 4 * (w.len() + b.len())];
        read_exact(input, &mut bytes, "tensor data")?;
        let mut vals = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        for v in w.iter_mut().chain(b.iter_mut()) {
            *v = vals.next().expect("sized above");
        }
    }
    Ok(t)
}
