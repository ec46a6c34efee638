//! Forward and backward passes over a [`NetSpec`], one sample at a time.

use super::linalg::{gemm, Operand, Real};
use super::params::Tensors;
use super::spec::{ConvSpec, Layer, NetSpec};
use crate::error::{Error, Result};

/// Activations recorded by [`forward`] and consumed by [`backward`].
#[derive(Clone, Debug)]
pub struct Tape<T> {
    /// Input of every layer followed by the network output, each `C x S x S`.
    activations: Vec<Vec<T>>,
    /// `(channels, side)` of every entry in `activations`.
    shapes: Vec<(usize, usize)>,
    /// Unfolded input patches of every 3x3 convolution.
    cols: Vec<Option<Vec<T>>>,
}

impl<T: Real> Tape<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("tape holds the input at least")
    }

    pub fn output_side(&self) -> usize {
        self.shapes.last().expect("nonempty").1
    }

    /// Positivity pattern of every ReLU output; two tapes with equal patterns
    /// lie on the same linear piece of the network.
    pub fn relu_pattern(&self, spec: &NetSpec) -> Vec<bool> {
        spec.layers
            .iter()
            .zip(self.activations.iter().skip(1))
            .filter(|(l, _)| matches!(l, Layer::Conv(c) if c.relu))
            .flat_map(|(_, a)| a.iter().map(|v| *v > T::zero()))
            .collect()
    }
}

fn im2col<T: Real>(x: &[T], ch: usize, side: usize, conv: &ConvSpec, out_side: usize) -> Vec<T> {
    let k = conv.kernel;
    let pad = (k / 2) as isize;
    let n = out_side * out_side;
    let mut cols = vec![T::zero(); ch * k * k * n];
    for c in 0..ch {
        let plane = &x[c * side * side..(c + 1) * side * side];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..out_side {
                    let iy = (oy * conv.stride + ky) as isize - pad;
                    if iy < 0 || iy >= side as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * side..(iy as usize + 1) * side];
                    let out = &mut dst[oy * out_side..(oy + 1) * out_side];
                    for (ox, o) in out.iter_mut().enumerate() {
                        let ix = (ox * conv.stride + kx) as isize - pad;
                        if ix >= 0 && ix < side as isize {
                            *o = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Real>(cols: &[T], ch: usize, side: usize, conv: &ConvSpec, out_side: usize) -> Vec<T> {
    let k = conv.kernel;
    let pad = (k / 2) as isize;
    let n = out_side * out_side;
    let mut x = vec![T::zero(); ch * side * side];
    for c in 0..ch {
        let plane = &mut x[c * side * side..(c + 1) * side * side];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * n..(row + 1) * n];
                for oy in 0..out_side {
                    let iy = (oy * conv.stride + ky) as isize - pad;
                    if iy < 0 || iy >= side as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * side..(iy as usize + 1) * side];
                    for ox in 0..out_side {
                        let ix = (ox * conv.stride + kx) as isize - pad;
                        if ix >= 0 && ix < side as isize {
                            dst[ix as usize] = dst[ix as usize] + src[oy * out_side + ox];
                        }
                    }
                }
            }
        }
    }
    x
}

fn upsample2<T: Real>(x: &[T], ch: usize, side: usize) -> Vec<T> {
    let big = 2 * side;
    let mut out = vec![T::zero(); ch * big * big];
    for c in 0..ch {
        for y in 0..big {
            for xx in 0..big {
                out[(c * big + y) * big + xx] = x[(c * side + y / 2) * side + xx / 2];
            }
        }
    }
    out
}

fn upsample2_backward<T: Real>(d: &[T], ch: usize, side: usize) -> Vec<T> {
    let big = 2 * side;
    let mut out = vec![T::zero(); ch * side * side];
    for c in 0..ch {
        for y in 0..big {
            for x in 0..big {
                let o = &mut out[(c * side + y / 2) * side + x / 2];
                *o = *o + d[(c * big + y) * big + x];
            }
        }
    }
    out
}

/// Runs the network on one `side`x`side` single-channel input.
pub fn forward<T: Real>(spec: &NetSpec, params: &Tensors<T>, input: &[T], side: usize) -> Result<Tape<T>> {
    if !params.matches(spec) {
        return Err(Error::Dimension("parameters do not match the network spec".into()));
    }
    if input.len() != side * side {
        return Err(Error::Dimension(format!(
            "input holds {} values, expected {side}x{side}",
            input.len()
        )));
    }
    spec.validate(side)?;
    let mut activations = vec![input.to_vec()];
    let mut shapes = vec![(1, side)];
    let mut cols_store = Vec::with_capacity(spec.layers.len());
    let mut conv_index = 0;
    for layer in &spec.layers {
        let (ch, s) = *shapes.last().unwrap();
        let x = activations.last().unwrap();
        match layer {
            Layer::Conv(conv) => {
                let out_side = conv.out_side(s);
                let n = out_side * out_side;
                let w = &params.weights[conv_index];
                let b = &params.biases[conv_index];
                let mut out = vec![T::zero(); conv.out_ch * n];
                for (o, row) in out.chunks_mut(n).enumerate() {
                    row.fill(b[o]);
                }
                let cols = if conv.kernel == 1 && conv.stride == 1 {
                    None
                } else {
                    Some(im2col(x, ch, s, conv, out_side))
                };
                let patches = cols.as_deref().unwrap_or(x);
                gemm(
                    Operand::new(w, conv.out_ch, conv.fan_in()),
                    Operand::new(patches, conv.fan_in(), n),
                    T::one(),
                    &mut out,
                );
                if conv.relu {
                    for v in out.iter_mut() {
                        if *v < T::zero() {
                            *v = T::zero();
                        }
                    }
                }
                cols_store.push(cols);
                activations.push(out);
                shapes.push((conv.out_ch, out_side));
                conv_index += 1;
            }
            Layer::Upsample2 => {
                let out = upsample2(x, ch, s);
                cols_store.push(None);
                activations.push(out);
                shapes.push((ch, 2 * s));
            }
        }
    }
    Ok(Tape {
        activations,
        shapes,
        cols: cols_store,
    })
}

/// Parameter gradients given `d_output = dLoss/dOutput`.
pub fn backward<T: Real>(spec: &NetSpec, params: &Tensors<T>, tape: &Tape<T>, d_output: &[T]) -> Tensors<T> {
    assert_eq!(d_output.len(), tape.output().len(), "gradient does not match the output");
    let mut grads = Tensors::zeros(spec);
    let mut delta = d_output.to_vec();
    let mut conv_index = spec.convs().count();
    for (i, layer) in spec.layers.iter().enumerate().rev() {
        let (in_ch, in_side) = tape.shapes[i];
        let out = &tape.activations[i + 1];
        match layer {
            Layer::Conv(conv) => {
                conv_index -= 1;
                let out_side = tape.shapes[i + 1].1;
                let n = out_side * out_side;
                if conv.relu {
                    for (d, a) in delta.iter_mut().zip(out) {
                        if *a <= T::zero() {
                            *d = T::zero();
                        }
                    }
                }
                let patches = tape.cols[i].as_deref().unwrap_or(&tape.activations[i]);
                gemm(
                    Operand::new(&delta, conv.out_ch, n),
                    Operand::new(patches, conv.fan_in(), n).t(),
                    T::zero(),
                    &mut grads.weights[conv_index],
                );
                for (o, row) in delta.chunks(n).enumerate() {
                    grads.biases[conv_index][o] = row.iter().copied().sum();
                }
                if i == 0 {
                    break;
                }
                let mut d_cols = vec![T::zero(); conv.fan_in() * n];
                gemm(
                    Operand::new(&params.weights[conv_index], conv.out_ch, conv.fan_in()).t(),
                    Operand::new(&delta, conv.out_ch, n),
                    T::zero(),
                    &mut d_cols,
                );
                delta = if tape.cols[i].is_some() {
                    col2im(&d_cols, in_ch, in_side, conv, out_side)
                } else {
                    d_cols
                };
            }
            Layer::Upsample2 => {
                delta = upsample2_backward(&delta, in_ch, in_side);
            }
        }
    }
    grads
}
