use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    /// 1 or 3; zero padding of `kernel / 2` keeps stride-1 sizes.
    pub kernel: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    /// 1 or 2.
    pub stride: usize,
    pub relu: bool,
}

impl ConvSpec {
    pub fn new(kernel: usize, in_ch: usize, out_ch: usize, stride: usize) -> Self {
        Self {
            kernel,
            in_ch,
            out_ch,
            stride,
            relu: true,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.in_ch * self.kernel * self.kernel
    }

    pub fn weight_len(&self) -> usize {
        self.out_ch * self.fan_in()
    }

    pub fn out_side(&self, side: usize) -> usize {
        let pad = self.kernel / 2;
        (side + 2 * pad - self.kernel) / self.stride + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    Conv(ConvSpec),
    /// Nearest-neighbour upsampling by two.
    Upsample2,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetSpec {
    pub layers: Vec<Layer>,
}

impl NetSpec {
    /// Seven-convolution encoder-decoder used by default:
    /// `3x3(1->16) 3x3/2(16->32) 3x3/2(32->64) 3x3(64->64) up 3x3(64->32) up
    /// 3x3(32->16) 1x1(16->1)`, ReLU everywhere including the output.
    pub fn surrogate() -> Self {
        Self::encoder_decoder(16)
    }

    /// The same topology with channel widths `w, 2w, 4w, 4w, 2w, w`.
    pub fn encoder_decoder(width: usize) -> Self {
        let w = width;
        Self {
            layers: vec![
                Layer::Conv(ConvSpec::new(3, 1, w, 1)),
                Layer::Conv(ConvSpec::new(3, w, 2 * w, 2)),
                Layer::Conv(ConvSpec::new(3, 2 * w, 4 * w, 2)),
                Layer::Conv(ConvSpec::new(3, 4 * w, 4 * w, 1)),
                Layer::Upsample2,
                Layer::Conv(ConvSpec::new(3, 4 * w, 2 * w, 1)),
                Layer::Upsample2,
                Layer::Conv(ConvSpec::new(3, 2 * w, w, 1)),
                Layer::Conv(ConvSpec::new(1, w, 1, 1)),
            ],
        }
    }

    pub fn convs(&self) -> impl Iterator<Item = &ConvSpec> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Conv(c) => Some(c),
            Layer::Upsample2 => None,
        })
    }

    /// Checks channel chaining, a single input and output channel, and that
    /// a `canvas`x`canvas` input comes back at the same size.
    pub fn validate(&self, canvas: usize) -> Result<()> {
        let mut ch = 1;
        let mut side = canvas;
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv(c) => {
                    if c.in_ch != ch {
                        return Err(Error::Dimension(format!(
                            "layer {i} expects {} channels but receives {ch}",
                            c.in_ch
                        )));
                    }
                    if !matches!(c.kernel, 1 | 3) || !matches!(c.stride, 1 | 2) || c.out_ch == 0 {
                        return Err(Error::Config(format!(
                            "layer {i}: unsupported kernel {} / stride {} / width {}",
                            c.kernel, c.stride, c.out_ch
                        )));
                    }
                    if c.stride == 2 && side % 2 != 0 {
                        return Err(Error::Dimension(format!(
                            "layer {i} halves an odd side {side}"
                        )));
                    }
                    side = c.out_side(side);
                    ch = c.out_ch;
                }
                Layer::Upsample2 => side *= 2,
            }
        }
        if ch != 1 {
            return Err(Error::Dimension(format!("network ends with {ch} channels, expected 1")));
        }
        if side != canvas {
            return Err(Error::Dimension(format!(
                "network maps a {canvas} px canvas to {side} px"
            )));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.convs().map(|c| c.weight_len() + c.out_ch).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_is_valid() {
        let spec = NetSpec::surrogate();
        spec.validate(64).unwrap();
        spec.validate(128).unwrap();
        assert!(spec.validate(62).is_err());
        assert_eq!(spec.convs().count(), 7);
        assert_eq!(spec.convs().last().unwrap().out_ch, 1);
    }

    #[test]
    fn broken_specs_are_rejected() {
        let mut spec = NetSpec::surrogate();
        spec.layers.pop();
        assert!(spec.validate(64).is_err());
        let mut spec = NetSpec::surrogate();
        spec.layers.remove(4);
        assert!(spec.validate(64).is_err());
    }
}
