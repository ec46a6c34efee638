use rand::Rng;

use super::linalg::Real;
use super::spec::NetSpec;
use crate::error::{Error, Result};
use crate::seed::rng;

/// Weights (`out_ch x in_ch x k x k`) and biases per convolution, in spec order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensors<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> Tensors<T> {
    pub fn zeros(spec: &NetSpec) -> Self {
        Self {
            weights: spec.convs().map(|c| vec![T::zero(); c.weight_len()]).collect(),
            biases: spec.convs().map(|c| vec![T::zero(); c.out_ch]).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.weights.iter().flatten().chain(self.biases.iter().flatten())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.weights
            .iter_mut()
            .flatten()
            .chain(self.biases.iter_mut().flatten())
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a = *a + *b;
        }
    }

    pub fn scale(&mut self, factor: T) {
        for a in self.iter_mut() {
            *a = *a * factor;
        }
    }

    pub fn cast<U: Real>(&self) -> Tensors<U> {
        let conv = |v: &Vec<Vec<T>>| -> Vec<Vec<U>> {
            v.iter()
                .map(|t| t.iter().map(|x| U::from_f64(x.as_f64())).collect())
                .collect()
        };
        Tensors {
            weights: conv(&self.weights),
            biases: conv(&self.biases),
        }
    }

    pub fn matches(&self, spec: &NetSpec) -> bool {
        self.weights.len() == spec.convs().count()
            && self.biases.len() == self.weights.len()
            && spec
                .convs()
                .zip(self.weights.iter().zip(&self.biases))
                .all(|(c, (w, b))| w.len() == c.weight_len() && b.len() == c.out_ch)
    }
}

/// Network parameters plus the momentum buffers used by SGD.
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams<T> {
    pub values: Tensors<T>,
    pub velocity: Tensors<T>,
}

impl<T: Real> NetParams<T> {
    /// Weights uniform in `[-sqrt(6/fan_in), sqrt(6/fan_in)]`, zero biases and velocities.
    pub fn init(spec: &NetSpec, seed: u64) -> Self {
        let mut rng = rng(seed);
        let mut values = Tensors::zeros(spec);
        for (conv, w) in spec.convs().zip(values.weights.iter_mut()) {
            let bound = (6.0 / conv.fan_in() as f64).sqrt();
            for v in w.iter_mut() {
                *v = T::from_f64(rng.gen_range(-bound..=bound));
            }
        }
        Self {
            velocity: Tensors::zeros(spec),
            values,
        }
    }

    pub fn from_values(spec: &NetSpec, values: Tensors<T>) -> Result<Self> {
        if !values.matches(spec) {
            return Err(Error::Dimension("parameter shapes do not match the network spec".into()));
        }
        Ok(Self {
            values,
            velocity: Tensors::zeros(spec),
        })
    }

    pub fn check(&self, spec: &NetSpec) -> Result<()> {
        if !self.values.matches(spec) || !self.velocity.matches(spec) {
            return Err(Error::Dimension("parameter shapes do not match the network spec".into()));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> NetParams<U> {
        NetParams {
            values: self.values.cast(),
            velocity: self.velocity.cast(),
        }
    }
}
