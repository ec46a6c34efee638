//! Running a trained network and scoring it with the training loss.

use rayon::prelude::*;

use super::checkpoint::{Checkpoint, LossTarget};
use super::linalg::Real;
use super::loss::{autocorr_l1_loss, LossReport};
use super::net::{forward, Tape};
use super::params::Tensors;
use super::spec::NetSpec;
use crate::correlation::{apply_disk_mask, DiskMask};
use crate::error::{Error, Result};
use crate::grid::{Autocorrelation, Grid, Image};

/// Network input and loss target for one autocorrelation, both divided by
/// the maximum of the (masked) input.
pub(crate) struct Prepared {
    pub input: Autocorrelation,
    pub target: Autocorrelation,
    pub region_only: bool,
    /// The divisor; 0 for an all-zero input.
    pub scale: f64,
}

pub(crate) fn prepare(ac: &Autocorrelation, mask: Option<&DiskMask>, target: LossTarget) -> Prepared {
    let masked = match mask {
        Some(m) => apply_disk_mask(ac, m),
        None => ac.clone(),
    };
    let (input, scale) = masked.normalized();
    let masked_target = target == LossTarget::Masked || mask.is_none();
    let target = if masked_target {
        input.clone()
    } else if scale > 0.0 {
        let data = ac.data().iter().map(|v| v / scale).collect();
        Autocorrelation::from_grid(Grid::from_vec(ac.side(), data).expect("same shape")).expect("even side")
    } else {
        ac.clone()
    };
    Prepared {
        input,
        target,
        region_only: masked_target && mask.is_some(),
        scale,
    }
}

/// Forward pass on a prepared input; the prediction lives in the normalized
/// domain (its autocorrelation is compared with the normalized target).
pub(crate) fn predict<T: Real>(spec: &NetSpec, params: &Tensors<T>, input: &Autocorrelation) -> Result<(Image, Tape<T>)> {
    let x: Vec<T> = input.data().iter().map(|v| T::from_f64(*v)).collect();
    let tape = forward(spec, params, &x, input.side())?;
    let out = tape.output().iter().map(|v| v.as_f64()).collect();
    let grid = Grid::from_vec(input.side(), out)?;
    if grid.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("network produced non-finite output".into()));
    }
    Ok((Image::from_grid_clamped(grid)?, tape))
}

pub(crate) fn sample_loss<T: Real>(
    spec: &NetSpec,
    params: &Tensors<T>,
    ac: &Autocorrelation,
    mask: Option<&DiskMask>,
    target: LossTarget,
) -> Result<(LossReport, Tape<T>)> {
    let p = prepare(ac, mask, target);
    let (pred, tape) = predict(spec, params, &p.input)?;
    let mask = if p.region_only { mask } else { None };
    Ok((autocorr_l1_loss(&pred, &p.target, mask, p.region_only)?, tape))
}

/// Mean per-sample loss; samples are scored in parallel and summed in order.
pub fn validation_loss(
    spec: &NetSpec,
    params: &Tensors<f32>,
    samples: &[Autocorrelation],
    mask: Option<&DiskMask>,
    target: LossTarget,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Degenerate("validation set is empty".into()));
    }
    let losses = samples
        .par_iter()
        .map(|ac| sample_loss(spec, params, ac, mask, target).map(|(r, _)| r.loss))
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Validation loss under the mask radius and loss target the checkpoint was
/// recorded with.
pub fn checkpoint_validation_loss(ckpt: &Checkpoint, samples: &[Autocorrelation]) -> Result<f64> {
    let mask = ckpt.radius_px.map(|r| DiskMask::new(f64::from(r))).transpose()?;
    validation_loss(&ckpt.spec, &ckpt.params.values, samples, mask.as_ref(), ckpt.loss_target)
}

/// Masks `ac` (if asked), normalizes it, runs the network and rescales the
/// output back to the energy of the input.
pub fn infer(ckpt: &Checkpoint, ac: &Autocorrelation, mask: Option<&DiskMask>) -> Result<Image> {
    if ac.side() != ckpt.canvas {
        return Err(Error::Dimension(format!(
            "checkpoint expects {0}x{0} autocorrelations, got {1}x{1}",
            ckpt.canvas,
            ac.side()
        )));
    }
    let p = prepare(ac, mask, ckpt.loss_target);
    let (pred, _) = predict(&ckpt.spec, &ckpt.params.values, &p.input)?;
    if p.scale > 0.0 {
        pred.scaled(p.scale.sqrt())
    } else {
        Ok(pred)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::autocorrelate;
    use crate::nn::params::NetParams;

    fn ckpt() -> Checkpoint {
        let spec = NetSpec::encoder_decoder(2);
        Checkpoint {
            canvas: 16,
            params: NetParams::init(&spec, 1),
            spec,
            epoch: 0,
            radius_px: None,
            seed: 0,
            val_loss: 0.0,
            loss_target: LossTarget::Masked,
        }
    }

    #[test]
    fn all_zero_input_is_safe() {
        let ac = Autocorrelation::from_grid(Grid::zeros(16)).unwrap();
        let out = infer(&ckpt(), &ac, Some(&DiskMask::new(3.0).unwrap())).unwrap();
        assert!(out.data().iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn grid_mismatch() {
        let ac = Autocorrelation::from_grid(Grid::zeros(8)).unwrap();
        assert!(matches!(infer(&ckpt(), &ac, None), Err(Error::Dimension(_))));
    }

    #[test]
    fn output_scales_with_input_energy() {
        let img = Image::from_grid(Grid::from_fn(16, |r, c| if (6..9).contains(&r) && (5..10).contains(&c) { 1.0 } else { 0.0 })).unwrap();
        let ac = autocorrelate(&img);
        let twice = autocorrelate(&img.scaled(2.0).unwrap());
        let a = infer(&ckpt(), &ac, None).unwrap();
        let b = infer(&ckpt(), &twice, None).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((2.0 * x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn full_target_keeps_unmasked_lags() {
        let img = Image::from_grid(Grid::from_fn(16, |r, c| if r == 5 && (c == 4 || c == 11) { 1.0 } else { 0.0 })).unwrap();
        let ac = autocorrelate(&img);
        let mask = DiskMask::new(2.0).unwrap();
        let masked = prepare(&ac, Some(&mask), LossTarget::Masked);
        let full = prepare(&ac, Some(&mask), LossTarget::Full);
        assert!(masked.region_only && !full.region_only);
        assert_eq!(masked.input, full.input);
        assert_eq!(full.target.lag(0, 7), 0.5);
        assert_eq!(masked.target.lag(0, 7), 0.0);
    }
}
