//! Curriculum training loop.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::checkpoint::{Checkpoint, LossTarget};
use super::infer::{sample_loss, validation_loss};
use super::net::backward;
use super::optim::sgd_momentum_update;
use super::params::{NetParams, Tensors};
use super::schedule::{CurriculumSchedule, Stage};
use super::spec::NetSpec;
use crate::correlation::DiskMask;
use crate::error::{Error, Result};
use crate::grid::Autocorrelation;
use crate::seed::{derive_seed, derive_stream, rng};

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub spec: NetSpec,
    pub schedule: CurriculumSchedule,
    pub seed: u64,
    pub loss_target: LossTarget,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage: Stage,
    pub radius_px: Option<u32>,
    pub lr: f64,
    /// Mean loss over the epoch's mini-batches, each measured before its update.
    pub train_loss: f64,
    /// Mean validation loss after the epoch.
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// In the order written: `full` first, then radii as they complete.
    pub checkpoints: Vec<Checkpoint>,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn checkpoint(&self, radius_px: Option<u32>) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.radius_px == radius_px)
    }
}

/// `epoch,stage,radius_px,lr,train_loss,val_loss`; an empty radius means no mask.
pub fn write_history_csv<W: Write>(mut out: W, history: &[EpochRecord]) -> Result<()> {
    writeln!(out, "epoch,stage,radius_px,lr,train_loss,val_loss")?;
    for r in history {
        let radius = r.radius_px.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{:e},{:.12e},{:.12e}",
            r.epoch, r.stage as u8, radius, r.lr, r.train_loss, r.val_loss
        )?;
    }
    Ok(())
}

fn divergence(epoch: usize, reason: String, last_good: &Option<Checkpoint>) -> Error {
    Error::Divergence {
        epoch,
        reason,
        last_good: last_good.clone().map(Box::new),
    }
}

/// Trains a freshly initialized network through the three-stage curriculum.
///
/// Batch elements are evaluated in parallel and their gradients summed in
/// sample order, so the loss history does not depend on the thread count.
/// A checkpoint is written after the last unmasked epoch and after the last
/// epoch spent at each radius listed in `checkpoint_radii`.
pub fn train_curriculum(
    cfg: &TrainConfig,
    train: &[Autocorrelation],
    val: &[Autocorrelation],
    mut observer: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    let sched = &cfg.schedule;
    sched.validate()?;
    let canvas = match train.first() {
        Some(ac) => ac.side(),
        None => return Err(Error::Degenerate("training set is empty".into())),
    };
    if val.is_empty() {
        return Err(Error::Degenerate("validation set is empty".into()));
    }
    if let Some(ac) = train.iter().chain(val).find(|ac| ac.side() != canvas) {
        return Err(Error::Dimension(format!(
            "mixed canvas sizes {canvas} and {}",
            ac.side()
        )));
    }
    cfg.spec.validate(canvas)?;
    let total = sched.total_epochs();
    if total == 0 {
        return Err(Error::Config("the schedule has no epochs".into()));
    }

    let mut params = NetParams::<f32>::init(&cfg.spec, derive_stream(cfg.seed, "init"));
    let shuffle_stream = derive_stream(cfg.seed, "shuffle");
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(total);
    let mut checkpoints: Vec<Checkpoint> = Vec::new();
    let mut last_good: Option<Checkpoint> = None;

    let snapshot = |params: &NetParams<f32>, epoch: usize, radius_px: Option<u32>, val_loss: f64| Checkpoint {
        canvas,
        spec: cfg.spec.clone(),
        params: params.clone(),
        epoch: epoch as u32,
        radius_px,
        seed: cfg.seed,
        val_loss,
        loss_target: cfg.loss_target,
    };

    for epoch in 0..total {
        let stage = sched.stage_at(epoch)?;
        let radius_px = sched.mask_radius_at_epoch(epoch)?;
        let mask = radius_px.map(|r| DiskMask::new(f64::from(r))).transpose()?;
        let lr = sched.learning_rate_at_epoch(epoch)?;
        order.sort_unstable();
        order.shuffle(&mut rng(derive_seed(shuffle_stream, epoch as u64)));

        let mut loss_sum = 0.0;
        for batch in order.chunks(sched.batch_size) {
            let per_sample = batch
                .par_iter()
                .map(|&i| {
                    let (report, tape) = sample_loss(&cfg.spec, &params.values, &train[i], mask.as_ref(), cfg.loss_target)?;
                    let d_out: Vec<f32> = report.gradient.data().iter().map(|v| *v as f32).collect();
                    Ok((report.loss, backward(&cfg.spec, &params.values, &tape, &d_out)))
                })
                .collect::<Result<Vec<(f64, Tensors<f32>)>>>()
                .map_err(|e| divergence(epoch, e.to_string(), &last_good))?;
            let mut grads = Tensors::zeros(&cfg.spec);
            let mut batch_loss = 0.0;
            for (loss, g) in &per_sample {
                batch_loss += loss;
                grads.add_assign(g);
            }
            if !batch_loss.is_finite() {
                return Err(divergence(epoch, "non-finite training loss".into(), &last_good));
            }
            loss_sum += batch_loss;
            grads.scale(1.0 / batch.len() as f32);
            if let Err(e) = sgd_momentum_update(&mut params, &grads, lr as f32, sched.momentum as f32) {
                return Err(divergence(epoch, e.to_string(), &last_good));
            }
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_loss = match validation_loss(&cfg.spec, &params.values, val, mask.as_ref(), cfg.loss_target) {
            Ok(v) if v.is_finite() => v,
            Ok(_) => return Err(divergence(epoch, "non-finite validation loss".into(), &last_good)),
            Err(e) => return Err(divergence(epoch, e.to_string(), &last_good)),
        };
        if !params.values.all_finite() {
            return Err(divergence(epoch, "non-finite parameters".into(), &last_good));
        }

        let record = EpochRecord {
            epoch,
            stage,
            radius_px,
            lr,
            train_loss,
            val_loss,
        };
        observer(&record);
        history.push(record);

        let done = epoch + 1;
        let last_at_radius = done == total || sched.mask_radius_at_epoch(done)? != radius_px;
        let wanted = match radius_px {
            None => done == sched.full.epochs,
            Some(r) => sched.checkpoint_radii.contains(&r) && last_at_radius,
        };
        let ckpt = snapshot(&params, done, radius_px, val_loss);
        if wanted && checkpoints.iter().all(|c| c.radius_px != radius_px) {
            checkpoints.push(ckpt.clone());
        }
        last_good = Some(ckpt);
    }
    Ok(TrainOutcome {
        checkpoints,
        history,
    })
}
