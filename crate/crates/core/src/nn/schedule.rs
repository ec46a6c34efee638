//! Three-stage mask-shrinking curriculum.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FullStage {
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Stage-local epoch from which `lr_final` applies.
    pub lr_drop_epoch: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShrinkStage {
    pub epochs: usize,
    pub r_start_px: u32,
    pub r_end_px: u32,
    pub epochs_per_decrement: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HoldStage {
    pub epochs: usize,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurriculumSchedule {
    pub full: FullStage,
    pub shrink: ShrinkStage,
    pub hold: HoldStage,
    pub batch_size: usize,
    pub momentum: f64,
    /// Radii whose last epoch produces a checkpoint; the end-of-training
    /// radius is normally included.
    pub checkpoint_radii: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Full = 1,
    Shrink = 2,
    Hold = 3,
}

impl CurriculumSchedule {
    /// 700 + 3200 + 1500 epochs, radius 56 -> 26 px one pixel per 100
    /// epochs, batch 128.
    pub fn large() -> Self {
        Self {
            full: FullStage {
                epochs: 700,
                lr_initial: 1e-4,
                lr_final: 1e-5,
                lr_drop_epoch: 600,
            },
            shrink: ShrinkStage {
                epochs: 3200,
                r_start_px: 56,
                r_end_px: 26,
                epochs_per_decrement: 100,
                lr_initial: 1e-6,
                lr_final: 1e-8,
            },
            hold: HoldStage {
                epochs: 1500,
                lr: 1e-8,
            },
            batch_size: 128,
            momentum: 0.9,
            checkpoint_radii: vec![56, 46, 36, 26],
        }
    }

    /// 64 px profile: radii halved (28 -> 13 px), 20 epochs per pixel,
    /// stages of 200/300/100 epochs, batch 32.
    ///
    /// Learning rates start at 3e-4; from 1e-3 upwards the l1 pull towards
    /// sparse outputs switches the output ReLU off for every pixel within a
    /// few epochs and training stalls at the all-zero image.
    pub fn desk() -> Self {
        Self {
            full: FullStage {
                epochs: 200,
                lr_initial: 3e-4,
                lr_final: 1e-4,
                lr_drop_epoch: 180,
            },
            shrink: ShrinkStage {
                epochs: 300,
                r_start_px: 28,
                r_end_px: 13,
                epochs_per_decrement: 20,
                lr_initial: 1e-4,
                lr_final: 1e-5,
            },
            hold: HoldStage {
                epochs: 100,
                lr: 1e-5,
            },
            batch_size: 32,
            momentum: 0.9,
            checkpoint_radii: vec![28, 23, 18, 13],
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.full.epochs + self.shrink.epochs + self.hold.epochs
    }

    pub fn validate(&self) -> Result<()> {
        let s2 = &self.shrink;
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if s2.epochs_per_decrement == 0 {
            return Err(Error::Config("epochs_per_decrement must be at least 1".into()));
        }
        if s2.r_end_px > s2.r_start_px {
            return Err(Error::Config("the mask radius must shrink".into()));
        }
        if self.full.lr_drop_epoch > self.full.epochs {
            return Err(Error::Config("stage-1 learning-rate drop lies past the stage end".into()));
        }
        let lrs = [
            self.full.lr_initial,
            self.full.lr_final,
            s2.lr_initial,
            s2.lr_final,
            self.hold.lr,
        ];
        if lrs.iter().any(|lr| !(*lr > 0.0 && lr.is_finite())) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if lrs.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("learning rates must not increase along the schedule".into()));
        }
        Ok(())
    }

    fn check_epoch(&self, epoch: usize) -> Result<()> {
        if epoch >= self.total_epochs() {
            return Err(Error::Config(format!(
                "epoch {epoch} is outside the {}-epoch schedule",
                self.total_epochs()
            )));
        }
        Ok(())
    }

    pub fn stage_at(&self, epoch: usize) -> Result<Stage> {
        self.check_epoch(epoch)?;
        Ok(if epoch < self.full.epochs {
            Stage::Full
        } else if epoch < self.full.epochs + self.shrink.epochs {
            Stage::Shrink
        } else {
            Stage::Hold
        })
    }

    /// Number of one-pixel decrements applied at a stage-2 epoch.
    fn decrements(&self, epoch: usize) -> u32 {
        let s2 = &self.shrink;
        let local = epoch - self.full.epochs;
        let max = s2.r_start_px - s2.r_end_px;
        ((local / s2.epochs_per_decrement) as u64).min(u64::from(max)) as u32
    }

    /// `None` (no mask) in stage 1, the shrinking radius in stage 2 and the
    /// final radius in stage 3.
    pub fn mask_radius_at_epoch(&self, epoch: usize) -> Result<Option<u32>> {
        Ok(match self.stage_at(epoch)? {
            Stage::Full => None,
            Stage::Shrink => Some(self.shrink.r_start_px - self.decrements(epoch)),
            Stage::Hold => Some(self.shrink.r_end_px),
        })
    }

    /// Step schedule in stage 1, geometric interpolation stepped at every
    /// radius decrement in stage 2, constant in stage 3.
    pub fn learning_rate_at_epoch(&self, epoch: usize) -> Result<f64> {
        Ok(match self.stage_at(epoch)? {
            Stage::Full => {
                if epoch < self.full.lr_drop_epoch {
                    self.full.lr_initial
                } else {
                    self.full.lr_final
                }
            }
            Stage::Shrink => {
                let s2 = &self.shrink;
                let total = s2.r_start_px - s2.r_end_px;
                if total == 0 {
                    s2.lr_initial
                } else {
                    let t = f64::from(self.decrements(epoch)) / f64::from(total);
                    s2.lr_initial * (s2.lr_final / s2.lr_initial).powf(t)
                }
            }
            Stage::Hold => self.hold.lr,
        })
    }
}
