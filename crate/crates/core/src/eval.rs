//! HIO versus network comparison over a dataset and a list of mask radii.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::correlation::{apply_disk_mask, modulus_from_autocorrelation, DiskMask};
use crate::dataset::DatasetSample;
use crate::error::{Error, Result};
use crate::grid::Image;
use crate::metrics::{autocorrelation_l1_error, registration_invariant_error};
use crate::nn::{infer, Checkpoint};
use crate::retrieval::{run_hio, HioConfig, RetrievalResult};
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Hio,
    Neural,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hio => "hio",
            Self::Neural => "neural",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hio" => Ok(Self::Hio),
            "neural" => Ok(Self::Neural),
            _ => Err(Error::Config(format!("unknown method {s:?} (expected hio or neural)"))),
        }
    }
}

/// Mask radius label: `full` or an integer number of pixels.
pub fn radius_label(radius_px: Option<u32>) -> String {
    radius_px.map_or_else(|| "full".into(), |r| r.to_string())
}

pub fn parse_radius(s: &str) -> Result<Option<u32>> {
    match s.trim() {
        "full" | "none" => Ok(None),
        t => t
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad radius {s:?} (expected an integer or full)"))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub sample_id: usize,
    pub method: Method,
    pub radius_px: Option<u32>,
    pub registration_error: f64,
    pub ac_l1_error: f64,
    pub flip_chosen: bool,
    pub shift_dx: isize,
    pub shift_dy: isize,
    /// Reconstruction time, 0 unless timing was requested.
    pub wall_ms: f64,
}

#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub record: EvalRecord,
    pub reconstruction: Image,
    /// Every HIO trial, kept when [`EvalConfig::keep_trials`] is set.
    pub hio: Option<RetrievalResult>,
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub methods: Vec<Method>,
    pub radii: Vec<Option<u32>>,
    /// Template; the seed is replaced by a per-sample child of `seed`.
    pub hio: HioConfig,
    pub seed: u64,
    /// Record wall-clock times (makes the CSV non-reproducible).
    pub timed: bool,
    pub keep_trials: bool,
}

/// Checkpoints keyed by mask radius, `None` for the unmasked one.
pub type CheckpointSet = BTreeMap<Option<u32>, Checkpoint>;

fn reconstruct(
    method: Method,
    sample: &DatasetSample,
    sample_id: usize,
    mask: Option<&DiskMask>,
    ckpt: Option<&Checkpoint>,
    cfg: &EvalConfig,
) -> Result<(Image, Option<RetrievalResult>)> {
    match method {
        Method::Hio => {
            let ac = match mask {
                Some(m) => apply_disk_mask(&sample.ac, m),
                None => sample.ac.clone(),
            };
            let hio = HioConfig {
                seed: derive_seed(cfg.seed, sample_id as u64),
                ..cfg.hio.clone()
            };
            let result = run_hio(&modulus_from_autocorrelation(&ac), &hio)?;
            let image = result.best_image.clone();
            Ok((image, cfg.keep_trials.then_some(result)))
        }
        Method::Neural => Ok((infer(ckpt.expect("checked by the caller"), &sample.ac, mask)?, None)),
    }
}

/// Runs every method at every radius on every sample.
///
/// HIO restarts are seeded per sample, so all radii of one sample share
/// their starting guesses. Neural reconstructions use the checkpoint stored
/// under the same radius. Records come back sample-major, then radius, then
/// method, regardless of scheduling.
pub fn evaluate_suite(
    samples: &[DatasetSample],
    cfg: &EvalConfig,
    checkpoints: &CheckpointSet,
) -> Result<Vec<EvalOutcome>> {
    if cfg.methods.is_empty() || cfg.radii.is_empty() {
        return Err(Error::Config("evaluation needs at least one method and one radius".into()));
    }
    if cfg.methods.contains(&Method::Neural) {
        for r in &cfg.radii {
            let ck = checkpoints.get(r).ok_or_else(|| {
                Error::Config(format!("no checkpoint for radius {}", radius_label(*r)))
            })?;
            if let Some(s) = samples.first() {
                if ck.canvas != s.image.side() {
                    return Err(Error::Config(format!(
                        "checkpoint {} expects {} px, dataset has {} px",
                        ck.label(),
                        ck.canvas,
                        s.image.side()
                    )));
                }
            }
        }
    }
    if let Some(s) = samples.first() {
        cfg.hio.validate(2 * s.image.side())?;
    }
    let cells: Vec<(usize, Option<u32>, Method)> = (0..samples.len())
        .flat_map(|i| {
            cfg.radii
                .iter()
                .flat_map(move |r| cfg.methods.iter().map(move |m| (i, *r, *m)))
        })
        .collect();
    cells
        .par_iter()
        .map(|&(i, radius_px, method)| {
            let sample = &samples[i];
            let mask = radius_px.map(|r| DiskMask::new(f64::from(r))).transpose()?;
            let start = Instant::now();
            let (recon, hio) = reconstruct(method, sample, i, mask.as_ref(), checkpoints.get(&radius_px), cfg)?;
            let wall_ms = if cfg.timed {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            let reg = registration_invariant_error(&recon, &sample.image)?;
            let ac_l1_error = autocorrelation_l1_error(&recon, &sample.ac, mask.as_ref())?;
            Ok(EvalOutcome {
                record: EvalRecord {
                    sample_id: i,
                    method,
                    radius_px,
                    registration_error: reg.error,
                    ac_l1_error,
                    flip_chosen: reg.flipped,
                    shift_dx: reg.shift.0,
                    shift_dy: reg.shift.1,
                    wall_ms,
                },
                reconstruction: recon,
                hio,
            })
        })
        .collect()
}

pub fn write_eval_csv<W: Write>(mut out: W, records: &[EvalRecord]) -> Result<()> {
    writeln!(
        out,
        "sample_id,method,radius_px,registration_error,ac_l1_error,flip_chosen,shift_dx,shift_dy,wall_ms"
    )?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{:.12e},{:.12e},{},{},{},{:.3}",
            r.sample_id,
            r.method,
            radius_label(r.radius_px),
            r.registration_error,
            r.ac_l1_error,
            u8::from(r.flip_chosen),
            r.shift_dx,
            r.shift_dy,
            r.wall_ms
        )?;
    }
    Ok(())
}

/// Mean registration error of `method` at `radius_px`.
pub fn mean_error(records: &[EvalRecord], method: Method, radius_px: Option<u32>) -> Option<f64> {
    let errs: Vec<f64> = records
        .iter()
        .filter(|r| r.method == method && r.radius_px == radius_px)
        .map(|r| r.registration_error)
        .collect();
    (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::autocorrelate;
    use crate::dataset::{SampleMeta, SampleMode};
    use crate::grid::Grid;

    fn samples() -> Vec<DatasetSample> {
        (0..2)
            .map(|k| {
                let image = Image::from_grid(Grid::from_fn(16, |r, c| {
                    if (6..9).contains(&r) && (6 + k..9 + k).contains(&c) && (r + c) % 3 != 0 {
                        1.0
                    } else {
                        0.0
                    }
                }))
                .unwrap();
                DatasetSample {
                    ac: autocorrelate(&image),
                    image,
                    meta: SampleMeta {
                        mode: SampleMode::Single,
                        digits: vec![],
                        sample_seed: k as u64,
                    },
                }
            })
            .collect()
    }

    fn config() -> EvalConfig {
        let mut hio = HioConfig::for_canvas(16);
        hio.iterations = 50;
        hio.trials = 3;
        EvalConfig {
            methods: vec![Method::Hio],
            radii: vec![None, Some(3)],
            hio,
            seed: 4,
            timed: false,
            keep_trials: false,
        }
    }

    #[test]
    fn hio_only_needs_no_checkpoint() {
        let out = evaluate_suite(&samples(), &config(), &CheckpointSet::new()).unwrap();
        let ids: Vec<_> = out.iter().map(|o| (o.record.sample_id, o.record.radius_px)).collect();
        assert_eq!(ids, vec![(0, None), (0, Some(3)), (1, None), (1, Some(3))]);
        let again = evaluate_suite(&samples(), &config(), &CheckpointSet::new()).unwrap();
        let recs = |v: &[EvalOutcome]| v.iter().map(|o| o.record.clone()).collect::<Vec<_>>();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_eval_csv(&mut a, &recs(&out)).unwrap();
        write_eval_csv(&mut b, &recs(&again)).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().lines().nth(1).unwrap().starts_with("0,hio,full,"));
    }

    #[test]
    fn missing_checkpoint_is_a_config_error() {
        let mut cfg = config();
        cfg.methods.push(Method::Neural);
        assert!(matches!(
            evaluate_suite(&samples(), &cfg, &CheckpointSet::new()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn labels() {
        assert_eq!(parse_radius("full").unwrap(), None);
        assert_eq!(parse_radius("23").unwrap(), Some(23));
        assert!(parse_radius("x").is_err());
        assert_eq!(radius_label(Some(7)), "7");
        assert_eq!("neural".parse::<Method>().unwrap(), Method::Neural);
        assert!("gs".parse::<Method>().is_err());
    }
}
