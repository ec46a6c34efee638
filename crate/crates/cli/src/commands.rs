//! The six subcommands. Each one resolves every setting and reads every
//! input before it creates the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use phaseret::correlation::{apply_disk_mask, autocorrelate, DiskMask};
use phaseret::dataset::{
    available_letters, build_dataset, export_out_of_distribution, letter_glyph, load_dataset,
    load_dataset_head, load_mnist_idx, DatasetSample, SourceSplit, SynthConfig,
};
use phaseret::eval::{
    evaluate_suite, parse_radius, radius_label, write_eval_csv, CheckpointSet, EvalConfig,
    EvalOutcome, Method,
};
use phaseret::grid::{Autocorrelation, Grid, Image};
use phaseret::io::{load_pgm, load_prgf, save_pgm, save_prgf, write_pgm_mosaic};
use phaseret::nn::{
    train_curriculum, write_history_csv, Checkpoint, CurriculumSchedule, EpochRecord, LossTarget,
    NetSpec, TrainConfig,
};
use phaseret::retrieval::HioConfig;

use crate::config::Settings;
use crate::failure::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Desk,
    Large,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "desk" => Ok(Self::Desk),
            "large" => Ok(Self::Large),
            _ => Err("expected desk or large".into()),
        }
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Desk => "desk",
            Self::Large => "large",
        })
    }
}

impl Profile {
    fn synth(self) -> SynthConfig {
        match self {
            Self::Desk => SynthConfig::desk(),
            Self::Large => SynthConfig::large(),
        }
    }

    fn schedule(self) -> CurriculumSchedule {
        match self {
            Self::Desk => CurriculumSchedule::desk(),
            Self::Large => CurriculumSchedule::large(),
        }
    }

    fn radii(self) -> &'static str {
        match self {
            Self::Desk => "full,28,23,18,13",
            Self::Large => "full,56,46,36,26",
        }
    }
}

/// Settings shared by every subcommand.
pub struct Context {
    pub seed: u64,
    pub out: PathBuf,
    pub profile: Profile,
}

impl Context {
    pub fn resolve(s: &Settings) -> Result<Self, Failure> {
        Ok(Self {
            seed: s.get("seed", 0u64)?,
            out: PathBuf::from(s.require::<String>("out")?),
            profile: s.get("profile", Profile::Desk)?,
        })
    }

    fn create_out(&self) -> Result<(), Failure> {
        fs::create_dir_all(&self.out)
            .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", self.out.display())))
    }
}

/// Inputs read and outputs written, for the manifest.
#[derive(Default)]
pub struct Report {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

fn existing(s: &Settings, key: &str) -> Result<PathBuf, Failure> {
    let p = PathBuf::from(s.require::<String>(key)?);
    if !p.exists() {
        return Err(Failure::Config(format!("{key}: {} does not exist", p.display())));
    }
    Ok(p)
}

fn radius_list(s: &Settings, default: &str) -> Result<Vec<Option<u32>>, Failure> {
    s.list("radii", default, |t| parse_radius(t).map_err(|e| e.to_string()))
}

fn hio_config(s: &Settings, canvas: usize) -> Result<HioConfig, Failure> {
    let base = HioConfig::for_canvas(canvas);
    let cfg = HioConfig {
        iterations: s.get("iterations", base.iterations)?,
        trials: s.get("trials", base.trials)?,
        beta: s.get("beta", base.beta)?,
        support_box: s.get("support-box", base.support_box)?,
        polish_iterations: s.get("polish", base.polish_iterations)?,
        ..base
    };
    cfg.validate(2 * canvas)?;
    Ok(cfg)
}

fn samples_head(path: &Path, n: usize) -> Result<Vec<DatasetSample>, Failure> {
    let ds = load_dataset_head(path, n)?;
    if ds.samples.is_empty() {
        return Err(Failure::Config(format!("{} holds no samples", path.display())));
    }
    Ok(ds.samples)
}

fn write_csv<F>(path: &Path, f: F) -> Result<(), Failure>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> phaseret::Result<()>,
{
    let mut out = BufWriter::new(fs::File::create(path)?);
    f(&mut out)?;
    std::io::Write::flush(&mut out)?;
    Ok(())
}

fn mosaic(path: &Path, rows: &[Vec<Grid>]) -> Result<(), Failure> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    write_pgm_mosaic(&mut out, rows)?;
    std::io::Write::flush(&mut out)?;
    Ok(())
}

pub fn synth(s: &Settings, ctx: &Context) -> Result<Report, Failure> {
    let base = ctx.profile.synth();
    let cfg = SynthConfig {
        canvas_px: s.get("canvas", base.canvas_px)?,
        n_train: s.get("n-train", base.n_train)?,
        n_val: s.get("n-val", base.n_val)?,
        pair_fraction: s.get("pair-fraction", base.pair_fraction)?,
        master_seed: ctx.seed,
        margin_px: s.get("margin", base.margin_px)?,
        glyph_scale: s.get("glyph-scale", base.glyph_scale)?,
    };
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let letters: Vec<char> = s.get("ood-letters", String::new())?.chars().collect();
    if let Some(c) = letters.iter().find(|c| letter_glyph(**c).is_none()) {
        let known: String = available_letters().collect();
        return Err(Failure::Config(format!("ood-letters: no glyph for {c:?} (available: {known})")));
    }
    let preview = s.get("preview", 8usize)?;
    let dir = existing(s, "mnist-dir")?;
    let files = [
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    ]
    .map(|f| dir.join(f));
    if let Some(missing) = files.iter().find(|p| !p.exists()) {
        return Err(Failure::Config(format!("mnist-dir: {} is missing", missing.display())));
    }
    let train_glyphs = load_mnist_idx(&files[0], &files[1], SourceSplit::Train)?;
    let test_glyphs = load_mnist_idx(&files[2], &files[3], SourceSplit::Test)?;

    ctx.create_out()?;
    let mut report = Report {
        inputs: files.to_vec(),
        ..Report::default()
    };
    let (train_path, val_path) = (ctx.out.join("train.prds"), ctx.out.join("val.prds"));
    build_dataset(&cfg, &train_glyphs, &test_glyphs, &train_path, &val_path)?;
    report.outputs.extend([train_path, val_path.clone()]);
    if !letters.is_empty() {
        let glyphs: Vec<_> = letters.iter().filter_map(|c| letter_glyph(*c)).collect();
        let path = ctx.out.join("ood.prds");
        export_out_of_distribution(&glyphs, &cfg, ctx.seed, &path)?;
        report.outputs.push(path);
    }
    if preview > 0 && cfg.n_val > 0 {
        let head = load_dataset_head(&val_path, preview)?.samples;
        let rows = vec![
            head.iter().map(|x| x.image.grid().clone()).collect(),
            head.iter().map(|x| x.ac.grid().clone()).collect(),
        ];
        let path = ctx.out.join("preview.pgm");
        mosaic(&path, &rows)?;
        report.outputs.push(path);
    }
    Ok(report)
}

/// Image from `--image` (PGM or PRGF) or from `--dataset`/`--sample`.
fn source_image(s: &Settings) -> Result<(Image, PathBuf), Failure> {
    if s.raw("image").is_some() {
        let path = existing(s, "image")?;
        let grid = if path.extension().is_some_and(|e| e == "pgm") {
            let r = load_pgm(&path)?;
            if r.rows != r.cols {
                return Err(Failure::Config(format!("{} is not square", path.display())));
            }
            Grid::from_vec(r.rows, r.data)?
        } else {
            load_prgf(&path)?
        };
        let image = Image::from_grid(grid).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        return Ok((image, path));
    }
    let (sample, path) = dataset_sample(s)?;
    Ok((sample.image, path))
}

fn dataset_sample(s: &Settings) -> Result<(DatasetSample, PathBuf), Failure> {
    if s.raw("dataset").is_none() {
        return Err(Failure::Config("give an input file or --dataset with --sample".into()));
    }
    let path = existing(s, "dataset")?;
    let index = s.get("sample", 0usize)?;
    let mut samples = load_dataset_head(&path, index + 1)?.samples;
    if samples.len() <= index {
        return Err(Failure::Config(format!(
            "sample {index} is out of range for {}",
            path.display()
        )));
    }
    Ok((samples.swap_remove(index), path))
}

pub fn autocorr(s: &Settings, ctx: &Context) -> Result<Report, Failure> {
    let (image, input) = source_image(s)?;
    ctx.create_out()?;
    let ac = autocorrelate(&image);
    if ac.truncated() {
        eprintln!("warning: the image support exceeds half the canvas; long lags were dropped");
    }
    let (prgf, pgm) = (ctx.out.join("autocorr.prgf"), ctx.out.join("autocorr.pgm"));
    save_prgf(&prgf, ac.grid())?;
    save_pgm(&pgm, ac.grid())?;
    Ok(Report {
        inputs: vec![input],
        outputs: vec![prgf, pgm],
    })
}

pub fn mask(s: &Settings, ctx: &Context) -> Result<Report, Failure> {
    let radius: f64 = s.require("radius")?;
    let mask = DiskMask::new(radius).map_err(|e| Failure::Config(e.to_string()))?;
    let (ac, input) = if s.raw("input").is_some() {
        let path = existing(s, "input")?;
        let ac = Autocorrelation::from_grid(load_prgf(&path)?)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        (ac, path)
    } else {
        let (sample, path) = dataset_sample(s)?;
        (sample.ac, path)
    };
    ctx.create_out()?;
    let masked = apply_disk_mask(&ac, &mask);
    let (prgf, pgm) = (ctx.out.join("masked.prgf"), ctx.out.join("masked.pgm"));
    save_prgf(&prgf, masked.grid())?;
    save_pgm(&pgm, masked.grid())?;
    eprintln!("kept {} of {} lags", mask.kept_count(ac.side()), ac.side() * ac.side());
    Ok(Report {
        inputs: vec![input],
        outputs: vec![prgf, pgm],
    })
}

fn outcome_of<'a>(out: &'a [EvalOutcome], i: usize, r: Option<u32>, m: Method) -> Option<&'a EvalOutcome> {
    out.iter()
        .find(|o| o.record.sample_id == i && o.record.radius_px == r && o.record.method == m)
}

fn masked_ac(sample: &DatasetSample, r: Option<u32>) -> Result<Grid, Failure> {
    Ok(match r {
        None => sample.ac.grid().clone(),
        Some(r) => apply_disk_mask(&sample.ac, &DiskMask::new(f64::from(r))?).into_grid(),
    })
}

pub fn hio(s: &Settings, ctx: &Context) -> Result<Report, Failure> {
    let path = existing(s, "dataset")?;
    let n = s.get("samples", 10usize)?;
    let radii = radius_list(s, ctx.profile.radii())?;
    let traces = s.get("traces", false)?;
    let samples = samples_head(&path, n)?;
    let cfg = EvalConfig {
        methods: vec![Method::Hio],
        radii: radii.clone(),
        hio: hio_config(s, samples[0].image.side())?,
        seed: ctx.seed,
        timed: false,
        keep_trials: traces,
    };
    ctx.create_out()?;
    let out = evaluate_suite(&samples, &cfg, &CheckpointSet::new())?;
    let mut report = Report {
        inputs: vec![path],
        ..Report::default()
    };
    let csv = ctx.out.join("hio.csv");
    let records: Vec<_> = out.iter().map(|o| o.record.clone()).collect();
    write_csv(&csv, |w| write_eval_csv(w, &records))?;
    report.outputs.push(csv);
    for (i, sample) in samples.iter().enumerate() {
        let mut top = vec![sample.image.grid().clone()];
        let mut bottom = vec![sample.ac.grid().clone()];
        for &r in &radii {
            let o = outcome_of(&out, i, r, Method::Hio).expect("one outcome per cell");
            top.push(o.reconstruction.grid().clone());
            bottom.push(masked_ac(sample, r)?);
            if let Some(result) = &o.hio {
                let p = ctx.out.join(format!("trace_{i:04}_{}.csv", radius_label(r)));
                write_csv(&p, |w| result.write_trace_csv(w))?;
                report.outputs.push(p);
            }
        }
        let p = ctx.out.join(format!("hio_{i:04}.pgm"));
        mosaic(&p, &[top, bottom])?;
        report.outputs.push(p);
    }
    Ok(report)
}

fn schedule(s: &Settings, profile: Profile) -> Result<CurriculumSchedule, Failure> {
    let b = profile.schedule();
    let mut sched = CurriculumSchedule {
        batch_size: s.get("batch-size", b.batch_size)?,
        momentum: s.get("momentum", b.momentum)?,
        ..b.clone()
    };
    sched.full.epochs = s.get("stage1-epochs", b.full.epochs)?;
    sched.full.lr_initial = s.get("stage1-lr", b.full.lr_initial)?;
    sched.full.lr_final = s.get("stage1-lr-final", b.full.lr_final)?;
    sched.full.lr_drop_epoch = s.get("stage1-lr-drop", b.full.lr_drop_epoch)?;
    sched.shrink.epochs = s.get("stage2-epochs", b.shrink.epochs)?;
    sched.shrink.r_start_px = s.get("r-start", b.shrink.r_start_px)?;
    sched.shrink.r_end_px = s.get("r-end", b.shrink.r_end_px)?;
    sched.shrink.epochs_per_decrement = s.get("epochs-per-decrement", b.shrink.epochs_per_decrement)?;
    sched.shrink.lr_initial = s.get("stage2-lr", b.shrink.lr_initial)?;
    sched.shrink.lr_final = s.get("stage2-lr-final", b.shrink.lr_final)?;
    sched.hold.epochs = s.get("stage3-epochs", b.hold.epochs)?;
    sched.hold.lr = s.get("stage3-lr", b.hold.lr)?;
    let default_radii = b.checkpoint_radii.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
    sched.checkpoint_radii = s.list("checkpoint-radii", &default_radii, |t| {
        t.parse::<u32>().map_err(|e| format!("{t:?}: {e}"))
    })?;
    sched.validate()?;
    Ok(sched)
}

fn checkpoint_file(dir: &Path, radius_px: Option<u32>) -> PathBuf {
    dir.join(match radius_px {
        None => "ckpt_full.prck".to_string(),
        Some(r) => format!("ckpt_r{r}.prck"),
    })
}

pub fn train(s: &Settings, ctx: &Context) -> Result<Report, Failure> {
    let train_path = existing(s, "train")?;
    let val_path = existing(s, "val")?;
    let train_limit = s.get_opt::<usize>("train-limit")?;
    let val_limit = s.get_opt::<usize>("val-limit")?;
    let width = s.get("width", 16usize)?;
    let loss_target = match s.get("loss-target", String::from("masked"))?.as_str() {
        "masked" => LossTarget::Masked,
        "full" => LossTarget::Full,
        other => return Err(Failure::Config(format!("loss-target: expected masked or full, got {other:?}"))),
    };
    let sched = schedule(s, ctx.profile)?;
    let load = |p: &Path, limit: Option<usize>| -> Result<Vec<Autocorrelation>, Failure> {
        let samples = match limit {
            Some(l) => samples_head(p, l)?,
            None => load_dataset(p)?.samples,
        };
        Ok(samples.into_iter().map(|x| x.ac).collect())
    };
    let train = load(&train_path, train_limit)?;
    let val = load(&val_path, val_limit)?;
    if train.is_empty() || val.is_empty() {
        return Err(Failure::Config("training and validation sets must be nonempty".into()));
    }
    let spec = NetSpec::encoder_decoder(width);
    spec.validate(train[0].side()).map_err(|e| Failure::Config(e.to_string()))?;
    let cfg = TrainConfig {
        spec,
        schedule: sched,
        seed: ctx.seed,
        loss_target,
    };

    ctx.create_out()?;
    let mut report = Report {
        inputs: vec![train_path, val_path],
        ..Report::default()
    };
    let mut history: Vec<EpochRecord> = Vec::new();
    let result = train_curriculum(&cfg, &train, &val, |r| {
        eprintln!(
            "epoch {:>5} stage {} radius {:>4} lr {:.2e} train {:.6e} val {:.6e}",
            r.epoch,
            r.stage as u8,
            radius_label(r.radius_px),
            r.lr,
            r.train_loss,
            r.val_loss
        );
        history.push(r.clone());
    });
    let loss_csv = ctx.out.join("loss.csv");
    write_csv(&loss_csv, |w| write_history_csv(w, &history))?;
    report.outputs.push(loss_csv);
    match result {
        Ok(outcome) => {
            for ck in &outcome.checkpoints {
                let p = checkpoint_file(&ctx.out, ck.radius_px);
                ck.save(&p, true)?;
                report.outputs.push(p);
            }
            Ok(report)
        }
        Err(phaseret::Error::Divergence {
            epoch,
            reason,
            last_good,
        }) => {
            let mut msg = format!("training diverged at epoch {epoch}: {reason}");
            if let Some(ck) = last_good {
                let p = ctx.out.join("ckpt_last_good.prck");
                ck.save(&p, true)?;
                msg.push_str(&format!("; last good parameters saved to {}", p.display()));
            }
            Err(Failure::Runtime(msg))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn eval(s: &Settings, ctx: &Context) -> Result<Report, Failure> {
    let path = existing(s, "dataset")?;
    let n = s.get("samples", 20usize)?;
    let methods = s.list("methods", "hio,neural", |t| t.parse::<Method>().map_err(|e| e.to_string()))?;
    let radii = radius_list(s, ctx.profile.radii())?;
    let timed = s.get("timed", false)?;
    let mut inputs = vec![path.clone()];
    let mut samples = samples_head(&path, n)?;
    if s.raw("ood").is_some() {
        let ood = existing(s, "ood")?;
        samples.extend(load_dataset(&ood)?.samples);
        inputs.push(ood);
    }
    let canvas = samples[0].image.side();
    if samples.iter().any(|x| x.image.side() != canvas) {
        return Err(Failure::Config("all evaluated samples must share one canvas size".into()));
    }
    let mut checkpoints: CheckpointSet = BTreeMap::new();
    if methods.contains(&Method::Neural) {
        let dir = existing(s, "checkpoints")?;
        for &r in &radii {
            let p = checkpoint_file(&dir, r);
            if !p.exists() {
                return Err(Failure::Config(format!(
                    "no checkpoint for radius {}: {} is missing",
                    radius_label(r),
                    p.display()
                )));
            }
            checkpoints.insert(r, Checkpoint::load(&p)?);
            inputs.push(p);
        }
    }
    let cfg = EvalConfig {
        methods: methods.clone(),
        radii: radii.clone(),
        hio: hio_config(s, canvas)?,
        seed: ctx.seed,
        timed,
        keep_trials: false,
    };
    if let Some(ck) = checkpoints.values().find(|ck| ck.canvas != canvas) {
        return Err(Failure::Config(format!(
            "checkpoint {} expects {} px, the dataset has {canvas} px",
            ck.label(),
            ck.canvas
        )));
    }

    ctx.create_out()?;
    let out = evaluate_suite(&samples, &cfg, &checkpoints)?;
    let mut report = Report {
        inputs,
        ..Report::default()
    };
    let csv = ctx.out.join("eval.csv");
    let records: Vec<_> = out.iter().map(|o| o.record.clone()).collect();
    write_csv(&csv, |w| write_eval_csv(w, &records))?;
    report.outputs.push(csv);
    for &r in &radii {
        let mut rows = Vec::new();
        for (i, sample) in samples.iter().enumerate() {
            let mut row = vec![sample.image.grid().clone(), masked_ac(sample, r)?];
            for &m in &methods {
                let o = outcome_of(&out, i, r, m).expect("one outcome per cell");
                row.push(o.reconstruction.grid().clone());
            }
            rows.push(row);
        }
        let p = ctx.out.join(format!("strip_{}.pgm", radius_label(r)));
        mosaic(&p, &rows)?;
        report.outputs.push(p);
    }
    Ok(report)
}
