//! End-to-end acceptance checks at desk scale (64 px canvas).
//!
//! Every check prints one `criterion N: PASS|FAIL ...` line straight to
//! stdout, so the lines show up even when the harness captures output.
//! Checks run one at a time on a single worker thread; the trained network
//! and the desk dataset are built once and shared.

mod common;

use std::collections::VecDeque;
use std::io::Write;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use common::{
    check_loss_gradient, check_network_gradient, direct_autocorrelation, direct_padded_modulus, glyph_pools,
    random_image,
};
use phaseret::correlation::{apply_disk_mask, autocorrelate, modulus_from_autocorrelation, DiskMask};
use phaseret::dataset::{
    build_dataset, generate_datasets, load_dataset, DatasetSample, SampleMode, SourceSplit, SynthConfig,
};
use phaseret::grid::{Autocorrelation, Grid, Image};
use phaseret::metrics::registration_invariant_error;
use phaseret::nn::{
    infer, train_curriculum, CurriculumSchedule, FullStage, HoldStage, LossTarget, NetSpec, ShrinkStage, Stage,
    TrainConfig, TrainOutcome,
};
use phaseret::retrieval::{run_hio, HioConfig};
use phaseret::seed::{derive_seed, rng};
use rand::Rng;

const SEED: u64 = 1;
const CANVAS: usize = 64;

/// Serializes the checks so wall-clock budgets are not shared with others.
static EXCLUSIVE: Mutex<()> = Mutex::new(());

fn single_threaded<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {n}: {verdict} {detail}").unwrap();
    out.flush().unwrap();
}

fn desk_data() -> &'static (Vec<DatasetSample>, Vec<DatasetSample>) {
    static DATA: OnceLock<(Vec<DatasetSample>, Vec<DatasetSample>)> = OnceLock::new();
    DATA.get_or_init(|| {
        let (train_pool, test_pool) = glyph_pools();
        let cfg = SynthConfig {
            master_seed: SEED,
            ..SynthConfig::desk()
        };
        single_threaded(|| generate_datasets(&cfg, &train_pool, &test_pool).unwrap())
    })
}

fn validation_of(mode: SampleMode, n: usize) -> Vec<&'static DatasetSample> {
    desk_data().1.iter().filter(|s| s.meta.mode == mode).take(n).collect()
}

fn hio_config(sample: usize) -> HioConfig {
    HioConfig {
        seed: derive_seed(SEED, sample as u64),
        ..HioConfig::for_canvas(CANVAS)
    }
}

fn hio_error(sample: &DatasetSample, index: usize, radius: Option<f64>) -> f64 {
    let ac = match radius {
        Some(r) => apply_disk_mask(&sample.ac, &DiskMask::new(r).unwrap()),
        None => sample.ac.clone(),
    };
    let result = run_hio(&modulus_from_autocorrelation(&ac), &hio_config(index)).unwrap();
    registration_invariant_error(&result.best_image, &sample.image)
        .unwrap()
        .error
}

/// Full-information HIO errors on the first ten validation pairs, with the
/// time they took.
fn hio_full_errors() -> &'static (Vec<f64>, f64) {
    static ERRORS: OnceLock<(Vec<f64>, f64)> = OnceLock::new();
    ERRORS.get_or_init(|| {
        let start = Instant::now();
        let errors = single_threaded(|| {
            validation_of(SampleMode::Pair, 10)
                .iter()
                .enumerate()
                .map(|(i, s)| hio_error(s, i, None))
                .collect()
        });
        (errors, start.elapsed().as_secs_f64())
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Shortened desk curriculum: 60 unmasked epochs, one pixel every 4 epochs
/// from 28 px, 10 epochs at 13 px. A width-8 network on the first 1000
/// training and 100 validation scenes.
fn acceptance_training() -> TrainConfig {
    TrainConfig {
        spec: NetSpec::encoder_decoder(8),
        schedule: CurriculumSchedule {
            full: FullStage {
                epochs: 60,
                lr_initial: 3e-4,
                lr_final: 1e-4,
                lr_drop_epoch: 50,
            },
            shrink: ShrinkStage {
                epochs: 60,
                r_start_px: 28,
                r_end_px: 13,
                epochs_per_decrement: 4,
                lr_initial: 1e-4,
                lr_final: 3e-5,
            },
            hold: HoldStage { epochs: 10, lr: 3e-5 },
            ..CurriculumSchedule::desk()
        },
        seed: SEED,
        loss_target: LossTarget::Masked,
    }
}

fn trained() -> &'static TrainOutcome {
    static OUTCOME: OnceLock<TrainOutcome> = OnceLock::new();
    OUTCOME.get_or_init(|| {
        let (train, val) = desk_data();
        let acs = |set: &[DatasetSample], n: usize| -> Vec<Autocorrelation> {
            set.iter().take(n).map(|s| s.ac.clone()).collect()
        };
        let (train, val) = (acs(train, 1000), acs(val, 100));
        let start = Instant::now();
        let outcome = single_threaded(|| train_curriculum(&acceptance_training(), &train, &val, |_| {}).unwrap());
        let mut out = std::io::stdout().lock();
        writeln!(out, "curriculum run took {:.0} s", start.elapsed().as_secs_f64()).unwrap();
        outcome
    })
}

#[test]
fn criterion_01_fft_autocorrelation_matches_direct_sum() {
    let _guard = EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut g = rng(101);
    let mut worst: f64 = 0.0;
    for i in 0..200u64 {
        let side = 2 * g.gen_range(4..=8);
        let img = random_image(1000 + i, side, side, 0, 0);
        let fast = autocorrelate(&img);
        worst = worst.max(fast.grid().max_abs_diff(&direct_autocorrelation(img.grid())));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-9 && secs < 10.0;
    let detail = format!("(max abs diff {worst:.2e} over 200 images, {secs:.2} s)");
    report(1, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_02_modulus_equals_padded_dft() {
    let _guard = EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner());
    let mut g = rng(102);
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let side = 2 * g.gen_range(4..=8);
        let support = g.gen_range(1..=side / 2);
        let (r0, c0) = (g.gen_range(0..=side - support), g.gen_range(0..=side - support));
        let img = random_image(2000 + i, side, support, r0, c0);
        let m = modulus_from_autocorrelation(&autocorrelate(&img));
        let direct = direct_padded_modulus(img.grid(), 2 * side);
        for (a, b) in m.data().iter().zip(&direct) {
            worst = worst.max((a - b).abs());
        }
    }
    let pass = worst < 1e-9;
    let detail = format!("(max abs diff {worst:.2e} over 50 images)");
    report(2, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_03_hio_recovers_full_information() {
    let _guard = EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner());
    let (errors, secs) = hio_full_errors();
    let good = errors.iter().filter(|e| **e < 0.1).count();
    let pass = good >= 8 && *secs < 300.0;
    let detail = format!("({good}/10 pairs below 0.1, mean {:.4}, {secs:.1} s)", mean(errors));
    report(3, pass, &detail);
    assert!(pass, "{detail}; errors {errors:?}");
}

#[test]
fn criterion_04_covering_mask_leaves_hio_unchanged() {
    let _guard = EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner());
    let sample = validation_of(SampleMode::Pair, 1)[0];
    // Smallest disk that still holds every nonzero lag.
    let c = (CANVAS / 2) as f64;
    let mut reach: f64 = 0.0;
    for r in 0..CANVAS {
        for col in 0..CANVAS {
            if sample.ac.get(r, col) != 0.0 {
                reach = reach.max((r as f64 - c).hypot(col as f64 - c));
            }
        }
    }
    let cfg = HioConfig {
        iterations: 60,
        trials: 3,
        ..hio_config(0)
    };
    let plain = single_threaded(|| run_hio(&modulus_from_autocorrelation(&sample.ac), &cfg).unwrap());
    let mut identical = 0;
    for mask in [DiskMask::covering(CANVAS), DiskMask::new(reach).unwrap()] {
        let masked = apply_disk_mask(&sample.ac, &mask);
        let result = single_threaded(|| run_hio(&modulus_from_autocorrelation(&masked), &cfg).unwrap());
        identical += usize::from(masked == sample.ac && result == plain);
    }
    let pass = identical == 2;
    let detail = format!("({identical}/2 masks give bit-identical runs, tight radius {reach:.2} px)");
    report(4, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_05_hio_degrades_under_masking() {
    let _guard = EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner());
    let (full, _) = hio_full_errors();
    let masked: Vec<f64> = single_threaded(|| {
        validation_of(SampleMode::Pair, 10)
            .iter()
            .enumerate()
            .map(|(i, s)| hio_error(s, i, Some(18.0)))
            .collect()
    });
    let (mf, mm) = (mean(full), mean(&masked));
    let pass = mm >= 2.0 * mf;
    let detail = format!("(mean error {mm:.4} at 18 px vs {mf:.4} unmasked)");
    report(5, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_06_gradients_match_finite_differences() {
    let _guard = EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let loss = check_loss_gradient(61, 100);
    let net = check_network_gradient(62, 100);
    let secs = start.elapsed().as_secs_f64();
    let pass = loss.checked >= 100
        && net.checked >= 100
        && loss.worst_relative < 1e-4
        && net.worst_relative < 1e-4
        && secs < 120.0;
    let detail = format!(
        "(loss: {} coords, worst rel {:.2e}; network: {} coords, worst rel {:.2e}; {secs:.2} s)",
        loss.checked, loss.worst_relative, net.checked, net.worst_relative
    );
    report(6, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_07_curriculum_upticks_and_recovers() {
    let _guard = EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner());
    let h = &trained().history;
    let sched = &acceptance_training().schedule;
    let first = h[0].train_loss;
    let stage1_end = h[sched.full.epochs - 1].train_loss;
    let halved = stage1_end <= 0.5 * first;

    let masked: Vec<_> = h.iter().filter(|r| r.stage != Stage::Full).collect();
    let mut decrements = 0;
    let mut upticks = 0;
    for w in masked.windows(2) {
        if w[1].radius_px < w[0].radius_px {
            decrements += 1;
            upticks += usize::from(w[1].val_loss > w[0].val_loss);
        }
    }
    let mut plateaus = 0;
    let mut recovered = 0;
    let mut start = 0;
    while start < masked.len() {
        let mut end = start;
        while end + 1 < masked.len() && masked[end + 1].radius_px == masked[start].radius_px {
            end += 1;
        }
        if end > start {
            plateaus += 1;
            recovered += usize::from(masked[end].val_loss < masked[start].val_loss);
        }
        start = end + 1;
    }
    let pass = halved && 10 * upticks >= 6 * decrements && 10 * recovered >= 6 * plateaus;
    let detail = format!(
        "(stage-1 train loss {first:.3e} -> {stage1_end:.3e}; upticks {upticks}/{decrements}; \
         in-plateau decrease {recovered}/{plateaus})"
    );
    report(7, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_08_network_beats_hio_at_23_px() {
    let _guard = EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner());
    let out = trained();
    let full_ck = out.checkpoint(None).expect("unmasked checkpoint");
    let ck = out.checkpoint(Some(23)).expect("23 px checkpoint");
    let mask = DiskMask::new(23.0).unwrap();
    let samples: Vec<&DatasetSample> = desk_data().1.iter().take(20).collect();
    let reg = |img: &Image, s: &DatasetSample| registration_invariant_error(img, &s.image).unwrap().error;
    let (neural_masked, neural_full, hio_masked) = single_threaded(|| {
        let nm: Vec<f64> = samples
            .iter()
            .map(|s| reg(&infer(ck, &s.ac, Some(&mask)).unwrap(), s))
            .collect();
        let nf: Vec<f64> = samples
            .iter()
            .map(|s| reg(&infer(full_ck, &s.ac, None).unwrap(), s))
            .collect();
        let hm: Vec<f64> = samples
            .iter()
            .enumerate()
            .map(|(i, s)| hio_error(s, i, Some(23.0)))
            .collect();
        (nm, nf, hm)
    });
    let (nm, nf, hm) = (mean(&neural_masked), mean(&neural_full), mean(&hio_masked));
    let pass = nm < hm && nm <= 1.5 * nf;
    let detail = format!("(23 px: network {nm:.4} vs HIO {hm:.4}; network unmasked {nf:.4})");
    report(8, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_09_twin_and_translation_invariance() {
    let _guard = EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner());
    let mut g = rng(109);
    let mut checks = 0;
    let mut failures = 0;
    for s in desk_data().1.iter().take(20) {
        let img = &s.image;
        let (dy, dx) = (g.gen_range(-32..32), g.gen_range(-32..32));
        for copy in [img.flip180(), img.roll(dy, dx), img.flip180().roll(dx, dy)] {
            checks += 1;
            failures += usize::from(registration_invariant_error(&copy, img).unwrap().error != 0.0);
        }
        let ac = autocorrelate(img);
        checks += 1;
        failures += usize::from(autocorrelate(&img.flip180()) != ac);
        for (dy, dx) in [(1, 0), (0, -1), (3, 2), (-5, 7)] {
            if let Some(moved) = img.shift(dy, dx) {
                checks += 1;
                failures += usize::from(autocorrelate(&moved) != ac);
            }
        }
    }
    let pass = failures == 0;
    let detail = format!("({failures} violations in {checks} exact checks)");
    report(9, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_10_dataset_integrity() {
    let _guard = EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner());
    let (train_pool, test_pool) = glyph_pools();
    let cfg = SynthConfig {
        master_seed: SEED,
        ..SynthConfig::desk()
    };
    let dir = tempfile::tempdir().unwrap();
    let (tp, vp) = (dir.path().join("train.prds"), dir.path().join("val.prds"));
    single_threaded(|| build_dataset(&cfg, &train_pool, &test_pool, &tp, &vp).unwrap());
    let (train, val) = desk_data();
    let round_trip = load_dataset(&tp).unwrap().samples == *train && load_dataset(&vp).unwrap().samples == *val;
    let sizes = train.len() == 2000 && val.len() == 200;

    let sources = |set: &[DatasetSample]| -> Vec<(SourceSplit, u32)> {
        set.iter()
            .flat_map(|s| s.meta.digits.iter().map(|d| (d.source_split, d.source_index)))
            .collect()
    };
    let (ts, vs) = (sources(train), sources(val));
    let pure = ts.iter().all(|(s, _)| *s == SourceSplit::Train)
        && vs.iter().all(|(s, _)| *s == SourceSplit::Test)
        && ts.iter().all(|t| !vs.contains(t));
    let quarter = std::f64::consts::FRAC_PI_4;
    let rotations = train
        .iter()
        .chain(val)
        .flat_map(|s| &s.meta.digits)
        .all(|d| (-quarter..=quarter).contains(&d.rotation_rad));
    let balance = |set: &[DatasetSample]| {
        let pairs = set.iter().filter(|s| s.meta.mode == SampleMode::Pair).count();
        pairs.abs_diff(set.len() - pairs) <= 1
    };
    let balanced = balance(train) && balance(val);
    let pass = round_trip && sizes && pure && rotations && balanced;
    let detail = format!(
        "(round trip {round_trip}, 2000/200 {sizes}, split purity {pure}, rotations {rotations}, mode balance {balanced})"
    );
    report(10, pass, &detail);
    assert!(pass, "{detail}");
}

/// 8-connected components of `grid > threshold`, as pixel lists.
fn components(grid: &Grid, threshold: f64) -> Vec<Vec<(usize, usize)>> {
    let n = grid.side();
    let mut seen = vec![false; n * n];
    let mut out = Vec::new();
    for start in 0..n * n {
        if seen[start] || grid.data()[start] <= threshold {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut comp = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / n, i % n);
            comp.push((r, c));
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if (0..n as isize).contains(&rr) && (0..n as isize).contains(&cc) {
                        let j = rr as usize * n + cc as usize;
                        if !seen[j] && grid.data()[j] > threshold {
                            seen[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

#[test]
fn criterion_11_no_spurious_side_lobes_on_single_digits() {
    let _guard = EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner());
    let out = trained();
    let last = out.checkpoints.last().expect("final checkpoint");
    let mask = last.radius_px.map(|r| DiskMask::new(f64::from(r)).unwrap());
    let singles = validation_of(SampleMode::Single, 10);
    let mut with_lobes = 0;
    let mut blank = 0;
    for s in &singles {
        let recon = single_threaded(|| infer(last, &s.ac, mask.as_ref()).unwrap());
        let ac = autocorrelate(&recon);
        // An all-zero output has no lobes but is no reconstruction either.
        if ac.peak() <= 0.0 {
            blank += 1;
            continue;
        }
        let center = (CANVAS / 2, CANVAS / 2);
        let lobes = components(ac.grid(), 0.05 * ac.peak())
            .iter()
            .filter(|comp| !comp.contains(&center))
            .count();
        with_lobes += usize::from(lobes > 0);
    }
    let pass = with_lobes == 0 && blank == 0 && singles.len() == 10;
    let detail = format!(
        "({with_lobes}/10 single digits show an off-center component above 5% of the zero lag, \
         {blank} blank outputs, checkpoint {})",
        last.label()
    );
    report(11, pass, &detail);
    assert!(pass, "{detail}");
}
