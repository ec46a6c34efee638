//! Slow, obviously-correct reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use phaseret::dataset::{load_mnist_idx, DigitGlyph, SourceSplit};
use phaseret::grid::{Grid, Image};
use phaseret::seed::rng;
use rand::Rng;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mnist")
}

/// Training and test glyph pools from the bundled MNIST subset.
pub fn glyph_pools() -> (Vec<DigitGlyph>, Vec<DigitGlyph>) {
    let dir = fixtures();
    let train = load_mnist_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
        SourceSplit::Train,
    )
    .expect("training fixture");
    let test = load_mnist_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
        SourceSplit::Test,
    )
    .expect("test fixture");
    (train, test)
}

/// Nonnegative image with i.i.d. values in `[0, 1)` on a `support`-wide box
/// at `(row0, col0)`; roughly a fifth of the box is left at zero.
pub fn random_image(seed: u64, side: usize, support: usize, row0: usize, col0: usize) -> Image {
    let mut g = rng(seed);
    let grid = Grid::from_fn(side, |r, c| {
        let inside = (row0..row0 + support).contains(&r) && (col0..col0 + support).contains(&c);
        if inside && g.gen::<f64>() > 0.2 {
            g.gen::<f64>()
        } else {
            0.0
        }
    });
    Image::from_grid(grid).unwrap()
}

/// Linear autocorrelation by the definition, laid out like the library's
/// window: lag `(dy, dx)` in `[-W/2, W/2)` at `(W/2 + dy, W/2 + dx)`.
pub fn direct_autocorrelation(img: &Grid) -> Grid {
    let w = img.side() as isize;
    let half = w / 2;
    Grid::from_fn(img.side(), |r, c| {
        let (dy, dx) = (r as isize - half, c as isize - half);
        let mut sum = 0.0;
        for y in 0..w {
            for x in 0..w {
                let (y2, x2) = (y + dy, x + dx);
                if (0..w).contains(&y2) && (0..w).contains(&x2) {
                    sum += img.get(y as usize, x as usize) * img.get(y2 as usize, x2 as usize);
                }
            }
        }
        sum
    })
}

/// Complex 2D DFT by separable direct sums.
pub fn direct_dft(re: &[f64], im: &[f64], n: usize, sign: f64) -> (Vec<f64>, Vec<f64>) {
    let twiddle: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let a = sign * 2.0 * PI * k as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .collect();
    let pass = |re: &[f64], im: &[f64], rows: bool| {
        let mut out_re = vec![0.0; n * n];
        let mut out_im = vec![0.0; n * n];
        for a in 0..n {
            for k in 0..n {
                let (mut sr, mut si) = (0.0, 0.0);
                for j in 0..n {
                    let idx = if rows { a * n + j } else { j * n + a };
                    let (c, s) = twiddle[(j * k) % n];
                    sr += re[idx] * c - im[idx] * s;
                    si += re[idx] * s + im[idx] * c;
                }
                let idx = if rows { a * n + k } else { k * n + a };
                out_re[idx] = sr;
                out_im[idx] = si;
            }
        }
        (out_re, out_im)
    };
    let (r1, i1) = pass(re, im, true);
    pass(&r1, &i1, false)
}

/// `|DFT|` of `grid` zero-padded to `n` (top-left placement).
pub fn direct_padded_modulus(grid: &Grid, n: usize) -> Vec<f64> {
    let mut re = vec![0.0; n * n];
    for r in 0..grid.side() {
        for c in 0..grid.side() {
            re[r * n + c] = grid.get(r, c);
        }
    }
    let (fr, fi) = direct_dft(&re, &vec![0.0; n * n], n, -1.0);
    fr.iter().zip(&fi).map(|(a, b)| a.hypot(*b)).collect()
}

/// Registration-invariant error by exhaustive search over both orientations
/// and every cyclic shift, with the closed-form nonnegative scale.
pub fn brute_force_registration(recon: &Grid, truth: &Grid) -> f64 {
    let n = truth.side();
    let norm: f64 = truth.data().iter().map(|v| v * v).sum();
    let mut best = f64::INFINITY;
    for cand in [recon.clone(), recon.flip180()] {
        for dy in 0..n as isize {
            for dx in 0..n as isize {
                let t = cand.roll(dy, dx);
                let dot: f64 = t.data().iter().zip(truth.data()).map(|(a, b)| a * b).sum();
                let tt: f64 = t.data().iter().map(|v| v * v).sum();
                let alpha = if tt > 0.0 { (dot / tt).max(0.0) } else { 0.0 };
                let res: f64 = t
                    .data()
                    .iter()
                    .zip(truth.data())
                    .map(|(a, b)| (alpha * a - b).powi(2))
                    .sum();
                best = best.min((res / norm).sqrt());
            }
        }
    }
    best
}

/// Outcome of a finite-difference gradient comparison.
#[derive(Debug)]
pub struct GradCheck {
    pub checked: usize,
    pub skipped: usize,
    pub worst_relative: f64,
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn sign_pattern(pred: &Image, target: &phaseret::grid::Autocorrelation) -> Vec<i8> {
    let ac = phaseret::correlation::autocorrelate(pred);
    ac.data()
        .iter()
        .zip(target.data())
        .map(|(a, t)| (a - t).partial_cmp(&0.0).map_or(0, |o| o as i8))
        .collect()
}

/// Loss gradient with respect to predicted pixels against central
/// differences. Pixels are kept strictly positive so the support does not
/// move; coordinates whose step changes any residual sign are skipped.
pub fn check_loss_gradient(seed: u64, wanted: usize) -> GradCheck {
    use phaseret::correlation::autocorrelate;
    use phaseret::nn::autocorr_l1_loss;

    let side = 32;
    let mut g = rng(seed);
    let pred = Image::from_grid(Grid::from_fn(side, |r, c| {
        if (10..22).contains(&r) && (10..22).contains(&c) {
            0.1 + g.gen::<f64>()
        } else {
            0.0
        }
    }))
    .unwrap();
    let target = autocorrelate(&random_image(seed ^ 0x5a5a, side, 12, 9, 11));
    let base = autocorr_l1_loss(&pred, &target, None, false).unwrap();
    let base_signs = sign_pattern(&pred, &target);
    let h = 1e-5;
    let mut out = GradCheck {
        checked: 0,
        skipped: 0,
        worst_relative: 0.0,
    };
    for k in rand::seq::index::sample(&mut g, 144, 144) {
        if out.checked == wanted {
            break;
        }
        let (r, c) = (10 + k / 12, 10 + k % 12);
        let bumped = |d: f64| {
            let mut grid = pred.grid().clone();
            grid.set(r, c, grid.get(r, c) + d);
            Image::from_grid(grid).unwrap()
        };
        let (plus, minus) = (bumped(h), bumped(-h));
        if sign_pattern(&plus, &target) != base_signs || sign_pattern(&minus, &target) != base_signs {
            out.skipped += 1;
            continue;
        }
        let lp = autocorr_l1_loss(&plus, &target, None, false).unwrap().loss;
        let lm = autocorr_l1_loss(&minus, &target, None, false).unwrap().loss;
        let fd = (lp - lm) / (2.0 * h);
        let an = base.gradient.get(r, c);
        if an.abs() < 1e-9 && fd.abs() < 1e-9 {
            out.skipped += 1;
            continue;
        }
        out.worst_relative = out.worst_relative.max(relative(an, fd));
        out.checked += 1;
    }
    out
}

/// Gradient of the autocorrelation loss of a small encoder-decoder with
/// respect to its parameters, composed through the network's backward pass,
/// against central differences in `f64`. Coordinates whose step flips a ReLU
/// or a residual sign are skipped.
pub fn check_network_gradient(seed: u64, wanted: usize) -> GradCheck {
    use phaseret::correlation::autocorrelate;
    use phaseret::nn::{autocorr_l1_loss, backward, forward, NetParams, NetSpec, Tensors};

    let side = 16;
    let spec = NetSpec::encoder_decoder(2);
    let mut params = NetParams::<f64>::init(&spec, seed);
    let mut g = rng(seed ^ 0x1234);
    // Positive biases keep units active; a dense output keeps every lag of
    // its autocorrelation away from zero, where rounding noise would sit on
    // an l1 kink.
    for b in params.values.biases.iter_mut().flatten() {
        *b = 0.05 * g.gen::<f64>();
    }
    *params.values.biases.last_mut().unwrap().first_mut().unwrap() = 0.5;
    let (input, _) = autocorrelate(&random_image(seed, side, 8, 4, 4)).normalized();
    let first = forward(&spec, &params.values, input.data(), side).unwrap();
    let first = Image::from_grid(Grid::from_vec(side, first.output().to_vec()).unwrap()).unwrap();
    let reference = autocorrelate(&random_image(seed ^ 0xabc, side, side, 0, 0));
    // Zero-lag value close to the initial output's, so residual signs are mixed.
    let ratio = 0.9 * autocorrelate(&first).peak() / reference.peak();
    let target = phaseret::grid::Autocorrelation::from_grid(
        Grid::from_vec(side, reference.data().iter().map(|v| v * ratio).collect()).unwrap(),
    )
    .unwrap();

    let evaluate = |p: &Tensors<f64>| {
        let tape = forward(&spec, p, input.data(), side).unwrap();
        let pred = Image::from_grid(Grid::from_vec(side, tape.output().to_vec()).unwrap()).unwrap();
        let report = autocorr_l1_loss(&pred, &target, None, false).unwrap();
        let signs = sign_pattern(&pred, &target);
        (tape, report, signs)
    };
    let (tape, report, signs) = evaluate(&params.values);
    let relu = tape.relu_pattern(&spec);
    let grads = backward(&spec, &params.values, &tape, report.gradient.data());
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let n = analytic.len();

    let h = 1e-6;
    let mut out = GradCheck {
        checked: 0,
        skipped: 0,
        worst_relative: 0.0,
    };
    for k in rand::seq::index::sample(&mut g, n, n) {
        if out.checked == wanted {
            break;
        }
        let loss_at = |d: f64| {
            let mut p = params.values.clone();
            *p.iter_mut().nth(k).unwrap() += d;
            let (tape, report, s) = evaluate(&p);
            (report.loss, tape.relu_pattern(&spec) == relu && s == signs)
        };
        let (lp, ok_p) = loss_at(h);
        let (lm, ok_m) = loss_at(-h);
        if !ok_p || !ok_m {
            out.skipped += 1;
            continue;
        }
        let fd = (lp - lm) / (2.0 * h);
        let an = analytic[k];
        if an.abs() < 1e-9 && fd.abs() < 1e-9 {
            out.skipped += 1;
            continue;
        }
        out.worst_relative = out.worst_relative.max(relative(an, fd));
        out.checked += 1;
    }
    out
}
