//! Hybrid Input-Output phase retrieval with seeded random restarts.

use rand::Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{to_complex, with_fft2};
use crate::grid::{FourierModulus, Grid, Image};
use crate::seed::{derive_seed, rng};

#[derive(Clone, Debug, PartialEq)]
pub struct HioConfig {
    /// Feedback parameter, `0 < beta <= 1`.
    pub beta: f64,
    pub iterations: usize,
    pub trials: usize,
    /// Side of the centered square support on the padded grid.
    pub support_box: usize,
    pub seed: u64,
    /// Spectral amplitudes at or below this get phase 1.
    pub phase_epsilon: f64,
    /// Error-reduction iterations run after HIO on each trial.
    pub polish_iterations: usize,
}

impl HioConfig {
    /// Defaults for a `canvas`x`canvas` object: 400 iterations, 20 trials,
    /// beta 0.9, support box `canvas/2`.
    pub fn for_canvas(canvas: usize) -> Self {
        Self {
            beta: 0.9,
            iterations: 400,
            trials: 20,
            support_box: canvas / 2,
            seed: 0,
            phase_epsilon: 1e-12,
            polish_iterations: 0,
        }
    }

    pub fn validate(&self, padded: usize) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if self.iterations == 0 || self.trials == 0 {
            return Err(Error::Config("iterations and trials must be at least 1".into()));
        }
        if self.support_box == 0 || self.support_box > padded {
            return Err(Error::Config(format!(
                "support box {} must lie in 1..={padded}",
                self.support_box
            )));
        }
        if !(self.phase_epsilon >= 0.0) {
            return Err(Error::Config("phase_epsilon must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    pub final_fourier_error: f64,
    /// Final object estimate of the trial, cropped to the canvas.
    pub estimate: Image,
    /// Fourier residual of the HIO iterate before each step.
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalResult {
    pub best_image: Image,
    pub per_trial: Vec<TrialOutcome>,
    pub best_trial_index: usize,
}

impl RetrievalResult {
    /// Rows `trial,iteration,fourier_error`.
    pub fn write_trace_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "trial,iteration,fourier_error")?;
        for (t, trial) in self.per_trial.iter().enumerate() {
            for (i, e) in trial.trace.iter().enumerate() {
                writeln!(out, "{t},{i},{e:e}")?;
            }
        }
        Ok(())
    }
}

/// Whether padded-grid pixel `(r, c)` lies in the centered support box.
#[inline]
fn in_box(n: usize, support: usize, r: usize, c: usize) -> bool {
    let lo = n / 2 - support / 2;
    let hi = lo + support;
    (lo..hi).contains(&r) && (lo..hi).contains(&c)
}

/// Replaces spectral magnitudes by `modulus`, keeping phases. Returns the
/// Fourier residual of the spectrum before replacement.
fn project_modulus(spectrum: &mut [Complex64], modulus: &[f64], eps: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (g, &m) in spectrum.iter_mut().zip(modulus) {
        let amp = g.norm();
        num += (amp - m) * (amp - m);
        den += m * m;
        *g = if amp > eps {
            *g * (m / amp)
        } else {
            Complex64::new(m, 0.0)
        };
    }
    (num / den).sqrt()
}

fn check_sizes(grid: &Grid, modulus: &FourierModulus) -> Result<()> {
    if grid.side() != modulus.side() {
        return Err(Error::Dimension(format!(
            "iterate is {0}x{0} but modulus is {1}x{1}",
            grid.side(),
            modulus.side()
        )));
    }
    Ok(())
}

/// Fourier-domain projection `g' = Re IDFT(M * G/|G|)`, plus the residual of `current`.
fn fourier_projection(current: &Grid, modulus: &FourierModulus, eps: f64) -> (Grid, f64) {
    let n = current.side();
    let mut buf = to_complex(current.data());
    let residual = with_fft2(n, |fft| {
        fft.forward(&mut buf);
        let residual = project_modulus(&mut buf, modulus.data(), eps);
        fft.inverse(&mut buf);
        residual
    });
    let projected = Grid::from_vec(n, buf.iter().map(|v| v.re).collect()).expect("same size");
    (projected, residual)
}

fn hio_update(current: &Grid, projected: &Grid, cfg: &HioConfig) -> Grid {
    let n = current.side();
    Grid::from_fn(n, |r, c| {
        let g = projected.get(r, c);
        if g >= 0.0 && in_box(n, cfg.support_box, r, c) {
            g
        } else {
            current.get(r, c) - cfg.beta * g
        }
    })
}

/// Object-domain projection: nonnegative inside the box, zero outside.
fn project_support(grid: &Grid, support: usize) -> Grid {
    let n = grid.side();
    Grid::from_fn(n, |r, c| {
        if in_box(n, support, r, c) {
            grid.get(r, c).max(0.0)
        } else {
            0.0
        }
    })
}

/// One HIO update of the padded iterate `current`.
pub fn hio_step(current: &Grid, modulus: &FourierModulus, cfg: &HioConfig) -> Result<Grid> {
    check_sizes(current, modulus)?;
    let (projected, _) = fourier_projection(current, modulus, cfg.phase_epsilon);
    Ok(hio_update(current, &projected, cfg))
}

/// `sqrt(sum (|DFT(iterate)| - M)^2 / sum M^2)`.
pub fn fourier_error(iterate: &Grid, modulus: &FourierModulus) -> Result<f64> {
    check_sizes(iterate, modulus)?;
    let energy: f64 = modulus.sum_sq();
    if energy == 0.0 {
        return Err(Error::Undefined("modulus is identically zero".into()));
    }
    let n = iterate.side();
    let mut buf = to_complex(iterate.data());
    with_fft2(n, |fft| fft.forward(&mut buf));
    let num: f64 = buf
        .iter()
        .zip(modulus.data())
        .map(|(g, m)| (g.norm() - m).powi(2))
        .sum();
    Ok((num / energy).sqrt())
}

fn run_trial(modulus: &FourierModulus, cfg: &HioConfig, seed: u64) -> Result<TrialOutcome> {
    let n = modulus.side();
    let mut rng = rng(seed);
    let mut current = Grid::zeros(n);
    for r in 0..n {
        for c in 0..n {
            if in_box(n, cfg.support_box, r, c) {
                current.set(r, c, rng.gen::<f64>());
            }
        }
    }
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut last_projection = Grid::zeros(n);
    for _ in 0..cfg.iterations {
        let (projected, residual) = fourier_projection(&current, modulus, cfg.phase_epsilon);
        trace.push(residual);
        current = hio_update(&current, &projected, cfg);
        last_projection = projected;
    }
    let mut estimate = project_support(&last_projection, cfg.support_box);
    for _ in 0..cfg.polish_iterations {
        let (projected, _) = fourier_projection(&estimate, modulus, cfg.phase_epsilon);
        estimate = project_support(&projected, cfg.support_box);
    }
    let final_fourier_error = fourier_error(&estimate, modulus)?;
    let estimate = Image::from_grid(estimate.crop_centered(modulus.canvas_side()))?;
    Ok(TrialOutcome {
        seed,
        final_fourier_error,
        estimate,
        trace,
    })
}

/// Multi-trial HIO from random starts.
///
/// Trial `i` starts from i.i.d. uniform `[0, 1)` values inside the support box,
/// seeded with `derive_seed(cfg.seed, i)`. After the HIO iterations the last
/// Fourier-projected iterate is projected onto the object constraints and
/// becomes the trial estimate. The trial with the smallest Fourier residual
/// wins; ties go to the lowest index. Trials run on the current rayon pool and
/// the result does not depend on its size.
pub fn run_hio(modulus: &FourierModulus, cfg: &HioConfig) -> Result<RetrievalResult> {
    cfg.validate(modulus.side())?;
    let seeds: Vec<u64> = (0..cfg.trials as u64).map(|i| derive_seed(cfg.seed, i)).collect();
    let per_trial = seeds
        .par_iter()
        .map(|&s| run_trial(modulus, cfg, s))
        .collect::<Result<Vec<_>>>()?;
    let best_trial_index = per_trial
        .iter()
        .enumerate()
        .fold(0, |best, (i, t)| {
            if t.final_fourier_error < per_trial[best].final_fourier_error {
                i
            } else {
                best
            }
        });
    Ok(RetrievalResult {
        best_image: per_trial[best_trial_index].estimate.clone(),
        per_trial,
        best_trial_index,
    })
}
