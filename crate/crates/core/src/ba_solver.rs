//! Blahut-Arimoto capacity of the discretized channel under `E|X|^p <= P0`.
//!
//! The noise law is binned on a uniform output grid and truncated at the
//! 0.999 central-mass point. Input points sit on a coarser sub-lattice of the
//! output grid, so every row of `W(y|x)` is a shifted copy of one kernel and
//! both the output law and the per-letter divergences are convolutions.
//!
//! The moment multiplier is re-solved inside every iteration: the update
//! `p(x) <- p(x) exp(D(x) - lambda |x|^p) / Z` with `lambda` chosen so the
//! budget is met is the exact maximization over the constrained set in the
//! alternating-maximization view of BA, so the iterates stay monotone.

use std::sync::Arc;

use rayon::prelude::*;
use realfft::{num_complex::Complex, ComplexToReal, RealFftPlanner, RealToComplex};

use crate::noise_model::{gsnr_to_power, NoiseModel, NoiseParams};
use crate::special_fn::KahanSum;
use crate::{Error, Result};

/// Central mass the truncation point must reach.
pub const TRUNCATION_MASS: f64 = 0.999;

/// Smallest `n` with `int_{-n}^{n} f >= mass`, found by geometric growth then
/// bisection.
pub fn truncation_point_mass(model: &NoiseModel, mass: f64) -> Result<f64> {
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::invalid("mass", format!("need 0 < mass < 1, got {mass}")));
    }
    let mut hi = 1e-3;
    while model.central_mass(hi)? < mass {
        hi *= 1.5;
        if hi > 1e300 {
            return Err(Error::Convergence {
                what: "truncation point search".into(),
                terms: 0,
            });
        }
    }
    let mut lo = hi / 1.5;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if model.central_mass(mid)? >= mass {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(hi)
}

pub fn truncation_point(model: &NoiseModel) -> Result<f64> {
    truncation_point_mass(model, TRUNCATION_MASS)
}

/// Output grids never exceed this many points.
pub const HARD_MAX_OUTPUT_POINTS: usize = 1 << 21;

/// How far each row of the binned channel extends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelExtent {
    /// `|y - x| <= n_T`.
    Truncated,
    /// Whole output window, clipped at its edges.
    #[default]
    Window,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizeOptions {
    pub step: f64,
    /// Input grid extends to `amplitude_factor * P0^(1/p)`.
    pub amplitude_factor: f64,
    /// Input grid step in units of the output step.
    pub input_stride: usize,
    /// Output points cap; the step is coarsened to respect it.
    pub max_output_points: usize,
    /// The cap yields to this step limit, up to [`HARD_MAX_OUTPUT_POINTS`].
    pub max_step: Option<f64>,
    pub extent: KernelExtent,
}

impl Default for DiscretizeOptions {
    fn default() -> Self {
        Self {
            step: 0.01,
            amplitude_factor: 8.0,
            input_stride: 4,
            max_output_points: 1 << 16,
            max_step: None,
            extent: KernelExtent::Window,
        }
    }
}

#[derive(Clone)]
struct ShiftKernel {
    /// `h[k + half]` for offsets `k = -half..=half`.
    h: Vec<f64>,
    half: usize,
    /// Output index of each input point.
    x_index: Vec<usize>,
    /// Row sums before renormalization.
    norms: Vec<f64>,
    /// `sum_y W ln W` per row.
    neg_row_entropy: Vec<f64>,
    fft_len: usize,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

#[derive(Clone)]
enum Transition {
    Dense(Vec<Vec<f64>>),
    Shift(ShiftKernel),
}

/// Discrete memoryless channel with real-valued input letters.
#[derive(Clone)]
pub struct DiscreteChannel {
    pub x_grid: Vec<f64>,
    /// First output point; outputs are `y0 + j * step`.
    pub y0: f64,
    pub ny: usize,
    pub step: f64,
    /// Truncation point used to build the rows (0 for dense channels).
    pub n_t: f64,
    trans: Transition,
}

impl std::fmt::Debug for DiscreteChannel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteChannel")
            .field("nx", &self.x_grid.len())
            .field("ny", &self.ny)
            .field("step", &self.step)
            .field("n_t", &self.n_t)
            .finish()
    }
}

impl DiscreteChannel {
    /// Channel from an explicit row-stochastic matrix.
    pub fn from_matrix(x_grid: Vec<f64>, w: Vec<Vec<f64>>) -> Result<Self> {
        if x_grid.is_empty() || x_grid.len() != w.len() {
            return Err(Error::invalid("w", "one row per input letter"));
        }
        let ny = w[0].len();
        for (i, row) in w.iter().enumerate() {
            if row.len() != ny {
                return Err(Error::invalid("w", format!("row {i} has the wrong length")));
            }
            if row.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::invalid("w", format!("row {i} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::invalid("w", format!("row {i} sums to {s}")));
            }
        }
        Ok(Self {
            x_grid,
            y0: 0.0,
            ny,
            step: 1.0,
            n_t: 0.0,
            trans: Transition::Dense(w),
        })
    }

    pub fn nx(&self) -> usize {
        self.x_grid.len()
    }

    pub fn y_grid(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y0 + j as f64 * self.step).collect()
    }

    /// `W(y_j | x_i)`.
    pub fn w(&self, i: usize, j: usize) -> f64 {
        match &self.trans {
            Transition::Dense(w) => w[i][j],
            Transition::Shift(k) => {
                let off = j as i64 - k.x_index[i] as i64;
                if off.unsigned_abs() as usize > k.half {
                    0.0
                } else {
                    k.h[(off + k.half as i64) as usize] / k.norms[i]
                }
            }
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ny).map(|j| self.w(i, j)).collect()
    }

    /// Row sums of the binned density before renormalization.
    pub fn row_norms(&self) -> Vec<f64> {
        match &self.trans {
            Transition::Dense(w) => vec![1.0; w.len()],
            Transition::Shift(k) => k.norms.clone(),
        }
    }

    /// Entropy of each row, nats (discrete, so it includes `-ln step`).
    pub fn row_entropies(&self) -> Vec<f64> {
        match &self.trans {
            Transition::Dense(w) => w
                .iter()
                .map(|r| -r.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>())
                .collect(),
            Transition::Shift(k) => k.neg_row_entropy.iter().map(|v| -v).collect(),
        }
    }

    /// Output law for input pmf `p`.
    pub fn output(&self, p: &[f64]) -> Vec<f64> {
        match &self.trans {
            Transition::Dense(w) => {
                let mut q = vec![0.0; self.ny];
                for (pi, row) in p.iter().zip(w) {
                    if *pi > 0.0 {
                        for (qj, wij) in q.iter_mut().zip(row) {
                            *qj += pi * wij;
                        }
                    }
                }
                q
            }
            Transition::Shift(k) => {
                let mut buf = vec![0.0; k.fft_len];
                for ((&pi, &xi), &s) in p.iter().zip(&k.x_index).zip(&k.norms) {
                    buf[xi] += pi / s;
                }
                let c = k.convolve(buf);
                c[k.half..k.half + self.ny].to_vec()
            }
        }
    }

    /// `D(x_i) = sum_y W(y|x_i) ln(W(y|x_i) / q(y))`.
    pub fn divergences(&self, q: &[f64]) -> Vec<f64> {
        let qmax = q.iter().cloned().fold(0.0, f64::max);
        let floor = (qmax * 1e-13).max(f64::MIN_POSITIVE);
        match &self.trans {
            Transition::Dense(w) => w
                .iter()
                .map(|row| {
                    let mut s = KahanSum::default();
                    for (&wij, &qj) in row.iter().zip(q) {
                        if wij > 0.0 {
                            s.add(wij * (wij / qj.max(floor)).ln());
                        }
                    }
                    s.value()
                })
                .collect(),
            Transition::Shift(k) => {
                let mut buf = vec![0.0; k.fft_len];
                for (b, &qj) in buf.iter_mut().zip(q) {
                    *b = qj.max(floor).ln();
                }
                let c = k.convolve(buf);
                k.x_index
                    .iter()
                    .zip(&k.norms)
                    .zip(&k.neg_row_entropy)
                    .map(|((&xi, &s), &nre)| nre - c[xi + k.half] / s)
                    .collect()
            }
        }
    }
}

impl ShiftKernel {
    fn convolve(&self, mut buf: Vec<f64>) -> Vec<f64> {
        let mut spec = self.forward.make_output_vec();
        self.forward
            .process(&mut buf, &mut spec)
            .expect("buffer lengths match the plan");
        let scale = 1.0 / self.fft_len as f64;
        for (b, s) in spec.iter_mut().zip(&self.spectrum) {
            *b = *b * *s * scale;
        }
        // a real signal has real DC and Nyquist bins
        spec[0].im = 0.0;
        if let Some(last) = spec.last_mut() {
            last.im = 0.0;
        }
        self.inverse
            .process(&mut spec, &mut buf)
            .expect("buffer lengths match the plan");
        buf
    }
}

/// Bin the noise law on a uniform grid and build the channel for inputs on
/// `[-x_max, x_max]`.
pub fn discretize(model: &NoiseModel, x_max: f64, opts: &DiscretizeOptions) -> Result<DiscreteChannel> {
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(Error::invalid("step", format!("need step > 0, got {}", opts.step)));
    }
    if !(x_max >= 0.0 && x_max.is_finite()) {
        return Err(Error::invalid("x_max", format!("need x_max >= 0, got {x_max}")));
    }
    if opts.input_stride == 0 {
        return Err(Error::invalid("input_stride", "must be at least 1"));
    }
    let n_t = truncation_point(model)?;
    let mut step = opts.step;
    let span = 2.0 * (n_t + x_max);
    if span / step + 1.0 > opts.max_output_points as f64 {
        step = span / (opts.max_output_points as f64 - 1.0);
        if let Some(ms) = opts.max_step {
            step = step.min(ms.max(opts.step));
        }
        if span / step + 1.0 > HARD_MAX_OUTPUT_POINTS as f64 {
            return Err(Error::Resolution(format!(
                "output grid of {:.0} points at step {step:.4} exceeds {HARD_MAX_OUTPUT_POINTS}",
                span / step
            )));
        }
        log::info!("output step set to {step:.4} for a span of {span:.1}");
    }
    let dx = step * opts.input_stride as f64;
    let nx_half = (x_max / dx).floor() as usize;
    let x_half_idx = nx_half * opts.input_stride;
    let nt_idx = (n_t / step).ceil() as usize;
    let y_half = x_half_idx + nt_idx;
    let ny = 2 * y_half + 1;
    let half = match opts.extent {
        KernelExtent::Truncated => nt_idx,
        KernelExtent::Window => ny - 1,
    };
    let mut h = vec![0.0; 2 * half + 1];
    for k in 0..=half {
        let v = model.pdf(k as f64 * step) * step;
        h[half + k] = v;
        h[half - k] = v;
    }
    if matches!(opts.extent, KernelExtent::Truncated) {
        // keep |y - x| <= n_T exactly
        for k in 0..=half {
            if k as f64 * step > n_t + 1e-12 * n_t {
                h[half + k] = 0.0;
                h[half - k] = 0.0;
            }
        }
    }
    // prefix sums of h and h ln h over offsets
    let mut ph = vec![0.0; h.len() + 1];
    let mut phl = vec![0.0; h.len() + 1];
    for (i, &v) in h.iter().enumerate() {
        ph[i + 1] = ph[i] + v;
        phl[i + 1] = phl[i] + if v > 0.0 { v * v.ln() } else { 0.0 };
    }
    let x_index: Vec<usize> = (0..=2 * nx_half).map(|i| i * opts.input_stride + nt_idx).collect();
    let x_grid: Vec<f64> = (0..=2 * nx_half)
        .map(|i| (i as f64 - nx_half as f64) * dx)
        .collect();
    let mut norms = Vec::with_capacity(x_index.len());
    let mut nre = Vec::with_capacity(x_index.len());
    for &xi in &x_index {
        // offsets k with 0 <= xi + k < ny, clipped to the kernel
        let k_lo = (-(xi as i64)).max(-(half as i64));
        let k_hi = ((ny - 1 - xi) as i64).min(half as i64);
        let a = (k_lo + half as i64) as usize;
        let b = (k_hi + half as i64) as usize + 1;
        let s = ph[b] - ph[a];
        let t = phl[b] - phl[a];
        if !(s > 0.0) || (s - 1.0).abs() > 0.01 {
            return Err(Error::Resolution(format!(
                "row renormalization {s:.6} departs from 1 by more than 1% at step {step}"
            )));
        }
        norms.push(s);
        nre.push(t / s - s.ln());
    }
    let fft_len = next_fast_len(ny + 2 * half);
    let mut planner = RealFftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(fft_len);
    let inverse = planner.plan_fft_inverse(fft_len);
    let mut kern = vec![0.0; fft_len];
    kern[..h.len()].copy_from_slice(&h);
    let mut spectrum = forward.make_output_vec();
    forward
        .process(&mut kern, &mut spectrum)
        .map_err(|e| Error::invalid("fft", e.to_string()))?;
    Ok(DiscreteChannel {
        x_grid,
        y0: -(y_half as f64) * step,
        ny,
        step,
        n_t,
        trans: Transition::Shift(ShiftKernel {
            h,
            half,
            x_index,
            norms,
            neg_row_entropy: nre,
            fft_len,
            spectrum,
            forward,
            inverse,
        }),
    })
}

/// Smallest even 5-smooth length `>= n`.
fn next_fast_len(n: usize) -> usize {
    let mut best = n.next_power_of_two().max(2);
    let mut p5 = 1;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut v = p35;
            while v < n || v % 2 == 1 {
                v *= 2;
            }
            best = best.min(v);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

/// Channel sized for the budget: inputs up to `amplitude_factor * P0^(1/p)`.
pub fn discretize_for_budget(
    model: &NoiseModel,
    p: f64,
    p0: f64,
    opts: &DiscretizeOptions,
) -> Result<DiscreteChannel> {
    discretize(model, opts.amplitude_factor * p0.powf(1.0 / p), opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaOptions {
    /// Stop when the duality gap falls below this, nats.
    pub tol: f64,
    pub max_iter: usize,
    /// Over-relaxation of the multiplicative update; steps that would lower
    /// the mutual information are redone with 1.
    pub relax: bool,
    /// Also require `max |K|` over support points to fall below
    /// `support_factor * tol`.
    pub support_factor: f64,
}

impl Default for BaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 20_000,
            relax: true,
            support_factor: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaResult {
    /// Mutual information of the final pmf, nats.
    pub capacity: f64,
    pub input_pmf: Vec<f64>,
    pub iterations: usize,
    /// `max_x [D(x) - lambda (|x|^p - P0)] - I`, an upper bound on
    /// capacity minus `capacity`.
    pub gap: f64,
    pub kkt_residual: f64,
    pub lambda: f64,
    /// `sum pmf |x|^p`
    pub moment: f64,
    /// Mutual information after every accepted iteration.
    pub history: Vec<f64>,
}

impl BaResult {
    /// Largest drop between consecutive iterates (0 when monotone).
    pub fn max_decrease(&self) -> f64 {
        self.history
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

/// Floor for log masses, so points pushed far down can still recover.
const LOG_MASS_FLOOR: f64 = -800.0;

/// pmf proportional to `exp(logw - lambda c)` meeting `sum pmf c <= p0`,
/// with equality unless `lambda = 0` already satisfies it. Returns the pmf,
/// its logarithm and `lambda`.
fn constrained_pmf(logw: &[f64], cost: &[f64], p0: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let eval = |lam: f64| -> (f64, f64, f64, Vec<f64>) {
        let m = logw
            .iter()
            .zip(cost)
            .map(|(&l, &c)| l - lam * c)
            .fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw
            .iter()
            .zip(cost)
            .map(|(&l, &c)| (l - lam * c - m).exp())
            .collect();
        let z: f64 = w.iter().sum();
        let mean: f64 = w.iter().zip(cost).map(|(a, c)| a * c).sum::<f64>() / z;
        let var: f64 = w
            .iter()
            .zip(cost)
            .map(|(a, c)| a * (c - mean) * (c - mean))
            .sum::<f64>()
            / z;
        (mean, var, m + z.ln(), w.into_iter().map(|v| v / z).collect())
    };
    let finish = |lam: f64, ln_norm: f64, pmf: Vec<f64>| {
        let logp = logw
            .iter()
            .zip(cost)
            .map(|(&l, &c)| (l - lam * c - ln_norm).max(LOG_MASS_FLOOR))
            .collect();
        (pmf, logp, lam)
    };
    let (m0, _, ln0, pmf0) = eval(0.0);
    if m0 <= p0 {
        return finish(0.0, ln0, pmf0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0 / p0;
    while eval(hi).0 > p0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut lam = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (m, v, ln_norm, pmf) = eval(lam);
        let err = m - p0;
        if err.abs() <= 1e-12 * p0 {
            return finish(lam, ln_norm, pmf);
        }
        if err > 0.0 {
            lo = lam;
        } else {
            hi = lam;
        }
        let newton = if v > 0.0 { lam + err / v } else { f64::NAN };
        lam = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let (_, _, ln_norm, pmf) = eval(hi);
    finish(hi, ln_norm, pmf)
}

/// Average mirror-image entries of a symmetric channel to remove rounding
/// asymmetry.
fn symmetrize(channel: &DiscreteChannel, v: &mut [f64]) {
    let n = v.len();
    let symmetric = channel
        .x_grid
        .iter()
        .zip(channel.x_grid.iter().rev())
        .all(|(a, b)| (a + b).abs() <= 1e-12 * (1.0 + a.abs()));
    if !symmetric || !matches!(channel.trans, Transition::Shift(_)) {
        return;
    }
    for i in 0..n / 2 {
        let m = 0.5 * (v[i] + v[n - 1 - i]);
        v[i] = m;
        v[n - 1 - i] = m;
    }
}

const MAX_RELAX: f64 = 64.0;

/// Blahut-Arimoto under `sum p(x) |x|^p <= P0`.
pub fn ba_capacity(
    channel: &DiscreteChannel,
    p: f64,
    p0: f64,
    opts: &BaOptions,
) -> Result<BaResult> {
    if !(p0 > 0.0) {
        return Err(Error::invalid("p0", format!("need P0 > 0, got {p0}")));
    }
    let cost: Vec<f64> = channel.x_grid.iter().map(|x| x.abs().powf(p)).collect();
    if cost.iter().cloned().fold(f64::INFINITY, f64::min) > p0 {
        return Err(Error::invalid("p0", "no input letter meets the budget"));
    }
    // start from the max-entropy law on the grid
    let start: Vec<f64> = cost.iter().map(|c| -c / (p * p0)).collect();
    let (mut pmf, mut logp, mut lambda) = constrained_pmf(&start, &cost, p0);
    let mut q = channel.output(&pmf);
    let mut d = channel.divergences(&q);
    let mut info = dot(&pmf, &d);
    let mut history = vec![info];
    let mut omega = 1.0;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        gap = duality_gap(&d, &cost, lambda, p0, info);
        if gap < opts.tol
            && support_deviation(&d, &cost, &pmf, lambda, p0, info) < opts.support_factor * opts.tol
        {
            break;
        }
        iterations += 1;
        let step = |w: f64| {
            let mut logw: Vec<f64> = logp.iter().zip(&d).map(|(&lp, &di)| lp + w * di).collect();
            symmetrize(channel, &mut logw);
            // the multiplier found scales w * (D - lambda c)
            let (np, nlp, lam) = constrained_pmf(&logw, &cost, p0);
            (np, nlp, lam / w)
        };
        let (mut np, mut nlp, mut nl) = step(omega);
        let mut nq = channel.output(&np);
        let mut nd = channel.divergences(&nq);
        let mut ninfo = dot(&np, &nd);
        if ninfo < info && omega > 1.0 {
            omega = 1.0;
            (np, nlp, nl) = step(1.0);
            nq = channel.output(&np);
            nd = channel.divergences(&nq);
            ninfo = dot(&np, &nd);
        } else if opts.relax {
            omega = (omega * 1.2).min(MAX_RELAX);
        }
        pmf = np;
        logp = nlp;
        lambda = nl;
        q = nq;
        d = nd;
        info = ninfo;
        history.push(info);
    }
    let _ = q;
    let moment = dot(&pmf, &cost);
    let mut result = BaResult {
        capacity: info,
        input_pmf: pmf,
        iterations,
        gap,
        kkt_residual: 0.0,
        lambda,
        moment,
        history,
    };
    result.kkt_residual = kkt_residual_with(&d, &cost, &result, p0);
    if gap >= opts.tol {
        return Err(Error::BaNonConvergence(Box::new(result)));
    }
    Ok(result)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let s: KahanSum = a.iter().zip(b).map(|(x, y)| x * y).collect();
    s.value()
}

fn duality_gap(d: &[f64], cost: &[f64], lambda: f64, p0: f64, info: f64) -> f64 {
    d.iter()
        .zip(cost)
        .map(|(&di, &c)| di - lambda * (c - p0))
        .fold(f64::NEG_INFINITY, f64::max)
        - info
}

/// Mass threshold for points counted as support.
pub const SUPPORT_MASS: f64 = 1e-6;

fn support_deviation(d: &[f64], cost: &[f64], pmf: &[f64], lambda: f64, p0: f64, info: f64) -> f64 {
    d.iter()
        .zip(cost)
        .zip(pmf)
        .filter(|(_, &pi)| pi > SUPPORT_MASS)
        .map(|((&di, &c), _)| (info + lambda * (c - p0) - di).abs())
        .fold(0.0, f64::max)
}

fn kkt_residual_with(d: &[f64], cost: &[f64], r: &BaResult, p0: f64) -> f64 {
    let min_k = d
        .iter()
        .zip(cost)
        .map(|(&di, &c)| r.capacity + r.lambda * (c - p0) - di)
        .fold(f64::INFINITY, f64::min);
    (-min_k).max(0.0) + support_deviation(d, cost, &r.input_pmf, r.lambda, p0, r.capacity)
}

/// KKT residual of `result` on `channel`: with
/// `K(x) = C + lambda (|x|^p - P0) - D(x)`, returns
/// `max(0, -min K) + max |K|` over points of mass above [`SUPPORT_MASS`].
///
/// With `h_nm = None`, `D` uses the exact row entropies of the channel. With a
/// value, `D(x) = -sum_y W ln(q / step) - h_nm`, which also exposes the
/// discretization bias of the channel relative to the continuous noise.
pub fn kkt_residual(
    channel: &DiscreteChannel,
    result: &BaResult,
    p: f64,
    p0: f64,
    h_nm: Option<f64>,
) -> f64 {
    let cost: Vec<f64> = channel.x_grid.iter().map(|x| x.abs().powf(p)).collect();
    let q = channel.output(&result.input_pmf);
    let mut d = channel.divergences(&q);
    if let Some(h) = h_nm {
        for (di, he) in d.iter_mut().zip(channel.row_entropies()) {
            // D = -H(row) - sum W ln q  ->  swap H(row) for h - ln step
            *di += he - (h - channel.step.ln());
        }
    }
    kkt_residual_with(&d, &cost, result, p0)
}

/// Options for a GSNR sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub ba: BaOptions,
    pub grid: DiscretizeOptions,
    /// Above this GSNR the step is tied to the noise interquartile width.
    pub override_gsnr_db: f64,
    /// Step = IQR / this above the override GSNR; at any GSNR the point cap
    /// may not coarsen the step beyond it.
    pub iqr_divisor: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            ba: BaOptions::default(),
            grid: DiscretizeOptions::default(),
            override_gsnr_db: 25.0,
            iqr_divisor: 8.0,
        }
    }
}

/// Interquartile width of the noise.
pub fn interquartile_width(model: &NoiseModel) -> Result<f64> {
    // central mass 0.5 at the upper quartile
    Ok(2.0 * truncation_point_mass(model, 0.5)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub gsnr_db: f64,
    pub p0: f64,
    pub step: f64,
    pub capacity: f64,
    pub capacity_bits: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub gap: f64,
    pub kkt_residual: f64,
}

pub fn capacity_at(model: &NoiseModel, p: f64, gsnr_db: f64, opts: &SweepOptions) -> Result<SweepPoint> {
    let p0 = gsnr_to_power(gsnr_db, model.p_moment(p)?);
    let mut grid = opts.grid;
    let iqr_step = interquartile_width(model)? / opts.iqr_divisor;
    if gsnr_db > opts.override_gsnr_db {
        grid.step = iqr_step;
    }
    grid.max_step = Some(grid.max_step.map_or(iqr_step, |m| m.min(iqr_step)));
    let ch = discretize_for_budget(model, p, p0, &grid)?;
    let r = ba_capacity(&ch, p, p0, &opts.ba)?;
    Ok(SweepPoint {
        gsnr_db,
        p0,
        step: ch.step,
        capacity: r.capacity,
        capacity_bits: crate::nats_to_bits(r.capacity),
        lambda: r.lambda,
        iterations: r.iterations,
        gap: r.gap,
        kkt_residual: r.kkt_residual,
    })
}

/// Capacity per GSNR point; points run in parallel, results keep input order.
pub fn capacity_sweep(
    params: &NoiseParams,
    p: f64,
    gsnr_list: &[f64],
    opts: &SweepOptions,
) -> Vec<Result<SweepPoint>> {
    let model = match NoiseModel::new(*params) {
        Ok(m) => m,
        Err(e) => {
            let msg = e.to_string();
            return gsnr_list
                .iter()
                .map(|_| Err(Error::invalid("noise", msg.clone())))
                .collect();
        }
    };
    gsnr_list
        .par_iter()
        .map(|&g| capacity_at(&model, p, g, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::quad::{integrate, QuadOptions};

    fn gauss() -> NoiseModel {
        NoiseModel::new(NoiseParams::gaussian(0.5).unwrap()).unwrap()
    }

    #[test]
    fn gaussian_truncation_point() {
        let nt = truncation_point(&gauss()).unwrap();
        // two-sided 99.9% point of N(0, 1)
        assert!((nt - 3.290_526_731_491_9).abs() < 1e-9, "{nt}");
    }

    #[test]
    fn truncation_mass_window() {
        for (a, c1) in [(1.2, 0.0), (1.2, 0.5), (1.5, 0.5), (1.9, 0.3)] {
            let m = NoiseModel::new(NoiseParams::unit(a, c1).unwrap()).unwrap();
            let nt = truncation_point(&m).unwrap();
            let mass = m.central_mass(nt).unwrap();
            assert!((0.999..=0.9995).contains(&mass), "{a} {c1}: {mass}");
        }
        let heavy = NoiseModel::new(NoiseParams::unit(1.2, 0.0).unwrap()).unwrap();
        assert!(truncation_point(&heavy).unwrap() > 10.0 * truncation_point(&gauss()).unwrap());
    }

    #[test]
    fn single_input_row_is_binned_noise() {
        let m = NoiseModel::new(NoiseParams::unit(1.5, 0.5).unwrap()).unwrap();
        let ch = discretize(&m, 0.0, &DiscretizeOptions::default()).unwrap();
        assert_eq!(ch.nx(), 1);
        let row = ch.row(0);
        let s: f64 = row.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        let norm = ch.row_norms()[0];
        let y = ch.y_grid();
        for j in (0..ch.ny).step_by(97) {
            let h = ch.step / 2.0;
            let bin = integrate(|t| m.pdf(t), y[j] - h, y[j] + h, QuadOptions::default()).value;
            assert!((row[j] * norm - bin).abs() < 1e-4 * ch.step.max(bin), "{j}");
            assert!((row[j] * norm - bin).abs() < 1e-4);
        }
    }

    #[test]
    fn rows_stochastic_and_grid_symmetric() {
        let m = NoiseModel::new(NoiseParams::unit(1.5, 0.5).unwrap()).unwrap();
        let opts = DiscretizeOptions {
            step: 0.05,
            ..Default::default()
        };
        let ch = discretize(&m, 3.0, &opts).unwrap();
        let n = ch.nx();
        for i in [0, n / 3, n / 2, n - 1] {
            let s: f64 = ch.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        for (a, b) in ch.x_grid.iter().zip(ch.x_grid.iter().rev()) {
            assert!((a + b).abs() < 1e-12);
        }
        let y = ch.y_grid();
        let xmax = ch.x_grid[n - 1];
        assert!(y[ch.ny - 1] >= ch.n_t + xmax - 1e-9 && y[ch.ny - 1] < ch.n_t + xmax + ch.step);
        assert!((y[0] + y[ch.ny - 1]).abs() < 1e-9);
    }

    #[test]
    fn fft_ops_match_dense() {
        let m = NoiseModel::new(NoiseParams::unit(1.5, 0.5).unwrap()).unwrap();
        let opts = DiscretizeOptions {
            step: 0.2,
            ..Default::default()
        };
        for extent in [KernelExtent::Truncated, KernelExtent::Window] {
            let ch = discretize(&m, 4.0, &DiscretizeOptions { extent, ..opts }).unwrap();
            let dense = DiscreteChannel::from_matrix(
                ch.x_grid.clone(),
                (0..ch.nx()).map(|i| ch.row(i)).collect(),
            )
            .unwrap();
            let n = ch.nx();
            let p: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7).sin().abs()).collect();
            let z: f64 = p.iter().sum();
            let p: Vec<f64> = p.iter().map(|v| v / z).collect();
            let (qa, qb) = (ch.output(&p), dense.output(&p));
            for (a, b) in qa.iter().zip(&qb) {
                assert!((a - b).abs() < 1e-14);
            }
            let (da, db) = (ch.divergences(&qa), dense.divergences(&qb));
            for (a, b) in da.iter().zip(&db) {
                assert!((a - b).abs() < 1e-10, "{a} {b}");
            }
        }
    }

    #[test]
    fn coarse_step_is_a_resolution_error() {
        let opts = DiscretizeOptions {
            step: 2.5,
            ..Default::default()
        };
        assert!(matches!(discretize(&gauss(), 2.0, &opts), Err(Error::Resolution(_))));
    }

    #[test]
    fn noiseless_binary_channel() {
        let ch = DiscreteChannel::from_matrix(vec![-1.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap();
        let r = ba_capacity(&ch, 2.0, 10.0, &BaOptions::default()).unwrap();
        assert!((r.capacity - 2f64.ln()).abs() < 1e-9);
        assert_eq!(r.lambda, 0.0);
    }

    #[test]
    fn bsc_capacity() {
        let e: f64 = 0.1;
        let ch = DiscreteChannel::from_matrix(
            vec![-1.0, 1.0],
            vec![vec![1.0 - e, e], vec![e, 1.0 - e]],
        )
        .unwrap();
        let r = ba_capacity(&ch, 2.0, 10.0, &BaOptions { tol: 1e-12, ..Default::default() }).unwrap();
        let hb = -e * e.ln() - (1.0 - e) * (1.0 - e).ln();
        assert!((r.capacity - (2f64.ln() - hb)).abs() < 1e-10);
    }

    #[test]
    fn binding_constraint_on_a_small_channel() {
        // three letters, only the outer ones cost anything
        let ch = DiscreteChannel::from_matrix(
            vec![-1.0, 0.0, 1.0],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        let r = ba_capacity(&ch, 2.0, 0.2, &BaOptions { tol: 1e-12, ..Default::default() }).unwrap();
        // p = (0.1, 0.8, 0.1)
        let want = -(0.8f64 * 0.8f64.ln() + 0.2 * 0.1f64.ln());
        assert!((r.capacity - want).abs() < 1e-9);
        assert!((r.moment - 0.2).abs() < 1e-10);
        assert!(r.lambda > 0.0);
    }

    #[test]
    fn gaussian_channel_matches_shannon() {
        let m = gauss();
        let grid = DiscretizeOptions {
            step: 0.02,
            ..Default::default()
        };
        for &snr_db in &[0.0, 10.0] {
            let snr = 10f64.powf(snr_db / 10.0);
            let ch = discretize_for_budget(&m, 2.0, snr, &grid).unwrap();
            let r = ba_capacity(&ch, 2.0, snr, &BaOptions::default()).unwrap();
            assert!((r.capacity - 0.5 * snr.ln_1p()).abs() < 0.01, "{snr_db}: {}", r.capacity);
            assert!(r.max_decrease() <= 1e-12, "{}", r.max_decrease());
            assert!(r.moment <= snr * (1.0 + 1e-6));
            assert!((r.input_pmf.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(r.kkt_residual < 10.0 * BaOptions::default().tol, "{}", r.kkt_residual);
            let n = r.input_pmf.len();
            for i in 0..n / 2 {
                assert!((r.input_pmf[i] - r.input_pmf[n - 1 - i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn kkt_separates_optimum_from_perturbed() {
        let m = gauss();
        let grid = DiscretizeOptions {
            step: 0.05,
            ..Default::default()
        };
        let ch = discretize_for_budget(&m, 2.0, 1.0, &grid).unwrap();
        let r = ba_capacity(&ch, 2.0, 1.0, &BaOptions::default()).unwrap();
        let k0 = kkt_residual(&ch, &r, 2.0, 1.0, None);
        assert!((k0 - r.kkt_residual).abs() < 1e-9);
        let mut bad = r.clone();
        let n = bad.input_pmf.len();
        // move 10% of the mass to the centre
        let moved: f64 = bad.input_pmf.iter().map(|v| 0.1 * v).sum();
        for v in bad.input_pmf.iter_mut() {
            *v *= 0.9;
        }
        bad.input_pmf[n / 2] += moved;
        assert!(kkt_residual(&ch, &bad, 2.0, 1.0, None) > k0);
    }
}
