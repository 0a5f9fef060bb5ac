//! Closed-form capacity bounds under the moment constraint `E|X|^p <= P0`.
//!
//! * `L1 = h(Y) - h(N)` with a mixed-model input whose output is refitted to
//!   the mixed family.
//! * `L2 = 1/2 ln(1 + exp(2 (h(X) - h(N))))` with the maximum-entropy input
//!   `exp(lambda0 + lambda1 |x|^p)`.
//! * `U` from the duality bound with a generalized Gaussian output.
//! * `C_inf`, the large-`P0` limit both `L2` and `U` approach.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::approx_entropy::{noise_entropy_closed, noise_entropy_numeric};
use crate::noise_model::{check_moment_order, gsnr_to_power, NoiseModel, NoiseParams};
use crate::special_fn::{gamma_fn, ln_gamma};
use crate::{Error, Result};

/// `f_X(x) = exp(lambda0 + lambda1 |x|^p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxEntInput {
    pub p: f64,
    pub p0: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    /// Differential entropy of the input, nats.
    pub h_x: f64,
}

impl MaxEntInput {
    pub fn new(p: f64, p0: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::invalid("p", format!("need p >= 1, got {p}")));
        }
        if !(p0 > 0.0 && p0.is_finite()) {
            return Err(Error::invalid("p0", format!("need P0 > 0, got {p0}")));
        }
        let lambda0 = (p - 1.0) / p * p.ln() - p0.ln() / p - (2.0f64.ln() + ln_gamma(1.0 / p)?);
        Ok(Self {
            p,
            p0,
            lambda0,
            lambda1: -1.0 / (p * p0),
            h_x: -lambda0 + 1.0 / p,
        })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (self.lambda0 + self.lambda1 * x.abs().powf(self.p)).exp()
    }
}

pub fn max_entropy_input(p: f64, p0: f64) -> Result<MaxEntInput> {
    MaxEntInput::new(p, p0)
}

pub fn lower_l2(maxent: &MaxEntInput, h_nm: f64) -> f64 {
    let d = 2.0 * (maxent.h_x - h_nm);
    // ln(1 + e^d) without overflow
    0.5 * if d > 30.0 { d + (-d).exp().ln_1p() } else { d.exp().ln_1p() }
}

/// `-ln(p/(2 Gamma(1/p)))`
fn ln_norm(p: f64) -> Result<f64> {
    Ok((2.0 * gamma_fn(1.0 / p)? / p).ln())
}

/// `U = -ln(p/(2 Gamma(1/p))) + ln(P0^(1/p) + m^(1/p)) + 1/p + ln(p)/p - h(N)`
/// where `m = E|N|^p`.
pub fn upper_u(p: f64, p0: f64, noise_p_moment: f64, h_nm: f64) -> Result<f64> {
    Ok(ln_norm(p)? + (p0.powf(1.0 / p) + noise_p_moment.powf(1.0 / p)).ln()
        + 1.0 / p
        + p.ln() / p
        - h_nm)
}

/// `C_inf = -ln(p/(2 Gamma(1/p))) + (ln(p P0) + 1)/p - h(N)`
pub fn asymptotic_capacity(p: f64, p0: f64, h_nm: f64) -> Result<f64> {
    Ok(ln_norm(p)? + ((p * p0).ln() + 1.0) / p - h_nm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapDeltaB {
    /// `U - L2`
    pub exact: f64,
    /// Large-`P0` form with `U` replaced by its `P0 >> m` limit and `L2` by
    /// `h(X) - h(N)`. Algebraically zero.
    pub asymptotic: f64,
    /// The large-`P0` form with `-h(N)` missing from the `U` part; equals
    /// `h(N)`. Reported for comparison only.
    pub asymptotic_printed: f64,
}

pub fn gap_delta_b(
    p: f64,
    p0: f64,
    noise_p_moment: f64,
    maxent: &MaxEntInput,
    h_nm: f64,
) -> Result<GapDeltaB> {
    let u = upper_u(p, p0, noise_p_moment, h_nm)?;
    let l2 = lower_l2(maxent, h_nm);
    let u_inf_printed = ln_norm(p)? + p0.ln() / p + p.ln() / p + 1.0 / p;
    let l2_inf = 1.0 / p - maxent.lambda0 - h_nm;
    Ok(GapDeltaB {
        exact: u - l2,
        asymptotic: (u_inf_printed - h_nm) - l2_inf,
        asymptotic_printed: u_inf_printed - l2_inf,
    })
}

/// Which value of `h(N)` the bounds use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntropySource {
    /// Quadrature of the exact density.
    #[default]
    Numeric,
    /// Closed form of the two-piece approximation.
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSet {
    pub p: f64,
    pub p0: f64,
    /// `None` unless the matched-input fit was requested.
    pub l1: Option<f64>,
    pub l2: f64,
    pub u: f64,
    pub c_asymptotic: f64,
    /// `h(N)` used above.
    pub h_nm: f64,
    /// Closed-form `h(N)`, for comparison.
    pub h_nm_closed: f64,
    pub gap: GapDeltaB,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundOptions {
    pub entropy: EntropySource,
    pub l1_fit: Option<FitOptions>,
}

/// Noise entropies, closed and numeric, computed once per model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseEntropy {
    pub numeric: f64,
    pub closed: f64,
}

impl NoiseEntropy {
    pub fn of(model: &NoiseModel) -> Result<Self> {
        Ok(Self {
            numeric: noise_entropy_numeric(model)?,
            closed: noise_entropy_closed(model)?,
        })
    }

    pub fn pick(&self, src: EntropySource) -> f64 {
        match src {
            EntropySource::Numeric => self.numeric,
            EntropySource::Closed => self.closed,
        }
    }
}

pub fn compute_bounds(
    model: &NoiseModel,
    p: f64,
    p0: f64,
    h: &NoiseEntropy,
    opts: &BoundOptions,
) -> Result<BoundSet> {
    check_moment_order(model, p)?;
    let m = model.p_moment(p)?;
    let h_nm = h.pick(opts.entropy);
    let maxent = MaxEntInput::new(p, p0)?;
    let l1 = match &opts.l1_fit {
        Some(fo) => {
            let input = matched_input(&model.params, p, p0, None)?;
            let fit = fit_output_params(&model.params, &input, fo)?;
            Some(lower_l1(&fit, model, opts.entropy)?)
        }
        None => None,
    };
    Ok(BoundSet {
        p,
        p0,
        l1,
        l2: lower_l2(&maxent, h_nm),
        u: upper_u(p, p0, m, h_nm)?,
        c_asymptotic: asymptotic_capacity(p, p0, h_nm)?,
        h_nm,
        h_nm_closed: h.closed,
        gap: gap_delta_b(p, p0, m, &maxent, h_nm)?,
    })
}

/// Golden-section search of `U` over `p in [1, alpha - 0.01]` at fixed GSNR,
/// so that `P0 = 10^(gsnr/10) E|N|^p` moves with `p`. Returns `(p, U)`.
pub fn optimize_u_over_p(model: &NoiseModel, gsnr_db: f64, h_nm: f64) -> Result<(f64, f64)> {
    let hi = if model.consts.is_gaussian() {
        2.0
    } else {
        model.params.alpha - 0.01
    };
    let u_at = |p: f64| -> Result<f64> {
        let m = model.p_moment(p)?;
        upper_u(p, gsnr_to_power(gsnr_db, m), m, h_nm)
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1.0, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = u_at(c)?;
    let mut fd = u_at(d)?;
    while b - a > 1e-6 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = u_at(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = u_at(d)?;
        }
    }
    // the minimum may sit on an end point
    let mut best = (0.5 * (a + b), u_at(0.5 * (a + b))?);
    for p in [1.0, hi] {
        let u = u_at(p)?;
        if u < best.1 {
            best = (p, u);
        }
    }
    Ok(best)
}

/// Output parameters of `Y = X + N` for a mixed-model input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedOutputFit {
    pub alpha: f64,
    pub gamma_ys: f64,
    pub gamma_yg: f64,
    pub c_y1: f64,
    pub gamma_ysg: f64,
    /// KL divergence from the Monte Carlo histogram of `Y` to the fitted
    /// density, nats.
    pub fit_residual: f64,
    pub accepted: bool,
}

impl MatchedOutputFit {
    pub fn params(&self) -> Result<NoiseParams> {
        NoiseParams::new(self.alpha, self.gamma_ys, self.gamma_yg, self.c_y1, self.gamma_ysg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub samples: usize,
    pub seed: u64,
    /// Histogram bins on `[0, R]` for `|Y|`, plus one overflow bin.
    pub bins: usize,
    pub accept_residual: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 1,
            bins: 200,
            accept_residual: 0.01,
        }
    }
}

/// Mixed-model input with `E|X|^p = P0`: the noise law scaled by
/// `(P0 / E|N|^p)^(1/p)`, optionally with a different Gaussian weight.
pub fn matched_input(
    noise: &NoiseParams,
    p: f64,
    p0: f64,
    c1_override: Option<f64>,
) -> Result<NoiseParams> {
    let mut base = *noise;
    if let Some(c1) = c1_override {
        base.c1 = c1;
        base.validate()?;
    }
    let m = NoiseModel::new(base)?.p_moment(p)?;
    Ok(base.scaled((p0 / m).powf(1.0 / p)))
}

/// Stability rules for `gamma_ys`, `gamma_yg`; `(c_y1, gamma_ysg)` by
/// minimizing the KL divergence from a Monte Carlo histogram of `X + N`,
/// first on a 21 x 21 grid, then by Nelder-Mead.
pub fn fit_output_params(
    noise: &NoiseParams,
    input: &NoiseParams,
    opts: &FitOptions,
) -> Result<MatchedOutputFit> {
    if noise.alpha != input.alpha {
        return Err(Error::IncompatibleStability(input.alpha, noise.alpha));
    }
    let alpha = noise.alpha;
    let gamma_ys = (input.gamma_s.powf(alpha) + noise.gamma_s.powf(alpha)).powf(1.0 / alpha);
    let gamma_yg = (input.gamma_g.powi(2) + noise.gamma_g.powi(2)).sqrt();

    let nm = NoiseModel::new(*noise)?;
    let xm = NoiseModel::new(*input)?;
    let mut sx = xm.sampler(opts.seed)?;
    let mut sn = nm.sampler(opts.seed.wrapping_add(0x9e37_79b9))?;
    let mut abs_y: Vec<f64> = (0..opts.samples).map(|_| (sx.draw() + sn.draw()).abs()).collect();
    abs_y.sort_by(f64::total_cmp);
    let r = abs_y[((abs_y.len() as f64 * 0.999) as usize).min(abs_y.len() - 1)];
    let width = r / opts.bins as f64;
    let mut counts = vec![0usize; opts.bins + 1];
    for &y in &abs_y {
        let i = ((y / width) as usize).min(opts.bins);
        counts[i] += 1;
    }
    let n = abs_y.len() as f64;
    let emp: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();

    let gaussian = alpha == 2.0;
    let c1_max = if gaussian { 1.0 } else { 1.0 - 1e-9 };
    let objective = |c1: f64, ln_g: f64| -> f64 {
        let c1 = c1.clamp(0.0, c1_max);
        let c1 = if gaussian { 1.0 } else { c1 };
        let params = match NoiseParams::new(alpha, gamma_ys, gamma_yg, c1, ln_g.exp()) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let model = match NoiseModel::new(params) {
            Ok(m) => m,
            Err(_) => return f64::INFINITY,
        };
        let mut prev = 0.0;
        let mut kl = 0.0;
        for (i, &pe) in emp.iter().enumerate() {
            let edge = if i == opts.bins { f64::INFINITY } else { (i + 1) as f64 * width };
            let cm = if edge.is_finite() {
                match model.central_mass(edge) {
                    Ok(v) => v,
                    Err(_) => return f64::INFINITY,
                }
            } else {
                1.0
            };
            let q = (cm - prev).max(1e-300);
            prev = cm;
            if pe > 0.0 {
                kl += pe * (pe / q).ln();
            }
        }
        kl
    };

    let g_ref = input.gamma_sg + noise.gamma_sg;
    let (lo, hi) = ((0.5 * g_ref).ln(), (4.0 * g_ref).ln());
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let c1_grid: Vec<f64> = if gaussian {
        vec![1.0]
    } else {
        (0..21).map(|i| (i as f64 / 20.0).min(c1_max)).collect()
    };
    for &c1 in &c1_grid {
        for j in 0..21 {
            let lg = lo + (hi - lo) * j as f64 / 20.0;
            let v = objective(c1, lg);
            if v < best.0 {
                best = (v, c1, lg);
            }
        }
    }
    let step_c1 = if gaussian { 0.0 } else { 0.05 };
    let (x, fx) = nelder_mead_2d(
        |v| objective(v[0], v[1]),
        [best.1, best.2],
        [step_c1, (hi - lo) / 20.0],
        400,
        1e-10,
    );
    let c_y1 = if gaussian { 1.0 } else { x[0].clamp(0.0, c1_max) };
    Ok(MatchedOutputFit {
        alpha,
        gamma_ys,
        gamma_yg,
        c_y1,
        gamma_ysg: x[1].exp(),
        fit_residual: fx,
        accepted: fx < opts.accept_residual,
    })
}

/// `L1 = h(Y) - h(N)` for the fitted output law. `Closed` takes both
/// entropies from closed forms (Gaussian, pure impulsive or two-piece); the
/// two-piece approximation is not normalized, so its entropy grows like
/// `mass * ln(scale)` and the difference drifts at high power. `Numeric`
/// integrates both exact densities.
pub fn lower_l1(fit: &MatchedOutputFit, noise: &NoiseModel, source: EntropySource) -> Result<f64> {
    if !fit.accepted {
        return Err(Error::Resolution(format!(
            "output fit residual {:.3e} above the acceptance threshold",
            fit.fit_residual
        )));
    }
    let y = NoiseModel::new(fit.params()?)?;
    Ok(match source {
        EntropySource::Closed => noise_entropy_closed(&y)? - noise_entropy_closed(noise)?,
        EntropySource::Numeric => noise_entropy_numeric(&y)? - noise_entropy_numeric(noise)?,
    })
}

/// Minimal Nelder-Mead on two variables. Returns the best vertex and value.
fn nelder_mead_2d(
    f: impl Fn([f64; 2]) -> f64,
    start: [f64; 2],
    step: [f64; 2],
    max_iter: usize,
    f_tol: f64,
) -> ([f64; 2], f64) {
    let mut pts = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut vals = pts.map(&f);
    for _ in 0..max_iter {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        let (b, m, w) = (idx[0], idx[1], idx[2]);
        if (vals[w] - vals[b]).abs() <= f_tol {
            break;
        }
        let cen = [(pts[b][0] + pts[m][0]) / 2.0, (pts[b][1] + pts[m][1]) / 2.0];
        let at = |t: f64| [cen[0] + t * (pts[w][0] - cen[0]), cen[1] + t * (pts[w][1] - cen[1])];
        let xr = at(-1.0);
        let fr = f(xr);
        if fr < vals[b] {
            let xe = at(-2.0);
            let fe = f(xe);
            if fe < fr {
                pts[w] = xe;
                vals[w] = fe;
            } else {
                pts[w] = xr;
                vals[w] = fr;
            }
        } else if fr < vals[m] {
            pts[w] = xr;
            vals[w] = fr;
        } else {
            let xc = if fr < vals[w] { at(-0.5) } else { at(0.5) };
            let fc = f(xc);
            if fc < vals[w].min(fr) {
                pts[w] = xc;
                vals[w] = fc;
            } else {
                for i in [m, w] {
                    pts[i] = [
                        pts[b][0] + 0.5 * (pts[i][0] - pts[b][0]),
                        pts[b][1] + 0.5 * (pts[i][1] - pts[b][1]),
                    ];
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    let b = (0..3).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    (pts[b], vals[b])
}

/// Monte Carlo estimate of `E|X|^p` under a max-entropy input; used only as
/// an independent check in tests.
#[doc(hidden)]
pub fn maxent_moment_mc(me: &MaxEntInput, count: usize, seed: u64) -> f64 {
    // |X|^p ~ Gamma(1/p, p P0) for the generalized Gaussian
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = rand_distr::Gamma::new(1.0 / me.p, me.p * me.p0).expect("valid gamma");
    let mut s = 0.0;
    for _ in 0..count {
        let v: f64 = rand_distr::Distribution::sample(&g, &mut rng);
        let _sign: bool = rng.gen();
        s += v;
    }
    s / count as f64
}

/// Shannon capacity `1/2 ln(1 + snr)` in nats.
pub fn shannon(snr: f64) -> f64 {
    0.5 * snr.ln_1p()
}

/// Differential entropy of a Gaussian of variance `var`.
pub fn gaussian_entropy(var: f64) -> f64 {
    0.5 * (2.0 * PI * std::f64::consts::E * var).ln()
}
