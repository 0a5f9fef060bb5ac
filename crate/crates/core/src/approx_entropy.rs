//! Two-piece approximation of the mixed density and its entropy.
//!
//! Below the split point `n0` only the Gaussian kernel is kept, scaled to
//! the density peak; above it only the algebraic tail:
//!
//! `f^(n) = g0/I exp(-n^2/(4 gamma_sg))` for `|n| < n0`,
//! `f^(n) = K / (|n|^a + c2)` otherwise.
//!
//! `n0` is where the two pieces meet, which is also where the KL divergence
//! from the exact density is stationary.

use std::f64::consts::{E, PI};

use crate::noise_model::{geometric_breaks, NoiseModel, TailTerm};
use crate::special_fn::quad::{self, QuadOptions};
use crate::special_fn::{
    digamma, gauss_2f1, gaussian_tail, hyper_3f2, tail_integral, tail_partial_integral,
    QConvention,
};
use crate::{Error, Result};

/// Convention used for the Gaussian-tail bracket of the closed-form entropy.
pub const PINNED_Q: QConvention = QConvention::Standard;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxModel {
    pub model: NoiseModel,
    pub n0: f64,
    /// `n0^(alpha+1) + c2`
    pub kappa: f64,
}

/// `ln(c2 (1-c1)) - ln(n^a + c2) + n^2/(4 gamma_sg)`; zero exactly where the
/// Gaussian and tail pieces are equal.
pub fn split_residual(model: &NoiseModel, n: f64) -> f64 {
    match model.consts.tail {
        Some(t) => {
            (t.c2 * (1.0 - model.params.c1)).ln() - (n.powf(t.a) + t.c2).ln()
                + n * n / (4.0 * model.params.gamma_sg)
        }
        None => f64::NAN,
    }
}

fn mixed_tail(model: &NoiseModel) -> Result<TailTerm> {
    let c1 = model.params.c1;
    match model.consts.tail {
        Some(t) if c1 > 0.0 && c1 < 1.0 => Ok(t),
        _ => Err(Error::DegenerateModel(format!(
            "split point needs both components, got c1 = {c1}, alpha = {}",
            model.params.alpha
        ))),
    }
}

/// First sign change of [`split_residual`] on a log grid over `[1e-6, 1e3]`
/// (widened upward if needed), refined by bisection.
pub fn solve_n0(model: &NoiseModel) -> Result<f64> {
    mixed_tail(model)?;
    let f = |n: f64| split_residual(model, n);
    let per_decade = 200;
    let mut roots = Vec::new();
    let mut hi_exp = 3.0;
    let mut lo_exp = -6.0;
    while roots.is_empty() && hi_exp <= 12.0 {
        let steps = ((hi_exp - lo_exp) * per_decade as f64) as usize;
        let mut x_prev = 10f64.powf(lo_exp);
        let mut f_prev = f(x_prev);
        for i in 1..=steps {
            let x = 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / steps as f64);
            let fx = f(x);
            if f_prev.signum() != fx.signum() {
                roots.push((x_prev, x));
            }
            x_prev = x;
            f_prev = fx;
        }
        lo_exp = hi_exp;
        hi_exp += 3.0;
    }
    let &(mut lo, mut hi) = roots.first().ok_or_else(|| {
        Error::Convergence {
            what: "split point bracket".into(),
            terms: 0,
        }
    })?;
    if roots.len() > 1 {
        log::warn!(
            "split equation has {} sign changes; using the smallest root",
            roots.len()
        );
    }
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid).signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl ApproxModel {
    pub fn new(model: NoiseModel) -> Result<Self> {
        let t = mixed_tail(&model)?;
        let n0 = solve_n0(&model)?;
        Ok(Self {
            model,
            n0,
            kappa: n0.powf(t.a) + t.c2,
        })
    }

    /// Same model with the split moved to `n0`, for sensitivity checks.
    pub fn with_split(model: NoiseModel, n0: f64) -> Result<Self> {
        let t = mixed_tail(&model)?;
        Ok(Self {
            model,
            n0,
            kappa: n0.powf(t.a) + t.c2,
        })
    }

    fn tail(&self) -> TailTerm {
        // constructors guarantee a tail
        self.model.consts.tail.expect("approximation without tail term")
    }

    pub fn gauss_branch(&self, n: f64) -> f64 {
        self.model.peak() * (-n * n / (4.0 * self.model.params.gamma_sg)).exp()
    }

    pub fn tail_branch(&self, n: f64) -> f64 {
        let t = self.tail();
        t.k / (n.abs().powf(t.a) + t.c2)
    }

    pub fn pdf(&self, n: f64) -> f64 {
        if n.abs() < self.n0 {
            self.gauss_branch(n)
        } else {
            self.tail_branch(n)
        }
    }

    /// Total mass of the approximation; close to but not exactly 1.
    pub fn mass(&self) -> Result<f64> {
        let t = self.tail();
        let g = self.model.params.gamma_sg;
        let gauss = 2.0 * self.model.peak() * (PI * g).sqrt()
            * crate::special_fn::erf(self.n0 / (2.0 * g.sqrt()));
        let tail = 2.0 * t.k
            * (tail_integral(0.0, t.c2, t.a)? - tail_partial_integral(self.n0, t.c2, t.a)?);
        Ok(gauss + tail)
    }

    /// Closed-form `-int f^ ln f^` with the pinned Gaussian-tail convention.
    pub fn entropy_closed(&self) -> Result<f64> {
        self.entropy_closed_with(PINNED_Q)
    }

    /// Closed-form entropy with the `1 - 2 Q(n0/sqrt(2 gamma_sg))` bracket
    /// evaluated under the given convention.
    pub fn entropy_closed_with(&self, conv: QConvention) -> Result<f64> {
        let t = self.tail();
        let g = self.model.params.gamma_sg;
        let alpha = self.model.params.alpha;
        let peak = self.model.peak();
        let n0 = self.n0;
        let a = t.a;

        let bracket = 1.0 - 2.0 * gaussian_tail(n0 / (2.0 * g).sqrt(), conv);
        let first = -peak
            * (n0 * (-n0 * n0 / (4.0 * g)).exp()
                + (2.0 * peak.ln() - 1.0) * (PI * g).sqrt() * bracket);

        // int_{n0}^inf dn / (n^a + c2)
        let tail_mass = (t.c2.powf(1.0 / a)
            * crate::special_fn::gamma_fn(alpha / a)?
            * crate::special_fn::gamma_fn((alpha + 2.0) / a)?
            - n0 * gauss_2f1(1.0, 1.0 / a, 1.0 + 1.0 / a, -n0.powf(a) / t.c2)?)
            / t.c2;

        // int_{n0}^inf ln(n^a + c2) / (n^a + c2) dn
        let b = alpha / a;
        let z = t.c2 / self.kappa;
        if !(z < 1.0) {
            return Err(Error::Domain(format!("3F2 argument c2/kappa = {z} must be below 1")));
        }
        let kb = self.kappa.powf(-b);
        let log_part = (1.0 / a)
            * (1.0 / b)
            * (self.kappa.ln() * kb * gauss_2f1(b, b, 1.0 + b, z)?
                + kb / b * hyper_3f2(b, b, b, 1.0 + b, 1.0 + b, z)?);

        Ok(first - 2.0 * t.k.ln() * t.k * tail_mass + 2.0 * t.k * log_part)
    }

    /// `-int f^ ln f^` by quadrature.
    pub fn entropy_numeric(&self) -> Result<f64> {
        let t = self.tail();
        let opts = EntropyOptions {
            scale: self.model.params.gamma_sg.sqrt(),
            breaks: vec![self.n0],
            tail: TailHint::PowerLaw { k: t.k, a: t.a },
            check_mass: false,
        };
        entropy_numeric(|x| self.pdf(x), &opts)
    }

    /// KL divergence from the exact density to the approximation rescaled
    /// to unit mass. Non-negative.
    pub fn kld(&self) -> Result<f64> {
        Ok(self.split_objective() + self.mass()?.ln())
    }

    /// `int f ln(f / f^)` with the approximation left unnormalized. This is
    /// the objective whose derivative in `n0` vanishes at the split point; it
    /// can go slightly negative because `f^` does not integrate to 1.
    pub fn split_objective(&self) -> f64 {
        let m = &self.model;
        let x_max = self.n0 + 80.0 * m.params.gamma_sg.sqrt();
        let g = |x: f64| {
            let f = m.pdf(x);
            let q = self.pdf(x);
            if f > 0.0 && q > 0.0 {
                f * (f / q).ln()
            } else {
                0.0
            }
        };
        let mut breaks = geometric_breaks(m.params.gamma_sg.sqrt().min(self.n0), x_max);
        breaks.push(self.n0);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        2.0 * quad::integrate_breaks(g, &breaks, QuadOptions::precise()).value
    }
}

/// Residual of each Gaussian-tail convention against the quadrature oracle
/// across a set of models, and the convention with the smallest RMS.
#[derive(Debug, Clone, PartialEq)]
pub struct QPinning {
    pub chosen: QConvention,
    pub rms: Vec<(QConvention, f64)>,
    pub max_abs: Vec<(QConvention, f64)>,
}

pub fn pin_entropy_convention(models: &[ApproxModel]) -> Result<QPinning> {
    let mut numeric = Vec::with_capacity(models.len());
    for m in models {
        numeric.push(m.entropy_numeric()?);
    }
    let mut rms = Vec::new();
    let mut max_abs = Vec::new();
    for conv in QConvention::ALL {
        let mut s2 = 0.0;
        let mut mx: f64 = 0.0;
        for (m, h) in models.iter().zip(&numeric) {
            let d = m.entropy_closed_with(conv)? - h;
            s2 += d * d;
            mx = mx.max(d.abs());
        }
        rms.push((conv, (s2 / models.len() as f64).sqrt()));
        max_abs.push((conv, mx));
    }
    let chosen = rms
        .iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|x| x.0)
        .unwrap_or(PINNED_Q);
    Ok(QPinning {
        chosen,
        rms,
        max_abs,
    })
}

/// Entropy of the noise in nats from closed forms: Gaussian, pure
/// impulsive, or the two-piece approximation for the mixed case.
pub fn noise_entropy_closed(model: &NoiseModel) -> Result<f64> {
    match model.consts.tail {
        None => Ok(0.5 * (4.0 * PI * E * model.params.gamma_sg).ln()),
        Some(t) if model.params.c1 == 0.0 => Ok(pure_impulsive_entropy(&t)),
        Some(_) => ApproxModel::new(*model)?.entropy_closed(),
    }
}

/// `-int f ln f` for `f = K / (|n|^a + c2)`:
/// `ln(c2/K) + psi(1) - psi(1 - 1/a)`.
pub fn pure_impulsive_entropy(t: &TailTerm) -> f64 {
    (t.c2 / t.k).ln() + digamma(1.0) - digamma(1.0 - 1.0 / t.a)
}

/// Entropy of the exact density by quadrature.
pub fn noise_entropy_numeric(model: &NoiseModel) -> Result<f64> {
    let tail = match model.consts.tail {
        Some(t) => TailHint::PowerLaw { k: t.k, a: t.a },
        None => TailHint::Fast,
    };
    let opts = EntropyOptions {
        scale: model.params.gamma_sg.sqrt(),
        breaks: Vec::new(),
        tail,
        check_mass: true,
    };
    entropy_numeric(|x| model.pdf(x), &opts)
}

/// How the density behaves beyond the quadrature window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailHint {
    /// Decays faster than any power; the window is grown until the density
    /// is negligible.
    Fast,
    /// `f(x) ~ k / x^a` for large `x`.
    PowerLaw { k: f64, a: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyOptions {
    /// Rough width of the density's core.
    pub scale: f64,
    /// Extra break points on `(0, inf)`, e.g. kinks.
    pub breaks: Vec<f64>,
    pub tail: TailHint,
    /// Reject densities whose mass differs from 1 by more than 1e-6.
    pub check_mass: bool,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        Self {
            scale: 1.0,
            breaks: Vec::new(),
            tail: TailHint::Fast,
            check_mass: true,
        }
    }
}

/// `-int f ln f` for a symmetric density: twice the integral over
/// `[0, T]`, plus the analytic power-law tail beyond `T` when hinted.
pub fn entropy_numeric(f: impl Fn(f64) -> f64, opts: &EntropyOptions) -> Result<f64> {
    let neg_f_ln_f = |x: f64| {
        let v = f(x);
        if v > 0.0 {
            -v * v.ln()
        } else {
            0.0
        }
    };
    let (x_max, tail_h, tail_m) = match opts.tail {
        TailHint::Fast => {
            let peak = f(0.0).max(f(opts.scale));
            let mut x = opts.scale.max(f64::MIN_POSITIVE);
            while f(x) > 1e-40 * peak && x < 1e12 {
                x *= 1.5;
            }
            (x, 0.0, 0.0)
        }
        TailHint::PowerLaw { k, a } => {
            // two-sided mass beyond T below 1e-9
            let t = (2.0 * k / ((a - 1.0) * 1e-9)).powf(1.0 / (a - 1.0)).max(10.0 * opts.scale);
            let p = t.powf(1.0 - a) / (a - 1.0);
            let h = -k * k.ln() * p + a * k * (t.ln() * p + p / (a - 1.0));
            (t, h, k * p)
        }
    };
    let mut breaks = geometric_breaks(opts.scale.min(x_max), x_max);
    breaks.extend(opts.breaks.iter().copied().filter(|&b| b > 0.0 && b < x_max));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let h = quad::integrate_breaks(neg_f_ln_f, &breaks, QuadOptions::precise()).value + tail_h;
    if opts.check_mass {
        let m = quad::integrate_breaks(&f, &breaks, QuadOptions::precise()).value + tail_m;
        if (2.0 * m - 1.0).abs() > 1e-6 {
            return Err(Error::InconsistentDensity { mass: 2.0 * m });
        }
    }
    Ok(2.0 * h)
}
