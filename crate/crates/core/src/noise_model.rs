//! Mixed Gaussian-impulsive noise density
//!
//! `f(n) = g0/I * [c1 exp(-n^2/(4 gamma_sg)) + c2 (1-c1) / (|n|^(alpha+1) + c2)]`
//!
//! with `c2 = alpha gamma_s C_alpha / (g0 (1-c1))`, `C_alpha = Gamma(alpha)
//! sin(alpha pi/2) / pi` and `I` the normalizer. When the tail term is absent
//! (`c1 = 1` or `alpha = 2`) the density is the Gaussian of variance
//! `2 gamma_sg` and no tail constants exist.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::special_fn::quad::{self, QuadOptions};
use crate::special_fn::{erf, gamma_fn, tail_integral, tail_partial_integral, SQRT_PI};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub alpha: f64,
    pub gamma_s: f64,
    pub gamma_g: f64,
    pub c1: f64,
    pub gamma_sg: f64,
}

impl NoiseParams {
    pub fn new(alpha: f64, gamma_s: f64, gamma_g: f64, c1: f64, gamma_sg: f64) -> Result<Self> {
        let p = Self {
            alpha,
            gamma_s,
            gamma_g,
            c1,
            gamma_sg,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unit scales with the given exponent and Gaussian weight.
    pub fn unit(alpha: f64, c1: f64) -> Result<Self> {
        Self::new(alpha, 1.0, 1.0, c1, 1.0)
    }

    /// Gaussian noise with variance `2 gamma_sg`.
    pub fn gaussian(gamma_sg: f64) -> Result<Self> {
        Self::new(2.0, 1.0, 1.0, 1.0, gamma_sg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::invalid("alpha", format!("must lie in (0, 2], got {}", self.alpha)));
        }
        for (name, v) in [
            ("gamma_s", self.gamma_s),
            ("gamma_g", self.gamma_g),
            ("gamma_sg", self.gamma_sg),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.c1) {
            return Err(Error::invalid("c1", format!("must lie in [0, 1], got {}", self.c1)));
        }
        Ok(())
    }

    /// Parameters of `s * N` when `N` has these parameters.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            alpha: self.alpha,
            gamma_s: s.powf(self.alpha) * self.gamma_s,
            gamma_g: s * s * self.gamma_g,
            c1: self.c1,
            gamma_sg: s * s * self.gamma_sg,
        }
    }

    /// Flat `key = value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    fn fields(&self) -> [(&'static str, f64); 5] {
        [
            ("alpha", self.alpha),
            ("gamma_s", self.gamma_s),
            ("gamma_g", self.gamma_g),
            ("c1", self.c1),
            ("gamma_sg", self.gamma_sg),
        ]
    }

    /// Sets one field by name. Returns `Ok(false)` for keys that are not
    /// noise parameters so a caller can route them elsewhere.
    pub fn set_field(&mut self, key: &str, value: f64) -> Result<bool> {
        let slot = match key {
            "alpha" => &mut self.alpha,
            "gamma_s" => &mut self.gamma_s,
            "gamma_g" => &mut self.gamma_g,
            "c1" => &mut self.c1,
            "gamma_sg" => &mut self.gamma_sg,
            _ => return Ok(false),
        };
        *slot = value;
        Ok(true)
    }

    /// Parses flat `key = value` text. Blank lines, `#` comments and
    /// `[section]` headers are skipped; `p` and `gsnr_db` are accepted and
    /// returned separately.
    pub fn from_kv(text: &str) -> Result<(Self, KvExtras)> {
        let mut p = Self {
            alpha: f64::NAN,
            gamma_s: f64::NAN,
            gamma_g: f64::NAN,
            c1: f64::NAN,
            gamma_sg: f64::NAN,
        };
        let mut extras = KvExtras::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with('[') {
                continue;
            }
            let lineno = idx + 1;
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: lineno,
                field: line.to_string(),
                reason: "expected `key = value`".into(),
            })?;
            let k = k.trim();
            let v: f64 = v.trim().parse().map_err(|_| Error::Config {
                line: lineno,
                field: k.to_string(),
                reason: format!("`{}` is not a number", v.trim()),
            })?;
            match k {
                "p" => extras.p = Some(v),
                "gsnr_db" => extras.gsnr_db = Some(v),
                _ => {
                    if !p.set_field(k, v)? {
                        return Err(Error::Config {
                            line: lineno,
                            field: k.to_string(),
                            reason: "unknown key".into(),
                        });
                    }
                }
            }
        }
        for (k, v) in p.fields() {
            if v.is_nan() {
                return Err(Error::Config {
                    line: 0,
                    field: k.to_string(),
                    reason: "missing".into(),
                });
            }
        }
        p.validate()?;
        Ok((p, extras))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KvExtras {
    pub p: Option<f64>,
    pub gsnr_db: Option<f64>,
}

/// `K / (|n|^a + c2)` with `K = alpha gamma_s C_alpha / I` and `a = alpha + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailTerm {
    pub c2: f64,
    pub k: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub g0: f64,
    pub c_alpha: f64,
    pub i_norm: f64,
    /// `None` when the model is Gaussian and `c2` would be infinite.
    pub tail: Option<TailTerm>,
}

impl DerivedConstants {
    pub fn derive(params: &NoiseParams) -> Result<Self> {
        params.validate()?;
        let NoiseParams {
            alpha,
            gamma_s,
            gamma_g,
            c1,
            gamma_sg,
        } = *params;
        let g0 = (2f64.powf(-0.5 - 1.0 / alpha) * SQRT_PI * gamma_fn(1.0 / alpha)?
            / (alpha * (gamma_s.powf(2.0 / alpha) + gamma_g)))
            .sqrt()
            / PI;
        let c_alpha = if alpha == 2.0 {
            0.0
        } else {
            gamma_fn(alpha)? * (alpha * PI / 2.0).sin() / PI
        };
        let gaussian_only = c1 == 1.0 || alpha == 2.0;
        if gaussian_only {
            if c1 == 1.0 && alpha < 2.0 {
                log::warn!("c1 = 1 with alpha = {alpha} < 2: impulsive component has zero weight");
            } else if alpha == 2.0 && c1 < 1.0 {
                log::warn!("alpha = 2 with c1 = {c1} < 1: C_alpha vanishes, tail term dropped");
            }
            if c1 == 0.0 {
                return Err(Error::DegenerateModel(
                    "alpha = 2 and c1 = 0 leave no density component".into(),
                ));
            }
            let i_norm = 2.0 * c1 * g0 * (PI * gamma_sg).sqrt();
            return Ok(Self {
                g0,
                c_alpha,
                i_norm,
                tail: None,
            });
        }
        let a = alpha + 1.0;
        let c2 = alpha * gamma_s * c_alpha / (g0 * (1.0 - c1));
        let i_norm = 2.0 * c1 * g0 * (PI * gamma_sg).sqrt()
            + 2.0 * g0 * (1.0 - c1)
                * c2.powf(1.0 / a)
                * gamma_fn(alpha / a)?
                * gamma_fn((alpha + 2.0) / a)?;
        let k = alpha * gamma_s * c_alpha / i_norm;
        Ok(Self {
            g0,
            c_alpha,
            i_norm,
            tail: Some(TailTerm { c2, k, a }),
        })
    }

    pub fn c2(&self) -> Option<f64> {
        self.tail.map(|t| t.c2)
    }

    pub fn is_gaussian(&self) -> bool {
        self.tail.is_none()
    }
}

/// Parameters plus derived constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub params: NoiseParams,
    pub consts: DerivedConstants,
}

impl NoiseModel {
    pub fn new(params: NoiseParams) -> Result<Self> {
        Ok(Self {
            params,
            consts: DerivedConstants::derive(&params)?,
        })
    }

    /// Coefficient of the Gaussian kernel, `c1 g0 / I`.
    pub fn gauss_coef(&self) -> f64 {
        self.params.c1 * self.consts.g0 / self.consts.i_norm
    }

    /// `g0 / I`, the density at the origin and its supremum.
    pub fn peak(&self) -> f64 {
        self.consts.g0 / self.consts.i_norm
    }

    pub fn pdf(&self, n: f64) -> f64 {
        let n = n.abs();
        let mut v = if self.params.c1 > 0.0 {
            self.gauss_coef() * (-n * n / (4.0 * self.params.gamma_sg)).exp()
        } else {
            0.0
        };
        if let Some(t) = self.consts.tail {
            v += t.k / (n.powf(t.a) + t.c2);
        }
        v
    }

    /// Probability mass of the Gaussian component.
    pub fn gaussian_weight(&self) -> f64 {
        if self.params.c1 == 0.0 {
            return 0.0;
        }
        self.gauss_coef() * 2.0 * (PI * self.params.gamma_sg).sqrt()
    }

    /// `P(|N| <= x)` in closed form.
    pub fn central_mass(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        let g = self.params.gamma_sg;
        let mut m = if self.params.c1 > 0.0 {
            2.0 * self.gauss_coef() * (PI * g).sqrt() * erf(x / (2.0 * g.sqrt()))
        } else {
            0.0
        };
        if let Some(t) = self.consts.tail {
            m += 2.0 * t.k * tail_partial_integral(x, t.c2, t.a)?;
        }
        Ok(m)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        let h = 0.5 * self.central_mass(x.abs())?;
        Ok(if x >= 0.0 { 0.5 + h } else { 0.5 - h })
    }

    /// `E|N|^p`, closed form with the Gaussian term
    /// `(c1 g0/I) (4 gamma_sg)^((p+1)/2) Gamma((p+1)/2)`.
    pub fn p_moment(&self, p: f64) -> Result<f64> {
        self.moment_with_first(p, |coef, g| {
            Ok(coef * (4.0 * g).powf((p + 1.0) / 2.0) * gamma_fn((p + 1.0) / 2.0)?)
        })
    }

    /// The same moment with the Gaussian term written as
    /// `(c1 g0/I) (2 gamma_sg)^(p+1) Gamma((p+1)/2)`. Kept only so the
    /// validation report can show how far it is from quadrature.
    pub fn p_moment_printed(&self, p: f64) -> Result<f64> {
        self.moment_with_first(p, |coef, g| {
            Ok(coef * (2.0 * g).powf(p + 1.0) * gamma_fn((p + 1.0) / 2.0)?)
        })
    }

    fn moment_with_first(
        &self,
        p: f64,
        first: impl Fn(f64, f64) -> Result<f64>,
    ) -> Result<f64> {
        if !(p > 0.0) {
            return Err(Error::invalid("p", format!("moment order must be positive, got {p}")));
        }
        let mut m = 0.0;
        if self.params.c1 > 0.0 {
            m += first(self.gauss_coef(), self.params.gamma_sg)?;
        }
        if let Some(t) = self.consts.tail {
            if p >= self.params.alpha {
                return Err(Error::DivergentMoment {
                    p,
                    alpha: self.params.alpha,
                });
            }
            m += 2.0 * t.k * tail_integral(p, t.c2, t.a)?;
        }
        Ok(m)
    }

    /// `E|N|^p` by adaptive quadrature on `[0, 1e4]` plus the two leading
    /// terms of the power-law tail beyond.
    pub fn p_moment_quadrature(&self, p: f64) -> Result<f64> {
        if let Some(t) = self.consts.tail {
            if p >= self.params.alpha {
                return Err(Error::DivergentMoment {
                    p,
                    alpha: self.params.alpha,
                });
            }
            let x_max = 1e4;
            let body = self.integrate_abs(|x| x.powf(p) * self.pdf(x), x_max);
            let e1 = t.a - p - 1.0;
            let e2 = 2.0 * t.a - p - 1.0;
            let tail = t.k * (x_max.powf(-e1) / e1 - t.c2 * x_max.powf(-e2) / e2);
            Ok(2.0 * (body + tail))
        } else {
            let span = 40.0 * self.params.gamma_sg.sqrt();
            Ok(2.0 * self.integrate_abs(|x| x.powf(p) * self.pdf(x), span))
        }
    }

    /// `int_0^x_max g` with geometric break points, for integrands that
    /// span many scales.
    pub(crate) fn integrate_abs(&self, g: impl Fn(f64) -> f64, x_max: f64) -> f64 {
        let breaks = geometric_breaks(self.params.gamma_sg.sqrt().min(1.0), x_max);
        quad::integrate_breaks(g, &breaks, QuadOptions::precise()).value
    }

    pub fn sampler(&self, seed: u64) -> Result<Sampler> {
        Sampler::new(*self, seed)
    }

    /// `count` i.i.d. draws; deterministic in `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<f64>> {
        let mut s = self.sampler(seed)?;
        Ok((0..count).map(|_| s.draw()).collect())
    }
}

/// `[0, first, 2 first, 4 first, ..., x_max]`.
pub(crate) fn geometric_breaks(first: f64, x_max: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut x = first.min(x_max);
    while x < x_max {
        b.push(x);
        x *= 2.0;
    }
    b.push(x_max);
    b
}

/// `P0 = 10^(gsnr_db/10) * E|N|^p`.
pub fn gsnr_to_power(gsnr_db: f64, noise_p_moment: f64) -> f64 {
    10f64.powf(gsnr_db / 10.0) * noise_p_moment
}

/// Moment order, moment budget and the GSNR it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSpec {
    pub p: f64,
    pub p0: f64,
    pub gsnr_db: f64,
}

impl PowerSpec {
    pub fn from_gsnr(model: &NoiseModel, p: f64, gsnr_db: f64) -> Result<Self> {
        check_moment_order(model, p)?;
        Ok(Self {
            p,
            p0: gsnr_to_power(gsnr_db, model.p_moment(p)?),
            gsnr_db,
        })
    }
}

/// `1 <= p < alpha`, or `p <= 2` for Gaussian noise.
pub fn check_moment_order(model: &NoiseModel, p: f64) -> Result<()> {
    let ok = if model.consts.is_gaussian() {
        (1.0..=2.0).contains(&p)
    } else {
        p >= 1.0 && p < model.params.alpha
    };
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(
            "p",
            format!("need 1 <= p < alpha = {}, got {p}", model.params.alpha),
        ))
    }
}

// Tail component in unit scale: density 1/(Z (1 + u^a)) on [0, inf).
#[derive(Debug, Clone)]
struct TailTable {
    u: Vec<f64>,
    g: Vec<f64>,
    z: f64,
    a: f64,
    u_cut: f64,
    s_cut: f64,
}

impl TailTable {
    fn new(t: &TailTerm) -> Result<Self> {
        let a = t.a;
        let z = tail_integral(0.0, 1.0, a)?;
        let u_cut = (1e3 / t.c2.powf(1.0 / a)).max(50.0);
        let mut u: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let per_decade = 96.0;
        let decades = (u_cut / 2.0).log10();
        let steps = (decades * per_decade).ceil() as usize;
        for i in 0..=steps {
            u.push(2.0 * 10f64.powf(decades * i as f64 / steps as f64));
        }
        let g = u
            .iter()
            .map(|&x| Ok(tail_partial_integral(x, 1.0, a)? / z))
            .collect::<Result<Vec<_>>>()?;
        let s_cut = 1.0 - *g.last().unwrap_or(&1.0);
        Ok(Self {
            u,
            g,
            z,
            a,
            u_cut,
            s_cut,
        })
    }

    fn slope(&self, u: f64) -> f64 {
        self.z * (1.0 + u.powf(self.a))
    }

    fn inverse(&self, q: f64) -> f64 {
        if 1.0 - q <= self.s_cut {
            // Pareto tail with the table's mass beyond the cut
            let s = (1.0 - q).max(f64::MIN_POSITIVE);
            return self.u_cut * (s / self.s_cut).powf(-1.0 / (self.a - 1.0));
        }
        let j = self.g.partition_point(|&x| x <= q).clamp(1, self.g.len() - 1);
        let (g0, g1) = (self.g[j - 1], self.g[j]);
        let (u0, u1) = (self.u[j - 1], self.u[j]);
        let h = g1 - g0;
        if h <= 0.0 {
            return u0;
        }
        let t = (q - g0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * u0
            + (t3 - 2.0 * t2 + t) * h * self.slope(u0)
            + (-2.0 * t3 + 3.0 * t2) * u1
            + (t3 - t2) * h * self.slope(u1)
    }
}

/// Composition sampler: Gaussian component with probability equal to its
/// mass, tail component by tabulated inverse CDF otherwise.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
    w_gauss: f64,
    normal: Option<Normal<f64>>,
    table: Option<TailTable>,
    tail_scale: f64,
}

impl Sampler {
    pub fn new(model: NoiseModel, seed: u64) -> Result<Self> {
        let w_gauss = match model.consts.tail {
            None => 1.0,
            Some(_) => model.gaussian_weight(),
        };
        let normal = if w_gauss > 0.0 {
            Some(
                Normal::new(0.0, (2.0 * model.params.gamma_sg).sqrt())
                    .map_err(|e| Error::invalid("gamma_sg", e.to_string()))?,
            )
        } else {
            None
        };
        let (table, tail_scale) = match model.consts.tail {
            Some(t) => (Some(TailTable::new(&t)?), t.c2.powf(1.0 / t.a)),
            None => (None, 0.0),
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            w_gauss,
            normal,
            table,
            tail_scale,
        })
    }

    pub fn draw(&mut self) -> f64 {
        let pick: f64 = self.rng.gen();
        if pick < self.w_gauss {
            if let Some(n) = &self.normal {
                return n.sample(&mut self.rng);
            }
        }
        match &self.table {
            Some(t) => {
                let q: f64 = self.rng.gen();
                let u = t.inverse(q);
                let sign = if self.rng.gen::<bool>() { 1.0 } else { -1.0 };
                sign * self.tail_scale * u
            }
            None => 0.0,
        }
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.draw();
        }
    }
}

/// Kolmogorov-Smirnov statistic of `sample` against `model`'s CDF.
pub fn ks_statistic(model: &NoiseModel, sample: &[f64]) -> Result<f64> {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = model.cdf(x)?;
        d = d.max(f - i as f64 / n).max((i as f64 + 1.0) / n - f);
    }
    Ok(d)
}
