//! Equiprobable, equispaced M-PAM over the mixed noise channel: amplitude
//! from the power budget, symbol error rate, the Fano and Gauss-Hermite
//! lower bounds, the Bhattacharyya bound and a quadrature oracle for the
//! mutual information.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::approx_entropy::{entropy_numeric, noise_entropy_numeric, EntropyOptions, TailHint};
use crate::ba_solver::{capacity_at, SweepOptions};
use crate::noise_model::{check_moment_order, gsnr_to_power, NoiseModel, NoiseParams};
use crate::special_fn::quad::{self, QuadOptions};
use crate::special_fn::{erfc, gamma_fn, gauss_2f1, gauss_hermite_rule, q_standard};
use crate::{Error, Result};

/// How the constellation's `|x|^p` values are tied to the budget `P0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerNormalization {
    /// `2 sum_j ((A/2)(2j-1))^p = P0`: the sum over the points, without the
    /// `1/M` weight.
    #[default]
    Sum,
    /// `E|X|^p = P0` under the uniform input.
    Expectation,
}

impl PowerNormalization {
    pub fn name(self) -> &'static str {
        match self {
            PowerNormalization::Sum => "sum",
            PowerNormalization::Expectation => "expectation",
        }
    }
}

fn odd_power_sum(m: usize, p: f64) -> f64 {
    (1..=m / 2).map(|j| ((2 * j - 1) as f64).powf(p)).sum()
}

fn check_order(m: usize) -> Result<()> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::invalid("m", format!("PAM order must be even and >= 2, got {m}")));
    }
    Ok(())
}

/// Adjacent-point spacing `A = 2 (P0 / (2 sum_j (2j-1)^p))^(1/p)`.
pub fn pam_amplitude(m: usize, p: f64, p0: f64) -> Result<f64> {
    pam_amplitude_with(m, p, p0, PowerNormalization::Sum)
}

pub fn pam_amplitude_with(m: usize, p: f64, p0: f64, norm: PowerNormalization) -> Result<f64> {
    check_order(m)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid("p", format!("must be >= 1, got {p}")));
    }
    if !(p0 > 0.0 && p0.is_finite()) {
        return Err(Error::invalid("p0", format!("must be positive, got {p0}")));
    }
    let budget = match norm {
        PowerNormalization::Sum => p0,
        PowerNormalization::Expectation => m as f64 * p0,
    };
    Ok(2.0 * (budget / (2.0 * odd_power_sum(m, p))).powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PamSpec {
    pub m: usize,
    pub p: f64,
    pub p0: f64,
    /// Distance between adjacent points.
    pub a: f64,
    pub normalization: PowerNormalization,
}

impl PamSpec {
    pub fn new(m: usize, p: f64, p0: f64, normalization: PowerNormalization) -> Result<Self> {
        Ok(Self {
            m,
            p,
            p0,
            a: pam_amplitude_with(m, p, p0, normalization)?,
            normalization,
        })
    }

    /// The points `±(A/2)(2j-1)`, ascending.
    pub fn points(&self) -> Vec<f64> {
        let half = self.m / 2;
        (0..self.m)
            .map(|i| (i as f64 - half as f64 + 0.5) * self.a)
            .collect()
    }

    /// The power the points actually carry under this spec's normalization.
    pub fn power(&self) -> f64 {
        let s: f64 = self.points().iter().map(|x| x.abs().powf(self.p)).sum();
        match self.normalization {
            PowerNormalization::Sum => s,
            PowerNormalization::Expectation => s / self.m as f64,
        }
    }

    /// Half the constellation width, `(A/2)(M-1)`.
    pub fn span(&self) -> f64 {
        0.5 * self.a * (self.m - 1) as f64
    }
}

/// How a GSNR value is turned into a signal and a noise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PamFrame {
    /// Keep the noise as given and set `P0 = 10^(g/10) E|N|^p`.
    #[default]
    NoiseFixed,
    /// Keep `P0` and scale the noise so that `E|N|^p = P0 / 10^(g/10)`.
    /// Information quantities do not change; the Gauss-Hermite sum does,
    /// because its nodes live at fixed abscissae.
    SignalFixed { p0: f64 },
}

/// A PAM constellation over a given noise, with the noise entropy cached.
#[derive(Debug, Clone)]
pub struct PamChannel {
    pub spec: PamSpec,
    pub noise: NoiseModel,
    /// `h(N)` in nats, from quadrature of the exact density.
    pub h_nm: f64,
}

impl PamChannel {
    pub fn new(spec: PamSpec, noise: NoiseModel) -> Result<Self> {
        check_moment_order(&noise, spec.p)?;
        let h_nm = noise_entropy_numeric(&noise)?;
        Ok(Self { spec, noise, h_nm })
    }

    pub fn at_gsnr(
        params: &NoiseParams,
        m: usize,
        p: f64,
        gsnr_db: f64,
        norm: PowerNormalization,
        frame: PamFrame,
    ) -> Result<Self> {
        let base = NoiseModel::new(*params)?;
        check_moment_order(&base, p)?;
        let moment = base.p_moment(p)?;
        let (noise, p0) = match frame {
            PamFrame::NoiseFixed => (base, gsnr_to_power(gsnr_db, moment)),
            PamFrame::SignalFixed { p0 } => {
                let s = (p0 / gsnr_to_power(gsnr_db, moment)).powf(1.0 / p);
                (NoiseModel::new(params.scaled(s))?, p0)
            }
        };
        Self::new(PamSpec::new(m, p, p0, norm)?, noise)
    }

    /// Output density `(1/M) sum_j f(y - x_j)`.
    pub fn output_pdf(&self, y: f64) -> f64 {
        mixture_pdf(&self.noise, &self.spec.points(), y)
    }

    pub fn ser(&self) -> Result<f64> {
        pam_ser(&self.spec, &self.noise)
    }

    pub fn mi_numeric(&self) -> Result<f64> {
        Ok(mixture_entropy(&self.noise, &self.spec.points())? - self.h_nm)
    }

    pub fn ghq_lower(&self, opts: &GhqOptions) -> Result<GhqEstimate> {
        ghq_lower(&self.spec, &self.noise, self.h_nm, opts)
    }

    pub fn bounds(&self, opts: &GhqOptions) -> Result<PamBounds> {
        let pe = self.ser()?;
        Ok(PamBounds {
            pe,
            lhat1: self.ghq_lower(opts)?.lhat1,
            lhat2: fano_lower(self.spec.m, pe),
            mi_numeric: self.mi_numeric()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PamBounds {
    pub pe: f64,
    /// Gauss-Hermite (collision entropy) bound, nats.
    pub lhat1: f64,
    /// Fano bound, nats.
    pub lhat2: f64,
    /// Mutual information of the uniform input by quadrature, nats.
    pub mi_numeric: f64,
}

fn mixture_pdf(noise: &NoiseModel, points: &[f64], y: f64) -> f64 {
    points.iter().map(|&x| noise.pdf(y - x)).sum::<f64>() / points.len() as f64
}

/// Width used to place quadrature break points around each mixture peak.
fn core_width(noise: &NoiseModel) -> f64 {
    let mut w: f64 = if noise.params.c1 > 0.0 {
        (2.0 * noise.params.gamma_sg).sqrt()
    } else {
        0.0
    };
    if let Some(t) = noise.consts.tail {
        w = w.max(t.c2.powf(1.0 / t.a));
    }
    w
}

fn peak_breaks(noise: &NoiseModel, points: &[f64]) -> Vec<f64> {
    let w = core_width(noise);
    let mut b = Vec::new();
    for &x in points.iter().filter(|&&x| x >= 0.0) {
        b.push(x);
        for k in [0.25, 1.0, 4.0, 16.0] {
            b.push(x + k * w);
            if x - k * w > 0.0 {
                b.push(x - k * w);
            }
        }
    }
    b
}

/// `h(Y)` for the uniform mixture over symmetric `points`, by quadrature.
pub fn mixture_entropy(noise: &NoiseModel, points: &[f64]) -> Result<f64> {
    let tail = match noise.consts.tail {
        Some(t) => TailHint::PowerLaw { k: t.k, a: t.a },
        None => TailHint::Fast,
    };
    let span = points.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    let opts = EntropyOptions {
        scale: core_width(noise).min(span.max(core_width(noise))),
        breaks: peak_breaks(noise, points),
        tail,
        check_mass: true,
    };
    entropy_numeric(|y| mixture_pdf(noise, points, y), &opts)
}

/// `int_{t}^inf f(n) dn` by quadrature.
fn noise_upper_tail_quad(noise: &NoiseModel, t: f64) -> f64 {
    let w = core_width(noise);
    let mut breaks = vec![t];
    let mut x = t.max(w * 0.25);
    while x < t + 64.0 * w {
        x = if x <= t { t + 0.25 * w } else { x * 2.0 };
        breaks.push(x);
    }
    let last = *breaks.last().unwrap();
    let opts = QuadOptions::precise();
    quad::integrate_breaks(|n| noise.pdf(n), &breaks, opts).value
        + quad::integrate_to_infinity(|n| noise.pdf(n), last, opts).value
}

/// `Pe = (2(M-1)/M) int_{A/2}^inf f(n) dn` by quadrature.
pub fn pam_ser_quadrature(spec: &PamSpec, noise: &NoiseModel) -> f64 {
    let m = spec.m as f64;
    2.0 * (m - 1.0) / m * noise_upper_tail_quad(noise, 0.5 * spec.a)
}

fn ser_closed_with(spec: &PamSpec, noise: &NoiseModel, printed: bool) -> Result<f64> {
    let m = spec.m as f64;
    let c1 = noise.params.c1;
    let g = noise.params.gamma_sg;
    let half = 0.5 * spec.a;
    let gauss = if c1 > 0.0 {
        if printed {
            c1 * (std::f64::consts::PI * g).sqrt() * q_standard(spec.a / (2.0 * (2.0 * g).sqrt()))
        } else {
            c1 * (std::f64::consts::PI * g).sqrt() * erfc(spec.a / (4.0 * g.sqrt()))
        }
    } else {
        0.0
    };
    let tail = match noise.consts.tail {
        Some(t) => {
            let a = t.a;
            let c2 = t.c2;
            let z = if printed {
                -spec.a.powf(a) / c2.powf(a)
            } else {
                -half.powf(a) / c2
            };
            let whole = c2.powf(1.0 / a) * gamma_fn((a + 1.0) / a)? * gamma_fn((a - 1.0) / a)?;
            (1.0 - c1) * (whole - half * gauss_2f1(1.0, 1.0 / a, 1.0 + 1.0 / a, z)?)
        }
        None => 0.0,
    };
    Ok(2.0 * (m - 1.0) * noise.peak() / m * (gauss + tail))
}

/// Closed-form SER: Gaussian tail through `erfc`, power-law tail through
/// the `Gamma` product and `2F1(1, 1/a; 1 + 1/a; -(A/2)^a / c2)`.
pub fn pam_ser_closed(spec: &PamSpec, noise: &NoiseModel) -> Result<f64> {
    ser_closed_with(spec, noise, false)
}

/// The uncorrected SER expression: Gaussian term
/// `c1 sqrt(pi gamma_sg) Q(A / (2 sqrt(2 gamma_sg)))` and `2F1` argument
/// `-A^a / c2^a`. Kept only for the validation report.
pub fn pam_ser_printed(spec: &PamSpec, noise: &NoiseModel) -> Result<f64> {
    ser_closed_with(spec, noise, true)
}

/// Symbol error rate of the uniform constellation with midpoint decisions.
/// The closed form is cross-checked against quadrature; on disagreement
/// beyond 1e-8 (relative) the quadrature value is returned.
pub fn pam_ser(spec: &PamSpec, noise: &NoiseModel) -> Result<f64> {
    let quad = pam_ser_quadrature(spec, noise);
    let closed = pam_ser_closed(spec, noise)?;
    if (closed - quad).abs() > 1e-8 * quad.abs() + 1e-15 {
        warn!("SER closed form {closed:e} disagrees with quadrature {quad:e}; using quadrature");
        return Ok(quad.clamp(0.0, 1.0));
    }
    Ok(closed.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerEstimate {
    pub pe: f64,
    pub errors: u64,
    pub draws: u64,
    /// Binomial standard deviation of `pe`.
    pub sigma: f64,
}

const MC_CHUNK: u64 = 1 << 20;

/// Monte Carlo SER: uniform symbols, sampled noise, nearest-point decisions.
/// Work is split into fixed chunks, each with its own seed, so the result
/// depends only on `seed` and `draws`.
pub fn ser_monte_carlo(spec: &PamSpec, noise: &NoiseModel, draws: u64, seed: u64) -> Result<SerEstimate> {
    let points = spec.points();
    let m = spec.m;
    let a = spec.a;
    let chunks = draws.div_ceil(MC_CHUNK);
    let errors = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<u64> {
            let chunk_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(c);
            let mut sampler = noise.sampler(chunk_seed)?;
            let mut sym = ChaCha8Rng::seed_from_u64(chunk_seed ^ 0x5DEE_CE66_D1CE_4E5B);
            let n = MC_CHUNK.min(draws - c * MC_CHUNK);
            let mut e = 0u64;
            for _ in 0..n {
                let j = sym.gen_range(0..m);
                let y = points[j] + sampler.draw();
                // nearest point: index of the decision region
                let k = ((y / a + m as f64 / 2.0).floor()).clamp(0.0, (m - 1) as f64) as usize;
                e += (k != j) as u64;
            }
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<u64>();
    let pe = errors as f64 / draws as f64;
    Ok(SerEstimate {
        pe,
        errors,
        draws,
        sigma: (pe * (1.0 - pe) / draws as f64).sqrt(),
    })
}

/// `ln M + pe ln(pe/(M-1)) + (1-pe) ln(1-pe)`, with `0 ln 0 = 0`.
pub fn fano_lower(m: usize, pe: f64) -> f64 {
    let xlogy = |x: f64, y: f64| if x > 0.0 { x * y.ln() } else { 0.0 };
    (m as f64).ln() + xlogy(pe, pe / (m - 1) as f64) + xlogy(1.0 - pe, 1.0 - pe)
}

/// Where the Gauss-Hermite nodes are placed: at `s x_j` for a scale `s`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NodeScale {
    /// `s = 1`, the plain rule.
    Unit,
    /// The largest node lands at `max(1.2 span, span + 4 w)`, `w` being the
    /// noise core width.
    #[default]
    FitSpan,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhqOptions {
    pub order: usize,
    pub scale: NodeScale,
}

impl Default for GhqOptions {
    fn default() -> Self {
        Self {
            order: 30,
            scale: NodeScale::default(),
        }
    }
}

impl GhqOptions {
    pub fn with_order(order: usize) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GhqEstimate {
    pub lhat1: f64,
    /// The Gauss-Hermite value of `int f_Y^2`.
    pub collision: f64,
    /// Largest node, after scaling.
    pub max_node: f64,
    /// Whether the nodes reach 1.2 times the constellation half-width.
    pub covers_span: bool,
}

/// `L1 = -ln(s sum_j w_j e^{x_j^2} f_Y(s x_j)^2) - h(N)`.
pub fn ghq_lower(spec: &PamSpec, noise: &NoiseModel, h_nm: f64, opts: &GhqOptions) -> Result<GhqEstimate> {
    if opts.order < 10 {
        return Err(Error::invalid("order", format!("must be >= 10, got {}", opts.order)));
    }
    let rule = gauss_hermite_rule(opts.order)?;
    let top = rule.nodes.last().copied().unwrap_or(1.0);
    let s = match opts.scale {
        NodeScale::Unit => 1.0,
        NodeScale::FitSpan => {
            let span = spec.span();
            (1.2 * span).max(span + 4.0 * core_width(noise)) / top
        }
        NodeScale::Fixed(s) => s,
    };
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid("node_scale", format!("must be positive, got {s}")));
    }
    let points = spec.points();
    let sum: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| {
            let f = mixture_pdf(noise, &points, s * x);
            // w e^{x^2} f^2 evaluated in logs so large nodes do not overflow
            if f > 0.0 {
                (w.ln() + x * x + 2.0 * f.ln()).exp()
            } else {
                0.0
            }
        })
        .sum::<f64>()
        * s;
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::Resolution(format!(
            "Gauss-Hermite sum of order {} underflowed; increase the order",
            opts.order
        )));
    }
    let max_node = s * top;
    let covers_span = max_node >= 1.2 * spec.span();
    if !covers_span {
        warn!(
            "Gauss-Hermite nodes reach {max_node:.4} but the constellation spans {:.4}",
            spec.span()
        );
    }
    Ok(GhqEstimate {
        lhat1: -sum.ln() - h_nm,
        collision: sum,
        max_node,
        covers_span,
    })
}

/// Warn about too few nodes at high GSNR.
pub fn check_ghq_order(gsnr_db: f64, order: usize) {
    if gsnr_db > 30.0 && order < 50 {
        warn!("GSNR {gsnr_db} dB with Gauss-Hermite order {order}; use at least 50");
    }
}

/// The collision-entropy bound `-ln int f_Y^2 - h(N)` with the integral
/// done by adaptive quadrature; what the Gauss-Hermite sum approximates.
pub fn collision_lower(spec: &PamSpec, noise: &NoiseModel, h_nm: f64) -> f64 {
    -collision_integral(spec, noise).ln() - h_nm
}

/// `int f_Y^2` by adaptive quadrature.
pub fn collision_integral(spec: &PamSpec, noise: &NoiseModel) -> f64 {
    let points = spec.points();
    let mut breaks = vec![0.0];
    breaks.extend(peak_breaks(noise, &points));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let last = *breaks.last().unwrap();
    let f2 = |y: f64| mixture_pdf(noise, &points, y).powi(2);
    let opts = QuadOptions::precise();
    2.0 * (quad::integrate_breaks(f2, &breaks, opts).value + quad::integrate_to_infinity(f2, last, opts).value)
}

/// `Z = int sqrt(f(y) f(y - A)) dy`.
pub fn bhattacharyya_z(a: f64, noise: &NoiseModel) -> f64 {
    if a == 0.0 {
        return 1.0;
    }
    let half = 0.5 * a.abs();
    // symmetric about A/2; u = y - A/2
    let g = |u: f64| (noise.pdf(u + half) * noise.pdf(u - half)).sqrt();
    let w = core_width(noise);
    let mut breaks = vec![0.0, half];
    for k in [0.25, 1.0, 4.0, 16.0] {
        breaks.push(half + k * w);
        if half - k * w > 0.0 {
            breaks.push(half - k * w);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let last = *breaks.last().unwrap();
    let opts = QuadOptions::precise();
    let z = 2.0 * (quad::integrate_breaks(g, &breaks, opts).value + quad::integrate_to_infinity(g, last, opts).value);
    z.clamp(0.0, 1.0)
}

/// Mutual information (nats) of the equiprobable input `{0, A}`.
pub fn binary_mi(a: f64, noise: &NoiseModel) -> Result<f64> {
    let h = mixture_entropy(noise, &[-0.5 * a, 0.5 * a])?;
    Ok(h - noise_entropy_numeric(noise)?)
}

/// `sqrt(1 - Z^2)`, an upper bound on the binary mutual information in bits.
pub fn bhattacharyya_mi_bound(z: f64) -> f64 {
    (1.0 - z * z).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C1ScanPoint {
    pub c1: f64,
    /// Binary amplitude from the budget.
    pub a: f64,
    pub z: f64,
    /// `sqrt(1 - Z^2)`, bits.
    pub mi_bound_bits: f64,
    /// BA capacity in nats, when requested.
    pub ba_capacity: Option<f64>,
}

/// For each `c1`: the Bhattacharyya bound for the binary input with the
/// budget set by `gsnr_db`, and optionally the BA capacity.
pub fn c1_monotonicity_scan(
    base: &NoiseParams,
    c1_list: &[f64],
    p: f64,
    gsnr_db: f64,
    ba: Option<&SweepOptions>,
) -> Vec<Result<C1ScanPoint>> {
    c1_list
        .par_iter()
        .map(|&c1| {
            let params = NoiseParams { c1, ..*base };
            params.validate()?;
            let noise = NoiseModel::new(params)?;
            let p0 = gsnr_to_power(gsnr_db, noise.p_moment(p)?);
            let a = pam_amplitude(2, p, p0)?;
            let z = bhattacharyya_z(a, &noise);
            let ba_capacity = match ba {
                Some(opts) => Some(capacity_at(&noise, p, gsnr_db, opts)?.capacity),
                None => None,
            };
            Ok(C1ScanPoint {
                c1,
                a,
                z,
                mi_bound_bits: bhattacharyya_mi_bound(z),
                ba_capacity,
            })
        })
        .collect()
}

/// Capacity of square `M^2`-QAM from the `M`-PAM value.
pub fn qam_capacity_from_pam(c_pam: f64) -> f64 {
    2.0 * c_pam
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PamPoint {
    pub gsnr_db: f64,
    pub a: f64,
    pub bounds: PamBounds,
    pub ghq_covers_span: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PamSweepOptions {
    pub m: usize,
    pub p: f64,
    pub normalization: PowerNormalization,
    pub frame: PamFrame,
    pub ghq: GhqOptions,
}

/// PAM bounds over a GSNR list, one result per point, in input order.
pub fn pam_sweep(params: &NoiseParams, gsnr_list: &[f64], opts: &PamSweepOptions) -> Vec<Result<PamPoint>> {
    gsnr_list
        .par_iter()
        .map(|&g| {
            check_ghq_order(g, opts.ghq.order);
            let ch = PamChannel::at_gsnr(params, opts.m, opts.p, g, opts.normalization, opts.frame)?;
            let ghq = ch.ghq_lower(&opts.ghq)?;
            let pe = ch.ser()?;
            Ok(PamPoint {
                gsnr_db: g,
                a: ch.spec.a,
                bounds: PamBounds {
                    pe,
                    lhat1: ghq.lhat1,
                    lhat2: fano_lower(opts.m, pe),
                    mi_numeric: ch.mi_numeric()?,
                },
                ghq_covers_span: ghq.covers_span,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn unit(alpha: f64, c1: f64) -> NoiseModel {
        NoiseModel::new(NoiseParams::unit(alpha, c1).unwrap()).unwrap()
    }

    fn channel(alpha: f64, gsnr: f64) -> PamChannel {
        let params = NoiseParams::unit(alpha, 0.5).unwrap();
        PamChannel::at_gsnr(&params, 4, 1.1, gsnr, PowerNormalization::Sum, PamFrame::NoiseFixed).unwrap()
    }

    #[test]
    fn amplitude_from_budget() {
        let a = pam_amplitude(4, 2.0, 10.0).unwrap();
        assert!((a - 2.0 * 0.5f64.sqrt()).abs() < 1e-15);
        let a2 = pam_amplitude(2, 1.3, 5.0).unwrap();
        assert!((a2 - 2.0 * 2.5f64.powf(1.0 / 1.3)).abs() < 1e-14);
        for norm in [PowerNormalization::Sum, PowerNormalization::Expectation] {
            for m in [2, 4, 8, 16] {
                let s = PamSpec::new(m, 1.3, 7.5, norm).unwrap();
                assert!((s.power() - 7.5).abs() < 1e-12 * 7.5);
                let pts = s.points();
                for (x, y) in pts.iter().zip(pts.iter().rev()) {
                    assert_eq!(*x, -*y);
                }
                assert!((pts[1] - pts[0] - s.a).abs() < 1e-12);
            }
        }
        assert!(pam_amplitude(3, 1.1, 1.0).is_err());
        assert!(pam_amplitude(4, 0.5, 1.0).is_err());
    }

    #[test]
    fn ser_limits() {
        let noise = unit(1.5, 0.5);
        let tiny = PamSpec { a: 1e-9, ..PamSpec::new(4, 1.1, 1.0, PowerNormalization::Sum).unwrap() };
        assert!((pam_ser(&tiny, &noise).unwrap() - 0.75).abs() < 1e-8);
        let huge = PamSpec { a: 1e9, ..tiny };
        assert!(pam_ser(&huge, &noise).unwrap() < 1e-9);
    }

    #[test]
    fn ser_closed_form_matches_quadrature() {
        for (alpha, c1) in [(1.2, 0.5), (1.5, 0.3), (1.9, 0.7), (1.5, 0.0), (2.0, 1.0)] {
            let noise = unit(alpha, c1);
            for p0 in [0.3, 3.0, 30.0, 3000.0] {
                let spec = PamSpec::new(4, 1.1, p0, PowerNormalization::Sum).unwrap();
                let c = pam_ser_closed(&spec, &noise).unwrap();
                let q = pam_ser_quadrature(&spec, &noise);
                let cm = 0.75 * (1.0 - noise.central_mass(0.5 * spec.a).unwrap());
                assert!((c - q).abs() <= 1e-8 * q + 1e-15, "{alpha} {c1} {p0}: {c} vs {q}");
                assert!((cm - q).abs() <= 1e-8 * q + 1e-15);
            }
        }
    }

    #[test]
    fn printed_ser_differs() {
        let noise = unit(1.5, 0.5);
        let spec = PamSpec::new(4, 1.1, 30.0, PowerNormalization::Sum).unwrap();
        let printed = pam_ser_printed(&spec, &noise).unwrap();
        assert!((printed - pam_ser_quadrature(&spec, &noise)).abs() > 1e-3);
    }

    #[test]
    fn ser_monte_carlo_agrees() {
        let ch = channel(1.5, 15.0);
        let pe = ch.ser().unwrap();
        let mc = ser_monte_carlo(&ch.spec, &ch.noise, 1 << 21, 3).unwrap();
        assert!((mc.pe - pe).abs() < 3.0 * mc.sigma, "{} vs {pe} (sigma {})", mc.pe, mc.sigma);
        let again = ser_monte_carlo(&ch.spec, &ch.noise, 1 << 21, 3).unwrap();
        assert_eq!(mc, again);
    }

    #[test]
    fn fano_values() {
        assert!((fano_lower(4, 0.0) - 4f64.ln()).abs() < 1e-15);
        assert!(fano_lower(4, 0.75).abs() < 1e-15);
        let pe = 0.01;
        let hb = -(pe * f64::ln(pe) + (1.0 - pe) * f64::ln(1.0 - pe));
        assert!((fano_lower(4, pe) - (4f64.ln() - hb - pe * 3f64.ln())).abs() < 1e-14);
        let mut last = f64::INFINITY;
        for i in 1..75 {
            let v = fano_lower(4, i as f64 / 100.0);
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn mutual_information_limits_and_bounds() {
        let mut last = -1.0;
        for g in [-30.0, -10.0, 0.0, 10.0, 20.0, 30.0] {
            let ch = channel(1.5, g);
            let b = ch.bounds(&GhqOptions::default()).unwrap();
            assert!(b.mi_numeric <= 4f64.ln() + 1e-9);
            assert!(b.mi_numeric >= last - 1e-9);
            assert!(b.lhat2 <= b.mi_numeric + 1e-6, "{g}: fano {} mi {}", b.lhat2, b.mi_numeric);
            assert!(collision_lower(&ch.spec, &ch.noise, ch.h_nm) <= b.mi_numeric + 1e-9);
            last = b.mi_numeric;
        }
        assert!(channel(1.5, -30.0).mi_numeric().unwrap() < 1e-3);
        assert!(channel(1.5, 30.0).mi_numeric().unwrap() > 4f64.ln() - 0.02 * LN_2);
    }

    #[test]
    fn gaussian_binary_mi_matches_known_value() {
        // BPSK over N(0, 1) at amplitude 2: 0.4860 bits
        let noise = NoiseModel::new(NoiseParams::gaussian(0.5).unwrap()).unwrap();
        let i = binary_mi(2.0, &noise).unwrap() / LN_2;
        let oracle = {
            // 1 - E[log2(1 + exp(-2 y))] with y ~ N(1, 1), by quadrature
            let f = |y: f64| {
                let phi = (-(y - 1.0) * (y - 1.0) / 2.0).exp() / (2.0 * PI).sqrt();
                phi * (1.0 + (-2.0 * y).exp()).log2()
            };
            1.0 - quad::integrate(f, -12.0, 14.0, QuadOptions::precise()).value
        };
        assert!((i - oracle).abs() < 1e-8, "{i} vs {oracle}");
    }

    #[test]
    fn ghq_low_gsnr_matches_collision_integral() {
        let ch = channel(1.5, 0.0);
        let exact = collision_lower(&ch.spec, &ch.noise, ch.h_nm);
        for order in [30, 40, 50] {
            let g = ch.ghq_lower(&GhqOptions::with_order(order)).unwrap();
            assert!((g.lhat1 - exact).abs() < 1e-3, "{order}: {} vs {exact}", g.lhat1);
            assert!(g.covers_span);
        }
    }

    #[test]
    fn ghq_unit_nodes_flag_missing_coverage() {
        let ch = channel(1.5, 15.0);
        let g = ch
            .ghq_lower(&GhqOptions {
                order: 30,
                scale: NodeScale::Unit,
            })
            .unwrap();
        assert!(!g.covers_span);
        assert!(ch.ghq_lower(&GhqOptions::with_order(5)).is_err());
    }

    #[test]
    fn frame_does_not_change_information() {
        let params = NoiseParams::unit(1.2, 0.5).unwrap();
        let a = PamChannel::at_gsnr(&params, 4, 1.1, 10.0, PowerNormalization::Sum, PamFrame::NoiseFixed).unwrap();
        let b = PamChannel::at_gsnr(&params, 4, 1.1, 10.0, PowerNormalization::Sum, PamFrame::SignalFixed { p0: 1.0 })
            .unwrap();
        assert!((a.ser().unwrap() - b.ser().unwrap()).abs() < 1e-12);
        assert!((a.mi_numeric().unwrap() - b.mi_numeric().unwrap()).abs() < 1e-8);
    }

    #[test]
    fn bhattacharyya_parameter() {
        let noise = unit(1.5, 0.5);
        assert_eq!(bhattacharyya_z(0.0, &noise), 1.0);
        assert!((bhattacharyya_z(1e-6, &noise) - 1.0).abs() < 1e-6);
        assert!(bhattacharyya_z(1e8, &noise) < 1e-4);
        let gauss = NoiseModel::new(NoiseParams::gaussian(0.7).unwrap()).unwrap();
        for a in [0.5, 2.0, 5.0] {
            let z = bhattacharyya_z(a, &gauss);
            assert!((z - (-a * a / (16.0 * 0.7)).exp()).abs() < 1e-10);
        }
        for (alpha, c1) in [(1.2, 0.5), (1.5, 0.0), (1.9, 0.9)] {
            let noise = unit(alpha, c1);
            for a in [1.0, 4.0, 16.0] {
                let z = bhattacharyya_z(a, &noise);
                let i = binary_mi(a, &noise).unwrap() / LN_2;
                assert!((0.0..=1.0).contains(&z));
                assert!(i <= bhattacharyya_mi_bound(z) + 1e-9, "{alpha} {c1} {a}: {i} vs {z}");
            }
        }
    }

    #[test]
    fn c1_scan_bound() {
        let base = NoiseParams::unit(1.2, 0.5).unwrap();
        let scan = c1_monotonicity_scan(&base, &[0.0, 0.5, 1.0], 1.1, 20.0, None);
        for r in &scan {
            let r = r.as_ref().unwrap();
            assert!(r.mi_bound_bits > 0.0 && r.mi_bound_bits <= 1.0);
            assert!(r.ba_capacity.is_none());
        }
    }

    #[test]
    fn qam_identity() {
        assert_eq!(qam_capacity_from_pam(0.75), 1.5);
    }
}
