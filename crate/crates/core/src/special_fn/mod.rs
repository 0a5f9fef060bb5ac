//! Special-function and quadrature kernels shared by every other module.
//!
//! Everything here is a pure function of its arguments.

mod hermite;
mod hypergeo;
pub mod quad;

pub use hermite::{gauss_hermite_rule, QuadratureRule, MAX_HERMITE_ORDER};
pub use hypergeo::{gauss_2f1, hyper_3f2, SERIES_MAX_TERMS, SERIES_REL_TOL};

use crate::{Error, Result};

use std::f64::consts::SQRT_2;

/// Gamma function for positive arguments.
pub fn gamma_fn(a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("gamma_fn requires a > 0, got {a}")));
    }
    Ok(statrs::function::gamma::gamma(a))
}

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma(a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("ln_gamma requires a > 0, got {a}")));
    }
    Ok(statrs::function::gamma::ln_gamma(a))
}

pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// Reciprocal gamma over the whole real line; zero at the poles.
pub(crate) fn recip_gamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        0.0
    } else {
        1.0 / statrs::function::gamma::gamma(x)
    }
}

/// Gamma over the whole real line. Caller guarantees `x` is not a pole.
pub(crate) fn gamma_signed(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub(crate) fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Which definition of the Gaussian tail a formula is pinned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QConvention {
    /// `(1/sqrt(2 pi)) * int_z^inf exp(-t^2) dt`, a variant that mixes the
    /// two usual normalizations. It is not the complement of a CDF.
    Literal,
    /// The standard normal tail `(1/sqrt(2 pi)) * int_z^inf exp(-t^2/2) dt`.
    Standard,
}

impl QConvention {
    pub const ALL: [QConvention; 2] = [QConvention::Literal, QConvention::Standard];

    pub fn name(self) -> &'static str {
        match self {
            QConvention::Literal => "literal",
            QConvention::Standard => "standard",
        }
    }
}

/// `(1/sqrt(2 pi)) * int_z^inf exp(-t^2) dt = erfc(z) / (2 sqrt 2)`.
pub fn q_literal(z: f64) -> f64 {
    erfc(z) / (2.0 * SQRT_2)
}

/// Standard normal upper tail, `erfc(z / sqrt 2) / 2`.
pub fn q_standard(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

pub fn gaussian_tail(z: f64, convention: QConvention) -> f64 {
    match convention {
        QConvention::Literal => q_literal(z),
        QConvention::Standard => q_standard(z),
    }
}

/// `int_0^inf x^r / (c + x^a) dx` for `-1 < r`, `r + 1 < a`, `c > 0`.
///
/// Evaluated as `c^((r+1-a)/a) * Gamma(1+(r+1)/a) * Gamma((a-r-1)/a) / (r+1)`,
/// i.e. with the generic exponent `a` in the power of `c`.
pub fn tail_integral(r: f64, c: f64, a: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("tail_integral requires c > 0, got {c}")));
    }
    if !(r > -1.0) {
        return Err(Error::DivergentIntegral(format!(
            "x^{r} is not integrable at the origin"
        )));
    }
    if !(r + 1.0 < a) {
        return Err(Error::DivergentIntegral(format!(
            "r + 1 = {} must be below a = {a}",
            r + 1.0
        )));
    }
    let s = (r + 1.0) / a;
    let ln = (s - 1.0) * c.ln() + ln_gamma(1.0 + s)? + ln_gamma(1.0 - s)? - (r + 1.0).ln();
    Ok(ln.exp())
}

/// `int_0^x dt / (c + t^a)` via the hypergeometric antiderivative.
pub fn tail_partial_integral(x: f64, c: f64, a: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let s = 1.0 / a;
    Ok(x / c * gauss_2f1(1.0, s, 1.0 + s, -x.powf(a) / c)?)
}

/// Neumaier compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub(crate) const SQRT_PI: f64 = 1.772_453_850_905_516;

#[cfg(test)]
mod tests {
    use super::quad::{integrate, integrate_to_infinity, QuadOptions};
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gamma_known_values() {
        assert!(rel(gamma_fn(1.0).unwrap(), 1.0) < 1e-14);
        assert!(rel(gamma_fn(0.5).unwrap(), SQRT_PI) < 1e-14);
        assert!(rel(gamma_fn(5.0).unwrap(), 24.0) < 1e-14);
        // Gamma(3.7) = 2.7 Gamma(2.7); Gamma(0.05) from a 30-digit table.
        assert!(rel(gamma_fn(3.7).unwrap(), 2.7 * gamma_fn(2.7).unwrap()) < 1e-13);
        assert!(rel(gamma_fn(0.05).unwrap(), 19.470_085_311_255_51) < 1e-12);
        assert!(rel(gamma_fn(50.0).unwrap(), 6.082_818_640_342_675e62) < 1e-12);
    }

    #[test]
    fn gamma_rejects_nonpositive() {
        assert!(matches!(gamma_fn(0.0), Err(Error::Domain(_))));
        assert!(matches!(gamma_fn(-1.5), Err(Error::Domain(_))));
        assert!(gamma_fn(f64::NAN).is_err());
    }

    #[test]
    fn gamma_recurrence_on_log_grid() {
        let n = 60;
        for i in 0..=n {
            let a = 0.05 * (1000.0f64).powf(i as f64 / n as f64);
            if a > 49.0 {
                break;
            }
            let lhs = gamma_fn(a + 1.0).unwrap();
            let rhs = a * gamma_fn(a).unwrap();
            assert!(rel(lhs, rhs) < 1e-12, "a = {a}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn gamma_matches_euler_integral() {
        // independent check against int_0^inf t^(a-1) e^-t dt
        for &a in &[1.3, 2.5, 3.7, 7.25] {
            let q = integrate_to_infinity(
                |t| t.powf(a - 1.0) * (-t).exp(),
                0.0,
                QuadOptions::precise(),
            );
            assert!(rel(gamma_fn(a).unwrap(), q.value) < 1e-10);
        }
    }

    #[test]
    fn gaussian_tail_conventions() {
        assert_eq!(q_literal(f64::INFINITY), 0.0);
        assert_eq!(q_standard(f64::INFINITY), 0.0);
        // quadrature of exp(-t^2) on [0, inf) divided by sqrt(2 pi)
        let q0 = integrate_to_infinity(|t| (-t * t).exp(), 0.0, QuadOptions::precise()).value
            / (2.0 * PI).sqrt();
        assert!((q_literal(0.0) - q0).abs() < 1e-12);
        assert!((q_literal(0.0) - 0.353_553_390_6).abs() < 1e-9);
        // full line: sqrt(pi) / sqrt(2 pi) = 1/sqrt 2, not 1
        assert!((q_literal(f64::NEG_INFINITY) - 1.0 / SQRT_2).abs() < 1e-12);
        assert!((q_standard(f64::NEG_INFINITY) - 1.0).abs() < 1e-15);
        assert!((q_standard(0.0) - 0.5).abs() < 1e-15);
        let q = q_standard(1.959_963_984_540_054);
        assert!((q - 0.025).abs() < 1e-12, "{q:e}");
        assert_eq!(gaussian_tail(0.7, QConvention::Literal), q_literal(0.7));
    }

    #[test]
    fn tail_integral_arctan_case() {
        assert!(rel(tail_integral(0.0, 1.0, 2.0).unwrap(), PI / 2.0) < 1e-14);
    }

    #[test]
    fn tail_integral_rejects_divergence() {
        assert!(matches!(
            tail_integral(1.5, 1.0, 2.5),
            Err(Error::DivergentIntegral(_))
        ));
        assert!(matches!(
            tail_integral(2.0, 1.0, 2.5),
            Err(Error::DivergentIntegral(_))
        ));
        assert!(tail_integral(0.0, 0.0, 2.0).is_err());
    }

    /// Oracle: adaptive quadrature on [0, X] plus the leading power-law tail
    /// `int_X^inf x^(r-a) (1 - c x^-a) dx`.
    fn tail_oracle(r: f64, c: f64, a: f64) -> f64 {
        let x_max: f64 = 1e6;
        let f = |x: f64| x.powf(r) / (c + x.powf(a));
        let mut breaks = vec![0.0, 1.0];
        while *breaks.last().unwrap() < x_max {
            let last = *breaks.last().unwrap();
            breaks.push((last * 4.0).min(x_max));
        }
        let body = quad::integrate_breaks(f, &breaks, QuadOptions::precise()).value;
        let e1 = a - r - 1.0;
        let e2 = 2.0 * a - r - 1.0;
        let tail = x_max.powf(-e1) / e1 - c * x_max.powf(-e2) / e2;
        body + tail
    }

    #[test]
    fn tail_integral_matches_quadrature_examples() {
        let alpha = 1.5;
        let v = tail_integral(0.0, 2.0, alpha + 1.0).unwrap();
        assert!(rel(v, tail_oracle(0.0, 2.0, alpha + 1.0)) < 1e-8);
        // moment kernel: p = 1.1, alpha = 1.2, c2 = 3
        let v = tail_integral(1.1, 3.0, 2.2).unwrap();
        assert!(rel(v, tail_oracle(1.1, 3.0, 2.2)) < 1e-7, "{v}");
    }

    #[test]
    fn tail_integral_grid_matches_quadrature() {
        for &r in &[0.0, 0.5, 1.0, 1.4] {
            for &a in &[2.2, 2.5, 3.0] {
                for &c in &[0.5, 1.0, 5.0] {
                    if r + 1.0 >= a {
                        continue;
                    }
                    let v = tail_integral(r, c, a).unwrap();
                    let o = tail_oracle(r, c, a);
                    // r = 1.4, a = 2.2 decays like x^-1.8: the two-term tail
                    // expansion still leaves ~1e-9 relative.
                    assert!(rel(v, o) < 1e-8, "r={r} a={a} c={c}: {v} vs {o}");
                }
            }
        }
    }

    #[test]
    fn partial_tail_integral_matches_quadrature() {
        for &(x, c, a) in &[(0.5, 1.0, 2.5), (3.0, 2.0, 2.2), (10.0, 0.7, 3.0)] {
            let v = tail_partial_integral(x, c, a).unwrap();
            let o = integrate(|t| 1.0 / (c + t.powf(a)), 0.0, x, QuadOptions::precise()).value;
            assert!(rel(v, o) < 1e-10, "{x} {c} {a}: {v} vs {o}");
        }
    }

    #[test]
    fn kahan_sum_recovers_small_terms() {
        let mut s = KahanSum::new();
        s.add(1.0);
        for _ in 0..10_000 {
            s.add(1e-16);
        }
        assert!((s.value() - (1.0 + 1e-12)).abs() < 1e-20);
    }
}
