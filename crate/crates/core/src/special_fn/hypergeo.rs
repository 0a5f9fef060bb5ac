//! Real-argument Gauss `2F1` and generalized `3F2` hypergeometric functions.
//!
//! `2F1` covers `z < 1`: direct series on `|z| <= 1/2`, the Pfaff transform on
//! `[-1, -1/2)`, the `1/z` connection formula on `z < -1` and the `1 - z`
//! connection formula on `(1/2, 1)`.

use super::{gamma_signed, is_nonpositive_integer, recip_gamma, KahanSum};
use crate::{Error, Result};

pub const SERIES_MAX_TERMS: usize = 500;
pub const SERIES_REL_TOL: f64 = 1e-14;

/// Gauss hypergeometric function `2F1(a, b; c; z)` for real `z < 1`.
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if is_nonpositive_integer(c) {
        return Err(Error::Domain(format!(
            "2F1 lower parameter c = {c} is a non-positive integer"
        )));
    }
    if !z.is_finite() || z >= 1.0 {
        return Err(Error::UnsupportedArgument(format!(
            "2F1 is only implemented for z < 1, got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    // terminating series are polynomials and safe anywhere
    if is_nonpositive_integer(a) || is_nonpositive_integer(b) {
        return series_2f1(a, b, c, z, usize::MAX);
    }
    if z.abs() <= 0.5 {
        return series_2f1(a, b, c, z, SERIES_MAX_TERMS);
    }
    if z >= -1.0 && z < -0.5 {
        return pfaff(a, b, c, z);
    }
    if z < -1.0 {
        if !is_integer(b - a) {
            return inverse_connection(a, b, c, z);
        }
        // b - a integer: Pfaff moves z into (1/2, 1)
        return pfaff(a, b, c, z);
    }
    // 1/2 < z < 1
    if !is_integer(c - a - b) {
        return one_minus_z_connection(a, b, c, z);
    }
    series_2f1(a, b, c, z, 20 * SERIES_MAX_TERMS)
}

/// Generalized hypergeometric `3F2(a1, a2, a3; b1, b2; z)` for `|z| < 1`.
pub fn hyper_3f2(a1: f64, a2: f64, a3: f64, b1: f64, b2: f64, z: f64) -> Result<f64> {
    if is_nonpositive_integer(b1) || is_nonpositive_integer(b2) {
        return Err(Error::Domain(format!(
            "3F2 lower parameters ({b1}, {b2}) include a non-positive integer"
        )));
    }
    if !z.is_finite() || z.abs() >= 1.0 {
        return Err(Error::UnsupportedArgument(format!(
            "3F2 series requires |z| < 1, got {z}"
        )));
    }
    let mut sum = KahanSum::new();
    let mut term = 1.0;
    sum.add(term);
    // terms shrink roughly like |z|^k, so the budget grows near |z| = 1
    let budget = ((64.0 / (1.0 - z.abs())) as usize).clamp(SERIES_MAX_TERMS, 1_000_000);
    let mut small = 0;
    for k in 0..budget {
        let kf = k as f64;
        term *= (a1 + kf) * (a2 + kf) * (a3 + kf) / ((b1 + kf) * (b2 + kf) * (kf + 1.0)) * z;
        sum.add(term);
        if term == 0.0 {
            return Ok(sum.value());
        }
        if term.abs() <= SERIES_REL_TOL * sum.value().abs() {
            small += 1;
            if small >= 2 {
                return Ok(sum.value());
            }
        } else {
            small = 0;
        }
    }
    Err(Error::Convergence {
        what: format!("3F2({a1}, {a2}, {a3}; {b1}, {b2}; {z})"),
        terms: budget,
    })
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-12
}

fn series_2f1(a: f64, b: f64, c: f64, z: f64, max_terms: usize) -> Result<f64> {
    let mut sum = KahanSum::new();
    let mut term = 1.0;
    sum.add(term);
    let mut small = 0;
    let mut k = 0usize;
    while k < max_terms {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum.add(term);
        if term == 0.0 {
            return Ok(sum.value());
        }
        if term.abs() <= SERIES_REL_TOL * sum.value().abs() {
            small += 1;
            if small >= 2 {
                return Ok(sum.value());
            }
        } else {
            small = 0;
        }
        k += 1;
    }
    Err(Error::Convergence {
        what: format!("2F1({a}, {b}; {c}; {z})"),
        terms: max_terms,
    })
}

/// `2F1(a,b;c;z) = (1-z)^-a 2F1(a, c-b; c; z/(z-1))`
fn pfaff(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let w = z / (z - 1.0);
    Ok((1.0 - z).powf(-a) * gauss_2f1(a, c - b, c, w)?)
}

/// Connection formula for `z < -1`, mapping to `1/z` in `(-1, 0)`.
fn inverse_connection(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let w = 1.0 / z;
    let mz = -z;
    let t1 = if is_nonpositive_integer(c - a) || is_nonpositive_integer(b) {
        0.0
    } else {
        gamma_signed(c) * gamma_signed(b - a) * recip_gamma(b) * recip_gamma(c - a)
            * mz.powf(-a)
            * gauss_2f1(a, a + 1.0 - c, a + 1.0 - b, w)?
    };
    let t2 = if is_nonpositive_integer(c - b) || is_nonpositive_integer(a) {
        0.0
    } else {
        gamma_signed(c) * gamma_signed(a - b) * recip_gamma(a) * recip_gamma(c - b)
            * mz.powf(-b)
            * gauss_2f1(b, b + 1.0 - c, b + 1.0 - a, w)?
    };
    Ok(t1 + t2)
}

/// Connection formula for `1/2 < z < 1`, mapping to `1 - z` in `(0, 1/2)`.
fn one_minus_z_connection(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let w = 1.0 - z;
    let s = c - a - b;
    let t1 = gamma_signed(c) * gamma_signed(s) * recip_gamma(c - a) * recip_gamma(c - b)
        * gauss_2f1(a, b, 1.0 - s, w)?;
    let t2 = w.powf(s)
        * gamma_signed(c)
        * gamma_signed(-s)
        * recip_gamma(a)
        * recip_gamma(b)
        * gauss_2f1(c - a, c - b, 1.0 + s, w)?;
    Ok(t1 + t2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::quad::{integrate, QuadOptions};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Plain term-by-term summation with a fixed term count; independent of
    /// the convergence logic above.
    fn brute_2f1(a: f64, b: f64, c: f64, z: f64, terms: usize) -> f64 {
        let mut t = 1.0;
        let mut s = 1.0;
        for k in 0..terms {
            let k = k as f64;
            t *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
            s += t;
        }
        s
    }

    #[test]
    fn constant_term_at_origin() {
        assert_eq!(gauss_2f1(0.3, 1.7, 2.2, 0.0).unwrap(), 1.0);
        assert_eq!(hyper_3f2(0.3, 1.7, 2.2, 0.4, 1.1, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn log_identity() {
        // 2F1(1,1;2;z) = -ln(1-z)/z
        let v = gauss_2f1(1.0, 1.0, 2.0, -1.0).unwrap();
        assert!(rel(v, std::f64::consts::LN_2) < 1e-12);
        assert!(rel(v, 0.693_147_180_6) < 1e-10);
        for &z in &[-30.0, -3.0, -0.9, -0.4, 0.3, 0.7, 0.95] {
            let v = gauss_2f1(1.0, 1.0, 2.0, z).unwrap();
            let exact = -(1.0f64 - z).ln() / z;
            // b - a = 0 integer path and c - a - b = 0 integer path both exercised
            assert!(rel(v, exact) < 1e-10, "z={z}: {v} vs {exact}");
        }
    }

    #[test]
    fn arctan_identity_through_connection_formula() {
        // 2F1(1/2, 1; 3/2; -x^2) = atan(x)/x
        for &x in &[0.3, 0.9, 2.0, 10.0, 300.0] {
            let v = gauss_2f1(0.5, 1.0, 1.5, -x * x).unwrap();
            assert!(rel(v, x.atan() / x) < 1e-12, "x={x}");
        }
    }

    #[test]
    fn antiderivative_matches_quadrature() {
        // int_0^X dx/(c + x^a) = X/c 2F1(1, 1/a; 1+1/a; -X^a/c), alpha = 1.5
        let alpha = 1.5;
        let a = alpha + 1.0;
        let c = 1.0;
        let x_max: f64 = 8.0f64.powf(1.0 / a);
        let v = x_max / c * gauss_2f1(1.0, 1.0 / (alpha + 1.0), (alpha + 2.0) / (alpha + 1.0), -8.0).unwrap();
        let q = integrate(|x| 1.0 / (c + x.powf(a)), 0.0, x_max, QuadOptions::precise()).value;
        assert!(rel(v, q) < 1e-11, "{v} vs {q}");
        // frozen value of 2F1(1, 0.4; 1.4; -8) from a 30-digit evaluation
        let v = gauss_2f1(1.0, 0.4, 1.4, -8.0).unwrap();
        assert!(rel(v, 0.495_429_170_598_741_6) < 1e-12);
    }

    #[test]
    fn transform_agrees_with_series_on_overlap() {
        // Pfaff branch vs direct series on -1 < z < -1/2
        for &(a, b, c) in &[(1.0, 0.4, 1.4), (0.6, 0.6, 1.6), (0.3, 1.2, 2.7)] {
            for &z in &[-0.55, -0.7, -0.9] {
                let v = gauss_2f1(a, b, c, z).unwrap();
                let s = brute_2f1(a, b, c, z, 4000);
                assert!(rel(v, s) < 1e-8, "({a},{b},{c},{z}): {v} vs {s}");
            }
        }
        // 1/z connection formula just beyond -1 vs Pfaff at -1
        let left = gauss_2f1(1.0, 0.4, 1.4, -1.0 - 1e-9).unwrap();
        let right = gauss_2f1(1.0, 0.4, 1.4, -1.0).unwrap();
        assert!(rel(left, right) < 1e-8);
    }

    #[test]
    fn one_minus_z_branch_matches_brute_series() {
        for &(a, b, c) in &[(0.6, 0.6, 1.6), (0.4, 0.4, 1.4), (1.0, 0.3, 2.1)] {
            for &z in &[0.55, 0.8, 0.95] {
                let v = gauss_2f1(a, b, c, z).unwrap();
                let s = brute_2f1(a, b, c, z, 20_000);
                assert!(rel(v, s) < 1e-9, "({a},{b},{c},{z}): {v} vs {s}");
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(gauss_2f1(1.0, 1.0, -2.0, 0.1), Err(Error::Domain(_))));
        assert!(matches!(gauss_2f1(1.0, 1.0, 0.0, 0.1), Err(Error::Domain(_))));
        assert!(matches!(
            gauss_2f1(1.0, 1.0, 2.0, 1.0),
            Err(Error::UnsupportedArgument(_))
        ));
        assert!(matches!(
            hyper_3f2(1.0, 1.0, 1.0, 2.0, 2.0, 1.0),
            Err(Error::UnsupportedArgument(_))
        ));
        assert!(matches!(
            hyper_3f2(1.0, 1.0, 1.0, -1.0, 2.0, 0.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn hyper_3f2_convergence_failure_is_signalled() {
        // |z| this close to 1 exhausts even the widened term budget
        let r = hyper_3f2(1.0, 1.0, 1.0, 1.5, 1.5, 0.999_999_9);
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }

    #[test]
    fn hyper_3f2_reduces_to_2f1() {
        for &z in &[-0.8, -0.3, 0.2, 0.45] {
            let v = hyper_3f2(0.7, 0.4, 1.3, 0.7, 2.2, z).unwrap();
            let w = gauss_2f1(0.4, 1.3, 2.2, z).unwrap();
            assert!(rel(v, w) < 1e-12);
        }
    }

    #[test]
    fn hyper_3f2_frozen_value() {
        // 30-digit reference for 3F2(0.6,0.6,0.6;1.6,1.6;0.5)
        let v = hyper_3f2(0.6, 0.6, 0.6, 1.6, 1.6, 0.5).unwrap();
        assert!(rel(v, 1.050_609_394_725_565_4) < 1e-12);
        // and a 200-term plain summation
        let mut t = 1.0;
        let mut s = 1.0;
        for k in 0..200 {
            let k = k as f64;
            t *= (0.6 + k).powi(3) / ((1.6 + k).powi(2) * (k + 1.0)) * 0.5;
            s += t;
        }
        assert!(rel(v, s) < 1e-10);
    }
}
