//! Gauss-Hermite rules for the weight `exp(-x^2)`.

use crate::{Error, Result};

pub const MAX_HERMITE_ORDER: usize = 128;

/// Nodes and weights of an `order`-point Gauss-Hermite rule, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    /// `sum_j w_j f(x_j)`, approximating `int exp(-x^2) f(x) dx`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)

/// Roots of the Hermite polynomial `H_order` and the matching weights.
///
/// Newton iteration on the orthonormal recurrence, started from the usual
/// asymptotic guesses for the largest roots and extrapolation for the rest.
pub fn gauss_hermite_rule(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_HERMITE_ORDER {
        return Err(Error::invalid(
            "order",
            format!("Gauss-Hermite order must be in 1..={MAX_HERMITE_ORDER}, got {order}"),
        ));
    }
    let n = order;
    let nf = n as f64;
    let m = (n + 1) / 2;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                what: format!("Gauss-Hermite root {i} of order {n}"),
                terms: 100,
            });
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[m - 1] = 0.0;
    }
    x.reverse();
    w.reverse();
    Ok(QuadratureRule {
        nodes: x,
        weights: w,
        order: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_fn::{gamma_fn, SQRT_PI};

    /// `int x^k exp(-x^2) dx` over the real line.
    fn gaussian_moment(k: usize) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            gamma_fn((k as f64 + 1.0) / 2.0).unwrap()
        }
    }

    #[test]
    fn order_one_and_two() {
        let r = gauss_hermite_rule(1).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert!((r.weights[0] - SQRT_PI).abs() < 1e-14);

        let r = gauss_hermite_rule(2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.nodes[0] + h).abs() < 1e-15 && (r.nodes[1] - h).abs() < 1e-15);
        for w in &r.weights {
            assert!((w - SQRT_PI / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn second_moment_order_five() {
        let r = gauss_hermite_rule(5).unwrap();
        assert!((r.apply(|x| x * x) - SQRT_PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(gauss_hermite_rule(0).is_err());
        assert!(gauss_hermite_rule(MAX_HERMITE_ORDER + 1).is_err());
    }

    #[test]
    fn structure_and_weight_sum() {
        for n in 1..=MAX_HERMITE_ORDER {
            let r = gauss_hermite_rule(n).unwrap();
            assert_eq!(r.nodes.len(), n);
            assert_eq!(r.weights.len(), n);
            assert_eq!(r.order, n);
            let s: f64 = r.weights.iter().sum();
            assert!(((s - SQRT_PI) / SQRT_PI).abs() < 1e-12, "order {n}: {s}");
            for j in 0..n {
                assert_eq!(r.nodes[j], -r.nodes[n - 1 - j]);
                assert!(r.weights[j] > 0.0);
                if j > 0 {
                    assert!(r.nodes[j] > r.nodes[j - 1]);
                }
            }
        }
    }

    #[test]
    fn exact_for_monomials() {
        for &n in &[3usize, 10, 20, 30, 50] {
            let r = gauss_hermite_rule(n).unwrap();
            for k in 0..2 * n {
                let got = r.apply(|x| x.powi(k as i32));
                let want = gaussian_moment(k);
                if want == 0.0 {
                    let scale = gaussian_moment(k + 1).max(1.0);
                    assert!(got.abs() < 1e-10 * scale, "n={n} k={k}: {got}");
                } else {
                    assert!(((got - want) / want).abs() < 1e-10, "n={n} k={k}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn hermite_polynomial_vanishes_at_nodes() {
        // H_5(x) = 32x^5 - 160x^3 + 120x
        let r = gauss_hermite_rule(5).unwrap();
        for &x in &r.nodes {
            let h = 32.0 * x.powi(5) - 160.0 * x.powi(3) + 120.0 * x;
            assert!(h.abs() < 1e-11, "{x}: {h}");
        }
    }
}
