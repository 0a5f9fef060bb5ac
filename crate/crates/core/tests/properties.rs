use mgincap::ba_solver::{ba_capacity, BaOptions, DiscreteChannel};
use mgincap::noise_model::{NoiseModel, NoiseParams};
use mgincap::pam::{fano_lower, pam_amplitude_with, PamSpec, PowerNormalization};
use mgincap::special_fn::gauss_2f1;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = NoiseParams> {
    (1.05f64..1.95, 0.2f64..5.0, 0.2f64..5.0, 0.0f64..=1.0, 0.2f64..5.0).prop_map(|(a, gs, gg, c1, gsg)| {
        NoiseParams::new(a, gs, gg, c1, gsg).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pdf_is_symmetric_positive_and_peaked(p in params(), n in 0.0f64..1e4) {
        let m = NoiseModel::new(p).unwrap();
        let f = m.pdf(n);
        prop_assert!(f > 0.0);
        prop_assert_eq!(f, m.pdf(-n));
        prop_assert!(f <= m.pdf(0.0) * (1.0 + 1e-14));
    }

    #[test]
    fn central_mass_is_a_monotone_probability(p in params(), x in 0.0f64..50.0, dx in 0.0f64..50.0) {
        let m = NoiseModel::new(p).unwrap();
        let lo = m.central_mass(x).unwrap();
        let hi = m.central_mass(x + dx).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&lo));
        prop_assert!(hi >= lo - 1e-12);
    }

    #[test]
    fn scaling_transforms_pdf_and_moment(p in params(), s in 0.1f64..10.0, n in -20.0f64..20.0) {
        let m = NoiseModel::new(p).unwrap();
        let ms = NoiseModel::new(p.scaled(s)).unwrap();
        let f = m.pdf(n);
        prop_assert!((ms.pdf(s * n) * s - f).abs() <= 1e-10 * f);
        let q = 1.0 + 0.9 * (p.alpha - 1.0);
        let (a, b) = (m.p_moment(q).unwrap(), ms.p_moment(q).unwrap());
        prop_assert!((b - s.powf(q) * a).abs() <= 1e-9 * b);
    }

    #[test]
    fn fano_bound_stays_in_range_and_falls_with_pe(m in 2usize..64, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let top = (m - 1) as f64 / m as f64;
        let (lo, hi) = if u < v { (u * top, v * top) } else { (v * top, u * top) };
        let (fl, fh) = (fano_lower(m, lo), fano_lower(m, hi));
        prop_assert!(fh <= fl + 1e-12);
        prop_assert!(fh >= -1e-12 && fl <= (m as f64).ln() + 1e-12);
    }

    #[test]
    fn pam_amplitude_meets_the_budget(m in 2usize..33, p in 1.0f64..2.0, p0 in 1e-3f64..1e6) {
        let m = 2 * (m / 2);
        for norm in [PowerNormalization::Sum, PowerNormalization::Expectation] {
            let a = pam_amplitude_with(m, p, p0, norm).unwrap();
            let spec = PamSpec::new(m, p, p0, norm).unwrap();
            let sum: f64 = spec.points().iter().map(|x| x.abs().powf(p)).sum();
            let budget = match norm {
                PowerNormalization::Sum => p0,
                PowerNormalization::Expectation => m as f64 * p0,
            };
            prop_assert!((sum - budget).abs() <= 1e-10 * budget);
            prop_assert_eq!(a, spec.a);
        }
    }

    #[test]
    fn gauss_2f1_matches_direct_series(a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.5f64..4.0, z in -0.45f64..0.45) {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 0..400 {
            let k = k as f64;
            term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
            sum += term;
        }
        let v = gauss_2f1(a, b, c, z).unwrap();
        prop_assert!((v - sum).abs() <= 1e-12 * sum.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ba_iterates_never_decrease(rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 5), 2..6)) {
        let w: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|v| v / s).collect()
            })
            .collect();
        let nx = w.len();
        let x: Vec<f64> = (0..nx).map(|i| i as f64).collect();
        let ch = DiscreteChannel::from_matrix(x, w).unwrap();
        // budget large enough to be slack
        let r = ba_capacity(&ch, 1.0, 10.0 * nx as f64, &BaOptions::default()).unwrap();
        prop_assert!(r.max_decrease() <= 1e-12);
        prop_assert!(r.capacity >= -1e-12 && r.capacity <= (nx.min(5) as f64).ln() + 1e-12);
        prop_assert!((r.input_pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
