use cfgen::charfn::{CharFn, EmpiricalCf, GaussianMixtureSpec, SpectralSource, StableSpec};
use cfgen::eval::{projection_quantiles, two_sample_report, PermutationOptions, DEFAULT_QUANTILES};
use cfgen::kernel::{random_feature_kernel, sample_frequencies, FrequencyBatch, KernelSpec, DEFAULT_BANDWIDTHS};
use cfgen::loss::loss_value;
use cfgen::numkit::{sample_matrix, BaseDistribution};
use cfgen::{Matrix, RngStream};
use proptest::prelude::*;

fn target(seed: u64, d: usize, kind: u8) -> Box<dyn CharFn> {
    let mut s = RngStream::new(seed);
    match kind % 3 {
        0 => Box::new(GaussianMixtureSpec::random(d, 1 + s.below(4), 3.0, &mut s).unwrap()),
        1 => {
            let alpha = 0.2 + 1.7 * s.uniform01();
            let source = SpectralSource {
                mean: (0..d).map(|_| s.std_normal()).collect(),
                cov: Matrix::identity(d),
            };
            let tau = (0..d).map(|_| s.std_normal()).collect();
            Box::new(StableSpec::from_gaussian_spectral(alpha, tau, source, 1 + s.below(30), &mut s).unwrap())
        }
        _ => {
            let source = SpectralSource {
                mean: vec![0.0; d],
                cov: Matrix::identity(d),
            };
            Box::new(StableSpec::from_gaussian_spectral(1.0, vec![0.5; d], source, 1 + s.below(30), &mut s).unwrap())
        }
    }
}

fn permuted_rows(m: &Matrix, s: &mut RngStream) -> Matrix {
    m.select_rows(&s.permutation(m.rows()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cf_is_bounded_hermitian_and_one_at_origin(
        seed in any::<u64>(),
        kind in 0u8..3,
        d in 1usize..5,
        scale in 0.01f64..20.0,
    ) {
        let phi = target(seed, d, kind);
        let mut s = RngStream::new(seed ^ 0xabcdef);
        let z: Vec<f64> = (0..d).map(|_| scale * s.std_normal()).collect();
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let v = phi.eval(&z).unwrap();
        let w = phi.eval(&neg).unwrap();
        prop_assert!(v.norm() <= 1.0 + 1e-12);
        prop_assert!((v - w.conj()).norm() <= 1e-12);
        prop_assert_eq!(phi.eval(&vec![0.0; d]).unwrap(), cfgen::ComplexValue::new(1.0, 0.0));
    }

    #[test]
    fn empirical_cf_is_bounded_and_hermitian(seed in any::<u64>(), n in 1usize..40, d in 1usize..4) {
        let mut s = RngStream::new(seed);
        let x = sample_matrix(&mut s, BaseDistribution::StdCauchy, n, d).unwrap();
        let cf = EmpiricalCf::new(x).unwrap();
        let z: Vec<f64> = (0..d).map(|_| s.std_normal()).collect();
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let v = cf.eval(&z).unwrap();
        prop_assert!(v.norm() <= 1.0 + 1e-12);
        prop_assert!((v - cf.eval(&neg).unwrap().conj()).norm() <= 1e-12);
    }

    #[test]
    fn random_feature_kernel_is_symmetric_and_bounded(seed in any::<u64>(), d in 1usize..5) {
        let mut s = RngStream::new(seed);
        let freqs = sample_frequencies(&KernelSpec::default(), &mut s, 50, d).unwrap();
        let x: Vec<f64> = (0..d).map(|_| s.std_normal()).collect();
        let y: Vec<f64> = (0..d).map(|_| s.std_normal()).collect();
        let a = random_feature_kernel(&freqs, &x, &y).unwrap();
        let b = random_feature_kernel(&freqs, &y, &x).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.abs() <= 1.0);
        prop_assert_eq!(random_feature_kernel(&freqs, &x, &x).unwrap(), 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn loss_is_invariant_under_row_permutations(
        seed in any::<u64>(),
        kind in 0u8..3,
        d in 1usize..4,
        n in 2usize..50,
        m in 1usize..50,
    ) {
        let phi = target(seed, d, kind);
        let mut s = RngStream::new(seed.wrapping_add(1));
        let y = sample_matrix(&mut s, BaseDistribution::StdNormal, n, d).unwrap();
        let freqs = sample_frequencies(&KernelSpec::default(), &mut s, m, d).unwrap();
        let base = loss_value(&y, &freqs, phi.as_ref()).unwrap();
        let py = permuted_rows(&y, &mut s);
        let pw = FrequencyBatch { w: permuted_rows(&freqs.w, &mut s), spec: freqs.spec.clone() };
        let a = loss_value(&py, &freqs, phi.as_ref()).unwrap();
        let b = loss_value(&y, &pw, phi.as_ref()).unwrap();
        let tol = 1e-12 * base.abs().max(1.0);
        prop_assert!((a - base).abs() <= tol, "{} vs {}", a, base);
        prop_assert!((b - base).abs() <= tol, "{} vs {}", b, base);
    }

    #[test]
    fn quantiles_are_affine_equivariant(
        seed in any::<u64>(),
        d in 1usize..4,
        n in 1usize..300,
        c in 0.01f64..100.0,
        shift in -50.0f64..50.0,
    ) {
        let mut s = RngStream::new(seed);
        let y = sample_matrix(&mut s, BaseDistribution::StdCauchy, n, d).unwrap();
        let b: Vec<f64> = (0..d).map(|k| shift * (k as f64 + 1.0)).collect();
        let u: Vec<f64> = (0..d).map(|_| s.std_normal()).collect();
        let moved = Matrix::new(
            n,
            d,
            y.iter_rows().flat_map(|r| r.iter().zip(&b).map(|(v, bk)| c * v + bk).collect::<Vec<_>>()).collect(),
        ).unwrap();
        let q = projection_quantiles(&y, &u, &DEFAULT_QUANTILES).unwrap();
        let qm = projection_quantiles(&moved, &u, &DEFAULT_QUANTILES).unwrap();
        let ub: f64 = u.iter().zip(&b).map(|(a, b)| a * b).sum();
        for (a, bq) in q.iter().zip(&qm) {
            let want = c * a + ub;
            prop_assert!((bq - want).abs() <= 1e-9 * want.abs().max(1.0) * c.max(1.0), "{} vs {}", bq, want);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn two_sample_report_is_symmetric(
        seed in any::<u64>(),
        d in 1usize..4,
        na in 2usize..60,
        nb in 2usize..60,
        bw in 0usize..5,
    ) {
        let mut s = RngStream::new(seed);
        let a = sample_matrix(&mut s, BaseDistribution::StdNormal, na, d).unwrap();
        let b = sample_matrix(&mut s, BaseDistribution::StdCauchy, nb, d).unwrap();
        let spec = KernelSpec::gaussian(vec![DEFAULT_BANDWIDTHS[bw]]).unwrap();
        let opts = PermutationOptions { max_rows: 40, permutations: 25, seed };
        let ab = two_sample_report(&a, &b, &spec, &opts).unwrap();
        let ba = two_sample_report(&b, &a, &spec, &opts).unwrap();
        prop_assert_eq!(ab, ba);
    }
}
