mod common;

use common::*;
use mixtest_core::calibration::{theoretical_constant, DEFAULT_C1};
use mixtest_core::io::{parse_sample_reader, write_sample_csv};
use mixtest_core::simulation::{builtin_model, expand_weights, sample_mixture};
use mixtest_core::wavelet::{integrate_midpoint, CoefficientArray, LevelIndex, ScalingBasis, QUADRATURE_STEP};
use mixtest_core::{
    appendix_CT, dual_basis, gram_spectrum, lower_constant, optimal_sum_from_statistics, select_level,
    statistic_fast, statistic_naive, upper_constant, ModelConstants, PairedSample, WeightMatrix,
};
use proptest::prelude::*;
use rand::Rng;

const HAAR: ScalingBasis = ScalingBasis::Haar;

fn constants(k: f64, gamma: f64) -> ModelConstants {
    ModelConstants {
        r: 2.0,
        l: 1.0,
        sup_norm_phi: 1.0,
        m: 2,
        k,
        gamma,
        s: 1.0,
        c1: DEFAULT_C1,
    }
}

#[test]
fn active_translates_match_brute_force_scan() {
    let mut rng = rng(100);
    let reach = (2.0 * HAAR.half_support()).ceil() as i64;
    for _ in 0..10_000 {
        let j = rng.random_range(0..=12);
        let x = rng.random_range(-50.0..50.0);
        let centre = ((j as f64).exp2() * x).floor() as i64;
        let scan: Vec<i64> = (centre - reach..=centre + reach)
            .filter(|&k| HAAR.eval_phi_jk(LevelIndex::new(j, k), x) != 0.0)
            .collect();
        assert_eq!(HAAR.active_translates(j, x), scan, "j={j} x={x}");
    }
}

#[test]
fn haar_scaling_functions_are_orthonormal_per_level() {
    let mut rng = rng(101);
    for _ in 0..20 {
        let j = rng.random_range(0..=6);
        let ks: Vec<i64> = (0..5).map(|_| rng.random_range(-4..8)).collect();
        for &k1 in &ks {
            for &k2 in &ks {
                let i1 = LevelIndex::new(j, k1);
                let i2 = LevelIndex::new(j, k2);
                let iv = HAAR.support_interval(i1);
                let inner = integrate_midpoint(
                    |x| HAAR.eval_phi_jk(i1, x) * HAAR.eval_phi_jk(i2, x),
                    iv.lo,
                    iv.hi,
                    QUADRATURE_STEP,
                );
                let expect = if k1 == k2 { 1.0 } else { 0.0 };
                assert!((inner - expect).abs() < 1e-9, "j={j} k1={k1} k2={k2}: {inner}");
            }
        }
    }
}

#[test]
fn step_function_cover_bound() {
    let mut rng = rng(102);
    for _ in 0..500 {
        let cells = rng.random_range(1..=40);
        let mut edges = vec![rng.random_range(-3.0..2.0)];
        for _ in 0..cells {
            let last = *edges.last().unwrap();
            edges.push(last + rng.random_range(0.001..0.7));
        }
        let values: Vec<f64> = (0..cells).map(|_| rng.random_range(0.0..5.0)).collect();
        let l1 = step_l1(&edges, &values);
        for j in 0..=8 {
            let lhs = lem2_lhs(HAAR, j, &edges, &values);
            assert!(lhs <= 2.0 * HAAR.half_support() * l1 + 1e-9, "j={j}: {lhs} vs {l1}");
        }
    }
}

#[test]
fn overlap_count_below_four_l() {
    for j in 0..=20 {
        for k in -50..50 {
            assert!((HAAR.overlap_count(j, k) as f64) < 4.0 * HAAR.half_support());
        }
    }
}

#[test]
fn dirichlet_duals_satisfy_duality_and_norm_bound() {
    let mut rng = rng(103);
    for _ in 0..100 {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(10 * m..=10 * m + 400);
        let w = dirichlet_matrix(m, n, &mut rng);
        let a = dual_basis(&w).unwrap();
        let prod = w.entries() * a.vectors().transpose() / n as f64;
        for r in 0..m {
            for c in 0..m {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((prod[(r, c)] - expect).abs() < 1e-8);
            }
        }
        let sum_sq: f64 = a.vectors().iter().map(|x| x * x).sum();
        assert!(sum_sq <= m as f64 * n as f64 / a.k_single() + 1e-6);
        assert!(a.norm_sum() <= m as f64 / a.k_single() + 1e-8);
    }
}

#[test]
fn solver_agrees_with_cofactor_oracle() {
    let mut rng = rng(104);
    for _ in 0..100 {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(10 * m..=200);
        let w = dirichlet_matrix(m, n, &mut rng);
        let a = dual_basis(&w).unwrap();
        let oracle = cofactor_dual(&w);
        let diff = (a.vectors() - &oracle).amax();
        assert!(diff <= 1e-8 * oracle.amax().max(1.0), "M={m} n={n}: {diff}");
    }
}

#[test]
fn gram_spectrum_is_psd_and_sorted() {
    let mut rng = rng(105);
    for _ in 0..50 {
        let m = rng.random_range(1..=5);
        let w = dirichlet_matrix(m, rng.random_range(m..=80), &mut rng);
        let spec = gram_spectrum(&w).unwrap();
        assert!(spec.eigenvalues.windows(2).all(|p| p[0] <= p[1]));
        assert!(spec.eigenvalues[0] >= -1e-10);
        assert_eq!(spec.lambda_min, spec.eigenvalues[0]);
        assert_eq!(spec.gram, spec.gram.transpose());
    }
}

#[test]
fn statistic_oracle_equivalence_random_instances() {
    let mut rng = rng(106);
    for _ in 0..200 {
        let m = rng.random_range(1..=3);
        let n = rng.random_range(10 * m..=200);
        let j = rng.random_range(0..=6);
        let sample = random_sample(m, n, &mut rng);
        let (a, b) = sample.dual_bases().unwrap();
        let naive = statistic_naive(&sample, &a, &b, HAAR, j).unwrap();
        let fast = statistic_fast(&sample, &a, &b, HAAR, j).unwrap();
        assert!(oracle_discrepancy(&sample, &a, &b, j, naive, fast) <= 1e-9, "{naive} vs {fast}");
    }
}

#[test]
fn statistic_is_deterministic() {
    let spec = builtin_model("model2_h1").unwrap();
    let s = sample_mixture(&spec, 1000, 5).unwrap();
    let (a, b) = s.dual_bases().unwrap();
    let t1 = statistic_fast(&s, &a, &b, HAAR, 2).unwrap();
    let t2 = statistic_fast(&s, &a, &b, HAAR, 2).unwrap();
    assert_eq!(t1.to_bits(), t2.to_bits());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn swapping_samples_leaves_statistic_unchanged(seed in any::<u64>(), m in 1usize..=3, j in 0u32..=6) {
        let mut rng = rng(seed);
        let n = rng.random_range(10 * m..=150);
        let sample = random_sample(m, n, &mut rng);
        let (a, b) = sample.dual_bases().unwrap();
        let t = statistic_fast(&sample, &a, &b, HAAR, j).unwrap();
        let swapped = statistic_fast(&sample.swapped(), &b, &a, HAAR, j).unwrap();
        prop_assert!((t - swapped).abs() <= 1e-12 * t.abs().max(1e-300));
    }

    #[test]
    fn relabelling_observations_leaves_statistic_unchanged(seed in any::<u64>(), m in 1usize..=3, j in 0u32..=6) {
        let mut rng = rng(seed);
        let n = rng.random_range(10 * m..=150);
        let sample = random_sample(m, n, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted = sample.reindexed(&perm, &perm).unwrap();
        let (a, b) = sample.dual_bases().unwrap();
        let (pa, pb) = permuted.dual_bases().unwrap();
        let t = statistic_fast(&sample, &a, &b, HAAR, j).unwrap();
        let tp = statistic_fast(&permuted, &pa, &pb, HAAR, j).unwrap();
        let naive = statistic_naive(&sample, &a, &b, HAAR, j).unwrap();
        prop_assert!(oracle_discrepancy(&sample, &a, &b, j, naive, tp) <= 1e-9, "{t} vs {tp}");
    }

    #[test]
    fn lambda_min_is_permutation_invariant(seed in any::<u64>(), m in 1usize..=4) {
        let mut rng = rng(seed);
        let n = rng.random_range(m..=60);
        let w = dirichlet_matrix(m, n, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let a = gram_spectrum(&w).unwrap().lambda_min;
        let b = gram_spectrum(&w.select_columns(&perm)).unwrap().lambda_min;
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn level_is_smallest_admissible(n in 2usize..1_000_000, s in 0.05f64..20.0) {
        let x = 2.0 / (1.0 + 4.0 * s) * (n as f64).log2();
        let rp = match select_level(n, s) {
            Ok(rp) => rp,
            Err(_) => {
                prop_assert!(x.ceil() > 20.0 - 1e-9);
                return Ok(());
            }
        };
        let target = (n as f64).powf(-2.0 / (1.0 + 4.0 * s));
        let j = rp.j_n as f64;
        prop_assert!((-j).exp2() <= target * (1.0 + 1e-9));
        if rp.j_n > 0 {
            prop_assert!((1.0 - j).exp2() > target);
        }
        prop_assert!((rp.r_n - (n as f64).powf(-2.0 * s / (1.0 + 4.0 * s))).abs() <= 1e-15);
        prop_assert!(rp.r_n * rp.r_n >= (-2.0 * s * j).exp2() / (2.0 * s).exp2() * (1.0 - 1e-9));
    }

    #[test]
    fn phi_jk_integrates_to_inverse_root_scale(j in 0u32..10, k in -20i64..20) {
        let idx = LevelIndex::new(j, k);
        let iv = HAAR.support_interval(idx);
        let got = integrate_midpoint(|x| HAAR.eval_phi_jk(idx, x), iv.lo, iv.hi, QUADRATURE_STEP);
        prop_assert!((got - (-(j as f64) / 2.0).exp2()).abs() < 1e-9);
    }

    #[test]
    fn phi_jk_vanishes_off_support(j in 0u32..12, k in -100i64..100, x in -200.0f64..200.0) {
        let idx = LevelIndex::new(j, k);
        if !HAAR.support_interval(idx).contains(x) {
            prop_assert_eq!(HAAR.eval_phi_jk(idx, x), 0.0);
        }
    }

    #[test]
    fn besov_seminorm_is_homogeneous(entries in prop::collection::vec((0u32..8, -10i64..10, -1.0f64..1.0), 0..20), c in 0.1f64..5.0, s in 0.1f64..3.0) {
        let arr: CoefficientArray = entries.iter().map(|&(j, k, v)| (LevelIndex::new(j, k), v)).collect();
        let base = arr.besov_tail_seminorm(s);
        let scaled = arr.scaled(c).besov_tail_seminorm(s);
        prop_assert!((scaled - c * c * base).abs() <= 1e-9 * scaled.max(1e-300));
    }

    #[test]
    fn csv_round_trip_is_bit_identical(
        values in prop::collection::vec((any::<f64>().prop_filter("finite", |v| v.is_finite()), any::<f64>().prop_filter("finite", |v| v.is_finite())), 1..40),
        split in 0.0f64..=1.0,
    ) {
        let n = values.len();
        let w = vec![split, 1.0 - split];
        let cols = vec![w; n];
        let omega = WeightMatrix::from_columns(&cols).unwrap();
        let sample = PairedSample::new(
            values.iter().map(|v| v.0).collect(),
            values.iter().map(|v| v.1).collect(),
            omega.clone(),
            omega,
        ).unwrap();
        let mut buf = Vec::new();
        write_sample_csv(&mut buf, &sample).unwrap();
        let back = parse_sample_reader(buf.as_slice(), "mem.csv".as_ref(), false).unwrap();
        prop_assert_eq!(back, sample);
    }

    #[test]
    fn c_t_is_monotone(r in 0.1f64..5.0, l in 0.5f64..3.0, phi in 0.5f64..3.0, bump in 1.0f64..2.0) {
        let base = appendix_CT(r, l, phi).unwrap();
        prop_assert!(appendix_CT(r * bump, l, phi).unwrap() >= base);
        prop_assert!(appendix_CT(r, l * bump, phi).unwrap() >= base);
        prop_assert!(appendix_CT(r, l, phi * bump).unwrap() >= base);
    }

    #[test]
    fn upper_constant_behaviour(k in 0.005f64..0.5, gamma in 0.01f64..0.98) {
        let c = upper_constant(&constants(k, gamma)).unwrap();
        prop_assert!(upper_constant(&constants(k * 1.1, gamma)).unwrap() < c);
        prop_assert!(upper_constant(&constants(k, (gamma * 1.01).min(0.99))).unwrap() <= c);
        prop_assert!(c * c >= 2.0 * 2.0);
    }

    #[test]
    fn theoretical_constant_halves_with_doubled_k(k in 0.005f64..0.4, gamma in 0.01f64..0.99) {
        let t = theoretical_constant(&constants(k, gamma)).unwrap();
        let t2 = theoretical_constant(&constants(2.0 * k, gamma)).unwrap();
        prop_assert!((t - 2.0 * t2).abs() <= 1e-12 * t);
    }

    #[test]
    fn lower_constant_capped(k in 0.005f64..0.5, gamma in 0.01f64..=1.0, c1 in 0.01f64..3.0, s in 0.1f64..5.0) {
        let c = ModelConstants { c1, s, ..constants(k, gamma) };
        let got = lower_constant(&c).unwrap();
        let cap = (2.0 * c.r * c.r * (-4.0 * s).exp2() / (4.0 * 4.0)).powf(0.25);
        prop_assert!(got <= cap * (1.0 + 1e-12));
        prop_assert!(got >= 0.0);
    }

    #[test]
    fn optimal_sum_matches_exhaustive_sweep(
        null in prop::collection::vec(0u8..12, 1..12),
        alt in prop::collection::vec(0u8..12, 1..12),
    ) {
        let null: Vec<f64> = null.into_iter().map(f64::from).collect();
        let alt: Vec<f64> = alt.into_iter().map(f64::from).collect();
        let got = optimal_sum_from_statistics(&null, &alt).unwrap();

        let mut candidates: Vec<f64> = null.iter().chain(&alt).copied().collect();
        candidates.sort_by(f64::total_cmp);
        let mut best = (f64::INFINITY, f64::NAN);
        for &t in &candidates {
            let e = null.iter().filter(|&&v| v > t).count() as f64 / null.len() as f64
                + alt.iter().filter(|&&v| v <= t).count() as f64 / alt.len() as f64;
            if e < best.0 - 1e-12 {
                best = (e, t);
            }
        }
        prop_assert!((got.gamma_opt - best.0).abs() < 1e-12);
        prop_assert_eq!(got.t_opt, best.1);
    }
}

#[test]
fn builtin_registry_k_values() {
    for (name, target) in [("model1_h0", 0.013), ("model2_h0", 0.033), ("model3_h0", 0.068)] {
        for n in [200, 500, 1000] {
            assert!((model_k(name, n) - target).abs() <= 0.001, "{name} n={n}");
        }
    }
    let spec = builtin_model("example_3comp").unwrap();
    let (o, s) = expand_weights(&spec, 500).unwrap();
    assert!(mixtest_core::model_K(&o, &s).unwrap() > 0.0);
}

#[test]
fn weight_matrix_tolerance_boundary() {
    assert!(WeightMatrix::from_columns(&[vec![0.5, 0.5 + 5e-13]]).is_ok());
    assert!(WeightMatrix::from_columns(&[vec![0.5, 0.5 + 5e-12]]).is_err());
}

#[test]
fn normal_quantile_matches_statrs() {
    use statrs::distribution::{ContinuousCDF, Normal};
    let reference = Normal::new(0.0, 1.0).unwrap();
    for i in 1..1000 {
        let p = i as f64 / 1000.0;
        let got = mixtest_core::numeric::normal_quantile(p);
        let expect = reference.inverse_cdf(p);
        assert!((got - expect).abs() <= 1e-9 * expect.abs().max(1.0), "p={p}: {got} vs {expect}");
    }
}

#[test]
fn simulated_sample_round_trips_through_file() {
    let spec = builtin_model("model1_h1").unwrap();
    let sample = sample_mixture(&spec, 1000, 17).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model1.csv");
    mixtest_core::io::write_sample_csv_path(&path, &sample).unwrap();
    let back = mixtest_core::io::parse_sample_csv(&path).unwrap();
    assert!(back.y().iter().zip(sample.y()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(back.z().iter().zip(sample.z()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(back, sample);
}
