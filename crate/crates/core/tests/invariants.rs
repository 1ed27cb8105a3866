use std::sync::OnceLock;

use iet_core::cyclotomic::{block_rank, rank_over_cyclotomic, CycloInt};
use iet_core::iet::{discrepancy_series, discrepancy_series_stepwise, twisted_sup_series, twisted_sup_series_stepwise, Subinterval};
use iet_core::numeric::seeded_simplex;
use iet_core::renorm::{rauzy_step, zorich_step};
use iet_core::suspension::{build_suspension, fp_map};
use iet_core::twisted::{twisted_zorich_matrix, twisted_zorich_matrix_naive};
use iet_core::{irreducible_classes, omega, IetMap, LocallyConstantFunction, MoveKind, Permutation, Precision, TwistParameter};
use proptest::prelude::*;
use rug::Float;

fn perms() -> &'static [Permutation] {
    static ALL: OnceLock<Vec<Permutation>> = OnceLock::new();
    ALL.get_or_init(|| {
        (2..=5)
            .flat_map(irreducible_classes)
            .flat_map(|c| c.vertices.clone())
            .collect()
    })
}

fn perm_strategy() -> impl Strategy<Value = Permutation> {
    (0..perms().len()).prop_map(|i| perms()[i].clone())
}

fn kind_strategy() -> impl Strategy<Value = MoveKind> {
    prop_oneof![Just(MoveKind::Top), Just(MoveKind::Bottom)]
}

fn tiny(bits: u32, k: u32) -> Float {
    Float::with_val(bits, 1u32) >> k
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rauzy_move_is_invertible(pi in perm_strategy(), kind in kind_strategy()) {
        let next = pi.rauzy_move(kind);
        prop_assert!(next.is_irreducible());
        prop_assert_eq!(next.inverse_rauzy_move(kind), Some(pi));
    }

    #[test]
    fn omega_is_antisymmetric(pi in perm_strategy()) {
        prop_assert!(omega(&pi).is_antisymmetric());
    }

    #[test]
    fn rauzy_matrix_pulls_lengths_back(pi in perm_strategy(), seed in any::<u64>()) {
        let prec = Precision::with_bits(128);
        let lam = seeded_simplex(seed, pi.d(), 128);
        let s = rauzy_step(&lam, &pi, prec).unwrap();
        prop_assert_eq!(s.matrix.det().to_i64().map(i64::abs), Some(1));
        let b = s.matrix.to_f64_rows();
        for j in 0..pi.d() {
            let back: Float = s.next_lambda.iter().enumerate().map(|(i, x)| Float::with_val(128, x * b[i][j])).fold(prec.zero(), |a, x| a + x);
            prop_assert!(Float::with_val(128, &back - &lam[j]).abs() < tiny(128, 110));
        }
    }

    #[test]
    fn zorich_matrix_is_unimodular_and_proportional(pi in perm_strategy(), seed in any::<u64>()) {
        let prec = Precision::with_bits(256);
        let lam = seeded_simplex(seed, pi.d(), 256);
        let s = zorich_step(&lam, &pi, prec).unwrap();
        prop_assert_eq!(s.matrix.det().to_i64().map(i64::abs), Some(1));
        prop_assert!(s.matrix.all_nonnegative());
        let b = s.matrix.to_f64_rows();
        let back: Vec<f64> = (0..pi.d()).map(|j| (0..pi.d()).map(|i| s.next_lambda[i].to_f64() * b[i][j]).sum()).collect();
        let total: f64 = back.iter().sum();
        for (x, y) in back.iter().zip(&lam) {
            prop_assert!((x / total - y.to_f64()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_twist_gives_integer_matrix(pi in perm_strategy(), seed in any::<u64>()) {
        let prec = Precision::with_bits(256);
        let lam = seeded_simplex(seed, pi.d(), 256);
        let (m, _) = twisted_zorich_matrix(&lam, &pi, &TwistParameter::zero(pi.d()), prec).unwrap();
        let s = zorich_step(&lam, &pi, prec).unwrap();
        prop_assert!(m.equals_int(&s.matrix));
    }

    #[test]
    fn twisted_closed_form_matches_naive(pi in perm_strategy(), seed in any::<u64>(), tw in proptest::collection::vec(0.0f64..1.0, 5)) {
        let prec = Precision::with_bits(256);
        let d = pi.d();
        let lam = seeded_simplex(seed, d, 256);
        let zeta = TwistParameter::from_f64(&tw[..d], prec);
        let (a, _) = twisted_zorich_matrix(&lam, &pi, &zeta, prec).unwrap();
        let (b, _) = twisted_zorich_matrix_naive(&lam, &pi, &zeta, prec).unwrap();
        let (ra, rb) = (a.to_c64_rows(), b.to_c64_rows());
        let scale = 1.0 + b.max_abs();
        for i in 0..d {
            for j in 0..d {
                prop_assert!((ra[i][j] - rb[i][j]).norm() < 1e-9 * scale);
            }
        }
        prop_assert!((a.det().to_c64().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn doubling_matches_stepwise(pi in perm_strategy(), seed in any::<u64>(), a in 0.0f64..0.5, w in 0.05f64..0.5, tw in proptest::collection::vec(0.0f64..1.0, 5)) {
        let prec = Precision::with_bits(128);
        let d = pi.d();
        let t = IetMap::new(pi.clone(), seeded_simplex(seed, d, 128), prec).unwrap();
        let schedule = [1, 3, 8, 17, 40, 64];
        let j = Subinterval::from_f64(a, a + w, prec);
        let m = t.to_piecewise();
        let fast = discrepancy_series(&m, &j, &schedule).unwrap();
        let slow = discrepancy_series_stepwise(&m, &j, &schedule).unwrap();
        for ((n1, x), (n2, y)) in fast.iter().zip(&slow) {
            prop_assert_eq!(n1, n2);
            prop_assert!((x - y).abs() < 1e-9, "N = {}: {} vs {}", n1, x, y);
        }
        let f = LocallyConstantFunction::real(&tw.iter().rev().take(d).map(|v| v - 0.5).collect::<Vec<_>>());
        let zeta = TwistParameter::from_f64(&tw[..d], prec);
        let fast = twisted_sup_series(&t, &f, &zeta, &schedule).unwrap();
        let slow = twisted_sup_series_stepwise(&t, &f, &zeta, &schedule).unwrap();
        for ((_, x), (_, y)) in fast.iter().zip(&slow) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + y));
        }
    }

    #[test]
    fn suspension_tiles(idx in 0usize..64, hat in any::<u64>(), s in 0.05f64..0.95, p in prop_oneof![Just(2u64), Just(3), Just(5)], nseed in any::<u64>()) {
        let shaped: Vec<&Permutation> = perms().iter().filter(|q| q.last_top_is_first_bottom()).collect();
        let pi = shaped[idx % shaped.len()];
        let d = pi.d();
        let prec = Precision::with_bits(128);
        let lam_hat = seeded_simplex(hat, d - 1, 128);
        let fp = fp_map(pi, &lam_hat, &prec.float(s), p).unwrap();
        let t = IetMap::new(pi.clone(), fp.lambda, prec).unwrap();
        let mut nvec: Vec<i64> = (0..d).map(|i| ((nseed >> (8 * i)) % p) as i64).collect();
        nvec[pi.alpha_t()] = 1 + ((nseed >> 60) % (p - 1)) as i64;
        let sus = build_suspension(&t, &nvec, p).unwrap();
        prop_assert!(sus.tiling_defect() < 1e-20);
        prop_assert!(sus.residues_constant());
        prop_assert!(sus.max_stopping_time() < 2 * p as usize);
        prop_assert_eq!(sus.intervals().len(), p as usize * (d - 1) + 1);
    }

    #[test]
    fn certified_rank_matches_block_rank(p in prop_oneof![Just(3u64), Just(5), Just(7)], rows in 1usize..4, cols in 1usize..4, entries in proptest::collection::vec((-2i64..3, 0i64..7), 16), dup in any::<bool>()) {
        let mut m: Vec<Vec<CycloInt>> = (0..rows)
            .map(|i| (0..cols).map(|j| {
                let (c, r) = entries[(i * cols + j) % entries.len()];
                let mut z = CycloInt::from_int(p, c).unwrap();
                z.add_root(r, 1);
                z
            }).collect())
            .collect();
        if dup && rows > 1 {
            let w = CycloInt::root(p, 1).unwrap();
            m[rows - 1] = m[0].iter().map(|z| z.mul(&w)).collect();
        }
        prop_assert_eq!(rank_over_cyclotomic(&m).unwrap(), block_rank(&m).unwrap());
    }
}
