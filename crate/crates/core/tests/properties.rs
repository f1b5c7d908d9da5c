mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rcsdp_core::dc::rank_penalty;
use rcsdp_core::problem::synthetic_instance;
use rcsdp_core::spectral::{kyfan_norm, kyfan_subgradient, psd_split, sym_eigen};
use rcsdp_core::{
    objective_j, objective_jc, stopping_eta, FactoredPsd, PairMap, SdppInstance, SymmetricMatrix,
};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn symmetric(d: usize) -> impl Strategy<Value = SymmetricMatrix> {
    matrix(d, d).prop_map(|m| SymmetricMatrix::new(&m + m.transpose()).unwrap())
}

fn map_and_vector() -> impl Strategy<Value = (PairMap, DVector<f64>, SymmetricMatrix)> {
    (1usize..7, 1usize..15).prop_flat_map(|(d, p)| {
        (
            matrix(d, p),
            prop::collection::vec(-1.0f64..1.0, p),
            symmetric(d),
        )
            .prop_map(|(t, z, u)| (PairMap::new(t).unwrap(), DVector::from_vec(z), u))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity((map, z, u) in map_and_vector()) {
        let lhs = map.apply(&u).unwrap().dot(&z);
        let rhs = u.inner(&map.adjoint(&z).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn factored_apply_matches_dense((map, _z, _u) in map_and_vector(), cols in 1usize..4, seed in 0u64..1000) {
        let mut r = rng(seed);
        let v = random_factor(map.d(), cols.min(map.d()), &mut r);
        let dense = map.apply(&v.to_dense()).unwrap();
        let fact = map.apply_factored(&v).unwrap();
        prop_assert!((dense - fact).amax() <= 1e-10);
    }

    #[test]
    fn gram_matvec_is_a_of_adjoint((map, z, _u) in map_and_vector()) {
        let direct = map.apply(&map.adjoint(&z).unwrap()).unwrap();
        let gram = map.gram_matvec(&z).unwrap();
        prop_assert!((direct - gram).amax() <= 1e-9);
    }

    #[test]
    fn psd_split_invariants(m in (1usize..8).prop_flat_map(symmetric)) {
        let (pos, neg) = psd_split(&m).unwrap();
        let p = pos.to_dense();
        let n = neg.to_dense();
        let scale = 1.0 + m.frobenius_norm();
        prop_assert!(p.sub(&n).sub(&m).frobenius_norm() <= 1e-10 * scale);
        prop_assert!((pos.factor().transpose() * neg.factor()).amax() <= 1e-10 * scale);
        prop_assert!(pos.columns() + neg.columns() <= m.order());
        let oracle = proj_psd(m.as_matrix());
        prop_assert!((p.into_matrix() - oracle).amax() <= 1e-10 * scale);
    }

    #[test]
    fn kyfan_subgradient_inequality(a in (2usize..7).prop_flat_map(|d| (matrix(d, d), symmetric(d), 1..d)), c in 0.0f64..3.0) {
        let (f, v, r) = a;
        let u = SymmetricMatrix::new(&f * f.transpose()).unwrap();
        let g = kyfan_subgradient(&sym_eigen(&u).unwrap(), r, c).unwrap().to_dense();
        let fu = c * kyfan_norm(&u, r).unwrap();
        let fv = c * kyfan_norm(&v, r).unwrap();
        prop_assert!(fv + 1e-9 >= fu + g.inner(&v.sub(&u)));
    }

    #[test]
    fn rank_penalty_is_nonnegative(d in 1usize..7, cols in 1usize..7, r in 1usize..4, seed in 0u64..1000, c in 0.0f64..2.0) {
        let mut g = rng(seed);
        let u = random_factor(d, cols.min(d), &mut g);
        prop_assert!(rank_penalty(&u, r, c).unwrap() >= -1e-10);
    }

    #[test]
    fn eta_is_nonnegative_and_symmetric_in_scale(a in -1e3f64..1e3, b in -1e3f64..1e3) {
        let e = stopping_eta(a, b);
        prop_assert!(e >= 0.0);
        prop_assert!((e - (b - a).abs() / (1.0 + a.abs())).abs() <= 1e-15 * (1.0 + e));
    }

    #[test]
    fn objective_matches_dense(seed in 0u64..500, cols in 1usize..4) {
        let (inst, _) = synthetic_instance(5, 2, 12, 0.1, seed).unwrap();
        let mut g = rng(seed + 1);
        let u = random_factor(5, cols, &mut g);
        let res = apply_by_loops(&inst.map, u.to_dense().as_matrix()) - &inst.b;
        let dense = res.norm_squared() / inst.n_samples as f64;
        prop_assert!((objective_j(&inst, &u).unwrap() - dense).abs() <= 1e-10 * (1.0 + dense));
        let (vals, _) = dense_eigen(u.to_dense().as_matrix());
        let mut sorted: Vec<f64> = vals.iter().copied().collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let tail: f64 = sorted.iter().skip(2).sum();
        let jc = objective_jc(&inst, &u, 0.7).unwrap();
        prop_assert!((jc - dense - 0.7 * tail).abs() <= 1e-9 * (1.0 + jc.abs()));
    }

    #[test]
    fn instance_json_round_trip(seed in 0u64..200, noise in 0.0f64..0.5) {
        let (inst, _) = synthetic_instance(4, 2, 9, noise, seed).unwrap();
        let back = SdppInstance::from_json_str(&inst.to_json_string().unwrap()).unwrap();
        prop_assert_eq!(back, inst);
    }
}

#[test]
fn factored_identity_case() {
    let u = FactoredPsd::new(DMatrix::identity(3, 3)).unwrap();
    let (inst, _) = synthetic_instance(3, 1, 6, 0.0, 3).unwrap();
    let j = objective_j(&inst, &u).unwrap();
    let jc = objective_jc(&inst, &u, 0.5).unwrap();
    assert!((jc - j - 0.5 * 2.0).abs() < 1e-12);
}
