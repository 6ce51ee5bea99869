use proptest::prelude::*;

use connectikit::construction::{build_construction, component_of, component_point, ComponentIndex};
use connectikit::numerics::{matrix_norm, svd, Mat, NormKind};
use connectikit::optimizers::{lion_direction, OptimizerKind};
use connectikit::paths::{eval_path, linear_path, swap_path};
use connectikit::relu_net::{forward, Dataset, RegSetSpec, TwoLayerNet};

fn mat(rows: usize, cols: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |v| Mat::from_vec(rows, cols, v).unwrap())
}

fn shaped_mat() -> impl Strategy<Value = Mat> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| mat(r, c))
}

fn net_and_data() -> impl Strategy<Value = (TwoLayerNet, Dataset)> {
    (1usize..4, 2usize..6, 2usize..8).prop_flat_map(|(d, m, n)| {
        (mat(d, m), prop::collection::vec(-2.0f64..2.0, m), mat(n, d))
            .prop_map(move |(w, a, x)| (TwoLayerNet::new(w, a).unwrap(), Dataset::new(x, vec![0.0; n]).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn svd_reconstructs(a in shaped_mat()) {
        let s = svd(&a).unwrap();
        prop_assert!(s.reconstruct().max_abs_diff(&a).unwrap() <= 1e-10 * (1.0 + a.max_abs()));
        prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn holder_duality(a in shaped_mat(), b_seed in prop::collection::vec(-3.0f64..3.0, 25)) {
        let (r, c) = a.shape();
        let b = Mat::from_vec(r, c, b_seed[..r * c].to_vec()).unwrap();
        let ip = a.inner(&b).unwrap().abs();
        for kind in [NormKind::MaxEntry, NormKind::Frobenius, NormKind::Operator] {
            let bound = matrix_norm(&a, kind).unwrap() * matrix_norm(&b, kind.dual()).unwrap();
            prop_assert!(ip <= bound * (1.0 + 1e-10) + 1e-12, "{kind:?}: {ip} > {bound}");
        }
    }

    #[test]
    fn norm_ordering(a in shaped_mat()) {
        let op = matrix_norm(&a, NormKind::Operator).unwrap();
        let fro = matrix_norm(&a, NormKind::Frobenius).unwrap();
        prop_assert!(a.max_abs() <= op * (1.0 + 1e-12) + 1e-12);
        prop_assert!(op <= fro * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn muon_direction_has_unit_operator_norm(m in shaped_mat()) {
        prop_assume!(m.max_abs() > 1e-6);
        let (u, _) = lion_direction(OptimizerKind::Muon, &m, &[1.0], false).unwrap();
        prop_assert!(matrix_norm(&u, NormKind::Operator).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn swap_keeps_forward((net, data) in net_and_data(), u in 0.0f64..=1.0) {
        let mut net = net;
        let m = net.width();
        net.set_neuron(m - 1, &vec![0.0; net.dim()], 0.0);
        let p = swap_path(&net, 0, m - 1).unwrap();
        let f0 = forward(&net, &data).unwrap();
        let fu = forward(&p.eval(u), &data).unwrap();
        for (a, b) in f0.iter().zip(&fu) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn linear_barrier_invariant_under_relabeling(
        (a, data) in net_and_data(),
        noise in prop::collection::vec(-1.0f64..1.0, 64),
        y in prop::collection::vec(-1.0f64..1.0, 8),
        shift in 0usize..5,
    ) {
        let mut data = data;
        let n = data.n();
        data.y = y[..n].to_vec();
        let (d, m) = (a.dim(), a.width());
        let b = TwoLayerNet::new(
            Mat::from_vec(d, m, noise[..d * m].to_vec()).unwrap(),
            noise[d * m..d * m + m].to_vec(),
        ).unwrap();
        let perm: Vec<usize> = (0..m).map(|i| (i + shift) % m).collect();
        let spec = RegSetSpec::new(NormKind::Frobenius, 1.0, m).unwrap();
        let p1 = eval_path(&linear_path(&a, &b).unwrap(), &data, &spec, 21).unwrap();
        let p2 = eval_path(&linear_path(&a.permuted(&perm), &b.permuted(&perm)).unwrap(), &data, &spec, 21).unwrap();
        prop_assert!((p1.barrier - p2.barrier).abs() <= 1e-9 * (1.0 + p1.barrier.abs()));
    }

    #[test]
    fn component_round_trip(id in 0u64..256, a1 in 0.2f64..3.0, a2 in 0.2f64..3.0) {
        let c = build_construction(8, 2f64.sqrt()).unwrap();
        let s = ComponentIndex::from_id(8, id);
        prop_assert_eq!(ComponentIndex::from_id(8, s.id()), s.clone());
        let net = component_point(&c, &s, a1, a2).unwrap();
        prop_assert_eq!(component_of(&c, &net, 1e-8).unwrap(), s);
    }
}
