use std::f64::consts::TAU;

use genesol_core::torus::{curl, divergence, gradient, integrate, laplacian, Rank, TorusField, TorusGrid};
use proptest::prelude::*;

fn field_strategy(dim: usize, n: usize, rank: Rank) -> impl Strategy<Value = TorusField> {
    let grid = TorusGrid::uniform(dim, n, 1.0 + n as f64 * 0.1).unwrap();
    let len = rank.components(dim) * grid.cells();
    prop::collection::vec(-1.0f64..1.0, len).prop_map(move |v| TorusField::from_values(grid, rank, v).unwrap())
}

fn pair_strategy(rank_a: Rank, rank_b: Rank) -> impl Strategy<Value = (TorusField, TorusField)> {
    (1usize..=3, 4usize..=6).prop_flat_map(move |(dim, n)| (field_strategy(dim, n, rank_a), field_strategy(dim, n, rank_b)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_and_divergence_are_negative_adjoints((u, m) in pair_strategy(Rank::Vector, Rank::Matrix)) {
        let lhs = gradient(&u).unwrap().inner(&m).unwrap();
        let rhs = -u.inner(&divergence(&m).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn scalar_summation_by_parts((f, v) in pair_strategy(Rank::Scalar, Rank::Vector)) {
        let lhs = gradient(&f).unwrap().inner(&v).unwrap();
        let rhs = -f.inner(&divergence(&v).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn derivatives_commute_with_shifts(f in (1usize..=3, 4usize..=6).prop_flat_map(|(d, n)| field_strategy(d, n, Rank::Vector)), k in -3isize..=3) {
        for axis in 0..f.grid().dim() {
            let a = gradient(&f.shifted(axis, k)).unwrap();
            let b = gradient(&f).unwrap().shifted(axis, k);
            prop_assert!(a.sub(&b).unwrap().max_abs() <= 1e-13);
        }
    }

    #[test]
    fn derivatives_integrate_to_zero(f in (1usize..=3, 4usize..=6).prop_flat_map(|(d, n)| field_strategy(d, n, Rank::Vector))) {
        let div = divergence(&f).unwrap();
        prop_assert!(integrate(&div).unwrap().abs() <= 1e-12);
        let lap = laplacian(&div).unwrap();
        prop_assert!(integrate(&lap).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn curl_is_self_adjoint_on_matrices((a, b) in (4usize..=5).prop_flat_map(|n| (field_strategy(3, n, Rank::Matrix), field_strategy(3, n, Rank::Matrix)))) {
        let lhs = curl(&a).unwrap().inner(&b).unwrap();
        let rhs = a.inner(&curl(&b).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }
}

#[test]
fn central_differences_converge_at_second_order() {
    let err = |n: usize| {
        let grid = TorusGrid::uniform(2, n, 1.0).unwrap();
        let f = TorusField::from_fn(grid, Rank::Scalar, |x, o| o[0] = (TAU * x[0]).sin() * (TAU * x[1]).cos()).unwrap();
        let exact = TorusField::from_fn(grid, Rank::Vector, |x, o| {
            o[0] = TAU * (TAU * x[0]).cos() * (TAU * x[1]).cos();
            o[1] = -TAU * (TAU * x[0]).sin() * (TAU * x[1]).sin();
        })
        .unwrap();
        gradient(&f).unwrap().sub(&exact).unwrap().max_abs()
    };
    let (e1, e2, e3) = (err(16), err(32), err(64));
    assert!(e1 / e2 >= 3.8 && e2 / e3 >= 3.8, "{e1} {e2} {e3}");
}
