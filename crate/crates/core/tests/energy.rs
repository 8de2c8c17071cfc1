use genesol_core::energy::{
    cofactor, d_norm_dual, d_norm_primal, determinant, polyconvex_kinematics, ConvexElasticModel, LiquidCrystalModel,
    PolyconvexModel,
};
use genesol_core::linalg::{dot, matvec, outer, spectral_norm};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng) -> [f64; 9] {
    let mut m = [0.0; 9];
    m.iter_mut().for_each(|x| *x = 2.0 * rng.random::<f64>() - 1.0);
    m
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0];
        let n = dot(&v, &v).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[test]
fn determinant_and_cofactor_derivatives_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5;
    for _ in 0..100 {
        let f = random_matrix(&mut rng);
        let kin = polyconvex_kinematics(&f);
        for jb in 0..9 {
            let (mut p, mut m) = (f, f);
            p[jb] += h;
            m[jb] -= h;
            let ddet = (determinant(&p) - determinant(&m)) / (2.0 * h);
            assert!(rel_err(kin.ddet[jb], ddet) <= 1e-7);
            let (cp, cm) = (cofactor(&p), cofactor(&m));
            for ia in 0..9 {
                let fd = (cp[ia] - cm[ia]) / (2.0 * h);
                assert!(rel_err(kin.dcof[ia * 9 + jb], fd) <= 1e-7);
            }
        }
    }
}

#[test]
fn zeta_is_the_gradient_of_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-5;
    for (alpha, beta) in [(0.0, 0.0), (1.0, 1.0)] {
        let model = PolyconvexModel::example(alpha, beta).unwrap();
        for _ in 0..100 {
            let f = random_matrix(&mut rng);
            let z = model.zeta(&f);
            for k in 0..9 {
                let (mut p, mut m) = (f, f);
                p[k] += h;
                m[k] -= h;
                let fd = (model.sigma(&p) - model.sigma(&m)) / (2.0 * h);
                assert!(rel_err(z[k], fd) <= 1e-6, "({alpha},{beta}) entry {k}: {} vs {fd}", z[k]);
            }
        }
    }
}

#[test]
fn oseen_frank_forms_agree_under_the_norm_restriction() {
    let model = LiquidCrystalModel::new(1.3, 2.1, 0.4, 0.1, 1.0, 0.5, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..1000 {
        let d = random_unit(&mut rng);
        let raw = random_matrix(&mut rng);
        // Project each column onto the plane orthogonal to d so that ∇dᵀd = 0.
        let mut gd = raw;
        for j in 0..3 {
            let s: f64 = (0..3).map(|i| raw[i * 3 + j] * d[i]).sum();
            for i in 0..3 {
                gd[i * 3 + j] -= s * d[i];
            }
        }
        let of = model.oseen_frank(&d, &gd).unwrap();
        assert!((of.full - of.reduced).abs() <= 1e-12 * of.reduced.abs().max(1.0));
    }
}

#[test]
fn oseen_frank_derivatives_match_finite_differences() {
    let model = LiquidCrystalModel::new(1.0, 1.7, 0.4, 0.1, 1.0, 0.5, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let h = 1e-6;
    for _ in 0..50 {
        let d = random_unit(&mut rng);
        let gd = random_matrix(&mut rng);
        let of = model.oseen_frank(&d, &gd).unwrap();
        for k in 0..9 {
            let (mut p, mut m) = (gd, gd);
            p[k] += h;
            m[k] -= h;
            let fd = (model.oseen_frank(&d, &p).unwrap().value - model.oseen_frank(&d, &m).unwrap().value) / (2.0 * h);
            assert!(rel_err(of.d_grad[k], fd) <= 1e-7);
        }
    }
}

#[test]
fn d_norm_anchor() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for k in [0.0, 0.5, 2.0] {
        for _ in 0..100 {
            let d = random_unit(&mut rng);
            let mut a = outer(&d, &d);
            a.iter_mut().for_each(|x| *x *= k);
            for i in 0..3 {
                a[i * 4] += 1.0;
            }
            let v = d_norm_primal(&d, k, &a).unwrap();
            assert!((v - 1.0).abs() <= 1e-12, "k {k}: {v}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regularized_stress_is_strongly_monotone(
        a in prop::array::uniform4(-3.0f64..3.0),
        b in prop::array::uniform4(-3.0f64..3.0),
        delta in 0.0f64..2.0,
    ) {
        let model = ConvexElasticModel::regularized(2, delta).unwrap();
        let (m, big_m) = model.bounds();
        let da = model.stress(&a);
        let db = model.stress(&b);
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let sdiff: Vec<f64> = da.iter().zip(&db).map(|(x, y)| x - y).collect();
        let n2 = dot(&diff, &diff);
        prop_assert!(dot(&sdiff, &diff) >= m * n2 - 1e-12);
        prop_assert!(dot(&sdiff, &sdiff).sqrt() <= big_m * n2.sqrt() + 1e-12);
    }

    #[test]
    fn energy_is_convex_along_segments(
        a in prop::array::uniform4(-3.0f64..3.0),
        b in prop::array::uniform4(-3.0f64..3.0),
        t in 0.0f64..1.0,
    ) {
        let model = ConvexElasticModel::regularized(2, 0.7).unwrap();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (1.0 - t) * x + t * y).collect();
        let chord = (1.0 - t) * model.energy(&a) + t * model.energy(&b);
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        prop_assert!(chord - model.energy(&mid) >= 0.5 * t * (1.0 - t) * dot(&diff, &diff) - 1e-12);
    }

    #[test]
    fn primal_d_norm_dominates_the_projected_part(
        raw in prop::array::uniform9(-2.0f64..2.0),
        dir in prop::array::uniform3(-1.0f64..1.0),
        k in 0.0f64..3.0,
    ) {
        let n = dot(&dir, &dir).sqrt();
        prop_assume!(n > 0.2);
        let d = [dir[0] / n, dir[1] / n, dir[2] / n];
        let v = d_norm_primal(&d, k, &raw).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!(v <= spectral_norm(&raw) + 1e-9);
        let dad = dot(&d, &matvec(&raw, &d));
        prop_assert!(v * v >= dad / (k + 1.0) - 1e-12);
    }

    #[test]
    fn dual_d_norm_of_psd_matrices(
        g in prop::array::uniform9(-2.0f64..2.0),
        dir in prop::array::uniform3(-1.0f64..1.0),
        k in 0.0f64..3.0,
    ) {
        let n = dot(&dir, &dir).sqrt();
        prop_assume!(n > 0.2);
        let d = [dir[0] / n, dir[1] / n, dir[2] / n];
        // GᵀG is positive semi-definite.
        let mut a = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                a[i * 3 + j] = (0..3).map(|l| g[l * 3 + i] * g[l * 3 + j]).sum();
            }
        }
        let v = d_norm_dual(&d, k, &a).unwrap();
        let tr = a[0] + a[4] + a[8];
        prop_assert!((v * v - tr - k * dot(&d, &matvec(&a, &d))).abs() <= 1e-9 * (1.0 + tr));
    }
}
