use std::f64::consts::TAU;

use genesol_core::coarse::{coarsen, eta, measure_moment, measure_moment_scalar};
use genesol_core::energy::ConvexElasticModel;
use genesol_core::integrator::{oscillation_values, oscillatory_initial_data};
use genesol_core::linalg::sym_eigen;
use genesol_core::measure::{
    exact_second_moment, gaussian_measure, match_moments, recover_defect, DefectField, ElasticMoments, MatchStage,
    MomentModel, NormKind, ScalarToy,
};
use genesol_core::torus::{gradient, Rank, TorusField, TorusGrid};
use genesol_core::Error;

#[test]
fn coarse_moments_of_the_two_value_oscillation() {
    let grid = TorusGrid::uniform(2, 16, 1.0).unwrap();
    let model = ConvexElasticModel::regularized(2, 0.6).unwrap();
    let amplitude = 0.8;
    let fine = oscillatory_initial_data(&grid, amplitude, 4).unwrap();
    let c = coarsen(&model, &fine, 4).unwrap();
    let m = &c.measure;
    assert!(m.normalization_error() <= 1e-12);

    let first = measure_moment(m, Rank::Matrix, |_, big_s, out| out.copy_from_slice(big_s)).unwrap();
    assert!(first.sub(&c.mean.f).unwrap().max_abs() <= 1e-12);
    let vel = measure_moment(m, Rank::Vector, |s, _, out| out.copy_from_slice(s)).unwrap();
    assert!(vel.sub(&c.mean.v).unwrap().max_abs() <= 1e-12);

    let dg = measure_moment(m, Rank::Matrix, |_, big_s, out| model.stress_into(big_s, out)).unwrap();
    let dg_mean = model.stress_field(&c.mean.f).unwrap();
    assert!(dg.sub(&dg_mean).unwrap().sub(&c.defect).unwrap().max_abs() <= 1e-12);

    // Each block holds both values equally, so the mean is I and the defect
    // is the midpoint gap of DG.
    let (a, b) = oscillation_values(2, amplitude);
    let (da, db) = (model.stress(&a), model.stress(&b));
    let di = model.stress(&[1.0, 0.0, 0.0, 1.0]);
    let expected: Vec<f64> = (0..4).map(|k| 0.5 * (da[k] + db[k]) - di[k]).collect();
    for cell in 0..c.defect.grid().cells() {
        let got = c.defect.cell(cell);
        for k in 0..4 {
            assert!((got[k] - expected[k]).abs() <= 1e-12);
        }
    }

    let eta_avg = measure_moment_scalar(m, |s, big_s| eta(&model, s, big_s)).unwrap();
    let cgrid = *c.mean.grid();
    for cell in 0..cgrid.cells() {
        let at_mean = eta(&model, &c.mean.v.cell(cell), &c.mean.f.cell(cell));
        assert!((eta_avg.values()[cell] - at_mean - c.surplus[cell]).abs() <= 1e-12);
        assert!(c.surplus[cell] >= -1e-12);
    }
    let fine_energy = model.total_energy(&fine.v, &fine.f).unwrap();
    let coarse_energy = model.total_energy(&c.mean.v, &c.mean.f).unwrap();
    assert!((fine_energy - coarse_energy - c.total_surplus()).abs() <= 1e-12 * (1.0 + fine_energy));
}

#[test]
fn jensen_surplus_is_non_negative_on_rough_data() {
    let grid = TorusGrid::uniform(2, 12, 1.0).unwrap();
    let model = ConvexElasticModel::regularized(2, 1.3).unwrap();
    let v = TorusField::from_fn(grid, Rank::Vector, |x, o| {
        o[0] = (17.0 * x[0] + 5.0 * x[1]).sin();
        o[1] = (11.0 * x[1]).cos();
    })
    .unwrap();
    let f = TorusField::from_fn(grid, Rank::Matrix, |x, o| {
        for (k, y) in o.iter_mut().enumerate() {
            *y = (3.0 + k as f64) * (7.0 * x[0] - 13.0 * x[1] + k as f64).sin();
        }
    })
    .unwrap();
    let fine = genesol_core::ElasticState::new(v, f, 0.0).unwrap();
    for block in [2, 3, 4, 6] {
        let c = coarsen(&model, &fine, block).unwrap();
        assert!(c.surplus.iter().all(|&s| s >= -1e-12));
    }
}

#[test]
fn dirac_measure_matches_exactly() {
    let model = ElasticMoments { model: ConvexElasticModel::regularized(1, 0.5).unwrap() };
    let mean = [0.3, 1.1];
    let mut g = [0.0];
    model.flux(&mean, &mut g);
    let found = match_moments(&model, &mean, &g, 0.0, 8).unwrap();
    assert_eq!(found.stage, MatchStage::Dirac);
    assert_eq!(found.atoms.len(), 1);
    assert_eq!(found.atoms[0].1, mean.to_vec());
    assert_eq!(found.gamma, 0.0);
}

#[test]
fn symmetric_scalar_case_gives_two_atoms() {
    let found = match_moments(&ScalarToy, &[0.0], &[], 1.0, 4).unwrap();
    assert_eq!(found.atoms.len(), 2);
    let mut points: Vec<f64> = found.atoms.iter().map(|(_, x)| x[0]).collect();
    points.sort_by(f64::total_cmp);
    assert!((points[0] + 1.0).abs() <= 1e-10 && (points[1] - 1.0).abs() <= 1e-10);
    for (w, _) in &found.atoms {
        assert!((w - 0.5).abs() <= 1e-10);
    }
    let r = found.residuals;
    assert!(r.mean <= 1e-10 && r.flux <= 1e-10 && r.energy <= 1e-10);
}

#[test]
fn elastic_moments_with_a_flux_gap() {
    let model = ElasticMoments { model: ConvexElasticModel::regularized(1, 0.8).unwrap() };
    let mean = [0.0, 0.5];
    let mut g = [0.0];
    model.flux(&mean, &mut g);
    let target = [g[0] - 0.05];
    let found = match_moments(&model, &mean, &target, 0.2, 16).unwrap();
    let r = found.residuals;
    assert!(r.normalization <= 1e-10 && r.mean <= 1e-10 && r.flux <= 1e-10 && r.energy <= 1e-8);
    assert!(found.atoms.iter().all(|(w, _)| *w > 0.0));
    assert!(found.gamma >= 0.0);
}

#[test]
fn moment_matching_rejects_bad_input() {
    assert!(matches!(match_moments(&ScalarToy, &[0.0], &[], -1.0, 4), Err(Error::Parameter(_))));
    assert!(matches!(match_moments(&ScalarToy, &[0.0, 1.0], &[], 1.0, 4), Err(Error::Shape(_))));
}

#[test]
fn gaussian_second_moment_within_sampling_error() {
    let a = [1.0, 0.5, -0.2, 0.3, 1.5, 0.0, 0.1, -0.4, 0.8];
    let b = [1.0, 0.3, 0.0, 0.3, 0.5, 0.1, 0.0, 0.1, 0.2];
    let m = gaussian_measure(&a, &b, 100_000, 7).unwrap();
    let exact = exact_second_moment(&a, &b);
    let got = m.second_moment();
    let err = got.iter().zip(&exact).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err <= 0.05, "max error {err}");
    assert!((m.weight() * m.atoms.len() as f64 - 1.0).abs() <= 1e-12);
    assert_eq!(gaussian_measure(&a, &b, 1000, 7).unwrap(), gaussian_measure(&a, &b, 1000, 7).unwrap());
}

#[test]
fn gaussian_rejects_indefinite_covariance() {
    let a = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let b = [1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0];
    assert!(matches!(gaussian_measure(&a, &b, 10, 0), Err(Error::Domain(_))));
}

fn trig_gradients(grid: TorusGrid, max_k: i32) -> Vec<TorusField> {
    let mut out = Vec::new();
    for k in 1..=max_k {
        for comp in 0..2 {
            for axis in 0..2 {
                for phase in [0.0, 0.25 * TAU] {
                    let psi = TorusField::from_fn(grid, Rank::Vector, |x, o| {
                        o[comp] = (TAU * k as f64 * x[axis] + phase).sin();
                    })
                    .unwrap();
                    out.push(gradient(&psi).unwrap());
                }
            }
        }
    }
    out
}

#[test]
fn defect_recovery_reproduces_the_residuals() {
    let grid = TorusGrid::uniform(2, 16, 1.0).unwrap();
    let basis = trig_gradients(grid, 2);
    let r = TorusField::from_fn(grid, Rank::Matrix, |x, o| {
        let s = 1.0 + 0.5 * (TAU * x[0]).cos();
        o[0] = s;
        o[3] = 0.3 * s;
    })
    .unwrap();
    let vol = grid.cell_volume();
    let residuals: Vec<f64> = basis
        .iter()
        .map(|g| -g.values().iter().zip(r.values()).map(|(a, b)| a * b).sum::<f64>() * vol)
        .collect();
    let rec = recover_defect(&residuals, &basis, NormKind::L2).unwrap();
    assert!(rec.constraint_error <= 1e-10);
    // The least-norm solution never exceeds the known feasible field.
    assert!(rec.raw.norm_l2() <= r.norm_l2() + 1e-12);
    for cell in 0..grid.cells() {
        let (vals, _) = sym_eigen(&rec.projected.r.cell(cell));
        assert!(vals[0] >= -1e-12);
    }
    assert!(DefectField::new(rec.projected.r.clone(), NormKind::L2).is_ok());
}

#[test]
fn defect_recovery_detects_dependent_bases() {
    let grid = TorusGrid::uniform(2, 8, 1.0).unwrap();
    let mut basis = trig_gradients(grid, 1);
    basis.push(basis[0].clone());
    let residuals = vec![0.0; basis.len()];
    assert!(matches!(recover_defect(&residuals, &basis, NormKind::L2), Err(Error::Conditioning(_))));
}
