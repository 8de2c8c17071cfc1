//! Stages of a run: solve, coarsen, construct, verify, then output.

use std::io::Write;
use std::path::{Path, PathBuf};

use genesol_core::coarse::coarsen;
use genesol_core::energy::{estimate_convexity_constants, ConvexElasticModel};
use genesol_core::evi::{evi_residual_elastic, mvs_residual_elastic, TestBasis};
use genesol_core::integrator::{
    manufactured_linear_solution, oscillatory_initial_data, NEWTON_FAILURE, NEWTON_TARGET,
};
use genesol_core::measure::{
    build_varifold, match_moments, psd_projection, DefectField, ElasticMoments, NormKind, ENERGY_TOLERANCE,
    MOMENT_TOLERANCE,
};
use genesol_core::{CoarseData, ElasticState, Integrator, Rank, TorusGrid, Trajectory};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, InitialKind, LoadedConfig, VerifyConfig};
use crate::error::{CliError, CliResult, StageExt};
use crate::formats::{
    create_output, read_trajectory, write_json_lines, write_trajectory, JsonLinesHeader, MeasureLine, VarifoldAtomLine,
    VarifoldLine, FORMAT_VERSION, MEASURES_FORMAT, VARIFOLD_FORMAT,
};
use crate::report::{
    Assertion, CoarsenSummary, ConstructSummary, GridSummary, Report, Series, SolveSummary, Tolerances,
    VerifySummary, REPORT_FORMAT,
};

/// Command-line overrides shared by the verbs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub force: bool,
    pub tolerance_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: None, force: false, tolerance_scale: 1.0 }
    }
}

/// Hessian samples behind the default verifier weight.
const WEIGHT_SAMPLES: usize = 2000;

/// Paths written by [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutputs {
    pub trajectory: PathBuf,
    pub measures: Option<PathBuf>,
    pub report: PathBuf,
    pub data: Option<PathBuf>,
}

fn outputs(loaded: &LoadedConfig) -> RunOutputs {
    let o = &loaded.config.output;
    RunOutputs {
        trajectory: loaded.resolve(&o.trajectory),
        measures: o.measures.as_ref().map(|p| loaded.resolve(p)),
        report: loaded.resolve(&o.report),
        data: o.data.as_ref().map(|p| loaded.resolve(p)),
    }
}

fn grid_of(config: &ExperimentConfig) -> CliResult<TorusGrid> {
    TorusGrid::uniform(config.model.dim, config.grid.n, config.grid.length).stage("initial")
}

fn initial_state(loaded: &LoadedConfig, grid: TorusGrid, seed: u64) -> CliResult<ElasticState> {
    let init = &loaded.config.initial;
    let mut state = match init.kind {
        InitialKind::Manufactured => manufactured_linear_solution(&grid, 0.0, init.amplitude).stage("initial")?,
        InitialKind::Oscillatory => {
            oscillatory_initial_data(&grid, init.amplitude, init.wavelength.unwrap_or(0)).stage("initial")?
        }
        InitialKind::File => {
            let path = loaded.resolve(init.path.as_deref().unwrap_or(Path::new("")));
            let (_, traj) = read_trajectory(&path)?;
            let last = traj.states.last().cloned().expect("trajectories have at least one node");
            if !last.grid().same_shape(&grid) {
                return Err(CliError::Config(format!("{} does not match the configured grid", path.display())));
            }
            last
        }
    };
    if init.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> =
            state.v.values().iter().map(|x| x + init.noise * (2.0 * rng.random::<f64>() - 1.0)).collect();
        state.v = genesol_core::TorusField::from_values(grid, Rank::Vector, noise).stage("initial")?;
    }
    Ok(state)
}

fn coarsen_all(model: &ConvexElasticModel, traj: &Trajectory, block: usize) -> CliResult<Vec<CoarseData>> {
    traj.states.iter().map(|s| coarsen(model, s, block)).collect::<genesol_core::Result<_>>().stage("coarsen")
}

fn json_header(format: &str, grid: &TorusGrid, nodes: usize, source: &str) -> JsonLinesHeader {
    JsonLinesHeader {
        format: format.into(),
        version: FORMAT_VERSION,
        dim: grid.dim(),
        extent: grid.extent().to_vec(),
        period: (0..grid.dim()).map(|a| grid.period(a)).collect(),
        nodes,
        source: source.into(),
    }
}

/// Empirical block measures as measure lines.
pub fn empirical_measure_lines(coarse: &[CoarseData]) -> Vec<MeasureLine> {
    let mut lines = Vec::new();
    for (node, c) in coarse.iter().enumerate() {
        for cell in 0..c.mean.grid().cells() {
            let atoms = c.measure.atoms(cell);
            lines.push(MeasureLine {
                node,
                t: c.mean.t,
                cell,
                weights: atoms.iter().map(|a| a.weight).collect(),
                atoms: atoms.iter().map(|a| a.s.iter().chain(&a.big_s).copied().collect()).collect(),
                gamma: c.measure.gamma()[cell],
                surplus: c.surplus[cell],
            });
        }
    }
    lines
}

/// Atomic measures per coarse cell matching the mean, the averaged flux and
/// the energy bookkeeping of the block data.
pub fn construct_measures(
    model: &ConvexElasticModel,
    coarse: &[CoarseData],
    atom_budget: usize,
) -> CliResult<(Vec<MeasureLine>, ConstructSummary)> {
    let moments = ElasticMoments { model: model.clone() };
    let mut lines = Vec::new();
    let mut summary =
        ConstructSummary { cells: 0, max_atoms: 0, max_moment_residual: 0.0, max_energy_residual: 0.0, total_gamma: 0.0 };
    for (node, c) in coarse.iter().enumerate() {
        let vol = c.mean.grid().cell_volume();
        for cell in 0..c.mean.grid().cells() {
            let mean: Vec<f64> = c.mean.v.cell(cell).into_iter().chain(c.mean.f.cell(cell)).collect();
            let dg = model.stress(&c.mean.f.cell(cell));
            let target: Vec<f64> = dg.iter().zip(c.defect.cell(cell)).map(|(a, b)| a + b).collect();
            let found = match_moments(&moments, &mean, &target, c.surplus[cell].max(0.0), atom_budget).stage("construct")?;
            let r = found.residuals;
            summary.cells += 1;
            summary.max_atoms = summary.max_atoms.max(found.atoms.len());
            summary.max_moment_residual = summary.max_moment_residual.max(r.normalization.max(r.mean).max(r.flux));
            summary.max_energy_residual = summary.max_energy_residual.max(r.energy);
            summary.total_gamma += found.gamma * vol;
            lines.push(MeasureLine {
                node,
                t: c.mean.t,
                cell,
                weights: found.atoms.iter().map(|(w, _)| *w).collect(),
                atoms: found.atoms.into_iter().map(|(_, x)| x).collect(),
                gamma: found.gamma,
                surplus: c.surplus[cell],
            });
        }
    }
    Ok((lines, summary))
}

fn default_weight(model: &ConvexElasticModel, traj: &Trajectory) -> CliResult<f64> {
    let radius = traj.states.iter().map(|s| s.f.max_abs()).fold(0.0, f64::max) * (model.components() as f64).sqrt() + 1.0;
    Ok(estimate_convexity_constants(model, WEIGHT_SAMPLES, radius).stage("verify")?.evi_weight())
}

pub fn tolerances(verify: &VerifyConfig, scale: f64) -> Tolerances {
    Tolerances {
        tolerance_scale: scale,
        max_violation: verify.max_violation.map(|b| b * scale),
        mvs_max_violation: verify.mvs_max_violation.map(|b| b * scale),
        energy_increase: verify.energy_increase * scale,
        newton_target: NEWTON_TARGET,
        newton_failure: NEWTON_FAILURE,
        moment: MOMENT_TOLERANCE,
        moment_energy: ENERGY_TOLERANCE,
    }
}

/// Energy-variational residual of `traj`, the measure-valued residual of
/// `coarse` when a bound is configured, and the resulting assertions.
pub fn verify_trajectory(
    model: &ConvexElasticModel,
    traj: &Trajectory,
    coarse: Option<&[CoarseData]>,
    verify: &VerifyConfig,
    tol: &Tolerances,
) -> CliResult<(VerifySummary, Vec<Assertion>)> {
    let spec = verify.basis_spec();
    let basis = TestBasis::trigonometric(traj.grid(), traj.len(), &spec).stage("verify")?;
    let weight = match verify.weight_constant {
        Some(w) => w,
        None => default_weight(model, traj)?,
    };
    let evi = evi_residual_elastic(model, traj, &basis, weight).stage("verify")?;
    let mvs = match (coarse, tol.mvs_max_violation) {
        (Some(c), Some(_)) => {
            let cbasis = TestBasis::trigonometric(c[0].mean.grid(), c.len(), &spec).stage("verify")?;
            Some(mvs_residual_elastic(model, c, traj.dt, &cbasis).stage("verify")?.max_violation())
        }
        _ => None,
    };
    let mut assertions = vec![Assertion::check("energy_increase", traj.max_energy_increase().max(0.0), tol.energy_increase)];
    if let Some(b) = tol.max_violation {
        assertions.push(Assertion::check("max_violation", evi.max_violation, b));
    }
    if let (Some(v), Some(b)) = (mvs, tol.mvs_max_violation) {
        assertions.push(Assertion::check("mvs_max_violation", v, b));
    }
    Ok((VerifySummary::new(&evi, mvs), assertions))
}

fn check_fresh(paths: &[&Path], force: bool) -> CliResult<()> {
    if force {
        return Ok(());
    }
    for p in paths {
        if p.exists() {
            return Err(CliError::Exists { path: p.to_path_buf() });
        }
    }
    Ok(())
}

fn write_with<F>(path: &Path, force: bool, f: F) -> CliResult<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
{
    let mut out = create_output(path, force)?;
    f(&mut out).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

/// Tab-separated `t, E, energy, dissipation[, surplus]`.
pub fn series_columns(series: &Series) -> String {
    let mut s = String::from("t\tE\tenergy\tdissipation");
    if series.surplus.is_some() {
        s.push_str("\tsurplus");
    }
    s.push('\n');
    for i in 0..series.t.len() {
        s.push_str(&format!(
            "{:e}\t{:e}\t{:e}\t{:e}",
            series.t[i], series.energy[i], series.discrete_energy[i], series.dissipation[i]
        ));
        if let Some(sp) = &series.surplus {
            s.push_str(&format!("\t{:e}", sp[i]));
        }
        s.push('\n');
    }
    s
}

/// Runs every configured stage and writes the outputs. Returns the report
/// even when an assertion fails; the caller decides the exit code.
pub fn run(loaded: &LoadedConfig, opts: RunOptions) -> CliResult<(Report, RunOutputs)> {
    let config = &loaded.config;
    let out = outputs(loaded);
    let mut all: Vec<&Path> = vec![&out.trajectory, &out.report];
    all.extend(out.measures.as_deref());
    all.extend(out.data.as_deref());
    check_fresh(&all, opts.force)?;

    let seed = opts.seed.unwrap_or(config.integrator.seed);
    let model = config.model.build().stage("initial")?;
    let grid = grid_of(config)?;
    let initial = initial_state(loaded, grid, seed)?;

    info!("solve: {} steps of {:e}", config.integrator.steps, config.integrator.dt);
    let integrator = Integrator::new(model.clone(), config.integrator.viscosity)
        .stage("solve")?
        .with_cap_policy(config.integrator.cap_policy());
    let traj = integrator.simulate(&initial, config.integrator.dt, config.integrator.steps).stage("solve")?;
    let discrete = traj.discrete_energy(&model).stage("solve")?;
    let solve = SolveSummary {
        nodes: traj.len(),
        dt: traj.dt,
        viscosity: config.integrator.viscosity,
        energy_initial: traj.energy[0],
        energy_final: *traj.energy.last().unwrap(),
        max_energy_increase: traj.max_energy_increase(),
        energy_drift: (discrete[discrete.len() - 1] - discrete[0]).abs(),
    };

    let coarse = match &config.coarsen {
        Some(c) => {
            info!("coarsen: block {}", c.block);
            Some((c.block, coarsen_all(&model, &traj, c.block)?))
        }
        None => None,
    };
    let coarsen_summary = coarse.as_ref().map(|(block, data)| CoarsenSummary {
        block: *block,
        coarse_extent: data[0].mean.grid().extent().to_vec(),
        min_surplus: data.iter().flat_map(|c| c.surplus.iter().copied()).fold(f64::INFINITY, f64::min),
        max_defect: data.iter().map(|c| c.defect.max_abs()).fold(0.0, f64::max),
    });

    let mut construct_summary = None;
    let measure_lines = match (&coarse, &config.construct) {
        (Some((_, data)), Some(cons)) => {
            info!("construct: atom budget {}", cons.atom_budget);
            let (lines, summary) = construct_measures(&model, data, cons.atom_budget)?;
            construct_summary = Some(summary);
            Some((lines, "construct"))
        }
        (Some((_, data)), None) => Some((empirical_measure_lines(data), "coarsen")),
        _ => None,
    };

    info!("verify");
    let tol = tolerances(&config.verify, opts.tolerance_scale);
    let coarse_data = coarse.as_ref().map(|(_, d)| d.as_slice());
    let (verify, assertions) = verify_trajectory(&model, &traj, coarse_data, &config.verify, &tol)?;

    let series = Series {
        t: traj.times(),
        energy: traj.energy.clone(),
        discrete_energy: discrete,
        dissipation: traj.dissipation.clone(),
        surplus: coarse.as_ref().map(|(_, d)| d.iter().map(CoarseData::total_surplus).collect()),
    };
    let passed = assertions.iter().all(|a| a.passed);
    let report = Report {
        format: REPORT_FORMAT.into(),
        version: FORMAT_VERSION,
        config_hash: loaded.hash.clone(),
        seed,
        model_id: model.id(),
        grid: GridSummary {
            dim: grid.dim(),
            extent: grid.extent().to_vec(),
            period: (0..grid.dim()).map(|a| grid.period(a)).collect(),
        },
        tolerances: tol,
        solve,
        coarsen: coarsen_summary,
        construct: construct_summary,
        verify,
        series,
        assertions,
        passed,
    };

    write_with(&out.trajectory, opts.force, |w| {
        write_trajectory(w, &traj, &config.model, &model.id(), config.integrator.viscosity)
    })?;
    if let (Some(path), Some((lines, source))) = (&out.measures, &measure_lines) {
        let cgrid = coarse.as_ref().unwrap().1[0].mean.grid();
        let header = json_header(MEASURES_FORMAT, cgrid, traj.len(), source);
        write_with(path, opts.force, |w| write_json_lines(w, &header, lines))?;
    }
    write_with(&out.report, opts.force, |w| {
        serde_json::to_writer_pretty(&mut *w, &report).map_err(std::io::Error::other)?;
        writeln!(w)?;
        w.flush()
    })?;
    if let Some(path) = &out.data {
        let text = series_columns(&report.series);
        write_with(path, opts.force, |w| w.write_all(text.as_bytes()))?;
    }
    Ok((report, out))
}

/// Target of `convert`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvertTarget {
    Measure,
    Varifold,
}

/// Coarsens a stored trajectory into per-cell measures, or into a varifold
/// built from the positive part of the symmetrized flux defect.
pub fn convert(path: &Path, to: ConvertTarget, block: usize, output: Option<&Path>, force: bool) -> CliResult<PathBuf> {
    let (header, traj) = read_trajectory(path)?;
    let model = header.model.build().map_err(|e| CliError::format(path, e.to_string()))?;
    if header.extent.iter().any(|n| block == 0 || n % block != 0) {
        return Err(CliError::Config(format!("block {block} does not divide the extent {:?}", header.extent)));
    }
    let suffix = match to {
        ConvertTarget::Measure => "measures.jsonl",
        ConvertTarget::Varifold => "varifold.jsonl",
    };
    let out_path = output.map(Path::to_path_buf).unwrap_or_else(|| path.with_extension(format!("b{block}.{suffix}")));
    check_fresh(&[&out_path], force)?;
    let coarse = coarsen_all(&model, &traj, block)?;
    let cgrid = *coarse[0].mean.grid();
    match to {
        ConvertTarget::Measure => {
            let lines = empirical_measure_lines(&coarse);
            let h = json_header(MEASURES_FORMAT, &cgrid, traj.len(), "coarsen");
            write_with(&out_path, force, |w| write_json_lines(w, &h, &lines))?;
        }
        ConvertTarget::Varifold => {
            let d = cgrid.dim();
            let mut lines = Vec::new();
            for (node, c) in coarse.iter().enumerate() {
                let sym = c
                    .defect
                    .map_cells(Rank::Matrix, |_, a, o| {
                        let mut s = vec![0.0; d * d];
                        for i in 0..d {
                            for j in 0..d {
                                s[i * d + j] = 0.5 * (a[i * d + j] + a[j * d + i]);
                            }
                        }
                        o.copy_from_slice(&psd_projection(&s));
                    })
                    .stage("convert")?;
                let v = build_varifold(&DefectField::new(sym, NormKind::L2).stage("convert")?, None).stage("convert")?;
                let mut per_cell: Vec<Vec<VarifoldAtomLine>> = vec![Vec::new(); cgrid.cells()];
                for a in v.atoms {
                    per_cell[a.cell].push(VarifoldAtomLine { direction: a.direction, mass: a.mass });
                }
                for (cell, atoms) in per_cell.into_iter().enumerate() {
                    lines.push(VarifoldLine { node, t: c.mean.t, cell, atoms });
                }
            }
            let h = json_header(VARIFOLD_FORMAT, &cgrid, traj.len(), "convert");
            write_with(&out_path, force, |w| write_json_lines(w, &h, &lines))?;
        }
    }
    Ok(out_path)
}

/// Re-verifies a stored trajectory against a config's model and verifier settings.
pub fn verify_file(
    traj_path: &Path,
    loaded: &LoadedConfig,
    opts: RunOptions,
) -> CliResult<(VerifySummary, Vec<Assertion>, Tolerances)> {
    let (header, traj) = read_trajectory(traj_path)?;
    let config = &loaded.config;
    if header.model != config.model {
        return Err(CliError::Config(format!(
            "trajectory model {} does not match the configured model",
            header.model_id
        )));
    }
    let model = config.model.build().stage("verify")?;
    let tol = tolerances(&config.verify, opts.tolerance_scale);
    let coarse = match (&config.coarsen, tol.mvs_max_violation) {
        (Some(c), Some(_)) => Some(coarsen_all(&model, &traj, c.block)?),
        _ => None,
    };
    let (summary, assertions) = verify_trajectory(&model, &traj, coarse.as_deref(), &config.verify, &tol)?;
    Ok((summary, assertions, tol))
}
