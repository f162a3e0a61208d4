//! Scenario orchestration and output emission.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use topoquench_core::evolve::{evolve_trajectory, ground_state_field, StateField, TimeGrid, Trajectory};
use topoquench_core::geometry::{self, hellmann_feynman_residual, lz_gamma_limit, phase_lipschitz_bound};
use topoquench_core::invariants::{chern_series_from, spin_chern_series_from, z2_series_from, InvariantSeries};
use topoquench_core::models::{
    build_bhz, build_lz_parameterized, build_quench, build_trs_odd_quench, build_two_band_chern, Amplitude, BlochModel,
    ModelRef, TrsOperator,
};
use topoquench_core::symmetry::{self, check_auxiliary, check_trajectory_propagator_trs, SymmetryReport};
use topoquench_core::Grid;

use crate::config::{RunConfig, Scenario};
use crate::error::RunError;
use crate::summary::{self, Admissibility, Cell, RunSummary, Table};

pub const SERIES_FILE: &str = "series.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Checks whose failure is a numerical-identity failure rather than a
/// symmetry violation.
const IDENTITY_CHECKS: &[&str] = &["hellmann_feynman", "phase_lipschitz"];

/// Everything a run produces, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub series: Table,
}

fn time_grid(config: &RunConfig) -> Result<TimeGrid, RunError> {
    let n_steps = ((config.time.t1 - config.time.t0) / config.time.dt).round() as usize;
    Ok(TimeGrid::new(config.time.t0, config.time.t1, n_steps.max(1))?)
}

fn sample_times(config: &RunConfig, grid: &TimeGrid) -> Vec<f64> {
    config.sample_steps().into_iter().map(|s| grid.time(s)).collect()
}

fn renamed(mut r: SymmetryReport, name: &str) -> SymmetryReport {
    r.check = name.to_string();
    r
}

/// Prepared lattice quench: models, initial field and evolved trajectory.
struct LatticeRun {
    /// Hamiltonian whose eigenstates form the initial field.
    initial_model: ModelRef,
    generator: Arc<dyn BlochModel>,
    trs: Option<TrsOperator>,
    field0: StateField,
    trajectory: Trajectory,
}

fn prepare_lattice(config: &RunConfig) -> Result<LatticeRun, RunError> {
    let grid = Grid::torus(config.grid.nx, config.grid.ny)?;
    let tg = time_grid(config)?;
    let times = sample_times(config, &tg);
    let (m_i, m_f) = (config.model.m_initial, config.model.m_final);
    let (initial_model, generator, trs, n_occ): (ModelRef, Arc<dyn BlochModel>, _, _) = match config.scenario {
        Scenario::ChernQuench => {
            let a: ModelRef = Arc::new(build_two_band_chern(m_i)?);
            let b: ModelRef = Arc::new(build_two_band_chern(m_f)?);
            let q = build_quench(a.clone(), b, config.quench)?;
            (a, Arc::new(q), None, 1)
        }
        Scenario::BhzQuench => {
            let a = build_bhz(m_i)?;
            let trs = a.trs();
            let a: ModelRef = Arc::new(a);
            let b: ModelRef = Arc::new(build_bhz(m_f)?);
            let q = build_quench(a.clone(), b, config.quench)?;
            (a, Arc::new(q), Some(trs), 2)
        }
        Scenario::Z2Quench | Scenario::Verify => {
            let bhz = build_bhz(m_i)?;
            let trs = bhz.trs();
            let v_up: ModelRef = Arc::new(build_two_band_chern(m_f)?);
            let generator = build_trs_odd_quench(&bhz, v_up, Amplitude::Ramp(config.quench))?;
            let pre = check_trs_quench_tol(&generator, &trs, &times, config.tol.trs);
            pre.into_result()?;
            (Arc::new(bhz) as ModelRef, Arc::new(generator), Some(trs), 2)
        }
        Scenario::Lz => unreachable!("lz is not a lattice scenario"),
    };
    let field0 = ground_state_field(initial_model.as_ref(), grid, config.time.t0, n_occ)?;
    let trajectory = evolve_trajectory(generator.as_ref(), &field0, &tg, &times)?;
    Ok(LatticeRun {
        initial_model,
        generator,
        trs,
        field0,
        trajectory,
    })
}

fn check_trs_quench_tol(model: &dyn BlochModel, trs: &TrsOperator, times: &[f64], tol: f64) -> SymmetryReport {
    symmetry::check_trs_quench(model, trs, times).with_tolerance(tol)
}

fn lattice_checks(config: &RunConfig, run: &LatticeRun) -> Result<Vec<SymmetryReport>, RunError> {
    let tol = &config.tol;
    let times = run.trajectory.times();
    let mut checks = Vec::new();
    if let Some(trs) = &run.trs {
        checks.push(renamed(
            symmetry::check_trs_static(run.initial_model.as_ref(), trs, config.time.t0).with_tolerance(tol.trs),
            "trs_static_initial",
        ));
        match config.scenario {
            Scenario::BhzQuench => {
                let final_bhz = build_bhz(config.model.m_final)?;
                checks.push(renamed(
                    symmetry::check_trs_static(&final_bhz, trs, config.time.t1).with_tolerance(tol.trs),
                    "trs_static_final",
                ));
            }
            _ => {
                checks.push(check_trs_quench_tol(run.generator.as_ref(), trs, &times, tol.trs));
                checks.push(check_trajectory_propagator_trs(&run.trajectory, trs)?.with_tolerance(tol.propagator));
            }
        }
    }
    let aux = check_auxiliary(
        run.initial_model.as_ref(),
        config.time.t0,
        &run.field0,
        &run.trajectory,
        run.trs.as_ref(),
    )?;
    checks.push(aux.spectrum.with_tolerance(tol.spectrum));
    checks.push(aux.eigenvectors.with_tolerance(tol.eigenvector));
    if let Some(r) = aux.auxiliary_trs {
        checks.push(r.with_tolerance(tol.auxiliary_trs));
    }
    let unitarity = run
        .trajectory
        .fields
        .iter()
        .zip(&run.trajectory.propagators)
        .flat_map(|(f, props)| {
            let grid = f.grid();
            props
                .iter()
                .enumerate()
                .map(move |(idx, u)| (u.unitarity_residual(), Some(grid.point(idx)), Some(f.time())))
        });
    checks.push(SymmetryReport::from_samples(
        "propagator_unitarity",
        tol.unitarity,
        unitarity,
    ));
    Ok(checks)
}

fn first_failure(series: &InvariantSeries) -> Result<(), RunError> {
    match series.first_failure() {
        Some(e) => Err(RunError::Core(e.clone())),
        None => Ok(()),
    }
}

fn values_of<T: std::fmt::Display>(values: impl Iterator<Item = Option<T>>) -> String {
    values
        .map(|v| v.map_or_else(|| "-".to_string(), |x| x.to_string()))
        .collect::<Vec<_>>()
        .join(" ")
}

fn require_constant(
    index: &'static str,
    constant: bool,
    values: String,
    series: &InvariantSeries,
    summary: &RunSummary,
) -> Result<(), RunError> {
    if constant {
        return Ok(());
    }
    let worst = series.worst_link().expect("admissible series records overlaps");
    Err(RunError::NotConstant {
        index,
        values,
        worst,
        summary: Box::new(summary.clone()),
    })
}

fn fail_on_checks(summary: &RunSummary) -> Result<(), RunError> {
    let failed = summary.failed_checks();
    if failed.is_empty() {
        return Ok(());
    }
    Err(RunError::ChecksFailed {
        count: failed.len(),
        names: failed
            .iter()
            .map(|r| format!("{} ({:.3e} >= {:.1e})", r.check, r.max_residual, r.tolerance))
            .collect::<Vec<_>>()
            .join(", "),
        symmetry: failed.iter().any(|r| !IDENTITY_CHECKS.contains(&r.check.as_str())),
        summary: Box::new(summary.clone()),
    })
}

fn lattice_series(config: &RunConfig, run: &LatticeRun, summary: &mut RunSummary) -> Result<Table, RunError> {
    let grid = run.field0.grid();
    match config.scenario {
        Scenario::ChernQuench => {
            let series = chern_series_from(&run.trajectory);
            first_failure(&series)?;
            let c = series.constant_chern();
            summary.results.chern_constant = Some(c.is_some());
            summary.results.chern = c;
            summary.admissibility = series.worst_link().map(|w| Admissibility::from_worst(grid, w));
            let values = values_of(series.samples.iter().map(|s| s.chern));
            require_constant("Chern", c.is_some(), values, &series, summary)?;
            Ok(summary::chern_table(&series))
        }
        Scenario::BhzQuench => {
            let series = spin_chern_series_from(&run.trajectory);
            first_failure(&series)?;
            fill_spin_headline(&series, summary);
            summary.admissibility = series.worst_link().map(|w| Admissibility::from_worst(grid, w));
            let blocks_constant = single(series.samples.iter().map(|s| (s.c_up, s.c_down)));
            let values = values_of(
                series
                    .samples
                    .iter()
                    .map(|s| s.c_up.zip(s.c_down).map(|(u, d)| format!("({u},{d})"))),
            );
            require_constant("spin-resolved Chern", blocks_constant, values, &series, summary)?;
            Ok(summary::spin_table(&series))
        }
        Scenario::Z2Quench => {
            let trs = run.trs.as_ref().expect("z2 runs carry a time reversal");
            let series = z2_series_from(&run.trajectory, trs, true);
            first_failure(&series)?;
            let z = series.constant_z2();
            summary.results.z2_constant = Some(z.is_some());
            summary.results.z2 = z;
            fill_spin_headline(&series, summary);
            summary.results.max_pairing_residual = series
                .samples
                .iter()
                .filter_map(|s| s.pairing_residual)
                .fold(None, |a: Option<f64>, r| Some(a.map_or(r, |a| a.max(r))));
            summary.admissibility = series.worst_link().map(|w| Admissibility::from_worst(grid, w));
            let disagreement = series.samples.iter().map(|s| {
                let d = match (s.z2, s.z2_spin) {
                    (Some(a), Some(b)) => f64::from(a != b),
                    _ => 1.0,
                };
                (d, None, Some(s.time))
            });
            summary
                .checks
                .push(SymmetryReport::from_samples("z2_method_agreement", 0.5, disagreement));
            let values = values_of(series.samples.iter().map(|s| s.z2));
            require_constant("Z2", z.is_some(), values, &series, summary)?;
            Ok(summary::z2_table(&series))
        }
        _ => unreachable!("not an invariant scenario"),
    }
}

fn single<T: PartialEq>(mut values: impl Iterator<Item = T>) -> bool {
    match values.next() {
        None => true,
        Some(first) => values.all(|v| v == first),
    }
}

fn fill_spin_headline(series: &InvariantSeries, summary: &mut RunSummary) {
    let z = series.constant_z2_spin();
    summary.results.z2_spin_constant = Some(z.is_some());
    summary.results.z2_spin = z;
    summary.results.spin_pairing = Some(series.samples.iter().all(|s| match (s.c_up, s.c_down) {
        (Some(u), Some(d)) => u + d == 0,
        _ => false,
    }));
}

fn run_lz(config: &RunConfig, summary: &mut RunSummary) -> Result<Table, RunError> {
    let (v, g) = (config.model.v, config.model.g);
    let run = geometry::lz_run(v, g, config.time.t0, config.time.t1, config.time.dt)?;
    let limit = lz_gamma_limit(v, g);
    let r = &mut summary.results;
    r.gamma_inf = Some(run.gamma_asymptotic);
    r.gamma_final = Some(run.gamma_final());
    r.gamma_limit = Some(limit);
    r.gamma_inf_error = Some((run.gamma_asymptotic - limit).abs());
    r.gamma_final_error = Some((run.gamma_final() - limit).abs());
    r.gamma_within_tolerance = Some((run.gamma_asymptotic - limit).abs() < config.tol.gamma);
    let mut table = Table::new(summary::LZ_HEADER);
    for step in config.sample_steps() {
        let s = &run.samples[step];
        table.push(vec![
            Cell::Real(s.t),
            Cell::Real(s.a.re),
            Cell::Real(s.a.im),
            Cell::Real(s.b.re),
            Cell::Real(s.b.im),
            Cell::Real(s.gamma),
            Cell::Real(s.gamma_rate),
        ]);
    }
    Ok(table)
}

/// Hellmann-Feynman and phase-continuity checks on the parameterized
/// Landau-Zener loop.
fn lz_checks(config: &RunConfig) -> Result<Vec<SymmetryReport>, RunError> {
    let (v, g) = (config.model.v, config.model.g);
    let model = build_lz_parameterized(v, g)?;
    let grid = Grid::loop_of(config.grid.nl)?;
    let tg = time_grid(config)?;
    let n = tg.n_steps();
    let field0 = ground_state_field(&model, grid, config.time.t0, 1)?;

    let centres: Vec<usize> = config.sample_steps().into_iter().filter(|&s| s > 0 && s < n).collect();
    let reach = 10.0 * g.max(1.0) / v;
    let stride = ((0.01 / tg.dt()).round() as usize).max(1);
    let mut dense: Vec<usize> = (0..=n).step_by(stride).filter(|&s| tg.time(s).abs() <= reach).collect();
    if dense.len() < 2 {
        dense = config.sample_steps();
    }
    let mut steps: Vec<usize> = centres
        .iter()
        .flat_map(|&s| [s - 1, s, s + 1])
        .chain(dense.iter().copied())
        .collect();
    steps.sort_unstable();
    steps.dedup();
    let times: Vec<f64> = steps.iter().map(|&s| tg.time(s)).collect();
    let trajectory = evolve_trajectory(&model, &field0, &tg, &times)?;
    let at = |s: usize| &trajectory.fields[steps.binary_search(&s).expect("step recorded")];

    let mut hf = Vec::with_capacity(centres.len());
    for &c in &centres {
        let triple = [at(c - 1).clone(), at(c).clone(), at(c + 1).clone()];
        hf.push((hellmann_feynman_residual(&model, &triple, 0)?, None, Some(tg.time(c))));
    }
    let dense_fields: Vec<StateField> = dense.iter().map(|&s| at(s).clone()).collect();
    let lip = phase_lipschitz_bound(&model, &dense_fields)?;
    Ok(vec![
        SymmetryReport::from_samples("hellmann_feynman", config.tol.hellmann_feynman, hf),
        SymmetryReport::from_samples(
            "phase_lipschitz",
            config.tol.lipschitz,
            [((lip.measured - lip.bound).max(0.0), None, None)],
        ),
    ])
}

/// Run the configured scenario in memory.
pub fn execute(config: &RunConfig) -> Result<RunOutput, RunError> {
    let start = Instant::now();
    let mut summary = RunSummary::new(config);
    let series = match config.scenario {
        Scenario::Lz => run_lz(config, &mut summary)?,
        Scenario::Verify => return verify(config),
        _ => {
            let run = prepare_lattice(config)?;
            summary.checks = lattice_checks(config, &run)?;
            summary.results.max_unitarity_residual = Some(run.trajectory.max_unitarity_residual());
            let table = lattice_series(config, &run, &mut summary)?;
            fail_on_checks(&summary)?;
            table
        }
    };
    summary.wall_clock = start.elapsed();
    Ok(RunOutput { summary, series })
}

/// Evaluate every check that applies to the configured scenario; the series
/// file lists one row per check.
pub fn verify(config: &RunConfig) -> Result<RunOutput, RunError> {
    let start = Instant::now();
    let mut summary = RunSummary::new(config);
    summary.checks = match config.scenario {
        Scenario::Lz => lz_checks(config)?,
        _ => {
            let run = prepare_lattice(config)?;
            summary.results.max_unitarity_residual = Some(run.trajectory.max_unitarity_residual());
            lattice_checks(config, &run)?
        }
    };
    fail_on_checks(&summary)?;
    summary.wall_clock = start.elapsed();
    let series = Table::checks(&summary.checks);
    Ok(RunOutput { summary, series })
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), RunError> {
    let tmp = path.with_extension("tmp");
    let io = |source| RunError::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Remove the output files of a run directory, ignoring ones that are absent.
pub fn remove_outputs(dir: &Path) {
    for name in [SERIES_FILE, SUMMARY_FILE] {
        for path in [dir.join(name), dir.join(name).with_extension("tmp")] {
            let _ = fs::remove_file(path);
        }
    }
}

pub fn emit(output: &RunOutput, dir: &Path) -> Result<(), RunError> {
    let result = fs::create_dir_all(dir)
        .map_err(|source| RunError::Write {
            path: dir.to_path_buf(),
            source,
        })
        .and_then(|_| write_atomic(&dir.join(SERIES_FILE), &output.series.to_csv()))
        .and_then(|_| write_atomic(&dir.join(SUMMARY_FILE), &output.summary.to_json()));
    if result.is_err() {
        remove_outputs(dir);
    }
    result
}

fn finish(result: Result<RunOutput, RunError>, dir: &Path) -> Result<RunOutput, RunError> {
    match result {
        Ok(out) => {
            emit(&out, dir)?;
            Ok(out)
        }
        Err(e) => {
            remove_outputs(dir);
            Err(e)
        }
    }
}

/// Run and write `series.csv` and `summary.json` to the configured
/// directory. Failed runs leave neither file behind.
pub fn run(config: &RunConfig) -> Result<RunOutput, RunError> {
    finish(execute(config), &config.output_dir)
}

pub fn run_verify(config: &RunConfig) -> Result<RunOutput, RunError> {
    finish(verify(config), &config.output_dir)
}

pub fn load_config(path: &Path) -> Result<RunConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Read {
        path: PathBuf::from(path),
        source,
    })?;
    crate::config::parse_config(&text).map_err(|source| RunError::Config {
        path: PathBuf::from(path),
        source,
    })
}
