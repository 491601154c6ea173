//! Implementations of the subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use junction_hj_core::analysis::{refinement_study, track_shock, vehicle_trajectories, ShockTrace};
use junction_hj_core::density_scheme::{DensitySolver, GammaPolicy};
use junction_hj_core::hj_scheme::{nearest_step, run_hj, HjProblem, HjRun, SnapshotPlan};
use junction_hj_core::junction::densities_from_labels;
use junction_hj_core::{GridSpec, TimeStep};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{AppError, AppResult};
use crate::output::{self, num, Manifest, ManifestBranch};
use crate::scenario::{Field, Scenario};
use crate::verify;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct CommonOptions {
    /// Overrides the scenario's output directory.
    pub out: Option<PathBuf>,
    /// Overrides the scenario's time step.
    pub dt: Option<TimeStep>,
    /// Makes estimate violations fatal.
    pub strict: bool,
}

impl CommonOptions {
    /// Applies the overrides to a scenario.
    pub fn apply(&self, scenario: &mut Scenario) {
        if let Some(out) = &self.out {
            scenario.outputs.out_dir = out.clone();
        }
        if let Some(dt) = self.dt {
            scenario.grid.dt = dt;
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Output directory.
    pub out_dir: PathBuf,
    /// Resolved time step (s).
    pub dt_s: f64,
    /// Steps taken.
    pub n_steps: usize,
    /// Files written, relative to `out_dir`.
    pub files: Vec<String>,
    /// Estimate violations recorded in non-strict mode.
    pub violations: Vec<String>,
}

fn require_fixed(s: &Scenario, command: &str) -> AppResult<()> {
    match s.gamma_policy {
        GammaPolicy::Fixed => Ok(()),
        GammaPolicy::Maximize(_) => Err(AppError::Usage(format!(
            "{command} needs fixed split coefficients; use run-density for gamma mode `maximize`"
        ))),
    }
}

/// Runs the label scheme and writes the requested fields.
pub fn run_labels(scenario: &Scenario, strict: bool) -> AppResult<(HjRun, RunSummary)> {
    require_fixed(scenario, "run-hj")?;
    let started = Instant::now();
    let s = scenario;
    let problem = HjProblem::new(&s.junction, &s.grid, &s.initial)?;
    let plan = SnapshotPlan { times_s: s.outputs.snapshot_times_s.clone(), ..SnapshotPlan::default() };
    let run = run_hj(problem, &s.grid, &plan, strict)?;

    let dir = &s.outputs.out_dir;
    output::ensure_dir(dir)?;
    let dx_m = s.grid.dx_m;
    let mut files = Vec::new();
    for &t in &s.outputs.snapshot_times_s {
        let step = nearest_step(t, run.dt_s, run.n_steps);
        let u = run.snapshots.iter().find(|u| u.step() == step).expect("snapshot recorded");
        for &field in &s.outputs.fields {
            let name = output::snapshot_file_name(field.name(), t);
            let path = dir.join(&name);
            match field {
                Field::Labels => output::write_labels(&path, &s.names, dx_m, u)?,
                Field::Gradients => output::write_gradients(&path, &s.names, dx_m, u)?,
                Field::Densities => {
                    let rho = densities_from_labels(&s.junction, dx_m, u);
                    output::write_densities(&path, &s.names, dx_m, &rho)?
                }
                Field::Estimates => continue,
            }
            files.push(name);
        }
    }
    if s.outputs.fields.contains(&Field::Estimates) {
        output::write_estimates(&dir.join("estimates.csv"), &s.names, &run.estimates)?;
        files.push("estimates.csv".into());
    }
    let manifest = Manifest {
        command: "run-hj".into(),
        scheme: "labels".into(),
        dx_m,
        dt_s: run.dt_s,
        dt_max_s: run.cfl.dt_max_s,
        n_steps: run.n_steps,
        final_time_s: run.final_state.time_s(),
        wall_time_s: started.elapsed().as_secs_f64(),
        m0: run.cfl.m0,
        big_m0: Some(run.cfl.big_m0),
        bounds_unit: "labels/km".into(),
        branch: (0..s.junction.len())
            .map(|a| ManifestBranch {
                name: s.names[a].clone(),
                lower: run.cfl.p_lo[a],
                upper: run.cfl.p_hi[a],
                lipschitz: run.cfl.lipschitz[a],
            })
            .collect(),
        violations: run.violations.clone(),
        files: files.clone(),
    };
    output::write_manifest(dir, &manifest)?;
    let summary = RunSummary {
        out_dir: dir.clone(),
        dt_s: run.dt_s,
        n_steps: run.n_steps,
        files,
        violations: run.violations.clone(),
    };
    Ok((run, summary))
}

/// Runs the density scheme directly and writes density snapshots plus the
/// boundary and junction fluxes of every step.
pub fn run_densities(scenario: &Scenario) -> AppResult<RunSummary> {
    let s = scenario;
    let started = Instant::now();
    let mut solver = DensitySolver::new(&s.junction, &s.grid, &s.initial, s.gamma_policy.clone())?;
    let dt_s = solver.dt_s();
    let n_steps = s.grid.n_steps(dt_s);
    let wanted: Vec<(f64, usize)> = s
        .outputs
        .snapshot_times_s
        .iter()
        .map(|&t| (t, nearest_step(t, dt_s, n_steps)))
        .collect();
    let dir = &s.outputs.out_dir;
    output::ensure_dir(dir)?;
    let write_rho = s.outputs.fields.contains(&Field::Densities);
    let mut files = Vec::new();
    let mut flux_rows = Vec::with_capacity(n_steps);
    for n in 0..=n_steps {
        if write_rho {
            for (t, _) in wanted.iter().filter(|w| w.1 == n) {
                let name = output::snapshot_file_name("densities", *t);
                output::write_densities(&dir.join(&name), &s.names, s.grid.dx_m, solver.state())?;
                files.push(name);
            }
        }
        if n < n_steps {
            let f = solver.step()?;
            let mut row = vec![
                (n + 1).to_string(),
                num(solver.state().time_s()),
                num(f.inflow),
                num(f.outflow),
                num(f.junction.total),
            ];
            row.extend(f.junction.gamma.iter().map(|g| num(*g)));
            flux_rows.push(row);
        }
    }
    let gamma_cols: Vec<String> = s.names.iter().map(|n| format!("gamma_{n}")).collect();
    let mut header = vec!["step", "time_s", "inflow", "outflow", "junction_flux"];
    header.extend(gamma_cols.iter().map(String::as_str));
    output::write_table(&dir.join("fluxes.csv"), &header, &flux_rows)?;
    files.push("fluxes.csv".into());
    let cfl = solver.cfl();
    let manifest = Manifest {
        command: "run-density".into(),
        scheme: "densities".into(),
        dx_m: s.grid.dx_m,
        dt_s,
        dt_max_s: cfl.dt_max_s,
        n_steps,
        final_time_s: solver.state().time_s(),
        wall_time_s: started.elapsed().as_secs_f64(),
        m0: cfl.m0,
        big_m0: None,
        bounds_unit: "veh/km".into(),
        branch: (0..s.junction.len())
            .map(|a| ManifestBranch {
                name: s.names[a].clone(),
                lower: cfl.rho_lo[a],
                upper: cfl.rho_hi[a],
                lipschitz: cfl.lipschitz[a],
            })
            .collect(),
        violations: Vec::new(),
        files: files.clone(),
    };
    output::write_manifest(dir, &manifest)?;
    Ok(RunSummary { out_dir: dir.clone(), dt_s, n_steps, files, violations: Vec::new() })
}

/// Settings of the `verify` subcommand.
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Seed of the random pairs.
    pub seed: u64,
    /// Ordered pairs for the monotonicity test.
    pub pairs: usize,
    /// Steps per pair.
    pub pair_steps: usize,
    /// Cap on the steps of the equivalence and conservation checks.
    pub max_steps: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, pairs: 200, pair_steps: 100, max_steps: 500 }
    }
}

/// One line of the verification report.
#[derive(Debug, Clone)]
pub struct Check {
    /// Check name.
    pub name: String,
    /// Whether it passed.
    pub passed: bool,
    /// Measured value or failure details.
    pub detail: String,
}

/// Runs the invariant suite on a scenario.
pub fn verify_scenario(s: &Scenario, opts: VerifyOptions) -> AppResult<Vec<Check>> {
    require_fixed(s, "verify")?;
    let mut checks = Vec::new();
    let problem = HjProblem::new(&s.junction, &s.grid, &s.initial)?;
    let run = run_hj(problem, &s.grid, &SnapshotPlan::default(), false)?;
    let steps = run.n_steps.min(opts.max_steps);

    let gap = verify::equivalence_gap(&s.junction, &s.initial, s.grid.dx_m, steps)?;
    checks.push(Check {
        name: "equivalence".into(),
        passed: gap <= 1e-8,
        detail: format!("max |rho(labels) - rho| = {gap:e} over {steps} steps"),
    });

    let failures = verify::estimate_failures(&run.estimates, junction_hj_core::hj_scheme::ESTIMATE_TOL);
    checks.push(Check {
        name: "estimates".into(),
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{} states checked", run.estimates.len())
        } else {
            format!("{} failures, first: {}", failures.len(), failures[0])
        },
    });

    let failures = verify::bound_bracket_failures(&s.junction, &s.grid, &s.initial)?;
    checks.push(Check {
        name: "continuous-bounds".into(),
        passed: failures.is_empty(),
        detail: failures.first().cloned().unwrap_or_else(|| "bracketed".into()),
    });

    let grid = GridSpec { dt: TimeStep::Seconds(run.dt_s), ..s.grid };
    let residual = verify::conservation_residual(&s.junction, &grid, &s.initial, GammaPolicy::Fixed, steps)?;
    checks.push(Check {
        name: "conservation".into(),
        passed: residual <= 1e-10,
        detail: format!("max relative residual {residual:e} over {steps} steps"),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let m = verify::monotonicity_check(&mut rng, &s.junction, s.grid.dx_m, opts.pairs, opts.pair_steps)?;
    checks.push(Check {
        name: "monotonicity".into(),
        passed: m.violations == 0,
        detail: format!(
            "{} pairs x {} steps, {} comparisons, {} violations, max excess {:e}",
            m.pairs, m.steps, m.comparisons, m.violations, m.worst_excess
        ),
    });
    Ok(checks)
}

/// Runs a refinement study and writes `refinement.csv`.
pub fn refine(s: &Scenario, levels: &[f64], times_s: &[f64]) -> AppResult<junction_hj_core::analysis::RefinementReport> {
    require_fixed(s, "refine")?;
    let report = refinement_study(&s.junction, &s.initial, &s.grid, levels, times_s)?;
    let dir = &s.outputs.out_dir;
    output::ensure_dir(dir)?;
    let time_cols: Vec<String> = times_s.iter().map(|t| format!("label_diff_t{t}")).collect();
    let mut header = vec!["dx_m", "dt_s", "n_steps", "label_diff", "density_diff"];
    header.extend(time_cols.iter().map(String::as_str));
    let opt = |v: Option<f64>| v.map_or_else(String::new, num);
    let rows: Vec<Vec<String>> = report
        .levels
        .iter()
        .map(|l| {
            let mut row = vec![
                num(l.dx_m),
                num(l.dt_s),
                l.n_steps.to_string(),
                opt(l.label_diff_to_next_finer),
                opt(l.density_diff_to_next_finer),
            ];
            if l.label_diff_per_time.is_empty() {
                row.extend(times_s.iter().map(|_| String::new()));
            } else {
                row.extend(l.label_diff_per_time.iter().map(|v| num(*v)));
            }
            row
        })
        .collect();
    output::write_table(&dir.join("refinement.csv"), &header, &rows)?;
    Ok(report)
}

/// Tracks the front on `branch` over `[t0, t1]` and writes `shock.csv`.
pub fn shock(
    s: &Scenario,
    branch: usize,
    window: (f64, f64),
    samples: usize,
    threshold: Option<f64>,
) -> AppResult<ShockTrace> {
    require_fixed(s, "shock")?;
    let (t0, t1) = window;
    if !(t0 >= 0.0 && t1 > t0) || samples < 3 {
        return Err(AppError::Usage("shock needs 0 <= t0 < t1 and at least 3 samples".into()));
    }
    let grid = GridSpec { horizon_s: t1, ..s.grid };
    let times = (0..samples).map(|k| t0 + (t1 - t0) * k as f64 / (samples - 1) as f64).collect();
    let plan = SnapshotPlan { times_s: times, ..SnapshotPlan::default() };
    let run = run_hj(HjProblem::new(&s.junction, &grid, &s.initial)?, &grid, &plan, false)?;
    let rho: Vec<_> = run
        .snapshots
        .iter()
        .map(|u| densities_from_labels(&s.junction, grid.dx_m, u))
        .collect();
    let trace = track_shock(&rho, branch, s.junction.orientation(branch), grid.dx_m, threshold)?;
    let dir = &s.outputs.out_dir;
    output::ensure_dir(dir)?;
    let rows: Vec<Vec<String>> = trace
        .points
        .iter()
        .map(|p| vec![num(p.time_s), num(p.position_m)])
        .collect();
    output::write_table(&dir.join("shock.csv"), &["time_s", "position_m"], &rows)?;
    Ok(trace)
}

/// Extracts vehicle trajectories and writes `trajectories.csv`.
pub fn trajectories(s: &Scenario, labels: &[f64], every: usize) -> AppResult<PathBuf> {
    require_fixed(s, "trajectories")?;
    let plan = SnapshotPlan { every: Some(every.max(1)), ..SnapshotPlan::default() };
    let run = run_hj(HjProblem::new(&s.junction, &s.grid, &s.initial)?, &s.grid, &plan, false)?;
    let traj = vehicle_trajectories(&s.junction, s.grid.dx_m, &run.snapshots, labels);
    let mut rows = Vec::new();
    for t in &traj {
        for (a, pts) in t.branches.iter().enumerate() {
            for p in pts {
                rows.push(vec![
                    num(t.label),
                    s.names[a].clone(),
                    num(p.time_s),
                    num(p.x_m),
                    num(p.signed_x_m),
                ]);
            }
        }
    }
    let dir = &s.outputs.out_dir;
    output::ensure_dir(dir)?;
    let path = dir.join("trajectories.csv");
    output::write_table(&path, &["label", "branch", "time_s", "x_m", "signed_x_m"], &rows)?;
    Ok(path)
}

/// Loads a scenario and applies the common overrides.
pub fn load(path: &Path, common: &CommonOptions) -> AppResult<Scenario> {
    let mut s = Scenario::load(path)?;
    common.apply(&mut s);
    Ok(s)
}
