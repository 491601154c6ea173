//! Acceptance report: one PASS/FAIL line per criterion.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use junction_hj::commands::{self, run_labels};
use junction_hj::verify;
use junction_hj::Scenario;
use junction_hj_core::density_scheme::{DensitySolver, GammaPolicy};
use junction_hj_core::hj_scheme::{HjProblem, ESTIMATE_TOL};
use junction_hj_core::junction::densities_from_labels;
use junction_hj_core::{Branch, GridSpec, JunctionSpec, TimeStep};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn table1() -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/table1.scenario");
    Scenario::load(&path).expect("bundled scenario loads")
}

fn table1_writing_to(dir: &tempfile::TempDir) -> Scenario {
    let mut s = table1();
    s.outputs.out_dir = dir.path().to_path_buf();
    s
}

fn scratch() -> Result<tempfile::TempDir, String> {
    tempfile::tempdir().map_err(|e| e.to_string())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn random_scenarios() -> Vec<(JunctionSpec, junction_hj_core::InitialData)> {
    (0..20)
        .map(|seed| verify::random_scenario(&mut ChaCha8Rng::seed_from_u64(seed), 100.0))
        .collect()
}

fn table1_reproduction() -> Outcome {
    let dir = scratch()?;
    let s = table1_writing_to(&dir);
    let started = Instant::now();
    let (run, _) = run_labels(&s, true).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed().as_secs_f64();
    let j = &s.junction;
    let rho = densities_from_labels(j, s.grid.dx_m, &run.final_state);
    let expected = [90.0, 90.0, 90.0, 10.0];
    let mut worst_density: f64 = 0.0;
    let mut means = Vec::new();
    for (a, want) in expected.iter().enumerate() {
        let cells = rho.branch(a);
        let m = mean(cells);
        means.push(m);
        worst_density = worst_density.max((m - want).abs());
        if a == 2 {
            let half = cells.len() / 2;
            worst_density = worst_density.max((mean(&cells[..half]) - want).abs());
            worst_density = worst_density.max((mean(&cells[half..]) - want).abs());
        }
    }
    let problem = HjProblem::new(j, &s.grid, &s.initial).map_err(|e| e.to_string())?;
    let w = problem.rates(&run.final_state);
    let mut worst_flux: f64 = 0.0;
    for a in 0..j.len() {
        let b = j.branch(a);
        worst_flux = worst_flux.max((b.gamma * w[a][0] - 625.0).abs());
        worst_flux = worst_flux.max((b.diagram.flux(means[a]) - 625.0).abs());
    }
    let mut ds = DensitySolver::new(j, &s.grid, &s.initial, GammaPolicy::Fixed).map_err(|e| e.to_string())?;
    let first = ds.step().map_err(|e| e.to_string())?;
    let worst_initial = first.junction.per_branch.iter().map(|f| (f - 843.75).abs()).fold(0.0, f64::max);
    let passed = worst_density < 1.0 && worst_flux < 1.0 && worst_initial <= 0.01 && elapsed < 5.0;
    Ok((
        passed,
        format!(
            "means {:.3?}, max density error {worst_density:.3e}, max flux error {worst_flux:.3e}, \
             initial flux error {worst_initial:.3e}, runtime {elapsed:.3} s",
            means
        ),
    ))
}

fn estimate_suite() -> Outcome {
    let dir = scratch()?;
    let s = table1_writing_to(&dir);
    let (run, _) = run_labels(&s, false).map_err(|e| e.to_string())?;
    let c = &run.cfl;
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * y.abs();
    let bounds_ok = (0..2).all(|a| close(c.p_lo[a], 10.0) && close(c.p_hi[a], 250.0))
        && (2..4).all(|a| close(c.p_lo[a], -250.0) && close(c.p_hi[a], -10.0));
    let failures = verify::estimate_failures(&run.estimates, ESTIMATE_TOL);
    let passed = bounds_ok && failures.is_empty() && run.violations.is_empty();
    let detail = format!(
        "bounds {:?}..{:?}, {} states, {} failures{}",
        c.p_lo,
        c.p_hi,
        run.estimates.len(),
        failures.len(),
        failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
    );
    Ok((passed, detail))
}

fn monotonicity() -> Outcome {
    let s = table1();
    let branches: Vec<Branch> = (0..4).map(|a| Branch { length_m: 650.0, ..s.junction.branch(a).clone() }).collect();
    let j = JunctionSpec::new(2, branches).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let r = verify::monotonicity_check(&mut rng, &j, 5.0, 200, 100).map_err(|e| e.to_string())?;
    Ok((
        r.violations == 0,
        format!(
            "{} pairs x {} steps on 130-cell branches, {} comparisons, {} violations, max U - V = {:e}",
            r.pairs, r.steps, r.comparisons, r.violations, r.worst_excess
        ),
    ))
}

fn equivalence() -> Outcome {
    let s = table1();
    let mut worst = verify::equivalence_gap(&s.junction, &s.initial, 5.0, 500).map_err(|e| e.to_string())?;
    let reference = worst;
    for (j, init) in random_scenarios() {
        worst = worst.max(verify::equivalence_gap(&j, &init, 5.0, 500).map_err(|e| e.to_string())?);
    }
    Ok((worst <= 1e-8, format!("reference gap {reference:e}, worst over 21 scenarios {worst:e} veh/km")))
}

fn shock_speeds() -> Outcome {
    let dir = scratch()?;
    let mut s = table1_writing_to(&dir);
    s.grid.dx_m = 1.0;
    let v1 = commands::shock(&s, 2, (2.0, 24.0), 23, None).map_err(|e| e.to_string())?.speed_kmh;
    let v2 = commands::shock(&s, 0, (150.0, 300.0), 31, None).map_err(|e| e.to_string())?.speed_kmh;
    let ok1 = (v1 + 5.612).abs() <= 0.1 * 5.612;
    let ok2 = (v2 + 2.92).abs() <= 0.1 * 2.92;
    Ok((ok1 && ok2, format!("mid-road front {v1:.4} km/h, incoming front {v2:.4} km/h")))
}

fn refinement() -> Outcome {
    let s = table1();
    let grid = GridSpec { dt: TimeStep::Auto, ..s.grid };
    let r = junction_hj_core::analysis::refinement_study(&s.junction, &s.initial, &grid, &[5.0, 2.5, 1.25], &[
        50.0, 100.0, 250.0,
    ])
    .map_err(|e| e.to_string())?;
    let coarse = &r.levels[0].label_diff_per_time;
    let fine = &r.levels[1].label_diff_per_time;
    let passed = coarse.len() == 3 && fine.len() == 3 && coarse.iter().zip(fine).all(|(a, b)| b < a);
    Ok((passed, format!("5 vs 2.5 m {coarse:.4?}, 2.5 vs 1.25 m {fine:.4?} labels")))
}

fn conservation() -> Outcome {
    let s = table1();
    let ds = DensitySolver::new(&s.junction, &s.grid, &s.initial, GammaPolicy::Fixed).map_err(|e| e.to_string())?;
    let steps = s.grid.n_steps(ds.dt_s());
    let r = verify::conservation_residual(&s.junction, &s.grid, &s.initial, GammaPolicy::Fixed, steps)
        .map_err(|e| e.to_string())?;
    Ok((r <= 1e-10, format!("max relative residual {r:e} over {steps} steps")))
}

fn continuous_bounds() -> Outcome {
    let s = table1();
    let mut failures = verify::bound_bracket_failures(&s.junction, &s.grid, &s.initial).map_err(|e| e.to_string())?;
    let grid = GridSpec { dx_m: 5.0, dt: TimeStep::Auto, horizon_s: 0.0 };
    for (k, (j, init)) in random_scenarios().into_iter().enumerate() {
        let f = verify::bound_bracket_failures(&j, &grid, &init).map_err(|e| e.to_string())?;
        failures.extend(f.into_iter().map(|m| format!("scenario {k}: {m}")));
    }
    let detail = match failures.first() {
        None => "bracketed on 21 scenarios".to_string(),
        Some(f) => format!("{} failures, first: {f}", failures.len()),
    };
    Ok((failures.is_empty(), detail))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 table1-reproduction", table1_reproduction),
        ("2 estimate-suite", estimate_suite),
        ("3 monotonicity", monotonicity),
        ("4 equivalence", equivalence),
        ("5 shock-speeds", shock_speeds),
        ("6 refinement", refinement),
        ("7 conservation", conservation),
        ("8 continuous-bounds", continuous_bounds),
    ];
    let mut all = true;
    for (name, check) in criteria {
        let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        all &= passed;
        println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
