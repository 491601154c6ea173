use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use junction_hj::commands::{self, CommonOptions, VerifyOptions};
use junction_hj::scenario::parse_dt;
use junction_hj::{AppError, AppResult};

#[derive(Args, Debug, Clone)]
struct Common {
    /// Output directory (overrides the scenario)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Time step: `auto` or seconds
    #[arg(long, global = true)]
    dt: Option<String>,
    /// Treat estimate violations as fatal
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the label scheme and write labels, derived densities and estimates
    RunHj { scenario: PathBuf },
    /// Run the Godunov density scheme directly
    RunDensity { scenario: PathBuf },
    /// Check equivalence, estimates, bounds, conservation and monotonicity
    Verify {
        scenario: PathBuf,
        /// Seed of the random monotonicity pairs
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of ordered pairs
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        /// Steps per pair
        #[arg(long, default_value_t = 100)]
        pair_steps: usize,
    },
    /// Compare label fields across space steps
    Refine {
        scenario: PathBuf,
        /// Space steps in meters, coarsest first
        #[arg(long, value_delimiter = ',', default_values_t = vec![5.0, 2.5, 1.25])]
        levels: Vec<f64>,
        /// Comparison times in seconds (default: snapshot times, else the horizon)
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Track a density front and fit its speed
    Shock {
        scenario: PathBuf,
        /// Branch name or 1-based number
        #[arg(long)]
        branch: String,
        /// Time window `t0,t1` in seconds
        #[arg(long, value_delimiter = ',', required = true)]
        window: Vec<f64>,
        /// Snapshots in the window
        #[arg(long, default_value_t = 41)]
        samples: usize,
        /// Threshold density (default: midpoint of the first snapshot)
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Extract vehicle trajectories as iso-label curves
    Trajectories {
        scenario: PathBuf,
        /// Label values to follow
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        labels: Vec<f64>,
        /// Keep every k-th step
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
}

/// Monotone HJ scheme on a traffic junction and its Godunov density form.
#[derive(Parser, Debug)]
#[command(name = "junction-hj", version, about)]
struct Full {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

fn common_options(c: &Common) -> AppResult<CommonOptions> {
    Ok(CommonOptions {
        out: c.out.clone(),
        dt: c.dt.as_deref().map(parse_dt).transpose()?,
        strict: c.strict,
    })
}

fn run(cli: Full) -> AppResult<()> {
    let common = common_options(&cli.common)?;
    let started = Instant::now();
    match cli.command {
        Command::RunHj { scenario } => {
            let s = commands::load(&scenario, &common)?;
            let (_, summary) = commands::run_labels(&s, common.strict)?;
            for v in &summary.violations {
                eprintln!("warning: {v}");
            }
            println!(
                "run-hj: dt = {} s, {} steps, {} files in {}",
                summary.dt_s,
                summary.n_steps,
                summary.files.len() + 1,
                summary.out_dir.display()
            );
        }
        Command::RunDensity { scenario } => {
            let s = commands::load(&scenario, &common)?;
            let summary = commands::run_densities(&s)?;
            println!(
                "run-density: dt = {} s, {} steps, {} files in {}",
                summary.dt_s,
                summary.n_steps,
                summary.files.len() + 1,
                summary.out_dir.display()
            );
        }
        Command::Verify { scenario, seed, pairs, pair_steps } => {
            let s = commands::load(&scenario, &common)?;
            let opts = VerifyOptions { seed, pairs, pair_steps, ..VerifyOptions::default() };
            let checks = commands::verify_scenario(&s, opts)?;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if !failed.is_empty() {
                return Err(AppError::Invariant(failed.join(", ")));
            }
        }
        Command::Refine { scenario, levels, times } => {
            let s = commands::load(&scenario, &common)?;
            let times = times.unwrap_or_else(|| {
                let t: Vec<f64> = s.outputs.snapshot_times_s.iter().copied().filter(|t| *t > 0.0).collect();
                if t.is_empty() { vec![s.grid.horizon_s] } else { t }
            });
            let report = commands::refine(&s, &levels, &times)?;
            for l in &report.levels {
                match l.label_diff_to_next_finer {
                    Some(d) => println!("dx = {} m, dt = {} s: label diff to next level {d:e}", l.dx_m, l.dt_s),
                    None => println!("dx = {} m, dt = {} s", l.dx_m, l.dt_s),
                }
            }
        }
        Command::Shock { scenario, branch, window, samples, threshold } => {
            if window.len() != 2 || window[0] >= window[1] {
                return Err(AppError::Usage("--window needs two increasing times `t0,t1`".into()));
            }
            let s = commands::load(&scenario, &common)?;
            let b = s.branch_index(&branch)?;
            let trace = commands::shock(&s, b, (window[0], window[1]), samples, threshold)?;
            println!(
                "branch {}: front speed {} km/h (threshold {} veh/km, {} points, rms residual {} m)",
                s.names[b],
                trace.speed_kmh,
                trace.threshold,
                trace.points.len(),
                trace.residual_m
            );
        }
        Command::Trajectories { scenario, labels, every } => {
            if labels.is_empty() {
                return Err(AppError::Usage("--labels needs at least one value".into()));
            }
            let s = commands::load(&scenario, &common)?;
            let path = commands::trajectories(&s, &labels, every)?;
            println!("wrote {}", path.display());
        }
    }
    println!("wall time: {:.3} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Full::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
