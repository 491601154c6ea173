//! CSV and manifest writers.
//!
//! Every number is written with 17 significant digits so values read back
//! are bit-identical.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use junction_hj_core::density_scheme::DensityField;
use junction_hj_core::hj_scheme::{EstimateRow, LabelField};
use junction_hj_core::JunctionSpec;
use serde::Serialize;

use crate::error::AppResult;

/// Round-trip formatting of a float.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// `{field}_t{time}.csv`, with the time as requested.
pub fn snapshot_file_name(field: &str, time_s: f64) -> String {
    format!("{field}_t{time_s}.csv")
}

/// Creates `dir` if needed.
pub fn ensure_dir(dir: &Path) -> AppResult<()> {
    fs::create_dir_all(dir).map_err(|e| crate::AppError::Io(format!("{}: {e}", dir.display())))
}

fn create(path: &Path) -> AppResult<BufWriter<File>> {
    let f = File::create(path).map_err(|e| crate::AppError::Io(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

/// Writes label values on grid points.
pub fn write_labels(path: &Path, names: &[String], dx_m: f64, labels: &LabelField) -> AppResult<()> {
    let mut w = create(path)?;
    writeln!(w, "branch,index,x_m,value")?;
    for (a, name) in names.iter().enumerate() {
        for (i, v) in labels.branch(a).iter().enumerate() {
            writeln!(w, "{name},{i},{},{}", num(i as f64 * dx_m), num(*v))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes forward gradients `p_{i,+}` (labels/km) at points `0..N_b`.
pub fn write_gradients(path: &Path, names: &[String], dx_m: f64, labels: &LabelField) -> AppResult<()> {
    let dx_km = dx_m / 1000.0;
    let mut w = create(path)?;
    writeln!(w, "branch,index,x_m,value")?;
    for (a, name) in names.iter().enumerate() {
        for (i, pair) in labels.branch(a).windows(2).enumerate() {
            let p = (pair[1] - pair[0]) / dx_km;
            writeln!(w, "{name},{i},{},{}", num(i as f64 * dx_m), num(p))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes cell densities at cell centers.
pub fn write_densities(path: &Path, names: &[String], dx_m: f64, rho: &DensityField) -> AppResult<()> {
    let mut w = create(path)?;
    writeln!(w, "branch,index,x_m,value")?;
    for (a, name) in names.iter().enumerate() {
        for (j, v) in rho.branch(a).iter().enumerate() {
            writeln!(w, "{name},{j},{},{}", num((j as f64 + 0.5) * dx_m), num(*v))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes one row per observed state.
pub fn write_estimates(path: &Path, names: &[String], rows: &[EstimateRow]) -> AppResult<()> {
    let mut w = create(path)?;
    write!(w, "step,time_s,m_n,M_n")?;
    for n in names {
        write!(w, ",lower_margin_{n}")?;
    }
    for n in names {
        write!(w, ",upper_margin_{n}")?;
    }
    writeln!(w)?;
    for r in rows {
        write!(w, "{},{},{},{}", r.step, num(r.time_s), num(r.m), num(r.big_m))?;
        for v in r.lower_margin.iter().chain(&r.upper_margin) {
            write!(w, ",{}", num(*v))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a header and rows of preformatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> AppResult<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Per-branch entry of the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestBranch {
    /// Branch name.
    pub name: String,
    /// Lower gradient or density bound.
    pub lower: f64,
    /// Upper gradient or density bound.
    pub upper: f64,
    /// Lipschitz bound used in the CFL condition (km/h).
    pub lipschitz: f64,
}

/// Run summary written next to the data files.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    /// Subcommand that produced the run.
    pub command: String,
    /// Scheme (`labels` or `densities`).
    pub scheme: String,
    /// Space step (m).
    pub dx_m: f64,
    /// Resolved time step (s).
    pub dt_s: f64,
    /// Largest admissible time step (s).
    pub dt_max_s: f64,
    /// Steps taken.
    pub n_steps: usize,
    /// Final time (s).
    pub final_time_s: f64,
    /// Wall-clock time of the run (s). The only nondeterministic entry.
    pub wall_time_s: f64,
    /// `m0` (labels/h, or veh/h scaled by `1/gamma` for densities).
    pub m0: f64,
    /// `M0` (labels/h); absent for the density scheme.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_m0: Option<f64>,
    /// Meaning of the per-branch bounds.
    pub bounds_unit: String,
    /// Per-branch bounds.
    pub branch: Vec<ManifestBranch>,
    /// Estimate violations recorded in non-strict mode.
    pub violations: Vec<String>,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
}

/// Writes `manifest.toml`.
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> AppResult<PathBuf> {
    let path = dir.join("manifest.toml");
    let text = toml::to_string(manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| crate::AppError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Branch names for a junction without a scenario.
pub fn default_names(junction: &JunctionSpec) -> Vec<String> {
    (1..=junction.len()).map(|a| a.to_string()).collect()
}
