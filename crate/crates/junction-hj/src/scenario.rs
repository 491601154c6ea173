//! Scenario files.
//!
//! A scenario is a TOML document. Incoming branches are listed first.
//!
//! ```toml
//! [grid]
//! dx_m = 5.0
//! dt = "auto"            # or a step in seconds
//! horizon_s = 350.0
//!
//! [initial]
//! junction_label = 0.0   # optional, default 0
//!
//! [gamma]
//! mode = "fixed"         # or "maximize" with candidates / resolution / lower_bounds
//!
//! [outputs]
//! snapshot_times_s = [0.0, 350.0]
//! fields = ["labels", "densities", "gradients", "estimates"]
//! out_dir = "out"
//!
//! [diagram]              # default for branches without their own
//! kind = "bi-parabolic"
//! rho_c = 20.0
//! rho_max = 160.0
//! f_max = 1000.0
//! k = 1.5
//!
//! [[branch]]
//! name = "in1"
//! orientation = "incoming"
//! gamma = 0.5
//! length_m = 200.0
//! density = 15.0         # or a list of { from_m, to_m, rho } segments
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use junction_hj_core::density_scheme::{AdmissibleSet, GammaPolicy, DEFAULT_SIMPLEX_RESOLUTION};
use junction_hj_core::{
    Branch, DiagramKind, FundamentalDiagram, GridSpec, InitialData, JunctionSpec, Segment, TimeStep,
};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

/// Output fields that can be requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    /// Label values on grid points.
    Labels,
    /// Cell densities.
    Densities,
    /// Forward label gradients `p_{i,+}`.
    Gradients,
    /// Per-step estimate rows.
    Estimates,
}

impl Field {
    /// Lowercase name, as used in file names.
    pub fn name(self) -> &'static str {
        match self {
            Field::Labels => "labels",
            Field::Densities => "densities",
            Field::Gradients => "gradients",
            Field::Estimates => "estimates",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Output selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    /// Snapshot times in seconds.
    pub snapshot_times_s: Vec<f64>,
    /// Requested fields, sorted and deduplicated.
    pub fields: Vec<Field>,
    /// Output directory.
    pub out_dir: PathBuf,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Branch names, in branch order.
    pub names: Vec<String>,
    /// Junction.
    pub junction: JunctionSpec,
    /// Grid.
    pub grid: GridSpec,
    /// Initial data.
    pub initial: InitialData,
    /// Split coefficient policy for the density scheme.
    pub gamma_policy: GammaPolicy,
    /// Outputs.
    pub outputs: Outputs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    grid: RawGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<RawInitial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<RawGamma>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outputs: Option<RawOutputs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diagram: Option<RawDiagram>,
    branch: Vec<RawBranch>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dx_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<RawDt>,
    horizon_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawDt {
    Seconds(f64),
    Text(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    #[serde(default)]
    junction_label: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGamma {
    mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    candidates: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resolution: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower_bounds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    #[serde(default)]
    snapshot_times_s: Vec<f64>,
    #[serde(default)]
    fields: Vec<Field>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiagram {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    f_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    breakpoints: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBranch {
    name: String,
    orientation: String,
    gamma: f64,
    length_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inflow_density: Option<f64>,
    density: RawDensity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diagram: Option<RawDiagram>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawDensity {
    Uniform(f64),
    Segments(Vec<RawSegment>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    from_m: f64,
    to_m: f64,
    rho: f64,
}

/// Default output directory.
pub const DEFAULT_OUT_DIR: &str = "out";

fn invalid(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

impl RawDiagram {
    fn build(&self, branch: &str) -> AppResult<FundamentalDiagram> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| invalid(format!("branch {branch}: diagram is missing `{key}`")))
        };
        let d = match self.kind.as_str() {
            "bi-parabolic" => FundamentalDiagram::bi_parabolic(
                need(self.rho_c, "rho_c")?,
                need(self.rho_max, "rho_max")?,
                need(self.f_max, "f_max")?,
                need(self.k, "k")?,
            ),
            "piecewise" => {
                let points = self.breakpoints.as_ref().ok_or_else(|| {
                    invalid(format!("branch {branch}: diagram is missing `breakpoints`"))
                })?;
                FundamentalDiagram::piecewise(points.iter().map(|p| (p[0], p[1])).collect())
            }
            other => {
                return Err(invalid(format!(
                    "branch {branch}: unknown diagram kind `{other}` (expected bi-parabolic or piecewise)"
                )))
            }
        };
        d.map_err(|e| invalid(format!("branch {branch}: {e}")))
    }

    fn from_diagram(d: &FundamentalDiagram) -> Self {
        match d.kind() {
            DiagramKind::BiParabolic { k } => RawDiagram {
                kind: "bi-parabolic".into(),
                rho_c: Some(d.rho_c()),
                rho_max: Some(d.rho_max()),
                f_max: Some(d.f_max()),
                k: Some(*k),
                breakpoints: None,
            },
            DiagramKind::UserPiecewise { breakpoints } => RawDiagram {
                kind: "piecewise".into(),
                rho_c: None,
                rho_max: None,
                f_max: None,
                k: None,
                breakpoints: Some(breakpoints.iter().map(|&(x, y)| [x, y]).collect()),
            },
        }
    }
}

impl FromStr for Scenario {
    type Err = AppError;

    fn from_str(text: &str) -> AppResult<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| AppError::Parse(e.to_string()))?;
        Scenario::from_raw(raw)
    }
}

impl Scenario {
    /// Reads and validates a scenario file.
    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))?;
        text.parse().map_err(|e| match e {
            AppError::Parse(msg) => AppError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn from_raw(raw: RawScenario) -> AppResult<Self> {
        let dt = match raw.grid.dt {
            None => TimeStep::Auto,
            Some(RawDt::Seconds(s)) => TimeStep::Seconds(s),
            Some(RawDt::Text(t)) => parse_dt(&t)?,
        };
        let grid = GridSpec { dx_m: raw.grid.dx_m, dt, horizon_s: raw.grid.horizon_s };
        grid.validate().map_err(AppError::Core)?;

        if raw.branch.is_empty() {
            return Err(invalid("no [[branch]] entries"));
        }
        let mut names = Vec::with_capacity(raw.branch.len());
        let mut branches = Vec::with_capacity(raw.branch.len());
        let mut profiles = Vec::with_capacity(raw.branch.len());
        let mut inflow = Vec::with_capacity(raw.branch.len());
        let mut n_in = 0;
        let mut seen_outgoing = false;
        for b in &raw.branch {
            if names.contains(&b.name) {
                return Err(invalid(format!("duplicate branch name `{}`", b.name)));
            }
            match b.orientation.as_str() {
                "incoming" if seen_outgoing => {
                    return Err(invalid(format!(
                        "branch {}: incoming branches must be listed before outgoing ones",
                        b.name
                    )))
                }
                "incoming" => n_in += 1,
                "outgoing" => seen_outgoing = true,
                other => {
                    return Err(invalid(format!(
                        "branch {}: orientation `{other}` (expected incoming or outgoing)",
                        b.name
                    )))
                }
            }
            if b.orientation == "outgoing" && b.inflow_density.is_some() {
                return Err(invalid(format!(
                    "branch {}: inflow_density only applies to incoming branches",
                    b.name
                )));
            }
            let diagram = b
                .diagram
                .as_ref()
                .or(raw.diagram.as_ref())
                .ok_or_else(|| invalid(format!("branch {}: no diagram and no default [diagram]", b.name)))?
                .build(&b.name)?;
            let segments = match &b.density {
                RawDensity::Uniform(rho) => vec![Segment { from_m: 0.0, to_m: b.length_m, rho: *rho }],
                RawDensity::Segments(list) => list
                    .iter()
                    .map(|s| Segment { from_m: s.from_m, to_m: s.to_m, rho: s.rho })
                    .collect(),
            };
            names.push(b.name.clone());
            branches.push(Branch { diagram, gamma: b.gamma, length_m: b.length_m });
            profiles.push(segments);
            inflow.push(b.inflow_density);
        }
        let junction = JunctionSpec::new(n_in, branches).map_err(AppError::Core)?;
        let initial = InitialData {
            profiles,
            junction_label: raw.initial.map_or(0.0, |i| i.junction_label),
            inflow_density: inflow,
        };
        initial.validate(&junction).map_err(|e| match e {
            junction_hj_core::Error::InvalidInitialData { branch, reason } => {
                invalid(format!("branch {}: {reason}", names[branch]))
            }
            other => AppError::Core(other),
        })?;

        let gamma_policy = match raw.gamma {
            None => GammaPolicy::Fixed,
            Some(g) => match g.mode.as_str() {
                "fixed" => {
                    if g.candidates.is_some() || g.resolution.is_some() || g.lower_bounds.is_some() {
                        return Err(invalid("gamma mode `fixed` takes no further keys"));
                    }
                    GammaPolicy::Fixed
                }
                "maximize" => {
                    let set = match (g.candidates, g.resolution, g.lower_bounds) {
                        (Some(c), None, None) => AdmissibleSet::Candidates(c),
                        (None, r, lb) => AdmissibleSet::Simplex {
                            resolution: r.unwrap_or(DEFAULT_SIMPLEX_RESOLUTION),
                            lower_bounds: lb.unwrap_or_default(),
                        },
                        _ => {
                            return Err(invalid(
                                "gamma: `candidates` cannot be combined with `resolution` or `lower_bounds`",
                            ))
                        }
                    };
                    junction_hj_core::density_scheme::admissible_candidates(&junction, &set)
                        .map_err(|e| invalid(format!("gamma: {e}")))?;
                    GammaPolicy::Maximize(set)
                }
                other => {
                    return Err(invalid(format!("gamma mode `{other}` (expected fixed or maximize)")))
                }
            },
        };

        let outputs = match raw.outputs {
            None => Outputs {
                snapshot_times_s: Vec::new(),
                fields: vec![Field::Densities, Field::Estimates],
                out_dir: PathBuf::from(DEFAULT_OUT_DIR),
            },
            Some(o) => {
                if let Some(t) = o.snapshot_times_s.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
                    return Err(invalid(format!("snapshot time {t} must be nonnegative")));
                }
                let mut fields = o.fields;
                fields.sort();
                fields.dedup();
                Outputs {
                    snapshot_times_s: o.snapshot_times_s,
                    fields,
                    out_dir: o.out_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
                }
            }
        };

        Ok(Scenario { names, junction, grid, initial, gamma_policy, outputs })
    }

    /// Canonical TOML text: every default spelled out and one diagram per
    /// branch. Loading it gives back an identical scenario.
    pub fn to_canonical_toml(&self) -> String {
        let branch = (0..self.junction.len())
            .map(|a| {
                let b = self.junction.branch(a);
                RawBranch {
                    name: self.names[a].clone(),
                    orientation: match self.junction.orientation(a) {
                        junction_hj_core::Orientation::Incoming => "incoming".into(),
                        junction_hj_core::Orientation::Outgoing => "outgoing".into(),
                    },
                    gamma: b.gamma,
                    length_m: b.length_m,
                    inflow_density: self.initial.inflow_density[a],
                    density: RawDensity::Segments(
                        self.initial.profiles[a]
                            .iter()
                            .map(|s| RawSegment { from_m: s.from_m, to_m: s.to_m, rho: s.rho })
                            .collect(),
                    ),
                    diagram: Some(RawDiagram::from_diagram(&b.diagram)),
                }
            })
            .collect();
        let gamma = match &self.gamma_policy {
            GammaPolicy::Fixed => RawGamma { mode: "fixed".into(), candidates: None, resolution: None, lower_bounds: None },
            GammaPolicy::Maximize(AdmissibleSet::Candidates(c)) => RawGamma {
                mode: "maximize".into(),
                candidates: Some(c.clone()),
                resolution: None,
                lower_bounds: None,
            },
            GammaPolicy::Maximize(AdmissibleSet::Simplex { resolution, lower_bounds }) => RawGamma {
                mode: "maximize".into(),
                candidates: None,
                resolution: Some(*resolution),
                lower_bounds: Some(lower_bounds.clone()),
            },
        };
        let raw = RawScenario {
            grid: RawGrid {
                dx_m: self.grid.dx_m,
                dt: Some(match self.grid.dt {
                    TimeStep::Auto => RawDt::Text("auto".into()),
                    TimeStep::Seconds(s) => RawDt::Seconds(s),
                }),
                horizon_s: self.grid.horizon_s,
            },
            initial: Some(RawInitial { junction_label: self.initial.junction_label }),
            gamma: Some(gamma),
            outputs: Some(RawOutputs {
                snapshot_times_s: self.outputs.snapshot_times_s.clone(),
                fields: self.outputs.fields.clone(),
                out_dir: Some(self.outputs.out_dir.clone()),
            }),
            diagram: None,
            branch,
        };
        toml::to_string(&raw).expect("scenario serializes")
    }

    /// Resolves a branch given by name or by 1-based number.
    pub fn branch_index(&self, key: &str) -> AppResult<usize> {
        if let Some(a) = self.names.iter().position(|n| n == key) {
            return Ok(a);
        }
        match key.parse::<usize>() {
            Ok(k) if (1..=self.names.len()).contains(&k) => Ok(k - 1),
            _ => Err(AppError::Usage(format!(
                "unknown branch `{key}` (names: {}; or 1..={})",
                self.names.join(", "),
                self.names.len()
            ))),
        }
    }
}

/// Parses `auto` or a positive number of seconds.
pub fn parse_dt(text: &str) -> AppResult<TimeStep> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(TimeStep::Auto);
    }
    match text.parse::<f64>() {
        Ok(s) if s.is_finite() && s > 0.0 => Ok(TimeStep::Seconds(s)),
        _ => Err(invalid(format!("dt must be `auto` or a positive number of seconds, got `{text}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[grid]
dx_m = 10.0
horizon_s = 60.0

[[branch]]
name = "a"
orientation = "incoming"
gamma = 1.0
length_m = 100.0
density = 12.0
[branch.diagram]
kind = "piecewise"
breakpoints = [[0.0, 0.0], [25.0, 1500.0], [150.0, 0.0]]

[[branch]]
name = "b"
orientation = "outgoing"
gamma = 1.0
length_m = 100.0
density = 12.0
[branch.diagram]
kind = "piecewise"
breakpoints = [[0.0, 0.0], [25.0, 1500.0], [150.0, 0.0]]
"#;

    #[test]
    fn minimal_scenario_uses_defaults() {
        let s: Scenario = MINIMAL.parse().unwrap();
        assert_eq!(s.grid.dt, TimeStep::Auto);
        assert_eq!(s.initial.junction_label, 0.0);
        assert_eq!(s.gamma_policy, GammaPolicy::Fixed);
        assert_eq!(s.junction.n_in(), 1);
        assert_eq!(s.outputs.out_dir, PathBuf::from("out"));
        let back: Scenario = s.to_canonical_toml().parse().unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_bad_simplex() {
        let text = MINIMAL.replacen("gamma = 1.0", "gamma = 0.9", 1);
        let err = text.parse::<Scenario>().unwrap_err();
        assert!(err.to_string().contains("sum to 0.9"), "{err}");
    }

    #[test]
    fn parse_errors_carry_location() {
        let text = MINIMAL.replace("dx_m = 10.0", "dx_m = \"ten\"");
        let err = text.parse::<Scenario>().unwrap_err();
        assert!(matches!(err, AppError::Parse(_)));
        assert!(err.to_string().contains("line"), "{err}");
        let text = MINIMAL.replace("horizon_s = 60.0", "horizon_s = 60.0\nbogus = 1");
        assert!(text.parse::<Scenario>().is_err());
    }

    #[test]
    fn ordering_and_names() {
        let text = MINIMAL
            .replacen("orientation = \"incoming\"", "orientation = \"x\"", 1);
        assert!(text.parse::<Scenario>().is_err());
        let swapped = MINIMAL
            .replacen("orientation = \"incoming\"", "orientation = \"tmp\"", 1)
            .replacen("orientation = \"outgoing\"", "orientation = \"incoming\"", 1)
            .replacen("orientation = \"tmp\"", "orientation = \"outgoing\"", 1);
        assert!(swapped.parse::<Scenario>().unwrap_err().to_string().contains("before outgoing"));
        let s: Scenario = MINIMAL.parse().unwrap();
        assert_eq!(s.branch_index("b").unwrap(), 1);
        assert_eq!(s.branch_index("1").unwrap(), 0);
        assert!(s.branch_index("3").is_err());
    }

    #[test]
    fn dt_forms() {
        assert_eq!(parse_dt("auto").unwrap(), TimeStep::Auto);
        assert_eq!(parse_dt("0.16").unwrap(), TimeStep::Seconds(0.16));
        assert!(parse_dt("-1").is_err());
        let s: Scenario = MINIMAL.replace("horizon_s = 60.0", "horizon_s = 60.0\ndt = 0.2").parse().unwrap();
        assert_eq!(s.grid.dt, TimeStep::Seconds(0.2));
    }

    #[test]
    fn maximize_policy() {
        let text = format!("{MINIMAL}\n[gamma]\nmode = \"maximize\"\ncandidates = [[1.0, 1.0]]\n");
        let s: Scenario = text.parse().unwrap();
        assert_eq!(
            s.gamma_policy,
            GammaPolicy::Maximize(AdmissibleSet::Candidates(vec![vec![1.0, 1.0]]))
        );
        let back: Scenario = s.to_canonical_toml().parse().unwrap();
        assert_eq!(back, s);
        let text = format!("{MINIMAL}\n[gamma]\nmode = \"maximize\"\ncandidates = [[0.5, 1.0]]\n");
        assert!(text.parse::<Scenario>().is_err());
    }
}
