//! Job configuration (TOML). Unknown keys are rejected everywhere.
//!
//! ```toml
//! task = "chern"
//! seed = 7
//!
//! [model]
//! name = "kagome"
//! nu = 4.0
//! mu = -6.3
//!
//! [params]
//! k_grid = 100
//!
//! [output]
//! dir = "out"
//! format = "json"
//! ```

use std::path::PathBuf;

use bosonic_bdg::bdg::Boundary;
use bosonic_bdg::models::DisorderKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Spectrum,
    Stability,
    Chern,
    Winding,
    Edge,
    BoundaryCurrent,
    Scan,
    Bogoliubov,
    Dynamics,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Spectrum => "spectrum",
            Task::Stability => "stability",
            Task::Chern => "chern",
            Task::Winding => "winding",
            Task::Edge => "edge",
            Task::BoundaryCurrent => "boundary-current",
            Task::Scan => "scan",
            Task::Bogoliubov => "bogoliubov",
            Task::Dynamics => "dynamics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Toy2,
    Toy4,
    Ssh,
    Kagome,
    Hofstadter,
    ChernInsulator,
    Atomic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSection {
    pub amplitude: f64,
    pub kind: DisorderKind,
    /// Falls back to the job seed.
    pub seed: Option<u64>,
}

/// Model parameters. `nu` is the drive: the toy-model parameter for
/// `toy2`/`toy4`, the kagomé pairing amplitude, and an onsite pairing `iν`
/// for every other lattice model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: ModelName,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub nu: f64,
    pub lambda: Option<f64>,
    pub t_intra: Option<f64>,
    pub t_inter: Option<f64>,
    pub p: Option<i64>,
    pub q: Option<usize>,
    pub mass: Option<f64>,
    pub energies: Option<Vec<f64>>,
    /// Sample extents in cells (sites along axis 1 for `hofstadter`).
    pub dims: Option<Vec<usize>>,
    pub bc: Option<Vec<Boundary>>,
    pub disorder: Option<DisorderSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl Range {
    /// `n` evenly spaced points including both ends (`start` alone if `n = 1`).
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.start];
        }
        (0..self.n)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub norm: f64,
    pub depth: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Bloch grid per axis for Chern numbers and bulk gaps.
    pub k_grid: usize,
    /// Edge momenta (strip tasks) or k-points (winding).
    pub n_k: usize,
    /// Strip width in cells.
    pub width: usize,
    /// Boundary-current gap; all gaps between positive bands if absent.
    pub gap_index: Option<usize>,
    pub tol: Option<f64>,
    pub gap: Option<f64>,
    pub perturbation: Option<PerturbationSection>,
    pub mu_grid: Option<Range>,
    pub nu_grid: Option<Range>,
    /// Open-chain length for `scan`.
    pub cells: usize,
    /// Bloch points for the bulk side of `scan`; must resolve the smallest ν.
    pub bulk_k: usize,
    pub times: Range,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            k_grid: 100,
            n_k: 200,
            width: 30,
            gap_index: None,
            tol: None,
            gap: None,
            perturbation: None,
            mu_grid: None,
            nu_grid: None,
            cells: 20,
            bulk_k: 512,
            times: Range { start: 0.0, stop: 10.0, n: 11 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    #[serde(default)]
    pub params: Params,
    pub output: OutputSection,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: Some(field.to_string()),
        message: message.into(),
    }
}

impl JobConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config {
            field: None,
            message: e.message().to_string(),
        })?;
        let cfg: JobConfig = serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
            field: Some(e.path().to_string()).filter(|p| p != "."),
            message: e.inner().message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that the schema alone cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.params;
        for (name, v, min) in [
            ("params.k_grid", p.k_grid, 2),
            ("params.n_k", p.n_k, 1),
            ("params.width", p.width, 1),
            ("params.cells", p.cells, 1),
            ("params.bulk_k", p.bulk_k, 1),
        ] {
            if v < min {
                return Err(invalid(name, format!("must be at least {min}, got {v}")));
            }
        }
        for (name, v) in [("params.tol", p.tol), ("params.gap", p.gap)] {
            if let Some(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(invalid(name, format!("must be positive, got {x}")));
                }
            }
        }
        if p.gap_index == Some(0) {
            return Err(invalid("params.gap_index", "gaps are numbered from 1"));
        }
        for (name, r) in [("params.mu_grid", p.mu_grid), ("params.nu_grid", p.nu_grid), ("params.times", Some(p.times))] {
            if let Some(r) = r {
                if r.n == 0 {
                    return Err(invalid(&format!("{name}.n"), "grid must be nonempty"));
                }
                if !r.start.is_finite() || !r.stop.is_finite() {
                    return Err(invalid(name, "grid ends must be finite"));
                }
            }
        }
        if let Some(pert) = &p.perturbation {
            if !(pert.norm >= 0.0 && pert.norm.is_finite()) {
                return Err(invalid("params.perturbation.norm", "must be >= 0"));
            }
            if pert.depth == 0 {
                return Err(invalid("params.perturbation.depth", "must be >= 1"));
            }
        }
        let m = &self.model;
        for (name, v) in [("model.mu", m.mu), ("model.nu", m.nu)] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if let Some(d) = &m.disorder {
            if !(d.amplitude >= 0.0 && d.amplitude.is_finite()) {
                return Err(invalid("model.disorder.amplitude", "must be >= 0"));
            }
        }
        if let Some(dims) = &m.dims {
            if dims.contains(&0) {
                return Err(invalid("model.dims", "extents must be positive"));
            }
        }
        if self.task == Task::Scan && (p.mu_grid.is_none() || p.nu_grid.is_none()) {
            return Err(invalid("params.mu_grid", "scan needs params.mu_grid and params.nu_grid"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "task = \"spectrum\"\n[model]\nname = \"toy2\"\nmu = 0.6\nnu = 1.0\n[output]\ndir = \"out\"\n";

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = JobConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.task, Task::Spectrum);
        assert_eq!(cfg.params, Params::default());
        assert_eq!(cfg.output.format, Format::Csv);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let text = MINIMAL.replace("nu = 1.0", "nu = 1.0\ncolour = 3");
        match JobConfig::parse(&text) {
            Err(CliError::Config { field, message }) => {
                assert!(message.contains("colour"), "{message}");
                assert_eq!(field.as_deref(), Some("model.colour"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_grid_names_the_field() {
        let text = format!("{MINIMAL}[params]\nk_grid = -4\n");
        match JobConfig::parse(&text) {
            Err(CliError::Config { field, .. }) => assert_eq!(field.as_deref(), Some("params.k_grid")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        let text = format!("{MINIMAL}[params]\ntol = 0.0\n");
        assert!(matches!(JobConfig::parse(&text), Err(CliError::Config { field: Some(f), .. }) if f == "params.tol"));
    }

    #[test]
    fn range_points_include_both_ends() {
        let r = Range { start: -1.0, stop: 1.0, n: 5 };
        assert_eq!(r.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(Range { start: 2.0, stop: 9.0, n: 1 }.points(), vec![2.0]);
    }
}
