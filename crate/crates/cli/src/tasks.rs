//! One function per task: build the model, call the library, tabulate.

use bosonic_bdg::bdg::{toy2, toy4, BdGOperator, Boundary};
use bosonic_bdg::halfspace::{self, BoundaryPerturbation};
use bosonic_bdg::models::{self, DisorderConfig, LatticeModel};
use bosonic_bdg::topology;
use bosonic_bdg::{bogoliubov, dynamics, linalg::I, spectral};
use serde_json::{json, Value};

use crate::config::{JobConfig, ModelName, ModelSection, Task};
use crate::output::{Table, TaskResult};
use crate::CliError;

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: Some(field.to_string()),
        message: message.into(),
    }
}

fn dims_or(m: &ModelSection, default: &[usize], len: usize) -> Result<Vec<usize>, CliError> {
    let dims = m.dims.clone().unwrap_or_else(|| default.to_vec());
    if dims.len() != len {
        return Err(invalid("model.dims", format!("{:?} needs {len} extents, got {}", m.name, dims.len())));
    }
    Ok(dims)
}

fn bc_or(m: &ModelSection, len: usize) -> Result<Vec<Boundary>, CliError> {
    let bc = m.bc.clone().unwrap_or_else(|| vec![Boundary::Periodic; len]);
    if bc.len() != len {
        return Err(invalid("model.bc", format!("expected {len} boundary conditions, got {}", bc.len())));
    }
    Ok(bc)
}

/// The lattice model with its drive and disorder. `drive` is false for the
/// scan, which sweeps the onsite pairing itself.
fn lattice(cfg: &JobConfig, drive: bool) -> Result<LatticeModel, CliError> {
    let m = &cfg.model;
    let model = match m.name {
        ModelName::Toy2 | ModelName::Toy4 => {
            return Err(invalid("model.name", format!("task {} needs a lattice model", cfg.task.name())))
        }
        ModelName::Ssh => {
            let dims = dims_or(m, &[20], 1)?;
            let bc = bc_or(m, 1)?;
            models::ssh_chain(m.t_intra.unwrap_or(0.5), m.t_inter.unwrap_or(1.0), dims[0], bc[0])?
        }
        ModelName::Kagome => {
            let dims = dims_or(m, &[6, 6], 2)?;
            let bc = bc_or(m, 2)?;
            // ν is the kagomé pairing itself, not an extra drive
            return with_disorder(cfg, models::kagome_driven(m.nu, m.mu, [dims[0], dims[1]], [bc[0], bc[1]])?);
        }
        ModelName::Hofstadter => {
            let q = m.q.unwrap_or(4);
            let dims = dims_or(m, &[q, 6], 2)?;
            let bc = bc_or(m, 2)?;
            models::hofstadter(m.p.unwrap_or(1), q, [dims[0], dims[1]], [bc[0], bc[1]])?
        }
        ModelName::ChernInsulator => {
            let dims = dims_or(m, &[6, 6], 2)?;
            let bc = bc_or(m, 2)?;
            models::chern_insulator(m.mass.unwrap_or(-1.0), [dims[0], dims[1]], [bc[0], bc[1]])?
        }
        ModelName::Atomic => {
            let dims = dims_or(m, &[1], m.dims.as_ref().map_or(1, Vec::len))?;
            let bc = bc_or(m, dims.len())?;
            let energies = m.energies.clone().unwrap_or_else(|| vec![1.0]);
            models::atomic_limit(&energies, dims, bc)?
        }
    };
    let model = if drive && m.nu != 0.0 { model.with_onsite_pairing(I * m.nu) } else { model };
    with_disorder(cfg, model)
}

fn with_disorder(cfg: &JobConfig, model: LatticeModel) -> Result<LatticeModel, CliError> {
    match &cfg.model.disorder {
        Some(d) => Ok(models::apply_disorder(
            &model,
            DisorderConfig {
                amplitude: d.amplitude,
                kind: d.kind,
                seed: d.seed.unwrap_or(cfg.seed),
            },
        )?),
        None => Ok(model),
    }
}

/// Finite operator for the matrix-level tasks: the toy matrices or the
/// real-space sample of a lattice model.
fn operator(cfg: &JobConfig) -> Result<BdGOperator, CliError> {
    let m = &cfg.model;
    match m.name {
        ModelName::Toy2 => Ok(toy2(m.mu, m.nu)),
        ModelName::Toy4 => Ok(toy4(m.lambda.unwrap_or(1.0), m.nu)),
        _ => Ok(lattice(cfg, true)?.bdg(m.mu)?),
    }
}

fn perturbation(cfg: &JobConfig) -> Option<BoundaryPerturbation> {
    cfg.params.perturbation.map(|p| BoundaryPerturbation {
        norm: p.norm,
        depth: p.depth,
        seed: p.seed.unwrap_or(cfg.seed),
    })
}

fn summary_of(v: &impl serde::Serialize) -> Value {
    serde_json::to_value(v).expect("library results serialize")
}

pub fn run_task(cfg: &JobConfig) -> Result<TaskResult, CliError> {
    let p = &cfg.params;
    let mu = cfg.model.mu;
    match cfg.task {
        Task::Spectrum => {
            let data = spectral::spectrum(&operator(cfg)?, p.tol)?;
            let mut t = Table::new("spectrum", &["index", "re", "im", "krein"]);
            for (i, (z, s)) in data.eigenvalues.iter().zip(&data.signatures).enumerate() {
                t.push(vec![json!(i), json!(z.re), json!(z.im), json!(s.label())]);
            }
            let summary = json!({
                "max_growth_rate": data.max_growth_rate,
                "condition_number": data.condition_number,
                "ill_conditioned": data.ill_conditioned,
                "snapped": data.snapped,
                "tol": data.tol,
            });
            Ok(TaskResult { tables: vec![t], summary })
        }
        Task::Stability => {
            let v = spectral::classify_stability(&operator(cfg)?, p.tol)?;
            Ok(TaskResult { tables: vec![], summary: summary_of(&v) })
        }
        Task::Chern => {
            let model = lattice(cfg, true)?;
            let spectra = topology::bloch_spectra(&model, mu, (p.k_grid, p.k_grid), p.gap)?;
            let mut t = Table::new("chern", &["band", "lo", "hi", "value", "rounded", "deviation", "rank"]);
            let mut bands = Vec::new();
            let mut rounded = Vec::new();
            for b in spectra.bands.iter().filter(|b| b.index > 0) {
                let c = spectra.chern(b.index)?;
                t.push(vec![json!(b.index), json!(b.lo), json!(b.hi), json!(c.value), json!(c.rounded), json!(c.deviation), json!(c.rank)]);
                bands.push(b.index);
                rounded.push(c.rounded);
            }
            let summary = json!({ "k_grid": p.k_grid, "bands": bands, "chern": rounded });
            Ok(TaskResult { tables: vec![t], summary })
        }
        Task::Winding => {
            let model = lattice(cfg, true)?;
            let bdg = topology::winding_number(&model, mu, p.n_k)?;
            let one = topology::one_particle_winding(&model, p.n_k)?;
            Ok(TaskResult {
                tables: vec![],
                summary: json!({ "bdg": summary_of(&bdg), "one_particle": summary_of(&one) }),
            })
        }
        Task::Edge => {
            let fam = halfspace::restrict(&lattice(cfg, true)?, p.width, mu, perturbation(cfg))?;
            let report = halfspace::edge_spectrum(&fam, p.n_k)?;
            let mut t = Table::new("edge", &["k1", "re", "im", "edge_localization"]);
            for (s, &k) in report.k.iter().enumerate() {
                for (z, &w) in report.eigenvalues[s].iter().zip(&report.edge_localization[s]) {
                    t.push(vec![json!(k), json!(z.re), json!(z.im), json!(w)]);
                }
            }
            let summary = json!({
                "width": p.width,
                "boundary_depth": fam.boundary_depth(),
                "max_growth_rate": report.max_growth_rate,
            });
            Ok(TaskResult { tables: vec![t], summary })
        }
        Task::BoundaryCurrent => {
            let model = lattice(cfg, true)?;
            let fam = halfspace::restrict(&model, p.width, mu, perturbation(cfg))?;
            let spectra = topology::bloch_spectra(&model, mu, (p.k_grid, p.k_grid), p.gap)?;
            let positive: Vec<i32> = spectra.indices().into_iter().filter(|&i| i > 0).collect();
            let gaps: Vec<usize> = match p.gap_index {
                Some(j) => vec![j],
                None => (1..positive.len()).collect(),
            };
            let mut t = Table::new("boundary_current", &["gap_index", "gap_lo", "gap_hi", "value", "direct_value", "max_imag", "expected"]);
            let mut cherns = Vec::new();
            for &i in &positive {
                cherns.push(spectra.chern(i)?.rounded);
            }
            let mut values = Vec::new();
            for j in gaps {
                let bc = halfspace::boundary_current(&fam, j, None, p.n_k)?;
                let expected = -cherns.iter().take(j).sum::<i64>();
                t.push(vec![
                    json!(j),
                    json!(bc.gap.0),
                    json!(bc.gap.1),
                    json!(bc.value),
                    json!(bc.direct_value),
                    json!(bc.max_imag),
                    json!(expected),
                ]);
                values.push(bc.value);
            }
            let summary = json!({ "width": p.width, "n_k": p.n_k, "chern": cherns, "values": values });
            Ok(TaskResult { tables: vec![t], summary })
        }
        Task::Scan => {
            let (mu_grid, nu_grid) = match (p.mu_grid, p.nu_grid) {
                (Some(a), Some(b)) => (a.points(), b.points()),
                _ => return Err(invalid("params.mu_grid", "scan needs params.mu_grid and params.nu_grid")),
            };
            let report = halfspace::instability_scan(&lattice(cfg, false)?, p.cells, &mu_grid, &nu_grid, p.bulk_k)?;
            let map = report.instability_map.expect("scan fills the map");
            let mut t = Table::new("instability_map", &["mu", "nu", "bulk_growth", "edge_growth", "edge_unstable", "bulk_stable"]);
            for (i, &m) in map.mu.iter().enumerate() {
                for (j, &n) in map.nu.iter().enumerate() {
                    let idx = i * map.nu.len() + j;
                    t.push(vec![
                        json!(m),
                        json!(n),
                        json!(map.bulk_growth[idx]),
                        json!(map.edge_growth[idx]),
                        json!(u8::from(map.edge_unstable(i, j))),
                        json!(u8::from(map.bulk_stable(i, j))),
                    ]);
                }
            }
            // analytic curves |ν| = |μ| and |ν| = g − |μ|, meaningful for real h
            let g = map.spectral_gap;
            let mut overlay = Table::new("overlay", &["mu", "nu_edge", "nu_bulk"]);
            for &m in &map.mu {
                overlay.push(vec![json!(m), json!(m.abs()), json!(g - m.abs())]);
            }
            let summary = json!({
                "spectral_gap": g,
                "real_model": map.real_model,
                "growth_tol": map.growth_tol,
                "chain_cells": map.chain_cells,
                "edge_region_discrepancy": map.edge_region_discrepancy(),
                "bulk_region_discrepancy": map.bulk_region_discrepancy(),
            });
            Ok(TaskResult { tables: vec![t, overlay], summary })
        }
        Task::Bogoliubov => {
            let tr = bogoliubov::diagonalize(&operator(cfg)?)?;
            let mut t = Table::new("bogoliubov", &["index", "energy"]);
            for (i, e) in tr.energies().iter().enumerate() {
                t.push(vec![json!(i), json!(e)]);
            }
            Ok(TaskResult { tables: vec![t], summary: json!({ "residuals": summary_of(&tr.residuals) }) })
        }
        Task::Dynamics => {
            let h = operator(cfg)?;
            let pts = dynamics::trajectory(&h, &p.times.points())?;
            let mut t = Table::new("dynamics", &["t", "norm", "j_unitarity_defect", "reality_defect"]);
            for q in &pts {
                t.push(vec![json!(q.t), json!(q.norm), json!(q.j_unitarity_defect), json!(q.reality_defect)]);
            }
            let growth = spectral::spectrum(&h, p.tol)?.max_growth_rate;
            Ok(TaskResult { tables: vec![t], summary: json!({ "max_growth_rate": growth }) })
        }
    }
}
