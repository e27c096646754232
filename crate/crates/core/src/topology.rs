//! Chern numbers of band idempotents and winding numbers of chiral models.
//!
//! Bloch-side derivatives follow the convention `∇_j ↔ ∂_{k_j}`, so
//! `Ch(Q) = 2πi 𝒯(Q[∇₁Q, ∇₂Q])` becomes `(i/2π) ∫ tr(P [∂₁P, ∂₂P]) d²k`.
//! On a lattice of link variables `U_j(k) = det⟨u(k)|u(k + δ_j)⟩` that
//! integral is `-(1/2π) Σ_k arg F(k)` with the plaquette
//! `F = U₁(k) U₂(k+δ₁) / (U₁(k+δ₂) U₂(k))`.

use std::f64::consts::PI;

use log::warn;
use ndarray::Axis;
use rayon::prelude::*;
use serde::Serialize;

use crate::bdg::{BdGOperator, ChiralGrading};
use crate::bogoliubov::{chiral_block, hermitian_route_projection};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat};
use crate::models::{to_bloch, BlochFamily, LatticeModel};
use crate::spectral::{self, ordinal_band_intervals, orthonormal_range, riesz_from, BandInterval, SpectralData, DEFAULT_GAP_THRESHOLD};

/// Default integrality tolerance of a clean Chern number.
pub const QUANTIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ChernResult {
    pub value: f64,
    pub rounded: i64,
    pub k_grid: (usize, usize),
    pub deviation: f64,
    /// Rank of the band idempotent.
    pub rank: usize,
    /// Berry curvature `B(k)` per plaquette, `Ch = (1/2π) Σ B Δk₁ Δk₂`,
    /// axis 1 fastest. Empty for real-space evaluations.
    #[serde(skip)]
    pub curvature: Vec<f64>,
}

impl ChernResult {
    fn new(value: f64, k_grid: (usize, usize), rank: usize, curvature: Vec<f64>) -> Self {
        let rounded = value.round() as i64;
        Self {
            value,
            rounded,
            k_grid,
            deviation: (value - rounded as f64).abs(),
            rank,
            curvature,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WindingResult {
    /// Grid evaluation of `(i/2π) ∫ tr(B⁻¹ ∂_k B) dk` with analytic `∂_k B`.
    pub value: f64,
    pub rounded: i64,
    pub deviation: f64,
    /// Same invariant from branch-tracked phase winding of `det B(k)`.
    pub phase_value: f64,
    pub n_k: usize,
}

/// BdG fibers evaluated on a uniform 2D grid, with band intervals fixed
/// globally from the union of all fiber spectra.
pub struct BlochSpectra {
    pub grid: (usize, usize),
    pub mu: f64,
    pub data: Vec<SpectralData>,
    pub norm: f64,
    pub bands: Vec<BandInterval>,
}

fn grid_point(grid: (usize, usize), idx: usize) -> [f64; 2] {
    let (n1, n2) = grid;
    let i1 = idx % n1;
    let i2 = idx / n1;
    [2.0 * PI * i1 as f64 / n1 as f64, 2.0 * PI * i2 as f64 / n2 as f64]
}

fn require_2d(model: &LatticeModel) -> Result<BlochFamily> {
    if model.spatial_dim() != 2 {
        return Err(Error::Dimension(format!("Chern numbers need a 2D model, got {}D", model.spatial_dim())));
    }
    to_bloch(model)
}

/// Diagonalize every fiber of the grid and cluster the union of their real
/// spectra into bands by eigenvalue ordinal. `gap` defaults to `1e-5 max_k ‖H(k)‖`.
pub fn bloch_spectra(model: &LatticeModel, mu: f64, grid: (usize, usize), gap: Option<f64>) -> Result<BlochSpectra> {
    let fam = require_2d(model)?;
    if grid.0 < 2 || grid.1 < 2 {
        return Err(Error::Validation(format!("k-grid {grid:?} is too coarse")));
    }
    let npts = grid.0 * grid.1;
    let data: Vec<SpectralData> = (0..npts)
        .into_par_iter()
        .map(|idx| spectral::spectrum(&fam.bdg(&grid_point(grid, idx), mu), None))
        .collect::<Result<Vec<_>>>()?;
    let norm = data.iter().map(|d| d.eigenvalues.iter().fold(0.0f64, |a, z| a.max(z.norm()))).fold(0.0, f64::max);
    for (idx, d) in data.iter().enumerate() {
        if !d.is_real() {
            return Err(Error::Stability(format!(
                "fiber at k = {:?} has growth rate {:.3e}; bands need a real spectrum",
                grid_point(grid, idx),
                d.max_growth_rate
            )));
        }
    }
    let gap = gap.unwrap_or(DEFAULT_GAP_THRESHOLD * norm.max(1.0));
    let sorted: Vec<Vec<f64>> = data.iter().map(|d| d.eigenvalues.iter().map(|z| z.re).collect()).collect();
    let bands = ordinal_band_intervals(&sorted, gap, norm.max(1.0))?;
    Ok(BlochSpectra { grid, mu, data, norm, bands })
}

impl BlochSpectra {
    pub fn band(&self, index: i32) -> Result<&BandInterval> {
        self.bands
            .iter()
            .find(|b| b.index == index)
            .ok_or_else(|| Error::Validation(format!("no band with index {index}; available {:?}", self.indices())))
    }

    pub fn indices(&self) -> Vec<i32> {
        self.bands.iter().map(|b| b.index).collect()
    }

    /// Orthonormal bases of the range projections of `Q_j(k)` over the grid.
    fn range_bases(&self, index: i32) -> Result<Vec<CMat>> {
        let interval = self.band(index)?.interval;
        let norm = self.norm.max(1.0);
        (0..self.data.len())
            .into_par_iter()
            .map(|idx| {
                let q = riesz_from(&self.data[idx], interval, norm).map_err(|e| at_k(e, grid_point(self.grid, idx)))?;
                orthonormal_range(&q.range_projection)
            })
            .collect()
    }

    /// Right and left eigenvector blocks `(R, L)` with `Q = R L*`.
    fn biorthogonal_bases(&self, index: i32) -> Result<Vec<(CMat, CMat)>> {
        let b = *self.band(index)?;
        Ok(self
            .data
            .iter()
            .map(|d| {
                let cols: Vec<usize> = (0..d.eigenvalues.len())
                    .filter(|&i| d.eigenvalues[i].re > b.interval.0 && d.eigenvalues[i].re < b.interval.1)
                    .collect();
                let r = d.right_vectors.select(Axis(1), &cols);
                let l = linalg::dagger(&d.inverse.select(Axis(0), &cols));
                (r, l)
            })
            .collect())
    }

    pub fn chern(&self, index: i32) -> Result<ChernResult> {
        let bases = self.range_bases(index)?;
        let rank = bases[0].ncols();
        if bases.iter().any(|b| b.ncols() != rank) {
            return Err(Error::GapViolation {
                eigenvalue: c64::new(f64::NAN, 0.0),
                margin: 0.0,
                context: format!("rank of band {index} varies over the k-grid"),
            });
        }
        let pairs: Vec<(CMat, CMat)> = bases.iter().map(|b| (b.clone(), b.clone())).collect();
        Ok(link_chern(&pairs, self.grid, rank))
    }

    /// Curvature from the non-orthogonal idempotent directly, with links
    /// `det(L(k)* R(k+δ))`. Agrees with `chern` for gapped bands; kept as a
    /// cross-check of the deformation to orthogonal projections.
    pub fn chern_biorthogonal(&self, index: i32) -> Result<ChernResult> {
        let pairs = self.biorthogonal_bases(index)?;
        let rank = pairs[0].0.ncols();
        let swapped: Vec<(CMat, CMat)> = pairs.into_iter().map(|(r, l)| (l, r)).collect();
        Ok(link_chern(&swapped, self.grid, rank))
    }
}

fn at_k(e: Error, k: [f64; 2]) -> Error {
    match e {
        Error::GapViolation { eigenvalue, margin, context } => Error::GapViolation {
            eigenvalue,
            margin,
            context: format!("{context} at k = ({:.6}, {:.6})", k[0], k[1]),
        },
        other => other,
    }
}

/// Link-variable Chern number. `bases[k] = (left, right)`; the link from `k`
/// to `k'` is `det(left(k)* right(k'))`.
fn link_chern(bases: &[(CMat, CMat)], grid: (usize, usize), rank: usize) -> ChernResult {
    let (n1, n2) = grid;
    let idx = |i1: usize, i2: usize| (i1 % n1) + n1 * (i2 % n2);
    let link = |a: usize, b: usize| -> c64 {
        let m = linalg::dagger(&bases[a].0).dot(&bases[b].1);
        let d = det(&m);
        if d.norm() == 0.0 {
            c64::new(1.0, 0.0)
        } else {
            d / d.norm()
        }
    };
    let phases: Vec<f64> = (0..n1 * n2)
        .into_par_iter()
        .map(|p| {
            let (i1, i2) = (p % n1, p / n1);
            let u1 = link(idx(i1, i2), idx(i1 + 1, i2));
            let u2 = link(idx(i1 + 1, i2), idx(i1 + 1, i2 + 1));
            let u3 = link(idx(i1, i2 + 1), idx(i1 + 1, i2 + 1));
            let u4 = link(idx(i1, i2), idx(i1, i2 + 1));
            (u1 * u2 / (u3 * u4)).arg()
        })
        .collect();
    let dk = (2.0 * PI / n1 as f64) * (2.0 * PI / n2 as f64);
    let value = -phases.iter().sum::<f64>() / (2.0 * PI);
    let curvature = phases.iter().map(|f| -f / dk).collect();
    ChernResult::new(value, grid, rank, curvature)
}

/// Determinant by LU with partial pivoting.
pub fn det(m: &CMat) -> c64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut d = c64::new(1.0, 0.0);
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[[i, c]].norm().total_cmp(&a[[j, c]].norm())).unwrap();
        if a[[p, c]].norm() == 0.0 {
            return c64::new(0.0, 0.0);
        }
        if p != c {
            for j in 0..n {
                a.swap([p, j], [c, j]);
            }
            d = -d;
        }
        let pivot = a[[c, c]];
        d *= pivot;
        for i in c + 1..n {
            let f = a[[i, c]] / pivot;
            if f.norm() != 0.0 {
                for j in c..n {
                    let v = a[[c, j]];
                    a[[i, j]] -= f * v;
                }
            }
        }
    }
    d
}

/// Chern number of band `band_index` of the BdG Bloch family on a uniform
/// `grid.0 x grid.1` mesh.
pub fn chern_band(model: &LatticeModel, mu: f64, band_index: i32, grid: (usize, usize)) -> Result<ChernResult> {
    bloch_spectra(model, mu, grid, None)?.chern(band_index)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjugatePair {
    pub positive: ChernResult,
    pub negative: ChernResult,
    pub sum: f64,
    /// `|Ch(Q_j) + Ch(Q_{-j})| ≤ 2 max(deviation)` up to 1e-9.
    pub holds: bool,
}

/// `(Ch(Q_j), Ch(Q_{-j}))`, which must cancel.
pub fn chern_conjugate_check(model: &LatticeModel, mu: f64, j: i32, grid: (usize, usize)) -> Result<ConjugatePair> {
    let spectra = bloch_spectra(model, mu, grid, None)?;
    let positive = spectra.chern(j.abs())?;
    let negative = spectra.chern(-j.abs())?;
    let sum = positive.value + negative.value;
    let holds = sum.abs() <= 2.0 * positive.deviation.max(negative.deviation) + 1e-9;
    if !holds {
        warn!("conjugate bands do not cancel: {} + {} = {sum:.3e}", positive.value, negative.value);
    }
    Ok(ConjugatePair { positive, negative, sum, holds })
}

fn require_1d_chiral(model: &LatticeModel) -> Result<(BlochFamily, ChiralGrading)> {
    if model.spatial_dim() != 1 {
        return Err(Error::Dimension(format!("winding numbers need a 1D model, got {}D", model.spatial_dim())));
    }
    let signs = model
        .chiral
        .clone()
        .ok_or_else(|| Error::Validation(format!("model {} has no chiral grading", model.name)))?;
    Ok((to_bloch(model)?, ChiralGrading::new(signs)?))
}

const MAX_WINDING_POINTS: usize = 1 << 20;

fn winding_of(b_at: impl Fn(f64) -> CMat + Sync, db_at: impl Fn(f64) -> CMat + Sync, n_k: usize) -> Result<WindingResult> {
    if n_k < 4 {
        return Err(Error::Validation(format!("winding grid of {n_k} points is too coarse")));
    }
    let ks = |n: usize| (0..n).map(move |j| 2.0 * PI * j as f64 / n as f64);
    let per_k: Vec<(c64, c64)> = ks(n_k)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| {
            let b = b_at(k);
            let inv = linalg::inverse(&b).map_err(|_| singular_at(k, f64::INFINITY))?;
            let norm = linalg::op_norm(&inv);
            if norm > 1e8 {
                return Err(singular_at(k, norm));
            }
            Ok((linalg::trace(&inv.dot(&db_at(k))), det(&b)))
        })
        .collect::<Result<Vec<_>>>()?;
    let integral: c64 = per_k.iter().map(|p| p.0).sum::<c64>() * (2.0 * PI / n_k as f64);
    let value = (c64::new(0.0, 1.0) * integral / (2.0 * PI)).re;

    // phase tracking, refining until every increment is well below π
    let mut n = n_k;
    let mut dets: Vec<c64> = per_k.iter().map(|p| p.1).collect();
    let phase_value = loop {
        let steps: Vec<f64> = (0..n).map(|j| (dets[(j + 1) % n] / dets[j]).arg()).collect();
        if steps.iter().all(|s| s.abs() < 0.5 * PI) {
            break -steps.iter().sum::<f64>() / (2.0 * PI);
        }
        if n * 2 > MAX_WINDING_POINTS {
            return Err(Error::Domain(format!("det B(k) phase not resolved with {n} points")));
        }
        n *= 2;
        dets = ks(n).collect::<Vec<_>>().into_par_iter().map(|k| det(&b_at(k))).collect();
    };
    let rounded = phase_value.round() as i64;
    if value.round() as i64 != rounded {
        warn!("winding integral {value} and phase count {phase_value} disagree; refine the grid");
    }
    Ok(WindingResult {
        value,
        rounded,
        deviation: (value - rounded as f64).abs(),
        phase_value,
        n_k,
    })
}

fn singular_at(k: f64, norm: f64) -> Error {
    Error::GapViolation {
        eigenvalue: c64::new(0.0, 0.0),
        margin: 1e-8,
        context: format!("chiral block nearly singular at k = {k:.6} (‖B⁻¹‖ = {norm:.3e})"),
    }
}

/// `Wind(B) = (i/2π) ∫ tr(B(k)⁻¹ ∂_k B(k)) dk` for the chiral block `B` of
/// the BdG fiber. With `S ↦ e^{-ik}` this is minus the winding of `det B`.
///
/// The BdG block contains the hole sector as well, so at vanishing pairing
/// the result is twice the one-particle winding.
pub fn winding_number(model: &LatticeModel, mu: f64, n_k: usize) -> Result<WindingResult> {
    let (fam, grading) = require_1d_chiral(model)?;
    winding_of(
        |k| chiral_block(fam.bdg(&[k], mu).matrix(), &grading),
        |k| chiral_block(&fam.dbdg(&[k], 0), &grading),
        n_k,
    )
}

/// Winding of the off-diagonal block of `h(k)` itself.
pub fn one_particle_winding(model: &LatticeModel, n_k: usize) -> Result<WindingResult> {
    let (fam, grading) = require_1d_chiral(model)?;
    let plus: Vec<usize> = (0..grading.signs.len()).filter(|&i| grading.signs[i] > 0.0).collect();
    let minus: Vec<usize> = (0..grading.signs.len()).filter(|&i| grading.signs[i] < 0.0).collect();
    let block = |m: CMat| m.select(Axis(0), &plus).select(Axis(1), &minus);
    winding_of(|k| block(fam.h(&[k])), |k| block(fam.dh(&[k], 0)), n_k)
}

/// `(1/N_sites) Tr A` for a sample of `n_sites` cells.
pub fn trace_per_volume(a: &CMat, n_sites: usize) -> c64 {
    linalg::trace(a) / n_sites as f64
}

/// Cell coordinates of every row of a particle-hole matrix on `model`'s box.
fn positions(model: &LatticeModel, dim: usize) -> Vec<[f64; 2]> {
    let coords = model.cell_coords();
    let l = model.orbitals;
    let n = model.dim();
    (0..dim)
        .map(|i| {
            let c = &coords[(i % n) / l];
            [c[0] as f64, c.get(1).copied().unwrap_or(0) as f64]
        })
        .collect()
}

/// `i[A, X_axis]` with the plain coordinate, or with the minimal-image
/// displacement on a torus of the given extent.
pub fn derivation(a: &CMat, model: &LatticeModel, axis: usize, torus: bool) -> CMat {
    let pos = positions(model, a.nrows());
    let extent = model.dims[axis] as f64;
    ndarray::Array2::from_shape_fn(a.dim(), |(i, j)| {
        let mut d = pos[j][axis] - pos[i][axis];
        if torus {
            d -= extent * (d / extent).round();
        }
        a[[i, j]] * c64::new(0.0, d)
    })
}

/// `2πi (1/|W|) Tr_W(Q [i[Q,X₁], i[Q,X₂]])` over a centered window `W`
/// covering `window` (fraction, default 0.5) of each axis.
pub fn chern_realspace(q: &CMat, model: &LatticeModel, window: Option<f64>) -> Result<ChernResult> {
    if model.spatial_dim() != 2 {
        return Err(Error::Dimension("real-space Chern numbers need a 2D sample".into()));
    }
    if q.nrows() % model.dim() != 0 {
        return Err(Error::Dimension(format!(
            "projection of size {} does not live on the {}-site sample",
            q.nrows(),
            model.dim()
        )));
    }
    let frac = window.unwrap_or(0.5);
    let lo_hi = |e: usize| {
        let w = ((e as f64) * frac).round() as usize;
        let lo = (e - w.min(e)) / 2;
        (lo, lo + w)
    };
    let (a0, a1) = lo_hi(model.dims[0]);
    let (b0, b1) = lo_hi(model.dims[1]);
    let pos = positions(model, q.nrows());
    let rows: Vec<usize> = (0..q.nrows())
        .filter(|&i| {
            let p = pos[i];
            (a0 as f64..a1 as f64).contains(&p[0]) && (b0 as f64..b1 as f64).contains(&p[1])
        })
        .collect();
    let cells = (a1 - a0) * (b1 - b0);
    if cells == 0 || rows.is_empty() {
        return Err(Error::Validation("trace window is empty".into()));
    }
    let d1 = derivation(q, model, 0, false);
    let d2 = derivation(q, model, 1, false);
    let q_rows = q.select(Axis(0), &rows);
    let comm_diag: c64 = q_rows
        .dot(&d1)
        .axis_iter(Axis(0))
        .zip(rows.iter())
        .map(|(row, &r)| row.dot(&d2.column(r)))
        .sum::<c64>()
        - q_rows
            .dot(&d2)
            .axis_iter(Axis(0))
            .zip(rows.iter())
            .map(|(row, &r)| row.dot(&d1.column(r)))
            .sum::<c64>();
    let value = (c64::new(0.0, 2.0 * PI) * comm_diag / cells as f64).re;
    let rank = (linalg::trace(q).re).round() as usize;
    Ok(ChernResult::new(value, (model.dims[0], model.dims[1]), rank, Vec::new()))
}

/// Idempotent of the real spectral interval on a finite sample. Uses the
/// Hermitian route when `A > 0`, the eigendecomposition otherwise.
pub fn sample_projection(op: &BdGOperator, interval: (f64, f64)) -> Result<CMat> {
    match hermitian_route_projection(op, interval) {
        Err(Error::Stability(_)) => Ok(spectral::riesz_projection(op, interval)?.q),
        other => other,
    }
}
