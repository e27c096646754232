//! Half-space restrictions of lattice models.
//!
//! A 2D model is cut to a strip of `W` rows along axis 2, kept periodic
//! along axis 1 and Fourier reduced there, giving a family `k₁ ↦ Ĥ(k₁)`.
//! A 1D model is cut to a single open chain. Wave functions are simply
//! restricted: every hopping or pairing that leaves the strip is dropped.
//!
//! The strip has two edges carrying opposite currents, so boundary traces
//! are weighted by `w(n₂) = 1` for `n₂ < W/2` and `0` otherwise, which
//! selects the edge at `n₂ = 0`. An optional boundary operator `Ã ≥ 0`
//! supported in the first rows enters as `Ĥ = J(Â + Ã)`.

use std::f64::consts::PI;

use log::{debug, warn};
use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bdg::{BdGOperator, Boundary, ChiralGrading};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, cr, CMat, I};
use crate::models::{k_grid, term_matrix, to_bloch, AxisMode, LatticeModel};
use crate::spectral::{self, hermitize, ordinal_band_intervals};
use crate::topology::bloch_spectra;

/// Random boundary operator `Ã ≥ 0` with `‖Ã‖ = norm`, supported in the
/// rows `n₂ < depth` and constant along the edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryPerturbation {
    pub norm: f64,
    pub depth: usize,
    pub seed: u64,
}

/// `Ã = R* R` with `R = [[r₁, r₂], [conj r₂, conj r₁]]`, so that `JÃ` keeps
/// both the Krein and the particle-hole structure.
fn random_boundary_operator(p: &BoundaryPerturbation, orbitals: usize, width: usize) -> Result<CMat> {
    if p.norm < 0.0 || !p.norm.is_finite() {
        return Err(Error::Validation(format!("boundary perturbation norm {} must be >= 0", p.norm)));
    }
    if p.depth == 0 || p.depth > width {
        return Err(Error::Validation(format!(
            "boundary depth {} must lie in 1..={width}",
            p.depth
        )));
    }
    let n = orbitals * width;
    let m = orbitals * p.depth;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut sample = || Array2::from_shape_fn((m, m), |_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let r1 = sample();
    let r2 = sample();
    let r = linalg::block2(r1.view(), r2.view(), linalg::conj(&r2).view(), linalg::conj(&r1).view());
    let small = linalg::hermitian_part(&linalg::dagger(&r).dot(&r));
    let scale = linalg::op_norm(&small);
    let small = if scale > 0.0 { small.mapv(|z| z * (p.norm / scale)) } else { small };
    let mut out = Array2::zeros((2 * n, 2 * n));
    let idx = |i: usize| if i < m { i } else { n + i - m };
    for i in 0..2 * m {
        for j in 0..2 * m {
            out[[idx(i), idx(j)]] = small[[i, j]];
        }
    }
    Ok(out)
}

/// Strip (2D model) or open chain (1D model) at chemical potential `mu`.
#[derive(Debug, Clone)]
pub struct CylinderFamily {
    model: LatticeModel,
    mu: f64,
    width: usize,
    axes: Vec<AxisMode>,
    a_tilde: Option<CMat>,
    boundary_depth: usize,
    /// Per particle-hole index, `1` on the rows `n₂ < W/2`.
    pub edge_weight: Vec<f64>,
}

/// Cut `model` to `width` rows along its last axis.
///
/// 2D models must be clean (the edge direction is Fourier reduced). A 1D
/// model may carry disorder as long as `width` equals its length.
pub fn restrict(
    model: &LatticeModel,
    width: usize,
    mu: f64,
    perturbation: Option<BoundaryPerturbation>,
) -> Result<CylinderFamily> {
    let d = model.spatial_dim();
    if d != 1 && d != 2 {
        return Err(Error::Dimension(format!("half-space restriction needs a 1D or 2D model, got {d}D")));
    }
    let cut = d - 1;
    let reach = model.range(cut);
    if width == 0 || width < reach {
        return Err(Error::Dimension(format!(
            "width {width} is smaller than the model range {reach} across the cut"
        )));
    }
    if d == 2 {
        to_bloch(model)?;
    } else if model.onsite.is_some() && width != model.dims[0] {
        return Err(Error::Unsupported(format!(
            "disordered chain has {} cells, cannot restrict to {width}",
            model.dims[0]
        )));
    }
    let mut axes = vec![AxisMode::Bloch; d];
    axes[cut] = AxisMode::Real {
        extent: width,
        bc: Boundary::Open,
    };
    let l = model.orbitals;
    let n = l * width;
    let half = width as f64 / 2.0;
    let edge_weight = (0..2 * n).map(|i| if (((i % n) / l) as f64) < half { 1.0 } else { 0.0 }).collect();
    let default_depth = (width / 10).max(1);
    let (a_tilde, boundary_depth) = match perturbation {
        Some(p) => (Some(random_boundary_operator(&p, l, width)?), p.depth),
        None => (None, default_depth),
    };
    Ok(CylinderFamily {
        model: model.clone(),
        mu,
        width,
        axes,
        a_tilde,
        boundary_depth,
        edge_weight,
    })
}

impl CylinderFamily {
    pub fn model(&self) -> &LatticeModel {
        &self.model
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Rows counted as boundary by `edge_spectrum`.
    pub fn boundary_depth(&self) -> usize {
        self.boundary_depth
    }

    /// `true` for a single open chain (no edge momentum).
    pub fn is_chain(&self) -> bool {
        self.axes.len() == 1
    }

    pub fn half_dim(&self) -> usize {
        self.model.orbitals * self.width
    }

    pub fn boundary_operator(&self) -> Option<&CMat> {
        self.a_tilde.as_ref()
    }

    fn k(&self, k1: f64) -> Vec<f64> {
        vec![k1, 0.0][..self.axes.len()].to_vec()
    }

    fn onsite(&self, conjugate: bool) -> Option<CMat> {
        let blocks = self.model.onsite.as_ref()?;
        let l = self.model.orbitals;
        let mut out = Array2::zeros((self.half_dim(), self.half_dim()));
        for (cell, b) in blocks.iter().enumerate() {
            let b = if conjugate { linalg::conj(b) } else { b.clone() };
            out.slice_mut(s![cell * l..(cell + 1) * l, cell * l..(cell + 1) * l]).assign(&b);
        }
        Some(out)
    }

    /// Restricted one-particle operator `ĥ(k₁)`.
    pub fn one_particle(&self, k1: f64) -> CMat {
        let h = term_matrix(&self.model.hoppings, self.model.orbitals, &self.axes, &self.k(k1), false, None);
        match self.onsite(false) {
            Some(v) => h + v,
            None => h,
        }
    }

    /// Fourier transform of `conj(ĥ)` at `k₁`.
    pub fn one_particle_conj(&self, k1: f64) -> CMat {
        let h = term_matrix(&self.model.hoppings, self.model.orbitals, &self.axes, &self.k(k1), true, None);
        match self.onsite(true) {
            Some(v) => h + v,
            None => h,
        }
    }

    pub fn pairing(&self, k1: f64) -> CMat {
        term_matrix(&self.model.pairings, self.model.orbitals, &self.axes, &self.k(k1), false, None)
    }

    /// `Ĥ(k₁)` with an extra onsite pairing `extra` (zero for the model itself).
    fn assemble(&self, k1: f64, extra: c64) -> BdGOperator {
        let mut delta = self.pairing(k1);
        if extra != cr(0.0) {
            delta.diag_mut().mapv_inplace(|z| z + extra);
        }
        let op = BdGOperator::from_fiber(self.one_particle(k1), delta, self.one_particle_conj(k1), self.mu)
            .expect("blocks share the strip dimension");
        match (&self.a_tilde, &self.model.chiral) {
            (Some(a), _) => BdGOperator::from_matrix(op.matrix() + &linalg::j_left(a)).expect("even dimension"),
            (None, Some(signs)) => op
                .with_chiral(ChiralGrading::tiled(signs, self.width).expect("valid grading"))
                .expect("grading fits"),
            (None, None) => op,
        }
    }

    pub fn hamiltonian(&self, k1: f64) -> BdGOperator {
        self.assemble(k1, cr(0.0))
    }

    /// `∂_{k₁} Ĥ(k₁)`; zero for a chain.
    pub fn derivative(&self, k1: f64) -> CMat {
        let n = self.half_dim();
        if self.is_chain() {
            return Array2::zeros((2 * n, 2 * n));
        }
        let k = self.k(k1);
        let (terms, l) = (&self.model.hoppings, self.model.orbitals);
        let dh = term_matrix(terms, l, &self.axes, &k, false, Some(0));
        let dhole = term_matrix(terms, l, &self.axes, &k, true, Some(0)).mapv(|z| -z);
        let dd = term_matrix(&self.model.pairings, l, &self.axes, &k, false, Some(0));
        let lower = linalg::dagger(&dd).mapv(|z| -z);
        linalg::block2(dh.view(), dd.view(), lower.view(), dhole.view())
    }

    /// Edge momenta used for `n_k` samples (a single point for a chain).
    pub fn k_samples(&self, n_k: usize) -> Vec<f64> {
        if self.is_chain() {
            vec![0.0]
        } else {
            k_grid(n_k)
        }
    }

    fn boundary_mass(&self, v: ndarray::ArrayView1<c64>) -> f64 {
        let n = self.half_dim();
        let rows = self.boundary_depth * self.model.orbitals;
        let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let edge: f64 = v
            .iter()
            .enumerate()
            .filter(|(i, _)| i % n < rows)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }
}

/// Max growth rate and the spectra behind a (μ, ν) instability map.
#[derive(Debug, Clone, Serialize)]
pub struct InstabilityMap {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    /// Indexed `[i_mu * nu.len() + i_nu]`.
    pub edge_growth: Vec<f64>,
    pub bulk_growth: Vec<f64>,
    /// Largest `|Re λ|` among open-chain eigenvalues with `Im λ > tol`.
    pub unstable_real_part: Vec<f64>,
    /// Distance of the periodic bulk spectrum of `h` to 0.
    pub spectral_gap: f64,
    /// Whether `h` is real, i.e. whether the analytic phase boundaries apply.
    pub real_model: bool,
    pub growth_tol: f64,
    pub chain_cells: usize,
}

impl InstabilityMap {
    fn at(&self, v: &[f64], i: usize, j: usize) -> f64 {
        v[i * self.nu.len() + j]
    }

    pub fn edge_unstable(&self, i: usize, j: usize) -> bool {
        self.at(&self.edge_growth, i, j) > self.growth_tol
    }

    pub fn bulk_stable(&self, i: usize, j: usize) -> bool {
        self.at(&self.bulk_growth, i, j) <= self.growth_tol
    }

    /// Analytic prediction `|μ| < |ν|` for the bound states (real `h` only).
    pub fn predicted_edge_unstable(&self, i: usize, j: usize) -> Option<bool> {
        self.real_model.then(|| self.mu[i].abs() < self.nu[j].abs())
    }

    /// Analytic prediction `|ν| < g − |μ|` for the bulk (real `h` only).
    pub fn predicted_bulk_stable(&self, i: usize, j: usize) -> Option<bool> {
        self.real_model.then(|| self.nu[j].abs() < self.spectral_gap - self.mu[i].abs())
    }

    /// Largest distance, in grid cells, from a misclassified point to the
    /// analytic phase boundary. `None` without the analytic overlay.
    pub fn boundary_discrepancy(&self, computed: impl Fn(usize, usize) -> bool, predicted: impl Fn(usize, usize) -> Option<bool>) -> Option<usize> {
        let (nm, nn) = (self.mu.len(), self.nu.len());
        let mut worst = 0usize;
        for i in 0..nm {
            for j in 0..nn {
                let p = predicted(i, j)?;
                if computed(i, j) == p {
                    continue;
                }
                let mut best = usize::MAX;
                for a in 0..nm {
                    for b in 0..nn {
                        if predicted(a, b)? != p {
                            best = best.min(a.abs_diff(i).max(b.abs_diff(j)));
                        }
                    }
                }
                worst = worst.max(best);
            }
        }
        Some(worst)
    }

    /// Discrepancy of the "open chain unstable while bulk stable" region
    /// against `|μ| < |ν| < g − |μ|`.
    pub fn edge_region_discrepancy(&self) -> Option<usize> {
        self.boundary_discrepancy(
            |i, j| self.edge_unstable(i, j) && self.bulk_stable(i, j),
            |i, j| Some(self.predicted_edge_unstable(i, j)? && self.predicted_bulk_stable(i, j)?),
        )
    }

    pub fn bulk_region_discrepancy(&self) -> Option<usize> {
        self.boundary_discrepancy(|i, j| self.bulk_stable(i, j), |i, j| self.predicted_bulk_stable(i, j))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeReport {
    pub k: Vec<f64>,
    /// Eigenvalues of `Ĥ(k₁)` per sample, sorted by `(Re, Im)`.
    pub eigenvalues: Vec<Vec<c64>>,
    /// Weight of each (right) eigenvector on the boundary rows.
    pub edge_localization: Vec<Vec<f64>>,
    pub max_growth_rate: f64,
    pub boundary_current: Option<f64>,
    pub instability_map: Option<InstabilityMap>,
}

impl EdgeReport {
    /// `(k₁, λ, localization)` of all states with `Re λ` strictly inside `gap`.
    pub fn states_in(&self, gap: (f64, f64)) -> Vec<(f64, c64, f64)> {
        let mut out = Vec::new();
        for (s, &k) in self.k.iter().enumerate() {
            for (z, &w) in self.eigenvalues[s].iter().zip(self.edge_localization[s].iter()) {
                if z.re > gap.0 && z.re < gap.1 {
                    out.push((k, *z, w));
                }
            }
        }
        out
    }
}

/// Eigenvalues and boundary weights of `Ĥ(k₁)` on `n_k` edge momenta.
pub fn edge_spectrum(fam: &CylinderFamily, n_k: usize) -> Result<EdgeReport> {
    if n_k == 0 {
        return Err(Error::Validation("edge spectrum needs n_k >= 1".into()));
    }
    let k = fam.k_samples(n_k);
    let per_k: Vec<(Vec<c64>, Vec<f64>, f64)> = k
        .par_iter()
        .map(|&k1| {
            let data = spectral::spectrum(&fam.hamiltonian(k1), None)?;
            let loc = data.right_vectors.columns().into_iter().map(|v| fam.boundary_mass(v)).collect();
            Ok((data.eigenvalues, loc, data.max_growth_rate))
        })
        .collect::<Result<_>>()?;
    let max_growth_rate = per_k.iter().map(|p| p.2).fold(0.0, f64::max);
    let (eigenvalues, edge_localization) = per_k.into_iter().map(|(e, l, _)| (e, l)).unzip();
    Ok(EdgeReport {
        k,
        eigenvalues,
        edge_localization,
        max_growth_rate,
        boundary_current: None,
        instability_map: None,
    })
}

/// The bump `c (x − a)² (b − x)²` on `(a, b)`, zero outside, with `c` fixed
/// by quadrature so that its integral is one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Bump {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Validation(format!("bump support ({a}, {b}) is empty")));
        }
        let raw = |x: f64| (x - a).powi(2) * (b - x).powi(2);
        // composite Simpson
        let n = 2000;
        let h = (b - a) / n as f64;
        let mut sum = raw(a) + raw(b);
        for i in 1..n {
            sum += raw(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let integral = sum * h / 3.0;
        Ok(Self { a, b, c: 1.0 / integral })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b {
            0.0
        } else {
            self.c * (x - self.a).powi(2) * (self.b - x).powi(2)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryCurrent {
    /// `(2π / n_k) Σ Re Tr[w g(Ĥ) ∂Ĥ]` via the Hermitian route.
    pub value: f64,
    /// Same sum evaluated through the eigendecomposition of `Ĥ`.
    pub direct_value: f64,
    /// Largest imaginary part of a per-`k₁` trace.
    pub max_imag: f64,
    pub gap_index: usize,
    /// Bulk gap between `I_j` and `I_{j+1}` on the sampled grid.
    pub gap: (f64, f64),
    pub bump: Bump,
    pub n_k: usize,
}

/// Bulk k-grid used to locate the gaps for `boundary_current`.
pub const DEFAULT_BULK_GRID: usize = 48;

/// Boundary current of the gap between the positive bands `I_j` and `I_{j+1}`.
///
/// The bump defaults to the bulk gap shrunk by 10% on both sides. The
/// integer it approximates is `∫ dk₁ Tr[w g(Ĥ) ∂Ĥ]` over the edge Brillouin
/// zone, i.e. the spectral flow through the gap on the `w`-selected edge.
pub fn boundary_current(fam: &CylinderFamily, j: usize, bump: Option<Bump>, n_k: usize) -> Result<BoundaryCurrent> {
    if fam.is_chain() {
        return Err(Error::Dimension("boundary current needs a 2D model".into()));
    }
    if j == 0 || n_k == 0 {
        return Err(Error::Validation(format!("gap index {j} and n_k {n_k} must be >= 1")));
    }
    let bulk = bloch_spectra(&fam.model, fam.mu, (DEFAULT_BULK_GRID, DEFAULT_BULK_GRID), None)?;
    let lower = bulk.band(j as i32)?;
    let upper = bulk.band(j as i32 + 1)?;
    let gap = (lower.hi, upper.lo);
    let bump = match bump {
        Some(b) => b,
        None => {
            let w = gap.1 - gap.0;
            Bump::new(gap.0 + 0.1 * w, gap.1 - 0.1 * w)?
        }
    };
    for band in &bulk.bands {
        if bump.a < band.hi && bump.b > band.lo {
            return Err(Error::Validation(format!(
                "bump support ({}, {}) meets bulk band {} = [{}, {}]",
                bump.a, bump.b, band.index, band.lo, band.hi
            )));
        }
    }
    let weight: Vec<f64> = fam.edge_weight.clone();
    let traces: Vec<(c64, c64)> = fam
        .k_samples(n_k)
        .par_iter()
        .map(|&k1| {
            let op = fam.hamiltonian(k1);
            let dh = fam.derivative(k1);
            let (g, m) = hermitize(&op)?;
            let (w, v) = linalg::eigh(&g)?;
            let gg = linalg::spectral_synthesis(&v, &w.mapv(|x| cr(bump.eval(x))));
            let gh = linalg::inverse(&m)?.dot(&gg).dot(&m);
            let data = spectral::spectrum(&op, None)?;
            let weights: Vec<c64> = data.eigenvalues.iter().map(|z| cr(bump.eval(z.re))).collect();
            let gh_direct = data.synthesize(&weights);
            Ok((weighted_trace(&gh, &dh, &weight), weighted_trace(&gh_direct, &dh, &weight)))
        })
        .collect::<Result<_>>()?;
    let scale = 2.0 * PI / n_k as f64;
    let sum: c64 = traces.iter().map(|t| t.0).sum();
    let direct: c64 = traces.iter().map(|t| t.1).sum();
    let max_imag = traces.iter().map(|t| t.0.im.abs()).fold(0.0, f64::max);
    debug!("boundary current j={j}: {} (direct {})", sum.re * scale, direct.re * scale);
    Ok(BoundaryCurrent {
        value: sum.re * scale,
        direct_value: direct.re * scale,
        max_imag,
        gap_index: j,
        gap,
        bump,
        n_k,
    })
}

/// `Tr[w X Y]` for a diagonal weight `w`.
fn weighted_trace(x: &CMat, y: &CMat, w: &[f64]) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for (i, &wi) in w.iter().enumerate() {
        if wi != 0.0 {
            acc += x.row(i).dot(&y.column(i)) * wi;
        }
    }
    acc
}

fn is_real_matrix(m: &CMat) -> bool {
    m.iter().all(|z| z.im.abs() <= 1e-12 * z.norm().max(1.0))
}

/// Periodic-bulk spectrum of `h` for the spectral gap and bulk growth rates:
/// Bloch fibers for clean models, the periodic box otherwise.
enum Bulk {
    /// `scale` bounds `‖h(k)‖ + ‖Δ(k)‖` over the fibers.
    Bloch { fibers: Vec<(CMat, CMat, CMat)>, scale: f64 },
    Sample { h: CMat, delta: CMat },
}

impl Bulk {
    fn new(model: &LatticeModel, n_k: usize) -> Result<Self> {
        if model.is_clean() {
            let fam = to_bloch(model)?;
            let fibers: Vec<(CMat, CMat, CMat)> = k_grid(n_k).iter().map(|&k| (fam.h(&[k]), fam.delta(&[k]), fam.h_conj(&[k]))).collect();
            let scale = fibers.iter().map(|f| linalg::op_norm(&f.0) + linalg::op_norm(&f.1)).fold(0.0, f64::max);
            Ok(Bulk::Bloch { fibers, scale })
        } else {
            let mut periodic = model.clone();
            periodic.bc = vec![Boundary::Periodic];
            Ok(Bulk::Sample {
                h: periodic.h_matrix(),
                delta: periodic.delta_matrix(),
            })
        }
    }

    fn spectral_gap(&self) -> Result<f64> {
        let hs: Vec<&CMat> = match self {
            Bulk::Bloch { fibers, .. } => fibers.iter().map(|f| &f.0).collect(),
            Bulk::Sample { h, .. } => vec![h],
        };
        let mut g = f64::INFINITY;
        for h in hs {
            let (w, _) = linalg::eigh(h)?;
            g = g.min(w.iter().fold(f64::INFINITY, |a, x| a.min(x.abs())));
        }
        Ok(g)
    }

    fn growth(&self, mu: f64, extra: c64) -> Result<f64> {
        let with_extra = |d: &CMat| {
            let mut d = d.clone();
            d.diag_mut().mapv_inplace(|z| z + extra);
            d
        };
        match self {
            Bulk::Bloch { fibers, scale } => {
                // one tolerance for all fibers, from a bound on ‖H(k)‖; this
                // saves an SVD per fiber
                let tol = spectral::DEFAULT_REL_TOL * (scale + mu.abs() + extra.norm()).max(f64::MIN_POSITIVE);
                let mut g = 0.0f64;
                for (h, d, hc) in fibers {
                    let op = BdGOperator::from_fiber(h.clone(), with_extra(d), hc.clone(), mu)?;
                    g = g.max(spectral::growth_rate(&op, Some(tol))?);
                }
                Ok(g)
            }
            Bulk::Sample { h, delta } => {
                let op = BdGOperator::from_fiber(h.clone(), with_extra(delta), linalg::conj(h), mu)?;
                Ok(spectral::growth_rate(&op, None)?)
            }
        }
    }
}

/// Growth rates of the open chain `Ĥ_{μ,ν}` and the periodic bulk `H_{μ,ν}`
/// over a `(μ, ν)` grid, where the drive enters as the onsite pairing `iν`
/// on top of the model's own pairing.
///
/// The bulk is sampled on `bulk_k` Bloch points. Inside a band it is
/// unstable for every `ν ≠ 0`, but a coarse sample only sees that once the
/// spacing of the sampled band energies drops below `2|ν|`, so `bulk_k`
/// must resolve the smallest `ν` of the grid.
pub fn instability_scan(model: &LatticeModel, cells: usize, mu_grid: &[f64], nu_grid: &[f64], bulk_k: usize) -> Result<EdgeReport> {
    if model.spatial_dim() != 1 {
        return Err(Error::Dimension("instability scan needs a 1D model".into()));
    }
    if mu_grid.is_empty() || nu_grid.is_empty() || bulk_k == 0 {
        return Err(Error::Validation("instability scan needs nonempty grids".into()));
    }
    let chain = restrict(model, cells, 0.0, None)?;
    let h = chain.one_particle(0.0);
    let real_model = is_real_matrix(&h);
    if !real_model {
        warn!("{} is not real; the analytic phase boundaries are omitted", model.name);
    }
    let bulk = Bulk::new(model, bulk_k)?;
    let spectral_gap = bulk.spectral_gap()?;
    let points: Vec<(f64, f64)> = mu_grid.iter().flat_map(|&m| nu_grid.iter().map(move |&n| (m, n))).collect();
    let rows: Vec<(f64, f64, f64, f64)> = points
        .par_iter()
        .map(|&(mu, nu)| {
            let mut fam = chain.clone();
            fam.mu = mu;
            let op = fam.assemble(0.0, I * nu);
            let tol = spectral::default_tol(&op);
            let w = spectral::eigenvalues_with_tol(&op, Some(tol))?;
            let growth = w.iter().map(|z| z.im).fold(0.0, f64::max);
            let re = w.iter().filter(|z| z.im > tol).fold(0.0f64, |a, z| a.max(z.re.abs()));
            Ok((growth, bulk.growth(mu, I * nu)?, re, tol))
        })
        .collect::<Result<_>>()?;
    let growth_tol = rows.iter().map(|r| r.3).fold(0.0, f64::max).max(1e-8);
    let map = InstabilityMap {
        mu: mu_grid.to_vec(),
        nu: nu_grid.to_vec(),
        edge_growth: rows.iter().map(|r| r.0).collect(),
        bulk_growth: rows.iter().map(|r| r.1).collect(),
        unstable_real_part: rows.iter().map(|r| r.2).collect(),
        spectral_gap,
        real_model,
        growth_tol,
        chain_cells: cells,
    };
    Ok(EdgeReport {
        k: vec![],
        eigenvalues: vec![],
        edge_localization: vec![],
        max_growth_rate: map.edge_growth.iter().cloned().fold(0.0, f64::max),
        boundary_current: None,
        instability_map: Some(map),
    })
}

/// Spectrum of the open chain `Ĥ_{μ,ν}` next to `±((σ(ĥ) − μ)² − ν²)^{1/2}`.
#[derive(Debug, Clone, Serialize)]
pub struct DrivenChainSpectrum {
    pub computed: Vec<c64>,
    pub predicted: Vec<c64>,
    pub distance: f64,
}

pub fn driven_chain_spectrum(model: &LatticeModel, cells: usize, mu: f64, nu: f64) -> Result<DrivenChainSpectrum> {
    let mut chain = restrict(model, cells, mu, None)?;
    let h = chain.one_particle(0.0);
    if !is_real_matrix(&h) {
        return Err(Error::Validation(format!("{} is not real; the spectral mapping does not apply", model.name)));
    }
    if chain.model.pairings.iter().any(|t| t.amplitude.norm() > 0.0) {
        return Err(Error::Validation("the spectral mapping needs a model without own pairing".into()));
    }
    chain.mu = mu;
    let computed = spectral::spectrum(&chain.assemble(0.0, I * nu), None)?.eigenvalues;
    let (e, _) = linalg::eigh(&h)?;
    let mut predicted = Vec::with_capacity(2 * e.len());
    for &x in e.iter() {
        let r = cr((x - mu).powi(2) - nu * nu).sqrt();
        predicted.push(r);
        predicted.push(-r);
    }
    let distance = linalg::multiset_distance(&computed, &predicted);
    Ok(DrivenChainSpectrum { computed, predicted, distance })
}

/// Spectral conditions of the second instability scenario.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario2Report {
    pub mu: f64,
    /// Bulk bands `I′` of `h`, increasing.
    pub bands: Vec<(f64, f64)>,
    /// `σ(h − μ) ∩ (−σ(conj h − μ)) = ∅`
    pub bulk_disjoint: bool,
    /// `σ(ĥ − μ) ∩ (−σ(conj ĥ − μ)) ≠ ∅`
    pub edge_overlap: bool,
    /// Admissible window `(b₁, (a₁ + a₂)/2)` for `I′₁ = [a₁, b₁]`, `I′₂ = [a₂, b₂]`.
    pub window: Option<(f64, f64)>,
    /// Gap `I″` between `I′₁ − μ` and `μ − I′₁` when `μ` is in the window.
    pub gap_interval: Option<(f64, f64)>,
}

/// Evaluate the bulk-disjointness and edge-overlap conditions at `mu`.
/// Band edges come from a `bulk_grid²` sample of `h(k)`; two sampled spectra
/// are considered to meet when they come closer than the sampling resolution.
pub fn scenario2_conditions(model: &LatticeModel, mu: f64, width: usize, n_k: usize, bulk_grid: usize) -> Result<Scenario2Report> {
    if model.spatial_dim() != 2 {
        return Err(Error::Dimension("scenario 2 needs a 2D model".into()));
    }
    if n_k < 2 || bulk_grid < 2 {
        return Err(Error::Validation("scenario 2 needs n_k, bulk_grid >= 2".into()));
    }
    let fam = to_bloch(model)?;
    let ks = k_grid(bulk_grid);
    let spectra: Vec<Vec<f64>> = ks
        .iter()
        .flat_map(|&a| ks.iter().map(move |&b| [a, b]))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|k| Ok(linalg::eigh(&fam.h(k))?.0.to_vec()))
        .collect::<Result<_>>()?;
    let norm = spectra.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
    let tol = 1e-9 * norm;
    let bands: Vec<(f64, f64)> = ordinal_band_intervals(&spectra, tol, norm)?.iter().map(|b| (b.lo, b.hi)).collect();

    let meets = |a: (f64, f64), b: (f64, f64), eps: f64| a.0.max(b.0) <= a.1.min(b.1) + eps;
    let bulk_disjoint = bands
        .iter()
        .all(|&p| bands.iter().all(|&q| !meets((p.0 - mu, p.1 - mu), (mu - q.1, mu - q.0), tol)));

    let cyl = restrict(model, width, mu, None)?;
    let edge: Vec<Vec<f64>> = cyl
        .k_samples(n_k)
        .par_iter()
        .map(|&k| Ok(linalg::eigh(&cyl.one_particle(k))?.0.to_vec()))
        .collect::<Result<_>>()?;
    let resolution = (0..edge[0].len())
        .flat_map(|r| (0..edge.len()).map(move |s| (r, s)))
        .map(|(r, s)| (edge[(s + 1) % edge.len()][r] - edge[s][r]).abs())
        .fold(0.0f64, f64::max);
    let mut values: Vec<f64> = edge.into_iter().flatten().collect();
    values.sort_by(f64::total_cmp);
    let edge_overlap = values.iter().any(|&e| {
        let target = 2.0 * mu - e;
        let pos = values.partition_point(|&x| x < target);
        [pos.wrapping_sub(1), pos]
            .iter()
            .filter_map(|&i| values.get(i))
            .any(|&x| (x - target).abs() <= resolution)
    });

    let window = (bands.len() >= 2).then(|| (bands[0].1, 0.5 * (bands[0].0 + bands[1].0)));
    let gap_interval = window
        .filter(|w| w.0 < w.1 && mu > w.0 && mu < w.1)
        .map(|_| (bands[0].1 - mu, mu - bands[0].1));
    Ok(Scenario2Report {
        mu,
        bands,
        bulk_disjoint,
        edge_overlap,
        window,
        gap_interval,
    })
}

/// Max growth rates of the periodic bulk (on a `bulk_grid²` Bloch sample)
/// and of the strip when the onsite pairing `iν` is switched on.
pub fn driven_growth(model: &LatticeModel, mu: f64, nu: f64, width: usize, n_k: usize, bulk_grid: usize) -> Result<(f64, f64)> {
    if model.spatial_dim() != 2 {
        return Err(Error::Dimension("driven growth needs a 2D model".into()));
    }
    let fam = to_bloch(model)?;
    let ks = k_grid(bulk_grid);
    let pts: Vec<Vec<f64>> = ks
        .iter()
        .flat_map(|&a| ks.iter().map(move |&b| vec![a, b]))
        .collect();
    let bulk = pts
        .par_iter()
        .map(|k| {
            let mut d = fam.delta(k);
            d.diag_mut().mapv_inplace(|z| z + I * nu);
            let op = BdGOperator::from_fiber(fam.h(k), d, fam.h_conj(k), mu)?;
            Ok(spectral::growth_rate(&op, None)?)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let cyl = restrict(model, width, mu, None)?;
    let edge = cyl
        .k_samples(n_k)
        .par_iter()
        .map(|&k| spectral::growth_rate(&cyl.assemble(k, I * nu), None))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((bulk, edge))
}
