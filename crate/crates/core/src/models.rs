//! Tight-binding lattice models and their Bloch reduction.
//!
//! A model is a list of translation-invariant terms `t · S^a ⊗ |m⟩⟨m'|` on
//! `ℓ²(ℤ^d) ⊗ ℂ^L`, where `S^a |n⟩ = |n + a⟩`. Real-space matrices are built
//! on a finite box with periodic or open boundaries; the Bloch reduction uses
//! the convention `S_j ↦ e^{-i k_j}`, so `∂_{k_j}` corresponds to the
//! commutator derivation `i[·, X_j]`. All Chern and winding signs in this
//! crate are stated relative to that convention.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use log::warn;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bdg::{assemble_bdg, BdGOperator, Boundary, ChiralGrading, OneParticleOperator, PairingOperator};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, cr, CMat, I};

/// `amplitude · S^displacement ⊗ |to⟩⟨from|`, i.e. the matrix element
/// `⟨n + a, to| · |n, from⟩ = amplitude` for every cell `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub displacement: Vec<i64>,
    pub to: usize,
    pub from: usize,
    pub amplitude: c64,
}

impl Term {
    pub fn new(displacement: &[i64], to: usize, from: usize, amplitude: c64) -> Self {
        Self {
            displacement: displacement.to_vec(),
            to,
            from,
            amplitude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisorderKind {
    /// Random Hermitian onsite block per cell: uniform real diagonal plus
    /// uniform complex intra-cell couplings. Breaks `h = conj(h)`.
    OnsiteUniform,
    /// Uniform real diagonal potential only.
    OnsiteRealOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    pub amplitude: f64,
    pub kind: DisorderKind,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct LatticeModel {
    pub name: String,
    pub dims: Vec<usize>,
    pub orbitals: usize,
    pub hoppings: Vec<Term>,
    pub pairings: Vec<Term>,
    pub bc: Vec<Boundary>,
    pub disorder: Option<DisorderConfig>,
    /// Sampled onsite blocks, one `L x L` Hermitian matrix per cell.
    pub onsite: Option<Vec<CMat>>,
    /// Orbital chiral grading, tiled over cells.
    pub chiral: Option<Vec<f64>>,
}

type TermKey = (Vec<i64>, usize, usize);

fn merge(terms: &[Term]) -> BTreeMap<TermKey, c64> {
    let mut map = BTreeMap::new();
    for t in terms {
        *map.entry((t.displacement.clone(), t.to, t.from)).or_insert(c64::new(0.0, 0.0)) += t.amplitude;
    }
    map
}

fn unmerge(map: BTreeMap<TermKey, c64>) -> Vec<Term> {
    map.into_iter()
        .filter(|(_, v)| v.norm() > 0.0)
        .map(|((a, to, from), amplitude)| Term {
            displacement: a,
            to,
            from,
            amplitude,
        })
        .collect()
}

/// Add the reverse `(-a, (m', m), conj(t))` of every hopping that lacks one.
fn hermitian_closure(terms: &[Term]) -> Result<Vec<Term>> {
    let mut map = merge(terms);
    let keys: Vec<TermKey> = map.keys().cloned().collect();
    for (a, to, from) in keys {
        let t = map[&(a.clone(), to, from)];
        let rev = (a.iter().map(|x| -x).collect::<Vec<_>>(), from, to);
        match map.get(&rev) {
            Some(&r) if (r - t.conj()).norm() > 1e-12 * t.norm().max(1.0) => {
                return Err(Error::Validation(format!(
                    "hopping {a:?} ({to},{from}) = {t} has inconsistent reverse {r}"
                )));
            }
            Some(_) => {}
            None => {
                map.insert(rev, t.conj());
            }
        }
    }
    Ok(unmerge(map))
}

/// Add the partner `(-a, (m', m), δ)` so that `Δ(n, n') = Δ(n', n)`.
fn symmetric_closure(terms: &[Term]) -> Result<Vec<Term>> {
    let mut map = merge(terms);
    let keys: Vec<TermKey> = map.keys().cloned().collect();
    for (a, to, from) in keys {
        let t = map[&(a.clone(), to, from)];
        let rev = (a.iter().map(|x| -x).collect::<Vec<_>>(), from, to);
        match map.get(&rev) {
            Some(&r) if (r - t).norm() > 1e-12 * t.norm().max(1.0) => {
                return Err(Error::Validation(format!(
                    "pairing {a:?} ({to},{from}) = {t} has inconsistent partner {r}"
                )));
            }
            Some(_) => {}
            None => {
                map.insert(rev, t);
            }
        }
    }
    Ok(unmerge(map))
}

/// How one lattice axis is represented in a matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisMode {
    /// Fourier-reduced; contributes a phase `e^{-i k a}`.
    Bloch,
    /// Kept in real space with the given extent and boundary condition.
    Real { extent: usize, bc: Boundary },
}

/// Matrix of a term list with some axes in real space and the others
/// Fourier reduced at quasimomentum `k` (entries for real axes ignored).
/// With `conjugate` the amplitudes are conjugated first (the operator
/// `conj(h)`); with `derivative = Some(j)` the result is `∂_{k_j}`.
pub fn term_matrix(
    terms: &[Term],
    orbitals: usize,
    axes: &[AxisMode],
    k: &[f64],
    conjugate: bool,
    derivative: Option<usize>,
) -> CMat {
    let extents: Vec<usize> = axes
        .iter()
        .map(|m| match m {
            AxisMode::Bloch => 1,
            AxisMode::Real { extent, .. } => *extent,
        })
        .collect();
    let cells: usize = extents.iter().product();
    let dim = cells * orbitals;
    let mut out = Array2::zeros((dim, dim));
    let mut coords = vec![0usize; axes.len()];
    for t in terms {
        let amp = if conjugate { t.amplitude.conj() } else { t.amplitude };
        let mut phase_arg = 0.0;
        let mut factor = cr(1.0);
        for (j, mode) in axes.iter().enumerate() {
            if *mode == AxisMode::Bloch {
                let a = t.displacement[j] as f64;
                phase_arg -= k[j] * a;
                if derivative == Some(j) {
                    factor *= -I * a;
                }
            }
        }
        if let Some(j) = derivative {
            if axes[j] != AxisMode::Bloch {
                factor = cr(0.0);
            }
        }
        let value = amp * factor * c64::from_polar(1.0, phase_arg);
        if value.norm() == 0.0 {
            continue;
        }
        'cells: for cell in 0..cells {
            let mut rem = cell;
            for (j, e) in extents.iter().enumerate() {
                coords[j] = rem % e;
                rem /= e;
            }
            let mut target = 0usize;
            let mut stride = 1usize;
            for (j, mode) in axes.iter().enumerate() {
                let c = match mode {
                    AxisMode::Bloch => 0,
                    AxisMode::Real { extent, bc } => {
                        let x = coords[j] as i64 + t.displacement[j];
                        let e = *extent as i64;
                        match bc {
                            Boundary::Periodic => x.rem_euclid(e) as usize,
                            Boundary::Open if (0..e).contains(&x) => x as usize,
                            Boundary::Open => continue 'cells,
                        }
                    }
                };
                target += c * stride;
                stride *= extents[j];
            }
            out[[target * orbitals + t.to, cell * orbitals + t.from]] += value;
        }
    }
    out
}

impl LatticeModel {
    pub fn new(
        name: &str,
        dims: Vec<usize>,
        orbitals: usize,
        bc: Vec<Boundary>,
        hoppings: Vec<Term>,
        pairings: Vec<Term>,
    ) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) || bc.len() != dims.len() {
            return Err(Error::Dimension(format!("invalid lattice extents {dims:?} / bc {bc:?}")));
        }
        for t in hoppings.iter().chain(pairings.iter()) {
            if t.displacement.len() != dims.len() || t.to >= orbitals || t.from >= orbitals {
                return Err(Error::Dimension(format!("term {t:?} does not fit the lattice")));
            }
        }
        Ok(Self {
            name: name.to_string(),
            dims,
            orbitals,
            hoppings: hermitian_closure(&hoppings)?,
            pairings: symmetric_closure(&pairings)?,
            bc,
            disorder: None,
            onsite: None,
            chiral: None,
        })
    }

    pub fn cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn dim(&self) -> usize {
        self.cells() * self.orbitals
    }

    pub fn spatial_dim(&self) -> usize {
        self.dims.len()
    }

    /// Largest hopping or pairing reach along `axis`.
    pub fn range(&self, axis: usize) -> usize {
        self.hoppings
            .iter()
            .chain(self.pairings.iter())
            .map(|t| t.displacement[axis].unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn is_clean(&self) -> bool {
        self.onsite.is_none()
    }

    /// Same terms, new box.
    pub fn resized(&self, dims: Vec<usize>, bc: Vec<Boundary>) -> Result<Self> {
        if dims.len() != self.dims.len() || bc.len() != dims.len() {
            return Err(Error::Dimension("resizing must keep the lattice dimension".into()));
        }
        if self.onsite.is_some() {
            return Err(Error::Unsupported("cannot resize a disordered sample".into()));
        }
        let mut m = self.clone();
        m.dims = dims;
        m.bc = bc;
        Ok(m)
    }

    /// Add `δ` times the identity to the pairing (onsite, orbital diagonal).
    pub fn with_onsite_pairing(mut self, delta: c64) -> Self {
        let zero = vec![0; self.dims.len()];
        for m in 0..self.orbitals {
            self.pairings.push(Term::new(&zero, m, m, delta));
        }
        self.pairings = unmerge(merge(&self.pairings));
        self
    }

    pub fn with_chiral(mut self, signs: Vec<f64>) -> Self {
        self.chiral = Some(signs);
        self
    }

    fn real_axes(&self) -> Vec<AxisMode> {
        self.dims
            .iter()
            .zip(self.bc.iter())
            .map(|(&extent, &bc)| AxisMode::Real { extent, bc })
            .collect()
    }

    pub fn h_matrix(&self) -> CMat {
        let k = vec![0.0; self.dims.len()];
        let mut h = term_matrix(&self.hoppings, self.orbitals, &self.real_axes(), &k, false, None);
        if let Some(blocks) = &self.onsite {
            let l = self.orbitals;
            for (cell, b) in blocks.iter().enumerate() {
                let mut view = h.slice_mut(ndarray::s![cell * l..(cell + 1) * l, cell * l..(cell + 1) * l]);
                view += b;
            }
        }
        h
    }

    pub fn delta_matrix(&self) -> CMat {
        let k = vec![0.0; self.dims.len()];
        term_matrix(&self.pairings, self.orbitals, &self.real_axes(), &k, false, None)
    }

    pub fn one_particle(&self) -> Result<OneParticleOperator> {
        OneParticleOperator::new(self.h_matrix(), self.dims.clone(), self.orbitals, self.bc.clone())
    }

    /// Real-space BdG operator on the model's box.
    pub fn bdg(&self, mu: f64) -> Result<BdGOperator> {
        let op = assemble_bdg(self.one_particle()?, PairingOperator::new(self.delta_matrix()), mu)?;
        match &self.chiral {
            Some(signs) => op.with_chiral(ChiralGrading::tiled(signs, self.cells())?),
            None => Ok(op),
        }
    }

    /// Integer cell coordinates of every cell in storage order.
    pub fn cell_coords(&self) -> Vec<Vec<usize>> {
        (0..self.cells())
            .map(|cell| {
                let mut rem = cell;
                self.dims
                    .iter()
                    .map(|e| {
                        let c = rem % e;
                        rem /= e;
                        c
                    })
                    .collect()
            })
            .collect()
    }
}

/// Two-orbital SSH chain, orbitals `(A, B)`, `h(k)_{AB} = t_intra + t_inter e^{-ik}`.
/// Real hoppings; chiral grading `diag(1, -1)` attached.
pub fn ssh_chain(t_intra: f64, t_inter: f64, n_cells: usize, bc: Boundary) -> Result<LatticeModel> {
    if n_cells == 0 {
        return Err(Error::Validation("SSH chain needs at least one cell".into()));
    }
    let hoppings = vec![Term::new(&[0], 1, 0, cr(t_intra)), Term::new(&[1], 0, 1, cr(t_inter))];
    Ok(LatticeModel::new("ssh", vec![n_cells], 2, vec![bc], hoppings, vec![])?.with_chiral(vec![1.0, -1.0]))
}

/// Kagomé Laplacian with the driving `Δ = ν diag(1, e^{2πi/3}, e^{4πi/3})`.
///
/// The off-diagonal entries are `h₁₀ = 1 + S₁`, `h₂₀ = 1 + S₂` and
/// `h₂₁ = 1 + S₃` with `S₃ = S₁* S₂`. Placing orbital `m` at `-a_m/2` this is
/// nearest-neighbour hopping on the kagomé lattice, so `σ(h) ∋ -2` (flat band).
/// Taking `S₃ = S₂* S₁` instead does not close the triangles and destroys the
/// flat band.
///
/// `mu` is not part of the model; it is passed to `bdg` and the topology
/// routines and is accepted here only to mirror their signatures.
pub fn kagome_driven(nu: f64, _mu: f64, dims: [usize; 2], bc: [Boundary; 2]) -> Result<LatticeModel> {
    let hoppings = vec![
        Term::new(&[0, 0], 1, 0, cr(1.0)),
        Term::new(&[1, 0], 1, 0, cr(1.0)),
        Term::new(&[0, 0], 2, 0, cr(1.0)),
        Term::new(&[0, 1], 2, 0, cr(1.0)),
        Term::new(&[0, 0], 2, 1, cr(1.0)),
        Term::new(&[-1, 1], 2, 1, cr(1.0)),
    ];
    let pairings = (0..3)
        .map(|m| Term::new(&[0, 0], m, m, c64::from_polar(nu, 2.0 * PI * m as f64 / 3.0)))
        .collect();
    LatticeModel::new("kagome", dims.to_vec(), 3, bc.to_vec(), hoppings, pairings)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Square-lattice Hofstadter model with flux `p/q` per plaquette in the
/// Landau gauge: the `q` sites of a magnetic cell run along axis 1, hopping
/// along axis 2 from `x` carries the phase `e^{2πi p x / q}`.
///
/// `dims` are in lattice sites; axis 1 must be a multiple of `q`.
pub fn hofstadter(p: i64, q: usize, dims: [usize; 2], bc: [Boundary; 2]) -> Result<LatticeModel> {
    if q == 0 || gcd(p.unsigned_abs(), q as u64) != 1 {
        return Err(Error::Validation(format!("flux {p}/{q} must be in lowest terms")));
    }
    if dims[0] % q != 0 {
        return Err(Error::Dimension(format!(
            "axis-1 extent {} is not a multiple of the magnetic cell {q}",
            dims[0]
        )));
    }
    let mut hoppings = Vec::new();
    for m in 0..q {
        if m + 1 < q {
            hoppings.push(Term::new(&[0, 0], m + 1, m, cr(1.0)));
        }
        let phase = 2.0 * PI * (p as f64) * (m as f64) / q as f64;
        hoppings.push(Term::new(&[0, 1], m, m, c64::from_polar(1.0, phase)));
    }
    hoppings.push(Term::new(&[1, 0], 0, q - 1, cr(1.0)));
    LatticeModel::new(
        "hofstadter",
        vec![dims[0] / q, dims[1]],
        q,
        bc.to_vec(),
        hoppings,
        vec![],
    )
}

/// Two-band Chern insulator `h(k) = sin k₁ σx + sin k₂ σy + (m + cos k₁ + cos k₂) σz`.
pub fn chern_insulator(mass: f64, dims: [usize; 2], bc: [Boundary; 2]) -> Result<LatticeModel> {
    let h = 0.5;
    let hoppings = vec![
        Term::new(&[0, 0], 0, 0, cr(mass)),
        Term::new(&[0, 0], 1, 1, cr(-mass)),
        // (σz + iσx)/2 along axis 1
        Term::new(&[1, 0], 0, 0, cr(h)),
        Term::new(&[1, 0], 1, 1, cr(-h)),
        Term::new(&[1, 0], 0, 1, I * h),
        Term::new(&[1, 0], 1, 0, I * h),
        // (σz + iσy)/2 along axis 2
        Term::new(&[0, 1], 0, 0, cr(h)),
        Term::new(&[0, 1], 1, 1, cr(-h)),
        Term::new(&[0, 1], 0, 1, cr(h)),
        Term::new(&[0, 1], 1, 0, cr(-h)),
    ];
    LatticeModel::new("chern-insulator", dims.to_vec(), 2, bc.to_vec(), hoppings, vec![])
}

/// Decoupled sites with onsite energies `energies` (one per orbital).
pub fn atomic_limit(energies: &[f64], dims: Vec<usize>, bc: Vec<Boundary>) -> Result<LatticeModel> {
    let zero = vec![0; dims.len()];
    let hoppings = energies
        .iter()
        .enumerate()
        .map(|(m, &e)| Term::new(&zero, m, m, cr(e)))
        .collect();
    LatticeModel::new("atomic", dims, energies.len(), bc, hoppings, vec![])
}

/// Sample onsite disorder into the model's box. Only `h` is affected.
pub fn apply_disorder(model: &LatticeModel, cfg: DisorderConfig) -> Result<LatticeModel> {
    if cfg.amplitude < 0.0 || !cfg.amplitude.is_finite() {
        return Err(Error::Validation(format!("disorder amplitude {} must be >= 0", cfg.amplitude)));
    }
    if cfg.amplitude == 0.0 {
        return Ok(model.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let l = model.orbitals;
    let half = cfg.amplitude / 2.0;
    let blocks = (0..model.cells())
        .map(|_| {
            let mut b: CMat = Array2::zeros((l, l));
            for i in 0..l {
                b[[i, i]] = cr(rng.random_range(-half..=half));
            }
            if cfg.kind == DisorderKind::OnsiteUniform {
                for i in 0..l {
                    for j in i + 1..l {
                        let z = c64::new(rng.random_range(-half..=half), rng.random_range(-half..=half));
                        b[[i, j]] = z;
                        b[[j, i]] = z.conj();
                    }
                }
            }
            b
        })
        .collect::<Vec<_>>();
    let mut out = model.clone();
    match out.onsite.as_mut() {
        Some(existing) => {
            for (e, b) in existing.iter_mut().zip(blocks) {
                *e += &b;
            }
        }
        None => out.onsite = Some(blocks),
    }
    if out.chiral.is_some() {
        warn!("onsite disorder breaks the chiral symmetry of {}", out.name);
    }
    out.disorder = Some(cfg);
    Ok(out)
}

/// Translation-invariant Bloch family of a clean model.
#[derive(Debug, Clone)]
pub struct BlochFamily {
    model: LatticeModel,
    axes: Vec<AxisMode>,
}

pub fn to_bloch(model: &LatticeModel) -> Result<BlochFamily> {
    if !model.is_clean() {
        return Err(Error::Unsupported(format!(
            "model {} carries disorder and has no Bloch reduction",
            model.name
        )));
    }
    Ok(BlochFamily {
        model: model.clone(),
        axes: vec![AxisMode::Bloch; model.spatial_dim()],
    })
}

impl BlochFamily {
    pub fn model(&self) -> &LatticeModel {
        &self.model
    }

    pub fn orbitals(&self) -> usize {
        self.model.orbitals
    }

    pub fn spatial_dim(&self) -> usize {
        self.axes.len()
    }

    pub fn h(&self, k: &[f64]) -> CMat {
        term_matrix(&self.model.hoppings, self.model.orbitals, &self.axes, k, false, None)
    }

    /// Fourier transform of `conj(h)`, equal to `conj(h(-k))`.
    pub fn h_conj(&self, k: &[f64]) -> CMat {
        term_matrix(&self.model.hoppings, self.model.orbitals, &self.axes, k, true, None)
    }

    pub fn delta(&self, k: &[f64]) -> CMat {
        term_matrix(&self.model.pairings, self.model.orbitals, &self.axes, k, false, None)
    }

    pub fn dh(&self, k: &[f64], axis: usize) -> CMat {
        term_matrix(&self.model.hoppings, self.model.orbitals, &self.axes, k, false, Some(axis))
    }

    pub fn ddelta(&self, k: &[f64], axis: usize) -> CMat {
        term_matrix(&self.model.pairings, self.model.orbitals, &self.axes, k, false, Some(axis))
    }

    /// BdG fiber `H(k)` of the real-space operator.
    pub fn bdg(&self, k: &[f64], mu: f64) -> BdGOperator {
        let op = BdGOperator::from_fiber(self.h(k), self.delta(k), self.h_conj(k), mu).expect("consistent fiber blocks");
        match &self.model.chiral {
            Some(signs) => op.with_chiral(ChiralGrading::new(signs.clone()).expect("valid grading")).expect("fiber size"),
            None => op,
        }
    }

    /// `∂_{k_axis} H(k)`.
    pub fn dbdg(&self, k: &[f64], axis: usize) -> CMat {
        let dh = self.dh(k, axis);
        let dhole = term_matrix(&self.model.hoppings, self.model.orbitals, &self.axes, k, true, Some(axis)).mapv(|z| -z);
        let dd = self.ddelta(k, axis);
        let lower = linalg::dagger(&dd).mapv(|z| -z);
        linalg::block2(dh.view(), dd.view(), lower.view(), dhole.view())
    }
}

/// Uniform grid `2π j / n`, `j = 0..n`.
pub fn k_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdg::check_symmetries;
    use crate::linalg::{eigh, max_abs};
    use ndarray::array;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ssh_bloch_offdiagonal() {
        let m = ssh_chain(0.3, 1.1, 4, Boundary::Periodic).unwrap();
        let fam = to_bloch(&m).unwrap();
        for &k in &[0.0, 0.4, 2.0, 5.5] {
            let h = fam.h(&[k]);
            let expect = cr(0.3) + c64::from_polar(1.1, -k);
            assert!((h[[0, 1]] - expect).norm() < 1e-14);
            assert!((h[[1, 0]] - expect.conj()).norm() < 1e-14);
            assert!(h[[0, 0]].norm() < 1e-15);
        }
    }

    #[test]
    fn critical_ssh_gap_closes() {
        let mut last = f64::INFINITY;
        // odd lengths keep k = π off the grid, so the gap is ~π/n
        for n in [9, 33, 129] {
            let m = ssh_chain(1.0, 1.0, n, Boundary::Periodic).unwrap();
            let (w, _) = eigh(&m.h_matrix()).unwrap();
            let gap = w.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
            assert!(gap <= last);
            last = gap;
        }
        assert!(last < 0.03);
        let even = ssh_chain(1.0, 1.0, 16, Boundary::Periodic).unwrap();
        let (w, _) = eigh(&even.h_matrix()).unwrap();
        assert!(w.iter().any(|x| x.abs() < 1e-12));
    }

    #[test]
    fn dimerized_open_chain_has_zero_mode() {
        let m = ssh_chain(0.0, 1.0, 10, Boundary::Open).unwrap();
        let (w, _) = eigh(&m.h_matrix()).unwrap();
        assert!(w.iter().any(|x| x.abs() < 1e-14));
        assert!(m.one_particle().unwrap().is_real);
    }

    #[test]
    fn kagome_at_gamma() {
        let m = kagome_driven(0.0, 0.0, [4, 4], [Boundary::Periodic; 2]).unwrap();
        let fam = to_bloch(&m).unwrap();
        let h0 = fam.h(&[0.0, 0.0]);
        let expected = array![
            [cr(0.0), cr(2.0), cr(2.0)],
            [cr(2.0), cr(0.0), cr(2.0)],
            [cr(2.0), cr(2.0), cr(0.0)]
        ];
        assert!(max_abs(&(&h0 - &expected)) < 1e-14);
        let (w, _) = eigh(&h0).unwrap();
        assert!((w[0] + 2.0).abs() < 1e-12 && (w[1] + 2.0).abs() < 1e-12 && (w[2] - 4.0).abs() < 1e-12);
        assert!(max_abs(&fam.delta(&[1.0, 2.0])) == 0.0);
    }

    #[test]
    fn kagome_has_flat_band() {
        let m = kagome_driven(0.0, 0.0, [1, 1], [Boundary::Periodic; 2]).unwrap();
        let fam = to_bloch(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let k = [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)];
            let (w, _) = eigh(&fam.h(&k)).unwrap();
            assert!((w[0] + 2.0).abs() < 1e-12, "{w}");
            // dispersive bands: 1 ± sqrt(3 + 2 Σ cos)
            let c = f64::cos(k[0]) + f64::cos(k[1]) + f64::cos(k[0] - k[1]);
            let r = (3.0 + 2.0 * c).max(0.0).sqrt();
            assert!((w[1] - (1.0 - r)).abs() < 1e-9 && (w[2] - (1.0 + r)).abs() < 1e-9);
        }
    }

    #[test]
    fn kagome_pairing_is_onsite() {
        let m = kagome_driven(0.2, 0.0, [3, 3], [Boundary::Periodic; 2]).unwrap();
        let fam = to_bloch(&m).unwrap();
        let d0 = fam.delta(&[0.0, 0.0]);
        let d1 = fam.delta(&[1.3, -0.4]);
        assert!(max_abs(&(&d0 - &d1)) < 1e-15);
        assert!((d0[[1, 1]] - c64::from_polar(0.2, 2.0 * PI / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn laplacian_when_flux_vanishes() {
        let m = hofstadter(0, 1, [4, 4], [Boundary::Periodic; 2]).unwrap();
        let fam = to_bloch(&m).unwrap();
        for &(k1, k2) in &[(0.0, 0.0), (0.3, 1.7), (3.0, 4.0)] {
            let h = fam.h(&[k1, k2]);
            assert!((h[[0, 0]].re - 2.0 * (f64::cos(k1) + f64::cos(k2))).abs() < 1e-14);
        }
    }

    #[test]
    fn hofstadter_quarter_flux_spectrum_is_symmetric() {
        let m = hofstadter(1, 4, [4, 4], [Boundary::Periodic; 2]).unwrap();
        let fam = to_bloch(&m).unwrap();
        let mut all = Vec::new();
        for &k1 in &k_grid(64) {
            for &k2 in &k_grid(64) {
                let (w, _) = eigh(&fam.h(&[k1, k2])).unwrap();
                all.extend(w.iter().cloned());
            }
        }
        all.sort_by(f64::total_cmp);
        let n = all.len();
        for i in 0..n {
            assert!((all[i] + all[n - 1 - i]).abs() < 1e-9);
        }
        // lowest subband is separated from the next one
        let lowest_top = all[n / 4 - 1];
        let second_bottom = all[n / 4];
        assert!(second_bottom - lowest_top > 0.5, "{lowest_top} {second_bottom}");
    }

    #[test]
    fn hofstadter_rejects_bad_cells() {
        assert!(matches!(hofstadter(1, 4, [6, 4], [Boundary::Periodic; 2]), Err(Error::Dimension(_))));
        assert!(matches!(hofstadter(2, 4, [8, 4], [Boundary::Periodic; 2]), Err(Error::Validation(_))));
    }

    #[test]
    fn analytic_derivative_matches_finite_difference() {
        let models = [
            kagome_driven(0.3, 0.0, [2, 2], [Boundary::Periodic; 2]).unwrap(),
            hofstadter(1, 4, [4, 4], [Boundary::Periodic; 2]).unwrap().with_onsite_pairing(c64::new(0.1, 0.2)),
            chern_insulator(-1.0, [2, 2], [Boundary::Periodic; 2]).unwrap(),
        ];
        let delta = 1e-5;
        for m in &models {
            let fam = to_bloch(m).unwrap();
            let k = [0.7, -1.9];
            for axis in 0..2 {
                let mut kp = k;
                let mut km = k;
                kp[axis] += delta;
                km[axis] -= delta;
                let fd = (fam.bdg(&kp, 0.3).matrix() - fam.bdg(&km, 0.3).matrix()).mapv(|z| z / (2.0 * delta));
                let an = fam.dbdg(&k, axis);
                assert!(max_abs(&(&fd - &an)) < 1e-8, "{}", m.name);
                let fdh = (fam.h(&kp) - fam.h(&km)).mapv(|z| z / (2.0 * delta));
                assert!(max_abs(&(&fdh - &fam.dh(&k, axis))) < 1e-8);
            }
        }
    }

    #[test]
    fn ssh_derivative_matches_finite_difference() {
        let fam = to_bloch(&ssh_chain(0.5, 1.0, 1, Boundary::Periodic).unwrap()).unwrap();
        let d = 1e-5;
        let fd = (fam.h(&[1.0 + d]) - fam.h(&[1.0 - d])).mapv(|z| z / (2.0 * d));
        assert!(max_abs(&(&fd - &fam.dh(&[1.0], 0))) < 1e-8);
    }

    #[test]
    fn fibers_are_j_selfadjoint_and_phs_pairs_k_with_minus_k() {
        let m = hofstadter(1, 4, [4, 4], [Boundary::Periodic; 2]).unwrap().with_onsite_pairing(c64::new(0.0, 0.2));
        let fam = to_bloch(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let k = [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)];
            let h = fam.bdg(&k, 0.4);
            let d = check_symmetries(&h);
            assert!(d.j_selfadjoint < 1e-12);
            let hm = fam.bdg(&[-k[0], -k[1]], 0.4);
            let phs = linalg::k_conj_sandwich(hm.matrix()) + h.matrix();
            assert!(max_abs(&phs) < 1e-12);
        }
    }

    #[test]
    fn assembled_fibers_pass_symmetry_checks() {
        let models = [
            kagome_driven(0.2, 0.0, [2, 2], [Boundary::Periodic; 2]).unwrap(),
            ssh_chain(0.5, 1.0, 2, Boundary::Periodic).unwrap().with_onsite_pairing(I * 0.3),
            hofstadter(1, 4, [4, 4], [Boundary::Periodic; 2]).unwrap().with_onsite_pairing(I * 0.1),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in &models {
            let fam = to_bloch(m).unwrap();
            for _ in 0..100 {
                let k: Vec<f64> = (0..m.spatial_dim()).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
                let h = OneParticleOperator::from_matrix(fam.h(&k)).unwrap();
                let op = assemble_bdg(h, PairingOperator::new(fam.delta(&k)), 0.5).unwrap();
                let d = check_symmetries(&op);
                assert!(d.phs <= 1e-10 && d.j_selfadjoint <= 1e-10);
            }
        }
    }

    fn sorted_real(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn torus_spectrum_is_union_of_fibers() {
        let cases: Vec<(LatticeModel, [usize; 2])> = vec![
            (kagome_driven(0.0, 0.0, [5, 4], [Boundary::Periodic; 2]).unwrap(), [5, 4]),
            (hofstadter(1, 4, [8, 6], [Boundary::Periodic; 2]).unwrap(), [2, 6]),
            (chern_insulator(1.2, [4, 5], [Boundary::Periodic; 2]).unwrap(), [4, 5]),
        ];
        for (m, cells) in cases {
            let (w, _) = eigh(&m.h_matrix()).unwrap();
            let fam = to_bloch(&m).unwrap();
            let mut fibers = Vec::new();
            for &k1 in &k_grid(cells[0]) {
                for &k2 in &k_grid(cells[1]) {
                    let (wk, _) = eigh(&fam.h(&[k1, k2])).unwrap();
                    fibers.extend(wk.iter().cloned());
                }
            }
            let a = sorted_real(w.to_vec());
            let b = sorted_real(fibers);
            let worst = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-9, "{}: {worst}", m.name);
        }
    }

    #[test]
    fn torus_bdg_spectrum_is_union_of_bdg_fibers() {
        let m = hofstadter(1, 4, [8, 3], [Boundary::Periodic; 2]).unwrap().with_onsite_pairing(c64::new(0.05, 0.1));
        let mu = -3.5;
        let (w, _) = linalg::eig(m.bdg(mu).unwrap().matrix()).unwrap();
        let fam = to_bloch(&m).unwrap();
        let mut fibers = Vec::new();
        for &k1 in &k_grid(2) {
            for &k2 in &k_grid(3) {
                let (wk, _) = linalg::eig(fam.bdg(&[k1, k2], mu).matrix()).unwrap();
                fibers.extend(wk.iter().cloned());
            }
        }
        assert!(linalg::multiset_distance(w.as_slice().unwrap(), &fibers) < 1e-9);
    }

    #[test]
    fn disorder_determinism_and_reality() {
        let m = ssh_chain(0.5, 1.0, 20, Boundary::Open).unwrap();
        let same = apply_disorder(&m, DisorderConfig { amplitude: 0.0, kind: DisorderKind::OnsiteUniform, seed: 1 }).unwrap();
        assert_eq!(same.h_matrix(), m.h_matrix());

        let cfg = DisorderConfig { amplitude: 0.1, kind: DisorderKind::OnsiteRealOnly, seed: 42 };
        let a = apply_disorder(&m, cfg).unwrap();
        let b = apply_disorder(&m, cfg).unwrap();
        assert_eq!(a.h_matrix(), b.h_matrix());
        assert!(a.one_particle().unwrap().is_real);
        let diag_max = a.h_matrix().diag().iter().fold(0.0f64, |acc, z| acc.max(z.re.abs()));
        assert!(diag_max <= 0.05 && diag_max > 0.0);

        let op = a.bdg(0.0).unwrap();
        let d = check_symmetries(&op);
        assert!(d.phs < 1e-10 && d.j_selfadjoint < 1e-10);
        assert!(d.chiral.unwrap() > 1e-4);
        assert!(to_bloch(&a).is_err());
    }

    #[test]
    fn complex_disorder_breaks_reality() {
        let m = kagome_driven(0.0, 0.0, [3, 3], [Boundary::Periodic; 2]).unwrap();
        let cfg = DisorderConfig { amplitude: 0.5, kind: DisorderKind::OnsiteUniform, seed: 9 };
        let a = apply_disorder(&m, cfg).unwrap();
        assert!(!a.one_particle().unwrap().is_real);
    }

    #[test]
    fn disorder_translation_covariance() {
        let m = kagome_driven(0.0, 0.0, [4, 3], [Boundary::Periodic; 2]).unwrap();
        let cfg = DisorderConfig { amplitude: 1.0, kind: DisorderKind::OnsiteUniform, seed: 17 };
        let a = apply_disorder(&m, cfg).unwrap();
        let blocks = a.onsite.clone().unwrap();
        // remap the realization by a shift (1, 2) on the torus
        let coords = a.cell_coords();
        let mut shifted = blocks.clone();
        for (cell, c) in coords.iter().enumerate() {
            let t = ((c[0] + 1) % 4) + 4 * ((c[1] + 2) % 3);
            shifted[t] = blocks[cell].clone();
        }
        let mut b = a.clone();
        b.onsite = Some(shifted);
        let (wa, _) = eigh(&a.h_matrix()).unwrap();
        let (wb, _) = eigh(&b.h_matrix()).unwrap();
        let worst = wa.iter().zip(wb.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10);
    }

    #[test]
    fn closure_rejects_inconsistent_reverse() {
        let bad = vec![Term::new(&[1], 0, 0, cr(1.0)), Term::new(&[-1], 0, 0, cr(2.0))];
        assert!(LatticeModel::new("bad", vec![3], 1, vec![Boundary::Periodic], bad, vec![]).is_err());
        let ok = LatticeModel::new("ok", vec![3], 1, vec![Boundary::Periodic], vec![Term::new(&[1], 0, 0, I)], vec![]).unwrap();
        assert!(ok.hoppings.iter().any(|t| t.displacement == vec![-1] && t.amplitude == -I));
    }
}
