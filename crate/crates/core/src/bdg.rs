//! Particle-hole data model and assembly of BdG operators.
//!
//! For a one-particle Hamiltonian `h`, a pairing `Δ` and a chemical
//! potential `μ` the BdG Hamiltonian is
//!
//! ```text
//! H = [[ h - μ ,   Δ        ],
//!      [ -conj(Δ), -(conj(h) - μ) ]]  = J A,   A = [[h - μ, Δ], [Δ*, conj(h) - μ]]
//! ```
//!
//! `H` is `J`-selfadjoint (`H* = J H J`) and particle-hole symmetric
//! (`K conj(H) K = -H`). The basis is particle block first, then hole block;
//! within each block sites are major and orbitals minor.

use log::warn;
use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, cr, CMat, I};

pub const ASSEMBLY_TOL: f64 = 1e-12;
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

/// Hermitian one-particle operator `h` on sites x orbitals.
#[derive(Debug, Clone)]
pub struct OneParticleOperator {
    pub matrix: CMat,
    pub dims: Vec<usize>,
    pub orbitals: usize,
    pub bc: Vec<Boundary>,
    pub is_real: bool,
}

impl OneParticleOperator {
    pub fn new(matrix: CMat, dims: Vec<usize>, orbitals: usize, bc: Vec<Boundary>) -> Result<Self> {
        let n = linalg::check_square(&matrix, "one-particle operator")?;
        let sites: usize = dims.iter().product();
        if sites * orbitals != n {
            return Err(Error::Dimension(format!(
                "matrix dimension {n} does not equal sites {sites} x orbitals {orbitals}"
            )));
        }
        if bc.len() != dims.len() {
            return Err(Error::Dimension(format!(
                "{} boundary conditions for {} axes",
                bc.len(),
                dims.len()
            )));
        }
        let scale = linalg::max_abs(&matrix).max(1.0);
        let defect = linalg::max_abs(&(&matrix - &linalg::dagger(&matrix)));
        if defect > ASSEMBLY_TOL * scale {
            return Err(Error::Validation(format!(
                "one-particle operator is not Hermitian (defect {defect:e})"
            )));
        }
        let matrix = linalg::hermitian_part(&matrix);
        let is_real = matrix.iter().all(|z| z.im.abs() <= ASSEMBLY_TOL * scale);
        Ok(Self {
            matrix,
            dims,
            orbitals,
            bc,
            is_real,
        })
    }

    /// A bare matrix on a single open axis with one orbital per site.
    pub fn from_matrix(matrix: CMat) -> Result<Self> {
        let n = linalg::check_square(&matrix, "one-particle operator")?;
        Self::new(matrix, vec![n], 1, vec![Boundary::Open])
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Pairing operator `Δ`, symmetric after assembly.
#[derive(Debug, Clone)]
pub struct PairingOperator {
    pub matrix: CMat,
}

impl PairingOperator {
    pub fn new(matrix: CMat) -> Self {
        Self { matrix }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            matrix: Array2::zeros((n, n)),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Chiral grading `L = diag(±1)` on the one-particle space, extended
/// diagonally to particle-hole space.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiralGrading {
    pub signs: Vec<f64>,
}

impl ChiralGrading {
    pub fn new(signs: Vec<f64>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::Validation("chiral grading entries must be ±1".into()));
        }
        Ok(Self { signs })
    }

    /// Repeat an orbital grading over `cells` unit cells.
    pub fn tiled(orbital_signs: &[f64], cells: usize) -> Result<Self> {
        Self::new(orbital_signs.iter().cloned().cycle().take(orbital_signs.len() * cells).collect())
    }

    /// `L M L` for a particle-hole matrix `M`.
    pub fn sandwich(&self, m: &CMat) -> CMat {
        let n = self.signs.len();
        Array2::from_shape_fn(m.dim(), |(i, j)| m[[i, j]] * (self.signs[i % n] * self.signs[j % n]))
    }
}

/// A BdG Hamiltonian `H = J A_μ` together with the blocks it came from.
#[derive(Debug, Clone)]
pub struct BdGOperator {
    pub h: OneParticleOperator,
    pub delta: PairingOperator,
    pub mu: f64,
    matrix: CMat,
    chiral: Option<ChiralGrading>,
}

impl BdGOperator {
    /// The full `2n x 2n` matrix `H`.
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// One-particle dimension `n`.
    pub fn half_dim(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `A = J H`, Hermitian.
    pub fn a_matrix(&self) -> CMat {
        linalg::hermitian_part(&linalg::j_left(&self.matrix))
    }

    pub fn chiral(&self) -> Option<&ChiralGrading> {
        self.chiral.as_ref()
    }

    pub fn with_chiral(mut self, grading: ChiralGrading) -> Result<Self> {
        if grading.signs.len() != self.half_dim() {
            return Err(Error::Dimension(format!(
                "chiral grading has {} entries, one-particle dimension is {}",
                grading.signs.len(),
                self.half_dim()
            )));
        }
        self.chiral = Some(grading);
        Ok(self)
    }

    /// Bloch fiber `H(k) = [[h(k) - μ, Δ(k)], [-Δ(k)*, -(h'(k) - μ)]]` where
    /// `h'(k)` is the Fourier transform of `conj(h)`, i.e. `conj(h(-k))`.
    ///
    /// The fiber is `J`-selfadjoint; particle-hole symmetry relates the fibers
    /// at `k` and `-k`, so `check_symmetries` on a single fiber reports a
    /// nonzero PHS defect unless the model is symmetric under `k -> -k`.
    pub fn from_fiber(h_k: CMat, delta_k: CMat, hole_k: CMat, mu: f64) -> Result<Self> {
        let n = linalg::check_square(&h_k, "h(k)")?;
        if delta_k.dim() != (n, n) || hole_k.dim() != (n, n) {
            return Err(Error::Dimension("fiber blocks must share one dimension".into()));
        }
        let shift = linalg::identity(n).mapv(|z| z * mu);
        let particle = &h_k - &shift;
        let hole = (&hole_k - &shift).mapv(|z| -z);
        let lower = linalg::dagger(&delta_k).mapv(|z| -z);
        let matrix = linalg::block2(particle.view(), delta_k.view(), lower.view(), hole.view());
        let h = OneParticleOperator {
            matrix: h_k,
            dims: vec![1],
            orbitals: n,
            bc: vec![Boundary::Periodic],
            is_real: false,
        };
        Ok(Self {
            h,
            delta: PairingOperator::new(delta_k),
            mu,
            matrix,
            chiral: None,
        })
    }

    /// Wrap an arbitrary particle-hole matrix, e.g. a perturbed or
    /// hand-written test matrix. Only the shape is validated.
    pub fn from_matrix(matrix: CMat) -> Result<Self> {
        let dim = linalg::check_square(&matrix, "BdG matrix")?;
        if dim % 2 != 0 {
            return Err(Error::Dimension(format!("particle-hole dimension {dim} is odd")));
        }
        let n = dim / 2;
        let h = OneParticleOperator {
            matrix: matrix.slice(s![..n, ..n]).to_owned(),
            dims: vec![n],
            orbitals: 1,
            bc: vec![Boundary::Open],
            is_real: false,
        };
        Ok(Self {
            h,
            delta: PairingOperator::new(matrix.slice(s![..n, n..]).to_owned()),
            mu: 0.0,
            matrix,
            chiral: None,
        })
    }

    /// `H = J A` for a Hermitian `A`.
    pub fn from_a(a: &CMat) -> Result<Self> {
        Self::from_matrix(linalg::j_left(&linalg::hermitian_part(a)))
    }
}

/// Operator-norm defects of the structural symmetries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryDefects {
    /// `‖K conj(H) K + H‖`
    pub phs: f64,
    /// `‖H* - J H J‖`
    pub j_selfadjoint: f64,
    /// `‖L H L + H‖` when a chiral grading is attached.
    pub chiral: Option<f64>,
}

impl SymmetryDefects {
    pub fn within(&self, tol: f64) -> bool {
        self.phs <= tol && self.j_selfadjoint <= tol && self.chiral.is_none_or(|c| c <= tol)
    }
}

/// Build `H = J A_μ` from `(h, Δ, μ)`. `Δ` is replaced by `(Δ + Δᵀ)/2`.
pub fn assemble_bdg(h: OneParticleOperator, delta: PairingOperator, mu: f64) -> Result<BdGOperator> {
    let n = h.dim();
    if delta.matrix.dim() != (n, n) {
        return Err(Error::Dimension(format!(
            "pairing is {:?}, one-particle operator is {n}x{n}",
            delta.matrix.dim()
        )));
    }
    let antisym = (&delta.matrix - &linalg::transpose(&delta.matrix)).mapv(|z| z * 0.5);
    let discarded = linalg::max_abs(&antisym);
    if discarded > 1e-8 {
        warn!("discarding antisymmetric pairing component of size {discarded:e}");
    }
    let sym = (&delta.matrix + &linalg::transpose(&delta.matrix)).mapv(|z| z * 0.5);

    let shift = linalg::identity(n).mapv(|z| z * mu);
    let particle = &h.matrix - &shift;
    let hole = (&linalg::conj(&h.matrix) - &shift).mapv(|z| -z);
    let lower = linalg::conj(&sym).mapv(|z| -z);
    let matrix = linalg::block2(particle.view(), sym.view(), lower.view(), hole.view());
    Ok(BdGOperator {
        h,
        delta: PairingOperator::new(sym),
        mu,
        matrix,
        chiral: None,
    })
}

pub fn check_symmetries(op: &BdGOperator) -> SymmetryDefects {
    let m = op.matrix();
    let phs = linalg::op_norm(&(linalg::k_conj_sandwich(m) + m));
    let j_selfadjoint = linalg::op_norm(&(linalg::dagger(m) - linalg::j_sandwich(m)));
    let chiral = op.chiral().map(|l| linalg::op_norm(&(l.sandwich(m) + m)));
    SymmetryDefects {
        phs,
        j_selfadjoint,
        chiral,
    }
}

/// The 2x2 tangent-bifurcation model `[[μ, iν], [iν, -μ]]`, eigenvalues `±sqrt(μ² - ν²)`.
pub fn toy2(mu: f64, nu: f64) -> BdGOperator {
    let h = OneParticleOperator::from_matrix(Array2::from_elem((1, 1), cr(mu))).expect("1x1 real");
    let delta = PairingOperator::new(Array2::from_elem((1, 1), I * nu));
    assemble_bdg(h, delta, 0.0).expect("dimensions agree")
}

/// The 4x4 quadruple Krein collision model with eigenvalues `±λ ± iν`.
pub fn toy4(lambda: f64, nu: f64) -> BdGOperator {
    if lambda <= 0.0 || nu < 0.0 {
        warn!("toy4 is meant for λ > 0, ν > 0 (got λ = {lambda}, ν = {nu})");
    }
    let h = Array2::from_diag(&Array1::from(vec![cr(lambda), cr(-lambda)]));
    let mut delta = Array2::zeros((2, 2));
    delta[[0, 1]] = I * nu;
    delta[[1, 0]] = I * nu;
    let h = OneParticleOperator::from_matrix(h).expect("diagonal real");
    assemble_bdg(h, PairingOperator::new(delta), 0.0).expect("dimensions agree")
}

/// Serialized form of a matrix with its lattice metadata. Entries are
/// row-major `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dims: Vec<usize>,
    pub orbitals: usize,
    pub bc: Vec<Boundary>,
    pub entries: Vec<Vec<[f64; 2]>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMat, dims: &[usize], orbitals: usize, bc: &[Boundary]) -> Self {
        let entries = m
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        Self {
            dims: dims.to_vec(),
            orbitals,
            bc: bc.to_vec(),
            entries,
        }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        let n = self.entries.len();
        if self.entries.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("matrix rows have unequal length".into()));
        }
        Ok(Array2::from_shape_fn((n, n), |(i, j)| {
            let [re, im] = self.entries[i][j];
            c64::new(re, im)
        }))
    }
}

impl From<&OneParticleOperator> for MatrixJson {
    fn from(h: &OneParticleOperator) -> Self {
        MatrixJson::from_matrix(&h.matrix, &h.dims, h.orbitals, &h.bc)
    }
}
