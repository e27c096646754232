//! Explicit Bogoliubov diagonalization of thermodynamically stable BdG
//! operators and the functional calculus it induces.
//!
//! For `A = JH > 0` the matrix `G = A^{1/2} J A^{1/2}` is Hermitian and
//! similar to `H`. Diagonalizing `G` by a unitary `U` with `K Ū K = U` gives
//! the `J`-unitary, real transformation `T = |D|^{-1/2} U A^{1/2}` with
//! `T H T⁻¹ = D`.

use log::warn;
use ndarray::{s, Array1, Axis};
use serde::Serialize;

use crate::bdg::{BdGOperator, ChiralGrading};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, cr, CMat};

/// Strict positivity margin for `A` in `diagonalize`.
pub const POSITIVITY_MARGIN: f64 = 1e-10;

/// Hermitian PSD square root. Eigenvalues down to `-1e-12` are clamped to 0.
pub fn psd_sqrt(a: &CMat) -> Result<CMat> {
    linalg::check_square(a, "A")?;
    let (w, v) = linalg::eigh(a)?;
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-12 {
        return Err(Error::Domain(format!("matrix is not positive semidefinite (min eigenvalue {min:.3e})")));
    }
    Ok(linalg::spectral_synthesis(&v, &w.mapv(|x| cr(x.max(0.0).sqrt()))))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Residuals {
    /// `‖T* J T − J‖`
    pub j_unitarity: f64,
    /// `‖K T̄ K − T‖`
    pub reality: f64,
    /// `‖T H T⁻¹ − D‖`
    pub conjugation: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.j_unitarity.max(self.reality).max(self.conjugation)
    }
}

#[derive(Debug, Clone)]
pub struct BogoliubovTransform {
    pub t: CMat,
    pub t_inv: CMat,
    /// Diagonal of `D = diag(d, -d)`, `d > 0` ascending.
    pub d: Array1<f64>,
    pub residuals: Residuals,
}

impl BogoliubovTransform {
    /// Positive quasiparticle energies `d`.
    pub fn energies(&self) -> Array1<f64> {
        let n = self.d.len() / 2;
        self.d.slice(s![..n]).to_owned()
    }

    pub fn d_matrix(&self) -> CMat {
        linalg::diag(&self.d.mapv(cr))
    }

    /// `T⁻¹ f(D) T`.
    pub fn apply(&self, f: impl Fn(f64) -> c64) -> CMat {
        let mut left = self.t_inv.clone();
        for (mut col, &x) in left.axis_iter_mut(Axis(1)).zip(self.d.iter()) {
            let fx = f(x);
            col.mapv_inplace(|z| z * fx);
        }
        left.dot(&self.t)
    }
}

/// Rotate a vector so its largest-magnitude component is real and positive.
fn fix_phase(mut col: ndarray::ArrayViewMut1<c64>) {
    let pivot = col.iter().cloned().fold(cr(0.0), |best, z| if z.norm() > best.norm() { z } else { best });
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        col.mapv_inplace(|z| z * phase);
    }
}

pub fn diagonalize(h: &BdGOperator) -> Result<BogoliubovTransform> {
    let n = h.half_dim();
    let a = h.a_matrix();
    let (aw, _) = linalg::eigh(&a)?;
    let min = aw.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= POSITIVITY_MARGIN {
        return Err(Error::Stability(format!(
            "A = JH must be strictly positive for Bogoliubov diagonalization; min eigenvalue is {min:.3e}"
        )));
    }
    let m = psd_sqrt(&a)?;
    let g = linalg::hermitian_part(&m.dot(&linalg::j_left(&m)));
    let (gw, gv) = linalg::eigh(&g)?;
    // Sylvester: G is congruent to J, so exactly n eigenvalues are positive.
    if gw[n - 1] >= 0.0 || gw[n] <= 0.0 {
        return Err(Error::Linalg(format!(
            "G has inertia inconsistent with J (eigenvalues {} and {} around zero)",
            gw[n - 1],
            gw[n]
        )));
    }
    let mut w: CMat = CMat::zeros((2 * n, 2 * n));
    let mut d = Array1::zeros(2 * n);
    for i in 0..n {
        let mut v = gv.column(n + i).to_owned();
        fix_phase(v.view_mut());
        w.column_mut(i).assign(&v);
        // K conj(v): swap halves and conjugate; eigenvector for -d_i
        let mut partner = w.column_mut(n + i);
        for r in 0..2 * n {
            partner[r] = v[(r + n) % (2 * n)].conj();
        }
        d[i] = gw[n + i];
        d[n + i] = -gw[n + i];
    }
    let u = linalg::dagger(&w);
    let scale = d.mapv(|x: f64| 1.0 / x.abs().sqrt());
    let mut t = u.dot(&m);
    for (mut row, &sc) in t.axis_iter_mut(Axis(0)).zip(scale.iter()) {
        row.mapv_inplace(|z| z * sc);
    }
    let t_inv = linalg::inverse(&t)?;
    let dm = linalg::diag(&d.mapv(cr));
    let residuals = Residuals {
        j_unitarity: linalg::op_norm(&(linalg::dagger(&t).dot(&linalg::j_left(&t)) - linalg::j_matrix(n))),
        reality: linalg::op_norm(&(linalg::k_conj_sandwich(&t) - &t)),
        conjugation: linalg::op_norm(&(t.dot(h.matrix()).dot(&t_inv) - &dm)),
    };
    if residuals.max() > 1e-8 {
        warn!("Bogoliubov residuals above 1e-8: {residuals:?}");
    }
    Ok(BogoliubovTransform { t, t_inv, d, residuals })
}

/// `f(H) = T⁻¹ f(D) T` for a real function `f`. The Krein symmetry
/// `f(H)* = J f(H) J` is checked and a violation above 1e-8 is logged.
pub fn functional_calculus(h: &BdGOperator, f: impl Fn(f64) -> f64) -> Result<CMat> {
    let tr = diagonalize(h)?;
    let out = tr.apply(|x| cr(f(x)));
    let defect = linalg::op_norm(&(linalg::dagger(&out) - linalg::j_sandwich(&out)));
    if defect > 1e-8 * linalg::op_norm(&out).max(1.0) {
        warn!("f(H)* differs from J f(H) J by {defect:.3e}");
    }
    Ok(out)
}

/// `χ_I(H)` for thermodynamically stable `H` via the Hermitian route
/// `M⁻¹ χ_I(G) M` with `M = A^{1/2}`. Needs only a Hermitian eigensolver,
/// which makes it the method of choice for large samples.
pub fn hermitian_route_projection(h: &BdGOperator, interval: (f64, f64)) -> Result<CMat> {
    let (g, m) = crate::spectral::hermitize(h)?;
    let (w, v) = linalg::eigh(&g)?;
    let margin = crate::spectral::RESOLVENT_MARGIN * w.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for &x in w.iter() {
        if (x - interval.0).abs() < margin || (x - interval.1).abs() < margin {
            return Err(Error::GapViolation {
                eigenvalue: cr(x),
                margin,
                context: format!("interval [{}, {}]", interval.0, interval.1),
            });
        }
    }
    let chi = linalg::spectral_synthesis(&v, &w.mapv(|x| cr(if x > interval.0 && x < interval.1 { 1.0 } else { 0.0 })));
    Ok(linalg::inverse(&m)?.dot(&chi).dot(&m))
}

/// Off-diagonal chiral block of a BdG operator.
///
/// Indices are reordered into the `L = +1` sector (particles, then holes)
/// followed by the `L = -1` sector. In that order the chirally antisymmetric
/// part `(H − LHL)/2` reads `[[0, B], [J₋ B* J₊, 0]]`, with `J±` the
/// restrictions of `J`.
#[derive(Debug, Clone)]
pub struct ChiralBlocks {
    pub b: CMat,
    pub lower: CMat,
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
    /// `‖LHL + H‖` of the input.
    pub chiral_defect: f64,
    pub min_singular_value: f64,
}

impl ChiralBlocks {
    /// `J` restricted to the `+` and `−` sectors.
    pub fn sector_j(&self, n: usize) -> (Array1<f64>, Array1<f64>) {
        let sign = |i: &usize| if *i < n { 1.0 } else { -1.0 };
        (self.plus.iter().map(sign).collect(), self.minus.iter().map(sign).collect())
    }
}

/// Sector split of the particle-hole index set for a grading of length `n`.
pub fn chiral_sectors(grading: &ChiralGrading) -> (Vec<usize>, Vec<usize>) {
    let n = grading.signs.len();
    let plus = (0..2 * n).filter(|&i| grading.signs[i % n] > 0.0).collect();
    let minus = (0..2 * n).filter(|&i| grading.signs[i % n] < 0.0).collect();
    (plus, minus)
}

/// Off-diagonal block of `(H − LHL)/2` without validation.
pub fn chiral_block(matrix: &CMat, grading: &ChiralGrading) -> CMat {
    let (plus, minus) = chiral_sectors(grading);
    let anti = (matrix - &grading.sandwich(matrix)).mapv(|z| z * 0.5);
    anti.select(Axis(0), &plus).select(Axis(1), &minus)
}

pub const CHIRAL_TOL: f64 = 1e-8;

/// Extract `B`. A chiral defect above `tol` (default 1e-8) is tolerated and
/// logged: the antisymmetrized operator is used. Singular `B` is refused.
pub fn enforce_chiral_blocks(h: &BdGOperator, grading: &ChiralGrading, tol: Option<f64>) -> Result<ChiralBlocks> {
    let tol = tol.unwrap_or(CHIRAL_TOL);
    let n = h.half_dim();
    if grading.signs.len() != n {
        return Err(Error::Dimension(format!(
            "grading has {} entries, one-particle dimension is {n}",
            grading.signs.len()
        )));
    }
    let (plus, minus) = chiral_sectors(grading);
    if plus.len() != minus.len() {
        return Err(Error::Validation(format!(
            "chiral sectors have unequal sizes {} and {}",
            plus.len(),
            minus.len()
        )));
    }
    let m = h.matrix();
    let chiral_defect = linalg::op_norm(&(grading.sandwich(m) + m));
    if chiral_defect > tol {
        warn!("chiral symmetry holds only approximately (defect {chiral_defect:.3e}); using the antisymmetrized operator");
    }
    let anti = (m - &grading.sandwich(m)).mapv(|z| z * 0.5);
    let b = anti.select(Axis(0), &plus).select(Axis(1), &minus);
    let lower = anti.select(Axis(0), &minus).select(Axis(1), &plus);
    let min_singular_value = linalg::min_singular_value(&b)?;
    let scale = linalg::op_norm(m).max(1.0);
    if min_singular_value <= 1e-12 * scale {
        return Err(Error::Domain(format!(
            "chiral block is singular (min singular value {min_singular_value:.3e}): gapless chiral operator"
        )));
    }
    Ok(ChiralBlocks {
        b,
        lower,
        plus,
        minus,
        chiral_defect,
        min_singular_value,
    })
}
