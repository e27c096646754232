//! Dense complex linear algebra helpers shared by every module.
//!
//! Particle-hole matrices are `2n x 2n` with the particle block first. The
//! fundamental symmetry `J = diag(1, -1)` and the real structure
//! `K = [[0, 1], [1, 0]]` are applied as block operations and never stored.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{Eig, EigVals, Eigh, Inverse, SVD, UPLO};

use crate::error::{Error, Result};

#[allow(non_camel_case_types)]
pub type c64 = num_complex::Complex64;

pub type CMat = Array2<c64>;

pub const I: c64 = c64::new(0.0, 1.0);

pub fn cr(re: f64) -> c64 {
    c64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    Array2::eye(n)
}

pub fn dagger(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

pub fn conj(m: &CMat) -> CMat {
    m.mapv(|z| z.conj())
}

pub fn transpose(m: &CMat) -> CMat {
    m.t().to_owned()
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Spectral (operator 2-) norm.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    match m.svd(false, false) {
        Ok((_, s, _)) => s.iter().cloned().fold(0.0, f64::max),
        // Frobenius bounds the operator norm from above.
        Err(_) => m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
    }
}

pub fn singular_values(m: &CMat) -> Result<Array1<f64>> {
    let (_, s, _) = m.svd(false, false)?;
    Ok(s)
}

pub fn min_singular_value(m: &CMat) -> Result<f64> {
    Ok(singular_values(m)?.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Ratio of extreme singular values, infinite for singular input.
pub fn condition_number(m: &CMat) -> Result<f64> {
    let s = singular_values(m)?;
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + &dagger(m)).mapv(|z| z * 0.5)
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    Ok(m.inv()?)
}

/// General eigendecomposition: eigenvalues and right eigenvectors (columns).
pub fn eig(m: &CMat) -> Result<(Array1<c64>, CMat)> {
    let (w, v) = m.eig()?;
    Ok((w, v))
}

/// Eigenvalues only, in LAPACK order.
pub fn eigvals(m: &CMat) -> Result<Array1<c64>> {
    Ok(m.eigvals()?)
}

/// Hermitian eigendecomposition with ascending eigenvalues. Only the upper
/// triangle is read, so the input is symmetrized first.
pub fn eigh(m: &CMat) -> Result<(Array1<f64>, CMat)> {
    // LAPACK sees a row-major array as its transpose, which for a Hermitian
    // matrix is the conjugate; hand it column-major storage instead.
    let mut h = Array2::zeros(m.dim().f());
    h.assign(&hermitian_part(m));
    let (w, v) = h.eigh(UPLO::Upper)?;
    Ok((w, v))
}

/// `f(A)` for Hermitian `A` via its eigendecomposition.
pub fn hermitian_function(a: &CMat, f: impl Fn(f64) -> f64) -> Result<CMat> {
    let (w, v) = eigh(a)?;
    Ok(spectral_synthesis(&v, &w.mapv(|x| cr(f(x)))))
}

/// `V diag(d) V*` for unitary `V`.
pub fn spectral_synthesis(v: &CMat, d: &Array1<c64>) -> CMat {
    let mut vd = v.clone();
    for (mut col, &x) in vd.axis_iter_mut(Axis(1)).zip(d.iter()) {
        col.mapv_inplace(|z| z * x);
    }
    vd.dot(&dagger(v))
}

pub fn diag(d: &Array1<c64>) -> CMat {
    Array2::from_diag(d)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}

pub fn trace(m: &CMat) -> c64 {
    m.diag().sum()
}

/// Half the dimension of a particle-hole matrix.
fn half(m: &CMat) -> usize {
    debug_assert_eq!(m.nrows() % 2, 0);
    m.nrows() / 2
}

/// `J M` : negate the hole rows.
pub fn j_left(m: &CMat) -> CMat {
    let n = half(m);
    let mut out = m.clone();
    out.slice_mut(s![n.., ..]).mapv_inplace(|z| -z);
    out
}

/// `M J` : negate the hole columns.
pub fn j_right(m: &CMat) -> CMat {
    let n = m.ncols() / 2;
    let mut out = m.clone();
    out.slice_mut(s![.., n..]).mapv_inplace(|z| -z);
    out
}

pub fn j_sandwich(m: &CMat) -> CMat {
    j_right(&j_left(m))
}

/// `K conj(M) K` : swap particle and hole blocks and conjugate.
pub fn k_conj_sandwich(m: &CMat) -> CMat {
    let n = half(m);
    let dim = 2 * n;
    Array2::from_shape_fn((dim, dim), |(i, j)| m[[(i + n) % dim, (j + n) % dim]].conj())
}

/// Dense `J` for a particle-hole space of one-particle dimension `n`.
pub fn j_matrix(n: usize) -> CMat {
    let mut d = Array1::from_elem(2 * n, cr(1.0));
    d.slice_mut(s![n..]).fill(cr(-1.0));
    diag(&d)
}

/// Dense `K` for a particle-hole space of one-particle dimension `n`.
pub fn k_matrix(n: usize) -> CMat {
    let dim = 2 * n;
    Array2::from_shape_fn((dim, dim), |(i, j)| if (i + n) % dim == j { cr(1.0) } else { cr(0.0) })
}

/// The real symplectic form `I = [[0, -1], [1, 0]]`.
pub fn symplectic_form(n: usize) -> CMat {
    let dim = 2 * n;
    let mut m = Array2::zeros((dim, dim));
    for i in 0..n {
        m[[i, n + i]] = cr(-1.0);
        m[[n + i, i]] = cr(1.0);
    }
    m
}

/// The Cayley transform `C = [[1, -i], [1, i]] / sqrt(2)`.
pub fn cayley(n: usize) -> CMat {
    let dim = 2 * n;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = Array2::zeros((dim, dim));
    for i in 0..n {
        m[[i, i]] = cr(r);
        m[[i, n + i]] = -I * r;
        m[[n + i, i]] = cr(r);
        m[[n + i, n + i]] = I * r;
    }
    m
}

/// Assemble `[[a, b], [c, d]]`.
pub fn block2(a: ArrayView2<c64>, b: ArrayView2<c64>, c: ArrayView2<c64>, d: ArrayView2<c64>) -> CMat {
    let (n, m) = (a.nrows(), a.ncols());
    let mut out = Array2::zeros((n + c.nrows(), m + b.ncols()));
    out.slice_mut(s![..n, ..m]).assign(&a);
    out.slice_mut(s![..n, m..]).assign(&b);
    out.slice_mut(s![n.., ..m]).assign(&c);
    out.slice_mut(s![n.., m..]).assign(&d);
    out
}

pub fn check_square(m: &CMat, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// Greedy nearest-neighbour matching of two multisets of complex numbers.
/// Returns the largest pair distance, or infinity on a size mismatch.
pub fn multiset_distance(a: &[c64], b: &[c64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].re.total_cmp(&a[j].re).then(a[i].im.total_cmp(&a[j].im)));
    let mut worst = 0.0f64;
    for i in order {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (j, z) in b.iter().enumerate() {
            if !used[j] {
                let d = (a[i] - z).norm();
                if d < best_d {
                    best_d = d;
                    best = Some(j);
                }
            }
        }
        if let Some(j) = best {
            used[j] = true;
        }
        worst = worst.max(best_d);
    }
    worst
}
