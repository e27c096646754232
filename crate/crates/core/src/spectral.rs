//! Eigenanalysis of BdG operators in the Krein space `(ℂ^{2n}, J)`.
//!
//! `H` is not normal, so everything goes through one full eigendecomposition
//! `H = S Λ S⁻¹`. Spectral idempotents are assembled from it directly; the
//! resolvent route is only used as an independent check in the tests.

use std::cmp::Ordering;

use log::{info, warn};
use ndarray::{Array1, Axis};
use serde::Serialize;

use crate::bdg::BdGOperator;
use crate::bogoliubov::psd_sqrt;
use crate::error::{Error, Result};
use crate::linalg::{self, c64, cr, CMat};

/// Default relative tolerance for snapping and stability decisions.
pub const DEFAULT_REL_TOL: f64 = 1e-9;
/// Endpoints of spectral intervals must stay this far (relative) from σ(H).
pub const RESOLVENT_MARGIN: f64 = 1e-6;
/// Default relative gap that separates two bands.
pub const DEFAULT_GAP_THRESHOLD: f64 = 1e-5;
/// Above this the eigenvector matrix is treated as numerically defective.
pub const ILL_CONDITIONED: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KreinSignature {
    Positive,
    Negative,
    Indefinite,
    Nonreal,
}

impl KreinSignature {
    pub fn as_i8(self) -> i8 {
        match self {
            KreinSignature::Positive => 1,
            KreinSignature::Negative => -1,
            KreinSignature::Indefinite | KreinSignature::Nonreal => 0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            KreinSignature::Positive => "+1",
            KreinSignature::Negative => "-1",
            KreinSignature::Indefinite => "indefinite",
            KreinSignature::Nonreal => "nonreal",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Sorted by `(Re λ, Im λ)`; real and imaginary parts below the tolerance
    /// are zeroed.
    pub eigenvalues: Vec<c64>,
    /// Right eigenvectors as columns, in the order of `eigenvalues`.
    pub right_vectors: CMat,
    pub inverse: CMat,
    pub signatures: Vec<KreinSignature>,
    pub max_growth_rate: f64,
    pub condition_number: f64,
    pub ill_conditioned: bool,
    /// Number of eigenvalues whose small imaginary part was dropped, and the
    /// largest such part.
    pub snapped: usize,
    pub max_snapped_imag: f64,
    pub tol: f64,
}

impl SpectralData {
    /// `S Λ S⁻¹` with the snapped eigenvalues.
    pub fn reconstruct(&self) -> CMat {
        let mut sl = self.right_vectors.clone();
        for (mut col, &l) in sl.axis_iter_mut(Axis(1)).zip(self.eigenvalues.iter()) {
            col.mapv_inplace(|z| z * l);
        }
        sl.dot(&self.inverse)
    }

    /// `S diag(w) S⁻¹`.
    pub fn synthesize(&self, weights: &[c64]) -> CMat {
        let mut sw = self.right_vectors.clone();
        for (mut col, &w) in sw.axis_iter_mut(Axis(1)).zip(weights.iter()) {
            col.mapv_inplace(|z| z * w);
        }
        sw.dot(&self.inverse)
    }

    pub fn is_real(&self) -> bool {
        self.eigenvalues.iter().all(|z| z.im == 0.0)
    }
}

pub fn default_tol(h: &BdGOperator) -> f64 {
    DEFAULT_REL_TOL * linalg::op_norm(h.matrix()).max(f64::MIN_POSITIVE)
}

fn cmp_complex(a: &c64, b: &c64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Group indices of sorted real values into clusters whose consecutive
/// spacing is at most `gap`.
fn clusters(values: &[f64], gap: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match out.last_mut() {
            Some(c) if values[i] - values[*c.last().unwrap()] <= gap => c.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// Sign of the Krein form on the span of the given (normalized) vectors.
fn cluster_signature(vectors: &CMat) -> KreinSignature {
    let gram = vectors.t().mapv(|z| z.conj()).dot(&linalg::j_left(vectors));
    let (w, _) = match linalg::eigh(&gram) {
        Ok(x) => x,
        Err(_) => return KreinSignature::Indefinite,
    };
    let eps = 1e-8;
    if w.iter().all(|&x| x > eps) {
        KreinSignature::Positive
    } else if w.iter().all(|&x| x < -eps) {
        KreinSignature::Negative
    } else {
        KreinSignature::Indefinite
    }
}

/// Full eigendecomposition with Krein signatures. `tol` defaults to
/// `1e-9 ‖H‖`.
pub fn spectrum(h: &BdGOperator, tol: Option<f64>) -> Result<SpectralData> {
    let tol = tol.unwrap_or_else(|| default_tol(h));
    let (w, v) = linalg::eig(h.matrix())?;
    let n = w.len();
    let mut order: Vec<usize> = (0..n).collect();
    // snap before sorting so conjugate partners of a real eigenvalue stay adjacent
    let snapped_w: Vec<c64> = w.iter().map(|&z| snap(z, tol)).collect();
    order.sort_by(|&i, &j| cmp_complex(&snapped_w[i], &snapped_w[j]));
    let eigenvalues: Vec<c64> = order.iter().map(|&i| snapped_w[i]).collect();
    let mut s = v.select(Axis(1), &order);
    for mut col in s.axis_iter_mut(Axis(1)) {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.mapv_inplace(|z| z / norm);
        }
    }
    let mut snapped = 0;
    let mut max_snapped_imag = 0.0f64;
    for z in w.iter() {
        if z.im != 0.0 && z.im.abs() < tol {
            snapped += 1;
            max_snapped_imag = max_snapped_imag.max(z.im.abs());
        }
    }
    if snapped > 0 {
        info!("snapped {snapped} eigenvalues to the real axis (largest |Im| = {max_snapped_imag:.3e})");
    }
    let condition_number = linalg::condition_number(&s)?;
    let ill_conditioned = !(condition_number <= ILL_CONDITIONED);
    if ill_conditioned {
        warn!("eigenvector matrix is ill-conditioned (cond = {condition_number:.3e}); the operator may be defective");
    }
    let inverse = linalg::inverse(&s)?;

    let norm = linalg::op_norm(h.matrix());
    let mut signatures = vec![KreinSignature::Nonreal; n];
    let real_idx: Vec<usize> = (0..n).filter(|&i| eigenvalues[i].im == 0.0).collect();
    let real_vals: Vec<f64> = real_idx.iter().map(|&i| eigenvalues[i].re).collect();
    let degeneracy = (1e-8 * norm).max(tol);
    for c in clusters(&real_vals, degeneracy) {
        let cols: Vec<usize> = c.iter().map(|&i| real_idx[i]).collect();
        let sig = cluster_signature(&s.select(Axis(1), &cols));
        for &i in &cols {
            signatures[i] = sig;
        }
    }
    let max_growth_rate = eigenvalues.iter().map(|z| z.im).fold(0.0, f64::max);
    Ok(SpectralData {
        eigenvalues,
        right_vectors: s,
        inverse,
        signatures,
        max_growth_rate,
        condition_number,
        ill_conditioned,
        snapped,
        max_snapped_imag,
        tol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityVerdict {
    pub dynamically_stable: bool,
    pub thermodynamically_stable: bool,
    pub max_growth_rate: f64,
    pub definitizable_hint: bool,
    pub min_a_eigenvalue: f64,
    pub tol: f64,
}

/// Dynamical (real spectrum) and thermodynamical (`A ≥ 0`) stability.
///
/// `definitizable_hint` only checks that every real band carries a definite
/// Krein signature; it is not a proof of definitizability.
pub fn classify_stability(h: &BdGOperator, tol: Option<f64>) -> Result<StabilityVerdict> {
    let tol = tol.unwrap_or_else(|| default_tol(h));
    let data = spectrum(h, Some(tol))?;
    let (a_eigs, _) = linalg::eigh(&h.a_matrix())?;
    let min_a = a_eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let dynamically_stable = data.eigenvalues.iter().all(|z| z.im.abs() <= tol);
    let thermodynamically_stable = min_a >= -tol;
    if min_a > tol && !dynamically_stable {
        // strictly positive A forces a real spectrum
        warn!("A > 0 (min {min_a:.3e}) but growth rate {:.3e}", data.max_growth_rate);
        debug_assert!(dynamically_stable, "positive A with nonreal spectrum");
    }
    let definitizable_hint = dynamically_stable && {
        let norm = linalg::op_norm(h.matrix()).max(f64::MIN_POSITIVE);
        let vals: Vec<f64> = data.eigenvalues.iter().map(|z| z.re).collect();
        clusters(&vals, DEFAULT_GAP_THRESHOLD * norm).iter().all(|c| {
            let first = data.signatures[c[0]];
            first != KreinSignature::Indefinite && c.iter().all(|&i| data.signatures[i] == first)
        })
    };
    Ok(StabilityVerdict {
        dynamically_stable,
        thermodynamically_stable,
        max_growth_rate: data.max_growth_rate,
        definitizable_hint,
        min_a_eigenvalue: min_a,
        tol,
    })
}

#[derive(Debug, Clone)]
pub struct BandIdempotent {
    pub interval: (f64, f64),
    pub q: CMat,
    pub range_projection: CMat,
    pub rank: usize,
}

impl BandIdempotent {
    /// `‖Q² − Q‖`.
    pub fn idempotency_defect(&self) -> f64 {
        linalg::op_norm(&(self.q.dot(&self.q) - &self.q))
    }

    /// `‖Q* − J Q J‖`, which vanishes for bands of real spectrum.
    pub fn krein_defect(&self) -> f64 {
        linalg::op_norm(&(linalg::dagger(&self.q) - linalg::j_sandwich(&self.q)))
    }

    /// Orthonormal basis of `ran Q` as columns.
    pub fn range_basis(&self) -> Result<CMat> {
        orthonormal_range(&self.range_projection)
    }
}

/// Orthogonal projection onto the range of an idempotent: `Q (1 + Q − Q*)⁻¹`.
pub fn range_projection(q: &CMat) -> Result<CMat> {
    let n = q.nrows();
    let x = linalg::identity(n) + q - &linalg::dagger(q);
    Ok(linalg::hermitian_part(&q.dot(&linalg::inverse(&x)?)))
}

/// Eigenvectors of an orthogonal projection with eigenvalue above 1/2.
pub fn orthonormal_range(p: &CMat) -> Result<CMat> {
    let (w, v) = linalg::eigh(p)?;
    let cols: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.5).collect();
    Ok(v.select(Axis(1), &cols))
}

/// Disc having the interval as diameter.
fn in_disc(z: c64, interval: (f64, f64)) -> f64 {
    let c = 0.5 * (interval.0 + interval.1);
    let r = 0.5 * (interval.1 - interval.0);
    (z - c).norm() - r
}

/// Spectral idempotent of the part of σ(H) enclosed by the circle through
/// the interval endpoints.
pub fn riesz_from(data: &SpectralData, interval: (f64, f64), norm: f64) -> Result<BandIdempotent> {
    if !(interval.0 < interval.1) {
        return Err(Error::Validation(format!("empty interval {interval:?}")));
    }
    let margin = RESOLVENT_MARGIN * norm.max(f64::MIN_POSITIVE);
    let mut weights = Vec::with_capacity(data.eigenvalues.len());
    for &z in &data.eigenvalues {
        let d = in_disc(z, interval);
        if d.abs() < margin {
            return Err(Error::GapViolation {
                eigenvalue: z,
                margin,
                context: format!("contour around [{}, {}]", interval.0, interval.1),
            });
        }
        weights.push(if d < 0.0 { cr(1.0) } else { cr(0.0) });
    }
    let rank = weights.iter().filter(|w| w.re > 0.5).count();
    let q = data.synthesize(&weights);
    let range_projection = range_projection(&q)?;
    Ok(BandIdempotent {
        interval,
        q,
        range_projection,
        rank,
    })
}

pub fn riesz_projection(h: &BdGOperator, interval: (f64, f64)) -> Result<BandIdempotent> {
    let data = spectrum(h, None)?;
    riesz_from(&data, interval, linalg::op_norm(h.matrix()))
}

#[derive(Debug, Clone)]
pub struct Band {
    /// Positive bands are numbered `1, 2, …` upwards, negative ones `-1, -2, …`
    /// downwards; a band containing or straddling 0 gets index 0.
    pub index: i32,
    pub contains_zero: bool,
    pub eigenvalues: Vec<f64>,
    pub idempotent: BandIdempotent,
}

#[derive(Debug, Clone)]
pub struct BandStructure {
    pub bands: Vec<Band>,
    /// `max_j ‖K Q̄_j K − Q_{−j}‖`.
    pub phs_defect: f64,
}

impl BandStructure {
    pub fn band(&self, index: i32) -> Option<&Band> {
        self.bands.iter().find(|b| b.index == index)
    }

    pub fn positive(&self) -> impl Iterator<Item = &Band> {
        self.bands.iter().filter(|b| b.index > 0)
    }
}

/// Label real eigenvalues by band; `None` for nonreal ones.
pub fn band_labels(eigenvalues: &[c64], gap: f64) -> Vec<Option<i32>> {
    let real_idx: Vec<usize> = (0..eigenvalues.len()).filter(|&i| eigenvalues[i].im == 0.0).collect();
    let vals: Vec<f64> = real_idx.iter().map(|&i| eigenvalues[i].re).collect();
    let cs = clusters(&vals, gap);
    let mut labels = vec![None; eigenvalues.len()];
    let zero_band = cs.iter().position(|c| vals[c[0]] <= 0.0 && vals[*c.last().unwrap()] >= 0.0);
    let first_pos = cs.iter().position(|c| vals[c[0]] > 0.0).unwrap_or(cs.len());
    let last_neg = cs.iter().rposition(|c| vals[*c.last().unwrap()] < 0.0);
    for (ci, c) in cs.iter().enumerate() {
        let idx = if Some(ci) == zero_band {
            0
        } else if ci >= first_pos {
            (ci - first_pos + 1) as i32
        } else {
            -((last_neg.unwrap() - ci + 1) as i32)
        };
        for &i in c {
            labels[real_idx[i]] = Some(idx);
        }
    }
    labels
}

/// A gap-separated cluster `[lo, hi]` of real eigenvalues and the contour
/// interval around it, whose endpoints sit in the middle of the neighbouring
/// gaps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandInterval {
    pub index: i32,
    pub lo: f64,
    pub hi: f64,
    pub interval: (f64, f64),
}

/// Cluster real values into bands and pick contour intervals. Outer bands
/// are padded by at least `norm / 2`.
pub fn band_intervals(values: &[f64], gap: f64, norm: f64) -> Vec<BandInterval> {
    let spans = clusters(values, gap)
        .into_iter()
        .map(|c| (values[c[0]], values[*c.last().unwrap()]))
        .collect();
    intervals_from_spans(spans, norm)
}

/// Bands of a family of spectra (one sorted list per parameter point, all
/// of equal length): the `r`-th eigenvalues over all points span
/// `[lo_r, hi_r]`, and consecutive spans closer than `gap` are merged.
pub fn ordinal_band_intervals(spectra: &[Vec<f64>], gap: f64, norm: f64) -> Result<Vec<BandInterval>> {
    let m = spectra.first().map_or(0, |s| s.len());
    if spectra.iter().any(|s| s.len() != m) {
        return Err(Error::Dimension("spectra of unequal length".into()));
    }
    let mut spans: Vec<(f64, f64)> = Vec::new();
    for r in 0..m {
        let lo = spectra.iter().map(|s| s[r]).fold(f64::INFINITY, f64::min);
        let hi = spectra.iter().map(|s| s[r]).fold(f64::NEG_INFINITY, f64::max);
        match spans.last_mut() {
            Some(last) if lo - last.1 <= gap => last.1 = last.1.max(hi),
            _ => spans.push((lo, hi)),
        }
    }
    Ok(intervals_from_spans(spans, norm))
}

/// Number disjoint sorted spans by the sign convention of `band_labels` and
/// place contour endpoints in the middle of the gaps.
fn intervals_from_spans(spans: Vec<(f64, f64)>, norm: f64) -> Vec<BandInterval> {
    let zero = spans.iter().position(|&(lo, hi)| lo <= 0.0 && hi >= 0.0);
    let first_pos = spans.iter().position(|&(lo, _)| lo > 0.0).unwrap_or(spans.len());
    let last_neg = spans.iter().rposition(|&(_, hi)| hi < 0.0);
    let pad = 0.5 * norm.max(f64::MIN_POSITIVE);
    (0..spans.len())
        .map(|pos| {
            let (lo, hi) = spans[pos];
            let index = if Some(pos) == zero {
                0
            } else if pos >= first_pos {
                (pos - first_pos + 1) as i32
            } else {
                -((last_neg.unwrap() - pos + 1) as i32)
            };
            let gap_below = (pos > 0).then(|| lo - spans[pos - 1].1);
            let gap_above = (pos + 1 < spans.len()).then(|| spans[pos + 1].0 - hi);
            let a = match gap_below {
                Some(g) => lo - 0.5 * g,
                None => lo - gap_above.map_or(pad, |g| g.max(pad)),
            };
            let b = match gap_above {
                Some(g) => hi + 0.5 * g,
                None => hi + gap_below.map_or(pad, |g| g.max(pad)),
            };
            BandInterval { index, lo, hi, interval: (a, b) }
        })
        .collect()
}

/// Cluster a real spectrum into gap-separated bands and build the
/// idempotent of each. `gap` defaults to `1e-5 ‖H‖`.
pub fn band_structure(h: &BdGOperator, gap: Option<f64>) -> Result<BandStructure> {
    let norm = linalg::op_norm(h.matrix()).max(f64::MIN_POSITIVE);
    let data = spectrum(h, None)?;
    band_structure_from(&data, norm, gap)
}

pub fn band_structure_from(data: &SpectralData, norm: f64, gap: Option<f64>) -> Result<BandStructure> {
    if !data.is_real() {
        return Err(Error::Stability(format!(
            "band structure needs a real spectrum; growth rate {:.3e}",
            data.max_growth_rate
        )));
    }
    let gap = gap.unwrap_or(DEFAULT_GAP_THRESHOLD * norm);
    if 0.5 * gap <= RESOLVENT_MARGIN * norm {
        warn!("gap threshold {gap:.3e} is below twice the resolvent margin; band contours may fail");
    }
    let vals: Vec<f64> = data.eigenvalues.iter().map(|z| z.re).collect();
    let mut bands = Vec::new();
    for bi in band_intervals(&vals, gap, norm) {
        let idempotent = riesz_from(data, bi.interval, norm)?;
        bands.push(Band {
            index: bi.index,
            contains_zero: bi.index == 0,
            eigenvalues: vals.iter().cloned().filter(|&x| x >= bi.lo && x <= bi.hi).collect(),
            idempotent,
        });
    }
    if bands.iter().any(|b| b.contains_zero) {
        warn!("no spectral gap at 0: the band containing 0 is indexed 0");
    }
    let mut phs_defect = 0.0f64;
    for b in &bands {
        if let Some(partner) = bands.iter().find(|p| p.index == -b.index) {
            let d = linalg::op_norm(&(linalg::k_conj_sandwich(&b.idempotent.q) - &partner.idempotent.q));
            phs_defect = phs_defect.max(d);
        }
    }
    if phs_defect > 1e-8 {
        warn!("particle-hole pairing of band idempotents off by {phs_defect:.3e}");
    }
    Ok(BandStructure { bands, phs_defect })
}

/// `G = A^{1/2} J A^{1/2}` and `M = A^{1/2}` with `M H M⁻¹ = G`.
pub fn hermitize(h: &BdGOperator) -> Result<(CMat, CMat)> {
    let a = h.a_matrix();
    let (w, _) = linalg::eigh(&a)?;
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 1e-10 {
        return Err(Error::Stability(format!(
            "A = JH must be strictly positive, min eigenvalue is {min:.3e}"
        )));
    }
    let m = psd_sqrt(&a)?;
    let g = linalg::hermitian_part(&m.dot(&linalg::j_left(&m)));
    Ok((g, m))
}

fn snap(z: c64, tol: f64) -> c64 {
    let re = if z.re.abs() < tol { 0.0 } else { z.re };
    let im = if z.im.abs() < tol { 0.0 } else { z.im };
    c64::new(re, im)
}

/// Snapped eigenvalues sorted like `spectrum`, without eigenvectors. `tol`
/// defaults to `1e-9 ‖H‖`.
pub fn eigenvalues_with_tol(h: &BdGOperator, tol: Option<f64>) -> Result<Vec<c64>> {
    let tol = tol.unwrap_or_else(|| default_tol(h));
    let mut w: Vec<c64> = linalg::eigvals(h.matrix())?.iter().map(|&z| snap(z, tol)).collect();
    w.sort_by(cmp_complex);
    Ok(w)
}

/// Eigenvalues as a plain vector (sorted like `spectrum`).
pub fn eigenvalues(h: &BdGOperator) -> Result<Array1<c64>> {
    Ok(Array1::from(eigenvalues_with_tol(h, None)?))
}

/// Largest `Im λ` after snapping; cheaper than `spectrum` when only the
/// growth rate is needed.
pub fn growth_rate(h: &BdGOperator, tol: Option<f64>) -> Result<f64> {
    Ok(eigenvalues_with_tol(h, tol)?.iter().map(|z| z.im).fold(0.0, f64::max))
}
