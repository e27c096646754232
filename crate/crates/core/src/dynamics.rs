//! Time evolution on particle-hole space: `e^{-iHt}` and the Heisenberg
//! flow `B ↦ e^{iHt} B e^{-iHt}` of quadratic observables.

use serde::Serialize;

use crate::bdg::BdGOperator;
use crate::error::Result;
use crate::linalg::{self, c64, cr, CMat, I};

/// Eigenvector condition number above which the Padé route is used.
pub const EIGEN_ROUTE_MAX_CONDITION: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpMethod {
    Eigen,
    Pade,
}

#[derive(Debug, Clone, Serialize)]
pub struct Propagator {
    pub t: f64,
    #[serde(skip)]
    pub u: CMat,
    /// `‖U* J U − J‖`
    pub j_unitarity_defect: f64,
    /// `‖K conj(U) K − U‖`
    pub reality_defect: f64,
    pub method: ExpMethod,
}

impl Propagator {
    pub fn norm(&self) -> f64 {
        linalg::op_norm(&self.u)
    }

    /// `log ‖U_t‖ / t`, which tends to the largest `Im λ` for large `t`.
    pub fn growth_estimate(&self) -> f64 {
        self.norm().ln() / self.t.abs()
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &CMat) -> f64 {
    a.columns().into_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Degree-13 Padé approximant with scaling and squaring.
pub fn expm_pade(a: &CMat) -> Result<CMat> {
    let n = linalg::check_square(a, "matrix")?;
    let norm = one_norm(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.mapv(|z| z / 2f64.powi(s));
    let id = linalg::identity(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let b = |i: usize| cr(PADE13[i]);
    let lin = |x: &CMat, y: &CMat, z: &CMat, w: &CMat, c: [usize; 4]| {
        x.mapv(|v| v * b(c[0])) + y.mapv(|v| v * b(c[1])) + z.mapv(|v| v * b(c[2])) + w.mapv(|v| v * b(c[3]))
    };
    let zero = CMat::zeros((n, n));
    let u_inner = a6.dot(&lin(&a6, &a4, &a2, &zero, [13, 11, 9, 0])) + lin(&a6, &a4, &a2, &id, [7, 5, 3, 1]);
    let u = a.dot(&u_inner);
    let v = a6.dot(&lin(&a6, &a4, &a2, &zero, [12, 10, 8, 0])) + lin(&a6, &a4, &a2, &id, [6, 4, 2, 0]);
    let mut r = linalg::inverse(&(&v - &u))?.dot(&(&v + &u));
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

fn exponential(m: &CMat, scale: c64) -> Result<(CMat, ExpMethod)> {
    let (w, v) = linalg::eig(m)?;
    if linalg::condition_number(&v)? <= EIGEN_ROUTE_MAX_CONDITION {
        let mut ve = v.clone();
        for (mut col, l) in ve.columns_mut().into_iter().zip(w.iter()) {
            let e = (l * scale).exp();
            col.mapv_inplace(|z| z * e);
        }
        Ok((ve.dot(&linalg::inverse(&v)?), ExpMethod::Eigen))
    } else {
        Ok((expm_pade(&m.mapv(|z| z * scale))?, ExpMethod::Pade))
    }
}

/// `e^{-iHt}` with its structural defects.
pub fn propagator(h: &BdGOperator, t: f64) -> Result<Propagator> {
    let (u, method) = exponential(h.matrix(), -I * t)?;
    let j = linalg::j_matrix(h.half_dim());
    let j_unitarity_defect = linalg::op_norm(&(linalg::dagger(&u).dot(&j).dot(&u) - &j));
    let reality_defect = linalg::op_norm(&(linalg::k_conj_sandwich(&u) - &u));
    Ok(Propagator {
        t,
        u,
        j_unitarity_defect,
        reality_defect,
        method,
    })
}

/// `e^{iHt} B e^{-iHt}`.
pub fn heisenberg_evolve(h: &BdGOperator, b: &CMat, t: f64) -> Result<CMat> {
    if b.dim() != h.matrix().dim() {
        return Err(crate::Error::Dimension(format!(
            "observable is {:?}, H is {:?}",
            b.dim(),
            h.matrix().dim()
        )));
    }
    let forward = propagator(h, t)?.u;
    let backward = propagator(h, -t)?.u;
    Ok(backward.dot(b).dot(&forward))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub norm: f64,
    pub j_unitarity_defect: f64,
    pub reality_defect: f64,
}

pub fn trajectory(h: &BdGOperator, times: &[f64]) -> Result<Vec<TrajectoryPoint>> {
    times
        .iter()
        .map(|&t| {
            let p = propagator(h, t)?;
            Ok(TrajectoryPoint {
                t,
                norm: p.norm(),
                j_unitarity_defect: p.j_unitarity_defect,
                reality_defect: p.reality_defect,
            })
        })
        .collect()
}
