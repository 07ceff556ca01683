//! Affine Legendre equivalences `L_F(x,p,z) = (Ax+b, A'p+b', z+c^T x+d)` and
//! the gluing of local models into an atlas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::model::{lift, ChartFile, ChartPoint, ContactPoint, DomainBox, GeneratingChart};
use crate::scalar::Scalar;

/// The data `(A, b, c, d)` of an equivalence, with the derived dual-side data
/// `A' = (A^T)^{-1}`, `b' = A'c`, `c' = A^{-1}b`, `d' = b'^T b − d` fixed at
/// construction.
#[derive(Debug, Clone)]
pub struct AffineLegendreMap<F> {
    pub a: Mat<F>,
    pub b: Vec<F>,
    pub c: Vec<F>,
    pub d: F,
    pub a_prime: Mat<F>,
    pub b_prime: Vec<F>,
    pub c_prime: Vec<F>,
    pub d_prime: F,
}

impl<F: Scalar> AffineLegendreMap<F> {
    pub fn new(a: Mat<F>, b: Vec<F>, c: Vec<F>, d: F) -> Result<Self> {
        let n = a.rows;
        assert_eq!((a.cols, b.len(), c.len()), (n, n, n));
        let a_inv = a
            .inverse()
            .ok_or_else(|| Error::InvalidModel("affine Legendre map: A not invertible".into()))?;
        let a_prime = a_inv.transpose();
        let b_prime = a_prime.matvec(&c);
        let c_prime = a_inv.matvec(&b);
        let d_prime = dot(&b_prime, &b) - d;
        Ok(AffineLegendreMap { a, b, c, d, a_prime, b_prime, c_prime, d_prime })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Mat::identity(n), vec![F::zero(); n], vec![F::zero(); n], F::zero()).unwrap()
    }

    pub fn n(&self) -> usize {
        self.a.rows
    }

    /// `L_F(x, p, z) = (Ax + b, A'p + b', z + c^T x + d)`.
    pub fn apply(&self, pt: &ContactPoint<F>) -> ContactPoint<F> {
        let x = crate::linalg::axpy(F::one(), &self.a.matvec(&pt.x), &self.b);
        let p = crate::linalg::axpy(F::one(), &self.a_prime.matvec(&pt.p), &self.b_prime);
        let z = pt.z + dot(&self.c, &pt.x) + self.d;
        ContactPoint::new(x, p, z)
    }

    /// Dual route `F*(p, z') = (A'p + b', z' + c'^T p + d')`; returns the
    /// image `(p, z')` pair computed without touching the `(x, z)` side.
    pub fn apply_dual(&self, p: &[F], zprime: F) -> (Vec<F>, F) {
        let pv = crate::linalg::axpy(F::one(), &self.a_prime.matvec(p), &self.b_prime);
        let zp = zprime + dot(&self.c_prime, p) + self.d_prime;
        (pv, zp)
    }

    /// `other ∘ self` as a fresh map built from composed `(A, b, c, d)`.
    pub fn compose_after(&self, other: &AffineLegendreMap<F>) -> Result<Self> {
        // z + c1^T x + d1, then + c2^T(A1 x + b1) + d2
        let a = other.a.matmul(&self.a);
        let b = crate::linalg::axpy(F::one(), &other.a.matvec(&self.b), &other.b);
        let c = crate::linalg::axpy(F::one(), &self.a.transpose().matvec(&other.c), &self.c);
        let d = self.d + dot(&other.c, &self.b) + other.d;
        Self::new(a, b, c, d)
    }

    pub fn inverse(&self) -> Result<Self> {
        let a_inv = self.a.inverse().expect("validated at construction");
        // (y - b) = A x  =>  x = A^{-1} y - A^{-1} b; z-side undoes c^T x + d
        let b = crate::linalg::scale(-F::one(), &a_inv.matvec(&self.b));
        let c = crate::linalg::scale(-F::one(), &a_inv.transpose().matvec(&self.c));
        let d = dot(&self.c, &a_inv.matvec(&self.b)) - self.d;
        Self::new(a_inv, b, c, d)
    }
}

/// Contact form `θ = dz − p^T dx` evaluated on a raw tangent vector
/// `(dx, dp, dz)` of `R^{2n+1}` at base point `pt`.
pub fn contact_form<F: Scalar>(pt: &ContactPoint<F>, dx: &[F], dz: F) -> F {
    dz - dot(&pt.p, dx)
}

/// `|θ(dL_F v) − θ(v)|` with the pushforward computed by central finite
/// differences. Exact up to rounding since the map is affine.
pub fn pullback_contact_form_check<F: Scalar>(
    map: &AffineLegendreMap<F>,
    pt: &ContactPoint<F>,
    dx: &[F],
    dp: &[F],
    dz: F,
) -> F {
    let n = pt.n();
    let eps = F::from_f64_lossy(1e-4);
    let shift = |sign: F| -> ContactPoint<F> {
        let x: Vec<F> = (0..n).map(|i| pt.x[i] + sign * eps * dx[i]).collect();
        let p: Vec<F> = (0..n).map(|i| pt.p[i] + sign * eps * dp[i]).collect();
        ContactPoint::new(x, p, pt.z + sign * eps * dz)
    };
    let fwd = map.apply(&shift(F::one()));
    let bwd = map.apply(&shift(-F::one()));
    let two_eps = F::from_f64_lossy(2.0) * eps;
    let dxi: Vec<F> = (0..n).map(|i| (fwd.x[i] - bwd.x[i]) / two_eps).collect();
    let dzi = (fwd.z - bwd.z) / two_eps;
    let image = map.apply(pt);
    (contact_form(&image, &dxi, dzi) - contact_form(pt, dx, dz)).abs()
}

/// Declared gluing between two charts.
#[derive(Debug, Clone)]
pub struct Transition<F> {
    pub src: String,
    pub dst: String,
    /// Overlap box in source-chart coordinates.
    pub overlap: DomainBox,
    pub map: AffineLegendreMap<F>,
}

/// A collection of charts glued by affine Legendre equivalences.
#[derive(Debug, Clone)]
pub struct Atlas<F> {
    pub name: String,
    pub n: usize,
    pub charts: Vec<GeneratingChart>,
    pub transitions: Vec<Transition<F>>,
}

impl<F: Scalar> Atlas<F> {
    pub fn single(name: impl Into<String>, chart: GeneratingChart) -> Self {
        Atlas { name: name.into(), n: chart.n(), charts: vec![chart], transitions: vec![] }
    }

    pub fn chart(&self, name: &str) -> Result<&GeneratingChart> {
        self.charts
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownChart { name: name.to_string() })
    }

    pub fn transition(&self, src: &str, dst: &str) -> Option<&Transition<F>> {
        self.transitions.iter().find(|t| t.src == src && t.dst == dst)
    }

    /// Carry a chart point into another chart: lift, apply the declared map,
    /// and re-express in destination chart coordinates. The re-expressed
    /// point must lift back onto the mapped contact point.
    pub fn transition_point<'a>(
        &'a self,
        src: &ChartPoint<'_, F>,
        dst_chart: &str,
    ) -> Result<ChartPoint<'a, F>> {
        let src_name = &src.chart.name;
        if src_name == dst_chart && self.transition(src_name, dst_chart).is_none() {
            // implicit identity self-transition
            let dst = self.chart(dst_chart)?;
            return Ok(dst.point(src.u.clone()));
        }
        let tr = self
            .transition(src_name, dst_chart)
            .ok_or_else(|| Error::NoTransition { src: src_name.clone(), dst: dst_chart.into() })?;
        if !tr.overlap.contains(&src.u) {
            return Err(Error::OutsideOverlap { src: src_name.clone(), dst: dst_chart.into() });
        }
        let mapped = tr.map.apply(&lift(src)?);
        let dst = self.chart(dst_chart)?;
        let part = &dst.partition;
        let u: Vec<F> = (0..self.n)
            .map(|slot| {
                let ambient = part.slot_ambient(slot);
                if part.slot_is_p(slot) {
                    mapped.p[ambient]
                } else {
                    mapped.x[ambient]
                }
            })
            .collect();
        let relift = lift(&dst.point(u.clone()))
            .map_err(|_| Error::ReexpressionFailure { dst: dst_chart.into() })?;
        let tol = F::from_f64_lossy(1e-9);
        let mut defect = (relift.z - mapped.z).abs();
        for i in 0..self.n {
            defect = defect.max((relift.x[i] - mapped.x[i]).abs());
            defect = defect.max((relift.p[i] - mapped.p[i]).abs());
        }
        if defect > tol {
            return Err(Error::ReexpressionFailure { dst: dst_chart.into() });
        }
        Ok(dst.point(u))
    }

    /// Max residual of the cocycle condition `L_α^γ = L_β^γ ∘ L_α^β` over
    /// Halton samples in declared triple overlaps.
    pub fn cocycle_residual(&self, samples: usize) -> F {
        let mut worst = F::zero();
        for ab in &self.transitions {
            for bg in &self.transitions {
                if bg.src != ab.dst {
                    continue;
                }
                let Some(ag) = self.transition(&ab.src, &bg.dst) else { continue };
                let src_chart = match self.chart(&ab.src) {
                    Ok(c) => c,
                    Err(_) => continue,
                };
                let composed = match ab.map.compose_after(&bg.map) {
                    Ok(m) => m,
                    Err(_) => continue,
                };
                for k in 0..samples {
                    let u: Vec<F> = (0..self.n)
                        .map(|dim| {
                            let t = halton(k + 1, PRIMES[dim % PRIMES.len()]);
                            let lo = ab.overlap.min[dim].max(ag.overlap.min[dim]);
                            let hi = ab.overlap.max[dim].min(ag.overlap.max[dim]);
                            F::from_f64_lossy(lo + t * (hi - lo))
                        })
                        .collect();
                    if !(ab.overlap.contains(&u) && ag.overlap.contains(&u)) {
                        continue;
                    }
                    let Ok(pt) = lift(&src_chart.point(u)) else { continue };
                    let via = composed.apply(&pt);
                    let direct = ag.map.apply(&pt);
                    let mut defect = (via.z - direct.z).abs();
                    for i in 0..self.n {
                        defect = defect.max((via.x[i] - direct.x[i]).abs());
                        defect = defect.max((via.p[i] - direct.p[i]).abs());
                    }
                    worst = worst.max(defect);
                }
            }
        }
        worst
    }
}

const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Halton low-discrepancy sequence member in `[0, 1)`.
pub fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

// ---------------------------------------------------------------------------
// model files

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionFile {
    pub src: String,
    pub dst: String,
    pub overlap: DomainBox,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub name: String,
    pub n: usize,
    pub charts: Vec<ChartFile>,
    #[serde(default)]
    pub transitions: Vec<TransitionFile>,
}

impl ModelFile {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn build<F: Scalar>(&self) -> Result<Atlas<F>> {
        let charts: Vec<GeneratingChart> =
            self.charts.iter().map(|c| c.build(self.n)).collect::<Result<_>>()?;
        let transitions = self
            .transitions
            .iter()
            .map(|t| {
                let rows: Vec<Vec<F>> = t
                    .a
                    .iter()
                    .map(|row| row.iter().map(|&v| F::from_f64_lossy(v)).collect())
                    .collect();
                let map = AffineLegendreMap::new(
                    Mat::from_rows(&rows),
                    t.b.iter().map(|&v| F::from_f64_lossy(v)).collect(),
                    t.c.iter().map(|&v| F::from_f64_lossy(v)).collect(),
                    F::from_f64_lossy(t.d),
                )?;
                Ok(Transition {
                    src: t.src.clone(),
                    dst: t.dst.clone(),
                    overlap: t.overlap.clone(),
                    map,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Atlas { name: self.name.clone(), n: self.n, charts, transitions })
    }
}

/// Load an atlas from a JSON model file on disk.
pub fn load_model<F: Scalar>(path: &std::path::Path) -> Result<Atlas<F>> {
    let json = std::fs::read_to_string(path)?;
    ModelFile::from_json(&json)?.build()
}
