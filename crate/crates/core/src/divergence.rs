//! Canonical divergence `D(p, q) = z(p) + z'(q) − x(p)ᵀ p(q)`, its
//! invariance under affine Legendre equivalence, the weak-contrast derivative
//! identities, and the Bregman specialization on regular potential charts.

use crate::equivalence::{AffineLegendreMap, Atlas};
use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::model::{legendre_transform_regular, lift, ChartPoint, ContactPoint, GeneratingChart};
use crate::scalar::Scalar;

/// The defining formula. `D(p, p) = 0` exactly: `z'` is stored as `pᵀx − z`
/// at construction, and the grouping below makes the two halves cancel
/// bit-for-bit on the diagonal.
pub fn divergence<F: Scalar>(p: &ContactPoint<F>, q: &ContactPoint<F>) -> Result<F> {
    if p.n() != q.n() {
        return Err(Error::ChartMismatch);
    }
    Ok((p.z - dot(&p.x, &q.p)) + q.zprime)
}

/// Divergence between two chart points of the same chart.
pub fn divergence_chart<F: Scalar>(chart: &GeneratingChart, up: &[F], uq: &[F]) -> Result<F> {
    divergence(&lift(&chart.point(up.to_vec()))?, &lift(&chart.point(uq.to_vec()))?)
}

/// Divergence between chart points of a glued model. Both points are carried
/// into one chart (the first point's chart, else the second's) before the
/// formula applies; fails with `ChartMismatch` when no declared transition
/// covers the pair.
pub fn divergence_atlas<F: Scalar>(
    atlas: &Atlas<F>,
    p: &ChartPoint<'_, F>,
    q: &ChartPoint<'_, F>,
) -> Result<F> {
    if p.chart.name == q.chart.name {
        return divergence(&lift(p)?, &lift(q)?);
    }
    if let Ok(q_in_p) = atlas.transition_point(q, &p.chart.name) {
        return divergence(&lift(p)?, &lift(&q_in_p)?);
    }
    if let Ok(p_in_q) = atlas.transition_point(p, &q.chart.name) {
        return divergence(&lift(&p_in_q)?, &lift(q)?);
    }
    Err(Error::ChartMismatch)
}

/// `|D(p, q) − D(L_F p, L_F q)|`.
pub fn divergence_invariance_check<F: Scalar>(
    map: &AffineLegendreMap<F>,
    p: &ContactPoint<F>,
    q: &ContactPoint<F>,
) -> Result<F> {
    let d = divergence(p, q)?;
    let d_mapped = divergence(&map.apply(p), &map.apply(q))?;
    Ok((d - d_mapped).abs())
}

/// Bracketed diagonal derivatives of `D` used by the weak-contrast
/// identities, all evaluated at `p = q = r` by 5-point central differences.
#[derive(Debug, Clone)]
pub struct ContrastDerivatives<F> {
    /// `D[∂_k | −]`
    pub d_k_minus: F,
    /// `D[− | ∂_k]`
    pub d_minus_k: F,
    /// `D[∂_k∂_l | −]`
    pub d_kl_minus: F,
    /// `D[∂_k | ∂_l]`
    pub d_k_l: F,
    /// `D[∂_k∂_l | ∂_m]`
    pub d_kl_m: F,
    /// `D[∂_m | ∂_k∂_l]`
    pub d_m_kl: F,
}

/// 5-point central derivative of `f` along nested direction lists applied to
/// the first and second argument respectively.
fn fd_bracket<F: Scalar>(
    f: &dyn Fn(&[F], &[F]) -> Result<F>,
    p_dirs: &[usize],
    q_dirs: &[usize],
    a: &[F],
    b: &[F],
    step: F,
) -> Result<F> {
    if let Some((&k, rest)) = p_dirs.split_first() {
        let eval = |offset: f64| -> Result<F> {
            let mut a2 = a.to_vec();
            a2[k] = a2[k] + F::from_f64_lossy(offset) * step;
            fd_bracket(f, rest, q_dirs, &a2, b, step)
        };
        let (f2p, f1p, f1m, f2m) = (eval(2.0)?, eval(1.0)?, eval(-1.0)?, eval(-2.0)?);
        let twelve = F::from_f64_lossy(12.0);
        let eight = F::from_f64_lossy(8.0);
        return Ok((f2m - f2p + eight * (f1p - f1m)) / (twelve * step));
    }
    if let Some((&k, rest)) = q_dirs.split_first() {
        let eval = |offset: f64| -> Result<F> {
            let mut b2 = b.to_vec();
            b2[k] = b2[k] + F::from_f64_lossy(offset) * step;
            fd_bracket(f, p_dirs, rest, a, &b2, step)
        };
        let (f2p, f1p, f1m, f2m) = (eval(2.0)?, eval(1.0)?, eval(-1.0)?, eval(-2.0)?);
        let twelve = F::from_f64_lossy(12.0);
        let eight = F::from_f64_lossy(8.0);
        return Ok((f2m - f2p + eight * (f1p - f1m)) / (twelve * step));
    }
    f(a, b)
}

/// All bracketed quantities at the diagonal point `r`, for direction indices
/// `(k, l, m)`.
pub fn contrast_derivatives<F: Scalar>(
    chart: &GeneratingChart,
    r: &[F],
    k: usize,
    l: usize,
    m: usize,
    step: F,
) -> Result<ContrastDerivatives<F>> {
    assert!(step > F::zero());
    let f = |a: &[F], b: &[F]| divergence_chart(chart, a, b);
    Ok(ContrastDerivatives {
        d_k_minus: fd_bracket(&f, &[k], &[], r, r, step)?,
        d_minus_k: fd_bracket(&f, &[], &[k], r, r, step)?,
        d_kl_minus: fd_bracket(&f, &[k, l], &[], r, r, step)?,
        d_k_l: fd_bracket(&f, &[k], &[l], r, r, step)?,
        d_kl_m: fd_bracket(&f, &[k, l], &[m], r, r, step)?,
        d_m_kl: fd_bracket(&f, &[m], &[k, l], r, r, step)?,
    })
}

fn is_positive_definite<F: Scalar>(m: &Mat<F>) -> bool {
    // Cholesky without pivoting; succeeds iff symmetric positive definite.
    let n = m.rows;
    let mut l = Mat::<F>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= F::zero() {
                    return false;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    true
}

/// Bregman form `f(x_p) + φ(p(x_q)) − x_pᵀ p(x_q)` on a `J = ∅` chart with
/// convex potential, computed through the regular Legendre transform. Equals
/// the canonical divergence of the lifted points.
pub fn bregman_specialization<F: Scalar>(
    chart: &GeneratingChart,
    xp: &[F],
    xq: &[F],
) -> Result<F> {
    assert!(chart.is_potential(), "bregman_specialization requires J = ∅");
    for x in [xp, xq] {
        let jet = chart.jet(x)?;
        let n = chart.n();
        let hess = Mat::from_fn(n, n, |i, j| jet.h(i, j));
        if !is_positive_definite(&hess) {
            return Err(Error::SingularHessian {
                cond: hess.cond().to_f64().unwrap_or(f64::INFINITY),
            });
        }
    }
    let f_p = chart.value(xp)?;
    let (p_q, phi_q) = legendre_transform_regular(chart, xq)?;
    Ok(f_p + phi_q - dot(xp, &p_q))
}
