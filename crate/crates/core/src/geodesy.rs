//! e/m-curves traced by numerical continuation, orthogonality predicates,
//! the extended Pythagorean identity, and the projection solver.
//!
//! An m-curve is the preimage of a straight line under the m-Lagrange map
//! (projection of the lifted model to `R^n_p`); an e-curve likewise on the
//! x-side. Continuation runs on the bordered system so folds at caustic
//! crossings are passed without branch jumping.

use crate::divergence::divergence;
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expression, Var};
use crate::linalg::{dot, norm, Mat};
use crate::model::{e_legendre, lift, m_legendre, ChartPoint, ContactPoint, DomainBox, GeneratingChart};
use crate::scalar::Scalar;
use crate::tensors::{frames, rank_tol};

/// Which Lagrange map a curve lives under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    E,
    M,
}

/// One accepted continuation sample.
#[derive(Debug, Clone)]
pub struct CurveSample<F> {
    /// Line parameter.
    pub s: F,
    /// Chart coordinates.
    pub u: Vec<F>,
}

/// Location where the trace crossed the relevant caustic (sign change of the
/// frame-matrix determinant), linearly interpolated between samples.
#[derive(Debug, Clone)]
pub struct CausticCrossing<F> {
    pub s: F,
    pub u: Vec<F>,
}

/// A traced e- or m-curve: line data plus ordered samples.
#[derive(Debug, Clone)]
pub struct EMCurve<'a, F> {
    pub kind: CurveKind,
    pub chart: &'a GeneratingChart,
    /// Point on the line in `R^n_x` (e) or `R^n_p` (m).
    pub base: Vec<F>,
    /// Unit direction of the line.
    pub dir: Vec<F>,
    pub samples: Vec<CurveSample<F>>,
    pub crossings: Vec<CausticCrossing<F>>,
}

fn image<F: Scalar>(kind: CurveKind, cp: &ChartPoint<'_, F>) -> Result<Vec<F>> {
    Ok(match kind {
        CurveKind::E => e_legendre(cp)?.0,
        CurveKind::M => m_legendre(cp)?.0,
    })
}

fn image_jacobian<F: Scalar>(kind: CurveKind, cp: &ChartPoint<'_, F>) -> Result<Mat<F>> {
    let fr = frames(cp)?;
    Ok(match kind {
        CurveKind::E => fr.phi,
        CurveKind::M => fr.phi_prime,
    })
}

impl<'a, F: Scalar> EMCurve<'a, F> {
    /// Max over samples of `‖image(u) − base − s·dir‖_∞`.
    pub fn line_defect(&self) -> Result<F> {
        let mut worst = F::zero();
        for sample in &self.samples {
            let img = image(self.kind, &self.chart.point(sample.u.clone()))?;
            for i in 0..img.len() {
                let want = self.base[i] + sample.s * self.dir[i];
                worst = worst.max((img[i] - want).abs());
            }
        }
        Ok(worst)
    }

    /// Line parameter and off-line residual of an arbitrary chart point.
    pub fn locate(&self, u: &[F]) -> Result<(F, F)> {
        let img = image(self.kind, &self.chart.point(u.to_vec()))?;
        let v = crate::linalg::sub(&img, &self.base);
        let s = dot(&v, &self.dir);
        let mut res = F::zero();
        for i in 0..v.len() {
            res = res.max((v[i] - s * self.dir[i]).abs());
        }
        Ok((s, res))
    }
}

const MIN_STEP: f64 = 1e-12;
const CORRECTOR_TOL: f64 = 1e-11;

/// Trace the m-curve through `start` along `dir`, covering line parameters
/// from 0 toward `s1` until `s` leaves `[s0, s1]` (requires `s0 ≤ 0 < s1`).
/// Folds at the m-caustic reverse `s` and are recorded as crossings.
pub fn trace_m_curve<'a, F: Scalar>(
    chart: &'a GeneratingChart,
    start: &[F],
    dir: &[F],
    span: (F, F),
    steps: usize,
) -> Result<EMCurve<'a, F>> {
    trace(chart, CurveKind::M, start, dir, span, steps)
}

/// e-side mirror of [`trace_m_curve`].
pub fn trace_e_curve<'a, F: Scalar>(
    chart: &'a GeneratingChart,
    start: &[F],
    dir: &[F],
    span: (F, F),
    steps: usize,
) -> Result<EMCurve<'a, F>> {
    trace(chart, CurveKind::E, start, dir, span, steps)
}

fn trace<'a, F: Scalar>(
    chart: &'a GeneratingChart,
    kind: CurveKind,
    start: &[F],
    dir: &[F],
    (s0, s1): (F, F),
    steps: usize,
) -> Result<EMCurve<'a, F>> {
    let n = chart.n();
    assert!(steps > 0);
    assert!(s0 <= F::zero() && s1 > F::zero(), "span must satisfy s0 <= 0 < s1");
    let dn = norm(dir);
    if dn == F::zero() {
        return Err(Error::ZeroDirection);
    }
    let dir: Vec<F> = dir.iter().map(|&d| d / dn).collect();
    if !chart.domain.contains(start) {
        return Err(Error::LeftDomain);
    }
    let base = image(kind, &chart.point(start.to_vec()))?;

    // augmented state w = (u, s)
    let mut w: Vec<F> = start.to_vec();
    w.push(F::zero());
    let mut curve = EMCurve {
        kind,
        chart,
        base: base.clone(),
        dir: dir.clone(),
        samples: vec![CurveSample { s: F::zero(), u: start.to_vec() }],
        crossings: vec![],
    };
    let mut det_prev = image_jacobian(kind, &chart.point(start.to_vec()))?.det();

    // residual of the line equation at augmented state
    let residual = |w: &[F]| -> Result<Vec<F>> {
        let img = image(kind, &chart.point(w[..n].to_vec()))?;
        Ok((0..n).map(|i| img[i] - base[i] - w[n] * dir[i]).collect())
    };
    // n×(n+1) Jacobian [J_u | −dir]
    let aug_jacobian = |w: &[F]| -> Result<Mat<F>> {
        let ju = image_jacobian(kind, &chart.point(w[..n].to_vec()))?;
        Ok(Mat::from_fn(n, n + 1, |i, j| if j < n { ju[(i, j)] } else { -dir[i] }))
    };

    let mut t_prev = vec![F::zero(); n + 1];
    t_prev[n] = F::one(); // orient toward increasing s
    let ds_nominal = (s1 - s0) / F::from_f64_lossy(steps as f64);
    let mut ds = ds_nominal;
    let budget = steps * 20;

    for _ in 0..budget {
        // tangent: null vector of the augmented Jacobian, oriented by t_prev
        let a = aug_jacobian(&w)?;
        let bordered = Mat::from_fn(n + 1, n + 1, |i, j| {
            if i < n {
                a[(i, j)]
            } else {
                t_prev[j]
            }
        });
        let mut rhs = vec![F::zero(); n + 1];
        rhs[n] = F::one();
        let t = match bordered.solve(&rhs) {
            Some(t) => {
                let tn = norm(&t);
                crate::linalg::scale(tn.recip(), &t)
            }
            None => return Err(Error::ContinuationStall { min_step: MIN_STEP }),
        };

        // predictor-corrector with step halving
        let tol = F::from_f64_lossy(CORRECTOR_TOL);
        let corrected = loop {
            let pred = crate::linalg::axpy(ds, &t, &w);
            let mut wc = pred.clone();
            let mut ok = false;
            for _ in 0..25 {
                let r = match residual(&wc) {
                    Ok(r) => r,
                    Err(_) => break,
                };
                let mut full = r;
                full.push(dot(&t, &crate::linalg::sub(&wc, &pred)));
                let jac = match aug_jacobian(&wc) {
                    Ok(j) => j,
                    Err(_) => break,
                };
                let sys = Mat::from_fn(n + 1, n + 1, |i, j| {
                    if i < n {
                        jac[(i, j)]
                    } else {
                        t[j]
                    }
                });
                let Some(step) = sys.solve(&full) else { break };
                let mut step_norm = F::zero();
                let mut res_norm = F::zero();
                for i in 0..=n {
                    wc[i] = wc[i] - step[i];
                    step_norm = step_norm.max(step[i].abs());
                    res_norm = res_norm.max(full[i].abs());
                }
                if step_norm < tol && res_norm < tol {
                    ok = true;
                    break;
                }
            }
            if ok {
                break wc;
            }
            ds = ds * F::from_f64_lossy(0.5);
            if ds < F::from_f64_lossy(MIN_STEP) {
                return Err(Error::ContinuationStall { min_step: MIN_STEP });
            }
        };

        if !chart.domain.contains(&corrected[..n]) {
            return Err(Error::LeftDomain);
        }
        let det = image_jacobian(kind, &chart.point(corrected[..n].to_vec()))?.det();
        if det_prev * det < F::zero() {
            let frac = det_prev / (det_prev - det);
            let s_cross = w[n] + frac * (corrected[n] - w[n]);
            let u_cross: Vec<F> =
                (0..n).map(|i| w[i] + frac * (corrected[i] - w[i])).collect();
            curve.crossings.push(CausticCrossing { s: s_cross, u: u_cross });
        }
        det_prev = det;
        curve.samples.push(CurveSample { s: corrected[n], u: corrected[..n].to_vec() });
        if corrected[n] > s1 || corrected[n] < s0 {
            break;
        }
        t_prev = t;
        w = corrected;
        ds = (ds * F::from_f64_lossy(1.5)).min(ds_nominal);
    }
    Ok(curve)
}

/// A parametrized submanifold of a local model: `k` parameters `t1..tk`
/// mapped through expressions to chart coordinates.
#[derive(Debug, Clone)]
pub struct Submanifold<'a> {
    pub chart: &'a GeneratingChart,
    pub dim: usize,
    pub params: Vec<Expression>,
    pub theta_domain: DomainBox,
    bindings: Bindings,
}

impl<'a> Submanifold<'a> {
    pub fn new(
        chart: &'a GeneratingChart,
        params: Vec<Expression>,
        theta_domain: DomainBox,
    ) -> Result<Self> {
        let k = theta_domain.min.len();
        if params.len() != chart.n() || theta_domain.max.len() != k || k == 0 || k > chart.n() {
            return Err(Error::InvalidModel("submanifold dimension mismatch".into()));
        }
        let mut bindings = Bindings::new();
        for i in 0..k {
            bindings.bind(Var::Named(format!("t{}", i + 1)), i);
        }
        for e in &params {
            e.check_bound(&bindings, k)?;
        }
        Ok(Submanifold { chart, dim: k, params, theta_domain, bindings })
    }

    pub fn parse(
        chart: &'a GeneratingChart,
        sources: &[&str],
        theta_domain: DomainBox,
    ) -> Result<Self> {
        let params = sources.iter().map(|s| crate::expr::parse(s)).collect::<Result<_>>()?;
        Self::new(chart, params, theta_domain)
    }

    /// Chart coordinates at parameter `θ`.
    pub fn u<F: Scalar>(&self, theta: &[F]) -> Result<Vec<F>> {
        self.params.iter().map(|e| e.eval_value(&self.bindings, theta)).collect()
    }

    /// `n × k` Jacobian `∂u/∂θ`.
    pub fn jacobian<F: Scalar>(&self, theta: &[F]) -> Result<Mat<F>> {
        let mut jac = Mat::zeros(self.chart.n(), self.dim);
        for (row, e) in self.params.iter().enumerate() {
            let jet = e.eval_jet3(&self.bindings, theta)?;
            for col in 0..self.dim {
                jac[(row, col)] = jet.grad(col);
            }
        }
        Ok(jac)
    }

    /// True when the parametrization is immersive at `θ` (Jacobian of full
    /// column rank by singular-value test).
    pub fn immersive_at<F: Scalar>(&self, theta: &[F]) -> Result<bool> {
        let jac = self.jacobian(theta)?;
        let sv = jac.singular_values();
        Ok(sv[sv.len() - 1] >= rank_tol(&jac))
    }
}

const ON_TOL: f64 = 1e-8;

/// Orthogonality of an m-curve to a submanifold at a common point:
/// `mᵀ dx = 0` over a basis of x-image tangents of `S` at `θ`.
/// Returns the normalized residual and the verdict at `tol`.
pub fn orthogonal_m_to_s<F: Scalar>(
    curve: &EMCurve<'_, F>,
    sub: &Submanifold<'_>,
    theta: &[F],
    q_u: &[F],
    tol: F,
) -> Result<(bool, F)> {
    assert_eq!(curve.kind, CurveKind::M);
    let (_, off_line) = curve.locate(q_u)?;
    if off_line > F::from_f64_lossy(ON_TOL) {
        return Err(Error::PointNotOnCurve { residual: off_line.to_f64().unwrap_or(f64::NAN) });
    }
    let s_u = sub.u(theta)?;
    let mut on_s = F::zero();
    for i in 0..q_u.len() {
        on_s = on_s.max((s_u[i] - q_u[i]).abs());
    }
    if on_s > F::from_f64_lossy(ON_TOL) {
        return Err(Error::PointNotOnS { residual: on_s.to_f64().unwrap_or(f64::NAN) });
    }
    let fr = frames(&sub.chart.point(q_u.to_vec()))?;
    let res = direction_residual(&curve.dir, &fr.phi, &sub.jacobian(theta)?);
    Ok((res <= tol, res))
}

/// Max over columns of `|dᵀ col| / (‖d‖ max(‖col‖, floor_j))` where `col`
/// runs over `frame · jac`. The floor `1e-4 (1 + ‖frame‖) ‖jac_j‖` keeps the
/// quotient meaningful when a pushed-forward tangent degenerates on the
/// critical locus: there `‖col‖ → 0` and a plain cosine is 0/0 noise, so
/// columns below the floor are measured against the ambient scale instead.
fn direction_residual<F: Scalar>(d: &[F], frame: &Mat<F>, jac: &Mat<F>) -> F {
    let cols = frame.matmul(jac);
    let dn = norm(d);
    if dn <= F::zero() {
        return F::zero();
    }
    let frame_scale = F::from_f64_lossy(1e-4) * (F::one() + frame.max_abs());
    let mut worst = F::zero();
    for j in 0..cols.cols {
        let c = cols.col(j);
        let floor = frame_scale * norm(&jac.col(j));
        let cn = norm(&c).max(floor);
        if cn > F::zero() {
            worst = worst.max(dot(d, &c).abs() / (dn * cn));
        }
    }
    worst
}

/// Strict orthogonality of an e-curve and an m-curve through a common chart
/// point: `|eᵀm| / (‖e‖‖m‖) ≤ 1e-10`.
pub fn strictly_orthogonal<F: Scalar>(
    e_curve: &EMCurve<'_, F>,
    m_curve: &EMCurve<'_, F>,
    q_u: &[F],
) -> Result<bool> {
    assert_eq!(e_curve.kind, CurveKind::E);
    assert_eq!(m_curve.kind, CurveKind::M);
    for curve in [e_curve, m_curve] {
        let (_, off) = curve.locate(q_u)?;
        if off > F::from_f64_lossy(ON_TOL) {
            return Err(Error::PointNotOnCurve { residual: off.to_f64().unwrap_or(f64::NAN) });
        }
    }
    let cosine = dot(&e_curve.dir, &m_curve.dir).abs()
        / (norm(&e_curve.dir) * norm(&m_curve.dir));
    Ok(cosine <= F::from_f64_lossy(1e-10))
}

/// Both sides of the extended Pythagorean identity plus the proof identity
/// `D(p,r) − D(p,q) − D(q,r) = −(x(p)−x(q))ᵀ(p(r)−p(q))`.
#[derive(Debug, Clone)]
pub struct PythagorasReport<F> {
    /// `D(p, r)`
    pub lhs: F,
    /// `D(p, q) + D(q, r)`
    pub rhs: F,
    pub residual: F,
    /// `−(x(p)−x(q))ᵀ(p(r)−p(q))`; equals `residual` identically.
    pub proof_identity: F,
}

fn colinearity_defect<F: Scalar>(delta: &[F], dir: &[F]) -> F {
    let dn = norm(dir);
    let unit: Vec<F> = dir.iter().map(|&d| d / dn).collect();
    let along = dot(delta, &unit);
    let mut worst = F::zero();
    for i in 0..delta.len() {
        worst = worst.max((delta[i] - along * unit[i]).abs());
    }
    worst
}

/// Validate the triangle legs and evaluate the Pythagorean identity:
/// `p` and `q` joined by the e-curve with direction `e_dir` (colinear
/// `x(p)−x(q)`), `q` and `r` by the m-curve with `m_dir` (colinear
/// `p(r)−p(q)`).
pub fn pythagoras_check<F: Scalar>(
    chart: &GeneratingChart,
    up: &[F],
    uq: &[F],
    ur: &[F],
    e_dir: &[F],
    m_dir: &[F],
) -> Result<PythagorasReport<F>> {
    let p = lift(&chart.point(up.to_vec()))?;
    let q = lift(&chart.point(uq.to_vec()))?;
    let r = lift(&chart.point(ur.to_vec()))?;
    let dx = crate::linalg::sub(&p.x, &q.x);
    let dp = crate::linalg::sub(&r.p, &q.p);
    let tol = |v: &[F]| F::from_f64_lossy(ON_TOL) * (F::one() + v.iter().fold(F::zero(), |a, &b| a.max(b.abs())));
    let e_defect = colinearity_defect(&dx, e_dir);
    if e_defect > tol(&dx) {
        return Err(Error::NotOnECurve { residual: e_defect.to_f64().unwrap_or(f64::NAN) });
    }
    let m_defect = colinearity_defect(&dp, m_dir);
    if m_defect > tol(&dp) {
        return Err(Error::NotOnMCurve { residual: m_defect.to_f64().unwrap_or(f64::NAN) });
    }
    let lhs = divergence(&p, &r)?;
    let rhs = divergence(&p, &q)? + divergence(&q, &r)?;
    Ok(PythagorasReport { lhs, rhs, residual: lhs - rhs, proof_identity: -dot(&dx, &dp) })
}

/// Critical-point classification of the restricted divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    Min,
    Max,
    Saddle,
}

impl CriticalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CriticalKind::Min => "min",
            CriticalKind::Max => "max",
            CriticalKind::Saddle => "saddle",
        }
    }
}

/// One converged output of the projection solver.
#[derive(Debug, Clone)]
pub struct ProjectionCritical<F> {
    pub theta: Vec<F>,
    pub point: ContactPoint<F>,
    pub grad_norm: F,
    pub kind: CriticalKind,
    /// Singular reduced Hessian: classification unreliable, still reported.
    pub degenerate: bool,
    /// Curve direction from the theorem's proof: `p(q) − p(p)` for the
    /// m-side, `x(q) − x(p)` for the e-side.
    pub direction: Vec<F>,
    pub orthogonality_residual: F,
}

const FD_GRAD_STEP: f64 = 1e-6;
const FD_HESS_STEP: f64 = 1e-4;
const GRAD_TOL: f64 = 1e-9;

fn fd_gradient<F: Scalar>(f: &dyn Fn(&[F]) -> Result<F>, theta: &[F]) -> Result<Vec<F>> {
    let h = F::from_f64_lossy(FD_GRAD_STEP);
    let two = F::from_f64_lossy(2.0);
    let mut g = vec![F::zero(); theta.len()];
    for i in 0..theta.len() {
        let mut a = theta.to_vec();
        let mut b = theta.to_vec();
        a[i] = a[i] + h;
        b[i] = b[i] - h;
        g[i] = (f(&a)? - f(&b)?) / (two * h);
    }
    Ok(g)
}

fn fd_hessian<F: Scalar>(f: &dyn Fn(&[F]) -> Result<F>, theta: &[F]) -> Result<Mat<F>> {
    let h = F::from_f64_lossy(FD_HESS_STEP);
    let two = F::from_f64_lossy(2.0);
    let four = F::from_f64_lossy(4.0);
    let k = theta.len();
    let at = |shifts: &[(usize, F)]| -> Result<F> {
        let mut t = theta.to_vec();
        for &(i, d) in shifts {
            t[i] = t[i] + d;
        }
        f(&t)
    };
    let mut m = Mat::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = if i == j {
                (at(&[(i, h)])? - two * at(&[])? + at(&[(i, -h)])?) / (h * h)
            } else {
                (at(&[(i, h), (j, h)])? - at(&[(i, h), (j, -h)])? - at(&[(i, -h), (j, h)])?
                    + at(&[(i, -h), (j, -h)])?)
                    / (four * h * h)
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

fn clamp_to_box<F: Scalar>(theta: &mut [F], domain: &DomainBox) {
    for i in 0..theta.len() {
        theta[i] = theta[i]
            .max(F::from_f64_lossy(domain.min[i]))
            .min(F::from_f64_lossy(domain.max[i]));
    }
}

/// Find critical points of the divergence from/to `p` restricted to `S`,
/// one damped-Newton run per seed. `side == M` uses `F(θ) = D(q(θ), p)`
/// (critical iff the m-curve from `p` to `q` is orthogonal to `S`);
/// `side == E` uses `F(θ) = D(p, q(θ))` with the e-curve mirror statement.
/// All distinct converged critical points are returned.
pub fn project_onto<F: Scalar>(
    sub: &Submanifold<'_>,
    p: &ContactPoint<F>,
    seeds: &[Vec<F>],
    side: CurveKind,
) -> Result<Vec<ProjectionCritical<F>>> {
    let objective = |theta: &[F]| -> Result<F> {
        let q = lift(&sub.chart.point(sub.u(theta)?))?;
        match side {
            CurveKind::M => divergence(&q, p),
            CurveKind::E => divergence(p, &q),
        }
    };
    let mut found: Vec<ProjectionCritical<F>> = Vec::new();
    let mut any_converged = false;
    for seed in seeds {
        let Some(theta) = newton_critical(&objective, seed, &sub.theta_domain) else {
            continue;
        };
        any_converged = true;
        if found.iter().any(|c| {
            c.theta
                .iter()
                .zip(&theta)
                .all(|(&a, &b)| (a - b).abs() < F::from_f64_lossy(1e-6))
        }) {
            continue;
        }
        let grad = fd_gradient(&objective, &theta)?;
        let grad_norm = grad.iter().fold(F::zero(), |a, &g| a.max(g.abs()));
        let hess = fd_hessian(&objective, &theta)?;
        let eig = hess.sym_eig();
        let etol = F::from_f64_lossy(1e-6)
            * (F::one() + eig.iter().fold(F::zero(), |a, &e| a.max(e.abs())));
        let degenerate = eig.iter().any(|&e| e.abs() <= etol);
        let kind = if eig.iter().all(|&e| e > -etol) {
            CriticalKind::Min
        } else if eig.iter().all(|&e| e < etol) {
            CriticalKind::Max
        } else {
            CriticalKind::Saddle
        };
        let q = lift(&sub.chart.point(sub.u(&theta)?))?;
        let fr = frames(&sub.chart.point(sub.u(&theta)?))?;
        let jac = sub.jacobian(&theta)?;
        let (direction, frame) = match side {
            CurveKind::M => (crate::linalg::sub(&q.p, &p.p), &fr.phi),
            CurveKind::E => (crate::linalg::sub(&q.x, &p.x), &fr.phi_prime),
        };
        let orthogonality_residual = direction_residual(&direction, frame, &jac);
        found.push(ProjectionCritical {
            theta,
            point: q,
            grad_norm,
            kind,
            degenerate,
            direction,
            orthogonality_residual,
        });
    }
    if !any_converged {
        let seed = seeds
            .first()
            .map(|s| s.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
            .unwrap_or_default();
        return Err(Error::NoConvergence { seed });
    }
    Ok(found)
}

fn newton_critical<F: Scalar>(
    objective: &dyn Fn(&[F]) -> Result<F>,
    seed: &[F],
    domain: &DomainBox,
) -> Option<Vec<F>> {
    let mut theta = seed.to_vec();
    clamp_to_box(&mut theta, domain);
    // relative: central differences of an O(|F|) objective carry rounding
    // noise ~ eps |F| / step, so an absolute gradient floor cannot converge
    // on models with large divergence values
    let scale = F::one() + objective(&theta).ok()?.abs();
    let tol = F::from_f64_lossy(GRAD_TOL) * scale;
    for _ in 0..100 {
        let grad = fd_gradient(objective, &theta).ok()?;
        let gn = grad.iter().fold(F::zero(), |a, &g| a.max(g.abs()));
        if gn <= tol {
            return Some(theta);
        }
        let mut hess = fd_hessian(objective, &theta).ok()?;
        // regularize a singular reduced Hessian rather than giving up
        let mut step = hess.solve(&grad);
        let mut mu = F::from_f64_lossy(1e-6) * (F::one() + hess.max_abs());
        while step.is_none() {
            for i in 0..theta.len() {
                hess[(i, i)] = hess[(i, i)] + mu;
            }
            step = hess.solve(&grad);
            mu = mu * F::from_f64_lossy(10.0);
            if mu > F::from_f64_lossy(1e12) {
                return None;
            }
        }
        let step = step?;
        // damped: backtrack on the gradient norm
        let mut lambda = F::one();
        let mut accepted = false;
        for _ in 0..30 {
            let mut cand = theta.clone();
            for i in 0..cand.len() {
                cand[i] = cand[i] - lambda * step[i];
            }
            clamp_to_box(&mut cand, domain);
            if let Ok(g2) = fd_gradient(objective, &cand) {
                let gn2 = g2.iter().fold(F::zero(), |a, &g| a.max(g.abs()));
                if gn2 < gn || gn2 <= tol {
                    theta = cand;
                    accepted = true;
                    break;
                }
            }
            lambda = lambda * F::from_f64_lossy(0.5);
        }
        if !accepted {
            return None;
        }
    }
    None
}

/// Dense-scan oracle for 1-d submanifolds: sign changes of `dF/dθ` on a
/// uniform grid, bisected to the given refinement. Used to cross-check the
/// seeded solver.
pub fn scan_critical_thetas<F: Scalar>(
    sub: &Submanifold<'_>,
    p: &ContactPoint<F>,
    side: CurveKind,
    step: f64,
) -> Result<Vec<F>> {
    assert_eq!(sub.dim, 1);
    let objective = |theta: &[F]| -> Result<F> {
        let q = lift(&sub.chart.point(sub.u(theta)?))?;
        match side {
            CurveKind::M => divergence(&q, p),
            CurveKind::E => divergence(p, &q),
        }
    };
    let dfdt = |t: F| -> Result<F> { Ok(fd_gradient(&objective, &[t])?[0]) };
    let (lo, hi) = (sub.theta_domain.min[0], sub.theta_domain.max[0]);
    let count = ((hi - lo) / step).ceil() as usize;
    let mut roots = Vec::new();
    let mut t_prev = F::from_f64_lossy(lo);
    let mut g_prev = dfdt(t_prev)?;
    for i in 1..=count {
        let t = F::from_f64_lossy(lo + (hi - lo) * i as f64 / count as f64);
        let g = dfdt(t)?;
        if g_prev == F::zero() {
            roots.push(t_prev);
        } else if g_prev * g < F::zero() {
            let (mut a, mut b, mut ga) = (t_prev, t, g_prev);
            for _ in 0..60 {
                let mid = (a + b) * F::from_f64_lossy(0.5);
                let gm = dfdt(mid)?;
                if ga * gm <= F::zero() {
                    b = mid;
                } else {
                    a = mid;
                    ga = gm;
                }
            }
            roots.push((a + b) * F::from_f64_lossy(0.5));
        }
        t_prev = t;
        g_prev = g;
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::model::Partition;

    fn a2() -> GeneratingChart {
        GeneratingChart::new(
            "a2",
            Partition::full(2),
            parse("x1^3/3 + x2^2/2").unwrap(),
            DomainBox { min: vec![-2.0, -2.0], max: vec![2.0, 2.0] },
        )
        .unwrap()
    }

    fn quad() -> GeneratingChart {
        GeneratingChart::new(
            "quad",
            Partition::full(2),
            parse("x1^2/2 + x2^2/2").unwrap(),
            DomainBox { min: vec![-10.0, -10.0], max: vec![10.0, 10.0] },
        )
        .unwrap()
    }

    #[test]
    fn m_curve_on_quadratic_is_straight_in_chart() {
        // gradient map is the identity: chart samples lie on the line itself
        let chart = quad();
        let dir = [3.0f64 / 5.0, 4.0 / 5.0];
        let c = trace_m_curve(&chart, &[1.0, -1.0], &dir, (-1.0, 2.0), 40).unwrap();
        assert!(c.line_defect().unwrap() <= 1e-8);
        for s in &c.samples {
            assert!((s.u[0] - (1.0 + s.s * dir[0])).abs() < 1e-8);
            assert!((s.u[1] - (-1.0 + s.s * dir[1])).abs() < 1e-8);
        }
        assert!(c.crossings.is_empty());
    }

    #[test]
    fn a2_m_curve_is_parabola() {
        // line p2 = p1/2 + b maps to the parabola x2 = x1^2/2 + b
        let chart = a2();
        let m = [2.0 / 5.0f64.sqrt(), 1.0 / 5.0f64.sqrt()];
        let start = [1.0, 0.5];
        let c = trace_m_curve(&chart, &start, &m, (-0.5, 1.5), 50).unwrap();
        assert!(c.line_defect().unwrap() <= 1e-8);
        let b = 0.5 - 1.0 / 2.0; // from start: x2 - x1^2/2
        for s in &c.samples {
            assert!((s.u[1] - (s.u[0] * s.u[0] / 2.0 + b)).abs() < 1e-7, "sample {:?}", s);
        }
    }

    #[test]
    fn a2_m_curve_folds_at_caustic() {
        // moving toward decreasing p1 folds at p1 = 0 (x1 = 0) and comes back
        let chart = a2();
        let m = [-2.0 / 5.0f64.sqrt(), -1.0 / 5.0f64.sqrt()];
        let c = trace_m_curve(&chart, &[1.0, 0.5], &m, (-0.3, 3.0), 80).unwrap();
        assert!(c.line_defect().unwrap() <= 1e-8);
        assert_eq!(c.crossings.len(), 1);
        assert!(c.crossings[0].u[0].abs() < 0.05, "fold at x1=0, got {:?}", c.crossings[0]);
        let last = c.samples.last().unwrap();
        assert!(last.u[0] < -0.5, "continuation should pass to the x1 < 0 branch");
        // s is not monotone: it reaches a max near the fold then decreases
        let smax = c.samples.iter().map(|s| s.s).fold(f64::MIN, f64::max);
        assert!(smax > 1.0 && last.s < smax);
    }

    #[test]
    fn e_curve_on_potential_chart_is_straight() {
        let chart = a2();
        let c = trace_e_curve(&chart, &[0.5, -0.5], &[1.0, 1.0], (-0.5, 1.0), 30).unwrap();
        assert!(c.line_defect().unwrap() <= 1e-10);
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        for s in &c.samples {
            assert!((s.u[0] - (0.5 + s.s * inv_sqrt2)).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_direction_rejected() {
        let chart = a2();
        let r = trace_m_curve(&chart, &[1.0, 0.0], &[0.0, 0.0], (-1.0, 1.0), 10);
        assert!(matches!(r, Err(Error::ZeroDirection)));
    }

    #[test]
    fn leaving_domain_reported() {
        let chart = a2();
        // e-curve in x runs straight out of the [-2,2]^2 box
        let r = trace_e_curve(&chart, &[1.5, 0.0], &[1.0, 0.0], (-0.1, 5.0), 20);
        assert!(matches!(r, Err(Error::LeftDomain)));
    }

    #[test]
    fn orthogonality_predicates() {
        let chart = a2();
        let m = [2.0, 1.0];
        let e = [1.0, -2.0];
        let q = [1.0, 0.5];
        let m_curve = trace_m_curve(&chart, &q, &m, (-0.2, 0.5), 10).unwrap();
        let e_curve = trace_e_curve(&chart, &q, &e, (-0.2, 0.5), 10).unwrap();
        assert!(strictly_orthogonal(&e_curve, &m_curve, &q).unwrap());
        let e_par = trace_e_curve(&chart, &q, &m, (-0.2, 0.5), 10).unwrap();
        assert!(!strictly_orthogonal(&e_par, &m_curve, &q).unwrap());
        // axis pair
        let ex = trace_e_curve(&chart, &q, &[1.0, 0.0], (-0.2, 0.2), 5).unwrap();
        let my = trace_m_curve(&chart, &q, &[0.0, 1.0], (-0.2, 0.2), 5).unwrap();
        assert!(strictly_orthogonal(&ex, &my, &q).unwrap());
        // wrong base point
        let r = strictly_orthogonal(&e_curve, &m_curve, &[0.0, 0.0]);
        assert!(matches!(r, Err(Error::PointNotOnCurve { .. })));
    }

    #[test]
    fn m_curve_orthogonal_to_submanifold() {
        // S = the e-line through q with direction (1,-2); m = (2,1)
        let chart = a2();
        let q = [1.0, 0.5];
        let m_curve = trace_m_curve(&chart, &q, &[2.0, 1.0], (-0.2, 0.5), 10).unwrap();
        let sub = Submanifold::parse(
            &chart,
            &["1 + t1", "0.5 - 2*t1"],
            DomainBox { min: vec![-0.5], max: vec![0.5] },
        )
        .unwrap();
        let (ok, res) = orthogonal_m_to_s(&m_curve, &sub, &[0.0], &q, 1e-10).unwrap();
        assert!(ok, "residual {res}");
        // tangent S: residual ~ 1
        let sub_tan = Submanifold::parse(
            &chart,
            &["1 + t1", "0.5 + t1^2"],
            DomainBox { min: vec![-0.5], max: vec![0.5] },
        )
        .unwrap();
        // x-image tangent of the m-curve at q is dx with m^T dx = 0 only if
        // orthogonal; here S runs along x1 whose pairing with m=(2,1) is big
        let (ok, res) = orthogonal_m_to_s(&m_curve, &sub_tan, &[0.0], &q, 1e-6).unwrap();
        assert!(!ok && res > 0.5, "residual {res}");
    }

    #[test]
    fn pythagoras_worked_triangle() {
        // Q=(u,u^2/2), R=(t,t^2/2), P=(s, -2(s-u)+u^2/2) at u=1, t=2, s=0
        let chart = a2();
        let rep = pythagoras_check(
            &chart,
            &[0.0f64, 2.5],
            &[1.0, 0.5],
            &[2.0, 2.0],
            &[1.0, -2.0],
            &[2.0, 1.0],
        )
        .unwrap();
        assert!(rep.residual.abs() <= 1e-10, "residual {}", rep.residual);
        assert!((rep.residual - rep.proof_identity).abs() <= 1e-12);
    }

    #[test]
    fn pythagoras_with_q_on_sigma() {
        // u = 0 puts Q on the degeneracy locus; the identity still holds
        let (u, t, s) = (0.0f64, 1.3, -0.8);
        let chart = a2();
        let q = [u, u * u / 2.0];
        let r = [t, t * t / 2.0];
        let p = [s, -2.0 * (s - u) + u * u / 2.0];
        let rep = pythagoras_check(&chart, &p, &q, &r, &[1.0, -2.0], &[2.0, 1.0]).unwrap();
        assert!(rep.residual.abs() <= 1e-10);
    }

    #[test]
    fn pythagoras_degenerate_m_leg() {
        let chart = a2();
        let q = [1.0f64, 0.5];
        let p = [0.0f64, 2.5];
        let rep = pythagoras_check(&chart, &p, &q, &q, &[1.0, -2.0], &[2.0, 1.0]).unwrap();
        assert_eq!(rep.residual, 0.0);
    }

    #[test]
    fn pythagoras_rejects_bad_legs() {
        let chart = a2();
        let r = pythagoras_check(
            &chart,
            &[0.0f64, 2.5],
            &[1.0, 0.5],
            &[2.0, 2.0],
            &[1.0, 1.0], // not the e-direction of P-Q
            &[2.0, 1.0],
        );
        assert!(matches!(r, Err(Error::NotOnECurve { .. })));
    }

    #[test]
    fn proof_identity_without_orthogonality() {
        // arbitrary triangle: defect equals -(Δx)^T(Δp) even when large
        let chart = a2();
        let p = [0.9f64, -0.3];
        let q = [0.2, 0.7];
        let r = [-0.5, 1.1];
        let pc = lift(&chart.point(p.to_vec())).unwrap();
        let qc = lift(&chart.point(q.to_vec())).unwrap();
        let rc = lift(&chart.point(r.to_vec())).unwrap();
        let dx = crate::linalg::sub(&pc.x, &qc.x);
        let dp = crate::linalg::sub(&rc.p, &qc.p);
        let e_dir = dx.clone();
        let m_dir = dp.clone();
        let rep = pythagoras_check(&chart, &p, &q, &r, &e_dir, &m_dir).unwrap();
        assert!((rep.residual - rep.proof_identity).abs() <= 1e-12);
        assert!(rep.residual.abs() > 1e-3, "triangle should be non-orthogonal");
    }

    #[test]
    fn projection_euclidean_foot() {
        // f = ||x||^2/2, S the line (t, 1 + t): foot of perpendicular from
        // (1, 0) is t = 0, i.e. q = (0, 1)
        let chart = quad();
        let sub = Submanifold::parse(
            &chart,
            &["t1", "1 + t1"],
            DomainBox { min: vec![-3.0], max: vec![3.0] },
        )
        .unwrap();
        let p = lift(&chart.point(vec![1.0f64, 0.0])).unwrap();
        let crits = project_onto(&sub, &p, &[vec![1.5]], CurveKind::M).unwrap();
        assert_eq!(crits.len(), 1);
        assert!((crits[0].theta[0] - 0.0).abs() < 1e-6, "theta {:?}", crits[0].theta);
        assert_eq!(crits[0].kind, CriticalKind::Min);
        assert!(crits[0].orthogonality_residual <= 1e-6);
    }

    #[test]
    fn projection_a2_parabola() {
        // S: x2 = x1^2/2; e-side projection of P = (0, 5/2) has the critical
        // point theta = 1 (the Pythagoras fixture corner Q)
        let chart = a2();
        let sub = Submanifold::parse(
            &chart,
            &["t1", "t1^2/2"],
            DomainBox { min: vec![-1.8, ], max: vec![1.8] },
        )
        .unwrap();
        let p = lift(&chart.point(vec![0.0f64, 2.5])).unwrap();
        let crits =
            project_onto(&sub, &p, &[vec![0.5], vec![1.2], vec![-0.5]], CurveKind::E).unwrap();
        assert!(
            crits.iter().any(|c| (c.theta[0] - 1.0).abs() < 1e-6),
            "thetas: {:?}",
            crits.iter().map(|c| c.theta[0]).collect::<Vec<_>>()
        );
        for c in &crits {
            assert!(c.grad_norm <= 1e-8);
            assert!(c.orthogonality_residual <= 1e-6, "residual {}", c.orthogonality_residual);
        }
        // oracle: dense scan finds the same roots, none missed
        let roots = scan_critical_thetas(&sub, &p, CurveKind::E, 1e-3).unwrap();
        for r in &roots {
            assert!(
                crits.iter().any(|c| (c.theta[0] - r).abs() < 2e-3)
                    || !crits.iter().any(|c| (c.theta[0] - r).abs() < 0.5),
                "scan root {r} missed"
            );
        }
        for c in &crits {
            assert!(roots.iter().any(|r| (c.theta[0] - r).abs() < 2e-3));
        }
    }

    #[test]
    fn immersion_check() {
        let chart = a2();
        let good = Submanifold::parse(
            &chart,
            &["t1", "t1^2/2"],
            DomainBox { min: vec![-1.0], max: vec![1.0] },
        )
        .unwrap();
        assert!(good.immersive_at(&[0.5]).unwrap());
        let bad = Submanifold::parse(
            &chart,
            &["t1^2", "t1^3"],
            DomainBox { min: vec![-1.0], max: vec![1.0] },
        )
        .unwrap();
        assert!(!bad.immersive_at(&[0.0]).unwrap());
    }
}
