//! Pointwise tensor data of a local model: the frame matrices Φ and Φ′, the
//! quasi-Hessian metric `h`, the canonical cubic tensor `C`, the α-family
//! `N^(α)`, and the Frobenius product with its associativity residual.

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::model::ChartPoint;
use crate::scalar::Scalar;

/// Default scale-aware tolerance for rank decisions:
/// `1e-8 · (1 + ‖matrix‖)`.
pub fn rank_tol<F: Scalar>(m: &Mat<F>) -> F {
    F::from_f64_lossy(1e-8) * (F::one() + m.max_abs())
}

/// Coordinate matrices of the two Lagrange-map Jacobians in the flat frames.
///
/// Columns follow chart slot order; rows are ambient indices. `phi` is the
/// Jacobian of the x-image of the chart immersion, `phi_prime` of the p-image
/// (the m-Lagrange map).
#[derive(Debug, Clone)]
pub struct FrameMatrices<F> {
    pub phi: Mat<F>,
    pub phi_prime: Mat<F>,
}

/// Frame matrices at a chart point. For a `J = ∅` chart `phi` is the identity
/// and `phi_prime` the Hessian of the potential.
pub fn frames<F: Scalar>(cp: &ChartPoint<'_, F>) -> Result<FrameMatrices<F>> {
    let chart = cp.chart;
    let n = chart.n();
    let jet = chart.jet(&cp.u)?;
    let part = &chart.partition;
    let mut phi = Mat::zeros(n, n);
    let mut phi_prime = Mat::zeros(n, n);
    for k in 0..n {
        let ambient_k = part.slot_ambient(k);
        if !part.slot_is_p(k) {
            phi[(ambient_k, k)] = F::one();
        } else {
            phi_prime[(ambient_k, k)] = F::one();
        }
        for slot in 0..n {
            let ambient = part.slot_ambient(slot);
            if part.slot_is_p(slot) {
                phi[(ambient, k)] = phi[(ambient, k)] - jet.h(k, slot);
            } else {
                phi_prime[(ambient, k)] = phi_prime[(ambient, k)] + jet.h(k, slot);
            }
        }
    }
    Ok(FrameMatrices { phi, phi_prime })
}

/// Quasi-Hessian metric in chart coordinates, from the block formula
/// `h = g_II ⊕ (−g_JJ)` with vanishing mixed blocks.
pub fn metric<F: Scalar>(cp: &ChartPoint<'_, F>) -> Result<Mat<F>> {
    let chart = cp.chart;
    let n = chart.n();
    let jet = chart.jet(&cp.u)?;
    let part = &chart.partition;
    Ok(Mat::from_fn(n, n, |k, l| match (part.slot_is_p(k), part.slot_is_p(l)) {
        (false, false) => jet.h(k, l),
        (true, true) => -jet.h(k, l),
        _ => F::zero(),
    }))
}

/// The same metric via the pairing route
/// `h = ½(Φᵀ Φ′ + Φ′ᵀ Φ)`; agrees with [`metric`] to rounding.
pub fn metric_via_pairing<F: Scalar>(fr: &FrameMatrices<F>) -> Mat<F> {
    let a = fr.phi.transpose().matmul(&fr.phi_prime);
    let b = fr.phi_prime.transpose().matmul(&fr.phi);
    a.add(&b).scale(F::from_f64_lossy(0.5))
}

/// Classification of a chart point by the ranks of Φ and Φ′.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Regular,
    ECritical,
    MCritical,
    Both,
}

impl PointClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PointClass::Regular => "regular",
            PointClass::ECritical => "e_critical",
            PointClass::MCritical => "m_critical",
            PointClass::Both => "both",
        }
    }
}

/// Rank report used by the degeneracy test.
#[derive(Debug, Clone)]
pub struct DegeneracyReport<F> {
    pub class: PointClass,
    pub phi_singular_values: Vec<F>,
    pub phi_prime_singular_values: Vec<F>,
    pub null_phi: usize,
    pub null_phi_prime: usize,
}

/// Classify a chart point by the smallest singular values of Φ (e-critical)
/// and Φ′ (m-critical). Pass `None` to use the scale-aware default tolerance.
pub fn degeneracy_test<F: Scalar>(
    cp: &ChartPoint<'_, F>,
    tol: Option<F>,
) -> Result<DegeneracyReport<F>> {
    let fr = frames(cp)?;
    let sv_e = fr.phi.singular_values();
    let sv_m = fr.phi_prime.singular_values();
    let tol_e = tol.unwrap_or_else(|| rank_tol(&fr.phi));
    let tol_m = tol.unwrap_or_else(|| rank_tol(&fr.phi_prime));
    let null_e = sv_e.iter().filter(|&&s| s < tol_e).count();
    let null_m = sv_m.iter().filter(|&&s| s < tol_m).count();
    let class = match (null_e > 0, null_m > 0) {
        (false, false) => PointClass::Regular,
        (true, false) => PointClass::ECritical,
        (false, true) => PointClass::MCritical,
        (true, true) => PointClass::Both,
    };
    Ok(DegeneracyReport {
        class,
        phi_singular_values: sv_e,
        phi_prime_singular_values: sv_m,
        null_phi: null_e,
        null_phi_prime: null_m,
    })
}

/// Dense symmetric rank-3 array in chart coordinates.
#[derive(Debug, Clone)]
pub struct Rank3<F> {
    n: usize,
    data: Vec<F>,
}

impl<F: Scalar> Rank3<F> {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize) -> F) -> Self {
        let mut data = vec![F::zero(); n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    data[(i * n + j) * n + k] = f(i, j, k);
                }
            }
        }
        Rank3 { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> F {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn contract(&self, x: &[F], y: &[F], z: &[F]) -> F {
        let mut s = F::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.n {
                    s = s + self.get(i, j, k) * x[i] * y[j] * z[k];
                }
            }
        }
        s
    }

    pub fn max_abs(&self) -> F {
        self.data.iter().fold(F::zero(), |acc, &a| acc.max(a.abs()))
    }

    pub fn max_abs_diff(&self, other: &Rank3<F>) -> F {
        self.data
            .iter()
            .zip(&other.data)
            .fold(F::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    /// Max defect over all index permutations.
    pub fn symmetry_defect(&self) -> F {
        let mut worst = F::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.n {
                    let v = self.get(i, j, k);
                    for w in [
                        self.get(i, k, j),
                        self.get(j, i, k),
                        self.get(j, k, i),
                        self.get(k, i, j),
                        self.get(k, j, i),
                    ] {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        worst
    }
}

/// Canonical cubic tensor `C_klm = ∂_k∂_l∂_m g` in chart coordinates.
pub fn cubic<F: Scalar>(cp: &ChartPoint<'_, F>) -> Result<Rank3<F>> {
    let jet = cp.chart.jet(&cp.u)?;
    Ok(Rank3::from_fn(cp.chart.n(), |i, j, k| jet.t(i, j, k)))
}

/// The cubic tensor by the independent four-term pairing route
///
/// `C(X,Y,Z) = ½[ηᵀ(∂_X ζ′) + ζᵀ(∂_X η′) − (∂_X η)ᵀ ζ′ − (∂_X ζ)ᵀ η′]`
///
/// with `η = ΦY`, `ζ = ΦZ`, primes from Φ′, and the flat-frame connection
/// terms `∂_X Φ(·)` taken by central finite differences of the frame-matrix
/// entries along X.
pub fn cubic_via_frames<F: Scalar>(cp: &ChartPoint<'_, F>, step: F) -> Result<Rank3<F>> {
    let chart = cp.chart;
    let n = chart.n();
    let fr = frames(cp)?;
    let mut d_phi = Vec::with_capacity(n);
    let mut d_phi_prime = Vec::with_capacity(n);
    for d in 0..n {
        let mut up = cp.u.clone();
        let mut um = cp.u.clone();
        up[d] = up[d] + step;
        um[d] = um[d] - step;
        let fp = frames(&chart.point(up))?;
        let fm = frames(&chart.point(um))?;
        let inv = (F::from_f64_lossy(2.0) * step).recip();
        d_phi.push(fp.phi.sub(&fm.phi).scale(inv));
        d_phi_prime.push(fp.phi_prime.sub(&fm.phi_prime).scale(inv));
    }
    let half = F::from_f64_lossy(0.5);
    let mut out = vec![F::zero(); n * n * n];
    for x in 0..n {
        for l in 0..n {
            for m in 0..n {
                let eta = fr.phi.col(l);
                let zeta = fr.phi.col(m);
                let eta_p = fr.phi_prime.col(l);
                let zeta_p = fr.phi_prime.col(m);
                let v = half
                    * (dot(&eta, &d_phi_prime[x].col(m)) + dot(&zeta, &d_phi_prime[x].col(l))
                        - dot(&d_phi[x].col(l), &zeta_p)
                        - dot(&d_phi[x].col(m), &eta_p));
                out[(x * n + l) * n + m] = v;
            }
        }
    }
    let r = Rank3 { n, data: out };
    Ok(r)
}

/// Directional derivative of the metric entries, `(Xh)_klm = ∂_k h_lm`,
/// from the block formula (so `∂_k h_lm = ±∂_k∂_l∂_m g` by I/J block).
pub fn metric_derivative<F: Scalar>(cp: &ChartPoint<'_, F>) -> Result<Rank3<F>> {
    let chart = cp.chart;
    let jet = chart.jet(&cp.u)?;
    let part = chart.partition.clone();
    Ok(Rank3::from_fn(chart.n(), |k, l, m| {
        match (part.slot_is_p(l), part.slot_is_p(m)) {
            (false, false) => jet.t(k, l, m),
            (true, true) => -jet.t(k, l, m),
            _ => F::zero(),
        }
    }))
}

/// `N^(α)(X,Y,Z) = ½ Xh(Y,Z) − (α/2) C(X,Y,Z)` for coordinate directions.
/// The duality identity `Xh(Y,Z) = N^(α) + N^(−α)` holds by construction.
pub fn alpha_tensor<F: Scalar>(
    cp: &ChartPoint<'_, F>,
    x: usize,
    y: usize,
    z: usize,
    alpha: F,
) -> Result<F> {
    let dh = metric_derivative(cp)?;
    let c = cubic(cp)?;
    let half = F::from_f64_lossy(0.5);
    Ok(half * dh.get(x, y, z) - alpha * half * c.get(x, y, z))
}

/// Structure coefficients of `∂_i ∘ ∂_j = Σ C_ijk h^{kl} ∂_l`.
pub fn frobenius_product<F: Scalar>(
    cp: &ChartPoint<'_, F>,
    i: usize,
    j: usize,
) -> Result<Vec<F>> {
    let h = metric(cp)?;
    let c = cubic(cp)?;
    frobenius_product_with(&h, &c, i, j)
}

fn h_inverse<F: Scalar>(h: &Mat<F>) -> Result<Mat<F>> {
    if h.cond() > F::from_f64_lossy(crate::model::SINGULAR_COND_THRESHOLD) {
        return Err(Error::SingularMetric);
    }
    h.inverse().ok_or(Error::SingularMetric)
}

fn frobenius_product_with<F: Scalar>(
    h: &Mat<F>,
    c: &Rank3<F>,
    i: usize,
    j: usize,
) -> Result<Vec<F>> {
    let n = c.n();
    let h_inv = h_inverse(h)?;
    let mut out = vec![F::zero(); n];
    for l in 0..n {
        for k in 0..n {
            out[l] = out[l] + c.get(i, j, k) * h_inv[(k, l)];
        }
    }
    Ok(out)
}

/// Max defect of `h(∂_i∘∂_j, ∂_k) = h(∂_i, ∂_j∘∂_k)` over all triples.
pub fn frobenius_compatibility_residual<F: Scalar>(cp: &ChartPoint<'_, F>) -> Result<F> {
    let h = metric(cp)?;
    let c = cubic(cp)?;
    let n = c.n();
    let mut worst = F::zero();
    for i in 0..n {
        for j in 0..n {
            let pij = frobenius_product_with(&h, &c, i, j)?;
            for k in 0..n {
                let pjk = frobenius_product_with(&h, &c, j, k)?;
                let lhs = dot(&h.matvec(&pij), &unit(n, k));
                let rhs = dot(&h.col(i), &pjk);
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Max coefficient defect of `(∂_i∘∂_j)∘∂_k − ∂_i∘(∂_j∘∂_k)` over all
/// triples (the WDVV associativity residual).
pub fn wdvv_residual<F: Scalar>(cp: &ChartPoint<'_, F>) -> Result<F> {
    let h = metric(cp)?;
    let c = cubic(cp)?;
    let n = c.n();
    // structure coefficients m[i][j] = coefficients of ∂_i ∘ ∂_j
    let mut table = vec![vec![Vec::new(); n]; n];
    for i in 0..n {
        for j in 0..n {
            table[i][j] = frobenius_product_with(&h, &c, i, j)?;
        }
    }
    let product = |a: &[F], b: &[F]| -> Vec<F> {
        let mut out = vec![F::zero(); n];
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    out[l] = out[l] + a[i] * b[j] * table[i][j][l];
                }
            }
        }
        out
    };
    let mut worst = F::zero();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let lhs = product(&table[i][j], &unit(n, k));
                let rhs = product(&unit(n, i), &table[j][k]);
                for l in 0..n {
                    worst = worst.max((lhs[l] - rhs[l]).abs());
                }
            }
        }
    }
    Ok(worst)
}

fn unit<F: Scalar>(n: usize, k: usize) -> Vec<F> {
    let mut e = vec![F::zero(); n];
    e[k] = F::one();
    e
}
