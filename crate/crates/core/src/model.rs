//! Local models: Legendre submanifolds given by generating functions
//! `g(x_I, p_J)` over an index partition, contact points of `R^{2n+1}`, and
//! the e/m-Legendre maps in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expression, Var};
use crate::jet::Jet3;
use crate::linalg::{dot, Mat};
use crate::scalar::Scalar;

/// Condition-number threshold above which a Hessian counts as singular.
pub const SINGULAR_COND_THRESHOLD: f64 = 1e12;
/// Newton tolerance (step and residual) for gradient-map inversion.
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;

/// Partition `I ⊔ J = {1..n}` (stored 0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    n: usize,
    i_set: Vec<usize>,
    j_set: Vec<usize>,
}

impl Partition {
    /// `i_set` holds 0-based ambient indices; `J` is the complement.
    pub fn new(n: usize, mut i_set: Vec<usize>) -> Result<Self> {
        i_set.sort_unstable();
        i_set.dedup();
        if i_set.iter().any(|&i| i >= n) {
            return Err(Error::InvalidModel(format!("partition index out of range for n={n}")));
        }
        let j_set: Vec<usize> = (0..n).filter(|k| !i_set.contains(k)).collect();
        Ok(Partition { n, i_set, j_set })
    }

    pub fn full(n: usize) -> Self {
        Partition::new(n, (0..n).collect()).unwrap()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn i_set(&self) -> &[usize] {
        &self.i_set
    }

    pub fn j_set(&self) -> &[usize] {
        &self.j_set
    }

    pub fn contains_i(&self, ambient: usize) -> bool {
        self.i_set.binary_search(&ambient).is_ok()
    }

    /// Chart slot -> ambient index, ordered `(x_I sorted, p_J sorted)`.
    pub fn slot_ambient(&self, slot: usize) -> usize {
        if slot < self.i_set.len() {
            self.i_set[slot]
        } else {
            self.j_set[slot - self.i_set.len()]
        }
    }

    /// True when the slot carries a `p_j` coordinate.
    pub fn slot_is_p(&self, slot: usize) -> bool {
        slot >= self.i_set.len()
    }

    /// Ambient index -> chart slot.
    pub fn ambient_slot(&self, ambient: usize) -> usize {
        match self.i_set.binary_search(&ambient) {
            Ok(k) => k,
            Err(_) => {
                self.i_set.len() + self.j_set.binary_search(&ambient).expect("ambient in J")
            }
        }
    }
}

/// Axis-aligned validity box in chart coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl DomainBox {
    pub fn contains<F: Scalar>(&self, u: &[F]) -> bool {
        let eps = F::from_f64_lossy(1e-12);
        u.iter().enumerate().all(|(k, &v)| {
            v >= F::from_f64_lossy(self.min[k]) - eps && v <= F::from_f64_lossy(self.max[k]) + eps
        })
    }
}

/// Local model: generating function over a partition, with a validity box.
#[derive(Debug, Clone)]
pub struct GeneratingChart {
    pub name: String,
    pub partition: Partition,
    pub g: Expression,
    pub domain: DomainBox,
    bindings: Bindings,
}

impl GeneratingChart {
    pub fn new(
        name: impl Into<String>,
        partition: Partition,
        g: Expression,
        domain: DomainBox,
    ) -> Result<Self> {
        let n = partition.n();
        if domain.min.len() != n || domain.max.len() != n {
            return Err(Error::InvalidModel("domain box dimension mismatch".into()));
        }
        let mut bindings = Bindings::new();
        for slot in 0..n {
            let ambient = partition.slot_ambient(slot);
            let var = if partition.slot_is_p(slot) {
                Var::P(ambient + 1)
            } else {
                Var::X(ambient + 1)
            };
            bindings.bind(var, slot);
        }
        // every variable of g must resolve; x-vars must be in I, p-vars in J
        for v in g.variables() {
            let ok = match &v {
                Var::X(i) if *i >= 1 => {
                    *i <= n && partition.contains_i(i - 1)
                }
                Var::P(j) if *j >= 1 => *j <= n && !partition.contains_i(j - 1),
                _ => false,
            };
            if !ok {
                return Err(Error::UnknownVariable { name: v.to_string() });
            }
        }
        Ok(GeneratingChart { name: name.into(), partition, g, domain, bindings })
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    pub fn bindings(&self) -> &Bindings {
        &self.bindings
    }

    /// Chart with `J = ∅`, i.e. a plain potential `z = f(x)`.
    pub fn is_potential(&self) -> bool {
        self.partition.j_set().is_empty()
    }

    pub fn point<'a, F: Scalar>(&'a self, u: Vec<F>) -> ChartPoint<'a, F> {
        ChartPoint { chart: self, u }
    }

    pub fn jet<F: Scalar>(&self, u: &[F]) -> Result<Jet3<F>> {
        self.g.eval_jet3(&self.bindings, u)
    }

    pub fn value<F: Scalar>(&self, u: &[F]) -> Result<F> {
        self.g.eval_value(&self.bindings, u)
    }
}

/// A point of the standard contact space `R^{2n+1}` with derived dual height.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPoint<F> {
    pub x: Vec<F>,
    pub p: Vec<F>,
    pub z: F,
    /// `z' = p^T x − z`, stored at construction.
    pub zprime: F,
}

impl<F: Scalar> ContactPoint<F> {
    pub fn new(x: Vec<F>, p: Vec<F>, z: F) -> Self {
        let zprime = dot(&p, &x) - z;
        ContactPoint { x, p, z, zprime }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// A point of a local model in chart coordinates `u = (x_I, p_J)`.
#[derive(Debug, Clone)]
pub struct ChartPoint<'a, F> {
    pub chart: &'a GeneratingChart,
    pub u: Vec<F>,
}

impl<'a, F: Scalar> ChartPoint<'a, F> {
    pub fn in_domain(&self) -> bool {
        self.chart.domain.contains(&self.u)
    }
}

/// Lift a chart point to the full contact space:
/// `p_I = ∂g/∂x_I`, `x_J = −∂g/∂p_J`, `z = p_J^T x_J + g`.
pub fn lift<F: Scalar>(cp: &ChartPoint<'_, F>) -> Result<ContactPoint<F>> {
    let chart = cp.chart;
    let n = chart.n();
    let jet = chart.jet(&cp.u)?;
    let part = &chart.partition;
    let mut x = vec![F::zero(); n];
    let mut p = vec![F::zero(); n];
    let mut z = jet.v;
    for slot in 0..n {
        let ambient = part.slot_ambient(slot);
        if part.slot_is_p(slot) {
            let xj = -jet.grad(slot);
            x[ambient] = xj;
            p[ambient] = cp.u[slot];
            z = z + cp.u[slot] * xj;
        } else {
            x[ambient] = cp.u[slot];
            p[ambient] = jet.grad(slot);
        }
    }
    Ok(ContactPoint::new(x, p, z))
}

/// e-Legendre map `π^e(x_I, p_J) = (x_I, −∂g/∂p_J, −p_J^T ∂g/∂p_J + g)`,
/// implemented from the displayed formula (not via [`lift`]).
pub fn e_legendre<F: Scalar>(cp: &ChartPoint<'_, F>) -> Result<(Vec<F>, F)> {
    let chart = cp.chart;
    let n = chart.n();
    let jet = chart.jet(&cp.u)?;
    let part = &chart.partition;
    let mut x = vec![F::zero(); n];
    let mut z = jet.v;
    for slot in 0..n {
        let ambient = part.slot_ambient(slot);
        if part.slot_is_p(slot) {
            x[ambient] = -jet.grad(slot);
            z = z - cp.u[slot] * jet.grad(slot);
        } else {
            x[ambient] = cp.u[slot];
        }
    }
    Ok((x, z))
}

/// m-Legendre map `π^m(x_I, p_J) = (∂g/∂x_I, p_J, x_I^T ∂g/∂x_I − g)`.
pub fn m_legendre<F: Scalar>(cp: &ChartPoint<'_, F>) -> Result<(Vec<F>, F)> {
    let chart = cp.chart;
    let n = chart.n();
    let jet = chart.jet(&cp.u)?;
    let part = &chart.partition;
    let mut p = vec![F::zero(); n];
    let mut zprime = -jet.v;
    for slot in 0..n {
        let ambient = part.slot_ambient(slot);
        if part.slot_is_p(slot) {
            p[ambient] = cp.u[slot];
        } else {
            p[ambient] = jet.grad(slot);
            zprime = zprime + cp.u[slot] * jet.grad(slot);
        }
    }
    Ok((p, zprime))
}

/// Legendre transform of a regular potential chart at `x`:
/// `p = ∂f/∂x`, `dual = p^T x − f(x)`.
pub fn legendre_transform_regular<F: Scalar>(
    chart: &GeneratingChart,
    x: &[F],
) -> Result<(Vec<F>, F)> {
    assert!(chart.is_potential(), "legendre_transform_regular requires J = ∅");
    let jet = chart.jet(x)?;
    let hess = hessian_matrix(&jet);
    let cond = hess.cond();
    if !(cond < F::from_f64_lossy(SINGULAR_COND_THRESHOLD)) {
        return Err(Error::SingularHessian { cond: cond.to_f64().unwrap_or(f64::INFINITY) });
    }
    let p: Vec<F> = (0..chart.n()).map(|i| jet.grad(i)).collect();
    let dual = dot(&p, x) - jet.v;
    Ok((p, dual))
}

/// Invert the gradient map of a potential chart by Newton iteration:
/// solve `∂f/∂x = p` starting from `x0`.
pub fn inverse_gradient_map<F: Scalar>(
    chart: &GeneratingChart,
    p: &[F],
    x0: &[F],
) -> Result<Vec<F>> {
    assert!(chart.is_potential());
    let tol = F::from_f64_lossy(NEWTON_TOL);
    let mut x = x0.to_vec();
    for _ in 0..NEWTON_MAX_ITER {
        let jet = chart.jet(&x)?;
        let residual: Vec<F> = (0..chart.n()).map(|i| jet.grad(i) - p[i]).collect();
        let hess = hessian_matrix(&jet);
        let step = hess
            .solve(&residual)
            .ok_or(Error::SingularHessian { cond: f64::INFINITY })?;
        let mut step_norm = F::zero();
        let mut res_norm = F::zero();
        for i in 0..x.len() {
            x[i] = x[i] - step[i];
            step_norm = step_norm.max(step[i].abs());
            res_norm = res_norm.max(residual[i].abs());
        }
        if step_norm < tol && res_norm < tol {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence { seed: x0.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect() })
}

fn hessian_matrix<F: Scalar>(jet: &Jet3<F>) -> Mat<F> {
    let n = jet.dim();
    Mat::from_fn(n, n, |i, j| jet.h(i, j))
}

/// The canonical transformation
/// `(x, p, z) ↦ (x_I, p_J, p_I, −x_J, −p_J^T x_J + z)`
/// returned as the `2n+1` coordinates of the image point.
pub fn canonical_transform<F: Scalar>(pt: &ContactPoint<F>, part: &Partition) -> Vec<F> {
    let n = pt.n();
    let mut out = vec![F::zero(); 2 * n + 1];
    let mut z = pt.z;
    for a in 0..n {
        if part.contains_i(a) {
            out[a] = pt.x[a];
            out[n + a] = pt.p[a];
        } else {
            out[a] = pt.p[a];
            out[n + a] = -pt.x[a];
            z = z - pt.p[a] * pt.x[a];
        }
    }
    out[2 * n] = z;
    out
}

// ---------------------------------------------------------------------------
// model files

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartFile {
    pub name: String,
    /// 1-based ambient indices of the `x`-block.
    #[serde(rename = "I")]
    pub i_set: Vec<usize>,
    pub g: String,
    pub domain: DomainBox,
}

impl ChartFile {
    pub fn build(&self, n: usize) -> Result<GeneratingChart> {
        for &i in &self.i_set {
            if i == 0 {
                return Err(Error::InvalidModel("chart indices are 1-based".into()));
            }
        }
        let part = Partition::new(n, self.i_set.iter().map(|&i| i - 1).collect())?;
        let g = crate::expr::parse(&self.g)?;
        GeneratingChart::new(self.name.clone(), part, g, self.domain.clone())
    }
}
