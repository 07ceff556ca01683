//! Third-order jets: value, gradient, Hessian and third-derivative tensor of a
//! scalar function of `n` variables, propagated by truncated Taylor
//! arithmetic.
//!
//! Symmetric slots are stored once (upper simplex) and mirrored on read, so
//! symmetry of `H` and `T` holds exactly by construction.

use crate::scalar::Scalar;

/// Value plus all partial derivatives up to order 3.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet3<F> {
    n: usize,
    /// Function value.
    pub v: F,
    grad: Vec<F>,
    hess: Vec<F>,
    third: Vec<F>,
}

fn idx2(n: usize, mut i: usize, mut j: usize) -> usize {
    if i > j {
        std::mem::swap(&mut i, &mut j);
    }
    i * (2 * n - i + 1) / 2 + (j - i)
}

fn idx3(n: usize, a: usize, b: usize, c: usize) -> usize {
    let mut s = [a, b, c];
    s.sort_unstable();
    let [i, j, k] = s;
    let mut off = 0;
    for a in 0..i {
        let m = n - a;
        off += m * (m + 1) / 2;
    }
    let m = n - i;
    let (jp, kp) = (j - i, k - i);
    off + jp * (2 * m - jp + 1) / 2 + (kp - jp)
}

impl<F: Scalar> Jet3<F> {
    pub fn constant(n: usize, v: F) -> Self {
        Jet3 {
            n,
            v,
            grad: vec![F::zero(); n],
            hess: vec![F::zero(); n * (n + 1) / 2],
            third: vec![F::zero(); n * (n + 1) * (n + 2) / 6],
        }
    }

    /// Jet of the coordinate function `u_slot` at the point `value`.
    pub fn variable(n: usize, slot: usize, value: F) -> Self {
        let mut j = Self::constant(n, value);
        j.grad[slot] = F::one();
        j
    }

    /// Build a jet from explicit derivative callbacks; only the canonical
    /// `i <= j <= k` slots are queried, so symmetry is enforced by storage.
    pub fn from_derivatives(
        n: usize,
        v: F,
        grad: &[F],
        h: impl Fn(usize, usize) -> F,
        t: impl Fn(usize, usize, usize) -> F,
    ) -> Self {
        let mut jet = Self::constant(n, v);
        jet.grad.copy_from_slice(grad);
        for i in 0..n {
            for j in i..n {
                jet.hess[idx2(n, i, j)] = h(i, j);
            }
        }
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    jet.third[idx3(n, i, j, k)] = t(i, j, k);
                }
            }
        }
        jet
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn grad(&self, i: usize) -> F {
        self.grad[i]
    }

    pub fn gradient(&self) -> &[F] {
        &self.grad
    }

    pub fn h(&self, i: usize, j: usize) -> F {
        self.hess[idx2(self.n, i, j)]
    }

    pub fn t(&self, i: usize, j: usize, k: usize) -> F {
        self.third[idx3(self.n, i, j, k)]
    }

    /// Dense Hessian, mirrored from packed storage.
    pub fn hessian_rows(&self) -> Vec<Vec<F>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.h(i, j)).collect()).collect()
    }

    fn zip(&self, other: &Self, f: impl Fn(F, F) -> F) -> Self {
        assert_eq!(self.n, other.n);
        Jet3 {
            n: self.n,
            v: f(self.v, other.v),
            grad: self.grad.iter().zip(&other.grad).map(|(&a, &b)| f(a, b)).collect(),
            hess: self.hess.iter().zip(&other.hess).map(|(&a, &b)| f(a, b)).collect(),
            third: self.third.iter().zip(&other.third).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn neg(&self) -> Self {
        Jet3 {
            n: self.n,
            v: -self.v,
            grad: self.grad.iter().map(|&a| -a).collect(),
            hess: self.hess.iter().map(|&a| -a).collect(),
            third: self.third.iter().map(|&a| -a).collect(),
        }
    }

    /// Leibniz product up to order 3.
    pub fn mul(&self, b: &Self) -> Self {
        assert_eq!(self.n, b.n);
        let n = self.n;
        let a = self;
        let mut out = Self::constant(n, a.v * b.v);
        for i in 0..n {
            out.grad[i] = a.grad[i] * b.v + a.v * b.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                out.hess[idx2(n, i, j)] = a.h(i, j) * b.v
                    + a.grad[i] * b.grad[j]
                    + a.grad[j] * b.grad[i]
                    + a.v * b.h(i, j);
            }
        }
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    out.third[idx3(n, i, j, k)] = a.t(i, j, k) * b.v
                        + a.v * b.t(i, j, k)
                        + a.h(i, j) * b.grad[k]
                        + a.h(i, k) * b.grad[j]
                        + a.h(j, k) * b.grad[i]
                        + a.grad[i] * b.h(j, k)
                        + a.grad[j] * b.h(i, k)
                        + a.grad[k] * b.h(i, j);
                }
            }
        }
        out
    }

    /// Univariate chain rule (Faa di Bruno to order 3): `d` holds the
    /// derivatives of the outer function at `self.v`, orders 0..=3.
    pub fn chain(&self, d: [F; 4]) -> Self {
        let n = self.n;
        let a = self;
        let mut out = Self::constant(n, d[0]);
        for i in 0..n {
            out.grad[i] = d[1] * a.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                out.hess[idx2(n, i, j)] = d[1] * a.h(i, j) + d[2] * a.grad[i] * a.grad[j];
            }
        }
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    out.third[idx3(n, i, j, k)] = d[1] * a.t(i, j, k)
                        + d[2]
                            * (a.h(i, j) * a.grad[k]
                                + a.h(i, k) * a.grad[j]
                                + a.h(j, k) * a.grad[i])
                        + d[3] * a.grad[i] * a.grad[j] * a.grad[k];
                }
            }
        }
        out
    }

    /// Reciprocal; caller must reject `v == 0` first.
    pub fn recip(&self) -> Self {
        let v = self.v;
        let v2 = v * v;
        let two = F::from_f64_lossy(2.0);
        let six = F::from_f64_lossy(6.0);
        self.chain([v.recip(), -(v2.recip()), two / (v2 * v), -six / (v2 * v2)])
    }

    /// Integer power via the chain rule; exact for polynomials.
    pub fn powi(&self, k: i64) -> Self {
        let v = self.v;
        let d = |order: i64| -> F {
            // k (k-1) ... (k-order+1) v^(k-order), with the convention that a
            // vanished coefficient kills the whole term.
            let mut coeff = F::one();
            for s in 0..order {
                coeff = coeff * F::from_f64_lossy((k - s) as f64);
            }
            if coeff == F::zero() {
                return F::zero();
            }
            coeff * v.powi((k - order) as i32)
        };
        self.chain([d(0), d(1), d(2), d(3)])
    }

    /// Real power `v^r` for `v > 0`.
    pub fn powf(&self, r: F) -> Self {
        let v = self.v;
        let one = F::one();
        let two = F::from_f64_lossy(2.0);
        self.chain([
            v.powf(r),
            r * v.powf(r - one),
            r * (r - one) * v.powf(r - two),
            r * (r - one) * (r - two) * v.powf(r - two - one),
        ])
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain([e, e, e, e])
    }

    pub fn ln(&self) -> Self {
        let v = self.v;
        let two = F::from_f64_lossy(2.0);
        self.chain([v.ln(), v.recip(), -(v * v).recip(), two / (v * v * v)])
    }

    pub fn sqrt(&self) -> Self {
        let v = self.v;
        let s = v.sqrt();
        let half = F::from_f64_lossy(0.5);
        let quarter = F::from_f64_lossy(0.25);
        let three_eighths = F::from_f64_lossy(0.375);
        self.chain([s, half / s, -quarter / (s * v), three_eighths / (s * v * v)])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain([c, -s, -c, s])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(n: usize, i: usize, v: f64) -> Jet3<f64> {
        Jet3::variable(n, i, v)
    }

    #[test]
    fn product_rule_quadratic() {
        // f = x0 * x1 at (2, 3)
        let f = var(2, 0, 2.0).mul(&var(2, 1, 3.0));
        assert_eq!(f.v, 6.0);
        assert_eq!(f.grad(0), 3.0);
        assert_eq!(f.grad(1), 2.0);
        assert_eq!(f.h(0, 1), 1.0);
        assert_eq!(f.h(0, 0), 0.0);
        assert_eq!(f.t(0, 0, 1), 0.0);
    }

    #[test]
    fn cubic_third_derivative() {
        // f = x^3 at x = 2: f''' = 6
        let f = var(1, 0, 2.0).powi(3);
        assert_eq!(f.v, 8.0);
        assert_eq!(f.grad(0), 12.0);
        assert_eq!(f.h(0, 0), 12.0);
        assert_eq!(f.t(0, 0, 0), 6.0);
    }

    #[test]
    fn powi_at_zero_base() {
        let f = var(1, 0, 0.0).powi(4);
        assert_eq!(f.v, 0.0);
        assert_eq!(f.grad(0), 0.0);
        assert_eq!(f.h(0, 0), 0.0);
        assert_eq!(f.t(0, 0, 0), 0.0);
    }

    #[test]
    fn chain_exp() {
        let f = var(1, 0, 0.5).exp();
        let e = 0.5f64.exp();
        assert!((f.v - e).abs() < 1e-15);
        assert!((f.t(0, 0, 0) - e).abs() < 1e-15);
    }

    #[test]
    fn symmetry_is_structural() {
        // mixed cubic x0^2 * x1 has T[0][0][1] = 2 under all index orders
        let f = var(2, 0, 1.5).powi(2).mul(&var(2, 1, -0.5));
        assert_eq!(f.t(0, 0, 1), 2.0);
        assert_eq!(f.t(0, 1, 0), 2.0);
        assert_eq!(f.t(1, 0, 0), 2.0);
    }
}
