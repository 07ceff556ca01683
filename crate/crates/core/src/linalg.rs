//! Small dense linear algebra for dimensions n <= 8.
//!
//! Everything here is hand-rolled on row-major `Vec` storage; the matrices in
//! this crate never exceed the ambient dimension of a local model, so simple
//! O(n^3) routines with partial pivoting are plenty.

use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<F> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn col(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[F]) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).fold(F::zero(), |acc, j| acc + self[(i, j)] * v[j]))
            .collect()
    }

    pub fn matmul(&self, other: &Mat<F>) -> Mat<F> {
        assert_eq!(self.cols, other.rows);
        Mat::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).fold(F::zero(), |acc, k| acc + self[(i, k)] * other[(k, j)])
        })
    }

    pub fn scale(&self, s: F) -> Mat<F> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * s)
    }

    pub fn add(&self, other: &Mat<F>) -> Mat<F> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + other[(i, j)])
    }

    pub fn sub(&self, other: &Mat<F>) -> Mat<F> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - other[(i, j)])
    }

    /// Max absolute entry.
    pub fn max_abs(&self) -> F {
        self.data.iter().fold(F::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// Solve `A x = b` by LU with partial pivoting. Returns `None` if the
    /// pivot underflows.
    pub fn solve(&self, b: &[F]) -> Option<Vec<F>> {
        assert_eq!(self.rows, self.cols);
        assert_eq!(b.len(), self.rows);
        let n = self.rows;
        let mut a = self.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let mut piv = k;
            for i in k + 1..n {
                if a[(i, k)].abs() > a[(piv, k)].abs() {
                    piv = i;
                }
            }
            if a[(piv, k)].abs() < F::from_f64_lossy(1e-300) {
                return None;
            }
            if piv != k {
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(piv, j)];
                    a[(piv, j)] = tmp;
                }
                x.swap(k, piv);
            }
            for i in k + 1..n {
                let m = a[(i, k)] / a[(k, k)];
                for j in k..n {
                    let v = a[(k, j)] * m;
                    a[(i, j)] = a[(i, j)] - v;
                }
                let v = x[k] * m;
                x[i] = x[i] - v;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s = s - a[(i, j)] * x[j];
            }
            x[i] = s / a[(i, i)];
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Mat<F>> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut inv = Mat::zeros(n, n);
        for j in 0..n {
            let mut e = vec![F::zero(); n];
            e[j] = F::one();
            let col = self.solve(&e)?;
            inv.set_col(j, &col);
        }
        Some(inv)
    }

    pub fn det(&self) -> F {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut det = F::one();
        for k in 0..n {
            let mut piv = k;
            for i in k + 1..n {
                if a[(i, k)].abs() > a[(piv, k)].abs() {
                    piv = i;
                }
            }
            if a[(piv, k)] == F::zero() {
                return F::zero();
            }
            if piv != k {
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(piv, j)];
                    a[(piv, j)] = tmp;
                }
                det = -det;
            }
            det = det * a[(k, k)];
            for i in k + 1..n {
                let m = a[(i, k)] / a[(k, k)];
                for j in k..n {
                    let v = a[(k, j)] * m;
                    a[(i, j)] = a[(i, j)] - v;
                }
            }
        }
        det
    }

    /// Singular values in descending order, via one-sided Jacobi.
    pub fn singular_values(&self) -> Vec<F> {
        let mut a = self.clone();
        let n = a.cols;
        let eps = F::epsilon() * F::from_f64_lossy(16.0);
        for _ in 0..60 {
            let mut off = F::zero();
            for p in 0..n {
                for q in p + 1..n {
                    let mut app = F::zero();
                    let mut aqq = F::zero();
                    let mut apq = F::zero();
                    for i in 0..a.rows {
                        app = app + a[(i, p)] * a[(i, p)];
                        aqq = aqq + a[(i, q)] * a[(i, q)];
                        apq = apq + a[(i, p)] * a[(i, q)];
                    }
                    off = off.max(apq.abs());
                    if apq.abs() <= eps * (app * aqq).sqrt() {
                        continue;
                    }
                    let tau = (aqq - app) / (F::from_f64_lossy(2.0) * apq);
                    let t = {
                        let sign = if tau >= F::zero() { F::one() } else { -F::one() };
                        sign / (tau.abs() + (F::one() + tau * tau).sqrt())
                    };
                    let c = F::one() / (F::one() + t * t).sqrt();
                    let s = c * t;
                    for i in 0..a.rows {
                        let aip = a[(i, p)];
                        let aiq = a[(i, q)];
                        a[(i, p)] = c * aip - s * aiq;
                        a[(i, q)] = s * aip + c * aiq;
                    }
                }
            }
            if off <= eps {
                break;
            }
        }
        let mut sv: Vec<F> = (0..n)
            .map(|j| (0..a.rows).fold(F::zero(), |acc, i| acc + a[(i, j)] * a[(i, j)]).sqrt())
            .collect();
        sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
        sv
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
    /// descending order.
    pub fn sym_eig(&self) -> Vec<F> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let eps = F::epsilon() * F::from_f64_lossy(16.0);
        for _ in 0..60 {
            let mut off = F::zero();
            for p in 0..n {
                for q in p + 1..n {
                    off = off.max(a[(p, q)].abs());
                    if a[(p, q)].abs() <= eps * (F::one() + a[(p, p)].abs() + a[(q, q)].abs()) {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (F::from_f64_lossy(2.0) * a[(p, q)]);
                    let t = {
                        let sign = if theta >= F::zero() { F::one() } else { -F::one() };
                        sign / (theta.abs() + (F::one() + theta * theta).sqrt())
                    };
                    let c = F::one() / (F::one() + t * t).sqrt();
                    let s = c * t;
                    for i in 0..n {
                        let aip = a[(i, p)];
                        let aiq = a[(i, q)];
                        a[(i, p)] = c * aip - s * aiq;
                        a[(i, q)] = s * aip + c * aiq;
                    }
                    for i in 0..n {
                        let api = a[(p, i)];
                        let aqi = a[(q, i)];
                        a[(p, i)] = c * api - s * aqi;
                        a[(q, i)] = s * api + c * aqi;
                    }
                }
            }
            if off <= eps {
                break;
            }
        }
        let mut eig: Vec<F> = (0..n).map(|i| a[(i, i)]).collect();
        eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
        eig
    }

    /// Condition number `s_max / s_min`; infinite when singular.
    pub fn cond(&self) -> F {
        let sv = self.singular_values();
        let smax = sv[0];
        let smin = sv[sv.len() - 1];
        if smin == F::zero() {
            F::infinity()
        } else {
            smax / smin
        }
    }
}

impl<F> std::ops::Index<(usize, usize)> for Mat<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F> std::ops::IndexMut<(usize, usize)> for Mat<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<F: Scalar>(a: &[F]) -> F {
    dot(a, a).sqrt()
}

pub fn axpy<F: Scalar>(alpha: F, x: &[F], y: &[F]) -> Vec<F> {
    x.iter().zip(y).map(|(&xi, &yi)| alpha * xi + yi).collect()
}

pub fn sub<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale<F: Scalar>(alpha: F, a: &[F]) -> Vec<F> {
    a.iter().map(|&x| alpha * x).collect()
}
