//! Small dense linear-algebra helpers built around a lower Cholesky factor.

use nalgebra::{DMatrix, DVector};

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factorizes `a`, reading only its lower triangle. Fails when a pivot is
    /// not strictly greater than `pivot_tol` (or is not finite).
    pub fn with_tolerance(a: &DMatrix<f64>, pivot_tol: f64) -> Option<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return None;
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > pivot_tol) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(Self { l })
    }

    /// Factorizes with a pivot floor relative to the largest diagonal entry.
    pub fn new(a: &DMatrix<f64>) -> Option<Self> {
        let scale = a.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Self::with_tolerance(a, 1e-14 * scale.max(f64::MIN_POSITIVE))
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `log det A = 2 Σ log l_jj`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Dense inverse, symmetrized.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::<f64>::zeros(n, n);
        let mut e = DVector::<f64>::zeros(n);
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        symmetrize(&inv)
    }

    /// Quadratic form `xᵀ A⁻¹ x` computed as `‖L⁻¹x‖²`.
    pub fn inv_quad_form(&self, x: &DVector<f64>) -> f64 {
        let n = self.dim();
        let mut y = x.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y.norm_squared()
    }
}

/// Returns `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest absolute asymmetry `|m_jk − m_kj|`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for k in (j + 1)..n {
            worst = worst.max((m[(j, k)] - m[(k, j)]).abs());
        }
    }
    worst
}

/// Modulus of the eigenvalue of largest magnitude of a symmetric matrix.
pub fn symmetric_spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(*v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reproduces_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0]);
        let c = Cholesky::new(&a).unwrap();
        let back = c.factor() * c.factor().transpose();
        assert!((back - &a).abs().max() < 1e-12);
        let inv = c.inverse();
        let id = &a * inv;
        assert!((id - DMatrix::identity(3, 3)).abs().max() < 1e-12);
        let det: f64 = a.clone().determinant();
        assert!((c.log_det() - det.ln()).abs() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Cholesky::new(&a).is_none());
    }

    #[test]
    fn inverse_quadratic_form() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let x = DVector::from_vec(vec![1.0, -2.0]);
        let c = Cholesky::new(&a).unwrap();
        let direct = (x.transpose() * a.try_inverse().unwrap() * &x)[(0, 0)];
        assert!((c.inv_quad_form(&x) - direct).abs() < 1e-12);
    }
}
