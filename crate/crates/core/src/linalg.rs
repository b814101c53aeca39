//! Small dense helpers: split real/imaginary products, truncated
//! pseudo-inverse least squares and PSD inversion with a relative cutoff.

use nalgebra::{DMatrix, SMatrix, SymmetricEigen};

use crate::{CMatrix, CVector, C64};

/// Complex matrix stored as two real matrices so large products go through
/// the real GEMM kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMatrix {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl SplitMatrix {
    pub fn from_complex(m: &CMatrix) -> Self {
        Self {
            re: m.map(|v| v.re),
            im: m.map(|v| v.im),
        }
    }

    /// Split form of `mᵀ` (plain transpose, no conjugation).
    pub fn transpose_of(m: &CMatrix) -> Self {
        let (rows, cols) = m.shape();
        Self {
            re: DMatrix::from_fn(cols, rows, |i, j| m[(j, i)].re),
            im: DMatrix::from_fn(cols, rows, |i, j| m[(j, i)].im),
        }
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &SplitMatrix) -> SplitMatrix {
        let mut re = &self.re * &rhs.re;
        re.gemm(-1.0, &self.im, &rhs.im, 1.0);
        let mut im = &self.re * &rhs.im;
        im.gemm(1.0, &self.im, &rhs.re, 1.0);
        SplitMatrix { re, im }
    }

    /// `self · v` for a complex vector.
    pub fn mul_vec(&self, v: &CVector) -> CVector {
        let n = self.nrows();
        let mut out = CVector::zeros(n);
        for (j, vj) in v.iter().enumerate() {
            let (cre, cim) = (self.re.column(j), self.im.column(j));
            for i in 0..n {
                let a = C64::new(cre[i], cim[i]);
                out[i] += a * vj;
            }
        }
        out
    }

    pub fn to_complex(&self) -> CMatrix {
        CMatrix::from_fn(self.nrows(), self.ncols(), |i, j| C64::new(self.re[(i, j)], self.im[(i, j)]))
    }

    /// Columns `start..start+count` as a complex matrix.
    pub fn columns_complex(&self, start: usize, count: usize) -> CMatrix {
        CMatrix::from_fn(self.nrows(), count, |i, j| {
            C64::new(self.re[(i, start + j)], self.im[(i, start + j)])
        })
    }
}

/// Least-squares fit `min_v ‖y - B v‖²` through the pseudo-inverse of `B`,
/// discarding singular values below `rel_cutoff · σ_max`.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    pub coefficients: CVector,
    pub residual: f64,
    pub rank: usize,
}

pub fn truncated_least_squares(b: &CMatrix, y: &CVector, rel_cutoff: f64) -> LeastSquaresFit {
    let k = b.ncols();
    let y_energy = y.norm_squared();
    if b.nrows() == 0 || k == 0 {
        return LeastSquaresFit {
            coefficients: CVector::zeros(k),
            residual: y_energy,
            rank: 0,
        };
    }
    let svd = b.clone().svd(true, true);
    let (u, v_t) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => unreachable!("both singular vector sets were requested"),
    };
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut coefficients = CVector::zeros(k);
    let mut explained = 0.0;
    let mut rank = 0;
    if sigma_max > 0.0 {
        for (idx, &s) in svd.singular_values.iter().enumerate() {
            if s <= rel_cutoff * sigma_max {
                continue;
            }
            rank += 1;
            let proj = u.column(idx).dotc(y);
            explained += proj.norm_sqr();
            // v += V[:, idx] · (u_idxᴴ y) / σ
            for r in 0..k {
                coefficients[r] += v_t[(idx, r)].conj() * proj / s;
            }
        }
    }
    LeastSquaresFit {
        coefficients,
        residual: (y_energy - explained).max(0.0),
        rank,
    }
}

/// Inverse of a symmetric positive semidefinite matrix, or `None` when any
/// eigenvalue falls below `rel_cutoff · λ_max`.
pub fn psd_inverse<const N: usize>(m: &SMatrix<f64, N, N>, rel_cutoff: f64) -> Option<SMatrix<f64, N, N>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let sym = DMatrix::from_fn(N, N, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) || eig.eigenvalues.iter().any(|&l| l <= rel_cutoff * max) {
        return None;
    }
    let inv_diag = eig.eigenvalues.map(|l| 1.0 / l);
    let inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_diag) * eig.eigenvectors.transpose();
    Some(SMatrix::from_fn(|i, j| inv[(i, j)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_complex(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn split_product_matches_complex_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_complex(17, 9, &mut rng);
        let b = random_complex(17, 5, &mut rng);
        let expected = a.transpose() * &b;
        let got = SplitMatrix::transpose_of(&a).mul(&SplitMatrix::from_complex(&b)).to_complex();
        assert!((got - &expected).norm() < 1e-12 * expected.norm());

        let v = CVector::from_fn(17, |i, _| C64::new(i as f64, 1.0));
        let mv = SplitMatrix::transpose_of(&a).mul_vec(&v);
        assert!((mv - a.tr_mul(&v)).norm() < 1e-12);
    }

    #[test]
    fn least_squares_recovers_exact_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = random_complex(40, 6, &mut rng);
        let v = CVector::from_fn(6, |i, _| C64::new(1.0 + i as f64, -0.5));
        let y = &b * &v;
        let fit = truncated_least_squares(&b, &y, 1e-10);
        assert_eq!(fit.rank, 6);
        assert!((fit.coefficients - v).norm() < 1e-10);
        assert!(fit.residual < 1e-18 * y.norm_squared());
    }

    #[test]
    fn least_squares_residual_matches_explicit_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_complex(30, 4, &mut rng);
        let y = CVector::from_fn(30, |_, _| C64::new(rng.random(), rng.random()));
        let fit = truncated_least_squares(&b, &y, 1e-10);
        let explicit = (&y - &b * &fit.coefficients).norm_squared();
        assert_relative_eq!(fit.residual, explicit, max_relative = 1e-10);
    }

    #[test]
    fn rank_deficient_columns_are_truncated() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let col = random_complex(20, 1, &mut rng);
        let mut b = CMatrix::zeros(20, 3);
        b.set_column(0, &col.column(0));
        b.set_column(1, &(col.column(0) * C64::new(0.0, 2.0)));
        let fit = truncated_least_squares(&b, &col.column(0).into_owned(), 1e-10);
        assert_eq!(fit.rank, 1);
        assert!(fit.residual < 1e-20);
        assert!(fit.coefficients.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn psd_inverse_and_singularity() {
        let m = Matrix3::new(4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0);
        let inv = psd_inverse(&m, 1e-12).unwrap();
        assert_relative_eq!(inv * m, Matrix3::identity(), epsilon = 1e-12);

        let singular = Matrix3::new(1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(psd_inverse(&singular, 1e-12).is_none());
        assert!(psd_inverse(&Matrix3::zeros(), 1e-12).is_none());
    }
}
