//! Lower-level ridge problem `min_u 1/2 |A u - b|^2 + lambda2/2 |u|^2` with the
//! forward-difference matrix `A` (row `i`: -1 at `i`, +1 at `i + 1`). Its
//! solution is `u = K^{-1} A^T b` with the tridiagonal `K = A^T A + lambda2 I`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `LDL^T` factors of a symmetric tridiagonal matrix with constant -1
/// off-diagonals: `l[i]` is the subdiagonal of the unit lower factor,
/// `pivots` the diagonal of `D`.
#[derive(Debug, Clone, PartialEq)]
struct TridiagonalLdl {
    pivots: Vec<f64>,
    lower: Vec<f64>,
}

impl TridiagonalLdl {
    fn factor(diag: &[f64], off: &[f64]) -> Self {
        let n = diag.len();
        let mut pivots = Vec::with_capacity(n);
        let mut lower = Vec::with_capacity(n.saturating_sub(1));
        pivots.push(diag[0]);
        for i in 1..n {
            let l = off[i - 1] / pivots[i - 1];
            lower.push(l);
            pivots.push(diag[i] - l * off[i - 1]);
        }
        Self { pivots, lower }
    }

    fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        if n == 0 {
            return;
        }
        for i in 1..n {
            rhs[i] -= self.lower[i - 1] * rhs[i - 1];
        }
        for (r, p) in rhs.iter_mut().zip(&self.pivots) {
            *r /= p;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.lower[i] * rhs[i + 1];
        }
    }
}

/// `A`, `K` and the cached factorization shared by every pixel of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceSystem {
    n: usize,
    lambda2: f64,
    diag: Vec<f64>,
    off: Vec<f64>,
    factor: TridiagonalLdl,
    /// Factors of `A A^T + lambda2 I`.
    dual: TridiagonalLdl,
    kinv_at: DMatrix<f64>,
}

pub fn build_system(n: usize, lambda2: f64) -> Result<DifferenceSystem> {
    DifferenceSystem::new(n, lambda2)
}

impl DifferenceSystem {
    pub fn new(n: usize, lambda2: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!("need at least 2 images, got {n}")));
        }
        if !(lambda2 > 0.0 && lambda2.is_finite()) {
            return Err(Error::Parameter(format!("lambda2 must be positive, got {lambda2}")));
        }
        let diag: Vec<f64> = (0..n)
            .map(|i| if i == 0 || i == n - 1 { 1.0 } else { 2.0 } + lambda2)
            .collect();
        let off = vec![-1.0; n - 1];
        let factor = TridiagonalLdl::factor(&diag, &off);

        // K has eigenvalue lambda2 along the constant vector, so solving with
        // K directly amplifies rounding by 1/lambda2. The identity
        // K^{-1} A^T = A^T (A A^T + lambda2 I)^{-1} only involves the
        // well-conditioned dual matrix.
        let dual = TridiagonalLdl::factor(&vec![2.0 + lambda2; n - 1], &vec![-1.0; n - 2]);
        let mut kinv_at = DMatrix::zeros(n, n - 1);
        let mut column = vec![0.0; n - 1];
        for j in 0..n - 1 {
            column.iter_mut().for_each(|c| *c = 0.0);
            column[j] = 1.0;
            dual.solve_in_place(&mut column);
            kinv_at.set_column(j, &at_times(&column));
        }

        Ok(Self {
            n,
            lambda2,
            diag,
            off,
            factor,
            dual,
            kinv_at,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn k_diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn k_off_diagonal(&self) -> &[f64] {
        &self.off
    }

    pub fn k_dense(&self) -> DMatrix<f64> {
        let mut k = DMatrix::from_diagonal(&DVector::from_column_slice(&self.diag));
        for (i, &o) in self.off.iter().enumerate() {
            k[(i, i + 1)] = o;
            k[(i + 1, i)] = o;
        }
        k
    }

    /// The `(n - 1) x n` forward-difference matrix.
    pub fn a_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n - 1, self.n);
        for i in 0..self.n - 1 {
            a[(i, i)] = -1.0;
            a[(i, i + 1)] = 1.0;
        }
        a
    }

    /// `K^{-1} A^T`, columns `kappa_j`.
    pub fn kinv_at(&self) -> &DMatrix<f64> {
        &self.kinv_at
    }

    /// `A v` for a length-`n` vector.
    pub fn apply_a(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n - 1, |i, _| v[i + 1] - v[i])
    }

    /// `A^T b` for a length-`n - 1` vector.
    pub fn apply_at(&self, b: &DVector<f64>) -> DVector<f64> {
        at_times(b.as_slice())
    }

    /// Solves `K x = rhs` with the cached factorization.
    pub fn solve_k(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if rhs.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                actual: rhs.len(),
            });
        }
        let mut x = rhs.clone();
        self.factor.solve_in_place(x.as_mut_slice());
        Ok(x)
    }

    /// Lower-level minimizer `u = K^{-1} A^T b`.
    pub fn solve_u(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.n - 1 {
            return Err(Error::Dimension {
                expected: self.n - 1,
                actual: b.len(),
            });
        }
        let mut w = b.clone();
        self.dual.solve_in_place(w.as_mut_slice());
        Ok(self.apply_at(&w))
    }
}

fn at_times(b: &[f64]) -> DVector<f64> {
    let n = b.len() + 1;
    DVector::from_fn(n, |j, _| {
        let mut s = 0.0;
        if j < n - 1 {
            s -= b[j];
        }
        if j > 0 {
            s += b[j - 1];
        }
        s
    })
}

pub fn solve_u(system: &DifferenceSystem, b: &DVector<f64>) -> Result<DVector<f64>> {
    system.solve_u(b)
}
