//! Dense complex linear algebra on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::numerics::{C64, I};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are the orthonormal eigenvectors, in the order of `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Self {
        let eig = SymmetricEigen::new(m.clone());
        let n = m.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    /// V f(Λ) V† for a scalar function of the eigenvalues.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let d = CVector::from_iterator(self.values.len(), self.values.iter().map(|&x| f(x)));
        let scaled = CMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |r, c| {
            self.vectors[(r, c)] * d[c]
        });
        scaled * self.vectors.adjoint()
    }

    /// Groups numerically equal eigenvalues; returns (value, projector) pairs.
    pub fn spectral_projectors(&self, tol: f64) -> Vec<(f64, CMatrix)> {
        let n = self.values.len();
        let mut out: Vec<(f64, Vec<usize>)> = Vec::new();
        for i in 0..n {
            match out.last_mut() {
                Some((v, idx)) if (self.values[i] - *v).abs() <= tol => idx.push(i),
                _ => out.push((self.values[i], vec![i])),
            }
        }
        out.into_iter()
            .map(|(_, idx)| {
                let mean = idx.iter().map(|&i| self.values[i]).sum::<f64>() / idx.len() as f64;
                let mut p = CMatrix::zeros(n, n);
                for &i in &idx {
                    let v = self.vectors.column(i);
                    p += v * v.adjoint();
                }
                (mean, p)
            })
            .collect()
    }
}

/// ‖M − M†‖_F.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// e^{−i s M} for Hermitian M.
pub fn expm_hermitian(m: &CMatrix, s: f64) -> CMatrix {
    HermitianEigen::new(m).apply(|x| (-I * s * x).exp())
}

/// ‖U†U − 1‖_F.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - CMatrix::identity(n, n)).norm()
}

/// Taylor coefficients of λ ↦ e^{X + λE} at λ = 0: element k is (1/k!) ∂^k_λ e^{X+λE}.
///
/// Uses the exponential of the block bidiagonal matrix with X on the diagonal and E on
/// the superdiagonal, whose first block row holds exactly these coefficients.
pub fn exp_taylor_coefficients(x: &CMatrix, e: &CMatrix, order: usize) -> Vec<CMatrix> {
    let n = x.nrows();
    let blocks = order + 1;
    let mut big = CMatrix::zeros(n * blocks, n * blocks);
    for b in 0..blocks {
        big.view_mut((b * n, b * n), (n, n)).copy_from(x);
        if b + 1 < blocks {
            big.view_mut((b * n, (b + 1) * n), (n, n)).copy_from(e);
        }
    }
    let ex = big.exp();
    (0..blocks)
        .map(|k| ex.view((0, k * n), (n, n)).into_owned())
        .collect()
}

/// ⟨a|M|b⟩ with the conjugate-linear first slot.
pub fn braket(a: &CVector, m: &CMatrix, b: &CVector) -> C64 {
    a.dotc(&(m * b))
}
