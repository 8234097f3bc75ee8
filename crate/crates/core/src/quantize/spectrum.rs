use alloc::format;
use alloc::vec::Vec;

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::TorusOperator;
use crate::symbols::Transport;
use crate::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const EIGEN_MAX_ITER: usize = 100_000;

/// Eigenpairs of a Hermitian operator, eigenvalues ascending; column `i` of
/// `vectors` belongs to `values[i]`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

fn hermitian_dense(op: &TorusOperator) -> Result<DMatrix<Complex64>> {
    let defect = op.hermitian_defect();
    if defect > HERMITIAN_TOL * op.max_abs().max(1.0) {
        return Err(Error::NotHermitian { defect });
    }
    let m = op.to_dense();
    // Symmetrize away the rounding-level defect.
    Ok((&m + m.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Full eigendecomposition of a Hermitian operator.
pub fn spectrum(op: &TorusOperator) -> Result<Spectrum> {
    let m = hermitian_dense(op)?;
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::EigenFailure("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let cols: Vec<DVector<Complex64>> = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    Ok(Spectrum { values, vectors: DMatrix::from_columns(&cols) })
}

/// Eigenvalues of a general operator via complex Schur form, sorted by real
/// then imaginary part.
pub fn eigenvalues(op: &TorusOperator) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(op.to_dense(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::EigenFailure("Schur decomposition did not converge".into()))?;
    let ev = schur
        .eigenvalues()
        .ok_or_else(|| Error::EigenFailure("Schur form is not triangular".into()))?;
    let mut values: Vec<Complex64> = ev.iter().copied().collect();
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(values)
}

/// Largest singular value.
pub fn operator_norm(op: &TorusOperator) -> Result<f64> {
    op.interior_norm(0)
}

/// One eigenpair in a spectral window, labelled by the nearest `ħ ω·k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowEigen {
    pub value: f64,
    pub label: Vec<i32>,
    /// `|value − ħ ω·label|`.
    pub gap: f64,
    #[serde(skip)]
    pub vector: Vec<Complex64>,
}

/// Eigenpairs with `|λ − center| ≤ width`.
pub fn window_spectrum(op: &TorusOperator, omega: &Transport, center: f64, width: f64) -> Result<Vec<WindowEigen>> {
    let basis = op.basis();
    if omega.dim() != basis.dim() {
        return Err(Error::InvalidParameter(format!(
            "frequency of dimension {} for a basis of dimension {}",
            omega.dim(),
            basis.dim()
        )));
    }
    let spec = spectrum(op)?;
    let hbar = op.hbar();
    let d = basis.dim();
    let mut out = Vec::new();
    for (i, &value) in spec.values.iter().enumerate() {
        if (value - center).abs() > width {
            continue;
        }
        let (mut best, mut gap) = (0usize, f64::INFINITY);
        for j in 0..basis.len() {
            let g = (value - hbar * omega.frequency(&basis.k(j)[..d])).abs();
            if g < gap {
                best = j;
                gap = g;
            }
        }
        out.push(WindowEigen {
            value,
            label: basis.k(best)[..d].to_vec(),
            gap,
            vector: spec.vectors.column(i).iter().copied().collect(),
        });
    }
    Ok(out)
}

/// `e^{itH}` for Hermitian `H`, through its eigendecomposition (unitary to
/// rounding on the truncated space).
pub fn exp_hermitian(op: &TorusOperator, t: f64) -> Result<TorusOperator> {
    let spec = spectrum(op)?;
    let phases = DVector::from_iterator(spec.values.len(), spec.values.iter().map(|&l| Complex64::from_polar(1.0, t * l)));
    let v = &spec.vectors;
    let m = v * DMatrix::from_diagonal(&phases) * v.adjoint();
    TorusOperator::from_dense(op.basis(), op.hbar(), &m)
}
