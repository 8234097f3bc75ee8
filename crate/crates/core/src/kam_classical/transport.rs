use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{TorusDiffeo, TorusVectorField};
use crate::fourier::Grid;
use crate::quantize::{interior_map_norm, transport_matrix, TorusBasis, TorusOperator};
use crate::symbols::{ModeSymbol, Transport};
use crate::{linf, Error, Index, Result, MAX_DIM};

/// Entries below this modulus are not stored; FFT round-off sits near 1e-17,
/// so anything smaller would fill the whole band with noise.
const PRUNE: f64 = 1e-14;
/// Largest tolerated spectral mass at the Nyquist edge of the quadrature grid.
const ALIAS_TOL: f64 = 1e-14;
const UNITARITY_TOL: f64 = 1e-8;

/// Matrix of `ψ ↦ √det ∂θ · ψ∘θ` on `|k|_∞ ≤ n`.
///
/// Column `k` holds the Fourier coefficients of `√det ∂θ(x) e^{ik·θ(x)}`,
/// computed by FFT on a grid of at least `4n` points per axis.
pub fn transport_unitary(theta: &TorusDiffeo, n: usize) -> Result<TorusOperator> {
    let d = theta.dim();
    let basis = TorusBasis::new(d, n)?;
    let grid = Grid::new(d, 4 * n)?;
    let disp = theta.u.eval_grid(&grid)?;
    let mut root = Vec::with_capacity(grid.len());
    for m in theta.u.jacobian_grid(&grid)? {
        let det = (nalgebra::Matrix3::identity() + m).determinant();
        if !(det > 0.0) {
            return Err(Error::DiffeoBreakdown { min_det: det });
        }
        root.push(det.sqrt());
    }

    let half = (grid.size() / 2) as i64;
    let mut entries: Vec<(usize, usize, Complex64)> = Vec::new();
    let mut band = 0usize;
    let mut alias = 0.0f64;
    let mut buf = vec![Complex64::default(); grid.len()];
    for col in 0..basis.len() {
        let k = basis.k(col);
        for (g, slot) in buf.iter_mut().enumerate() {
            let phase: f64 = (0..d).map(|i| f64::from(k[i]) * disp[g][i]).sum();
            *slot = Complex64::from_polar(root[g], phase);
        }
        grid.forward(&mut buf);
        for (s, c) in buf.iter().enumerate() {
            let m = grid.frequency(s);
            if linf(&m) >= half - 1 {
                alias = alias.max(c.norm());
            }
            if c.norm() < PRUNE {
                continue;
            }
            let mut j: Index = [0; MAX_DIM];
            for i in 0..d {
                j[i] = k[i] + m[i];
            }
            if let Some(row) = basis.index(&j) {
                band = band.max(linf(&m) as usize);
                entries.push((row, col, *c));
            }
        }
    }
    if alias > ALIAS_TOL {
        return Err(Error::GridTooSmall { defect: alias });
    }
    let mut u = TorusOperator::zeros(basis, 1.0, band);
    for (r, c, v) in entries {
        *u.entry_mut(r, c) = v;
    }

    let defect = unitarity_defect(&u, band.min(n / 2));
    if defect > UNITARITY_TOL {
        return Err(Error::GridTooSmall { defect });
    }
    Ok(u)
}

/// `‖(UU* − I)_{interior}‖` on `|k|_∞ ≤ n − margin`.
pub fn unitarity_defect(u: &TorusOperator, margin: usize) -> f64 {
    interior_map_norm(u.basis(), margin, |x| gram_defect(u, x), |x| gram_defect(u, x))
}

fn gram_defect(u: &TorusOperator, x: &[Complex64]) -> Vec<Complex64> {
    let y = u.matvec(&u.adjoint_matvec(x));
    y.iter().zip(x).map(|(a, b)| a - b).collect()
}

/// Symmetric quantization of `(φ + v(x))·ξ`:
/// `ħ φ·D + ħ v·D − (iħ/2) div v`, i.e. the Weyl matrix of the linear symbol,
/// `⟨e_{k+k₀}, P̂ e_k⟩ = ħ v̂(k₀)·(k + k₀/2)`.
pub fn vector_field_matrix(phi: &[f64], v: &TorusVectorField, hbar: f64, n: usize) -> Result<TorusOperator> {
    let d = v.dim();
    let basis = TorusBasis::new(d, n)?;
    let band = v.band();
    if band > 2 * n {
        return Err(Error::BandOverflow { band, limit: 2 * n });
    }
    let mut op = TorusOperator::zeros(basis, hbar, band);
    for col in 0..basis.len() {
        let k = basis.k(col);
        let diag: f64 = (0..d).map(|i| phi[i] * f64::from(k[i])).sum();
        *op.entry_mut(col, col) += Complex64::new(hbar * diag, 0.0);
        for (k0, c) in v.iter() {
            let mut j: Index = [0; MAX_DIM];
            let mut z = Complex64::default();
            for i in 0..d {
                j[i] = k[i] + k0[i];
                z += c[i] * (f64::from(k[i]) + 0.5 * f64::from(k0[i]));
            }
            if let Some(row) = basis.index(&j) {
                *op.entry_mut(row, col) += hbar * z;
            }
        }
    }
    Ok(op)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgorovReport {
    pub hermitian_defect: f64,
    /// `‖(U P̂ U* − L̂_ω)_{interior}‖`.
    pub residual: f64,
    pub band: usize,
}

/// Checks `U P̂_φ U* = L̂_ω` on the interior block `|k|_∞ ≤ n − margin`,
/// with `U` the [`transport_unitary`] of the conjugacy on `|k|_∞ ≤ n`.
pub fn verify_egorov(
    u: &TorusOperator,
    omega: &[f64],
    phi: &[f64],
    v: &TorusVectorField,
    hbar: f64,
    margin: usize,
) -> Result<EgorovReport> {
    let n = u.basis().n();
    let p = vector_field_matrix(phi, v, hbar, n)?;
    let hermitian_defect = p.hermitian_defect();
    if hermitian_defect > 1e-12 * p.max_abs().max(1.0) {
        return Err(Error::NotHermitian { defect: hermitian_defect });
    }
    let l = transport_matrix(&Transport::new(omega)?, hbar, n)?;
    let apply = |x: &[Complex64]| {
        let y = u.matvec(&p.matvec(&u.adjoint_matvec(x)));
        let lx = l.matvec(x);
        y.iter().zip(&lx).map(|(a, b)| a - b).collect::<Vec<_>>()
    };
    let residual = interior_map_norm(u.basis(), margin, apply, apply);
    Ok(EgorovReport { hermitian_defect, residual, band: u.band() })
}

/// Both sides of `∫ b |U* e_k|² dx = (2π)^{-d} ∫ b∘θ dx` for a function `b`
/// of `x` alone (an action-free symbol).
pub fn egorov_density(u: &TorusOperator, theta: &TorusDiffeo, k: &[i32], b: &ModeSymbol) -> Result<(f64, f64)> {
    let basis = u.basis();
    let d = basis.dim();
    if b.iter().any(|(w, _)| w.m_l1() != 0) {
        return Err(Error::InvalidParameter("density test symbols must not depend on ξ".into()));
    }
    let row = basis.index(k).ok_or_else(|| Error::InvalidParameter(alloc::format!("k = {k:?} outside the basis")))?;
    // U* e_k has coefficients conj(U_{k,m})
    let psi: Vec<Complex64> = (0..basis.len()).map(|m| u.get(row, m).conj()).collect();
    let mut lhs = Complex64::default();
    for (w, amp) in b.iter() {
        for (m, pm) in psi.iter().enumerate() {
            if *pm == Complex64::default() {
                continue;
            }
            let mut j = basis.k(m);
            for i in 0..d {
                j[i] += w.k[i];
            }
            if let Some(r) = basis.index(&j) {
                lhs += amp * psi[r].conj() * pm;
            }
        }
    }

    let order = b.angle_band().max(1) + theta.u.band();
    let grid = Grid::new(d, 8 * order.max(basis.n()))?;
    let pts: Vec<[f64; MAX_DIM]> = (0..grid.len()).map(|g| theta.eval(&grid.point(g)[..d])).collect();
    let zero = [0.0; MAX_DIM];
    let rhs = pts.iter().map(|x| b.eval(&x[..d], &zero[..d]).re).sum::<f64>() / grid.len() as f64;
    Ok((lhs.re, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::check;
    use crate::kam_classical::{kam_conjugate, ClassicalOptions};
    use crate::symbols::{Lattice, Wave};
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_and_translation() {
        let u = transport_unitary(&TorusDiffeo::identity(2).unwrap(), 4).unwrap();
        assert!(u.sub(&TorusOperator::identity(u.basis(), 1.0)).unwrap().max_abs() < 1e-15);
        let c = 0.37;
        let u = transport_unitary(&TorusDiffeo::translation(&[c]).unwrap(), 6).unwrap();
        let b = u.basis();
        for i in 0..b.len() {
            let k = f64::from(b.k(i)[0]);
            assert_abs_diff_eq!((u.get(i, i) - Complex64::from_polar(1.0, k * c)).norm(), 0.0, epsilon = 1e-14);
        }
        assert_eq!(u.band(), 0);
    }

    #[test]
    fn sine_diffeo_is_unitary_inside() {
        let theta = TorusDiffeo { u: TorusVectorField::sin(&[1], &[0.1]).unwrap() };
        let u = transport_unitary(&theta, 32).unwrap();
        let idx = u.basis().interior(16);
        assert!(unitarity_defect(&u, 16) < 1e-8 && !idx.is_empty());
    }

    #[test]
    fn vector_field_matrix_is_hermitian_weyl() {
        let v = TorusVectorField::sin(&[1, 1], &[0.2, -0.1]).unwrap();
        let p = vector_field_matrix(&[1.0, 0.5], &v, 0.1, 4).unwrap();
        assert!(p.hermitian_defect() < 1e-16);
        let b = p.basis();
        let (c0, c1) = (b.index(&[0, 0]).unwrap(), b.index(&[1, 1]).unwrap());
        // ħ v̂(1,1)·(k + k₀/2) at k = 0
        let vh = v.get(&[1, 1]);
        assert_abs_diff_eq!((p.get(c1, c0) - 0.1 * (vh[0] * 0.5 + vh[1] * 0.5)).norm(), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn egorov_on_the_circle() {
        let eps = 1e-3;
        let cert = check(&[1.0], 2.0, 1.0, 100).unwrap();
        let v = TorusVectorField::sin(&[1], &[eps]).unwrap();
        let kam = kam_conjugate(&v, &[1.0], &cert, &ClassicalOptions::default()).unwrap();
        let zero = TorusVectorField::zero(1).unwrap();
        let id = transport_unitary(&TorusDiffeo::identity(1).unwrap(), 32).unwrap();
        let idle = verify_egorov(&id, &[1.0], &[1.0], &zero, 0.1, 16).unwrap();
        assert_eq!(idle.residual, 0.0);
        let u = transport_unitary(&kam.theta, 32).unwrap();
        let rep = verify_egorov(&u, &[1.0], &kam.frequency.phi, &v, 0.1, 16).unwrap();
        assert!(rep.residual < 1e-6, "{rep:?}");
        let loose = kam_conjugate(&v, &[1.0], &cert, &ClassicalOptions { n_max: 1, ..Default::default() }).unwrap();
        let lu = transport_unitary(&loose.theta, 32).unwrap();
        let worse = verify_egorov(&lu, &[1.0], &loose.frequency.phi, &v, 0.1, 16).unwrap();
        assert!(worse.residual > rep.residual);

        let l = Lattice::new(1, 1.0).unwrap();
        let b = l.cos(Wave::angle(&[1]), 1.0).add(&l.sin(Wave::angle(&[2]), 0.5)).unwrap();
        for k in [-3, 0, 5] {
            let (lhs, rhs) = egorov_density(&u, &kam.theta, &[k], &b).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }
}
