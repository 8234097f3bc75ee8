use num_complex::Complex64;

use crate::quantize::{exp_hermitian, transport_matrix, weyl_matrix, TorusBasis, TorusOperator};
use crate::symbols::{ModeSymbol, SemiclassicalScale, Transport};
use crate::{Error, Result};

/// Largest tolerated `‖(UU* − I)_{interior}‖`.
const UNITARITY_TOL: f64 = 1e-8;
/// Generator modes whose exponent `(ε/ħ)|A|` is below this cannot move a
/// double-precision matrix and are dropped before quantizing.
const NEGLIGIBLE: f64 = 1e-20;

/// `U_m ··· U_1` with `U_j = e^{(iε/ħ)Op(F_j)}` on `|k|_∞ ≤ n`.
///
/// The product is unitary on the truncated space by construction; the
/// interior check guards against generators whose band does not fit. Late
/// generators are super-exponentially small and mostly vanish under the
/// negligibility cut, which keeps their band from overflowing `2n`.
pub fn assemble_unitary(
    generators: &[ModeSymbol],
    scale: SemiclassicalScale,
    dim: usize,
    n: usize,
    margin: usize,
) -> Result<TorusOperator> {
    let hbar = scale.hbar();
    let basis = TorusBasis::new(dim, n)?;
    let mut u = TorusOperator::identity(basis, hbar);
    for f in generators {
        let f = f.prune(NEGLIGIBLE / scale.ratio());
        if f.is_empty() {
            continue;
        }
        let h = weyl_matrix(&f, hbar, n)?;
        u = exp_hermitian(&h, scale.ratio())?.mul(&u)?;
    }
    let defect = u.mul(&u.adjoint())?.sub(&TorusOperator::identity(basis, hbar))?.interior_norm(margin)?;
    if defect > UNITARITY_TOL {
        return Err(Error::TruncationTooSmall { defect });
    }
    Ok(u)
}

/// `‖(U (L̂_ω + ε Op(V − R)) U* − L̂_ω)_{interior}‖`: what remains after
/// conjugating the renormalized operator, to be compared with
/// `ε‖Op(V_{n+1})‖`.
pub fn conjugation_residual(
    u: &TorusOperator,
    v: &ModeSymbol,
    r_total: &ModeSymbol,
    omega: &Transport,
    scale: SemiclassicalScale,
    margin: usize,
) -> Result<f64> {
    let n = u.basis().n();
    let hbar = scale.hbar();
    let l = transport_matrix(omega, hbar, n)?;
    let q = l.axpy(Complex64::new(scale.eps(), 0.0), &weyl_matrix(&v.sub(r_total)?, hbar, n)?)?;
    u.mul(&q)?.mul(&u.adjoint())?.sub(&l)?.interior_norm(margin)
}
