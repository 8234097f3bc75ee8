//! Classical KAM for constant vector fields on `T^d`.
//!
//! Given a small real field `v`, [`kam_conjugate`] finds a frequency `φ` and a
//! diffeomorphism `θ = id + u` with
//!
//! ```text
//! (∂θ(x))^{-1} (φ + v(θ(x))) = ω,
//! ```
//!
//! i.e. `θ` carries the linear flow of `ω` onto the flow of `φ + v`. The
//! transport operator `ψ ↦ √det ∂θ · ψ∘θ` then conjugates the symmetric
//! quantization of `(φ + v)·ξ` to `ħ ω·D` exactly.

mod newton;
mod transport;

pub use newton::{conjugacy_residual, kam_conjugate, order_estimates, smallness_holds, ClassicalKam, ClassicalOptions, FrequencyMap};
pub use transport::{
    egorov_density, transport_unitary, unitarity_defect, vector_field_matrix, verify_egorov, EgorovReport,
};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::fourier::Grid;
use crate::{index_from_slice, l1, linf, Error, Index, Result, MAX_DIM};

type Coeff = [Complex64; MAX_DIM];

const ZERO: Coeff = [Complex64 { re: 0.0, im: 0.0 }; MAX_DIM];

/// A real vector field `Σ_k v̂(k) e^{ik·x}` on `T^d`, `v̂(k) ∈ C^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FieldDocument", into = "FieldDocument")]
pub struct TorusVectorField {
    dim: usize,
    modes: BTreeMap<Index, Coeff>,
}

/// One Fourier coefficient of a [`TorusVectorField`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMode {
    pub k: Vec<i32>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Serialized form of a [`TorusVectorField`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDocument {
    pub d: usize,
    pub modes: Vec<FieldMode>,
}

impl From<TorusVectorField> for FieldDocument {
    fn from(v: TorusVectorField) -> Self {
        let d = v.dim;
        let modes = v
            .modes
            .iter()
            .map(|(k, c)| FieldMode {
                k: k[..d].to_vec(),
                re: c[..d].iter().map(|z| z.re).collect(),
                im: c[..d].iter().map(|z| z.im).collect(),
            })
            .collect();
        FieldDocument { d, modes }
    }
}

impl TryFrom<FieldDocument> for TorusVectorField {
    type Error = Error;

    fn try_from(doc: FieldDocument) -> Result<Self> {
        let mut v = TorusVectorField::zero(doc.d)?;
        for m in &doc.modes {
            if m.k.len() != doc.d || m.re.len() != doc.d || m.im.len() != doc.d {
                return Err(Error::InvalidParameter(format!("field mode {:?} does not have dimension {}", m.k, doc.d)));
            }
            let c: Vec<Complex64> = m.re.iter().zip(&m.im).map(|(&r, &i)| Complex64::new(r, i)).collect();
            v.add_mode(&m.k, &c);
        }
        Ok(v)
    }
}

impl TorusVectorField {
    pub fn zero(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidParameter(format!("field dimension {dim} outside 1..={MAX_DIM}")));
        }
        Ok(TorusVectorField { dim, modes: BTreeMap::new() })
    }

    /// The constant field `c`.
    pub fn constant(c: &[f64]) -> Result<Self> {
        let mut v = Self::zero(c.len())?;
        let amp: Vec<Complex64> = c.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        v.add_mode(&vec![0; c.len()], &amp);
        Ok(v)
    }

    /// `amp · cos(k·x)`.
    pub fn cos(k: &[i32], amp: &[f64]) -> Result<Self> {
        let mut v = Self::zero(k.len())?;
        let half: Vec<Complex64> = amp.iter().map(|&a| Complex64::new(0.5 * a, 0.0)).collect();
        v.add_mode(k, &half);
        v.add_mode(&k.iter().map(|c| -c).collect::<Vec<_>>(), &half);
        Ok(v)
    }

    /// `amp · sin(k·x)`.
    pub fn sin(k: &[i32], amp: &[f64]) -> Result<Self> {
        let mut v = Self::zero(k.len())?;
        let plus: Vec<Complex64> = amp.iter().map(|&a| Complex64::new(0.0, -0.5 * a)).collect();
        let minus: Vec<Complex64> = plus.iter().map(|z| -z).collect();
        v.add_mode(k, &plus);
        v.add_mode(&k.iter().map(|c| -c).collect::<Vec<_>>(), &minus);
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Adds `c e^{ik·x}`; entries of `c` beyond the dimension are ignored.
    pub fn add_mode(&mut self, k: &[i32], c: &[Complex64]) {
        let key = index_from_slice(&k[..self.dim]);
        let slot = self.modes.entry(key).or_insert(ZERO);
        for i in 0..self.dim {
            slot[i] += c[i];
        }
        if slot[..self.dim].iter().all(|z| *z == Complex64::default()) {
            self.modes.remove(&key);
        }
    }

    pub fn get(&self, k: &[i32]) -> Coeff {
        self.modes.get(&index_from_slice(k)).copied().unwrap_or(ZERO)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Index, &Coeff)> {
        self.modes.iter()
    }

    pub fn add(&self, other: &TorusVectorField) -> Result<TorusVectorField> {
        self.check(other)?;
        let mut out = self.clone();
        for (k, c) in &other.modes {
            out.add_mode(k, c);
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> TorusVectorField {
        let mut out = self.clone();
        for v in out.modes.values_mut() {
            for z in v.iter_mut() {
                *z *= c;
            }
        }
        out.modes.retain(|_, v| v.iter().any(|z| *z != Complex64::default()));
        out
    }

    fn check(&self, other: &TorusVectorField) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::InvalidParameter(format!("fields of dimension {} and {}", self.dim, other.dim)));
        }
        Ok(())
    }

    /// `Σ_k |v̂(k)|₂ e^{|k|₁ ρ}`; at `ρ = 0` an upper bound for `sup |v|`.
    pub fn norm(&self, rho: f64) -> f64 {
        self.modes
            .iter()
            .map(|(k, c)| c[..self.dim].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() * (l1(k) as f64 * rho).exp())
            .fold(0.0, |acc, x| acc + x)
    }

    /// `⟨v⟩`, the `k = 0` coefficient (real part).
    pub fn average(&self) -> [f64; MAX_DIM] {
        let c = self.get(&[0; MAX_DIM]);
        let mut out = [0.0; MAX_DIM];
        for i in 0..self.dim {
            out[i] = c[i].re;
        }
        out
    }

    /// Largest `|k|_∞`.
    pub fn band(&self) -> usize {
        self.modes.keys().map(linf).max().unwrap_or(0) as usize
    }

    /// `Σ_k |v̂(k) − conj v̂(−k)|`.
    pub fn reality_defect(&self) -> f64 {
        let mut defect = 0.0;
        for (k, c) in &self.modes {
            let minus = self.get(&k.map(|x| -x));
            for i in 0..self.dim {
                defect += (c[i] - minus[i].conj()).norm();
            }
        }
        defect
    }

    /// `div v = Σ_k i k·v̂(k) e^{ik·x}`, as scalar coefficients.
    pub fn divergence(&self) -> BTreeMap<Index, Complex64> {
        let mut out = BTreeMap::new();
        for (k, c) in &self.modes {
            let mut z = Complex64::default();
            for i in 0..self.dim {
                z += Complex64::new(0.0, f64::from(k[i])) * c[i];
            }
            if z != Complex64::default() {
                out.insert(*k, z);
            }
        }
        out
    }

    /// Real value at `x` by direct summation.
    pub fn eval(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for (k, c) in &self.modes {
            let phase: f64 = (0..self.dim).map(|i| f64::from(k[i]) * x[i]).sum();
            let e = Complex64::from_polar(1.0, phase);
            for i in 0..self.dim {
                out[i] += (c[i] * e).re;
            }
        }
        out
    }

    /// `∂v(x)`, entry `(i, j) = ∂_j v_i`, padded with zeros to `3 × 3`.
    pub fn jacobian(&self, x: &[f64]) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for (k, c) in &self.modes {
            let phase: f64 = (0..self.dim).map(|i| f64::from(k[i]) * x[i]).sum();
            let e = Complex64::from_polar(1.0, phase);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    m[(i, j)] += (c[i] * e * Complex64::new(0.0, f64::from(k[j]))).re;
                }
            }
        }
        m
    }

    /// Values at many points, using per-axis tables of `e^{i k x}`.
    pub fn eval_points(&self, points: &[[f64; MAX_DIM]]) -> Vec<[f64; MAX_DIM]> {
        let band = self.band() as i32;
        let width = (2 * band + 1) as usize;
        let mut table = vec![Complex64::default(); MAX_DIM * width];
        points
            .iter()
            .map(|x| {
                for a in 0..self.dim {
                    let base = Complex64::from_polar(1.0, x[a]);
                    let inv = base.conj();
                    let row = &mut table[a * width..(a + 1) * width];
                    row[band as usize] = Complex64::new(1.0, 0.0);
                    for m in 1..=band as usize {
                        row[band as usize + m] = row[band as usize + m - 1] * base;
                        row[band as usize - m] = row[band as usize - m + 1] * inv;
                    }
                }
                let mut out = [0.0; MAX_DIM];
                for (k, c) in &self.modes {
                    let mut e = Complex64::new(1.0, 0.0);
                    for a in 0..self.dim {
                        e *= table[a * width + (k[a] + band) as usize];
                    }
                    for i in 0..self.dim {
                        out[i] += (c[i] * e).re;
                    }
                }
                out
            })
            .collect()
    }

    /// Values at every grid point via inverse FFT; the grid must resolve
    /// the band.
    pub fn eval_grid(&self, grid: &Grid) -> Result<Vec<[f64; MAX_DIM]>> {
        let comps = self.spread(grid, |_, c| c)?;
        Ok(collect_components(self.dim, grid, comps))
    }

    /// `∂_j v_i` at every grid point.
    pub fn jacobian_grid(&self, grid: &Grid) -> Result<Vec<Matrix3<f64>>> {
        let mut out = vec![Matrix3::zeros(); grid.len()];
        for j in 0..self.dim {
            let comps = self.spread(grid, |k, c| c * Complex64::new(0.0, f64::from(k[j])))?;
            for (i, comp) in comps.iter().enumerate() {
                for (g, z) in comp.iter().enumerate() {
                    out[g][(i, j)] = z.re;
                }
            }
        }
        Ok(out)
    }

    /// Places transformed coefficients in grid slots and inverts, one array
    /// per component.
    fn spread<F: Fn(&Index, Complex64) -> Complex64>(&self, grid: &Grid, f: F) -> Result<Vec<Vec<Complex64>>> {
        let mut comps = vec![vec![Complex64::default(); grid.len()]; self.dim];
        for (k, c) in &self.modes {
            let slot = grid.slot(k).ok_or(Error::GridTooSmall { defect: f64::INFINITY })?;
            for i in 0..self.dim {
                comps[i][slot] += f(k, c[i]);
            }
        }
        for comp in comps.iter_mut() {
            grid.inverse(comp);
        }
        Ok(comps)
    }

    /// Fourier projection of real grid samples onto `|k|_∞ ≤ cutoff`.
    pub fn from_grid(dim: usize, grid: &Grid, samples: &[[f64; MAX_DIM]], cutoff: usize) -> Result<Self> {
        let mut v = Self::zero(dim)?;
        let mut comps = vec![vec![Complex64::default(); grid.len()]; dim];
        for (g, s) in samples.iter().enumerate() {
            for i in 0..dim {
                comps[i][g] = Complex64::new(s[i], 0.0);
            }
        }
        for comp in comps.iter_mut() {
            grid.forward(comp);
        }
        let cutoff = cutoff.min(grid.size() / 2 - 1) as i64;
        for g in 0..grid.len() {
            let k = grid.frequency(g);
            if linf(&k) > cutoff {
                continue;
            }
            let mut c = ZERO;
            for i in 0..dim {
                c[i] = comps[i][g];
            }
            v.add_mode(&k, &c);
        }
        Ok(v)
    }

    /// Drops modes with `|v̂(k)|₂ < threshold`.
    pub fn prune(&self, threshold: f64) -> TorusVectorField {
        let mut out = self.clone();
        let d = self.dim;
        out.modes.retain(|_, c| c[..d].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() >= threshold);
        out
    }
}

fn collect_components(dim: usize, grid: &Grid, comps: Vec<Vec<Complex64>>) -> Vec<[f64; MAX_DIM]> {
    (0..grid.len())
        .map(|g| {
            let mut x = [0.0; MAX_DIM];
            for i in 0..dim {
                x[i] = comps[i][g].re;
            }
            x
        })
        .collect()
}

/// `θ(x) = x + u(x)` with a trigonometric displacement `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusDiffeo {
    pub u: TorusVectorField,
}

impl TorusDiffeo {
    pub fn identity(dim: usize) -> Result<Self> {
        Ok(TorusDiffeo { u: TorusVectorField::zero(dim)? })
    }

    /// `x ↦ x + c`.
    pub fn translation(c: &[f64]) -> Result<Self> {
        Ok(TorusDiffeo { u: TorusVectorField::constant(c)? })
    }

    pub fn dim(&self) -> usize {
        self.u.dim
    }

    pub fn eval(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut y = self.u.eval(x);
        for i in 0..self.dim() {
            y[i] += x[i];
        }
        y
    }

    /// `I + ∂u(x)`, padded with the identity to `3 × 3`.
    pub fn jacobian(&self, x: &[f64]) -> Matrix3<f64> {
        Matrix3::identity() + self.u.jacobian(x)
    }

    /// `min det ∂θ` over a grid.
    pub fn min_det(&self, grid: &Grid) -> Result<f64> {
        Ok(self.u.jacobian_grid(grid)?.iter().map(|m| (Matrix3::identity() + m).determinant()).fold(f64::INFINITY, f64::min))
    }

    /// Upper bound for `sup |θ(x) − x|`.
    pub fn displacement_bound(&self) -> f64 {
        self.u.norm(0.0)
    }
}

/// The symplectic lift `(x, ξ) ↦ (θ(x), (∂θ(x))^{-T} ξ)`.
pub fn symplectic_lift(theta: &TorusDiffeo, x: &[f64], xi: &[f64]) -> Result<([f64; MAX_DIM], [f64; MAX_DIM])> {
    let j = theta.jacobian(x);
    let det = j.determinant();
    let inv = j.try_inverse().filter(|_| det > 0.0).ok_or(Error::DiffeoBreakdown { min_det: det })?;
    let d = theta.dim();
    let mut v = Vector3::zeros();
    for i in 0..d {
        v[i] = xi[i];
    }
    let eta = inv.transpose() * v;
    let mut out = [0.0; MAX_DIM];
    for i in 0..d {
        out[i] = eta[i];
    }
    Ok((theta.eval(x), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn trigonometric_constructors() {
        let v = TorusVectorField::sin(&[1, 1], &[1.0, 2.0]).unwrap();
        let x = [0.3, 0.4];
        let y = v.eval(&x);
        assert_abs_diff_eq!(y[0], 0.7f64.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], 2.0 * 0.7f64.sin(), epsilon = 1e-15);
        assert_eq!(v.reality_defect(), 0.0);
        let c = TorusVectorField::cos(&[2], &[0.5]).unwrap();
        assert_abs_diff_eq!(c.eval(&[0.2])[0], 0.5 * 0.4f64.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.norm(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.norm(1.0), 0.5 * 2f64.exp(), epsilon = 1e-14);
    }

    #[test]
    fn grid_evaluation_matches_direct_sums() {
        let v = TorusVectorField::sin(&[1, 0], &[0.1, 0.0])
            .unwrap()
            .add(&TorusVectorField::cos(&[1, 1], &[0.0, 0.2]).unwrap())
            .unwrap()
            .add(&TorusVectorField::constant(&[0.3, -0.1]).unwrap())
            .unwrap();
        let grid = Grid::new(2, 8).unwrap();
        let vals = v.eval_grid(&grid).unwrap();
        let pts: Vec<[f64; MAX_DIM]> = (0..grid.len()).map(|g| grid.point(g)).collect();
        let direct = v.eval_points(&pts);
        let jac = v.jacobian_grid(&grid).unwrap();
        for g in 0..grid.len() {
            let x = grid.point(g);
            let e = v.eval(&x);
            for i in 0..2 {
                assert_abs_diff_eq!(vals[g][i], e[i], epsilon = 1e-14);
                assert_abs_diff_eq!(direct[g][i], e[i], epsilon = 1e-14);
            }
            assert!((jac[g] - v.jacobian(&x)).abs().max() < 1e-14);
        }
        let back = TorusVectorField::from_grid(2, &grid, &vals, 3).unwrap().prune(1e-15);
        assert_eq!(back.len(), v.len());
        assert!(back.add(&v.scale(-1.0)).unwrap().norm(0.0) < 1e-14);
        assert_eq!(v.average()[..2], [0.3, -0.1]);
    }

    #[test]
    fn lift_examples() {
        let id = TorusDiffeo::identity(2).unwrap();
        let (y, eta) = symplectic_lift(&id, &[0.1, 0.2], &[3.0, 4.0]).unwrap();
        assert_eq!((y[..2].to_vec(), eta[..2].to_vec()), (vec![0.1, 0.2], vec![3.0, 4.0]));
        let t = TorusDiffeo::translation(&[0.5, -0.5]).unwrap();
        let (y, eta) = symplectic_lift(&t, &[0.1, 0.2], &[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(y[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], -0.3, epsilon = 1e-15);
        assert_eq!(eta[..2], [3.0, 4.0]);
        let s = TorusDiffeo { u: TorusVectorField::sin(&[1], &[0.1]).unwrap() };
        let x = 0.7;
        let (y, eta) = symplectic_lift(&s, &[x], &[2.0]).unwrap();
        assert_abs_diff_eq!(y[0], x + 0.1 * x.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(eta[0], 2.0 / (1.0 + 0.1 * x.cos()), epsilon = 1e-15);
        let fold = TorusDiffeo { u: TorusVectorField::sin(&[1], &[2.0]).unwrap() };
        assert!(matches!(symplectic_lift(&fold, &[core::f64::consts::PI], &[1.0]), Err(Error::DiffeoBreakdown { .. })));
    }

    #[test]
    fn serde_round_trip() {
        let v = TorusVectorField::sin(&[1, -1], &[0.25, 0.5]).unwrap();
        let doc = FieldDocument::from(v.clone());
        assert_eq!(TorusVectorField::try_from(doc).unwrap(), v);
    }
}
