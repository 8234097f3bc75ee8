use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{TorusDiffeo, TorusVectorField};
use crate::cohomology;
use crate::diophantine::DiophantineCert;
use crate::fourier::Grid;
use crate::{Error, Result, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalOptions {
    /// Maximum number of Newton updates.
    pub n_max: usize,
    /// Target for `sup |w|` on the projection grid.
    pub tol: f64,
    /// Displacement modes kept per axis, `|k|_∞ ≤ cutoff`; the projection
    /// grid has at least `4·cutoff` points per axis.
    pub cutoff: usize,
    /// Smallest acceptable `det ∂θ` on the grid.
    pub min_det: f64,
}

impl Default for ClassicalOptions {
    fn default() -> Self {
        ClassicalOptions { n_max: 12, tol: 1e-12, cutoff: 16, min_det: 1e-6 }
    }
}

/// `ω ↦ φ(ω)` with the per-step corrections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMap {
    pub omega: Vec<f64>,
    pub phi: Vec<f64>,
    pub corrections: Vec<Vec<f64>>,
}

impl FrequencyMap {
    /// `|φ − ω|₂`.
    pub fn shift(&self) -> f64 {
        self.phi.iter().zip(&self.omega).map(|(p, w)| (p - w) * (p - w)).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalKam {
    pub frequency: FrequencyMap,
    pub theta: TorusDiffeo,
    /// `sup |w|` on the projection grid before each update, and after the last.
    pub residuals: Vec<f64>,
    /// Conjugacy residual by direct summation on a grid offset from the
    /// projection grid.
    pub residual: f64,
    pub steps: usize,
    pub converged: bool,
}

/// The smallness hypothesis `‖v‖_ρ < ρ/16`.
pub fn smallness_holds(v: &TorusVectorField, rho: f64) -> bool {
    v.norm(rho) < rho / 16.0
}

/// `q_n = ln(e_{n+1}/e_n) / ln(e_n/e_{n−1})` over consecutive residuals;
/// `q ≈ 2` for quadratic convergence.
pub fn order_estimates(residuals: &[f64]) -> Vec<f64> {
    residuals
        .windows(3)
        .filter(|w| w.iter().all(|&e| e > 0.0) && w[1] != w[0])
        .map(|w| (w[2] / w[1]).ln() / (w[1] / w[0]).ln())
        .collect()
}

struct Pullback {
    w: Vec<[f64; MAX_DIM]>,
    jinv: Vec<Matrix3<f64>>,
    sup: f64,
}

/// `w = (∂θ)^{-1}(φ + v∘θ) − ω` at the grid points.
fn pullback(v: &TorusVectorField, theta: &TorusDiffeo, phi: &[f64], omega: &[f64], grid: &Grid, min_det: f64) -> Result<Pullback> {
    let d = v.dim();
    let disp = theta.u.eval_grid(grid)?;
    let jac = theta.u.jacobian_grid(grid)?;
    let moved: Vec<[f64; MAX_DIM]> = (0..grid.len())
        .map(|g| {
            let mut x = grid.point(g);
            for i in 0..d {
                x[i] += disp[g][i];
            }
            x
        })
        .collect();
    let vals = v.eval_points(&moved);
    let mut w = vec![[0.0; MAX_DIM]; grid.len()];
    let mut jinv = Vec::with_capacity(grid.len());
    let mut sup = 0.0f64;
    for g in 0..grid.len() {
        let j = Matrix3::identity() + jac[g];
        let det = j.determinant();
        let inv = match j.try_inverse() {
            Some(inv) if det > min_det => inv,
            _ => return Err(Error::DiffeoBreakdown { min_det: det }),
        };
        let mut f = Vector3::zeros();
        for i in 0..d {
            f[i] = phi[i] + vals[g][i];
        }
        let y = inv * f;
        for i in 0..d {
            w[g][i] = y[i] - omega[i];
            sup = sup.max(w[g][i].abs());
        }
        jinv.push(inv);
    }
    Ok(Pullback { w, jinv, sup })
}

/// Newton iteration for `(∂θ)^{-1}(φ + v∘θ) = ω`.
///
/// Each update takes the pulled-back defect `w`, shifts the frequency by
/// `δφ = −⟨(∂θ)^{-1}⟩^{-1}⟨w⟩` so that `w + (∂θ)^{-1}δφ` has zero mean,
/// solves `∂u·ω = w + (∂θ)^{-1}δφ` by Fourier division and composes
/// `θ ← θ∘(id + u)`, re-projected on the grid.
pub fn kam_conjugate(
    v: &TorusVectorField,
    omega: &[f64],
    cert: &DiophantineCert,
    opts: &ClassicalOptions,
) -> Result<ClassicalKam> {
    let d = v.dim();
    if omega.len() != d || cert.dim() != d {
        return Err(Error::InvalidParameter(format!(
            "field of dimension {d}, frequency of dimension {}, certificate of dimension {}",
            omega.len(),
            cert.dim()
        )));
    }
    if v.reality_defect() > 1e-14 * v.norm(0.0).max(1.0) {
        return Err(Error::InvalidParameter("vector field is not real".into()));
    }
    let grid = Grid::new(d, 4 * opts.cutoff.max(v.band()))?;
    let floor = 1e3 * f64::EPSILON * omega.iter().fold(1.0f64, |m, w| m.max(w.abs()));

    let mut theta = TorusDiffeo::identity(d)?;
    let mut phi = omega.to_vec();
    let mut corrections = Vec::new();
    let mut residuals: Vec<f64> = Vec::new();
    let mut converged = false;
    for n in 0..=opts.n_max {
        let pb = pullback(v, &theta, &phi, omega, &grid, opts.min_det)?;
        let prev = residuals.last().copied();
        residuals.push(pb.sup);
        if pb.sup <= opts.tol {
            converged = true;
            break;
        }
        if let Some(prev) = prev {
            if pb.sup > prev {
                if prev <= floor {
                    break;
                }
                return Err(Error::KamDivergence { step: n, before: prev, after: pb.sup });
            }
        }
        if n == opts.n_max {
            break;
        }

        let count = grid.len() as f64;
        let mean_jinv = pb.jinv.iter().fold(Matrix3::zeros(), |acc, m| acc + m) / count;
        let mut mean_w = Vector3::zeros();
        for w in &pb.w {
            for i in 0..d {
                mean_w[i] += w[i] / count;
            }
        }
        let mut block = Matrix3::identity();
        for i in 0..d {
            for j in 0..d {
                block[(i, j)] = mean_jinv[(i, j)];
            }
        }
        let dphi = -block.try_inverse().ok_or(Error::DiffeoBreakdown { min_det: block.determinant() })? * mean_w;

        let rhs: Vec<[f64; MAX_DIM]> = (0..grid.len())
            .map(|g| {
                let shift = pb.jinv[g] * dphi;
                let mut r = pb.w[g];
                for i in 0..d {
                    r[i] += shift[i];
                }
                r
            })
            .collect();
        let rhs = TorusVectorField::from_grid(d, &grid, &rhs, opts.cutoff)?;
        let mut step = TorusVectorField::zero(d)?;
        for (k, c) in rhs.iter() {
            if k[..d].iter().all(|&x| x == 0) {
                continue;
            }
            let div = Complex64::new(0.0, cohomology::divisor(cert, &k[..d])?);
            let q: Vec<Complex64> = c[..d].iter().map(|z| z / div).collect();
            step.add_mode(&k[..d], &q);
        }

        // θ∘(id + s): x ↦ x + s(x) + u(x + s(x))
        let s_vals = step.eval_grid(&grid)?;
        let moved: Vec<[f64; MAX_DIM]> = (0..grid.len())
            .map(|g| {
                let mut x = grid.point(g);
                for i in 0..d {
                    x[i] += s_vals[g][i];
                }
                x
            })
            .collect();
        let u_moved = theta.u.eval_points(&moved);
        let composed: Vec<[f64; MAX_DIM]> = (0..grid.len())
            .map(|g| {
                let mut y = [0.0; MAX_DIM];
                for i in 0..d {
                    y[i] = s_vals[g][i] + u_moved[g][i];
                }
                y
            })
            .collect();
        let u = TorusVectorField::from_grid(d, &grid, &composed, opts.cutoff)?;
        let scale = u.iter().map(|(_, c)| c[..d].iter().map(|z| z.norm()).fold(0.0, f64::max)).fold(0.0, f64::max);
        theta = TorusDiffeo { u: u.prune(1e-17 * scale) };

        for i in 0..d {
            phi[i] += dphi[i];
        }
        corrections.push(dphi.as_slice()[..d].to_vec());
    }

    let residual = conjugacy_residual(v, &theta, &phi, omega, 2 * grid.size())?;
    let steps = residuals.len() - 1;
    Ok(ClassicalKam {
        frequency: FrequencyMap { omega: omega.to_vec(), phi, corrections },
        theta,
        residuals,
        residual,
        steps,
        converged,
    })
}

/// `sup_x |(∂θ)^{-1}(φ + v(θ(x))) − ω|` by direct summation on the
/// midpoints of a `size^d` grid.
pub fn conjugacy_residual(v: &TorusVectorField, theta: &TorusDiffeo, phi: &[f64], omega: &[f64], size: usize) -> Result<f64> {
    let d = v.dim();
    let grid = Grid::new(d, size)?;
    let half = 0.5 * grid.spacing();
    let points: Vec<[f64; MAX_DIM]> = (0..grid.len())
        .map(|g| {
            let mut x = grid.point(g);
            for xi in x.iter_mut().take(d) {
                *xi += half;
            }
            x
        })
        .collect();
    let disp = theta.u.eval_points(&points);
    let moved: Vec<[f64; MAX_DIM]> = points
        .iter()
        .zip(&disp)
        .map(|(x, u)| {
            let mut y = *x;
            for i in 0..d {
                y[i] += u[i];
            }
            y
        })
        .collect();
    let vals = v.eval_points(&moved);
    let mut sup = 0.0f64;
    for (g, x) in points.iter().enumerate() {
        let j = theta.jacobian(&x[..d]);
        let inv = j.try_inverse().ok_or(Error::DiffeoBreakdown { min_det: j.determinant() })?;
        let mut f = Vector3::zeros();
        for i in 0..d {
            f[i] = phi[i] + vals[g][i];
        }
        let y = inv * f;
        for i in 0..d {
            sup = sup.max((y[i] - omega[i]).abs());
        }
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::check;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_field_is_already_conjugate() {
        let cert = check(&[1.0], 2.0, 1.0, 100).unwrap();
        let out = kam_conjugate(&TorusVectorField::zero(1).unwrap(), &[1.0], &cert, &ClassicalOptions::default()).unwrap();
        assert_eq!(out.frequency.phi, vec![1.0]);
        assert!(out.theta.u.is_empty());
        assert_eq!(out.residual, 0.0);
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn constant_field_is_absorbed_in_one_step() {
        let cert = check(&[1.0], 2.0, 1.0, 100).unwrap();
        let v = TorusVectorField::constant(&[0.01]).unwrap();
        let out = kam_conjugate(&v, &[1.0], &cert, &ClassicalOptions::default()).unwrap();
        assert_eq!(out.steps, 1);
        assert_abs_diff_eq!(out.frequency.phi[0], 0.99, epsilon = 1e-16);
        assert!(out.theta.u.is_empty());
        assert_eq!(out.residual, 0.0);
    }

    #[test]
    fn sine_on_the_circle() {
        let eps = 1e-3;
        let cert = check(&[1.0], 2.0, 1.0, 100).unwrap();
        let v = TorusVectorField::sin(&[1], &[eps]).unwrap();
        let one = kam_conjugate(&v, &[1.0], &cert, &ClassicalOptions { n_max: 1, ..Default::default() }).unwrap();
        // u' = v/ω, so θ = x − ε cos x at first order
        let c = one.theta.u.get(&[1]);
        assert_abs_diff_eq!(c[0].re, -eps / 2.0, epsilon = 1e-15);
        assert!(one.residuals[1] < 10.0 * eps * eps);
        let three = kam_conjugate(&v, &[1.0], &cert, &ClassicalOptions { n_max: 3, tol: 0.0, ..Default::default() }).unwrap();
        assert!(three.residual < 1e-12, "{:?}", three.residuals);
        assert!(three.frequency.shift() <= eps);
        // brute-force check of the conjugacy equation on a 256-point grid
        let phi = three.frequency.phi[0];
        for i in 0..256 {
            let x = 2.0 * core::f64::consts::PI * (i as f64 + 0.3) / 256.0;
            let th = three.theta.eval(&[x])[0];
            let dth = three.theta.jacobian(&[x])[(0, 0)];
            assert!(((phi + eps * th.sin()) / dth - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn order_estimate_of_a_quadratic_sequence() {
        let q = order_estimates(&[1e-2, 1e-4, 1e-8, 1e-16]);
        assert_eq!(q.len(), 2);
        assert!(q.iter().all(|&x| (x - 2.0).abs() < 1e-12));
    }

    #[test]
    fn large_field_breaks_down_or_diverges() {
        let cert = check(&[1.0], 2.0, 1.0, 100).unwrap();
        let v = TorusVectorField::sin(&[1], &[3.0]).unwrap();
        let r = kam_conjugate(&v, &[1.0], &cert, &ClassicalOptions::default());
        assert!(matches!(r, Err(Error::DiffeoBreakdown { .. }) | Err(Error::KamDivergence { .. })), "{r:?}");
    }
}
