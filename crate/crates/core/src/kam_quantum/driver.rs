use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{smallness, KamConstants, KamSchedule, Smallness};
use crate::cohomology;
use crate::diophantine::DiophantineCert;
use crate::symbols::{conjugate, lie_series, moyal_commutator, LieSeries, ModeSymbol, NormParams, SemiclassicalScale, Truncation};
use crate::{Error, Result};

/// Numerical knobs of the iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KamOptions {
    pub trunc: Truncation,
    /// Relative stop rule of every Lie series.
    pub series_tol: f64,
    /// Relative tolerance of the counterterm fixed point.
    pub counterterm_tol: f64,
    pub counterterm_max_iter: usize,
    /// Maximum number of steps.
    pub n_max: usize,
    /// Stop once `‖V_n‖_{0,0} ≤ stop_tol · ‖V_1‖_{0,0}`.
    pub stop_tol: f64,
    /// Fail with [`Error::ContractionViolated`] when a step under the
    /// smallness hypothesis contracts by less than `α`.
    pub enforce_contraction: bool,
}

impl Default for KamOptions {
    fn default() -> Self {
        KamOptions {
            trunc: Truncation::default(),
            series_tol: 1e-16,
            counterterm_tol: 1e-13,
            counterterm_max_iter: 200,
            n_max: 12,
            stop_tol: 1e-12,
            enforce_contraction: true,
        }
    }
}

/// `Ψ^{F_{m}} ∘ … ∘ Ψ^{F_1}(a)`, with `F_1` applied first.
pub fn compose_conjugations(
    a: &ModeSymbol,
    generators: &[ModeSymbol],
    scale: SemiclassicalScale,
    opts: &KamOptions,
) -> Result<ModeSymbol> {
    let mut x = a.clone();
    for f in generators {
        x = conjugate(&x, f, 1.0, scale, opts.series_tol, opts.trunc)?;
    }
    Ok(x)
}

/// Counterterm of step `n = generators.len() + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterterm {
    /// `R_n`, action-only.
    pub r: ModeSymbol,
    /// `E_{n,n} = Ψ^{F_{n−1}} ∘ … ∘ Ψ^{F_1}(R_n)`.
    pub e: ModeSymbol,
    pub iterations: usize,
    /// `‖⟨E_{n,n}⟩ − ⟨V_n⟩‖_{0,0}`.
    pub residual: f64,
}

/// Solves `⟨Ψ^{F_{n−1}} ∘ … ∘ Ψ^{F_1}(R)⟩ = ⟨V_n⟩` for action-only `R` by the
/// Picard iteration `R ← R + ⟨V_n⟩ − ⟨Ψ(R)⟩`, which contracts because
/// `Ψ − id` is small.
pub fn counterterm(
    v: &ModeSymbol,
    generators: &[ModeSymbol],
    scale: SemiclassicalScale,
    opts: &KamOptions,
) -> Result<Counterterm> {
    let target = v.average();
    let mut r = target.clone();
    let goal = opts.counterterm_tol * target.mass();
    let mut residual = f64::INFINITY;
    for iterations in 1..=opts.counterterm_max_iter.max(1) {
        let e = compose_conjugations(&r, generators, scale, opts)?;
        let defect = e.average().sub(&target)?;
        residual = defect.mass();
        if residual <= goal || generators.is_empty() {
            return Ok(Counterterm { r, e, iterations, residual });
        }
        r = r.sub(&defect)?;
    }
    Err(Error::ContractionFailure { iterations: opts.counterterm_max_iter, residual })
}

/// One line of the step ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: usize,
    pub rho_n: f64,
    pub sigma_n: f64,
    /// `‖V_n‖_{s,ρ_n}`.
    pub v_norm: f64,
    /// `‖V_{n+1}‖_{s,ρ_{n+1}}`.
    pub v_next_norm: f64,
    /// `v_next_norm / v_norm`.
    pub ratio: f64,
    /// `(ε/ħ)‖F_n‖_{s,ρ_n−σ_n}`.
    pub f_norm: f64,
    /// `β α^{(n−1)/2} / 2`.
    pub f_bound: f64,
    /// `‖R_n‖_{s,0}`.
    pub r_norm: f64,
    /// `α^{n−1} ‖V_1‖ / (1−λ)`.
    pub r_bound: f64,
    /// `‖E_{n,n}‖_{s,0}`.
    pub e_norm: f64,
    pub counterterm_iterations: usize,
    pub counterterm_residual: f64,
    /// Stored modes of `V_{n+1}`.
    pub modes: usize,
    /// Tail ledger of `V_{n+1}`.
    pub tail: f64,
}

/// Everything the iteration has produced so far; `v` is `V_n` for the next
/// step `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KamState {
    pub n: usize,
    pub v: ModeSymbol,
    pub v1: ModeSymbol,
    pub generators: Vec<ModeSymbol>,
    pub counterterms: Vec<ModeSymbol>,
    pub ledger: Vec<StepRecord>,
    pub cert: DiophantineCert,
    pub scale: SemiclassicalScale,
    pub params: NormParams,
    pub constants: KamConstants,
    pub schedule: KamSchedule,
    pub smallness: Smallness,
}

impl KamState {
    pub fn new(
        v: &ModeSymbol,
        cert: &DiophantineCert,
        params: NormParams,
        scale: SemiclassicalScale,
        constants: KamConstants,
    ) -> Result<Self> {
        constants.validate()?;
        if v.dim() != cert.dim() {
            return Err(Error::InvalidParameter(format!(
                "perturbation of dimension {} for a frequency of dimension {}",
                v.dim(),
                cert.dim()
            )));
        }
        let schedule = KamSchedule::new(params, cert.gamma, &constants)?;
        Ok(KamState {
            n: 1,
            v: v.clone(),
            v1: v.clone(),
            generators: Vec::new(),
            counterterms: Vec::new(),
            ledger: Vec::new(),
            cert: cert.clone(),
            scale,
            params,
            constants,
            schedule,
            smallness: smallness(v, params, cert, scale),
        })
    }

    /// `R_1 + … + R_{n−1}`.
    pub fn r_total(&self) -> Result<ModeSymbol> {
        self.counterterms.iter().try_fold(self.v1.lattice().zero(), |acc, r| acc.add(r))
    }

    /// Performs step `n`: counterterm, generator, and `V_{n+1}`.
    pub fn step(&mut self, opts: &KamOptions) -> Result<&StepRecord> {
        let n = self.n;
        let ratio = self.scale.ratio();
        let hbar = self.scale.hbar();
        let ct = counterterm(&self.v, &self.generators, self.scale, opts)?;
        let w = self.v.sub(&ct.e)?;
        let f = cohomology::solve(&w, &self.cert)?;

        // V_{n+1} = (iε/ħ) Σ_j (iε/ħ)^j / (j!(j+2)) Ad_F^j([F, W]_ħ)
        let c = Complex64::new(0.0, ratio);
        let bracket = moyal_commutator(&f, &w, hbar, opts.trunc)?;
        let series = LieSeries { coeff: c, hbar, tol: opts.series_tol, trunc: opts.trunc, weight_shift: Some(2) };
        let next = lie_series(&bracket, &f, &series)?.scale(c);

        let p_n = self.schedule.params(n);
        let p_next = self.schedule.params(n + 1);
        let sigma = self.schedule.sigma(n);
        let a = self.constants.alpha;
        let v_norm = self.v.norm(p_n);
        let v_next_norm = next.norm(p_next);
        let action = NormParams { s: self.params.s, rho: 0.0 };
        let record = StepRecord {
            n,
            rho_n: p_n.rho,
            sigma_n: sigma,
            v_norm,
            v_next_norm,
            ratio: if v_norm > 0.0 { v_next_norm / v_norm } else { 0.0 },
            f_norm: ratio * f.norm(NormParams { s: self.params.s, rho: p_n.rho - sigma }),
            f_bound: self.constants.beta * a.powf((n as f64 - 1.0) / 2.0) / 2.0,
            r_norm: ct.r.norm(action),
            r_bound: a.powi(n as i32 - 1) * self.v1.norm(self.params) / (1.0 - self.constants.lambda),
            e_norm: ct.e.norm(action),
            counterterm_iterations: ct.iterations,
            counterterm_residual: ct.residual,
            modes: next.len(),
            tail: next.tail(),
        };
        if opts.enforce_contraction && self.smallness.holds && v_next_norm > a * v_norm * (1.0 + 1e-9) {
            return Err(Error::ContractionViolated { step: n, after: v_next_norm, bound: a * v_norm });
        }

        self.generators.push(f);
        self.counterterms.push(ct.r);
        self.v = next;
        self.n += 1;
        self.ledger.push(record);
        Ok(self.ledger.last().expect("just pushed"))
    }
}

/// Result of [`run`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KamRun {
    pub state: KamState,
    pub r_total: ModeSymbol,
    /// `‖R_total‖_{s,0}`.
    pub r_total_norm: f64,
    /// `2 ‖V‖_{s,ρ}`.
    pub r_total_bound: f64,
    /// `‖V_n‖_{s,ρ_n}` never increased.
    pub monotone: bool,
    /// Reached `stop_tol` within `n_max` steps.
    pub converged: bool,
}

/// Iterates until `‖V_n‖_{0,0}` falls below `stop_tol` relative to `‖V_1‖`
/// or `n_max` steps are done.
///
/// Under the smallness hypothesis the bound `‖R_total‖ ≤ 2‖V‖` is enforced;
/// outside it the run is exploratory and only records what happens.
pub fn run(
    v: &ModeSymbol,
    cert: &DiophantineCert,
    params: NormParams,
    scale: SemiclassicalScale,
    opts: &KamOptions,
) -> Result<KamRun> {
    let mut state = KamState::new(v, cert, params, scale, KamConstants::default())?;
    let floor = opts.stop_tol * v.mass();
    let mut converged = v.mass() <= floor;
    while !converged && state.generators.len() < opts.n_max {
        state.step(opts)?;
        converged = state.v.mass() <= floor;
    }
    let r_total = state.r_total()?;
    let r_total_norm = r_total.norm(NormParams { s: params.s, rho: 0.0 });
    let r_total_bound = 2.0 * v.norm(params);
    if state.smallness.holds && r_total_norm > r_total_bound * (1.0 + 1e-12) {
        return Err(Error::BoundViolated { lhs: r_total_norm, rhs: r_total_bound });
    }
    let monotone = state.ledger.iter().all(|r| r.v_next_norm <= r.v_norm);
    Ok(KamRun { state, r_total, r_total_norm, r_total_bound, monotone, converged })
}

/// Largest `ħ ∈ [lo, hi]` (to `steps` bisections) for which the run with
/// `ε_ħ = eps_of(ħ)` converges while contracting by `α` at every step.
///
/// Assumes convergence is monotone in `ħ`; returns `None` if even `lo` fails.
pub fn bisect_threshold<E: Fn(f64) -> f64>(
    v: &ModeSymbol,
    cert: &DiophantineCert,
    params: NormParams,
    eps_of: E,
    lo: f64,
    hi: f64,
    steps: usize,
    opts: &KamOptions,
) -> Result<Option<f64>> {
    let alpha = KamConstants::default().alpha;
    let converges = |hbar: f64| -> Result<bool> {
        let scale = SemiclassicalScale::new(hbar, eps_of(hbar))?;
        let mut o = *opts;
        o.enforce_contraction = false;
        Ok(match run(v, cert, params, scale, &o) {
            Ok(r) => r.converged && r.state.ledger.iter().all(|s| s.ratio <= alpha),
            Err(Error::InvalidParameter(m)) => return Err(Error::InvalidParameter(m)),
            Err(_) => false,
        })
    };
    if !converges(lo)? {
        return Ok(None);
    }
    if converges(hi)? {
        return Ok(Some(hi));
    }
    let (mut good, mut bad) = (lo, hi);
    for _ in 0..steps {
        let mid = 0.5 * (good + bad);
        if converges(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(Some(good))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::check;
    use crate::symbols::{Lattice, Wave};
    use approx::assert_abs_diff_eq;

    fn line() -> Lattice {
        Lattice::new(1, 1.0).unwrap()
    }

    fn unit_cert() -> DiophantineCert {
        check(&[1.0], 2.0, 1.0, 100).unwrap()
    }

    #[test]
    fn first_counterterm_is_the_average() {
        let l = line();
        let v = l.cos(Wave::action(&[1]), 0.002).add(&l.cos(Wave::new(&[1], &[1]), 0.001)).unwrap();
        let ct = counterterm(&v, &[], SemiclassicalScale::equal(0.1).unwrap(), &KamOptions::default()).unwrap();
        assert_eq!(ct.r, v.average());
        assert_eq!(ct.e, v.average());
    }

    #[test]
    fn counterterm_inverts_the_averaged_conjugation() {
        let l = line();
        let scale = SemiclassicalScale::equal(0.1).unwrap();
        let v = l.cos(Wave::action(&[1]), 1.0);
        let f = l.sin(Wave::angle(&[1]), 1.0);
        let opts = KamOptions::default();
        let ct = counterterm(&v, core::slice::from_ref(&f), scale, &opts).unwrap();
        let back = conjugate(&ct.r, &f, 1.0, scale, opts.series_tol, opts.trunc).unwrap();
        assert!(back.average().sub(&v).unwrap().mass() < 1e-10);
        assert!(ct.r.is_action_only());
        assert!(ct.iterations > 1);
    }

    #[test]
    fn integrable_perturbation_stops_after_one_step() {
        let l = line();
        let v = l.cos(Wave::action(&[1]), 0.003);
        let p = NormParams::new(1.0, 1.0).unwrap();
        let out = run(&v, &unit_cert(), p, SemiclassicalScale::equal(0.1).unwrap(), &KamOptions::default()).unwrap();
        assert_eq!(out.state.ledger.len(), 1);
        assert!(out.state.v.is_empty());
        assert!(out.state.generators[0].is_empty());
        assert_eq!(out.r_total, v);
        assert!(out.converged);
    }

    #[test]
    fn pure_angle_cosine_has_zero_first_counterterm() {
        let l = line();
        let scale = SemiclassicalScale::equal(0.1).unwrap();
        let v = l.cos(Wave::angle(&[1]), 0.002);
        let mut st = KamState::new(&v, &unit_cert(), NormParams::new(1.0, 1.0).unwrap(), scale, KamConstants::default())
            .unwrap();
        st.step(&KamOptions::default()).unwrap();
        assert!(st.counterterms[0].is_empty());
        // F_1 = sin(x) scaled, and [F, cos x]_ħ = 0 for pure angle symbols
        assert_abs_diff_eq!(st.generators[0].get(&Wave::angle(&[1])).im, -0.001, epsilon = 1e-16);
        assert!(st.v.is_empty());
    }

    #[test]
    fn small_perturbation_contracts_by_alpha() {
        let l = line();
        let scale = SemiclassicalScale::equal(0.1).unwrap();
        let v = l.cos(Wave::new(&[1], &[1]), 1.0 / 1024.0).add(&l.cos(Wave::action(&[1]), 1.0 / 1024.0)).unwrap();
        let p = NormParams::new(1.0, 1.0).unwrap();
        let cert = unit_cert();
        assert!(smallness(&v, p, &cert, scale).holds || v.norm(p) > 1.0 / 256.0);
        let opts = KamOptions { trunc: Truncation::EXACT, n_max: 5, ..KamOptions::default() };
        let out = run(&v.scale_real(0.3), &cert, p, scale, &opts).unwrap();
        for r in &out.state.ledger {
            assert!(r.ratio <= 0.25, "step {} ratio {}", r.n, r.ratio);
            assert!(r.f_norm <= r.f_bound);
            assert!(r.r_norm <= r.r_bound);
        }
        assert!(out.monotone);
        assert!(out.r_total_norm <= out.r_total_bound);
        assert!(out.state.v.reality_defect() < 1e-15 * out.state.v1.mass());
    }
}
