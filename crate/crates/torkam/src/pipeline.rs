//! The four experiment pipelines.

use std::path::Path;

use serde::{Deserialize, Serialize};
use torkam_core::diophantine::DiophantineCert;
use torkam_core::fourier::Grid;
use torkam_core::kam_classical::{
    egorov_density, kam_conjugate, order_estimates, transport_unitary, unitarity_defect, verify_egorov, EgorovReport,
    FrequencyMap, TorusDiffeo, TorusVectorField,
};
use torkam_core::kam_quantum::{
    assemble_unitary, bisect_threshold, conjugation_residual, run, KamConstants, KamRun, KamSchedule, Smallness,
    StepRecord,
};
use torkam_core::quantize::{transport_matrix, weyl_matrix, window_spectrum, TorusOperator};
use torkam_core::symbols::{ModeSymbol, Regime, SemiclassicalScale, Transport};
use torkam_core::wigner::{density, log_log_slope, measure_diagnostics, Eigenstate, MeasureReport, Prediction, StateVector};
use torkam_core::Complex64;

use crate::config::{ExperimentConfig, Mode};
use crate::error::{RunError, RunResult};
use crate::report::{label, num, write_artifacts, Report, Table};
use crate::validate::{validate, Validation, QUANTUM_SMALLNESS};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Refuse to run while any validation check fails.
    pub strict: bool,
    /// Overrides the configured seed.
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    QuantumRenorm(QuantumReport),
    ClassicalKam(ClassicalReport),
    SpectrumCompare(SpectrumReport),
    MeasureDiag(MeasureDiagReport),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumRunReport {
    pub hbar: f64,
    pub eps: f64,
    pub regime: Regime,
    pub smallness: Smallness,
    pub constants: KamConstants,
    pub schedule: KamSchedule,
    pub steps: Vec<StepRecord>,
    /// Every recorded ratio `‖V_{n+1}‖/‖V_n‖` is at most `α`.
    pub contraction_holds: bool,
    pub monotone: bool,
    pub converged: bool,
    pub r_total: ModeSymbol,
    pub r_total_norm: f64,
    pub r_total_bound: f64,
    pub counterterms: Vec<ModeSymbol>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectReport {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    /// Largest `ħ` found to contract; `None` when even `lo` fails.
    pub hbar_threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumReport {
    pub runs: Vec<QuantumRunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bisect: Option<BisectReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCheck {
    pub k: Vec<i32>,
    pub symbol: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgorovSection {
    pub hbar: f64,
    pub n: usize,
    pub margin: usize,
    pub report: EgorovReport,
    pub unitarity_defect: f64,
    pub density: Vec<DensityCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalReport {
    pub frequency: FrequencyMap,
    pub shift: f64,
    /// `‖v‖_ρ`, the bound on the frequency shift.
    pub v_norm: f64,
    pub residuals: Vec<f64>,
    pub order_estimates: Vec<f64>,
    pub residual: f64,
    pub steps: usize,
    pub converged: bool,
    pub sup_displacement: f64,
    pub min_det: f64,
    pub theta: TorusDiffeo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub egorov: Option<EgorovSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub label: Vec<i32>,
    pub value: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub hbar: f64,
    pub eps: f64,
    pub n: usize,
    pub margin: usize,
    pub steps: usize,
    /// Conjugation residual with the first `m` generators, `m = 0..=steps`.
    pub residuals: Vec<f64>,
    pub decreasing: bool,
    pub final_residual: f64,
    pub window: Vec<WindowRow>,
    pub max_gap: f64,
    pub gaps_within_tol: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub hbar: f64,
    pub eps: f64,
    pub n: usize,
    pub steps: usize,
    pub window_states: usize,
    /// `sup |ρ_ψ − (2π)^{-d}|` over the window states.
    pub max_flatness: f64,
    /// `‖U Op(a) U* − Op(a)‖` on the interior, per test symbol.
    pub invariance: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureDiagReport {
    pub ladder: Vec<LadderRow>,
    /// Per test symbol: log-log slope of the invariance norm against `ε_ħ`.
    pub invariance_slopes: Vec<Option<f64>>,
    /// Per test symbol: log-log slope against `ħ`.
    pub invariance_hbar_slopes: Vec<Option<f64>>,
    /// `max_ħ norm/ε_ħ` per test symbol.
    pub invariance_constants: Vec<f64>,
    pub flatness_slope: Option<f64>,
    /// `max_ħ max_flatness/ħ`.
    pub flatness_constant: f64,
    pub flatness_decreasing: bool,
    pub wigner: MeasureReport,
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub report: Report,
    pub tables: Vec<Table>,
}

/// Truncation `n` and interior margin for a quantum run at `ħ`. Without an
/// explicit `n` the basis reaches `(center + width)/(ħ min|ω_i|)` plus the
/// configured padding.
pub fn truncation(cfg: &ExperimentConfig, hbar: f64) -> (usize, usize) {
    let n = cfg.truncation.n.unwrap_or_else(|| {
        let w = cfg.omega.iter().map(|x| x.abs()).filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
        let w = if w.is_finite() { w } else { 1.0 };
        ((cfg.window.center + cfg.window.width) / (hbar * w)).ceil() as usize + cfg.measure.pad
    });
    let margin = cfg.truncation.margin.unwrap_or((n / 4).max(1));
    (n, margin)
}

struct Prepared {
    seed: u64,
    cert: DiophantineCert,
    v: Option<ModeSymbol>,
    tests: Vec<ModeSymbol>,
    field: Option<TorusVectorField>,
    validation: Validation,
}

fn prepare(cfg: &ExperimentConfig, opts: RunOptions) -> RunResult<Prepared> {
    cfg.check_schema()?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let cert = cfg.certificate()?;
    let (v, tests) = cfg.symbols(seed, &cert)?;
    let field = cfg.field()?;
    let validation = validate(cfg, &cert, v.as_ref(), &tests, field.as_ref(), opts.strict)?;
    Ok(Prepared { seed, cert, v, tests, field, validation })
}

/// Validation only; nothing is run.
pub fn validate_config(cfg: &ExperimentConfig, opts: RunOptions) -> RunResult<Validation> {
    Ok(prepare(cfg, opts)?.validation)
}

/// Runs the configured pipeline and returns the report and tables.
pub fn execute(cfg: &ExperimentConfig, opts: RunOptions) -> RunResult<Artifacts> {
    let prep = prepare(cfg, opts)?;
    if prep.validation.blocked {
        return Err(RunError::Blocked(prep.validation.failed()));
    }
    let (result, tables) = match cfg.mode {
        Mode::QuantumRenorm => quantum_renorm(cfg, &prep)?,
        Mode::ClassicalKam => classical_kam(cfg, &prep)?,
        Mode::SpectrumCompare => spectrum_compare(cfg, &prep)?,
        Mode::MeasureDiag => measure_diag(cfg, &prep)?,
    };
    let report = Report {
        mode: cfg.mode,
        seed: prep.seed,
        config: cfg.clone(),
        certificate: prep.cert,
        validation: prep.validation,
        result,
    };
    Ok(Artifacts { report, tables })
}

/// [`execute`] and write everything into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions, dir: &Path) -> RunResult<Artifacts> {
    let art = execute(cfg, opts)?;
    write_artifacts(dir, &art.report, &art.tables)?;
    Ok(art)
}

fn kam_run(cfg: &ExperimentConfig, prep: &Prepared, scale: SemiclassicalScale) -> RunResult<KamRun> {
    let v = prep.v.as_ref().expect("quantum modes carry a symbol");
    let enforce = prep.validation.passed(QUANTUM_SMALLNESS);
    Ok(run(v, &prep.cert, cfg.norm_params()?, scale, &cfg.kam.options(enforce))?)
}

fn quantum_renorm(cfg: &ExperimentConfig, prep: &Prepared) -> RunResult<(Outcome, Vec<Table>)> {
    let mut table = Table::new("steps", &["hbar", "n", "v_norm", "f_norm", "r_norm", "ratio"]);
    let mut runs = Vec::new();
    for &h in &cfg.hbar {
        let scale = cfg.eps.scale(h)?;
        let out = kam_run(cfg, prep, scale)?;
        let st = &out.state;
        for r in &st.ledger {
            table.push(vec![num(h), r.n.to_string(), num(r.v_norm), num(r.f_norm), num(r.r_norm), num(r.ratio)]);
        }
        runs.push(QuantumRunReport {
            hbar: h,
            eps: scale.eps(),
            regime: scale.regime(),
            smallness: st.smallness,
            constants: st.constants,
            schedule: st.schedule,
            contraction_holds: st.ledger.iter().all(|r| r.ratio <= st.constants.alpha),
            steps: st.ledger.clone(),
            monotone: out.monotone,
            converged: out.converged,
            r_total_norm: out.r_total_norm,
            r_total_bound: out.r_total_bound,
            counterterms: st.counterterms.clone(),
            r_total: out.r_total,
        });
    }
    let bisect = match &cfg.bisect {
        Some(b) => {
            let v = prep.v.as_ref().expect("quantum modes carry a symbol");
            let rule = cfg.eps;
            let found = bisect_threshold(
                v,
                &prep.cert,
                cfg.norm_params()?,
                |h| rule.eps(h),
                b.lo,
                b.hi,
                b.steps,
                &cfg.kam.options(false),
            )?;
            Some(BisectReport { lo: b.lo, hi: b.hi, steps: b.steps, hbar_threshold: found })
        }
        None => None,
    };
    Ok((Outcome::QuantumRenorm(QuantumReport { runs, bisect }), vec![table]))
}

fn classical_kam(cfg: &ExperimentConfig, prep: &Prepared) -> RunResult<(Outcome, Vec<Table>)> {
    let v = prep.field.as_ref().expect("classical mode carries a field");
    let opts = cfg.classical.options();
    let kam = kam_conjugate(v, &cfg.omega, &prep.cert, &opts)?;
    let orders = order_estimates(&kam.residuals);
    let grid = Grid::new(cfg.d, 4 * opts.cutoff.max(1))?;
    let min_det = kam.theta.min_det(&grid)?;

    let mut residuals = Table::new("residuals", &["step", "residual", "order"]);
    for (i, r) in kam.residuals.iter().enumerate() {
        let order = if i >= 2 { orders.get(i - 2).map(|q| num(*q)).unwrap_or_default() } else { String::new() };
        residuals.push(vec![i.to_string(), num(*r), order]);
    }
    let mut tables = vec![residuals];

    let egorov = match &cfg.classical.egorov {
        Some(e) => {
            let u = transport_unitary(&kam.theta, e.n)?;
            let report = verify_egorov(&u, &cfg.omega, &kam.frequency.phi, v, e.hbar, e.margin)?;
            let unitarity = unitarity_defect(&u, e.margin);
            let mut rows = Vec::new();
            let mut table = Table::new("density", &["k", "symbol", "lhs", "rhs", "deviation"]);
            for k in &e.density_k {
                for (s, b) in prep.tests.iter().enumerate() {
                    if b.iter().any(|(w, _)| w.m_l1() != 0) {
                        continue;
                    }
                    let (lhs, rhs) = egorov_density(&u, &kam.theta, k, b)?;
                    table.push(vec![label(k), s.to_string(), num(lhs), num(rhs), num((lhs - rhs).abs())]);
                    rows.push(DensityCheck { k: k.clone(), symbol: s, lhs, rhs, deviation: (lhs - rhs).abs() });
                }
            }
            tables.push(table);
            Some(EgorovSection { hbar: e.hbar, n: e.n, margin: e.margin, report, unitarity_defect: unitarity, density: rows })
        }
        None => None,
    };

    let report = ClassicalReport {
        shift: kam.frequency.shift(),
        frequency: kam.frequency,
        v_norm: v.norm(cfg.norm.rho),
        order_estimates: orders,
        residual: kam.residual,
        residuals: kam.residuals,
        steps: kam.steps,
        converged: kam.converged,
        sup_displacement: kam.theta.displacement_bound(),
        min_det,
        theta: kam.theta,
        egorov,
    };
    Ok((Outcome::ClassicalKam(report), tables))
}

/// `L̂_ω + ε Op(V − R)` on `|k|_∞ ≤ n`.
pub fn renormalized(
    omega: &Transport,
    v: &ModeSymbol,
    r: &ModeSymbol,
    scale: SemiclassicalScale,
    n: usize,
) -> RunResult<TorusOperator> {
    let h = scale.hbar();
    let l = transport_matrix(omega, h, n)?;
    Ok(l.axpy(Complex64::new(scale.eps(), 0.0), &weyl_matrix(&v.sub(r)?, h, n)?)?)
}

/// Non-increasing up to round-off at the floor.
fn decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-13)
}

fn spectrum_compare(cfg: &ExperimentConfig, prep: &Prepared) -> RunResult<(Outcome, Vec<Table>)> {
    let v = prep.v.as_ref().expect("quantum modes carry a symbol");
    let h = cfg.hbar[0];
    let scale = cfg.eps.scale(h)?;
    let out = kam_run(cfg, prep, scale)?;
    let (n, margin) = truncation(cfg, h);
    let omega = Transport::new(&cfg.omega)?;
    let gens = &out.state.generators;

    let mut res_table = Table::new("residuals", &["generators", "residual"]);
    let mut residuals = Vec::with_capacity(gens.len() + 1);
    let mut r = v.lattice().zero();
    for m in 0..=gens.len() {
        if m > 0 {
            r = r.add(&out.state.counterterms[m - 1])?;
        }
        let u = assemble_unitary(&gens[..m], scale, cfg.d, n, margin)?;
        let res = conjugation_residual(&u, v, &r, &omega, scale, margin)?;
        res_table.push(vec![m.to_string(), num(res)]);
        residuals.push(res);
    }

    let q = renormalized(&omega, v, &out.r_total, scale, n)?;
    let eig = window_spectrum(&q, &omega, cfg.window.center, cfg.window.width)?;
    let mut spec_table = Table::new("spectrum", &["label", "lambda", "gap"]);
    let window: Vec<WindowRow> = eig
        .iter()
        .map(|e| {
            spec_table.push(vec![label(&e.label), num(e.value), num(e.gap)]);
            WindowRow { label: e.label.clone(), value: e.value, gap: e.gap }
        })
        .collect();
    let max_gap = window.iter().map(|w| w.gap).fold(0.0, f64::max);
    let report = SpectrumReport {
        hbar: h,
        eps: scale.eps(),
        n,
        margin,
        steps: gens.len(),
        decreasing: decreasing(&residuals),
        final_residual: *residuals.last().expect("m = 0 is always present"),
        residuals,
        gaps_within_tol: max_gap <= cfg.window.gap_tol,
        max_gap,
        window,
    };
    Ok((Outcome::SpectrumCompare(report), vec![res_table, spec_table]))
}

fn measure_diag(cfg: &ExperimentConfig, prep: &Prepared) -> RunResult<(Outcome, Vec<Table>)> {
    let v = prep.v.as_ref().expect("quantum modes carry a symbol");
    let omega = Transport::new(&cfg.omega)?;
    let (ni, mi) = (cfg.measure.invariance_n, cfg.measure.invariance_margin);
    let mut ladder = Vec::new();
    let mut states = Vec::new();
    let mut inv_table = Table::new("invariance", &["hbar", "eps", "symbol", "norm"]);
    let mut dens_table = Table::new("density", &["hbar", "label", "eigenvalue", "flatness"]);

    for &h in &cfg.hbar {
        let scale = cfg.eps.scale(h)?;
        let out = kam_run(cfg, prep, scale)?;
        let (n, _) = truncation(cfg, h);

        let q = renormalized(&omega, v, &out.r_total, scale, n)?;
        let eig = window_spectrum(&q, &omega, cfg.window.center, cfg.window.width)?;
        let mut max_flatness = 0.0f64;
        for e in &eig {
            let state = StateVector::normalized(q.basis(), h, e.vector.clone())?;
            let flat = density(&state, 0)?.flatness();
            dens_table.push(vec![num(h), label(&e.label), num(e.value), num(flat)]);
            max_flatness = max_flatness.max(flat);
            states.push(Eigenstate { hbar: h, state, eigenvalue: e.value, label: e.label.clone() });
        }

        let u = assemble_unitary(&out.state.generators, scale, cfg.d, ni, mi)?;
        let ua = u.adjoint();
        let mut invariance = Vec::with_capacity(prep.tests.len());
        for (s, a) in prep.tests.iter().enumerate() {
            let op = weyl_matrix(a, h, ni)?;
            let norm = u.mul(&op)?.mul(&ua)?.sub(&op)?.interior_norm(mi)?;
            inv_table.push(vec![num(h), num(scale.eps()), s.to_string(), num(norm)]);
            invariance.push(norm);
        }
        ladder.push(LadderRow {
            hbar: h,
            eps: scale.eps(),
            n,
            steps: out.state.ledger.len(),
            window_states: eig.len(),
            max_flatness,
            invariance,
        });
    }

    let wigner = measure_diagnostics(&states, &prep.tests, Prediction::Haar)?;
    let mut w_table = Table::new("measure", &["hbar", "label", "symbol", "wigner", "prediction", "deviation"]);
    for s in &wigner.samples {
        w_table.push(vec![num(s.hbar), label(&s.label), s.symbol.to_string(), num(s.value), num(s.prediction), num(s.deviation)]);
    }

    let hbars: Vec<f64> = ladder.iter().map(|r| r.hbar).collect();
    let epss: Vec<f64> = ladder.iter().map(|r| r.eps).collect();
    let per_symbol = |s: usize| -> Vec<f64> { ladder.iter().map(|r| r.invariance[s]).collect() };
    let invariance_slopes = (0..prep.tests.len()).map(|s| log_log_slope(&epss, &per_symbol(s))).collect();
    let invariance_hbar_slopes = (0..prep.tests.len()).map(|s| log_log_slope(&hbars, &per_symbol(s))).collect();
    let invariance_constants = (0..prep.tests.len())
        .map(|s| ladder.iter().map(|r| r.invariance[s] / r.eps).fold(0.0, f64::max))
        .collect();
    let flats: Vec<f64> = ladder.iter().map(|r| r.max_flatness).collect();
    let mut order: Vec<usize> = (0..ladder.len()).collect();
    order.sort_by(|&a, &b| hbars[b].total_cmp(&hbars[a]));
    let flatness_decreasing = order.windows(2).all(|w| flats[w[1]] <= flats[w[0]]);
    let report = MeasureDiagReport {
        invariance_slopes,
        invariance_hbar_slopes,
        invariance_constants,
        flatness_slope: log_log_slope(&hbars, &flats),
        flatness_constant: ladder.iter().map(|r| r.max_flatness / r.hbar).fold(0.0, f64::max),
        flatness_decreasing,
        ladder,
        wigner,
    };
    Ok((Outcome::MeasureDiag(report), vec![w_table, inv_table, dens_table]))
}
