//! Pre-run checks of the hypotheses each pipeline relies on.
//!
//! Every check carries a stable id; a strict run refuses to start while any
//! of them fails and names the failed ids, an exploratory run records them
//! and goes ahead.

use serde::{Deserialize, Serialize};
use torkam_core::cohomology::NEAR_RESONANCE;
use torkam_core::diophantine::DiophantineCert;
use torkam_core::kam_classical::{smallness_holds, TorusVectorField};
use torkam_core::kam_quantum::smallness;
use torkam_core::symbols::ModeSymbol;

use crate::config::{ExperimentConfig, Mode};
use crate::error::RunResult;

/// `|k·ω| ≥ ς|k|₁^{1−γ}` on the scanned range.
pub const DIOPHANTINE: &str = "diophantine_certificate";
/// No `k ≠ 0` in the scanned range with `k·ω = 0`.
pub const NONRESONANT: &str = "nonresonant_frequency";
/// Every configured mode lies in the certified range `|k|₁ ≤ k_max`.
pub const MODES_IN_RANGE: &str = "modes_within_k_max";
/// `(ε_ħ/ħ)‖V‖_{s,ρ} ≤ (ς/64)(√ρ/(2(γ−1)))^{2(γ−1)}` for every `ħ`.
pub const QUANTUM_SMALLNESS: &str = "quantum_smallness";
/// `‖v‖_ρ < ρ/16`.
pub const CLASSICAL_SMALLNESS: &str = "classical_smallness";
/// The matrix truncation leaves an interior wider than the symbol band.
pub const TRUNCATION_MARGIN: &str = "truncation_margin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub passed: bool,
    pub detail: String,
    /// A mode or multi-index exhibiting the failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<i32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub strict: bool,
    pub checks: Vec<Check>,
    /// Strict mode with at least one failed check.
    pub blocked: bool,
}

impl Validation {
    pub fn failed(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.id.clone()).collect()
    }

    pub fn passed(&self, id: &str) -> bool {
        self.checks.iter().filter(|c| c.id == id).all(|c| c.passed)
    }
}

fn check(id: &str, passed: bool, detail: String) -> Check {
    Check { id: id.into(), passed, detail, witness: None }
}

/// Runs every check that applies to the configured mode.
pub fn validate(
    cfg: &ExperimentConfig,
    cert: &DiophantineCert,
    v: Option<&ModeSymbol>,
    tests: &[ModeSymbol],
    field: Option<&TorusVectorField>,
    strict: bool,
) -> RunResult<Validation> {
    let d = cfg.d;
    let mut checks = Vec::new();

    let resonant = cert.min_witness < NEAR_RESONANCE;
    checks.push(Check {
        id: NONRESONANT.into(),
        passed: !resonant,
        detail: format!(
            "min |k·ω| |k|₁^(γ−1) over 0 < |k|₁ ≤ {} is {:e} at k = {:?}",
            cert.k_max, cert.min_witness, cert.witness_k
        ),
        witness: resonant.then(|| cert.witness_k.clone()),
    });
    checks.push(Check {
        id: DIOPHANTINE.into(),
        passed: cert.certified && !resonant,
        detail: format!("ς = {:e}, γ = {}, certified on |k|₁ ≤ {}", cert.varsigma, cert.gamma, cert.k_max),
        witness: (!cert.certified).then(|| cert.witness_k.clone()),
    });

    let mut outside: Option<Vec<i32>> = None;
    for s in v.into_iter().chain(tests) {
        for (w, _) in s.iter() {
            if w.k_l1() > i64::from(cfg.k_max) && outside.is_none() {
                outside = Some(w.k[..d].to_vec());
            }
        }
    }
    if let Some(f) = field {
        for (k, _) in f.iter() {
            let l1: i64 = k[..d].iter().map(|&c| i64::from(c).abs()).sum();
            if l1 > i64::from(cfg.k_max) && outside.is_none() {
                outside = Some(k[..d].to_vec());
            }
        }
    }
    checks.push(Check {
        id: MODES_IN_RANGE.into(),
        passed: outside.is_none(),
        detail: format!("all configured modes have |k|₁ ≤ {}", cfg.k_max),
        witness: outside,
    });

    match cfg.mode {
        Mode::QuantumRenorm | Mode::SpectrumCompare | Mode::MeasureDiag => {
            let v = v.expect("schema guarantees a symbol in quantum modes");
            let p = cfg.norm_params()?;
            let mut worst = None::<(f64, f64, f64)>;
            let mut all = true;
            for &h in &cfg.hbar {
                let sm = smallness(v, p, cert, cfg.eps.scale(h)?);
                let ok = sm.holds && !resonant;
                all &= ok;
                if worst.map_or(true, |(_, e, _)| sm.effective > e) {
                    worst = Some((h, sm.effective, sm.threshold));
                }
            }
            let (h, e, t) = worst.unwrap_or((0.0, 0.0, 0.0));
            checks.push(check(
                QUANTUM_SMALLNESS,
                all,
                format!("largest (ε/ħ)‖V‖ = {e:e} at ħ = {h} against threshold {t:e}"),
            ));
            if cfg.mode != Mode::QuantumRenorm {
                let band = v.angle_band().max(tests.iter().map(|a| a.angle_band()).max().unwrap_or(0));
                let (n, margin) = crate::pipeline::truncation(cfg, cfg.hbar[0]);
                checks.push(check(
                    TRUNCATION_MARGIN,
                    margin >= band && margin < n,
                    format!("n = {n}, margin = {margin}, symbol band = {band}"),
                ));
            }
        }
        Mode::ClassicalKam => {
            let f = field.expect("schema guarantees a field in classical mode");
            let rho = cfg.norm.rho;
            checks.push(check(
                CLASSICAL_SMALLNESS,
                smallness_holds(f, rho),
                format!("‖v‖_ρ = {:e} against ρ/16 = {:e}", f.norm(rho), rho / 16.0),
            ));
            if let Some(e) = &cfg.classical.egorov {
                checks.push(check(
                    TRUNCATION_MARGIN,
                    e.margin < e.n && e.margin >= f.band(),
                    format!("n = {}, margin = {}, field band = {}", e.n, e.margin, f.band()),
                ));
            }
        }
    }

    let blocked = strict && checks.iter().any(|c| !c.passed);
    Ok(Validation { strict, checks, blocked })
}
