//! TOML experiment configuration.
//!
//! ```toml
//! mode = "quantum_renorm"
//! d = 1
//! omega = [1.0]
//! varsigma = 1.0
//! hbar = [0.05]
//!
//! [symbol]
//! cos = [{ k = [1], m = [1], amp = 0.5 }, { k = [1], m = [-1], amp = 0.5 }]
//! threshold_fraction = 0.5
//! ```

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use torkam_core::diophantine::{best_constant, check, DiophantineCert};
use torkam_core::kam_classical::{ClassicalOptions, TorusVectorField};
use torkam_core::kam_quantum::{smallness_threshold, KamOptions};
use torkam_core::symbols::{Lattice, ModeSymbol, NormParams, SemiclassicalScale, Truncation, Wave};
use torkam_core::{Complex64, Error, MAX_DIM};

use crate::error::{RunError, RunResult};
use crate::sampling;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Counterterm renormalization of `L̂_ω + ε Op(V)`.
    QuantumRenorm,
    /// Newton iteration for `ω + v` on `T^d`, optionally with the Egorov check.
    ClassicalKam,
    /// Conjugation residuals and the renormalized spectrum near `λ = center`.
    SpectrumCompare,
    /// Wigner, density and observable-invariance diagnostics over an `ħ` ladder.
    MeasureDiag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub d: usize,
    pub omega: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Diophantine constant; when absent the best constant on `|k|₁ ≤ k_max`
    /// is used.
    #[serde(default)]
    pub varsigma: Option<f64>,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default)]
    pub norm: NormConfig,
    /// The perturbation `V` (quantum modes).
    #[serde(default)]
    pub symbol: Option<SymbolSpec>,
    /// The perturbation `v` (classical mode).
    #[serde(default)]
    pub vector_field: Option<FieldSpec>,
    /// Observables for the measure diagnostics.
    #[serde(default)]
    pub test_symbols: Vec<SymbolSpec>,
    #[serde(default)]
    pub hbar: Vec<f64>,
    #[serde(default)]
    pub eps: EpsRule,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub kam: KamConfig,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub bisect: Option<BisectConfig>,
    #[serde(default)]
    pub classical: ClassicalConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormConfig {
    pub s: f64,
    pub rho: f64,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig { s: 1.0, rho: 1.0 }
    }
}

/// A symbol on the lattice `δξ·Z^d`, given as raw modes, cosines, sines and
/// seeded random modes, all summed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "one")]
    pub dxi: f64,
    #[serde(default)]
    pub modes: Vec<ModeSpec>,
    #[serde(default)]
    pub cos: Vec<WaveSpec>,
    #[serde(default)]
    pub sin: Vec<WaveSpec>,
    #[serde(default)]
    pub random: Option<RandomSpec>,
    /// Rescales the symbol so that `‖V‖_{s,ρ}` equals this fraction of the
    /// quantum smallness threshold.
    #[serde(default)]
    pub threshold_fraction: Option<f64>,
}

/// `(re + i·im) e^{i(k·x + δξ m·ξ)}`; omitted `k` or `m` mean zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    #[serde(default)]
    pub k: Vec<i32>,
    #[serde(default)]
    pub m: Vec<i32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// `amp·cos(k·x + δξ m·ξ)` or the sine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    #[serde(default)]
    pub k: Vec<i32>,
    #[serde(default)]
    pub m: Vec<i32>,
    pub amp: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub modes: usize,
    pub band: i32,
    pub amplitude: f64,
}

/// A vector field on `T^d` as a sum of modes `c e^{ik·x}` with `c ∈ C^d`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default)]
    pub modes: Vec<FieldModeSpec>,
    #[serde(default)]
    pub cos: Vec<FieldWaveSpec>,
    #[serde(default)]
    pub sin: Vec<FieldWaveSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldModeSpec {
    pub k: Vec<i32>,
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldWaveSpec {
    pub k: Vec<i32>,
    pub amp: Vec<f64>,
}

/// `ε_ħ = prefactor · ħ^power`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsRule {
    #[serde(default = "one")]
    pub prefactor: f64,
    #[serde(default = "one")]
    pub power: f64,
}

impl Default for EpsRule {
    fn default() -> Self {
        EpsRule { prefactor: 1.0, power: 1.0 }
    }
}

impl EpsRule {
    pub fn eps(&self, hbar: f64) -> f64 {
        self.prefactor * hbar.powf(self.power)
    }

    pub fn scale(&self, hbar: f64) -> RunResult<SemiclassicalScale> {
        Ok(SemiclassicalScale::new(hbar, self.eps(hbar))?)
    }
}

/// Matrix truncation `|k|_∞ ≤ n` and the interior margin read by every check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub n: Option<usize>,
    pub margin: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KamConfig {
    pub n_max: usize,
    /// Relative truncation of symbol products; 0 keeps every mode.
    pub tail_tol: f64,
    /// Stop once `‖V_n‖_{0,0} < stop_tol · ‖V_1‖_{0,0}`; 0 runs all `n_max` steps.
    pub stop_tol: f64,
    pub series_tol: f64,
    pub counterterm_tol: f64,
    pub counterterm_max_iter: usize,
}

impl Default for KamConfig {
    fn default() -> Self {
        let o = KamOptions::default();
        KamConfig {
            n_max: o.n_max,
            tail_tol: o.trunc.tol,
            stop_tol: o.stop_tol,
            series_tol: o.series_tol,
            counterterm_tol: o.counterterm_tol,
            counterterm_max_iter: o.counterterm_max_iter,
        }
    }
}

impl KamConfig {
    pub fn options(&self, enforce_contraction: bool) -> KamOptions {
        KamOptions {
            trunc: Truncation { tol: self.tail_tol },
            series_tol: self.series_tol,
            counterterm_tol: self.counterterm_tol,
            counterterm_max_iter: self.counterterm_max_iter,
            n_max: self.n_max,
            stop_tol: self.stop_tol,
            enforce_contraction,
        }
    }
}

/// Spectral window `|λ − center| ≤ width` and the tolerated gap to `ħω·k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub center: f64,
    pub width: f64,
    pub gap_tol: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { center: 1.0, width: 0.2, gap_tol: 1e-6 }
    }
}

/// Searches the largest `ħ` in `[lo, hi]` for which the iteration still
/// contracts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BisectConfig {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_bisect_steps")]
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    pub n_max: usize,
    pub tol: f64,
    pub cutoff: usize,
    pub min_det: f64,
    /// Quantum check of the classical conjugacy; skipped when absent.
    #[serde(default)]
    pub egorov: Option<EgorovConfig>,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        let o = ClassicalOptions::default();
        ClassicalConfig { n_max: o.n_max, tol: o.tol, cutoff: o.cutoff, min_det: o.min_det, egorov: None }
    }
}

impl ClassicalConfig {
    pub fn options(&self) -> ClassicalOptions {
        ClassicalOptions { n_max: self.n_max, tol: self.tol, cutoff: self.cutoff, min_det: self.min_det }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgorovConfig {
    pub hbar: f64,
    pub n: usize,
    pub margin: usize,
    /// Basis labels at which `∫ b |U* e_k|²` is compared with `∫ b∘θ`;
    /// `b` ranges over the angle-only test symbols.
    #[serde(default)]
    pub density_k: Vec<Vec<i32>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    /// Truncation for `‖U Op(a) U* − Op(a)‖`.
    pub invariance_n: usize,
    pub invariance_margin: usize,
    /// Extra shells beyond the window when the eigenproblem truncation is
    /// chosen automatically.
    pub pad: usize,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig { invariance_n: 32, invariance_margin: 16, pad: 20 }
    }
}

fn default_gamma() -> f64 {
    2.0
}

fn default_k_max() -> u32 {
    200
}

fn default_bisect_steps() -> usize {
    12
}

fn one() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> RunResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.check_schema()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> RunResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Shape checks that do not need any numerics.
    pub fn check_schema(&self) -> RunResult<()> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.d == 0 || self.d > MAX_DIM {
            return bad(format!("d = {} outside 1..={MAX_DIM}", self.d));
        }
        if self.omega.len() != self.d {
            return bad(format!("omega has {} entries for d = {}", self.omega.len(), self.d));
        }
        if self.omega.iter().any(|w| !w.is_finite()) {
            return bad("omega must be finite".into());
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return bad(format!("gamma = {} must be > 1", self.gamma));
        }
        if matches!(self.varsigma, Some(v) if !(v > 0.0 && v.is_finite())) {
            return bad("varsigma must be positive".into());
        }
        if !(self.norm.s >= 0.0 && self.norm.rho > 0.0 && self.norm.s.is_finite() && self.norm.rho.is_finite()) {
            return bad(format!("norm parameters s = {}, rho = {} out of range", self.norm.s, self.norm.rho));
        }
        if self.hbar.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return bad("every hbar must be positive".into());
        }
        if !(self.eps.prefactor > 0.0 && self.eps.prefactor.is_finite() && self.eps.power.is_finite()) {
            return bad("eps rule must have a positive prefactor".into());
        }
        if !(self.kam.tail_tol >= 0.0 && self.kam.stop_tol >= 0.0) {
            return bad("kam tolerances must be ≥ 0".into());
        }
        if let (Some(n), Some(m)) = (self.truncation.n, self.truncation.margin) {
            if m >= n {
                return bad(format!("margin {m} leaves no interior in n = {n}"));
            }
        }
        let specs = self.symbol.iter().chain(&self.test_symbols);
        for s in specs {
            s.check_shape(self.d)?;
        }
        if let Some(f) = &self.vector_field {
            f.check_shape(self.d)?;
        }
        match self.mode {
            Mode::QuantumRenorm | Mode::SpectrumCompare | Mode::MeasureDiag => {
                if self.symbol.is_none() {
                    return bad("quantum modes need a [symbol] table".into());
                }
                if self.hbar.is_empty() {
                    return bad("quantum modes need at least one hbar".into());
                }
            }
            Mode::ClassicalKam => {
                if self.vector_field.is_none() {
                    return bad("classical_kam needs a [vector_field] table".into());
                }
            }
        }
        if self.mode == Mode::MeasureDiag && self.test_symbols.is_empty() {
            return bad("measure_diag needs test_symbols".into());
        }
        if let Some(b) = &self.bisect {
            if !(b.lo > 0.0 && b.lo < b.hi) {
                return bad(format!("bisection interval [{}, {}] is empty", b.lo, b.hi));
            }
        }
        Ok(())
    }

    pub fn norm_params(&self) -> RunResult<NormParams> {
        Ok(NormParams::new(self.norm.s, self.norm.rho)?)
    }

    /// The certificate the run uses: the configured `ς`, or the best one on
    /// the scanned range (which is `0` for a resonant `ω`).
    pub fn certificate(&self) -> RunResult<DiophantineCert> {
        let varsigma = match self.varsigma {
            Some(v) => Ok(v),
            None => best_constant(&self.omega, self.gamma, self.k_max),
        };
        match varsigma.and_then(|v| check(&self.omega, self.gamma, v, self.k_max)) {
            Ok(cert) => Ok(cert),
            // An uncertified record that keeps the witness; validation blocks on it.
            Err(Error::Resonant { k }) => Ok(DiophantineCert {
                omega: self.omega.clone(),
                gamma: self.gamma,
                varsigma: self.varsigma.unwrap_or(0.0),
                k_max: self.k_max,
                min_witness: 0.0,
                witness_k: k,
                certified: false,
            }),
            Err(e) => Err(e.into()),
        }
    }

    /// Builds the perturbation and the test symbols, drawing random modes
    /// from one generator in that order.
    pub fn symbols(&self, seed: u64, cert: &DiophantineCert) -> RunResult<(Option<ModeSymbol>, Vec<ModeSymbol>)> {
        let mut rng = sampling::rng(seed);
        let p = self.norm_params()?;
        let threshold = if cert.certified { smallness_threshold(p, cert) } else { 0.0 };
        let v = match &self.symbol {
            Some(s) => Some(s.build(self.d, &mut rng, p, threshold)?),
            None => None,
        };
        let tests = self
            .test_symbols
            .iter()
            .map(|s| s.build(self.d, &mut rng, p, threshold))
            .collect::<RunResult<Vec<_>>>()?;
        Ok((v, tests))
    }

    pub fn field(&self) -> RunResult<Option<TorusVectorField>> {
        self.vector_field.as_ref().map(|f| f.build(self.d)).transpose()
    }
}

fn padded(v: &[i32], d: usize, what: &str) -> RunResult<Vec<i32>> {
    match v.len() {
        0 => Ok(vec![0; d]),
        n if n == d => Ok(v.to_vec()),
        n => Err(RunError::Config(format!("{what} {v:?} has {n} entries for d = {d}"))),
    }
}

impl SymbolSpec {
    fn check_shape(&self, d: usize) -> RunResult<()> {
        if !(self.dxi > 0.0 && self.dxi.is_finite()) {
            return Err(RunError::Config(format!("dxi = {} must be positive", self.dxi)));
        }
        for m in &self.modes {
            padded(&m.k, d, "k")?;
            padded(&m.m, d, "m")?;
        }
        for w in self.cos.iter().chain(&self.sin) {
            padded(&w.k, d, "k")?;
            padded(&w.m, d, "m")?;
        }
        if let Some(r) = &self.random {
            if r.band < 0 || !(r.amplitude >= 0.0) {
                return Err(RunError::Config("random symbol needs band ≥ 0 and amplitude ≥ 0".into()));
            }
        }
        if matches!(self.threshold_fraction, Some(f) if !(f > 0.0 && f.is_finite())) {
            return Err(RunError::Config("threshold_fraction must be positive".into()));
        }
        Ok(())
    }

    pub fn build<R: Rng>(&self, d: usize, rng: &mut R, p: NormParams, threshold: f64) -> RunResult<ModeSymbol> {
        self.check_shape(d)?;
        let lattice = Lattice::new(d, self.dxi)?;
        let mut out = lattice.zero();
        for m in &self.modes {
            out.add_mode(Wave::new(&padded(&m.k, d, "k")?, &padded(&m.m, d, "m")?), Complex64::new(m.re, m.im));
        }
        for (list, cosine) in [(&self.cos, true), (&self.sin, false)] {
            for w in list {
                let wave = Wave::new(&padded(&w.k, d, "k")?, &padded(&w.m, d, "m")?);
                let term = if cosine { lattice.cos(wave, w.amp) } else { lattice.sin(wave, w.amp) };
                out = out.add(&term)?;
            }
        }
        if let Some(r) = &self.random {
            out = out.add(&sampling::real_symbol(rng, lattice, r.modes, r.band, r.amplitude))?;
        }
        if let Some(f) = self.threshold_fraction {
            let norm = out.norm(p);
            if norm == 0.0 {
                return Err(RunError::Config("cannot rescale a zero symbol to the threshold".into()));
            }
            if threshold == 0.0 {
                return Err(RunError::Config("threshold_fraction needs a non-resonant frequency".into()));
            }
            out = out.scale_real(f * threshold / norm);
        }
        Ok(out)
    }
}

impl FieldSpec {
    fn check_shape(&self, d: usize) -> RunResult<()> {
        for m in &self.modes {
            padded(&m.k, d, "k")?;
            if m.re.len() != d || !(m.im.is_empty() || m.im.len() == d) {
                return Err(RunError::Config(format!("field mode at k = {:?} needs {d} components", m.k)));
            }
        }
        for w in self.cos.iter().chain(&self.sin) {
            padded(&w.k, d, "k")?;
            if w.amp.len() != d {
                return Err(RunError::Config(format!("field wave at k = {:?} needs {d} components", w.k)));
            }
        }
        Ok(())
    }

    pub fn build(&self, d: usize) -> RunResult<TorusVectorField> {
        self.check_shape(d)?;
        let mut v = TorusVectorField::zero(d)?;
        for m in &self.modes {
            let c: Vec<Complex64> =
                (0..d).map(|i| Complex64::new(m.re[i], m.im.get(i).copied().unwrap_or(0.0))).collect();
            v.add_mode(&padded(&m.k, d, "k")?, &c);
        }
        for w in &self.cos {
            v = v.add(&TorusVectorField::cos(&padded(&w.k, d, "k")?, &w.amp)?)?;
        }
        for w in &self.sin {
            v = v.add(&TorusVectorField::sin(&padded(&w.k, d, "k")?, &w.amp)?)?;
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CRITERION: &str = r#"
        mode = "quantum_renorm"
        d = 1
        omega = [1.0]
        varsigma = 1.0
        k_max = 1000
        hbar = [0.05]

        [symbol]
        cos = [{ k = [1], m = [1], amp = 0.5 }, { k = [1], m = [-1], amp = 0.5 }]
        threshold_fraction = 0.5
    "#;

    #[test]
    fn parses_and_rescales_to_the_threshold() {
        let cfg = ExperimentConfig::from_toml(CRITERION).unwrap();
        let cert = cfg.certificate().unwrap();
        let (v, tests) = cfg.symbols(0, &cert).unwrap();
        let v = v.unwrap();
        assert!(tests.is_empty());
        let p = cfg.norm_params().unwrap();
        assert!((v.norm(p) - 0.5 / 256.0).abs() < 1e-15);
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn schema_errors_are_config_errors() {
        let text = CRITERION.replace("omega = [1.0]", "omega = [1.0, 2.0]");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(RunError::Config(_))));
        let text = CRITERION.replace("hbar = [0.05]", "hbar = [0.05]\nunknown = 3");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(RunError::Config(_))));
        let text = CRITERION.replace("k = [1], m = [1]", "k = [1, 0], m = [1]");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(RunError::Config(_))));
    }

    #[test]
    fn resonant_frequency_keeps_its_witness() {
        let text = CRITERION.replace("omega = [1.0]", "omega = [1.0, 2.0]").replace("d = 1", "d = 2")
            .replace("varsigma = 1.0\n", "")
            .replace("k = [1], m = [1]", "k = [1, 0], m = [1, 0]")
            .replace("k = [1], m = [-1]", "k = [1, 0], m = [-1, 0]")
            .replace("k_max = 1000", "k_max = 10");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let cert = cfg.certificate().unwrap();
        assert!(!cert.certified);
        assert_eq!(cert.min_witness, 0.0);
        let k = &cert.witness_k;
        assert_eq!(f64::from(k[0]) + 2.0 * f64::from(k[1]), 0.0);
    }
}
