//! Seeded random symbols for property checks and `random` symbol specs.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use torkam_core::symbols::{Lattice, ModeSymbol, Wave};
use torkam_core::Complex64;

/// The generator every seeded entry point uses; ChaCha output is stable
/// across platforms and releases, which the reports rely on.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A real symbol with at most `modes` stored waves, `|k|_∞ ≤ band`,
/// `|m|_∞ ≤ band` and amplitudes uniform in the square of half-width
/// `amplitude`. Waves come in conjugate pairs `(w, A)`, `(−w, Ā)`.
pub fn real_symbol<R: Rng>(rng: &mut R, lattice: Lattice, modes: usize, band: i32, amplitude: f64) -> ModeSymbol {
    let d = lattice.dim();
    let mut out = lattice.zero();
    for _ in 0..modes / 2 {
        let k: Vec<i32> = (0..d).map(|_| rng.gen_range(-band..=band)).collect();
        let m: Vec<i32> = (0..d).map(|_| rng.gen_range(-band..=band)).collect();
        let a = Complex64::new(rng.gen_range(-amplitude..=amplitude), rng.gen_range(-amplitude..=amplitude));
        let w = Wave::new(&k, &m);
        if w == Wave::ZERO {
            out.add_mode(w, Complex64::new(a.re, 0.0));
        } else {
            out.add_mode(w, a);
            out.add_mode(-w, a.conj());
        }
    }
    out
}

/// A real symbol with no `k = 0` modes, as fed to the cohomological equation.
pub fn oscillating_symbol<R: Rng>(rng: &mut R, lattice: Lattice, modes: usize, band: i32, amplitude: f64) -> ModeSymbol {
    real_symbol(rng, lattice, modes, band, amplitude).oscillating()
}
