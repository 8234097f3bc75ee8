use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{Lattice, ModeSymbol, Wave};
use crate::Error;

/// One stored wave in the JSON layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub k: Vec<i32>,
    pub eta: Vec<f64>,
    pub re: f64,
    pub im: f64,
}

/// Serialized form `{d, dxi, modes: [{k, eta, re, im}], tail}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolDocument {
    pub d: usize,
    pub dxi: f64,
    pub modes: Vec<ModeEntry>,
    pub tail: f64,
}

impl From<ModeSymbol> for SymbolDocument {
    fn from(s: ModeSymbol) -> Self {
        let d = s.dim();
        let modes = s
            .iter()
            .map(|(w, a)| ModeEntry {
                k: w.k[..d].to_vec(),
                eta: s.eta(w)[..d].to_vec(),
                re: a.re,
                im: a.im,
            })
            .collect();
        SymbolDocument { d, dxi: s.dxi(), modes, tail: s.tail() }
    }
}

impl TryFrom<SymbolDocument> for ModeSymbol {
    type Error = Error;

    fn try_from(doc: SymbolDocument) -> Result<Self, Error> {
        let lattice = Lattice::new(doc.d, doc.dxi)?;
        if !(doc.tail.is_finite() && doc.tail >= 0.0) {
            return Err(Error::InvalidParameter(format!("tail {} must be finite and ≥ 0", doc.tail)));
        }
        let mut modes = BTreeMap::new();
        for entry in doc.modes {
            if entry.k.len() != doc.d || entry.eta.len() != doc.d {
                return Err(Error::InvalidParameter(format!(
                    "mode with k={:?}, eta={:?} does not have dimension {}",
                    entry.k, entry.eta, doc.d
                )));
            }
            let mut m = Vec::with_capacity(doc.d);
            for &eta in &entry.eta {
                let units = (eta / doc.dxi).round();
                if (eta - units * doc.dxi).abs() > 1e-9 * eta.abs().max(1.0) || units.abs() > i32::MAX as f64 {
                    return Err(Error::InvalidParameter(format!("η = {eta} is not on the lattice δξ·Z")));
                }
                m.push(units as i32);
            }
            let amp = Complex64::new(entry.re, entry.im);
            if amp == Complex64::default() {
                continue;
            }
            if modes.insert(Wave::new(&entry.k, &m), amp).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate mode k={:?}, eta={:?}", entry.k, entry.eta)));
            }
        }
        Ok(ModeSymbol::from_parts(lattice, modes, doc.tail))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn off_lattice_eta_is_rejected() {
        let doc = SymbolDocument {
            d: 1,
            dxi: 0.5,
            modes: alloc::vec![ModeEntry { k: alloc::vec![1], eta: alloc::vec![0.3], re: 1.0, im: 0.0 }],
            tail: 0.0,
        };
        assert!(ModeSymbol::try_from(doc).is_err());
    }

    #[test]
    fn document_keeps_lattice_units() {
        let l = Lattice::new(2, 0.25).unwrap();
        let s = l.cos(Wave::new(&[1, -1], &[3, 0]), 0.5);
        let doc = SymbolDocument::from(s.clone());
        assert_eq!(doc.modes.len(), 2);
        assert_eq!(doc.modes[1].eta, alloc::vec![0.75, 0.0]);
        assert_eq!(ModeSymbol::try_from(doc).unwrap(), s);
    }
}
