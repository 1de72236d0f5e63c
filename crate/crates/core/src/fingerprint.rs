//! Hashed Morgan (ECFP) fingerprints.
//!
//! Identifiers are 32-bit FNV-1a hashes over little-endian encodings, so
//! fingerprints are reproducible everywhere but are not bit-compatible with
//! other toolkits. Environments that cover an atom set already seen (at an
//! earlier radius, or for another atom at the same radius) are dropped, and
//! within a radius the lowest identifier wins.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::hash::Fnv1a32;
use crate::scalar::Scalar;
use crate::smiles::MoleculeGraph;

pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_NBITS: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    nbits: usize,
    radius: u32,
}

impl Fingerprint {
    pub fn empty(nbits: usize, radius: u32) -> Self {
        Self {
            words: vec![0; nbits.div_ceil(64)],
            nbits,
            radius,
        }
    }

    pub fn from_bits(nbits: usize, radius: u32, bits: impl IntoIterator<Item = usize>) -> Self {
        let mut fp = Self::empty(nbits, radius);
        for b in bits {
            fp.set(b);
        }
        fp
    }

    pub fn set(&mut self, bit: usize) {
        let bit = bit % self.nbits;
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.nbits && self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(|&b| self.get(b))
    }

    /// Dense 0/1 vector.
    pub fn to_dense<S: Scalar>(&self) -> Vec<S> {
        (0..self.nbits)
            .map(|b| if self.get(b) { S::one() } else { S::zero() })
            .collect()
    }
}

/// Initial atom identifier: hash of (element, heavy degree, total H, charge,
/// ring flag, aromatic flag), each as a little-endian 32-bit word.
pub fn atom_invariant(graph: &MoleculeGraph, atom_index: usize) -> u32 {
    let a = graph.atom(atom_index);
    Fnv1a32::new()
        .u32(u32::from(a.element))
        .u32(u32::from(a.degree))
        .u32(a.total_h())
        .i32(i32::from(a.charge))
        .u32(u32::from(a.in_ring))
        .u32(u32::from(a.aromatic))
        .finish()
}

/// One retained circular environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Environment {
    pub radius: u32,
    pub center: usize,
    pub id: u32,
}

type AtomSet = Vec<u64>;

fn singleton(n: usize, i: usize) -> AtomSet {
    let mut s = vec![0u64; n.div_ceil(64)];
    s[i / 64] |= 1 << (i % 64);
    s
}

/// Morgan iteration up to `radius`, returning the deduplicated environments
/// in emission order (radius by radius).
pub fn environments(graph: &MoleculeGraph, radius: u32) -> Result<Vec<Environment>> {
    let n = graph.atom_count();
    if n == 0 {
        return Err(Error::Data("cannot fingerprint an empty molecule".into()));
    }
    let mut ids: Vec<u32> = (0..n).map(|i| atom_invariant(graph, i)).collect();
    let mut sets: Vec<AtomSet> = (0..n).map(|i| singleton(n, i)).collect();
    let mut seen: HashSet<AtomSet> = sets.iter().cloned().collect();
    let mut out: Vec<Environment> = ids
        .iter()
        .enumerate()
        .map(|(center, &id)| Environment {
            radius: 0,
            center,
            id,
        })
        .collect();

    for r in 1..=radius {
        let mut next_ids = Vec::with_capacity(n);
        let mut next_sets = Vec::with_capacity(n);
        for i in 0..n {
            let mut nbrs: Vec<(u32, u32)> = graph
                .neighbors(i)
                .iter()
                .map(|&(j, b)| (graph.bonds()[b].order.code(), ids[j]))
                .collect();
            nbrs.sort_unstable();
            let mut h = Fnv1a32::new().u32(r).u32(ids[i]);
            let mut set = sets[i].clone();
            for &(code, id) in &nbrs {
                h = h.u32(code).u32(id);
            }
            for &(j, _) in graph.neighbors(i) {
                for (w, o) in set.iter_mut().zip(&sets[j]) {
                    *w |= o;
                }
            }
            next_ids.push(h.finish());
            next_sets.push(set);
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            next_sets[a]
                .cmp(&next_sets[b])
                .then(next_ids[a].cmp(&next_ids[b]))
        });
        let mut last: Option<&AtomSet> = None;
        for &i in &order {
            let set = &next_sets[i];
            if last == Some(set) {
                continue;
            }
            last = Some(set);
            if !seen.contains(set) {
                out.push(Environment {
                    radius: r,
                    center: i,
                    id: next_ids[i],
                });
            }
        }
        seen.extend(next_sets.iter().cloned());
        ids = next_ids;
        sets = next_sets;
    }
    Ok(out)
}

/// Distinct identifiers before folding.
pub fn environment_ids(graph: &MoleculeGraph, radius: u32) -> Result<BTreeSet<u32>> {
    Ok(environments(graph, radius)?
        .into_iter()
        .map(|e| e.id)
        .collect())
}

/// ECFP bit vector: each retained identifier sets bit `id mod nbits`.
/// ECFP4 is `radius = 2`.
pub fn ecfp(graph: &MoleculeGraph, radius: u32, nbits: usize) -> Result<Fingerprint> {
    if nbits < 64 || !nbits.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "nbits must be a power of two >= 64, got {nbits}"
        )));
    }
    let mut fp = Fingerprint::empty(nbits, radius);
    for id in environment_ids(graph, radius)? {
        fp.set(id as usize % nbits);
    }
    Ok(fp)
}

/// |a ∧ b| / |a ∨ b|, defined as 1 for two empty fingerprints.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64> {
    if a.nbits != b.nbits {
        return Err(Error::Shape(format!(
            "tanimoto of {}-bit and {}-bit fingerprints",
            a.nbits, b.nbits
        )));
    }
    let (and, or) = a
        .words
        .iter()
        .zip(&b.words)
        .fold((0u32, 0u32), |(and, or), (x, y)| {
            (and + (x & y).count_ones(), or + (x | y).count_ones())
        });
    if or == 0 {
        return Ok(1.0);
    }
    Ok(f64::from(and) / f64::from(or))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    fn fp(s: &str) -> Fingerprint {
        ecfp(&parse_smiles(s).unwrap(), 2, 2048).unwrap()
    }

    #[test]
    fn propane_invariants() {
        let g = parse_smiles("CCC").unwrap();
        assert_eq!(atom_invariant(&g, 0), atom_invariant(&g, 2));
        assert_ne!(atom_invariant(&g, 0), atom_invariant(&g, 1));
    }

    #[test]
    fn methane_single_environment() {
        let g = parse_smiles("C").unwrap();
        assert_eq!(environment_ids(&g, 2).unwrap().len(), 1);
        assert_eq!(fp("C").count_ones(), 1);
    }

    #[test]
    fn atom_order_invariance() {
        assert_eq!(fp("CCO"), fp("OCC"));
        assert_eq!(fp("c1ccccc1O"), fp("Oc1ccccc1"));
    }

    #[test]
    fn benzene_has_one_identifier_per_radius() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let envs = environments(&g, 2).unwrap();
        // six distinct atom sets per radius, all symmetric
        assert_eq!(envs.len(), 18);
        assert_eq!(environment_ids(&g, 2).unwrap().len(), 3);
        assert_eq!(fp("c1ccccc1").count_ones(), 3);
    }

    #[test]
    fn argument_checks() {
        let g = parse_smiles("CC").unwrap();
        assert!(ecfp(&g, 2, 100).is_err());
        assert!(ecfp(&g, 2, 32).is_err());
        assert!(ecfp(&MoleculeGraph::default(), 2, 64).is_err());
    }

    #[test]
    fn tanimoto_examples() {
        let a = Fingerprint::from_bits(64, 2, [1, 2, 3, 4]);
        let b = Fingerprint::from_bits(64, 2, [3, 4, 5]);
        assert!((tanimoto(&a, &b).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        let c = Fingerprint::from_bits(64, 2, [9]);
        assert_eq!(tanimoto(&a, &c).unwrap(), 0.0);
        let e = Fingerprint::empty(64, 2);
        assert_eq!(tanimoto(&e, &e).unwrap(), 1.0);
        assert!(tanimoto(&a, &Fingerprint::empty(128, 2)).is_err());
    }

    #[test]
    fn popcount_bounded_by_identifiers() {
        for s in [
            "CC(=O)Oc1ccccc1C(=O)O",
            "CN1C(=O)CN=C(c2ccccc2)c2cc(Cl)ccc21",
        ] {
            let g = parse_smiles(s).unwrap();
            let ids = environment_ids(&g, 2).unwrap();
            assert!(ecfp(&g, 2, 64).unwrap().count_ones() <= ids.len());
        }
    }

    #[test]
    fn dense_vector() {
        let f = Fingerprint::from_bits(64, 0, [0, 63]);
        let v: Vec<f32> = f.to_dense();
        assert_eq!(v.len(), 64);
        assert_eq!(v.iter().sum::<f32>(), 2.0);
        assert_eq!(f.ones().collect::<Vec<_>>(), vec![0, 63]);
    }
}
