//! Bemis-Murcko scaffolds, scaffold keys and scaffold-disjoint splits.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::Fnv1a64;
use crate::rng::{shuffle, Xoshiro256StarStar};
use crate::smiles::MoleculeGraph;

/// Ring systems plus linkers: repeatedly strip acyclic atoms with at most
/// one neighbour. Exocyclic multiply-bonded atoms go too. Acyclic input
/// yields the empty graph.
pub fn murcko_scaffold(graph: &MoleculeGraph) -> MoleculeGraph {
    let n = graph.atom_count();
    let mut keep = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| graph.neighbors(i).len()).collect();
    let mut queue: Vec<usize> = (0..n)
        .filter(|&i| !graph.atom(i).in_ring && degree[i] <= 1)
        .collect();
    while let Some(v) = queue.pop() {
        if !keep[v] {
            continue;
        }
        keep[v] = false;
        for &(w, _) in graph.neighbors(v) {
            if keep[w] {
                degree[w] -= 1;
                if !graph.atom(w).in_ring && degree[w] <= 1 {
                    queue.push(w);
                }
            }
        }
    }
    graph.induced_subgraph(&keep)
}

/// Grouping key for a scaffold graph. All acyclic molecules share
/// [`ScaffoldKey::EMPTY`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScaffoldKey {
    pub empty: bool,
    pub hash: u64,
}

impl ScaffoldKey {
    pub const EMPTY: ScaffoldKey = ScaffoldKey {
        empty: true,
        hash: 0,
    };

    pub fn is_empty(&self) -> bool {
        self.empty
    }
}

impl fmt::Display for ScaffoldKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.empty {
            f.write_str("empty")
        } else {
            write!(f, "{:016x}", self.hash)
        }
    }
}

impl FromStr for ScaffoldKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "empty" {
            return Ok(Self::EMPTY);
        }
        u64::from_str_radix(s, 16)
            .map(|hash| ScaffoldKey { empty: false, hash })
            .map_err(|_| Error::Data(format!("bad scaffold key `{s}`")))
    }
}

/// Key of a whole molecule: the key of its Murcko scaffold.
pub fn molecule_scaffold_key(graph: &MoleculeGraph) -> ScaffoldKey {
    scaffold_key(&murcko_scaffold(graph))
}

/// Weisfeiler-Lehman key: labels start from (element, ring, aromatic,
/// degree), go through `2·|atoms|` rounds of neighbour-multiset hashing, and
/// the key hashes the sorted label multiset plus sorted labelled edges.
///
/// Isomorphic graphs always share a key; distinct keys imply distinct graphs.
pub fn scaffold_key(graph: &MoleculeGraph) -> ScaffoldKey {
    let n = graph.atom_count();
    if n == 0 {
        return ScaffoldKey::EMPTY;
    }
    let mut labels: Vec<u64> = graph
        .atoms()
        .iter()
        .map(|a| {
            Fnv1a64::new()
                .u64(u64::from(a.element))
                .u64(u64::from(a.in_ring))
                .u64(u64::from(a.aromatic))
                .u64(u64::from(a.degree))
                .finish()
        })
        .collect();

    let mut nbrs: Vec<(u64, u64)> = Vec::new();
    for _ in 0..2 * n {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                nbrs.clear();
                nbrs.extend(
                    graph
                        .neighbors(i)
                        .iter()
                        .map(|&(j, b)| (u64::from(graph.bonds()[b].order.code()), labels[j])),
                );
                nbrs.sort_unstable();
                nbrs.iter()
                    .fold(Fnv1a64::new().u64(labels[i]), |h, &(c, l)| h.u64(c).u64(l))
                    .finish()
            })
            .collect();
        labels = next;
    }

    let mut sorted = labels.clone();
    sorted.sort_unstable();
    let mut edges: Vec<(u64, u64, u64)> = graph
        .bonds()
        .iter()
        .map(|b| {
            let (x, y) = (labels[b.atoms.0], labels[b.atoms.1]);
            (x.min(y), x.max(y), u64::from(b.order.code()))
        })
        .collect();
    edges.sort_unstable();

    let mut h = Fnv1a64::new().u64(n as u64);
    for l in sorted {
        h = h.u64(l);
    }
    h = h.u64(edges.len() as u64);
    for (a, b, c) in edges {
        h = h.u64(a).u64(b).u64(c);
    }
    ScaffoldKey {
        empty: false,
        hash: h.finish(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

impl SplitAssignment {
    pub fn len(&self) -> usize {
        self.train_indices.len() + self.test_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_fraction(test_fraction: f64) -> Result<()> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    Ok(())
}

/// Scaffold-disjoint split.
///
/// Groups are ordered by size (descending) then key, with equal-size runs
/// shuffled by `seed`. Walking that order, a group joins the test side when
/// it fits within `test_fraction·N`; otherwise it stays in train. If nothing
/// fits, the smallest group becomes the test set. Acyclic molecules (empty
/// key) always train.
pub fn scaffold_split(
    keys: &[ScaffoldKey],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitAssignment> {
    check_fraction(test_fraction)?;
    let mut groups: BTreeMap<ScaffoldKey, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(*k).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(Error::Split(format!(
            "{} records share a single scaffold key; nothing to split",
            keys.len()
        )));
    }

    let mut train: Vec<usize> = groups.remove(&ScaffoldKey::EMPTY).unwrap_or_default();
    let mut ordered: Vec<(ScaffoldKey, Vec<usize>)> = groups.into_iter().collect();
    ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));

    let mut rng = Xoshiro256StarStar::from_seed_u64(seed);
    let mut start = 0;
    while start < ordered.len() {
        let size = ordered[start].1.len();
        let end = start
            + ordered[start..]
                .iter()
                .take_while(|g| g.1.len() == size)
                .count();
        shuffle(&mut ordered[start..end], &mut rng);
        start = end;
    }

    let target = test_fraction * keys.len() as f64;
    let mut test: Vec<usize> = Vec::new();
    let mut taken = vec![false; ordered.len()];
    for (gi, (_, members)) in ordered.iter().enumerate() {
        if (test.len() + members.len()) as f64 <= target {
            test.extend(members);
            taken[gi] = true;
        }
    }
    if test.is_empty() {
        // the walk order ends with the smallest groups
        let last = ordered.len() - 1;
        test.extend(&ordered[last].1);
        taken[last] = true;
    }
    for (gi, (_, members)) in ordered.iter().enumerate() {
        if !taken[gi] {
            train.extend(members);
        }
    }
    if train.is_empty() {
        return Err(Error::Split("every group landed in the test set".into()));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitAssignment {
        train_indices: train,
        test_indices: test,
        seed,
        test_fraction,
    })
}

/// Seeded uniform split of `n` records, `round(test_fraction·n)` to test
/// (at least one on each side).
pub fn random_split(n: usize, test_fraction: f64, seed: u64) -> Result<SplitAssignment> {
    check_fraction(test_fraction)?;
    if n < 2 {
        return Err(Error::Split(format!("cannot split {n} records")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, &mut Xoshiro256StarStar::from_seed_u64(seed));
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(SplitAssignment {
        train_indices: train,
        test_indices: test,
        seed,
        test_fraction,
    })
}

/// True when no key occurs on both sides of the split.
pub fn is_scaffold_disjoint(keys: &[ScaffoldKey], split: &SplitAssignment) -> bool {
    let train: std::collections::HashSet<_> =
        split.train_indices.iter().map(|&i| keys[i]).collect();
    split
        .test_indices
        .iter()
        .all(|&i| !train.contains(&keys[i]))
}
