#![allow(dead_code)]

use std::path::PathBuf;

use chembridge::rng::shuffle;
use chembridge::smiles::{Atom, BondOrder};
use chembridge::{Matrix, MoleculeGraph, Xoshiro256StarStar};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn atom_text(a: &Atom) -> String {
    let sym = a.symbol();
    let sym = if a.aromatic {
        sym.to_lowercase()
    } else {
        sym.to_string()
    };
    if !a.bracket {
        return sym;
    }
    let mut s = String::from("[");
    if let Some(iso) = a.isotope {
        s.push_str(&iso.to_string());
    }
    s.push_str(&sym);
    match a.explicit_h {
        0 => {}
        1 => s.push('H'),
        h => s.push_str(&format!("H{h}")),
    }
    match a.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => s.push_str(&format!("+{c}")),
        c => s.push_str(&format!("-{}", -c)),
    }
    s.push(']');
    s
}

fn bond_text(g: &MoleculeGraph, order: BondOrder, a: usize, b: usize) -> &'static str {
    let both_aromatic = g.atom(a).aromatic && g.atom(b).aromatic;
    match order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

fn ring_label(n: usize) -> String {
    if n < 10 {
        n.to_string()
    } else {
        format!("%{n}")
    }
}

/// A valid SMILES for `g` with random root, random branch order and
/// ring-closure digits chosen on the fly. Only connected graphs.
pub fn random_smiles(g: &MoleculeGraph, rng: &mut Xoshiro256StarStar) -> String {
    let n = g.atom_count();
    let root = (rng.next_f64() * n as f64) as usize % n;

    // DFS tree with shuffled neighbour order
    let mut visited = vec![false; n];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut tree_bond = vec![false; g.bond_count()];
    let mut order = Vec::with_capacity(n);
    fn dfs(
        g: &MoleculeGraph,
        v: usize,
        rng: &mut Xoshiro256StarStar,
        visited: &mut [bool],
        children: &mut [Vec<(usize, usize)>],
        tree_bond: &mut [bool],
        order: &mut Vec<usize>,
    ) {
        visited[v] = true;
        order.push(v);
        let mut nbrs = g.neighbors(v).to_vec();
        shuffle(&mut nbrs, rng);
        for (w, b) in nbrs {
            if !visited[w] {
                tree_bond[b] = true;
                children[v].push((w, b));
                dfs(g, w, rng, visited, children, tree_bond, order);
            }
        }
    }
    dfs(
        g,
        root,
        rng,
        &mut visited,
        &mut children,
        &mut tree_bond,
        &mut order,
    );
    assert_eq!(order.len(), n, "random_smiles needs a connected graph");

    // ring closures open at the atom visited first
    let pos: Vec<usize> = {
        let mut p = vec![0; n];
        for (i, &v) in order.iter().enumerate() {
            p[v] = i;
        }
        p
    };
    let mut opens: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut closes: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (b, bond) in g.bonds().iter().enumerate() {
        if !tree_bond[b] {
            let (x, y) = bond.atoms;
            let (first, second) = if pos[x] < pos[y] { (x, y) } else { (y, x) };
            opens[first].push(b);
            closes[second].push(b);
        }
    }

    let mut out = String::new();
    let mut free: Vec<usize> = (1..100).rev().collect();
    let mut label = vec![0usize; g.bond_count()];
    #[allow(clippy::too_many_arguments)]
    fn emit(
        g: &MoleculeGraph,
        v: usize,
        out: &mut String,
        children: &[Vec<(usize, usize)>],
        opens: &[Vec<usize>],
        closes: &[Vec<usize>],
        free: &mut Vec<usize>,
        label: &mut [usize],
    ) {
        out.push_str(&atom_text(g.atom(v)));
        for &b in &closes[v] {
            out.push_str(&ring_label(label[b]));
            free.push(label[b]);
            free.sort_unstable_by(|a, b| b.cmp(a));
        }
        for &b in &opens[v] {
            let bond = &g.bonds()[b];
            let l = free.pop().expect("ring labels exhausted");
            label[b] = l;
            out.push_str(bond_text(g, bond.order, bond.atoms.0, bond.atoms.1));
            out.push_str(&ring_label(l));
        }
        let kids = &children[v];
        for (i, &(w, b)) in kids.iter().enumerate() {
            let last = i + 1 == kids.len();
            if !last {
                out.push('(');
            }
            out.push_str(bond_text(g, g.bonds()[b].order, v, w));
            emit(g, w, out, children, opens, closes, free, label);
            if !last {
                out.push(')');
            }
        }
    }
    emit(
        g, root, &mut out, &children, &opens, &closes, &mut free, &mut label,
    );
    out
}

/// Binary rows with independent bits.
pub fn binary_matrix(
    rng: &mut Xoshiro256StarStar,
    rows: usize,
    cols: usize,
    density: f64,
) -> Matrix<f32> {
    Matrix::from_fn(
        rows,
        cols,
        |_, _| if rng.next_f64() < density { 1.0 } else { 0.0 },
    )
}

pub fn gaussian_matrix(
    rng: &mut Xoshiro256StarStar,
    rows: usize,
    cols: usize,
    scale: f64,
) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.next_gaussian() * scale)
}

pub fn unit_rows(m: &Matrix<f64>) -> Matrix<f64> {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let r = out.row_mut(i);
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        r.iter_mut().for_each(|v| *v /= norm);
    }
    out
}

/// Position of `truth` after sorting candidates by score descending, then
/// index ascending.
pub fn brute_rank(scores: &[f64], candidates: &[usize], truth: usize) -> usize {
    let mut c = candidates.to_vec();
    c.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    1 + c.iter().position(|&j| j == truth).unwrap()
}

/// Query rows for one direction.
pub fn query_scores(s: &Matrix<f64>, q: usize, mol_to_text: bool) -> Vec<f64> {
    (0..s.cols())
        .map(|j| if mol_to_text { s[(j, q)] } else { s[(q, j)] })
        .collect()
}
