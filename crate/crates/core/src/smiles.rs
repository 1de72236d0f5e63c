//! SMILES reader producing a constitution-level molecular graph.
//!
//! Supported: organic-subset and bracket atoms (isotope, H count, charge,
//! atom class), branches, ring closures including `%nn`, explicit bond
//! symbols and dot-separated components. Stereo markers (`/`, `\`, `@`) are
//! consumed and dropped. Aromaticity is taken from lowercase input as given;
//! there is no kekulization and no SSSR. Ring membership means "lies on some
//! cycle", computed from bridge edges.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

const ELEMENTS: [&str; 119] = [
    "*", "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S",
    "Cl", "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge",
    "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd",
    "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn",
    "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
];

pub const HYDROGEN: u8 = 1;

/// Atomic number for an element symbol (`"Cl"` → 17).
pub fn element_number(symbol: &str) -> Option<u8> {
    ELEMENTS
        .iter()
        .skip(1)
        .position(|s| *s == symbol)
        .map(|p| p as u8 + 1)
}

pub fn element_symbol(number: u8) -> &'static str {
    ELEMENTS.get(number as usize).copied().unwrap_or("*")
}

/// Normal valences of the organic subset, lowest first.
fn default_valences(element: u8) -> Option<&'static [u8]> {
    Some(match element {
        5 => &[3],
        6 => &[4],
        7 => &[3, 5],
        8 => &[2],
        15 => &[3, 5],
        16 => &[2, 4, 6],
        9 | 17 | 35 | 53 => &[1],
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Stable code used in hashed invariants.
    pub fn code(self) -> u32 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    pub fn valence(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Aromatic => 1.5,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub element: u8,
    pub isotope: Option<u16>,
    pub charge: i8,
    pub explicit_h: u8,
    pub aromatic: bool,
    /// Written in brackets; bracket atoms never receive implicit hydrogens.
    pub bracket: bool,
    pub in_ring: bool,
    /// Number of heavy-atom neighbours.
    pub degree: u8,
    pub implicit_h: u8,
}

impl Atom {
    pub fn new(element: u8) -> Self {
        Self {
            element,
            isotope: None,
            charge: 0,
            explicit_h: 0,
            aromatic: false,
            bracket: false,
            in_ring: false,
            degree: 0,
            implicit_h: 0,
        }
    }

    pub fn total_h(&self) -> u32 {
        u32::from(self.explicit_h) + u32::from(self.implicit_h)
    }

    pub fn symbol(&self) -> &'static str {
        element_symbol(self.element)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bond {
    pub atoms: (usize, usize),
    pub order: BondOrder,
    pub in_ring: bool,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.atoms.0 == atom {
            self.atoms.1
        } else {
            self.atoms.0
        }
    }
}

/// Structural problems when assembling a graph from parts.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("bond {0} references atom {1} out of range")]
    AtomOutOfRange(usize, usize),
    #[error("bond {0} joins atom {1} to itself")]
    SelfLoop(usize, usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MoleculeGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// `(neighbour, bond index)` per atom.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MoleculeGraph {
    /// Assemble a graph, validating bonds and refreshing heavy degrees.
    /// Ring flags and hydrogen counts are taken as given.
    pub fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (k, b) in bonds.iter().enumerate() {
            let (a, c) = b.atoms;
            for x in [a, c] {
                if x >= atoms.len() {
                    return Err(GraphError::AtomOutOfRange(k, x));
                }
            }
            if a == c {
                return Err(GraphError::SelfLoop(k, a));
            }
            if adjacency[a].iter().any(|&(n, _)| n == c) {
                return Err(GraphError::DuplicateBond(a.min(c), a.max(c)));
            }
            adjacency[a].push((c, k));
            adjacency[c].push((a, k));
        }
        let mut g = Self {
            atoms,
            bonds,
            adjacency,
        };
        g.refresh_degrees();
        Ok(g)
    }

    fn refresh_degrees(&mut self) {
        for i in 0..self.atoms.len() {
            let heavy = self.adjacency[i]
                .iter()
                .filter(|&&(n, _)| self.atoms[n].element != HYDROGEN)
                .count();
            self.atoms[i].degree = heavy.min(u8::MAX as usize) as u8;
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Sum of bond valence contributions around an atom.
    pub fn bond_order_sum(&self, i: usize) -> f64 {
        self.adjacency[i]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.valence())
            .sum()
    }

    /// Connected components as sorted atom index lists, in order of lowest atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            label[start] = id;
            let mut head = 0;
            while head < members.len() {
                let v = members[head];
                head += 1;
                for &(w, _) in &self.adjacency[v] {
                    if label[w] == usize::MAX {
                        label[w] = id;
                        members.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// Subgraph on the atoms with `keep[i]`, indices renumbered in order.
    /// Atom properties other than degree are carried over unchanged.
    pub fn induced_subgraph(&self, keep: &[bool]) -> MoleculeGraph {
        let mut remap = vec![usize::MAX; self.atoms.len()];
        let mut atoms = Vec::new();
        for (i, a) in self.atoms.iter().enumerate() {
            if keep[i] {
                remap[i] = atoms.len();
                atoms.push(a.clone());
            }
        }
        let bonds = self
            .bonds
            .iter()
            .filter(|b| keep[b.atoms.0] && keep[b.atoms.1])
            .map(|b| Bond {
                atoms: (remap[b.atoms.0], remap[b.atoms.1]),
                order: b.order,
                in_ring: b.in_ring,
            })
            .collect();
        MoleculeGraph::from_parts(atoms, bonds).expect("subgraph of a valid graph is valid")
    }
}

/// Hydrogens implied by the default-valence rule.
///
/// Bracket atoms carry their own count and get `explicit_h` back unchanged.
/// Aromatic bonds contribute 1.5 and the sum is rounded down. Aliphatic
/// atoms take the lowest normal valence that accommodates the sum; aromatic
/// atoms use their first normal valence only. Over-valent atoms get 0.
pub fn implicit_hydrogens(atom: &Atom, bond_order_sum: f64) -> u8 {
    if atom.bracket {
        return atom.explicit_h;
    }
    let Some(valences) = default_valences(atom.element) else {
        return 0;
    };
    let used = bond_order_sum.floor().max(0.0) as i32;
    let candidates: &[u8] = if atom.aromatic {
        &valences[..1]
    } else {
        valences
    };
    candidates
        .iter()
        .map(|&v| i32::from(v))
        .find(|&v| v >= used)
        .map_or(0, |v| (v - used) as u8)
}

/// Mark atoms and bonds lying on a cycle.
///
/// A bond is in a ring iff it is not a bridge (cut edge); an atom is in a
/// ring iff one of its bonds is.
pub fn perceive_rings(mut graph: MoleculeGraph) -> MoleculeGraph {
    let n = graph.atoms.len();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; graph.bonds.len()];
    let mut timer = 0;

    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (vertex, bond used to enter it, next adjacency position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (v, via, ref mut pos)) = stack.last_mut() {
            if *pos < graph.adjacency[v].len() {
                let (w, b) = graph.adjacency[v][*pos];
                *pos += 1;
                if b == via {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, b, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > disc[parent] {
                        is_bridge[via] = true;
                    }
                }
            }
        }
    }

    for a in graph.atoms.iter_mut() {
        a.in_ring = false;
    }
    for (k, bond) in graph.bonds.iter_mut().enumerate() {
        bond.in_ring = !is_bridge[k];
        if bond.in_ring {
            graph.atoms[bond.atoms.0].in_ring = true;
            graph.atoms[bond.atoms.1].in_ring = true;
        }
    }
    graph
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmilesErrorKind {
    Empty,
    UnexpectedChar(char),
    UnexpectedEnd,
    UnbalancedParenthesis,
    UnmatchedRingClosure(u16),
    UnknownElement(String),
    BadCharge,
    BadBracketAtom,
    BondWithoutAtom,
    SelfLoop,
    DuplicateBond,
    ConflictingRingBond,
}

impl fmt::Display for SmilesErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "empty SMILES"),
            Self::UnexpectedChar(c) => write!(f, "unexpected character `{c}`"),
            Self::UnexpectedEnd => write!(f, "unexpected end of input"),
            Self::UnbalancedParenthesis => write!(f, "unbalanced parenthesis"),
            Self::UnmatchedRingClosure(r) => write!(f, "unmatched ring closure {r}"),
            Self::UnknownElement(s) => write!(f, "unknown element `{s}`"),
            Self::BadCharge => write!(f, "malformed charge"),
            Self::BadBracketAtom => write!(f, "malformed bracket atom"),
            Self::BondWithoutAtom => write!(f, "bond symbol without a preceding atom"),
            Self::SelfLoop => write!(f, "ring closure bonds an atom to itself"),
            Self::DuplicateBond => write!(f, "duplicate bond between the same atoms"),
            Self::ConflictingRingBond => write!(f, "ring closure bond orders disagree"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {offset}: {kind}")]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

impl SmilesError {
    fn new(offset: usize, kind: SmilesErrorKind) -> Self {
        Self { offset, kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Keep only the largest dot-separated component (salt stripping).
    pub keep_largest_component: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            keep_largest_component: true,
        }
    }
}

/// Parse with default options: largest component kept, rings perceived,
/// implicit hydrogens assigned.
pub fn parse_smiles(text: &str) -> Result<MoleculeGraph, SmilesError> {
    parse_smiles_with(text, ParseOptions::default())
}

pub fn parse_smiles_with(text: &str, opts: ParseOptions) -> Result<MoleculeGraph, SmilesError> {
    let raw = Parser::new(text).run()?;
    let graph = finish(raw, opts);
    Ok(graph)
}

/// Raw parse output before hydrogen folding and component selection.
#[derive(Debug, Default)]
struct RawParse {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
}

struct RingOpen {
    atom: usize,
    order: Option<BondOrder>,
    offset: usize,
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    out: RawParse,
    neighbors: Vec<Vec<usize>>,
    prev: Option<usize>,
    pending: Option<(BondOrder, usize)>,
    branches: Vec<(usize, usize)>,
    rings: HashMap<u16, RingOpen>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            text,
            bytes: text.as_bytes(),
            pos: 0,
            out: RawParse::default(),
            neighbors: Vec::new(),
            prev: None,
            pending: None,
            branches: Vec::new(),
            rings: HashMap::new(),
        }
    }

    fn err(&self, kind: SmilesErrorKind) -> SmilesError {
        SmilesError::new(self.pos, kind)
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn run(mut self) -> Result<RawParse, SmilesError> {
        if self.text.trim().is_empty() {
            return Err(SmilesError::new(0, SmilesErrorKind::Empty));
        }
        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    let Some(prev) = self.prev else {
                        return Err(self.err(SmilesErrorKind::UnbalancedParenthesis));
                    };
                    if self.pending.is_some() {
                        return Err(self.err(SmilesErrorKind::UnexpectedChar('(')));
                    }
                    self.branches.push((prev, self.pos));
                    self.pos += 1;
                }
                b')' => {
                    if self.pending.is_some() {
                        return Err(self.err(SmilesErrorKind::BondWithoutAtom));
                    }
                    let Some((atom, _)) = self.branches.pop() else {
                        return Err(self.err(SmilesErrorKind::UnbalancedParenthesis));
                    };
                    self.prev = Some(atom);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(self.err(SmilesErrorKind::BondWithoutAtom));
                    }
                    self.pending = Some((order, self.pos));
                    self.pos += 1;
                }
                b'.' => {
                    if self.pending.is_some() {
                        return Err(self.err(SmilesErrorKind::BondWithoutAtom));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom)?;
                }
                b'*' => {
                    return Err(self.err(SmilesErrorKind::UnknownElement("*".into())));
                }
                _ if c.is_ascii_alphabetic() => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom)?;
                }
                _ => {
                    let ch = self.text[self.pos..].chars().next().unwrap_or('?');
                    return Err(self.err(SmilesErrorKind::UnexpectedChar(ch)));
                }
            }
        }
        if let Some((_, at)) = self.pending {
            return Err(SmilesError::new(at, SmilesErrorKind::BondWithoutAtom));
        }
        if let Some(&(_, at)) = self.branches.first() {
            return Err(SmilesError::new(at, SmilesErrorKind::UnbalancedParenthesis));
        }
        if let Some((&num, open)) = self.rings.iter().min_by_key(|(_, o)| o.offset) {
            return Err(SmilesError::new(
                open.offset,
                SmilesErrorKind::UnmatchedRingClosure(num),
            ));
        }
        Ok(self.out)
    }

    fn add_bond(
        &mut self,
        a: usize,
        b: usize,
        order: BondOrder,
        at: usize,
    ) -> Result<(), SmilesError> {
        if a == b {
            return Err(SmilesError::new(at, SmilesErrorKind::SelfLoop));
        }
        if self.neighbors[a].contains(&b) {
            return Err(SmilesError::new(at, SmilesErrorKind::DuplicateBond));
        }
        self.neighbors[a].push(b);
        self.neighbors[b].push(a);
        self.out.bonds.push(Bond {
            atoms: (a, b),
            order,
            in_ring: false,
        });
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.out.atoms[a].aromatic && self.out.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_atom(&mut self, atom: Atom) -> Result<(), SmilesError> {
        let idx = self.out.atoms.len();
        self.out.atoms.push(atom);
        self.neighbors.push(Vec::new());
        if let Some(prev) = self.prev {
            let (order, at) = match self.pending.take() {
                Some((o, at)) => (o, at),
                None => (self.default_order(prev, idx), self.pos),
            };
            self.add_bond(prev, idx, order, at)?;
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let rest = &self.text[start..];
        let (symbol, aromatic, len) = if rest.starts_with("Cl") {
            ("Cl", false, 2)
        } else if rest.starts_with("Br") {
            ("Br", false, 2)
        } else {
            match self.bytes[start] {
                b'B' => ("B", false, 1),
                b'C' => ("C", false, 1),
                b'N' => ("N", false, 1),
                b'O' => ("O", false, 1),
                b'P' => ("P", false, 1),
                b'S' => ("S", false, 1),
                b'F' => ("F", false, 1),
                b'I' => ("I", false, 1),
                b'b' => ("B", true, 1),
                b'c' => ("C", true, 1),
                b'n' => ("N", true, 1),
                b'o' => ("O", true, 1),
                b'p' => ("P", true, 1),
                b's' => ("S", true, 1),
                other => {
                    return Err(
                        self.err(SmilesErrorKind::UnknownElement((other as char).to_string()))
                    )
                }
            }
        };
        self.pos += len;
        let mut atom = Atom::new(element_number(symbol).expect("organic subset symbol"));
        atom.aromatic = aromatic;
        Ok(atom)
    }

    fn digits(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        self.text[start..self.pos].parse().ok()
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        self.pos += 1;
        let isotope = match self.digits() {
            Some(v) if v <= u32::from(u16::MAX) => Some(v as u16),
            Some(_) => return Err(self.err(SmilesErrorKind::BadBracketAtom)),
            None => None,
        };

        let sym_start = self.pos;
        let (element, aromatic) = self.bracket_symbol()?;
        if element == 0 {
            return Err(SmilesError::new(
                sym_start,
                SmilesErrorKind::UnknownElement(self.text[sym_start..self.pos].to_string()),
            ));
        }

        // chirality: @, @@, @TH1, @SP2, @OH12 ...
        if self.peek() == Some(b'@') {
            while self.peek() == Some(b'@') {
                self.pos += 1;
            }
            let rest = &self.text[self.pos..];
            if ["TH", "AL", "SP", "TB", "OH"]
                .iter()
                .any(|c| rest.starts_with(c))
            {
                self.pos += 2;
                if self.digits().is_none() {
                    return Err(self.err(SmilesErrorKind::BadBracketAtom));
                }
            }
        }

        let mut explicit_h = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            explicit_h = match self.digits() {
                Some(v) if v <= 16 => v as u8,
                Some(_) => return Err(self.err(SmilesErrorKind::BadBracketAtom)),
                None => 1,
            };
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(v) = self.digits() {
                charge = unit * v as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
            if matches!(self.peek(), Some(b'+' | b'-')) || charge.abs() > 15 {
                return Err(self.err(SmilesErrorKind::BadCharge));
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.digits().is_none() {
                return Err(self.err(SmilesErrorKind::BadBracketAtom));
            }
        }

        match self.peek() {
            Some(b']') => self.pos += 1,
            None => return Err(SmilesError::new(open, SmilesErrorKind::UnexpectedEnd)),
            Some(b'+' | b'-') => return Err(self.err(SmilesErrorKind::BadCharge)),
            Some(_) => return Err(self.err(SmilesErrorKind::BadBracketAtom)),
        }

        let mut atom = Atom::new(element);
        atom.isotope = isotope;
        atom.charge = charge as i8;
        atom.explicit_h = explicit_h;
        atom.aromatic = aromatic;
        atom.bracket = true;
        Ok(atom)
    }

    /// Element symbol inside brackets; returns element 0 for unknown symbols.
    fn bracket_symbol(&mut self) -> Result<(u8, bool), SmilesError> {
        let rest = &self.text[self.pos..];
        for (sym, elem) in [("se", 34u8), ("as", 33), ("te", 52)] {
            if rest.starts_with(sym) {
                self.pos += 2;
                return Ok((elem, true));
            }
        }
        let Some(first) = self.peek() else {
            return Err(self.err(SmilesErrorKind::UnexpectedEnd));
        };
        if first.is_ascii_lowercase() {
            self.pos += 1;
            let upper = (first as char).to_ascii_uppercase().to_string();
            return match upper.as_str() {
                "B" | "C" | "N" | "O" | "P" | "S" => Ok((element_number(&upper).unwrap(), true)),
                _ => Ok((0, true)),
            };
        }
        if !first.is_ascii_uppercase() {
            return Err(self.err(SmilesErrorKind::BadBracketAtom));
        }
        if let Some(second) = self
            .bytes
            .get(self.pos + 1)
            .filter(|c| c.is_ascii_lowercase())
        {
            let two = format!("{}{}", first as char, *second as char);
            if let Some(e) = element_number(&two) {
                self.pos += 2;
                return Ok((e, false));
            }
        }
        self.pos += 1;
        Ok((
            element_number(&(first as char).to_string()).unwrap_or(0),
            false,
        ))
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let at = self.pos;
        let num: u16 = if self.peek() == Some(b'%') {
            self.pos += 1;
            let a = self.peek().filter(u8::is_ascii_digit);
            let b = self
                .bytes
                .get(self.pos + 1)
                .copied()
                .filter(u8::is_ascii_digit);
            match (a, b) {
                (Some(a), Some(b)) => {
                    self.pos += 2;
                    u16::from(a - b'0') * 10 + u16::from(b - b'0')
                }
                _ => return Err(self.err(SmilesErrorKind::UnexpectedChar('%'))),
            }
        } else {
            let d = u16::from(self.bytes[self.pos] - b'0');
            self.pos += 1;
            d
        };
        let Some(here) = self.prev else {
            return Err(SmilesError::new(
                at,
                SmilesErrorKind::UnmatchedRingClosure(num),
            ));
        };
        let pending = self.pending.take().map(|(o, _)| o);
        match self.rings.remove(&num) {
            Some(open) => {
                let order = match (open.order, pending) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(SmilesError::new(at, SmilesErrorKind::ConflictingRingBond))
                    }
                    (Some(a), _) | (None, Some(a)) => a,
                    (None, None) => self.default_order(open.atom, here),
                };
                self.add_bond(open.atom, here, order, at)
            }
            None => {
                self.rings.insert(
                    num,
                    RingOpen {
                        atom: here,
                        order: pending,
                        offset: at,
                    },
                );
                Ok(())
            }
        }
    }
}

/// Fold explicit hydrogens into their heavy neighbour, pick the component,
/// assign implicit hydrogens and perceive rings.
fn finish(raw: RawParse, opts: ParseOptions) -> MoleculeGraph {
    let RawParse { mut atoms, bonds } = raw;
    let n = atoms.len();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for b in &bonds {
        nbrs[b.atoms.0].push(b.atoms.1);
        nbrs[b.atoms.1].push(b.atoms.0);
    }

    // [H] atoms hanging off exactly one heavy atom become hydrogen counts.
    let mut keep = vec![true; n];
    for i in 0..n {
        let a = &atoms[i];
        if a.element == HYDROGEN && a.charge == 0 && a.isotope.is_none() && a.explicit_h == 0 {
            if let [heavy] = nbrs[i][..] {
                if atoms[heavy].element != HYDROGEN {
                    keep[i] = false;
                    if atoms[heavy].bracket {
                        atoms[heavy].explicit_h = atoms[heavy].explicit_h.saturating_add(1);
                    }
                }
            }
        }
    }

    let full = MoleculeGraph::from_parts(atoms, bonds).expect("parser emits valid bonds");
    let mut graph = full.induced_subgraph(&keep);

    for i in 0..graph.atoms.len() {
        // bracket hydrogens already live in explicit_h
        if !graph.atoms[i].bracket {
            let sum = graph.bond_order_sum(i);
            graph.atoms[i].implicit_h = implicit_hydrogens(&graph.atoms[i], sum);
        }
    }

    if opts.keep_largest_component {
        let comps = graph.components();
        if comps.len() > 1 {
            let key = |c: &Vec<usize>| {
                let heavy = c
                    .iter()
                    .filter(|&&i| graph.atoms[i].element != HYDROGEN)
                    .count();
                let mut elems: Vec<u8> = c.iter().map(|&i| graph.atoms[i].element).collect();
                elems.sort_unstable();
                (heavy, elems)
            };
            let mut best = 0;
            let mut best_key = key(&comps[0]);
            for (ci, c) in comps.iter().enumerate().skip(1) {
                let k = key(c);
                // more heavy atoms wins; ties go to the smaller element multiset
                if k.0 > best_key.0 || (k.0 == best_key.0 && k.1 < best_key.1) {
                    best = ci;
                    best_key = k;
                }
            }
            let mut mask = vec![false; graph.atoms.len()];
            for &i in &comps[best] {
                mask[i] = true;
            }
            graph = graph.induced_subgraph(&mask);
        }
    }

    perceive_rings(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> MoleculeGraph {
        parse_smiles(s).unwrap_or_else(|e| panic!("{s}: {e}"))
    }

    fn err(s: &str) -> SmilesError {
        parse_smiles(s).expect_err(s)
    }

    #[test]
    fn ethanol() {
        let g = p("CCO");
        let elems: Vec<u8> = g.atoms().iter().map(|a| a.element).collect();
        assert_eq!(elems, vec![6, 6, 8]);
        assert_eq!(g.bond_count(), 2);
        assert!(g.bonds().iter().all(|b| b.order == BondOrder::Single));
        let h: Vec<u8> = g.atoms().iter().map(|a| a.implicit_h).collect();
        assert_eq!(h, vec![3, 2, 1]);
        assert!(g.atoms().iter().all(|a| !a.in_ring));
    }

    #[test]
    fn benzene() {
        let g = p("c1ccccc1");
        assert_eq!(g.atom_count(), 6);
        assert_eq!(g.bond_count(), 6);
        assert!(g
            .atoms()
            .iter()
            .all(|a| a.aromatic && a.in_ring && a.implicit_h == 1));
        assert!(g
            .bonds()
            .iter()
            .all(|b| b.order == BondOrder::Aromatic && b.in_ring));
    }

    #[test]
    fn ammonium() {
        let g = p("[NH4+]");
        let a = g.atom(0);
        assert_eq!(
            (a.element, a.charge, a.explicit_h, a.implicit_h),
            (7, 1, 4, 0)
        );
    }

    #[test]
    fn implicit_h_rule() {
        let c = Atom::new(6);
        assert_eq!(implicit_hydrogens(&c, 2.0), 2);
        assert_eq!(implicit_hydrogens(&Atom::new(8), 1.0), 1);
        let mut ar = Atom::new(6);
        ar.aromatic = true;
        assert_eq!(implicit_hydrogens(&ar, 3.0), 1);
        assert_eq!(implicit_hydrogens(&ar, 4.5), 0);
        assert_eq!(implicit_hydrogens(&c, 5.0), 0);
        let mut br = Atom::new(7);
        br.bracket = true;
        br.explicit_h = 2;
        assert_eq!(implicit_hydrogens(&br, 1.0), 2);
        // sulfone sulfur reaches valence 6
        assert_eq!(p("CS(=O)(=O)C").atom(1).implicit_h, 0);
        // aromatic sulfur in thiophene carries no hydrogen
        assert_eq!(p("c1ccsc1").atom(3).implicit_h, 0);
    }

    #[test]
    fn side_chain_ring_flags() {
        let g = p("CCc1ccccc1");
        assert_eq!(g.atoms().iter().filter(|a| a.in_ring).count(), 6);
        assert!(!g.atom(0).in_ring && !g.atom(1).in_ring);
        // bridge between two rings is not a ring bond
        let g = p("c1ccccc1-c1ccccc1");
        assert_eq!(g.bonds().iter().filter(|b| !b.in_ring).count(), 1);
        assert!(g.atoms().iter().all(|a| a.in_ring));
    }

    #[test]
    fn branches_and_bond_symbols() {
        let g = p("CC(=O)O");
        assert_eq!(g.atom_count(), 4);
        assert_eq!(g.bonds()[1].order, BondOrder::Double);
        assert_eq!(g.atom(1).degree, 3);
        assert_eq!(g.atom(1).implicit_h, 0);
        assert_eq!(g.atom(2).implicit_h, 0);
        let g = p("C#N");
        assert_eq!(g.bonds()[0].order, BondOrder::Triple);
        assert_eq!(g.atom(0).implicit_h, 1);
    }

    #[test]
    fn ring_closure_forms() {
        let a = p("C1CC1");
        assert_eq!(a.bond_count(), 3);
        let b = p("C%12CC%12");
        assert_eq!(b, a);
        let c = p("C=1CC1");
        assert_eq!(c.bonds().last().unwrap().order, BondOrder::Double);
        // ring digits reused after closing
        let d = p("C1CC1C1CC1");
        assert_eq!(d.bond_count(), 7);
    }

    #[test]
    fn bracket_forms() {
        let g = p("[13CH3][O-]");
        assert_eq!(g.atom(0).isotope, Some(13));
        assert_eq!(g.atom(0).total_h(), 3);
        assert_eq!(g.atom(1).charge, -1);
        assert_eq!(g.atom(1).implicit_h, 0);
        let g = p("[Fe++]");
        assert_eq!(g.atom(0).charge, 2);
        let g = p("[Cu+2]");
        assert_eq!(g.atom(0).charge, 2);
        let g = p("C[C@@H](O)[C@H](N)C(=O)[O-:3]");
        assert_eq!(g.atom(1).explicit_h, 1);
        let g = p("c1cc[nH]c1");
        assert_eq!(g.atom(3).explicit_h, 1);
        assert!(g.atom(3).aromatic);
        let g = p("[se]1cccc1");
        assert_eq!(g.atom(0).element, 34);
    }

    #[test]
    fn stereo_markers_ignored() {
        let a = p("C/C=C/C");
        let b = p("CC=CC");
        assert_eq!(a, b);
        let a = p("N[C@@H](C)C(=O)O");
        let b = p("N[CH](C)C(=O)O");
        assert_eq!(a, b);
    }

    #[test]
    fn explicit_hydrogen_atoms_are_folded() {
        let a = p("[H]C([H])([H])O");
        assert_eq!(a.atom_count(), 2);
        assert_eq!(a.atom(0).total_h(), 3);
        let b = p("[H][NH2]");
        assert_eq!(b.atom_count(), 1);
        assert_eq!(b.atom(0).total_h(), 3);
    }

    #[test]
    fn salts_keep_largest_component() {
        let g = p("CCCC(CCC)C(=O)[O-].[Na+]");
        assert_eq!(g.atom_count(), 10);
        let g = p("Cl.CN(C)C(=N)N=C(N)N");
        assert_eq!(g.atom_count(), 9);
        // equal heavy-atom counts: smaller element multiset wins (C before O)
        let g = p("O.C");
        assert_eq!(g.atom(0).element, 6);
        let all = parse_smiles_with(
            "CCO.[Na+]",
            ParseOptions {
                keep_largest_component: false,
            },
        )
        .unwrap();
        assert_eq!(all.atom_count(), 4);
        assert_eq!(all.components().len(), 2);
    }

    #[test]
    fn error_offsets() {
        assert_eq!(err("").kind, SmilesErrorKind::Empty);
        let e = err("CC(C");
        assert_eq!(
            (e.offset, e.kind),
            (2, SmilesErrorKind::UnbalancedParenthesis)
        );
        let e = err("CC)C");
        assert_eq!(
            (e.offset, e.kind),
            (2, SmilesErrorKind::UnbalancedParenthesis)
        );
        let e = err("C1CC");
        assert_eq!(
            (e.offset, e.kind),
            (1, SmilesErrorKind::UnmatchedRingClosure(1))
        );
        let e = err("CXC");
        assert_eq!(e.offset, 1);
        assert!(matches!(e.kind, SmilesErrorKind::UnknownElement(_)));
        let e = err("C[Xx]");
        assert_eq!(
            (e.offset, e.kind),
            (2, SmilesErrorKind::UnknownElement("X".into()))
        );
        let e = err("[N+-]");
        assert_eq!(e.kind, SmilesErrorKind::BadCharge);
        assert_eq!(err("C11").kind, SmilesErrorKind::SelfLoop);
        assert_eq!(err("C12CC12").kind, SmilesErrorKind::DuplicateBond);
        assert_eq!(err("C=1CC#1").kind, SmilesErrorKind::ConflictingRingBond);
        assert_eq!(err("=C").kind, SmilesErrorKind::BondWithoutAtom);
        assert_eq!(err("CC=").kind, SmilesErrorKind::BondWithoutAtom);
        assert_eq!(err("[CH3").kind, SmilesErrorKind::UnexpectedEnd);
        assert!(matches!(
            err("C C").kind,
            SmilesErrorKind::UnexpectedChar(' ')
        ));
    }

    #[test]
    fn bond_count_identity() {
        for s in ["CCO", "c1ccccc1", "C1CC2CCC1C2", "CC(C)(C)C", "C1CC1C2CC2"] {
            let g = p(s);
            let digits_pairs = s.chars().filter(|c| c.is_ascii_digit()).count() / 2;
            assert_eq!(
                g.bond_count(),
                g.atom_count() - g.components().len() + digits_pairs,
                "{s}"
            );
        }
    }

    #[test]
    fn from_parts_validation() {
        let atoms = vec![Atom::new(6), Atom::new(6)];
        let bond = |a, b| Bond {
            atoms: (a, b),
            order: BondOrder::Single,
            in_ring: false,
        };
        assert!(MoleculeGraph::from_parts(atoms.clone(), vec![bond(0, 1)]).is_ok());
        assert_eq!(
            MoleculeGraph::from_parts(atoms.clone(), vec![bond(0, 1), bond(1, 0)]),
            Err(GraphError::DuplicateBond(0, 1))
        );
        assert_eq!(
            MoleculeGraph::from_parts(atoms.clone(), vec![bond(0, 0)]),
            Err(GraphError::SelfLoop(0, 0))
        );
        assert_eq!(
            MoleculeGraph::from_parts(atoms, vec![bond(0, 2)]),
            Err(GraphError::AtomOutOfRange(0, 2))
        );
    }
}
