//! Polymer SMILES handling.
//!
//! Repeat units mark their polymerization points with the wildcard atom `*`;
//! copolymer components are joined with `.`. The supported dialect covers
//! organic-subset atoms, bracket atoms with charge and hydrogen count,
//! bonds `- = # :`, branches, ring closures (`1`..`9` and `%nn`) and dots.
//! Stereo marks and isotopes are accepted and discarded.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

mod assemble;
mod canon;
pub(crate) mod elements;
mod fingerprint;
mod parse;
mod write;

pub use assemble::assemble_polymer;
pub use canon::{canonical_ranks, canonicalize};
pub use fingerprint::{fingerprint, Fingerprint, DEFAULT_N_BITS, DEFAULT_RADIUS};
pub use parse::{parse_smiles, parse_smiles_with, ParseOptions};
pub use write::write_smiles;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChemError {
    #[error("empty SMILES string")]
    Empty,
    #[error("unexpected character {ch:?} at position {pos}")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("unbalanced branch parenthesis at position {pos}")]
    UnbalancedBranch { pos: usize },
    #[error("ring closure {ring} was opened but never closed")]
    UnclosedRing { ring: u32 },
    #[error("unknown atom {symbol:?} at position {pos}")]
    UnknownAtom {
        pos: usize,
        symbol: alloc::string::String,
    },
    #[error("atom {atom} exceeds the allowed valence")]
    ValenceViolation { atom: usize },
    #[error("bond symbol at position {pos} is not followed by an atom")]
    DanglingBond { pos: usize },
    #[error("ring closure {ring} has conflicting bond orders")]
    ConflictingRingBond { ring: u32 },
    #[error("atom {atom} is bonded to itself")]
    SelfBond { atom: usize },
    #[error("atoms {a} and {b} are bonded twice")]
    DuplicateBond { a: usize, b: usize },
    #[error("wildcard atom {atom} must carry exactly one bond")]
    BadWildcard { atom: usize },
    #[error("fragment {fragment} has {found} wildcard attachment points, expected 2")]
    BadValence { fragment: usize, found: usize },
}

/// Bond multiplicity. Aromatic bonds are kept as a flag, never kekulized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence sum; an aromatic bond counts as 1 and the
    /// aromatic atom gets one extra unit (see implicit hydrogen rules).
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

/// A chemical element by atomic number; `0` is the polymerization wildcard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Element(pub u8);

impl Element {
    pub const WILDCARD: Element = Element(0);

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        if symbol == "*" {
            return Some(Element::WILDCARD);
        }
        elements::lookup(symbol).map(Element)
    }

    pub fn symbol(self) -> &'static str {
        elements::SYMBOLS[self.0 as usize]
    }

    pub fn is_wildcard(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    /// Total attached hydrogens, implicit or explicit.
    pub h_count: u8,
    pub aromatic: bool,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            charge: 0,
            h_count: 0,
            aromatic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Atoms and bonds of a (possibly multi-component) molecule.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    // (neighbor, bond index) per atom
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolecularGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(Vec::new());
        self.atoms.len() - 1
    }

    /// Adds a bond; rejects self-bonds and a second bond between one pair.
    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<usize, ChemError> {
        if a == b {
            return Err(ChemError::SelfBond { atom: a });
        }
        if self.bond_between(a, b).is_some() {
            return Err(ChemError::DuplicateBond {
                a: a.min(b),
                b: a.max(b),
            });
        }
        let idx = self.bonds.len();
        self.bonds.push(Bond { a, b, order });
        self.adjacency[a].push((b, idx));
        self.adjacency[b].push((a, idx));
        Ok(idx)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, idx: usize) -> &Atom {
        &self.atoms[idx]
    }

    pub(crate) fn atom_mut(&mut self, idx: usize) -> &mut Atom {
        &mut self.atoms[idx]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// `(neighbor, bond index)` pairs of `atom`.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|(n, _)| *n == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    /// Sum of bond valences at `atom`, plus one for aromatic atoms.
    pub fn bond_valence_sum(&self, atom: usize) -> u8 {
        let s: u8 = self.adjacency[atom]
            .iter()
            .map(|&(_, bi)| self.bonds[bi].order.valence())
            .sum();
        if self.atoms[atom].aromatic {
            s + 1
        } else {
            s
        }
    }

    /// Implicit hydrogen count an unbracketed atom would receive here, or
    /// `None` if the atom cannot be written outside brackets.
    pub(crate) fn implicit_hydrogens(&self, atom: usize) -> Option<u8> {
        let a = &self.atoms[atom];
        if a.element.is_wildcard() {
            return Some(0);
        }
        let valences = elements::organic_valences(a.element.0)?;
        let used = self.bond_valence_sum(atom);
        Some(
            valences
                .iter()
                .find(|&&v| v >= used)
                .map(|&v| v - used)
                .unwrap_or(0),
        )
    }

    /// Wildcard atom indices in ascending order.
    pub fn wildcards(&self) -> Vec<usize> {
        (0..self.atoms.len())
            .filter(|&i| self.atoms[i].element.is_wildcard())
            .collect()
    }

    /// Connected components as a per-atom component id, numbered in order of
    /// each component's lowest atom index.
    pub fn components(&self) -> Vec<usize> {
        let n = self.atoms.len();
        let mut comp = alloc::vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn component_count(&self) -> usize {
        self.components().iter().copied().max().map_or(0, |m| m + 1)
    }

    /// The same molecule with atom `i` moved to index `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MolecularGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut inv = alloc::vec![0usize; perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            inv[new] = old;
        }
        let mut g = MolecularGraph::new();
        for &old in &inv {
            g.add_atom(self.atoms[old]);
        }
        // Bond insertion order follows the new labels so the adjacency order
        // carries no trace of the original numbering.
        let mut bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| {
                let (x, y) = (perm[b.a], perm[b.b]);
                Bond {
                    a: x.min(y),
                    b: x.max(y),
                    order: b.order,
                }
            })
            .collect();
        bonds.sort_by_key(|b| (b.a, b.b));
        for b in bonds {
            g.add_bond(b.a, b.b, b.order)
                .expect("permutation preserves validity");
        }
        g
    }
}
