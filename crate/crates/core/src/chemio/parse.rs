use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::elements;
use super::{Atom, BondOrder, ChemError, Element, MolecularGraph};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject atoms whose bonds plus hydrogens exceed the element's
    /// maximum valence.
    pub strict_valence: bool,
}

/// Parses a SMILES string with default (lenient valence) options.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, ChemError> {
    parse_smiles_with(text, ParseOptions::default())
}

pub fn parse_smiles_with(text: &str, opts: ParseOptions) -> Result<MolecularGraph, ChemError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ChemError::Empty);
    }
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        graph: MolecularGraph::new(),
        bracketed: Vec::new(),
        prev: None,
        pending: None,
        branches: Vec::new(),
        rings: BTreeMap::new(),
    };
    p.run()?;
    let Parser {
        graph: mut g,
        bracketed,
        ..
    } = p;

    for i in 0..g.atom_count() {
        if g.atom(i).element.is_wildcard() && g.degree(i) != 1 {
            return Err(ChemError::BadWildcard { atom: i });
        }
        if !bracketed[i] {
            let h = g.implicit_hydrogens(i).unwrap_or(0);
            g.atom_mut(i).h_count = h;
        }
    }
    if opts.strict_valence {
        check_valence(&g)?;
    }
    Ok(g)
}

fn check_valence(g: &MolecularGraph) -> Result<(), ChemError> {
    for i in 0..g.atom_count() {
        let a = g.atom(i);
        let Some(max) = elements::max_valence(a.element.0) else {
            continue;
        };
        let used = g.bond_valence_sum(i) as i32 + a.h_count as i32;
        let allowed = max as i32 + (a.charge as i32).abs();
        if used > allowed {
            return Err(ChemError::ValenceViolation { atom: i });
        }
    }
    Ok(())
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    graph: MolecularGraph,
    bracketed: Vec<bool>,
    prev: Option<usize>,
    // bond symbol and its position
    pending: Option<(BondOrder, usize)>,
    // previous atom at each open '(' and its position
    branches: Vec<(Option<usize>, usize)>,
    rings: BTreeMap<u32, (usize, Option<BondOrder>)>,
}

impl Parser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn run(&mut self) -> Result<(), ChemError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                '(' => {
                    if self.prev.is_none() {
                        return Err(ChemError::UnbalancedBranch { pos: start });
                    }
                    if self.pending.is_some() {
                        return Err(ChemError::DanglingBond { pos: start });
                    }
                    self.branches.push((self.prev, start));
                    self.pos += 1;
                }
                ')' => {
                    let Some((atom, _)) = self.branches.pop() else {
                        return Err(ChemError::UnbalancedBranch { pos: start });
                    };
                    if let Some((_, p)) = self.pending {
                        return Err(ChemError::DanglingBond { pos: p });
                    }
                    self.prev = atom;
                    self.pos += 1;
                }
                '-' | '=' | '#' | ':' | '/' | '\\' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return Err(ChemError::UnexpectedChar { pos: start, ch: c });
                    }
                    let order = match c {
                        '=' => BondOrder::Double,
                        '#' => BondOrder::Triple,
                        ':' => BondOrder::Aromatic,
                        _ => BondOrder::Single,
                    };
                    self.pending = Some((order, start));
                    self.pos += 1;
                }
                '.' => {
                    if let Some((_, p)) = self.pending {
                        return Err(ChemError::DanglingBond { pos: p });
                    }
                    if self.prev.is_none() {
                        return Err(ChemError::UnexpectedChar { pos: start, ch: c });
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                '0'..='9' | '%' => self.ring_closure()?,
                '[' => {
                    let atom = self.bracket_atom()?;
                    self.attach(atom, true)?;
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.attach(atom, false)?;
                }
            }
        }
        if let Some((_, p)) = self.pending {
            return Err(ChemError::DanglingBond { pos: p });
        }
        if let Some(&(_, p)) = self.branches.last() {
            return Err(ChemError::UnbalancedBranch { pos: p });
        }
        if let Some((&ring, _)) = self.rings.iter().next() {
            return Err(ChemError::UnclosedRing { ring });
        }
        Ok(())
    }

    fn attach(&mut self, atom: Atom, bracketed: bool) -> Result<(), ChemError> {
        let idx = self.graph.add_atom(atom);
        self.bracketed.push(bracketed);
        if let Some(prev) = self.prev {
            let order = match self.pending.take() {
                Some((o, _)) => o,
                None => self.default_order(prev, idx),
            };
            self.graph.add_bond(prev, idx, order)?;
        } else if let Some((_, p)) = self.pending {
            return Err(ChemError::DanglingBond { pos: p });
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.graph.atom(a).aromatic && self.graph.atom(b).aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn ring_closure(&mut self) -> Result<(), ChemError> {
        let start = self.pos;
        let Some(atom) = self.prev else {
            return Err(ChemError::UnexpectedChar {
                pos: start,
                ch: self.chars[start],
            });
        };
        let ring = if self.chars[start] == '%' {
            let d1 = self.peek_at(1).and_then(|c| c.to_digit(10));
            let d2 = self.peek_at(2).and_then(|c| c.to_digit(10));
            match (d1, d2) {
                (Some(a), Some(b)) => {
                    self.pos += 3;
                    a * 10 + b
                }
                _ => {
                    return Err(ChemError::UnexpectedChar {
                        pos: start,
                        ch: '%',
                    })
                }
            }
        } else {
            self.pos += 1;
            self.chars[start].to_digit(10).unwrap_or(0)
        };
        let bond = self.pending.take().map(|(o, _)| o);
        match self.rings.remove(&ring) {
            None => {
                self.rings.insert(ring, (atom, bond));
            }
            Some((other, other_bond)) => {
                let order = match (other_bond, bond) {
                    (Some(x), Some(y)) if x != y => {
                        return Err(ChemError::ConflictingRingBond { ring })
                    }
                    (Some(x), _) | (None, Some(x)) => x,
                    (None, None) => self.default_order(other, atom),
                };
                self.graph.add_bond(other, atom, order)?;
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, ChemError> {
        let start = self.pos;
        let c = self.chars[start];
        let two: String = self.chars[start..(start + 2).min(self.chars.len())]
            .iter()
            .collect();
        let (z, aromatic, len) = match c {
            '*' => (0, false, 1),
            'C' if two == "Cl" => (elements::CL, false, 2),
            'B' if two == "Br" => (elements::BR, false, 2),
            'B' => (elements::B, false, 1),
            'C' => (elements::C, false, 1),
            'N' => (elements::N, false, 1),
            'O' => (elements::O, false, 1),
            'P' => (elements::P, false, 1),
            'S' => (elements::S, false, 1),
            'F' => (elements::F, false, 1),
            'I' => (elements::I, false, 1),
            'b' => (elements::B, true, 1),
            'c' => (elements::C, true, 1),
            'n' => (elements::N, true, 1),
            'o' => (elements::O, true, 1),
            'p' => (elements::P, true, 1),
            's' => (elements::S, true, 1),
            _ if c.is_ascii_alphabetic() => {
                return Err(ChemError::UnknownAtom {
                    pos: start,
                    symbol: c.to_string(),
                })
            }
            _ => return Err(ChemError::UnexpectedChar { pos: start, ch: c }),
        };
        self.pos += len;
        Ok(Atom {
            element: Element(z),
            charge: 0,
            h_count: 0,
            aromatic,
        })
    }

    fn bracket_atom(&mut self) -> Result<Atom, ChemError> {
        let open = self.pos;
        self.pos += 1;
        // isotope (discarded)
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let sym_start = self.pos;
        let (element, aromatic) = self.bracket_symbol()?;
        if self.pos == sym_start {
            return Err(ChemError::UnknownAtom {
                pos: sym_start,
                symbol: String::new(),
            });
        }
        // chirality (discarded)
        while self.peek() == Some('@') {
            self.pos += 1;
        }
        let mut h_count = 0u8;
        if self.peek() == Some('H') {
            self.pos += 1;
            h_count = 1;
            if let Some(d) = self.peek().and_then(|c| c.to_digit(10)) {
                h_count = d as u8;
                self.pos += 1;
            }
        }
        let mut charge: i32 = 0;
        if let Some(sign @ ('+' | '-')) = self.peek() {
            let unit = if sign == '+' { 1 } else { -1 };
            self.pos += 1;
            charge = unit;
            if let Some(d) = self.peek().and_then(|c| c.to_digit(10)) {
                self.pos += 1;
                let mut v = d as i32;
                if let Some(d2) = self.peek().and_then(|c| c.to_digit(10)) {
                    self.pos += 1;
                    v = v * 10 + d2 as i32;
                }
                charge = unit * v;
            } else {
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
        }
        // atom class (discarded)
        if self.peek() == Some(':') {
            self.pos += 1;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        match self.peek() {
            Some(']') => self.pos += 1,
            Some(c) => {
                return Err(ChemError::UnexpectedChar {
                    pos: self.pos,
                    ch: c,
                })
            }
            None => return Err(ChemError::UnexpectedChar { pos: open, ch: '[' }),
        }
        if element.is_wildcard() && (h_count != 0 || charge != 0) {
            return Err(ChemError::UnknownAtom {
                pos: sym_start,
                symbol: "*".into(),
            });
        }
        Ok(Atom {
            element,
            charge: charge.clamp(i8::MIN as i32, i8::MAX as i32) as i8,
            h_count,
            aromatic,
        })
    }

    fn bracket_symbol(&mut self) -> Result<(Element, bool), ChemError> {
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Err(ChemError::UnknownAtom {
                pos: start,
                symbol: String::new(),
            });
        };
        if c == '*' {
            self.pos += 1;
            return Ok((Element::WILDCARD, false));
        }
        if c.is_ascii_lowercase() {
            let two = match (c, self.peek_at(1)) {
                ('s', Some('e')) => Some(elements::SE),
                ('a', Some('s')) => Some(elements::AS),
                ('t', Some('e')) => Some(elements::TE),
                _ => None,
            };
            if let Some(z) = two {
                self.pos += 2;
                return Ok((Element(z), true));
            }
            let z = match c {
                'b' => elements::B,
                'c' => elements::C,
                'n' => elements::N,
                'o' => elements::O,
                'p' => elements::P,
                's' => elements::S,
                _ => {
                    return Err(ChemError::UnknownAtom {
                        pos: start,
                        symbol: c.to_string(),
                    })
                }
            };
            self.pos += 1;
            return Ok((Element(z), true));
        }
        if !c.is_ascii_uppercase() {
            return Err(ChemError::UnknownAtom {
                pos: start,
                symbol: c.to_string(),
            });
        }
        if let Some(n) = self.peek_at(1).filter(|n| n.is_ascii_lowercase()) {
            let mut two = String::new();
            two.push(c);
            two.push(n);
            if let Some(z) = elements::lookup(&two) {
                self.pos += 2;
                return Ok((Element(z), false));
            }
        }
        match elements::lookup(&c.to_string()) {
            Some(z) => {
                self.pos += 1;
                Ok((Element(z), false))
            }
            None => Err(ChemError::UnknownAtom {
                pos: start,
                symbol: c.to_string(),
            }),
        }
    }
}
