use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use super::elements;
use super::{BondOrder, MolecularGraph};

/// Serializes `graph` by depth-first traversal in atom-index order.
pub fn write_smiles(graph: &MolecularGraph) -> String {
    let ranks: Vec<usize> = (0..graph.atom_count()).collect();
    emit(graph, &ranks)
}

/// Serializes `graph`, starting each component at its lowest-ranked atom and
/// visiting neighbors in ascending rank. The last neighbor continues the main
/// chain, earlier ones become branches.
pub(crate) fn emit(graph: &MolecularGraph, ranks: &[usize]) -> String {
    let n = graph.atom_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ranks[i]);

    let mut plan = Plan {
        visited: alloc::vec![false; n],
        children: alloc::vec![Vec::new(); n],
        opens: alloc::vec![Vec::new(); n],
        closes: alloc::vec![Vec::new(); n],
        tree_bond: alloc::vec![false; graph.bond_count()],
    };
    let mut roots = Vec::new();
    for &start in &order {
        if !plan.visited[start] {
            roots.push(start);
            plan.dfs(graph, ranks, start, None);
        }
    }

    let mut out = String::new();
    let mut digits = RingDigits::default();
    // bond index -> assigned ring digit
    let mut assigned: Vec<Option<u32>> = alloc::vec![None; graph.bond_count()];
    for (k, &root) in roots.iter().enumerate() {
        if k > 0 {
            out.push('.');
        }
        write_atom_tree(graph, &plan, root, &mut out, &mut digits, &mut assigned);
    }
    out
}

struct Plan {
    visited: Vec<bool>,
    children: Vec<Vec<(usize, usize)>>,
    // ring bonds opened at an atom: (partner, bond)
    opens: Vec<Vec<(usize, usize)>>,
    closes: Vec<Vec<(usize, usize)>>,
    tree_bond: Vec<bool>,
}

impl Plan {
    fn dfs(&mut self, g: &MolecularGraph, ranks: &[usize], u: usize, parent_bond: Option<usize>) {
        self.visited[u] = true;
        let mut nbrs: Vec<(usize, usize)> = g.neighbors(u).to_vec();
        nbrs.sort_by_key(|&(v, _)| ranks[v]);
        for (v, bi) in nbrs {
            if Some(bi) == parent_bond || self.tree_bond[bi] {
                continue;
            }
            if !self.visited[v] {
                self.tree_bond[bi] = true;
                self.children[u].push((v, bi));
                self.dfs(g, ranks, v, Some(bi));
            } else if !self.opens[v].iter().any(|&(_, b)| b == bi)
                && !self.opens[u].iter().any(|&(_, b)| b == bi)
            {
                // back edge to an ancestor: open at v, close at u
                self.opens[v].push((u, bi));
                self.closes[u].push((v, bi));
            }
        }
    }
}

#[derive(Default)]
struct RingDigits {
    in_use: Vec<u32>,
}

impl RingDigits {
    fn take(&mut self) -> u32 {
        let mut d = 1;
        while self.in_use.contains(&d) {
            d += 1;
        }
        self.in_use.push(d);
        d
    }

    fn release(&mut self, d: u32) {
        self.in_use.retain(|&x| x != d);
    }
}

fn write_atom_tree(
    g: &MolecularGraph,
    plan: &Plan,
    root: usize,
    out: &mut String,
    digits: &mut RingDigits,
    assigned: &mut [Option<u32>],
) {
    // Explicit stack of (atom, incoming bond) frames and closing parens so
    // long chains do not recurse.
    enum Step {
        Atom(usize, Option<usize>),
        Text(&'static str),
    }
    let mut stack = alloc::vec![Step::Atom(root, None)];
    while let Some(step) = stack.pop() {
        let (u, incoming) = match step {
            Step::Text(t) => {
                out.push_str(t);
                continue;
            }
            Step::Atom(u, incoming) => (u, incoming),
        };
        if let Some(bi) = incoming {
            let b = &g.bonds()[bi];
            push_bond(g, b.a, b.b, b.order, out);
        }
        push_atom(g, u, out);

        let mut released = Vec::new();
        for &(_, bi) in &plan.closes[u] {
            let d = assigned[bi].expect("ring bond opened before it closes");
            push_digit(d, out);
            released.push(d);
        }
        // discovery order, already fixed by the ranks
        for &(_, bi) in &plan.opens[u] {
            let b = &g.bonds()[bi];
            push_bond(g, b.a, b.b, b.order, out);
            let d = digits.take();
            assigned[bi] = Some(d);
            push_digit(d, out);
        }
        for d in released {
            digits.release(d);
        }

        let kids = &plan.children[u];
        if let Some((&(last, last_b), rest)) = kids.split_last() {
            // pushed in reverse so they pop in order
            stack.push(Step::Atom(last, Some(last_b)));
            for &(v, bi) in rest.iter().rev() {
                stack.push(Step::Text(")"));
                stack.push(Step::Atom(v, Some(bi)));
                stack.push(Step::Text("("));
            }
        }
    }
}

fn push_digit(d: u32, out: &mut String) {
    if d < 10 {
        out.push(char::from(b'0' + d as u8));
    } else {
        let _ = write!(out, "%{:02}", d);
    }
}

fn push_bond(g: &MolecularGraph, a: usize, b: usize, order: BondOrder, out: &mut String) {
    let both_aromatic = g.atom(a).aromatic && g.atom(b).aromatic;
    match order {
        BondOrder::Single if both_aromatic => out.push('-'),
        BondOrder::Single => {}
        BondOrder::Double => out.push('='),
        BondOrder::Triple => out.push('#'),
        BondOrder::Aromatic if both_aromatic => {}
        BondOrder::Aromatic => out.push(':'),
    }
}

fn push_atom(g: &MolecularGraph, idx: usize, out: &mut String) {
    let atom = g.atom(idx);
    if atom.element.is_wildcard() {
        out.push('*');
        return;
    }
    let symbol = atom.element.symbol();
    let organic = elements::organic_valences(atom.element.0).is_some();
    let bare = atom.charge == 0
        && organic
        && (!atom.aromatic || elements::bare_aromatic(atom.element.0))
        && g.implicit_hydrogens(idx) == Some(atom.h_count);
    if !bare {
        out.push('[');
    }
    if atom.aromatic {
        for ch in symbol.chars() {
            out.push(ch.to_ascii_lowercase());
        }
    } else {
        out.push_str(symbol);
    }
    if !bare {
        match atom.h_count {
            0 => {}
            1 => out.push('H'),
            h => {
                let _ = write!(out, "H{}", h);
            }
        }
        match atom.charge {
            0 => {}
            1 => out.push('+'),
            -1 => out.push('-'),
            c if c > 0 => {
                let _ = write!(out, "+{}", c);
            }
            c => {
                let _ = write!(out, "-{}", -c);
            }
        }
        out.push(']');
    }
}
