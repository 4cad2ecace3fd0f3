//! Canonical SMILES.
//!
//! Atoms start from the invariant (element, charge, degree, hydrogen count,
//! aromatic flag) and are refined by their neighbors' classes until the
//! partition stops splitting (extended connectivity). Remaining ties are
//! broken by individualizing each member of the first tied class in turn and
//! refining again; of all fully ranked leaves, the lexicographically
//! smallest emitted string wins. The result depends only on the labeled
//! graph, never on input atom order.

use alloc::string::String;
use alloc::vec::Vec;

use super::write::emit;
use super::MolecularGraph;

/// Canonical SMILES string of `graph`.
pub fn canonicalize(graph: &MolecularGraph) -> String {
    search_best(graph).0
}

/// Atom ranks (0 = first emitted) that produce the canonical string.
pub fn canonical_ranks(graph: &MolecularGraph) -> Vec<usize> {
    search_best(graph).1
}

fn search_best(graph: &MolecularGraph) -> (String, Vec<usize>) {
    if graph.atom_count() == 0 {
        return (String::new(), Vec::new());
    }
    let mut best: Option<(String, Vec<usize>)> = None;
    search(graph, initial_classes(graph), &mut best);
    best.expect("search visits at least one leaf")
}

fn densify<K: Ord + Clone>(keys: &[K]) -> (Vec<usize>, usize) {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    let ranks = keys
        .iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect();
    (ranks, sorted.len())
}

pub(crate) fn initial_classes(g: &MolecularGraph) -> Vec<usize> {
    let keys: Vec<(u8, i8, usize, u8, bool)> = (0..g.atom_count())
        .map(|i| {
            let a = g.atom(i);
            (a.element.0, a.charge, g.degree(i), a.h_count, a.aromatic)
        })
        .collect();
    densify(&keys).0
}

/// Iterates neighbor-class refinement to a stable partition.
pub(crate) fn refine(g: &MolecularGraph, classes: &[usize]) -> Vec<usize> {
    let (mut current, mut count) = densify(classes);
    loop {
        let keys: Vec<(usize, Vec<(u8, usize)>)> = (0..g.atom_count())
            .map(|u| {
                let mut env: Vec<(u8, usize)> = g
                    .neighbors(u)
                    .iter()
                    .map(|&(v, bi)| (g.bonds()[bi].order.code(), current[v]))
                    .collect();
                env.sort_unstable();
                (current[u], env)
            })
            .collect();
        let (next, next_count) = densify(&keys);
        if next_count == count {
            return next;
        }
        current = next;
        count = next_count;
    }
}

fn search(g: &MolecularGraph, classes: Vec<usize>, best: &mut Option<(String, Vec<usize>)>) {
    let classes = refine(g, &classes);
    let n = g.atom_count();
    let mut sizes = alloc::vec![0usize; n];
    for &c in &classes {
        sizes[c] += 1;
    }
    let Some(cell) = sizes.iter().position(|&s| s > 1) else {
        let s = emit(g, &classes);
        if best.as_ref().is_none_or(|(b, _)| s < *b) {
            *best = Some((s, classes));
        }
        return;
    };
    for chosen in (0..n).filter(|&u| classes[u] == cell) {
        let split: Vec<usize> = (0..n)
            .map(|u| 2 * classes[u] + usize::from(classes[u] == cell && u != chosen))
            .collect();
        search(g, split, best);
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_smiles;
    use super::*;

    fn canon(s: &str) -> String {
        canonicalize(&parse_smiles(s).unwrap())
    }

    #[test]
    fn traversal_independent() {
        assert_eq!(canon("OCC"), canon("CCO"));
        assert_eq!(canon("C(O)C"), canon("CCO"));
        assert_eq!(canon("*OC*"), canon("*CO*"));
        assert_eq!(canon("C1CCCCC1O"), canon("OC1CCCCC1"));
    }

    #[test]
    fn idempotent() {
        for s in [
            "CCO",
            "*CC(=O)O*",
            "c1ccccc1C(=O)[O-]",
            "*c1ccc(*)cc1",
            "CC.O",
        ] {
            let c = canon(s);
            assert_eq!(canon(&c), c, "{s}");
        }
    }

    #[test]
    fn distinguishes_isomers() {
        assert_ne!(canon("CCCO"), canon("CC(C)O"));
        assert_ne!(canon("*CC(=O)O*"), canon("*CC(O)=O"));
        assert_ne!(canon("CC"), canon("C=C"));
    }

    #[test]
    fn ranks_are_a_permutation() {
        let g = parse_smiles("CC(C)(C)C").unwrap();
        let mut r = canonical_ranks(&g);
        r.sort();
        assert_eq!(r, (0..5).collect::<Vec<_>>());
    }

    #[test]
    fn refinement_separates_chain_positions() {
        let g = parse_smiles("CCCCC").unwrap();
        let c = refine(&g, &initial_classes(&g));
        assert_eq!(c[0], c[4]);
        assert_eq!(c[1], c[3]);
        assert_ne!(c[0], c[1]);
        assert_ne!(c[1], c[2]);
    }
}
