use alloc::string::String;
use alloc::vec::Vec;

use super::{canonicalize, BondOrder, ChemError, MolecularGraph};

/// Chains divalent fragments head to tail into one repeat unit.
///
/// In each fragment the lower-indexed wildcard is the head and the other is
/// the tail. The tail wildcard of fragment `k` and the head wildcard of
/// fragment `k + 1` are removed and their neighbors bonded directly, so the
/// result keeps exactly two wildcards: the first head and the last tail.
/// Returns the canonical SMILES of the fused unit.
pub fn assemble_polymer(fragments: &[MolecularGraph]) -> Result<String, ChemError> {
    Ok(canonicalize(&fuse_fragments(fragments)?))
}

pub(crate) fn fuse_fragments(fragments: &[MolecularGraph]) -> Result<MolecularGraph, ChemError> {
    if fragments.is_empty() {
        return Err(ChemError::BadValence {
            fragment: 0,
            found: 0,
        });
    }
    struct Ends {
        head: usize,
        tail: usize,
        head_nbr: (usize, BondOrder),
        tail_nbr: (usize, BondOrder),
    }
    let mut offsets = Vec::with_capacity(fragments.len());
    let mut ends = Vec::with_capacity(fragments.len());
    let mut offset = 0;
    for (k, frag) in fragments.iter().enumerate() {
        let w = frag.wildcards();
        if w.len() != 2 {
            return Err(ChemError::BadValence {
                fragment: k,
                found: w.len(),
            });
        }
        let nbr = |wi: usize| -> Result<(usize, BondOrder), ChemError> {
            match frag.neighbors(wi) {
                [(v, bi)] => Ok((*v + offset, frag.bonds()[*bi].order)),
                _ => Err(ChemError::BadWildcard { atom: wi }),
            }
        };
        ends.push(Ends {
            head: w[0] + offset,
            tail: w[1] + offset,
            head_nbr: nbr(w[0])?,
            tail_nbr: nbr(w[1])?,
        });
        offsets.push(offset);
        offset += frag.atom_count();
    }

    let total = offset;
    let mut removed = alloc::vec![false; total];
    let mut links = Vec::new();
    for k in 0..fragments.len() - 1 {
        let (a, ord_a) = ends[k].tail_nbr;
        let (b, ord_b) = ends[k + 1].head_nbr;
        removed[ends[k].tail] = true;
        removed[ends[k + 1].head] = true;
        let order = if ord_a.valence() >= ord_b.valence() {
            ord_a
        } else {
            ord_b
        };
        links.push((a, b, order));
    }

    let mut remap = alloc::vec![usize::MAX; total];
    let mut out = MolecularGraph::new();
    for (k, frag) in fragments.iter().enumerate() {
        for i in 0..frag.atom_count() {
            let gi = offsets[k] + i;
            if !removed[gi] {
                remap[gi] = out.add_atom(*frag.atom(i));
            }
        }
    }
    for (k, frag) in fragments.iter().enumerate() {
        for b in frag.bonds() {
            let (ga, gb) = (b.a + offsets[k], b.b + offsets[k]);
            if removed[ga] || removed[gb] {
                continue;
            }
            out.add_bond(remap[ga], remap[gb], b.order)?;
        }
    }
    for (a, b, order) in links {
        // two wildcards bonded to each other cannot be fused onto real atoms
        if remap[a] == usize::MAX || remap[b] == usize::MAX {
            return Err(ChemError::BadWildcard { atom: a.min(b) });
        }
        out.add_bond(remap[a], remap[b], order)?;
    }
    Ok(out)
}
