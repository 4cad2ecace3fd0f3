use polytrinity_core::chemio::{canonicalize, parse_smiles, write_smiles, MolecularGraph};
use polytrinity_core::rng::rng_from_seed;
use proptest::prelude::*;
use rand::seq::SliceRandom;

const MOLECULES: [&str; 10] = [
    "CCO",
    "*CC(*)c1ccccc1",
    "*CC(=O)O*",
    "*c1ccc(*)cc1",
    "CC(C)(C)C(=O)[O-]",
    "*[Si](C)(C)O*",
    "*CC(Cl)(Cl)*.*CC*",
    "OC1CCC(CC1)N",
    "*C(F)(F)C(F)(F)*",
    "c1ccc2ccccc2c1",
];

/// Atom-order rewrite of `g` after a random relabeling. Different labelings
/// give different traversals and so different valid SMILES strings.
fn shuffled_smiles(g: &MolecularGraph, seed: u64) -> String {
    let mut perm: Vec<usize> = (0..g.atom_count()).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    write_smiles(&g.permuted(&perm))
}

#[test]
fn permutations_share_one_canonical_form() {
    for (m, smi) in MOLECULES.iter().enumerate() {
        let g = parse_smiles(smi).unwrap();
        let want = canonicalize(&g);
        let mut spellings = std::collections::BTreeSet::new();
        for k in 0..1000 {
            let s = shuffled_smiles(&g, (m as u64) << 32 | k);
            let h = parse_smiles(&s).unwrap_or_else(|e| panic!("{s}: {e}"));
            assert_eq!(h.atom_count(), g.atom_count());
            assert_eq!(canonicalize(&h), want, "{smi} via {s}");
            spellings.insert(s);
        }
        // the corpus actually exercises more than one spelling
        if g.atom_count() > 3 {
            assert!(spellings.len() > 1, "{smi}");
        }
    }
}

#[test]
fn canonical_form_is_a_fixed_point() {
    for smi in MOLECULES {
        let c = canonicalize(&parse_smiles(smi).unwrap());
        assert_eq!(canonicalize(&parse_smiles(&c).unwrap()), c);
    }
}

#[test]
fn written_smiles_round_trip() {
    for smi in MOLECULES {
        let g = parse_smiles(smi).unwrap();
        let again = parse_smiles(&write_smiles(&g)).unwrap();
        assert_eq!(again.atom_count(), g.atom_count());
        assert_eq!(again.bond_count(), g.bond_count());
        assert_eq!(canonicalize(&again), canonicalize(&g));
    }
}

proptest! {
    #[test]
    fn relabeling_never_changes_canonical_form(m in 0usize..MOLECULES.len(), seed in any::<u64>()) {
        let g = parse_smiles(MOLECULES[m]).unwrap();
        let s = shuffled_smiles(&g, seed);
        prop_assert_eq!(canonicalize(&parse_smiles(&s).unwrap()), canonicalize(&g));
    }

    #[test]
    fn alkane_chains_canonicalize_idempotently(n in 1usize..12, branch in 0usize..12) {
        let mut s = "C".repeat(n);
        if branch < n {
            s.insert_str(branch + 1, "(C)");
        }
        let c = canonicalize(&parse_smiles(&s).unwrap());
        prop_assert_eq!(canonicalize(&parse_smiles(&c).unwrap()), c);
    }
}
