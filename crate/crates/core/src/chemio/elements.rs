// Periodic table symbols, indexed by atomic number. Index 0 is the
// polymerization wildcard `*`.
pub(crate) const SYMBOLS: [&str; 119] = [
    "*", "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S",
    "Cl", "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge",
    "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd",
    "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn",
    "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
];

pub(crate) const B: u8 = 5;
pub(crate) const C: u8 = 6;
pub(crate) const N: u8 = 7;
pub(crate) const O: u8 = 8;
pub(crate) const F: u8 = 9;
pub(crate) const SI: u8 = 14;
pub(crate) const P: u8 = 15;
pub(crate) const S: u8 = 16;
pub(crate) const CL: u8 = 17;
pub(crate) const AS: u8 = 33;
pub(crate) const SE: u8 = 34;
pub(crate) const BR: u8 = 35;
pub(crate) const TE: u8 = 52;
pub(crate) const I: u8 = 53;

/// Atomic number for an element symbol with standard capitalization.
pub(crate) fn lookup(symbol: &str) -> Option<u8> {
    SYMBOLS
        .iter()
        .skip(1)
        .position(|s| *s == symbol)
        .map(|p| (p + 1) as u8)
}

/// Normal valences of the organic subset, used for implicit hydrogens.
pub(crate) fn organic_valences(z: u8) -> Option<&'static [u8]> {
    match z {
        B => Some(&[3]),
        C => Some(&[4]),
        N | P => Some(&[3, 5]),
        O => Some(&[2]),
        S => Some(&[2, 4, 6]),
        F | CL | BR | I => Some(&[1]),
        _ => None,
    }
}

/// Elements written without brackets when aromatic.
pub(crate) fn bare_aromatic(z: u8) -> bool {
    matches!(z, B | C | N | O | P | S)
}

/// Upper bound used by the strict valence check.
pub(crate) fn max_valence(z: u8) -> Option<u8> {
    match z {
        B => Some(3),
        C | SI => Some(4),
        N | P => Some(5),
        O => Some(2),
        S => Some(6),
        F => Some(1),
        CL | BR | I => Some(7),
        _ => None,
    }
}
