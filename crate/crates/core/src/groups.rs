//! Molar groups and the group-contribution estimator.
//!
//! A polymer repeat unit built from `N_i` copies of groups with molar mass
//! `M_i` and contributions `Ψ_i`, `Ω_i`, `X_i` gets the mass-weighted
//! properties
//!
//! ```text
//! η_c = Σ N_i Ψ_i / Σ N_i M_i     [J/(g·K)]
//! h_c = Σ N_i Ω_i / Σ N_i M_i     [kJ/g]
//! μ   = Σ N_i X_i / Σ N_i M_i     [-]
//! ```
//!
//! The termwise variant `Σ_i (N_i Ψ_i)/(N_i M_i)` is available through
//! [`GcForm::Termwise`] for comparison.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::chemio::{parse_smiles, MolecularGraph};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GroupError {
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("duplicate group id {0:?}")]
    DuplicateId(String),
    #[error("group {id:?} has an invalid fragment: {reason}")]
    FragmentError { id: String, reason: String },
    #[error("group {id:?} is invalid: {reason}")]
    InvalidGroup { id: String, reason: String },
    #[error("unknown group {0:?}")]
    UnknownGroup(String),
    #[error("group table is empty")]
    EmptyTable,
    #[error("composition must contain at least one group with a positive count")]
    EmptyComposition,
}

/// A divalent molecular fragment with tabulated contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolarGroup {
    pub id: String,
    pub name: String,
    /// Fragment with one `*` per open valence.
    pub fragment_smiles: String,
    /// g/mol
    pub molar_mass: f64,
    /// Heat release capacity contribution, J/(mol·K).
    pub psi: f64,
    /// Heat of combustion contribution, kJ/mol.
    pub omega: f64,
    /// Char-forming mass contribution, g/mol.
    pub chi: f64,
    pub valence: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitsRecord {
    pub molar_mass: String,
    pub psi: String,
    pub omega: String,
    pub chi: String,
}

impl Default for UnitsRecord {
    fn default() -> Self {
        UnitsRecord {
            molar_mass: "g/mol".into(),
            psi: "J/(mol*K)".into(),
            omega: "kJ/mol".into(),
            chi: "g/mol".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TableMetadata {
    pub source: String,
    pub units: UnitsRecord,
}

/// Validated, immutable group table. Fragments are parsed once on
/// construction.
#[derive(Debug, Clone)]
pub struct GroupTable {
    groups: Vec<MolarGroup>,
    fragments: Vec<MolecularGraph>,
    index: BTreeMap<String, usize>,
    pub metadata: TableMetadata,
}

impl GroupTable {
    pub fn new(groups: Vec<MolarGroup>, metadata: TableMetadata) -> Result<Self, GroupError> {
        if groups.is_empty() {
            return Err(GroupError::EmptyTable);
        }
        let mut index = BTreeMap::new();
        let mut fragments = Vec::with_capacity(groups.len());
        for (i, g) in groups.iter().enumerate() {
            if index.insert(g.id.clone(), i).is_some() {
                return Err(GroupError::DuplicateId(g.id.clone()));
            }
            let finite = [g.molar_mass, g.psi, g.omega, g.chi]
                .iter()
                .all(|v| v.is_finite());
            if !finite || g.molar_mass <= 0.0 {
                return Err(GroupError::InvalidGroup {
                    id: g.id.clone(),
                    reason: "molar mass must be positive and all contributions finite".into(),
                });
            }
            let frag = parse_smiles(&g.fragment_smiles).map_err(|e| GroupError::FragmentError {
                id: g.id.clone(),
                reason: e.to_string(),
            })?;
            let wildcards = frag.wildcards().len();
            if wildcards != g.valence as usize {
                return Err(GroupError::FragmentError {
                    id: g.id.clone(),
                    reason: alloc::format!(
                        "fragment has {wildcards} wildcards but valence is {}",
                        g.valence
                    ),
                });
            }
            fragments.push(frag);
        }
        Ok(GroupTable {
            groups,
            fragments,
            index,
            metadata,
        })
    }

    pub fn groups(&self) -> &[MolarGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&MolarGroup> {
        self.index.get(id).map(|&i| &self.groups[i])
    }

    pub fn fragment(&self, id: &str) -> Option<&MolecularGraph> {
        self.index.get(id).map(|&i| &self.fragments[i])
    }

    /// Group ids in lexicographic order.
    pub fn sorted_ids(&self) -> Vec<&str> {
        self.index.keys().map(String::as_str).collect()
    }
}

/// Group counts of one repeat unit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupComposition {
    counts: BTreeMap<String, u32>,
}

impl GroupComposition {
    pub fn new<I, S>(counts: I) -> Result<Self, GroupError>
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (id, n) in counts {
            if n > 0 {
                *map.entry(id.into()).or_insert(0) += n;
            }
        }
        if map.is_empty() {
            return Err(GroupError::EmptyComposition);
        }
        Ok(GroupComposition { counts: map })
    }

    /// Composition counting each occurrence in `ids`.
    pub fn from_ids<'a, I: IntoIterator<Item = &'a str>>(ids: I) -> Result<Self, GroupError> {
        Self::new(ids.into_iter().map(|id| (id, 1)))
    }

    pub fn counts(&self) -> &BTreeMap<String, u32> {
        &self.counts
    }

    /// Number of distinct groups.
    pub fn n_groups(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u32 {
        self.counts.values().sum()
    }

    pub fn scaled(&self, factor: u32) -> Self {
        assert!(factor > 0);
        GroupComposition {
            counts: self
                .counts
                .iter()
                .map(|(k, &v)| (k.clone(), v * factor))
                .collect(),
        }
    }

    /// Ids with repetition, lexicographic.
    pub fn expanded_ids(&self) -> Vec<&str> {
        self.counts
            .iter()
            .flat_map(|(k, &n)| core::iter::repeat_n(k.as_str(), n as usize))
            .collect()
    }
}

/// Group-contribution estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcProperties {
    /// Heat release capacity, J/(g·K).
    pub eta_c: f64,
    /// Heat of combustion, kJ/g.
    pub h_c: f64,
    /// Char fraction.
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GcForm {
    /// `Σ N_i Ψ_i / Σ N_i M_i`
    #[default]
    RatioOfSums,
    /// `Σ_i N_i Ψ_i / (N_i M_i)`, the termwise form.
    Termwise,
}

pub fn estimate_properties(
    comp: &GroupComposition,
    table: &GroupTable,
) -> Result<GcProperties, GroupError> {
    estimate_properties_with(comp, table, GcForm::RatioOfSums)
}

pub fn estimate_properties_with(
    comp: &GroupComposition,
    table: &GroupTable,
    form: GcForm,
) -> Result<GcProperties, GroupError> {
    let mut mass = 0.0;
    let (mut psi, mut omega, mut chi) = (0.0, 0.0, 0.0);
    for (id, &n) in comp.counts() {
        let g = table
            .get(id)
            .ok_or_else(|| GroupError::UnknownGroup(id.clone()))?;
        let n = n as f64;
        match form {
            GcForm::RatioOfSums => {
                mass += n * g.molar_mass;
                psi += n * g.psi;
                omega += n * g.omega;
                chi += n * g.chi;
            }
            GcForm::Termwise => {
                psi += (n * g.psi) / (n * g.molar_mass);
                omega += (n * g.omega) / (n * g.molar_mass);
                chi += (n * g.chi) / (n * g.molar_mass);
            }
        }
    }
    Ok(match form {
        GcForm::RatioOfSums => GcProperties {
            eta_c: psi / mass,
            h_c: omega / mass,
            mu: chi / mass,
        },
        GcForm::Termwise => GcProperties {
            eta_c: psi,
            h_c: omega,
            mu: chi,
        },
    })
}

/// Strict upper bound on the char fraction.
pub const MU_MAX: f64 = 1.0;
/// Strict upper bound on the heat of combustion, kJ/g.
pub const H_C_MAX: f64 = 50.0;
/// Strict lower bound on the heat release capacity, J/(g·K).
pub const ETA_C_MIN: f64 = 0.0;
/// Open interval for the pyrolysis temperature range, K.
pub const DT_MIN: f64 = 1.0;
pub const DT_MAX: f64 = 300.0;

/// Which physicality rules a candidate breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterViolations {
    pub mu: bool,
    pub h_c: bool,
    pub eta_c: bool,
    #[serde(rename = "dT")]
    pub d_t: bool,
}

impl FilterViolations {
    pub fn any(&self) -> bool {
        self.mu || self.h_c || self.eta_c || self.d_t
    }
}

pub fn filter_violations(props: &GcProperties, d_t: f64) -> FilterViolations {
    FilterViolations {
        mu: !(props.mu < MU_MAX),
        h_c: !(props.h_c < H_C_MAX),
        eta_c: !(props.eta_c > ETA_C_MIN),
        d_t: !(d_t > DT_MIN && d_t < DT_MAX),
    }
}

/// `μ < 1 ∧ h_c < 50 ∧ η_c > 0 ∧ 1 < dT < 300`, all strict. NaN fails.
pub fn filter_physical(props: &GcProperties, d_t: f64) -> bool {
    !filter_violations(props, d_t).any()
}

/// The six-group illustrative table shipped with the crate.
///
/// Values are made up for testing, not taken from a published group table.
/// They are chosen so that generated compounds fall on both sides of every
/// physicality bound: `SiMe2O` alone gives `μ > 1`, `CtC` alone gives
/// `h_c > 50`, and `O` / `CCl2` alone give `η_c < 0`.
pub fn illustrative_groups() -> Vec<MolarGroup> {
    let g = |id: &str, name: &str, smi: &str, m: f64, psi: f64, omega: f64, chi: f64| MolarGroup {
        id: id.into(),
        name: name.into(),
        fragment_smiles: smi.into(),
        molar_mass: m,
        psi,
        omega,
        chi,
        valence: 2,
    };
    alloc::vec![
        g("CH2", "methylene", "*C*", 14.027, 21000.0, 611.6, 0.0),
        g("O", "ether oxygen", "*O*", 15.999, -15930.0, -191.0, 0.0),
        g(
            "C6H4",
            "p-phenylene",
            "*c1ccc(*)cc1",
            76.096,
            30000.0,
            2700.0,
            45.0
        ),
        g(
            "CCl2",
            "dichloromethylene",
            "*C(Cl)(Cl)*",
            82.93,
            -8000.0,
            150.0,
            10.0
        ),
        g(
            "SiMe2O",
            "dimethylsiloxane",
            "*[Si](C)(C)O*",
            74.154,
            8000.0,
            1600.0,
            90.0
        ),
        g("CtC", "ethynylene", "*C#C*", 24.022, 12000.0, 1300.0, 2.0),
    ]
}

pub fn illustrative_table() -> GroupTable {
    GroupTable::new(
        illustrative_groups(),
        TableMetadata {
            source: "illustrative".to_string(),
            units: UnitsRecord::default(),
        },
    )
    .expect("bundled table is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_group(m: f64, psi: f64, omega: f64, chi: f64) -> GroupTable {
        GroupTable::new(
            alloc::vec![MolarGroup {
                id: "A".into(),
                name: "a".into(),
                fragment_smiles: "*C*".into(),
                molar_mass: m,
                psi,
                omega,
                chi,
                valence: 2,
            }],
            TableMetadata::default(),
        )
        .unwrap()
    }

    #[test]
    fn single_group_ratio() {
        let t = one_group(20.0, 280.0, 400.0, 0.0);
        let p = estimate_properties(&GroupComposition::new([("A", 1)]).unwrap(), &t).unwrap();
        assert!((p.eta_c - 14.0).abs() < 1e-12);
        assert!((p.h_c - 20.0).abs() < 1e-12);
        assert_eq!(p.mu, 0.0);
        let p3 = estimate_properties(&GroupComposition::new([("A", 3)]).unwrap(), &t).unwrap();
        assert_eq!(p, p3);
    }

    #[test]
    fn two_group_hand_value() {
        let mk = |id: &str, m: f64, omega: f64| MolarGroup {
            id: id.into(),
            name: id.into(),
            fragment_smiles: "*C*".into(),
            molar_mass: m,
            psi: 0.0,
            omega,
            chi: 0.0,
            valence: 2,
        };
        let t = GroupTable::new(
            alloc::vec![mk("G1", 14.0, 600.0), mk("G2", 16.0, 100.0)],
            TableMetadata::default(),
        )
        .unwrap();
        let c = GroupComposition::new([("G1", 1), ("G2", 2)]).unwrap();
        let p = estimate_properties(&c, &t).unwrap();
        assert!((p.h_c - 800.0 / 46.0).abs() < 1e-12);
        // termwise form ignores N
        let lit = estimate_properties_with(&c, &t, GcForm::Termwise).unwrap();
        assert!((lit.h_c - (600.0 / 14.0 + 100.0 / 16.0)).abs() < 1e-12);
    }

    #[test]
    fn unknown_group() {
        let t = illustrative_table();
        let c = GroupComposition::new([("nope", 1)]).unwrap();
        assert_eq!(
            estimate_properties(&c, &t),
            Err(GroupError::UnknownGroup("nope".into()))
        );
    }

    #[test]
    fn duplicate_and_fragment_errors() {
        let mut gs = illustrative_groups();
        gs.push(gs[0].clone());
        assert_eq!(
            GroupTable::new(gs, TableMetadata::default()).unwrap_err(),
            GroupError::DuplicateId("CH2".into())
        );
        let mut gs = illustrative_groups();
        gs[0].fragment_smiles = "*C".into();
        assert!(matches!(
            GroupTable::new(gs, TableMetadata::default()),
            Err(GroupError::FragmentError { .. })
        ));
        let mut gs = illustrative_groups();
        gs[0].fragment_smiles = "*C(*".into();
        assert!(matches!(
            GroupTable::new(gs, TableMetadata::default()),
            Err(GroupError::FragmentError { .. })
        ));
        let mut gs = illustrative_groups();
        gs[1].molar_mass = 0.0;
        assert!(matches!(
            GroupTable::new(gs, TableMetadata::default()),
            Err(GroupError::InvalidGroup { .. })
        ));
    }

    #[test]
    fn filter_bounds() {
        let p = |eta_c, h_c, mu| GcProperties { eta_c, h_c, mu };
        assert!(filter_physical(&p(300.0, 20.0, 0.1), 100.0));
        assert!(!filter_physical(&p(300.0, 60.0, 0.1), 100.0));
        assert!(!filter_physical(&p(300.0, 20.0, 1.0), 100.0));
        assert!(!filter_physical(&p(0.0, 20.0, 0.1), 100.0));
        assert!(!filter_physical(&p(300.0, 50.0, 0.1), 100.0));
        assert!(!filter_physical(&p(300.0, 20.0, 0.1), 1.0));
        assert!(!filter_physical(&p(300.0, 20.0, 0.1), 300.0));
        assert!(!filter_physical(&p(f64::NAN, 20.0, 0.1), 100.0));
    }

    #[test]
    fn illustrative_table_spans_bounds() {
        let t = illustrative_table();
        assert_eq!(t.len(), 6);
        let homo =
            |id: &str| estimate_properties(&GroupComposition::new([(id, 1)]).unwrap(), &t).unwrap();
        assert!(homo("SiMe2O").mu > 1.0);
        assert!(homo("CtC").h_c > 50.0);
        assert!(homo("O").eta_c < 0.0);
        assert!(homo("CCl2").eta_c < 0.0);
        let pe = homo("CH2");
        assert!(filter_physical(&pe, 50.0));
    }
}
