//! Hypothetical polymer enumeration.
//!
//! Every multiset of up to `max_size` divalent groups becomes one candidate
//! repeat unit. Labels from group contribution depend only on the counts, so
//! in-chain arrangements of one multiset are not enumerated separately; the
//! representative unit concatenates the groups in lexicographic id order.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::chemio::{self, canonicalize, ChemError, MolecularGraph};
use crate::groups::{
    estimate_properties, filter_violations, GcProperties, GroupComposition, GroupError, GroupTable,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolygenError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("fragment assembly failed: {0}")]
    Fragment(#[from] ChemError),
    #[error("record {smiles:?} is missing field {field}")]
    MissingField { smiles: String, field: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Synthetic,
    Experimental,
}

/// Thermophysical inputs in SI: kg/m³, W/(m·K), J/(kg·K).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thermophysical {
    pub rho: f64,
    pub kappa: f64,
    pub c_p: f64,
}

/// Cone-calorimeter labels: seconds and kW/m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeLabels {
    pub t_ig: f64,
    pub phrr: f64,
    pub ignitable: bool,
}

/// One polymer as it moves through the pipeline; later stages fill the
/// optional fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolymerRecord {
    pub canonical_smiles: String,
    pub composition: Option<GroupComposition>,
    pub gc: Option<GcProperties>,
    /// Pyrolysis temperature range, K.
    #[serde(rename = "dT")]
    pub d_t: Option<f64>,
    /// Temperature at peak mass-loss rate, K.
    #[serde(rename = "T_p")]
    pub t_p: Option<f64>,
    pub thermophysical: Option<Thermophysical>,
    pub labels: Option<ConeLabels>,
    pub provenance: Provenance,
    /// Per-record failure from a batch stage.
    #[serde(default)]
    pub error: Option<String>,
}

impl PolymerRecord {
    pub fn new(canonical_smiles: String, provenance: Provenance) -> Self {
        PolymerRecord {
            canonical_smiles,
            composition: None,
            gc: None,
            d_t: None,
            t_p: None,
            thermophysical: None,
            labels: None,
            provenance,
            error: None,
        }
    }
}

/// All multisets of size `1..=max_size` over `0..n_groups`, as non-decreasing
/// index vectors ordered by size, then lexicographically.
pub fn enumerate_compositions(n_groups: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if n_groups == 0 {
        return out;
    }
    for k in 1..=max_size {
        let mut cur = alloc::vec![0usize; k];
        loop {
            out.push(cur.clone());
            // advance to the next non-decreasing sequence
            let Some(pos) = (0..k).rev().find(|&i| cur[i] + 1 < n_groups) else {
                break;
            };
            let v = cur[pos] + 1;
            for x in &mut cur[pos..] {
                *x = v;
            }
        }
    }
    out
}

/// `Σ_{k=1..max_size} C(n_groups + k - 1, k)`.
pub fn composition_count(n_groups: usize, max_size: usize) -> u128 {
    (1..=max_size as u128)
        .map(|k| binomial(n_groups as u128 + k - 1, k))
        .sum()
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// Group compositions over `table`, indexed by the table's sorted ids.
pub fn enumerate_group_compositions(table: &GroupTable, max_size: usize) -> Vec<GroupComposition> {
    let ids = table.sorted_ids();
    enumerate_compositions(ids.len(), max_size)
        .into_iter()
        .map(|m| GroupComposition::from_ids(m.iter().map(|&i| ids[i])).expect("nonempty multiset"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub records: Vec<PolymerRecord>,
    /// Compositions enumerated before deduplication.
    pub n_compositions: usize,
    /// Compositions whose canonical unit matched an earlier one.
    pub n_duplicates: usize,
}

/// Canonical repeat unit for `comp`, fragments in lexicographic id order.
pub fn repeat_unit_smiles(
    comp: &GroupComposition,
    table: &GroupTable,
) -> Result<String, PolygenError> {
    let frags: Vec<MolecularGraph> = comp
        .expanded_ids()
        .into_iter()
        .map(|id| {
            table
                .fragment(id)
                .cloned()
                .ok_or_else(|| GroupError::UnknownGroup(id.into()))
        })
        .collect::<Result<_, _>>()?;
    Ok(chemio::assemble_polymer(&frags)?)
}

fn label_one(comp: GroupComposition, table: &GroupTable) -> Result<PolymerRecord, PolygenError> {
    let smiles = repeat_unit_smiles(&comp, table)?;
    let gc = estimate_properties(&comp, table)?;
    let mut rec = PolymerRecord::new(smiles, Provenance::Synthetic);
    rec.composition = Some(comp);
    rec.gc = Some(gc);
    Ok(rec)
}

/// Enumerates, assembles, canonicalizes and labels all compositions of up to
/// `max_size` groups, keeping the first record for each canonical SMILES.
pub fn generate_polymers(table: &GroupTable, max_size: usize) -> Result<Generation, PolygenError> {
    let comps = enumerate_group_compositions(table, max_size);
    let n_compositions = comps.len();

    #[cfg(feature = "parallel")]
    let labeled: Vec<Result<PolymerRecord, PolygenError>> = {
        use rayon::prelude::*;
        comps.into_par_iter().map(|c| label_one(c, table)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let labeled: Vec<Result<PolymerRecord, PolygenError>> =
        comps.into_iter().map(|c| label_one(c, table)).collect();

    let mut seen = alloc::collections::BTreeSet::new();
    let mut records = Vec::with_capacity(n_compositions);
    for r in labeled {
        let r = r?;
        if seen.insert(r.canonical_smiles.clone()) {
            records.push(r);
        }
    }
    let n_duplicates = n_compositions - records.len();
    Ok(Generation {
        records,
        n_compositions,
        n_duplicates,
    })
}

/// Counts from one filter pass. A record breaking several rules counts once
/// under each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub kept: usize,
    pub dropped_mu: usize,
    pub dropped_h_c: usize,
    pub dropped_eta_c: usize,
    #[serde(rename = "dropped_dT")]
    pub dropped_d_t: usize,
}

/// Keeps the records that pass the physicality filter.
pub fn apply_filter(
    records: Vec<PolymerRecord>,
) -> Result<(Vec<PolymerRecord>, FilterReport), PolygenError> {
    let mut report = FilterReport {
        input: records.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for r in records {
        let gc: GcProperties = r.gc.ok_or_else(|| PolygenError::MissingField {
            smiles: r.canonical_smiles.clone(),
            field: "gc",
        })?;
        let d_t = r.d_t.ok_or_else(|| PolygenError::MissingField {
            smiles: r.canonical_smiles.clone(),
            field: "dT",
        })?;
        let v = filter_violations(&gc, d_t);
        report.dropped_mu += v.mu as usize;
        report.dropped_h_c += v.h_c as usize;
        report.dropped_eta_c += v.eta_c as usize;
        report.dropped_d_t += v.d_t as usize;
        if !v.any() {
            kept.push(r);
        }
    }
    report.kept = kept.len();
    Ok((kept, report))
}

/// Canonical SMILES of a parsed SMILES string.
pub fn canonical_smiles(text: &str) -> Result<String, ChemError> {
    Ok(canonicalize(&chemio::parse_smiles(text)?))
}
