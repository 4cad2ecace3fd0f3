//! CSV ingestion with unit normalization and the dataset manifest.

use serde::{Deserialize, Serialize};

use polytrinity_core::forest::{kinetics_range_warnings, KineticsRow};
use polytrinity_core::groups::{GroupTable, MolarGroup, TableMetadata, UnitsRecord};
use polytrinity_core::polygen::canonical_smiles;
use polytrinity_core::reference::{self, ReferenceRange};

use crate::error::{PipelineError, Result};
use crate::io::{read_source, sha256_hex};

/// One numeric column as summarized in the manifest, in the units the
/// dataset is distributed in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertySummary {
    pub dataset: String,
    pub property: String,
    pub unit: String,
    pub rows: usize,
    pub min: f64,
    pub max: f64,
    pub reference_lo: Option<f64>,
    pub reference_hi: Option<f64>,
    pub reference_count: Option<usize>,
    pub out_of_range: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub name: String,
    pub source: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub files: Vec<DatasetFile>,
    pub properties: Vec<PropertySummary>,
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    pub fn merge(&mut self, other: DatasetManifest) {
        self.files.extend(other.files);
        self.properties.extend(other.properties);
        self.warnings.extend(other.warnings);
    }

    pub fn property(&self, dataset: &str, property: &str) -> Option<&PropertySummary> {
        self.properties
            .iter()
            .find(|p| p.dataset == dataset && p.property == property)
    }
}

fn summarize(
    dataset: &str,
    property: &str,
    unit: &str,
    values: &[f64],
    range: Option<&ReferenceRange>,
    warnings: &mut Vec<String>,
) -> PropertySummary {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out_of_range = 0;
    if let Some(r) = range {
        for (i, &v) in values.iter().enumerate() {
            if !r.contains(v) {
                out_of_range += 1;
                let msg = format!(
                    "{dataset} row {}: {property} = {v} {unit} outside published range [{}, {}]",
                    i + 1,
                    r.lo,
                    r.hi
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    PropertySummary {
        dataset: dataset.into(),
        property: property.into(),
        unit: unit.into(),
        rows: values.len(),
        min,
        max,
        reference_lo: range.map(|r| r.lo),
        reference_hi: range.map(|r| r.hi),
        reference_count: range.map(|r| r.count),
        out_of_range,
    }
}

/// Parsed CSV with named-column access.
struct Table {
    label: String,
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(label: &str, text: &str, required: &[&str]) -> Result<Table> {
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers: Vec<String> = r
            .headers()
            .map_err(|e| PipelineError::schema(label, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let missing: Vec<&str> = required
            .iter()
            .copied()
            .filter(|c| !headers.iter().any(|h| h == c))
            .collect();
        if !missing.is_empty() {
            return Err(PipelineError::schema(
                label,
                format!("missing columns {missing:?}"),
            ));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| PipelineError::schema(label, e.to_string()))?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            rows.push(rec.iter().map(str::to_string).collect());
        }
        if rows.is_empty() {
            return Err(PipelineError::EmptyFile(label.into()));
        }
        Ok(Table {
            label: label.into(),
            headers,
            rows,
        })
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn str_at<'a>(&'a self, row: &'a [String], name: &str) -> &'a str {
        self.col(name)
            .and_then(|c| row.get(c))
            .map_or("", String::as_str)
    }

    fn num_at(&self, i: usize, row: &[String], name: &str) -> Result<f64> {
        let s = self.str_at(row, name);
        let v: f64 = s.parse().map_err(|_| {
            PipelineError::schema(
                &self.label,
                format!("row {}: {name} = {s:?} is not a number", i + 1),
            )
        })?;
        if !v.is_finite() {
            return Err(PipelineError::schema(
                &self.label,
                format!("row {}: {name} is not finite", i + 1),
            ));
        }
        Ok(v)
    }

    fn opt_num_at(&self, i: usize, row: &[String], name: &str) -> Result<Option<f64>> {
        if self.str_at(row, name).is_empty() {
            Ok(None)
        } else {
            self.num_at(i, row, name).map(Some)
        }
    }
}

fn file_entry(name: &str, source: &str, text: &str, rows: usize) -> DatasetFile {
    DatasetFile {
        name: name.into(),
        source: source.into(),
        rows,
        sha256: sha256_hex(text.as_bytes()),
    }
}

fn canonical(label: &str, i: usize, smiles: &str) -> Result<String> {
    canonical_smiles(smiles)
        .map_err(|e| PipelineError::schema(label, format!("row {}: SMILES {smiles:?}: {e}", i + 1)))
}

pub const GROUP_COLUMNS: [&str; 8] = [
    "id",
    "name",
    "fragment_smiles",
    "molar_mass",
    "psi",
    "omega",
    "chi",
    "valence",
];

pub fn ingest_groups(source: &str) -> Result<(GroupTable, DatasetManifest)> {
    let text = read_source(source)?;
    let t = Table::parse(source, &text, &GROUP_COLUMNS)?;
    let mut groups = Vec::with_capacity(t.rows.len());
    for (i, row) in t.rows.iter().enumerate() {
        let valence = t.num_at(i, row, "valence")?;
        if valence.fract() != 0.0 || valence < 0.0 {
            return Err(PipelineError::schema(
                source,
                format!("row {}: valence must be a whole number", i + 1),
            ));
        }
        groups.push(MolarGroup {
            id: t.str_at(row, "id").into(),
            name: t.str_at(row, "name").into(),
            fragment_smiles: t.str_at(row, "fragment_smiles").into(),
            molar_mass: t.num_at(i, row, "molar_mass")?,
            psi: t.num_at(i, row, "psi")?,
            omega: t.num_at(i, row, "omega")?,
            chi: t.num_at(i, row, "chi")?,
            valence: valence as u32,
        });
    }
    let meta = TableMetadata {
        source: source.into(),
        units: UnitsRecord::default(),
    };
    let table = GroupTable::new(groups, meta)?;
    let manifest = DatasetManifest {
        files: vec![file_entry("groups", source, &text, t.rows.len())],
        ..Default::default()
    };
    Ok((table, manifest))
}

pub const KINETICS_COLUMNS: [&str; 5] = ["smiles", "eta_c", "h_c", "dT", "T_p"];

/// Kinetics rows; non-positive values are unit errors, values outside the
/// published ranges are warnings.
pub fn ingest_kinetics(source: &str) -> Result<(Vec<KineticsRow>, DatasetManifest)> {
    let text = read_source(source)?;
    let t = Table::parse(source, &text, &KINETICS_COLUMNS)?;
    let mut rows = Vec::with_capacity(t.rows.len());
    for (i, row) in t.rows.iter().enumerate() {
        let r = KineticsRow {
            smiles: t.str_at(row, "smiles").into(),
            eta_c: t.num_at(i, row, "eta_c")?,
            h_c: t.num_at(i, row, "h_c")?,
            d_t: t.num_at(i, row, "dT")?,
            t_p: t.num_at(i, row, "T_p")?,
        };
        for (name, v) in [
            ("eta_c", r.eta_c),
            ("h_c", r.h_c),
            ("dT", r.d_t),
            ("T_p", r.t_p),
        ] {
            if v <= 0.0 {
                return Err(PipelineError::Unit {
                    path: source.into(),
                    row: i + 1,
                    message: format!("{name} = {v} must be positive"),
                });
            }
        }
        rows.push(r);
    }
    let mut m = DatasetManifest {
        files: vec![file_entry("kinetics", source, &text, rows.len())],
        ..Default::default()
    };
    // per-row detail is logged by the core check; the manifest keeps counts
    let _ = kinetics_range_warnings(&rows);
    let cols: [(&str, &ReferenceRange, fn(&KineticsRow) -> f64); 4] = [
        ("eta_c", &reference::ETA_C, |r| r.eta_c),
        ("h_c", &reference::H_C, |r| r.h_c),
        ("dT", &reference::D_T, |r| r.d_t),
        ("T_p", &reference::T_P, |r| r.t_p),
    ];
    for (name, range, get) in cols {
        let vals: Vec<f64> = rows.iter().map(get).collect();
        let s = summarize(
            "kinetics",
            name,
            range.unit,
            &vals,
            Some(range),
            &mut m.warnings,
        );
        m.properties.push(s);
    }
    Ok((rows, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermoProperty {
    Rho,
    Kappa,
    CP,
}

impl ThermoProperty {
    pub fn name(self) -> &'static str {
        match self {
            ThermoProperty::Rho => "rho",
            ThermoProperty::Kappa => "kappa",
            ThermoProperty::CP => "c_p",
        }
    }

    pub fn reference(self) -> &'static ReferenceRange {
        match self {
            ThermoProperty::Rho => &reference::RHO,
            ThermoProperty::Kappa => &reference::KAPPA,
            ThermoProperty::CP => &reference::C_P,
        }
    }

    /// Factor from the published unit to SI.
    pub fn published_to_si(self) -> f64 {
        match self {
            ThermoProperty::Rho => 1000.0,
            ThermoProperty::Kappa => 1.0,
            ThermoProperty::CP => 4186.8,
        }
    }

    /// Factor from `unit` to SI, if the unit is known for this property.
    pub fn unit_factor(self, unit: &str) -> Option<f64> {
        let u: String = unit
            .chars()
            .filter(|c| !c.is_whitespace() && !matches!(c, '·' | '*' | '^' | '°' | '.'))
            .map(|c| {
                if c == '³' {
                    '3'
                } else {
                    c.to_ascii_lowercase()
                }
            })
            .collect();
        match (self, u.as_str()) {
            (ThermoProperty::Rho, "g/cm3" | "g/ml" | "g/cc") => Some(1000.0),
            (ThermoProperty::Rho, "kg/m3") => Some(1.0),
            (ThermoProperty::Kappa, "w/(mk)" | "w/mk" | "w/m/k" | "w/(mc)") => Some(1.0),
            (ThermoProperty::CP, "cal/(gc)" | "cal/(gk)" | "cal/gc" | "cal/gk") => Some(4186.8),
            (ThermoProperty::CP, "j/(kgk)" | "j/kgk" | "j/(kgc)") => Some(1.0),
            (ThermoProperty::CP, "j/(gk)" | "j/gk" | "kj/(kgk)") => Some(1000.0),
            _ => None,
        }
    }
}

/// One thermophysical measurement, value in SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoRow {
    pub smiles: String,
    pub value: f64,
    pub is_homopolymer: Option<bool>,
}

pub const THERMO_COLUMNS: [&str; 3] = ["smiles", "value", "unit"];

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" => Some(true),
        "false" | "0" | "no" | "n" => Some(false),
        _ => None,
    }
}

pub fn ingest_thermo(
    source: &str,
    prop: ThermoProperty,
) -> Result<(Vec<ThermoRow>, DatasetManifest)> {
    let text = read_source(source)?;
    let t = Table::parse(source, &text, &THERMO_COLUMNS)?;
    let mut rows = Vec::with_capacity(t.rows.len());
    for (i, row) in t.rows.iter().enumerate() {
        let unit = t.str_at(row, "unit");
        let factor = prop.unit_factor(unit).ok_or_else(|| PipelineError::Unit {
            path: source.into(),
            row: i + 1,
            message: format!("unit {unit:?} is not valid for {}", prop.name()),
        })?;
        let raw = t.num_at(i, row, "value")?;
        if raw <= 0.0 {
            return Err(PipelineError::Unit {
                path: source.into(),
                row: i + 1,
                message: format!("{} = {raw} must be positive", prop.name()),
            });
        }
        let flag = t.str_at(row, "is_homopolymer");
        rows.push(ThermoRow {
            smiles: canonical(source, i, t.str_at(row, "smiles"))?,
            value: raw * factor,
            is_homopolymer: if flag.is_empty() {
                None
            } else {
                parse_bool(flag)
            },
        });
    }
    let name = prop.name();
    let mut m = DatasetManifest {
        files: vec![file_entry(name, source, &text, rows.len())],
        ..Default::default()
    };
    let published: Vec<f64> = rows
        .iter()
        .map(|r| r.value / prop.published_to_si())
        .collect();
    let range = prop.reference();
    let s = summarize(
        name,
        name,
        range.unit,
        &published,
        Some(range),
        &mut m.warnings,
    );
    m.properties.push(s);
    Ok((rows, m))
}

/// One cone-calorimeter measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalRow {
    pub smiles: String,
    pub t_ig: f64,
    pub phrr: f64,
    pub sea: Option<f64>,
}

pub const EXPERIMENTAL_COLUMNS: [&str; 4] = ["smiles", "t_ig_s", "phrr_kw_m2", "sea_m2_kg"];

pub fn ingest_experimental(source: &str) -> Result<(Vec<ExperimentalRow>, DatasetManifest)> {
    let text = read_source(source)?;
    let t = Table::parse(source, &text, &EXPERIMENTAL_COLUMNS)?;
    let mut rows = Vec::with_capacity(t.rows.len());
    for (i, row) in t.rows.iter().enumerate() {
        let r = ExperimentalRow {
            smiles: canonical(source, i, t.str_at(row, "smiles"))?,
            t_ig: t.num_at(i, row, "t_ig_s")?,
            phrr: t.num_at(i, row, "phrr_kw_m2")?,
            sea: t.opt_num_at(i, row, "sea_m2_kg")?,
        };
        if r.t_ig <= 0.0 || r.phrr <= 0.0 {
            return Err(PipelineError::Unit {
                path: source.into(),
                row: i + 1,
                message: "t_ig and pHRR must be positive".into(),
            });
        }
        rows.push(r);
    }
    let mut m = DatasetManifest {
        files: vec![file_entry("experimental", source, &text, rows.len())],
        ..Default::default()
    };
    let t_ig: Vec<f64> = rows.iter().map(|r| r.t_ig).collect();
    let phrr: Vec<f64> = rows.iter().map(|r| r.phrr).collect();
    let sea: Vec<f64> = rows.iter().filter_map(|r| r.sea).collect();
    m.properties.push(summarize(
        "experimental",
        "t_ig",
        "s",
        &t_ig,
        Some(&reference::EXP_T_IG),
        &mut m.warnings,
    ));
    m.properties.push(summarize(
        "experimental",
        "phrr",
        "kW/m^2",
        &phrr,
        Some(&reference::EXP_PHRR),
        &mut m.warnings,
    ));
    if !sea.is_empty() {
        m.properties.push(summarize(
            "experimental",
            "sea",
            "m^2/kg",
            &sea,
            Some(&reference::EXP_SEA),
            &mut m.warnings,
        ));
    }
    Ok((rows, m))
}

/// Manifest rows for a labeled synthetic dataset.
pub fn synthetic_summary(t_ig: &[f64], phrr: &[f64]) -> DatasetManifest {
    let mut m = DatasetManifest::default();
    if !t_ig.is_empty() {
        m.properties.push(summarize(
            "synthetic",
            "t_ig",
            "s",
            t_ig,
            Some(&reference::SYN_T_IG),
            &mut m.warnings,
        ));
        m.properties.push(summarize(
            "synthetic",
            "phrr",
            "kW/m^2",
            phrr,
            Some(&reference::SYN_PHRR),
            &mut m.warnings,
        ));
    }
    m
}
