//! Generators for the bundled data files.
//!
//! The files are synthetic. Thermophysical values come from per-group rules,
//! kinetics from smooth closed-form laws, and the cone measurements from the
//! simulator run with a higher critical mass flux and a stronger flame on
//! true (not surrogate-predicted) inputs, plus measurement noise. `write-fixtures` regenerates them
//! byte for byte.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use polytrinity_core::groups::{
    filter_physical, illustrative_groups, GroupComposition, GroupTable, MolarGroup, TableMetadata,
    UnitsRecord,
};
use polytrinity_core::polygen::{
    enumerate_group_compositions, generate_polymers, repeat_unit_smiles, Thermophysical,
};
use polytrinity_core::reference;
use polytrinity_core::rng::{derive_seed, rng_from_seed};
use polytrinity_core::rompyro::{simulate_cone, IgnitionCriterion, MaterialInput, SimConfig};

use crate::error::{PipelineError, Result};
use crate::io::{to_csv, write_text};

pub const FIXTURE_SEED: u64 = 7;
pub const N_KINETICS: usize = 88;
pub const N_EXPERIMENTAL: usize = 45;
pub const N_DENSITY: usize = 150;
pub const N_CONDUCTIVITY: usize = 60;
pub const N_HEAT_CAPACITY: usize = 90;
/// Composition size used for the thermophysical and cone fixtures.
pub const FIXTURE_MAX_SIZE: usize = 3;

const CAL: f64 = 4186.8;

/// The six illustrative groups plus four more, so that generated polymers
/// include carbonyl, amide-like, fluorinated and branched units.
pub fn extended_groups() -> Vec<MolarGroup> {
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
    let mut out = illustrative_groups();
    out.extend([
        g(
            "CHCH3",
            "methylmethylene",
            "*C(C)*",
            28.054,
            36000.0,
            1230.0,
            0.0,
        ),
        g("CO", "carbonyl", "*C(=O)*", 28.010, -5000.0, 150.0, 2.0),
        g("NH", "imino", "*N*", 15.015, -3000.0, 300.0, 3.0),
        g(
            "CF2",
            "difluoromethylene",
            "*C(F)(F)*",
            50.008,
            -2000.0,
            200.0,
            5.0,
        ),
    ]);
    out
}

pub fn extended_table() -> GroupTable {
    GroupTable::new(
        extended_groups(),
        TableMetadata {
            source: "extended".into(),
            units: UnitsRecord::default(),
        },
    )
    .expect("extended table is valid")
}

/// (rho g/cm³, kappa W/(m·K), c_p cal/(g·°C)) per group.
fn group_thermo(id: &str) -> (f64, f64, f64) {
    match id {
        "CH2" => (0.85, 0.35, 0.55),
        "O" => (1.45, 0.20, 0.30),
        "C6H4" => (1.20, 0.18, 0.28),
        "CCl2" => (1.75, 0.15, 0.22),
        "SiMe2O" => (0.98, 0.16, 0.35),
        "CtC" => (1.05, 0.25, 0.40),
        "CHCH3" => (0.86, 0.22, 0.45),
        "CO" => (1.40, 0.25, 0.30),
        "NH" => (1.15, 0.30, 0.40),
        "CF2" => (2.15, 0.25, 0.25),
        _ => (1.0, 0.2, 0.4),
    }
}

/// Rule-based thermophysical values in SI: mass-weighted group values, raised
/// 2 % per additional distinct group.
pub fn true_thermophysical(comp: &GroupComposition, table: &GroupTable) -> Thermophysical {
    let (mut m, mut rho, mut kappa, mut c_p) = (0.0, 0.0, 0.0, 0.0);
    for (id, &n) in comp.counts() {
        let w = n as f64 * table.get(id).map_or(0.0, |g| g.molar_mass);
        let (r, k, c) = group_thermo(id);
        m += w;
        rho += w * r;
        kappa += w * k;
        c_p += w * c;
    }
    let f = 1.0 + 0.02 * (comp.n_groups() as f64 - 1.0);
    Thermophysical {
        rho: rho / m * f * 1000.0,
        kappa: kappa / m * f,
        c_p: c_p / m * f * CAL,
    }
}

/// Pyrolysis range and peak temperature (K) from heat release capacity
/// (J/(g·K)) and heat of combustion (kJ/g).
pub fn true_kinetics(eta_c: f64, h_c: f64) -> (f64, f64) {
    let d_t = 50.0 + 310.0 * (-eta_c / 180.0).exp() * (1.05 - 0.2 * h_c / 46.5);
    let t_p = 420.0
        + 300.0 * (h_c.max(0.0) / 46.5).sqrt()
        + 0.15 * (d_t - 150.0)
        + 10.0 * (eta_c / 90.0).sin();
    (d_t, t_p)
}

/// Critical mass flux of the "apparatus", kg/(m²·s).
pub const EXPERIMENTAL_M_CRIT: f64 = 0.0035;
/// Relative measurement noise on t_ig and pHRR.
pub const EXPERIMENTAL_NOISE: f64 = 0.05;

/// Simulator settings that play the role of the real apparatus.
pub fn experimental_sim_config() -> SimConfig {
    let base = SimConfig::default();
    SimConfig {
        ignition: IgnitionCriterion::CriticalMassFlux {
            m_crit: EXPERIMENTAL_M_CRIT,
        },
        q_flame: base.q_flame * 1.1,
        ..base
    }
}

fn r3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn r1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[derive(serde::Serialize)]
struct GroupRow<'a> {
    id: &'a str,
    name: &'a str,
    fragment_smiles: &'a str,
    molar_mass: f64,
    psi: f64,
    omega: f64,
    chi: f64,
    valence: u32,
}

fn groups_csv(groups: &[MolarGroup]) -> Result<String> {
    let rows: Vec<GroupRow> = groups
        .iter()
        .map(|g| GroupRow {
            id: &g.id,
            name: &g.name,
            fragment_smiles: &g.fragment_smiles,
            molar_mass: g.molar_mass,
            psi: g.psi,
            omega: g.omega,
            chi: g.chi,
            valence: g.valence,
        })
        .collect();
    to_csv(&rows)
}

#[derive(serde::Serialize)]
struct ThermoCsvRow {
    smiles: String,
    value: f64,
    unit: &'static str,
    is_homopolymer: bool,
}

#[derive(serde::Serialize)]
struct KineticsCsvRow {
    smiles: String,
    eta_c: f64,
    h_c: f64,
    #[serde(rename = "dT")]
    d_t: f64,
    #[serde(rename = "T_p")]
    t_p: f64,
}

#[derive(serde::Serialize)]
struct ExperimentalCsvRow {
    smiles: String,
    t_ig_s: f64,
    phrr_kw_m2: f64,
    sea_m2_kg: f64,
}

fn thermo_csv(
    comps: &[(GroupComposition, String)],
    table: &GroupTable,
    n: usize,
    stream: u64,
    unit: &'static str,
    get: fn(&Thermophysical) -> f64,
) -> Result<String> {
    let mut rng = rng_from_seed(derive_seed(FIXTURE_SEED, stream));
    // single-group units first so every table has homopolymer test rows
    let (mut chosen, mut rest): (Vec<usize>, Vec<usize>) =
        (0..comps.len()).partition(|&i| comps[i].0.total() == 1);
    rest.shuffle(&mut rng);
    chosen.extend(rest.into_iter().take(n.saturating_sub(chosen.len())));
    chosen.sort_unstable();
    let rows: Vec<ThermoCsvRow> = chosen
        .into_iter()
        .map(|i| {
            let (comp, smiles) = &comps[i];
            let noise = 1.0 + 0.03 * (2.0 * rng.gen::<f64>() - 1.0);
            ThermoCsvRow {
                smiles: smiles.clone(),
                value: r3(get(&true_thermophysical(comp, table)) * noise),
                unit,
                is_homopolymer: comp.n_groups() == 1,
            }
        })
        .collect();
    to_csv(&rows)
}

fn kinetics_csv(comps: &[(GroupComposition, String)]) -> Result<String> {
    let mut rng = rng_from_seed(derive_seed(FIXTURE_SEED, 10));
    let (ln_lo, ln_hi) = (20.0f64.ln(), 1527.0f64.ln());
    let rows: Vec<KineticsCsvRow> = (0..N_KINETICS)
        .map(|i| {
            let eta = (ln_lo + (ln_hi - ln_lo) * rng.gen::<f64>()).exp();
            let h = 3.8 + (46.5 - 3.8) * rng.gen::<f64>();
            let (d_t, t_p) = true_kinetics(eta, h);
            let d_t = d_t * (1.0 + 0.02 * (2.0 * rng.gen::<f64>() - 1.0));
            let t_p = t_p + 3.0 * (2.0 * rng.gen::<f64>() - 1.0);
            KineticsCsvRow {
                smiles: comps[i % comps.len()].1.clone(),
                eta_c: r3(eta),
                h_c: r3(h),
                d_t: r3(d_t),
                t_p: r3(t_p),
            }
        })
        .collect();
    to_csv(&rows)
}

/// Cone "measurements" for a seeded subset of the physical generated
/// polymers that ignite under the nominal settings and whose results fall
/// inside the published experimental ranges.
fn experimental_csv(table: &GroupTable) -> Result<String> {
    let gen = generate_polymers(table, FIXTURE_MAX_SIZE)?;
    let cfg = experimental_sim_config();
    let mut candidates = Vec::new();
    for rec in &gen.records {
        let (Some(gc), Some(comp)) = (rec.gc, rec.composition.as_ref()) else {
            continue;
        };
        let (d_t, t_p) = true_kinetics(gc.eta_c, gc.h_c);
        if !filter_physical(&gc, d_t) {
            continue;
        }
        let th = true_thermophysical(comp, table);
        let mat = MaterialInput {
            rho: th.rho,
            kappa: th.kappa,
            c_p: th.c_p,
            h_c: gc.h_c * 1e6,
            mu: gc.mu,
            d_t,
            t_p,
        };
        candidates.push((rec.canonical_smiles.clone(), mat, gc.h_c, gc.mu));
    }
    let nominal = SimConfig::default();
    let results: Vec<_> = {
        use rayon::prelude::*;
        candidates
            .par_iter()
            .map(|(_, mat, _, _)| {
                Ok::<_, PipelineError>((simulate_cone(mat, &nominal)?, simulate_cone(mat, &cfg)?))
            })
            .collect()
    };
    let mut rng = rng_from_seed(derive_seed(FIXTURE_SEED, 21));
    let mut ignitable = Vec::new();
    for ((smiles, _, h_c, mu), r) in candidates.into_iter().zip(results) {
        let (nom, r) = r?;
        let mut noise = || 1.0 + EXPERIMENTAL_NOISE * (2.0 * rng.gen::<f64>() - 1.0);
        let (t_ig, phrr) = (r1(r.t_ig * noise()), r1(r.phrr * noise()));
        let in_range = reference::EXP_T_IG.contains(t_ig) && reference::EXP_PHRR.contains(phrr);
        if nom.ignited && r.ignited && in_range {
            ignitable.push(ExperimentalCsvRow {
                smiles,
                t_ig_s: t_ig,
                phrr_kw_m2: phrr,
                sea_m2_kg: r1(35.0 + 20.0 * h_c * (1.0 - mu)),
            });
        }
    }
    if ignitable.len() < N_EXPERIMENTAL {
        return Err(PipelineError::Numerical(format!(
            "only {} ignitable polymers for the experimental fixture",
            ignitable.len()
        )));
    }
    ignitable.shuffle(&mut rng_from_seed(derive_seed(FIXTURE_SEED, 20)));
    ignitable.truncate(N_EXPERIMENTAL);
    ignitable.sort_by(|a, b| a.smiles.cmp(&b.smiles));
    to_csv(&ignitable)
}

/// All bundled files as (name, contents), in a fixed order.
pub fn build_fixtures() -> Result<Vec<(&'static str, String)>> {
    let table = extended_table();
    let comps: Vec<(GroupComposition, String)> =
        enumerate_group_compositions(&table, FIXTURE_MAX_SIZE)
            .into_iter()
            .map(|c| repeat_unit_smiles(&c, &table).map(|s| (c, s)))
            .collect::<std::result::Result<_, _>>()?;
    // one row per distinct unit
    let mut seen = BTreeSet::new();
    let comps: Vec<(GroupComposition, String)> = comps
        .into_iter()
        .filter(|(_, s)| seen.insert(s.clone()))
        .collect();
    Ok(vec![
        (
            "groups_illustrative.csv",
            groups_csv(&illustrative_groups())?,
        ),
        ("groups_extended.csv", groups_csv(&extended_groups())?),
        ("kinetics.csv", kinetics_csv(&comps)?),
        (
            "density.csv",
            thermo_csv(&comps, &table, N_DENSITY, 11, "g/cm^3", |t| t.rho / 1000.0)?,
        ),
        (
            "conductivity.csv",
            thermo_csv(&comps, &table, N_CONDUCTIVITY, 12, "W/(m*K)", |t| t.kappa)?,
        ),
        (
            "heat_capacity.csv",
            thermo_csv(&comps, &table, N_HEAT_CAPACITY, 13, "cal/(g*C)", |t| {
                t.c_p / CAL
            })?,
        ),
        ("experimental.csv", experimental_csv(&table)?),
    ])
}

pub fn write_fixtures(dir: &Path) -> Result<Vec<String>> {
    let mut written = Vec::new();
    for (name, text) in build_fixtures()? {
        let path = dir.join(name);
        write_text(&path, &text)?;
        written.push(path.display().to_string());
    }
    Ok(written)
}
