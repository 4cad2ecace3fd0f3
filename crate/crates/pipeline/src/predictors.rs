//! Thermophysical property predictors: random forests over log-count
//! fingerprints, restricted to the bins seen in training.

use serde::{Deserialize, Serialize};

use polytrinity_core::chemio::{fingerprint, parse_smiles};
use polytrinity_core::forest::{fit_forest, Forest, ForestParams};
use polytrinity_core::polygen::Thermophysical;
use polytrinity_core::rng::derive_seed;
use polytrinity_core::twophase::relative_mse;

use crate::error::{PipelineError, Result};
use crate::ingest::{ThermoProperty, ThermoRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyPredictor {
    pub property: ThermoProperty,
    pub n_bits: usize,
    pub radius: u32,
    /// Fingerprint bins used as features.
    pub columns: Vec<usize>,
    pub forest: Forest,
}

/// Fit quality of one predictor. Training uses every row; the homopolymer
/// rows are scored as the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorReport {
    pub property: String,
    pub n_train: usize,
    pub n_homopolymer: usize,
    pub train_rel_mse: f64,
    pub homopolymer_rel_mse: Option<f64>,
    /// Published error of the transformer predictors this replaces.
    pub reference_rel_mse: f64,
}

fn full_features(smiles: &str, n_bits: usize, radius: u32) -> Result<Vec<f64>> {
    let g = parse_smiles(smiles)
        .map_err(|e| PipelineError::schema("smiles", format!("{smiles:?}: {e}")))?;
    Ok(fingerprint(&g, radius, n_bits).log_features())
}

impl PropertyPredictor {
    pub fn features(&self, smiles: &str) -> Result<Vec<f64>> {
        let full = full_features(smiles, self.n_bits, self.radius)?;
        Ok(self.columns.iter().map(|&c| full[c]).collect())
    }

    /// Prediction in SI units.
    pub fn predict(&self, smiles: &str) -> Result<f64> {
        Ok(self.forest.predict(&self.features(smiles)?)?)
    }
}

fn reference_rel_mse(p: ThermoProperty) -> f64 {
    match p {
        ThermoProperty::Rho => 0.0327,
        ThermoProperty::Kappa => 0.1635,
        ThermoProperty::CP => 0.0582,
    }
}

pub fn fit_property(
    rows: &[ThermoRow],
    property: ThermoProperty,
    n_bits: usize,
    radius: u32,
    params: &ForestParams,
) -> Result<(PropertyPredictor, PredictorReport)> {
    if rows.is_empty() {
        return Err(PipelineError::EmptyFile(property.name().into()));
    }
    let full: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| full_features(&r.smiles, n_bits, radius))
        .collect::<Result<_>>()?;
    let columns: Vec<usize> = (0..n_bits)
        .filter(|&c| full.iter().any(|f| f[c] != 0.0))
        .collect();
    let xs: Vec<Vec<f64>> = full
        .iter()
        .map(|f| columns.iter().map(|&c| f[c]).collect())
        .collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let forest = fit_forest(&xs, &ys, params)?;
    let pred = forest.predict_many(&xs)?;
    let train_rel_mse = relative_mse(&ys, &pred)?;
    let homo: Vec<usize> = (0..rows.len())
        .filter(|&i| rows[i].is_homopolymer == Some(true))
        .collect();
    let homopolymer_rel_mse = if homo.is_empty() {
        None
    } else {
        let t: Vec<f64> = homo.iter().map(|&i| ys[i]).collect();
        let p: Vec<f64> = homo.iter().map(|&i| pred[i]).collect();
        Some(relative_mse(&t, &p)?)
    };
    let report = PredictorReport {
        property: property.name().into(),
        n_train: rows.len(),
        n_homopolymer: homo.len(),
        train_rel_mse,
        homopolymer_rel_mse,
        reference_rel_mse: reference_rel_mse(property),
    };
    Ok((
        PropertyPredictor {
            property,
            n_bits,
            radius,
            columns,
            forest,
        },
        report,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoPredictors {
    pub rho: PropertyPredictor,
    pub kappa: PropertyPredictor,
    pub c_p: PropertyPredictor,
}

impl ThermoPredictors {
    pub fn fit(
        rho: &[ThermoRow],
        kappa: &[ThermoRow],
        c_p: &[ThermoRow],
        n_bits: usize,
        radius: u32,
        params: &ForestParams,
    ) -> Result<(Self, Vec<PredictorReport>)> {
        let sub = |k: u64| ForestParams {
            seed: derive_seed(params.seed, k),
            ..*params
        };
        let (rho, r1) = fit_property(rho, ThermoProperty::Rho, n_bits, radius, &sub(0))?;
        let (kappa, r2) = fit_property(kappa, ThermoProperty::Kappa, n_bits, radius, &sub(1))?;
        let (c_p, r3) = fit_property(c_p, ThermoProperty::CP, n_bits, radius, &sub(2))?;
        Ok((ThermoPredictors { rho, kappa, c_p }, vec![r1, r2, r3]))
    }

    pub fn predict(&self, smiles: &str) -> Result<Thermophysical> {
        Ok(Thermophysical {
            rho: self.rho.predict(smiles)?,
            kappa: self.kappa.predict(smiles)?,
            c_p: self.c_p.predict(smiles)?,
        })
    }
}
