//! The pipeline stages behind the CLI subcommands. Each stage reads its
//! inputs from the output directory (or the configured data sources) and
//! writes its results back there.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use polytrinity_core::forest::{fit_surrogates, SurrogateReport, Surrogates};
use polytrinity_core::polygen::{
    apply_filter, canonical_smiles, composition_count, generate_polymers, ConeLabels, FilterReport,
    PolymerRecord, Provenance,
};
use polytrinity_core::rompyro::{batch_simulate, simulate_cone, MaterialInput};
use polytrinity_core::twophase::{
    baseline_single_phase, finetune_phase2, improvement, pretrain_phase1, ClassifierReport,
    MetricRow, MlpModel, Phase1Models, SplitOutcome, Target, TwoPhaseConfig,
};
use polytrinity_core::uqpcm::{quantify_polymer, INPUT_NAMES};

use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result};
use crate::ingest::{
    ingest_experimental, ingest_groups, ingest_kinetics, ingest_thermo, synthetic_summary,
    DatasetFile, DatasetManifest, ExperimentalRow, ThermoProperty,
};
use crate::io::{
    load_checkpoint, read_csv, read_jsonl, read_text, save_checkpoint, sha256_hex, write_csv,
    write_json, write_jsonl,
};
use crate::predictors::{PredictorReport, ThermoPredictors};

/// File names inside the output directory.
pub mod files {
    pub const CONFIG: &str = "config.toml";
    pub const POLYMERS: &str = "polymers.jsonl";
    pub const GENERATION: &str = "generation.json";
    pub const SURROGATES: &str = "surrogates.json";
    pub const PREDICTORS: &str = "predictors.json";
    pub const FIT_REPORT: &str = "fit_report.json";
    pub const CANDIDATES: &str = "candidates.jsonl";
    pub const SYNTHETIC: &str = "synthetic.jsonl";
    pub const FAILURES: &str = "sim_failures.jsonl";
    pub const SIMULATION: &str = "simulation.json";
    pub const HRR: &str = "hrr_curve.csv";
    pub const UQ_REPORT: &str = "uq_report.csv";
    pub const UQ_CHECKS: &str = "uq_checks.csv";
    pub const PHASE1: &str = "phase1.json";
    pub const PRETRAIN_METRICS: &str = "pretrain_metrics.csv";
    pub const PRETRAIN_SUMMARY: &str = "pretrain.json";
    pub const FINETUNE_METRICS: &str = "finetune_metrics.csv";
    pub const FINETUNED_T_IG: &str = "finetuned_t_ig.json";
    pub const FINETUNED_PHRR: &str = "finetuned_phrr.json";
    pub const PREDICTIONS: &str = "finetune_predictions.csv";
    pub const BASELINE_METRICS: &str = "baseline_metrics.csv";
    pub const IMPROVEMENT: &str = "improvement.csv";
    pub const MANIFEST: &str = "manifest.json";
    pub const MANIFEST_CSV: &str = "manifest.csv";
    pub const INGESTED: &str = "ingested";
}

pub mod kinds {
    pub const SURROGATES: &str = "kinetics-surrogates";
    pub const PREDICTORS: &str = "thermo-predictors";
    pub const PHASE1: &str = "phase1-models";
    pub const FINETUNED: &str = "finetuned-regressor";
}

pub struct Context {
    pub cfg: PipelineConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn new(cfg: PipelineConfig) -> Self {
        let out = PathBuf::from(&cfg.out);
        Context { cfg, out }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn require(&self, name: &str, producer: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(PipelineError::Config(format!(
                "{} not found; run `{producer}` first",
                p.display()
            )))
        }
    }

    pub fn persist_config(&self) -> Result<()> {
        self.cfg.save(&self.path(files::CONFIG))
    }
}

fn timed<T>(stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t0 = Instant::now();
    let r = f();
    match &r {
        Ok(_) => log::info!("{stage}: done in {:.2} s", t0.elapsed().as_secs_f64()),
        Err(e) => log::error!("{stage}: {e}"),
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub group_source: String,
    pub n_groups: usize,
    pub max_size: usize,
    pub n_compositions: usize,
    pub closed_form_count: u128,
    pub n_duplicates: usize,
    pub n_records: usize,
}

pub fn gen_polymers(ctx: &Context) -> Result<GenerationSummary> {
    timed("gen-polymers", || {
        let (table, _) = ingest_groups(&ctx.cfg.paths.groups)?;
        let max_size = ctx.cfg.generation.max_size;
        let gen = generate_polymers(&table, max_size)?;
        write_jsonl(&ctx.path(files::POLYMERS), &gen.records)?;
        let s = GenerationSummary {
            group_source: ctx.cfg.paths.groups.clone(),
            n_groups: table.len(),
            max_size,
            n_compositions: gen.n_compositions,
            closed_form_count: composition_count(table.len(), max_size),
            n_duplicates: gen.n_duplicates,
            n_records: gen.records.len(),
        };
        log::info!(
            "gen-polymers: {} compositions, {} duplicates, {} records",
            s.n_compositions,
            s.n_duplicates,
            s.n_records
        );
        write_json(&ctx.path(files::GENERATION), &s)?;
        Ok(s)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub kinetics_rows: usize,
    pub kinetics_range_warnings: usize,
    pub surrogates: SurrogateReport,
    pub predictors: Vec<PredictorReport>,
}

pub fn fit_surrogate_models(ctx: &Context) -> Result<FitSummary> {
    timed("fit-surrogates", || {
        let cfg = &ctx.cfg;
        let (kin, _) = ingest_kinetics(&cfg.paths.kinetics)?;
        let s = fit_surrogates(&kin, &cfg.surrogate_params(), cfg.surrogates.test_fraction)?;
        save_checkpoint(&ctx.path(files::SURROGATES), kinds::SURROGATES, &s)?;

        let (rho, _) = ingest_thermo(&cfg.paths.density, ThermoProperty::Rho)?;
        let (kappa, _) = ingest_thermo(&cfg.paths.conductivity, ThermoProperty::Kappa)?;
        let (c_p, _) = ingest_thermo(&cfg.paths.heat_capacity, ThermoProperty::CP)?;
        let p = &cfg.predictors;
        let (pred, reports) = ThermoPredictors::fit(
            &rho,
            &kappa,
            &c_p,
            p.fingerprint_bits,
            p.fingerprint_radius,
            &cfg.predictor_params(),
        )?;
        save_checkpoint(&ctx.path(files::PREDICTORS), kinds::PREDICTORS, &pred)?;
        let summary = FitSummary {
            kinetics_rows: kin.len(),
            kinetics_range_warnings: s.warnings.len(),
            surrogates: s.report.clone(),
            predictors: reports,
        };
        write_json(&ctx.path(files::FIT_REPORT), &summary)?;
        Ok(summary)
    })
}

/// Fills dT, T_p and the thermophysical inputs from the fitted models.
pub fn fill_inputs(
    records: Vec<PolymerRecord>,
    surrogates: &Surrogates,
    predictors: &ThermoPredictors,
) -> Result<Vec<PolymerRecord>> {
    records
        .into_par_iter()
        .map(|mut r| {
            let gc = r.gc.ok_or_else(|| {
                PipelineError::schema(
                    files::POLYMERS,
                    format!("{} has no group-contribution values", r.canonical_smiles),
                )
            })?;
            let d_t = surrogates.predict_dt(gc.eta_c, gc.h_c)?;
            r.d_t = Some(d_t);
            r.t_p = Some(surrogates.predict_tp(gc.eta_c, gc.h_c, d_t)?);
            r.thermophysical = Some(predictors.predict(&r.canonical_smiles)?);
            Ok(r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub n_records: usize,
    pub filter: FilterReport,
    pub n_labeled: usize,
    pub n_failed: usize,
    pub n_ignitable: usize,
    pub ranges: DatasetManifest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrrPoint {
    pub t_s: f64,
    pub hrr_kw_m2: f64,
}

fn find_record<'a>(records: &'a [PolymerRecord], smiles: &str) -> Result<&'a PolymerRecord> {
    let canon = canonical_smiles(smiles)
        .map_err(|e| PipelineError::schema("smiles", format!("{smiles:?}: {e}")))?;
    records
        .iter()
        .find(|r| r.canonical_smiles == canon)
        .ok_or_else(|| PipelineError::Lookup(format!("unknown polymer {smiles:?}")))
}

/// Labels the generated polymers: surrogates, property predictors, filter,
/// then one cone simulation each. `hrr_for` also writes the HRR curve of one
/// polymer.
pub fn simulate(ctx: &Context, hrr_for: Option<&str>) -> Result<SimulationSummary> {
    timed("simulate", || {
        let records: Vec<PolymerRecord> =
            read_jsonl(&ctx.require(files::POLYMERS, "gen-polymers")?)?;
        let surrogates: Surrogates = load_checkpoint(
            &ctx.require(files::SURROGATES, "fit-surrogates")?,
            kinds::SURROGATES,
        )?;
        let predictors: ThermoPredictors = load_checkpoint(
            &ctx.require(files::PREDICTORS, "fit-surrogates")?,
            kinds::PREDICTORS,
        )?;
        let n_records = records.len();
        let filled = fill_inputs(records, &surrogates, &predictors)?;
        let (kept, filter) = apply_filter(filled)?;
        log::info!(
            "filter: kept {} of {} (dropped mu {}, h_c {}, eta_c {}, dT {})",
            filter.kept,
            filter.input,
            filter.dropped_mu,
            filter.dropped_h_c,
            filter.dropped_eta_c,
            filter.dropped_d_t
        );
        write_jsonl(&ctx.path(files::CANDIDATES), &kept)?;

        if let Some(smiles) = hrr_for {
            let rec = find_record(&kept, smiles)?;
            let mat = MaterialInput::from_record(rec)?;
            let res = simulate_cone(&mat, &ctx.cfg.sim)?;
            let curve: Vec<HrrPoint> = res
                .hrr
                .iter()
                .enumerate()
                .map(|(k, &h)| HrrPoint {
                    t_s: (k + 1) as f64 * res.dt,
                    hrr_kw_m2: h,
                })
                .collect();
            write_csv(&ctx.path(files::HRR), &curve)?;
        }

        let (labeled, failed): (Vec<PolymerRecord>, Vec<PolymerRecord>) =
            batch_simulate(kept, &ctx.cfg.sim)
                .into_iter()
                .partition(|r| r.labels.is_some() && r.error.is_none());
        for f in &failed {
            log::warn!(
                "simulation failed for {}: {}",
                f.canonical_smiles,
                f.error.as_deref().unwrap_or("?")
            );
        }
        write_jsonl(&ctx.path(files::SYNTHETIC), &labeled)?;
        write_jsonl(&ctx.path(files::FAILURES), &failed)?;
        let n_ignitable = labeled
            .iter()
            .filter(|r| r.labels.is_some_and(|l| l.ignitable))
            .count();
        let s = SimulationSummary {
            n_records,
            filter,
            n_labeled: labeled.len(),
            n_failed: failed.len(),
            n_ignitable,
            ranges: synthetic_ranges(&labeled),
        };
        write_json(&ctx.path(files::SIMULATION), &s)?;
        Ok(s)
    })
}

fn synthetic_ranges(labeled: &[PolymerRecord]) -> DatasetManifest {
    let t_ig: Vec<f64> = labeled
        .iter()
        .filter_map(|r| r.labels)
        .map(|l| l.t_ig)
        .collect();
    let phrr: Vec<f64> = labeled
        .iter()
        .filter_map(|r| r.labels)
        .filter(|l| l.ignitable)
        .map(|l| l.phrr)
        .collect();
    synthetic_summary(&t_ig, &phrr)
}

/// Experimental measurements as labeled records.
pub fn experimental_records(cfg: &PipelineConfig) -> Result<Vec<PolymerRecord>> {
    let (rows, _) = ingest_experimental(&cfg.paths.experimental)?;
    Ok(rows
        .iter()
        .map(|r| experimental_record(r, cfg.sim.t_max))
        .collect())
}

fn experimental_record(row: &ExperimentalRow, t_max: f64) -> PolymerRecord {
    let mut rec = PolymerRecord::new(row.smiles.clone(), Provenance::Experimental);
    rec.labels = Some(ConeLabels {
        t_ig: row.t_ig,
        phrr: row.phrr,
        ignitable: row.t_ig < t_max,
    });
    rec
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UqRow {
    pub smiles: String,
    pub output: String,
    pub mean: f64,
    pub std: f64,
    pub lo: f64,
    pub hi: f64,
    pub n_evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UqCheckRow {
    pub smiles: String,
    pub output: String,
    /// `synthetic` label or `experimental` measurement.
    pub reference_kind: String,
    pub reference: f64,
    pub inside: bool,
    pub z: f64,
}

pub fn uq(ctx: &Context, smiles: &[String]) -> Result<(Vec<UqRow>, Vec<UqCheckRow>)> {
    timed("uq", || {
        let synthetic: Vec<PolymerRecord> =
            read_jsonl(&ctx.require(files::SYNTHETIC, "simulate")?)?;
        let targets: Vec<&PolymerRecord> = if smiles.is_empty() {
            synthetic.iter().take(ctx.cfg.uq.default_count).collect()
        } else {
            smiles
                .iter()
                .map(|s| find_record(&synthetic, s))
                .collect::<Result<_>>()?
        };
        let measured: BTreeMap<String, ExperimentalRow> =
            ingest_experimental(&ctx.cfg.paths.experimental)?
                .0
                .into_iter()
                .map(|r| (r.smiles.clone(), r))
                .collect();
        let grid = ctx.cfg.uq.grid(INPUT_NAMES.len())?;
        log::info!("uq: {} polymers, {} nodes each", targets.len(), grid.len());
        let mut rows = Vec::new();
        let mut checks = Vec::new();
        for rec in targets {
            let res = quantify_polymer(rec, &ctx.cfg.uq.errors, &grid, &ctx.cfg.sim)?;
            let labels = rec
                .labels
                .ok_or_else(|| PipelineError::schema(files::SYNTHETIC, "unlabeled record"))?;
            let exp = measured.get(&rec.canonical_smiles);
            for (name, stats, label, meas) in [
                ("t_ig", res.t_ig, labels.t_ig, exp.map(|e| e.t_ig)),
                ("phrr", res.phrr, labels.phrr, exp.map(|e| e.phrr)),
            ] {
                rows.push(UqRow {
                    smiles: rec.canonical_smiles.clone(),
                    output: name.into(),
                    mean: stats.mean,
                    std: stats.std,
                    lo: stats.lo,
                    hi: stats.hi,
                    n_evals: res.n_evals,
                });
                let refs =
                    std::iter::once(("synthetic", label)).chain(meas.map(|m| ("experimental", m)));
                for (kind, value) in refs {
                    let c = stats.check(value);
                    checks.push(UqCheckRow {
                        smiles: rec.canonical_smiles.clone(),
                        output: name.into(),
                        reference_kind: kind.into(),
                        reference: value,
                        inside: c.inside,
                        z: c.z,
                    });
                }
            }
        }
        write_csv(&ctx.path(files::UQ_REPORT), &rows)?;
        write_csv(&ctx.path(files::UQ_CHECKS), &checks)?;
        Ok((rows, checks))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSummary {
    pub n_synthetic: usize,
    pub n_excluded: usize,
    pub n_records: usize,
    pub n_ignitable: usize,
    pub classifier: ClassifierReport,
}

pub fn pretrain(ctx: &Context) -> Result<PretrainSummary> {
    timed("pretrain", || {
        let synthetic: Vec<PolymerRecord> =
            read_jsonl(&ctx.require(files::SYNTHETIC, "simulate")?)?;
        let n_synthetic = synthetic.len();
        let corpus: Vec<PolymerRecord> = if ctx.cfg.train.exclude_experimental {
            let exp: Vec<String> = experimental_records(&ctx.cfg)?
                .into_iter()
                .map(|r| r.canonical_smiles)
                .collect();
            synthetic
                .into_iter()
                .filter(|r| !exp.contains(&r.canonical_smiles))
                .collect()
        } else {
            synthetic
        };
        let m = pretrain_phase1(&corpus, &ctx.cfg.two_phase())?;
        save_checkpoint(&ctx.path(files::PHASE1), kinds::PHASE1, &m)?;
        write_csv(&ctx.path(files::PRETRAIN_METRICS), &m.metrics)?;
        let s = PretrainSummary {
            n_synthetic,
            n_excluded: n_synthetic - corpus.len(),
            n_records: m.n_records,
            n_ignitable: m.n_ignitable,
            classifier: m.classifier_report.clone(),
        };
        write_json(&ctx.path(files::PRETRAIN_SUMMARY), &s)?;
        Ok(s)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub smiles: String,
    pub target: String,
    pub measured: f64,
    pub predicted: f64,
}

fn metric_rows(outcomes: &[SplitOutcome]) -> Vec<MetricRow> {
    outcomes
        .iter()
        .flat_map(|o| o.rows.iter().cloned())
        .collect()
}

fn check_features(model: &MlpModel, tp: &TwoPhaseConfig) -> Result<()> {
    if model.n_inputs() != tp.fingerprint_bits {
        return Err(PipelineError::Config(format!(
            "pretrained models take {} features but train.fingerprint_bits = {}",
            model.n_inputs(),
            tp.fingerprint_bits
        )));
    }
    Ok(())
}

/// Finetunes the pretrained regressors on the experimental data over the
/// configured splits, and runs the baseline unless disabled.
pub fn finetune(ctx: &Context) -> Result<Vec<MetricRow>> {
    timed("finetune", || {
        let m: Phase1Models =
            load_checkpoint(&ctx.require(files::PHASE1, "pretrain")?, kinds::PHASE1)?;
        let tp = ctx.cfg.two_phase();
        check_features(&m.t_ig, &tp)?;
        let exp = experimental_records(&ctx.cfg)?;
        let out = finetune_phase2(&m, &exp, &tp)?;
        let rows = metric_rows(&out);
        write_csv(&ctx.path(files::FINETUNE_METRICS), &rows)?;
        save_checkpoint(
            &ctx.path(files::FINETUNED_T_IG),
            kinds::FINETUNED,
            &out[0].best_model,
        )?;
        save_checkpoint(
            &ctx.path(files::FINETUNED_PHRR),
            kinds::FINETUNED,
            &out[1].best_model,
        )?;

        let mut preds = Vec::new();
        for o in &out {
            for r in &exp {
                let x = polytrinity_core::twophase::featurize(
                    &r.canonical_smiles,
                    tp.fingerprint_bits,
                    tp.fingerprint_radius,
                )?;
                let l = r.labels.expect("experimental records are labeled");
                preds.push(PredictionRow {
                    smiles: r.canonical_smiles.clone(),
                    target: o.target.name().into(),
                    measured: if o.target == Target::TIg {
                        l.t_ig
                    } else {
                        l.phrr
                    },
                    predicted: o.best_model.predict(&x)?,
                });
            }
        }
        write_csv(&ctx.path(files::PREDICTIONS), &preds)?;
        if ctx.cfg.train.with_baseline {
            baseline(ctx)?;
        }
        Ok(rows)
    })
}

pub fn baseline(ctx: &Context) -> Result<Vec<MetricRow>> {
    timed("baseline", || {
        let exp = experimental_records(&ctx.cfg)?;
        let out = baseline_single_phase(&exp, &ctx.cfg.two_phase())?;
        let rows = metric_rows(&out);
        write_csv(&ctx.path(files::BASELINE_METRICS), &rows)?;
        Ok(rows)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub target: String,
    pub n_splits: usize,
    pub baseline_test_rel_mse: f64,
    pub twophase_test_rel_mse: f64,
    pub improvement: f64,
}

fn mean_test(rows: &[MetricRow], target: &str) -> Option<(f64, usize)> {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.target == target)
        .map(|r| r.test_rel_mse)
        .collect();
    (!v.is_empty()).then(|| (v.iter().sum::<f64>() / v.len() as f64, v.len()))
}

pub fn improvement_table(
    finetuned: &[MetricRow],
    baseline: &[MetricRow],
) -> Result<Vec<ImprovementRow>> {
    [Target::TIg, Target::Phrr]
        .into_iter()
        .map(|t| {
            let name = t.name();
            let (two, n) = mean_test(finetuned, name)
                .ok_or_else(|| PipelineError::Config(format!("no finetune metrics for {name}")))?;
            let (base, _) = mean_test(baseline, name)
                .ok_or_else(|| PipelineError::Config(format!("no baseline metrics for {name}")))?;
            Ok(ImprovementRow {
                target: name.into(),
                n_splits: n,
                baseline_test_rel_mse: base,
                twophase_test_rel_mse: two,
                improvement: improvement(base, two),
            })
        })
        .collect()
}

/// Ingests every configured dataset, returning the manifest and the typed
/// records written under `ingested/`.
pub fn ingest_all(ctx: &Context, write_records: bool) -> Result<DatasetManifest> {
    let p = &ctx.cfg.paths;
    let mut m = DatasetManifest::default();
    let (table, gm) = ingest_groups(&p.groups)?;
    m.merge(gm);
    let (kin, km) = ingest_kinetics(&p.kinetics)?;
    m.merge(km);
    let dir = ctx.path(files::INGESTED);
    for (prop, src, name) in [
        (ThermoProperty::Rho, &p.density, "density.jsonl"),
        (ThermoProperty::Kappa, &p.conductivity, "conductivity.jsonl"),
        (ThermoProperty::CP, &p.heat_capacity, "heat_capacity.jsonl"),
    ] {
        let (rows, tm) = ingest_thermo(src, prop)?;
        m.merge(tm);
        if write_records {
            write_jsonl(&dir.join(name), &rows)?;
        }
    }
    let (exp, em) = ingest_experimental(&p.experimental)?;
    m.merge(em);
    if write_records {
        write_jsonl(&dir.join("groups.jsonl"), table.groups())?;
        write_jsonl(&dir.join("kinetics.jsonl"), &kin)?;
        write_jsonl(&dir.join("experimental.jsonl"), &exp)?;
    }
    Ok(m)
}

fn write_manifest(ctx: &Context, m: &DatasetManifest) -> Result<()> {
    write_json(&ctx.path(files::MANIFEST), m)?;
    write_csv(&ctx.path(files::MANIFEST_CSV), &m.properties)
}

pub fn ingest(ctx: &Context) -> Result<DatasetManifest> {
    timed("ingest", || {
        let m = ingest_all(ctx, true)?;
        write_manifest(ctx, &m)?;
        Ok(m)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub improvement: Vec<ImprovementRow>,
    pub manifest: DatasetManifest,
}

/// Improvement table plus a manifest covering the inputs and, when present,
/// the synthetic dataset.
pub fn report(ctx: &Context) -> Result<Report> {
    timed("report", || {
        let ft: Vec<MetricRow> = read_csv(&ctx.require(files::FINETUNE_METRICS, "finetune")?)?;
        let bl: Vec<MetricRow> = read_csv(&ctx.require(files::BASELINE_METRICS, "baseline")?)?;
        let table = improvement_table(&ft, &bl)?;
        for r in &table {
            log::info!(
                "{}: baseline {:.4}, two-phase {:.4}, improvement {:.1} %",
                r.target,
                r.baseline_test_rel_mse,
                r.twophase_test_rel_mse,
                100.0 * r.improvement
            );
        }
        write_csv(&ctx.path(files::IMPROVEMENT), &table)?;
        let mut manifest = ingest_all(ctx, false)?;
        let syn = ctx.path(files::SYNTHETIC);
        if syn.exists() {
            manifest.merge(synthetic_manifest(&syn)?);
        }
        write_manifest(ctx, &manifest)?;
        Ok(Report {
            improvement: table,
            manifest,
        })
    })
}

fn synthetic_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = read_text(path)?;
    let records: Vec<PolymerRecord> = read_jsonl(path)?;
    let mut m = synthetic_ranges(&records);
    m.files.push(DatasetFile {
        name: "synthetic".into(),
        source: files::SYNTHETIC.into(),
        rows: records.len(),
        sha256: sha256_hex(text.as_bytes()),
    });
    Ok(m)
}

/// Every stage in order, with the default UQ selection.
pub fn run_all(ctx: &Context) -> Result<Report> {
    gen_polymers(ctx)?;
    fit_surrogate_models(ctx)?;
    simulate(ctx, None)?;
    uq(ctx, &[])?;
    pretrain(ctx)?;
    finetune(ctx)?;
    if !ctx.cfg.train.with_baseline {
        baseline(ctx)?;
    }
    report(ctx)
}
