#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

/// Small forests, a level-1 grid and short training, so the full stage chain
/// runs in well under a minute.
pub const LIGHT_CONFIG: &str = r#"
seed = 3
workers = 1

[surrogates]
n_trees = 50

[predictors]
fingerprint_bits = 512

[predictors.forest]
n_trees = 40

[uq]
level = 1
default_count = 2

[train]
fingerprint_bits = 256

[train.phase1]
epochs = 30
hidden = [32]

[train.phase2]
epochs = 60
hidden = [32]
n_splits = 3
"#;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_polytrinity")
}

pub struct Outcome {
    pub code: i32,
    pub stderr: String,
}

pub fn run(config: &Path, out: &Path, args: &[&str]) -> Outcome {
    let o = Command::new(bin())
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn polytrinity");
    Outcome {
        code: o.status.code().unwrap_or(-1),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    }
}

pub const CHAIN: [&[&str]; 7] = [
    &["gen-polymers"],
    &["fit-surrogates"],
    &["simulate"],
    &["uq"],
    &["pretrain"],
    &["finetune"],
    &["report"],
];

/// Runs the stage chain, stopping at the first failure.
pub fn run_chain(config: &Path, out: &Path) -> Result<(), String> {
    for args in CHAIN {
        let o = run(config, out, args);
        if o.code != 0 {
            return Err(format!("{args:?} exited {}: {}", o.code, o.stderr));
        }
    }
    Ok(())
}

/// Relative path -> bytes for every file under `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut m = BTreeMap::new();
    walk(dir, dir, &mut m);
    m
}

/// Reads every output back through the library's own readers.
pub fn reingest(out: &Path) -> Result<(), String> {
    use polytrinity::config::PipelineConfig;
    use polytrinity::ingest::DatasetManifest;
    use polytrinity::io::{load_checkpoint, read_csv, read_json, read_jsonl};
    use polytrinity::predictors::ThermoPredictors;
    use polytrinity::stages::{files, kinds, ImprovementRow, UqCheckRow, UqRow};
    use polytrinity_core::forest::Surrogates;
    use polytrinity_core::polygen::PolymerRecord;
    use polytrinity_core::twophase::{MetricRow, MlpModel, Phase1Models};

    fn e(what: &str) -> impl Fn(polytrinity::error::PipelineError) -> String + '_ {
        move |err| format!("{what}: {err}")
    }
    let p = |name: &str| out.join(name);
    PipelineConfig::load(&p(files::CONFIG)).map_err(e("config"))?;
    for f in [
        files::POLYMERS,
        files::CANDIDATES,
        files::SYNTHETIC,
        files::FAILURES,
    ] {
        read_jsonl::<PolymerRecord>(&p(f)).map_err(e(f))?;
    }
    let syn: Vec<PolymerRecord> = read_jsonl(&p(files::SYNTHETIC)).map_err(e("synthetic"))?;
    if syn.is_empty() || syn.iter().any(|r| r.labels.is_none()) {
        return Err("synthetic dataset is empty or unlabeled".into());
    }
    load_checkpoint::<Surrogates>(&p(files::SURROGATES), kinds::SURROGATES)
        .map_err(e("surrogates"))?;
    load_checkpoint::<ThermoPredictors>(&p(files::PREDICTORS), kinds::PREDICTORS)
        .map_err(e("predictors"))?;
    load_checkpoint::<Phase1Models>(&p(files::PHASE1), kinds::PHASE1).map_err(e("phase1"))?;
    for f in [files::FINETUNED_T_IG, files::FINETUNED_PHRR] {
        load_checkpoint::<MlpModel>(&p(f), kinds::FINETUNED).map_err(e(f))?;
    }
    for f in [
        files::PRETRAIN_METRICS,
        files::FINETUNE_METRICS,
        files::BASELINE_METRICS,
    ] {
        let rows: Vec<MetricRow> = read_csv(&p(f)).map_err(e(f))?;
        if rows.is_empty() {
            return Err(format!("{f} is empty"));
        }
    }
    read_csv::<UqRow>(&p(files::UQ_REPORT)).map_err(e("uq report"))?;
    read_csv::<UqCheckRow>(&p(files::UQ_CHECKS)).map_err(e("uq checks"))?;
    let imp: Vec<ImprovementRow> = read_csv(&p(files::IMPROVEMENT)).map_err(e("improvement"))?;
    if imp.len() != 2 {
        return Err(format!("improvement table has {} rows", imp.len()));
    }
    read_json::<DatasetManifest>(&p(files::MANIFEST)).map_err(e("manifest"))?;
    for f in [
        files::GENERATION,
        files::FIT_REPORT,
        files::SIMULATION,
        files::PRETRAIN_SUMMARY,
    ] {
        read_json::<serde_json::Value>(&p(f)).map_err(e(f))?;
    }
    Ok(())
}
