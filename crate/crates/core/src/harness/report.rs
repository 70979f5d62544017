use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{Confusion, Metrics};
use super::run::{run_experiment, Digest, ExperimentResult, RoundReport};
use crate::error::{Error, Result};

pub const ROUNDS_CSV: &str = "rounds.csv";
pub const REPORT_JSON: &str = "report.json";
pub const SWEEP_CSV: &str = "sweep.csv";

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// The JSON document written next to the round CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub config: ExperimentConfig,
    pub metrics: Metrics,
    /// How TPR/FPR aggregate over rounds.
    pub accounting: String,
    pub rounds: Vec<RoundReport>,
}

fn rounded_metrics(m: &Metrics) -> Metrics {
    Metrics {
        acc: round6(m.acc),
        asr: round6(m.asr),
        tpr: round6(m.tpr),
        fpr: round6(m.fpr),
        cad: round6(m.cad),
        ..*m
    }
}

fn rounded_report(r: &RoundReport) -> RoundReport {
    RoundReport {
        acc: round6(r.acc),
        asr: round6(r.asr),
        digest: Digest {
            inter_center_distance: r.digest.inter_center_distance.map(round6),
            clip_bound: r.digest.clip_bound.map(round6),
            ..r.digest.clone()
        },
        ..r.clone()
    }
}

/// Writes `rounds.csv` and `report.json` into `out_dir` (created if needed)
/// and returns their paths.
pub fn emit_reports(
    result: &ExperimentResult,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let csv_path = out_dir.join(ROUNDS_CSV);
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| csv_err(&csv_path, e))?;
    w.write_record(["round", "acc", "asr", "tp", "fp", "tn", "fn", "selected_ids"])
        .map_err(|e| csv_err(&csv_path, e))?;
    for r in &result.rounds {
        let Confusion { tp, fp, tn, fn_ } = r.confusion;
        let ids: Vec<String> = r.selected_ids.iter().map(usize::to_string).collect();
        w.write_record([
            r.round.to_string(),
            format!("{:.6}", r.acc),
            format!("{:.6}", r.asr),
            tp.to_string(),
            fp.to_string(),
            tn.to_string(),
            fn_.to_string(),
            ids.join(";"),
        ])
        .map_err(|e| csv_err(&csv_path, e))?;
    }
    w.flush().map_err(io_err(&csv_path))?;

    let doc = ReportDocument {
        config: config.clone(),
        metrics: rounded_metrics(&result.metrics),
        accounting: "cumulative: tpr = sum(tp)/sum(tp+fn), fpr = sum(fp)/sum(fp+tn) over all rounds; \
                     positive = excluded by the defense; tpr is 1.0 when tpr_defined is false"
            .into(),
        rounds: result.rounds.iter().map(rounded_report).collect(),
    };
    let json_path = out_dir.join(REPORT_JSON);
    let text = serde_json::to_string_pretty(&doc)?;
    fs::write(&json_path, text + "\n").map_err(io_err(&json_path))?;
    Ok((csv_path, json_path))
}

pub fn read_report(path: &Path) -> Result<ReportDocument> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// One sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub out_dir: PathBuf,
    pub metrics: Metrics,
}

/// Runs `base` once per value of `param`, each into
/// `<out_dir>/<param>=<value>/`, and writes a `sweep.csv` summary into
/// `out_dir`.
pub fn run_sweep(base: &ExperimentConfig, param: &str, values: &[String]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut configs = Vec::with_capacity(values.len());
    for v in values {
        let mut cfg = base.clone();
        cfg.set(param, v)?;
        cfg.out_dir = base.out_dir.join(format!("{param}={v}"));
        cfg.validate()?;
        configs.push(cfg);
    }
    let mut points = Vec::with_capacity(values.len());
    for (v, cfg) in values.iter().zip(configs) {
        log::info!("sweep {param} = {v}");
        let result = run_experiment(&cfg)?;
        emit_reports(&result, &cfg, &cfg.out_dir)?;
        points.push(SweepPoint {
            value: v.clone(),
            out_dir: cfg.out_dir,
            metrics: result.metrics,
        });
    }
    fs::create_dir_all(&base.out_dir).map_err(io_err(&base.out_dir))?;
    let path = base.out_dir.join(SWEEP_CSV);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record([param, "acc", "asr", "tpr", "fpr", "cad"])
        .map_err(|e| csv_err(&path, e))?;
    for p in &points {
        let m = &p.metrics;
        w.write_record([
            p.value.clone(),
            format!("{:.6}", m.acc),
            format!("{:.6}", m.asr),
            format!("{:.6}", m.tpr),
            format!("{:.6}", m.fpr),
            format!("{:.6}", m.cad),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(points)
}
