use serde::{Deserialize, Serialize};

use super::config::DefenseKind;
use crate::data::{triggered_copy, Dataset, TriggerSpec};
use crate::error::{Error, Result};
use crate::nn::Model;

/// Final scores, all fractions in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub asr: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub cad: f64,
    /// False when no attacker was ever selected; `tpr` is then 1.0 by
    /// convention.
    pub tpr_defined: bool,
    /// False when no benign client was ever selected; `fpr` is then 0.0.
    pub fpr_defined: bool,
}

/// Detection counts of one round. "Positive" means excluded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    /// `selected` are the participants whose models were aggregated.
    pub fn of_round(participants: &[(usize, bool)], selected: &[usize]) -> Self {
        let mut c = Confusion::default();
        for &(id, malicious) in participants {
            let kept = selected.contains(&id);
            match (malicious, kept) {
                (true, false) => c.tp += 1,
                (true, true) => c.fn_ += 1,
                (false, false) => c.fp += 1,
                (false, true) => c.tn += 1,
            }
        }
        c
    }
}

/// Fraction of triggered test images classified as the target label. Labels
/// are ignored, so target-class images count too.
pub fn compute_asr(model: &Model, clean_test: &Dataset, spec: &TriggerSpec) -> Result<f64> {
    if clean_test.is_empty() {
        return Err(Error::InvalidArgument("ASR needs a nonempty test set".into()));
    }
    let triggered = triggered_copy(clean_test, spec);
    let idx: Vec<usize> = (0..triggered.len()).collect();
    let mut hits = 0usize;
    for chunk in idx.chunks(256) {
        hits += model
            .predict(&triggered.batch(chunk))?
            .iter()
            .filter(|&&p| p == spec.target_label)
            .count();
    }
    Ok(hits as f64 / triggered.len() as f64)
}

/// Cumulative rates over all rounds: `Σtp / Σ(tp+fn)` and `Σfp / Σ(fp+tn)`,
/// with the defined flags.
pub fn compute_tpr_fpr(rounds: &[Confusion]) -> (f64, f64, bool, bool) {
    let (tp, fp, tn, fn_) = rounds.iter().fold((0, 0, 0, 0), |a, c| {
        (a.0 + c.tp, a.1 + c.fp, a.2 + c.tn, a.3 + c.fn_)
    });
    let tpr_defined = tp + fn_ > 0;
    let fpr_defined = fp + tn > 0;
    let tpr = if tpr_defined { tp as f64 / (tp + fn_) as f64 } else { 1.0 };
    let fpr = if fpr_defined { fp as f64 / (fp + tn) as f64 } else { 0.0 };
    (tpr, fpr, tpr_defined, fpr_defined)
}

/// Composite score: `(acc + 1−asr + tpr + 1−fpr) / 4`, or `(acc + 1−asr) / 2`
/// for FedCLP, which never excludes anyone.
pub fn compute_cad(acc: f64, asr: f64, tpr: f64, fpr: f64, defense: DefenseKind) -> f64 {
    if defense == DefenseKind::FedClp {
        (acc + (1.0 - asr)) / 2.0
    } else {
        (acc + (1.0 - asr) + tpr + (1.0 - fpr)) / 4.0
    }
}
