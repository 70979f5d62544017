use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DefenseKind, ExperimentConfig};
use super::metrics::{compute_asr, compute_cad, compute_tpr_fpr, Confusion, Metrics};
use crate::attacks::{attacker_local_train, honest_local_train, AttackKind, RoundShape};
use crate::data::{dirichlet_partition, Dataset};
use crate::defenses::{
    fed_avg, fed_clp, mars, multi_krum, norm_clip, DefenseOutcome, LocalUpdate,
};
use crate::error::{Error, Result};
use crate::nn::{evaluate, Model};
use crate::rng::{derive, rng_at, stream};

/// Short summary of what the defense saw in one round.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Digest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inter_center_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_sizes: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pruned_channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_bound: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub acc: f64,
    pub asr: f64,
    pub selected_ids: Vec<usize>,
    pub excluded_ids: Vec<usize>,
    /// Ids of this round's malicious participants.
    pub attacker_ids: Vec<usize>,
    #[serde(flatten)]
    pub confusion: Confusion,
    pub digest: Digest,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub metrics: Metrics,
    pub rounds: Vec<RoundReport>,
    pub final_model: Model,
}

/// Client ids `0..attackers_total` are malicious, the rest benign.
pub fn is_attacker(cfg: &ExperimentConfig, client: usize) -> bool {
    client < cfg.attackers_total
}

/// Participants of `round`, ascending by id: attackers round-robin over the
/// attacker pool, benign clients drawn without replacement from the round's
/// selection stream.
pub fn schedule(cfg: &ExperimentConfig, round: usize) -> Vec<usize> {
    let a = cfg.attackers_total;
    let mut ids: Vec<usize> = (0..cfg.attackers_per_round)
        .map(|j| (round * cfg.attackers_per_round + j) % a)
        .collect();
    let benign_pool = cfg.total_clients - a;
    let need = cfg.clients_per_round - cfg.attackers_per_round;
    let mut rng = rng_at(cfg.seed, &[stream::SELECT, round as u64]);
    ids.extend(sample(&mut rng, benign_pool, need).into_iter().map(|i| a + i));
    ids.sort_unstable();
    ids
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median delta norm of benign clients trained once from the initial model
/// with no attack present.
fn calibrate_clip_bound(cfg: &ExperimentConfig, initial: &Model, shards: &[Dataset]) -> Result<f64> {
    let benign: Vec<usize> = (cfg.attackers_total..cfg.total_clients).collect();
    if benign.is_empty() {
        return Err(Error::Config("norm-clip calibration needs benign clients".into()));
    }
    let k = cfg.clients_per_round.min(benign.len());
    let mut rng = rng_at(cfg.seed, &[stream::CALIBRATION]);
    let picked: Vec<usize> = sample(&mut rng, benign.len(), k).into_iter().map(|i| benign[i]).collect();
    let base = initial.state_vector();
    let hyper = cfg.train_config();
    let norms: Vec<f64> = picked
        .par_iter()
        .map(|&id| {
            let m = honest_local_train(
                initial,
                &shards[id],
                &hyper,
                derive(cfg.seed, &[stream::CALIBRATION, id as u64]),
            )?;
            Ok(m.state_vector()
                .iter()
                .zip(&base)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt())
        })
        .collect::<Result<_>>()?;
    Ok(median(norms))
}

fn aggregate(
    cfg: &ExperimentConfig,
    updates: &[LocalUpdate],
    previous: &Model,
    clip_bound: Option<f64>,
) -> Result<DefenseOutcome> {
    let d = &cfg.defense;
    match d.kind {
        DefenseKind::FedAvg => fed_avg(updates),
        DefenseKind::Mars | DefenseKind::MarsStar => mars(updates, &d.mars_params()),
        DefenseKind::MultiKrum => {
            let f = d.krum_f.unwrap_or(cfg.attackers_per_round);
            let m = d.krum_m.unwrap_or(updates.len().saturating_sub(f));
            multi_krum(updates, f, m)
        }
        DefenseKind::NormClip => norm_clip(
            updates,
            clip_bound.expect("clip bound resolved before the first round"),
            previous,
        ),
        DefenseKind::FedClp => fed_clp(updates, d.clp_threshold, d.layer_policy),
    }
}

/// Runs the whole federated simulation described by `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (train, test) = cfg.dataset.load(cfg.seed)?;
    cfg.attack
        .trigger
        .validate(train.height(), train.width(), train.num_classes())?;
    let plan = dirichlet_partition(
        &train,
        cfg.total_clients,
        cfg.alpha,
        derive(cfg.seed, &[stream::PARTITION]),
    )?;
    let shards: Vec<Dataset> = plan.assignment.iter().map(|ix| train.subset(ix)).collect();
    let mut global = cfg.architecture.build(
        train.sample_shape(),
        train.num_classes(),
        &mut rng_at(cfg.seed, &[stream::INIT]),
    )?;

    let clip_bound = match (cfg.defense.kind, cfg.defense.clip_bound) {
        (DefenseKind::NormClip, None) if cfg.rounds > 0 => {
            let c = calibrate_clip_bound(cfg, &global, &shards)?;
            log::info!("norm-clip bound calibrated to {c:.6}");
            Some(c)
        }
        (_, c) => c,
    };

    let hyper = cfg.train_config();
    let shape = RoundShape {
        clients: cfg.clients_per_round,
        attackers: cfg.attackers_per_round,
    };
    let mut reports = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let participants = schedule(cfg, round);
        let updates: Vec<LocalUpdate> = participants
            .par_iter()
            .map(|&id| {
                let seed = derive(cfg.seed, &[stream::TRAIN, round as u64, id as u64]);
                let model = if is_attacker(cfg, id) && cfg.attack.kind != AttackKind::None {
                    attacker_local_train(&global, &shards[id], &cfg.attack, &hyper, &shape, seed)?
                } else {
                    honest_local_train(&global, &shards[id], &hyper, seed)?
                };
                Ok(LocalUpdate { client_id: id, model })
            })
            .collect::<Result<_>>()?;

        let outcome = aggregate(cfg, &updates, &global, clip_bound)?;
        global = outcome.global;

        let acc = evaluate(&global, &test)?;
        let asr = compute_asr(&global, &test, &cfg.attack.trigger)?;
        let flagged: Vec<(usize, bool)> = participants
            .iter()
            .map(|&id| (id, is_attacker(cfg, id) && cfg.attack.kind != AttackKind::None))
            .collect();
        let confusion = Confusion::of_round(&flagged, &outcome.selected_ids);
        let diag = outcome.diagnostics;
        let digest = Digest {
            inter_center_distance: diag.cluster.as_ref().map(|c| c.inter_center_distance),
            cluster_sizes: diag.cluster.as_ref().map(|c| [c.size(0), c.size(1)]),
            pruned_channels: diag.pruned.as_ref().map(|p| p.iter().sum()),
            clip_bound: if cfg.defense.kind == DefenseKind::NormClip { clip_bound } else { None },
            warnings: diag.warnings,
        };
        let gap = digest.inter_center_distance.map(|d| format!(" gap {d:.4}")).unwrap_or_default();
        log::info!(
            "round {round}: acc {acc:.4} asr {asr:.4} kept {}/{}{gap}",
            outcome.selected_ids.len(),
            participants.len()
        );
        reports.push(RoundReport {
            round,
            acc,
            asr,
            excluded_ids: participants
                .iter()
                .copied()
                .filter(|id| !outcome.selected_ids.contains(id))
                .collect(),
            selected_ids: outcome.selected_ids,
            attacker_ids: flagged.iter().filter(|f| f.1).map(|f| f.0).collect(),
            confusion,
            digest,
        });
    }

    let acc = evaluate(&global, &test)?;
    let asr = compute_asr(&global, &test, &cfg.attack.trigger)?;
    let confusions: Vec<Confusion> = reports.iter().map(|r| r.confusion).collect();
    let (tpr, fpr, tpr_defined, fpr_defined) = compute_tpr_fpr(&confusions);
    Ok(ExperimentResult {
        metrics: Metrics {
            acc,
            asr,
            tpr,
            fpr,
            cad: compute_cad(acc, asr, tpr, fpr, cfg.defense.kind),
            tpr_defined,
            fpr_defined,
        },
        rounds: reports,
        final_model: global,
    })
}
