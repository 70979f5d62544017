use std::fs;

use marslab::attacks::AttackKind;
use marslab::data::{synth_dataset, TriggerSpec};
use marslab::harness::{
    compute_asr, compute_cad, emit_reports, read_report, run_experiment, run_sweep, DatasetSpec, DefenseKind,
    ExperimentConfig,
};
use marslab::nn::{evaluate, train, Architecture, TrainConfig};
use marslab::rng::rng_from;
use tempfile::tempdir;

fn tiny(defense: DefenseKind, rounds: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        total_clients: 6,
        attackers_total: 2,
        clients_per_round: 5,
        attackers_per_round: 1,
        rounds,
        dataset: DatasetSpec::Synth { classes: 4, per_class: 12, test_per_class: 5, height: 8, width: 8 },
        local_epochs: 1,
        ..ExperimentConfig::default()
    };
    cfg.attack.kind = AttackKind::Mra;
    cfg.defense.kind = defense;
    cfg
}

#[test]
fn zero_rounds_write_a_header_only_csv() {
    let dir = tempdir().unwrap();
    let cfg = tiny(DefenseKind::Mars, 0);
    let r = run_experiment(&cfg).unwrap();
    let (csv, json) = emit_reports(&r, &cfg, dir.path()).unwrap();
    assert_eq!(fs::read_to_string(csv).unwrap(), "round,acc,asr,tp,fp,tn,fn,selected_ids\n");
    assert!(read_report(&json).unwrap().rounds.is_empty());
}

#[test]
fn one_round_reports_round_trip() {
    let dir = tempdir().unwrap();
    let cfg = tiny(DefenseKind::Mars, 1);
    let r = run_experiment(&cfg).unwrap();
    let (csv, json) = emit_reports(&r, &cfg, dir.path()).unwrap();
    let text = fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 2);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 8);
    assert_eq!(row[1].split('.').nth(1).unwrap().len(), 6);
    let doc = read_report(&json).unwrap();
    assert_eq!(doc.rounds.len(), 1);
    assert_eq!(doc.config, cfg);
    let (a, b) = (&doc.metrics, &r.metrics);
    for (x, y) in [(a.acc, b.acc), (a.asr, b.asr), (a.tpr, b.tpr), (a.fpr, b.fpr), (a.cad, b.cad)] {
        assert!((x - y).abs() <= 1e-6);
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let (d1, d2) = (tempdir().unwrap(), tempdir().unwrap());
    let cfg = tiny(DefenseKind::Mars, 2);
    let r1 = run_experiment(&cfg).unwrap();
    let r2 = run_experiment(&cfg).unwrap();
    let (c1, j1) = emit_reports(&r1, &cfg, d1.path()).unwrap();
    let (c2, j2) = emit_reports(&r2, &cfg, d2.path()).unwrap();
    assert_eq!(fs::read(c1).unwrap(), fs::read(c2).unwrap());
    assert_eq!(fs::read(j1).unwrap(), fs::read(j2).unwrap());
    assert_eq!(r1.final_model, r2.final_model);
}

#[test]
fn round_records_are_consistent() {
    for defense in [
        DefenseKind::FedAvg,
        DefenseKind::Mars,
        DefenseKind::MarsStar,
        DefenseKind::MultiKrum,
        DefenseKind::NormClip,
        DefenseKind::FedClp,
    ] {
        let cfg = tiny(defense, 2);
        let r = run_experiment(&cfg).unwrap();
        for rep in &r.rounds {
            let c = rep.confusion;
            assert_eq!(c.tp + c.fn_, rep.attacker_ids.len());
            assert_eq!(c.fp + c.tn, cfg.clients_per_round - rep.attacker_ids.len());
            assert_eq!(rep.selected_ids.len() + rep.excluded_ids.len(), cfg.clients_per_round);
        }
        let m = r.metrics;
        for v in [m.acc, m.asr, m.tpr, m.fpr, m.cad] {
            assert!((0.0..=1.0).contains(&v), "{defense}: {v}");
        }
        let want = if defense == DefenseKind::FedClp {
            (m.acc + (1.0 - m.asr)) / 2.0
        } else {
            (m.acc + (1.0 - m.asr) + m.tpr + (1.0 - m.fpr)) / 4.0
        };
        assert_eq!(m.cad, want, "{defense}");
        if !defense.selects() {
            assert_eq!((m.tpr, m.fpr), (0.0, 0.0), "{defense}");
        }
    }
}

#[test]
fn cad_reproduces_published_rows() {
    let mars = compute_cad(0.8507, 0.0986, 1.0, 0.0, DefenseKind::Mars);
    assert_eq!(format!("{:.2}", mars * 100.0), "93.80");
    let clp = compute_cad(0.6925, 0.0755, 0.0, 0.0, DefenseKind::FedClp);
    assert_eq!(format!("{:.2}", clp * 100.0), "80.85");
}

#[test]
fn invalid_configs_fail_before_any_work() {
    let mut cfg = tiny(DefenseKind::Mars, 1);
    cfg.attackers_per_round = 3;
    assert!(cfg.validate().is_err());
    assert!(run_experiment(&cfg).is_err());
    let mut cfg = tiny(DefenseKind::Mars, 1);
    cfg.defense.kappa = 0.0;
    assert!(run_experiment(&cfg).is_err());
    let mut cfg = tiny(DefenseKind::MultiKrum, 1);
    cfg.defense.krum_f = Some(3);
    assert!(cfg.validate().is_err());
    let mut cfg = tiny(DefenseKind::Mars, 1);
    cfg.attack.kind = AttackKind::None;
    cfg.attack.lambda = 0.1;
    assert!(cfg.validate().is_err());
}

#[test]
fn sweep_writes_one_report_set_per_value() {
    let dir = tempdir().unwrap();
    let mut cfg = tiny(DefenseKind::Mars, 1);
    cfg.out_dir = dir.path().to_path_buf();
    let values = vec!["2".to_string(), "50".to_string()];
    let points = run_sweep(&cfg, "kappa", &values).unwrap();
    assert_eq!(points.len(), 2);
    for v in &values {
        let sub = dir.path().join(format!("kappa={v}"));
        assert!(sub.join("rounds.csv").is_file());
        assert_eq!(read_report(&sub.join("report.json")).unwrap().config.defense.kappa, v.parse::<f64>().unwrap());
    }
    let summary = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(summary.starts_with("kappa,acc,asr,tpr,fpr,cad\n"));
    assert_eq!(summary.lines().count(), 3);
    assert!(run_sweep(&cfg, "no_such_field", &values).is_err());
    assert!(run_sweep(&cfg, "kappa", &[]).is_err());
}

#[test]
fn clean_model_asr_sits_near_the_chance_floor() {
    let train_set = synth_dataset(0, 10, 200, 16, 16).unwrap();
    let test = synth_dataset(1, 10, 100, 16, 16).unwrap();
    let mut rng = rng_from(0);
    let mut model = Architecture::MlpSmall.build(train_set.sample_shape(), 10, &mut rng).unwrap();
    let cfg = TrainConfig { epochs: 5, lr: 0.05, batch_size: 16 };
    train(&mut model, &train_set, &cfg, &mut rng, |_, _| {}).unwrap();
    assert!(evaluate(&model, &test).unwrap() > 0.95);
    let asr = compute_asr(&model, &test, &TriggerSpec::default()).unwrap();
    assert!((asr - 0.1).abs() <= 0.05, "asr {asr}");
}
