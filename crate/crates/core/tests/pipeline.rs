mod common;

use common::stub_embeddings;
use kgzsl::gcn::TrainConfig;
use kgzsl::graph::{ConstructionMeta, GraphMode, NodeRole};
use kgzsl::lexicon::{generate_random_splits, shipped};
use kgzsl::numerics::DenseMatrix;
use kgzsl::pipeline::{
    build_kg1, build_kg2, default_top_n, make_targets, run_ablation, run_experiment, AblationAxis, BankSource,
    ClassifierBank, ExperimentConfig, ExperimentInputs, Fusion, KgKind, LossConfig, PipelineError, TargetSource,
};
use kgzsl::synthetic::{generate, SyntheticConfig, SyntheticInstance};

fn meta(dataset: &str) -> ConstructionMeta {
    ConstructionMeta {
        top_n: default_top_n(dataset),
        mode: GraphMode::FullyConnected,
    }
}

#[test]
fn shipped_graph_sizes() {
    for (ds, with_aux) in [("ucf101", 501), ("hmdb51", 451), ("charades", 557)] {
        let m = shipped::manifest(ds).unwrap();
        let emb = stub_embeddings(&m, 8, 1);
        let kg1 = build_kg1(&m, &emb, meta(ds), true).unwrap();
        assert_eq!(kg1.node_count(), with_aux, "{ds}");
        let (v, n) = build_kg2(&m, &shipped::lexicon(), &emb, meta(ds), true).unwrap();
        assert_eq!(v.node_count(), with_aux);
        assert_eq!(n.node_count(), with_aux);
        let plain = build_kg1(&m, &emb, meta(ds), false).unwrap();
        assert_eq!(plain.node_count(), m.train_classes.len() + m.test_classes.len());
    }
}

#[test]
fn charades_defaults_to_twenty_neighbours() {
    assert_eq!(default_top_n("charades"), 20);
    assert_eq!(default_top_n("ucf101"), 5);
    assert_eq!(default_top_n("hmdb51"), 5);
}

#[test]
fn verb_graph_features() {
    let m = shipped::manifest("ucf101").unwrap();
    let emb = stub_embeddings(&m, 8, 2);
    let (verbs, _) = build_kg2(&m, &shipped::lexicon(), &emb, meta("ucf101"), true).unwrap();
    let row = |label: &str| verbs.features().row(verbs.node_index(label).unwrap()).to_vec();
    assert_eq!(row("archery"), emb.get("doing").unwrap());
    assert_eq!(row("playing sitar"), row("playing tabla"));
}

fn bank_for(ids: &[String], dim: usize, offset: f64) -> ClassifierBank {
    let data = (0..ids.len() * dim).map(|i| offset + i as f64 * 1e-3).collect();
    ClassifierBank::new(
        ids.to_vec(),
        DenseMatrix::from_vec(ids.len(), dim, data).unwrap(),
        BankSource::IngestedFromModel,
    )
    .unwrap()
}

#[test]
fn target_masks_on_ucf101() {
    let m = shipped::manifest("ucf101").unwrap();
    let emb = stub_embeddings(&m, 8, 3);
    let bank = bank_for(&m.train_classes, 4, 0.0);
    let aux = bank_for(&m.auxiliary_classes, 4, 1.0);

    let g = build_kg1(&m, &emb, meta("ucf101"), true).unwrap();
    let both = make_targets(&bank, Some(&aux), &g, LossConfig::BothNodesLoss).unwrap();
    let sizes: Vec<usize> = both.sets.iter().map(|s| s.mask.len()).collect();
    assert_eq!(sizes, [78, 400]);
    assert_eq!(both.sets[0].weight, both.sets[1].weight);
    let kin = g.node_index("kinetics:archery").unwrap();
    let pos = both.sets[1].mask.iter().position(|&i| i == kin).unwrap();
    assert_eq!(both.sets[1].targets.row(pos), aux.get("archery").unwrap());

    let plain = build_kg1(&m, &emb, meta("ucf101"), false).unwrap();
    let only = make_targets(&bank, None, &plain, LossConfig::DatasetOnly).unwrap();
    assert_eq!(only.sets.len(), 1);
    assert_eq!(only.sets[0].mask.len(), 78);

    for t in [&both, &only] {
        for s in &t.sets {
            assert!(s.mask.iter().all(|&i| g.roles()[i] != NodeRole::Test));
        }
    }
}

#[test]
fn missing_bank_row_is_reported() {
    let m = shipped::manifest("hmdb51").unwrap();
    let emb = stub_embeddings(&m, 8, 4);
    let g = build_kg1(&m, &emb, meta("hmdb51"), false).unwrap();
    let bank = bank_for(&m.train_classes[1..], 4, 0.0);
    let err = make_targets(&bank, None, &g, LossConfig::DatasetOnly).unwrap_err();
    assert!(
        matches!(err, PipelineError::MissingBankRow(ref c) if *c == m.train_classes[0]),
        "{err}"
    );
}

#[test]
fn random_ucf_splits_leave_91_train_classes() {
    let m = shipped::manifest("ucf101").unwrap();
    let splits = generate_random_splits(&m, 10, 5, 0).unwrap();
    assert_eq!(splits.len(), 5);
    for s in &splits {
        assert_eq!(s.test_classes.len(), 10);
        assert_eq!(s.train_classes.len(), 91);
        s.validate().unwrap();
    }
}

fn small() -> SyntheticInstance {
    generate(&SyntheticConfig {
        samples_per_class: 8,
        auxiliary_classes: 6,
        ..Default::default()
    })
    .unwrap()
}

fn inputs(inst: &SyntheticInstance) -> ExperimentInputs<'_> {
    ExperimentInputs {
        manifest: &inst.manifest,
        embeddings: Some(&inst.embeddings),
        lexicon: Box::leak(Box::new(shipped::lexicon())),
        bank: Some(&inst.bank),
        auxiliary_bank: inst.auxiliary_bank.as_ref(),
        features: Some(&inst.features),
    }
}

fn quick(graphs: Vec<KgKind>) -> ExperimentConfig {
    ExperimentConfig {
        graphs,
        hidden_dims: vec![16, 16],
        train: TrainConfig {
            lr0: 0.01,
            epochs: 40,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

#[test]
fn experiments_replay_bit_for_bit() {
    let inst = small();
    for config in [
        quick(vec![KgKind::Kg1]),
        ExperimentConfig {
            fusion: Fusion::WeightedSum(vec![0.9, 0.05, 0.05]),
            ..quick(vec![KgKind::Kg1, KgKind::Kg2Verb, KgKind::Kg2Noun])
        },
        quick(vec![KgKind::Kg1, KgKind::Kg2Noun]),
    ] {
        let a = run_experiment(&config, &inputs(&inst)).unwrap();
        let b = run_experiment(&config, &inputs(&inst)).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.predicted.rows(), b.predicted.rows());
        assert_eq!(a.provenance, b.provenance);
        let r = a.report.unwrap();
        let mean = r.per_class.iter().map(|p| p.1).sum::<f64>() / r.per_class.len() as f64;
        assert!((r.overall - mean).abs() < 1e-12);
    }
}

#[test]
fn concat_fusion_trains_jointly() {
    let inst = small();
    let out = run_experiment(&quick(vec![KgKind::Kg1, KgKind::Kg2Noun]), &inputs(&inst)).unwrap();
    let (fusion, history) = out.fusion.expect("concat keeps a fusion layer");
    assert_eq!(fusion.layers().len(), 1);
    assert_eq!(history.len(), 40);
    assert!(history.last().unwrap().loss < history[0].loss);
}

#[test]
fn few_shot_supports_stay_out_of_evaluation() {
    let inst = small();
    let config = ExperimentConfig {
        few_shot: true,
        few_shot_k: 3,
        ..quick(vec![KgKind::Kg3, KgKind::Kg1])
    };
    let out = run_experiment(&config, &inputs(&inst)).unwrap();
    assert_eq!(out.supports.len(), 6);
    assert!(out.supports.iter().all(|s| s.len() == 3));
    let again = run_experiment(&config, &inputs(&inst)).unwrap();
    assert_eq!(out.supports, again.supports);
    assert_eq!(
        out.graphs
            .iter()
            .find(|g| g.kind == KgKind::Kg3)
            .unwrap()
            .graph
            .node_count(),
        30
    );
}

#[test]
fn kg3_without_few_shot_is_rejected() {
    let inst = small();
    let err = run_experiment(&quick(vec![KgKind::Kg3]), &inputs(&inst)).unwrap_err();
    assert!(matches!(err, PipelineError::InvalidConfig(_)), "{err}");
}

#[test]
fn closed_form_targets_run() {
    let inst = small();
    let config = ExperimentConfig {
        target_source: TargetSource::ClosedForm { gamma: 1.0 },
        ..quick(vec![KgKind::Kg1])
    };
    let mut i = inputs(&inst);
    i.bank = None;
    let out = run_experiment(&config, &i).unwrap();
    assert_eq!(out.predicted.len(), 6);
}

#[test]
fn training_without_features_skips_evaluation() {
    let inst = small();
    let mut i = inputs(&inst);
    i.features = None;
    let out = run_experiment(&quick(vec![KgKind::Kg1]), &i).unwrap();
    assert!(out.report.is_none());
    assert_eq!(out.predicted.ids(), inst.manifest.test_classes.as_slice());
}

#[test]
fn ablation_row_counts() {
    let inst = small();
    let base = quick(vec![KgKind::Kg1]);
    // Random splits move classes between roles, so every row must be known.
    let mut all = inputs(&inst);
    all.bank = Some(&inst.true_bank);
    let rows = |axis| run_ablation(&axis, &base, &all, None).unwrap();
    assert_eq!(rows(AblationAxis::GraphConfig).len(), 3);
    assert_eq!(rows(AblationAxis::GraphMode).len(), 2);
    assert_eq!(rows(AblationAxis::LinearCombination).len(), 2);
    assert_eq!(rows(AblationAxis::EncoderDecoder).len(), 2);
    let splits = rows(AblationAxis::Splits { n_test: 4, n_splits: 3 });
    assert_eq!(splits.len(), 4);
    assert_eq!(splits[3].setting, "mean");
    assert!(matches!(
        run_ablation(&AblationAxis::Embedding, &base, &inputs(&inst), None),
        Err(PipelineError::InvalidConfig(_))
    ));
    assert!(AblationAxis::parse("nope", 1, 1).unwrap_err().contains("graph-config"));
}

#[test]
fn training_has_no_late_divergence() {
    let inst = generate(&SyntheticConfig::default()).unwrap();
    let config = ExperimentConfig {
        hidden_dims: vec![32, 64, 64, 64, 64],
        top_n: Some(3),
        loss: LossConfig::DatasetOnly,
        train: TrainConfig {
            epochs: 1000,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let out = run_experiment(&config, &inputs(&inst)).unwrap();
    let losses: Vec<f64> = out.graphs[0].history.iter().map(|r| r.loss).collect();
    let overall = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    let tail = losses[losses.len() * 9 / 10..]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    assert!(tail <= overall * 1.05, "tail min {tail} vs overall min {overall}");
}
