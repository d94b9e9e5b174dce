use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use kgzsl::gcn::{write_checkpoint, write_loss_csv};
use kgzsl::graph::{write_edge_list, ConstructionMeta, EdgeList, KnowledgeGraph};
use kgzsl::lexicon::{generate_random_splits, shipped};
use kgzsl::pipeline::{
    build_kg1, build_kg2, build_kg3, choose_supports, default_top_n, evaluate_bank, nearest_neighbor_baseline,
    run_ablation, run_experiment, AblationAxis, AblationRow, BankSource, ClassifierBank, EvaluationReport,
    ExperimentInputs, MetricKind,
};
use kgzsl::selfcheck::{run_selfcheck, SelfcheckOptions};
use kgzsl::synthetic::{generate, SyntheticConfig};

use crate::output::{sha256_file, Outputs, Provenance};
use crate::settings::Settings;
use crate::CliError;

fn core<T, E: Into<kgzsl::Error>>(r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Core(e.into()))
}

fn settings_json(settings: &Settings) -> serde_json::Value {
    serde_json::to_value(settings).expect("settings serialize")
}

fn input_digests(settings: &Settings) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (name, path) in [
        ("manifest", &settings.manifest),
        ("embeddings", &settings.embeddings),
        ("word_embeddings", &settings.word_embeddings),
        ("bank", &settings.bank),
        ("auxiliary_bank", &settings.auxiliary_bank),
        ("features", &settings.features),
    ] {
        if let Some(p) = path {
            out.insert(format!("{name}_file"), sha256_file(p)?);
        }
    }
    Ok(out)
}

fn graph_summary(name: &str, g: &KnowledgeGraph) -> String {
    let mut s = format!(
        "{name}: {} nodes, {} stored edges\n",
        g.node_count(),
        g.adjacency().nnz()
    );
    for (role, n) in g.role_counts() {
        let _ = writeln!(s, "  {role}: {n}");
    }
    s.push_str("  degree histogram (degree: nodes)\n");
    for (d, n) in g.degree_histogram() {
        let _ = writeln!(s, "    {d}: {n}");
    }
    s
}

fn edge_list_bytes(g: &KnowledgeGraph) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    core(write_edge_list(&EdgeList::from(g), &mut buf))?;
    Ok(buf)
}

pub fn build_kg(kind: &str, out: &Path, settings: &Settings) -> Result<(), CliError> {
    let manifest = settings.manifest()?;
    let meta = ConstructionMeta {
        top_n: settings.top_n.unwrap_or_else(|| default_top_n(&manifest.dataset_name)),
        mode: settings.graph_mode()?,
    };
    let include_aux = settings.loss()?.includes_auxiliary() && !manifest.auxiliary_classes.is_empty();
    let needs_embeddings = || {
        settings
            .embedding_table()?
            .ok_or_else(|| CliError::Usage(format!("{kind} needs --embeddings")))
    };
    let graphs: Vec<(&str, KnowledgeGraph)> = match kind {
        "kg1" => vec![(
            "kg1",
            core(build_kg1(&manifest, &needs_embeddings()?, meta, include_aux))?,
        )],
        "kg2" => {
            let (v, n) = core(build_kg2(
                &manifest,
                &shipped::lexicon(),
                &needs_embeddings()?,
                meta,
                include_aux,
            ))?;
            vec![("kg2-verb", v), ("kg2-noun", n)]
        }
        "kg3" => {
            let features = settings
                .feature_set()?
                .ok_or_else(|| CliError::Usage("kg3 needs --features".into()))?;
            let (train, test) = core(features.split_for(&manifest))?;
            let descriptor = match settings.kg3_train_descriptor.as_deref() {
                Some("k-samples") => kgzsl::pipeline::Kg3TrainDescriptor::KSamples,
                _ => kgzsl::pipeline::Kg3TrainDescriptor::AllSamples,
            };
            let k = core(build_kg3(
                &manifest,
                &train,
                &test,
                settings.few_shot_k(),
                settings.seed(),
                meta.top_n,
                descriptor,
            ))?;
            vec![("kg3", k.graph)]
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown graph kind `{other}` (expected kg1, kg2 or kg3)"
            )))
        }
    };

    let mut outputs = Outputs::default();
    let mut summary = String::new();
    let mut provenance = Provenance {
        command: "build-kg".into(),
        seed: settings.seed(),
        settings: settings_json(settings),
        config_digest: String::new(),
        inputs: input_digests(settings)?,
        graphs: BTreeMap::new(),
        resolved: format!("{meta:?}"),
    };
    provenance.inputs.insert("manifest".into(), manifest.fingerprint());
    for (name, g) in &graphs {
        outputs.add(out.join(format!("{name}.edges")), edge_list_bytes(g)?);
        summary.push_str(&graph_summary(name, g));
        provenance.graphs.insert(name.to_string(), g.fingerprint());
    }
    print!("{summary}");
    outputs.add(out.join("summary.txt"), summary);
    outputs.add_json(out.join("provenance.json"), &provenance)?;
    outputs.commit()?;
    Ok(())
}

fn report_files(outputs: &mut Outputs, dir: &Path, stem: &str, report: &EvaluationReport) {
    outputs.add(dir.join(format!("{stem}.csv")), report.to_csv());
    outputs.add(dir.join(format!("{stem}.txt")), report.to_table());
}

fn supports_tsv(classes: &[String], supports: &[Vec<String>]) -> String {
    classes
        .iter()
        .zip(supports)
        .map(|(c, ids)| format!("{c}\t{}\n", ids.join(",")))
        .collect()
}

fn read_supports(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    Ok(text
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_once('\t')
                .map(|(_, ids)| ids.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect())
                .unwrap_or_default()
        })
        .collect())
}

pub fn train(out: &Path, settings: &Settings) -> Result<(), CliError> {
    let manifest = settings.manifest()?;
    let config = settings.experiment(&manifest)?;
    let embeddings = settings.embedding_table()?;
    let features = settings.feature_set()?;
    let (bank, auxiliary_bank) = settings.banks()?;
    let lexicon = shipped::lexicon();
    let inputs = ExperimentInputs {
        manifest: &manifest,
        embeddings: embeddings.as_ref(),
        lexicon: &lexicon,
        bank: bank.as_ref(),
        auxiliary_bank: auxiliary_bank.as_ref(),
        features: features.as_ref(),
    };
    let outcome = core(run_experiment(&config, &inputs))?;

    let mut outputs = Outputs::default();
    for g in &outcome.graphs {
        let mut ckpt = Vec::new();
        core(write_checkpoint(&g.model, &mut ckpt))?;
        outputs.add(out.join(format!("model-{}.ckpt", g.kind)), ckpt);
        if !g.history.is_empty() {
            let mut csv = Vec::new();
            core(write_loss_csv(&g.history, &mut csv))?;
            outputs.add(out.join(format!("loss-{}.csv", g.kind)), csv);
        }
    }
    if let Some((model, history)) = &outcome.fusion {
        let mut ckpt = Vec::new();
        core(write_checkpoint(model, &mut ckpt))?;
        outputs.add(out.join("model-fusion.ckpt"), ckpt);
        let mut csv = Vec::new();
        core(write_loss_csv(history, &mut csv))?;
        outputs.add(out.join("loss-fusion.csv"), csv);
    }
    let mut predicted = Vec::new();
    core(outcome.predicted.write_text(&mut predicted))?;
    outputs.add(out.join("predicted.bank"), predicted);
    if !outcome.supports.is_empty() {
        outputs.add(
            out.join("supports.tsv"),
            supports_tsv(&manifest.test_classes, &outcome.supports),
        );
    }
    if let Some(report) = &outcome.report {
        print!("{}", report.to_table());
        report_files(&mut outputs, out, "report", report);
    }

    let p = &outcome.provenance;
    let mut inputs = input_digests(settings)?;
    inputs.extend(p.input_digests.iter().cloned());
    let provenance = Provenance {
        command: "train".into(),
        seed: p.seed,
        settings: settings_json(settings),
        config_digest: p.config_digest.clone(),
        inputs,
        graphs: p.graph_fingerprints.iter().cloned().collect(),
        resolved: p.config.clone(),
    };
    outputs.add_json(out.join("provenance.json"), &provenance)?;
    outputs.commit()?;
    Ok(())
}

pub fn evaluate(
    run: Option<&Path>,
    baseline: Option<&str>,
    out: Option<&Path>,
    settings: &Settings,
) -> Result<(), CliError> {
    let manifest = settings.manifest()?;
    let features = settings
        .feature_set()?
        .ok_or_else(|| CliError::Usage("evaluate needs --features".into()))?;
    let metric = settings
        .metric
        .as_deref()
        .map(|m| m.parse::<MetricKind>().map_err(CliError::Usage))
        .transpose()?;

    let (report, dir) = match (run, baseline) {
        (Some(run), None) => {
            let prov_path = run.join("provenance.json");
            let text = std::fs::read_to_string(&prov_path).map_err(|e| CliError::input(&prov_path, e))?;
            let provenance: Provenance = serde_json::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", prov_path.display())))?;
            let trained_on = provenance.inputs.get("manifest").map(String::as_str).unwrap_or("");
            let here = manifest.fingerprint();
            if trained_on != here {
                return Err(CliError::Validation(format!(
                    "the run in {} was trained on manifest {trained_on:.12}, not {here:.12}; \
                     evaluate with the manifest used for training",
                    run.display()
                )));
            }
            let predicted = core(ClassifierBank::load(&run.join("predicted.bank"), BankSource::Predicted))?;
            let supports_path = run.join("supports.tsv");
            let supports = if supports_path.exists() {
                read_supports(&supports_path)?
            } else {
                Vec::new()
            };
            (
                core(evaluate_bank(&manifest, &features, &predicted, &supports, metric))?,
                run.to_path_buf(),
            )
        }
        (None, Some("nearest-neighbor")) => {
            let (_, test) = core(features.split_for(&manifest))?;
            let chosen = core(choose_supports(
                &manifest,
                &test,
                settings.few_shot_k(),
                settings.seed(),
            ))?;
            let support_idx: Vec<usize> = chosen.iter().flatten().copied().collect();
            let query_idx: Vec<usize> = (0..test.len()).filter(|i| !support_idx.contains(i)).collect();
            let report = core(nearest_neighbor_baseline(
                &test.subset(&support_idx),
                &test.subset(&query_idx),
                &manifest.test_classes,
            ))?;
            let dir = out.ok_or_else(|| CliError::Usage("baseline evaluation needs --out".into()))?;
            (report, dir.to_path_buf())
        }
        (None, Some(other)) => {
            return Err(CliError::Usage(format!(
                "unknown baseline `{other}` (expected nearest-neighbor)"
            )))
        }
        _ => return Err(CliError::Usage("pass either --run or --baseline".into())),
    };
    let dir = out.unwrap_or(&dir);
    print!("{}", report.to_table());
    let mut outputs = Outputs::default();
    report_files(&mut outputs, dir, "evaluation", &report);
    outputs.commit()?;
    Ok(())
}

pub fn ablate(axis: &str, n_test: usize, n_splits: usize, out: &Path, settings: &Settings) -> Result<(), CliError> {
    let axis = AblationAxis::parse(axis, n_test, n_splits).map_err(CliError::Usage)?;
    let manifest = settings.manifest()?;
    let config = settings.experiment(&manifest)?;
    let embeddings = settings.embedding_table()?;
    let words = settings.word_embedding_table()?;
    let features = settings.feature_set()?;
    let (bank, auxiliary_bank) = settings.banks()?;
    let lexicon = shipped::lexicon();
    let inputs = ExperimentInputs {
        manifest: &manifest,
        embeddings: embeddings.as_ref(),
        lexicon: &lexicon,
        bank: bank.as_ref(),
        auxiliary_bank: auxiliary_bank.as_ref(),
        features: features.as_ref(),
    };
    let rows = core(run_ablation(&axis, &config, &inputs, words.as_ref()))?;
    let table = AblationRow::table(&rows);
    print!("{table}");

    let mut outputs = Outputs::default();
    outputs.add(out.join("ablation.csv"), AblationRow::csv(&rows));
    outputs.add(out.join("ablation.txt"), table);
    let mut inputs = input_digests(settings)?;
    inputs.insert("manifest".into(), manifest.fingerprint());
    outputs.add_json(
        out.join("provenance.json"),
        &Provenance {
            command: format!("ablate {axis:?}"),
            seed: config.seed,
            settings: settings_json(settings),
            config_digest: String::new(),
            inputs,
            graphs: BTreeMap::new(),
            resolved: format!("{config:#?}"),
        },
    )?;
    outputs.commit()?;
    Ok(())
}

pub fn selfcheck(seed: u64, corrupt_layer: Option<usize>) -> Result<(), CliError> {
    let report = run_selfcheck(SelfcheckOptions { seed, corrupt_layer });
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        Err(CliError::Numeric(format!("self-check failed: {}", failed.join(", "))))
    }
}

pub fn parse_labels(include_auxiliary: bool, out: Option<&Path>, settings: &Settings) -> Result<(), CliError> {
    let manifest = settings.manifest()?;
    let lexicon = shipped::lexicon();
    let mut classes = manifest.dataset_classes();
    if include_auxiliary {
        classes.extend(manifest.auxiliary_classes.iter().cloned());
    }
    let mut tsv = String::from("action\tnoun\tverb\n");
    for c in &classes {
        let p = lexicon.parse_action_phrase(manifest.embedding_key(c));
        let _ = writeln!(tsv, "{c}\t{}\t{}", p.noun, p.verb);
    }
    match out {
        Some(path) => {
            let mut outputs = Outputs::default();
            outputs.add(path.to_path_buf(), tsv);
            outputs.commit()?;
        }
        None => print!("{tsv}"),
    }
    Ok(())
}

pub fn make_splits(n_test: usize, n_splits: usize, out: &Path, settings: &Settings) -> Result<(), CliError> {
    let manifest = settings.manifest()?;
    let splits = core(generate_random_splits(&manifest, n_test, n_splits, settings.seed()))?;
    let mut outputs = Outputs::default();
    for m in &splits {
        outputs.add(out.join(format!("{}.manifest", m.dataset_name)), m.to_text());
        println!("{}: {}", m.dataset_name, m.test_classes.join(", "));
    }
    outputs.commit()?;
    Ok(())
}

pub fn synth(out: &Path, config: SyntheticConfig) -> Result<(), CliError> {
    let inst = core(generate(&config))?;
    let mut outputs = Outputs::default();
    outputs.add(out.join("synthetic.manifest"), inst.manifest.to_text());
    let mut buf = Vec::new();
    core(inst.embeddings.write(&mut buf))?;
    outputs.add(out.join("embeddings.txt"), buf);
    let mut buf = Vec::new();
    core(inst.bank.write_text(&mut buf))?;
    outputs.add(out.join("bank.txt"), buf);
    if let Some(aux) = &inst.auxiliary_bank {
        let mut buf = Vec::new();
        core(aux.write_text(&mut buf))?;
        outputs.add(out.join("auxiliary_bank.txt"), buf);
    }
    let mut buf = Vec::new();
    core(inst.true_bank.write_text(&mut buf))?;
    outputs.add(out.join("true_bank.txt"), buf);
    let mut buf = Vec::new();
    core(inst.features.write_text(&mut buf))?;
    outputs.add(out.join("features.txt"), buf);
    for p in outputs.commit()? {
        println!("{}", p.display());
    }
    Ok(())
}
