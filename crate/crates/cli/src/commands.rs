use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cusplit_core::cart::{grow_tree, kfold_validate, CrossValidationConfig, KFoldReport};
use cusplit_core::codec::{generate_sequence, raw_path_for, read_raw, write_raw, LambdaRule};
use cusplit_core::eval::run_benchmark;
use cusplit_core::features::{correlation_table, extract_dataset};
use cusplit_core::pruning::{
    harvest_criteria, plot_rows_csv, plot_rows_gnuplot, select_per_depth, threshold_plot_data,
    CriteriaFile,
};
use cusplit_core::{
    Constraints, CriteriaBundle, Dataset, DecisionTree, EncoderConfig, PruneThresholds, Sequence,
    SequenceSpec,
};
use serde_json::json;

use crate::args::{
    manifest_path_for, BenchArgs, Command, CorrelateArgs, EncoderArgs, ExtractArgs, GenerateArgs,
    PruneArgs, TrainArgs,
};
use crate::manifest::RunManifest;
use crate::CliError;

pub fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Generate(a) => generate(command, a),
        Command::Extract(a) => extract(command, a),
        Command::Train(a) => train(command, a),
        Command::Prune(a) => prune(command, a),
        Command::Bench(a) => bench(command, a),
        Command::Correlate(a) => correlate(command, a),
        Command::Rerun(a) => {
            let m = RunManifest::read(&a.manifest)?;
            let mut inner = m.invocation;
            if matches!(inner, Command::Rerun(_)) {
                return Err(CliError::Data(format!(
                    "{}: manifest records a rerun",
                    a.manifest.display()
                )));
            }
            inner.set_force(true);
            run(&inner)
        }
    }
}

fn refuse_existing(paths: &[PathBuf], force: bool) -> Result<(), CliError> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(CliError::Refused(format!(
            "{} already exists; pass --force to overwrite",
            p.display()
        ))),
        None => Ok(()),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

fn encoder_template(a: &EncoderArgs, qps: &[u8]) -> Result<EncoderConfig, CliError> {
    if !(a.lambda_scale > 0.0 && a.lambda_scale.is_finite()) {
        return Err(CliError::Data(format!(
            "lambda scale {} must be positive",
            a.lambda_scale
        )));
    }
    if a.search_range < 0 {
        return Err(CliError::Data("search range must be non-negative".into()));
    }
    if let Some(qp) = qps.iter().find(|&&q| q > 47) {
        return Err(CliError::Data(format!(
            "base QP {qp} leaves no room for frame offsets (max 47)"
        )));
    }
    Ok(EncoderConfig {
        base_qp: qps.first().copied().unwrap_or(22),
        lambda_rule: LambdaRule {
            scale: a.lambda_scale,
        },
        search_range: a.search_range,
        rng_seed: 0,
    })
}

fn load_sequences(paths: &[PathBuf]) -> Result<Vec<Sequence>, CliError> {
    paths
        .iter()
        .map(|p| {
            let (header, frames) = read_raw(p)?;
            Ok(Sequence::from_raw(header, frames)?)
        })
        .collect()
}

fn generate(command: &Command, a: &GenerateArgs) -> Result<(), CliError> {
    let specs = a
        .specs
        .iter()
        .map(|p| SequenceSpec::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut names = BTreeSet::new();
    for s in &specs {
        s.validate()?;
        if !names.insert(s.name.as_str()) {
            return Err(CliError::Data(format!("two specs are named `{}`", s.name)));
        }
    }
    let manifest_path = a.out_dir.join("generate.manifest.json");
    let mut outputs = Vec::new();
    for s in &specs {
        let hdr = a.out_dir.join(format!("{}.hdr", s.name));
        outputs.push(raw_path_for(&hdr));
        outputs.push(hdr);
    }
    let mut guarded = outputs.clone();
    guarded.push(manifest_path.clone());
    refuse_existing(&guarded, a.force)?;
    create_dir(&a.out_dir)?;
    for s in &specs {
        let seq = generate_sequence(s, s.seed)?;
        write_raw(
            &a.out_dir.join(format!("{}.hdr", s.name)),
            &seq.header(),
            &seq.frames,
        )?;
        println!(
            "{}: {} frames of {}x{} ({})",
            s.name, s.frames, s.width, s.height, s.archetype
        );
    }
    let mut m = RunManifest::new(command);
    m.config = json!({ "specs": specs });
    m.seeds = specs.iter().map(|s| s.seed).collect();
    m.inputs = a.specs.clone();
    m.outputs = outputs;
    m.write(&manifest_path)
}

fn extract(command: &Command, a: &ExtractArgs) -> Result<(), CliError> {
    let template = encoder_template(&a.encoder, &a.qps)?;
    let manifest_path = manifest_path_for(&a.out);
    if a.sequences.contains(&a.out) {
        return Err(CliError::Refused(
            "the dataset path is also an input".into(),
        ));
    }
    refuse_existing(&[a.out.clone(), manifest_path.clone()], a.force)?;
    let sequences = load_sequences(&a.sequences)?;
    let dataset = extract_dataset(&sequences, &a.qps, &template)?;
    if let Some(dir) = a.out.parent() {
        create_dir(dir)?;
    }
    dataset.export(&a.out)?;
    println!(
        "{} samples (depth 0/1/2: {}/{}/{}) from {} sequences x {} QPs",
        dataset.len(),
        dataset.depth_len(0),
        dataset.depth_len(1),
        dataset.depth_len(2),
        sequences.len(),
        a.qps.len()
    );
    let mut m = RunManifest::new(command);
    m.config = json!({ "qps": a.qps, "encoder": template });
    m.seeds = sequences.iter().map(|s| s.spec.seed).collect();
    m.inputs = a
        .sequences
        .iter()
        .flat_map(|h| [h.clone(), raw_path_for(h)])
        .collect();
    m.outputs = vec![a.out.clone()];
    m.write(&manifest_path)
}

fn train(command: &Command, a: &TrainArgs) -> Result<(), CliError> {
    let constraints = Constraints {
        max_depth: a.max_depth,
        min_leaf_fraction: a.min_leaf_fraction,
        bin_count: a.bins,
    };
    constraints.validate()?;
    let cv = CrossValidationConfig {
        k: a.folds,
        seed: a.seed,
    };
    let model_paths: Vec<PathBuf> = (0..3)
        .map(|d| a.out_dir.join(format!("depth{d}.json")))
        .collect();
    let kfold_json = a.out_dir.join("kfold.json");
    let kfold_txt = a.out_dir.join("kfold.txt");
    let manifest_path = a.out_dir.join("train.manifest.json");
    let mut outputs = model_paths.clone();
    outputs.extend([kfold_json.clone(), kfold_txt.clone()]);
    let mut guarded = outputs.clone();
    guarded.push(manifest_path.clone());
    refuse_existing(&guarded, a.force)?;

    let dataset = Dataset::import(&a.dataset)?;
    let mut trees = Vec::new();
    let mut reports: Vec<KFoldReport> = Vec::new();
    for d in 0..3u8 {
        let n = dataset.depth_len(d);
        if n == 0 {
            return Err(CliError::Data(format!(
                "{}: no samples at CU depth {d}",
                a.dataset.display()
            )));
        }
        if n < a.warn_below {
            warn(&format!(
                "only {n} samples at CU depth {d}; the model may not generalise"
            ));
        }
        trees.push(grow_tree(dataset.at_depth(d), d, &constraints)?);
        if n >= cv.k {
            reports.push(kfold_validate(&dataset, d, &cv, &constraints)?);
        } else {
            warn(&format!(
                "{n} samples at CU depth {d} cannot fill {} folds; skipping validation",
                cv.k
            ));
        }
    }
    create_dir(&a.out_dir)?;
    for (tree, path) in trees.iter().zip(&model_paths) {
        tree.save(path)?;
    }
    write_file(
        &kfold_json,
        &(serde_json::to_string_pretty(&reports).expect("serializes") + "\n"),
    )?;
    let mut txt = format!("{}-fold cross-validation, seed {}\n", cv.k, cv.seed);
    for r in &reports {
        let folds: Vec<String> = r
            .fold_accuracies
            .iter()
            .map(|x| format!("{x:.4}"))
            .collect();
        let _ = writeln!(
            txt,
            "depth {}: mean accuracy {:.4} (folds {})",
            r.cu_depth,
            r.mean_accuracy,
            folds.join(" ")
        );
    }
    write_file(&kfold_txt, &txt)?;
    print!("{txt}");

    let mut m = RunManifest::new(command);
    m.config = json!({ "constraints": constraints, "cross_validation": cv });
    m.seeds = vec![a.seed];
    m.inputs = vec![a.dataset.clone()];
    m.outputs = outputs;
    m.write(&manifest_path)
}

fn prune(command: &Command, a: &PruneArgs) -> Result<(), CliError> {
    let thresholds = PruneThresholds::new(a.min_accuracy, a.min_coverage)?;
    let trees = a
        .models
        .iter()
        .map(|p| DecisionTree::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut per_depth: Vec<Vec<_>> = vec![Vec::new(); 3];
    let mut seen = [false; 3];
    let mut trained_on = BTreeSet::new();
    let criteria_path = a.out_dir.join("criteria.txt");
    let candidates_path = a.out_dir.join("candidates.txt");
    let manifest_path = a.out_dir.join("prune.manifest.json");
    let mut outputs = vec![criteria_path.clone(), candidates_path.clone()];
    for t in &trees {
        let d = t.cu_depth as usize;
        if d > 2 || seen[d] {
            return Err(CliError::Data(format!(
                "models must cover distinct CU depths 0..=2 (got {d} twice or out of range)"
            )));
        }
        seen[d] = true;
        outputs.push(a.out_dir.join(format!("plot_depth{d}.csv")));
        outputs.push(a.out_dir.join(format!("plot_depth{d}.dat")));
    }
    let mut guarded = outputs.clone();
    guarded.push(manifest_path.clone());
    refuse_existing(&guarded, a.force)?;
    create_dir(&a.out_dir)?;

    for t in &trees {
        let d = t.cu_depth as usize;
        trained_on.extend(t.trained_on.iter().cloned());
        per_depth[d] = harvest_criteria(t, &thresholds);
        let rows = threshold_plot_data(t);
        write_file(
            &a.out_dir.join(format!("plot_depth{d}.csv")),
            &plot_rows_csv(&rows),
        )?;
        let title = format!("CU depth {d}: node coverage and accuracy in breadth-first order");
        write_file(
            &a.out_dir.join(format!("plot_depth{d}.dat")),
            &plot_rows_gnuplot(&rows, &title),
        )?;
    }
    let trained_on: Vec<String> = trained_on.into_iter().collect();
    let candidates = CriteriaFile {
        thresholds: Some(thresholds),
        trained_on: trained_on.clone(),
        criteria: per_depth.concat(),
    };
    candidates.save(&candidates_path)?;
    let selected = CriteriaFile {
        thresholds: Some(thresholds),
        trained_on,
        criteria: select_per_depth(&per_depth).into_iter().flatten().collect(),
    };
    selected.save(&criteria_path)?;

    let mut m = RunManifest::new(command);
    m.config = json!({ "thresholds": thresholds });
    m.inputs = a.models.clone();
    m.outputs = outputs;
    m.write(&manifest_path)?;

    if selected.criteria.is_empty() {
        return Err(CliError::EmptyPruning(format!(
            "no node reaches accuracy >= {}% and coverage >= {}%; lower the thresholds (see the plot data in {})",
            a.min_accuracy,
            a.min_coverage,
            a.out_dir.display()
        )));
    }
    for c in &selected.criteria {
        println!(
            "depth {}: {}  (accuracy {:.2}%, coverage {:.2}%)",
            c.cu_depth,
            c.conjunction(),
            c.accuracy * 100.0,
            c.coverage * 100.0
        );
    }
    Ok(())
}

fn bench(command: &Command, a: &BenchArgs) -> Result<(), CliError> {
    let template = encoder_template(&a.encoder, &a.qps)?;
    let names = ["report.txt", "report.csv", "report.json"];
    let outputs: Vec<PathBuf> = names.iter().map(|n| a.out_dir.join(n)).collect();
    let timing_path = a.out_dir.join("timing.csv");
    let manifest_path = a.out_dir.join("bench.manifest.json");
    let mut guarded = outputs.clone();
    guarded.extend([timing_path.clone(), manifest_path.clone()]);
    refuse_existing(&guarded, a.force)?;

    let sequences = load_sequences(&a.sequences)?;
    let bundle = match &a.criteria {
        Some(p) => CriteriaBundle::load(p)?,
        None => CriteriaBundle::empty(),
    };
    let run = run_benchmark(&sequences, &a.qps, &template, &bundle)?;
    create_dir(&a.out_dir)?;
    let text = run.report.to_text();
    write_file(&outputs[0], &text)?;
    write_file(&outputs[1], &run.report.to_csv())?;
    write_file(
        &outputs[2],
        &(serde_json::to_string_pretty(&run.report).expect("serializes") + "\n"),
    )?;
    write_file(&timing_path, &run.timing.to_csv())?;
    print!("{text}");

    let mut m = RunManifest::new(command);
    m.config = json!({ "qps": a.qps, "encoder": template });
    m.seeds = sequences.iter().map(|s| s.spec.seed).collect();
    m.inputs = a
        .sequences
        .iter()
        .flat_map(|h| [h.clone(), raw_path_for(h)])
        .collect();
    m.inputs.extend(a.criteria.clone());
    m.outputs = outputs;
    m.volatile_outputs = vec![timing_path];
    m.write(&manifest_path)
}

fn correlate(command: &Command, a: &CorrelateArgs) -> Result<(), CliError> {
    if let Some(out) = &a.out {
        refuse_existing(&[out.clone(), manifest_path_for(out)], a.force)?;
    }
    let dataset = Dataset::import(&a.dataset)?;
    let table = correlation_table(&dataset);
    let text = if a.csv {
        table.to_csv()
    } else {
        table.to_text()
    };
    let Some(out) = &a.out else {
        print!("{text}");
        return Ok(());
    };
    write_file(out, &text)?;
    let mut m = RunManifest::new(command);
    m.config = json!({ "format": if a.csv { "csv" } else { "text" } });
    m.inputs = vec![a.dataset.clone()];
    m.outputs = vec![out.clone()];
    m.write(&manifest_path_for(out))
}
