use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use dsec_core::analysis::{
    agglomerative_ward, hierarchical_enrichment, hierarchy_groups, pca, HierarchyReport, LinkageTree, Merge,
};
use dsec_core::cohort::{
    aggregate_and_select, generate_synthetic_cohort, load_admissions, match_cohort, prepare_cohort, read_admissions,
    read_patient_matrix, write_admissions, write_patient_matrix, AdmissionSchema, FilterReport, PatientMatrix, Split,
    Standardizer, NULL_CODES, PLANTED_CODES,
};
use dsec_core::eval::{
    compare_methods, score_dec_rf, score_dsec, score_pca_rf, score_recovery, train_method, ComparisonReport,
    FoldMetrics, MethodCurves, ReferenceAuc,
};
use dsec_core::model::{Checkpoint, Method, Phase, TrainedModel};
use dsec_core::selftest;
use dsec_core::{Matrix, Rng};
use serde::{Deserialize, Serialize};

use crate::artifacts::{short, Run};
use crate::config::DataSource;
use crate::svg;

const ADMISSIONS: &str = "admissions.csv";
const SUBGROUPS: &str = "subgroups.csv";
const PREPROCESSED: &str = "preprocessed.csv";
const SPLIT: &str = "split.json";
const METRICS: &str = "metrics.json";
const CURVES: &str = "roc_curves.json";
const ROC_SVG: &str = "roc.svg";
const REPORT: &str = "report.md";

fn model_file(m: Method) -> String {
    format!("model_{}.json", m.as_str())
}
fn embedding_file(m: Method) -> String {
    format!("embedding_{}.csv", m.as_str())
}
fn linkage_file(m: Method) -> String {
    format!("linkage_{}.csv", m.as_str())
}
fn groups_file(m: Method) -> String {
    format!("groups_{}.csv", m.as_str())
}
fn scatter_file(m: Method) -> String {
    format!("embedding_{}.svg", m.as_str())
}
fn enrichment_file(m: Method) -> String {
    format!("enrichment_{}.csv", m.as_str())
}
fn enrichment_table_file(m: Method) -> String {
    format!("enrichment_{}.txt", m.as_str())
}

fn train_command(m: Method) -> String {
    format!("train --method {}", m.as_str())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))
}

// ---------------------------------------------------------------- synth

pub fn synth(run: &Run) -> Result<()> {
    let Some(spec) = run.config.synthetic_spec() else {
        bail!("the configured data source is a CSV file; `synth` only generates synthetic cohorts");
    };
    let cohort = generate_synthetic_cohort(&spec)?;
    let mut buf = Vec::new();
    write_admissions(&mut buf, &cohort.to_admissions(), &AdmissionSchema::default())?;
    run.write_csv(ADMISSIONS, "synth", std::str::from_utf8(&buf)?)?;

    let groups = cohort.matrix.subgroups.as_ref().expect("generator records subgroups");
    let mut body = String::from("patient_id,subgroup,name\n");
    for (id, &g) in cohort.matrix.patient_ids.iter().zip(groups) {
        let _ = writeln!(body, "{id},{g},{}", cohort.subgroup_names[g]);
    }
    run.write_csv(SUBGROUPS, "synth", &body)?;
    let cases = cohort.matrix.labels.iter().filter(|&&l| l == 1).count();
    println!(
        "synthesized {} patients ({cases} heart failure) into {}",
        cohort.matrix.n_patients(),
        run.path(ADMISSIONS).display()
    );
    Ok(())
}

// ----------------------------------------------------------- preprocess

#[derive(Debug, Serialize, Deserialize)]
struct SplitArtifact {
    split: Split,
    standardizer: Standardizer,
    filter: FilterReport,
    rejected_rows: usize,
    unmatched_cases: usize,
}

pub fn preprocess(run: &Run) -> Result<()> {
    let (loaded, schema, do_match) = match &run.config.data {
        DataSource::Synthetic(_) => {
            let path = run.require(ADMISSIONS, "synth")?;
            let schema = AdmissionSchema::default();
            (read_admissions(fs::File::open(path)?, &schema)?, schema, false)
        }
        DataSource::Csv(o) => {
            let schema = AdmissionSchema {
                measurement_columns: o.measurement_columns.clone(),
            };
            let report = load_admissions(&o.path, &schema).with_context(|| format!("loading {}", o.path.display()))?;
            (report, schema, o.propensity_match)
        }
    };
    for e in &loaded.errors {
        log::warn!("admissions line {}: {}", e.line, e.message);
    }
    let mut records = aggregate_and_select(&loaded.records, &schema.measurement_columns)?;
    let mut unmatched = 0;
    if do_match {
        let (matched, report) = match_cohort(&records, &mut Rng::new(run.config.seed).derive("match"))?;
        unmatched = report.unmatched_cases.len();
        if unmatched > 0 {
            log::warn!("{unmatched} cases found no control");
        }
        records = matched;
    }
    let matrix = PatientMatrix::from_admissions(&records, &schema.measurement_columns)?;
    let prepared = prepare_cohort(&matrix, &run.config.filter, &run.config.split_spec())?;
    for f in &prepared.filter.dropped_features {
        log::info!("dropped feature {f}");
    }

    let mut buf = Vec::new();
    write_patient_matrix(&mut buf, &prepared.all)?;
    run.write_csv(PREPROCESSED, "preprocess", std::str::from_utf8(&buf)?)?;
    run.write_json(
        SPLIT,
        "preprocess",
        &SplitArtifact {
            split: prepared.split.clone(),
            standardizer: prepared.standardizer.clone(),
            filter: prepared.filter.clone(),
            rejected_rows: loaded.errors.len(),
            unmatched_cases: unmatched,
        },
    )?;
    println!(
        "{} patients x {} features after filtering ({} dropped patients, {} dropped features); {} train / {} test",
        prepared.all.n_patients(),
        prepared.all.n_features(),
        prepared.filter.dropped_patients.len(),
        prepared.filter.dropped_features.len(),
        prepared.split.train.len(),
        prepared.split.test.len()
    );
    Ok(())
}

struct Cohort {
    all: PatientMatrix,
    split: Split,
}

impl Cohort {
    fn load(run: &Run) -> Result<Self> {
        let all = read_patient_matrix(fs::File::open(run.require(PREPROCESSED, "preprocess")?)?)?;
        let art: SplitArtifact = serde_json::from_str(&fs::read_to_string(run.require(SPLIT, "preprocess")?)?)
            .context("parsing split.json")?;
        let n_inputs = run.config.model.layer_sizes[0];
        if all.n_features() != n_inputs {
            bail!(
                "the encoder expects {n_inputs} inputs but {} features survived filtering; set model.layer_sizes[0] to {}",
                all.n_features(),
                all.n_features()
            );
        }
        Ok(Self { all, split: art.split })
    }

    fn rows(&self, idx: &[usize]) -> (Matrix, Vec<u8>) {
        let m = self.all.select_rows(idx);
        (m.features, m.labels)
    }

    fn train(&self) -> (Matrix, Vec<u8>) {
        self.rows(&self.split.train)
    }

    fn test(&self) -> (Matrix, Vec<u8>) {
        self.rows(&self.split.test)
    }
}

// ---------------------------------------------------------------- train

fn root_rng(run: &Run) -> Rng {
    Rng::new(run.config.seed)
}

fn fit_and_save(run: &Run, cohort: &Cohort, method: Method) -> Result<TrainedModel> {
    let (x, y) = cohort.train();
    log::info!("training {} on {} patients", method.as_str(), x.rows());
    let model = train_method(method, &x, &y, &run.config.model, &root_rng(run))?;
    let ck = Checkpoint::new(model, Phase::Cluster, Some(run.fingerprint.clone()));
    run.write(&model_file(method), &train_command(method), ck.to_json()?.as_bytes())?;
    Ok(ck.model)
}

pub fn train(run: &Run, method: Method) -> Result<()> {
    let cohort = Cohort::load(run)?;
    fit_and_save(run, &cohort, method)?;
    println!("saved {}", run.path(&model_file(method)).display());
    Ok(())
}

fn load_model(run: &Run, method: Method, command: &str) -> Result<TrainedModel> {
    let path = run.require(&model_file(method), command)?;
    let ck = Checkpoint::load(&path)?;
    if ck.model.method != method {
        bail!("{} holds a {} model", path.display(), ck.model.method.as_str());
    }
    Ok(ck.model)
}

// ---------------------------------------------------------------- embed

pub fn embed(run: &Run, method: Method) -> Result<()> {
    let cohort = Cohort::load(run)?;
    let model = load_model(run, method, &train_command(method))?;
    let z = model.embed(&cohort.all.features)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["patient_id".to_string()];
    header.extend((1..=z.cols()).map(|j| format!("z{j}")));
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..z.rows() {
        let mut row = vec![cohort.all.patient_ids[i].clone()];
        row.extend(z.row(i).iter().map(|v| v.to_string()));
        row.push(cohort.all.labels[i].to_string());
        w.write_record(&row)?;
    }
    let body = String::from_utf8(w.into_inner()?)?;
    run.write_csv(
        &embedding_file(method),
        &format!("embed --method {}", method.as_str()),
        &body,
    )?;
    println!("embedded {} patients into {} dimensions", z.rows(), z.cols());
    Ok(())
}

struct Embedding {
    ids: Vec<String>,
    z: Matrix,
}

fn load_embedding(run: &Run, method: Method) -> Result<Embedding> {
    let path = run.require(&embedding_file(method), &format!("embed --method {}", method.as_str()))?;
    let mut rdr = csv_reader(&path)?;
    let width = rdr.headers()?.len();
    if width < 3 {
        bail!("{} has no embedding columns", path.display());
    }
    let (mut ids, mut values) = (Vec::new(), Vec::new());
    for row in rdr.records() {
        let row = row?;
        ids.push(row[0].to_string());
        for j in 1..width - 1 {
            values.push(
                row[j]
                    .parse::<f64>()
                    .with_context(|| format!("{}: bad value {:?}", path.display(), &row[j]))?,
            );
        }
    }
    let n = ids.len();
    Ok(Embedding {
        ids,
        z: Matrix::from_vec(n, width - 2, values)?,
    })
}

// -------------------------------------------------------------- cluster

pub fn cluster(run: &Run, method: Method) -> Result<()> {
    let emb = load_embedding(run, method)?;
    let tree = agglomerative_ward(&emb.z)?;
    let mut body = String::from("step,left,right,distance,size\n");
    for (t, m) in tree.merges.iter().enumerate() {
        let _ = writeln!(body, "{t},{},{},{},{}", m.left, m.right, m.distance, m.size);
    }
    let stage = format!("cluster --method {}", method.as_str());
    run.write_csv(&linkage_file(method), &stage, &body)?;

    let depth = run.config.enrichment.depth.min(3);
    let groups = hierarchy_groups(&tree, depth);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["patient_id", "group"])?;
    for (id, g) in emb.ids.iter().zip(&groups) {
        w.write_record([id.as_str(), g.as_str()])?;
    }
    run.write_csv(&groups_file(method), &stage, &String::from_utf8(w.into_inner()?)?)?;

    let dims = emb.z.cols().min(2);
    let (proj, _) = pca(&emb.z, dims)?;
    let xy: Vec<(f64, f64)> = proj
        .iter_rows()
        .map(|r| (r[0], if dims > 1 { r[1] } else { 0.0 }))
        .collect();
    let title = format!(
        "{} embedding, Ward groups at depth {depth}",
        method.as_str().to_uppercase()
    );
    let plot = svg::scatter_plot(&format!("dsec fingerprint={}", run.fingerprint), &title, &xy, &groups);
    run.write(&scatter_file(method), &stage, plot.as_bytes())?;
    println!(
        "Ward tree over {} patients; top merge height {:.3}",
        tree.leaf_count,
        tree.merges.last().map_or(0.0, |m| m.distance)
    );
    Ok(())
}

fn load_linkage(run: &Run, method: Method) -> Result<LinkageTree> {
    let path = run.require(&linkage_file(method), &format!("cluster --method {}", method.as_str()))?;
    let mut rdr = csv_reader(&path)?;
    let mut merges = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let num =
            |j: usize| -> Result<usize> { row[j].parse().with_context(|| format!("{}: bad field", path.display())) };
        merges.push(Merge {
            left: num(1)?,
            right: num(2)?,
            distance: row[3]
                .parse()
                .with_context(|| format!("{}: bad distance", path.display()))?,
            new_id: 0,
            size: num(4)?,
        });
    }
    let leaf_count = merges.len() + 1;
    for (t, m) in merges.iter_mut().enumerate() {
        m.new_id = leaf_count + t;
    }
    Ok(LinkageTree { merges, leaf_count })
}

// --------------------------------------------------------------- enrich

fn hierarchy_report(run: &Run, method: Method) -> Result<(HierarchyReport, PatientMatrix)> {
    let cohort = Cohort::load(run)?;
    let tree = load_linkage(run, method)?;
    if tree.leaf_count != cohort.all.n_patients() {
        bail!(
            "linkage tree has {} leaves but the cohort has {} patients; rerun `embed` and `cluster`",
            tree.leaf_count,
            cohort.all.n_patients()
        );
    }
    let report = hierarchical_enrichment(&tree, &cohort.all.codes, &run.config.enrichment)?;
    Ok((report, cohort.all))
}

pub fn enrich(run: &Run, method: Method) -> Result<()> {
    let (report, _) = hierarchy_report(run, method)?;
    let stage = format!("enrich --method {}", method.as_str());
    run.write_csv(&enrichment_file(method), &stage, &report.to_csv())?;
    let table = report.to_table();
    run.write(
        &enrichment_table_file(method),
        &stage,
        format!("# dsec fingerprint={}\n{table}", run.fingerprint).as_bytes(),
    )?;
    print!("{table}");
    Ok(())
}

// ------------------------------------------------------------- evaluate

#[derive(Debug, Serialize, Deserialize)]
struct Metrics {
    auc_dsec: f64,
    auc_dec_rf: f64,
    auc_pca_rf: f64,
    auc_dsec_after_transfer: f64,
    n_train: usize,
    n_test: usize,
    folds: Vec<FoldMetrics>,
    reference: ReferenceAuc,
}

pub fn evaluate(run: &Run) -> Result<()> {
    let cohort = Cohort::load(run)?;
    if !run.exists(&model_file(Method::Dsec)) {
        bail!(
            "{} not found in {}; run `train` first (`dsec train --method dsec`)",
            model_file(Method::Dsec),
            run.dir.display()
        );
    }
    let dsec = load_model(run, Method::Dsec, &train_command(Method::Dsec))?;
    let dec = if run.exists(&model_file(Method::Dec)) {
        load_model(run, Method::Dec, &train_command(Method::Dec))?
    } else {
        log::info!("no DEC checkpoint; training one");
        fit_and_save(run, &cohort, Method::Dec)?
    };
    let (train_x, train_y) = cohort.train();
    let (test_x, test_y) = cohort.test();
    let cfg = &run.config.model;
    let root = root_rng(run);

    let report = if run.config.evaluation.cross_validate {
        let folds: Vec<(Vec<usize>, Vec<usize>)> = {
            let pos = |i: &usize| cohort.split.train.binary_search(i).expect("fold row is a training row");
            cohort
                .split
                .fold_pairs()
                .map(|(fit, val)| (fit.iter().map(pos).collect(), val.iter().map(pos).collect()))
                .collect()
        };
        compare_methods(&train_x, &train_y, &test_x, &test_y, &folds, cfg, &root)?
    } else {
        let pca_s = score_pca_rf(&train_x, &train_y, &test_x, cfg, &root)?;
        let dec_s = score_dec_rf(&dec, &train_x, &train_y, &test_x, cfg, &root)?;
        let (final_s, transfer_s) = score_dsec(&dsec, &test_x)?;
        let curves = MethodCurves::from_scores(&test_y, &pca_s, &dec_s, &final_s, &transfer_s)?;
        ComparisonReport::from_curves(curves, Vec::new(), None)
    };

    let metrics = Metrics {
        auc_dsec: report.auc_dsec,
        auc_dec_rf: report.auc_dec_rf,
        auc_pca_rf: report.auc_pca_rf,
        auc_dsec_after_transfer: report.auc_dsec_after_transfer,
        n_train: train_y.len(),
        n_test: test_y.len(),
        folds: report.folds.clone(),
        reference: report.reference,
    };
    run.write_json(METRICS, "evaluate", &metrics)?;
    run.write_json(CURVES, "evaluate", &report.curves)?;
    let c = &report.curves;
    let plot = svg::roc_plot(
        &format!("dsec fingerprint={}", run.fingerprint),
        &[
            (
                format!("PCA + forest ({:.3})", c.pca_rf.auc),
                &c.pca_rf.fpr,
                &c.pca_rf.tpr,
            ),
            (
                format!("DEC + forest ({:.3})", c.dec_rf.auc),
                &c.dec_rf.fpr,
                &c.dec_rf.tpr,
            ),
            (format!("DSEC ({:.3})", c.dsec.auc), &c.dsec.fpr, &c.dsec.tpr),
        ],
    );
    run.write(ROC_SVG, "evaluate", plot.as_bytes())?;
    println!(
        "test AUC  dsec {:.4}  dec+rf {:.4}  pca+rf {:.4}  (dsec after transfer {:.4})",
        metrics.auc_dsec, metrics.auc_dec_rf, metrics.auc_pca_rf, metrics.auc_dsec_after_transfer
    );
    Ok(())
}

// --------------------------------------------------------------- report

fn read_subgroups(run: &Run) -> Result<Option<BTreeMap<String, usize>>> {
    if !run.exists(SUBGROUPS) {
        return Ok(None);
    }
    let path = run.require(SUBGROUPS, "synth")?;
    let mut out = BTreeMap::new();
    for row in csv_reader(&path)?.records() {
        let row = row?;
        out.insert(row[0].to_string(), row[1].parse()?);
    }
    Ok(Some(out))
}

pub fn report(run: &Run) -> Result<()> {
    let manifest = crate::artifacts::Manifest::load(&run.dir)?.ok_or_else(|| {
        anyhow!(
            "no manifest in {}; run `synth` or `preprocess` first",
            run.dir.display()
        )
    })?;
    if manifest.fingerprint != run.fingerprint {
        bail!(
            "the run in {} was produced under config fingerprint {}, the current config is {}; refusing to mix them",
            run.dir.display(),
            short(&manifest.fingerprint),
            short(&run.fingerprint)
        );
    }
    let mut mismatched = Vec::new();
    for name in manifest.artifacts.keys() {
        if name == REPORT {
            continue;
        }
        match crate::artifacts::read_stamp(&run.path(name)) {
            Ok(Some(fp)) if fp == run.fingerprint => {}
            Ok(Some(fp)) => mismatched.push(format!("{name} ({})", short(&fp))),
            Ok(None) => mismatched.push(format!("{name} (no fingerprint)")),
            Err(e) => mismatched.push(format!("{name} ({e})")),
        }
    }
    if !mismatched.is_empty() {
        bail!(
            "artifacts do not match config fingerprint {}: {}",
            short(&run.fingerprint),
            mismatched.join(", ")
        );
    }
    let metrics: Metrics = serde_json::from_str(&fs::read_to_string(run.require(METRICS, "evaluate")?)?)?;
    run.require(&enrichment_file(Method::Dsec), "enrich --method dsec")?;
    let (hierarchy, all) = hierarchy_report(run, Method::Dsec)?;

    let mut md = format!("<!-- dsec fingerprint={} -->\n# Run report\n\n", run.fingerprint);
    let _ = writeln!(md, "- config fingerprint: `{}`", run.fingerprint);
    let _ = writeln!(md, "- seed: {}", run.config.seed);
    let _ = writeln!(md, "- patients: {} train, {} test\n", metrics.n_train, metrics.n_test);
    md.push_str("## Held-out AUC\n\n| method | AUC | published reference |\n|---|---|---|\n");
    let r = &metrics.reference;
    let _ = writeln!(md, "| DSEC | {:.4} | {:.2} |", metrics.auc_dsec, r.dsec);
    let _ = writeln!(md, "| DEC + forest | {:.4} | {:.2} |", metrics.auc_dec_rf, r.dec_rf);
    let _ = writeln!(md, "| PCA + forest | {:.4} | {:.2} |", metrics.auc_pca_rf, r.pca_rf);
    let _ = writeln!(
        md,
        "| DSEC, classifier before clustering | {:.4} | |\n",
        metrics.auc_dsec_after_transfer
    );
    if !metrics.folds.is_empty() {
        md.push_str("### Cross-validation folds\n\n| fold | DSEC | DEC + forest | PCA + forest |\n|---|---|---|---|\n");
        for f in &metrics.folds {
            let _ = writeln!(
                md,
                "| {} | {:.4} | {:.4} | {:.4} |",
                f.fold, f.auc_dsec, f.auc_dec_rf, f.auc_pca_rf
            );
        }
        md.push('\n');
    }
    md.push_str("## Significant codes by hierarchy branch\n\n```\n");
    md.push_str(&hierarchy.to_table());
    md.push_str("```\n");

    if let Some(sub) = read_subgroups(run)? {
        let groups: Option<Vec<usize>> = all.patient_ids.iter().map(|id| sub.get(id).copied()).collect();
        if let Some(groups) = groups {
            let planted: Vec<(usize, &str)> = PLANTED_CODES.iter().enumerate().map(|(g, &(_, c))| (g, c)).collect();
            let rec = score_recovery(&hierarchy, &groups, &planted, &NULL_CODES);
            md.push_str("\n## Planted subgroup recovery\n\n| subgroup | code | recovered in |\n|---|---|---|\n");
            for (hit, (name, _)) in rec.planted.iter().zip(PLANTED_CODES.iter()) {
                let _ = writeln!(
                    md,
                    "| {name} | {} | {} |",
                    hit.code,
                    hit.comparison.as_deref().unwrap_or("not recovered")
                );
            }
            let _ = writeln!(
                md,
                "\nNull codes flagged: {}",
                if rec.null_hits.is_empty() {
                    "none".to_string()
                } else {
                    rec.null_hits
                        .iter()
                        .map(|(c, at)| format!("{c} ({at})"))
                        .collect::<Vec<_>>()
                        .join(", ")
                }
            );
        }
    }
    run.write(REPORT, "report", md.as_bytes())?;
    print!("{md}");
    Ok(())
}

// ------------------------------------------------------------- selftest

pub fn selftest(seed: u64, quick: bool) -> Result<()> {
    let reports = if quick {
        vec![
            selftest::gradient_suite(seed, 5),
            selftest::ward_oracle_suite(seed, 20),
            selftest::kmeans_oracle_suite(seed, 20, 0.05),
            selftest::fisher_oracle_suite(seed, 200),
        ]
    } else {
        selftest::run_all(seed)
    };
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        bail!("{failed} self-test suite(s) failed");
    }
    Ok(())
}
