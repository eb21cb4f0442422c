use serde::{Deserialize, Serialize};

use crate::analysis::Pca;
use crate::error::{Error, Result};
use crate::eval::{forest_predict, forest_train, roc_auc, ForestConfig, RocCurve};
use crate::model::{run_dec, run_dsec, EncoderSpec, Method, TrainedModel, TrainingSchedule};
use crate::nn::Matrix;
use crate::rng::Rng;

/// Published AUCs on the original cohort, kept for side-by-side reading only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceAuc {
    pub dsec: f64,
    pub dec_rf: f64,
    pub pca_rf: f64,
}

pub const REFERENCE_AUC: ReferenceAuc = ReferenceAuc {
    dsec: 0.84,
    dec_rf: 0.73,
    pca_rf: 0.66,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonConfig {
    /// Encoder widths, input first; activations follow the method.
    pub layer_sizes: Vec<usize>,
    pub corruption_sigma: f64,
    pub schedule: TrainingSchedule,
    pub k: usize,
    pub forest: ForestConfig,
    pub pca_dims: usize,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        let spec = EncoderSpec::desk_scale(Method::Dsec);
        Self {
            layer_sizes: spec.layer_sizes,
            corruption_sigma: spec.corruption_sigma,
            schedule: TrainingSchedule::default(),
            k: 2,
            forest: ForestConfig::default(),
            pca_dims: 3,
        }
    }
}

impl ComparisonConfig {
    pub fn encoder_spec(&self, method: Method) -> EncoderSpec {
        EncoderSpec {
            corruption_sigma: self.corruption_sigma,
            ..EncoderSpec::for_method(method, self.layer_sizes.clone())
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder_spec(Method::Dsec).validate()?;
        self.schedule.validate()?;
        self.forest.validate()?;
        if self.k < 2 {
            return Err(Error::invalid(format!("k must be at least 2, got {}", self.k)));
        }
        if self.pca_dims == 0 {
            return Err(Error::invalid("pca_dims must be positive"));
        }
        Ok(())
    }
}

/// Stream for one method's training, shared by every entry point so that a
/// model trained on its own matches the one trained inside a comparison.
pub fn method_rng(root: &Rng, method: Method) -> Rng {
    root.derive(method.as_str())
}

pub fn train_method(
    method: Method,
    train_x: &Matrix,
    train_y: &[u8],
    config: &ComparisonConfig,
    root: &Rng,
) -> Result<TrainedModel> {
    let spec = config.encoder_spec(method);
    let rng = method_rng(root, method);
    let report = match method {
        Method::Dec => run_dec(train_x, &spec, &config.schedule, config.k, &rng)?,
        Method::Dsec => run_dsec(train_x, train_y, &spec, &config.schedule, config.k, &rng)?,
    };
    Ok(report.model)
}

/// Test-set scores of the PCA + forest baseline; PCA and forest see training rows only.
pub fn score_pca_rf(
    train_x: &Matrix,
    train_y: &[u8],
    test_x: &Matrix,
    config: &ComparisonConfig,
    root: &Rng,
) -> Result<Vec<f64>> {
    let pca = Pca::fit(train_x, config.pca_dims)?;
    let forest = forest_train(
        &pca.transform(train_x)?,
        train_y,
        &config.forest,
        &root.derive("pca_forest"),
    )?;
    forest_predict(&forest, &pca.transform(test_x)?)
}

/// Test-set scores of a forest on the final DEC embedding.
pub fn score_dec_rf(
    model: &TrainedModel,
    train_x: &Matrix,
    train_y: &[u8],
    test_x: &Matrix,
    config: &ComparisonConfig,
    root: &Rng,
) -> Result<Vec<f64>> {
    let forest = forest_train(
        &model.embed(train_x)?,
        train_y,
        &config.forest,
        &root.derive("dec_forest"),
    )?;
    forest_predict(&forest, &model.embed(test_x)?)
}

/// DSEC classifier probabilities: on the final encoder and on the transfer-step encoder.
pub fn score_dsec(model: &TrainedModel, test_x: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let missing = || Error::invalid("model has no classifier head; it was not trained with DSEC");
    Ok((
        model.positive_proba_final(test_x)?.ok_or_else(missing)?,
        model.positive_proba_after_transfer(test_x)?.ok_or_else(missing)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCurves {
    pub pca_rf: RocCurve,
    pub dec_rf: RocCurve,
    /// Classifier on the encoder after clustering.
    pub dsec: RocCurve,
    /// Classifier on the encoder right after the transfer step.
    pub dsec_after_transfer: RocCurve,
}

impl MethodCurves {
    pub fn from_scores(
        labels: &[u8],
        pca_rf: &[f64],
        dec_rf: &[f64],
        dsec: &[f64],
        dsec_after_transfer: &[f64],
    ) -> Result<Self> {
        Ok(Self {
            pca_rf: roc_auc(pca_rf, labels)?,
            dec_rf: roc_auc(dec_rf, labels)?,
            dsec: roc_auc(dsec, labels)?,
            dsec_after_transfer: roc_auc(dsec_after_transfer, labels)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub auc_pca_rf: f64,
    pub auc_dec_rf: f64,
    pub auc_dsec: f64,
    pub auc_dsec_after_transfer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub auc_pca_rf: f64,
    pub auc_dec_rf: f64,
    pub auc_dsec: f64,
    pub auc_dsec_after_transfer: f64,
    pub curves: MethodCurves,
    pub folds: Vec<FoldMetrics>,
    pub reference: ReferenceAuc,
    pub fingerprint: Option<String>,
}

impl ComparisonReport {
    pub fn from_curves(curves: MethodCurves, folds: Vec<FoldMetrics>, fingerprint: Option<String>) -> Self {
        Self {
            auc_pca_rf: curves.pca_rf.auc,
            auc_dec_rf: curves.dec_rf.auc,
            auc_dsec: curves.dsec.auc,
            auc_dsec_after_transfer: curves.dsec_after_transfer.auc,
            curves,
            folds,
            reference: REFERENCE_AUC,
            fingerprint,
        }
    }
}

fn evaluate_split(
    train_x: &Matrix,
    train_y: &[u8],
    test_x: &Matrix,
    test_y: &[u8],
    config: &ComparisonConfig,
    root: &Rng,
) -> Result<MethodCurves> {
    let pca = score_pca_rf(train_x, train_y, test_x, config, root)?;
    let dec = train_method(Method::Dec, train_x, train_y, config, root)?;
    let dec_rf = score_dec_rf(&dec, train_x, train_y, test_x, config, root)?;
    let dsec = train_method(Method::Dsec, train_x, train_y, config, root)?;
    let (final_p, transfer_p) = score_dsec(&dsec, test_x)?;
    MethodCurves::from_scores(test_y, &pca, &dec_rf, &final_p, &transfer_p)
}

/// Fits all three pipelines on training rows and scores the held-out rows.
/// `folds` (pairs of row indices into the training set) add per-fold
/// metrics; each fold uses its own derived stream.
pub fn compare_methods(
    train_x: &Matrix,
    train_y: &[u8],
    test_x: &Matrix,
    test_y: &[u8],
    folds: &[(Vec<usize>, Vec<usize>)],
    config: &ComparisonConfig,
    rng: &Rng,
) -> Result<ComparisonReport> {
    config.validate()?;
    if train_x.cols() != test_x.cols() {
        return Err(Error::shape("compare_methods", train_x.shape(), test_x.shape()));
    }
    let curves = evaluate_split(train_x, train_y, test_x, test_y, config, rng)?;
    let mut fold_metrics = Vec::with_capacity(folds.len());
    for (f, (fit, val)) in folds.iter().enumerate() {
        let pick = |idx: &[usize]| idx.iter().map(|&i| train_y[i]).collect::<Vec<u8>>();
        let c = evaluate_split(
            &train_x.select_rows(fit),
            &pick(fit),
            &train_x.select_rows(val),
            &pick(val),
            config,
            &rng.derive_index("fold", f as u64),
        )?;
        fold_metrics.push(FoldMetrics {
            fold: f,
            auc_pca_rf: c.pca_rf.auc,
            auc_dec_rf: c.dec_rf.auc,
            auc_dsec: c.dsec.auc,
            auc_dsec_after_transfer: c.dsec_after_transfer.auc,
        });
    }
    Ok(ComparisonReport::from_curves(curves, fold_metrics, None))
}
