//! Cross-validated experiment matrix: every (kernel, group, PCA dimension)
//! condition is trained with nested C selection (or the RBF-chosen C reused
//! for quantum kernels) and scored by held-out AUC.

use std::fmt;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_pipeline::{
    exclude_missing, generate_synthetic, load_dataset_csv, log_minmax_normalize,
    stratified_kfold_plan, Dataset, FoldPlan, Preprocessed, PreprocessState, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::feature_ranking::{
    fit_ridge_labels, partition_groups, rank_features, repeated_groupings,
    stable_common_features, FeatureGroups, StabilityResult,
};
use crate::kernel_engine::{gram_matrix, rbf_gamma_heuristic, Encoding, GramMatrix, KernelSpec};
use crate::label::{class_counts, require_both_classes, Label};
use crate::quantum_state::ZzMapConfig;
use crate::scalar::Real;
use crate::svm_solver::{decision_values, solve_dual, SvmProblem, TrainConfig};

/// C values searched by default.
pub const DEFAULT_C_GRID: [f64; 9] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3, 1e4];

/// Kernels of the experiment matrix, in canonical run order: the two
/// classical baselines, then the six quantum kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelId {
    Rbf,
    Polynomial,
    Amplitude,
    Angle,
    Zz,
    PqkAmplitude,
    PqkAngle,
    PqkZz,
}

impl KernelId {
    pub const ALL: [KernelId; 8] = [
        KernelId::Rbf,
        KernelId::Polynomial,
        KernelId::Amplitude,
        KernelId::Angle,
        KernelId::Zz,
        KernelId::PqkAmplitude,
        KernelId::PqkAngle,
        KernelId::PqkZz,
    ];

    pub const QUANTUM: [KernelId; 6] = [
        KernelId::Amplitude,
        KernelId::Angle,
        KernelId::Zz,
        KernelId::PqkAmplitude,
        KernelId::PqkAngle,
        KernelId::PqkZz,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelId::Rbf => "rbf",
            KernelId::Polynomial => "polynomial",
            KernelId::Amplitude => "amplitude",
            KernelId::Angle => "angle",
            KernelId::Zz => "zz",
            KernelId::PqkAmplitude => "pqk_amplitude",
            KernelId::PqkAngle => "pqk_angle",
            KernelId::PqkZz => "pqk_zz",
        }
    }

    pub fn is_quantum(self) -> bool {
        !matches!(self, KernelId::Rbf | KernelId::Polynomial)
    }

    fn encoding(self, zz: ZzMapConfig) -> Option<Encoding> {
        match self {
            KernelId::Amplitude | KernelId::PqkAmplitude => Some(Encoding::Amplitude),
            KernelId::Angle | KernelId::PqkAngle => Some(Encoding::Angle),
            KernelId::Zz | KernelId::PqkZz => Some(Encoding::Zz(zz)),
            KernelId::Rbf | KernelId::Polynomial => None,
        }
    }

    /// Qubits simulated at PCA dimension `dim`.
    pub fn qubits(self, dim: usize) -> Option<usize> {
        self.encoding(ZzMapConfig::default()).map(|e| e.qubits(dim))
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where the run's samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Dataset CSV; relative paths resolve against the config file.
    Csv(PathBuf),
    Synthetic(SyntheticSpec),
}

fn default_group_count() -> usize {
    4
}
fn default_lambda() -> f64 {
    1.0
}
fn default_one() -> usize {
    1
}
fn default_pca_dims() -> Vec<usize> {
    vec![2, 4, 8, 16]
}
fn default_kernels() -> Vec<KernelId> {
    KernelId::ALL.to_vec()
}
fn default_c_grid() -> Vec<f64> {
    DEFAULT_C_GRID.to_vec()
}
fn default_folds() -> usize {
    3
}
fn default_true() -> bool {
    true
}
fn default_zz_repetitions() -> usize {
    2
}
fn default_gamma() -> f64 {
    1.0
}
fn default_degree() -> u32 {
    3
}
fn default_kkt() -> f64 {
    1e-3
}
fn default_max_passes() -> usize {
    10_000
}

/// Declarative description of one run of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Number of rank groups the features are split into.
    #[serde(default = "default_group_count")]
    pub group_count: usize,
    /// 1-based groups to run; empty means all.
    #[serde(default)]
    pub groups: Vec<usize>,
    #[serde(default = "default_lambda")]
    pub ridge_lambda: f64,
    /// With more than one repetition each group keeps only the features
    /// common to all repeated rankings.
    #[serde(default = "default_one")]
    pub ranking_repetitions: usize,
    #[serde(default = "default_pca_dims")]
    pub pca_dims: Vec<usize>,
    #[serde(default = "default_kernels")]
    pub kernels: Vec<KernelId>,
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_folds")]
    pub inner_folds: usize,
    #[serde(default)]
    pub seed: u64,
    /// Reuse the RBF baseline's chosen C for quantum kernels.
    #[serde(default = "default_true")]
    pub c_reuse: bool,
    /// Fit normalization, PCA and angle ranges on all samples instead of
    /// each training fold.
    #[serde(default)]
    pub global_preprocess: bool,
    #[serde(default = "default_zz_repetitions")]
    pub zz_repetitions: usize,
    #[serde(default = "default_gamma")]
    pub pqk_gamma: f64,
    /// Fixed RBF gamma; `None` uses `1 / (d · Var)` on the training fold.
    #[serde(default)]
    pub rbf_gamma: Option<f64>,
    #[serde(default = "default_degree")]
    pub polynomial_degree: u32,
    #[serde(default = "default_gamma")]
    pub polynomial_coef: f64,
    #[serde(default = "default_kkt")]
    pub kkt_tolerance: f64,
    #[serde(default = "default_max_passes")]
    pub max_passes: usize,
    /// Write wall-clock seconds into `results.csv`. Off by default so the
    /// file is byte-reproducible; timings always go to the manifest.
    #[serde(default)]
    pub timing_in_results: bool,
}

impl ExperimentConfig {
    /// Defaults for everything but the data source.
    pub fn new(data: DataSource) -> Self {
        serde_json::from_value(serde_json::json!({ "data": data })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, resolving a relative CSV path against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&fs::read_to_string(path)?)?;
        if let DataSource::Csv(p) = &mut cfg.data {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.pca_dims.is_empty() {
            return bad("pca_dims must not be empty".into());
        }
        if self.pca_dims.contains(&0) {
            return bad("pca_dims must be positive".into());
        }
        if self.pca_dims.windows(2).any(|w| w[0] >= w[1]) {
            return bad("pca_dims must be strictly increasing".into());
        }
        if self.c_grid.is_empty() {
            return bad("c_grid must not be empty".into());
        }
        if self.c_grid.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return bad("c_grid values must be positive".into());
        }
        if self.c_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("c_grid must be strictly increasing".into());
        }
        if self.kernels.is_empty() {
            return bad("kernels must not be empty".into());
        }
        let mut seen = self.kernels.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.kernels.len() {
            return bad("kernels contain duplicates".into());
        }
        if self.c_reuse
            && self.kernels.iter().any(|k| k.is_quantum())
            && !self.kernels.contains(&KernelId::Rbf)
        {
            return bad("c_reuse needs the rbf kernel in the kernel list".into());
        }
        if self.group_count == 0 {
            return bad("group_count must be at least 1".into());
        }
        if let Some(&g) = self.groups.iter().find(|&&g| g == 0 || g > self.group_count) {
            return bad(format!("group {g} is outside 1..={}", self.group_count));
        }
        if self.folds < 2 || self.inner_folds < 2 {
            return bad("folds and inner_folds must be at least 2".into());
        }
        if self.ranking_repetitions == 0 {
            return bad("ranking_repetitions must be at least 1".into());
        }
        if !(self.ridge_lambda >= 0.0) {
            return bad("ridge_lambda must be nonnegative".into());
        }
        if self.zz_repetitions == 0 {
            return bad("zz_repetitions must be at least 1".into());
        }
        if !(self.pqk_gamma > 0.0) || self.rbf_gamma.is_some_and(|g| !(g > 0.0)) {
            return bad("kernel gammas must be positive".into());
        }
        if self.polynomial_degree == 0 {
            return bad("polynomial_degree must be at least 1".into());
        }
        if !(self.kkt_tolerance > 0.0) || self.max_passes == 0 {
            return bad("kkt_tolerance and max_passes must be positive".into());
        }
        Ok(())
    }

    /// 1-based groups to run, ascending.
    pub fn selected_groups(&self) -> Vec<usize> {
        let mut g = if self.groups.is_empty() {
            (1..=self.group_count).collect()
        } else {
            self.groups.clone()
        };
        g.sort_unstable();
        g.dedup();
        g
    }

    /// Kernels in canonical order.
    pub fn ordered_kernels(&self) -> Vec<KernelId> {
        let mut k = self.kernels.clone();
        k.sort();
        k
    }

    fn train_config(&self) -> TrainConfig<f64> {
        TrainConfig {
            kkt_tolerance: self.kkt_tolerance,
            max_passes: self.max_passes,
            ..TrainConfig::default()
        }
    }

    fn kernel_spec(&self, kernel: KernelId, train_features: &Array2<f64>) -> KernelSpec<f64> {
        let zz = ZzMapConfig {
            repetitions: self.zz_repetitions,
        };
        match kernel {
            KernelId::Rbf => KernelSpec::Rbf {
                gamma: self
                    .rbf_gamma
                    .unwrap_or_else(|| rbf_gamma_heuristic(train_features.view())),
            },
            KernelId::Polynomial => KernelSpec::Polynomial {
                degree: self.polynomial_degree,
                coef: self.polynomial_coef,
            },
            KernelId::Amplitude | KernelId::Angle | KernelId::Zz => {
                KernelSpec::Fidelity(kernel.encoding(zz).expect("quantum kernel"))
            }
            KernelId::PqkAmplitude | KernelId::PqkAngle | KernelId::PqkZz => KernelSpec::Projected {
                encoding: kernel.encoding(zz).expect("quantum kernel"),
                gamma: self.pqk_gamma,
            },
        }
    }
}

/// Mann–Whitney AUC: `(#(pos > neg) + ½·#ties) / (n₊·n₋)`.
pub fn auc_score<T: Real>(scores: &[T], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: scores.len(),
        });
    }
    let (n_pos, n_neg) = require_both_classes(labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter("AUC scores contain NaN".into()));
    }
    let mut negatives: Vec<T> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == Label::Negative)
        .map(|(&s, _)| s)
        .collect();
    negatives.sort_by(|a, b| a.partial_cmp(b).expect("NaN rejected above"));
    // Twice the statistic, kept integral so the result is exact.
    let mut doubled: u64 = 0;
    for (&s, _) in scores.iter().zip(labels).filter(|(_, &l)| l == Label::Positive) {
        let below = negatives.partition_point(|&v| v < s);
        let not_above = negatives.partition_point(|&v| v <= s);
        doubled += 2 * below as u64 + (not_above - below) as u64;
    }
    Ok(doubled as f64 / (2 * n_pos as u64 * n_neg as u64) as f64)
}

/// Outcome of an inner-fold C search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridChoice {
    pub c: f64,
    pub mean_auc: f64,
    /// Mean validation AUC per grid value; `None` where training failed.
    pub candidates: Vec<(f64, Option<f64>)>,
}

/// Trains on `train` rows of `gram` with box `C·w(y)` and returns the AUC on
/// `test` rows.
fn train_and_score(
    gram: &GramMatrix<f64>,
    labels: &[Label],
    train: &[usize],
    test: &[usize],
    c: f64,
    cfg: &TrainConfig<f64>,
) -> Result<(f64, Vec<f64>)> {
    let train_labels: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
    let test_labels: Vec<Label> = test.iter().map(|&i| labels[i]).collect();
    let problem = SvmProblem::weighted(gram.select(train), train_labels, c)?;
    let model = solve_dual(&problem, cfg)?;
    let cross = gram.values.select(Axis(0), test).select(Axis(1), train);
    let scores = decision_values(&model, cross.view())?;
    Ok((auc_score(&scores, &test_labels)?, scores))
}

/// Picks the C with the best mean inner-fold validation AUC; ties go to the
/// smaller C. `gram` covers the training split only.
pub fn grid_search_c(
    gram: &GramMatrix<f64>,
    labels: &[Label],
    c_grid: &[f64],
    inner_folds: usize,
    seed: u64,
    cfg: &TrainConfig<f64>,
) -> Result<GridChoice> {
    if c_grid.is_empty() {
        return Err(Error::EmptyInput("C grid"));
    }
    if c_grid.len() == 1 {
        return Ok(GridChoice {
            c: c_grid[0],
            mean_auc: f64::NAN,
            candidates: vec![(c_grid[0], None)],
        });
    }
    let plan = stratified_kfold_plan(labels, inner_folds, seed)?;
    let mut candidates = Vec::with_capacity(c_grid.len());
    let mut best: Option<(f64, f64)> = None;
    let mut last_error = String::new();
    for &c in c_grid {
        let aucs: Result<Vec<f64>> = (0..plan.k())
            .map(|f| {
                train_and_score(gram, labels, &plan.train_indices(f), plan.test_indices(f), c, cfg)
                    .map(|(auc, _)| auc)
            })
            .collect();
        match aucs {
            Ok(aucs) => {
                let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
                candidates.push((c, Some(mean)));
                if best.is_none_or(|(_, m)| mean > m) {
                    best = Some((c, mean));
                }
            }
            Err(e) => {
                last_error = e.to_string();
                candidates.push((c, None));
            }
        }
    }
    let (c, mean_auc) = best.ok_or(Error::AllCandidatesFailed(last_error))?;
    Ok(GridChoice {
        c,
        mean_auc,
        candidates,
    })
}

/// Outcome of one (kernel, group, PCA dimension) condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub kernel: KernelId,
    /// 1-based rank group.
    pub group: usize,
    pub pca_dim: usize,
    pub qubits: Option<usize>,
    /// Representative C: the value chosen most often across folds.
    pub c: Option<f64>,
    pub fold_cs: Vec<f64>,
    pub c_reused: bool,
    pub fold_aucs: Vec<f64>,
    pub mean_auc: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

/// Everything written next to `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub software_version: String,
    pub n_samples: usize,
    pub n_features: usize,
    /// Feature names per selected group, in rank order.
    pub group_features: Vec<(usize, Vec<String>)>,
    pub fold_plan: FoldPlan,
    pub total_conditions: usize,
    pub failed_conditions: usize,
    pub total_seconds: f64,
    pub records: Vec<ResultRecord>,
}

/// Ridge ranking of a cleaned dataset, with optional stability repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub ranking: Vec<usize>,
    pub groups: FeatureGroups,
    pub stability: StabilityResult,
}

impl RankingReport {
    /// Feature indices of 1-based `group`: the full-fit group, or the
    /// features common to every repetition when stability is requested.
    pub fn group_features(&self, group: usize, use_stable: bool) -> Vec<usize> {
        let members = &self.groups.groups[group - 1];
        if use_stable {
            let common = &self.stability.common[group - 1];
            members.iter().copied().filter(|f| common.contains(f)).collect()
        } else {
            members.clone()
        }
    }

    /// CSV with columns `feature_name,coefficient,abs_rank,group`, one row per
    /// feature in rank order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature_name", "coefficient", "abs_rank", "group"])
            .map_err(csv_err)?;
        let assignment = self.groups.assignment();
        for (rank, &f) in self.ranking.iter().enumerate() {
            w.write_record([
                self.feature_names[f].clone(),
                format!("{}", self.coefficients[f]),
                (rank + 1).to_string(),
                (assignment[f] + 1).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `group,common_count,features` (names space-separated).
    pub fn write_stability_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["group", "common_count", "features"]).map_err(csv_err)?;
        for (g, common) in self.stability.common.iter().enumerate() {
            let names: Vec<&str> = common.iter().map(|&f| self.feature_names[f].as_str()).collect();
            w.write_record([(g + 1).to_string(), common.len().to_string(), names.join(" ")])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Log + min-max normalizes the whole dataset, fits ridge on ±1 labels,
/// ranks by |β| and partitions into `group_count` groups. `repetitions`
/// refits on stratified 80% subsamples feed the stability intersection.
pub fn rank_dataset(
    dataset: &Dataset<f64>,
    lambda: f64,
    group_count: usize,
    repetitions: usize,
    seed: u64,
) -> Result<RankingReport> {
    let (normalized, _) = log_minmax_normalize(dataset)?;
    let model = fit_ridge_labels(normalized.values.view(), &normalized.labels, lambda)?;
    let ranking = rank_features(&model);
    let groups = partition_groups(&ranking, group_count)?;
    let repeated = repeated_groupings(
        normalized.values.view(),
        &normalized.labels,
        lambda,
        group_count,
        repetitions,
        seed,
    )?;
    let stability = stable_common_features(&repeated)?;
    Ok(RankingReport {
        feature_names: dataset.feature_names.clone(),
        coefficients: model.coefficients.to_vec(),
        ranking,
        groups,
        stability,
    })
}

/// Loads and cleans the configured data source.
pub fn load_data(source: &DataSource) -> Result<Dataset<f64>> {
    match source {
        DataSource::Csv(path) => exclude_missing(&load_dataset_csv(path)?),
        DataSource::Synthetic(spec) => generate_synthetic(spec),
    }
}

/// Preprocessed features of every sample for one outer fold.
struct FoldFeatures {
    features: Preprocessed<f64>,
}

/// Fits the preprocessing chain per outer fold (or once, globally) on the
/// group's columns and transforms every sample.
fn prepare_cell(
    data: &Dataset<f64>,
    plan: &FoldPlan,
    pca_dim: usize,
    global: bool,
) -> Result<Vec<FoldFeatures>> {
    let names = &data.feature_names;
    if global {
        let state = PreprocessState::fit(data.values.view(), names, pca_dim)?;
        let features = state.transform(data.values.view(), names)?;
        return Ok((0..plan.k())
            .map(|_| FoldFeatures {
                features: features.clone(),
            })
            .collect());
    }
    (0..plan.k())
        .map(|f| {
            let train = plan.train_indices(f);
            let train_x = data.values.select(Axis(0), &train);
            let state = PreprocessState::fit(train_x.view(), names, pca_dim)?;
            Ok(FoldFeatures {
                features: state.transform(data.values.view(), names)?,
            })
        })
        .collect()
}

fn inner_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_add(1_000).wrapping_add(fold as u64)
}

/// Most frequent value, ties to the smaller one.
fn modal_c(cs: &[f64]) -> Option<f64> {
    let mut sorted = cs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite C"));
    let mut best: Option<(f64, usize)> = None;
    for chunk in sorted.chunk_by(|a, b| a == b) {
        if best.is_none_or(|(_, n)| chunk.len() > n) {
            best = Some((chunk[0], chunk.len()));
        }
    }
    best.map(|(c, _)| c)
}

/// Runs one condition over the outer folds.
///
/// `reuse_cs` holds the RBF baseline's per-fold C for this cell; when given
/// (and the kernel is quantum) the grid search is skipped.
pub fn run_condition(
    config: &ExperimentConfig,
    data: &Dataset<f64>,
    plan: &FoldPlan,
    kernel: KernelId,
    group: usize,
    pca_dim: usize,
    reuse_cs: Option<&[f64]>,
) -> ResultRecord {
    let start = Instant::now();
    let mut record = ResultRecord {
        kernel,
        group,
        pca_dim,
        qubits: kernel.qubits(pca_dim),
        c: None,
        fold_cs: Vec::new(),
        c_reused: false,
        fold_aucs: Vec::new(),
        mean_auc: None,
        seconds: 0.0,
        error: None,
    };
    let prepared = prepare_cell(data, plan, pca_dim, config.global_preprocess);
    let outcome = prepared.and_then(|folds| {
        run_prepared_condition(config, data, plan, kernel, &folds, reuse_cs, &mut record)
    });
    if let Err(e) = outcome {
        record.error = Some(e.to_string());
        record.fold_aucs.clear();
        record.mean_auc = None;
    }
    record.seconds = start.elapsed().as_secs_f64();
    record
}

fn run_prepared_condition(
    config: &ExperimentConfig,
    data: &Dataset<f64>,
    plan: &FoldPlan,
    kernel: KernelId,
    folds: &[FoldFeatures],
    reuse_cs: Option<&[f64]>,
    record: &mut ResultRecord,
) -> Result<()> {
    let cfg = config.train_config();
    let reuse = reuse_cs.filter(|cs| kernel.is_quantum() && cs.len() == plan.k());
    record.c_reused = reuse.is_some();
    for (f, fold) in folds.iter().enumerate() {
        let train = plan.train_indices(f);
        let test = plan.test_indices(f);
        let x = if kernel.is_quantum() {
            &fold.features.angles
        } else {
            &fold.features.projected
        };
        let spec = config.kernel_spec(kernel, &x.select(Axis(0), &train));
        let gram = gram_matrix(&spec, x.view())?;
        let c = match reuse {
            Some(cs) => cs[f],
            None => {
                let train_gram = gram.select(&train);
                let train_labels: Vec<Label> = train.iter().map(|&i| data.labels[i]).collect();
                grid_search_c(
                    &train_gram,
                    &train_labels,
                    &config.c_grid,
                    config.inner_folds,
                    inner_seed(config.seed, f),
                    &cfg,
                )?
                .c
            }
        };
        let (auc, _) = train_and_score(&gram, &data.labels, &train, test, c, &cfg)?;
        record.fold_cs.push(c);
        record.fold_aucs.push(auc);
    }
    record.c = modal_c(&record.fold_cs);
    record.mean_auc = Some(record.fold_aucs.iter().sum::<f64>() / record.fold_aucs.len() as f64);
    Ok(())
}

/// Executes every (kernel, group, PCA dimension) condition.
///
/// Cells (group, dimension) run one after another; inside a cell the RBF
/// baseline runs first so its per-fold C can be reused, then the remaining
/// kernels run in parallel. Records come back in canonical order: kernel,
/// then dimension, then group.
pub fn run_experiment_matrix(config: &ExperimentConfig) -> Result<RunManifest> {
    config.validate()?;
    let start = Instant::now();
    let data = load_data(&config.data)?;
    if config.group_count > data.n_features() {
        return Err(Error::TooManyGroups {
            groups: config.group_count,
            features: data.n_features(),
        });
    }
    let ranking = rank_dataset(
        &data,
        config.ridge_lambda,
        config.group_count,
        config.ranking_repetitions,
        config.seed,
    )?;
    let plan = stratified_kfold_plan(&data.labels, config.folds, config.seed)?;
    let kernels = config.ordered_kernels();
    let groups = config.selected_groups();
    let use_stable = config.ranking_repetitions > 1;

    let mut records = Vec::new();
    let mut group_features = Vec::new();
    for &group in &groups {
        let features = ranking.group_features(group, use_stable);
        group_features.push((
            group,
            features.iter().map(|&f| data.feature_names[f].clone()).collect(),
        ));
        let group_data = data.select_features(&features);
        for &dim in &config.pca_dims {
            let run = |kernel: KernelId, reuse: Option<&[f64]>| {
                if features.is_empty() {
                    let mut r = run_condition(config, &group_data, &plan, kernel, group, dim, reuse);
                    r.error = Some(Error::NoUsableFeatures.to_string());
                    return r;
                }
                run_condition(config, &group_data, &plan, kernel, group, dim, reuse)
            };
            let mut rest: Vec<KernelId> = kernels.clone();
            let mut reuse_cs = None;
            if kernels.contains(&KernelId::Rbf) {
                let rbf = run(KernelId::Rbf, None);
                if config.c_reuse && rbf.error.is_none() {
                    reuse_cs = Some(rbf.fold_cs.clone());
                }
                records.push(rbf);
                rest.retain(|&k| k != KernelId::Rbf);
            }
            let cell: Vec<ResultRecord> = rest
                .par_iter()
                .map(|&k| run(k, reuse_cs.as_deref()))
                .collect();
            records.extend(cell);
        }
    }
    let order = |r: &ResultRecord| (r.kernel, r.pca_dim, r.group);
    records.sort_by_key(order);

    let failed = records.iter().filter(|r| r.error.is_some()).count();
    Ok(RunManifest {
        config: config.clone(),
        seed: config.seed,
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        n_samples: data.n_samples(),
        n_features: data.n_features(),
        group_features,
        fold_plan: plan,
        total_conditions: records.len(),
        failed_conditions: failed,
        total_seconds: start.elapsed().as_secs_f64(),
        records,
    })
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

/// `results.csv`: `kernel,group,pca_dim,c,fold_aucs,mean_auc,seconds`, six
/// decimals, fold AUCs joined by `;`. Failed conditions leave the numeric
/// cells empty.
pub fn write_results_csv<W: Write>(
    records: &[ResultRecord],
    with_timing: bool,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kernel", "group", "pca_dim", "c", "fold_aucs", "mean_auc", "seconds"])
        .map_err(csv_err)?;
    for r in records {
        let ok = r.error.is_none();
        w.write_record([
            r.kernel.name().to_string(),
            r.group.to_string(),
            r.pca_dim.to_string(),
            if ok { r.c.map(fmt6).unwrap_or_default() } else { String::new() },
            r.fold_aucs.iter().map(|&a| fmt6(a)).collect::<Vec<_>>().join(";"),
            r.mean_auc.map(fmt6).unwrap_or_default(),
            if with_timing { fmt6(r.seconds) } else { String::new() },
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv` and `manifest.json` into `dir`.
pub fn write_run_outputs(manifest: &RunManifest, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_results_csv(
        &manifest.records,
        manifest.config.timing_in_results,
        File::create(dir.join("results.csv"))?,
    )?;
    let mut f = File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, manifest)?;
    writeln!(f)?;
    Ok(())
}

/// Mean AUC over successful records matching `pred`.
pub fn mean_auc_where(records: &[ResultRecord], pred: impl Fn(&ResultRecord) -> bool) -> Option<f64> {
    let values: Vec<f64> = records
        .iter()
        .filter(|r| pred(r))
        .filter_map(|r| r.mean_auc)
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Class balance summary, `(positives, negatives)`.
pub fn dataset_balance(data: &Dataset<f64>) -> (usize, usize) {
    class_counts(&data.labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(signs: &[i32]) -> Vec<Label> {
        signs.iter().map(|&s| Label::from_sign(s).unwrap()).collect()
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_score(&[0.9, 0.1], &lab(&[1, -1])).unwrap(), 1.0);
        assert_eq!(auc_score(&[0.1, 0.9], &lab(&[1, -1])).unwrap(), 0.0);
        assert_eq!(auc_score(&[0.4; 5], &lab(&[1, -1, -1, 1, 1])).unwrap(), 0.5);
        assert!(matches!(auc_score(&[0.1, 0.2], &lab(&[1, 1])), Err(Error::SingleClass)));
        assert!(auc_score(&[0.1], &lab(&[1, -1])).is_err());
        assert!(auc_score(&[f64::NAN, 0.2], &lab(&[1, -1])).is_err());
    }

    #[test]
    fn modal_c_prefers_frequent_then_smaller() {
        assert_eq!(modal_c(&[10.0, 1.0, 10.0]), Some(10.0));
        assert_eq!(modal_c(&[10.0, 1.0, 100.0]), Some(1.0));
        assert_eq!(modal_c(&[]), None);
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = ExperimentConfig::from_json(r#"{"data": {"csv": "x.csv"}}"#).unwrap();
        assert_eq!(cfg.c_grid, DEFAULT_C_GRID.to_vec());
        assert_eq!(cfg.pca_dims, vec![2, 4, 8, 16]);
        assert_eq!(cfg.kernels.len(), 8);
        assert_eq!(cfg.selected_groups(), vec![1, 2, 3, 4]);
        assert!(cfg.c_reuse);

        let unknown = ExperimentConfig::from_json(r#"{"data": {"csv": "x.csv"}, "colour": 1}"#);
        assert!(matches!(unknown, Err(Error::Config(_))));
        let bad_grid = ExperimentConfig::from_json(r#"{"data": {"csv": "x"}, "c_grid": [1, 0.1]}"#);
        assert!(bad_grid.is_err());
        let no_dims = ExperimentConfig::from_json(r#"{"data": {"csv": "x"}, "pca_dims": []}"#);
        assert!(no_dims.is_err());
        let reuse_without_rbf =
            ExperimentConfig::from_json(r#"{"data": {"csv": "x"}, "kernels": ["angle"]}"#);
        assert!(reuse_without_rbf.is_err());
        let group_range = ExperimentConfig::from_json(r#"{"data": {"csv": "x"}, "groups": [5]}"#);
        assert!(group_range.is_err());
    }

    #[test]
    fn kernel_order_and_qubits() {
        assert_eq!(KernelId::ALL.iter().filter(|k| k.is_quantum()).count(), 6);
        assert_eq!([2, 4, 8, 16].map(|d| KernelId::Amplitude.qubits(d)), [Some(1), Some(2), Some(3), Some(4)]);
        assert_eq!(KernelId::PqkZz.qubits(8), Some(8));
        assert_eq!(KernelId::Rbf.qubits(8), None);
        let mut shuffled = vec![KernelId::PqkZz, KernelId::Rbf, KernelId::Angle];
        shuffled.sort();
        assert_eq!(shuffled, vec![KernelId::Rbf, KernelId::Angle, KernelId::PqkZz]);
    }

    #[test]
    fn results_csv_format() {
        let rec = ResultRecord {
            kernel: KernelId::PqkAngle,
            group: 1,
            pca_dim: 4,
            qubits: Some(4),
            c: Some(0.0001),
            fold_cs: vec![0.0001; 2],
            c_reused: true,
            fold_aucs: vec![0.5, 0.75],
            mean_auc: Some(0.625),
            seconds: 1.25,
            error: None,
        };
        let failed = ResultRecord {
            error: Some("boom".into()),
            mean_auc: None,
            fold_aucs: vec![],
            c: None,
            ..rec.clone()
        };
        let mut buf = Vec::new();
        write_results_csv(&[rec.clone(), failed], false, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "kernel,group,pca_dim,c,fold_aucs,mean_auc,seconds\n\
             pqk_angle,1,4,0.000100,0.500000;0.750000,0.625000,\n\
             pqk_angle,1,4,,,,\n"
        );
        let mut buf = Vec::new();
        write_results_csv(&[rec], true, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with(",1.250000\n"));
    }
}
