//! Dataset CSV I/O, missing-value exclusion, log + min-max normalization,
//! PCA, `[0, π]` rescaling, stratified fold planning and the synthetic
//! two-class generator.
//!
//! Dataset CSV schema: UTF-8, header `sample_id,label,<feature names…>`,
//! labels `0/1` or `-1/+1`, `.` decimal separator; empty, `NA` or `NaN`
//! cells are missing.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::linalg;
use crate::scalar::Real;

/// Dataset as read from disk; any cell may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset<T> {
    pub sample_ids: Vec<String>,
    pub labels: Vec<Option<Label>>,
    pub feature_names: Vec<String>,
    pub values: Array2<Option<T>>,
}

/// Complete dataset with no missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub sample_ids: Vec<String>,
    pub labels: Vec<Label>,
    pub feature_names: Vec<String>,
    pub values: Array2<T>,
}

impl<T: Real> Dataset<T> {
    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    /// Keeps only the listed feature columns, in the given order.
    pub fn select_features(&self, features: &[usize]) -> Dataset<T> {
        Dataset {
            sample_ids: self.sample_ids.clone(),
            labels: self.labels.clone(),
            feature_names: features.iter().map(|&f| self.feature_names[f].clone()).collect(),
            values: self.values.select(Axis(1), features),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["sample_id".to_string(), "label".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header).map_err(csv_io)?;
        for (i, row) in self.values.rows().into_iter().enumerate() {
            let mut record = vec![self.sample_ids[i].clone(), self.labels[i].to_string()];
            record.extend(row.iter().map(|v| format!("{}", v.as_f64())));
            w.write_record(&record).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(File::create(path)?)
    }
}

impl<T: Real> From<Dataset<T>> for RawDataset<T> {
    fn from(d: Dataset<T>) -> Self {
        RawDataset {
            sample_ids: d.sample_ids,
            labels: d.labels.into_iter().map(Some).collect(),
            feature_names: d.feature_names,
            values: d.values.mapv(Some),
        }
    }
}

/// Empty cells and `NA` / `NaN` (any case) mark missing values.
fn is_missing_token(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

fn csv_io(err: csv::Error) -> Error {
    Error::Io(std::io::Error::other(err))
}

pub fn load_dataset_csv<T: Real>(path: &Path) -> Result<RawDataset<T>> {
    read_dataset_csv(File::open(path)?, path)
}

/// Parses the dataset schema from any reader; `origin` is used in messages.
pub fn read_dataset_csv<T: Real, R: Read>(input: R, origin: &Path) -> Result<RawDataset<T>> {
    let fail = |line: usize, message: String| Error::Csv {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| fail(1, e.to_string()))?
        .clone();
    if header.len() < 3 {
        return Err(fail(1, "header needs sample_id, label and at least one feature".into()));
    }
    if &header[0] != "sample_id" || &header[1] != "label" {
        return Err(fail(
            1,
            format!("header must start with `sample_id,label`, found `{},{}`", &header[0], &header[1]),
        ));
    }
    let feature_names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let p = feature_names.len();

    let mut sample_ids = Vec::new();
    let mut labels = Vec::new();
    let mut cells: Vec<Option<T>> = Vec::new();
    let mut seen = HashSet::new();
    for (row_idx, record) in reader.records().enumerate() {
        let line = row_idx + 2;
        let record = record.map_err(|e| fail(line, e.to_string()))?;
        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateSampleId(id));
        }
        let label_text = record[1].trim();
        let label = if is_missing_token(label_text) {
            None
        } else {
            Some(Label::parse(label_text).ok_or_else(|| {
                fail(line, format!("label `{label_text}` is not one of 0, 1, -1, +1"))
            })?)
        };
        for (j, cell) in record.iter().skip(2).enumerate() {
            let cell = cell.trim();
            if is_missing_token(cell) {
                cells.push(None);
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| {
                fail(line, format!("feature `{}` has non-numeric value `{cell}`", feature_names[j]))
            })?;
            if !value.is_finite() {
                return Err(fail(
                    line,
                    format!("feature `{}` has non-finite value `{cell}`", feature_names[j]),
                ));
            }
            cells.push(Some(T::lit(value)));
        }
        sample_ids.push(id);
        labels.push(label);
    }
    let values = Array2::from_shape_vec((sample_ids.len(), p), cells)
        .map_err(|e| fail(0, e.to_string()))?;
    Ok(RawDataset {
        sample_ids,
        labels,
        feature_names,
        values,
    })
}

/// Drops samples with a missing label, then every feature column that still
/// contains a missing value.
pub fn exclude_missing<T: Real>(d: &RawDataset<T>) -> Result<Dataset<T>> {
    let rows: Vec<usize> = (0..d.labels.len()).filter(|&i| d.labels[i].is_some()).collect();
    let cols: Vec<usize> = (0..d.feature_names.len())
        .filter(|&j| rows.iter().all(|&i| d.values[[i, j]].is_some()))
        .collect();
    if cols.is_empty() {
        return Err(Error::NoUsableFeatures);
    }
    let values = Array2::from_shape_fn((rows.len(), cols.len()), |(r, c)| {
        d.values[[rows[r], cols[c]]].expect("checked above")
    });
    Ok(Dataset {
        sample_ids: rows.iter().map(|&i| d.sample_ids[i].clone()).collect(),
        labels: rows.iter().map(|&i| d.labels[i].expect("filtered")).collect(),
        feature_names: cols.iter().map(|&j| d.feature_names[j].clone()).collect(),
        values,
    })
}

/// Per-feature statistics of `log(1 + v)` followed by min-max scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMinMax<T> {
    pub log_transform: bool,
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Real> LogMinMax<T> {
    pub fn fit(x: ArrayView2<'_, T>, names: &[String]) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::EmptyInput("normalization samples"));
        }
        check_nonnegative(x, names)?;
        let logged = x.mapv(|v| v.ln_1p());
        let min = logged
            .columns()
            .into_iter()
            .map(|c| c.iter().copied().fold(T::infinity(), T::min))
            .collect();
        let max = logged
            .columns()
            .into_iter()
            .map(|c| c.iter().copied().fold(T::neg_infinity(), T::max))
            .collect();
        Ok(Self {
            log_transform: true,
            min,
            max,
        })
    }

    /// Applies the fitted map; constant training columns map to 0. Values
    /// outside the training range are not clipped.
    pub fn transform(&self, x: ArrayView2<'_, T>, names: &[String]) -> Result<Array2<T>> {
        if x.ncols() != self.min.len() {
            return Err(Error::DimensionMismatch {
                expected: self.min.len(),
                found: x.ncols(),
            });
        }
        check_nonnegative(x, names)?;
        let mut out = if self.log_transform {
            x.mapv(|v| v.ln_1p())
        } else {
            x.to_owned()
        };
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let span = self.max[j] - self.min[j];
            if span > T::zero() {
                col.mapv_inplace(|v| (v - self.min[j]) / span);
            } else {
                col.fill(T::zero());
            }
        }
        Ok(out)
    }
}

fn check_nonnegative<T: Real>(x: ArrayView2<'_, T>, names: &[String]) -> Result<()> {
    for ((_, j), &v) in x.indexed_iter() {
        if v < T::zero() {
            return Err(Error::LogDomain {
                feature: names.get(j).cloned().unwrap_or_else(|| format!("#{j}")),
                value: v.as_f64(),
            });
        }
    }
    Ok(())
}

/// `v → log(1+v)`, then per-feature min-max into `[0, 1]`.
pub fn log_minmax_normalize<T: Real>(d: &Dataset<T>) -> Result<(Dataset<T>, LogMinMax<T>)> {
    let state = LogMinMax::fit(d.values.view(), &d.feature_names)?;
    let values = state.transform(d.values.view(), &d.feature_names)?;
    Ok((
        Dataset {
            values,
            ..d.clone()
        },
        state,
    ))
}

/// Principal axes of a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca<T> {
    pub mean: Array1<T>,
    /// `k × P`, orthonormal rows, ordered by decreasing variance.
    pub components: Array2<T>,
    pub singular_values: Vec<T>,
}

impl<T: Real> Pca<T> {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }
}

/// Top-`k` right singular vectors of the centered matrix, each flipped so its
/// largest-magnitude entry is positive.
pub fn fit_pca<T: Real>(x: ArrayView2<'_, T>, k: usize) -> Result<Pca<T>> {
    let (n, p) = x.dim();
    let available = n.min(p);
    if k == 0 || k > available {
        return Err(Error::PcaRank {
            requested: k,
            available,
        });
    }
    let mean = x.mean_axis(Axis(0)).expect("nonempty");
    let centered = &x - &mean;
    let svd = linalg::svd(centered.view());
    let mut components = Array2::<T>::zeros((k, p));
    for c in 0..k {
        let col = svd.v.column(c);
        let mut pivot = 0;
        for j in 1..p {
            if col[j].abs() > col[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if col[pivot] < T::zero() { -T::one() } else { T::one() };
        components.row_mut(c).assign(&col.mapv(|v| v * sign));
    }
    Ok(Pca {
        mean,
        components,
        singular_values: svd.singular_values.to_vec(),
    })
}

/// `(X − mean)·componentsᵀ`.
pub fn project_pca<T: Real>(state: &Pca<T>, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
    if x.ncols() != state.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: state.mean.len(),
            found: x.ncols(),
        });
    }
    Ok((&x - &state.mean).dot(&state.components.t()))
}

/// Per-component training range used to map onto `[0, π]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleRange<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Real> AngleRange<T> {
    pub fn fit(projected: ArrayView2<'_, T>) -> Self {
        let min = projected
            .columns()
            .into_iter()
            .map(|c| c.iter().copied().fold(T::infinity(), T::min))
            .collect();
        let max = projected
            .columns()
            .into_iter()
            .map(|c| c.iter().copied().fold(T::neg_infinity(), T::max))
            .collect();
        Self { min, max }
    }
}

/// Linear map of each component onto `[0, π]`, clamped; constant components map to 0.
pub fn rescale_to_angle_range<T: Real>(
    state: &AngleRange<T>,
    projected: ArrayView2<'_, T>,
) -> Result<Array2<T>> {
    if projected.ncols() != state.min.len() {
        return Err(Error::DimensionMismatch {
            expected: state.min.len(),
            found: projected.ncols(),
        });
    }
    let pi = T::PI();
    let mut out = projected.to_owned();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let (lo, hi) = (state.min[j], state.max[j]);
        let span = hi - lo;
        if span > T::zero() {
            col.mapv_inplace(|v| {
                if v <= lo {
                    T::zero()
                } else if v >= hi {
                    pi
                } else {
                    ((v - lo) / span * pi).max(T::zero()).min(pi)
                }
            });
        } else {
            col.fill(T::zero());
        }
    }
    Ok(out)
}

/// Fitted preprocessing chain: log + min-max, PCA, `[0, π]` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessState<T> {
    pub normalizer: LogMinMax<T>,
    pub pca: Pca<T>,
    pub angle_range: AngleRange<T>,
}

/// Output of [`PreprocessState::transform`].
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed<T> {
    /// PCA scores, used by classical kernels.
    pub projected: Array2<T>,
    /// Scores rescaled to `[0, π]`, used by quantum kernels.
    pub angles: Array2<T>,
}

impl<T: Real> PreprocessState<T> {
    pub fn fit(x: ArrayView2<'_, T>, names: &[String], k: usize) -> Result<Self> {
        let normalizer = LogMinMax::fit(x, names)?;
        let normalized = normalizer.transform(x, names)?;
        let pca = fit_pca(normalized.view(), k)?;
        let projected = project_pca(&pca, normalized.view())?;
        let angle_range = AngleRange::fit(projected.view());
        Ok(Self {
            normalizer,
            pca,
            angle_range,
        })
    }

    pub fn transform(&self, x: ArrayView2<'_, T>, names: &[String]) -> Result<Preprocessed<T>> {
        let normalized = self.normalizer.transform(x, names)?;
        let projected = project_pca(&self.pca, normalized.view())?;
        let angles = rescale_to_angle_range(&self.angle_range, projected.view())?;
        Ok(Preprocessed { projected, angles })
    }
}

/// Disjoint, label-stratified folds covering every sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    /// Sorted sample indices per fold.
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every index outside `fold`, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != fold)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Shuffles each class with a seeded RNG and deals its members round-robin
/// across folds, continuing where the previous class stopped.
pub fn stratified_kfold_plan(labels: &[Label], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::FoldCount(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [Label::Negative, Label::Positive] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::ClassTooSmall {
                class: class.name(),
                count: members.len(),
                folds: k,
            });
        }
        members.shuffle(&mut rng);
        for idx in members {
            folds[next].push(idx);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { folds, seed })
}

/// Parameters of the two-Gaussian synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub class_sep: f64,
    pub seed: u64,
}

/// Synthetic dataset plus the indices of its informative features.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData<T> {
    pub dataset: Dataset<T>,
    pub informative: Vec<usize>,
}

pub fn generate_synthetic<T: Real>(spec: &SyntheticSpec) -> Result<Dataset<T>> {
    generate_synthetic_with_truth(spec).map(|s| s.dataset)
}

/// Two balanced classes, unit-variance Gaussian noise on every feature, and
/// class means `±class_sep/2` on `n_informative` randomly placed features.
/// Each column is then shifted so its minimum is exactly 0.
pub fn generate_synthetic_with_truth<T: Real>(spec: &SyntheticSpec) -> Result<SyntheticData<T>> {
    if spec.n_samples < 2 || spec.n_features == 0 {
        return Err(Error::InvalidParameter(format!(
            "synthetic data needs at least 2 samples and 1 feature, got {} x {}",
            spec.n_samples, spec.n_features
        )));
    }
    if spec.n_informative > spec.n_features {
        return Err(Error::InvalidParameter(format!(
            "{} informative features exceed {} features",
            spec.n_informative, spec.n_features
        )));
    }
    if !spec.class_sep.is_finite() || spec.class_sep < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "class separation must be finite and nonnegative, got {}",
            spec.class_sep
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, p) = (spec.n_samples, spec.n_features);

    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < n - n / 2 { Label::Positive } else { Label::Negative })
        .collect();
    labels.shuffle(&mut rng);

    let mut positions: Vec<usize> = (0..p).collect();
    positions.shuffle(&mut rng);
    let mut informative = positions[..spec.n_informative].to_vec();
    informative.sort_unstable();
    let mut is_informative = vec![false; p];
    for &f in &informative {
        is_informative[f] = true;
    }

    let half_sep = spec.class_sep / 2.0;
    let mut raw = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        let shift = if labels[i] == Label::Positive { half_sep } else { -half_sep };
        for j in 0..p {
            let noise: f64 = StandardNormal.sample(&mut rng);
            raw[[i, j]] = noise + if is_informative[j] { shift } else { 0.0 };
        }
    }
    for mut col in raw.columns_mut() {
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        col.mapv_inplace(|v| v - min);
    }

    let width = (n.max(2) - 1).to_string().len();
    Ok(SyntheticData {
        dataset: Dataset {
            sample_ids: (0..n).map(|i| format!("s{i:0width$}")).collect(),
            labels,
            feature_names: (1..=p).map(|j| format!("f{j}")).collect(),
            values: raw.mapv(T::lit),
        },
        informative,
    })
}
