//! Ridge-regression feature importance, rank groups, and the cross-repetition
//! stability intersection.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{require_both_classes, Label};
use crate::linalg;
use crate::scalar::Real;

/// Whether ridge fits an unpenalized intercept on centered data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Intercept {
    #[default]
    Centered,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel<T> {
    pub coefficients: Array1<T>,
    pub intercept: T,
    pub lambda: T,
}

impl<T: Real> RidgeModel<T> {
    pub fn predict(&self, x: ArrayView2<'_, T>) -> Array1<T> {
        x.dot(&self.coefficients) + self.intercept
    }
}

/// Ridge regression with an unpenalized intercept.
pub fn fit_ridge<T: Real>(x: ArrayView2<'_, T>, y: &[T], lambda: T) -> Result<RidgeModel<T>> {
    fit_ridge_with(x, y, lambda, Intercept::Centered)
}

/// Ridge regression on ±1-encoded class labels.
pub fn fit_ridge_labels<T: Real>(
    x: ArrayView2<'_, T>,
    labels: &[Label],
    lambda: T,
) -> Result<RidgeModel<T>> {
    require_both_classes(labels)?;
    let y: Vec<T> = labels.iter().map(|l| l.sign()).collect();
    fit_ridge(x, &y, lambda)
}

/// Minimizes `‖y − Xβ − b‖² + λ‖β‖²` through the thin SVD of the (centered)
/// design matrix: `β = V diag(s / (s² + λ)) Uᵀ y`. With `λ = 0` singular
/// values below the rank cutoff are dropped, giving the minimum-norm
/// least-squares solution.
pub fn fit_ridge_with<T: Real>(
    x: ArrayView2<'_, T>,
    y: &[T],
    lambda: T,
    intercept: Intercept,
) -> Result<RidgeModel<T>> {
    let (n, p) = x.dim();
    if n == 0 || p == 0 {
        return Err(Error::EmptyInput("ridge design matrix"));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if lambda < T::zero() || lambda.is_nan() {
        return Err(Error::NegativeLambda(lambda.as_f64()));
    }
    let y = Array1::from(y.to_vec());
    let (xc, yc, x_mean, y_mean) = match intercept {
        Intercept::Centered => {
            let x_mean = x.mean_axis(Axis(0)).expect("nonempty");
            let y_mean = y.sum() / T::from_count(n);
            (&x - &x_mean, &y - y_mean, Some(x_mean), y_mean)
        }
        Intercept::None => (x.to_owned(), y.clone(), None, T::zero()),
    };

    let svd = linalg::svd(xc.view());
    let s_max = svd.singular_values.iter().copied().fold(T::zero(), T::max);
    let cutoff = s_max * T::epsilon() * T::from_count(n.max(p));
    let uty = svd.u.t().dot(&yc);
    let mut scaled = Array1::<T>::zeros(svd.singular_values.len());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let denom = s * s + lambda;
        if s > cutoff && denom > T::zero() {
            scaled[k] = s / denom * uty[k];
        }
    }
    let coefficients = svd.v.dot(&scaled);
    let intercept_value = match x_mean {
        Some(mean) => y_mean - mean.dot(&coefficients),
        None => T::zero(),
    };
    Ok(RidgeModel {
        coefficients,
        intercept: intercept_value,
        lambda,
    })
}

/// Feature indices by |β| descending, ties by ascending index.
pub fn rank_features<T: Real>(model: &RidgeModel<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..model.coefficients.len()).collect();
    order.sort_by(|&a, &b| {
        let (ma, mb) = (model.coefficients[a].abs(), model.coefficients[b].abs());
        mb.partial_cmp(&ma)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Rank-ordered partition of feature indices; `groups[0]` is the most
/// important block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroups {
    pub groups: Vec<Vec<usize>>,
}

impl FeatureGroups {
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn feature_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Group index of each feature.
    pub fn assignment(&self) -> Vec<usize> {
        let mut out = vec![0; self.feature_count()];
        for (g, members) in self.groups.iter().enumerate() {
            for &f in members {
                out[f] = g;
            }
        }
        out
    }
}

/// Contiguous rank blocks: the first `P mod G` groups get `⌈P/G⌉` features,
/// the rest `⌊P/G⌋`.
pub fn partition_groups(ranking: &[usize], group_count: usize) -> Result<FeatureGroups> {
    let p = ranking.len();
    if group_count == 0 || group_count > p {
        return Err(Error::TooManyGroups {
            groups: group_count,
            features: p,
        });
    }
    let base = p / group_count;
    let extra = p % group_count;
    let mut groups = Vec::with_capacity(group_count);
    let mut start = 0;
    for g in 0..group_count {
        let size = base + usize::from(g < extra);
        groups.push(ranking[start..start + size].to_vec());
        start += size;
    }
    Ok(FeatureGroups { groups })
}

/// Features that stayed in the same rank group across every repetition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilityResult {
    /// Sorted common feature indices, one set per group.
    pub common: Vec<Vec<usize>>,
    pub repetition_count: usize,
}

pub fn stable_common_features(groupings: &[FeatureGroups]) -> Result<StabilityResult> {
    let first = groupings
        .first()
        .ok_or(Error::EmptyInput("stability groupings"))?;
    let shape: Vec<usize> = first.groups.iter().map(Vec::len).collect();
    if groupings
        .iter()
        .any(|g| g.groups.iter().map(Vec::len).collect::<Vec<_>>() != shape)
    {
        return Err(Error::GroupShapeMismatch);
    }
    let common = (0..first.group_count())
        .map(|g| {
            let mut set: BTreeSet<usize> = first.groups[g].iter().copied().collect();
            for other in &groupings[1..] {
                let members: BTreeSet<usize> = other.groups[g].iter().copied().collect();
                set = set.intersection(&members).copied().collect();
            }
            set.into_iter().collect()
        })
        .collect();
    Ok(StabilityResult {
        common,
        repetition_count: groupings.len(),
    })
}

/// Label-stratified subsample of `fraction` of each class (at least one
/// sample per class), returned in ascending index order.
pub fn stratified_subsample(labels: &[Label], fraction: f64, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    for class in [Label::Negative, Label::Positive] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let take = ((idx.len() as f64 * fraction).round() as usize).clamp(1.min(idx.len()), idx.len());
        picked.extend_from_slice(&idx[..take]);
    }
    picked.sort_unstable();
    picked
}

/// Refits ridge on `repetitions` stratified 80% subsamples (seeds
/// `seed, seed+1, …`) and partitions each ranking into `group_count` groups.
pub fn repeated_groupings<T: Real>(
    x: ArrayView2<'_, T>,
    labels: &[Label],
    lambda: T,
    group_count: usize,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<FeatureGroups>> {
    if repetitions == 0 {
        return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
    }
    (0..repetitions as u64)
        .map(|r| {
            let rows = stratified_subsample(labels, 0.8, seed.wrapping_add(r));
            let sub_x: Array2<T> = x.select(Axis(0), &rows);
            let sub_y: Vec<Label> = rows.iter().map(|&i| labels[i]).collect();
            let model = fit_ridge_labels(sub_x.view(), &sub_y, lambda)?;
            partition_groups(&rank_features(&model), group_count)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn model(coefs: &[f64]) -> RidgeModel<f64> {
        RidgeModel {
            coefficients: Array1::from(coefs.to_vec()),
            intercept: 0.0,
            lambda: 1.0,
        }
    }

    #[test]
    fn ridge_examples() {
        let x = array![[1.0_f64], [2.0]];
        let m = fit_ridge(x.view(), &[1.0, 2.0], 0.0).unwrap();
        assert!((m.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);

        let m = fit_ridge_with(x.view(), &[2.0, 4.0], 1.0, Intercept::None).unwrap();
        assert!((m.coefficients[0] - 10.0 / 6.0).abs() < 1e-12);

        let x = array![[0.3_f64, 1.0], [0.9, -0.2], [0.1, 0.5], [0.7, 0.7]];
        let m = fit_ridge(x.view(), &[1.0, -1.0, 1.0, -1.0], 1e9).unwrap();
        assert!(m.coefficients.dot(&m.coefficients).sqrt() <= 1e-6);
    }

    #[test]
    fn ridge_rejects_negative_lambda_and_single_class() {
        let x = array![[1.0_f64], [2.0]];
        assert!(matches!(
            fit_ridge(x.view(), &[1.0, 2.0], -0.5),
            Err(Error::NegativeLambda(_))
        ));
        assert!(matches!(
            fit_ridge_labels(x.view(), &[Label::Positive, Label::Positive], 1.0),
            Err(Error::SingleClass)
        ));
        assert!(fit_ridge(x.view(), &[1.0], 1.0).is_err());
    }

    #[test]
    fn minimum_norm_for_duplicate_columns() {
        // Two identical columns: min-norm solution splits weight evenly.
        let x = array![[1.0_f64, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let m = fit_ridge(x.view(), &[2.0, 4.0, 6.0], 0.0).unwrap();
        assert!((m.coefficients[0] - 1.0).abs() < 1e-10);
        assert!((m.coefficients[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_features(&model(&[0.1, -0.5, 0.3])), vec![1, 2, 0]);
        assert_eq!(rank_features(&model(&[0.0, 0.0])), vec![0, 1]);
        assert_eq!(rank_features(&model(&[-2.0])), vec![0]);
    }

    #[test]
    fn partition_examples() {
        let sizes = |p: usize, g: usize| {
            partition_groups(&(0..p).collect::<Vec<_>>(), g)
                .unwrap()
                .groups
                .iter()
                .map(Vec::len)
                .collect::<Vec<_>>()
        };
        assert_eq!(sizes(8, 4), vec![2, 2, 2, 2]);
        assert_eq!(sizes(10, 4), vec![3, 3, 2, 2]);
        assert_eq!(sizes(5, 1), vec![5]);
        assert!(matches!(
            partition_groups(&[0, 1], 3),
            Err(Error::TooManyGroups { groups: 3, features: 2 })
        ));
        assert!(partition_groups(&[0, 1], 0).is_err());
    }

    #[test]
    fn partition_follows_ranking_order() {
        let g = partition_groups(&[4, 0, 3, 1, 2], 2).unwrap();
        assert_eq!(g.groups, vec![vec![4, 0, 3], vec![1, 2]]);
        assert_eq!(g.assignment(), vec![0, 1, 1, 0, 0]);
    }

    #[test]
    fn stability_examples() {
        let g = partition_groups(&[3, 1, 0, 2], 2).unwrap();
        let same = stable_common_features(&vec![g.clone(); 5]).unwrap();
        assert_eq!(same.common, vec![vec![1, 3], vec![0, 2]]);
        assert_eq!(same.repetition_count, 5);

        let other = partition_groups(&[0, 2, 3, 1], 2).unwrap();
        let split = stable_common_features(&[g.clone(), other]).unwrap();
        assert!(split.common[0].is_empty());

        let single = stable_common_features(std::slice::from_ref(&g)).unwrap();
        assert_eq!(single.common, vec![vec![1, 3], vec![0, 2]]);

        let uneven = partition_groups(&[0, 1, 2, 3], 3).unwrap();
        assert!(matches!(
            stable_common_features(&[g, uneven]),
            Err(Error::GroupShapeMismatch)
        ));
        assert!(stable_common_features(&[]).is_err());
    }

    #[test]
    fn subsample_is_stratified_and_seeded() {
        let mut labels = vec![Label::Positive; 10];
        labels.extend(vec![Label::Negative; 20]);
        let a = stratified_subsample(&labels, 0.8, 3);
        assert_eq!(a, stratified_subsample(&labels, 0.8, 3));
        assert_eq!(a.iter().filter(|&&i| i < 10).count(), 8);
        assert_eq!(a.len(), 24);
    }
}
