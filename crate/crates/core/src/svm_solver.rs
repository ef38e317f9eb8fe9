//! Soft-margin kernel SVM: the dual problem
//!
//! ```text
//! maximize   Σ α_i − ½ Σ_ij α_i α_j y_i y_j K_ij
//! subject to Σ α_i y_i = 0,   0 ≤ α_i ≤ C·w(y_i)
//! ```
//!
//! solved by sequential minimal optimization. Working pairs are chosen
//! deterministically: the maximal violator `i` first, then the partner `j`
//! with the largest second-order gain (lowest index wins ties). The solver
//! stops when the maximal violating pair gap drops below the KKT tolerance.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_engine::GramMatrix;
use crate::label::{require_both_classes, Label};
use crate::scalar::Real;

/// Balanced inverse-frequency class weights, `w(c) = n / (2·n_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights<T> {
    pub positive: T,
    pub negative: T,
}

impl<T: Real> ClassWeights<T> {
    pub fn weight(&self, label: Label) -> T {
        match label {
            Label::Positive => self.positive,
            Label::Negative => self.negative,
        }
    }

    /// Per-sample box bounds `C·w(y_i)`.
    pub fn box_bounds(&self, labels: &[Label], c: T) -> Vec<T> {
        labels.iter().map(|&l| c * self.weight(l)).collect()
    }
}

pub fn compute_class_weights<T: Real>(labels: &[Label]) -> Result<ClassWeights<T>> {
    let (pos, neg) = require_both_classes(labels)?;
    let n = T::from_count(labels.len());
    let two = T::lit(2.0);
    Ok(ClassWeights {
        positive: n / (two * T::from_count(pos)),
        negative: n / (two * T::from_count(neg)),
    })
}

/// A training problem: kernel matrix, labels, and per-sample box bounds.
#[derive(Debug, Clone)]
pub struct SvmProblem<T> {
    pub gram: GramMatrix<T>,
    pub labels: Vec<Label>,
    pub box_upper: Vec<T>,
}

impl<T: Real> SvmProblem<T> {
    pub fn new(gram: GramMatrix<T>, labels: Vec<Label>, box_upper: Vec<T>) -> Result<Self> {
        let n = labels.len();
        if gram.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: gram.len(),
            });
        }
        if box_upper.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: box_upper.len(),
            });
        }
        require_both_classes(&labels)?;
        if let Some(bad) = box_upper.iter().find(|&&c| !(c > T::zero()) || !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "box bound must be positive and finite, got {bad}"
            )));
        }
        Ok(Self {
            gram,
            labels,
            box_upper,
        })
    }

    /// Problem with box bounds `C·w(y_i)` from balanced class weights.
    pub fn weighted(gram: GramMatrix<T>, labels: Vec<Label>, c: T) -> Result<Self> {
        let weights = compute_class_weights(&labels)?;
        let box_upper = weights.box_bounds(&labels, c);
        Self::new(gram, labels, box_upper)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Dual objective `Σα − ½ αᵀQα` at `alphas`.
    pub fn dual_objective(&self, alphas: &[T]) -> T {
        let k = &self.gram.values;
        let n = self.len();
        let mut quad = T::zero();
        for i in 0..n {
            if alphas[i] == T::zero() {
                continue;
            }
            let yi: T = self.labels[i].sign();
            let mut row = T::zero();
            for j in 0..n {
                row += alphas[j] * self.labels[j].sign::<T>() * k[[i, j]];
            }
            quad += alphas[i] * yi * row;
        }
        alphas.iter().copied().sum::<T>() - T::lit(0.5) * quad
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<T> {
    /// Stopping tolerance on the maximal KKT violation.
    pub kkt_tolerance: T,
    /// Iteration budget in units of n pair updates.
    pub max_passes: usize,
    /// α above this counts as a support vector.
    pub alpha_threshold: T,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            kkt_tolerance: T::lit(1e-3),
            max_passes: 10_000,
            alpha_threshold: T::lit(1e-8),
        }
    }
}

/// Trained dual model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel<T> {
    pub alphas: Vec<T>,
    pub bias: T,
    pub support_indices: Vec<usize>,
    pub labels: Vec<Label>,
    pub sample_ids: Vec<String>,
    pub iterations: usize,
}

impl<T: Real> SvmModel<T> {
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Σ α_i y_i.
    pub fn equality_residual(&self) -> T {
        self.alphas
            .iter()
            .zip(&self.labels)
            .map(|(&a, &l)| a * l.sign::<T>())
            .sum()
    }
}

/// Solver failure. `NotConverged` keeps the last iterate.
#[derive(Debug, thiserror::Error)]
pub enum SolveError<T: Real> {
    #[error(transparent)]
    Problem(#[from] Error),
    #[error("svm solver did not converge after {iterations} iterations (max KKT violation {max_violation})")]
    NotConverged {
        model: Box<SvmModel<T>>,
        max_violation: T,
        iterations: usize,
    },
}

impl<T: Real> From<SolveError<T>> for Error {
    fn from(err: SolveError<T>) -> Self {
        match err {
            SolveError::Problem(e) => e,
            SolveError::NotConverged {
                max_violation,
                iterations,
                ..
            } => Error::NotConverged {
                iterations,
                max_violation: max_violation.as_f64(),
            },
        }
    }
}

const TAU: f64 = 1e-12;

pub fn solve_dual<T: Real>(
    problem: &SvmProblem<T>,
    config: &TrainConfig<T>,
) -> Result<SvmModel<T>, SolveError<T>> {
    if !(config.kkt_tolerance > T::zero()) || config.max_passes == 0 {
        return Err(Error::InvalidParameter("train config values must be positive".into()).into());
    }
    let n = problem.len();
    require_both_classes(&problem.labels)?;
    let k = &problem.gram.values;
    let y: Vec<T> = problem.labels.iter().map(|l| l.sign()).collect();
    let c = &problem.box_upper;
    let tau = T::lit(TAU);
    let two = T::lit(2.0);

    let mut alpha = vec![T::zero(); n];
    // Gradient of ½αᵀQα − Σα.
    let mut grad = vec![-T::one(); n];
    let max_iter = config.max_passes.saturating_mul(n.max(1));
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        let in_up = |t: usize, a: &[T]| {
            if y[t] > T::zero() {
                a[t] < c[t]
            } else {
                a[t] > T::zero()
            }
        };
        let in_low = |t: usize, a: &[T]| {
            if y[t] > T::zero() {
                a[t] > T::zero()
            } else {
                a[t] < c[t]
            }
        };

        let mut g_max = T::neg_infinity();
        let mut i_sel = None;
        for t in 0..n {
            if in_up(t, &alpha) {
                let v = -y[t] * grad[t];
                if v > g_max {
                    g_max = v;
                    i_sel = Some(t);
                }
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };

        let mut g_min = T::infinity();
        let mut best_gain = T::infinity();
        let mut j_sel = None;
        for t in 0..n {
            if !in_low(t, &alpha) {
                continue;
            }
            let v = -y[t] * grad[t];
            if v < g_min {
                g_min = v;
            }
            let diff = g_max - v;
            if diff > T::zero() {
                let mut quad = k[[i, i]] + k[[t, t]] - two * k[[i, t]];
                if quad <= T::zero() {
                    quad = tau;
                }
                let gain = -(diff * diff) / quad;
                if gain < best_gain {
                    best_gain = gain;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel.filter(|_| g_max - g_min >= config.kkt_tolerance) else {
            converged = true;
            break;
        };

        iterations += 1;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ci, cj) = (c[i], c[j]);
        if y[i] != y[j] {
            let mut quad = k[[i, i]] + k[[j, j]] - two * k[[i, j]];
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > T::zero() {
                if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = k[[i, i]] + k[[j, j]] - two * k[[i, j]];
            if quad <= T::zero() {
                quad = tau;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < T::zero() {
                alpha[j] = T::zero();
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = sum;
            }
        }

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k[[t, i]] * di + y[j] * k[[t, j]] * dj);
        }
    }

    let model = finish_model(problem, alpha, config.alpha_threshold, iterations);
    if converged {
        Ok(model)
    } else {
        let max_violation = max_kkt_violation(&model, problem)?;
        Err(SolveError::NotConverged {
            model: Box::new(model),
            max_violation,
            iterations,
        })
    }
}

/// Σ_j α_j y_j K_ij for every i, recomputed from scratch.
fn margins_without_bias<T: Real>(problem: &SvmProblem<T>, alphas: &[T]) -> Vec<T> {
    let k = &problem.gram.values;
    let n = problem.len();
    (0..n)
        .map(|i| {
            let mut s = T::zero();
            for j in 0..n {
                if alphas[j] != T::zero() {
                    s += alphas[j] * problem.labels[j].sign::<T>() * k[[i, j]];
                }
            }
            s
        })
        .collect()
}

fn finish_model<T: Real>(
    problem: &SvmProblem<T>,
    alphas: Vec<T>,
    threshold: T,
    iterations: usize,
) -> SvmModel<T> {
    let s = margins_without_bias(problem, &alphas);
    let mut free_sum = T::zero();
    let mut free_count = 0usize;
    let mut lower = T::neg_infinity();
    let mut upper = T::infinity();
    for i in 0..problem.len() {
        let y: T = problem.labels[i].sign();
        let v = y - s[i];
        let a = alphas[i];
        let c = problem.box_upper[i];
        if a > threshold && a < c - threshold {
            free_sum += v;
            free_count += 1;
        } else if a <= threshold {
            // y·f ≥ 1
            if y > T::zero() {
                lower = lower.max(v);
            } else {
                upper = upper.min(v);
            }
        } else if y > T::zero() {
            // y·f ≤ 1
            upper = upper.min(v);
        } else {
            lower = lower.max(v);
        }
    }
    let bias = if free_count > 0 {
        free_sum / T::from_count(free_count)
    } else if lower.is_finite() && upper.is_finite() {
        (lower + upper) * T::lit(0.5)
    } else if lower.is_finite() {
        lower
    } else if upper.is_finite() {
        upper
    } else {
        T::zero()
    };
    let support_indices = alphas
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > threshold)
        .map(|(i, _)| i)
        .collect();
    SvmModel {
        alphas,
        bias,
        support_indices,
        labels: problem.labels.clone(),
        sample_ids: problem.gram.row_ids.clone(),
        iterations,
    }
}

/// `f_j = Σ_i α_i y_i cross[j][i] + b` for each row of `cross`.
pub fn decision_values<T: Real>(model: &SvmModel<T>, cross: ArrayView2<'_, T>) -> Result<Vec<T>> {
    if cross.ncols() != model.len() {
        return Err(Error::DimensionMismatch {
            expected: model.len(),
            found: cross.ncols(),
        });
    }
    let coef: Vec<(usize, T)> = model
        .alphas
        .iter()
        .zip(&model.labels)
        .enumerate()
        .filter(|(_, (&a, _))| a != T::zero())
        .map(|(i, (&a, &l))| (i, a * l.sign::<T>()))
        .collect();
    Ok(cross
        .rows()
        .into_iter()
        .map(|row| coef.iter().map(|&(i, w)| w * row[i]).sum::<T>() + model.bias)
        .collect())
}

/// Largest KKT violation in margin units, judged at the model's bias.
pub fn max_kkt_violation<T: Real>(model: &SvmModel<T>, problem: &SvmProblem<T>) -> Result<T> {
    if model.len() != problem.len() {
        return Err(Error::DimensionMismatch {
            expected: problem.len(),
            found: model.len(),
        });
    }
    let s = margins_without_bias(problem, &model.alphas);
    let threshold = T::lit(1e-8);
    let mut worst = T::zero();
    for i in 0..problem.len() {
        let y: T = problem.labels[i].sign();
        let yf = y * (s[i] + model.bias);
        let a = model.alphas[i];
        let c = problem.box_upper[i];
        let violation = if a <= threshold {
            (T::one() - yf).max(T::zero())
        } else if a >= c - threshold {
            (yf - T::one()).max(T::zero())
        } else {
            (yf - T::one()).abs()
        };
        worst = worst.max(violation);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_engine::{gram_matrix, KernelSpec};
    use ndarray::{array, Array2};

    fn gram_from(values: Array2<f64>) -> GramMatrix<f64> {
        let n = values.nrows();
        GramMatrix {
            values,
            spec: KernelSpec::Rbf { gamma: 1.0 },
            row_ids: (0..n).map(|i| format!("s{i}")).collect(),
        }
    }

    fn labels(signs: &[i32]) -> Vec<Label> {
        signs.iter().map(|&s| Label::from_sign(s).unwrap()).collect()
    }

    #[test]
    fn class_weight_examples() {
        let mut l = vec![Label::Positive; 20];
        l.extend(vec![Label::Negative; 20]);
        let w: ClassWeights<f64> = compute_class_weights(&l).unwrap();
        assert_eq!((w.positive, w.negative), (1.0, 1.0));

        let mut l = vec![Label::Positive; 10];
        l.extend(vec![Label::Negative; 30]);
        let w: ClassWeights<f64> = compute_class_weights(&l).unwrap();
        assert_eq!(w.positive, 2.0);
        assert!((w.negative - 40.0 / 60.0).abs() < 1e-15);
        assert_eq!(w.box_bounds(&l[9..11], 3.0), vec![6.0, 2.0]);

        let mut l = vec![Label::Positive; 1];
        l.extend(vec![Label::Negative; 99]);
        let w: ClassWeights<f64> = compute_class_weights(&l).unwrap();
        assert_eq!(w.positive, 50.0);
        assert!((w.negative - 100.0 / 198.0).abs() < 1e-15);

        assert!(matches!(
            compute_class_weights::<f64>(&[Label::Positive; 4]),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn problem_validation() {
        let g = gram_from(Array2::eye(2));
        assert!(SvmProblem::new(g.clone(), labels(&[1, 1]), vec![1.0, 1.0]).is_err());
        assert!(SvmProblem::new(g.clone(), labels(&[1, -1]), vec![1.0, 0.0]).is_err());
        assert!(SvmProblem::new(g.clone(), labels(&[1, -1, 1]), vec![1.0; 3]).is_err());
        assert!(SvmProblem::new(g, labels(&[1, -1]), vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn two_point_problem_is_symmetric_and_correct() {
        let x = array![[0.0_f64], [1.0]];
        let gram = gram_matrix(&KernelSpec::Rbf { gamma: 1.0 }, x.view()).unwrap();
        let problem = SvmProblem::new(gram.clone(), labels(&[-1, 1]), vec![1e3; 2]).unwrap();
        let model = solve_dual(&problem, &TrainConfig::default()).unwrap();
        assert!((model.alphas[0] - model.alphas[1]).abs() < 1e-12);
        assert!(model.alphas[0] > 0.0);
        // Closed form: α = 2 / (2 − 2k) with k = e^{-1}.
        let expected = 1.0 / (1.0 - (-1.0f64).exp());
        assert!((model.alphas[0] - expected).abs() < 1e-9);
        let f = decision_values(&model, gram.values.view()).unwrap();
        assert!(f[0] < 0.0 && f[1] > 0.0);
        assert!(max_kkt_violation(&model, &problem).unwrap() <= 1e-3);
    }

    #[test]
    fn identity_gram_objective_not_below_zero() {
        let problem =
            SvmProblem::new(gram_from(Array2::eye(4)), labels(&[1, -1, 1, -1]), vec![1.0; 4])
                .unwrap();
        let model = solve_dual(&problem, &TrainConfig::default()).unwrap();
        assert!(problem.dual_objective(&model.alphas) >= 0.0);
        assert!(problem.dual_objective(&model.alphas) > 1.0);
    }

    #[test]
    fn zero_alpha_model_scores_bias() {
        let model = SvmModel {
            alphas: vec![0.0; 3],
            bias: 0.25,
            support_indices: vec![],
            labels: labels(&[1, -1, 1]),
            sample_ids: vec!["a".into(), "b".into(), "c".into()],
            iterations: 0,
        };
        let cross = array![[0.3, 1.0, 2.0], [5.0, 6.0, 7.0]];
        assert_eq!(decision_values(&model, cross.view()).unwrap(), vec![0.25, 0.25]);
        assert!(decision_values(&model, array![[1.0]].view()).is_err());
    }

    #[test]
    fn zero_alpha_violates_kkt_on_separable_pair() {
        let x = array![[0.0_f64], [1.0]];
        let gram = gram_matrix(&KernelSpec::Rbf { gamma: 1.0 }, x.view()).unwrap();
        let problem = SvmProblem::new(gram, labels(&[-1, 1]), vec![10.0; 2]).unwrap();
        let model = SvmModel {
            alphas: vec![0.0; 2],
            bias: 0.0,
            support_indices: vec![],
            labels: problem.labels.clone(),
            sample_ids: problem.gram.row_ids.clone(),
            iterations: 0,
        };
        assert!(max_kkt_violation(&model, &problem).unwrap() > 0.0);
    }

    #[test]
    fn perturbing_alpha_increases_violation() {
        let x = array![[0.0_f64, 0.1], [1.0, 0.3], [0.2, 1.0], [1.1, 1.2], [0.5, 0.4]];
        let gram = gram_matrix(&KernelSpec::Rbf { gamma: 1.0 }, x.view()).unwrap();
        let problem = SvmProblem::new(gram, labels(&[-1, 1, -1, 1, 1]), vec![1.0; 5]).unwrap();
        let model = solve_dual(&problem, &TrainConfig::default()).unwrap();
        let base = max_kkt_violation(&model, &problem).unwrap();
        let mut bumped = model.clone();
        let idx = (0..5).find(|&i| bumped.alphas[i] < 0.9).unwrap();
        bumped.alphas[idx] += 0.1;
        assert!(max_kkt_violation(&bumped, &problem).unwrap() > base);
    }

    #[test]
    fn not_converged_reports_best_model() {
        let x = array![[0.0_f64, 0.1], [1.0, 0.3], [0.2, 1.0], [1.1, 1.2], [0.5, 0.4]];
        let gram = gram_matrix(&KernelSpec::Rbf { gamma: 1.0 }, x.view()).unwrap();
        let problem = SvmProblem::new(gram, labels(&[-1, 1, -1, 1, 1]), vec![100.0; 5]).unwrap();
        let cfg = TrainConfig {
            kkt_tolerance: 1e-12,
            max_passes: 1,
            alpha_threshold: 1e-8,
        };
        match solve_dual(&problem, &cfg) {
            Err(SolveError::NotConverged { model, iterations, .. }) => {
                assert_eq!(iterations, 5);
                assert_eq!(model.alphas.len(), 5);
                let err: Error = SolveError::NotConverged {
                    model,
                    max_violation: 0.5,
                    iterations,
                }
                .into();
                assert!(matches!(err, Error::NotConverged { iterations: 5, .. }));
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn solver_is_deterministic() {
        let x = array![[0.0_f64, 0.1], [1.0, 0.3], [0.2, 1.0], [1.1, 1.2], [0.5, 0.4]];
        let gram = gram_matrix(&KernelSpec::Rbf { gamma: 2.0 }, x.view()).unwrap();
        let problem = SvmProblem::weighted(gram, labels(&[-1, 1, -1, 1, 1]), 5.0).unwrap();
        let a = solve_dual(&problem, &TrainConfig::default()).unwrap();
        let b = solve_dual(&problem, &TrainConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.equality_residual().abs() < 1e-12);
    }
}
