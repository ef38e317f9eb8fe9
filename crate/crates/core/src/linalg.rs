//! Dense symmetric eigensolver and thin SVD, both cyclic Jacobi.
//!
//! Jacobi rotations are slower than Householder-based routines but they are
//! short, generic over [`Real`], and accurate to working precision in the
//! small singular values, which the ridge pseudoinverse depends on.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::scalar::Real;

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
///
/// Singular values are sorted in descending order. `u` is `m × r` and `v` is
/// `n × r` with `r = min(m, n)`; both have orthonormal columns.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Array2<T>,
    pub singular_values: Array1<T>,
    pub v: Array2<T>,
}

/// Computes the thin SVD of `a` by one-sided Jacobi rotations.
pub fn svd<T: Real>(a: ArrayView2<'_, T>) -> Svd<T> {
    let (m, n) = a.dim();
    if m >= n {
        one_sided_jacobi(a.to_owned())
    } else {
        let t = one_sided_jacobi(a.t().to_owned());
        Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        }
    }
}

// Requires rows >= cols.
fn one_sided_jacobi<T: Real>(mut work: Array2<T>) -> Svd<T> {
    let (m, n) = work.dim();
    let mut v = Array2::<T>::eye(n);
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..m {
                    let ap = work[[i, p]];
                    let aq = work[[i, q]];
                    alpha += ap * ap;
                    beta += aq * aq;
                    gamma += ap * aq;
                }
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut work, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = (0..n)
        .map(|j| work.column(j).iter().map(|&x| x * x).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        norms[b]
            .partial_cmp(&norms[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let s_max = order.first().map(|&j| norms[j]).unwrap_or_else(T::zero);
    let cutoff = s_max * eps * T::from_count(m.max(n));
    let mut u = Array2::<T>::zeros((m, n));
    let mut v_sorted = Array2::<T>::zeros((n, n));
    let mut singular_values = Array1::<T>::zeros(n);
    let mut filled = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        singular_values[dst] = norms[src];
        v_sorted.column_mut(dst).assign(&v.column(src));
        if norms[src] > cutoff && norms[src] > T::zero() {
            let col = work.column(src).mapv(|x| x / norms[src]);
            u.column_mut(dst).assign(&col);
            filled.push(dst);
        }
    }
    complete_orthonormal_columns(&mut u, &filled);
    Svd {
        u,
        singular_values,
        v: v_sorted,
    }
}

fn rotate_columns<T: Real>(mat: &mut Array2<T>, p: usize, q: usize, c: T, s: T) {
    for mut row in mat.axis_iter_mut(Axis(0)) {
        let xp = row[p];
        let xq = row[q];
        row[p] = c * xp - s * xq;
        row[q] = s * xp + c * xq;
    }
}

/// Fills the columns of `mat` not listed in `filled` so that all columns are
/// orthonormal. Candidates are standard basis vectors, Gram-Schmidt twice.
fn complete_orthonormal_columns<T: Real>(mat: &mut Array2<T>, filled: &[usize]) {
    let (rows, cols) = mat.dim();
    let mut done: Vec<usize> = filled.to_vec();
    let mut candidate = 0;
    for j in 0..cols {
        if filled.contains(&j) {
            continue;
        }
        while candidate < rows {
            let mut vec = Array1::<T>::zeros(rows);
            vec[candidate] = T::one();
            candidate += 1;
            for _ in 0..2 {
                for &k in &done {
                    let proj = mat.column(k).dot(&vec);
                    vec.scaled_add(-proj, &mat.column(k));
                }
            }
            let norm = vec.dot(&vec).sqrt();
            if norm > T::lit(1e-3) {
                mat.column_mut(j).assign(&vec.mapv(|x| x / norm));
                done.push(j);
                break;
            }
        }
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with the matching eigenvectors as
/// columns. Only the upper triangle of `a` is read.
pub fn symmetric_eigen<T: Real>(a: ArrayView2<'_, T>) -> (Array1<T>, Array2<T>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen needs a square matrix");
    let mut m = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            m[[i, j]] = a[[i, j]];
            m[[j, i]] = a[[i, j]];
        }
    }
    let mut vecs = Array2::<T>::eye(n);
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        let diag: T = (0..n).map(|i| m[[i, i]] * m[[i, i]]).sum();
        if off <= eps * eps * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (apq + apq);
                let t = theta.signum() / (theta.abs() + (T::one() + theta * theta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                rotate_columns(&mut vecs, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        m[[a, a]]
            .partial_cmp(&m[[b, b]])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut sorted = Array2::<T>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        sorted.column_mut(dst).assign(&vecs.column(src));
    }
    (values, sorted)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<T: Real>(a: ArrayView2<'_, T>) -> T {
    let (values, _) = symmetric_eigen(a);
    values.iter().copied().fold(T::infinity(), T::min)
}
