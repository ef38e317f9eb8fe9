//! Classical and quantum kernels, Gram matrices, and closed-form oracles.

use std::fmt;
use std::io::Write;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::quantum_state::{
    amplitude_qubits, encode_amplitude, encode_angle, encode_zz, reduced_density_matrices,
    state_inner_product, ReducedDensityMatrixSet, StateVector, ZzMapConfig,
};
use crate::scalar::Real;

/// Quantum embedding used by fidelity and projected kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Amplitude,
    Angle,
    Zz(ZzMapConfig),
}

impl Encoding {
    pub fn embed<T: Real>(&self, x: &[T]) -> Result<StateVector<T>> {
        match self {
            Encoding::Amplitude => encode_amplitude(x),
            Encoding::Angle => encode_angle(x),
            Encoding::Zz(cfg) => encode_zz(x, cfg),
        }
    }

    /// Qubits engaged for a `dim`-dimensional input.
    pub fn qubits(&self, dim: usize) -> usize {
        match self {
            Encoding::Amplitude => amplitude_qubits(dim),
            Encoding::Angle | Encoding::Zz(_) => dim,
        }
    }

    fn short_name(&self) -> &'static str {
        match self {
            Encoding::Amplitude => "amplitude",
            Encoding::Angle => "angle",
            Encoding::Zz(_) => "zz",
        }
    }
}

/// A kernel function and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec<T> {
    /// `exp(-γ‖x − y‖²)`
    Rbf { gamma: T },
    /// `(x·y + coef)^degree`
    Polynomial { degree: u32, coef: T },
    /// `|⟨φ(x)|φ(y)⟩|²`
    Fidelity(Encoding),
    /// `exp(-γ Σ_k ‖ρ_k(x) − ρ_k(y)‖_F²)` over one-qubit reduced density matrices.
    Projected { encoding: Encoding, gamma: T },
}

impl<T: Real> KernelSpec<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } | KernelSpec::Projected { gamma, .. } => {
                if !(gamma > T::zero()) || !gamma.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "kernel gamma must be positive, got {gamma}"
                    )));
                }
            }
            KernelSpec::Polynomial { degree, coef } => {
                if degree == 0 {
                    return Err(Error::InvalidParameter(
                        "polynomial degree must be at least 1".into(),
                    ));
                }
                if !coef.is_finite() {
                    return Err(Error::InvalidParameter("polynomial coef is not finite".into()));
                }
            }
            KernelSpec::Fidelity(_) => {}
        }
        if let Some(Encoding::Zz(cfg)) = self.encoding() {
            if cfg.repetitions == 0 {
                return Err(Error::InvalidParameter(
                    "ZZ map needs at least one repetition".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn encoding(&self) -> Option<Encoding> {
        match *self {
            KernelSpec::Fidelity(e) | KernelSpec::Projected { encoding: e, .. } => Some(e),
            _ => None,
        }
    }

    pub fn is_quantum(&self) -> bool {
        self.encoding().is_some()
    }

    /// Qubits simulated for a `dim`-dimensional input, `None` for classical kernels.
    pub fn qubits(&self, dim: usize) -> Option<usize> {
        self.encoding().map(|e| e.qubits(dim))
    }

    /// Whether a Gram matrix of this kernel has a unit diagonal.
    pub fn has_unit_diagonal(&self) -> bool {
        !matches!(self, KernelSpec::Polynomial { .. })
    }

    fn embed(&self, x: &[T]) -> Result<Embedded<T>> {
        Ok(match self {
            KernelSpec::Rbf { .. } | KernelSpec::Polynomial { .. } => Embedded::Raw(x.to_vec()),
            KernelSpec::Fidelity(e) => Embedded::State(e.embed(x)?),
            KernelSpec::Projected { encoding, .. } => {
                Embedded::Rdm(reduced_density_matrices(&encoding.embed(x)?))
            }
        })
    }

    fn pair(&self, a: &Embedded<T>, b: &Embedded<T>) -> Result<T> {
        match (self, a, b) {
            (KernelSpec::Rbf { gamma }, Embedded::Raw(x), Embedded::Raw(y)) => {
                let d2: T = x.iter().zip(y).map(|(&p, &q)| (p - q) * (p - q)).sum();
                Ok((-*gamma * d2).exp())
            }
            (KernelSpec::Polynomial { degree, coef }, Embedded::Raw(x), Embedded::Raw(y)) => {
                let dot: T = x.iter().zip(y).map(|(&p, &q)| p * q).sum();
                Ok((dot + *coef).powi(*degree as i32))
            }
            (KernelSpec::Fidelity(_), Embedded::State(x), Embedded::State(y)) => {
                Ok(state_inner_product(x, y)?.norm_sqr())
            }
            (KernelSpec::Projected { gamma, .. }, Embedded::Rdm(x), Embedded::Rdm(y)) => {
                Ok((-*gamma * x.squared_frobenius_distance(y)?).exp())
            }
            _ => unreachable!("embedding produced by a different kernel kind"),
        }
    }
}

impl<T: Real> fmt::Display for KernelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Rbf { gamma } => write!(f, "rbf(gamma={gamma})"),
            KernelSpec::Polynomial { degree, coef } => {
                write!(f, "polynomial(degree={degree}, coef={coef})")
            }
            KernelSpec::Fidelity(e) => write!(f, "fidelity-{}", e.short_name()),
            KernelSpec::Projected { encoding, gamma } => {
                write!(f, "projected-{}(gamma={gamma})", encoding.short_name())
            }
        }
    }
}

enum Embedded<T> {
    Raw(Vec<T>),
    State(StateVector<T>),
    Rdm(ReducedDensityMatrixSet<T>),
}

fn check_same_len(x: usize, y: usize) -> Result<()> {
    if x != y {
        return Err(Error::DimensionMismatch {
            expected: x,
            found: y,
        });
    }
    Ok(())
}

/// Evaluates one kernel entry.
pub fn kernel_value<T: Real>(spec: &KernelSpec<T>, x: &[T], y: &[T]) -> Result<T> {
    check_same_len(x.len(), y.len())?;
    spec.validate()?;
    spec.pair(&spec.embed(x)?, &spec.embed(y)?)
}

fn row_vec<T: Real>(row: ArrayView1<'_, T>) -> Vec<T> {
    row.iter().copied().collect()
}

fn embed_rows<T: Real>(spec: &KernelSpec<T>, x: ArrayView2<'_, T>) -> Result<Vec<Embedded<T>>> {
    let rows: Vec<Vec<T>> = x.rows().into_iter().map(row_vec).collect();
    rows.par_iter().map(|r| spec.embed(r)).collect()
}

/// Symmetric kernel matrix together with the kernel that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix<T> {
    pub values: Array2<T>,
    pub spec: KernelSpec<T>,
    pub row_ids: Vec<String>,
}

impl<T: Real> GramMatrix<T> {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn max_asymmetry(&self) -> T {
        let n = self.len();
        let mut worst = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.values[[i, j]] - self.values[[j, i]]).abs());
            }
        }
        worst
    }

    pub fn max_diagonal_deviation(&self) -> T {
        self.values
            .diag()
            .iter()
            .fold(T::zero(), |acc, &d| acc.max((d - T::one()).abs()))
    }

    pub fn min_eigenvalue(&self) -> T {
        linalg::min_eigenvalue(self.values.view())
    }

    /// Principal submatrix on `indices` (rows and columns).
    pub fn select(&self, indices: &[usize]) -> GramMatrix<T> {
        let values = Array2::from_shape_fn((indices.len(), indices.len()), |(i, j)| {
            self.values[[indices[i], indices[j]]]
        });
        GramMatrix {
            values,
            spec: self.spec,
            row_ids: indices.iter().map(|&i| self.row_ids[i].clone()).collect(),
        }
    }

    /// Row-major CSV, one matrix row per line, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in self.values.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{:.16e}", v.as_f64())).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Gram matrix over the rows of `x`; row ids default to row indices.
pub fn gram_matrix<T: Real>(spec: &KernelSpec<T>, x: ArrayView2<'_, T>) -> Result<GramMatrix<T>> {
    let ids = (0..x.nrows()).map(|i| i.to_string()).collect();
    gram_matrix_with_ids(spec, x, ids)
}

pub fn gram_matrix_with_ids<T: Real>(
    spec: &KernelSpec<T>,
    x: ArrayView2<'_, T>,
    row_ids: Vec<String>,
) -> Result<GramMatrix<T>> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("gram matrix samples"));
    }
    check_same_len(n, row_ids.len())?;
    spec.validate()?;
    let embedded = embed_rows(spec, x)?;
    let upper: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| spec.pair(&embedded[i], &embedded[j]))
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    let mut values = Array2::<T>::zeros((n, n));
    for (i, row) in upper.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j = i + offset;
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    Ok(GramMatrix {
        values,
        spec: *spec,
        row_ids,
    })
}

/// Kernel values between every row of `rows` and every row of `cols`.
pub fn cross_gram_matrix<T: Real>(
    spec: &KernelSpec<T>,
    rows: ArrayView2<'_, T>,
    cols: ArrayView2<'_, T>,
) -> Result<Array2<T>> {
    check_same_len(cols.ncols(), rows.ncols())?;
    spec.validate()?;
    let left = embed_rows(spec, rows)?;
    let right = embed_rows(spec, cols)?;
    let entries: Vec<Vec<T>> = left
        .par_iter()
        .map(|a| right.iter().map(|b| spec.pair(a, b)).collect::<Result<Vec<T>>>())
        .collect::<Result<_>>()?;
    let m = rows.nrows();
    let n = cols.nrows();
    Ok(Array2::from_shape_fn((m, n), |(i, j)| entries[i][j]))
}

/// Closed form of the angle-encoding fidelity kernel: Π_i cos²((x_i − y_i)/2).
pub fn angle_kernel_closed_form<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    check_same_len(x.len(), y.len())?;
    let half = T::lit(0.5);
    Ok(x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let c = ((a - b) * half).cos();
            c * c
        })
        .fold(T::one(), |acc, v| acc * v))
}

/// `1 / (d · Var(x))` over all entries of the training matrix; 1 when the
/// variance vanishes.
pub fn rbf_gamma_heuristic<T: Real>(x: ArrayView2<'_, T>) -> T {
    let count = x.len();
    let d = x.ncols();
    if count == 0 || d == 0 {
        return T::one();
    }
    let n = T::from_count(count);
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    if var > T::zero() && var.is_finite() {
        T::one() / (T::from_count(d) * var)
    } else {
        T::one()
    }
}
