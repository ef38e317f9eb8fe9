//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the library's numerics; dense matrices come from
//! nalgebra.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qsvm::Label;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Labels with both classes present.
pub fn mixed_labels(rng: &mut ChaCha8Rng, n: usize) -> Vec<Label> {
    loop {
        let labels: Vec<Label> = (0..n)
            .map(|_| if rng.random_bool(0.5) { Label::Positive } else { Label::Negative })
            .collect();
        let pos = labels.iter().filter(|&&l| l == Label::Positive).count();
        if pos > 0 && pos < n {
            return labels;
        }
    }
}

pub fn sign(l: Label) -> f64 {
    match l {
        Label::Positive => 1.0,
        Label::Negative => -1.0,
    }
}

pub fn angle_closed_form(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| ((a - b) / 2.0).cos().powi(2))
        .product()
}

pub fn amplitude_closed_form(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx: f64 = x.iter().map(|a| a * a).sum();
    let ny: f64 = y.iter().map(|a| a * a).sum();
    dot * dot / (nx * ny)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// `gate` acting on `qubit` of an `n`-qubit register; qubit 0 is the leftmost factor.
pub fn embed_single(n: usize, qubit: usize, gate: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let id = DMatrix::<Complex64>::identity(2, 2);
    let mut out = DMatrix::<Complex64>::identity(1, 1);
    for q in 0..n {
        out = kron(&out, if q == qubit { gate } else { &id });
    }
    out
}

pub fn hadamard() -> DMatrix<Complex64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
}

pub fn rz(theta: f64) -> DMatrix<Complex64> {
    let neg = Complex64::from_polar(1.0, -theta / 2.0);
    let pos = Complex64::from_polar(1.0, theta / 2.0);
    DMatrix::from_row_slice(2, 2, &[neg, c(0.0, 0.0), c(0.0, 0.0), pos])
}

pub fn pauli(which: char) -> DMatrix<Complex64> {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match which {
        'X' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => DMatrix::identity(2, 2),
    }
}

/// CX as `|0⟩⟨0|_c ⊗ I + |1⟩⟨1|_c ⊗ X_t`.
pub fn cx(n: usize, control: usize, target: usize) -> DMatrix<Complex64> {
    let p0 = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    let p1 = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    let x = pauli('X');
    let id = DMatrix::<Complex64>::identity(2, 2);
    let mut a = DMatrix::<Complex64>::identity(1, 1);
    let mut b = DMatrix::<Complex64>::identity(1, 1);
    for q in 0..n {
        a = kron(&a, if q == control { &p0 } else { &id });
        b = kron(
            &b,
            if q == control {
                &p1
            } else if q == target {
                &x
            } else {
                &id
            },
        );
    }
    a + b
}

/// Full unitary of the ZZ feature map.
pub fn zz_unitary(x: &[f64], repetitions: usize) -> DMatrix<Complex64> {
    let n = x.len();
    let dim = 1 << n;
    let pi = std::f64::consts::PI;
    let mut layer = DMatrix::<Complex64>::identity(dim, dim);
    for q in 0..n {
        layer = embed_single(n, q, &hadamard()) * layer;
    }
    for (q, &xq) in x.iter().enumerate() {
        layer = embed_single(n, q, &rz(2.0 * xq)) * layer;
    }
    for k in 0..n.saturating_sub(1) {
        let phase = 2.0 * (pi - x[k]) * (pi - x[k + 1]);
        layer = cx(n, k, k + 1) * layer;
        layer = embed_single(n, k + 1, &rz(phase)) * layer;
        layer = cx(n, k, k + 1) * layer;
    }
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    for _ in 0..repetitions {
        u = &layer * u;
    }
    u
}

pub fn zz_state(x: &[f64], repetitions: usize) -> DVector<Complex64> {
    let dim = 1 << x.len();
    let mut zero = DVector::<Complex64>::zeros(dim);
    zero[0] = c(1.0, 0.0);
    zz_unitary(x, repetitions) * zero
}

/// Single-qubit reduced state from Pauli expectations: ½(I + ⟨X⟩X + ⟨Y⟩Y + ⟨Z⟩Z).
pub fn reduced_state_from_paulis(psi: &DVector<Complex64>, qubit: usize) -> DMatrix<Complex64> {
    let n = psi.len().trailing_zeros() as usize;
    let mut rho = DMatrix::<Complex64>::identity(2, 2) * c(0.5, 0.0);
    for p in ['X', 'Y', 'Z'] {
        let op = embed_single(n, qubit, &pauli(p));
        let expectation = psi.dotc(&(op * psi)).re;
        rho += pauli(p) * c(0.5 * expectation, 0.0);
    }
    rho
}

/// Projected kernel built from Pauli-derived reduced states.
pub fn projected_kernel_oracle(a: &DVector<Complex64>, b: &DVector<Complex64>, gamma: f64) -> f64 {
    let n = a.len().trailing_zeros() as usize;
    let dist: f64 = (0..n)
        .map(|k| {
            let d = reduced_state_from_paulis(a, k) - reduced_state_from_paulis(b, k);
            d.iter().map(|z| z.norm_sqr()).sum::<f64>()
        })
        .sum();
    (-gamma * dist).exp()
}

pub fn rbf_gram(x: &[Vec<f64>], gamma: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        let d: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b).powi(2)).sum();
        (-gamma * d).exp()
    })
}

pub fn dual_objective(k: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[(i, j)];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Exact maximum of the SVM dual by enumerating every assignment of each
/// multiplier to {lower bound, upper bound, free} and solving the
/// equality-constrained stationarity system on the free set. Exact for
/// positive definite `k`.
pub fn svm_dual_optimum(k: &DMatrix<f64>, y: &[f64], upper: &[f64]) -> f64 {
    let n = y.len();
    let mut best = f64::NEG_INFINITY;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let mut alpha = vec![0.0; n];
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        for i in 0..n {
            if state[i] == 1 {
                alpha[i] = upper[i];
            }
        }
        if !free.is_empty() {
            let m = free.len();
            let mut a = DMatrix::<f64>::zeros(m + 1, m + 1);
            let mut rhs = DVector::<f64>::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = y[i] * y[j] * k[(i, j)];
                }
                a[(r, m)] = -y[i];
                a[(m, r)] = y[i];
                let fixed: f64 = (0..n)
                    .filter(|&j| state[j] != 2)
                    .map(|j| y[i] * y[j] * k[(i, j)] * alpha[j])
                    .sum();
                rhs[r] = 1.0 - fixed;
            }
            rhs[m] = -(0..n).filter(|&j| state[j] != 2).map(|j| y[j] * alpha[j]).sum::<f64>();
            let Some(sol) = a.lu().solve(&rhs) else { continue };
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r];
            }
        }
        let feasible_box = alpha
            .iter()
            .zip(upper)
            .all(|(&a, &u)| a >= -1e-12 && a <= u + 1e-12);
        let eq: f64 = alpha.iter().zip(y).map(|(a, b)| a * b).sum();
        if feasible_box && eq.abs() < 1e-9 {
            best = best.max(dual_objective(k, y, &alpha));
        }
    }
    best
}

/// Best dual objective on a grid of step `upper/steps` per coordinate for
/// `n ≤ 3`; the last multiplier is fixed by the equality constraint.
pub fn svm_dual_grid(k: &DMatrix<f64>, y: &[f64], upper: &[f64], steps: usize) -> f64 {
    let n = y.len();
    assert!((2..=3).contains(&n));
    let mut best = f64::NEG_INFINITY;
    let grid = |i: usize, s: usize| upper[i] * s as f64 / steps as f64;
    let mut consider = |head: &[f64]| {
        let partial: f64 = head.iter().zip(y).map(|(a, b)| a * b).sum();
        let last = -partial * y[n - 1];
        if last >= 0.0 && last <= upper[n - 1] {
            let mut alpha = head.to_vec();
            alpha.push(last);
            best = best.max(dual_objective(k, y, &alpha));
        }
    };
    for s0 in 0..=steps {
        if n == 2 {
            consider(&[grid(0, s0)]);
        } else {
            for s1 in 0..=steps {
                consider(&[grid(0, s0), grid(1, s1)]);
            }
        }
    }
    best
}

/// All-pairs Mann–Whitney statistic.
pub fn auc_all_pairs(scores: &[f64], labels: &[Label]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li != Label::Positive {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != Label::Negative {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Gradient of `‖y − Xβ − b‖² + λ‖β‖²` with respect to `(β, b)`.
pub fn ridge_gradient(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, b: f64, lambda: f64) -> DVector<f64> {
    let ones = DVector::<f64>::from_element(x.nrows(), 1.0);
    let r = y - x * beta - &ones * b;
    let g_beta = x.transpose() * &r * -2.0 + beta * (2.0 * lambda);
    let g_b = -2.0 * r.sum();
    let mut g = DVector::<f64>::zeros(beta.len() + 1);
    g.rows_mut(0, beta.len()).copy_from(&g_beta);
    g[beta.len()] = g_b;
    g
}

pub fn to_dmatrix(a: &ndarray::Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn workspace_root() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}
