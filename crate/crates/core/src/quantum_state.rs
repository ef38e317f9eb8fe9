//! Dense statevector simulation of the three data embeddings (amplitude,
//! angle and ZZ feature map) and one-qubit reduced density matrices.
//!
//! Layout: qubit 0 is the most significant bit of the amplitude index, so
//! for two qubits the basis order is `|00⟩, |01⟩, |10⟩, |11⟩` with the
//! left digit belonging to qubit 0.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tolerance outside `[0, π]` that angle encoding silently clamps.
pub const ANGLE_CLAMP_TOLERANCE: f64 = 1e-9;

/// Pure n-qubit state as `2^n` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    num_qubits: usize,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    /// `|0…0⟩` on `num_qubits` qubits.
    pub fn zero_state(num_qubits: usize) -> Self {
        assert!(num_qubits >= 1, "a state needs at least one qubit");
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); 1 << num_qubits];
        amplitudes[0] = Complex::new(T::one(), T::zero());
        Self {
            num_qubits,
            amplitudes,
        }
    }

    /// Wraps raw amplitudes. The length must be a power of two (at least 2)
    /// and the vector must be normalized within `1e-9`.
    pub fn from_amplitudes(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let state = Self {
            num_qubits: len.trailing_zeros() as usize,
            amplitudes,
        };
        let norm = state.norm_sqr();
        if (norm - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(64.0)) {
            return Err(Error::InvalidParameter(format!(
                "state is not normalized (norm² = {norm})"
            )));
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Σ |a_i|².
    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    #[inline]
    fn bit(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    /// Applies a 2×2 unitary (row-major `[[u00, u01], [u10, u11]]`) to one qubit.
    pub fn apply_single_qubit(&mut self, qubit: usize, gate: &[[Complex<T>; 2]; 2]) {
        let mask = self.bit(qubit);
        for i in 0..self.amplitudes.len() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let a0 = self.amplitudes[i];
            let a1 = self.amplitudes[j];
            self.amplitudes[i] = gate[0][0] * a0 + gate[0][1] * a1;
            self.amplitudes[j] = gate[1][0] * a0 + gate[1][1] * a1;
        }
    }

    pub fn apply_hadamard(&mut self, qubit: usize) {
        let h = T::FRAC_1_SQRT_2();
        let mask = self.bit(qubit);
        for i in 0..self.amplitudes.len() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let a0 = self.amplitudes[i];
            let a1 = self.amplitudes[j];
            self.amplitudes[i] = (a0 + a1).scale(h);
            self.amplitudes[j] = (a0 - a1).scale(h);
        }
    }

    /// RZ(θ) = diag(e^{-iθ/2}, e^{iθ/2}).
    pub fn apply_rz(&mut self, qubit: usize, theta: T) {
        let half = theta / T::lit(2.0);
        let minus = Complex::from_polar(T::one(), -half);
        let plus = Complex::from_polar(T::one(), half);
        let mask = self.bit(qubit);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            *amp *= if i & mask == 0 { minus } else { plus };
        }
    }

    /// Controlled-X with the given control and target qubits.
    pub fn apply_cx(&mut self, control: usize, target: usize) {
        assert_ne!(control, target, "control and target must differ");
        let cmask = self.bit(control);
        let tmask = self.bit(target);
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
    }
}

/// Structural parameters of the ZZ feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZzMapConfig {
    /// Number of (Hadamard, phase, entangler) layers. At least 1.
    pub repetitions: usize,
}

impl Default for ZzMapConfig {
    fn default() -> Self {
        Self { repetitions: 2 }
    }
}

impl ZzMapConfig {
    pub fn new(repetitions: usize) -> Result<Self> {
        if repetitions == 0 {
            return Err(Error::InvalidParameter(
                "ZZ map needs at least one repetition".into(),
            ));
        }
        Ok(Self { repetitions })
    }

    /// Nearest-neighbour pairs `(k, k+1)` for `num_qubits` qubits.
    pub fn entangling_pairs(num_qubits: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..num_qubits.saturating_sub(1)).map(|k| (k, k + 1))
    }
}

/// Number of qubits amplitude encoding needs for `len` features.
pub fn amplitude_qubits(len: usize) -> usize {
    len.max(2).next_power_of_two().trailing_zeros() as usize
}

/// Amplitude encoding: `x / ‖x‖` zero-padded to the next power of two.
pub fn encode_amplitude<T: Real>(x: &[T]) -> Result<StateVector<T>> {
    if x.is_empty() {
        return Err(Error::EmptyInput("amplitude encoding input"));
    }
    let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
    if !(norm > T::zero()) || !norm.is_finite() {
        return Err(Error::UnnormalizableAmplitude);
    }
    let num_qubits = amplitude_qubits(x.len());
    let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); 1 << num_qubits];
    for (amp, &v) in amplitudes.iter_mut().zip(x) {
        *amp = Complex::new(v / norm, T::zero());
    }
    Ok(StateVector {
        num_qubits,
        amplitudes,
    })
}

fn checked_angle<T: Real>(index: usize, value: T) -> Result<T> {
    let tol = T::lit(ANGLE_CLAMP_TOLERANCE);
    let pi = T::PI();
    if value.is_nan() || value < -tol || value > pi + tol {
        return Err(Error::AngleOutOfRange {
            index,
            value: value.as_f64(),
        });
    }
    Ok(value.max(T::zero()).min(pi))
}

/// Angle encoding: `⊗_i (cos(x_i/2)|0⟩ + sin(x_i/2)|1⟩)`, one qubit per feature.
pub fn encode_angle<T: Real>(x: &[T]) -> Result<StateVector<T>> {
    if x.is_empty() {
        return Err(Error::EmptyInput("angle encoding input"));
    }
    let half = T::lit(0.5);
    let factors = x
        .iter()
        .enumerate()
        .map(|(i, &v)| checked_angle(i, v).map(|a| ((a * half).cos(), (a * half).sin())))
        .collect::<Result<Vec<_>>>()?;

    // Kronecker product, qubit 0 outermost.
    let mut amps: Vec<T> = vec![T::one()];
    for &(c, s) in &factors {
        let mut next = Vec::with_capacity(amps.len() * 2);
        for &a in &amps {
            next.push(a * c);
            next.push(a * s);
        }
        amps = next;
    }
    Ok(StateVector {
        num_qubits: x.len(),
        amplitudes: amps.into_iter().map(|a| Complex::new(a, T::zero())).collect(),
    })
}

/// Second-order ZZ feature map with linear entanglement.
///
/// Per repetition: H on every qubit, RZ(2·x_i) on qubit i, then for each
/// adjacent pair (k, k+1): CX(k, k+1), RZ(2·(π − x_k)(π − x_{k+1})) on k+1,
/// CX(k, k+1).
pub fn encode_zz<T: Real>(x: &[T], config: &ZzMapConfig) -> Result<StateVector<T>> {
    if x.is_empty() {
        return Err(Error::EmptyInput("ZZ feature map input"));
    }
    if config.repetitions == 0 {
        return Err(Error::InvalidParameter(
            "ZZ map needs at least one repetition".into(),
        ));
    }
    let n = x.len();
    let two = T::lit(2.0);
    let pi = T::PI();
    let mut state = StateVector::zero_state(n);
    for _ in 0..config.repetitions {
        for q in 0..n {
            state.apply_hadamard(q);
        }
        for (q, &xq) in x.iter().enumerate() {
            state.apply_rz(q, two * xq);
        }
        for (k, l) in ZzMapConfig::entangling_pairs(n) {
            state.apply_cx(k, l);
            state.apply_rz(l, two * (pi - x[k]) * (pi - x[l]));
            state.apply_cx(k, l);
        }
    }
    Ok(state)
}

/// ⟨a|b⟩ = Σ conj(a_i)·b_i.
pub fn state_inner_product<T: Real>(a: &StateVector<T>, b: &StateVector<T>) -> Result<Complex<T>> {
    if a.num_qubits != b.num_qubits {
        return Err(Error::QubitMismatch {
            left: a.num_qubits,
            right: b.num_qubits,
        });
    }
    Ok(a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| {
            acc + x.conj() * y
        }))
}

/// 2×2 complex density matrix, row-major.
pub type Density2<T> = [[Complex<T>; 2]; 2];

/// One-qubit reduced density matrices of a pure state, one per qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensityMatrixSet<T> {
    pub per_qubit: Vec<Density2<T>>,
}

impl<T: Real> ReducedDensityMatrixSet<T> {
    pub fn len(&self) -> usize {
        self.per_qubit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_qubit.is_empty()
    }

    /// Σ_k ‖ρ_k − σ_k‖_F².
    pub fn squared_frobenius_distance(&self, other: &Self) -> Result<T> {
        if self.len() != other.len() {
            return Err(Error::QubitMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(self
            .per_qubit
            .iter()
            .zip(&other.per_qubit)
            .map(|(a, b)| {
                let mut sum = T::zero();
                for r in 0..2 {
                    for c in 0..2 {
                        sum += (a[r][c] - b[r][c]).norm_sqr();
                    }
                }
                sum
            })
            .sum())
    }
}

/// Partial trace of `|s⟩⟨s|` over every qubit except k, for each k.
pub fn reduced_density_matrices<T: Real>(s: &StateVector<T>) -> ReducedDensityMatrixSet<T> {
    let zero = Complex::new(T::zero(), T::zero());
    let per_qubit = (0..s.num_qubits)
        .map(|k| {
            let mask = s.bit(k);
            let mut rho = [[zero; 2]; 2];
            for i in 0..s.amplitudes.len() {
                if i & mask != 0 {
                    continue;
                }
                let a0 = s.amplitudes[i];
                let a1 = s.amplitudes[i | mask];
                rho[0][0] += a0 * a0.conj();
                rho[0][1] += a0 * a1.conj();
                rho[1][1] += a1 * a1.conj();
            }
            rho[1][0] = rho[0][1].conj();
            rho
        })
        .collect();
    ReducedDensityMatrixSet { per_qubit }
}
