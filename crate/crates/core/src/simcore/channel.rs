use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{QcnnError, Result};

use super::gates::GateMatrix;
use super::kernel::{dagger, matmul, ZERO};

/// Completeness slack above which a Kraus set is rejected outright.
pub const CPTP_REJECT_TOL: f64 = 1e-8;

/// A completely-positive trace-preserving map given by Kraus operators
/// `rho -> sum_i K_i rho K_i^dagger`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    arity: usize,
    operators: Vec<Vec<Complex64>>,
}

impl KrausChannel {
    /// Builds a channel on `arity` qubits. Each operator is a row-major
    /// `2^arity x 2^arity` matrix.
    pub fn new(arity: usize, operators: Vec<Vec<Complex64>>) -> Result<Self> {
        if arity == 0 || operators.is_empty() {
            return Err(QcnnError::arg("a channel needs at least one operator on at least one qubit"));
        }
        let d = 1usize << arity;
        if let Some(bad) = operators.iter().position(|k| k.len() != d * d) {
            return Err(QcnnError::arg(format!("Kraus operator {bad} is not {d}x{d}")));
        }
        let channel = KrausChannel { arity, operators };
        let err = channel.completeness_error();
        if err > CPTP_REJECT_TOL {
            return Err(QcnnError::validation(format!(
                "Kraus operators are not trace preserving (completeness error {err:.3e})"
            )));
        }
        Ok(channel)
    }

    pub fn identity(arity: usize) -> Self {
        let d = 1usize << arity;
        let mut id = vec![ZERO; d * d];
        for i in 0..d {
            id[i * d + i] = Complex64::new(1.0, 0.0);
        }
        KrausChannel {
            arity,
            operators: vec![id],
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn operators(&self) -> &[Vec<Complex64>] {
        &self.operators
    }

    /// Max entrywise deviation of `sum_i K_i^dagger K_i` from the identity.
    pub fn completeness_error(&self) -> f64 {
        let d = 1usize << self.arity;
        let mut acc = vec![ZERO; d * d];
        for k in &self.operators {
            for (a, b) in acc.iter_mut().zip(matmul(&dagger(k, d), k, d)) {
                *a += b;
            }
        }
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((acc[r * d + c] - target).norm());
            }
        }
        worst
    }

    pub fn superoperator(&self) -> SuperOperator {
        let d = 1usize << self.arity;
        let dd = d * d;
        let mut m = vec![ZERO; dd * dd];
        for k in &self.operators {
            for a in 0..d {
                for b in 0..d {
                    let row = a * d + b;
                    for i in 0..d {
                        let kai = k[a * d + i];
                        if kai == ZERO {
                            continue;
                        }
                        for j in 0..d {
                            m[row * dd + i * d + j] += kai * k[b * d + j].conj();
                        }
                    }
                }
            }
        }
        SuperOperator {
            arity: self.arity,
            matrix: m,
        }
    }
}

/// Choi matrix `Lambda = sum_ij |i><j| (x) E(|i><j|)` of a channel; the input
/// index is the most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    arity: usize,
    matrix: Vec<Complex64>,
}

impl ChoiMatrix {
    pub fn new(arity: usize, matrix: Vec<Complex64>) -> Result<Self> {
        let d = 1usize << (2 * arity);
        if matrix.len() != d * d {
            return Err(QcnnError::arg(format!("Choi matrix must be {d}x{d}")));
        }
        Ok(ChoiMatrix { arity, matrix })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_min_eigenvalue(&self.matrix, 1 << (2 * self.arity))
    }

    /// Max deviation of `Tr_out(Lambda)` from the identity.
    pub fn trace_preservation_error(&self) -> f64 {
        let d = 1usize << self.arity;
        let dd = d * d;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let s: Complex64 = (0..d).map(|a| self.matrix[(i * d + a) * dd + (j * d + a)]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }

    /// Rejects matrices that are not PSD (beyond `tol`) or not trace preserving.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(QcnnError::validation(format!("Choi matrix not PSD (min eigenvalue {min:.3e})")));
        }
        let tp = self.trace_preservation_error();
        if tp > tol {
            return Err(QcnnError::validation(format!("Choi partial trace deviates from I by {tp:.3e}")));
        }
        Ok(())
    }

    /// Reshuffles into the superoperator: `S[(a,b),(i,j)] = Lambda[(i,a),(j,b)]`.
    pub fn superoperator(&self) -> SuperOperator {
        let d = 1usize << self.arity;
        let dd = d * d;
        let mut m = vec![ZERO; dd * dd];
        for i in 0..d {
            for j in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        m[(a * d + b) * dd + (i * d + j)] = self.matrix[(i * d + a) * dd + (j * d + b)];
                    }
                }
            }
        }
        SuperOperator {
            arity: self.arity,
            matrix: m,
        }
    }
}

/// Linear map on the row-major vectorisation of a `2^k x 2^k` block.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    arity: usize,
    matrix: Vec<Complex64>,
}

impl SuperOperator {
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn from_matrix(arity: usize, matrix: Vec<Complex64>) -> Result<Self> {
        let dd = 1usize << (2 * arity);
        if arity == 0 || matrix.len() != dd * dd {
            return Err(QcnnError::arg(format!("superoperator on {arity} qubit(s) must be {dd}x{dd}")));
        }
        Ok(SuperOperator { arity, matrix })
    }

    pub fn identity(arity: usize) -> Self {
        KrausChannel::identity(arity).superoperator()
    }

    /// `rho -> U rho U^dagger`
    pub fn from_unitary(gate: &GateMatrix) -> Self {
        let d = gate.dim();
        let u = gate.entries();
        let dd = d * d;
        let mut m = vec![ZERO; dd * dd];
        for a in 0..d {
            for b in 0..d {
                for i in 0..d {
                    let uai = u[a * d + i];
                    for j in 0..d {
                        m[(a * d + b) * dd + i * d + j] = uai * u[b * d + j].conj();
                    }
                }
            }
        }
        SuperOperator {
            arity: gate.arity(),
            matrix: m,
        }
    }

    /// Independent action on two registers, `self` on the upper wires.
    pub fn kron(&self, lower: &SuperOperator) -> SuperOperator {
        let (da, db) = (1usize << self.arity, 1usize << lower.arity);
        let (dda, ddb) = (da * da, db * db);
        let d = da * db;
        let dd = d * d;
        let mut m = vec![ZERO; dd * dd];
        for ra in 0..da {
            for ca in 0..da {
                for ia in 0..da {
                    for ja in 0..da {
                        let x = self.matrix[(ra * da + ca) * dda + ia * da + ja];
                        if x == ZERO {
                            continue;
                        }
                        for rb in 0..db {
                            for cb in 0..db {
                                for ib in 0..db {
                                    for jb in 0..db {
                                        let y = lower.matrix[(rb * db + cb) * ddb + ib * db + jb];
                                        let row = (ra * db + rb) * d + (ca * db + cb);
                                        let col = (ia * db + ib) * d + (ja * db + jb);
                                        m[row * dd + col] = x * y;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        SuperOperator {
            arity: self.arity + lower.arity,
            matrix: m,
        }
    }

    /// Heisenberg-picture map, `O -> sum_i K_i^dagger O K_i`.
    pub fn adjoint(&self) -> SuperOperator {
        let dd = 1usize << (2 * self.arity);
        SuperOperator {
            arity: self.arity,
            matrix: dagger(&self.matrix, dd),
        }
    }

    /// `self` applied after `first`.
    pub fn compose_after(&self, first: &SuperOperator) -> SuperOperator {
        assert_eq!(self.arity, first.arity);
        let dd = 1usize << (2 * self.arity);
        SuperOperator {
            arity: self.arity,
            matrix: matmul(&self.matrix, &first.matrix, dd),
        }
    }
}

pub(crate) fn hermitian_min_eigenvalue(m: &[Complex64], d: usize) -> f64 {
    let mat = DMatrix::from_row_slice(d, d, m);
    // symmetrise to shed rounding asymmetry before the Hermitian solver
    let herm = (&mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn incomplete_kraus_set_is_rejected() {
        let half = vec![c(0.5), ZERO, ZERO, c(0.5)];
        let err = KrausChannel::new(1, vec![half]).unwrap_err();
        assert!(matches!(err, QcnnError::Validation(_)));
    }

    #[test]
    fn kron_of_unitary_superops_acts_like_both_gates() {
        use crate::simcore::gates::{build_gate, GateKind};
        use crate::simcore::state::PureState;
        let ry = build_gate(GateKind::Ry, &[0.7]).unwrap();
        let u3 = build_gate(GateKind::U3, &[0.4, -1.3, 2.2]).unwrap();
        let amps: Vec<Complex64> = [0.1, 0.5, -0.3, 0.2]
            .iter()
            .zip([0.3, -0.1, 0.4, 0.0])
            .map(|(&re, im)| Complex64::new(re, im))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi = PureState::from_amplitudes(amps.iter().map(|a| a / norm).collect()).unwrap();

        let mut want = psi.to_mixed();
        want.apply_unitary(&ry, &[0]).unwrap();
        want.apply_unitary(&u3, &[1]).unwrap();
        let mut got = psi.to_mixed();
        let joint = SuperOperator::from_unitary(&ry).kron(&SuperOperator::from_unitary(&u3));
        got.apply_superoperator(&joint, &[0, 1]).unwrap();
        for (x, y) in got.matrix().iter().zip(want.matrix()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn choi_of_identity_reshuffles_to_identity_superop() {
        // Lambda = |Phi+><Phi+| unnormalised
        let mut lam = vec![ZERO; 16];
        for &(r, col) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            lam[r * 4 + col] = c(1.0);
        }
        let choi = ChoiMatrix::new(1, lam).unwrap();
        choi.validate(1e-10).unwrap();
        let sop = choi.superoperator();
        let id = KrausChannel::identity(1).superoperator();
        assert_eq!(sop, id);
    }
}
