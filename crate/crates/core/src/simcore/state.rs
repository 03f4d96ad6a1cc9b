use num_complex::Complex64;

use crate::error::{QcnnError, Result};

use super::channel::{hermitian_min_eigenvalue, KrausChannel, SuperOperator};
use super::gates::GateMatrix;
use super::kernel::{self, ZERO};

pub const NORM_TOL: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;

fn check_wires(num_qubits: usize, wires: &[usize], expected: usize) -> Result<()> {
    if wires.len() != expected {
        return Err(QcnnError::arg(format!("expected {expected} wire(s), got {}", wires.len())));
    }
    for (i, &w) in wires.iter().enumerate() {
        if w >= num_qubits {
            return Err(QcnnError::arg(format!("wire {w} out of range for {num_qubits} qubits")));
        }
        if wires[..i].contains(&w) {
            return Err(QcnnError::arg(format!("duplicate wire {w}")));
        }
    }
    Ok(())
}

/// Pauli-Z measured on one wire; eigenvalues +1 (`|0>`) and -1 (`|1>`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observable {
    pub wire: usize,
}

impl Observable {
    pub fn pauli_z(wire: usize) -> Self {
        Observable { wire }
    }
}

/// State vector over `num_qubits` qubits, big-endian (wire 0 is the most
/// significant bit of the basis index).
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// `|0...0>`
    pub fn zero(num_qubits: usize) -> Self {
        assert!(num_qubits >= 1, "at least one qubit");
        let mut amplitudes = vec![ZERO; 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        PureState { num_qubits, amplitudes }
    }

    /// Wraps `amplitudes`, which must already be normalised to within 1e-12.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QcnnError::arg(format!("amplitude count {len} is not a power of two >= 2")));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QcnnError::arg(format!("state norm^2 is {norm}, expected 1")));
        }
        Ok(PureState {
            num_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `self (x) other`, with `other` on the higher-numbered wires.
    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut amplitudes = Vec::with_capacity(self.amplitudes.len() * other.amplitudes.len());
        for a in &self.amplitudes {
            amplitudes.extend(other.amplitudes.iter().map(|b| a * b));
        }
        PureState {
            num_qubits: self.num_qubits + other.num_qubits,
            amplitudes,
        }
    }

    pub fn apply_unitary(&mut self, gate: &GateMatrix, wires: &[usize]) -> Result<()> {
        check_wires(self.num_qubits, wires, gate.arity())?;
        kernel::apply_matrix(&mut self.amplitudes, self.num_qubits, gate.entries(), wires);
        Ok(())
    }

    /// Applies a raw row-major matrix without validation; wires must already
    /// be checked by the caller.
    pub(crate) fn apply_raw(&mut self, matrix: &[Complex64], wires: &[usize]) {
        kernel::apply_matrix(&mut self.amplitudes, self.num_qubits, matrix, wires);
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn expectation(&self, obs: Observable) -> Result<f64> {
        check_wires(self.num_qubits, &[obs.wire], 1)?;
        Ok(self.z_expectation(obs.wire))
    }

    pub(crate) fn z_expectation(&self, wire: usize) -> f64 {
        let mask = 1usize << (self.num_qubits - 1 - wire);
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| if i & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    /// `|psi><psi|`
    pub fn to_mixed(&self) -> MixedState {
        let d = self.amplitudes.len();
        let mut matrix = vec![ZERO; d * d];
        for (r, a) in self.amplitudes.iter().enumerate() {
            for (c, b) in self.amplitudes.iter().enumerate() {
                matrix[r * d + c] = a * b.conj();
            }
        }
        MixedState {
            num_qubits: self.num_qubits,
            matrix,
        }
    }
}

/// Density matrix over `num_qubits` qubits, row-major, same wire convention
/// as [`PureState`].
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    num_qubits: usize,
    matrix: Vec<Complex64>,
}

impl MixedState {
    /// Wraps a matrix after checking the Hermitian, unit-trace and PSD
    /// invariants.
    pub fn from_matrix(num_qubits: usize, matrix: Vec<Complex64>) -> Result<Self> {
        let d = 1usize << num_qubits;
        if matrix.len() != d * d {
            return Err(QcnnError::arg(format!("expected a {d}x{d} matrix")));
        }
        let state = MixedState { num_qubits, matrix };
        state.check_physical()?;
        Ok(state)
    }

    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let d = 1usize << num_qubits;
        let mut matrix = vec![ZERO; d * d];
        for i in 0..d {
            matrix[i * d + i] = Complex64::new(1.0 / d as f64, 0.0);
        }
        MixedState { num_qubits, matrix }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.dim() + col]
    }

    pub fn trace(&self) -> Complex64 {
        let d = self.dim();
        (0..d).map(|i| self.matrix[i * d + i]).sum()
    }

    /// `Tr(rho^2)`
    pub fn purity(&self) -> f64 {
        kernel::trace_product(&self.matrix, &self.matrix, self.dim()).re
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.matrix[r * d + c] - self.matrix[c * d + r].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_min_eigenvalue(&self.matrix, self.dim())
    }

    /// Checks Hermiticity (1e-10), unit trace (1e-10) and PSD (-1e-9).
    pub fn check_physical(&self) -> Result<()> {
        let h = self.hermiticity_error();
        if h > HERMITIAN_TOL {
            return Err(QcnnError::Invariant(format!("density matrix not Hermitian ({h:.3e})")));
        }
        let t = self.trace();
        if (t - 1.0).norm() > TRACE_TOL {
            return Err(QcnnError::Invariant(format!("density matrix trace is {t}")));
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(QcnnError::Invariant(format!("density matrix not PSD (min eigenvalue {min:.3e})")));
        }
        Ok(())
    }

    /// `rho -> U rho U^dagger`
    pub fn apply_unitary(&mut self, gate: &GateMatrix, wires: &[usize]) -> Result<()> {
        check_wires(self.num_qubits, wires, gate.arity())?;
        let conj: Vec<Complex64> = gate.entries().iter().map(|z| z.conj()).collect();
        kernel::sandwich(&mut self.matrix, self.num_qubits, gate.entries(), &conj, wires);
        Ok(())
    }

    /// `rho -> sum_i K_i rho K_i^dagger` on `wires`.
    pub fn apply_channel(&mut self, channel: &KrausChannel, wires: &[usize]) -> Result<()> {
        check_wires(self.num_qubits, wires, channel.arity())?;
        let err = channel.completeness_error();
        if err > super::channel::CPTP_REJECT_TOL {
            return Err(QcnnError::validation(format!("channel is not CPTP ({err:.3e})")));
        }
        // A lone Kraus operator is a unitary conjugation.
        if channel.operators().len() == 1 {
            let k = &channel.operators()[0];
            let conj: Vec<Complex64> = k.iter().map(|z| z.conj()).collect();
            kernel::sandwich(&mut self.matrix, self.num_qubits, k, &conj, wires);
            return Ok(());
        }
        kernel::apply_superop(&mut self.matrix, self.num_qubits, channel.superoperator().matrix(), wires);
        Ok(())
    }

    pub fn apply_superoperator(&mut self, sop: &SuperOperator, wires: &[usize]) -> Result<()> {
        check_wires(self.num_qubits, wires, sop.arity())?;
        kernel::apply_superop(&mut self.matrix, self.num_qubits, sop.matrix(), wires);
        Ok(())
    }

    pub(crate) fn apply_superop_raw(&mut self, sop: &[Complex64], wires: &[usize]) {
        kernel::apply_superop(&mut self.matrix, self.num_qubits, sop, wires);
    }

    /// Reduced state on the wires not listed in `traced`. Remaining wires keep
    /// their relative order and are renumbered from 0.
    pub fn partial_trace(&self, traced: &[usize]) -> Result<MixedState> {
        if traced.is_empty() {
            return Err(QcnnError::arg("nothing to trace out"));
        }
        check_wires(self.num_qubits, traced, traced.len())?;
        if traced.len() >= self.num_qubits {
            return Err(QcnnError::arg("cannot trace out every qubit"));
        }
        Ok(MixedState {
            num_qubits: self.num_qubits - traced.len(),
            matrix: kernel::partial_trace(&self.matrix, self.num_qubits, traced),
        })
    }

    pub fn expectation(&self, obs: Observable) -> Result<f64> {
        check_wires(self.num_qubits, &[obs.wire], 1)?;
        let z = kernel::z_expectation_diag(&self.matrix, self.num_qubits, obs.wire);
        if z.im.abs() > HERMITIAN_TOL {
            return Err(QcnnError::Invariant(format!("<Z> has imaginary part {}", z.im)));
        }
        Ok(z.re)
    }

    pub(crate) fn z_expectation(&self, wire: usize) -> f64 {
        kernel::z_expectation_diag(&self.matrix, self.num_qubits, wire).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::gates::{build_gate, GateKind};

    fn basis(n: usize, index: usize) -> PureState {
        let mut amps = vec![ZERO; 1 << n];
        amps[index] = Complex64::new(1.0, 0.0);
        PureState::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn x_flips_zero_to_one() {
        let mut s = PureState::zero(1);
        s.apply_unitary(&build_gate(GateKind::X, &[]).unwrap(), &[0]).unwrap();
        assert_eq!(s, basis(1, 1));
    }

    #[test]
    fn cx_on_10_gives_11() {
        let mut s = basis(2, 0b10);
        s.apply_unitary(&build_gate(GateKind::Cx, &[]).unwrap(), &[0, 1]).unwrap();
        assert_eq!(s, basis(2, 0b11));
    }

    #[test]
    fn reversed_cx_uses_second_wire_as_control() {
        let mut s = basis(2, 0b01);
        s.apply_unitary(&build_gate(GateKind::Cx, &[]).unwrap(), &[1, 0]).unwrap();
        assert_eq!(s, basis(2, 0b11));
    }

    #[test]
    fn bad_wires_are_rejected() {
        let mut s = PureState::zero(2);
        let cx = build_gate(GateKind::Cx, &[]).unwrap();
        assert!(s.apply_unitary(&cx, &[0, 0]).is_err());
        assert!(s.apply_unitary(&cx, &[0, 2]).is_err());
        assert!(s.apply_unitary(&cx, &[0]).is_err());
    }

    #[test]
    fn z_expectation_of_basis_states() {
        assert_eq!(PureState::zero(1).expectation(Observable::pauli_z(0)).unwrap(), 1.0);
        assert_eq!(basis(1, 1).expectation(Observable::pauli_z(0)).unwrap(), -1.0);
        assert_eq!(basis(1, 1).to_mixed().expectation(Observable::pauli_z(0)).unwrap(), -1.0);
    }

    #[test]
    fn zero_state_lifts_to_diag_one_zero() {
        let rho = PureState::zero(1).to_mixed();
        assert_eq!(rho.matrix(), &[Complex64::new(1.0, 0.0), ZERO, ZERO, ZERO]);
    }

    #[test]
    fn tracing_every_qubit_is_an_error() {
        let rho = PureState::zero(2).to_mixed();
        assert!(rho.partial_trace(&[0, 1]).is_err());
        assert!(rho.partial_trace(&[]).is_err());
    }

    #[test]
    fn bell_state_marginals_are_maximally_mixed() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = PureState::from_amplitudes(vec![h.into(), ZERO, ZERO, h.into()]).unwrap().to_mixed();
        for w in 0..2 {
            let red = bell.partial_trace(&[w]).unwrap();
            for (x, y) in red.matrix().iter().zip(MixedState::maximally_mixed(1).matrix()) {
                assert!((x - y).norm() < 1e-15);
            }
        }
    }
}
