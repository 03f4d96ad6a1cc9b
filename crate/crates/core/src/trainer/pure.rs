//! Statevector execution with deferred discards.
//!
//! Traced-out wires are never touched again, so tracing them at the end
//! gives the same reduced state and the same `<Z>` on the measured wire.
//! Gates outside the measured wire's backward light cone cancel in
//! `U^dag Z U` and are dropped at compile time, which also makes the
//! gradient of a parameter that only feeds such gates exactly zero.
//! Two angle-level identities are applied for the same reason: a Z rotation
//! that is the last thing to touch the measured wire commutes with the
//! measurement, and a Z rotation acting first on a wire that starts in
//! `|0>` only contributes a global phase. Both are set to zero.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::ansatz::{Angle, CircuitOp};
use crate::architect::{Instruction, QcnnCircuit};
use crate::error::{QcnnError, Result};
use crate::simcore::{build_gate, gate_derivative, GateKind, PureState};

#[derive(Debug, Clone, Copy, PartialEq)]
struct PureOccurrence {
    gate: usize,
    angle: usize,
    slot: usize,
    scale: f64,
}

/// A basis-gate circuit ready for repeated pure-state evaluation.
#[derive(Debug, Clone)]
pub struct PureProgram {
    total_qubits: usize,
    num_params: usize,
    measured: usize,
    gates: Vec<CircuitOp>,
    occurrences: Vec<PureOccurrence>,
    pruned: usize,
    stripped: usize,
}

/// Gate matrices (and their adjoints and angle derivatives) for one
/// parameter vector.
#[derive(Debug, Clone)]
pub struct BoundPure {
    params: Vec<f64>,
    forward: Vec<Vec<Complex64>>,
    adjoint: Vec<Vec<Complex64>>,
    /// One derivative matrix per occurrence.
    derivative: Vec<Vec<Complex64>>,
}

impl PureProgram {
    pub fn compile(circuit: &QcnnCircuit) -> Result<Self> {
        let ops = circuit
            .basis_instructions()?
            .into_iter()
            .filter_map(|inst| match inst {
                Instruction::Gate(op) => Some(op),
                Instruction::Discard(_) => None,
            })
            .collect();
        let zero_wires: Vec<usize> = (circuit.data_qubits()..circuit.total_qubits()).collect();
        Self::build(circuit.total_qubits(), circuit.measurement_wire(), circuit.num_params(), ops, &zero_wires)
    }

    /// Builds a program from arbitrary gates measured with Z on `measured`.
    /// Parameterised gates must be single-angle rotations or U3, whose
    /// angles all obey the `±pi/2` shift rule.
    pub fn from_ops(total_qubits: usize, measured: usize, num_params: usize, ops: Vec<CircuitOp>) -> Result<Self> {
        Self::build(total_qubits, measured, num_params, ops, &[])
    }

    /// As [`PureProgram::from_ops`], additionally promising that every wire
    /// in `zero_wires` starts in `|0>`.
    fn build(total_qubits: usize, measured: usize, num_params: usize, ops: Vec<CircuitOp>, zero_wires: &[usize]) -> Result<Self> {
        if total_qubits == 0 || measured >= total_qubits {
            return Err(QcnnError::arg(format!("cannot measure wire {measured} of {total_qubits}")));
        }
        for op in &ops {
            if let Some(&w) = op.wires.iter().find(|&&w| w >= total_qubits) {
                return Err(QcnnError::arg(format!("{op} uses wire {w} of a {total_qubits}-qubit register")));
            }
            if op.is_parameterized() && matches!(op.kind, GateKind::Cry | GateKind::Crz) {
                return Err(QcnnError::Invariant(format!("{op} has no two-term shift rule")));
            }
        }

        let mut in_cone = vec![false; total_qubits];
        in_cone[measured] = true;
        let mut keep = vec![false; ops.len()];
        for (i, op) in ops.iter().enumerate().rev() {
            if op.wires.iter().any(|&w| in_cone[w]) {
                keep[i] = true;
                op.wires.iter().for_each(|&w| in_cone[w] = true);
            }
        }
        let pruned = keep.iter().filter(|k| !**k).count();
        let mut gates: Vec<CircuitOp> = ops.into_iter().zip(keep).filter_map(|(op, k)| k.then_some(op)).collect();
        let stripped = strip_phase_angles(&mut gates, measured, zero_wires);

        let mut occurrences = Vec::new();
        for (gate, op) in gates.iter().enumerate() {
            for (angle, a) in op.angles.iter().enumerate() {
                if let Some((p, scale)) = a.param_ref() {
                    if p.slot >= num_params {
                        return Err(QcnnError::arg(format!("slot {} out of range for {num_params} parameters", p.slot)));
                    }
                    occurrences.push(PureOccurrence {
                        gate,
                        angle,
                        slot: p.slot,
                        scale,
                    });
                }
            }
        }
        Ok(PureProgram {
            total_qubits,
            num_params,
            measured,
            gates,
            occurrences,
            pruned,
            stripped,
        })
    }

    pub fn total_qubits(&self) -> usize {
        self.total_qubits
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    /// Gates kept after light-cone pruning.
    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn pruned_gates(&self) -> usize {
        self.pruned
    }

    /// Angles fixed to zero because they cannot change `<Z>`.
    pub fn stripped_angles(&self) -> usize {
        self.stripped
    }

    pub fn bind(&self, params: &[f64]) -> Result<BoundPure> {
        if params.len() != self.num_params {
            return Err(QcnnError::arg(format!("expected {} parameters, got {}", self.num_params, params.len())));
        }
        let mut forward = Vec::with_capacity(self.gates.len());
        let mut adjoint = Vec::with_capacity(self.gates.len());
        for op in &self.gates {
            let m = op.bind(params)?;
            adjoint.push(m.dagger());
            forward.push(m.entries().to_vec());
        }
        let derivative = self
            .occurrences
            .iter()
            .map(|o| {
                let op = &self.gates[o.gate];
                Ok(gate_derivative(op.kind, &op.angle_values(params), o.angle)?.entries().to_vec())
            })
            .collect::<Result<_>>()?;
        Ok(BoundPure {
            params: params.to_vec(),
            forward,
            adjoint,
            derivative,
        })
    }

    fn check_input(&self, input: &PureState) -> Result<()> {
        if input.num_qubits() != self.total_qubits {
            return Err(QcnnError::arg(format!(
                "input has {} qubits, circuit needs {}",
                input.num_qubits(),
                self.total_qubits
            )));
        }
        Ok(())
    }

    pub fn final_state(&self, bound: &BoundPure, input: &PureState) -> Result<PureState> {
        self.check_input(input)?;
        let mut psi = input.clone();
        for (op, m) in self.gates.iter().zip(&bound.forward) {
            psi.apply_raw(m, &op.wires);
        }
        Ok(psi)
    }

    pub fn expectation(&self, bound: &BoundPure, input: &PureState) -> Result<f64> {
        Ok(self.final_state(bound, input)?.z_expectation(self.measured))
    }

    fn apply_z(&self, psi: &mut PureState) {
        let mask = 1usize << (self.total_qubits - 1 - self.measured);
        for (i, a) in psi.amplitudes_mut().iter_mut().enumerate() {
            if i & mask != 0 {
                *a = -*a;
            }
        }
    }

    /// `f` and `df/dtheta` by one backward sweep:
    /// `df/dphi_o = 2 Re <lambda_j| dU_j |psi_{j-1}>` with
    /// `lambda_j = U_{j+1}^dag ... U_N^dag Z psi_N`.
    pub fn expectation_and_gradient(&self, bound: &BoundPure, input: &PureState) -> Result<(f64, Vec<f64>)> {
        let mut psi = self.final_state(bound, input)?;
        let f = psi.z_expectation(self.measured);
        let mut lambda = psi.clone();
        self.apply_z(&mut lambda);

        let mut grad = vec![0.0; self.num_params];
        let mut occ = self.occurrences.len();
        for (j, op) in self.gates.iter().enumerate().rev() {
            psi.apply_raw(&bound.adjoint[j], &op.wires);
            while occ > 0 && self.occurrences[occ - 1].gate == j {
                occ -= 1;
                let o = self.occurrences[occ];
                let mut d = psi.clone();
                d.apply_raw(&bound.derivative[occ], &op.wires);
                let overlap: Complex64 = lambda.amplitudes().iter().zip(d.amplitudes()).map(|(l, x)| l.conj() * x).sum();
                grad[o.slot] += o.scale * 2.0 * overlap.re;
            }
            lambda.apply_raw(&bound.adjoint[j], &op.wires);
        }
        Ok((f, grad))
    }

    /// `f` and `df/dtheta` by the two-term shift rule, evaluated literally:
    /// every occurrence reruns the circuit from its gate with that angle
    /// moved by `±pi/2`, and contributes `scale * (f+ - f-) / 2`.
    pub fn shift_gradient(&self, bound: &BoundPure, input: &PureState) -> Result<(f64, Vec<f64>)> {
        self.check_input(input)?;
        let mut prefix = Vec::with_capacity(self.gates.len() + 1);
        let mut psi = input.clone();
        for (op, m) in self.gates.iter().zip(&bound.forward) {
            prefix.push(psi.clone());
            psi.apply_raw(m, &op.wires);
        }
        let f = psi.z_expectation(self.measured);

        let mut grad = vec![0.0; self.num_params];
        for o in &self.occurrences {
            let op = &self.gates[o.gate];
            let mut values = op.angle_values(&bound.params);
            let base = values[o.angle];
            let mut shifted = |delta: f64| -> Result<f64> {
                values[o.angle] = base + delta;
                let mut state = prefix[o.gate].clone();
                state.apply_raw(build_gate(op.kind, &values)?.entries(), &op.wires);
                for (later, m) in self.gates.iter().zip(&bound.forward).skip(o.gate + 1) {
                    state.apply_raw(m, &later.wires);
                }
                Ok(state.z_expectation(self.measured))
            };
            let plus = shifted(FRAC_PI_2)?;
            let minus = shifted(-FRAC_PI_2)?;
            grad[o.slot] += o.scale * (plus - minus) / 2.0;
        }
        Ok((f, grad))
    }
}

/// Index of the leading or trailing Z-rotation angle of a single-qubit gate:
/// `U3(theta, phi, lambda) = RZ(phi) RY(theta) RZ(lambda)` up to phase.
fn z_angle(op: &CircuitOp, leading: bool) -> Option<usize> {
    match op.kind {
        GateKind::Rz => Some(0),
        GateKind::U3 => Some(if leading { 2 } else { 1 }),
        _ => None,
    }
}

fn strip_phase_angles(gates: &mut [CircuitOp], measured: usize, zero_wires: &[usize]) -> usize {
    let mut stripped = 0;
    let mut zero = |op: &mut CircuitOp, angle: usize| {
        if !matches!(op.angles[angle], Angle::Fixed(v) if v == 0.0) {
            op.angles[angle] = Angle::Fixed(0.0);
            stripped += 1;
        }
    };
    if let Some(last) = gates.iter_mut().rev().find(|op| op.wires.contains(&measured)) {
        if last.wires.len() == 1 {
            if let Some(a) = z_angle(last, false) {
                zero(last, a);
            }
        }
    }
    for &w in zero_wires {
        if let Some(first) = gates.iter_mut().find(|op| op.wires.contains(&w)) {
            if first.wires.len() == 1 {
                if let Some(a) = z_angle(first, true) {
                    zero(first, a);
                }
            }
        }
    }
    stripped
}
