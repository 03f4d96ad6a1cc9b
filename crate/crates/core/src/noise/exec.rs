//! Mixed-state execution of a basis-compiled circuit under a device profile.
//!
//! After every basis gate the gate's qubits are depolarized (`p1`, or the
//! two-qubit `p2` for CX) and every live qubit relaxes for the gate's
//! duration. Relaxation on a qubit commutes with everything that does not
//! touch it and relaxations compose additively in time, so the executor
//! defers each qubit's accumulated relaxation until the next gate on it (or
//! the end of the circuit) and fuses it with that gate into one
//! superoperator. Relaxation pending on a qubit that is then traced out is
//! dropped, since a trace-preserving map followed by a trace is a trace.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use super::{depolarizing_channel, DeviceNoiseProfile};
use crate::ansatz::CircuitOp;
use crate::architect::{Instruction, QcnnCircuit};
use crate::error::{QcnnError, Result};
use crate::simcore::kernel::{apply_superop, embed_identity, trace_product};
use crate::simcore::{build_gate, MixedState, PureState, SuperOperator};

#[derive(Debug, Clone)]
struct GateStep {
    op: CircuitOp,
    positions: Vec<usize>,
    num_qubits: usize,
    /// Relaxation pending on the gate's wires before it acts.
    pre: SuperOperator,
    depolarize: SuperOperator,
}

#[derive(Debug, Clone)]
enum Step {
    Gate(GateStep),
    /// Trace out the qubit at this register position; `num_qubits` is the
    /// register size before the trace.
    Discard { pos: usize, num_qubits: usize },
}

/// A parameterised angle inside the compiled program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occurrence {
    pub step: usize,
    pub angle: usize,
    pub slot: usize,
    pub scale: f64,
}

/// A circuit compiled against one noise profile.
#[derive(Debug, Clone)]
pub struct NoisyProgram {
    total_qubits: usize,
    num_params: usize,
    steps: Vec<Step>,
    final_relaxation: Vec<(usize, SuperOperator)>,
    final_qubits: usize,
    measure_pos: usize,
    occurrences: Vec<Occurrence>,
}

/// Per-step fused superoperators for one parameter vector.
#[derive(Debug, Clone)]
pub struct BoundNoisy {
    fused: Vec<Vec<Complex64>>,
}

/// Final state and `<Z>` on the measured wire.
#[derive(Debug, Clone)]
pub struct NoisyRun {
    pub state: MixedState,
    pub expectation: f64,
}

impl NoisyProgram {
    pub fn compile(circuit: &QcnnCircuit, profile: &DeviceNoiseProfile) -> Result<Self> {
        profile.validate()?;
        let instructions = circuit.basis_instructions()?;
        let total = circuit.total_qubits();
        let measured = circuit.measurement_wire();

        let mut last_use = vec![None; total];
        for (i, inst) in instructions.iter().enumerate() {
            if let Instruction::Gate(op) = inst {
                for &w in &op.wires {
                    last_use[w] = Some(i);
                }
            }
        }

        let depol1 = depolarizing_channel(profile.p1, 1)?.superoperator();
        let depol2 = depolarizing_channel(profile.p2, 2)?.superoperator();
        let relax = |ns: f64| -> Result<SuperOperator> { Ok(profile.relaxation(ns)?.superoperator()) };

        let mut live: Vec<usize> = (0..total).collect();
        let mut pending = vec![0.0f64; total];
        let mut steps = Vec::with_capacity(instructions.len());
        let mut occurrences = Vec::new();
        let pos_of = |live: &[usize], w: usize| live.iter().position(|&x| x == w);

        for (i, inst) in instructions.iter().enumerate() {
            match inst {
                Instruction::Gate(op) => {
                    let positions = op
                        .wires
                        .iter()
                        .map(|&w| pos_of(&live, w).ok_or_else(|| QcnnError::Invariant(format!("{op} acts on discarded wire {w}"))))
                        .collect::<Result<Vec<_>>>()?;
                    let mut pre = relax(pending[op.wires[0]])?;
                    for &w in &op.wires[1..] {
                        pre = pre.kron(&relax(pending[w])?);
                    }
                    for &w in &op.wires {
                        pending[w] = 0.0;
                    }
                    let (depolarize, duration) = match op.wires.len() {
                        1 => (depol1.clone(), profile.t_1q_ns),
                        _ => (depol2.clone(), profile.t_2q_ns),
                    };
                    for (angle, a) in op.angles.iter().enumerate() {
                        if let Some((p, scale)) = a.param_ref() {
                            occurrences.push(Occurrence {
                                step: steps.len(),
                                angle,
                                slot: p.slot,
                                scale,
                            });
                        }
                    }
                    steps.push(Step::Gate(GateStep {
                        op: op.clone(),
                        positions,
                        num_qubits: live.len(),
                        pre,
                        depolarize,
                    }));
                    for &w in &live {
                        pending[w] += duration;
                    }
                    // idle wires leave the register right after their last gate
                    for &w in &op.wires {
                        if last_use[w] == Some(i) && w != measured && circuit.idle_wires().contains(&w) {
                            let pos = pos_of(&live, w).expect("wire is live");
                            steps.push(Step::Discard {
                                pos,
                                num_qubits: live.len(),
                            });
                            live.remove(pos);
                        }
                    }
                }
                Instruction::Discard(w) => {
                    let pos = pos_of(&live, *w).ok_or_else(|| QcnnError::Invariant(format!("wire {w} discarded twice")))?;
                    steps.push(Step::Discard {
                        pos,
                        num_qubits: live.len(),
                    });
                    live.remove(pos);
                }
            }
        }

        let final_relaxation = live
            .iter()
            .enumerate()
            .map(|(pos, &w)| Ok((pos, relax(pending[w])?)))
            .collect::<Result<Vec<_>>>()?;
        let measure_pos = pos_of(&live, measured).ok_or_else(|| QcnnError::Invariant("measured wire was discarded".into()))?;
        Ok(NoisyProgram {
            total_qubits: total,
            num_params: circuit.num_params(),
            steps,
            final_relaxation,
            final_qubits: live.len(),
            measure_pos,
            occurrences,
        })
    }

    pub fn total_qubits(&self) -> usize {
        self.total_qubits
    }

    pub fn occurrences(&self) -> &[Occurrence] {
        &self.occurrences
    }

    fn fuse(&self, step: &GateStep, values: &[f64]) -> Result<Vec<Complex64>> {
        let unitary = SuperOperator::from_unitary(&build_gate(step.op.kind, values)?);
        Ok(step.depolarize.compose_after(&unitary.compose_after(&step.pre)).matrix().to_vec())
    }

    pub fn bind(&self, params: &[f64]) -> Result<BoundNoisy> {
        if params.len() != self.num_params {
            return Err(QcnnError::arg(format!("expected {} parameters, got {}", self.num_params, params.len())));
        }
        let fused = self
            .steps
            .iter()
            .map(|s| match s {
                Step::Gate(g) => self.fuse(g, &g.op.angle_values(params)),
                Step::Discard { .. } => Ok(Vec::new()),
            })
            .collect::<Result<_>>()?;
        Ok(BoundNoisy { fused })
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

    /// Runs the program. `observer` sees the state after every step and
    /// after the closing relaxation (with index `steps.len()`).
    pub fn run(
        &self,
        bound: &BoundNoisy,
        input: &PureState,
        mut observer: Option<&mut dyn FnMut(usize, &MixedState) -> Result<()>>,
    ) -> Result<NoisyRun> {
        self.check_input(input)?;
        let mut rho = input.to_mixed();
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                Step::Gate(g) => rho.apply_superop_raw(&bound.fused[i], &g.positions),
                Step::Discard { pos, .. } => rho = rho.partial_trace(&[*pos])?,
            }
            if let Some(obs) = observer.as_mut() {
                obs(i, &rho)?;
            }
        }
        for (pos, sop) in &self.final_relaxation {
            rho.apply_superop_raw(sop.matrix(), &[*pos]);
        }
        if let Some(obs) = observer.as_mut() {
            obs(self.steps.len(), &rho)?;
        }
        let expectation = rho.z_expectation(self.measure_pos);
        Ok(NoisyRun { state: rho, expectation })
    }

    pub fn expectation(&self, bound: &BoundNoisy, input: &PureState) -> Result<f64> {
        Ok(self.run(bound, input, None)?.expectation)
    }

    /// Heisenberg-picture shift observables, one per occurrence:
    /// `D_o = (Phi_+^dag - Phi_-^dag)(O_o) / 2`, where `O_o` is the measured
    /// Z evolved backwards to just after the occurrence's step and
    /// `Phi_+-` is that step with the occurrence's angle shifted by
    /// `+-pi/2`. Then `Tr(D_o rho)` on the state entering the step equals the
    /// two-term shift rule `[f(+) - f(-)] / 2`. These depend only on the
    /// parameters, so they are shared by every sample of a batch.
    pub fn shift_observables(&self, params: &[f64], bound: &BoundNoisy) -> Result<ShiftObservables> {
        let n = self.final_qubits;
        let dim = 1usize << n;
        let mut o = vec![Complex64::new(0.0, 0.0); dim * dim];
        let mask = 1usize << (n - 1 - self.measure_pos);
        for i in 0..dim {
            o[i * dim + i] = Complex64::new(if i & mask == 0 { 1.0 } else { -1.0 }, 0.0);
        }
        for (pos, sop) in &self.final_relaxation {
            apply_superop(&mut o, n, sop.adjoint().matrix(), &[*pos]);
        }

        let mut per_occurrence = vec![Vec::new(); self.occurrences.len()];
        let mut occ_idx = self.occurrences.len();
        for (i, step) in self.steps.iter().enumerate().rev() {
            match step {
                Step::Discard { pos, num_qubits } => {
                    o = embed_identity(&o, num_qubits - 1, *pos);
                }
                Step::Gate(g) => {
                    while occ_idx > 0 && self.occurrences[occ_idx - 1].step == i {
                        occ_idx -= 1;
                        let occ = self.occurrences[occ_idx];
                        let mut values = g.op.angle_values(params);
                        let base = values[occ.angle];
                        values[occ.angle] = base + FRAC_PI_2;
                        let plus = self.fuse(g, &values)?;
                        values[occ.angle] = base - FRAC_PI_2;
                        let minus = self.fuse(g, &values)?;
                        let half_diff: Vec<Complex64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) * 0.5).collect();
                        let adj = SuperOperator::from_matrix(g.op.wires.len(), half_diff)?.adjoint();
                        let mut d = o.clone();
                        apply_superop(&mut d, g.num_qubits, adj.matrix(), &g.positions);
                        per_occurrence[occ_idx] = d;
                    }
                    let adj = SuperOperator::from_matrix(g.op.wires.len(), bound.fused[i].clone())?.adjoint();
                    apply_superop(&mut o, g.num_qubits, adj.matrix(), &g.positions);
                }
            }
        }
        Ok(ShiftObservables { per_occurrence })
    }

    /// `f` and `df/dtheta` (per parameter slot, chain rule over all
    /// occurrences) for one input.
    pub fn expectation_and_gradient(&self, bound: &BoundNoisy, shifts: &ShiftObservables, input: &PureState) -> Result<(f64, Vec<f64>)> {
        self.check_input(input)?;
        let mut grad = vec![0.0; self.num_params];
        let mut rho = input.to_mixed();
        let mut occ_idx = 0;
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                Step::Gate(g) => {
                    let dim = 1usize << g.num_qubits;
                    while occ_idx < self.occurrences.len() && self.occurrences[occ_idx].step == i {
                        let occ = self.occurrences[occ_idx];
                        let d = trace_product(&shifts.per_occurrence[occ_idx], rho.matrix(), dim).re;
                        grad[occ.slot] += occ.scale * d;
                        occ_idx += 1;
                    }
                    rho.apply_superop_raw(&bound.fused[i], &g.positions);
                }
                Step::Discard { pos, .. } => rho = rho.partial_trace(&[*pos])?,
            }
        }
        for (pos, sop) in &self.final_relaxation {
            rho.apply_superop_raw(sop.matrix(), &[*pos]);
        }
        Ok((rho.z_expectation(self.measure_pos), grad))
    }
}

/// See [`NoisyProgram::shift_observables`].
#[derive(Debug, Clone)]
pub struct ShiftObservables {
    per_occurrence: Vec<Vec<Complex64>>,
}

/// One-shot noisy run of `circuit` at `params` on `input`.
pub fn noisy_execute(
    circuit: &QcnnCircuit,
    params: &[f64],
    input: &PureState,
    profile: &DeviceNoiseProfile,
    observer: Option<&mut dyn FnMut(usize, &MixedState) -> Result<()>>,
) -> Result<NoisyRun> {
    let program = NoisyProgram::compile(circuit, profile)?;
    let bound = program.bind(params)?;
    program.run(&bound, input, observer)
}
