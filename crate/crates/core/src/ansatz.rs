//! Parameterised two-qubit templates used by the convolution and pooling
//! layers, and their compilation into the hardware basis
//! `{ID, RZ, SX, X, U3, CX}`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QcnnError, Result};
use crate::simcore::{build_gate, GateKind, GateMatrix, PureState};

/// Rotation axis of the two single-qubit gates in convolution circuit 1.
pub const CONV1_ROTATION: GateKind = GateKind::Ry;

/// Slot in the parameter store plus the sharing group it was allocated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamRef {
    pub slot: usize,
    pub group: usize,
}

/// Gate angle: either a constant or `scale * params[slot]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    Fixed(f64),
    Param { param: ParamRef, scale: f64 },
}

impl Angle {
    pub fn param(param: ParamRef) -> Self {
        Angle::Param { param, scale: 1.0 }
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        match *self {
            Angle::Fixed(v) => v,
            Angle::Param { param, scale } => scale * params[param.slot],
        }
    }

    pub fn param_ref(&self) -> Option<(ParamRef, f64)> {
        match *self {
            Angle::Fixed(_) => None,
            Angle::Param { param, scale } => Some((param, scale)),
        }
    }

    fn scaled(&self, factor: f64) -> Angle {
        match *self {
            Angle::Fixed(v) => Angle::Fixed(factor * v),
            Angle::Param { param, scale } => Angle::Param {
                param,
                scale: factor * scale,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitOp {
    pub kind: GateKind,
    pub wires: Vec<usize>,
    pub angles: Vec<Angle>,
}

impl CircuitOp {
    pub fn new(kind: GateKind, wires: Vec<usize>, angles: Vec<Angle>) -> Result<Self> {
        if wires.len() != kind.arity() {
            return Err(QcnnError::validation(format!("{kind} acts on {} wire(s), got {:?}", kind.arity(), wires)));
        }
        if angles.len() != kind.num_params() {
            return Err(QcnnError::validation(format!(
                "{kind} takes {} angle(s), got {}",
                kind.num_params(),
                angles.len()
            )));
        }
        if wires.len() == 2 && wires[0] == wires[1] {
            return Err(QcnnError::arg(format!("{kind} needs two distinct wires")));
        }
        Ok(CircuitOp { kind, wires, angles })
    }

    fn fixed(kind: GateKind, wires: Vec<usize>) -> Self {
        CircuitOp {
            kind,
            wires,
            angles: Vec::new(),
        }
    }

    fn rot(kind: GateKind, wire: usize, angle: Angle) -> Self {
        CircuitOp {
            kind,
            wires: vec![wire],
            angles: vec![angle],
        }
    }

    pub fn angle_values(&self, params: &[f64]) -> Vec<f64> {
        self.angles.iter().map(|a| a.value(params)).collect()
    }

    pub fn bind(&self, params: &[f64]) -> Result<GateMatrix> {
        build_gate(self.kind, &self.angle_values(params))
    }

    pub fn is_parameterized(&self) -> bool {
        self.angles.iter().any(|a| matches!(a, Angle::Param { .. }))
    }
}

impl fmt::Display for CircuitOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.kind, self.wires)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum AnsatzSet {
    /// Convolution circuit 1 with the parameterised pooling circuit.
    One,
    /// SU(4) convolution circuit 2 with trace-only pooling.
    Two,
}

impl AnsatzSet {
    pub fn conv_params(self) -> usize {
        match self {
            AnsatzSet::One => 2,
            AnsatzSet::Two => 15,
        }
    }

    pub fn pool_params(self) -> usize {
        match self {
            AnsatzSet::One => 2,
            AnsatzSet::Two => 0,
        }
    }

    pub fn pool_is_parameterized(self) -> bool {
        self == AnsatzSet::One
    }

    pub fn conv(self, wire_a: usize, wire_b: usize, params: &[ParamRef]) -> Result<Vec<CircuitOp>> {
        match self {
            AnsatzSet::One => conv1_template(wire_a, wire_b, params),
            AnsatzSet::Two => conv2_template(wire_a, wire_b, params),
        }
    }

    pub fn pool(self, control: usize, survivor: usize, params: &[ParamRef]) -> Result<PoolTemplate> {
        pooling_template(control, survivor, params, self.pool_is_parameterized())
    }
}

impl TryFrom<u8> for AnsatzSet {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(AnsatzSet::One),
            2 => Ok(AnsatzSet::Two),
            other => Err(format!("ansatz set must be 1 or 2, got {other}")),
        }
    }
}

impl From<AnsatzSet> for u8 {
    fn from(a: AnsatzSet) -> u8 {
        match a {
            AnsatzSet::One => 1,
            AnsatzSet::Two => 2,
        }
    }
}

impl fmt::Display for AnsatzSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

fn check_pair(a: usize, b: usize, params: &[ParamRef], expected: usize, name: &str) -> Result<()> {
    if a == b {
        return Err(QcnnError::arg(format!("{name}: wires must be distinct, got {a} twice")));
    }
    if params.len() != expected {
        return Err(QcnnError::arg(format!("{name}: expected {expected} parameters, got {}", params.len())));
    }
    Ok(())
}

/// Convolution circuit 1: a rotation on each wire followed by `CX(a -> b)`.
pub fn conv1_template(wire_a: usize, wire_b: usize, params: &[ParamRef]) -> Result<Vec<CircuitOp>> {
    check_pair(wire_a, wire_b, params, 2, "conv1")?;
    Ok(vec![
        CircuitOp::rot(CONV1_ROTATION, wire_a, Angle::param(params[0])),
        CircuitOp::rot(CONV1_ROTATION, wire_b, Angle::param(params[1])),
        CircuitOp::fixed(GateKind::Cx, vec![wire_a, wire_b]),
    ])
}

fn u3_on(wire: usize, p: &[ParamRef]) -> CircuitOp {
    CircuitOp {
        kind: GateKind::U3,
        wires: vec![wire],
        angles: p.iter().map(|&r| Angle::param(r)).collect(),
    }
}

/// Convolution circuit 2: a general SU(4) element with three CX gates and
/// fifteen single-qubit angles.
///
/// With every angle at zero the three alternating CX gates leave a SWAP, so
/// the template's zero point is SWAP rather than the identity.
pub fn conv2_template(wire_a: usize, wire_b: usize, params: &[ParamRef]) -> Result<Vec<CircuitOp>> {
    check_pair(wire_a, wire_b, params, 15, "conv2")?;
    let (a, b) = (wire_a, wire_b);
    Ok(vec![
        u3_on(a, &params[0..3]),
        u3_on(b, &params[3..6]),
        CircuitOp::fixed(GateKind::Cx, vec![b, a]),
        CircuitOp::rot(GateKind::Rz, a, Angle::param(params[6])),
        CircuitOp::rot(GateKind::Ry, b, Angle::param(params[7])),
        CircuitOp::fixed(GateKind::Cx, vec![a, b]),
        CircuitOp::rot(GateKind::Ry, b, Angle::param(params[8])),
        CircuitOp::fixed(GateKind::Cx, vec![b, a]),
        u3_on(a, &params[9..12]),
        u3_on(b, &params[12..15]),
    ])
}

/// Gates of one pooling instance and the wire it discards afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolTemplate {
    pub ops: Vec<CircuitOp>,
    pub discard: usize,
}

/// Pooling circuit: `CRY(theta1)` active on control=1, then `RY(theta2)`
/// active on control=0 (an X-conjugated CRY), then the control is traced
/// out. The trace-only variant emits no gates.
pub fn pooling_template(
    control: usize,
    survivor: usize,
    params: &[ParamRef],
    parameterized: bool,
) -> Result<PoolTemplate> {
    let expected = if parameterized { 2 } else { 0 };
    check_pair(control, survivor, params, expected, "pooling")?;
    let ops = if parameterized {
        vec![
            CircuitOp {
                kind: GateKind::Cry,
                wires: vec![control, survivor],
                angles: vec![Angle::param(params[0])],
            },
            CircuitOp::fixed(GateKind::X, vec![control]),
            CircuitOp {
                kind: GateKind::Cry,
                wires: vec![control, survivor],
                angles: vec![Angle::param(params[1])],
            },
            CircuitOp::fixed(GateKind::X, vec![control]),
        ]
    } else {
        Vec::new()
    };
    Ok(PoolTemplate { ops, discard: control })
}

/// Rewrites ops into `{ID, RZ, SX, X, U3, CX}`.
///
/// `RY(a)` becomes `U3(a, 0, 0)`; `CRY(t)` and `CRZ(t)` become a half-angle
/// rotation, CX, the negated half-angle rotation and CX, with both halves
/// referencing the original slot at scale `+-1/2`. `U3` stays a single basis
/// gate; each of its angles carries at most one parameter reference.
pub fn decompose_to_basis(ops: &[CircuitOp]) -> Result<Vec<CircuitOp>> {
    let mut out = Vec::with_capacity(ops.len() * 2);
    for op in ops {
        CircuitOp::new(op.kind, op.wires.clone(), op.angles.clone())?;
        match op.kind {
            GateKind::Id | GateKind::X | GateKind::Sx | GateKind::Rz | GateKind::U3 | GateKind::Cx => {
                out.push(op.clone());
            }
            GateKind::Ry => out.push(ry_as_u3(op.wires[0], op.angles[0])),
            GateKind::Cry | GateKind::Crz => {
                let (ctrl, tgt) = (op.wires[0], op.wires[1]);
                let half = op.angles[0].scaled(0.5);
                let neg_half = op.angles[0].scaled(-0.5);
                let rot = |angle: Angle| {
                    if op.kind == GateKind::Cry {
                        ry_as_u3(tgt, angle)
                    } else {
                        CircuitOp::rot(GateKind::Rz, tgt, angle)
                    }
                };
                out.push(rot(half));
                out.push(CircuitOp::fixed(GateKind::Cx, vec![ctrl, tgt]));
                out.push(rot(neg_half));
                out.push(CircuitOp::fixed(GateKind::Cx, vec![ctrl, tgt]));
            }
        }
    }
    debug_assert!(out.iter().all(|op| op.kind.is_basis()));
    Ok(out)
}

fn ry_as_u3(wire: usize, angle: Angle) -> CircuitOp {
    CircuitOp {
        kind: GateKind::U3,
        wires: vec![wire],
        angles: vec![angle, Angle::Fixed(0.0), Angle::Fixed(0.0)],
    }
}

/// Dense unitary (row-major, `2^n x 2^n`) of an op list on `num_qubits` wires.
pub fn circuit_unitary(ops: &[CircuitOp], num_qubits: usize, params: &[f64]) -> Result<Vec<Complex64>> {
    let dim = 1usize << num_qubits;
    let bound: Vec<GateMatrix> = ops.iter().map(|op| op.bind(params)).collect::<Result<_>>()?;
    let mut u = vec![Complex64::new(0.0, 0.0); dim * dim];
    for col in 0..dim {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[col] = Complex64::new(1.0, 0.0);
        let mut psi = PureState::from_amplitudes(amps)?;
        for (op, g) in ops.iter().zip(&bound) {
            psi.apply_unitary(g, &op.wires)?;
        }
        for (row, a) in psi.amplitudes().iter().enumerate() {
            u[row * dim + col] = *a;
        }
    }
    Ok(u)
}
