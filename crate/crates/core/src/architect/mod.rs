//! QCNN layout for arbitrary input qubit counts.
//!
//! Wire layout: data wires come first (`0..K`, or `0..2^m` for the classical
//! padding methods) and ancillas are appended below them. Every layer runs
//! its convolution ring `l_i` times and then pools top-down, keeping the
//! upper wire of each pair and using the lower one as control. The final
//! survivor is always wire 0.

mod resources;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ansatz::{decompose_to_basis, AnsatzSet, CircuitOp, ParamRef};
use crate::error::{QcnnError, Result};

pub use resources::{estimate_resources, measure_resources, min_ancillas_multiqubit, LayerResources, MultiQubitPadding, ResourceReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaddingMethod {
    ZeroData,
    PeriodicData,
    SkipPooling,
    LayerWiseAncilla,
    SingleAncilla,
}

impl PaddingMethod {
    pub const ALL: [PaddingMethod; 5] = [
        PaddingMethod::ZeroData,
        PaddingMethod::PeriodicData,
        PaddingMethod::SkipPooling,
        PaddingMethod::LayerWiseAncilla,
        PaddingMethod::SingleAncilla,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PaddingMethod::ZeroData => "zero-data",
            PaddingMethod::PeriodicData => "periodic-data",
            PaddingMethod::SkipPooling => "skip-pooling",
            PaddingMethod::LayerWiseAncilla => "layer-wise-ancilla",
            PaddingMethod::SingleAncilla => "single-ancilla",
        }
    }

    /// Pads the classical feature vector instead of the qubit register.
    pub fn is_classical(self) -> bool {
        matches!(self, PaddingMethod::ZeroData | PaddingMethod::PeriodicData)
    }

    pub fn uses_ancillas(self) -> bool {
        matches!(self, PaddingMethod::LayerWiseAncilla | PaddingMethod::SingleAncilla)
    }
}

impl fmt::Display for PaddingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PaddingMethod {
    type Err = QcnnError;

    fn from_str(s: &str) -> Result<Self> {
        PaddingMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = PaddingMethod::ALL.iter().map(|m| m.name()).collect();
                QcnnError::arg(format!("unknown padding method '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// `m = ceil(log2 K)`, the number of layers.
pub fn num_layers(k: usize) -> usize {
    assert!(k >= 1);
    (usize::BITS - (k - 1).leading_zeros()) as usize
}

/// `Y_i = ceil(K / 2^(i-1)) mod 2` for the 1-based layer index `i`.
pub fn parity(k: usize, layer: usize) -> usize {
    assert!(layer >= 1);
    k.div_ceil(1 << (layer - 1)) % 2
}

/// Everything that determines a QCNN's structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    /// Input qubit count `K` before any padding.
    pub input_qubits: usize,
    pub method: PaddingMethod,
    /// Convolution repetitions `l_1..l_m`.
    pub reps: Vec<usize>,
    pub ansatz: AnsatzSet,
    pub sharing: bool,
}

impl ArchitectureConfig {
    pub fn new(input_qubits: usize, method: PaddingMethod, reps: Vec<usize>, ansatz: AnsatzSet, sharing: bool) -> Self {
        ArchitectureConfig {
            input_qubits,
            method,
            reps,
            ansatz,
            sharing,
        }
    }

    /// Same repetition count in every layer.
    pub fn uniform(input_qubits: usize, method: PaddingMethod, reps: usize, ansatz: AnsatzSet, sharing: bool) -> Result<Self> {
        if input_qubits < 2 {
            return Err(QcnnError::arg(format!("need at least 2 input qubits, got {input_qubits}")));
        }
        Ok(Self::new(input_qubits, method, vec![reps; num_layers(input_qubits)], ansatz, sharing))
    }

    pub fn num_layers(&self) -> usize {
        num_layers(self.input_qubits)
    }

    /// Qubits that carry encoded data: `2^m` for classical padding, else `K`.
    pub fn data_qubits(&self) -> usize {
        if self.method.is_classical() {
            1 << self.num_layers()
        } else {
            self.input_qubits
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.input_qubits;
        if k < 2 {
            return Err(QcnnError::arg(format!("need at least 2 input qubits, got {k}")));
        }
        let m = num_layers(k);
        if self.reps.len() != m {
            return Err(QcnnError::arg(format!(
                "K={k} needs {m} repetition counts (one per layer), got {}",
                self.reps.len()
            )));
        }
        if let Some(i) = self.reps.iter().position(|&l| l == 0) {
            return Err(QcnnError::arg(format!("layer {} has zero convolution repetitions", i + 1)));
        }
        Ok(())
    }
}

/// Structure of one convolution + pooling layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerPlan {
    /// 1-based.
    pub index: usize,
    pub roster: Vec<usize>,
    pub reps: usize,
    /// Depth steps of one ring repetition; pairs within a step are disjoint.
    pub conv_steps: Vec<Vec<(usize, usize)>>,
    /// `(control, survivor)`; the control is discarded unless it is the
    /// reusable single ancilla.
    pub pool_pairs: Vec<(usize, usize)>,
    /// Wire passed straight to the next layer (skip pooling, odd rosters).
    pub skipped: Option<usize>,
    /// Ancilla wire appended to this layer's roster, if any.
    pub ancilla_added: Option<usize>,
    /// `Y_i` of the original input count.
    pub parity: usize,
}

impl LayerPlan {
    pub fn survivors(&self) -> Vec<usize> {
        let mut next: Vec<usize> = self.pool_pairs.iter().map(|&(_, s)| s).collect();
        next.extend(self.skipped);
        next
    }
}

/// Ring schedule: the cycle's edges split greedily, top first, into maximal
/// matchings. Even rings take two steps, odd rings three. Two wires form a
/// single edge.
pub fn ring_schedule(roster: &[usize]) -> Vec<Vec<(usize, usize)>> {
    let n = roster.len();
    if n < 2 {
        return Vec::new();
    }
    if n == 2 {
        return vec![vec![(roster[0], roster[1])]];
    }
    let mut remaining: Vec<(usize, usize)> = (0..n).map(|i| (roster[i], roster[(i + 1) % n])).collect();
    let mut steps = Vec::new();
    while !remaining.is_empty() {
        let mut used = Vec::new();
        let mut step = Vec::new();
        remaining.retain(|&(a, b)| {
            if used.contains(&a) || used.contains(&b) {
                true
            } else {
                used.extend([a, b]);
                step.push((a, b));
                false
            }
        });
        steps.push(step);
    }
    steps
}

/// Lays out every layer for `config` (already validated).
pub fn plan_layers(config: &ArchitectureConfig) -> Result<Vec<LayerPlan>> {
    config.validate()?;
    let k = config.input_qubits;
    let m = config.num_layers();
    let data = config.data_qubits();
    let mut roster: Vec<usize> = (0..data).collect();
    let mut next_wire = data;
    let mut single_ancilla: Option<usize> = None;
    let mut layers = Vec::with_capacity(m);

    for i in 1..=m {
        let y = if i < m { parity(k, i) } else { 0 };
        let mut ancilla_added = None;
        if y == 1 && config.method.uses_ancillas() {
            let wire = match (config.method, single_ancilla) {
                (PaddingMethod::SingleAncilla, Some(w)) => w,
                _ => {
                    let w = next_wire;
                    next_wire += 1;
                    if config.method == PaddingMethod::SingleAncilla {
                        single_ancilla = Some(w);
                    }
                    w
                }
            };
            roster.push(wire);
            ancilla_added = Some(wire);
        }

        let skipped = if roster.len() % 2 == 1 {
            if config.method != PaddingMethod::SkipPooling {
                return Err(QcnnError::Invariant(format!("layer {i} has odd roster {roster:?}")));
            }
            roster.last().copied()
        } else {
            None
        };
        let paired = roster.len() - usize::from(skipped.is_some());
        let pool_pairs = roster[..paired].chunks(2).map(|p| (p[1], p[0])).collect();

        let plan = LayerPlan {
            index: i,
            conv_steps: ring_schedule(&roster),
            roster: roster.clone(),
            reps: config.reps[i - 1],
            pool_pairs,
            skipped,
            ancilla_added,
            parity: y,
        };
        roster = plan.survivors();
        layers.push(plan);
    }
    debug_assert_eq!(roster, vec![0]);
    Ok(layers)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateRole {
    Conv,
    Pool,
}

/// One placed copy of a convolution or pooling template.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemplateInstance {
    pub role: TemplateRole,
    pub layer: usize,
    /// Ring repetition (always 0 for pooling).
    pub rep: usize,
    /// Depth step within the repetition (always 0 for pooling).
    pub step: usize,
    /// `(wire_a, wire_b)` for convolutions, `(control, survivor)` for pooling.
    pub wires: (usize, usize),
    /// Sharing group: one per (layer, repetition) for convolutions and one
    /// per layer for pooling.
    pub group: usize,
    pub params: Vec<ParamRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Gate(CircuitOp),
    /// Trace out a wire; it is never touched again.
    Discard(usize),
}

/// A fully laid-out QCNN with its parameter table.
#[derive(Debug, Clone)]
pub struct QcnnCircuit {
    config: ArchitectureConfig,
    layers: Vec<LayerPlan>,
    total_qubits: usize,
    instructions: Vec<Instruction>,
    instances: Vec<TemplateInstance>,
    num_params: usize,
    measurement_wire: usize,
    idle_wires: Vec<usize>,
}

/// Builds the circuit and its layer plans.
pub fn plan_architecture(config: &ArchitectureConfig) -> Result<QcnnCircuit> {
    let layers = plan_layers(config)?;
    let total_qubits = layers
        .iter()
        .flat_map(|l| l.roster.iter().copied())
        .max()
        .map_or(0, |w| w + 1);
    let reusable = match config.method {
        PaddingMethod::SingleAncilla => layers.iter().find_map(|l| l.ancilla_added),
        _ => None,
    };

    let ansatz = config.ansatz;
    let mut instructions = Vec::new();
    let mut instances = Vec::new();
    let mut next_slot = 0usize;
    let mut next_group = 0usize;
    let mut group_slots: Vec<Vec<ParamRef>> = Vec::new();

    let mut alloc = |group: usize, count: usize, group_slots: &mut Vec<Vec<ParamRef>>| -> Vec<ParamRef> {
        if config.sharing {
            if group_slots.len() <= group {
                group_slots.resize(group + 1, Vec::new());
            }
            if group_slots[group].is_empty() && count > 0 {
                group_slots[group] = (0..count)
                    .map(|j| ParamRef {
                        slot: next_slot + j,
                        group,
                    })
                    .collect();
                next_slot += count;
            }
            group_slots[group].clone()
        } else {
            let refs = (0..count)
                .map(|j| ParamRef {
                    slot: next_slot + j,
                    group,
                })
                .collect();
            next_slot += count;
            refs
        }
    };

    for layer in &layers {
        for rep in 0..layer.reps {
            let group = next_group;
            next_group += 1;
            for (step, pairs) in layer.conv_steps.iter().enumerate() {
                for &(a, b) in pairs {
                    let params = alloc(group, ansatz.conv_params(), &mut group_slots);
                    instructions.extend(ansatz.conv(a, b, &params)?.into_iter().map(Instruction::Gate));
                    instances.push(TemplateInstance {
                        role: TemplateRole::Conv,
                        layer: layer.index,
                        rep,
                        step,
                        wires: (a, b),
                        group,
                        params,
                    });
                }
            }
        }
        let group = next_group;
        next_group += 1;
        for &(control, survivor) in &layer.pool_pairs {
            let params = alloc(group, ansatz.pool_params(), &mut group_slots);
            let pool = ansatz.pool(control, survivor, &params)?;
            instructions.extend(pool.ops.into_iter().map(Instruction::Gate));
            if Some(pool.discard) != reusable {
                instructions.push(Instruction::Discard(pool.discard));
            }
            instances.push(TemplateInstance {
                role: TemplateRole::Pool,
                layer: layer.index,
                rep: 0,
                step: 0,
                wires: (control, survivor),
                group,
                params,
            });
        }
    }

    let measurement_wire = layers.last().and_then(|l| l.pool_pairs.last()).map(|&(_, s)| s).unwrap_or(0);
    let circuit = QcnnCircuit {
        config: config.clone(),
        total_qubits,
        instructions,
        instances,
        num_params: next_slot,
        measurement_wire,
        idle_wires: reusable.into_iter().collect(),
        layers,
    };
    circuit.check_structure()?;
    Ok(circuit)
}

impl QcnnCircuit {
    pub fn config(&self) -> &ArchitectureConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerPlan] {
        &self.layers
    }

    pub fn total_qubits(&self) -> usize {
        self.total_qubits
    }

    /// Wires that receive encoded data; the rest start in `|0>`.
    pub fn data_qubits(&self) -> usize {
        self.config.data_qubits()
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn instances(&self) -> &[TemplateInstance] {
        &self.instances
    }

    /// Length of the parameter store.
    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn measurement_wire(&self) -> usize {
        self.measurement_wire
    }

    /// Wires that are neither traced out nor measured (the reused single
    /// ancilla after its last pooling).
    pub fn idle_wires(&self) -> &[usize] {
        &self.idle_wires
    }

    /// Same instruction stream with every gate rewritten into the hardware
    /// basis.
    pub fn basis_instructions(&self) -> Result<Vec<Instruction>> {
        let mut out = Vec::with_capacity(self.instructions.len() * 2);
        for inst in &self.instructions {
            match inst {
                Instruction::Gate(op) => {
                    out.extend(decompose_to_basis(std::slice::from_ref(op))?.into_iter().map(Instruction::Gate))
                }
                Instruction::Discard(w) => out.push(Instruction::Discard(*w)),
            }
        }
        Ok(out)
    }

    fn check_structure(&self) -> Result<()> {
        let mut discarded = vec![false; self.total_qubits];
        for inst in &self.instructions {
            match inst {
                Instruction::Gate(op) => {
                    if let Some(&w) = op.wires.iter().find(|&&w| w >= self.total_qubits || discarded[w]) {
                        return Err(QcnnError::Invariant(format!("{op} touches unavailable wire {w}")));
                    }
                }
                Instruction::Discard(w) => {
                    if std::mem::replace(&mut discarded[*w], true) {
                        return Err(QcnnError::Invariant(format!("wire {w} discarded twice")));
                    }
                }
            }
        }
        let traced = discarded.iter().filter(|&&d| d).count();
        if discarded[self.measurement_wire] || traced + 1 + self.idle_wires.len() != self.total_qubits {
            return Err(QcnnError::Invariant(format!(
                "{traced} discards + measurement + {} idle wires do not cover {} qubits",
                self.idle_wires.len(),
                self.total_qubits
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize, method: PaddingMethod) -> ArchitectureConfig {
        ArchitectureConfig::uniform(k, method, 1, AnsatzSet::One, false).unwrap()
    }

    #[test]
    fn layer_count_and_parity() {
        assert_eq!(num_layers(2), 1);
        assert_eq!(num_layers(5), 3);
        assert_eq!(num_layers(8), 3);
        assert_eq!(num_layers(9), 4);
        assert_eq!((1..=3).map(|i| parity(5, i)).collect::<Vec<_>>(), vec![1, 1, 0]);
        assert_eq!((1..=3).map(|i| parity(8, i)).collect::<Vec<_>>(), vec![0, 0, 0]);
    }

    #[test]
    fn even_ring_takes_two_steps() {
        let steps = ring_schedule(&[0, 1, 2, 3, 4, 5]);
        assert_eq!(steps, vec![vec![(0, 1), (2, 3), (4, 5)], vec![(1, 2), (3, 4), (5, 0)]]);
    }

    #[test]
    fn odd_ring_takes_three_steps() {
        let steps = ring_schedule(&[0, 1, 2, 3, 4]);
        assert_eq!(steps, vec![vec![(0, 1), (2, 3)], vec![(1, 2), (3, 4)], vec![(4, 0)]]);
        assert_eq!(ring_schedule(&[0, 1, 2]).len(), 3);
    }

    #[test]
    fn single_ancilla_rosters_for_five_inputs() {
        let c = plan_architecture(&cfg(5, PaddingMethod::SingleAncilla)).unwrap();
        assert_eq!(c.total_qubits(), 6);
        let sizes: Vec<usize> = c.layers().iter().map(|l| l.roster.len()).collect();
        assert_eq!(sizes, vec![6, 4, 2]);
        assert_eq!(c.layers()[0].ancilla_added, Some(5));
        assert_eq!(c.layers()[1].ancilla_added, Some(5));
        assert_eq!(c.idle_wires(), &[5]);
        assert_eq!(c.measurement_wire(), 0);
        // the reused ancilla is never traced
        assert!(!c.instructions().contains(&Instruction::Discard(5)));
    }

    #[test]
    fn skip_pooling_first_layer_for_five_inputs() {
        let c = plan_architecture(&cfg(5, PaddingMethod::SkipPooling)).unwrap();
        let l1 = &c.layers()[0];
        let edges: usize = l1.conv_steps.iter().map(Vec::len).sum();
        assert_eq!(edges, 5);
        assert_eq!(l1.pool_pairs, vec![(1, 0), (3, 2)]);
        assert_eq!(l1.skipped, Some(4));
        assert_eq!(c.layers()[1].roster, vec![0, 2, 4]);
        assert_eq!(c.total_qubits(), 5);
    }

    #[test]
    fn layer_wise_ancillas_are_fresh_and_always_controls() {
        let c = plan_architecture(&cfg(5, PaddingMethod::LayerWiseAncilla)).unwrap();
        assert_eq!(c.total_qubits(), 7);
        for l in c.layers() {
            if let Some(a) = l.ancilla_added {
                assert!(l.pool_pairs.iter().any(|&(ctrl, _)| ctrl == a));
            }
        }
        assert_eq!(c.layers()[0].ancilla_added, Some(5));
        assert_eq!(c.layers()[1].ancilla_added, Some(6));
    }

    #[test]
    fn power_of_two_plans_coincide() {
        let reference = plan_layers(&cfg(8, PaddingMethod::ZeroData)).unwrap();
        for method in PaddingMethod::ALL {
            assert_eq!(plan_layers(&cfg(8, method)).unwrap(), reference, "{method}");
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut c = cfg(5, PaddingMethod::ZeroData);
        c.reps = vec![1, 1];
        assert!(matches!(plan_architecture(&c), Err(QcnnError::Argument(_))));
        c.reps = vec![1, 0, 1];
        assert!(plan_architecture(&c).is_err());
        assert!(ArchitectureConfig::uniform(1, PaddingMethod::ZeroData, 1, AnsatzSet::One, true).is_err());
    }

    #[test]
    fn shared_instances_reference_identical_slots() {
        let mut c = cfg(6, PaddingMethod::LayerWiseAncilla);
        c.sharing = true;
        c.reps = vec![2, 1, 1];
        let circuit = plan_architecture(&c).unwrap();
        for a in circuit.instances() {
            for b in circuit.instances() {
                if a.group == b.group {
                    assert_eq!(a.params, b.params);
                } else if !a.params.is_empty() && !b.params.is_empty() {
                    assert_ne!(a.params[0].slot, b.params[0].slot);
                }
            }
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in PaddingMethod::ALL {
            assert_eq!(m.name().parse::<PaddingMethod>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert!("bogus".parse::<PaddingMethod>().is_err());
    }

    #[test]
    fn basis_instructions_are_basis_only() {
        let c = plan_architecture(&cfg(5, PaddingMethod::SingleAncilla)).unwrap();
        for inst in c.basis_instructions().unwrap() {
            if let Instruction::Gate(op) = inst {
                assert!(op.kind.is_basis());
            }
        }
    }
}
