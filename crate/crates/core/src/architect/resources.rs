use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{num_layers, parity, ArchitectureConfig, PaddingMethod, QcnnCircuit, TemplateRole};
use crate::error::{QcnnError, Result};

/// Per-layer share of a [`ResourceReport`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerResources {
    pub layer: usize,
    /// Roster size, ancillas included.
    pub qubits: usize,
    pub depth: usize,
    pub params_shared: usize,
    pub params_unshared: usize,
}

/// Ancilla count, logical depth (one template = depth 1) and parameter
/// counts with sharing on and off.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub input_qubits: usize,
    pub method: PaddingMethod,
    pub ancilla_qubits: usize,
    pub depth: usize,
    pub params_shared: usize,
    pub params_unshared: usize,
    pub layers: Vec<LayerResources>,
}

impl ResourceReport {
    /// Parameter count for the given sharing mode.
    pub fn params(&self, sharing: bool) -> usize {
        if sharing {
            self.params_shared
        } else {
            self.params_unshared
        }
    }
}

/// Closed-form resource counts.
pub fn estimate_resources(config: &ArchitectureConfig) -> Result<ResourceReport> {
    config.validate()?;
    let k = config.input_qubits;
    let m = num_layers(k);
    let method = config.method;
    let c = config.ansatz.conv_params();
    let p = config.ansatz.pool_params();
    let y: Vec<usize> = (1..m).map(|i| parity(k, i)).collect();
    let sum_y: usize = y.iter().sum();

    let mut layers = Vec::with_capacity(m);
    for i in 1..=m {
        let l = config.reps[i - 1];
        let shared = l * c + p;
        if i == m {
            layers.push(LayerResources {
                layer: i,
                qubits: 2,
                depth: l + 1,
                params_shared: shared,
                params_unshared: l * c + p,
            });
            continue;
        }
        let yi = y[i - 1];
        let n = k.div_ceil(1 << (i - 1));
        let (qubits, depth, unshared) = match method {
            PaddingMethod::ZeroData | PaddingMethod::PeriodicData => {
                let n = (1usize << m) >> (i - 1);
                (n, 2 * l + 1, n * l * c + n / 2 * p)
            }
            PaddingMethod::SkipPooling => (n, (2 + yi) * l + 1, n * l * c + (n - yi) / 2 * p),
            PaddingMethod::LayerWiseAncilla | PaddingMethod::SingleAncilla => {
                (n + yi, 2 * l + 1, (n + yi) * l * c + (n + yi) / 2 * p)
            }
        };
        layers.push(LayerResources {
            layer: i,
            qubits,
            depth,
            params_shared: shared,
            params_unshared: unshared,
        });
    }

    let ancilla_qubits = match method {
        PaddingMethod::ZeroData | PaddingMethod::PeriodicData => (1 << m) - k,
        PaddingMethod::SkipPooling => 0,
        PaddingMethod::LayerWiseAncilla => sum_y,
        PaddingMethod::SingleAncilla => sum_y.min(1),
    };
    Ok(ResourceReport {
        input_qubits: k,
        method,
        ancilla_qubits,
        depth: layers.iter().map(|l| l.depth).sum(),
        params_shared: layers.iter().map(|l| l.params_shared).sum(),
        params_unshared: layers.iter().map(|l| l.params_unshared).sum(),
        layers,
    })
}

/// Counts resources off a built circuit: depth is the number of distinct
/// convolution depth steps plus one pooling round per layer, parameters are
/// summed per sharing group (shared) or per instance (unshared).
pub fn measure_resources(circuit: &QcnnCircuit) -> ResourceReport {
    let config = circuit.config();
    let ansatz = config.ansatz;
    let per_instance = |role: TemplateRole| match role {
        TemplateRole::Conv => ansatz.conv_params(),
        TemplateRole::Pool => ansatz.pool_params(),
    };

    let mut moments: BTreeMap<usize, BTreeSet<(TemplateRole, usize, usize)>> = BTreeMap::new();
    let mut groups: BTreeMap<usize, BTreeMap<usize, TemplateRole>> = BTreeMap::new();
    let mut unshared: BTreeMap<usize, usize> = BTreeMap::new();
    for inst in circuit.instances() {
        moments.entry(inst.layer).or_default().insert((inst.role, inst.rep, inst.step));
        groups.entry(inst.layer).or_default().insert(inst.group, inst.role);
        *unshared.entry(inst.layer).or_default() += per_instance(inst.role);
    }

    let layers: Vec<LayerResources> = circuit
        .layers()
        .iter()
        .map(|plan| LayerResources {
            layer: plan.index,
            qubits: plan.roster.len(),
            depth: moments.get(&plan.index).map_or(0, BTreeSet::len),
            params_shared: groups
                .get(&plan.index)
                .map_or(0, |g| g.values().map(|&role| per_instance(role)).sum()),
            params_unshared: unshared.get(&plan.index).copied().unwrap_or(0),
        })
        .collect();

    ResourceReport {
        input_qubits: config.input_qubits,
        method: config.method,
        ancilla_qubits: circuit.total_qubits() - config.input_qubits,
        depth: layers.iter().map(|l| l.depth).sum(),
        params_shared: layers.iter().map(|l| l.params_shared).sum(),
        params_unshared: layers.iter().map(|l| l.params_unshared).sum(),
        layers,
    }
}

/// Ancillas needed so an `m`-qubit layer splits evenly into `n`-qubit
/// convolutions, and the conv-layer depth that split achieves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiQubitPadding {
    pub ancillas: usize,
    pub conv_depth: usize,
}

pub fn min_ancillas_multiqubit(m: usize, n: usize) -> Result<MultiQubitPadding> {
    if n < 2 || m < n {
        return Err(QcnnError::arg(format!(
            "need layer size m >= convolution arity n >= 2, got m={m}, n={n}"
        )));
    }
    Ok(MultiQubitPadding {
        ancillas: (n - m % n) % n,
        conv_depth: n,
    })
}
