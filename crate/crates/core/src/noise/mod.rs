//! Hardware noise: depolarizing and thermal-relaxation channels, device
//! profiles, and noisy circuit execution.

mod exec;

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QcnnError, Result};
use crate::simcore::{ChoiMatrix, KrausChannel, SuperOperator};

pub use exec::{noisy_execute, BoundNoisy, NoisyProgram, NoisyRun, Occurrence, ShiftObservables};

/// Planck constant over Boltzmann constant, in kelvin seconds.
const H_OVER_KB: f64 = 6.626_070_15e-34 / 1.380_649e-23;

/// Tolerance for Choi positivity and trace preservation.
pub const CHOI_TOL: f64 = 1e-10;

const DEFAULT_FREQUENCY_HZ: f64 = 5.0e9;

const JAKARTA_JSON: &str = include_str!("../../profiles/ibmq_jakarta.json");

/// Thermal excited-state population `1 / (1 + exp(2hf / (k_B T)))`.
pub fn p_excited(temperature_k: f64, frequency_hz: f64) -> f64 {
    if temperature_k <= 0.0 {
        return 0.0;
    }
    let x = 2.0 * H_OVER_KB * frequency_hz / temperature_k;
    // exp overflows to +inf for huge x, which correctly yields 0
    1.0 / (1.0 + x.exp())
}

fn pauli(index: usize) -> [Complex64; 4] {
    let (o, z, i) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0));
    match index {
        0 => [o, z, z, o],
        1 => [z, o, o, z],
        2 => [z, -i, i, z],
        _ => [o, z, z, -o],
    }
}

/// `rho -> p I/d + (1-p) rho` on one (`num_qubits = 1`) or two qubits, as
/// Pauli Kraus operators. For one qubit this is the three-Pauli form with
/// `p_1 = 3p/4`.
pub fn depolarizing_channel(p: f64, num_qubits: usize) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QcnnError::arg(format!("depolarizing probability {p} outside [0, 1]")));
    }
    let ops = match num_qubits {
        1 => {
            let p1 = 0.75 * p;
            (0..4)
                .map(|k| {
                    let w = if k == 0 { (1.0 - p1).sqrt() } else { (p1 / 3.0).sqrt() };
                    pauli(k).iter().map(|z| z * w).collect()
                })
                .collect()
        }
        2 => (0..16)
            .map(|k| {
                let w = if k == 0 { (1.0 - 15.0 * p / 16.0).sqrt() } else { (p / 16.0).sqrt() };
                let (a, b) = (pauli(k / 4), pauli(k % 4));
                let mut m = Vec::with_capacity(16);
                for r in 0..4 {
                    for c in 0..4 {
                        m.push(a[(r / 2) * 2 + c / 2] * b[(r % 2) * 2 + c % 2] * w);
                    }
                }
                m
            })
            .collect(),
        other => return Err(QcnnError::arg(format!("depolarizing channel on {other} qubits is not supported"))),
    };
    KrausChannel::new(num_qubits, ops)
}

/// Derived quantities of a thermal relaxation of duration `T_g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalRelaxationParams {
    pub eps_t1: f64,
    pub eps_t2: f64,
    pub p_reset: f64,
    pub p_e: f64,
    pub p_z: f64,
    pub p_r0: f64,
    pub p_r1: f64,
    pub p_id: f64,
}

impl ThermalRelaxationParams {
    /// `t1`, `t2` and `gate_time` in the same unit.
    pub fn new(t1: f64, t2: f64, gate_time: f64, p_e: f64) -> Result<Self> {
        if !(t1 > 0.0 && t2 > 0.0 && t1.is_finite() && t2.is_finite()) {
            return Err(QcnnError::arg(format!("T1 and T2 must be positive, got {t1}, {t2}")));
        }
        if !(gate_time >= 0.0 && gate_time.is_finite()) {
            return Err(QcnnError::arg(format!("gate time must be non-negative, got {gate_time}")));
        }
        if !(0.0..=1.0).contains(&p_e) {
            return Err(QcnnError::validation(format!("excited-state population {p_e} outside [0, 1]")));
        }
        let eps_t1 = (-gate_time / t1).exp();
        let eps_t2 = (-gate_time / t2).exp();
        let p_reset = 1.0 - eps_t1;
        let p_z = (1.0 - p_reset) * (1.0 - eps_t2 / eps_t1) / 2.0;
        let p_r0 = (1.0 - p_e) * p_reset;
        let p_r1 = p_e * p_reset;
        let p_id = 1.0 - p_z - p_r0 - p_r1;
        Ok(ThermalRelaxationParams {
            eps_t1,
            eps_t2,
            p_reset,
            p_e,
            p_z,
            p_r0,
            p_r1,
            p_id,
        })
    }
}

/// Thermal relaxation as Kraus operators (`T2 <= T1`) or a Choi matrix
/// (`T2 > T1`).
#[derive(Debug, Clone, PartialEq)]
pub enum RelaxationChannel {
    Kraus(KrausChannel),
    Choi(ChoiMatrix),
}

impl RelaxationChannel {
    pub fn superoperator(&self) -> SuperOperator {
        match self {
            RelaxationChannel::Kraus(k) => k.superoperator(),
            RelaxationChannel::Choi(c) => c.superoperator(),
        }
    }
}

pub fn thermal_relaxation_channel(t1: f64, t2: f64, gate_time: f64, p_e: f64) -> Result<RelaxationChannel> {
    let tr = ThermalRelaxationParams::new(t1, t2, gate_time, p_e)?;
    let c = |x: f64| Complex64::new(x, 0.0);
    let zero = c(0.0);
    if t2 <= t1 {
        for (name, v) in [("p_z", tr.p_z), ("p_r0", tr.p_r0), ("p_r1", tr.p_r1), ("p_id", tr.p_id)] {
            // rounding can leave tiny negatives when the gate time is ~0
            if !(-1e-15..=1.0 + 1e-15).contains(&v) {
                return Err(QcnnError::validation(format!("{name} = {v} outside [0, 1]")));
            }
        }
        let s = |x: f64| x.max(0.0).sqrt();
        let (k0, kz, k0r, k1r) = (s(tr.p_id), s(tr.p_z), s(tr.p_r0), s(tr.p_r1));
        let ops = vec![
            vec![c(k0), zero, zero, c(k0)],
            vec![c(kz), zero, zero, c(-kz)],
            vec![c(k0r), zero, zero, zero],
            vec![zero, c(k0r), zero, zero],
            vec![zero, zero, c(k1r), zero],
            vec![zero, zero, zero, c(k1r)],
        ];
        Ok(RelaxationChannel::Kraus(KrausChannel::new(1, ops)?))
    } else {
        let mut lam = vec![zero; 16];
        lam[0] = c(1.0 - tr.p_e * tr.p_reset);
        lam[3] = c(tr.eps_t2);
        lam[5] = c(tr.p_e * tr.p_reset);
        lam[10] = c((1.0 - tr.p_e) * tr.p_reset);
        lam[12] = c(tr.eps_t2);
        lam[15] = c(1.0 - (1.0 - tr.p_e) * tr.p_reset);
        let choi = ChoiMatrix::new(1, lam)?;
        choi.validate(CHOI_TOL)?;
        Ok(RelaxationChannel::Choi(choi))
    }
}

fn default_frequency() -> f64 {
    DEFAULT_FREQUENCY_HZ
}

fn default_scale() -> f64 {
    1.0
}

/// Average device error rates. Depolarizing probabilities are the affine
/// `p` of `p I/d + (1-p) rho`. `scale` records the multiplier already
/// folded into `p1`, `p2` and both gate lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceNoiseProfile {
    pub p1: f64,
    pub p2: f64,
    pub t_1q_ns: f64,
    pub t_2q_ns: f64,
    #[serde(rename = "T1_us")]
    pub t1_us: f64,
    #[serde(rename = "T2_us")]
    pub t2_us: f64,
    #[serde(rename = "temperature_K")]
    pub temperature_k: f64,
    #[serde(rename = "frequency_Hz", default = "default_frequency")]
    pub frequency_hz: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

impl DeviceNoiseProfile {
    /// Average error rates of the IBMQ Jakarta device.
    pub fn ibmq_jakarta() -> Self {
        serde_json::from_str(JAKARTA_JSON).expect("bundled profile parses")
    }

    /// No noise at all: every channel is the identity.
    pub fn noiseless() -> Self {
        DeviceNoiseProfile {
            p1: 0.0,
            p2: 0.0,
            t_1q_ns: 0.0,
            t_2q_ns: 0.0,
            ..Self::ibmq_jakarta()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let profile: DeviceNoiseProfile =
            serde_json::from_str(text).map_err(|e| QcnnError::validation(format!("noise profile: {e}")))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, v: f64, why: &str| Err(QcnnError::validation(format!("noise profile field {field} = {v}: {why}")));
        for (field, v) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(field, v, "must lie in [0, 1]");
            }
        }
        for (field, v) in [("t_1q_ns", self.t_1q_ns), ("t_2q_ns", self.t_2q_ns), ("temperature_K", self.temperature_k)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(field, v, "must be finite and non-negative");
            }
        }
        for (field, v) in [("T1_us", self.t1_us), ("T2_us", self.t2_us), ("frequency_Hz", self.frequency_hz)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(field, v, "must be finite and positive");
            }
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad("scale", self.scale, "must be finite and positive");
        }
        Ok(())
    }

    pub fn p_excited(&self) -> f64 {
        p_excited(self.temperature_k, self.frequency_hz)
    }

    /// Relaxation over `duration_ns` nanoseconds.
    pub fn relaxation(&self, duration_ns: f64) -> Result<RelaxationChannel> {
        thermal_relaxation_channel(self.t1_us * 1e3, self.t2_us * 1e3, duration_ns, self.p_excited())
    }
}

pub fn load_profile(path: &Path) -> Result<DeviceNoiseProfile> {
    let text = std::fs::read_to_string(path).map_err(|e| QcnnError::io(path, e))?;
    DeviceNoiseProfile::from_json(&text)
}

/// Multiplies the depolarizing probabilities and gate lengths by `k >= 1`.
pub fn scale_profile(profile: &DeviceNoiseProfile, k: f64) -> Result<DeviceNoiseProfile> {
    if !(k >= 1.0 && k.is_finite()) {
        return Err(QcnnError::arg(format!("noise scale must be >= 1, got {k}")));
    }
    let scaled = DeviceNoiseProfile {
        p1: profile.p1 * k,
        p2: profile.p2 * k,
        t_1q_ns: profile.t_1q_ns * k,
        t_2q_ns: profile.t_2q_ns * k,
        scale: profile.scale * k,
        ..profile.clone()
    };
    scaled.validate()?;
    Ok(scaled)
}
