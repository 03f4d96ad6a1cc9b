use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QcnnError, Result};

use super::kernel::{dagger, matmul, ZERO};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Id,
    X,
    Sx,
    Ry,
    Rz,
    U3,
    Cx,
    Cry,
    Crz,
}

impl GateKind {
    pub const ALL: [GateKind; 9] = [
        GateKind::Id,
        GateKind::X,
        GateKind::Sx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::U3,
        GateKind::Cx,
        GateKind::Cry,
        GateKind::Crz,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Cx | GateKind::Cry | GateKind::Crz => 2,
            _ => 1,
        }
    }

    pub fn num_params(self) -> usize {
        match self {
            GateKind::Ry | GateKind::Rz | GateKind::Cry | GateKind::Crz => 1,
            GateKind::U3 => 3,
            GateKind::Id | GateKind::X | GateKind::Sx | GateKind::Cx => 0,
        }
    }

    /// Members of the hardware basis `{ID, RZ, SX, X, U3, CX}`.
    pub fn is_basis(self) -> bool {
        matches!(
            self,
            GateKind::Id | GateKind::Rz | GateKind::Sx | GateKind::X | GateKind::U3 | GateKind::Cx
        )
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GateKind::Id => "ID",
            GateKind::X => "X",
            GateKind::Sx => "SX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::U3 => "U3",
            GateKind::Cx => "CX",
            GateKind::Cry => "CRY",
            GateKind::Crz => "CRZ",
        };
        f.write_str(s)
    }
}

/// A dense gate matrix, row-major. For two-qubit gates the first wire is the
/// most significant local bit (the control for `CX`, `CRY`, `CRZ`).
#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix {
    pub kind: GateKind,
    entries: Vec<Complex64>,
}

impl GateMatrix {
    pub fn arity(&self) -> usize {
        self.kind.arity()
    }

    pub fn dim(&self) -> usize {
        1 << self.arity()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    pub fn dagger(&self) -> Vec<Complex64> {
        dagger(&self.entries, self.dim())
    }

    /// Max entrywise deviation of `U^dagger U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim();
        let prod = matmul(&self.dagger(), &self.entries, d);
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                let target = if r == c { ONE } else { ZERO };
                worst = worst.max((prod[r * d + c] - target).norm());
            }
        }
        worst
    }
}

fn check_count(kind: GateKind, params: &[f64]) -> Result<()> {
    if params.len() != kind.num_params() {
        return Err(QcnnError::arg(format!(
            "{kind} takes {} parameter(s), got {}",
            kind.num_params(),
            params.len()
        )));
    }
    Ok(())
}

fn ry(theta: f64) -> [Complex64; 4] {
    let (s, c) = (theta / 2.0).sin_cos();
    [c.into(), (-s).into(), s.into(), c.into()]
}

fn rz(lambda: f64) -> [Complex64; 4] {
    [
        Complex64::from_polar(1.0, -lambda / 2.0),
        ZERO,
        ZERO,
        Complex64::from_polar(1.0, lambda / 2.0),
    ]
}

fn u3(theta: f64, phi: f64, lambda: f64) -> [Complex64; 4] {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        c.into(),
        -Complex64::from_polar(s, lambda),
        Complex64::from_polar(s, phi),
        Complex64::from_polar(c, phi + lambda),
    ]
}

/// `|0><0| (x) I + |1><1| (x) U`.
fn controlled(u: &[Complex64; 4]) -> Vec<Complex64> {
    let mut m = vec![ZERO; 16];
    m[0] = ONE;
    m[5] = ONE;
    m[10] = u[0];
    m[11] = u[1];
    m[14] = u[2];
    m[15] = u[3];
    m
}

const X_MAT: [Complex64; 4] = [ZERO, ONE, ONE, ZERO];

/// Builds the matrix of `kind` at the given angles (radians).
pub fn build_gate(kind: GateKind, params: &[f64]) -> Result<GateMatrix> {
    check_count(kind, params)?;
    let entries = match kind {
        GateKind::Id => vec![ONE, ZERO, ZERO, ONE],
        GateKind::X => X_MAT.to_vec(),
        GateKind::Sx => {
            let a = Complex64::new(0.5, 0.5);
            let b = Complex64::new(0.5, -0.5);
            vec![a, b, b, a]
        }
        GateKind::Ry => ry(params[0]).to_vec(),
        GateKind::Rz => rz(params[0]).to_vec(),
        GateKind::U3 => u3(params[0], params[1], params[2]).to_vec(),
        GateKind::Cx => controlled(&X_MAT),
        GateKind::Cry => controlled(&ry(params[0])),
        GateKind::Crz => controlled(&rz(params[0])),
    };
    Ok(GateMatrix { kind, entries })
}

/// Partial derivative of the gate matrix with respect to parameter `index`.
pub fn gate_derivative(kind: GateKind, params: &[f64], index: usize) -> Result<GateMatrix> {
    check_count(kind, params)?;
    if index >= params.len() {
        return Err(QcnnError::arg(format!("{kind} has no parameter {index}")));
    }
    let d_ry = |t: f64| {
        let (s, c) = (t / 2.0).sin_cos();
        [(-s / 2.0).into(), (-c / 2.0).into(), (c / 2.0).into(), (-s / 2.0).into()]
    };
    let d_rz = |l: f64| {
        [
            -I * 0.5 * Complex64::from_polar(1.0, -l / 2.0),
            ZERO,
            ZERO,
            I * 0.5 * Complex64::from_polar(1.0, l / 2.0),
        ]
    };
    let lift = |u: [Complex64; 4]| {
        let mut m = vec![ZERO; 16];
        m[10] = u[0];
        m[11] = u[1];
        m[14] = u[2];
        m[15] = u[3];
        m
    };
    let entries = match kind {
        GateKind::Ry => d_ry(params[0]).to_vec(),
        GateKind::Rz => d_rz(params[0]).to_vec(),
        GateKind::Cry => lift(d_ry(params[0])),
        GateKind::Crz => lift(d_rz(params[0])),
        GateKind::U3 => {
            let (theta, phi, lambda) = (params[0], params[1], params[2]);
            let (s, c) = (theta / 2.0).sin_cos();
            match index {
                0 => vec![
                    (-s / 2.0).into(),
                    -Complex64::from_polar(c / 2.0, lambda),
                    Complex64::from_polar(c / 2.0, phi),
                    -Complex64::from_polar(s / 2.0, phi + lambda),
                ],
                1 => vec![
                    ZERO,
                    ZERO,
                    I * Complex64::from_polar(s, phi),
                    I * Complex64::from_polar(c, phi + lambda),
                ],
                _ => vec![
                    ZERO,
                    -I * Complex64::from_polar(s, lambda),
                    ZERO,
                    I * Complex64::from_polar(c, phi + lambda),
                ],
            }
        }
        GateKind::Id | GateKind::X | GateKind::Sx | GateKind::Cx => unreachable!("checked above"),
    };
    Ok(GateMatrix { kind, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rx(t: f64) -> Vec<Complex64> {
        let (s, c) = (t / 2.0).sin_cos();
        vec![c.into(), -I * s, -I * s, c.into()]
    }

    /// `|<A, B>| / d == 1` iff `A = e^{i phi} B` for unitaries.
    fn equal_up_to_phase(a: &[Complex64], b: &[Complex64], d: usize) -> bool {
        let overlap: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        (overlap.norm() / d as f64 - 1.0).abs() < 1e-12
    }

    #[test]
    fn ry_zero_is_identity() {
        let g = build_gate(GateKind::Ry, &[0.0]).unwrap();
        assert_eq!(g.entries(), build_gate(GateKind::Id, &[]).unwrap().entries());
    }

    #[test]
    fn u3_matches_euler_product() {
        for &(t, p, l) in &[(0.3, 1.1, -0.7), (2.5, -2.0, 0.4), (PI, 0.0, PI / 3.0)] {
            let lhs = build_gate(GateKind::U3, &[t, p, l]).unwrap();
            let rz = |a: f64| build_gate(GateKind::Rz, &[a]).unwrap().entries().to_vec();
            // R_z(phi) R_x(-pi/2) R_z(theta) R_x(pi/2) R_z(lambda)
            let mut prod = rz(p);
            for m in [rx(-PI / 2.0), rz(t), rx(PI / 2.0), rz(l)] {
                prod = matmul(&prod, &m, 2);
            }
            assert!(equal_up_to_phase(lhs.entries(), &prod, 2), "theta={t} phi={p} lambda={l}");
        }
    }

    #[test]
    fn sx_squared_is_x() {
        let sx = build_gate(GateKind::Sx, &[]).unwrap();
        let sq = matmul(sx.entries(), sx.entries(), 2);
        assert!(equal_up_to_phase(&sq, &X_MAT, 2));
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        assert!(build_gate(GateKind::Ry, &[]).is_err());
        assert!(build_gate(GateKind::U3, &[0.1, 0.2]).is_err());
        assert!(build_gate(GateKind::Cx, &[0.1]).is_err());
    }

    #[test]
    fn controlled_gates_follow_block_form() {
        let u = build_gate(GateKind::Ry, &[0.9]).unwrap();
        let cu = build_gate(GateKind::Cry, &[0.9]).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expected = match (r >= 2, c >= 2) {
                    (false, false) => if r == c { ONE } else { ZERO },
                    (true, true) => u.get(r - 2, c - 2),
                    _ => ZERO,
                };
                assert_eq!(cu.get(r, c), expected);
            }
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-6;
        for kind in GateKind::ALL.iter().copied().filter(|k| k.num_params() > 0) {
            let base: Vec<f64> = [0.37, -1.2, 2.1][..kind.num_params()].to_vec();
            for idx in 0..base.len() {
                let mut plus = base.clone();
                let mut minus = base.clone();
                plus[idx] += h;
                minus[idx] -= h;
                let gp = build_gate(kind, &plus).unwrap();
                let gm = build_gate(kind, &minus).unwrap();
                let d = gate_derivative(kind, &base, idx).unwrap();
                for (k, e) in d.entries().iter().enumerate() {
                    let fd = (gp.entries()[k] - gm.entries()[k]) / (2.0 * h);
                    assert!((fd - e).norm() < 1e-8, "{kind} param {idx}");
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn every_gate_is_unitary(a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0) {
            for kind in GateKind::ALL {
                let params = &[a, b, c][..kind.num_params()];
                let g = build_gate(kind, params).unwrap();
                proptest::prop_assert!(g.unitarity_error() < 1e-12, "{}", kind);
            }
        }
    }
}
