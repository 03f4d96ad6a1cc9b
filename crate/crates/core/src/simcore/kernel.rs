//! Flat-buffer kernels shared by the pure- and mixed-state engines.
//!
//! Every kernel treats its buffer as a vector over `bits` qubits in
//! big-endian order: wire 0 is the most significant bit of the index.  A
//! density matrix over `n` qubits stored row-major is such a vector over
//! `2n` bits, with row wire `w` at position `w` and column wire `w` at
//! position `n + w`.

use num_complex::Complex64;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
fn bit_of(bits: usize, wire: usize) -> usize {
    bits - 1 - wire
}

/// Offsets of every local basis index of `wires` inside the full index.
/// Local index bit `k-1-j` (MSB first) addresses `wires[j]`.
pub(crate) fn local_offsets(bits: usize, wires: &[usize]) -> Vec<usize> {
    let k = wires.len();
    (0..1usize << k)
        .map(|local| {
            wires.iter().enumerate().fold(0usize, |acc, (j, &w)| {
                if (local >> (k - 1 - j)) & 1 == 1 {
                    acc | (1 << bit_of(bits, w))
                } else {
                    acc
                }
            })
        })
        .collect()
}

/// Enumerates all full indices whose bits at `wires` are zero.
pub(crate) fn block_bases(bits: usize, wires: &[usize]) -> Vec<usize> {
    let mut positions: Vec<usize> = wires.iter().map(|&w| bit_of(bits, w)).collect();
    positions.sort_unstable();
    let free = bits - wires.len();
    (0..1usize << free)
        .map(|mut x| {
            for &p in &positions {
                let low = x & ((1 << p) - 1);
                x = ((x >> p) << (p + 1)) | low;
            }
            x
        })
        .collect()
}

/// `v <- M v` restricted to `wires`, `M` a dense row-major `2^k x 2^k` matrix.
pub(crate) fn apply_matrix(v: &mut [Complex64], bits: usize, m: &[Complex64], wires: &[usize]) {
    debug_assert_eq!(v.len(), 1 << bits);
    match wires.len() {
        1 => apply_1q(v, bits, m, wires[0]),
        _ => apply_general(v, bits, m, wires),
    }
}

fn apply_1q(v: &mut [Complex64], bits: usize, m: &[Complex64], wire: usize) {
    let stride = 1usize << bit_of(bits, wire);
    let (m00, m01, m10, m11) = (m[0], m[1], m[2], m[3]);
    let len = v.len();
    let mut block = 0;
    while block < len {
        for i in block..block + stride {
            let a = v[i];
            let b = v[i + stride];
            v[i] = m00 * a + m01 * b;
            v[i + stride] = m10 * a + m11 * b;
        }
        block += stride << 1;
    }
}

fn apply_general(v: &mut [Complex64], bits: usize, m: &[Complex64], wires: &[usize]) {
    let offsets = local_offsets(bits, wires);
    let d = offsets.len();
    debug_assert_eq!(m.len(), d * d);
    let mut buf = vec![ZERO; d];
    for base in block_bases(bits, wires) {
        for (slot, &off) in buf.iter_mut().zip(&offsets) {
            *slot = v[base | off];
        }
        for (row, &off) in offsets.iter().enumerate() {
            let coeffs = &m[row * d..(row + 1) * d];
            v[base | off] = coeffs.iter().zip(&buf).map(|(c, x)| c * x).sum();
        }
    }
}

pub(crate) fn conj_matrix(m: &[Complex64]) -> Vec<Complex64> {
    m.iter().map(|z| z.conj()).collect()
}

pub(crate) fn transpose(m: &[Complex64], d: usize) -> Vec<Complex64> {
    let mut t = vec![ZERO; d * d];
    for r in 0..d {
        for c in 0..d {
            t[c * d + r] = m[r * d + c];
        }
    }
    t
}

pub(crate) fn dagger(m: &[Complex64], d: usize) -> Vec<Complex64> {
    conj_matrix(&transpose(m, d))
}

pub(crate) fn matmul(a: &[Complex64], b: &[Complex64], d: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; d * d];
    for r in 0..d {
        for k in 0..d {
            let x = a[r * d + k];
            if x == ZERO {
                continue;
            }
            for c in 0..d {
                out[r * d + c] += x * b[k * d + c];
            }
        }
    }
    out
}

/// `rho <- A rho B^dagger` on the density matrix `rho` over `n` qubits.
/// Passing `conj_b = conj(B)` avoids recomputing it per call.
pub(crate) fn sandwich(rho: &mut [Complex64], n: usize, a: &[Complex64], conj_b: &[Complex64], wires: &[usize]) {
    apply_matrix(rho, 2 * n, a, wires);
    let cols: Vec<usize> = wires.iter().map(|&w| n + w).collect();
    apply_matrix(rho, 2 * n, conj_b, &cols);
}

/// Applies a superoperator (row-major `4^k x 4^k`, acting on the vectorised
/// local block `(row_local, col_local)`) to `rho` on `wires`.
pub(crate) fn apply_superop(rho: &mut [Complex64], n: usize, sop: &[Complex64], wires: &[usize]) {
    let mut all: Vec<usize> = wires.to_vec();
    all.extend(wires.iter().map(|&w| n + w));
    apply_matrix(rho, 2 * n, sop, &all);
}

/// Reduced matrix after tracing out `traced` (sorted or not) from a
/// `2^n x 2^n` matrix.
pub(crate) fn partial_trace(rho: &[Complex64], n: usize, traced: &[usize]) -> Vec<Complex64> {
    let kept: Vec<usize> = (0..n).filter(|w| !traced.contains(w)).collect();
    let kept_idx = local_offsets(n, &kept);
    let traced_idx = local_offsets(n, traced);
    let dim = 1usize << n;
    let dk = kept_idx.len();
    let mut out = vec![ZERO; dk * dk];
    for (r, &kr) in kept_idx.iter().enumerate() {
        for (c, &kc) in kept_idx.iter().enumerate() {
            out[r * dk + c] = traced_idx
                .iter()
                .map(|&t| rho[(kr | t) * dim + (kc | t)])
                .sum();
        }
    }
    out
}

/// Adjoint of [`partial_trace`]: `O -> O (x) I` with the identity placed on
/// wire `inserted` of the enlarged `(n+1)`-qubit register.
pub(crate) fn embed_identity(op: &[Complex64], n: usize, inserted: usize) -> Vec<Complex64> {
    let big = n + 1;
    let kept: Vec<usize> = (0..big).filter(|&w| w != inserted).collect();
    let kept_idx = local_offsets(big, &kept);
    let t = 1usize << bit_of(big, inserted);
    let dim = 1usize << big;
    let dk = 1usize << n;
    let mut out = vec![ZERO; dim * dim];
    for (r, &kr) in kept_idx.iter().enumerate() {
        for (c, &kc) in kept_idx.iter().enumerate() {
            let x = op[r * dk + c];
            out[kr * dim + kc] = x;
            out[(kr | t) * dim + (kc | t)] = x;
        }
    }
    out
}

/// `<Z_wire>` of a density matrix: signed sum of its diagonal.
pub(crate) fn z_expectation_diag(rho: &[Complex64], n: usize, wire: usize) -> Complex64 {
    let dim = 1usize << n;
    let mask = 1usize << bit_of(n, wire);
    (0..dim)
        .map(|i| {
            let d = rho[i * dim + i];
            if i & mask == 0 {
                d
            } else {
                -d
            }
        })
        .sum()
}

/// `Tr(A B)` for two `dim x dim` row-major matrices.
pub(crate) fn trace_product(a: &[Complex64], b: &[Complex64], dim: usize) -> Complex64 {
    let mut acc = ZERO;
    for r in 0..dim {
        for c in 0..dim {
            acc += a[r * dim + c] * b[c * dim + r];
        }
    }
    acc
}
