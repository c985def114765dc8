//! The n-qubit Pauli group with a fixed Hermitian phase convention.
//!
//! A Pauli operator is labeled by a pair of bit vectors `(z, x)`; the
//! represented operator is
//!
//! ```text
//! T_a = i^{-<a_z|a_x>} (x) Z^{a_z[k]} X^{a_x[k]}
//! ```
//!
//! with the inner product taken mod 4. Under this convention every `T_a` is
//! Hermitian with eigenvalues +-1, and products of commuting labels stay in
//! {+1, -1} so signs can be tracked as a single bit.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Maximum qubit count for dense matrix realizations.
pub const MAX_MATRIX_QUBITS: usize = 5;

/// Label `(a_z, a_x)` of a Pauli operator on `n` qubits, packed into machine
/// words (qubit `k` lives at bit `k`). The zero label is the identity.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliLabel {
    n: u8,
    z: u64,
    x: u64,
}

impl PauliLabel {
    pub fn new(n: usize, z: u64, x: u64) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::Range(format!("unsupported qubit count {n}")));
        }
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        if z & !mask != 0 || x & !mask != 0 {
            return Err(Error::Domain(format!(
                "label bits exceed {n} qubits: z={z:#x} x={x:#x}"
            )));
        }
        Ok(PauliLabel { n: n as u8, z, x })
    }

    pub fn zero(n: usize) -> Self {
        PauliLabel { n: n as u8, z: 0, x: 0 }
    }

    /// Single-qubit generator at `qubit`: `kind` is one of 'X', 'Y', 'Z'.
    pub fn single(n: usize, qubit: usize, kind: char) -> Result<Self> {
        if qubit >= n {
            return Err(Error::Domain(format!("qubit {qubit} out of range for n={n}")));
        }
        let bit = 1u64 << qubit;
        let (z, x) = match kind {
            'X' => (0, bit),
            'Y' => (bit, bit),
            'Z' => (bit, 0),
            other => return Err(Error::Domain(format!("unknown Pauli kind {other:?}"))),
        };
        PauliLabel::new(n, z, x)
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn is_zero(&self) -> bool {
        self.z == 0 && self.x == 0
    }

    /// Position of this label in the canonical coordinate order `(z << n) | x`.
    pub fn index(&self) -> usize {
        ((self.z as usize) << self.n) | self.x as usize
    }

    pub fn from_index(n: usize, idx: usize) -> Result<Self> {
        let mask = (1usize << n) - 1;
        PauliLabel::new(n, (idx >> n) as u64, (idx & mask) as u64)
    }

    /// Group addition on labels (product of the underlying operators up to
    /// phase).
    pub fn xor(&self, other: &PauliLabel) -> PauliLabel {
        debug_assert_eq!(self.n, other.n);
        PauliLabel { n: self.n, z: self.z ^ other.z, x: self.x ^ other.x }
    }

    /// Tensor product placement: `self` on the low qubits, `other` above.
    pub fn tensor(&self, other: &PauliLabel) -> Result<PauliLabel> {
        let n = self.n() + other.n();
        PauliLabel::new(
            n,
            self.z | (other.z << self.n),
            self.x | (other.x << self.n),
        )
    }

    /// Restrict to the low `m` qubits; the caller must know the upper part is
    /// trivial in its context.
    pub fn truncate(&self, m: usize) -> Result<PauliLabel> {
        let mask = (1u64 << m) - 1;
        PauliLabel::new(m, self.z & mask, self.x & mask)
    }
}

impl fmt::Debug for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PauliLabel {
    /// Pauli string with qubit 0 leftmost, e.g. `XIZ`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.n() {
            let z = (self.z >> k) & 1;
            let x = (self.x >> k) & 1;
            let c = match (z, x) {
                (0, 0) => 'I',
                (0, 1) => 'X',
                (1, 1) => 'Y',
                (1, 0) => 'Z',
                _ => unreachable!(),
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Wire format for labels: hex-packed `(a_z, a_x)` pair.
#[derive(Serialize, Deserialize)]
struct LabelWire {
    n: usize,
    z: String,
    x: String,
}

impl Serialize for PauliLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LabelWire { n: self.n(), z: format!("{:x}", self.z), x: format!("{:x}", self.x) }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PauliLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = LabelWire::deserialize(d)?;
        let z = u64::from_str_radix(&wire.z, 16).map_err(serde::de::Error::custom)?;
        let x = u64::from_str_radix(&wire.x, 16).map_err(serde::de::Error::custom)?;
        PauliLabel::new(wire.n, z, x).map_err(serde::de::Error::custom)
    }
}

/// `(-1)^sign T_label`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedPauli {
    pub sign: u8,
    pub label: PauliLabel,
}

impl SignedPauli {
    pub fn positive(label: PauliLabel) -> Self {
        SignedPauli { sign: 0, label }
    }

    pub fn new(sign: u8, label: PauliLabel) -> Self {
        debug_assert!(sign <= 1);
        SignedPauli { sign: sign & 1, label }
    }
}

impl fmt::Debug for SignedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.sign == 1 { '-' } else { '+' }, self.label)
    }
}

/// Symplectic form `<a_z|b_x> + <a_x|b_z> mod 2`; zero iff `T_a` and `T_b`
/// commute.
pub fn symplectic_form(a: &PauliLabel, b: &PauliLabel) -> Result<u8> {
    if a.n != b.n {
        return Err(Error::Domain(format!(
            "label length mismatch: {} vs {}",
            a.n, b.n
        )));
    }
    Ok(symplectic_form_unchecked(a, b))
}

#[inline]
pub fn symplectic_form_unchecked(a: &PauliLabel, b: &PauliLabel) -> u8 {
    (((a.z & b.x).count_ones() + (a.x & b.z).count_ones()) & 1) as u8
}

/// `T_a T_b = i^phi T_{a xor b}`; returns `(a xor b, phi mod 4)`.
#[inline]
pub fn label_product(a: &PauliLabel, b: &PauliLabel) -> (PauliLabel, u8) {
    debug_assert_eq!(a.n, b.n);
    let c = a.xor(b);
    let phi = (c.z & c.x).count_ones() as i32 - (a.z & a.x).count_ones() as i32
        - (b.z & b.x).count_ones() as i32
        + 2 * (a.x & b.z).count_ones() as i32;
    (c, phi.rem_euclid(4) as u8)
}

/// Product of two signed Paulis.
///
/// Returns the combined operator and a flag that is true when the product
/// phase is real. For commuting inputs the flag is always true and the result
/// satisfies `T_a T_b = +-T_c`. For anticommuting inputs the phase is
/// imaginary: the result then encodes `i^(1 + 2 sign) T_c`.
pub fn pauli_product(a: &SignedPauli, b: &SignedPauli) -> Result<(SignedPauli, bool)> {
    if a.label.n != b.label.n {
        return Err(Error::Domain("pauli product length mismatch".into()));
    }
    let (c, phi) = label_product(&a.label, &b.label);
    let total = (phi + 2 * (a.sign + b.sign)) % 4;
    if total % 2 == 0 {
        Ok((SignedPauli::new(total / 2, c), true))
    } else {
        Ok((SignedPauli::new((total - 1) / 2, c), false))
    }
}

/// Product of two commuting signed Paulis; internal error if they do not
/// commute.
pub fn commuting_product(a: &SignedPauli, b: &SignedPauli) -> Result<SignedPauli> {
    let (p, real) = pauli_product(a, b)?;
    if !real {
        return Err(Error::Internal(format!(
            "product of {a:?} and {b:?} has imaginary phase"
        )));
    }
    Ok(p)
}

const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense matrix of a signed Pauli (oracle scale only).
pub fn pauli_matrix(p: &SignedPauli) -> Result<DMatrix<Complex64>> {
    let n = p.label.n();
    if n > MAX_MATRIX_QUBITS {
        return Err(Error::Range(format!(
            "dense matrices limited to {MAX_MATRIX_QUBITS} qubits, got {n}"
        )));
    }
    // i^{-<z|x>}, with an extra -1 for the sign bit
    let k = ((p.label.z & p.label.x).count_ones() % 4) as usize;
    let phases = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    let mut phase = phases[k];
    if p.sign == 1 {
        phase = -phase;
    }
    let mut m = DMatrix::from_element(1, 1, phase);
    // Tensor factors ordered so qubit 0 is the most significant index block,
    // matching the string rendering `q0 q1 ...`.
    for k in 0..n {
        let z = (p.label.z >> k) & 1 == 1;
        let x = (p.label.x >> k) & 1 == 1;
        let factor = match (z, x) {
            (false, false) => DMatrix::from_row_slice(2, 2, &[C_ONE, C_ZERO, C_ZERO, C_ONE]),
            (false, true) => DMatrix::from_row_slice(2, 2, &[C_ZERO, C_ONE, C_ONE, C_ZERO]),
            (true, false) => DMatrix::from_row_slice(2, 2, &[C_ONE, C_ZERO, C_ZERO, -C_ONE]),
            // Z X = [[0, 1], [-1, 0]]
            (true, true) => DMatrix::from_row_slice(2, 2, &[C_ZERO, C_ONE, -C_ONE, C_ZERO]),
        };
        m = m.kronecker(&factor);
    }
    Ok(m)
}
