//! Unit-trace Hermitian operators as sparse coefficient vectors over the
//! Pauli basis: `X = sum_a c_a T_a` with `c_0 = 2^{-n}` fixing the trace.
//!
//! Coefficients live in Q(sqrt 2), which is closed under every operation the
//! simulator performs on the magic input state.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::clifford::CliffordTableau;
use crate::error::{Error, Result};
use crate::pauli::{pauli_matrix, PauliLabel, SignedPauli};
use crate::scalar::{ratio, QSqrt2, Rational};

/// Sparse Pauli-basis coefficient vector of a unit-trace Hermitian operator.
/// Absent labels mean zero; the identity coefficient is always `2^{-n}`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HermOp {
    n: usize,
    coeffs: BTreeMap<PauliLabel, QSqrt2>,
}

impl HermOp {
    /// Build from a coefficient map, dropping explicit zeros. The identity
    /// coefficient must encode unit trace.
    pub fn from_coeffs(n: usize, mut coeffs: BTreeMap<PauliLabel, QSqrt2>) -> Result<Self> {
        coeffs.retain(|_, v| !v.is_zero());
        for label in coeffs.keys() {
            if label.n() != n {
                return Err(Error::Domain("coefficient label length mismatch".into()));
            }
        }
        let expected = QSqrt2::from_rational(ratio(1, 1 << n));
        match coeffs.get(&PauliLabel::zero(n)) {
            Some(c0) if *c0 == expected => {}
            other => {
                return Err(Error::Domain(format!(
                    "identity coefficient must be 2^-n for unit trace, got {other:?}"
                )))
            }
        }
        Ok(HermOp { n, coeffs })
    }

    /// The maximally mixed state `I / 2^n`.
    pub fn maximally_mixed(n: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(
            PauliLabel::zero(n),
            QSqrt2::from_rational(ratio(1, 1 << n)),
        );
        HermOp { n, coeffs }
    }

    /// Single-qubit magic state `|H><H| = (I + (X + Z)/sqrt 2) / 2`.
    pub fn magic_h() -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(PauliLabel::zero(1), QSqrt2::from_ratio(1, 2));
        let quarter_sqrt2 = QSqrt2::sqrt2_times(ratio(1, 4));
        coeffs.insert(PauliLabel::single(1, 0, 'X').unwrap(), quarter_sqrt2.clone());
        coeffs.insert(PauliLabel::single(1, 0, 'Z').unwrap(), quarter_sqrt2);
        HermOp { n: 1, coeffs }
    }

    /// Single-qubit state with the given rational Bloch vector; the vector
    /// must lie in the closed unit ball.
    pub fn from_bloch(x: Rational, y: Rational, z: Rational) -> Result<Self> {
        let norm2 = &x * &x + &y * &y + &z * &z;
        if norm2 > Rational::from_integer(1.into()) {
            return Err(Error::Domain(format!(
                "Bloch vector outside the unit ball: |r|^2 = {norm2}"
            )));
        }
        let mut coeffs = BTreeMap::new();
        coeffs.insert(PauliLabel::zero(1), QSqrt2::from_ratio(1, 2));
        for (kind, value) in [('X', x), ('Y', y), ('Z', z)] {
            let half = QSqrt2::from_rational(value / Rational::from_integer(2.into()));
            if !half.is_zero() {
                coeffs.insert(PauliLabel::single(1, 0, kind).unwrap(), half);
            }
        }
        Ok(HermOp { n: 1, coeffs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeff(&self, label: &PauliLabel) -> QSqrt2 {
        self.coeffs.get(label).cloned().unwrap_or_else(QSqrt2::zero)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&PauliLabel, &QSqrt2)> {
        self.coeffs.iter()
    }

    pub fn support_size(&self) -> usize {
        self.coeffs.len()
    }

    /// Pauli expectation `Tr(T_a X) = 2^n c_a`.
    pub fn expectation(&self, label: &PauliLabel) -> QSqrt2 {
        let scale = QSqrt2::from_int(1i64 << self.n);
        &scale * &self.coeff(label)
    }

    /// Hilbert-Schmidt inner product `Tr(self * other) = 2^n sum c_a d_a`.
    pub fn trace_inner(&self, other: &HermOp) -> Result<QSqrt2> {
        if self.n != other.n {
            return Err(Error::Domain("operator dimension mismatch".into()));
        }
        let mut acc = QSqrt2::zero();
        let (small, large) = if self.coeffs.len() <= other.coeffs.len() {
            (self, other)
        } else {
            (other, self)
        };
        for (label, c) in &small.coeffs {
            if let Some(d) = large.coeffs.get(label) {
                acc += &(c * d);
            }
        }
        Ok(&QSqrt2::from_int(1i64 << self.n) * &acc)
    }

    /// Tensor product; `self` occupies the low qubits.
    pub fn tensor(&self, other: &HermOp) -> Result<HermOp> {
        let n = self.n + other.n;
        if n > 64 {
            return Err(Error::Range("tensor product too large".into()));
        }
        let mut coeffs = BTreeMap::new();
        for (la, ca) in &self.coeffs {
            for (lb, cb) in &other.coeffs {
                coeffs.insert(la.tensor(lb)?, ca * cb);
            }
        }
        Ok(HermOp { n, coeffs })
    }

    /// `n`-fold tensor power.
    pub fn tensor_power(&self, copies: usize) -> Result<HermOp> {
        if copies == 0 {
            return Err(Error::Domain("tensor power needs at least one copy".into()));
        }
        let mut acc = self.clone();
        for _ in 1..copies {
            acc = acc.tensor(self)?;
        }
        Ok(acc)
    }

    /// Append `|0><0|` on a new last qubit.
    pub fn tensor_zero_state(&self) -> Result<HermOp> {
        let mut zero = BTreeMap::new();
        zero.insert(PauliLabel::zero(1), QSqrt2::from_ratio(1, 2));
        zero.insert(PauliLabel::single(1, 0, 'Z').unwrap(), QSqrt2::from_ratio(1, 2));
        self.tensor(&HermOp { n: 1, coeffs: zero })
    }

    /// Conjugate by a Clifford: labels permute, signs flip coefficients.
    pub fn conjugated(&self, g: &CliffordTableau) -> Result<HermOp> {
        if g.n() != self.n {
            return Err(Error::Domain("tableau dimension mismatch".into()));
        }
        let mut coeffs = BTreeMap::new();
        for (label, c) in &self.coeffs {
            let image = g.apply(&SignedPauli::positive(*label));
            let value = if image.sign == 1 { -c } else { c.clone() };
            coeffs.insert(image.label, value);
        }
        Ok(HermOp { n: self.n, coeffs })
    }

    /// Dense coordinate vector of Pauli expectations, indexed by label index;
    /// entry 0 is always 1.
    pub fn to_xi_vector(&self) -> Vec<QSqrt2> {
        let mut xi = vec![QSqrt2::zero(); 1 << (2 * self.n)];
        let scale = QSqrt2::from_int(1i64 << self.n);
        for (label, c) in &self.coeffs {
            xi[label.index()] = &scale * c;
        }
        xi
    }

    /// Rebuild from a dense expectation vector (entry 0 must be 1).
    pub fn from_xi_vector(n: usize, xi: &[QSqrt2]) -> Result<HermOp> {
        if xi.len() != 1 << (2 * n) {
            return Err(Error::Domain("expectation vector length mismatch".into()));
        }
        if xi[0] != QSqrt2::one() {
            return Err(Error::Domain("expectation of the identity must be 1".into()));
        }
        let inv_scale = QSqrt2::from_ratio(1, 1i64 << n);
        let mut coeffs = BTreeMap::new();
        for (idx, v) in xi.iter().enumerate() {
            if !v.is_zero() {
                coeffs.insert(PauliLabel::from_index(n, idx)?, &inv_scale * v);
            }
        }
        Ok(HermOp { n, coeffs })
    }

    /// Stable key used for memoization tables and duplicate detection.
    pub fn canonical_key(&self) -> String {
        use std::fmt::Write;
        let mut key = String::with_capacity(self.coeffs.len() * 16);
        for (label, c) in &self.coeffs {
            let _ = write!(key, "{}:{};", label.index(), c);
        }
        key
    }

    /// Dense matrix realization for cross-checks against the oracle.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        let dim = 1usize << self.n;
        let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for (label, c) in &self.coeffs {
            let f = c.to_f64()?;
            m += pauli_matrix(&SignedPauli::positive(*label))? * Complex64::new(f, 0.0);
        }
        Ok(m)
    }
}

/// JSON form: sorted `(label, exact coefficient)` pairs.
#[derive(Serialize, Deserialize)]
struct HermOpWire {
    n: usize,
    coeffs: Vec<(PauliLabel, QSqrt2)>,
}

impl Serialize for HermOp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HermOpWire {
            n: self.n,
            coeffs: self.coeffs.iter().map(|(l, c)| (*l, c.clone())).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermOp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = HermOpWire::deserialize(d)?;
        HermOp::from_coeffs(wire.n, wire.coeffs.into_iter().collect())
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magic_state_coefficients() {
        let h = HermOp::magic_h();
        assert_eq!(h.coeff(&PauliLabel::zero(1)), QSqrt2::from_ratio(1, 2));
        assert_eq!(
            h.coeff(&PauliLabel::single(1, 0, 'X').unwrap()),
            QSqrt2::sqrt2_times(ratio(1, 4))
        );
        assert!(h.coeff(&PauliLabel::single(1, 0, 'Y').unwrap()).is_zero());
        // dense matrix matches the outer product of cos(pi/8)|0> + sin(pi/8)|1>
        let m = h.to_dense().unwrap();
        let c = (std::f64::consts::PI / 8.0).cos();
        let s = (std::f64::consts::PI / 8.0).sin();
        assert!((m[(0, 0)] - Complex64::new(c * c, 0.0)).norm() < 1e-15);
        assert!((m[(0, 1)] - Complex64::new(c * s, 0.0)).norm() < 1e-15);
        assert!((m[(1, 0)] - Complex64::new(c * s, 0.0)).norm() < 1e-15);
        assert!((m[(1, 1)] - Complex64::new(s * s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn two_copies_have_nine_coefficients() {
        let h2 = HermOp::magic_h().tensor_power(2).unwrap();
        assert_eq!(h2.support_size(), 9);
        assert_eq!(h2.coeff(&PauliLabel::zero(2)), QSqrt2::from_ratio(1, 4));
        // X (x) Z coefficient: (sqrt2/4)^2 = 1/8
        let xz = PauliLabel::new(2, 0b10, 0b01).unwrap();
        assert_eq!(h2.coeff(&xz), QSqrt2::from_ratio(1, 8));
    }

    #[test]
    fn bloch_validation() {
        assert!(HermOp::from_bloch(ratio(0, 1), ratio(0, 1), ratio(1, 1)).is_ok());
        let err = HermOp::from_bloch(ratio(1, 1), ratio(1, 1), ratio(0, 1)).unwrap_err();
        assert_eq!(err.code(), "domain");
    }

    #[test]
    fn bloch_z_is_zero_state() {
        let zplus = HermOp::from_bloch(ratio(0, 1), ratio(0, 1), ratio(1, 1)).unwrap();
        let z = PauliLabel::single(1, 0, 'Z').unwrap();
        assert_eq!(zplus.coeff(&z), QSqrt2::from_ratio(1, 2));
        assert_eq!(zplus.expectation(&z), QSqrt2::one());
    }

    #[test]
    fn trace_inner_matches_dense() {
        let h = HermOp::magic_h();
        let z = HermOp::from_bloch(ratio(0, 1), ratio(0, 1), ratio(1, 1)).unwrap();
        let exact = h.trace_inner(&z).unwrap().to_f64().unwrap();
        let dense = (h.to_dense().unwrap() * z.to_dense().unwrap()).trace();
        assert!((exact - dense.re).abs() < 1e-14);
    }

    #[test]
    fn xi_vector_round_trip() {
        let h2 = HermOp::magic_h().tensor_power(2).unwrap();
        let xi = h2.to_xi_vector();
        assert_eq!(xi[0], QSqrt2::one());
        let back = HermOp::from_xi_vector(2, &xi).unwrap();
        assert_eq!(back, h2);
    }

    #[test]
    fn conjugation_by_hadamard_swaps_x_z() {
        let h = HermOp::magic_h();
        let had = crate::clifford::hadamard(1, 0).unwrap();
        let rotated = h.conjugated(&had).unwrap();
        // |H> is H-invariant
        assert_eq!(rotated, h);
        let zplus = HermOp::from_bloch(ratio(0, 1), ratio(0, 1), ratio(1, 1)).unwrap();
        let xplus = zplus.conjugated(&had).unwrap();
        assert_eq!(
            xplus.coeff(&PauliLabel::single(1, 0, 'X').unwrap()),
            QSqrt2::from_ratio(1, 2)
        );
    }
}
