//! Pure stabilizer states: canonical enumeration, projector expansion in the
//! Pauli basis, and counting formulas.
//!
//! A pure n-qubit stabilizer state is a maximal isotropic subspace of the
//! label space (a Lagrangian, enumerated once per subspace via a row-reduced
//! canonical basis) together with a sign bit per canonical generator. The
//! projector onto the state expands as the normalized sum of its 2^n signed
//! group elements, which is exactly one facet functional of the polytope.

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::herm::HermOp;
use crate::pauli::{commuting_product, symplectic_form_unchecked, PauliLabel, SignedPauli};
use crate::scalar::{ratio, QSqrt2};

/// Hard ceiling for enumeration; the facet count grows as
/// `2^n prod (2^k + 1)` and n = 4 (36720 states) is the largest the
/// simulator ever needs.
pub const MAX_ENUM_QUBITS: usize = 4;

/// A stabilizer group given by `n` independent, pairwise commuting signed
/// generators in canonical (row-reduced) form.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct StabilizerGroupSpec {
    pub generators: Vec<SignedPauli>,
}

impl StabilizerGroupSpec {
    pub fn new(generators: Vec<SignedPauli>) -> Result<Self> {
        let spec = StabilizerGroupSpec { generators };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.generators.first().map(|g| g.label.n()).unwrap_or(0)
    }

    /// Check independence and pairwise commutation of the generator labels.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.generators.len() != n {
            return Err(Error::Domain(format!(
                "expected {n} generators, got {}",
                self.generators.len()
            )));
        }
        for (i, a) in self.generators.iter().enumerate() {
            if a.label.n() != n {
                return Err(Error::Domain("generator length mismatch".into()));
            }
            for b in self.generators.iter().skip(i + 1) {
                if symplectic_form_unchecked(&a.label, &b.label) != 0 {
                    return Err(Error::Domain(format!(
                        "generators {:?} and {:?} anticommute",
                        a, b
                    )));
                }
            }
        }
        // Independence over GF(2) via elimination on packed vectors.
        let mut basis: Vec<u128> = Vec::new();
        for g in &self.generators {
            let mut v = pack(&g.label);
            for b in &basis {
                v = v.min(v ^ b);
            }
            if v == 0 {
                return Err(Error::Domain("generators are linearly dependent".into()));
            }
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
        Ok(())
    }

    /// All 2^n signed group elements, ordered by generator-subset index.
    /// Products of commuting Hermitian Paulis stay real, so every element is
    /// a plain signed Pauli.
    pub fn elements(&self) -> Result<Vec<SignedPauli>> {
        let n = self.n();
        let mut out = Vec::with_capacity(1 << n);
        for mask in 0..(1u32 << n) {
            let mut acc = SignedPauli::positive(PauliLabel::zero(n));
            for (k, g) in self.generators.iter().enumerate() {
                if (mask >> k) & 1 == 1 {
                    acc = commuting_product(&acc, g)?;
                }
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Coefficient vector of the rank-1 projector onto the stabilizer state:
    /// `2^{-n}` times the sum of all group elements.
    pub fn projector(&self) -> Result<HermOp> {
        let n = self.n();
        let w = ratio(1, 1 << n);
        let mut coeffs = std::collections::BTreeMap::new();
        for el in self.elements()? {
            let value = if el.sign == 1 { -w.clone() } else { w.clone() };
            if coeffs.insert(el.label, QSqrt2::from_rational(value)).is_some() {
                return Err(Error::Domain("stabilizer group element repeated".into()));
            }
        }
        HermOp::from_coeffs(n, coeffs)
    }
}

fn pack(l: &PauliLabel) -> u128 {
    // Row-reduction order: z bits above x bits, highest qubit most
    // significant, so pivots prefer high-qubit Z components.
    (l.x_bits() as u128) | ((l.z_bits() as u128) << l.n())
}

fn unpack(n: usize, v: u128) -> PauliLabel {
    let mask = (1u128 << n) - 1;
    PauliLabel::new(n, ((v >> n) & mask) as u64, (v & mask) as u64).unwrap()
}

/// Row-reduce a set of packed GF(2) vectors to the canonical basis (echelon
/// form with distinct leading bits, fully reduced, sorted descending).
fn reduced_basis(vectors: &[u128]) -> Vec<u128> {
    // The min-trick reduction is only valid scanning leads high to low, so the
    // working basis stays sorted descending.
    let mut basis: Vec<u128> = Vec::new();
    for &v in vectors {
        let mut w = v;
        for b in &basis {
            w = w.min(w ^ b);
        }
        if w != 0 {
            basis.push(w);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    // Back-substitute so each leading bit appears in exactly one row.
    basis.sort_unstable_by(|a, b| b.cmp(a));
    for i in (0..basis.len()).rev() {
        let lead = 1u128 << (127 - basis[i].leading_zeros());
        for j in 0..i {
            if basis[j] & lead != 0 {
                basis[j] ^= basis[i];
            }
        }
    }
    basis.sort_unstable_by(|a, b| b.cmp(a));
    basis
}

/// Enumerate all maximal isotropic (Lagrangian) subspaces of the 2n-dim label
/// space, each as its canonical reduced basis, sorted.
pub fn enumerate_lagrangians(n: usize) -> Result<Vec<Vec<PauliLabel>>> {
    if n == 0 || n > MAX_ENUM_QUBITS {
        return Err(Error::Range(format!(
            "stabilizer enumeration supported for 1 <= n <= {MAX_ENUM_QUBITS}, got {n}"
        )));
    }
    let all_labels: Vec<u128> = (1..(1u128 << (2 * n))).collect();
    // BFS over isotropic subspaces keyed by their canonical basis.
    let mut current: HashSet<Vec<u128>> = HashSet::new();
    current.insert(Vec::new());
    for _dim in 0..n {
        let mut next: HashSet<Vec<u128>> = HashSet::new();
        for basis in &current {
            'cand: for &v in &all_labels {
                let lv = unpack(n, v);
                // must commute with the whole subspace and be outside it
                let mut reduced = v;
                for &b in basis {
                    if symplectic_form_unchecked(&lv, &unpack(n, b)) != 0 {
                        continue 'cand;
                    }
                    reduced = reduced.min(reduced ^ b);
                }
                if reduced == 0 {
                    continue;
                }
                let mut grown: Vec<u128> = basis.clone();
                grown.push(v);
                next.insert(reduced_basis(&grown));
            }
        }
        current = next;
    }
    let mut out: Vec<Vec<u128>> = current.into_iter().collect();
    out.sort();
    Ok(out
        .into_iter()
        .map(|basis| basis.into_iter().map(|v| unpack(n, v)).collect())
        .collect())
}

/// Enumerate all pure n-qubit stabilizer states in canonical order:
/// Lagrangian subspaces sorted by canonical basis, then all sign vectors in
/// increasing binary order over the canonical generators.
pub fn enumerate_stabilizer_states(n: usize) -> Result<Vec<StabilizerGroupSpec>> {
    let lagrangians = enumerate_lagrangians(n)?;
    let mut out = Vec::with_capacity(lagrangians.len() << n);
    for basis in &lagrangians {
        for signs in 0..(1u32 << n) {
            let generators = basis
                .iter()
                .enumerate()
                .map(|(k, label)| SignedPauli::new(((signs >> k) & 1) as u8, *label))
                .collect();
            out.push(StabilizerGroupSpec { generators });
        }
    }
    Ok(out)
}

/// Exact number of pure n-qubit stabilizer states: `2^n prod_{k=1}^n (2^k+1)`.
pub fn stabilizer_count(n: u32) -> BigUint {
    let mut count = BigUint::one() << n;
    for k in 1..=n {
        count *= (BigUint::one() << k) + BigUint::one();
    }
    count
}

/// Upper bound `3 * 2^{(n^2+3n)/2}`; `n^2 + 3n` is always even.
pub fn stabilizer_count_bound(n: u32) -> BigUint {
    BigUint::from(3u32) << ((n * n + 3 * n) / 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::pauli_matrix;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    #[test]
    fn counts_small_n() {
        assert_eq!(stabilizer_count(1), BigUint::from(6u32));
        assert_eq!(stabilizer_count(2), BigUint::from(60u32));
        assert_eq!(stabilizer_count(3), BigUint::from(1080u32));
        assert_eq!(stabilizer_count_bound(1), BigUint::from(12u32));
        assert_eq!(stabilizer_count_bound(2), BigUint::from(96u32));
    }

    #[test]
    fn count_below_bound_up_to_ten() {
        for n in 1..=10 {
            assert!(stabilizer_count(n) <= stabilizer_count_bound(n), "n={n}");
        }
    }

    #[test]
    fn recursion_matches_closed_form() {
        // |S_{n+1}| = 2 (2^{n+1} + 1) |S_n|
        for n in 1..=9u32 {
            let lhs = stabilizer_count(n + 1);
            let rhs = BigUint::from(2u32)
                * ((BigUint::one() << (n + 1)) + BigUint::one())
                * stabilizer_count(n);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn enumeration_counts() {
        for n in 1..=3usize {
            let states = enumerate_stabilizer_states(n).unwrap();
            assert_eq!(BigUint::from(states.len()), stabilizer_count(n as u32));
        }
    }

    #[test]
    fn enumeration_rejects_large_n() {
        assert_eq!(enumerate_stabilizer_states(5).unwrap_err().code(), "range");
    }

    #[test]
    fn enumeration_is_duplicate_free() {
        let states = enumerate_stabilizer_states(2).unwrap();
        let mut seen = HashSet::new();
        for s in &states {
            assert!(seen.insert(format!("{:?}", s.generators)));
            s.validate().unwrap();
        }
    }

    #[test]
    fn projector_coefficients_single_qubit() {
        let n = 1;
        let z = PauliLabel::single(n, 0, 'Z').unwrap();
        // +Z stabilizes |0><0| = (I + Z)/2
        let plus_z = StabilizerGroupSpec::new(vec![SignedPauli::positive(z)]).unwrap();
        let proj = plus_z.projector().unwrap();
        assert_eq!(proj.coeff(&PauliLabel::zero(1)), QSqrt2::from_ratio(1, 2));
        assert_eq!(proj.coeff(&z), QSqrt2::from_ratio(1, 2));
        // -X gives (I - X)/2
        let x = PauliLabel::single(n, 0, 'X').unwrap();
        let minus_x = StabilizerGroupSpec::new(vec![SignedPauli::new(1, x)]).unwrap();
        let proj = minus_x.projector().unwrap();
        assert_eq!(proj.coeff(&x), QSqrt2::from_ratio(-1, 2));
    }

    #[test]
    fn projector_coefficients_bell_pair() {
        // S = <+ZZ, +XX>: projector (II + ZZ + XX - YY)/4
        let zz = PauliLabel::new(2, 0b11, 0).unwrap();
        let xx = PauliLabel::new(2, 0, 0b11).unwrap();
        let yy = PauliLabel::new(2, 0b11, 0b11).unwrap();
        let spec = StabilizerGroupSpec::new(vec![
            SignedPauli::positive(zz),
            SignedPauli::positive(xx),
        ])
        .unwrap();
        let proj = spec.projector().unwrap();
        assert_eq!(proj.coeff(&PauliLabel::zero(2)), QSqrt2::from_ratio(1, 4));
        assert_eq!(proj.coeff(&zz), QSqrt2::from_ratio(1, 4));
        assert_eq!(proj.coeff(&xx), QSqrt2::from_ratio(1, 4));
        assert_eq!(proj.coeff(&yy), QSqrt2::from_ratio(-1, 4));
    }

    #[test]
    fn projectors_idempotent_and_rank_one_n2() {
        let states = enumerate_stabilizer_states(2).unwrap();
        let mut distinct = HashSet::new();
        for s in &states {
            let proj = s.projector().unwrap();
            let mut m = DMatrix::from_element(4, 4, Complex64::new(0.0, 0.0));
            for (label, value) in proj.coeffs() {
                let f = value.to_f64().unwrap();
                m += pauli_matrix(&SignedPauli::positive(*label)).unwrap() * Complex64::new(f, 0.0);
            }
            assert!(((&m * &m) - &m).norm() < 1e-12, "not idempotent");
            let tr = m.trace();
            assert!((tr - Complex64::new(1.0, 0.0)).norm() < 1e-12, "trace != 1");
            assert!(distinct.insert(format!("{proj:?}")), "duplicate projector");
        }
        assert_eq!(distinct.len(), 60);
    }

    #[test]
    fn invalid_groups_rejected() {
        let z = PauliLabel::single(1, 0, 'Z').unwrap();
        let x = PauliLabel::single(1, 0, 'X').unwrap();
        // anticommuting
        let err = StabilizerGroupSpec::new(vec![SignedPauli::positive(z)]);
        assert!(err.is_ok());
        let err = StabilizerGroupSpec::new(vec![
            SignedPauli::positive(PauliLabel::new(2, 0b01, 0).unwrap()),
            SignedPauli::positive(PauliLabel::new(2, 0, 0b01).unwrap()),
        ]);
        assert_eq!(err.unwrap_err().code(), "domain");
        // dependent
        let err = StabilizerGroupSpec::new(vec![
            SignedPauli::positive(PauliLabel::new(2, 0b01, 0).unwrap()),
            SignedPauli::positive(PauliLabel::new(2, 0b01, 0).unwrap()),
        ]);
        assert_eq!(err.unwrap_err().code(), "domain");
        let _ = x;
    }
}
