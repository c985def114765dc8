//! Clifford group elements as tableaux: the images of the 2n Pauli group
//! generators under conjugation, with exact sign tracking. Global phases are
//! quotiented out, so a tableau is exactly the conjugation data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{label_product, symplectic_form_unchecked, PauliLabel, SignedPauli};

/// A Clifford group element stored as generator images: `x_images[k]` is the
/// conjugate of `X_{k+1}`, `z_images[k]` of `Z_{k+1}`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct CliffordTableau {
    n: usize,
    x_images: Vec<SignedPauli>,
    z_images: Vec<SignedPauli>,
}

/// Theoretical size of a Clifford-register entry in bits: `2n^2 + 3n`
/// (2n x (2n+1) conjugation bits minus 2n^2 - n symplectic constraints).
pub fn clifford_bit_size(n: u64) -> u64 {
    2 * n * n + 3 * n
}

impl CliffordTableau {
    pub fn new(n: usize, x_images: Vec<SignedPauli>, z_images: Vec<SignedPauli>) -> Result<Self> {
        let t = CliffordTableau { n, x_images, z_images };
        t.validate()?;
        Ok(t)
    }

    pub fn identity(n: usize) -> Self {
        let x_images = (0..n)
            .map(|k| SignedPauli::positive(PauliLabel::single(n, k, 'X').unwrap()))
            .collect();
        let z_images = (0..n)
            .map(|k| SignedPauli::positive(PauliLabel::single(n, k, 'Z').unwrap()))
            .collect();
        CliffordTableau { n, x_images, z_images }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_image(&self, k: usize) -> &SignedPauli {
        &self.x_images[k]
    }

    pub fn z_image(&self, k: usize) -> &SignedPauli {
        &self.z_images[k]
    }

    /// Check the symplectic conditions: images of commuting generators

    /// commute and images of conjugate pairs anticommute.
    pub fn validate(&self) -> Result<()> {
        if self.x_images.len() != self.n || self.z_images.len() != self.n {
            return Err(Error::Domain("tableau row count mismatch".into()));
        }
        for img in self.x_images.iter().chain(self.z_images.iter()) {
            if img.label.n() != self.n {
                return Err(Error::Domain("tableau image length mismatch".into()));
            }
        }
        for i in 0..self.n {
            for j in 0..self.n {
                let xx = symplectic_form_unchecked(&self.x_images[i].label, &self.x_images[j].label);
                let zz = symplectic_form_unchecked(&self.z_images[i].label, &self.z_images[j].label);
                let xz = symplectic_form_unchecked(&self.x_images[i].label, &self.z_images[j].label);
                if xx != 0 || zz != 0 || xz != u8::from(i == j) {
                    return Err(Error::Domain(format!(
                        "tableau is not symplectic at pair ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Conjugate a signed Pauli: `g T_p g^dagger`, sign tracked exactly.
    pub fn apply(&self, p: &SignedPauli) -> SignedPauli {
        debug_assert_eq!(p.label.n(), self.n);
        // T_p = i^{-<p_z|p_x>} (prod_k Z_k^{z_k}) (prod_k X_k^{x_k});
        // conjugate factor by factor, accumulating the i-power.
        let mut acc_label = PauliLabel::zero(self.n);
        let mut phase: i32 = 0;
        for k in 0..self.n {
            if (p.label.z_bits() >> k) & 1 == 1 {
                let img = &self.z_images[k];
                let (c, phi) = label_product(&acc_label, &img.label);
                phase += phi as i32 + 2 * img.sign as i32;
                acc_label = c;
            }
        }
        for k in 0..self.n {
            if (p.label.x_bits() >> k) & 1 == 1 {
                let img = &self.x_images[k];
                let (c, phi) = label_product(&acc_label, &img.label);
                phase += phi as i32 + 2 * img.sign as i32;
                acc_label = c;
            }
        }
        let input_phase = ((p.label.z_bits() & p.label.x_bits()).count_ones() % 4) as i32;
        let total = (phase - input_phase + 2 * p.sign as i32).rem_euclid(4);
        debug_assert_eq!(total % 2, 0, "conjugation produced imaginary phase");
        SignedPauli::new((total / 2) as u8, acc_label)
    }

    /// Composition as unitaries: `(self . other)` applies `other` first.
    pub fn compose(&self, other: &CliffordTableau) -> Result<CliffordTableau> {
        if self.n != other.n {
            return Err(Error::Domain("tableau size mismatch in composition".into()));
        }
        let x_images = other.x_images.iter().map(|p| self.apply(p)).collect();
        let z_images = other.z_images.iter().map(|p| self.apply(p)).collect();
        Ok(CliffordTableau { n: self.n, x_images, z_images })
    }

    /// Inverse tableau. The label map is inverted over GF(2); signs are fixed
    /// by requiring `apply(self, apply(inv, e)) = +e` on every generator.
    pub fn inverse(&self) -> CliffordTableau {
        let n = self.n;
        // Rows of the 2n x 2n GF(2) matrix: column j of the symplectic matrix
        // is the image label of generator j (x-part bits then z-part bits).
        let gen_label = |j: usize| -> &PauliLabel {
            if j < n {
                &self.x_images[j].label
            } else {
                &self.z_images[j - n].label
            }
        };
        let pack = |l: &PauliLabel| -> u128 { (l.x_bits() as u128) | ((l.z_bits() as u128) << n) };
        // Solve S v = e_k for each target generator via Gauss-Jordan on
        // [S | I] with columns of S = packed image labels.
        let cols: Vec<u128> = (0..2 * n).map(|j| pack(gen_label(j))).collect();
        // Represent S row-wise: bit j of row i = bit i of cols[j].
        let mut rows: Vec<(u128, u128)> = (0..2 * n)
            .map(|i| {
                let mut r = 0u128;
                for (j, c) in cols.iter().enumerate() {
                    if (c >> i) & 1 == 1 {
                        r |= 1 << j;
                    }
                }
                (r, 1u128 << i)
            })
            .collect();
        let mut pivot_row = 0;
        for col in 0..2 * n {
            if let Some(r) = (pivot_row..2 * n).find(|&r| (rows[r].0 >> col) & 1 == 1) {
                rows.swap(pivot_row, r);
                let (pr, pa) = rows[pivot_row];
                for (i, row) in rows.iter_mut().enumerate() {
                    if i != pivot_row && (row.0 >> col) & 1 == 1 {
                        row.0 ^= pr;
                        row.1 ^= pa;
                    }
                }
                pivot_row += 1;
            }
        }
        debug_assert_eq!(pivot_row, 2 * n, "tableau label map not invertible");
        // After Gauss-Jordan the S part is a permutation; the augmented part of
        // the row with pivot column j is row j of S^{-1}. The preimage of
        // generator j is column j of S^{-1}.
        let mut inv_rows = vec![0u128; 2 * n];
        for (r, aug) in rows.iter() {
            let j = r.trailing_zeros() as usize;
            inv_rows[j] = *aug;
        }
        let mut inv_cols = vec![0u128; 2 * n];
        for (i, row) in inv_rows.iter().enumerate() {
            for (j, col) in inv_cols.iter_mut().enumerate() {
                if (row >> j) & 1 == 1 {
                    *col |= 1 << i;
                }
            }
        }
        let unpack = |v: u128| -> PauliLabel {
            let mask = (1u128 << n) - 1;
            PauliLabel::new(n, ((v >> n) & mask) as u64, (v & mask) as u64).unwrap()
        };
        let mut x_images = Vec::with_capacity(n);
        let mut z_images = Vec::with_capacity(n);
        for j in 0..2 * n {
            let label = unpack(inv_cols[j]);
            // Fix the sign: g (g^{-1} e_j) g^dagger must be +e_j.
            let forward = self.apply(&SignedPauli::positive(label));
            let img = SignedPauli::new(forward.sign, label);
            if j < n {
                x_images.push(img);
            } else {
                z_images.push(img);
            }
        }
        CliffordTableau { n, x_images, z_images }
    }

    /// Serialization order: X_1..X_n then Z_1..Z_n rows.
    pub fn rows(&self) -> Vec<SignedPauli> {
        self.x_images.iter().chain(self.z_images.iter()).copied().collect()
    }

    pub fn from_rows(n: usize, rows: Vec<SignedPauli>) -> Result<Self> {
        if rows.len() != 2 * n {
            return Err(Error::Domain(format!(
                "expected {} tableau rows, got {}",
                2 * n,
                rows.len()
            )));
        }
        let x_images = rows[..n].to_vec();
        let z_images = rows[n..].to_vec();
        CliffordTableau::new(n, x_images, z_images)
    }
}

#[derive(Serialize, Deserialize)]
struct TableauWire {
    n: usize,
    rows: Vec<SignedPauli>,
}

impl Serialize for CliffordTableau {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableauWire { n: self.n, rows: self.rows() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CliffordTableau {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = TableauWire::deserialize(d)?;
        CliffordTableau::from_rows(wire.n, wire.rows).map_err(serde::de::Error::custom)
    }
}

/// Hadamard on one qubit: X <-> Z.
pub fn hadamard(n: usize, qubit: usize) -> Result<CliffordTableau> {
    let mut t = CliffordTableau::identity(n);
    t.x_images[qubit] = SignedPauli::positive(PauliLabel::single(n, qubit, 'Z')?);
    t.z_images[qubit] = SignedPauli::positive(PauliLabel::single(n, qubit, 'X')?);
    Ok(t)
}

/// Phase gate S: X -> Y, Z -> Z.
pub fn phase_gate(n: usize, qubit: usize) -> Result<CliffordTableau> {
    let mut t = CliffordTableau::identity(n);
    t.x_images[qubit] = SignedPauli::positive(PauliLabel::single(n, qubit, 'Y')?);
    Ok(t)
}

/// CNOT with the given control and target.
pub fn cnot(n: usize, control: usize, target: usize) -> Result<CliffordTableau> {
    if control == target {
        return Err(Error::Domain("cnot control equals target".into()));
    }
    let mut t = CliffordTableau::identity(n);
    // X_c -> X_c X_t, Z_t -> Z_c Z_t
    let xc = PauliLabel::single(n, control, 'X')?.xor(&PauliLabel::single(n, target, 'X')?);
    let zt = PauliLabel::single(n, control, 'Z')?.xor(&PauliLabel::single(n, target, 'Z')?);
    t.x_images[control] = SignedPauli::positive(xc);
    t.z_images[target] = SignedPauli::positive(zt);
    Ok(t)
}

/// The 24 single-qubit Clifford tableaux, generated from H and S by closure.
/// Deterministic order: BFS from the identity.
pub fn single_qubit_group() -> Vec<CliffordTableau> {
    let gens = [hadamard(1, 0).unwrap(), phase_gate(1, 0).unwrap()];
    let mut seen: Vec<CliffordTableau> = vec![CliffordTableau::identity(1)];
    let mut frontier = vec![CliffordTableau::identity(1)];
    while let Some(t) = frontier.pop() {
        for g in &gens {
            let next = g.compose(&t).unwrap();
            if !seen.contains(&next) {
                seen.push(next.clone());
                frontier.push(next);
            }
        }
    }
    seen
}

/// Deterministic Clifford `g` with `g Z_n g^dagger = (-1)^s T_a`, i.e.
/// `g P(z_n, 0) g^dagger = P(a, s)` on projectors, built by greedy extension
/// of `a` to a full symplectic basis.
pub fn symplectic_completion(a: &PauliLabel, s: u8) -> Result<CliffordTableau> {
    if a.is_zero() {
        return Err(Error::Domain("symplectic completion of the zero label".into()));
    }
    let n = a.n();
    // Candidate vectors in a fixed order: X_1..X_n, Z_1..Z_n, then all labels
    // by index. The order makes completion of a = Z_n the identity tableau.
    let mut candidates: Vec<PauliLabel> = Vec::new();
    for k in 0..n {
        candidates.push(PauliLabel::single(n, k, 'X')?);
    }
    for k in 0..n {
        candidates.push(PauliLabel::single(n, k, 'Z')?);
    }
    for idx in 1..(1usize << (2 * n)) {
        candidates.push(PauliLabel::from_index(n, idx)?);
    }

    // Hyperbolic pairs (x_k, z_k). The pair containing `a` retires to qubit n;
    // complement pairs fill qubits 1..n-1 in discovery order.
    let mut constructed: Vec<(PauliLabel, PauliLabel)> = Vec::with_capacity(n);
    let mut pool = candidates;
    for step in 0..n {
        let (xk, zk) = if step == 0 {
            // z_n = a, partner on the x side.
            let partner = pool
                .iter()
                .find(|v| symplectic_form_unchecked(a, v) == 1)
                .copied()
                .ok_or_else(|| Error::Internal("no symplectic partner found".into()))?;
            (partner, *a)
        } else {
            let seed = pool[0];
            let partner = pool
                .iter()
                .find(|v| symplectic_form_unchecked(&seed, v) == 1)
                .copied()
                .ok_or_else(|| Error::Internal("symplectic complement degenerate".into()))?;
            (seed, partner)
        };
        constructed.push((xk, zk));
        // Project the pool onto the symplectic complement of (xk, zk).
        let mut next_pool: Vec<PauliLabel> = Vec::with_capacity(pool.len());
        for v in pool {
            let mut w = v;
            if symplectic_form_unchecked(&w, &zk) == 1 {
                w = w.xor(&xk);
            }
            if symplectic_form_unchecked(&w, &xk) == 1 {
                w = w.xor(&zk);
            }
            if !w.is_zero() && !next_pool.contains(&w) {
                next_pool.push(w);
            }
        }
        pool = next_pool;
    }

    let mut x_images: Vec<SignedPauli> = Vec::with_capacity(n);
    let mut z_images: Vec<SignedPauli> = Vec::with_capacity(n);
    for (xk, zk) in constructed.iter().skip(1) {
        x_images.push(SignedPauli::positive(*xk));
        z_images.push(SignedPauli::positive(*zk));
    }
    let (xn, zn) = constructed[0];
    x_images.push(SignedPauli::positive(xn));
    z_images.push(SignedPauli::new(s, zn));
    CliffordTableau::new(n, x_images, z_images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{pauli_matrix, symplectic_form};
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn lbl(n: usize, z: u64, x: u64) -> PauliLabel {
        PauliLabel::new(n, z, x).unwrap()
    }

    fn plus(n: usize, z: u64, x: u64) -> SignedPauli {
        SignedPauli::positive(lbl(n, z, x))
    }

    #[test]
    fn hadamard_swaps_x_and_z() {
        let h = hadamard(1, 0).unwrap();
        assert_eq!(h.apply(&plus(1, 0, 1)), plus(1, 1, 0));
        assert_eq!(h.apply(&plus(1, 1, 0)), plus(1, 0, 1));
        // H Y H = -Y
        assert_eq!(h.apply(&plus(1, 1, 1)), SignedPauli::new(1, lbl(1, 1, 1)));
    }

    #[test]
    fn phase_gate_sends_x_to_y() {
        let s = phase_gate(1, 0).unwrap();
        assert_eq!(s.apply(&plus(1, 0, 1)), plus(1, 1, 1));
        // S Y S^dagger = -X
        assert_eq!(s.apply(&plus(1, 1, 1)), SignedPauli::new(1, lbl(1, 0, 1)));
    }

    #[test]
    fn cnot_propagates_x() {
        let cx = cnot(2, 0, 1).unwrap();
        // X (x) I -> X (x) X
        assert_eq!(cx.apply(&plus(2, 0, 0b01)), plus(2, 0, 0b11));
        // I (x) Z -> Z (x) Z
        assert_eq!(cx.apply(&plus(2, 0b10, 0)), plus(2, 0b11, 0));
    }

    #[test]
    fn composition_matches_sequential_action() {
        let s = phase_gate(1, 0).unwrap();
        let h = hadamard(1, 0).unwrap();
        // identity composition
        let id = CliffordTableau::identity(1);
        assert_eq!(s.compose(&id).unwrap(), s);
        // H . H = identity
        assert_eq!(h.compose(&h).unwrap(), id);
        // (S . S) X = -X  (i.e. Z X Z = -X)
        let ss = s.compose(&s).unwrap();
        assert_eq!(ss.apply(&plus(1, 0, 1)), SignedPauli::new(1, lbl(1, 0, 1)));
    }

    #[test]
    fn inverse_round_trips() {
        let gates = [
            hadamard(2, 0).unwrap(),
            phase_gate(2, 1).unwrap(),
            cnot(2, 0, 1).unwrap(),
        ];
        let mut g = CliffordTableau::identity(2);
        for gate in &gates {
            g = gate.compose(&g).unwrap();
        }
        let ginv = g.inverse();
        assert_eq!(g.compose(&ginv).unwrap(), CliffordTableau::identity(2));
        assert_eq!(ginv.compose(&g).unwrap(), CliffordTableau::identity(2));
    }

    #[test]
    fn single_qubit_group_has_24_elements() {
        let group = single_qubit_group();
        assert_eq!(group.len(), 24);
    }

    #[test]
    fn apply_preserves_symplectic_form() {
        let group = single_qubit_group();
        for g in group.iter().take(8) {
            for ia in 0..4usize {
                for ib in 0..4usize {
                    let a = PauliLabel::from_index(1, ia).unwrap();
                    let b = PauliLabel::from_index(1, ib).unwrap();
                    let ga = g.apply(&SignedPauli::positive(a)).label;
                    let gb = g.apply(&SignedPauli::positive(b)).label;
                    assert_eq!(
                        symplectic_form(&a, &b).unwrap(),
                        symplectic_form(&ga, &gb).unwrap()
                    );
                }
            }
        }
    }

    /// Matrix-level check that tableau conjugation matches unitary
    /// conjugation for the generating gates.
    #[test]
    fn tableau_action_matches_matrices() {
        let r = 0.5f64.sqrt();
        let h_mat = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(r, 0.0),
                Complex64::new(r, 0.0),
                Complex64::new(r, 0.0),
                Complex64::new(-r, 0.0),
            ],
        );
        let s_mat = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 1.0),
            ],
        );
        let cx_mat = {
            let mut m = DMatrix::from_element(4, 4, Complex64::new(0.0, 0.0));
            // qubit 0 is the most significant index bit
            m[(0, 0)] = Complex64::new(1.0, 0.0);
            m[(1, 1)] = Complex64::new(1.0, 0.0);
            m[(2, 3)] = Complex64::new(1.0, 0.0);
            m[(3, 2)] = Complex64::new(1.0, 0.0);
            m
        };
        let cases: Vec<(CliffordTableau, DMatrix<Complex64>)> = vec![
            (hadamard(1, 0).unwrap(), h_mat),
            (phase_gate(1, 0).unwrap(), s_mat),
            (cnot(2, 0, 1).unwrap(), cx_mat),
        ];
        for (tab, u) in &cases {
            let n = tab.n();
            for idx in 0..(1usize << (2 * n)) {
                let p = SignedPauli::positive(PauliLabel::from_index(n, idx).unwrap());
                let lhs = u * pauli_matrix(&p).unwrap() * u.adjoint();
                let rhs = pauli_matrix(&tab.apply(&p)).unwrap();
                assert!((lhs - rhs).norm() < 1e-12, "mismatch at label {idx}");
            }
        }
    }

    #[test]
    fn completion_of_z_n_is_identity() {
        for n in 1..=3 {
            let zn = PauliLabel::single(n, n - 1, 'Z').unwrap();
            let g = symplectic_completion(&zn, 0).unwrap();
            assert_eq!(g, CliffordTableau::identity(n));
        }
    }

    #[test]
    fn completion_maps_z_n_to_target() {
        for n in 1..=3usize {
            for idx in 1..(1usize << (2 * n)) {
                let a = PauliLabel::from_index(n, idx).unwrap();
                for s in [0u8, 1] {
                    let g = symplectic_completion(&a, s).unwrap();
                    g.validate().unwrap();
                    let zn = PauliLabel::single(n, n - 1, 'Z').unwrap();
                    let img = g.apply(&SignedPauli::positive(zn));
                    assert_eq!(img, SignedPauli::new(s, a));
                }
            }
        }
    }

    #[test]
    fn completion_of_zero_label_rejected() {
        let err = symplectic_completion(&PauliLabel::zero(2), 0).unwrap_err();
        assert_eq!(err.code(), "domain");
    }

    #[test]
    fn bit_size_closed_form() {
        assert_eq!(clifford_bit_size(1), 5);
        assert_eq!(clifford_bit_size(2), 14);
        assert_eq!(clifford_bit_size(3), 27);
    }
}
