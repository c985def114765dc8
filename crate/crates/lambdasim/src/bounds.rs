//! Counting bounds on the generalized phase space: the cyclic-polytope facet
//! formula, upper bounds on the vertex count of the polytope, the stabilizer
//! count bound, and the memory formulas reported by the ledger.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stabilizer::{stabilizer_count, stabilizer_count_bound};

/// Exact binomial coefficient.
pub fn binomial(n: &BigUint, k: &BigUint) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let mut res = BigUint::one();
    let mut i = BigUint::zero();
    while &i < k {
        let next = &i + 1u32;
        res = res * (n - &i) / &next;
        i = next;
    }
    res
}

/// Number of facets of the cyclic polytope `C(v, d)`:
/// even d = 2m: `v/(v-m) * C(v-m, m)`; odd d = 2m+1: `2 * C(v-m-1, m)`.
pub fn cyclic_polytope_facets(v: u64, d: u64) -> Result<BigUint> {
    if d < 1 || v <= d {
        return Err(Error::Domain(format!(
            "cyclic polytope needs v > d >= 1, got v={v}, d={d}"
        )));
    }
    let m = d / 2;
    let facets = if d % 2 == 0 {
        // v/(v-m) * C(v-m, m) is an integer: compute as C(v-m, m) + C(v-m-1, m-1)
        // using v/(v-m) C(v-m, m) = C(v-m, m) + m/(v-m) C(v-m, m).
        let a = binomial(&BigUint::from(v - m), &BigUint::from(m));
        let b = binomial(&BigUint::from(v - m - 1), &BigUint::from(m - 1));
        a + b
    } else {
        BigUint::from(2u32) * binomial(&BigUint::from(v - m - 1), &BigUint::from(m))
    };
    Ok(facets)
}

/// log2(6e) to double precision; the only irrational constant in the bound.
pub fn log2_6e() -> f64 {
    (6.0 * std::f64::consts::E).log2()
}

/// Vertex-count upper bound from the cyclic-polytope argument:
/// `log2 |V_n| <= 1 + 4^{n-1} [n^2 - n + 2 log2(6e)]`.
pub fn lambda_vertex_log_upper(n: u32) -> f64 {
    let pow = 4f64.powi(n as i32 - 1);
    1.0 + pow * ((n * n) as f64 - n as f64 + 2.0 * log2_6e())
}

/// The simpler bound `log2 |V_n| <= 4^n n^2`.
pub fn simple_upper(n: u32) -> BigUint {
    BigUint::from(4u32).pow(n) * BigUint::from(n) * BigUint::from(n)
}

/// Known lower bound constant `n^2 / 2` on `log2 |V_n|`.
pub fn kwb_lower(n: u32) -> f64 {
    (n * n) as f64 / 2.0
}

/// Simulation mode for the memory formulas.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryMode {
    Commuting,
    General,
}

/// Closed-form memory bound in bits: `2n^2 + 3n` for commuting sequences,
/// doubled for general circuits (orbit bits plus a Clifford register).
pub fn memory_bound(n: u64, mode: MemoryMode) -> u64 {
    let commuting = 2 * n * n + 3 * n;
    match mode {
        MemoryMode::Commuting => commuting,
        MemoryMode::General => 2 * commuting,
    }
}

/// Known exact vertex counts of the polytope for small n.
pub fn known_vertex_count(n: u32) -> Option<u64> {
    match n {
        1 => Some(8),
        2 => Some(22320),
        _ => None,
    }
}

/// One row of the bounds table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: u32,
    /// Lower bound n^2/2 on log2 of the vertex count.
    pub lower_log2: f64,
    /// Cyclic-polytope upper bound on log2 of the vertex count.
    pub lemma_upper_log2: f64,
    /// Simple upper bound 4^n n^2 (exact integer, rendered as a string).
    pub simple_upper_log2: String,
    /// Known vertex count when available.
    pub known_vertices: Option<u64>,
    pub known_log2_vertices: Option<f64>,
    /// Exact stabilizer count and its bound (decimal strings).
    pub stabilizer_count: String,
    pub stabilizer_bound: String,
    /// Memory formulas in bits.
    pub memory_commuting_bits: u64,
    pub memory_general_bits: u64,
}

impl BoundReport {
    pub fn build(n: u32) -> Self {
        let known = known_vertex_count(n);
        BoundReport {
            n,
            lower_log2: kwb_lower(n),
            lemma_upper_log2: lambda_vertex_log_upper(n),
            simple_upper_log2: simple_upper(n).to_string(),
            known_vertices: known,
            known_log2_vertices: known.map(|v| (v as f64).log2()),
            stabilizer_count: stabilizer_count(n).to_string(),
            stabilizer_bound: stabilizer_count_bound(n).to_string(),
            memory_commuting_bits: memory_bound(n as u64, MemoryMode::Commuting),
            memory_general_bits: memory_bound(n as u64, MemoryMode::General),
        }
    }

    /// Check the chain lower <= known <= lemma <= simple (where defined).
    pub fn chain_holds(&self) -> bool {
        let simple = self.simple_upper_log2.parse::<f64>().unwrap_or(f64::INFINITY);
        let mut ok = true;
        if let Some(k) = self.known_log2_vertices {
            ok &= self.lower_log2 <= k && k <= self.lemma_upper_log2;
        }
        if self.n >= 2 {
            ok &= self.lemma_upper_log2 <= simple;
        } else {
            // for n = 1 both upper bounds individually dominate the known count
            ok &= self.known_log2_vertices.map(|k| k <= simple).unwrap_or(true);
        }
        ok
    }
}

/// Rows for n = 1..=n_max.
pub fn bound_table(n_max: u32) -> Result<Vec<BoundReport>> {
    if n_max == 0 || n_max > 64 {
        return Err(Error::Range(format!("bounds table supports 1..=64, got {n_max}")));
    }
    Ok((1..=n_max).map(BoundReport::build).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    #[test]
    fn binomial_small() {
        assert_eq!(binomial(&5u32.into(), &2u32.into()), BigUint::from(10u32));
        assert_eq!(binomial(&4u32.into(), &1u32.into()), BigUint::from(4u32));
        assert_eq!(binomial(&3u32.into(), &5u32.into()), BigUint::zero());
    }

    #[test]
    fn cyclic_facets_examples() {
        // 3-polytope with 6 vertices: simplicial bound 2v - 4 = 8
        assert_eq!(cyclic_polytope_facets(6, 3).unwrap(), BigUint::from(8u32));
        // 4-polytope with 6 vertices: (6/4) C(4,2) = 9
        assert_eq!(cyclic_polytope_facets(6, 4).unwrap(), BigUint::from(9u32));
        // simplex: v = d + 1 facets
        for d in 1..=8u64 {
            assert_eq!(cyclic_polytope_facets(d + 1, d).unwrap(), BigUint::from(d + 1));
        }
        assert_eq!(cyclic_polytope_facets(4, 4).unwrap_err().code(), "domain");
    }

    #[test]
    fn cyclic_facets_monotone_in_v() {
        for d in 2..=7u64 {
            let mut prev = BigUint::zero();
            for v in (d + 1)..(d + 12) {
                let f = cyclic_polytope_facets(v, d).unwrap();
                assert!(f >= prev, "d={d} v={v}");
                prev = f;
            }
        }
    }

    #[test]
    fn lemma_values() {
        // n=1: 1 + [0 + 2 log2(6e)] ~ 9.055
        let v1 = lambda_vertex_log_upper(1);
        assert!((v1 - 9.0552).abs() < 1e-3, "{v1}");
        assert!(3.0 <= v1);
        let v2 = lambda_vertex_log_upper(2);
        assert!((v2 - 41.22).abs() < 0.01, "{v2}");
        assert!((22320f64).log2() <= v2);
        let v3 = lambda_vertex_log_upper(3);
        assert!((v3 - (1.0 + 16.0 * (6.0 + 2.0 * log2_6e()))).abs() < 1e-9);
    }

    #[test]
    fn simple_upper_and_lower() {
        assert_eq!(simple_upper(1), BigUint::from(4u32));
        assert_eq!(simple_upper(2), BigUint::from(64u32));
        assert_eq!(kwb_lower(1), 0.5);
        assert_eq!(kwb_lower(2), 2.0);
        // the cyclic-polytope bound is below 4^n n^2 for n >= 2
        for n in 2..=12u32 {
            let simple = simple_upper(n).to_f64().unwrap();
            assert!(lambda_vertex_log_upper(n) <= simple, "n={n}");
        }
    }

    #[test]
    fn memory_formulas() {
        assert_eq!(memory_bound(3, MemoryMode::Commuting), 27);
        assert_eq!(memory_bound(3, MemoryMode::General), 54);
        for n in 1..=100u64 {
            assert_eq!(
                memory_bound(n, MemoryMode::General),
                2 * memory_bound(n, MemoryMode::Commuting)
            );
        }
    }

    #[test]
    fn chain_holds_small_n() {
        for n in 1..=4 {
            assert!(BoundReport::build(n).chain_holds(), "n={n}");
        }
    }
}
