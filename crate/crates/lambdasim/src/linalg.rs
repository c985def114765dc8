//! Exact integer linear algebra for the polytope machinery: fraction-free
//! Gauss-Jordan inversion, rank computation, and extreme-ray enumeration of
//! pointed polyhedral cones (double description).

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Fraction-free (Bareiss) Gauss-Jordan inverse.
///
/// Returns `(m, den)` with `den > 0` and `rows * m = den * I`; all entries are
/// exact integers (the adjugate scaled by the determinant sign).
pub fn integer_inverse(rows: &[Vec<BigInt>]) -> Result<(Vec<Vec<BigInt>>, BigInt)> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Internal("inverse of a non-square matrix".into()));
    }
    // Augmented [A | I], eliminated in place with the one-step Bareiss rule;
    // every division below is exact.
    let width = 2 * d;
    let mut a: Vec<Vec<BigInt>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..d).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }));
            row
        })
        .collect();
    let mut prev_pivot = BigInt::one();
    for k in 0..d {
        let pivot_row = (k..d)
            .find(|&i| !a[i][k].is_zero())
            .ok_or_else(|| Error::Geometry("singular matrix in vertex basis".into()))?;
        if pivot_row != k {
            a.swap(k, pivot_row);
        }
        let pivot = a[k][k].clone();
        // The one-step rule rescales every non-pivot row even where the
        // eliminated entry is zero; later exact divisions rely on it.
        for i in 0..d {
            if i == k {
                continue;
            }
            let factor = a[i][k].clone();
            for j in 0..width {
                let val = (&pivot * &a[i][j] - &factor * &a[k][j]) / &prev_pivot;
                a[i][j] = val;
            }
        }
        prev_pivot = pivot;
    }
    // Left block is now p * I with p the final pivot, so right * A = p * I.
    let mut den = prev_pivot;
    let mut m: Vec<Vec<BigInt>> = a.into_iter().map(|row| row[d..].to_vec()).collect();
    if den.is_negative() {
        den = -den;
        for row in &mut m {
            for v in row.iter_mut() {
                *v = -v.clone();
            }
        }
    }
    Ok((m, den))
}

/// Rank over the rationals via fraction-free forward elimination.
pub fn integer_rank(rows: &[Vec<BigInt>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let mut a: Vec<Vec<BigInt>> = rows.to_vec();
    let mut rank = 0;
    let mut prev_pivot = BigInt::one();
    for col in 0..cols {
        let Some(pivot_row) = (rank..a.len()).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        a.swap(rank, pivot_row);
        let pivot = a[rank][col].clone();
        for i in rank + 1..a.len() {
            let factor = a[i][col].clone();
            for j in col..cols {
                let val = (&pivot * &a[i][j] - &factor * &a[rank][j]) / &prev_pivot;
                a[i][j] = val;
            }
        }
        prev_pivot = pivot;
        rank += 1;
        if rank == a.len() {
            break;
        }
    }
    rank
}

/// Pick a maximal independent subset of rows (by index, first-come) together
/// with its rank.
pub fn independent_rows(rows: &[Vec<BigInt>]) -> (Vec<usize>, usize) {
    if rows.is_empty() {
        return (Vec::new(), 0);
    }
    let cols = rows[0].len();
    // Rational-free incremental elimination: maintain echelon basis with
    // pivot columns.
    let mut basis: Vec<(usize, Vec<BigInt>)> = Vec::new(); // (pivot col, row)
    let mut chosen = Vec::new();
    for (idx, row) in rows.iter().enumerate() {
        let mut r = row.clone();
        for (pc, b) in &basis {
            if !r[*pc].is_zero() {
                // r := b[pc] * r - r[pc] * b (keeps integers, changes scale only)
                let f1 = b[*pc].clone();
                let f2 = r[*pc].clone();
                for j in 0..cols {
                    r[j] = &f1 * &r[j] - &f2 * &b[j];
                }
            }
        }
        if let Some(pc) = (0..cols).find(|&j| !r[j].is_zero()) {
            // normalize by gcd to keep entries small
            let mut g = BigInt::zero();
            for v in &r {
                g = g.gcd(v);
            }
            if !g.is_one() && !g.is_zero() {
                for v in r.iter_mut() {
                    *v = &*v / &g;
                }
            }
            basis.push((pc, r));
            chosen.push(idx);
        }
    }
    let rank = chosen.len();
    (chosen, rank)
}

/// A ray of a pointed cone: gcd-normalized integer direction plus the set of
/// processed constraints tight on it.
#[derive(Clone, Debug)]
struct Ray {
    dir: Vec<BigInt>,
    tight: Vec<u64>,
}

impl Ray {
    fn normalize(&mut self) {
        let mut g = BigInt::zero();
        for v in &self.dir {
            g = g.gcd(v);
        }
        if !g.is_zero() && !g.is_one() {
            for v in self.dir.iter_mut() {
                *v = &*v / &g;
            }
        }
    }
}

fn set_bit(bits: &mut [u64], i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn is_subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

fn intersect(a: &[u64], b: &[u64]) -> Vec<u64> {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

/// Extreme rays of the pointed cone `{ d : u . d >= 0 for all u in normals }`.
///
/// The normals must span the space (pointedness). Incremental double
/// description with the combinatorial adjacency test.
pub fn extreme_rays(normals: &[Vec<BigInt>], dim: usize) -> Result<Vec<Vec<BigInt>>> {
    let words = normals.len().div_ceil(64);
    let (initial, rank) = independent_rows(normals);
    if rank != dim {
        return Err(Error::Geometry(format!(
            "cone is not pointed: normal rank {rank} < dim {dim}"
        )));
    }
    let base_rows: Vec<Vec<BigInt>> = initial.iter().map(|&i| normals[i].clone()).collect();
    let (inv, _den) = integer_inverse(&base_rows)?;
    // Initial rays: columns of the inverse satisfy u_i . r_j = den delta_ij.
    let mut rays: Vec<Ray> = (0..dim)
        .map(|j| {
            let dir: Vec<BigInt> = (0..dim).map(|i| inv[i][j].clone()).collect();
            let mut tight = vec![0u64; words];
            for (pos, &ni) in initial.iter().enumerate() {
                if pos != j {
                    set_bit(&mut tight, ni);
                }
            }
            let mut ray = Ray { dir, tight };
            ray.normalize();
            ray
        })
        .collect();

    let initial_set: std::collections::HashSet<usize> = initial.iter().copied().collect();
    for (ni, normal) in normals.iter().enumerate() {
        if initial_set.contains(&ni) {
            continue;
        }
        let vals: Vec<BigInt> = rays
            .iter()
            .map(|r| normal.iter().zip(&r.dir).map(|(u, d)| u * d).sum())
            .collect();
        let mut keep: Vec<Ray> = Vec::new();
        let mut pos_idx = Vec::new();
        let mut neg_idx = Vec::new();
        for (k, v) in vals.iter().enumerate() {
            match v.sign() {
                num_bigint::Sign::Plus => pos_idx.push(k),
                num_bigint::Sign::NoSign => {}
                num_bigint::Sign::Minus => neg_idx.push(k),
            }
        }
        if neg_idx.is_empty() {
            for (k, mut r) in rays.into_iter().enumerate() {
                if vals[k].is_zero() {
                    set_bit(&mut r.tight, ni);
                }
                keep.push(r);
            }
            rays = keep;
            continue;
        }
        // Combine adjacent (+,-) pairs into new boundary rays.
        let mut new_rays: Vec<Ray> = Vec::new();
        for &p in &pos_idx {
            for &m in &neg_idx {
                let common = intersect(&rays[p].tight, &rays[m].tight);
                // adjacency: no third ray is tight on the whole intersection
                let adjacent = rays.iter().enumerate().all(|(k, r)| {
                    k == p || k == m || !is_subset(&common, &r.tight)
                });
                if !adjacent {
                    continue;
                }
                let (sp, sm) = (&vals[p], &vals[m]);
                let dir: Vec<BigInt> = rays[p]
                    .dir
                    .iter()
                    .zip(&rays[m].dir)
                    .map(|(dp, dm)| sp * dm - sm * dp)
                    .collect();
                let mut tight = common;
                set_bit(&mut tight, ni);
                let mut ray = Ray { dir, tight };
                ray.normalize();
                new_rays.push(ray);
            }
        }
        for (k, mut r) in rays.into_iter().enumerate() {
            match vals[k].sign() {
                num_bigint::Sign::Minus => {}
                num_bigint::Sign::NoSign => {
                    set_bit(&mut r.tight, ni);
                    keep.push(r);
                }
                num_bigint::Sign::Plus => keep.push(r),
            }
        }
        keep.extend(new_rays);
        rays = keep;
    }
    Ok(rays.into_iter().map(|r| r.dir).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bi(v: i64) -> BigInt {
        BigInt::from(v)
    }

    fn mat(rows: &[&[i64]]) -> Vec<Vec<BigInt>> {
        rows.iter().map(|r| r.iter().map(|&v| bi(v)).collect()).collect()
    }

    #[test]
    fn inverse_small() {
        let a = mat(&[&[2, 1], &[1, 1]]);
        let (m, den) = integer_inverse(&a).unwrap();
        assert_eq!(den, bi(1));
        assert_eq!(m, mat(&[&[1, -1], &[-1, 2]]));
    }

    #[test]
    fn inverse_with_denominator() {
        let a = mat(&[&[2, 0], &[0, 3]]);
        let (m, den) = integer_inverse(&a).unwrap();
        // a * m = den * I
        for i in 0..2 {
            for j in 0..2 {
                let v: BigInt = (0..2).map(|k| &a[i][k] * &m[k][j]).sum();
                assert_eq!(v, if i == j { den.clone() } else { bi(0) });
            }
        }
    }

    #[test]
    fn inverse_with_row_swap() {
        let a = mat(&[&[0, 1, 0], &[1, 0, 0], &[0, 0, 1]]);
        let (m, den) = integer_inverse(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: BigInt = (0..3).map(|k| &a[i][k] * &m[k][j]).sum();
                assert_eq!(v, if i == j { den.clone() } else { bi(0) }, "({i},{j})");
            }
        }
        assert!(den > bi(0));
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = mat(&[&[1, 2], &[2, 4]]);
        assert!(integer_inverse(&a).is_err());
    }

    #[test]
    fn inverse_identity_on_random_matrices() {
        let mut state = 0x1234_5678_u64;
        let mut rnd = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 33) % 11) as i64 - 5
        };
        for d in 1..=6usize {
            for _case in 0..25 {
                let a: Vec<Vec<BigInt>> = (0..d)
                    .map(|_| (0..d).map(|_| BigInt::from(rnd())).collect())
                    .collect();
                let Ok((m, den)) = integer_inverse(&a) else {
                    continue; // singular draw
                };
                assert!(den > BigInt::zero());
                for i in 0..d {
                    for j in 0..d {
                        let v: BigInt = (0..d).map(|k| &a[i][k] * &m[k][j]).sum();
                        assert_eq!(v, if i == j { den.clone() } else { bi(0) }, "({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn rank_and_independent_rows() {
        let a = mat(&[&[1, 0, 1], &[0, 1, 1], &[1, 1, 2], &[0, 0, 1]]);
        assert_eq!(integer_rank(&a), 3);
        let (chosen, rank) = independent_rows(&a);
        assert_eq!(rank, 3);
        assert_eq!(chosen, vec![0, 1, 3]);
    }

    #[test]
    fn orthant_cone_rays() {
        // {d >= 0} in 3d: rays are the coordinate axes
        let normals = mat(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]);
        let mut rays = extreme_rays(&normals, 3).unwrap();
        rays.sort();
        assert_eq!(rays.len(), 3);
        for r in &rays {
            assert_eq!(r.iter().filter(|v| !v.is_zero()).count(), 1);
        }
    }

    #[test]
    fn square_cone_rays() {
        // cone over a square: x >= |y|, x >= |z| -> 4 extreme rays
        let normals = mat(&[&[1, 1, 0], &[1, -1, 0], &[1, 0, 1], &[1, 0, -1]]);
        let rays = extreme_rays(&normals, 3).unwrap();
        assert_eq!(rays.len(), 4);
        for r in &rays {
            // each ray tight on exactly 2 of the 4 facets
            let tight = normals
                .iter()
                .filter(|u| {
                    u.iter()
                        .zip(r)
                        .map(|(a, b)| a * b)
                        .sum::<BigInt>()
                        .is_zero()
                })
                .count();
            assert_eq!(tight, 2);
        }
    }

    #[test]
    fn redundant_constraints_do_not_add_rays() {
        // same square cone with a duplicated and an implied constraint
        let normals = mat(&[
            &[1, 1, 0],
            &[1, -1, 0],
            &[1, 0, 1],
            &[1, 0, -1],
            &[1, 1, 0],
            &[2, 1, 1],
        ]);
        let rays = extreme_rays(&normals, 3).unwrap();
        assert_eq!(rays.len(), 4);
    }
}
