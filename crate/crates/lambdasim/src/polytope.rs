//! The state-space polytope: unit-trace Hermitian operators with nonnegative
//! overlap against every pure stabilizer state.
//!
//! The facet system has one inequality per stabilizer state. A facet value is
//! evaluated as a signed sum of Pauli expectations over the stabilizer group;
//! the 2^n sign assignments of one group are evaluated together with a
//! Walsh-Hadamard transform. Everything here is exact: membership tests use
//! sign computations in Q(sqrt 2), vertex search runs an integer simplex with
//! Bland's anti-cycling rule, and decompositions reconstruct their input
//! coefficient-for-coefficient.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::clifford::{symplectic_completion, CliffordTableau};
use crate::error::{Error, Result};
use crate::herm::HermOp;
use crate::linalg::{independent_rows, integer_inverse, integer_rank};
use crate::pauli::{
    commuting_product, label_product, symplectic_form_unchecked, PauliLabel, SignedPauli,
};
use crate::scalar::{QSqrt2, Rational};
use crate::stabilizer::{enumerate_lagrangians, StabilizerGroupSpec};

/// One stabilizer group (Lagrangian subspace with structural signs); its 2^n
/// sign assignments form a contiguous run of facets.
#[derive(Clone, Debug)]
struct SubspaceBlock {
    /// Canonical generators of the subspace.
    generators: Vec<PauliLabel>,
    /// Label index of the group element for each generator-subset mask;
    /// entry 0 is the identity.
    member_idx: Vec<usize>,
    /// Structural sign of each group element (sign of the product of the
    /// unsigned generators), +1 or -1.
    eta: Vec<i8>,
}

/// The complete facet description of the polytope for a fixed qubit count.
pub struct FacetSystem {
    n: usize,
    dim: usize,
    block_size: usize,
    blocks: Vec<SubspaceBlock>,
    bootstrap: OnceLock<VertexLp>,
}

impl FacetSystem {
    pub fn build(n: usize) -> Result<FacetSystem> {
        let lagrangians = enumerate_lagrangians(n)?;
        let block_size = 1usize << n;
        let mut blocks = Vec::with_capacity(lagrangians.len());
        for basis in lagrangians {
            let mut member_idx = vec![0usize; block_size];
            let mut eta = vec![1i8; block_size];
            let mut elements = vec![SignedPauli::positive(PauliLabel::zero(n)); block_size];
            for mask in 1..block_size {
                let low = mask.trailing_zeros() as usize;
                let rest = mask & (mask - 1);
                let gen = SignedPauli::positive(basis[low]);
                let el = commuting_product(&elements[rest], &gen)?;
                elements[mask] = el;
                member_idx[mask] = el.label.index();
                eta[mask] = if el.sign == 1 { -1 } else { 1 };
            }
            blocks.push(SubspaceBlock { generators: basis, member_idx, eta });
        }
        Ok(FacetSystem {
            n,
            dim: (1usize << (2 * n)) - 1,
            block_size,
            blocks,
            bootstrap: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Ambient affine dimension 4^n - 1.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facet_count(&self) -> usize {
        self.blocks.len() * self.block_size
    }

    /// The stabilizer group of facet `j` in canonical form.
    pub fn facet_group(&self, j: usize) -> Result<StabilizerGroupSpec> {
        if j >= self.facet_count() {
            return Err(Error::Domain(format!("facet index {j} out of range")));
        }
        let (block, signs) = (j / self.block_size, (j % self.block_size) as u32);
        let block = &self.blocks[block];
        StabilizerGroupSpec::new(
            block
                .generators
                .iter()
                .enumerate()
                .map(|(k, label)| SignedPauli::new(((signs >> k) & 1) as u8, *label))
                .collect(),
        )
    }

    /// The rank-1 projector of facet `j` as a coefficient vector.
    pub fn facet_projector(&self, j: usize) -> Result<HermOp> {
        if j >= self.facet_count() {
            return Err(Error::Domain(format!("facet index {j} out of range")));
        }
        let (bi, signs) = (j / self.block_size, (j % self.block_size) as u32);
        let block = &self.blocks[bi];
        let w = crate::scalar::ratio(1, 1i64 << self.n);
        let mut coeffs = BTreeMap::new();
        for mask in 0..self.block_size {
            let sign = block.eta[mask] as i64 * character(mask as u32, signs);
            let label = PauliLabel::from_index(self.n, block.member_idx[mask])?;
            let value = if sign >= 0 { w.clone() } else { -w.clone() };
            coeffs.insert(label, QSqrt2::from_rational(value));
        }
        HermOp::from_coeffs(self.n, coeffs)
    }

    /// Scaled facet values `2^n Tr(sigma_j X)` for all facets, given the dense
    /// expectation vector of X (entry 0 = 1).
    pub fn facet_values_q(&self, xi: &[QSqrt2]) -> Vec<QSqrt2> {
        let outputs = map_blocks(&self.blocks, |block| {
            let mut buf: Vec<QSqrt2> = (0..self.block_size)
                .map(|mask| {
                    let v = &xi[block.member_idx[mask]];
                    if block.eta[mask] < 0 {
                        -v
                    } else {
                        v.clone()
                    }
                })
                .collect();
            wht_in_place(&mut buf);
            buf
        });
        outputs.into_iter().flatten().collect()
    }

    /// Same over exact rationals (used by the vertex walk).
    pub fn facet_values_rational(&self, xi: &[Rational]) -> Vec<Rational> {
        let outputs = map_blocks(&self.blocks, |block| {
            let mut buf: Vec<Rational> = (0..self.block_size)
                .map(|mask| {
                    let v = &xi[block.member_idx[mask]];
                    if block.eta[mask] < 0 {
                        -v.clone()
                    } else {
                        v.clone()
                    }
                })
                .collect();
            wht_in_place(&mut buf);
            buf
        });
        outputs.into_iter().flatten().collect()
    }

    /// Facet values as integer numerators over a shared denominator: input
    /// coordinates `coords/den` (coordinate k is the expectation of label
    /// k+1), output `F_j` with true value `F_j/den`.
    fn facet_values_scaled(&self, coords: &[BigInt], den: &BigInt) -> Vec<BigInt> {
        let outputs = map_blocks(&self.blocks, |block| {
            let mut buf: Vec<BigInt> = (0..self.block_size)
                .map(|mask| {
                    if mask == 0 {
                        den.clone()
                    } else {
                        let v = &coords[block.member_idx[mask] - 1];
                        if block.eta[mask] < 0 {
                            -v
                        } else {
                            v.clone()
                        }
                    }
                })
                .collect();
            wht_in_place(&mut buf);
            buf
        });
        outputs.into_iter().flatten().collect()
    }

    /// Inner products `u_j . d` of all facet linear parts with a direction.
    fn facet_dots(&self, dir: &[BigInt]) -> Vec<BigInt> {
        let outputs = map_blocks(&self.blocks, |block| {
            let mut buf: Vec<BigInt> = (0..self.block_size)
                .map(|mask| {
                    if mask == 0 {
                        BigInt::zero()
                    } else {
                        let v = &dir[block.member_idx[mask] - 1];
                        if block.eta[mask] < 0 {
                            -v
                        } else {
                            v.clone()
                        }
                    }
                })
                .collect();
            wht_in_place(&mut buf);
            buf
        });
        outputs.into_iter().flatten().collect()
    }

    /// Dense integer normal row (linear part) of facet `j`.
    fn normal_row(&self, j: usize) -> Vec<BigInt> {
        let mut row = vec![BigInt::zero(); self.dim];
        for (coord, sign) in self.normal_sparse(j) {
            row[coord] = BigInt::from(sign);
        }
        row
    }

    /// Sparse normal of facet `j`: `(coordinate, +-1)` pairs; 2^n - 1 entries.
    fn normal_sparse(&self, j: usize) -> Vec<(usize, i8)> {
        let (bi, signs) = (j / self.block_size, (j % self.block_size) as u32);
        let block = &self.blocks[bi];
        (1..self.block_size)
            .map(|mask| {
                let sign = block.eta[mask] as i64 * character(mask as u32, signs);
                (block.member_idx[mask] - 1, sign as i8)
            })
            .collect()
    }

    /// Scaled facet values over binary64 coordinates.
    fn facet_values_f64(&self, xi: &[f64]) -> Vec<f64> {
        let outputs = map_blocks(&self.blocks, |block| {
            let mut buf: Vec<f64> = (0..self.block_size)
                .map(|mask| {
                    let v = xi[block.member_idx[mask]];
                    if block.eta[mask] < 0 {
                        -v
                    } else {
                        v
                    }
                })
                .collect();
            wht_in_place(&mut buf);
            buf
        });
        outputs.into_iter().flatten().collect()
    }

    /// Inner products of all facet linear parts with a float direction
    /// (entry 0 of `dir_full` must be 0).
    fn facet_dots_f64(&self, dir_full: &[f64]) -> Vec<f64> {
        self.facet_values_f64(dir_full)
    }

    /// Exact scaled facet value of facet `j` at a point given without the
    /// identity slot.
    fn exact_facet_value_q(&self, j: usize, point: &[QSqrt2]) -> QSqrt2 {
        let (bi, signs) = (j / self.block_size, (j % self.block_size) as u32);
        let block = &self.blocks[bi];
        let mut acc = QSqrt2::one(); // identity term, eta = +1, character = +1
        for mask in 1..self.block_size {
            let v = &point[block.member_idx[mask] - 1];
            if block.eta[mask] as i64 * character(mask as u32, signs) > 0 {
                acc += v;
            } else {
                acc -= v;
            }
        }
        acc
    }

    fn exact_facet_value_rational(&self, j: usize, coords: &[Rational]) -> Rational {
        let (bi, signs) = (j / self.block_size, (j % self.block_size) as u32);
        let block = &self.blocks[bi];
        let mut acc = Rational::one();
        for mask in 1..self.block_size {
            let v = &coords[block.member_idx[mask] - 1];
            if block.eta[mask] as i64 * character(mask as u32, signs) > 0 {
                acc += v;
            } else {
                acc -= v;
            }
        }
        acc
    }

    /// Exact inner product of one facet normal with an integer direction.
    fn exact_dot(&self, j: usize, d: &[BigInt]) -> BigInt {
        let mut acc = BigInt::zero();
        for (coord, sign) in self.normal_sparse(j) {
            if sign > 0 {
                acc += &d[coord];
            } else {
                acc -= &d[coord];
            }
        }
        acc
    }

    /// Exact overlap `Tr(sigma_j X)`.
    pub fn facet_value(&self, j: usize, x: &HermOp) -> Result<QSqrt2> {
        if x.n() != self.n {
            return Err(Error::Domain("operator dimension mismatch".into()));
        }
        self.facet_projector(j)?.trace_inner(x)
    }

    /// Exact membership: all facet values nonnegative.
    pub fn membership(&self, x: &HermOp) -> Result<bool> {
        if x.n() != self.n {
            return Err(Error::Domain("operator dimension mismatch".into()));
        }
        let xi = x.to_xi_vector();
        Ok(self.facet_values_q(&xi).iter().all(|v| v.sign() >= 0))
    }

    /// A deterministic vertex used to seed every simplex run: the level-1
    /// vertex `(I+X+Y+Z)/2` padded with `|0><0|` factors.
    fn bootstrap_point(&self) -> Result<HermOp> {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(PauliLabel::zero(1), QSqrt2::from_ratio(1, 2));
        for kind in ['X', 'Y', 'Z'] {
            coeffs.insert(PauliLabel::single(1, 0, kind)?, QSqrt2::from_ratio(1, 2));
        }
        let mut v = HermOp::from_coeffs(1, coeffs)?;
        for _ in 1..self.n {
            v = v.tensor_zero_state()?;
        }
        Ok(v)
    }

    fn bootstrap_vertex(&self) -> Result<&VertexLp> {
        if let Some(v) = self.bootstrap.get() {
            return Ok(v);
        }
        let point = self.bootstrap_point()?;
        let lp = VertexLp::from_rational_point(self, &herm_to_rational_coords(&point)?)?;
        let _ = self.bootstrap.set(lp);
        Ok(self.bootstrap.get().expect("bootstrap just set"))
    }
}

/// `(-1)^{<mask|signs>}` as i64.
#[inline]
fn character(mask: u32, signs: u32) -> i64 {
    if (mask & signs).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// In-place unnormalized Walsh-Hadamard transform:
/// `out[s] = sum_mask (-1)^{<mask|s>} in[mask]`.
fn wht_in_place<T>(buf: &mut [T])
where
    T: Clone,
    for<'a> T: std::ops::AddAssign<&'a T> + std::ops::SubAssign<&'a T>,
{
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        let mut block = 0;
        while block < n {
            for j in block..block + h {
                let v = buf[j + h].clone();
                let u = buf[j].clone();
                buf[j] += &v;
                buf[j + h] = u;
                buf[j + h] -= &v;
            }
            block += 2 * h;
        }
        h *= 2;
    }
}

fn map_blocks<T, F>(blocks: &[SubspaceBlock], f: F) -> Vec<T>
where
    F: Fn(&SubspaceBlock) -> T + Sync + Send,
    T: Send,
{
    #[cfg(feature = "parallel")]
    {
        blocks.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        blocks.iter().map(f).collect()
    }
}

/// Expectation coordinates of a rational operator (fails on irrational
/// coefficients).
fn herm_to_rational_coords(x: &HermOp) -> Result<Vec<Rational>> {
    let xi = x.to_xi_vector();
    let mut out = Vec::with_capacity(xi.len() - 1);
    for v in xi.iter().skip(1) {
        out.push(v.as_rational()?.clone());
    }
    Ok(out)
}

/// A feasible simplex basis at a vertex: `dim` facet rows with an exact
/// scaled inverse, the vertex coordinates, and all facet values over one
/// common denominator.
#[derive(Clone)]
pub struct VertexLp {
    /// Facet index of each basis row.
    basis: Vec<usize>,
    /// `m = den * U_B^{-1}` (row-major); `den > 0`.
    m: Vec<Vec<BigInt>>,
    den: BigInt,
    /// Vertex coordinates scaled by `den`.
    coords: Vec<BigInt>,
    /// Facet value numerators over `den`, all nonnegative.
    fvals: Vec<BigInt>,
}

const MAX_PIVOTS: usize = 200_000;
/// Consecutive degenerate pivots tolerated under the steepest-rate rule
/// before switching to the Bland rule (which cannot cycle).
const STALL_LIMIT: usize = 40;

/// Global pivot counter surfaced by the LAMBDASIM_TRACE diagnostics.
static PIVOT_COUNT: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);

impl VertexLp {
    /// Build the basis state at a claimed vertex given by exact rational
    /// coordinates. Fails if the point is outside the polytope or its tight
    /// facets do not have full rank.
    fn from_rational_point(sys: &FacetSystem, point: &[Rational]) -> Result<VertexLp> {
        if point.len() != sys.dim {
            return Err(Error::Domain("coordinate length mismatch".into()));
        }
        let mut xi = Vec::with_capacity(sys.dim + 1);
        xi.push(Rational::one());
        xi.extend_from_slice(point);
        let fvals_exact = sys.facet_values_rational(&xi);
        let mut tight_rows = Vec::new();
        let mut tight_ids = Vec::new();
        for (j, v) in fvals_exact.iter().enumerate() {
            if v.is_negative() {
                return Err(Error::Geometry("claimed vertex violates a facet".into()));
            }
            if v.is_zero() {
                tight_rows.push(sys.normal_row(j));
                tight_ids.push(j);
            }
        }
        let (chosen, rank) = independent_rows(&tight_rows);
        if rank != sys.dim {
            return Err(Error::Geometry(format!(
                "point is not a vertex: tight rank {rank} < {}",
                sys.dim
            )));
        }
        let rows: Vec<Vec<BigInt>> = chosen.iter().map(|&i| tight_rows[i].clone()).collect();
        let basis: Vec<usize> = chosen.iter().map(|&i| tight_ids[i]).collect();
        let (m, den) = integer_inverse(&rows)?;
        let mut lp = VertexLp { basis, m, den, coords: Vec::new(), fvals: Vec::new() };
        lp.refresh(sys);
        Ok(lp)
    }

    /// Recompute coordinates and facet values from the basis inverse.
    fn refresh(&mut self, sys: &FacetSystem) {
        let d = sys.dim;
        self.coords = (0..d).map(|r| -self.m[r].iter().sum::<BigInt>()).collect();
        self.fvals = sys.facet_values_scaled(&self.coords, &self.den);
        debug_assert!(
            self.fvals.iter().all(|f| !f.is_negative()),
            "infeasible basis point"
        );
    }

    /// Column `c` of the scaled inverse: the edge direction that releases
    /// basis row `c` while keeping the others tight.
    fn direction(&self, c: usize) -> Vec<BigInt> {
        self.m.iter().map(|row| row[c].clone()).collect()
    }

    /// Exact rational coordinates of the current vertex.
    pub fn rational_coords(&self) -> Vec<Rational> {
        self.coords
            .iter()
            .map(|v| Rational::new(v.clone(), self.den.clone()))
            .collect()
    }

    pub fn to_herm(&self, sys: &FacetSystem) -> Result<HermOp> {
        let mut xi = Vec::with_capacity(sys.dim + 1);
        xi.push(QSqrt2::one());
        for v in &self.coords {
            xi.push(QSqrt2::from_rational(Rational::new(v.clone(), self.den.clone())));
        }
        HermOp::from_xi_vector(sys.n, &xi)
    }

    /// One simplex pivot for a fixed objective. `gain(c)` scores releasing
    /// basis position `c`: positive means improving; under the Bland rule the
    /// column with the smallest basis facet id among improving columns is
    /// taken, otherwise the one with the largest score (steepest rate). The
    /// ratio test treats `locked` facets as equalities. Returns false at the
    /// optimum, `Some(true)` in the degenerate-step flag when t* = 0.
    fn pivot_step<F>(
        &mut self,
        sys: &FacetSystem,
        locked: &[bool],
        bland: bool,
        gain: F,
    ) -> Result<Option<bool>>
    where
        F: Fn(&Self, usize) -> BigInt,
    {
        let d = sys.dim;
        let mut leave: Option<(usize, usize, BigInt)> = None; // (facet id, position, score)
        for c in 0..d {
            if locked[self.basis[c]] {
                continue;
            }
            let score = gain(self, c);
            if !score.is_positive() {
                continue;
            }
            let id = self.basis[c];
            let better = match &leave {
                None => true,
                Some((bid, _, bscore)) => {
                    if bland {
                        id < *bid
                    } else {
                        match score.cmp(bscore) {
                            std::cmp::Ordering::Greater => true,
                            std::cmp::Ordering::Less => false,
                            std::cmp::Ordering::Equal => id < *bid,
                        }
                    }
                }
            };
            if better {
                leave = Some((id, c, score));
            }
        }
        let Some((_, col, _)) = leave else {
            return Ok(None);
        };
        let dir = self.direction(col);
        let dots = sys.facet_dots(&dir);
        // Ratio test: smallest t >= 0 at which a facet blocks, ties broken by
        // smallest facet index. Locked facets block at t = 0 in either
        // direction (their value is pinned at zero).
        let mut best: Option<(usize, BigInt, BigInt)> = None; // (facet, f, step_den)
        for (j, dot) in dots.iter().enumerate() {
            let blocking = if locked[j] { !dot.is_zero() } else { dot.is_negative() };
            if !blocking {
                continue;
            }
            let f = &self.fvals[j];
            debug_assert!(!locked[j] || f.is_zero());
            let step_den = dot.abs();
            let better = match &best {
                None => true,
                Some((bj, bf, bden)) => match (f * bden).cmp(&(bf * &step_den)) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Greater => false,
                    std::cmp::Ordering::Equal => j < *bj,
                },
            };
            if better {
                best = Some((j, f.clone(), step_den));
            }
        }
        let Some((enter, f_enter, _)) = best else {
            return Err(Error::Internal(
                "simplex direction unbounded in a bounded polytope".into(),
            ));
        };
        let degenerate = f_enter.is_zero();
        self.pivot(sys, col, enter, &dots);
        Ok(Some(degenerate))
    }

    /// Replace basis row `col` by facet `enter`, updating the scaled inverse
    /// with the integer-preserving rule: with `r = u_enter^T m` and
    /// `alpha = r[col]`, the new inverse columns are
    /// `(alpha * m_c - r_c * m_col) / den` (exact division), the new
    /// denominator is `|alpha|`. Coordinates and facet values follow the
    /// affine step `x' = x + t* d` incrementally using the precomputed dots.
    fn pivot(&mut self, sys: &FacetSystem, col: usize, enter: usize, dots: &[BigInt]) {
        PIVOT_COUNT.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let d = sys.dim;
        let u = sys.normal_sparse(enter);
        let r: Vec<BigInt> = (0..d)
            .map(|c| {
                let mut acc = BigInt::zero();
                for (k, sign) in &u {
                    if *sign > 0 {
                        acc += &self.m[*k][c];
                    } else {
                        acc -= &self.m[*k][c];
                    }
                }
                acc
            })
            .collect();
        let alpha = r[col].clone();
        debug_assert!(!alpha.is_zero(), "entering row parallel to the basis");
        debug_assert_eq!(alpha, dots[enter]);
        let old_den = std::mem::replace(&mut self.den, alpha.abs());
        let negate = alpha.is_negative();
        let pivot_col: Vec<BigInt> = self.direction(col);
        update_rows(&mut self.m, |row_idx, row| {
            let mcol = &pivot_col[row_idx];
            for (c, val) in row.iter_mut().enumerate() {
                if c == col {
                    continue;
                }
                let num = &alpha * &*val - &r[c] * mcol;
                *val = num / &old_den;
                if negate {
                    *val = -std::mem::take(val);
                }
            }
            if negate {
                row[col] = -std::mem::take(&mut row[col]);
            }
        });
        self.basis[col] = enter;
        // Step length in real units is t* = F_enter / (-alpha); for a locked
        // entering facet F_enter = 0 and the point is unchanged up to rescale.
        let f_enter = self.fvals[enter].clone();
        let new_den = self.den.clone();
        let move_term = !f_enter.is_zero();
        #[cfg(feature = "parallel")]
        let coord_iter = self.coords.par_iter_mut();
        #[cfg(not(feature = "parallel"))]
        let coord_iter = self.coords.iter_mut();
        coord_iter.zip(&pivot_col).for_each(|(x, mc)| {
            let mut num = &*x * &new_den;
            if move_term {
                num += &f_enter * mc;
            }
            *x = num / &old_den;
        });
        #[cfg(feature = "parallel")]
        let fv_iter = self.fvals.par_iter_mut();
        #[cfg(not(feature = "parallel"))]
        let fv_iter = self.fvals.iter_mut();
        fv_iter.zip(dots).for_each(|(f, dot)| {
            let mut num = &*f * &new_den;
            if move_term {
                num += &f_enter * dot;
            }
            *f = num / &old_den;
        });
        debug_assert!(self.fvals.iter().all(|f| !f.is_negative()), "pivot left feasibility");
        debug_assert!(self.fvals[enter].is_zero());
    }

    /// Phase 1: drive the vertex onto the face where every facet in `active`
    /// is tight, locking each achieved facet as an equality. Facets that are
    /// already tight lock immediately so later pivots cannot disturb them.
    fn drive_to_face(&mut self, sys: &FacetSystem, active: &[usize]) -> Result<Vec<bool>> {
        let mut locked = vec![false; sys.facet_count()];
        let mut targets: Vec<usize> = active.to_vec();
        targets.sort_unstable();
        targets.dedup();
        let mut pending: Vec<usize> = Vec::new();
        for &a in &targets {
            if self.fvals[a].is_zero() {
                locked[a] = true;
            } else {
                pending.push(a);
            }
        }
        for &a in &pending {
            let u = sys.normal_sparse(a);
            let mut pivots = 0usize;
            let mut stall = 0usize;
            while !self.fvals[a].is_zero() {
                // decrease rate of f_a along direction c is -(u_a . dir_c);
                // steepest rate first, Bland once degenerate pivots stall
                let step = self.pivot_step(sys, &locked, stall > STALL_LIMIT, |lp, c| {
                    let mut dot = BigInt::zero();
                    for (k, sign) in &u {
                        if *sign > 0 {
                            dot += &lp.m[*k][c];
                        } else {
                            dot -= &lp.m[*k][c];
                        }
                    }
                    -dot
                })?;
                match step {
                    None => {
                        return Err(Error::Geometry(format!(
                            "face is empty: facet {a} cannot be made tight"
                        )))
                    }
                    Some(true) => stall += 1,
                    Some(false) => stall = 0,
                }
                pivots += 1;
                if pivots > MAX_PIVOTS {
                    return Err(Error::Internal("pivot limit exceeded in phase 1".into()));
                }
            }
            locked[a] = true;
        }
        Ok(locked)
    }

    /// Phase 2: maximization of an integer objective over the locked face,
    /// steepest rate with the Bland fallback on stalls.
    fn maximize(&mut self, sys: &FacetSystem, locked: &[bool], objective: &[BigInt]) -> Result<()> {
        let mut pivots = 0usize;
        let mut stall = 0usize;
        loop {
            let step = self.pivot_step(sys, locked, stall > STALL_LIMIT, |lp, c| {
                (0..sys.dim).map(|k| &objective[k] * &lp.m[k][c]).sum()
            })?;
            match step {
                None => return Ok(()),
                Some(true) => stall += 1,
                Some(false) => stall = 0,
            }
            pivots += 1;
            if pivots > MAX_PIVOTS {
                return Err(Error::Internal("pivot limit exceeded in phase 2".into()));
            }
        }
    }
}

fn update_rows<F>(m: &mut [Vec<BigInt>], f: F)
where
    F: Fn(usize, &mut Vec<BigInt>) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        m.par_iter_mut().enumerate().for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        m.iter_mut().enumerate().for_each(|(i, row)| f(i, row));
    }
}

/// Find a vertex of the polytope on the face where all `active` facets are
/// tight, then maximize `objective` (when given) over that face with Bland
/// pivoting. Deterministic for fixed inputs.
pub fn find_vertex(
    sys: &FacetSystem,
    active: &[usize],
    objective: Option<&[BigInt]>,
) -> Result<HermOp> {
    let mut lp = sys.bootstrap_vertex()?.clone();
    let locked = lp.drive_to_face(sys, active)?;
    if let Some(obj) = objective {
        if obj.len() != sys.dim {
            return Err(Error::Domain("objective length mismatch".into()));
        }
        lp.maximize(sys, &locked, obj)?;
    }
    lp.to_herm(sys)
}

/// A sparse convex combination of polytope vertices.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub terms: Vec<(HermOp, QSqrt2)>,
}

impl Decomposition {
    pub fn support(&self) -> usize {
        self.terms.len()
    }

    pub fn total_weight(&self) -> QSqrt2 {
        let mut acc = QSqrt2::zero();
        for (_, w) in &self.terms {
            acc += w;
        }
        acc
    }

    /// Exact reconstruction: sum of weighted vertices, coefficient-wise.
    pub fn reconstruct(&self) -> Result<HermOp> {
        let n = self
            .terms
            .first()
            .map(|(v, _)| v.n())
            .ok_or_else(|| Error::Internal("empty decomposition".into()))?;
        let size = 1usize << (2 * n);
        let mut xi = vec![QSqrt2::zero(); size];
        for (v, w) in &self.terms {
            for (idx, value) in v.to_xi_vector().into_iter().enumerate() {
                if !value.is_zero() {
                    xi[idx] += &(&value * w);
                }
            }
        }
        HermOp::from_xi_vector(n, &xi)
    }

    /// Map every vertex through `f`, keeping weights.
    pub fn map_vertices<F>(&self, mut f: F) -> Result<Decomposition>
    where
        F: FnMut(&HermOp) -> Result<HermOp>,
    {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (v, w) in &self.terms {
            terms.push((f(v)?, w.clone()));
        }
        Ok(Decomposition { terms })
    }
}

/// Incrementally maintained reduced row-echelon basis over the rationals,
/// stored as gcd-normalized integer rows with distinct pivot columns.
struct EchelonBasis {
    dim: usize,
    rows: Vec<(usize, Vec<BigInt>)>,
    is_pivot: Vec<bool>,
}

impl EchelonBasis {
    fn new(dim: usize) -> Self {
        EchelonBasis { dim, rows: Vec::new(), is_pivot: vec![false; dim] }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduce and insert a row; returns true when the rank grew.
    fn add(&mut self, mut row: Vec<BigInt>) -> bool {
        for (pc, r) in &self.rows {
            if !row[*pc].is_zero() {
                // row := row * r[pc] - r * row[pc], fraction-free
                let a = r[*pc].clone();
                let b = row[*pc].clone();
                for (x, y) in row.iter_mut().zip(r) {
                    *x = &*x * &a - y * &b;
                }
            }
        }
        let Some(pivot) = (0..self.dim).find(|&c| !row[c].is_zero()) else {
            return false;
        };
        normalize_gcd(&mut row);
        // eliminate the new pivot column from existing rows
        for (_, r) in self.rows.iter_mut() {
            if !r[pivot].is_zero() {
                let a = row[pivot].clone();
                let b = r[pivot].clone();
                for (x, y) in r.iter_mut().zip(&row) {
                    *x = &*x * &a - y * &b;
                }
                normalize_gcd(r);
            }
        }
        self.is_pivot[pivot] = true;
        self.rows.push((pivot, row));
        true
    }

    fn first_free_column(&self) -> Option<usize> {
        (0..self.dim).find(|&c| !self.is_pivot[c])
    }

    /// Integer null-space direction with a positive entry (up to scale) at
    /// `free`.
    fn null_direction(&self, free: usize) -> Vec<BigInt> {
        // d[free] = lcm of the pivot entries; d[pc] = -row[free] * (L / row[pc])
        let mut l = BigInt::one();
        for (pc, r) in &self.rows {
            if !r[free].is_zero() {
                l = num_integer::Integer::lcm(&l, &r[*pc].abs());
            }
        }
        let mut d = vec![BigInt::zero(); self.dim];
        d[free] = l.clone();
        for (pc, r) in &self.rows {
            if !r[free].is_zero() {
                d[*pc] = -(&r[free] * (&l / &r[*pc]));
            }
        }
        normalize_gcd(&mut d);
        d
    }
}

fn normalize_gcd(row: &mut [BigInt]) {
    use num_integer::Integer;
    let mut g = BigInt::zero();
    for v in row.iter() {
        if !v.is_zero() {
            g = g.gcd(v);
            if g.is_one() {
                return;
            }
        }
    }
    if g.is_zero() || g.is_one() {
        return;
    }
    for v in row.iter_mut() {
        *v = &*v / &g;
    }
}

/// Uncertainty band for float screens over facet arrays. Fresh transforms are
/// accurate to ~1e-13 on O(1) data, so anything inside the band is resolved
/// with exact arithmetic and anything outside is sign-reliable.
const ZERO_BAND: f64 = 1e-7;
/// Relative slack when collecting ratio-test candidates for exact comparison.
const RATIO_SLACK: f64 = 1e-6;

/// Descend from a point of the polytope to a vertex of its minimal face by
/// repeated boundary moves inside the null space of the tight normals. Each
/// move adds at least one independent tight facet, so at most `dim` moves
/// happen.
///
/// The point, step lengths and the result are exact; the per-facet arrays are
/// float screens whose borderline entries fall back to exact evaluation.
fn crash_to_vertex(
    sys: &FacetSystem,
    point: &[QSqrt2],
    fv_float_start: &[f64],
) -> Result<Vec<Rational>> {
    let dim = sys.dim;
    let mut p = point.to_vec();
    let mut fv = fv_float_start.to_vec();
    let mut elim = EchelonBasis::new(dim);
    // Exact tight set of the start point, screened by the float band.
    for (j, approx) in fv.iter().enumerate() {
        if approx.abs() < ZERO_BAND && sys.exact_facet_value_q(j, &p).is_zero() {
            elim.add(sys.normal_row(j));
        }
    }
    let mut moves = 0usize;
    while elim.rank() < dim {
        let free = elim
            .first_free_column()
            .ok_or_else(|| Error::Internal("rank bookkeeping out of sync".into()))?;
        let mut d = elim.null_direction(free);
        let d_float: Vec<f64> = d.iter().map(big_to_f64).collect();
        let dot_scale: f64 = d_float.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        let mut dir_full = vec![0.0];
        dir_full.extend_from_slice(&d_float);
        let mut dots = sys.facet_dots_f64(&dir_full);
        // Orient toward a blocking facet; a bounded polytope blocks at least
        // one of the two directions. The screen only needs confident signs.
        let dot_band = ZERO_BAND * dot_scale;
        let blocks_somewhere = |dots: &[f64], fv: &[f64]| {
            dots.iter().zip(fv).any(|(dot, f)| *dot < -dot_band && *f > ZERO_BAND)
        };
        if !blocks_somewhere(&dots, &fv) {
            for v in d.iter_mut() {
                *v = -std::mem::take(v);
            }
            for v in dots.iter_mut() {
                *v = -*v;
            }
            if !blocks_somewhere(&dots, &fv) {
                return Err(Error::Internal("crash direction unbounded both ways".into()));
            }
        }
        // Float ratio screen: t_j = f_j / (-dot_j) over confidently
        // decreasing facets, then exact comparison among near-minimal and
        // uncertain candidates.
        let mut t_min = f64::INFINITY;
        for (j, dot) in dots.iter().enumerate() {
            if *dot < -dot_band {
                let f = fv[j];
                if f > ZERO_BAND {
                    t_min = t_min.min(f / -dot);
                } else {
                    t_min = 0.0_f64.min(t_min);
                }
            }
        }
        let threshold = t_min * (1.0 + RATIO_SLACK) + 1e-12;
        let mut best: Option<(usize, QSqrt2, BigInt)> = None; // (facet, f exact, -dot exact)
        for (j, dot) in dots.iter().enumerate() {
            let uncertain = dot.abs() <= dot_band || fv[j].abs() <= ZERO_BAND;
            let candidate = (*dot < -dot_band && fv[j] / -dot <= threshold) || uncertain;
            if !candidate {
                continue;
            }
            let exact_dot = sys.exact_dot(j, &d);
            if !exact_dot.is_negative() {
                continue;
            }
            let f_exact = sys.exact_facet_value_q(j, &p);
            match f_exact.sign() {
                -1 => return Err(Error::Internal("crash point outside the polytope".into())),
                0 => continue, // tight rows are in the elimination span; dot would be 0
                _ => {}
            }
            let neg = -exact_dot;
            let better = match &best {
                None => true,
                Some((bj, bf, bneg)) => {
                    // f_j/neg_j < bf/bneg  <=>  f_j * bneg - bf * neg_j < 0
                    let lhs = scale_qs2(&f_exact, bneg);
                    let rhs = scale_qs2(bf, &neg);
                    match (&lhs - &rhs).sign() {
                        -1 => true,
                        0 => j < *bj,
                        _ => false,
                    }
                }
            };
            if better {
                best = Some((j, f_exact, neg));
            }
        }
        let Some((enter, t_num, t_den)) = best else {
            return Err(Error::Internal("crash ratio test found no blocker".into()));
        };
        let t = t_num.checked_div(&QSqrt2::from_rational(Rational::from_integer(t_den)))?;
        let t_f = t.to_f64()?;
        for (pk, dk) in p.iter_mut().zip(&d) {
            if !dk.is_zero() {
                *pk += &scale_qs2(&t, dk);
            }
        }
        for (f, dot) in fv.iter_mut().zip(&dots) {
            *f += t_f * dot;
        }
        // Newly tight facets: the entering one exactly, plus any tie inside
        // the band that verifies exactly.
        let mut grew = elim.add(sys.normal_row(enter));
        fv[enter] = 0.0;
        for (j, f) in fv.iter_mut().enumerate() {
            if j != enter && f.abs() < ZERO_BAND {
                let exact = sys.exact_facet_value_q(j, &p);
                match exact.sign() {
                    -1 => return Err(Error::Internal("crash move left the polytope".into())),
                    0 => {
                        *f = 0.0;
                        grew |= elim.add(sys.normal_row(j));
                    }
                    _ => {}
                }
            }
        }
        if !grew {
            return Err(Error::Internal("crash move did not grow the tight rank".into()));
        }
        moves += 1;
        if moves > dim {
            return Err(Error::Internal("crash exceeded the dimension bound".into()));
        }
    }
    let coords: Result<Vec<Rational>> = p.iter().map(|v| Ok(v.as_rational()?.clone())).collect();
    coords
}

fn scale_qs2(v: &QSqrt2, k: &BigInt) -> QSqrt2 {
    let kr = Rational::from_integer(k.clone());
    QSqrt2::new(&v.a * &kr, &v.b * &kr)
}

fn big_to_f64(v: &BigInt) -> f64 {
    crate::scalar::rational_to_f64(&Rational::from_integer(v.clone())).unwrap_or(f64::INFINITY)
}

/// Exact Caratheodory decomposition of a polytope member into at most
/// `4^n` vertices.
///
/// Walk: descend from the current point to a vertex of its minimal face,
/// shoot the ray from that vertex through the point to the boundary, record
/// the convex weight, and recurse on the boundary point. Every step adds at
/// least one independent tight facet, so the support stays within
/// dimension + 1; ties add several facets at once and only accelerate the
/// descent.
pub fn caratheodory_decompose(x: &HermOp, sys: &FacetSystem) -> Result<Decomposition> {
    if x.n() != sys.n {
        return Err(Error::Domain("operator dimension mismatch".into()));
    }
    let full = x.to_xi_vector();
    let mut point: Vec<QSqrt2> = full[1..].to_vec();
    let mut fvals = sys.facet_values_q(&full);
    if fvals.iter().any(|v| v.sign() < 0) {
        return Err(Error::Geometry("operator is outside the polytope".into()));
    }
    let mut remaining = QSqrt2::one();
    let mut terms: Vec<(HermOp, QSqrt2)> = Vec::new();
    let max_terms = sys.dim + 1;
    let trace = std::env::var_os("LAMBDASIM_TRACE").is_some();
    let t_start = std::time::Instant::now();
    for round in 0..=max_terms {
        if trace {
            let tight = fvals.iter().filter(|v| v.is_zero()).count();
            eprintln!(
                "[decompose n={}] round {round}: tight={tight} terms={} elapsed={:?}",
                sys.n,
                terms.len(),
                t_start.elapsed()
            );
        }
        let (vertex_coords, vertex_fvals) = crash_to_vertex(sys, &point, &fvals)?;
        // If the current point equals the found vertex the walk terminates.
        let equal = point.iter().zip(&vertex_coords).all(|(p, v)| {
            p.is_rational() && p.as_rational().map(|r| r == v).unwrap_or(false)
        });
        if equal {
            terms.push((vertex_to_herm(sys, &vertex_coords)?, remaining));
            return Ok(Decomposition { terms });
        }
        // Ray from the vertex v through the point y:
        // f_j(t) = f_v[j] + t (f_y[j] - f_v[j]). Every facet tight at y is
        // tight at v, so the exit parameter t* is strictly greater than 1.
        let mut best: Option<(usize, QSqrt2, QSqrt2)> = None; // (facet, f_v, f_v - f_y)
        for (j, fy) in fvals.iter().enumerate() {
            let fv = QSqrt2::from_rational(vertex_fvals[j].clone());
            let delta = &fv - fy;
            if delta.sign() <= 0 {
                continue; // not decreasing along the ray
            }
            let better = match &best {
                None => true,
                Some((bj, bfv, bdelta)) => {
                    // t_j = f_v/delta; compare f_v * bdelta vs bf_v * delta
                    match (&(&fv * bdelta) - &(bfv * &delta)).sign() {
                        -1 => true,
                        0 => j < *bj,
                        _ => false,
                    }
                }
            };
            if better {
                best = Some((j, fv, delta));
            }
        }
        let Some((_, t_num, t_den)) = best else {
            return Err(Error::Internal("decomposition ray never exits".into()));
        };
        // t* = t_num/t_den >= 1; the vertex weight is remaining * (1 - 1/t*).
        let t = t_num.checked_div(&t_den)?;
        let inv_t = t.inv()?;
        let weight = &remaining * &(&QSqrt2::one() - &inv_t);
        if weight.sign() <= 0 {
            return Err(Error::Internal("nonpositive Caratheodory weight".into()));
        }
        terms.push((vertex_to_herm(sys, &vertex_coords)?, weight));
        remaining = &remaining * &inv_t;
        // Advance the point: y' = v + t (y - v); facet values follow the same
        // affine rule.
        for (p, v) in point.iter_mut().zip(&vertex_coords) {
            let vq = QSqrt2::from_rational(v.clone());
            let step = &*p - &vq;
            *p = &vq + &(&t * &step);
        }
        for (j, fy) in fvals.iter_mut().enumerate() {
            let fv = QSqrt2::from_rational(vertex_fvals[j].clone());
            let step = &*fy - &fv;
            *fy = &fv + &(&t * &step);
            debug_assert!(fy.sign() >= 0);
        }
    }
    Err(Error::Internal(
        "Caratheodory walk exceeded the dimension bound".into(),
    ))
}

fn vertex_to_herm(sys: &FacetSystem, coords: &[Rational]) -> Result<HermOp> {
    let mut xi = Vec::with_capacity(sys.dim + 1);
    xi.push(QSqrt2::one());
    xi.extend(coords.iter().map(|r| QSqrt2::from_rational(r.clone())));
    HermOp::from_xi_vector(sys.n, &xi)
}

/// Verify that an operator is a polytope vertex: a member whose tight facet
/// normals have full rank.
pub fn is_vertex(x: &HermOp, sys: &FacetSystem) -> Result<bool> {
    let xi = x.to_xi_vector();
    let fvals = sys.facet_values_q(&xi);
    let mut tight_rows = Vec::new();
    for (j, v) in fvals.iter().enumerate() {
        match v.sign() {
            -1 => return Ok(false),
            0 => tight_rows.push(sys.normal_row(j)),
            _ => {}
        }
    }
    Ok(integer_rank(&tight_rows) == sys.dim)
}

/// Post-measurement branch data for one outcome.
#[derive(Clone, Debug)]
pub struct BranchUpdate {
    pub prob: QSqrt2,
    /// Renormalized post-measurement operator.
    pub state: HermOp,
    /// Decomposition into vertices at the full level.
    pub decomposition: Decomposition,
    /// Retired-qubit form: the completion Clifford and the decomposition of
    /// the reduced state one level down (absent at n = 1 or when reduction
    /// is disabled).
    pub reduced: Option<(CliffordTableau, Decomposition)>,
}

/// Outcome probabilities and branch decompositions of a Pauli measurement.
#[derive(Clone, Debug)]
pub struct MeasurementUpdate {
    pub probs: [QSqrt2; 2],
    pub branches: [Option<BranchUpdate>; 2],
}

/// Coefficients of `P_a^s A P_a^s` (unnormalized): the commutant part of `a`
/// survives, averaged with its translate by `a`.
fn project_coeffs(a: &PauliLabel, s: u8, x: &HermOp) -> BTreeMap<PauliLabel, QSqrt2> {
    let mut out: BTreeMap<PauliLabel, QSqrt2> = BTreeMap::new();
    let half = QSqrt2::from_ratio(1, 2);
    for (b, c) in x.coeffs() {
        if symplectic_form_unchecked(a, b) != 0 {
            continue;
        }
        add_coeff(&mut out, *b, &half * c);
        let (target, phi) = label_product(a, b);
        debug_assert!(phi % 2 == 0);
        let mut negative = (phi / 2) % 2 == 1;
        if s == 1 {
            negative = !negative;
        }
        let moved = &half * c;
        add_coeff(&mut out, target, if negative { -moved } else { moved });
    }
    out.retain(|_, v| !v.is_zero());
    out
}

fn add_coeff(map: &mut BTreeMap<PauliLabel, QSqrt2>, label: PauliLabel, value: QSqrt2) {
    use std::collections::btree_map::Entry;
    match map.entry(label) {
        Entry::Vacant(e) => {
            e.insert(value);
        }
        Entry::Occupied(mut e) => {
            *e.get_mut() += &value;
        }
    }
}

/// Retire one qubit from a post-measurement operator: with
/// `g = symplectic_completion(a, s)`, the conjugate `g^dagger A g` factors as
/// `A' (x) |0><0|`; returns `(g, A')`. A failed product form is an internal
/// consistency error.
pub fn dimension_reduce(a: &PauliLabel, s: u8, x: &HermOp) -> Result<(CliffordTableau, HermOp)> {
    let n = x.n();
    if a.n() != n || a.is_zero() {
        return Err(Error::Domain("invalid measurement label for reduction".into()));
    }
    if n < 2 {
        return Err(Error::Domain("reduction needs at least two qubits".into()));
    }
    let g = symplectic_completion(a, s)?;
    let rotated = x.conjugated(&g.inverse())?;
    // Expect support only on labels acting as I or Z on the last qubit, in
    // equal pairs c_(b,I) = c_(b,Z).
    let zbit = 1u64 << (n - 1);
    let mut reduced: BTreeMap<PauliLabel, QSqrt2> = BTreeMap::new();
    let mut total = 0usize;
    for (label, c) in rotated.coeffs() {
        total += 1;
        if label.x_bits() & zbit != 0 {
            return Err(Error::Internal(
                "product form violated: X component on the retired qubit".into(),
            ));
        }
        if label.z_bits() & zbit != 0 {
            continue; // checked via its partner below
        }
        let partner = PauliLabel::new(n, label.z_bits() | zbit, label.x_bits())?;
        if rotated.coeff(&partner) != *c {
            return Err(Error::Internal(
                "product form violated: unmatched Z partner on the retired qubit".into(),
            ));
        }
        let low = label.truncate(n - 1)?;
        reduced.insert(low, &QSqrt2::from_int(2) * c);
    }
    if total != 2 * reduced.len() {
        return Err(Error::Internal(
            "product form violated: orphan Z component on the retired qubit".into(),
        ));
    }
    Ok((g, HermOp::from_coeffs(n - 1, reduced)?))
}

/// Embed a reduced vertex back at the full level: `g (v (x) |0><0|) g^dagger`.
pub fn embed_reduced(v: &HermOp, g: &CliffordTableau) -> Result<HermOp> {
    v.tensor_zero_state()?.conjugated(g)
}

/// Shared facet systems and memoized measurement transitions.
pub struct PolytopeCache {
    systems: Mutex<HashMap<usize, Arc<FacetSystem>>>,
    updates: Mutex<HashMap<(usize, String, usize, bool), Arc<MeasurementUpdate>>>,
}

impl Default for PolytopeCache {
    fn default() -> Self {
        Self::new()
    }
}

impl PolytopeCache {
    pub fn new() -> Self {
        PolytopeCache {
            systems: Mutex::new(HashMap::new()),
            updates: Mutex::new(HashMap::new()),
        }
    }

    pub fn system(&self, n: usize) -> Result<Arc<FacetSystem>> {
        if let Some(sys) = self.systems.lock().unwrap().get(&n) {
            return Ok(sys.clone());
        }
        let built = Arc::new(FacetSystem::build(n)?);
        let mut guard = self.systems.lock().unwrap();
        Ok(guard.entry(n).or_insert(built).clone())
    }

    /// Measurement update memoized by the operator's canonical key; the
    /// transition table the samplers draw from.
    pub fn measurement_update_cached(
        &self,
        x: &HermOp,
        a: &PauliLabel,
        reduce: bool,
    ) -> Result<Arc<MeasurementUpdate>> {
        let key = (x.n(), x.canonical_key(), a.index(), reduce);
        if let Some(hit) = self.updates.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let computed = Arc::new(measurement_update(self, x, a, reduce)?);
        let mut guard = self.updates.lock().unwrap();
        Ok(guard.entry(key).or_insert(computed).clone())
    }
}

/// Pauli measurement on a polytope member: exact outcome probabilities and,
/// for each outcome of positive probability, the branch decomposition into
/// vertices. With `reduce` set (and n >= 2) the branch is decomposed one
/// level down and embedded back; this is how the sampler retires qubits.
pub fn measurement_update(
    cache: &PolytopeCache,
    x: &HermOp,
    a: &PauliLabel,
    reduce: bool,
) -> Result<MeasurementUpdate> {
    let n = x.n();
    if a.n() != n {
        return Err(Error::Domain("measurement label dimension mismatch".into()));
    }
    if a.is_zero() {
        return Err(Error::Domain("measurement of the identity label".into()));
    }
    let xi_a = x.expectation(a);
    let half = QSqrt2::from_ratio(1, 2);
    let p0 = &half * &(&QSqrt2::one() + &xi_a);
    let p1 = &half * &(&QSqrt2::one() - &xi_a);
    let mut branches: [Option<BranchUpdate>; 2] = [None, None];
    for (s, p) in [(0u8, &p0), (1u8, &p1)] {
        if p.sign() < 0 {
            return Err(Error::Geometry("negative outcome probability".into()));
        }
        if p.sign() == 0 {
            continue;
        }
        let mut coeffs = project_coeffs(a, s, x);
        let inv_p = p.inv()?;
        for v in coeffs.values_mut() {
            *v = &*v * &inv_p;
        }
        let state = HermOp::from_coeffs(n, coeffs)?;
        let (decomposition, reduced) = if reduce && n >= 2 {
            let (g, low) = dimension_reduce(a, s, &state)?;
            let low_sys = cache.system(n - 1)?;
            let low_dec = caratheodory_decompose(&low, &low_sys)?;
            let full = low_dec.map_vertices(|v| embed_reduced(v, &g))?;
            (full, Some((g, low_dec)))
        } else {
            let sys = cache.system(n)?;
            (caratheodory_decompose(&state, &sys)?, None)
        };
        branches[s as usize] = Some(BranchUpdate { prob: p.clone(), state, decomposition, reduced });
    }
    Ok(MeasurementUpdate { probs: [p0, p1], branches })
}

/// Options for vertex enumeration.
#[derive(Clone, Default)]
pub struct EnumerateOptions {
    /// Checkpoint file for long runs; written every `checkpoint_every`
    /// processed vertices and loaded on start when present.
    pub checkpoint_path: Option<std::path::PathBuf>,
    pub checkpoint_every: usize,
    /// Progress callback with (processed, known) counts.
    pub progress: Option<fn(usize, usize)>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Checkpoint {
    schema_version: u32,
    n: usize,
    done: Vec<Vec<String>>,
    frontier: Vec<Vec<String>>,
}

/// Complete duplicate-free vertex enumeration by an adjacency walk: the edge
/// directions at a vertex are the extreme rays of its tight-facet cone and
/// the polytope graph is connected. Supported for n <= 2; the n = 2 run is
/// the long extended mode (22320 vertices).
pub fn enumerate_vertices(sys: &FacetSystem, opts: &EnumerateOptions) -> Result<Vec<HermOp>> {
    if sys.n > 2 {
        return Err(Error::Range(
            "vertex enumeration is limited to n <= 2".into(),
        ));
    }
    let d = sys.dim;
    let mut known: BTreeMap<String, Vec<Rational>> = BTreeMap::new();
    let mut frontier: Vec<Vec<Rational>> = Vec::new();
    let mut processed = 0usize;

    let mut resumed = false;
    if let Some(path) = &opts.checkpoint_path {
        if path.exists() {
            let data = std::fs::read_to_string(path)?;
            let cp: Checkpoint = serde_json::from_str(&data)?;
            if cp.n == sys.n {
                for coords in cp.done {
                    let parsed = parse_coords(&coords)?;
                    known.insert(coords_key(&parsed), parsed);
                }
                for coords in cp.frontier {
                    frontier.push(parse_coords(&coords)?);
                }
                processed = known.len().saturating_sub(frontier.len());
                resumed = true;
            }
        }
    }
    if !resumed {
        let start = sys.bootstrap_vertex()?.rational_coords();
        known.insert(coords_key(&start), start.clone());
        frontier.push(start);
    }

    while !frontier.is_empty() {
        // Fan out neighbor expansion over the current frontier batch; the
        // deduplicating set is the only synchronized state.
        let batch: Vec<Vec<Rational>> = std::mem::take(&mut frontier);
        let expanded = expand_batch(sys, &batch)?;
        for nb in expanded {
            let key = coords_key(&nb);
            if !known.contains_key(&key) {
                known.insert(key, nb.clone());
                frontier.push(nb);
            }
        }
        processed += batch.len();
        if let Some(cb) = opts.progress {
            cb(processed, known.len());
        }
        if let Some(path) = &opts.checkpoint_path {
            if opts.checkpoint_every > 0 {
                write_checkpoint(path, sys.n, &known, &frontier)?;
            }
        }
    }
    if let Some(path) = &opts.checkpoint_path {
        write_checkpoint(path, sys.n, &known, &frontier)?;
    }

    let mut out = Vec::with_capacity(known.len());
    for coords in known.values() {
        let mut xi = Vec::with_capacity(d + 1);
        xi.push(QSqrt2::one());
        xi.extend(coords.iter().map(|r| QSqrt2::from_rational(r.clone())));
        out.push(HermOp::from_xi_vector(sys.n, &xi)?);
    }
    Ok(out)
}

fn expand_batch(sys: &FacetSystem, batch: &[Vec<Rational>]) -> Result<Vec<Vec<Rational>>> {
    #[cfg(feature = "parallel")]
    let results: Vec<Result<Vec<Vec<Rational>>>> = batch
        .par_iter()
        .map(|coords| vertex_neighbors(sys, coords))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Vec<Vec<Rational>>>> = batch
        .iter()
        .map(|coords| vertex_neighbors(sys, coords))
        .collect();
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn coords_key(coords: &[Rational]) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    for c in coords {
        let _ = write!(s, "{}/{},", c.numer(), c.denom());
    }
    s
}

fn parse_coords(strings: &[String]) -> Result<Vec<Rational>> {
    strings
        .iter()
        .map(|s| {
            let (n, d) = s
                .split_once('/')
                .ok_or_else(|| Error::Parse(format!("bad coordinate {s:?}")))?;
            Ok(Rational::new(
                n.parse::<BigInt>().map_err(|e| Error::Parse(e.to_string()))?,
                d.parse::<BigInt>().map_err(|e| Error::Parse(e.to_string()))?,
            ))
        })
        .collect()
}

fn write_checkpoint(
    path: &std::path::Path,
    n: usize,
    known: &BTreeMap<String, Vec<Rational>>,
    frontier: &[Vec<Rational>],
) -> Result<()> {
    let render = |coords: &Vec<Rational>| -> Vec<String> {
        coords.iter().map(|c| format!("{}/{}", c.numer(), c.denom())).collect()
    };
    let cp = Checkpoint {
        schema_version: 1,
        n,
        done: known.values().map(render).collect(),
        frontier: frontier.iter().map(render).collect(),
    };
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, serde_json::to_string(&cp)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Neighbor vertices along every edge of the vertex cone.
fn vertex_neighbors(sys: &FacetSystem, coords: &[Rational]) -> Result<Vec<Vec<Rational>>> {
    let d = sys.dim;
    let mut xi = Vec::with_capacity(d + 1);
    xi.push(Rational::one());
    xi.extend_from_slice(coords);
    let fvals = sys.facet_values_rational(&xi);
    let tight_rows: Vec<Vec<BigInt>> = fvals
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_zero())
        .map(|(j, _)| sys.normal_row(j))
        .collect();
    let rays = crate::linalg::extreme_rays(&tight_rows, d)?;
    let mut out = Vec::with_capacity(rays.len());
    for ray in rays {
        let dots = sys.facet_dots(&ray);
        // largest step before a facet blocks: min f_j / (-u_j . d)
        let mut best: Option<Rational> = None;
        for (j, dot) in dots.iter().enumerate() {
            if dot.is_negative() {
                let t = Rational::new(
                    fvals[j].numer().clone(),
                    fvals[j].denom() * -dot.clone(),
                );
                if best.as_ref().map(|bt| t < *bt).unwrap_or(true) {
                    best = Some(t);
                }
            }
        }
        let Some(t) = best else {
            return Err(Error::Internal("edge ray never blocked".into()));
        };
        let neighbor: Vec<Rational> = coords
            .iter()
            .zip(&ray)
            .map(|(c, r)| c + &t * Rational::from_integer(r.clone()))
            .collect();
        out.push(neighbor);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herm::HermOp;
    use crate::scalar::ratio;

    fn sys1() -> FacetSystem {
        FacetSystem::build(1).unwrap()
    }

    fn cube_vertex(sx: i64, sy: i64, sz: i64) -> HermOp {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(PauliLabel::zero(1), QSqrt2::from_ratio(1, 2));
        coeffs.insert(PauliLabel::single(1, 0, 'X').unwrap(), QSqrt2::from_ratio(sx, 2));
        coeffs.insert(PauliLabel::single(1, 0, 'Y').unwrap(), QSqrt2::from_ratio(sy, 2));
        coeffs.insert(PauliLabel::single(1, 0, 'Z').unwrap(), QSqrt2::from_ratio(sz, 2));
        HermOp::from_coeffs(1, coeffs).unwrap()
    }

    #[test]
    fn facet_count_matches_stabilizer_count() {
        assert_eq!(sys1().facet_count(), 6);
        assert_eq!(FacetSystem::build(2).unwrap().facet_count(), 60);
    }

    #[test]
    fn facet_values_match_trace_inner() {
        let sys = sys1();
        let h = HermOp::magic_h();
        let xi = h.to_xi_vector();
        let values = sys.facet_values_q(&xi);
        for j in 0..sys.facet_count() {
            let direct = sys.facet_value(j, &h).unwrap();
            let scaled = &QSqrt2::from_int(2) * &direct;
            assert_eq!(values[j], scaled, "facet {j}");
        }
    }

    #[test]
    fn facet_value_examples() {
        let sys = sys1();
        let zero_state = HermOp::from_bloch(ratio(0, 1), ratio(0, 1), ratio(1, 1)).unwrap();
        let one_state = HermOp::from_bloch(ratio(0, 1), ratio(0, 1), ratio(-1, 1)).unwrap();
        let mut seen_unit = false;
        let mut seen_zero = false;
        for j in 0..sys.facet_count() {
            let v = sys.facet_value(j, &zero_state).unwrap();
            if v == QSqrt2::one() {
                seen_unit = true;
                // orthogonal states: <0| applied to |1><1| vanishes
                assert_eq!(sys.facet_value(j, &one_state).unwrap(), QSqrt2::zero());
            }
            if v.is_zero() {
                seen_zero = true;
            }
        }
        assert!(seen_unit && seen_zero);
    }

    #[test]
    fn membership_basics() {
        let sys = sys1();
        assert!(sys.membership(&HermOp::maximally_mixed(1)).unwrap());
        assert!(sys.membership(&HermOp::magic_h()).unwrap());
        // (I + 2Z)/2 lies outside: the |1><1| facet value is negative
        let mut coeffs = BTreeMap::new();
        coeffs.insert(PauliLabel::zero(1), QSqrt2::from_ratio(1, 2));
        coeffs.insert(PauliLabel::single(1, 0, 'Z').unwrap(), QSqrt2::one());
        let outside = HermOp::from_coeffs(1, coeffs).unwrap();
        assert!(!sys.membership(&outside).unwrap());
    }

    #[test]
    fn cube_vertices_are_vertices() {
        let sys = sys1();
        for sx in [-1, 1] {
            for sy in [-1, 1] {
                for sz in [-1, 1] {
                    let v = cube_vertex(sx, sy, sz);
                    assert!(sys.membership(&v).unwrap());
                    assert!(is_vertex(&v, &sys).unwrap());
                }
            }
        }
        // stabilizer states are not vertices
        let zero_state = HermOp::from_bloch(ratio(0, 1), ratio(0, 1), ratio(1, 1)).unwrap();
        assert!(!is_vertex(&zero_state, &sys).unwrap());
    }

    #[test]
    fn find_vertex_maximizes_objective() {
        let sys = sys1();
        let z_idx = PauliLabel::single(1, 0, 'Z').unwrap().index() - 1;
        let mut obj = vec![BigInt::zero(); sys.dim()];
        obj[z_idx] = BigInt::one();
        let v = find_vertex(&sys, &[], Some(&obj)).unwrap();
        assert_eq!(v.expectation(&PauliLabel::single(1, 0, 'Z').unwrap()), QSqrt2::one());
        assert!(is_vertex(&v, &sys).unwrap());
    }

    #[test]
    fn find_vertex_on_face() {
        let sys = sys1();
        // the single facet tight on |0><0| is the |1><1| projector
        let zero_state = HermOp::from_bloch(ratio(0, 1), ratio(0, 1), ratio(1, 1)).unwrap();
        let tight: Vec<usize> = (0..sys.facet_count())
            .filter(|&j| sys.facet_value(j, &zero_state).unwrap().is_zero())
            .collect();
        assert_eq!(tight.len(), 1);
        let v = find_vertex(&sys, &tight, None).unwrap();
        // on that face the Z expectation is pinned to +1
        assert_eq!(v.expectation(&PauliLabel::single(1, 0, 'Z').unwrap()), QSqrt2::one());
        assert!(is_vertex(&v, &sys).unwrap());
    }

    #[test]
    fn decompose_vertex_is_single_term() {
        let sys = sys1();
        let v = cube_vertex(1, 1, 1);
        let dec = caratheodory_decompose(&v, &sys).unwrap();
        assert_eq!(dec.support(), 1);
        assert_eq!(dec.terms[0].1, QSqrt2::one());
        assert_eq!(dec.reconstruct().unwrap(), v);
    }

    #[test]
    fn decompose_maximally_mixed() {
        let sys = sys1();
        let x = HermOp::maximally_mixed(1);
        let dec = caratheodory_decompose(&x, &sys).unwrap();
        assert!(dec.support() <= 4);
        assert_eq!(dec.total_weight(), QSqrt2::one());
        assert_eq!(dec.reconstruct().unwrap(), x);
        for (v, w) in &dec.terms {
            assert!(w.sign() > 0);
            assert!(is_vertex(v, &sys).unwrap());
        }
    }

    #[test]
    fn decompose_magic_state_exactly() {
        let sys = sys1();
        let h = HermOp::magic_h();
        let dec = caratheodory_decompose(&h, &sys).unwrap();
        assert!(dec.support() <= 4);
        assert_eq!(dec.total_weight(), QSqrt2::one());
        assert_eq!(dec.reconstruct().unwrap(), h);
        for (v, w) in &dec.terms {
            assert!(w.sign() > 0);
            assert!(is_vertex(v, &sys).unwrap());
        }
    }

    #[test]
    fn decompose_rejects_non_member() {
        let sys = sys1();
        let mut coeffs = BTreeMap::new();
        coeffs.insert(PauliLabel::zero(1), QSqrt2::from_ratio(1, 2));
        coeffs.insert(PauliLabel::single(1, 0, 'Z').unwrap(), QSqrt2::one());
        let outside = HermOp::from_coeffs(1, coeffs).unwrap();
        let err = caratheodory_decompose(&outside, &sys).unwrap_err();
        assert_eq!(err.code(), "geometry");
    }

    #[test]
    fn measurement_on_cube_vertex() {
        let cache = PolytopeCache::new();
        let v = cube_vertex(1, 1, 1);
        let z = PauliLabel::single(1, 0, 'Z').unwrap();
        let upd = measurement_update(&cache, &v, &z, true).unwrap();
        assert_eq!(upd.probs[0], QSqrt2::one());
        assert_eq!(upd.probs[1], QSqrt2::zero());
        assert!(upd.branches[1].is_none());
        let b0 = upd.branches[0].as_ref().unwrap();
        // P A P = |0><0| decomposes into two cube vertices of weight 1/2
        assert_eq!(b0.decomposition.support(), 2);
        for (_, w) in &b0.decomposition.terms {
            assert_eq!(*w, QSqrt2::from_ratio(1, 2));
        }
        assert_eq!(
            b0.state,
            HermOp::from_bloch(ratio(0, 1), ratio(0, 1), ratio(1, 1)).unwrap()
        );
        assert_eq!(b0.decomposition.reconstruct().unwrap(), b0.state);
    }

    #[test]
    fn measurement_x_on_symmetric_vertex_is_deterministic() {
        let cache = PolytopeCache::new();
        let v = cube_vertex(1, 1, 1);
        let x = PauliLabel::single(1, 0, 'X').unwrap();
        let upd = measurement_update(&cache, &v, &x, true).unwrap();
        assert_eq!(upd.probs[0], QSqrt2::one());
    }

    #[test]
    fn measurement_probabilities_sum_to_one_exhaustive() {
        let cache = PolytopeCache::new();
        let sys = cache.system(1).unwrap();
        let vertices = enumerate_vertices(&sys, &EnumerateOptions::default()).unwrap();
        assert_eq!(vertices.len(), 8);
        for v in &vertices {
            for idx in 1..4usize {
                let a = PauliLabel::from_index(1, idx).unwrap();
                let upd = measurement_update(&cache, v, &a, true).unwrap();
                let total = &upd.probs[0] + &upd.probs[1];
                assert_eq!(total, QSqrt2::one());
                assert!(upd.probs[0].sign() >= 0 && upd.probs[1].sign() >= 0);
                for b in upd.branches.iter().flatten() {
                    assert_eq!(b.decomposition.total_weight(), QSqrt2::one());
                    assert_eq!(b.decomposition.reconstruct().unwrap(), b.state);
                }
            }
        }
    }

    #[test]
    fn dimension_reduce_round_trip_n2() {
        // A = cube vertex (x) |0><0| is a post-measurement state for Z_2
        let v1 = cube_vertex(1, -1, 1);
        let a = v1.tensor_zero_state().unwrap();
        let z2 = PauliLabel::single(2, 1, 'Z').unwrap();
        let (g, reduced) = dimension_reduce(&z2, 0, &a).unwrap();
        assert_eq!(reduced, v1);
        assert_eq!(embed_reduced(&reduced, &g).unwrap(), a);
    }

    #[test]
    fn enumerate_lambda1_vertices() {
        let sys = sys1();
        let vertices = enumerate_vertices(&sys, &EnumerateOptions::default()).unwrap();
        assert_eq!(vertices.len(), 8);
        for v in vertices {
            for kind in ['X', 'Y', 'Z'] {
                let c = v.coeff(&PauliLabel::single(1, 0, kind).unwrap());
                assert!(
                    c == QSqrt2::from_ratio(1, 2) || c == QSqrt2::from_ratio(-1, 2),
                    "unexpected coefficient {c}"
                );
            }
        }
    }

    #[test]
    fn enumerate_rejects_n3() {
        let sys = FacetSystem::build(3).unwrap();
        let err = enumerate_vertices(&sys, &EnumerateOptions::default()).unwrap_err();
        assert_eq!(err.code(), "range");
    }
}
