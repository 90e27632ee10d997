//! Exact arithmetic and linear algebra over finite fields.
//!
//! Supports prime fields GF(p) with p < 2^31 and binary fields GF(2^e) with
//! e <= 16 (carryless multiplication, reduction by a fixed irreducible
//! polynomial). Vectors over GF(2) additionally get a bit-packed fast path
//! ([`Gf2Matrix`]), since exhaustive 2^n enumeration dominates the runtime of
//! the verification harness.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Irreducible polynomials for GF(2^e), e = 2..=16, listed with the leading
/// term (entry for e has bit e set).
const BINARY_POLYS: [(u32, u32); 15] = [
    (2, 0x7),
    (3, 0xB),
    (4, 0x13),
    (5, 0x25),
    (6, 0x43),
    (7, 0x83),
    (8, 0x11D),
    (9, 0x211),
    (10, 0x409),
    (11, 0x805),
    (12, 0x1053),
    (13, 0x201B),
    (14, 0x4443),
    (15, 0x8003),
    (16, 0x1100B),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Prime,
    Binary { e: u32, poly: u32 },
}

/// A finite field of order q, where q is a prime < 2^31 or a power of two
/// with exponent <= 16. Elements are represented as `u32` in `0..q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub q: u64,
    pub kind: FieldKind,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

impl FieldSpec {
    pub fn new(q: u64) -> Result<Self> {
        if q.is_power_of_two() && q >= 4 {
            let e = q.trailing_zeros();
            if e > 16 {
                return Err(Error::DomainError(format!(
                    "GF(2^{e}) not supported, exponent must be <= 16"
                )));
            }
            let poly = BINARY_POLYS
                .iter()
                .find(|(k, _)| *k == e)
                .map(|(_, p)| *p)
                .expect("poly table covers 2..=16");
            return Ok(FieldSpec { q, kind: FieldKind::Binary { e, poly } });
        }
        if q < (1 << 31) && is_prime(q) {
            return Ok(FieldSpec { q, kind: FieldKind::Prime });
        }
        Err(Error::DomainError(format!(
            "field order {q} is neither a prime < 2^31 nor a supported power of two"
        )))
    }

    pub fn characteristic(&self) -> u64 {
        match self.kind {
            FieldKind::Prime => self.q,
            FieldKind::Binary { .. } => 2,
        }
    }

    #[inline]
    pub fn check(&self, a: u32) -> Result<u32> {
        if (a as u64) < self.q {
            Ok(a)
        } else {
            Err(Error::OutOfRange(format!("{a} is not an element of GF({})", self.q)))
        }
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        match self.kind {
            FieldKind::Prime => (((a as u64) + (b as u64)) % self.q) as u32,
            FieldKind::Binary { .. } => a ^ b,
        }
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        match self.kind {
            FieldKind::Prime => (((a as u64) + self.q - (b as u64)) % self.q) as u32,
            FieldKind::Binary { .. } => a ^ b,
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        self.sub(0, a)
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        match self.kind {
            FieldKind::Prime => (((a as u64) * (b as u64)) % self.q) as u32,
            FieldKind::Binary { e, poly } => {
                let mut acc: u64 = 0;
                let mut x = a as u64;
                let mut y = b as u64;
                while y != 0 {
                    if y & 1 != 0 {
                        acc ^= x;
                    }
                    x <<= 1;
                    y >>= 1;
                }
                let mut r = acc;
                let top = e * 2;
                for bit in (e..=top).rev() {
                    if r >> bit & 1 != 0 {
                        r ^= (poly as u64) << (bit - e);
                    }
                }
                r as u32
            }
        }
    }

    pub fn pow(&self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1u32;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u32) -> Result<u32> {
        if a == 0 {
            return Err(Error::DomainError("zero has no multiplicative inverse".into()));
        }
        Ok(self.pow(a, self.q - 2))
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        rng.gen_range(0..self.q) as u32
    }
}

/// Dense matrix over a [`FieldSpec`], row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FMatrix {
    pub field: FieldSpec,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u32>,
}

impl FMatrix {
    pub fn new(field: FieldSpec, rows: usize, cols: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        for &v in &data {
            field.check(v)?;
        }
        Ok(FMatrix { field, rows, cols, data })
    }

    pub fn zero(field: FieldSpec, rows: usize, cols: usize) -> Self {
        FMatrix { field, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(field: FieldSpec, n: usize) -> Self {
        let mut m = Self::zero(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn random(field: FieldSpec, rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| field.sample(rng)).collect();
        FMatrix { field, rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[u32]) -> Result<Vec<u32>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} columns, vector has length {}",
                self.cols,
                x.len()
            )));
        }
        let f = self.field;
        Ok((0..self.rows)
            .map(|r| {
                let mut acc = 0u32;
                for c in 0..self.cols {
                    acc = f.add(acc, f.mul(self.at(r, c), x[c]));
                }
                acc
            })
            .collect())
    }

    pub fn mul_mat(&self, other: &FMatrix) -> Result<FMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = self.field;
        let mut out = FMatrix::zero(f, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = f.add(out.at(i, j), f.mul(a, other.at(k, j)));
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Reduced row echelon form with deterministic first-nonzero pivoting.
    /// Returns the reduced matrix and the pivot column indices.
    pub fn rref(&self) -> (FMatrix, Vec<usize>) {
        let f = self.field;
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut rank = 0usize;
        for c in 0..m.cols {
            let Some(pr) = (rank..m.rows).find(|&r| m.at(r, c) != 0) else {
                continue;
            };
            if pr != rank {
                for j in 0..m.cols {
                    let (a, b) = (m.at(rank, j), m.at(pr, j));
                    m.set(rank, j, b);
                    m.set(pr, j, a);
                }
            }
            let inv = f.inv(m.at(rank, c)).expect("pivot is nonzero");
            for j in 0..m.cols {
                m.set(rank, j, f.mul(m.at(rank, j), inv));
            }
            for r in 0..m.rows {
                if r == rank || m.at(r, c) == 0 {
                    continue;
                }
                let coef = m.at(r, c);
                for j in 0..m.cols {
                    let v = f.sub(m.at(r, j), f.mul(coef, m.at(rank, j)));
                    m.set(r, j, v);
                }
            }
            pivots.push(c);
            rank += 1;
            if rank == m.rows {
                break;
            }
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right kernel {x : Mx = 0}, derived from the reduced form.
    pub fn kernel_basis(&self) -> Vec<Vec<u32>> {
        let f = self.field;
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&fc| {
                let mut v = vec![0u32; self.cols];
                v[fc] = 1;
                for (pi, &pc) in pivots.iter().enumerate() {
                    v[pc] = f.neg(r.at(pi, fc));
                }
                v
            })
            .collect()
    }
}

/// All solutions of a consistent affine system Mx = y: a particular solution
/// plus a basis of the kernel. The set has q^(kernel dimension) members.
#[derive(Debug, Clone)]
pub struct AffineSolutionSet {
    pub field: FieldSpec,
    pub particular: Vec<u32>,
    pub kernel: Vec<Vec<u32>>,
}

impl AffineSolutionSet {
    pub fn count(&self) -> u128 {
        (self.field.q as u128).pow(self.kernel.len() as u32)
    }

    /// The member selected by one coefficient per kernel-basis vector.
    pub fn member(&self, coeffs: &[u32]) -> Result<Vec<u32>> {
        if coeffs.len() != self.kernel.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                self.kernel.len(),
                coeffs.len()
            )));
        }
        let f = self.field;
        let mut x = self.particular.clone();
        for (c, b) in coeffs.iter().zip(&self.kernel) {
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi = f.add(*xi, f.mul(*c, *bi));
            }
        }
        Ok(x)
    }

    /// Uniform sample: one uniform coefficient per kernel-basis element.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<u32> {
        let coeffs: Vec<u32> = (0..self.kernel.len()).map(|_| self.field.sample(rng)).collect();
        self.member(&coeffs).expect("coefficient count matches")
    }

    /// Enumerates every member. Intended for desk-scale verification only.
    pub fn iter(&self) -> impl Iterator<Item = Vec<u32>> + '_ {
        let q = self.field.q as u128;
        let dim = self.kernel.len() as u32;
        (0..q.pow(dim)).map(move |mut idx| {
            let mut coeffs = vec![0u32; dim as usize];
            for c in coeffs.iter_mut() {
                *c = (idx % q) as u32;
                idx /= q;
            }
            self.member(&coeffs).expect("coefficient count matches")
        })
    }
}

/// Solves Mx = y. `Ok(None)` means the system is inconsistent.
pub fn solve_affine(m: &FMatrix, y: &[u32]) -> Result<Option<AffineSolutionSet>> {
    if y.len() != m.rows {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows, right-hand side has length {}",
            m.rows,
            y.len()
        )));
    }
    let f = m.field;
    let mut aug = FMatrix::zero(f, m.rows, m.cols + 1);
    for r in 0..m.rows {
        for c in 0..m.cols {
            aug.set(r, c, m.at(r, c));
        }
        aug.set(r, m.cols, y[r]);
    }
    let (red, pivots) = aug.rref();
    if pivots.contains(&m.cols) {
        return Ok(None);
    }
    let mut particular = vec![0u32; m.cols];
    for (pi, &pc) in pivots.iter().enumerate() {
        particular[pc] = red.at(pi, m.cols);
    }
    Ok(Some(AffineSolutionSet { field: f, particular, kernel: m.kernel_basis() }))
}

/// Bit-packed matrix over GF(2) with at most 64 columns. Row i is stored as a
/// u64 whose bit j is the entry in column j.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    pub rows: Vec<u64>,
    pub cols: usize,
}

impl Gf2Matrix {
    pub fn new(rows: Vec<u64>, cols: usize) -> Result<Self> {
        if cols > 64 {
            return Err(Error::DomainError("packed GF(2) matrices support at most 64 columns".into()));
        }
        let mask = ones(cols);
        if rows.iter().any(|&r| r & !mask != 0) {
            return Err(Error::OutOfRange("row has bits beyond the column count".into()));
        }
        Ok(Gf2Matrix { rows, cols })
    }

    pub fn identity(n: usize) -> Self {
        Gf2Matrix { rows: (0..n).map(|i| 1u64 << i).collect(), cols: n }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row_mask(&self, r: usize) -> u64 {
        self.rows[r]
    }

    /// y = Mx, both packed (bit j of x is coordinate j).
    #[inline]
    pub fn mul_vec(&self, x: u64) -> u64 {
        let mut y = 0u64;
        for (i, &row) in self.rows.iter().enumerate() {
            y |= (((row & x).count_ones() as u64) & 1) << i;
        }
        y
    }

    pub fn rref(&self) -> (Gf2Matrix, Vec<usize>) {
        let mut rows = self.rows.clone();
        let mut pivots = Vec::new();
        let mut rank = 0usize;
        for c in 0..self.cols {
            let bit = 1u64 << c;
            let Some(pr) = (rank..rows.len()).find(|&r| rows[r] & bit != 0) else {
                continue;
            };
            rows.swap(rank, pr);
            let prow = rows[rank];
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && *row & bit != 0 {
                    *row ^= prow;
                }
            }
            pivots.push(c);
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        (Gf2Matrix { rows, cols: self.cols }, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    pub fn kernel_basis(&self) -> Vec<u64> {
        let (r, pivots) = self.rref();
        (0..self.cols)
            .filter(|c| !pivots.contains(c))
            .map(|fc| {
                let mut v = 1u64 << fc;
                for (pi, &pc) in pivots.iter().enumerate() {
                    if r.rows[pi] >> fc & 1 != 0 {
                        v |= 1u64 << pc;
                    }
                }
                v
            })
            .collect()
    }

    /// Solves Mx = y over GF(2); returns a particular solution and the kernel
    /// basis, or `None` when inconsistent.
    pub fn solve(&self, y: u64) -> Option<(u64, Vec<u64>)> {
        let mut rows: Vec<(u64, u64)> = self.rows.iter().enumerate().map(|(i, &r)| (r, y >> i & 1)).collect();
        let mut pivots = Vec::new();
        let mut rank = 0usize;
        for c in 0..self.cols {
            let bit = 1u64 << c;
            let Some(pr) = (rank..rows.len()).find(|&r| rows[r].0 & bit != 0) else {
                continue;
            };
            rows.swap(rank, pr);
            let (prow, pb) = rows[rank];
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row.0 & bit != 0 {
                    row.0 ^= prow;
                    row.1 ^= pb;
                }
            }
            pivots.push(c);
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        if rows[rank..].iter().any(|&(r, b)| r == 0 && b != 0) {
            return None;
        }
        let mut particular = 0u64;
        for (pi, &pc) in pivots.iter().enumerate() {
            if rows[pi].1 != 0 {
                particular |= 1u64 << pc;
            }
        }
        Some((particular, self.kernel_basis()))
    }

    pub fn to_fmatrix(&self) -> FMatrix {
        let f = FieldSpec::new(2).expect("GF(2) is valid");
        let mut m = FMatrix::zero(f, self.rows.len(), self.cols);
        for (r, &row) in self.rows.iter().enumerate() {
            for c in 0..self.cols {
                m.set(r, c, (row >> c & 1) as u32);
            }
        }
        m
    }
}

/// Mask with the lowest `n` bits set.
#[inline]
pub fn ones(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_fields() -> Vec<FieldSpec> {
        [2u64, 3, 4, 5, 7, 8, 16]
            .iter()
            .map(|&q| FieldSpec::new(q).unwrap())
            .collect()
    }

    #[test]
    fn field_axioms_exhaustive_small_orders() {
        for f in all_fields() {
            let q = f.q as u32;
            for a in 0..q {
                assert_eq!(f.add(a, 0), a);
                assert_eq!(f.mul(a, 1), a);
                assert_eq!(f.add(a, f.neg(a)), 0);
                if a != 0 {
                    assert_eq!(f.mul(a, f.inv(a).unwrap()), 1, "inverse in GF({}) of {}", f.q, a);
                }
                for b in 0..q {
                    assert_eq!(f.add(a, b), f.add(b, a));
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    for c in 0..q {
                        assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                        assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn binary_polys_are_irreducible() {
        // p(x) of degree e is irreducible over GF(2) iff x^(2^e) = x mod p
        // and gcd-style checks x^(2^(e/r)) != x for every prime r | e.
        fn polymulmod(a: u64, b: u64, p: u64, e: u32) -> u64 {
            let mut acc = 0u64;
            let mut x = a;
            let mut y = b;
            while y != 0 {
                if y & 1 != 0 {
                    acc ^= x;
                }
                x <<= 1;
                y >>= 1;
            }
            let mut r = acc;
            for bit in (e..=(2 * e)).rev() {
                if r >> bit & 1 != 0 {
                    r ^= p << (bit - e);
                }
            }
            r
        }
        fn xpow2k(k: u32, p: u64, e: u32) -> u64 {
            // x^(2^k) mod p by repeated squaring
            let mut cur = 0b10u64;
            for _ in 0..k {
                cur = polymulmod(cur, cur, p, e);
            }
            cur
        }
        for &(e, poly) in BINARY_POLYS.iter() {
            assert_eq!(xpow2k(e, poly as u64, e), 0b10, "x^(2^{e}) != x mod poly for e={e}");
            let mut primes = vec![];
            let mut m = e;
            let mut d = 2;
            while d * d <= m {
                if m % d == 0 {
                    primes.push(d);
                    while m % d == 0 {
                        m /= d;
                    }
                }
                d += 1;
            }
            if m > 1 {
                primes.push(m);
            }
            for r in primes {
                assert_ne!(xpow2k(e / r, poly as u64, e), 0b10, "poly for e={e} has a factor of degree dividing {}", e / r);
            }
        }
    }

    #[test]
    fn solve_affine_identity_case() {
        let f = FieldSpec::new(2).unwrap();
        let m = FMatrix::identity(f, 3);
        let sol = solve_affine(&m, &[1, 0, 1]).unwrap().unwrap();
        assert_eq!(sol.particular, vec![1, 0, 1]);
        assert!(sol.kernel.is_empty());
        assert_eq!(sol.count(), 1);
    }

    #[test]
    fn solve_affine_zero_map() {
        let f = FieldSpec::new(2).unwrap();
        let m = FMatrix::zero(f, 1, 2);
        let sol = solve_affine(&m, &[0]).unwrap().unwrap();
        assert_eq!(sol.kernel.len(), 2);
        assert_eq!(sol.count(), 4);
        assert!(solve_affine(&m, &[1]).unwrap().is_none());
    }

    #[test]
    fn solve_affine_gf3_kernel() {
        // [[1,2],[2,1]] over GF(3): kernel is span{(1,1)}, 3 solutions of Mx=0.
        let f = FieldSpec::new(3).unwrap();
        let m = FMatrix::new(f, 2, 2, vec![1, 2, 2, 1]).unwrap();
        let sol = solve_affine(&m, &[0, 0]).unwrap().unwrap();
        assert_eq!(sol.count(), 3);
        // oracle: brute force over all 9 vectors
        let mut brute = vec![];
        for a in 0..3u32 {
            for b in 0..3u32 {
                if m.mul_vec(&[a, b]).unwrap() == vec![0, 0] {
                    brute.push(vec![a, b]);
                }
            }
        }
        let mut mine: Vec<Vec<u32>> = sol.iter().collect();
        mine.sort();
        brute.sort();
        assert_eq!(mine, brute);
    }

    #[test]
    fn sample_affine_exactly_uniform_over_coefficients() {
        let f = FieldSpec::new(3).unwrap();
        let m = FMatrix::new(f, 1, 3, vec![1, 1, 1]).unwrap();
        let sol = solve_affine(&m, &[2]).unwrap().unwrap();
        assert_eq!(sol.kernel.len(), 2);
        // enumerating coefficient tuples hits each member exactly once
        let mut seen = std::collections::BTreeSet::new();
        for x in sol.iter() {
            assert_eq!(m.mul_vec(&x).unwrap(), vec![2]);
            assert!(seen.insert(x));
        }
        assert_eq!(seen.len(), 9);
        // and the rng path lands inside the set
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            assert!(seen.contains(&sol.sample(&mut rng)));
        }
    }

    #[test]
    fn rank_examples() {
        let f2 = FieldSpec::new(2).unwrap();
        assert_eq!(FMatrix::identity(f2, 4).rank(), 4);
        assert_eq!(FMatrix::zero(f2, 3, 5).rank(), 0);
        let rep = FMatrix::new(f2, 2, 2, vec![1, 1, 1, 1]).unwrap();
        assert_eq!(rep.rank(), 1);
    }

    #[test]
    fn rref_is_idempotent() {
        let f = FieldSpec::new(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let m = FMatrix::new(f, 3, 4, (0..12).map(|_| f.sample(&mut rng)).collect()).unwrap();
            let (r1, p1) = m.rref();
            let (r2, p2) = r1.rref();
            assert_eq!(r1, r2);
            assert_eq!(p1, p2);
        }
    }

    #[test]
    fn rank_nullity_holds() {
        let f = FieldSpec::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let m = FMatrix::new(f, 3, 5, (0..15).map(|_| f.sample(&mut rng)).collect()).unwrap();
            assert_eq!(m.rank() + m.kernel_basis().len(), 5);
        }
    }

    #[test]
    fn kernel_members_map_to_same_image() {
        let f = FieldSpec::new(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let m = FMatrix::new(f, 2, 4, (0..8).map(|_| f.sample(&mut rng)).collect()).unwrap();
            let y = vec![f.sample(&mut rng), f.sample(&mut rng)];
            if let Some(sol) = solve_affine(&m, &y).unwrap() {
                for x in sol.iter().take(100) {
                    assert_eq!(m.mul_vec(&x).unwrap(), y);
                }
            }
        }
    }

    #[test]
    fn packed_gf2_agrees_with_generic() {
        let f = FieldSpec::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..60 {
            let rows: Vec<u64> = (0..4).map(|_| rng.gen_range(0..64u64)).collect();
            let p = Gf2Matrix::new(rows, 6).unwrap();
            let g = p.to_fmatrix();
            assert_eq!(p.rank(), g.rank());
            for x in 0..64u64 {
                let xv: Vec<u32> = (0..6).map(|j| (x >> j & 1) as u32).collect();
                let y = g.mul_vec(&xv).unwrap();
                let yp = p.mul_vec(x);
                for (j, &bit) in y.iter().enumerate() {
                    assert_eq!(bit as u64, yp >> j & 1);
                }
            }
            let _ = f;
        }
    }

    #[test]
    fn packed_solve_and_kernel() {
        let m = Gf2Matrix::new(vec![0b0111, 0b1110], 4).unwrap();
        for y in 0..4u64 {
            let (part, kernel) = m.solve(y).unwrap();
            assert_eq!(m.mul_vec(part), y);
            assert_eq!(kernel.len(), 2);
            for &k in &kernel {
                assert_eq!(m.mul_vec(part ^ k), y);
            }
        }
        let singular = Gf2Matrix::new(vec![0b01, 0b01], 2).unwrap();
        assert_eq!(singular.rank(), 1);
        let (part, kernel) = singular.solve(0b11).unwrap();
        assert_eq!(part & 1, 1);
        assert_eq!(kernel.len(), 1);
        assert!(singular.solve(0b10).is_none());
    }
}
