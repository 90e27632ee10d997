//! Strong linear seeded extractors over GF(2).
//!
//! Every extractor here is a family of m×n matrices indexed by a t-bit seed;
//! extraction is M_z·x. Seeds whose matrix is not surjective are silently
//! replaced by the projection onto the first m coordinates, so that every
//! fiber has exactly 2^{n−m} points and the coset-sampling inverter stays
//! exactly uniform. The fraction of replaced seeds is part of the reported
//! numbers, not an assumption.
//!
//! Two stock families: Toeplitz matrices keyed by their n+m−1 diagonals
//! (strong by universal hashing), and a fixed random family with a short
//! seed whose strongness is measured rather than proven.

use crate::dists::{index_to_mask, pow_u128, ExactDist, SourceDescriptor};
use crate::error::{Error, Result};
use crate::gf::Gf2Matrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LseFamily {
    Toeplitz,
    RandomFamily,
    Custom,
}

#[derive(Debug, Clone)]
pub struct LinearSeededExtractor {
    n: u32,
    m: u32,
    t: u32,
    family: LseFamily,
    /// Materialized seed-indexed matrices; Toeplitz builds rows on the fly.
    matrices: Vec<Gf2Matrix>,
}

/// Largest seed length a materialized family may use.
const SEED_CAP: u32 = 20;

fn shape_check(n: u32, m: u32) -> Result<()> {
    if m == 0 || m > n || n > 63 {
        return Err(Error::DomainError(format!("need 0 < m <= n <= 63, got n={n}, m={m}")));
    }
    Ok(())
}

impl LinearSeededExtractor {
    /// Toeplitz family: entry (i, j) of M_z is bit i−j+n−1 of the seed.
    pub fn toeplitz_family(n: u32, m: u32) -> Result<Self> {
        shape_check(n, m)?;
        let t = n + m - 1;
        if t > SEED_CAP {
            return Err(Error::EnumerationCapExceeded { needed: 1u128 << t, cap: 1 << SEED_CAP });
        }
        Ok(LinearSeededExtractor { n, m, t, family: LseFamily::Toeplitz, matrices: Vec::new() })
    }

    /// 2^t matrices drawn once from a seeded generator, then fixed forever.
    pub fn random_family(n: u32, m: u32, t: u32, master_seed: u64) -> Result<Self> {
        shape_check(n, m)?;
        if t > SEED_CAP {
            return Err(Error::EnumerationCapExceeded { needed: 1u128 << t, cap: 1 << SEED_CAP });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        let mask = if n == 63 { (1u64 << 63) - 1 } else { (1u64 << n) - 1 };
        let matrices = (0..1u64 << t)
            .map(|_| {
                let rows = (0..m).map(|_| rng.next_u64() & mask).collect();
                Gf2Matrix::new(rows, n as usize)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LinearSeededExtractor { n, m, t, family: LseFamily::RandomFamily, matrices })
    }

    /// A short-seed family whose matrices are full-rank members of the
    /// Toeplitz family, chosen deterministically from `master_seed`. This
    /// keeps Toeplitz structure while decoupling the seed length from
    /// n+m−1, at the cost of strongness becoming a measured quantity.
    pub fn toeplitz_subfamily(n: u32, m: u32, t: u32, master_seed: u64) -> Result<Self> {
        let full = LinearSeededExtractor::toeplitz_family(n, m)?;
        if t >= full.t {
            return Err(Error::DomainError(format!(
                "subfamily seed length {t} must be below the full family's {}",
                full.t
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        let mut chosen = Vec::with_capacity(1 << t);
        let mut used = std::collections::BTreeSet::new();
        while chosen.len() < 1 << t {
            let z = rng.gen_range(0..full.seed_count());
            if !used.insert(z) {
                continue;
            }
            let (mat, fallback) = full.effective_matrix(z)?;
            if !fallback {
                chosen.push(mat);
            }
        }
        LinearSeededExtractor::from_matrices(n, m, chosen)
    }

    /// Explicitly chosen members of the Toeplitz family, by diagonal seed.
    pub fn toeplitz_members(n: u32, m: u32, seeds: &[u64]) -> Result<Self> {
        let full = LinearSeededExtractor::toeplitz_family(n, m)?;
        let matrices = seeds
            .iter()
            .map(|&z| {
                let (mat, fallback) = full.effective_matrix(z)?;
                if fallback {
                    return Err(Error::DomainError(format!("Toeplitz member {z} is rank-deficient")));
                }
                Ok(mat)
            })
            .collect::<Result<Vec<_>>>()?;
        LinearSeededExtractor::from_matrices(n, m, matrices)
    }

    pub fn from_matrices(n: u32, m: u32, matrices: Vec<Gf2Matrix>) -> Result<Self> {
        shape_check(n, m)?;
        if !matrices.len().is_power_of_two() {
            return Err(Error::DomainError(format!("family size {} is not a power of two", matrices.len())));
        }
        for mat in &matrices {
            if mat.n_rows() != m as usize {
                return Err(Error::ShapeMismatch(format!("matrix has {} rows, need {m}", mat.n_rows())));
            }
        }
        let t = matrices.len().trailing_zeros();
        Ok(LinearSeededExtractor { n, m, t, family: LseFamily::Custom, matrices })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn family(&self) -> LseFamily {
        self.family
    }

    pub fn seed_count(&self) -> u64 {
        1u64 << self.t
    }

    fn check_seed(&self, z: u64) -> Result<()> {
        if z >= self.seed_count() {
            return Err(Error::OutOfRange(format!("seed {z} >= 2^{}", self.t)));
        }
        Ok(())
    }

    /// The family's matrix for this seed, before any surjectivity repair.
    pub fn raw_matrix(&self, z: u64) -> Result<Gf2Matrix> {
        self.check_seed(z)?;
        match self.family {
            LseFamily::Toeplitz => {
                let rows = (0..self.m)
                    .map(|i| {
                        let mut row = 0u64;
                        for j in 0..self.n {
                            row |= ((z >> (i + self.n - 1 - j)) & 1) << j;
                        }
                        row
                    })
                    .collect();
                Gf2Matrix::new(rows, self.n as usize)
            }
            _ => Ok(self.matrices[z as usize].clone()),
        }
    }

    fn projection(&self) -> Gf2Matrix {
        let rows = (0..self.m).map(|i| 1u64 << i).collect();
        Gf2Matrix::new(rows, self.n as usize).expect("projection rows are in range")
    }

    /// Surjective matrix actually used for this seed, with a flag saying
    /// whether the raw matrix had to be replaced by the projection.
    pub fn effective_matrix(&self, z: u64) -> Result<(Gf2Matrix, bool)> {
        let raw = self.raw_matrix(z)?;
        if raw.rank() == self.m as usize {
            Ok((raw, false))
        } else {
            Ok((self.projection(), true))
        }
    }

    /// How many seeds fall back to the projection.
    pub fn fallback_seed_count(&self) -> Result<u64> {
        let mut count = 0;
        for z in 0..self.seed_count() {
            if self.effective_matrix(z)?.1 {
                count += 1;
            }
        }
        Ok(count)
    }

    pub fn extract(&self, x: u64, z: u64) -> Result<u64> {
        let (mat, _) = self.effective_matrix(z)?;
        Ok(mat.mul_vec(x))
    }

    /// The solution coset of extract(·, z) = y: a particular point plus a
    /// kernel basis of size n−m.
    pub fn fiber(&self, z: u64, y: u64) -> Result<(u64, Vec<u64>)> {
        if y >= 1u64 << self.m {
            return Err(Error::OutOfRange(format!("target {y} >= 2^{}", self.m)));
        }
        let (mat, _) = self.effective_matrix(z)?;
        mat.solve(y).ok_or_else(|| Error::NoSolution)
    }

    /// Uniform seed, then a uniform point of that seed's fiber over y.
    pub fn invert(&self, y: u64, rng: &mut impl Rng) -> Result<(u64, u64)> {
        let z = rng.gen_range(0..self.seed_count());
        let (particular, kernel) = self.fiber(z, y)?;
        let mut x = particular;
        for b in kernel {
            if rng.gen_bool(0.5) {
                x ^= b;
            }
        }
        Ok((z, x))
    }

    /// Exact worst-case distance of (output, seed) from uniform over all
    /// sources with exactly k free bit positions.
    pub fn worst_symbol_fixing_strongness(&self, k: u32) -> Result<BigRational> {
        if k > self.n {
            return Err(Error::DomainError(format!("k={k} exceeds n={}", self.n)));
        }
        let n = self.n as usize;
        let table = 1usize << (self.m + self.t);
        let seeds = self.seed_count();
        let effective: Vec<Gf2Matrix> = (0..seeds)
            .map(|z| self.effective_matrix(z).map(|(m, _)| m))
            .collect::<Result<Vec<_>>>()?;
        let support = 1u64 << k;
        let mut counts = vec![0u64; table];
        let mut worst_num = 0u128;
        for fixed_mask in 0u64..(1 << n) {
            if fixed_mask.count_ones() != self.n - k {
                continue;
            }
            let free: Vec<usize> = (0..n).filter(|&i| fixed_mask >> i & 1 == 0).collect();
            for fixed_bits in 0..1u64 << (self.n - k) {
                // scatter the fixed assignment onto the fixed positions
                let mut base = 0u64;
                let mut fi = 0;
                for i in 0..n {
                    if fixed_mask >> i & 1 == 1 {
                        base |= (fixed_bits >> fi & 1) << i;
                        fi += 1;
                    }
                }
                counts.iter_mut().for_each(|c| *c = 0);
                for va in 0..support {
                    let mut x = base;
                    for (bi, &i) in free.iter().enumerate() {
                        x |= (va >> bi & 1) << i;
                    }
                    for (z, mat) in effective.iter().enumerate() {
                        let y = mat.mul_vec(x);
                        counts[((y as usize) << self.t) | z] += 1;
                    }
                }
                let total = support as u128 * seeds as u128;
                let num: u128 = counts
                    .iter()
                    .map(|&c| (c as u128 * table as u128).abs_diff(total))
                    .sum();
                worst_num = worst_num.max(num);
            }
        }
        let total = BigInt::from(support) * BigInt::from(seeds);
        Ok(BigRational::new(
            BigInt::from(worst_num),
            BigInt::from(2u32) * total * BigInt::from(table),
        ))
    }

    /// Max over the given sources of δ((extract(X, Z), Z), uniform), exact.
    pub fn strongness_measure(&self, sources: &[SourceDescriptor]) -> Result<BigRational> {
        let table = pow_u128(2, self.m + self.t);
        let seed_share = BigRational::new(BigInt::from(1), BigInt::from(self.seed_count()));
        let mut worst = BigRational::zero();
        for src in sources {
            let dist = src.to_dist(table)?;
            if dist.d() != 2 || dist.n() != self.n {
                return Err(Error::ShapeMismatch(format!(
                    "source over {}^{} does not match extractor input GF(2)^{}",
                    dist.d(),
                    dist.n(),
                    self.n
                )));
            }
            let mut weights: Vec<(u64, BigRational)> = Vec::new();
            for (&idx, p) in dist.iter() {
                let x = index_to_mask(idx, self.n);
                let share = p * &seed_share;
                for z in 0..self.seed_count() {
                    let y = self.extract(x, z)?;
                    // joint string = output bits then seed bits, big-endian
                    let joint_mask = y << self.t | z;
                    weights.push((index_to_mask(joint_mask, self.m + self.t), share.clone()));
                }
            }
            let joint = ExactDist::from_weights(2, self.m + self.t, weights, u128::MAX)?;
            let dist_u = joint.distance_from_uniform();
            if dist_u > worst {
                worst = dist_u;
            }
        }
        Ok(worst)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let family = match self.family {
            LseFamily::Toeplitz => "toeplitz",
            LseFamily::RandomFamily => "random-family",
            LseFamily::Custom => "custom",
        };
        let mut v = serde_json::json!({
            "n": self.n,
            "m": self.m,
            "t": self.t,
            "family": family,
        });
        if self.family != LseFamily::Toeplitz {
            let mats: Vec<Vec<u64>> = self
                .matrices
                .iter()
                .map(|mat| (0..mat.n_rows()).map(|i| mat.row_mask(i)).collect())
                .collect();
            v["matrices"] = serde_json::json!(mats);
        }
        v
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let field = |key: &str| {
            v.get(key)
                .and_then(|x| x.as_u64())
                .ok_or_else(|| Error::BadHeader(format!("missing integer field '{key}'")))
        };
        let (n, m, t) = (field("n")? as u32, field("m")? as u32, field("t")? as u32);
        let family = v
            .get("family")
            .and_then(|x| x.as_str())
            .ok_or_else(|| Error::BadHeader("missing 'family'".into()))?;
        if family == "toeplitz" {
            let e = LinearSeededExtractor::toeplitz_family(n, m)?;
            if e.t != t {
                return Err(Error::BadHeader(format!("toeplitz family over GF(2)^{n} has t={}, header says {t}", e.t)));
            }
            return Ok(e);
        }
        let rows: Vec<Vec<u64>> = serde_json::from_value(
            v.get("matrices")
                .cloned()
                .ok_or_else(|| Error::BadHeader("missing 'matrices'".into()))?,
        )?;
        let matrices = rows
            .into_iter()
            .map(|r| Gf2Matrix::new(r, n as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut e = LinearSeededExtractor::from_matrices(n, m, matrices)?;
        if e.t != t {
            return Err(Error::BadHeader(format!("{} matrices imply t={}, header says {t}", e.matrices.len(), e.t)));
        }
        if family == "random-family" {
            e.family = LseFamily::RandomFamily;
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn zero_input_extracts_to_zero() {
        let e = LinearSeededExtractor::toeplitz_family(4, 2).unwrap();
        for z in 0..e.seed_count() {
            assert_eq!(e.extract(0, z).unwrap(), 0);
        }
    }

    #[test]
    fn identity_diagonal_projects_onto_first_bits() {
        let e = LinearSeededExtractor::toeplitz_family(4, 2).unwrap();
        let z = 1u64 << 3; // only the main diagonal set
        for x in 0..16u64 {
            assert_eq!(e.extract(x, z).unwrap(), x & 0b11);
        }
    }

    #[test]
    fn extraction_is_linear_per_seed() {
        let e = LinearSeededExtractor::toeplitz_family(6, 2).unwrap();
        for z in 0..e.seed_count() {
            for x1 in 0..64u64 {
                for x2 in 0..64u64 {
                    assert_eq!(
                        e.extract(x1 ^ x2, z).unwrap(),
                        e.extract(x1, z).unwrap() ^ e.extract(x2, z).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn fallback_replaces_rank_deficient_seeds() {
        let zero = Gf2Matrix::new(vec![0, 0], 4).unwrap();
        let full = Gf2Matrix::new(vec![0b1010, 0b0110], 4).unwrap();
        let e = LinearSeededExtractor::from_matrices(4, 2, vec![zero, full]).unwrap();
        let (m0, fb0) = e.effective_matrix(0).unwrap();
        assert!(fb0);
        for x in 0..16u64 {
            assert_eq!(m0.mul_vec(x), x & 0b11);
        }
        let (_, fb1) = e.effective_matrix(1).unwrap();
        assert!(!fb1);
    }

    #[test]
    fn toeplitz_fallback_counts_match_row_oracle() {
        // for m = 2, the matrix is rank-deficient exactly when a row is zero
        // or the rows coincide
        for (n, expected) in [(4u32, 4u64), (6, 4)] {
            let e = LinearSeededExtractor::toeplitz_family(n, 2).unwrap();
            let mut oracle = 0;
            for z in 0..e.seed_count() {
                let rows: Vec<u64> = (0..2u32)
                    .map(|i| {
                        (0..n).fold(0u64, |r, j| r | ((z >> (i + n - 1 - j)) & 1) << j)
                    })
                    .collect();
                if rows[0] == 0 || rows[1] == 0 || rows[0] == rows[1] {
                    oracle += 1;
                }
            }
            assert_eq!(oracle, expected);
            assert_eq!(e.fallback_seed_count().unwrap(), expected);
        }
    }

    #[test]
    fn invert_round_trips() {
        let e = LinearSeededExtractor::toeplitz_family(6, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for y in 0..4u64 {
            for _ in 0..50 {
                let (z, x) = e.invert(y, &mut rng).unwrap();
                assert_eq!(e.extract(x, z).unwrap(), y);
            }
        }
    }

    #[test]
    fn joint_inverter_output_is_exactly_uniform() {
        // every (z, x) pair must be produced by exactly one (y, coset point)
        let e = LinearSeededExtractor::random_family(6, 2, 2, 1).unwrap();
        let mut hits = vec![0u32; 4 << 6];
        for z in 0..e.seed_count() {
            for y in 0..4u64 {
                let (particular, kernel) = e.fiber(z, y).unwrap();
                assert_eq!(kernel.len(), 4);
                for coeffs in 0..16u64 {
                    let mut x = particular;
                    for (i, b) in kernel.iter().enumerate() {
                        if coeffs >> i & 1 == 1 {
                            x ^= b;
                        }
                    }
                    hits[(z << 6 | x) as usize] += 1;
                }
            }
        }
        assert!(hits.iter().all(|&h| h == 1));
    }

    #[test]
    fn strongness_zero_on_uniform_source() {
        let e = LinearSeededExtractor::toeplitz_family(4, 2).unwrap();
        let src = SourceDescriptor::SymbolFixing { d: 2, n: 4, fixed: vec![] };
        assert!(e.strongness_measure(&[src]).unwrap().is_zero());
    }

    #[test]
    fn strongness_large_on_point_mass() {
        let e = LinearSeededExtractor::toeplitz_family(4, 2).unwrap();
        let src = SourceDescriptor::SymbolFixing {
            d: 2,
            n: 4,
            fixed: vec![(0, 1), (1, 0), (2, 1), (3, 1)],
        };
        let eps = e.strongness_measure(&[src]).unwrap();
        assert!(eps > rat(1, 4), "no entropy in, so the joint is far from uniform: {eps}");
    }

    #[test]
    fn strongness_over_all_k4_sources_meets_hash_bound() {
        let e = LinearSeededExtractor::toeplitz_family(6, 2).unwrap();
        let worst = e.worst_symbol_fixing_strongness(4).unwrap();
        assert_eq!(worst, rat(11, 128));
        assert!(worst <= rat(1, 8));
    }

    #[test]
    fn worst_strongness_agrees_with_descriptor_path() {
        // the integer-count enumeration and the rational path must agree
        let e = LinearSeededExtractor::toeplitz_family(4, 2).unwrap();
        let mut sources = Vec::new();
        for p0 in 0..4usize {
            for p1 in p0 + 1..4 {
                for bits in 0..4u32 {
                    sources.push(SourceDescriptor::SymbolFixing {
                        d: 2,
                        n: 4,
                        fixed: vec![(p0, bits & 1), (p1, bits >> 1)],
                    });
                }
            }
        }
        assert_eq!(
            e.strongness_measure(&sources).unwrap(),
            e.worst_symbol_fixing_strongness(2).unwrap()
        );
    }

    #[test]
    fn random_family_is_reproducible() {
        let a = LinearSeededExtractor::random_family(6, 2, 3, 42).unwrap();
        let b = LinearSeededExtractor::random_family(6, 2, 3, 42).unwrap();
        assert_eq!(a.seed_count(), 8);
        for z in 0..8 {
            for x in [0u64, 1, 17, 63] {
                assert_eq!(a.extract(x, z).unwrap(), b.extract(x, z).unwrap());
            }
        }
    }

    #[test]
    fn toeplitz_subfamily_picks_full_rank_members() {
        let sub = LinearSeededExtractor::toeplitz_subfamily(6, 2, 2, 7).unwrap();
        assert_eq!(sub.seed_count(), 4);
        assert_eq!(sub.fallback_seed_count().unwrap(), 0);
        let full = LinearSeededExtractor::toeplitz_family(6, 2).unwrap();
        for z in 0..4 {
            let (mat, _) = sub.effective_matrix(z).unwrap();
            let member = (0..full.seed_count()).any(|w| {
                let raw = full.raw_matrix(w).unwrap();
                (0..2).all(|i| raw.row_mask(i) == mat.row_mask(i))
            });
            assert!(member, "subfamily matrix {z} is not Toeplitz");
        }
        let again = LinearSeededExtractor::toeplitz_subfamily(6, 2, 2, 7).unwrap();
        for z in 0..4 {
            assert_eq!(sub.extract(33, z).unwrap(), again.extract(33, z).unwrap());
        }
        assert!(LinearSeededExtractor::toeplitz_subfamily(6, 2, 7, 7).is_err());
    }

    #[test]
    fn json_round_trip_preserves_behavior() {
        for e in [
            LinearSeededExtractor::toeplitz_family(5, 2).unwrap(),
            LinearSeededExtractor::random_family(6, 3, 2, 11).unwrap(),
            LinearSeededExtractor::toeplitz_subfamily(6, 2, 2, 7).unwrap(),
        ] {
            let back = LinearSeededExtractor::from_json(&e.to_json()).unwrap();
            assert_eq!(back.family(), e.family());
            for z in 0..e.seed_count() {
                for x in [0u64, 5, 21, 38] {
                    assert_eq!(back.extract(x, z).unwrap(), e.extract(x, z).unwrap());
                }
            }
        }
    }

    proptest! {
        #[test]
        fn random_family_linearity(x1 in 0u64..64, x2 in 0u64..64, z in 0u64..8) {
            let e = LinearSeededExtractor::random_family(6, 3, 3, 9).unwrap();
            prop_assert_eq!(
                e.extract(x1 ^ x2, z).unwrap(),
                e.extract(x1, z).unwrap() ^ e.extract(x2, z).unwrap()
            );
        }
    }
}
