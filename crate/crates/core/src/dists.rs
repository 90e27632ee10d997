//! Exact probability-distribution laboratory.
//!
//! [`ExactDist`] is a sparse table of big-rational probabilities over strings
//! in Σ^n (Σ identified with `0..d`). Everything here is exact: zero-leakage
//! claims are statements about rationals being literally zero, so no floating
//! point enters any distance or mass computation. Floats appear only in the
//! entropy accessors, which are irrational in general.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;

/// Default cap on the number of table entries (d^n) a distribution may span.
pub const DEFAULT_CAP: u128 = 1 << 24;

/// Digit alphabet used when rendering strings over alphabets up to size 64.
const DIGITS: &[u8; 64] = b"0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ+/";

/// Big-endian packing: the first symbol is the most significant digit.
pub fn symbols_to_index(symbols: &[u32], d: u32) -> u64 {
    let mut x = 0u64;
    for &s in symbols {
        debug_assert!(s < d);
        x = x * d as u64 + s as u64;
    }
    x
}

pub fn index_to_symbols(mut x: u64, d: u32, n: u32) -> Vec<u32> {
    let mut out = vec![0u32; n as usize];
    for i in (0..n as usize).rev() {
        out[i] = (x % d as u64) as u32;
        x /= d as u64;
    }
    out
}

pub fn symbols_to_string(symbols: &[u32]) -> String {
    symbols.iter().map(|&s| DIGITS[s as usize] as char).collect()
}

pub fn string_to_symbols(s: &str, d: u32) -> Result<Vec<u32>> {
    s.bytes()
        .map(|b| {
            DIGITS[..d as usize]
                .iter()
                .position(|&c| c == b)
                .map(|p| p as u32)
                .ok_or_else(|| Error::OutOfRange(format!("'{}' is not a base-{d} digit", b as char)))
        })
        .collect()
}

pub fn pow_u128(d: u32, n: u32) -> u128 {
    (d as u128).pow(n)
}

/// Distribution tables index binary strings big-endian (first symbol is the
/// most significant digit) while the GF(2) linear algebra puts coordinate j
/// at bit j. These two bijections translate between the conventions.
pub fn index_to_mask(idx: u64, n: u32) -> u64 {
    let mut mask = 0u64;
    for i in 0..n {
        mask |= (idx >> (n - 1 - i) & 1) << i;
    }
    mask
}

pub fn mask_to_index(mask: u64, n: u32) -> u64 {
    index_to_mask(mask, n)
}

pub fn rat_to_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn rat_from_string(s: &str) -> Result<BigRational> {
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a, b),
        None => (s, "1"),
    };
    let n: BigInt = num
        .trim()
        .parse()
        .map_err(|_| Error::DomainError(format!("bad rational numerator '{num}'")))?;
    let d: BigInt = den
        .trim()
        .parse()
        .map_err(|_| Error::DomainError(format!("bad rational denominator '{den}'")))?;
    if d.is_zero() {
        return Err(Error::DomainError("rational with zero denominator".into()));
    }
    Ok(BigRational::new(n, d))
}

pub fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::MAX);
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

/// Smallest-ish rational r with r^2 >= x, used to turn exact squared
/// distances into exact comparable bounds without leaving Q.
pub fn rat_sqrt_upper(x: &BigRational) -> BigRational {
    if x.is_zero() {
        return BigRational::zero();
    }
    let scale = BigInt::from(1u64 << 32);
    let scaled = (x * BigRational::from_integer(&scale * &scale)).ceil().to_integer();
    let root = scaled.sqrt();
    let root = if &root * &root >= scaled { root } else { root + 1 };
    BigRational::new(root, scale)
}

/// Sparse exact distribution over strings in Σ^n, keyed by big-endian index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDist {
    d: u32,
    n: u32,
    probs: BTreeMap<u64, BigRational>,
}

impl ExactDist {
    pub fn new(d: u32, n: u32, probs: BTreeMap<u64, BigRational>, cap: u128) -> Result<Self> {
        if d < 1 {
            return Err(Error::DomainError("alphabet must be nonempty".into()));
        }
        let span = pow_u128(d, n);
        if span > cap {
            return Err(Error::EnumerationCapExceeded { needed: span, cap });
        }
        let mut sum = BigRational::zero();
        let mut clean = BTreeMap::new();
        for (k, v) in probs {
            if (k as u128) >= span {
                return Err(Error::OutOfRange(format!("index {k} outside [0, {span})")));
            }
            if v.is_negative() {
                return Err(Error::DomainError("negative probability".into()));
            }
            if v.is_zero() {
                continue;
            }
            sum += &v;
            clean.insert(k, v);
        }
        if !sum.is_one() {
            return Err(Error::DomainError(format!(
                "probabilities sum to {} instead of 1",
                rat_to_string(&sum)
            )));
        }
        Ok(ExactDist { d, n, probs: clean })
    }

    pub fn uniform(d: u32, n: u32, cap: u128) -> Result<Self> {
        let span = pow_u128(d, n);
        if span > cap {
            return Err(Error::EnumerationCapExceeded { needed: span, cap });
        }
        let p = BigRational::new(BigInt::one(), BigInt::from(span));
        let probs = (0..span as u64).map(|k| (k, p.clone())).collect();
        ExactDist::new(d, n, probs, cap)
    }

    pub fn point_mass(d: u32, n: u32, x: u64, cap: u128) -> Result<Self> {
        let mut probs = BTreeMap::new();
        probs.insert(x, BigRational::one());
        ExactDist::new(d, n, probs, cap)
    }

    /// Exact distribution from integer counts (probability = count / total).
    pub fn from_counts<I: IntoIterator<Item = (u64, u64)>>(d: u32, n: u32, counts: I, cap: u128) -> Result<Self> {
        let mut acc: BTreeMap<u64, u64> = BTreeMap::new();
        for (k, c) in counts {
            *acc.entry(k).or_insert(0) += c;
        }
        let total: u64 = acc.values().sum();
        if total == 0 {
            return Err(Error::DomainError("empty count table".into()));
        }
        let probs = acc
            .into_iter()
            .map(|(k, c)| (k, BigRational::new(BigInt::from(c), BigInt::from(total))))
            .collect();
        ExactDist::new(d, n, probs, cap)
    }

    /// Like [`ExactDist::from_counts`] but with exact rational weights.
    pub fn from_weights<I: IntoIterator<Item = (u64, BigRational)>>(d: u32, n: u32, weights: I, cap: u128) -> Result<Self> {
        let mut acc: BTreeMap<u64, BigRational> = BTreeMap::new();
        let mut total = BigRational::zero();
        for (k, w) in weights {
            if w.is_negative() {
                return Err(Error::DomainError("negative weight".into()));
            }
            total += &w;
            let e = acc.entry(k).or_insert_with(BigRational::zero);
            *e += w;
        }
        if total.is_zero() {
            return Err(Error::DomainError("weights sum to zero".into()));
        }
        let probs = acc.into_iter().map(|(k, w)| (k, w / &total)).collect();
        ExactDist::new(d, n, probs, cap)
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn span(&self) -> u128 {
        pow_u128(self.d, self.n)
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, x: u64) -> BigRational {
        self.probs.get(&x).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u64, &BigRational)> {
        self.probs.iter()
    }

    fn same_shape(&self, other: &ExactDist) -> Result<()> {
        if self.d != other.d || self.n != other.n {
            return Err(Error::ShapeMismatch(format!(
                "({}, {}) vs ({}, {})",
                self.d, self.n, other.d, other.n
            )));
        }
        Ok(())
    }

    /// Half the ℓ1 distance between the two tables.
    pub fn statistical_distance(&self, other: &ExactDist) -> Result<BigRational> {
        self.same_shape(other)?;
        let mut acc = BigRational::zero();
        for (k, p) in &self.probs {
            acc += (p - other.prob(*k)).abs();
        }
        for (k, q) in &other.probs {
            if !self.probs.contains_key(k) {
                acc += q.abs();
            }
        }
        Ok(acc / BigRational::from_integer(BigInt::from(2)))
    }

    pub fn distance_from_uniform(&self) -> BigRational {
        let span = self.span();
        let u = BigRational::new(BigInt::one(), BigInt::from(span));
        let mut acc = BigRational::zero();
        for p in self.probs.values() {
            acc += (p - &u).abs();
        }
        let missing = span - self.probs.len() as u128;
        acc += &u * BigRational::from_integer(BigInt::from(missing));
        acc / BigRational::from_integer(BigInt::from(2))
    }

    /// Max-norm distance from the uniform distribution over the full table.
    pub fn linf_from_uniform(&self) -> BigRational {
        let span = self.span();
        let u = BigRational::new(BigInt::one(), BigInt::from(span));
        let mut best = if (self.probs.len() as u128) < span { u.clone() } else { BigRational::zero() };
        for p in self.probs.values() {
            let dev = (p - &u).abs();
            if dev > best {
                best = dev;
            }
        }
        best
    }

    /// Min-entropy in d-ary symbols: −log_d of the largest point probability.
    pub fn min_entropy(&self) -> f64 {
        let max = self.probs.values().max().expect("distribution is nonempty");
        -rat_to_f64(max).ln() / (self.d as f64).ln()
    }

    /// Shannon entropy in d-ary symbols.
    pub fn shannon_entropy(&self) -> f64 {
        let ln_d = (self.d as f64).ln();
        self.probs
            .values()
            .map(|p| {
                let pf = rat_to_f64(p);
                if pf > 0.0 {
                    -pf * pf.ln() / ln_d
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Exact conditional distribution given that positions `s` read `w`.
    pub fn condition(&self, s: &[usize], w: &[u32]) -> Result<ExactDist> {
        if s.len() != w.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} positions vs {} observed symbols",
                s.len(),
                w.len()
            )));
        }
        for &i in s {
            if i >= self.n as usize {
                return Err(Error::OutOfRange(format!("position {i} out of [0, {})", self.n)));
            }
        }
        let mut kept: BTreeMap<u64, BigRational> = BTreeMap::new();
        let mut mass = BigRational::zero();
        for (&k, p) in &self.probs {
            let syms = index_to_symbols(k, self.d, self.n);
            if s.iter().zip(w).all(|(&i, &v)| syms[i] == v) {
                mass += p;
                kept.insert(k, p.clone());
            }
        }
        if mass.is_zero() {
            return Err(Error::ZeroProbabilityEvent);
        }
        let probs = kept.into_iter().map(|(k, p)| (k, p / &mass)).collect();
        ExactDist::new(self.d, self.n, probs, u128::MAX)
    }

    /// Marginal on the given positions, in the order given.
    pub fn marginal(&self, s: &[usize]) -> Result<ExactDist> {
        for &i in s {
            if i >= self.n as usize {
                return Err(Error::OutOfRange(format!("position {i} out of [0, {})", self.n)));
            }
        }
        let mut acc: BTreeMap<u64, BigRational> = BTreeMap::new();
        for (&k, p) in &self.probs {
            let syms = index_to_symbols(k, self.d, self.n);
            let proj: Vec<u32> = s.iter().map(|&i| syms[i]).collect();
            let key = symbols_to_index(&proj, self.d);
            let e = acc.entry(key).or_insert_with(BigRational::zero);
            *e += p;
        }
        ExactDist::new(self.d, s.len() as u32, acc, u128::MAX)
    }

    /// Image distribution under a total map given on string indices.
    pub fn pushforward(&self, d_out: u32, n_out: u32, f: impl Fn(u64) -> u64) -> Result<ExactDist> {
        let span_out = pow_u128(d_out, n_out);
        let mut acc: BTreeMap<u64, BigRational> = BTreeMap::new();
        for (&k, p) in &self.probs {
            let y = f(k);
            if (y as u128) >= span_out {
                return Err(Error::OutOfRange(format!("map produced {y} outside the output space")));
            }
            let e = acc.entry(y).or_insert_with(BigRational::zero);
            *e += p;
        }
        ExactDist::new(d_out, n_out, acc, u128::MAX)
    }

    /// Serializes to `{d, n, entries: [[string, "num/den"], …]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<serde_json::Value> = self
            .probs
            .iter()
            .map(|(&k, p)| {
                let s = symbols_to_string(&index_to_symbols(k, self.d, self.n));
                serde_json::json!([s, rat_to_string(p)])
            })
            .collect();
        serde_json::json!({ "d": self.d, "n": self.n, "entries": entries })
    }

    pub fn from_json(v: &serde_json::Value, cap: u128) -> Result<Self> {
        let d = v["d"].as_u64().ok_or_else(|| Error::BadHeader("missing d".into()))? as u32;
        let n = v["n"].as_u64().ok_or_else(|| Error::BadHeader("missing n".into()))? as u32;
        let entries = v["entries"].as_array().ok_or_else(|| Error::BadHeader("missing entries".into()))?;
        let mut probs = BTreeMap::new();
        for e in entries {
            let pair = e.as_array().filter(|a| a.len() == 2).ok_or_else(|| Error::BadHeader("entry is not a pair".into()))?;
            let s = pair[0].as_str().ok_or_else(|| Error::BadHeader("entry key is not a string".into()))?;
            let p = pair[1].as_str().ok_or_else(|| Error::BadHeader("entry value is not a string".into()))?;
            let syms = string_to_symbols(s, d)?;
            if syms.len() != n as usize {
                return Err(Error::ShapeMismatch(format!("entry '{s}' has length {} != {n}", syms.len())));
            }
            probs.insert(symbols_to_index(&syms, d), rat_from_string(p)?);
        }
        ExactDist::new(d, n, probs, cap)
    }
}

/// Both sides of the conditioning duality for a joint distribution whose
/// strings split as X (first `split` positions) and Y (the rest). Returns
/// (E_Y[δ(X|Y, X)], E_X[δ(Y|X, Y)]); the two are equal for every joint.
pub fn duality_gap(joint: &ExactDist, split: usize) -> Result<(BigRational, BigRational)> {
    let n = joint.n() as usize;
    if split == 0 || split >= n {
        return Err(Error::ShapeMismatch(format!("split {split} outside 1..{n}")));
    }
    let xs: Vec<usize> = (0..split).collect();
    let ys: Vec<usize> = (split..n).collect();
    let side = |obs: &[usize], target: &[usize]| -> Result<BigRational> {
        let obs_marg = joint.marginal(obs)?;
        let target_marg = joint.marginal(target)?;
        let mut acc = BigRational::zero();
        for (&w, pw) in obs_marg.iter() {
            let w_syms = index_to_symbols(w, joint.d(), obs.len() as u32);
            let cond = joint.condition(obs, &w_syms)?.marginal(target)?;
            acc += pw * cond.statistical_distance(&target_marg)?;
        }
        Ok(acc)
    };
    Ok((side(&ys, &xs)?, side(&xs, &ys)?))
}

/// Σ_i Pr[S_i] · δ(A|S_i, U_{S_i}) for a partition of the sample space,
/// together with twice the distance of A from uniform (its upper bound).
pub fn conditioning_mass_bound(a: &ExactDist, partition: &[Vec<u64>]) -> Result<(BigRational, BigRational)> {
    let span = a.span();
    let mut seen = vec![false; span as usize];
    for block in partition {
        for &x in block {
            if (x as u128) >= span {
                return Err(Error::NotAPartition(format!("element {x} outside the sample space")));
            }
            if seen[x as usize] {
                return Err(Error::NotAPartition(format!("element {x} appears twice")));
            }
            seen[x as usize] = true;
        }
    }
    if !seen.iter().all(|&b| b) {
        return Err(Error::NotAPartition("blocks do not cover the sample space".into()));
    }
    let gamma = a.distance_from_uniform();
    let mut acc = BigRational::zero();
    for block in partition {
        let mass: BigRational = block.iter().map(|&x| a.prob(x)).sum();
        if mass.is_zero() {
            continue;
        }
        let u_block = BigRational::new(BigInt::one(), BigInt::from(block.len()));
        // δ(A|S, U_S) over the block's elements; outside the block both are 0.
        let mut dist = BigRational::zero();
        for &x in block {
            dist += (a.prob(x) / &mass - &u_block).abs();
        }
        dist /= BigRational::from_integer(BigInt::from(2));
        acc += mass * dist;
    }
    Ok((acc, gamma * BigRational::from_integer(BigInt::from(2))))
}

/// Checks H(A) ≥ lg|S|·(1−ε) in bits for a distribution ε-close to uniform
/// on S. Preconditions follow the entropy floor proposition: |S| > 4 and
/// ε ≤ 1/4, and A must actually be ε-close to U_S.
pub fn shannon_floor_check(a: &ExactDist, s: &[u64], eps: &BigRational) -> Result<bool> {
    if s.len() <= 4 {
        return Err(Error::PreconditionViolated(format!("|S| = {} must exceed 4", s.len())));
    }
    let quarter = BigRational::new(BigInt::one(), BigInt::from(4));
    if eps > &quarter {
        return Err(Error::PreconditionViolated(format!("ε = {} must be ≤ 1/4", rat_to_string(eps))));
    }
    let u_s = BigRational::new(BigInt::one(), BigInt::from(s.len()));
    let mut dist = BigRational::zero();
    let sset: std::collections::BTreeSet<u64> = s.iter().copied().collect();
    for &x in &sset {
        dist += (a.prob(x) - &u_s).abs();
    }
    for (&x, p) in a.iter() {
        if !sset.contains(&x) {
            dist += p;
        }
    }
    dist /= BigRational::from_integer(BigInt::from(2));
    if &dist > eps {
        return Err(Error::PreconditionViolated(format!(
            "distribution is {} from uniform on S, above the claimed ε",
            rat_to_string(&dist)
        )));
    }
    let h_bits = a.shannon_entropy() * (a.d() as f64).log2();
    let floor = (s.len() as f64).log2() * (1.0 - rat_to_f64(eps));
    Ok(h_bits + 1e-12 >= floor)
}

/// q-ary entropy function h_q(x) = x·log_q(q−1) − x·log_q(x) − (1−x)·log_q(1−x).
pub fn hq(x: f64, q: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::DomainError(format!("h_q argument {x} outside [0,1]")));
    }
    if q < 2 {
        return Err(Error::DomainError("h_q needs q >= 2".into()));
    }
    let ln_q = (q as f64).ln();
    let mut acc = x * ((q - 1) as f64).ln() / ln_q;
    if x > 0.0 {
        acc -= x * x.ln() / ln_q;
    }
    if x < 1.0 {
        acc -= (1.0 - x) * (1.0 - x).ln() / ln_q;
    }
    Ok(acc)
}

/// Weak-source descriptors used by the extractor verifiers.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum SourceDescriptor {
    /// n−k positions pinned to fixed values, the remaining k uniform.
    SymbolFixing { d: u32, n: u32, fixed: Vec<(usize, u32)> },
    /// Uniform distribution on offset + span(basis) over GF(q).
    Affine { q: u32, n: u32, basis: Vec<Vec<u32>>, offset: Vec<u32> },
    /// A min-entropy floor only; describes a family, not a single table.
    General { d: u32, n: u32, k: f64 },
}

impl SourceDescriptor {
    pub fn free_symbols(&self) -> Option<u32> {
        match self {
            SourceDescriptor::SymbolFixing { n, fixed, .. } => Some(n - fixed.len() as u32),
            SourceDescriptor::Affine { basis, .. } => Some(basis.len() as u32),
            SourceDescriptor::General { .. } => None,
        }
    }

    pub fn to_dist(&self, cap: u128) -> Result<ExactDist> {
        match self {
            SourceDescriptor::SymbolFixing { d, n, fixed } => {
                let mut fixed_at = vec![None; *n as usize];
                for &(i, v) in fixed {
                    if i >= *n as usize || v >= *d {
                        return Err(Error::OutOfRange(format!("fixed symbol ({i}, {v}) out of range")));
                    }
                    if fixed_at[i].replace(v).is_some() {
                        return Err(Error::DomainError(format!("position {i} fixed twice")));
                    }
                }
                let free: Vec<usize> = (0..*n as usize).filter(|&i| fixed_at[i].is_none()).collect();
                let count = pow_u128(*d, free.len() as u32);
                if count > cap {
                    return Err(Error::EnumerationCapExceeded { needed: count, cap });
                }
                let mut entries = Vec::with_capacity(count as usize);
                for mut a in 0..count as u64 {
                    let mut syms: Vec<u32> = fixed_at.iter().map(|f| f.unwrap_or(0)).collect();
                    for &i in free.iter().rev() {
                        syms[i] = (a % *d as u64) as u32;
                        a /= *d as u64;
                    }
                    entries.push((symbols_to_index(&syms, *d), 1u64));
                }
                ExactDist::from_counts(*d, *n, entries, cap)
            }
            SourceDescriptor::Affine { q, n, basis, offset } => {
                let field = crate::gf::FieldSpec::new(*q as u64)?;
                if offset.len() != *n as usize || basis.iter().any(|b| b.len() != *n as usize) {
                    return Err(Error::ShapeMismatch("basis/offset length differs from n".into()));
                }
                let set = crate::gf::AffineSolutionSet {
                    field,
                    particular: offset.clone(),
                    kernel: basis.clone(),
                };
                let count = set.count();
                if count > cap {
                    return Err(Error::EnumerationCapExceeded { needed: count, cap });
                }
                let entries: Vec<(u64, u64)> = set.iter().map(|v| (symbols_to_index(&v, *q), 1u64)).collect();
                // a dependent basis would make some points repeat; reject that
                let distinct: std::collections::BTreeSet<u64> = entries.iter().map(|&(k, _)| k).collect();
                if distinct.len() as u128 != count {
                    return Err(Error::DomainError("affine basis is linearly dependent".into()));
                }
                ExactDist::from_counts(*q, *n, entries, cap)
            }
            SourceDescriptor::General { .. } => Err(Error::DomainError(
                "a general min-entropy descriptor denotes a family, not a single distribution".into(),
            )),
        }
    }
}
