//! Wiretap encoding composed with linear error-correcting codes, plus the
//! side-channel protocol that withstands arbitrary observation functions.
//!
//! The composition order is wiretap first, channel code second, so the
//! intruder sees linear combinations of the wiretap codeword and the noise
//! sits where the channel decoder can remove it.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::dists::{
    index_to_symbols, pow_u128, rat_sqrt_upper, rat_to_string, symbols_to_index, ExactDist,
};
use crate::error::{Error, Result};
use crate::gf::{FMatrix, FieldSpec};
use crate::linext::LinearSeededExtractor;
use crate::wiretap::{DeclaredTargets, WiretapProtocol};

const TABLE_CAP: u128 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeKind {
    Hamming,
    ReedSolomon,
}

impl CodeKind {
    fn name(self) -> &'static str {
        match self {
            CodeKind::Hamming => "hamming",
            CodeKind::ReedSolomon => "reed-solomon",
        }
    }
}

/// Systematic linear code with a bounded-weight syndrome decoder. The
/// decoding table holds the unique error pattern of weight at most the
/// unique-decoding radius for every syndrome it can correct; anything outside
/// the table surfaces as `TooManyErrors`.
#[derive(Debug, Clone)]
pub struct LinearCode {
    field: FieldSpec,
    kind: CodeKind,
    length: usize,
    dimension: usize,
    d_min: usize,
    radius: usize,
    generator: FMatrix,
    check: FMatrix,
    table: BTreeMap<u64, Vec<(usize, u32)>>,
}

impl LinearCode {
    /// Builds the systematic form, certifies the minimum distance, and fills
    /// the syndrome table. The generator may be any full-rank basis whose
    /// leading K columns are independent.
    fn from_generator(kind: CodeKind, generator: FMatrix) -> Result<Self> {
        let field = generator.field;
        let (n_len, k_dim) = (generator.cols, generator.rows);
        if field.q > 4096 {
            return Err(Error::DomainError(format!(
                "code alphabet {} is beyond desk scale",
                field.q
            )));
        }
        if k_dim == 0 || k_dim > n_len {
            return Err(Error::ShapeMismatch(format!(
                "code dimension {k_dim} outside 1..={n_len}"
            )));
        }
        let (reduced, pivots) = generator.rref();
        if pivots.len() < k_dim {
            return Err(Error::DomainError(format!(
                "generator rank {} is below the dimension {k_dim}",
                pivots.len()
            )));
        }
        if pivots.iter().enumerate().any(|(i, &c)| i != c) {
            return Err(Error::DomainError(
                "leading K generator columns are dependent; no systematic form without a column permutation"
                    .to_string(),
            ));
        }
        let generator = reduced;
        let mut check = FMatrix::zero(field, n_len - k_dim, n_len);
        for r in 0..n_len - k_dim {
            for c in 0..k_dim {
                check.set(r, c, field.neg(generator.at(c, k_dim + r)));
            }
            check.set(r, k_dim + r, 1);
        }
        let product = generator.mul_mat(&check_transpose(&check))?;
        if product.data.iter().any(|&v| v != 0) {
            return Err(Error::DomainError("parity check does not annihilate the generator".to_string()));
        }
        let d_min = certified_minimum_distance(&generator)?;
        let radius = (d_min - 1) / 2;
        let mut code = LinearCode {
            field,
            kind,
            length: n_len,
            dimension: k_dim,
            d_min,
            radius,
            generator,
            check,
            table: BTreeMap::new(),
        };
        code.fill_syndrome_table()?;
        Ok(code)
    }

    /// The binary Hamming code with r parity symbols: length 2^r − 1,
    /// dimension 2^r − 1 − r, minimum distance 3.
    pub fn hamming(r: u32) -> Result<Self> {
        if !(2..=4).contains(&r) {
            return Err(Error::DomainError(format!(
                "Hamming parameter {r} outside the desk-scale range 2..=4"
            )));
        }
        let field = FieldSpec::new(2)?;
        let n_len = (1usize << r) - 1;
        let k_dim = n_len - r as usize;
        let data_columns: Vec<u32> = (1..=n_len as u32).filter(|c| !c.is_power_of_two()).collect();
        let mut generator = FMatrix::zero(field, k_dim, n_len);
        for (i, &pattern) in data_columns.iter().enumerate() {
            generator.set(i, i, 1);
            for bit in 0..r as usize {
                generator.set(i, k_dim + bit, pattern >> bit & 1);
            }
        }
        Self::from_generator(CodeKind::Hamming, generator)
    }

    /// Reed–Solomon code evaluating degree-below-K polynomials on the field
    /// elements 0..N−1, then row-reduced to systematic form. MDS, so the
    /// minimum distance is N − K + 1.
    pub fn reed_solomon(n_len: usize, k_dim: usize, q: u64) -> Result<Self> {
        let field = FieldSpec::new(q)?;
        if n_len as u64 > q {
            return Err(Error::DomainError(format!(
                "length {n_len} needs {n_len} distinct evaluation points but GF({q}) has only {q}"
            )));
        }
        if k_dim == 0 || k_dim > n_len {
            return Err(Error::ShapeMismatch(format!("dimension {k_dim} outside 1..={n_len}")));
        }
        let mut generator = FMatrix::zero(field, k_dim, n_len);
        for c in 0..n_len {
            for r in 0..k_dim {
                generator.set(r, c, field.pow(c as u32, r as u64));
            }
        }
        Self::from_generator(CodeKind::ReedSolomon, generator)
    }

    fn fill_syndrome_table(&mut self) -> Result<()> {
        let q = self.field.q as u128;
        let mut needed: u128 = 0;
        let mut binom: u128 = 1;
        for w in 0..=self.radius as u128 {
            if w > 0 {
                binom = binom * (self.length as u128 - w + 1) / w;
            }
            needed += binom * (q - 1).pow(w as u32);
        }
        if needed > TABLE_CAP {
            return Err(Error::EnumerationCapExceeded { needed, cap: TABLE_CAP });
        }
        let mut pattern: Vec<(usize, u32)> = Vec::new();
        self.push_patterns(0, self.radius, &mut pattern)?;
        Ok(())
    }

    fn push_patterns(&mut self, start: usize, budget: usize, pattern: &mut Vec<(usize, u32)>) -> Result<()> {
        let mut word = vec![0u32; self.length];
        for &(pos, val) in pattern.iter() {
            word[pos] = val;
        }
        let syndrome = self.check.mul_vec(&word)?;
        let key = symbols_to_index(&syndrome, self.field.q as u32);
        if self.table.insert(key, pattern.clone()).is_some() {
            return Err(Error::DomainError(
                "two correctable error patterns share a syndrome; the distance certificate is wrong"
                    .to_string(),
            ));
        }
        if budget == 0 {
            return Ok(());
        }
        for pos in start..self.length {
            for val in 1..self.field.q as u32 {
                pattern.push((pos, val));
                self.push_patterns(pos + 1, budget - 1, pattern)?;
                pattern.pop();
            }
        }
        Ok(())
    }

    pub fn q(&self) -> u32 {
        self.field.q as u32
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn minimum_distance(&self) -> usize {
        self.d_min
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn rate(&self) -> BigRational {
        BigRational::new(BigInt::from(self.dimension), BigInt::from(self.length))
    }

    pub fn generator(&self) -> &FMatrix {
        &self.generator
    }

    pub fn check(&self) -> &FMatrix {
        &self.check
    }

    pub fn encode(&self, data: &[u32]) -> Result<Vec<u32>> {
        if data.len() != self.dimension {
            return Err(Error::ShapeMismatch(format!(
                "data block of length {} against dimension {}",
                data.len(),
                self.dimension
            )));
        }
        for &v in data {
            self.field.check(v)?;
        }
        let mut word = vec![0u32; self.length];
        for (i, &d) in data.iter().enumerate() {
            if d == 0 {
                continue;
            }
            for c in 0..self.length {
                word[c] = self.field.add(word[c], self.field.mul(d, self.generator.at(i, c)));
            }
        }
        Ok(word)
    }

    /// Syndrome decoding. Corrects any pattern of weight within the radius
    /// and returns the data symbols; an uncorrectable syndrome is an error,
    /// never a silent guess.
    pub fn decode(&self, word: &[u32]) -> Result<Vec<u32>> {
        if word.len() != self.length {
            return Err(Error::ShapeMismatch(format!(
                "received word of length {} against code length {}",
                word.len(),
                self.length
            )));
        }
        for &v in word {
            self.field.check(v)?;
        }
        let syndrome = self.check.mul_vec(word)?;
        let key = symbols_to_index(&syndrome, self.field.q as u32);
        let Some(pattern) = self.table.get(&key) else {
            return Err(Error::TooManyErrors(self.radius));
        };
        let mut corrected = word.to_vec();
        for &(pos, val) in pattern {
            corrected[pos] = self.field.sub(corrected[pos], val);
        }
        Ok(corrected[..self.dimension].to_vec())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "kind": self.kind.name(),
            "N": self.length,
            "K": self.dimension,
            "q": self.field.q,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let kind = v["kind"].as_str().ok_or_else(|| Error::DomainError("code kind missing".into()))?;
        let n_len = v["N"].as_u64().ok_or_else(|| Error::DomainError("code length missing".into()))? as usize;
        let k_dim = v["K"].as_u64().ok_or_else(|| Error::DomainError("code dimension missing".into()))? as usize;
        let q = v["q"].as_u64().ok_or_else(|| Error::DomainError("code alphabet missing".into()))?;
        match kind {
            "hamming" => {
                let r = (n_len + 1).trailing_zeros();
                if q != 2 || n_len + 1 != 1 << r || k_dim + r as usize != n_len {
                    return Err(Error::DomainError(format!(
                        "({n_len}, {k_dim}) over GF({q}) is not a binary Hamming shape"
                    )));
                }
                Self::hamming(r)
            }
            "reed-solomon" => Self::reed_solomon(n_len, k_dim, q),
            other => Err(Error::DomainError(format!("unknown code kind {other}"))),
        }
    }
}

fn check_transpose(m: &FMatrix) -> FMatrix {
    let mut out = FMatrix::zero(m.field, m.cols, m.rows);
    for r in 0..m.rows {
        for c in 0..m.cols {
            out.set(c, r, m.at(r, c));
        }
    }
    out
}

/// Minimum distance with a proof the code actually attains it: exhaustive
/// weight enumeration when the message space is small, otherwise the MDS
/// criterion (every K generator columns independent).
fn certified_minimum_distance(generator: &FMatrix) -> Result<usize> {
    let field = generator.field;
    let (k_dim, n_len) = (generator.rows, generator.cols);
    let span = pow_u128(field.q as u32, k_dim as u32);
    if span <= 1 << 16 {
        let mut best = n_len;
        for msg_idx in 1..span as u64 {
            let msg = index_to_symbols(msg_idx, field.q as u32, k_dim as u32);
            let mut weight = 0usize;
            for c in 0..n_len {
                let mut acc = 0u32;
                for (i, &m) in msg.iter().enumerate() {
                    acc = field.add(acc, field.mul(m, generator.at(i, c)));
                }
                if acc != 0 {
                    weight += 1;
                }
            }
            best = best.min(weight);
        }
        return Ok(best);
    }
    let mut combos: u128 = 1;
    for w in 0..k_dim.min(n_len - k_dim) as u128 {
        combos = combos * (n_len as u128 - w) / (w + 1);
    }
    if combos > 200_000 {
        return Err(Error::EnumerationCapExceeded { needed: combos, cap: 200_000 });
    }
    let mut choice: Vec<usize> = (0..k_dim).collect();
    loop {
        let mut sub = FMatrix::zero(field, k_dim, k_dim);
        for (j, &c) in choice.iter().enumerate() {
            for r in 0..k_dim {
                sub.set(r, j, generator.at(r, c));
            }
        }
        if sub.rank() < k_dim {
            return Err(Error::DomainError(
                "code is not MDS and too large for exhaustive distance enumeration".to_string(),
            ));
        }
        // next K-combination of columns in lexicographic order
        let mut i = k_dim;
        loop {
            if i == 0 {
                return Ok(n_len - k_dim + 1);
            }
            i -= 1;
            if choice[i] != i + n_len - k_dim {
                break;
            }
        }
        choice[i] += 1;
        for j in i + 1..k_dim {
            choice[j] = choice[j - 1] + 1;
        }
    }
}

fn block_count(p: &WiretapProtocol, code: &LinearCode) -> Result<usize> {
    if p.q() != code.q() {
        return Err(Error::ShapeMismatch(format!(
            "protocol alphabet {} against code alphabet {}",
            p.q(),
            code.q()
        )));
    }
    let n = p.n() as usize;
    if n % code.dimension() != 0 {
        return Err(Error::ShapeMismatch(format!(
            "code dimension {} does not divide the protocol block length {n}",
            code.dimension()
        )));
    }
    Ok(n / code.dimension())
}

/// Wiretap-encodes with an explicit seed, then channel-encodes blockwise.
pub fn compose_encode_with_seed(
    p: &WiretapProtocol,
    code: &LinearCode,
    x: u64,
    z: u64,
) -> Result<Vec<u32>> {
    let blocks = block_count(p, code)?;
    let inner = index_to_symbols(p.encode_with_seed(x, z)?, p.q(), p.n());
    let mut out = Vec::with_capacity(blocks * code.length());
    for chunk in inner.chunks(code.dimension()) {
        out.extend(code.encode(chunk)?);
    }
    Ok(out)
}

pub fn compose_encode(
    p: &WiretapProtocol,
    code: &LinearCode,
    x: u64,
    rng: &mut impl Rng,
) -> Result<Vec<u32>> {
    let z = rng.gen_range(0..p.seed_span());
    compose_encode_with_seed(p, code, x, z)
}

/// Channel-decodes each block, then wiretap-decodes. Decoder failures
/// propagate as `TooManyErrors`.
pub fn compose_decode(code: &LinearCode, p: &WiretapProtocol, word: &[u32]) -> Result<u64> {
    let blocks = block_count(p, code)?;
    if word.len() != blocks * code.length() {
        return Err(Error::ShapeMismatch(format!(
            "received word of length {} against {} blocks of {}",
            word.len(),
            blocks,
            code.length()
        )));
    }
    let mut inner = Vec::with_capacity(p.n() as usize);
    for chunk in word.chunks(code.length()) {
        inner.extend(code.decode(chunk)?);
    }
    p.decode(symbols_to_index(&inner, p.q()))
}

/// Rate of the composition: (m/n) · (K/N).
pub fn composite_rate(p: &WiretapProtocol, code: &LinearCode) -> BigRational {
    let outer = BigRational::new(BigInt::from(p.m()), BigInt::from(p.n()));
    outer * code.rate()
}

/// The composition packaged as a protocol of its own, over codeword symbols.
/// The declared targets carry over from the outer protocol; they are only
/// meaningful when that protocol withstands linear observations, not just
/// coordinate ones.
pub fn composed_protocol(p: WiretapProtocol, code: &LinearCode, cap: u128) -> Result<WiretapProtocol> {
    let blocks = block_count(&p, code)?;
    let q = p.q();
    let n = (blocks * code.length()) as u32;
    let (m, r) = (p.m(), p.r());
    let declared = p.declared().clone();
    let label = format!("{}+{}({},{})", p.label(), code.kind().name(), code.length(), code.dimension());
    let shared = Arc::new(p);
    let enc_p = Arc::clone(&shared);
    let enc_code = code.clone();
    let encode_fn = Box::new(move |x: u64, z: u64| {
        Ok(symbols_to_index(&compose_encode_with_seed(&enc_p, &enc_code, x, z)?, q))
    });
    let dec_p = Arc::clone(&shared);
    let dec_code = code.clone();
    let decode_fn = Box::new(move |y: u64| {
        compose_decode(&dec_code, &dec_p, &index_to_symbols(y, q, n))
    });
    WiretapProtocol::new(q, m, n, r, encode_fn, decode_fn, declared, &label, cap)
}

/// Per-symbol one-time pad over a power-of-two alphabet: n = 2m, codeword
/// (x₁⊕p₁, …, x_m⊕p_m, p₁, …, p_m). Any single coordinate is uniform.
pub fn symbol_pad_protocol(q: u32, m: u32, cap: u128) -> Result<WiretapProtocol> {
    if !q.is_power_of_two() {
        return Err(Error::DomainError(format!("seed indexing needs a power-of-two alphabet, not {q}")));
    }
    let bits = q.trailing_zeros();
    let n = 2 * m;
    let r = m * bits;
    let enc = move |x: u64, z: u64| {
        let xs = index_to_symbols(x, q, m);
        let ps = index_to_symbols(z, q, m);
        let mut out: Vec<u32> = xs.iter().zip(&ps).map(|(&a, &b)| a ^ b).collect();
        out.extend_from_slice(&ps);
        Ok(symbols_to_index(&out, q))
    };
    let dec = move |y: u64| {
        let syms = index_to_symbols(y, q, n);
        let xs: Vec<u32> = (0..m as usize).map(|i| syms[i] ^ syms[i + m as usize]).collect();
        Ok(symbols_to_index(&xs, q))
    };
    let declared = DeclaredTargets { t: 1, epsilon: BigRational::zero(), gamma: BigRational::zero() };
    WiretapProtocol::new(q, m, n, r, Box::new(enc), Box::new(dec), declared, "symbol-pad", cap)
}

/// One conditioned linear observation of the composed codeword.
#[derive(Debug, Clone)]
pub struct LinearObservationRow {
    pub w: Vec<u32>,
    pub probability: BigRational,
    pub distance: BigRational,
    /// Whether the conditional codeword support is a uniform affine
    /// subspace; only checked over GF(2).
    pub affine_support: Option<bool>,
}

/// Exact distance profile of the message conditioned on L · codeword.
#[derive(Debug, Clone)]
pub struct LinearObservationReport {
    pub observation_rank: usize,
    pub rows: Vec<LinearObservationRow>,
    pub worst_distance: BigRational,
    pub epsilon_declared: BigRational,
    pub all_affine: Option<bool>,
}

impl LinearObservationReport {
    pub fn within_declared(&self) -> bool {
        self.worst_distance <= self.epsilon_declared
    }

    pub fn to_json(&self, params: Value) -> Value {
        json!({
            "params": params,
            "observation_rank": self.observation_rank,
            "rows": self.rows.iter().map(|r| json!({
                "w": r.w,
                "probability": rat_to_string(&r.probability),
                "distance": rat_to_string(&r.distance),
                "affine_support": r.affine_support,
            })).collect::<Vec<_>>(),
            "worst_distance": rat_to_string(&self.worst_distance),
            "epsilon_declared": rat_to_string(&self.epsilon_declared),
            "all_affine": self.all_affine,
            "within_declared": self.within_declared(),
        })
    }
}

/// Conditions the message on L · codeword for every observation value and
/// reports the exact per-observation distance from uniform, together with a
/// structural check that each conditional wiretap-codeword source is a
/// uniform affine subspace (the property the composition security rests on).
pub fn linear_observation_report(
    p: &WiretapProtocol,
    code: &LinearCode,
    l: &FMatrix,
    cap: u128,
) -> Result<LinearObservationReport> {
    let blocks = block_count(p, code)?;
    let outer_len = blocks * code.length();
    if l.cols != outer_len {
        return Err(Error::ShapeMismatch(format!(
            "observation matrix has {} columns against codeword length {outer_len}",
            l.cols
        )));
    }
    if l.field.q != code.field().q {
        return Err(Error::ShapeMismatch(format!(
            "observation field {} against code field {}",
            l.field.q,
            code.field().q
        )));
    }
    let work = p.message_span() as u128 * p.seed_span() as u128;
    if work > cap {
        return Err(Error::EnumerationCapExceeded { needed: work, cap });
    }
    let obs_span = pow_u128(p.q(), l.rows as u32);
    if obs_span > cap {
        return Err(Error::EnumerationCapExceeded { needed: obs_span, cap });
    }
    let mut grouped: BTreeMap<u64, (BTreeMap<u64, u64>, BTreeMap<u64, u64>)> = BTreeMap::new();
    for x in 0..p.message_span() {
        for z in 0..p.seed_span() {
            let y = p.encode_with_seed(x, z)?;
            let codeword = compose_encode_with_seed(p, code, x, z)?;
            let w = symbols_to_index(&l.mul_vec(&codeword)?, p.q());
            let entry = grouped.entry(w).or_default();
            *entry.0.entry(x).or_insert(0) += 1;
            *entry.1.entry(y).or_insert(0) += 1;
        }
    }
    let msg_span = p.message_span();
    let check_affine = p.q() == 2;
    let rows: Vec<LinearObservationRow> = grouped
        .into_par_iter()
        .map(|(w, (msg_counts, support))| {
            let obs_total: u64 = msg_counts.values().sum();
            let probability = BigRational::new(BigInt::from(obs_total), BigInt::from(work));
            let u_msg = BigRational::new(BigInt::one(), BigInt::from(msg_span));
            let mut distance = BigRational::zero();
            for x in 0..msg_span {
                let c = msg_counts.get(&x).copied().unwrap_or(0);
                distance += (BigRational::new(BigInt::from(c), BigInt::from(obs_total)) - &u_msg).abs();
            }
            distance /= BigRational::from_integer(BigInt::from(2));
            let affine_support = check_affine.then(|| uniform_affine_support(&support));
            LinearObservationRow {
                w: index_to_symbols(w, p.q(), l.rows as u32),
                probability,
                distance,
                affine_support,
            }
        })
        .collect();
    let worst_distance =
        rows.iter().map(|r| &r.distance).max().cloned().unwrap_or_else(BigRational::zero);
    let all_affine = check_affine
        .then(|| rows.iter().all(|r| r.affine_support == Some(true)));
    Ok(LinearObservationReport {
        observation_rank: l.rank(),
        rows,
        worst_distance,
        epsilon_declared: p.declared().epsilon.clone(),
        all_affine,
    })
}

/// True when the counted support is an affine GF(2) subspace carrying equal
/// mass everywhere.
fn uniform_affine_support(support: &BTreeMap<u64, u64>) -> bool {
    let mut counts = support.values();
    let Some(&first_count) = counts.next() else {
        return false;
    };
    if counts.any(|&c| c != first_count) {
        return false;
    }
    let mut points = support.keys();
    let base = *points.next().expect("support is nonempty");
    let mut basis: Vec<u64> = Vec::new();
    for &s in points {
        let mut v = s ^ base;
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    support.len() as u128 == 1u128 << basis.len()
}

/// Seed through the side channel, extractor preimage through the main
/// channel; the decoder is the extractor itself. Every member matrix of the
/// family is surjective, so the main-channel marginal is exactly uniform.
#[derive(Debug, Clone)]
pub struct GeneralWiretapProtocol {
    lse: LinearSeededExtractor,
}

impl GeneralWiretapProtocol {
    pub fn new(lse: LinearSeededExtractor) -> Self {
        GeneralWiretapProtocol { lse }
    }

    pub fn extractor(&self) -> &LinearSeededExtractor {
        &self.lse
    }

    pub fn main_bits(&self) -> u32 {
        self.lse.n()
    }

    /// The side channel carries exactly the extractor seed.
    pub fn side_bits(&self) -> u32 {
        self.lse.t()
    }

    pub fn message_bits(&self) -> u32 {
        self.lse.m()
    }

    pub fn block_length(&self) -> u32 {
        self.lse.n() + self.lse.t()
    }

    pub fn rate(&self) -> f64 {
        self.lse.m() as f64 / self.block_length() as f64
    }

    /// Uniform seed, uniform point of that seed's fiber over x.
    pub fn encode(&self, x: u64, rng: &mut impl Rng) -> Result<(u64, u64)> {
        let (side, main) = self.lse.invert(x, rng)?;
        Ok((main, side))
    }

    pub fn decode(&self, main: u64, side: u64) -> Result<u64> {
        if main >> self.main_bits() != 0 {
            return Err(Error::ShapeMismatch(format!(
                "main-channel string {main} does not fit {} bits",
                self.main_bits()
            )));
        }
        if side >> self.side_bits() != 0 {
            return Err(Error::ShapeMismatch(format!(
                "side-channel string {side} does not fit {} bits",
                self.side_bits()
            )));
        }
        self.lse.extract(main, side)
    }

    /// Exact law of the main-channel string for a uniform message.
    pub fn main_marginal(&self, cap: u128) -> Result<ExactDist> {
        let work = pow_u128(2, self.main_bits() + self.side_bits());
        if work > cap {
            return Err(Error::EnumerationCapExceeded { needed: work, cap });
        }
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for z in 0..self.lse.seed_count() {
            for y in 0..1u64 << self.message_bits() {
                let (particular, kernel) = self.lse.fiber(z, y)?;
                for pick in 0..1u64 << kernel.len() {
                    let mut v = particular;
                    for (i, &b) in kernel.iter().enumerate() {
                        if pick >> i & 1 == 1 {
                            v ^= b;
                        }
                    }
                    *counts.entry(v).or_insert(0) += 1;
                }
            }
        }
        ExactDist::from_counts(2, self.main_bits(), counts, cap)
    }

    pub fn params_json(&self) -> Value {
        json!({
            "label": "side-channel",
            "main_bits": self.main_bits(),
            "side_bits": self.side_bits(),
            "message_bits": self.message_bits(),
            "rate": self.rate(),
            "extractor": self.lse.to_json(),
        })
    }
}

/// Explicit function table on bit strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTable {
    in_bits: u32,
    out_bits: u32,
    table: Vec<u64>,
}

impl TruthTable {
    pub fn new(in_bits: u32, out_bits: u32, table: Vec<u64>) -> Result<Self> {
        if in_bits > 20 {
            return Err(Error::DomainError(format!("a 2^{in_bits}-entry table is beyond desk scale")));
        }
        if out_bits > 63 {
            return Err(Error::DomainError(format!("{out_bits} output bits do not fit an entry")));
        }
        if table.len() != 1 << in_bits {
            return Err(Error::ShapeMismatch(format!(
                "table with {} entries against 2^{in_bits} inputs",
                table.len()
            )));
        }
        if table.iter().any(|&v| v >> out_bits != 0) {
            return Err(Error::OutOfRange(format!("table entry does not fit {out_bits} bits")));
        }
        Ok(TruthTable { in_bits, out_bits, table })
    }

    pub fn from_fn(in_bits: u32, out_bits: u32, f: impl Fn(u64) -> u64) -> Result<Self> {
        if in_bits > 20 {
            return Err(Error::DomainError(format!("a 2^{in_bits}-entry table is beyond desk scale")));
        }
        Self::new(in_bits, out_bits, (0..1u64 << in_bits).map(f).collect())
    }

    pub fn identity(bits: u32) -> Result<Self> {
        Self::from_fn(bits, bits, |v| v)
    }

    pub fn constant(in_bits: u32, out_bits: u32, value: u64) -> Result<Self> {
        Self::from_fn(in_bits, out_bits, |_| value)
    }

    pub fn projection(in_bits: u32, coords: &[u32]) -> Result<Self> {
        if coords.iter().any(|&c| c >= in_bits) {
            return Err(Error::OutOfRange(format!("projection coordinate outside 0..{in_bits}")));
        }
        let coords = coords.to_vec();
        Self::from_fn(in_bits, coords.len() as u32, move |v| {
            coords.iter().enumerate().fold(0, |acc, (i, &c)| acc | (v >> c & 1) << i)
        })
    }

    pub fn in_bits(&self) -> u32 {
        self.in_bits
    }

    pub fn out_bits(&self) -> u32 {
        self.out_bits
    }

    pub fn eval(&self, v: u64) -> Result<u64> {
        self.table
            .get(v as usize)
            .copied()
            .ok_or_else(|| Error::OutOfRange(format!("input {v} does not fit {} bits", self.in_bits)))
    }

    /// Entries in input order, each as a fixed-width big-endian hex group.
    pub fn to_hex(&self) -> String {
        let width = (self.out_bits as usize).div_ceil(4).max(1);
        self.table.iter().map(|v| format!("{v:0width$x}")).collect()
    }

    pub fn from_hex(in_bits: u32, out_bits: u32, hex: &str) -> Result<Self> {
        let width = (out_bits as usize).div_ceil(4).max(1);
        if hex.len() != width << in_bits {
            return Err(Error::ShapeMismatch(format!(
                "hex table of {} digits against {} entries of width {width}",
                hex.len(),
                1u64 << in_bits
            )));
        }
        let table = (0..1usize << in_bits)
            .map(|i| {
                u64::from_str_radix(&hex[i * width..(i + 1) * width], 16)
                    .map_err(|e| Error::DomainError(format!("bad hex table entry: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(in_bits, out_bits, table)
    }
}

/// What the intruder sees of the side channel: everything, or a function
/// table of its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SideTap {
    Reveal,
    Table(TruthTable),
}

/// An arbitrary pair of observation functions, one per channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralAdversary {
    pub main_tap: TruthTable,
    pub side_tap: SideTap,
}

impl GeneralAdversary {
    pub fn new(main_tap: TruthTable, side_tap: SideTap) -> Self {
        GeneralAdversary { main_tap, side_tap }
    }

    /// Total observed bits once the side width is known.
    pub fn total_bits(&self, side_bits: u32) -> u32 {
        self.main_tap.out_bits()
            + match &self.side_tap {
                SideTap::Reveal => side_bits,
                SideTap::Table(t) => t.out_bits(),
            }
    }

    pub fn to_json(&self, side_bits: u32) -> Value {
        let c2 = match &self.side_tap {
            SideTap::Reveal => json!("identity"),
            SideTap::Table(t) => json!({
                "in_bits": t.in_bits(),
                "out_bits": t.out_bits(),
                "table_hex": t.to_hex(),
            }),
        };
        json!({
            "c1": {
                "in_bits": self.main_tap.in_bits(),
                "out_bits": self.main_tap.out_bits(),
                "table_hex": self.main_tap.to_hex(),
            },
            "c2": c2,
            "t": self.total_bits(side_bits),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let parse_table = |t: &Value| -> Result<TruthTable> {
            let in_bits = t["in_bits"].as_u64().ok_or_else(|| Error::DomainError("in_bits missing".into()))? as u32;
            let out_bits = t["out_bits"].as_u64().ok_or_else(|| Error::DomainError("out_bits missing".into()))? as u32;
            let hex = t["table_hex"].as_str().ok_or_else(|| Error::DomainError("table_hex missing".into()))?;
            TruthTable::from_hex(in_bits, out_bits, hex)
        };
        let main_tap = parse_table(&v["c1"])?;
        let side_tap = if v["c2"] == json!("identity") {
            SideTap::Reveal
        } else {
            SideTap::Table(parse_table(&v["c2"])?)
        };
        let adv = GeneralAdversary { main_tap, side_tap };
        if let (Some(t), SideTap::Table(c2)) = (v["t"].as_u64(), &adv.side_tap) {
            let stated = adv.main_tap.out_bits() as u64 + c2.out_bits() as u64;
            if t != stated {
                return Err(Error::DomainError(format!(
                    "stated total {t} disagrees with the tables' {stated} output bits"
                )));
            }
        }
        Ok(adv)
    }
}

/// One observation of the general adversary: the two channel views, the
/// main-channel preimage count under C₁, and the exact conditional message
/// distance.
#[derive(Debug, Clone)]
pub struct GeneralObservationRow {
    pub main_view: u64,
    pub side_view: u64,
    pub probability: BigRational,
    pub main_preimages: u64,
    pub few_preimages: bool,
    pub distance: BigRational,
}

/// Exact report against a general adversary. Observations whose main view
/// has fewer than 2^{n−t₁−αn} preimages are classified as the bad event; the
/// leakage splits into that mass plus the observations whose conditional
/// distance exceeds the Markov level ε derived from the measured
/// seed-averaged distance.
#[derive(Debug, Clone)]
pub struct GeneralAdversaryReport {
    pub main_tap_bits: u32,
    pub side_tap_bits: u32,
    pub alpha: BigRational,
    pub rows: Vec<GeneralObservationRow>,
    pub bad_mass: BigRational,
    /// bad_mass ≤ 2^{−αn}, checked exactly.
    pub classifier_within_bound: bool,
    /// Markov level: an upper square root of the average good-observation
    /// distance, so the mass above it is at most ε itself.
    pub epsilon: BigRational,
    pub gamma_measured: BigRational,
    pub leakage_bound: BigRational,
    pub worst_distance: BigRational,
    /// Minimum conditional message entropy over observations, in bits.
    pub equivocation: f64,
}

impl GeneralAdversaryReport {
    pub fn to_json(&self, params: Value) -> Value {
        json!({
            "params": params,
            "main_tap_bits": self.main_tap_bits,
            "side_tap_bits": self.side_tap_bits,
            "alpha": rat_to_string(&self.alpha),
            "rows": self.rows.iter().map(|r| json!({
                "main_view": r.main_view,
                "side_view": r.side_view,
                "probability": rat_to_string(&r.probability),
                "main_preimages": r.main_preimages,
                "few_preimages": r.few_preimages,
                "distance": rat_to_string(&r.distance),
            })).collect::<Vec<_>>(),
            "bad_mass": rat_to_string(&self.bad_mass),
            "classifier_within_bound": self.classifier_within_bound,
            "epsilon": rat_to_string(&self.epsilon),
            "gamma_measured": rat_to_string(&self.gamma_measured),
            "leakage_bound": rat_to_string(&self.leakage_bound),
            "worst_distance": rat_to_string(&self.worst_distance),
            "equivocation": self.equivocation,
        })
    }
}

fn small_u32(v: &BigInt, what: &str) -> Result<u32> {
    v.to_u32().ok_or_else(|| Error::OutOfRange(format!("{what} {v} is beyond desk scale")))
}

/// Exhaustively conditions the message on (C₁(main), C₂(side)) and measures
/// leakage against the preimage-count classifier at the given α.
pub fn general_adversary_report(
    p: &GeneralWiretapProtocol,
    adv: &GeneralAdversary,
    alpha: &BigRational,
    cap: u128,
) -> Result<GeneralAdversaryReport> {
    let (n, d, m) = (p.main_bits(), p.side_bits(), p.message_bits());
    if adv.main_tap.in_bits() != n {
        return Err(Error::ShapeMismatch(format!(
            "C₁ reads {} bits but the main channel carries {n}",
            adv.main_tap.in_bits()
        )));
    }
    if let SideTap::Table(t) = &adv.side_tap {
        if t.in_bits() != d {
            return Err(Error::ShapeMismatch(format!(
                "C₂ reads {} bits but the side channel carries {d}",
                t.in_bits()
            )));
        }
    }
    if alpha.is_negative() {
        return Err(Error::DomainError("α must be nonnegative".to_string()));
    }
    let work = pow_u128(2, n + d);
    if work > cap {
        return Err(Error::EnumerationCapExceeded { needed: work, cap });
    }
    let t1 = adv.main_tap.out_bits();
    let mut preimages = vec![0u64; 1 << t1];
    for v in 0..1u64 << n {
        preimages[adv.main_tap.eval(v)? as usize] += 1;
    }
    // few(w₁) ⟺ count < 2^{n − t₁ − αn}, compared exactly in ℚ
    let exponent = BigRational::from_integer(BigInt::from(n as i64 - t1 as i64))
        - alpha * BigRational::from_integer(BigInt::from(n));
    let few = |count: u64| -> Result<bool> {
        if exponent <= BigRational::zero() {
            return Ok(false);
        }
        let num = small_u32(exponent.numer(), "threshold exponent numerator")?;
        let den = small_u32(exponent.denom(), "threshold exponent denominator")?;
        Ok(BigInt::from(count).pow(den) < BigInt::one() << (num as usize))
    };
    let lse = p.extractor();
    let mut grouped: BTreeMap<(u64, u64), BTreeMap<u64, u64>> = BTreeMap::new();
    for z in 0..1u64 << d {
        let w2 = match &adv.side_tap {
            SideTap::Reveal => z,
            SideTap::Table(t) => t.eval(z)?,
        };
        for v in 0..1u64 << n {
            let x = lse.extract(v, z)?;
            let w1 = adv.main_tap.eval(v)?;
            *grouped.entry((w1, w2)).or_default().entry(x).or_insert(0) += 1;
        }
    }
    let total = BigInt::from(1u64) << (n + d) as usize;
    let analyzed: Vec<(GeneralObservationRow, f64)> = grouped
        .into_par_iter()
        .map(|((w1, w2), counts)| -> Result<(GeneralObservationRow, f64)> {
            let obs_total: u64 = counts.values().sum();
            let probability = BigRational::new(BigInt::from(obs_total), total.clone());
            let u_msg = BigRational::new(BigInt::one(), BigInt::one() << m as usize);
            let mut distance = BigRational::zero();
            for x in 0..1u64 << m {
                let c = counts.get(&x).copied().unwrap_or(0);
                distance += (BigRational::new(BigInt::from(c), BigInt::from(obs_total)) - &u_msg).abs();
            }
            distance /= BigRational::from_integer(BigInt::from(2));
            let mut entropy = 0f64;
            for &c in counts.values() {
                let pf = c as f64 / obs_total as f64;
                entropy -= pf * pf.log2();
            }
            let count = preimages[w1 as usize];
            let row = GeneralObservationRow {
                main_view: w1,
                side_view: w2,
                probability,
                main_preimages: count,
                few_preimages: few(count)?,
                distance,
            };
            Ok((row, entropy))
        })
        .collect::<Result<Vec<_>>>()?;
    let equivocation = analyzed
        .iter()
        .map(|(_, e)| *e)
        .fold(p.message_bits() as f64, f64::min);
    let rows: Vec<GeneralObservationRow> = analyzed.into_iter().map(|(r, _)| r).collect();
    let mut bad_mass = BigRational::zero();
    let mut avg_good = BigRational::zero();
    let mut worst_distance = BigRational::zero();
    for row in &rows {
        if row.few_preimages {
            bad_mass += &row.probability;
        } else {
            avg_good += &row.probability * &row.distance;
        }
        if row.distance > worst_distance {
            worst_distance = row.distance.clone();
        }
    }
    let epsilon = rat_sqrt_upper(&avg_good);
    let mut leaky_good = BigRational::zero();
    for row in &rows {
        if !row.few_preimages && row.distance > epsilon {
            leaky_good += &row.probability;
        }
    }
    let gamma_measured = &bad_mass + leaky_good;
    let leakage_bound = &bad_mass + &epsilon;
    // Prop-style classifier bound: bad_mass ≤ 2^{−αn}
    let alpha_n = alpha * BigRational::from_integer(BigInt::from(n));
    let classifier_within_bound = {
        let num = small_u32(alpha_n.numer(), "classifier exponent numerator")?;
        let den = small_u32(alpha_n.denom(), "classifier exponent denominator")?;
        let lhs = bad_mass.numer().pow(den) * (BigInt::one() << num as usize);
        let rhs = bad_mass.denom().pow(den);
        lhs <= rhs
    };
    Ok(GeneralAdversaryReport {
        main_tap_bits: t1,
        side_tap_bits: match &adv.side_tap {
            SideTap::Reveal => d,
            SideTap::Table(t) => t.out_bits(),
        },
        alpha: alpha.clone(),
        rows,
        bad_mass,
        classifier_within_bound,
        epsilon,
        gamma_measured,
        leakage_bound,
        worst_distance,
        equivocation,
    })
}
