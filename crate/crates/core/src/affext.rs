//! Seedless affine extractors and their invertible seeded composition.
//!
//! An affine extractor is a fixed map GF(2)^n → GF(2)^l whose output is close
//! to uniform whenever the input is uniform on a large enough affine subspace.
//! Composing one with a strong linear seeded extractor yields an extractor
//! that carries its own seed: the input is a pair (s, x), the working seed is
//! s masked with the affine extractor's output on x, and inversion only has
//! to re-mask a uniformly chosen seed. Everything here is exhaustive and
//! exact, so input lengths are capped at desk scale.

use crate::dists::{mask_to_index, ExactDist, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::gf::Gf2Matrix;
use crate::linext::LinearSeededExtractor;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use std::io::{BufRead, BufReader, Read as _, Write as _};
use std::path::Path;

/// Hard ceiling on source-enumeration work (sources × points per source).
const AFFINE_ENUM_CAP: u128 = 1 << 27;

/// Largest input length a materialized truth table may use.
const TABLE_INPUT_CAP: u32 = 20;

fn ones(n: u32) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// A quadratic form over GF(2)^n: an upper-triangular coefficient matrix,
/// a linear mask and a constant bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadraticForm {
    n: u32,
    /// rows[i] holds the coefficients a_{ij} for j > i.
    rows: Vec<u64>,
    linear: u64,
    constant: bool,
}

impl QuadraticForm {
    pub fn new(n: u32, pairs: &[(u32, u32)], linear: u64, constant: bool) -> Result<Self> {
        if n > 63 {
            return Err(Error::DomainError(format!("quadratic forms support n <= 63, got {n}")));
        }
        if linear & !ones(n) != 0 {
            return Err(Error::OutOfRange("linear mask has bits beyond n".into()));
        }
        let mut rows = vec![0u64; n as usize];
        for &(i, j) in pairs {
            if i >= j || j >= n {
                return Err(Error::OutOfRange(format!("coefficient pair ({i}, {j}) needs i < j < n")));
            }
            rows[i as usize] |= 1u64 << j;
        }
        Ok(QuadraticForm { n, rows, linear, constant })
    }

    /// x_0x_1 + x_2x_3 + …, the canonical full-rank form (n even).
    pub fn inner_product(n: u32) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::DomainError(format!("inner-product form needs even n, got {n}")));
        }
        let pairs: Vec<(u32, u32)> = (0..n / 2).map(|i| (2 * i, 2 * i + 1)).collect();
        QuadraticForm::new(n, &pairs, 0, false)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    #[inline]
    pub fn eval(&self, x: u64) -> bool {
        let mut acc = ((self.linear & x).count_ones() & 1) as u64;
        for (i, &row) in self.rows.iter().enumerate() {
            acc ^= (x >> i) & (row & x).count_ones() as u64;
        }
        (acc & 1 == 1) ^ self.constant
    }

    /// Rank of the associated symmetric bilinear matrix A + Aᵀ. The bias of
    /// the form on the full space is at most 2^{−rank/2}, and restricting to
    /// a codimension-c affine subspace lowers the rank by at most 2c.
    pub fn bilinear_rank(&self) -> usize {
        let n = self.n as usize;
        let mut sym = vec![0u64; n];
        for i in 0..n {
            sym[i] |= self.rows[i];
            for j in 0..i {
                sym[i] |= (self.rows[j] >> i & 1) << j;
            }
        }
        Gf2Matrix::new(sym, n).expect("rows are masked to n bits").rank()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let pairs: Vec<(u32, u32)> = (0..self.n)
            .flat_map(|i| {
                let row = self.rows[i as usize];
                (i + 1..self.n).filter_map(move |j| (row >> j & 1 == 1).then_some((i, j)))
            })
            .collect();
        serde_json::json!({
            "pairs": pairs,
            "linear": self.linear,
            "constant": self.constant,
        })
    }

    pub fn from_json(n: u32, v: &serde_json::Value) -> Result<Self> {
        let pairs: Vec<(u32, u32)> = serde_json::from_value(
            v.get("pairs").cloned().ok_or_else(|| Error::BadHeader("missing 'pairs'".into()))?,
        )?;
        let linear = v.get("linear").and_then(|x| x.as_u64()).unwrap_or(0);
        let constant = v.get("constant").and_then(|x| x.as_bool()).unwrap_or(false);
        QuadraticForm::new(n, &pairs, linear, constant)
    }
}

/// Exhaustive error certificate stored alongside a truth table.
#[derive(Debug, Clone, PartialEq)]
pub struct Certification {
    pub k: u32,
    pub epsilon: BigRational,
}

/// A concrete seedless affine extractor, either a bank of quadratic forms
/// (one output bit per form) or an explicit truth table.
#[derive(Debug, Clone)]
pub enum AffineExtractor {
    QuadraticBank {
        n: u32,
        forms: Vec<QuadraticForm>,
    },
    LookupTable {
        n: u32,
        l: u32,
        table: Vec<u64>,
        certification: Option<Certification>,
    },
}

impl AffineExtractor {
    pub fn quadratic_bank(n: u32, forms: Vec<QuadraticForm>) -> Result<Self> {
        if forms.is_empty() || forms.len() > 63 {
            return Err(Error::DomainError(format!("need between 1 and 63 forms, got {}", forms.len())));
        }
        if let Some(f) = forms.iter().find(|f| f.n() != n) {
            return Err(Error::ShapeMismatch(format!("form over GF(2)^{} in a bank over GF(2)^{n}", f.n())));
        }
        Ok(AffineExtractor::QuadraticBank { n, forms })
    }

    pub fn lookup_table(n: u32, l: u32, table: Vec<u64>) -> Result<Self> {
        if n > TABLE_INPUT_CAP {
            return Err(Error::EnumerationCapExceeded { needed: 1u128 << n, cap: 1 << TABLE_INPUT_CAP });
        }
        if l == 0 || l > 63 {
            return Err(Error::DomainError(format!("need 1 <= l <= 63, got l={l}")));
        }
        if table.len() != 1usize << n {
            return Err(Error::ShapeMismatch(format!("table has {} entries, need 2^{n}", table.len())));
        }
        if table.iter().any(|&y| y & !ones(l) != 0) {
            return Err(Error::OutOfRange("table entry has bits beyond l".into()));
        }
        Ok(AffineExtractor::LookupTable { n, l, table, certification: None })
    }

    pub fn n(&self) -> u32 {
        match self {
            AffineExtractor::QuadraticBank { n, .. } | AffineExtractor::LookupTable { n, .. } => *n,
        }
    }

    pub fn l(&self) -> u32 {
        match self {
            AffineExtractor::QuadraticBank { forms, .. } => forms.len() as u32,
            AffineExtractor::LookupTable { l, .. } => *l,
        }
    }

    #[inline]
    pub fn eval(&self, x: u64) -> u64 {
        match self {
            AffineExtractor::QuadraticBank { forms, .. } => forms
                .iter()
                .enumerate()
                .fold(0u64, |acc, (b, f)| acc | (f.eval(x) as u64) << b),
            AffineExtractor::LookupTable { table, .. } => table[x as usize],
        }
    }

    pub fn certification(&self) -> Option<&Certification> {
        match self {
            AffineExtractor::QuadraticBank { .. } => None,
            AffineExtractor::LookupTable { certification, .. } => certification.as_ref(),
        }
    }

    /// Materialize as a truth table, re-certifying nothing.
    pub fn to_lookup(&self) -> Result<AffineExtractor> {
        let table: Vec<u64> = (0..1u64 << self.n()).map(|x| self.eval(x)).collect();
        AffineExtractor::lookup_table(self.n(), self.l(), table)
    }

    /// Exhaustively measure the worst output distance from uniform over all
    /// k-dimensional affine sources and remember the result.
    pub fn certify(&mut self, k: u32) -> Result<&Certification> {
        if matches!(self, AffineExtractor::QuadraticBank { .. }) {
            return Err(Error::DomainError("only truth tables carry a certification; materialize first".into()));
        }
        let eps = self.measured_affine_error(k)?;
        match self {
            AffineExtractor::LookupTable { certification, .. } => {
                *certification = Some(Certification { k, epsilon: eps });
                Ok(certification.as_ref().expect("just stored"))
            }
            AffineExtractor::QuadraticBank { .. } => unreachable!(),
        }
    }

    pub fn measured_affine_error(&self, k: u32) -> Result<BigRational> {
        affine_error(|x| self.eval(x), self.n(), self.l(), k)
    }

    /// Truth-table file: one JSON header line, then 2^n little-endian entries
    /// of ceil(l/8) bytes each.
    pub fn write_table_file(&self, path: &Path) -> Result<()> {
        let (n, l, table, cert) = match self {
            AffineExtractor::LookupTable { n, l, table, certification } => (*n, *l, table, certification),
            AffineExtractor::QuadraticBank { .. } => {
                return Err(Error::DomainError("materialize the bank with to_lookup before writing".into()))
            }
        };
        let header = serde_json::json!({
            "n": n,
            "l": l,
            "certification": cert.as_ref().map(|c| {
                serde_json::json!({ "k": c.k, "epsilon": crate::dists::rat_to_string(&c.epsilon) })
            }),
        });
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{header}")?;
        let width = (l as usize + 7) / 8;
        for &y in table {
            out.write_all(&y.to_le_bytes()[..width])?;
        }
        Ok(())
    }

    pub fn read_table_file(path: &Path) -> Result<AffineExtractor> {
        let mut reader = BufReader::new(std::fs::File::open(path)?);
        let mut header_line = String::new();
        reader.read_line(&mut header_line)?;
        let header: serde_json::Value = serde_json::from_str(header_line.trim_end())?;
        let n = header.get("n").and_then(|x| x.as_u64()).ok_or_else(|| Error::BadHeader("missing 'n'".into()))? as u32;
        let l = header.get("l").and_then(|x| x.as_u64()).ok_or_else(|| Error::BadHeader("missing 'l'".into()))? as u32;
        if n > TABLE_INPUT_CAP || l == 0 || l > 63 {
            return Err(Error::BadHeader(format!("implausible table shape n={n}, l={l}")));
        }
        let width = (l as usize + 7) / 8;
        let mut body = Vec::new();
        reader.read_to_end(&mut body)?;
        if body.len() != width << n {
            return Err(Error::BadHeader(format!(
                "table body is {} bytes, need {} for n={n}, l={l}",
                body.len(),
                width << n
            )));
        }
        let table: Vec<u64> = body
            .chunks_exact(width)
            .map(|chunk| {
                let mut buf = [0u8; 8];
                buf[..width].copy_from_slice(chunk);
                u64::from_le_bytes(buf)
            })
            .collect();
        let mut ext = AffineExtractor::lookup_table(n, l, table)?;
        if let Some(c) = header.get("certification").filter(|c| !c.is_null()) {
            let k = c.get("k").and_then(|x| x.as_u64()).ok_or_else(|| Error::BadHeader("certification lacks 'k'".into()))? as u32;
            let eps_str = c
                .get("epsilon")
                .and_then(|x| x.as_str())
                .ok_or_else(|| Error::BadHeader("certification lacks 'epsilon'".into()))?;
            let epsilon = crate::dists::rat_from_string(eps_str)?;
            if let AffineExtractor::LookupTable { certification, .. } = &mut ext {
                *certification = Some(Certification { k, epsilon });
            }
        }
        Ok(ext)
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        match self {
            AffineExtractor::QuadraticBank { n, forms } => Ok(serde_json::json!({
                "kind": "quadratic-bank",
                "n": n,
                "forms": forms.iter().map(|f| f.to_json()).collect::<Vec<_>>(),
            })),
            AffineExtractor::LookupTable { .. } => {
                Err(Error::DomainError("truth tables live in table files, not JSON".into()))
            }
        }
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        match v.get("kind").and_then(|x| x.as_str()) {
            Some("quadratic-bank") => {
                let n = v.get("n").and_then(|x| x.as_u64()).ok_or_else(|| Error::BadHeader("missing 'n'".into()))? as u32;
                let forms = v
                    .get("forms")
                    .and_then(|x| x.as_array())
                    .ok_or_else(|| Error::BadHeader("missing 'forms'".into()))?
                    .iter()
                    .map(|f| QuadraticForm::from_json(n, f))
                    .collect::<Result<Vec<_>>>()?;
                AffineExtractor::quadratic_bank(n, forms)
            }
            other => Err(Error::BadHeader(format!("unknown affine extractor kind {other:?}"))),
        }
    }
}

/// Reduced-echelon bases of every k-dimensional subspace of GF(2)^n, each
/// with its pivot-column mask. Coset representatives of a subspace are
/// exactly the masks supported outside the pivot columns.
pub fn subspace_bases(n: u32, k: u32) -> Result<Vec<(Vec<u64>, u64)>> {
    if k > n || n > 24 {
        return Err(Error::DomainError(format!("need k <= n <= 24, got n={n}, k={k}")));
    }
    if k == 0 {
        return Ok(vec![(Vec::new(), 0)]);
    }
    let mut out = Vec::new();
    for pmask in 0..1u64 << n {
        if pmask.count_ones() != k {
            continue;
        }
        let pivots: Vec<u32> = (0..n).filter(|&j| pmask >> j & 1 == 1).collect();
        let free: Vec<(usize, u32)> = pivots
            .iter()
            .enumerate()
            .flat_map(|(i, &p)| (p + 1..n).filter(|&j| pmask >> j & 1 == 0).map(move |j| (i, j)))
            .collect();
        for assign in 0..1u64 << free.len() {
            let mut basis: Vec<u64> = pivots.iter().map(|&p| 1u64 << p).collect();
            for (b, &(i, j)) in free.iter().enumerate() {
                if assign >> b & 1 == 1 {
                    basis[i] |= 1u64 << j;
                }
            }
            out.push((basis, pmask));
        }
    }
    Ok(out)
}

/// Number of k-dimensional subspaces of GF(2)^n, via the cell decomposition
/// used by `subspace_bases`.
pub fn subspace_count(n: u32, k: u32) -> Result<u128> {
    if k > n || n > 24 {
        return Err(Error::DomainError(format!("need k <= n <= 24, got n={n}, k={k}")));
    }
    if k == 0 {
        return Ok(1);
    }
    let mut total = 0u128;
    for pmask in 0..1u64 << n {
        if pmask.count_ones() != k {
            continue;
        }
        let pivots: Vec<u32> = (0..n).filter(|&j| pmask >> j & 1 == 1).collect();
        let free: u32 = pivots
            .iter()
            .map(|&p| (p + 1..n).filter(|&j| pmask >> j & 1 == 0).count() as u32)
            .sum();
        total += 1u128 << free;
    }
    Ok(total)
}

fn enumeration_work(n: u32, k: u32) -> Result<u128> {
    let sources = subspace_count(n, k)? << (n - k);
    let work = sources << k;
    if work > AFFINE_ENUM_CAP {
        return Err(Error::EnumerationCapExceeded { needed: work, cap: AFFINE_ENUM_CAP });
    }
    Ok(work)
}

/// Exact worst statistical distance of `eval`'s output from uniform on
/// GF(2)^l, over every k-dimensional affine subspace of GF(2)^n.
pub fn affine_error<F>(eval: F, n: u32, l: u32, k: u32) -> Result<BigRational>
where
    F: Fn(u64) -> u64 + Sync,
{
    if l == 0 || l > 20 {
        return Err(Error::DomainError(format!("need 1 <= l <= 20, got l={l}")));
    }
    enumeration_work(n, k)?;
    let bases = subspace_bases(n, k)?;
    let comp_mask = ones(n);
    let worst_num: u64 = bases
        .par_iter()
        .map(|(basis, pmask)| {
            let mut counts = vec![0u64; 1usize << l];
            let mut worst = 0u64;
            let comp = comp_mask & !pmask;
            let mut rep = comp;
            loop {
                counts.fill(0);
                let mut x = rep;
                counts[eval(x) as usize] += 1;
                for c in 1..1u64 << k {
                    x ^= basis[c.trailing_zeros() as usize];
                    counts[eval(x) as usize] += 1;
                }
                let num: u64 = counts.iter().map(|&c| (c << l).abs_diff(1 << k)).sum();
                worst = worst.max(num);
                if rep == 0 {
                    break;
                }
                rep = (rep - 1) & comp;
            }
            worst
        })
        .max()
        .unwrap_or(0);
    Ok(BigRational::new(BigInt::from(worst_num), BigInt::from(2u128 << (k + l))))
}

/// A single-string invertible extractor built from a strong linear seeded
/// extractor and an affine extractor over the same input length. The input
/// is (s, x) with s in the low t bits; extraction runs the seeded extractor
/// on x with seed s ⊕ A(x)|_t.
#[derive(Debug, Clone)]
pub struct InvertibleAffineExtractor {
    lse: LinearSeededExtractor,
    aext: AffineExtractor,
    /// Per-seed surjective matrices, cached so evaluation is two matrix
    /// applications instead of a rank computation.
    effective: Vec<Gf2Matrix>,
    t: u32,
    n_prime: u32,
    m: u32,
}

impl InvertibleAffineExtractor {
    pub fn new(lse: LinearSeededExtractor, aext: AffineExtractor) -> Result<Self> {
        if aext.n() != lse.n() {
            return Err(Error::ShapeMismatch(format!(
                "affine extractor input GF(2)^{} does not match seeded extractor input GF(2)^{}",
                aext.n(),
                lse.n()
            )));
        }
        if aext.l() < lse.t() {
            return Err(Error::DomainError(format!(
                "affine extractor emits {} bits, seed needs {}",
                aext.l(),
                lse.t()
            )));
        }
        let (t, n_prime, m) = (lse.t(), lse.n(), lse.m());
        if t + n_prime > 63 {
            return Err(Error::DomainError(format!("total input length {} exceeds 63", t + n_prime)));
        }
        let effective = (0..lse.seed_count())
            .map(|z| lse.effective_matrix(z).map(|(mat, _)| mat))
            .collect::<Result<Vec<_>>>()?;
        Ok(InvertibleAffineExtractor { lse, aext, effective, t, n_prime, m })
    }

    /// The packaged eight-bit instance: four full-rank Toeplitz members on
    /// six data bits fed by a two-form quadratic bank. The best composed
    /// instance an offline search over full-rank member quadruples and form
    /// banks found; its worst dimension-5 error sits on the family-side
    /// floor.
    pub fn reference_instance() -> Self {
        let lse = LinearSeededExtractor::toeplitz_members(6, 2, &[15, 84, 66, 88])
            .expect("the packaged member seeds are full rank");
        // every nonzero combination of these two forms has bilinear rank 6
        let q1 = QuadraticForm::new(6, &[(0, 1), (2, 3), (4, 5)], 0, false)
            .expect("index pairs are in range");
        let q2 = QuadraticForm::new(6, &[(0, 3), (1, 2), (2, 4), (3, 4), (3, 5), (4, 5)], 0, false)
            .expect("index pairs are in range");
        let bank = AffineExtractor::quadratic_bank(6, vec![q1, q2]).expect("forms share one arity");
        InvertibleAffineExtractor::new(lse, bank).expect("bank width matches the seed length")
    }

    pub fn input_bits(&self) -> u32 {
        self.t + self.n_prime
    }

    pub fn output_bits(&self) -> u32 {
        self.m
    }

    pub fn seed_bits(&self) -> u32 {
        self.t
    }

    pub fn data_bits(&self) -> u32 {
        self.n_prime
    }

    pub fn seeded_part(&self) -> &LinearSeededExtractor {
        &self.lse
    }

    pub fn affine_part(&self) -> &AffineExtractor {
        &self.aext
    }

    fn split(&self, input: u64) -> (u64, u64) {
        (input & ones(self.t), input >> self.t)
    }

    #[inline]
    pub fn extract(&self, input: u64) -> Result<u64> {
        if input & !ones(self.input_bits()) != 0 {
            return Err(Error::OutOfRange(format!("input has bits beyond {}", self.input_bits())));
        }
        let (s, x) = self.split(input);
        let z = s ^ (self.aext.eval(x) & ones(self.t));
        Ok(self.effective[z as usize].mul_vec(x))
    }

    /// A uniform preimage of y: uniform working seed, uniform point on that
    /// seed's fiber, then the mask that makes the input carry the seed.
    pub fn invert(&self, y: u64, rng: &mut impl Rng) -> Result<u64> {
        let (z, x) = self.lse.invert(y, rng)?;
        let s = z ^ (self.aext.eval(x) & ones(self.t));
        Ok(x << self.t | s)
    }

    /// The preimage of y selected by a tape value in [0, 2^{t+n'−m}): the
    /// low t bits pick the working seed, the rest pick the fiber point.
    /// Running over all tapes enumerates every preimage exactly once.
    pub fn invert_indexed(&self, y: u64, tape: u64) -> Result<u64> {
        let free = self.n_prime - self.m;
        if tape & !ones(self.t + free) != 0 {
            return Err(Error::OutOfRange(format!("tape has bits beyond {}", self.t + free)));
        }
        let z = tape & ones(self.t);
        let (particular, kernel) = self.lse.fiber(z, y)?;
        if kernel.len() != free as usize {
            return Err(Error::DomainError(format!(
                "fiber of seed {z} has dimension {}, expected {free}",
                kernel.len()
            )));
        }
        let mut x = particular;
        for (b, &v) in kernel.iter().enumerate() {
            if tape >> (self.t + b as u32) & 1 == 1 {
                x ^= v;
            }
        }
        let s = z ^ (self.aext.eval(x) & ones(self.t));
        Ok(x << self.t | s)
    }

    /// The exact inverter output law: uniform over 2^{t + n' − m} preimages.
    pub fn invert_dist(&self, y: u64) -> Result<ExactDist> {
        let n = self.input_bits();
        let mut counts = Vec::new();
        for z in 0..self.lse.seed_count() {
            let (particular, kernel) = self.lse.fiber(z, y)?;
            for c in 0..1u64 << kernel.len() {
                let mut x = particular;
                for (b, &v) in kernel.iter().enumerate() {
                    if c >> b & 1 == 1 {
                        x ^= v;
                    }
                }
                let s = z ^ (self.aext.eval(x) & ones(self.t));
                counts.push((mask_to_index(x << self.t | s, n), 1u64));
            }
        }
        ExactDist::from_counts(2, n, counts, DEFAULT_CAP)
    }

    /// Worst output distance from uniform over all k-dimensional affine
    /// sources of the full (seed, data) input space.
    pub fn measured_affine_error(&self, k: u32) -> Result<BigRational> {
        affine_error(|inp| self.extract(inp).expect("inputs stay in range"), self.input_bits(), self.m, k)
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        Ok(serde_json::json!({
            "seeded": self.lse.to_json(),
            "affine": self.aext.to_json()?,
        }))
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let lse = LinearSeededExtractor::from_json(
            v.get("seeded").ok_or_else(|| Error::BadHeader("missing 'seeded'".into()))?,
        )?;
        let aext = AffineExtractor::from_json(
            v.get("affine").ok_or_else(|| Error::BadHeader("missing 'affine'".into()))?,
        )?;
        InvertibleAffineExtractor::new(lse, aext)
    }
}

/// What conditioning on one seeded-extractor output does to an affine
/// source, checked structurally, plus the composition error bound it buys.
#[derive(Debug, Clone)]
pub struct CompositionReport {
    /// Worst distance between E(X, A(X)|_t) and E(X, U_t) over the family.
    pub measured: BigRational,
    /// Worst affine-extractor error over every dimension the conditioning
    /// can reach (k − m through k).
    pub epsilon: BigRational,
    /// epsilon · 2^{t+3}.
    pub bound: BigRational,
    /// The bound proves nothing when it reaches 1.
    pub vacuous: bool,
    /// Every conditioned source was still affine of dimension >= k − m.
    pub closed_under_conditioning: bool,
}

/// Compare the data-dependent-seed composition against its proven bound on
/// every k-dimensional affine source.
pub fn composition_check(
    aext: &AffineExtractor,
    lse: &LinearSeededExtractor,
    k: u32,
) -> Result<CompositionReport> {
    let n = lse.n();
    let (t, m) = (lse.t(), lse.m());
    if aext.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "affine extractor over GF(2)^{}, seeded extractor over GF(2)^{n}",
            aext.n()
        )));
    }
    if aext.l() < t {
        return Err(Error::DomainError(format!("affine extractor emits {} bits, seed needs {t}", aext.l())));
    }
    if k > n {
        return Err(Error::DomainError(format!("k={k} exceeds n={n}")));
    }
    enumeration_work(n, k)?;
    let effective: Vec<Gf2Matrix> = (0..lse.seed_count())
        .map(|z| lse.effective_matrix(z).map(|(mat, _)| mat))
        .collect::<Result<Vec<_>>>()?;
    let tmask = ones(t);

    let bases = subspace_bases(n, k)?;
    let comp_mask = ones(n);
    let mut worst_num = 0u64;
    let mut closed = true;
    for (basis, pmask) in &bases {
        let comp = comp_mask & !pmask;
        let mut rep = comp;
        loop {
            let mut points = Vec::with_capacity(1 << k);
            let mut x = rep;
            points.push(x);
            for c in 1..1u64 << k {
                x ^= basis[c.trailing_zeros() as usize];
                points.push(x);
            }
            // law of E(x, A(x)|_t) against law of E(x, z) with independent z
            let mut data_seeded = vec![0u64; 1 << m];
            let mut true_seeded = vec![0u64; 1 << m];
            for &p in &points {
                let z = aext.eval(p) & tmask;
                data_seeded[effective[z as usize].mul_vec(p) as usize] += 1;
                for mat in &effective {
                    true_seeded[mat.mul_vec(p) as usize] += 1;
                }
            }
            let num: u64 = data_seeded
                .iter()
                .zip(&true_seeded)
                .map(|(&a, &b)| (a << t).abs_diff(b))
                .sum();
            worst_num = worst_num.max(num);

            for mat in &effective {
                closed &= conditioned_sources_stay_affine(&points, mat, k, m);
            }
            if rep == 0 {
                break;
            }
            rep = (rep - 1) & comp;
        }
    }
    let measured = BigRational::new(BigInt::from(worst_num), BigInt::from(2u128 << (k + t)));

    let mut epsilon = BigRational::zero();
    for j in k.saturating_sub(m)..=k {
        let e = affine_error(|x| aext.eval(x) & tmask, n, t, j)?;
        if e > epsilon {
            epsilon = e;
        }
    }
    let bound = &epsilon * BigRational::from_integer(BigInt::from(1u128 << (t + 3)));
    let vacuous = bound >= BigRational::one();
    Ok(CompositionReport { measured, epsilon, bound, vacuous, closed_under_conditioning: closed })
}

/// Split a source by one matrix's outputs and verify every part is a coset
/// of dimension at least k − m.
fn conditioned_sources_stay_affine(points: &[u64], mat: &Gf2Matrix, k: u32, m: u32) -> bool {
    let m_outputs = 1usize << mat.n_rows();
    let mut parts: Vec<Vec<u64>> = vec![Vec::new(); m_outputs];
    for &p in points {
        parts[mat.mul_vec(p) as usize].push(p);
    }
    parts.iter().filter(|part| !part.is_empty()).all(|part| {
        let x0 = part[0];
        let mut echelon: Vec<u64> = Vec::new();
        for &p in &part[1..] {
            let mut v = p ^ x0;
            for &row in &echelon {
                v = v.min(v ^ row);
            }
            if v != 0 {
                echelon.push(v);
                echelon.sort_unstable_by(|a, b| b.cmp(a));
            }
        }
        part.len() == 1usize << echelon.len() && echelon.len() as u32 >= k.saturating_sub(m)
    })
}
