//! Wiretap protocols: randomized encoders paired with deterministic
//! decoders, verified against the exact resilience definition.
//!
//! A protocol carries q-ary message strings of length m to codeword strings
//! of length n using r bits of encoder randomness. The verifier enumerates
//! the full joint law of (message, codeword), conditions on every
//! observation an intruder could make on up to t coordinates, and reports
//! the exact distance profile, leakage probability, and equivocation.

use crate::affext::InvertibleAffineExtractor;
use crate::dists::{
    duality_gap, index_to_mask, index_to_symbols, mask_to_index, pow_u128, rat_to_f64, rat_to_string,
    rat_sqrt_upper, symbols_to_index, ExactDist,
};
use crate::error::{Error, Result};
use crate::sfext::SfextParams;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

type EncodeFn = Box<dyn Fn(u64, u64) -> Result<u64> + Send + Sync>;
type DecodeFn = Box<dyn Fn(u64) -> Result<u64> + Send + Sync>;

/// Declared protocol targets: against any t observed coordinates, all but a
/// γ-mass of observations leave the message ε-close to uniform.
#[derive(Debug, Clone)]
pub struct DeclaredTargets {
    pub t: u32,
    pub epsilon: BigRational,
    pub gamma: BigRational,
}

/// Encoder/decoder pair over a q-ary alphabet. Encoding draws an r-bit seed;
/// decoding is deterministic and must undo every seed's encoding.
pub struct WiretapProtocol {
    q: u32,
    m: u32,
    n: u32,
    r: u32,
    encode_fn: EncodeFn,
    decode_fn: DecodeFn,
    declared: DeclaredTargets,
    label: String,
}

impl std::fmt::Debug for WiretapProtocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WiretapProtocol")
            .field("label", &self.label)
            .field("q", &self.q)
            .field("m", &self.m)
            .field("n", &self.n)
            .field("r", &self.r)
            .field("declared", &self.declared)
            .finish_non_exhaustive()
    }
}

impl WiretapProtocol {
    /// Wraps raw encode/decode closures after exhaustively checking that
    /// decoding undoes encoding for every message and every seed.
    pub fn new(
        q: u32,
        m: u32,
        n: u32,
        r: u32,
        encode_fn: EncodeFn,
        decode_fn: DecodeFn,
        declared: DeclaredTargets,
        label: &str,
        cap: u128,
    ) -> Result<Self> {
        if q < 2 {
            return Err(Error::DomainError(format!("alphabet size {q} is too small")));
        }
        if m == 0 || m > n {
            return Err(Error::ShapeMismatch(format!("message length {m} outside 1..={n}")));
        }
        if r > 40 {
            return Err(Error::DomainError(format!("{r} seed bits is beyond desk scale")));
        }
        if pow_u128(q, n) > u64::MAX as u128 {
            return Err(Error::DomainError(format!("{q}^{n} codewords do not fit an index")));
        }
        let p = WiretapProtocol { q, m, n, r, encode_fn, decode_fn, declared, label: label.to_string() };
        let work = p.message_span() as u128 * p.seed_span() as u128;
        if work > cap {
            return Err(Error::EnumerationCapExceeded { needed: work, cap });
        }
        for x in 0..p.message_span() {
            for z in 0..p.seed_span() {
                let y = p.encode_with_seed(x, z)?;
                let back = p.decode(y)?;
                if back != x {
                    return Err(Error::BoundViolated(format!(
                        "decode(encode({x}, seed {z})) = {back}, breaking decodability"
                    )));
                }
            }
        }
        Ok(p)
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn declared(&self) -> &DeclaredTargets {
        &self.declared
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn rate(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn resilience(&self) -> f64 {
        self.declared.t as f64 / self.n as f64
    }

    pub fn message_span(&self) -> u64 {
        pow_u128(self.q, self.m) as u64
    }

    pub fn codeword_span(&self) -> u64 {
        pow_u128(self.q, self.n) as u64
    }

    pub fn seed_span(&self) -> u64 {
        1u64 << self.r
    }

    pub fn encode_with_seed(&self, x: u64, z: u64) -> Result<u64> {
        if x >= self.message_span() {
            return Err(Error::OutOfRange(format!("message {x} outside base-{} range", self.q)));
        }
        if z >= self.seed_span() {
            return Err(Error::OutOfRange(format!("seed {z} needs more than {} bits", self.r)));
        }
        let y = (self.encode_fn)(x, z)?;
        debug_assert!(y < self.codeword_span());
        Ok(y)
    }

    pub fn encode(&self, x: u64, rng: &mut impl Rng) -> Result<u64> {
        self.encode_with_seed(x, rng.gen_range(0..self.seed_span()))
    }

    pub fn decode(&self, y: u64) -> Result<u64> {
        if y >= self.codeword_span() {
            return Err(Error::OutOfRange(format!("codeword {y} outside base-{} range", self.q)));
        }
        (self.decode_fn)(y)
    }

    /// Exact law of the codeword for a uniform message and uniform seed.
    pub fn encoded_dist(&self, cap: u128) -> Result<ExactDist> {
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for x in 0..self.message_span() {
            for z in 0..self.seed_span() {
                *counts.entry(self.encode_with_seed(x, z)?).or_insert(0) += 1;
            }
        }
        ExactDist::from_counts(self.q, self.n, counts, cap)
    }

    /// The walk extractor's decoder/encoder pair as a protocol. The walk
    /// inverter is an exact 0-inverter, so the declared leakage is 0 and the
    /// declared error is the extractor's worst measured error, which covers
    /// every source with at least k free symbols by convexity.
    pub fn from_walk_extractor(ext: &SfextParams, cap: u128) -> Result<Self> {
        let (d, n, m, k) = (ext.d(), ext.n(), ext.m(), ext.k());
        if !d.is_power_of_two() {
            return Err(Error::DomainError(format!("alphabet {d} is not a power of two, seeds cannot be bits")));
        }
        let bits_per_symbol = d.trailing_zeros();
        let r = (n - m) * bits_per_symbol;
        let epsilon = ext.measured_error(k)?;
        let enc = ext.clone();
        let dec = ext.clone();
        let encode_fn: EncodeFn = Box::new(move |x, z| {
            let y_syms = index_to_symbols(x, d, m);
            let w = index_to_symbols(z, d, n - m);
            let start = enc.graph().walk_inverse(symbols_to_index(&y_syms, d), &w)?;
            let mut out = index_to_symbols(start, d, m);
            out.extend_from_slice(&w);
            Ok(symbols_to_index(&out, d))
        });
        let decode_fn: DecodeFn = Box::new(move |y| {
            let syms = index_to_symbols(y, d, n);
            Ok(symbols_to_index(&dec.extract(&syms)?, d))
        });
        let declared = DeclaredTargets { t: n - k, epsilon, gamma: BigRational::zero() };
        WiretapProtocol::new(d, m, n, r, encode_fn, decode_fn, declared, "walk", cap)
    }

    /// The composed affine extractor as a bit-level protocol. Conditioning a
    /// uniform codeword on any n−k fixed coordinates leaves an affine source
    /// of dimension at least k, so the declared error is the measured affine
    /// error at dimension k; the fiber-indexed inverter is exact, so the
    /// declared leakage is 0.
    pub fn from_affine_extractor(ext: &InvertibleAffineExtractor, k: u32, cap: u128) -> Result<Self> {
        let n = ext.input_bits();
        let m = ext.output_bits();
        if k > n {
            return Err(Error::DomainError(format!("source dimension {k} exceeds {n}")));
        }
        let r = n - m;
        let epsilon = ext.measured_affine_error(k)?;
        let enc = ext.clone();
        let dec = ext.clone();
        let encode_fn: EncodeFn =
            Box::new(move |x, z| Ok(mask_to_index(enc.invert_indexed(index_to_mask(x, m), z)?, n)));
        let decode_fn: DecodeFn =
            Box::new(move |y| Ok(mask_to_index(dec.extract(index_to_mask(y, n))?, m)));
        let declared = DeclaredTargets { t: n - k, epsilon, gamma: BigRational::zero() };
        WiretapProtocol::new(2, m, n, r, encode_fn, decode_fn, declared, "affine", cap)
    }

    /// The one-time pad, as produced by the walk on the two-vertex complete
    /// graph with self-loops: E(x, z) = (x⊕z, z), D(y) = y₁⊕y₂.
    pub fn one_time_pad() -> Result<Self> {
        let graph = crate::expander::family_graph("complete-selfloop", 2)?;
        let ext = SfextParams::new(2, 2, 1, 1, graph)?;
        Self::from_walk_extractor(&ext, 1 << 10)
    }

    /// The maximally leaky baseline: no seed, codeword equals message. The
    /// honest declaration is that any single observation may fully leak.
    pub fn identity(q: u32, n: u32, cap: u128) -> Result<Self> {
        let declared = DeclaredTargets { t: n, epsilon: BigRational::zero(), gamma: BigRational::one() };
        WiretapProtocol::new(q, n, n, 0, Box::new(|x, _| Ok(x)), Box::new(|y| Ok(y)), declared, "identity", cap)
    }

    fn joint_counts(&self) -> Result<Vec<(u64, u64)>> {
        let mut pairs = Vec::with_capacity((self.message_span() * self.seed_span()) as usize);
        for x in 0..self.message_span() {
            for z in 0..self.seed_span() {
                pairs.push((x, self.encode_with_seed(x, z)?));
            }
        }
        Ok(pairs)
    }

    fn subset_masks(&self, t: u32) -> Vec<u64> {
        (1..1u64 << self.n).filter(|s| s.count_ones() <= t).collect()
    }

    /// Conditions the message on every observation of at most t codeword
    /// coordinates and reports the exact distance profile per subset,
    /// classifying observations against `epsilon_target`. Subsets appear in
    /// colex order (numeric order of their characteristic masks).
    pub fn verify_resilience(&self, t: u32, epsilon_target: &BigRational, cap: u128) -> Result<ResilienceReport> {
        if t > self.n {
            return Err(Error::DomainError(format!("t = {t} exceeds block length {}", self.n)));
        }
        let masks = self.subset_masks(t);
        let work = self.message_span() as u128 * self.seed_span() as u128 * masks.len() as u128;
        if work > cap {
            return Err(Error::EnumerationCapExceeded { needed: work, cap });
        }
        let joint = self.joint_counts()?;
        let total = BigInt::from(self.message_span() * self.seed_span());
        let msg_span = self.message_span();
        let subsets: Vec<SubsetRecord> = masks
            .par_iter()
            .map(|&mask| self.analyze_subset(mask, &joint, &total, msg_span, epsilon_target))
            .collect::<Result<Vec<_>>>()?;
        let zero = BigRational::zero();
        let gamma_measured = subsets.iter().map(|s| &s.bad_probability).max().cloned().unwrap_or(zero.clone());
        let worst_distance = subsets.iter().map(|s| &s.worst_distance).max().cloned().unwrap_or(zero);
        let equivocation =
            subsets.iter().map(|s| s.equivocation).fold(self.m as f64, f64::min);
        Ok(ResilienceReport {
            t,
            epsilon_target: epsilon_target.clone(),
            subsets,
            gamma_measured,
            worst_distance,
            equivocation,
        })
    }

    fn analyze_subset(
        &self,
        mask: u64,
        joint: &[(u64, u64)],
        total: &BigInt,
        msg_span: u64,
        epsilon_target: &BigRational,
    ) -> Result<SubsetRecord> {
        let coords: Vec<usize> = (0..self.n as usize).filter(|&i| mask >> i & 1 == 1).collect();
        let mut by_obs: BTreeMap<u64, BTreeMap<u64, u64>> = BTreeMap::new();
        for &(x, y) in joint {
            let syms = index_to_symbols(y, self.q, self.n);
            let w: Vec<u32> = coords.iter().map(|&i| syms[i]).collect();
            *by_obs.entry(symbols_to_index(&w, self.q)).or_default().entry(x).or_insert(0) += 1;
        }
        let u_msg = BigRational::new(BigInt::one(), BigInt::from(msg_span));
        let two = BigRational::from_integer(BigInt::from(2));
        let mut observations = Vec::with_capacity(by_obs.len());
        let mut bad_probability = BigRational::zero();
        let mut worst_distance = BigRational::zero();
        let mut equivocation = 0f64;
        for (w, counts) in by_obs {
            let obs_total: u64 = counts.values().sum();
            let probability = BigRational::new(BigInt::from(obs_total), total.clone());
            let mut distance = BigRational::zero();
            let mut entropy = 0f64;
            for x in 0..msg_span {
                let c = counts.get(&x).copied().unwrap_or(0);
                let p = BigRational::new(BigInt::from(c), BigInt::from(obs_total));
                distance += (&p - &u_msg).abs();
                if c > 0 {
                    let pf = c as f64 / obs_total as f64;
                    entropy -= pf * pf.ln();
                }
            }
            distance /= &two;
            let bad = &distance > epsilon_target;
            if bad {
                bad_probability += &probability;
            }
            if distance > worst_distance {
                worst_distance = distance.clone();
            }
            equivocation += rat_to_f64(&probability) * entropy / (self.q as f64).ln();
            observations.push(ObservationRecord { w, probability, distance, bad });
        }
        Ok(SubsetRecord {
            mask,
            coords: coords.iter().map(|&c| c as u32).collect(),
            observations,
            bad_probability,
            worst_distance,
            equivocation,
        })
    }

    /// Exact average-case all-or-nothing error: twice the expected distance
    /// between the view of an observed subset given the message and the
    /// unconditioned view, maximized over subsets of size at most t. Both
    /// orientations of the conditioning identity are evaluated and must
    /// agree exactly; the declared targets bound the result by 2(ε+γ).
    pub fn aont_error(&self, t: u32, cap: u128) -> Result<BigRational> {
        let masks = self.subset_masks(t);
        let work = self.message_span() as u128 * self.seed_span() as u128 * masks.len() as u128;
        if work > cap {
            return Err(Error::EnumerationCapExceeded { needed: work, cap });
        }
        let joint = self.joint_counts()?;
        let mut worst = BigRational::zero();
        for mask in masks {
            let coords: Vec<usize> = (0..self.n as usize).filter(|&i| mask >> i & 1 == 1).collect();
            let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
            for &(x, y) in &joint {
                let syms = index_to_symbols(y, self.q, self.n);
                let mut joined = index_to_symbols(x, self.q, self.m);
                joined.extend(coords.iter().map(|&i| syms[i]));
                *counts.entry(symbols_to_index(&joined, self.q)).or_insert(0) += 1;
            }
            let dist = ExactDist::from_counts(self.q, self.m + coords.len() as u32, counts, cap)?;
            let (message_side, view_side) = duality_gap(&dist, self.m as usize)?;
            if message_side != view_side {
                return Err(Error::BoundViolated(format!(
                    "conditioning identity split: {} vs {}",
                    rat_to_string(&message_side),
                    rat_to_string(&view_side)
                )));
            }
            let err = view_side * BigRational::from_integer(BigInt::from(2));
            if err > worst {
                worst = err;
            }
        }
        Ok(worst)
    }

    /// Minimum over observed subsets of size at most t of the conditional
    /// message entropy, in q-ary symbols.
    pub fn equivocation(&self, t: u32, cap: u128) -> Result<f64> {
        let report = self.verify_resilience(t, &self.declared.epsilon, cap)?;
        Ok(report.equivocation)
    }

    /// The measured leakage γ against the declared ε, paired with the
    /// declared γ it must not exceed.
    pub fn leakage_check(&self, cap: u128) -> Result<(BigRational, BigRational)> {
        let report = self.verify_resilience(self.declared.t, &self.declared.epsilon, cap)?;
        Ok((report.gamma_measured, self.declared.gamma.clone()))
    }

    pub fn params_json(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label,
            "q": self.q,
            "m": self.m,
            "n": self.n,
            "r": self.r,
            "rate": self.rate(),
            "declared": {
                "t": self.declared.t,
                "epsilon": rat_to_string(&self.declared.epsilon),
                "gamma": rat_to_string(&self.declared.gamma),
            },
        })
    }
}

/// One conditioned observation: its index, mass, exact message distance
/// from uniform, and whether it exceeded the target ε.
#[derive(Debug, Clone)]
pub struct ObservationRecord {
    pub w: u64,
    pub probability: BigRational,
    pub distance: BigRational,
    pub bad: bool,
}

/// Exact conditioning profile of one observed coordinate subset.
#[derive(Debug, Clone)]
pub struct SubsetRecord {
    pub mask: u64,
    pub coords: Vec<u32>,
    pub observations: Vec<ObservationRecord>,
    /// Pr[the observation lands in the bad set].
    pub bad_probability: BigRational,
    pub worst_distance: BigRational,
    /// H(message | view) in q-ary symbols.
    pub equivocation: f64,
}

/// Exact resilience verdict for all subsets of size at most t.
#[derive(Debug, Clone)]
pub struct ResilienceReport {
    pub t: u32,
    pub epsilon_target: BigRational,
    pub subsets: Vec<SubsetRecord>,
    /// max over subsets of the bad-observation mass.
    pub gamma_measured: BigRational,
    /// max over subsets and observations of the conditional distance; the
    /// smallest ε that would make the leakage exactly zero.
    pub worst_distance: BigRational,
    /// min over subsets of the conditional message entropy (q-ary symbols).
    pub equivocation: f64,
}

impl ResilienceReport {
    pub fn zero_leakage(&self) -> bool {
        self.gamma_measured.is_zero()
    }

    /// The verdict restricted to subsets of size at most t′, recomputed from
    /// the same records.
    pub fn restrict(&self, t_prime: u32, message_len: u32) -> ResilienceReport {
        let subsets: Vec<SubsetRecord> =
            self.subsets.iter().filter(|s| s.coords.len() as u32 <= t_prime).cloned().collect();
        let zero = BigRational::zero();
        ResilienceReport {
            t: t_prime,
            epsilon_target: self.epsilon_target.clone(),
            gamma_measured: subsets.iter().map(|s| &s.bad_probability).max().cloned().unwrap_or(zero.clone()),
            worst_distance: subsets.iter().map(|s| &s.worst_distance).max().cloned().unwrap_or(zero),
            equivocation: subsets.iter().map(|s| s.equivocation).fold(message_len as f64, f64::min),
            subsets,
        }
    }

    /// The smallest ε for which every subset's bad-observation mass stays
    /// within `gamma_target`: per subset, the smallest conditional distance
    /// whose exceedance mass is allowed, maximized over subsets.
    pub fn epsilon_for_gamma(&self, gamma_target: &BigRational) -> BigRational {
        let mut eps = BigRational::zero();
        for subset in &self.subsets {
            let mut profile: Vec<(&BigRational, &BigRational)> =
                subset.observations.iter().map(|o| (&o.distance, &o.probability)).collect();
            profile.sort_by(|a, b| b.0.cmp(a.0));
            let mut excess = BigRational::zero();
            let mut subset_eps = BigRational::zero();
            for (distance, probability) in profile {
                let next = &excess + probability;
                if &next > gamma_target {
                    subset_eps = distance.clone();
                    break;
                }
                excess = next;
            }
            if subset_eps > eps {
                eps = subset_eps;
            }
        }
        eps
    }

    pub fn to_json(&self, params: serde_json::Value) -> serde_json::Value {
        let profile: Vec<serde_json::Value> = self
            .subsets
            .iter()
            .map(|s| {
                serde_json::json!({
                    "coords": s.coords,
                    "worst_distance": rat_to_string(&s.worst_distance),
                    "bad_observations": s.observations.iter().filter(|o| o.bad).map(|o| o.w).collect::<Vec<_>>(),
                    "bad_probability": rat_to_string(&s.bad_probability),
                    "equivocation": s.equivocation,
                })
            })
            .collect();
        serde_json::json!({
            "params": params,
            "t": self.t,
            "epsilon_target": rat_to_string(&self.epsilon_target),
            "epsilon_profile": profile,
            "epsilon_measured": rat_to_string(&self.worst_distance),
            "gamma": rat_to_string(&self.gamma_measured),
            "equivocation": self.equivocation,
            "zero_leakage": self.zero_leakage(),
        })
    }
}

/// Smallest γ for which the encoder is a (γ²/2)-inverter of the decoder:
/// the uniform-input output distance determines the declared leakage.
pub fn inverter_leakage(encoded: &ExactDist) -> BigRational {
    let gap = encoded.distance_from_uniform();
    rat_sqrt_upper(&(gap * BigRational::from_integer(BigInt::from(2))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::DEFAULT_CAP;
    use crate::expander::family_graph;
    use proptest::prelude::*;

    fn rat(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn parity_protocol() -> WiretapProtocol {
        let graph = family_graph("complete-selfloop", 2).unwrap();
        let ext = SfextParams::new(2, 4, 1, 1, graph).unwrap();
        WiretapProtocol::from_walk_extractor(&ext, DEFAULT_CAP).unwrap()
    }

    fn cycle_protocol() -> WiretapProtocol {
        let graph = family_graph("cycle", 4).unwrap();
        let ext = SfextParams::new(2, 4, 2, 2, graph).unwrap();
        WiretapProtocol::from_walk_extractor(&ext, DEFAULT_CAP).unwrap()
    }

    #[test]
    fn one_time_pad_layout_and_targets() {
        let otp = WiretapProtocol::one_time_pad().unwrap();
        assert_eq!((otp.q(), otp.m(), otp.n(), otp.r()), (2, 1, 2, 1));
        for x in 0..2 {
            for z in 0..2 {
                let y = otp.encode_with_seed(x, z).unwrap();
                assert_eq!(y, (x ^ z) << 1 | z);
                assert_eq!(otp.decode(y).unwrap(), x);
            }
        }
        assert_eq!(otp.declared().t, 1);
        assert!(otp.declared().epsilon.is_zero());
        assert!(otp.declared().gamma.is_zero());
    }

    #[test]
    fn one_time_pad_is_perfectly_resilient() {
        let otp = WiretapProtocol::one_time_pad().unwrap();
        let report = otp.verify_resilience(1, &BigRational::zero(), DEFAULT_CAP).unwrap();
        assert!(report.gamma_measured.is_zero());
        assert!(report.worst_distance.is_zero());
        assert!(report.zero_leakage());
        assert!((report.equivocation - 1.0).abs() < 1e-12);
        assert!(otp.aont_error(1, DEFAULT_CAP).unwrap().is_zero());
    }

    #[test]
    fn identity_encoder_leaks_everything() {
        let idp = WiretapProtocol::identity(2, 2, DEFAULT_CAP).unwrap();
        let report = idp.verify_resilience(1, &rat(1, 4), DEFAULT_CAP).unwrap();
        // each observed symbol pins itself: conditional distance 1/2 > 1/4
        assert_eq!(report.gamma_measured, rat(1, 1));
        assert_eq!(report.worst_distance, rat(1, 2));
        assert!(!report.zero_leakage());
        let single = WiretapProtocol::identity(2, 1, DEFAULT_CAP).unwrap();
        assert_eq!(single.aont_error(1, DEFAULT_CAP).unwrap(), rat(1, 1));
        assert_eq!(single.equivocation(1, DEFAULT_CAP).unwrap(), 0.0);
    }

    #[test]
    fn parity_protocol_is_a_longer_one_time_pad() {
        let p = parity_protocol();
        assert_eq!((p.m(), p.n(), p.r()), (1, 4, 3));
        assert_eq!(p.declared().t, 3);
        assert!(p.declared().epsilon.is_zero());
        let report = p.verify_resilience(3, &BigRational::zero(), DEFAULT_CAP).unwrap();
        assert!(report.gamma_measured.is_zero());
        assert!(report.worst_distance.is_zero());
        assert!((report.equivocation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn encoded_marginal_is_exactly_uniform_for_walk_protocols() {
        for p in [parity_protocol(), cycle_protocol()] {
            let dist = p.encoded_dist(DEFAULT_CAP).unwrap();
            assert!(dist.distance_from_uniform().is_zero());
            assert!(inverter_leakage(&dist).is_zero());
        }
    }

    #[test]
    fn declared_targets_dominate_measured_values() {
        let p = cycle_protocol();
        let declared = p.declared().clone();
        let report = p.verify_resilience(declared.t, &declared.epsilon, DEFAULT_CAP).unwrap();
        assert!(report.gamma_measured <= declared.gamma);
        // zero declared leakage means every conditional stays within ε
        assert!(report.worst_distance <= declared.epsilon);
    }

    #[test]
    fn cycle_walk_error_is_positive_but_bounded() {
        let p = cycle_protocol();
        assert!(p.declared().epsilon > BigRational::zero());
        let report = p.verify_resilience(2, &p.declared().epsilon, DEFAULT_CAP).unwrap();
        assert!(report.zero_leakage());
        assert_eq!(report.worst_distance, p.declared().epsilon);
    }

    #[test]
    fn observation_classification_matches_target() {
        let p = cycle_protocol();
        let tight = p.verify_resilience(2, &BigRational::zero(), DEFAULT_CAP).unwrap();
        for subset in &tight.subsets {
            for obs in &subset.observations {
                assert_eq!(obs.bad, obs.distance > BigRational::zero());
            }
        }
        // smallest ε with zero exceedance mass is the worst distance
        assert_eq!(tight.epsilon_for_gamma(&BigRational::zero()), tight.worst_distance);
    }

    #[test]
    fn restriction_is_monotone_and_matches_a_direct_pass() {
        let p = cycle_protocol();
        let full = p.verify_resilience(2, &rat(1, 8), DEFAULT_CAP).unwrap();
        let restricted = full.restrict(1, p.m());
        let direct = p.verify_resilience(1, &rat(1, 8), DEFAULT_CAP).unwrap();
        assert_eq!(restricted.gamma_measured, direct.gamma_measured);
        assert_eq!(restricted.worst_distance, direct.worst_distance);
        assert_eq!(restricted.subsets.len(), direct.subsets.len());
        assert!(restricted.gamma_measured <= full.gamma_measured);
        assert!(restricted.worst_distance <= full.worst_distance);
    }

    #[test]
    fn subsets_appear_in_colex_order() {
        let p = cycle_protocol();
        let report = p.verify_resilience(2, &rat(1, 8), DEFAULT_CAP).unwrap();
        let masks: Vec<u64> = report.subsets.iter().map(|s| s.mask).collect();
        let mut sorted = masks.clone();
        sorted.sort_unstable();
        assert_eq!(masks, sorted);
        assert_eq!(masks.len(), 4 + 6);
    }

    #[test]
    fn aont_error_respects_declared_budget() {
        let p = cycle_protocol();
        let aont = p.aont_error(p.declared().t, DEFAULT_CAP).unwrap();
        let report = p.verify_resilience(p.declared().t, &p.declared().epsilon, DEFAULT_CAP).unwrap();
        let budget = (&report.worst_distance + &report.gamma_measured) * rat(2, 1);
        assert!(aont <= budget);
        assert!(aont > BigRational::zero());
    }

    #[test]
    fn equivocation_stays_above_floor() {
        let p = cycle_protocol();
        let report = p.verify_resilience(p.declared().t, &p.declared().epsilon, DEFAULT_CAP).unwrap();
        let floor =
            p.m() as f64 * (1.0 - rat_to_f64(&report.worst_distance) - rat_to_f64(&report.gamma_measured));
        assert!(report.equivocation >= floor - 1e-12);
    }

    #[test]
    fn affine_protocol_round_trips_and_declares_resilience() {
        let lse = crate::linext::LinearSeededExtractor::toeplitz_subfamily(4, 1, 1, 7).unwrap();
        let q1 = crate::affext::QuadraticForm::new(4, &[(0, 1), (2, 3)], 0, false).unwrap();
        let bank = crate::affext::AffineExtractor::quadratic_bank(4, vec![q1]).unwrap();
        let ext = InvertibleAffineExtractor::new(lse, bank).unwrap();
        let p = WiretapProtocol::from_affine_extractor(&ext, 3, DEFAULT_CAP).unwrap();
        assert_eq!((p.q(), p.m(), p.n(), p.r()), (2, 1, 5, 4));
        assert_eq!(p.declared().t, 2);
        assert!(p.declared().gamma.is_zero());
        let dist = p.encoded_dist(DEFAULT_CAP).unwrap();
        assert!(dist.distance_from_uniform().is_zero());
        let report = p.verify_resilience(p.declared().t, &p.declared().epsilon, DEFAULT_CAP).unwrap();
        assert!(report.gamma_measured.is_zero());
        assert!(report.worst_distance <= p.declared().epsilon);
    }

    #[test]
    fn new_rejects_wrong_decoders() {
        let declared = DeclaredTargets { t: 0, epsilon: BigRational::zero(), gamma: BigRational::zero() };
        let err = WiretapProtocol::new(
            2,
            1,
            1,
            0,
            Box::new(|x, _| Ok(x)),
            Box::new(|y| Ok(y ^ 1)),
            declared,
            "broken",
            DEFAULT_CAP,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BoundViolated(_)));
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let p = cycle_protocol();
        let err = p.verify_resilience(2, &rat(1, 8), 16).unwrap_err();
        assert!(matches!(err, Error::EnumerationCapExceeded { .. }));
        let err = p.aont_error(2, 16).unwrap_err();
        assert!(matches!(err, Error::EnumerationCapExceeded { .. }));
    }

    #[test]
    fn report_json_has_the_interface_shape() {
        let p = cycle_protocol();
        let report = p.verify_resilience(2, &rat(1, 8), DEFAULT_CAP).unwrap();
        let v = report.to_json(p.params_json());
        for key in ["params", "epsilon_profile", "gamma", "equivocation", "zero_leakage"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["params"]["label"], "walk");
        assert_eq!(v["epsilon_profile"].as_array().unwrap().len(), report.subsets.len());
    }

    #[test]
    fn seed_determinism_and_rng_paths_agree() {
        let p = cycle_protocol();
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        for x in 0..p.message_span() {
            let fixed = p.encode_with_seed(x, 3).unwrap();
            assert_eq!(p.encode_with_seed(x, 3).unwrap(), fixed);
            let sampled = p.encode(x, &mut rng).unwrap();
            assert_eq!(p.decode(sampled).unwrap(), x);
        }
    }

    proptest! {
        #[test]
        fn every_message_seed_pair_round_trips(x in 0u64..4, z in 0u64..4) {
            let p = cycle_protocol();
            let y = p.encode_with_seed(x, z).unwrap();
            prop_assert_eq!(p.decode(y).unwrap(), x);
        }
    }

    #[test]
    fn custom_closure_protocols_run_the_same_checks() {
        let declared = DeclaredTargets { t: 1, epsilon: BigRational::zero(), gamma: BigRational::one() };
        let p = WiretapProtocol::new(
            3,
            2,
            2,
            0,
            Box::new(|x, _| Ok(x / 3 + (x % 3) * 3)),
            Box::new(|y| Ok(y / 3 + (y % 3) * 3)),
            declared,
            "swap",
            DEFAULT_CAP,
        )
        .unwrap();
        assert_eq!(p.decode(p.encode_with_seed(5, 0).unwrap()).unwrap(), 5);
        let report = p.verify_resilience(1, &rat(1, 3), DEFAULT_CAP).unwrap();
        assert_eq!(report.gamma_measured, rat(1, 1));
    }
}
