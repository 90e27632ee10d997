//! Symbol-fixing extractors from graph walks, with exact inverters.
//!
//! The core extractor reads an input in [d]^n as a start vertex (first m
//! symbols, big-endian) plus a walk (remaining n−m symbols as edge labels) on
//! a d-regular graph with d^m vertices, and outputs the end vertex. Because
//! every label acts as a permutation, fixing the walk makes start ↦ end a
//! bijection, which is why the inverter below is exact: sample the walk,
//! retrace it backwards from the target vertex, and emit both parts.
//!
//! When no graph in a family has exactly d^m vertices, the rounded variant
//! squeezes the walk between two modular maps. Those maps are not balanced,
//! so the rounded inverter is only close to uniform; its measured and
//! composed ℓ∞ gaps are first-class outputs here rather than asymptotics.

use crate::dists::{index_to_symbols, pow_u128, symbols_to_index, ExactDist};
use crate::error::{Error, Result};
use crate::expander::LabeledGraph;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;

/// Walk extractor parameters: alphabet d, input length n, output length m,
/// a graph on exactly d^m vertices of degree d, and the min-entropy k the
/// error bound should be quoted for.
#[derive(Debug, Clone)]
pub struct SfextParams {
    d: u32,
    n: u32,
    m: u32,
    k: u32,
    graph: LabeledGraph,
    lambda: f64,
}

/// Error bound 2^{s/2} together with the exponent and whether the spectral
/// premise λ ≥ 1/√d behind it actually held.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfextBound {
    pub value: f64,
    pub s_exponent: f64,
    pub spectral_assumption_met: bool,
}

/// Two-case exponent: s = m·log₂d + k·log₂λ² while k ≤ n−m, switching to
/// s = (n−k)·log₂d + (n−m)·log₂λ² beyond that. λ = 0 yields a zero bound
/// for every k ≥ 1 (a single free walk symbol already mixes perfectly).
pub fn sfext_error_bound(n: u32, m: u32, k: u32, d: u32, lambda: f64) -> Result<SfextBound> {
    if d < 2 || m >= n || k > n {
        return Err(Error::DomainError(format!("bad shape (n={n}, m={m}, k={k}, d={d})")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::DomainError(format!("λ = {lambda} outside [0, 1]")));
    }
    let log_d = (d as f64).log2();
    let log_l2 = if lambda == 0.0 { f64::NEG_INFINITY } else { 2.0 * lambda.log2() };
    let (a, b) = if k <= n - m { (m, k) } else { (n - k, n - m) };
    let spectral = a as f64 * log_d;
    let s = if b == 0 { spectral } else { spectral + b as f64 * log_l2 };
    Ok(SfextBound {
        value: (s / 2.0).exp2(),
        s_exponent: s,
        spectral_assumption_met: lambda * lambda * d as f64 >= 1.0,
    })
}

impl SfextParams {
    pub fn new(d: u32, n: u32, m: u32, k: u32, graph: LabeledGraph) -> Result<Self> {
        if m >= n {
            return Err(Error::DomainError(format!("need m < n, got m={m}, n={n}")));
        }
        if k > n {
            return Err(Error::DomainError(format!("min-entropy k={k} exceeds n={n}")));
        }
        if graph.d() != d {
            return Err(Error::ShapeMismatch(format!("graph degree {} != alphabet {d}", graph.d())));
        }
        if graph.n() as u128 != pow_u128(d, m) {
            return Err(Error::ShapeMismatch(format!(
                "graph has {} vertices, need {d}^{m}",
                graph.n()
            )));
        }
        let lambda = graph.second_eigenvalue()?;
        Ok(SfextParams { d, n, m, k, graph, lambda })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn graph(&self) -> &LabeledGraph {
        &self.graph
    }

    pub fn bound(&self) -> SfextBound {
        sfext_error_bound(self.n, self.m, self.k, self.d, self.lambda).expect("params were validated")
    }

    fn check_input(&self, x: &[u32], len: u32) -> Result<()> {
        if x.len() != len as usize {
            return Err(Error::ShapeMismatch(format!("string length {} != {len}", x.len())));
        }
        if let Some(&bad) = x.iter().find(|&&s| s >= self.d) {
            return Err(Error::OutOfRange(format!("symbol {bad} outside alphabet of size {}", self.d)));
        }
        Ok(())
    }

    pub fn extract(&self, x: &[u32]) -> Result<Vec<u32>> {
        self.check_input(x, self.n)?;
        let start = symbols_to_index(&x[..self.m as usize], self.d);
        let end = self.graph.walk(start, &x[self.m as usize..])?;
        Ok(index_to_symbols(end, self.d, self.m))
    }

    pub fn invert(&self, y: &[u32], rng: &mut impl Rng) -> Result<Vec<u32>> {
        self.check_input(y, self.m)?;
        let target = symbols_to_index(y, self.d);
        let w: Vec<u32> = (0..self.n - self.m).map(|_| rng.gen_range(0..self.d)).collect();
        let start = self.graph.walk_inverse(target, &w)?;
        let mut out = index_to_symbols(start, self.d, self.m);
        out.extend_from_slice(&w);
        Ok(out)
    }

    /// Exact conditional law of the inverter output for a fixed target:
    /// uniform over one preimage per walk string.
    pub fn invert_dist(&self, y: &[u32]) -> Result<ExactDist> {
        self.check_input(y, self.m)?;
        let target = symbols_to_index(y, self.d);
        let tail = self.n - self.m;
        let count = pow_u128(self.d, tail);
        let mut entries = Vec::with_capacity(count as usize);
        for packed in 0..count as u64 {
            let w = index_to_symbols(packed, self.d, tail);
            let start = self.graph.walk_inverse(target, &w)?;
            let mut syms = index_to_symbols(start, self.d, self.m);
            syms.extend_from_slice(&w);
            entries.push((symbols_to_index(&syms, self.d), 1u64));
        }
        ExactDist::from_counts(self.d, self.n, entries, u128::MAX)
    }

    /// Exact worst-case distance from uniform of the extractor output over
    /// every source with exactly `k` free coordinates.
    pub fn measured_error(&self, k: u32) -> Result<BigRational> {
        if k > self.n {
            return Err(Error::DomainError(format!("k={k} exceeds n={}", self.n)));
        }
        let n = self.n as usize;
        let d = self.d as u64;
        let n_out = self.graph.n();
        let free_count = pow_u128(self.d, k) as u64;
        let mut counts = vec![0u64; n_out as usize];
        let mut syms = vec![0u32; n];
        let mut worst_num = 0u64;
        for mask in 0u64..(1 << n) {
            if mask.count_ones() != k {
                continue;
            }
            let free: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            let fixed: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 0).collect();
            let fixed_total = pow_u128(self.d, (n - k as usize) as u32) as u64;
            for mut fa in 0..fixed_total {
                for &i in fixed.iter().rev() {
                    syms[i] = (fa % d) as u32;
                    fa /= d;
                }
                counts.iter_mut().for_each(|c| *c = 0);
                for mut va in 0..free_count {
                    for &i in free.iter().rev() {
                        syms[i] = (va % d) as u32;
                        va /= d;
                    }
                    let start = symbols_to_index(&syms[..self.m as usize], self.d);
                    let end = self.graph.walk(start, &syms[self.m as usize..])?;
                    counts[end as usize] += 1;
                }
                // statistical distance numerator over denominator 2·d^k·N
                let num: u64 = counts.iter().map(|&c| (c * n_out).abs_diff(free_count)).sum();
                worst_num = worst_num.max(num);
            }
        }
        Ok(BigRational::new(
            BigInt::from(worst_num),
            BigInt::from(2u64) * BigInt::from(free_count) * BigInt::from(n_out),
        ))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "d": self.d,
            "n": self.n,
            "m": self.m,
            "k": self.k,
            "graph": self.graph.to_json(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let d = v["d"].as_u64().ok_or_else(|| Error::BadHeader("missing d".into()))? as u32;
        let n = v["n"].as_u64().ok_or_else(|| Error::BadHeader("missing n".into()))? as u32;
        let m = v["m"].as_u64().ok_or_else(|| Error::BadHeader("missing m".into()))? as u32;
        let k = v["k"].as_u64().ok_or_else(|| Error::BadHeader("missing k".into()))? as u32;
        let graph = LabeledGraph::from_json(&v["graph"])?;
        SfextParams::new(d, n, m, k, graph)
    }
}

/// 1 + (x mod p), mapping {1..q} onto {1..p} as evenly as q allows.
pub fn mod_map(q: u64, p: u64, x: u64) -> Result<u64> {
    if p == 0 || p > q {
        return Err(Error::DomainError(format!("need 1 <= p <= q, got p={p}, q={q}")));
    }
    if x == 0 || x > q {
        return Err(Error::OutOfRange(format!("x={x} outside [1, {q}]")));
    }
    Ok(1 + x % p)
}

pub fn mod_preimage_count(q: u64, p: u64, y: u64) -> Result<u64> {
    if p == 0 || p > q {
        return Err(Error::DomainError(format!("need 1 <= p <= q, got p={p}, q={q}")));
    }
    if y == 0 || y > p {
        return Err(Error::OutOfRange(format!("y={y} outside [1, {p}]")));
    }
    Ok(if y == 1 { q / p } else { (q - (y - 1)) / p + 1 })
}

/// The j-th preimage (0-indexed, increasing) of y under the modular map.
pub fn mod_preimage(q: u64, p: u64, y: u64, j: u64) -> Result<u64> {
    let count = mod_preimage_count(q, p, y)?;
    if j >= count {
        return Err(Error::OutOfRange(format!("preimage index {j} >= {count}")));
    }
    Ok(if y == 1 { (j + 1) * p } else { (y - 1) + j * p })
}

/// Uniform sample from the preimages of y.
pub fn mod_invert(q: u64, p: u64, y: u64, rng: &mut impl Rng) -> Result<u64> {
    let count = mod_preimage_count(q, p, y)?;
    mod_preimage(q, p, y, rng.gen_range(0..count))
}

/// Exact ℓ∞ distance from uniform on [q] of mod_invert applied to a uniform
/// value in [p]. The lemma bound for this quantity is (1/q)·p/(q−p).
pub fn mod_inverter_linf(q: u64, p: u64) -> Result<BigRational> {
    if p >= q {
        return Err(Error::DomainError(format!("need p < q, got p={p}, q={q}")));
    }
    let u = BigRational::new(BigInt::from(1), BigInt::from(q));
    let mut best = BigRational::zero();
    for y in 1..=p {
        let c = mod_preimage_count(q, p, y)?;
        let prob = BigRational::new(BigInt::from(1), BigInt::from(p) * BigInt::from(c));
        let dev = if prob >= u { &prob - &u } else { &u - &prob };
        if dev > best {
            best = dev;
        }
    }
    Ok(best)
}

/// Rounded walk extractor for a graph whose vertex count N is not a power
/// of d: the head is m′ symbols folded onto [N], the output is the end
/// vertex folded onto [d^m], with d^m < N < d^{m′}.
#[derive(Debug, Clone)]
pub struct RoundedSfextParams {
    d: u32,
    n: u32,
    m: u32,
    m_prime: u32,
    graph: LabeledGraph,
}

impl RoundedSfextParams {
    pub fn new(d: u32, n: u32, m: u32, m_prime: u32, graph: LabeledGraph) -> Result<Self> {
        let n_vertices = graph.n() as u128;
        if graph.d() != d {
            return Err(Error::ShapeMismatch(format!("graph degree {} != alphabet {d}", graph.d())));
        }
        if pow_u128(d, m) >= n_vertices || n_vertices >= pow_u128(d, m_prime) {
            return Err(Error::DomainError(format!(
                "need {d}^{m} < N < {d}^{m_prime}, got N = {n_vertices}"
            )));
        }
        if m_prime > n {
            return Err(Error::DomainError(format!("head length m′={m_prime} exceeds n={n}")));
        }
        Ok(RoundedSfextParams { d, n, m, m_prime, graph })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn m_prime(&self) -> u32 {
        self.m_prime
    }

    pub fn graph(&self) -> &LabeledGraph {
        &self.graph
    }

    fn check_input(&self, x: &[u32], len: u32) -> Result<()> {
        if x.len() != len as usize {
            return Err(Error::ShapeMismatch(format!("string length {} != {len}", x.len())));
        }
        if let Some(&bad) = x.iter().find(|&&s| s >= self.d) {
            return Err(Error::OutOfRange(format!("symbol {bad} outside alphabet of size {}", self.d)));
        }
        Ok(())
    }

    pub fn extract(&self, x: &[u32]) -> Result<Vec<u32>> {
        self.check_input(x, self.n)?;
        let nn = self.graph.n();
        let u = symbols_to_index(&x[..self.m_prime as usize], self.d);
        // vertices are 0-based here; the modular maps act on 1-based values
        let start = mod_map(pow_u128(self.d, self.m_prime) as u64, nn, u + 1)? - 1;
        let end = self.graph.walk(start, &x[self.m_prime as usize..])?;
        let out = mod_map(nn, pow_u128(self.d, self.m) as u64, end + 1)? - 1;
        Ok(index_to_symbols(out, self.d, self.m))
    }

    pub fn invert(&self, y: &[u32], rng: &mut impl Rng) -> Result<Vec<u32>> {
        self.check_input(y, self.m)?;
        let nn = self.graph.n();
        let x1 = mod_invert(nn, pow_u128(self.d, self.m) as u64, symbols_to_index(y, self.d) + 1, rng)? - 1;
        let w: Vec<u32> = (0..self.n - self.m_prime).map(|_| rng.gen_range(0..self.d)).collect();
        let x2 = self.graph.walk_inverse(x1, &w)?;
        let x3 = mod_invert(pow_u128(self.d, self.m_prime) as u64, nn, x2 + 1, rng)? - 1;
        let mut out = index_to_symbols(x3, self.d, self.m_prime);
        out.extend_from_slice(&w);
        Ok(out)
    }

    /// Exact conditional law of the inverter output for a fixed target.
    pub fn invert_dist(&self, y: &[u32]) -> Result<ExactDist> {
        self.check_input(y, self.m)?;
        let nn = self.graph.n();
        let q_head = pow_u128(self.d, self.m_prime) as u64;
        let p_out = pow_u128(self.d, self.m) as u64;
        let target = symbols_to_index(y, self.d) + 1;
        let tail = self.n - self.m_prime;
        let walks = pow_u128(self.d, tail) as u64;
        let c1 = mod_preimage_count(nn, p_out, target)?;
        let mut weights = Vec::new();
        for j1 in 0..c1 {
            let x1 = mod_preimage(nn, p_out, target, j1)? - 1;
            for packed in 0..walks {
                let w = index_to_symbols(packed, self.d, tail);
                let x2 = self.graph.walk_inverse(x1, &w)?;
                let c2 = mod_preimage_count(q_head, nn, x2 + 1)?;
                let share = BigRational::new(
                    BigInt::from(1),
                    BigInt::from(c1) * BigInt::from(walks) * BigInt::from(c2),
                );
                for j2 in 0..c2 {
                    let x3 = mod_preimage(q_head, nn, x2 + 1, j2)? - 1;
                    let mut syms = index_to_symbols(x3, self.d, self.m_prime);
                    syms.extend_from_slice(&w);
                    weights.push((symbols_to_index(&syms, self.d), share.clone()));
                }
            }
        }
        ExactDist::from_weights(self.d, self.n, weights, u128::MAX)
    }

    /// Law of the inverter output when the target itself is uniform.
    pub fn inverter_output_dist(&self) -> Result<ExactDist> {
        let p_out = pow_u128(self.d, self.m) as u64;
        let share = BigRational::new(BigInt::from(1), BigInt::from(p_out));
        let mut weights = Vec::new();
        for t in 0..p_out {
            let cond = self.invert_dist(&index_to_symbols(t, self.d, self.m))?;
            for (&x, p) in cond.iter() {
                weights.push((x, p * &share));
            }
        }
        ExactDist::from_weights(self.d, self.n, weights, u128::MAX)
    }

    /// Composition of the two modular-inverter lemma bounds: an ℓ∞ bound on
    /// the distance of the inverter output (on uniform targets) from uniform
    /// over [d]^n. The first fold contributes ε₁ = (1/N)·d^m/(N−d^m); the
    /// walk permutes that law, and the second fold is the lemma again with
    /// relative error N·ε₁.
    pub fn inverter_linf_bound(&self) -> BigRational {
        let nn = BigInt::from(self.graph.n());
        let p_out = BigInt::from(pow_u128(self.d, self.m));
        let q_head = BigInt::from(pow_u128(self.d, self.m_prime));
        let eps1_rel = BigRational::new(p_out.clone(), &nn - &p_out);
        let eps2 = BigRational::new(BigInt::from(1), q_head.clone())
            * (BigRational::from_integer(nn.clone()) + eps1_rel * BigRational::from_integer(q_head.clone()))
            / BigRational::from_integer(&q_head - &nn);
        let tail = BigInt::from(pow_u128(self.d, self.n - self.m_prime));
        eps2 / BigRational::from_integer(tail)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "d": self.d,
            "n": self.n,
            "m": self.m,
            "m_prime": self.m_prime,
            "graph": self.graph.to_json(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let d = v["d"].as_u64().ok_or_else(|| Error::BadHeader("missing d".into()))? as u32;
        let n = v["n"].as_u64().ok_or_else(|| Error::BadHeader("missing n".into()))? as u32;
        let m = v["m"].as_u64().ok_or_else(|| Error::BadHeader("missing m".into()))? as u32;
        let m_prime = v["m_prime"].as_u64().ok_or_else(|| Error::BadHeader("missing m_prime".into()))? as u32;
        let graph = LabeledGraph::from_json(&v["graph"])?;
        RoundedSfextParams::new(d, n, m, m_prime, graph)
    }
}

/// Achievable-rate curve R = max{α(1−δ), 1−δ/α} − γ with α = −log_d λ²,
/// plus the induced fractional splits k/n = 1−δ and m/n = R.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkRate {
    pub rate: f64,
    pub alpha: f64,
    pub k_fraction: f64,
    pub m_fraction: f64,
}

pub fn walk_rate(delta: f64, d: u32, lambda: f64, gamma: f64) -> Result<WalkRate> {
    if !(0.0..1.0).contains(&delta) || !(lambda > 0.0 && lambda < 1.0) || d < 2 || gamma < 0.0 {
        return Err(Error::DomainError(format!(
            "walk rate needs 0 <= δ < 1, 0 < λ < 1, d >= 2, γ >= 0 (δ={delta}, λ={lambda}, d={d}, γ={gamma})"
        )));
    }
    let alpha = -(lambda * lambda).ln() / (d as f64).ln();
    let rate = (alpha * (1.0 - delta)).max(1.0 - delta / alpha) - gamma;
    Ok(WalkRate { rate, alpha, k_fraction: 1.0 - delta, m_fraction: rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::DEFAULT_CAP;
    use crate::expander::family_graph;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn cycle4_params(n: u32, k: u32) -> SfextParams {
        SfextParams::new(2, n, 2, k, family_graph("cycle", 4).unwrap()).unwrap()
    }

    #[test]
    fn extract_examples() {
        // self-loop label held fixed: the walk never moves
        let p = SfextParams::new(4, 3, 1, 1, family_graph("complete-selfloop", 4).unwrap()).unwrap();
        for v in 0..4u32 {
            assert_eq!(p.extract(&[v, 0, 0]).unwrap(), vec![v]);
        }
        // two +1 steps on the 4-cycle from vertex 0 land on vertex 2
        let p = cycle4_params(4, 2);
        assert_eq!(p.extract(&[0, 0, 0, 0]).unwrap(), vec![1, 0]);
    }

    #[test]
    fn complete_graph_gives_zero_error() {
        let p = SfextParams::new(4, 2, 1, 1, family_graph("complete-selfloop", 4).unwrap()).unwrap();
        assert!(p.measured_error(1).unwrap().is_zero());
        assert!(p.measured_error(2).unwrap().is_zero());
    }

    #[test]
    fn round_trip_everywhere() {
        let p = cycle4_params(6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for y_packed in 0..4u64 {
            let y = index_to_symbols(y_packed, 2, 2);
            for _ in 0..25 {
                let x = p.invert(&y, &mut rng).unwrap();
                assert_eq!(p.extract(&x).unwrap(), y);
            }
        }
    }

    #[test]
    fn inverter_is_exactly_uniform() {
        // mixing the conditional inverter laws over a uniform target must
        // give the uniform law on [d]^n: every string has exactly one
        // (target, walk) explanation
        let p = cycle4_params(6, 3);
        let mut weights = Vec::new();
        for t in 0..4u64 {
            let cond = p.invert_dist(&index_to_symbols(t, 2, 2)).unwrap();
            assert_eq!(cond.support_size(), 16);
            for (&x, pr) in cond.iter() {
                weights.push((x, pr * rat(1, 4)));
            }
        }
        let mixed = ExactDist::from_weights(2, 6, weights, DEFAULT_CAP).unwrap();
        assert!(mixed.distance_from_uniform().is_zero());
    }

    #[test]
    fn fixed_walk_is_a_bijection() {
        let p = cycle4_params(6, 3);
        for packed in 0..16u64 {
            let w = index_to_symbols(packed, 2, 4);
            let mut seen = [false; 4];
            for t in 0..4u64 {
                let start = p.graph().walk_inverse(t, &w).unwrap();
                assert!(!seen[start as usize]);
                seen[start as usize] = true;
            }
        }
    }

    #[test]
    fn bound_formula_cases() {
        let b = sfext_error_bound(8, 2, 3, 2, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!((b.s_exponent - -1.0).abs() < 1e-12);
        assert!((b.value - 2f64.powf(-0.5)).abs() < 1e-12);
        assert!(b.spectral_assumption_met);

        // k = n: the second case with λ = 1/√d collapses to d^{−(n−m)/2}
        let b = sfext_error_bound(8, 2, 8, 2, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!((b.value - 2f64.powf(-3.0)).abs() < 1e-12);

        let b = sfext_error_bound(8, 2, 3, 4, 0.1).unwrap();
        assert!(!b.spectral_assumption_met);
        let b = sfext_error_bound(8, 2, 3, 2, 0.0).unwrap();
        assert_eq!(b.value, 0.0);
        let b = sfext_error_bound(8, 2, 0, 2, 0.0).unwrap();
        assert_eq!(b.value, 2.0); // vacuous k = 0 bound, kept as the formula says
    }

    #[test]
    fn measured_error_below_bound_and_monotone() {
        let mut previous: Option<BigRational> = None;
        for k in 0..=6u32 {
            let p = cycle4_params(6, k);
            let measured = p.measured_error(k).unwrap();
            let bound = p.bound();
            assert!(
                crate::dists::rat_to_f64(&measured) <= bound.value + 1e-12,
                "k={k}: measured {measured} above bound {}",
                bound.value
            );
            if let Some(prev) = previous {
                assert!(measured <= prev, "error increased at k={k}");
            }
            previous = Some(measured);
        }
    }

    #[test]
    fn mod_map_and_preimages() {
        // q = p: plain bijection
        for x in 1..=5u64 {
            let y = mod_map(5, 5, x).unwrap();
            assert_eq!(mod_preimage_count(5, 5, y).unwrap(), 1);
            assert_eq!(mod_preimage(5, 5, y, 0).unwrap(), x);
        }
        // q=7, p=3 preimage classes
        let classes: Vec<Vec<u64>> = (1..=3)
            .map(|y| {
                let c = mod_preimage_count(7, 3, y).unwrap();
                (0..c).map(|j| mod_preimage(7, 3, y, j).unwrap()).collect()
            })
            .collect();
        assert_eq!(classes, vec![vec![3, 6], vec![1, 4, 7], vec![2, 5]]);
        // round trip through the sampler
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for y in 1..=3u64 {
            for _ in 0..20 {
                let x = mod_invert(7, 3, y, &mut rng).unwrap();
                assert_eq!(mod_map(7, 3, x).unwrap(), y);
            }
        }
    }

    #[test]
    fn mod_inverter_linf_meets_lemma_bound() {
        let measured = mod_inverter_linf(7, 3).unwrap();
        assert_eq!(measured, rat(2, 63));
        assert!(measured <= rat(3, 28)); // (1/7)·3/(7−3)
        for q in 3..=20u64 {
            for p in 2..q {
                let measured = mod_inverter_linf(q, p).unwrap();
                let bound = BigRational::new(BigInt::from(p), BigInt::from(q) * BigInt::from(q - p));
                assert!(measured <= bound, "q={q}, p={p}");
            }
        }
    }

    fn rounded_params(n: u32) -> RoundedSfextParams {
        RoundedSfextParams::new(2, n, 2, 3, family_graph("cycle", 5).unwrap()).unwrap()
    }

    #[test]
    fn rounded_round_trip_everywhere() {
        let p = rounded_params(6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in 0..4u64 {
            let y = index_to_symbols(t, 2, 2);
            for _ in 0..50 {
                let x = p.invert(&y, &mut rng).unwrap();
                assert_eq!(p.extract(&x).unwrap(), y, "x = {x:?}");
            }
            // and the whole exact conditional support round-trips
            let cond = p.invert_dist(&y).unwrap();
            for (&packed, _) in cond.iter() {
                let x = index_to_symbols(packed, 2, 6);
                assert_eq!(p.extract(&x).unwrap(), y);
            }
        }
    }

    #[test]
    fn rounded_inverter_linf_measured_vs_composed_bound() {
        let p = rounded_params(6);
        let out = p.inverter_output_dist().unwrap();
        let measured = out.linf_from_uniform();
        let bound = p.inverter_linf_bound();
        assert!(measured <= bound, "measured {measured} above composed bound {bound}");
        assert!(!measured.is_zero(), "unbalanced folds cannot be perfectly uniform");
    }

    #[test]
    fn walk_rate_examples() {
        // δ = 0 with α ≤ 1 (λ above 1/√d): R = max{α, 1} − γ = 1 − γ
        let r = walk_rate(0.0, 2, 0.8, 0.01).unwrap();
        assert!((r.rate - 0.99).abs() < 1e-12);
        // 5-cycle: λ ≈ 0.809, α ≈ 0.612, δ = 1/2
        let r = walk_rate(0.5, 2, 0.8090169943749475, 0.0).unwrap();
        assert!((r.alpha - 0.6115161727387654).abs() < 1e-9);
        assert!((r.rate - 0.5 * r.alpha).abs() < 1e-12);
        assert!((r.k_fraction - 0.5).abs() < 1e-12);
        assert!(walk_rate(0.5, 2, 1.0, 0.0).is_err());
    }

    #[test]
    fn params_json_round_trip() {
        let p = cycle4_params(8, 5);
        let q = SfextParams::from_json(&p.to_json()).unwrap();
        assert_eq!(q.extract(&[1, 0, 1, 1, 0, 0, 1, 0]).unwrap(), p.extract(&[1, 0, 1, 1, 0, 0, 1, 0]).unwrap());
        let r = rounded_params(6);
        let r2 = RoundedSfextParams::from_json(&r.to_json()).unwrap();
        assert_eq!(r2.extract(&[1, 0, 1, 1, 0, 0]).unwrap(), r.extract(&[1, 0, 1, 1, 0, 0]).unwrap());
    }

    proptest! {
        #[test]
        fn inversion_round_trips(target in 0u64..4, seed in 0u64..1000) {
            let p = cycle4_params(7, 4);
            let y = index_to_symbols(target, 2, 2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = p.invert(&y, &mut rng).unwrap();
            prop_assert_eq!(&p.extract(&x).unwrap(), &y);

            let rp = rounded_params(7);
            let x = rp.invert(&y, &mut rng).unwrap();
            prop_assert_eq!(&rp.extract(&x).unwrap(), &y);
        }
    }
}
