//! Labeled regular graphs and spectral estimation.
//!
//! A graph here is a vertex set `0..N` together with `d` label maps, each a
//! permutation of the vertices. A walk reads one label per step, so walks are
//! reversible: [`LabeledGraph::walk_inverse`] retraces any label sequence.
//! The built-in families are undirected as multigraphs (the label multiset is
//! closed under inversion), which is what the spectral claims rely on.

use crate::error::{Error, Result};
use crate::dists::ExactDist;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cap on N·d when materializing a label table.
const TABLE_CAP: u128 = 1 << 24;

/// Largest vertex count accepted by the dense spectral estimator.
const SPECTRAL_CAP: u64 = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    n: u64,
    d: u32,
    family: String,
    /// labels[t][v] = vertex reached from v along label t.
    labels: Vec<Vec<u64>>,
    inverse: Vec<Vec<u64>>,
}

impl LabeledGraph {
    pub fn new(n: u64, d: u32, labels: Vec<Vec<u64>>, family: &str) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::DomainError("graph needs at least one vertex and one label".into()));
        }
        let table = n as u128 * d as u128;
        if table > TABLE_CAP {
            return Err(Error::EnumerationCapExceeded { needed: table, cap: TABLE_CAP });
        }
        if labels.len() != d as usize {
            return Err(Error::ShapeMismatch(format!("{} label maps for degree {d}", labels.len())));
        }
        let mut inverse = vec![vec![u64::MAX; n as usize]; d as usize];
        for (t, map) in labels.iter().enumerate() {
            if map.len() != n as usize {
                return Err(Error::ShapeMismatch(format!("label {t} maps {} vertices, graph has {n}", map.len())));
            }
            for (v, &w) in map.iter().enumerate() {
                if w >= n {
                    return Err(Error::OutOfRange(format!("label {t} sends {v} to {w} >= {n}")));
                }
                if inverse[t][w as usize] != u64::MAX {
                    return Err(Error::DomainError(format!("label {t} is not a permutation: {w} hit twice")));
                }
                inverse[t][w as usize] = v as u64;
            }
        }
        Ok(LabeledGraph { n, d, family: family.to_string(), labels, inverse })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn step(&self, v: u64, t: u32) -> u64 {
        assert!(v < self.n && t < self.d, "step ({v}, {t}) outside graph");
        self.labels[t as usize][v as usize]
    }

    pub fn step_inverse(&self, v: u64, t: u32) -> u64 {
        assert!(v < self.n && t < self.d, "step ({v}, {t}) outside graph");
        self.inverse[t as usize][v as usize]
    }

    pub fn walk(&self, start: u64, steps: &[u32]) -> Result<u64> {
        if start >= self.n {
            return Err(Error::OutOfRange(format!("start vertex {start} >= {}", self.n)));
        }
        let mut v = start;
        for &t in steps {
            if t >= self.d {
                return Err(Error::OutOfRange(format!("label {t} >= degree {}", self.d)));
            }
            v = self.labels[t as usize][v as usize];
        }
        Ok(v)
    }

    /// Retraces `steps` backwards from the endpoint of a walk.
    pub fn walk_inverse(&self, end: u64, steps: &[u32]) -> Result<u64> {
        if end >= self.n {
            return Err(Error::OutOfRange(format!("end vertex {end} >= {}", self.n)));
        }
        let mut v = end;
        for &t in steps.iter().rev() {
            if t >= self.d {
                return Err(Error::OutOfRange(format!("label {t} >= degree {}", self.d)));
            }
            v = self.inverse[t as usize][v as usize];
        }
        Ok(v)
    }

    /// (M f)(v) = avg_t f(step(v, t)), the walk operator on functions.
    pub fn apply_forward(&self, f: &[f64]) -> Vec<f64> {
        let inv_d = 1.0 / self.d as f64;
        (0..self.n as usize)
            .map(|v| {
                let s: f64 = (0..self.d as usize).map(|t| f[self.labels[t][v] as usize]).sum();
                s * inv_d
            })
            .collect()
    }

    /// (Mᵀ f)(v) = avg_t f(step⁻¹(v, t)); evolves a distribution one step.
    pub fn apply_transpose(&self, f: &[f64]) -> Vec<f64> {
        let inv_d = 1.0 / self.d as f64;
        (0..self.n as usize)
            .map(|v| {
                let s: f64 = (0..self.d as usize).map(|t| f[self.inverse[t][v] as usize]).sum();
                s * inv_d
            })
            .collect()
    }

    /// One exact step of the random walk started from `p`.
    pub fn evolve(&self, p: &ExactDist) -> Result<ExactDist> {
        if p.d() != 1 && p.span() != self.n as u128 {
            return Err(Error::ShapeMismatch(format!(
                "distribution spans {} points, graph has {} vertices",
                p.span(),
                self.n
            )));
        }
        let mut weights: Vec<(u64, BigRational)> = Vec::new();
        let d_rat = BigRational::from_integer(self.d.into());
        for (&v, mass) in p.iter() {
            let share = mass / &d_rat;
            for t in 0..self.d {
                weights.push((self.step(v, t), share.clone()));
            }
        }
        ExactDist::from_weights(p.d(), p.n(), weights, u128::MAX)
    }

    /// Second-largest singular value of the normalized walk operator, found
    /// by power iteration on MᵀM restricted to the mean-zero subspace. For
    /// the undirected built-in families this is the usual λ(G).
    pub fn second_eigenvalue(&self) -> Result<f64> {
        let n = self.n as usize;
        if self.n > SPECTRAL_CAP {
            return Err(Error::EnumerationCapExceeded { needed: self.n as u128, cap: SPECTRAL_CAP as u128 });
        }
        if n < 2 {
            return Err(Error::PreconditionViolated("spectral gap needs at least two vertices".into()));
        }
        let deflate = |f: &mut Vec<f64>| {
            let mean: f64 = f.iter().sum::<f64>() / f.len() as f64;
            for x in f.iter_mut() {
                *x -= mean;
            }
        };
        let norm = |f: &[f64]| f.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(0x6f2a);
        let mut f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        deflate(&mut f);
        let nf = norm(&f);
        if nf == 0.0 {
            return Err(Error::PreconditionViolated("degenerate start vector".into()));
        }
        for x in f.iter_mut() {
            *x /= nf;
        }
        const MAX_ITERS: usize = 2_000_000;
        for _ in 0..MAX_ITERS {
            let mut h = self.apply_transpose(&self.apply_forward(&f));
            deflate(&mut h);
            let rq: f64 = f.iter().zip(&h).map(|(a, b)| a * b).sum();
            let residual = f
                .iter()
                .zip(&h)
                .map(|(a, b)| (b - rq * a) * (b - rq * a))
                .sum::<f64>()
                .sqrt();
            if residual <= 1e-10 {
                return Ok(rq.max(0.0).sqrt());
            }
            let nh = norm(&h);
            if nh == 0.0 {
                return Ok(0.0);
            }
            for (x, y) in f.iter_mut().zip(&h) {
                *x = y / nh;
            }
        }
        Err(Error::NoConvergence(MAX_ITERS))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "family": self.family,
            "N": self.n,
            "d": self.d,
            "labels": self.labels,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let n = v["N"].as_u64().ok_or_else(|| Error::BadHeader("missing N".into()))?;
        let d = v["d"].as_u64().ok_or_else(|| Error::BadHeader("missing d".into()))? as u32;
        let family = v["family"].as_str().unwrap_or("custom");
        let raw = v["labels"].as_array().ok_or_else(|| Error::BadHeader("missing labels".into()))?;
        let mut labels = Vec::with_capacity(raw.len());
        for row in raw {
            let map: Option<Vec<u64>> = row.as_array().map(|a| a.iter().filter_map(|x| x.as_u64()).collect());
            let map = map.filter(|m| m.len() == row.as_array().map(|a| a.len()).unwrap_or(0));
            labels.push(map.ok_or_else(|| Error::BadHeader("label map is not an integer array".into()))?);
        }
        LabeledGraph::new(n, d, labels, family)
    }
}

/// Builds one of the named families:
///
/// * `cycle`, size N: degree 2, labels step +1 / −1 around Z_N.
/// * `complete-selfloop`, size N: degree N, label t steps +t around Z_N,
///   so one application mixes exactly (λ = 0).
/// * `margulis`, size m: the degree-8 graph on Z_m × Z_m whose labels are
///   (x±2y, y), (x±(2y+1), y), (x, y±2x), (x, y±(2x+1)), with vertex (x, y)
///   encoded as x·m + y. Its second eigenvalue stays below 5√2/8 for every m.
pub fn family_graph(kind: &str, size: u64) -> Result<LabeledGraph> {
    match kind {
        "cycle" => {
            if size < 2 {
                return Err(Error::DomainError("cycle needs at least 2 vertices".into()));
            }
            let fwd: Vec<u64> = (0..size).map(|v| (v + 1) % size).collect();
            let back: Vec<u64> = (0..size).map(|v| (v + size - 1) % size).collect();
            LabeledGraph::new(size, 2, vec![fwd, back], "cycle")
        }
        "complete-selfloop" => {
            if size == 0 {
                return Err(Error::DomainError("graph needs vertices".into()));
            }
            let labels: Vec<Vec<u64>> = (0..size).map(|t| (0..size).map(|v| (v + t) % size).collect()).collect();
            LabeledGraph::new(size, size as u32, labels, "complete-selfloop")
        }
        "margulis" => {
            let m = size;
            if m < 2 {
                return Err(Error::DomainError("margulis family needs m >= 2".into()));
            }
            let n = m * m;
            type Map = fn(u64, u64, u64) -> (u64, u64);
            let maps: [Map; 8] = [
                |x, y, m| ((x + 2 * y) % m, y),
                |x, y, m| ((x + m - 2 * y % m) % m, y),
                |x, y, m| ((x + 2 * y + 1) % m, y),
                |x, y, m| ((x + m - (2 * y + 1) % m) % m, y),
                |x, y, m| (x, (y + 2 * x) % m),
                |x, y, m| (x, (y + m - 2 * x % m) % m),
                |x, y, m| (x, (y + 2 * x + 1) % m),
                |x, y, m| (x, (y + m - (2 * x + 1) % m) % m),
            ];
            let mut labels = Vec::with_capacity(8);
            for f in maps {
                let mut map = vec![0u64; n as usize];
                for x in 0..m {
                    for y in 0..m {
                        let (nx, ny) = f(x, y, m);
                        map[(x * m + y) as usize] = nx * m + ny;
                    }
                }
                labels.push(map);
            }
            LabeledGraph::new(n, 8, labels, "margulis")
        }
        _ => Err(Error::UnsupportedFamily(kind.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::DEFAULT_CAP;
    use num_traits::Zero;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn cycle_steps_and_walks() {
        let g = family_graph("cycle", 5).unwrap();
        assert_eq!(g.step(0, 0), 1);
        assert_eq!(g.step(0, 1), 4);
        assert_eq!(g.step_inverse(1, 0), 0);
        assert_eq!(g.walk(0, &[0, 0, 1]).unwrap(), 1);
        assert_eq!(g.walk_inverse(1, &[0, 0, 1]).unwrap(), 0);
    }

    #[test]
    fn rejects_non_permutation_labels() {
        let labels = vec![vec![0u64, 0]];
        assert!(matches!(LabeledGraph::new(2, 1, labels, "custom"), Err(Error::DomainError(_))));
        let labels = vec![vec![0u64, 5]];
        assert!(matches!(LabeledGraph::new(2, 1, labels, "custom"), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn complete_selfloop_mixes_in_one_step() {
        let g = family_graph("complete-selfloop", 6).unwrap();
        let p = ExactDist::point_mass(6, 1, 3, DEFAULT_CAP).unwrap();
        let stepped = g.evolve(&p).unwrap();
        assert!(stepped.distance_from_uniform().is_zero());
        assert!(g.second_eigenvalue().unwrap() < 1e-9);
    }

    #[test]
    fn cycle_eigenvalues_match_cosine_formula() {
        // second eigenvalue of the N-cycle is max_{j>0} |cos(2πj/N)|
        let g5 = family_graph("cycle", 5).unwrap();
        let lam = g5.second_eigenvalue().unwrap();
        assert!((lam - 0.8090169943749475).abs() < 1e-9);

        let g4 = family_graph("cycle", 4).unwrap();
        let lam = g4.second_eigenvalue().unwrap();
        assert!((lam - 1.0).abs() < 1e-9, "4-cycle is bipartite, λ = 1");
    }

    #[test]
    fn margulis_step_example_and_label_pairing() {
        let g = family_graph("margulis", 3).unwrap();
        // (1,1) --(x += 2y)--> (0,1) mod 3, i.e. vertex 4 -> 1
        assert_eq!(g.step(4, 0), 1);
        // label maps come in inverse pairs (0,1), (2,3), (4,5), (6,7)
        for v in 0..g.n() {
            for pair in [(0u32, 1u32), (2, 3), (4, 5), (6, 7)] {
                assert_eq!(g.step(g.step(v, pair.0), pair.1), v);
                assert_eq!(g.step(g.step(v, pair.1), pair.0), v);
            }
        }
    }

    #[test]
    fn margulis_spectra_match_dense_solver() {
        // frozen from an independent dense eigendecomposition
        let lam3 = family_graph("margulis", 3).unwrap().second_eigenvalue().unwrap();
        assert!((lam3 - 0.5756939094329987).abs() < 1e-6);
        let lam4 = family_graph("margulis", 4).unwrap().second_eigenvalue().unwrap();
        assert!((lam4 - 0.6035533905932736).abs() < 1e-6);
        let bound = 5.0 * 2f64.sqrt() / 8.0;
        assert!(lam3 < bound && lam4 < bound);
    }

    #[test]
    fn walk_contraction_in_l2() {
        for (kind, size) in [("cycle", 5u64), ("margulis", 3)] {
            let g = family_graph(kind, size).unwrap();
            let lam = g.second_eigenvalue().unwrap();
            let n = g.n() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            for _ in 0..50 {
                let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
                let u = 1.0 / n as f64;
                let before: f64 = p.iter().map(|x| (x - u) * (x - u)).sum::<f64>().sqrt();
                let stepped = g.apply_transpose(&p);
                let after: f64 = stepped.iter().map(|x| (x - u) * (x - u)).sum::<f64>().sqrt();
                assert!(after <= lam * before + 1e-12, "{kind}: {after} > {lam}·{before}");
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let g = family_graph("margulis", 3).unwrap();
        let j = g.to_json();
        let back = LabeledGraph::from_json(&j).unwrap();
        assert_eq!(g, back);
        assert!(matches!(family_graph("petersen", 10), Err(Error::UnsupportedFamily(_))));
    }

    proptest! {
        #[test]
        fn walk_inverse_undoes_walk(start in 0u64..9, steps in proptest::collection::vec(0u32..8, 0..12)) {
            let g = family_graph("margulis", 3).unwrap();
            let end = g.walk(start, &steps).unwrap();
            prop_assert_eq!(g.walk_inverse(end, &steps).unwrap(), start);
        }
    }
}
