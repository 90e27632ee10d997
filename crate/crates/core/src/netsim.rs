//! Network-coded transmission over directed acyclic graphs with a wiretap
//! outer code at the source: per-edge linear combining over GF(q),
//! receiver-side Gaussian decoding, and exact conditioning of the message
//! on the symbols of any tapped edge set.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::dists::{index_to_symbols, rat_to_f64, symbols_to_index};
use crate::error::{Error, Result};
use crate::gf::{solve_affine, FMatrix, FieldSpec};
use crate::wiretap::{ObservationRecord, ResilienceReport, SubsetRecord, WiretapProtocol};

/// A unit-capacity directed acyclic network: one symbol per edge per use,
/// messages injected at the source, decoded at every receiver.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    vertices: usize,
    edges: Vec<(usize, usize)>,
    source: usize,
    receivers: Vec<usize>,
    field: FieldSpec,
}

impl NetworkSpec {
    pub fn new(
        vertices: usize,
        edges: Vec<(usize, usize)>,
        source: usize,
        receivers: Vec<usize>,
        q: u64,
    ) -> Result<Self> {
        let field = FieldSpec::new(q)?;
        if vertices == 0 || vertices > 64 {
            return Err(Error::DomainError(format!("{vertices} vertices outside the desk-scale range 1..=64")));
        }
        if edges.len() > 64 {
            return Err(Error::DomainError(format!("{} edges is beyond desk scale", edges.len())));
        }
        if source >= vertices {
            return Err(Error::OutOfRange(format!("source {source} outside 0..{vertices}")));
        }
        for &(u, v) in &edges {
            if u >= vertices || v >= vertices {
                return Err(Error::OutOfRange(format!("edge ({u}, {v}) outside 0..{vertices}")));
            }
            if u == v {
                return Err(Error::DomainError(format!("self-loop at vertex {u}")));
            }
            if v == source {
                return Err(Error::DomainError(format!(
                    "edge ({u}, {v}) feeds the source, which only injects"
                )));
            }
        }
        if receivers.is_empty() {
            return Err(Error::DomainError("no receivers".to_string()));
        }
        let mut seen_receivers = BTreeSet::new();
        for &r in &receivers {
            if r >= vertices {
                return Err(Error::OutOfRange(format!("receiver {r} outside 0..{vertices}")));
            }
            if r == source {
                return Err(Error::DomainError(format!("receiver {r} coincides with the source")));
            }
            if !seen_receivers.insert(r) {
                return Err(Error::DomainError(format!("receiver {r} listed twice")));
            }
        }
        let net = NetworkSpec { vertices, edges, source, receivers, field };
        net.topo_positions()?;
        let reachable = net.reachable_from_source();
        for &r in &net.receivers {
            if !reachable[r] {
                return Err(Error::UnreachableReceiver(format!(
                    "no path from vertex {source} to vertex {r}"
                )));
            }
        }
        Ok(net)
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn receivers(&self) -> &[usize] {
        &self.receivers
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn q(&self) -> u32 {
        self.field.q as u32
    }

    /// Incoming edge indices of a vertex, ascending.
    pub fn in_edges(&self, v: usize) -> Vec<usize> {
        (0..self.edges.len()).filter(|&e| self.edges[e].1 == v).collect()
    }

    fn topo_positions(&self) -> Result<Vec<usize>> {
        let mut indegree = vec![0usize; self.vertices];
        for &(_, v) in &self.edges {
            indegree[v] += 1;
        }
        let mut queue: VecDeque<usize> =
            (0..self.vertices).filter(|&v| indegree[v] == 0).collect();
        let mut position = vec![usize::MAX; self.vertices];
        let mut placed = 0;
        while let Some(u) = queue.pop_front() {
            position[u] = placed;
            placed += 1;
            for &(a, b) in &self.edges {
                if a == u {
                    indegree[b] -= 1;
                    if indegree[b] == 0 {
                        queue.push_back(b);
                    }
                }
            }
        }
        if placed < self.vertices {
            return Err(Error::DomainError("the edge set contains a directed cycle".to_string()));
        }
        Ok(position)
    }

    /// Edge indices ordered so every edge comes after all incoming edges of
    /// its tail vertex.
    fn edge_order(&self) -> Vec<usize> {
        let position = self.topo_positions().expect("validated at construction");
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by_key(|&e| (position[self.edges[e].0], e));
        order
    }

    fn reachable_from_source(&self) -> Vec<bool> {
        let mut reachable = vec![false; self.vertices];
        reachable[self.source] = true;
        let mut queue = VecDeque::from([self.source]);
        while let Some(u) = queue.pop_front() {
            for &(a, b) in &self.edges {
                if a == u && !reachable[b] {
                    reachable[b] = true;
                    queue.push_back(b);
                }
            }
        }
        reachable
    }

    /// Maximum number of edge-disjoint source-to-receiver paths, by
    /// augmenting-path search with unit capacities.
    pub fn min_cut(&self, receiver: usize) -> Result<usize> {
        if receiver >= self.vertices {
            return Err(Error::OutOfRange(format!("vertex {receiver} outside 0..{}", self.vertices)));
        }
        if receiver == self.source {
            return Err(Error::DomainError("the source cannot be its own receiver".to_string()));
        }
        let mut used = vec![false; self.edges.len()];
        let mut value = 0usize;
        loop {
            let mut parent: Vec<Option<(usize, bool)>> = vec![None; self.vertices];
            let mut seen = vec![false; self.vertices];
            seen[self.source] = true;
            let mut queue = VecDeque::from([self.source]);
            while let Some(u) = queue.pop_front() {
                if u == receiver {
                    break;
                }
                for (e, &(a, b)) in self.edges.iter().enumerate() {
                    if a == u && !used[e] && !seen[b] {
                        seen[b] = true;
                        parent[b] = Some((e, true));
                        queue.push_back(b);
                    } else if b == u && used[e] && !seen[a] {
                        seen[a] = true;
                        parent[a] = Some((e, false));
                        queue.push_back(a);
                    }
                }
            }
            if !seen[receiver] {
                break;
            }
            let mut v = receiver;
            while v != self.source {
                let (e, forward) = parent[v].expect("path reconstruction stays seen");
                used[e] = forward;
                v = if forward { self.edges[e].0 } else { self.edges[e].1 };
            }
            value += 1;
        }
        if value == 0 {
            return Err(Error::UnreachableReceiver(format!(
                "no path from vertex {} to vertex {receiver}",
                self.source
            )));
        }
        Ok(value)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "vertices": self.vertices,
            "edges": self.edges.iter().map(|&(u, v)| json!([u, v])).collect::<Vec<_>>(),
            "source": self.source,
            "receivers": self.receivers,
            "q": self.field.q,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let vertices = v["vertices"]
            .as_u64()
            .ok_or_else(|| Error::BadHeader("vertices missing".into()))? as usize;
        let edges = v["edges"]
            .as_array()
            .ok_or_else(|| Error::BadHeader("edges missing".into()))?
            .iter()
            .map(|e| {
                let pair = e.as_array().filter(|a| a.len() == 2);
                match pair {
                    Some(a) => match (a[0].as_u64(), a[1].as_u64()) {
                        (Some(u), Some(w)) => Ok((u as usize, w as usize)),
                        _ => Err(Error::BadHeader("edge endpoints must be integers".into())),
                    },
                    None => Err(Error::BadHeader("each edge must be a [tail, head] pair".into())),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let source = v["source"]
            .as_u64()
            .ok_or_else(|| Error::BadHeader("source missing".into()))? as usize;
        let receivers = v["receivers"]
            .as_array()
            .ok_or_else(|| Error::BadHeader("receivers missing".into()))?
            .iter()
            .map(|r| {
                r.as_u64()
                    .map(|x| x as usize)
                    .ok_or_else(|| Error::BadHeader("receivers must be integers".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let q = v["q"].as_u64().ok_or_else(|| Error::BadHeader("q missing".into()))?;
        Self::new(vertices, edges, source, receivers, q)
    }
}

/// Source, relay chain, receiver: one edge per hop.
pub fn path_topology(hops: usize, q: u64) -> Result<NetworkSpec> {
    if hops == 0 {
        return Err(Error::DomainError("a path needs at least one hop".to_string()));
    }
    let edges = (0..hops).map(|i| (i, i + 1)).collect();
    NetworkSpec::new(hops + 1, edges, 0, vec![hops], q)
}

/// Source and receiver joined by `width` parallel edges.
pub fn parallel_topology(width: usize, q: u64) -> Result<NetworkSpec> {
    if width == 0 {
        return Err(Error::DomainError("a parallel bundle needs at least one edge".to_string()));
    }
    NetworkSpec::new(2, vec![(0, 1); width], 0, vec![1], q)
}

/// The two-receiver multicast classic: vertices S, A, B, C, D, R1, R2 with
/// edges S→A, S→B, A→C, B→C, C→D, A→R1, B→R2, D→R1, D→R2. Min-cut 2 to
/// each receiver, yet the bottleneck edge C→D must carry a mixture.
pub fn butterfly_topology(q: u64) -> Result<NetworkSpec> {
    let edges = vec![
        (0, 1),
        (0, 2),
        (1, 3),
        (2, 3),
        (3, 4),
        (1, 5),
        (2, 6),
        (4, 5),
        (4, 6),
    ];
    NetworkSpec::new(7, edges, 0, vec![5, 6], q)
}

/// Source, two disjoint relays, one receiver: min-cut 2 without a shared
/// bottleneck.
pub fn diamond_topology(q: u64) -> Result<NetworkSpec> {
    NetworkSpec::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)], 0, vec![3], q)
}

/// The built-in topology library, keyed by name.
pub fn named_topology(name: &str, q: u64) -> Result<NetworkSpec> {
    match name {
        "path" => path_topology(3, q),
        "parallel" => parallel_topology(2, q),
        "butterfly" => butterfly_topology(q),
        "diamond" => diamond_topology(q),
        other => Err(Error::DomainError(format!(
            "unknown topology {other}; the library has path, parallel, butterfly, diamond"
        ))),
    }
}

/// A linear network code: every edge carries a fixed GF(q)-combination of
/// its tail vertex's inputs (the n injected symbols at the source, the
/// incoming edge symbols elsewhere). Global vectors and per-receiver
/// transfer matrices are derived at construction.
#[derive(Debug, Clone)]
pub struct NetworkCode {
    n: usize,
    locals: Vec<Vec<u32>>,
    globals: Vec<Vec<u32>>,
    transfers: Vec<FMatrix>,
}

impl NetworkCode {
    pub fn new(net: &NetworkSpec, n: usize, locals: Vec<Vec<u32>>) -> Result<Self> {
        if n == 0 || n > 16 {
            return Err(Error::DomainError(format!("{n} source symbols outside the desk-scale range 1..=16")));
        }
        if locals.len() != net.edges().len() {
            return Err(Error::ShapeMismatch(format!(
                "{} local vectors against {} edges",
                locals.len(),
                net.edges().len()
            )));
        }
        let field = net.field();
        for (e, coeffs) in locals.iter().enumerate() {
            let tail = net.edges()[e].0;
            let arity = if tail == net.source() { n } else { net.in_edges(tail).len() };
            if coeffs.len() != arity {
                return Err(Error::ShapeMismatch(format!(
                    "edge {e} has {} coefficients but its tail offers {arity} inputs",
                    coeffs.len()
                )));
            }
            for &c in coeffs {
                field.check(c)?;
            }
        }
        let mut globals = vec![vec![0u32; n]; locals.len()];
        for e in net.edge_order() {
            let tail = net.edges()[e].0;
            let mut global = vec![0u32; n];
            if tail == net.source() {
                global.copy_from_slice(&locals[e]);
            } else {
                for (i, &input) in net.in_edges(tail).iter().enumerate() {
                    let c = locals[e][i];
                    if c == 0 {
                        continue;
                    }
                    for (g, &src) in global.iter_mut().zip(&globals[input]) {
                        *g = field.add(*g, field.mul(c, src));
                    }
                }
            }
            globals[e] = global;
        }
        let transfers = net
            .receivers()
            .iter()
            .map(|&r| {
                let rows = net.in_edges(r);
                let data: Vec<u32> = rows.iter().flat_map(|&e| globals[e].iter().copied()).collect();
                FMatrix::new(field, rows.len(), n, data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NetworkCode { n, locals, globals, transfers })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn locals(&self) -> &[Vec<u32>] {
        &self.locals
    }

    pub fn global_vector(&self, edge: usize) -> Result<&[u32]> {
        self.globals
            .get(edge)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::OutOfRange(format!("edge {edge} outside 0..{}", self.globals.len())))
    }

    /// The receiver's observation as a matrix over the source symbols, rows
    /// aligned with its incoming edges in ascending order.
    pub fn transfer(&self, net: &NetworkSpec, receiver: usize) -> Result<&FMatrix> {
        let slot = net
            .receivers()
            .iter()
            .position(|&r| r == receiver)
            .ok_or_else(|| Error::DomainError(format!("vertex {receiver} is not a receiver")))?;
        Ok(&self.transfers[slot])
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "locals": self.locals,
        })
    }

    pub fn from_json(net: &NetworkSpec, v: &Value) -> Result<Self> {
        let n = v["n"].as_u64().ok_or_else(|| Error::BadHeader("n missing".into()))? as usize;
        let locals = v["locals"]
            .as_array()
            .ok_or_else(|| Error::BadHeader("locals missing".into()))?
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| Error::BadHeader("each local vector must be an array".into()))?
                    .iter()
                    .map(|c| {
                        c.as_u64()
                            .map(|x| x as u32)
                            .ok_or_else(|| Error::BadHeader("coefficients must be integers".into()))
                    })
                    .collect::<Result<Vec<u32>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(net, n, locals)
    }
}

/// The hand assignment for the butterfly: straight relays everywhere and the
/// sum on the bottleneck, giving both receivers a full-rank view over any
/// field.
pub fn butterfly_xor_code(net: &NetworkSpec) -> Result<NetworkCode> {
    let shape = butterfly_topology(net.field().q)?;
    if net.edges() != shape.edges() || net.source() != shape.source() || net.receivers() != shape.receivers() {
        return Err(Error::DomainError("the fixed code only fits the butterfly topology".to_string()));
    }
    let locals = vec![
        vec![1, 0],
        vec![0, 1],
        vec![1],
        vec![1],
        vec![1, 1],
        vec![1],
        vec![1],
        vec![1],
        vec![1],
    ];
    NetworkCode::new(net, 2, locals)
}

/// Draws uniform local coefficients until every receiver's transfer matrix
/// reaches rank min(n, min-cut), trying at most 16 times.
pub fn assign_random_code(net: &NetworkSpec, n: usize, rng: &mut impl Rng) -> Result<NetworkCode> {
    let targets = net
        .receivers()
        .iter()
        .map(|&r| Ok((r, n.min(net.min_cut(r)?))))
        .collect::<Result<Vec<_>>>()?;
    let q = net.field().q as u32;
    for _ in 0..16 {
        let locals: Vec<Vec<u32>> = (0..net.edges().len())
            .map(|e| {
                let tail = net.edges()[e].0;
                let arity = if tail == net.source() { n } else { net.in_edges(tail).len() };
                (0..arity).map(|_| rng.gen_range(0..q)).collect()
            })
            .collect();
        let code = NetworkCode::new(net, n, locals)?;
        if targets.iter().all(|&(r, want)| {
            code.transfer(net, r).map(|m| m.rank() == want).unwrap_or(false)
        }) {
            return Ok(code);
        }
    }
    Err(Error::RankDeficientAfterRetries(16))
}

/// Evaluates every edge symbol by local combining in topological order.
pub fn transmit(net: &NetworkSpec, code: &NetworkCode, source_symbols: &[u32]) -> Result<Vec<u32>> {
    if source_symbols.len() != code.n() {
        return Err(Error::ShapeMismatch(format!(
            "{} source symbols against code dimension {}",
            source_symbols.len(),
            code.n()
        )));
    }
    let field = net.field();
    for &s in source_symbols {
        field.check(s)?;
    }
    let mut symbols = vec![0u32; net.edges().len()];
    for e in net.edge_order() {
        let tail = net.edges()[e].0;
        let mut acc = 0u32;
        if tail == net.source() {
            for (c, &s) in code.locals()[e].iter().zip(source_symbols) {
                acc = field.add(acc, field.mul(*c, s));
            }
        } else {
            for (i, &input) in net.in_edges(tail).iter().enumerate() {
                acc = field.add(acc, field.mul(code.locals()[e][i], symbols[input]));
            }
        }
        symbols[e] = acc;
    }
    Ok(symbols)
}

/// Solves the receiver's transfer system for the source symbols.
pub fn receiver_decode(
    net: &NetworkSpec,
    code: &NetworkCode,
    receiver: usize,
    observed: &[u32],
) -> Result<Vec<u32>> {
    let transfer = code.transfer(net, receiver)?;
    if observed.len() != transfer.rows {
        return Err(Error::ShapeMismatch(format!(
            "{} observed symbols against {} incoming edges",
            observed.len(),
            transfer.rows
        )));
    }
    match solve_affine(transfer, observed)? {
        None => Err(Error::SingularTransfer(format!(
            "vertex {receiver} observed symbols outside its transfer image"
        ))),
        Some(sol) if !sol.kernel.is_empty() => Err(Error::SingularTransfer(format!(
            "transfer rank at vertex {receiver} is below the source dimension {}",
            code.n()
        ))),
        Some(sol) => Ok(sol.particular),
    }
}

/// Per-receiver outcome of a full message/seed sweep.
#[derive(Debug, Clone)]
pub struct ReceiverStatus {
    pub vertex: usize,
    pub decoded: bool,
}

/// Exact conditioning of the message on the tapped edge symbols, packaged
/// in the same shape as a coordinate-subset resilience report, plus decode
/// status at every receiver.
#[derive(Debug, Clone)]
pub struct NetRunReport {
    pub resilience: ResilienceReport,
    pub receivers: Vec<ReceiverStatus>,
    pub tapped_edges: Vec<usize>,
}

impl NetRunReport {
    pub fn all_receivers_decode(&self) -> bool {
        self.receivers.iter().all(|r| r.decoded)
    }

    pub fn to_json(&self, params: Value) -> Value {
        let mut v = self.resilience.to_json(params);
        v["tapped_edges"] = json!(self.tapped_edges);
        v["receivers"] = json!(self
            .receivers
            .iter()
            .map(|r| json!({"vertex": r.vertex, "decoded": r.decoded}))
            .collect::<Vec<_>>());
        v["all_receivers_decode"] = json!(self.all_receivers_decode());
        v
    }
}

/// Runs the wiretap protocol through the network for every message and seed:
/// the source wiretap-encodes and injects the n protocol symbols, the
/// intruder reads the tapped edges, every receiver must recover the exact
/// message. The tapped view is a GF(q)-linear image of the protocol output.
pub fn wiretap_netcode_run(
    net: &NetworkSpec,
    code: &NetworkCode,
    p: &WiretapProtocol,
    wiretap_edges: &[usize],
    epsilon_target: &BigRational,
    cap: u128,
) -> Result<NetRunReport> {
    if p.q() as u64 != net.field().q {
        return Err(Error::ShapeMismatch(format!(
            "protocol alphabet {} against network alphabet {}",
            p.q(),
            net.field().q
        )));
    }
    if p.n() as usize != code.n() {
        return Err(Error::ShapeMismatch(format!(
            "protocol block length {} against {} injected symbols",
            p.n(),
            code.n()
        )));
    }
    let tapped: BTreeSet<usize> = wiretap_edges.iter().copied().collect();
    for &e in &tapped {
        if e >= net.edges().len() {
            return Err(Error::OutOfRange(format!("edge {e} outside 0..{}", net.edges().len())));
        }
    }
    let tapped: Vec<usize> = tapped.into_iter().collect();
    let work = p.message_span() as u128 * p.seed_span() as u128;
    if work > cap {
        return Err(Error::EnumerationCapExceeded { needed: work, cap });
    }
    let q = p.q();
    let mut by_view: BTreeMap<u64, BTreeMap<u64, u64>> = BTreeMap::new();
    let mut receivers: Vec<ReceiverStatus> =
        net.receivers().iter().map(|&vertex| ReceiverStatus { vertex, decoded: true }).collect();
    for x in 0..p.message_span() {
        for z in 0..p.seed_span() {
            let y = p.encode_with_seed(x, z)?;
            let symbols = index_to_symbols(y, q, p.n());
            let edge_symbols = transmit(net, code, &symbols)?;
            let view: Vec<u32> = tapped.iter().map(|&e| edge_symbols[e]).collect();
            *by_view
                .entry(symbols_to_index(&view, q))
                .or_default()
                .entry(x)
                .or_insert(0) += 1;
            for status in receivers.iter_mut() {
                if !status.decoded {
                    continue;
                }
                let observed: Vec<u32> =
                    net.in_edges(status.vertex).iter().map(|&e| edge_symbols[e]).collect();
                let recovered = receiver_decode(net, code, status.vertex, &observed)
                    .ok()
                    .filter(|s| *s == symbols)
                    .and_then(|s| p.decode(symbols_to_index(&s, q)).ok())
                    .map(|back| back == x)
                    .unwrap_or(false);
                status.decoded = recovered;
            }
        }
    }
    let total = BigInt::from(p.message_span() * p.seed_span());
    let msg_span = p.message_span();
    let u_msg = BigRational::new(BigInt::one(), BigInt::from(msg_span));
    let two = BigRational::from_integer(BigInt::from(2));
    let mut observations = Vec::with_capacity(by_view.len());
    let mut bad_probability = BigRational::zero();
    let mut worst_distance = BigRational::zero();
    let mut equivocation = 0f64;
    for (w, counts) in by_view {
        let obs_total: u64 = counts.values().sum();
        let probability = BigRational::new(BigInt::from(obs_total), total.clone());
        let mut distance = BigRational::zero();
        let mut entropy = 0f64;
        for x in 0..msg_span {
            let c = counts.get(&x).copied().unwrap_or(0);
            let pr = BigRational::new(BigInt::from(c), BigInt::from(obs_total));
            distance += (&pr - &u_msg).abs();
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
        equivocation += rat_to_f64(&probability) * entropy / (q as f64).ln();
        observations.push(ObservationRecord { w, probability, distance, bad });
    }
    let record = SubsetRecord {
        mask: tapped.iter().fold(0u64, |acc, &e| acc | 1 << e),
        coords: tapped.iter().map(|&e| e as u32).collect(),
        observations,
        bad_probability: bad_probability.clone(),
        worst_distance: worst_distance.clone(),
        equivocation,
    };
    let resilience = ResilienceReport {
        t: tapped.len() as u32,
        epsilon_target: epsilon_target.clone(),
        subsets: vec![record],
        gamma_measured: bad_probability,
        worst_distance,
        equivocation: equivocation.min(p.m() as f64),
    };
    Ok(NetRunReport { resilience, receivers, tapped_edges: tapped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affext::InvertibleAffineExtractor;
    use crate::channels::{linear_observation_report, symbol_pad_protocol, LinearCode};
    use crate::dists::DEFAULT_CAP;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Four relays, one receiver per relay pair: over GF(2) only three
    /// distinct nonzero global vectors exist in GF(2)^2, so some pair always
    /// collides and its receiver stays rank-deficient.
    fn combination_network(q: u64) -> NetworkSpec {
        let mut edges = vec![(0, 1), (0, 2), (0, 3), (0, 4)];
        let mut receiver = 5;
        for i in 1..=4usize {
            for j in i + 1..=4usize {
                edges.push((i, receiver));
                edges.push((j, receiver));
                receiver += 1;
            }
        }
        NetworkSpec::new(11, edges, 0, (5..11).collect(), q).unwrap()
    }

    fn identity_code(net: &NetworkSpec, n: usize) -> NetworkCode {
        let locals = (0..n).map(|i| {
            let mut row = vec![0u32; n];
            row[i] = 1;
            row
        });
        NetworkCode::new(net, n, locals.collect()).unwrap()
    }

    #[test]
    fn malformed_topologies_are_rejected() {
        assert!(NetworkSpec::new(3, vec![(0, 1), (1, 2), (2, 1)], 0, vec![2], 2).is_err());
        assert!(NetworkSpec::new(3, vec![(0, 3)], 0, vec![2], 2).is_err());
        assert!(NetworkSpec::new(3, vec![(0, 1), (1, 0)], 0, vec![1], 2).is_err());
        assert!(NetworkSpec::new(3, vec![(0, 1)], 0, vec![2], 2).is_err());
        assert!(NetworkSpec::new(3, vec![(0, 1), (1, 2)], 0, vec![2, 2], 2).is_err());
        assert!(NetworkSpec::new(3, vec![(0, 1), (1, 2)], 0, vec![], 2).is_err());
        assert!(NetworkSpec::new(3, vec![(1, 1)], 0, vec![1], 2).is_err());
        assert!(matches!(
            NetworkSpec::new(4, vec![(0, 1), (2, 3)], 0, vec![3], 2),
            Err(Error::UnreachableReceiver(_))
        ));
    }

    #[test]
    fn min_cut_matches_known_values() {
        assert_eq!(path_topology(3, 2).unwrap().min_cut(3).unwrap(), 1);
        assert_eq!(parallel_topology(2, 2).unwrap().min_cut(1).unwrap(), 2);
        assert_eq!(parallel_topology(8, 2).unwrap().min_cut(1).unwrap(), 8);
        let butterfly = butterfly_topology(2).unwrap();
        assert_eq!(butterfly.min_cut(5).unwrap(), 2);
        assert_eq!(butterfly.min_cut(6).unwrap(), 2);
        assert_eq!(butterfly.min_cut(4).unwrap(), 1);
        assert_eq!(diamond_topology(2).unwrap().min_cut(3).unwrap(), 2);
        let widened = NetworkSpec::new(
            8,
            butterfly_topology(2).unwrap().edges().to_vec(),
            0,
            vec![5, 6],
            2,
        )
        .unwrap();
        assert!(matches!(widened.min_cut(7), Err(Error::UnreachableReceiver(_))));
        assert!(widened.min_cut(0).is_err());
    }

    #[test]
    fn named_topologies_resolve() {
        for name in ["path", "parallel", "butterfly", "diamond"] {
            assert!(named_topology(name, 2).is_ok(), "{name}");
        }
        assert!(named_topology("torus", 2).is_err());
    }

    #[test]
    fn butterfly_xor_code_gives_full_rank_views() {
        let net = butterfly_topology(2).unwrap();
        let code = butterfly_xor_code(&net).unwrap();
        for &r in net.receivers() {
            assert_eq!(code.transfer(&net, r).unwrap().rank(), 2);
        }
        for idx in 0..4u64 {
            let symbols = index_to_symbols(idx, 2, 2);
            let edge_symbols = transmit(&net, &code, &symbols).unwrap();
            assert_eq!(edge_symbols[4], symbols[0] ^ symbols[1]);
            for &r in net.receivers() {
                let observed: Vec<u32> =
                    net.in_edges(r).iter().map(|&e| edge_symbols[e]).collect();
                assert_eq!(receiver_decode(&net, &code, r, &observed).unwrap(), symbols);
            }
        }
        assert!(butterfly_xor_code(&diamond_topology(2).unwrap()).is_err());
    }

    #[test]
    fn random_codes_reach_target_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = butterfly_topology(4).unwrap();
        let code = assign_random_code(&net, 2, &mut rng).unwrap();
        for &r in net.receivers() {
            assert_eq!(code.transfer(&net, r).unwrap().rank(), 2);
        }
        let path = path_topology(3, 5).unwrap();
        let scalar = assign_random_code(&path, 1, &mut rng).unwrap();
        let transfer = code.transfer(&net, 5).unwrap();
        assert_eq!(transfer.rows, 2);
        let lone = scalar.transfer(&path, 3).unwrap();
        assert_eq!((lone.rows, lone.cols), (1, 1));
        assert_ne!(lone.at(0, 0), 0);
    }

    #[test]
    fn impossible_rank_targets_surface_after_retries() {
        let net = combination_network(2);
        for &r in net.receivers() {
            assert_eq!(net.min_cut(r).unwrap(), 2);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(matches!(
            assign_random_code(&net, 2, &mut rng),
            Err(Error::RankDeficientAfterRetries(16))
        ));
    }

    #[test]
    fn transmit_matches_global_vectors() {
        let net = butterfly_topology(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let code = assign_random_code(&net, 2, &mut rng).unwrap();
        let field = net.field();
        for idx in 0..16u64 {
            let symbols = index_to_symbols(idx, 4, 2);
            let edge_symbols = transmit(&net, &code, &symbols).unwrap();
            for e in 0..net.edges().len() {
                let global = code.global_vector(e).unwrap();
                let mut expect = 0u32;
                for (g, &s) in global.iter().zip(&symbols) {
                    expect = field.add(expect, field.mul(*g, s));
                }
                assert_eq!(edge_symbols[e], expect, "edge {e}");
            }
        }
        let zeros = transmit(&net, &code, &[0, 0]).unwrap();
        assert!(zeros.iter().all(|&s| s == 0));
    }

    #[test]
    fn singular_transfers_surface() {
        let net = parallel_topology(2, 2).unwrap();
        let copies = NetworkCode::new(&net, 2, vec![vec![1, 0], vec![1, 0]]).unwrap();
        assert!(matches!(
            receiver_decode(&net, &copies, 1, &[0, 1]),
            Err(Error::SingularTransfer(_))
        ));
        assert!(matches!(
            receiver_decode(&net, &copies, 1, &[1, 1]),
            Err(Error::SingularTransfer(_))
        ));
        assert!(receiver_decode(&net, &copies, 1, &[1]).is_err());
        assert!(copies.transfer(&net, 0).is_err());
    }

    #[test]
    fn butterfly_single_edge_views_are_uniform_and_receivers_decode() {
        let net = butterfly_topology(2).unwrap();
        let code = butterfly_xor_code(&net).unwrap();
        let p = symbol_pad_protocol(2, 1, DEFAULT_CAP).unwrap();
        for e in 0..net.edges().len() {
            let report =
                wiretap_netcode_run(&net, &code, &p, &[e], &BigRational::zero(), DEFAULT_CAP)
                    .unwrap();
            assert!(report.all_receivers_decode(), "edge {e}");
            let record = &report.resilience.subsets[0];
            assert_eq!(record.observations.len(), 2, "edge {e}");
            for obs in &record.observations {
                assert_eq!(obs.probability, rat(1, 2), "edge {e} view skewed");
            }
            let hides = record.worst_distance.is_zero();
            let carries_sum = [4usize, 7, 8].contains(&e);
            assert_eq!(hides, !carries_sum, "edge {e}");
            if carries_sum {
                assert_eq!(record.worst_distance, rat(1, 2));
            }
        }
    }

    #[test]
    fn empty_tap_is_trivially_resilient() {
        let net = butterfly_topology(2).unwrap();
        let code = butterfly_xor_code(&net).unwrap();
        let p = symbol_pad_protocol(2, 1, DEFAULT_CAP).unwrap();
        let report =
            wiretap_netcode_run(&net, &code, &p, &[], &BigRational::zero(), DEFAULT_CAP).unwrap();
        assert!(report.resilience.zero_leakage());
        assert_eq!(report.resilience.worst_distance, BigRational::zero());
        assert_eq!(report.resilience.subsets[0].observations.len(), 1);
    }

    #[test]
    fn tapping_the_source_cut_leaks_everything() {
        let net = butterfly_topology(2).unwrap();
        let code = butterfly_xor_code(&net).unwrap();
        let p = symbol_pad_protocol(2, 1, DEFAULT_CAP).unwrap();
        let report =
            wiretap_netcode_run(&net, &code, &p, &[0, 1], &BigRational::zero(), DEFAULT_CAP)
                .unwrap();
        assert_eq!(report.resilience.worst_distance, rat(1, 2));
        assert_eq!(report.resilience.gamma_measured, BigRational::one());
        assert!(report.all_receivers_decode());
    }

    #[test]
    fn netsim_agrees_with_the_linear_observation_report() {
        let net = parallel_topology(8, 2).unwrap();
        let code = identity_code(&net, 8);
        let ext = InvertibleAffineExtractor::reference_instance();
        let p = WiretapProtocol::from_affine_extractor(&ext, 5, DEFAULT_CAP).unwrap();
        let run =
            wiretap_netcode_run(&net, &code, &p, &[2, 5], &rat(3, 8), DEFAULT_CAP).unwrap();
        assert!(run.all_receivers_decode());
        let record = &run.resilience.subsets[0];

        let hamming = LinearCode::hamming(3).unwrap();
        let mut l = FMatrix::zero(net.field(), 2, 14);
        l.set(0, 2, 1);
        l.set(1, 8, 1);
        let report = linear_observation_report(&p, &hamming, &l, DEFAULT_CAP).unwrap();

        assert_eq!(record.observations.len(), report.rows.len());
        for obs in &record.observations {
            let row = report
                .rows
                .iter()
                .find(|r| symbols_to_index(&r.w, 2) == obs.w)
                .expect("same observation value");
            assert_eq!(row.probability, obs.probability);
            assert_eq!(row.distance, obs.distance);
        }
        assert_eq!(report.worst_distance, record.worst_distance);
    }

    #[test]
    fn run_guards_reject_mismatches() {
        let net = butterfly_topology(2).unwrap();
        let code = butterfly_xor_code(&net).unwrap();
        let p4 = symbol_pad_protocol(4, 1, DEFAULT_CAP).unwrap();
        assert!(matches!(
            wiretap_netcode_run(&net, &code, &p4, &[0], &BigRational::zero(), DEFAULT_CAP),
            Err(Error::ShapeMismatch(_))
        ));
        let p = symbol_pad_protocol(2, 2, DEFAULT_CAP).unwrap();
        assert!(matches!(
            wiretap_netcode_run(&net, &code, &p, &[0], &BigRational::zero(), DEFAULT_CAP),
            Err(Error::ShapeMismatch(_))
        ));
        let pad = symbol_pad_protocol(2, 1, DEFAULT_CAP).unwrap();
        assert!(matches!(
            wiretap_netcode_run(&net, &code, &pad, &[9], &BigRational::zero(), DEFAULT_CAP),
            Err(Error::OutOfRange(_))
        ));
        assert!(matches!(
            wiretap_netcode_run(&net, &code, &pad, &[0], &BigRational::zero(), 2),
            Err(Error::EnumerationCapExceeded { .. })
        ));
    }

    #[test]
    fn network_json_round_trips() {
        let net = butterfly_topology(4).unwrap();
        let back = NetworkSpec::from_json(&net.to_json()).unwrap();
        assert_eq!(back.vertices(), net.vertices());
        assert_eq!(back.edges(), net.edges());
        assert_eq!(back.source(), net.source());
        assert_eq!(back.receivers(), net.receivers());
        assert_eq!(back.field().q, 4);
        assert!(NetworkSpec::from_json(&json!({"vertices": 3})).is_err());

        let code = butterfly_xor_code(&net).unwrap();
        let code_back = NetworkCode::from_json(&net, &code.to_json()).unwrap();
        assert_eq!(code_back.locals(), code.locals());
        assert_eq!(code_back.n(), 2);

        let p = symbol_pad_protocol(4, 1, DEFAULT_CAP).unwrap();
        let run =
            wiretap_netcode_run(&net, &code, &p, &[3], &BigRational::zero(), DEFAULT_CAP).unwrap();
        let v = run.to_json(json!({"topology": "butterfly"}));
        assert_eq!(v["tapped_edges"], json!([3]));
        assert_eq!(v["receivers"].as_array().unwrap().len(), 2);
        assert_eq!(v["all_receivers_decode"], json!(true));
    }
}
