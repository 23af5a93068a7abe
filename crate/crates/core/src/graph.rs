//! Multigraph algorithms for safety, liveness and mean-payoff objectives.
//!
//! Node subsets are boolean masks over the whole graph. Cycles are edge-id
//! sequences. All arithmetic is exact.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::lp::{lp_feasible, LinearSystem, Relation};
use crate::par::{self, Exec};

pub type NodeId = u32;
pub type EdgeId = u32;

#[derive(Clone, Debug)]
pub struct MultiGraph {
    n: usize,
    src: Vec<NodeId>,
    dst: Vec<NodeId>,
    out_off: Vec<u32>,
    out: Vec<EdgeId>,
    in_off: Vec<u32>,
    inc: Vec<EdgeId>,
}

fn csr(n: usize, keys: &[NodeId]) -> (Vec<u32>, Vec<EdgeId>) {
    let mut off = vec![0u32; n + 1];
    for &k in keys {
        off[k as usize + 1] += 1;
    }
    for i in 0..n {
        off[i + 1] += off[i];
    }
    let mut fill = off.clone();
    let mut ids = vec![0; keys.len()];
    for (e, &k) in keys.iter().enumerate() {
        ids[fill[k as usize] as usize] = e as EdgeId;
        fill[k as usize] += 1;
    }
    (off, ids)
}

impl MultiGraph {
    pub fn new(n: usize, edges: &[(NodeId, NodeId)]) -> Self {
        let src: Vec<NodeId> = edges.iter().map(|e| e.0).collect();
        let dst: Vec<NodeId> = edges.iter().map(|e| e.1).collect();
        assert!(src.iter().chain(&dst).all(|&v| (v as usize) < n));
        let (out_off, out) = csr(n, &src);
        let (in_off, inc) = csr(n, &dst);
        MultiGraph {
            n,
            src,
            dst,
            out_off,
            out,
            in_off,
            inc,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }

    pub fn source(&self, e: EdgeId) -> NodeId {
        self.src[e as usize]
    }

    pub fn target(&self, e: EdgeId) -> NodeId {
        self.dst[e as usize]
    }

    pub fn out_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.out[self.out_off[v as usize] as usize..self.out_off[v as usize + 1] as usize]
    }

    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.inc[self.in_off[v as usize] as usize..self.in_off[v as usize + 1] as usize]
    }

    /// Edges with both endpoints in `mask`.
    pub fn internal_edges(&self, mask: &[bool]) -> Vec<EdgeId> {
        (0..self.num_edges() as EdgeId)
            .filter(|&e| mask[self.source(e) as usize] && mask[self.target(e) as usize])
            .collect()
    }

    /// Textual dump: one `u -> v [w]` line per edge.
    pub fn dump(&self, label: impl Fn(EdgeId) -> String) -> String {
        let mut s = format!("nodes {}\nedges {}\n", self.n, self.num_edges());
        for e in 0..self.num_edges() as EdgeId {
            s.push_str(&format!(
                "{} -> {} {}\n",
                self.source(e),
                self.target(e),
                label(e)
            ));
        }
        s
    }
}

/// Nodes from which `Safe(X)` can be satisfied: drop `X`, then repeatedly
/// drop nodes with no remaining successor.
pub fn prune_safety(g: &MultiGraph, x: &[bool]) -> Vec<bool> {
    let mut alive: Vec<bool> = x.iter().map(|&b| !b).collect();
    let mut outdeg: Vec<u32> = (0..g.n as NodeId)
        .map(|v| {
            g.out_edges(v)
                .iter()
                .filter(|&&e| alive[g.target(e) as usize])
                .count() as u32
        })
        .collect();
    let mut pending: VecDeque<NodeId> = (0..g.n as NodeId)
        .filter(|&v| alive[v as usize] && outdeg[v as usize] == 0)
        .collect();
    for &v in &pending {
        alive[v as usize] = false;
    }
    while let Some(v) = pending.pop_front() {
        for &e in g.in_edges(v) {
            let u = g.source(e) as usize;
            if alive[u] {
                outdeg[u] -= 1;
                if outdeg[u] == 0 {
                    alive[u] = false;
                    pending.push_back(u as NodeId);
                }
            }
        }
    }
    alive
}

/// Nodes reachable from `s` inside `mask`.
pub fn reachable(g: &MultiGraph, s: NodeId, mask: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; g.n];
    if !mask[s as usize] {
        return seen;
    }
    seen[s as usize] = true;
    let mut stack = vec![s];
    while let Some(v) = stack.pop() {
        for &e in g.out_edges(v) {
            let t = g.target(e) as usize;
            if mask[t] && !seen[t] {
                seen[t] = true;
                stack.push(t as NodeId);
            }
        }
    }
    seen
}

/// Strongly connected components of the subgraph induced by `mask`, each
/// sorted, ordered by smallest node. Tarjan's algorithm, iterative.
pub fn scc_decomposition(g: &MultiGraph, mask: &[bool]) -> Vec<Vec<NodeId>> {
    scc_by_edges(g, mask, |_| true)
}

fn scc_by_edges(g: &MultiGraph, mask: &[bool], keep: impl Fn(EdgeId) -> bool) -> Vec<Vec<NodeId>> {
    const UNSEEN: u32 = u32::MAX;
    let n = g.n;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<NodeId> = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0u32;
    let mut call: Vec<(NodeId, usize)> = Vec::new();
    for root in 0..n as NodeId {
        if !mask[root as usize] || index[root as usize] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root as usize] = counter;
        low[root as usize] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root as usize] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            let edges = g.out_edges(v);
            if *pos < edges.len() {
                let e = edges[*pos];
                *pos += 1;
                if !keep(e) {
                    continue;
                }
                let w = g.target(e) as usize;
                if !mask[w] {
                    continue;
                }
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w as NodeId);
                    on_stack[w] = true;
                    call.push((w as NodeId, 0));
                } else if on_stack[w] {
                    low[v as usize] = low[v as usize].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u as usize] = low[u as usize].min(low[v as usize]);
                }
                if low[v as usize] == index[v as usize] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w as usize] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps.sort_by_key(|c| c[0]);
    comps
}

/// An SCC containing at least one cycle.
pub fn is_nontrivial(g: &MultiGraph, scc: &[NodeId]) -> bool {
    scc.len() > 1 || g.out_edges(scc[0]).iter().any(|&e| g.target(e) == scc[0])
}

/// Non-trivial SCCs of the `mask` subgraph that meet `y`.
pub fn live_sccs(g: &MultiGraph, mask: &[bool], y: &[bool]) -> Vec<Vec<NodeId>> {
    scc_decomposition(g, mask)
        .into_iter()
        .filter(|c| is_nontrivial(g, c) && c.iter().any(|&v| y[v as usize]))
        .collect()
}

/// The live SCCs, after removing `X`, that are reachable from `s`. These are
/// exactly the places where an infinite path from `s` satisfying
/// `Safe(X) ∧ Live(Y)` can settle.
pub fn candidate_sccs(g: &MultiGraph, s: NodeId, x: &[bool], y: &[bool]) -> Vec<Vec<NodeId>> {
    let alive = prune_safety(g, x);
    let reach = reachable(g, s, &alive);
    live_sccs(g, &reach, y)
}

/// Edge sequence forming a closed walk; simple when produced here.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cycle {
    pub edges: Vec<EdgeId>,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn weight(&self, w: impl Fn(EdgeId) -> i64) -> i64 {
        self.edges.iter().map(|&e| w(e)).sum()
    }

    pub fn nodes<'a>(&'a self, g: &'a MultiGraph) -> impl Iterator<Item = NodeId> + 'a {
        self.edges.iter().map(move |&e| g.source(e))
    }

    /// Closed, and no node repeats.
    pub fn is_simple_cycle(&self, g: &MultiGraph) -> bool {
        if self.edges.is_empty() {
            return false;
        }
        let k = self.edges.len();
        for i in 0..k {
            if g.target(self.edges[i]) != g.source(self.edges[(i + 1) % k]) {
                return false;
            }
        }
        let mut nodes: Vec<NodeId> = self.nodes(g).collect();
        nodes.sort_unstable();
        nodes.windows(2).all(|w| w[0] != w[1])
    }

    /// Same cycle started at its smallest edge id.
    pub fn canonical(&self) -> Cycle {
        let k = self
            .edges
            .iter()
            .enumerate()
            .min_by_key(|(_, &e)| e)
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut edges = self.edges[k..].to_vec();
        edges.extend_from_slice(&self.edges[..k]);
        Cycle { edges }
    }
}

/// Shortest path by edge count from `from` to `to` inside `mask`, as edges.
/// Empty when `from == to`.
pub fn shortest_path(
    g: &MultiGraph,
    from: NodeId,
    to: NodeId,
    mask: &[bool],
    keep: impl Fn(EdgeId) -> bool,
) -> Option<Vec<EdgeId>> {
    if from == to {
        return Some(vec![]);
    }
    let mut pred: Vec<Option<EdgeId>> = vec![None; g.n];
    let mut seen = vec![false; g.n];
    seen[from as usize] = true;
    let mut q = VecDeque::from([from]);
    while let Some(v) = q.pop_front() {
        for &e in g.out_edges(v) {
            let t = g.target(e);
            if !keep(e) || !mask[t as usize] || seen[t as usize] {
                continue;
            }
            seen[t as usize] = true;
            pred[t as usize] = Some(e);
            if t == to {
                let mut path = vec![];
                let mut cur = to;
                while cur != from {
                    let e = pred[cur as usize].unwrap();
                    path.push(e);
                    cur = g.source(e);
                }
                path.reverse();
                return Some(path);
            }
            q.push_back(t);
        }
    }
    None
}

/// A simple cycle through edge `e` using only `keep` edges inside `mask`.
pub fn cycle_through(
    g: &MultiGraph,
    e: EdgeId,
    mask: &[bool],
    keep: impl Fn(EdgeId) -> bool,
) -> Option<Cycle> {
    let back = shortest_path(g, g.target(e), g.source(e), mask, keep)?;
    let mut edges = vec![e];
    edges.extend(back);
    Some(Cycle { edges })
}

fn mask_of(n: usize, nodes: &[NodeId]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &v in nodes {
        m[v as usize] = true;
    }
    m
}

/// Result of a minimum mean cycle computation on one component.
#[derive(Clone, Debug)]
pub struct MeanCycle {
    pub mean: BigRational,
    pub cycle: Cycle,
    /// Edges on some cycle of minimum mean (reduced cost zero under the
    /// optimal potentials), restricted to the component.
    pub tight: Vec<EdgeId>,
}

const INF: i128 = i128::MAX / 4;

/// Karp's minimum cycle mean on the subgraph induced by `nodes`, with
/// parallel edges handled directly. Uses `O(n)` memory per level by
/// recomputing the level table in each pass.
pub fn min_mean_cycle(g: &MultiGraph, nodes: &[NodeId], w: &[i64], exec: Exec) -> Result<MeanCycle> {
    let mask = mask_of(g.n, nodes);
    let n = nodes.len();
    let mut local = vec![u32::MAX; g.n];
    for (i, &v) in nodes.iter().enumerate() {
        local[v as usize] = i as u32;
    }
    // incoming internal edges per local node
    let ins: Vec<Vec<(u32, i128)>> = nodes
        .iter()
        .map(|&v| {
            g.in_edges(v)
                .iter()
                .filter(|&&e| mask[g.source(e) as usize])
                .map(|&e| (local[g.source(e) as usize], w[e as usize] as i128))
                .collect()
        })
        .collect();
    let step = |d: &[i128], next: &mut [i128]| {
        par::fill(exec, next, |v| {
            ins[v]
                .iter()
                .filter(|(u, _)| d[*u as usize] < INF)
                .map(|(u, wt)| d[*u as usize] + wt)
                .min()
                .unwrap_or(INF)
        });
    };
    // pass 1: D_n
    let mut d = vec![0i128; n];
    let mut next = vec![0i128; n];
    for _ in 0..n {
        step(&d, &mut next);
        std::mem::swap(&mut d, &mut next);
    }
    let dn = d.clone();
    // pass 2: per node, max over k < n of (D_n - D_k) / (n - k), as fractions
    let mut best: Vec<Option<(i128, i128)>> = vec![None; n];
    d.iter_mut().for_each(|x| *x = 0);
    for k in 0..n {
        for v in 0..n {
            if dn[v] < INF && d[v] < INF {
                let cand = (dn[v] - d[v], (n - k) as i128);
                best[v] = Some(match best[v] {
                    None => cand,
                    Some(b) if cand.0 * b.1 > b.0 * cand.1 => cand,
                    Some(b) => b,
                });
            }
        }
        step(&d, &mut next);
        std::mem::swap(&mut d, &mut next);
    }
    let (a, b) = best
        .iter()
        .flatten()
        .copied()
        .reduce(|x, y| if y.0 * x.1 < x.0 * y.1 { y } else { x })
        .ok_or(Error::NoCycle)?;
    let mean = BigRational::new(BigInt::from(a), BigInt::from(b));
    let (a, b) = (
        mean.numer().to_i128().ok_or(Error::Overflow("cycle mean"))?,
        mean.denom().to_i128().ok_or(Error::Overflow("cycle mean"))?,
    );
    // pass 3: potentials pi(v) = min_k (b D_k(v) - k a)
    let mut pi = vec![INF; n];
    d.iter_mut().for_each(|x| *x = 0);
    for k in 0..n {
        for v in 0..n {
            if d[v] < INF {
                pi[v] = pi[v].min(b * d[v] - k as i128 * a);
            }
        }
        step(&d, &mut next);
        std::mem::swap(&mut d, &mut next);
    }
    let tight_edge = |e: EdgeId| {
        let (u, v) = (local[g.source(e) as usize], local[g.target(e) as usize]);
        pi[u as usize] + b * w[e as usize] as i128 - a == pi[v as usize]
    };
    let candidate: Vec<EdgeId> = nodes
        .iter()
        .flat_map(|&v| g.out_edges(v).iter().copied())
        .filter(|&e| mask[g.target(e) as usize] && tight_edge(e))
        .collect();
    let mut is_cand = vec![false; g.num_edges()];
    for &e in &candidate {
        is_cand[e as usize] = true;
    }
    // Tight edges lying on tight cycles: those inside one SCC of the tight
    // subgraph.
    let comps = scc_by_edges(g, &mask, |e| is_cand[e as usize]);
    let mut comp_of = vec![u32::MAX; g.n];
    for (i, c) in comps.iter().enumerate() {
        for &v in c {
            comp_of[v as usize] = i as u32;
        }
    }
    let tight: Vec<EdgeId> = candidate
        .into_iter()
        .filter(|&e| comp_of[g.source(e) as usize] == comp_of[g.target(e) as usize])
        .collect();
    let first = *tight.first().expect("a minimum mean cycle is tight");
    let cycle = cycle_through(g, first, &mask, |e| is_cand[e as usize])
        .expect("tight edge lies on a tight cycle");
    Ok(MeanCycle { mean, cycle, tight })
}

/// `q * w1 - p * w2` per edge, for threshold `p / q`.
pub fn ratio_to_mp(w1: &[i64], w2: &[i64], nu: &BigRational) -> Result<Vec<i64>> {
    if !nu.denom().is_positive() {
        return Err(Error::Overflow("threshold"));
    }
    let p = nu.numer().to_i128().ok_or(Error::Overflow("threshold"))?;
    let q = nu.denom().to_i128().ok_or(Error::Overflow("threshold"))?;
    w1.iter()
        .zip(w2)
        .map(|(&a, &c)| {
            let v = q
                .checked_mul(a as i128)
                .zip(p.checked_mul(c as i128))
                .and_then(|(x, y)| x.checked_sub(y))
                .ok_or(Error::Overflow("ratio weights"))?;
            i64::try_from(v).map_err(|_| Error::Overflow("ratio weights"))
        })
        .collect()
}

/// `Safe(X) ∧ Live(Y) ∧ MP(w, 0)` from `s`, one dimension: a cycle of
/// non-positive mean in some candidate SCC, if any.
pub fn solve_conjunction(
    g: &MultiGraph,
    s: NodeId,
    x: &[bool],
    y: &[bool],
    w: &[i64],
    exec: Exec,
) -> Result<Option<(Vec<NodeId>, MeanCycle)>> {
    let sccs = candidate_sccs(g, s, x, y);
    let results = par::map_slice(exec, &sccs, |c| min_mean_cycle(g, c, w, Exec::Sequential));
    for (c, r) in sccs.into_iter().zip(results) {
        let r = r?;
        if !r.mean.is_positive() {
            return Ok(Some((c, r)));
        }
    }
    Ok(None)
}

/// A per-edge flow on the internal edges of an SCC.
pub type Flow = Vec<(EdgeId, BigRational)>;

/// Feasibility of the flow system on the subgraph induced by `nodes`:
/// non-negative flow, conserved at each node, with `Σ x_e w(e) ≤ threshold`
/// component-wise, and `Σ x_e norm(e) ≥ 1` (`norm` defaults to all ones).
/// Returns the support-restricted flow on success.
pub fn mp_multidim_feasible(
    g: &MultiGraph,
    nodes: &[NodeId],
    w: &dyn Fn(EdgeId) -> Vec<BigRational>,
    threshold: &[BigRational],
    norm: Option<&dyn Fn(EdgeId) -> BigRational>,
) -> Result<Option<Flow>> {
    let mask = mask_of(g.n, nodes);
    let edges = g.internal_edges(&mask);
    if edges.is_empty() {
        return Ok(None);
    }
    let m = edges.len();
    let mut local = vec![usize::MAX; g.n];
    for (i, &v) in nodes.iter().enumerate() {
        local[v as usize] = i;
    }
    let mut sys = LinearSystem::new(m, true);
    let zero = BigRational::zero;
    let one = BigRational::one;
    // conservation; the last node's row is implied
    let mut rows = vec![vec![zero(); m]; nodes.len()];
    for (j, &e) in edges.iter().enumerate() {
        rows[local[g.source(e) as usize]][j] -= one();
        rows[local[g.target(e) as usize]][j] += one();
    }
    rows.pop();
    for r in rows {
        sys.push(r, Relation::Eq, zero());
    }
    let ws: Vec<Vec<BigRational>> = edges.iter().map(|&e| w(e)).collect();
    for (k, t) in threshold.iter().enumerate() {
        let coeffs: Vec<BigRational> = ws
            .iter()
            .map(|v| {
                v.get(k).cloned().ok_or_else(|| {
                    Error::MalformedSystem(format!("weight vector shorter than threshold ({k})"))
                })
            })
            .collect::<Result<_>>()?;
        sys.push(coeffs, Relation::Le, t.clone());
    }
    let coeffs = match norm {
        Some(f) => edges.iter().map(|&e| f(e)).collect(),
        None => vec![one(); m],
    };
    sys.push(coeffs, Relation::Ge, one());
    Ok(lp_feasible(&sys)?.map(|x| {
        edges
            .into_iter()
            .zip(x)
            .filter(|(_, v)| v.is_positive())
            .collect()
    }))
}

/// Cycles with positive integer multiplicities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiCycle {
    pub cycles: Vec<(Cycle, u64)>,
}

impl MultiCycle {
    /// Multiplicity-weighted average of `w` per edge traversal.
    pub fn average(&self, w: impl Fn(EdgeId) -> BigRational) -> BigRational {
        let mut total = BigRational::zero();
        let mut len = 0u64;
        for (c, m) in &self.cycles {
            let cw: BigRational = c.edges.iter().map(|&e| w(e)).sum();
            total += cw * BigRational::from_integer(BigInt::from(*m));
            len += c.len() as u64 * m;
        }
        total / BigRational::from_integer(BigInt::from(len))
    }
}

/// Decomposes a circulation into simple cycles. The flow is scaled to
/// integers by the lcm of its denominators; then the edge of least flow is
/// repeatedly closed into a cycle within the support and that amount is
/// subtracted along it.
pub fn extract_multicycle(g: &MultiGraph, flow: &Flow) -> Result<MultiCycle> {
    if flow.iter().any(|(_, v)| v.is_negative()) {
        return Err(Error::MalformedFlow("negative flow".into()));
    }
    let z = flow
        .iter()
        .fold(BigInt::one(), |acc, (_, v)| acc.lcm(v.denom()));
    let mut x = vec![BigInt::zero(); g.num_edges()];
    for (e, v) in flow {
        x[*e as usize] += (v * BigRational::from_integer(z.clone())).to_integer();
    }
    let mut balance = vec![BigInt::zero(); g.n];
    for (e, v) in x.iter().enumerate() {
        balance[g.source(e as EdgeId) as usize] -= v;
        balance[g.target(e as EdgeId) as usize] += v;
    }
    if balance.iter().any(|b| !b.is_zero()) {
        return Err(Error::MalformedFlow("flow is not conserved".into()));
    }
    if x.iter().all(Zero::is_zero) {
        return Err(Error::MalformedFlow("flow is zero".into()));
    }
    let all = vec![true; g.n];
    let mut cycles = Vec::new();
    loop {
        let Some(e) = (0..g.num_edges())
            .filter(|&e| x[e].is_positive())
            .min_by(|&a, &b| x[a].cmp(&x[b]).then(a.cmp(&b)))
        else {
            break;
        };
        let c = cycle_through(g, e as EdgeId, &all, |f| x[f as usize].is_positive())
            .ok_or_else(|| Error::MalformedFlow("support edge on no cycle".into()))?;
        let m = x[e].clone();
        for &f in &c.edges {
            x[f as usize] -= &m;
        }
        let m = m.to_u64().ok_or(Error::Overflow("multiplicity"))?;
        cycles.push((c, m));
    }
    Ok(MultiCycle { cycles })
}

/// Infinite path realizing a multicycle: in round `l` each cycle is
/// repeated `l * m_i` times, joined by shortest connectors, and the optional
/// live node is visited at the end of every round.
pub struct WitnessPath<'a> {
    g: &'a MultiGraph,
    mask: Vec<bool>,
    mc: &'a MultiCycle,
    live: Option<NodeId>,
    round: u64,
    buf: VecDeque<EdgeId>,
    at: NodeId,
}

impl<'a> WitnessPath<'a> {
    /// `start` is the current node; the generator first walks to the first
    /// cycle. All nodes involved must lie in `nodes` (one SCC).
    pub fn new(
        g: &'a MultiGraph,
        nodes: &[NodeId],
        mc: &'a MultiCycle,
        live: Option<NodeId>,
        start: NodeId,
    ) -> Self {
        WitnessPath {
            g,
            mask: mask_of(g.n, nodes),
            mc,
            live,
            round: 0,
            buf: VecDeque::new(),
            at: start,
        }
    }

    fn walk_to(&mut self, v: NodeId) {
        let p = shortest_path(self.g, self.at, v, &self.mask, |_| true)
            .expect("witness nodes share one SCC");
        self.buf.extend(p);
        self.at = v;
    }

    fn refill(&mut self) {
        self.round += 1;
        for (c, m) in &self.mc.cycles {
            self.walk_to(self.g.source(c.edges[0]));
            for _ in 0..self.round * m {
                self.buf.extend(c.edges.iter().copied());
            }
        }
        if let Some(y) = self.live {
            self.walk_to(y);
        }
    }
}

impl Iterator for WitnessPath<'_> {
    type Item = EdgeId;

    fn next(&mut self) -> Option<EdgeId> {
        while self.buf.is_empty() {
            self.refill();
        }
        self.buf.pop_front()
    }
}

/// All simple cycles of the subgraph induced by `mask`, each started at its
/// smallest node; fails with `TooLarge` past `limit` cycles.
pub fn simple_cycles(g: &MultiGraph, mask: &[bool], limit: usize) -> Result<Vec<Cycle>> {
    let mut out = Vec::new();
    for s in 0..g.n as NodeId {
        if !mask[s as usize] {
            continue;
        }
        let mut on_path = vec![false; g.n];
        let mut path: Vec<EdgeId> = Vec::new();
        on_path[s as usize] = true;
        let mut stack: Vec<(NodeId, usize)> = vec![(s, 0)];
        while let Some(&mut (v, ref mut pos)) = stack.last_mut() {
            let edges = g.out_edges(v);
            if *pos == edges.len() {
                stack.pop();
                if let Some(e) = path.pop() {
                    on_path[g.target(e) as usize] = false;
                }
                continue;
            }
            let e = edges[*pos];
            *pos += 1;
            let t = g.target(e);
            if !mask[t as usize] || t < s {
                continue;
            }
            if t == s {
                let mut c = path.clone();
                c.push(e);
                out.push(Cycle { edges: c });
                if out.len() > limit {
                    return Err(Error::TooLarge(g.n));
                }
            } else if !on_path[t as usize] {
                on_path[t as usize] = true;
                path.push(e);
                stack.push((t, 0));
            }
        }
    }
    Ok(out)
}
