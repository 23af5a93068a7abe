//! Competitive ratio of an on-line scheduler against the clairvoyant, as a
//! ratio objective on the product of the scheduler, the clairvoyant and the
//! constraint automata.
//!
//! Edges carry the on-line reward `w_A` and the clairvoyant reward `w_C`.
//! The ratio is the minimum of `w_A(C) / w_C(C)` over cycles `C` in live,
//! reject-free components reachable from the start, capped at 1. A cycle
//! with `w_C(C) = 0` counts as ratio 1 (when also `w_A(C) = 0`) or is
//! ignored (when `w_A(C) > 0`).

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::clairvoyant::{build_clairvoyant_lts, ClairState};
use crate::constraints::{
    compose_limitavg, compose_liveness, compose_safety, LimitAvgLts, LivenessLts, SafetyLts,
};
use crate::error::{Error, Result};
use crate::graph::{
    candidate_sccs, cycle_through, extract_multicycle, min_mean_cycle, mp_multidim_feasible,
    prune_safety, ratio_to_mp, shortest_path, simple_cycles, Cycle, EdgeId, MultiCycle,
    MultiGraph, NodeId, WitnessPath,
};
use crate::lts::{Lts, StateId, DEFAULT_STATE_CAP};
use crate::model::{JobRelease, ScheduleLabel, Taskset};
use crate::par::{self, Exec};
use crate::schedulers::{reduced_online_lts, simulate, BuiltinPolicy, Dropping, OnlineOptions};

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// What a product edge stands for.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeLabel {
    pub release: JobRelease,
    pub online: Option<ScheduleLabel>,
}

#[derive(Clone, Debug)]
pub struct ProductGraph {
    pub graph: MultiGraph,
    pub initial: NodeId,
    pub w_a: Vec<i64>,
    pub w_c: Vec<i64>,
    /// Limit-average weights per edge, one entry per constrained dimension.
    pub w_lim: Vec<Vec<i64>>,
    pub lim_threshold: Vec<BigRational>,
    pub labels: Vec<EdgeLabel>,
    pub x: Vec<bool>,
    pub y: Vec<bool>,
    /// Clairvoyant state of each node, when built from a taskset.
    pub clair: Vec<Option<ClairState>>,
}

impl ProductGraph {
    /// A bare weighted graph, e.g. for tests: no limit-average dimensions.
    pub fn from_parts(
        graph: MultiGraph,
        initial: NodeId,
        w_a: Vec<i64>,
        w_c: Vec<i64>,
        x: Vec<bool>,
        y: Vec<bool>,
    ) -> Result<Self> {
        let m = graph.num_edges();
        let n = graph.num_nodes();
        if w_a.len() != m || w_c.len() != m || x.len() != n || y.len() != n || initial as usize >= n
        {
            return Err(Error::MalformedLts("product parts disagree in size".into()));
        }
        if w_a.iter().chain(&w_c).any(|&v| v < 0) {
            return Err(Error::MalformedLts("rewards must be non-negative".into()));
        }
        Ok(ProductGraph {
            labels: vec![
                EdgeLabel {
                    release: JobRelease::EMPTY,
                    online: None
                };
                m
            ],
            w_lim: vec![vec![]; m],
            lim_threshold: vec![],
            clair: vec![None; n],
            graph,
            initial,
            w_a,
            w_c,
            x,
            y,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_edges(&self) -> usize {
        self.graph.num_edges()
    }

    pub fn lim_dim(&self) -> usize {
        self.lim_threshold.len()
    }

    /// The same product without limit-average dimensions.
    pub fn without_limitavg(&self) -> ProductGraph {
        let mut p = self.clone();
        p.w_lim = vec![vec![]; p.num_edges()];
        p.lim_threshold.clear();
        p
    }

    pub fn candidate_sccs(&self) -> Vec<Vec<NodeId>> {
        candidate_sccs(&self.graph, self.initial, &self.x, &self.y)
    }

    pub fn dump(&self) -> String {
        let mut s = format!("initial {}\n", self.initial);
        for (v, (&x, &y)) in self.x.iter().zip(&self.y).enumerate() {
            if x || y {
                s.push_str(&format!(
                    "node {v}{}{}\n",
                    if x { " reject" } else { "" },
                    if y { " accept" } else { "" }
                ));
            }
        }
        s + &self.graph.dump(|e| {
            let e = e as usize;
            let l = &self.labels[e];
            let mut w = vec![self.w_a[e], self.w_c[e]];
            w.extend(&self.w_lim[e]);
            format!(
                "{} {} {:?}",
                l.release,
                l.online.map(|o| o.to_string()).unwrap_or_else(|| "-".into()),
                w
            )
        })
    }
}

/// Adversary restrictions, each list composed by conjunction.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    pub safety: Vec<SafetyLts>,
    pub liveness: Vec<LivenessLts>,
    pub limitavg: Vec<LimitAvgLts>,
}

impl ConstraintSet {
    pub fn is_empty(&self) -> bool {
        self.safety.is_empty() && self.liveness.is_empty() && self.limitavg.is_empty()
    }
}

/// Product of the on-line LTS (deterministic, reward in the first entry),
/// the clairvoyant LTS and the constraints. Reject nodes are not expanded.
/// Parallel edges with equal endpoints and weights are kept once.
pub fn build_product(
    online: &Lts<StateId>,
    clair: &Lts<ClairState>,
    constraints: &ConstraintSet,
    state_cap: usize,
    exec: Exec,
) -> Result<ProductGraph> {
    let n_tasks = online.n_tasks();
    if clair.n_tasks() != n_tasks {
        return Err(Error::MalformedLts("input alphabets differ".into()));
    }
    let safety = compose_safety(&constraints.safety, n_tasks)?;
    let liveness = compose_liveness(&constraints.liveness, n_tasks)?;
    let limitavg = compose_limitavg(&constraints.limitavg)?;
    for l in [&safety.lts, &liveness.lts]
        .into_iter()
        .chain(limitavg.as_ref().map(|l| &l.lts))
    {
        if l.n_tasks() != n_tasks {
            return Err(Error::MalformedLts("input alphabets differ".into()));
        }
    }
    let dim = limitavg.as_ref().map_or(0, |l| l.dim());

    type Node = (StateId, StateId, StateId, StateId, StateId);
    struct Succ {
        target: Node,
        w_a: i64,
        w_c: i64,
        lim: Vec<i64>,
        label: EdgeLabel,
    }
    let init: Node = (
        online.initial(),
        clair.initial(),
        safety.lts.initial(),
        liveness.lts.initial(),
        limitavg.as_ref().map_or(0, |l| l.lts.initial()),
    );
    let expand = |&(o, c, s, l, m): &Node| -> Vec<Succ> {
        let mut out = Vec::new();
        let mut seen: HashSet<(Node, i64, i64, Vec<i64>)> = HashSet::new();
        for x in JobRelease::all(n_tasks) {
            let ot = &online.successors(o, x)[0];
            let st = safety.lts.successors(s, x)[0].target;
            let lt = liveness.lts.successors(l, x)[0].target;
            let (mt, lim) = match &limitavg {
                Some(la) => {
                    let t = &la.lts.successors(m, x)[0];
                    (t.target, t.reward.clone())
                }
                None => (0, vec![]),
            };
            for ct in clair.successors(c, x) {
                let target = (ot.target, ct.target, st, lt, mt);
                let key = (target, ot.reward[0], ct.reward[0], lim.clone());
                if seen.insert(key) {
                    out.push(Succ {
                        target,
                        w_a: ot.reward[0],
                        w_c: ct.reward[0],
                        lim: lim.clone(),
                        label: EdgeLabel {
                            release: x,
                            online: ot.output.first().copied(),
                        },
                    });
                }
            }
        }
        out
    };

    let mut index: HashMap<Node, NodeId> = HashMap::from([(init, 0)]);
    let mut nodes = vec![init];
    let mut edges = Vec::new();
    let (mut w_a, mut w_c, mut w_lim, mut labels) = (vec![], vec![], vec![], vec![]);
    let mut frontier = vec![0 as NodeId];
    while !frontier.is_empty() {
        let todo: Vec<Node> = frontier
            .iter()
            .map(|&v| nodes[v as usize])
            .filter(|n| !safety.reject[n.2 as usize])
            .collect();
        let srcs: Vec<NodeId> = frontier
            .iter()
            .copied()
            .filter(|&v| !safety.reject[nodes[v as usize].2 as usize])
            .collect();
        let expanded = par::map_slice(exec, &todo, expand);
        let mut next = Vec::new();
        for (src, succ) in srcs.into_iter().zip(expanded) {
            for s in succ {
                let id = match index.get(&s.target) {
                    Some(&id) => id,
                    None => {
                        if nodes.len() >= state_cap {
                            return Err(Error::StateExplosion { cap: state_cap });
                        }
                        let id = nodes.len() as NodeId;
                        index.insert(s.target, id);
                        nodes.push(s.target);
                        next.push(id);
                        id
                    }
                };
                edges.push((src, id));
                w_a.push(s.w_a);
                w_c.push(s.w_c);
                w_lim.push(s.lim);
                labels.push(s.label);
            }
        }
        frontier = next;
    }
    let x = nodes.iter().map(|n| safety.reject[n.2 as usize]).collect();
    let y = nodes.iter().map(|n| liveness.accept[n.3 as usize]).collect();
    let clair_states = nodes.iter().map(|n| Some(*clair.state(n.1))).collect();
    Ok(ProductGraph {
        graph: MultiGraph::new(nodes.len(), &edges),
        initial: 0,
        w_a,
        w_c,
        w_lim,
        lim_threshold: limitavg.map(|l| l.threshold).unwrap_or_default(),
        labels,
        x,
        y,
        clair: clair_states,
    })
    .inspect(|p: &ProductGraph| debug_assert_eq!(p.lim_dim(), dim))
}

/// A cycle of the product with its reward sums.
#[derive(Clone, Debug)]
pub struct CycleWitness {
    pub scc: usize,
    pub cycle: Cycle,
    pub sum_a: i64,
    pub sum_c: i64,
}

impl CycleWitness {
    fn new(p: &ProductGraph, scc: usize, cycle: Cycle) -> Self {
        let sum_a = cycle.weight(|e| p.w_a[e as usize]);
        let sum_c = cycle.weight(|e| p.w_c[e as usize]);
        CycleWitness {
            scc,
            cycle,
            sum_a,
            sum_c,
        }
    }

    /// `w_A / w_C`, 1 for `0/0`, `None` when only `w_C` vanishes.
    pub fn ratio(&self) -> Option<BigRational> {
        cycle_ratio(self.sum_a, self.sum_c)
    }
}

pub fn cycle_ratio(a: i64, c: i64) -> Option<BigRational> {
    match (a, c) {
        (0, 0) => Some(BigRational::one()),
        (_, 0) => None,
        _ => Some(BigRational::new(BigInt::from(a), BigInt::from(c))),
    }
}

#[derive(Clone, Debug)]
pub enum Decision {
    /// `CR ≤ ν`, with a cycle of ratio at most `ν`.
    Yes(CycleWitness),
    /// Not `CR ≤ ν`; the witness is the best cycle seen, if any.
    No(Option<CycleWitness>),
}

fn better(a: &Option<BigRational>, b: &Option<BigRational>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x < y,
        (Some(_), None) => true,
        _ => false,
    }
}

fn min_by_ratio(ws: impl IntoIterator<Item = CycleWitness>) -> Option<CycleWitness> {
    let mut best: Option<CycleWitness> = None;
    for w in ws {
        if best.as_ref().map_or(true, |b| better(&w.ratio(), &b.ratio())) {
            best = Some(w);
        }
    }
    best
}

/// Decides `Safe(X) ∧ Live(Y) ∧ Ratio(w_A, w_C, ν)` from the initial node
/// (one dimension).
pub fn decide_cr_at_most(
    p: &ProductGraph,
    sccs: &[Vec<NodeId>],
    nu: &BigRational,
    exec: Exec,
) -> Result<Decision> {
    if nu.is_negative() || sccs.is_empty() {
        return Ok(Decision::No(None));
    }
    let w = ratio_to_mp(&p.w_a, &p.w_c, nu)?;
    let inner = if sccs.len() == 1 { exec } else { Exec::Sequential };
    let per_scc = par::map_range(exec, sccs.len(), |i| -> Result<(bool, CycleWitness)> {
        let nodes = &sccs[i];
        let mc = min_mean_cycle(&p.graph, nodes, &w, inner)?;
        if mc.mean.is_negative() {
            // q w_A ≥ 0, so w_C > 0 on this cycle
            return Ok((true, CycleWitness::new(p, i, mc.cycle)));
        }
        if mc.mean.is_zero() {
            let mut mask = vec![false; p.num_nodes()];
            for &v in nodes {
                mask[v as usize] = true;
            }
            let mut tight = vec![false; p.num_edges()];
            for &e in &mc.tight {
                tight[e as usize] = true;
            }
            if let Some(&e) = mc.tight.iter().find(|&&e| p.w_c[e as usize] > 0) {
                let c = cycle_through(&p.graph, e, &mask, |f| tight[f as usize])
                    .expect("tight edges lie on tight cycles");
                return Ok((true, CycleWitness::new(p, i, c)));
            }
            // every zero-mean cycle is 0/0, i.e. ratio 1
            let wit = CycleWitness::new(p, i, mc.cycle);
            return Ok((*nu >= BigRational::one(), wit));
        }
        Ok((false, CycleWitness::new(p, i, mc.cycle)))
    });
    let mut yes = Vec::new();
    let mut no = Vec::new();
    for r in per_scc {
        let (ok, w) = r?;
        if ok {
            yes.push(w);
        } else {
            no.push(w);
        }
    }
    if !yes.is_empty() {
        return Ok(Decision::Yes(min_by_ratio(yes).unwrap()));
    }
    Ok(Decision::No(min_by_ratio(no)))
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub cr: BigRational,
    pub witness: Option<CycleWitness>,
    pub iterations: usize,
}

/// Exact competitive ratio by adaptive binary search over realized cycle
/// ratios: the interval `[l, r]` shrinks to witnessed ratios, so the search
/// ends on the exact minimum.
pub fn adaptive_binary_search(p: &ProductGraph, exec: Exec) -> Result<SearchResult> {
    let sccs = p.candidate_sccs();
    let two = rat(2);
    let mut l = BigRational::zero();
    let mut r = BigRational::one();
    let mut nu = BigRational::new(1.into(), 2.into());
    let mut best: Option<CycleWitness> = None;
    let mut iterations = 0;
    loop {
        iterations += 1;
        match decide_cr_at_most(p, &sccs, &nu, exec)? {
            Decision::Yes(w) => {
                let rho = w.ratio().expect("satisfying cycles have a ratio");
                if rho == nu {
                    return Ok(SearchResult {
                        cr: nu,
                        witness: Some(w),
                        iterations,
                    });
                }
                r = rho;
                best = Some(w);
                nu = (&l + &r) / &two;
            }
            Decision::No(w) => {
                if nu == r {
                    return Ok(SearchResult {
                        cr: r,
                        witness: best.or(w),
                        iterations,
                    });
                }
                l = nu.clone();
                if let Some(w) = w {
                    if let Some(rho) = w.ratio() {
                        if rho < r {
                            r = rho;
                            best = Some(w);
                        }
                    }
                }
                nu = r.clone();
            }
        }
    }
}

/// Witness of the limit-average search: a multicycle inside one SCC.
#[derive(Clone, Debug)]
pub struct MultiWitness {
    pub scc: usize,
    pub multicycle: MultiCycle,
}

#[derive(Clone, Debug)]
pub struct IntervalResult {
    pub lo: BigRational,
    pub hi: BigRational,
    pub witness: Option<MultiWitness>,
    pub iterations: usize,
}

fn decide_multi(
    p: &ProductGraph,
    sccs: &[Vec<NodeId>],
    nu: &BigRational,
    exec: Exec,
) -> Result<Option<MultiWitness>> {
    let w = |e: EdgeId| -> Vec<BigRational> {
        let e = e as usize;
        let mut v = Vec::with_capacity(1 + p.lim_dim());
        v.push(rat(p.w_a[e]) - nu * rat(p.w_c[e]));
        for (k, t) in p.lim_threshold.iter().enumerate() {
            v.push(rat(p.w_lim[e][k]) - t);
        }
        v
    };
    let zeros = vec![BigRational::zero(); 1 + p.lim_dim()];
    let norm = |e: EdgeId| rat(p.w_c[e as usize]);
    let results = par::map_range(exec, sccs.len(), |i| {
        mp_multidim_feasible(&p.graph, &sccs[i], &w, &zeros, Some(&norm))
    });
    for (i, r) in results.into_iter().enumerate() {
        if let Some(flow) = r? {
            let multicycle = extract_multicycle(&p.graph, &flow)?;
            return Ok(Some(MultiWitness { scc: i, multicycle }));
        }
    }
    Ok(None)
}

/// Competitive ratio under limit-average constraints, to within `epsilon`,
/// by bisection on `ν` with one linear program per candidate SCC.
pub fn cr_with_limitavg(p: &ProductGraph, epsilon: &BigRational, exec: Exec) -> Result<IntervalResult> {
    if !epsilon.is_positive() {
        return Err(Error::Parse("epsilon must be positive".into()));
    }
    let sccs = p.candidate_sccs();
    let mut iterations = 1;
    let Some(mut witness) = decide_multi(p, &sccs, &BigRational::one(), exec)? else {
        return Ok(IntervalResult {
            lo: BigRational::one(),
            hi: BigRational::one(),
            witness: None,
            iterations,
        });
    };
    let mut lo = BigRational::zero();
    let mut hi = BigRational::one();
    let two = rat(2);
    while &hi - &lo > *epsilon {
        iterations += 1;
        let mid = (&lo + &hi) / &two;
        match decide_multi(p, &sccs, &mid, exec)? {
            Some(w) => {
                hi = mid;
                witness = w;
            }
            None => lo = mid,
        }
    }
    Ok(IntervalResult {
        lo,
        hi,
        witness: Some(witness),
        iterations,
    })
}

/// Minimum cycle ratio by enumerating every simple cycle of the candidate
/// SCCs. Only for small products.
pub fn brute_force_cycle_oracle(p: &ProductGraph) -> Result<BigRational> {
    if p.num_nodes() > 12 {
        return Err(Error::TooLarge(p.num_nodes()));
    }
    let mut best = BigRational::one();
    for scc in p.candidate_sccs() {
        let mut mask = vec![false; p.num_nodes()];
        for &v in &scc {
            mask[v as usize] = true;
        }
        for c in simple_cycles(&p.graph, &mask, 1_000_000)? {
            let a = c.weight(|e| p.w_a[e as usize]);
            let w = c.weight(|e| p.w_c[e as usize]);
            if let Some(r) = cycle_ratio(a, w) {
                if r < best {
                    best = r;
                }
            }
        }
    }
    Ok(best)
}

/// The on-line scheduler under analysis.
#[derive(Clone, Debug)]
pub enum SchedulerSpec {
    Builtin(BuiltinPolicy),
    /// Deterministic, input-enabled LTS with the earned value as its first
    /// reward entry.
    Custom(Lts<StateId>),
}

impl SchedulerSpec {
    pub fn name(&self) -> String {
        match self {
            SchedulerSpec::Builtin(b) => b.to_string(),
            SchedulerSpec::Custom(_) => "custom".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AnalysisOptions {
    pub state_cap: usize,
    pub epsilon: BigRational,
    pub exec: Exec,
    pub dropping: Dropping,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            state_cap: DEFAULT_STATE_CAP,
            epsilon: BigRational::new(1.into(), 1000.into()),
            exec: Exec::default(),
            dropping: Dropping::Eager,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum CrValue {
    Exact(#[serde(serialize_with = "ser_rat")] BigRational),
    Interval {
        #[serde(serialize_with = "ser_rat")]
        lo: BigRational,
        #[serde(serialize_with = "ser_rat")]
        hi: BigRational,
    },
}

fn ser_rat<S: serde::Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

impl CrValue {
    /// Upper end of the value.
    pub fn hi(&self) -> &BigRational {
        match self {
            CrValue::Exact(r) => r,
            CrValue::Interval { hi, .. } => hi,
        }
    }

    pub fn lo(&self) -> &BigRational {
        match self {
            CrValue::Exact(r) => r,
            CrValue::Interval { lo, .. } => lo,
        }
    }
}

impl std::fmt::Display for CrValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CrValue::Exact(r) => write!(f, "{r}"),
            CrValue::Interval { lo, hi } => write!(f, "[{lo}, {hi}]"),
        }
    }
}

/// One edge of a witness, for reports.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessStep {
    pub from: NodeId,
    pub to: NodeId,
    pub release: String,
    pub online: String,
    pub w_a: i64,
    pub w_c: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessCycle {
    pub multiplicity: u64,
    pub steps: Vec<WitnessStep>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessReport {
    /// Path from the initial node to the first cycle.
    pub prefix: Vec<WitnessStep>,
    pub cycles: Vec<WitnessCycle>,
    /// Release sets along one period of the (first) cycle.
    pub releases: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub online_states: usize,
    pub clairvoyant_states: usize,
    pub product_nodes: usize,
    pub product_edges: usize,
    pub candidate_sccs: usize,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub build_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CrReport {
    pub cr: CrValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub stats: Stats,
}

/// Internal form of the witness, replayable on the product.
#[derive(Clone, Debug)]
pub enum Witness {
    Cycle(CycleWitness),
    Multi(MultiWitness),
}

/// Everything produced by one analysis.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub product: ProductGraph,
    pub sccs: Vec<Vec<NodeId>>,
    pub witness: Option<Witness>,
    pub report: CrReport,
}

/// Builds the on-line LTS for a scheduler.
pub fn online_lts(
    taskset: &Taskset,
    scheduler: &SchedulerSpec,
    opts: &AnalysisOptions,
) -> Result<Lts<StateId>> {
    match scheduler {
        SchedulerSpec::Builtin(b) => {
            let o = OnlineOptions {
                state_cap: opts.state_cap,
                dropping: opts.dropping,
            };
            Ok(reduced_online_lts(taskset, b, o, opts.exec)?.erase())
        }
        SchedulerSpec::Custom(l) => {
            if l.n_tasks() != taskset.len() {
                return Err(Error::MalformedLts(format!(
                    "scheduler LTS is over {} tasks, taskset has {}",
                    l.n_tasks(),
                    taskset.len()
                )));
            }
            l.validate_deterministic()?;
            if !l.is_input_enabled() {
                return Err(Error::MalformedLts("scheduler LTS is not input-enabled".into()));
            }
            Ok(l.clone())
        }
    }
}

/// State counts only, without solving.
pub fn dry_run(
    taskset: &Taskset,
    scheduler: &SchedulerSpec,
    constraints: &ConstraintSet,
    opts: &AnalysisOptions,
) -> Result<Stats> {
    let online = online_lts(taskset, scheduler, opts)?;
    let clair = build_clairvoyant_lts(taskset, opts.state_cap, opts.exec)?;
    let p = build_product(&online, &clair, constraints, opts.state_cap, opts.exec)?;
    Ok(Stats {
        online_states: online.num_states(),
        clairvoyant_states: clair.num_states(),
        product_nodes: p.num_nodes(),
        product_edges: p.num_edges(),
        candidate_sccs: p.candidate_sccs().len(),
        ..Stats::default()
    })
}

fn step(p: &ProductGraph, e: EdgeId) -> WitnessStep {
    let l = &p.labels[e as usize];
    WitnessStep {
        from: p.graph.source(e),
        to: p.graph.target(e),
        release: l.release.to_string(),
        online: l.online.map_or_else(|| "-".into(), |o| o.to_string()),
        w_a: p.w_a[e as usize],
        w_c: p.w_c[e as usize],
    }
}

fn first_cycle(w: &Witness) -> &Cycle {
    match w {
        Witness::Cycle(c) => &c.cycle,
        Witness::Multi(m) => &m.multicycle.cycles[0].0,
    }
}

fn prefix_to(p: &ProductGraph, v: NodeId) -> Vec<EdgeId> {
    let alive = prune_safety(&p.graph, &p.x);
    shortest_path(&p.graph, p.initial, v, &alive, |_| true).expect("candidate SCCs are reachable")
}

fn witness_report(p: &ProductGraph, w: &Witness) -> WitnessReport {
    let c0 = first_cycle(w);
    let prefix = prefix_to(p, p.graph.source(c0.edges[0]));
    let cycles: Vec<(Cycle, u64)> = match w {
        Witness::Cycle(c) => vec![(c.cycle.clone(), 1)],
        Witness::Multi(m) => m.multicycle.cycles.clone(),
    };
    WitnessReport {
        prefix: prefix.iter().map(|&e| step(p, e)).collect(),
        releases: c0
            .edges
            .iter()
            .map(|&e| p.labels[e as usize].release.to_string())
            .collect(),
        cycles: cycles
            .into_iter()
            .map(|(c, m)| WitnessCycle {
                multiplicity: m,
                steps: c.edges.iter().map(|&e| step(p, e)).collect(),
            })
            .collect(),
    }
}

const DEGENERATE: &str = "no cycle with positive clairvoyant utility is admissible; \
     the ratio 1 follows from the 0/0 convention and may not reflect finite-prefix effects";

/// Full pipeline: build the on-line and clairvoyant LTSs, their product with
/// the constraints, and search for the ratio.
pub fn competitive_ratio(
    taskset: &Taskset,
    scheduler: &SchedulerSpec,
    constraints: &ConstraintSet,
    opts: &AnalysisOptions,
) -> Result<Analysis> {
    let t0 = Instant::now();
    let online = online_lts(taskset, scheduler, opts)?;
    let clair = build_clairvoyant_lts(taskset, opts.state_cap, opts.exec)?;
    let product = build_product(&online, &clair, constraints, opts.state_cap, opts.exec)?;
    let build_ms = t0.elapsed().as_millis() as u64;
    let t1 = Instant::now();
    let sccs = product.candidate_sccs();
    let (cr, witness, iterations) = if product.lim_dim() == 0 {
        let r = adaptive_binary_search(&product, opts.exec)?;
        (CrValue::Exact(r.cr), r.witness.map(Witness::Cycle), r.iterations)
    } else {
        let r = cr_with_limitavg(&product, &opts.epsilon, opts.exec)?;
        let v = if r.lo == r.hi {
            CrValue::Exact(r.hi)
        } else {
            CrValue::Interval { lo: r.lo, hi: r.hi }
        };
        (v, r.witness.map(Witness::Multi), r.iterations)
    };
    let solve_ms = t1.elapsed().as_millis() as u64;
    let degenerate = cr.hi().is_one()
        && match &witness {
            None => true,
            Some(Witness::Cycle(c)) => c.sum_c == 0,
            Some(Witness::Multi(_)) => false,
        };
    let warning = (degenerate && (!constraints.liveness.is_empty() || !constraints.limitavg.is_empty() || sccs.is_empty()))
        .then(|| DEGENERATE.to_string());
    let report = CrReport {
        cr,
        witness: witness.as_ref().map(|w| witness_report(&product, w)),
        warning,
        stats: Stats {
            online_states: online.num_states(),
            clairvoyant_states: clair.num_states(),
            product_nodes: product.num_nodes(),
            product_edges: product.num_edges(),
            candidate_sccs: sccs.len(),
            iterations,
            build_ms: Some(build_ms),
            solve_ms: Some(solve_ms),
        },
    };
    Ok(Analysis {
        product,
        sccs,
        witness,
        report,
    })
}

impl Analysis {
    /// Product edges of the witness: the prefix, then the cycle repeated
    /// `reps` times (or `reps` rounds of the multicycle path).
    pub fn witness_edges(&self, reps: usize) -> Option<Vec<EdgeId>> {
        let w = self.witness.as_ref()?;
        let c0 = first_cycle(w);
        let start = self.product.graph.source(c0.edges[0]);
        let mut path = prefix_to(&self.product, start);
        match w {
            Witness::Cycle(c) => {
                for _ in 0..reps {
                    path.extend(&c.cycle.edges);
                }
            }
            Witness::Multi(m) => {
                let per_round: u64 = m.multicycle.cycles.iter().map(|(c, k)| c.len() as u64 * k).sum();
                let total = per_round as usize * reps * (reps + 1) / 2;
                let gen = WitnessPath::new(&self.product.graph, &self.sccs[m.scc], &m.multicycle, None, start);
                path.extend(gen.take(total));
            }
        }
        Some(path)
    }
}

/// Utilities obtained by replaying a witness path: the on-line side by
/// re-simulating the scheduler on the release labels, the clairvoyant side
/// from its witnessed rewards, after checking each clairvoyant step against
/// the successor relation.
pub fn replay_witness(
    analysis: &Analysis,
    taskset: &Taskset,
    scheduler: &SchedulerSpec,
    reps: usize,
) -> Result<Option<(u64, u64)>> {
    let Some(path) = analysis.witness_edges(reps) else {
        return Ok(None);
    };
    let p = &analysis.product;
    let releases: Vec<JobRelease> = path.iter().map(|&e| p.labels[e as usize].release).collect();
    let online: u64 = match scheduler {
        SchedulerSpec::Builtin(b) => simulate(b, taskset, &releases)?.1.iter().sum(),
        SchedulerSpec::Custom(l) => l.run(&releases)?.iter().map(|t| t.reward[0] as u64).sum(),
    };
    let gaps = crate::clairvoyant::GapOracle::new(taskset);
    let mut clair = 0u64;
    for &e in &path {
        let (u, v) = (p.graph.source(e), p.graph.target(e));
        if let (Some(a), Some(b)) = (p.clair[u as usize], p.clair[v as usize]) {
            let succ = crate::clairvoyant::clairvoyant_successor(
                p.labels[e as usize].release,
                a,
                0,
                taskset,
                &gaps,
            );
            if !succ.contains(&(b, p.w_c[e as usize] as u64)) {
                return Err(Error::MalformedLts("witness clairvoyant step is not a transition".into()));
            }
        }
        clair += p.w_c[e as usize] as u64;
    }
    Ok(Some((online, clair)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    fn cr(ts: &[(u32, u32, u64)], policy: BuiltinPolicy, cons: &ConstraintSet) -> Analysis {
        let ts = Taskset::from_triples(ts).unwrap();
        competitive_ratio(&ts, &SchedulerSpec::Builtin(policy), cons, &AnalysisOptions::default())
            .unwrap()
    }

    fn single(n: usize, edges: &[(u32, u32, i64, i64)], x: Vec<bool>, y: Vec<bool>) -> ProductGraph {
        let g = MultiGraph::new(n, &edges.iter().map(|e| (e.0, e.1)).collect::<Vec<_>>());
        ProductGraph::from_parts(
            g,
            0,
            edges.iter().map(|e| e.2).collect(),
            edges.iter().map(|e| e.3).collect(),
            x,
            y,
        )
        .unwrap()
    }

    #[test]
    fn single_cycle_ratio() {
        let p = single(2, &[(0, 1, 1, 2), (1, 0, 0, 1)], vec![false; 2], vec![true; 2]);
        assert_eq!(adaptive_binary_search(&p, Exec::Sequential).unwrap().cr, q(1, 3));
        assert_eq!(brute_force_cycle_oracle(&p).unwrap(), q(1, 3));
        let p = single(1, &[(0, 0, 1, 2)], vec![false], vec![true]);
        assert_eq!(brute_force_cycle_oracle(&p).unwrap(), q(1, 2));
        let p = single(1, &[(0, 0, 0, 0)], vec![false], vec![true]);
        assert_eq!(brute_force_cycle_oracle(&p).unwrap(), q(1, 1));
        assert_eq!(adaptive_binary_search(&p, Exec::Sequential).unwrap().cr, q(1, 1));
    }

    #[test]
    fn negative_threshold_is_no() {
        let p = single(1, &[(0, 0, 0, 1)], vec![false], vec![true]);
        let sccs = p.candidate_sccs();
        assert!(matches!(
            decide_cr_at_most(&p, &sccs, &q(-1, 2), Exec::Sequential).unwrap(),
            Decision::No(_)
        ));
        assert!(matches!(
            decide_cr_at_most(&p, &sccs, &q(0, 1), Exec::Sequential).unwrap(),
            Decision::Yes(_)
        ));
    }

    #[test]
    fn unit_task_edf_is_optimal() {
        let a = cr(&[(1, 1, 1)], BuiltinPolicy::Edf, &ConstraintSet::default());
        assert_eq!(a.report.cr, CrValue::Exact(q(1, 1)));
    }

    #[test]
    fn random_graphs_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let n = rng.gen_range(1..=8);
            let m = rng.gen_range(1..=20);
            let edges: Vec<(u32, u32, i64, i64)> = (0..m)
                .map(|_| {
                    (
                        rng.gen_range(0..n) as u32,
                        rng.gen_range(0..n) as u32,
                        rng.gen_range(0..=9),
                        rng.gen_range(0..=9),
                    )
                })
                .collect();
            let x: Vec<bool> = (0..n).map(|i| i > 0 && rng.gen_bool(0.2)).collect();
            let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let p = single(n, &edges, x, y);
            let got = adaptive_binary_search(&p, Exec::Sequential).unwrap();
            assert_eq!(got.cr, brute_force_cycle_oracle(&p).unwrap());
            if let Some(w) = &got.witness {
                if got.cr < BigRational::one() {
                    assert_eq!(w.ratio(), Some(got.cr.clone()));
                }
            }
        }
    }

    #[test]
    fn decision_monotone_in_nu() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.gen_range(1..=6);
            let edges: Vec<(u32, u32, i64, i64)> = (0..12)
                .map(|_| {
                    (
                        rng.gen_range(0..n) as u32,
                        rng.gen_range(0..n) as u32,
                        rng.gen_range(0..=9),
                        rng.gen_range(0..=9),
                    )
                })
                .collect();
            let p = single(n, &edges, vec![false; n], vec![true; n]);
            let sccs = p.candidate_sccs();
            let mut seen_yes = false;
            for k in 0..=20 {
                let yes = matches!(
                    decide_cr_at_most(&p, &sccs, &q(k, 20), Exec::Sequential).unwrap(),
                    Decision::Yes(_)
                );
                assert!(!seen_yes || yes);
                seen_yes |= yes;
            }
        }
    }

    #[test]
    fn product_weights_replay() {
        let ts = Taskset::from_triples(&[(2, 3, 5), (2, 2, 1)]).unwrap();
        let a = competitive_ratio(
            &ts,
            &SchedulerSpec::Builtin(BuiltinPolicy::Edf),
            &ConstraintSet::default(),
            &AnalysisOptions::default(),
        )
        .unwrap();
        let p = &a.product;
        let gaps = crate::clairvoyant::GapOracle::new(&ts);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let e = rng.gen_range(0..p.num_edges()) as EdgeId;
            let (u, v) = (p.graph.source(e), p.graph.target(e));
            let succ = crate::clairvoyant::clairvoyant_successor(
                p.labels[e as usize].release,
                p.clair[u as usize].unwrap(),
                0,
                &ts,
                &gaps,
            );
            assert!(succ.contains(&(p.clair[v as usize].unwrap(), p.w_c[e as usize] as u64)));
        }
    }

    #[test]
    fn rejecting_safety_blocks_releases() {
        let ts = Taskset::from_triples(&[(1, 1, 1), (1, 2, 2)]).unwrap();
        let cons = ConstraintSet {
            safety: vec![crate::constraints::workload_window_safety(1, 0, &ts).unwrap()],
            ..Default::default()
        };
        let a = cr(&[(1, 1, 1), (1, 2, 2)], BuiltinPolicy::Edf, &cons);
        let p = &a.product;
        for e in 0..p.num_edges() {
            if !p.labels[e].release.is_empty() {
                assert!(p.x[p.graph.target(e as EdgeId) as usize]);
            }
        }
        assert_eq!(a.report.cr, CrValue::Exact(q(1, 1)));
    }

    #[test]
    fn vacuous_limitavg_contains_exact() {
        let ts = [(1, 2, 3), (2, 3, 2), (1, 1, 1)];
        let exact = cr(&ts, BuiltinPolicy::Fifo, &ConstraintSet::default());
        let t = Taskset::from_triples(&ts).unwrap();
        let cons = ConstraintSet {
            limitavg: vec![crate::constraints::mean_workload_limitavg(&t, q(100, 1)).unwrap()],
            ..Default::default()
        };
        let approx = cr(&ts, BuiltinPolicy::Fifo, &cons);
        let v = exact.report.cr.hi().clone();
        assert!(approx.report.cr.lo() <= &v && &v <= approx.report.cr.hi());
        assert!(approx.report.cr.hi() - approx.report.cr.lo() <= q(1, 1000));
    }

    #[test]
    fn zero_workload_cap_gives_one() {
        let ts = [(1, 2, 3), (2, 3, 2)];
        let t = Taskset::from_triples(&ts).unwrap();
        let cons = ConstraintSet {
            limitavg: vec![crate::constraints::mean_workload_limitavg(&t, q(0, 1)).unwrap()],
            ..Default::default()
        };
        let a = cr(&ts, BuiltinPolicy::Edf, &cons);
        assert!(a.report.cr.hi().is_one());
    }

    #[test]
    fn witness_replay_converges() {
        let ts = Taskset::from_triples(&[(2, 3, 5), (2, 2, 1)]).unwrap();
        let s = SchedulerSpec::Builtin(BuiltinPolicy::Srt);
        let a = competitive_ratio(&ts, &s, &ConstraintSet::default(), &AnalysisOptions::default()).unwrap();
        let target = a.report.cr.hi().clone();
        let (on, cl) = replay_witness(&a, &ts, &s, 2000).unwrap().unwrap();
        let got = BigRational::new(BigInt::from(1 + on), BigInt::from(1 + cl));
        let diff = (got - &target).abs();
        assert!(diff * BigRational::from_integer(100.into()) <= target);
    }
}
