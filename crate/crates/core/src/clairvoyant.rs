//! The clairvoyant (off-line) scheduler as a non-deterministic LTS over
//! slot-allocation bit strings.
//!
//! On every release the clairvoyant picks which of the new jobs it will run
//! and reserves future slots for them; reserved slots are never revoked, so
//! the value of a picked job is earned at reservation time. Successors are
//! generated in EDF order (ties by task index), each new job being placed
//! strictly after the previous one, which keeps every EDF-feasible choice
//! while generating each transition once. Two prunings apply to any
//! successor that reserves something: the current slot must be in use, and
//! every interior gap must be exactly fillable by future jobs.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::lts::{Lts, LtsBuilder, StateId, Transition, DEFAULT_STATE_CAP};
use crate::model::{JobRelease, Taskset};
use crate::par::{self, Exec};

/// Reservation string of length `D_max`: bit `p - 1` set iff the `p`-th slot
/// from now (position 1 is the current slot) is reserved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClairState {
    pub bits: u64,
    pub len: u32,
}

impl ClairState {
    pub fn zero(len: u32) -> Self {
        ClairState { bits: 0, len }
    }

    /// Parses a string of `0`/`1` characters, position 1 first.
    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = 0;
        for (p, ch) in s.chars().enumerate() {
            match ch {
                '1' => bits |= 1 << p,
                '0' => {}
                _ => return Err(Error::Parse(format!("bad clairvoyant state '{s}'"))),
            }
        }
        Ok(ClairState {
            bits,
            len: s.len() as u32,
        })
    }

    /// Whether position `p` (1-based) is reserved.
    pub fn is_set(&self, p: u32) -> bool {
        self.bits >> (p - 1) & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    /// Consumes the current slot.
    pub fn shift(&self) -> Self {
        ClairState {
            bits: self.bits >> 1,
            len: self.len,
        }
    }
}

impl fmt::Display for ClairState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in 1..=self.len {
            f.write_str(if self.is_set(p) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Memoized test of whether a gap of a given length can be tiled exactly by
/// jobs of the taskset (unbounded knapsack over execution times).
#[derive(Clone, Debug)]
pub struct GapOracle {
    sizes: Vec<u32>,
    table: Vec<bool>,
}

impl GapOracle {
    pub fn new(taskset: &Taskset) -> Self {
        let mut sizes: Vec<u32> = taskset
            .tasks()
            .iter()
            .filter(|t| t.wcet <= t.deadline)
            .map(|t| t.wcet)
            .collect();
        sizes.sort_unstable();
        sizes.dedup();
        let max = taskset.d_max() as usize;
        let mut table = vec![false; max + 1];
        table[0] = true;
        for g in 1..=max {
            table[g] = sizes
                .iter()
                .any(|&c| c as usize <= g && table[g - c as usize]);
        }
        GapOracle { sizes, table }
    }

    pub fn feasible(&self, gap: u32) -> bool {
        match self.table.get(gap as usize) {
            Some(&b) => b,
            None => knapsack_fill(&self.sizes, gap, &mut HashMap::new()),
        }
    }

    /// Every zero run bounded by reserved slots on both sides is fillable.
    pub fn gaps_feasible(&self, state: ClairState) -> bool {
        let mut gap: Option<u32> = None;
        for p in 1..=state.len {
            if state.is_set(p) {
                if let Some(g) = gap.take() {
                    if !self.feasible(g) {
                        return false;
                    }
                }
            } else if let Some(g) = gap.as_mut() {
                *g += 1;
            } else if p > 1 && state.is_set(p - 1) {
                gap = Some(1);
            }
        }
        true
    }
}

fn knapsack_fill(sizes: &[u32], gap: u32, memo: &mut HashMap<u32, bool>) -> bool {
    if gap == 0 {
        return true;
    }
    if let Some(&b) = memo.get(&gap) {
        return b;
    }
    let b = sizes
        .iter()
        .any(|&c| c <= gap && knapsack_fill(sizes, gap - c, memo));
    memo.insert(gap, b);
    b
}

/// Whether a gap of `gap_length` slots can be filled exactly by jobs of the
/// taskset that start and end inside it.
pub fn knapsack_gap_feasible(gap_length: u32, taskset: &Taskset) -> bool {
    let sizes: Vec<u32> = taskset
        .tasks()
        .iter()
        .filter(|t| t.wcet <= t.deadline)
        .map(|t| t.wcet)
        .collect();
    knapsack_fill(&sizes, gap_length, &mut HashMap::new())
}

/// Reservation choices for the released tasks (already in EDF order) placed
/// strictly after position `after`. Returns `(reservation, value)` pairs
/// before the current slot is consumed.
fn allocate(
    order: &[usize],
    state: u64,
    after: u32,
    taskset: &Taskset,
    gaps: &GapOracle,
    out: &mut Vec<(u64, u64)>,
    value: u64,
) {
    let Some((&task, rest)) = order.split_first() else {
        out.push((state, value));
        return;
    };
    // Not scheduled.
    allocate(rest, state, after, taskset, gaps, out, value);
    // Scheduled on every choice of `C` free slots inside its window.
    let t = taskset.task(task);
    let free: Vec<u32> = ((after + 1)..=t.deadline)
        .filter(|&p| state >> (p - 1) & 1 == 0)
        .collect();
    let c = t.wcet as usize;
    if c > free.len() {
        return;
    }
    let len = taskset.d_max();
    let mut sub = Vec::new();
    for_each_combination(&free, c, &mut |chosen| {
        let mask = chosen.iter().fold(state, |m, &p| m | 1 << (p - 1));
        let last = *chosen.last().unwrap();
        sub.clear();
        allocate(rest, mask, last, taskset, gaps, &mut sub, value + t.value);
        for &(b, v) in &sub {
            if b & 1 == 1 && gaps.gaps_feasible(ClairState { bits: b, len }) {
                out.push((b, v));
            }
        }
    });
}

fn for_each_combination(items: &[u32], k: usize, f: &mut impl FnMut(&[u32])) {
    fn rec(items: &[u32], k: usize, start: usize, acc: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
        if acc.len() == k {
            f(acc);
            return;
        }
        let need = k - acc.len();
        for i in start..=items.len() - need {
            acc.push(items[i]);
            rec(items, k, i + 1, acc, f);
            acc.pop();
        }
    }
    rec(items, k, 0, &mut Vec::with_capacity(k), f);
}

/// Released tasks sorted by deadline, then index.
fn edf_order(released: JobRelease, taskset: &Taskset) -> Vec<usize> {
    let mut order: Vec<usize> = released.iter().collect();
    order.sort_by_key(|&i| (taskset.task(i).deadline, i));
    order
}

/// Successors of `state` on release set `released`, reserving only slots
/// after position `after` (0 allows the current slot). Each returned state
/// already has the current slot consumed; the reward is the total value of
/// the jobs picked. No `(state, reward)` pair is returned twice.
pub fn clairvoyant_successor(
    released: JobRelease,
    state: ClairState,
    after: u32,
    taskset: &Taskset,
    gaps: &GapOracle,
) -> Vec<(ClairState, u64)> {
    let order = edf_order(released, taskset);
    let mut raw = Vec::new();
    allocate(&order, state.bits, after, taskset, gaps, &mut raw, 0);
    let set: BTreeSet<(u64, u64)> = raw.into_iter().collect();
    set.into_iter()
        .map(|(b, v)| {
            (
                ClairState {
                    bits: b,
                    len: state.len,
                }
                .shift(),
                v,
            )
        })
        .collect()
}

/// The reservations made in the current slot, before it is consumed. Used by
/// invariant checks.
pub fn clairvoyant_allocations(
    released: JobRelease,
    state: ClairState,
    taskset: &Taskset,
    gaps: &GapOracle,
) -> Vec<(ClairState, u64)> {
    let order = edf_order(released, taskset);
    let mut raw = Vec::new();
    allocate(&order, state.bits, 0, taskset, gaps, &mut raw, 0);
    let set: BTreeSet<(u64, u64)> = raw.into_iter().collect();
    set.into_iter()
        .map(|(bits, v)| (ClairState { bits, len: state.len }, v))
        .collect()
}

/// Reachable closure of the clairvoyant LTS from the all-zero state.
pub fn build_clairvoyant_lts(
    taskset: &Taskset,
    state_cap: usize,
    exec: Exec,
) -> Result<Lts<ClairState>> {
    let n = taskset.len();
    let gaps = GapOracle::new(taskset);
    let zero = ClairState::zero(taskset.d_max());
    let mut builder = LtsBuilder::new(n, state_cap);
    let (init, _) = builder.intern(zero)?;
    let mut frontier = vec![init];
    while !frontier.is_empty() {
        let states: Vec<ClairState> = frontier.iter().map(|&s| *builder.state(s)).collect();
        let expanded: Vec<Vec<(JobRelease, Vec<(ClairState, u64)>)>> =
            par::map_slice(exec, &states, |&b| {
                JobRelease::all(n)
                    .map(|x| (x, clairvoyant_successor(x, b, 0, taskset, &gaps)))
                    .collect()
            });
        let mut next = Vec::new();
        for (&src, per_input) in frontier.iter().zip(expanded) {
            for (input, succ) in per_input {
                for (b, v) in succ {
                    let (tid, fresh) = builder.intern(b)?;
                    if fresh {
                        next.push(tid);
                    }
                    builder.add_transition(
                        src,
                        Transition {
                            input,
                            target: tid,
                            output: vec![],
                            reward: vec![v as i64],
                        },
                    );
                }
            }
        }
        frontier = next;
    }
    Ok(builder.finish(init))
}

pub fn build_clairvoyant_lts_default(taskset: &Taskset) -> Result<Lts<ClairState>> {
    build_clairvoyant_lts(taskset, DEFAULT_STATE_CAP, Exec::default())
}

/// Upper bound on the number of clairvoyant states,
/// `min(2^D_max, D_max * (D_max - 1) * ... * (D_max - L_max))`.
pub fn state_bound(taskset: &Taskset) -> u128 {
    let d = taskset.d_max() as u128;
    let l = taskset.l_max() as u128;
    let pow = if d >= 127 { u128::MAX } else { 1u128 << d };
    let mut perm: u128 = 1;
    for k in 0..=l.min(d) {
        if k == d {
            perm = 0;
            break;
        }
        perm = perm.saturating_mul(d - k);
    }
    pow.min(perm)
}

/// Positions of the first `L_max + 1` free slots; `None` where fewer exist.
pub type LaxityIndex = Vec<Option<u32>>;

pub fn laxity_index(state: ClairState, l_max: u32) -> LaxityIndex {
    let mut zeros = (1..=state.len).filter(|&p| !state.is_set(p));
    (0..=l_max).map(|_| zeros.next()).collect()
}

/// Rebuilds the state from its laxity index: with fewer than `L_max + 1`
/// free slots exactly the listed ones are free; otherwise everything after
/// the last listed position is free as well.
pub fn laxity_index_inverse(index: &[Option<u32>], len: u32) -> Result<ClairState> {
    let mut last = 0;
    let mut ended = false;
    for e in index {
        match (*e, ended) {
            (Some(p), false) if p > last && p <= len => last = p,
            (Some(_), false) => {
                return Err(Error::MalformedIndex(format!(
                    "positions must increase within 1..={len}: {index:?}"
                )))
            }
            (Some(_), true) => {
                return Err(Error::MalformedIndex(format!(
                    "position after an absent entry: {index:?}"
                )))
            }
            (None, _) => ended = true,
        }
    }
    let full = if len >= 64 { u64::MAX } else { (1u64 << len) - 1 };
    let mut bits = full;
    for p in index.iter().flatten() {
        bits &= !(1 << (p - 1));
    }
    if index.last().copied().flatten().is_some() {
        bits &= (1u64 << last) - 1;
    }
    Ok(ClairState { bits, len })
}

/// Exhaustive reference for the clairvoyant: the pending-matrix scheduler
/// that may run any pending job in each slot. Only for tiny instances.
pub mod naive {
    use std::collections::HashMap;

    use crate::model::{step_matrix, JobRelease, PendingMatrix, ScheduleLabel, Taskset};

    /// Maximum utility over all schedules of `releases`.
    pub fn max_utility(taskset: &Taskset, releases: &[JobRelease]) -> u64 {
        let mut layer: HashMap<PendingMatrix, u64> =
            HashMap::from([(PendingMatrix::empty(taskset), 0)]);
        for &x in releases {
            let mut next: HashMap<PendingMatrix, u64> = HashMap::new();
            for (m, acc) in layer {
                let inserted = m.insert(taskset, x);
                let mut choices = vec![ScheduleLabel::Idle];
                choices.extend(inserted.jobs().filter_map(|(task, age, _)| {
                    (age < taskset.task(task).deadline).then_some(ScheduleLabel::Run { task, age })
                }));
                for label in choices {
                    let (m2, r) = step_matrix(&m, x, label, taskset)
                        .expect("enumerated choices are valid");
                    let e = next.entry(m2).or_insert(0);
                    *e = (*e).max(acc + r);
                }
            }
            layer = next;
        }
        layer.into_values().max().unwrap_or(0)
    }
}

/// Maximum total reward over all runs of the clairvoyant LTS on `releases`.
pub fn max_run_reward(lts: &Lts<ClairState>, releases: &[JobRelease]) -> i64 {
    let mut layer: HashMap<StateId, i64> = HashMap::from([(lts.initial(), 0)]);
    for &x in releases {
        let mut next: HashMap<StateId, i64> = HashMap::new();
        for (s, acc) in layer {
            for t in lts.successors(s, x) {
                let e = next.entry(t.target).or_insert(i64::MIN);
                *e = (*e).max(acc + t.reward[0]);
            }
        }
        layer = next;
    }
    layer.into_values().max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn st(s: &str) -> ClairState {
        ClairState::parse(s).unwrap()
    }

    #[test]
    fn empty_release_just_shifts() {
        let ts = Taskset::from_triples(&[(1, 3, 1), (2, 3, 1)]).unwrap();
        let gaps = GapOracle::new(&ts);
        let succ = clairvoyant_successor(JobRelease::EMPTY, st("110"), 0, &ts, &gaps);
        assert_eq!(succ, vec![(st("100"), 0)]);
    }

    #[test]
    fn single_unit_task_two_choices() {
        let ts = Taskset::from_triples(&[(1, 2, 1)]).unwrap();
        let gaps = GapOracle::new(&ts);
        let mut succ = clairvoyant_successor(JobRelease::from_tasks([0]), st("00"), 0, &ts, &gaps);
        succ.sort();
        // Skip, or reserve slot 1 (slot 2 alone fails the current-slot rule).
        assert_eq!(succ, vec![(st("00"), 0), (st("00"), 1)]);
    }

    #[test]
    fn reservations_stay_in_deadline_window() {
        let ts = Taskset::from_triples(&[(1, 2, 1), (2, 5, 3), (1, 5, 1)]).unwrap();
        let gaps = GapOracle::new(&ts);
        for x in JobRelease::all(3) {
            for (b, _) in clairvoyant_allocations(x, ClairState::zero(5), &ts, &gaps) {
                // Only task 1 (D=2) could use slots 1..2 alone; nothing is ever
                // reserved beyond the largest released deadline.
                let dl = x.iter().map(|i| ts.task(i).deadline).max().unwrap_or(0);
                for p in (dl + 1)..=5 {
                    assert!(!b.is_set(p));
                }
            }
        }
    }

    #[test]
    fn knapsack_examples() {
        let ts = Taskset::from_triples(&[(2, 4, 1)]).unwrap();
        assert!(!knapsack_gap_feasible(3, &ts));
        assert!(knapsack_gap_feasible(4, &ts));
        assert!(knapsack_gap_feasible(0, &ts));
        let oracle = GapOracle::new(&ts);
        assert!(!oracle.feasible(3));
        assert!(oracle.feasible(4));
        assert!(oracle.feasible(10));
        assert!(oracle.gaps_feasible(st("1001")));
        assert!(!oracle.gaps_feasible(st("1011")));
        // trailing zeros are not a gap
        assert!(oracle.gaps_feasible(st("1000")));
    }

    #[test]
    fn laxity_index_examples() {
        assert_eq!(laxity_index(st("1111"), 1), vec![None, None]);
        assert_eq!(laxity_index(st("1010"), 1), vec![Some(2), Some(4)]);
        assert_eq!(laxity_index_inverse(&[Some(2), Some(4)], 4).unwrap(), st("1010"));
        assert_eq!(laxity_index_inverse(&[Some(2), Some(3)], 5).unwrap(), st("10000"));
        assert_eq!(laxity_index_inverse(&[Some(3), None], 4).unwrap(), st("1101"));
        assert!(matches!(
            laxity_index_inverse(&[Some(3), Some(2)], 4),
            Err(Error::MalformedIndex(_))
        ));
        assert!(matches!(
            laxity_index_inverse(&[None, Some(2)], 4),
            Err(Error::MalformedIndex(_))
        ));
    }

    #[test]
    fn zero_laxity_bound() {
        let ts = Taskset::from_triples(&[(1, 1, 1), (2, 2, 2), (3, 3, 3)]).unwrap();
        let lts = build_clairvoyant_lts_default(&ts).unwrap();
        assert!(lts.num_states() as u128 <= state_bound(&ts));
        assert_eq!(state_bound(&ts), 3);
    }

    #[test]
    fn state_bound_values() {
        let ts = Taskset::from_triples(&[(2, 7, 3), (5, 5, 2), (5, 6, 1)]).unwrap();
        // L_max = 5: Perm(7, 6) = 5040 > 2^7
        assert_eq!(state_bound(&ts), 128);
        let ts = Taskset::from_triples(&[(3, 4, 1), (2, 2, 1)]).unwrap();
        assert_eq!(state_bound(&ts), 12);
    }

    proptest! {
        #[test]
        fn successors_unique_and_shifted(c1 in 1u32..4, d1 in 1u32..6, c2 in 1u32..4, d2 in 1u32..6,
                                         bits in 0u64..64, x in 0u32..4) {
            let ts = Taskset::from_triples(&[(c1, d1, 2), (c2, d2, 3)]).unwrap();
            let len = ts.d_max();
            let b = ClairState { bits: bits & ((1 << len) - 1), len };
            let gaps = GapOracle::new(&ts);
            let succ = clairvoyant_successor(JobRelease(x), b, 0, &ts, &gaps);
            let set: BTreeSet<_> = succ.iter().collect();
            prop_assert_eq!(set.len(), succ.len());
            for (s, _) in &succ {
                prop_assert!(!s.is_set(len));
            }
        }

        #[test]
        fn laxity_round_trip_on_reachable(c1 in 1u32..4, d1 in 1u32..6, c2 in 1u32..4, d2 in 1u32..6) {
            let ts = Taskset::from_triples(&[(c1, d1, 2), (c2, d2, 3)]).unwrap();
            let lts = build_clairvoyant_lts(&ts, 10_000, Exec::Sequential).unwrap();
            prop_assert!(lts.num_states() as u128 <= state_bound(&ts));
            let mut seen = BTreeSet::new();
            for &b in lts.states() {
                let idx = laxity_index(b, ts.l_max());
                prop_assert_eq!(laxity_index_inverse(&idx, b.len).unwrap(), b);
                prop_assert!(seen.insert(idx));
            }
        }
    }
}
