//! Labeled transition systems over release-set inputs and their synchronous
//! product.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::model::{JobRelease, ScheduleLabel};

pub type StateId = u32;

/// Default bound on the number of states any builder may create.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transition {
    pub input: JobRelease,
    pub target: StateId,
    /// Scheduling decisions; empty for constraint automata, one entry per
    /// scheduler component in a product.
    pub output: Vec<ScheduleLabel>,
    pub reward: Vec<i64>,
}

/// A finite LTS with states labelled by `S`. Inputs are subsets of an
/// `n_tasks`-element taskset.
#[derive(Clone, Debug)]
pub struct Lts<S> {
    n_tasks: usize,
    states: Vec<S>,
    initial: StateId,
    transitions: Vec<Transition>,
    // offsets[s * 2^n + input] .. offsets[s * 2^n + input + 1]
    offsets: Vec<u32>,
}

impl<S> Lts<S> {
    pub fn n_tasks(&self) -> usize {
        self.n_tasks
    }

    pub fn num_inputs(&self) -> usize {
        1 << self.n_tasks
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn state(&self, id: StateId) -> &S {
        &self.states[id as usize]
    }

    /// All transitions leaving `s`, ordered by input.
    pub fn transitions_from(&self, s: StateId) -> &[Transition] {
        let k = self.num_inputs();
        let lo = self.offsets[s as usize * k] as usize;
        let hi = self.offsets[(s as usize + 1) * k] as usize;
        &self.transitions[lo..hi]
    }

    pub fn successors(&self, s: StateId, input: JobRelease) -> &[Transition] {
        let idx = s as usize * self.num_inputs() + input.0 as usize;
        &self.transitions[self.offsets[idx] as usize..self.offsets[idx + 1] as usize]
    }

    pub fn is_deterministic(&self) -> bool {
        self.offsets.windows(2).all(|w| w[1] - w[0] <= 1)
    }

    pub fn is_input_enabled(&self) -> bool {
        self.offsets.windows(2).all(|w| w[1] > w[0])
    }

    /// Every state is reachable from the initial state.
    pub fn is_reachable(&self) -> bool {
        let mut seen = vec![false; self.states.len()];
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial as usize] = true;
        while let Some(s) = queue.pop_front() {
            for t in self.transitions_from(s) {
                if !seen[t.target as usize] {
                    seen[t.target as usize] = true;
                    queue.push_back(t.target);
                }
            }
        }
        seen.into_iter().all(|b| b)
    }

    /// The unique run of a deterministic LTS on `inputs`.
    pub fn run(&self, inputs: &[JobRelease]) -> Result<Vec<&Transition>> {
        let mut s = self.initial;
        let mut out = Vec::with_capacity(inputs.len());
        for &x in inputs {
            match self.successors(s, x) {
                [t] => {
                    out.push(t);
                    s = t.target;
                }
                [] => return Err(Error::MalformedLts(format!("no transition on {x}"))),
                _ => return Err(Error::MalformedLts(format!("non-deterministic on {x}"))),
            }
        }
        Ok(out)
    }

    pub fn map_states<T>(self, f: impl FnMut(S) -> T) -> Lts<T> {
        Lts {
            n_tasks: self.n_tasks,
            states: self.states.into_iter().map(f).collect(),
            initial: self.initial,
            transitions: self.transitions,
            offsets: self.offsets,
        }
    }

    /// Checks the structural invariants shared by every deterministic
    /// automaton in the pipeline.
    pub fn validate_deterministic(&self) -> Result<()> {
        if !self.is_deterministic() {
            return Err(Error::MalformedLts("not deterministic".into()));
        }
        if !self.is_input_enabled() {
            return Err(Error::MalformedLts("not input-enabled".into()));
        }
        Ok(())
    }
}

/// Incremental construction with state interning.
pub struct LtsBuilder<S> {
    n_tasks: usize,
    cap: usize,
    states: Vec<S>,
    index: HashMap<S, StateId>,
    edges: Vec<(StateId, Transition)>,
}

impl<S: Clone + Eq + Hash> LtsBuilder<S> {
    pub fn new(n_tasks: usize, cap: usize) -> Self {
        LtsBuilder {
            n_tasks,
            cap,
            states: Vec::new(),
            index: HashMap::new(),
            edges: Vec::new(),
        }
    }

    /// Returns the id of `s` and whether it was newly created.
    pub fn intern(&mut self, s: S) -> Result<(StateId, bool)> {
        if let Some(&id) = self.index.get(&s) {
            return Ok((id, false));
        }
        if self.states.len() >= self.cap {
            return Err(Error::StateExplosion { cap: self.cap });
        }
        let id = self.states.len() as StateId;
        self.index.insert(s.clone(), id);
        self.states.push(s);
        Ok((id, true))
    }

    pub fn lookup(&self, s: &S) -> Option<StateId> {
        self.index.get(s).copied()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, id: StateId) -> &S {
        &self.states[id as usize]
    }

    pub fn add_transition(&mut self, source: StateId, t: Transition) {
        self.edges.push((source, t));
    }

    pub fn finish(self, initial: StateId) -> Lts<S> {
        assemble(self.n_tasks, self.states, initial, self.edges)
    }
}

fn assemble<S>(
    n_tasks: usize,
    states: Vec<S>,
    initial: StateId,
    mut edges: Vec<(StateId, Transition)>,
) -> Lts<S> {
    let k = 1usize << n_tasks;
    edges.sort_by_key(|(s, t)| (*s, t.input.0));
    let mut counts = vec![0u32; states.len() * k + 1];
    for (s, t) in &edges {
        counts[*s as usize * k + t.input.0 as usize + 1] += 1;
    }
    for i in 1..counts.len() {
        counts[i] += counts[i - 1];
    }
    Lts {
        n_tasks,
        states,
        initial,
        transitions: edges.into_iter().map(|(_, t)| t).collect(),
        offsets: counts,
    }
}

impl<S: Clone> Lts<S> {
    /// Builds an LTS from explicit parts, e.g. a user-supplied automaton.
    pub fn from_parts(
        n_tasks: usize,
        states: Vec<S>,
        initial: StateId,
        transitions: Vec<(StateId, Transition)>,
    ) -> Result<Self> {
        if initial as usize >= states.len() {
            return Err(Error::MalformedLts("initial state out of range".into()));
        }
        for (s, t) in &transitions {
            if *s as usize >= states.len() || t.target as usize >= states.len() {
                return Err(Error::MalformedLts("transition endpoint out of range".into()));
            }
            if t.input.0 >> n_tasks != 0 {
                return Err(Error::MalformedLts(format!("input {} outside taskset", t.input)));
            }
        }
        Ok(assemble(n_tasks, states, initial, transitions))
    }
}

/// Synchronous product of two LTSs: both move on the same input, outputs and
/// rewards are concatenated. Only reachable state pairs are built.
pub fn synchronous_product<A, B>(a: &Lts<A>, b: &Lts<B>, cap: usize) -> Result<Lts<(A, B)>>
where
    A: Clone + Eq + Hash,
    B: Clone + Eq + Hash,
{
    let product = product_of(&[a.erase(), b.erase()], cap)?;
    Ok(product.map_states(|ids| (a.state(ids[0]).clone(), b.state(ids[1]).clone())))
}

/// N-ary synchronous product; states are tuples of component states.
pub fn synchronous_product_all<S>(components: &[Lts<S>], cap: usize) -> Result<Lts<Vec<S>>>
where
    S: Clone + Eq + Hash,
{
    let erased: Vec<Lts<StateId>> = components.iter().map(|l| l.erase()).collect();
    let product = product_of(&erased, cap)?;
    Ok(product.map_states(|ids| {
        ids.iter()
            .zip(components)
            .map(|(&s, l)| l.state(s).clone())
            .collect()
    }))
}

impl<S> Lts<S> {
    /// Same LTS with states labelled by their ids.
    pub fn erase(&self) -> Lts<StateId> {
        Lts {
            n_tasks: self.n_tasks,
            states: (0..self.states.len() as StateId).collect(),
            initial: self.initial,
            transitions: self.transitions.clone(),
            offsets: self.offsets.clone(),
        }
    }
}

fn product_of(components: &[Lts<StateId>], cap: usize) -> Result<Lts<Vec<StateId>>> {
    assert!(!components.is_empty());
    let n_tasks = components[0].n_tasks;
    if components.iter().any(|l| l.n_tasks != n_tasks) {
        return Err(Error::MalformedLts("components disagree on the input alphabet".into()));
    }
    let mut builder = LtsBuilder::new(n_tasks, cap);
    let init: Vec<StateId> = components.iter().map(|l| l.initial).collect();
    let (init_id, _) = builder.intern(init)?;
    let mut queue = VecDeque::from([init_id]);
    while let Some(id) = queue.pop_front() {
        let tuple = builder.state(id).clone();
        for input in JobRelease::all(n_tasks) {
            let lists: Vec<&[Transition]> = components
                .iter()
                .zip(&tuple)
                .map(|(l, &s)| l.successors(s, input))
                .collect();
            if lists.iter().any(|l| l.is_empty()) {
                continue;
            }
            // Odometer over the cartesian product of successor lists.
            let mut pick = vec![0usize; lists.len()];
            loop {
                let mut target = Vec::with_capacity(lists.len());
                let mut output = Vec::new();
                let mut reward = Vec::new();
                for (l, &p) in lists.iter().zip(&pick) {
                    let t = &l[p];
                    target.push(t.target);
                    output.extend_from_slice(&t.output);
                    reward.extend_from_slice(&t.reward);
                }
                let (tid, fresh) = builder.intern(target)?;
                if fresh {
                    queue.push_back(tid);
                }
                builder.add_transition(
                    id,
                    Transition {
                        input,
                        target: tid,
                        output,
                        reward,
                    },
                );
                let mut k = 0;
                while k < pick.len() {
                    pick[k] += 1;
                    if pick[k] < lists[k].len() {
                        break;
                    }
                    pick[k] = 0;
                    k += 1;
                }
                if k == pick.len() {
                    break;
                }
            }
        }
    }
    Ok(builder.finish(init_id))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counter modulo `m` that increments on input containing task 0.
    fn counter(m: u32) -> Lts<u32> {
        let mut b = LtsBuilder::new(1, 100);
        for s in 0..m {
            b.intern(s).unwrap();
        }
        for s in 0..m {
            for x in JobRelease::all(1) {
                let next = if x.contains(0) { (s + 1) % m } else { s };
                b.add_transition(
                    s,
                    Transition {
                        input: x,
                        target: next,
                        output: vec![],
                        reward: vec![s as i64],
                    },
                );
            }
        }
        b.finish(0)
    }

    fn universal() -> Lts<u32> {
        let mut b = LtsBuilder::new(1, 10);
        b.intern(0).unwrap();
        for x in JobRelease::all(1) {
            b.add_transition(
                0,
                Transition {
                    input: x,
                    target: 0,
                    output: vec![],
                    reward: vec![],
                },
            );
        }
        b.finish(0)
    }

    #[test]
    fn product_with_universal_is_identity() {
        let c = counter(3);
        let p = synchronous_product(&c, &universal(), 100).unwrap();
        assert_eq!(p.num_states(), c.num_states());
        assert_eq!(p.num_transitions(), c.num_transitions());
        assert!(p.is_deterministic());
    }

    #[test]
    fn product_bounded_and_deterministic() {
        let a = counter(2);
        let b = counter(3);
        let p = synchronous_product(&a, &b, 100).unwrap();
        assert!(p.is_deterministic());
        assert!(p.is_input_enabled());
        assert!(p.num_states() <= 6);
        // lockstep counters: (0,0) -> (1,1) -> (0,2) -> (1,0) ...
        assert_eq!(p.num_states(), 6);
    }

    #[test]
    fn product_associative_on_counts() {
        let (a, b, c) = (counter(2), counter(3), counter(4));
        let ab_c = synchronous_product(&synchronous_product(&a, &b, 100).unwrap(), &c, 100).unwrap();
        let a_bc = synchronous_product(&a, &synchronous_product(&b, &c, 100).unwrap(), 100).unwrap();
        let all = synchronous_product_all(&[a, b, c], 100).unwrap();
        assert_eq!(ab_c.num_states(), a_bc.num_states());
        assert_eq!(ab_c.num_states(), all.num_states());
        assert_eq!(ab_c.num_transitions(), all.num_transitions());
    }

    #[test]
    fn state_cap_enforced() {
        let p = synchronous_product(&counter(5), &counter(7), 10);
        assert!(matches!(p, Err(Error::StateExplosion { cap: 10 })));
    }
}
