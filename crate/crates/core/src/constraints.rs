//! Automata restricting the adversary: safety (absorbing reject states),
//! liveness (accepting states visited infinitely often) and limit-average
//! (vector weights whose long-run average is bounded).
//!
//! All automata are deterministic and input-enabled over the release sets of
//! a taskset, with empty outputs. Limit-average weights live in the
//! transition reward vector.

use std::hash::Hash;

use num_rational::BigRational;
use num_traits::Signed;

use crate::error::{Error, Result};
use crate::lts::{synchronous_product_all, Lts, LtsBuilder, StateId, Transition};
use crate::model::{JobRelease, Taskset};

#[derive(Clone, Debug)]
pub struct SafetyLts {
    pub lts: Lts<StateId>,
    /// `reject[s]` iff `s` is a reject state; reject states are absorbing.
    pub reject: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct LivenessLts {
    pub lts: Lts<StateId>,
    pub accept: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct LimitAvgLts {
    /// Transition rewards are the weight vectors.
    pub lts: Lts<StateId>,
    /// Inclusive upper bounds on the long-run averages, one per dimension.
    pub threshold: Vec<BigRational>,
}

fn explore<S: Clone + Eq + Hash>(
    n_tasks: usize,
    cap: usize,
    init: S,
    step: impl Fn(&S, JobRelease) -> (S, Vec<i64>),
) -> Result<Lts<S>> {
    let mut b = LtsBuilder::new(n_tasks, cap);
    let (i, _) = b.intern(init)?;
    let mut stack = vec![i];
    while let Some(s) = stack.pop() {
        let st = b.state(s).clone();
        for x in JobRelease::all(n_tasks) {
            let (t, w) = step(&st, x);
            let (tid, fresh) = b.intern(t)?;
            if fresh {
                stack.push(tid);
            }
            b.add_transition(
                s,
                Transition {
                    input: x,
                    target: tid,
                    output: vec![],
                    reward: w,
                },
            );
        }
    }
    Ok(b.finish(i))
}

const AUTOMATON_CAP: usize = 1 << 20;

fn check_task(task: usize, taskset: &Taskset) -> Result<()> {
    if task >= taskset.len() {
        return Err(Error::Parse(format!(
            "task index {} outside taskset of {} tasks",
            task + 1,
            taskset.len()
        )));
    }
    Ok(())
}

impl SafetyLts {
    /// Accepts every sequence.
    pub fn universal(n_tasks: usize) -> Self {
        let lts = explore(n_tasks, 1, (), |_, _| ((), vec![])).expect("one state").erase();
        SafetyLts {
            lts,
            reject: vec![false],
        }
    }

    fn from_lts<S>(lts: Lts<Option<S>>) -> Self {
        let reject = lts.states().iter().map(Option::is_none).collect();
        SafetyLts {
            lts: lts.erase(),
            reject,
        }
    }

    /// Whether the unique run on `releases` stays out of the reject states.
    pub fn admits(&self, releases: &[JobRelease]) -> bool {
        let mut s = self.lts.initial();
        for &x in releases {
            s = self.lts.successors(s, x)[0].target;
            if self.reject[s as usize] {
                return false;
            }
        }
        true
    }
}

/// Rejects as soon as the total execution time released in the last `k`
/// slots exceeds `cap`. A job is charged its full execution time when
/// released.
pub fn workload_window_safety(k: u32, cap: u64, taskset: &Taskset) -> Result<SafetyLts> {
    if k == 0 {
        return Err(Error::Parse("workload window must be at least 1".into()));
    }
    let n = taskset.len();
    let init: Option<Vec<u64>> = Some(vec![0; k as usize - 1]);
    let lts = explore(n, AUTOMATON_CAP, init, |s, x| match s {
        None => (None, vec![]),
        Some(hist) => {
            let w = taskset.workload(x);
            if hist.iter().sum::<u64>() + w > cap {
                return (None, vec![]);
            }
            let mut h = hist.clone();
            if !h.is_empty() {
                h.remove(0);
                h.push(w);
            }
            (Some(h), vec![])
        }
    })?;
    Ok(SafetyLts::from_lts(lts))
}

/// Rejects when two releases of `task` occur fewer than `p` slots apart.
pub fn sporadicity_safety(task: usize, p: u32, taskset: &Taskset) -> Result<SafetyLts> {
    check_task(task, taskset)?;
    if p == 0 {
        return Err(Error::Parse("separation must be at least 1".into()));
    }
    // slots since the last release, saturating at p
    let lts = explore(taskset.len(), AUTOMATON_CAP, Some(p), |s, x| match *s {
        None => (None, vec![]),
        Some(g) if x.contains(task) => (if g < p { None } else { Some(1) }, vec![]),
        Some(g) => (Some((g + 1).min(p)), vec![]),
    })?;
    Ok(SafetyLts::from_lts(lts))
}

/// Once `task` has been released, it must be released exactly every `p`
/// slots.
pub fn periodicity_safety(task: usize, p: u32, taskset: &Taskset) -> Result<SafetyLts> {
    check_task(task, taskset)?;
    if p == 0 {
        return Err(Error::Parse("period must be at least 1".into()));
    }
    // 0: not started; g: slots since the last release
    let lts = explore(taskset.len(), AUTOMATON_CAP, Some(0u32), |s, x| {
        let rel = x.contains(task);
        let next = match *s {
            None => None,
            Some(0) => Some(if rel { 1 } else { 0 }),
            Some(g) if g == p => rel.then_some(1),
            Some(_) if rel => None,
            Some(g) => Some(g + 1),
        };
        (next, vec![])
    })?;
    Ok(SafetyLts::from_lts(lts))
}

/// Conjunction of safety automata: rejects once any component rejects.
pub fn compose_safety(parts: &[SafetyLts], n_tasks: usize) -> Result<SafetyLts> {
    match parts {
        [] => Ok(SafetyLts::universal(n_tasks)),
        [one] => Ok(one.clone()),
        _ => {
            let lts: Vec<Lts<StateId>> = parts.iter().map(|p| p.lts.clone()).collect();
            let prod = synchronous_product_all(&lts, AUTOMATON_CAP)?;
            let reject = prod
                .states()
                .iter()
                .map(|tuple| tuple.iter().zip(parts).any(|(&s, p)| p.reject[s as usize]))
                .collect();
            Ok(SafetyLts {
                lts: prod.erase(),
                reject,
            })
        }
    }
}

impl LivenessLts {
    /// Every state accepting.
    pub fn universal(n_tasks: usize) -> Self {
        let lts = explore(n_tasks, 1, (), |_, _| ((), vec![])).expect("one state").erase();
        LivenessLts {
            lts,
            accept: vec![true],
        }
    }
}

/// Two states; the accepting one is entered exactly on releases of `task`.
pub fn infinitely_often_liveness(task: usize, taskset: &Taskset) -> Result<LivenessLts> {
    check_task(task, taskset)?;
    let lts = explore(taskset.len(), 2, false, |_, x| (x.contains(task), vec![]))?;
    let accept = lts.states().to_vec();
    Ok(LivenessLts {
        lts: lts.erase(),
        accept,
    })
}

/// Conjunction of liveness automata. A round-robin counter waits for each
/// component in turn to accept; the composite accepts whenever the counter
/// wraps around.
pub fn compose_liveness(parts: &[LivenessLts], n_tasks: usize) -> Result<LivenessLts> {
    match parts {
        [] => Ok(LivenessLts::universal(n_tasks)),
        [one] => Ok(one.clone()),
        _ => {
            let m = parts.len();
            let init: (Vec<StateId>, usize, bool) =
                (parts.iter().map(|p| p.lts.initial()).collect(), 0, false);
            let lts = explore(n_tasks, AUTOMATON_CAP, init, |(q, j, _), x| {
                let q2: Vec<StateId> = q
                    .iter()
                    .zip(parts)
                    .map(|(&s, p)| p.lts.successors(s, x)[0].target)
                    .collect();
                let mut j2 = *j;
                if parts[j2].accept[q2[j2] as usize] {
                    j2 += 1;
                }
                let wrap = j2 == m;
                (
                    (q2, if wrap { 0 } else { j2 }, wrap),
                    vec![],
                )
            })?;
            let accept = lts.states().iter().map(|s| s.2).collect();
            Ok(LivenessLts {
                lts: lts.erase(),
                accept,
            })
        }
    }
}

/// Single state; the weight of a release set is its total execution time.
pub fn mean_workload_limitavg(taskset: &Taskset, lambda: BigRational) -> Result<LimitAvgLts> {
    if lambda.is_negative() {
        return Err(Error::Parse("workload threshold must be non-negative".into()));
    }
    let lts = explore(taskset.len(), 1, (), |_, x| {
        ((), vec![taskset.workload(x) as i64])
    })?.erase();
    Ok(LimitAvgLts {
        lts,
        threshold: vec![lambda],
    })
}

impl LimitAvgLts {
    pub fn dim(&self) -> usize {
        self.threshold.len()
    }

    /// Builds from an automaton whose transitions carry weight vectors of
    /// the threshold's dimension.
    pub fn new(lts: Lts<StateId>, threshold: Vec<BigRational>) -> Result<Self> {
        let d = threshold.len();
        for s in 0..lts.num_states() as StateId {
            if lts.transitions_from(s).iter().any(|t| t.reward.len() != d) {
                return Err(Error::MalformedLts(format!(
                    "weight vectors must have dimension {d}"
                )));
            }
        }
        Ok(LimitAvgLts { lts, threshold })
    }
}

/// Conjunction of limit-average automata; weights and thresholds are
/// concatenated. `None` when there are none.
pub fn compose_limitavg(parts: &[LimitAvgLts]) -> Result<Option<LimitAvgLts>> {
    match parts {
        [] => Ok(None),
        [one] => Ok(Some(one.clone())),
        _ => {
            let lts: Vec<Lts<StateId>> = parts.iter().map(|p| p.lts.clone()).collect();
            let prod = synchronous_product_all(&lts, AUTOMATON_CAP)?;
            let threshold = parts.iter().flat_map(|p| p.threshold.clone()).collect();
            Ok(Some(LimitAvgLts {
                lts: prod.erase(),
                threshold,
            }))
        }
    }
}
