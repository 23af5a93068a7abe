//! File formats: tasksets, explicit LTSs and constraint configurations.
//!
//! Taskset: `{"tasks":[{"c":2,"d":3,"v":5}, ...]}`, listed in static-priority
//! order.
//!
//! LTS: `{"tasks":2, "states":3, "initial":0, "transitions":[[0,[1,2],1,"(t2,0)",0], ...]}`.
//! A transition is `[state, released tasks (1-based), next, output, reward]`;
//! the output is `"idle"`, `"(tI,AGE)"` or `null`, and the reward is an
//! integer or an array of integers. Constraint automata add `"reject"`,
//! `"accept"` (state lists) or `"threshold"` (rationals as `"p/q"`).
//!
//! Constraints: `{"safety":[...], "liveness":[...], "limitavg":[...]}` with
//! entries `{"type":"workload_window","k":2,"cap":2}`,
//! `{"type":"sporadic","task":1,"p":3}`, `{"type":"periodic","task":1,"p":3}`,
//! `{"type":"inf_often","task":2}`, `{"type":"mean_workload","lambda":"3/2"}`
//! or `{"type":"lts","lts":{...}}`. Task numbers are 1-based.

use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Deserialize;

use crate::analysis::ConstraintSet;
use crate::constraints::{
    infinitely_often_liveness, mean_workload_limitavg, periodicity_safety, sporadicity_safety,
    workload_window_safety, LimitAvgLts, LivenessLts, SafetyLts,
};
use crate::error::{Error, Result};
use crate::lts::{Lts, StateId, Transition};
use crate::model::{JobRelease, ScheduleLabel, Task, Taskset};

fn parse_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskEntry {
    c: u32,
    d: u32,
    v: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TasksetFile {
    tasks: Vec<TaskEntry>,
}

pub fn parse_taskset(text: &str) -> Result<Taskset> {
    let f: TasksetFile = serde_json::from_str(text).map_err(parse_err)?;
    Taskset::new(f.tasks.into_iter().map(|t| Task::new(t.c, t.d, t.v)).collect())
}

pub fn load_taskset(path: &Path) -> Result<Taskset> {
    parse_taskset(&read(path)?)
}

/// Parses `"p/q"` or `"p"`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d == BigInt::from(0) {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

/// Parses the `Display` form of a [`ScheduleLabel`].
pub fn parse_label(s: &str) -> Result<ScheduleLabel> {
    let bad = || Error::Parse(format!("not a schedule label: {s:?}"));
    let s = s.trim();
    if s == "idle" {
        return Ok(ScheduleLabel::Idle);
    }
    let inner = s.strip_prefix("(t").and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
    let (t, a) = inner.split_once(',').ok_or_else(bad)?;
    let task: usize = t.trim().parse().map_err(|_| bad())?;
    let age: u32 = a.trim().parse().map_err(|_| bad())?;
    if task == 0 {
        return Err(bad());
    }
    Ok(ScheduleLabel::Run { task: task - 1, age })
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Reward {
    One(i64),
    Many(Vec<i64>),
}

#[derive(Deserialize)]
struct TransitionEntry(StateId, Vec<usize>, StateId, Option<String>, Reward);

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LtsFile {
    tasks: usize,
    states: usize,
    initial: StateId,
    transitions: Vec<TransitionEntry>,
    #[serde(default)]
    reject: Vec<StateId>,
    #[serde(default)]
    accept: Vec<StateId>,
    #[serde(default)]
    threshold: Vec<String>,
}

impl LtsFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(parse_err)
    }

    pub fn to_lts(&self) -> Result<Lts<StateId>> {
        let mut edges = Vec::with_capacity(self.transitions.len());
        for TransitionEntry(s, tasks, t, out, reward) in &self.transitions {
            if let Some(&bad) = tasks.iter().find(|&&i| i == 0 || i > self.tasks) {
                return Err(Error::MalformedLts(format!("task {bad} out of range")));
            }
            let output = match out {
                Some(o) => vec![parse_label(o)?],
                None => vec![],
            };
            let reward = match reward {
                Reward::One(r) => vec![*r],
                Reward::Many(r) => r.clone(),
            };
            edges.push((
                *s,
                Transition {
                    input: JobRelease::from_tasks(tasks.iter().map(|i| i - 1)),
                    target: *t,
                    output,
                    reward,
                },
            ));
        }
        let states: Vec<StateId> = (0..self.states as StateId).collect();
        Lts::from_parts(self.tasks, states, self.initial, edges)
    }

    fn flags(&self, list: &[StateId], what: &str) -> Result<Vec<bool>> {
        let mut v = vec![false; self.states];
        for &s in list {
            *v.get_mut(s as usize)
                .ok_or_else(|| Error::MalformedLts(format!("{what} state {s} out of range")))? = true;
        }
        Ok(v)
    }

    fn automaton(&self, ts: &Taskset) -> Result<Lts<StateId>> {
        if self.tasks != ts.len() {
            return Err(Error::MalformedLts(format!(
                "automaton is over {} tasks, taskset has {}",
                self.tasks,
                ts.len()
            )));
        }
        let lts = self.to_lts()?;
        lts.validate_deterministic()?;
        if !lts.is_input_enabled() {
            return Err(Error::MalformedLts("automaton is not input-enabled".into()));
        }
        Ok(lts)
    }
}

/// Loads a scheduler LTS; its first reward entry is the earned value.
pub fn load_scheduler_lts(path: &Path) -> Result<Lts<StateId>> {
    LtsFile::parse(&read(path)?)?.to_lts()
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum SafetyEntry {
    WorkloadWindow { k: u32, cap: u64 },
    Sporadic { task: usize, p: u32 },
    Periodic { task: usize, p: u32 },
    Lts { lts: LtsFile },
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum LivenessEntry {
    InfOften { task: usize },
    Lts { lts: LtsFile },
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum LimitAvgEntry {
    MeanWorkload { lambda: String },
    Lts { lts: LtsFile },
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConstraintsFile {
    #[serde(default)]
    safety: Vec<SafetyEntry>,
    #[serde(default)]
    liveness: Vec<LivenessEntry>,
    #[serde(default)]
    limitavg: Vec<LimitAvgEntry>,
}

fn task_index(task: usize, ts: &Taskset) -> Result<usize> {
    if task == 0 || task > ts.len() {
        return Err(Error::Parse(format!(
            "task {task} out of range 1..={}",
            ts.len()
        )));
    }
    Ok(task - 1)
}

pub fn parse_constraints(text: &str, ts: &Taskset) -> Result<ConstraintSet> {
    let f: ConstraintsFile = serde_json::from_str(text).map_err(parse_err)?;
    let mut set = ConstraintSet::default();
    for e in f.safety {
        set.safety.push(match e {
            SafetyEntry::WorkloadWindow { k, cap } => workload_window_safety(k, cap, ts)?,
            SafetyEntry::Sporadic { task, p } => sporadicity_safety(task_index(task, ts)?, p, ts)?,
            SafetyEntry::Periodic { task, p } => periodicity_safety(task_index(task, ts)?, p, ts)?,
            SafetyEntry::Lts { lts } => SafetyLts {
                reject: lts.flags(&lts.reject, "reject")?,
                lts: lts.automaton(ts)?,
            },
        });
    }
    for e in f.liveness {
        set.liveness.push(match e {
            LivenessEntry::InfOften { task } => infinitely_often_liveness(task_index(task, ts)?, ts)?,
            LivenessEntry::Lts { lts } => LivenessLts {
                accept: lts.flags(&lts.accept, "accept")?,
                lts: lts.automaton(ts)?,
            },
        });
    }
    for e in f.limitavg {
        set.limitavg.push(match e {
            LimitAvgEntry::MeanWorkload { lambda } => mean_workload_limitavg(ts, parse_rational(&lambda)?)?,
            LimitAvgEntry::Lts { lts } => {
                let threshold = lts
                    .threshold
                    .iter()
                    .map(|s| parse_rational(s))
                    .collect::<Result<Vec<_>>>()?;
                LimitAvgLts::new(lts.automaton(ts)?, threshold)?
            }
        });
    }
    Ok(set)
}

pub fn load_constraints(path: &Path, ts: &Taskset) -> Result<ConstraintSet> {
    parse_constraints(&read(path)?, ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{competitive_ratio, AnalysisOptions, SchedulerSpec};
    use crate::schedulers::BuiltinPolicy;

    #[test]
    fn taskset_round_trip() {
        let ts = parse_taskset(r#"{"tasks":[{"c":2,"d":3,"v":5},{"c":2,"d":2,"v":1}]}"#).unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts.task(0).value, 5);
        assert!(matches!(parse_taskset(r#"{"tasks":[{"c":2}]}"#), Err(Error::Parse(_))));
        assert!(matches!(parse_taskset(r#"{"tasks":[]}"#), Err(Error::EmptyTaskset)));
    }

    #[test]
    fn rationals_and_labels() {
        assert_eq!(parse_rational("6/4").unwrap(), BigRational::new(3.into(), 2.into()));
        assert_eq!(parse_rational("2").unwrap(), BigRational::from_integer(2.into()));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        for l in [ScheduleLabel::Idle, ScheduleLabel::Run { task: 1, age: 3 }] {
            assert_eq!(parse_label(&l.to_string()).unwrap(), l);
        }
        assert!(parse_label("(t0,1)").is_err());
    }

    #[test]
    fn constraints_file() {
        let ts = parse_taskset(r#"{"tasks":[{"c":2,"d":3,"v":5},{"c":2,"d":2,"v":1}]}"#).unwrap();
        let c = parse_constraints(
            r#"{"safety":[{"type":"workload_window","k":2,"cap":2},{"type":"sporadic","task":1,"p":3}],
                "liveness":[{"type":"inf_often","task":2}],
                "limitavg":[{"type":"mean_workload","lambda":"3/2"}]}"#,
            &ts,
        )
        .unwrap();
        assert_eq!((c.safety.len(), c.liveness.len(), c.limitavg.len()), (2, 1, 1));
        assert!(parse_constraints(r#"{"liveness":[{"type":"inf_often","task":3}]}"#, &ts).is_err());
        assert!(parse_constraints(r#"{"safety":[{"type":"nope"}]}"#, &ts).is_err());
    }

    /// EDF on a one-task set written out by hand agrees with the built-in.
    #[test]
    fn custom_scheduler_matches_builtin() {
        let ts = parse_taskset(r#"{"tasks":[{"c":1,"d":1,"v":1}]}"#).unwrap();
        let f = LtsFile::parse(
            r#"{"tasks":1,"states":1,"initial":0,
                "transitions":[[0,[],0,"idle",0],[0,[1],0,"(t1,0)",1]]}"#,
        )
        .unwrap();
        let custom = SchedulerSpec::Custom(f.to_lts().unwrap());
        let opts = AnalysisOptions::default();
        let none = ConstraintSet::default();
        let a = competitive_ratio(&ts, &custom, &none, &opts).unwrap();
        let b = competitive_ratio(&ts, &SchedulerSpec::Builtin(BuiltinPolicy::Edf), &none, &opts).unwrap();
        assert_eq!(a.report.cr, b.report.cr);
    }

    #[test]
    fn custom_safety_automaton() {
        let ts = parse_taskset(r#"{"tasks":[{"c":1,"d":1,"v":1}]}"#).unwrap();
        // Reject on the first release.
        let c = parse_constraints(
            r#"{"safety":[{"type":"lts","lts":{"tasks":1,"states":2,"initial":0,"reject":[1],
                "transitions":[[0,[],0,null,[]],[0,[1],1,null,[]],[1,[],1,null,[]],[1,[1],1,null,[]]]}}]}"#,
            &ts,
        )
        .unwrap();
        assert_eq!(c.safety[0].reject, vec![false, true]);
        let bad = parse_constraints(
            r#"{"safety":[{"type":"lts","lts":{"tasks":1,"states":1,"initial":0,
                "transitions":[[0,[],0,null,[]]]}}]}"#,
            &ts,
        );
        assert!(matches!(bad, Err(Error::MalformedLts(_))));
    }
}
