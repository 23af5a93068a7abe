//! Scheduling domain: tasks, job releases, schedule labels and the pending-job
//! matrix that both the on-line scheduler LTSs and the reference simulator use.

use std::fmt;

use num_rational::BigRational;
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of tasks supported. Inputs are subsets of the taskset and
/// every analysis enumerates all `2^N` of them.
pub const MAX_TASKS: usize = 16;

/// A firm-deadline task: worst-case execution time, relative deadline and
/// utility, all in integer slots/units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Task {
    #[serde(rename = "c")]
    pub wcet: u32,
    #[serde(rename = "d")]
    pub deadline: u32,
    #[serde(rename = "v")]
    pub value: u64,
}

impl Task {
    pub fn new(wcet: u32, deadline: u32, value: u64) -> Self {
        Task {
            wcet,
            deadline,
            value,
        }
    }

    pub fn laxity(&self) -> i64 {
        self.deadline as i64 - self.wcet as i64
    }
}

/// Validated, ordered set of tasks. Position in the list is the static
/// priority (index 0 is the highest).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Taskset {
    tasks: Vec<Task>,
    d_max: u32,
    l_max: u32,
}

impl Taskset {
    /// Validates a raw task list and derives `D_max` and `L_max`.
    pub fn new(tasks: Vec<Task>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::EmptyTaskset);
        }
        if tasks.len() > MAX_TASKS {
            return Err(Error::TooManyTasks(tasks.len()));
        }
        for (i, t) in tasks.iter().enumerate() {
            if t.wcet == 0 || t.deadline == 0 || t.value == 0 {
                return Err(Error::ZeroField { task: i + 1 });
            }
            if t.deadline > 64 {
                return Err(Error::DeadlineTooLarge {
                    task: i + 1,
                    deadline: t.deadline,
                });
            }
        }
        let d_max = tasks.iter().map(|t| t.deadline).max().unwrap_or(0);
        let l_max = tasks.iter().map(|t| t.laxity().max(0) as u32).max().unwrap_or(0);
        Ok(Taskset {
            tasks,
            d_max,
            l_max,
        })
    }

    /// Convenience constructor from `(C, D, V)` triples.
    pub fn from_triples(triples: &[(u32, u32, u64)]) -> Result<Self> {
        Self::new(
            triples
                .iter()
                .map(|&(c, d, v)| Task::new(c, d, v))
                .collect(),
        )
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, i: usize) -> &Task {
        &self.tasks[i]
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    /// Number of distinct release sets, `2^N`.
    pub fn num_inputs(&self) -> usize {
        1usize << self.tasks.len()
    }

    /// Total execution demand of a release set.
    pub fn workload(&self, released: JobRelease) -> u64 {
        released.iter().map(|i| self.tasks[i].wcet as u64).sum()
    }

    /// Maximum over minimum value density, `max (V_i/C_i) / (V_j/C_j)`.
    pub fn importance_ratio(&self) -> BigRational {
        let density =
            |t: &Task| BigRational::new(BigInt::from(t.value), BigInt::from(t.wcet));
        let mut it = self.tasks.iter().map(density);
        let first = it.next().expect("taskset is non-empty");
        let (lo, hi) = it.fold((first.clone(), first), |(lo, hi), d| {
            (if d < lo { d.clone() } else { lo }, if d > hi { d } else { hi })
        });
        hi / lo
    }
}

/// Set of tasks releasing a job in one slot, as a bitmask over task indices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JobRelease(pub u32);

impl JobRelease {
    pub const EMPTY: JobRelease = JobRelease(0);

    pub fn from_tasks<I: IntoIterator<Item = usize>>(tasks: I) -> Self {
        JobRelease(tasks.into_iter().fold(0, |m, i| m | (1 << i)))
    }

    pub fn contains(&self, task: usize) -> bool {
        self.0 & (1 << task) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    /// Task indices in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> {
        let mask = self.0;
        (0..32).filter(move |i| mask & (1 << i) != 0)
    }

    /// All release sets over `n` tasks, in mask order.
    pub fn all(n: usize) -> impl Iterator<Item = JobRelease> {
        (0..(1u32 << n)).map(JobRelease)
    }
}

impl fmt::Display for JobRelease {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "t{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

/// What a scheduler runs in one slot: nothing, or the job of `task` that was
/// released `age` slots ago.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScheduleLabel {
    Idle,
    Run { task: usize, age: u32 },
}

impl fmt::Display for ScheduleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleLabel::Idle => write!(f, "idle"),
            ScheduleLabel::Run { task, age } => write!(f, "(t{},{})", task + 1, age),
        }
    }
}

/// Remaining execution time of every pending job, indexed by task and age.
///
/// Stored as an `N x D_max` row-major grid over ages `0..D_max`. Between slots
/// the age-0 column is always empty: jobs are inserted there on release and
/// shifted to age 1 at the end of the slot.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PendingMatrix {
    cols: usize,
    rem: Vec<u16>,
}

impl PendingMatrix {
    pub fn empty(taskset: &Taskset) -> Self {
        let cols = taskset.d_max() as usize;
        PendingMatrix {
            cols,
            rem: vec![0; taskset.len() * cols],
        }
    }

    pub fn rows(&self) -> usize {
        if self.cols == 0 {
            0
        } else {
            self.rem.len() / self.cols
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, task: usize, age: usize) -> u16 {
        self.rem[task * self.cols + age]
    }

    pub fn set(&mut self, task: usize, age: usize, value: u16) {
        self.rem[task * self.cols + age] = value;
    }

    pub fn is_empty(&self) -> bool {
        self.rem.iter().all(|&r| r == 0)
    }

    /// Pending jobs as `(task, age, remaining)`, row-major.
    pub fn jobs(&self) -> impl Iterator<Item = (usize, u32, u16)> + '_ {
        self.rem.iter().enumerate().filter_map(move |(k, &r)| {
            (r > 0).then(|| (k / self.cols, (k % self.cols) as u32, r))
        })
    }

    /// Whether the job can still complete: remaining time fits in the slots
    /// left before its deadline (counting the current one).
    pub fn is_viable(&self, taskset: &Taskset, task: usize, age: u32) -> bool {
        let r = self.get(task, age as usize) as u32;
        let d = taskset.task(task).deadline;
        r > 0 && age < d && r <= d - age
    }

    /// Pending jobs that can still meet their deadline.
    pub fn viable_jobs<'a>(
        &'a self,
        taskset: &'a Taskset,
    ) -> impl Iterator<Item = (usize, u32, u16)> + 'a {
        self.jobs()
            .filter(move |&(i, j, _)| self.is_viable(taskset, i, j))
    }

    /// Inserts one job per released task at age 0.
    pub fn insert(&self, taskset: &Taskset, released: JobRelease) -> PendingMatrix {
        let mut m = self.clone();
        for i in released.iter() {
            m.set(i, 0, taskset.task(i).wcet as u16);
        }
        m
    }

    /// Removes jobs that can no longer meet their deadline.
    pub fn drop_doomed(&mut self, taskset: &Taskset) {
        for i in 0..self.rows() {
            for j in 0..self.cols {
                if self.get(i, j) > 0 && !self.is_viable(taskset, i, j as u32) {
                    self.set(i, j, 0);
                }
            }
        }
    }

    /// Ages every job by one slot, dropping those whose deadline has passed.
    fn shift(&mut self, taskset: &Taskset) {
        for i in 0..self.rows() {
            let d = taskset.task(i).deadline as usize;
            for j in (0..self.cols).rev() {
                let v = if j == 0 { 0 } else { self.get(i, j - 1) };
                self.set(i, j, if j < d { v } else { 0 });
            }
        }
    }

    /// Row-major dump, one row per task, columns for ages `1..D_max`.
    pub fn key_string(&self) -> String {
        let mut s = String::new();
        for i in 0..self.rows() {
            if i > 0 {
                s.push('|');
            }
            for j in 1..self.cols {
                if j > 1 {
                    s.push(',');
                }
                s.push_str(&self.get(i, j).to_string());
            }
        }
        s
    }
}

impl fmt::Display for PendingMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.key_string())
    }
}

/// Checks that `scheduled` refers to a live job of the already-inserted
/// matrix `inserted`.
pub fn check_schedule(
    inserted: &PendingMatrix,
    scheduled: ScheduleLabel,
    taskset: &Taskset,
) -> Result<()> {
    if let ScheduleLabel::Run { task, age } = scheduled {
        if task >= taskset.len() {
            return Err(Error::InvalidSchedule(format!("unknown task t{}", task + 1)));
        }
        if age >= taskset.task(task).deadline {
            return Err(Error::InvalidSchedule(format!(
                "job (t{},{}) is past its deadline",
                task + 1,
                age
            )));
        }
        if inserted.get(task, age as usize) == 0 {
            return Err(Error::InvalidSchedule(format!(
                "job (t{},{}) is not pending",
                task + 1,
                age
            )));
        }
    }
    Ok(())
}

/// One slot of execution: insert the released jobs, run `scheduled` for one
/// unit, then age everything by a slot. Returns the next matrix and the value
/// earned if the scheduled job completed.
pub fn step_matrix(
    state: &PendingMatrix,
    released: JobRelease,
    scheduled: ScheduleLabel,
    taskset: &Taskset,
) -> Result<(PendingMatrix, u64)> {
    let inserted = state.insert(taskset, released);
    step_inserted(inserted, scheduled, taskset)
}

/// Same as [`step_matrix`] for a matrix where the releases are already inserted.
pub fn step_inserted(
    mut inserted: PendingMatrix,
    scheduled: ScheduleLabel,
    taskset: &Taskset,
) -> Result<(PendingMatrix, u64)> {
    check_schedule(&inserted, scheduled, taskset)?;
    let mut reward = 0;
    if let ScheduleLabel::Run { task, age } = scheduled {
        let r = inserted.get(task, age as usize) - 1;
        inserted.set(task, age as usize, r);
        if r == 0 {
            reward = taskset.task(task).value;
        }
    }
    inserted.shift(taskset);
    Ok((inserted, reward))
}

/// Cumulated utility of a schedule prefix: value of every job completed by
/// its deadline. Fails if the schedule is not valid for the releases.
pub fn utility(
    schedule: &[ScheduleLabel],
    releases: &[JobRelease],
    taskset: &Taskset,
) -> Result<u64> {
    if schedule.len() > releases.len() {
        return Err(Error::InvalidSchedule(
            "schedule is longer than the job sequence".into(),
        ));
    }
    // Independent bookkeeping by absolute release slot rather than the
    // shifting matrix: done[i][slot] counts executed units.
    let n = taskset.len();
    let mut executed: Vec<Vec<u32>> = vec![vec![0; releases.len()]; n];
    let mut total = 0;
    for (slot, label) in schedule.iter().enumerate() {
        if let ScheduleLabel::Run { task, age } = *label {
            if task >= n || age as usize > slot {
                return Err(Error::InvalidSchedule(format!(
                    "slot {}: no job (t{},{})",
                    slot + 1,
                    task + 1,
                    age
                )));
            }
            let rel = slot - age as usize;
            let t = taskset.task(task);
            if !releases[rel].contains(task) {
                return Err(Error::InvalidSchedule(format!(
                    "slot {}: t{} was not released at slot {}",
                    slot + 1,
                    task + 1,
                    rel + 1
                )));
            }
            if age >= t.deadline {
                return Err(Error::InvalidSchedule(format!(
                    "slot {}: job (t{},{}) is past its deadline",
                    slot + 1,
                    task + 1,
                    age
                )));
            }
            if executed[task][rel] >= t.wcet {
                return Err(Error::InvalidSchedule(format!(
                    "slot {}: job (t{},{}) already completed",
                    slot + 1,
                    task + 1,
                    age
                )));
            }
            executed[task][rel] += 1;
            if executed[task][rel] == t.wcet {
                total += t.value;
            }
        }
    }
    Ok(total)
}
