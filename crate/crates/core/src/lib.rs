//! Exact competitive-ratio analysis of on-line schedulers for firm-deadline
//! tasksets on a single processor.

pub mod analysis;
pub mod clairvoyant;
pub mod cli;
pub mod constraints;
pub mod error;
pub mod graph;
pub mod io;
pub mod lp;
pub mod lts;
pub mod model;
pub mod par;
pub mod schedulers;

pub use error::{Error, Result};
pub use model::{JobRelease, PendingMatrix, ScheduleLabel, Task, Taskset};
pub use par::Exec;
