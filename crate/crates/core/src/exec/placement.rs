use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// How threads map onto cores.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub enum Placement {
    /// Consecutive cores, filling one core-group before the next.
    #[default]
    Compact,
    /// One thread per core-group, so no two threads share an L2.
    Scatter,
    Explicit(Vec<usize>),
}

impl Placement {
    /// Core id for each of `n_threads` threads on a machine of `cores` cores
    /// grouped `group_size` to an L2.
    pub fn core_ids(
        &self,
        n_threads: usize,
        cores: usize,
        group_size: usize,
    ) -> Result<Vec<usize>> {
        if n_threads > cores {
            return Err(Error::Placement(format!(
                "{n_threads} threads on {cores} cores"
            )));
        }
        match self {
            Placement::Compact => Ok((0..n_threads).collect()),
            Placement::Scatter => {
                let groups = cores / group_size;
                if n_threads > groups {
                    return Err(Error::Placement(format!(
                        "scatter needs one core-group per thread; {n_threads} threads, {groups} groups"
                    )));
                }
                Ok((0..n_threads).map(|t| t * group_size).collect())
            }
            Placement::Explicit(ids) => {
                if ids.len() != n_threads {
                    return Err(Error::Placement(format!(
                        "{} core ids listed for {n_threads} threads",
                        ids.len()
                    )));
                }
                let mut seen = vec![false; cores];
                for &id in ids {
                    if id >= cores {
                        return Err(Error::Placement(format!("core {id} does not exist")));
                    }
                    if std::mem::replace(&mut seen[id], true) {
                        return Err(Error::Placement(format!("core {id} listed twice")));
                    }
                }
                Ok(ids.clone())
            }
        }
    }
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Placement::Compact => f.write_str("compact"),
            Placement::Scatter => f.write_str("scatter"),
            Placement::Explicit(ids) => {
                let ids: Vec<String> = ids.iter().map(usize::to_string).collect();
                write!(f, "cores:{}", ids.join(","))
            }
        }
    }
}

impl FromStr for Placement {
    type Err = Error;

    /// `compact`, `scatter`, or `cores:0,4,8,12`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compact" => Ok(Placement::Compact),
            "scatter" => Ok(Placement::Scatter),
            _ => {
                let list = s
                    .strip_prefix("cores:")
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown placement `{s}`")))?;
                let ids = list
                    .split(',')
                    .map(|t| t.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::InvalidParameter(format!("bad core list `{list}`: {e}")))?;
                Ok(Placement::Explicit(ids))
            }
        }
    }
}

impl Serialize for Placement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Placement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Pins the calling thread to `core`. Returns whether the host honoured it.
#[cfg(target_os = "linux")]
pub fn pin_current_thread(core: usize) -> bool {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    if core >= available || core >= libc::CPU_SETSIZE as usize {
        return false;
    }
    // SAFETY: cpu_set_t is plain data; zeroed is the empty set, and the
    // pointer passed to sched_setaffinity lives for the duration of the call.
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(core, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
    }
}

#[cfg(not(target_os = "linux"))]
pub fn pin_current_thread(_core: usize) -> bool {
    false
}
