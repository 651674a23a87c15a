use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One cache level. Replacement is always LRU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    /// Bytes.
    pub capacity: usize,
    pub associativity: usize,
}

impl CacheConfig {
    pub fn n_sets(&self, line_size: usize) -> usize {
        self.capacity / (line_size * self.associativity)
    }
}

/// Cost weights in abstract cycles. Only their ratios matter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latencies {
    pub l1_hit: f64,
    pub l2_hit: f64,
    pub memory: f64,
}

/// Cores with private L1s, grouped `group_size` to a shared L2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub cores: usize,
    pub group_size: usize,
    pub l1: CacheConfig,
    pub l2: CacheConfig,
    pub line_size: usize,
    pub latencies: Latencies,
    /// L2-level accesses a thread issues before the next thread in its
    /// group gets the shared cache.
    pub quantum: usize,
}

impl Default for Topology {
    fn default() -> Self {
        Topology::ft2000plus()
    }
}

impl Topology {
    /// 64 cores, 32KB private L1 per core, 2MB L2 per group of four.
    pub fn ft2000plus() -> Self {
        Topology {
            cores: 64,
            group_size: 4,
            l1: CacheConfig {
                capacity: 32 << 10,
                associativity: 4,
            },
            l2: CacheConfig {
                capacity: 2 << 20,
                associativity: 16,
            },
            line_size: 64,
            latencies: Latencies {
                l1_hit: 1.0,
                l2_hit: 10.0,
                memory: 100.0,
            },
            quantum: 64,
        }
    }

    /// Same shape as [`Topology::ft2000plus`] with 1KB L1s and 64KB L2s, so
    /// matrices of a few thousand rows already contend for the shared cache.
    pub fn desk() -> Self {
        Topology {
            l1: CacheConfig {
                capacity: 1 << 10,
                associativity: 4,
            },
            l2: CacheConfig {
                capacity: 64 << 10,
                associativity: 16,
            },
            ..Topology::ft2000plus()
        }
    }

    pub fn n_groups(&self) -> usize {
        self.cores / self.group_size
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.cores == 0 || self.group_size == 0 || !self.cores.is_multiple_of(self.group_size) {
            return bad(format!(
                "group size {} must divide {} cores",
                self.group_size, self.cores
            ));
        }
        if !self.line_size.is_power_of_two() {
            return bad(format!(
                "line size {} is not a power of two",
                self.line_size
            ));
        }
        for (name, c) in [("l1", self.l1), ("l2", self.l2)] {
            let unit = self.line_size * c.associativity;
            if c.associativity == 0 || c.capacity == 0 || c.capacity % unit != 0 {
                return bad(format!(
                    "{name}: capacity {} is not a positive multiple of line size x associativity ({unit})",
                    c.capacity
                ));
            }
        }
        if self.quantum == 0 {
            return bad("quantum must be positive".into());
        }
        Ok(())
    }

    /// Parses the `key = value` config format. Keys: `cores`, `group_size`,
    /// `l1_kb`, `l2_kb`, `assoc_l1`, `assoc_l2`, `line_b`, `lat_l1`,
    /// `lat_l2`, `lat_mem`, and optionally `quantum`. Missing keys keep the
    /// FT-2000+ defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let file: TopologyFile =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let d = Topology::ft2000plus();
        let t = Topology {
            cores: file.cores.unwrap_or(d.cores),
            group_size: file.group_size.unwrap_or(d.group_size),
            l1: CacheConfig {
                capacity: file.l1_kb.map_or(d.l1.capacity, |kb| kb << 10),
                associativity: file.assoc_l1.unwrap_or(d.l1.associativity),
            },
            l2: CacheConfig {
                capacity: file.l2_kb.map_or(d.l2.capacity, |kb| kb << 10),
                associativity: file.assoc_l2.unwrap_or(d.l2.associativity),
            },
            line_size: file.line_b.unwrap_or(d.line_size),
            latencies: Latencies {
                l1_hit: file.lat_l1.unwrap_or(d.latencies.l1_hit),
                l2_hit: file.lat_l2.unwrap_or(d.latencies.l2_hit),
                memory: file.lat_mem.unwrap_or(d.latencies.memory),
            },
            quantum: file.quantum.unwrap_or(d.quantum),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_str(&text)
    }

    pub fn to_config_string(&self) -> String {
        format!(
            "cores = {}\ngroup_size = {}\nl1_kb = {}\nl2_kb = {}\nassoc_l1 = {}\nassoc_l2 = {}\n\
             line_b = {}\nlat_l1 = {:?}\nlat_l2 = {:?}\nlat_mem = {:?}\nquantum = {}\n",
            self.cores,
            self.group_size,
            self.l1.capacity >> 10,
            self.l2.capacity >> 10,
            self.l1.associativity,
            self.l2.associativity,
            self.line_size,
            self.latencies.l1_hit,
            self.latencies.l2_hit,
            self.latencies.memory,
            self.quantum
        )
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    cores: Option<usize>,
    group_size: Option<usize>,
    l1_kb: Option<usize>,
    l2_kb: Option<usize>,
    assoc_l1: Option<usize>,
    assoc_l2: Option<usize>,
    line_b: Option<usize>,
    lat_l1: Option<f64>,
    lat_l2: Option<f64>,
    lat_mem: Option<f64>,
    quantum: Option<usize>,
}
