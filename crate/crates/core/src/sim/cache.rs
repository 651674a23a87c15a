/// A set-associative LRU cache over line addresses, write-allocate and
/// write-back.
#[derive(Debug, Clone)]
pub struct Cache {
    ways: usize,
    // per set, most recently used first: (line address, dirty)
    sets: Vec<Vec<(u64, bool)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub hit: bool,
    /// A dirty line was evicted to make room.
    pub writeback: bool,
}

impl Cache {
    pub fn new(n_sets: usize, ways: usize) -> Self {
        assert!(
            n_sets > 0 && ways > 0,
            "cache needs at least one set and one way"
        );
        Cache {
            ways,
            sets: vec![Vec::with_capacity(ways); n_sets],
        }
    }

    pub fn n_sets(&self) -> usize {
        self.sets.len()
    }

    pub fn ways(&self) -> usize {
        self.ways
    }

    pub fn access(&mut self, line: u64, write: bool) -> Outcome {
        let n_sets = self.sets.len() as u64;
        let set = &mut self.sets[(line % n_sets) as usize];
        if let Some(pos) = set.iter().position(|&(l, _)| l == line) {
            let (_, dirty) = set.remove(pos);
            set.insert(0, (line, dirty || write));
            return Outcome {
                hit: true,
                writeback: false,
            };
        }
        let writeback = if set.len() == self.ways {
            set.pop().is_some_and(|(_, dirty)| dirty)
        } else {
            false
        };
        set.insert(0, (line, write));
        Outcome {
            hit: false,
            writeback,
        }
    }

    pub fn contains(&self, line: u64) -> bool {
        let set = &self.sets[(line % self.sets.len() as u64) as usize];
        set.iter().any(|&(l, _)| l == line)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_way_eviction() {
        // one set, two ways: A B C A -> the second A was evicted by C
        let mut c = Cache::new(1, 2);
        let hits: Vec<bool> = [1, 2, 3, 1]
            .iter()
            .map(|&l| c.access(l, false).hit)
            .collect();
        assert_eq!(hits, vec![false; 4]);
    }

    #[test]
    fn lru_refresh_on_hit() {
        let mut c = Cache::new(1, 2);
        c.access(1, false);
        c.access(2, false);
        assert!(c.access(1, false).hit);
        c.access(3, false); // evicts 2
        assert!(c.contains(1) && !c.contains(2));
    }

    #[test]
    fn dirty_eviction_reports_writeback() {
        let mut c = Cache::new(1, 1);
        c.access(5, true);
        let out = c.access(6, false);
        assert!(!out.hit && out.writeback);
        assert!(!c.access(7, false).writeback);
    }

    #[test]
    fn sets_are_independent() {
        let mut c = Cache::new(2, 1);
        c.access(0, false);
        c.access(1, false);
        assert!(c.access(0, false).hit);
        assert!(c.access(1, false).hit);
    }
}
