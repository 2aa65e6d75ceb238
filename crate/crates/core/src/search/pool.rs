use super::score::Candidate;

/// Fixed-capacity set of the best distinct sequences, kept in descending score
/// order. At equal scores the earlier-discovered candidate ranks first.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    capacity: usize,
    /// `(discovery index, candidate)`.
    entries: Vec<(u64, Candidate)>,
    discovered: u64,
}

impl CandidatePool {
    pub fn new(capacity: usize) -> Self {
        CandidatePool {
            capacity: capacity.max(1),
            entries: Vec::new(),
            discovered: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn candidates(&self) -> impl Iterator<Item = &Candidate> {
        self.entries.iter().map(|(_, c)| c)
    }

    pub fn best(&self) -> Option<&Candidate> {
        self.entries.first().map(|(_, c)| c)
    }

    pub fn min_score(&self) -> Option<f64> {
        self.entries.last().map(|(_, c)| c.score)
    }

    /// Minimum over all `capacity` slots, an empty slot counting as score 0.
    /// Never decreases under [`CandidatePool::insert`] for scores in `[0, 1]`.
    pub fn slot_min_score(&self) -> f64 {
        if self.is_full() {
            self.min_score().unwrap_or(0.0)
        } else {
            0.0
        }
    }

    fn sort(&mut self) {
        self.entries
            .sort_by(|(ia, a), (ib, b)| b.score.total_cmp(&a.score).then(ia.cmp(ib)));
    }

    /// Inserts `candidate`, returning whether the pool changed.
    ///
    /// A sequence already present keeps the higher of its two scores. Otherwise the
    /// candidate enters when there is room or when it beats the current minimum,
    /// which is then evicted.
    pub fn insert(&mut self, candidate: Candidate) -> bool {
        let order = self.discovered;
        self.discovered += 1;
        if let Some(pos) = self
            .entries
            .iter()
            .position(|(_, c)| c.sequence == candidate.sequence)
        {
            if candidate.score > self.entries[pos].1.score {
                self.entries[pos].1 = candidate;
                self.sort();
                return true;
            }
            return false;
        }
        if self.is_full() {
            if candidate.score <= self.min_score().unwrap_or(f64::NEG_INFINITY) {
                return false;
            }
            self.entries.pop();
        }
        self.entries.push((order, candidate));
        self.sort();
        true
    }
}
