use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Constraint;

/// Heap entry ordered so that the *worst* candidate compares greatest:
/// lower score first, then larger id.
#[derive(Debug, Clone, Copy)]
struct Entry {
    score: f64,
    id: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.id.cmp(&other.id))
    }
}

/// Running top-`B` selection with the worst kept element at the root.
///
/// "Better" means a higher score, or an equal score with a smaller id, so
/// the final set does not depend on insertion order.
#[derive(Debug, Clone)]
pub struct TopB {
    capacity: usize,
    heap: BinaryHeap<Entry>,
}

impl TopB {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            heap: BinaryHeap::with_capacity(capacity + 1),
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() >= self.capacity
    }

    /// Smallest kept score once the heap is full; below it nothing can enter.
    pub fn threshold(&self) -> Option<f64> {
        if self.is_full() {
            self.heap.peek().map(|e| e.score)
        } else {
            None
        }
    }

    pub fn push(&mut self, id: usize, score: f64) {
        if self.capacity == 0 {
            return;
        }
        let entry = Entry { score, id };
        if self.heap.len() < self.capacity {
            self.heap.push(entry);
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if entry < *worst {
                *worst = entry;
            }
        }
    }

    /// Kept `(id, score)` pairs, best first.
    pub fn into_sorted(self) -> Vec<(usize, f64)> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|e| (e.id, e.score))
            .collect()
    }

    pub fn into_constraint(self) -> Constraint {
        let budget = self.capacity;
        Constraint::new(self.heap.into_iter().map(|e| e.id).collect(), budget)
    }
}

/// Ids of the `B` largest scores (ties to the smaller id).
pub fn select_top_b(scores: &[f64], budget: usize) -> Constraint {
    let mut top = TopB::new(budget);
    for (j, &s) in scores.iter().enumerate() {
        top.push(j, s);
    }
    top.into_constraint()
}
