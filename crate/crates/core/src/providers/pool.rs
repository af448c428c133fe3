use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

/// Bounded-parallelism map that preserves input order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FanOut {
    pub max_in_flight: usize,
}

impl Default for FanOut {
    fn default() -> Self {
        Self { max_in_flight: 8 }
    }
}

impl FanOut {
    pub fn new(max_in_flight: usize) -> Self {
        Self {
            max_in_flight: max_in_flight.max(1),
        }
    }

    pub fn sequential() -> Self {
        Self::new(1)
    }

    /// Applies `f` to every item with at most `max_in_flight` calls running at
    /// once. Output position `i` holds `f(&items[i])`.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        let workers = self.max_in_flight.max(1).min(items.len());
        if workers <= 1 {
            return items.iter().map(f).collect();
        }

        let next = AtomicUsize::new(0);
        let mut chunks: Vec<Vec<(usize, R)>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    scope.spawn(|| {
                        let mut local = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            if i >= items.len() {
                                break;
                            }
                            local.push((i, f(&items[i])));
                        }
                        local
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fan-out worker panicked"))
                .collect()
        });

        let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
        for (i, r) in chunks.drain(..).flatten() {
            slots[i] = Some(r);
        }
        slots
            .into_iter()
            .map(|r| r.expect("every index is produced exactly once"))
            .collect()
    }
}
