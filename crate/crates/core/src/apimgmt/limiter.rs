use std::collections::VecDeque;

use super::RateLimit;

/// Admits at most `max_requests` in any half-open window
/// `(now - window_us, now]`. Rejected requests are not counted.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    limit: RateLimit,
    admitted: VecDeque<u64>,
}

impl SlidingWindow {
    pub fn new(limit: RateLimit) -> Self {
        SlidingWindow {
            limit,
            admitted: VecDeque::new(),
        }
    }

    /// `now_us` must not decrease between calls.
    pub fn try_admit(&mut self, now_us: u64) -> bool {
        while let Some(&t) = self.admitted.front() {
            if t + self.limit.window_us <= now_us {
                self.admitted.pop_front();
            } else {
                break;
            }
        }
        if self.admitted.len() < self.limit.max_requests as usize {
            self.admitted.push_back(now_us);
            true
        } else {
            false
        }
    }
}

/// Largest number of the sorted `admitted` instants that fall in one
/// window of length `window_us`.
pub fn replay_max_in_window(admitted: &[u64], window_us: u64) -> usize {
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..admitted.len() {
        while admitted[lo] + window_us <= admitted[hi] {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}
