use std::collections::VecDeque;

use crate::graph::{State, Value};

/// Bounded write history of a chain: after `t` single-variable writes,
/// `read(i, d)` returns the value variable `i` had at time `t - d`, for any
/// `d <= min(t, window)`.
///
/// Stored sparsely: one (time, value) log per variable covering the window,
/// so a step costs O(1) amortized regardless of the variable count.
#[derive(Debug, Clone)]
pub struct StateHistory {
    current: Vec<Value>,
    t: u64,
    window: u64,
    /// Per-variable write log, times ascending; the first entry is always
    /// old enough to anchor reads at the window boundary.
    logs: Vec<Vec<(u64, Value)>>,
    /// Write times and variables inside the window, for pruning.
    recent: VecDeque<(u64, u32)>,
}

impl StateHistory {
    pub fn new(initial: &State, window: u64) -> Self {
        let n = initial.values.len();
        Self {
            current: initial.values.clone(),
            t: 0,
            window,
            logs: (0..n).map(|i| vec![(0, initial.values[i])]).collect(),
            recent: VecDeque::new(),
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn current(&self) -> &[Value] {
        &self.current
    }

    /// Value of variable `i` exactly `delay` writes ago.
    pub fn read(&self, i: usize, delay: u64) -> Value {
        debug_assert!(delay <= self.t.min(self.window));
        if delay == 0 {
            return self.current[i];
        }
        let target = self.t - delay;
        let log = &self.logs[i];
        // last entry with time <= target
        match log.binary_search_by(|&(time, _)| time.cmp(&target)) {
            Ok(k) => log[k].1,
            Err(k) => {
                debug_assert!(k > 0, "log for {i} lost its window anchor");
                log[k - 1].1
            }
        }
    }

    /// Records one write, advancing time to `t + 1`.
    pub fn write(&mut self, i: usize, value: Value) {
        self.t += 1;
        self.current[i] = value;
        self.logs[i].push((self.t, value));
        self.recent.push_back((self.t, i as u32));
        // prune writes that fell out of the window, keeping one anchor
        // entry per variable at or before t - window
        while let Some(&(time, var)) = self.recent.front() {
            if time + self.window >= self.t {
                break;
            }
            self.recent.pop_front();
            let log = &mut self.logs[var as usize];
            let boundary = self.t - self.window;
            while log.len() > 1 && log[1].0 <= boundary {
                log.remove(0);
            }
        }
    }
}
