//! Ring-buffer delay lines on the time-step grid.

/// Stores one sample per step and returns exact lagged samples; lags reaching
/// before the first sample return the zero history.
#[derive(Debug, Clone)]
pub struct DelayBuffer<T: Clone> {
    samples: Vec<T>,
    zero: T,
    /// Number of samples pushed so far.
    len: usize,
}

impl<T: Clone> DelayBuffer<T> {
    /// Buffer able to answer lags up to `max_lag` steps.
    pub fn new(max_lag: usize, zero: T) -> Self {
        Self { samples: vec![zero.clone(); max_lag + 1], zero, len: 0 }
    }

    pub fn max_lag(&self) -> usize {
        self.samples.len() - 1
    }

    /// Appends the sample of the current step.
    pub fn push(&mut self, v: T) {
        let cap = self.samples.len();
        self.samples[self.len % cap] = v;
        self.len += 1;
    }

    /// Sample pushed `lag` steps before the most recent one (lag 0 = latest).
    pub fn lagged(&self, lag: usize) -> &T {
        assert!(lag <= self.max_lag(), "lag {lag} exceeds buffer capacity {}", self.max_lag());
        if lag >= self.len {
            return &self.zero;
        }
        let cap = self.samples.len();
        &self.samples[(self.len - 1 - lag) % cap]
    }
}
