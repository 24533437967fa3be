//! Tail averages of iterate sequences.
//!
//! Sums are compensated (Neumaier) and split into segments at power-of-two
//! iterate indices, `[2^k, 2^{k+1})`. Fixed burn-in and doubling burn-in
//! both fold the same segments in the same order, which is what makes
//! their outputs bitwise equal when the burn-in times agree.

/// Component-wise compensated sum.
#[derive(Clone, Debug, PartialEq)]
pub struct CompensatedSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = if a.abs() >= b.abs() {
        (a - s) + b
    } else {
        (b - s) + a
    };
    (s, err)
}

impl CompensatedSum {
    pub fn zeros(dim: usize) -> Self {
        Self {
            sum: vec![0.0; dim],
            comp: vec![0.0; dim],
        }
    }

    pub fn add(&mut self, x: &[f64]) {
        for ((s, c), &v) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(x) {
            let (t, err) = two_sum(*s, v);
            *s = t;
            *c += err;
        }
    }

    /// `self ⊕ other`. Merging into an all-zero sum reproduces `other`
    /// exactly.
    pub fn merged(&self, other: &CompensatedSum) -> CompensatedSum {
        let mut out = self.clone();
        for i in 0..out.sum.len() {
            let (t, err) = two_sum(self.sum[i], other.sum[i]);
            out.sum[i] = t;
            out.comp[i] = self.comp[i] + (other.comp[i] + err);
        }
        out
    }

    pub fn reset(&mut self) {
        self.sum.iter_mut().for_each(|v| *v = 0.0);
        self.comp.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `(sum + compensation) / count`
    pub fn mean(&self, count: u64) -> Vec<f64> {
        let n = count as f64;
        self.sum
            .iter()
            .zip(&self.comp)
            .map(|(s, c)| (s + c) / n)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AveragingMode {
    /// Average iterates `burn_in..` onward.
    FixedBurnIn(u64),
    /// Burn-in `2^{⌊log₂ t⌋ − 1}` that tracks the current final time `t`;
    /// keeps two running sums.
    Doubling,
}

/// Burn-in used by [`AveragingMode::Doubling`] at final time `t >= 2`.
pub fn doubling_burn_in(t: u64) -> u64 {
    assert!(t >= 2, "doubling burn-in needs t >= 2");
    1u64 << (t.ilog2() - 1)
}

/// Streaming tail average. Iterates are pushed in order `x_0, x_1, ...`;
/// after pushing `x_{t−1}` the estimate is the tail average at final
/// time `t`.
#[derive(Clone, Debug)]
pub struct TailAverager {
    mode: AveragingMode,
    // fixed: all finished segments; doubling: the last finished segment
    older: CompensatedSum,
    current: CompensatedSum,
    pushed: u64,
}

impl TailAverager {
    pub fn new(mode: AveragingMode, dim: usize) -> Self {
        Self {
            mode,
            older: CompensatedSum::zeros(dim),
            current: CompensatedSum::zeros(dim),
            pushed: 0,
        }
    }

    pub fn mode(&self) -> AveragingMode {
        self.mode
    }

    /// Number of iterates pushed so far, i.e. the current final time.
    pub fn final_time(&self) -> u64 {
        self.pushed
    }

    pub fn burn_in(&self) -> Option<u64> {
        match self.mode {
            AveragingMode::FixedBurnIn(b) => Some(b),
            AveragingMode::Doubling if self.pushed >= 2 => Some(doubling_burn_in(self.pushed)),
            AveragingMode::Doubling => None,
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        let s = self.pushed;
        self.pushed += 1;
        let segment_end = self.pushed.is_power_of_two();
        match self.mode {
            AveragingMode::FixedBurnIn(b) => {
                if s >= b {
                    self.current.add(x);
                }
                if segment_end && s >= b {
                    self.older = self.older.merged(&self.current);
                    self.current.reset();
                }
            }
            AveragingMode::Doubling => {
                self.current.add(x);
                if segment_end {
                    std::mem::swap(&mut self.older, &mut self.current);
                    self.current.reset();
                }
            }
        }
    }

    /// Tail average at the current final time, `None` while the tail is
    /// empty.
    pub fn estimate(&self) -> Option<Vec<f64>> {
        let burn_in = self.burn_in()?;
        if self.pushed <= burn_in {
            return None;
        }
        Some(
            self.older
                .merged(&self.current)
                .mean(self.pushed - burn_in),
        )
    }
}
