//! Order-fixed reductions for ensemble statistics.

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Standard error of the mean (sample standard deviation over sqrt(n)).
    pub stderr: f64,
    pub count: usize,
}

/// Mean and standard error, reduced in slice order.
pub fn mean_stderr(values: &[f64]) -> MeanEstimate {
    let n = values.len();
    if n == 0 {
        return MeanEstimate {
            mean: f64::NAN,
            stderr: f64::NAN,
            count: 0,
        };
    }
    let mut acc = CompensatedSum::new();
    values.iter().for_each(|&v| acc.add(v));
    let mean = acc.total() / n as f64;
    if n == 1 {
        return MeanEstimate {
            mean,
            stderr: 0.0,
            count: 1,
        };
    }
    let mut sq = CompensatedSum::new();
    values.iter().for_each(|&v| sq.add((v - mean) * (v - mean)));
    let variance = sq.total() / (n - 1) as f64;
    MeanEstimate {
        mean,
        stderr: (variance / n as f64).sqrt(),
        count: n,
    }
}

/// Binomial standard error of a proportion.
pub fn proportion_stderr(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Robust verdict over many one-sided comparisons: at least 99% of cells
/// pass and no violation exceeds `hard_limit` standard errors.
pub fn robust_verdict(cells: impl IntoIterator<Item = (bool, f64)>, hard_limit: f64) -> bool {
    let mut total = 0usize;
    let mut passed = 0usize;
    let mut worst = 0.0f64;
    for (ok, violation_in_se) in cells {
        total += 1;
        if ok {
            passed += 1;
        } else {
            worst = worst.max(violation_in_se);
        }
    }
    total == 0 || (passed as f64 >= 0.99 * total as f64 && worst <= hard_limit)
}
