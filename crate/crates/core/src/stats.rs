//! Binomial interval and binary mutual-information estimators.

use serde::{Deserialize, Serialize};

/// Two-sided 95% standard-normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// Wilson score interval for `successes` out of `trials`, clamped so that
/// `low <= successes / trials <= high`. Returns `(0, 1)` for zero trials.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Standard error of a binomial proportion `p` estimated from `n` samples.
pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Joint counts of two binary variables, `counts[x][y]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointCounts {
    pub counts: [[u64; 2]; 2],
}

impl JointCounts {
    pub fn add(&mut self, x: u8, y: u8) {
        self.counts[usize::from(x & 1)][usize::from(y & 1)] += 1;
    }

    pub fn merge(&mut self, other: &JointCounts) {
        for x in 0..2 {
            for y in 0..2 {
                self.counts[x][y] += other.counts[x][y];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn agreements(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    /// Plug-in estimate of I(X; Y) in bits; 0 when empty.
    pub fn mutual_information(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        let px = [
            (self.counts[0][0] + self.counts[0][1]) as f64 / n,
            (self.counts[1][0] + self.counts[1][1]) as f64 / n,
        ];
        let py = [
            (self.counts[0][0] + self.counts[1][0]) as f64 / n,
            (self.counts[0][1] + self.counts[1][1]) as f64 / n,
        ];
        let mut mi = 0.0;
        for (x, row) in self.counts.iter().enumerate() {
            for (y, &count) in row.iter().enumerate() {
                let pxy = count as f64 / n;
                if pxy > 0.0 {
                    mi += pxy * (pxy / (px[x] * py[y])).log2();
                }
            }
        }
        mi.max(0.0)
    }
}
