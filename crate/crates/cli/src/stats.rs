//! Running mean and standard deviation of round times.

use std::time::Duration;

/// Welford accumulator over samples in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RoundStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RoundStats {
    pub fn push_ms(&mut self, ms: f64) {
        self.count += 1;
        let d = ms - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (ms - self.mean);
    }

    pub fn push(&mut self, d: Duration) {
        self.push_ms(d.as_secs_f64() * 1e3);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// ms; 0 when empty.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation in ms; 0 with fewer than two samples.
    pub fn sd(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).sqrt()
        }
    }

    /// Pools two accumulators as if every sample had been pushed into one.
    pub fn merge(&self, other: &RoundStats) -> RoundStats {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.count as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.count as f64 * other.count as f64) / n as f64;
        RoundStats { count: n, mean, m2 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn of(xs: &[f64]) -> RoundStats {
        let mut s = RoundStats::default();
        xs.iter().for_each(|&x| s.push_ms(x));
        s
    }

    #[test]
    fn matches_two_pass_formula() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        let s = of(&xs);
        assert_eq!(s.mean(), 5.0);
        let var = xs.iter().map(|x| (x - 5.0) * (x - 5.0)).sum::<f64>() / 7.0;
        assert!((s.sd() - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn merge_equals_pooled() {
        let (a, b) = ([1.0, 3.0, 8.0], [2.0, 2.5, 10.0, -1.0]);
        let all: Vec<f64> = a.iter().chain(&b).copied().collect();
        let m = of(&a).merge(&of(&b));
        let p = of(&all);
        assert_eq!(m.count(), 7);
        assert!((m.mean() - p.mean()).abs() < 1e-12);
        assert!((m.sd() - p.sd()).abs() < 1e-12);
        assert_eq!(RoundStats::default().merge(&of(&a)), of(&a));
    }

    #[test]
    fn degenerate_cases() {
        assert_eq!(RoundStats::default().sd(), 0.0);
        assert_eq!(of(&[3.0]).sd(), 0.0);
    }
}
