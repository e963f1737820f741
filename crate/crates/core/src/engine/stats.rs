use serde::Serialize;

/// One-pass mean/variance accumulator (Welford updates, Chan merges).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Accumulator {
    pub count: u64,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub m2: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut a = Self::new();
        for &x in xs {
            a.push(x);
        }
        a
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        self.mean += d * nb / n as f64;
        self.m2 += other.m2 + d * d * na * nb / n as f64;
        self.count = n;
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Statistics of one level's samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelStats {
    pub k: usize,
    pub eps: f64,
    pub h: f64,
    /// `F(X^{k,f}) - F(X^{k-1,c})`, or `F(X^1)` at level 1.
    pub diff: Accumulator,
    /// `F(X^{k,f})` alone.
    pub fine: Accumulator,
    pub fine_steps: u64,
    pub coarse_steps: u64,
}

impl LevelStats {
    pub fn new(k: usize, eps: f64, h: f64) -> Self {
        Self {
            k,
            eps,
            h,
            diff: Accumulator::new(),
            fine: Accumulator::new(),
            fine_steps: 0,
            coarse_steps: 0,
        }
    }

    pub fn count(&self) -> u64 {
        self.diff.count
    }

    pub fn mean(&self) -> f64 {
        self.diff.mean
    }

    pub fn variance(&self) -> f64 {
        self.diff.variance()
    }

    /// Cost in Euler-step units, `β` per coarse step.
    pub fn cost(&self, beta: f64) -> f64 {
        self.fine_steps as f64 + beta * self.coarse_steps as f64
    }

    pub fn merge(&mut self, other: &LevelStats) {
        self.diff.merge(&other.diff);
        self.fine.merge(&other.fine);
        self.fine_steps += other.fine_steps;
        self.coarse_steps += other.coarse_steps;
    }
}
