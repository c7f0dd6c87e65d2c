use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Which discrete intervals of `0..n` take part in the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalVariant {
    /// Every interval, `n (n + 1) / 2` in total.
    All,
    /// Intervals whose length is a power of two, `O(n log n)` in total.
    DyadicLengths,
}

impl IntervalVariant {
    /// `All` up to `n = 2048`, `DyadicLengths` beyond.
    pub fn default_for(n: usize) -> Self {
        if n <= 2048 {
            IntervalVariant::All
        } else {
            IntervalVariant::DyadicLengths
        }
    }

    pub fn includes_length(self, len: usize) -> bool {
        match self {
            IntervalVariant::All => len >= 1,
            IntervalVariant::DyadicLengths => len.is_power_of_two(),
        }
    }
}

/// Additive scale penalty `s` attached to each interval; a function of the
/// interval length only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalePenalty {
    Zero,
    /// `s = sqrt(2 log(n / len))` with `n` the reference length.
    LogScale {
        n: usize,
    },
    Constant {
        value: f64,
    },
}

impl ScalePenalty {
    pub fn value(&self, len: usize) -> f64 {
        match *self {
            ScalePenalty::Zero => 0.0,
            ScalePenalty::LogScale { n } => {
                let ratio = n as f64 / len as f64;
                if ratio <= 1.0 {
                    0.0
                } else {
                    (2.0 * ratio.ln()).sqrt()
                }
            }
            ScalePenalty::Constant { value } => value,
        }
    }
}

/// One member of an interval system, 0-based and inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalProbe {
    pub start: usize,
    pub end: usize,
    /// `sqrt(len)`.
    pub weight: f64,
    pub penalty: f64,
}

impl IntervalProbe {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A system of intervals of `0..n` with weights `sqrt(len)` and scale
/// penalties. Members are generated on demand in start-major order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSystem {
    n: usize,
    variant: IntervalVariant,
    penalty: ScalePenalty,
}

impl IntervalSystem {
    pub fn new(n: usize, variant: IntervalVariant) -> Self {
        IntervalSystem {
            n,
            variant,
            penalty: ScalePenalty::Zero,
        }
    }

    pub fn all(n: usize) -> Self {
        Self::new(n, IntervalVariant::All)
    }

    pub fn dyadic(n: usize) -> Self {
        Self::new(n, IntervalVariant::DyadicLengths)
    }

    pub fn with_penalty(mut self, penalty: ScalePenalty) -> Result<Self> {
        if let ScalePenalty::Constant { value } = penalty {
            if !(value >= 0.0 && value.is_finite()) {
                return invalid(format!("scale penalties must be nonnegative, got {value}"));
            }
        }
        self.penalty = penalty;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn variant(&self) -> IntervalVariant {
        self.variant
    }

    pub fn penalty(&self) -> ScalePenalty {
        self.penalty
    }

    pub fn includes_length(&self, len: usize) -> bool {
        len <= self.n && self.variant.includes_length(len)
    }

    pub fn penalty_for_len(&self, len: usize) -> f64 {
        self.penalty.value(len)
    }

    pub fn num_intervals(&self) -> usize {
        match self.variant {
            IntervalVariant::All => self.n * (self.n + 1) / 2,
            IntervalVariant::DyadicLengths => self.lengths().map(|l| self.n + 1 - l).sum(),
        }
    }

    /// Admissible lengths in increasing order.
    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.n).filter(move |&l| self.variant.includes_length(l))
    }

    pub fn intervals(&self) -> impl Iterator<Item = IntervalProbe> + '_ {
        let lengths: Vec<usize> = self.lengths().collect();
        (0..self.n).flat_map(move |start| {
            let lengths = lengths.clone();
            lengths
                .into_iter()
                .take_while(move |&l| start + l <= self.n)
                .map(move |l| IntervalProbe {
                    start,
                    end: start + l - 1,
                    weight: (l as f64).sqrt(),
                    penalty: self.penalty.value(l),
                })
        })
    }

    /// Visits `(start, len, interval sum)` for every member using prefix sums.
    pub(crate) fn for_each_sum(&self, v: &[f64], mut f: impl FnMut(usize, usize, f64)) {
        let prefix = prefix_sums(v);
        let lengths: Vec<usize> = self.lengths().collect();
        for start in 0..self.n {
            for &l in lengths.iter().take_while(|&&l| start + l <= self.n) {
                f(start, l, prefix[start + l] - prefix[start]);
            }
        }
    }
}

pub(crate) fn prefix_sums(v: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(v.len() + 1);
    p.push(0.0);
    let mut acc = 0.0;
    for x in v {
        acc += x;
        p.push(acc);
    }
    p
}

/// `max_B |sum_{i in B} v_i| / sqrt(|B|)` over the system (scale penalties
/// are not part of this norm).
pub fn nemirovskii_norm(v: &[f64], sys: &IntervalSystem) -> Result<f64> {
    crate::error::check_len("signal", sys.n(), v.len())?;
    if sys.n() == 0 {
        return invalid("empty interval system");
    }
    let mut best = 0.0_f64;
    sys.for_each_sum(v, |_, len, s| {
        best = best.max(s.abs() / (len as f64).sqrt());
    });
    Ok(best)
}

/// Attaches `s = sqrt(2 log(n / len))` to every interval.
pub fn default_scale_penalties(n: usize, sys: IntervalSystem) -> Result<IntervalSystem> {
    if n == 0 {
        return invalid("reference length must be positive");
    }
    sys.with_penalty(ScalePenalty::LogScale { n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(IntervalSystem::all(4).num_intervals(), 10);
        assert_eq!(IntervalSystem::all(4).intervals().count(), 10);
        let d = IntervalSystem::dyadic(5);
        // lengths 1, 2, 4 -> 5 + 4 + 2
        assert_eq!(d.num_intervals(), 11);
        assert_eq!(d.intervals().count(), 11);
    }

    #[test]
    fn nemirovskii_norm_examples() {
        let all = IntervalSystem::all(4);
        assert!((nemirovskii_norm(&[1.0; 4], &all).unwrap() - 2.0).abs() < 1e-12);
        assert!((nemirovskii_norm(&[1.0, 0.0, 0.0, 0.0], &all).unwrap() - 1.0).abs() < 1e-12);
        assert!((nemirovskii_norm(&[1.0, -1.0, 1.0, -1.0], &all).unwrap() - 1.0).abs() < 1e-12);
        assert!(nemirovskii_norm(&[], &IntervalSystem::all(0)).is_err());
        assert!(nemirovskii_norm(&[1.0], &all).is_err());
    }

    #[test]
    fn alternating_signal_by_enumeration() {
        // every interval of (1,-1,1,-1) has sum in {-1, 0, 1}; the best
        // ratio is a singleton
        let v = [1.0, -1.0, 1.0, -1.0];
        let mut best: f64 = 0.0;
        for i in 0..4 {
            for j in i..4 {
                let s: f64 = v[i..=j].iter().sum();
                best = best.max(s.abs() / ((j - i + 1) as f64).sqrt());
            }
        }
        assert_eq!(best, 1.0);
    }

    #[test]
    fn default_penalties() {
        let sys = default_scale_penalties(16, IntervalSystem::all(16)).unwrap();
        assert_eq!(sys.penalty_for_len(16), 0.0);
        assert!((sys.penalty_for_len(1) - (2.0 * 16f64.ln()).sqrt()).abs() < 1e-12);
        assert!((sys.penalty_for_len(1) - 2.3548).abs() < 1e-4);
        assert!((sys.penalty_for_len(4) - 1.6651).abs() < 1e-4);
        let pens: Vec<f64> = (1..=16).map(|l| sys.penalty_for_len(l)).collect();
        assert!(pens.windows(2).all(|w| w[0] > w[1]));
    }
}
