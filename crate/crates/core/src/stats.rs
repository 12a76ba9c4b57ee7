use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// 1-based nearest rank `⌈p/100 · n⌉` clamped to `[1, n]`. A product within
/// rounding noise of an integer is taken as that integer.
pub fn nearest_rank(p: f64, n: usize) -> usize {
    let x = p / 100.0 * n as f64;
    let r = if (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0) {
        x.round()
    } else {
        x.ceil()
    };
    (r as usize).clamp(1, n.max(1))
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=100.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("percentile {p} outside [0, 100]")))
    }
}

/// Nearest-rank percentile: the smallest sample such that at least `p` percent
/// of the samples are less than or equal to it. Reorders `values`.
pub fn nearest_rank_percentile<T>(values: &mut [T], p: f64) -> Result<T>
where
    T: Copy + PartialOrd,
{
    if values.is_empty() {
        return Err(Error::invalid("percentile of an empty sample"));
    }
    check_p(p)?;
    let idx = nearest_rank(p, values.len()) - 1;
    let (_, v, _) = values.select_nth_unstable_by(idx, |a, b| {
        a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(*v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f32);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

enum Side {
    // keeps the `k` largest values; the answer is their minimum
    Top(BinaryHeap<Reverse<Key>>),
    // keeps the `k` smallest values; the answer is their maximum
    Bottom(BinaryHeap<Key>),
}

/// Exact nearest-rank percentile over a stream of known length, holding only
/// the values on the short side of the rank.
pub struct StreamingPercentile {
    total: usize,
    seen: usize,
    keep: usize,
    side: Side,
}

impl StreamingPercentile {
    pub fn new(total: usize, p: f64) -> Result<Self> {
        if total == 0 {
            return Err(Error::invalid("percentile of an empty sample"));
        }
        check_p(p)?;
        let rank = nearest_rank(p, total);
        let above = total - rank + 1;
        let (keep, side) = if above <= rank {
            (above, Side::Top(BinaryHeap::with_capacity(above + 1)))
        } else {
            (rank, Side::Bottom(BinaryHeap::with_capacity(rank + 1)))
        };
        Ok(StreamingPercentile {
            total,
            seen: 0,
            keep,
            side,
        })
    }

    pub fn push(&mut self, v: f32) -> Result<()> {
        if v.is_nan() {
            return Err(Error::NumericFault("NaN in percentile sample".into()));
        }
        self.seen += 1;
        match &mut self.side {
            Side::Top(h) => {
                if h.len() < self.keep {
                    h.push(Reverse(Key(v)));
                } else if h.peek().is_some_and(|Reverse(m)| v > m.0) {
                    h.pop();
                    h.push(Reverse(Key(v)));
                }
            }
            Side::Bottom(h) => {
                if h.len() < self.keep {
                    h.push(Key(v));
                } else if h.peek().is_some_and(|m| v < m.0) {
                    h.pop();
                    h.push(Key(v));
                }
            }
        }
        Ok(())
    }

    pub fn extend(&mut self, values: &[f32]) -> Result<()> {
        values.iter().try_for_each(|&v| self.push(v))
    }

    pub fn finish(self) -> Result<f32> {
        if self.seen != self.total {
            return Err(Error::InvalidState(format!(
                "expected {} samples, received {}",
                self.total, self.seen
            )));
        }
        Ok(match self.side {
            Side::Top(h) => h.peek().expect("non-empty").0 .0,
            Side::Bottom(h) => h.peek().expect("non-empty").0,
        })
    }
}
