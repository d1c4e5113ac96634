use fixedbitset::FixedBitSet;

use super::LabelMetric;

/// Balls with at most this many members are covered exactly.
const EXACT_COVER_LIMIT: usize = 12;

/// Empirical doubling constant of a finite metric.
///
/// For every label `p` and every radius `r` equal to a distance from `p`,
/// the ball `B(p, r)` is covered by balls of radius `r / 2` centered at its
/// own members. `constant` is the largest cover size seen and `dimension`
/// its base-2 logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingEstimate {
    pub constant: f64,
    pub dimension: f64,
}

impl DoublingEstimate {
    fn from_constant(constant: usize) -> Self {
        let constant = constant.max(1) as f64;
        DoublingEstimate {
            constant,
            dimension: constant.log2(),
        }
    }
}

pub(super) fn estimate(metric: &LabelMetric) -> DoublingEstimate {
    let k = metric.k();
    let mut worst = 1;
    let mut order: Vec<usize> = (0..k).collect();

    for p in 0..k {
        order.sort_by(|&a, &b| {
            metric
                .distance(p, a)
                .total_cmp(&metric.distance(p, b))
                .then(a.cmp(&b))
        });
        // The ball only changes at observed distances, and for a fixed ball
        // the smallest such radius yields the largest cover.
        let mut end = 0;
        while end < k {
            let radius = metric.distance(p, order[end]);
            while end < k && metric.distance(p, order[end]) <= radius {
                end += 1;
            }
            if radius <= 0.0 {
                continue;
            }
            let members = &order[..end];
            let count = cover_count(metric, members, radius / 2.0);
            worst = worst.max(count);
        }
    }
    DoublingEstimate::from_constant(worst)
}

/// Minimum (exact or greedy) number of `half`-balls centered at `members`
/// needed to cover `members`.
fn cover_count(metric: &LabelMetric, members: &[usize], half: f64) -> usize {
    let m = members.len();
    let covers: Vec<FixedBitSet> = members
        .iter()
        .map(|&c| {
            let mut set = FixedBitSet::with_capacity(m);
            for (slot, &q) in members.iter().enumerate() {
                if metric.distance(c, q) <= half {
                    set.insert(slot);
                }
            }
            set
        })
        .collect();

    let greedy = greedy_cover(&covers, m);
    if m <= EXACT_COVER_LIMIT {
        exact_cover(&covers, m, greedy)
    } else {
        greedy
    }
}

fn greedy_cover(covers: &[FixedBitSet], m: usize) -> usize {
    let mut uncovered = FixedBitSet::with_capacity(m);
    uncovered.insert_range(..);
    let mut used = 0;
    while !uncovered.is_clear() {
        let (best, _) = covers
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.intersection_count(&uncovered)))
            .fold((0, 0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        uncovered.difference_with(&covers[best]);
        used += 1;
    }
    used
}

/// Smallest cover of size below `upper`, or `upper` if none exists.
fn exact_cover(covers: &[FixedBitSet], m: usize, upper: usize) -> usize {
    let masks: Vec<u32> = covers
        .iter()
        .map(|c| c.ones().fold(0u32, |acc, i| acc | (1 << i)))
        .collect();
    let full = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    for size in 1..upper {
        if search(&masks, full, 0, 0, size) {
            return size;
        }
    }
    upper
}

fn search(masks: &[u32], full: u32, acc: u32, start: usize, left: usize) -> bool {
    if acc == full {
        return true;
    }
    if left == 0 {
        return false;
    }
    (start..masks.len()).any(|i| search(masks, full, acc | masks[i], i + 1, left - 1))
}
