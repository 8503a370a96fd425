//! Finite unions of closed real intervals.

use std::fmt;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval [{lo}, {hi}] is reversed");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Sorted, pairwise disjoint closed intervals with `hi_i < lo_{i+1}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IntervalUnion {
    parts: Vec<Interval>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        IntervalUnion { parts: Vec::new() }
    }

    pub fn single(lo: f64, hi: f64) -> Self {
        IntervalUnion {
            parts: vec![Interval::new(lo, hi)],
        }
    }

    /// Normalizes arbitrary intervals: sorts and merges overlapping or touching ones.
    pub fn from_intervals(parts: impl IntoIterator<Item = Interval>) -> Self {
        Self::merged_within(parts, 0.0)
    }

    /// Like [`from_intervals`](Self::from_intervals) but also bridges gaps no
    /// wider than `gap`.
    pub fn merged_within(parts: impl IntoIterator<Item = Interval>, gap: f64) -> Self {
        let mut parts: Vec<Interval> = parts.into_iter().collect();
        parts.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        let mut out: Vec<Interval> = Vec::with_capacity(parts.len());
        for p in parts {
            match out.last_mut() {
                Some(last) if p.lo - last.hi <= gap => last.hi = last.hi.max(p.hi),
                _ => out.push(p),
            }
        }
        IntervalUnion { parts: out }
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn min(&self) -> Option<f64> {
        self.parts.first().map(|p| p.lo)
    }

    pub fn max(&self) -> Option<f64> {
        self.parts.last().map(|p| p.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.parts.iter().any(|p| p.contains(x))
    }

    /// Distance from `x` to the set (infinite for the empty set).
    pub fn distance(&self, x: f64) -> f64 {
        self.parts
            .iter()
            .map(|p| {
                if p.contains(x) {
                    0.0
                } else {
                    (p.lo - x).abs().min((x - p.hi).abs())
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn union(&self, other: &IntervalUnion) -> IntervalUnion {
        Self::from_intervals(self.parts.iter().chain(&other.parts).copied())
    }

    /// E ⊕ [−r, r].
    pub fn inflate(&self, r: f64) -> IntervalUnion {
        Self::from_intervals(self.parts.iter().map(|p| Interval::new(p.lo - r, p.hi + r)))
    }

    /// Algebraic sum {e + f}. The sum with an empty set is empty.
    pub fn minkowski_sum(&self, other: &IntervalUnion) -> IntervalUnion {
        Self::from_intervals(self.parts.iter().flat_map(|a| {
            other
                .parts
                .iter()
                .map(move |b| Interval::new(a.lo + b.lo, a.hi + b.hi))
        }))
    }

    /// True when every point of `self` lies in `other`.
    pub fn is_subset_of(&self, other: &IntervalUnion) -> bool {
        self.parts
            .iter()
            .all(|p| other.parts.iter().any(|q| q.lo <= p.lo && p.hi <= q.hi))
    }

    /// Bounded gaps between consecutive intervals, clipped to `[lo, hi]`.
    ///
    /// The unbounded components below the first and above the last interval
    /// are never reported.
    pub fn gaps(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        self.parts
            .windows(2)
            .filter_map(|w| {
                let a = w[0].hi.max(lo);
                let b = w[1].lo.min(hi);
                (a < b).then_some((a, b))
            })
            .collect()
    }

    /// Hausdorff distance between two nonempty unions.
    pub fn hausdorff(&self, other: &IntervalUnion) -> f64 {
        let one_way = |a: &IntervalUnion, b: &IntervalUnion| {
            let mut worst = 0.0f64;
            for p in &a.parts {
                // The farthest point of [lo, hi] from b is an endpoint or the
                // midpoint of a gap of b that it spans.
                let mut probes = vec![p.lo, p.hi];
                for (g0, g1) in b.gaps(p.lo, p.hi) {
                    probes.push(0.5 * (g0 + g1));
                }
                for x in probes {
                    worst = worst.max(b.distance(x));
                }
            }
            worst
        };
        one_way(self, other).max(one_way(other, self))
    }
}

impl fmt::Display for IntervalUnion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "{{}}");
        }
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, " U ")?;
            }
            write!(f, "[{}, {}]", p.lo, p.hi)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalization_merges() {
        let u = IntervalUnion::from_intervals([
            Interval::new(2.0, 3.0),
            Interval::new(0.0, 1.0),
            Interval::new(1.0, 1.5),
            Interval::new(2.5, 2.7),
        ]);
        assert_eq!(
            u.parts(),
            &[Interval::new(0.0, 1.5), Interval::new(2.0, 3.0)]
        );
    }

    #[test]
    fn minkowski_examples() {
        let s = IntervalUnion::single(-1.0, 1.0);
        assert_eq!(s.minkowski_sum(&s), IntervalUnion::single(-2.0, 2.0));
        assert!(s.minkowski_sum(&IntervalUnion::empty()).is_empty());
        let a = IntervalUnion::single(0.0, 1.0);
        let b = IntervalUnion::single(10.0, 10.5);
        assert_eq!(a.minkowski_sum(&b), IntervalUnion::single(10.0, 11.5));
    }

    #[test]
    fn gap_examples() {
        let u = IntervalUnion::from_intervals([Interval::new(0.0, 1.0), Interval::new(2.0, 3.0)]);
        assert_eq!(u.gaps(0.0, 3.0), vec![(1.0, 2.0)]);
        assert_eq!(u.gaps(1.5, 3.0), vec![(1.5, 2.0)]);
        assert_eq!(u.gaps(-5.0, 5.0), vec![(1.0, 2.0)]);
        assert!(IntervalUnion::single(-1.0, 1.0).gaps(-1.0, 1.0).is_empty());
    }

    #[test]
    fn hausdorff_sees_gaps() {
        let a = IntervalUnion::single(0.0, 4.0);
        let b = IntervalUnion::from_intervals([Interval::new(0.0, 1.0), Interval::new(3.0, 4.0)]);
        assert_eq!(a.hausdorff(&b), 1.0);
        assert_eq!(b.hausdorff(&b), 0.0);
    }

    // Dyadic endpoints keep every sum exact, so equality is exact.
    fn dyadic_union() -> impl Strategy<Value = IntervalUnion> {
        proptest::collection::vec((-64i32..64, 0i32..32), 0..5).prop_map(|v| {
            IntervalUnion::from_intervals(v.into_iter().map(|(a, w)| {
                let lo = a as f64 / 8.0;
                Interval::new(lo, lo + w as f64 / 8.0)
            }))
        })
    }

    proptest! {
        #[test]
        fn minkowski_commutes(a in dyadic_union(), b in dyadic_union()) {
            prop_assert_eq!(a.minkowski_sum(&b), b.minkowski_sum(&a));
        }

        #[test]
        fn minkowski_associates(a in dyadic_union(), b in dyadic_union(), c in dyadic_union()) {
            prop_assert_eq!(
                a.minkowski_sum(&b).minkowski_sum(&c),
                a.minkowski_sum(&b.minkowski_sum(&c))
            );
        }

        #[test]
        fn normalized_parts_are_separated(a in dyadic_union(), b in dyadic_union()) {
            let u = a.union(&b);
            for w in u.parts().windows(2) {
                prop_assert!(w[0].hi < w[1].lo);
            }
            prop_assert!(a.is_subset_of(&u) && b.is_subset_of(&u));
        }
    }
}
