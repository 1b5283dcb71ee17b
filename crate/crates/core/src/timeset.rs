//! Compact time sets.
//!
//! Two kinds are representable: finite point sets and uniformly sampled
//! intervals. A sampled interval stands for the whole interval, so growth
//! rates on it include the diagonal limit terms (instantaneous rates) in
//! addition to the finite difference quotients between grid points.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeSetKind {
    FiniteSet,
    SampledInterval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSet {
    kind: TimeSetKind,
    points: Vec<f64>,
}

/// An ordered pair of distinct times `(t, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePair {
    pub t: f64,
    pub s: f64,
}

impl TimeSet {
    /// Sorted, de-duplicated finite set. Duplicates are merged on exact equality only.
    pub fn finite(points: &[f64]) -> Result<Self> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidTimeSet("non-finite time point".into()));
        }
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        if pts.is_empty() {
            return Err(Error::InvalidTimeSet("empty point list".into()));
        }
        Ok(Self {
            kind: TimeSetKind::FiniteSet,
            points: pts,
        })
    }

    /// Uniform grid of `samples` points on `[t0, t1]`, endpoints included.
    pub fn interval(t0: f64, t1: f64, samples: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) || t0 >= t1 {
            return Err(Error::InvalidTimeSet(format!(
                "interval endpoints must satisfy t0 < t1 (got {t0}, {t1})"
            )));
        }
        if samples < 2 {
            return Err(Error::InvalidTimeSet(format!(
                "an interval needs at least 2 samples (got {samples})"
            )));
        }
        let h = (t1 - t0) / (samples - 1) as f64;
        let mut points: Vec<f64> = (0..samples).map(|i| t0 + i as f64 * h).collect();
        points[samples - 1] = t1;
        Ok(Self {
            kind: TimeSetKind::SampledInterval,
            points,
        })
    }

    pub fn kind(&self) -> TimeSetKind {
        self.kind
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_limit_points(&self) -> bool {
        self.kind == TimeSetKind::SampledInterval
    }

    pub fn t_min(&self) -> f64 {
        self.points[0]
    }

    pub fn t_max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.t_max() - self.t_min()
    }

    /// Index of `t` among the points, matched up to a few ulps of the span.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * (1.0 + self.span().abs() + t.abs());
        let idx = self.points.partition_point(|&p| p < t - tol);
        (idx < self.points.len() && (self.points[idx] - t).abs() <= tol).then_some(idx)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.index_of(t).is_some()
    }

    /// Every ordered pair of distinct points, in row-major index order.
    pub fn unequal_pairs(&self) -> Vec<TimePair> {
        let m = self.points.len();
        let mut out = Vec::with_capacity(m * m.saturating_sub(1));
        for &t in &self.points {
            for &s in &self.points {
                if t != s {
                    out.push(TimePair { t, s });
                }
            }
        }
        out
    }

    /// Whether every point of `self` is a point of `other`.
    pub fn is_subset_of(&self, other: &TimeSet) -> bool {
        self.points.iter().all(|&t| other.contains(t))
    }
}

/// Hausdorff distance between the point sets of two time sets.
pub fn hausdorff_distance(a: &TimeSet, b: &TimeSet) -> f64 {
    hausdorff_points(a.points(), b.points())
}

/// Hausdorff distance between two nonempty sorted point lists.
pub(crate) fn hausdorff_points(a: &[f64], b: &[f64]) -> f64 {
    directed(a, b).max(directed(b, a))
}

fn directed(from: &[f64], to: &[f64]) -> f64 {
    from.iter()
        .map(|&p| nearest_distance(to, p))
        .fold(0.0, f64::max)
}

fn nearest_distance(sorted: &[f64], p: f64) -> f64 {
    let idx = sorted.partition_point(|&q| q < p);
    let mut best = f64::INFINITY;
    if idx < sorted.len() {
        best = best.min((sorted[idx] - p).abs());
    }
    if idx > 0 {
        best = best.min((sorted[idx - 1] - p).abs());
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn finite_sorts_and_dedups() {
        let ts = TimeSet::finite(&[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(ts.points(), &[0.0, 1.0]);
        assert_eq!(ts.kind(), TimeSetKind::FiniteSet);
        assert!(!ts.has_limit_points());
        let ts = TimeSet::finite(&[0.0, 1.0]).unwrap();
        assert_eq!(ts.points(), &[0.0, 1.0]);
    }

    #[test]
    fn finite_rejects_empty() {
        assert!(matches!(TimeSet::finite(&[]), Err(Error::InvalidTimeSet(_))));
    }

    #[test]
    fn interval_grids() {
        let ts = TimeSet::interval(0.0, 1.0, 3).unwrap();
        assert_eq!(ts.points(), &[0.0, 0.5, 1.0]);
        assert!(ts.has_limit_points());
        assert_eq!(TimeSet::interval(0.0, 1.0, 2).unwrap().points(), &[0.0, 1.0]);
        assert!(matches!(
            TimeSet::interval(1.0, 0.0, 5),
            Err(Error::InvalidTimeSet(_))
        ));
        assert!(TimeSet::interval(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn pairs() {
        let ts = TimeSet::finite(&[0.0, 1.0]).unwrap();
        assert_eq!(
            ts.unequal_pairs(),
            vec![TimePair { t: 0.0, s: 1.0 }, TimePair { t: 1.0, s: 0.0 }]
        );
        assert_eq!(TimeSet::finite(&[0.0, 1.0, 2.0]).unwrap().unequal_pairs().len(), 6);
        assert!(TimeSet::finite(&[0.0]).unwrap().unequal_pairs().is_empty());
    }

    #[test]
    fn hausdorff_examples() {
        let a = TimeSet::finite(&[0.0, 1.0]).unwrap();
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
        let b = TimeSet::finite(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(hausdorff_distance(&a, &b), 0.5);
        let c = TimeSet::finite(&[0.0]).unwrap();
        let d = TimeSet::finite(&[0.0, 2.0]).unwrap();
        assert_eq!(hausdorff_distance(&c, &d), 2.0);
    }

    #[test]
    fn refinement_halves_step() {
        for m in [2usize, 3, 5, 17] {
            let coarse = TimeSet::interval(-1.0, 3.0, m).unwrap();
            let fine = TimeSet::interval(-1.0, 3.0, 2 * m - 1).unwrap();
            let step = 4.0 / (m - 1) as f64;
            assert!((hausdorff_distance(&coarse, &fine) - step / 2.0).abs() < 1e-12);
        }
    }

    fn point_set() -> impl Strategy<Value = TimeSet> {
        prop::collection::vec(-10.0f64..10.0, 1..8).prop_map(|v| TimeSet::finite(&v).unwrap())
    }

    proptest! {
        #[test]
        fn hausdorff_is_a_metric(a in point_set(), b in point_set(), c in point_set()) {
            let ab = hausdorff_distance(&a, &b);
            prop_assert_eq!(ab, hausdorff_distance(&b, &a));
            prop_assert_eq!(hausdorff_distance(&a, &a), 0.0);
            if a.points() != b.points() {
                prop_assert!(ab > 0.0);
            }
            prop_assert!(ab <= hausdorff_distance(&a, &c) + hausdorff_distance(&c, &b) + 1e-12);
        }

        #[test]
        fn pair_count(a in point_set()) {
            let m = a.len();
            let pairs = a.unequal_pairs();
            prop_assert_eq!(pairs.len(), m * (m - 1));
            prop_assert!(pairs.iter().all(|p| p.t != p.s));
        }
    }
}
