//! Finite unions of half-open real intervals.

use serde::{Deserialize, Serialize};

/// A finite union of half-open intervals `[a, b)`, kept sorted, disjoint
/// and with adjacent pieces merged. Endpoints are compared exactly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalSet {
    pieces: Vec<[f64; 2]>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { pieces: Vec::new() }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        Self::from_pieces([[a, b]])
    }

    /// Builds the canonical form of an arbitrary list of intervals. Empty or
    /// reversed pieces are dropped.
    pub fn from_pieces<I: IntoIterator<Item = [f64; 2]>>(pieces: I) -> Self {
        let mut raw: Vec<[f64; 2]> = pieces.into_iter().filter(|p| p[0] < p[1]).collect();
        raw.sort_by(|x, y| x[0].total_cmp(&y[0]));
        let mut merged: Vec<[f64; 2]> = Vec::with_capacity(raw.len());
        for p in raw {
            match merged.last_mut() {
                Some(last) if p[0] <= last[1] => last[1] = last[1].max(p[1]),
                _ => merged.push(p),
            }
        }
        IntervalSet { pieces: merged }
    }

    pub fn pieces(&self) -> &[[f64; 2]] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.pieces.iter().map(|p| p[1] - p[0]).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.pieces.iter().any(|p| p[0] <= x && x < p[1])
    }

    /// Whether the segment `[a, b)` lies inside one piece of the set.
    pub fn covers(&self, a: f64, b: f64) -> bool {
        self.pieces.iter().any(|p| p[0] <= a && b <= p[1])
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::from_pieces(self.pieces.iter().chain(other.pieces.iter()).copied())
    }

    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.pieces.len() && j < other.pieces.len() {
            let a = self.pieces[i];
            let b = other.pieces[j];
            let lo = a[0].max(b[0]);
            let hi = a[1].min(b[1]);
            if lo < hi {
                out.push([lo, hi]);
            }
            if a[1] < b[1] {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet::from_pieces(out)
    }

    pub fn difference(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for &[a, b] in &self.pieces {
            let mut start = a;
            for &[c, d] in &other.pieces {
                if d <= start || c >= b {
                    continue;
                }
                if c > start {
                    out.push([start, c]);
                }
                start = start.max(d);
                if start >= b {
                    break;
                }
            }
            if start < b {
                out.push([start, b]);
            }
        }
        IntervalSet::from_pieces(out)
    }

    pub fn endpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces.iter().flat_map(|p| [p[0], p[1]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_merges_touching_pieces() {
        let s = IntervalSet::from_pieces([[2.0, 3.0], [0.0, 1.0], [1.0, 2.0], [5.0, 5.0]]);
        assert_eq!(s.pieces(), &[[0.0, 3.0]]);
    }

    #[test]
    fn set_operations() {
        let a = IntervalSet::from_pieces([[0.0, 4.0], [6.0, 8.0]]);
        let b = IntervalSet::from_pieces([[1.0, 2.0], [3.0, 7.0]]);
        assert_eq!(a.intersection(&b).pieces(), &[[1.0, 2.0], [3.0, 4.0], [6.0, 7.0]]);
        assert_eq!(a.difference(&b).pieces(), &[[0.0, 1.0], [2.0, 3.0], [7.0, 8.0]]);
        assert_eq!(a.union(&b).pieces(), &[[0.0, 8.0]]);
        assert_eq!(a.length(), 6.0);
        assert!(a.contains(0.0) && !a.contains(4.0));
    }
}
