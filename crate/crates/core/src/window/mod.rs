//! Finite window systems over the real line.
//!
//! Windows are finite unions of half-open intervals `[a, b)`. Atomization
//! splits the horizon into the elementary cells `W₁^{s₁} ∩ … ∩ Wₙ^{sₙ}`
//! (sign `+1` meaning "inside", `-1` "outside") that are nonempty and lie
//! inside at least one window. Time not covered by any window is kept as a
//! separate complement cell and never becomes an atom.
//!
//! The cells are found by an endpoint sweep: all endpoints are sorted, each
//! elementary segment between consecutive endpoints is classified by the set
//! of windows containing it, and segments with equal signatures are merged.

mod axioms;
mod interval;

pub use axioms::{check_window_system, AxiomCheckOptions};
pub use interval::IntervalSet;

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A window given as a sorted list of disjoint half-open intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalWindow {
    pub id: String,
    pub intervals: Vec<[f64; 2]>,
}

impl IntervalWindow {
    pub fn new(id: impl Into<String>, intervals: Vec<[f64; 2]>) -> Self {
        IntervalWindow { id: id.into(), intervals }
    }

    pub fn single(id: impl Into<String>, a: f64, b: f64) -> Self {
        Self::new(id, vec![[a, b]])
    }

    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|p| (p[1] - p[0]).max(0.0)).sum()
    }

    pub fn as_set(&self) -> IntervalSet {
        IntervalSet::from_pieces(self.intervals.iter().copied())
    }

    /// Checks the interval invariants: finite endpoints, every piece
    /// nonempty, pieces sorted and pairwise disjoint.
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidInterval { id: self.id.clone(), reason };
        for p in &self.intervals {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(invalid(format!("non-finite endpoint in [{}, {})", p[0], p[1])));
            }
        }
        if self.length() <= 0.0 {
            return Err(Error::DegenerateWindow { id: self.id.clone() });
        }
        for p in &self.intervals {
            if p[0] >= p[1] {
                return Err(invalid(format!("empty or reversed interval [{}, {})", p[0], p[1])));
            }
        }
        for w in self.intervals.windows(2) {
            if w[1][0] < w[0][1] {
                return Err(invalid(format!(
                    "intervals [{}, {}) and [{}, {}) overlap or are out of order",
                    w[0][0], w[0][1], w[1][0], w[1][1]
                )));
            }
        }
        Ok(())
    }
}

/// An elementary time cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub index: usize,
    /// `+1` if the atom lies inside window `i`, `-1` otherwise.
    pub signature: Vec<i8>,
    pub intervals: Vec<[f64; 2]>,
    pub length: f64,
}

impl Atom {
    pub fn as_set(&self) -> IntervalSet {
        IntervalSet::from_pieces(self.intervals.iter().copied())
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|p| p[0] <= t && t < p[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAtomSet {
    pub horizon: [f64; 2],
    pub window_ids: Vec<String>,
    pub atoms: Vec<Atom>,
    /// Time inside the horizon that no window covers.
    pub complement: Vec<[f64; 2]>,
}

impl TimeAtomSet {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Index of the atom containing `t`, `None` for the complement cell or
    /// points outside the horizon.
    pub fn locate(&self, t: f64) -> Option<usize> {
        self.atoms.iter().position(|a| a.contains(t))
    }

    pub fn complement_set(&self) -> IntervalSet {
        IntervalSet::from_pieces(self.complement.iter().copied())
    }

    /// Removes an atom, leaving its time uncovered. The complement cell is
    /// not enlarged, so the result no longer covers the horizon.
    pub fn without_atom(&self, index: usize) -> TimeAtomSet {
        let mut out = self.clone();
        out.atoms.remove(index);
        for (k, a) in out.atoms.iter_mut().enumerate() {
            a.index = k;
        }
        out
    }
}

/// Binary `n × N` matrix with `entries[i][t] = 1` iff atom `t` lies in
/// window `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    entries: DMatrix<f64>,
    window_ids: Vec<String>,
}

impl IncidenceMatrix {
    /// Builds an incidence matrix from 0/1 rows. Every row must contain at
    /// least one `1`.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("incidence matrix has no rows"));
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(Error::EmptyInput("incidence matrix has no columns"));
        }
        let mut m = DMatrix::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "incidence row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (t, &v) in row.iter().enumerate() {
                m[(i, t)] = f64::from(v);
            }
        }
        Self::from_matrix(m)
    }

    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        let ids = (0..entries.nrows()).map(|i| format!("w{i}")).collect();
        Self::with_ids(entries, ids)
    }

    pub fn with_ids(entries: DMatrix<f64>, window_ids: Vec<String>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::EmptyInput("incidence matrix is empty"));
        }
        if window_ids.len() != entries.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} window ids for {} incidence rows",
                window_ids.len(),
                entries.nrows()
            )));
        }
        for i in 0..entries.nrows() {
            let mut any = false;
            for t in 0..entries.ncols() {
                let v = entries[(i, t)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::InvalidMatrix(format!(
                        "incidence entry ({i}, {t}) = {v} is not 0 or 1"
                    )));
                }
                any |= v == 1.0;
            }
            if !any {
                return Err(Error::InvalidMatrix(format!("window {i} contains no atom")));
            }
        }
        Ok(IncidenceMatrix { entries, window_ids })
    }

    pub fn n_windows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn window_ids(&self) -> &[String] {
        &self.window_ids
    }

    pub fn contains(&self, window: usize, atom: usize) -> bool {
        self.entries[(window, atom)] == 1.0
    }

    /// Atoms contained in `window`, in increasing order.
    pub fn support(&self, window: usize) -> Vec<usize> {
        (0..self.n_atoms()).filter(|&t| self.contains(window, t)).collect()
    }

    pub fn row_pattern(&self, window: usize) -> Vec<bool> {
        (0..self.n_atoms()).map(|t| self.contains(window, t)).collect()
    }

    /// First atom that lies in no window.
    pub fn uncovered_atom(&self) -> Option<usize> {
        (0..self.n_atoms()).find(|&t| (0..self.n_windows()).all(|i| !self.contains(i, t)))
    }

    /// Reorders atoms so that new column `k` is old column `perm[k]`.
    pub fn permute_atoms(&self, perm: &[usize]) -> IncidenceMatrix {
        let entries = DMatrix::from_fn(self.n_windows(), self.n_atoms(), |i, k| self.entries[(i, perm[k])]);
        IncidenceMatrix { entries, window_ids: self.window_ids.clone() }
    }
}

/// Atomizes `windows` over the horizon spanned by their endpoints.
pub fn atomize(windows: &[IntervalWindow]) -> Result<(TimeAtomSet, IncidenceMatrix)> {
    atomize_with_horizon(windows, None)
}

/// Atomizes `windows` inside an explicit horizon `[start, end)`; windows
/// must lie inside it. With `None` the horizon is the hull of all windows.
pub fn atomize_with_horizon(
    windows: &[IntervalWindow],
    horizon: Option<[f64; 2]>,
) -> Result<(TimeAtomSet, IncidenceMatrix)> {
    if windows.is_empty() {
        return Err(Error::EmptyInput("no windows given"));
    }
    for w in windows {
        w.validate()?;
    }
    let lo = windows.iter().map(|w| w.intervals[0][0]).fold(f64::INFINITY, f64::min);
    let hi = windows
        .iter()
        .map(|w| w.intervals[w.intervals.len() - 1][1])
        .fold(f64::NEG_INFINITY, f64::max);
    let horizon = match horizon {
        Some(h) => {
            if !(h[0].is_finite() && h[1].is_finite() && h[0] < h[1]) {
                return Err(Error::InvalidParameter(format!("invalid horizon [{}, {})", h[0], h[1])));
            }
            if let Some(w) = windows
                .iter()
                .find(|w| w.intervals[0][0] < h[0] || w.intervals[w.intervals.len() - 1][1] > h[1])
            {
                return Err(Error::OutsideHorizon { id: w.id.clone(), start: h[0], end: h[1] });
            }
            h
        }
        None => [lo, hi],
    };

    let mut endpoints: Vec<f64> = windows
        .iter()
        .flat_map(|w| w.intervals.iter().flat_map(|p| [p[0], p[1]]))
        .chain([horizon[0], horizon[1]])
        .collect();
    endpoints.sort_by(f64::total_cmp);
    endpoints.dedup();

    // Segment cursor per window: intervals are sorted, and segments are
    // visited left to right, so each window is scanned once.
    let mut cursors = vec![0usize; windows.len()];
    let mut by_signature: HashMap<Vec<i8>, usize> = HashMap::new();
    let mut atom_pieces: Vec<(Vec<i8>, Vec<[f64; 2]>)> = Vec::new();
    let mut complement: Vec<[f64; 2]> = Vec::new();

    for seg in endpoints.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let mut signature = Vec::with_capacity(windows.len());
        for (w, cur) in windows.iter().zip(cursors.iter_mut()) {
            while *cur < w.intervals.len() && w.intervals[*cur][1] <= a {
                *cur += 1;
            }
            let inside = *cur < w.intervals.len() && w.intervals[*cur][0] <= a && b <= w.intervals[*cur][1];
            signature.push(if inside { 1 } else { -1 });
        }
        if signature.iter().all(|&s| s < 0) {
            push_piece(&mut complement, [a, b]);
            continue;
        }
        let k = *by_signature.entry(signature.clone()).or_insert_with(|| {
            atom_pieces.push((signature, Vec::new()));
            atom_pieces.len() - 1
        });
        push_piece(&mut atom_pieces[k].1, [a, b]);
    }

    let atoms: Vec<Atom> = atom_pieces
        .into_iter()
        .enumerate()
        .map(|(index, (signature, intervals))| {
            let length = intervals.iter().map(|p| p[1] - p[0]).sum();
            Atom { index, signature, intervals, length }
        })
        .collect();

    let entries = DMatrix::from_fn(windows.len(), atoms.len(), |i, t| {
        if atoms[t].signature[i] > 0 {
            1.0
        } else {
            0.0
        }
    });
    let window_ids: Vec<String> = windows.iter().map(|w| w.id.clone()).collect();
    let incidence = IncidenceMatrix::with_ids(entries, window_ids.clone())?;
    let set = TimeAtomSet { horizon, window_ids, atoms, complement };
    Ok((set, incidence))
}

fn push_piece(pieces: &mut Vec<[f64; 2]>, p: [f64; 2]) {
    match pieces.last_mut() {
        Some(last) if last[1] == p[0] => last[1] = p[1],
        _ => pieces.push(p),
    }
}
