//! Forward model and consistency checks for windowed distribution systems.
//!
//! A finite distribution process is a pair `(P, D)`: `P` is a probability
//! vector over the `N` atoms and `D` an `N × m` row-stochastic matrix whose
//! row `t` is the data distribution on atom `t`. Given the incidence matrix
//! `W` of `n` windows, the window mean distributions are
//!
//! ```text
//! R = diag(W P)⁻¹ · W · diag(P) · D
//! ```
//!
//! The checkers verify the finite content of the distribution-system axioms
//! and of time-distribution compatibility on the families of pairwise
//! disjoint windows present in the system. [`exact_time_weights`] inverts the
//! forward map for `P` on noiseless data by chaining pairwise mixture ratios.

use std::collections::{BTreeSet, HashMap};

use fixedbitset::FixedBitSet;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnls;
use crate::report::{AxiomCheck, AxiomReport, CompatibilityReport, EvaluationMode, Witness};
use crate::window::IncidenceMatrix;

/// Slack on row sums of user-supplied matrices.
pub const INPUT_TOL: f64 = 1e-9;
/// Slack on row sums of matrices produced by this crate.
pub const INTERNAL_TOL: f64 = 1e-12;
/// Two distributions closer than this in max-norm are treated as equal.
pub const DRIFT_TOL: f64 = 1e-10;

pub const WDS_NULL_INVARIANCE: &str = "axiom1_null_invariance";
pub const WDS_LIMITS: &str = "axiom2_monotone_limits";
pub const WDS_MIXTURES: &str = "axiom3_convex_mixtures";
pub const COMPAT_POSITIVE_MASS: &str = "condition1_positive_mass";
pub const COMPAT_NULL_MASS: &str = "condition2_null_mass";
pub const COMPAT_MIXTURES: &str = "condition3_mixture_weights";

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionProcess {
    weights: DVector<f64>,
    distributions: DMatrix<f64>,
}

impl DistributionProcess {
    /// Validates `P` (non-negative, sums to one) and `D` (non-negative,
    /// unit row sums) within [`INPUT_TOL`].
    pub fn new(weights: DVector<f64>, distributions: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(weights, distributions, INPUT_TOL)
    }

    pub fn with_tolerance(weights: DVector<f64>, distributions: DMatrix<f64>, tol: f64) -> Result<Self> {
        if weights.is_empty() || distributions.ncols() == 0 {
            return Err(Error::EmptyInput("distribution process"));
        }
        if weights.len() != distributions.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "P has {} atoms, D has {} rows",
                weights.len(),
                distributions.nrows()
            )));
        }
        check_probability(weights.as_slice(), tol).map_err(|e| Error::InvalidMatrix(format!("P: {e}")))?;
        check_row_stochastic(&distributions, tol).map_err(|e| Error::InvalidMatrix(format!("D: {e}")))?;
        Ok(DistributionProcess { weights, distributions })
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn distributions(&self) -> &DMatrix<f64> {
        &self.distributions
    }

    pub fn n_atoms(&self) -> usize {
        self.weights.len()
    }

    pub fn n_categories(&self) -> usize {
        self.distributions.ncols()
    }

    /// Reorders atoms so that new atom `k` is old atom `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> DistributionProcess {
        let weights = DVector::from_fn(self.n_atoms(), |k, _| self.weights[perm[k]]);
        let distributions =
            DMatrix::from_fn(self.n_atoms(), self.n_categories(), |k, j| self.distributions[(perm[k], j)]);
        DistributionProcess { weights, distributions }
    }
}

/// Window mean distributions `R` together with the window incidence.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowObservations {
    r: DMatrix<f64>,
    incidence: IncidenceMatrix,
}

impl WindowObservations {
    pub fn new(r: DMatrix<f64>, incidence: IncidenceMatrix) -> Result<Self> {
        if r.nrows() != incidence.n_windows() {
            return Err(Error::DimensionMismatch(format!(
                "R has {} rows, incidence has {} windows",
                r.nrows(),
                incidence.n_windows()
            )));
        }
        if r.ncols() == 0 {
            return Err(Error::EmptyInput("R has no categories"));
        }
        check_row_stochastic(&r, INPUT_TOL).map_err(|e| Error::InvalidMatrix(format!("R: {e}")))?;
        Ok(WindowObservations { r, incidence })
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn incidence(&self) -> &IncidenceMatrix {
        &self.incidence
    }

    pub fn n_windows(&self) -> usize {
        self.r.nrows()
    }

    pub fn n_categories(&self) -> usize {
        self.r.ncols()
    }

    /// Whether all window distributions coincide within `tol`.
    pub fn is_constant(&self, tol: f64) -> bool {
        (1..self.n_windows()).all(|i| row_distance(&self.r, i, 0) <= tol)
    }
}

fn check_probability(v: &[f64], tol: f64) -> std::result::Result<(), String> {
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(format!("entry {x} is negative or non-finite"));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(format!("sums to {s}"));
    }
    Ok(())
}

fn check_row_stochastic(m: &DMatrix<f64>, tol: f64) -> std::result::Result<(), String> {
    for (i, row) in m.row_iter().enumerate() {
        let v: Vec<f64> = row.iter().copied().collect();
        check_probability(&v, tol).map_err(|e| format!("row {i} {e}"))?;
    }
    Ok(())
}

fn row_distance(m: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (0..m.ncols()).map(|c| (m[(i, c)] - m[(j, c)]).abs()).fold(0.0, f64::max)
}

/// Per-window time mass `W P`.
pub fn window_masses(incidence: &IncidenceMatrix, weights: &DVector<f64>) -> DVector<f64> {
    incidence.matrix() * weights
}

/// The induced window observations `R = diag(WP)⁻¹ W diag(P) D`.
pub fn induce_observations(process: &DistributionProcess, incidence: &IncidenceMatrix) -> Result<WindowObservations> {
    if incidence.n_atoms() != process.n_atoms() {
        return Err(Error::DimensionMismatch(format!(
            "incidence has {} atoms, process has {}",
            incidence.n_atoms(),
            process.n_atoms()
        )));
    }
    let masses = window_masses(incidence, process.weights());
    if let Some(i) = masses.iter().position(|&m| m <= 0.0) {
        return Err(Error::NullWindowMass { window: i });
    }
    let mut weighted = incidence.matrix().clone();
    for (t, mut col) in weighted.column_iter_mut().enumerate() {
        col *= process.weights()[t];
    }
    let mut r = weighted * process.distributions();
    for (i, mut row) in r.row_iter_mut().enumerate() {
        row /= masses[i];
    }
    Ok(WindowObservations { r, incidence: incidence.clone() })
}

/// True iff two atoms of positive weight carry distributions more than `tol`
/// apart in max-norm.
pub fn has_drift(process: &DistributionProcess, tol: f64) -> bool {
    let live: Vec<usize> = (0..process.n_atoms()).filter(|&t| process.weights()[t] > 0.0).collect();
    live.iter()
        .enumerate()
        .any(|(k, &s)| live[k + 1..].iter().any(|&t| row_distance(process.distributions(), s, t) > tol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WdsCheckOptions {
    /// Largest disjoint family enumerated.
    pub max_family_size: usize,
    pub tol: f64,
    /// Lower bound on mixture weights when they must be inferred.
    pub positivity_floor: f64,
}

impl Default for WdsCheckOptions {
    fn default() -> Self {
        WdsCheckOptions { max_family_size: 3, tol: 1e-9, positivity_floor: 1e-9 }
    }
}

/// A union of pairwise disjoint windows that is itself a window.
struct PresentUnion {
    parts: Vec<usize>,
    union: usize,
}

struct Family {
    members: Vec<usize>,
    unions: Vec<PresentUnion>,
}

fn patterns(incidence: &IncidenceMatrix) -> Vec<FixedBitSet> {
    (0..incidence.n_windows())
        .map(|i| {
            let mut b = FixedBitSet::with_capacity(incidence.n_atoms());
            for t in incidence.support(i) {
                b.insert(t);
            }
            b
        })
        .collect()
}

/// Enumerates families of 2..=`max_size` pairwise disjoint windows with at
/// least one sub-union present in the system.
fn disjoint_families(incidence: &IncidenceMatrix, max_size: usize) -> Vec<Family> {
    let pats = patterns(incidence);
    let mut lookup: HashMap<&FixedBitSet, Vec<usize>> = HashMap::new();
    for (i, p) in pats.iter().enumerate() {
        lookup.entry(p).or_default().push(i);
    }
    let n = pats.len();
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::new();

    fn extend(
        start: usize,
        n: usize,
        max_size: usize,
        pats: &[FixedBitSet],
        lookup: &HashMap<&FixedBitSet, Vec<usize>>,
        stack: &mut Vec<usize>,
        out: &mut Vec<Family>,
    ) {
        if stack.len() >= 2 {
            let mut unions = Vec::new();
            let k = stack.len();
            // Subsets containing the newest member; smaller ones were
            // recorded with the parent family.
            for mask in 1u32..(1 << k) {
                if mask.count_ones() < 2 {
                    continue;
                }
                let parts: Vec<usize> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| stack[b]).collect();
                let mut u = FixedBitSet::with_capacity(pats[0].len());
                for &p in &parts {
                    u.union_with(&pats[p]);
                }
                if let Some(ws) = lookup.get(&u) {
                    for &w in ws {
                        unions.push(PresentUnion { parts: parts.clone(), union: w });
                    }
                }
            }
            if !unions.is_empty() {
                out.push(Family { members: stack.clone(), unions });
            }
        }
        if stack.len() == max_size {
            return;
        }
        for i in start..n {
            if stack.iter().all(|&s| pats[s].is_disjoint(&pats[i])) {
                stack.push(i);
                extend(i + 1, n, max_size, pats, lookup, stack, out);
                stack.pop();
            }
        }
    }

    extend(0, n, max_size.max(2), &pats, &lookup, &mut stack, &mut out);
    out
}

/// Max-norm distance between `R_union` and the `weights`-mixture of the parts.
fn mixture_residual(r: &DMatrix<f64>, parts: &[usize], weights: &[f64], union: usize) -> f64 {
    let total: f64 = weights.iter().sum();
    (0..r.ncols())
        .map(|j| {
            let mix: f64 = parts.iter().zip(weights).map(|(&i, &w)| w * r[(i, j)]).sum::<f64>() / total;
            (r[(union, j)] - mix).abs()
        })
        .fold(0.0, f64::max)
}

/// Finds family weights `λ ≥ floor` (normalized to sum one) that best
/// explain every present union as a mixture of its parts.
fn infer_family_weights(r: &DMatrix<f64>, family: &Family, floor: f64) -> Vec<f64> {
    let k = family.members.len();
    let m = r.ncols();
    let pos = |w: usize| family.members.iter().position(|&x| x == w).unwrap();
    let rows = family.unions.len() * m;
    let mut a = DMatrix::zeros(rows + 1, k);
    for (u, pu) in family.unions.iter().enumerate() {
        for j in 0..m {
            for &p in &pu.parts {
                a[(u * m + j, pos(p))] = r[(p, j)] - r[(pu.union, j)];
            }
        }
    }
    let scale = a.abs().max().max(1.0);
    let floor = floor.min(1.0 / k as f64);
    // λ = floor·1 + μ with μ ≥ 0.
    let mut b = DVector::zeros(rows + 1);
    for row in 0..rows {
        b[row] = -floor * a.row(row).sum();
    }
    for c in 0..k {
        a[(rows, c)] = scale;
    }
    b[rows] = scale * (1.0 - k as f64 * floor);
    let mu = nnls::nnls_default(&a, &b).map(|s| s.x).unwrap_or_else(|_| DVector::zeros(k));
    let mut lambda: Vec<f64> = mu.iter().map(|v| v + floor).collect();
    let s: f64 = lambda.iter().sum();
    lambda.iter_mut().for_each(|v| *v /= s);
    lambda
}

/// Checks the finite distribution-system axioms.
///
/// * axiom 1: windows with identical atom sets carry identical
///   distributions;
/// * axiom 2 (monotone limits) has no finite content and is reported as not
///   applicable;
/// * axiom 3: on every family of pairwise disjoint windows (up to
///   `max_family_size`), each present union is a strictly positive convex
///   combination of its parts with weights shared across the family. When
///   `weights` (one per window) are supplied, exactly those weights must
///   work.
pub fn check_wds_axioms(
    obs: &WindowObservations,
    weights: Option<&DVector<f64>>,
    opts: &WdsCheckOptions,
) -> Result<AxiomReport> {
    if let Some(w) = weights {
        if w.len() != obs.n_windows() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} windows",
                w.len(),
                obs.n_windows()
            )));
        }
    }
    let r = obs.r();
    let pats = patterns(obs.incidence());

    let mut ax1 = AxiomCheck::new(WDS_NULL_INVARIANCE);
    for i in 0..obs.n_windows() {
        for j in i + 1..obs.n_windows() {
            if pats[i] != pats[j] {
                continue;
            }
            ax1.checked += 1;
            let d = row_distance(r, i, j);
            ax1.record(d, d > opts.tol, || Witness {
                indices: vec![i, j],
                intervals: Vec::new(),
                deviation: d,
                detail: "windows differing by a null set carry different distributions".into(),
            });
        }
    }

    let ax2 = AxiomCheck::not_applicable(WDS_LIMITS, "not applicable: finite system");

    let mut ax3 = AxiomCheck::new(WDS_MIXTURES);
    for family in disjoint_families(obs.incidence(), opts.max_family_size) {
        ax3.checked += 1;
        let lambda: Vec<f64> = match weights {
            Some(w) => family.members.iter().map(|&i| w[i]).collect(),
            None => infer_family_weights(r, &family, opts.positivity_floor),
        };
        if let Some(k) = lambda.iter().position(|&v| !(v > 0.0)) {
            ax3.record(f64::INFINITY, true, || Witness {
                indices: family.members.clone(),
                intervals: Vec::new(),
                deviation: f64::INFINITY,
                detail: format!("mixture weight of window {} is not positive", family.members[k]),
            });
            continue;
        }
        for pu in &family.unions {
            let w: Vec<f64> = pu
                .parts
                .iter()
                .map(|p| lambda[family.members.iter().position(|x| x == p).unwrap()])
                .collect();
            let d = mixture_residual(r, &pu.parts, &w, pu.union);
            ax3.record(d, d > opts.tol, || Witness {
                indices: [pu.parts.clone(), vec![pu.union]].concat(),
                intervals: Vec::new(),
                deviation: d,
                detail: format!("window {} is not a positive mixture of windows {:?}", pu.union, pu.parts),
            });
        }
    }

    Ok(AxiomReport { mode: EvaluationMode::Exhaustive, checks: vec![ax1, ax2, ax3] })
}

/// Checks whether the time weights `p` are compatible with the observations:
/// every window has positive mass, atoms outside all windows carry no mass,
/// and on every disjoint family the masses act as mixture weights.
pub fn check_compatibility(
    obs: &WindowObservations,
    p: &DVector<f64>,
    opts: &WdsCheckOptions,
) -> Result<CompatibilityReport> {
    let inc = obs.incidence();
    if p.len() != inc.n_atoms() {
        return Err(Error::DimensionMismatch(format!("P has {} entries, system has {} atoms", p.len(), inc.n_atoms())));
    }
    let masses = window_masses(inc, p);

    let mut c1 = AxiomCheck::new(COMPAT_POSITIVE_MASS);
    for i in 0..obs.n_windows() {
        c1.checked += 1;
        let bad = !(masses[i] > 0.0 && masses[i].is_finite());
        c1.record(if bad { 1.0 } else { 0.0 }, bad, || Witness {
            indices: vec![i],
            intervals: Vec::new(),
            deviation: 1.0,
            detail: format!("window {i} has mass {}", masses[i]),
        });
    }

    let mut c2 = AxiomCheck::new(COMPAT_NULL_MASS);
    for t in 0..inc.n_atoms() {
        if (0..inc.n_windows()).any(|i| inc.contains(i, t)) {
            continue;
        }
        c2.checked += 1;
        let d = p[t].abs();
        c2.record(d, d > 0.0, || Witness {
            indices: vec![t],
            intervals: Vec::new(),
            deviation: d,
            detail: format!("atom {t} lies in no window but has weight {}", p[t]),
        });
    }
    if c2.checked == 0 {
        c2.note = Some("every atom lies in some window".into());
    }

    let mut c3 = AxiomCheck::new(COMPAT_MIXTURES);
    for family in disjoint_families(inc, opts.max_family_size) {
        for pu in &family.unions {
            let w: Vec<f64> = pu.parts.iter().map(|&i| masses[i]).collect();
            if w.iter().sum::<f64>() <= 0.0 {
                continue;
            }
            c3.checked += 1;
            let d = mixture_residual(obs.r(), &pu.parts, &w, pu.union);
            c3.record(d, d > opts.tol, || Witness {
                indices: [pu.parts.clone(), vec![pu.union]].concat(),
                intervals: Vec::new(),
                deviation: d,
                detail: format!("masses of windows {:?} do not mix to window {}", pu.parts, pu.union),
            });
        }
    }

    let max_residual = c3.max_deviation;
    let conditions = vec![c1, c2, c3];
    let compatible = conditions.iter().all(AxiomCheck::passed);
    Ok(CompatibilityReport { compatible, max_residual, conditions })
}

/// Unnormalized window masses determined by chaining mixture ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainedMasses {
    /// `None` for windows the chain does not reach.
    pub masses: Vec<Option<f64>>,
    /// The anchor pair: the most distinct pair of disjoint windows whose
    /// union is present.
    pub anchor: (usize, usize),
}

/// Propagates mass ratios through the system, starting from the anchor
/// pair with mass 1 on its first window.
///
/// For disjoint windows `i`, `j` with union `u` present and distinct
/// distributions, the mixture ratio `α` in `R_u = α R_i + (1 − α) R_j` is
/// solved by least squares over all categories; it fixes
/// `mass_i : mass_j : mass_u = α : 1 − α : 1`. Ratios are propagated along a
/// maximum spanning tree scored by `‖R_i − R_j‖∞`.
pub fn chain_window_masses(obs: &WindowObservations, tol: f64) -> Result<ChainedMasses> {
    if obs.is_constant(tol) {
        return Err(Error::ConstantWds);
    }
    let r = obs.r();
    let n = obs.n_windows();
    let pats = patterns(obs.incidence());
    let mut lookup: HashMap<&FixedBitSet, usize> = HashMap::new();
    for (i, p) in pats.iter().enumerate() {
        lookup.entry(p).or_insert(i);
    }

    // adjacency: (score, neighbour, mass ratio neighbour/self)
    let mut edges: Vec<Vec<(f64, usize, f64)>> = vec![Vec::new(); n];
    let mut anchor: Option<(f64, usize, usize)> = None;
    for i in 0..n {
        for j in i + 1..n {
            if !pats[i].is_disjoint(&pats[j]) {
                continue;
            }
            let score = row_distance(r, i, j);
            if score <= tol {
                continue;
            }
            let mut u_pat = pats[i].clone();
            u_pat.union_with(&pats[j]);
            let Some(&u) = lookup.get(&u_pat) else { continue };
            let (mut num, mut den) = (0.0, 0.0);
            for c in 0..r.ncols() {
                let d = r[(i, c)] - r[(j, c)];
                num += (r[(u, c)] - r[(j, c)]) * d;
                den += d * d;
            }
            let alpha = num / den;
            if !(alpha > 0.0 && alpha < 1.0) {
                continue;
            }
            let beta = 1.0 - alpha;
            let mut link = |a: usize, b: usize, ratio: f64| {
                edges[a].push((score, b, ratio));
                edges[b].push((score, a, 1.0 / ratio));
            };
            link(i, j, beta / alpha);
            link(i, u, 1.0 / alpha);
            link(j, u, 1.0 / beta);
            if anchor.is_none_or(|(s, _, _)| score > s) {
                anchor = Some((score, i, j));
            }
        }
    }
    let Some((_, a0, a1)) = anchor else {
        return Err(Error::UnchainableAtom { atom: 0 });
    };

    // Prim's algorithm on max score.
    let mut masses: Vec<Option<f64>> = vec![None; n];
    masses[a0] = Some(1.0);
    let mut frontier: BTreeSet<(OrdKey, usize, usize)> = BTreeSet::new();
    let push = |frontier: &mut BTreeSet<(OrdKey, usize, usize)>, from: usize, edges: &Vec<Vec<(f64, usize, f64)>>| {
        for (k, &(score, _, _)) in edges[from].iter().enumerate() {
            frontier.insert((OrdKey(score), from, k));
        }
    };
    push(&mut frontier, a0, &edges);
    while let Some((_, from, k)) = frontier.pop_last() {
        let (_, to, ratio) = edges[from][k];
        if masses[to].is_some() {
            continue;
        }
        masses[to] = Some(masses[from].unwrap() * ratio);
        push(&mut frontier, to, &edges);
    }
    Ok(ChainedMasses { masses, anchor: (a0, a1) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdKey(f64);

impl Eq for OrdKey {}

impl PartialOrd for OrdKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Turns chained window masses into a probability vector over atoms.
///
/// Solves `W_reached · P = masses` with `P ≥ 0` and normalizes. Fails with
/// [`Error::UnchainableAtom`] for the first atom whose weight is not pinned
/// down by the reached windows.
pub fn weights_from_masses(obs: &WindowObservations, chained: &ChainedMasses) -> Result<DVector<f64>> {
    let inc = obs.incidence();
    let reached: Vec<(usize, f64)> =
        chained.masses.iter().enumerate().filter_map(|(i, m)| m.map(|m| (i, m))).collect();
    let n_atoms = inc.n_atoms();
    let a = DMatrix::from_fn(reached.len(), n_atoms, |k, t| inc.matrix()[(reached[k].0, t)]);
    let b = DVector::from_iterator(reached.len(), reached.iter().map(|&(_, m)| m));

    // Atom t is determined iff e_t lies in the row space of `a`.
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let smax = svd.singular_values.max();
    let rank_rows: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > 1e-10 * smax).collect();
    for t in 0..n_atoms {
        let proj: f64 = rank_rows.iter().map(|&k| v_t[(k, t)] * v_t[(k, t)]).sum();
        if (1.0 - proj).abs() > 1e-8 {
            return Err(Error::UnchainableAtom { atom: t });
        }
    }

    let sol = nnls::nnls_default(&a, &b)?;
    let total = sol.x.sum();
    if !(total > 0.0) {
        return Err(Error::UnchainableAtom { atom: 0 });
    }
    Ok(sol.x / total)
}

/// Recovers the unique compatible time weights of a noiseless,
/// non-constant system.
pub fn exact_time_weights(obs: &WindowObservations) -> Result<DVector<f64>> {
    let chained = chain_window_masses(obs, DRIFT_TOL)?;
    weights_from_masses(obs, &chained)
}

/// Dimension of the space of matrices `E` (`N × m`) with
/// `W E = diag(W E 1) R`.
///
/// Every exact solution `(P, D)` yields `E = diag(P) D` in this space, so a
/// dimension of one means the noiseless solution is unique: `E` is fixed up
/// to scale and the scale by `Σ E = 1`. Singular values below
/// `tol · σ_max` count as zero.
pub fn solution_space_dimension(obs: &WindowObservations, tol: f64) -> usize {
    let w = obs.incidence().matrix();
    let r = obs.r();
    let (n, n_atoms) = w.shape();
    let m = r.ncols();
    // Column (t, k) is the image of the unit matrix with a one at (t, k).
    let map = DMatrix::from_fn(n * m, n_atoms * m, |row, col| {
        let (i, j) = (row / m, row % m);
        let (t, k) = (col / m, col % m);
        let wit = w[(i, t)];
        wit * (f64::from(u8::from(j == k)) - r[(i, j)])
    });
    let sv = map.singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > tol * smax).count();
    n_atoms * m - rank
}
