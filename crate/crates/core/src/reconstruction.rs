//! Coordinate-descent reconstruction of a distribution process `(P, D)`
//! from window observations `(W, R)`.
//!
//! The solver alternates two non-negative least-squares steps on
//!
//! ```text
//! f(P, D) = ‖W diag(P) D − diag(W P) R‖_F²,   P ∈ Δᴺ, D row-stochastic.
//! ```
//!
//! * D-step: with `P` fixed the problem decouples over the `m` category
//!   columns; each column is an NNLS problem with design `W diag(P)` and
//!   target `diag(WP) R[:, j]`. Rows are then normalized to sum to one.
//! * P-step: with `D` fixed, `f` is a quadratic form `‖S P‖²` where
//!   `S[(i, j), t] = W_it (D_tj − R_ij)`. The NNLS problem `S` stacked over a
//!   ones row with target `(0, …, 0, 1)` is solved and normalized. Because
//!   `‖S P‖²` is homogeneous, the normalized NNLS solution is the exact
//!   minimizer over the simplex.
//!
//! The row normalization can move the D-step off its constrained optimum, so
//! an iteration may fail to decrease `f`. Such an iteration counts as
//! convergence and the previous iterate is returned; the trace therefore
//! never rises.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnls;
use crate::wds::{DistributionProcess, WindowObservations};
use crate::window::IncidenceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveVariant {
    /// `‖W diag(P) D − diag(WP) R‖_F²`.
    #[default]
    Constrained,
    /// `Σᵢ ‖(W diag(P) D)ᵢ / (WP)ᵢ − Rᵢ‖²`.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub max_outer_iter: usize,
    /// Stop once an iteration lowers the objective by less than this.
    pub convergence_tol: f64,
    /// Stop once an iteration lowers the objective by less than this
    /// fraction of its previous value.
    pub relative_tol: f64,
    pub nnls_tol: f64,
    /// Inner NNLS iteration cap per unknown.
    pub nnls_iter_factor: usize,
    pub objective_variant: ObjectiveVariant,
    /// Only used by the baselines.
    pub seed: u64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            max_outer_iter: 150_000,
            convergence_tol: 1e-30,
            relative_tol: 1e-10,
            nnls_tol: nnls::DEFAULT_TOL,
            nnls_iter_factor: 3,
            objective_variant: ObjectiveVariant::Constrained,
            seed: 0,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iter == 0 || self.nnls_iter_factor == 0 {
            return Err(Error::InvalidParameter("iteration limits must be at least 1".into()));
        }
        for (name, v) in [
            ("convergence_tol", self.convergence_tol),
            ("relative_tol", self.relative_tol),
            ("nnls_tol", self.nnls_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub process: DistributionProcess,
    /// Constrained objective at the returned iterate.
    pub objective: f64,
    /// Objective of the configured variant after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// `‖W diag(P) D − diag(WP) R‖_F²`.
pub fn objective(incidence: &IncidenceMatrix, obs: &WindowObservations, process: &DistributionProcess) -> Result<f64> {
    check_shapes(incidence, obs, process.n_atoms(), process.n_categories())?;
    Ok(objective_raw(incidence.matrix(), obs.r(), process.weights(), process.distributions(), ObjectiveVariant::Constrained))
}

/// `Σᵢ ‖(W diag(P) D)ᵢ / (WP)ᵢ − Rᵢ‖²`; infinite if a window has no mass.
pub fn direct_objective(
    incidence: &IncidenceMatrix,
    obs: &WindowObservations,
    process: &DistributionProcess,
) -> Result<f64> {
    check_shapes(incidence, obs, process.n_atoms(), process.n_categories())?;
    Ok(objective_raw(incidence.matrix(), obs.r(), process.weights(), process.distributions(), ObjectiveVariant::Direct))
}

fn check_shapes(incidence: &IncidenceMatrix, obs: &WindowObservations, n_atoms: usize, m: usize) -> Result<()> {
    if incidence.n_atoms() != n_atoms {
        return Err(Error::DimensionMismatch(format!(
            "incidence has {} atoms, process has {n_atoms}",
            incidence.n_atoms()
        )));
    }
    if obs.n_windows() != incidence.n_windows() || obs.n_categories() != m {
        return Err(Error::DimensionMismatch(format!(
            "observations are {}×{}, expected {}×{m}",
            obs.n_windows(),
            obs.n_categories(),
            incidence.n_windows()
        )));
    }
    Ok(())
}

pub(crate) fn objective_raw(
    w: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DVector<f64>,
    d: &DMatrix<f64>,
    variant: ObjectiveVariant,
) -> f64 {
    let mass = w * p;
    let mut total = 0.0;
    for i in 0..w.nrows() {
        let scale = match variant {
            ObjectiveVariant::Constrained => 1.0,
            ObjectiveVariant::Direct => {
                if mass[i] <= 0.0 {
                    return f64::INFINITY;
                }
                1.0 / (mass[i] * mass[i])
            }
        };
        for j in 0..r.ncols() {
            let mut v = -mass[i] * r[(i, j)];
            for t in 0..w.ncols() {
                if w[(i, t)] != 0.0 {
                    v += w[(i, t)] * p[t] * d[(t, j)];
                }
            }
            total += scale * v * v;
        }
    }
    total
}

/// Warm-start state and NNLS settings shared across outer iterations.
pub(crate) struct Solver<'a> {
    w: &'a DMatrix<f64>,
    r: &'a DMatrix<f64>,
    variant: ObjectiveVariant,
    nnls_tol: f64,
    nnls_iter_factor: usize,
    d_hints: Vec<Option<Vec<bool>>>,
    p_hint: Option<Vec<bool>>,
}

impl<'a> Solver<'a> {
    pub(crate) fn new(w: &'a DMatrix<f64>, r: &'a DMatrix<f64>, config: &ReconstructionConfig) -> Self {
        Solver {
            w,
            r,
            variant: config.objective_variant,
            nnls_tol: config.nnls_tol,
            nnls_iter_factor: config.nnls_iter_factor,
            d_hints: vec![None; r.ncols()],
            p_hint: None,
        }
    }

    pub(crate) fn objective(&self, p: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
        objective_raw(self.w, self.r, p, d, self.variant)
    }

    /// Per-window row weights: 1 for the constrained objective, `1/(WP)ᵢ`
    /// for the direct one.
    fn row_weights(&self, p: &DVector<f64>) -> DVector<f64> {
        let mass = self.w * p;
        match self.variant {
            ObjectiveVariant::Constrained => DVector::from_element(mass.len(), 1.0),
            ObjectiveVariant::Direct => mass.map(|v| if v > 0.0 { 1.0 / v } else { 0.0 }),
        }
    }

    /// D given P: one NNLS per category column, then row normalization.
    pub(crate) fn d_step(&mut self, p: &DVector<f64>) -> Result<DMatrix<f64>> {
        let (n, n_atoms) = self.w.shape();
        let m = self.r.ncols();
        let mass = self.w * p;
        let rw = self.row_weights(p);
        let design = DMatrix::from_fn(n, n_atoms, |i, t| rw[i] * self.w[(i, t)] * p[t]);
        let gram = nnls::gram(&design);
        let targets = DMatrix::from_fn(n, m, |i, j| rw[i] * mass[i] * self.r[(i, j)]);
        let mut d = DMatrix::zeros(n_atoms, m);
        let mut solved = vec![false; m];
        // Columns sharing a warm-start support share one factorization.
        for j in 0..m {
            let Some(hint) = self.d_hints[j].clone() else { continue };
            if solved[j] {
                continue;
            }
            let group: Vec<usize> = (j..m).filter(|&k| !solved[k] && self.d_hints[k].as_ref() == Some(&hint)).collect();
            let bs = targets.select_columns(&group);
            if let Some(x) = nnls::nnls_fixed_support(&design, &gram, &bs, &hint, self.nnls_tol) {
                for (c, &k) in group.iter().enumerate() {
                    d.set_column(k, &x.column(c));
                    solved[k] = true;
                }
            }
        }
        for j in (0..m).filter(|&j| !solved[j]) {
            let target = targets.column(j).into_owned();
            let sol = nnls::nnls_gram(
                &design,
                &gram,
                &target,
                self.d_hints[j].as_deref(),
                self.nnls_iter_factor * n_atoms,
                self.nnls_tol,
            )?;
            self.d_hints[j] = Some(sol.x.iter().map(|&v| v > 0.0).collect());
            d.set_column(j, &sol.x);
        }
        normalize_rows(&mut d, p);
        Ok(d)
    }

    /// P given D: exact simplex minimizer of the quadratic form.
    pub(crate) fn p_step(&mut self, d: &DMatrix<f64>, p_prev: &DVector<f64>) -> Result<DVector<f64>> {
        let (n, n_atoms) = self.w.shape();
        let m = self.r.ncols();
        let rw = self.row_weights(p_prev);
        let mut s = DMatrix::zeros(n * m + 1, n_atoms);
        for i in 0..n {
            for t in 0..n_atoms {
                let wit = self.w[(i, t)];
                if wit == 0.0 {
                    continue;
                }
                for j in 0..m {
                    s[(i * m + j, t)] = rw[i] * wit * (d[(t, j)] - self.r[(i, j)]);
                }
            }
        }
        let rho = s.row_iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let rho = if rho > 0.0 { rho } else { 1.0 };
        s.row_mut(n * m).fill(rho);
        let mut target = DVector::zeros(n * m + 1);
        target[n * m] = rho;
        let gram = nnls::gram(&s);
        let fast = self.p_hint.as_deref().and_then(|h| {
            let b = DMatrix::from_column_slice(n * m + 1, 1, target.as_slice());
            nnls::nnls_fixed_support(&s, &gram, &b, h, self.nnls_tol)
        });
        let x = match fast {
            Some(x) => x.column(0).into_owned(),
            None => {
                let sol = nnls::nnls_gram(
                    &s,
                    &gram,
                    &target,
                    self.p_hint.as_deref(),
                    self.nnls_iter_factor * n_atoms,
                    self.nnls_tol,
                )?;
                self.p_hint = Some(sol.x.iter().map(|&v| v > 0.0).collect());
                sol.x
            }
        };
        let total = x.sum();
        if !(total > 0.0 && total.is_finite()) {
            return Ok(p_prev.clone());
        }
        Ok(x / total)
    }
}

/// Normalizes rows of `d` to sum to one. All-zero rows become the
/// `p`-weighted mean of the remaining rows (uniform if there are none).
fn normalize_rows(d: &mut DMatrix<f64>, p: &DVector<f64>) {
    let m = d.ncols();
    let mut zero_rows = Vec::new();
    for t in 0..d.nrows() {
        let s: f64 = d.row(t).sum();
        if s > 0.0 {
            d.row_mut(t).scale_mut(1.0 / s);
        } else {
            zero_rows.push(t);
        }
    }
    if zero_rows.is_empty() {
        return;
    }
    let mut mean = DVector::zeros(m);
    for t in 0..d.nrows() {
        if !zero_rows.contains(&t) {
            mean += d.row(t).transpose() * p[t];
        }
    }
    let total = mean.sum();
    let mean = if total > 0.0 { mean / total } else { DVector::from_element(m, 1.0 / m as f64) };
    for t in zero_rows {
        d.set_row(t, &mean.transpose());
    }
}

/// Runs the coordinate-descent reconstruction.
pub fn reconstruct(
    incidence: &IncidenceMatrix,
    obs: &WindowObservations,
    config: &ReconstructionConfig,
) -> Result<ReconstructionResult> {
    config.validate()?;
    if obs.incidence() != incidence {
        return Err(Error::DimensionMismatch("observations belong to a different incidence matrix".into()));
    }
    check_shapes(incidence, obs, incidence.n_atoms(), obs.n_categories())?;
    if let Some(atom) = incidence.uncovered_atom() {
        return Err(Error::UncoveredAtom { atom });
    }
    let n_atoms = incidence.n_atoms();
    let mut solver = Solver::new(incidence.matrix(), obs.r(), config);

    let mut p = DVector::from_element(n_atoms, 1.0 / n_atoms as f64);
    let mut d = solver.d_step(&p)?;
    p = solver.p_step(&d, &p)?;
    let mut f = solver.objective(&p, &d);
    let mut trace = vec![f];
    let mut converged = f == 0.0;
    let mut iterations = 1;

    while !converged && iterations < config.max_outer_iter {
        iterations += 1;
        let d_new = solver.d_step(&p)?;
        let p_new = solver.p_step(&d_new, &p)?;
        let f_new = solver.objective(&p_new, &d_new);
        if !f_new.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: iterations });
        }
        let decrease = f - f_new;
        if decrease < 0.0 {
            // Normalization overshot; keep the previous iterate.
            converged = true;
            break;
        }
        p = p_new;
        d = d_new;
        f = f_new;
        trace.push(f);
        converged = f == 0.0 || decrease < config.convergence_tol || decrease < config.relative_tol * (f + decrease);
    }
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: iterations });
    }

    let objective = objective_raw(incidence.matrix(), obs.r(), &p, &d, ObjectiveVariant::Constrained);
    let process = DistributionProcess::with_tolerance(p, d, 1e-12)?;
    Ok(ReconstructionResult { process, objective, objective_trace: trace, converged, iterations })
}
