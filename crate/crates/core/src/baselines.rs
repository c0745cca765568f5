//! Nelder–Mead baseline.
//!
//! Only `P` is searched, through the softmax map `z ↦ exp(z) / Σ exp(z)`,
//! so every vertex is a point of the simplex. For each candidate `P` the
//! distributions `D` come from the same D-step as the coordinate-descent
//! solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::reconstruction::{objective_raw, ObjectiveVariant, ReconstructionConfig, ReconstructionResult, Solver};
use crate::wds::{DistributionProcess, WindowObservations};
use crate::window::IncidenceMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop when the spread of vertex values is below
    /// `f_tol_abs + f_tol_rel · |f_best|` and the simplex diameter below
    /// `x_tol`.
    pub f_tol_abs: f64,
    pub f_tol_rel: f64,
    pub x_tol: f64,
    /// Offset of the initial vertices along each coordinate.
    pub initial_step: f64,
}

/// Termination defaults of the common reference implementation: absolute
/// tolerances of 1e-4 on values and positions, 200 iterations per dimension.
impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { max_iter: 10_000, f_tol_abs: 1e-4, f_tol_rel: 0.0, x_tol: 1e-4, initial_step: 0.05 }
    }
}

/// Iterations per dimension allowed by default.
pub const ITERATIONS_PER_DIMENSION: usize = 200;

/// Vertices with their values, sorted ascending by value.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexState {
    pub vertices: Vec<DVector<f64>>,
    pub values: Vec<f64>,
}

impl SimplexState {
    fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        self.vertices = order.iter().map(|&k| self.vertices[k].clone()).collect();
        self.values = order.iter().map(|&k| self.values[k]).collect();
    }

    fn diameter(&self) -> f64 {
        let best = &self.vertices[0];
        self.vertices[1..].iter().map(|v| (v - best).amax()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: DVector<f64>,
    pub value: f64,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from `x0` with the standard coefficients (reflection 1,
/// expansion 2, contraction ½, shrink ½).
pub fn nelder_mead<F>(mut f: F, x0: &DVector<f64>, opts: &NelderMeadOptions) -> Result<NelderMeadResult>
where
    F: FnMut(&DVector<f64>) -> Result<f64>,
{
    let dim = x0.len();
    if dim == 0 {
        return Err(Error::EmptyInput("Nelder–Mead start point"));
    }
    let mut evaluations = 0;
    let mut eval = |x: &DVector<f64>| -> Result<f64> {
        evaluations += 1;
        let v = f(x)?;
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    };

    let mut vertices = vec![x0.clone()];
    for k in 0..dim {
        let mut v = x0.clone();
        v[k] += opts.initial_step;
        vertices.push(v);
    }
    let values = vertices.iter().map(&mut eval).collect::<Result<Vec<_>>>()?;
    let mut s = SimplexState { vertices, values };
    s.sort();

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let spread = s.values[dim] - s.values[0];
        if spread <= opts.f_tol_abs + opts.f_tol_rel * s.values[0].abs() && s.diameter() <= opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid = s.vertices[..dim].iter().fold(DVector::zeros(dim), |acc, v| acc + v) / dim as f64;
        let worst = s.vertices[dim].clone();
        let xr = &centroid + (&centroid - &worst) * REFLECT;
        let fr = eval(&xr)?;
        let mut shrink = false;
        if fr < s.values[0] {
            let xe = &centroid + (&xr - &centroid) * EXPAND;
            let fe = eval(&xe)?;
            if fe < fr {
                s.vertices[dim] = xe;
                s.values[dim] = fe;
            } else {
                s.vertices[dim] = xr;
                s.values[dim] = fr;
            }
        } else if fr < s.values[dim - 1] {
            s.vertices[dim] = xr;
            s.values[dim] = fr;
        } else if fr < s.values[dim] {
            let xc = &centroid + (&xr - &centroid) * CONTRACT;
            let fc = eval(&xc)?;
            if fc <= fr {
                s.vertices[dim] = xc;
                s.values[dim] = fc;
            } else {
                shrink = true;
            }
        } else {
            let xc = &centroid + (&worst - &centroid) * CONTRACT;
            let fc = eval(&xc)?;
            if fc < s.values[dim] {
                s.vertices[dim] = xc;
                s.values[dim] = fc;
            } else {
                shrink = true;
            }
        }
        if shrink {
            let best = s.vertices[0].clone();
            for k in 1..=dim {
                s.vertices[k] = &best + (&s.vertices[k] - &best) * SHRINK;
                s.values[k] = eval(&s.vertices[k])?;
            }
        }
        s.sort();
        trace.push(s.values[0]);
    }

    Ok(NelderMeadResult {
        x: s.vertices[0].clone(),
        value: s.values[0],
        trace,
        iterations,
        evaluations,
        converged,
    })
}

fn softmax(z: &DVector<f64>) -> DVector<f64> {
    let zmax = z.max();
    let e = z.map(|v| (v - zmax).exp());
    let s = e.sum();
    e / s
}

/// Reconstructs `(P, D)` by Nelder–Mead over `P` alone.
///
/// Termination follows [`NelderMeadOptions::default`] with at most
/// `200 · N` iterations, further capped by `config.max_outer_iter`; the
/// other solver settings in `config` apply to the inner D-step.
pub fn nelder_mead_reconstruct(
    incidence: &IncidenceMatrix,
    obs: &WindowObservations,
    config: &ReconstructionConfig,
) -> Result<ReconstructionResult> {
    config.validate()?;
    if obs.incidence() != incidence {
        return Err(Error::DimensionMismatch("observations belong to a different incidence matrix".into()));
    }
    if let Some(atom) = incidence.uncovered_atom() {
        return Err(Error::UncoveredAtom { atom });
    }
    let n_atoms = incidence.n_atoms();
    let w = incidence.matrix();
    let r = obs.r();
    let mut solver = Solver::new(w, r, config);

    let (p, d, trace, iterations, converged) = if n_atoms == 1 {
        let p = DVector::from_element(1, 1.0);
        let d = solver.d_step(&p)?;
        let f = solver.objective(&p, &d);
        (p, d, vec![f], 0, true)
    } else {
        let opts = NelderMeadOptions {
            max_iter: config.max_outer_iter.min(ITERATIONS_PER_DIMENSION * n_atoms),
            ..Default::default()
        };
        let res = nelder_mead(
            |z| {
                let p = softmax(z);
                let d = solver.d_step(&p)?;
                Ok(solver.objective(&p, &d))
            },
            &DVector::zeros(n_atoms),
            &opts,
        )?;
        let p = softmax(&res.x);
        let d = solver.d_step(&p)?;
        (p, d, res.trace, res.iterations, res.converged)
    };
    if trace.last().is_some_and(|f| !f.is_finite()) {
        return Err(Error::NonFiniteObjective { iteration: iterations });
    }
    let objective = objective_raw(w, r, &p, &d, ObjectiveVariant::Constrained);
    let process = DistributionProcess::with_tolerance(p, d, 1e-12)?;
    Ok(ReconstructionResult { process, objective, objective_trace: trace, converged, iterations })
}

/// D-step output for a fixed `P`, exposed for callers that search over `P`
/// themselves.
pub fn distributions_for_weights(
    incidence: &IncidenceMatrix,
    obs: &WindowObservations,
    weights: &DVector<f64>,
    config: &ReconstructionConfig,
) -> Result<DMatrix<f64>> {
    if weights.len() != incidence.n_atoms() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} atoms",
            weights.len(),
            incidence.n_atoms()
        )));
    }
    Solver::new(incidence.matrix(), obs.r(), config).d_step(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wds::induce_observations;

    #[test]
    fn quadratic_minimum() {
        let c = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let opts = NelderMeadOptions { f_tol_abs: 1e-20, x_tol: 1e-10, ..Default::default() };
        let res = nelder_mead(|x| Ok((x - &c).norm_squared()), &DVector::zeros(3), &opts).unwrap();
        assert!(res.converged);
        assert!((res.x - c).amax() < 1e-6);
        for w in res.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn single_atom_converges_immediately() {
        let inc = IncidenceMatrix::from_rows(&[vec![1], vec![1]]).unwrap();
        let obs = WindowObservations::new(DMatrix::from_row_slice(2, 2, &[0.2, 0.8, 0.6, 0.4]), inc.clone()).unwrap();
        let res = nelder_mead_reconstruct(&inc, &obs, &ReconstructionConfig::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
        assert_eq!(res.process.weights().as_slice(), &[1.0]);
    }

    #[test]
    fn small_instance_is_feasible_and_close() {
        let inc = IncidenceMatrix::from_rows(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 1, 1]]).unwrap();
        let d = DMatrix::from_row_slice(3, 2, &[0.9, 0.1, 0.5, 0.5, 0.2, 0.8]);
        let proc = DistributionProcess::new(DVector::from_vec(vec![0.3, 0.3, 0.4]), d).unwrap();
        let obs = induce_observations(&proc, &inc).unwrap();
        let res = nelder_mead_reconstruct(&inc, &obs, &ReconstructionConfig::default()).unwrap();
        assert!((res.process.weights().sum() - 1.0).abs() < 1e-12);
        assert!(res.objective < 1e-8, "{}", res.objective);
    }
}
