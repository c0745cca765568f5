//! Seeded rank-sweep reconstruction benchmark.
//!
//! Instance generation: a horizon `[0, K)` with `K` drawn uniformly from
//! `grid`, `n = round(rank · K)` windows, each a single interval `[a, b)`
//! whose endpoints are two distinct integers drawn uniformly from
//! `0..=K`. The draw is repeated until the number of windows per atom `n/N`
//! is within `rank_tolerance` (relative) of the target and `N ≤ max_atoms`;
//! optionally also until the noiseless solution is unique
//! ([`solution_space_dimension`] equal to one). `P` and every row of `D`
//! are drawn from the flat Dirichlet distribution.
//!
//! Every `(rank, run)` cell gets its own seed derived from the base seed, so
//! results do not depend on scheduling.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::nelder_mead_reconstruct;
use crate::error::{Error, Result};
use crate::io::{self, LabeledMatrix};
use crate::reconstruction::{reconstruct, ReconstructionConfig, ReconstructionResult};
use crate::seeding::{derive_seed, rng};
use crate::wds::{induce_observations, solution_space_dimension, DistributionProcess, WindowObservations};
use crate::window::{atomize_with_horizon, IncidenceMatrix, IntervalWindow};

/// Errors below this are reported as this value on the log scale.
pub const ERROR_FLOOR: f64 = 1e-40;
/// Atoms with smaller true weight are left out of the D error.
pub const D_ERROR_MIN_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOptions {
    pub m: usize,
    /// Inclusive range of grid sizes `K`.
    pub grid: [usize; 2],
    pub max_atoms: usize,
    pub rank_tolerance: f64,
    pub require_identifiable: bool,
    pub identifiability_tol: f64,
    pub max_attempts: usize,
}

impl Default for InstanceOptions {
    fn default() -> Self {
        InstanceOptions {
            m: 5,
            grid: [6, 12],
            max_atoms: 32,
            rank_tolerance: 0.05,
            require_identifiable: false,
            identifiability_tol: 1e-9,
            max_attempts: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub target_rank: f64,
    pub windows: Vec<IntervalWindow>,
    pub incidence: IncidenceMatrix,
    pub process: DistributionProcess,
    pub obs: WindowObservations,
    /// Dimension of the exact-solution space; one means identifiable.
    pub solution_dim: usize,
}

impl Instance {
    /// `n / N`.
    pub fn windows_per_atom(&self) -> f64 {
        self.incidence.n_windows() as f64 / self.incidence.n_atoms() as f64
    }

    /// `N / n`.
    pub fn atoms_per_window(&self) -> f64 {
        self.incidence.n_atoms() as f64 / self.incidence.n_windows() as f64
    }
}

/// Flat Dirichlet sample via normalized exponentials.
pub fn flat_dirichlet<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn generate_instance<R: Rng + ?Sized>(target_rank: f64, opts: &InstanceOptions, rng: &mut R) -> Result<Instance> {
    if !(target_rank > 0.0) || opts.m < 2 || opts.grid[0] < 1 || opts.grid[0] > opts.grid[1] {
        return Err(Error::InvalidParameter(format!(
            "cannot generate instances for rank {target_rank}, m = {}, grid {:?}",
            opts.m, opts.grid
        )));
    }
    for _ in 0..opts.max_attempts {
        let k = rng.random_range(opts.grid[0]..=opts.grid[1]);
        let n = ((target_rank * k as f64).round() as usize).max(1);
        let windows: Vec<IntervalWindow> = (0..n)
            .map(|i| {
                let a = rng.random_range(0..=k);
                let mut b = rng.random_range(0..k);
                if b >= a {
                    b += 1;
                }
                IntervalWindow::single(format!("w{i}"), a.min(b) as f64, a.max(b) as f64)
            })
            .collect();
        let (atoms, incidence) = atomize_with_horizon(&windows, Some([0.0, k as f64]))?;
        let n_atoms = atoms.len();
        let ratio = n as f64 / n_atoms as f64;
        if n_atoms > opts.max_atoms || (ratio - target_rank).abs() > opts.rank_tolerance * target_rank {
            continue;
        }
        let p = DVector::from_vec(flat_dirichlet(rng, n_atoms));
        let d_rows: Vec<f64> = (0..n_atoms).flat_map(|_| flat_dirichlet(rng, opts.m)).collect();
        let d = DMatrix::from_row_slice(n_atoms, opts.m, &d_rows);
        let process = DistributionProcess::new(p, d)?;
        let obs = induce_observations(&process, &incidence)?;
        let solution_dim = solution_space_dimension(&obs, opts.identifiability_tol);
        if opts.require_identifiable && solution_dim != 1 {
            continue;
        }
        return Ok(Instance { target_rank, windows, incidence, process, obs, solution_dim });
    }
    Err(Error::InvalidParameter(format!(
        "no instance for rank {target_rank} within {} attempts",
        opts.max_attempts
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "cd")]
    CoordinateDescent,
    #[serde(rename = "nelder-mead")]
    NelderMead,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::CoordinateDescent => "cd",
            SolverKind::NelderMead => "nelder-mead",
        }
    }

    pub fn run(self, inst: &Instance, config: &ReconstructionConfig) -> Result<ReconstructionResult> {
        match self {
            SolverKind::CoordinateDescent => reconstruct(&inst.incidence, &inst.obs, config),
            SolverKind::NelderMead => nelder_mead_reconstruct(&inst.incidence, &inst.obs, config),
        }
    }
}

/// Table columns with no implementation here.
pub const ABSENT_SOLVERS: [&str; 2] = ["slsqp-constrained", "slsqp-direct"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub ranks: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub instance: InstanceOptions,
    pub solvers: Vec<SolverKind>,
    pub cd: ReconstructionConfig,
    pub nelder_mead: ReconstructionConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            ranks: vec![1.0, 1.4, 1.9, 2.2, 2.6],
            runs: 10,
            seed: 0,
            instance: InstanceOptions::default(),
            solvers: vec![SolverKind::CoordinateDescent, SolverKind::NelderMead],
            cd: ReconstructionConfig::default(),
            nelder_mead: ReconstructionConfig { max_outer_iter: 5_000, ..ReconstructionConfig::default() },
        }
    }
}

/// Median of `|D − D*|` over rows whose true weight exceeds
/// [`D_ERROR_MIN_WEIGHT`].
pub fn d_error(truth: &DistributionProcess, est: &DistributionProcess) -> f64 {
    let mut errs = Vec::new();
    for t in 0..truth.n_atoms() {
        if truth.weights()[t] > D_ERROR_MIN_WEIGHT {
            for j in 0..truth.n_categories() {
                errs.push((truth.distributions()[(t, j)] - est.distributions()[(t, j)]).abs());
            }
        }
    }
    median(&mut errs)
}

/// Median of `|P − P*|`.
pub fn p_error(truth: &DistributionProcess, est: &DistributionProcess) -> f64 {
    let mut errs: Vec<f64> = truth.weights().iter().zip(est.weights().iter()).map(|(a, b)| (a - b).abs()).collect();
    median(&mut errs)
}

pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

pub fn neg_log10(x: f64) -> f64 {
    -x.max(ERROR_FLOOR).log10()
}

/// Largest increase between consecutive trace entries (zero if none).
pub fn max_trace_increase(trace: &[f64]) -> f64 {
    trace.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// One solver on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rank: f64,
    pub run: usize,
    pub solver: String,
    pub seed: u64,
    pub n_windows: usize,
    pub n_atoms: usize,
    pub windows_per_atom: f64,
    pub atoms_per_window: f64,
    pub solution_dim: usize,
    pub d_error: f64,
    pub p_error: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_trace_increase: f64,
}

/// Aggregate over the runs of one `(rank, solver)` pair. Log-scale columns
/// hold `−log₁₀` of the per-run values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub rank: f64,
    pub solver: String,
    pub status: String,
    pub runs: usize,
    pub windows_per_atom: Option<f64>,
    pub atoms_per_window: Option<f64>,
    pub d_mean: Option<f64>,
    pub d_std: Option<f64>,
    pub p_mean: Option<f64>,
    pub p_std: Option<f64>,
    pub f_mean: Option<f64>,
    pub f_std: Option<f64>,
    pub d_error_median: Option<f64>,
    pub p_error_median: Option<f64>,
    pub objective_median: Option<f64>,
    pub converged_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Generates the instance of one `(rank, run)` cell.
pub fn cell_instance(config: &BenchmarkConfig, rank_index: usize, run: usize) -> Result<(u64, Instance)> {
    let seed = derive_seed(config.seed, &[rank_index as u64, run as u64]);
    let inst = generate_instance(config.ranks[rank_index], &config.instance, &mut rng(seed))?;
    Ok((seed, inst))
}

pub fn evaluate(
    inst: &Instance,
    solver: SolverKind,
    config: &ReconstructionConfig,
    run: usize,
    seed: u64,
) -> Result<(RunRecord, ReconstructionResult)> {
    let res = solver.run(inst, config)?;
    let rec = RunRecord {
        rank: inst.target_rank,
        run,
        solver: solver.name().into(),
        seed,
        n_windows: inst.incidence.n_windows(),
        n_atoms: inst.incidence.n_atoms(),
        windows_per_atom: inst.windows_per_atom(),
        atoms_per_window: inst.atoms_per_window(),
        solution_dim: inst.solution_dim,
        d_error: d_error(&inst.process, &res.process),
        p_error: p_error(&inst.process, &res.process),
        objective: res.objective,
        iterations: res.iterations,
        converged: res.converged,
        max_trace_increase: max_trace_increase(&res.objective_trace),
    };
    Ok((rec, res))
}

pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if config.runs == 0 || config.ranks.is_empty() {
        return Err(Error::InvalidParameter("need at least one rank and one run".into()));
    }
    let cells: Vec<(usize, usize)> =
        (0..config.ranks.len()).flat_map(|r| (0..config.runs).map(move |k| (r, k))).collect();
    let per_cell: Vec<Vec<RunRecord>> = cells
        .par_iter()
        .map(|&(r, k)| {
            let (seed, inst) = cell_instance(config, r, k)?;
            config
                .solvers
                .iter()
                .map(|&s| {
                    let cfg = match s {
                        SolverKind::CoordinateDescent => &config.cd,
                        SolverKind::NelderMead => &config.nelder_mead,
                    };
                    evaluate(&inst, s, cfg, k, seed).map(|(rec, _)| rec)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut runs: Vec<RunRecord> = per_cell.into_iter().flatten().collect();
    runs.sort_by(|a, b| a.rank.total_cmp(&b.rank).then(a.run.cmp(&b.run)).then(a.solver.cmp(&b.solver)));
    let summary = summarize(config, &runs);
    Ok(BenchmarkReport { runs, summary })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn summarize(config: &BenchmarkConfig, runs: &[RunRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    let mut ranks = config.ranks.clone();
    ranks.sort_by(f64::total_cmp);
    ranks.dedup();
    let mut solvers = config.solvers.clone();
    solvers.sort();
    solvers.dedup();
    for &rank in &ranks {
        for &solver in &solvers {
            let sel: Vec<&RunRecord> = runs.iter().filter(|r| r.rank == rank && r.solver == solver.name()).collect();
            let col = |f: &dyn Fn(&RunRecord) -> f64| sel.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (d_mean, d_std) = mean_std(&col(&|r| neg_log10(r.d_error)));
            let (p_mean, p_std) = mean_std(&col(&|r| neg_log10(r.p_error)));
            let (f_mean, f_std) = mean_std(&col(&|r| neg_log10(r.objective)));
            rows.push(SummaryRow {
                rank,
                solver: solver.name().into(),
                status: "ok".into(),
                runs: sel.len(),
                windows_per_atom: Some(mean_std(&col(&|r| r.windows_per_atom)).0),
                atoms_per_window: Some(mean_std(&col(&|r| r.atoms_per_window)).0),
                d_mean: Some(d_mean),
                d_std: Some(d_std),
                p_mean: Some(p_mean),
                p_std: Some(p_std),
                f_mean: Some(f_mean),
                f_std: Some(f_std),
                d_error_median: Some(median(&mut col(&|r| r.d_error))),
                p_error_median: Some(median(&mut col(&|r| r.p_error))),
                objective_median: Some(median(&mut col(&|r| r.objective))),
                converged_fraction: Some(sel.iter().filter(|r| r.converged).count() as f64 / sel.len() as f64),
            });
        }
        for name in ABSENT_SOLVERS {
            rows.push(SummaryRow {
                rank,
                solver: name.into(),
                status: "not_implemented".into(),
                runs: 0,
                windows_per_atom: None,
                atoms_per_window: None,
                d_mean: None,
                d_std: None,
                p_mean: None,
                p_std: None,
                f_mean: None,
                f_std: None,
                d_error_median: None,
                p_error_median: None,
                objective_median: None,
                converged_fraction: None,
            });
        }
    }
    rows
}

fn write_records<T: Serialize, W: std::io::Write>(rows: &[T], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl BenchmarkReport {
    pub fn write_summary_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        write_records(&self.summary, writer)
    }

    pub fn write_runs_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        write_records(&self.runs, writer)
    }
}

/// Writes `windows.json`, `incidence.csv`, `R.csv`, `P.csv` and `D.csv`
/// for an instance into `dir`.
pub fn write_fixture(inst: &Instance, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    io::write_json_file(&inst.windows, &dir.join("windows.json"))?;
    io::incidence_to_csv(&inst.incidence).write_file(&dir.join("incidence.csv"))?;
    io::observations_to_csv(&inst.obs).write_file(&dir.join("R.csv"))?;
    io::weights_to_csv(inst.process.weights()).write_file(&dir.join("P.csv"))?;
    io::distributions_to_csv(inst.process.distributions()).write_file(&dir.join("D.csv"))?;
    Ok(())
}

/// Reads a fixture written by [`write_fixture`] back as observations and
/// the generating process.
pub fn read_fixture(dir: &Path) -> Result<(WindowObservations, DistributionProcess)> {
    let inc = io::incidence_from_csv(LabeledMatrix::read_file(&dir.join("incidence.csv"))?)?;
    let obs = io::observations_from_csv(LabeledMatrix::read_file(&dir.join("R.csv"))?, inc)?;
    let proc = io::process_from_csv(
        LabeledMatrix::read_file(&dir.join("P.csv"))?,
        LabeledMatrix::read_file(&dir.join("D.csv"))?,
    )?;
    Ok((obs, proc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_instances_meet_the_rank_target() {
        let opts = InstanceOptions::default();
        let mut r = rng(3);
        for rank in [1.0, 1.9, 2.6] {
            let inst = generate_instance(rank, &opts, &mut r).unwrap();
            assert!((inst.windows_per_atom() - rank).abs() <= 0.05 * rank);
            assert!(inst.incidence.n_atoms() <= opts.max_atoms);
            assert!((inst.process.weights().sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identifiable_instances_have_unique_solutions() {
        let opts = InstanceOptions { require_identifiable: true, ..Default::default() };
        let inst = generate_instance(2.2, &opts, &mut rng(5)).unwrap();
        assert_eq!(inst.solution_dim, 1);
    }

    #[test]
    fn metrics() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(neg_log10(1e-3), 3.0);
        assert_eq!(neg_log10(0.0), 40.0);
        assert_eq!(max_trace_increase(&[3.0, 2.0, 2.5, 1.0]), 0.5);
    }

    #[test]
    fn summary_is_deterministic() {
        let config = BenchmarkConfig { ranks: vec![2.2, 1.4], runs: 2, seed: 11, ..Default::default() };
        let a = run_benchmark(&config).unwrap();
        let b = run_benchmark(&config).unwrap();
        let (mut sa, mut sb) = (Vec::new(), Vec::new());
        a.write_summary_csv(&mut sa).unwrap();
        b.write_summary_csv(&mut sb).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(a.summary.len(), 2 * (2 + ABSENT_SOLVERS.len()));
        assert_eq!(a.summary[0].rank, 1.4);
    }
}
