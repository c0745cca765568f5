//! Acceptance criteria. Runs as a plain binary so every criterion prints its
//! PASS/FAIL line; the process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use driftwin::benchmark::{
    flat_dirichlet, max_trace_increase, median, run_benchmark, BenchmarkConfig, BenchmarkReport, InstanceOptions,
    RunRecord, SolverKind,
};
use driftwin::nnls::{kkt_violation, nnls_default};
use driftwin::reconstruction::{reconstruct, ReconstructionConfig};
use driftwin::seeding::{derive_seed, rng};
use driftwin::water::{
    empirical_quantile, fit_demand, hour_coverage, predict_community, simulate_households, DemandProfile, HOURS,
};
use driftwin::wds::{
    check_compatibility, check_wds_axioms, exact_time_weights, has_drift, induce_observations, DistributionProcess,
    WdsCheckOptions, DRIFT_TOL,
};
use driftwin::window::{atomize_with_horizon, IncidenceMatrix, IntervalWindow};

const SEED: u64 = 2024;
const MONOTONE_TOL: f64 = 1e-12;

struct Outcome {
    passed: bool,
    line: String,
}

fn report(id: &str, passed: bool, detail: String, out: &mut Vec<Outcome>) {
    let line = format!("{} criterion {id}: {detail}", if passed { "PASS" } else { "FAIL" });
    println!("{line}");
    out.push(Outcome { passed, line });
}

fn info(id: &str, detail: String) {
    println!("INFO criterion {id}: {detail}");
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn recovery_config(solver: SolverKind) -> BenchmarkConfig {
    BenchmarkConfig {
        ranks: vec![1.9, 2.2, 2.6],
        runs: 50,
        seed: SEED,
        instance: InstanceOptions { m: 5, max_atoms: 32, require_identifiable: true, ..Default::default() },
        solvers: vec![solver],
        ..Default::default()
    }
}

fn csv_bytes(rep: &BenchmarkReport) -> Vec<u8> {
    let mut buf = Vec::new();
    rep.write_summary_csv(&mut buf).unwrap();
    rep.write_runs_csv(&mut buf).unwrap();
    buf
}

/// Criterion 1, plus the runs reused by criteria 2, 4 and 8.
fn noiseless_recovery(out: &mut Vec<Outcome>) -> (BenchmarkReport, Vec<u8>) {
    let t = Instant::now();
    let rep = run_benchmark(&recovery_config(SolverKind::CoordinateDescent)).unwrap();
    let elapsed = t.elapsed();
    let ok = |r: &RunRecord| r.d_error <= 1e-6 && r.objective <= 1e-12;
    let good = rep.runs.iter().filter(|r| ok(r)).count();
    for rank in [1.9, 2.2, 2.6] {
        let sel: Vec<&RunRecord> = rep.runs.iter().filter(|r| r.rank == rank).collect();
        let mut d: Vec<f64> = sel.iter().map(|r| r.d_error).collect();
        let mut f: Vec<f64> = sel.iter().map(|r| r.objective).collect();
        info(
            "1",
            format!(
                "rank {rank}: {}/{} instances within bounds, median D-error {:.1e}, median objective {:.1e}, {} hit the iteration cap",
                sel.iter().filter(|r| ok(r)).count(),
                sel.len(),
                median(&mut d),
                median(&mut f),
                sel.iter().filter(|r| !r.converged).count()
            ),
        );
    }
    report(
        "1",
        good == rep.runs.len() && elapsed <= Duration::from_secs(300),
        format!(
            "{good}/{} instances with median elementwise D-error <= 1e-6 and objective <= 1e-12; runtime {:.0}s (limit 300s)",
            rep.runs.len(),
            secs(elapsed)
        ),
        out,
    );
    let bytes = csv_bytes(&rep);
    (rep, bytes)
}

fn solver_ordering(cd: &BenchmarkReport, out: &mut Vec<Outcome>) -> BenchmarkReport {
    let t = Instant::now();
    let nm = run_benchmark(&recovery_config(SolverKind::NelderMead)).unwrap();
    info("2", format!("Nelder-Mead runtime {:.0}s", secs(t.elapsed())));
    let n = cd.runs.len();
    assert_eq!(n, nm.runs.len());
    let mut d_wins = 0;
    let mut f_wins = 0;
    for (a, b) in cd.runs.iter().zip(&nm.runs) {
        assert_eq!((a.rank, a.run), (b.rank, b.run));
        d_wins += usize::from(a.d_error <= b.d_error);
        f_wins += usize::from(a.objective <= b.objective);
    }
    report(
        "2",
        d_wins as f64 >= 0.8 * n as f64 && f_wins as f64 >= 0.9 * n as f64,
        format!("coordinate descent D-error <= Nelder-Mead in {d_wins}/{n} (need 80%), objective <= in {f_wins}/{n} (need 90%)"),
        out,
    );
    nm
}

/// Singletons plus every pairwise union.
fn singleton_union_system(n_atoms: usize) -> IncidenceMatrix {
    let mut rows = Vec::new();
    for t in 0..n_atoms {
        let mut r = vec![0u8; n_atoms];
        r[t] = 1;
        rows.push(r);
    }
    for s in 0..n_atoms {
        for t in s + 1..n_atoms {
            let mut r = vec![0u8; n_atoms];
            r[s] = 1;
            r[t] = 1;
            rows.push(r);
        }
    }
    IncidenceMatrix::from_rows(&rows).unwrap()
}

fn random_process<R: Rng>(rng: &mut R, n_atoms: usize, m: usize) -> DistributionProcess {
    let p = DVector::from_vec(flat_dirichlet(rng, n_atoms));
    let rows: Vec<f64> = (0..n_atoms).flat_map(|_| flat_dirichlet(rng, m)).collect();
    DistributionProcess::new(p, DMatrix::from_row_slice(n_atoms, m, &rows)).unwrap()
}

fn oracle_equivalence(out: &mut Vec<Outcome>) -> Vec<f64> {
    let t = Instant::now();
    let mut p_fail = 0;
    let mut d_fail = 0;
    let mut worst_p: f64 = 0.0;
    let mut worst_d: f64 = 0.0;
    let mut increases = Vec::new();
    for k in 0..100u64 {
        let mut r = rng(derive_seed(SEED, &[3, k]));
        let n_atoms = r.random_range(2..=8);
        let m = r.random_range(2..=5);
        let proc = random_process(&mut r, n_atoms, m);
        let inc = singleton_union_system(n_atoms);
        let obs = induce_observations(&proc, &inc).unwrap();
        let p = exact_time_weights(&obs).unwrap();
        let pe = (&p - proc.weights()).amax();
        worst_p = worst_p.max(pe);
        p_fail += usize::from(pe > 1e-8);
        let res = reconstruct(&inc, &obs, &ReconstructionConfig::default()).unwrap();
        increases.push(max_trace_increase(&res.objective_trace));
        let mut de: f64 = 0.0;
        for t in (0..n_atoms).filter(|&t| proc.weights()[t] > 1e-3) {
            for j in 0..m {
                de = de.max((res.process.distributions()[(t, j)] - proc.distributions()[(t, j)]).abs());
            }
        }
        worst_d = worst_d.max(de);
        d_fail += usize::from(de > 1e-6);
    }
    let elapsed = t.elapsed();
    report(
        "3",
        p_fail == 0 && d_fail == 0 && elapsed <= Duration::from_secs(120),
        format!(
            "P within 1e-8 in {}/100 (worst {worst_p:.1e}), D within 1e-6 in {}/100 (worst {worst_d:.1e}); runtime {:.1}s (limit 120s)",
            100 - p_fail,
            100 - d_fail,
            secs(elapsed)
        ),
        out,
    );
    increases
}

fn monotone_descent(groups: &[(&str, Vec<f64>)], out: &mut Vec<Outcome>) {
    let mut total = 0;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for (name, inc) in groups {
        let v = inc.iter().filter(|&&x| x > MONOTONE_TOL).count();
        info("4", format!("{name}: {v} violations in {} traces", inc.len()));
        total += inc.len();
        violations += v;
        worst = inc.iter().copied().fold(worst, f64::max);
    }
    report(
        "4",
        violations == 0,
        format!("{violations} objective increases above 1e-12 in {total} traces (largest {worst:.1e})"),
        out,
    );
}

/// Accelerated projected gradient with adaptive restart.
fn projected_gradient(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let ata = a.transpose() * a;
    let atb = a.transpose() * b;
    let lipschitz = ata.symmetric_eigenvalues().max();
    let q = a.ncols();
    if lipschitz <= 0.0 {
        return DVector::zeros(q);
    }
    let step = 1.0 / lipschitz;
    let f = |x: &DVector<f64>| (a * x - b).norm_squared();
    let mut x = DVector::zeros(q);
    let mut y = x.clone();
    let mut theta = 1.0_f64;
    let mut fx = f(&x);
    for _ in 0..200_000 {
        let grad = &ata * &y - &atb;
        let x_new = (&y - grad * step).map(|v| v.max(0.0));
        let f_new = f(&x_new);
        if f_new > fx {
            y = x.clone();
            theta = 1.0;
            continue;
        }
        let theta_new = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
        y = &x_new + (&x_new - &x) * ((theta - 1.0) / theta_new);
        let moved = (&x_new - &x).amax();
        x = x_new;
        fx = f_new;
        theta = theta_new;
        if moved <= 1e-15 * (1.0 + x.amax()) {
            break;
        }
    }
    x
}

fn nnls_correctness(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let mut disagree = 0;
    let mut kkt_fail = 0;
    let mut worst: f64 = 0.0;
    for k in 0..500u64 {
        let mut r = rng(derive_seed(SEED, &[5, k]));
        let p = r.random_range(1..=20);
        let q = r.random_range(1..=20);
        let a = DMatrix::from_fn(p, q, |_, _| r.random_range(-1.0..1.0));
        let b = DVector::from_fn(p, |_, _| r.random_range(-1.0..1.0));
        let sol = nnls_default(&a, &b).unwrap();
        let oracle = projected_gradient(&a, &b);
        let f_nnls = sol.residual_norm * sol.residual_norm;
        let f_oracle = (&a * &oracle - &b).norm_squared();
        let gap = (f_nnls - f_oracle).abs();
        worst = worst.max(gap);
        disagree += usize::from(gap > 1e-8);
        kkt_fail += usize::from(!(sol.converged && kkt_violation(&a, &b, &sol.x) <= 1e-10));
    }
    let elapsed = t.elapsed();
    report(
        "5",
        disagree == 0 && kkt_fail == 0 && elapsed <= Duration::from_secs(60),
        format!(
            "{}/500 objectives within 1e-8 of the projected-gradient oracle (largest gap {worst:.1e}), KKT failures {kkt_fail}; runtime {:.1}s (limit 60s)",
            500 - disagree,
            secs(elapsed)
        ),
        out,
    );
}

fn random_windows<R: Rng>(r: &mut R) -> IncidenceMatrix {
    let k = r.random_range(3..=8);
    let n = r.random_range(2..=8);
    let windows: Vec<IntervalWindow> = (0..n)
        .map(|i| {
            let a = r.random_range(0..k);
            let b = r.random_range(a + 1..=k);
            IntervalWindow::single(format!("w{i}"), a as f64, b as f64)
        })
        .collect();
    atomize_with_horizon(&windows, Some([0.0, k as f64])).unwrap().1
}

fn forward_invariants(out: &mut Vec<Outcome>) {
    let opts = WdsCheckOptions::default();
    let mut axiom_fail = 0;
    let mut compat_fail = 0;
    let mut drift_mismatch = 0;
    let mut worst: f64 = 0.0;
    let mut drifting = 0;
    for k in 0..1000u64 {
        let mut r = rng(derive_seed(SEED, &[6, k]));
        let inc = random_windows(&mut r);
        let n_atoms = inc.n_atoms();
        let m = r.random_range(2..=5);
        let mut proc = random_process(&mut r, n_atoms, m);
        if k % 3 == 0 {
            // Constant process.
            let row = proc.distributions().row(0).into_owned();
            let d = DMatrix::from_fn(n_atoms, m, |_, j| row[j]);
            proc = DistributionProcess::new(proc.weights().clone(), d).unwrap();
        }
        let obs = induce_observations(&proc, &inc).unwrap();
        let axioms = check_wds_axioms(&obs, None, &opts).unwrap();
        axiom_fail += usize::from(!axioms.passed());
        let compat = check_compatibility(&obs, proc.weights(), &opts).unwrap();
        worst = worst.max(compat.max_residual);
        compat_fail += usize::from(!(compat.compatible && compat.max_residual <= 1e-10));

        // Drift against singleton windows; one in four processes gets a dead
        // atom whose distribution differs from the rest.
        let mut p = proc.weights().clone();
        let mut d = proc.distributions().clone();
        if k % 4 == 1 && n_atoms > 1 {
            p[n_atoms - 1] = 0.0;
            p /= p.sum();
            let alt: Vec<f64> = flat_dirichlet(&mut r, m);
            d.set_row(n_atoms - 1, &DVector::from_vec(alt).transpose());
        }
        let proc = DistributionProcess::new(p.clone(), d).unwrap();
        let live: Vec<usize> = (0..n_atoms).filter(|&t| p[t] > 0.0).collect();
        let rows: Vec<Vec<u8>> = live
            .iter()
            .map(|&t| (0..n_atoms).map(|s| u8::from(s == t)).collect())
            .collect();
        let singles = IncidenceMatrix::from_rows(&rows).unwrap();
        let r_single = induce_observations(&proc, &singles).unwrap();
        let distinct = (0..live.len()).any(|a| {
            (a + 1..live.len()).any(|b| (r_single.r().row(a) - r_single.r().row(b)).amax() > DRIFT_TOL)
        });
        let drift = has_drift(&proc, DRIFT_TOL);
        drifting += usize::from(drift);
        drift_mismatch += usize::from(drift != distinct);
    }
    info("6", format!("{drifting}/1000 processes drift"));
    report(
        "6",
        axiom_fail == 0 && compat_fail == 0 && drift_mismatch == 0,
        format!(
            "axiom failures {axiom_fail}, compatibility failures {compat_fail} (largest residual {worst:.1e}), drift disagreements {drift_mismatch} over 1000 processes"
        ),
        out,
    );
}

fn water_pipeline(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let profile = DemandProfile::two_peak();
    let sim = simulate_households(&profile, 500, 4.0, SEED).unwrap();
    let holdout: Vec<usize> = (150..500).collect();
    let est = fit_demand(&sim.logs[..150]).unwrap();
    let truth = sim.hourly_mean(&(0..500).collect::<Vec<_>>());
    let per_household = predict_community(&est, 1, 0.5).unwrap();
    let mut worst_mean: f64 = 0.0;
    for h in 0..HOURS {
        worst_mean = worst_mean.max((per_household.mean[h] - truth[h]).abs() / truth[h]);
    }

    // Best linear unbiased estimator's standard error per hour, from the
    // true per-hour variances and the fit households' reading intervals.
    let cols = sim.hourly_consumption.ncols();
    let true_var: Vec<f64> = (0..HOURS)
        .map(|h| {
            let v: Vec<f64> =
                (0..500).flat_map(|i| (h..cols).step_by(HOURS).map(move |k| (i, k))).map(|(i, k)| sim.hourly_consumption[(i, k)]).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        })
        .collect();
    let mut fisher = DMatrix::<f64>::zeros(HOURS, HOURS);
    for log in &sim.logs[..150] {
        for w in log.readings.windows(2) {
            let c = hour_coverage(w[0].timestamp, w[1].timestamp);
            let s: f64 = (0..HOURS).map(|h| c[h] * true_var[h]).sum();
            for i in 0..HOURS {
                for j in 0..HOURS {
                    fisher[(i, j)] += c[i] * c[j] / s;
                }
            }
        }
    }
    if let Some(cov) = fisher.try_inverse() {
        let rel: Vec<f64> = (0..HOURS).map(|h| cov[(h, h)].sqrt() / truth[h]).collect();
        let worst = rel.iter().copied().fold(0.0, f64::max);
        let mut sorted = rel.clone();
        info(
            "7",
            format!(
                "standard error of the best linear unbiased hourly estimate at this data size: median {:.1}%, largest {:.1}% of the true mean",
                100.0 * median(&mut sorted),
                100.0 * worst
            ),
        );
    }

    let series = sim.community_series(&holdout);
    let days = series.len() / HOURS;
    let empirical: Vec<f64> = (0..HOURS)
        .map(|h| empirical_quantile(&(0..days).map(|d| series[d * HOURS + h]).collect::<Vec<_>>(), 0.95))
        .collect();
    let empirical_peak = empirical.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let predicted = predict_community(&est, holdout.len(), 0.95).unwrap();
    let peak_err = (predicted.peak() - empirical_peak).abs() / empirical_peak;
    let elapsed = t.elapsed();
    report(
        "7",
        worst_mean <= 0.10 && peak_err <= 0.05 && elapsed <= Duration::from_secs(180),
        format!(
            "largest hourly mean error {:.1}% (limit 10%), 0.95-quantile peak {:.0} L vs hold-out {:.0} L, error {:.1}% (limit 5%); runtime {:.1}s (limit 180s)",
            100.0 * worst_mean,
            predicted.peak(),
            empirical_peak,
            100.0 * peak_err,
            secs(elapsed)
        ),
        out,
    );
}

fn determinism(first: &[u8], out: &mut Vec<Outcome>) {
    let rep = run_benchmark(&recovery_config(SolverKind::CoordinateDescent)).unwrap();
    let again = csv_bytes(&rep);
    report(
        "8",
        again == first,
        format!("repeated recovery run produced {}identical CSV ({} bytes)", if again == first { "byte-" } else { "non-" }, again.len()),
        out,
    );
}

fn main() {
    // `cargo test` passes libtest flags; filter on a name if one is given.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let wanted = |id: &str| filter.as_deref().is_none_or(|f| id.contains(f));
    let mut out = Vec::new();

    if wanted("recovery") || wanted("ordering") || wanted("monotone") || wanted("determinism") {
        let (cd, bytes) = noiseless_recovery(&mut out);
        let nm = solver_ordering(&cd, &mut out);
        let oracle = oracle_equivalence(&mut out);
        monotone_descent(
            &[
                ("coordinate descent (criterion 1)", cd.runs.iter().map(|r| r.max_trace_increase).collect()),
                ("Nelder-Mead (criterion 2)", nm.runs.iter().map(|r| r.max_trace_increase).collect()),
                ("coordinate descent (criterion 3)", oracle),
            ],
            &mut out,
        );
        nnls_correctness(&mut out);
        forward_invariants(&mut out);
        water_pipeline(&mut out);
        determinism(&bytes, &mut out);
    } else {
        if wanted("oracle") {
            oracle_equivalence(&mut out);
        }
        if wanted("nnls") {
            nnls_correctness(&mut out);
        }
        if wanted("forward") {
            forward_invariants(&mut out);
        }
        if wanted("water") {
            water_pipeline(&mut out);
        }
    }

    let failed: Vec<&Outcome> = out.iter().filter(|o| !o.passed).collect();
    println!("{} of {} criteria passed", out.len() - failed.len(), out.len());
    if !failed.is_empty() {
        for o in failed {
            eprintln!("{}", o.line);
        }
        std::process::exit(1);
    }
}
