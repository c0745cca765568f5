use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use driftwin::nnls::{kkt_violation, nnls_default};
use driftwin::reconstruction::{objective, reconstruct, ReconstructionConfig};
use driftwin::wds::{exact_time_weights, has_drift, induce_observations, DistributionProcess};
use driftwin::window::{atomize, IncidenceMatrix, IntervalWindow};

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

prop_compose! {
    fn process(n_atoms: usize, m: usize)(
        p in prop::collection::vec(0.05f64..1.0, n_atoms),
        d in prop::collection::vec(prop::collection::vec(0.01f64..1.0, m), n_atoms),
    ) -> DistributionProcess {
        let rows: Vec<Vec<f64>> = d.into_iter().map(normalized).collect();
        DistributionProcess::new(
            DVector::from_vec(normalized(p)),
            DMatrix::from_fn(n_atoms, m, |t, j| rows[t][j]),
        )
        .unwrap()
    }
}

fn sized_process() -> impl Strategy<Value = DistributionProcess> {
    (2usize..=6, 2usize..=4).prop_flat_map(|(n, m)| process(n, m))
}

/// Every singleton atom plus every pairwise union.
fn singletons_and_pairs(n_atoms: usize) -> IncidenceMatrix {
    let mut rows = Vec::new();
    for s in 0..n_atoms {
        rows.push((0..n_atoms).map(|t| u8::from(t == s)).collect::<Vec<u8>>());
    }
    for s in 0..n_atoms {
        for t in s + 1..n_atoms {
            rows.push((0..n_atoms).map(|k| u8::from(k == s || k == t)).collect());
        }
    }
    IncidenceMatrix::from_rows(&rows).unwrap()
}

fn windows() -> impl Strategy<Value = Vec<IntervalWindow>> {
    prop::collection::vec((0u32..20, 1u32..8), 1..8).prop_map(|spans| {
        spans
            .into_iter()
            .enumerate()
            .map(|(i, (a, len))| IntervalWindow::single(format!("w{i}"), a as f64, (a + len) as f64))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn atoms_tile_every_window(ws in windows()) {
        let (atoms, inc) = atomize(&ws).unwrap();
        for (i, w) in ws.iter().enumerate() {
            let covered: f64 = inc.support(i).iter().map(|&t| atoms.atoms[t].length).sum();
            prop_assert!((covered - w.length()).abs() < 1e-12);
        }
        for t in 0..inc.n_atoms() {
            prop_assert!(atoms.atoms[t].length > 0.0);
            prop_assert!((0..inc.n_windows()).any(|i| inc.contains(i, t)));
        }
    }

    #[test]
    fn atom_signatures_are_distinct(ws in windows()) {
        let (atoms, _) = atomize(&ws).unwrap();
        for (k, a) in atoms.atoms.iter().enumerate() {
            for b in &atoms.atoms[k + 1..] {
                prop_assert_ne!(&a.signature, &b.signature);
            }
        }
    }

    #[test]
    fn forward_model_is_permutation_equivariant(pr in sized_process(), seed in any::<u64>()) {
        let n = pr.n_atoms();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left((seed % n as u64) as usize);
        if seed & 1 == 1 {
            perm.reverse();
        }
        let inc = singletons_and_pairs(n);
        let obs = induce_observations(&pr, &inc).unwrap();
        let inc_p = inc.permute_atoms(&perm);
        let pr_p = pr.permuted(&perm);
        let obs_p = induce_observations(&pr_p, &inc_p).unwrap();
        prop_assert!((obs.r() - obs_p.r()).amax() < 1e-14);
        let f = objective(&inc_p, &obs, &pr_p).unwrap();
        prop_assert!(f < 1e-28);
    }

    #[test]
    fn observations_ignore_weight_scale(pr in sized_process(), c in 0.01f64..100.0) {
        // R depends on P only through ratios within each window.
        let inc = singletons_and_pairs(pr.n_atoms());
        let w = inc.matrix();
        let p = pr.weights();
        let mass = w * p;
        let scaled = w * (p * c);
        for i in 0..inc.n_windows() {
            prop_assert!((scaled[i] / mass[i] - c).abs() < 1e-12 * c);
        }
        let obs = induce_observations(&pr, &inc).unwrap();
        let direct = DMatrix::from_fn(inc.n_windows(), pr.n_categories(), |i, j| {
            (0..pr.n_atoms()).map(|t| w[(i, t)] * c * p[t] * pr.distributions()[(t, j)]).sum::<f64>() / scaled[i]
        });
        prop_assert!((obs.r() - direct).amax() < 1e-13);
    }

    #[test]
    fn exact_weights_round_trip(pr in sized_process()) {
        prop_assume!(has_drift(&pr, 1e-3));
        let inc = singletons_and_pairs(pr.n_atoms());
        let obs = induce_observations(&pr, &inc).unwrap();
        let p = exact_time_weights(&obs).unwrap();
        prop_assert!((p - pr.weights()).amax() < 1e-8);
    }

    #[test]
    fn drift_iff_observations_vary(pr in sized_process(), constant in any::<bool>()) {
        let pr = if constant {
            let row = pr.distributions().row(0).clone_owned();
            let d = DMatrix::from_fn(pr.n_atoms(), pr.n_categories(), |_, j| row[j]);
            DistributionProcess::new(pr.weights().clone(), d).unwrap()
        } else {
            pr
        };
        let inc = singletons_and_pairs(pr.n_atoms());
        let obs = induce_observations(&pr, &inc).unwrap();
        prop_assert_eq!(has_drift(&pr, 1e-9), !obs.is_constant(1e-9));
    }

    #[test]
    fn reconstruction_trace_is_monotone(pr in sized_process()) {
        let inc = singletons_and_pairs(pr.n_atoms());
        let obs = induce_observations(&pr, &inc).unwrap();
        let config = ReconstructionConfig { max_outer_iter: 300, ..Default::default() };
        let res = reconstruct(&inc, &obs, &config).unwrap();
        for pair in res.objective_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12);
        }
        let f = objective(&inc, &obs, &res.process).unwrap();
        prop_assert!((f - res.objective).abs() <= 1e-12 * (1.0 + f));
    }

    #[test]
    fn nnls_satisfies_kkt(
        (p, q, entries, rhs) in (1usize..=8, 1usize..=8).prop_flat_map(|(p, q)| (
            Just(p),
            Just(q),
            prop::collection::vec(-1.0f64..1.0, p * q),
            prop::collection::vec(-1.0f64..1.0, p),
        ))
    ) {
        let a = DMatrix::from_vec(p, q, entries);
        let b = DVector::from_vec(rhs);
        let res = nnls_default(&a, &b).unwrap();
        prop_assert!(res.x.iter().all(|&x| x >= 0.0));
        prop_assert!(kkt_violation(&a, &b, &res.x) < 1e-10);
    }
}
