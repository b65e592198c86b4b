mod common;

use gne_core::conditions::check_existence;
use gne_core::model::rates;
use gne_core::solvers::{
    sequential_iwfa, simultaneous_iwfa, solve_single_subchannel, verify_gne, verify_kkt,
};
use gne_core::{PowerAllocation, SolverOptions};
use rand::Rng;

#[test]
fn converged_runs_are_equilibria() {
    let mut rng = common::rng(21);
    let opts = SolverOptions::default();
    let mut converged = 0;
    for _ in 0..150 {
        let s = common::mixed_scenario(&mut rng);
        let p0 = PowerAllocation::zeros(s.num_users(), s.num_subchannels());
        for out in [
            sequential_iwfa(&s, &p0, &opts).unwrap(),
            simultaneous_iwfa(&s, &p0, &opts).unwrap(),
        ] {
            if !out.converged {
                continue;
            }
            converged += 1;
            let tol = 10.0 * opts.residual_tol;
            let gne = verify_gne(&s, &out.powers, tol).unwrap();
            assert!(gne.is_gne, "deviation {}", gne.max_deviation);
            let kkt = verify_kkt(&s, &out.powers, 1e-12).unwrap();
            assert!(kkt.max_violation() <= tol, "{kkt:?}");
            assert!(kkt.multipliers_positive);
            if let Some(pbar) = check_existence(&s).bound {
                for (p, b) in out.powers.as_flat().iter().zip(pbar.as_flat()) {
                    assert!(*p <= b + 1e-9, "{p} above bound {b}");
                }
            }
        }
    }
    assert!(converged > 100);
}

#[test]
fn unique_equilibrium_reached_from_any_start() {
    let mut rng = common::rng(22);
    let opts = SolverOptions::default();
    for _ in 0..40 {
        let s = common::certified_scenario(&mut rng);
        let (q, n) = (s.num_users(), s.num_subchannels());
        let starts = [
            PowerAllocation::zeros(q, n),
            PowerAllocation::filled(q, n, 1.0).unwrap(),
            common::random_allocation(&mut rng, q, n, 10.0),
        ];
        let reference = sequential_iwfa(&s, &starts[0], &opts).unwrap();
        assert!(reference.converged);
        for p0 in &starts {
            for out in [
                sequential_iwfa(&s, p0, &opts).unwrap(),
                simultaneous_iwfa(&s, p0, &opts).unwrap(),
            ] {
                assert!(out.converged);
                assert!(out.powers.max_abs_diff(&reference.powers) <= 1e-7);
            }
        }
    }
}

#[test]
fn single_subchannel_closed_form_is_the_bound() {
    let mut rng = common::rng(23);
    let opts = SolverOptions::default();
    let mut checked = 0;
    while checked < 60 {
        let q = rng.random_range(1..=6);
        let s = common::random_scenario(&mut rng, q, 1, 0.3, (0.1, 1.0));
        let Some(pbar) = check_existence(&s).bound else {
            assert!(solve_single_subchannel(&s).is_err());
            continue;
        };
        checked += 1;
        let closed = solve_single_subchannel(&s).unwrap();
        assert!(closed.max_abs_diff(&pbar) <= 1e-9);
        let out = simultaneous_iwfa(&s, &PowerAllocation::zeros(q, 1), &opts).unwrap();
        if out.converged {
            assert!(out.powers.max_abs_diff(&closed) <= 1e-8);
        }
    }
}

#[test]
fn trace_records_every_sweep() {
    let mut rng = common::rng(24);
    let s = common::certified_scenario(&mut rng);
    let p0 = PowerAllocation::zeros(s.num_users(), s.num_subchannels());
    let out = sequential_iwfa(&s, &p0, &SolverOptions::default()).unwrap();
    let snaps = &out.trace.snapshots;
    assert_eq!(snaps.len(), out.iterations);
    assert!(snaps
        .iter()
        .enumerate()
        .all(|(i, snap)| snap.iteration == i + 1));
    let last = snaps.last().unwrap();
    assert_eq!(last.powers, out.powers);
    assert_eq!(last.residual, out.final_residual);
    assert_eq!(last.rates, rates(&s, &out.powers).unwrap());

    let quiet = SolverOptions {
        record_trace: false,
        ..Default::default()
    };
    let bare = sequential_iwfa(&s, &p0, &quiet).unwrap();
    assert!(bare.trace.snapshots.is_empty());
    assert_eq!(bare.powers, out.powers);
}

#[test]
fn rejects_bad_options_and_shapes() {
    let mut rng = common::rng(25);
    let s = common::certified_scenario(&mut rng);
    let p0 = PowerAllocation::zeros(s.num_users(), s.num_subchannels());
    let zero_cap = SolverOptions {
        max_iterations: 0,
        ..Default::default()
    };
    assert!(sequential_iwfa(&s, &p0, &zero_cap).is_err());
    let bad_tol = SolverOptions {
        residual_tol: -1.0,
        ..Default::default()
    };
    assert!(simultaneous_iwfa(&s, &p0, &bad_tol).is_err());
    let wrong = PowerAllocation::zeros(s.num_users() + 1, s.num_subchannels());
    assert!(sequential_iwfa(&s, &wrong, &SolverOptions::default()).is_err());
}

#[test]
fn runaway_powers_stop_without_error() {
    // power doubles every sweep and overflows long before the cap
    let s = gne_core::Scenario::symmetric(2, 1, 1.0, 2.0, 1.0, std::f64::consts::LN_2).unwrap();
    let out =
        simultaneous_iwfa(&s, &PowerAllocation::zeros(2, 1), &SolverOptions::default()).unwrap();
    assert!(!out.converged);
    assert!(out.iterations < 2000, "{}", out.iterations);
    assert!(out.powers.as_flat().iter().all(|v| v.is_finite()));
}
