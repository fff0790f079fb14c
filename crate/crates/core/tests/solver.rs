use mlp_core::complexity::serial_steps;
use mlp_core::norms::relative_nodal_l1;
use mlp_core::parareal::{solve_multilevel, MultilevelSolver};
use mlp_core::problems::{decay, decay_exact, ThreeTimescaleProblem};
use mlp_core::{MethodConfig, C64};

fn decay_config(levels: usize, k: usize) -> MethodConfig {
    MethodConfig::uniform(levels, 0.25, 10, k, 0.0, 2.0, vec![C64::new(1.0, 0.0)])
}

fn decay_error(levels: usize) -> f64 {
    let run = solve_multilevel(&decay_config(levels, 1), &decay()).unwrap();
    let traj = run.final_trajectory();
    let exact: Vec<Vec<C64>> = traj.times().iter().map(|&t| vec![C64::new(decay_exact(t), 0.0)]).collect();
    relative_nodal_l1(traj.states(), &exact, None).unwrap()
}

#[test]
fn decay_errors_by_depth() {
    // frozen from an independent prototype of the same recursion
    let expected = [
        (2, 1.2566212807843e-5),
        (3, 1.95629581642e-5),
        (4, 1.98070994402e-5),
        (5, 1.98095870231e-5),
        (6, 1.98096158569e-5),
    ];
    for (levels, e) in expected {
        let got = decay_error(levels);
        assert!((got / e - 1.0).abs() < 1e-9, "L={levels}: {got:e} vs {e:e}");
    }
}

#[test]
fn enough_iterations_reproduce_the_fine_solution() {
    let cfg = decay_config(2, 8);
    let solver = MultilevelSolver::new(&cfg, &decay()).unwrap();
    let run = solver.run().unwrap();
    let fine = solver.fine_serial().unwrap();
    for (a, b) in run.final_trajectory().states().iter().zip(fine.states()) {
        assert!((a[0] - b[0]).norm() < 1e-14);
    }
}

#[test]
fn workers_do_not_change_results() {
    let p = ThreeTimescaleProblem::default();
    let base = MethodConfig::uniform(3, 0.4, 4, 2, 0.0, 4.0, p.u0.to_vec()).with_etas(&[1.0, 0.1]);
    let a = solve_multilevel(&base.clone().with_workers(1), &p.spec()).unwrap();
    let b = solve_multilevel(&base.with_workers(3), &p.spec()).unwrap();
    assert_eq!(a.final_trajectory().states(), b.final_trajectory().states());
    assert_eq!(a.serial_steps, b.serial_steps);
}

#[test]
fn solver_counts_match_accounting() {
    for levels in 2..=4 {
        for k in 1..=3 {
            let cfg = decay_config(levels, k);
            let run = solve_multilevel(&cfg, &decay()).unwrap();
            assert_eq!(run.serial_steps, serial_steps(&cfg).unwrap().total, "L={levels} k={k}");
        }
    }
}
