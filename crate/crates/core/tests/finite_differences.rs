mod common;

use adalvr::linalg;
use adalvr::FiniteSumProblem;

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-5;

/// Central differences of `f` along each coordinate.
fn numeric_grad(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|j| {
            let orig = xp[j];
            xp[j] = orig + H;
            let up = f(&xp);
            xp[j] = orig - H;
            let down = f(&xp);
            xp[j] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    linalg::dist_sq(a, b).sqrt() / linalg::norm(b).max(1.0)
}

fn check(problem: &FiniteSumProblem, seed: u64) -> f64 {
    let mut rng = common::rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let x = common::point(&mut rng, problem.dim(), 1.0);
        let full = problem.full_grad(&x).unwrap();
        let fd = numeric_grad(|z| problem.value(z).unwrap(), &x);
        worst = worst.max(rel_err(&fd, &full));
        let i = k % problem.n_components();
        let comp = problem.component_grad(i, &x).unwrap();
        let fd = numeric_grad(|z| problem.component_value(i, z).unwrap(), &x);
        worst = worst.max(rel_err(&fd, &comp));
    }
    worst
}

#[test]
fn logistic_gradients_match_central_differences() {
    let p = common::logistic(60, 4, 3, 6, 11);
    let worst = check(&p, 1);
    assert!(worst <= REL_TOL, "worst relative error {worst:e}");
}

#[test]
fn least_squares_gradients_match_central_differences() {
    let p = common::least_squares(60, 7, 6, 12);
    let worst = check(&p, 2);
    assert!(worst <= REL_TOL, "worst relative error {worst:e}");
}
