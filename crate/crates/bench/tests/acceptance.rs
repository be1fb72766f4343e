//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances and sizes are fixed below.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use adalvr::estimators::{Estimator, EstimatorKind, EstimatorOptions};
use adalvr::optimizer::{rate_fit, reference_solution, Reference, RunTrace};
use adalvr::problems::synthetic::{self, LeastSquaresSpec, LogisticSpec};
use adalvr::scaling::{Discounts, Metric, ScalingState};
use adalvr::verify::{self, LemmaReport};
use adalvr::{linalg, run, Domain, FiniteSumProblem, OptimizerConfig, ScalingKind};
use adalvr_bench::grid::{final_objectives, run_grid, GridSpec, DEFAULT_LTILDES};
use adalvr_bench::workload::{verification_box, WorkloadSpec};
use adalvr_bench::Algorithm;
use rand::Rng;

const UNBIASED_TOL: f64 = 1e-12;
const PINV_TOL: f64 = 1e-12;
const FD_H: f64 = 1e-5;
const FD_TOL: f64 = 1e-5;
const SIGMAS: f64 = 3.0;
const RATE_SLOPE_MAX: f64 = -0.8;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn timed(name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let limit_note = limit.map_or(String::new(), |l| format!(" limit={:.0}s", l.as_secs_f64()));
    Outcome {
        name,
        pass: ok && in_time,
        detail: format!("{detail}; {:.2}s{limit_note}", elapsed.as_secs_f64()),
    }
}

fn rng(seed: u64) -> impl Rng {
    adalvr::rng::seeded(seed)
}

fn point(rng: &mut impl Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn logistic(samples: usize, features: usize, classes: usize, batch: usize, seed: u64) -> FiniteSumProblem {
    let data = synthetic::logistic(&LogisticSpec {
        n_samples: samples,
        n_features: features,
        n_classes: classes,
        seed,
        ..Default::default()
    })
    .unwrap()
    .data;
    FiniteSumProblem::logistic(data, batch).unwrap()
}

fn least_squares(samples: usize, features: usize, batch: usize, seed: u64) -> FiniteSumProblem {
    let data = synthetic::least_squares(&LeastSquaresSpec {
        n_samples: samples,
        n_features: features,
        seed,
        ..Default::default()
    })
    .unwrap()
    .data;
    FiniteSumProblem::least_squares(data, batch).unwrap()
}

fn adalvr_variants() -> Vec<Algorithm> {
    Algorithm::adalvr()
}

/// The desk-scale problem of the rate checks: 1000 samples in 5 features,
/// 5 classes, batches of 5, so n = 200 components and d = 25.
fn rate_problem() -> FiniteSumProblem {
    logistic(1000, 5, 5, 5, 42)
}

fn worst(reports: &[LemmaReport]) -> f64 {
    reports
        .iter()
        .map(|r| r.slack / (1.0 + r.rhs.abs()))
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------

fn unbiasedness() -> (bool, String) {
    let mut rng = rng(1);
    let mut max_dev: f64 = 0.0;
    let mut states = 0;
    for s in 0..100u64 {
        let n = [2usize, 17, 60, 200][s as usize % 4];
        let p = if s % 2 == 0 {
            logistic(n, 3, 3, 1, s)
        } else {
            least_squares(n, 5, 1, s)
        };
        for kind in [EstimatorKind::Sgd, EstimatorKind::Saga, EstimatorKind::Lsvrg] {
            let opts = EstimatorOptions {
                seed: rng.gen(),
                ..Default::default()
            };
            let mut e = Estimator::new(kind, &p, &point(&mut rng, p.dim(), 1.0), opts).unwrap();
            for _ in 0..rng.gen_range(0..2 * n) {
                e.estimate(&point(&mut rng, p.dim(), 1.0)).unwrap();
            }
            let r = verify::check_unbiasedness(&e, &point(&mut rng, p.dim(), 2.0)).unwrap();
            max_dev = max_dev.max(r.lhs);
            states += 1;
        }
    }
    (max_dev <= UNBIASED_TOL, format!("{states} states, max |E g - grad f| = {max_dev:.2e} (tol {UNBIASED_TOL:e})"))
}

fn pseudo_inverse() -> (bool, String) {
    let mut rng = rng(2);
    let mut max_rel: f64 = 0.0;
    let mut zero_cases = 0;
    for s in 0..10_000 {
        let d = rng.gen_range(1..8);
        let kind = if s % 2 == 0 { ScalingKind::AdaGradNorm } else { ScalingKind::AdaGradDiag };
        let mut st = ScalingState::new(kind, d, 1.0, Discounts::default()).unwrap();
        for _ in 0..rng.gen_range(1..10) {
            let g: Vec<f64> = (0..d)
                .map(|_| match rng.gen_range(0..4) {
                    0 => 0.0,
                    1 => rng.gen_range(-1e-4..1e-4),
                    _ => rng.gen_range(-10.0..10.0),
                })
                .collect();
            if g.contains(&0.0) {
                zero_cases += 1;
            }
            st.accumulate(&g).unwrap();
            let r = verify::check_pseudo_inverse(&st.root().unwrap(), &g);
            max_rel = max_rel.max(r.lhs);
        }
    }
    (max_rel <= PINV_TOL, format!("10000 sequences ({zero_cases} steps with zero coordinates), max residual {max_rel:.2e}"))
}

struct LemmaRun {
    trace: RunTrace,
    domain: Domain,
    x_star: Vec<f64>,
}

/// 200 projected recorded runs over four problems and the four variants.
fn lemma_runs() -> Vec<LemmaRun> {
    let problems = [
        least_squares(60, 5, 1, 3),
        least_squares(200, 20, 4, 4),
        logistic(120, 4, 3, 2, 5),
        logistic(400, 10, 5, 2, 6),
    ];
    let refs: Vec<Reference> = problems.iter().map(|p| reference_solution(p, 1e-9).unwrap()).collect();
    let variants = adalvr_variants();
    (0..200usize)
        .into_par_iter()
        .map(|k| {
            let mut r = rng(1000 + k as u64);
            let pi = k % problems.len();
            let p = &problems[pi];
            let alg = variants[(k / problems.len()) % 4];
            let x1 = vec![0.0; p.dim()];
            let domain = verification_box(&x1, Some(&refs[pi].x), None).unwrap();
            let t = r.gen_range(50..=2000);
            let eta = 10f64.powf(r.gen_range(-1.5..1.0));
            let cfg = OptimizerConfig::new(alg.estimator, alg.scaling, eta, t)
                .projected(domain.clone())
                .with_seed(k as u64)
                .with_history()
                .with_stride(t);
            LemmaRun {
                trace: run(&cfg, p, &x1).unwrap(),
                domain,
                x_star: refs[pi].x.clone(),
            }
        })
        .collect()
}

fn regret_bound(runs: &[LemmaRun]) -> (bool, String) {
    let reports: Vec<LemmaReport> = runs
        .iter()
        .map(|r| verify::check_regret_bound(&r.trace, &r.domain, r.trace.eta, &r.x_star).unwrap())
        .collect();
    let all = reports.iter().all(|r| r.pass);

    // Negative control: iterates held at a far corner while every estimate
    // points away from x*; regret grows like T, the bound like sqrt(T).
    let base = &runs[0];
    let mut bad = base.trace.clone();
    let h = bad.history.as_mut().unwrap();
    let Domain::Box { lower, .. } = &base.domain else { unreachable!() };
    let dir = linalg::sub(lower, &base.x_star);
    let steps = 400;
    h.iterates = vec![lower.clone(); steps + 1];
    h.estimates = vec![dir.iter().map(|v| 50.0 * v).collect(); steps];
    h.roots = vec![Metric::Scalar(1.0); steps];
    let eta = base.domain.diameter() / 2f64.sqrt();
    let control = verify::check_regret_bound(&bad, &base.domain, eta, &base.x_star).unwrap();

    (
        all && !control.pass,
        format!(
            "{}/{} runs pass, worst relative slack {:.3e}; corrupted trace fails: {}",
            reports.iter().filter(|r| r.pass).count(),
            reports.len(),
            worst(&reports),
            !control.pass
        ),
    )
}

fn trace_and_distance_bounds(runs: &[LemmaRun]) -> (bool, String) {
    let mut reports = Vec::new();
    for r in runs {
        let (sum, norm) = verify::check_trace_bounds(&r.trace).unwrap();
        reports.push(sum);
        reports.push(norm);
        reports.push(verify::check_weighted_distance(&r.trace, &r.domain, &r.x_star).unwrap());
    }
    let all = reports.iter().all(|r| r.pass);

    // Controls: preconditioners shrunk tenfold, iterates pushed out of the box.
    let long = runs.iter().find(|r| r.trace.iterations > 200).expect("a long run");
    let mut shrunk = long.trace.clone();
    for a in shrunk.history.as_mut().unwrap().roots.iter_mut() {
        *a = match a {
            Metric::Scalar(s) => Metric::Scalar(0.1 * *s),
            Metric::Diagonal(v) => Metric::Diagonal(v.iter().map(|x| 0.1 * x).collect()),
        };
    }
    let c4 = verify::check_trace_bounds(&shrunk).unwrap().0;
    let mut outside = long.trace.clone();
    let far = long.domain.diameter() * 10.0;
    for x in outside.history.as_mut().unwrap().iterates.iter_mut() {
        x.iter_mut().for_each(|v| *v = far);
    }
    let c3 = verify::check_weighted_distance(&outside, &long.domain, &long.x_star).unwrap();

    (
        all && !c4.pass && !c3.pass,
        format!(
            "{}/{} checks pass, worst relative slack {:.3e}; controls fail: trace {} distance {}",
            reports.iter().filter(|r| r.pass).count(),
            reports.len(),
            worst(&reports),
            !c4.pass,
            !c3.pass
        ),
    )
}

fn theorem_bound(problem: &FiniteSumProblem, reference: &Reference) -> (bool, String) {
    const T: usize = 5000;
    let eta = 1.0;
    let x1 = vec![0.0; problem.dim()];
    let domain = verification_box(&x1, Some(&reference.x), None).unwrap();
    let delta1 = problem.value(&x1).unwrap() - reference.value;
    let n = problem.n_components();
    let l = problem.smoothness_upper_bound();
    let mut ok = true;
    let mut notes = Vec::new();
    for id in ["adasaga-norm", "adalsvrg-norm"] {
        let alg: Algorithm = id.parse().unwrap();
        let gaps: Vec<f64> = (0..100u64)
            .into_par_iter()
            .map(|seed| {
                let cfg = OptimizerConfig::new(alg.estimator, alg.scaling, eta, T)
                    .projected(domain.clone())
                    .with_seed(seed)
                    .with_stride(T);
                let tr = run(&cfg, problem, &x1).unwrap();
                tr.final_checkpoint().unwrap().average_objective - reference.value
            })
            .collect();
        let alpha = alg.scaling.alpha(problem.dim()).unwrap();
        let bound = verify::rate_bound(alpha, eta, domain.diameter(), l, n, delta1, T);
        let r = verify::check_rate_bound(&gaps, bound, SIGMAS);
        ok &= r.pass;
        notes.push(format!("{id}: mean gap {:.3e} <= {:.3e}", r.lhs, r.rhs));
    }
    (ok, notes.join(", "))
}

fn rate_trend(problem: &FiniteSumProblem, reference: &Reference) -> (bool, String) {
    const T: usize = 5000;
    let x1 = vec![0.0; problem.dim()];
    let mut ok = true;
    let mut notes = Vec::new();
    for alg in adalvr_variants() {
        let traces: Vec<RunTrace> = (0..20u64)
            .into_par_iter()
            .map(|seed| {
                let cfg = OptimizerConfig::new(alg.estimator, alg.scaling, 1.0, T)
                    .with_seed(seed)
                    .with_stride(50);
                run(&cfg, problem, &x1).unwrap()
            })
            .collect();
        match rate_fit(&traces, reference.value) {
            Ok(fit) => {
                ok &= fit.slope <= RATE_SLOPE_MAX;
                notes.push(format!("{alg} {:.2}", fit.slope));
            }
            Err(e) => {
                ok = false;
                notes.push(format!("{alg} fit failed: {e}"));
            }
        }
    }
    (ok, format!("slopes (max {RATE_SLOPE_MAX}): {}", notes.join(", ")))
}

fn telescoping(problem: &FiniteSumProblem, reference: &Reference) -> (bool, String) {
    const T: usize = 500;
    let x1 = vec![0.0; problem.dim()];
    let domain = verification_box(&x1, Some(&reference.x), None).unwrap();
    let delta1 = problem.value(&x1).unwrap() - reference.value;
    let (n, l) = (problem.n_components(), problem.smoothness_upper_bound());
    let mut ok = true;
    let mut notes = Vec::new();
    for id in ["adasaga-norm", "adasaga-diag", "adalsvrg-norm", "adalsvrg-diag"] {
        let alg: Algorithm = id.parse().unwrap();
        let per_run: Vec<(f64, f64)> = (0..200u64)
            .into_par_iter()
            .map(|seed| {
                let cfg = OptimizerConfig::new(alg.estimator, alg.scaling, 1.0, T)
                    .projected(domain.clone())
                    .with_seed(seed)
                    .with_history()
                    .with_stride(T);
                verify::telescoping_terms(&run(&cfg, problem, &x1).unwrap(), reference.value).unwrap()
            })
            .collect();
        let r = verify::check_telescoping(&per_run, l, n, delta1, SIGMAS);
        ok &= r.pass;
        notes.push(format!("{id}: {:.3e} <= {:.3e}", r.lhs, r.rhs));
    }
    (ok, notes.join(", "))
}

fn robustness() -> (bool, String) {
    let w = WorkloadSpec::default().build().unwrap();
    let spec = GridSpec {
        algorithms: vec!["saga".parse().unwrap(), "adasaga-diag".parse().unwrap()],
        ltildes: DEFAULT_LTILDES.to_vec(),
        epochs: 10.0,
        ..Default::default()
    };
    let rows = run_grid(&spec, &w.train, None).unwrap();
    let finals = final_objectives(&rows);
    let value = |alg: &str, lt: f64| finals.iter().find(|c| c.0 == alg && c.1 == lt).unwrap().3;
    let wins: Vec<f64> = DEFAULT_LTILDES
        .iter()
        .copied()
        .filter(|&lt| value("adasaga-diag", lt) < value("saga", lt))
        .collect();
    (wins.len() >= 4, format!("AdaSAGA-Diag lower in {}/6 cells (L̃ = {wins:?})", wins.len()))
}

fn gradient_accounting(problem: &FiniteSumProblem) -> (bool, String) {
    let n = problem.n_components() as u64;
    let x1 = vec![0.0; problem.dim()];
    let mut ok = true;
    let mut runs = 0;
    let mut refreshes = 0;
    for seed in 0..10u64 {
        for t in [1usize, 2, 137, 1000] {
            for scaling in [ScalingKind::Identity, ScalingKind::AdaGradNorm, ScalingKind::AdaGradDiag] {
                let saga = run(&OptimizerConfig::new(EstimatorKind::Saga, scaling, 0.5, t).with_seed(seed).with_stride(t), problem, &x1).unwrap();
                ok &= saga.gradient_count == n + (t as u64 - 1);
                let lsvrg = run(&OptimizerConfig::new(EstimatorKind::Lsvrg, scaling, 0.5, t).with_seed(seed).with_stride(t), problem, &x1).unwrap();
                ok &= lsvrg.gradient_count == n + 2 * (t as u64 - 1) + n * lsvrg.refresh_count;
                refreshes += lsvrg.refresh_count;
                runs += 2;
            }
        }
    }
    (ok && refreshes > 0, format!("{runs} runs exact, {refreshes} L-SVRG refreshes"))
}

fn finite_differences() -> (bool, String) {
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, p) in [("logistic", logistic(80, 4, 3, 4, 9)), ("least-squares", least_squares(80, 6, 4, 9))] {
        let mut r = rng(3);
        let mut max_err: f64 = 0.0;
        for _ in 0..100 {
            let x = point(&mut r, p.dim(), 1.0);
            let g = p.full_grad(&x).unwrap();
            let mut xp = x.clone();
            let fd: Vec<f64> = (0..x.len())
                .map(|j| {
                    xp[j] = x[j] + FD_H;
                    let up = p.value(&xp).unwrap();
                    xp[j] = x[j] - FD_H;
                    let down = p.value(&xp).unwrap();
                    xp[j] = x[j];
                    (up - down) / (2.0 * FD_H)
                })
                .collect();
            max_err = max_err.max(linalg::dist_sq(&fd, &g).sqrt() / linalg::norm(&g).max(1.0));
        }
        ok &= max_err <= FD_TOL;
        notes.push(format!("{name} {max_err:.2e}"));
    }
    (ok, format!("max relative error (tol {FD_TOL:e}): {}", notes.join(", ")))
}

fn main() {
    let problem = rate_problem();
    let reference = reference_solution(&problem, 1e-10).expect("reference solution");
    let mut outcomes = vec![
        timed("unbiasedness", Some(Duration::from_secs(10)), unbiasedness),
        timed("pseudo_inverse_identity", None, pseudo_inverse),
    ];
    let start = Instant::now();
    let runs = lemma_runs();
    let build = start.elapsed();
    outcomes.push(timed("regret_bound", Some(Duration::from_secs(60).saturating_sub(build)), || {
        regret_bound(&runs)
    }));
    outcomes.push(timed("trace_and_distance_bounds", None, || trace_and_distance_bounds(&runs)));
    outcomes.push(timed("rate_bound_theorem", Some(Duration::from_secs(300)), || {
        theorem_bound(&problem, &reference)
    }));
    outcomes.push(timed("rate_trend", None, || rate_trend(&problem, &reference)));
    outcomes.push(timed("telescoping_bound", None, || telescoping(&problem, &reference)));
    outcomes.push(timed("robustness_to_ltilde", None, robustness));
    outcomes.push(timed("gradient_accounting", None, || gradient_accounting(&problem)));
    outcomes.push(timed("finite_differences", None, finite_differences));

    println!("lemma runs built in {:.2}s", build.as_secs_f64());
    for o in &outcomes {
        println!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
